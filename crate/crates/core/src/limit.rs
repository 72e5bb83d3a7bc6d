//! The Gaussian pair `X(t) = (K(t), L(t))` on `[0, 1]` that drives the
//! local-to-unity limit laws, and the two ratio functionals
//!
//! ```text
//! D(gamma) = int L dK / (2 f(0) int e^{-2 gamma (1-t)} L^2 dt)
//! L(gamma) = int L dK / (2 f(0) sqrt(int e^{-2 gamma (1-t)} L^2 dt))
//! ```
//!
//! `X` has independent Gaussian increments with covariance `Gamma(t)`:
//!
//! ```text
//! gamma11(t) = e^{-2g} (e^{2gt} - 1) / (2g)
//! gamma12(t) = t E|eps|
//! gamma22(t) = e^{2g} (1 - e^{-2gt}) / (2g)
//! ```
//!
//! and equivalently `dX = Lambda^{1/2}(t) dB(h(t))` with the time change
//! `h(t) = (sinh(2g) - sinh(2g(1-t))) / g`.
//!
//! Paths come from two independent routes: exact Gaussian increments on a
//! uniform grid ([`Route::GaussianIncrement`]) and partial sums of a finite
//! AR(1) with `rho_n = e^{g/n}` ([`Route::FiniteAr1`]).

use crate::error::{Error, Result};
use crate::innovations::{sign, Purpose, RngStream};
use crate::montecarlo::{ks_one_sample, std_normal_cdf};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Below this `|gamma|` the closed forms are replaced by their `gamma -> 0` limits.
pub const SMALL_GAMMA: f64 = 1e-8;

/// Largest `|gamma|` whose path magnitudes `e^{2|gamma|}` stay representable.
pub const MAX_ABS_GAMMA: f64 = 350.0;

pub const DEFAULT_GRID: usize = 2000;

/// Grid points per unit of `|gamma|` used by [`resolved_grid`].
pub const GRID_PER_UNIT_GAMMA: f64 = 40.0;

/// Symmetric-or-not 2x2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn symmetric(a11: f64, a12: f64, a22: f64) -> Self {
        Mat2([[a11, a12], [a12, a22]])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::symmetric(a, 0.0, b)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn mul(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    pub fn sub(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (self.0, other.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let d = self.sub(other);
        d.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `expm1(x) / x`, continuous at zero.
fn expm1_ratio(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// `Gamma(t) - Gamma(s)` for `s <= t`, evaluated without cancellation.
pub fn gamma_increment(s: f64, t: f64, gamma: f64, mean_abs: f64) -> Mat2 {
    let dt = t - s;
    let g11 = (-2.0 * gamma * (1.0 - s)).exp() * dt * expm1_ratio(2.0 * gamma * dt);
    let g22 = (2.0 * gamma * (1.0 - s)).exp() * dt * expm1_ratio(-2.0 * gamma * dt);
    Mat2::symmetric(g11, mean_abs * dt, g22)
}

/// Covariance matrix `Gamma(t)` of `X(t)`.
pub fn gamma_matrix(t: f64, gamma: f64, mean_abs: f64) -> Mat2 {
    if gamma.abs() < SMALL_GAMMA {
        return Mat2::symmetric(t, t * mean_abs, t);
    }
    gamma_increment(0.0, t, gamma, mean_abs)
}

/// `Lambda(t)` with entries `(1 -+ tanh(2g(1-t)))/2` and `E|eps| sech(2g(1-t))/2`.
pub fn lambda_matrix(t: f64, gamma: f64, mean_abs: f64) -> Mat2 {
    let x = 2.0 * gamma * (1.0 - t);
    // (1 - tanh x)/2 = 1/(1 + e^{2x}), sech(x)/2 = 1/(e^x + e^-x)
    let l11 = 1.0 / (1.0 + (2.0 * x).exp());
    let l22 = 1.0 / (1.0 + (-2.0 * x).exp());
    let l12 = mean_abs / (x.exp() + (-x).exp());
    Mat2::symmetric(l11, l12, l22)
}

/// Time change `h(t) = (sinh(2g) - sinh(2g(1-t))) / g`; `2t` as `g -> 0`.
pub fn h_timechange(t: f64, gamma: f64) -> f64 {
    if gamma.abs() < SMALL_GAMMA {
        return 2.0 * t;
    }
    ((2.0 * gamma).sinh() - (2.0 * gamma * (1.0 - t)).sinh()) / gamma
}

/// `h'(t) = 2 cosh(2g(1-t))`.
pub fn h_prime(t: f64, gamma: f64) -> f64 {
    2.0 * (2.0 * gamma * (1.0 - t)).cosh()
}

/// Symmetric square root of a positive semidefinite 2x2 matrix.
pub fn sqrt_psd_2x2(m: &Mat2) -> Result<Mat2> {
    let (a, b, c) = (m.get(0, 0), m.get(1, 1), m.get(0, 1));
    if (m.get(1, 0) - c).abs() > 1e-12 * (1.0 + c.abs()) {
        return Err(Error::Numerical("matrix is not symmetric".into()));
    }
    let half_tr = 0.5 * (a + b);
    let rad = (0.25 * (a - b) * (a - b) + c * c).sqrt();
    let min_eig = half_tr - rad;
    if min_eig < -1e-10 {
        return Err(Error::Numerical(format!(
            "matrix has negative eigenvalue {min_eig:e}"
        )));
    }
    let s = (a * b - c * c).max(0.0).sqrt();
    let t = (a + b + 2.0 * s).sqrt();
    if t == 0.0 {
        return Ok(Mat2::ZERO);
    }
    Ok(Mat2::symmetric((a + s) / t, c / t, (b + s) / t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Route {
    GaussianIncrement,
    FiniteAr1 { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLawConfig {
    pub gamma: f64,
    pub mean_abs: f64,
    pub f0: f64,
    pub grid_m: usize,
    pub route: Route,
}

impl LimitLawConfig {
    /// Standard normal innovations on the default grid.
    pub fn normal(gamma: f64, route: Route) -> Self {
        let spec =
            crate::innovations::attributes(crate::innovations::InnovationKind::StandardNormal);
        Self {
            gamma,
            mean_abs: spec.mean_abs,
            f0: spec.f0,
            grid_m: DEFAULT_GRID,
            route,
        }
    }

    pub fn with_grid(mut self, grid_m: usize) -> Self {
        self.grid_m = grid_m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_abs > 0.0 && self.mean_abs <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mean_abs must lie in (0, 1] when sigma^2 = 1, got {}",
                self.mean_abs
            )));
        }
        if !(self.f0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "f0 must be positive, got {}",
                self.f0
            )));
        }
        if self.grid_m < 100 {
            return Err(Error::InvalidConfig(format!(
                "grid_m must be >= 100, got {}",
                self.grid_m
            )));
        }
        if !(self.gamma.abs() <= MAX_ABS_GAMMA) {
            return Err(Error::InvalidConfig(format!(
                "|gamma| must not exceed {MAX_ABS_GAMMA}, got {}",
                self.gamma
            )));
        }
        if let Route::FiniteAr1 { n } = self.route {
            if n < self.grid_m {
                return Err(Error::InvalidConfig(format!(
                    "finite-AR route needs n >= grid_m, got n = {n} < {}",
                    self.grid_m
                )));
            }
            if !(1.0 + self.gamma / n as f64 > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "rho = 1 + gamma/n must be positive (n = {n})"
                )));
            }
        }
        Ok(())
    }
}

/// Grid with `|gamma| dt <= 1/40`, never coarser than [`DEFAULT_GRID`].
pub fn resolved_grid(gamma: f64) -> usize {
    DEFAULT_GRID.max((GRID_PER_UNIT_GAMMA * gamma.abs()).ceil() as usize)
}

/// A discretised `(K, L)` path on `t_k = k / m`. `K` is kept as its `m`
/// increments: for large `|g|` its level is many orders of magnitude above
/// the late increments, and differencing the levels would lose them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPath {
    pub t: Vec<f64>,
    pub dk: Vec<f64>,
    pub l: Vec<f64>,
}

impl LimitPath {
    /// `K(t_k)`, `k = 0..=m`.
    pub fn k(&self) -> Vec<f64> {
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.dk.iter().map(|d| {
                acc += d;
                acc
            }))
            .collect()
    }
}

/// One draw of the functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitDraw {
    #[serde(rename = "int_LdK")]
    pub int_ldk: f64,
    #[serde(rename = "int_w_L2")]
    pub int_w_l2: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "Lstat")]
    pub l_stat: f64,
}

fn grid(m: usize) -> Vec<f64> {
    (0..=m).map(|k| k as f64 / m as f64).collect()
}

/// Exact-increment sampler: on each step draws a bivariate normal with
/// covariance `Gamma(t_{k+1}) - Gamma(t_k)` through its Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianIncrementSampler {
    t: Vec<f64>,
    /// `(sqrt(a), c/sqrt(a), sqrt(b - c^2/a))` per step.
    chol: Vec<(f64, f64, f64)>,
}

impl GaussianIncrementSampler {
    pub fn new(config: &LimitLawConfig) -> Result<Self> {
        config.validate()?;
        let t = grid(config.grid_m);
        let mut chol = Vec::with_capacity(config.grid_m);
        for w in t.windows(2) {
            let inc = if config.gamma.abs() < SMALL_GAMMA {
                let dt = w[1] - w[0];
                Mat2::symmetric(dt, config.mean_abs * dt, dt)
            } else {
                gamma_increment(w[0], w[1], config.gamma, config.mean_abs)
            };
            let (a, c, b) = (inc.get(0, 0), inc.get(0, 1), inc.get(1, 1));
            let det = a * b - c * c;
            assert!(
                det >= -1e-12 * a * b,
                "increment covariance is not psd (det = {det:e})"
            );
            let ra = a.sqrt();
            let lc = if ra > 0.0 { c / ra } else { 0.0 };
            let ld = (b - lc * lc).max(0.0).sqrt();
            chol.push((ra, lc, ld));
        }
        Ok(Self { t, chol })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LimitPath {
        let m = self.chol.len();
        let mut dk = Vec::with_capacity(m);
        let mut l = Vec::with_capacity(m + 1);
        let mut ll = 0.0;
        l.push(0.0);
        for &(ra, lc, ld) in &self.chol {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            dk.push(ra * z1);
            ll += lc * z1 + ld * z2;
            l.push(ll);
        }
        LimitPath {
            t: self.t.clone(),
            dk,
            l,
        }
    }
}

/// Finite-sample route: `K_{n,i} = n^{-1/2} rho^{i-1-n} sign(eps_i)` and
/// `L_{n,i} = n^{-1/2} rho^{n-i} eps_i`, `rho = e^{g/n}` (so that `rho^n = e^g` exactly), standard normal
/// innovations, partial sums read off at `i = floor(n t_k)`.
#[derive(Debug, Clone)]
pub struct FiniteAr1Sampler {
    t: Vec<f64>,
    k_weight: Vec<f64>,
    l_weight: Vec<f64>,
    index: Vec<usize>,
}

impl FiniteAr1Sampler {
    pub fn new(config: &LimitLawConfig) -> Result<Self> {
        config.validate()?;
        let n = match config.route {
            Route::FiniteAr1 { n } => n,
            Route::GaussianIncrement => {
                return Err(Error::InvalidConfig(
                    "finite-AR sampler needs Route::FiniteAr1".into(),
                ))
            }
        };
        let log_rho = config.gamma / n as f64;
        let scale = 1.0 / (n as f64).sqrt();
        let k_weight = (1..=n)
            .map(|i| scale * ((i as f64 - 1.0 - n as f64) * log_rho).exp())
            .collect();
        let l_weight = (1..=n)
            .map(|i| scale * ((n - i) as f64 * log_rho).exp())
            .collect();
        let m = config.grid_m;
        let index = (0..=m).map(|k| k * n / m).collect();
        Ok(Self {
            t: grid(m),
            k_weight,
            l_weight,
            index,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LimitPath {
        let m = self.index.len() - 1;
        let mut dk = Vec::with_capacity(m);
        let mut l = Vec::with_capacity(m + 1);
        let mut ll = 0.0;
        l.push(0.0);
        for w in self.index.windows(2) {
            let mut block = 0.0;
            for i in w[0]..w[1] {
                let e: f64 = rng.sample(StandardNormal);
                block += self.k_weight[i] * sign(e);
                ll += self.l_weight[i] * e;
            }
            dk.push(block);
            l.push(ll);
        }
        LimitPath {
            t: self.t.clone(),
            dk,
            l,
        }
    }
}

/// Either sampler behind one interface.
#[derive(Debug, Clone)]
pub enum PathSampler {
    Gaussian(GaussianIncrementSampler),
    FiniteAr1(FiniteAr1Sampler),
}

impl PathSampler {
    pub fn new(config: &LimitLawConfig) -> Result<Self> {
        Ok(match config.route {
            Route::GaussianIncrement => {
                PathSampler::Gaussian(GaussianIncrementSampler::new(config)?)
            }
            Route::FiniteAr1 { .. } => PathSampler::FiniteAr1(FiniteAr1Sampler::new(config)?),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LimitPath {
        match self {
            PathSampler::Gaussian(s) => s.sample(rng),
            PathSampler::FiniteAr1(s) => s.sample(rng),
        }
    }

    fn purpose(&self) -> u8 {
        match self {
            PathSampler::Gaussian(_) => Purpose::LimitPath as u8,
            // separate tag so the two routes never share draws
            PathSampler::FiniteAr1(_) => Purpose::LimitPath as u8 + 1,
        }
    }
}

pub fn sample_path_gaussian(config: &LimitLawConfig, stream: &mut RngStream) -> Result<LimitPath> {
    if config.route != Route::GaussianIncrement {
        return Err(Error::InvalidConfig(
            "route must be GaussianIncrement".into(),
        ));
    }
    Ok(GaussianIncrementSampler::new(config)?.sample(stream))
}

pub fn sample_path_ar1(config: &LimitLawConfig, stream: &mut RngStream) -> Result<LimitPath> {
    Ok(FiniteAr1Sampler::new(config)?.sample(stream))
}

/// Left-point sums `sum L(t_k) (K(t_{k+1}) - K(t_k))` and
/// `sum e^{-2g(1-t_k)} L(t_k)^2 (t_{k+1} - t_k)`, then `D` and `L`.
pub fn functionals(path: &LimitPath, gamma: f64, f0: f64) -> Result<LimitDraw> {
    let m = path.t.len() - 1;
    let mut int_ldk = 0.0;
    let mut int_w_l2 = 0.0;
    for k in 0..m {
        let lk = path.l[k];
        int_ldk += lk * path.dk[k];
        let w = (-2.0 * gamma * (1.0 - path.t[k])).exp();
        int_w_l2 += w * lk * lk * (path.t[k + 1] - path.t[k]);
    }
    if !(int_w_l2 > 0.0) {
        return Err(Error::Degenerate("int e^{-2g(1-t)} L^2 dt is zero".into()));
    }
    Ok(LimitDraw {
        int_ldk,
        int_w_l2,
        d: int_ldk / (2.0 * f0 * int_w_l2),
        l_stat: int_ldk / (2.0 * f0 * int_w_l2.sqrt()),
    })
}

/// `int psi_g^2 dt` with `psi_g(t) = sqrt(-2g) e^{-g(1-t)} L(t)`, `g < 0`.
pub fn psi_sq_integral(draw: &LimitDraw, gamma: f64) -> f64 {
    -2.0 * gamma * draw.int_w_l2
}

/// `int phi_g^2 dt` with `phi_g(t) = 2g e^{-g} e^{-g(1-t)} L(t)`, `g > 0`.
pub fn phi_sq_integral(draw: &LimitDraw, gamma: f64) -> f64 {
    4.0 * gamma * gamma * (-2.0 * gamma).exp() * draw.int_w_l2
}

/// `sup_t |int_0^t f(s) ds|` for `f(t) = c e^{-g(1-t)} L(t)` by left-point sums.
fn sup_running_integral(path: &LimitPath, gamma: f64, c: f64) -> f64 {
    let mut acc = 0.0;
    let mut sup = 0.0f64;
    for k in 0..path.t.len() - 1 {
        acc += c * (-gamma * (1.0 - path.t[k])).exp() * path.l[k] * (path.t[k + 1] - path.t[k]);
        sup = sup.max(acc.abs());
    }
    sup
}

pub fn psi_sup_integral(path: &LimitPath, gamma: f64) -> f64 {
    sup_running_integral(path, gamma, (-2.0 * gamma).sqrt())
}

pub fn phi_sup_integral(path: &LimitPath, gamma: f64) -> f64 {
    sup_running_integral(path, gamma, 2.0 * gamma * (-gamma).exp())
}

/// Per-draw diagnostics kept alongside the functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub draw: LimitDraw,
    /// `int psi^2` for `g < 0`, `int phi^2` for `g > 0`, absent at `g = 0`.
    pub sq_integral: Option<f64>,
    pub sup_integral: Option<f64>,
}

/// `reps` independent draws; replication `r` uses stream `(master_seed, r, route tag)`.
/// The result does not depend on the rayon pool size.
pub fn draw_many(
    config: &LimitLawConfig,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<LimitSample>> {
    let sampler = PathSampler::new(config)?;
    let tag = sampler.purpose();
    let gamma = config.gamma;
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::with_tag(master_seed, r, tag);
            let path = sampler.sample(&mut rng);
            let draw = functionals(&path, gamma, config.f0)?;
            let (sq, sup) = if gamma < -SMALL_GAMMA {
                (
                    Some(psi_sq_integral(&draw, gamma)),
                    Some(psi_sup_integral(&path, gamma)),
                )
            } else if gamma > SMALL_GAMMA {
                (
                    Some(phi_sq_integral(&draw, gamma)),
                    Some(phi_sup_integral(&path, gamma)),
                )
            } else {
                (None, None)
            };
            Ok(LimitSample {
                draw,
                sq_integral: sq,
                sup_integral: sup,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub gamma: f64,
    pub reps: usize,
    /// KS distance of `2 f(0) L(gamma)` from N(0, 1).
    pub ks: f64,
    /// Mean of `int psi^2` (g < 0) or `int phi^2` (g > 0).
    pub mean_sq_integral: Option<f64>,
    pub mean_sup_integral: Option<f64>,
}

/// KS distance between `2 f(0) L(gamma)` and the standard normal.
pub fn normality_diagnostic(
    config: &LimitLawConfig,
    reps: usize,
    master_seed: u64,
) -> Result<NormalityReport> {
    if reps < 1000 {
        return Err(Error::InvalidConfig(format!(
            "normality diagnostic needs reps >= 1000, got {reps}"
        )));
    }
    let samples = draw_many(config, reps, master_seed)?;
    Ok(normality_from_samples(config, &samples))
}

pub fn normality_from_samples(config: &LimitLawConfig, samples: &[LimitSample]) -> NormalityReport {
    let z: Vec<f64> = samples
        .iter()
        .map(|s| 2.0 * config.f0 * s.draw.l_stat)
        .collect();
    let ks = ks_one_sample(&z, std_normal_cdf);
    let mean_of = |f: fn(&LimitSample) -> Option<f64>| -> Option<f64> {
        let v: Vec<f64> = samples.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    NormalityReport {
        gamma: config.gamma,
        reps: samples.len(),
        ks,
        mean_sq_integral: mean_of(|s| s.sq_integral),
        mean_sup_integral: mean_of(|s| s.sup_integral),
    }
}
