//! AR(1) sample paths `y_i = rho_n y_{i-1} + eps_i` under the local-to-unity
//! parameterisation `rho_n = 1 + gamma * n^(-beta)`.

use crate::error::{Error, Result};
use crate::innovations::{InnovationKind, InnovationSpec, ReplicationStreams, RngStream};
use serde::{Deserialize, Serialize};

/// Paths whose magnitude passes this bound are reported as explosions.
pub const EXPLOSION_LIMIT: f64 = 1e300;

/// Default relative tail standard deviation for the truncated full-past sum.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Above this value of `kappa_n * (rho_n - 1)` the truncated initialisation
/// is flagged: the infinitely-distant-start asymptotics assume it is small.
pub const KAPPA_DRIFT_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// `y_0 = 0`.
    Zero,
    /// `y_0 = sum_{j>=0} rho^j eps_{-j}`, only for `rho < 1`.
    FullPast { tail_tol: f64 },
    /// `y_0 = sum_{j=0}^{kappa_n} rho^j eps_{-j}` with `kappa_n = floor(n^kappa_exponent)`,
    /// only for `rho > 1`.
    Truncated { kappa_exponent: f64 },
}

impl Init {
    pub fn name(&self) -> &'static str {
        match self {
            Init::Zero => "zero",
            Init::FullPast { .. } => "full-past",
            Init::Truncated { .. } => "truncated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierMode {
    None,
    /// Add `value` at each selected point.
    AdditiveConstant {
        value: f64,
        fraction: f64,
    },
    /// Add `multiple * max_i |y_clean[i]|` at each selected point.
    AdditiveScaledMax {
        multiple: f64,
        fraction: f64,
    },
}

impl OutlierMode {
    pub fn fraction(&self) -> f64 {
        match *self {
            OutlierMode::None => 0.0,
            OutlierMode::AdditiveConstant { fraction, .. }
            | OutlierMode::AdditiveScaledMax { fraction, .. } => fraction,
        }
    }
}

/// Where the contamination enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPlacement {
    /// Added to the innovation at the selected time, so it propagates
    /// through the recursion.
    Innovation,
    /// Added to the observed value only; the recursion is unaffected.
    Observed,
}

impl std::str::FromStr for OutlierPlacement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "innovation" => Ok(OutlierPlacement::Innovation),
            "observed" => Ok(OutlierPlacement::Observed),
            other => Err(format!(
                "unknown outlier placement `{other}` (expected innovation|observed)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub mode: OutlierMode,
    pub placement: OutlierPlacement,
}

impl OutlierSpec {
    pub const NONE: OutlierSpec = OutlierSpec {
        mode: OutlierMode::None,
        placement: OutlierPlacement::Innovation,
    };

    /// Number of contaminated points in a series of length `n`.
    pub fn count(&self, n: usize) -> usize {
        (self.mode.fraction() * n as f64).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let f = self.mode.fraction();
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!(
                "outlier fraction must satisfy 0 <= fraction < 1, got {f}"
            )));
        }
        Ok(())
    }
}

impl Default for OutlierSpec {
    fn default() -> Self {
        OutlierSpec::NONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Config {
    pub gamma: f64,
    pub beta: f64,
    pub n: usize,
    pub innovation: InnovationSpec,
    pub init: Init,
    pub outliers: OutlierSpec,
}

impl Ar1Config {
    pub fn new(gamma: f64, beta: f64, n: usize, kind: InnovationKind, init: Init) -> Self {
        Self {
            gamma,
            beta,
            n,
            innovation: InnovationSpec::new(kind),
            init,
            outliers: OutlierSpec::NONE,
        }
    }

    pub fn with_outliers(mut self, outliers: OutlierSpec) -> Self {
        self.outliers = outliers;
        self
    }

    /// `gamma * n^(-beta)`, i.e. `rho_n - 1`, without cancellation.
    pub fn drift(&self) -> f64 {
        self.gamma * (self.n as f64).powf(-self.beta)
    }

    pub fn rho(&self) -> Result<f64> {
        rho_of(self.gamma, self.beta, self.n)
    }

    /// `1 - rho_n^2` computed as `-(rho - 1)(rho + 1)`.
    pub fn one_minus_rho2(&self) -> f64 {
        let d = self.drift();
        -d * (2.0 + d)
    }

    pub fn kappa(&self) -> Option<u64> {
        match self.init {
            Init::Truncated { kappa_exponent } => Some(kappa_of(self.n, kappa_exponent)),
            _ => None,
        }
    }

    /// Checks every invariant and returns the non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.n == 0 {
            return Err(Error::InvalidConfig(
                "sample size n must be positive".into(),
            ));
        }
        if !(self.beta >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "beta must be >= 1, got {}",
                self.beta
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidConfig("gamma must be finite".into()));
        }
        let rho = self.rho()?;
        self.outliers.validate()?;
        let mut warnings = Vec::new();
        match self.init {
            Init::Zero => {}
            Init::FullPast { tail_tol } => {
                if rho >= 1.0 {
                    return Err(Error::Regime(format!(
                        "full-past initialisation requires rho < 1, got rho = {rho}"
                    )));
                }
                if !(tail_tol > 0.0 && tail_tol < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "tail_tol must lie in (0, 1), got {tail_tol}"
                    )));
                }
            }
            Init::Truncated { kappa_exponent } => {
                if rho <= 1.0 {
                    return Err(Error::Regime(format!(
                        "truncated initialisation requires rho > 1, got rho = {rho}"
                    )));
                }
                if !(kappa_exponent > 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "kappa exponent must exceed 1, got {kappa_exponent}"
                    )));
                }
                let kappa = kappa_of(self.n, kappa_exponent) as f64;
                let drift = kappa * self.drift();
                if drift > KAPPA_DRIFT_WARN {
                    warnings.push(format!(
                        "kappa_n * (rho_n - 1) = {drift:.4} exceeds {KAPPA_DRIFT_WARN}; \
                         the initial value is not in its small-drift regime"
                    ));
                }
            }
        }
        Ok(warnings)
    }
}

/// `rho_n = 1 + gamma * n^(-beta)`; rejects non-positive roots.
pub fn rho_of(gamma: f64, beta: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "sample size n must be positive".into(),
        ));
    }
    let rho = 1.0 + gamma * (n as f64).powf(-beta);
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rho = 1 + gamma * n^(-beta) = {rho} must be positive"
        )));
    }
    Ok(rho)
}

/// `kappa_n = floor(n^exponent)`.
pub fn kappa_of(n: usize, kappa_exponent: f64) -> u64 {
    (n as f64).powf(kappa_exponent).floor() as u64
}

/// Initial value `y_0` under the configured regime. Pre-sample innovations
/// come from `stream`, ordered `eps_0, eps_{-1}, ...`.
pub fn gen_initial(config: &Ar1Config, stream: &mut RngStream) -> Result<f64> {
    let rho = config.rho()?;
    let spec = &config.innovation;
    match config.init {
        Init::Zero => Ok(0.0),
        Init::FullPast { tail_tol } => {
            if rho >= 1.0 {
                return Err(Error::Regime(format!(
                    "full-past initialisation requires rho < 1, got rho = {rho}"
                )));
            }
            match spec.kind {
                InnovationKind::StandardNormal => {
                    let sd = (spec.sigma2 / config.one_minus_rho2()).sqrt();
                    Ok(sd * spec.draw(stream))
                }
                _ => {
                    let terms = full_past_terms(rho, tail_tol);
                    Ok(geometric_sum(rho, terms, spec, stream))
                }
            }
        }
        Init::Truncated { kappa_exponent } => {
            if rho <= 1.0 {
                return Err(Error::Regime(format!(
                    "truncated initialisation requires rho > 1, got rho = {rho}"
                )));
            }
            let kappa = kappa_of(config.n, kappa_exponent);
            Ok(geometric_sum(rho, kappa + 1, spec, stream))
        }
    }
}

/// Number of terms `J = ceil(ln(tail_tol) / ln(rho))` after which the omitted
/// tail has standard deviation at most `tail_tol` times the full one.
pub fn full_past_terms(rho: f64, tail_tol: f64) -> u64 {
    (tail_tol.ln() / rho.ln()).ceil().max(1.0) as u64
}

fn geometric_sum(rho: f64, terms: u64, spec: &InnovationSpec, stream: &mut RngStream) -> f64 {
    let mut acc = 0.0;
    let mut power = 1.0;
    for _ in 0..terms {
        acc += power * spec.draw(stream);
        power *= rho;
    }
    acc
}

/// A generated path. `y`, `y_clean` and `eps` hold times `1..=n` at positions
/// `0..n`; `outlier_indices` are positions into those vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub y0: f64,
    pub y: Vec<f64>,
    pub y_clean: Vec<f64>,
    pub eps: Vec<f64>,
    pub outlier_indices: Vec<usize>,
    pub rho_true: f64,
    pub kappa_used: Option<u64>,
}

impl SeriesSample {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Observed path `(y_0, y_1, ..., y_n)`.
    pub fn path(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.y.len() + 1);
        p.push(self.y0);
        p.extend_from_slice(&self.y);
        p
    }

    /// Largest `|y_clean[i] - rho * y_clean[i-1] - eps[i]|`.
    pub fn recursion_residual(&self) -> f64 {
        let mut prev = self.y0;
        let mut worst = 0.0f64;
        for (&y, &e) in self.y_clean.iter().zip(&self.eps) {
            worst = worst.max((y - self.rho_true * prev - e).abs());
            prev = y;
        }
        worst
    }
}

fn run_recursion(y0: f64, rho: f64, eps: &[f64]) -> Result<Vec<f64>> {
    let mut y = Vec::with_capacity(eps.len());
    let mut prev = y0;
    for (i, &e) in eps.iter().enumerate() {
        prev = rho * prev + e;
        if !(prev.abs() <= EXPLOSION_LIMIT) {
            return Err(Error::Explosion {
                index: i + 1,
                limit: EXPLOSION_LIMIT,
            });
        }
        y.push(prev);
    }
    Ok(y)
}

/// Builds the clean sample for given `y0` and innovations.
pub fn series_from_innovations(y0: f64, rho: f64, eps: Vec<f64>) -> Result<SeriesSample> {
    let y_clean = run_recursion(y0, rho, &eps)?;
    Ok(SeriesSample {
        y0,
        y: y_clean.clone(),
        y_clean,
        eps,
        outlier_indices: Vec::new(),
        rho_true: rho,
        kappa_used: None,
    })
}

/// Clean path: initial value from the pre-sample stream, then `n` steps of
/// the recursion driven by the innovation stream. No contamination.
pub fn gen_series(config: &Ar1Config, streams: &mut ReplicationStreams) -> Result<SeriesSample> {
    config.validate()?;
    let rho = config.rho()?;
    let y0 = gen_initial(config, &mut streams.pre_sample)?;
    let mut eps = vec![0.0; config.n];
    config.innovation.fill(&mut streams.innovations, &mut eps);
    let mut s = series_from_innovations(y0, rho, eps)?;
    s.kappa_used = config.kappa();
    Ok(s)
}

/// Contaminates `round(fraction * n)` distinct positions chosen uniformly
/// from the outlier stream. `eps` and `y_clean` are never modified.
pub fn inject_outliers(
    series: &SeriesSample,
    spec: &OutlierSpec,
    stream: &mut RngStream,
) -> Result<SeriesSample> {
    spec.validate()?;
    let mut out = series.clone();
    let amount = match spec.mode {
        OutlierMode::None => {
            out.y = out.y_clean.clone();
            out.outlier_indices.clear();
            return Ok(out);
        }
        OutlierMode::AdditiveConstant { value, .. } => value,
        OutlierMode::AdditiveScaledMax { multiple, .. } => {
            multiple * series.y_clean.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        }
    };
    let n = series.y_clean.len();
    let k = spec.count(n).min(n);
    let mut idx = rand::seq::index::sample(stream, n, k).into_vec();
    idx.sort_unstable();

    match spec.placement {
        OutlierPlacement::Observed => {
            let mut y = series.y_clean.clone();
            for &j in &idx {
                y[j] += amount;
            }
            out.y = y;
        }
        OutlierPlacement::Innovation => {
            let mut shocked = series.eps.clone();
            for &j in &idx {
                shocked[j] += amount;
            }
            out.y = run_recursion(series.y0, series.rho_true, &shocked)?;
        }
    }
    out.outlier_indices = idx;
    Ok(out)
}

/// Replication `replication` of `config`: clean path plus contamination.
pub fn simulate(config: &Ar1Config, master_seed: u64, replication: u64) -> Result<SeriesSample> {
    let mut streams = ReplicationStreams::new(master_seed, replication);
    let clean = gen_series(config, &mut streams)?;
    if matches!(config.outliers.mode, OutlierMode::None) {
        return Ok(clean);
    }
    inject_outliers(&clean, &config.outliers, &mut streams.outliers)
}

/// `(1 - rho^(2k)) / (k (1 - rho^2))`, evaluated through `expm1`/`ln` so it
/// stays accurate when `k |1 - rho^2|` is tiny.
pub fn geometric_variance_ratio(k: u64, rho: f64) -> f64 {
    let l = rho.ln();
    let num = -(2.0 * k as f64 * l).exp_m1();
    let den = -(2.0 * l).exp_m1() * k as f64;
    num / den
}

/// Exact `E[(n^(-1/2) sum_{i=1}^n rho^(i-1) sign(eps_i))^2] = (1 - rho^(2n)) / (n (1 - rho^2))`.
pub fn sign_sum_second_moment(rho: f64, n: usize) -> f64 {
    if rho == 1.0 {
        return 1.0;
    }
    geometric_variance_ratio(n as u64, rho)
}
