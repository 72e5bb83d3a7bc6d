//! Replication loops and the summaries built from them: empirical means,
//! bias and MSE per estimator, kernel density curves, Q-Q data and
//! Kolmogorov-Smirnov distances.
//!
//! Replication `r` draws only from streams keyed by `(master_seed, r, purpose)`
//! and results are collected in replication order, so every output is
//! independent of the number of worker threads.

use crate::ar1::{simulate, Ar1Config};
use crate::error::{Error, Result};
use crate::estimators::{fit_series, kde_at, robust_bandwidth, FitRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Cauchy, ContinuousCDF, Normal};

/// Largest share of degenerate replications an experiment tolerates.
pub const MAX_DEGENERATE_SHARE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    RhoLad,
    RhoOls,
    TStat,
    NormStat,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::RhoLad => "rho_lad",
            Statistic::RhoOls => "rho_ols",
            Statistic::TStat => "t_stat",
            Statistic::NormStat => "norm_stat",
        }
    }

    pub fn of(self, fit: &FitRecord) -> Option<f64> {
        match self {
            Statistic::RhoLad => Some(fit.lad.point),
            Statistic::RhoOls => Some(fit.rho_ols),
            Statistic::TStat => Some(fit.t_stat),
            Statistic::NormStat => fit.norm_stat,
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rho_lad" => Ok(Statistic::RhoLad),
            "rho_ols" => Ok(Statistic::RhoOls),
            "t_stat" => Ok(Statistic::TStat),
            "norm_stat" => Ok(Statistic::NormStat),
            other => Err(format!("unknown statistic `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    None,
    StdNormal,
    StdCauchy,
}

impl Reference {
    pub fn cdf(self, x: f64) -> Option<f64> {
        match self {
            Reference::None => None,
            Reference::StdNormal => Some(std_normal_cdf(x)),
            Reference::StdCauchy => Some(std_cauchy_cdf(x)),
        }
    }

    pub fn quantile(self, p: f64) -> Option<f64> {
        match self {
            Reference::None => None,
            Reference::StdNormal => Some(std_normal().inverse_cdf(p)),
            Reference::StdCauchy => Some(std_cauchy().inverse_cdf(p)),
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

fn std_cauchy() -> Cauchy {
    Cauchy::new(0.0, 1.0).expect("unit scale is valid")
}

pub fn std_normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn std_cauchy_cdf(x: f64) -> f64 {
    std_cauchy().cdf(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub ar1: Ar1Config,
    pub reps: usize,
    pub master_seed: u64,
    /// Statistics for which density, Q-Q and KS outputs are produced.
    pub statistics: Vec<Statistic>,
    pub reference: Reference,
}

impl ExperimentSpec {
    pub fn new(ar1: Ar1Config, reps: usize, master_seed: u64) -> Self {
        Self {
            ar1,
            reps,
            master_seed,
            statistics: Vec::new(),
            reference: Reference::None,
        }
    }

    pub fn with_statistics(mut self, statistics: Vec<Statistic>, reference: Reference) -> Self {
        self.statistics = statistics;
        self.reference = reference;
        self
    }

    pub fn validate(&self) -> Result<Vec<String>> {
        if self.reps < 1 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        self.ar1.validate()
    }
}

/// Empirical mean, signed and absolute bias, and MSE around the true root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub em: f64,
    pub bias: f64,
    pub abs_bias: f64,
    pub mse: f64,
    pub count: usize,
}

impl Summary {
    pub fn from_values(values: &[f64], truth: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("no values to summarise".into()));
        }
        let n = values.len() as f64;
        let em = values.iter().sum::<f64>() / n;
        let mse = values
            .iter()
            .map(|v| (v - truth) * (v - truth))
            .sum::<f64>()
            / n;
        let bias = em - truth;
        Ok(Summary {
            em,
            bias,
            abs_bias: bias.abs(),
            mse,
            count: values.len(),
        })
    }
}

/// One replication: either a fit or the reason it was dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: u64,
    pub fit: Option<FitRecord>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rho_true: f64,
    pub rows: Vec<ReplicationRow>,
    pub lad: Summary,
    pub ols: Summary,
    pub degenerate_count: usize,
    pub warnings: Vec<String>,
}

impl ExperimentOutput {
    pub fn fits(&self) -> impl Iterator<Item = &FitRecord> {
        self.rows.iter().filter_map(|r| r.fit.as_ref())
    }

    pub fn samples(&self, stat: Statistic) -> Vec<f64> {
        self.fits().filter_map(|f| stat.of(f)).collect()
    }
}

fn replicate(config: &Ar1Config, rho_true: f64, master_seed: u64, r: u64) -> Result<FitRecord> {
    let series = simulate(config, master_seed, r)?;
    fit_series(&series.path(), rho_true, Some(config))
}

/// Runs `spec.reps` replications on a pool of `threads` workers (the global
/// pool when `None`).
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentOutput> {
    let warnings = spec.validate()?;
    let rho_true = spec.ar1.rho()?;
    let work = || -> Vec<Result<FitRecord>> {
        (0..spec.reps as u64)
            .into_par_iter()
            .map(|r| replicate(&spec.ar1, rho_true, spec.master_seed, r))
            .collect()
    };
    let results = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::with_capacity(results.len());
    for (r, res) in results.into_iter().enumerate() {
        let replication = r as u64;
        rows.push(match res {
            Ok(fit) => ReplicationRow {
                replication,
                fit: Some(fit),
                failure: None,
            },
            Err(e) if e.is_numerical() => ReplicationRow {
                replication,
                fit: None,
                failure: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        });
    }
    let degenerate_count = rows.iter().filter(|r| r.fit.is_none()).count();
    if degenerate_count as f64 > MAX_DEGENERATE_SHARE * spec.reps as f64 {
        return Err(Error::Numerical(format!(
            "{degenerate_count} of {} replications were degenerate (first: {})",
            spec.reps,
            rows.iter()
                .find_map(|r| r.failure.clone())
                .unwrap_or_default()
        )));
    }
    let lad_vals: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.fit.map(|f| f.lad.point))
        .collect();
    let ols_vals: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.fit.map(|f| f.rho_ols))
        .collect();
    Ok(ExperimentOutput {
        rho_true,
        lad: Summary::from_values(&lad_vals, rho_true)?,
        ols: Summary::from_values(&ols_vals, rho_true)?,
        rows,
        degenerate_count,
        warnings,
    })
}

/// LAD and OLS summaries side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummaries {
    pub rho_lad: Summary,
    pub rho_ols: Summary,
}

/// KS distance of one statistic from a reference law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsEntry {
    pub statistic: Statistic,
    pub reference: Reference,
    pub ks: f64,
    pub samples: usize,
}

/// What `summary.json` records for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub name: String,
    pub rho_true: f64,
    pub reps: usize,
    pub degenerate_count: usize,
    pub estimators: EstimatorSummaries,
    pub ks: Vec<KsEntry>,
    pub warnings: Vec<String>,
}

impl CellReport {
    pub fn new(name: &str, spec: &ExperimentSpec, out: &ExperimentOutput) -> Result<Self> {
        let mut ks = Vec::new();
        if spec.reference != Reference::None {
            for &stat in &spec.statistics {
                let v = out.samples(stat);
                ks.push(KsEntry {
                    statistic: stat,
                    reference: spec.reference,
                    ks: ks_statistic(&v, spec.reference)?,
                    samples: v.len(),
                });
            }
        }
        Ok(CellReport {
            name: name.to_string(),
            rho_true: out.rho_true,
            reps: spec.reps,
            degenerate_count: out.degenerate_count,
            estimators: EstimatorSummaries {
                rho_lad: out.lad,
                rho_ols: out.ols,
            },
            ks,
            warnings: out.warnings.clone(),
        })
    }
}

/// Gaussian-kernel density of `samples` on `grid`, bandwidth as for `f_hat(0)`.
pub fn kde_curve(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let b = robust_bandwidth(samples)?;
    Ok(grid.iter().map(|&x| kde_at(samples, b, x)).collect())
}

/// `points` equally spaced values spanning the central 98% of `samples`
/// widened by a tenth on each side.
pub fn default_curve_grid(samples: &[f64], points: usize) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = crate::estimators::quantile_sorted(&sorted, 0.01);
    let hi = crate::estimators::quantile_sorted(&sorted, 0.99);
    let pad = 0.1 * (hi - lo);
    let (a, b) = (lo - pad, hi + pad);
    (0..points)
        .map(|k| a + (b - a) * k as f64 / (points - 1) as f64)
        .collect()
}

/// `(Phi^{-1}((k - 0.5)/N), x_(k))` for `k = 1..N`.
pub fn qq_data(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 10 {
        return Err(Error::InvalidConfig(format!(
            "Q-Q data needs >= 10 samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let norm = std_normal();
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| (norm.inverse_cdf((k as f64 + 0.5) / n), x))
        .collect())
}

/// `sup_x |F_N(x) - F(x)|` for a continuous reference CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

pub fn ks_statistic(samples: &[f64], reference: Reference) -> Result<f64> {
    if samples.len() < 10 {
        return Err(Error::InvalidConfig(format!(
            "KS needs >= 10 samples, got {}",
            samples.len()
        )));
    }
    match reference {
        Reference::None => Err(Error::InvalidConfig(
            "KS needs a reference distribution".into(),
        )),
        Reference::StdNormal => Ok(ks_one_sample(samples, std_normal_cdf)),
        Reference::StdCauchy => Ok(ks_one_sample(samples, std_cauchy_cdf)),
    }
}

/// Two-sample KS distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar1::Init;
    use crate::innovations::{InnovationKind, Purpose, RngStream};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0, Purpose::Innovations);
        (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn table1_cell() -> Ar1Config {
        Ar1Config::new(
            -50.0,
            1.1,
            200,
            InnovationKind::StandardNormal,
            Init::FullPast { tail_tol: 1e-8 },
        )
    }

    #[test]
    fn summary_of_constant_values() {
        let s = Summary::from_values(&[0.9; 5], 0.9).unwrap();
        assert_eq!((s.em, s.mse, s.count), (0.9, 0.0, 5));
        let s = Summary::from_values(&[1.0, 3.0], 1.0).unwrap();
        assert_eq!((s.em, s.bias, s.abs_bias, s.mse), (2.0, 1.0, 1.0, 2.0));
    }

    #[test]
    fn mse_dominates_squared_bias() {
        let v = normals(500, 3);
        let s = Summary::from_values(&v, 0.3).unwrap();
        let n = s.count as f64;
        assert!(s.mse >= s.bias * s.bias * (n - 1.0) / n - 1e-12);
    }

    #[test]
    fn reps_zero_is_rejected() {
        let spec = ExperimentSpec::new(table1_cell(), 0, 1);
        assert!(matches!(
            run_experiment(&spec, None),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn single_replication_is_reproducible() {
        let spec = ExperimentSpec::new(table1_cell(), 1, 5);
        let a = run_experiment(&spec, None).unwrap();
        let b = run_experiment(&spec, Some(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lad.count + a.degenerate_count, 1);
        let direct = simulate(&spec.ar1, 5, 0).unwrap();
        let fit = fit_series(&direct.path(), a.rho_true, Some(&spec.ar1)).unwrap();
        assert_eq!(a.rows[0].fit.unwrap(), fit);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = ExperimentSpec::new(table1_cell(), 64, 11);
        let a = run_experiment(&spec, Some(1)).unwrap();
        let b = run_experiment(&spec, Some(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn table1_cell_is_close_to_the_root() {
        let spec = ExperimentSpec::new(table1_cell(), 300, 1);
        let out = run_experiment(&spec, None).unwrap();
        assert_abs_diff_eq!(out.rho_true, 0.8528, epsilon = 1e-4);
        assert!(out.lad.abs_bias < 0.05 && out.ols.abs_bias < 0.05);
    }

    #[test]
    fn kde_curve_recovers_normal_density() {
        let v = normals(100_000, 4);
        let grid = [-1.0, 0.0, 1.0];
        let curve = kde_curve(&v, &grid).unwrap();
        for (x, f) in grid.iter().zip(curve) {
            let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((f - phi).abs() < 0.01, "{x}: {f} vs {phi}");
        }
    }

    #[test]
    fn kde_curve_integrates_to_one() {
        let v = normals(2000, 5);
        let grid: Vec<f64> = (0..=2000).map(|k| -10.0 + 0.01 * k as f64).collect();
        let curve = kde_curve(&v, &grid).unwrap();
        let area = curve.iter().sum::<f64>() * 0.01;
        assert!((area - 1.0).abs() < 0.01, "{area}");
    }

    #[test]
    fn kde_curve_rejects_point_mass() {
        assert!(kde_curve(&[2.0; 50], &[0.0]).is_err());
    }

    #[test]
    fn qq_on_exact_quantiles_is_diagonal() {
        let n = 200;
        let norm = std_normal();
        let v: Vec<f64> = (0..n)
            .map(|k| norm.inverse_cdf((k as f64 + 0.5) / n as f64))
            .collect();
        for (t, e) in qq_data(&v).unwrap() {
            assert_abs_diff_eq!(t, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn qq_slope_is_scale() {
        let v: Vec<f64> = normals(500, 6).iter().map(|x| 3.0 + 2.0 * x).collect();
        let q = qq_data(&v).unwrap();
        let (a, b) = (q[100], q[400]);
        let v0 = normals(500, 6);
        let q0 = qq_data(&v0).unwrap();
        let slope = (b.1 - a.1) / (q0[400].1 - q0[100].1);
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn qq_cauchy_tails_deviate_more() {
        let n = 2000;
        let mut rng = RngStream::new(7, 0, Purpose::Innovations);
        let c = std_cauchy();
        let cauchy: Vec<f64> = (0..n).map(|_| c.inverse_cdf(rng.random::<f64>())).collect();
        let dev = |v: &[f64]| {
            qq_data(v)
                .unwrap()
                .iter()
                .fold(0.0f64, |m, (t, e)| m.max((t - e).abs()))
        };
        assert!(dev(&cauchy) > dev(&normals(n, 8)));
    }

    #[test]
    fn qq_needs_ten_samples() {
        assert!(qq_data(&[1.0; 9]).is_err());
    }

    #[test]
    fn ks_on_exact_quantiles() {
        let n = 1000;
        for r in [Reference::StdNormal, Reference::StdCauchy] {
            let v: Vec<f64> = (0..n)
                .map(|k| r.quantile((k as f64 + 0.5) / n as f64).unwrap())
                .collect();
            assert!(ks_statistic(&v, r).unwrap() <= 1.0 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn ks_separates_normal_from_cauchy() {
        let v = normals(10_000, 9);
        let d = ks_statistic(&v, Reference::StdCauchy).unwrap();
        assert!(d > 0.1, "{d}");
        assert!(ks_statistic(&v, Reference::StdNormal).unwrap() < 0.02);
    }

    #[test]
    fn ks_guards() {
        assert!(ks_statistic(&[], Reference::StdNormal).is_err());
        assert!(ks_statistic(&[0.0; 9], Reference::StdNormal).is_err());
        assert!(ks_statistic(&[0.0; 20], Reference::None).is_err());
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_abs_diff_eq!(
            ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.5, 10.0]),
            0.5,
            epsilon = 1e-15
        );
        let d = ks_two_sample(&normals(5000, 10), &normals(5000, 11));
        assert!(d < 1.36 * (2.0f64 / 5000.0).sqrt(), "{d}");
    }
}
