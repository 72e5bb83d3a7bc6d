//! Fixed inputs shared by the benchmarks.

use ladroot::ar1::simulate;
use ladroot::{Ar1Config, Init, InnovationKind};

/// Near-stationary configuration with a full-past start.
pub fn stationary_config(n: usize) -> Ar1Config {
    Ar1Config::new(
        -50.0,
        1.1,
        n,
        InnovationKind::StandardNormal,
        Init::FullPast { tail_tol: 1e-8 },
    )
}

/// A simulated path `(y_0, ..., y_n)` from [`stationary_config`].
pub fn stationary_path(n: usize, seed: u64) -> Vec<f64> {
    simulate(&stationary_config(n), seed, 0)
        .expect("valid configuration")
        .path()
}
