//! Simulation and estimation toolkit for AR(1) processes whose root sits close
//! to unity.
//!
//! The crate covers the whole pipeline:
//!
//! * [`innovations`]: innovation laws with their analytic attributes, and keyed
//!   random streams that make every replication replayable.
//! * [`ar1`]: local-to-unity parameterisation `rho_n = 1 + gamma * n^(-beta)`,
//!   the three initialisation regimes and outlier contamination.
//! * [`estimators`]: exact LAD via the weighted median, OLS, the kernel
//!   estimate of `f(0)` and the normalised statistics.
//! * [`limit`]: the Gaussian pair `(K, L)`, its covariance and time change,
//!   two samplers for it and the stochastic-integral functionals.
//! * [`montecarlo`]: replication driver, summaries, KDE curves, Q-Q data and
//!   Kolmogorov-Smirnov distances.
//! * [`identities`]: deterministic identity checks used by `ladroot verify`.
//! * [`presets`]: the named table and figure designs.
//! * [`io`]: CSV and JSON export.

// Negated float comparisons are how validation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ar1;
pub mod error;
pub mod estimators;
pub mod identities;
pub mod innovations;
pub mod io;
pub mod limit;
pub mod montecarlo;
pub mod presets;

pub use ar1::{Ar1Config, Init, OutlierMode, OutlierPlacement, OutlierSpec, SeriesSample};
pub use error::{Error, Result};
pub use estimators::{FitRecord, LadSolution, Regime};
pub use innovations::{InnovationKind, InnovationSpec, Purpose, RngStream};
pub use limit::{LimitDraw, LimitLawConfig, LimitPath, Mat2, Route};
pub use montecarlo::{CellReport, ExperimentOutput, ExperimentSpec, Reference, Statistic, Summary};
pub use presets::{Preset, PresetRun};
