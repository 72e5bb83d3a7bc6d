//! Named experiment designs. Tables 1-4 are grids of Monte Carlo cells,
//! figures 1-2 are distributional runs of the normalised statistics, and
//! figures 3-4 are draws from the limit laws.

use crate::ar1::{Ar1Config, Init, OutlierMode, OutlierPlacement, OutlierSpec, DEFAULT_TAIL_TOL};
use crate::innovations::InnovationKind;
use crate::limit::{LimitLawConfig, Route};
use crate::montecarlo::{ExperimentSpec, Reference, Statistic};
use serde::{Deserialize, Serialize};

pub const TRUNCATION_EXPONENT: f64 = 1.3;
pub const TABLE_REPS: usize = 1000;
pub const FIGURE_REPS: usize = 3000;
pub const FIGURE_N: usize = 1000;
pub const LIMIT_REPS: usize = 1000;
/// KS threshold the figure-1/2 runs are judged against.
pub const FIGURE_KS_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table4,
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "table1" => Preset::Table1,
            "table2" => Preset::Table2,
            "table3" => Preset::Table3,
            "table4" => Preset::Table4,
            "fig1" => Preset::Fig1,
            "fig2" => Preset::Fig2,
            "fig3" => Preset::Fig3,
            "fig4" => Preset::Fig4,
            other => {
                return Err(format!(
                    "unknown preset `{other}` (expected table1..table4, fig1..fig4)"
                ))
            }
        })
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Table4 => "table4",
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        }
    }

    pub fn run(self, master_seed: u64) -> PresetRun {
        match self {
            Preset::Table1 => {
                PresetRun::Experiments(stationary_table(master_seed, OutlierSpec::NONE))
            }
            Preset::Table2 => {
                PresetRun::Experiments(stationary_table(master_seed, table2_outliers()))
            }
            Preset::Table3 => {
                PresetRun::Experiments(explosive_table(master_seed, OutlierSpec::NONE))
            }
            Preset::Table4 => {
                PresetRun::Experiments(explosive_table(master_seed, table4_outliers()))
            }
            Preset::Fig1 => PresetRun::Experiments(figure_cells(
                master_seed,
                &[InnovationKind::StandardNormal, InnovationKind::UniformPm1],
                Statistic::NormStat,
                Reference::StdCauchy,
            )),
            Preset::Fig2 => PresetRun::Experiments(figure_cells(
                master_seed,
                &[InnovationKind::StandardNormal],
                Statistic::TStat,
                Reference::StdNormal,
            )),
            Preset::Fig3 => PresetRun::Limits(limit_cells(LimitStatistic::D)),
            Preset::Fig4 => PresetRun::Limits(limit_cells(LimitStatistic::L)),
        }
    }
}

/// Additive constant 10 at 5% of the points.
pub fn table2_outliers() -> OutlierSpec {
    OutlierSpec {
        mode: OutlierMode::AdditiveConstant {
            value: 10.0,
            fraction: 0.05,
        },
        placement: OutlierPlacement::Innovation,
    }
}

/// Ten times the largest `|y|` at 5% of the points.
pub fn table4_outliers() -> OutlierSpec {
    OutlierSpec {
        mode: OutlierMode::AdditiveScaledMax {
            multiple: 10.0,
            fraction: 0.05,
        },
        placement: OutlierPlacement::Innovation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub name: String,
    pub spec: ExperimentSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitStatistic {
    /// `2 f(0) D(gamma)`
    D,
    /// `2 f(0) L(gamma)`
    L,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCell {
    pub name: String,
    pub config: LimitLawConfig,
    pub reps: usize,
    pub statistic: LimitStatistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PresetRun {
    Experiments(Vec<ExperimentCell>),
    Limits(Vec<LimitCell>),
}

pub fn cell_name(cfg: &Ar1Config) -> String {
    format!(
        "beta{}_gamma{}_n{}_{}",
        cfg.beta,
        cfg.gamma,
        cfg.n,
        cfg.innovation.kind.name()
    )
}

const KINDS: [InnovationKind; 2] = [InnovationKind::StandardNormal, InnovationKind::UniformPm1];

fn grid_cells(
    seed: u64,
    betas: [f64; 2],
    gammas: [f64; 2],
    init: Init,
    outliers: OutlierSpec,
) -> Vec<ExperimentCell> {
    let mut cells = Vec::new();
    for beta in betas {
        for gamma in gammas {
            for n in [200, 500] {
                for kind in KINDS {
                    let cfg = Ar1Config::new(gamma, beta, n, kind, init).with_outliers(outliers);
                    let spec = ExperimentSpec::new(cfg, TABLE_REPS, seed).with_statistics(
                        vec![Statistic::RhoLad, Statistic::RhoOls],
                        Reference::None,
                    );
                    cells.push(ExperimentCell {
                        name: cell_name(&cfg),
                        spec,
                    });
                }
            }
        }
    }
    cells
}

/// `beta in {1.1, 1.3}`, `gamma in {-50, -5}`, `n in {200, 500}`, full-past start.
pub fn stationary_table(seed: u64, outliers: OutlierSpec) -> Vec<ExperimentCell> {
    grid_cells(
        seed,
        [1.1, 1.3],
        [-50.0, -5.0],
        Init::FullPast {
            tail_tol: DEFAULT_TAIL_TOL,
        },
        outliers,
    )
}

/// `beta in {1.5, 1.8}`, `gamma in {50, 5}`, `n in {200, 500}`, `kappa_n = [n^1.3]`.
pub fn explosive_table(seed: u64, outliers: OutlierSpec) -> Vec<ExperimentCell> {
    grid_cells(
        seed,
        [1.5, 1.8],
        [50.0, 5.0],
        Init::Truncated {
            kappa_exponent: TRUNCATION_EXPONENT,
        },
        outliers,
    )
}

/// `(gamma, beta) = (-10, 2)` full-past and `(10, 2)` truncated, `n = 1000`, 3000 reps.
pub fn figure_cells(
    seed: u64,
    kinds: &[InnovationKind],
    statistic: Statistic,
    reference: Reference,
) -> Vec<ExperimentCell> {
    let regimes = [
        (
            -10.0,
            Init::FullPast {
                tail_tol: DEFAULT_TAIL_TOL,
            },
            "stationary",
        ),
        (
            10.0,
            Init::Truncated {
                kappa_exponent: TRUNCATION_EXPONENT,
            },
            "explosive",
        ),
    ];
    let mut cells = Vec::new();
    for (gamma, init, label) in regimes {
        for &kind in kinds {
            let cfg = Ar1Config::new(gamma, 2.0, FIGURE_N, kind, init);
            let spec = ExperimentSpec::new(cfg, FIGURE_REPS, seed)
                .with_statistics(vec![statistic], reference);
            cells.push(ExperimentCell {
                name: format!("{label}_{}", kind.name()),
                spec,
            });
        }
    }
    cells
}

/// Finite-sample route with `rho = 1 + gamma/n`: `n = 200` for `D`; for `L`,
/// `n = 2000` when `gamma < 0` and `n = 1000` when `gamma > 0`. Every index
/// is a grid point. `|gamma| / n` stays at or below 0.05 so the step
/// `rho^{-1}` per index is close to its continuous-time counterpart.
pub fn limit_cells(statistic: LimitStatistic) -> Vec<LimitCell> {
    let gammas: &[f64] = match statistic {
        LimitStatistic::D => &[-10.0, -5.0, -2.0, -1.0, 1.0, 2.0, 5.0, 10.0],
        LimitStatistic::L => &[-50.0, -25.0, -10.0, -1.0, 1.0, 10.0, 25.0, 50.0],
    };
    gammas
        .iter()
        .map(|&gamma| {
            let n = match statistic {
                LimitStatistic::D => 200,
                LimitStatistic::L if gamma < 0.0 => 2000,
                LimitStatistic::L => 1000,
            };
            let config = LimitLawConfig::normal(gamma, Route::FiniteAr1 { n }).with_grid(n);
            LimitCell {
                name: format!("gamma{gamma}"),
                config,
                reps: LIMIT_REPS,
                statistic,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_cells_are_valid() {
        for p in [
            Preset::Table1,
            Preset::Table2,
            Preset::Table3,
            Preset::Table4,
            Preset::Fig1,
            Preset::Fig2,
        ] {
            let PresetRun::Experiments(cells) = p.run(1) else {
                panic!("{p:?}")
            };
            for c in &cells {
                c.spec.validate().unwrap();
            }
            let expected = match p {
                Preset::Fig1 => 4,
                Preset::Fig2 => 2,
                _ => 16,
            };
            assert_eq!(cells.len(), expected, "{p:?}");
        }
    }

    #[test]
    fn limit_cells_are_valid() {
        for p in [Preset::Fig3, Preset::Fig4] {
            let PresetRun::Limits(cells) = p.run(1) else {
                panic!("{p:?}")
            };
            for c in &cells {
                c.config.validate().unwrap();
            }
        }
    }

    #[test]
    fn table1_first_root() {
        let PresetRun::Experiments(cells) = Preset::Table1.run(1) else {
            unreachable!()
        };
        let rho = cells[0].spec.ar1.rho().unwrap();
        assert!((rho - 0.8528).abs() < 5e-5);
        assert_eq!(cells[0].name, "beta1.1_gamma-50_n200_normal");
    }

    #[test]
    fn names_parse() {
        for p in [
            "table1", "table2", "table3", "table4", "fig1", "fig2", "fig3", "fig4",
        ] {
            assert_eq!(p.parse::<Preset>().unwrap().name(), p);
        }
        assert!("table5".parse::<Preset>().is_err());
    }
}
