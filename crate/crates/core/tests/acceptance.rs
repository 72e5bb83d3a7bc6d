//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! when any criterion fails.

use ladroot::identities::{lad_grid_report, run_identity_suite, IdentityOptions};
use ladroot::io::write_records_csv;
use ladroot::limit::{draw_many, normality_from_samples, resolved_grid};
use ladroot::montecarlo::{ks_two_sample, run_experiment};
use ladroot::presets::{ExperimentCell, FIGURE_KS_THRESHOLD};
use ladroot::{CellReport, InnovationKind, LimitLawConfig, Preset, PresetRun, Route};
use std::process::ExitCode;
use std::time::{Duration, Instant};

const SEED: u64 = 1;
const EM_TOL: f64 = 0.02;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// `(beta, gamma, n, kind, lad em, ols em)` as printed in the published tables.
type PaperRow = (f64, f64, usize, InnovationKind, f64, f64);

use InnovationKind::{StandardNormal as N, UniformPm1 as U};

const TABLE1: [PaperRow; 16] = [
    (1.1, -50.0, 200, N, 0.8431, 0.8445),
    (1.1, -50.0, 200, U, 0.8416, 0.8445),
    (1.1, -50.0, 500, N, 0.9426, 0.9428),
    (1.1, -50.0, 500, U, 0.9414, 0.9427),
    (1.1, -5.0, 200, N, 0.9807, 0.9770),
    (1.1, -5.0, 200, U, 0.9816, 0.9780),
    (1.1, -5.0, 500, N, 0.9920, 0.9913),
    (1.1, -5.0, 500, U, 0.9921, 0.9917),
    (1.3, -50.0, 200, N, 0.9418, 0.9407),
    (1.3, -50.0, 200, U, 0.9389, 0.9394),
    (1.3, -50.0, 500, N, 0.9817, 0.9808),
    (1.3, -50.0, 500, U, 0.9807, 0.9811),
    (1.3, -5.0, 200, N, 0.9920, 0.9884),
    (1.3, -5.0, 200, U, 0.9924, 0.9890),
    (1.3, -5.0, 500, N, 0.9966, 0.9960),
    (1.3, -5.0, 500, U, 0.9967, 0.9966),
];

const TABLE2: [PaperRow; 16] = [
    (1.1, -50.0, 200, N, 0.8574, 0.8979),
    (1.1, -50.0, 200, U, 0.8574, 0.9028),
    (1.1, -50.0, 500, N, 0.9501, 0.9783),
    (1.1, -50.0, 500, U, 0.9495, 0.9801),
    (1.1, -5.0, 200, N, 0.9868, 0.9998),
    (1.1, -5.0, 200, U, 0.9866, 1.0003),
    (1.1, -5.0, 500, N, 0.9954, 1.0011),
    (1.1, -5.0, 500, U, 0.9953, 1.0012),
    (1.3, -50.0, 200, N, 0.9514, 0.9787),
    (1.3, -50.0, 200, U, 0.9519, 0.9810),
    (1.3, -50.0, 500, N, 0.9861, 0.9982),
    (1.3, -50.0, 500, U, 0.9858, 0.9985),
    (1.3, -5.0, 200, N, 0.9958, 1.0040),
    (1.3, -5.0, 200, U, 0.9960, 1.0044),
    (1.3, -5.0, 500, N, 0.9990, 1.0024),
    (1.3, -5.0, 500, U, 0.9989, 1.0025),
];

const TABLE3: [PaperRow; 16] = [
    (1.5, 50.0, 200, N, 1.0177, 1.0177),
    (1.5, 50.0, 200, U, 1.0177, 1.0177),
    (1.5, 50.0, 500, N, 1.0045, 1.0045),
    (1.5, 50.0, 500, U, 1.0045, 1.0045),
    (1.5, 5.0, 200, N, 1.0012, 1.0018),
    (1.5, 5.0, 200, U, 1.0009, 1.0019),
    (1.5, 5.0, 500, N, 1.00007, 1.0006),
    (1.5, 5.0, 500, U, 0.9999, 1.0007),
    (1.8, 50.0, 200, N, 1.0034, 1.0036),
    (1.8, 50.0, 200, U, 1.0034, 1.0035),
    (1.8, 50.0, 500, N, 1.0004, 1.0007),
    (1.8, 50.0, 500, U, 1.0003, 1.0008),
    (1.8, 5.0, 200, N, 0.9986, 1.0007),
    (1.8, 5.0, 200, U, 0.9984, 1.0010),
    (1.8, 5.0, 500, N, 0.9991, 1.00036),
    (1.8, 5.0, 500, U, 0.9989, 1.00035),
];

fn run_cells(preset: Preset) -> Vec<CellReport> {
    let PresetRun::Experiments(cells) = preset.run(SEED) else {
        panic!("{} is not an experiment preset", preset.name())
    };
    cells
        .iter()
        .map(|ExperimentCell { name, spec }| {
            let out = run_experiment(spec, None).unwrap_or_else(|e| panic!("{name}: {e}"));
            CellReport::new(name, spec, &out).unwrap()
        })
        .collect()
}

fn find<'a>(cells: &'a [CellReport], row: &PaperRow) -> &'a CellReport {
    let (beta, gamma, n, kind, _, _) = *row;
    let name = format!("beta{beta}_gamma{gamma}_n{n}_{}", kind.name());
    cells
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("missing cell {name}"))
}

/// Cells whose LAD or OLS mean misses the printed value by `EM_TOL` or more.
fn em_misses(cells: &[CellReport], rows: &[PaperRow]) -> (Vec<String>, f64) {
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for row in rows {
        let c = find(cells, row);
        let (lad, ols) = (c.estimators.rho_lad.em, c.estimators.rho_ols.em);
        let gap = (lad - row.4).abs().max((ols - row.5).abs());
        worst = worst.max(gap);
        if gap >= EM_TOL {
            misses.push(format!(
                "{} (lad {lad:.4} vs {}, ols {ols:.4} vs {})",
                c.name, row.4, row.5
            ));
        }
    }
    (misses, worst)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let checks = run_identity_suite(&IdentityOptions::default());
    let elapsed = start.elapsed();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    outcome(
        failed.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{} checks, failed {failed:?}, {:.2}s",
            checks.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r = lad_grid_report(500, SEED);
    let elapsed = start.elapsed();
    outcome(
        r.worst_objective_gap <= 1e-9
            && r.endpoint_failures == 0
            && elapsed < Duration::from_secs(30),
        format!(
            "500 instances, worst gap {:.2e}, {} flat intervals, {} endpoint failures, {:.2}s",
            r.worst_objective_gap,
            r.flat_intervals,
            r.endpoint_failures,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3(table1: &[CellReport]) -> Outcome {
    let normal: Vec<PaperRow> = TABLE1.iter().copied().filter(|r| r.3 == N).collect();
    let (misses, worst) = em_misses(table1, &normal);
    outcome(
        misses.is_empty(),
        format!(
            "{} normal cells, worst EM gap {worst:.4}, misses {misses:?}",
            normal.len()
        ),
    )
}

fn criterion_4(table2: &[CellReport]) -> Outcome {
    let (mut problems, worst) = em_misses(table2, &TABLE2);
    for row in &TABLE2 {
        let c = find(table2, row);
        let (lad, ols) = (&c.estimators.rho_lad, &c.estimators.rho_ols);
        if lad.abs_bias >= ols.abs_bias || lad.mse >= ols.mse {
            problems.push(format!(
                "{}: ordering (lad |bias| {:.4}, mse {:.2e}; ols {:.4}, {:.2e})",
                c.name, lad.abs_bias, lad.mse, ols.abs_bias, ols.mse
            ));
        }
        if row.5 > 1.0 && ols.em <= 1.0 {
            problems.push(format!("{}: ols em {:.4} not above 1", c.name, ols.em));
        }
    }
    outcome(
        problems.is_empty(),
        format!("16 cells, worst EM gap {worst:.4}, problems {problems:?}"),
    )
}

fn criterion_5(table3: &[CellReport], table4: &[CellReport]) -> Outcome {
    let (misses, worst) = em_misses(table3, &TABLE3);
    let mut min_ratio = f64::INFINITY;
    let mut max_ols = 0.0f64;
    // every printed OLS MSE in the outlier table exceeds 1
    let (mut ratio_ok, mut above_one) = (0, 0);
    for c in table4 {
        let (lad, ols) = (c.estimators.rho_lad.mse, c.estimators.rho_ols.mse);
        min_ratio = min_ratio.min(ols / lad);
        max_ols = max_ols.max(ols);
        ratio_ok += usize::from(ols > 50.0 * lad);
        above_one += usize::from(ols > 1.0);
    }
    let n = table4.len();
    outcome(
        misses.is_empty() && ratio_ok == n && above_one == n,
        format!(
            "no outliers: 16 cells, worst EM gap {worst:.4}, misses {misses:?}; outliers: OLS MSE > 50 x LAD MSE in \
             {ratio_ok}/{n} (min ratio {min_ratio:.3e}), OLS MSE > 1 in {above_one}/{n} (max OLS MSE {max_ols:.3e})"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    for preset in [Preset::Fig1, Preset::Fig2] {
        for c in run_cells(preset) {
            for k in &c.ks {
                passed &= k.ks < FIGURE_KS_THRESHOLD;
                lines.push(format!("{} {}:{:.4}", preset.name(), c.name, k.ks));
            }
        }
    }
    outcome(
        passed,
        format!("threshold {FIGURE_KS_THRESHOLD}, KS {}", lines.join(" ")),
    )
}

fn criterion_7() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for gamma in [-5.0, -1.0, 1.0, 5.0] {
        let gauss = LimitLawConfig::normal(gamma, Route::GaussianIncrement).with_grid(2000);
        let ar = LimitLawConfig::normal(gamma, Route::FiniteAr1 { n: 2000 }).with_grid(2000);
        let d = |cfg: &LimitLawConfig| -> Vec<f64> {
            draw_many(cfg, 20_000, SEED)
                .unwrap()
                .iter()
                .map(|s| s.draw.d)
                .collect()
        };
        let ks = ks_two_sample(&d(&gauss), &d(&ar));
        passed &= ks < 0.06;
        parts.push(format!("{gamma}:{ks:.4}"));
    }
    outcome(passed, format!("two-sample KS {}", parts.join(" ")))
}

fn normality_ks(gamma: f64, reps: usize) -> (f64, Option<f64>) {
    let cfg =
        LimitLawConfig::normal(gamma, Route::GaussianIncrement).with_grid(resolved_grid(gamma));
    let samples = draw_many(&cfg, reps, SEED).unwrap();
    let r = normality_from_samples(&cfg, &samples);
    (r.ks, r.mean_sq_integral)
}

fn criterion_8() -> Outcome {
    let ks: Vec<f64> = [-1.0, -10.0, -50.0, -200.0]
        .iter()
        .map(|&g| normality_ks(g, 10_000).0)
        .collect();
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    let plus50 = normality_ks(50.0, 10_000).0;
    let slower = plus50 > ks[2];
    outcome(
        ks[3] < 0.05 && decreasing && slower,
        format!(
            "KS at -1,-10,-50,-200: {:.4} {:.4} {:.4} {:.4} (decreasing {decreasing}); KS(+50) {plus50:.4} > KS(-50) {slower}",
            ks[0], ks[1], ks[2], ks[3]
        ),
    )
}

fn criterion_9() -> Outcome {
    let (_, mean) = normality_ks(-200.0, 10_000);
    let mean = mean.expect("psi integral defined for negative gamma");
    outcome(
        (mean - 1.0).abs() < 0.02,
        format!("mean int psi^2 at gamma -200 = {mean:.5}"),
    )
}

fn criterion_10() -> Outcome {
    let PresetRun::Experiments(cells) = Preset::Table2.run(SEED) else {
        unreachable!()
    };
    let mut spec = cells[0].spec.clone();
    spec.reps = 300;
    let csv = |threads: usize| -> Vec<u8> {
        let out = run_experiment(&spec, Some(threads)).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &out).unwrap();
        buf
    };
    let base = csv(1);
    let same = [2, 4, 7].iter().all(|&t| csv(t) == base);
    outcome(
        same,
        format!(
            "records.csv for {} with 1, 2, 4, 7 workers ({} bytes)",
            cells[0].name,
            base.len()
        ),
    )
}

fn main() -> ExitCode {
    // cargo passes harness flags such as `--nocapture`; a name filter that
    // does not mention this target skips it.
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }

    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut record = |k: usize, o: Outcome| {
        println!(
            "{} criterion {k}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((k, o));
    };
    record(1, criterion_1());
    record(2, criterion_2());
    record(3, criterion_3(&run_cells(Preset::Table1)));
    record(4, criterion_4(&run_cells(Preset::Table2)));
    record(
        5,
        criterion_5(&run_cells(Preset::Table3), &run_cells(Preset::Table4)),
    );
    record(6, criterion_6());
    record(7, criterion_7());
    record(8, criterion_8());
    record(9, criterion_9());
    record(10, criterion_10());

    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, o)| !o.passed)
        .map(|(k, _)| *k)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
