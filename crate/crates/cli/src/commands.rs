use crate::args::{
    ExpArgs, FitArgs, Format, GenArgs, InitArg, LimitArgs, ModelArgs, RouteArg, VerifyArgs,
};
use crate::manifest::{exp_args, format_name, limit_args, model_args, RunManifest};
use ladroot::ar1::simulate;
use ladroot::estimators::fit_series;
use ladroot::identities::{run_identity_suite, IdentityOptions};
use ladroot::io::{
    read_series_csv, write_curve_csv, write_diagnostic_csv, write_draws_csv, write_fit_csv,
    write_json, write_qq_csv, write_records_csv, write_series_csv,
};
use ladroot::limit::{
    draw_many, normality_from_samples, resolved_grid, LimitLawConfig, LimitSample, NormalityReport,
};
use ladroot::montecarlo::{default_curve_grid, kde_curve, qq_data, run_experiment};
use ladroot::presets::{ExperimentCell, LimitCell, LimitStatistic, FIGURE_KS_THRESHOLD};
use ladroot::{
    Ar1Config, CellReport, Error, ExperimentSpec, Init, InnovationKind, OutlierSpec, Preset,
    PresetRun, Route, Statistic,
};
use serde::Serialize;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// Exit code plus message. 1 usage, 2 validation, 3 numerical failure.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) | Error::Regime(_) => 2,
            e if e.is_numerical() => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn create(dir: &Path, name: &str) -> CmdResult<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn missing(flag: &str) -> Failure {
    Failure::usage(format!(
        "the following required argument was not provided: {flag}"
    ))
}

fn build_config(model: &ModelArgs) -> CmdResult<Ar1Config> {
    let gamma = model.gamma.ok_or_else(|| missing("--gamma"))?;
    let n = model.n.ok_or_else(|| missing("--n"))?;
    let init = match model.init {
        InitArg::Zero => Init::Zero,
        InitArg::FullPast => Init::FullPast {
            tail_tol: model.tail_tol,
        },
        InitArg::Truncated => Init::Truncated {
            kappa_exponent: model.kappa_exp,
        },
    };
    let outliers = OutlierSpec {
        mode: model.outliers,
        placement: model.outlier_placement.into(),
    };
    Ok(Ar1Config::new(gamma, model.beta, n, model.innovation.into(), init).with_outliers(outliers))
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CmdResult<T> {
    match threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::validation(format!("thread pool: {e}")))?
            .install(f)),
        None => Ok(f()),
    }
}

#[derive(Serialize)]
struct GenParameters<'a> {
    config: &'a Ar1Config,
    rho_n: f64,
    kappa_n: Option<u64>,
    replication: u64,
}

pub fn gen(args: &GenArgs) -> CmdResult {
    let cfg = build_config(&args.model)?;
    warn_all(&cfg.validate()?);
    let rho = cfg.rho()?;
    let series = simulate(&cfg, args.seed, args.replication)?;
    let file = match args.format {
        Format::Csv => {
            write_series_csv(create(&args.out, "series.csv")?, &series)?;
            "series.csv"
        }
        Format::Json => {
            write_json(create(&args.out, "series.json")?, &series)?;
            "series.json"
        }
    };
    let mut argv = vec!["gen".to_string()];
    argv.extend(model_args(&cfg));
    argv.extend([
        "--seed".into(),
        args.seed.to_string(),
        "--replication".into(),
        args.replication.to_string(),
        "--format".into(),
        format_name(args.format).into(),
    ]);
    let params = GenParameters {
        config: &cfg,
        rho_n: rho,
        kappa_n: series.kappa_used,
        replication: args.replication,
    };
    RunManifest::new(argv, Some(args.seed), &params)?.write(&args.out)?;
    println!("rho_n = {rho}");
    if let Some(k) = series.kappa_used {
        println!("kappa_n = {k}");
    }
    println!("wrote {}", args.out.join(file).display());
    Ok(())
}

pub fn fit(args: &FitArgs) -> CmdResult {
    let file = File::open(&args.input)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.input.display())))?;
    let path = read_series_csv(file)?;
    let rec = fit_series(&path, args.rho, None)?;
    match args.format {
        Format::Csv => write_fit_csv(create(&args.out, "fit.csv")?, &rec)?,
        Format::Json => write_json(create(&args.out, "fit.json")?, &rec)?,
    }
    let argv = vec![
        "fit".to_string(),
        "--input".into(),
        args.input.display().to_string(),
        "--rho".into(),
        num(args.rho),
        "--format".into(),
        format_name(args.format).into(),
    ];
    RunManifest::new(argv, None, &rec)?.write(&args.out)?;
    println!(
        "rho_lad = {} (minimiser interval [{}, {}])",
        rec.lad.point, rec.lad.lo, rec.lad.hi
    );
    println!("rho_ols = {}", rec.rho_ols);
    println!("f0_hat = {} (bandwidth {})", rec.f0_hat, rec.bandwidth);
    println!("t_stat = {}", rec.t_stat);
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<&'a str>,
    cells: &'a [CellReport],
}

/// Runs one experiment and writes records, curves, Q-Q data, summary and manifest into `dir`.
fn run_cell(
    name: &str,
    spec: &ExperimentSpec,
    dir: &Path,
    threads: Option<usize>,
    format: Format,
    ks_threshold: Option<f64>,
) -> CmdResult<CellReport> {
    let out = run_experiment(spec, threads)?;
    warn_all(&out.warnings);
    let report = CellReport::new(name, spec, &out)?;
    match format {
        Format::Csv => write_records_csv(create(dir, "records.csv")?, &out)?,
        Format::Json => write_json(create(dir, "records.json")?, &out.rows)?,
    }
    let mut curves = Vec::new();
    let mut qq = Vec::new();
    for &stat in &spec.statistics {
        let v = out.samples(stat);
        if v.len() >= 2 {
            let grid = default_curve_grid(&v, 201);
            if let Ok(dens) = kde_curve(&v, &grid) {
                curves.push((stat.name().to_string(), grid, dens));
            }
        }
        if let Ok(points) = qq_data(&v) {
            qq.push((stat.name().to_string(), points));
        }
    }
    write_curve_csv(create(dir, "curve.csv")?, &curves)?;
    write_qq_csv(create(dir, "qq.csv")?, &qq)?;
    write_json(
        create(dir, "summary.json")?,
        &SummaryFile {
            preset: None,
            cells: std::slice::from_ref(&report),
        },
    )?;
    let mut manifest = RunManifest::new(exp_args(spec, format), Some(spec.master_seed), spec)?;
    if let Some(t) = ks_threshold {
        manifest.thresholds = Some(serde_json::json!({ "ks": t }));
    }
    manifest.write(dir)?;
    Ok(report)
}

fn print_cell(r: &CellReport) {
    let e = &r.estimators;
    print!(
        "{}: rho_n = {:.6}  LAD em = {:.6} mse = {:.3e}  OLS em = {:.6} mse = {:.3e}",
        r.name, r.rho_true, e.rho_lad.em, e.rho_lad.mse, e.rho_ols.em, e.rho_ols.mse
    );
    for k in &r.ks {
        print!("  KS({}) = {:.4}", k.statistic.name(), k.ks);
    }
    if r.degenerate_count > 0 {
        print!("  degenerate = {}", r.degenerate_count);
    }
    println!();
}

#[derive(Serialize)]
struct PresetParameters<'a, C: Serialize> {
    preset: &'a str,
    cells: &'a [C],
}

pub fn exp(args: &ExpArgs) -> CmdResult {
    if let Some(preset) = args.preset {
        if args.model.gamma.is_some() || args.model.n.is_some() {
            return Err(Failure::usage(
                "--preset cannot be combined with --gamma or --n",
            ));
        }
        return run_preset(
            preset,
            args.seed,
            args.reps,
            args.threads,
            &args.out,
            args.format,
        );
    }
    let cfg = build_config(&args.model)?;
    let statistics = if args.statistics.is_empty() {
        vec![Statistic::RhoLad, Statistic::RhoOls]
    } else {
        args.statistics.clone()
    };
    let spec = ExperimentSpec::new(cfg, args.reps.unwrap_or(1000), args.seed)
        .with_statistics(statistics, args.reference.into());
    let report = run_cell(
        "experiment",
        &spec,
        &args.out,
        args.threads,
        args.format,
        None,
    )?;
    print_cell(&report);
    Ok(())
}

fn preset_argv(preset: Preset, seed: u64, reps: Option<usize>, format: Format) -> Vec<String> {
    let mut argv = vec![
        "exp".to_string(),
        "--preset".into(),
        preset.name().into(),
        "--seed".into(),
        seed.to_string(),
    ];
    if let Some(r) = reps {
        argv.extend(["--reps".into(), r.to_string()]);
    }
    argv.extend(["--format".into(), format_name(format).into()]);
    argv
}

fn run_preset(
    preset: Preset,
    seed: u64,
    reps: Option<usize>,
    threads: Option<usize>,
    out: &Path,
    format: Format,
) -> CmdResult {
    let argv = preset_argv(preset, seed, reps, format);
    match preset.run(seed) {
        PresetRun::Experiments(mut cells) => {
            if let Some(r) = reps {
                cells.iter_mut().for_each(|c| c.spec.reps = r);
            }
            let threshold =
                matches!(preset, Preset::Fig1 | Preset::Fig2).then_some(FIGURE_KS_THRESHOLD);
            let mut reports = Vec::new();
            for ExperimentCell { name, spec } in &cells {
                let r = run_cell(name, spec, &out.join(name), threads, format, threshold)?;
                print_cell(&r);
                reports.push(r);
            }
            write_json(
                create(out, "summary.json")?,
                &SummaryFile {
                    preset: Some(preset.name()),
                    cells: &reports,
                },
            )?;
            let specs: Vec<&ExperimentSpec> = cells.iter().map(|c| &c.spec).collect();
            let mut m = RunManifest::new(
                argv,
                Some(seed),
                &PresetParameters {
                    preset: preset.name(),
                    cells: &specs,
                },
            )?;
            if let Some(t) = threshold {
                m.thresholds = Some(serde_json::json!({ "ks": t }));
            }
            m.write(out)?;
        }
        PresetRun::Limits(mut cells) => {
            if let Some(r) = reps {
                cells.iter_mut().for_each(|c| c.reps = r);
            }
            let mut reports = Vec::new();
            for cell in &cells {
                if let Some(r) = run_limit_cell(cell, seed, &out.join(&cell.name), threads, format)?
                {
                    reports.push(r);
                }
            }
            let mut w = create(out, "diagnostic.csv")?;
            write_diagnostic_csv(&mut w, &reports)?;
            RunManifest::new(
                argv,
                Some(seed),
                &PresetParameters {
                    preset: preset.name(),
                    cells: &cells,
                },
            )?
            .write(out)?;
        }
    }
    Ok(())
}

fn scaled(samples: &[LimitSample], f0: f64, pick: fn(&LimitSample) -> f64) -> Vec<f64> {
    samples.iter().map(|s| 2.0 * f0 * pick(s)).collect()
}

/// Draws, density curves and (with at least 1000 draws) the normality diagnostic.
fn run_limit_cell(
    cell: &LimitCell,
    seed: u64,
    dir: &Path,
    threads: Option<usize>,
    format: Format,
) -> CmdResult<Option<NormalityReport>> {
    let samples = with_threads(threads, || draw_many(&cell.config, cell.reps, seed))??;
    match format {
        Format::Csv => write_draws_csv(create(dir, "draws.csv")?, &samples)?,
        Format::Json => {
            let draws: Vec<_> = samples.iter().map(|s| s.draw).collect();
            write_json(create(dir, "draws.json")?, &draws)?
        }
    }
    let f0 = cell.config.f0;
    let mut curves = Vec::new();
    for (label, v) in [
        ("2f0_D", scaled(&samples, f0, |s| s.draw.d)),
        ("2f0_L", scaled(&samples, f0, |s| s.draw.l_stat)),
    ] {
        if v.len() >= 2 {
            let grid = default_curve_grid(&v, 201);
            if let Ok(dens) = kde_curve(&v, &grid) {
                curves.push((label.to_string(), grid, dens));
            }
        }
    }
    write_curve_csv(create(dir, "curve.csv")?, &curves)?;
    let report = (cell.reps >= 1000).then(|| normality_from_samples(&cell.config, &samples));
    match &report {
        Some(r) => {
            write_diagnostic_csv(create(dir, "diagnostic.csv")?, std::slice::from_ref(r))?;
            let extra = match (cell.config.gamma < 0.0, r.mean_sq_integral) {
                (true, Some(m)) => format!("  mean int psi^2 = {m:.4}"),
                (false, Some(m)) => format!("  mean int phi^2 = {m:.4}"),
                _ => String::new(),
            };
            println!(
                "gamma = {}: KS(2f(0) L, N(0,1)) = {:.4} over {} draws{extra}",
                cell.config.gamma, r.ks, r.reps
            );
        }
        None => eprintln!("note: fewer than 1000 draws, normality diagnostic skipped"),
    }
    RunManifest::new(limit_args(cell, seed, format), Some(seed), cell)?.write(dir)?;
    Ok(report)
}

pub fn limit(args: &LimitArgs) -> CmdResult {
    if let Some(preset) = args.preset {
        if !matches!(preset, Preset::Fig3 | Preset::Fig4) {
            return Err(Failure::usage(format!(
                "limit accepts presets fig3 and fig4, not {}",
                preset.name()
            )));
        }
        if args.gamma.is_some() {
            return Err(Failure::usage("--preset cannot be combined with --gamma"));
        }
        return run_preset(
            preset,
            args.seed,
            args.reps,
            args.threads,
            &args.out,
            args.format,
        );
    }
    let gamma = args.gamma.ok_or_else(|| missing("--gamma"))?;
    let normal = ladroot::innovations::attributes(InnovationKind::StandardNormal);
    let config = match args.route {
        RouteArg::Gaussian => {
            if args.n.is_some() {
                return Err(Failure::usage("--n only applies to --route ar1"));
            }
            LimitLawConfig {
                gamma,
                mean_abs: args.mean_abs.unwrap_or(normal.mean_abs),
                f0: args.f0.unwrap_or(normal.f0),
                grid_m: args.grid.unwrap_or_else(|| resolved_grid(gamma)),
                route: Route::GaussianIncrement,
            }
        }
        RouteArg::Ar1 => {
            if args.mean_abs.is_some() || args.f0.is_some() {
                return Err(Failure::validation(
                    "the finite-AR route simulates standard normal innovations; --mean-abs and --f0 do not apply",
                ));
            }
            let n = args.n.unwrap_or(2000);
            LimitLawConfig::normal(gamma, Route::FiniteAr1 { n }).with_grid(args.grid.unwrap_or(n))
        }
    };
    config.validate()?;
    let cell = LimitCell {
        name: String::new(),
        config,
        reps: args.reps.unwrap_or(10_000),
        statistic: LimitStatistic::L,
    };
    run_limit_cell(&cell, args.seed, &args.out, args.threads, args.format)?;
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let opts = IdentityOptions {
        lambda12_offset: args.debug_lambda12_offset,
        seed: args.seed,
        ..Default::default()
    };
    let checks = run_identity_suite(&opts);
    for c in &checks {
        println!(
            "{} {:<22} worst = {:.3e}  tol = {:.0e}  ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance,
            c.detail
        );
    }
    if let Some(dir) = &args.out {
        write_json(create(dir, "verify.json")?, &checks)?;
        let mut argv = vec!["verify".to_string(), "--seed".into(), args.seed.to_string()];
        if args.debug_lambda12_offset != 0.0 {
            argv.extend([
                "--debug-lambda12-offset".into(),
                num(args.debug_lambda12_offset),
            ]);
        }
        RunManifest::new(argv, Some(args.seed), &opts)?.write(dir)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure {
            code: 3,
            message: format!("{failed} of {} checks failed", checks.len()),
        });
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

/// Command line that re-runs `manifest` into `out`.
pub fn replay_argv(
    manifest: &RunManifest,
    out: &Path,
    threads: Option<usize>,
) -> CmdResult<Vec<String>> {
    match manifest.command.as_str() {
        "gen" | "fit" | "exp" | "limit" | "verify" => {}
        other => {
            return Err(Failure::usage(format!(
                "manifest records unknown command `{other}`"
            )))
        }
    }
    let mut argv = vec!["ladroot".to_string()];
    argv.extend(manifest.args.iter().cloned());
    argv.extend(["--out".into(), PathBuf::from(out).display().to_string()]);
    if let (Some(t), "exp" | "limit") = (threads, manifest.command.as_str()) {
        argv.extend(["--threads".into(), t.to_string()]);
    }
    Ok(argv)
}
