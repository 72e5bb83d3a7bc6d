use ladroot::ar1::OutlierMode;
use ladroot::limit::Route;
use ladroot::presets::LimitCell;
use ladroot::{Ar1Config, ExperimentSpec, Init, OutlierPlacement, Reference};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::args::Format;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every output. `args` is the fully resolved command line
/// (without `--out` and `--threads`), so `ladroot replay` reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub master_seed: Option<u64>,
    pub args: Vec<String>,
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new<P: Serialize>(
        args: Vec<String>,
        master_seed: Option<u64>,
        parameters: &P,
    ) -> ladroot::Result<Self> {
        Ok(Self {
            command: args.first().cloned().unwrap_or_default(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            args,
            parameters: serde_json::to_value(parameters)?,
            thresholds: None,
        })
    }

    pub fn write(&self, dir: &Path) -> ladroot::Result<()> {
        let f = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        ladroot::io::write_json(f, self)
    }

    pub fn read(path: &Path) -> ladroot::Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Shortest string that parses back to `x`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

pub fn outliers_arg(mode: &OutlierMode) -> String {
    match *mode {
        OutlierMode::None => "none".into(),
        OutlierMode::AdditiveConstant { value, fraction } => {
            format!("const:{}:{}", num(value), num(fraction))
        }
        OutlierMode::AdditiveScaledMax { multiple, fraction } => {
            format!("scaledmax:{}:{}", num(multiple), num(fraction))
        }
    }
}

pub fn model_args(cfg: &Ar1Config) -> Vec<String> {
    let mut a = vec![
        "--gamma".to_string(),
        num(cfg.gamma),
        "--beta".into(),
        num(cfg.beta),
        "--n".into(),
        cfg.n.to_string(),
        "--innovation".into(),
        cfg.innovation.kind.name().into(),
        "--init".into(),
        cfg.init.name().into(),
    ];
    match cfg.init {
        Init::Zero => {}
        Init::FullPast { tail_tol } => a.extend(["--tail-tol".into(), num(tail_tol)]),
        Init::Truncated { kappa_exponent } => a.extend(["--kappa-exp".into(), num(kappa_exponent)]),
    }
    a.extend(["--outliers".into(), outliers_arg(&cfg.outliers.mode)]);
    let placement = match cfg.outliers.placement {
        OutlierPlacement::Innovation => "innovation",
        OutlierPlacement::Observed => "observed",
    };
    a.extend(["--outlier-placement".into(), placement.into()]);
    a
}

pub fn exp_args(spec: &ExperimentSpec, format: Format) -> Vec<String> {
    let mut a = vec!["exp".to_string()];
    a.extend(model_args(&spec.ar1));
    a.extend([
        "--reps".into(),
        spec.reps.to_string(),
        "--seed".into(),
        spec.master_seed.to_string(),
    ]);
    if !spec.statistics.is_empty() {
        let names: Vec<&str> = spec.statistics.iter().map(|s| s.name()).collect();
        a.extend(["--stat".into(), names.join(",")]);
    }
    let reference = match spec.reference {
        Reference::None => "none",
        Reference::StdNormal => "normal",
        Reference::StdCauchy => "cauchy",
    };
    a.extend([
        "--reference".into(),
        reference.into(),
        "--format".into(),
        format_name(format).into(),
    ]);
    a
}

pub fn limit_args(cell: &LimitCell, seed: u64, format: Format) -> Vec<String> {
    let c = &cell.config;
    let mut a = vec!["limit".to_string(), "--gamma".into(), num(c.gamma)];
    match c.route {
        Route::GaussianIncrement => a.extend([
            "--route".into(),
            "gaussian".into(),
            "--mean-abs".into(),
            num(c.mean_abs),
            "--f0".into(),
            num(c.f0),
        ]),
        Route::FiniteAr1 { n } => {
            a.extend(["--route".into(), "ar1".into(), "--n".into(), n.to_string()])
        }
    }
    a.extend([
        "--grid".into(),
        c.grid_m.to_string(),
        "--reps".into(),
        cell.reps.to_string(),
        "--seed".into(),
        seed.to_string(),
        "--format".into(),
        format_name(format).into(),
    ]);
    a
}
