//! CSV and JSON export. Every float is written in scientific notation with
//! 17 significant digits, which round-trips `f64` exactly and makes output
//! files byte-comparable across runs.

use crate::ar1::SeriesSample;
use crate::error::{Error, Result};
use crate::estimators::FitRecord;
use crate::limit::{LimitSample, NormalityReport};
use crate::montecarlo::ExperimentOutput;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io::{self, Read, Write};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Pretty JSON whose floats use [`fmt_f64`].
struct SigDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SigDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut writer: W, value: &T) -> Result<()> {
    let mut ser =
        serde_json::Serializer::with_formatter(&mut writer, SigDigits(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// Columns `i, y, y_clean, eps, is_outlier`; row `i = 0` holds `y_0` and an
/// empty `eps`.
pub fn write_series_csv<W: Write>(writer: W, series: &SeriesSample) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "y", "y_clean", "eps", "is_outlier"])?;
    w.write_record([
        "0".to_string(),
        fmt_f64(series.y0),
        fmt_f64(series.y0),
        String::new(),
        "0".into(),
    ])?;
    let mut outliers = series.outlier_indices.iter().peekable();
    for t in 0..series.n() {
        let flagged = outliers.next_if(|&&k| k == t).is_some();
        w.write_record([
            (t + 1).to_string(),
            fmt_f64(series.y[t]),
            fmt_f64(series.y_clean[t]),
            fmt_f64(series.eps[t]),
            (flagged as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the `y` column of a series CSV as the path `(y_0, ..., y_n)`.
/// Rows must be ordered by `i` starting at 0.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let y_col = headers
        .iter()
        .position(|h| h.trim() == "y")
        .ok_or_else(|| Error::InvalidConfig("series CSV has no `y` column".into()))?;
    let i_col = headers.iter().position(|h| h.trim() == "i");
    let mut path = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if let Some(ic) = i_col {
            let i: usize = rec[ic].trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("row {row}: bad index `{}`", &rec[ic]))
            })?;
            if i != row {
                return Err(Error::InvalidConfig(format!(
                    "row {row}: expected i = {row}, found {i}"
                )));
            }
        }
        let y: f64 = rec[y_col]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("row {row}: bad value `{}`", &rec[y_col])))?;
        path.push(y);
    }
    if path.len() < 2 {
        return Err(Error::InvalidConfig(
            "series needs y_0 and at least one observation".into(),
        ));
    }
    Ok(path)
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "replication",
    "rho_lad_lo",
    "rho_lad_hi",
    "rho_lad",
    "rho_ols",
    "f0_hat",
    "bandwidth",
    "t_stat",
    "norm_stat",
    "status",
];

/// One row per replication; dropped replications keep their row with empty
/// numeric fields and the failure in `status`.
pub fn write_records_csv<W: Write>(writer: W, out: &ExperimentOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORD_COLUMNS)?;
    for row in &out.rows {
        let mut rec = vec![row.replication.to_string()];
        match &row.fit {
            Some(f) => {
                rec.extend(
                    [
                        f.lad.lo,
                        f.lad.hi,
                        f.lad.point,
                        f.rho_ols,
                        f.f0_hat,
                        f.bandwidth,
                        f.t_stat,
                    ]
                    .map(fmt_f64),
                );
                rec.push(fmt_opt(f.norm_stat));
                rec.push("ok".into());
            }
            None => {
                rec.extend(std::iter::repeat_n(String::new(), 8));
                rec.push(row.failure.clone().unwrap_or_default());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A single fit as one CSV row with the record columns (no replication or status).
pub fn write_fit_csv<W: Write>(writer: W, fit: &FitRecord) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&RECORD_COLUMNS[1..9])?;
    let mut rec: Vec<String> = [
        fit.lad.lo,
        fit.lad.hi,
        fit.lad.point,
        fit.rho_ols,
        fit.f0_hat,
        fit.bandwidth,
        fit.t_stat,
    ]
    .map(fmt_f64)
    .to_vec();
    rec.push(fmt_opt(fit.norm_stat));
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

/// Columns `statistic, x, density`.
pub fn write_curve_csv<W: Write>(writer: W, curves: &[(String, Vec<f64>, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["statistic", "x", "density"])?;
    for (stat, xs, fs) in curves {
        for (x, f) in xs.iter().zip(fs) {
            w.write_record([stat.clone(), fmt_f64(*x), fmt_f64(*f)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `statistic, theoretical, empirical`.
pub fn write_qq_csv<W: Write>(writer: W, qq: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["statistic", "theoretical", "empirical"])?;
    for (stat, pts) in qq {
        for (t, e) in pts {
            w.write_record([stat.clone(), fmt_f64(*t), fmt_f64(*e)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns `replication, int_LdK, int_w_L2, D, Lstat`.
pub fn write_draws_csv<W: Write>(writer: W, draws: &[LimitSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["replication", "int_LdK", "int_w_L2", "D", "Lstat"])?;
    for (r, s) in draws.iter().enumerate() {
        let d = &s.draw;
        w.write_record([
            r.to_string(),
            fmt_f64(d.int_ldk),
            fmt_f64(d.int_w_l2),
            fmt_f64(d.d),
            fmt_f64(d.l_stat),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `gamma, reps, ks`.
pub fn write_diagnostic_csv<W: Write>(writer: W, reports: &[NormalityReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["gamma", "reps", "ks"])?;
    for r in reports {
        w.write_record([fmt_f64(r.gamma), r.reps.to_string(), fmt_f64(r.ks)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar1::series_from_innovations;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, 0.8528, -1e-300, 6.02e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_floats_use_fixed_digits() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            n: usize,
        }
        let s = to_json_string(&S { a: 0.5, n: 3 }).unwrap();
        assert!(s.contains("\"a\": 5.0000000000000000e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.5));
    }

    #[test]
    fn series_round_trip() {
        let s = series_from_innovations(0.5, 0.9, vec![1.0, -2.0, 0.25]).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,y,y_clean,eps,is_outlier\n0,"));
        assert_eq!(text.lines().count(), 5);
        assert_eq!(read_series_csv(&buf[..]).unwrap(), s.path());
    }

    #[test]
    fn series_reader_checks_order() {
        let text = "i,y\n0,1\n2,3\n";
        assert!(read_series_csv(text.as_bytes()).is_err());
        assert!(read_series_csv("i,z\n0,1\n1,2\n".as_bytes()).is_err());
        assert_eq!(
            read_series_csv("y\n1\n2\n".as_bytes()).unwrap(),
            vec![1.0, 2.0]
        );
    }
}
