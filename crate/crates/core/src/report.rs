//! CSV, JSON and plot-data writers. Output is a pure function of the data,
//! so identical runs give byte-identical files.

use crate::degeneration::SweepResult;
use crate::error::{Error, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Flat records as CSV with a header row.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Whitespace columns under a `#` header, readable by gnuplot.
pub fn plot_string(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = format!("# {}\n", columns.join(" "));
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:.12e}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

/// Writes files into one directory and remembers what it wrote.
pub struct ArtifactWriter {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, content)?;
        self.written.push(p);
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let s = csv_string(rows)?;
        self.text(name, &s)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let s = json_string(value)?;
        self.text(name, &s)
    }

    pub fn plot(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.text(name, &plot_string(columns, rows))
    }
}

#[derive(Serialize)]
struct FitJson<'a> {
    model: &'static str,
    c2: f64,
    c1: f64,
    c0: f64,
    sigma: [f64; 3],
    residuals: &'a [f64],
    max_residual: f64,
    drop_largest_change: [f64; 3],
    remainder: &'a Option<crate::degeneration::RemainderFit>,
    excluded: &'a [crate::degeneration::ExcludedRow],
}

#[derive(Serialize)]
struct PredictionJson<'a> {
    prediction: &'a crate::degeneration::Prediction,
    comparisons: &'a [crate::degeneration::Comparison],
    agrees: bool,
    log_det_omega0: f64,
    log_det_omega0_uncertainty: f64,
    rzeta0: f64,
    log_rdet: f64,
    f_infty: Option<f64>,
    cone_excess: (f64, f64),
    k_log: (f64, f64),
}

/// `sweep.csv`, `fit.json`, `prediction.json`, `sweep.dat`, `deviation.dat`.
pub fn write_sweep(result: &SweepResult, w: &mut ArtifactWriter) -> Result<()> {
    w.csv("sweep.csv", &result.rows)?;
    let f = &result.fit;
    w.json(
        "fit.json",
        &FitJson {
            model: "c2*log(eps)^2 + c1*log(eps) + c0",
            c2: f.coeffs[0],
            c1: f.coeffs[1],
            c0: f.coeffs[2],
            sigma: f.sigma,
            residuals: &f.residuals,
            max_residual: f.max_residual,
            drop_largest_change: f.drop_change,
            remainder: &f.remainder,
            excluded: &result.excluded,
        },
    )?;
    w.json(
        "prediction.json",
        &PredictionJson {
            prediction: &result.prediction,
            comparisons: &result.comparisons,
            agrees: result.agrees,
            log_det_omega0: result.omega0.zeta.log_det,
            log_det_omega0_uncertainty: result.omega0.zeta.zeta_prime0_uncertainty,
            rzeta0: result.renorm.zeta.rzeta0,
            log_rdet: result.renorm.zeta.log_rdet,
            f_infty: result.renorm.zeta.large_fit.as_ref().map(|l| l.f_infty),
            cone_excess: result.omega0.cone_excess(),
            k_log: result.omega0.k_log(),
        },
    )?;
    let p = &result.prediction;
    let rows: Vec<Vec<f64>> = result
        .rows
        .iter()
        .map(|r| {
            let x = r.log_epsilon;
            let fit = f.coeffs[0] * x * x + f.coeffs[1] * x + f.coeffs[2];
            let pred = p.c2.value * x * x + p.c1.value * x + p.c0.value;
            vec![r.epsilon, x, r.log_det, r.uncertainty, fit, pred]
        })
        .collect();
    w.plot("sweep.dat", &["eps", "log_eps", "log_det", "uncertainty", "fitted", "predicted"], &rows)?;
    let dev: Vec<Vec<f64>> = result.deviations.iter().map(|&(e, d)| vec![e, d]).collect();
    w.plot("deviation.dat", &["eps", "measured_minus_predicted"], &dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        t: f64,
        v: f64,
    }

    #[test]
    fn csv_has_header_and_shortest_floats() {
        let s = csv_string(&[Row { t: 0.5, v: 1.0 / 3.0 }, Row { t: 1.0, v: -2.0 }]).unwrap();
        assert_eq!(s, "t,v\n0.5,0.3333333333333333\n1.0,-2.0\n");
    }

    #[test]
    fn plot_columns() {
        let s = plot_string(&["a", "b"], &[vec![1.0, 2.5]]);
        assert_eq!(s, "# a b\n1.000000000000e0 2.500000000000e0\n");
    }

    #[test]
    fn writer_records_files() {
        let d = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::new(&d.path().join("out")).unwrap();
        w.json("x.json", &serde_json::json!({"a": 1})).unwrap();
        w.csv("x.csv", &[Row { t: 1.0, v: 2.0 }]).unwrap();
        assert_eq!(w.written.len(), 2);
        assert_eq!(fs::read_to_string(&w.written[0]).unwrap(), "{\n  \"a\": 1\n}\n");
    }
}
