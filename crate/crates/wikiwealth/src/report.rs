//! CSV and JSON outputs. Floats are written in shortest round-trip form so
//! identical runs give identical bytes.

use std::path::Path;

use serde::Serialize;
use wikiwealth_core::eval::{rank_difference_histogram, EvalReport, ExperimentSpec, Histogram, PredictionRow, ResultGrid};
use wikiwealth_core::geo::GeoPoint;
use wikiwealth_core::interpret::ProjectedPoint;

use crate::error::{Error, Result};
use crate::formats::write_file;

/// Bins in the rank-difference histogram stored with each report.
pub const RANK_BINS: usize = 21;

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let run = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header)?;
        fill(w)
    };
    run(&mut w).map_err(|e| Error::Config(format!("csv: {e}")))?;
    w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
}

/// File-name-safe label for an experiment.
pub fn experiment_name(spec: &ExperimentSpec) -> String {
    let regime = match spec.regime {
        wikiwealth_core::eval::Regime::Intra => "intra",
        wikiwealth_core::eval::Regime::Cross => "cross",
        wikiwealth_core::eval::Regime::LeaveOneOut => "loo",
    };
    let raw = format!(
        "{}_{}_{}_to_{}_n{}",
        spec.model_kind.label(),
        regime,
        spec.train_countries.join("+"),
        spec.test_countries.join("+"),
        spec.neighbors
    );
    raw.chars().map(|c| if c.is_ascii_alphanumeric() || "+-_".contains(c) { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct ReportFile<'a> {
    name: String,
    #[serde(flatten)]
    report: &'a EvalReport,
    rank_difference: Option<Histogram>,
}

pub fn write_report_json(path: &Path, report: &EvalReport) -> Result<()> {
    let (pred, truth): (Vec<f64>, Vec<f64>) = report.predictions.iter().map(|r| (r.pred, r.truth)).unzip();
    let file = ReportFile {
        name: experiment_name(&report.spec),
        report,
        rank_difference: rank_difference_histogram(&pred, &truth, RANK_BINS).ok(),
    };
    let mut text = serde_json::to_vec_pretty(&file).map_err(|e| Error::Config(e.to_string()))?;
    text.push(b'\n');
    write_file(path, &text)
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let bytes = csv_bytes(&["lat", "lon", "truth", "pred"], |w| {
        for r in rows {
            w.write_record([r.lat.to_string(), r.lon.to_string(), r.truth.to_string(), r.pred.to_string()])?;
        }
        Ok(())
    })?;
    write_file(path, &bytes)
}

/// One row per experiment, in run order.
pub fn write_metrics(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let header =
        ["experiment", "model", "regime", "train", "test", "neighbors", "seed", "train_size", "test_size", "pearson_r2", "spearman_rho2"];
    let bytes = csv_bytes(&header, |w| {
        for r in reports {
            let s = &r.spec;
            let regime = serde_json::to_value(s.regime).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            w.write_record([
                experiment_name(s),
                s.model_kind.label().to_string(),
                regime,
                s.train_countries.join("+"),
                s.test_countries.join("+"),
                s.neighbors.to_string(),
                s.seed.to_string(),
                r.train_size.to_string(),
                r.predictions.len().to_string(),
                r.pearson_r2.to_string(),
                r.spearman_rho2.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_file(path, &bytes)
}

/// Pearson r² matrices, one block per model kind: a row per test set, a
/// column per training set. Failed cells read `NA`.
pub fn write_matrix(path: &Path, grids: &[ResultGrid]) -> Result<()> {
    let labels = grids.first().map(|g| g.labels.clone()).unwrap_or_default();
    let mut header = vec!["model", "tested_on"];
    header.extend(labels.iter().map(String::as_str));
    let bytes = csv_bytes(&header, |w| {
        for g in grids {
            for (label, row) in g.labels.iter().zip(&g.cells) {
                let mut rec = vec![g.model_kind.label().to_string(), label.clone()];
                rec.extend(row.iter().map(|c| c.pearson_r2.map_or_else(|| "NA".to_string(), |v| v.to_string())));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })?;
    write_file(path, &bytes)
}

pub fn write_sweep(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let bytes = csv_bytes(&["N", "r2"], |w| {
        for (n, r2) in curve {
            w.write_record([n.to_string(), r2.to_string()])?;
        }
        Ok(())
    })?;
    write_file(path, &bytes)
}

pub fn write_projection(path: &Path, points: &[ProjectedPoint]) -> Result<()> {
    let bytes = csv_bytes(&["label", "x", "y"], |w| {
        for p in points {
            w.write_record([p.label.clone(), p.x.to_string(), p.y.to_string()])?;
        }
        Ok(())
    })?;
    write_file(path, &bytes)
}

pub fn write_field(path: &Path, grid: &[(GeoPoint, f64)]) -> Result<()> {
    let bytes = csv_bytes(&["lat", "lon", "value"], |w| {
        for (p, v) in grid {
            w.write_record([p.lat.to_string(), p.lon.to_string(), v.to_string()])?;
        }
        Ok(())
    })?;
    write_file(path, &bytes)
}

pub fn write_loss(path: &Path, trace: &[f64]) -> Result<()> {
    let bytes = csv_bytes(&["epoch", "loss"], |w| {
        for (i, l) in trace.iter().enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string()])?;
        }
        Ok(())
    })?;
    write_file(path, &bytes)
}
