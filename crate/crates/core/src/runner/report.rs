use super::{best_layer, ResultRow, RunnerError, Subset};
use crate::embedding::FeatureVariant;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const RESULT_COLUMNS: [&str; 16] = [
    "model_id",
    "layer",
    "variant",
    "subset",
    "repeat",
    "seed",
    "train_instances",
    "dev_instances",
    "test_instances",
    "truncated_instances",
    "dev_accuracy",
    "test_accuracy",
    "epochs_run",
    "best_epoch",
    "config_digest",
    "error",
];

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CurveKey {
    pub model_id: String,
    pub variant: FeatureVariant,
    pub subset: Subset,
}

/// Accuracies of one layer averaged over the successful repeats.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerPoint {
    pub layer: usize,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub curves: Vec<PathBuf>,
    pub summary: PathBuf,
    pub summary_text: String,
}

/// Groups successful rows by (model, variant, subset) in order of first
/// appearance; points within a curve ascend by layer.
pub fn layer_curves(rows: &[ResultRow]) -> Vec<(CurveKey, Vec<LayerPoint>)> {
    let mut order: Vec<CurveKey> = Vec::new();
    let mut sums: HashMap<CurveKey, Vec<(usize, f64, f64, usize)>> = HashMap::new();
    for row in rows {
        let c = &row.cell;
        let key = CurveKey {
            model_id: c.model_id.clone(),
            variant: c.variant,
            subset: c.subset,
        };
        let entry = sums.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        let (Some(dev), Some(test)) = (row.dev_accuracy, row.test_accuracy) else {
            continue;
        };
        match entry.iter_mut().find(|p| p.0 == c.layer) {
            Some(p) => {
                p.1 += dev;
                p.2 += test;
                p.3 += 1;
            }
            None => entry.push((c.layer, dev, test, 1)),
        }
    }
    order
        .into_iter()
        .map(|key| {
            let mut points: Vec<LayerPoint> = sums[&key]
                .iter()
                .map(|&(layer, dev, test, runs)| LayerPoint {
                    layer,
                    dev_accuracy: dev / runs as f64,
                    test_accuracy: test / runs as f64,
                    runs,
                })
                .collect();
            points.sort_by_key(|p| p.layer);
            (key, points)
        })
        .collect()
}

fn accuracy(v: Option<f64>) -> String {
    v.map(|a| format!("{a:.4}")).unwrap_or_default()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// File-name form of a model id: characters outside `[A-Za-z0-9._-]` become `_`.
pub fn sanitize(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `results.csv`, one `curves/<model>_<variant>_<subset>.csv` per
/// curve and `summary.txt` into `dir`.
pub fn emit_report(rows: &[ResultRow], dir: &Path) -> Result<ReportFiles, RunnerError> {
    fs::create_dir_all(dir.join("curves"))?;

    let results = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&results)?;
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        let c = &row.cell;
        w.write_record([
            c.model_id.clone(),
            c.layer.to_string(),
            c.variant.to_string(),
            c.subset.to_string(),
            c.repeat.to_string(),
            c.seed.to_string(),
            row.counts.train.to_string(),
            row.counts.dev.to_string(),
            row.counts.test.to_string(),
            row.counts.truncated.to_string(),
            accuracy(row.dev_accuracy),
            accuracy(row.test_accuracy),
            opt(row.epochs_run),
            opt(row.best_epoch),
            row.config_digest.clone(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    let mut summary_text = format!(
        "cells: {} ({} failed)\ndiscourse-aware layers by test accuracy:\n",
        rows.len(),
        failed
    );
    let mut curves = Vec::new();
    for (key, points) in layer_curves(rows) {
        let name = format!(
            "{}_{}_{}.csv",
            sanitize(&key.model_id),
            key.variant,
            key.subset
        );
        let path = dir.join("curves").join(&name);
        if curves.contains(&path) {
            return Err(RunnerError::Settings(format!(
                "model ids collide on curve file `{name}`"
            )));
        }
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["layer", "dev_accuracy", "test_accuracy", "runs"])?;
        for p in &points {
            w.write_record([
                p.layer.to_string(),
                accuracy(Some(p.dev_accuracy)),
                accuracy(Some(p.test_accuracy)),
                p.runs.to_string(),
            ])?;
        }
        w.flush()?;
        curves.push(path);

        let label = format!("{} {} {}", key.model_id, key.variant, key.subset);
        let planned = rows
            .iter()
            .filter(|r| {
                r.cell.model_id == key.model_id
                    && r.cell.variant == key.variant
                    && r.cell.subset == key.subset
            })
            .map(|r| r.cell.layer)
            .max()
            .unwrap_or(0);
        let pairs: Vec<(usize, f64)> = points.iter().map(|p| (p.layer, p.test_accuracy)).collect();
        let outcome = if pairs.len() < planned {
            Err(RunnerError::Coverage(format!(
                "{} of {planned} layers have results",
                pairs.len()
            )))
        } else {
            best_layer(&pairs)
        };
        match outcome {
            Ok(layer) => {
                let acc = pairs.iter().find(|p| p.0 == layer).map_or(0.0, |p| p.1);
                let _ = writeln!(summary_text, "  {label}: layer {layer} ({acc:.4})");
            }
            Err(e) => {
                let _ = writeln!(summary_text, "  {label}: undetermined ({e})");
            }
        }
    }

    let summary = dir.join("summary.txt");
    fs::write(&summary, &summary_text)?;
    Ok(ReportFiles {
        results,
        curves,
        summary,
        summary_text,
    })
}
