//! Report artifacts: metrics JSON, loss-curve CSV, and plain-text tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use dyngraph_core::training::{AblationReport, Metrics, TrainReport};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsJson {
    pub variant: String,
    pub seed: u64,
    pub fold_checksum: String,
    pub mean: MeanJson,
    pub folds: Vec<FoldJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeanJson {
    pub accuracy: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FoldJson {
    pub fold: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsJson {
    pub fn from_report(report: &TrainReport, variant: &str, seed: u64) -> Self {
        MetricsJson {
            variant: variant.to_string(),
            seed,
            fold_checksum: format!("{:016x}", report.fold_checksum),
            mean: MeanJson {
                accuracy: report.mean_accuracy,
                weighted_f1: report.mean_weighted_f1,
            },
            folds: report
                .folds
                .iter()
                .map(|f| FoldJson {
                    fold: f.fold,
                    best_epoch: f.best_epoch,
                    epochs_run: f.epochs_run,
                    accuracy: f.metrics.accuracy,
                    weighted_f1: f.metrics.weighted_f1,
                    per_class_f1: f.metrics.per_class_f1.clone(),
                    confusion: f.metrics.confusion.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AblationJson {
    pub seed: u64,
    pub rows: Vec<AblationRowJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AblationRowJson {
    pub variant: String,
    pub mean_accuracy: f64,
    pub mean_weighted_f1: f64,
    pub fold_checksum: String,
}

impl AblationJson {
    pub fn from_report(report: &AblationReport, seed: u64) -> Self {
        AblationJson {
            seed,
            rows: report
                .rows
                .iter()
                .map(|r| AblationRowJson {
                    variant: r.variant.name().to_string(),
                    mean_accuracy: r.report.mean_accuracy,
                    mean_weighted_f1: r.report.mean_weighted_f1,
                    fold_checksum: format!("{:016x}", r.report.fold_checksum),
                })
                .collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Loss curves as CSV rows `fold,epoch,train_loss,val_accuracy`.
pub fn write_curves_csv(path: &Path, report: &TrainReport) -> Result<()> {
    let mut out = String::from("fold,epoch,train_loss,val_accuracy\n");
    for fold in &report.folds {
        for point in &fold.curve {
            writeln!(
                out,
                "{},{},{:?},{:?}",
                fold.fold, point.epoch, point.train_loss, point.val_accuracy
            )?;
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn metrics_table(metrics: &Metrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "accuracy     {:.4}", metrics.accuracy);
    let _ = writeln!(out, "weighted F1  {:.4}", metrics.weighted_f1);
    for (c, f1) in metrics.per_class_f1.iter().enumerate() {
        let _ = writeln!(out, "  class {c} F1 {f1:.4}");
    }
    out
}

pub fn train_table(report: &TrainReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fold  best_epoch  accuracy  weighted_f1");
    for f in &report.folds {
        let _ = writeln!(
            out,
            "{:>4}  {:>10}  {:>8.4}  {:>11.4}",
            f.fold, f.best_epoch, f.metrics.accuracy, f.metrics.weighted_f1
        );
    }
    let _ = writeln!(
        out,
        "mean              {:>8.4}  {:>11.4}",
        report.mean_accuracy, report.mean_weighted_f1
    );
    out
}

pub fn ablation_table(json: &AblationJson) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "variant     accuracy  weighted_f1");
    for row in &json.rows {
        let _ = writeln!(
            out,
            "{:<10}  {:>8.4}  {:>11.4}",
            row.variant, row.mean_accuracy, row.mean_weighted_f1
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_table_lists_variant_rows() {
        let json = AblationJson {
            seed: 1,
            rows: vec![AblationRowJson {
                variant: "binary".into(),
                mean_accuracy: 0.5,
                mean_weighted_f1: 0.45,
                fold_checksum: "00".into(),
            }],
        };
        let table = ablation_table(&json);
        assert!(table.contains("binary"));
        assert!(table.contains("0.5000"));
    }
}
