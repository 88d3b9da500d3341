//! Plain-text report rendering: CSV tables for every evaluation
//! artifact plus the cross-repeat aggregate.
//!
//! Floats are written through `Display`, which picks the shortest
//! string that parses back to the same value. Rendering is a pure
//! function of the inputs, which is what makes byte-identical reruns
//! possible.

use std::fmt::Write as _;

use balsa::metrics::{Histogram, ReferralCurve};
use balsa::{EvaluationReport, Prediction, RocCurve};
use serde::Serialize;

/// Quotes a CSV field only when it needs it.
fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn metrics_csv(report: &EvaluationReport) -> String {
    let c = &report.confusion;
    format!(
        "auc,sensitivity,specificity,true_positive,false_positive,true_negative,false_negative\n\
         {},{},{},{},{},{},{}\n",
        report.roc.auc,
        report.sensitivity,
        report.specificity,
        c.true_positive,
        c.false_positive,
        c.true_negative,
        c.false_negative
    )
}

pub fn roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("false_positive_rate,true_positive_rate\n");
    for (fpr, tpr) in &roc.points {
        let _ = writeln!(out, "{fpr},{tpr}");
    }
    out
}

/// `key_column` names the first column: the sweep key is a sigma
/// threshold for one curve and a retained fraction for the other.
pub fn referral_csv(curve: &ReferralCurve, key_column: &str) -> String {
    let mut out = format!("{key_column},n_retained,retained_auc\n");
    for entry in &curve.entries {
        let _ = writeln!(out, "{},{},{}", entry.key, entry.n_retained, opt(entry.auc));
    }
    out
}

/// Side-by-side uncertainty histograms of correct and incorrect
/// predictions. Both sides share the binning by construction.
pub fn histogram_csv(correct: &Histogram, incorrect: &Histogram) -> String {
    let mut out = String::from("bin_low,bin_high,correct_mass,incorrect_mass\n");
    for (k, (c, i)) in correct.masses.iter().zip(&incorrect.masses).enumerate() {
        let low = correct.bin_start(k);
        let high = low + correct.bin_width;
        let _ = writeln!(out, "{low},{high},{c},{i}");
    }
    out
}

pub fn predictions_csv(ids: &[String], preds: &[Prediction]) -> String {
    let mut out = String::from("id,mean_prob,uncertainty,decision,referred\n");
    for (id, p) in ids.iter().zip(preds) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(id),
            p.mean_prob,
            p.uncertainty,
            p.decision,
            p.referred
        );
    }
    out
}

pub fn unit_auc_csv(aucs: &[f64]) -> String {
    let mut out = String::from("unit,auc\n");
    for (i, auc) in aucs.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, auc);
    }
    out
}

pub fn unit_roc_points_csv(curves: &[RocCurve]) -> String {
    let mut out = String::from("unit,false_positive_rate,true_positive_rate\n");
    for (i, curve) in curves.iter().enumerate() {
        for (fpr, tpr) in &curve.points {
            let _ = writeln!(out, "{},{fpr},{tpr}", i + 1);
        }
    }
    out
}

/// Mean and population standard deviation over repeats.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateMetric {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

pub fn summarize(values: &[f64]) -> AggregateMetric {
    assert!(!values.is_empty(), "aggregate needs at least one repeat");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    AggregateMetric {
        mean,
        std: variance.sqrt(),
        values: values.to_vec(),
    }
}

#[derive(Debug, Serialize)]
pub struct AggregateReport {
    pub n_repeats: usize,
    pub auc: AggregateMetric,
    pub sensitivity: AggregateMetric,
    pub specificity: AggregateMetric,
}

/// One row per repeat: (repeat index, auc, sensitivity, specificity).
pub type RepeatRow = (usize, f64, f64, f64);

impl AggregateReport {
    pub fn from_rows(rows: &[RepeatRow]) -> AggregateReport {
        let pick = |f: fn(&RepeatRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        AggregateReport {
            n_repeats: rows.len(),
            auc: summarize(&pick(|r| r.1)),
            sensitivity: summarize(&pick(|r| r.2)),
            specificity: summarize(&pick(|r| r.3)),
        }
    }
}

pub fn aggregate_csv(report: &AggregateReport) -> String {
    format!(
        "metric,mean,std\nauc,{},{}\nsensitivity,{},{}\nspecificity,{},{}\n",
        report.auc.mean,
        report.auc.std,
        report.sensitivity.mean,
        report.sensitivity.std,
        report.specificity.mean,
        report.specificity.std
    )
}

pub fn summary_csv(rows: &[RepeatRow]) -> String {
    let mut out = String::from("repeat,auc,sensitivity,specificity\n");
    for (repeat, auc, sens, spec) in rows {
        let _ = writeln!(out, "{repeat},{auc},{sens},{spec}");
    }
    out
}
