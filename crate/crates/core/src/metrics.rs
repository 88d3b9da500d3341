//! Evaluation metrics and referral analyses.
//!
//! The headline metric is ROC-AUC computed through the Mann–Whitney
//! rank statistic: the probability that a uniformly chosen positive
//! sample scores above a uniformly chosen negative one, with ties
//! counted half. The rank form is exact, unlike trapezoid integration
//! over a threshold grid, and the exhaustive pairwise definition is
//! used as the test oracle against it.
//!
//! Referral analyses answer "what happens to AUC if the most uncertain
//! predictions are sent for repeat testing instead of being scored":
//!
//! * [`referral_by_threshold`] sweeps an uncertainty ceiling and keeps
//!   samples strictly below it.
//! * [`referral_by_fraction`] keeps a fixed fraction of samples with
//!   the lowest uncertainty, breaking ties by sample id so the
//!   retained set never depends on input order.
//!
//! Entries whose retained set lacks a class are reported as undefined
//! (`auc: None`), never extrapolated: AUC over a single class has no
//! meaning, and silently reporting 0 or 1 would fabricate exactly the
//! artefact the sweep is meant to reveal.

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::ensemble::Prediction;
use crate::error::MetricsError;

/// Default bin width for uncertainty histograms: 10 bins over
/// [0, 0.5].
pub const DEFAULT_HISTOGRAM_BIN_WIDTH: f64 = 0.05;

/// Decision-versus-label counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

/// ROC curve points and the area under them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive-rate, true-positive-rate) pairs, monotone
    /// nondecreasing in both coordinates from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// One entry of a referral sweep. `key` is the sigma threshold or the
/// retained fraction, depending on which sweep produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferralEntry {
    pub key: f64,
    /// None when the retained set lacks one of the classes.
    pub auc: Option<f64>,
    pub n_retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferralCurve {
    pub entries: Vec<ReferralEntry>,
}

/// Normalized histogram over [0, 0.5].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Normalized masses, one per bin; all zero when `count` is 0.
    pub masses: Vec<f64>,
    pub count: usize,
}

impl Histogram {
    /// Inclusive lower edge of bin `k`.
    pub fn bin_start(&self, k: usize) -> f64 {
        k as f64 * self.bin_width
    }
}

/// Everything the evaluation stage reports for one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionCounts,
    pub sensitivity: f64,
    pub specificity: f64,
    pub roc: RocCurve,
    pub uncertainty_correct: Histogram,
    pub uncertainty_incorrect: Histogram,
    pub referral_by_threshold: ReferralCurve,
    pub referral_by_fraction: ReferralCurve,
}

fn check_lengths(left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        return Err(MetricsError::LengthMismatch { left, right });
    }
    Ok(())
}

/// Counts decisions against labels.
pub fn confusion(preds: &[Prediction], labels: &[Label]) -> Result<ConfusionCounts, MetricsError> {
    check_lengths(preds.len(), labels.len())?;
    let mut counts = ConfusionCounts {
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for (pred, label) in preds.iter().zip(labels) {
        match (pred.decision.is_positive(), label.is_positive()) {
            (true, true) => counts.true_positive += 1,
            (true, false) => counts.false_positive += 1,
            (false, false) => counts.true_negative += 1,
            (false, true) => counts.false_negative += 1,
        }
    }
    Ok(counts)
}

/// True positive rate TP / (TP + FN). Undefined without positives.
pub fn sensitivity(c: &ConfusionCounts) -> Result<f64, MetricsError> {
    let denom = c.true_positive + c.false_negative;
    if denom == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "sensitivity",
        });
    }
    Ok(c.true_positive as f64 / denom as f64)
}

/// True negative rate TN / (TN + FP). Undefined without negatives.
pub fn specificity(c: &ConfusionCounts) -> Result<f64, MetricsError> {
    let denom = c.true_negative + c.false_positive;
    if denom == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "specificity",
        });
    }
    Ok(c.true_negative as f64 / denom as f64)
}

/// ROC curve and AUC from scores and labels.
///
/// AUC uses the Mann–Whitney statistic: positives' rank sum with
/// average ranks across tied scores, which counts every tied
/// positive-negative pair as half. Curve points come from sweeping
/// the decision threshold across the sorted unique scores.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<RocCurve, MetricsError> {
    check_lengths(scores.len(), labels.len())?;
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    for &s in scores {
        if !s.is_finite() {
            return Err(MetricsError::NonFiniteScore(s));
        }
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass { metric: "roc_auc" });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Rank sum of positives, averaging ranks within tie groups.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the average (i + j + 2) / 2.
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let tied_positives = order[i..=j]
            .iter()
            .filter(|&&idx| labels[idx].is_positive())
            .count();
        rank_sum_pos += avg_rank * tied_positives as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    let auc = (u / (n_pos as f64 * n_neg as f64)).clamp(0.0, 1.0);

    // Threshold sweep from the highest score down, one point per
    // unique score plus the origin.
    let mut points = vec![(0.0, 0.0)];
    let mut cum_tp = 0usize;
    let mut cum_fp = 0usize;
    let mut i = order.len();
    while i > 0 {
        let mut j = i;
        while j > 1 && scores[order[j - 2]] == scores[order[i - 1]] {
            j -= 1;
        }
        for &idx in &order[j - 1..i] {
            if labels[idx].is_positive() {
                cum_tp += 1;
            } else {
                cum_fp += 1;
            }
        }
        points.push((cum_fp as f64 / n_neg as f64, cum_tp as f64 / n_pos as f64));
        i = j - 1;
    }
    Ok(RocCurve { points, auc })
}

/// Splits prediction uncertainties into two normalized histograms by
/// decision correctness: (correct, incorrect).
pub fn uncertainty_split(
    preds: &[Prediction],
    labels: &[Label],
    bin_width: f64,
) -> Result<(Histogram, Histogram), MetricsError> {
    check_lengths(preds.len(), labels.len())?;
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !bin_width.is_finite() || bin_width <= 0.0 || bin_width > 0.5 {
        return Err(MetricsError::InvalidBinWidth(bin_width));
    }
    let n_bins = (0.5 / bin_width).ceil() as usize;
    let mut counts = [vec![0usize; n_bins], vec![0usize; n_bins]];
    let mut totals = [0usize; 2];
    for (pred, label) in preds.iter().zip(labels) {
        let correct = pred.decision.is_positive() == label.is_positive();
        let side = if correct { 0 } else { 1 };
        let bin = ((pred.uncertainty / bin_width).floor() as usize).min(n_bins - 1);
        counts[side][bin] += 1;
        totals[side] += 1;
    }
    let build = |counts: &[usize], total: usize| Histogram {
        bin_width,
        masses: counts
            .iter()
            .map(|&c| {
                if total == 0 {
                    0.0
                } else {
                    c as f64 / total as f64
                }
            })
            .collect(),
        count: total,
    };
    Ok((build(&counts[0], totals[0]), build(&counts[1], totals[1])))
}

fn retained_auc(
    preds: &[Prediction],
    labels: &[Label],
    retained: &[usize],
) -> Result<Option<f64>, MetricsError> {
    let n_pos = retained
        .iter()
        .filter(|&&i| labels[i].is_positive())
        .count();
    if n_pos == 0 || n_pos == retained.len() {
        return Ok(None);
    }
    let scores: Vec<f64> = retained.iter().map(|&i| preds[i].mean_prob).collect();
    let kept_labels: Vec<Label> = retained.iter().map(|&i| labels[i]).collect();
    Ok(Some(roc_auc(&scores, &kept_labels)?.auc))
}

/// AUC over the samples whose uncertainty is strictly below each
/// threshold.
///
/// Thresholds must be sorted ascending. Entries whose retained set
/// lacks a class carry `auc: None`.
pub fn referral_by_threshold(
    preds: &[Prediction],
    labels: &[Label],
    thresholds: &[f64],
) -> Result<ReferralCurve, MetricsError> {
    check_lengths(preds.len(), labels.len())?;
    if thresholds.windows(2).any(|w| w[0] > w[1]) || thresholds.iter().any(|t| t.is_nan()) {
        return Err(MetricsError::UnsortedThresholds);
    }
    let mut entries = Vec::with_capacity(thresholds.len());
    for &tau in thresholds {
        let retained: Vec<usize> = (0..preds.len())
            .filter(|&i| preds[i].uncertainty < tau)
            .collect();
        entries.push(ReferralEntry {
            key: tau,
            auc: retained_auc(preds, labels, &retained)?,
            n_retained: retained.len(),
        });
    }
    Ok(ReferralCurve { entries })
}

/// AUC over the `round(f * n)` samples with the lowest uncertainty for
/// each fraction `f`.
///
/// Ties in uncertainty are broken by sample id, so the retained set is
/// a pure function of the predictions, never of their order. `ids`
/// runs parallel to `preds`.
pub fn referral_by_fraction(
    preds: &[Prediction],
    labels: &[Label],
    ids: &[String],
    fractions: &[f64],
) -> Result<ReferralCurve, MetricsError> {
    check_lengths(preds.len(), labels.len())?;
    check_lengths(preds.len(), ids.len())?;
    for &f in fractions {
        if !f.is_finite() || f <= 0.0 || f > 1.0 {
            return Err(MetricsError::InvalidFraction(f));
        }
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[a]
            .uncertainty
            .partial_cmp(&preds[b].uncertainty)
            .expect("finite uncertainty")
            .then_with(|| ids[a].cmp(&ids[b]))
    });

    let n = preds.len() as f64;
    let mut entries = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let m = ((f * n + 0.5).floor() as usize).min(preds.len());
        let retained = &order[..m];
        entries.push(ReferralEntry {
            key: f,
            auc: retained_auc(preds, labels, retained)?,
            n_retained: m,
        });
    }
    Ok(ReferralCurve { entries })
}

/// Sigma thresholds 0.00, 0.01, ..., 0.50.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=50).map(|i| i as f64 / 100.0).collect()
}

/// Retained fractions 0.05, 0.10, ..., 1.00.
pub fn default_fraction_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

/// Computes the full evaluation report with the default grids and
/// histogram bin width.
pub fn evaluate(
    preds: &[Prediction],
    labels: &[Label],
    ids: &[String],
) -> Result<EvaluationReport, MetricsError> {
    let counts = confusion(preds, labels)?;
    let scores: Vec<f64> = preds.iter().map(|p| p.mean_prob).collect();
    let roc = roc_auc(&scores, labels)?;
    let (uncertainty_correct, uncertainty_incorrect) =
        uncertainty_split(preds, labels, DEFAULT_HISTOGRAM_BIN_WIDTH)?;
    Ok(EvaluationReport {
        sensitivity: sensitivity(&counts)?,
        specificity: specificity(&counts)?,
        confusion: counts,
        roc,
        uncertainty_correct,
        uncertainty_incorrect,
        referral_by_threshold: referral_by_threshold(preds, labels, &default_threshold_grid())?,
        referral_by_fraction: referral_by_fraction(preds, labels, ids, &default_fraction_grid())?,
    })
}

// ============================================================================
// Tests
// ============================================================================
