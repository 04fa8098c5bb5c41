//! Evaluation: 3-class confusion and macro metrics, MAE between score sets,
//! and the two-sided Mann-Whitney U test for secure/vulnerable separation.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::corpus::{AdherenceLabel, GroundTruthMatrix, VariantPair};
use crate::practices::PracticeId;
use crate::quality_model::TrustScore;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("prediction and truth cover different pairs: {0}")]
    CoverageMismatch(String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no keys with defined values on both sides")]
    EmptyIntersection,
    #[error("score maps have different keys: {0}")]
    KeyMismatch(String),
    #[error("sample {0} is empty")]
    EmptySample(&'static str),
    #[error("no variant pairs with defined scores")]
    NoPairs,
}

/// Rows are truth, columns prediction; both axes ordered Followed, NotFollowed, NotApplicable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix3 {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix3 {
    pub fn add(&mut self, truth: AdherenceLabel, predicted: AdherenceLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionReport {
    pub matrix: ConfusionMatrix3,
    /// Predictions whose parse failed; not tallied.
    pub excluded: u64,
}

/// One evaluated (function, practice) prediction. `None` marks a failed parse.
pub type Prediction = Option<AdherenceLabel>;

/// Tallies predictions against truth. Both maps must cover the same keys.
pub fn confusion<K: Ord + std::fmt::Debug>(
    predictions: &BTreeMap<K, Prediction>,
    truth: &BTreeMap<K, AdherenceLabel>,
) -> Result<ConfusionReport, AnalyticsError> {
    if let Some(k) = predictions.keys().find(|k| !truth.contains_key(*k)) {
        return Err(AnalyticsError::CoverageMismatch(format!("{k:?} has a prediction but no truth")));
    }
    if let Some(k) = truth.keys().find(|k| !predictions.contains_key(*k)) {
        return Err(AnalyticsError::CoverageMismatch(format!("{k:?} has truth but no prediction")));
    }
    let mut report = ConfusionReport::default();
    for (k, pred) in predictions {
        match pred {
            Some(p) => report.matrix.add(truth[k], *p),
            None => report.excluded += 1,
        }
    }
    Ok(report)
}

/// Per-practice confusion reports over ground-truth keys.
pub fn confusion_by_practice(
    predictions: &BTreeMap<(String, PracticeId), Prediction>,
    truth: &GroundTruthMatrix,
) -> Result<BTreeMap<PracticeId, ConfusionReport>, AnalyticsError> {
    confusion(predictions, truth.entries())?;
    let mut out: BTreeMap<PracticeId, ConfusionReport> = BTreeMap::new();
    for ((fid, pid), pred) in predictions {
        let entry = out.entry(*pid).or_default();
        match pred {
            Some(p) => entry.matrix.add(truth.get(fid, *pid).expect("coverage checked"), *p),
            None => entry.excluded += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroMetrics {
    /// Overall fraction correct (trace / total).
    pub accuracy: f64,
    /// Mean per-class recall.
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: [ClassMetrics; 3],
    /// Classes absent from both truth and prediction; they count as 0 in the means.
    pub empty_classes: usize,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Macro-averaged metrics with a fixed 3-class denominator.
pub fn macro_metrics(cm: &ConfusionMatrix3) -> Result<MacroMetrics, AnalyticsError> {
    let total = cm.total();
    if total == 0 {
        return Err(AnalyticsError::EmptyMatrix);
    }
    let mut per_class = [ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0 }; 3];
    let mut empty_classes = 0;
    for (c, class) in per_class.iter_mut().enumerate() {
        let tp = cm.counts[c][c];
        let predicted: u64 = (0..3).map(|r| cm.counts[r][c]).sum();
        let actual: u64 = cm.counts[c].iter().sum();
        if predicted == 0 && actual == 0 {
            empty_classes += 1;
        }
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        *class = ClassMetrics { precision, recall, f1 };
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / 3.0;
    Ok(MacroMetrics {
        accuracy: ratio(cm.trace(), total),
        balanced_accuracy: mean(|c| c.recall),
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        per_class,
        empty_classes,
    })
}

/// Mean absolute error over keys where both sides are defined.
pub fn mae(
    predicted: &BTreeMap<String, Option<f64>>,
    reference: &BTreeMap<String, Option<f64>>,
) -> Result<MaeResult, AnalyticsError> {
    let pk: BTreeSet<&String> = predicted.keys().collect();
    let rk: BTreeSet<&String> = reference.keys().collect();
    if pk != rk {
        let diff: Vec<&&String> = pk.symmetric_difference(&rk).take(3).collect();
        return Err(AnalyticsError::KeyMismatch(format!("{diff:?}")));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut excluded = 0usize;
    for (k, p) in predicted {
        match (p, reference[k]) {
            (Some(p), Some(r)) => {
                sum += (p - r).abs();
                n += 1;
            }
            _ => excluded += 1,
        }
    }
    if n == 0 {
        return Err(AnalyticsError::EmptyIntersection);
    }
    Ok(MaeResult { mae: sum / n as f64, n, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaeResult {
    pub mae: f64,
    pub n: usize,
    pub excluded: usize,
}

/// Band of MAE values reported for direct LLM score estimation.
pub const REPORTED_MAE_BAND: (f64, f64) = (0.40, 0.60);

/// True when a direct-estimation MAE falls inside [`REPORTED_MAE_BAND`].
pub fn mae_in_reported_band(mae: f64) -> bool {
    (REPORTED_MAE_BAND.0..=REPORTED_MAE_BAND.1).contains(&mae)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MwMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwMethodChoice {
    Auto,
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MannWhitneyConfig {
    /// Exact distribution used when n1 + n2 is at most this and there are no ties.
    pub exact_threshold: usize,
    pub method: MwMethodChoice,
}

impl Default for MannWhitneyConfig {
    fn default() -> Self {
        MannWhitneyConfig { exact_threshold: 20, method: MwMethodChoice::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MannWhitneyResult {
    /// U for the first sample: rank sum of `a` minus n1(n1+1)/2.
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: MwMethod,
    pub n1: usize,
    pub n2: usize,
    pub has_ties: bool,
    /// Every value identical across both samples.
    pub degenerate: bool,
}

/// Midranks (1-based) of the pooled values, plus the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Null distribution of U as counts: `freq[u]` = number of rank splits with U = u.
fn u_frequencies(n1: usize, n2: usize) -> Vec<f64> {
    // f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u); rolled over j for each i.
    let max_u = n1 * n2;
    let mut prev: Vec<Vec<f64>> = (0..=n2).map(|_| vec![0.0; max_u + 1]).collect();
    for row in prev.iter_mut() {
        row[0] = 1.0; // i = 0
    }
    for i in 1..=n1 {
        let mut cur: Vec<Vec<f64>> = (0..=n2).map(|_| vec![0.0; max_u + 1]).collect();
        cur[0][0] = 1.0;
        for j in 1..=n2 {
            for u in 0..=i * j {
                let mut v = cur[j - 1][u];
                if u >= j {
                    v += prev[j][u - j];
                }
                cur[j][u] = v;
            }
        }
        prev = cur;
    }
    prev.swap_remove(n2)
}

fn exact_p(u: f64, n1: usize, n2: usize) -> f64 {
    let freq = u_frequencies(n1, n2);
    let total: f64 = freq.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = freq[..=u].iter().sum();
    let upper: f64 = freq[u..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(u: f64, n1: usize, n2: usize, ties: &[usize]) -> Option<f64> {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let mean = n1f * n2f / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let variance = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return None;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    Some(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Two-sided Mann-Whitney U test.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitneyResult, AnalyticsError> {
    mann_whitney_u_with(a, b, &MannWhitneyConfig::default())
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], config: &MannWhitneyConfig) -> Result<MannWhitneyResult, AnalyticsError> {
    if a.is_empty() {
        return Err(AnalyticsError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(AnalyticsError::EmptySample("b"));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n1].iter().sum();
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let has_ties = !ties.is_empty();
    let degenerate = ties.first().is_some_and(|&t| t == n1 + n2);

    let use_exact = match config.method {
        MwMethodChoice::Exact => !has_ties,
        MwMethodChoice::NormalApprox => false,
        MwMethodChoice::Auto => !has_ties && n1 + n2 <= config.exact_threshold,
    };
    let (p_value, method) = if degenerate {
        (1.0, MwMethod::NormalApprox)
    } else if use_exact {
        (exact_p(u, n1, n2), MwMethod::Exact)
    } else {
        (normal_p(u, n1, n2, &ties).unwrap_or(1.0), MwMethod::NormalApprox)
    };
    Ok(MannWhitneyResult {
        u_statistic: u,
        p_value,
        method,
        n1,
        n2,
        has_ties,
        degenerate,
    })
}

/// Five-number summary with linear-interpolation quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
}

/// Quantile by linear interpolation between order statistics at h = (n-1)p.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot_stats(values: &[f64]) -> Option<BoxplotStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(BoxplotStats {
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        n: sorted.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub secure: BoxplotStats,
    pub vulnerable: BoxplotStats,
    pub test: MannWhitneyResult,
    /// True when the secure and vulnerable interquartile ranges intersect.
    pub iqr_overlap: bool,
    pub notes: Vec<String>,
}

/// Compares trust scores of the secure and vulnerable sides of variant pairs.
pub fn separation_report(
    scores: &BTreeMap<String, TrustScore>,
    pairs: &[VariantPair],
) -> Result<SeparationReport, AnalyticsError> {
    let mut secure = Vec::new();
    let mut vulnerable = Vec::new();
    let mut notes = Vec::new();
    for pair in pairs {
        for (id, bucket) in [(&pair.secure, &mut secure), (&pair.vulnerable, &mut vulnerable)] {
            match scores.get(id).and_then(|s| s.value) {
                Some(v) => bucket.push(v),
                None => notes.push(format!("`{id}` has no defined score; excluded")),
            }
        }
    }
    let (Some(s), Some(v)) = (boxplot_stats(&secure), boxplot_stats(&vulnerable)) else {
        return Err(AnalyticsError::NoPairs);
    };
    let test = mann_whitney_u(&secure, &vulnerable)?;
    Ok(SeparationReport {
        iqr_overlap: s.q1 <= v.q3 && v.q1 <= s.q3,
        secure: s,
        vulnerable: v,
        test,
        notes,
    })
}
