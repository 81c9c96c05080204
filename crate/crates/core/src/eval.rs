//! Metrics, credible-interval selection, split reproducibility and
//! validation-driven grid choice.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::rngkit::RandomStream;
use crate::{EdgeFeatureTable, Error, Label, Matrix, PosteriorDraws, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mc: f64,
    pub f1: f64,
    pub informedness: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion-matrix metrics with +1 as the positive class.
pub fn metrics(truth: &[Label], predicted: &[Label]) -> Result<MetricsReport> {
    metrics_with_positive(truth, predicted, Label::Pos)
}

/// Metrics for an arbitrary positive class. Zero denominators give 0.
pub fn metrics_with_positive(truth: &[Label], predicted: &[Label], positive: Label) -> Result<MetricsReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch { what: "predicted labels", expected: truth.len(), found: predicted.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one subject".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t == positive, p == positive) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(MetricsReport {
        mc: ratio(fp + fn_, truth.len()),
        f1,
        informedness: recall + specificity - 1.0,
        precision,
        recall,
        specificity,
        tp,
        fp,
        tn,
        fn_,
    })
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjust {
    None,
    Bonferroni,
}

impl core::str::FromStr for Adjust {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Adjust::None),
            "bonferroni" => Ok(Adjust::Bonferroni),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown adjustment `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureInterval {
    pub index: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub alpha: f64,
    pub adjust: Adjust,
    /// Level actually used for the intervals.
    pub alpha_used: f64,
    pub features: Vec<FeatureInterval>,
}

impl SelectionReport {
    pub fn significant(&self) -> Vec<usize> {
        self.features.iter().filter(|f| f.significant).map(|f| f.index).collect()
    }
}

/// Equal-tailed `1 - α` intervals of every identified coefficient.
pub fn credible_select(draws: &PosteriorDraws, alpha: f64, adjust: Adjust) -> Result<SelectionReport> {
    credible_select_matrix(&draws.coefficient_matrix()?, alpha, adjust)
}

/// As [`credible_select`] on a draws × coefficients matrix.
pub fn credible_select_matrix(m: &Matrix, alpha: f64, adjust: Adjust) -> Result<SelectionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha });
    }
    if m.nrows() == 0 {
        return Err(Error::Degenerate("no posterior draws"));
    }
    let alpha_used = match adjust {
        Adjust::None => alpha,
        Adjust::Bonferroni => alpha / m.ncols().max(1) as f64,
    };
    let mut col = Vec::with_capacity(m.nrows());
    let features = (0..m.ncols())
        .map(|j| {
            col.clear();
            col.extend(m.column(j).iter().copied());
            col.sort_by(|a, b| a.total_cmp(b));
            let lower = quantile_sorted(&col, alpha_used / 2.0);
            let upper = quantile_sorted(&col, 1.0 - alpha_used / 2.0);
            FeatureInterval {
                index: j,
                mean: col.iter().sum::<f64>() / col.len() as f64,
                lower,
                upper,
                significant: lower > 0.0 || upper < 0.0,
            }
        })
        .collect();
    Ok(SelectionReport { alpha, adjust, alpha_used, features })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Class-stratified random splits. Split `s` shuffles each class with stream
/// `s` of `seed` and sends `round(test_fraction·n_class)` of it to the test
/// side. Index lists are sorted.
pub fn stratified_splits(labels: &[Label], n_splits: usize, test_fraction: f64, seed: u64) -> Result<Vec<Split>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter { name: "test_fraction", value: test_fraction });
    }
    if n_splits == 0 {
        return Err(Error::InvalidArgument("at least one split is required".into()));
    }
    let classes: [Vec<usize>; 2] = [
        (0..labels.len()).filter(|&i| labels[i] == Label::Neg).collect(),
        (0..labels.len()).filter(|&i| labels[i] == Label::Pos).collect(),
    ];
    let mut out = Vec::with_capacity(n_splits);
    for s in 0..n_splits {
        let mut rng = RandomStream::new(seed, s as u64);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for class in &classes {
            let mut idx = class.clone();
            rng.shuffle(&mut idx);
            let k = (test_fraction * idx.len() as f64).round() as usize;
            test.extend_from_slice(&idx[..k]);
            train.extend_from_slice(&idx[k..]);
        }
        let train_classes = classes.iter().filter(|c| c.iter().any(|i| train.contains(i))).count();
        if train_classes < 2 {
            return Err(Error::SplitSingleClass { split: s });
        }
        train.sort_unstable();
        test.sort_unstable();
        out.push(Split { train, test });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproducibilityReport {
    pub splits: Vec<Split>,
    /// Significant coefficient indices of every split's training fit.
    pub per_split: Vec<Vec<usize>>,
    /// Indices significant in every split.
    pub reproducible: Vec<usize>,
}

/// Fits `fit` on the training side of each split (standardization refit on
/// the training rows) and intersects the significant sets.
pub fn reproducible_features<F>(
    table: &EdgeFeatureTable,
    n_splits: usize,
    test_fraction: f64,
    alpha: f64,
    adjust: Adjust,
    seed: u64,
    mut fit: F,
) -> Result<ReproducibilityReport>
where
    F: FnMut(usize, &EdgeFeatureTable) -> Result<PosteriorDraws>,
{
    if n_splits < 2 {
        return Err(Error::InvalidArgument("reproducibility needs at least 2 splits".into()));
    }
    let labels: Vec<Label> = table
        .labels
        .iter()
        .map(|l| l.ok_or_else(|| Error::InvalidArgument("unlabeled subject in training table".into())))
        .collect::<Result<_>>()?;
    let splits = stratified_splits(&labels, n_splits, test_fraction, seed)?;
    let mut per_split = Vec::with_capacity(n_splits);
    for (s, split) in splits.iter().enumerate() {
        let train = table.subset(&split.train).restandardized(None)?;
        let draws = fit(s, &train)?;
        per_split.push(credible_select(&draws, alpha, adjust)?.significant());
    }
    Ok(ReproducibilityReport { reproducible: intersect_all(&per_split), splits, per_split })
}

/// Indices present in every list.
pub fn intersect_all(sets: &[Vec<usize>]) -> Vec<usize> {
    match sets.split_first() {
        None => Vec::new(),
        Some((first, rest)) => first.iter().copied().filter(|i| rest.iter().all(|s| s.contains(i))).collect(),
    }
}

/// Which end of the candidate values wins a tie in validation error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prefer {
    /// Sparser networks (smaller density).
    Smaller,
    /// Longer windows.
    Larger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub value: f64,
    pub report: core::result::Result<MetricsReport, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSelection {
    pub chosen: usize,
    pub chosen_value: f64,
    pub outcomes: Vec<CandidateOutcome>,
}

/// Evaluates every candidate with `fit_eval` (train, then score on the
/// validation rows) and picks the smallest validation MC. Failed
/// candidates are recorded and skipped.
pub fn select_by_validation<F>(candidates: &[f64], prefer: Prefer, mut fit_eval: F) -> Result<ValidationSelection>
where
    F: FnMut(f64) -> Result<MetricsReport>,
{
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let outcomes: Vec<CandidateOutcome> = candidates
        .iter()
        .map(|&value| CandidateOutcome { value, report: fit_eval(value).map_err(|e| alloc::format!("{e}")) })
        .collect();
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        let Ok(r) = &o.report else { continue };
        let take = match best {
            None => true,
            Some(b) => {
                let br = outcomes[b].report.as_ref().map(|r| r.mc).unwrap_or(f64::INFINITY);
                if r.mc != br {
                    r.mc < br
                } else {
                    match prefer {
                        Prefer::Smaller => o.value < outcomes[b].value,
                        Prefer::Larger => o.value > outcomes[b].value,
                    }
                }
            }
        };
        if take {
            best = Some(i);
        }
    }
    match best {
        Some(chosen) => Ok(ValidationSelection { chosen, chosen_value: candidates[chosen], outcomes }),
        None => {
            let msgs: Vec<String> = outcomes
                .iter()
                .filter_map(|o| o.report.as_ref().err().map(|e| alloc::format!("{}: {e}", o.value)))
                .collect();
            Err(Error::AllCandidatesFailed(msgs.join("; ")))
        }
    }
}
