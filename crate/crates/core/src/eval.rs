//! Ranking metrics, the energy distance, and the three evaluation tasks:
//! confidence (correct vs wrong), OOD detection and noisy-input detection.
//!
//! Every score column is oriented so that higher means "more confident" or
//! "more in-distribution"; entropies and mutual information enter negated.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::data::{add_noise, Dataset};
use crate::error::{Error, Result};
use crate::net::{predict_dataset, EvidentialMlp, Scores};

pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

pub const CSV_HEADER: &str = "task,score,metric,value,seed";
pub const AGGREGATE_HEADER: &str = "task,score,metric,mean,std,n";

/// Real scores with binary labels, at least one of each label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
    positives: usize,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Dimension {
                context: "scores vs labels",
                expected: scores.len(),
                found: labels.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::Empty("scored set"));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::NonFinite { term: "score".into() });
        }
        let positives = labels.iter().filter(|&&l| l).count();
        if positives == 0 || positives == labels.len() {
            return Err(Error::SingleClass("scored set"));
        }
        Ok(Self { scores, labels, positives })
    }

    /// Positives first, then negatives.
    pub fn from_groups(positive: &[f64], negative: &[f64]) -> Result<Self> {
        let scores = positive.iter().chain(negative).copied().collect();
        let labels = std::iter::repeat(true)
            .take(positive.len())
            .chain(std::iter::repeat(false).take(negative.len()))
            .collect();
        Self::new(scores, labels)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Indices sorted by descending score, ties by insertion order.
    fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    /// Runs of equal score in descending order, as (positives, negatives).
    fn tie_groups(&self) -> Vec<(usize, usize)> {
        let ranked = self.ranked();
        let mut groups = Vec::new();
        let mut i = 0;
        while i < ranked.len() {
            let s = self.scores[ranked[i]];
            let (mut pos, mut neg) = (0, 0);
            while i < ranked.len() && self.scores[ranked[i]] == s {
                if self.labels[ranked[i]] {
                    pos += 1;
                } else {
                    neg += 1;
                }
                i += 1;
            }
            groups.push((pos, neg));
        }
        groups
    }
}

/// P(score of a random positive > score of a random negative), ties ½.
pub fn auroc(s: &ScoredSet) -> f64 {
    let n_pos = s.positives as f64;
    let n_neg = (s.len() - s.positives) as f64;
    // Walk groups from the top; every positive beats all negatives ranked
    // strictly below it.
    let mut neg_above = 0.0;
    let mut wins = 0.0;
    for (pos, neg) in s.tie_groups() {
        let (pos, neg) = (pos as f64, neg as f64);
        wins += pos * (n_neg - neg_above - neg) + 0.5 * pos * neg;
        neg_above += neg;
    }
    wins / (n_pos * n_neg)
}

/// Step-wise average precision; a tie group enters the ranking all at once.
pub fn aupr(s: &ScoredSet) -> f64 {
    let n_pos = s.positives as f64;
    let (mut tp, mut seen) = (0.0, 0.0);
    let mut ap = 0.0;
    for (pos, neg) in s.tie_groups() {
        tp += pos as f64;
        seen += (pos + neg) as f64;
        if pos > 0 {
            ap += (tp / seen) * (pos as f64 / n_pos);
        }
    }
    ap
}

fn mean_abs_cross(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in a {
        for &y in b {
            s += (x - y).abs();
        }
    }
    s / (a.len() * b.len()) as f64
}

fn mean_abs_within(a: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (a[i] - a[j]).abs();
        }
    }
    2.0 * s / (n * (n - 1)) as f64
}

/// √(2E|X−Y| − E|X−X′| − E|Y−Y′|) with within-sample expectations over
/// distinct pairs, clamped at 0 before the root.
pub fn energy_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("energy distance sample"));
    }
    let e = 2.0 * mean_abs_cross(a, b) - mean_abs_within(a) - mean_abs_within(b);
    Ok(e.max(0.0).sqrt())
}

/// (u − min) / (max − min); a constant input maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

/// Min-max normalizes `a ∪ b` with shared bounds and returns the two halves.
pub fn normalize_jointly(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut all = min_max_normalize(&[a, b].concat());
    let tail = all.split_off(a.len());
    (all, tail)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub score: String,
    pub metric: String,
    /// `None` when the metric is undefined, e.g. AUPR without negatives.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskReport {
    pub task: String,
    pub seed: u64,
    pub rows: Vec<MetricRow>,
}

impl TaskReport {
    fn new(task: &str) -> Self {
        Self {
            task: task.to_string(),
            seed: 0,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, score: &str, metric: &str, value: Option<f64>) {
        self.rows.push(MetricRow {
            score: score.into(),
            metric: metric.into(),
            value,
        });
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn get(&self, score: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.score == score && r.metric == metric)
            .and_then(|r| r.value)
    }

    /// Header plus one row per metric; unavailable values are written `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let v = r.value.map_or_else(|| "NA".to_string(), |v| v.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", self.task, r.score, r.metric, v, self.seed);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub task: String,
    pub score: String,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single run.
    pub std: f64,
    pub n: usize,
}

/// Mean and standard deviation of each (task, score, metric) across
/// reports, skipping unavailable values. Rows keep first-seen order.
pub fn aggregate(reports: &[TaskReport]) -> Vec<AggregateRow> {
    let mut order = Vec::new();
    let mut values: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for rep in reports {
        for r in &rep.rows {
            let key = (rep.task.clone(), r.score.clone(), r.metric.clone());
            if !values.contains_key(&key) {
                order.push(key.clone());
            }
            let entry = values.entry(key).or_default();
            if let Some(v) = r.value {
                entry.push(v);
            }
        }
    }
    order
        .into_iter()
        .map(|key| {
            let v = &values[&key];
            let n = v.len();
            let mean = if n > 0 { v.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                task: key.0,
                score: key.1,
                metric: key.2,
                mean,
                std,
                n,
            }
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let mean = if r.n > 0 { r.mean.to_string() } else { "NA".into() };
        let _ = writeln!(out, "{},{},{},{},{},{}", r.task, r.score, r.metric, mean, r.std, r.n);
    }
    out
}

fn push_ranking(report: &mut TaskReport, score: &str, set: Option<&ScoredSet>) {
    report.push(score, "aupr", set.map(aupr));
    report.push(score, "auroc", set.map(auroc));
}

/// Max.P and Max.α against prediction correctness.
pub fn confidence_from_scores(scores: &[Scores], labels: &[usize]) -> Result<TaskReport> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            context: "scores vs labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::Empty("confidence test set"));
    }
    let correct: Vec<bool> = scores.iter().zip(labels).map(|(s, &l)| s.predicted == l).collect();
    let accuracy = correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64;
    let mut report = TaskReport::new("confidence");
    report.push("prediction", "accuracy", Some(accuracy));
    for (name, f) in [("max_p", (|s: &Scores| s.max_p) as fn(&Scores) -> f64), ("max_alpha", |s| s.max_alpha)] {
        let set = match ScoredSet::new(scores.iter().map(f).collect(), correct.clone()) {
            Ok(set) => Some(set),
            Err(Error::SingleClass(_)) => None,
            Err(e) => return Err(e),
        };
        push_ranking(&mut report, name, set.as_ref());
    }
    Ok(report)
}

pub fn confidence_eval(model: &EvidentialMlp, test: &Dataset) -> Result<TaskReport> {
    let scores = predict_dataset(model, test)?;
    confidence_from_scores(&scores, test.require_labels()?)
}

/// Per-sample OOD score columns, in report order.
pub const OOD_SCORES: [&str; 4] = ["max_p", "alpha0", "neg_diff_ent", "neg_mi"];

fn ood_columns(s: &Scores) -> [f64; 4] {
    [s.max_p, s.alpha0, -s.diff_ent, -s.mi]
}

/// ID (positive) vs OOD (negative) ranking per score column, plus the
/// energy distance between the jointly normalized differential-entropy
/// distributions.
pub fn ood_from_scores(task: &str, id: &[Scores], ood: &[Scores]) -> Result<TaskReport> {
    if id.is_empty() || ood.is_empty() {
        return Err(Error::Empty("OOD detection set"));
    }
    let mut report = TaskReport::new(task);
    for (c, name) in OOD_SCORES.iter().enumerate() {
        let pos: Vec<f64> = id.iter().map(|s| ood_columns(s)[c]).collect();
        let neg: Vec<f64> = ood.iter().map(|s| ood_columns(s)[c]).collect();
        let set = ScoredSet::from_groups(&pos, &neg)?;
        push_ranking(&mut report, name, Some(&set));
    }
    let de_id: Vec<f64> = id.iter().map(|s| s.diff_ent).collect();
    let de_ood: Vec<f64> = ood.iter().map(|s| s.diff_ent).collect();
    let (a, b) = normalize_jointly(&de_id, &de_ood);
    report.push("diff_ent", "energy_distance", Some(energy_distance(&a, &b)?));
    Ok(report)
}

pub fn ood_detect(model: &EvidentialMlp, id: &Dataset, ood: &Dataset) -> Result<TaskReport> {
    let id_scores = predict_dataset(model, id)?;
    let ood_scores = predict_dataset(model, ood)?;
    ood_from_scores("ood", &id_scores, &ood_scores)
}

/// Clean inputs (positive) against a Gaussian-perturbed copy (negative).
pub fn noisy_detect(model: &EvidentialMlp, test: &Dataset, sigma: f64, seed: u64) -> Result<TaskReport> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let noisy = add_noise(test, sigma, seed)?;
    let clean_scores = predict_dataset(model, test)?;
    let noisy_scores = predict_dataset(model, &noisy)?;
    ood_from_scores("noisy", &clean_scores, &noisy_scores)
}
