//! Evaluation metrics for ranking, ordinal classification and multi-label
//! technique detection. Every metric lies in [0, 1] and is invariant to item
//! order.

use crate::error::{Error, Result};

/// Single-label batch: per-item class scores and the true class index.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBatch {
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl ClassBatch {
    pub fn new(scores: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Metric(format!(
                "{} predictions for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::Metric("non-finite score".into()));
        }
        Ok(ClassBatch { scores, labels })
    }

    /// One-hot scores from hard predictions.
    pub fn from_predictions(predicted: &[usize], labels: &[usize]) -> Result<Self> {
        let k = predicted.iter().chain(labels).max().map_or(1, |m| m + 1);
        let scores = predicted
            .iter()
            .map(|&p| (0..k).map(|c| f64::from(u8::from(c == p))).collect())
            .collect();
        ClassBatch::new(scores, labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Argmax per item; the lowest index wins ties.
    pub fn predicted(&self) -> Vec<usize> {
        self.scores.iter().map(|s| argmax(s)).collect()
    }

    fn non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::Metric("empty batch".into()))
        } else {
            Ok(())
        }
    }
}

/// Multi-label batch: independent per-class scores and binary relevance.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelBatch {
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<Vec<bool>>,
}

impl MultiLabelBatch {
    pub fn new(scores: Vec<Vec<f64>>, labels: Vec<Vec<bool>>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Metric(format!(
                "{} predictions for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().zip(&labels).any(|(s, l)| s.len() != l.len()) {
            return Err(Error::Metric("score and label widths differ".into()));
        }
        if scores.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::Metric("non-finite score".into()));
        }
        Ok(MultiLabelBatch { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }

    fn column(&self, class: usize) -> (Vec<f64>, Vec<bool>) {
        (
            self.scores.iter().map(|s| s[class]).collect(),
            self.labels.iter().map(|l| l[class]).collect(),
        )
    }

    fn non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::Metric("empty batch".into()))
        } else {
            Ok(())
        }
    }
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn observed_classes(labels: &[usize]) -> Vec<usize> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// Accuracy within `n`: per observed class, the fraction of its items
/// predicted within `n` ordinal steps, averaged over classes.
pub fn acc_within_n(batch: &ClassBatch, n: usize) -> Result<f64> {
    batch.non_empty()?;
    let predicted = batch.predicted();
    let classes = observed_classes(&batch.labels);
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let (hits, support) = predicted
                .iter()
                .zip(&batch.labels)
                .filter(|(_, &y)| y == c)
                .fold((0usize, 0usize), |(h, s), (&p, _)| {
                    (h + usize::from(p.abs_diff(c) <= n), s + 1)
                });
            hits as f64 / support as f64
        })
        .sum();
    Ok(total / classes.len() as f64)
}

pub fn accuracy(batch: &ClassBatch) -> Result<f64> {
    batch.non_empty()?;
    let correct = batch
        .predicted()
        .iter()
        .zip(&batch.labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(correct as f64 / batch.len() as f64)
}

/// Macro F1 over classes present in the labels.
pub fn macro_f1(batch: &ClassBatch) -> Result<f64> {
    batch.non_empty()?;
    let predicted = batch.predicted();
    let classes = observed_classes(&batch.labels);
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut fn_ = 0usize;
            for (&p, &y) in predicted.iter().zip(&batch.labels) {
                match (p == c, y == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        })
        .sum();
    Ok(total / classes.len() as f64)
}

/// Non-interpolated average precision of one ranking. Tied scores share a
/// threshold, so the result does not depend on item order. `None` when
/// there are no positives.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let n_pos = relevant.iter().filter(|&&r| r).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut ap = 0.0;
    let mut seen = 0usize;
    let mut hits = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut group_hits = 0usize;
        while i < order.len() && scores[order[i]] == threshold {
            seen += 1;
            group_hits += usize::from(relevant[order[i]]);
            i += 1;
        }
        hits += group_hits;
        ap += group_hits as f64 * hits as f64 / seen as f64;
    }
    Some(ap / n_pos as f64)
}

/// AP per class; `None` for classes without positives.
pub fn average_precision_per_class(batch: &MultiLabelBatch) -> Result<Vec<Option<f64>>> {
    batch.non_empty()?;
    Ok((0..batch.n_classes())
        .map(|c| {
            let (scores, relevant) = batch.column(c);
            average_precision(&scores, &relevant)
        })
        .collect())
}

/// Mean AP over classes with at least one positive.
pub fn mean_average_precision(batch: &MultiLabelBatch) -> Result<f64> {
    let per_class = average_precision_per_class(batch)?;
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let skipped = per_class.len() - present.len();
    if present.is_empty() {
        return Err(Error::Metric("no positives in any class".into()));
    }
    if skipped > 0 {
        log::warn!("mAP: {skipped} class(es) without positives excluded");
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// ROC area of one class via the Mann-Whitney rank statistic, ties counted
/// one half. `None` when the class is all-positive or all-negative.
pub fn roc_auc(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let n_pos = relevant.iter().filter(|&&r| r).count();
    let n_neg = relevant.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average 1-based ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| relevant[k]).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Macro ROC-AUC over non-degenerate classes.
pub fn auc(batch: &MultiLabelBatch) -> Result<f64> {
    batch.non_empty()?;
    let per_class: Vec<Option<f64>> = (0..batch.n_classes())
        .map(|c| {
            let (scores, relevant) = batch.column(c);
            roc_auc(&scores, &relevant)
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Metric("every class is degenerate (all positive or all negative)".into()));
    }
    if present.len() < per_class.len() {
        log::warn!("AUC: {} degenerate class(es) excluded", per_class.len() - present.len());
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Fraction of correct binary decisions over all item x class cells; a cell
/// is predicted positive when its score is at least `threshold`.
pub fn multilabel_accuracy(batch: &MultiLabelBatch, threshold: f64) -> Result<f64> {
    batch.non_empty()?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Metric(format!("threshold {threshold} outside (0, 1)")));
    }
    let mut correct = 0usize;
    let mut cells = 0usize;
    for (scores, labels) in batch.scores.iter().zip(&batch.labels) {
        for (&s, &l) in scores.iter().zip(labels) {
            correct += usize::from((s >= threshold) == l);
            cells += 1;
        }
    }
    Ok(correct as f64 / cells as f64)
}

/// An item is correct when its top-scoring class is any of its labels.
pub fn single_label_accuracy(batch: &MultiLabelBatch) -> Result<f64> {
    batch.non_empty()?;
    let correct = batch
        .scores
        .iter()
        .zip(&batch.labels)
        .filter(|(s, l)| l[argmax(s)])
        .count();
    Ok(correct as f64 / batch.len() as f64)
}

/// Technique-style single-label view: macro F1 where the target of each item
/// is its predicted class when that is one of its labels, else its first label.
pub fn single_label_f1(batch: &MultiLabelBatch) -> Result<f64> {
    batch.non_empty()?;
    let mut targets = Vec::with_capacity(batch.len());
    for (s, l) in batch.scores.iter().zip(&batch.labels) {
        let p = argmax(s);
        let target = if l[p] {
            p
        } else {
            l.iter().position(|&x| x).ok_or_else(|| {
                Error::Metric("single-label F1 needs at least one label per item".into())
            })?
        };
        targets.push(target);
    }
    macro_f1(&ClassBatch::new(batch.scores.clone(), targets)?)
}
