//! Brute-force reference definitions of the evaluation metrics and a random
//! batch generator. Shared with the acceptance suite of the CLI crate.
#![allow(dead_code)]

use rand::Rng;

pub fn argmax(scores: &[f64]) -> usize {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s == max).unwrap()
}

fn present(labels: &[usize]) -> Vec<usize> {
    let max = labels.iter().copied().max().unwrap();
    (0..=max).filter(|c| labels.contains(c)).collect()
}

pub fn acc_within_n(scores: &[Vec<f64>], labels: &[usize], n: usize) -> f64 {
    let classes = present(labels);
    let mut sum = 0.0;
    for &c in &classes {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let ok = idx
            .iter()
            .filter(|&&i| (argmax(&scores[i]) as i64 - c as i64).abs() <= n as i64)
            .count();
        sum += ok as f64 / idx.len() as f64;
    }
    sum / classes.len() as f64
}

pub fn macro_f1(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let pred: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
    let classes = present(labels);
    let mut sum = 0.0;
    for &c in &classes {
        let tp = (0..labels.len()).filter(|&i| pred[i] == c && labels[i] == c).count() as f64;
        let pp = pred.iter().filter(|&&p| p == c).count() as f64;
        let ap = labels.iter().filter(|&&l| l == c).count() as f64;
        let precision = if pp > 0.0 { tp / pp } else { 0.0 };
        let recall = tp / ap;
        sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    sum / classes.len() as f64
}

/// Mean over relevant items of the precision among all items scoring at
/// least as high.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let pos: Vec<usize> = (0..scores.len()).filter(|&i| relevant[i]).collect();
    if pos.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for &r in &pos {
        let above: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] >= scores[r]).collect();
        let rel = above.iter().filter(|&&j| relevant[j]).count();
        sum += rel as f64 / above.len() as f64;
    }
    Some(sum / pos.len() as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half.
pub fn roc_auc(scores: &[f64], relevant: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if relevant[i] && !relevant[j] {
                pairs += 1;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

fn column(scores: &[Vec<f64>], labels: &[Vec<bool>], c: usize) -> (Vec<f64>, Vec<bool>) {
    (
        scores.iter().map(|s| s[c]).collect(),
        labels.iter().map(|l| l[c]).collect(),
    )
}

fn macro_over<F>(scores: &[Vec<f64>], labels: &[Vec<bool>], f: F) -> Option<f64>
where
    F: Fn(&[f64], &[bool]) -> Option<f64>,
{
    let k = scores[0].len();
    let vals: Vec<f64> = (0..k)
        .filter_map(|c| {
            let (s, l) = column(scores, labels, c);
            f(&s, &l)
        })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

pub fn mean_average_precision(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Option<f64> {
    macro_over(scores, labels, average_precision)
}

pub fn auc(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Option<f64> {
    macro_over(scores, labels, roc_auc)
}

pub fn multilabel_accuracy(scores: &[Vec<f64>], labels: &[Vec<bool>], threshold: f64) -> f64 {
    let mut ok = 0;
    let mut total = 0;
    for i in 0..scores.len() {
        for c in 0..scores[i].len() {
            total += 1;
            if (scores[i][c] >= threshold) == labels[i][c] {
                ok += 1;
            }
        }
    }
    ok as f64 / total as f64
}

pub fn single_label_accuracy(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> f64 {
    let ok = (0..scores.len()).filter(|&i| labels[i][argmax(&scores[i])]).count();
    ok as f64 / scores.len() as f64
}

/// Scores drawn from a small grid so ties are common.
pub fn random_scores<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..k).map(|_| rng.random_range(0..8) as f64 / 8.0).collect())
        .collect()
}

pub fn random_class_batch<R: Rng>(rng: &mut R) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = rng.random_range(1..=20);
    let k = rng.random_range(2..=9);
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    (random_scores(rng, n, k), labels)
}

pub fn random_multilabel_batch<R: Rng>(rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let n = rng.random_range(1..=20);
    let k = rng.random_range(1..=9);
    let labels = (0..n)
        .map(|_| (0..k).map(|_| rng.random_bool(0.4)).collect())
        .collect();
    (random_scores(rng, n, k), labels)
}
