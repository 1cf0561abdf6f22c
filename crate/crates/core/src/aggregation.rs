//! Segment-level majority voting, tournament win counts, hit-rate curves and
//! the competition case study.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::embeddings::EmbeddingTensor;
use crate::error::{Error, Result};
use crate::manifest::IcpcCandidate;
use crate::metrics::{self, ClassBatch};
use crate::model::{train_final, Example, PredictionHead, TrainConfig, TrainHistory};
use crate::pairing::{icpc_scores, make_icpc_pairs, RankMode, RankPair};
use crate::rng;
use crate::MAX_SEGMENTS;

/// The label with the most votes. Ties go to the higher summed confidence,
/// then to the smallest label.
pub fn majority_vote(labels: &[usize], confidences: &[f64]) -> Result<usize> {
    if labels.is_empty() {
        return Err(Error::validation("votes", "empty vote list"));
    }
    if labels.len() != confidences.len() {
        return Err(Error::validation(
            "confidences",
            format!("{} votes but {} confidences", labels.len(), confidences.len()),
        ));
    }
    let mut tally: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (&l, &c) in labels.iter().zip(confidences) {
        let e = tally.entry(l).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += c;
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (&label, &(count, conf)) in &tally {
        let better = match best {
            None => true,
            Some((_, bc, bconf)) => count > bc || (count == bc && conf > bconf),
        };
        if better {
            best = Some((label, count, conf));
        }
    }
    Ok(best.expect("non-empty").0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TournamentResult {
    pub win_counts: BTreeMap<String, usize>,
    /// Candidates by win count, descending.
    pub ordering: Vec<String>,
    /// Fraction of unordered pairs whose two orientations name the same
    /// winner.
    pub inverse_consistency: f64,
    pub n_ordered_pairs: usize,
}

impl TournamentResult {
    pub fn rank_of(&self, candidate: &str) -> Option<usize> {
        self.ordering.iter().position(|c| c == candidate).map(|p| p + 1)
    }
}

/// Win counts from a winner per ordered pair. Every ordered pair of distinct
/// candidates must be present.
///
/// Equal win counts are ordered by consistency-weighted wins (a win counts 1
/// when the reversed pair agrees, 0.5 otherwise), then by candidate id.
pub fn tournament_win_counts(
    candidates: &[String],
    predictions: &BTreeMap<(String, String), String>,
) -> Result<TournamentResult> {
    let unique: BTreeSet<&String> = candidates.iter().collect();
    if unique.len() != candidates.len() {
        return Err(Error::validation("candidates", "duplicate candidate ids"));
    }
    if candidates.len() < 2 {
        return Err(Error::validation("candidates", "need at least 2 candidates"));
    }
    let mut wins: BTreeMap<String, usize> = candidates.iter().map(|c| (c.clone(), 0)).collect();
    let mut weighted: BTreeMap<String, f64> = candidates.iter().map(|c| (c.clone(), 0.0)).collect();
    let mut consistent = 0usize;
    let mut unordered = 0usize;
    let get = |a: &String, b: &String| -> Result<&String> {
        let w = predictions.get(&(a.clone(), b.clone())).ok_or_else(|| {
            Error::validation("predictions", format!("missing prediction for pair ({a}, {b})"))
        })?;
        if w != a && w != b {
            return Err(Error::validation(
                "predictions",
                format!("winner `{w}` is not a member of pair ({a}, {b})"),
            ));
        }
        Ok(w)
    };
    for (i, a) in candidates.iter().enumerate() {
        for b in &candidates[i + 1..] {
            let w_ab = get(a, b)?;
            let w_ba = get(b, a)?;
            unordered += 1;
            let agree = w_ab == w_ba;
            if agree {
                consistent += 1;
            }
            let weight = if agree { 1.0 } else { 0.5 };
            for w in [w_ab, w_ba] {
                *wins.get_mut(w).unwrap() += 1;
                *weighted.get_mut(w).unwrap() += weight;
            }
        }
    }
    let mut ordering = candidates.to_vec();
    ordering.sort_by(|x, y| {
        wins[y]
            .cmp(&wins[x])
            .then(weighted[y].total_cmp(&weighted[x]))
            .then(x.cmp(y))
    });
    Ok(TournamentResult {
        win_counts: wins,
        ordering,
        inverse_consistency: consistent as f64 / unordered as f64,
        n_ordered_pairs: 2 * unordered,
    })
}

/// Run every ordered pair through `winner_is_first` and count wins.
pub fn run_tournament<F>(candidates: &[String], mut winner_is_first: F) -> Result<TournamentResult>
where
    F: FnMut(&str, &str) -> Result<bool>,
{
    let mut predictions = BTreeMap::new();
    for a in candidates {
        for b in candidates {
            if a != b {
                let w = if winner_is_first(a, b)? { a } else { b };
                predictions.insert((a.clone(), b.clone()), w.clone());
            }
        }
    }
    tournament_win_counts(candidates, &predictions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRow {
    pub candidate_id: String,
    pub win_count: usize,
    pub rank: usize,
    pub tier: i32,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitRateCurve {
    /// `(k, hit rate among the top k)` for k in 1..=n.
    pub points: Vec<(usize, f64)>,
    /// Candidates in ranked order.
    pub candidates: Vec<CandidateRow>,
}

impl HitRateCurve {
    pub fn hit_rate(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.points.get(i)).map(|p| p.1)
    }

    pub fn candidates_csv(&self) -> String {
        let mut out = String::from("candidate_id,win_count,rank,tier,passed\n");
        for c in &self.candidates {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.candidate_id,
                c.win_count,
                c.rank,
                c.tier,
                u8::from(c.passed)
            );
        }
        out
    }
}

pub fn hitrate_curve(
    result: &TournamentResult,
    passed: &BTreeMap<String, bool>,
    tiers: &BTreeMap<String, i32>,
) -> Result<HitRateCurve> {
    let mut points = Vec::with_capacity(result.ordering.len());
    let mut candidates = Vec::with_capacity(result.ordering.len());
    let mut hits = 0usize;
    for (i, c) in result.ordering.iter().enumerate() {
        let p = *passed.get(c).ok_or_else(|| {
            Error::validation("ground_truth", format!("no pass outcome for candidate `{c}`"))
        })?;
        hits += usize::from(p);
        let k = i + 1;
        points.push((k, hits as f64 / k as f64));
        candidates.push(CandidateRow {
            candidate_id: c.clone(),
            win_count: result.win_counts[c],
            rank: k,
            tier: tiers.get(c).copied().unwrap_or(0),
            passed: p,
        });
    }
    Ok(HitRateCurve { points, candidates })
}

/// Probability that the first member of a pair is better, from rank logits.
pub fn first_wins_probability(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let total: f64 = e.iter().sum();
    let upper = logits.len() / 2;
    e[upper..].iter().sum::<f64>() / total
}

/// Whether a rank label says the first member is better.
pub fn label_first_wins(label: usize, mode: RankMode) -> bool {
    label >= mode.n_classes() / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyOptions {
    pub fitting: bool,
    pub fit_epochs: usize,
    pub seed: u64,
    /// Optimizer settings for the fitting stage; `epochs` is replaced by
    /// `fit_epochs`.
    pub fit_config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDecision {
    pub first: String,
    pub second: String,
    pub chunks_compared: usize,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct CaseStudyReport {
    pub mode: RankMode,
    pub fitting: bool,
    pub fit_candidates: Vec<String>,
    pub test_candidates: Vec<String>,
    pub fit_history: Option<TrainHistory>,
    pub eval_pairs: usize,
    pub ties_skipped: usize,
    pub gap_skipped: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub decisions: Vec<PairDecision>,
    pub tournament: TournamentResult,
    pub hitrate: HitRateCurve,
    pub top_candidate: String,
    /// Candidates whose chunk list was cut to the cap.
    pub truncated: Vec<String>,
}

impl CaseStudyReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode={}", self.mode);
        let _ = writeln!(out, "fitting={}", self.fitting);
        let _ = writeln!(out, "fit_candidates={}", self.fit_candidates.len());
        let _ = writeln!(out, "test_candidates={}", self.test_candidates.len());
        if let Some(h) = &self.fit_history {
            let _ = writeln!(out, "fit_epochs={}", h.records.len());
        }
        let _ = writeln!(out, "eval_pairs={}", self.eval_pairs);
        let _ = writeln!(out, "ties_skipped={}", self.ties_skipped);
        let _ = writeln!(out, "gap_skipped={}", self.gap_skipped);
        let _ = writeln!(out, "accuracy={:.6}", self.accuracy);
        let _ = writeln!(out, "macro_f1={:.6}", self.macro_f1);
        let _ = writeln!(out, "inverse_consistency={:.6}", self.tournament.inverse_consistency);
        let _ = writeln!(out, "top_candidate={}", self.top_candidate);
        let _ = writeln!(out, "truncated={}", self.truncated.join(" "));
        out
    }
}

type Chunks = BTreeMap<String, Vec<Arc<EmbeddingTensor>>>;

fn decide_pair(head: &PredictionHead, mode: RankMode, a: &[Arc<EmbeddingTensor>], b: &[Arc<EmbeddingTensor>]) -> Result<(usize, usize)> {
    let n = a.len().min(b.len());
    if n == 0 {
        return Err(Error::validation("chunks", "candidate without chunk embeddings"));
    }
    let mut labels = Vec::with_capacity(n);
    let mut conf = Vec::with_capacity(n);
    for i in 0..n {
        let logits = head.forward_rank(&a[i], &b[i])?;
        let label = metrics::argmax(&logits);
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|&z| (z - m).exp()).sum();
        labels.push(label);
        conf.push((logits[label] - m).exp() / total);
    }
    debug_assert_eq!(head.config().output_classes, mode.n_classes());
    Ok((majority_vote(&labels, &conf)?, n))
}

/// Evaluate a trained rank head on competition candidates.
///
/// `chunks` holds per-candidate chunk embeddings in playing order; chunk `i`
/// of one candidate is compared with chunk `i` of the other, up to the
/// shorter list, and the chunk decisions are majority-voted. Lists longer
/// than 30 chunks are cut.
pub fn run_case_study(
    head: &PredictionHead,
    candidates: &[IcpcCandidate],
    chunks: &Chunks,
    options: &CaseStudyOptions,
) -> Result<CaseStudyReport> {
    let mode = match head.config().output_classes {
        2 => RankMode::TwoWay,
        4 => RankMode::FourWay,
        c => return Err(Error::validation("head", format!("{c} outputs is not a rank head"))),
    };
    let mut truncated = Vec::new();
    let mut capped: Chunks = BTreeMap::new();
    for c in candidates {
        let list = chunks.get(&c.candidate_id).filter(|l| !l.is_empty()).ok_or_else(|| {
            Error::validation("embeddings", format!("missing embeddings for candidate `{}`", c.candidate_id))
        })?;
        let mut list = list.clone();
        if list.len() > MAX_SEGMENTS {
            log::warn!(
                "candidate {}: {} chunks cut to {}",
                c.candidate_id,
                list.len(),
                MAX_SEGMENTS
            );
            truncated.push(c.candidate_id.clone());
            list.truncate(MAX_SEGMENTS);
        }
        capped.insert(c.candidate_id.clone(), list);
    }

    let scores = icpc_scores(candidates);
    let labeled = make_icpc_pairs(candidates, &scores, mode)?;
    let ids: Vec<String> = candidates.iter().map(|c| c.candidate_id.clone()).collect();

    let mut model = head.clone();
    let mut fit_history = None;
    let (fit_ids, test_ids): (Vec<String>, Vec<String>) = if options.fitting {
        let mut shuffled = ids.clone();
        shuffled.shuffle(&mut rng::substream(options.seed, rng::SPLIT));
        let half = shuffled.len() / 2;
        let fit: BTreeSet<&String> = shuffled[..half].iter().collect();
        let fit_ids: Vec<String> = ids.iter().filter(|c| fit.contains(c)).cloned().collect();
        let test_ids: Vec<String> = ids.iter().filter(|c| !fit.contains(c)).cloned().collect();

        let mut examples = Vec::new();
        for p in labeled.pairs.iter().filter(|p| fit.contains(&p.first) && fit.contains(&p.second)) {
            let (a, b) = (&capped[&p.first], &capped[&p.second]);
            for i in 0..a.len().min(b.len()) {
                examples.push(Example::pair(a[i].clone(), b[i].clone(), p.label.unwrap() as usize));
            }
        }
        if examples.is_empty() {
            return Err(Error::Training("fitting half has no labeled pairs".into()));
        }
        let cfg = TrainConfig {
            epochs: options.fit_epochs,
            seed: options.seed,
            ..options.fit_config.clone()
        };
        // adaptation keeps the final weights, not the best epoch
        let (fitted, history) = train_final(&model, &examples, &cfg)?;
        model = fitted;
        fit_history = Some(history);
        (fit_ids, test_ids)
    } else {
        (Vec::new(), ids.clone())
    };

    let test: BTreeSet<&String> = test_ids.iter().collect();
    let eval: Vec<&RankPair> = labeled
        .pairs
        .iter()
        .filter(|p| test.contains(&p.first) && test.contains(&p.second))
        .collect();
    let mut decisions = Vec::new();
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for p in &eval {
        let (label, n) = decide_pair(&model, mode, &capped[&p.first], &capped[&p.second])?;
        predicted.push(label);
        truth.push(p.label.unwrap() as usize);
        decisions.push(PairDecision {
            first: p.first.clone(),
            second: p.second.clone(),
            chunks_compared: n,
            label,
        });
    }
    let (accuracy, macro_f1) = if eval.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let batch = ClassBatch::from_predictions(&predicted, &truth)?;
        (metrics::accuracy(&batch)?, metrics::macro_f1(&batch)?)
    };

    let tournament = run_tournament(&ids, |a, b| {
        let (label, _) = decide_pair(&model, mode, &capped[a], &capped[b])?;
        Ok(label_first_wins(label, mode))
    })?;
    let passed = candidates
        .iter()
        .map(|c| (c.candidate_id.clone(), c.rounds_reached > 0))
        .collect();
    let tiers = candidates
        .iter()
        .map(|c| (c.candidate_id.clone(), c.score))
        .collect();
    let hitrate = hitrate_curve(&tournament, &passed, &tiers)?;
    Ok(CaseStudyReport {
        mode,
        fitting: options.fitting,
        fit_candidates: fit_ids,
        test_candidates: test_ids,
        fit_history,
        eval_pairs: eval.len(),
        ties_skipped: labeled.ties_skipped,
        gap_skipped: labeled.gap_skipped,
        accuracy,
        macro_f1,
        decisions,
        top_candidate: tournament.ordering[0].clone(),
        tournament,
        hitrate,
        truncated,
    })
}
