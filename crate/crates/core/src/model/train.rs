use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{TaskKind, TrainConfig};
use super::head::{HeadInput, PredictionHead, Target};
use crate::embeddings::EmbeddingTensor;
use crate::error::{Error, Result};
use crate::metrics::{self, ClassBatch, MultiLabelBatch};
use crate::rng;

/// One labeled example: a recording, or an ordered pair for ranking.
#[derive(Debug, Clone)]
pub struct Example {
    pub first: Arc<EmbeddingTensor>,
    pub second: Option<Arc<EmbeddingTensor>>,
    pub target: Target,
}

impl Example {
    pub fn single(emb: Arc<EmbeddingTensor>, target: Target) -> Self {
        Example {
            first: emb,
            second: None,
            target,
        }
    }

    pub fn pair(first: Arc<EmbeddingTensor>, second: Arc<EmbeddingTensor>, label: usize) -> Self {
        Example {
            first,
            second: Some(second),
            target: Target::Class(label),
        }
    }

    pub fn input(&self) -> Result<HeadInput<'_>> {
        match &self.second {
            Some(second) => HeadInput::pair(&self.first, second),
            None => Ok(HeadInput::single(&self.first)),
        }
    }

    fn describe(&self) -> String {
        match &self.second {
            Some(s) => format!("({}, {})", self.first.recording_id, s.recording_id),
            None => self.first.recording_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
}

/// Task metrics of one evaluation pass. Keys are stable metric names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub values: BTreeMap<String, f64>,
    /// Multi-label only: AP per technique class, `None` without positives.
    pub per_class_ap: Vec<Option<f64>>,
}

impl TaskMetrics {
    pub fn primary_name(kind: TaskKind) -> &'static str {
        match kind {
            TaskKind::Multilabel => "map",
            _ => "accuracy",
        }
    }

    pub fn primary(&self, kind: TaskKind) -> f64 {
        self.values
            .get(Self::primary_name(kind))
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Metrics appropriate to the task from logits and targets.
pub fn task_metrics(kind: TaskKind, logits: &[Vec<f64>], targets: &[&Target]) -> Result<TaskMetrics> {
    let mut out = TaskMetrics::default();
    match kind {
        TaskKind::Rank | TaskKind::Multiclass => {
            let labels = targets
                .iter()
                .map(|t| match t {
                    Target::Class(c) => Ok(*c),
                    Target::Labels(_) => Err(Error::Metric("multi-label target in class task".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = ClassBatch::new(logits.to_vec(), labels)?;
            out.values.insert("accuracy".into(), metrics::accuracy(&batch)?);
            out.values.insert("macro_f1".into(), metrics::macro_f1(&batch)?);
            if kind == TaskKind::Multiclass {
                out.values.insert("acc_0".into(), metrics::acc_within_n(&batch, 0)?);
                out.values.insert("acc_1".into(), metrics::acc_within_n(&batch, 1)?);
            }
        }
        TaskKind::Multilabel => {
            let labels = targets
                .iter()
                .map(|t| match t {
                    Target::Labels(l) => Ok(l.clone()),
                    Target::Class(_) => Err(Error::Metric("class target in multi-label task".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            let scores = logits
                .iter()
                .map(|l| l.iter().map(|&z| sigmoid(z)).collect())
                .collect();
            let batch = MultiLabelBatch::new(scores, labels)?;
            out.per_class_ap = metrics::average_precision_per_class(&batch)?;
            if let Ok(map) = metrics::mean_average_precision(&batch) {
                out.values.insert("map".into(), map);
            }
            if let Ok(auc) = metrics::auc(&batch) {
                out.values.insert("auc".into(), auc);
            }
            out.values
                .insert("multilabel_accuracy".into(), metrics::multilabel_accuracy(&batch, 0.5)?);
            out.values
                .insert("single_label_accuracy".into(), metrics::single_label_accuracy(&batch)?);
            if let Ok(f1) = metrics::single_label_f1(&batch) {
                out.values.insert("single_label_f1".into(), f1);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub metrics: TaskMetrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Where the epoch metrics come from: "validation" or "train".
    pub metric_source: String,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Per-class AP series, one vector per class over epochs.
    pub fn ap_series(&self) -> Vec<Vec<Option<f64>>> {
        let n = self.records.first().map_or(0, |r| r.metrics.per_class_ap.len());
        (0..n)
            .map(|c| self.records.iter().map(|r| r.metrics.per_class_ap[c]).collect())
            .collect()
    }

    /// One `key=value` line per epoch.
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = write!(out, "epoch={} loss={:.6}", r.epoch, r.loss);
            for (k, v) in &r.metrics.values {
                let _ = write!(out, " {k}={v:.6}");
            }
            for (c, ap) in r.metrics.per_class_ap.iter().enumerate() {
                match ap {
                    Some(v) => {
                        let _ = write!(out, " ap{c}={v:.6}");
                    }
                    None => {
                        let _ = write!(out, " ap{c}=na");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn check_targets(kind: TaskKind, classes: usize, examples: &[Example]) -> Result<()> {
    for ex in examples {
        let ok = match (&ex.target, kind) {
            (Target::Class(c), TaskKind::Rank | TaskKind::Multiclass) => *c < classes,
            (Target::Labels(l), TaskKind::Multilabel) => l.len() == classes,
            _ => false,
        };
        let paired = ex.second.is_some();
        if !ok || paired != (kind == TaskKind::Rank) {
            return Err(Error::Training(format!(
                "example {} has target {:?} unsuitable for {kind:?} with {classes} classes",
                ex.describe(),
                ex.target
            )));
        }
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn map_items<T: Send, F>(items: &[usize], f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(|&i| f(i)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_items<T: Send, F>(items: &[usize], f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    items.iter().map(|&i| f(i)).collect()
}

pub fn predict(head: &PredictionHead, examples: &[Example]) -> Result<Vec<Prediction>> {
    let idx: Vec<usize> = (0..examples.len()).collect();
    map_items(&idx, |i| {
        let input = examples[i].input()?;
        Ok(Prediction {
            logits: head.forward(&input)?,
        })
    })
    .into_iter()
    .collect()
}

pub fn evaluate(head: &PredictionHead, examples: &[Example]) -> Result<TaskMetrics> {
    if examples.is_empty() {
        return Err(Error::Metric("empty evaluation set".into()));
    }
    let preds = predict(head, examples)?;
    let logits: Vec<Vec<f64>> = preds.into_iter().map(|p| p.logits).collect();
    let targets: Vec<&Target> = examples.iter().map(|e| &e.target).collect();
    task_metrics(head.config().task_kind, &logits, &targets)
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamW {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let update = (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
            let p = params[i] - lr * (update + weight_decay * params[i]);
            // keep weights f32-representable so checkpoints are exact
            params[i] = f64::from(p as f32);
        }
    }
}

/// Train with AdamW on shuffled minibatches. Returns the head at its best
/// epoch (validation metric when `validation` is given, otherwise the
/// metric over the epoch's training predictions) and the full history.
pub fn train(
    head: &PredictionHead,
    examples: &[Example],
    validation: Option<&[Example]>,
    config: &TrainConfig,
) -> Result<(PredictionHead, TrainHistory)> {
    run(head, examples, validation, config, true)
}

/// Like [`train`] without validation, returning the weights after the last
/// epoch.
pub fn train_final(
    head: &PredictionHead,
    examples: &[Example],
    config: &TrainConfig,
) -> Result<(PredictionHead, TrainHistory)> {
    run(head, examples, None, config, false)
}

fn run(
    head: &PredictionHead,
    examples: &[Example],
    validation: Option<&[Example]>,
    config: &TrainConfig,
    keep_best: bool,
) -> Result<(PredictionHead, TrainHistory)> {
    let kind = head.config().task_kind;
    config.validate(kind)?;
    if examples.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let classes = head.config().output_classes;
    check_targets(kind, classes, examples)?;
    if let Some(v) = validation {
        check_targets(kind, classes, v)?;
    }

    let mut current = head.clone();
    let mut best = head.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut optimizer = AdamW::new(head.n_params());
    let mut rng = rng::substream(config.seed, rng::BATCHING);
    let mut history = TrainHistory {
        metric_source: if validation.is_some() { "validation" } else { "train" }.into(),
        ..Default::default()
    };

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen_logits: Vec<(usize, Vec<f64>)> = Vec::with_capacity(examples.len());

        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let results = map_items(batch, |i| {
                let input = examples[i].input()?;
                current.loss_and_grad(&input, &examples[i].target)
            });
            let mut grad = vec![0.0; current.n_params()];
            for (&i, result) in batch.iter().zip(results) {
                let (loss, g, logits) = result.map_err(|e| {
                    Error::Training(format!(
                        "epoch {epoch}, batch {b}, example {}: {e}",
                        examples[i].describe()
                    ))
                })?;
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, batch {b}, example {}",
                        examples[i].describe()
                    )));
                }
                epoch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v;
                }
                seen_logits.push((i, logits));
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            optimizer.update(current.params_mut(), &grad, config.learning_rate, config.weight_decay);
        }

        let metrics = match validation {
            Some(v) if !v.is_empty() => evaluate(&current, v)?,
            _ => {
                seen_logits.sort_by_key(|(i, _)| *i);
                let logits: Vec<Vec<f64>> = seen_logits.into_iter().map(|(_, l)| l).collect();
                let targets: Vec<&Target> = examples.iter().map(|e| &e.target).collect();
                task_metrics(kind, &logits, &targets)?
            }
        };
        let loss = epoch_loss / examples.len() as f64;
        log::info!("epoch {epoch}: loss {loss:.6} {:?}", metrics.values);
        let score = metrics.primary(kind);
        if !keep_best || score > best_score {
            best_score = score;
            best = current.clone();
            history.best_epoch = epoch;
        }
        history.records.push(EpochRecord {
            epoch,
            loss,
            metrics,
        });
    }
    Ok((best, history))
}
