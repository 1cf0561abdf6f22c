use std::fmt::Write as _;

use super::config::TrainConfig;
use super::head::PredictionHead;
use super::train::{train, Example, TaskMetrics};
use crate::error::{Error, Result};

/// Value lists per hyperparameter. Empty lists fall back to the base value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridSpace {
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl GridSpace {
    pub fn is_empty(&self) -> bool {
        self.learning_rate.is_empty()
            && self.weight_decay.is_empty()
            && self.batch_size.is_empty()
            && self.epochs.is_empty()
    }

    /// Cartesian product in lexicographic order (lr, wd, batch, epochs).
    pub fn points(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        fn or<T: Copy>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() {
                vec![d]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for &lr in &or(&self.learning_rate, base.learning_rate) {
            for &wd in &or(&self.weight_decay, base.weight_decay) {
                for &bs in &or(&self.batch_size, base.batch_size) {
                    for &ep in &or(&self.epochs, base.epochs) {
                        out.push(TrainConfig {
                            learning_rate: lr,
                            weight_decay: wd,
                            batch_size: bs,
                            epochs: ep,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub metrics: TaskMetrics,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: TrainConfig,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("learning_rate,weight_decay,batch_size,epochs,best_epoch,score,selected\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{}",
                r.config.learning_rate,
                r.config.weight_decay,
                r.config.batch_size,
                r.config.epochs,
                r.best_epoch,
                r.score,
                u8::from(i == self.best_index)
            );
        }
        out
    }
}

/// Train every grid point from the same initial head and keep the one with
/// the best validation primary metric. Ties go to the lower learning rate,
/// then to the earlier point.
pub fn grid_search(
    head: &PredictionHead,
    space: &GridSpace,
    train_set: &[Example],
    validation: &[Example],
    base: &TrainConfig,
) -> Result<GridResult> {
    if space.is_empty() {
        return Err(Error::validation("grid", "empty search space"));
    }
    if validation.is_empty() {
        return Err(Error::validation("grid", "empty validation split"));
    }
    let kind = head.config().task_kind;
    let mut rows = Vec::new();
    for config in space.points(base) {
        let (_, history) = train(head, train_set, Some(validation), &config)?;
        let best = &history.records[history.best_epoch - 1];
        let score = best.metrics.primary(kind);
        log::info!("grid point {config:?}: score {score:.6}");
        rows.push(GridRow {
            config,
            best_epoch: history.best_epoch,
            metrics: best.metrics.clone(),
            score,
        });
    }
    let mut best_index = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        let b = &rows[best_index];
        if r.score > b.score || (r.score == b.score && r.config.learning_rate < b.config.learning_rate) {
            best_index = i;
        }
    }
    Ok(GridResult {
        best: rows[best_index].config.clone(),
        best_index,
        rows,
    })
}
