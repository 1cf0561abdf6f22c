use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Pairwise ranking over two concatenated inputs.
    Rank,
    Multiclass,
    Multilabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    BinaryCrossEntropyPerClass,
}

impl LossKind {
    pub fn for_task(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Multilabel => LossKind::BinaryCrossEntropyPerClass,
            _ => LossKind::CrossEntropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub conv_kernel: usize,
    pub conv_stride: usize,
    /// Zero padding on each border of both convolutions.
    pub conv_padding: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub attention_heads: usize,
    pub attention_dim: usize,
    pub input_dim: usize,
    pub output_classes: usize,
    pub task_kind: TaskKind,
}

impl HeadConfig {
    /// Default architecture for `input_dim` features and a task.
    pub fn new(input_dim: usize, output_classes: usize, task_kind: TaskKind) -> Self {
        HeadConfig {
            conv_kernel: 7,
            conv_stride: 5,
            conv_padding: 3,
            conv1_channels: 16,
            conv2_channels: 32,
            attention_heads: 2,
            attention_dim: 128,
            input_dim,
            output_classes,
            task_kind,
        }
    }

    /// Number of pooled inputs feeding the final projection.
    pub fn input_groups(&self) -> usize {
        match self.task_kind {
            TaskKind::Rank => 2,
            _ => 1,
        }
    }

    /// Output length of one convolution along an axis of length `n`.
    pub fn conv_out(&self, n: usize) -> Option<usize> {
        let padded = n + 2 * self.conv_padding;
        (padded >= self.conv_kernel).then(|| (padded - self.conv_kernel) / self.conv_stride + 1)
    }

    /// Width after both convolutions.
    pub fn conv_width(&self) -> Option<usize> {
        self.conv_out(self.input_dim).and_then(|w| self.conv_out(w))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::validation(field, msg));
        if self.conv_kernel == 0 || self.conv_stride == 0 {
            return bad("conv_kernel", "kernel and stride must be positive".into());
        }
        if self.conv_padding >= self.conv_kernel {
            return bad("conv_padding", "padding must be smaller than the kernel".into());
        }
        if self.conv1_channels == 0 || self.conv2_channels == 0 {
            return bad("conv_channels", "channel counts must be positive".into());
        }
        if self.attention_heads == 0 || !self.attention_dim.is_multiple_of(self.attention_heads) {
            return bad(
                "attention_dim",
                format!(
                    "attention_dim {} is not divisible by {} heads",
                    self.attention_dim, self.attention_heads
                ),
            );
        }
        if self.input_dim == 0 || self.conv_width().is_none() {
            return bad(
                "input_dim",
                format!("input_dim {} is too small for the convolutions", self.input_dim),
            );
        }
        let classes_ok = match self.task_kind {
            TaskKind::Rank => matches!(self.output_classes, 2 | 4),
            TaskKind::Multilabel => self.output_classes == 7,
            TaskKind::Multiclass => self.output_classes >= 2,
        };
        if !classes_ok {
            return bad(
                "output_classes",
                format!("{} classes do not fit task {:?}", self.output_classes, self.task_kind),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    /// Defaults: AdamW, lr 1e-4, weight decay 1e-4, batch 8, 50 epochs.
    pub fn for_task(kind: TaskKind) -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            batch_size: 8,
            epochs: 50,
            seed: 0,
            loss: LossKind::for_task(kind),
        }
    }

    pub fn validate(&self, kind: TaskKind) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::validation("learning_rate", "must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::validation("weight_decay", "must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs", "must be positive"));
        }
        if self.loss != LossKind::for_task(kind) {
            return Err(Error::validation(
                "loss",
                format!("{:?} does not match task {:?}", self.loss, kind),
            ));
        }
        Ok(())
    }
}
