//! Prediction head over stacked segment embeddings, its training loop and
//! hyper-parameter grid search.
//!
//! Architecture, per valid segment of each input:
//!
//! ```text
//! (frames, dim) -> conv 7x7/5 -> ReLU -> conv 7x7/5 -> ReLU      (16, then 32 channels)
//!               -> per output frame, flatten (width x channels) -> linear to d=128 -> layer norm
//! tokens of all valid segments -> 2-head self-attention (residual)
//!               -> mean over each input's tokens -> concat -> linear to classes
//! ```
//!
//! Ranking concatenates both recordings along the segment axis; the two
//! pooled halves keep their order in the final projection. Padding segments
//! never enter the computation, so logits do not depend on their content.

mod checkpoint;
mod config;
mod grid;
mod head;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{HeadConfig, LossKind, TaskKind, TrainConfig};
pub use grid::{grid_search, GridResult, GridRow, GridSpace};
pub use head::{build_head, HeadInput, PredictionHead, Target};
pub use train::{
    evaluate, predict, task_metrics, train, train_final, EpochRecord, Example, Prediction, TaskMetrics, TrainHistory,
};
