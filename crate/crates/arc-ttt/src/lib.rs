//! Test-time-training data pipeline for ARC-style grid tasks: dataset
//! generation with geometric augmentations, augmented inference through a
//! pluggable predictor, hierarchical voting, and pass@2 evaluation.
//!
//! Everything downstream of a seed is deterministic: identical inputs and
//! seeds produce byte-identical datasets, candidate dumps, and reports.

pub mod cli;
pub mod codec;
pub mod eval;
pub mod ft_data;
pub mod grid;
pub mod inference;
pub mod predictor;
pub mod seed;
pub mod transform;
pub mod ttt_data;
pub mod voting;

pub use codec::{parse_grid_text, render_grid_text, LossMode, PromptText, TttRecord};
pub use grid::{Color, Example, ExamplePair, Grid, Task, TaskSet};
pub use predictor::{HttpPredictor, MockPredictor, Predictor};
pub use transform::Transform;
