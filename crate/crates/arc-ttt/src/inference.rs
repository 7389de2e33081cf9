//! Augmented inference: query the predictor on invertible-transform views
//! of the task under permuted demonstration orders, and map every parsed
//! prediction back through the inverse transform.

use crate::codec::render_prompt;
use crate::grid::{Example, Grid, Task};
use crate::predictor::{Predictor, PredictorError};
use crate::seed;
use crate::transform::{self, Transform, TransformError};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("task {task_id} test {test_index}: {source}")]
    PredictorUnavailable {
        task_id: String,
        test_index: usize,
        #[source]
        source: PredictorError,
    },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("task {0} has no test input {1}")]
    MissingTestInput(String, usize),
}

/// One prediction mapped back into the original frame, with full
/// provenance for replay and voting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub grid: Grid,
    pub transform: Transform,
    pub perm_index: usize,
    /// Raw model text, kept for audit.
    pub raw: String,
}

/// A prediction that could not become a candidate, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedPrediction {
    pub transform: String,
    pub perm_index: usize,
    pub failure: String,
}

#[derive(Debug, Clone)]
pub struct InferenceConfig {
    /// Demonstration permutations per transform (perm 0 is always the
    /// original ordering).
    pub permutations: usize,
    pub transforms: Vec<Transform>,
    pub seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { permutations: 2, transforms: transform::inference_transform_set(), seed: 0 }
    }
}

/// All candidates produced for one test input of one task.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub task_id: String,
    pub test_index: usize,
    pub candidates: Vec<Candidate>,
    pub dropped: Vec<DroppedPrediction>,
}

/// Builds the transformed view of a task: every demonstration grid and the
/// test input mapped through `t`, demos reordered by `perm`. The test
/// output is neither transformed nor used.
pub fn transformed_view(
    task: &Task,
    t: &Transform,
    perm: &[usize],
    test_index: usize,
) -> Result<(Vec<Example>, Grid), InferenceError> {
    if !t.invertible() {
        return Err(TransformError::NonInvertible(t.name()).into());
    }
    let test_input = &task
        .test
        .get(test_index)
        .ok_or_else(|| InferenceError::MissingTestInput(task.id.clone(), test_index))?
        .input;
    let demos = perm
        .iter()
        .map(|&k| {
            transform::apply_to_example(t, &task.train[k], transform::TaskApplicationMode::Both)
                .map_err(TransformError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let view_input = transform::apply_to_grid(t, test_input).map_err(TransformError::from)?;
    Ok((demos, view_input))
}

fn demo_permutation(task: &Task, t: &Transform, perm_index: usize, seed_root: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..task.train.len()).collect();
    if perm_index > 0 {
        // Each transform permutes independently.
        let mut rng = seed::rng_for(
            seed_root,
            &[&task.id, "infer-perm", &t.name(), &perm_index.to_string()],
        );
        order.shuffle(&mut rng);
    }
    order
}

/// Runs the predictor on every (transform, permutation) view of one test
/// input and inverse-maps each parsed grid. Malformed predictions become
/// dropped entries; a dead predictor aborts the whole task.
pub fn generate_candidates(
    task: &Task,
    test_index: usize,
    predictor: &dyn Predictor,
    cfg: &InferenceConfig,
) -> Result<CandidateSet, InferenceError> {
    let mut candidates = Vec::new();
    let mut dropped = Vec::new();
    for t in &cfg.transforms {
        let inverse = transform::invert(t)?;
        for perm_index in 0..cfg.permutations {
            let perm = demo_permutation(task, t, perm_index, cfg.seed);
            let (demos, view_input) = transformed_view(task, t, &perm, test_index)?;
            let prompt = render_prompt(&demos, &view_input);
            let prediction = predictor.predict(&prompt).map_err(|e| InferenceError::PredictorUnavailable {
                task_id: task.id.clone(),
                test_index,
                source: e,
            })?;
            match prediction.grid {
                Some(g) => match transform::apply_to_grid(&inverse, &g) {
                    Ok(mapped) => candidates.push(Candidate {
                        grid: mapped,
                        transform: t.clone(),
                        perm_index,
                        raw: prediction.raw,
                    }),
                    Err(e) => dropped.push(DroppedPrediction {
                        transform: t.name(),
                        perm_index,
                        failure: format!("inverse mapping failed: {e}"),
                    }),
                },
                None => dropped.push(DroppedPrediction {
                    transform: t.name(),
                    perm_index,
                    failure: prediction.failure.unwrap_or_else(|| "unparseable output".into()),
                }),
            }
        }
    }
    Ok(CandidateSet { task_id: task.id.clone(), test_index, candidates, dropped })
}

/// Wire form of one candidate (or dropped prediction) for offline voting
/// and audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateLine {
    pub task_id: String,
    pub test_index: usize,
    pub transform: String,
    pub perm: usize,
    pub grid: Option<Vec<Vec<u8>>>,
    pub failure: Option<String>,
}

impl CandidateSet {
    pub fn to_lines(&self) -> Vec<CandidateLine> {
        let mut lines: Vec<CandidateLine> = self
            .candidates
            .iter()
            .map(|c| CandidateLine {
                task_id: self.task_id.clone(),
                test_index: self.test_index,
                transform: c.transform.name(),
                perm: c.perm_index,
                grid: Some(c.grid.to_matrix()),
                failure: None,
            })
            .collect();
        lines.extend(self.dropped.iter().map(|d| CandidateLine {
            task_id: self.task_id.clone(),
            test_index: self.test_index,
            transform: d.transform.clone(),
            perm: d.perm_index,
            grid: None,
            failure: Some(d.failure.clone()),
        }));
        lines
    }
}
