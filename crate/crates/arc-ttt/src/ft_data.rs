//! Fine-tuning dataset synthesis from pre-generated example pools, the
//! 30% three-mode geometric augmentation pass, and the few-shot prompt
//! builders for LM-based task-generator synthesis.
//!
//! Generator code returned by a model is opaque data; nothing in this
//! module ever executes it.

use crate::codec::{encode_ttt_record, render_grid_text, LossMode, Provenance, TttRecord};
use crate::grid::{Example, GridError, Task};
use crate::seed;
use crate::transform::{self, TaskApplicationMode};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FtError {
    #[error("pool {0} has {1} examples; need at least 3 (2 demos + 1 probe)")]
    PoolExhausted(String, usize),
    #[error("prompt requires at least one few-shot item")]
    Prompt,
    #[error("no script block found in generator response")]
    MalformedGeneration,
    #[error("pool line {line}: {msg}")]
    Ingest { line: usize, msg: String },
}

/// A bank of input-output pairs sharing one underlying rule, produced by
/// an external example generator (e.g. a ReARC script).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExamplePool {
    pub pool_id: String,
    pub examples: Vec<Example>,
}

impl ExamplePool {
    pub fn new(pool_id: impl Into<String>, examples: Vec<Example>) -> Result<Self, FtError> {
        let pool_id = pool_id.into();
        if examples.len() < 3 {
            return Err(FtError::PoolExhausted(pool_id, examples.len()));
        }
        Ok(ExamplePool { pool_id, examples })
    }
}

#[derive(Deserialize)]
struct PoolLine {
    pool_id: String,
    input: Vec<Vec<u8>>,
    output: Vec<Vec<u8>>,
}

/// Ingests pools from JSONL of `{"pool_id", "input", "output"}` lines,
/// grouped by id in first-seen order.
pub fn read_pools(bytes: &[u8]) -> Result<Vec<ExamplePool>, FtError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| FtError::Ingest { line: 0, msg: format!("not UTF-8: {e}") })?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: std::collections::HashMap<String, Vec<Example>> = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PoolLine = serde_json::from_str(line)
            .map_err(|e| FtError::Ingest { line: i + 1, msg: e.to_string() })?;
        let mk = |m: &[Vec<u8>]| {
            crate::grid::Grid::new(m).map_err(|e| FtError::Ingest { line: i + 1, msg: e.to_string() })
        };
        let example = Example { input: mk(&parsed.input)?, output: mk(&parsed.output)? };
        if !by_id.contains_key(&parsed.pool_id) {
            order.push(parsed.pool_id.clone());
        }
        by_id.entry(parsed.pool_id).or_default().push(example);
    }
    order
        .into_iter()
        .map(|id| {
            let examples = by_id.remove(&id).expect("id recorded on first sight");
            ExamplePool::new(id, examples)
        })
        .collect()
}

/// Draws one task from a pool: K ~ U[2,7] (bounded by pool size) demos
/// plus one probe, all without replacement.
pub fn sample_ft_task(pool: &ExamplePool, seed_root: u64, index: usize) -> Result<Task, FtError> {
    if pool.examples.len() < 3 {
        return Err(FtError::PoolExhausted(pool.pool_id.clone(), pool.examples.len()));
    }
    let mut rng = seed::rng_for(seed_root, &[&pool.pool_id, "ft-sample", &index.to_string()]);
    let k_max = 7.min(pool.examples.len() - 1);
    let k = rng.gen_range(2..=k_max);
    let mut picks: Vec<usize> = (0..pool.examples.len()).collect();
    picks.shuffle(&mut rng);
    picks.truncate(k + 1);
    let demos: Vec<Example> = picks[..k].iter().map(|&i| pool.examples[i].clone()).collect();
    let probe = pool.examples[picks[k]].clone();
    let task = Task::new(
        format!("{}-{}", pool.pool_id, index),
        demos,
        vec![crate::grid::ExamplePair { input: probe.input, output: Some(probe.output) }],
    )
    .expect("k >= 2 demos and one probe");
    Ok(task)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub attempted: usize,
    pub applied: usize,
    /// Augmentations skipped because the result would exceed the size cap.
    pub skipped_oversize: usize,
}

/// With probability `p`, applies one transform from the fine-tuning
/// augmentation set under a uniformly chosen application mode (both sides,
/// input-only, or output-only). A size-cap violation skips the
/// augmentation and returns the task unchanged.
pub fn maybe_augment(task: &Task, p: f64, seed_root: u64, stats: &mut AugmentStats) -> Task {
    stats.attempted += 1;
    let mut rng = seed::rng_for(seed_root, &[&task.id, "ft-augment"]);
    if rng.gen::<f64>() >= p {
        return task.clone();
    }
    let set = transform::ft_augmentation_set(seed::derive_seed(seed_root, &[&task.id, "ft-augment-set"]));
    let t = set.choose(&mut rng).expect("augmentation set is never empty").clone();
    let mode = *[TaskApplicationMode::Both, TaskApplicationMode::InputOnly, TaskApplicationMode::OutputOnly]
        .choose(&mut rng)
        .expect("three modes");
    match transform::apply_to_task(&t, task, mode) {
        Ok(augmented) => {
            stats.applied += 1;
            augmented
        }
        Err(GridError::Size { .. }) => {
            stats.skipped_oversize += 1;
            task.clone()
        }
        // Augmentations preserve color validity and rectangularity.
        Err(other) => unreachable!("augmentation produced invalid grid: {other}"),
    }
}

#[derive(Debug, Clone)]
pub struct FtConfig {
    pub records: usize,
    /// Per-task augmentation probability.
    pub augment_probability: f64,
    pub seed: u64,
}

impl Default for FtConfig {
    fn default() -> Self {
        FtConfig { records: 1000, augment_probability: 0.3, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct FtDataset {
    pub records: Vec<TttRecord>,
    pub stats: AugmentStats,
}

/// Builds N fine-tuning records. Pools are visited round-robin with a
/// seeded shuffle per pass, each sampled task passed through
/// `maybe_augment` and encoded with demonstration-inclusive loss.
pub fn build_ft_dataset(pools: &[ExamplePool], cfg: &FtConfig) -> Result<FtDataset, FtError> {
    if pools.is_empty() {
        return Err(FtError::Prompt);
    }
    let mut records = Vec::with_capacity(cfg.records);
    let mut stats = AugmentStats::default();
    let mut pass = 0usize;
    'outer: loop {
        let mut order: Vec<usize> = (0..pools.len()).collect();
        order.shuffle(&mut seed::rng_for(cfg.seed, &["ft-pass", &pass.to_string()]));
        for pool_idx in order {
            if records.len() >= cfg.records {
                break 'outer;
            }
            let task = sample_ft_task(&pools[pool_idx], cfg.seed, records.len())?;
            let task = maybe_augment(&task, cfg.augment_probability, cfg.seed, &mut stats);
            let probe = Example {
                input: task.test[0].input.clone(),
                output: task.test[0].output.clone().expect("ft probe always has an output"),
            };
            records.push(encode_ttt_record(
                &task.train,
                &probe,
                LossMode::Demos,
                &task.id,
                Provenance { loo_index: 0, transform: "ft".into(), perm_index: 0 },
            ));
        }
        pass += 1;
    }
    Ok(FtDataset { records, stats })
}

/// Few-shot prompting strategy for generator synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    /// Script blocks only, descriptions omitted.
    GeneratorsOnly,
    /// Description and script generated together.
    Joint,
    /// Description first, then a generator conditioned on it.
    TwoStage,
}

/// Hierarchical task description: category, one-line summary, full text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescription {
    pub category: String,
    pub summary: String,
    pub description: String,
}

impl TaskDescription {
    fn render(&self) -> String {
        format!(
            "Category: {}\nSummary: {}\nDescription: {}",
            self.category, self.summary, self.description
        )
    }
}

/// One few-shot item for generator prompts: a description of the rule and
/// the generator script implementing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSeed {
    pub description: String,
    pub code: String,
}

pub const DEFAULT_FEW_SHOT: usize = 4;
const SEPARATOR: &str = "----------------";
const GENERATOR_HEADER: &str = "You are a problem generator on 2D grids of colors. \
Here are some examples of such transformations, please follow the format:";
const GENERATOR_FOOTER: &str = "Please generate more and make sure they are different:";
const DESCRIPTION_HEADER: &str = "You are an intelligent agent that can induce task \
descriptions from examples. For Category, please *do not* use generic terms like \
Transformation, Pattern Recognition.";

/// Builds the generator-synthesis prompt. Generators-only mode omits the
/// `Example:` lines; joint mode includes them. For two-stage synthesis,
/// pass the stage-1 description as `new_description` to append it after
/// the closing line, conditioning the generator on it.
pub fn build_generator_prompt(
    seeds: &[GeneratorSeed],
    mode: GenerationMode,
    new_description: Option<&str>,
) -> Result<String, FtError> {
    if seeds.is_empty() {
        return Err(FtError::Prompt);
    }
    let mut out = String::new();
    out.push_str(GENERATOR_HEADER);
    out.push('\n');
    for seed in seeds {
        out.push_str(SEPARATOR);
        out.push('\n');
        if mode != GenerationMode::GeneratorsOnly {
            out.push_str(&format!("Example: {}\n", seed.description));
        }
        out.push_str(&format!("Script: {}\n", seed.code));
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    out.push('\n');
    out.push_str(GENERATOR_FOOTER);
    out.push('\n');
    if let Some(desc) = new_description {
        out.push_str(&format!("Example: {desc}\nScript:"));
    }
    Ok(out)
}

/// One few-shot triple for description induction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptionSeed {
    pub task: Task,
    /// Crowd-worker annotation for the task.
    pub larc_description: String,
    pub good_description: TaskDescription,
}

/// Renders a task's train pairs and test inputs for inclusion in a prompt;
/// the single grid serializer is used throughout.
pub fn render_task_for_prompt(task: &Task) -> String {
    let mut out = String::new();
    for (i, ex) in task.train.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!(
            "input: {} output: {}",
            render_grid_text(&ex.input),
            render_grid_text(&ex.output)
        ));
    }
    for pair in &task.test {
        out.push_str(&format!(" test input: {}", render_grid_text(&pair.input)));
    }
    out
}

/// Builds the description-induction prompt: seed triples in the given
/// order, ending at the query task's crowd annotation.
pub fn build_description_prompt(
    seeds: &[DescriptionSeed],
    query: &Task,
    query_larc: &str,
) -> Result<String, FtError> {
    if seeds.is_empty() {
        return Err(FtError::Prompt);
    }
    let mut out = String::new();
    out.push_str(DESCRIPTION_HEADER);
    out.push('\n');
    for seed in seeds {
        out.push_str(SEPARATOR);
        out.push('\n');
        out.push_str(&format!("Task: {}\n", render_task_for_prompt(&seed.task)));
        out.push_str(&format!("LARC Description: {}\n", seed.larc_description));
        out.push_str(&format!("Good Description: {}\n", seed.good_description.render()));
    }
    out.push_str(SEPARATOR);
    out.push('\n');
    out.push_str(&format!("Task: {}\n", render_task_for_prompt(query)));
    out.push_str(&format!("LARC Description: {query_larc}"));
    Ok(out)
}

/// A synthesized generator: opaque code text plus an optional structured
/// description. The code is persisted for external tooling and never run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorCandidate {
    pub mode: GenerationMode,
    pub description: Option<TaskDescription>,
    pub code: String,
}

/// Splits a model response into candidates: each `Script:` block yields
/// one, with any preceding `Example:` text parsed into a description.
pub fn parse_generator_response(
    text: &str,
    mode: GenerationMode,
) -> Result<Vec<GeneratorCandidate>, FtError> {
    let mut candidates = Vec::new();
    for block in text.split(SEPARATOR) {
        let Some(script_at) = block.find("Script:") else { continue };
        let code = block[script_at + "Script:".len()..].trim().to_string();
        if code.is_empty() {
            continue;
        }
        let description = block[..script_at]
            .find("Example:")
            .map(|at| parse_description(block[at + "Example:".len()..script_at].trim()));
        candidates.push(GeneratorCandidate { mode, description, code });
    }
    if candidates.is_empty() {
        return Err(FtError::MalformedGeneration);
    }
    Ok(candidates)
}

fn parse_description(text: &str) -> TaskDescription {
    let field = |label: &str| -> Option<String> {
        let at = text.find(label)?;
        let rest = &text[at + label.len()..];
        let end = rest.find('\n').unwrap_or(rest.len());
        Some(rest[..end].trim().to_string())
    };
    TaskDescription {
        category: field("Category:").unwrap_or_default(),
        summary: field("Summary:").unwrap_or_default(),
        // Unstructured example text becomes the description wholesale.
        description: field("Description:").unwrap_or_else(|| text.to_string()),
    }
}

/// Persists candidates as JSONL of `{"mode", "description", "code"}`.
pub fn write_candidates(candidates: &[GeneratorCandidate]) -> Vec<u8> {
    let mut out = Vec::new();
    for c in candidates {
        serde_json::to_writer(&mut out, c).expect("candidate serialization cannot fail");
        out.push(b'\n');
    }
    out
}
