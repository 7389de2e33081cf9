//! Pass@2 scoring, hardness-stratified reporting over the 80-task
//! development split, and grid rendering for reports.

use crate::grid::{grids_equal, Grid, Split, Task, TaskSet};
use crate::inference::{generate_candidates, CandidateLine, InferenceConfig, InferenceError};
use crate::predictor::Predictor;
use crate::transform::Transform;
use crate::voting::{flattened_vote, hierarchical_vote, oracle_select, GlobalWeighting, VoteInput};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("task {0} not found in the provided task set")]
    Lookup(String),
    #[error("task {0}: test example {1} has no ground-truth output")]
    MissingTruth(String, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    Expert,
    Unknown,
}

impl Hardness {
    pub fn label(self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::Expert => "expert",
            Hardness::Unknown => "unknown",
        }
    }
}

/// The 80 development tasks drawn from the public validation set, 20 per
/// hardness level.
pub const DEV80_MANIFEST: [(&str, Hardness); 80] = [
    ("0a1d4ef5", Hardness::Easy),
    ("692cd3b6", Hardness::Easy),
    ("1da012fc", Hardness::Easy),
    ("66e6c45b", Hardness::Easy),
    ("3194b014", Hardness::Easy),
    ("963f59bc", Hardness::Easy),
    ("d37a1ef5", Hardness::Easy),
    ("358ba94e", Hardness::Easy),
    ("f3cdc58f", Hardness::Easy),
    ("55059096", Hardness::Easy),
    ("c7d4e6ad", Hardness::Easy),
    ("4b6b68e5", Hardness::Easy),
    ("00576224", Hardness::Easy),
    ("a04b2602", Hardness::Easy),
    ("e9c9d9a1", Hardness::Easy),
    ("ef26cbf6", Hardness::Easy),
    ("7ee1c6ea", Hardness::Easy),
    ("e9ac8c9e", Hardness::Easy),
    ("1a2e2828", Hardness::Easy),
    ("770cc55f", Hardness::Easy),
    ("762cd429", Hardness::Medium),
    ("e7639916", Hardness::Medium),
    ("e1d2900e", Hardness::Medium),
    ("aee291af", Hardness::Medium),
    ("e95e3d8e", Hardness::Medium),
    ("e0fb7511", Hardness::Medium),
    ("ae58858e", Hardness::Medium),
    ("93c31fbe", Hardness::Medium),
    ("27a77e38", Hardness::Medium),
    ("9bebae7a", Hardness::Medium),
    ("9ddd00f0", Hardness::Medium),
    ("fe9372f3", Hardness::Medium),
    ("69889d6e", Hardness::Medium),
    ("15663ba9", Hardness::Medium),
    ("17b80ad2", Hardness::Medium),
    ("16b78196", Hardness::Medium),
    ("5b6cbef5", Hardness::Medium),
    ("40f6cd08", Hardness::Medium),
    ("505fff84", Hardness::Medium),
    ("d017b73f", Hardness::Medium),
    ("e5c44e8f", Hardness::Hard),
    ("604001fa", Hardness::Hard),
    ("4364c1c4", Hardness::Hard),
    ("506d28a5", Hardness::Hard),
    ("2037f2c7", Hardness::Hard),
    ("d5c634a2", Hardness::Hard),
    ("ac605cbb", Hardness::Hard),
    ("27f8ce4f", Hardness::Hard),
    ("66f2d22f", Hardness::Hard),
    ("3ed85e70", Hardness::Hard),
    ("8b28cd80", Hardness::Hard),
    ("d19f7514", Hardness::Hard),
    ("dc2aa30b", Hardness::Hard),
    ("f5c89df1", Hardness::Hard),
    ("50f325b5", Hardness::Hard),
    ("08573cc6", Hardness::Hard),
    ("3d31c5b3", Hardness::Hard),
    ("94133066", Hardness::Hard),
    ("136b0064", Hardness::Hard),
    ("90347967", Hardness::Hard),
    ("e99362f0", Hardness::Expert),
    ("1acc24af", Hardness::Expert),
    ("f9a67cb5", Hardness::Expert),
    ("ad7e01d0", Hardness::Expert),
    ("ea9794b1", Hardness::Expert),
    ("58e15b12", Hardness::Expert),
    ("891232d6", Hardness::Expert),
    ("5833af48", Hardness::Expert),
    ("4ff4c9da", Hardness::Expert),
    ("5b692c0f", Hardness::Expert),
    ("e2092e0c", Hardness::Expert),
    ("47996f11", Hardness::Expert),
    ("34b99a2b", Hardness::Expert),
    ("1c56ad9f", Hardness::Expert),
    ("e6de6e8f", Hardness::Expert),
    ("fea12743", Hardness::Expert),
    ("31d5ba1a", Hardness::Expert),
    ("79fb03f4", Hardness::Expert),
    ("8719f442", Hardness::Expert),
    ("a8610ef7", Hardness::Expert),
];

pub fn hardness_of(task_id: &str) -> Hardness {
    DEV80_MANIFEST
        .iter()
        .find(|(id, _)| *id == task_id)
        .map(|(_, h)| *h)
        .unwrap_or(Hardness::Unknown)
}

/// Restricts a validation set to the 80 development task ids, in manifest
/// order. Every id must be present.
pub fn load_dev80(validation: &TaskSet) -> Result<TaskSet, EvalError> {
    let tasks = DEV80_MANIFEST
        .iter()
        .map(|(id, _)| validation.get(id).cloned().ok_or_else(|| EvalError::Lookup(id.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TaskSet { split: Split::Dev80, tasks })
}

/// How two attempt slots combine across multiple test inputs. Positional
/// requires one slot to solve every test index; independent scores each
/// test index's pair separately before the conjunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptPairing {
    #[default]
    Positional,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    /// `per_test[m][a]`: did attempt slot `a` match test output `m`?
    pub per_test: Vec<Vec<bool>>,
    pub strict: bool,
    /// Fraction of test outputs matched by any attempt.
    pub partial: f64,
    pub level: Hardness,
}

/// Scores one task from its per-test-index attempt lists (at most 2 each).
pub fn score_task(
    attempts_per_test: &[Vec<Grid>],
    task: &Task,
    pairing: AttemptPairing,
) -> Result<TaskScore, EvalError> {
    let truths: Vec<&Grid> = task
        .test
        .iter()
        .enumerate()
        .map(|(m, pair)| pair.output.as_ref().ok_or_else(|| EvalError::MissingTruth(task.id.clone(), m)))
        .collect::<Result<Vec<_>, _>>()?;
    let per_test: Vec<Vec<bool>> = truths
        .iter()
        .enumerate()
        .map(|(m, truth)| {
            let attempts = attempts_per_test.get(m).map(Vec::as_slice).unwrap_or(&[]);
            (0..2).map(|a| attempts.get(a).is_some_and(|g| grids_equal(g, truth))).collect()
        })
        .collect();
    let strict = match pairing {
        AttemptPairing::Positional => (0..2).any(|a| per_test.iter().all(|slots| slots[a])),
        AttemptPairing::Independent => per_test.iter().all(|slots| slots.iter().any(|&b| b)),
    };
    let solved = per_test.iter().filter(|slots| slots.iter().any(|&b| b)).count();
    let partial = solved as f64 / per_test.len() as f64;
    Ok(TaskScore { task_id: task.id.clone(), per_test, strict, partial, level: hardness_of(&task.id) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionColumn {
    pub mode: String,
    pub strict_accuracy: f64,
    pub partial_accuracy: f64,
    /// Strict accuracy per hardness level; unknown-level tasks omitted.
    pub by_level: BTreeMap<String, f64>,
    pub scores: Vec<TaskScore>,
}

fn column_from_scores(mode: &str, scores: Vec<TaskScore>) -> SelectionColumn {
    let n = scores.len().max(1) as f64;
    let strict_accuracy = scores.iter().filter(|s| s.strict).count() as f64 / n;
    let partial_accuracy = scores.iter().map(|s| s.partial).sum::<f64>() / n;
    let mut by_level = BTreeMap::new();
    for level in [Hardness::Easy, Hardness::Medium, Hardness::Hard, Hardness::Expert] {
        let of_level: Vec<&TaskScore> = scores.iter().filter(|s| s.level == level).collect();
        if !of_level.is_empty() {
            let acc = of_level.iter().filter(|s| s.strict).count() as f64 / of_level.len() as f64;
            by_level.insert(level.label().to_string(), acc);
        }
    }
    SelectionColumn { mode: mode.into(), strict_accuracy, partial_accuracy, by_level, scores }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_fingerprint: String,
    pub n_tasks: usize,
    pub pairing: AttemptPairing,
    pub columns: Vec<SelectionColumn>,
    /// Tasks whose inference aborted (predictor unavailable); scored as
    /// unsolved and resumable from their markers.
    pub failed_tasks: Vec<String>,
}

impl EvalReport {
    pub fn column(&self, mode: &str) -> Option<&SelectionColumn> {
        self.columns.iter().find(|c| c.mode == mode)
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "tasks: {}  failed: {}  fingerprint: {}\n",
            self.n_tasks,
            self.failed_tasks.len(),
            self.config_fingerprint
        ));
        out.push_str(&format!(
            "{:<24} {:>8} {:>8} {:>7} {:>7} {:>7} {:>7}\n",
            "mode", "strict", "partial", "easy", "medium", "hard", "expert"
        ));
        for col in &self.columns {
            let lvl = |name: &str| {
                col.by_level.get(name).map(|v| format!("{:.3}", v)).unwrap_or_else(|| "-".into())
            };
            out.push_str(&format!(
                "{:<24} {:>8.3} {:>8.3} {:>7} {:>7} {:>7} {:>7}\n",
                col.mode,
                col.strict_accuracy,
                col.partial_accuracy,
                lvl("easy"),
                lvl("medium"),
                lvl("hard"),
                lvl("expert")
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub inference: InferenceConfig,
    pub weighting: GlobalWeighting,
    pub pairing: AttemptPairing,
    pub fingerprint: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            inference: InferenceConfig::default(),
            weighting: GlobalWeighting::default(),
            pairing: AttemptPairing::default(),
            fingerprint: String::new(),
        }
    }
}

/// Runs inference over every task and scores hierarchical, flattened, and
/// oracle selection plus one single-transform baseline per transform.
/// Predictor failures are recorded per task, never fatal.
pub fn evaluate(
    taskset: &TaskSet,
    predictor: &dyn Predictor,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for task in &taskset.tasks {
        match dump_task_candidates(task, predictor, &cfg.inference) {
            Ok(mut task_lines) => lines.append(&mut task_lines),
            Err(InferenceError::PredictorUnavailable { task_id, .. }) => failed.push(task_id),
            Err(other) => return Err(EvalError::Lookup(other.to_string())),
        }
    }
    evaluate_from_lines(&lines, taskset, cfg, failed)
}

/// Generates the candidate dump for every test index of one task.
pub fn dump_task_candidates(
    task: &Task,
    predictor: &dyn Predictor,
    cfg: &InferenceConfig,
) -> Result<Vec<CandidateLine>, InferenceError> {
    let mut lines = Vec::new();
    for m in 0..task.test.len() {
        lines.extend(generate_candidates(task, m, predictor, cfg)?.to_lines());
    }
    Ok(lines)
}

/// Scores a report offline from candidate dumps; re-voting from the same
/// dumps reproduces the report exactly.
pub fn evaluate_from_lines(
    lines: &[CandidateLine],
    taskset: &TaskSet,
    cfg: &EvalConfig,
    failed_tasks: Vec<String>,
) -> Result<EvalReport, EvalError> {
    let transform_names: Vec<String> = cfg.inference.transforms.iter().map(Transform::name).collect();
    let mut modes: Vec<String> = vec!["hierarchical".into(), "flattened".into(), "oracle".into()];
    modes.extend(transform_names.iter().map(|t| format!("only:{t}")));
    let mut per_mode_scores: BTreeMap<String, Vec<TaskScore>> = BTreeMap::new();

    let scorable: Vec<&Task> =
        taskset.tasks.iter().filter(|t| !failed_tasks.contains(&t.id)).collect();
    for task in &scorable {
        let inputs_per_test: Vec<Vec<VoteInput>> = (0..task.test.len())
            .map(|m| {
                lines
                    .iter()
                    .filter(|l| l.task_id == task.id && l.test_index == m)
                    .filter_map(|l| {
                        l.grid.as_ref().map(|m| VoteInput {
                            transform: l.transform.clone(),
                            grid: Grid::new(m).expect("dumped grid is valid"),
                        })
                    })
                    .collect()
            })
            .collect();

        for mode in &modes {
            let score = if mode == "oracle" {
                score_oracle(task, &inputs_per_test)?
            } else {
                let attempts: Vec<Vec<Grid>> = inputs_per_test
                    .iter()
                    .map(|inputs| match mode.as_str() {
                        "hierarchical" => hierarchical_vote(inputs, cfg.weighting).attempts,
                        "flattened" => flattened_vote(inputs).attempts,
                        only => {
                            let name = only.strip_prefix("only:").expect("single-transform mode");
                            let filtered: Vec<VoteInput> =
                                inputs.iter().filter(|i| i.transform == name).cloned().collect();
                            flattened_vote(&filtered).attempts
                        }
                    })
                    .collect();
                score_task(&attempts, task, cfg.pairing)?
            };
            per_mode_scores.entry(mode.clone()).or_default().push(score);
        }
    }

    // Failed tasks count as unsolved in every column.
    for task_id in &failed_tasks {
        for mode in &modes {
            per_mode_scores.entry(mode.clone()).or_default().push(TaskScore {
                task_id: task_id.clone(),
                per_test: Vec::new(),
                strict: false,
                partial: 0.0,
                level: hardness_of(task_id),
            });
        }
    }

    let columns = modes
        .iter()
        .map(|mode| column_from_scores(mode, per_mode_scores.remove(mode).unwrap_or_default()))
        .collect();
    Ok(EvalReport {
        config_fingerprint: cfg.fingerprint.clone(),
        n_tasks: taskset.len(),
        pairing: cfg.pairing,
        columns,
        failed_tasks,
    })
}

fn score_oracle(task: &Task, inputs_per_test: &[Vec<VoteInput>]) -> Result<TaskScore, EvalError> {
    let mut per_test = Vec::new();
    for (m, pair) in task.test.iter().enumerate() {
        let truth = pair.output.as_ref().ok_or_else(|| EvalError::MissingTruth(task.id.clone(), m))?;
        let hit = oracle_select(&inputs_per_test[m], truth);
        per_test.push(vec![hit, false]);
    }
    let strict = per_test.iter().all(|slots| slots[0]);
    let solved = per_test.iter().filter(|slots| slots[0]).count();
    Ok(TaskScore {
        task_id: task.id.clone(),
        partial: solved as f64 / per_test.len() as f64,
        strict,
        per_test,
        level: hardness_of(&task.id),
    })
}

/// One glyph per color, injective over 0-9.
pub const ASCII_GLYPHS: [char; 10] = ['.', '#', 'O', 'X', '+', '%', '@', '*', '~', '='];

pub fn render_grid_ascii(g: &Grid) -> String {
    let mut out = String::with_capacity(g.rows() * (g.cols() + 1));
    for r in 0..g.rows() {
        if r > 0 {
            out.push('\n');
        }
        for c in 0..g.cols() {
            out.push(ASCII_GLYPHS[g.get(r, c).value() as usize]);
        }
    }
    out
}

/// The conventional 10-color ARC palette.
pub const PALETTE: [[u8; 3]; 10] = [
    [0x00, 0x00, 0x00],
    [0x00, 0x74, 0xD9],
    [0xFF, 0x41, 0x36],
    [0x2E, 0xCC, 0x40],
    [0xFF, 0xDC, 0x00],
    [0xAA, 0xAA, 0xAA],
    [0xF0, 0x12, 0xBE],
    [0xFF, 0x85, 0x1B],
    [0x7F, 0xDB, 0xFF],
    [0x87, 0x0C, 0x25],
];

const GRID_LINE: [u8; 3] = [0x50, 0x50, 0x50];

/// Pixel size of one rendered grid: cells of `cell` pixels separated and
/// surrounded by 1-pixel grid lines.
pub fn image_dims(g: &Grid, cell: u32) -> (u32, u32) {
    (g.cols() as u32 * (cell + 1) + 1, g.rows() as u32 * (cell + 1) + 1)
}

fn blit_grid(img: &mut image::RgbImage, g: &Grid, x0: u32, y0: u32, cell: u32) {
    let (w, h) = image_dims(g, cell);
    for dy in 0..h {
        for dx in 0..w {
            let on_line = dx % (cell + 1) == 0 || dy % (cell + 1) == 0;
            let rgb = if on_line {
                GRID_LINE
            } else {
                let r = (dy - 1) / (cell + 1);
                let c = (dx - 1) / (cell + 1);
                PALETTE[g.get(r as usize, c as usize).value() as usize]
            };
            img.put_pixel(x0 + dx, y0 + dy, image::Rgb(rgb));
        }
    }
}

/// Renders a task (train pairs, test inputs) plus attempt grids as one
/// horizontal strip, returned as PNG bytes.
pub fn render_task_image(task: &Task, attempts: &[Grid], cell: u32) -> Vec<u8> {
    let cell = cell.max(1);
    let mut grids: Vec<&Grid> = Vec::new();
    for ex in &task.train {
        grids.push(&ex.input);
        grids.push(&ex.output);
    }
    for pair in &task.test {
        grids.push(&pair.input);
    }
    grids.extend(attempts.iter());
    let margin = 4u32;
    let width: u32 =
        grids.iter().map(|g| image_dims(g, cell).0 + margin).sum::<u32>() + margin;
    let height: u32 =
        grids.iter().map(|g| image_dims(g, cell).1).max().unwrap_or(0) + 2 * margin;
    let mut img = image::RgbImage::from_pixel(width.max(1), height.max(1), image::Rgb([255, 255, 255]));
    let mut x = margin;
    for g in grids {
        blit_grid(&mut img, g, x, margin, cell);
        x += image_dims(g, cell).0 + margin;
    }
    let mut bytes = Vec::new();
    image::DynamicImage::ImageRgb8(img)
        .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageOutputFormat::Png)
        .expect("png encoding");
    bytes
}
