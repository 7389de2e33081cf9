//! Grid and task transformations: the TTT augmentation catalogue, the
//! extended fine-tuning catalogue, and the six invertible transformations
//! used at inference time.
//!
//! Every transform is fully determined at construction; transforms that
//! need randomness (translate, dropout, color shuffle) materialize it from
//! an explicit seed, so application replays identically.

use crate::grid::{Color, Example, ExamplePair, Grid, GridError, Task};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum TransformError {
    #[error("transform {0} has no inverse")]
    NonInvertible(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Flip axis. `Horizontal` (code 0) reverses row order; `Vertical`
/// (code 1) reverses column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    pub fn code(self) -> u8 {
        match self {
            Axis::Horizontal => 0,
            Axis::Vertical => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropTarget {
    Input,
    Output,
}

/// Which side of each example a task-level application touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskApplicationMode {
    Both,
    InputOnly,
    OutputOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    /// Clockwise quarter turns, 1..=3.
    Rotate(u8),
    Flip(Axis),
    Transpose,
    /// Concatenates the flipped grid before (`reverse`) or after the
    /// original along the flip axis.
    Reflect { axis: Axis, reverse: bool },
    /// Cyclic shift; dx columns right, dy rows down, |dx|,|dy| <= 4.
    RandomTranslateXY { dx: i8, dy: i8 },
    /// Each cell repeated k x k.
    IncreaseResolution(u8),
    IncreaseHeight(u8),
    IncreaseWidth(u8),
    /// Tiles the grid n times along a direction.
    Repeat { direction: Direction, n: u8 },
    /// Zeroes 1-3 seeded rectangular patches of the targeted grids.
    DropoutPatches { target: DropTarget, seed: u64 },
    /// Relabels colors 1-9; color 0 (background) is fixed.
    ColorPermutation { map: [u8; 10] },
    Chain(Vec<Transform>),
}

impl Transform {
    pub fn random_translate(seed: u64) -> Transform {
        let mut rng = seed::rng_for(seed, &["translate"]);
        Transform::RandomTranslateXY { dx: rng.gen_range(-4..=4), dy: rng.gen_range(-4..=4) }
    }

    /// A seeded permutation of colors 1-9 with 0 held fixed.
    pub fn color_permutation(seed: u64) -> Transform {
        let mut rng = seed::rng_for(seed, &["color-perm"]);
        let mut tail: Vec<u8> = (1..=9).collect();
        tail.shuffle(&mut rng);
        let mut map = [0u8; 10];
        for (i, v) in tail.into_iter().enumerate() {
            map[i + 1] = v;
        }
        Transform::ColorPermutation { map }
    }

    pub fn invertible(&self) -> bool {
        match self {
            Transform::Identity
            | Transform::Rotate(_)
            | Transform::Flip(_)
            | Transform::Transpose
            | Transform::RandomTranslateXY { .. }
            | Transform::ColorPermutation { .. } => true,
            Transform::Chain(ts) => ts.iter().all(Transform::invertible),
            _ => false,
        }
    }

    /// Canonical name used in JSONL metadata, following the augmentation
    /// table's function-signature style.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity => write!(f, "Identity"),
            Transform::Rotate(q) => write!(f, "Rotate({})", u32::from(*q) * 90),
            Transform::Flip(a) => write!(f, "Flip({})", a.code()),
            Transform::Transpose => write!(f, "Transpose()"),
            Transform::Reflect { axis, reverse } => {
                write!(f, "Reflect({}, reverse={})", axis.code(), if *reverse { "True" } else { "False" })
            }
            Transform::RandomTranslateXY { .. } => write!(f, "RandomTranslateXY()"),
            Transform::IncreaseResolution(k) => write!(f, "IncreaseResolution({k})"),
            Transform::IncreaseHeight(k) => write!(f, "IncreaseHeight({k})"),
            Transform::IncreaseWidth(k) => write!(f, "IncreaseWidth({k})"),
            Transform::Repeat { direction, n } => {
                let d = match direction {
                    Direction::Horizontal => "horizontal",
                    Direction::Vertical => "vertical",
                };
                write!(f, "Repeat({d}, {n})")
            }
            Transform::DropoutPatches { target, .. } => match target {
                DropTarget::Input => write!(f, "DropoutInput"),
                DropTarget::Output => write!(f, "DropoutOutput"),
            },
            Transform::ColorPermutation { .. } => write!(f, "ColorPermutation()"),
            Transform::Chain(ts) => {
                write!(f, "Chain([")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "])")
            }
        }
    }
}

fn rotate_cw(g: &Grid) -> Result<Grid, GridError> {
    let (r, c) = (g.rows(), g.cols());
    let mut cells = vec![Color::new(0).unwrap(); r * c];
    for i in 0..r {
        for j in 0..c {
            // (i,j) of RxC -> (j, R-1-i) of CxR
            cells[j * r + (r - 1 - i)] = g.get(i, j);
        }
    }
    Grid::from_colors(c, r, cells)
}

fn flip(g: &Grid, axis: Axis) -> Result<Grid, GridError> {
    let (r, c) = (g.rows(), g.cols());
    let mut cells = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            let v = match axis {
                Axis::Horizontal => g.get(r - 1 - i, j),
                Axis::Vertical => g.get(i, c - 1 - j),
            };
            cells.push(v);
        }
    }
    Grid::from_colors(r, c, cells)
}

fn transpose(g: &Grid) -> Result<Grid, GridError> {
    let (r, c) = (g.rows(), g.cols());
    let mut cells = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            cells.push(g.get(i, j));
        }
    }
    Grid::from_colors(c, r, cells)
}

fn concat_rows(top: &Grid, bottom: &Grid) -> Result<Grid, GridError> {
    debug_assert_eq!(top.cols(), bottom.cols());
    let mut cells = Vec::with_capacity((top.rows() + bottom.rows()) * top.cols());
    for i in 0..top.rows() {
        cells.extend_from_slice(top.row(i));
    }
    for i in 0..bottom.rows() {
        cells.extend_from_slice(bottom.row(i));
    }
    Grid::from_colors(top.rows() + bottom.rows(), top.cols(), cells)
}

fn concat_cols(left: &Grid, right: &Grid) -> Result<Grid, GridError> {
    debug_assert_eq!(left.rows(), right.rows());
    let mut cells = Vec::with_capacity(left.rows() * (left.cols() + right.cols()));
    for i in 0..left.rows() {
        cells.extend_from_slice(left.row(i));
        cells.extend_from_slice(right.row(i));
    }
    Grid::from_colors(left.rows(), left.cols() + right.cols(), cells)
}

fn translate(g: &Grid, dx: i8, dy: i8) -> Result<Grid, GridError> {
    let (r, c) = (g.rows(), g.cols());
    let mut cells = vec![Color::new(0).unwrap(); r * c];
    let dy = dy.rem_euclid(r as i8) as usize;
    let dx = dx.rem_euclid(c as i8) as usize;
    for i in 0..r {
        for j in 0..c {
            cells[((i + dy) % r) * c + (j + dx) % c] = g.get(i, j);
        }
    }
    Grid::from_colors(r, c, cells)
}

fn upscale(g: &Grid, kr: usize, kc: usize) -> Result<Grid, GridError> {
    let (r, c) = (g.rows(), g.cols());
    let mut cells = Vec::with_capacity(r * kr * c * kc);
    for i in 0..r * kr {
        for j in 0..c * kc {
            cells.push(g.get(i / kr, j / kc));
        }
    }
    Grid::from_colors(r * kr, c * kc, cells)
}

fn repeat(g: &Grid, direction: Direction, n: u8) -> Result<Grid, GridError> {
    let mut out = g.clone();
    for _ in 1..n {
        out = match direction {
            Direction::Horizontal => concat_cols(&out, g)?,
            Direction::Vertical => concat_rows(&out, g)?,
        };
    }
    Ok(out)
}

fn dropout_patches(g: &Grid, seed: u64) -> Result<Grid, GridError> {
    let (r, c) = (g.rows(), g.cols());
    // Patches are derived from (seed, dims) so the same transform replays
    // identically on any given grid shape.
    let mut rng = seed::rng_for(seed, &["dropout", &r.to_string(), &c.to_string()]);
    let mut m = g.to_matrix();
    let patches = rng.gen_range(1..=3);
    for _ in 0..patches {
        let frac: f64 = rng.gen_range(0.05..=0.20);
        let area = ((r * c) as f64 * frac).max(1.0).round() as usize;
        let h = rng.gen_range(1..=r.min(area));
        let w = (area / h).clamp(1, c);
        let top = rng.gen_range(0..=r - h);
        let left = rng.gen_range(0..=c - w);
        for row in m.iter_mut().skip(top).take(h) {
            for cell in row.iter_mut().skip(left).take(w) {
                *cell = 0;
            }
        }
    }
    Grid::new(&m)
}

fn relabel(g: &Grid, map: &[u8; 10]) -> Result<Grid, GridError> {
    let cells = (0..g.rows())
        .flat_map(|i| g.row(i).iter().map(|c| Color::new(map[c.value() as usize]).unwrap()).collect::<Vec<_>>())
        .collect();
    Grid::from_colors(g.rows(), g.cols(), cells)
}

/// Applies a transform to a single grid. Fails only when the result would
/// exceed the hard dimension cap.
pub fn apply_to_grid(t: &Transform, g: &Grid) -> Result<Grid, GridError> {
    match t {
        Transform::Identity => Ok(g.clone()),
        Transform::Rotate(q) => {
            let mut out = g.clone();
            for _ in 0..*q {
                out = rotate_cw(&out)?;
            }
            Ok(out)
        }
        Transform::Flip(axis) => flip(g, *axis),
        Transform::Transpose => transpose(g),
        Transform::Reflect { axis, reverse } => {
            let flipped = flip(g, *axis)?;
            match (axis, reverse) {
                (Axis::Horizontal, true) => concat_rows(&flipped, g),
                (Axis::Horizontal, false) => concat_rows(g, &flipped),
                (Axis::Vertical, true) => concat_cols(&flipped, g),
                (Axis::Vertical, false) => concat_cols(g, &flipped),
            }
        }
        Transform::RandomTranslateXY { dx, dy } => translate(g, *dx, *dy),
        Transform::IncreaseResolution(k) => upscale(g, *k as usize, *k as usize),
        Transform::IncreaseHeight(k) => upscale(g, *k as usize, 1),
        Transform::IncreaseWidth(k) => upscale(g, 1, *k as usize),
        Transform::Repeat { direction, n } => repeat(g, *direction, *n),
        Transform::DropoutPatches { seed, .. } => dropout_patches(g, *seed),
        Transform::ColorPermutation { map } => relabel(g, map),
        Transform::Chain(ts) => {
            let mut out = g.clone();
            for t in ts {
                out = apply_to_grid(t, &out)?;
            }
            Ok(out)
        }
    }
}

/// Exact inverse, for the invertible kinds only.
pub fn invert(t: &Transform) -> Result<Transform, TransformError> {
    match t {
        Transform::Identity => Ok(Transform::Identity),
        Transform::Rotate(q) => Ok(Transform::Rotate(4 - q)),
        Transform::Flip(a) => Ok(Transform::Flip(*a)),
        Transform::Transpose => Ok(Transform::Transpose),
        Transform::RandomTranslateXY { dx, dy } => Ok(Transform::RandomTranslateXY { dx: -dx, dy: -dy }),
        Transform::ColorPermutation { map } => {
            let mut inv = [0u8; 10];
            for (from, &to) in map.iter().enumerate() {
                inv[to as usize] = from as u8;
            }
            Ok(Transform::ColorPermutation { map: inv })
        }
        Transform::Chain(ts) => {
            let inner: Result<Vec<_>, _> = ts.iter().rev().map(invert).collect();
            Ok(Transform::Chain(inner?))
        }
        other => Err(TransformError::NonInvertible(other.name())),
    }
}

/// Which (input, output) sides a transform touches under a mode. Dropout
/// transforms carry their own target, which narrows the mode further.
fn active_sides(t: &Transform, mode: TaskApplicationMode) -> (bool, bool) {
    let (mut input, mut output) = match mode {
        TaskApplicationMode::Both => (true, true),
        TaskApplicationMode::InputOnly => (true, false),
        TaskApplicationMode::OutputOnly => (false, true),
    };
    if let Transform::DropoutPatches { target, .. } = t {
        match target {
            DropTarget::Input => output = false,
            DropTarget::Output => input = false,
        }
    }
    (input, output)
}

/// Applies a transform to every grid of an example, subject to the mode.
pub fn apply_to_example(t: &Transform, ex: &Example, mode: TaskApplicationMode) -> Result<Example, GridError> {
    let (input, output) = active_sides(t, mode);
    Ok(Example {
        input: if input { apply_to_grid(t, &ex.input)? } else { ex.input.clone() },
        output: if output { apply_to_grid(t, &ex.output)? } else { ex.output.clone() },
    })
}

/// Applies a transform to every grid in a task (train and test).
pub fn apply_to_task(t: &Transform, task: &Task, mode: TaskApplicationMode) -> Result<Task, GridError> {
    let (input, output) = active_sides(t, mode);
    let train = task
        .train
        .iter()
        .map(|ex| apply_to_example(t, ex, mode))
        .collect::<Result<Vec<_>, _>>()?;
    let test = task
        .test
        .iter()
        .map(|pair| {
            Ok(ExamplePair {
                input: if input { apply_to_grid(t, &pair.input)? } else { pair.input.clone() },
                output: match &pair.output {
                    Some(g) if output => Some(apply_to_grid(t, g)?),
                    other => other.clone(),
                },
            })
        })
        .collect::<Result<Vec<_>, GridError>>()?;
    Ok(Task { id: task.id.clone(), train, test })
}

/// Reorders a task's training examples with a seeded permutation. Test
/// examples are untouched.
pub fn permute_examples(task: &Task, seed: u64) -> Task {
    let mut rng = seed::rng_for(seed, &["example-perm"]);
    let mut train = task.train.clone();
    train.shuffle(&mut rng);
    Task { id: task.id.clone(), train, test: task.test.clone() }
}

/// Seeded color shuffle fixing the background color.
pub fn permute_colors(seed: u64) -> Transform {
    Transform::color_permutation(seed)
}

/// The six invertible transformations used at inference: identity plus
/// 90/180 degree rotations, both flips, and the transpose.
pub fn inference_transform_set() -> Vec<Transform> {
    vec![
        Transform::Identity,
        Transform::Rotate(1),
        Transform::Rotate(2),
        Transform::Flip(Axis::Horizontal),
        Transform::Flip(Axis::Vertical),
        Transform::Transpose,
    ]
}

/// The 20 TTT augmentations, in table order. The translate's shift is
/// materialized from `seed`.
pub fn ttt_augmentation_set(seed: u64) -> Vec<Transform> {
    let ir2 = Transform::IncreaseResolution(2);
    vec![
        Transform::Rotate(1),
        Transform::Rotate(3),
        Transform::Rotate(2),
        Transform::Flip(Axis::Horizontal),
        Transform::Flip(Axis::Vertical),
        Transform::Reflect { axis: Axis::Horizontal, reverse: true },
        Transform::Reflect { axis: Axis::Vertical, reverse: true },
        Transform::Reflect { axis: Axis::Horizontal, reverse: false },
        Transform::Reflect { axis: Axis::Vertical, reverse: false },
        Transform::random_translate(seed),
        Transform::Transpose,
        ir2.clone(),
        Transform::IncreaseHeight(2),
        Transform::IncreaseWidth(2),
        Transform::Chain(vec![Transform::Rotate(1), ir2.clone()]),
        Transform::Chain(vec![Transform::Rotate(3), ir2.clone()]),
        Transform::Chain(vec![Transform::Rotate(2), ir2.clone()]),
        Transform::Chain(vec![Transform::Flip(Axis::Horizontal), ir2.clone()]),
        Transform::Chain(vec![Transform::Flip(Axis::Vertical), ir2.clone()]),
        Transform::Chain(vec![Transform::Transpose, ir2]),
    ]
}

/// The fine-tuning catalogue: everything in the TTT set plus tiling and
/// patch-dropout families.
pub fn ft_augmentation_set(seed: u64) -> Vec<Transform> {
    let mut set = ttt_augmentation_set(seed);
    for n in [2u8, 3] {
        set.push(Transform::Repeat { direction: Direction::Horizontal, n });
        set.push(Transform::Repeat { direction: Direction::Vertical, n });
    }
    set.push(Transform::DropoutPatches {
        target: DropTarget::Input,
        seed: seed::derive_seed(seed, &["dropout-input"]),
    });
    set.push(Transform::DropoutPatches {
        target: DropTarget::Output,
        seed: seed::derive_seed(seed, &["dropout-output"]),
    });
    set
}
