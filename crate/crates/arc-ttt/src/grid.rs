//! Core value types: colors, grids, examples, tasks.
//!
//! Everything here is an immutable value after construction and safe to
//! share across threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest dimension a raw ARC grid may have.
pub const RAW_DIM_CAP: usize = 30;
/// Hard dimension cap. Upscaling augmentations can double a 30-wide grid,
/// so augmented grids are allowed up to 60; anything larger is rejected.
pub const HARD_DIM_CAP: usize = 60;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum GridError {
    #[error("ragged or empty grid: {0}")]
    Shape(String),
    #[error("color value {0} outside 0-9")]
    Color(u8),
    #[error("grid dimension {rows}x{cols} exceeds hard cap {cap}")]
    Size { rows: usize, cols: usize, cap: usize },
}

/// A single cell value. ARC uses at most 10 colors, coded 0 through 9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Color(u8);

impl Color {
    pub fn new(value: u8) -> Result<Self, GridError> {
        if value > 9 {
            Err(GridError::Color(value))
        } else {
            Ok(Color(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Color {
    type Error = GridError;
    fn try_from(v: u8) -> Result<Self, GridError> {
        Color::new(v)
    }
}

impl From<Color> for u8 {
    fn from(c: Color) -> u8 {
        c.0
    }
}

/// A rectangular 2-D grid of colors, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<Color>,
}

impl Grid {
    /// Validates and builds a grid from a matrix of raw color codes.
    pub fn new(cells: &[Vec<u8>]) -> Result<Self, GridError> {
        if cells.is_empty() {
            return Err(GridError::Shape("no rows".into()));
        }
        let cols = cells[0].len();
        if cols == 0 {
            return Err(GridError::Shape("empty first row".into()));
        }
        for (i, row) in cells.iter().enumerate() {
            if row.len() != cols {
                return Err(GridError::Shape(format!(
                    "row {} has {} cells, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
        }
        let rows = cells.len();
        if rows > HARD_DIM_CAP || cols > HARD_DIM_CAP {
            return Err(GridError::Size { rows, cols, cap: HARD_DIM_CAP });
        }
        let mut flat = Vec::with_capacity(rows * cols);
        for row in cells {
            for &v in row {
                flat.push(Color::new(v)?);
            }
        }
        Ok(Grid { rows, cols, cells: flat })
    }

    /// Builds a grid from already-validated colors; still enforces shape
    /// and the dimension cap.
    pub fn from_colors(rows: usize, cols: usize, cells: Vec<Color>) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(GridError::Shape(format!(
                "{}x{} with {} cells",
                rows,
                cols,
                cells.len()
            )));
        }
        if rows > HARD_DIM_CAP || cols > HARD_DIM_CAP {
            return Err(GridError::Size { rows, cols, cap: HARD_DIM_CAP });
        }
        Ok(Grid { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Color {
        self.cells[r * self.cols + c]
    }

    /// Row `r` as a slice of colors.
    pub fn row(&self, r: usize) -> &[Color] {
        &self.cells[r * self.cols..(r + 1) * self.cols]
    }

    /// Column `c` collected into a vector.
    pub fn column(&self, c: usize) -> Vec<Color> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|c| c.value()).collect())
            .collect()
    }
}

impl TryFrom<Vec<Vec<u8>>> for Grid {
    type Error = GridError;
    fn try_from(m: Vec<Vec<u8>>) -> Result<Self, GridError> {
        Grid::new(&m)
    }
}

impl From<Grid> for Vec<Vec<u8>> {
    fn from(g: Grid) -> Vec<Vec<u8>> {
        g.to_matrix()
    }
}

/// Exact-match comparison: identical dimensions and cell-wise equality.
pub fn grids_equal(a: &Grid, b: &Grid) -> bool {
    a == b
}

/// One input-output pair. The output may be absent for unsolved test
/// examples in prediction-only task files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub input: Grid,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Grid>,
}

/// A fully supervised input-output pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub input: Grid,
    pub output: Grid,
}

/// One ARC task: K training examples sharing a hidden rule and M test
/// examples to solve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub train: Vec<Example>,
    pub test: Vec<ExamplePair>,
}

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum TaskError {
    #[error("task {0}: needs at least one training example")]
    NoTrain(String),
    #[error("task {0}: needs at least one test example")]
    NoTest(String),
    #[error("duplicate task id {0}")]
    DuplicateId(String),
}

impl Task {
    pub fn new(id: impl Into<String>, train: Vec<Example>, test: Vec<ExamplePair>) -> Result<Self, TaskError> {
        let id = id.into();
        if train.is_empty() {
            return Err(TaskError::NoTrain(id));
        }
        if test.is_empty() {
            return Err(TaskError::NoTest(id));
        }
        Ok(Task { id, train, test })
    }

    /// True when K or M falls outside the typical raw-data ranges. The
    /// caller may warn; such tasks are never rejected.
    pub fn outside_typical_ranges(&self) -> bool {
        let k = self.train.len();
        let m = self.test.len();
        !(2..=7).contains(&k) || !(1..=3).contains(&m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Dev80,
    Unknown,
}

/// An ordered collection of tasks with unique ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSet {
    pub split: Split,
    pub tasks: Vec<Task>,
}

impl TaskSet {
    pub fn new(split: Split, tasks: Vec<Task>) -> Result<Self, TaskError> {
        let mut seen = std::collections::HashSet::new();
        for t in &tasks {
            if !seen.insert(t.id.clone()) {
                return Err(TaskError::DuplicateId(t.id.clone()));
            }
        }
        Ok(TaskSet { split, tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }
}
