//! Candidate selection: two-stage hierarchical voting, the flattened
//! baseline, and oracle selection.
//!
//! All tallies are canonicalized before ranking, so outcomes depend only
//! on the candidate multiset, never on arrival order. Frequency ties are
//! broken by identity-transform priority (exact ties only), then
//! lexicographically on the rendered grid.

use crate::codec::render_grid_text;
use crate::grid::{grids_equal, Grid};
use crate::inference::{Candidate, CandidateSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const IDENTITY_NAME: &str = "Identity";

/// A candidate reduced to what voting needs: the grid and which transform
/// group produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteInput {
    pub transform: String,
    pub grid: Grid,
}

impl VoteInput {
    pub fn from_candidate(c: &Candidate) -> Self {
        VoteInput { transform: c.transform.name(), grid: c.grid.clone() }
    }

    pub fn from_set(set: &CandidateSet) -> Vec<VoteInput> {
        set.candidates.iter().map(VoteInput::from_candidate).collect()
    }
}

/// How the global stage weighs each transform's selected grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalWeighting {
    /// Each selecting transform endorses each of its grids with weight 1.
    #[default]
    Endorsement,
    /// Selections carry their within-group frequency forward.
    Frequency,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupAudit {
    pub transform: String,
    /// (rendered grid, count) in rank order.
    pub tally: Vec<(String, usize)>,
    /// Rendered supplements actually added (row majority, column majority).
    pub supplements: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoteAudit {
    pub groups: Vec<GroupAudit>,
    /// (rendered grid, score) of the global stage in rank order.
    pub global_tally: Vec<(String, usize)>,
    pub tie_breaks: Vec<String>,
}

/// Final selection: up to two distinct attempt grids plus the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub attempts: Vec<Grid>,
    pub audit: VoteAudit,
}

fn render_key(g: &Grid) -> String {
    render_grid_text(g)
}

/// The most frequent shape among the grids; ties go to the smaller
/// (rows, cols) pair. Majorities over mismatched shapes are ill-defined,
/// so both majority operators restrict to this modal shape.
fn modal_shape(grids: &[Grid]) -> Option<(usize, usize)> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for g in grids {
        *counts.entry((g.rows(), g.cols())).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(shape, _)| shape)
}

fn majority_by<K: Ord + Clone>(items: Vec<K>) -> Option<K> {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for item in items {
        *counts.entry(item).or_default() += 1;
    }
    // Max count; lexicographic (smallest key) tie-break via reversed key cmp.
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(k, _)| k)
}

/// Grid whose row r is the most frequent row r among the modal-shape
/// grids of the group.
pub fn row_majority(grids: &[Grid]) -> Option<Grid> {
    let (rows, cols) = modal_shape(grids)?;
    let pool: Vec<&Grid> = grids.iter().filter(|g| g.rows() == rows && g.cols() == cols).collect();
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row = majority_by(pool.iter().map(|g| g.row(r).to_vec()).collect())?;
        cells.extend(row);
    }
    Some(Grid::from_colors(rows, cols, cells).expect("modal shape within cap"))
}

/// Column-wise analogue of `row_majority`.
pub fn col_majority(grids: &[Grid]) -> Option<Grid> {
    let (rows, cols) = modal_shape(grids)?;
    let pool: Vec<&Grid> = grids.iter().filter(|g| g.rows() == rows && g.cols() == cols).collect();
    let mut columns = Vec::with_capacity(cols);
    for c in 0..cols {
        columns.push(majority_by(pool.iter().map(|g| g.column(c)).collect())?);
    }
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for col in &columns {
            cells.push(col[r]);
        }
    }
    Some(Grid::from_colors(rows, cols, cells).expect("modal shape within cap"))
}

/// A transform group's selection: up to three distinct grids ranked by
/// frequency, supplemented with row/column majorities when fewer than
/// three distinct predictions exist.
pub fn intra_transform_vote(group: &[Grid]) -> Vec<Grid> {
    intra_vote_with_audit(group, "").0.into_iter().map(|(g, _)| g).collect()
}

fn intra_vote_with_audit(group: &[Grid], transform: &str) -> (Vec<(Grid, usize)>, GroupAudit) {
    let mut audit = GroupAudit { transform: transform.to_string(), ..Default::default() };
    if group.is_empty() {
        return (Vec::new(), audit);
    }
    let mut counts: BTreeMap<Grid, usize> = BTreeMap::new();
    for g in group {
        *counts.entry(g.clone()).or_default() += 1;
    }
    let mut ranked: Vec<(Grid, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| render_key(&a.0).cmp(&render_key(&b.0))));
    let distinct = ranked.len();
    ranked.truncate(3);
    audit.tally = ranked.iter().map(|(g, n)| (render_key(g), *n)).collect();
    if distinct < 3 {
        for supplement in [row_majority(group), col_majority(group)].into_iter().flatten() {
            if ranked.len() >= 3 {
                break;
            }
            if !ranked.iter().any(|(g, _)| grids_equal(g, &supplement)) {
                audit.supplements.push(render_key(&supplement));
                ranked.push((supplement, 1));
            }
        }
    }
    (ranked, audit)
}

/// Top-2 scoring over grids with an identity-priority, then lexicographic
/// tie-break. Scores and identity flags are accumulated per distinct grid.
fn rank_top2(
    entries: impl IntoIterator<Item = (Grid, usize, bool)>,
    audit: &mut VoteAudit,
) -> Vec<Grid> {
    let mut scored: BTreeMap<Grid, (usize, bool)> = BTreeMap::new();
    for (grid, score, identity) in entries {
        let e = scored.entry(grid).or_insert((0, false));
        e.0 += score;
        e.1 |= identity;
    }
    let mut ranked: Vec<(Grid, usize, bool)> =
        scored.into_iter().map(|(g, (s, id))| (g, s, id)).collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(b.2.cmp(&a.2))
            .then_with(|| render_key(&a.0).cmp(&render_key(&b.0)))
    });
    audit.global_tally = ranked.iter().map(|(g, s, _)| (render_key(g), *s)).collect();
    for pair in ranked.windows(2).take(2) {
        if pair[0].1 == pair[1].1 {
            audit.tie_breaks.push(format!(
                "tie at score {} between {:?} and {:?}",
                pair[0].1,
                render_key(&pair[0].0),
                render_key(&pair[1].0)
            ));
        }
    }
    ranked.into_iter().take(2).map(|(g, _, _)| g).collect()
}

/// Global stage over per-transform selections. With `Endorsement`
/// weighting every selecting transform counts once per grid; with
/// `Frequency` the within-group counts carry through.
pub fn global_vote(
    selections: &BTreeMap<String, Vec<(Grid, usize)>>,
    weighting: GlobalWeighting,
) -> VoteOutcome {
    let mut audit = VoteAudit::default();
    let entries = selections.iter().flat_map(|(transform, grids)| {
        let identity = transform == IDENTITY_NAME;
        grids.iter().map(move |(g, freq)| {
            let score = match weighting {
                GlobalWeighting::Endorsement => 1,
                GlobalWeighting::Frequency => *freq,
            };
            (g.clone(), score, identity)
        })
    });
    let attempts = rank_top2(entries, &mut audit);
    VoteOutcome { attempts, audit }
}

/// The full two-stage strategy: intra-transform selection with majority
/// supplements, then the global vote.
pub fn hierarchical_vote(candidates: &[VoteInput], weighting: GlobalWeighting) -> VoteOutcome {
    let mut groups: BTreeMap<String, Vec<Grid>> = BTreeMap::new();
    for c in candidates {
        groups.entry(c.transform.clone()).or_default().push(c.grid.clone());
    }
    let mut selections: BTreeMap<String, Vec<(Grid, usize)>> = BTreeMap::new();
    let mut group_audits = Vec::new();
    for (transform, grids) in &groups {
        let (selected, audit) = intra_vote_with_audit(grids, transform);
        group_audits.push(audit);
        selections.insert(transform.clone(), selected);
    }
    let mut outcome = global_vote(&selections, weighting);
    outcome.audit.groups = group_audits;
    outcome
}

/// Single voting round over the full candidate set.
pub fn flattened_vote(candidates: &[VoteInput]) -> VoteOutcome {
    let mut audit = VoteAudit::default();
    let entries = candidates
        .iter()
        .map(|c| (c.grid.clone(), 1usize, c.transform == IDENTITY_NAME));
    let attempts = rank_top2(entries, &mut audit);
    VoteOutcome { attempts, audit }
}

/// True iff the truth appears anywhere in the candidate set: the upper
/// bound a perfect selection rule could reach.
pub fn oracle_select(candidates: &[VoteInput], truth: &Grid) -> bool {
    candidates.iter().any(|c| grids_equal(&c.grid, truth))
}
