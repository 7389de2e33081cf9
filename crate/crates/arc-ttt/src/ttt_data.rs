//! Per-task test-time-training dataset construction: leave-one-out tasks,
//! permuted copies, transform augmentation with a color shuffle post-pass,
//! capping, and trainer-manifest emission.

use crate::codec::{encode_ttt_record, write_jsonl, LossMode, Provenance, TttRecord};
use crate::grid::{Example, Task};
use crate::seed;
use crate::transform::{self, Transform};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// A synthetic in-context task: held-out demonstrations plus one probe
/// pair standing in for the test example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IclTask {
    pub demos: Vec<Example>,
    pub probe: Example,
    pub loo_index: usize,
    pub perm_index: usize,
}

/// One leave-one-out task per training example: the j-th task holds out
/// pair j as the probe and keeps the rest, in order, as demos. A K=1 task
/// degenerates to a single zero-demo task.
pub fn leave_one_out(task: &Task) -> Vec<IclTask> {
    (0..task.train.len())
        .map(|j| {
            let demos = task
                .train
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, ex)| ex.clone())
                .collect();
            IclTask { demos, probe: task.train[j].clone(), loo_index: j, perm_index: 0 }
        })
        .collect()
}

/// The original task plus `n` seeded demo-order permutations of it. The
/// probe is never moved. Permutations are sampled uniformly over all
/// orderings, so a copy may coincide with the original.
pub fn add_permutations(icl: &IclTask, n: usize, seed_root: u64) -> Vec<IclTask> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(icl.clone());
    for i in 1..=n {
        let mut rng = seed::rng_for(seed_root, &["demo-perm", &icl.loo_index.to_string(), &i.to_string()]);
        let mut demos = icl.demos.clone();
        demos.shuffle(&mut rng);
        out.push(IclTask { demos, probe: icl.probe.clone(), loo_index: icl.loo_index, perm_index: i });
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub cap: usize,
    pub loss_mode: LossMode,
    pub seed: u64,
    /// Permuted copies per leave-one-out task.
    pub permutations: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { cap: 250, loss_mode: LossMode::Demos, seed: 0, permutations: 2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStats {
    /// Records enumerated before capping.
    pub generated: usize,
    /// Records dropped because a transform pushed a grid over the size cap.
    pub dropped_oversize: usize,
    /// Records removed by the cap.
    pub capped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TttDataset {
    pub task_id: String,
    pub config: GenConfig,
    pub stats: GenStats,
    pub records: Vec<TttRecord>,
}

fn color_shuffle_seed(cfg: &GenConfig, task_id: &str, icl: &IclTask, transform_name: &str) -> u64 {
    seed::derive_seed(
        cfg.seed,
        &[
            task_id,
            "color",
            &icl.loo_index.to_string(),
            &icl.perm_index.to_string(),
            transform_name,
        ],
    )
}

/// Applies a transform to every grid of an ICL task (both sides), then a
/// seeded color shuffle. Returns None when any grid would exceed the cap.
fn augment_icl(cfg: &GenConfig, task_id: &str, icl: &IclTask, t: &Transform) -> Option<IclTask> {
    let shuffle = transform::permute_colors(color_shuffle_seed(cfg, task_id, icl, &t.name()));
    let full = Transform::Chain(vec![t.clone(), shuffle]);
    let mode = transform::TaskApplicationMode::Both;
    let demos = icl
        .demos
        .iter()
        .map(|ex| transform::apply_to_example(&full, ex, mode))
        .collect::<Result<Vec<_>, _>>()
        .ok()?;
    let probe = transform::apply_to_example(&full, &icl.probe, mode).ok()?;
    Some(IclTask { demos, probe, ..icl.clone() })
}

fn build_dataset(task: &Task, cfg: &GenConfig, base: Vec<IclTask>) -> TttDataset {
    let mut transforms = vec![Transform::Identity];
    transforms.extend(transform::ttt_augmentation_set(seed::derive_seed(cfg.seed, &[&task.id, "aug"])));

    let mut records = Vec::new();
    let mut identity_flags = Vec::new();
    let mut stats = GenStats::default();
    for t in &transforms {
        for icl in &base {
            stats.generated += 1;
            let Some(aug) = augment_icl(cfg, &task.id, icl, t) else {
                stats.dropped_oversize += 1;
                continue;
            };
            let source =
                Provenance { loo_index: icl.loo_index, transform: t.name(), perm_index: icl.perm_index };
            records.push(encode_ttt_record(&aug.demos, &aug.probe, cfg.loss_mode, &task.id, source));
            identity_flags.push(*t == Transform::Identity);
        }
    }

    if records.len() > cfg.cap {
        stats.capped = records.len() - cfg.cap;
        records = subsample(records, identity_flags, cfg.cap, cfg.seed, &task.id);
    }

    TttDataset { task_id: task.id.clone(), config: cfg.clone(), stats, records }
}

/// Keeps identity-transform records first, then fills the remaining slots
/// by seeded uniform sampling without replacement. Output preserves the
/// enumeration order of the survivors.
fn subsample(records: Vec<TttRecord>, identity: Vec<bool>, cap: usize, seed_root: u64, task_id: &str) -> Vec<TttRecord> {
    let mut keep = vec![false; records.len()];
    let mut kept = 0;
    for (i, &is_id) in identity.iter().enumerate() {
        if is_id && kept < cap {
            keep[i] = true;
            kept += 1;
        }
    }
    let mut rest: Vec<usize> = (0..records.len()).filter(|&i| !keep[i]).collect();
    let mut rng = seed::rng_for(seed_root, &[task_id, "cap"]);
    rest.shuffle(&mut rng);
    for i in rest.into_iter().take(cap - kept) {
        keep[i] = true;
    }
    records
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}

/// Builds the full leave-one-out TTT dataset for one task.
pub fn build_ttt_dataset(task: &Task, cfg: &GenConfig) -> TttDataset {
    let base: Vec<IclTask> = leave_one_out(task)
        .iter()
        .flat_map(|icl| add_permutations(icl, cfg.permutations, seed::derive_seed(cfg.seed, &[&task.id, "perm"])))
        .collect();
    build_dataset(task, cfg, base)
}

/// Builds the end-to-end baseline dataset: each training pair becomes an
/// independent zero-demo record; no context, no permuted copies.
pub fn build_e2e_dataset(task: &Task, cfg: &GenConfig) -> TttDataset {
    let base: Vec<IclTask> = task
        .train
        .iter()
        .enumerate()
        .map(|(j, ex)| IclTask { demos: Vec::new(), probe: ex.clone(), loo_index: j, perm_index: 0 })
        .collect();
    build_dataset(task, cfg, base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterScope {
    PerTask,
    Shared,
}

/// Hyperparameters handed to the external trainer alongside each record
/// file. The defaults mirror the adapter configuration the pipeline is
/// tuned for: rank-128 low-rank adapters on attention q/v, MLP, and output
/// projections, AdamW, 2 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerManifest {
    pub adapter_scope: AdapterScope,
    pub rank: u32,
    pub alpha: u32,
    pub lr: f64,
    pub epochs: u32,
    pub batch_size: u32,
    pub optimizer: String,
    pub target_layers: Vec<String>,
    pub quantized: bool,
}

impl Default for TrainerManifest {
    fn default() -> Self {
        TrainerManifest {
            adapter_scope: AdapterScope::PerTask,
            rank: 128,
            alpha: 16,
            lr: 1e-4,
            epochs: 2,
            batch_size: 2,
            optimizer: "adamw".into(),
            target_layers: vec!["attention_qv".into(), "mlp".into(), "output".into()],
            quantized: false,
        }
    }
}

/// Writes record files plus manifests. Per-task scope emits one
/// `<task_id>.jsonl` / `<task_id>.manifest.json` pair per dataset; shared
/// scope concatenates everything into a single pair.
pub fn emit_training_bundle(
    datasets: &[TttDataset],
    manifest: &TrainerManifest,
    out_dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let write_pair = |stem: &str, records: &[TttRecord], written: &mut Vec<PathBuf>| -> std::io::Result<()> {
        let records_path = out_dir.join(format!("{stem}.jsonl"));
        let mut f = std::fs::File::create(&records_path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", records_path.display())))?;
        f.write_all(&write_jsonl(records))?;
        written.push(records_path);
        let manifest_path = out_dir.join(format!("{stem}.manifest.json"));
        let body = serde_json::to_vec_pretty(manifest).expect("manifest serialization");
        std::fs::write(&manifest_path, body)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", manifest_path.display())))?;
        written.push(manifest_path);
        Ok(())
    };
    match manifest.adapter_scope {
        AdapterScope::PerTask => {
            for ds in datasets {
                write_pair(&ds.task_id, &ds.records, &mut written)?;
            }
        }
        AdapterScope::Shared => {
            let all: Vec<TttRecord> = datasets.iter().flat_map(|d| d.records.clone()).collect();
            write_pair("shared", &all, &mut written)?;
        }
    }
    Ok(written)
}
