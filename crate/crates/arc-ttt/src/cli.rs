//! Command-line front end. One root seed governs a run; every stage
//! derives its own stream from it, so reruns with the same arguments are
//! byte-identical. The resolved pipeline configuration is fingerprinted
//! and embedded in every output, independent of which subcommand produced
//! it.

use crate::codec::{parse_arc_json, write_jsonl, LossMode};
use crate::eval::{
    evaluate_from_lines, load_dev80, render_task_image, AttemptPairing, EvalConfig, EvalReport,
};
use crate::ft_data::{build_ft_dataset, read_pools, FtConfig};
use crate::grid::{Split, Task, TaskSet};
use crate::inference::{CandidateLine, InferenceConfig, InferenceError};
use crate::predictor::{HttpConfig, HttpPredictor, MockPredictor, Predictor};
use crate::transform::{self, Axis, Transform};
use crate::ttt_data::{
    build_e2e_dataset, build_ttt_dataset, emit_training_bundle, AdapterScope, GenConfig,
    TrainerManifest,
};
use crate::voting::{flattened_vote, hierarchical_vote, GlobalWeighting, VoteInput};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Exit code for a run that completed with recorded per-task failures.
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Parser)]
#[command(name = "arc-ttt", about = "Test-time-training data pipeline for ARC grid tasks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate per-task training datasets with geometric augmentations.
    TttData(TttDataArgs),
    /// Synthesize fine-tuning records from example pools.
    FtData(FtDataArgs),
    /// Run augmented inference and dump candidate grids.
    Infer(InferArgs),
    /// Vote over a candidate dump and emit attempt grids.
    Vote(VoteArgs),
    /// Score tasks end to end or from an existing candidate dump.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DataFormat {
    /// Leave-one-out in-context tasks with permuted copies.
    Icl,
    /// Zero-demonstration end-to-end records.
    E2e,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Demos,
    TestOnly,
}

impl From<LossArg> for LossMode {
    fn from(l: LossArg) -> LossMode {
        match l {
            LossArg::Demos => LossMode::Demos,
            LossArg::TestOnly => LossMode::TestOnly,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    PerTask,
    Shared,
}

#[derive(Args)]
struct TttDataArgs {
    /// Task file: ARC JSON (single task or id-keyed map).
    #[arg(long)]
    tasks: PathBuf,
    /// Output directory for record files and trainer manifests.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "icl")]
    format: DataFormat,
    /// Per-task record cap.
    #[arg(long, default_value_t = 250)]
    cap: usize,
    #[arg(long, value_enum, default_value = "demos")]
    loss: LossArg,
    /// Permuted copies per leave-one-out task (icl format only).
    #[arg(long, default_value_t = 2)]
    permutations: usize,
    #[arg(long, value_enum, default_value = "per-task")]
    adapter_scope: ScopeArg,
    /// Request quantized adapter training in the manifest.
    #[arg(long)]
    quantized: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FtDataArgs {
    /// Example pools: JSONL of {"pool_id", "input", "output"}.
    #[arg(long)]
    pools: PathBuf,
    #[arg(short = 'n', long, default_value_t = 1000)]
    records: usize,
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
    /// Per-task augmentation probability.
    #[arg(long, default_value_t = 0.3)]
    augment_probability: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PredictorKind {
    Mock,
    Http,
}

#[derive(Args)]
struct PredictorArgs {
    #[arg(long, value_enum, default_value = "mock")]
    predictor: PredictorKind,
    /// Ground-truth rule for the mock predictor: identity, rot90, rot180,
    /// rot270, fliph, flipv, transpose, or colorperm:<seed>.
    #[arg(long, default_value = "identity")]
    mock_rule: String,
    /// Completion server base URL (http predictor).
    #[arg(long, default_value = "http://127.0.0.1:8000")]
    endpoint: String,
    /// Model (or adapter) identifier sent with each request.
    #[arg(long, default_value = "default")]
    model: String,
    #[arg(long, default_value_t = 8)]
    max_in_flight: usize,
}

impl PredictorArgs {
    fn build(&self) -> Result<Box<dyn Predictor>> {
        match self.predictor {
            PredictorKind::Mock => {
                let t = parse_mock_rule(&self.mock_rule)?;
                Ok(Box::new(MockPredictor::from_transform(t)))
            }
            PredictorKind::Http => {
                let cfg = HttpConfig {
                    endpoint: self.endpoint.clone(),
                    model: self.model.clone(),
                    max_in_flight: self.max_in_flight,
                    ..HttpConfig::default()
                };
                Ok(Box::new(HttpPredictor::new(cfg)?))
            }
        }
    }

    fn describe(&self) -> String {
        match self.predictor {
            PredictorKind::Mock => format!("mock:{}", self.mock_rule),
            PredictorKind::Http => format!("http:{}:{}", self.endpoint, self.model),
        }
    }
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    tasks: PathBuf,
    /// Output JSONL of candidate lines.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    predictor: PredictorArgs,
    /// "all", "identity", or a comma list of transform names.
    #[arg(long, default_value = "all")]
    transforms: String,
    #[arg(long, default_value_t = 2)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Skip tasks already present in the output file.
    #[arg(long)]
    resume: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VoteMode {
    Hierarchical,
    Flattened,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightingArg {
    Endorsement,
    Frequency,
}

impl From<WeightingArg> for GlobalWeighting {
    fn from(w: WeightingArg) -> GlobalWeighting {
        match w {
            WeightingArg::Endorsement => GlobalWeighting::Endorsement,
            WeightingArg::Frequency => GlobalWeighting::Frequency,
        }
    }
}

#[derive(Args)]
struct VoteArgs {
    /// Candidate dump produced by `infer`.
    #[arg(long)]
    candidates: PathBuf,
    /// Output JSONL of attempts per (task, test index).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "hierarchical")]
    mode: VoteMode,
    #[arg(long, value_enum, default_value = "endorsement")]
    weighting: WeightingArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PairingArg {
    Positional,
    Independent,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    tasks: PathBuf,
    /// Restrict to the 80-task development split (all ids must be present).
    #[arg(long)]
    dev80: bool,
    /// Score an existing candidate dump instead of running inference.
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[command(flatten)]
    predictor: PredictorArgs,
    #[arg(long, default_value = "all")]
    transforms: String,
    #[arg(long, default_value_t = 2)]
    permutations: usize,
    #[arg(long, value_enum, default_value = "endorsement")]
    weighting: WeightingArg,
    #[arg(long, value_enum, default_value = "positional")]
    pairing: PairingArg,
    #[arg(long, value_enum, default_value = "table")]
    report_format: ReportFormat,
    /// Write the full report JSON here in addition to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render one PNG per task into this directory.
    #[arg(long)]
    render_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_mock_rule(rule: &str) -> Result<Transform> {
    if let Some(seed) = rule.strip_prefix("colorperm:") {
        let seed: u64 = seed.parse().context("colorperm seed must be an integer")?;
        return Ok(Transform::color_permutation(seed));
    }
    Ok(match rule {
        "identity" => Transform::Identity,
        "rot90" => Transform::Rotate(1),
        "rot180" => Transform::Rotate(2),
        "rot270" => Transform::Rotate(3),
        "fliph" => Transform::Flip(Axis::Horizontal),
        "flipv" => Transform::Flip(Axis::Vertical),
        "transpose" => Transform::Transpose,
        other => bail!("unknown mock rule {other:?}"),
    })
}

fn parse_transforms(spec: &str) -> Result<Vec<Transform>> {
    match spec {
        "all" => Ok(transform::inference_transform_set()),
        "identity" => Ok(vec![Transform::Identity]),
        list => list
            .split(',')
            .map(|name| match name.trim() {
                "identity" => Ok(Transform::Identity),
                "rot90" => Ok(Transform::Rotate(1)),
                "rot180" => Ok(Transform::Rotate(2)),
                "rot270" => Ok(Transform::Rotate(3)),
                "fliph" => Ok(Transform::Flip(Axis::Horizontal)),
                "flipv" => Ok(Transform::Flip(Axis::Vertical)),
                "transpose" => Ok(Transform::Transpose),
                other => bail!("unknown transform {other:?}"),
            })
            .collect(),
    }
}

/// The resolved settings a run depends on. Hashing this — never the
/// subcommand that invoked it — is what makes `infer`+`vote`+`eval` and a
/// direct `eval` agree on the fingerprint.
#[derive(Serialize)]
struct PipelineConfig {
    seed: u64,
    permutations: usize,
    transforms: Vec<String>,
    weighting: GlobalWeighting,
    pairing: AttemptPairing,
    predictor: String,
}

fn fingerprint<T: Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serialization");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_tasks(path: &Path) -> Result<TaskSet> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let default_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("task");
    parse_arc_json(&bytes, default_id, Split::Unknown)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Into::into)
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("building thread pool")
}

fn write_run_config(dir_or_file: &Path, body: &serde_json::Value) -> Result<()> {
    let path = if dir_or_file.is_dir() {
        dir_or_file.join("run_config.json")
    } else {
        dir_or_file.with_extension("run.json")
    };
    std::fs::write(&path, serde_json::to_vec_pretty(body)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn run_ttt_data(args: &TttDataArgs) -> Result<i32> {
    let tasks = load_tasks(&args.tasks)?;
    let cfg = GenConfig {
        cap: args.cap,
        loss_mode: args.loss.into(),
        seed: args.seed,
        permutations: args.permutations,
    };
    let pool = thread_pool(args.jobs)?;
    let datasets: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        tasks
            .tasks
            .par_iter()
            .map(|task| match args.format {
                DataFormat::Icl => build_ttt_dataset(task, &cfg),
                DataFormat::E2e => build_e2e_dataset(task, &cfg),
            })
            .collect()
    });
    let manifest = TrainerManifest {
        adapter_scope: match args.adapter_scope {
            ScopeArg::PerTask => AdapterScope::PerTask,
            ScopeArg::Shared => AdapterScope::Shared,
        },
        quantized: args.quantized,
        ..TrainerManifest::default()
    };
    let written = emit_training_bundle(&datasets, &manifest, &args.out)?;
    let fp = fingerprint(&serde_json::json!({
        "seed": args.seed,
        "cap": args.cap,
        "loss": cfg.loss_mode,
        "permutations": args.permutations,
        "format": match args.format { DataFormat::Icl => "icl", DataFormat::E2e => "e2e" },
        "manifest": manifest,
    }));
    write_run_config(&args.out, &serde_json::json!({ "fingerprint": fp }))?;
    let total: usize = datasets.iter().map(|d| d.records.len()).sum();
    let dropped: usize = datasets.iter().map(|d| d.stats.dropped_oversize).sum();
    println!(
        "wrote {} records across {} files to {} ({} oversize drops), fingerprint {}",
        total,
        written.len(),
        args.out.display(),
        dropped,
        fp
    );
    Ok(0)
}

fn run_ft_data(args: &FtDataArgs) -> Result<i32> {
    let bytes = std::fs::read(&args.pools).with_context(|| format!("reading {}", args.pools.display()))?;
    let pools = read_pools(&bytes)?;
    let cfg = FtConfig {
        records: args.records,
        augment_probability: args.augment_probability,
        seed: args.seed,
    };
    let dataset = build_ft_dataset(&pools, &cfg)?;
    std::fs::write(&args.out, write_jsonl(&dataset.records))
        .with_context(|| format!("writing {}", args.out.display()))?;
    let fp = fingerprint(&serde_json::json!({
        "seed": args.seed,
        "records": args.records,
        "augment_probability": args.augment_probability,
    }));
    write_run_config(&args.out, &serde_json::json!({ "fingerprint": fp, "stats": dataset.stats }))?;
    println!(
        "wrote {} records to {} (augmented {}, skipped oversize {}), fingerprint {}",
        dataset.records.len(),
        args.out.display(),
        dataset.stats.applied,
        dataset.stats.skipped_oversize,
        fp
    );
    Ok(0)
}

/// Runs inference for every task, in parallel but emitted in input order.
/// A dead predictor on one task records a failure marker and moves on.
fn infer_all(
    tasks: &[Task],
    predictor: &dyn Predictor,
    cfg: &InferenceConfig,
    pool: &rayon::ThreadPool,
) -> (Vec<CandidateLine>, Vec<String>) {
    let results: Vec<Result<Vec<CandidateLine>, InferenceError>> = pool.install(|| {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(|task| crate::eval::dump_task_candidates(task, predictor, cfg))
            .collect()
    });
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for (task, result) in tasks.iter().zip(results) {
        match result {
            Ok(mut task_lines) => lines.append(&mut task_lines),
            Err(e) => {
                eprintln!("task {} failed: {e}", task.id);
                failed.push(task.id.clone());
            }
        }
    }
    (lines, failed)
}

fn write_candidate_lines(path: &Path, lines: &[CandidateLine]) -> Result<()> {
    let mut out = Vec::new();
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        out.push(b'\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn read_candidate_lines(path: &Path) -> Result<Vec<CandidateLine>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn run_infer(args: &InferArgs) -> Result<i32> {
    let tasks = load_tasks(&args.tasks)?;
    let cfg = InferenceConfig {
        permutations: args.permutations,
        transforms: parse_transforms(&args.transforms)?,
        seed: args.seed,
    };
    let predictor = args.predictor.build()?;

    let mut lines = Vec::new();
    let mut done: BTreeSet<String> = BTreeSet::new();
    if args.resume && args.out.exists() {
        lines = read_candidate_lines(&args.out)?;
        done = lines.iter().map(|l| l.task_id.clone()).collect();
    }
    let pending: Vec<Task> =
        tasks.tasks.iter().filter(|t| !done.contains(&t.id)).cloned().collect();
    let pool = thread_pool(args.jobs)?;
    let (new_lines, failed) = infer_all(&pending, predictor.as_ref(), &cfg, &pool);
    lines.extend(new_lines);
    write_candidate_lines(&args.out, &lines)?;

    let fp = fingerprint(&PipelineConfig {
        seed: args.seed,
        permutations: args.permutations,
        transforms: cfg.transforms.iter().map(Transform::name).collect(),
        weighting: GlobalWeighting::default(),
        pairing: AttemptPairing::default(),
        predictor: args.predictor.describe(),
    });
    write_run_config(
        &args.out,
        &serde_json::json!({ "fingerprint": fp, "failed_tasks": failed }),
    )?;
    println!(
        "wrote {} candidate lines to {} ({} failed tasks), fingerprint {}",
        lines.len(),
        args.out.display(),
        failed.len(),
        fp
    );
    Ok(if failed.is_empty() { 0 } else { EXIT_PARTIAL })
}

#[derive(Serialize)]
struct AttemptLine {
    task_id: String,
    test_index: usize,
    attempts: Vec<Vec<Vec<u8>>>,
}

fn run_vote(args: &VoteArgs) -> Result<i32> {
    let lines = read_candidate_lines(&args.candidates)?;
    let mut keys: Vec<(String, usize)> = Vec::new();
    for l in &lines {
        let key = (l.task_id.clone(), l.test_index);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::new();
    for (task_id, test_index) in keys {
        let inputs: Vec<VoteInput> = lines
            .iter()
            .filter(|l| l.task_id == task_id && l.test_index == test_index)
            .filter_map(|l| {
                l.grid.as_ref().map(|m| VoteInput {
                    transform: l.transform.clone(),
                    grid: crate::grid::Grid::new(m).expect("dumped grid is valid"),
                })
            })
            .collect();
        let outcome = match args.mode {
            VoteMode::Hierarchical => hierarchical_vote(&inputs, args.weighting.into()),
            VoteMode::Flattened => flattened_vote(&inputs),
        };
        serde_json::to_writer(
            &mut out,
            &AttemptLine {
                task_id,
                test_index,
                attempts: outcome.attempts.iter().map(|g| g.to_matrix()).collect(),
            },
        )?;
        out.push(b'\n');
    }
    std::fs::write(&args.out, out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote attempts to {}", args.out.display());
    Ok(0)
}

fn run_eval(args: &EvalArgs) -> Result<i32> {
    let mut tasks = load_tasks(&args.tasks)?;
    if args.dev80 {
        tasks = load_dev80(&tasks)?;
    }
    let transforms = parse_transforms(&args.transforms)?;
    let cfg = EvalConfig {
        inference: InferenceConfig {
            permutations: args.permutations,
            transforms: transforms.clone(),
            seed: args.seed,
        },
        weighting: args.weighting.into(),
        pairing: match args.pairing {
            PairingArg::Positional => AttemptPairing::Positional,
            PairingArg::Independent => AttemptPairing::Independent,
        },
        fingerprint: fingerprint(&PipelineConfig {
            seed: args.seed,
            permutations: args.permutations,
            transforms: transforms.iter().map(Transform::name).collect(),
            weighting: args.weighting.into(),
            pairing: match args.pairing {
                PairingArg::Positional => AttemptPairing::Positional,
                PairingArg::Independent => AttemptPairing::Independent,
            },
            predictor: args.predictor.describe(),
        }),
    };

    let report: EvalReport = match &args.candidates {
        Some(path) => {
            let lines = read_candidate_lines(path)?;
            evaluate_from_lines(&lines, &tasks, &cfg, Vec::new())?
        }
        None => {
            let predictor = args.predictor.build()?;
            let pool = thread_pool(args.jobs)?;
            let (lines, failed) = infer_all(&tasks.tasks, predictor.as_ref(), &cfg.inference, &pool);
            evaluate_from_lines(&lines, &tasks, &cfg, failed)?
        }
    };

    match args.report_format {
        ReportFormat::Table => print!("{}", report.to_table()),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_vec_pretty(&report)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &args.render_dir {
        std::fs::create_dir_all(dir)?;
        for task in &tasks.tasks {
            let png = render_task_image(task, &[], 8);
            std::fs::write(dir.join(format!("{}.png", task.id)), png)?;
        }
    }
    Ok(if report.failed_tasks.is_empty() { 0 } else { EXIT_PARTIAL })
}

/// Parses `args` (including the program name) and runs the selected
/// subcommand, returning the process exit code.
pub fn run_from<I, T>(args: I) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match &cli.command {
        Command::TttData(a) => run_ttt_data(a),
        Command::FtData(a) => run_ft_data(a),
        Command::Infer(a) => run_infer(a),
        Command::Vote(a) => run_vote(a),
        Command::Eval(a) => run_eval(a),
    }
}
