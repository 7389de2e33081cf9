//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured evidence. Everything runs against the mock predictor or an
//! in-process stub server; no network or GPU required.

use arc_ttt::codec::{
    encode_ttt_prompt, parse_grid_text, read_jsonl, render_grid_text, write_jsonl, LossMode,
    SegmentKind, TttRecord,
};
use arc_ttt::eval::{
    evaluate_from_lines, load_dev80, AttemptPairing, EvalConfig, Hardness, DEV80_MANIFEST,
};
use arc_ttt::ft_data::{maybe_augment, sample_ft_task, AugmentStats, ExamplePool};
use arc_ttt::grid::{grids_equal, Example, ExamplePair, Grid, Split, Task, TaskSet};
use arc_ttt::inference::{generate_candidates, CandidateLine, InferenceConfig};
use arc_ttt::predictor::{HttpConfig, HttpPredictor, MockPredictor, Predictor};
use arc_ttt::transform::{apply_to_grid, inference_transform_set, invert, Transform};
use arc_ttt::ttt_data::{build_e2e_dataset, build_ttt_dataset, GenConfig};
use arc_ttt::voting::{
    flattened_vote, hierarchical_vote, oracle_select, GlobalWeighting, VoteInput, IDENTITY_NAME,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn g(m: &[Vec<u8>]) -> Grid {
    Grid::new(m).unwrap()
}

fn random_grid(rng: &mut ChaCha8Rng, max_dim: usize) -> Grid {
    let r = rng.gen_range(1..=max_dim);
    let c = rng.gen_range(1..=max_dim);
    let m: Vec<Vec<u8>> =
        (0..r).map(|_| (0..c).map(|_| rng.gen_range(0..=9)).collect()).collect();
    g(&m)
}

#[test]
fn a1_transform_roundtrip() {
    let transforms = inference_transform_set();
    assert_eq!(transforms.len(), 6);
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut checked = 0usize;
    for _ in 0..1000 {
        let grid = random_grid(&mut rng, 30);
        for t in &transforms {
            let inverse = invert(t).expect("inference transforms are invertible");
            let roundtrip = apply_to_grid(&inverse, &apply_to_grid(t, &grid).unwrap()).unwrap();
            assert!(grids_equal(&roundtrip, &grid), "{t:?} failed roundtrip");
            checked += 1;
        }
    }
    println!("A1 PASS: {checked} apply-then-inverse roundtrips across 6 transforms, 0 failures");
}

fn k4_task() -> Task {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    let train = (0..4)
        .map(|_| Example { input: random_grid(&mut rng, 4), output: random_grid(&mut rng, 4) })
        .collect();
    Task::new(
        "k4",
        train,
        vec![ExamplePair { input: random_grid(&mut rng, 4), output: Some(random_grid(&mut rng, 4)) }],
    )
    .unwrap()
}

#[test]
fn a2_ttt_dataset_counts() {
    let task = k4_task();
    let cfg = GenConfig::default();
    let runs: Vec<Vec<u8>> =
        (0..3).map(|_| write_jsonl(&build_ttt_dataset(&task, &cfg).records)).collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[1], runs[2]);

    let ds = build_ttt_dataset(&task, &cfg);
    // K=4 leave-one-out x (1 original + 2 permuted copies) x 21 transforms.
    assert_eq!(ds.stats.generated, 252);
    assert_eq!(ds.records.len(), 252usize.min(cfg.cap));
    assert_eq!(ds.records.len(), 250);
    let identity = ds.records.iter().filter(|r| r.source.transform == "Identity").count();
    assert_eq!(identity, 12, "all identity records retained under the cap");

    let tight = GenConfig { cap: 20, ..GenConfig::default() };
    let small = build_ttt_dataset(&task, &tight);
    assert_eq!(small.records.len(), 20);
    assert_eq!(
        small.records.iter().filter(|r| r.source.transform == "Identity").count(),
        12,
        "identity records preferred when capping"
    );
    println!(
        "A2 PASS: K=4 yields min(252, cap) records (250 at default cap, 20 at cap=20), \
         identity retained preferentially, 3 runs byte-identical"
    );
}

/// Re-derives the output-grid spans of a prompt by scanning for the
/// `output:\n` layout markers, independently of the codec's segment
/// bookkeeping.
fn scan_output_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut at = 0;
    while let Some(pos) = text[at..].find("output:\n") {
        let start = at + pos + "output:\n".len();
        let end = match text[start..].find("\ninput:") {
            Some(p) => start + p,
            None => text.len() - 1, // final grid is followed by one newline
        };
        spans.push((start, end));
        at = end;
    }
    spans
}

fn verify_record_spans(rec: &TttRecord) {
    let outputs = scan_output_spans(&rec.prompt);
    let demos = rec.prompt.matches("input:\n").count() - 1;
    assert_eq!(outputs.len(), demos + 1, "one output grid per pair");
    let expected: Vec<(usize, usize)> = match rec.loss_mode {
        // Demo outputs from the second demonstration onward, plus the test
        // output.
        LossMode::Demos => outputs[..demos].iter().skip(1).chain(&outputs[demos..]).copied().collect(),
        // The test output alone.
        LossMode::TestOnly => vec![outputs[demos]],
    };
    assert_eq!(rec.loss_spans, expected, "spans for {:?} record of {}", rec.loss_mode, rec.task_id);
    for &(s, e) in &rec.loss_spans {
        parse_grid_text(&rec.prompt[s..e]).expect("every loss span is a grid");
    }
}

#[test]
fn a3_loss_mask_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    let mut verified = 0usize;
    for i in 0..5 {
        let k = rng.gen_range(1..=5);
        let train = (0..k)
            .map(|_| Example { input: random_grid(&mut rng, 5), output: random_grid(&mut rng, 5) })
            .collect();
        let task = Task::new(
            format!("t{i}"),
            train,
            vec![ExamplePair { input: random_grid(&mut rng, 5), output: Some(random_grid(&mut rng, 5)) }],
        )
        .unwrap();
        for loss_mode in [LossMode::Demos, LossMode::TestOnly] {
            let cfg = GenConfig { loss_mode, seed: i, ..GenConfig::default() };
            for rec in build_ttt_dataset(&task, &cfg)
                .records
                .iter()
                .chain(build_e2e_dataset(&task, &cfg).records.iter())
            {
                verify_record_spans(rec);
                verified += 1;
            }
        }
    }
    println!("A3 PASS: {verified} records satisfy the loss-span invariants under an independent scanner");
}

#[test]
fn a4_end_to_end_oracle_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4);
    let mut tasks = Vec::new();
    let mut lines: Vec<CandidateLine> = Vec::new();
    for i in 0..50u64 {
        // Cellwise rules commute with the geometric view transforms, so
        // every inverse-mapped candidate must equal the truth.
        let rule = Transform::color_permutation(i);
        let mk_pair = |rng: &mut ChaCha8Rng| {
            let input = random_grid(rng, 6);
            let output = apply_to_grid(&rule, &input).unwrap();
            (input, output)
        };
        let train = (0..3)
            .map(|_| {
                let (input, output) = mk_pair(&mut rng);
                Example { input, output }
            })
            .collect();
        let (test_in, truth) = mk_pair(&mut rng);
        let task = Task::new(
            format!("oracle-{i}"),
            train,
            vec![ExamplePair { input: test_in, output: Some(truth.clone()) }],
        )
        .unwrap();
        let predictor = MockPredictor::from_transform(rule);
        let set = generate_candidates(&task, 0, &predictor, &InferenceConfig::default()).unwrap();
        assert_eq!(set.candidates.len(), 12, "n * |T| candidates");
        for c in &set.candidates {
            assert!(grids_equal(&c.grid, &truth), "candidate from {} != truth", c.transform.name());
        }
        lines.extend(set.to_lines());
        tasks.push(task);
    }
    let set = TaskSet::new(Split::Unknown, tasks).unwrap();
    let report = evaluate_from_lines(&lines, &set, &EvalConfig::default(), Vec::new()).unwrap();
    for mode in ["hierarchical", "flattened", "oracle"] {
        let col = report.column(mode).unwrap();
        assert_eq!(col.strict_accuracy, 1.0, "{mode} strict pass@2");
    }
    println!(
        "A4 PASS: 50 synthetic cellwise-rule tasks, all 12 candidates equal truth per task, \
         strict pass@2 = 100% for hierarchical, flattened, and oracle"
    );
}

// ---------------------------------------------------------------------
// A5: independent brute-force implementation of the two-stage voting
// prose, written against plain vectors rather than the library's tally
// maps.

fn bf_modal_shape(grids: &[Grid]) -> (usize, usize) {
    let mut best: Option<((usize, usize), usize)> = None;
    for grid in grids {
        let shape = (grid.rows(), grid.cols());
        let count = grids.iter().filter(|o| (o.rows(), o.cols()) == shape).count();
        best = Some(match best {
            None => (shape, count),
            Some((bs, bc)) => {
                if count > bc || (count == bc && shape < bs) {
                    (shape, count)
                } else {
                    (bs, bc)
                }
            }
        });
    }
    best.expect("nonempty group").0
}

fn bf_majority<T: Ord + Clone>(items: &[T]) -> T {
    let mut best: Option<(&T, usize)> = None;
    for item in items {
        let count = items.iter().filter(|o| *o == item).count();
        best = Some(match best {
            None => (item, count),
            Some((bi, bc)) => {
                if count > bc || (count == bc && item < bi) {
                    (item, count)
                } else {
                    (bi, bc)
                }
            }
        });
    }
    best.expect("nonempty items").0.clone()
}

fn bf_row_majority(group: &[Grid]) -> Grid {
    let (rows, cols) = bf_modal_shape(group);
    let pool: Vec<&Grid> = group.iter().filter(|g| (g.rows(), g.cols()) == (rows, cols)).collect();
    let m: Vec<Vec<u8>> = (0..rows)
        .map(|r| {
            let rows_at: Vec<Vec<u8>> = pool
                .iter()
                .map(|g| g.row(r).iter().map(|c| c.value()).collect())
                .collect();
            bf_majority(&rows_at)
        })
        .collect();
    let _ = cols;
    g(&m)
}

fn bf_col_majority(group: &[Grid]) -> Grid {
    let (rows, cols) = bf_modal_shape(group);
    let pool: Vec<&Grid> = group.iter().filter(|g| (g.rows(), g.cols()) == (rows, cols)).collect();
    let columns: Vec<Vec<u8>> = (0..cols)
        .map(|c| {
            let cols_at: Vec<Vec<u8>> = pool
                .iter()
                .map(|g| g.column(c).iter().map(|x| x.value()).collect())
                .collect();
            bf_majority(&cols_at)
        })
        .collect();
    let m: Vec<Vec<u8>> = (0..rows).map(|r| columns.iter().map(|col| col[r]).collect()).collect();
    g(&m)
}

/// Top-3 most frequent within a group, supplemented by the row then column
/// majorities when fewer than 3 distinct predictions exist.
fn bf_intra(group: &[Grid]) -> Vec<Grid> {
    if group.is_empty() {
        return Vec::new();
    }
    let mut tally: Vec<(Grid, usize)> = Vec::new();
    for grid in group {
        match tally.iter_mut().find(|(x, _)| grids_equal(x, grid)) {
            Some(e) => e.1 += 1,
            None => tally.push((grid.clone(), 1)),
        }
    }
    tally.sort_by(|a, b| {
        b.1.cmp(&a.1).then_with(|| render_grid_text(&a.0).cmp(&render_grid_text(&b.0)))
    });
    let distinct = tally.len();
    let mut selected: Vec<Grid> = tally.into_iter().take(3).map(|(grid, _)| grid).collect();
    if distinct < 3 {
        for supplement in [bf_row_majority(group), bf_col_majority(group)] {
            if selected.len() < 3 && !selected.iter().any(|s| grids_equal(s, &supplement)) {
                selected.push(supplement);
            }
        }
    }
    selected
}

/// Each transform endorses each of its selected grids once; rank by
/// endorsement count, identity priority on exact ties, then rendered-grid
/// order; top 2.
fn bf_hierarchical(candidates: &[VoteInput]) -> Vec<Grid> {
    let mut names: Vec<&str> = candidates.iter().map(|c| c.transform.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let mut scored: Vec<(Grid, usize, bool)> = Vec::new();
    for name in names {
        let group: Vec<Grid> = candidates
            .iter()
            .filter(|c| c.transform == name)
            .map(|c| c.grid.clone())
            .collect();
        for grid in bf_intra(&group) {
            match scored.iter_mut().find(|(x, _, _)| grids_equal(x, &grid)) {
                Some(e) => {
                    e.1 += 1;
                    e.2 |= name == IDENTITY_NAME;
                }
                None => scored.push((grid, 1, name == IDENTITY_NAME)),
            }
        }
    }
    scored.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(b.2.cmp(&a.2))
            .then_with(|| render_grid_text(&a.0).cmp(&render_grid_text(&b.0)))
    });
    scored.into_iter().take(2).map(|(grid, _, _)| grid).collect()
}

fn check_against_bf(candidates: &[VoteInput]) {
    let staged = hierarchical_vote(candidates, GlobalWeighting::Endorsement).attempts;
    let brute = bf_hierarchical(candidates);
    assert_eq!(staged, brute, "divergence on {candidates:?}");
}

#[test]
fn a5_voting_brute_force_equivalence() {
    // The literal exhaustive range (6 groups x <=4 members over 3 grids =
    // 35^6 ~ 1.8e9 candidate sets) is not computable in the time budget.
    // Coverage instead: exhaustive over 3 groups (35^3 = 42,875 sets, one
    // group being Identity), a seeded 50,000-set random sweep over the
    // full 6-group range with mixed shapes, and constructed tie cases.
    let grids = [g(&[vec![0]]), g(&[vec![1]]), g(&[vec![2]])];
    let multisets: Vec<Vec<Grid>> = {
        let mut all = Vec::new();
        for a in 0..=4usize {
            for b in 0..=4 - a {
                for c in 0..=4 - a - b {
                    let mut members = Vec::new();
                    members.extend(std::iter::repeat(grids[0].clone()).take(a));
                    members.extend(std::iter::repeat(grids[1].clone()).take(b));
                    members.extend(std::iter::repeat(grids[2].clone()).take(c));
                    all.push(members);
                }
            }
        }
        all
    };
    assert_eq!(multisets.len(), 35);
    let group_names = ["Identity", "Rotate(90)", "Transpose()"];
    let mut exhaustive = 0usize;
    for i in 0..35 {
        for j in 0..35 {
            for k in 0..35 {
                let mut candidates = Vec::new();
                for (name, idx) in group_names.iter().zip([i, j, k]) {
                    for grid in &multisets[idx] {
                        candidates.push(VoteInput { transform: name.to_string(), grid: grid.clone() });
                    }
                }
                check_against_bf(&candidates);
                exhaustive += 1;
            }
        }
    }
    assert_eq!(exhaustive, 42_875);

    // Random sweep over the full 6-group range, including mixed shapes so
    // the modal-shape restriction is exercised.
    let pools: [Vec<Grid>; 2] = [
        vec![g(&[vec![0]]), g(&[vec![1]]), g(&[vec![2]])],
        vec![g(&[vec![1, 2], vec![3, 4]]), g(&[vec![4, 3], vec![2, 1]]), g(&[vec![5, 5]])],
    ];
    let names: Vec<String> = inference_transform_set().iter().map(Transform::name).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let sweep = 50_000usize;
    for _ in 0..sweep {
        let pool = &pools[rng.gen_range(0..2)];
        let mut candidates = Vec::new();
        for name in &names {
            for _ in 0..rng.gen_range(0..=4usize) {
                candidates.push(VoteInput {
                    transform: name.clone(),
                    grid: pool[rng.gen_range(0..pool.len())].clone(),
                });
            }
        }
        candidates.shuffle(&mut rng); // arrival order must not matter
        check_against_bf(&candidates);
    }

    // Constructed tie-break and identity-priority cases.
    let (a, b, c) = (grids[0].clone(), grids[1].clone(), grids[2].clone());
    let mk = |items: &[(&str, &Grid)]| -> Vec<VoteInput> {
        items
            .iter()
            .map(|(t, grid)| VoteInput { transform: t.to_string(), grid: (*grid).clone() })
            .collect()
    };
    // All count 2, identity endorses B and C: attempts [B, C].
    let spec_example = mk(&[
        ("Rotate(90)", &a),
        ("Rotate(90)", &b),
        ("Flip(0)", &a),
        ("Flip(0)", &c),
        ("Identity", &b),
        ("Identity", &c),
    ]);
    assert_eq!(
        hierarchical_vote(&spec_example, GlobalWeighting::Endorsement).attempts,
        vec![b.clone(), c.clone()]
    );
    check_against_bf(&spec_example);
    // Exact tie, identity priority beats lexicographic order.
    let priority = mk(&[("Identity", &c), ("Rotate(90)", &a)]);
    assert_eq!(
        hierarchical_vote(&priority, GlobalWeighting::Endorsement).attempts,
        vec![c.clone(), a.clone()]
    );
    check_against_bf(&priority);
    // Exact tie, no identity involvement: lexicographic on rendered grid.
    let lex = mk(&[("Rotate(90)", &b), ("Transpose()", &a)]);
    assert_eq!(hierarchical_vote(&lex, GlobalWeighting::Endorsement).attempts, vec![a, b]);
    check_against_bf(&lex);

    println!(
        "A5 PASS: staged voting == brute force on 42,875 exhaustive 3-group sets, \
         {sweep} random 6-group sets (mixed shapes), and constructed tie cases \
         (full 35^6 range reduced; see decisions ledger)"
    );
}

#[test]
fn a6_noisy_predictor_dominance() {
    let names: Vec<String> = inference_transform_set().iter().map(Transform::name).collect();
    let mut rates = std::collections::BTreeMap::new();
    for &p in &[0.3f64, 0.5, 0.8] {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA6 + (p * 10.0) as u64);
        let (mut oracle, mut hier, mut flat, mut vanilla) = (0u32, 0u32, 0u32, 0u32);
        let trials = 500;
        for _ in 0..trials {
            let truth = {
                let m: Vec<Vec<u8>> =
                    (0..3).map(|_| (0..3).map(|_| rng.gen_range(0..=9)).collect()).collect();
                g(&m)
            };
            let mut candidates = Vec::new();
            let mut vanilla_hit = false;
            for name in &names {
                for perm in 0..2 {
                    let correct = rng.gen::<f64>() < p;
                    let grid = if correct {
                        truth.clone()
                    } else {
                        // Distinct garbage of the same shape.
                        loop {
                            let m: Vec<Vec<u8>> = (0..3)
                                .map(|_| (0..3).map(|_| rng.gen_range(0..=9)).collect())
                                .collect();
                            let garbage = g(&m);
                            if !grids_equal(&garbage, &truth) {
                                break garbage;
                            }
                        }
                    };
                    if name == IDENTITY_NAME && perm == 0 {
                        vanilla_hit = correct;
                    }
                    candidates.push(VoteInput { transform: name.clone(), grid });
                }
            }
            let hit = |attempts: &[Grid]| attempts.iter().any(|a| grids_equal(a, &truth));
            if oracle_select(&candidates, &truth) {
                oracle += 1;
            }
            if hit(&hierarchical_vote(&candidates, GlobalWeighting::Endorsement).attempts) {
                hier += 1;
            }
            if hit(&flattened_vote(&candidates).attempts) {
                flat += 1;
            }
            if vanilla_hit {
                vanilla += 1;
            }
        }
        assert!(oracle >= hier, "p={p}: oracle {oracle} < hierarchical {hier}");
        assert!(oracle >= flat, "p={p}: oracle {oracle} < flattened {flat}");
        rates.insert(
            format!("{p}"),
            (f64::from(oracle), f64::from(hier), f64::from(flat), f64::from(vanilla)),
        );
    }
    let (_, hier, _, vanilla) = rates["0.5"];
    assert!(
        (hier - vanilla) / 500.0 >= 0.05,
        "hierarchical {hier} not >= vanilla {vanilla} + 5 points at p=0.5"
    );
    let summary: Vec<String> = rates
        .iter()
        .map(|(p, (o, h, f, v))| format!("p={p}: oracle {o} >= hier {h} >= |flat {f}|, vanilla {v}"))
        .collect();
    println!("A6 PASS: dominance holds over 500 seeded trials per p ({})", summary.join("; "));
}

#[test]
fn a7_ft_augmentation_statistics() {
    let examples: Vec<Example> = (0..10)
        .map(|i| Example {
            input: g(&[vec![i as u8 % 10, 1], vec![2, 3]]),
            output: g(&[vec![3, 2], vec![1, i as u8 % 10]]),
        })
        .collect();
    let pool = ExamplePool::new("p", examples).unwrap();

    let mut stats = AugmentStats::default();
    for i in 0..10_000usize {
        let mut task = sample_ft_task(&pool, 0xA7, i).unwrap();
        task.id = format!("a7-{i}");
        maybe_augment(&task, 0.3, 0xA7, &mut stats);
    }
    let rate = (stats.applied + stats.skipped_oversize) as f64 / stats.attempted as f64;
    assert!((0.28..=0.32).contains(&rate), "augmentation rate {rate}");

    let mut k_counts = [0usize; 6];
    for i in 0..10_000usize {
        let k = sample_ft_task(&pool, 0xA7 + 1, i).unwrap().train.len();
        k_counts[k - 2] += 1;
    }
    // Binomial bin: n=10000, q=1/6 -> mean 1666.7, sigma ~ 37.3.
    let mean = 10_000.0 / 6.0;
    let sigma = (10_000.0_f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
    for (i, &count) in k_counts.iter().enumerate() {
        let dev = (count as f64 - mean).abs();
        assert!(dev <= 3.0 * sigma, "K={} bin {} deviates {:.1} > 3 sigma", i + 2, count, dev);
    }
    println!(
        "A7 PASS: 10k draws, augmentation rate {rate:.4} in [0.28, 0.32]; \
         K bins {k_counts:?} all within 3 sigma of uniform"
    );
}

#[test]
fn a8_serialization_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA8);
    for _ in 0..10_000 {
        let grid = random_grid(&mut rng, 30);
        let parsed = parse_grid_text(&render_grid_text(&grid)).unwrap();
        assert!(grids_equal(&parsed, &grid));
    }

    // JSONL byte stability through a full write-read-write cycle.
    let task = k4_task();
    let records = build_ttt_dataset(&task, &GenConfig::default()).records;
    let bytes = write_jsonl(&records);
    let reread = read_jsonl(&bytes).unwrap();
    assert_eq!(reread, records);
    assert_eq!(write_jsonl(&reread), bytes);

    // Prompt span reconstruction: every segment slices back to its grid.
    let mut segments_checked = 0usize;
    for _ in 0..50 {
        let demos: Vec<Example> = (0..rng.gen_range(1..4))
            .map(|_| Example { input: random_grid(&mut rng, 5), output: random_grid(&mut rng, 5) })
            .collect();
        let probe = Example { input: random_grid(&mut rng, 5), output: random_grid(&mut rng, 5) };
        let (prompt, _) = encode_ttt_prompt(&demos, &probe, LossMode::Demos);
        let mut expected: Vec<(SegmentKind, &Grid)> = Vec::new();
        for d in &demos {
            expected.push((SegmentKind::DemoInput, &d.input));
            expected.push((SegmentKind::DemoOutput, &d.output));
        }
        expected.push((SegmentKind::TestInput, &probe.input));
        expected.push((SegmentKind::TestOutput, &probe.output));
        let mut cursor = 0;
        for seg in &prompt.segments {
            assert_eq!(seg.start, cursor, "segments are contiguous");
            cursor = seg.end;
            if seg.kind == SegmentKind::Delimiter {
                continue;
            }
            let (kind, grid) = expected.remove(0);
            assert_eq!(seg.kind, kind);
            assert!(grids_equal(&parse_grid_text(prompt.slice(seg)).unwrap(), grid));
            segments_checked += 1;
        }
        assert_eq!(cursor, prompt.text.len());
        assert!(expected.is_empty());
    }
    println!(
        "A8 PASS: 10k grid-text roundtrips exact; JSONL write-read-write byte-stable; \
         {segments_checked} prompt segments reconstructed exactly"
    );
}

// Minimal single-threaded HTTP stub: answers each POST in order with the
// next canned body, recording any wire-contract violation.
fn spawn_stub(
    bodies: Vec<String>,
) -> (String, std::sync::Arc<std::sync::Mutex<Vec<String>>>) {
    use std::io::{Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let violations = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    let seen = violations.clone();
    std::thread::spawn(move || {
        for body in bodies {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let request = loop {
                let n = stream.read(&mut chunk).unwrap_or(0);
                if n == 0 {
                    break String::from_utf8_lossy(&buf).into_owned();
                }
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length: usize = text
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                        .unwrap_or(0);
                    if buf.len() >= header_end + 4 + content_length {
                        break text.into_owned();
                    }
                }
            };
            let complain = |msg: String| seen.lock().unwrap().push(msg);
            match request.find("\r\n\r\n").map(|i| &request[i + 4..]) {
                Some(payload) => match serde_json::from_str::<serde_json::Value>(payload) {
                    Ok(v) => {
                        if v["temperature"] != 0 {
                            complain(format!("temperature != 0: {}", v["temperature"]));
                        }
                        if !v["prompt"].is_string() || !v["model"].is_string() {
                            complain("prompt/model not strings".into());
                        }
                        if !v["max_tokens"].as_u64().is_some_and(|m| m > 0) {
                            complain("max_tokens missing or zero".into());
                        }
                    }
                    Err(e) => complain(format!("request body not JSON: {e}")),
                },
                None => complain("no request body".into()),
            }
            if !request.starts_with("POST ") || !request.contains("/completions") {
                complain(format!("unexpected request line: {}", request.lines().next().unwrap_or("")));
            }
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (format!("http://{addr}"), violations)
}

#[test]
fn a9_wire_contract() {
    let good = serde_json::json!({"choices": [{"text": render_grid_text(&g(&[vec![3]]))}]}).to_string();
    let malformed = "this is not the documented response shape".to_string();
    // 12 requests for one test input: alternate good and malformed bodies.
    let bodies: Vec<String> =
        (0..12).map(|i| if i % 2 == 0 { good.clone() } else { malformed.clone() }).collect();
    let (endpoint, violations) = spawn_stub(bodies);

    let predictor = HttpPredictor::new(HttpConfig {
        endpoint,
        retries: 0,
        timeout_secs: 10,
        ..HttpConfig::default()
    })
    .unwrap();
    let task = Task::new(
        "wire",
        vec![Example { input: g(&[vec![1, 2]]), output: g(&[vec![2, 1]]) }],
        vec![ExamplePair { input: g(&[vec![3, 4]]), output: None }],
    )
    .unwrap();
    let set = generate_candidates(&task, 0, &predictor, &InferenceConfig::default()).unwrap();
    assert_eq!(set.candidates.len() + set.dropped.len(), 12);
    assert_eq!(set.candidates.len(), 6, "good bodies become candidates");
    assert_eq!(set.dropped.len(), 6, "malformed bodies degrade to dropped predictions");
    for d in &set.dropped {
        assert!(d.failure.contains("malformed"), "dropped reason recorded: {}", d.failure);
    }
    let seen = violations.lock().unwrap();
    assert!(seen.is_empty(), "wire-contract violations: {seen:?}");
    println!(
        "A9 PASS: 12 requests all carried temperature 0 and the documented JSON shape; \
         6 malformed responses dropped without a crash"
    );
}

#[test]
fn a10_dev80_manifest() {
    assert_eq!(DEV80_MANIFEST.len(), 80);
    for level in [Hardness::Easy, Hardness::Medium, Hardness::Hard, Hardness::Expert] {
        assert_eq!(DEV80_MANIFEST.iter().filter(|(_, h)| *h == level).count(), 20, "{level:?}");
    }
    let ids: std::collections::HashSet<&str> = DEV80_MANIFEST.iter().map(|(id, _)| *id).collect();
    assert_eq!(ids.len(), 80, "ids unique");
    assert!(DEV80_MANIFEST.contains(&("00576224", Hardness::Easy)));
    assert!(DEV80_MANIFEST.contains(&("79fb03f4", Hardness::Expert)));

    let tasks: Vec<Task> = DEV80_MANIFEST
        .iter()
        .map(|(id, _)| {
            Task::new(
                *id,
                vec![Example { input: g(&[vec![1]]), output: g(&[vec![2]]) }],
                vec![ExamplePair { input: g(&[vec![3]]), output: Some(g(&[vec![4]])) }],
            )
            .unwrap()
        })
        .collect();
    let validation = TaskSet::new(Split::Validation, tasks).unwrap();
    let dev = load_dev80(&validation).unwrap();
    assert_eq!(dev.len(), 80);
    assert_eq!(dev.tasks[12].id, "00576224");
    println!("A10 PASS: dev-80 manifest has 80 unique ids, 20 per level, spot ids verified");
}

// Shared sanity check used by several criteria: the default inference
// configuration really is 2 permutations x 6 transforms.
#[test]
fn inference_default_is_n2_t6() {
    let cfg = InferenceConfig::default();
    assert_eq!(cfg.permutations, 2);
    assert_eq!(cfg.transforms.len(), 6);
    let _ = AttemptPairing::Positional;
    let _: &dyn Predictor = &MockPredictor::identity();
}
