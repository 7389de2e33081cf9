//! Scores a batch of synthetic tasks end to end with the mock predictor
//! and prints the stratified pass@2 report, plus a rendered PNG of one
//! task.
//!
//! Run with: cargo run --example eval_report

use arc_ttt::eval::{evaluate, render_task_image, EvalConfig};
use arc_ttt::grid::{Example, ExamplePair, Grid, Split, Task, TaskSet};
use arc_ttt::predictor::MockPredictor;
use arc_ttt::transform::{apply_to_grid, Transform};
use rand::{Rng, SeedableRng};

fn main() {
    let rule = Transform::color_permutation(11);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let tasks: Vec<Task> = (0..6)
        .map(|i| {
            let mut pair = || {
                let m: Vec<Vec<u8>> =
                    (0..4).map(|_| (0..4).map(|_| rng.gen_range(0..=9)).collect()).collect();
                let input = Grid::new(&m).unwrap();
                let output = apply_to_grid(&rule, &input).unwrap();
                (input, output)
            };
            let train = (0..3)
                .map(|_| {
                    let (input, output) = pair();
                    Example { input, output }
                })
                .collect();
            let (ti, to) = pair();
            Task::new(format!("synth-{i}"), train, vec![ExamplePair { input: ti, output: Some(to) }])
                .unwrap()
        })
        .collect();
    let set = TaskSet::new(Split::Unknown, tasks).unwrap();

    let report = evaluate(&set, &MockPredictor::from_transform(rule), &EvalConfig::default()).unwrap();
    print!("{}", report.to_table());

    let png = render_task_image(&set.tasks[0], &[], 10);
    let path = std::env::temp_dir().join("arc_ttt_example_task.png");
    std::fs::write(&path, png).unwrap();
    println!("\nrendered {} to {}", set.tasks[0].id, path.display());
}
