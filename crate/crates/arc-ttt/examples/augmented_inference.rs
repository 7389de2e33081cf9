//! Runs augmented inference with the deterministic mock predictor: the
//! task is queried under 6 invertible transforms x 2 demonstration
//! permutations, and each prediction is mapped back through the inverse
//! transform.
//!
//! Run with: cargo run --example augmented_inference

use arc_ttt::grid::{Example, ExamplePair, Grid, Task};
use arc_ttt::inference::{generate_candidates, InferenceConfig};
use arc_ttt::predictor::MockPredictor;
use arc_ttt::transform::Transform;

fn g(m: &[Vec<u8>]) -> Grid {
    Grid::new(m).unwrap()
}

fn main() {
    // Rule: recolor every cell through a fixed permutation. Cellwise rules
    // commute with the geometric views, so all 12 candidates agree.
    let rule = Transform::color_permutation(3);
    let mk = |m: &[Vec<u8>]| {
        let input = g(m);
        let output = arc_ttt::transform::apply_to_grid(&rule, &input).unwrap();
        Example { input, output }
    };
    let train = vec![mk(&[vec![1, 2], vec![3, 4]]), mk(&[vec![5, 0], vec![0, 5]])];
    let probe = mk(&[vec![7, 8, 9], vec![1, 1, 2]]);
    let task = Task::new(
        "recolor",
        train,
        vec![ExamplePair { input: probe.input, output: Some(probe.output.clone()) }],
    )
    .unwrap();

    let predictor = MockPredictor::from_transform(rule);
    let set = generate_candidates(&task, 0, &predictor, &InferenceConfig::default()).unwrap();

    println!("{} candidates, {} dropped", set.candidates.len(), set.dropped.len());
    for c in &set.candidates {
        println!(
            "  {:<14} perm {}  matches truth: {}",
            c.transform.name(),
            c.perm_index,
            c.grid == probe.output
        );
    }
}
