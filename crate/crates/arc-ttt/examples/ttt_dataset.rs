//! Builds a per-task test-time-training dataset and its end-to-end
//! baseline counterpart, then prints the counts and one sample record.
//!
//! Run with: cargo run --example ttt_dataset

use arc_ttt::codec::LossMode;
use arc_ttt::grid::{Example, ExamplePair, Grid, Task};
use arc_ttt::ttt_data::{build_e2e_dataset, build_ttt_dataset, GenConfig};

fn g(m: &[Vec<u8>]) -> Grid {
    Grid::new(m).unwrap()
}

fn main() {
    // A K=4 task: the rule swaps the two columns.
    let train = vec![
        Example { input: g(&[vec![1, 2], vec![3, 4]]), output: g(&[vec![2, 1], vec![4, 3]]) },
        Example { input: g(&[vec![5, 6], vec![7, 8]]), output: g(&[vec![6, 5], vec![8, 7]]) },
        Example { input: g(&[vec![0, 9], vec![9, 0]]), output: g(&[vec![9, 0], vec![0, 9]]) },
        Example { input: g(&[vec![2, 2], vec![3, 1]]), output: g(&[vec![2, 2], vec![1, 3]]) },
    ];
    let test = vec![ExamplePair { input: g(&[vec![4, 7], vec![8, 1]]), output: None }];
    let task = Task::new("column-swap", train, test).unwrap();

    let cfg = GenConfig { seed: 7, ..GenConfig::default() };
    let ds = build_ttt_dataset(&task, &cfg);
    println!(
        "TTT dataset: {} records (generated {}, capped {}, oversize drops {})",
        ds.records.len(),
        ds.stats.generated,
        ds.stats.capped,
        ds.stats.dropped_oversize
    );

    let e2e = build_e2e_dataset(&task, &GenConfig { loss_mode: LossMode::TestOnly, ..cfg });
    println!("E2E baseline: {} zero-demonstration records", e2e.records.len());

    let sample = &ds.records[0];
    println!(
        "\nfirst record (transform {}, leave-one-out index {}):",
        sample.source.transform, sample.source.loo_index
    );
    println!("{}", sample.prompt);
    println!("loss spans: {:?}", sample.loss_spans);
}
