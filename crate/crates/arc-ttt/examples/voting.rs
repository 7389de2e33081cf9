//! Demonstrates the two voting strategies on a hand-built candidate set
//! where they disagree, and prints the audit trail of the hierarchical
//! vote.
//!
//! Run with: cargo run --example voting

use arc_ttt::codec::render_grid_text;
use arc_ttt::grid::Grid;
use arc_ttt::voting::{flattened_vote, hierarchical_vote, GlobalWeighting, VoteInput};

fn main() {
    let a = Grid::new(&[vec![1]]).unwrap();
    let b = Grid::new(&[vec![2]]).unwrap();
    let c = Grid::new(&[vec![3]]).unwrap();

    // The identity group is torn; two other transform groups each settle on
    // a different answer. Flattened counting favors raw frequency, while
    // the two-stage vote counts per-group endorsements.
    let mut candidates = Vec::new();
    let mut push = |t: &str, g: &Grid, n: usize| {
        for _ in 0..n {
            candidates.push(VoteInput { transform: t.into(), grid: g.clone() });
        }
    };
    push("Identity", &a, 1);
    push("Identity", &b, 1);
    push("Rotate(90)", &c, 2);
    push("Flip(0)", &c, 2);
    push("Transpose()", &a, 2);

    let hier = hierarchical_vote(&candidates, GlobalWeighting::Endorsement);
    let flat = flattened_vote(&candidates);

    let show = |label: &str, attempts: &[Grid]| {
        let rendered: Vec<String> = attempts.iter().map(render_grid_text).collect();
        println!("{label}: {}", rendered.join("  then  "));
    };
    show("hierarchical attempts", &hier.attempts);
    show("flattened attempts   ", &flat.attempts);

    println!("\naudit:");
    for group in &hier.audit.groups {
        println!("  group {:<12} tally {:?} supplements {:?}", group.transform, group.tally, group.supplements);
    }
    println!("  global tally {:?}", hier.audit.global_tally);
    for tie in &hier.audit.tie_breaks {
        println!("  tie break: {tie}");
    }
}
