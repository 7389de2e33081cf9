//! Fine-tuning data generation: samples tasks from an example pool with
//! the 30% augmentation pass, then builds the few-shot prompts used to
//! synthesize new task generators and parses a canned model response.
//!
//! Run with: cargo run --example ft_prompts

use arc_ttt::ft_data::{
    build_description_prompt, build_ft_dataset, build_generator_prompt, parse_generator_response,
    sample_ft_task, DescriptionSeed, ExamplePool, FtConfig, GenerationMode, GeneratorSeed,
    TaskDescription,
};
use arc_ttt::grid::{Example, Grid};

fn g(m: &[Vec<u8>]) -> Grid {
    Grid::new(m).unwrap()
}

fn main() {
    // A pool of pairs sharing one rule: output mirrors the input row.
    let examples: Vec<Example> = (0..8)
        .map(|i| Example {
            input: g(&[vec![i, 1, 2]]),
            output: g(&[vec![2, 1, i]]),
        })
        .collect();
    let pool = ExamplePool::new("mirror-row", examples).unwrap();

    let dataset = build_ft_dataset(
        std::slice::from_ref(&pool),
        &FtConfig { records: 20, seed: 5, ..FtConfig::default() },
    )
    .unwrap();
    println!(
        "FT dataset: {} records, {} augmented, {} oversize skips",
        dataset.records.len(),
        dataset.stats.applied,
        dataset.stats.skipped_oversize
    );

    let seeds = vec![
        GeneratorSeed {
            description: "Mirror each row of the grid".into(),
            code: "def generate(): return mirror_rows(random_grid())".into(),
        },
        GeneratorSeed {
            description: "Recolor the largest object".into(),
            code: "def generate(): return recolor_largest(random_grid())".into(),
        },
    ];
    println!("\n--- generator prompt (joint mode) ---");
    println!("{}", build_generator_prompt(&seeds, GenerationMode::Joint, None).unwrap());

    let task = sample_ft_task(&pool, 5, 0).unwrap();
    let triple = DescriptionSeed {
        task: task.clone(),
        larc_description: "flip the line around".into(),
        good_description: TaskDescription {
            category: "Mirroring".into(),
            summary: "Reverse each row".into(),
            description: "Each output row is the input row read right to left.".into(),
        },
    };
    println!("--- description prompt ---");
    println!("{}", build_description_prompt(&[triple], &task, "it turns things around").unwrap());

    let response = "----------------\nExample: Category: Tiling\nSummary: repeat the grid\nDescription: tile the input twice horizontally\nScript: def generate(): return tile(random_grid(), 2)\n";
    let candidates = parse_generator_response(response, GenerationMode::Joint).unwrap();
    println!("\nparsed {} candidate(s); first category: {:?}", candidates.len(), candidates[0].description.as_ref().unwrap().category);
}
