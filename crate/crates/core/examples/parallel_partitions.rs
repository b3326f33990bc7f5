//! Round seeds are derived from (seed, round index), so splitting a run into
//! partitions and merging the partial tallies in any order gives exactly
//! the same table. Also shows a checkpointed run.

use std::time::Instant;

use mdiqkd::pipeline::{partition_ranges, simulate_range, simulate_tally, SimulateOptions};
use mdiqkd::{ExperimentConfig, Simulator, TallyTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::paper_50km();
    cfg.pulse_pairs = 4_000_000;
    println!("{} worker threads", rayon::current_num_threads());

    let mut reference: Option<TallyTable> = None;
    for parts in [1, 4, 16, 64] {
        let t = Instant::now();
        let table = simulate_tally(&cfg, &SimulateOptions { partitions: Some(parts), checkpoint: None })?;
        let same = reference.get_or_insert_with(|| table.clone()) == &table;
        println!("{parts:>3} partitions  {:>6.2} s  identical: {same}", t.elapsed().as_secs_f64());
    }

    // partials merged back to front
    let sim = Simulator::new(&cfg)?;
    let merged = partition_ranges(cfg.pulse_pairs, Some(8))
        .into_iter()
        .rev()
        .map(|r| simulate_range(&sim, r))
        .fold(TallyTable::new(), |acc, t| acc.merged(&t));
    println!("reverse-order merge identical: {}", Some(&merged) == reference.as_ref());

    let dir = std::env::temp_dir().join("mdiqkd-partitions");
    std::fs::create_dir_all(&dir)?;
    let cp = dir.join("checkpoint.json");
    let _ = std::fs::remove_file(&cp);
    let table = simulate_tally(&cfg, &SimulateOptions { partitions: Some(8), checkpoint: Some(cp.clone()) })?;
    println!("checkpointed run identical: {}, checkpoint at {}", Some(&table) == reference.as_ref(), cp.display());
    Ok(())
}
