//! Prime-arc probes separate unions of cycles from unions with an
//! irrational rotation.

use koopspec::adversary::{dichotomy_experiment, Block, DichotomySchedule};

fn main() -> koopspec::Result<()> {
    let schedule = DichotomySchedule::default();
    for blocks in [vec![Block::Cycle(2), Block::Cycle(3), Block::Cycle(5)], vec![Block::Cycle(2), Block::GoldenRotation]] {
        let r = dichotomy_experiment(&blocks, &schedule)?;
        println!("{blocks:?}");
        for k in 0..r.primes.len() {
            let [a, b] = r.thresholds[k];
            println!("  p = {:>2}: beta = {:.5}, thresholds ({a:.5}, {b:.5}) -> {:?}", r.primes[k], r.beta_trace[k], r.verdicts[k]);
        }
    }
    Ok(())
}
