//! Invariant partitions, the averaging operator E_F and the Markov tower.

use koopspec::markov::{compose, conditional_expectation_ef, invariant_blocks_from_cycles, markov_tower, refine_invariant_partition, InvariantPartition, MarkovSpec};
use koopspec::rational::q;
use koopspec::maps::BuiltinMap;
use koopspec::reference::{hausdorff, map_reference};
use koopspec::tower::GridSpec;

fn main() -> koopspec::Result<()> {
    let masses = vec![q(1, 6); 6];
    let perm = [1, 2, 0, 4, 3, 5];
    let spec = MarkovSpec::from_permutation(masses.clone(), &perm)?;
    let coarse = InvariantPartition::from_blocks(vec![vec![0, 3], vec![1, 2, 4, 5]], masses.clone())?;
    let refined = refine_invariant_partition(&spec, &coarse, 6)?;
    println!("refined {:?} -> {:?}", coarse.blocks, refined.blocks);
    let cycles = invariant_blocks_from_cycles(&perm, masses)?;
    let g = vec![q(1, 1), q(2, 1), q(6, 1), q(-1, 1), q(3, 1), q(5, 2)];
    let e = conditional_expectation_ef(&cycles, &g)?;
    println!("cycle blocks {:?}", cycles.blocks);
    println!("E_F g = {:?}", e.iter().map(|x| x.to_string()).collect::<Vec<_>>());
    println!("E_F commutes with K_F: {}", conditional_expectation_ef(&cycles, &compose(&g, &perm))? == compose(&e, &perm));
    let eps = 0.5;
    // cycle lengths 3, 2, 1: spectrum E_3 ∪ E_2
    let reference = map_reference(&BuiltinMap::AtomPermutation(perm.to_vec()), eps).expect("permutation spectrum").sample(0.01);
    for n in [8, 16, 32] {
        let run = markov_tower(&spec, eps, n, 2.0, &GridSpec::with_radius(n, q(2, 1)))?;
        let dh = hausdorff(&run.stage.set.complex(), &reference)?;
        println!("n = {n}: {} elements, d_H = {dh:.4}", run.n2);
    }
    Ok(())
}
