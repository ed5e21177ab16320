//! Residuals in exact rational arithmetic and the two arithmetic towers.

use std::sync::Arc;

use koopspec::arith::{arithmetic_residual, arithmetic_tower, ArithTower, CQ};
use koopspec::dictionary::IndicatorDictionary;
use koopspec::maps::{BuiltinMap, MapOracle};
use koopspec::rational::q;
use koopspec::space::{DyadicTree, SpaceDesc};
use koopspec::tower::GridSpec;

fn main() -> koopspec::Result<()> {
    let space = SpaceDesc::uniform_atoms(4);
    let f = MapOracle::new(space.clone(), BuiltinMap::Cycle(4))?;
    let d = IndicatorDictionary::build(Arc::new(DyadicTree::build(space, 3)?), 2)?;
    for z in [CQ::real(q(1, 1)), CQ::new(q(0, 1), q(1, 1)), CQ::real(q(1, 2))] {
        for n0 in [4, 12, 20] {
            let v = arithmetic_residual(&f, &d, &z, 4, 2, n0, 3.0)?;
            println!("z = {}, n0 = {n0}: h^3 >= {} ({:.6}), float {:.6}", z.to_complex(), v.value, v.value_f64(), v.float);
        }
    }
    let grid = GridSpec::new(q(1, 4), q(3, 2))?;
    for tower in [ArithTower::Sigma2, ArithTower::Sigma3] {
        let stages = arithmetic_tower(&f, &d, tower, &q(1, 2), 4, &[2, 3], &[8, 16], &grid, 2.0)?;
        let sizes: Vec<usize> = stages.iter().map(|s| s.set.points.len()).collect();
        println!("{tower:?}: stage sizes {sizes:?}");
    }
    Ok(())
}
