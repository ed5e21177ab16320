//! Locking an alternative map onto a recorded transcript leaves every
//! algorithm's output unchanged.

use std::sync::Arc;

use koopspec::adversary::{lock_experiment, LabAlgorithm};
use koopspec::maps::{Angle, BuiltinMap, MapOracle, Oracle};

fn main() -> koopspec::Result<()> {
    for alg in LabAlgorithm::ALL {
        let (base, alt) = match alg {
            LabAlgorithm::Markov => (BuiltinMap::Cycle(4), BuiltinMap::AtomPermutation(vec![1, 0, 3, 2])),
            LabAlgorithm::Sigma1 => (BuiltinMap::Identity, BuiltinMap::Rotation(Angle::rational(1, 4))),
            _ => (BuiltinMap::Identity, BuiltinMap::Rotation(Angle::Golden)),
        };
        let b: Arc<dyn Oracle> = Arc::new(MapOracle::new(alg.space(), base)?);
        let a: Arc<dyn Oracle> = Arc::new(MapOracle::new(alg.space(), alt)?);
        let r = lock_experiment(alg, b, a)?;
        println!(
            "{alg:?}: {} queries, {} locked points, maps differ: {}, outputs identical: {}",
            r.transcript_size, r.locked_points, r.maps_differ, r.outputs_identical
        );
    }
    Ok(())
}
