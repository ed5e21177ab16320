//! Finite residuals of a few maps under every residual mode.

use std::sync::Arc;

use koopspec::dictionary::HaarDictionary;
use koopspec::maps::{Angle, BuiltinMap, MapOracle};
use koopspec::residual::{ResidualMode, SampledSection};
use koopspec::space::{DyadicTree, SpaceDesc};
use num_complex::Complex64;

fn main() -> koopspec::Result<()> {
    let zs = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-0.5, 0.5)];
    for (space, map) in [
        (SpaceDesc::UnitInterval, BuiltinMap::Identity),
        (SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(1, 4))),
        (SpaceDesc::Circle, BuiltinMap::Rotation(Angle::Golden)),
    ] {
        let f = MapOracle::new(space.clone(), map.clone())?;
        let d = HaarDictionary::build(Arc::new(DyadicTree::build(space, 4)?), 2.0, 8)?;
        let sec = SampledSection::build(&f, &d, 8, 4, 2.0, 53)?;
        println!("{map:?}");
        for z in zs {
            let mut row = format!("  z = {z}:");
            for mode in [ResidualMode::P2Oracle, ResidualMode::RatioNetSearch, ResidualMode::NetSearch] {
                let v = sec.residual(z, mode, 8)?;
                row += &format!(" {mode} {:.4} ± {:.1e}", v.h, v.err);
            }
            println!("{row}");
        }
    }
    Ok(())
}
