//! Map oracles: evaluation, query counts and measure preservation.

use koopspec::maps::{check_measure_preservation, koopman_norm_bound, Angle, BuiltinMap, MapOracle, Oracle};
use koopspec::space::{DyadicTree, Point, SpaceDesc};

fn main() -> koopspec::Result<()> {
    let maps = [
        (SpaceDesc::UnitInterval, BuiltinMap::Identity),
        (SpaceDesc::Circle, BuiltinMap::Rotation(Angle::rational(1, 4))),
        (SpaceDesc::Circle, BuiltinMap::Rotation(Angle::Golden)),
        (SpaceDesc::UnitInterval, BuiltinMap::Halving),
        (SpaceDesc::uniform_atoms(4), BuiltinMap::Cycle(4)),
    ];
    for (space, map) in maps {
        let f = MapOracle::new(space.clone(), map)?;
        let x = match space {
            SpaceDesc::FiniteAtoms { .. } => Point::atom(1),
            _ => Point::real(0.3),
        };
        let y = f.evaluate(&x, 53)?;
        let tree = DyadicTree::build(space, 3)?;
        let report = check_measure_preservation(&f, &tree, 3, 4096)?;
        let norm = koopman_norm_bound(&f, 2.0).map(|b| format!("{b:.3}")).unwrap_or_else(|e| e.to_string());
        println!("{}: {x} -> {y}, |K|_2 <= {norm}, preservation deviation {:.2e}, {} queries", f.name(), report.max_deviation, f.query_count());
    }
    Ok(())
}
