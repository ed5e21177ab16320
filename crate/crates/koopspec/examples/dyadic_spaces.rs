//! Dyadic partitions of the interval, a weighted atom space and a union.

use koopspec::rational::q;
use koopspec::space::{DyadicTree, SpaceDesc};

fn main() -> koopspec::Result<()> {
    let spaces = [
        SpaceDesc::UnitInterval,
        SpaceDesc::atoms(vec![q(1, 2), q(1, 4), q(1, 8), q(1, 8)]),
        SpaceDesc::union(vec![(q(1, 3), SpaceDesc::Circle), (q(2, 3), SpaceDesc::uniform_atoms(3))]),
    ];
    for space in spaces {
        let tree = DyadicTree::build(space.clone(), 3)?;
        println!("{space}");
        for m in 0..=3 {
            let atoms = tree.level(m)?;
            let cells: Vec<String> = atoms.iter().map(|a| format!("{}:{}@{}", a.path, a.mass, a.rep)).collect();
            println!("  level {m} ({} atoms, mesh {}): {}", atoms.len(), tree.mesh(m)?, cells.join(" "));
        }
    }
    Ok(())
}
