//! Two-limit tower for a quarter rotation against E_4 + B_ε.

use std::sync::Arc;

use koopspec::dictionary::HaarDictionary;
use koopspec::maps::{Angle, BuiltinMap, MapOracle};
use koopspec::rational::q;
use koopspec::reference::{hausdorff, rotation_reference};
use koopspec::space::{DyadicTree, SpaceDesc};
use koopspec::tower::{gamma_base, GridSpec, TowerOptions};

fn main() -> koopspec::Result<()> {
    let angle = Angle::rational(1, 4);
    let eps = 0.3;
    let f = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(angle.clone()))?;
    let reference = rotation_reference(&angle, eps).sample(0.01);
    for (n2, n1) in [(8, 3), (16, 4), (32, 5)] {
        let d = HaarDictionary::build(Arc::new(DyadicTree::build(SpaceDesc::Circle, n1)?), 2.0, n2)?;
        let stage = gamma_base(&f, &d, eps, n2, n1, &GridSpec::with_radius(n2, q(3, 2)), &TowerOptions::default())?;
        let dh = hausdorff(&stage.set.complex(), &reference)?;
        println!("n2 = {n2}: {} grid points, d_H = {dh:.4} (2/n2 = {:.4})", stage.set.points.len(), 2.0 / n2 as f64);
    }
    Ok(())
}
