//! Single-limit tower with Lipschitz hat functions and a quadrature level
//! chosen from the modulus of continuity.

use std::sync::Arc;

use koopspec::lipschitz::LipschitzDictionary;
use koopspec::maps::{Angle, BuiltinMap, MapOracle};
use koopspec::rational::q;
use koopspec::reference::{hausdorff, rotation_reference};
use koopspec::sigma1::{run_sigma1_modulus, Sigma1Options};
use koopspec::space::{DyadicTree, SpaceDesc};
use koopspec::tower::GridSpec;

fn main() -> koopspec::Result<()> {
    let angle = Angle::rational(1, 2);
    let f = MapOracle::new(SpaceDesc::Circle, BuiltinMap::Rotation(angle.clone()))?;
    let d = LipschitzDictionary::standard(Arc::new(DyadicTree::build(SpaceDesc::Circle, 3)?), 3)?;
    let opts = Sigma1Options { radius: 1.5, ..Sigma1Options::default() };
    let run = run_sigma1_modulus(&f, &d, 0.3, &GridSpec::with_radius(8, q(3, 2)), &opts)?;
    println!("quadrature level m = {} (C_n = {:.3e}, alpha = {:.4})", run.m, run.level.c_n, run.level.alpha_hat);
    let dh = hausdorff(&run.stage.set.complex(), &rotation_reference(&angle, 0.3).sample(0.01))?;
    println!("{} grid points accepted, d_H = {dh:.4}", run.stage.set.points.len());
    for w in &run.stage.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
