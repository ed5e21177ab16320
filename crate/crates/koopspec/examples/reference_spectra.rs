//! Closed-form spectra, Hausdorff gaps and the Diophantine margin.

use koopspec::maps::Angle;
use koopspec::reference::{cycle_reference, diophantine_margin, gap_formula, hausdorff, rotation_reference, ReferenceSpectrum};

fn main() -> koopspec::Result<()> {
    for angle in [Angle::rational(1, 2), Angle::rational(3, 8), Angle::Golden] {
        println!("{angle:?}, eps = 0.1: {:?}", rotation_reference(&angle, 0.1));
    }
    let r = 0.005;
    for qq in [2, 3, 5] {
        for eps in [0.0, 0.1, 0.5] {
            let d = hausdorff(&ReferenceSpectrum::UnitCircle.sample(r), &cycle_reference(qq, eps).sample(r))?;
            println!("d_H(T, E_{qq} + B_{eps}) = {d:.4}, formula {:.4}", gap_formula(qq, eps));
        }
    }
    for (p, dd) in [(5, 2), (7, 6), (101, 100)] {
        let m = diophantine_margin(p, dd)?;
        println!("p = {p}, D = {dd}: 4/(pD) = {:.5} <= min distance {:.5}", m.bound, m.true_min);
    }
    Ok(())
}
