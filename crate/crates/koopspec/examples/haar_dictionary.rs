//! A normalised Haar system, its dual functionals and the CSV dump.

use std::sync::Arc;

use koopspec::dictionary::{build_duals, dump_csv, Dictionary, HaarDictionary, StepDictionary};
use koopspec::space::{DyadicTree, SpaceDesc};

fn main() -> koopspec::Result<()> {
    let tree = Arc::new(DyadicTree::build(SpaceDesc::UnitInterval, 3)?);
    for p in [2.0, 3.0] {
        let d = HaarDictionary::build(tree.clone(), p, 8)?;
        println!("{} (p = {p})", d.label());
        for j in 0..d.len() {
            let shape: Vec<String> = d.shape(j).coeffs.iter().map(|c| c.to_string()).collect();
            println!("  {j}: level {} shape [{}] normaliser {:.4}", d.generating_level(j), shape.join(", "), d.normalizer(j));
        }
        let duals = build_duals(&d, 8)?;
        println!("  duals on level {}", duals.level);
    }
    let d = HaarDictionary::build(tree, 2.0, 4)?;
    dump_csv(&d, 4, std::io::stdout())
}
