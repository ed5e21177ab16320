//! Driving the command pipeline from a configuration file.
//!
//! `cargo run --example run_config -- examples/configs/identity_pseudospec.json`

use koopspec::cli::{render, Command};
use koopspec::config::RunConfig;

fn main() -> koopspec::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/identity_pseudospec.json").into());
    let cfg = RunConfig::load(path.as_ref())?;
    let (bytes, code) = render(Command::Pseudospec, &cfg, 53)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    eprintln!("exit code {code}");
    Ok(())
}
