// Driving the batch front end from code: one config, two subcommands,
// outputs under the system temp directory.

use randblock::cli::{run as run_command, Command, RunConfig};
use randblock::model::SingleSiteDistribution;

pub fn run() -> randblock::Result<()> {
    let mut cfg = RunConfig::xy(6, 0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5), 42);
    cfg.realizations = 2;
    cfg.potential = vec![1.0];
    let dir = std::env::temp_dir().join(format!("randblock-batch-{}", std::process::id()));
    for cmd in [Command::Spectrum, Command::Periodic] {
        for path in run_command(cmd, &cfg, &dir, false)? {
            let text = std::fs::read_to_string(&path)?;
            println!("{}: {} lines", path.display(), text.lines().count());
        }
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
