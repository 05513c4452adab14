// Empirical probability that the spectrum of a box comes exponentially
// close to a fixed energy.

use randblock::localization::wegner_probe;
use randblock::model::{SingleSiteDistribution, XyEnsemble};

pub fn run() -> randblock::Result<()> {
    let ens = XyEnsemble::new(0.5, SingleSiteDistribution::uniform(-1.0, 1.0))?;
    for row in wegner_probe(&ens, 1.0, &[10, 20, 40], 0.5, 1.0, 200, 5)? {
        println!("L {:3}  eps {:.3e}  P {:.3} +- {:.3}", row.l, row.epsilon, row.probability, row.se);
    }
    let gapped = XyEnsemble::new(0.5, SingleSiteDistribution::uniform(2.5, 3.5))?;
    let rows = wegner_probe(&gapped, 0.0, &[10, 20], 0.5, 1.0, 200, 5)?;
    println!("inside the gap: {:?}", rows.iter().map(|r| r.probability).collect::<Vec<_>>());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
