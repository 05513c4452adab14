// Zero-energy exponents: the direct 4x4 cocycle against the reduction to
// a 2x2 Anderson-type cocycle, on both sides of gamma = 1.

use randblock::lyapunov::{lyapunov_spectrum, zero_energy_prediction, LyapunovOptions};
use randblock::model::{SingleSiteDistribution, XyEnsemble};
use randblock::Complex64;

pub fn run() -> randblock::Result<()> {
    let rho = SingleSiteDistribution::two_point(0.0, 1.0, 0.5);
    let opts = LyapunovOptions::with_steps(20_000);
    for gamma in [0.5, 2.0] {
        let ens = XyEnsemble::new(gamma, rho.clone())?;
        let direct = lyapunov_spectrum(&ens, Complex64::new(0.0, 0.0), &opts, 3)?;
        let pred = zero_energy_prediction(gamma, &rho, &opts, 4)?;
        println!("gamma = {gamma} ({:?} branch, shift {:.5})", pred.branch, pred.shift);
        for p in 0..4 {
            println!(
                "  direct {:+.4} +- {:.4}   predicted {:+.4} +- {:.4}",
                direct.exponents[p], direct.std_errors[p], pred.predicted[p], pred.predicted_se[p]
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
