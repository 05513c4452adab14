// Eigenfunction correlator over an energy window, its decay fit, and the
// time-evolution lower bound it dominates.

use randblock::localization::{
    dynamical_sup_lower_bound, eigenfunction_correlator, ensemble_correlator, fit_decay, DEFAULT_ZETA,
};
use randblock::model::{BlockEnsemble, SingleSiteDistribution, XyEnsemble};
use randblock::spectral::{check_gap, eigensolve};

pub fn run() -> randblock::Result<()> {
    let window = (0.5, 1.5);
    for (label, rho) in [
        ("two_point(0, 1)", SingleSiteDistribution::two_point(0.0, 1.0, 0.5)),
        ("two_point(2.5, 3.5)", SingleSiteDistribution::two_point(2.5, 3.5, 0.5)),
    ] {
        let ens = XyEnsemble::new(0.5, rho)?;
        let field = ensemble_correlator(&ens, 80, (window.0, f64::INFINITY), 20, 17)?;
        let fit = fit_decay(&field, DEFAULT_ZETA)?;
        println!(
            "{label}: eta {:.4} CI [{:.4}, {:.4}]  C {:.3}  bins {}  curved {}",
            fit.eta, fit.eta_ci.0, fit.eta_ci.1, fit.c, fit.bins.len(), fit.curved
        );
        let s = eigensolve(&ens.realize(80, 17, 0)?, false)?;
        println!("  no eigenvalue in (-0.5, 0.5): {}", check_gap(&s, 0.5));
    }

    let ens = XyEnsemble::new(0.5, SingleSiteDistribution::uniform(-1.0, 1.0))?;
    let s = eigensolve(&ens.realize(40, 3, 0)?, true)?;
    let q = eigenfunction_correlator(&s, window)?;
    let t_grid: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
    for (j, k) in [(10, 10), (10, 14), (10, 25)] {
        let lower = dynamical_sup_lower_bound(&s, window, j, k, &t_grid)?;
        println!("({j},{k}): sup_t |P_j e^(-itM) P_k| >= {lower:.3e}  <=  Q = {:.3e}", q.mean[(j, k)]);
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
