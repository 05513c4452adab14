// Lyapunov spectrum of the XY cocycle and the generalized Thouless
// formula at a complex energy.

use randblock::lyapunov::{lyapunov_index, lyapunov_spectrum, thouless_check, LyapunovOptions};
use randblock::model::{BlockEnsemble, SingleSiteDistribution, XyEnsemble};
use randblock::spectral::{dos_histogram, eigensolve, DosBins};
use randblock::Complex64;

pub fn run() -> randblock::Result<()> {
    let ens = XyEnsemble::new(0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5))?;
    let opts = LyapunovOptions::with_steps(20_000);
    let e = Complex64::new(1.0, 0.5);

    let spec = lyapunov_spectrum(&ens, e, &opts, 1)?;
    for (g, se) in spec.exponents.iter().zip(&spec.std_errors) {
        println!("gamma = {g:+.5} +- {se:.5}");
    }
    println!("pair symmetry: {:.2} s.e.", spec.pair_symmetry_sigma());
    let (idx, se) = lyapunov_index(&spec);
    println!("Lyapunov index {idx:.5} +- {se:.5}");

    let spectra = (0..10).map(|i| eigensolve(&ens.realize(500, 2, i)?, false)).collect::<randblock::Result<Vec<_>>>()?;
    let dos = dos_histogram(&spectra, DosBins::Count(200))?;
    let rep = thouless_check(&ens, e, &dos, &opts, 1)?;
    println!(
        "index {:.5} = det term {:.5} + log potential {:.5} + residual {:+.2e}",
        rep.lyapunov_index, rep.det_term, rep.log_potential, rep.residual
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
