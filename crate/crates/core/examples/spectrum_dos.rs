// Assemble a random XY block Jacobi matrix, diagonalize it, and build the
// ensemble density of states.

use randblock::model::{
    assemble_block_jacobi, assemble_hat_form, sample_disorder, ModelParams, SingleSiteDistribution,
};
use randblock::spectral::{check_spectral_symmetry, dos_histogram, eigensolve, DosBins};

pub fn run() -> randblock::Result<()> {
    let params = ModelParams::xy(200, 0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5));
    let seed = 11;

    let real = sample_disorder(&params, seed, 0)?;
    let m = assemble_block_jacobi(&params, &real)?;
    let s = eigensolve(&m, true)?;
    println!("dim {}  lowest {:.6}  highest {:.6}", s.dim(), s.eigenvalues[0], s.eigenvalues[s.dim() - 1]);
    println!("eigen residual {:.2e}", s.max_relative_residual(&m.dense()).unwrap_or(f64::NAN));
    println!("symmetry lambda -> -lambda: {:?}", check_spectral_symmetry(&s, 1e-9));

    // the hat form is the same operator in another basis
    let hat = assemble_hat_form(&params, &real)?;
    let diff = (hat.interleaved() - m.dense()).amax();
    println!("hat form vs block form after interleaving: {diff:e}");

    let spectra = (0..20)
        .map(|i| eigensolve(&assemble_block_jacobi(&params, &sample_disorder(&params, seed, i)?)?, false))
        .collect::<randblock::Result<Vec<_>>>()?;
    let dos = dos_histogram(&spectra, DosBins::Count(24))?;
    for ((lo, hi), m) in dos.bin_edges.iter().zip(&dos.bin_edges[1..]).zip(&dos.mass) {
        println!("[{lo:+.3}, {hi:+.3})  {}", "#".repeat((m * 300.0) as usize));
    }
    println!("IDS at 0: {:.4}", dos.ids(0.0));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
