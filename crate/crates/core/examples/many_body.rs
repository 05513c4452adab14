// Jordan-Wigner fermions for the spin chain: anticommutation relations,
// H as a quadratic form in the fermions, free-fermion spectrum and
// Heisenberg dynamics.

use nalgebra::SymmetricEigen;
use randblock::model::{assemble_hat_form, sample_disorder, ModelParams, SingleSiteDistribution};
use randblock::xy_oracle::{
    build_hamiltonian, build_jordan_wigner, free_fermion_spectrum, verify_heisenberg_identity, verify_quadratic_form,
};

pub fn run() -> randblock::Result<()> {
    println!("CAR defects n=6: {:?}", build_jordan_wigner(6)?.car_report());

    let params = ModelParams::xy(4, 0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
    let real = sample_disorder(&params, 21, 0)?;
    let h = build_hamiltonian(&params, &real)?;
    let hat = assemble_hat_form(&params, &real)?;
    let conv = verify_quadratic_form(&h, &hat)?;
    println!("H = {} * C*MC + {} (residual {:.1e})", conv.scale, conv.shift, conv.residual);

    let mut exact: Vec<f64> = SymmetricEigen::new(h.real()).eigenvalues.iter().copied().collect();
    exact.sort_by(f64::total_cmp);
    let free = free_fermion_spectrum(&hat, &conv);
    println!("lowest levels exact {:.6?}", &exact[..4]);
    println!("lowest levels free  {:.6?}", &free[..4]);

    let params = ModelParams::xy(6, 0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
    let real = sample_disorder(&params, 21, 1)?;
    let r = verify_heisenberg_identity(&params, &real, &conv, &[0.5, 1.0, 2.0, 5.0])?;
    println!("n=6: tau_t(c_j) vs exp(-2itM) rows, max residual {r:.1e}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
