// Disorder-averaged sup_t |[tau_t(sigma^x_1), sigma^x_k]| in a gapped
// random field.

use randblock::model::{ModelParams, SingleSiteDistribution};
use randblock::xy_oracle::{default_t_grid, lr_commutator_stats, Pauli};

pub fn run() -> randblock::Result<()> {
    let params = ModelParams::xy(8, 0.5, SingleSiteDistribution::uniform(2.5, 3.5));
    let rows = lr_commutator_stats(&params, 1, &[2, 3, 4, 5, 6, 7], Pauli::X, Pauli::X, &default_t_grid(), 20, 8)?;
    for r in rows {
        println!("separation {}  mean sup {:.3e} +- {:.1e}", r.separation, r.mean_sup_comm, r.se);
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
