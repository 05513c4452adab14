// Green function from fundamental solutions and the Wronskian, checked
// against a dense inverse, plus the characteristic polynomial identity.

use randblock::model::{RandomBlockEnsemble, SingleSiteDistribution, XyEnsemble, BlockEnsemble};
use randblock::transfer::{
    charpoly_identity_check, fundamental_solutions, green_relative_error, wronskian_variation, GreenFunction,
};
use randblock::Complex64;

pub fn run() -> randblock::Result<()> {
    let z = Complex64::new(0.7, 0.3);

    let xy = XyEnsemble::new(0.5, SingleSiteDistribution::uniform(-1.0, 1.0))?;
    let m = xy.realize(30, 5, 0)?;
    let g = GreenFunction::new(&m, z)?;
    println!("XY n=30: G(3, 10) block\n{}", g.block(3, 10));
    println!("relative error vs dense inverse {:.2e}", green_relative_error(&m, z)?);
    let (u, v) = fundamental_solutions(&m, z)?;
    println!("Wronskian variation over k {:.2e}", wronskian_variation(&m, &u, &v));

    let general = RandomBlockEnsemble::random(3, SingleSiteDistribution::uniform(-1.0, 1.0), 4, 9)?;
    let m = general.realize(25, 9, 1)?;
    println!("general ell=3 n=25: green error {:.2e}", green_relative_error(&m, z)?);
    let rep = charpoly_identity_check(&m, z)?;
    println!(
        "det(M - z) = {:.6e}  recursion {:.6e}  residual {:.1e}  exterior residual {:.1e}",
        rep.det_dense, rep.det_recursion, rep.residual, rep.exterior_residual
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
