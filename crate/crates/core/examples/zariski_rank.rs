// Dimension of the Lie algebra generated by the XY transfer matrices,
// across energies, and the block structure that breaks it at E = 0.

use randblock::furstenberg::{energy_sweep_rank, lie_closure_dimension, zero_energy_reducibility_certificate};

pub fn run() -> randblock::Result<()> {
    for gamma in [0.3, 0.5, 2.0] {
        let grid = [-2.0, -1.0, -0.25, 0.0, 0.25, 1.0, 2.0];
        let rows = energy_sweep_rank(gamma, &grid, 3)?;
        let ranks: Vec<String> = rows.iter().map(|r| format!("{}:{}", r.energy, r.rank)).collect();
        println!("gamma {gamma}: {}", ranks.join("  "));
    }

    let c = lie_closure_dimension(0.0, 0.5, 3)?;
    println!("E = 0 closure: dimension {}, singular values {}", c.dimension, c.singular_values.iter().map(|s| format!("{s:.1e}")).collect::<Vec<_>>().join(" "));

    let nus: Vec<f64> = (0..100).map(|i| -2.0 + 0.04 * i as f64).collect();
    for gamma in [0.5, 2.0] {
        println!("certificate gamma {gamma}: {:?}", zero_energy_reducibility_certificate(gamma, &nus)?);
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
