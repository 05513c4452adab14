// Floquet bands of periodic fields and the periodic approximation of the
// almost-sure spectrum.

use randblock::model::SingleSiteDistribution;
use randblock::spectral::{almost_sure_spectrum_approx, periodic_spectrum, IntervalUnion};

pub fn run() -> randblock::Result<()> {
    let gamma = 0.5;

    let constant = periodic_spectrum(&[1.0], gamma)?;
    println!("constant field 1: {:?}", constant.intervals());
    println!("  expected edges sqrt(2/3) = {:.9}, 3", (2.0_f64 / 3.0).sqrt());

    let alternating = periodic_spectrum(&[-1.0, 1.0], gamma)?;
    println!("alternating field (-1, 1): {:?}", alternating.intervals());

    let mut union = IntervalUnion::new([]);
    for i in 0..=40 {
        let c = -1.0 + i as f64 / 20.0;
        union = union.union(&periodic_spectrum(&[c], gamma)?);
    }
    println!("union over constant c in [-1, 1]: {:?}", union.intervals());

    let rho = SingleSiteDistribution::uniform(-1.0, 1.0);
    for max_period in 1..=2 {
        let approx = almost_sure_spectrum_approx(&rho, gamma, max_period, 21)?;
        println!(
            "uniform(-1, 1), periods <= {max_period}: {} interval(s), measure {:.4}, hull {:?}",
            approx.intervals().len(),
            approx.measure(),
            approx.hull()
        );
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
