//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines land in `cargo test` output.
//! Exits non-zero if any criterion fails that is not listed in
//! `EXPECTED_FAIL`.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use randblock::furstenberg::{energy_sweep_rank, zero_energy_reducibility_certificate};
use randblock::localization::{ensemble_correlator, fit_decay};
use randblock::lyapunov::{lyapunov_spectrum, thouless_check, zero_energy_prediction, LyapunovOptions};
use randblock::model::{
    assemble_hat_form, sample_disorder, BlockEnsemble, ModelParams, RandomBlockEnsemble, SingleSiteDistribution,
    XyEnsemble,
};
use randblock::spectral::{
    almost_sure_spectrum_approx, check_gap, dos_histogram_by_counting, eigensolve, periodic_spectrum, IntervalUnion,
};
use randblock::transfer::{charpoly_identity_check, fundamental_solutions, green_relative_error, wronskian_variation};
use randblock::xy_oracle::{
    build_hamiltonian, build_jordan_wigner, default_t_grid, free_fermion_spectrum, lr_commutator_stats,
    verify_heisenberg_identity, verify_quadratic_form, Pauli,
};
use randblock::Complex64;

const EDGE_TOL: f64 = 1e-6;
const HAUSDORFF_TOL: f64 = 1e-3;
const ALTERNATING_TOL: f64 = 1e-3;
const COVER_TOL: f64 = 1e-2;
const GREEN_TOL: f64 = 1e-8;
const WRONSKIAN_TOL: f64 = 1e-10;
const CHARPOLY_TOL: f64 = 1e-8;
const THOULESS_TOL: f64 = 5e-2;
const SIGMA_MULT: f64 = 3.0;
const CAR_TOL: f64 = 1e-12;
const QF_TOL: f64 = 1e-10;
const HEISENBERG_TOL: f64 = 1e-8;
const FREE_FERMION_TOL: f64 = 1e-8;
const LR_SE_MULT: f64 = 2.0;

/// The alternating field (-1, 1) at gamma = 1/2 has band edge 4/sqrt(3),
/// not sqrt(5); criterion 1 checks the latter and cannot pass.
const EXPECTED_FAIL: &[usize] = &[1];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Largest eigenvalue of the one-body operator on a ring of `cells` copies
/// of a period-2 field, assembled directly from the hopping rules.
fn ring_top_eigenvalue(field: [f64; 2], gamma: f64, cells: usize) -> f64 {
    let n = 2 * cells;
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        let k = (j + 1) % n;
        let nu = field[j % 2];
        h[(j, j)] = nu;
        h[(n + j, n + j)] = -nu;
        h[(j, k)] = -1.0;
        h[(k, j)] = -1.0;
        h[(n + j, n + k)] = 1.0;
        h[(n + k, n + j)] = 1.0;
        // B[j,k] = -gamma = -B[k,j], sitting in the blocks [[A, B], [-B, -A]]
        h[(j, n + k)] += -gamma;
        h[(k, n + j)] += gamma;
        h[(n + j, k)] += gamma;
        h[(n + k, j)] += -gamma;
    }
    SymmetricEigen::new(h).eigenvalues.max()
}

fn band_edges() -> randblock::Result<Outcome> {
    let gamma = 0.5;
    let low = (2.0_f64 / 3.0).sqrt();
    let constant = periodic_spectrum(&[1.0], gamma)?;
    let edges_ok = matches!(constant.intervals(), [(a, b), (c, d)]
        if (a + 3.0).abs() < EDGE_TOL && (b + low).abs() < EDGE_TOL && (c - low).abs() < EDGE_TOL && (d - 3.0).abs() < EDGE_TOL);

    let mut union = IntervalUnion::new([]);
    for i in 0..=40 {
        union = union.union(&periodic_spectrum(&[-1.0 + i as f64 / 20.0], gamma)?);
    }
    let target = IntervalUnion::new([(-3.0, -low), (low, 3.0)]);
    let hausdorff = union.hausdorff(&target);

    let alternating = periodic_spectrum(&[-1.0, 1.0], gamma)?;
    let alt_dist = alternating.hausdorff(&IntervalUnion::new([(-5f64.sqrt(), 5f64.sqrt())]));
    let alt_top = alternating.hull().map_or(f64::NAN, |h| h.1);
    let ring_top = ring_top_eigenvalue([-1.0, 1.0], gamma, 200);
    let alt_true = 4.0 / 3f64.sqrt();
    let alt_consistent = alternating.intervals().len() == 1
        && (alt_top - alt_true).abs() < EDGE_TOL
        && (ring_top - alt_true).abs() < ALTERNATING_TOL;

    let two_periodic = almost_sure_spectrum_approx(&SingleSiteDistribution::uniform(-1.0, 1.0), gamma, 2, 41)?
        .union(&alternating);
    let covers = two_periodic.covers(-3.0, 3.0, COVER_TOL);

    let detail = format!(
        "constant edges {edges_ok}, lattice Hausdorff {hausdorff:.1e}, alternating vs [-sqrt5, sqrt5] {alt_dist:.3e} \
         (edge {alt_top:.6}, ring oracle {ring_top:.6}, 4/sqrt3 consistent {alt_consistent}), period<=2 covers [-3,3] {covers}"
    );
    // the attainable parts of this criterion must hold regardless
    assert!(edges_ok && hausdorff <= HAUSDORFF_TOL && covers && alt_consistent, "{detail}");
    let pass = edges_ok && hausdorff <= HAUSDORFF_TOL && alt_dist <= ALTERNATING_TOL && covers;
    Ok(outcome(pass, detail))
}

fn green_suite() -> randblock::Result<Outcome> {
    let (mut g_max, mut w_max, mut c_max) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..100u64 {
        let ell = 1 + (i % 3) as usize;
        let n = 5 + (i as usize * 7) % 46;
        let ens = RandomBlockEnsemble::random(ell, SingleSiteDistribution::uniform(-1.5, 1.5), 4, 1000 + i)?;
        let m = ens.realize(n, 77, i)?;
        let z = Complex64::new(-2.0 + 0.04 * i as f64, 0.1 + 0.01 * (i % 10) as f64);
        g_max = g_max.max(green_relative_error(&m, z)?);
        let (u, v) = fundamental_solutions(&m, z)?;
        w_max = w_max.max(wronskian_variation(&m, &u, &v));
        let rep = charpoly_identity_check(&m, z)?;
        c_max = c_max.max(rep.residual.max(rep.exterior_residual));
    }
    Ok(outcome(
        g_max <= GREEN_TOL && w_max <= WRONSKIAN_TOL && c_max <= CHARPOLY_TOL,
        format!("100 instances: green {g_max:.1e}, wronskian {w_max:.1e}, charpoly {c_max:.1e}"),
    ))
}

fn counted_dos<B: BlockEnsemble>(ens: &B, bound: f64) -> randblock::Result<randblock::spectral::DosHistogram> {
    let matrices = (0..50).map(|i| ens.realize(1000, 404, i)).collect::<randblock::Result<Vec<_>>>()?;
    let edges: Vec<f64> = (0..=2400).map(|i| -bound + 2.0 * bound * i as f64 / 2400.0).collect();
    dos_histogram_by_counting(&matrices, &edges)
}

fn thouless() -> randblock::Result<Outcome> {
    let energies = [Complex64::new(1.0, 0.5), Complex64::new(0.0, 2.0), Complex64::new(-1.0, 0.5)];
    let opts = LyapunovOptions::with_steps(100_000);
    let xy = XyEnsemble::new(0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5))?;
    let general = RandomBlockEnsemble::random(2, SingleSiteDistribution::two_point(0.0, 1.0, 0.5), 3, 31)?;

    let mut worst = 0.0_f64;
    let xy_dos = counted_dos(&xy, 4.0)?;
    let mut xy_det = f64::NAN;
    for &e in &energies {
        let r = thouless_check(&xy, e, &xy_dos, &opts, 5)?;
        worst = worst.max(r.residual.abs());
        xy_det = r.det_term;
    }
    let gen_dos = counted_dos(&general, 6.0)?;
    let mut gen_det = f64::NAN;
    for &e in &energies {
        let r = thouless_check(&general, e, &gen_dos, &opts, 6)?;
        worst = worst.max(r.residual.abs());
        gen_det = r.det_term;
    }
    let expected_gen_det = -general.hopping_choices().iter().map(|s| s.determinant().abs().ln()).sum::<f64>()
        / (2.0 * general.hopping_choices().len() as f64);
    let det_ok = (xy_det + 0.5 * 0.75f64.ln()).abs() < 1e-12 && (gen_det - expected_gen_det).abs() < 1e-12;
    Ok(outcome(
        worst <= THOULESS_TOL && det_ok,
        format!("max |residual| {worst:.2e} over 6 (ensemble, E) pairs; det terms XY {xy_det:.6}, general {gen_det:.6} ({det_ok})"),
    ))
}

fn zero_energy() -> randblock::Result<Outcome> {
    let rho = SingleSiteDistribution::two_point(0.0, 1.0, 0.5);
    let opts = LyapunovOptions::default();
    let mut worst_sigma = 0.0_f64;
    for gamma in [0.5, 2.0] {
        let direct = lyapunov_spectrum(&XyEnsemble::new(gamma, rho.clone())?, Complex64::new(0.0, 0.0), &opts, 8)?;
        let pred = zero_energy_prediction(gamma, &rho, &opts, 9)?;
        for p in 0..4 {
            let se = (direct.std_errors[p].powi(2) + pred.predicted_se[p].powi(2)).sqrt();
            worst_sigma = worst_sigma.max((direct.exponents[p] - pred.predicted[p]).abs() / se);
        }
    }
    let mut worst_pair = 0.0_f64;
    let short = LyapunovOptions::with_steps(10_000);
    for i in 0..20u64 {
        let gamma = 0.2 + 0.15 * i as f64;
        let e = Complex64::new(-2.5 + 0.27 * i as f64, if i % 3 == 0 { 0.3 } else { 0.0 });
        let s = lyapunov_spectrum(&XyEnsemble::new(gamma, SingleSiteDistribution::uniform(-1.0, 1.0))?, e, &short, i)?;
        worst_pair = worst_pair.max(s.pair_symmetry_sigma());
    }
    Ok(outcome(
        worst_sigma <= SIGMA_MULT && worst_pair <= SIGMA_MULT,
        format!("closed form within {worst_sigma:.2} s.e.; pair symmetry within {worst_pair:.2e} s.e. at 20 points"),
    ))
}

fn zariski() -> randblock::Result<Outcome> {
    let grid: Vec<f64> = (0..20).map(|i| -3.0 + 6.0 * i as f64 / 19.0).collect();
    let nus: Vec<f64> = (0..100).map(|i| -3.0 + 0.06 * i as f64 + 0.013).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for gamma in [0.3, 0.5, 2.0] {
        let rows = energy_sweep_rank(gamma, &grid, 3)?;
        let min_rank = rows.iter().map(|r| r.rank).min().unwrap_or(0);
        let zero = energy_sweep_rank(gamma, &[0.0], 3)?[0].rank;
        let cert = zero_energy_reducibility_certificate(gamma, &nus)?.pass;
        pass &= min_rank == 10 && zero < 10 && cert;
        parts.push(format!("gamma {gamma}: min rank {min_rank}, E=0 rank {zero}, certificate {cert}"));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn localization() -> randblock::Result<Outcome> {
    let window = (0.5, 1.5);
    let ens = XyEnsemble::new(0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5))?;
    let fit = fit_decay(&ensemble_correlator(&ens, 200, window, 100, 2024)?, 0.9)?;

    let gapped = XyEnsemble::new(0.5, SingleSiteDistribution::uniform(2.5, 3.5))?;
    let gfit = fit_decay(&ensemble_correlator(&gapped, 200, window, 100, 2025)?, 0.9)?;
    let mut gap_ok = true;
    for i in 0..100 {
        gap_ok &= check_gap(&eigensolve(&gapped.realize(200, 2025, i)?, false)?, 0.5);
    }
    Ok(outcome(
        fit.eta > 0.0 && fit.ci_excludes_zero() && gfit.eta > 0.0 && gfit.ci_excludes_zero() && gap_ok,
        format!(
            "eta {:.4} CI [{:.4}, {:.4}]; gapped eta {:.4} CI [{:.4}, {:.4}], gap (-0.5, 0.5) empty in all 100: {gap_ok}",
            fit.eta, fit.eta_ci.0, fit.eta_ci.1, gfit.eta, gfit.eta_ci.0, gfit.eta_ci.1
        ),
    ))
}

fn many_body() -> randblock::Result<Outcome> {
    let car = (1..=8).map(|n| build_jordan_wigner(n).map(|f| f.car_report().max())).collect::<randblock::Result<Vec<_>>>()?;
    let car_max = car.into_iter().fold(0.0, f64::max);

    let mut qf_max = 0.0_f64;
    let mut conventions = Vec::new();
    for (n, gamma) in [(2, 0.5), (3, 0.3), (4, 2.0), (5, 0.5), (6, 1.0)] {
        let params = ModelParams::xy(n, gamma, SingleSiteDistribution::uniform(-1.0, 1.0));
        let real = sample_disorder(&params, 61, n as u64)?;
        let conv = verify_quadratic_form(&build_hamiltonian(&params, &real)?, &assemble_hat_form(&params, &real)?)?;
        qf_max = qf_max.max(conv.residual);
        conventions.push((conv.scale, conv.shift));
    }
    let one_convention = conventions.iter().all(|c| (c.0 - conventions[0].0).abs() < 1e-12 && c.1.abs() < 1e-9);

    let params = ModelParams::xy(6, 0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
    let real = sample_disorder(&params, 62, 0)?;
    let conv = verify_quadratic_form(&build_hamiltonian(&params, &real)?, &assemble_hat_form(&params, &real)?)?;
    let heis = verify_heisenberg_identity(&params, &real, &conv, &[0.25, 0.5, 1.0, 2.0, 3.5, 5.0])?;

    let params = ModelParams::xy(4, 0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
    let real = sample_disorder(&params, 63, 0)?;
    let h = build_hamiltonian(&params, &real)?;
    let hat = assemble_hat_form(&params, &real)?;
    let conv = verify_quadratic_form(&h, &hat)?;
    let mut exact: Vec<f64> = SymmetricEigen::new(h.real()).eigenvalues.iter().copied().collect();
    exact.sort_by(f64::total_cmp);
    let free = free_fermion_spectrum(&hat, &conv);
    let ff = if free.len() == exact.len() {
        exact.iter().zip(&free).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };

    Ok(outcome(
        car_max <= CAR_TOL && qf_max <= QF_TOL && one_convention && heis <= HEISENBERG_TOL && ff <= FREE_FERMION_TOL,
        format!(
            "CAR {car_max:.1e}, quadratic form {qf_max:.1e} (single convention {one_convention}), \
             Heisenberg {heis:.1e}, free-fermion levels {ff:.1e}"
        ),
    ))
}

fn lieb_robinson() -> randblock::Result<Outcome> {
    let params = ModelParams::xy(8, 0.5, SingleSiteDistribution::uniform(2.5, 3.5));
    let ks: Vec<usize> = (2..=7).collect();
    let rows = lr_commutator_stats(&params, 1, &ks, Pauli::X, Pauli::X, &default_t_grid(), 50, 88)?;
    let mut pass = rows.len() == 6;
    for w in rows.windows(2) {
        let se = (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
        pass &= w[1].mean_sup_comm <= w[0].mean_sup_comm + LR_SE_MULT * se;
    }
    let means: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.mean_sup_comm)).collect();
    Ok(outcome(pass, format!("means over separations 1..6: {}", means.join(" "))))
}

fn main() {
    type Check = fn() -> randblock::Result<Outcome>;
    let criteria: [(&str, Check); 8] = [
        ("band edges", band_edges),
        ("Green / Wronskian / charpoly", green_suite),
        ("Thouless formula", thouless),
        ("zero-energy exponents", zero_energy),
        ("Lie algebra rank", zariski),
        ("localization decay", localization),
        ("many-body oracle", many_body),
        ("Lieb-Robinson echo", lieb_robinson),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let o = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && EXPECTED_FAIL.contains(&id) { " (expected)" } else { "" };
        println!("{tag} [{id}] {name}{note}: {} ({secs:.1}s)", o.detail);
        if !o.pass && !EXPECTED_FAIL.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
