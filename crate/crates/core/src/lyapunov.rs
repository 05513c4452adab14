//! Lyapunov spectra of the transfer-matrix cocycle, the Lyapunov index and
//! the generalized Thouless formula, the zero-energy reductions of the XY
//! cocycle, and the critical-disorder scan.
//!
//! Exponents come from propagating a full orthonormal frame and taking QR
//! factorizations every `reorth_every` steps; `γ_p` is the average of
//! `log |R_pp|`. Error bars are standard errors over batch means.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{disorder_rng, BlockEnsemble, SingleSiteDistribution};
use crate::spectral::DosHistogram;
use crate::transfer::transfer_from_inverse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovOptions {
    /// Measured steps, split evenly into `batches`.
    pub steps: usize,
    pub reorth_every: usize,
    pub batches: usize,
    /// Discarded steps before measuring.
    pub warmup: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { steps: 100_000, reorth_every: 10, batches: 50, warmup: 1000 }
    }
}

impl LyapunovOptions {
    pub fn with_steps(steps: usize) -> Self {
        LyapunovOptions { steps, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1000 {
            return Err(Error::InvalidParams(format!("steps = {} below the minimum 1000", self.steps)));
        }
        if !(1..=50).contains(&self.reorth_every) {
            return Err(Error::InvalidParams(format!("reorth_every = {} outside [1, 50]", self.reorth_every)));
        }
        if self.batches < 2 || self.batches > self.steps {
            return Err(Error::InvalidParams(format!("batches = {} must be in [2, steps]", self.batches)));
        }
        Ok(())
    }

    fn batch_len(&self) -> usize {
        self.steps / self.batches
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    pub energy_re: f64,
    pub energy_im: f64,
    /// `γ_1 ≥ … ≥ γ_{2ℓ}`.
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Measured steps actually used.
    pub steps: usize,
    pub seed: u64,
    pub reorth_every: usize,
    /// Per-batch estimates, columns in the order of `exponents`.
    pub batch_exponents: Vec<Vec<f64>>,
}

impl LyapunovSpectrum {
    pub fn energy(&self) -> Complex64 {
        Complex64::new(self.energy_re, self.energy_im)
    }

    /// `max_p |γ_p + γ_{2ℓ+1−p}| / (combined s.e.)`.
    pub fn pair_symmetry_sigma(&self) -> f64 {
        let d = self.exponents.len();
        (0..d / 2)
            .map(|p| {
                let q = d - 1 - p;
                let se = (self.std_errors[p].powi(2) + self.std_errors[q].powi(2)).sqrt();
                (self.exponents[p] + self.exponents[q]).abs() / se.max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Column norm past which the frame is re-orthonormalized before the
/// interval is up. Singular values of a symplectic product pair up as
/// `σ, 1/σ`, so this caps the frame's condition number near 1e8.
const GROWTH_LIMIT: f64 = 1e4;

fn outgrown<T: ComplexField<RealField = f64>>(q: &DMatrix<T>) -> bool {
    q.column_iter().any(|c| !(c.norm() <= GROWTH_LIMIT))
}

/// Frame propagation with periodic QR, early once a column outgrows
/// `GROWTH_LIMIT`. `next` supplies the cocycle factors in order. Returns per-batch exponents (unsorted, by QR position), or
/// `None` when non-finite numbers appear.
fn qr_batches<T, F>(dim: usize, opts: &LyapunovOptions, reorth_every: usize, mut next: F) -> Option<Vec<Vec<f64>>>
where
    T: ComplexField<RealField = f64>,
    F: FnMut() -> DMatrix<T>,
{
    let mut q = DMatrix::<T>::identity(dim, dim);
    let mut since = 0usize;
    let reorth = |q: &DMatrix<T>, logs: Option<&mut Vec<f64>>| -> Option<DMatrix<T>> {
        let qr = q.clone().qr();
        let r = qr.r();
        let mut diag = Vec::with_capacity(dim);
        for i in 0..dim {
            let x = r[(i, i)].clone().modulus();
            if !(x.is_finite() && x > 0.0) {
                return None;
            }
            diag.push(x.ln());
        }
        if let Some(acc) = logs {
            for (a, d) in acc.iter_mut().zip(diag) {
                *a += d;
            }
        }
        Some(qr.q())
    };

    for _ in 0..opts.warmup {
        q = next() * q;
        since += 1;
        if since == reorth_every || outgrown(&q) {
            q = reorth(&q, None)?;
            since = 0;
        }
    }
    q = reorth(&q, None)?;
    since = 0;

    let bl = opts.batch_len();
    let mut batches = Vec::with_capacity(opts.batches);
    for _ in 0..opts.batches {
        let mut acc = vec![0.0; dim];
        for step in 0..bl {
            q = next() * q;
            since += 1;
            if since == reorth_every || step + 1 == bl || outgrown(&q) {
                q = reorth(&q, Some(&mut acc))?;
                since = 0;
            }
        }
        batches.push(acc.into_iter().map(|x| x / bl as f64).collect());
    }
    Some(batches)
}

/// Averages the batches and sorts positions by decreasing mean.
fn summarize(batches: Vec<Vec<f64>>) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let dim = batches[0].len();
    let stats: Vec<(f64, f64)> = (0..dim)
        .map(|p| mean_and_se(&batches.iter().map(|b| b[p]).collect::<Vec<_>>()))
        .collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| stats[b].0.total_cmp(&stats[a].0));
    let exps = order.iter().map(|&p| stats[p].0).collect();
    let ses = order.iter().map(|&p| stats[p].1).collect();
    let sorted = batches.iter().map(|b| order.iter().map(|&p| b[p]).collect()).collect();
    (exps, ses, sorted)
}

fn ensemble_batches<B: BlockEnsemble + ?Sized, T: ComplexField<RealField = f64>>(
    ens: &B,
    e: T,
    opts: &LyapunovOptions,
    reorth_every: usize,
    seed: u64,
) -> Result<Option<Vec<Vec<f64>>>> {
    let mut rng = disorder_rng(seed, 0);
    let (_, s0) = ens.draw_site(&mut rng);
    let mut prev_inv = s0.clone().try_inverse().ok_or(Error::SingularHopping { index: 0, det: 0.0 })?;
    let mut prev = s0;
    let mut failed = false;
    let next = || {
        let (v, s) = ens.draw_site(&mut rng);
        let a = transfer_from_inverse(&v, &prev, &prev_inv, e.clone());
        match s.clone().try_inverse() {
            Some(inv) => prev_inv = inv,
            None => failed = true,
        }
        prev = s;
        a
    };
    let out = qr_batches(2 * ens.ell(), opts, reorth_every, next);
    if failed {
        return Err(Error::SingularHopping { index: 0, det: 0.0 });
    }
    Ok(out)
}

/// Full Lyapunov spectrum of the i.i.d. cocycle `A_k^E` of an ensemble at
/// energy `e` (real or complex). Retries once with half the
/// re-orthonormalization interval if non-finite values appear.
pub fn lyapunov_spectrum<B: BlockEnsemble + ?Sized>(
    ens: &B,
    e: Complex64,
    opts: &LyapunovOptions,
    seed: u64,
) -> Result<LyapunovSpectrum> {
    opts.validate()?;
    let run = |reorth: usize| -> Result<Option<Vec<Vec<f64>>>> {
        if e.im == 0.0 {
            ensemble_batches(ens, e.re, opts, reorth, seed)
        } else {
            ensemble_batches(ens, e, opts, reorth, seed)
        }
    };
    let mut reorth = opts.reorth_every;
    let mut batches = run(reorth)?;
    if batches.is_none() {
        reorth = (reorth / 2).max(1);
        batches = run(reorth)?;
    }
    let batches = batches.ok_or(Error::NonFinite { reorth_every: reorth })?;
    let (exponents, std_errors, batch_exponents) = summarize(batches);
    Ok(LyapunovSpectrum {
        energy_re: e.re,
        energy_im: e.im,
        exponents,
        std_errors,
        steps: opts.batch_len() * opts.batches,
        seed,
        reorth_every: reorth,
        batch_exponents,
    })
}

/// Spectra at several energies, evaluated in parallel with one shared seed.
pub fn lyapunov_spectra<B: BlockEnsemble + ?Sized>(
    ens: &B,
    energies: &[Complex64],
    opts: &LyapunovOptions,
    seed: u64,
) -> Result<Vec<LyapunovSpectrum>> {
    energies.par_iter().map(|&e| lyapunov_spectrum(ens, e, opts, seed)).collect()
}

/// `γ(E) = (γ_1 + … + γ_ℓ)/ℓ` and its batch standard error.
pub fn lyapunov_index(spec: &LyapunovSpectrum) -> (f64, f64) {
    let ell = spec.exponents.len() / 2;
    let per_batch: Vec<f64> =
        spec.batch_exponents.iter().map(|b| b[..ell].iter().sum::<f64>() / ell as f64).collect();
    let value = spec.exponents[..ell].iter().sum::<f64>() / ell as f64;
    (value, mean_and_se(&per_batch).1)
}

/// `∫ log|E − E′| dN(E′)` by the midpoint rule on the histogram.
pub fn log_potential(dos: &DosHistogram, e: Complex64) -> f64 {
    dos.midpoints().iter().zip(&dos.mass).map(|(&x, &m)| m * (e - x).norm().ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThoulessReport {
    pub energy_re: f64,
    pub energy_im: f64,
    pub lyapunov_index: f64,
    pub lyapunov_se: f64,
    /// `−(1/ℓ) E log|det S|`.
    pub det_term: f64,
    pub log_potential: f64,
    /// `γ(E) − det_term − log_potential`.
    pub residual: f64,
}

pub fn thouless_check<B: BlockEnsemble + ?Sized>(
    ens: &B,
    e: Complex64,
    dos: &DosHistogram,
    opts: &LyapunovOptions,
    seed: u64,
) -> Result<ThoulessReport> {
    if dos.mass.is_empty() || dos.total_mass() <= 0.0 {
        return Err(Error::EmptyDos);
    }
    let spec = lyapunov_spectrum(ens, e, opts, seed)?;
    let (index, se) = lyapunov_index(&spec);
    let det_term = -ens.mean_log_abs_det_hopping() / ens.ell() as f64;
    let lp = log_potential(dos, e);
    Ok(ThoulessReport {
        energy_re: e.re,
        energy_im: e.im,
        lyapunov_index: index,
        lyapunov_se: se,
        det_term,
        log_potential: lp,
        residual: index - det_term - lp,
    })
}

/// Top exponent of a reduced 2×2 cocycle with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedExponent {
    pub value: f64,
    pub se: f64,
    /// Largest `|det − 1|` over all sampled factors, when checked.
    pub max_det_defect: Option<f64>,
}

fn top_exponent_2x2<F: FnMut() -> DMatrix<f64>>(opts: &LyapunovOptions, next: F) -> Result<(f64, f64)> {
    opts.validate()?;
    let batches = qr_batches(2, opts, opts.reorth_every, next).ok_or(Error::NonFinite { reorth_every: opts.reorth_every })?;
    let (exps, ses, _) = summarize(batches);
    Ok((exps[0], ses[0]))
}

/// `[[0, 1], [−1, c·ν]]`: the Anderson transfer matrix at zero energy with
/// disorder scaled by `c`.
pub fn anderson_zero_energy_matrix(coupling: f64, nu: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, coupling * nu])
}

pub fn anderson_lyapunov_2x2(
    coupling: f64,
    rho: &SingleSiteDistribution,
    opts: &LyapunovOptions,
    seed: u64,
) -> Result<ReducedExponent> {
    rho.validate()?;
    let mut rng = disorder_rng(seed, 0);
    let (value, se) = top_exponent_2x2(opts, || anderson_zero_energy_matrix(coupling, rho.sample(&mut rng)))?;
    Ok(ReducedExponent { value, se, max_det_defect: None })
}

/// `G̃ = [[1, x/(γ²−1)], [y, 1 + xy/(γ²−1)]]`, unimodular.
pub fn two_step_matrix(gamma: f64, x: f64, y: f64) -> DMatrix<f64> {
    let c = gamma * gamma - 1.0;
    DMatrix::from_row_slice(2, 2, &[1.0, x / c, y, 1.0 + x * y / c])
}

fn check_strong_anisotropy(gamma: f64) -> Result<()> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidParams(format!("two-step reduction needs gamma > 1, got {gamma}")));
    }
    Ok(())
}

/// Exponent of the i.i.d. two-step matrices `G̃_n` built from
/// `(ν_{2n−1}, ν_{2n})`.
pub fn two_step_lyapunov(
    gamma: f64,
    rho: &SingleSiteDistribution,
    opts: &LyapunovOptions,
    seed: u64,
) -> Result<ReducedExponent> {
    check_strong_anisotropy(gamma)?;
    rho.validate()?;
    let mut rng = disorder_rng(seed, 0);
    let mut worst = 0.0_f64;
    let (value, se) = top_exponent_2x2(opts, || {
        let x = rho.sample(&mut rng);
        let y = rho.sample(&mut rng);
        let g = two_step_matrix(gamma, x, y);
        worst = worst.max((g.determinant() - 1.0).abs());
        g
    })?;
    Ok(ReducedExponent { value, se, max_det_defect: Some(worst) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnisotropyBranch {
    /// `0 < γ < 1`: one-step reduction to a scaled Anderson cocycle.
    Weak,
    /// `γ > 1`: two-step reduction.
    Strong,
}

/// Predicted zero-energy exponents from a reduced 2×2 exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroEnergyDecomposition {
    pub gamma: f64,
    pub branch: AnisotropyBranch,
    /// `γ^D̃` (weak branch) or `γ^G̃` (strong branch).
    pub reduced_exponent: f64,
    pub reduced_se: f64,
    /// `½ log|(1+γ)/(1−γ)|`, the per-step shift in both branches.
    pub shift: f64,
    /// `γ_1 ≥ γ_2 ≥ −γ_2 ≥ −γ_1`.
    pub predicted: [f64; 4],
    /// Standard error carried over to each predicted exponent.
    pub predicted_se: [f64; 4],
}

/// `½ log|(1+γ)/(1−γ)|`.
pub fn zero_energy_shift(gamma: f64) -> f64 {
    0.5 * ((1.0 + gamma) / (1.0 - gamma)).abs().ln()
}

/// Zero-energy exponents of the XY cocycle.
///
/// Weak branch: `{±γ^D̃ ± s}` with `s = ½ log((1+γ)/(1−γ))`.
/// Strong branch: the two-step product splits into
/// `((γ−1)/(γ+1)) G̃_n ⊕ ((γ+1)/(γ−1)) G̃_n`, so per step the exponents are
/// `{±½γ^G̃ ± s}` with `s = ½ log((γ+1)/(γ−1))`.
pub fn zero_energy_closed_form(gamma: f64, measured: &ReducedExponent) -> Result<ZeroEnergyDecomposition> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma == 1.0 {
        return Err(Error::InvalidParams(format!("zero-energy reduction needs gamma in (0,1) or (1,inf), got {gamma}")));
    }
    let shift = zero_energy_shift(gamma);
    let (branch, rate, rate_se) = if gamma < 1.0 {
        (AnisotropyBranch::Weak, measured.value, measured.se)
    } else {
        (AnisotropyBranch::Strong, 0.5 * measured.value, 0.5 * measured.se)
    };
    let g1 = rate + shift;
    let g2 = (rate - shift).abs();
    Ok(ZeroEnergyDecomposition {
        gamma,
        branch,
        reduced_exponent: measured.value,
        reduced_se: measured.se,
        shift,
        predicted: [g1, g2, -g2, -g1],
        predicted_se: [rate_se; 4],
    })
}

/// Measures the reduced exponent for `ρ` and returns the prediction.
pub fn zero_energy_prediction(
    gamma: f64,
    rho: &SingleSiteDistribution,
    opts: &LyapunovOptions,
    seed: u64,
) -> Result<ZeroEnergyDecomposition> {
    let measured = if gamma > 1.0 {
        two_step_lyapunov(gamma, rho, opts, seed)?
    } else if gamma > 0.0 && gamma < 1.0 {
        anderson_lyapunov_2x2(1.0 / (1.0 - gamma * gamma).sqrt(), rho, opts, seed)?
    } else {
        return Err(Error::InvalidParams(format!("zero-energy reduction needs gamma in (0,1) or (1,inf), got {gamma}")));
    };
    zero_energy_closed_form(gamma, &measured)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSample {
    pub alpha: f64,
    pub f: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRoot {
    pub alpha: f64,
    pub f: f64,
    pub se: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScan {
    pub gamma: f64,
    pub shift: f64,
    pub samples: Vec<AlphaSample>,
    pub roots: Vec<AlphaRoot>,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Width below which a bisection bracket is accepted.
pub const ALPHA_BRACKET_WIDTH: f64 = 1e-2;

/// Scans `f(α) = Γ_0(γ, α) − ½ log((1+γ)/(1−γ))` on `grid_points` equally
/// spaced values of `α`, where `±Γ_0(γ, α)` are the exponents of
/// `[[0, 1], [−1, αν/√(1−γ²)]]`, and bisects every sign change down to
/// [`ALPHA_BRACKET_WIDTH`]. All evaluations share one random stream, so `f`
/// is a deterministic function of `α` for a given seed.
pub fn critical_alpha_scan(
    gamma: f64,
    rho: &SingleSiteDistribution,
    alpha_lo: f64,
    alpha_hi: f64,
    grid_points: usize,
    opts: &LyapunovOptions,
    seed: u64,
) -> Result<AlphaScan> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParams(format!("alpha scan needs gamma in (0, 1), got {gamma}")));
    }
    if !(alpha_lo < alpha_hi) || grid_points < 2 {
        return Err(Error::InvalidParams("need alpha_lo < alpha_hi and at least 2 grid points".into()));
    }
    let shift = zero_energy_shift(gamma);
    let scale = 1.0 / (1.0 - gamma * gamma).sqrt();
    let eval = |alpha: f64| -> Result<AlphaSample> {
        let r = anderson_lyapunov_2x2(alpha * scale, rho, opts, seed)?;
        Ok(AlphaSample { alpha, f: r.value - shift, se: r.se })
    };
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| alpha_lo + (alpha_hi - alpha_lo) * i as f64 / (grid_points - 1) as f64)
        .collect();
    let samples: Vec<AlphaSample> = grid.par_iter().map(|&a| eval(a)).collect::<Result<_>>()?;
    let (f_lo, f_hi) = (samples[0].f, samples[samples.len() - 1].f);

    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        if a.f == 0.0 {
            roots.push(AlphaRoot { alpha: a.alpha, f: a.f, se: a.se, bracket: (a.alpha, a.alpha) });
            continue;
        }
        if a.f.signum() == b.f.signum() || b.f == 0.0 {
            continue;
        }
        while b.alpha - a.alpha > ALPHA_BRACKET_WIDTH {
            let mid = eval(0.5 * (a.alpha + b.alpha))?;
            if mid.f.signum() == a.f.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        let best = if a.f.abs() <= b.f.abs() { a } else { b };
        roots.push(AlphaRoot { alpha: best.alpha, f: best.f, se: best.se, bracket: (a.alpha, b.alpha) });
    }
    if let Some(last) = samples.last() {
        if last.f == 0.0 {
            roots.push(AlphaRoot { alpha: last.alpha, f: 0.0, se: last.se, bracket: (last.alpha, last.alpha) });
        }
    }
    if roots.is_empty() {
        return Err(Error::NoRootBracketed { lo: alpha_lo, hi: alpha_hi, f_lo, f_hi });
    }
    Ok(AlphaScan { gamma, shift, samples, roots, f_lo, f_hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RandomBlockEnsemble, XyEnsemble};
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    struct FreeScalar;

    impl BlockEnsemble for FreeScalar {
        fn ell(&self) -> usize {
            1
        }
        fn draw_site(&self, _: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
            (DMatrix::zeros(1, 1), DMatrix::identity(1, 1))
        }
        fn mean_log_abs_det_hopping(&self) -> f64 {
            0.0
        }
    }

    fn quick() -> LyapunovOptions {
        LyapunovOptions { steps: 20_000, batches: 20, ..Default::default() }
    }

    #[test]
    fn free_scalar_inside_band_has_zero_exponent() {
        let s = lyapunov_spectrum(&FreeScalar, Complex64::new(1.2, 0.0), &quick(), 1).unwrap();
        assert!(s.exponents[0].abs() < 1e-3);
    }

    #[test]
    fn free_scalar_outside_band_matches_constant_matrix_eigenvalue() {
        let s = lyapunov_spectrum(&FreeScalar, Complex64::new(3.0, 0.0), &quick(), 1).unwrap();
        // dominant eigenvalue of [[0, 1], [-1, -3]] has modulus (3 + √5)/2
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -3.0]);
        let oracle = m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max).ln();
        assert!((oracle - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
        assert!((s.exponents[0] - oracle).abs() < 1e-3);
        assert!((s.exponents[1] + oracle).abs() < 1e-3);
    }

    #[test]
    fn xy_pairs_are_symmetric() {
        let ens = XyEnsemble::new(0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5)).unwrap();
        let s = lyapunov_spectrum(&ens, Complex64::new(1.5, 0.0), &quick(), 3).unwrap();
        assert_eq!(s.exponents.len(), 4);
        assert!(s.exponents.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.pair_symmetry_sigma() < 3.0, "{:?}", s);
        let c = lyapunov_spectrum(&ens, Complex64::new(1.0, 0.5), &quick(), 3).unwrap();
        assert!(c.pair_symmetry_sigma() < 3.0);
        let (idx, se) = lyapunov_index(&c);
        assert!(idx > 0.0 && se > 0.0);
    }

    #[test]
    fn lyapunov_index_of_pair_spectrum() {
        let spec = LyapunovSpectrum {
            energy_re: 0.0,
            energy_im: 0.0,
            exponents: vec![0.9, 0.3, -0.3, -0.9],
            std_errors: vec![0.0; 4],
            steps: 2,
            seed: 0,
            reorth_every: 1,
            batch_exponents: vec![vec![0.8, 0.4, -0.4, -0.8], vec![1.0, 0.2, -0.2, -1.0]],
        };
        let (v, _) = lyapunov_index(&spec);
        assert!((v - 0.6).abs() < 1e-15);
    }

    #[test]
    fn general_ensemble_runs() {
        let ens = RandomBlockEnsemble::random(2, SingleSiteDistribution::uniform(-1.0, 1.0), 4, 7).unwrap();
        let s = lyapunov_spectrum(&ens, Complex64::new(0.3, 0.0), &quick(), 2).unwrap();
        assert!(s.pair_symmetry_sigma() < 3.0);
    }

    #[test]
    fn option_validation() {
        let ens = XyEnsemble::new(0.5, SingleSiteDistribution::uniform(0.0, 1.0)).unwrap();
        let bad = LyapunovOptions { steps: 10, ..Default::default() };
        assert!(lyapunov_spectrum(&ens, Complex64::new(0.0, 0.0), &bad, 0).is_err());
        let bad = LyapunovOptions { reorth_every: 80, ..Default::default() };
        assert!(lyapunov_spectrum(&ens, Complex64::new(0.0, 0.0), &bad, 0).is_err());
    }

    #[test]
    fn degenerate_disorder_reduced_exponents_vanish() {
        let rho = SingleSiteDistribution::degenerate(0.0);
        let a = anderson_lyapunov_2x2(1.0, &rho, &quick(), 0).unwrap();
        assert!(a.value.abs() < 1e-3);
        let g = two_step_lyapunov(2.0, &rho, &quick(), 0).unwrap();
        assert!(g.value.abs() < 1e-12);
        assert!(two_step_matrix(2.0, 0.0, 0.0) == DMatrix::identity(2, 2));
    }

    #[test]
    fn two_step_matrices_are_unimodular() {
        let mut rng = disorder_rng(4, 4);
        for _ in 0..1000 {
            let g = 1.0 + 3.0 * rng.random::<f64>() + 1e-3;
            let (x, y) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let scale = 1.0 + (x * y / (g * g - 1.0)).abs();
            assert!((two_step_matrix(g, x, y).determinant() - 1.0).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn reduced_exponents_positive_and_reproducible() {
        let rho = SingleSiteDistribution::two_point(0.0, 1.0, 0.5);
        let a = anderson_lyapunov_2x2(1.0, &rho, &quick(), 1).unwrap();
        let b = anderson_lyapunov_2x2(1.0, &rho, &quick(), 2).unwrap();
        assert!(a.value > 5.0 * a.se);
        assert!((a.value - b.value).abs() < 3.0 * (a.se.powi(2) + b.se.powi(2)).sqrt());
        let g = two_step_lyapunov(2.0, &rho, &quick(), 1).unwrap();
        assert!(g.value > 5.0 * g.se);
        assert!(g.max_det_defect.unwrap() < 1e-14);
    }

    #[test]
    fn closed_form_bookkeeping() {
        let s = zero_energy_shift(0.5);
        assert!((s - 0.5 * 3f64.ln()).abs() < 1e-15);
        let d = zero_energy_closed_form(0.5, &ReducedExponent { value: s, se: 0.0, max_det_defect: None }).unwrap();
        assert_eq!(d.predicted[1], 0.0);
        assert!(d.predicted.iter().sum::<f64>().abs() < 1e-15);
        assert!(zero_energy_closed_form(1.0, &ReducedExponent { value: 0.1, se: 0.0, max_det_defect: None }).is_err());
        assert!(zero_energy_closed_form(0.0, &ReducedExponent { value: 0.1, se: 0.0, max_det_defect: None }).is_err());
    }

    #[test]
    fn shift_vanishes_as_anisotropy_vanishes() {
        assert!(zero_energy_shift(1e-8) < 1e-7);
        assert!(zero_energy_shift(0.1) < zero_energy_shift(0.5));
    }
}
