//! Eigenfunction correlators, decay fits and a Wegner-type probe.
//!
//! For an energy window `J` the correlator is
//! `Q_J(j, k) = Σ_{λ ∈ σ(M) ∩ J} ‖ψ_λ(j)‖ ‖ψ_λ(k)‖` (sites 0-based). It
//! dominates `‖P_j g(M) χ_J(M) P_kᵗ‖` for every `|g| ≤ 1`, in particular the
//! time evolution `g(x) = e^{−itx}`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::BlockEnsemble;
use crate::spectral::{count_below, eigensolve, SpectralData};

/// Sites within this distance of either end are left out of decay fits.
pub const BOUNDARY_BAND: usize = 5;

pub const DEFAULT_ZETA: f64 = 0.9;

/// Distance bins whose geometric mean falls below this fraction of the mean
/// diagonal are treated as round-off and end the fit range.
pub const NOISE_FLOOR: f64 = 1e-13;

const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorField {
    pub window: (f64, f64),
    pub mean: DMatrix<f64>,
    /// Standard error of the mean entrywise; zero for one realization.
    pub se: DMatrix<f64>,
    pub realizations: usize,
    /// Realizations with no eigenvalue in the window.
    pub empty_realizations: usize,
}

impl CorrelatorField {
    pub fn n(&self) -> usize {
        self.mean.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.mean.iter().all(|&x| x == 0.0)
    }

    /// `max (Q(j,k) − √(Q(j,j)Q(k,k)))` and `max |Q − Qᵗ|`.
    pub fn invariant_defects(&self) -> (f64, f64) {
        let q = &self.mean;
        let n = q.nrows();
        let mut cs = f64::NEG_INFINITY;
        for j in 0..n {
            for k in 0..n {
                cs = cs.max(q[(j, k)] - (q[(j, j)] * q[(k, k)]).sqrt());
            }
        }
        (cs.max(0.0), (q - q.transpose()).amax())
    }
}

fn check_window(window: (f64, f64)) -> Result<()> {
    if window.0.is_nan() || window.1.is_nan() || window.0 > window.1 {
        return Err(Error::InvalidParams(format!("energy window [{}, {}] is empty", window.0, window.1)));
    }
    Ok(())
}

fn site_weights(s: &SpectralData, window: (f64, f64)) -> Result<DMatrix<f64>> {
    if s.eigenvectors.is_none() {
        return Err(Error::InvalidParams("eigenvectors required".into()));
    }
    let idx = s.indices_in(window.0, window.1);
    let n = s.n_sites();
    let cols: Vec<usize> = idx.collect();
    Ok(DMatrix::from_fn(n, cols.len(), |j, c| s.site_norm(cols[c], j).unwrap_or(0.0)))
}

fn correlator_matrix(s: &SpectralData, window: (f64, f64)) -> Result<(DMatrix<f64>, bool)> {
    let w = site_weights(s, window)?;
    let empty = w.ncols() == 0;
    Ok((&w * w.transpose(), empty))
}

/// Single-realization correlator.
pub fn eigenfunction_correlator(s: &SpectralData, window: (f64, f64)) -> Result<CorrelatorField> {
    check_window(window)?;
    let (q, empty) = correlator_matrix(s, window)?;
    let n = q.nrows();
    Ok(CorrelatorField {
        window,
        mean: q,
        se: DMatrix::zeros(n, n),
        realizations: 1,
        empty_realizations: empty as usize,
    })
}

/// Ensemble mean of the correlator over realizations `0..count` of `seed`.
pub fn ensemble_correlator<B: BlockEnsemble + ?Sized>(
    ens: &B,
    n: usize,
    window: (f64, f64),
    count: usize,
    seed: u64,
) -> Result<CorrelatorField> {
    check_window(window)?;
    if count == 0 {
        return Err(Error::InvalidParams("need at least one realization".into()));
    }
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum_sq = DMatrix::<f64>::zeros(n, n);
    let mut empty = 0;
    for start in (0..count).step_by(CHUNK) {
        let end = (start + CHUNK).min(count);
        let fields: Vec<(DMatrix<f64>, bool)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let m = ens.realize(n, seed, i as u64)?;
                let s = eigensolve(&m, true)?;
                correlator_matrix(&s, window)
            })
            .collect::<Result<_>>()?;
        for (q, e) in fields {
            sum_sq += q.component_mul(&q);
            sum += q;
            empty += e as usize;
        }
    }
    let c = count as f64;
    let mean = sum / c;
    let se = if count > 1 {
        let var = (sum_sq / c - mean.component_mul(&mean)).map(|x| x.max(0.0)) * (c / (c - 1.0));
        var.map(|v| (v / c).sqrt())
    } else {
        DMatrix::zeros(n, n)
    };
    Ok(CorrelatorField { window, mean, se, realizations: count, empty_realizations: empty })
}

/// `‖P_j e^{−itM} χ_J(M) P_kᵗ‖` (spectral norm of the ℓ×ℓ block).
pub fn propagator_block_norm(s: &SpectralData, window: (f64, f64), j: usize, k: usize, t: f64) -> Result<f64> {
    let vecs = s.eigenvectors.as_ref().ok_or_else(|| Error::InvalidParams("eigenvectors required".into()))?;
    let ell = s.ell;
    let mut block = DMatrix::<Complex64>::zeros(ell, ell);
    for m in s.indices_in(window.0, window.1) {
        let phase = Complex64::from_polar(1.0, -t * s.eigenvalues[m]);
        let pj = vecs.view((j * ell, m), (ell, 1));
        let pk = vecs.view((k * ell, m), (ell, 1));
        for a in 0..ell {
            for b in 0..ell {
                block[(a, b)] += phase * pj[a] * pk[b];
            }
        }
    }
    Ok(spectral_norm(&block))
}

/// Largest singular value via the Hermitian eigenvalues of `AᴴA`.
fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    let h = a.adjoint() * a;
    let eig = SymmetricEigen::new(h);
    eig.eigenvalues.iter().fold(0.0_f64, |m, &x| m.max(x)).max(0.0).sqrt()
}

/// `max_t ‖P_j e^{−itM} χ_J(M) P_kᵗ‖` over `t_grid`; a lower bound for the
/// supremum over all `t`, itself at most `Q(j, k)`.
pub fn dynamical_sup_lower_bound(
    s: &SpectralData,
    window: (f64, f64),
    j: usize,
    k: usize,
    t_grid: &[f64],
) -> Result<f64> {
    check_window(window)?;
    let n = s.n_sites();
    if j >= n || k >= n {
        return Err(Error::InvalidParams(format!("sites ({j}, {k}) out of range for n = {n}")));
    }
    let mut best = 0.0_f64;
    for &t in t_grid {
        best = best.max(propagator_block_norm(s, window, j, k, t)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBin {
    pub dist: usize,
    /// Mean over pairs at this distance of `log Q(j, k)`.
    pub mean_log_q: f64,
    pub se: f64,
    pub count: usize,
}

/// Distance-binned geometric means of the ensemble-mean correlator, with
/// `boundary` sites dropped at each end. Bins stop at the first distance
/// with a non-positive entry or a mean below the noise floor.
pub fn decay_bins(field: &CorrelatorField, boundary: usize) -> Vec<DecayBin> {
    let q = &field.mean;
    let n = q.nrows();
    if n <= 2 * boundary {
        return Vec::new();
    }
    let (lo, hi) = (boundary, n - boundary);
    let diag = (lo..hi).map(|j| q[(j, j)]).sum::<f64>() / (hi - lo) as f64;
    if !(diag > 0.0) {
        return Vec::new();
    }
    let floor = (NOISE_FLOOR * diag).ln();
    let mut bins = Vec::new();
    for d in 1..hi - lo {
        let logs: Vec<f64> = (lo..hi - d).map(|j| q[(j, j + d)]).map(f64::ln).collect();
        if logs.iter().any(|x| !x.is_finite()) {
            break;
        }
        let c = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / c;
        if mean < floor {
            break;
        }
        let se = if logs.len() > 1 {
            (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (c - 1.0) / c).sqrt()
        } else {
            0.0
        };
        bins.push(DecayBin { dist: d, mean_log_q: mean, se, count: logs.len() });
    }
    bins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub zeta: f64,
    pub eta: f64,
    /// 95% confidence interval for `eta`.
    pub eta_ci: (f64, f64),
    #[serde(rename = "C")]
    pub c: f64,
    pub bins: Vec<DecayBin>,
    pub r_squared: f64,
    /// t-statistic of a quadratic term in `|j−k|^ζ`.
    pub curvature_t: f64,
    /// Residuals are systematically curved: the model `log Q ≈ log C − η d^ζ`
    /// does not fit.
    pub curved: bool,
}

impl DecayFit {
    pub fn ci_excludes_zero(&self) -> bool {
        self.eta_ci.0 > 0.0 || self.eta_ci.1 < 0.0
    }
}

fn t_quantile(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64).map(|t| t.inverse_cdf(0.975)).unwrap_or(f64::INFINITY)
}

/// Least squares on `(x, y)` with design columns `1, x, .., x^deg`; returns
/// coefficients, their standard errors and the residual sum of squares.
fn polyfit(x: &[f64], y: &[f64], deg: usize) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let m = x.len();
    let p = deg + 1;
    if m <= p {
        return None;
    }
    let a = DMatrix::from_fn(m, p, |i, k| x[i].powi(k as i32));
    let yv = nalgebra::DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let inv = ata.try_inverse()?;
    let beta = &inv * a.transpose() * &yv;
    let resid = &yv - &a * &beta;
    let rss = resid.norm_squared();
    let s2 = rss / (m - p) as f64;
    let se = (0..p).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect();
    Some((beta.iter().copied().collect(), se, rss))
}

/// Fits `log Q(j, k) ≈ log C − η |j−k|^ζ` to the distance bins.
pub fn fit_decay(field: &CorrelatorField, zeta: f64) -> Result<DecayFit> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidParams(format!("zeta = {zeta} outside (0, 1]")));
    }
    let bins = decay_bins(field, BOUNDARY_BAND);
    if bins.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} positive distance bins after boundary exclusion, need 4",
            bins.len()
        )));
    }
    let x: Vec<f64> = bins.iter().map(|b| (b.dist as f64).powf(zeta)).collect();
    let y: Vec<f64> = bins.iter().map(|b| b.mean_log_q).collect();
    let (beta, se, rss) = polyfit(&x, &y, 1).ok_or_else(|| Error::InsufficientData("singular design".into()))?;
    let eta = -beta[1];
    let half = t_quantile(x.len() - 2) * se[1];
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let tss = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let (curvature_t, curved) = match polyfit(&x, &y, 2) {
        Some((b2, se2, _)) if x.len() > 3 => {
            let t = if se2[2] > 0.0 {
                b2[2] / se2[2]
            } else if b2[2].abs() > 0.0 {
                f64::INFINITY.copysign(b2[2])
            } else {
                0.0
            };
            (t, t.abs() > t_quantile(x.len() - 3) && rss > 1e-10 * tss)
        }
        _ => (0.0, false),
    };
    Ok(DecayFit {
        zeta,
        eta,
        eta_ci: (eta - half, eta + half),
        c: beta[0].exp(),
        bins,
        r_squared,
        curvature_t,
        curved,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WegnerRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub sites: usize,
    pub epsilon: f64,
    pub probability: f64,
    pub se: f64,
    pub samples: usize,
}

/// Empirical `P(dist(E, σ(M_Λ)) ≤ e^{−σ L^β})` on boxes of `2L + 1` sites,
/// decided by eigenvalue counting. Realization `i` for box `L` uses stream
/// `(L << 32) | i` of `seed`.
pub fn wegner_probe<B: BlockEnsemble + ?Sized>(
    ens: &B,
    e: f64,
    l_list: &[usize],
    beta: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<WegnerRow>> {
    if !e.is_finite() || !beta.is_finite() || !sigma.is_finite() {
        return Err(Error::InvalidParams("E, beta and sigma must be finite".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    l_list
        .iter()
        .map(|&l| {
            let sites = 2 * l + 1;
            let eps = (-sigma * (l as f64).powf(beta)).exp();
            let hits: Vec<bool> = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let m = ens.realize(sites, seed, ((l as u64) << 32) | i as u64)?;
                    Ok(count_below(&m, e + eps) > count_below(&m, e - eps))
                })
                .collect::<Result<_>>()?;
            let p = hits.iter().filter(|&&h| h).count() as f64 / samples as f64;
            Ok(WegnerRow {
                l,
                sites,
                epsilon: eps,
                probability: p,
                se: (p * (1.0 - p) / samples as f64).sqrt(),
                samples,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SingleSiteDistribution, XyEnsemble};
    use crate::spectral::check_gap;

    fn xy(gamma: f64, rho: SingleSiteDistribution) -> XyEnsemble {
        XyEnsemble::new(gamma, rho).unwrap()
    }

    fn spectral(n: usize, seed: u64) -> SpectralData {
        let ens = xy(0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5));
        eigensolve(&ens.realize(n, seed, 0).unwrap(), true).unwrap()
    }

    /// `e^{−itM}` restricted to `J` by dense complex eigen-reconstruction
    /// from a fresh real eigendecomposition of the assembled matrix.
    fn dense_evolution(m: &DMatrix<f64>, window: (f64, f64), t: f64) -> DMatrix<Complex64> {
        let eig = SymmetricEigen::new(m.clone());
        let d = m.nrows();
        let mut u = DMatrix::<Complex64>::zeros(d, d);
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < window.0 || lam > window.1 {
                continue;
            }
            let v = eig.eigenvectors.column(i);
            let ph = Complex64::from_polar(1.0, -t * lam);
            for a in 0..d {
                for b in 0..d {
                    u[(a, b)] += ph * v[a] * v[b];
                }
            }
        }
        u
    }

    #[test]
    fn empty_window_gives_zero_field() {
        let s = spectral(10, 1);
        let f = eigenfunction_correlator(&s, (100.0, 101.0)).unwrap();
        assert!(f.is_zero());
        assert_eq!(f.empty_realizations, 1);
    }

    #[test]
    fn single_site_completeness() {
        let s = spectral(1, 2);
        let f = eigenfunction_correlator(&s, (f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        assert!((f.mean[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_cauchy_schwarz() {
        let s = spectral(30, 3);
        let f = eigenfunction_correlator(&s, (0.5, 2.0)).unwrap();
        let (cs, sym) = f.invariant_defects();
        assert!(cs <= 1e-14 && sym <= 1e-14);
    }

    #[test]
    fn domination_against_dense_evolution() {
        let ens = xy(0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
        let m = ens.realize(30, 4, 0).unwrap();
        let s = eigensolve(&m, true).unwrap();
        let window = (0.5, 2.0);
        let f = eigenfunction_correlator(&s, window).unwrap();
        let dense = m.dense();
        for step in 0..200 {
            let t = step as f64 * 0.05;
            let u = dense_evolution(&dense, window, t);
            for &(j, k) in &[(0, 0), (3, 9), (10, 29), (15, 16)] {
                let blk = u.view((2 * j, 2 * k), (2, 2)).into_owned();
                let norm = spectral_norm(&blk);
                assert!(norm <= f.mean[(j, k)] + 1e-12, "t={t} ({j},{k}) {norm} > {}", f.mean[(j, k)]);
                if step % 50 == 0 {
                    let via = propagator_block_norm(&s, window, j, k, t).unwrap();
                    assert!((via - norm).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sup_bound_basics() {
        let s = spectral(12, 5);
        let all = (f64::NEG_INFINITY, f64::INFINITY);
        let at0 = dynamical_sup_lower_bound(&s, all, 4, 4, &[0.0]).unwrap();
        assert!((at0 - 1.0).abs() < 1e-12);
        let off = dynamical_sup_lower_bound(&s, all, 2, 7, &[0.0]).unwrap();
        assert!(off < 1e-12);

        let window = (0.2, 3.0);
        let f = eigenfunction_correlator(&s, window).unwrap();
        let coarse: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let fine: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let a = dynamical_sup_lower_bound(&s, window, 1, 6, &coarse).unwrap();
        let b = dynamical_sup_lower_bound(&s, window, 1, 6, &fine).unwrap();
        assert!(b >= a);
        assert!(b <= f.mean[(1, 6)] + 1e-12);
    }

    #[test]
    fn ensemble_of_one_matches_single() {
        let ens = xy(0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5));
        let e = ensemble_correlator(&ens, 15, (0.5, 1.5), 1, 9).unwrap();
        let s = eigensolve(&ens.realize(15, 9, 0).unwrap(), true).unwrap();
        let f = eigenfunction_correlator(&s, (0.5, 1.5)).unwrap();
        assert_eq!(e.mean, f.mean);
    }

    fn synthetic(n: usize, rate: f64) -> CorrelatorField {
        let q = DMatrix::from_fn(n, n, |j, k| (-rate * j.abs_diff(k) as f64).exp());
        CorrelatorField {
            window: (0.0, 1.0),
            se: DMatrix::zeros(n, n),
            mean: q,
            realizations: 1,
            empty_realizations: 0,
        }
    }

    #[test]
    fn synthetic_exponential_fit() {
        let f = fit_decay(&synthetic(60, 0.5), 1.0).unwrap();
        assert!((f.eta - 0.5).abs() < 1e-10, "{}", f.eta);
        assert!((f.c - 1.0).abs() < 1e-8);
        assert!(!f.curved);
        assert!(f.ci_excludes_zero());
    }

    #[test]
    fn mismatched_zeta_is_flagged() {
        let f = fit_decay(&synthetic(60, 0.5), 0.5).unwrap();
        assert!(f.curved, "t = {}", f.curvature_t);
    }

    #[test]
    fn noise_floor_truncates_bins() {
        let bins = decay_bins(&synthetic(200, 0.5), BOUNDARY_BAND);
        let last = bins.last().unwrap();
        assert!(last.mean_log_q >= NOISE_FLOOR.ln());
        assert!(bins.len() < 70);
    }

    #[test]
    fn fit_rejects_tiny_fields() {
        assert!(matches!(fit_decay(&synthetic(12, 0.5), 1.0), Err(Error::InsufficientData(_))));
        assert!(fit_decay(&synthetic(40, 0.5), 0.0).is_err());
    }

    #[test]
    fn gapped_field_decays() {
        let ens = xy(0.5, SingleSiteDistribution::two_point(2.5, 3.5, 0.5));
        let f = ensemble_correlator(&ens, 80, (0.0, f64::INFINITY), 30, 11).unwrap();
        let fit = fit_decay(&f, DEFAULT_ZETA).unwrap();
        assert!(fit.eta > 0.0 && fit.ci_excludes_zero(), "{fit:?}");
        for i in 0..3 {
            let s = eigensolve(&ens.realize(40, 11, i).unwrap(), false).unwrap();
            assert!(check_gap(&s, 0.5));
        }
    }

    #[test]
    fn wegner_trivial_cases() {
        let ens = xy(0.5, SingleSiteDistribution::two_point(2.5, 3.5, 0.5));
        let rows = wegner_probe(&ens, 0.0, &[5, 10], 0.5, -10.0, 20, 1).unwrap();
        assert!(rows.iter().all(|r| r.probability == 1.0));
        let rows = wegner_probe(&ens, 0.0, &[5, 10, 20], 0.5, 1.0, 20, 1).unwrap();
        assert!(rows.iter().all(|r| r.probability == 0.0));
    }
}
