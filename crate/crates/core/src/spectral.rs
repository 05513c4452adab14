//! Eigen-decomposition, spectral symmetry and gap checks, density of states,
//! Floquet bands of periodic potentials and the union-over-periodic
//! approximation of the almost-sure spectrum.

use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hopping_block, sigma_z, BlockJacobiMatrix, SingleSiteDistribution};

/// Largest dense dimension `ℓn` accepted by [`eigensolve`].
pub const DEFAULT_DENSE_CAP: usize = 6000;

/// Absolute tolerance for merging touching intervals.
pub const MERGE_TOL: f64 = 1e-9;

/// Number of θ-intervals on `[0, π]` in the base Floquet grid.
pub const THETA_GRID: usize = 512;

const MAX_PERIODIC_WORDS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub ell: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: Option<DMatrix<f64>>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_sites(&self) -> usize {
        self.eigenvalues.len() / self.ell
    }

    /// `‖ψ_m(j)‖` for eigenvector `m` and 0-based site `j`.
    pub fn site_norm(&self, m: usize, j: usize) -> Option<f64> {
        let vecs = self.eigenvectors.as_ref()?;
        Some(vecs.view((j * self.ell, m), (self.ell, 1)).norm())
    }

    /// Indices of the eigenvalues in the closed window `[lo, hi]`.
    pub fn indices_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.eigenvalues.partition_point(|&x| x < lo);
        let end = self.eigenvalues.partition_point(|&x| x <= hi);
        start..end.max(start)
    }

    /// `max_m ‖Mψ_m − λ_mψ_m‖ / ‖M‖`, with `‖M‖` the largest |eigenvalue|.
    pub fn max_relative_residual(&self, m: &DMatrix<f64>) -> Option<f64> {
        let vecs = self.eigenvectors.as_ref()?;
        let scale = self.eigenvalues.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
        let mv = m * vecs;
        let mut worst = 0.0_f64;
        for (i, lam) in self.eigenvalues.iter().enumerate() {
            let r = (mv.column(i) - vecs.column(i) * *lam).norm();
            worst = worst.max(r / scale);
        }
        Some(worst)
    }

    /// `max |ΨᵗΨ − I|`.
    pub fn orthonormality_defect(&self) -> Option<f64> {
        let vecs = self.eigenvectors.as_ref()?;
        let g = vecs.transpose() * vecs - DMatrix::<f64>::identity(vecs.ncols(), vecs.ncols());
        Some(g.amax())
    }
}

pub fn eigensolve(m: &BlockJacobiMatrix, want_vectors: bool) -> Result<SpectralData> {
    eigensolve_with_cap(m, want_vectors, DEFAULT_DENSE_CAP)
}

pub fn eigensolve_with_cap(m: &BlockJacobiMatrix, want_vectors: bool, cap: usize) -> Result<SpectralData> {
    if m.dim() > cap {
        return Err(Error::TooLarge { dim: m.dim(), cap });
    }
    eigensolve_dense(m.dense(), m.ell(), want_vectors, m.fingerprint())
}

/// Dense symmetric eigensolve of an already assembled matrix. `fingerprint`
/// is reported if the solver fails to converge.
pub fn eigensolve_dense(
    mat: DMatrix<f64>,
    ell: usize,
    want_vectors: bool,
    fingerprint: u64,
) -> Result<SpectralData> {
    let dim = mat.nrows();
    let no_conv = || Error::NoConvergence { fingerprint, dim };
    if want_vectors {
        let eig = SymmetricEigen::try_new(mat, f64::EPSILON, 0).ok_or_else(no_conv)?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(SpectralData { ell, eigenvalues, eigenvectors: Some(vecs) })
    } else {
        // nalgebra only exposes a panicking values-only path
        let vals = catch_unwind(AssertUnwindSafe(|| mat.symmetric_eigenvalues())).map_err(|_| no_conv())?;
        let mut eigenvalues: Vec<f64> = vals.iter().copied().collect();
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(no_conv());
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(SpectralData { ell, eigenvalues, eigenvectors: None })
    }
}

/// Relative pivot size below which the factorization at `e` is abandoned and
/// redone at a slightly lower energy.
const PIVOT_REL_TOL: f64 = 1e-7;

/// First relative downward step applied to `e` after a near-singular pivot;
/// later retries double it.
const PIVOT_SHIFT: f64 = 1e-6;

const PIVOT_RETRIES: i32 = 10;

/// Number of eigenvalues of `M` strictly below `e`, by Sylvester inertia of
/// the block LDLᵗ factorization of `M − e`.
///
/// A near-singular pivot block would be inverted into a huge rank-deficient
/// update that swamps the other directions of the next pivot, so the count is
/// redone at `e − 2^k·1e-6·scale`. Near the zero modes of the topological
/// phase every truncation has a pivot of size `~|e|`, which is what forces
/// the shift to sit well above the pivot tolerance. Eigenvalues within the
/// shift of `e` may be counted as not below.
pub fn count_below(m: &BlockJacobiMatrix, e: f64) -> usize {
    let scale = 1.0
        + m.diagonal_blocks().iter().map(|v| v.amax()).fold(0.0, f64::max)
        + m.hopping_blocks().iter().map(|s| s.amax()).fold(0.0, f64::max)
        + e.abs();
    let tol = PIVOT_REL_TOL * scale;
    if let Some(c) = inertia_count(m, e, tol) {
        return c;
    }
    for k in 0..PIVOT_RETRIES {
        if let Some(c) = inertia_count(m, e - 2f64.powi(k) * PIVOT_SHIFT * scale, tol) {
            return c;
        }
    }
    inertia_count(m, e - 2f64.powi(PIVOT_RETRIES) * PIVOT_SHIFT * scale, 0.0).unwrap_or(0)
}

fn inertia_count(m: &BlockJacobiMatrix, e: f64, min_pivot: f64) -> Option<usize> {
    let ell = m.ell();
    let tiny = min_pivot.max(f64::MIN_POSITIVE);
    let mut count = 0;
    let mut pivot_inv: Option<DMatrix<f64>> = None;
    for k in 1..=m.n() {
        let mut d = m.v(k) - DMatrix::identity(ell, ell) * e;
        if let Some(inv) = &pivot_inv {
            let s = m.s(k - 1);
            d -= s.transpose() * inv * &s;
        }
        d = (&d + d.transpose()) * 0.5;
        let eig = SymmetricEigen::new(d);
        let mut lam = eig.eigenvalues.clone();
        for x in lam.iter_mut() {
            if min_pivot > 0.0 && x.abs() < min_pivot && k < m.n() {
                return None;
            }
            if *x < 0.0 {
                count += 1;
            }
            if x.abs() < tiny {
                *x = tiny;
            }
        }
        let q = &eig.eigenvectors;
        pivot_inv = Some(q * DMatrix::from_diagonal(&lam.map(|x| 1.0 / x)) * q.transpose());
    }
    Some(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub max_defect: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares the sorted spectrum with its reflection `λ ↦ −λ`.
pub fn check_spectral_symmetry(s: &SpectralData, tol: f64) -> SymmetryReport {
    let ev = &s.eigenvalues;
    let n = ev.len();
    let max_defect = (0..n).map(|i| (ev[i] + ev[n - 1 - i]).abs()).fold(0.0, f64::max);
    SymmetryReport { max_defect, tol, pass: max_defect <= tol }
}

/// True iff no eigenvalue lies in the open interval `(−λ, λ)`.
pub fn check_gap(s: &SpectralData, lambda: f64) -> bool {
    lambda <= 0.0 || s.eigenvalues.iter().all(|x| x.abs() >= lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DosBins {
    /// Equal-width bins spanning the observed eigenvalues.
    Count(usize),
    /// Explicit ascending edges; values outside go to the end bins.
    Edges(Vec<f64>),
}

/// Ensemble-averaged eigenvalue histogram, normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosHistogram {
    pub bin_edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub realizations: usize,
}

impl DosHistogram {
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Integrated density of states, linear within bins.
    pub fn ids(&self, e: f64) -> f64 {
        let edges = &self.bin_edges;
        if e <= edges[0] {
            return 0.0;
        }
        if e >= edges[edges.len() - 1] {
            return 1.0;
        }
        let b = edges.partition_point(|&x| x <= e) - 1;
        let below: f64 = self.mass[..b].iter().sum();
        let frac = (e - edges[b]) / (edges[b + 1] - edges[b]);
        (below + frac * self.mass[b]).clamp(0.0, 1.0)
    }

    /// Realization-weighted average of two histograms on the same bins.
    pub fn merge(&self, other: &DosHistogram) -> Result<DosHistogram> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::InvalidParams("cannot merge histograms with different bins".into()));
        }
        let (r1, r2) = (self.realizations as f64, other.realizations as f64);
        let mass = self.mass.iter().zip(&other.mass).map(|(a, b)| (r1 * a + r2 * b) / (r1 + r2)).collect();
        Ok(DosHistogram {
            bin_edges: self.bin_edges.clone(),
            mass,
            realizations: self.realizations + other.realizations,
        })
    }
}

fn resolve_edges(bins: &DosBins, lo: f64, hi: f64) -> Result<Vec<f64>> {
    match bins {
        DosBins::Count(k) => {
            if *k == 0 {
                return Err(Error::InvalidParams("need at least one bin".into()));
            }
            let (lo, hi) = if hi > lo {
                let pad = 1e-9 * (hi - lo).max(1.0);
                (lo - pad, hi + pad)
            } else {
                (lo - 0.5, hi + 0.5)
            };
            let w = (hi - lo) / *k as f64;
            Ok((0..=*k).map(|i| if i == *k { hi } else { lo + w * i as f64 }).collect())
        }
        DosBins::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParams("bin edges must be strictly increasing".into()));
            }
            Ok(e.clone())
        }
    }
}

pub fn dos_histogram(ensemble: &[SpectralData], bins: DosBins) -> Result<DosHistogram> {
    if ensemble.iter().all(|s| s.eigenvalues.is_empty()) {
        return Err(Error::EmptyDos);
    }
    let all = ensemble.iter().flat_map(|s| s.eigenvalues.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let edges = resolve_edges(&bins, lo, hi)?;
    let nb = edges.len() - 1;
    let mut mass = vec![0.0; nb];
    let used: Vec<&SpectralData> = ensemble.iter().filter(|s| !s.eigenvalues.is_empty()).collect();
    for s in &used {
        let w = 1.0 / s.eigenvalues.len() as f64;
        let mut counts = vec![0usize; nb];
        for &x in &s.eigenvalues {
            let b = edges.partition_point(|&e| e <= x).saturating_sub(1).min(nb - 1);
            counts[b] += 1;
        }
        for (m, c) in mass.iter_mut().zip(counts) {
            *m += w * c as f64;
        }
    }
    let r = used.len() as f64;
    mass.iter_mut().for_each(|m| *m /= r);
    Ok(DosHistogram { bin_edges: edges, mass, realizations: used.len() })
}

/// Density of states from inertia counts at the bin edges, without any
/// eigensolve. Agrees bin-for-bin with [`dos_histogram`] on explicit edges.
pub fn dos_histogram_by_counting(matrices: &[BlockJacobiMatrix], edges: &[f64]) -> Result<DosHistogram> {
    if matrices.is_empty() {
        return Err(Error::EmptyDos);
    }
    let edges = resolve_edges(&DosBins::Edges(edges.to_vec()), 0.0, 0.0)?;
    let nb = edges.len() - 1;
    let per: Vec<Vec<f64>> = matrices
        .par_iter()
        .map(|m| {
            let dim = m.dim();
            let mut cum = vec![0usize; nb + 1];
            for i in 1..nb {
                cum[i] = count_below(m, edges[i]);
            }
            cum[nb] = dim;
            (0..nb).map(|b| (cum[b + 1] - cum[b]) as f64 / dim as f64).collect()
        })
        .collect();
    let mut mass = vec![0.0; nb];
    for row in &per {
        for (m, x) in mass.iter_mut().zip(row) {
            *m += x;
        }
    }
    let r = per.len() as f64;
    mass.iter_mut().for_each(|m| *m /= r);
    Ok(DosHistogram { bin_edges: edges, mass, realizations: per.len() })
}

/// Finite union of disjoint closed intervals, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new<I: IntoIterator<Item = (f64, f64)>>(intervals: I) -> Self {
        Self::with_tolerance(intervals, MERGE_TOL)
    }

    /// Sorts and merges intervals whose gap is at most `tol`.
    pub fn with_tolerance<I: IntoIterator<Item = (f64, f64)>>(intervals: I, tol: f64) -> Self {
        let mut v: Vec<(f64, f64)> =
            intervals.into_iter().map(|(a, b)| if a <= b { (a, b) } else { (b, a) }).collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match out.last_mut() {
                Some(last) if lo <= last.1 + tol => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        IntervalUnion { intervals: out }
    }

    /// Degenerate intervals at the given points.
    pub fn from_points(points: &[f64]) -> Self {
        Self::new(points.iter().map(|&x| (x, x)))
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        IntervalUnion::new(self.intervals.iter().chain(&other.intervals).copied())
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }

    pub fn distance_to_point(&self, x: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }

    /// `sup_{x ∈ self} d(x, other)`.
    pub fn excess_over(&self, other: &IntervalUnion) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        if other.is_empty() {
            return f64::INFINITY;
        }
        let gap_mids: Vec<f64> = other.intervals.windows(2).map(|w| 0.5 * (w[0].1 + w[1].0)).collect();
        let mut worst = 0.0_f64;
        for &(lo, hi) in &self.intervals {
            worst = worst.max(other.distance_to_point(lo)).max(other.distance_to_point(hi));
            for &m in &gap_mids {
                if m > lo && m < hi {
                    worst = worst.max(other.distance_to_point(m));
                }
            }
        }
        worst
    }

    pub fn hausdorff(&self, other: &IntervalUnion) -> f64 {
        self.excess_over(other).max(other.excess_over(self))
    }

    /// True when every point of `[lo, hi]` is within `tol` of the union.
    pub fn covers(&self, lo: f64, hi: f64, tol: f64) -> bool {
        IntervalUnion::new([(lo, hi)]).excess_over(self) <= tol
    }
}

fn check_anisotropy(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma.abs() == 1.0 {
        return Err(Error::DegenerateAnisotropy(gamma));
    }
    Ok(())
}

/// Hermitian `2p×2p` Floquet symbol of the `p`-periodic XY operator at
/// quasi-momentum `θ`.
pub fn floquet_symbol(potential: &[f64], gamma: f64, theta: f64) -> DMatrix<Complex64> {
    let p = potential.len();
    let c = |m: DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
    let s = c(hopping_block(gamma));
    let st = s.transpose();
    let sz = c(sigma_z());
    let phase = Complex64::from_polar(1.0, theta);
    let mut h = DMatrix::<Complex64>::zeros(2 * p, 2 * p);
    let mut add = |i: usize, j: usize, blk: &DMatrix<Complex64>| {
        let mut v = h.view_mut((2 * i, 2 * j), (2, 2));
        v += blk;
    };
    for (j, &nu) in potential.iter().enumerate() {
        add(j, j, &(&sz * Complex64::new(nu, 0.0)));
    }
    for j in 0..p.saturating_sub(1) {
        add(j, j + 1, &(-&s));
        add(j + 1, j, &(-&st));
    }
    add(p - 1, 0, &(-&s * phase));
    add(0, p - 1, &(-&st * phase.conj()));
    h
}

pub fn floquet_eigenvalues(potential: &[f64], gamma: f64, theta: f64) -> Vec<f64> {
    let mut v: Vec<f64> = floquet_symbol(potential, gamma, theta).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Band `[min_θ λ_i(θ), max_θ λ_i(θ)]` for each sorted eigenvalue index `i`.
pub fn floquet_bands(potential: &[f64], gamma: f64) -> Result<Vec<(f64, f64)>> {
    check_anisotropy(gamma)?;
    if potential.is_empty() || potential.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("potential must be a nonempty finite vector".into()));
    }
    let dim = 2 * potential.len();
    let thetas: Vec<f64> = (0..=THETA_GRID).map(|k| std::f64::consts::PI * k as f64 / THETA_GRID as f64).collect();
    let grid: Vec<Vec<f64>> = thetas.iter().map(|&t| floquet_eigenvalues(potential, gamma, t)).collect();
    let step = thetas[1] - thetas[0];
    let mut bands = Vec::with_capacity(dim);
    for i in 0..dim {
        let vals: Vec<f64> = grid.iter().map(|v| v[i]).collect();
        let kmin = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        let kmax = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        let bracket = |k: usize| {
            let t = thetas[k];
            ((t - step).max(0.0), (t + step).min(std::f64::consts::PI))
        };
        let (a, b) = bracket(kmin);
        let (_, lo) = golden_min(|t| floquet_eigenvalues(potential, gamma, t)[i], a, b);
        let (a, b) = bracket(kmax);
        let (_, neg_hi) = golden_min(|t| -floquet_eigenvalues(potential, gamma, t)[i], a, b);
        bands.push((lo.min(vals[kmin]), (-neg_hi).max(vals[kmax])));
    }
    Ok(bands)
}

/// Spectrum of the `p`-periodic XY operator as a merged union of bands.
pub fn periodic_spectrum(potential: &[f64], gamma: f64) -> Result<IntervalUnion> {
    Ok(IntervalUnion::new(floquet_bands(potential, gamma)?))
}

/// All Lyndon words (aperiodic necklace representatives) of length
/// `1..=max_len` over `k` letters.
pub fn lyndon_words(k: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || max_len == 0 {
        return out;
    }
    let mut w: Vec<usize> = vec![0];
    out.push(w.clone());
    loop {
        let m = w.len();
        while w.len() < max_len {
            w.push(w[w.len() - m]);
        }
        while w.last() == Some(&(k - 1)) {
            w.pop();
        }
        match w.last_mut() {
            None => break,
            Some(x) => *x += 1,
        }
        out.push(w.clone());
    }
    out
}

/// Union of periodic spectra over all potentials of period
/// `1..=max_period` with values on the deterministic support lattice of
/// `rho` (`samples_per_period` points for continuous supports).
///
/// Each potential is enumerated once up to cyclic shift. The result grows
/// with `max_period`, and with `samples_per_period` along nested lattices.
pub fn almost_sure_spectrum_approx(
    rho: &SingleSiteDistribution,
    gamma: f64,
    max_period: usize,
    samples_per_period: usize,
) -> Result<IntervalUnion> {
    rho.validate()?;
    check_anisotropy(gamma)?;
    let lattice = rho.support_lattice(samples_per_period);
    let k = lattice.len();
    let mut total = 0usize;
    let mut count = 1usize;
    for _ in 0..max_period {
        count = count.saturating_mul(k);
        total = total.saturating_add(count);
    }
    if max_period == 0 || total > 4 * MAX_PERIODIC_WORDS {
        return Err(Error::InvalidParams(format!(
            "{k} lattice points with max_period {max_period} is out of range"
        )));
    }
    let words = lyndon_words(k, max_period);
    if words.len() > MAX_PERIODIC_WORDS {
        return Err(Error::InvalidParams(format!("{} periodic potentials exceed the cap", words.len())));
    }
    let parts: Vec<Vec<(f64, f64)>> = words
        .par_iter()
        .map(|w| {
            let pot: Vec<f64> = w.iter().map(|&i| lattice[i]).collect();
            floquet_bands(&pot, gamma)
        })
        .collect::<Result<_>>()?;
    Ok(IntervalUnion::new(parts.into_iter().flatten()))
}
