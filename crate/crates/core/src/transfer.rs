//! Modified transfer matrices, solution propagation, matrix-valued
//! fundamental solutions, the Wronskian, the block Green function formula
//! and the characteristic-polynomial identity.
//!
//! Boundary convention: `S_0 = S_n = I`, so `S_k` is the identity outside
//! `1..n-1` everywhere in this module.
//!
//! The state propagated across site `k` is `Φ(k) = (u(k−1), S_{k−1} u(k))`
//! and `Φ(k+1) = A_k Φ(k)` with
//! `A_k = [[0, S_{k−1}⁻¹], [−S_{k−1}ᵗ, (V_k − E) S_{k−1}⁻¹]]`.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::BlockJacobiMatrix;

/// Condition number of the Wronskian above which `z` is treated as being in
/// the spectrum.
pub const WRONSKIAN_COND_LIMIT: f64 = 1e12;

/// `J = [[0, I], [−I, 0]]`.
pub fn symplectic_j(ell: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * ell, 2 * ell);
    for i in 0..ell {
        j[(i, ell + i)] = 1.0;
        j[(ell + i, i)] = -1.0;
    }
    j
}

pub fn lift<T: ComplexField<RealField = f64>>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_real)
}

/// `max |AᵗJA − J|` (plain transpose, also for complex entries).
pub fn symplectic_defect<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    let ell = a.nrows() / 2;
    let j: DMatrix<T> = lift(&symplectic_j(ell));
    let d = a.transpose() * &j * a - j;
    d.iter().map(|x| x.clone().modulus()).fold(0.0, f64::max)
}

fn invert(s: &DMatrix<f64>, index: usize) -> Result<DMatrix<f64>> {
    let det = s.determinant();
    if !det.is_finite() || det == 0.0 {
        return Err(Error::SingularHopping { index, det });
    }
    s.clone().try_inverse().ok_or(Error::SingularHopping { index, det })
}

/// `A = [[0, S⁻¹], [−Sᵗ, (V − E) S⁻¹]]` with `S = S_{k−1}` already inverted.
pub fn transfer_from_inverse<T: ComplexField<RealField = f64>>(
    v: &DMatrix<f64>,
    s_prev: &DMatrix<f64>,
    s_prev_inv: &DMatrix<f64>,
    e: T,
) -> DMatrix<T> {
    let ell = v.nrows();
    let sinv: DMatrix<T> = lift(s_prev_inv);
    let mut vme: DMatrix<T> = lift(v);
    for i in 0..ell {
        vme[(i, i)] -= e.clone();
    }
    let mut a = DMatrix::<T>::zeros(2 * ell, 2 * ell);
    a.view_mut((0, ell), (ell, ell)).copy_from(&sinv);
    a.view_mut((ell, 0), (ell, ell)).copy_from(&lift::<T>(&(-s_prev.transpose())));
    a.view_mut((ell, ell), (ell, ell)).copy_from(&(vme * sinv));
    a
}

pub fn transfer_matrix<T: ComplexField<RealField = f64>>(
    v: &DMatrix<f64>,
    s_prev: &DMatrix<f64>,
    e: T,
) -> Result<DMatrix<T>> {
    let inv = invert(s_prev, 0)?;
    Ok(transfer_from_inverse(v, s_prev, &inv, e))
}

/// `A_1, …, A_n` of a finite matrix.
pub fn transfer_matrices<T: ComplexField<RealField = f64>>(m: &BlockJacobiMatrix, e: T) -> Result<Vec<DMatrix<T>>> {
    (1..=m.n())
        .map(|k| {
            let s = m.s(k - 1);
            let inv = invert(&s, k - 1)?;
            Ok(transfer_from_inverse(m.v(k), &s, &inv, e.clone()))
        })
        .collect()
}

/// States `Φ(1), …, Φ(n+1)` from `Φ(1) = initial`.
pub fn propagate<T: ComplexField<RealField = f64>>(initial: &DVector<T>, transfers: &[DMatrix<T>]) -> Vec<DVector<T>> {
    let mut out = Vec::with_capacity(transfers.len() + 1);
    out.push(initial.clone());
    for a in transfers {
        let next = a * out.last().unwrap();
        out.push(next);
    }
    out
}

/// Recovers `u(0), …, u(n+1)` from the states of [`propagate`].
pub fn solution_from_states<T: ComplexField<RealField = f64>>(ell: usize, states: &[DVector<T>]) -> Vec<DVector<T>> {
    let mut u: Vec<DVector<T>> = states.iter().map(|s| s.rows(0, ell).into_owned()).collect();
    if let Some(last) = states.last() {
        u.push(last.rows(ell, ell).into_owned());
    }
    u
}

/// Largest relative residual of
/// `−S_{k−1}ᵗ u(k−1) + V_k u(k) − S_k u(k+1) = E u(k)` over `k = 1..n`.
pub fn recursion_residual<T: ComplexField<RealField = f64>>(m: &BlockJacobiMatrix, e: T, u: &[DVector<T>]) -> f64 {
    let ell = m.ell();
    let mut worst = 0.0_f64;
    for k in 1..=m.n() {
        let sp: DMatrix<T> = lift(&m.s(k - 1));
        let sk: DMatrix<T> = lift(&m.s(k));
        let mut vme: DMatrix<T> = lift(m.v(k));
        for i in 0..ell {
            vme[(i, i)] -= e.clone();
        }
        let a = sp.transpose() * &u[k - 1];
        let b = &vme * &u[k];
        let c = &sk * &u[k + 1];
        let scale = a.norm() + b.norm() + c.norm();
        let r = (b - a - c).norm();
        if scale > 0.0 {
            worst = worst.max(r / scale);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `X(0) = 0`, `X(1) = I`.
    Forward,
    /// `X(L) = I`, `X(L+1) = 0`.
    Backward,
}

/// Matrix solution `X(0), …, X(L+1)` of the three-term recursion.
#[derive(Debug, Clone)]
pub struct MatrixSolution {
    pub kind: Boundary,
    pub values: Vec<DMatrix<Complex64>>,
}

impl MatrixSolution {
    pub fn at(&self, k: usize) -> &DMatrix<Complex64> {
        &self.values[k]
    }
}

fn check_finite(x: &DMatrix<Complex64>, site: usize) -> Result<()> {
    if x.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Overflow { site })
    }
}

/// `(U^z, V^z)` with `U(0) = 0, U(1) = I` and `V(L) = I, V(L+1) = 0`.
pub fn fundamental_solutions(m: &BlockJacobiMatrix, z: Complex64) -> Result<(MatrixSolution, MatrixSolution)> {
    let (ell, l) = (m.ell(), m.n());
    let id = DMatrix::<Complex64>::identity(ell, ell);
    let zero = DMatrix::<Complex64>::zeros(ell, ell);
    let vmz = |k: usize| -> DMatrix<Complex64> { lift::<Complex64>(m.v(k)) - &id * z };
    let s_c = |k: usize| -> DMatrix<Complex64> { lift(&m.s(k)) };

    let mut u = vec![zero.clone(), id.clone()];
    for k in 1..=l {
        let sinv = lift::<Complex64>(&invert(&m.s(k), k)?);
        let next = sinv * (vmz(k) * &u[k] - s_c(k - 1).transpose() * &u[k - 1]);
        check_finite(&next, k + 1)?;
        u.push(next);
    }

    let mut v = vec![zero; l + 2];
    v[l] = id.clone();
    for k in (1..=l).rev() {
        let stinv = lift::<Complex64>(&invert(&m.s(k - 1), k - 1)?.transpose());
        let prev = stinv * (vmz(k) * &v[k] - s_c(k) * &v[k + 1]);
        check_finite(&prev, k - 1)?;
        v[k - 1] = prev;
    }
    Ok((
        MatrixSolution { kind: Boundary::Forward, values: u },
        MatrixSolution { kind: Boundary::Backward, values: v },
    ))
}

/// Largest relative residual of the matrix recursion over interior sites.
pub fn matrix_recursion_residual(m: &BlockJacobiMatrix, z: Complex64, x: &MatrixSolution) -> f64 {
    let ell = m.ell();
    let id = DMatrix::<Complex64>::identity(ell, ell);
    let mut worst = 0.0_f64;
    for k in 1..=m.n() {
        let a = lift::<Complex64>(&m.s(k - 1)).transpose() * &x.values[k - 1];
        let b = (lift::<Complex64>(m.v(k)) - &id * z) * &x.values[k];
        let c = lift::<Complex64>(&m.s(k)) * &x.values[k + 1];
        let scale = a.norm() + b.norm() + c.norm();
        if scale > 0.0 {
            worst = worst.max((b - a - c).norm() / scale);
        }
    }
    worst
}

/// `W(U, V)(k) = V(k)ᵗ S_k U(k+1) − (S_k V(k+1))ᵗ U(k)` for `0 <= k <= L`.
pub fn wronskian(m: &BlockJacobiMatrix, u: &MatrixSolution, v: &MatrixSolution, k: usize) -> DMatrix<Complex64> {
    let s: DMatrix<Complex64> = lift(&m.s(k));
    v.values[k].transpose() * &s * &u.values[k + 1] - (&s * &v.values[k + 1]).transpose() * &u.values[k]
}

fn condition_number(w: &DMatrix<Complex64>) -> f64 {
    let sv = w.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Resolvent blocks `P_j (M − z)⁻¹ P_kᵗ` from the fundamental solutions.
///
/// The pair `(U, V)` enters only through the ratios `P_k = U(k) U(k+1)⁻¹`
/// and `Q_k = V(k+1) V(k)⁻¹`, run as matrix Riccati recursions. Then
/// `G(k, k)⁻¹ = (V_k − z) − S_{k−1}ᵗ P_{k−1} − S_k Q_k` is the Wronskian of
/// the pair normalized at `k`, and `G(j, k) = P_j G(j+1, k)` for `j < k`,
/// `G(j, k) = Q_{j−1} G(j−1, k)` for `j > k`. Evaluating `U(j) W⁻¹ V(k)ᵗ`
/// directly loses everything once the columns of `U` align (ℓ ≥ 2, a few
/// dozen sites).
#[derive(Debug, Clone)]
pub struct GreenFunction {
    pub z: Complex64,
    p: Vec<DMatrix<Complex64>>,
    q: Vec<DMatrix<Complex64>>,
    diag: Vec<DMatrix<Complex64>>,
    /// Largest condition number among the local Wronskians and the Riccati
    /// pivots.
    pub wronskian_cond: f64,
}

impl GreenFunction {
    pub fn new(m: &BlockJacobiMatrix, z: Complex64) -> Result<Self> {
        let (ell, l) = (m.ell(), m.n());
        let id = DMatrix::<Complex64>::identity(ell, ell);
        let vmz = |k: usize| -> DMatrix<Complex64> { lift::<Complex64>(m.v(k)) - &id * z };
        let s_c = |k: usize| -> DMatrix<Complex64> { lift(&m.s(k)) };
        let mut worst = 0.0_f64;
        let mut inv = |a: DMatrix<Complex64>| -> Result<DMatrix<Complex64>> {
            let cond = condition_number(&a);
            worst = worst.max(cond);
            if !(cond <= WRONSKIAN_COND_LIMIT) {
                return Err(Error::NearSpectrum { re: z.re, im: z.im, cond });
            }
            a.try_inverse().ok_or(Error::NearSpectrum { re: z.re, im: z.im, cond })
        };

        // p[k] = U(k) U(k+1)⁻¹ for k = 0..L−1, q[k] = V(k+1) V(k)⁻¹ for k = 1..L
        let mut p = vec![DMatrix::zeros(ell, ell); l + 1];
        for k in 1..l {
            let left = vmz(k) - s_c(k - 1).transpose() * &p[k - 1];
            p[k] = inv(left)? * s_c(k);
        }
        let mut q = vec![DMatrix::zeros(ell, ell); l + 1];
        for k in (2..=l).rev() {
            let right = vmz(k) - s_c(k) * &q[k];
            q[k - 1] = inv(right)? * s_c(k - 1).transpose();
        }
        let mut diag = vec![DMatrix::zeros(ell, ell); l + 1];
        for k in 1..=l {
            let w = vmz(k) - s_c(k - 1).transpose() * &p[k - 1] - s_c(k) * &q[k];
            diag[k] = inv(w)?;
        }
        Ok(GreenFunction { z, p, q, diag, wronskian_cond: worst })
    }

    pub fn sites(&self) -> usize {
        self.diag.len() - 1
    }

    /// `G(j, k)` for 1-based sites.
    pub fn block(&self, j: usize, k: usize) -> DMatrix<Complex64> {
        let mut g = self.diag[k].clone();
        if j < k {
            for i in (j..k).rev() {
                g = &self.p[i] * g;
            }
        } else {
            for i in k..j {
                g = &self.q[i] * g;
            }
        }
        g
    }

    pub fn dense(&self) -> DMatrix<Complex64> {
        let l = self.sites();
        let ell = self.diag[l].nrows();
        let mut g = DMatrix::zeros(ell * l, ell * l);
        for k in 1..=l {
            let mut col = self.diag[k].clone();
            g.view_mut(((k - 1) * ell, (k - 1) * ell), (ell, ell)).copy_from(&col);
            for j in (1..k).rev() {
                col = &self.p[j] * col;
                g.view_mut(((j - 1) * ell, (k - 1) * ell), (ell, ell)).copy_from(&col);
            }
            col = self.diag[k].clone();
            for j in k + 1..=l {
                col = &self.q[j - 1] * col;
                g.view_mut(((j - 1) * ell, (k - 1) * ell), (ell, ell)).copy_from(&col);
            }
        }
        g
    }
}

pub fn green_block(m: &BlockJacobiMatrix, z: Complex64, j: usize, k: usize) -> Result<DMatrix<Complex64>> {
    if j == 0 || k == 0 || j > m.n() || k > m.n() {
        return Err(Error::InvalidParams(format!("sites ({j}, {k}) outside 1..={}", m.n())));
    }
    Ok(GreenFunction::new(m, z)?.block(j, k))
}

/// `(M − z)⁻¹` by dense LU.
pub fn dense_resolvent(m: &BlockJacobiMatrix, z: Complex64) -> Result<DMatrix<Complex64>> {
    let dim = m.dim();
    let a = lift::<Complex64>(&m.dense()) - DMatrix::<Complex64>::identity(dim, dim) * z;
    a.try_inverse().ok_or(Error::NearSpectrum { re: z.re, im: z.im, cond: f64::INFINITY })
}

/// Frobenius-relative difference between the Green formula and the dense
/// resolvent over all blocks.
pub fn green_relative_error(m: &BlockJacobiMatrix, z: Complex64) -> Result<f64> {
    let g = GreenFunction::new(m, z)?.dense();
    let r = dense_resolvent(m, z)?;
    Ok((g - &r).norm() / r.norm())
}

/// Largest deviation `‖W(k) − W(0)‖ / ‖W(0)‖` over `k = 0..=L`.
pub fn wronskian_variation(m: &BlockJacobiMatrix, u: &MatrixSolution, v: &MatrixSolution) -> f64 {
    let w0 = wronskian(m, u, v, 0);
    let scale = w0.norm().max(f64::MIN_POSITIVE);
    (0..=m.n()).map(|k| (wronskian(m, u, v, k) - &w0).norm() / scale).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CharpolyReport {
    pub det_dense: Complex64,
    /// `(∏ det S_j) · det U(n+1)`, with `det U(n+1)` from the Riccati pivots.
    pub det_recursion: Complex64,
    /// `det U(n+1)` as the `(e_{ℓ+1}∧…∧e_{2ℓ})` matrix element of
    /// `∧^ℓ T_n`, accumulated as a product of compound matrices.
    pub exterior_element: Complex64,
    pub det_u_end: Complex64,
    pub hopping_det_product: f64,
    pub residual: f64,
    pub exterior_residual: f64,
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Checks `det(M_n − E) = (∏_{j<n} det S_j) · det U^E(n+1)` and the
/// exterior-power form of `det U^E(n+1)`.
pub fn charpoly_identity_check(m: &BlockJacobiMatrix, e: Complex64) -> Result<CharpolyReport> {
    let (ell, n) = (m.ell(), m.n());
    let dim = m.dim();
    let det_dense = (lift::<Complex64>(&m.dense()) - DMatrix::<Complex64>::identity(dim, dim) * e).determinant();
    let id = DMatrix::<Complex64>::identity(ell, ell);

    // det U(n+1) = ∏ det(S_k⁻¹ D_k) with D_k the forward Riccati pivots
    let mut det_u_end = Complex64::new(1.0, 0.0);
    let mut p = DMatrix::<Complex64>::zeros(ell, ell);
    for k in 1..=n {
        let s_prev: DMatrix<Complex64> = lift(&m.s(k - 1));
        let s_k: DMatrix<Complex64> = lift(&m.s(k));
        let d = lift::<Complex64>(m.v(k)) - &id * e - s_prev.transpose() * &p;
        det_u_end *= d.determinant() / s_k.determinant();
        if k < n {
            p = d.try_inverse().ok_or(Error::NearSpectrum { re: e.re, im: e.im, cond: f64::INFINITY })? * s_k;
        }
    }
    let hopping_det_product: f64 = m.hopping_blocks().iter().map(|s| s.determinant()).product();
    let det_recursion = det_u_end * hopping_det_product;

    // Φ(1) spans e_{ℓ+1}..e_{2ℓ}; carry that ℓ-vector through ∧^ℓ A_k
    let subsets = combinations(2 * ell, ell);
    let target: Vec<usize> = (ell..2 * ell).collect();
    let ti = subsets.iter().position(|s| *s == target).unwrap_or(0);
    let mut x = DVector::<Complex64>::zeros(subsets.len());
    x[ti] = Complex64::new(1.0, 0.0);
    for a in transfer_matrices::<Complex64>(m, e)? {
        x = compound(&a, &subsets) * x;
    }
    let exterior_element = x[ti];

    Ok(CharpolyReport {
        det_dense,
        det_recursion,
        exterior_element,
        det_u_end,
        hopping_det_product,
        residual: rel(det_dense, det_recursion),
        exterior_residual: rel(exterior_element, det_u_end),
    })
}

/// Size-`k` subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// `k`-th compound matrix: all `k × k` minors of `a` over `subsets`.
fn compound(a: &DMatrix<Complex64>, subsets: &[Vec<usize>]) -> DMatrix<Complex64> {
    DMatrix::from_fn(subsets.len(), subsets.len(), |i, j| {
        a.select_rows(&subsets[i]).select_columns(&subsets[j]).determinant()
    })
}
