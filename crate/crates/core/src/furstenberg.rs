//! Lie algebra rank of the Fürstenberg group of the XY cocycle and the
//! zero-energy reducibility certificate.
//!
//! The transfer matrix factors as `A^E = M(νσ^z) A_0(E)` with
//! `M(Q) = [[I, 0], [Q, I]]`. Differences of two field values put
//! `[[0, 0], [σ^z, 0]]` in the Lie algebra; conjugating by powers of
//! `A_0(E)` and taking brackets generates a subalgebra of `sp_2(ℝ)`, whose
//! dimension is computed in the frame rotated by `𝕌 = diag(U, U)`,
//! `U = [[1, 1], [1, −1]]/√2`. Dimension 10 is all of `sp_2(ℝ)`.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat4 = Matrix4<f64>;

/// Relative singular-value cutoff for the rank.
pub const RANK_TOL: f64 = 1e-9;

pub const DEFAULT_DEPTH: usize = 3;

pub fn j4() -> Mat4 {
    let mut j = Mat4::zeros();
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = -1.0;
    j[(3, 1)] = -1.0;
    j
}

/// `𝕌 = diag(U, U)`; symmetric and its own inverse.
pub fn block_u() -> Mat4 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = Mat4::zeros();
    for o in [0, 2] {
        u[(o, o)] = r;
        u[(o, o + 1)] = r;
        u[(o + 1, o)] = r;
        u[(o + 1, o + 1)] = -r;
    }
    u
}

pub fn sigma_z2() -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, 0.0, -1.0)
}

/// `M(Q) = [[I, 0], [Q, I]]`.
pub fn m_of(q: &Matrix2<f64>) -> Mat4 {
    let mut m = Mat4::identity();
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(q);
    m
}

/// `[[0, 0], [Q, 0]]`.
pub fn lower_nilpotent(q: &Matrix2<f64>) -> Mat4 {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(q);
    m
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma.abs() == 1.0 {
        return Err(Error::DegenerateAnisotropy(gamma));
    }
    Ok(())
}

/// The energy factor `A_0(E)` of the XY transfer matrix.
pub fn build_a0(e: f64, gamma: f64) -> Result<Mat4> {
    check_gamma(gamma)?;
    let d = 1.0 - gamma * gamma;
    #[rustfmt::skip]
    let a = Mat4::new(
        0.0, 0.0, 1.0 / d, gamma / d,
        0.0, 0.0, -gamma / d, -1.0 / d,
        -1.0, gamma, -e / d, -gamma * e / d,
        -gamma, 1.0, gamma * e / d, e / d,
    );
    Ok(a)
}

/// `M(νσ^z) A_0(E)`.
pub fn xy_transfer(nu: f64, e: f64, gamma: f64) -> Result<Mat4> {
    Ok(m_of(&(sigma_z2() * nu)) * build_a0(e, gamma)?)
}

/// `A⁻¹ = −J Aᵗ J` for symplectic `A`.
pub fn symplectic_inverse(a: &Mat4) -> Mat4 {
    let j = j4();
    -(j * a.transpose() * j)
}

pub fn symplectic_defect4(a: &Mat4) -> f64 {
    let j = j4();
    (a.transpose() * j * a - j).amax()
}

/// `M(aσ^z)A_0(E) · [M(bσ^z)A_0(E)]⁻¹`, which equals `M((a−b)σ^z)`; the
/// identity when `a = b`.
pub fn canceled_generator(a: f64, b: f64, e: f64, gamma: f64) -> Result<Mat4> {
    let ga = xy_transfer(a, e, gamma)?;
    let gb = xy_transfer(b, e, gamma)?;
    Ok(ga * symplectic_inverse(&gb))
}

/// Coordinates of `X = [[a, b], [c, −aᵗ]]` (`b`, `c` symmetric) as
/// `(a00, a01, a10, a11, b00, b01, b11, c00, c01, c11)`.
pub fn sp2_coordinates(x: &Mat4) -> [f64; 10] {
    [
        x[(0, 0)],
        x[(0, 1)],
        x[(1, 0)],
        x[(1, 1)],
        x[(0, 2)],
        x[(0, 3)],
        x[(1, 3)],
        x[(2, 0)],
        x[(2, 1)],
        x[(3, 1)],
    ]
}

pub fn sp2_from_coordinates(c: &[f64; 10]) -> Mat4 {
    #[rustfmt::skip]
    let x = Mat4::new(
        c[0], c[1], c[4], c[5],
        c[2], c[3], c[5], c[6],
        c[7], c[8], -c[0], -c[2],
        c[8], c[9], -c[1], -c[3],
    );
    x
}

/// `max |XᵗJ + JX|`.
pub fn sp2_membership_defect(x: &Mat4) -> f64 {
    let j = j4();
    (x.transpose() * j + j * x).amax()
}

fn bracket(x: &Mat4, y: &Mat4) -> Mat4 {
    x * y - y * x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieClosure {
    pub energy: f64,
    pub gamma: f64,
    pub depth: usize,
    pub dimension: usize,
    /// Linearly independent generated elements (rotated frame).
    #[serde(skip)]
    pub basis: Vec<Mat4>,
    /// Singular values of all normalized generated elements, descending.
    pub singular_values: Vec<f64>,
    /// Rank changes when the tolerance is moved by a factor 10 either way.
    pub marginal: bool,
    pub max_membership_defect: f64,
}

fn rank_at(sv: &[f64], tol: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Dimension of the Lie algebra generated from `𝕌[[0,0],[σ^z,0]]𝕌` by
/// conjugation with `𝕌A_0(E)^{±1,±2}𝕌` and brackets, iterated `depth`
/// rounds.
pub fn lie_closure_dimension(e: f64, gamma: f64, depth: usize) -> Result<LieClosure> {
    check_gamma(gamma)?;
    if depth == 0 {
        return Err(Error::InvalidParams("depth must be at least 1".into()));
    }
    let u = block_u();
    let a0 = build_a0(e, gamma)?;
    let a0_inv = symplectic_inverse(&a0);
    let conj: Vec<(Mat4, Mat4)> = [(a0, a0_inv), (a0_inv, a0), (a0 * a0, a0_inv * a0_inv), (a0_inv * a0_inv, a0 * a0)]
        .iter()
        .map(|(c, ci)| (u * c * u, u * ci * u))
        .collect();

    let seed = u * lower_nilpotent(&sigma_z2()) * u;
    let mut candidates: Vec<[f64; 10]> = Vec::new();
    let mut ortho: Vec<nalgebra::SVector<f64, 10>> = Vec::new();
    let mut basis: Vec<Mat4> = Vec::new();
    let mut max_defect = 0.0_f64;

    let mut offer = |x: Mat4, basis: &mut Vec<Mat4>| {
        let norm = x.norm();
        if norm == 0.0 || !norm.is_finite() {
            return;
        }
        let x = x / norm;
        max_defect = max_defect.max(sp2_membership_defect(&x));
        let c = sp2_coordinates(&x);
        candidates.push(c);
        let mut v = nalgebra::SVector::<f64, 10>::from_column_slice(&c);
        let start = v.norm();
        for _ in 0..2 {
            for q in &ortho {
                v -= q * q.dot(&v);
            }
        }
        if v.norm() > RANK_TOL * start && ortho.len() < 10 {
            ortho.push(v.normalize());
            basis.push(x);
        }
    };

    offer(seed, &mut basis);
    for _ in 0..depth {
        if basis.len() == 10 {
            break;
        }
        let current = basis.clone();
        for x in &current {
            for (c, ci) in &conj {
                offer(c * x * ci, &mut basis);
            }
        }
        for i in 0..current.len() {
            for j in i + 1..current.len() {
                offer(bracket(&current[i], &current[j]), &mut basis);
            }
        }
    }

    let mat = DMatrix::from_fn(10, candidates.len(), |r, c| candidates[c][r]);
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let dimension = rank_at(&sv, RANK_TOL);
    let marginal = rank_at(&sv, RANK_TOL * 10.0) != dimension || rank_at(&sv, RANK_TOL / 10.0) != dimension;
    Ok(LieClosure {
        energy: e,
        gamma,
        depth,
        dimension,
        basis,
        singular_values: sv,
        marginal,
        max_membership_defect: max_defect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub energy: f64,
    pub rank: usize,
    pub marginal: bool,
    pub deficient: bool,
}

pub fn energy_sweep_rank(gamma: f64, grid: &[f64], depth: usize) -> Result<Vec<RankRow>> {
    grid.par_iter()
        .map(|&e| {
            let c = lie_closure_dimension(e, gamma, depth)?;
            Ok(RankRow { energy: e, rank: c.dimension, marginal: c.marginal, deficient: c.dimension < 10 })
        })
        .collect()
}

/// `P` with `P⁻¹ B P = diag(D, F)` for the zero-energy rotated matrices.
pub fn block_permutation() -> Mat4 {
    #[rustfmt::skip]
    let p = Mat4::new(
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 1.0, 0.0, 0.0,
    );
    p
}

/// `D = [[0, 1/(1+γ)], [γ−1, ν/(1+γ)]]`.
pub fn zero_energy_d(nu: f64, gamma: f64) -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0 / (1.0 + gamma), gamma - 1.0, nu / (1.0 + gamma))
}

/// `F = [[0, 1/(1−γ)], [−1−γ, ν/(1−γ)]]`.
pub fn zero_energy_f(nu: f64, gamma: f64) -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0 / (1.0 - gamma), -1.0 - gamma, nu / (1.0 - gamma))
}

const ZERO_PATTERN: [(usize, usize); 8] = [(0, 1), (0, 2), (1, 0), (1, 3), (2, 0), (2, 3), (3, 1), (3, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducibilityReport {
    pub gamma: f64,
    pub samples: usize,
    /// Largest entry of `𝕌A^0𝕌` outside the invariant-subspace pattern.
    pub max_pattern_defect: f64,
    /// Largest deviation of `P⁻¹𝕌A^0𝕌P` from `diag(D, F)`.
    pub max_block_defect: f64,
    /// `max |det(√((1+γ)/(1−γ)) D) − 1|` for `γ < 1`.
    pub max_rescaled_det_defect: Option<f64>,
    /// Every `det D < 0`, for `γ > 1`.
    pub det_d_negative: Option<bool>,
    pub tol: f64,
    pub pass: bool,
}

/// Checks the block structure of the zero-energy transfer matrices for each
/// field value in `nu_samples`.
pub fn zero_energy_reducibility_certificate(gamma: f64, nu_samples: &[f64]) -> Result<ReducibilityReport> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Err(Error::InvalidParams("certificate needs gamma != 0".into()));
    }
    let tol = 1e-12;
    let u = block_u();
    let p = block_permutation();
    let p_inv = p.transpose();
    let mut pattern = 0.0_f64;
    let mut block = 0.0_f64;
    let mut det_defect = 0.0_f64;
    let mut all_negative = true;
    for &nu in nu_samples {
        let b = u * xy_transfer(nu, 0.0, gamma)? * u;
        let scale = b.amax().max(1.0);
        for &(i, j) in &ZERO_PATTERN {
            pattern = pattern.max(b[(i, j)].abs() / scale);
        }
        let c = p_inv * b * p;
        let d = zero_energy_d(nu, gamma);
        let f = zero_energy_f(nu, gamma);
        let mut expected = Mat4::zeros();
        expected.fixed_view_mut::<2, 2>(0, 0).copy_from(&d);
        expected.fixed_view_mut::<2, 2>(2, 2).copy_from(&f);
        block = block.max((c - expected).amax() / scale);
        let dd = c.fixed_view::<2, 2>(0, 0).determinant();
        if gamma.abs() < 1.0 {
            let rescaled = ((1.0 + gamma) / (1.0 - gamma)) * dd;
            det_defect = det_defect.max((rescaled - 1.0).abs());
        } else if !(dd < 0.0) {
            all_negative = false;
        }
    }
    let weak = gamma.abs() < 1.0;
    let pass = pattern <= tol && block <= tol && if weak { det_defect <= tol } else { all_negative };
    Ok(ReducibilityReport {
        gamma,
        samples: nu_samples.len(),
        max_pattern_defect: pattern,
        max_block_defect: block,
        max_rescaled_det_defect: weak.then_some(det_defect),
        det_d_negative: (!weak).then_some(all_negative),
        tol,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hopping_block, sigma_z};
    use crate::transfer::transfer_matrix;

    #[test]
    fn a0_is_symplectic_and_unimodular() {
        for &g in &[0.5, 0.3, 2.0, -0.7] {
            for &e in &[0.0, 1.0, -2.5, 0.01] {
                let a = build_a0(e, g).unwrap();
                assert!(symplectic_defect4(&a) < 1e-12);
                assert!((a.determinant() - 1.0).abs() < 1e-12);
            }
        }
        assert!(build_a0(0.0, 1.0).is_err());
        // ν = 0 leaves A_0 unchanged
        assert_eq!(xy_transfer(0.0, 0.0, 0.5).unwrap(), build_a0(0.0, 0.5).unwrap());
    }

    #[test]
    fn factorization_matches_transfer_module() {
        for &(nu, e, g) in &[(1.0, 1.0, 0.5), (-0.3, 2.2, 2.0), (0.7, -1.1, 0.3)] {
            let direct = transfer_matrix(&(sigma_z() * nu), &hopping_block(g), e).unwrap();
            let fact = xy_transfer(nu, e, g).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((direct[(i, j)] - fact[(i, j)]).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn cancellation_isolates_field_difference() {
        let m = canceled_generator(1.0, 0.0, 0.7, 0.5).unwrap();
        assert!((m - m_of(&sigma_z2())).amax() < 1e-12);
        let id = canceled_generator(0.4, 0.4, 0.7, 0.5).unwrap();
        assert!((id - Mat4::identity()).amax() < 1e-12);
        let m = canceled_generator(2.5, -0.5, -1.3, 2.0).unwrap();
        assert!((m - m_of(&(sigma_z2() * 3.0))).amax() < 1e-12);
    }

    #[test]
    fn u_block_is_symplectic_involution() {
        let u = block_u();
        assert!((u * u - Mat4::identity()).amax() < 1e-15);
        assert!(symplectic_defect4(&u) < 1e-15);
    }

    #[test]
    fn rotated_seed_and_first_conjugates() {
        let u = block_u();
        let a1 = u * lower_nilpotent(&sigma_z2()) * u;
        let mut expected = Mat4::zeros();
        expected[(2, 1)] = 1.0;
        expected[(3, 0)] = 1.0;
        assert!((a1 - expected).amax() < 1e-15);

        let (e, g) = (0.8, 0.5);
        let a0 = build_a0(e, g).unwrap();
        let a0i = symplectic_inverse(&a0);
        let seed = lower_nilpotent(&sigma_z2());
        let a2 = u * a0i * seed * a0 * u * (-(1.0 - g * g));
        let mut expected = Mat4::zeros();
        expected[(0, 3)] = 1.0;
        expected[(1, 2)] = 1.0;
        assert!((a2 - expected).amax() < 1e-14);
        let a3 = u * a0 * seed * a0i * u * (-(1.0 - g * g));
        #[rustfmt::skip]
        let expected = Mat4::new(
            0.0, e, 0.0, 1.0,
            e, 0.0, 1.0, 0.0,
            0.0, -e * e, 0.0, -e,
            -e * e, 0.0, -e, 0.0,
        );
        assert!((a3 - expected).amax() < 1e-14);
    }

    #[test]
    fn coordinates_round_trip() {
        let c = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let x = sp2_from_coordinates(&c);
        assert_eq!(sp2_coordinates(&x), c);
        assert_eq!(sp2_membership_defect(&x), 0.0);
        assert!(sp2_membership_defect(&Mat4::identity()) > 0.0);
    }

    #[test]
    fn full_rank_away_from_zero() {
        let c = lie_closure_dimension(1.0, 0.5, 2).unwrap();
        assert_eq!(c.dimension, 10);
        assert!(!c.marginal);
        assert!(c.max_membership_defect < 1e-12);
        assert!(c.basis.iter().all(|x| sp2_membership_defect(x) < 1e-12));
        assert_eq!(lie_closure_dimension(1.0, 2.0, 3).unwrap().dimension, 10);
    }

    #[test]
    fn deficient_rank_at_zero() {
        let c = lie_closure_dimension(0.0, 0.5, 3).unwrap();
        assert!(c.dimension < 10);
    }

    #[test]
    fn sweep_flags_only_zero() {
        let grid = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        let rows = energy_sweep_rank(0.5, &grid, DEFAULT_DEPTH).unwrap();
        let flagged: Vec<f64> = rows.iter().filter(|r| r.deficient).map(|r| r.energy).collect();
        assert_eq!(flagged, vec![0.0]);
    }

    #[test]
    fn certificate_fixture() {
        let d = zero_energy_d(0.0, 0.5);
        assert!((d - Matrix2::new(0.0, 2.0 / 3.0, -0.5, 0.0)).amax() < 1e-15);
        let r = zero_energy_reducibility_certificate(0.5, &[0.0, 1.0, -2.0, 0.37]).unwrap();
        assert!(r.pass, "{r:?}");
        let r = zero_energy_reducibility_certificate(2.0, &[0.0, 1.0, -2.0, 0.37]).unwrap();
        assert!(r.pass && r.det_d_negative == Some(true), "{r:?}");
    }
}
