//! Exact-diagonalization oracle for the XY spin chain: Jordan–Wigner
//! fermions, the quadratic-form identity `H = 𝒞*M̂𝒞`, Heisenberg dynamics
//! of the fermions, and Lieb–Robinson commutator statistics.
//!
//! Basis states are indexed by `Σ_j s_j 2^{n−j}` (site 1 is the most
//! significant bit) with `s_j = 0` for spin up. `a_j` lowers up to down and
//! `c_j = σ^z_1⋯σ^z_{j−1} a_j`. `𝒞 = (c_1..c_n, c_1*..c_n*)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{assemble_hat_form, sample_disorder, DisorderRealization, HatBlockMatrix, ModelParams};

pub const MAX_SITES: usize = 10;

/// Points in the default `t` grid on `[0, 10]`.
pub const DEFAULT_T_POINTS: usize = 400;

/// Candidate global scale factors for the quadratic-form identity.
pub const CANDIDATE_SCALES: [f64; 3] = [1.0, 2.0, 0.5];

pub const QUADRATIC_FORM_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_sites(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SITES {
        return Err(Error::TooLarge { dim: 1 << n.min(63), cap: 1 << MAX_SITES });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// An operator sending each basis state to a multiple of one basis state
/// (or to zero): Pauli strings, `a_j`, `c_j` and their products.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    n: usize,
    image: Vec<Option<(usize, Complex64)>>,
}

impl Monomial {
    pub fn identity(n: usize) -> Self {
        Monomial { n, image: (0..1 << n).map(|i| Some((i, ONE))).collect() }
    }

    fn site(n: usize, j: usize, f: impl Fn(bool) -> Option<(bool, Complex64)>) -> Self {
        assert!((1..=n).contains(&j), "site {j} out of range 1..={n}");
        let mask = 1usize << (n - j);
        let image = (0..1usize << n)
            .map(|i| {
                let down = i & mask != 0;
                f(down).map(|(to_down, c)| (if to_down { i | mask } else { i & !mask }, c))
            })
            .collect();
        Monomial { n, image }
    }

    pub fn pauli(n: usize, j: usize, p: Pauli) -> Self {
        Self::site(n, j, |down| {
            Some(match p {
                Pauli::X => (!down, ONE),
                Pauli::Y => (!down, if down { -I } else { I }),
                Pauli::Z => (down, if down { -ONE } else { ONE }),
            })
        })
    }

    /// `a_j`: up to down.
    pub fn lowering(n: usize, j: usize) -> Self {
        Self::site(n, j, |down| if down { None } else { Some((true, ONE)) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, i: usize) -> Option<(usize, Complex64)> {
        self.image[i]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Monomial) -> Monomial {
        let image = other
            .image
            .iter()
            .map(|o| o.and_then(|(r, c)| self.image[r].map(|(r2, c2)| (r2, c * c2))))
            .collect();
        Monomial { n: self.n, image }
    }

    pub fn adjoint(&self) -> Monomial {
        let mut image = vec![None; self.image.len()];
        for (i, o) in self.image.iter().enumerate() {
            if let Some((r, c)) = *o {
                image[r] = Some((i, c.conj()));
            }
        }
        Monomial { n: self.n, image }
    }

    pub fn scale_into(&self, coef: Complex64, m: &mut DMatrix<Complex64>) {
        for (i, o) in self.image.iter().enumerate() {
            if let Some((r, c)) = *o {
                m[(r, i)] += coef * c;
            }
        }
    }

    pub fn to_operator(&self, label: impl Into<String>) -> ManyBodyOperator {
        let d = 1 << self.n;
        let mut m = DMatrix::zeros(d, d);
        self.scale_into(ONE, &mut m);
        ManyBodyOperator { n: self.n, matrix: m, label: label.into() }
    }
}

/// `max_i |(xy + s·yx − δ)|i⟩|` entrywise, with `δ = expected·I`.
fn monomial_bracket_defect(x: &Monomial, y: &Monomial, sign: f64, expected: Complex64) -> f64 {
    let xy = x.compose(y);
    let yx = y.compose(x);
    let mut worst = 0.0_f64;
    let mut col = std::collections::BTreeMap::<usize, Complex64>::new();
    for i in 0..1usize << x.n {
        col.clear();
        if let Some((r, c)) = xy.apply(i) {
            *col.entry(r).or_insert(ZERO) += c;
        }
        if let Some((r, c)) = yx.apply(i) {
            *col.entry(r).or_insert(ZERO) += c * sign;
        }
        *col.entry(i).or_insert(ZERO) -= expected;
        worst = col.values().fold(worst, |w, v| w.max(v.norm()));
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyOperator {
    pub n: usize,
    pub matrix: DMatrix<Complex64>,
    pub label: String,
}

impl ManyBodyOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> ManyBodyOperator {
        ManyBodyOperator { n: self.n, matrix: self.matrix.adjoint(), label: format!("{}*", self.label) }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Operator norm.
    pub fn norm(&self) -> f64 {
        self.matrix.singular_values().max()
    }

    pub fn commutator(&self, other: &ManyBodyOperator) -> DMatrix<Complex64> {
        &self.matrix * &other.matrix - &other.matrix * &self.matrix
    }

    pub fn anticommutator(&self, other: &ManyBodyOperator) -> DMatrix<Complex64> {
        &self.matrix * &other.matrix + &other.matrix * &self.matrix
    }

    /// Real part, for operators known to be real.
    pub fn real(&self) -> DMatrix<f64> {
        self.matrix.map(|z| z.re)
    }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// `Σ_j μ_j[(1+γ_j)σ^x_jσ^x_{j+1} + (1−γ_j)σ^y_jσ^y_{j+1}] + Σ_j ν_jσ^z_j`.
/// `|γ_j| = 1` is allowed.
pub fn build_hamiltonian(params: &ModelParams, real: &DisorderRealization) -> Result<ManyBodyOperator> {
    params.validate()?;
    let n = params.n;
    check_sites(n)?;
    if real.nu.len() != n {
        return Err(Error::InvalidParams(format!("realization has {} fields, need {n}", real.nu.len())));
    }
    let d = 1 << n;
    let mut h = DMatrix::zeros(d, d);
    for j in 1..n {
        let (mu, g) = (params.mu[j - 1], params.gamma[j - 1]);
        for (p, w) in [(Pauli::X, mu * (1.0 + g)), (Pauli::Y, mu * (1.0 - g))] {
            if w != 0.0 {
                let term = Monomial::pauli(n, j, p).compose(&Monomial::pauli(n, j + 1, p));
                term.scale_into(Complex64::from(w), &mut h);
            }
        }
    }
    for j in 1..=n {
        Monomial::pauli(n, j, Pauli::Z).scale_into(Complex64::from(real.nu[j - 1]), &mut h);
    }
    Ok(ManyBodyOperator { n, matrix: h, label: "H".into() })
}

/// Jordan–Wigner fermions `c_j` and the lowering operators `a_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionSet {
    pub n: usize,
    a: Vec<Monomial>,
    c: Vec<Monomial>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarReport {
    /// `max ‖{c_j, c_k*} − δ_jk‖` entrywise.
    pub mixed: f64,
    /// `max ‖{c_j, c_k}‖` entrywise.
    pub pure: f64,
    /// `max ‖c_j²‖` entrywise.
    pub nilpotent: f64,
}

impl CarReport {
    pub fn max(&self) -> f64 {
        self.mixed.max(self.pure).max(self.nilpotent)
    }
}

impl FermionSet {
    pub fn c_monomial(&self, j: usize) -> &Monomial {
        &self.c[j - 1]
    }

    pub fn a(&self, j: usize) -> ManyBodyOperator {
        self.a[j - 1].to_operator(format!("a_{j}"))
    }

    pub fn c(&self, j: usize) -> ManyBodyOperator {
        self.c[j - 1].to_operator(format!("c_{j}"))
    }

    pub fn c_dag(&self, j: usize) -> ManyBodyOperator {
        self.c[j - 1].adjoint().to_operator(format!("c_{j}*"))
    }

    /// Component `idx` (0-based) of `𝒞`.
    pub fn component(&self, idx: usize) -> Monomial {
        if idx < self.n {
            self.c[idx].clone()
        } else {
            self.c[idx - self.n].adjoint()
        }
    }

    pub fn car_report(&self) -> CarReport {
        let mut r = CarReport { mixed: 0.0, pure: 0.0, nilpotent: 0.0 };
        for j in 0..self.n {
            let cj = &self.c[j];
            r.nilpotent = r.nilpotent.max(monomial_bracket_defect(cj, cj, 0.0, ZERO));
            for k in 0..self.n {
                let ck = &self.c[k];
                let delta = if j == k { ONE } else { ZERO };
                r.mixed = r.mixed.max(monomial_bracket_defect(cj, &ck.adjoint(), 1.0, delta));
                r.pure = r.pure.max(monomial_bracket_defect(cj, ck, 1.0, ZERO));
            }
        }
        r
    }
}

pub fn build_jordan_wigner(n: usize) -> Result<FermionSet> {
    check_sites(n)?;
    let a: Vec<Monomial> = (1..=n).map(|j| Monomial::lowering(n, j)).collect();
    let mut c = Vec::with_capacity(n);
    let mut string = Monomial::identity(n);
    for j in 1..=n {
        c.push(string.compose(&a[j - 1]));
        string = string.compose(&Monomial::pauli(n, j, Pauli::Z));
    }
    Ok(FermionSet { n, a, c })
}

/// `𝒞* M̂ 𝒞 = Σ_{pq} M̂_pq 𝒞_p* 𝒞_q`.
pub fn quadratic_form(fermions: &FermionSet, hat: &HatBlockMatrix) -> Result<ManyBodyOperator> {
    let n = fermions.n;
    if hat.n() != n {
        return Err(Error::InvalidParams(format!("hat form has n = {}, fermions n = {n}", hat.n())));
    }
    let m = hat.dense();
    let comps: Vec<Monomial> = (0..2 * n).map(|p| fermions.component(p)).collect();
    let adj: Vec<Monomial> = comps.iter().map(Monomial::adjoint).collect();
    let d = 1 << n;
    let mut q = DMatrix::zeros(d, d);
    for p in 0..2 * n {
        for r in 0..2 * n {
            let w = m[(p, r)];
            if w != 0.0 {
                adj[p].compose(&comps[r]).scale_into(Complex64::from(w), &mut q);
            }
        }
    }
    Ok(ManyBodyOperator { n, matrix: q, label: "C*MC".into() })
}

/// Global reconciliation `H ≈ scale·𝒞*M̂𝒞 + shift·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convention {
    pub scale: f64,
    pub shift: f64,
    pub shift_per_site: f64,
    /// Largest entry of `H − scale·𝒞*M̂𝒞 − shift·I`.
    pub residual: f64,
}

/// Fits the scale from [`CANDIDATE_SCALES`] and the shift by trace
/// matching; fails when no candidate brings the residual under
/// [`QUADRATIC_FORM_TOL`].
pub fn verify_quadratic_form(h: &ManyBodyOperator, hat: &HatBlockMatrix) -> Result<Convention> {
    let fermions = build_jordan_wigner(h.n)?;
    let q = quadratic_form(&fermions, hat)?;
    let d = h.dim() as f64;
    let scale_ref = max_abs(&h.matrix).max(1.0);
    let mut best: Option<Convention> = None;
    for &s in &CANDIDATE_SCALES {
        let diff = &h.matrix - &q.matrix * Complex64::from(s);
        let shift = diff.trace().re / d;
        let mut r = diff;
        for i in 0..r.nrows() {
            r[(i, i)] -= shift;
        }
        let residual = max_abs(&r) / scale_ref;
        if best.is_none_or(|b| residual < b.residual) {
            best = Some(Convention { scale: s, shift, shift_per_site: shift / h.n as f64, residual });
        }
    }
    let best = best.expect("candidate scales are non-empty");
    if best.residual > QUADRATIC_FORM_TOL {
        return Err(Error::ConventionMismatch { residual: best.residual, scale: best.scale, shift: best.shift });
    }
    Ok(best)
}

/// All `2^n` sums `Σ_m ±λ_m` over the nonnegative eigenvalues of `M̂`,
/// scaled and shifted by `conv`, ascending.
pub fn free_fermion_spectrum(hat: &HatBlockMatrix, conv: &Convention) -> Vec<f64> {
    let n = hat.n();
    let mut ev: Vec<f64> = SymmetricEigen::new(hat.dense()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let pos = &ev[n..];
    let mut out: Vec<f64> = (0..1usize << n)
        .map(|mask| {
            let s: f64 = pos.iter().enumerate().map(|(m, l)| if mask >> m & 1 == 1 { *l } else { -l }).sum();
            conv.scale * s + conv.shift
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// `e^{−iτM̂}` for real symmetric `M̂`.
pub fn hat_propagator(hat: &DMatrix<f64>, tau: f64) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(hat.clone());
    propagator_from_eigen(&eig, tau)
}

fn propagator_from_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64) -> DMatrix<Complex64> {
    let v = eig.eigenvectors.map(Complex64::from);
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| Complex64::from_polar(1.0, -tau * l)),
    );
    let mut left = v.clone();
    for (c, p) in left.column_iter_mut().zip(phases.iter()) {
        let mut c = c;
        c *= *p;
    }
    left * v.adjoint()
}

/// `τ_t(X) = e^{itH} X e^{−itH}` from a precomputed eigendecomposition of
/// the real Hamiltonian.
pub struct HeisenbergEvolution {
    vecs: DMatrix<Complex64>,
    energies: Vec<f64>,
}

impl HeisenbergEvolution {
    pub fn new(h: &ManyBodyOperator) -> Result<Self> {
        let imag = h.matrix.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
        if imag > 0.0 {
            return Err(Error::InvalidParams("Hamiltonian must be real".into()));
        }
        let eig = SymmetricEigen::new(h.real());
        Ok(HeisenbergEvolution {
            vecs: eig.eigenvectors.map(Complex64::from),
            energies: eig.eigenvalues.iter().copied().collect(),
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `X` in the eigenbasis.
    pub fn to_eigenbasis(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.vecs.adjoint() * x * &self.vecs
    }

    /// `τ_t` of an eigenbasis operator, still in the eigenbasis.
    pub fn evolve_in_eigenbasis(&self, x: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
        let e = &self.energies;
        DMatrix::from_fn(x.nrows(), x.ncols(), |a, b| x[(a, b)] * Complex64::from_polar(1.0, t * (e[a] - e[b])))
    }

    pub fn evolve(&self, x: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
        let y = self.evolve_in_eigenbasis(&self.to_eigenbasis(x), t);
        &self.vecs * y * self.vecs.adjoint()
    }
}

/// `max_{t, j} ‖τ_t(c_j) − Σ_q R_{jq}(t) 𝒞_q‖` (Frobenius) with
/// `R(t) = e^{−2i·scale·t·M̂}`.
pub fn verify_heisenberg_identity(
    params: &ModelParams,
    real: &DisorderRealization,
    conv: &Convention,
    t_list: &[f64],
) -> Result<f64> {
    let n = params.n;
    if n > 8 {
        return Err(Error::TooLarge { dim: 1 << n, cap: 1 << 8 });
    }
    let h = build_hamiltonian(params, real)?;
    let hat = assemble_hat_form(params, real)?.dense();
    let fermions = build_jordan_wigner(n)?;
    let comps: Vec<DMatrix<Complex64>> = (0..2 * n).map(|p| fermions.component(p).to_operator("").matrix).collect();
    let evo = HeisenbergEvolution::new(&h)?;
    let eig = SymmetricEigen::new(hat);
    let mut worst = 0.0_f64;
    for &t in t_list {
        let r = propagator_from_eigen(&eig, 2.0 * conv.scale * t);
        for j in 0..n {
            let lhs = evo.evolve(&comps[j], t);
            let mut rhs = DMatrix::<Complex64>::zeros(lhs.nrows(), lhs.ncols());
            for (q, cq) in comps.iter().enumerate() {
                rhs += cq * r[(j, q)];
            }
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(worst)
}

pub fn default_t_grid() -> Vec<f64> {
    (0..DEFAULT_T_POINTS).map(|i| 10.0 * i as f64 / (DEFAULT_T_POINTS - 1) as f64).collect()
}

/// `Ω` with `Γ = Ω𝒞`: `γ_{2m−1} = c_m + c_m*`, `γ_{2m} = i(c_m* − c_m)`.
pub fn majorana_transform(n: usize) -> DMatrix<Complex64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for m in 0..n {
        o[(2 * m, m)] = ONE;
        o[(2 * m, n + m)] = ONE;
        o[(2 * m + 1, m)] = -I;
        o[(2 * m + 1, n + m)] = I;
    }
    o
}

/// 0-based Majorana indices whose product is `σ^p_k` up to a phase;
/// `σ^z_k = iγ_{2k−1}γ_{2k}` carries no string.
pub fn majorana_support(k: usize, p: Pauli) -> Vec<usize> {
    match p {
        Pauli::Z => vec![2 * k - 2, 2 * k - 1],
        Pauli::X | Pauli::Y => {
            let mut s: Vec<usize> = (0..2 * k - 2).collect();
            s.push(if p == Pauli::X { 2 * k - 2 } else { 2 * k - 1 });
            s
        }
    }
}

/// Real orthogonal `W(t) = Ω e^{−2i·scale·t·M̂} Ω⁻¹` with
/// `τ_t(Γ) = W(t) Γ`; returns `W` and the largest imaginary part dropped.
pub fn majorana_propagator(hat: &SymmetricEigen<f64, nalgebra::Dyn>, n: usize, scale: f64, t: f64) -> (DMatrix<f64>, f64) {
    let o = majorana_transform(n);
    let r = propagator_from_eigen(hat, 2.0 * scale * t);
    let w = &o * r * o.adjoint() * Complex64::from(0.5);
    let imag = w.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
    (w.map(|z| z.re), imag)
}

/// `sup_t ‖[τ_t(σ^a_1), σ^b_k]‖` for each `k`, via the Majorana expansion:
/// the commutator is `2 Σ_{m ∉ S_k} w_m γ_m B`, of norm `2 ‖w|_{S_kᶜ}‖`.
pub fn sup_commutator_majorana(
    hat: &HatBlockMatrix,
    a: Pauli,
    b: Pauli,
    ks: &[usize],
    t_grid: &[f64],
    scale: f64,
) -> Result<Vec<f64>> {
    let n = hat.n();
    if a == Pauli::Z || b == Pauli::Z {
        return Err(Error::InvalidParams("Majorana route covers x and y observables".into()));
    }
    if ks.iter().any(|&k| k < 2 || k > n) {
        return Err(Error::InvalidParams(format!("sites k must lie in 2..={n}")));
    }
    let row = if a == Pauli::X { 0 } else { 1 };
    let eig = SymmetricEigen::new(hat.dense());
    let supports: Vec<Vec<usize>> = ks.iter().map(|&k| majorana_support(k, b)).collect();
    let mut best = vec![0.0_f64; ks.len()];
    for &t in t_grid {
        let (w, _) = majorana_propagator(&eig, n, scale, t);
        for (i, s) in supports.iter().enumerate() {
            let outside: f64 = (0..2 * n).filter(|m| !s.contains(m)).map(|m| w[(row, m)].powi(2)).sum();
            best[i] = best[i].max(2.0 * outside.sqrt());
        }
    }
    Ok(best)
}

/// `sup_t ‖[τ_t(A), B]‖` by dense evolution.
pub fn sup_commutator_dense(evo: &HeisenbergEvolution, a: &ManyBodyOperator, b: &ManyBodyOperator, t_grid: &[f64]) -> f64 {
    let at = evo.to_eigenbasis(&a.matrix);
    let bt = evo.to_eigenbasis(&b.matrix);
    let mut best = 0.0_f64;
    for &t in t_grid {
        let x = evo.evolve_in_eigenbasis(&at, t);
        let c = &x * &bt - &bt * &x;
        best = best.max(c.singular_values().max());
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrRow {
    pub separation: usize,
    pub mean_sup_comm: f64,
    pub se: f64,
    pub realizations: usize,
}

/// Disorder mean of `sup_t ‖[τ_t(σ^a_j), σ^b_k]‖` for each `k` in `ks`.
/// `j = 1` with x/y observables uses the Majorana route, anything else
/// dense evolution.
#[allow(clippy::too_many_arguments)]
pub fn lr_commutator_stats(
    params: &ModelParams,
    j: usize,
    ks: &[usize],
    a: Pauli,
    b: Pauli,
    t_grid: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<LrRow>> {
    params.validate()?;
    let n = params.n;
    if n > 8 {
        return Err(Error::TooLarge { dim: 1 << n, cap: 1 << 8 });
    }
    if count == 0 {
        return Err(Error::InvalidParams("need at least one realization".into()));
    }
    if j == 0 || ks.iter().any(|&k| k <= j || k > n) {
        return Err(Error::InvalidParams(format!("need 1 <= j < k <= n (j = {j}, n = {n})")));
    }
    let fast = j == 1 && a != Pauli::Z && b != Pauli::Z;
    let sups: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let real = sample_disorder(params, seed, i as u64)?;
            if fast {
                let hat = assemble_hat_form(params, &real)?;
                let conv = verify_quadratic_form(&build_hamiltonian(params, &real)?, &hat)?;
                sup_commutator_majorana(&hat, a, b, ks, t_grid, conv.scale)
            } else {
                let h = build_hamiltonian(params, &real)?;
                let evo = HeisenbergEvolution::new(&h)?;
                let ao = Monomial::pauli(n, j, a).to_operator("A");
                Ok(ks
                    .iter()
                    .map(|&k| sup_commutator_dense(&evo, &ao, &Monomial::pauli(n, k, b).to_operator("B"), t_grid))
                    .collect())
            }
        })
        .collect::<Result<_>>()?;
    let c = count as f64;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(col, &k)| {
            let vals: Vec<f64> = sups.iter().map(|r| r[col]).collect();
            let mean = vals.iter().sum::<f64>() / c;
            let se = if count > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c - 1.0) / c).sqrt()
            } else {
                0.0
            };
            LrRow { separation: k - j, mean_sup_comm: mean, se, realizations: count }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SingleSiteDistribution;

    fn kron_pauli(n: usize, j: usize, p: Pauli) -> DMatrix<Complex64> {
        let s = match p {
            Pauli::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        };
        let mut m = DMatrix::from_element(1, 1, ONE);
        for site in 1..=n {
            let f = if site == j { s.clone() } else { DMatrix::identity(2, 2) };
            m = m.kronecker(&f);
        }
        m
    }

    fn realization(params: &ModelParams, seed: u64) -> DisorderRealization {
        sample_disorder(params, seed, 0).unwrap()
    }

    #[test]
    fn monomial_paulis_match_kronecker() {
        for n in 1..=3 {
            for j in 1..=n {
                for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                    let m = Monomial::pauli(n, j, p).to_operator("").matrix;
                    assert_eq!(m, kron_pauli(n, j, p));
                }
            }
        }
        let a = Monomial::lowering(1, 1).to_operator("").matrix;
        let expect = (kron_pauli(1, 1, Pauli::X) - kron_pauli(1, 1, Pauli::Y) * I) * Complex64::from(0.5);
        assert!(max_abs(&(a - expect)) < 1e-15);
    }

    #[test]
    fn single_site_hamiltonian() {
        let p = ModelParams::xy(1, 0.5, SingleSiteDistribution::degenerate(0.7));
        let h = build_hamiltonian(&p, &realization(&p, 1)).unwrap();
        assert!(max_abs(&(&h.matrix - kron_pauli(1, 1, Pauli::Z) * Complex64::from(0.7))) < 1e-15);
    }

    #[test]
    fn two_site_isotropic_spectrum() {
        let p = ModelParams::xy(2, 0.0, SingleSiteDistribution::degenerate(0.0));
        let h = build_hamiltonian(&p, &realization(&p, 1)).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h.real()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        // σxσx + σyσy = 2(|↑↓⟩⟨↓↑| + h.c.): eigenvalues ±2 on the singlet sector, 0 twice
        let expect = [-2.0, 0.0, 0.0, 2.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ising_limit_drops_yy() {
        let p = ModelParams::xy(2, 1.0, SingleSiteDistribution::degenerate(0.0));
        let h = build_hamiltonian(&p, &realization(&p, 1)).unwrap();
        let xx = kron_pauli(2, 1, Pauli::X) * kron_pauli(2, 2, Pauli::X) * Complex64::from(2.0);
        assert!(max_abs(&(&h.matrix - xx)) < 1e-15);
    }

    #[test]
    fn car_monomial_and_dense() {
        for n in 1..=8 {
            let f = build_jordan_wigner(n).unwrap();
            assert!(f.car_report().max() < 1e-12);
        }
        let f = build_jordan_wigner(4).unwrap();
        for j in 1..=4 {
            for k in 1..=4 {
                let mixed = f.c(j).anticommutator(&f.c_dag(k));
                let expect = if j == k { DMatrix::identity(16, 16) } else { DMatrix::zeros(16, 16) };
                assert!(max_abs(&(mixed - expect)) < 1e-12);
                assert!(max_abs(&f.c(j).anticommutator(&f.c(k))) < 1e-12);
            }
        }
        assert!(build_jordan_wigner(11).is_err());
    }

    #[test]
    fn quadratic_form_single_site() {
        let p = ModelParams::xy(1, 0.5, SingleSiteDistribution::degenerate(1.3));
        let real = realization(&p, 1);
        let h = build_hamiltonian(&p, &real).unwrap();
        let conv = verify_quadratic_form(&h, &assemble_hat_form(&p, &real).unwrap()).unwrap();
        assert_eq!(conv.scale, 1.0);
        assert!(conv.shift.abs() < 1e-14 && conv.residual < 1e-14);
    }

    #[test]
    fn quadratic_form_convention_is_global() {
        for (n, g) in [(2, 0.5), (4, 0.5), (5, 2.0), (6, 0.3)] {
            for seed in 0..3 {
                let p = ModelParams::xy(n, g, SingleSiteDistribution::uniform(-1.0, 2.0));
                let real = realization(&p, seed);
                let h = build_hamiltonian(&p, &real).unwrap();
                let hat = assemble_hat_form(&p, &real).unwrap();
                let conv = verify_quadratic_form(&h, &hat).unwrap();
                assert_eq!(conv.scale, 1.0);
                assert!(conv.shift.abs() < 1e-12);
                assert!(conv.residual < 1e-10);
            }
        }
    }

    #[test]
    fn free_fermion_spectrum_matches_diagonalization() {
        let p = ModelParams::xy(4, 0.5, SingleSiteDistribution::two_point(0.0, 1.0, 0.5));
        let real = realization(&p, 7);
        let h = build_hamiltonian(&p, &real).unwrap();
        let hat = assemble_hat_form(&p, &real).unwrap();
        let conv = verify_quadratic_form(&h, &hat).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h.real()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let ff = free_fermion_spectrum(&hat, &conv);
        for (a, b) in ev.iter().zip(&ff) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn heisenberg_single_site_closed_form() {
        let nu = 0.8;
        let p = ModelParams::xy(1, 0.5, SingleSiteDistribution::degenerate(nu));
        let real = realization(&p, 1);
        let h = build_hamiltonian(&p, &real).unwrap();
        let evo = HeisenbergEvolution::new(&h).unwrap();
        let a = Monomial::lowering(1, 1).to_operator("a").matrix;
        for &t in &[0.0, 0.3, 1.7] {
            let lhs = evo.evolve(&a, t);
            let rhs = &a * Complex64::from_polar(1.0, -2.0 * nu * t);
            assert!(max_abs(&(lhs - rhs)) < 1e-13);
        }
        let conv = Convention { scale: 1.0, shift: 0.0, shift_per_site: 0.0, residual: 0.0 };
        assert!(verify_heisenberg_identity(&p, &real, &conv, &[0.0, 0.3, 1.7]).unwrap() < 1e-13);
    }

    #[test]
    fn heisenberg_identity_six_sites() {
        let p = ModelParams::xy(6, 0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
        let real = realization(&p, 3);
        let h = build_hamiltonian(&p, &real).unwrap();
        let conv = verify_quadratic_form(&h, &assemble_hat_form(&p, &real).unwrap()).unwrap();
        let r = verify_heisenberg_identity(&p, &real, &conv, &[0.0, 0.5, 1.0, 2.0]).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn majorana_propagator_is_real_orthogonal() {
        let p = ModelParams::xy(5, 0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
        let hat = assemble_hat_form(&p, &realization(&p, 2)).unwrap();
        let eig = SymmetricEigen::new(hat.dense());
        let (w, imag) = majorana_propagator(&eig, 5, 1.0, 0.9);
        assert!(imag < 1e-12);
        assert!((w.transpose() * &w - DMatrix::identity(10, 10)).amax() < 1e-12);
    }

    #[test]
    fn majorana_route_matches_dense() {
        let n = 5;
        let p = ModelParams::xy(n, 0.5, SingleSiteDistribution::uniform(2.5, 3.5));
        let real = realization(&p, 4);
        let hat = assemble_hat_form(&p, &real).unwrap();
        let h = build_hamiltonian(&p, &real).unwrap();
        let evo = HeisenbergEvolution::new(&h).unwrap();
        let grid: Vec<f64> = (0..15).map(|i| 0.4 * i as f64).collect();
        for (a, b) in [(Pauli::X, Pauli::X), (Pauli::Y, Pauli::X), (Pauli::X, Pauli::Y)] {
            let ks = [2, 3, 5];
            let fast = sup_commutator_majorana(&hat, a, b, &ks, &grid, 1.0).unwrap();
            for (i, &k) in ks.iter().enumerate() {
                let ao = Monomial::pauli(n, 1, a).to_operator("A");
                let bo = Monomial::pauli(n, k, b).to_operator("B");
                let dense = sup_commutator_dense(&evo, &ao, &bo, &grid);
                assert!((fast[i] - dense).abs() < 1e-9, "{a:?}{b:?} k={k}: {} vs {dense}", fast[i]);
            }
        }
    }

    #[test]
    fn commutator_basics() {
        let n = 4;
        let p = ModelParams::xy(n, 0.5, SingleSiteDistribution::uniform(-1.0, 1.0));
        let h = build_hamiltonian(&p, &realization(&p, 5)).unwrap();
        assert!(h.hermiticity_defect() < 1e-14);
        let evo = HeisenbergEvolution::new(&h).unwrap();
        let a = Monomial::pauli(n, 1, Pauli::X).to_operator("A");
        let b = Monomial::pauli(n, 3, Pauli::X).to_operator("B");
        assert!(sup_commutator_dense(&evo, &a, &b, &[0.0]) < 1e-12);
        let s = sup_commutator_dense(&evo, &a, &b, &[0.5, 3.0, 8.0]);
        assert!(s > 0.0 && s <= 2.0 + 1e-12);
    }

    #[test]
    fn lr_stats_shape_and_bounds() {
        let p = ModelParams::xy(6, 0.5, SingleSiteDistribution::uniform(2.5, 3.5));
        let grid: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        let rows = lr_commutator_stats(&p, 1, &[2, 3, 4, 5, 6], Pauli::X, Pauli::X, &grid, 8, 3).unwrap();
        assert_eq!(rows.iter().map(|r| r.separation).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert!(rows.iter().all(|r| r.mean_sup_comm <= 2.0 + 1e-12));
        let dense = lr_commutator_stats(&p, 2, &[3, 4], Pauli::X, Pauli::X, &grid[..5], 2, 3).unwrap();
        assert_eq!(dense.len(), 2);
        assert!(lr_commutator_stats(&p, 3, &[2], Pauli::X, Pauli::X, &grid, 2, 3).is_err());
    }
}
