//! Model parameters, reproducible disorder, and finite operator assembly.
//!
//! The XY specialization has block size 2 with diagonal blocks `ν_k σ^z` and
//! hopping blocks `μ_k S(γ_k)`, `S(γ) = [[1, γ], [−γ, −1]]`. General block
//! Jacobi instances (arbitrary `ℓ`, symmetric `V_k`, invertible `S_k`) go
//! through [`assemble_general`] or a [`BlockEnsemble`].

use std::hash::{Hash, Hasher};
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Distribution of the i.i.d. field values `ν_j`.
///
/// `TwoPoint { a, b, p }` takes the value `b` with probability `p` and `a`
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingleSiteDistribution {
    TwoPoint { a: f64, b: f64, p: f64 },
    Uniform { a: f64, b: f64 },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
}

impl SingleSiteDistribution {
    pub fn two_point(a: f64, b: f64, p: f64) -> Self {
        SingleSiteDistribution::TwoPoint { a, b, p }
    }

    pub fn uniform(a: f64, b: f64) -> Self {
        SingleSiteDistribution::Uniform { a, b }
    }

    pub fn degenerate(c: f64) -> Self {
        SingleSiteDistribution::Discrete { points: vec![c], weights: vec![1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        use SingleSiteDistribution::*;
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self {
            TwoPoint { a, b, p } => {
                if !(a.is_finite() && b.is_finite()) {
                    return bad(format!("two_point values must be finite (a = {a}, b = {b})"));
                }
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("two_point probability p = {p} outside [0, 1]"));
                }
            }
            Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite()) || a > b {
                    return bad(format!("uniform needs finite a <= b (a = {a}, b = {b})"));
                }
            }
            Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return bad(format!(
                        "discrete needs equally many points and weights ({} vs {})",
                        points.len(),
                        weights.len()
                    ));
                }
                if points.iter().any(|x| !x.is_finite()) {
                    return bad("discrete points must be finite".into());
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return bad("discrete weights must be nonnegative".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return bad(format!("discrete weights sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    /// True when the distribution is concentrated on a single point.
    pub fn is_trivial(&self) -> bool {
        use SingleSiteDistribution::*;
        match self {
            TwoPoint { a, b, p } => a == b || *p == 0.0 || *p == 1.0,
            Uniform { a, b } => a == b,
            Discrete { .. } => self.support_points().len() <= 1,
        }
    }

    /// Smallest closed interval containing the support.
    pub fn support_bounds(&self) -> (f64, f64) {
        let pts = self.support_points();
        match self {
            SingleSiteDistribution::Uniform { a, b } => (*a, *b),
            _ => (
                pts.iter().copied().fold(f64::INFINITY, f64::min),
                pts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    /// Atoms of a purely discrete distribution, sorted and deduplicated.
    /// For `Uniform` this returns the two endpoints.
    pub fn support_points(&self) -> Vec<f64> {
        use SingleSiteDistribution::*;
        let mut pts = match self {
            TwoPoint { a, b, p } => {
                let mut v = Vec::with_capacity(2);
                if *p < 1.0 {
                    v.push(*a);
                }
                if *p > 0.0 {
                    v.push(*b);
                }
                v
            }
            Uniform { a, b } => vec![*a, *b],
            Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .map(|(x, _)| *x)
                .collect(),
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Deterministic lattice over the support: the atoms for discrete
    /// distributions, `points` equally spaced values (endpoints included)
    /// for `Uniform`.
    pub fn support_lattice(&self, points: usize) -> Vec<f64> {
        match self {
            SingleSiteDistribution::Uniform { a, b } => {
                if a == b || points < 2 {
                    return vec![*a, *b][..if a == b { 1 } else { 2 }].to_vec();
                }
                let h = (b - a) / (points - 1) as f64;
                (0..points)
                    .map(|i| if i + 1 == points { *b } else { a + h * i as f64 })
                    .collect()
            }
            _ => self.support_points(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use SingleSiteDistribution::*;
        let u: f64 = rng.random();
        match self {
            TwoPoint { a, b, p } => {
                if u < *p {
                    *b
                } else {
                    *a
                }
            }
            Uniform { a, b } => a + (b - a) * u,
            Discrete { points, weights } => {
                let mut acc = 0.0;
                for (x, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *x;
                    }
                }
                // rounding in the cumulative sum: fall back to the last atom
                points
                    .iter()
                    .zip(weights)
                    .rev()
                    .find(|(_, w)| **w > 0.0)
                    .map(|(x, _)| *x)
                    .unwrap_or(points[points.len() - 1])
            }
        }
    }
}

/// The counter-based stream used for realization `index` under `seed`.
///
/// Realizations are independent of each other and of the order in which
/// they are generated.
pub fn disorder_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub ell: usize,
    pub n: usize,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rho: SingleSiteDistribution,
}

impl ModelParams {
    /// XY chain with `μ_j = 1` and constant anisotropy.
    pub fn xy(n: usize, gamma: f64, rho: SingleSiteDistribution) -> Self {
        let bonds = n.saturating_sub(1);
        ModelParams { ell: 2, n, mu: vec![1.0; bonds], gamma: vec![gamma; bonds], rho }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("chain length n must be positive".into()));
        }
        if self.ell != 2 {
            return Err(Error::InvalidParams(format!(
                "the XY specialization has ell = 2, got ell = {}",
                self.ell
            )));
        }
        let bonds = self.n - 1;
        if self.mu.len() < bonds || self.gamma.len() < bonds {
            return Err(Error::InvalidParams(format!(
                "need at least n - 1 = {bonds} couplings and anisotropies (got {} and {})",
                self.mu.len(),
                self.gamma.len()
            )));
        }
        if self.mu.iter().chain(&self.gamma).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("mu and gamma must be finite".into()));
        }
        self.rho.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    pub index: u64,
    pub nu: Vec<f64>,
    /// Set when `rho` is concentrated on one point.
    pub trivial: bool,
}

pub fn sample_disorder(params: &ModelParams, seed: u64, index: u64) -> Result<DisorderRealization> {
    params.rho.validate()?;
    let mut rng = disorder_rng(seed, index);
    let nu = (0..params.n).map(|_| params.rho.sample(&mut rng)).collect();
    Ok(DisorderRealization { seed, index, nu, trivial: params.rho.is_trivial() })
}

pub fn sigma_z() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

/// `S(γ) = [[1, γ], [−γ, −1]]`, with `det S(γ) = γ² − 1`.
pub fn hopping_block(gamma: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, gamma, -gamma, -1.0])
}

/// Finite block Jacobi matrix `M_n` with diagonal blocks `V_1..V_n` and
/// hopping blocks `S_1..S_{n-1}`; block `(k, k+1)` is `−S_k`, block
/// `(k+1, k)` is `−S_kᵗ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockJacobiMatrix {
    ell: usize,
    v: Vec<DMatrix<f64>>,
    s: Vec<DMatrix<f64>>,
}

impl BlockJacobiMatrix {
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Number of sites.
    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn dim(&self) -> usize {
        self.ell * self.v.len()
    }

    pub fn diagonal_blocks(&self) -> &[DMatrix<f64>] {
        &self.v
    }

    pub fn hopping_blocks(&self) -> &[DMatrix<f64>] {
        &self.s
    }

    /// `V_k` for 1-based site `k`.
    pub fn v(&self, k: usize) -> &DMatrix<f64> {
        &self.v[k - 1]
    }

    /// `S_k` for `1 <= k <= n-1`, and the identity for `k = 0` and `k = n`.
    pub fn s(&self, k: usize) -> DMatrix<f64> {
        if k == 0 || k >= self.n() {
            DMatrix::identity(self.ell, self.ell)
        } else {
            self.s[k - 1].clone()
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let (l, n) = (self.ell, self.n());
        let mut m = DMatrix::zeros(l * n, l * n);
        for (k, vk) in self.v.iter().enumerate() {
            m.view_mut((k * l, k * l), (l, l)).copy_from(vk);
        }
        for (k, sk) in self.s.iter().enumerate() {
            m.view_mut((k * l, (k + 1) * l), (l, l)).copy_from(&(-sk));
            m.view_mut(((k + 1) * l, k * l), (l, l)).copy_from(&(-sk.transpose()));
        }
        m
    }

    /// Stable hash of the stored entries, used to identify a matrix in
    /// error reports.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.ell.hash(&mut h);
        for block in self.v.iter().chain(&self.s) {
            for x in block.iter() {
                x.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Row-major CSV dump with a one-line `# randblock matrix` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# randblock matrix n={} ell={}", self.n(), self.ell)?;
        let m = self.dense();
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_invertible(index: usize, s: &DMatrix<f64>) -> Result<()> {
    let det = s.determinant();
    let scale = s.amax().max(f64::MIN_POSITIVE).powi(s.nrows() as i32);
    if !det.is_finite() || det.abs() <= 1e3 * f64::EPSILON * scale {
        return Err(Error::SingularHopping { index, det });
    }
    Ok(())
}

/// Assembles a general block Jacobi matrix. `v_list` has `n` symmetric
/// `ℓ×ℓ` blocks, `s_list` has `n-1` invertible ones.
pub fn assemble_general(
    ell: usize,
    v_list: Vec<DMatrix<f64>>,
    s_list: Vec<DMatrix<f64>>,
) -> Result<BlockJacobiMatrix> {
    if ell == 0 || v_list.is_empty() {
        return Err(Error::InvalidParams("need ell >= 1 and at least one site".into()));
    }
    if s_list.len() + 1 != v_list.len() {
        return Err(Error::InvalidParams(format!(
            "{} diagonal blocks need {} hopping blocks, got {}",
            v_list.len(),
            v_list.len() - 1,
            s_list.len()
        )));
    }
    for b in v_list.iter().chain(&s_list) {
        if b.shape() != (ell, ell) {
            return Err(Error::InvalidParams(format!(
                "block of shape {:?}, expected ({ell}, {ell})",
                b.shape()
            )));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("blocks must have finite entries".into()));
        }
    }
    for (k, v) in v_list.iter().enumerate() {
        if *v != v.transpose() {
            return Err(Error::NonSymmetricBlock(k + 1));
        }
    }
    for (k, s) in s_list.iter().enumerate() {
        check_invertible(k + 1, s)?;
    }
    Ok(BlockJacobiMatrix { ell, v: v_list, s: s_list })
}

fn check_realization(params: &ModelParams, real: &DisorderRealization) -> Result<()> {
    params.validate()?;
    if real.nu.len() != params.n {
        return Err(Error::InvalidParams(format!(
            "realization has {} field values for n = {}",
            real.nu.len(),
            params.n
        )));
    }
    Ok(())
}

/// XY block Jacobi matrix: `V_k = ν_k σ^z`, `S_k = μ_k S(γ_k)`.
pub fn assemble_block_jacobi(params: &ModelParams, real: &DisorderRealization) -> Result<BlockJacobiMatrix> {
    check_realization(params, real)?;
    let n = params.n;
    for &g in &params.gamma[..n - 1] {
        if g.abs() == 1.0 {
            return Err(Error::DegenerateAnisotropy(g));
        }
    }
    let sz = sigma_z();
    let v = real.nu.iter().map(|&x| &sz * x).collect();
    let s = (0..n - 1).map(|k| hopping_block(params.gamma[k]) * params.mu[k]).collect();
    assemble_general(2, v, s)
}

/// Hat form `[[A, B], [−B, −A]]` of the XY operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HatBlockMatrix {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl HatBlockMatrix {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, n)).copy_from(&self.b);
        m.view_mut((n, 0), (n, n)).copy_from(&(-&self.b));
        m.view_mut((n, n), (n, n)).copy_from(&(-&self.a));
        m
    }

    /// `P M̂ Pᵗ`, reordering the basis as `(e_1, e_{n+1}, e_2, e_{n+2}, ...)`.
    pub fn interleaved(&self) -> DMatrix<f64> {
        let perm = interleaving_permutation(self.n());
        let hat = self.dense();
        DMatrix::from_fn(hat.nrows(), hat.ncols(), |i, j| hat[(perm[i], perm[j])])
    }
}

/// `perm[i]` is the hat-form index that lands at block-Jacobi index `i`.
pub fn interleaving_permutation(n: usize) -> Vec<usize> {
    (0..2 * n).map(|i| if i % 2 == 0 { i / 2 } else { n + i / 2 }).collect()
}

pub fn assemble_hat_form(params: &ModelParams, real: &DisorderRealization) -> Result<HatBlockMatrix> {
    check_realization(params, real)?;
    let n = params.n;
    let mut a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&real.nu));
    let mut b = DMatrix::zeros(n, n);
    for j in 0..n - 1 {
        let mu = params.mu[j];
        let mg = mu * params.gamma[j];
        a[(j, j + 1)] = -mu;
        a[(j + 1, j)] = -mu;
        b[(j, j + 1)] = -mg;
        b[(j + 1, j)] = mg;
    }
    Ok(HatBlockMatrix { a, b })
}

/// Source of i.i.d. site blocks `(V_k, S_k)` for ensemble computations
/// (density of states, cocycles, correlators).
pub trait BlockEnsemble: Sync {
    fn ell(&self) -> usize;

    /// Draws the diagonal block and the outgoing hopping block of one site.
    fn draw_site(&self, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>);

    /// `E log|det S|` for the hopping distribution.
    fn mean_log_abs_det_hopping(&self) -> f64;

    /// Finite `n`-site truncation for realization `(seed, index)`.
    fn realize(&self, n: usize, seed: u64, index: u64) -> Result<BlockJacobiMatrix> {
        let mut rng = disorder_rng(seed, index);
        let mut v = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for _ in 0..n {
            let (vk, sk) = self.draw_site(&mut rng);
            v.push(vk);
            s.push(sk);
        }
        s.pop();
        assemble_general(self.ell(), v, s)
    }
}

/// XY chain in random field: `μ = 1`, constant `γ`, `ν_k ~ ρ`.
///
/// `realize` reproduces `sample_disorder` + `assemble_block_jacobi` for the
/// same `(seed, index)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XyEnsemble {
    pub gamma: f64,
    pub rho: SingleSiteDistribution,
}

impl XyEnsemble {
    pub fn new(gamma: f64, rho: SingleSiteDistribution) -> Result<Self> {
        rho.validate()?;
        if gamma.abs() == 1.0 || !gamma.is_finite() {
            return Err(Error::DegenerateAnisotropy(gamma));
        }
        Ok(XyEnsemble { gamma, rho })
    }

    pub fn params(&self, n: usize) -> ModelParams {
        ModelParams::xy(n, self.gamma, self.rho.clone())
    }
}

impl BlockEnsemble for XyEnsemble {
    fn ell(&self) -> usize {
        2
    }

    fn draw_site(&self, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
        let nu = self.rho.sample(rng);
        (sigma_z() * nu, hopping_block(self.gamma))
    }

    fn mean_log_abs_det_hopping(&self) -> f64 {
        (self.gamma * self.gamma - 1.0).abs().ln()
    }
}

/// General i.i.d. block ensemble: `V_k = diag(ν_k^(1..ℓ)) + offset` with
/// entries from `field`, and `S_k` drawn uniformly from a finite list of
/// invertible matrices (so `E log|det S|` is an exact finite average).
#[derive(Debug, Clone, PartialEq)]
pub struct RandomBlockEnsemble {
    ell: usize,
    field: SingleSiteDistribution,
    offset: DMatrix<f64>,
    hopping: Vec<DMatrix<f64>>,
}

impl RandomBlockEnsemble {
    pub fn new(
        field: SingleSiteDistribution,
        offset: DMatrix<f64>,
        hopping: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        field.validate()?;
        let ell = offset.nrows();
        if ell == 0 || offset.ncols() != ell || offset != offset.transpose() {
            return Err(Error::InvalidParams("offset must be a square symmetric matrix".into()));
        }
        if hopping.is_empty() {
            return Err(Error::InvalidParams("need at least one hopping matrix".into()));
        }
        for (i, s) in hopping.iter().enumerate() {
            if s.shape() != (ell, ell) {
                return Err(Error::InvalidParams("hopping matrices must be ell x ell".into()));
            }
            check_invertible(i + 1, s)?;
        }
        Ok(RandomBlockEnsemble { ell, field, offset, hopping })
    }

    /// `count` hopping matrices `I + 0.6·U(−1, 1)` drawn from `seed`, each
    /// with `|det| >= 0.25`, plus a fixed symmetric nearest-component
    /// coupling of strength 0.3 in `V`.
    pub fn random(ell: usize, field: SingleSiteDistribution, count: usize, seed: u64) -> Result<Self> {
        let mut rng = disorder_rng(seed, u64::MAX);
        let mut hopping = Vec::with_capacity(count);
        while hopping.len() < count {
            let s = DMatrix::from_fn(ell, ell, |i, j| {
                let u: f64 = rng.random_range(-1.0..1.0);
                if i == j {
                    1.0 + 0.6 * u
                } else {
                    0.6 * u
                }
            });
            if s.determinant().abs() >= 0.25 {
                hopping.push(s);
            }
        }
        let offset = DMatrix::from_fn(ell, ell, |i, j| if i.abs_diff(j) == 1 { 0.3 } else { 0.0 });
        Self::new(field, offset, hopping)
    }

    pub fn hopping_choices(&self) -> &[DMatrix<f64>] {
        &self.hopping
    }
}

impl BlockEnsemble for RandomBlockEnsemble {
    fn ell(&self) -> usize {
        self.ell
    }

    fn draw_site(&self, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut v = self.offset.clone();
        for i in 0..self.ell {
            v[(i, i)] += self.field.sample(rng);
        }
        let pick = rng.random_range(0..self.hopping.len());
        (v, self.hopping[pick].clone())
    }

    fn mean_log_abs_det_hopping(&self) -> f64 {
        self.hopping.iter().map(|s| s.determinant().abs().ln()).sum::<f64>() / self.hopping.len() as f64
    }
}
