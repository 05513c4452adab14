use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid single-site distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("anisotropy gamma = {0} makes S(gamma) singular (det = gamma^2 - 1 = 0)")]
    DegenerateAnisotropy(f64),

    #[error("hopping block S_{index} is singular (|det| = {det:e})")]
    SingularHopping { index: usize, det: f64 },

    #[error("diagonal block V_{0} is not symmetric")]
    NonSymmetricBlock(usize),

    #[error("eigensolver did not converge (matrix fingerprint {fingerprint:016x}, dim {dim})")]
    NoConvergence { fingerprint: u64, dim: usize },

    #[error("dimension {dim} exceeds the dense cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("z = {re}{im:+}i is in or near the spectrum (Wronskian condition number {cond:e})")]
    NearSpectrum { re: f64, im: f64, cond: f64 },

    #[error("solution overflow at site {site}; use complex z or a shorter chain")]
    Overflow { site: usize },

    #[error("non-finite values in cocycle propagation (reorth_every = {reorth_every})")]
    NonFinite { reorth_every: usize },

    #[error("density of states is empty")]
    EmptyDos,

    #[error("no root bracketed in [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}; widen the bracket")]
    NoRootBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("convention mismatch: residual {residual:e} after reconciliation (scale {scale}, shift {shift})")]
    ConventionMismatch { residual: f64, scale: f64, shift: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the caller's input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidDistribution(_)
                | Error::InvalidParams(_)
                | Error::DegenerateAnisotropy(_)
                | Error::NonSymmetricBlock(_)
                | Error::TooLarge { .. }
                | Error::Config(_)
                | Error::Json(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::InvalidParams(_) => "invalid_params",
            Error::DegenerateAnisotropy(_) => "degenerate_anisotropy",
            Error::SingularHopping { .. } => "singular_hopping",
            Error::NonSymmetricBlock(_) => "non_symmetric_block",
            Error::NoConvergence { .. } => "no_convergence",
            Error::TooLarge { .. } => "too_large",
            Error::NearSpectrum { .. } => "near_spectrum",
            Error::Overflow { .. } => "overflow",
            Error::NonFinite { .. } => "non_finite",
            Error::EmptyDos => "empty_dos",
            Error::NoRootBracketed { .. } => "no_root_bracketed",
            Error::InsufficientData(_) => "insufficient_data",
            Error::ConventionMismatch { .. } => "convention_mismatch",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
