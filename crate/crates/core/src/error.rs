use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix has numerical rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular")]
    Singular,

    #[error("active-set QP solver exceeded {0} pivots")]
    MaxPivots(usize),

    #[error("proximal scaling {xi} is too small; it must exceed {min_admissible}{}",
        hessian_bound.map(|b| format!(" (largest eigenvalue of H is {b})")).unwrap_or_default())]
    XiTooSmall { xi: f64, min_admissible: f64, hessian_bound: Option<f64> },

    #[error("eigenvalue split of M gives rank {found}, expected {expected}")]
    RankMismatch { found: usize, expected: usize },

    #[error("every component of stage {0} is empty for this parameter")]
    StageInfeasible(usize),

    #[error("enumeration needs {count} combinations, above the cap {cap}")]
    TooManyCombinations { count: u128, cap: u128 },

    #[error("Fourier-Motzkin elimination exceeded {cap} rows")]
    BlowUp { cap: usize },

    #[error("combinatorial limit of {cap} exceeded in {what}")]
    CombinatorialCap { what: &'static str, cap: usize },

    #[error("no PWA region contains (x, u) at step {step}")]
    NoActiveRegion { step: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("LP solver failure: {0}")]
    Lp(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub(crate) fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch(format!(
            "{what} has length {got}, expected {expected}"
        )));
    }
    Ok(())
}
