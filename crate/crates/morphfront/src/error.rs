use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes across the crate. Validation problems are reported with the
/// offending field, numerical failures with enough context to diagnose them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` must be {requirement} (got {value})")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("cutoff bracket invalid: need 0 < lo < hi, got lo={lo}, hi={hi}")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("cutoff thresholds undefined: m_ed, m_de, mu_e and mu_d must all be positive")]
    ThresholdUndefined,

    #[error("competition determinant m_ee*m_dd - m_ed*m_de is degenerate ({det})")]
    DegenerateCompetition { det: f64 },

    #[error("jacobian singular at the supplied point (det = {det})")]
    SingularJacobian { det: f64 },

    #[error("supplied point is not an equilibrium (residual {residual})")]
    NotAnEquilibrium { residual: f64 },

    #[error("newton iteration did not converge within {max_iter} steps")]
    NoConvergence { max_iter: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("condition `{name}` not satisfied (margin {margin})")]
    ConditionFailed { name: &'static str, margin: f64 },

    #[error("matrix reducible: both off-diagonal entries are zero")]
    ReducibleMatrix,

    #[error("off-diagonal entries must be non-negative (got {value})")]
    NegativeOffDiagonal { value: f64 },

    #[error("dispersion minimum sits on the scan boundary (beta = {beta}); no interior bracket")]
    BracketFailure { beta: f64 },

    #[error("parameters are not in the anomalous regime")]
    NotAnomalous,

    #[error("ratio point outside the anomalous zone (sign pattern of the quotient is wrong)")]
    ZoneViolated,

    #[error("internal consistency check failed: {0}")]
    Inconsistency(String),

    #[error("time step {dt} violates the diffusive stability limit {limit}")]
    CflViolated { dt: f64, limit: f64 },

    #[error("solution lost finiteness at t = {t}")]
    BlowUp { t: f64 },

    #[error("front trace too short: {have} usable samples, need at least {need}")]
    TooFewSamples { have: usize, need: usize },

    #[error("mu grid must be positive, finite and strictly ascending")]
    BadMuGrid,
}
