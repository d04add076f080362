use thiserror::Error;

/// Crate-wide error type. Variants carry enough payload for callers (and the
/// CLI error channel) to report actionable diagnostics without string parsing.
#[derive(Error, Debug, Clone)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("symbol drift {drift:.3e} exceeds bound {bound:.3e} at flow time {t:.6}")]
    DriftExceeded { drift: f64, bound: f64, t: f64 },

    #[error("trajectory did not reach the future boundary within the step budget (last x = {last_x:.3e} after {steps} steps)")]
    TrajectoryStalled { last_x: f64, steps: usize },

    #[error("face {face} is integrated out but its index set has minimal real part {min_re} <= -1")]
    NonIntegrableFace { face: String, min_re: f64 },

    #[error("resonant exponent alpha = {alpha}: coefficient vanishes at the characteristic roots s- = {s_minus}, s+ = {s_plus}")]
    Resonance { alpha: f64, s_minus: f64, s_plus: f64 },

    #[error("forcing has log degree above the admissible range at level {level}, log power {log_power}")]
    LogDegreeOverflow { level: usize, log_power: usize },

    #[error("complex characteristic exponents (discriminant {disc:.6e} < 0); this regime is out of scope here")]
    ComplexIndicialRoots { disc: f64 },

    #[error("Wronskian magnitude {value:.3e} below underflow guard {floor:.3e} at w = {w:.3e}")]
    WronskianUnderflow { value: f64, floor: f64, w: f64 },

    #[error("time step {dt:.3e} violates the stability bound {dt_max:.3e}; suggested step {suggested:.3e}")]
    CflViolation { dt: f64, dt_max: f64, suggested: f64 },

    #[error("source support resolved by fewer than {required} cells per direction; need at least {suggested_cells} angular cells")]
    UnresolvedSource { required: usize, suggested_cells: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
