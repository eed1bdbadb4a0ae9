use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no positive crossover between f(s) and a*s for a = {a}")]
    NoCrossover { a: f64 },

    #[error("growth bound |f(s)| <= {delta}|s| + {constant}|s|^p violated at s = {s}")]
    GrowthViolation { delta: f64, constant: f64, s: f64 },

    #[error("shooting bracket not found: {0}")]
    Bracket(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("mountain-pass curve parameter search failed: {0}")]
    CurveSearch(String),

    #[error("bound alpha1 <= V <= alpha2 violated at {point:?}: V = {value}")]
    PotentialBound { point: Vec<f64>, value: f64 },

    #[error("degenerate critical point: {0}")]
    Degenerate(String),

    #[error("no admissible radius among {candidates:?}; worst angles {near_violations:?}")]
    RadiusRejected {
        candidates: Vec<f64>,
        near_violations: Vec<f64>,
    },

    #[error("grid geometry mismatch: {0}")]
    Geometry(String),

    #[error("barycenter undefined for the zero field")]
    ZeroField,

    #[error("boundary estimate fails: gap {gap:e} <= 0")]
    BoundaryGap { gap: f64 },

    #[error("degree undefined: barycenter map vanishes on the boundary sample at {xi:?}")]
    DegreeUndefined { xi: Vec<f64> },

    #[error("saddle search collapsed to a low-energy state (energy {energy:e} < {floor:e})")]
    Collapsed { energy: f64, floor: f64 },

    #[error("constrained saddle search diverged: {0}")]
    SaddleDivergence(String),

    #[error("linear solver breakdown: {0}")]
    Breakdown(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 1 configuration, 2 solver failure, 3 empty
    /// boundary gap, 4 saddle divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::NoCrossover { .. }
            | Error::GrowthViolation { .. }
            | Error::PotentialBound { .. }
            | Error::RadiusRejected { .. }
            | Error::Json(_) => 1,
            Error::BoundaryGap { .. } => 3,
            Error::SaddleDivergence(_) | Error::Collapsed { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        assert_eq!(Error::NoCrossover { a: 1.0 }.exit_code(), 1);
        assert_eq!(Error::BoundaryGap { gap: -1e-3 }.exit_code(), 3);
        assert_eq!(Error::SaddleDivergence("x".into()).exit_code(), 4);
        assert_eq!(Error::Collapsed { energy: 0.0, floor: 1.0 }.exit_code(), 4);
        assert_eq!(Error::Breakdown("x".into()).exit_code(), 2);
        assert_eq!(Error::ZeroField.exit_code(), 2);
    }
}
