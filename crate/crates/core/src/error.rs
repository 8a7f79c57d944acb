use thiserror::Error;

/// Errors produced by the crystal, mode and coupling pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "requested omega_eff = {requested} omega_z exceeds the maximum attainable \
         omega_eff = {max} omega_z"
    )]
    RotationOutOfRange { requested: f64, max: f64 },

    #[error(
        "no confinement window at any rotation frequency: \
         omega_c^2/4 - omega_z^2/2 - omega_W^2 = {discriminant} < 0"
    )]
    NoConfinementWindow { discriminant: f64 },

    #[error("singular configuration: ions {0} and {1} coincide")]
    SingularConfiguration(usize, usize),

    #[error("minimizer did not converge after {iterations} iterations (max |grad| = {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("converged to a saddle point: smallest Hessian eigenvalue {min_eigenvalue:e}")]
    SaddlePoint { min_eigenvalue: f64 },

    #[error("unstable equilibrium: planar stiffness eigenvalue {eigenvalue:e} below tolerance")]
    UnstableEquilibrium { eigenvalue: f64 },

    #[error("axial modes are unstable (mode {mode} has imaginary frequency {frequency} omega_z)")]
    UnstableMode { mode: usize, frequency: f64 },

    #[error("drive frequency mu = {mu} is resonant with mode {mode} at {frequency} omega_z")]
    Resonance { mode: usize, frequency: f64, mu: f64 },

    #[error("mode index {index} out of range (have {count} modes)")]
    ModeIndex { index: usize, count: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error(
        "coupling matrix is frustrated (majority-sign fraction {majority_fraction:.4} <= 0.9); \
         use a histogram instead of a power-law fit"
    )]
    Frustrated { majority_fraction: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::RotationOutOfRange { .. }
                | Error::NoConfinementWindow { .. }
                | Error::ModeIndex { .. }
                | Error::Config(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
