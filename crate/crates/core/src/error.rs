use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma function has a pole at x = {0}")]
    GammaPole(f64),

    #[error("gamma function overflows at x = {0}")]
    GammaOverflow(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Mittag-Leffler evaluation did not converge ({regime} regime) at z = {z}")]
    MlNonConvergence { regime: &'static str, z: Complex64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("coefficient sign violation at node {node} (x = {x}): {what}")]
    SignViolation { node: usize, x: f64, what: &'static str },

    #[error("tridiagonal eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("quadrature breakdown in term I{term}: {detail}")]
    Quadrature { term: usize, detail: String },

    #[error(
        "Picard iteration is not contracting on window [{t_a}, {t_b}] \
         (difference ratio >= 1 for {streak} consecutive iterations)"
    )]
    NonContraction { t_a: f64, t_b: f64, streak: usize },

    #[error(
        "Picard iteration hit the cap of {iterations} iterations on window [{t_a}, {t_b}] \
         (last difference {last_diff:e})"
    )]
    IterationCap { t_a: f64, t_b: f64, iterations: usize, last_diff: f64 },

    #[error("singular linear system at time step {step}")]
    SingularSystem { step: usize },

    #[error("contour inversion failed at t = {t}: {detail}")]
    Contour { t: f64, detail: String },

    #[error("evaluation point too close to a pole or branch cut: {0}")]
    PoleProximity(String),

    #[error("contour encloses more than one eigenvalue: {0}")]
    Enclosure(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonContraction { .. } | Error::IterationCap { .. } => 3,
            _ => 2,
        }
    }
}
