//! Error type shared by every numerical stage.

use thiserror::Error;

/// Failures raised by the geometry kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VossError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("jet order exhausted: cannot differentiate an order-0 jet")]
    OrderExhausted,
    #[error("singular chart at ({x}, {y}): |sin phi| = {sin_phi:e}")]
    SingularChart { x: f64, y: f64, sin_phi: f64 },
    #[error("integration diverged: {0}")]
    DivergedIntegration(String),
    #[error("one-form is not closed: residual {residual:e} at ({x}, {y})")]
    NotClosed { residual: f64, x: f64, y: f64 },
    #[error("degenerate net: {0}")]
    DegenerateNet(String),
    #[error("curvature blow-up at ({x}, {y})")]
    BlowUp { x: f64, y: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("ill-conditioned rank decision: sigma ratio {ratio:e} near threshold {threshold:e}")]
    IllConditioned { ratio: f64, threshold: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, VossError>;

impl From<std::io::Error> for VossError {
    fn from(e: std::io::Error) -> Self {
        VossError::Io(e.to_string())
    }
}
