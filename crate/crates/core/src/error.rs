use nalgebra::Vector4;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("map is singular at ({:.6}, {:.6}, {:.6}, {:.6})", .point[0], .point[1], .point[2], .point[3])]
    Singular { point: Vector4<f64> },

    #[error("non-finite integrand value at ({:.6}, {:.6}, {:.6}, {:.6})", .point[0], .point[1], .point[2], .point[3])]
    NonFinite { point: Vector4<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("section is not tangent to the target sphere (|u·w| = {0:e})")]
    NotTangent(f64),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("numerical conditioning: {0}")]
    Conditioning(String),

    #[error("resolution too coarse: {0}")]
    Resolution(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
