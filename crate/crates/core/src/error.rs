use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the kinetic solver and its supporting kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// Density or temperature of a velocity row is not positive.
    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error(
        "equilibrium solve did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("geometry error at cell ({i}, {j}): {msg}")]
    Geometry { i: usize, j: usize, msg: String },

    /// A cell is cut more than once; the grid does not resolve the solid.
    #[error("under-resolved geometry at cell ({i}, {j}): four sign changes; refine the grid")]
    UnderResolved { i: usize, j: usize },

    #[error("step {step} failed: {source}")]
    Step {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn geometry(i: usize, j: usize, msg: impl Into<String>) -> Self {
        Error::Geometry {
            i,
            j,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
