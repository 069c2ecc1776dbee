use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into input problems (bad shapes, bad parameters) and
/// numerical failures; [`Error::is_numerical`] tells them apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("row {row} has zero norm")]
    ZeroRow { row: usize },
    #[error("design column for mode {mode} is zero")]
    ZeroColumn { mode: String },
    #[error("design matrix is rank deficient at mode {mode}")]
    RankDeficient { mode: String },
    #[error("ridgeless interpolation regime: no positive kappa for n = {n} with {positive_modes} positive modes and zero ridge")]
    Ridgeless { n: f64, positive_modes: usize },
    #[error("linear system is singular; use a positive ridge")]
    Singular,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures that come from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::Ridgeless { .. }
                | Error::Singular
                | Error::Numerical(_)
        )
    }
}

/// Tags an error with the pipeline stage it came from.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
