use std::path::PathBuf;

use entlab_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("selftest: {0} check(s) failed")]
    SelftestFailed(usize),
}

impl LabError {
    /// Process exit status: 2 validation, 3 cap exceeded, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(CoreError::CapExceeded { .. }) => 3,
            LabError::Io { .. } | LabError::Csv { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
