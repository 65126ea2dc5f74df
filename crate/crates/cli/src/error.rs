use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Config {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] dgtnash::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for divergence, 4 for failed preconditions.
    pub fn exit_code(&self) -> i32 {
        use dgtnash::Error as E;
        match self {
            Self::Config { .. } | Self::Read { .. } => 2,
            Self::Write { .. } => 1,
            Self::Core(e) => match e {
                E::Domain(_) | E::Topology(_) | E::Parse { .. } => 2,
                E::Divergence { .. } => 3,
                E::Precondition(_) | E::Singular(_) | E::NoConvergence { .. } | E::Unsupported(_) => 4,
                E::Protocol(_) => 1,
            },
        }
    }
}
