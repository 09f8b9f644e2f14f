//! File formats, report writers and the command-line front end for
//! `gmmc-core`.

pub mod cli;
pub mod config;
pub mod csv_import;
pub mod formats;
pub mod parallel;
pub mod report;

pub use formats::FormatError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] gmmc_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gradient check failed: max relative error {0:e} exceeds {1:e}")]
    GradCheck(f64, f64),
}

impl CliError {
    /// Short machine-readable tag printed with every error.
    pub fn kind(&self) -> &'static str {
        use gmmc_core::Error as E;
        match self {
            Self::Format(FormatError::Core(e)) | Self::Core(e) => match e {
                E::Dimension { .. } | E::Config(_) | E::Label { .. } | E::MissingClass { .. } => "config",
                E::Divergence { .. } => "divergence",
                E::Domain(_) => "domain",
                E::Empty(_) | E::InsufficientData { .. } => "data",
                E::Degenerate(_) | E::NotPositiveDefinite { .. } => "numeric",
            },
            Self::Format(e) => e.kind(),
            Self::Config(_) => "config",
            Self::Usage(_) => "usage",
            Self::Io { .. } => "io",
            Self::GradCheck(..) => "gradcheck",
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
