use std::path::PathBuf;

/// Errors surfaced by the file formats, the benchmark driver and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] spaceiv_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        use spaceiv_core::Error as E;
        match self {
            Error::Model(e) => match e {
                E::SingularStructure { .. } => "singular_structure",
                E::InvalidSampleSize { .. } => "invalid_sample_size",
                E::DimensionMismatch(_) => "dimension_mismatch",
                E::InvalidConfig(_) => "invalid_config",
                E::CyclicGraph => "cyclic_graph",
                E::InvalidEdge(_) => "invalid_edge",
                E::DegenerateResidual => "degenerate_residual",
                E::RankDeficientInstruments => "rank_deficient_instruments",
                E::RankDeficientFirstStage => "rank_deficient_first_stage",
                E::RankDeficientDesign => "rank_deficient_design",
                E::EigenFailure => "eigen_failure",
                E::NormalizationFailure => "normalization_failure",
                E::SizeGuard { .. } => "size_guard",
                E::AllSubsetsFailed(_) => "all_subsets_failed",
            },
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Format(_) => "format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
