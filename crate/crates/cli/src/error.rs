use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: keyrank_core::Error,
    },

    #[error("[{stage}] {message}")]
    Data {
        stage: &'static str,
        message: String,
    },

    #[error("{0} check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    /// 0 success, 1 usage or config, 2 data, 3 check failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Stage { source, .. } => match source {
                keyrank_core::Error::InvalidArgument(_)
                | keyrank_core::Error::NonDifferentiable(_) => 1,
                _ => 2,
            },
            CliError::Data { .. } => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}

/// Tags core errors with the pipeline stage they came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for keyrank_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        let e = CliError::Stage {
            stage: "train",
            source: keyrank_core::Error::Empty("corrupted-positive set"),
        };
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_string(), "[train] empty corrupted-positive set");
        assert_eq!(CliError::CheckFailed(2).exit_code(), 3);
    }
}
