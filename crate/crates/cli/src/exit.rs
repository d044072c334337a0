//! Error classes and their stable process exit codes.

use std::io::ErrorKind;

use leakcheck_core::Error as CoreError;

/// Stable exit codes. Values never change between releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitClass {
    Success = 0,
    Internal = 1,
    Usage = 2,
    MissingInput = 3,
    InvalidInput = 4,
    InvalidArgument = 5,
    Io = 6,
    Extractor = 7,
    Verification = 8,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("config file {path}: {message}")]
    Config { path: String, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("extractor failed: {0}")]
    Extractor(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Service(#[from] leakcheck_review_service::ServiceError),
}

impl CliError {
    pub fn class(&self) -> ExitClass {
        match self {
            CliError::Core(e) => core_class(e),
            CliError::Service(leakcheck_review_service::ServiceError::Storage(e)) => core_class(e),
            CliError::Service(_) => ExitClass::InvalidInput,
            CliError::Usage(_) => ExitClass::Usage,
            CliError::Config { .. } | CliError::Argument(_) => ExitClass::InvalidArgument,
            CliError::Extractor(_) => ExitClass::Extractor,
            CliError::Verification(_) => ExitClass::Verification,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().code()
    }
}

fn core_class(e: &CoreError) -> ExitClass {
    use CoreError::*;
    match e {
        Io { source, .. } if source.kind() == ErrorKind::NotFound => ExitClass::MissingInput,
        Io { .. } => ExitClass::Io,
        MissingDataset(_) | MissingBenchmark => ExitClass::MissingInput,
        BadMagic { .. }
        | UnsupportedVersion(_)
        | UnsupportedDtype { .. }
        | TruncatedPayload { .. }
        | DimensionZero
        | InvariantViolation(_)
        | ZeroVector(_)
        | RaggedRows { .. }
        | Parse(_)
        | ManifestMismatch { .. }
        | EmptyInput
        | DimMismatch { .. }
        | UnnormalizedInput(_)
        | EmptySet(_)
        | EmptyImpostorSet
        | NonFiniteScore
        | UnknownLabel(_)
        | EmptyMatches
        | UnknownPair(_) => ExitClass::InvalidInput,
        InvalidArgument(_) | TargetFarOutOfRange(_) | InvalidRange { .. } => ExitClass::InvalidArgument,
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_stable() {
        let table = [
            (ExitClass::Success, 0),
            (ExitClass::Internal, 1),
            (ExitClass::Usage, 2),
            (ExitClass::MissingInput, 3),
            (ExitClass::InvalidInput, 4),
            (ExitClass::InvalidArgument, 5),
            (ExitClass::Io, 6),
            (ExitClass::Extractor, 7),
            (ExitClass::Verification, 8),
        ];
        for (class, code) in table {
            assert_eq!(class.code(), code);
        }
        let missing = CoreError::io("x", std::io::Error::from(ErrorKind::NotFound));
        assert_eq!(CliError::from(missing).exit_code(), 3);
        let denied = CoreError::io("x", std::io::Error::from(ErrorKind::PermissionDenied));
        assert_eq!(CliError::from(denied).exit_code(), 6);
        assert_eq!(CliError::from(CoreError::TargetFarOutOfRange(2.0)).exit_code(), 5);
        assert_eq!(CliError::from(CoreError::BadMagic { expected: *b"EMBS", found: [0; 4] }).exit_code(), 4);
    }
}
