use std::fmt;
use std::process::ExitCode;

/// Error classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, manifest or parameters (exit 2).
    Config(String),
    /// Unreadable or malformed input, unwritable output (exit 3).
    Io(String),
    /// Solver or generator failure (exit 4).
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<rcd_core::Error> for CliError {
    fn from(e: rcd_core::Error) -> Self {
        use rcd_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } | E::Parse { .. } => CliError::Io(msg),
            E::NonFinite(_)
            | E::DegenerateDirection { .. }
            | E::MaxIterations(_)
            | E::CertificateFailed { .. } => CliError::Numerical(msg),
            E::DimensionMismatch { .. }
            | E::IndexOutOfRange { .. }
            | E::DuplicateIndex(_)
            | E::EmptyBlock
            | E::InvalidMatrix(_)
            | E::InvalidParameter(_) => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcd_core::Error as E;

    fn code(e: CliError) -> u8 {
        match e {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    #[test]
    fn library_errors_map_to_exit_classes() {
        assert_eq!(code(E::InvalidParameter("x".into()).into()), 2);
        assert_eq!(code(E::EmptyBlock.into()), 2);
        assert_eq!(
            code(
                E::Parse {
                    path: "p".into(),
                    line: 1,
                    message: "m".into()
                }
                .into()
            ),
            3
        );
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(
            code(
                E::Io {
                    path: "p".into(),
                    source: io
                }
                .into()
            ),
            3
        );
        assert_eq!(code(E::DegenerateDirection { iterations: 3 }.into()), 4);
        assert_eq!(code(E::NonFinite("x").into()), 4);
        assert_eq!(
            code(
                E::CertificateFailed {
                    residual: 1.0,
                    tolerance: 0.0
                }
                .into()
            ),
            4
        );
    }
}
