use std::path::Path;

use ctpt_core::Error as ModelError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    /// Malformed user input: CSV contents, flags, config values.
    #[error("{0}")]
    Input(String),

    /// JSON that does not match the expected schema; `pointer` locates the
    /// offending value.
    #[error("{file}: invalid value at {pointer}: {message}")]
    Schema { file: String, pointer: String, message: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 0 success, 2 validation, 3 numerical non-convergence, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 4,
            CliError::Input(_) | CliError::Schema { .. } => 2,
            CliError::Model(e) => match e.root() {
                ModelError::NonConvergence(_)
                | ModelError::DegenerateCovariance
                | ModelError::InsufficientDraws(_)
                | ModelError::NonFiniteLogPost => 3,
                _ => 2,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctpt_core::Equation;

    #[test]
    fn exit_codes() {
        let nc = CliError::from(ModelError::DegenerateCovariance.in_equation(Equation::Outcome));
        assert_eq!(nc.exit_code(), 3);
        assert_eq!(CliError::from(ModelError::ImproperPosterior { n: 3, k: 3 }).exit_code(), 2);
        assert_eq!(CliError::io("x", std::io::Error::other("gone")).exit_code(), 4);
        assert_eq!(CliError::Input("bad".into()).exit_code(), 2);
    }
}
