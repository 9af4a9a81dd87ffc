use std::path::PathBuf;

/// Process exit codes of the command-line driver.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed file contents; `line` is 1-based.
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    /// Well-formed file whose contents are unusable.
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] oqe_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use oqe_core::Error as C;
        match self {
            Error::Usage(_) | Error::Config { .. } => exit::USAGE,
            Error::Io { .. } | Error::Parse { .. } | Error::Invalid { .. } => exit::DATA,
            Error::Core(e) => match e {
                C::NonFinite(_) => exit::NUMERICAL,
                C::Empty(_) | C::NotUnitary(_) => exit::DATA,
                C::InvalidDepth { .. }
                | C::Shape { .. }
                | C::InvalidArgument(_)
                | C::ResonantCoupling
                | C::TooLarge { .. } => exit::USAGE,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Usage("x".into()).exit_code(), exit::USAGE);
        let io = Error::io("a", std::io::Error::other("boom"));
        assert_eq!(io.exit_code(), exit::DATA);
        assert_eq!(
            Error::Core(oqe_core::Error::NonFinite("nan".into())).exit_code(),
            exit::NUMERICAL
        );
        assert_eq!(Error::Core(oqe_core::Error::NotUnitary(0.1)).exit_code(), exit::DATA);
        assert!(io.to_string().starts_with("a: "));
    }
}
