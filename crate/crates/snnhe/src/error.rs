use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] snnhe_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    /// Attaches `path` to a core error raised while decoding that file.
    pub fn in_file(path: impl AsRef<Path>) -> impl FnOnce(snnhe_core::Error) -> Error {
        let path = path.as_ref().display().to_string();
        move |e| Error::Core(e.context(path))
    }

    /// Process exit status: 2 for bad input or configuration, 3 for
    /// homomorphic-evaluation contract failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if !e.is_validation() => 3,
            _ => 2,
        }
    }

    pub fn core(&self) -> Option<&snnhe_core::Error> {
        match self {
            Error::Core(e) => Some(e.root()),
            _ => None,
        }
    }
}

pub(crate) fn format_err(msg: impl Into<String>) -> snnhe_core::Error {
    snnhe_core::Error::Format(msg.into())
}
