use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::TensorError;
use crate::binfmt::FormatError;
use crate::datagen::InterferenceKind;
use crate::dsp::DspError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0:?} interference cannot be demodulated for resynthesis")]
    NotDemodulable(InterferenceKind),
    #[error("training produced a non-finite loss at epoch {epoch}, step {step}; last good checkpoint: {}",
        last_good.as_ref().map_or("none".to_string(), |p| p.display().to_string()))]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: Option<PathBuf>,
    },
    #[error("evaluation: {0}")]
    Eval(String),
}

impl Error {
    /// Adapter for `map_err` that attaches `path`.
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
