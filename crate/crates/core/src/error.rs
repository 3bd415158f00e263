use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(&'static str),

    #[error("pruning would leave no retained samples ({removed} of {total} removed)")]
    EmptyRetained { removed: usize, total: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(contract(format!(
            "dimension mismatch: model expects {expected}, got {got}"
        )));
    }
    Ok(())
}
