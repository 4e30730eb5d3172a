use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature vector has {got} components, schema expects {expected}")]
    Arity { expected: usize, got: usize },

    #[error("binary feature {feature} must be 0 or 1, got {value}")]
    NonBinary { feature: usize, value: f64 },

    #[error("no data")]
    Empty,

    #[error("invalid weight scheme: learning {learning}, prediction {prediction}")]
    InvalidScheme {
        learning: &'static str,
        prediction: &'static str,
    },

    #[error("tree {0} has not been fitted")]
    Unfitted(usize),

    #[error("malformed tree: {0}")]
    MalformedTree(String),
}

pub(crate) fn check_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}
