use thiserror::Error;

/// Errors produced by the simulation and pricing layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A jump factor 1 + g(x)·y dropped to or below zero at runtime. This
    /// signals a model that evaded the validator's sampled margin check.
    #[error("positivity lost at t = {time}: jump factor {factor}{}", path_label(.path))]
    Positivity {
        time: f64,
        factor: f64,
        path: Option<usize>,
    },

    #[error("argument {t} outside the path range [{lo}, {hi}]")]
    Range { t: f64, lo: f64, hi: f64 },

    #[error("degenerate market: {0}")]
    DegenerateMarket(String),

    #[error("history error: {0}")]
    History(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("rate fit error: {0}")]
    Fit(String),
}

fn path_label(path: &Option<usize>) -> String {
    match path {
        Some(i) => format!(" (path {i})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach a path index to a positivity error raised inside an ensemble.
    pub(crate) fn with_path(self, index: usize) -> Self {
        match self {
            Error::Positivity { time, factor, .. } => Error::Positivity {
                time,
                factor,
                path: Some(index),
            },
            other => other,
        }
    }
}
