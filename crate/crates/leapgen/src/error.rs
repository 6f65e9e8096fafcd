use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size {n} is outside the support of class {class} ({detail})")]
    UnsupportedSize {
        class: String,
        n: usize,
        detail: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluation point {x} is at or beyond the estimated radius of convergence {radius}")]
    RadiusExceeded { x: f64, radius: f64 },

    #[error("fixed-point solve did not converge: {0}")]
    NonConvergence(String),

    #[error("trial cap of {cap} exceeded for class {class} at size {n}")]
    TrialCapExceeded { class: String, n: usize, cap: u64 },

    #[error("statistic {stat} is not defined for class {class}")]
    InvalidStatistic { stat: String, class: String },

    #[error("acceleration order {r} requires asymptotic expansion coefficients that are not available for {class}")]
    MissingExpansion { r: u8, class: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
