use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `⟨u, v⟩` is only defined when the rectangle is clearly wide or clearly tall.
    #[error("edge region {u}..{v} has an aspect ratio that is neither wide nor tall")]
    Aspect { u: String, v: String },

    #[error("site {0} lies below the half-space boundary")]
    HalfSpace(String),

    #[error("cannot materialize an infinite region")]
    InfiniteRegion,

    #[error("invalid distribution: {0}")]
    Spec(String),

    #[error("malformed document (line {line}): {msg}")]
    Format { line: usize, msg: String },

    #[error("outside the window: {0}")]
    Window(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("route geometry: {0}")]
    Geom(String),

    #[error("window has {0} sites; at most 12 are supported")]
    WindowTooLarge(usize),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("event is not increasing: {0}")]
    NotIncreasing(String),

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
