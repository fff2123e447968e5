use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: missing required column `{column}`")]
    Schema { file: String, column: String },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("duplicate firm-year ({firm_id}, {year}) at lines {first_line} and {second_line}")]
    Duplicate {
        firm_id: String,
        year: i32,
        first_line: usize,
        second_line: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("window {start}..={end} contains no rows")]
    EmptyWindow { start: i32, end: i32 },

    #[error("design error in column `{column}`: {reason}")]
    Design { column: String, reason: String },

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("clusters {a} and {b} have coincident medoids")]
    DegenerateSeparation { a: usize, b: usize },

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("quadrature did not converge (achieved relative error {achieved:.3e})")]
    Precision { achieved: f64 },

    #[error("model space of {k} candidates exceeds the cap of {cap}")]
    Capacity { k: usize, cap: usize },

    #[error("sampler accepted no moves after burn-in ({iterations} iterations)")]
    MixingFailure { iterations: usize },

    #[error("unknown variable `{0}`")]
    Catalogue(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("country `{0}` has no region mapping")]
    Mapping(String),

    #[error("span error: {0}")]
    Span(String),

    #[error("missing upstream artifact {}", .0.display())]
    Dependency(PathBuf),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
