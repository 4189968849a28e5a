use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the command line to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Usage,
    Tolerance,
    Capability,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage => 2,
            Category::Tolerance => 3,
            Category::Capability => 4,
            Category::Io => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Tolerance => "tolerance",
            Category::Capability => "capability",
            Category::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    #[error("unsupported capability: {0}")]
    Capability(String),

    #[error("numerical tolerance not met: {message}")]
    NumericalTolerance {
        message: String,
        /// `(name, value)` pairs describing the failed computation.
        diagnostics: Vec<(String, f64)>,
    },

    #[error("level {level} lies beyond the simulated horizon H({s_max}) = {reached}; extend s_max to at least {suggested}")]
    HorizonExceeded {
        level: f64,
        s_max: f64,
        reached: f64,
        suggested: f64,
    },

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("scalar iteration failed: {message}")]
    Iteration {
        message: String,
        diagnostics: Vec<(String, f64)>,
    },

    #[error("range error: {0}")]
    Range(String),

    #[error("undefined radius: {0}")]
    UndefinedRadius(String),

    #[error("series divergence domain: {0}")]
    DivergenceDomain(String),

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn tolerance(message: impl Into<String>, diagnostics: Vec<(String, f64)>) -> Self {
        Error::NumericalTolerance {
            message: message.into(),
            diagnostics,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::ParameterDomain(_)
            | Error::Domain(_)
            | Error::FamilyMismatch(_)
            | Error::DivergenceDomain(_)
            | Error::StepSize(_)
            | Error::Config(_) => Category::Usage,
            Error::NumericalTolerance { .. }
            | Error::Iteration { .. }
            | Error::Range(_)
            | Error::UndefinedRadius(_)
            | Error::Conditioning(_)
            | Error::HorizonExceeded { .. } => Category::Tolerance,
            Error::Capability(_) => Category::Capability,
            Error::Io(_) | Error::Csv(_) => Category::Io,
        }
    }

    pub fn diagnostics(&self) -> &[(String, f64)] {
        match self {
            Error::NumericalTolerance { diagnostics, .. } | Error::Iteration { diagnostics, .. } => {
                diagnostics
            }
            _ => &[],
        }
    }
}
