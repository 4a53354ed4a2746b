use thiserror::Error;

/// Errors produced anywhere in the flow.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared layer `{layer}`")]
    UndeclaredLayer { line: usize, col: usize, layer: String },
    #[error("{line}:{col}: non-positive dimension in {what}")]
    NonPositiveDimension { line: usize, col: usize, what: String },
    #[error("component `{component}` references unknown master `{master}`")]
    UnresolvedMaster { component: String, master: String },
    #[error("duplicate component `{0}`")]
    DuplicateComponent(String),
    #[error("malformed net `{net}`: {msg}")]
    MalformedNet { net: String, msg: String },
    #[error("invalid technology: {0}")]
    InvalidTechnology(String),
    #[error("technology already contains a bond layer `{0}`")]
    AlreadyMirrored(String),
    #[error("layer `{0}` has no mirror image in the 3D stack")]
    NoMirrorLayer(String),
    #[error("master `{0}` has no shrunk variant in the library")]
    MissingShrunkVariant(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("insufficient row capacity: {0}")]
    InsufficientRowCapacity(String),
    #[error("objective diverged: {0}")]
    Diverged(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("component `{0}` is not placed")]
    UnplacedComponent(String),
    #[error("power entry for unknown component `{0}`")]
    UnknownPowerComponent(String),
    #[error("component `{0}` has no power entry")]
    MissingPower(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Syntax { line, col, msg: msg.into() }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
