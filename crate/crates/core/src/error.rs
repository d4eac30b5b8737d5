use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid format: {0}")]
    InvalidFormat(String),
    #[error("invalid rounding mode `{0}`")]
    InvalidMode(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("{format} has {bits} bits, above the enumeration cap of {cap} bits")]
    EnumerationCap { format: String, bits: u32, cap: u32 },
    #[error("{function}: input {input} is outside the domain")]
    Domain { function: String, input: String },
    #[error("oracle could not round {function}({input}) at {precision} bits of working precision")]
    OracleUndecided { function: String, input: String, precision: u32 },
    #[error("empty reduced interval for input {input}")]
    EmptyInterval { input: String },
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("format {0} is not supported by this artifact")]
    UnsupportedFormat(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
