//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("duplicate vertex label `{0}`")]
    DuplicateVertex(String),

    #[error("vertex label `{0}` is invalid")]
    InvalidLabel(String),

    #[error("graph has more than {0} vertices")]
    TooManyVertices(usize),

    #[error("directed part of the graph has a cycle")]
    DirectedCycle,

    #[error("self-loop on vertex `{0}`")]
    SelfLoop(String),

    #[error("context vertex `{0}` has an incoming directed or bidirected edge")]
    ContextWithIncoming(String),

    #[error("vertex sets must be disjoint: `{0}` appears twice")]
    NotDisjoint(String),

    #[error("set {{{0}}} is not bidirected-connected")]
    NotBidirectedConnected(String),

    #[error("`{0}` is labeled latent but was used as an observed vertex")]
    LatentNotObserved(String),

    #[error("missing q parameter: head {{{head}}} at tail assignment {tail}")]
    MissingParameter { head: String, tail: String },

    #[error("q parameter out of range: head {{{head}}} at {tail} is {value}")]
    ParameterOutOfRange {
        head: String,
        tail: String,
        value: String,
    },

    #[error("parameter set does not match graph: {0}")]
    ParameterMismatch(String),

    #[error("GMT produced a negative probability ({0}); parameters lie outside the model")]
    InvalidParameters(String),

    #[error("positivity violation: zero denominator eliminating into head {{{head}}} at tail assignment {tail}")]
    Positivity { head: String, tail: String },

    #[error("conditioning event has probability zero: {0}")]
    ZeroConditioningEvent(String),

    #[error("conditional effect undefined: P(z | do(x)) = 0")]
    UndefinedConditional,

    #[error("distribution is not normalized (sums to {0})")]
    NotNormalized(String),

    #[error("size guard exceeded: {0} variables (limit {1})")]
    SizeGuard(usize, usize),

    #[error("structural violation: {0}")]
    Structural(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
