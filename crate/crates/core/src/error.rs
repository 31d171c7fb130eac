use thiserror::Error;

/// Location-tagged diagnostic produced by the constraint parser.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("sort error: {0}")]
    Sort(String),
    #[error("undeclared variable `{0}`")]
    Undeclared(String),
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("symbol `{symbol}` is not in the domain alphabet")]
    SymbolOutsideAlphabet { symbol: char },
    #[error("string of length {len} exceeds the bound {bound} for `{var}`")]
    LengthViolation { var: String, len: usize, bound: usize },
    #[error("`{0}` is not a string variable")]
    NotAStringVar(String),
    #[error("unsupported atom: {0}")]
    Unsupported(String),
    #[error("automata over different domains cannot be combined")]
    DomainMismatch,
    #[error("unknown track `{0}`")]
    UnknownTrack(String),
    #[error("assignment does not cover track `{0}`")]
    MissingTrack(String),
    #[error("language is empty")]
    EmptyLanguage,
    #[error("knowledge automaton for `{0}` is not cached")]
    CacheMiss(String),
    #[error("incremental count {incremental} differs from recount {scratch} for {constraint}")]
    CountMismatch { constraint: String, incremental: String, scratch: String },
    #[error("constraint is unsatisfiable")]
    Unsatisfiable,
    #[error("path constraint list is empty")]
    NoPaths,
    #[error("indistinguishability threshold must be at least 1")]
    InvalidDelta,
    #[error("observation classes do not partition the input space: {0}")]
    NotAPartition(String),
    #[error("invalid annealing parameters: {0}")]
    InvalidSaParams(String),
    #[error("secret `{secret}` violates the knowledge constraint")]
    SecretExcluded { secret: String },
    #[error("target must declare exactly one high and one low string variable")]
    BadSignature,
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
