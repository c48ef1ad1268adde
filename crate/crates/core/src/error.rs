use thiserror::Error;

/// Errors raised by the algorithms in this crate.
///
/// Cap breaches are always reported; nothing in the crate truncates an
/// enumeration silently.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("generator index {index} is out of range for rank {rank}")]
    GeneratorOutOfRange { index: usize, rank: usize },
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },
    #[error("cannot parse word {input:?}: {reason}")]
    WordSyntax { input: String, reason: String },
    #[error("cannot parse series {input:?}: {reason}")]
    SeriesSyntax { input: String, reason: String },
    #[error("series shapes differ: {0}")]
    SeriesMismatch(String),
    #[error("series is not a unit of 1+X (constant term {0})")]
    NotUnit(String),
    #[error("term cap of {cap} monomials exceeded")]
    TermCapExceeded { cap: usize },
    #[error("enumeration cap of {cap} elements exceeded (reached {reached})")]
    EnumerationCapExceeded { cap: usize, reached: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("word {word} is not in the kernel of the quotient map")]
    NotInKernel { word: String },
    #[error(
        "verbal level {depth} is not materialized: |F/gamma_{parent}| = {parent_order} exceeds the coset cap {cap}"
    )]
    LevelNotMaterialized {
        depth: usize,
        parent: usize,
        parent_order: String,
        cap: usize,
    },
    #[error("|F/gamma_{depth}| is too large to represent, even in factored form")]
    OrderUnrepresentable { depth: usize },
    #[error("depth cap {cap} reached without success")]
    DepthCapReached { cap: usize },
    #[error("q = {q} is below the bound M = {bound}")]
    BelowBound { q: String, bound: String },
    #[error("internal consistency check failed: {0}")]
    InternalCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
