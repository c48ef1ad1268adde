//! Largeness certificates for quotients of free groups by powers, the
//! Magnus embedding over truncated power series, Reidemeister–Schreier
//! rewriting, and the verbal series used to build periodic groups.

pub mod arith;
pub mod config;
pub mod error;
pub mod finquot;
pub mod group;
pub mod largeness;
pub mod magnus;
pub mod periodic;
pub mod snf;
pub mod verbal;
pub mod word;

pub use config::Caps;
pub use error::{Error, Result};
pub use finquot::{ConjugateSet, FiniteQuotient, SubgroupPresentation};
pub use largeness::{LargenessCertificate, Verdict};
pub use group::{ConcreteImage, QuotientSpec};
pub use magnus::{Domain, TruncSeries};
pub use verbal::{FactoredOrder, PrimeSeq, VerbalSeries};
pub use word::{Letter, Word};
