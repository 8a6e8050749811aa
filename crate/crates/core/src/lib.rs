//! Structural sign herdability of signed directed networks.
//!
//! The pipeline: parse a [`graph::StructuredSystem`], unroll it into the signed
//! layered graph ([`layered`]), abstract its controllability matrix over the
//! sign semiring ([`sign`]), search for a spanning certificate ([`lugh`]) and
//! check the verdict numerically ([`numeric`]).

pub mod graph;
pub mod layered;
pub mod lugh;
pub mod numeric;
pub mod sign;

pub use graph::{parse_system, InputAttachment, InputMode, Sign, SignedEdge, StructuredSystem};
pub use lugh::{decide, find_lugh, find_lugh_multi_driver, LughCertificate, SearchOptions, Verdict};
