//! Certification of large candidate sets for square polynomial systems
//! under a memory budget.
//!
//! Candidates arrive through a replayable [`stream::SolutionStream`]. A
//! [`bsp::BspTree`] on Re(x₁) splits them into slabs of at most `k` points,
//! and each slab is certified on its own with the Krawczyk test or α-theory.

pub mod bsp;
pub mod engines;
pub mod family;
pub mod interval;
pub mod pipeline;
pub mod plan;
pub mod poly;
pub mod stream;

use thiserror::Error;

pub use bsp::{build_tree, BspTree, BuildConfig, LeafId, SplitStrategy};
pub use engines::{Certificate, Engine, Realness};
pub use pipeline::{certify_leafwise, certify_main, certify_naive, Report, Tally};
pub use poly::{parse_system, PolynomialSystem};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Poly(#[from] poly::PolyError),
    #[error(transparent)]
    Interval(#[from] interval::IntervalError),
    #[error(transparent)]
    Engine(#[from] engines::EngineError),
    #[error(transparent)]
    Stream(#[from] stream::StreamError),
    #[error(transparent)]
    Bsp(#[from] bsp::BspError),
    #[error(transparent)]
    Family(#[from] family::FamilyError),
    #[error("stream has dimension {stream} but the system has {system} variables")]
    DimensionMismatch { system: usize, stream: usize },
    #[error("{0}")]
    Invalid(String),
}
