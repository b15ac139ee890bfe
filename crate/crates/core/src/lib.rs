//! Variable length Markov chains on context trees and the persistent random
//! walks they drive.
//!
//! Words are written newest letter first throughout.

pub mod cascades;
pub mod model;
pub mod process;
pub mod prw1d;
pub mod prw2d;
pub mod rng;
pub mod semi_markov;
pub mod stationary;
pub mod tail;
pub mod tree;
pub mod words;

pub use model::{ContextRef, ModelError, NonNullReport, ProbabilizedTree};
pub use process::{simulate_letters, step, LetterTrace, VlmcState};
pub use rng::StreamRng;
pub use tail::{Fallback, TailClass, TailKind, TailRule};
pub use tree::{AlphaLis, ContextTree, NodeKind, StabilityReport, TreeError};
pub use words::{Alphabet, Letter, Word, WordError};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tail(#[from] tail::TailError),
}
