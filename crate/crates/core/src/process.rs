//! Forward simulation of the letter process.

use crate::model::{ContextRef, ModelError, ProbabilizedTree};
use crate::rng::StreamRng;
use crate::tree::TreeError;
use crate::words::{Letter, Word};
use crate::Error;

/// Default number of letters of history kept.
pub const DEFAULT_HISTORY_CAP: usize = 10_000_000;

/// The past of a running chain and its current context.
#[derive(Clone, Debug)]
pub struct VlmcState {
    /// Oldest letter first, so that emitting a letter is a push.
    history: Vec<Letter>,
    truncated: bool,
    cap: usize,
    context: ContextRef,
}

impl VlmcState {
    /// Starts from a non-internal word written newest letter first.
    pub fn new(model: &ProbabilizedTree, init: &[Letter]) -> Result<Self, Error> {
        Self::with_cap(model, init, DEFAULT_HISTORY_CAP)
    }

    pub fn with_cap(model: &ProbabilizedTree, init: &[Letter], cap: usize) -> Result<Self, Error> {
        let context = model.context_of(init)?;
        Ok(Self { history: init.iter().rev().copied().collect(), truncated: false, cap, context })
    }

    pub fn context(&self) -> &ContextRef {
        &self.context
    }

    /// The stored past, newest letter first; `None` once the cap dropped it.
    pub fn history(&self) -> Option<Word> {
        (!self.truncated).then(|| self.history.iter().rev().copied().collect())
    }

    fn push(&mut self, letter: Letter, stable: bool) -> Result<(), Error> {
        if self.truncated {
            return Ok(());
        }
        if self.history.len() >= self.cap {
            if !stable {
                return Err(ModelError::HistoryCapExceeded(self.cap).into());
            }
            self.truncated = true;
            self.history = Vec::new();
            return Ok(());
        }
        self.history.push(letter);
        Ok(())
    }
}

/// Draws one letter from `q_{pref(history)}` and updates the state.
pub fn step(model: &ProbabilizedTree, state: &mut VlmcState, rng: &mut StreamRng) -> Result<Letter, Error> {
    let letter = model.sample(&state.context, rng.uniform());
    advance_with(model, state, letter)?;
    Ok(letter)
}

/// Appends a given letter to the state.
pub fn advance_with(model: &ProbabilizedTree, state: &mut VlmcState, letter: Letter) -> Result<(), Error> {
    let stable = model.tree().stable();
    state.push(letter, stable)?;
    state.context = if stable {
        model.advance(&state.context, letter)
    } else {
        model
            .context_of_stream(state.history.iter().rev().copied())
            .map_err(|()| TreeError::NoContextPrefix(model.tree().render(&state.history().unwrap())))?
    };
    Ok(())
}

/// `X_1 ⋯ X_n` in emission order and the contexts `C_0, …, C_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LetterTrace {
    pub init: Word,
    pub letters: Vec<Letter>,
    pub contexts: Vec<ContextRef>,
}

/// Runs the chain `n` steps from `init` on stream 0 of `seed`.
pub fn simulate_letters(model: &ProbabilizedTree, init: &[Letter], n: usize, seed: u64) -> Result<LetterTrace, Error> {
    simulate_letters_on(model, init, n, &mut StreamRng::new(seed, 0))
}

pub fn simulate_letters_on(
    model: &ProbabilizedTree,
    init: &[Letter],
    n: usize,
    rng: &mut StreamRng,
) -> Result<LetterTrace, Error> {
    let mut state = VlmcState::new(model, init)?;
    let mut letters = Vec::with_capacity(n);
    let mut contexts = Vec::with_capacity(n + 1);
    contexts.push(*state.context());
    for _ in 0..n {
        letters.push(step(model, &mut state, rng)?);
        contexts.push(*state.context());
    }
    Ok(LetterTrace { init: Word::from(init), letters, contexts })
}
