//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and selected
//! by a stream index, so trial `i` draws the same numbers whichever thread
//! runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ChaCha8 keyed by `(master_seed, stream)`.
#[derive(Clone, Debug)]
pub struct StreamRng(ChaCha8Rng);

impl StreamRng {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        Self(rng)
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}
