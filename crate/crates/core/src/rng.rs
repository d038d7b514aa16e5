use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic, splittable random-number stream.
///
/// `(base_seed, stream_index)` fully determines the output sequence, and
/// distinct stream indices yield statistically independent streams (ChaCha
/// counter-mode streams). Replicate `i` of an experiment always draws from
/// stream `i`, so results do not depend on how replicates are scheduled
/// across threads.
#[derive(Debug, Clone)]
pub struct RngStream {
    base_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_index);
        Self {
            base_seed,
            stream_index,
            rng,
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform draw on `[0, 1)` with full 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
