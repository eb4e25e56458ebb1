use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// A reproducible random stream: one ChaCha8 generator per `(seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Same seed, different stream.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self { seed: self.seed, stream_id }
    }
}
