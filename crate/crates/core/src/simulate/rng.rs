use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which per-path substream a draw comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Gaussian increments.
    Gaussian,
    /// Jump clocks and jump sizes.
    Jumps,
    /// Batches of independent samples (subordinators, bootstrap).
    Batch,
}

/// The generator for `(seed, stream, index)`.
///
/// Every path or batch owns its own ChaCha stream, so results do not depend on
/// the number of worker threads or the order in which paths run.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let tag = match stream {
        Stream::Gaussian => 0u64,
        Stream::Jumps => 1,
        Stream::Batch => 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index << 2) | tag);
    rng
}
