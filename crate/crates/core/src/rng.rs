use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Seeded generator; `stream` separates independent consumers of one user seed.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod streams {
    pub const BASE_GRAPH: u64 = 1;
    pub const MOTIFS: u64 = 2;
    pub const RANDOM_EDGES: u64 = 3;
    pub const FEATURES: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const WEIGHTS: u64 = 6;
    pub const KMEANS: u64 = 7;
    pub const BRIDGES: u64 = 8;
}
