use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator used by all simulation code.
pub type SimRng = ChaCha12Rng;

/// Stand-alone generator for a single seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Stream `rep` of the generator keyed by `master_seed`.
///
/// ChaCha is counter based, so every replication owns a disjoint stream that
/// depends only on `(master_seed, rep)`, never on scheduling order.
pub fn replication_rng(master_seed: u64, rep: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master_seed);
    rng.set_stream(rep);
    rng
}
