use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for trial `index` of a run seeded with `master`.
pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Sub-stream for a named purpose inside a trial (matrix, noise, coset, ...).
pub fn sub_rng(master: u64, index: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ purpose.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(index);
    rng
}
