//! Seeded random streams. Every trial draws from its own ChaCha stream so
//! results do not depend on how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normals<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `exp(Z)` for i.i.d. standard normals `Z`.
pub fn log_normals<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    normals(rng, len).into_iter().map(f64::exp).collect()
}
