//! Counter-based random streams and the few distributions the crate draws from.

use alloc::vec::Vec;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent stream `stream` of the generator keyed by `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn gaussian(r: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| r.sample::<f64, _>(StandardNormal)))
}

/// Uniform direction on the unit sphere in `R^n`.
pub fn unit_direction(r: &mut impl Rng, n: usize) -> DVector<f64> {
    loop {
        let g = gaussian(r, n);
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// Uniform point in the ball of the given radius.
pub fn in_ball(r: &mut impl Rng, n: usize, radius: f64) -> DVector<f64> {
    let d = unit_direction(r, n);
    let u: f64 = r.gen();
    d * (radius * num_traits::Float::powf(u, 1.0 / n as f64))
}

/// Uniform point in the box `[lo, hi]` (per coordinate).
pub fn in_box(r: &mut impl Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| r.gen_range(*a..=*b)).collect()
}
