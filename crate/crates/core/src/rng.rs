//! Deterministic random-number plumbing.
//!
//! Every stochastic routine in this crate draws from a ChaCha stream selected
//! by `(master seed, lane, index)`. A lane identifies a role (a stratum, a
//! sample cloud, one side of a comparison); the index enumerates fixed-size
//! work chunks within the lane. Chunk results are merged in index order, so
//! estimates are bit-identical for a given `(seed, lane layout, chunk size)`
//! regardless of how many worker threads execute the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Fixed stream roles. Lanes must stay below `1 << 24`.
pub(crate) mod lane {
    /// Uniform remainder stratum of a mass estimate.
    pub const MASS_UNIFORM: u64 = 0;
    /// Flattening strata (caps and slabs): lane = base + stratum index.
    pub const MASS_STRATUM_BASE: u64 = 1;
    /// Shared unit-ball cloud for two-observer ratio estimates.
    pub const PAIR_CLOUD: u64 = 256;
    /// Sampled membership checks for the overlap inclusions.
    pub const INCLUSION_BASE: u64 = 260;
}

const LANE_BITS: u32 = 24;
const INDEX_BITS: u32 = 40;

/// Derives a 64-bit value from `state` by the SplitMix64 finalizer.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    *state ^= (z ^ (z >> 31)).rotate_left(17);
}

/// Derives an unrelated master seed from `(master, salt)`; used when two
/// estimates inside one experiment must draw independent streams.
pub(crate) fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut s = master ^ salt.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    splitmix64(&mut s);
    let mut z = s;
    splitmix64(&mut z);
    z
}

/// A keyed family of ChaCha streams, split by `(lane, index)` counters.
#[derive(Debug, Clone)]
pub struct SeedStream {
    key: [u8; 32],
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        let mut state = master;
        let mut key = [0u8; 32];
        for word in 0..4 {
            splitmix64(&mut state);
            key[word * 8..(word + 1) * 8].copy_from_slice(&state.to_le_bytes());
        }
        SeedStream { key }
    }

    /// The RNG for work chunk `index` of stream role `lane`.
    pub fn stream_rng(&self, lane: u64, index: u64) -> ChaCha8Rng {
        assert!(lane < (1 << LANE_BITS), "lane {lane} out of range");
        assert!(index < (1 << INDEX_BITS), "chunk index {index} out of range");
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream((lane << INDEX_BITS) | index);
        rng
    }
}

/// A uniform point on the unit sphere S^{n-1} (normalized Gaussian vector).
pub(crate) fn sample_unit_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A uniform point in the closed unit ball of R^n.
pub(crate) fn sample_unit_ball(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = sample_unit_direction(dim, rng);
    let r = rng.gen::<f64>().powf(1.0 / dim as f64);
    for x in &mut v {
        *x *= r;
    }
    v
}

/// A radius in `[inner, outer]` with density proportional to `t^{shape - 1}`,
/// by inverse CDF; `shape > 0`. `shape = dim` gives the uniform-in-volume
/// radial profile, `shape = dim + e` the flattening profile for a radial
/// power with exponent `e`.
pub(crate) fn sample_power_radius(
    inner: f64,
    outer: f64,
    shape: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    debug_assert!(shape > 0.0);
    let lo = inner.powf(shape);
    let hi = outer.powf(shape);
    let u: f64 = rng.gen();
    (lo + u * (hi - lo)).powf(1.0 / shape)
}
