//! Deterministic, splittable random streams.
//!
//! Every draw in the crate comes from a counter-based generator: the k-th
//! raw output of a stream is `mix(seed + k·GOLDEN)` where `mix` is the
//! 64-bit finalizer from SplitMix64. Because outputs depend only on
//! `(seed, k)`, per-(replicate, particle) streams can be derived up front
//! and consumed in any scheduling order without ever sharing state —
//! that is what makes multi-threaded campaigns bit-reproducible.
//!
//! Gaussians use the polar (Marsaglia) rejection method. Rejection counts
//! and `ln`/`sqrt` results are deterministic on a given build, which is the
//! reproducibility contract; identical output across different math
//! libraries is explicitly not promised.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const UNIT_SCALE: f64 = 1.0 / ((1u64 << 53) as f64);

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed for one (replicate, particle) pair.
///
/// Two mixing rounds separate the indices; the `+1`/`+3` offsets keep the
/// all-zero call away from the raw master seed. Collisions between distinct
/// pairs are possible only at the 2⁻⁶⁴ birthday level of the mix itself.
pub fn derive_stream_seed(master: u64, replicate: u64, particle: u64) -> u64 {
    let r = mix(master.wrapping_add(GOLDEN.wrapping_mul(replicate.wrapping_add(1))));
    mix(r ^ GOLDEN.wrapping_mul(particle.wrapping_add(3)))
}

/// A deterministic stream of uniform and Gaussian variates.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    state: u64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream { state: seed, spare: None }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1) with the full 53 bits of double precision.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * UNIT_SCALE
    }

    /// Standard normal variate (polar method, spare cached).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.next_unit() - 1.0;
            let v = 2.0 * self.next_unit() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for slot in out {
            *slot = self.next_gaussian();
        }
    }
}
