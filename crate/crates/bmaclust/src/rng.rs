//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a stream addressed by
//! `(seed, replicate, role)`. A stream is a keyed counter generator — output
//! `i` is a pure function of `(key, i)` — so replicate streams can be handed
//! to parallel workers without any shared state and a run is reproducible
//! bit for bit from its seed triple alone.
//!
//! The block function is the SplitMix64 construction: a Weyl sequence on the
//! counter pushed through a 64-bit avalanche mix. Distinct streams use keys
//! derived by re-mixing the seed triple.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// 64-bit finalizer with full avalanche (Stafford's mix13 variant).
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a stream is used for. Keeps independent draws (sampling vs. metric
/// integration vs. initialization) on non-overlapping streams even when they
/// share `(seed, replicate)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    /// Drawing observations from a mixture.
    Sample,
    /// Importance draws for integrated-squared-error estimation.
    MiseSampling,
    /// Truth draws for Kullback-Leibler estimation.
    KlSampling,
    /// Randomized initialization (k-means++ seeding).
    Init,
}

impl StreamRole {
    fn code(self) -> u64 {
        match self {
            StreamRole::Sample => 1,
            StreamRole::MiseSampling => 2,
            StreamRole::KlSampling => 3,
            StreamRole::Init => 4,
        }
    }
}

/// Address of one random stream.
#[derive(Debug, Clone, Copy)]
pub struct StreamKey {
    pub seed: u64,
    pub replicate: u64,
    pub role: StreamRole,
}

impl StreamKey {
    pub fn new(seed: u64, replicate: u64, role: StreamRole) -> Self {
        StreamKey { seed, replicate, role }
    }

    fn key(&self) -> u64 {
        let a = mix(self.seed ^ 0x5851_F42D_4C95_7F2D);
        let b = mix(a ^ self.replicate.wrapping_mul(GOLDEN));
        mix(b ^ self.role.code().wrapping_mul(0xD129_0291_3220_2FE5))
    }

    /// The derived 64-bit key addressing this stream (recorded in run
    /// manifests).
    pub fn stream_id(&self) -> u64 {
        self.key()
    }

    /// The stream as a generator, positioned at its first output.
    pub fn rng(&self) -> CounterRng {
        CounterRng { key: self.key(), counter: 0 }
    }

    /// A sub-stream for batch `i`: disjoint from every other batch of the
    /// same key, so batches can run in any order or in parallel.
    pub fn batch(&self, i: u64) -> CounterRng {
        CounterRng {
            key: mix(self.key() ^ (i.wrapping_add(1)).wrapping_mul(GOLDEN)),
            counter: 0,
        }
    }
}

/// Keyed counter generator: output `n` = mix(key + (n+1)·golden).
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand::rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
