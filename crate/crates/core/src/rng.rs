//! Portable random streams.
//!
//! Every stream is a PCG-XSL-RR 128/64 generator (`Pcg64`). The 128-bit state
//! is built from two SplitMix64 outputs of the user seed and the stream
//! selector picks an independent LCG increment, so each image index (or epoch)
//! gets its own sequence. Uniforms and normals are derived from raw `u64`
//! draws with fixed formulas so the values are reproducible in any language:
//!
//! * uniform in [0,1): `(x >> 11) * 2^-53`
//! * standard normal: Box–Muller, `sqrt(-2 ln(1-u1)) * cos(2π u2)`, one draw per pair
//! * integer in [0,n): `(x * n) >> 64` on 128-bit integers

use rand_core::Rng;
use rand_pcg::Pcg64;

/// Stream selectors that never collide with per-index streams.
pub(crate) const STREAM_DIRECTION: u64 = u64::MAX;
pub(crate) const STREAM_SPLIT: u64 = u64::MAX - 1;
pub(crate) const STREAM_PARAMS: u64 = u64::MAX - 2;
pub(crate) const STREAM_EPOCH_BASE: u64 = 1 << 62;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Stream(Pcg64);

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let hi = splitmix64(seed);
        let lo = splitmix64(hi);
        let state = ((hi as u128) << 64) | lo as u128;
        Stream(Pcg64::new(state, stream as u128))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher–Yates.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
