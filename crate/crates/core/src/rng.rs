//! Portable seeded randomness.
//!
//! Every random choice in the toolkit flows through [`SplitMix64`] so that
//! fixtures built on one machine reproduce bit-for-bit on another. The
//! algorithms are deliberately simple and fully documented:
//!
//! * generator: SplitMix64 (Steele, Lea & Flood), state advanced by the
//!   golden-gamma constant `0x9E3779B97F4A7C15`;
//! * bounded integers: multiply-high reduction `(x * bound) >> 64` on the
//!   128-bit product;
//! * sampling without replacement: Fisher–Yates prefix, i.e. for
//!   `i in 0..n` swap slot `i` with `i + below(len - i)` and keep the first
//!   `n` slots;
//! * sub-seeds: `SplitMix64::new(seed ^ fnv1a64(label)).next_u64()`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    pub fn below_usize(&mut self, bound: usize) -> usize {
        self.below(bound as u64) as usize
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// In-place full Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let len = items.len();
        for i in 0..len.saturating_sub(1) {
            let j = i + self.below_usize(len - i);
            items.swap(i, j);
        }
    }

    /// Indices of `n` distinct positions out of `0..len`, in draw order.
    pub fn sample_indices(&mut self, len: usize, n: usize) -> Vec<usize> {
        assert!(n <= len, "cannot sample {n} of {len}");
        let mut idx: Vec<usize> = (0..len).collect();
        for i in 0..n {
            let j = i + self.below_usize(len - i);
            idx.swap(i, j);
        }
        idx.truncate(n);
        idx
    }
}

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive an independent seed for a named sub-stream.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    SplitMix64::new(seed ^ fnv1a64(label.as_bytes())).next_u64()
}
