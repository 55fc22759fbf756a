//! Addressable iid U(0,1) innovations.
//!
//! Every value is a pure function of `(seed, time index, lane, component)`.
//! The ChaCha block function is used as the counter-based generator: the
//! lane and component select the 64-bit stream id and the time index selects
//! the word position, so any innovation can be read without generating the
//! ones before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which copy of the innovation sequence to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    /// The sequence driving the observed process.
    Main,
    /// The independent copy used for single-coordinate replacement.
    Tilde,
    /// Independent copy number `l` used by the block-decoupled surrogate.
    Block(u32),
}

impl Lane {
    fn code(self) -> u64 {
        match self {
            Lane::Main => 0,
            Lane::Tilde => 1,
            Lane::Block(l) => 2 + u64::from(l),
        }
    }
}

// Time indices are shifted so negative indices map to valid word positions.
const INDEX_OFFSET: i128 = 1 << 62;

#[inline]
fn word_pos(t: i64) -> u128 {
    // two 32-bit words per u64 draw
    ((i128::from(t) + INDEX_OFFSET) as u128) * 2
}

#[inline]
fn stream_id(lane: Lane, component: u32) -> u64 {
    (lane.code() << 20) | u64::from(component)
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn bits_to_open01(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for replicate `index` of a computation seeded by `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Independent generator for replicate `index`, used for Gaussian draws in
/// Monte-Carlo loops.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

/// Seeded doubly-infinite iid U(0,1) sequence with independent lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnovationStream {
    seed: u64,
}

impl InnovationStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream for replicate `index`.
    pub fn replicate(&self, index: u64) -> Self {
        Self::new(derive_seed(self.seed, index))
    }

    fn reader(&self, lane: Lane, component: u32, t: i64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id(lane, component));
        rng.set_word_pos(word_pos(t));
        rng
    }

    /// Component `component` of the innovation at time `t` on `lane`.
    pub fn uniform(&self, t: i64, lane: Lane, component: u32) -> f64 {
        bits_to_open01(self.reader(lane, component, t).next_u64())
    }

    /// Fills `out` with the `width`-component innovations at times
    /// `start, start + 1, ...`, row-major by time.
    pub fn fill(&self, lane: Lane, start: i64, width: usize, out: &mut [f64]) {
        assert!(width > 0 && out.len().is_multiple_of(width));
        for comp in 0..width {
            let mut rng = self.reader(lane, comp as u32, start);
            for slot in out.iter_mut().skip(comp).step_by(width) {
                *slot = bits_to_open01(rng.next_u64());
            }
        }
    }

    pub fn block(&self, lane: Lane, start: i64, count: usize, width: usize) -> Vec<f64> {
        let mut out = vec![0.0; count * width];
        self.fill(lane, start, width, &mut out);
        out
    }
}
