//! Keyed random substreams.
//!
//! A run owns one master seed. Every sampling call asks for a fresh stream
//! keyed by `(operation, path, invocation counter)`, so the draws a call sees
//! depend only on which call it is, not on how much randomness earlier calls
//! happened to consume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Which subroutine a stream is drawn for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamTag {
    Consensus,
    TdElim,
    PolicyEval,
    Baseline,
    Generator,
    Other(u64),
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::Consensus => 1,
            StreamTag::TdElim => 2,
            StreamTag::PolicyEval => 3,
            StreamTag::Baseline => 4,
            StreamTag::Generator => 5,
            StreamTag::Other(c) => 0x1000 + c,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a 64-bit key.
pub fn mix_key(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut acc = 0x6A09_E667_F3BC_C908u64;
    for w in words {
        acc = splitmix64(acc ^ splitmix64(w));
    }
    acc
}

/// Derives an independent generator from a seed and a key.
pub fn derive(seed: u64, key: &[u64]) -> StreamRng {
    let k = mix_key(std::iter::once(seed).chain(key.iter().copied()));
    ChaCha8Rng::seed_from_u64(k)
}

/// Source of keyed substreams for one run.
#[derive(Debug, Clone)]
pub struct RngStreams {
    master: u64,
    counter: u64,
}

impl RngStreams {
    pub fn new(master: u64) -> Self {
        Self { master, counter: 0 }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Number of streams handed out so far.
    pub fn invocations(&self) -> u64 {
        self.counter
    }

    pub fn stream(&mut self, tag: StreamTag, path: &[usize]) -> StreamRng {
        self.counter += 1;
        let key = mix_key(
            [self.master, tag.code(), path.len() as u64, self.counter]
                .into_iter()
                .chain(path.iter().map(|&a| a as u64)),
        );
        ChaCha8Rng::seed_from_u64(key)
    }
}
