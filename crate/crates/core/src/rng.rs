//! Deterministic random streams.
//!
//! Every stochastic decision draws from a stream keyed by
//! `(seed, replica, node, purpose)`, so adding a draw for one purpose never
//! shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Medium = 1,
    Jam = 2,
    Rntx = 3,
    Backoff = 4,
    Traffic = 5,
    Layout = 6,
}

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, replica: u64, node: u64, purpose: Purpose) -> [u8; 32] {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ replica);
    h = splitmix64(h ^ node);
    h = splitmix64(h ^ purpose as u64);
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    out
}

pub fn stream(seed: u64, replica: u64, node: u64, purpose: Purpose) -> StreamRng {
    StreamRng::from_seed(stream_seed(seed, replica, node, purpose))
}

/// All per-node streams of one replica.
#[derive(Debug, Clone)]
pub struct SimRng {
    pub medium: Vec<StreamRng>,
    pub jam: Vec<StreamRng>,
    pub rntx: Vec<StreamRng>,
    pub backoff: Vec<StreamRng>,
    pub traffic: Vec<StreamRng>,
}

impl SimRng {
    pub fn new(seed: u64, replica: u64, nodes: usize) -> Self {
        let make = |p| {
            (0..nodes as u64)
                .map(|n| stream(seed, replica, n, p))
                .collect::<Vec<_>>()
        };
        Self {
            medium: make(Purpose::Medium),
            jam: make(Purpose::Jam),
            rntx: make(Purpose::Rntx),
            backoff: make(Purpose::Backoff),
            traffic: make(Purpose::Traffic),
        }
    }
}
