//! Counter-based random streams.
//!
//! Every path draws from its own ChaCha8 stream. The key is derived from the
//! master seed and a [`Lane`] tag; the 64-bit ChaCha stream id packs the
//! replication index (high 32 bits) and the path index (low 32 bits). Draws
//! within a path are consumed sequentially, sub-step by sub-step, so a path is
//! a pure function of its [`StreamId`] no matter which thread generates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent families of streams. Streams in different lanes never overlap
/// even when the master seed is the same.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    /// Observed (data-generating) paths.
    Observed,
    /// Paths simulated inside the simulation-based IIE.
    Simulation,
    /// Long paths used by the Monte Carlo binding backend.
    Binding,
}

impl Lane {
    fn tag(self) -> u64 {
        match self {
            Lane::Observed => 0x6f62_7365_7276_6564,
            Lane::Simulation => 0x7369_6d75_6c61_7465,
            Lane::Binding => 0x6269_6e64_696e_6721,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub master: u64,
    pub lane: Lane,
    pub replication: u32,
    pub path: u32,
}

impl StreamId {
    pub fn new(master: u64, lane: Lane, replication: u32, path: u32) -> Self {
        Self {
            master,
            lane,
            replication,
            path,
        }
    }

    pub fn observed(master: u64, replication: u32) -> Self {
        Self::new(master, Lane::Observed, replication, 0)
    }

    pub fn with_path(self, path: u32) -> Self {
        Self { path, ..self }
    }

    pub fn with_replication(self, replication: u32) -> Self {
        Self {
            replication,
            ..self
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master ^ self.lane.tag();
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((self.replication as u64) << 32) | self.path as u64);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
