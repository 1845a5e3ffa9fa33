//! Keyed random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit key is derived from a
//! master seed and a path of integers (a lane tag, a replica index, site
//! coordinates, ...). Streams never depend on the order in which they are
//! requested, so lazily materialized environments and parallel replicas
//! replay bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lattice::{Site, MAX_DIM};

pub type Stream = ChaCha8Rng;

/// Lane tags keep streams derived from the same seed disjoint.
pub mod lane {
    pub const SITE: u64 = 0x5349_5445;
    pub const MOVES: u64 = 0x4d4f_5645;
    pub const CLOCKS: u64 = 0x434c_4f43;
    pub const GAMMA_MC: u64 = 0x474d_4d43;
    pub const REPLICA: u64 = 0x5245_504c;
    pub const ENVIRONMENT: u64 = 0x454e_5649;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const SAMPLES: u64 = 0x534d_504c;
}

#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `seed`, one splitmix round per element.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xd6e8_feb8_6659_fd93) ^ acc;
        acc = splitmix64(&mut state);
    }
    acc
}

pub fn stream(seed: u64, path: &[u64]) -> Stream {
    let mut state = derive_seed(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn site_path(tag: u64, x: &Site) -> [u64; MAX_DIM + 1] {
    let mut path = [0u64; MAX_DIM + 1];
    path[0] = tag;
    for axis in 0..MAX_DIM {
        path[axis + 1] = x.coord(axis) as i64 as u64;
    }
    path
}

/// Stream owned by one lattice site of an environment with `master` seed.
pub fn site_stream(master: u64, x: &Site) -> Stream {
    stream(master, &site_path(lane::SITE, x))
}

/// Stream for Monte Carlo work attached to a site (e.g. γ estimation).
pub fn site_lane_stream(seed: u64, lane_tag: u64, x: &Site) -> Stream {
    stream(seed, &site_path(lane_tag, x))
}

/// Seed for the `index`-th replica of an experiment.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, &[lane::REPLICA, index])
}
