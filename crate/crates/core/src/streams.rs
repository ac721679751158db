//! Keyed random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream whose key is
//! derived from the master seed plus a path of integers (domain tag,
//! replication index, row index, ...). Streams never share state, so the
//! values drawn for replication `r` do not depend on which worker ran it or in
//! which order replications were scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Domain tags separating independent uses of one master seed.
pub mod domain {
    pub const OBSERVED_KMEANS: u64 = 0x6f62_7365_7276_6564;
    pub const NULL_GAUSSIAN: u64 = 0x6e75_6c6c_6761_7573;
    pub const NULL_KMEANS: u64 = 0x6e75_6c6c_6b6d_6e73;
    pub const SCENARIO_GAUSSIAN: u64 = 0x7363_656e_6761_7573;
    pub const SCENARIO_COMPONENT: u64 = 0x7363_656e_636f_696e;
    pub const SCENARIO_TEST: u64 = 0x7363_656e_7465_7374;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a master seed and a key path into one 64-bit value.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xd1b5_4a32_d192_ed03) ^ acc;
        acc = splitmix64(&mut state);
    }
    acc
}

/// A generator for the stream at `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = derive_seed(master, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Fill `out` with standard normal draws from the stream at `path`.
pub fn fill_standard_normal(master: u64, path: &[u64], out: &mut [f64]) {
    let mut rng = stream(master, path);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}
