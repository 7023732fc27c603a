//! Counter-based seed derivation: every consumer gets its own stream keyed by
//! `(master seed, purpose, ids…)`, independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    GlobalInit = 1,
    Partition = 2,
    ClientSampling = 3,
    Selection = 4,
    AdversaryInit = 5,
    AdversaryNoise = 6,
    Reconstruction = 7,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, purpose: Purpose, ids: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(purpose as u64));
    for &id in ids {
        h = splitmix64(h ^ splitmix64(id.wrapping_add(0x5151)));
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, ids: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, purpose, ids))
}
