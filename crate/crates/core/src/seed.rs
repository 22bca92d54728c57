//! Named random substreams derived from one master seed.
//!
//! Every stochastic step (sampling, splitting, bootstrap, permutation)
//! draws from its own stream so adding draws in one stage never shifts
//! another, and parallel workers get streams keyed by item index rather
//! than by scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `name`, item `index` under `master`.
pub fn substream_seed(master: u64, name: &str, index: u64) -> u64 {
    let h = splitmix(master ^ fnv1a(name.as_bytes()));
    splitmix(h ^ splitmix(index.wrapping_add(1)))
}

pub fn substream(master: u64, name: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(substream_seed(master, name, index))
}
