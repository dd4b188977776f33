//! Deterministic seed splitting.
//!
//! Every random stream in a run is derived from one master seed:
//! `derive(master, label, index) = splitmix64(splitmix64(master ^ fnv1a(label)) ^ index)`.
//! Streams used by the simulator:
//!
//! | label    | index      | consumer                                 |
//! |----------|------------|------------------------------------------|
//! | `"ipp"`  | 0          | tree placement (candidate draw + thinning) |
//! | `"tree"` | tree index | per-tree randomization                   |
//! | `"yaw"`  | tree index | per-tree yaw in the scene                |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(label)) ^ index)
}
