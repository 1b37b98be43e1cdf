//! Seed derivation.
//!
//! Every random decision in the crate draws from a [`ChaCha8Rng`] obtained
//! through [`substream`], which hashes a root seed together with a stream
//! name and an index. Streams are therefore independent of call order and
//! stable across runs and platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// 64-bit seed for the substream `(root, name, index)`.
pub fn substream_seed(root: u64, name: &str, index: u64) -> u64 {
    let mut s = splitmix64(root ^ fnv1a(name));
    s = splitmix64(s ^ index);
    splitmix64(s)
}

/// Independent generator for the substream `(root, name, index)`.
pub fn substream(root: u64, name: &str, index: u64) -> ChaCha8Rng {
    let s = substream_seed(root, name, index);
    let mut key = [0u8; 32];
    let mut z = s;
    for chunk in key.chunks_exact_mut(8) {
        z = splitmix64(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_stable() {
        let mut a = substream(7, "spawn", 3);
        let mut b = substream(7, "spawn", 3);
        let xa: [f64; 4] = a.gen();
        let xb: [f64; 4] = b.gen();
        assert_eq!(xa, xb);
    }

    #[test]
    fn substreams_differ_by_name_and_index() {
        let mut base = substream(7, "spawn", 3);
        let mut other_name = substream(7, "render", 3);
        let mut other_index = substream(7, "spawn", 4);
        let x: u64 = base.gen();
        assert_ne!(x, other_name.gen::<u64>());
        assert_ne!(x, other_index.gen::<u64>());
    }

    #[test]
    fn seeds_are_pinned() {
        // Frozen values guard against accidental changes to the derivation.
        assert_eq!(substream_seed(0, "", 0), 6751399182439078226);
        assert_eq!(substream_seed(42, "env", 1), 13807932684560878955);
    }
}
