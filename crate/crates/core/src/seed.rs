//! Stable seed derivation.
//!
//! A derived seed is FNV-1a (64-bit) over the UTF-8 bytes of the key parts
//! joined with `|`, passed through the SplitMix64 finalizer. The result only
//! depends on the parts, never on process state or platform.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived from a list of key parts.
pub fn derive_seed(parts: &[&str]) -> u64 {
    splitmix64(fnv1a(parts.join("|").as_bytes()))
}
