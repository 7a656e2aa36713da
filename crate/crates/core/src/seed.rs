//! Seed derivation for independent deterministic streams.

/// SplitMix64 finalizer over `base` mixed with `stream`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines several stream labels, in order.
pub fn derive_path(base: u64, streams: &[u64]) -> u64 {
    streams.iter().fold(base, |acc, &s| derive_seed(acc, s))
}
