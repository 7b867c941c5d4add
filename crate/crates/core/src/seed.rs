//! Per-stream seed derivation from one master seed.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed from `master` and a path of stream labels.
/// Parallel and serial callers that use the same labels get the same seed.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(master), |acc, &l| mix(acc ^ mix(l)))
}
