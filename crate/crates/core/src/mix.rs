//! Seed derivation for replications and probe continuations.

/// SplitMix64 finalizer. Used to turn structured inputs (cell coordinates,
/// replication and continuation indices) into well-spread seed material.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for the i-th independent continuation of a run seeded with
/// `seed`.
pub(crate) fn stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}
