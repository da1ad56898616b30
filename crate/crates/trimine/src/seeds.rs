//! Deterministic seed derivation.
//!
//! Every source of randomness in a run (parameter init, epoch shuffles,
//! per-batch triplet draws, selection sampling, splits) gets its own stream
//! derived from the run seed and a purpose tag, so adding or removing one
//! consumer never shifts the draws of another.

pub const TAG_INIT: u64 = 1;
pub const TAG_SHUFFLE: u64 = 2;
pub const TAG_MINE_CLASS: u64 = 3;
pub const TAG_MINE_BOX: u64 = 4;
pub const TAG_SELECTION: u64 = 5;
pub const TAG_SPLIT: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a sequence of tags.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(base ^ 0xA076_1D64_78BD_642F);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    state
}
