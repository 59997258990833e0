//! Shared fixtures for the criterion benchmarks.

use oia_core::{derive_stream, draw_channel_set, power_budget, ChannelSet, TrialSeed};

/// Fixed `n x n` channel set for benchmark seed `seed`.
pub fn fixture_channels(n: usize, seed: u64) -> ChannelSet {
    draw_channel_set(n, n, &mut derive_stream(TrialSeed::new(seed, 0, 0)))
}

/// Budget for `snr_db` at unit noise.
pub fn budget(snr_db: f64) -> f64 {
    power_budget(snr_db, 1.0)
}
