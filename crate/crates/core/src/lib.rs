//! Opportunistic interference alignment on a two-link MIMO interference channel.
//!
//! A licensed primary link water-fills its power over the singular modes of
//! its own channel and, at low SNR, leaves some of them unused. An
//! opportunistic secondary link precodes so that its signal reaches the
//! primary receiver only along those unused modes, whitens the primary's
//! interference at its own receiver, and allocates power either uniformly
//! or by water-filling over an equivalent channel.
//!
//! Modules, bottom-up:
//!
//! - [`linalg`]: complex SVD, Hermitian inverse square root, pseudo-inverse, log-det.
//! - [`channel`]: seeded i.i.d. Rayleigh channel sets.
//! - [`waterfill`]: exact active-set water-filling.
//! - [`primary`]: primary link design and rate.
//! - [`secondary`]: aligned precoder, whitening, uniform and optimal allocation.
//! - [`experiment`] and [`report`]: Monte Carlo sweeps and CSV output.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod primary;
pub mod report;
pub mod secondary;
pub mod waterfill;

#[cfg(test)]
pub(crate) mod testutil;

pub use channel::{derive_stream, draw_channel, draw_channel_set, ChannelSet, TrialSeed};
pub use error::{OiaError, Result};
pub use experiment::{
    analyze_channels, power_budget, run_grid, run_grids, run_trial, snr_range, square_sweep, Cell,
    ExperimentGrid, ResultRow, TrialAnalysis, TrialOutcome, TrialRecord,
};
pub use linalg::{hermitian_inv_sqrt, log2_det_id_plus, pinv_tall, svd, ComplexMatrix, SvdFactors};
pub use primary::{design_primary, primary_mode_sinrs, primary_rate, PrimaryDesign};
pub use report::{write_csv, write_csv_to, CSV_HEADER};
pub use secondary::{
    build_precoder, interference_covariance, optimal_secondary, residual_interference,
    uniform_secondary, AllocationScheme, Precoder, SecondaryDesign, Whitening,
};
pub use waterfill::{waterfill, PowerAllocation};

/// Re-exported so downstream crates can build matrices without a direct dependency.
pub use num_complex::Complex64;
