//! Seeded Rayleigh channel realizations.
//!
//! Every trial owns an independent ChaCha12 stream whose 256-bit key is the
//! little-endian concatenation of the master seed, the grid index, the
//! trial index and a fixed domain tag. The mapping from
//! `(master_seed, grid_index, trial_index)` to key is injective, so streams
//! never collide and do not depend on execution order or worker count.
//!
//! Entries are circularly-symmetric complex Gaussians with unit variance:
//! real then imaginary part, each a standard normal scaled by `1/sqrt(2)`,
//! consumed in row-major order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;

const DOMAIN_TAG: [u8; 8] = *b"oia-chan";

/// Random stream used for one trial.
pub type TrialStream = ChaCha12Rng;

/// Identifies the random stream of a single Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeed {
    pub master_seed: u64,
    /// Position of the cell in the sweep.
    pub grid_index: u64,
    pub trial_index: u64,
}

impl TrialSeed {
    pub fn new(master_seed: u64, grid_index: u64, trial_index: u64) -> Self {
        Self {
            master_seed,
            grid_index,
            trial_index,
        }
    }
}

pub fn derive_stream(seed: TrialSeed) -> TrialStream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&seed.grid_index.to_le_bytes());
    key[16..24].copy_from_slice(&seed.trial_index.to_le_bytes());
    key[24..].copy_from_slice(&DOMAIN_TAG);
    ChaCha12Rng::from_seed(key)
}

/// One circularly-symmetric complex Gaussian sample, `E|h|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws an `nr x nt` i.i.d. unit-variance Rayleigh channel.
pub fn draw_channel<R: Rng + ?Sized>(nr: usize, nt: usize, rng: &mut R) -> ComplexMatrix {
    assert!(nr >= 1 && nt >= 1, "channel dimensions must be positive");
    let entries: Vec<Complex64> = (0..nr * nt).map(|_| complex_gaussian(rng)).collect();
    DMatrix::from_row_slice(nr, nt, &entries)
}

/// The four channel matrices of the two-link interference channel.
///
/// `hij` is the channel from transmitter `j` to receiver `i`; link 1 is
/// the primary and link 2 the opportunistic secondary.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h11: ComplexMatrix,
    pub h12: ComplexMatrix,
    pub h21: ComplexMatrix,
    pub h22: ComplexMatrix,
}

impl ChannelSet {
    /// `(nr, nt)` shared by all four matrices.
    pub fn shape(&self) -> (usize, usize) {
        self.h11.shape()
    }
}

/// Draws `h11, h12, h21, h22` in that order from one stream.
pub fn draw_channel_set<R: Rng + ?Sized>(nr: usize, nt: usize, rng: &mut R) -> ChannelSet {
    let h11 = draw_channel(nr, nt, rng);
    let h12 = draw_channel(nr, nt, rng);
    let h21 = draw_channel(nr, nt, rng);
    let h22 = draw_channel(nr, nt, rng);
    ChannelSet { h11, h12, h21, h22 }
}
