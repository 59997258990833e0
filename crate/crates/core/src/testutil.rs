use crate::channel::{derive_stream, draw_channel, TrialSeed};
use crate::linalg::ComplexMatrix;

/// Unit-variance complex Gaussian matrix from a dedicated test stream.
pub(crate) fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
    draw_channel(rows, cols, &mut derive_stream(TrialSeed::new(seed, u64::MAX, 0)))
}
