//! Primary link: SVD diagonalization and water-filled power allocation.
//!
//! The primary precodes with `V1` and filters with `U1^H`, where
//! `h11 = U1 diag(lambda) V1^H`, which turns the link into parallel scalar
//! channels of gain `lambda_n^2 / sigma2`. Modes left dry by water-filling
//! are the dimensions the secondary link may occupy; the complementary
//! allocation `max(0, sigma2 / lambda_n^2 - beta)` is supported on exactly
//! those modes.

use crate::error::{OiaError, Result};
use crate::linalg::{self, ComplexMatrix, SvdFactors};
use crate::waterfill::{waterfill, PowerAllocation};

#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryDesign {
    /// SVD of `h11`: `u` is the receive basis `U1`, `v` the precoder `V1`.
    pub svd: SvdFactors,
    /// Per-transmit-mode powers (length `nt`); `water_level` is `beta`.
    pub p1: PowerAllocation,
    /// Complementary allocation, length `nt`, zero beyond `min(nr, nt)`.
    pub p1_bar: Vec<f64>,
    /// Number of allocatable modes left without power.
    pub unused_count: usize,
    pub sigma2: f64,
    pub p_max: f64,
}

impl PrimaryDesign {
    /// Number of modes with a defined singular value, `min(nr, nt)`.
    pub fn mode_count(&self) -> usize {
        self.svd.sigma.len()
    }

    /// Indices of modes carrying primary power.
    pub fn active_modes(&self) -> Vec<usize> {
        (0..self.mode_count()).filter(|&n| self.p1.powers[n] > 0.0).collect()
    }

    /// Precoder `V1`.
    pub fn precoder(&self) -> &ComplexMatrix {
        &self.svd.v
    }

    /// Receive filter `U1^H`.
    pub fn receive_filter(&self) -> ComplexMatrix {
        self.svd.u.adjoint()
    }
}

/// Designs the primary link for channel `h11` under budget `p_max` and noise `sigma2`.
pub fn design_primary(h11: &ComplexMatrix, p_max: f64, sigma2: f64) -> Result<PrimaryDesign> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(OiaError::InvalidInput(format!("p_max must be positive, got {p_max}")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(OiaError::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
    }
    let svd = linalg::svd(h11)?;
    let nt = h11.ncols();

    let mut inverse_gains = vec![f64::INFINITY; nt];
    for (g, &lambda) in inverse_gains.iter_mut().zip(&svd.sigma) {
        if lambda > 0.0 {
            *g = sigma2 / (lambda * lambda);
        }
    }
    if inverse_gains.iter().all(|g| !g.is_finite()) {
        return Err(OiaError::DegenerateChannel);
    }

    let p1 = waterfill(&inverse_gains, p_max)?;
    let beta = p1.water_level;
    let modes = svd.sigma.len();
    let mut p1_bar = vec![0.0; nt];
    for n in 0..modes {
        // Exact zero on active modes: their inverse gain is below beta.
        if p1.powers[n] == 0.0 {
            p1_bar[n] = (inverse_gains[n] - beta).max(0.0);
        }
    }
    let unused_count = p1.powers[..modes].iter().filter(|&&p| p == 0.0).count();

    Ok(PrimaryDesign {
        svd,
        p1,
        p1_bar,
        unused_count,
        sigma2,
        p_max,
    })
}

/// Interference-free primary rate, `sum_n log2(1 + lambda_n^2 p_n / sigma2)` bits/s/Hz.
pub fn primary_rate(design: &PrimaryDesign) -> f64 {
    design
        .svd
        .sigma
        .iter()
        .zip(&design.p1.powers)
        .map(|(&lambda, &p)| (lambda * lambda * p / design.sigma2).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Primary transmit covariance `V1 diag(p1) V1^H`.
pub fn primary_transmit_covariance(design: &PrimaryDesign) -> ComplexMatrix {
    let v = design.precoder();
    v * linalg::real_diag(&design.p1.powers) * v.adjoint()
}

/// Post-filter SINR of each primary-active mode, in [`PrimaryDesign::active_modes`] order.
///
/// The primary receiver applies `U1^H`; mode `n` sees its own signal, the
/// leakage from other primary modes and, when `external` is given, the
/// interference covariance `external` (at the primary receive antennas)
/// projected onto `u_n`, plus noise `sigma2`.
pub fn primary_mode_sinrs(
    design: &PrimaryDesign,
    h11: &ComplexMatrix,
    external: Option<&ComplexMatrix>,
) -> Vec<f64> {
    let u = &design.svd.u;
    let effective = u.adjoint() * h11 * design.precoder();
    let projected = external.map(|k| u.adjoint() * k * u);
    let powers = &design.p1.powers;
    design
        .active_modes()
        .into_iter()
        .map(|n| {
            let signal = effective[(n, n)].norm_sqr() * powers[n];
            let leakage: f64 = (0..powers.len())
                .filter(|&m| m != n)
                .map(|m| effective[(n, m)].norm_sqr() * powers[m])
                .sum();
            let outside = projected.as_ref().map_or(0.0, |p| p[(n, n)].re.max(0.0));
            signal / (design.sigma2 + leakage + outside)
        })
        .collect()
}

/// `max |(U1^H h11 V1)_{ij}|` over off-diagonal entries.
pub fn diagonalization_residual(design: &PrimaryDesign, h11: &ComplexMatrix) -> f64 {
    let d = design.svd.u.adjoint() * h11 * design.precoder();
    let mut worst = 0.0f64;
    for i in 0..d.nrows() {
        for j in (0..d.ncols()).filter(|&j| j != i) {
            worst = worst.max(d[(i, j)].norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{log2_det_id_plus, real_diag};
    use crate::testutil::gaussian_matrix;
    use proptest::prelude::*;

    #[test]
    fn diagonal_channel_low_power() {
        let d = design_primary(&real_diag(&[2.0, 1.0]), 0.5, 1.0).unwrap();
        assert_eq!(d.p1.powers, vec![0.5, 0.0]);
        assert!((d.p1.water_level - 0.75).abs() < 1e-15);
        assert_eq!(d.p1_bar, vec![0.0, 0.25]);
        assert_eq!(d.unused_count, 1);
        assert!((primary_rate(&d) - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_channel_full_power() {
        let d = design_primary(&real_diag(&[2.0, 1.0]), 1.0, 1.0).unwrap();
        assert!((d.p1.powers[0] - 0.875).abs() < 1e-15);
        assert!((d.p1.powers[1] - 0.125).abs() < 1e-15);
        assert_eq!(d.unused_count, 0);
        assert_eq!(d.p1_bar, vec![0.0, 0.0]);
        let expected = 4.5f64.log2() + 1.125f64.log2();
        assert!((primary_rate(&d) - expected).abs() < 1e-12);
        assert!((primary_rate(&d) - 2.339_850_00).abs() < 1e-8);
    }

    #[test]
    fn vanishing_power_uses_only_best_mode() {
        let h = gaussian_matrix(4, 4, 3);
        let d = design_primary(&h, 1e-9, 1.0).unwrap();
        assert_eq!(d.active_modes(), vec![0]);
        assert_eq!(d.unused_count, 3);
        assert!(primary_rate(&d) < 1e-6);
    }

    #[test]
    fn zero_channel_is_degenerate() {
        assert!(matches!(
            design_primary(&ComplexMatrix::zeros(2, 2), 1.0, 1.0),
            Err(OiaError::DegenerateChannel)
        ));
    }

    #[test]
    fn rejects_bad_budget_or_noise() {
        let h = real_diag(&[1.0, 1.0]);
        assert!(design_primary(&h, 0.0, 1.0).is_err());
        assert!(design_primary(&h, 1.0, 0.0).is_err());
    }

    #[test]
    fn wide_channel_surplus_modes_are_not_counted() {
        let h = gaussian_matrix(2, 4, 8);
        let d = design_primary(&h, 1e-6, 1.0).unwrap();
        assert_eq!(d.p1.powers.len(), 4);
        assert_eq!(d.p1_bar.len(), 4);
        assert_eq!(&d.p1.powers[2..], &[0.0, 0.0]);
        assert_eq!(&d.p1_bar[2..], &[0.0, 0.0]);
        assert_eq!(d.unused_count, 1);
    }

    #[test]
    fn silent_external_interference_changes_nothing() {
        let h = gaussian_matrix(3, 3, 21);
        let d = design_primary(&h, 10.0, 1.0).unwrap();
        let zero = ComplexMatrix::zeros(3, 3);
        assert_eq!(primary_mode_sinrs(&d, &h, None), primary_mode_sinrs(&d, &h, Some(&zero)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn structure_and_rate_consistency(seed in any::<u64>(), n in 1usize..7, snr_db in -20.0f64..40.0) {
            let h = gaussian_matrix(n, n, seed);
            let p_max = 10f64.powf(snr_db / 10.0);
            let d = design_primary(&h, p_max, 1.0).unwrap();
            for (p, pb) in d.p1.powers.iter().zip(&d.p1_bar) {
                prop_assert_eq!(p * pb, 0.0);
            }
            prop_assert!(diagonalization_residual(&d, &h) <= 1e-10 * d.svd.sigma[0]);
            let tx = primary_transmit_covariance(&d);
            let logdet = log2_det_id_plus(&linalg::hermitian_part(&(&h * tx * h.adjoint()).unscale(d.sigma2))).unwrap();
            prop_assert!((logdet - primary_rate(&d)).abs() <= 1e-9 * primary_rate(&d).max(1.0));
        }

        #[test]
        fn unused_count_non_increasing_in_power(seed in any::<u64>(), n in 2usize..7) {
            let h = gaussian_matrix(n, n, seed);
            let mut last = usize::MAX;
            for k in -30..=50 {
                let d = design_primary(&h, 10f64.powf(k as f64 / 10.0), 1.0).unwrap();
                prop_assert!(d.unused_count <= last);
                last = d.unused_count;
            }
        }
    }
}
