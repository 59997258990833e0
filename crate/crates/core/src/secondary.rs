//! Secondary (opportunistic) link: interference-aligned precoding,
//! whitening of the primary's interference, and power allocation.
//!
//! The raw precoder `V2 = h12^+ U1 diag(p1_bar)` maps the secondary signal
//! onto the primary receiver's dry modes only: `U1^H h12 V2 = diag(p1_bar)`
//! for square channels, so every mode carrying primary power sees zero
//! secondary interference. With more receive than transmit antennas the
//! pseudo-inverse gives the least-squares alignment and the identity holds
//! only up to the projection onto the range of `h12`.

use crate::error::{OiaError, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::waterfill::waterfill;
use num_complex::Complex64;

/// Relative size of a QR pivot, against its column norm, below which the
/// active precoder columns are treated as linearly dependent.
const COLUMN_RANK_GUARD: f64 = 1e-12;

/// Unscaled secondary precoder (`alpha = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// `nt x nt`; column `n` is exactly zero unless `n` is in `active_columns`.
    pub v2_raw: ComplexMatrix,
    /// Modes with positive complementary power, ascending.
    pub active_columns: Vec<usize>,
}

impl Precoder {
    pub fn is_silent(&self) -> bool {
        self.active_columns.is_empty()
    }

    /// `nt x S` restriction to the active columns.
    pub fn reduced(&self) -> ComplexMatrix {
        self.v2_raw.select_columns(&self.active_columns)
    }
}

/// Builds the zero-interference precoder from the cross channel `h12`,
/// the primary receive basis `u1` and the complementary allocation.
pub fn build_precoder(h12: &ComplexMatrix, u1: &ComplexMatrix, p1_bar: &[f64]) -> Result<Precoder> {
    let (nr, nt) = h12.shape();
    if nr < nt {
        return Err(OiaError::UnsupportedGeometry { nr, nt });
    }
    linalg::ensure_finite(h12, "h12")?;
    if u1.shape() != (nr, nr) {
        return Err(OiaError::InvalidInput(format!(
            "u1 must be {nr}x{nr}, got {}x{}",
            u1.nrows(),
            u1.ncols()
        )));
    }
    if p1_bar.len() != nt {
        return Err(OiaError::InvalidInput(format!(
            "complementary allocation has {} entries, expected {nt}",
            p1_bar.len()
        )));
    }

    let active_columns: Vec<usize> = (0..nt).filter(|&n| p1_bar[n] > 0.0).collect();
    let mut v2_raw = ComplexMatrix::zeros(nt, nt);
    if active_columns.is_empty() {
        return Ok(Precoder { v2_raw, active_columns });
    }

    let inverse = linalg::pinv_tall(h12)?;
    for &n in &active_columns {
        let column = (&inverse * u1.column(n)) * Complex64::new(p1_bar[n], 0.0);
        v2_raw.set_column(n, &column);
    }
    Ok(Precoder { v2_raw, active_columns })
}

/// Interference-plus-noise covariance at the secondary receiver,
/// `h21 V1 diag(p1) V1^H h21^H + sigma2 I`, Hermitian by construction.
pub fn interference_covariance(
    h21: &ComplexMatrix,
    v1: &ComplexMatrix,
    p1: &[f64],
    sigma2: f64,
) -> ComplexMatrix {
    let amplitudes: Vec<f64> = p1.iter().map(|p| p.max(0.0).sqrt()).collect();
    let a = h21 * v1 * linalg::real_diag(&amplitudes);
    let nr = h21.nrows();
    linalg::hermitian_part(&(&a * a.adjoint() + ComplexMatrix::identity(nr, nr).scale(sigma2)))
}

/// Interference covariance `q` together with its whitening filter `q^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    pub q: ComplexMatrix,
    pub f2: ComplexMatrix,
}

impl Whitening {
    /// `q` must dominate `sigma2 I`; a smaller eigenvalue means `q` is broken.
    pub fn new(q: ComplexMatrix, sigma2: f64) -> Result<Self> {
        let f2 = linalg::hermitian_inv_sqrt(&q, sigma2 * (1.0 - 1e-6))?;
        Ok(Self { q, f2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationScheme {
    /// `P2 = I`, precoder scaled to the power budget.
    Uniform,
    /// Water-filling over the whitened, normalized equivalent channel.
    Optimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryDesign {
    pub scheme: AllocationScheme,
    pub v2_raw: ComplexMatrix,
    pub active_columns: Vec<usize>,
    pub q: ComplexMatrix,
    pub f2: ComplexMatrix,
    /// Precoder scale; zero when the secondary has no free mode.
    pub alpha: f64,
    /// `nt x nt` Hermitian PSD input covariance.
    pub p2: ComplexMatrix,
    /// Achieved rate in bits/s/Hz.
    pub rate: f64,
    /// Singular values of the equivalent channel (optimal scheme only).
    pub equivalent_gains: Vec<f64>,
    /// Water-filled powers on the equivalent channel modes (optimal scheme only).
    pub equivalent_powers: Vec<f64>,
    /// Water level on the equivalent channel (optimal scheme only).
    pub water_level: Option<f64>,
}

impl SecondaryDesign {
    /// Scaled precoder `alpha * v2_raw`.
    pub fn precoder(&self) -> ComplexMatrix {
        self.v2_raw.scale(self.alpha)
    }

    /// Transmit covariance `V2 P2 V2^H`.
    pub fn transmit_covariance(&self) -> ComplexMatrix {
        let v2 = self.precoder();
        linalg::hermitian_part(&(&v2 * &self.p2 * v2.adjoint()))
    }

    /// `Trace(V2 P2 V2^H)`.
    pub fn transmit_power(&self) -> f64 {
        self.transmit_covariance().trace().re
    }

    /// Rate recomputed from the log-det objective at the secondary receiver.
    pub fn direct_rate(&self, h22: &ComplexMatrix) -> Result<f64> {
        let t = &self.f2 * h22;
        linalg::log2_det_id_plus(&linalg::hermitian_part(&(&t * self.transmit_covariance() * t.adjoint())))
    }

    /// Interference covariance this design creates at the primary receive antennas.
    pub fn interference_at(&self, h12: &ComplexMatrix) -> ComplexMatrix {
        linalg::hermitian_part(&(h12 * self.transmit_covariance() * h12.adjoint()))
    }
}

fn check_budget(p_max: f64) -> Result<()> {
    if p_max > 0.0 && p_max.is_finite() {
        Ok(())
    } else {
        Err(OiaError::InvalidInput(format!("p_max must be positive, got {p_max}")))
    }
}

fn silent_design(scheme: AllocationScheme, precoder: &Precoder, whitening: &Whitening, p2: ComplexMatrix) -> SecondaryDesign {
    SecondaryDesign {
        scheme,
        v2_raw: precoder.v2_raw.clone(),
        active_columns: Vec::new(),
        q: whitening.q.clone(),
        f2: whitening.f2.clone(),
        alpha: 0.0,
        p2,
        rate: 0.0,
        equivalent_gains: Vec::new(),
        equivalent_powers: Vec::new(),
        water_level: None,
    }
}

/// Uniform allocation: `P2 = I` and `alpha` chosen so that `Trace(V2 V2^H) = p_max`.
pub fn uniform_secondary(
    precoder: &Precoder,
    whitening: &Whitening,
    h22: &ComplexMatrix,
    p_max: f64,
) -> Result<SecondaryDesign> {
    check_budget(p_max)?;
    let nt = precoder.v2_raw.ncols();
    let p2 = ComplexMatrix::identity(nt, nt);
    if precoder.is_silent() {
        return Ok(silent_design(AllocationScheme::Uniform, precoder, whitening, p2));
    }
    let alpha = (p_max / precoder.v2_raw.norm_squared()).sqrt();
    let t = &whitening.f2 * h22 * precoder.v2_raw.scale(alpha);
    let rate = linalg::log2_det_id_plus(&linalg::hermitian_part(&(&t * t.adjoint())))?;
    Ok(SecondaryDesign {
        scheme: AllocationScheme::Uniform,
        v2_raw: precoder.v2_raw.clone(),
        active_columns: precoder.active_columns.clone(),
        q: whitening.q.clone(),
        f2: whitening.f2.clone(),
        alpha,
        p2,
        rate,
        equivalent_gains: Vec::new(),
        equivalent_powers: Vec::new(),
        water_level: None,
    })
}

/// Thin QR of `a` (full column rank) with a real positive diagonal in `r`.
fn positive_qr(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..r.nrows() {
        let pivot = r[(k, k)];
        let column_norm = a.column(k).norm();
        if pivot.norm().is_nan() || pivot.norm() <= COLUMN_RANK_GUARD * column_norm {
            return Err(OiaError::InvariantViolation(format!(
                "active precoder columns are linearly dependent (pivot {:e}, column norm {column_norm:e})",
                pivot.norm()
            )));
        }
        let phase = pivot / pivot.norm();
        for z in q.column_mut(k).iter_mut() {
            *z *= phase;
        }
        for z in r.row_mut(k).iter_mut() {
            *z *= phase.conj();
        }
    }
    Ok((q, r))
}

/// Rate-maximizing allocation under `Trace(V2 P2 V2^H) <= p_max`, `alpha = 1`.
///
/// The optimization runs on the `S` active columns `Vs` of the precoder.
/// With `Vs = Y M` for an orthonormal `Y` and invertible `M`, the
/// substitution `P_hat = M P M^H` turns the problem into ordinary
/// water-filling over the singular values `eta` of the equivalent channel
/// `G = F2 h22 Y` with `Trace(P_hat) = p_max`. `Y` comes from a QR
/// factorization with positive diagonal, which stays accurate when the
/// active columns have very different norms. Any orthonormal basis of the
/// span of `Vs` yields the same `eta`, rate and `Vs P Vs^H`; the polar
/// choice `Y = Vs (Vs^H Vs)^{-1/2}` differs from this one by a unitary
/// rotation of `G`'s right singular basis.
pub fn optimal_secondary(
    precoder: &Precoder,
    whitening: &Whitening,
    h22: &ComplexMatrix,
    p_max: f64,
) -> Result<SecondaryDesign> {
    check_budget(p_max)?;
    let nt = precoder.v2_raw.ncols();
    if precoder.is_silent() {
        return Ok(silent_design(
            AllocationScheme::Optimal,
            precoder,
            whitening,
            ComplexMatrix::zeros(nt, nt),
        ));
    }

    let reduced = precoder.reduced();
    let (basis, r) = positive_qr(&reduced)?;
    let s = reduced.ncols();
    let r_inv = r
        .solve_upper_triangular(&ComplexMatrix::identity(s, s))
        .ok_or_else(|| OiaError::InvariantViolation("triangular factor is singular".into()))?;

    let g = &whitening.f2 * h22 * &basis;
    let factors = linalg::svd(&g)?;
    let eta = factors.sigma;
    let inverse_gains: Vec<f64> = eta
        .iter()
        .map(|&e| if e > 0.0 { 1.0 / (e * e) } else { f64::INFINITY })
        .collect();
    let allocation = waterfill(&inverse_gains, p_max).map_err(|e| match e {
        OiaError::InvalidInput(msg) => OiaError::InvariantViolation(format!("equivalent channel: {msg}")),
        other => other,
    })?;

    let z = factors.v.columns(0, eta.len()).into_owned();
    let hat = &z * linalg::real_diag(&allocation.powers) * z.adjoint();
    let reduced_p2 = linalg::hermitian_part(&(&r_inv * hat * r_inv.adjoint()));

    let mut p2 = ComplexMatrix::zeros(nt, nt);
    for (i, &a) in precoder.active_columns.iter().enumerate() {
        for (j, &b) in precoder.active_columns.iter().enumerate() {
            p2[(a, b)] = reduced_p2[(i, j)];
        }
    }

    let rate = allocation.rate(&inverse_gains);
    Ok(SecondaryDesign {
        scheme: AllocationScheme::Optimal,
        v2_raw: precoder.v2_raw.clone(),
        active_columns: precoder.active_columns.clone(),
        q: whitening.q.clone(),
        f2: whitening.f2.clone(),
        alpha: 1.0,
        p2,
        rate,
        equivalent_gains: eta,
        equivalent_powers: allocation.powers,
        water_level: Some(allocation.water_level),
    })
}

/// Largest interference amplitude the secondary puts on a primary-active mode.
///
/// For each listed mode `n` this is the norm of row `n` of
/// `u1^H h12 v2 p2^{1/2}`, evaluated as `sqrt((T p2 T^H)_{nn})` with
/// `T = u1^H h12 v2`, which needs no matrix square root of `p2`.
pub fn residual_interference(
    u1: &ComplexMatrix,
    h12: &ComplexMatrix,
    v2: &ComplexMatrix,
    p2: &ComplexMatrix,
    active_primary_modes: &[usize],
) -> f64 {
    let t = u1.adjoint() * h12 * v2;
    active_primary_modes
        .iter()
        .map(|&n| {
            let row = t.row(n);
            (row * p2 * row.adjoint())[(0, 0)].re.max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diag;
    use crate::primary::design_primary;
    use crate::testutil::gaussian_matrix;
    use proptest::prelude::*;

    struct Walkthrough {
        precoder: Precoder,
        whitening: Whitening,
        h22: ComplexMatrix,
    }

    fn walkthrough() -> Walkthrough {
        let primary = design_primary(&real_diag(&[2.0, 1.0]), 0.5, 1.0).unwrap();
        let eye = ComplexMatrix::identity(2, 2);
        let precoder = build_precoder(&eye, &primary.svd.u, &primary.p1_bar).unwrap();
        let q = interference_covariance(&eye, &primary.svd.v, &primary.p1.powers, 1.0);
        Walkthrough {
            precoder,
            whitening: Whitening::new(q, 1.0).unwrap(),
            h22: eye,
        }
    }

    #[test]
    fn identity_channel_precoder() {
        let w = walkthrough();
        assert_eq!(w.precoder.active_columns, vec![1]);
        assert!((&w.precoder.v2_raw - real_diag(&[0.0, 0.25])).norm() < 1e-15);
    }

    #[test]
    fn silent_primary_covariance_is_noise() {
        let h = gaussian_matrix(3, 3, 4);
        let v = gaussian_matrix(3, 3, 5);
        let q = interference_covariance(&h, &v, &[0.0; 3], 2.0);
        assert!((q - ComplexMatrix::identity(3, 3).scale(2.0)).norm() < 1e-15);
    }

    #[test]
    fn diagonal_covariance() {
        let eye = ComplexMatrix::identity(2, 2);
        let q = interference_covariance(&eye, &eye, &[0.5, 0.0], 1.0);
        assert!((q - real_diag(&[1.5, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn uniform_walkthrough() {
        let w = walkthrough();
        let d = uniform_secondary(&w.precoder, &w.whitening, &w.h22, 0.5).unwrap();
        assert!((d.alpha - 8f64.sqrt()).abs() < 1e-12);
        assert!((d.precoder()[(1, 1)].re - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((d.rate - 1.5f64.log2()).abs() < 1e-12);
        assert!((d.transmit_power() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn optimal_walkthrough_equals_uniform() {
        let w = walkthrough();
        let d = optimal_secondary(&w.precoder, &w.whitening, &w.h22, 0.5).unwrap();
        assert_eq!(d.equivalent_gains.len(), 1);
        assert!((d.equivalent_gains[0] - 1.0).abs() < 1e-12);
        assert!((d.equivalent_powers[0] - 0.5).abs() < 1e-12);
        assert!((d.rate - 1.5f64.log2()).abs() < 1e-12);
        assert!((d.direct_rate(&w.h22).unwrap() - d.rate).abs() < 1e-12);
        assert!((d.transmit_power() - 0.5).abs() < 1e-12);
        let residual = residual_interference(
            &ComplexMatrix::identity(2, 2),
            &w.h22,
            &d.precoder(),
            &d.p2,
            &[0],
        );
        assert_eq!(residual, 0.0);
    }

    #[test]
    fn no_free_mode_means_no_rate() {
        let eye = ComplexMatrix::identity(2, 2);
        let precoder = build_precoder(&eye, &eye, &[0.0, 0.0]).unwrap();
        assert!(precoder.is_silent());
        assert_eq!(precoder.v2_raw, ComplexMatrix::zeros(2, 2));
        let whitening = Whitening::new(eye.clone(), 1.0).unwrap();
        let u = uniform_secondary(&precoder, &whitening, &eye, 1.0).unwrap();
        let o = optimal_secondary(&precoder, &whitening, &eye, 1.0).unwrap();
        assert_eq!((u.rate, o.rate), (0.0, 0.0));
        assert_eq!(u.transmit_power(), 0.0);
        assert_eq!(residual_interference(&eye, &eye, &u.precoder(), &u.p2, &[0, 1]), 0.0);
    }

    #[test]
    fn wide_geometry_is_rejected() {
        let h = gaussian_matrix(2, 3, 1);
        let u = ComplexMatrix::identity(2, 2);
        assert!(matches!(
            build_precoder(&h, &u, &[0.0, 1.0, 0.0]),
            Err(OiaError::UnsupportedGeometry { nr: 2, nt: 3 })
        ));
    }

    #[test]
    fn singular_cross_channel_is_ill_conditioned() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let h = ComplexMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(1.0)]);
        let u = ComplexMatrix::identity(2, 2);
        assert!(matches!(
            build_precoder(&h, &u, &[0.0, 1.0]),
            Err(OiaError::IllConditionedChannel(_))
        ));
    }

    #[test]
    fn budget_must_be_positive() {
        let w = walkthrough();
        assert!(uniform_secondary(&w.precoder, &w.whitening, &w.h22, 0.0).is_err());
        assert!(optimal_secondary(&w.precoder, &w.whitening, &w.h22, -1.0).is_err());
    }

    /// Same optimum through the literal `(Vs^H Vs)^{1/2}` normalization.
    fn polar_route_rate(precoder: &Precoder, whitening: &Whitening, h22: &ComplexMatrix, p_max: f64) -> f64 {
        let vs = precoder.reduced();
        let gram = linalg::hermitian_part(&(vs.adjoint() * &vs));
        let m_inv = linalg::hermitian_inv_sqrt(&gram, 1e-300).unwrap();
        let g = &whitening.f2 * h22 * &vs * m_inv;
        let eta = linalg::svd(&g).unwrap().sigma;
        let inv: Vec<f64> = eta.iter().map(|e| 1.0 / (e * e)).collect();
        waterfill(&inv, p_max).unwrap().rate(&inv)
    }

    fn random_square_trial(seed: u64, n: usize, snr_db: f64) -> Option<(crate::primary::PrimaryDesign, ComplexMatrix, Precoder, Whitening, ComplexMatrix, f64)> {
        let h11 = gaussian_matrix(n, n, seed);
        let h12 = gaussian_matrix(n, n, seed ^ 1);
        let h21 = gaussian_matrix(n, n, seed ^ 2);
        let h22 = gaussian_matrix(n, n, seed ^ 3);
        let p_max = 10f64.powf(snr_db / 10.0);
        let primary = design_primary(&h11, p_max, 1.0).ok()?;
        let precoder = build_precoder(&h12, &primary.svd.u, &primary.p1_bar).ok()?;
        let q = interference_covariance(&h21, &primary.svd.v, &primary.p1.powers, 1.0);
        let whitening = Whitening::new(q, 1.0).unwrap();
        Some((primary, h12, precoder, whitening, h22, p_max))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn alignment_and_allocation_properties(seed in any::<u64>(), n in 2usize..6, snr_db in -10.0f64..20.0) {
            let Some((primary, h12, precoder, whitening, h22, p_max)) = random_square_trial(seed, n, snr_db) else {
                return Ok(());
            };

            // Column structure.
            prop_assert_eq!(precoder.active_columns.len(), primary.unused_count);
            for c in 0..n {
                if !precoder.active_columns.contains(&c) {
                    prop_assert!(precoder.v2_raw.column(c).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
                }
            }
            // Alignment identity.
            let aligned = primary.svd.u.adjoint() * &h12 * &precoder.v2_raw;
            let scale = primary.p1_bar.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((aligned - real_diag(&primary.p1_bar)).norm() <= 1e-9 * scale.max(1e-300));

            // Whitening.
            let white = &whitening.f2 * &whitening.q * whitening.f2.adjoint();
            prop_assert!((white - ComplexMatrix::identity(n, n)).norm() <= 1e-9 * n as f64);
            let min_eig = linalg::hermitian_eigen(&whitening.q).0.into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min_eig >= 1.0 - 1e-10);

            let uniform = uniform_secondary(&precoder, &whitening, &h22, p_max).unwrap();
            let optimal = optimal_secondary(&precoder, &whitening, &h22, p_max).unwrap();
            let active = primary.active_modes();
            for d in [&uniform, &optimal] {
                let residual = residual_interference(&primary.svd.u, &h12, &d.precoder(), &d.p2, &active);
                prop_assert!(residual <= 1e-9 * p_max.sqrt(), "residual {residual:e}");
                let power = d.transmit_power();
                prop_assert!(power <= p_max * (1.0 + 1e-9));
                if !precoder.is_silent() {
                    prop_assert!((power - p_max).abs() <= 1e-9 * p_max, "power {power} vs {p_max}");
                }
                prop_assert!((d.direct_rate(&h22).unwrap() - d.rate).abs() <= 1e-8 * d.rate.max(1.0));
                let p2_eigs = linalg::hermitian_eigen(&d.p2).0;
                let p2_scale = d.p2.norm().max(1e-300);
                prop_assert!(p2_eigs.iter().all(|&e| e >= -1e-9 * p2_scale));
            }
            prop_assert!(optimal.rate >= uniform.rate - 1e-9);
            if precoder.active_columns.len() == 1 {
                prop_assert!((optimal.rate - uniform.rate).abs() <= 1e-6);
            }
            if !precoder.is_silent() {
                let polar = polar_route_rate(&precoder, &whitening, &h22, p_max);
                prop_assert!((polar - optimal.rate).abs() <= 1e-8 * optimal.rate.max(1.0));
            }
        }

        #[test]
        fn tall_geometry_is_supported(seed in any::<u64>(), nt in 1usize..4, extra in 1usize..3) {
            let nr = nt + extra;
            let h11 = gaussian_matrix(nr, nt, seed);
            let h12 = gaussian_matrix(nr, nt, seed ^ 7);
            let primary = design_primary(&h11, 0.3, 1.0).unwrap();
            let precoder = build_precoder(&h12, &primary.svd.u, &primary.p1_bar).unwrap();
            prop_assert_eq!(precoder.v2_raw.shape(), (nt, nt));
            prop_assert_eq!(precoder.active_columns.len(), primary.unused_count);
        }
    }
}
