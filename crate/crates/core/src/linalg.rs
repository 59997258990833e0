//! Dense complex linear-algebra kernels used by the link designs.
//!
//! Everything here is a thin, accuracy-checked layer over `nalgebra`:
//! ordered and phase-canonical SVD with full unitary factors, Hermitian
//! inverse square roots for whitening, a rank-guarded tall pseudo-inverse
//! and `log2 det(I + M)` for Hermitian PSD `M`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{OiaError, Result};

/// Dense complex matrix. Channel gains, precoders, filters and covariances
/// all use this representation.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Smallest admissible `sigma_min / sigma_max` before a pseudo-inverse is refused.
pub const RANK_GUARD: f64 = 1e-10;

/// Relative tolerance for the Hermitian precondition.
const HERMITIAN_TOL: f64 = 1e-10;

/// Full singular value decomposition `a = u * diag(sigma) * v^H`.
///
/// `u` is `rows x rows` and `v` is `cols x cols`, both unitary. `sigma`
/// holds the `min(rows, cols)` singular values in descending order; the
/// leading `sigma.len()` columns of `u` and `v` are the matching singular
/// vectors and the remaining columns complete the bases.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdFactors {
    /// `u * diag(sigma) * v^H` with the rectangular diagonal embedded.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut s = ComplexMatrix::zeros(self.u.ncols(), self.v.ncols());
        for (k, &value) in self.sigma.iter().enumerate() {
            s[(k, k)] = Complex64::new(value, 0.0);
        }
        &self.u * s * self.v.adjoint()
    }
}

pub(crate) fn ensure_finite(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(OiaError::InvalidInput(format!("{what} has an empty dimension")));
    }
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(OiaError::InvalidInput(format!("{what} has non-finite entries")))
    }
}

fn ensure_hermitian(m: &ComplexMatrix, what: &str) -> Result<()> {
    ensure_finite(m, what)?;
    if !m.is_square() {
        return Err(OiaError::InvalidInput(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = (m - m.adjoint()).norm();
    if defect > HERMITIAN_TOL * m.norm().max(1.0) {
        return Err(OiaError::InvalidInput(format!(
            "{what} is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(())
}

/// `(m + m^H) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Thin SVD: `u` is `rows x k`, `v` is `cols x k`, `k = min(rows, cols)`.
///
/// Singular values are sorted descending with a stable sort, and each
/// singular pair is rotated by a unit phase so that the largest-modulus
/// entry of its right vector is real and positive (first index wins ties).
fn thin_svd(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    ensure_finite(a, "svd input")?;
    let raw = a.clone().svd_unordered(true, true);
    let (Some(u), Some(v_t)) = (raw.u, raw.v_t) else {
        return Err(OiaError::InvariantViolation("svd did not return singular vectors".into()));
    };
    let v = v_t.adjoint();

    let mut order: Vec<usize> = (0..raw.singular_values.len()).collect();
    order.sort_by(|&i, &j| raw.singular_values[j].total_cmp(&raw.singular_values[i]));

    let sigma: Vec<f64> = order.iter().map(|&i| raw.singular_values[i]).collect();
    let mut u_sorted = u.select_columns(&order);
    let mut v_sorted = v.select_columns(&order);

    for k in 0..sigma.len() {
        let mut pivot = 0;
        let mut best = -1.0;
        for (i, z) in v_sorted.column(k).iter().enumerate() {
            if z.norm() > best {
                best = z.norm();
                pivot = i;
            }
        }
        let anchor = v_sorted[(pivot, k)];
        if anchor.norm() > 0.0 {
            let phase = (anchor / anchor.norm()).conj();
            for z in v_sorted.column_mut(k).iter_mut() {
                *z *= phase;
            }
            for z in u_sorted.column_mut(k).iter_mut() {
                *z *= phase;
            }
        }
    }
    Ok((u_sorted, sigma, v_sorted))
}

/// Extends a matrix with orthonormal columns to a square unitary matrix.
///
/// New columns come from the standard basis vector with the largest
/// residual after two rounds of Gram-Schmidt against the current basis.
fn complete_unitary(thin: &ComplexMatrix) -> ComplexMatrix {
    let n = thin.nrows();
    let mut cols: Vec<DVector<Complex64>> = thin.column_iter().map(|c| c.into_owned()).collect();
    let one = Complex64::new(1.0, 0.0);
    while cols.len() < n {
        let mut best: Option<(f64, DVector<Complex64>)> = None;
        for j in 0..n {
            let mut r = DVector::<Complex64>::zeros(n);
            r[j] = one;
            for _ in 0..2 {
                for q in &cols {
                    let c = q.dotc(&r);
                    r.axpy(-c, q, one);
                }
            }
            let norm = r.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, r));
            }
        }
        let (norm, r) = best.expect("n > 0");
        cols.push(r.unscale(norm));
    }
    if cols.is_empty() {
        return ComplexMatrix::zeros(n, 0);
    }
    ComplexMatrix::from_columns(&cols)
}

/// Full SVD with descending singular values and square unitary factors.
pub fn svd(a: &ComplexMatrix) -> Result<SvdFactors> {
    let (u, sigma, v) = thin_svd(a)?;
    Ok(SvdFactors {
        u: complete_unitary(&u),
        sigma,
        v: complete_unitary(&v),
    })
}

/// Hermitian eigendecomposition of the symmetrized input.
/// Returns eigenvalues and the matching eigenvector columns.
pub(crate) fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

fn spectral_function(values: &[f64], vectors: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let mut scaled = vectors.clone();
    for (k, &mu) in values.iter().enumerate() {
        let w = f(mu);
        for z in scaled.column_mut(k).iter_mut() {
            *z *= w;
        }
    }
    hermitian_part(&(scaled * vectors.adjoint()))
}

/// Hermitian inverse square root `m^{-1/2}`.
///
/// `m` is symmetrized before the eigendecomposition. Any eigenvalue below
/// `floor` yields [`OiaError::NotPositiveDefinite`].
pub fn hermitian_inv_sqrt(m: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(OiaError::InvalidInput(format!("eigenvalue floor must be positive, got {floor}")));
    }
    ensure_hermitian(m, "hermitian_inv_sqrt input")?;
    let (values, vectors) = hermitian_eigen(m);
    if let Some(&min) = values.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < floor {
            return Err(OiaError::NotPositiveDefinite { eigenvalue: min, floor });
        }
    }
    Ok(spectral_function(&values, &vectors, |mu| mu.sqrt().recip()))
}

/// Moore-Penrose pseudo-inverse `(a^H a)^{-1} a^H` of a tall (or square)
/// full-column-rank matrix.
///
/// Evaluated through the thin SVD as `V diag(1/sigma) U^H`, which is the
/// same matrix without forming the squared-condition Gram product. Fails
/// with [`OiaError::IllConditionedChannel`] when `rows < cols` or when
/// `sigma_min < RANK_GUARD * sigma_max`.
pub fn pinv_tall(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.nrows() < a.ncols() {
        return Err(OiaError::IllConditionedChannel(format!(
            "pseudo-inverse needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let (u, sigma, v) = thin_svd(a)?;
    let max = sigma[0];
    let min = *sigma.last().expect("nonempty");
    if max.is_nan() || max <= 0.0 || min < RANK_GUARD * max {
        return Err(OiaError::IllConditionedChannel(format!(
            "singular value ratio {:e} below rank guard {RANK_GUARD:e}",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    let mut v_scaled = v;
    for (k, &s) in sigma.iter().enumerate() {
        for z in v_scaled.column_mut(k).iter_mut() {
            *z /= s;
        }
    }
    Ok(v_scaled * u.adjoint())
}

/// `log2 det(I + m)` for Hermitian PSD `m`, as `sum_k log2(1 + mu_k)`.
///
/// Eigenvalues in `[-1e-9 * |m|_F, 0)` are rounding noise and clamp to
/// zero; anything more negative is rejected.
pub fn log2_det_id_plus(m: &ComplexMatrix) -> Result<f64> {
    ensure_hermitian(m, "log2_det_id_plus input")?;
    let scale = m.norm();
    let (values, _) = hermitian_eigen(m);
    let mut total = 0.0;
    for mu in values {
        if mu < -1e-9 * scale {
            return Err(OiaError::InvalidInput(format!(
                "matrix is not positive semidefinite (eigenvalue {mu:e})"
            )));
        }
        total += mu.max(0.0).ln_1p();
    }
    Ok(total / std::f64::consts::LN_2)
}

/// Builds a complex matrix from a real diagonal.
pub fn real_diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (k, &value) in values.iter().enumerate() {
        m[(k, k)] = Complex64::new(value, 0.0);
    }
    m
}

/// `|X^H X - I|_F`.
pub fn unitarity_defect(x: &ComplexMatrix) -> f64 {
    (x.adjoint() * x - ComplexMatrix::identity(x.ncols(), x.ncols())).norm()
}
