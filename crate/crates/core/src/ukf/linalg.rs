//! Small dense helpers for covariance maintenance.

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};

use super::UkfError;

/// Attempts after the first before a factorization is declared failed.
pub const JITTER_ATTEMPTS: usize = 3;

/// Smallest eigenvalue silently clamped to zero by [`repair_psd`].
pub const PSD_TOLERANCE: f64 = 1e-9;

pub fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    0.5 * (m + m.transpose())
}

/// Lower Cholesky factor of a positive semi-definite matrix. Pivots at or
/// below a relative noise floor yield a zero column instead of failing, so
/// block-diagonal covariances with exactly-zero blocks factor cleanly.
fn semidefinite_cholesky<const N: usize>(a: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    let max_diag = (0..N).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    if !max_diag.is_finite() {
        return None;
    }
    let floor = 1e-14 * max_diag;
    let mut l = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -floor {
            return None;
        }
        if d <= floor {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..N {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    Some(l)
}

/// Matrix square root `L` with `L Lᵀ = A`, escalating a diagonal jitter of
/// `1e-12·tr(A)/N` by ×10 up to [`JITTER_ATTEMPTS`] times.
pub fn sqrt_psd<const N: usize>(a: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>, UkfError> {
    let sym = symmetrize(a);
    if let Some(l) = semidefinite_cholesky(&sym) {
        return Ok(l);
    }
    let mut jitter = 1e-12 * sym.trace().abs().max(f64::MIN_POSITIVE) / N as f64;
    for _ in 0..JITTER_ATTEMPTS {
        let shifted = sym + SMatrix::<f64, N, N>::identity() * jitter;
        if let Some(l) = semidefinite_cholesky(&shifted) {
            return Ok(l);
        }
        jitter *= 10.0;
    }
    Err(UkfError::SquareRootFailed)
}

/// Symmetrizes and clamps eigenvalues in `(-PSD_TOLERANCE, 0)` to zero.
pub fn repair_psd<const N: usize>(
    p: &SMatrix<f64, N, N>,
) -> Result<SMatrix<f64, N, N>, UkfError> {
    let sym = symmetrize(p);
    if sym.iter().any(|x| !x.is_finite()) {
        return Err(UkfError::NotFinite);
    }
    let eig = SymmetricEigen::new(DMatrix::from_column_slice(N, N, sym.as_slice()));
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(sym);
    }
    if min <= -PSD_TOLERANCE {
        return Err(UkfError::NotPositiveSemidefinite(min));
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(symmetrize(&SMatrix::<f64, N, N>::from_column_slice(rebuilt.as_slice())))
}

/// Solves `X · S = B` for symmetric positive-definite `S` (i.e. `X = B S⁻¹`),
/// regularizing with escalating jitter when the factorization fails.
pub fn right_solve_spd(b: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>, UkfError> {
    let n = s.nrows();
    let sym = 0.5 * (s + s.transpose());
    let mut jitter = 1e-12 * sym.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut candidate = sym.clone();
    for attempt in 0..=JITTER_ATTEMPTS {
        if let Some(chol) = candidate.clone().cholesky() {
            // (S⁻¹ Bᵀ)ᵀ = B S⁻¹ because S is symmetric.
            return Ok(chol.solve(&b.transpose()).transpose());
        }
        if attempt < JITTER_ATTEMPTS {
            candidate = &sym + DMatrix::identity(n, n) * jitter;
            jitter *= 10.0;
        }
    }
    Err(UkfError::InnovationSingular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, SMatrix};

    #[test]
    fn sqrt_of_scaled_identity() {
        let a = SMatrix::<f64, 21, 21>::identity() * 4.0;
        let l = sqrt_psd(&a).unwrap();
        for c in 0..21 {
            assert_abs_diff_eq!(l.column(c).norm(), 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sqrt_handles_zero_blocks() {
        let mut a = Matrix3::zeros();
        a[(1, 1)] = 2.0;
        let l = sqrt_psd(&a).unwrap();
        assert_abs_diff_eq!(l * l.transpose(), a, epsilon = 1e-15);
        assert_eq!(sqrt_psd(&Matrix3::zeros()).unwrap(), Matrix3::zeros());
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(sqrt_psd(&a), Err(UkfError::SquareRootFailed));
    }

    #[test]
    fn repair_clamps_small_negative_eigenvalues() {
        let a = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1e-12, 2.0));
        let r = repair_psd(&a).unwrap();
        assert!(r[(1, 1)].abs() < 1e-15);
        let bad = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1e-6, 2.0));
        assert!(matches!(repair_psd(&bad), Err(UkfError::NotPositiveSemidefinite(_))));
    }

    #[test]
    fn right_solve_scalar() {
        let b = DMatrix::from_element(1, 1, 2.0);
        let s = DMatrix::from_element(1, 1, 4.0);
        assert_eq!(right_solve_spd(&b, &s).unwrap()[(0, 0)], 0.5);
        let indefinite = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1e-3]));
        let b = DMatrix::zeros(1, 2);
        assert_eq!(right_solve_spd(&b, &indefinite).unwrap_err(), UkfError::InnovationSingular);
    }
}
