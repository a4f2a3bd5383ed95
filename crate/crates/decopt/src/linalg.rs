//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here works at desk scale (a few hundred nodes), so dense
//! symmetric eigendecompositions are used throughout.

use nalgebra::{DMatrix, DVector};

/// Eigenvalues of a symmetric matrix, sorted ascending.
///
/// The input is symmetrized as `(m + m^T)/2` before decomposition; callers
/// that need a symmetry guarantee should check it themselves.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    DVector::from_vec(ev)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    ev[ev.len() - 1]
}

/// Smallest nonzero eigenvalue, treating values below `zero_tol` as zero.
/// Returns `None` when every eigenvalue is below the threshold.
pub fn min_nonzero_eigenvalue(m: &DMatrix<f64>, zero_tol: f64) -> Option<f64> {
    sym_eigenvalues(m).iter().copied().find(|&v| v > zero_tol)
}

/// Positive semidefiniteness check: smallest eigenvalue >= -tol.
pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol
}

/// `sum_s x_s^T W x_s` for an `n x s` iterate block `x` and symmetric `W`.
pub fn weighted_norm_sq(x: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    (w * x).component_mul(x).sum()
}

/// `sum_s x_s^T diag(d) x_s` for a diagonal weight vector.
pub fn diag_weighted_norm_sq(x: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for (i, row) in x.row_iter().enumerate() {
        acc += d[i] * row.norm_squared();
    }
    acc
}

/// Frobenius inner product `<a, b>`.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Scale each row of `x` by `d[i]` (diagonal matrix application).
pub fn scale_rows(d: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for i in 0..x.nrows() {
        let s = d[i];
        out.row_mut(i).scale_mut(s);
    }
    out
}

/// Inverse square root of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues below `zero_tol` are treated as zero (pseudoinverse branch).
pub fn inv_sqrt_psd(m: &DMatrix<f64>, zero_tol: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let inv_sqrt = eig.eigenvalues.map(|v| if v > zero_tol { 1.0 / v.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose()
}

/// Elementwise pseudoinverse of a nonnegative vector: `1/v`, with `0 -> 0`.
pub fn pinv_entries(v: &DVector<f64>) -> DVector<f64> {
    v.map(|e| if e > 0.0 { 1.0 / e } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalues_of_diagonal_are_sorted_entries() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let ev = sym_eigenvalues(&m);
        assert_relative_eq!(ev[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_norms_agree_for_diagonal_weights() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 1.0]);
        let d = DVector::from_vec(vec![2.0, 1.0, 0.25]);
        let w = DMatrix::from_diagonal(&d);
        assert_relative_eq!(
            weighted_norm_sq(&x, &w),
            diag_weighted_norm_sq(&x, &d),
            epsilon = 1e-12
        );
    }

    #[test]
    fn inv_sqrt_of_spd_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = inv_sqrt_psd(&a, 1e-12);
        let ident = &s * &a * &s;
        assert_relative_eq!(ident[(0, 0)], 1.0, epsilon = 1e-10);
        assert_relative_eq!(ident[(1, 1)], 1.0, epsilon = 1e-10);
        assert_relative_eq!(ident[(0, 1)], 0.0, epsilon = 1e-10);
    }
}
