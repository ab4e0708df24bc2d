//! Dense linear-algebra helpers shared by the landscape analysis.

use nalgebra::{DMatrix, DVector};

/// `n x (n-1)` matrix whose orthonormal columns span `{v : Σ v = 0}`.
pub(crate) fn tangent_basis(n: usize) -> DMatrix<f64> {
    // Helmert basis: column k is (1, ..., 1, -k, 0, ...) / sqrt(k(k+1)).
    let mut q = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = scale;
        }
        q[(k, k - 1)] = -(k as f64) * scale;
    }
    q
}

/// Largest real part among the eigenvalues of a general square matrix.
pub(crate) fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub(crate) fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Solves `a x = b` by LU with partial pivoting; `None` when singular.
pub(crate) fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.lu();
    let x = lu.solve(&b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_basis_is_orthonormal_and_mass_free() {
        for n in 2..8 {
            let q = tangent_basis(n);
            let g = q.transpose() * &q;
            assert!((g - DMatrix::identity(n - 1, n - 1)).amax() < 1e-14);
            for c in 0..n - 1 {
                assert!(q.column(c).sum().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenvalue_helpers() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, -3.0]);
        assert!((max_real_eigenvalue(&a) - 2.0).abs() < 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = symmetric_eigenvalues(&s);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        assert!(solve(DMatrix::zeros(2, 2), DVector::zeros(2)).is_none());
    }
}
