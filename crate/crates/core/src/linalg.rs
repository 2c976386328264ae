//! Dense linear-algebra helpers for stationary distributions.

use nalgebra::{DMatrix, DVector};

/// Dimension of the null space of `a`, counting singular values below `tol`.
pub(crate) fn null_space_dim(a: &DMatrix<f64>, tol: f64) -> usize {
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().filter(|&&s| s <= tol).count()
}

/// Solves `rho * P = rho`, `sum(rho) = 1` for a row-stochastic `p` whose
/// stationary distribution is unique. Returns `None` if the system is singular.
pub(crate) fn stationary_of(p: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = p.nrows();
    // (P^T - I) rho = 0 with the last equation swapped for normalization.
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let rho = a.lu().solve(&b)?;
    // Clean round-off: tiny negatives, then renormalize.
    let mut rho = rho.map(|x| if x < 0.0 && x > -1e-13 { 0.0 } else { x });
    let total: f64 = rho.iter().sum();
    rho /= total;
    Some(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_balance() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]);
        let rho = stationary_of(&p).unwrap();
        assert!((rho[0] - 0.75).abs() < 1e-12);
        assert!((rho[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn identity_is_degenerate() {
        let a = DMatrix::<f64>::identity(3, 3) - DMatrix::<f64>::identity(3, 3);
        assert_eq!(null_space_dim(&a, 1e-9), 3);
    }
}
