//! Quadrature rules: Gauss-Hermite nodes via Golub-Welsch, and a utility
//! Gauss-Legendre rule for fixed intervals.

use nalgebra::{DMatrix, SymmetricEigen};
use once_cell::sync::Lazy;

/// Nodes and weights of an `n`-point Gauss-Hermite rule for the weight
/// `exp(-t^2)`, computed from the eigendecomposition of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mu0 = std::f64::consts::PI.sqrt();
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let node = eig.eigenvalues[j];
            let v0 = eig.eigenvectors[(0, j)];
            (node, mu0 * v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// 96-point rule, enough for the Gaussian stability integrands used here.
pub static GH96: Lazy<Vec<(f64, f64)>> = Lazy::new(|| gauss_hermite(96));

/// Expectation `E[f(V)]` over `V ~ N(0, 1)` by Gauss-Hermite quadrature.
pub fn gauss_hermite_expect(f: impl Fn(f64) -> f64) -> f64 {
    let scale = std::f64::consts::SQRT_2;
    let norm = 1.0 / std::f64::consts::PI.sqrt();
    GH96.iter().map(|&(t, w)| w * f(scale * t)).sum::<f64>() * norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_moments() {
        // E[1] = 1, E[V^2] = 1, E[V^4] = 3 under N(0,1).
        assert_abs_diff_eq!(gauss_hermite_expect(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gauss_hermite_expect(|v| v * v), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gauss_hermite_expect(|v| v.powi(4)), 3.0, epsilon = 1e-11);
    }

    #[test]
    fn hermite_gaussian_expectation() {
        // E[Phi(V)] = 1/2 by symmetry.
        let v = gauss_hermite_expect(super::super::normal::phi);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
    }
}
