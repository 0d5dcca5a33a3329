//! Dense spectral-domain filtering oracle.
//!
//! Filters a vertex signal through an explicit eigendecomposition of the
//! normalized Laplacian, evaluating the Chebyshev polynomial on the scaled
//! eigenvalues scalar-by-scalar. This route never touches the sparse
//! recurrence, which makes it an independent check of the fast path; it is
//! restricted to small graphs.

use super::NormalizedLaplacian;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use ndarray::{Array1, Array2};

/// Largest graph the dense oracle accepts.
pub const ORACLE_MAX_VERTICES: usize = 64;

/// Eigendecomposition `L = U diag(lambda) U^T` of a normalized Laplacian.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvectors: Array2<f64>,
    pub eigenvalues: Array1<f64>,
}

impl SpectralDecomposition {
    pub fn of(l: &NormalizedLaplacian) -> Result<Self> {
        if l.n > ORACLE_MAX_VERTICES {
            return Err(Error::Domain(format!(
                "dense spectral oracle is limited to {ORACLE_MAX_VERTICES} vertices, got {}",
                l.n
            )));
        }
        let dense = l.matrix.to_dense();
        let (eigenvalues, eigenvectors) = symmetric_eigen(&dense.view());
        Ok(SpectralDecomposition {
            eigenvectors,
            eigenvalues,
        })
    }
}

/// Scalar Chebyshev evaluation `sum_m theta_m T_m(x)`.
fn cheb_eval(theta: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    let (mut t_prev, mut t_cur) = (1.0, x);
    for (m, &c) in theta.iter().enumerate() {
        let t = match m {
            0 => 1.0,
            1 => t_cur,
            _ => {
                let t_next = 2.0 * x * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = t_next;
                t_next
            }
        };
        acc += c * t;
    }
    acc
}

/// Filters `x` as `U g(scaled lambda) U^T x` with `g` the Chebyshev
/// polynomial with coefficients `theta`, eigenvalues scaled by the
/// Laplacian's own `lambda_max`.
pub fn spectral_filter_oracle(
    l: &NormalizedLaplacian,
    theta: &[f64],
    x: &[f64],
) -> Result<Vec<f64>> {
    if theta.is_empty() {
        return Err(Error::Config(
            "oracle needs at least one coefficient".into(),
        ));
    }
    if x.len() != l.n {
        return Err(Error::Shape(format!(
            "signal length {} != n {}",
            x.len(),
            l.n
        )));
    }
    let dec = SpectralDecomposition::of(l)?;
    let xv = Array1::from(x.to_vec());
    let xt = dec.eigenvectors.t().dot(&xv);
    let filtered = Array1::from_iter(dec.eigenvalues.iter().zip(xt.iter()).map(|(&lam, &v)| {
        let scaled = 2.0 * lam / l.lambda_max - 1.0;
        cheb_eval(theta, scaled) * v
    }));
    Ok(dec.eigenvectors.dot(&filtered).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{
        cheb_basis, normalized_laplacian, rand_graph, scale_laplacian, WeightedGraph,
    };
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_first_order_filters() {
        let g = rand_graph(6, 0.6, 3).unwrap();
        let l = normalized_laplacian(&g);
        let x: Vec<f64> = (0..6).map(|i| (i as f64 * 0.83).cos()).collect();
        // theta = (1, 0, 0): T_0 = I
        let y = spectral_filter_oracle(&l, &[1.0, 0.0, 0.0], &x).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        // theta = (0, 1): T_1 = scaled Laplacian
        let y = spectral_filter_oracle(&l, &[0.0, 1.0], &x).unwrap();
        let ls = scale_laplacian(&l);
        let mut want = vec![0.0; 6];
        ls.matvec(&x, &mut want);
        for (a, b) in y.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn oracle_matches_recurrence_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for seed in 0..10 {
            let g = rand_graph(8, 0.5, seed).unwrap();
            let l = normalized_laplacian(&g);
            let ls = scale_laplacian(&l);
            let theta: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let oracle = spectral_filter_oracle(&l, &theta, &x).unwrap();
            let xm = Array2::from_shape_vec((8, 1), x.clone()).unwrap();
            let basis = cheb_basis(&ls, &xm, 5).unwrap();
            let mut fast = vec![0.0; 8];
            for (m, t) in basis.iter().enumerate() {
                for (i, f) in fast.iter_mut().enumerate() {
                    *f += theta[m] * t[[i, 0]];
                }
            }
            let norm: f64 = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err: f64 = oracle
                .iter()
                .zip(&fast)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                err <= 1e-10 * norm.max(1e-12),
                "relative error {}",
                err / norm
            );
        }
    }

    #[test]
    fn oracle_rejects_large_graphs() {
        let g = WeightedGraph::empty(65);
        let l = normalized_laplacian(&g);
        assert!(spectral_filter_oracle(&l, &[1.0], &vec![0.0; 65]).is_err());
    }
}
