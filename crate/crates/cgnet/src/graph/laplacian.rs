//! Normalized graph Laplacian, its spectral scaling, and the Chebyshev basis
//! recurrence that spectral convolution is built on.

use super::WeightedGraph;
use crate::error::{Error, Result};
use crate::linalg::{power_iteration, CsrMatrix};
use ndarray::Array2;

/// Fallback spectral bound used when power iteration cannot produce a
/// positive largest eigenvalue (edgeless graphs, non-convergence).
pub const LAMBDA_MAX_FALLBACK: f64 = 2.0;

/// Symmetric normalized Laplacian `I - D^{-1/2} W D^{-1/2}` with its largest
/// eigenvalue. Zero-degree vertices get a bare diagonal 1.
#[derive(Debug, Clone)]
pub struct NormalizedLaplacian {
    pub matrix: CsrMatrix,
    pub n: usize,
    pub lambda_max: f64,
}

/// Builds the normalized Laplacian of `g` and estimates its largest
/// eigenvalue (see [`lambda_max`]).
pub fn normalized_laplacian(g: &WeightedGraph) -> NormalizedLaplacian {
    let n = g.n();
    let deg = g.degrees();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut triplets = Vec::with_capacity(2 * g.num_edges() + n);
    for i in 0..n {
        triplets.push((i, i, 1.0));
    }
    for &(i, j, w) in g.edges() {
        let v = -w * inv_sqrt[i] * inv_sqrt[j];
        triplets.push((i, j, v));
        triplets.push((j, i, v));
    }
    let matrix = CsrMatrix::from_triplets(n, triplets);
    // an edgeless graph's Laplacian is diagonal; any scale is valid and the
    // fallback keeps the convention uniform
    let lmax = if g.num_edges() == 0 {
        LAMBDA_MAX_FALLBACK
    } else {
        lambda_max(&matrix)
    };
    NormalizedLaplacian {
        matrix,
        n,
        lambda_max: lmax,
    }
}

/// Largest eigenvalue by power iteration (relative tolerance 1e-9, at most
/// 1000 iterations), falling back to the spectral bound 2.0 when the
/// iteration does not converge — which includes edgeless graphs, where any
/// positive constant is a valid scale.
pub fn lambda_max(matrix: &CsrMatrix) -> f64 {
    match power_iteration(matrix, 1e-9, 1000) {
        Some(l) if l > 0.0 => l,
        _ => LAMBDA_MAX_FALLBACK,
    }
}

/// Scaled Laplacian `2 L / lambda_max - I`, mapping the spectrum into
/// `[-1, 1]` where Chebyshev polynomials are well-behaved.
pub fn scale_laplacian(l: &NormalizedLaplacian) -> CsrMatrix {
    let scale = 2.0 / l.lambda_max;
    let mut triplets = l.matrix.to_triplets();
    for (i, j, v) in triplets.iter_mut() {
        *v *= scale;
        if i == j {
            *v -= 1.0;
        }
    }
    CsrMatrix::from_triplets(l.n, triplets)
}

/// Chebyshev basis `[T_0(Ls)·X, ..., T_{M-1}(Ls)·X]` by the three-term
/// recurrence `T_m X = 2 Ls T_{m-1} X - T_{m-2} X`.
pub fn cheb_basis(l_s: &CsrMatrix, x: &Array2<f64>, m: usize) -> Result<Vec<Array2<f64>>> {
    if m < 1 {
        return Err(Error::Config("Chebyshev order must be >= 1".into()));
    }
    if x.nrows() != l_s.n() {
        return Err(Error::Shape(format!(
            "signal has {} rows but the Laplacian is {}x{}",
            x.nrows(),
            l_s.n(),
            l_s.n()
        )));
    }
    let mut basis = Vec::with_capacity(m);
    basis.push(x.clone());
    if m >= 2 {
        let mut t1 = Array2::zeros(x.dim());
        l_s.matmul_dense(&x.view(), &mut t1);
        basis.push(t1);
    }
    for k in 2..m {
        let mut next = Array2::zeros(x.dim());
        l_s.matmul_dense(&basis[k - 1].view(), &mut next);
        next *= 2.0;
        next -= &basis[k - 2];
        basis.push(next);
    }
    Ok(basis)
}
