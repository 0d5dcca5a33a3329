//! Dense and sparse symmetric matrix helpers: CSR storage, sparse×dense
//! products, power iteration and a Jacobi eigensolver for small matrices.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Compressed sparse row matrix. Symmetric matrices store both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from coordinate triplets. Entries must be unique; rows are sorted.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for &(i, j, v) in &triplets {
            debug_assert!(i < n && j < n);
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A·x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    /// Y = A·X for dense X (n × f), written into `out`.
    pub fn matmul_dense(&self, x: &ArrayView2<f64>, out: &mut Array2<f64>) {
        assert_eq!(x.nrows(), self.n, "spmm row mismatch");
        assert_eq!(out.dim(), x.dim());
        let f = x.ncols();
        let xs = x.as_slice().expect("X must be standard layout");
        let os = out.as_slice_mut().expect("out must be standard layout");
        for i in 0..self.n {
            let row = &mut os[i * f..(i + 1) * f];
            row.fill(0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[k];
                let xr = &xs[self.col_idx[k] * f..self.col_idx[k] * f + f];
                for (o, &xv) in row.iter_mut().zip(xr) {
                    *o += v * xv;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[[i, self.col_idx[k]]] = self.values[k];
            }
        }
        out
    }

    /// Entries as coordinate triplets in row-major order.
    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push((i, self.col_idx[k], self.values[k]));
            }
        }
        out
    }

    pub fn diag(&self) -> Array1<f64> {
        let mut d = Array1::zeros(self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.values[k];
                }
            }
        }
        d
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Returns `None` when the Rayleigh quotient has not stabilized within
/// `max_iter` iterations (or the iterate collapses to zero).
pub fn power_iteration(a: &CsrMatrix, tol: f64, max_iter: usize) -> Option<f64> {
    let n = a.n();
    if n == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut av = vec![0.0; n];
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        a.matvec(&v, &mut av);
        // Rayleigh quotient with the unit iterate
        let lambda: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
        let nav = norm(&av);
        if nav < 1e-300 {
            return None; // zero matrix or v in the null space
        }
        for (x, y) in v.iter_mut().zip(&av) {
            *x = y / nav;
        }
        if prev.is_finite() && (lambda - prev).abs() <= tol * lambda.abs().max(1e-30) {
            return Some(lambda);
        }
        prev = lambda;
    }
    None
}

/// Eigendecomposition of a dense symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues ascending and
/// eigenvectors as matching columns. Intended for small matrices (test
/// oracles, spectrum checks), not large-scale work.
pub fn symmetric_eigen(a: &ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.to_owned();
    let mut v: Array2<f64> = Array2::eye(n);
    let off = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[[i, j]] * m[[i, j]];
                }
            }
        }
        s
    };
    let scale: f64 = (0..n).map(|i| m[[i, i]].abs()).fold(1e-30, f64::max);
    let tol = (1e-15 * scale) * (1e-15 * scale) * n as f64 * n as f64;
    for _sweep in 0..100 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[[k, col]] = v[[k, i]];
        }
    }
    (eigenvalues, eigenvectors)
}
