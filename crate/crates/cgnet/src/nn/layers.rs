//! Layer primitives with exact analytic gradients.

use super::ModelParams;
use crate::error::{Error, Result};
use crate::graph::cheb_basis;
use crate::linalg::CsrMatrix;
use ndarray::{concatenate, Array1, Array2, Array3, Axis};

/// Forward cache for a Chebyshev convolution: the basis stacked into one
/// `vertices × (M * F_in)` matrix, in basis-major column order.
#[derive(Debug, Clone)]
pub struct ChebConvCache {
    pub stacked_basis: Array2<f64>,
    pub f_in: usize,
    pub order: usize,
}

/// `Y[:, o] = sum_m sum_i theta[m][i][o] * (T_m(Ls) X)[:, i] + bias[o]`,
/// computed through the Chebyshev recurrence, never by eigendecomposition.
pub fn chebconv_forward(
    x: &Array2<f64>,
    l_s: &CsrMatrix,
    theta: &Array3<f64>,
    bias: &Array1<f64>,
) -> Result<(Array2<f64>, ChebConvCache)> {
    let (order, f_in, f_out) = theta.dim();
    if x.ncols() != f_in {
        return Err(Error::Shape(format!(
            "input has {} features but theta expects {f_in}",
            x.ncols()
        )));
    }
    if bias.len() != f_out {
        return Err(Error::Shape(format!(
            "bias has {} entries, expected {f_out}",
            bias.len()
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) || bias.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite convolution parameters".into()));
    }
    let basis = cheb_basis(l_s, x, order)?;
    let views: Vec<_> = basis.iter().map(|b| b.view()).collect();
    let stacked_basis = concatenate(Axis(1), &views).expect("basis blocks share row count");
    // (n, M*F_in) · (M*F_in, F_out): theta's C-order layout is exactly the
    // stacked block order
    let theta_flat = theta
        .view()
        .into_shape_with_order((order * f_in, f_out))
        .expect("theta is standard layout");
    let mut y = stacked_basis.dot(&theta_flat);
    y += &bias.view().insert_axis(Axis(0));
    Ok((
        y,
        ChebConvCache {
            stacked_basis,
            f_in,
            order,
        },
    ))
}

/// Gradients of [`chebconv_forward`]. `grad_x` is propagated through the
/// recurrence adjoint, using that every `T_m(Ls)` is symmetric.
pub fn chebconv_backward(
    grad_y: &Array2<f64>,
    cache: &ChebConvCache,
    l_s: &CsrMatrix,
    theta: &Array3<f64>,
) -> (Array2<f64>, Array3<f64>, Array1<f64>) {
    let (order, f_in, f_out) = theta.dim();
    debug_assert_eq!(cache.order, order);
    debug_assert_eq!(cache.f_in, f_in);

    // grad_theta[m][i][o] = sum_v (T_m X)[v][i] * grad_Y[v][o]
    let grad_theta_flat = to_standard(cache.stacked_basis.t().dot(grad_y));
    let grad_theta = grad_theta_flat
        .into_shape_with_order((order, f_in, f_out))
        .expect("flat gradient reshapes to theta");

    let grad_bias = grad_y.sum_axis(Axis(0));

    // adjoint of the three-term recurrence
    let n = grad_y.nrows();
    let mut bar: Vec<Array2<f64>> = (0..order)
        .map(|m| to_standard(grad_y.dot(&theta.index_axis(Axis(0), m).t())))
        .collect();
    let mut tmp = Array2::zeros((n, f_in));
    for m in (2..order).rev() {
        let (head, tail) = bar.split_at_mut(m);
        l_s.matmul_dense(&tail[0].view(), &mut tmp);
        head[m - 1].scaled_add(2.0, &tmp);
        head[m - 2].scaled_add(-1.0, &tail[0]);
    }
    let mut grad_x = bar[0].clone();
    if order >= 2 {
        l_s.matmul_dense(&bar[1].view(), &mut tmp);
        grad_x += &tmp;
    }
    (grad_x, grad_theta, grad_bias)
}

/// `ndarray` matmul may hand back column-major storage; the sparse product
/// and the flat parameter views require row-major.
fn to_standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Routes the upstream gradient through positive pre-activations only
/// (subgradient 0 at exactly zero).
pub fn relu_backward(grad: &Array2<f64>, pre_activation: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(pre_activation, |g, &x| {
        if x <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Max-pools consecutive row pairs: `out[j] = max(X[2j], X[2j+1])` per
/// feature, ties resolved to the even row. Returns the odd-row selection
/// mask for the backward pass.
pub fn graph_maxpool2(x: &Array2<f64>) -> Result<(Array2<f64>, Array2<bool>)> {
    let rows = x.nrows();
    if !rows.is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "max-pooling needs an even row count, got {rows}"
        )));
    }
    let (half, cols) = (rows / 2, x.ncols());
    let mut out = Array2::zeros((half, cols));
    let mut odd = Array2::from_elem((half, cols), false);
    for j in 0..half {
        for c in 0..cols {
            let (a, b) = (x[[2 * j, c]], x[[2 * j + 1, c]]);
            if b > a {
                out[[j, c]] = b;
                odd[[j, c]] = true;
            } else {
                out[[j, c]] = a;
            }
        }
    }
    Ok((out, odd))
}

/// Scatters the pooled gradient back to the argmax rows.
pub fn graph_maxpool2_backward(grad: &Array2<f64>, odd: &Array2<bool>) -> Array2<f64> {
    let (half, cols) = grad.dim();
    let mut out = Array2::zeros((half * 2, cols));
    for j in 0..half {
        for c in 0..cols {
            let row = 2 * j + usize::from(odd[[j, c]]);
            out[[row, c]] = grad[[j, c]];
        }
    }
    out
}

/// `logits = W^T x + b` with `W` of shape input × outputs.
pub fn fc_forward(
    x: &Array1<f64>,
    weight: &Array2<f64>,
    bias: &Array1<f64>,
) -> Result<Array1<f64>> {
    if x.len() != weight.nrows() || bias.len() != weight.ncols() {
        return Err(Error::Shape(format!(
            "FC shapes inconsistent: x {}, W {:?}, b {}",
            x.len(),
            weight.dim(),
            bias.len()
        )));
    }
    Ok(weight.t().dot(x) + bias)
}

/// Gradients of [`fc_forward`]: `(grad_x, grad_weight, grad_bias)`.
pub fn fc_backward(
    grad_logits: &Array1<f64>,
    x: &Array1<f64>,
    weight: &Array2<f64>,
) -> (Array1<f64>, Array2<f64>, Array1<f64>) {
    let grad_w =
        Array2::from_shape_fn((x.len(), grad_logits.len()), |(i, o)| x[i] * grad_logits[o]);
    let grad_x = weight.dot(grad_logits);
    (grad_x, grad_w, grad_logits.clone())
}

/// Numerically stabilized cross-entropy loss and its logit gradient
/// `softmax(logits) - onehot(label)`.
pub fn softmax_cross_entropy(logits: &Array1<f64>, label: usize) -> Result<(f64, Array1<f64>)> {
    let h = logits.len();
    if label >= h {
        return Err(Error::Domain(format!(
            "label {label} out of range for {h} classes"
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.mapv(|v| (v - max).exp());
    let z: f64 = exp.sum();
    let loss = z.ln() - (logits[label] - max);
    let mut grad = exp / z;
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// L2 penalty `coef/2 * sum(w^2)` over convolution coefficients and FC
/// weights; biases are excluded.
pub fn l2_loss(params: &ModelParams, coef: f64) -> f64 {
    if coef == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for layer in &params.layers {
        match layer {
            super::LayerParams::Gc { theta, .. } => sum += theta.iter().map(|v| v * v).sum::<f64>(),
            super::LayerParams::Fc { weight, .. } => {
                sum += weight.iter().map(|v| v * v).sum::<f64>()
            }
            super::LayerParams::Pool => {}
        }
    }
    0.5 * coef * sum
}

/// Adds the L2 gradient `coef * w` into `grads` (weights only).
pub fn l2_grads(params: &ModelParams, coef: f64, grads: &mut ModelParams) {
    if coef == 0.0 {
        return;
    }
    for (p, g) in params.layers.iter().zip(&mut grads.layers) {
        match (p, g) {
            (super::LayerParams::Gc { theta, .. }, super::LayerParams::Gc { theta: gt, .. }) => {
                gt.scaled_add(coef, theta)
            }
            (super::LayerParams::Fc { weight, .. }, super::LayerParams::Fc { weight: gw, .. }) => {
                gw.scaled_add(coef, weight)
            }
            _ => {}
        }
    }
}
