//! Whole-network forward and backward passes over the coarsening hierarchy.

use super::layers::*;
use super::{LayerParams, LayerSpec, ModelParams, NetworkSpec};
use crate::coarsen::CoarseningHierarchy;
use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, scale_laplacian};
use crate::linalg::CsrMatrix;
use ndarray::{Array1, Array2};

/// One classified graph signal: features already permuted onto padded
/// slots (padded vertices × 1 column).
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub input: Array2<f64>,
    pub label: usize,
}

/// An immutable network: the layer spec plus the scaled Laplacian at every
/// pooling level. Parameters are passed separately so training can update
/// them without touching shared state.
#[derive(Debug, Clone)]
pub struct Network {
    pub spec: NetworkSpec,
    pub laplacians: Vec<CsrMatrix>,
    pub padded_sizes: Vec<usize>,
}

/// Per-layer caches from a forward pass, sufficient both for backprop and
/// for re-running the tail of the network after a parameter change.
pub struct ForwardTrace {
    /// Input to each layer (the graph signal entering it).
    inputs: Vec<Array2<f64>>,
    caches: Vec<LayerTrace>,
    pub logits: Array1<f64>,
    /// Smallest |pre-activation| seen at any ReLU input.
    pub min_preactivation: f64,
    /// Smallest gap between max-pooled pairs that are not bitwise equal.
    /// Bitwise-equal pairs (fake-vertex subtrees) shift together under any
    /// perturbation and are no kink.
    pub min_pool_gap: f64,
}

enum LayerTrace {
    Gc {
        cheb: ChebConvCache,
        pre_activation: Array2<f64>,
    },
    Pool {
        odd: Array2<bool>,
    },
    Fc {
        flat: Array1<f64>,
    },
}

impl Network {
    /// Builds the per-level scaled Laplacians from a coarsening hierarchy.
    pub fn from_hierarchy(spec: NetworkSpec, hierarchy: &CoarseningHierarchy) -> Result<Self> {
        spec.validate()?;
        if hierarchy.num_levels() < spec.num_pools() {
            return Err(Error::Config(format!(
                "network needs {} coarsening levels but the hierarchy has {}",
                spec.num_pools(),
                hierarchy.num_levels()
            )));
        }
        let levels = &hierarchy.levels()[..=spec.num_pools()];
        let laplacians: Vec<CsrMatrix> = levels
            .iter()
            .map(|g| scale_laplacian(&normalized_laplacian(g)))
            .collect();
        let padded_sizes = levels.iter().map(|g| g.n()).collect();
        Ok(Network {
            spec,
            laplacians,
            padded_sizes,
        })
    }

    /// A single-level network over one graph (no pooling support needed).
    pub fn from_laplacians(
        spec: NetworkSpec,
        laplacians: Vec<CsrMatrix>,
        padded_sizes: Vec<usize>,
    ) -> Result<Self> {
        spec.validate()?;
        if laplacians.len() != spec.num_pools() + 1 || padded_sizes.len() != laplacians.len() {
            return Err(Error::Config(format!(
                "network with {} pools needs {} Laplacians, got {}",
                spec.num_pools(),
                spec.num_pools() + 1,
                laplacians.len()
            )));
        }
        Ok(Network {
            spec,
            laplacians,
            padded_sizes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    /// Fresh parameters for this network.
    pub fn init_params(&self, seed: u64) -> Result<ModelParams> {
        ModelParams::init(&self.spec, &self.padded_sizes, seed)
    }

    /// Full forward pass, returning logits and per-layer caches.
    pub fn forward(&self, params: &ModelParams, input: &Array2<f64>) -> Result<ForwardTrace> {
        if input.nrows() != self.padded_sizes[0] || input.ncols() != 1 {
            return Err(Error::Shape(format!(
                "input must be {} x 1, got {} x {}",
                self.padded_sizes[0],
                input.nrows(),
                input.ncols()
            )));
        }
        let mut trace = ForwardTrace {
            inputs: Vec::with_capacity(self.spec.layers.len()),
            caches: Vec::with_capacity(self.spec.layers.len()),
            logits: Array1::zeros(0),
            min_preactivation: f64::INFINITY,
            min_pool_gap: f64::INFINITY,
        };
        let mut x = input.clone();
        let mut level = 0usize;
        for (layer, p) in self.spec.layers.iter().zip(&params.layers) {
            trace.inputs.push(x.clone());
            match (layer, p) {
                (LayerSpec::Gc { .. }, LayerParams::Gc { theta, bias }) => {
                    let (pre, cheb) = chebconv_forward(&x, &self.laplacians[level], theta, bias)?;
                    for &v in pre.iter() {
                        trace.min_preactivation = trace.min_preactivation.min(v.abs());
                    }
                    x = relu(&pre);
                    trace.caches.push(LayerTrace::Gc {
                        cheb,
                        pre_activation: pre,
                    });
                }
                (LayerSpec::Pool { .. }, LayerParams::Pool) => {
                    let (pooled, odd) = graph_maxpool2(&x)?;
                    for j in 0..pooled.nrows() {
                        for c in 0..pooled.ncols() {
                            let (a, b) = (x[[2 * j, c]], x[[2 * j + 1, c]]);
                            if a != b {
                                trace.min_pool_gap = trace.min_pool_gap.min((a - b).abs());
                            }
                        }
                    }
                    x = pooled;
                    level += 1;
                    trace.caches.push(LayerTrace::Pool { odd });
                }
                (LayerSpec::Fc { .. }, LayerParams::Fc { weight, bias }) => {
                    let flat = flatten(&x);
                    trace.logits = fc_forward(&flat, weight, bias)?;
                    trace.caches.push(LayerTrace::Fc { flat });
                }
                _ => {
                    return Err(Error::Shape(
                        "parameters misaligned with network spec".into(),
                    ))
                }
            }
        }
        Ok(trace)
    }

    /// Re-runs the network from layer `start` onward using the cached input
    /// to that layer; used by finite differencing so a perturbation of layer
    /// k's parameters does not recompute the unaffected prefix.
    pub fn forward_from(
        &self,
        params: &ModelParams,
        trace: &ForwardTrace,
        start: usize,
    ) -> Result<Array1<f64>> {
        let mut x = trace.inputs[start].clone();
        let mut level = self.spec.layers[..start]
            .iter()
            .filter(|l| matches!(l, LayerSpec::Pool { .. }))
            .count();
        for (layer, p) in self.spec.layers.iter().zip(&params.layers).skip(start) {
            match (layer, p) {
                (LayerSpec::Gc { .. }, LayerParams::Gc { theta, bias }) => {
                    let (pre, _) = chebconv_forward(&x, &self.laplacians[level], theta, bias)?;
                    x = relu(&pre);
                }
                (LayerSpec::Pool { .. }, LayerParams::Pool) => {
                    x = graph_maxpool2(&x)?.0;
                    level += 1;
                }
                (LayerSpec::Fc { .. }, LayerParams::Fc { weight, bias }) => {
                    return fc_forward(&flatten(&x), weight, bias);
                }
                _ => {
                    return Err(Error::Shape(
                        "parameters misaligned with network spec".into(),
                    ))
                }
            }
        }
        unreachable!("spec always ends with FC");
    }

    /// Cross-entropy loss of one sample (no L2 term).
    pub fn sample_loss(&self, params: &ModelParams, sample: &GraphSample) -> Result<f64> {
        let trace = self.forward(params, &sample.input)?;
        Ok(softmax_cross_entropy(&trace.logits, sample.label)?.0)
    }

    /// Backward pass from the cross-entropy gradient. Returns per-layer
    /// parameter gradients and the gradient with respect to the input.
    pub fn backward(
        &self,
        params: &ModelParams,
        trace: &ForwardTrace,
        grad_logits: &Array1<f64>,
    ) -> Result<(ModelParams, Array2<f64>)> {
        let mut grads = params.zeros_like();
        let mut grad_flat: Option<Array1<f64>> = Some(grad_logits.clone());
        let mut grad_x: Option<Array2<f64>> = None;
        let mut level = self.spec.num_pools();
        for idx in (0..self.spec.layers.len()).rev() {
            match (
                &self.spec.layers[idx],
                &params.layers[idx],
                &trace.caches[idx],
            ) {
                (LayerSpec::Fc { .. }, LayerParams::Fc { weight, .. }, LayerTrace::Fc { flat }) => {
                    let g = grad_flat.take().expect("FC gradient present");
                    let (gx_flat, gw, gb) = fc_backward(&g, flat, weight);
                    let shape = trace.inputs[idx].dim();
                    grad_x = Some(
                        gx_flat
                            .into_shape_with_order(shape)
                            .expect("flat gradient matches FC input shape"),
                    );
                    grads.layers[idx] = LayerParams::Fc {
                        weight: gw,
                        bias: gb,
                    };
                }
                (LayerSpec::Pool { .. }, _, LayerTrace::Pool { odd }) => {
                    let g = grad_x.take().expect("pool gradient present");
                    grad_x = Some(graph_maxpool2_backward(&g, odd));
                    level -= 1;
                }
                (
                    LayerSpec::Gc { .. },
                    LayerParams::Gc { theta, .. },
                    LayerTrace::Gc {
                        cheb,
                        pre_activation,
                    },
                ) => {
                    let g = grad_x.take().expect("GC gradient present");
                    let g_pre = relu_backward(&g, pre_activation);
                    let (gx, gt, gb) =
                        chebconv_backward(&g_pre, cheb, &self.laplacians[level], theta);
                    grad_x = Some(gx);
                    grads.layers[idx] = LayerParams::Gc {
                        theta: gt,
                        bias: gb,
                    };
                }
                _ => return Err(Error::Shape("trace misaligned with network spec".into())),
            }
        }
        Ok((grads, grad_x.expect("input gradient present")))
    }

    /// Forward + loss + backward for one sample. Returns
    /// `(cross-entropy loss, logits, parameter gradients, input gradient)`.
    pub fn forward_backward(
        &self,
        params: &ModelParams,
        sample: &GraphSample,
    ) -> Result<(f64, Array1<f64>, ModelParams, Array2<f64>)> {
        let trace = self.forward(params, &sample.input)?;
        let (loss, grad_logits) = softmax_cross_entropy(&trace.logits, sample.label)?;
        let (grads, grad_input) = self.backward(params, &trace, &grad_logits)?;
        Ok((loss, trace.logits, grads, grad_input))
    }
}

fn flatten(x: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(x.iter().cloned())
}
