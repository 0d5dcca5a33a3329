//! The graph convolutional network: layer specs, parameters, manual
//! forward/backward, Adam training, gradient checking, the k-NN baseline and
//! checkpoint serialization.

mod checkpoint;
mod gradcheck;
mod knn;
mod layers;
mod network;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, random_params_for_gradcheck, GradCheckOptions, GradCheckReport};
pub use knn::knn_baseline;
pub use layers::{
    chebconv_backward, chebconv_forward, fc_backward, fc_forward, graph_maxpool2,
    graph_maxpool2_backward, l2_grads, l2_loss, relu, relu_backward, softmax_cross_entropy,
    ChebConvCache,
};
pub use network::{ForwardTrace, GraphSample, Network};
pub use optim::{adam_step, AdamState};
pub use train::{evaluate, train, EpochMetrics, TrainConfig};

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One layer of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    /// Graph convolution with `filters` output filters and Chebyshev
    /// polynomial order `order` (number of coefficients).
    Gc { filters: usize, order: usize },
    /// Graph max-pooling reducing the vertex count by `factor`.
    Pool { factor: usize },
    /// Fully connected classification head with `outputs` neurons.
    Fc { outputs: usize },
}

/// Ordered layer sequence: zero or more GC/P layers and exactly one trailing
/// FC layer. Only pooling factor 2 is supported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Parses a spec string such as `"GC64M16 - GC64M16 - P2 - FC40"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for (pos, token) in s.split(" - ").enumerate() {
            let token = token.trim();
            let fail = |msg: &str| Error::Parse(format!("token {} ({token:?}): {msg}", pos + 1));
            if let Some(rest) = token.strip_prefix("GC") {
                let (f, m) = rest
                    .split_once('M')
                    .ok_or_else(|| fail("expected GC<filters>M<order>"))?;
                let filters: usize = f.parse().map_err(|_| fail("bad filter count"))?;
                let order: usize = m.parse().map_err(|_| fail("bad polynomial order"))?;
                if filters < 1 || order < 1 {
                    return Err(fail("filters and order must be >= 1"));
                }
                layers.push(LayerSpec::Gc { filters, order });
            } else if let Some(rest) = token.strip_prefix("FC") {
                let outputs: usize = rest.parse().map_err(|_| fail("bad output count"))?;
                if outputs < 1 {
                    return Err(fail("outputs must be >= 1"));
                }
                layers.push(LayerSpec::Fc { outputs });
            } else if let Some(rest) = token.strip_prefix('P') {
                let factor: usize = rest.parse().map_err(|_| fail("bad pooling factor"))?;
                if factor != 2 {
                    return Err(fail("only pooling factor 2 is supported"));
                }
                layers.push(LayerSpec::Pool { factor });
            } else {
                return Err(fail("expected GC<f>M<m>, P<c> or FC<h>"));
            }
        }
        let spec = NetworkSpec { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// A named preset (`net1` through `net5`) or a custom spec string.
    pub fn preset_or_parse(s: &str) -> Result<Self> {
        let canonical = match s {
            "net1" => "GC64M16 - GC64M16 - P2 - FC40",
            "net2" => "GC64M16 - GC64M16 - P2 - GC128M9 - GC128M9 - P2 - FC40",
            "net3" => "GC64M9 - GC64M9 - P2 - GC128M4 - GC128M4 - P2 - FC40",
            "net4" => "GC64M4 - GC64M4 - P2 - GC128M3 - GC128M3 - P2 - FC40",
            "net5" => {
                "GC64M16 - GC64M16 - P2 - GC128M9 - GC128M9 - P2 - GC256M4 - GC256M4 - P2 - FC40"
            }
            custom => custom,
        };
        Self::parse(canonical)
    }

    pub fn validate(&self) -> Result<()> {
        match self.layers.last() {
            Some(LayerSpec::Fc { .. }) => {}
            _ => {
                return Err(Error::Parse(
                    "network must end with exactly one FC layer".into(),
                ))
            }
        }
        let fc_count = self
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Fc { .. }))
            .count();
        if fc_count != 1 {
            return Err(Error::Parse(format!(
                "expected exactly one FC layer, found {fc_count}"
            )));
        }
        Ok(())
    }

    /// Number of pooling layers (= coarsening levels required).
    pub fn num_pools(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Pool { .. }))
            .count()
    }

    /// Number of classes produced by the FC head.
    pub fn num_classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Fc { outputs }) => *outputs,
            _ => 0,
        }
    }
}

impl std::fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .layers
            .iter()
            .map(|l| match l {
                LayerSpec::Gc { filters, order } => format!("GC{filters}M{order}"),
                LayerSpec::Pool { factor } => format!("P{factor}"),
                LayerSpec::Fc { outputs } => format!("FC{outputs}"),
            })
            .collect();
        write!(f, "{}", parts.join(" - "))
    }
}

/// Trainable tensors for one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    Gc {
        theta: Array3<f64>,
        bias: Array1<f64>,
    },
    Pool,
    Fc {
        weight: Array2<f64>,
        bias: Array1<f64>,
    },
}

/// All trainable tensors, aligned with the spec's layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
}

impl ModelParams {
    /// Variance-scaled uniform initialization, deterministic for a seed.
    /// `padded_sizes` holds the vertex count at each pooling level.
    pub fn init(spec: &NetworkSpec, padded_sizes: &[usize], seed: u64) -> Result<Self> {
        if padded_sizes.len() != spec.num_pools() + 1 {
            return Err(Error::Shape(format!(
                "spec has {} pools but {} level sizes were supplied",
                spec.num_pools(),
                padded_sizes.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut level = 0usize;
        let mut f_in = 1usize;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            match layer {
                LayerSpec::Gc { filters, order } => {
                    let bound = (6.0 / (order * f_in + filters) as f64).sqrt();
                    let theta = Array3::from_shape_simple_fn((*order, f_in, *filters), || {
                        rng.gen_range(-bound..bound)
                    });
                    layers.push(LayerParams::Gc {
                        theta,
                        bias: Array1::zeros(*filters),
                    });
                    f_in = *filters;
                }
                LayerSpec::Pool { .. } => {
                    level += 1;
                    layers.push(LayerParams::Pool);
                }
                LayerSpec::Fc { outputs } => {
                    let fan_in = padded_sizes[level] * f_in;
                    let bound = (6.0 / (fan_in + outputs) as f64).sqrt();
                    let weight = Array2::from_shape_simple_fn((fan_in, *outputs), || {
                        rng.gen_range(-bound..bound)
                    });
                    layers.push(LayerParams::Fc {
                        weight,
                        bias: Array1::zeros(*outputs),
                    });
                }
            }
        }
        Ok(ModelParams { layers })
    }

    /// Same shapes, all zeros (gradient accumulators).
    pub fn zeros_like(&self) -> ModelParams {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                LayerParams::Gc { theta, bias } => LayerParams::Gc {
                    theta: Array3::zeros(theta.raw_dim()),
                    bias: Array1::zeros(bias.raw_dim()),
                },
                LayerParams::Pool => LayerParams::Pool,
                LayerParams::Fc { weight, bias } => LayerParams::Fc {
                    weight: Array2::zeros(weight.raw_dim()),
                    bias: Array1::zeros(bias.raw_dim()),
                },
            })
            .collect();
        ModelParams { layers }
    }

    /// Tensor views in declaration order: per layer, weights then bias.
    pub fn tensor_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                LayerParams::Gc { theta, bias } => {
                    out.push(theta.as_slice().unwrap());
                    out.push(bias.as_slice().unwrap());
                }
                LayerParams::Pool => {}
                LayerParams::Fc { weight, bias } => {
                    out.push(weight.as_slice().unwrap());
                    out.push(bias.as_slice().unwrap());
                }
            }
        }
        out
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                LayerParams::Gc { theta, bias } => {
                    out.push(theta.as_slice_mut().unwrap());
                    out.push(bias.as_slice_mut().unwrap());
                }
                LayerParams::Pool => {}
                LayerParams::Fc { weight, bias } => {
                    out.push(weight.as_slice_mut().unwrap());
                    out.push(bias.as_slice_mut().unwrap());
                }
            }
        }
        out
    }

    /// Tensor shapes in declaration order.
    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                LayerParams::Gc { theta, bias } => {
                    out.push(theta.shape().to_vec());
                    out.push(bias.shape().to_vec());
                }
                LayerParams::Pool => {}
                LayerParams::Fc { weight, bias } => {
                    out.push(weight.shape().to_vec());
                    out.push(bias.shape().to_vec());
                }
            }
        }
        out
    }

    /// Total number of trainable scalars.
    pub fn num_parameters(&self) -> usize {
        self.tensor_slices().iter().map(|s| s.len()).sum()
    }

    /// Rebuilds params from flat tensors in declaration order.
    pub fn from_flat(spec: &NetworkSpec, shapes: &[Vec<usize>], data: &[Vec<f64>]) -> Result<Self> {
        if shapes.len() != data.len() {
            return Err(Error::Shape("shape/tensor count mismatch".into()));
        }
        let mut it = shapes.iter().zip(data.iter());
        let mut next = |dims: usize| -> Result<(Vec<usize>, Vec<f64>)> {
            let (shape, values) = it
                .next()
                .ok_or_else(|| Error::Shape("missing tensor in checkpoint".into()))?;
            if shape.len() != dims {
                return Err(Error::Shape(format!(
                    "expected {dims}-d tensor, got {shape:?}"
                )));
            }
            if shape.iter().product::<usize>() != values.len() {
                return Err(Error::Shape(format!(
                    "tensor of shape {shape:?} carries {} values",
                    values.len()
                )));
            }
            Ok((shape.clone(), values.clone()))
        };
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            match layer {
                LayerSpec::Gc { .. } => {
                    let (ts, tv) = next(3)?;
                    let (bs, bv) = next(1)?;
                    layers.push(LayerParams::Gc {
                        theta: Array3::from_shape_vec((ts[0], ts[1], ts[2]), tv)
                            .map_err(|e| Error::Shape(e.to_string()))?,
                        bias: Array1::from_shape_vec(bs[0], bv)
                            .map_err(|e| Error::Shape(e.to_string()))?,
                    });
                }
                LayerSpec::Pool { .. } => layers.push(LayerParams::Pool),
                LayerSpec::Fc { .. } => {
                    let (ws, wv) = next(2)?;
                    let (bs, bv) = next(1)?;
                    layers.push(LayerParams::Fc {
                        weight: Array2::from_shape_vec((ws[0], ws[1]), wv)
                            .map_err(|e| Error::Shape(e.to_string()))?,
                        bias: Array1::from_shape_vec(bs[0], bv)
                            .map_err(|e| Error::Shape(e.to_string()))?,
                    });
                }
            }
        }
        if it.next().is_some() {
            return Err(Error::Shape("extra tensors in checkpoint".into()));
        }
        Ok(ModelParams { layers })
    }
}

/// Total trainable parameter count for `spec` on the given per-level padded
/// vertex counts: `M*F_in*F_out + F_out` per GC layer plus the flattened FC.
pub fn count_parameters(spec: &NetworkSpec, padded_sizes: &[usize]) -> Result<usize> {
    if padded_sizes.len() < spec.num_pools() + 1 {
        return Err(Error::Shape(format!(
            "spec has {} pools but only {} level sizes were supplied",
            spec.num_pools(),
            padded_sizes.len()
        )));
    }
    let mut total = 0usize;
    let mut f_in = 1usize;
    let mut level = 0usize;
    for layer in &spec.layers {
        match layer {
            LayerSpec::Gc { filters, order } => {
                total += order * f_in * filters + filters;
                f_in = *filters;
            }
            LayerSpec::Pool { .. } => level += 1,
            LayerSpec::Fc { outputs } => {
                total += padded_sizes[level] * f_in * outputs + outputs;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_to_canonical_structures() {
        let net2 = NetworkSpec::preset_or_parse("net2").unwrap();
        assert_eq!(
            net2.layers,
            vec![
                LayerSpec::Gc {
                    filters: 64,
                    order: 16
                },
                LayerSpec::Gc {
                    filters: 64,
                    order: 16
                },
                LayerSpec::Pool { factor: 2 },
                LayerSpec::Gc {
                    filters: 128,
                    order: 9
                },
                LayerSpec::Gc {
                    filters: 128,
                    order: 9
                },
                LayerSpec::Pool { factor: 2 },
                LayerSpec::Fc { outputs: 40 },
            ]
        );
        assert_eq!(
            net2.to_string(),
            "GC64M16 - GC64M16 - P2 - GC128M9 - GC128M9 - P2 - FC40"
        );
        assert_eq!(net2.num_pools(), 2);
        assert_eq!(NetworkSpec::preset_or_parse("net5").unwrap().num_pools(), 3);
    }

    #[test]
    fn fc_only_and_malformed_tokens() {
        let fc = NetworkSpec::parse("FC40").unwrap();
        assert_eq!(fc.layers, vec![LayerSpec::Fc { outputs: 40 }]);
        let err = NetworkSpec::parse("GC64MX").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("token 1"), "{msg}"),
            other => panic!("wrong error {other:?}"),
        }
        assert!(NetworkSpec::parse("GC4M2 - P2").is_err()); // missing FC
        assert!(NetworkSpec::parse("FC4 - FC4").is_err()); // two FCs
        assert!(NetworkSpec::parse("GC4M2 - P3 - FC4").is_err()); // bad factor
    }

    #[test]
    fn count_parameters_examples() {
        // single GC layer (M=3, F_in=1, F_out=2) contributes 3*1*2 + 2 = 8
        let spec = NetworkSpec::parse("GC2M3 - FC1").unwrap();
        let fc_part = 4 * 2 + 1;
        assert_eq!(count_parameters(&spec, &[4]).unwrap(), 8 + fc_part);
        // the canonical padded pipeline (512 -> 256 -> 128) reproduces the
        // full architecture's totals
        let net2 = NetworkSpec::preset_or_parse("net2").unwrap();
        assert_eq!(count_parameters(&net2, &[512, 256, 128]).unwrap(), 943_528);
        let net1 = NetworkSpec::preset_or_parse("net1").unwrap();
        assert_eq!(count_parameters(&net1, &[512, 256]).unwrap(), 722_088);
        let net5 = NetworkSpec::preset_or_parse("net5").unwrap();
        assert_eq!(
            count_parameters(&net5, &[512, 256, 128, 64]).unwrap(),
            1_337_256
        );
    }

    #[test]
    fn init_shapes_and_determinism() {
        let spec = NetworkSpec::parse("GC4M3 - P2 - FC2").unwrap();
        let a = ModelParams::init(&spec, &[8, 4], 7).unwrap();
        let b = ModelParams::init(&spec, &[8, 4], 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.tensor_shapes(),
            vec![vec![3, 1, 4], vec![4], vec![4 * 4, 2], vec![2]]
        );
        assert_eq!(a.num_parameters(), 3 * 4 + 4 + 32 + 2);
        let c = ModelParams::init(&spec, &[8, 4], 8).unwrap();
        assert_ne!(a, c);
    }
}
