//! Central finite-difference verification of every analytic gradient.

use super::layers::{l2_grads, l2_loss, softmax_cross_entropy};
use super::network::Network;
use super::{LayerParams, ModelParams};
use crate::error::Result;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Options for [`grad_check`].
#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Central-difference step.
    pub step: f64,
    /// When set, at most this many entries of each tensor are checked,
    /// chosen by a seeded sample; `None` checks every entry.
    pub max_entries_per_tensor: Option<usize>,
    /// Seed for entry sampling and input jitter.
    pub seed: u64,
    /// L2 coefficient included in the differentiated loss.
    pub l2_coef: f64,
    /// Test hook: corrupts the analytic gradient at this flat parameter
    /// index so the check must fail (negative control).
    pub sabotage: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            tolerance: 1e-5,
            step: 1e-6,
            max_entries_per_tensor: None,
            seed: 0,
            l2_coef: 0.0,
            sabotage: None,
        }
    }
}

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: max relative error {:.3e} over {} entries (tolerance {:.1e}), worst at {}",
            if self.passed { "pass" } else { "FAIL" },
            self.max_rel_error,
            self.checked,
            self.tolerance,
            self.worst
        )
    }
}

/// Parameters with every tensor randomized, biases included, so no ReLU
/// pre-activation or pool pair sits exactly on a kink.
pub fn random_params_for_gradcheck(network: &Network, seed: u64) -> Result<ModelParams> {
    let mut params = network.init_params(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1e995);
    for layer in &mut params.layers {
        match layer {
            LayerParams::Gc { bias, .. } | LayerParams::Fc { bias, .. } => {
                for b in bias.iter_mut() {
                    *b = rng.gen_range(-0.1..0.1);
                }
            }
            LayerParams::Pool => {}
        }
    }
    Ok(params)
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Compares every analytic parameter and input gradient against central
/// finite differences of the loss (cross-entropy plus the optional L2 term).
///
/// Kink avoidance: when the forward pass finds a ReLU pre-activation with
/// `|x| < 1e-7`, or a max-pooled pair separated by less than 1e-7 without
/// being bitwise identical, the input is jittered and the pass retried.
/// Bitwise-equal pool pairs (fake-vertex subtrees) shift together under any
/// parameter perturbation, so they are not kinks.
pub fn grad_check(
    network: &Network,
    params: &ModelParams,
    input: &Array2<f64>,
    label: usize,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let params = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(1));
    let mut x = input.clone();
    let mut trace = network.forward(&params, &x)?;
    for _ in 0..8 {
        if trace.min_preactivation >= 1e-7 && trace.min_pool_gap >= 1e-7 {
            break;
        }
        x.mapv_inplace(|v| v + rng.gen_range(-1e-4..1e-4));
        trace = network.forward(&params, &x)?;
    }

    let (_, grad_logits) = softmax_cross_entropy(&trace.logits, label)?;
    let (mut grads, grad_input) = network.backward(&params, &trace, &grad_logits)?;
    l2_grads(&params, options.l2_coef, &mut grads);
    if let Some(idx) = options.sabotage {
        let mut offset = 0usize;
        for slice in grads.tensor_slices_mut() {
            if idx < offset + slice.len() {
                slice[idx - offset] += 1.0;
                break;
            }
            offset += slice.len();
        }
    }

    // map tensor order to owning layer, for partial forward re-runs
    let mut tensor_layer: Vec<(usize, &'static str)> = Vec::new();
    for (li, layer) in params.layers.iter().enumerate() {
        match layer {
            LayerParams::Gc { .. } => {
                tensor_layer.push((li, "theta"));
                tensor_layer.push((li, "bias"));
            }
            LayerParams::Pool => {}
            LayerParams::Fc { .. } => {
                tensor_layer.push((li, "weight"));
                tensor_layer.push((li, "bias"));
            }
        }
    }

    // choose the entries to check
    let lens: Vec<usize> = params.tensor_slices().iter().map(|s| s.len()).collect();
    let mut jobs: Vec<(usize, usize)> = Vec::new(); // (tensor, entry)
    {
        let mut sample_rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut flat_offset = 0usize;
        for (t, &len) in lens.iter().enumerate() {
            match options.max_entries_per_tensor {
                Some(cap) if len > cap => {
                    let mut picked = rand::seq::index::sample(&mut sample_rng, len, cap).into_vec();
                    if let Some(s) = options.sabotage {
                        if s >= flat_offset && s < flat_offset + len {
                            picked.push(s - flat_offset);
                        }
                    }
                    picked.sort_unstable();
                    picked.dedup();
                    jobs.extend(picked.into_iter().map(|i| (t, i)));
                }
                _ => jobs.extend((0..len).map(|i| (t, i))),
            }
            flat_offset += len;
        }
    }

    let grad_slices: Vec<Vec<f64>> = grads.tensor_slices().iter().map(|s| s.to_vec()).collect();
    let h = options.step;
    let l2 = options.l2_coef;
    let results: Vec<(f64, String)> = jobs
        .par_iter()
        .map_init(
            || params.clone(),
            |work, &(t, i)| {
                let (layer_idx, kind) = tensor_layer[t];
                let eval = |w: &ModelParams| -> f64 {
                    let logits = network
                        .forward_from(w, &trace, layer_idx)
                        .expect("perturbed forward succeeds");
                    softmax_cross_entropy(&logits, label)
                        .expect("finite loss")
                        .0
                        + l2_loss(w, l2)
                };
                let original = work.tensor_slices()[t][i];
                work.tensor_slices_mut()[t][i] = original + h;
                let loss_plus = eval(work);
                work.tensor_slices_mut()[t][i] = original - h;
                let loss_minus = eval(work);
                work.tensor_slices_mut()[t][i] = original;
                let fd = (loss_plus - loss_minus) / (2.0 * h);
                let analytic = grad_slices[t][i];
                (
                    rel_error(analytic, fd),
                    format!("layer {layer_idx} {kind}[{i}]"),
                )
            },
        )
        .collect();

    // input gradient against finite differences of the full forward
    let n_in = x.len();
    let input_entries: Vec<usize> = match options.max_entries_per_tensor {
        Some(cap) if n_in > cap => {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0xabcdef);
            let mut v = rand::seq::index::sample(&mut rng, n_in, cap).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..n_in).collect(),
    };
    let input_results: Vec<(f64, String)> = input_entries
        .par_iter()
        .map_init(
            || x.clone(),
            |work, &i| {
                let eval = |w: &Array2<f64>| -> f64 {
                    let tr = network
                        .forward(&params, w)
                        .expect("perturbed forward succeeds");
                    softmax_cross_entropy(&tr.logits, label)
                        .expect("finite loss")
                        .0
                        + l2_loss(&params, l2)
                };
                let original = work.as_slice().unwrap()[i];
                work.as_slice_mut().unwrap()[i] = original + h;
                let plus = eval(work);
                work.as_slice_mut().unwrap()[i] = original - h;
                let minus = eval(work);
                work.as_slice_mut().unwrap()[i] = original;
                let fd = (plus - minus) / (2.0 * h);
                let analytic = grad_input.as_slice().unwrap()[i];
                (rel_error(analytic, fd), format!("input[{i}]"))
            },
        )
        .collect();

    let mut max_rel_error = 0.0;
    let mut worst = String::from("none");
    let mut checked = 0usize;
    for (err, loc) in results.into_iter().chain(input_results) {
        checked += 1;
        if err > max_rel_error {
            max_rel_error = err;
            worst = loc;
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        checked,
        tolerance: options.tolerance,
        passed: max_rel_error <= options.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::graclus_coarsen;
    use crate::graph::rand_graph;
    use crate::nn::NetworkSpec;

    fn check_network(
        spec: &str,
        n: usize,
        seed: u64,
        options: &GradCheckOptions,
    ) -> GradCheckReport {
        let g = rand_graph(n, 0.5, seed).unwrap();
        let spec = NetworkSpec::parse(spec).unwrap();
        let levels = spec.num_pools().max(1);
        let h = graclus_coarsen(&g, levels, seed).unwrap();
        let net = Network::from_hierarchy(spec, &h).unwrap();
        let params = random_params_for_gradcheck(&net, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 77);
        let input = Array2::from_shape_fn((net.padded_sizes[0], 1), |_| rng.gen_range(-1.0..1.0));
        grad_check(&net, &params, &input, 1, options).unwrap()
    }

    #[test]
    fn linear_fc_network_is_exact() {
        // FC-only network: gradients match to rounding
        let g = rand_graph(6, 0.5, 2).unwrap();
        let h = graclus_coarsen(&g, 1, 2).unwrap();
        let spec = NetworkSpec::parse("FC3").unwrap();
        let net = Network::from_hierarchy(spec, &h).unwrap();
        let params = random_params_for_gradcheck(&net, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = Array2::from_shape_fn((net.padded_sizes[0], 1), |_| rng.gen_range(-1.0..1.0));
        let report = grad_check(
            &net,
            &params,
            &input,
            0,
            &GradCheckOptions {
                tolerance: 1e-8,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.passed, "{report}");
    }

    #[test]
    fn small_gc_network_passes_exhaustively() {
        let options = GradCheckOptions {
            l2_coef: 5e-4,
            ..Default::default()
        };
        let report = check_network("GC4M3 - GC4M2 - P2 - GC6M3 - P2 - FC3", 10, 11, &options);
        assert!(report.passed, "{report}");
    }

    #[test]
    fn sabotaged_gradient_fails() {
        let options = GradCheckOptions {
            sabotage: Some(3),
            ..Default::default()
        };
        let report = check_network("GC4M2 - P2 - FC3", 8, 4, &options);
        assert!(
            !report.passed,
            "negative control unexpectedly passed: {report}"
        );
    }
}
