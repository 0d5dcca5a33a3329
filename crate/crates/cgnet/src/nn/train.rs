//! Mini-batch training loop and evaluation.

use super::layers::{l2_grads, l2_loss};
use super::network::{GraphSample, Network};
use super::optim::{adam_step, AdamState};
use super::ModelParams;
use crate::error::{Error, Result};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Training hyperparameters. Learning rate decays multiplicatively per epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub l2_coef: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            initial_lr: 0.001,
            lr_decay: 0.95,
            l2_coef: 5e-4,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!(
                "lr decay {} outside (0, 1]",
                self.lr_decay
            )));
        }
        if self.l2_coef < 0.0 {
            return Err(Error::Config("l2 coefficient must be >= 0".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.initial_lr * self.lr_decay.powi(epoch as i32)
    }
}

/// Per-epoch training record, serialized as one JSON line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
}

/// Shuffled mini-batch training with Adam. Gradients are averaged over the
/// batch in fixed sample order and the L2 term is added once per step, so
/// the result is deterministic for a given seed.
pub fn train(
    network: &Network,
    params: &mut ModelParams,
    samples: &[GraphSample],
    config: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Domain("training needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(params);
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        let lr = config.lr_at_epoch(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut grads = params.zeros_like();
            let mut batch_ce = 0.0;
            for &idx in batch {
                let sample = &samples[idx];
                let (loss, logits, sample_grads, _) = network
                    .forward_backward(params, sample)
                    .map_err(|e| Error::Numeric(format!("epoch {epoch}, sample {idx}: {e}")))?;
                batch_ce += loss;
                if argmax(&logits) == sample.label {
                    correct += 1;
                }
                for (acc, g) in grads
                    .tensor_slices_mut()
                    .iter_mut()
                    .zip(sample_grads.tensor_slices())
                {
                    for (a, &b) in acc.iter_mut().zip(g.iter()) {
                        *a += b;
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for slice in grads.tensor_slices_mut() {
                for v in slice.iter_mut() {
                    *v *= inv;
                }
            }
            l2_grads(params, config.l2_coef, &mut grads);
            loss_sum += batch_ce * inv + l2_loss(params, config.l2_coef);
            adam_step(params, &grads, &mut state, lr)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        }
        let num_batches = samples.len().div_ceil(config.batch_size);
        metrics.push(EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / num_batches as f64,
            train_accuracy: correct as f64 / samples.len() as f64,
        });
    }
    Ok(metrics)
}

/// Fraction of samples whose argmax logit matches the label; logit ties
/// resolve to the smallest class index.
pub fn evaluate(network: &Network, params: &ModelParams, samples: &[GraphSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("evaluation needs at least one sample".into()));
    }
    let mut correct = 0usize;
    for sample in samples {
        let trace = network.forward(params, &sample.input)?;
        if argmax(&trace.logits) == sample.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Index of the largest entry; ties go to the smallest index.
pub(crate) fn argmax(logits: &Array1<f64>) -> usize {
    let mut best = 0usize;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::graclus_coarsen;
    use crate::graph::rand_graph;
    use crate::nn::NetworkSpec;
    use ndarray::{array, Array2};

    fn tiny_network(classes: usize) -> Network {
        let g = rand_graph(8, 0.7, 1).unwrap();
        let h = graclus_coarsen(&g, 1, 1).unwrap();
        let spec = NetworkSpec::parse(&format!("GC4M3 - P2 - FC{classes}")).unwrap();
        Network::from_hierarchy(spec, &h).unwrap()
    }

    #[test]
    fn lr_schedule_formula() {
        let config = TrainConfig::default();
        assert_eq!(config.lr_at_epoch(0), 0.001);
        assert!((config.lr_at_epoch(1) - 0.00095).abs() < 1e-12);
    }

    #[test]
    fn single_sample_memorization_and_decreasing_loss() {
        let net = tiny_network(2);
        let mut params = net.init_params(3).unwrap();
        let sample = GraphSample {
            input: Array2::from_shape_fn((net.padded_sizes[0], 1), |(i, _)| {
                (i as f64 * 0.9).sin() + 0.2
            }),
            label: 1,
        };
        let config = TrainConfig {
            epochs: 30,
            l2_coef: 0.0,
            batch_size: 1,
            seed: 0,
            ..TrainConfig::default()
        };
        let metrics = train(&net, &mut params, std::slice::from_ref(&sample), &config).unwrap();
        // strictly decreasing loss over the first five epochs at lr 0.001
        for w in metrics[..5].windows(2) {
            assert!(w[1].train_loss < w[0].train_loss, "{:?}", &metrics[..5]);
        }
        // enough further epochs memorize the single sample
        let long = TrainConfig {
            epochs: 2000,
            lr_decay: 1.0,
            ..config
        };
        let metrics = train(&net, &mut params, std::slice::from_ref(&sample), &long).unwrap();
        assert_eq!(
            evaluate(&net, &params, std::slice::from_ref(&sample)).unwrap(),
            1.0
        );
        assert_eq!(metrics.last().unwrap().train_accuracy, 1.0);
    }

    #[test]
    fn evaluate_constant_model_and_argmax_ties() {
        let net = tiny_network(4);
        let params = {
            let mut p = net.init_params(0).unwrap();
            for s in p.tensor_slices_mut() {
                for v in s.iter_mut() {
                    *v = 0.0;
                }
            }
            p
        };
        // all-zero model predicts class 0 via the tie rule
        let samples: Vec<GraphSample> = (0..4)
            .map(|label| GraphSample {
                input: Array2::from_elem((net.padded_sizes[0], 1), label as f64),
                label,
            })
            .collect();
        let acc = evaluate(&net, &params, &samples).unwrap();
        assert_eq!(acc, 0.25); // only the label-0 sample matches
        assert_eq!(argmax(&array![1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn random_logit_accuracy_near_chance() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let classes = 40;
        let trials = 20000;
        let mut correct = 0usize;
        for _ in 0..trials {
            let label = rng.gen_range(0..classes);
            let logits = Array1::from_shape_fn(classes, |_| rng.gen_range(-1.0..1.0));
            if argmax(&logits) == label {
                correct += 1;
            }
        }
        let acc = correct as f64 / trials as f64;
        // expected 1/40 = 0.025, sigma ~ 0.0011 over 20000 trials
        assert!((acc - 0.025).abs() < 0.005, "accuracy {acc}");
    }
}
