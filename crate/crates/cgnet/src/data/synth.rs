//! Synthetic recordings for desk-scale verification.
//!
//! Each class is a binary code over (band, electrode-group) cells: a set bit
//! plants a strong band-limited oscillation on a fixed electrode group, on
//! top of white noise shared by every class. Class bit k toggles band `7-k`
//! (gamma downward), on electrodes 0-7 for the low three bits and 8-15 for
//! the next three, so band-power and band-entropy features separate the
//! classes by construction.

use super::{Recording, RecordingSet, BASELINE_SECONDS, TRIAL_SECONDS};
use crate::dsp::canonical_bands;
use crate::error::{Error, Result};
use crate::layout::{DEAP_CHANNELS, NUM_ELECTRODES};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Oscillation amplitude on active (band, electrode) cells.
const BOOST_AMPLITUDE: f64 = 6.0;
/// White-noise standard deviation on every channel.
const NOISE_SIGMA: f64 = 0.5;

/// Amplitude of band `b` on electrode `e` for class `c`.
fn class_amplitude(class: usize, band: usize, electrode: usize) -> f64 {
    for bit in 0..6 {
        if class >> bit & 1 == 1 {
            let boosted_band = 7 - (bit % 3);
            let group_start = if bit < 3 { 0 } else { 8 };
            if band == boosted_band && (group_start..group_start + 8).contains(&electrode) {
                return BOOST_AMPLITUDE;
            }
        }
    }
    0.0
}

/// Generates `num_classes * trials_per_class` 60-second trials at `fs`,
/// bitwise deterministic for a given seed. Subjects cycle within each class
/// so every subject sees every class.
pub fn synth_dataset(
    num_classes: usize,
    trials_per_class: usize,
    fs: f64,
    seed: u64,
) -> Result<RecordingSet> {
    if !(2..=40).contains(&num_classes) {
        return Err(Error::Config(format!(
            "num_classes {num_classes} outside 2..=40"
        )));
    }
    if trials_per_class < 1 {
        return Err(Error::Config("trials_per_class must be >= 1".into()));
    }
    if fs <= 0.0 {
        return Err(Error::Config(format!(
            "sampling rate {fs} must be positive"
        )));
    }
    let bands = canonical_bands();
    let midpoints: Vec<f64> = bands.iter().map(|b| b.midpoint_hz()).collect();
    let trial_len = (TRIAL_SECONDS as f64 * fs) as usize;
    let baseline_len = (BASELINE_SECONDS as f64 * fs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let mut recordings = Vec::with_capacity(num_classes * trials_per_class);
    for class in 0..num_classes {
        for trial in 0..trials_per_class {
            let mut phases = [[0.0f64; 8]; NUM_ELECTRODES];
            for row in phases.iter_mut() {
                for p in row.iter_mut() {
                    *p = rng.gen_range(0.0..2.0 * PI);
                }
            }
            let mut samples = Array2::zeros((NUM_ELECTRODES, trial_len));
            for e in 0..NUM_ELECTRODES {
                let amps: Vec<f64> = (0..8).map(|b| class_amplitude(class, b, e)).collect();
                for t in 0..trial_len {
                    let time = t as f64 / fs;
                    let mut v = noise.sample(&mut rng);
                    for (b, &a) in amps.iter().enumerate() {
                        if a != 0.0 {
                            v += a * (2.0 * PI * midpoints[b] * time + phases[e][b]).sin();
                        }
                    }
                    samples[[e, t]] = v as f32;
                }
            }
            let mut baseline = Array2::zeros((NUM_ELECTRODES, baseline_len));
            for e in 0..NUM_ELECTRODES {
                for t in 0..baseline_len {
                    baseline[[e, t]] = noise.sample(&mut rng) as f32;
                }
            }
            recordings.push(Recording {
                subject: trial as u32,
                video_id: class as u32,
                samples,
                baseline: Some(baseline),
            });
        }
    }
    Ok(RecordingSet {
        fs,
        channels: DEAP_CHANNELS.iter().map(|s| s.to_string()).collect(),
        recordings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{apply_fir, band_power, canonical_filters, CANONICAL_ORDER};

    #[test]
    fn shapes_and_determinism() {
        let a = synth_dataset(8, 5, 128.0, 3).unwrap();
        assert_eq!(a.recordings.len(), 40);
        assert_eq!(a.recordings[0].samples.dim(), (32, 7680));
        assert_eq!(a.recordings[0].baseline.as_ref().unwrap().dim(), (32, 384));
        let b = synth_dataset(8, 5, 128.0, 3).unwrap();
        for (x, y) in a.recordings.iter().zip(&b.recordings) {
            assert_eq!(x.samples, y.samples);
        }
        assert!(synth_dataset(1, 1, 128.0, 0).is_err());
        assert!(synth_dataset(41, 1, 128.0, 0).is_err());
    }

    #[test]
    fn two_classes_differ_only_in_gamma_on_first_group() {
        // class 0 vs class 1: the only amplitude difference is gamma on
        // electrodes 0-7; measure the generated output
        let set = synth_dataset(2, 3, 128.0, 11).unwrap();
        let filters = canonical_filters(128.0, CANONICAL_ORDER).unwrap();
        let gamma = &filters[7];
        let mut mean_power = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for r in &set.recordings {
            for e in 0..8 {
                let x: Vec<f64> = r.samples.row(e).iter().map(|&v| v as f64).collect();
                let y = apply_fir(&x, gamma).unwrap();
                mean_power[r.video_id as usize] += band_power(&y).unwrap();
                counts[r.video_id as usize] += 1;
            }
        }
        for c in 0..2 {
            mean_power[c] /= counts[c] as f64;
        }
        assert!(
            mean_power[1] >= 3.0 * mean_power[0],
            "gamma power ratio {} too small",
            mean_power[1] / mean_power[0]
        );
        // amplitudes elsewhere are identical by construction
        for e in 8..32 {
            for b in 0..8 {
                assert_eq!(class_amplitude(0, b, e), class_amplitude(1, b, e));
            }
        }
        for b in 0..7 {
            assert_eq!(class_amplitude(0, b, 0), class_amplitude(1, b, 0));
        }
    }

    #[test]
    fn eight_classes_have_distinct_profiles() {
        let profile = |c: usize| -> Vec<f64> {
            (0..8)
                .flat_map(|b| (0..32).map(move |e| class_amplitude(c, b, e)))
                .collect()
        };
        let profiles: Vec<Vec<f64>> = (0..8).map(profile).collect();
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert_ne!(profiles[i], profiles[j], "classes {i} and {j} collide");
            }
        }
    }
}
