//! Recordings, segmentation, feature extraction, normalization and splits.

mod container;
mod synth;

pub use container::{load_recordings, write_container};
pub use synth::synth_dataset;

use crate::dsp::{band_entropy, band_power, decompose, FirFilter};
use crate::error::{Error, Result};
use crate::layout::NUM_ELECTRODES;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Canonical sampling rate of the preprocessed recordings.
pub const CANONICAL_FS: f64 = 128.0;
/// Trial length in seconds.
pub const TRIAL_SECONDS: usize = 60;
/// Pre-trial baseline length in seconds.
pub const BASELINE_SECONDS: usize = 3;
/// Segment window in seconds.
pub const WINDOW_SECONDS: usize = 3;
/// Segment stride in seconds.
pub const STRIDE_SECONDS: usize = 1;

/// One trial: raw samples (channels × time, stored as the container's f32),
/// its class label and optional pre-trial baseline.
#[derive(Debug, Clone)]
pub struct Recording {
    pub subject: u32,
    pub video_id: u32,
    pub samples: Array2<f32>,
    pub baseline: Option<Array2<f32>>,
}

/// A loaded dataset: channel order, sampling rate and all trials.
#[derive(Debug, Clone)]
pub struct RecordingSet {
    pub fs: f64,
    pub channels: Vec<String>,
    pub recordings: Vec<Recording>,
}

/// One graph signal: 256 features in band-major vertex order
/// (`v = band * 32 + electrode`) plus provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub subject: u32,
    pub segment_index: usize,
}

/// Which scalar is extracted per (electrode, band) vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Power,
    Entropy,
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureKind::Power => write!(f, "power"),
            FeatureKind::Entropy => write!(f, "entropy"),
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(FeatureKind::Power),
            "entropy" => Ok(FeatureKind::Entropy),
            other => Err(Error::Parse(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Cuts a trial into overlapping windows: `floor((T - window)/stride) + 1`
/// segments of channels × window samples, converted to f64.
pub fn segment_trials(
    recording: &Recording,
    fs: f64,
    window_s: usize,
    stride_s: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let window = (window_s as f64 * fs) as usize;
    let stride = (stride_s as f64 * fs) as usize;
    let total = recording.samples.ncols();
    if total < window {
        return Err(Error::Domain(format!(
            "trial of {total} samples is shorter than the {window}-sample window"
        )));
    }
    let count = (total - window) / stride + 1;
    let channels = recording.samples.nrows();
    let mut segments = Vec::with_capacity(count);
    for s in 0..count {
        let start = s * stride;
        let mut seg = Vec::with_capacity(channels);
        for ch in 0..channels {
            seg.push(
                recording
                    .samples
                    .row(ch)
                    .slice(ndarray::s![start..start + window])
                    .iter()
                    .map(|&v| v as f64)
                    .collect::<Vec<f64>>(),
            );
        }
        segments.push(seg);
    }
    Ok(segments)
}

/// Per-vertex feature of one already-decomposed segment.
fn segment_features(
    segment: &[Vec<f64>],
    filters: &[FirFilter],
    kind: FeatureKind,
    entropy_bins: usize,
) -> Result<Vec<f64>> {
    let decomposed = decompose(segment, filters)?;
    let channels = decomposed.len();
    let bands = filters.len();
    let mut features = vec![0.0; bands * channels];
    for (ch, per_band) in decomposed.iter().enumerate() {
        for (b, bs) in per_band.iter().enumerate() {
            let v = match kind {
                FeatureKind::Power => band_power(&bs.samples)?,
                FeatureKind::Entropy => band_entropy(&bs.samples, entropy_bins)?,
            };
            features[b * channels + ch] = v;
        }
    }
    Ok(features)
}

/// Extracts every segment's graph signal for one recording. When
/// `subtract_baseline` is set, the recording's baseline features are
/// subtracted per (electrode, band).
pub fn extract_features(
    recording: &Recording,
    fs: f64,
    filters: &[FirFilter],
    kind: FeatureKind,
    entropy_bins: usize,
    subtract_baseline: bool,
) -> Result<Vec<FeatureSample>> {
    let segments = segment_trials(recording, fs, WINDOW_SECONDS, STRIDE_SECONDS)?;
    let baseline_features = if subtract_baseline {
        let baseline = recording.baseline.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "baseline subtraction requested but trial (subject {}, video {}) has no baseline",
                recording.subject, recording.video_id
            ))
        })?;
        let channels = baseline.nrows();
        let seg: Vec<Vec<f64>> = (0..channels)
            .map(|ch| baseline.row(ch).iter().map(|&v| v as f64).collect())
            .collect();
        Some(segment_features(&seg, filters, kind, entropy_bins)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(segments.len());
    for (idx, segment) in segments.iter().enumerate() {
        let mut features = segment_features(segment, filters, kind, entropy_bins)?;
        if let Some(base) = &baseline_features {
            for (f, b) in features.iter_mut().zip(base) {
                *f -= b;
            }
        }
        out.push(FeatureSample {
            features,
            label: recording.video_id as usize,
            subject: recording.subject,
            segment_index: idx,
        });
    }
    Ok(out)
}

/// Per-feature mean and standard deviation of the training split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Standardizes every feature with statistics from `train` only; features
/// with vanishing training variance are zeroed everywhere.
pub fn zscore_normalize(
    train: &mut [FeatureSample],
    others: &mut [FeatureSample],
) -> Result<FeatureStats> {
    if train.len() < 2 {
        return Err(Error::Domain(
            "normalization needs at least two training samples".into(),
        ));
    }
    let dim = train[0].features.len();
    if train
        .iter()
        .chain(others.iter())
        .any(|s| s.features.len() != dim)
    {
        return Err(Error::Shape("feature vectors disagree on dimension".into()));
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in train.iter() {
        for (m, &v) in mean.iter_mut().zip(&s.features) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut std = vec![0.0; dim];
    for s in train.iter() {
        for (sd, (&v, &m)) in std.iter_mut().zip(s.features.iter().zip(&mean)) {
            *sd += (v - m) * (v - m);
        }
    }
    for sd in std.iter_mut() {
        *sd = (*sd / n).sqrt();
    }
    let apply = |s: &mut FeatureSample| {
        for ((v, &m), &sd) in s.features.iter_mut().zip(&mean).zip(&std) {
            *v = if sd < 1e-12 { 0.0 } else { (*v - m) / sd };
        }
    };
    train.iter_mut().for_each(apply);
    others.iter_mut().for_each(apply);
    Ok(FeatureStats { mean, std })
}

/// Disjoint train/test indices covering every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded stratified split: the train share of each class follows largest-
/// remainder apportionment toward `round(ratio * total)`, then each class is
/// shuffled independently. Deterministic for a given seed.
pub fn split(labels: &[usize], ratio: f64, seed: u64) -> Result<SplitIndices> {
    if labels.len() < 2 {
        return Err(Error::Domain("splitting needs at least two samples".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &label) in labels.iter().enumerate() {
        per_class[label].push(i);
    }
    let total_train = (ratio * labels.len() as f64).round() as usize;
    let mut base: Vec<usize> = Vec::with_capacity(num_classes);
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for (c, members) in per_class.iter().enumerate() {
        let exact = ratio * members.len() as f64;
        let b = exact.floor() as usize;
        base.push(b);
        if b < members.len() {
            remainders.push((exact - b as f64, c));
        }
    }
    let mut deficit = total_train.saturating_sub(base.iter().sum::<usize>());
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut take = base;
    // two passes cover the worst case where early classes are already full
    for _ in 0..2 {
        for &(_, c) in &remainders {
            if deficit == 0 {
                break;
            }
            if take[c] < per_class[c].len() {
                take[c] += 1;
                deficit -= 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, members) in per_class.iter().enumerate() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..take[c]]);
        test.extend_from_slice(&members[take[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Splits at trial granularity: all of a trial's segments land on one side.
/// `trial_of[i]` maps sample `i` to its trial; trials are stratified by
/// label like [`split`].
pub fn split_by_trial(
    labels: &[usize],
    trial_of: &[usize],
    ratio: f64,
    seed: u64,
) -> Result<SplitIndices> {
    if labels.len() != trial_of.len() {
        return Err(Error::Shape("labels and trial map disagree".into()));
    }
    let num_trials = trial_of.iter().max().map_or(0, |m| m + 1);
    let mut trial_label = vec![usize::MAX; num_trials];
    for (i, &t) in trial_of.iter().enumerate() {
        trial_label[t] = labels[i];
    }
    if trial_label.contains(&usize::MAX) {
        return Err(Error::Domain("some trial has no samples".into()));
    }
    let trial_split = split(&trial_label, ratio, seed)?;
    let train_set: std::collections::HashSet<usize> = trial_split.train.into_iter().collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, &t) in trial_of.iter().enumerate() {
        if train_set.contains(&t) {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    Ok(SplitIndices { train, test })
}

/// Validates that a channel list is the canonical 32-electrode set.
pub fn validate_channels(channels: &[String]) -> Result<()> {
    if channels.len() != NUM_ELECTRODES {
        return Err(Error::Load(format!(
            "expected {NUM_ELECTRODES} channels, found {}",
            channels.len()
        )));
    }
    let known: std::collections::HashSet<&str> =
        crate::layout::DEAP_CHANNELS.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    for name in channels {
        if !known.contains(name.as_str()) {
            return Err(Error::Load(format!("unknown channel name {name:?}")));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Load(format!("duplicate channel name {name:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{canonical_filters, CANONICAL_ORDER};

    fn recording(channels: usize, samples: usize) -> Recording {
        Recording {
            subject: 0,
            video_id: 3,
            samples: Array2::zeros((channels, samples)),
            baseline: None,
        }
    }

    #[test]
    fn segmentation_counts() {
        let fs = CANONICAL_FS;
        let r = recording(32, 60 * 128);
        assert_eq!(segment_trials(&r, fs, 3, 1).unwrap().len(), 58);
        let r = recording(2, 3 * 128);
        assert_eq!(segment_trials(&r, fs, 3, 1).unwrap().len(), 1);
        let r = recording(2, 4 * 128);
        assert_eq!(segment_trials(&r, fs, 3, 1).unwrap().len(), 2);
        let r = recording(2, 2 * 128);
        assert!(segment_trials(&r, fs, 3, 1).is_err());
    }

    #[test]
    fn segmentation_count_formula_property() {
        let fs = 8.0; // small synthetic rate keeps the test cheap
        for total_s in 3..40 {
            let r = recording(1, total_s * 8);
            for (w, s) in [(3usize, 1usize), (5, 2), (4, 4)] {
                if total_s < w {
                    continue;
                }
                let segs = segment_trials(&r, fs, w, s).unwrap();
                assert_eq!(segs.len(), (total_s - w) / s + 1, "T={total_s} w={w} s={s}");
                assert_eq!(segs[0][0].len(), w * 8);
            }
        }
    }

    #[test]
    fn zero_recording_gives_zero_features_both_kinds() {
        let filters = canonical_filters(CANONICAL_FS, CANONICAL_ORDER).unwrap();
        let r = recording(32, 60 * 128);
        for kind in [FeatureKind::Power, FeatureKind::Entropy] {
            let fs = extract_features(&r, CANONICAL_FS, &filters, kind, 16, false).unwrap();
            assert_eq!(fs.len(), 58);
            assert_eq!(fs[0].features.len(), 256);
            assert!(fs.iter().all(|s| s.features.iter().all(|&v| v == 0.0)));
            assert!(fs.iter().all(|s| s.label == 3));
        }
    }

    #[test]
    fn baseline_subtraction_and_missing_baseline() {
        let filters = canonical_filters(CANONICAL_FS, CANONICAL_ORDER).unwrap();
        let mut r = recording(32, 10 * 128);
        assert!(matches!(
            extract_features(&r, CANONICAL_FS, &filters, FeatureKind::Power, 16, true),
            Err(Error::Config(_))
        ));
        // constant-offset trial with an identical baseline: power features
        // cancel to the baseline power difference
        r.samples.fill(0.5);
        r.baseline = Some(Array2::from_elem((32, 384), 0.5));
        let plain =
            extract_features(&r, CANONICAL_FS, &filters, FeatureKind::Power, 16, false).unwrap();
        let subtracted =
            extract_features(&r, CANONICAL_FS, &filters, FeatureKind::Power, 16, true).unwrap();
        for (p, s) in plain[0].features.iter().zip(&subtracted[0].features) {
            assert!((s - 0.0).abs() < 1e-12 || (p - s).abs() > 0.0 || *p == 0.0);
            assert!(s.abs() < 1e-9, "baseline did not cancel: {s}");
        }
    }

    #[test]
    fn zscore_examples() {
        let mk = |v: f64| FeatureSample {
            features: vec![v, 7.0],
            label: 0,
            subject: 0,
            segment_index: 0,
        };
        let mut train = vec![mk(1.0), mk(3.0)];
        let mut test = vec![mk(2.0)];
        let stats = zscore_normalize(&mut train, &mut test).unwrap();
        assert_eq!(train[0].features[0], -1.0);
        assert_eq!(train[1].features[0], 1.0);
        assert_eq!(test[0].features[0], 0.0);
        // constant column is zeroed everywhere
        assert_eq!(train[0].features[1], 0.0);
        assert_eq!(test[0].features[1], 0.0);
        assert_eq!(stats.mean[1], 7.0);
    }

    #[test]
    fn zscore_train_statistics() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut train: Vec<FeatureSample> = (0..50)
            .map(|i| FeatureSample {
                features: (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                label: i % 3,
                subject: 0,
                segment_index: i,
            })
            .collect();
        let mut none = Vec::new();
        zscore_normalize(&mut train, &mut none).unwrap();
        for f in 0..8 {
            let mean: f64 = train.iter().map(|s| s.features[f]).sum::<f64>() / 50.0;
            let var: f64 =
                train.iter().map(|s| s.features[f].powi(2)).sum::<f64>() / 50.0 - mean * mean;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn split_examples_and_partition() {
        let labels: Vec<usize> = (0..100).map(|i| i % 5).collect();
        let s = split(&labels, 0.8, 1).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.test.len(), 20);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        // single class of 10 -> 8/2
        let labels = vec![0usize; 10];
        let s = split(&labels, 0.8, 2).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (8, 2));
        // determinism
        assert_eq!(
            split(&labels, 0.8, 7).unwrap(),
            split(&labels, 0.8, 7).unwrap()
        );
        // global share stays within one sample even with many classes
        let labels: Vec<usize> = (0..40).flat_map(|c| std::iter::repeat_n(c, 58)).collect();
        let s = split(&labels, 0.8, 3).unwrap();
        let want = (0.8 * labels.len() as f64).round() as isize;
        assert!((s.train.len() as isize - want).abs() <= 1);
    }

    #[test]
    fn trial_split_keeps_trials_together() {
        // 6 trials x 4 segments, 3 classes
        let trial_of: Vec<usize> = (0..24).map(|i| i / 4).collect();
        let labels: Vec<usize> = trial_of.iter().map(|t| t % 3).collect();
        let s = split_by_trial(&labels, &trial_of, 0.8, 5).unwrap();
        let train_trials: std::collections::HashSet<usize> =
            s.train.iter().map(|&i| trial_of[i]).collect();
        let test_trials: std::collections::HashSet<usize> =
            s.test.iter().map(|&i| trial_of[i]).collect();
        assert!(train_trials.is_disjoint(&test_trials));
        assert_eq!(s.train.len() + s.test.len(), 24);
    }

    #[test]
    fn channel_validation() {
        let good: Vec<String> = crate::layout::DEAP_CHANNELS
            .iter()
            .map(|s| s.to_string())
            .collect();
        validate_channels(&good).unwrap();
        let mut bad = good.clone();
        bad[3] = "XX7".into();
        assert!(matches!(validate_channels(&bad), Err(Error::Load(_))));
        let mut dup = good.clone();
        dup[4] = dup[5].clone();
        assert!(matches!(validate_channels(&dup), Err(Error::Load(_))));
    }
}
