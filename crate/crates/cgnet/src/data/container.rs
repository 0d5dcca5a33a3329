//! The on-disk recording container: a directory with `manifest.json` and one
//! raw little-endian f32 file per trial, channel-major (all samples of
//! channel 0, then channel 1, ...).

use super::{validate_channels, Recording, RecordingSet};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    sampling_rate_hz: f64,
    channels: Vec<String>,
    trials: Vec<TrialEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialEntry {
    subject: u32,
    video_id: u32,
    file: String,
    num_samples: usize,
    baseline_file: Option<String>,
}

fn read_raw(path: &Path, channels: usize, samples: usize, what: &str) -> Result<Array2<f32>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::Load(format!("{what}: cannot open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    let expected = channels * samples * 4;
    if bytes.len() != expected {
        return Err(Error::Load(format!(
            "{what}: {} holds {} bytes, expected {expected} ({channels} channels x {samples} samples)",
            path.display(),
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(channels * samples);
    for chunk in bytes.chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    Array2::from_shape_vec((channels, samples), data)
        .map_err(|e| Error::Load(format!("{what}: {e}")))
}

/// Loads and validates a recording container directory.
pub fn load_recordings(dir: &Path) -> Result<RecordingSet> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::Load(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Load(format!("{}: {e}", manifest_path.display())))?;
    if manifest.sampling_rate_hz <= 0.0 {
        return Err(Error::Load(format!(
            "invalid sampling rate {}",
            manifest.sampling_rate_hz
        )));
    }
    validate_channels(&manifest.channels)?;
    let channels = manifest.channels.len();
    let mut recordings = Vec::with_capacity(manifest.trials.len());
    for (idx, trial) in manifest.trials.iter().enumerate() {
        let what = format!(
            "trial {idx} (subject {}, video {})",
            trial.subject, trial.video_id
        );
        if trial.video_id > 39 {
            return Err(Error::Load(format!(
                "{what}: video_id {} out of 0..=39",
                trial.video_id
            )));
        }
        if trial.num_samples == 0 {
            return Err(Error::Load(format!("{what}: empty trial")));
        }
        let samples = read_raw(&dir.join(&trial.file), channels, trial.num_samples, &what)?;
        let baseline = match &trial.baseline_file {
            Some(f) => {
                let n = (super::BASELINE_SECONDS as f64 * manifest.sampling_rate_hz) as usize;
                Some(read_raw(&dir.join(f), channels, n, &what)?)
            }
            None => None,
        };
        recordings.push(Recording {
            subject: trial.subject,
            video_id: trial.video_id,
            samples,
            baseline,
        });
    }
    Ok(RecordingSet {
        fs: manifest.sampling_rate_hz,
        channels: manifest.channels,
        recordings,
    })
}

fn write_raw(path: &Path, data: &Array2<f32>) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 4);
    for row in data.rows() {
        for &v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Writes a recording set as a container directory. Refuses to clobber an
/// existing manifest unless `overwrite` is set.
pub fn write_container(dir: &Path, set: &RecordingSet, overwrite: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() && !overwrite {
        return Err(Error::Config(format!(
            "{} already exists; pass --overwrite to replace it",
            manifest_path.display()
        )));
    }
    let mut trials = Vec::with_capacity(set.recordings.len());
    for (idx, r) in set.recordings.iter().enumerate() {
        let file = format!("trial_{idx:04}.f32");
        write_raw(&dir.join(&file), &r.samples)?;
        let baseline_file = match &r.baseline {
            Some(b) => {
                let name = format!("baseline_{idx:04}.f32");
                write_raw(&dir.join(&name), b)?;
                Some(name)
            }
            None => None,
        };
        trials.push(TrialEntry {
            subject: r.subject,
            video_id: r.video_id,
            file,
            num_samples: r.samples.ncols(),
            baseline_file,
        });
    }
    let manifest = Manifest {
        sampling_rate_hz: set.fs,
        channels: set.channels.clone(),
        trials,
    };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(manifest_path, json)?;
    Ok(())
}
