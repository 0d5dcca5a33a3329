//! Band decomposition of raw channel signals.
//!
//! Eight canonical EEG frequency bands, linear-phase FIR band-pass filters
//! (Hamming-windowed sinc, gain-normalized at the band midpoint), and the
//! per-band power and entropy vertex features.

use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::path::Path;

/// One frequency band with inclusive edges in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDef {
    pub name: &'static str,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandDef {
    pub fn midpoint_hz(&self) -> f64 {
        0.5 * (self.low_hz + self.high_hz)
    }
}

/// Number of canonical bands.
pub const NUM_BANDS: usize = 8;

/// The canonical eight-band table: delta through gamma with alpha and beta
/// split into sub-bands.
pub fn canonical_bands() -> [BandDef; NUM_BANDS] {
    [
        BandDef {
            name: "delta",
            low_hz: 0.0,
            high_hz: 3.0,
        },
        BandDef {
            name: "theta",
            low_hz: 4.0,
            high_hz: 7.0,
        },
        BandDef {
            name: "low_alpha",
            low_hz: 8.0,
            high_hz: 10.0,
        },
        BandDef {
            name: "high_alpha",
            low_hz: 10.0,
            high_hz: 12.0,
        },
        BandDef {
            name: "low_beta",
            low_hz: 13.0,
            high_hz: 16.0,
        },
        BandDef {
            name: "mid_beta",
            low_hz: 17.0,
            high_hz: 20.0,
        },
        BandDef {
            name: "high_beta",
            low_hz: 21.0,
            high_hz: 29.0,
        },
        BandDef {
            name: "gamma",
            low_hz: 31.0,
            high_hz: 50.0,
        },
    ]
}

/// Canonical FIR order (order + 1 = 48 taps).
pub const CANONICAL_ORDER: usize = 47;

/// A designed (or loaded) linear-phase FIR band-pass filter.
#[derive(Debug, Clone)]
pub struct FirFilter {
    pub coefficients: Vec<f64>,
    pub order: usize,
    pub band: BandDef,
    pub fs: f64,
}

impl FirFilter {
    /// Complex frequency-response magnitude at `f` Hz.
    pub fn gain_at(&self, f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &c) in self.coefficients.iter().enumerate() {
            let phi = -2.0 * PI * f / self.fs * i as f64;
            re += c * phi.cos();
            im += c * phi.sin();
        }
        (re * re + im * im).sqrt()
    }
}

fn validate_band(band: &BandDef, fs: f64) -> Result<()> {
    if !(band.low_hz >= 0.0 && band.low_hz < band.high_hz && band.high_hz <= fs / 2.0) {
        return Err(Error::Config(format!(
            "invalid band edges for {}: [{}, {}] Hz at fs={} Hz",
            band.name, band.low_hz, band.high_hz, fs
        )));
    }
    Ok(())
}

/// Designs a Hamming-windowed sinc band-pass filter for `band`.
///
/// A band with `low_hz == 0` is realized as a low-pass. When the lower
/// stopband (everything below `low_hz / 2`) is closer to the band edge than
/// the window's transition width allows, the lower design cutoff is shifted
/// up just enough to honor the -20 dB stopband contract. Taps are scaled for
/// unit gain at the band midpoint.
pub fn design_bandpass(band: &BandDef, fs: f64, order: usize) -> Result<FirFilter> {
    validate_band(band, fs)?;
    if order < 2 {
        return Err(Error::Config(format!(
            "FIR order must be >= 2, got {order}"
        )));
    }
    let taps = order + 1;
    let alpha = (taps - 1) as f64 / 2.0;
    let f_hi = band.high_hz / fs;

    // Lower design cutoff, possibly shifted up for stopband clearance.
    let clearance = 1.4 * fs / taps as f64;
    let mut f_lo_hz = band.low_hz;
    if band.low_hz > 0.0 {
        let shift = (clearance - band.low_hz / 2.0).max(0.0);
        f_lo_hz += shift;
        if f_lo_hz >= band.high_hz {
            return Err(Error::Config(format!(
                "band {} is too narrow for order {order} at fs={fs}",
                band.name
            )));
        }
    }
    let f_lo = f_lo_hz / fs;

    let sinc_lp = |fc: f64, x: f64| -> f64 {
        if x == 0.0 {
            2.0 * fc
        } else {
            (2.0 * PI * fc * x).sin() / (PI * x)
        }
    };
    let mut coeffs = Vec::with_capacity(taps);
    for i in 0..taps {
        let x = i as f64 - alpha;
        let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos();
        let ideal = if band.low_hz <= 0.0 {
            sinc_lp(f_hi, x)
        } else {
            sinc_lp(f_hi, x) - sinc_lp(f_lo, x)
        };
        coeffs.push(w * ideal);
    }
    let mut filter = FirFilter {
        coefficients: coeffs,
        order,
        band: band.clone(),
        fs,
    };
    let mid_gain = filter.gain_at(band.midpoint_hz());
    if mid_gain < 1e-12 {
        return Err(Error::Numeric(format!(
            "degenerate midpoint gain for band {}",
            band.name
        )));
    }
    for c in filter.coefficients.iter_mut() {
        *c /= mid_gain;
    }
    Ok(filter)
}

/// Loads filter taps from a text file (one real tap per line) for `band`.
///
/// The tap count determines the order; coefficients must be symmetric
/// (linear phase). Intended for externally designed equiripple taps.
pub fn load_fir_coeffs(path: &Path, band: &BandDef, fs: f64) -> Result<FirFilter> {
    validate_band(band, fs)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Load(format!("cannot read {}: {e}", path.display())))?;
    let mut coefficients = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::Load(format!(
                "{}:{}: not a real number: {line:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        coefficients.push(v);
    }
    if coefficients.len() < 3 {
        return Err(Error::Load(format!(
            "{}: expected at least 3 taps, found {}",
            path.display(),
            coefficients.len()
        )));
    }
    let order = coefficients.len() - 1;
    for i in 0..coefficients.len() {
        if (coefficients[i] - coefficients[order - i]).abs() > 1e-12 {
            return Err(Error::Load(format!(
                "{}: taps are not symmetric at index {i} (linear phase required)",
                path.display()
            )));
        }
    }
    Ok(FirFilter {
        coefficients,
        order,
        band: band.clone(),
        fs,
    })
}

/// One channel's signal restricted to a band.
#[derive(Debug, Clone)]
pub struct BandSignal {
    pub samples: Vec<f64>,
    pub band: BandDef,
    pub channel: usize,
}

/// Filters `x`, compensating the group delay so the output aligns with the
/// input: `y[n] = sum_i c[i] * x[n + order/2 - i]` with zero padding at the
/// borders. Output length equals input length.
pub fn apply_fir(x: &[f64], f: &FirFilter) -> Result<Vec<f64>> {
    if x.len() <= f.order {
        return Err(Error::Domain(format!(
            "signal of {} samples is too short for FIR order {}",
            x.len(),
            f.order
        )));
    }
    let d = f.order / 2;
    let n = x.len();
    let c = &f.coefficients;
    let mut y = vec![0.0; n];
    for (k, out) in y.iter_mut().enumerate() {
        // j = k + d - i ranges over a window of the input
        let i_min = (k + d).saturating_sub(n - 1);
        let i_max = (k + d).min(f.order);
        let mut acc = 0.0;
        for i in i_min..=i_max {
            acc += c[i] * x[k + d - i];
        }
        *out = acc;
    }
    Ok(y)
}

/// Mean-square power of a signal.
pub fn band_power(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Domain("band_power of an empty signal".into()));
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

/// Default histogram bin count for [`band_entropy`].
pub const DEFAULT_ENTROPY_BINS: usize = 16;

/// Shannon entropy (nats) of the amplitude histogram of `x` over `bins`
/// equal-width bins spanning `[min(x), max(x)]`. A constant signal has
/// entropy 0; the maximum is `ln(bins)`.
pub fn band_entropy(x: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Config(format!(
            "entropy needs >= 2 bins, got {bins}"
        )));
    }
    if x.is_empty() {
        return Err(Error::Domain("band_entropy of an empty signal".into()));
    }
    let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range <= 0.0 {
        return Ok(0.0);
    }
    let mut counts = vec![0usize; bins];
    for &v in x {
        let idx = (((v - min) / range) * bins as f64) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let n = x.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    Ok(h)
}

/// Applies every filter to every channel. `segment` is channels × samples,
/// the result is channels × bands of delay-compensated band signals.
pub fn decompose(segment: &[Vec<f64>], filters: &[FirFilter]) -> Result<Vec<Vec<BandSignal>>> {
    if segment.is_empty() {
        return Err(Error::Domain("decompose of an empty segment".into()));
    }
    let mut out = Vec::with_capacity(segment.len());
    for (ch, x) in segment.iter().enumerate() {
        let mut per_band = Vec::with_capacity(filters.len());
        for f in filters {
            per_band.push(BandSignal {
                samples: apply_fir(x, f)?,
                band: f.band.clone(),
                channel: ch,
            });
        }
        out.push(per_band);
    }
    Ok(out)
}

/// Designs the canonical eight filters at `fs`.
pub fn canonical_filters(fs: f64, order: usize) -> Result<Vec<FirFilter>> {
    canonical_bands()
        .iter()
        .map(|b| design_bandpass(b, fs, order))
        .collect()
}
