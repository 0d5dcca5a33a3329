//! Electrode geometry for the 32-channel cap.
//!
//! Positions are an idealized spherical 10-10 arrangement: the vertex sits at
//! the top of a unit sphere, the outer ring lies on the equator, and
//! intermediate electrodes are placed by great-circle interpolation between
//! their row's midline point and its equatorial end. This is an approximation
//! of real cap geometry, adequate for distance-based connectivity.

use crate::error::{Error, Result};

/// Number of electrodes in the canonical layout.
pub const NUM_ELECTRODES: usize = 32;

/// Electrode names and unit-sphere positions.
#[derive(Debug, Clone)]
pub struct ElectrodeLayout {
    pub names: Vec<String>,
    pub positions: Vec<[f64; 3]>,
}

/// The 32 EEG channel names in the dataset's channel order.
pub const DEAP_CHANNELS: [&str; NUM_ELECTRODES] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1",
    "Oz", "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4",
    "P8", "PO4", "O2",
];

fn equator(azimuth_deg: f64) -> [f64; 3] {
    // x toward the right ear, y toward the nasion, z up
    let a = azimuth_deg.to_radians();
    [a.cos(), a.sin(), 0.0]
}

fn midline(beta_deg: f64) -> [f64; 3] {
    // angle measured from the front equator point over the vertex
    let b = beta_deg.to_radians();
    [0.0, b.cos(), b.sin()]
}

fn slerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let omega = dot.clamp(-1.0, 1.0).acos();
    let so = omega.sin();
    let (ca, cb) = (((1.0 - t) * omega).sin() / so, (t * omega).sin() / so);
    [
        ca * a[0] + cb * b[0],
        ca * a[1] + cb * b[1],
        ca * a[2] + cb * b[2],
    ]
}

fn position(name: &str) -> [f64; 3] {
    let vertex = [0.0, 0.0, 1.0];
    match name {
        "Fp1" => equator(108.0),
        "Fp2" => equator(72.0),
        "AF3" => slerp(midline(22.5), equator(126.0), 0.5),
        "AF4" => slerp(midline(22.5), equator(54.0), 0.5),
        "F7" => equator(144.0),
        "F8" => equator(36.0),
        "Fz" => midline(45.0),
        "F3" => slerp(midline(45.0), equator(144.0), 0.5),
        "F4" => slerp(midline(45.0), equator(36.0), 0.5),
        "FC5" => slerp(midline(67.5), equator(162.0), 0.75),
        "FC1" => slerp(midline(67.5), equator(162.0), 0.25),
        "FC6" => slerp(midline(67.5), equator(18.0), 0.75),
        "FC2" => slerp(midline(67.5), equator(18.0), 0.25),
        "T7" => equator(180.0),
        "T8" => equator(0.0),
        "Cz" => vertex,
        "C3" => slerp(vertex, equator(180.0), 0.5),
        "C4" => slerp(vertex, equator(0.0), 0.5),
        "CP5" => slerp(midline(112.5), equator(198.0), 0.75),
        "CP1" => slerp(midline(112.5), equator(198.0), 0.25),
        "CP6" => slerp(midline(112.5), equator(342.0), 0.75),
        "CP2" => slerp(midline(112.5), equator(342.0), 0.25),
        "P7" => equator(216.0),
        "P8" => equator(324.0),
        "Pz" => midline(135.0),
        "P3" => slerp(midline(135.0), equator(216.0), 0.5),
        "P4" => slerp(midline(135.0), equator(324.0), 0.5),
        "PO3" => slerp(midline(157.5), equator(234.0), 0.5),
        "PO4" => slerp(midline(157.5), equator(306.0), 0.5),
        "O1" => equator(252.0),
        "O2" => equator(288.0),
        "Oz" => equator(270.0),
        other => panic!("unknown electrode {other}"),
    }
}

impl ElectrodeLayout {
    /// The built-in 32-channel layout.
    pub fn builtin() -> Self {
        let names: Vec<String> = DEAP_CHANNELS.iter().map(|s| s.to_string()).collect();
        let positions = DEAP_CHANNELS.iter().map(|n| position(n)).collect();
        ElectrodeLayout { names, positions }
    }

    /// The built-in positions reordered to a dataset's channel order. The
    /// names must be a permutation of the canonical 32.
    pub fn for_channels(channels: &[String]) -> Result<Self> {
        let canonical: std::collections::HashSet<&str> = DEAP_CHANNELS.iter().copied().collect();
        if channels.len() != NUM_ELECTRODES {
            return Err(Error::Config(format!(
                "expected {NUM_ELECTRODES} channels, got {}",
                channels.len()
            )));
        }
        let mut positions = Vec::with_capacity(channels.len());
        for name in channels {
            if !canonical.contains(name.as_str()) {
                return Err(Error::Config(format!("unknown electrode {name:?}")));
            }
            positions.push(position(name));
        }
        let layout = ElectrodeLayout {
            names: channels.to_vec(),
            positions,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Euclidean distance between electrodes `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Mean pairwise distance, the default distance-graph scale.
    pub fn mean_pairwise_distance(&self) -> f64 {
        let n = self.len();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += self.distance(i, j);
                count += 1;
            }
        }
        sum / count as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != NUM_ELECTRODES || self.positions.len() != NUM_ELECTRODES {
            return Err(Error::Config(format!(
                "layout must have exactly {NUM_ELECTRODES} electrodes"
            )));
        }
        for (name, p) in self.names.iter().zip(&self.positions) {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "electrode {name} is not on the unit sphere"
                )));
            }
        }
        Ok(())
    }
}
