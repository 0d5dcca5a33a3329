//! Graph construction: intra-band connectivity (correlation, distance,
//! random), top-k sparsification, and merging the eight band graphs into one
//! signal graph with optional inter-band edges.

mod laplacian;
mod spectral;

pub use laplacian::{
    cheb_basis, lambda_max, normalized_laplacian, scale_laplacian, NormalizedLaplacian,
};
pub use spectral::{spectral_filter_oracle, SpectralDecomposition, ORACLE_MAX_VERTICES};

use crate::error::{Error, Result};
use crate::layout::ElectrodeLayout;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Undirected weighted graph with non-negative weights and no self-loops.
/// Each edge is stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Builds a graph from an edge list, validating the type invariants.
    /// Zero-weight entries are dropped.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut list: Vec<(usize, usize, f64)> = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Config(format!(
                    "edge ({a},{b}) out of range for n={n}"
                )));
            }
            if a == b {
                return Err(Error::Config(format!("self-loop at vertex {a}")));
            }
            if w.is_nan() || w < 0.0 {
                return Err(Error::Config(format!(
                    "negative or NaN weight {w} on edge ({a},{b})"
                )));
            }
            if w > 0.0 {
                list.push((a.min(b), a.max(b), w));
            }
        }
        list.sort_unstable_by_key(|e| (e.0, e.1));
        if list
            .windows(2)
            .any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::Config("duplicate edge in edge list".into()));
        }
        Ok(WeightedGraph { n, edges: list })
    }

    pub fn empty(n: usize) -> Self {
        WeightedGraph {
            n,
            edges: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j, w)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Neighbor lists with weights.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    /// Weighted degree of every vertex.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(i, j, w) in &self.edges {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    /// Number of connected components (isolated vertices count).
    pub fn num_components(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut components = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            components += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }

    /// Writes the plain-text export: first line `n m`, then `i j w` per edge
    /// with `i < j` and weights at 9 significant digits.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.edges.len())?;
        for &(i, j, wt) in &self.edges {
            writeln!(w, "{} {} {:.8e}", i, j, wt)?;
        }
        Ok(())
    }
}

/// Intra-band graph construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMethod {
    Corr,
    Dist,
    Rand,
}

impl std::fmt::Display for GraphMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphMethod::Corr => write!(f, "corr"),
            GraphMethod::Dist => write!(f, "dist"),
            GraphMethod::Rand => write!(f, "rand"),
        }
    }
}

impl std::str::FromStr for GraphMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corr" => Ok(GraphMethod::Corr),
            "dist" => Ok(GraphMethod::Dist),
            "rand" => Ok(GraphMethod::Rand),
            other => Err(Error::Parse(format!("unknown graph method {other:?}"))),
        }
    }
}

/// How to build and merge the band graphs.
#[derive(Debug, Clone)]
pub struct GraphConfig {
    pub method: GraphMethod,
    /// Top-k degree for corr/dist sparsification.
    pub k: usize,
    /// Edge probability for random graphs.
    pub p: f64,
    /// Distance scale; `None` uses the layout's mean pairwise distance.
    pub sigma: Option<f64>,
    pub inter_band: bool,
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            method: GraphMethod::Dist,
            k: 4,
            p: 0.5,
            sigma: None,
            inter_band: true,
            seed: 0,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("graph k must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "edge probability {} outside [0, 1]",
                self.p
            )));
        }
        if let Some(s) = self.sigma {
            if s.is_nan() || s <= 0.0 {
                return Err(Error::Config(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Streaming accumulator for the mean absolute Pearson correlation between
/// channel pairs over trials. A trial contributes to a pair only when both
/// channels have nonzero variance in it.
#[derive(Debug, Clone)]
pub struct CorrAccumulator {
    channels: usize,
    any_var: Vec<bool>,
    sums: Vec<f64>,
    counts: Vec<u64>,
    trials: usize,
}

impl CorrAccumulator {
    pub fn new(channels: usize) -> Self {
        let pairs = channels * (channels - 1) / 2;
        CorrAccumulator {
            channels,
            any_var: vec![false; channels],
            sums: vec![0.0; pairs],
            counts: vec![0; pairs],
            trials: 0,
        }
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        // index into the upper triangle, i < j
        i * self.channels - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Adds one trial (channels × samples).
    #[allow(clippy::needless_range_loop)] // pair indices drive the triangle walk
    pub fn add_trial(&mut self, trial: &[Vec<f64>]) -> Result<()> {
        if trial.len() != self.channels {
            return Err(Error::Shape(format!(
                "trial has {} channels, accumulator expects {}",
                trial.len(),
                self.channels
            )));
        }
        let n = trial[0].len() as f64;
        let mut standardized: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.channels);
        for x in trial {
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if var > 0.0 {
                let inv = 1.0 / (var * n).sqrt();
                standardized.push(Some(x.iter().map(|v| (v - mean) * inv).collect()));
            } else {
                standardized.push(None);
            }
        }
        for (c, s) in standardized.iter().enumerate() {
            if s.is_some() {
                self.any_var[c] = true;
            }
        }
        for i in 0..self.channels {
            let Some(a) = &standardized[i] else { continue };
            for j in (i + 1)..self.channels {
                let Some(b) = &standardized[j] else { continue };
                let r: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let idx = self.pair_index(i, j);
                self.sums[idx] += r.abs().min(1.0);
                self.counts[idx] += 1;
            }
        }
        self.trials += 1;
        Ok(())
    }

    /// The averaged correlation graph.
    pub fn finish(&self) -> Result<WeightedGraph> {
        if self.trials == 0 {
            return Err(Error::Domain("corr_graph needs at least one trial".into()));
        }
        if self.channels < 2 {
            return Err(Error::Domain(
                "corr_graph needs at least two channels".into(),
            ));
        }
        if let Some(ch) = self.any_var.iter().position(|&v| !v) {
            return Err(Error::Domain(format!(
                "channel {ch} has zero variance in every trial; correlation undefined"
            )));
        }
        let mut edges = Vec::new();
        for i in 0..self.channels {
            for j in (i + 1)..self.channels {
                let idx = self.pair_index(i, j);
                if self.counts[idx] > 0 {
                    edges.push((i, j, self.sums[idx] / self.counts[idx] as f64));
                }
            }
        }
        WeightedGraph::from_edges(self.channels, edges)
    }
}

/// Mean absolute Pearson correlation between channels, over trials.
/// `band_signals` is trials × channels × samples.
pub fn corr_graph(band_signals: &[Vec<Vec<f64>>]) -> Result<WeightedGraph> {
    if band_signals.is_empty() {
        return Err(Error::Domain("corr_graph needs at least one trial".into()));
    }
    let channels = band_signals[0].len();
    if channels < 2 {
        return Err(Error::Domain(
            "corr_graph needs at least two channels".into(),
        ));
    }
    let mut acc = CorrAccumulator::new(channels);
    for trial in band_signals {
        acc.add_trial(trial)?;
    }
    acc.finish()
}

/// Gaussian distance weights `exp(-d^2 / sigma^2)` over electrode positions.
pub fn dist_graph(layout: &ElectrodeLayout, sigma: f64) -> Result<WeightedGraph> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let n = layout.len();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = layout.distance(i, j);
            if d < 1e-9 {
                return Err(Error::Config(format!(
                    "electrodes {} and {} share a position",
                    layout.names[i], layout.names[j]
                )));
            }
            edges.push((i, j, (-d * d / (sigma * sigma)).exp()));
        }
    }
    WeightedGraph::from_edges(n, edges)
}

/// Erdős–Rényi graph with unit weights; deterministic for a given seed.
pub fn rand_graph(n: usize, p: f64, seed: u64) -> Result<WeightedGraph> {
    if n < 1 {
        return Err(Error::Config("rand_graph needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    WeightedGraph::from_edges(n, edges)
}

/// Keeps edge (i, j) iff it is among the k largest-weight edges incident to
/// i or to j (ties broken toward the smaller neighbor index). Weights are
/// unchanged; the result stays symmetric.
pub fn sparsify_topk(g: &WeightedGraph, k: usize) -> Result<WeightedGraph> {
    if k < 1 {
        return Err(Error::Config("top-k sparsification needs k >= 1".into()));
    }
    let adj = g.adjacency();
    let mut keep = std::collections::HashSet::new();
    for (v, neighbors) in adj.iter().enumerate() {
        let mut ranked: Vec<(usize, f64)> = neighbors.clone();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(u, _) in ranked.iter().take(k) {
            keep.insert((v.min(u), v.max(u)));
        }
    }
    let edges = g
        .edges
        .iter()
        .filter(|&&(i, j, _)| keep.contains(&(i, j)))
        .cloned();
    WeightedGraph::from_edges(g.n, edges)
}

/// Stacks per-band graphs block-diagonally with the band-major vertex order
/// `v = band * n_e + electrode`. With `inter_band`, every pair of same-
/// electrode vertices across bands is joined by a weight-1 edge.
pub fn merge_bands(graphs: &[WeightedGraph], inter_band: bool) -> Result<WeightedGraph> {
    if graphs.is_empty() {
        return Err(Error::Config(
            "merge_bands needs at least one band graph".into(),
        ));
    }
    let n_e = graphs[0].n();
    if graphs.iter().any(|g| g.n() != n_e) {
        return Err(Error::Config("band graphs disagree on vertex count".into()));
    }
    let bands = graphs.len();
    let n = bands * n_e;
    let mut edges = Vec::new();
    for (b, g) in graphs.iter().enumerate() {
        let off = b * n_e;
        edges.extend(g.edges.iter().map(|&(i, j, w)| (off + i, off + j, w)));
    }
    if inter_band {
        for e in 0..n_e {
            for b1 in 0..bands {
                for b2 in (b1 + 1)..bands {
                    edges.push((b1 * n_e + e, b2 * n_e + e, 1.0));
                }
            }
        }
    }
    WeightedGraph::from_edges(n, edges)
}

/// Builds the merged signal graph per `config` for the canonical eight bands.
///
/// `band_signals`, required only for the correlation method, holds per band
/// the training trials as trials × channels × samples.
pub fn build_merged_graph(
    config: &GraphConfig,
    layout: &ElectrodeLayout,
    band_signals: Option<&[Vec<Vec<Vec<f64>>>]>,
    num_bands: usize,
) -> Result<WeightedGraph> {
    config.validate()?;
    let intra: Vec<WeightedGraph> = match config.method {
        GraphMethod::Dist => {
            let sigma = config
                .sigma
                .unwrap_or_else(|| layout.mean_pairwise_distance());
            let g = sparsify_topk(&dist_graph(layout, sigma)?, config.k)?;
            vec![g; num_bands]
        }
        GraphMethod::Rand => (0..num_bands)
            .map(|b| rand_graph(layout.len(), config.p, config.seed.wrapping_add(b as u64)))
            .collect::<Result<_>>()?,
        GraphMethod::Corr => {
            let signals = band_signals.ok_or_else(|| {
                Error::Config("correlation graphs need training band signals".into())
            })?;
            if signals.len() != num_bands {
                return Err(Error::Shape(format!(
                    "expected {num_bands} bands of signals, got {}",
                    signals.len()
                )));
            }
            signals
                .iter()
                .map(|trials| sparsify_topk(&corr_graph(trials)?, config.k))
                .collect::<Result<_>>()?
        }
    };
    merge_bands(&intra, config.inter_band)
}
