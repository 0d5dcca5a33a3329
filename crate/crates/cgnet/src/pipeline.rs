//! End-to-end experiment wiring: configuration files, the full
//! load → features → graph → coarsen → train → evaluate run, the accuracy
//! grid, and report output.

use crate::coarsen::{graclus_coarsen, perm_data, CoarseningHierarchy};
use crate::data::{
    load_recordings, split, split_by_trial, zscore_normalize, FeatureKind, FeatureSample,
    RecordingSet, SplitIndices,
};
use crate::dsp::{canonical_bands, canonical_filters, decompose, load_fir_coeffs, FirFilter};
use crate::error::{Error, Result};
use crate::graph::{
    merge_bands, normalized_laplacian, scale_laplacian, sparsify_topk, CorrAccumulator,
    GraphMethod, WeightedGraph,
};
use crate::layout::ElectrodeLayout;
use crate::nn::{
    count_parameters, evaluate, knn_baseline, save_checkpoint, train, GraphSample, ModelParams,
    Network, NetworkSpec, TrainConfig,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

/// Everything a single experiment needs, loadable from a TOML file with
/// `[data]`, `[graph]`, `[network]` and `[train]` sections. Unknown keys are
/// rejected. Every field has a default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub dataset: PathBuf,
    pub feature: FeatureKind,
    pub entropy_bins: usize,
    pub subtract_baseline: bool,
    /// `segment` (the default) or `trial`.
    pub split_mode: String,
    pub split_ratio: f64,
    pub subject: Option<u32>,
    pub fir_order: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dataset: PathBuf::new(),
            feature: FeatureKind::Entropy,
            entropy_bins: crate::dsp::DEFAULT_ENTROPY_BINS,
            subtract_baseline: false,
            split_mode: "segment".into(),
            split_ratio: 0.8,
            subject: None,
            fir_order: crate::dsp::CANONICAL_ORDER,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    pub method: GraphMethod,
    pub k: usize,
    pub p: f64,
    pub sigma: Option<f64>,
    pub inter_band: bool,
    /// Seed for random intra-band graphs (band b uses `seed + b`).
    pub seed: u64,
    /// Seed for the coarsening visit order, independent of training.
    pub coarsen_seed: u64,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            method: GraphMethod::Dist,
            k: 4,
            p: 0.5,
            sigma: None,
            inter_band: true,
            seed: 2,
            coarsen_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// Preset (`net1`..`net5`) or a full spec string.
    pub spec: String,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            spec: "net2".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Load(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn density_label(&self) -> String {
        match self.graph.method {
            GraphMethod::Rand => format!("p={}", self.graph.p),
            _ => format!("k={}", self.graph.k),
        }
    }
}

/// Parses a network spec string or preset name.
pub fn parse_network_spec(s: &str) -> Result<NetworkSpec> {
    NetworkSpec::preset_or_parse(s)
}

/// One result line of an experiment or grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub graph: String,
    pub inter_band: bool,
    pub density: String,
    pub feature: String,
    pub accuracy_pct: f64,
    pub parameters: usize,
    pub wall_time_s: f64,
}

/// Rounds to two decimals with ties to even, the report's printed precision.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round_ties_even() / 100.0
}

/// Feature samples plus everything shared between grid cells.
pub struct Prepared {
    pub fs: f64,
    pub channels: Vec<String>,
    pub layout: ElectrodeLayout,
    /// Normalized samples per extracted feature kind.
    pub features: Vec<(FeatureKind, Vec<FeatureSample>)>,
    pub split: SplitIndices,
    /// Dense per-band correlation graphs from training-split segments.
    pub corr_bands: Option<Vec<WeightedGraph>>,
    pub filters: Vec<FirFilter>,
}

impl Prepared {
    pub fn samples_of(&self, kind: FeatureKind) -> &[FeatureSample] {
        &self
            .features
            .iter()
            .find(|(k, _)| *k == kind)
            .expect("feature kind prepared")
            .1
    }
}

/// FIR filters for the canonical bands, with optional per-band replacement
/// coefficients loaded from text files.
pub fn build_filters(
    fs: f64,
    order: usize,
    overrides: &[(String, PathBuf)],
) -> Result<Vec<FirFilter>> {
    let mut filters = canonical_filters(fs, order)?;
    for (band_name, path) in overrides {
        let band = canonical_bands()
            .iter()
            .find(|b| b.name == band_name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown band {band_name:?} in --fir-coeffs")))?;
        let loaded = load_fir_coeffs(path, &band, fs)?;
        let slot = filters
            .iter_mut()
            .find(|f| f.band.name == band.name)
            .unwrap();
        *slot = loaded;
    }
    Ok(filters)
}

/// Loads the dataset and runs segmentation, feature extraction, the split,
/// normalization, and (when wanted) the training-split correlation graphs.
pub fn prepare(
    config: &ExperimentConfig,
    kinds: &[FeatureKind],
    want_corr: bool,
    fir_overrides: &[(String, PathBuf)],
) -> Result<Prepared> {
    if config.data.dataset.as_os_str().is_empty() {
        return Err(Error::Config("no dataset path configured".into()));
    }
    let mut set = load_recordings(&config.data.dataset)?;
    if let Some(subject) = config.data.subject {
        set.recordings.retain(|r| r.subject == subject);
        if set.recordings.is_empty() {
            return Err(Error::Config(format!("no trials for subject {subject}")));
        }
    }
    prepare_from_set(config, &set, kinds, want_corr, fir_overrides)
}

/// Same as [`prepare`] but over an in-memory recording set.
pub fn prepare_from_set(
    config: &ExperimentConfig,
    set: &RecordingSet,
    kinds: &[FeatureKind],
    want_corr: bool,
    fir_overrides: &[(String, PathBuf)],
) -> Result<Prepared> {
    let filters = build_filters(set.fs, config.data.fir_order, fir_overrides)?;
    let layout = ElectrodeLayout::for_channels(&set.channels)?;

    // segment bookkeeping before any signal work: labels and the trial map
    // determine the split
    let mut labels = Vec::new();
    let mut trial_of = Vec::new();
    for (ri, r) in set.recordings.iter().enumerate() {
        let window = (crate::data::WINDOW_SECONDS as f64 * set.fs) as usize;
        let stride = (crate::data::STRIDE_SECONDS as f64 * set.fs) as usize;
        if r.samples.ncols() < window {
            return Err(Error::Domain(format!("trial {ri} shorter than one window")));
        }
        let count = (r.samples.ncols() - window) / stride + 1;
        for _ in 0..count {
            labels.push(r.video_id as usize);
            trial_of.push(ri);
        }
    }
    let split_indices = match config.data.split_mode.as_str() {
        "segment" => split(&labels, config.data.split_ratio, config.train.seed)?,
        "trial" => split_by_trial(
            &labels,
            &trial_of,
            config.data.split_ratio,
            config.train.seed,
        )?,
        other => return Err(Error::Config(format!("unknown split mode {other:?}"))),
    };
    let train_set: HashSet<usize> = split_indices.train.iter().copied().collect();

    // one decomposition pass per segment feeds every feature kind and the
    // correlation accumulators
    let mut per_kind: Vec<(FeatureKind, Vec<FeatureSample>)> = kinds
        .iter()
        .map(|&k| (k, Vec::with_capacity(labels.len())))
        .collect();
    let mut corr_acc: Option<Vec<CorrAccumulator>> = if want_corr {
        Some(
            (0..filters.len())
                .map(|_| CorrAccumulator::new(set.channels.len()))
                .collect(),
        )
    } else {
        None
    };
    let mut global = 0usize;
    for r in &set.recordings {
        let segments = crate::data::segment_trials(
            r,
            set.fs,
            crate::data::WINDOW_SECONDS,
            crate::data::STRIDE_SECONDS,
        )?;
        let baseline_features: Vec<Option<Vec<f64>>> = per_kind
            .iter()
            .map(|(kind, _)| -> Result<Option<Vec<f64>>> {
                if !config.data.subtract_baseline {
                    return Ok(None);
                }
                let b = r.baseline.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "baseline subtraction requested but subject {} video {} has none",
                        r.subject, r.video_id
                    ))
                })?;
                let seg: Vec<Vec<f64>> = (0..b.nrows())
                    .map(|ch| b.row(ch).iter().map(|&v| v as f64).collect())
                    .collect();
                let feats = features_of_decomposed(
                    &decompose(&seg, &filters)?,
                    *kind,
                    config.data.entropy_bins,
                )?;
                Ok(Some(feats))
            })
            .collect::<Result<_>>()?;
        for (seg_idx, segment) in segments.iter().enumerate() {
            let decomposed = decompose(segment, &filters)?;
            for ((kind, out), base) in per_kind.iter_mut().zip(&baseline_features) {
                let mut features =
                    features_of_decomposed(&decomposed, *kind, config.data.entropy_bins)?;
                if let Some(base) = base {
                    for (f, b) in features.iter_mut().zip(base) {
                        *f -= b;
                    }
                }
                out.push(FeatureSample {
                    features,
                    label: r.video_id as usize,
                    subject: r.subject,
                    segment_index: seg_idx,
                });
            }
            if let Some(accs) = corr_acc.as_mut() {
                if train_set.contains(&global) {
                    for (b, acc) in accs.iter_mut().enumerate() {
                        let band_trial: Vec<Vec<f64>> =
                            decomposed.iter().map(|ch| ch[b].samples.clone()).collect();
                        acc.add_trial(&band_trial)?;
                    }
                }
            }
            global += 1;
        }
    }

    // normalize each kind with training statistics only
    for (_, samples) in per_kind.iter_mut() {
        let mut train_samples: Vec<FeatureSample> = split_indices
            .train
            .iter()
            .map(|&i| samples[i].clone())
            .collect();
        let mut test_samples: Vec<FeatureSample> = split_indices
            .test
            .iter()
            .map(|&i| samples[i].clone())
            .collect();
        zscore_normalize(&mut train_samples, &mut test_samples)?;
        for (&i, s) in split_indices.train.iter().zip(train_samples) {
            samples[i] = s;
        }
        for (&i, s) in split_indices.test.iter().zip(test_samples) {
            samples[i] = s;
        }
    }

    let corr_bands = match corr_acc {
        Some(accs) => Some(
            accs.iter()
                .map(|a| a.finish())
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(Prepared {
        fs: set.fs,
        channels: set.channels.clone(),
        layout,
        features: per_kind,
        split: split_indices,
        corr_bands,
        filters,
    })
}

fn features_of_decomposed(
    decomposed: &[Vec<crate::dsp::BandSignal>],
    kind: FeatureKind,
    entropy_bins: usize,
) -> Result<Vec<f64>> {
    let channels = decomposed.len();
    let bands = decomposed[0].len();
    let mut features = vec![0.0; bands * channels];
    for (ch, per_band) in decomposed.iter().enumerate() {
        for (b, bs) in per_band.iter().enumerate() {
            features[b * channels + ch] = match kind {
                FeatureKind::Power => crate::dsp::band_power(&bs.samples)?,
                FeatureKind::Entropy => crate::dsp::band_entropy(&bs.samples, entropy_bins)?,
            };
        }
    }
    Ok(features)
}

impl GraphSection {
    /// The graph module's configuration view of this section.
    pub fn to_graph_config(&self) -> crate::graph::GraphConfig {
        crate::graph::GraphConfig {
            method: self.method,
            k: self.k,
            p: self.p,
            sigma: self.sigma,
            inter_band: self.inter_band,
            seed: self.seed,
        }
    }
}

/// Builds the merged graph for one cell configuration. Correlation graphs
/// come from the prepared training-split accumulators; distance and random
/// graphs go through the graph module's builder directly.
pub fn build_graph(config: &ExperimentConfig, prepared: &Prepared) -> Result<WeightedGraph> {
    let num_bands = prepared.filters.len();
    match config.graph.method {
        GraphMethod::Corr => {
            let bands = prepared.corr_bands.as_ref().ok_or_else(|| {
                Error::Config("correlation graphs were not prepared for this run".into())
            })?;
            let intra: Vec<WeightedGraph> = bands
                .iter()
                .map(|g| sparsify_topk(g, config.graph.k))
                .collect::<Result<_>>()?;
            merge_bands(&intra, config.graph.inter_band)
        }
        _ => crate::graph::build_merged_graph(
            &config.graph.to_graph_config(),
            &prepared.layout,
            None,
            num_bands,
        ),
    }
}

/// The trained outcome of one cell.
pub struct CellOutcome {
    pub row: ReportRow,
    pub network: Network,
    pub params: ModelParams,
    pub metrics: Vec<crate::nn::EpochMetrics>,
    pub merged_graph: WeightedGraph,
    pub spec: NetworkSpec,
}

/// Runs graph construction, coarsening, training and evaluation on prepared
/// data.
pub fn run_cell(config: &ExperimentConfig, prepared: &Prepared) -> Result<CellOutcome> {
    let started = std::time::Instant::now();
    let spec = parse_network_spec(&config.network.spec)?;
    let samples = prepared.samples_of(config.data.feature);
    let num_classes = spec.num_classes();
    if let Some(bad) = samples.iter().find(|s| s.label >= num_classes) {
        return Err(Error::Config(format!(
            "label {} exceeds the network's {} classes",
            bad.label, num_classes
        )));
    }

    let merged = build_graph(config, prepared)?;
    let (network, perm, padded0) = instantiate_network(&spec, &merged, config.graph.coarsen_seed)?;

    let to_input = |s: &FeatureSample| -> Result<GraphSample> {
        let x = Array2::from_shape_vec((s.features.len(), 1), s.features.clone())
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(GraphSample {
            input: perm_data(&x, &perm, padded0)?,
            label: s.label,
        })
    };
    let train_samples: Vec<GraphSample> = prepared
        .split
        .train
        .iter()
        .map(|&i| to_input(&samples[i]))
        .collect::<Result<_>>()?;
    let test_samples: Vec<GraphSample> = prepared
        .split
        .test
        .iter()
        .map(|&i| to_input(&samples[i]))
        .collect::<Result<_>>()?;

    let mut params = network.init_params(config.train.seed)?;
    let metrics = train(&network, &mut params, &train_samples, &config.train)?;
    let accuracy = evaluate(&network, &params, &test_samples)?;
    let parameters = count_parameters(&spec, &network.padded_sizes)?;
    let row = ReportRow {
        graph: config.graph.method.to_string(),
        inter_band: config.graph.inter_band,
        density: config.density_label(),
        feature: config.data.feature.to_string(),
        accuracy_pct: round2(accuracy * 100.0),
        parameters,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(CellOutcome {
        row,
        network,
        params,
        metrics,
        merged_graph: merged,
        spec,
    })
}

/// Coarsens the merged graph as the network requires and returns the
/// network, the pooling permutation and the padded input size. Networks
/// without pooling run on the unpadded graph with the identity permutation.
pub fn instantiate_network(
    spec: &NetworkSpec,
    merged: &WeightedGraph,
    coarsen_seed: u64,
) -> Result<(Network, Vec<usize>, usize)> {
    let pools = spec.num_pools();
    if pools == 0 {
        let laplacian = scale_laplacian(&normalized_laplacian(merged));
        let network = Network::from_laplacians(spec.clone(), vec![laplacian], vec![merged.n()])?;
        return Ok((network, (0..merged.n()).collect(), merged.n()));
    }
    let hierarchy: CoarseningHierarchy = graclus_coarsen(merged, pools, coarsen_seed)?;
    let network = Network::from_hierarchy(spec.clone(), &hierarchy)?;
    let padded0 = hierarchy.padded_sizes()[0];
    Ok((network, hierarchy.perm().to_vec(), padded0))
}

/// Artifact paths for a full experiment run.
pub struct OutputPaths {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
}

impl OutputPaths {
    pub fn under(dir: &Path) -> Self {
        OutputPaths {
            checkpoint: dir.join("checkpoint.cgnet"),
            metrics: dir.join("metrics.jsonl"),
            report_json: dir.join("report.json"),
            report_text: dir.join("report.txt"),
        }
    }

    pub fn ensure_writable(&self, overwrite: bool) -> Result<()> {
        for p in [
            &self.checkpoint,
            &self.metrics,
            &self.report_json,
            &self.report_text,
        ] {
            if p.exists() && !overwrite {
                return Err(Error::Config(format!(
                    "{} already exists; pass --overwrite to replace it",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

/// Full single experiment: prepare, run, and write artifacts.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    overwrite: bool,
    fir_overrides: &[(String, PathBuf)],
    dump_graph: Option<&Path>,
) -> Result<ReportRow> {
    std::fs::create_dir_all(out_dir)?;
    let paths = OutputPaths::under(out_dir);
    paths.ensure_writable(overwrite)?;
    let prepared = prepare(
        config,
        &[config.data.feature],
        config.graph.method == GraphMethod::Corr,
        fir_overrides,
    )?;
    let outcome = run_cell(config, &prepared)?;
    if let Some(path) = dump_graph {
        let file = std::fs::File::create(path)?;
        outcome
            .merged_graph
            .write_text(std::io::BufWriter::new(file))?;
    }
    save_checkpoint(
        &paths.checkpoint,
        &outcome.spec,
        &outcome.params,
        config.train.seed,
        config.train.epochs,
    )?;
    let mut metrics_text = String::new();
    for m in &outcome.metrics {
        metrics_text.push_str(&serde_json::to_string(m).expect("metrics serialize"));
        metrics_text.push('\n');
    }
    std::fs::write(&paths.metrics, metrics_text)?;
    std::fs::write(
        &paths.report_json,
        serde_json::to_string_pretty(&outcome.row).expect("row serializes"),
    )?;
    std::fs::write(
        &paths.report_text,
        render_rows(std::slice::from_ref(&outcome.row)),
    )?;
    Ok(outcome.row)
}

/// The grid: 3 methods × 2 inter-band × 3 densities × both features, plus
/// the k-NN baseline per feature. Cell failures are recorded and the grid
/// continues.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<ReportRow>,
    pub knn: Vec<ReportRow>,
    pub failures: Vec<String>,
}

pub fn run_grid(
    base: &ExperimentConfig,
    knn_k: usize,
    repeats: usize,
    fir_overrides: &[(String, PathBuf)],
) -> Result<GridReport> {
    let kinds = [FeatureKind::Power, FeatureKind::Entropy];
    let prepared = prepare(base, &kinds, true, fir_overrides)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let densities: [(GraphMethod, &[f64]); 3] = [
        (GraphMethod::Corr, &[4.0, 8.0, 12.0]),
        (GraphMethod::Dist, &[4.0, 8.0, 12.0]),
        (GraphMethod::Rand, &[0.3, 0.5, 0.7]),
    ];
    for (method, density_values) in densities {
        for &inter_band in &[false, true] {
            for &d in density_values {
                for kind in kinds {
                    let mut config = base.clone();
                    config.graph.method = method;
                    config.graph.inter_band = inter_band;
                    config.data.feature = kind;
                    match method {
                        GraphMethod::Rand => config.graph.p = d,
                        _ => config.graph.k = d as usize,
                    }
                    let mut acc_sum = 0.0;
                    let mut last_row: Option<ReportRow> = None;
                    let mut failed = false;
                    for rep in 0..repeats.max(1) {
                        let mut rep_config = config.clone();
                        rep_config.train.seed = config.train.seed + rep as u64;
                        match run_cell(&rep_config, &prepared) {
                            Ok(out) => {
                                acc_sum += out.row.accuracy_pct;
                                last_row = Some(out.row);
                            }
                            Err(e) => {
                                failures.push(format!(
                                    "{method} inter_band={inter_band} {} {kind}: {e}",
                                    config.density_label()
                                ));
                                failed = true;
                                break;
                            }
                        }
                    }
                    if failed {
                        continue;
                    }
                    let mut row = last_row.expect("at least one repeat ran");
                    row.accuracy_pct = round2(acc_sum / repeats.max(1) as f64);
                    rows.push(row);
                }
            }
        }
    }
    // k-NN baseline per feature kind on the same split
    let mut knn_rows = Vec::new();
    for kind in kinds {
        let samples = prepared.samples_of(kind);
        let train: Vec<(Vec<f64>, usize)> = prepared
            .split
            .train
            .iter()
            .map(|&i| (samples[i].features.clone(), samples[i].label))
            .collect();
        let test: Vec<(Vec<f64>, usize)> = prepared
            .split
            .test
            .iter()
            .map(|&i| (samples[i].features.clone(), samples[i].label))
            .collect();
        let acc = knn_baseline(&train, &test, knn_k)?;
        knn_rows.push(ReportRow {
            graph: "knn".into(),
            inter_band: false,
            density: format!("k={knn_k}"),
            feature: kind.to_string(),
            accuracy_pct: round2(acc * 100.0),
            parameters: 0,
            wall_time_s: 0.0,
        });
    }
    Ok(GridReport {
        rows,
        knn: knn_rows,
        failures,
    })
}

/// Fixed-column text table for a list of result rows.
pub fn render_rows(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:<10} {:<8} {:<8} {:>9} {:>11} {:>9}\n",
        "graph", "inter-band", "density", "feature", "acc(%)", "params", "time(s)"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<6} {:<10} {:<8} {:<8} {:>9.2} {:>11} {:>9.1}\n",
            r.graph,
            if r.inter_band { "yes" } else { "no" },
            r.density,
            r.feature,
            r.accuracy_pct,
            r.parameters,
            r.wall_time_s
        ));
    }
    out
}

/// The grid rendered in the two-signal-column layout: one row per
/// (graph, inter-band, density) with power and entropy side by side.
pub fn render_grid_table(report: &GridReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:<10} {:<8} {:>9} {:>9}\n",
        "graph", "inter-band", "density", "power", "entropy"
    ));
    let mut seen: Vec<(String, bool, String)> = Vec::new();
    for r in &report.rows {
        let key = (r.graph.clone(), r.inter_band, r.density.clone());
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    for (graph, inter_band, density) in seen {
        let find = |kind: &str| {
            report
                .rows
                .iter()
                .find(|r| {
                    r.graph == graph
                        && r.inter_band == inter_band
                        && r.density == density
                        && r.feature == kind
                })
                .map(|r| format!("{:.2}", r.accuracy_pct))
                .unwrap_or_else(|| "-".into())
        };
        out.push_str(&format!(
            "{:<6} {:<10} {:<8} {:>9} {:>9}\n",
            graph,
            if inter_band { "yes" } else { "no" },
            density,
            find("power"),
            find("entropy")
        ));
    }
    if !report.knn.is_empty() {
        let find = |kind: &str| {
            report
                .knn
                .iter()
                .find(|r| r.feature == kind)
                .map(|r| format!("{:.2}", r.accuracy_pct))
                .unwrap_or_else(|| "-".into())
        };
        out.push_str(&format!(
            "{:<6} {:<10} {:<8} {:>9} {:>9}\n",
            "knn",
            "-",
            report.knn[0].density,
            find("power"),
            find("entropy")
        ));
    }
    for f in &report.failures {
        out.push_str(&format!("FAILED: {f}\n"));
    }
    out
}
