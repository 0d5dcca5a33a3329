//! Command-line entry point: dataset synthesis, feature export, graph
//! inspection, training, evaluation, gradient checking and the accuracy
//! grid.

use cgnet::data::{load_recordings, synth_dataset, write_container};
use cgnet::error::{Error, Result};
use cgnet::graph::{rand_graph, GraphMethod};
use cgnet::nn::{
    evaluate, grad_check, load_checkpoint, random_params_for_gradcheck, GradCheckOptions,
};
use cgnet::pipeline::{
    build_filters, instantiate_network, parse_network_spec, prepare, render_grid_table,
    render_rows, run_experiment, run_grid, ExperimentConfig,
};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "cgnet",
    version,
    about = "Band-wise EEG graph signals with a Chebyshev graph convolutional network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment configuration file (TOML). Flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recording container directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Vertex feature: power or entropy.
    #[arg(long)]
    feature: Option<String>,
    /// Intra-band graph method: corr, dist or rand.
    #[arg(long = "graph-method")]
    graph_method: Option<String>,
    /// Top-k sparsification degree (corr/dist).
    #[arg(long)]
    k: Option<usize>,
    /// Edge probability (rand).
    #[arg(long)]
    p: Option<f64>,
    /// Inter-band connectivity on or off.
    #[arg(long)]
    inter_band: Option<bool>,
    /// Network preset (net1..net5) or spec string.
    #[arg(long)]
    network: Option<String>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Training seed (also drives the split).
    #[arg(long)]
    seed: Option<u64>,
    /// Coarsening seed.
    #[arg(long = "coarsen-seed")]
    coarsen_seed: Option<u64>,
    /// Replacement FIR taps: `<band>=<path>`, repeatable.
    #[arg(long = "fir-coeffs", value_parser = parse_band_path)]
    fir_coeffs: Vec<(String, PathBuf)>,
}

fn parse_band_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((band, path)) if !band.is_empty() && !path.is_empty() => {
            Ok((band.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected <band>=<path>, got {s:?}")),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(d) = &self.dataset {
            config.data.dataset = d.clone();
        }
        if let Some(f) = &self.feature {
            config.data.feature = f.parse()?;
        }
        if let Some(m) = &self.graph_method {
            config.graph.method = m.parse()?;
        }
        if let Some(k) = self.k {
            config.graph.k = k;
        }
        if let Some(p) = self.p {
            config.graph.p = p;
        }
        if let Some(i) = self.inter_band {
            config.graph.inter_band = i;
        }
        if let Some(n) = &self.network {
            config.network.spec = n.clone();
        }
        if let Some(e) = self.epochs {
            config.train.epochs = e;
        }
        if let Some(s) = self.seed {
            config.train.seed = s;
        }
        if let Some(s) = self.coarsen_seed {
            config.graph.coarsen_seed = s;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording container.
    Synth {
        /// Number of classes (2..=40).
        #[arg(long, default_value_t = 8)]
        classes: usize,
        /// Trials generated per class.
        #[arg(long = "trials-per-class", default_value_t = 8)]
        trials_per_class: usize,
        /// Sampling rate in Hz.
        #[arg(long, default_value_t = 128.0)]
        fs: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output container directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        overwrite: bool,
    },
    /// Extract per-segment graph-signal features to JSON lines.
    Features {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file of raw (unnormalized) feature samples.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        overwrite: bool,
    },
    /// Build the merged band graph and write its text export.
    Graph {
        #[command(flatten)]
        config: ConfigArgs,
        /// Where to write the `n m` / `i j w` text dump.
        #[arg(long = "dump-graph")]
        dump_graph: PathBuf,
        /// Coarsening level to dump (0 = the merged graph itself).
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long, default_value_t = false)]
        overwrite: bool,
    },
    /// Train a network and write checkpoint, metrics and report.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Also write the merged graph text dump here.
        #[arg(long = "dump-graph")]
        dump_graph: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        overwrite: bool,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Which samples to score: train, test or all.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Finite-difference check of all gradients on a small random graph.
    Gradcheck {
        /// Network preset or spec string.
        #[arg(long, default_value = "net2")]
        network: String,
        /// Vertices of the random check graph.
        #[arg(long, default_value_t = 16)]
        vertices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        /// Cap on checked entries per tensor; 0 means exhaustive.
        #[arg(long, default_value_t = 256)]
        entries: usize,
        /// Test hook: corrupt this flat parameter gradient (expect failure).
        #[arg(long, hide = true)]
        sabotage: Option<usize>,
    },
    /// Run the full accuracy grid plus the k-NN baseline.
    Grid {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// k for the k-NN baseline rows.
        #[arg(long = "knn-k", default_value_t = 5)]
        knn_k: usize,
        /// Training repeats per cell (accuracies averaged).
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = false)]
        overwrite: bool,
    },
}

fn refuse_clobber(path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(Error::Config(format!(
            "{} already exists; pass --overwrite to replace it",
            path.display()
        )));
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth {
            classes,
            trials_per_class,
            fs,
            seed,
            out,
            overwrite,
        } => {
            let set = synth_dataset(classes, trials_per_class, fs, seed)?;
            write_container(&out, &set, overwrite)?;
            println!(
                "wrote {} trials ({} classes x {}) to {}",
                set.recordings.len(),
                classes,
                trials_per_class,
                out.display()
            );
            Ok(0)
        }
        Command::Features {
            config,
            out,
            overwrite,
        } => {
            refuse_clobber(&out, overwrite)?;
            let config_resolved = config.resolve()?;
            let set = load_recordings(&config_resolved.data.dataset)?;
            let filters =
                build_filters(set.fs, config_resolved.data.fir_order, &config.fir_coeffs)?;
            let mut text = String::new();
            let mut count = 0usize;
            for r in &set.recordings {
                let samples = cgnet::data::extract_features(
                    r,
                    set.fs,
                    &filters,
                    config_resolved.data.feature,
                    config_resolved.data.entropy_bins,
                    config_resolved.data.subtract_baseline,
                )?;
                for s in samples {
                    text.push_str(&serde_json::to_string(&s).expect("sample serializes"));
                    text.push('\n');
                    count += 1;
                }
            }
            std::fs::write(&out, text)?;
            println!("wrote {count} feature samples to {}", out.display());
            Ok(0)
        }
        Command::Graph {
            config,
            dump_graph,
            level,
            overwrite,
        } => {
            refuse_clobber(&dump_graph, overwrite)?;
            let config_resolved = config.resolve()?;
            let prepared = prepare(
                &config_resolved,
                &[config_resolved.data.feature],
                config_resolved.graph.method == GraphMethod::Corr,
                &config.fir_coeffs,
            )?;
            let merged = cgnet::pipeline::build_graph(&config_resolved, &prepared)?;
            let target = if level == 0 {
                merged
            } else {
                let h = cgnet::coarsen::graclus_coarsen(
                    &merged,
                    level,
                    config_resolved.graph.coarsen_seed,
                )?;
                h.levels()[level].clone()
            };
            let file = std::fs::File::create(&dump_graph)?;
            target.write_text(std::io::BufWriter::new(file))?;
            println!(
                "wrote level-{level} graph ({} vertices, {} edges) to {}",
                target.n(),
                target.num_edges(),
                dump_graph.display()
            );
            Ok(0)
        }
        Command::Train {
            config,
            out,
            dump_graph,
            overwrite,
        } => {
            let config_resolved = config.resolve()?;
            let row = run_experiment(
                &config_resolved,
                &out,
                overwrite,
                &config.fir_coeffs,
                dump_graph.as_deref(),
            )?;
            print!("{}", render_rows(std::slice::from_ref(&row)));
            Ok(0)
        }
        Command::Eval {
            config,
            checkpoint,
            split,
        } => {
            let config_resolved = config.resolve()?;
            let (header, params) = load_checkpoint(&checkpoint)?;
            if header.spec != parse_network_spec(&config_resolved.network.spec)?.to_string() {
                return Err(Error::Config(format!(
                    "checkpoint was trained with {:?} but the config asks for {:?}",
                    header.spec, config_resolved.network.spec
                )));
            }
            let prepared = prepare(
                &config_resolved,
                &[config_resolved.data.feature],
                config_resolved.graph.method == GraphMethod::Corr,
                &config.fir_coeffs,
            )?;
            let spec = parse_network_spec(&config_resolved.network.spec)?;
            let merged = cgnet::pipeline::build_graph(&config_resolved, &prepared)?;
            let (network, perm, padded0) =
                instantiate_network(&spec, &merged, config_resolved.graph.coarsen_seed)?;
            let samples = prepared.samples_of(config_resolved.data.feature);
            let indices: Vec<usize> = match split.as_str() {
                "train" => prepared.split.train.clone(),
                "test" => prepared.split.test.clone(),
                "all" => (0..samples.len()).collect(),
                other => return Err(Error::Config(format!("unknown split {other:?}"))),
            };
            let eval_samples: Vec<cgnet::nn::GraphSample> = indices
                .iter()
                .map(|&i| -> Result<cgnet::nn::GraphSample> {
                    let x = ndarray::Array2::from_shape_vec(
                        (samples[i].features.len(), 1),
                        samples[i].features.clone(),
                    )
                    .map_err(|e| Error::Shape(e.to_string()))?;
                    Ok(cgnet::nn::GraphSample {
                        input: cgnet::coarsen::perm_data(&x, &perm, padded0)?,
                        label: samples[i].label,
                    })
                })
                .collect::<Result<_>>()?;
            let accuracy = evaluate(&network, &params, &eval_samples)?;
            println!(
                "accuracy on {split} split: {:.2}% ({} samples)",
                cgnet::pipeline::round2(accuracy * 100.0),
                eval_samples.len()
            );
            Ok(0)
        }
        Command::Gradcheck {
            network,
            vertices,
            seed,
            tolerance,
            entries,
            sabotage,
        } => {
            let spec = parse_network_spec(&network)?;
            let graph = rand_graph(vertices, 0.5, seed)?;
            let (net, _, padded0) = instantiate_network(&spec, &graph, seed)?;
            let params = random_params_for_gradcheck(&net, seed)?;
            use rand::Rng;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
            let input = ndarray::Array2::from_shape_fn((padded0, 1), |_| rng.gen_range(-1.0..1.0));
            let label = rng.gen_range(0..spec.num_classes());
            let options = GradCheckOptions {
                tolerance,
                max_entries_per_tensor: if entries == 0 { None } else { Some(entries) },
                seed,
                l2_coef: 5e-4,
                sabotage,
                ..Default::default()
            };
            let report = grad_check(&net, &params, &input, label, &options)?;
            println!("{report}");
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Grid {
            config,
            out,
            knn_k,
            repeats,
            overwrite,
        } => {
            std::fs::create_dir_all(&out)?;
            let json_path = out.join("grid.json");
            let text_path = out.join("grid.txt");
            refuse_clobber(&json_path, overwrite)?;
            refuse_clobber(&text_path, overwrite)?;
            let config_resolved = config.resolve()?;
            let report = run_grid(&config_resolved, knn_k, repeats, &config.fir_coeffs)?;
            let table = render_grid_table(&report);
            std::fs::write(
                &json_path,
                serde_json::to_string_pretty(&report).expect("grid json"),
            )?;
            std::fs::write(&text_path, &table)?;
            print!("{table}");
            Ok(if report.failures.is_empty() { 0 } else { 1 })
        }
    }
}
