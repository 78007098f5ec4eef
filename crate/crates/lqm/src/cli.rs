//! Command-line surface.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use lqm_core::condenser::{condense, SyntheticDataset};
use lqm_core::continual::{build_task_sequence, run_cgl, CglMethod};
use lqm_core::data::LabeledDataset;
use lqm_core::evaluation::{
    diagnose_cvm_with, diagnose_extremes_with, evaluate_synthetic, export_ecdf_with, train_probe, EvalConfig,
};
use lqm_core::losses::Distance;
use lqm_core::quantiles::{ad_optimal_quantiles, cvm_optimal_quantiles, DEFAULT_AD_EPS, DEFAULT_AD_MAX_ITERS};
use serde::Serialize;

use crate::config::RunConfig;
use crate::formats::{self, ingest, read_raw, read_synthetic, sidecar_path, write_dataset, write_json, LabelMap};
use crate::graph::{propagate_graph, read_edges, Graph};
use crate::mixture::gen_mixture;
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "lqm", version, about = "Dataset condensation by latent quantile matching")]
pub struct Cli {
    /// Seed for every random choice; overrides the seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> log::LevelFilter {
        match self.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Cvm,
    Ad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lqm,
    Mmd,
    Finetune,
    Joint,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a Gaussian mixture dataset (CSV, or binary for .lqmd/.bin).
    GenData {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        separation: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the optimal quantile probabilities for k points.
    Quantiles {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "cvm")]
        criterion: CriterionArg,
        #[arg(long, default_value_t = DEFAULT_AD_EPS)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_AD_MAX_ITERS)]
        max_iters: usize,
    },
    /// Condense the configured dataset; writes the synthetic set, its
    /// metadata and the loss trace to the output directory, and evaluates
    /// the result when the config names a test set.
    Condense {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train classifiers on a synthetic set and report test accuracy.
    Eval {
        #[arg(long)]
        syn: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Take the classifier settings from this run config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare real and synthetic latent distributions under a probe model.
    Diagnose {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        syn: PathBuf,
        /// Also export the ECDFs of one class and latent feature.
        #[arg(long, num_args = 2, value_names = ["CLASS", "FEATURE"])]
        ecdf: Option<Vec<usize>>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the class-incremental benchmark with one method.
    Continual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
    },
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::GenData { classes, per_class, dim, separation, out } => {
            let data = gen_mixture(*classes, *per_class, *dim, *separation, cli.seed())?;
            write_dataset(out, &data)?;
            log::info!("wrote {} records to {}", data.len(), out.display());
        }
        Command::Quantiles { k, criterion, eps, max_iters } => {
            let q = match criterion {
                CriterionArg::Cvm => cvm_optimal_quantiles(*k)?,
                CriterionArg::Ad => ad_optimal_quantiles(*k, *eps, *max_iters)?,
            };
            println!("{}", format_probs(q.probs()));
        }
        Command::Condense { config } => {
            let cfg = load_config(cli, config)?;
            let (real, map) = load_training_data(&cfg)?;
            let out = condense(&real, &cfg.condense_config())?;
            fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
            write_synthetic_outputs(&cfg.output, &out.synthetic, &map, &out.loss_trace)?;
            if let Some(test) = &cfg.test {
                let test = read_raw(test)?.apply(&map)?;
                let report = evaluate_synthetic(&out.synthetic, &test, cfg.eval.runs, &cfg.eval_config())?;
                write_json(&cfg.output.join("eval.json"), &report)?;
                report::print_json(&report)?;
            }
            log::info!(
                "condensed {} records to {} in {} iterations",
                real.len(),
                out.synthetic.len(),
                out.synthetic.provenance.iterations_completed
            );
        }
        Command::Eval { syn, test, runs, config, out } => {
            let eval_cfg = match config {
                Some(path) => load_config(cli, path)?.eval_config(),
                None => EvalConfig { seed: cli.seed(), ..EvalConfig::default() },
            };
            let (syn, test) = load_pair(syn, test)?;
            let report = evaluate_synthetic(&syn, &test, *runs, &eval_cfg)?;
            if let Some(out) = out {
                write_json(out, &report)?;
            }
            report::print_json(&report)?;
        }
        Command::Diagnose { real, syn, ecdf, out } => {
            let (syn, real) = load_pair(syn, real)?;
            fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let probe = train_probe(&syn, cli.seed(), &EvalConfig::probe())?;
            let cvm = diagnose_cvm_with(&real, &syn, &probe)?;
            let extremes = diagnose_extremes_with(&real, &syn, &probe)?;
            report::write_diagnostic(&out.join("cvm.csv"), &cvm)?;
            report::write_diagnostic(&out.join("extremes.csv"), &extremes)?;
            if let Some(ce) = ecdf {
                let rows = export_ecdf_with(&real, &syn, ce[0], ce[1], &probe)?;
                report::write_ecdf(&out.join("ecdf.csv"), &rows)?;
            }
            #[derive(Serialize)]
            struct Overall {
                cvm: f64,
                extremes: f64,
            }
            report::print_json(&Overall { cvm: cvm.overall, extremes: extremes.overall })?;
        }
        Command::Continual { config, method } => {
            let cfg = load_config(cli, config)?;
            let (data, _) = load_training_data(&cfg)?;
            let tasks =
                build_task_sequence(&data, cfg.continual.classes_per_task, cfg.continual.split, cfg.seed)?;
            let method = match method {
                MethodArg::Lqm => CglMethod::CondensedReplay(lqm_core::condenser::CondenseConfig {
                    distance: Distance::Lqm,
                    ..cfg.condense_config()
                }),
                MethodArg::Mmd => CglMethod::CondensedReplay(lqm_core::condenser::CondenseConfig {
                    distance: Distance::Mmd,
                    ..cfg.condense_config()
                }),
                MethodArg::Finetune => CglMethod::Finetuning,
                MethodArg::Joint => CglMethod::Joint,
            };
            let result = run_cgl(&tasks, &method, &cfg.cgl_config())?;
            fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
            let stem = format!("continual_{}", result.method);
            report::write_accuracy_matrices(&cfg.output.join(format!("{stem}_accuracy.csv")), &result)?;
            report::write_cgl_summary(&cfg.output.join(format!("{stem}_summary.json")), &result)?;
            report::print_json(&report::CglSummary::of(&result))?;
        }
    }
    Ok(())
}

/// Space-separated shortest round-trip decimals.
pub fn format_probs(probs: &[f64]) -> String {
    probs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn load_config(cli: &Cli, path: &Path) -> anyhow::Result<RunConfig> {
    let cfg = RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn load_training_data(cfg: &RunConfig) -> anyhow::Result<(LabeledDataset, LabelMap)> {
    let (data, map) = ingest(&cfg.data)?;
    let data = match &cfg.graph {
        Some(g) => {
            let graph = Graph::new(data.len(), &read_edges(&g.edges)?)?;
            propagate_graph(&data, &graph, g.hops)?
        }
        None => data,
    };
    Ok((data, map))
}

fn write_synthetic_outputs(dir: &Path, syn: &SyntheticDataset, map: &LabelMap, trace: &[f64]) -> anyhow::Result<()> {
    formats::write_synthetic(&dir.join("synthetic.lqmd"), syn, Some(map))?;
    report::write_loss_trace(&dir.join("loss_trace.csv"), trace)?;
    write_json(&dir.join("label_map.json"), map)?;
    Ok(())
}

/// Loads a synthetic set (with sidecar, or any dataset file) and a real
/// dataset whose labels are mapped the same way.
fn load_pair(syn: &Path, real: &Path) -> anyhow::Result<(SyntheticDataset, LabeledDataset)> {
    let (syn_set, real_set) = if sidecar_path(syn).exists() {
        let file = read_synthetic(syn)?;
        let raw = read_raw(real)?;
        let real_set = match &file.label_map {
            Some(map) => raw.apply(map)?,
            None => raw.remap()?.0,
        };
        (file.dataset, real_set)
    } else {
        let (syn_data, map) = ingest(syn)?;
        (SyntheticDataset::from_labeled(&syn_data), read_raw(real)?.apply(&map)?)
    };
    if real_set.dim() != syn_set.dim() {
        bail!("{} has {} features but {} has {}", real.display(), real_set.dim(), syn.display(), syn_set.dim());
    }
    Ok((syn_set, real_set))
}
