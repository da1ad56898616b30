//! Command-line experiment runner.
//!
//! Verbs: `generate-synthetic`, `run-comparison`, `run-sweep`, `mi-report`.
//! The env var `TRIMINE_THREADS` caps worker parallelism; results do not
//! depend on it.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use trimine::dataset::{write_dataset, BoxFeature};
use trimine::experiment::{
    export_mi_report, run_comparison, run_sweep, DataSource, ExperimentPlan, RunStatus, SweepGrid,
};
use trimine::eval::ProbeConfig;
use trimine::losses::Strategy;
use trimine::optim::AdamConfig;
use trimine::train::TrainConfig;

#[derive(Parser)]
#[command(
    name = "trimine",
    version,
    about = "Relevance-guided triplet learning over frozen embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as embeddings.csv and annotations.csv
    GenerateSynthetic(GenerateArgs),
    /// Train and probe each strategy over the seed list, then aggregate
    RunComparison {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep tg-matl over a (p_top, p_rand) grid
    RunSweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated p_top grid values
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
        p_top_grid: Vec<f64>,
        /// Comma-separated p_rand grid values
        #[arg(long, value_delimiter = ',', default_value = "0.0,0.1,0.2,0.3,0.4")]
        p_rand_grid: Vec<f64>,
        /// Also render the two grids as SVG heatmaps
        #[arg(long)]
        render_heatmaps: bool,
    },
    /// Export the per-class relevance summary and per-feature MI table
    MiReport {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Also export the selection mask under --p-top/--p-rand
        #[arg(long)]
        export_mask: bool,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Per-class sample counts, comma separated
    #[arg(long, value_delimiter = ',', default_value = "116,51,73")]
    counts: Vec<usize>,
    /// Embedding dimension
    #[arg(long, default_value_t = 64)]
    k_in: usize,
    /// Geometry-class coupling in [0, 1]
    #[arg(long, default_value_t = 0.8)]
    coupling: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Output directory
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Embeddings CSV with header id,e_0,...,e_{k-1}
    #[arg(long, requires = "annotations", conflicts_with = "synthetic")]
    embeddings: Option<PathBuf>,
    /// Annotations CSV with header id,class,x_min,y_min,x_max,y_max
    #[arg(long, requires = "embeddings")]
    annotations: Option<PathBuf>,
    /// Generate a synthetic dataset instead of reading files
    #[arg(long)]
    synthetic: bool,
    /// Synthetic per-class sample counts
    #[arg(long, value_delimiter = ',', default_value = "116,51,73")]
    counts: Vec<usize>,
    /// Synthetic embedding dimension
    #[arg(long, default_value_t = 64)]
    k_in: usize,
    /// Synthetic geometry-class coupling
    #[arg(long, default_value_t = 0.8)]
    coupling: f64,
    /// Synthetic generator seed
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl DataArgs {
    fn source(&self) -> Result<DataSource> {
        match (&self.embeddings, &self.annotations, self.synthetic) {
            (Some(embeddings), Some(annotations), false) => Ok(DataSource::Files {
                embeddings: embeddings.clone(),
                annotations: annotations.clone(),
            }),
            (None, None, true) => Ok(DataSource::Synthetic {
                class_counts: self.counts.clone(),
                embedding_dim: self.k_in,
                coupling: self.coupling,
                seed: self.data_seed,
            }),
            _ => bail!("pass --embeddings with --annotations, or --synthetic"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Strategies to run (default: all five)
    #[arg(long = "strategy", value_delimiter = ',')]
    strategies: Vec<Strategy>,
    /// Run seeds
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7")]
    seeds: Vec<u64>,
    /// Box-branch weight for matl/tg-matl
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Triplet margin
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Top fraction of the selection mask
    #[arg(long, default_value_t = 0.5)]
    p_top: f64,
    /// Random fraction of the selection mask
    #[arg(long, default_value_t = 0.2)]
    p_rand: f64,
    /// Equal-frequency bins of the MI estimator
    #[arg(long, default_value_t = 8)]
    bins: usize,
    /// Bins of the discrete box labels
    #[arg(long, default_value_t = 3)]
    box_bins: usize,
    /// Which box feature the discrete labels bin (width|height|area|squareness)
    #[arg(long, default_value = "area")]
    box_feature: BoxFeature,
    /// Test fraction of the stratified split
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// L2 penalty of both probe heads
    #[arg(long, default_value_t = 1e-3)]
    probe_l2: f64,
    /// Training epochs
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Training batch size
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Hidden layer widths of the projection head
    #[arg(long, value_delimiter = ',', default_value = "256")]
    hidden: Vec<usize>,
    /// Output dimension of the projection head
    #[arg(long, default_value_t = 128)]
    k_out: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Output directory for artifacts
    #[arg(long)]
    out_dir: PathBuf,
}

fn build_plan(data: &DataArgs, run: &RunArgs) -> Result<ExperimentPlan> {
    let mut plan = ExperimentPlan::new(data.source()?, &run.out_dir);
    if !run.strategies.is_empty() {
        plan.strategies = run.strategies.clone();
    }
    plan.seeds = run.seeds.clone();
    plan.lambda = run.lambda;
    plan.margin = run.margin;
    plan.p_top = run.p_top;
    plan.p_rand = run.p_rand;
    plan.mi_bins = run.bins;
    plan.box_bins = run.box_bins;
    plan.box_source = run.box_feature;
    plan.test_fraction = run.test_fraction;
    plan.probe = ProbeConfig {
        classifier_l2: run.probe_l2,
        regressor_l2: run.probe_l2,
        ..ProbeConfig::default()
    };
    plan.train = TrainConfig {
        epochs: run.epochs,
        batch_size: run.batch_size,
        hidden_dims: run.hidden.clone(),
        output_dim: run.k_out,
        optimizer: AdamConfig {
            learning_rate: run.learning_rate,
            ..AdamConfig::default()
        },
    };
    Ok(plan)
}

fn main() {
    env_logger::init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::GenerateSynthetic(args) => {
            let dataset = trimine::dataset::generate_synthetic(
                &args.counts,
                args.k_in,
                args.coupling,
                args.data_seed,
            )
            .context("generating the synthetic dataset")?;
            std::fs::create_dir_all(&args.out_dir)
                .with_context(|| format!("creating {}", args.out_dir.display()))?;
            let embeddings = args.out_dir.join("embeddings.csv");
            let annotations = args.out_dir.join("annotations.csv");
            write_dataset(&dataset, &embeddings, &annotations)
                .context("writing the dataset CSVs")?;
            println!("wrote {}", embeddings.display());
            println!("wrote {}", annotations.display());
        }
        Command::RunComparison { data, run } => {
            let plan = build_plan(&data, &run)?;
            let report = run_comparison(&plan).context("running the comparison")?;
            println!("strategy        accuracy (mean +/- std)   r2 (mean +/- std)");
            for row in &report.rows {
                match (&row.status, &row.aggregate) {
                    (RunStatus::Ok, Some(agg)) => println!(
                        "{:<15} {:.4} +/- {:.4}           {:.4} +/- {:.4}",
                        row.strategy.to_string(),
                        agg.accuracy.mean,
                        agg.accuracy.std,
                        agg.r2.mean,
                        agg.r2.std
                    ),
                    _ => println!(
                        "{:<15} failed: {}",
                        row.strategy.to_string(),
                        row.error.as_deref().unwrap_or("unknown")
                    ),
                }
            }
            println!("wrote {}", report.csv_path.display());
            println!("wrote {}", report.json_path.display());
        }
        Command::RunSweep {
            data,
            run,
            p_top_grid,
            p_rand_grid,
            render_heatmaps,
        } => {
            let plan = build_plan(&data, &run)?;
            let grid = SweepGrid {
                p_top: p_top_grid,
                p_rand: p_rand_grid,
            };
            let report = run_sweep(&plan, &grid, render_heatmaps).context("running the sweep")?;
            let failed = report
                .cells
                .iter()
                .filter(|c| c.status == RunStatus::Failed)
                .count();
            println!(
                "{} cells completed, {} failed",
                report.cells.len() - failed,
                failed
            );
            println!("wrote {}", report.accuracy_csv.display());
            println!("wrote {}", report.r2_csv.display());
            println!("wrote {}", report.json_path.display());
            if let Some((acc, r2)) = &report.heatmaps {
                println!("wrote {}", acc.display());
                println!("wrote {}", r2.display());
            }
        }
        Command::MiReport {
            data,
            run,
            export_mask,
        } => {
            let plan = build_plan(&data, &run)?;
            let report = export_mi_report(&plan, export_mask).context("exporting the MI report")?;
            println!("class      count  mean      std       min       max");
            for s in &report.summaries {
                println!(
                    "{:<10} {:<6} {:.4}    {:.4}    {:.4}    {:.4}",
                    s.name, s.summary.count, s.summary.mean, s.summary.std, s.summary.min, s.summary.max
                );
            }
            println!("wrote {}", report.class_csv.display());
            println!("wrote {}", report.features_csv.display());
            if let Some(mask) = &report.mask_csv {
                println!("wrote {}", mask.display());
            }
        }
    }
    Ok(())
}
