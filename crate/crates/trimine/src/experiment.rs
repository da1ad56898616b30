//! Experiment orchestration: the five-setup comparison, the selection-ratio
//! sweep, and the relevance-score report.
//!
//! Comparison rows and sweep cells share one run path (`run_single`), so a
//! task-guided comparison row and the matching sweep cell agree bit-exactly
//! under identical configuration. Runs are distributed over a worker pool
//! with per-run derived seeds; results are collected in task order, so
//! artifacts do not depend on scheduling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    derive_box_features, discretize_box_labels, generate_synthetic, load_dataset, BoxFeature,
    BoxFeatureMatrix, Dataset, DiscreteBoxLabels,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, run_probe, stratified_split, AggregateResult, ProbeConfig, ProbeResult,
};
use crate::losses::{build_objective, LossConfig, Strategy};
use crate::mi::{per_class_mi_summary, relevance_scores, ClassSummary, MiVector, RelevanceScores};
use crate::report::{render_heatmap_svg, write_csv_with_config};
use crate::seeds;
use crate::selection::{build_mask, write_mask_csv, SelectionConfig};
use crate::train::{project_all, train_projection, TrainConfig};

/// Where the dataset comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Files {
        embeddings: PathBuf,
        annotations: PathBuf,
    },
    Synthetic {
        class_counts: Vec<usize>,
        embedding_dim: usize,
        coupling: f64,
        seed: u64,
    },
}

/// Everything one experiment needs, defaults materialized.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentPlan {
    pub data: DataSource,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub margin: f64,
    pub p_top: f64,
    pub p_rand: f64,
    /// Equal-frequency bins of the MI estimator.
    pub mi_bins: usize,
    /// Bins of the discrete box labels.
    pub box_bins: usize,
    /// Which raw feature the box labels are binned from.
    pub box_source: BoxFeature,
    pub test_fraction: f64,
    pub probe: ProbeConfig,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn new(data: DataSource, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentPlan {
            data,
            strategies: Strategy::all().to_vec(),
            seeds: (0..8).collect(),
            lambda: 0.5,
            margin: 1.0,
            p_top: 0.5,
            p_rand: 0.2,
            mi_bins: 8,
            box_bins: 3,
            box_source: BoxFeature::Area,
            test_fraction: 0.2,
            probe: ProbeConfig::default(),
            train: TrainConfig::default(),
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies listed".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds listed".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.margin <= 0.0 {
            return Err(Error::Config(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        SelectionConfig {
            p_top: self.p_top,
            p_rand: self.p_rand,
            seed: 0,
        }
        .validate()?;
        if self.mi_bins < 2 {
            return Err(Error::Config("mi bins must be >= 2".into()));
        }
        if self.box_bins < 2 {
            return Err(Error::Config("box bins must be >= 2".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// The dataset and every derived quantity the runs share.
pub struct Prepared {
    pub dataset: Dataset,
    pub features: BoxFeatureMatrix,
    pub box_labels: DiscreteBoxLabels,
    pub scores: RelevanceScores,
}

pub fn load_data(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Files {
            embeddings,
            annotations,
        } => load_dataset(embeddings, annotations),
        DataSource::Synthetic {
            class_counts,
            embedding_dim,
            coupling,
            seed,
        } => generate_synthetic(class_counts, *embedding_dim, *coupling, *seed),
    }
}

pub fn prepare(plan: &ExperimentPlan) -> Result<Prepared> {
    let dataset = load_data(&plan.data)?;
    let features = derive_box_features(&dataset);
    let box_labels = discretize_box_labels(&features, plan.box_source, plan.box_bins)?;
    let scores = relevance_scores(&features, &dataset.class_labels(), plan.mi_bins)?;
    Ok(Prepared {
        dataset,
        features,
        box_labels,
        scores,
    })
}

/// Train (unless baseline) and probe one strategy under one run seed.
///
/// The split, the selection seed, and every training stream derive from the
/// run seed, so the whole run is a pure function of (data, plan, strategy,
/// seed).
pub fn run_single(
    prepared: &Prepared,
    plan: &ExperimentPlan,
    strategy: Strategy,
    run_seed: u64,
) -> Result<ProbeResult> {
    let labels = prepared.dataset.class_labels();
    let (train_idx, test_idx) = stratified_split(&labels, plan.test_fraction, run_seed)?;
    let selection = (strategy == Strategy::TgMatl).then(|| SelectionConfig {
        p_top: plan.p_top,
        p_rand: plan.p_rand,
        seed: seeds::derive(run_seed, &[seeds::TAG_SELECTION]),
    });
    let loss_config = LossConfig {
        strategy,
        lambda: plan.lambda,
        margin: plan.margin,
        selection,
    };
    let scores = (strategy == Strategy::TgMatl).then_some(&prepared.scores);
    let objective = build_objective(&loss_config, &prepared.dataset, &prepared.box_labels, scores)?;
    let trained = train_projection(
        &prepared.dataset,
        &objective,
        &train_idx,
        &plan.train,
        run_seed,
    )?;
    let projected = project_all(trained.model.as_ref(), &prepared.dataset)?;
    run_probe(
        &projected,
        &labels,
        &prepared.features,
        &train_idx,
        &test_idx,
        &plan.probe,
        run_seed,
    )
}

fn thread_pool(task_count: usize) -> Result<rayon::ThreadPool> {
    let mut threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    if let Ok(raw) = std::env::var("TRIMINE_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => threads = threads.min(n),
            _ => log::warn!("ignoring invalid TRIMINE_THREADS value '{raw}'"),
        }
    }
    threads = threads.min(task_count.max(1));
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    plan: &'a ExperimentPlan,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<&'a SweepGrid>,
}

fn config_json(command: &'static str, plan: &ExperimentPlan, grid: Option<&SweepGrid>) -> Result<String> {
    serde_json::to_string(&ConfigEcho {
        tool: "trimine",
        version: env!("CARGO_PKG_VERSION"),
        command,
        plan,
        grid,
    })
    .map_err(|e| Error::Validation(format!("config serialization: {e}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub result: ProbeResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub runs: Vec<RunRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

pub struct ComparisonReport {
    pub rows: Vec<StrategyRow>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// Run every strategy over every seed and emit the comparison table.
pub fn run_comparison(plan: &ExperimentPlan) -> Result<ComparisonReport> {
    plan.validate()?;
    std::fs::create_dir_all(&plan.out_dir).map_err(|e| Error::io(&plan.out_dir, e))?;
    let prepared = prepare(plan)?;

    let tasks: Vec<(Strategy, u64)> = plan
        .strategies
        .iter()
        .flat_map(|&s| plan.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let pool = thread_pool(tasks.len())?;
    let outcomes: Vec<std::result::Result<ProbeResult, String>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(strategy, seed)| {
                run_single(&prepared, plan, strategy, seed).map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(plan.strategies.len());
    for (si, &strategy) in plan.strategies.iter().enumerate() {
        let mut runs = Vec::new();
        let mut first_error = None;
        for (ki, &seed) in plan.seeds.iter().enumerate() {
            match &outcomes[si * plan.seeds.len() + ki] {
                Ok(result) => runs.push(RunRecord {
                    seed,
                    result: result.clone(),
                }),
                Err(msg) => {
                    if first_error.is_none() {
                        first_error = Some(format!("seed {seed}: {msg}"));
                    }
                }
            }
        }
        let (status, aggregate_result) = if first_error.is_none() {
            let results: Vec<ProbeResult> = runs.iter().map(|r| r.result.clone()).collect();
            (RunStatus::Ok, Some(aggregate(&results)?))
        } else {
            (RunStatus::Failed, None)
        };
        rows.push(StrategyRow {
            strategy,
            status,
            error: first_error,
            runs,
            aggregate: aggregate_result,
        });
    }

    let config = config_json("run-comparison", plan, None)?;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|row| match (&row.status, &row.aggregate) {
            (RunStatus::Ok, Some(agg)) => format!(
                "{},{},{},{},{},ok",
                row.strategy, agg.accuracy.mean, agg.accuracy.std, agg.r2.mean, agg.r2.std
            ),
            _ => format!("{},,,,,failed", row.strategy),
        })
        .collect();
    let csv_path = plan.out_dir.join("comparison.csv");
    write_csv_with_config(
        &csv_path,
        &config,
        "strategy,accuracy_mean,accuracy_std,r2_mean,r2_std,status",
        &csv_rows,
    )?;

    let json_path = plan.out_dir.join("comparison.json");
    write_json(&json_path, &config, &rows)?;

    Ok(ComparisonReport {
        rows,
        csv_path,
        json_path,
    })
}

fn write_json<T: Serialize>(path: &Path, config: &str, body: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Artifact<'a, T> {
        config: serde_json::Value,
        rows: &'a T,
    }
    let config_value: serde_json::Value = serde_json::from_str(config)
        .map_err(|e| Error::Validation(format!("config echo: {e}")))?;
    let text = serde_json::to_string_pretty(&Artifact {
        config: config_value,
        rows: body,
    })
    .map_err(|e| Error::Validation(format!("artifact serialization: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// The selection-ratio grid of the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepGrid {
    pub p_top: Vec<f64>,
    pub p_rand: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            p_top: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            p_rand: vec![0.0, 0.1, 0.2, 0.3, 0.4],
        }
    }
}

impl SweepGrid {
    fn validate(&self) -> Result<()> {
        if self.p_top.is_empty() || self.p_rand.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        for &p in &self.p_top {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("grid p_top {p} outside (0, 1]")));
            }
        }
        for &p in &self.p_rand {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("grid p_rand {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub p_top: f64,
    pub p_rand: f64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub runs: Vec<RunRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateResult>,
}

pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub accuracy_csv: PathBuf,
    pub r2_csv: PathBuf,
    pub json_path: PathBuf,
    pub heatmaps: Option<(PathBuf, PathBuf)>,
}

/// Sweep the task-guided strategy over a (p_top, p_rand) grid, averaging
/// each cell over the plan's seeds.
pub fn run_sweep(
    plan: &ExperimentPlan,
    grid: &SweepGrid,
    render_heatmaps: bool,
) -> Result<SweepReport> {
    plan.validate()?;
    grid.validate()?;
    std::fs::create_dir_all(&plan.out_dir).map_err(|e| Error::io(&plan.out_dir, e))?;
    let prepared = prepare(plan)?;

    let mut cell_plans = Vec::new();
    for &p_top in &grid.p_top {
        for &p_rand in &grid.p_rand {
            let mut cell_plan = plan.clone();
            cell_plan.p_top = p_top;
            cell_plan.p_rand = p_rand;
            cell_plans.push(cell_plan);
        }
    }
    let tasks: Vec<(usize, u64)> = (0..cell_plans.len())
        .flat_map(|c| plan.seeds.iter().map(move |&seed| (c, seed)))
        .collect();
    let pool = thread_pool(tasks.len())?;
    let outcomes: Vec<std::result::Result<ProbeResult, String>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, seed)| {
                run_single(&prepared, &cell_plans[cell], Strategy::TgMatl, seed)
                    .map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut cells = Vec::with_capacity(cell_plans.len());
    for (c, cell_plan) in cell_plans.iter().enumerate() {
        let mut runs = Vec::new();
        let mut first_error = None;
        for (ki, &seed) in plan.seeds.iter().enumerate() {
            match &outcomes[c * plan.seeds.len() + ki] {
                Ok(result) => runs.push(RunRecord {
                    seed,
                    result: result.clone(),
                }),
                Err(msg) => {
                    if first_error.is_none() {
                        first_error = Some(format!("seed {seed}: {msg}"));
                    }
                }
            }
        }
        let (status, aggregate_result) = if first_error.is_none() {
            let results: Vec<ProbeResult> = runs.iter().map(|r| r.result.clone()).collect();
            (RunStatus::Ok, Some(aggregate(&results)?))
        } else {
            (RunStatus::Failed, None)
        };
        cells.push(SweepCell {
            p_top: cell_plan.p_top,
            p_rand: cell_plan.p_rand,
            status,
            error: first_error,
            runs,
            aggregate: aggregate_result,
        });
    }

    let config = config_json("run-sweep", plan, Some(grid))?;
    let render_rows = |metric: &dyn Fn(&AggregateResult) -> (f64, f64)| -> Vec<String> {
        cells
            .iter()
            .map(|cell| match &cell.aggregate {
                Some(agg) => {
                    let (mean, std) = metric(agg);
                    format!("{},{},{},{},ok", cell.p_top, cell.p_rand, mean, std)
                }
                None => format!("{},{},,,failed", cell.p_top, cell.p_rand),
            })
            .collect()
    };
    let header = "p_top,p_rand,metric_mean,metric_std,status";
    let accuracy_csv = plan.out_dir.join("sweep_accuracy.csv");
    write_csv_with_config(
        &accuracy_csv,
        &config,
        header,
        &render_rows(&|agg| (agg.accuracy.mean, agg.accuracy.std)),
    )?;
    let r2_csv = plan.out_dir.join("sweep_r2.csv");
    write_csv_with_config(
        &r2_csv,
        &config,
        header,
        &render_rows(&|agg| (agg.r2.mean, agg.r2.std)),
    )?;
    let json_path = plan.out_dir.join("sweep.json");
    write_json(&json_path, &config, &cells)?;

    let heatmaps = if render_heatmaps {
        let values = |metric: &dyn Fn(&AggregateResult) -> f64| -> Vec<Option<f64>> {
            cells
                .iter()
                .map(|c| c.aggregate.as_ref().map(metric))
                .collect()
        };
        let acc_svg = plan.out_dir.join("sweep_accuracy.svg");
        render_heatmap_svg(
            &acc_svg,
            "mean accuracy over seeds",
            "p_rand",
            "p_top",
            &grid.p_rand,
            &grid.p_top,
            &values(&|agg| agg.accuracy.mean),
        )?;
        let r2_svg = plan.out_dir.join("sweep_r2.svg");
        render_heatmap_svg(
            &r2_svg,
            "mean box-feature R2 over seeds",
            "p_rand",
            "p_top",
            &grid.p_rand,
            &grid.p_top,
            &values(&|agg| agg.r2.mean),
        )?;
        Some((acc_svg, r2_svg))
    } else {
        None
    };

    Ok(SweepReport {
        cells,
        accuracy_csv,
        r2_csv,
        json_path,
        heatmaps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedClassSummary {
    pub name: String,
    #[serde(flatten)]
    pub summary: ClassSummary,
}

pub struct MiReport {
    pub summaries: Vec<NamedClassSummary>,
    pub mi: MiVector,
    pub class_csv: PathBuf,
    pub features_csv: PathBuf,
    pub mask_csv: Option<PathBuf>,
}

/// Export the per-class relevance summary table and the per-feature MI
/// vector; optionally also the selection mask under the plan's ratios.
pub fn export_mi_report(plan: &ExperimentPlan, export_mask: bool) -> Result<MiReport> {
    plan.validate()?;
    std::fs::create_dir_all(&plan.out_dir).map_err(|e| Error::io(&plan.out_dir, e))?;
    let prepared = prepare(plan)?;
    let labels = prepared.dataset.class_labels();
    let summaries = per_class_mi_summary(&prepared.scores, &labels)?;
    let named: Vec<NamedClassSummary> = summaries
        .into_iter()
        .map(|summary| NamedClassSummary {
            name: prepared.dataset.class_names()[summary.class - 1].clone(),
            summary,
        })
        .collect();

    let config = config_json("mi-report", plan, None)?;
    let class_rows: Vec<String> = named
        .iter()
        .map(|s| {
            format!(
                "{},{},{},{},{},{}",
                s.name, s.summary.count, s.summary.mean, s.summary.std, s.summary.min, s.summary.max
            )
        })
        .collect();
    let class_csv = plan.out_dir.join("mi_report.csv");
    write_csv_with_config(
        &class_csv,
        &config,
        "class,count,mean,std,min,max",
        &class_rows,
    )?;

    let feature_rows: Vec<String> = prepared
        .features
        .features()
        .iter()
        .zip(&prepared.scores.mi.per_feature_nats)
        .map(|(f, mi)| format!("{f},{mi}"))
        .collect();
    let features_csv = plan.out_dir.join("mi_features.csv");
    write_csv_with_config(&features_csv, &config, "feature,mi_nats", &feature_rows)?;

    let mask_csv = if export_mask {
        let selection = SelectionConfig {
            p_top: plan.p_top,
            p_rand: plan.p_rand,
            seed: seeds::derive(
                plan.seeds.first().copied().unwrap_or(0),
                &[seeds::TAG_SELECTION],
            ),
        };
        let mask = build_mask(&prepared.scores, &labels, &selection)?;
        let path = plan.out_dir.join("selection_mask.csv");
        write_mask_csv(&prepared.dataset, &prepared.scores, &mask, &path)?;
        Some(path)
    } else {
        None
    };

    Ok(MiReport {
        summaries: named,
        mi: prepared.scores.mi.clone(),
        class_csv,
        features_csv,
        mask_csv,
    })
}
