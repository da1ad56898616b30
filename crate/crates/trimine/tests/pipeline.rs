//! End-to-end consistency checks across the experiment surfaces.

use trimine::dataset::{generate_synthetic, write_dataset};
use trimine::experiment::{
    run_comparison, run_sweep, DataSource, ExperimentPlan, RunStatus, SweepGrid,
};
use trimine::losses::Strategy;
use trimine::train::TrainConfig;

fn tiny_plan(out_dir: &std::path::Path) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(
        DataSource::Synthetic {
            class_counts: vec![10, 8, 8],
            embedding_dim: 6,
            coupling: 0.7,
            seed: 13,
        },
        out_dir,
    );
    plan.seeds = vec![0, 1, 2];
    plan.train = TrainConfig {
        epochs: 4,
        batch_size: 8,
        hidden_dims: vec![6],
        output_dim: 4,
        ..TrainConfig::default()
    };
    plan
}

#[test]
fn file_and_synthetic_sources_agree() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic(&[10, 8, 8], 6, 0.7, 13).unwrap();
    let emb = dir.path().join("embeddings.csv");
    let ann = dir.path().join("annotations.csv");
    write_dataset(&ds, &emb, &ann).unwrap();

    let mut from_files = tiny_plan(&dir.path().join("files"));
    from_files.data = DataSource::Files {
        embeddings: emb,
        annotations: ann,
    };
    from_files.strategies = vec![Strategy::Cltl];
    let mut from_synth = tiny_plan(&dir.path().join("synth"));
    from_synth.strategies = vec![Strategy::Cltl];

    let a = run_comparison(&from_files).unwrap();
    let b = run_comparison(&from_synth).unwrap();
    assert_eq!(a.rows[0].aggregate, b.rows[0].aggregate);
}

#[test]
fn single_cell_sweep_matches_comparison_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = tiny_plan(&dir.path().join("cmp"));
    plan.strategies = vec![Strategy::TgMatl];
    plan.p_top = 0.6;
    plan.p_rand = 0.1;
    let comparison = run_comparison(&plan).unwrap();

    let mut sweep_plan = tiny_plan(&dir.path().join("sweep"));
    sweep_plan.p_top = 0.9; // overridden per cell
    sweep_plan.p_rand = 0.9;
    let grid = SweepGrid {
        p_top: vec![0.6],
        p_rand: vec![0.1],
    };
    let sweep = run_sweep(&sweep_plan, &grid, false).unwrap();

    assert_eq!(sweep.cells.len(), 1);
    assert_eq!(
        sweep.cells[0].aggregate.as_ref().unwrap(),
        comparison.rows[0].aggregate.as_ref().unwrap()
    );
}

#[test]
fn degenerate_sweep_cell_matches_matl_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = tiny_plan(&dir.path().join("matl"));
    plan.strategies = vec![Strategy::Matl];
    let comparison = run_comparison(&plan).unwrap();

    let sweep_plan = tiny_plan(&dir.path().join("cell"));
    let grid = SweepGrid {
        p_top: vec![1.0],
        p_rand: vec![0.0],
    };
    let sweep = run_sweep(&sweep_plan, &grid, false).unwrap();

    assert_eq!(
        sweep.cells[0].aggregate.as_ref().unwrap(),
        comparison.rows[0].aggregate.as_ref().unwrap()
    );
}

#[test]
fn failed_strategy_does_not_abort_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = tiny_plan(dir.path());
    plan.strategies = vec![Strategy::Cltl, Strategy::Wtl];
    // A learning rate this size overflows the projection on the second
    // forward pass, so cltl aborts while wtl (untrained) stays fine.
    plan.train.optimizer.learning_rate = 1e160;
    let report = run_comparison(&plan).unwrap();
    assert_eq!(report.rows[0].status, RunStatus::Failed);
    assert!(report.rows[0].error.is_some());
    assert_eq!(report.rows[1].status, RunStatus::Ok);
    let csv = std::fs::read_to_string(&report.csv_path).unwrap();
    assert!(csv.contains("cltl,,,,,failed"));
    assert!(csv.lines().any(|l| l.starts_with("wtl,") && l.ends_with(",ok")));
}

#[test]
fn sweep_renders_optional_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = tiny_plan(dir.path());
    plan.seeds = vec![0, 1];
    let grid = SweepGrid {
        p_top: vec![0.5, 1.0],
        p_rand: vec![0.0, 0.2],
    };
    let report = run_sweep(&plan, &grid, true).unwrap();
    let (acc, r2) = report.heatmaps.as_ref().unwrap();
    assert!(acc.exists());
    assert!(r2.exists());
    let svg = std::fs::read_to_string(acc).unwrap();
    assert_eq!(svg.matches("<rect").count(), 4);
}
