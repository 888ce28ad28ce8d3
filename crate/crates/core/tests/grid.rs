use std::fs;

use bco::bco::post_budget;
use bco::harness::{read_rows, run_grid, ExperimentGrid, Overrides, ResultRow};

fn grid(
    envs: &[&str],
    demos: &[usize],
    alphas: &[f64],
    n_seeds: usize,
    overrides: Overrides,
) -> ExperimentGrid {
    ExperimentGrid {
        envs: envs.iter().map(|s| s.to_string()).collect(),
        demo_counts: demos.to_vec(),
        alphas: alphas.to_vec(),
        n_seeds,
        episodes_per_eval: 20,
        baseline_episodes: 20,
        base_seed: 0,
        overrides,
    }
}

fn fast() -> Overrides {
    Overrides {
        probe_episodes: Some(5),
        max_iterations: Some(3),
        ..Overrides::default()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn rows_aggregates_and_records() {
    let g = grid(&["chainworld"], &[1], &[0.0, 0.02], 3, fast());
    let dir = tempfile::tempdir().unwrap();
    let mut csv = Vec::new();
    let report = run_grid(&g, &mut csv, Some(&dir.path().join("records"))).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.rows.len(), 2 * (3 + 1));

    let header = String::from_utf8(csv.clone()).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "env,alpha,demos,seed,iteration,pre_interactions,post_interactions_cum,raw_return,scaled_return,stderr,wall_ms"
    );
    let rows = read_rows(csv.as_slice()).unwrap();
    assert_eq!(rows, report.rows);

    for cell in rows.chunks(4) {
        let (runs, agg) = cell.split_at(3);
        let agg = &agg[0];
        assert!(agg.is_aggregate() && runs.iter().all(|r| !r.is_aggregate()));
        let scaled: Vec<f64> = runs.iter().map(|r| r.scaled_return.unwrap()).collect();
        let m = mean(scaled.iter().copied());
        let se = (scaled.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 2.0 / 3.0).sqrt();
        assert!((agg.scaled_return.unwrap() - m).abs() <= 1e-12);
        assert!((agg.stderr.unwrap() - se).abs() <= 1e-12);
        let raw = mean(runs.iter().map(|r| r.raw_return.unwrap()));
        assert!((agg.raw_return.unwrap() - raw).abs() <= 1e-12);
        let post = mean(runs.iter().map(|r| r.post_interactions_cum.unwrap()));
        assert!((agg.post_interactions_cum.unwrap() - post).abs() <= 1e-12);

        for r in runs {
            let phases: u64 = r.iteration.parse().unwrap();
            let expected = phases * post_budget(r.alpha, r.pre_interactions);
            assert_eq!(r.post_interactions_cum.unwrap(), expected as f64);
        }
    }

    let mut names: Vec<String> = fs::read_dir(dir.path().join("records"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    assert!(names.contains(&"chainworld_d1_a0.02_s2.json".to_owned()));
}

#[test]
fn failing_runs_become_rows_and_the_sweep_continues() {
    let overrides = Overrides {
        pre_interactions: Some(1),
        ..fast()
    };
    let g = grid(&["chainworld"], &[1, 2], &[0.0], 2, overrides);
    let mut csv = Vec::new();
    let report = run_grid(&g, &mut csv, None).unwrap();
    assert_eq!(report.failures.len(), 4);
    assert_eq!(report.rows.len(), 2 * (2 + 1));
    let runs: Vec<&ResultRow> = report.rows.iter().filter(|r| !r.is_aggregate()).collect();
    assert!(runs
        .iter()
        .all(|r| r.is_failed() && r.scaled_return.is_none()));
    assert!(report
        .rows
        .iter()
        .filter(|r| r.is_aggregate())
        .all(|r| r.scaled_return.is_none()));
    assert_eq!(read_rows(csv.as_slice()).unwrap().len(), 6);
}

#[test]
fn invalid_grids_are_rejected_before_running() {
    let mut csv = Vec::new();
    assert!(run_grid(&grid(&["nowhere"], &[1], &[0.0], 1, fast()), &mut csv, None).is_err());
    assert!(run_grid(
        &grid(&["chainworld"], &[1], &[-1.0], 1, fast()),
        &mut csv,
        None
    )
    .is_err());
    assert!(csv.is_empty());
}

#[test]
fn post_demo_interactions_grow_with_alpha() {
    let overrides = Overrides {
        improvement_tolerance: Some(f64::NEG_INFINITY),
        ..fast()
    };
    let g = grid(&["mountaincar"], &[1, 10], &[0.0, 2e-3, 1e-2], 2, overrides);
    let report = run_grid(&g, Vec::new(), None).unwrap();
    assert!(report.failures.is_empty());
    for demos in [1, 10] {
        let post: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.is_aggregate() && r.demos == demos)
            .map(|r| r.post_interactions_cum.unwrap())
            .collect();
        assert_eq!(post, vec![0.0, 12.0, 60.0]);
    }
}
