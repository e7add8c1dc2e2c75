use std::fs;

use irbl::sim::ScenarioKind;
use irbl_cli::{run_suite, suite_runs, ExperimentConfig, FovPreset};

fn reports_under(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() == "report.json" {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn worker_count_does_not_change_results() {
    let mut cfg = ExperimentConfig::new(ScenarioKind::CircleObstacles, 3);
    cfg.seeds = vec![0, 1];
    cfg.suite.fovs = vec![FovPreset::Half, FovPreset::TwoD];
    cfg.suite.deltas = vec![0.2];
    cfg.sim.t_max = 8.0;
    let keys = suite_runs(&cfg);

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_suite(&cfg, &keys, a.path(), 1).unwrap();
    run_suite(&cfg, &keys, b.path(), 3).unwrap();

    assert_eq!(fs::read(a.path().join("summary.csv")).unwrap(), fs::read(b.path().join("summary.csv")).unwrap());
    let (ra, rb) = (reports_under(a.path()), reports_under(b.path()));
    assert_eq!(ra.len(), keys.len());
    assert_eq!(ra, rb);
}
