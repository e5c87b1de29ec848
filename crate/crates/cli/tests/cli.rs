use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pricehedge::report::read_trajectory_csv;
use pricehedge::scenario::{bundled_scenario, save_scenario, SCENARIO_DIR_ENV};

fn pricehedge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pricehedge"))
        .args(args)
        .env_remove(SCENARIO_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pricehedge(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_writes_trajectories_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["run", "--scenario", "bundled", "--horizons", "1,6,8", "--out", out]);
    let s = bundled_scenario().unwrap();
    for h in [1, 6, 8] {
        let text = read(&dir.path().join(format!("trajectory_h{h}.csv")));
        assert!(text.starts_with("hour,lmp_bus1,lmp_bus2,lmp_bus3,flex,soc,import_trans,gen_dist,load,step_cost\n"));
        let lmp = column(&text, "lmp_bus3");
        for hour in [9, 10, 11, 12, 13, 18, 19, 20] {
            assert!(lmp[hour - 1] <= 75.0 + 1e-6, "H={h} hour {hour}");
        }
        let traj = read_trajectory_csv(&text, "3", Some(s.storage[0].clone()), h, 24).unwrap();
        assert_eq!(traj.steps.len(), 24);
    }
    let baseline = read(&dir.path().join("baseline.csv"));
    let above: Vec<usize> = column(&baseline, "lmp_bus3")
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 75.0)
        .map(|(i, _)| i + 1)
        .collect();
    assert_eq!(above, [9, 10, 11, 12, 13, 18, 19, 20]);
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    assert!(summary["label"].as_str().unwrap().starts_with("calibrated reconstruction"));
    assert_eq!(summary["horizons"].as_array().unwrap().len(), 3);
}

#[test]
fn csv_summary_on_request() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--horizons", "1", "--emit", "csv", "--out", dir.path().to_str().unwrap()]);
    let text = read(&dir.path().join("summary.csv"));
    assert!(text.starts_with("horizon,cost_per_mwh,saving_vs_baseline,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["run", "--horizons", "6", "--out", a.path().to_str().unwrap()]);
    ok(&["run", "--horizons", "6", "--out", b.path().to_str().unwrap()]);
    for f in ["trajectory_h6.csv", "baseline.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn zero_capacity_matches_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--ess-capacity", "0", "--horizons", "1,6", "--out", dir.path().to_str().unwrap()]);
    let base = read(&dir.path().join("baseline.csv"));
    for h in [1, 6] {
        let t = read(&dir.path().join(format!("trajectory_h{h}.csv")));
        assert_eq!(column(&t, "lmp_bus3"), column(&base, "lmp_bus3"));
        assert!(column(&t, "flex").iter().all(|&f| f == 0.0));
    }
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    for h in summary["horizons"].as_array().unwrap() {
        assert_eq!(h["saving_vs_baseline"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn cap_far_above_prices_leaves_prices_alone() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--pi-des", "1000", "--horizons", "1", "--out", dir.path().to_str().unwrap()]);
    let t = read(&dir.path().join("trajectory_h1.csv"));
    let base = read(&dir.path().join("baseline.csv"));
    assert_eq!(column(&t, "lmp_bus3"), column(&base, "lmp_bus3"));
    assert!(column(&t, "flex").iter().all(|&f| f <= 0.0), "the device never discharges");
}

#[test]
fn quantify_marks_exactly_the_expensive_hours() {
    let text = ok(&["quantify", "--scenario", "bundled"]);
    let flex = column(&text, "flex_required_bus3");
    let hours: Vec<usize> = (1..=24).filter(|&h| flex[h - 1] > 0.0).collect();
    assert_eq!(hours, [9, 10, 11, 12, 13, 18, 19, 20]);

    let low = ok(&["quantify", "--pi-des", "30"]);
    assert!(column(&low, "flex_required_bus3").iter().all(|&f| f > 0.0));
    let high = ok(&["quantify", "--pi-des", "140"]);
    assert!(column(&high, "flex_required_bus3").iter().all(|&f| f == 0.0));
}

#[test]
fn capacity_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", "--parameter", "ess-capacity", "--values", "0,0.5,1,1.5,2,2.6,3.5,5", "--out", dir.path().to_str().unwrap()]);
    let text = read(&dir.path().join("sweep_ess-capacity.csv"));
    let violated = column(&text, "cap_violated_hours");
    assert_eq!(violated.len(), 8);
    assert!(violated.windows(2).all(|w| w[1] <= w[0]), "{violated:?}");
    assert_eq!(violated[0], 8.0);
    assert_eq!(fs::read_dir(dir.path().join("sweep_ess-capacity")).unwrap().count(), 8);
}

#[test]
fn horizon_sweep_rewards_lookahead() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", "--parameter", "horizon", "--values", "1,6,8", "--out", dir.path().to_str().unwrap()]);
    let cost = column(&read(&dir.path().join("sweep_horizon.csv")), "cost_per_mwh");
    assert!(cost[1] <= cost[0] && cost[2] <= cost[0], "{cost:?}");
}

#[test]
fn single_point_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", "--parameter", "pi-des", "--values", "70", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(read(&dir.path().join("sweep_pi-des.csv")).lines().count(), 2);
}

#[test]
fn validate_accepts_the_bundled_scenario() {
    let out = ok(&["validate", "--strict"]);
    assert!(out.starts_with("ok:"));
}

#[test]
fn scenario_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = bundled_scenario().unwrap();
    s.name = "from-env".into();
    save_scenario(&s, dir.path()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pricehedge"))
        .arg("validate")
        .env(SCENARIO_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("from-env"));
}

#[test]
fn bad_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, "name = \"x\"\npi_des = \"oops\"\n").unwrap();
    let out = pricehedge(&["validate", "--scenario", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    save_scenario(&bundled_scenario().unwrap(), dir.path()).unwrap();
    let series = dir.path().join("series.csv");
    let short: String = read(&series).lines().take(24).map(|l| format!("{l}\n")).collect();
    fs::write(&series, short).unwrap();
    let out = pricehedge(&["run", "--scenario", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("series length"));

    assert_eq!(pricehedge(&["run", "--horizons", "0"]).status.code(), Some(2));
    assert_eq!(pricehedge(&["run", "--ess-initial-soc", "1.5"]).status.code(), Some(2));
    assert_eq!(pricehedge(&["sweep", "--parameter", "horizon", "--values", "2.5"]).status.code(), Some(2));
    assert_eq!(pricehedge(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn infeasible_hour_exits_with_3_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = bundled_scenario().unwrap();
    s.transmission.capacity = 1.0;
    s.hours[6].demand_lo = 10.0;
    s.hours[6].demand_hi = 10.0;
    save_scenario(&s, dir.path()).unwrap();
    let out_dir = dir.path().join("out");
    let out = pricehedge(&["run", "--scenario", dir.path().to_str().unwrap(), "--horizons", "1", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hour 7"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synthesize_reproduces_the_bundled_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synthesize", "--out", dir.path().to_str().unwrap()]);
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/bundled");
    for f in ["scenario.toml", "series.csv"] {
        assert_eq!(read(&dir.path().join(f)), read(&bundled.join(f)), "{f}");
    }
    let bad = pricehedge(&["synthesize", "--exceed-hours", "0,30", "--out", dir.path().to_str().unwrap()]);
    assert_ne!(bad.status.code(), Some(0));
}
