use std::collections::BTreeSet;
use std::fs;

use pricehedge::market::compute_flex_required;
use pricehedge::mpc::run_baseline;
use pricehedge::scenario::{
    bundled_scenario, load_scenario, resolve_source, save_scenario, synthesize_apx_like, CalibrationTargets, ScenarioSource,
    Strictness, DEFAULT_SEED, SCENARIO_DIR_ENV,
};

#[test]
fn save_then_load_is_field_for_field() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [1, 2, DEFAULT_SEED] {
        let s = synthesize_apx_like(seed, &CalibrationTargets::default()).unwrap();
        let path = save_scenario(&s, dir.path()).unwrap();
        assert_eq!(load_scenario(&path, Strictness::Strict).unwrap(), s);
    }
}

#[test]
fn same_seed_writes_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = synthesize_apx_like(11, &CalibrationTargets::default()).unwrap();
    save_scenario(&s, a.path()).unwrap();
    save_scenario(&synthesize_apx_like(11, &CalibrationTargets::default()).unwrap(), b.path()).unwrap();
    for f in ["scenario.toml", "series.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn no_target_hours_means_no_flexibility() {
    let targets = CalibrationTargets { exceed_hours: BTreeSet::new(), ..Default::default() };
    let s = synthesize_apx_like(DEFAULT_SEED, &targets).unwrap();
    for t in 0..s.horizon() {
        let r = compute_flex_required(&s.network, &s.dispatch_inputs(t)).unwrap();
        assert!(r.flex_required.values().all(|&f| f == 0.0), "hour {}", t + 1);
    }
}

#[test]
fn bundled_baseline_is_feasible_every_hour() {
    let s = bundled_scenario().unwrap();
    s.validate(Strictness::Strict).unwrap();
    let base = run_baseline(&s).unwrap();
    assert_eq!(base.steps.len(), 24);
}

#[test]
fn other_target_sets_calibrate() {
    let targets = CalibrationTargets { exceed_hours: [7, 8, 19].into(), pi_des: 60.0, ..Default::default() };
    let s = synthesize_apx_like(5, &targets).unwrap();
    assert!(s.hours.iter().all(|h| h.pi_des == 60.0));
}

#[test]
fn directory_sources_resolve_to_their_config() {
    let dir = tempfile::tempdir().unwrap();
    save_scenario(&bundled_scenario().unwrap(), dir.path()).unwrap();
    let arg = dir.path().to_str().unwrap();
    assert_eq!(resolve_source(Some(arg)), ScenarioSource::Path(dir.path().join("scenario.toml")));
    let s = resolve_source(Some(arg)).load(Strictness::Lenient).unwrap();
    assert_eq!(s, bundled_scenario().unwrap());
    // The variable is only consulted when no argument is given.
    assert!(!SCENARIO_DIR_ENV.is_empty());
}

#[test]
fn missing_series_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = save_scenario(&bundled_scenario().unwrap(), dir.path()).unwrap();
    fs::remove_file(dir.path().join("series.csv")).unwrap();
    let err = load_scenario(&path, Strictness::Lenient).unwrap_err();
    assert!(err.to_string().contains("series.csv"), "{err}");
}
