//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use pricehedge::lp::{self, complementary_slackness_residual, dual_objective};
use pricehedge::market::compute_flex_required;
use pricehedge::mpc::{run_baseline, run_receding, savings, StepRecord, Trajectory};
use pricehedge::scenario::{bundled_scenario, uncapped_lmp};

use common::instances::{bisection_flex, random_opf};
use common::random_bounded_lp;

type Outcome = Result<String, String>;

fn strong_duality() -> Outcome {
    let start = Instant::now();
    let (mut gap, mut cs) = (0.0f64, 0.0f64);
    for seed in 0..200 {
        let prog = random_bounded_lp(seed, 8, 8);
        let sol = lp::solve(&prog).map_err(|e| format!("seed {seed}: {e}"))?;
        gap = gap.max((sol.objective - dual_objective(&prog, &sol).unwrap()).abs());
        cs = cs.max(complementary_slackness_residual(&prog, &sol));
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("200 programs, max gap {gap:.1e}, max CS residual {cs:.1e}, {secs:.2}s");
    (gap <= 1e-6 && cs <= 1e-8 && secs < 5.0).then_some(msg.clone()).ok_or(msg)
}

fn cap_theorem() -> Outcome {
    let mut binding = 0;
    for seed in 0..50 {
        let inst = random_opf(1000 + seed, 1 + (seed as usize % 2));
        let r = compute_flex_required(&inst.network, &inst.inputs).map_err(|e| format!("seed {seed}: {e}"))?;
        for bus in &inst.constrained {
            let cap = inst.inputs.price_caps[bus];
            let lmp = r.lmp[bus];
            if lmp > cap + 1e-6 {
                return Err(format!("seed {seed}, bus {bus}: price {lmp} above cap {cap}"));
            }
            if r.flex_required[bus] > 1e-6 {
                binding += 1;
                if (lmp - cap).abs() > 1e-6 {
                    return Err(format!("seed {seed}, bus {bus}: flex dispatched but price {lmp} != cap {cap}"));
                }
            }
        }
    }
    Ok(format!("50 instances, {binding} capped buses with flexibility dispatched"))
}

fn bisection() -> Outcome {
    let (mut nontrivial, mut checked, mut worst) = (0, 0, 0.0f64);
    let mut seed = 5000;
    while nontrivial < 20 {
        let inst = random_opf(seed, 1);
        let bus = &inst.constrained[0];
        let cap = inst.inputs.price_caps[bus];
        let r = compute_flex_required(&inst.network, &inst.inputs).map_err(|e| format!("seed {seed}: {e}"))?;
        let oracle = bisection_flex(&inst.network, &inst.inputs, bus, cap, 1e-6);
        let err = (r.flex_required[bus] - oracle).abs();
        worst = worst.max(err);
        if err > 1e-5 {
            return Err(format!("seed {seed}: LP {} vs bisection {oracle}", r.flex_required[bus]));
        }
        checked += 1;
        if oracle > 1e-6 {
            nontrivial += 1;
        }
        seed += 1;
    }
    Ok(format!("{checked} instances ({nontrivial} with flexibility needed), max deviation {worst:.1e} MW"))
}

fn replay() -> Outcome {
    let s = bundled_scenario().map_err(|e| e.to_string())?;
    let mut runs = 0;
    let mut worst = 0.0f64;
    for (capacity, loss, soc) in [(2.6, 0.0, 0.75), (1.0, 0.0, 0.2), (4.0, 0.02, 0.5), (0.0, 0.0, 0.0)] {
        let mut spec = s.storage[0].clone();
        spec.capacity = capacity;
        spec.loss = loss;
        spec.initial_soc = soc;
        for h in 1..=8 {
            let t = run_receding(&s, &spec, h).map_err(|e| e.to_string())?;
            let replayed = t.replay().map_err(|e| format!("H={h}: {e}"))?;
            let mut energy = spec.capacity * spec.initial_soc;
            for (r, e) in t.steps.iter().zip(&replayed) {
                worst = worst.max((r.soc - e).abs());
                if r.flex.abs() > spec.power_bound + 1e-9 || r.soc < -1e-9 || r.soc > spec.capacity + 1e-9 {
                    return Err(format!("H={h} hour {}: box violated", r.hour));
                }
                let chained = energy - spec.loss - r.flex;
                if (chained - r.soc).abs() > 1e-9 {
                    return Err(format!("H={h} hour {}: chain off by {}", r.hour, chained - r.soc));
                }
                energy = r.soc;
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs replayed, max deviation {worst:.1e} MWh"))
}

fn qualitative() -> Outcome {
    const HOURS: [usize; 8] = [9, 10, 11, 12, 13, 18, 19, 20];
    let s = bundled_scenario().map_err(|e| e.to_string())?;
    if s.hours.iter().any(|h| h.pi_des != 75.0) || s.storage[0].capacity != 2.6 || s.storage[0].initial_soc != 0.75 {
        return Err("bundled scenario is not at the reference settings".into());
    }
    let uncapped = uncapped_lmp(&s).map_err(|e| e.to_string())?;
    let above: Vec<usize> = (1..=24).filter(|&h| uncapped[h - 1] > 75.0).collect();
    if above != HOURS {
        return Err(format!("(a) uncapped price above 75 in {above:?}"));
    }
    let base = run_baseline(&s).map_err(|e| e.to_string())?;
    let mut runs = BTreeMap::new();
    for h in [1, 6, 8] {
        let t = run_receding(&s, &s.storage[0], h).map_err(|e| e.to_string())?;
        let lmp = t.load_lmp();
        if let Some(&hour) = HOURS.iter().find(|&&hour| lmp[hour - 1] > 75.0 + 1e-6) {
            return Err(format!("(b) H={h} hour {hour}: price {}", lmp[hour - 1]));
        }
        if h > 1 && !t.steps[..8].iter().any(|r| r.flex < 0.0) {
            return Err(format!("(c) H={h} does not pre-charge before hour 9"));
        }
        runs.insert(h, t);
    }
    let report = savings(&runs, &base).map_err(|e| e.to_string())?;
    let cost = |h| report.get(h).unwrap().cost_per_mwh;
    if !(cost(6) <= cost(1) && cost(8) <= cost(1)) {
        return Err(format!("(d) cost H=1 {:.4}, H=6 {:.4}, H=8 {:.4}", cost(1), cost(6), cost(8)));
    }
    Ok(format!(
        "(a)-(d) hold; €/MWh baseline {:.2}, H=1 {:.2}, H=6 {:.2}, H=8 {:.2} (calibrated reconstruction)",
        report.baseline_cost_per_mwh,
        cost(1),
        cost(6),
        cost(8)
    ))
}

/// A one-hour trajectory paying `price` for 1 MWh.
fn flat(price: f64) -> Trajectory<f64> {
    Trajectory {
        buses: vec!["3".into()],
        load_bus: "3".into(),
        horizon: 1,
        length: 1,
        storage: None,
        steps: vec![StepRecord {
            hour: 1,
            lmp: vec![price],
            flex: 0.0,
            soc: 0.0,
            import_trans: 1.0,
            gen_dist: 0.0,
            load: 1.0,
            step_cost: price,
            objective: 0.0,
        }],
    }
}

fn metric_consistency() -> Outcome {
    let base = 100.0;
    let myopic = base - 23.53;
    let runs = BTreeMap::from([(1, flat(myopic)), (6, flat(myopic - 10.24)), (8, flat(myopic - 7.76))]);
    let report = savings(&runs, &flat(base)).map_err(|e| e.to_string())?;
    let pct = |h| report.get(h).unwrap().forecast_gain_percent.unwrap();
    let (p6, p8) = (pct(6), pct(8));
    let msg = format!("gains of 10.24 and 7.76 on 23.53 give {p6:.2}% and {p8:.2}%");
    ((43.2..=43.8).contains(&p6) && (32.7..=33.3).contains(&p8)).then_some(msg.clone()).ok_or(msg)
}

fn performance() -> Outcome {
    let s = bundled_scenario().map_err(|e| e.to_string())?;
    let start = Instant::now();
    run_receding(&s, &s.storage[0], 8).map_err(|e| e.to_string())?;
    let one = start.elapsed().as_secs_f64();
    let start = Instant::now();
    for h in 1..=8 {
        run_receding(&s, &s.storage[0], h).map_err(|e| e.to_string())?;
    }
    let sweep = start.elapsed().as_secs_f64();
    let msg = format!("H=8 run {one:.3}s, sweep H=1..8 {sweep:.3}s");
    (one < 2.0 && sweep < 20.0).then_some(msg.clone()).ok_or(msg)
}

fn null_device() -> Outcome {
    let s = bundled_scenario().map_err(|e| e.to_string())?;
    let base = run_baseline(&s).map_err(|e| e.to_string())?;
    let mut spec = s.storage[0].clone();
    spec.capacity = 0.0;
    let mut worst = 0.0f64;
    for h in 1..=8 {
        let t = run_receding(&s, &spec, h).map_err(|e| e.to_string())?;
        for (a, b) in t.steps.iter().zip(&base.steps) {
            for (x, y) in a.lmp.iter().zip(&b.lmp) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    let msg = format!("H=1..8, max price deviation {worst:.1e}");
    (worst <= 1e-9).then_some(msg.clone()).ok_or(msg)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("strong duality", strong_duality),
        ("price-cap theorem", cap_theorem),
        ("bisection equivalence", bisection),
        ("storage replay", replay),
        ("bundled day, qualitative", qualitative),
        ("savings metric arithmetic", metric_consistency),
        ("performance", performance),
        ("null device", null_device),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
