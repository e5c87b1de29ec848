//! Random network instances and oracles that never touch the hedged formulation.

use std::collections::BTreeMap;

use pricehedge::grid::{Bus, BusKind, Line, Network};
use pricehedge::lp::LpError;
use pricehedge::market::{build_opf_single, DispatchInputs, Generator, Load, MarketError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct OpfInstance {
    pub network: Network<f64>,
    pub inputs: DispatchInputs<f64>,
    /// Price-constrained buses, network order.
    pub constrained: Vec<String>,
}

/// A connected 3–5 bus network with an unlimited supplier at the slack, a few
/// cheaper capacity-limited units, elastic loads with `min = 0` (so zero
/// consumption is always feasible), optional line limits, and `k` capped buses.
pub fn random_opf(seed: u64, k: usize) -> OpfInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=5);
    let ids: Vec<String> = (1..=n).map(|i| i.to_string()).collect();

    let mut lines: Vec<Line<f64>> = Vec::new();
    let has = |a: usize, b: usize, lines: &Vec<Line<f64>>| {
        lines
            .iter()
            .any(|l| (l.from == ids[a] && l.to == ids[b]) || (l.from == ids[b] && l.to == ids[a]))
    };
    let add_line = |a: usize, b: usize, rng: &mut ChaCha8Rng, lines: &mut Vec<Line<f64>>| {
        let limit = rng.gen_bool(0.4).then(|| rng.gen_range(0.5..3.0));
        lines.push(Line {
            from: ids[a].clone(),
            to: ids[b].clone(),
            reactance: rng.gen_range(0.05..0.3),
            flow_limit: limit,
        });
    };
    for i in 1..n {
        let j = rng.gen_range(0..i);
        add_line(j, i, &mut rng, &mut lines);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b && !has(a, b, &lines) {
            add_line(a, b, &mut rng, &mut lines);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let capped: Vec<usize> = order.into_iter().take(k.min(n)).collect();

    let buses = (0..n)
        .map(|i| Bus {
            id: ids[i].clone(),
            kind: if i == 0 { BusKind::Slack } else { BusKind::Mixed },
            price_constrained: capped.contains(&i),
        })
        .collect();
    let network = Network {
        buses,
        lines,
        base_mva: 100.0,
    };

    let mut generators = vec![Generator {
        name: "import".into(),
        bus: ids[0].clone(),
        capacity: f64::INFINITY,
        cost: rng.gen_range(60.0..120.0),
    }];
    for g in 0..rng.gen_range(1..=3) {
        generators.push(Generator {
            name: format!("g{g}"),
            bus: ids[rng.gen_range(0..n)].clone(),
            capacity: rng.gen_range(0.3..2.5),
            cost: rng.gen_range(10.0..110.0),
        });
    }
    let mut loads = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if i == 0 || rng.gen_bool(0.7) || capped.contains(&i) {
            loads.push(Load {
                name: format!("d{id}"),
                bus: id.clone(),
                min: 0.0,
                max: rng.gen_range(0.5..3.0),
                utility: rng.gen_range(80.0..250.0),
            });
        }
    }
    let price_caps: BTreeMap<String, f64> = capped.iter().map(|&i| (ids[i].clone(), rng.gen_range(25.0..110.0))).collect();
    let constrained = (0..n).filter(|i| capped.contains(i)).map(|i| ids[i].clone()).collect();
    OpfInstance {
        network,
        inputs: DispatchInputs {
            generators,
            loads,
            price_caps,
        },
        constrained,
    }
}

/// Welfare and prices of the plain OPF with a fixed injection at some buses,
/// modelled as loads with `min = max = -injection` and zero utility.
/// `None` when no dispatch can absorb the injections.
pub fn opf_with_injections(
    network: &Network<f64>,
    inputs: &DispatchInputs<f64>,
    injections: &[(&str, f64)],
) -> Option<(f64, BTreeMap<String, f64>)> {
    let mut inputs = inputs.clone();
    for (i, &(bus, x)) in injections.iter().enumerate() {
        inputs.loads.push(Load {
            name: format!("inj{i}"),
            bus: bus.to_string(),
            min: -x,
            max: -x,
            utility: 0.0,
        });
    }
    let model = build_opf_single(network, &inputs).expect("instance builds");
    match model.solve() {
        Ok(sol) => {
            let lmp = network
                .buses
                .iter()
                .map(|b| (b.id.clone(), model.extract_lmp(&sol, &b.id, 0).unwrap()))
                .collect();
            Some((sol.objective, lmp))
        }
        Err(MarketError::Solver(LpError::Infeasible)) => None,
        Err(e) => panic!("unexpected solver failure: {e}"),
    }
}

/// Smallest injection at `bus` that brings its plain-OPF price to `cap` or
/// below, by doubling then bisection down to `tol` MW. Injections that cannot
/// be absorbed count as meeting the cap.
pub fn bisection_flex(network: &Network<f64>, inputs: &DispatchInputs<f64>, bus: &str, cap: f64, tol: f64) -> f64 {
    let meets = |x: f64| match opf_with_injections(network, inputs, &[(bus, x)]) {
        Some((_, lmp)) => lmp[bus] <= cap + 1e-9,
        None => true,
    };
    if meets(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while !meets(hi) {
        hi *= 2.0;
        assert!(hi < 1e6, "cap never met");
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
