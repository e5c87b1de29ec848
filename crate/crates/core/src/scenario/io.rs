//! Scenario files: a TOML document for topology, sites and storage, plus a
//! CSV with one row per hour (`hour,a_trans,a_dist,b_load,demand_lo,demand_hi`
//! and an optional `pi_des` column overriding the scalar cap).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{invalid, GeneratorSite, HourlyData, Scenario, ScenarioError, Strictness};
use crate::grid::{Bus, BusKind, Line, Network};
use crate::storage::StorageSpec;

/// Environment variable naming the directory that holds `scenario.toml` when
/// no scenario is given explicitly.
pub const SCENARIO_DIR_ENV: &str = "PRICEHEDGE_SCENARIO_DIR";

const CONFIG_FILE: &str = "scenario.toml";
const SERIES_FILE: &str = "series.csv";

const BUNDLED_CONFIG: &str = include_str!("../../scenarios/bundled/scenario.toml");
const BUNDLED_SERIES: &str = include_str!("../../scenarios/bundled/series.csv");

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    #[serde(default = "default_horizon")]
    horizon: usize,
    pi_des: f64,
    #[serde(default = "default_base")]
    base_mva: f64,
    series: String,
    #[serde(rename = "bus")]
    buses: Vec<RawBus>,
    #[serde(rename = "line")]
    lines: Vec<RawLine>,
    transmission: RawSite,
    distributed: RawSite,
    load: RawLoadSite,
    #[serde(default, rename = "storage", skip_serializing_if = "Vec::is_empty")]
    storage: Vec<RawStorage>,
}

fn default_horizon() -> usize {
    24
}

fn default_base() -> f64 {
    100.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: String,
    kind: BusKind,
    #[serde(default)]
    price_constrained: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    from: String,
    to: String,
    reactance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flow_limit: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSite {
    bus: String,
    /// Omitted means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoadSite {
    bus: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStorage {
    host_bus: String,
    capacity_mwh: f64,
    power_mw: f64,
    #[serde(default)]
    loss_mwh: f64,
    initial_soc: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawHour {
    hour: usize,
    a_trans: f64,
    a_dist: f64,
    b_load: f64,
    demand_lo: f64,
    demand_hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi_des: Option<f64>,
}

/// Where a scenario comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioSource {
    Bundled,
    Path(PathBuf),
}

/// Maps a command-line argument to a source: `bundled`, a config file, or a
/// directory holding `scenario.toml`. Without an argument the directory in
/// [`SCENARIO_DIR_ENV`] is used, falling back to the bundled scenario.
pub fn resolve_source(arg: Option<&str>) -> ScenarioSource {
    let from_path = |p: PathBuf| {
        if p.is_dir() {
            ScenarioSource::Path(p.join(CONFIG_FILE))
        } else {
            ScenarioSource::Path(p)
        }
    };
    match arg {
        Some("bundled") => ScenarioSource::Bundled,
        Some(p) => from_path(PathBuf::from(p)),
        None => match std::env::var_os(SCENARIO_DIR_ENV) {
            Some(dir) => from_path(PathBuf::from(dir)),
            None => ScenarioSource::Bundled,
        },
    }
}

impl ScenarioSource {
    pub fn load(&self, strictness: Strictness) -> Result<Scenario<f64>, ScenarioError> {
        match self {
            ScenarioSource::Bundled => bundled_scenario(),
            ScenarioSource::Path(p) => load_scenario(p, strictness),
        }
    }
}

/// The calibrated scenario shipped with the crate.
pub fn bundled_scenario() -> Result<Scenario<f64>, ScenarioError> {
    load_scenario_from_str(BUNDLED_CONFIG, BUNDLED_SERIES, Strictness::Strict)
}

/// Reads a scenario config and the series file it names (relative to the config).
pub fn load_scenario(path: &Path, strictness: Strictness) -> Result<Scenario<f64>, ScenarioError> {
    let config = read(path)?;
    let raw: RawConfig = parse_toml(&config, path)?;
    let series_path = path.parent().unwrap_or(Path::new(".")).join(&raw.series);
    let series = read(&series_path)?;
    assemble(raw, &series, &series_path.display().to_string(), strictness)
}

pub fn load_scenario_from_str(config: &str, series: &str, strictness: Strictness) -> Result<Scenario<f64>, ScenarioError> {
    let raw: RawConfig = parse_toml(config, Path::new(CONFIG_FILE))?;
    assemble(raw, series, SERIES_FILE, strictness)
}

/// Writes `scenario.toml` and `series.csv` into `dir`, returning the config path.
pub fn save_scenario(scenario: &Scenario<f64>, dir: &Path) -> Result<PathBuf, ScenarioError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| ScenarioError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (config, series) = render(scenario)?;
    let config_path = dir.join(CONFIG_FILE);
    fs::write(&config_path, config).map_err(io_err(&config_path))?;
    let series_path = dir.join(SERIES_FILE);
    fs::write(&series_path, series).map_err(io_err(&series_path))?;
    Ok(config_path)
}

/// Serializes a scenario to its config and series texts.
pub(crate) fn render(scenario: &Scenario<f64>) -> Result<(String, String), ScenarioError> {
    let first_cap = scenario.hours.first().map(|h| h.pi_des).unwrap_or(0.0);
    let uniform_cap = scenario.hours.iter().all(|h| h.pi_des == first_cap);
    let finite = |x: f64| x.is_finite().then_some(x);
    let raw = RawConfig {
        name: scenario.name.clone(),
        horizon: scenario.horizon(),
        pi_des: first_cap,
        base_mva: scenario.network.base_mva,
        series: SERIES_FILE.to_string(),
        buses: scenario
            .network
            .buses
            .iter()
            .map(|b| RawBus {
                id: b.id.clone(),
                kind: b.kind,
                price_constrained: b.price_constrained,
            })
            .collect(),
        lines: scenario
            .network
            .lines
            .iter()
            .map(|l| RawLine {
                from: l.from.clone(),
                to: l.to.clone(),
                reactance: l.reactance,
                flow_limit: l.flow_limit,
            })
            .collect(),
        transmission: RawSite {
            bus: scenario.transmission.bus.clone(),
            capacity: finite(scenario.transmission.capacity),
        },
        distributed: RawSite {
            bus: scenario.distributed.bus.clone(),
            capacity: finite(scenario.distributed.capacity),
        },
        load: RawLoadSite {
            bus: scenario.load_bus.clone(),
        },
        storage: scenario
            .storage
            .iter()
            .map(|s| RawStorage {
                host_bus: s.host_bus.clone(),
                capacity_mwh: s.capacity,
                power_mw: s.power_bound,
                loss_mwh: s.loss,
                initial_soc: s.initial_soc,
            })
            .collect(),
    };
    let config = toml::to_string(&raw).map_err(|e| invalid("serialization", e.to_string()))?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    for (t, h) in scenario.hours.iter().enumerate() {
        writer
            .serialize(RawHour {
                hour: t + 1,
                a_trans: h.a_trans,
                a_dist: h.a_dist,
                b_load: h.b_load,
                demand_lo: h.demand_lo,
                demand_hi: h.demand_hi,
                pi_des: (!uniform_cap).then_some(h.pi_des),
            })
            .map_err(|e| invalid("serialization", e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| invalid("serialization", e.to_string()))?;
    let series = String::from_utf8(bytes).expect("csv output is utf-8");
    Ok((config, series))
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_toml(text: &str, path: &Path) -> Result<RawConfig, ScenarioError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ScenarioError::Parse {
            file: path.display().to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

fn parse_series(text: &str, file: &str) -> Result<Vec<RawHour>, ScenarioError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<Result<Vec<RawHour>, _>>()
        .map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.field().map_or(0, |f| f as usize + 1),
                _ => 0,
            };
            ScenarioError::Parse {
                file: file.to_string(),
                line,
                column,
                message: e.to_string(),
            }
        })
}

fn assemble(raw: RawConfig, series: &str, series_file: &str, strictness: Strictness) -> Result<Scenario<f64>, ScenarioError> {
    let rows = parse_series(series, series_file)?;
    if rows.len() != raw.horizon {
        return Err(invalid(
            "series length",
            format!("expected {} hourly rows, found {}", raw.horizon, rows.len()),
        ));
    }
    for (t, row) in rows.iter().enumerate() {
        if row.hour != t + 1 {
            return Err(invalid(
                "hour index",
                format!("row {} carries hour {}, expected {}", t + 1, row.hour, t + 1),
            ));
        }
    }
    let capacity = |c: Option<f64>| c.unwrap_or(f64::INFINITY);
    let scenario = Scenario {
        name: raw.name,
        network: Network {
            buses: raw
                .buses
                .into_iter()
                .map(|b| Bus {
                    id: b.id,
                    kind: b.kind,
                    price_constrained: b.price_constrained,
                })
                .collect(),
            lines: raw
                .lines
                .into_iter()
                .map(|l| Line {
                    from: l.from,
                    to: l.to,
                    reactance: l.reactance,
                    flow_limit: l.flow_limit,
                })
                .collect(),
            base_mva: raw.base_mva,
        },
        transmission: GeneratorSite {
            bus: raw.transmission.bus,
            capacity: capacity(raw.transmission.capacity),
        },
        distributed: GeneratorSite {
            bus: raw.distributed.bus,
            capacity: capacity(raw.distributed.capacity),
        },
        load_bus: raw.load.bus,
        hours: rows
            .into_iter()
            .map(|r| HourlyData {
                a_trans: r.a_trans,
                a_dist: r.a_dist,
                b_load: r.b_load,
                demand_lo: r.demand_lo,
                demand_hi: r.demand_hi,
                pi_des: r.pi_des.unwrap_or(raw.pi_des),
            })
            .collect(),
        storage: raw
            .storage
            .into_iter()
            .map(|s| StorageSpec {
                host_bus: s.host_bus,
                capacity: s.capacity_mwh,
                power_bound: s.power_mw,
                loss: s.loss_mwh,
                initial_soc: s.initial_soc,
            })
            .collect(),
    };
    scenario.validate(strictness)?;
    Ok(scenario)
}
