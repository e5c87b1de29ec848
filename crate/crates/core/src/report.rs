//! Plot-ready outputs: trajectory CSVs, savings summaries, flexibility tables
//! and sweep rows. Numbers are written in shortest round-trip form, so a file
//! read back reproduces the trajectory bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::mpc::{SavingsReport, StepRecord, Trajectory};
use crate::scalar::Scalar;
use crate::storage::StorageSpec;

/// Label attached to every monetary output of a synthesized scenario.
pub const RECONSTRUCTION_LABEL: &str = "calibrated reconstruction";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("trajectory invalid: {0}")]
    Invalid(String),
}

fn csv_err(e: impl std::fmt::Display) -> ReportError {
    ReportError::Csv(e.to_string())
}

/// Writes `contents` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(contents)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn trajectory_header(buses: &[String]) -> Vec<String> {
    let mut header = vec!["hour".to_string()];
    header.extend(buses.iter().map(|b| format!("lmp_bus{b}")));
    header.extend(["flex", "soc", "import_trans", "gen_dist", "load", "step_cost"].map(String::from));
    header
}

/// `hour, lmp_bus<id>..., flex, soc, import_trans, gen_dist, load, step_cost`.
pub fn trajectory_csv<T: Scalar>(traj: &Trajectory<T>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trajectory_header(&traj.buses)).map_err(csv_err)?;
    for s in &traj.steps {
        let mut row = vec![s.hour.to_string()];
        row.extend(s.lmp.iter().map(|p| p.as_f64().to_string()));
        row.extend([s.flex, s.soc, s.import_trans, s.gen_dist, s.load, s.step_cost].map(|x| x.as_f64().to_string()));
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a trajectory CSV back and re-validates it against the storage
/// dynamics. The storage spec and lookahead are not part of the file.
pub fn read_trajectory_csv(
    text: &str,
    load_bus: &str,
    storage: Option<StorageSpec<f64>>,
    horizon: usize,
    length: usize,
) -> Result<Trajectory<f64>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let buses: Vec<String> = header
        .iter()
        .filter_map(|h| h.strip_prefix("lmp_bus").map(String::from))
        .collect();
    if header != trajectory_header(&buses) {
        return Err(ReportError::Csv(format!("unexpected header {header:?}")));
    }
    let nb = buses.len();
    let mut steps = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |k: usize| -> Result<f64, ReportError> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| ReportError::Csv(format!("row {}, column {}: {e}", i + 2, header[k])))
        };
        let hour = rec[0]
            .parse::<usize>()
            .map_err(|e| ReportError::Csv(format!("row {}: hour: {e}", i + 2)))?;
        let lmp = (1..=nb).map(num).collect::<Result<Vec<_>, _>>()?;
        steps.push(StepRecord {
            hour,
            lmp,
            flex: num(nb + 1)?,
            soc: num(nb + 2)?,
            import_trans: num(nb + 3)?,
            gen_dist: num(nb + 4)?,
            load: num(nb + 5)?,
            step_cost: num(nb + 6)?,
            objective: f64::NAN,
        });
    }
    let traj = Trajectory {
        buses,
        load_bus: load_bus.to_string(),
        horizon,
        length,
        storage,
        steps,
    };
    traj.validate().map_err(ReportError::Invalid)?;
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct HorizonSummary {
    pub horizon: usize,
    pub cost_per_mwh: f64,
    pub saving_vs_baseline: f64,
    pub forecast_gain: Option<f64>,
    pub forecast_gain_percent: Option<f64>,
    /// Hours whose price at the load bus stayed above the cap.
    pub cap_violated_hours: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub label: String,
    pub baseline_cost_per_mwh: f64,
    pub baseline_cap_violated_hours: Vec<usize>,
    pub horizons: Vec<HorizonSummary>,
}

/// Tolerance on the cap when counting violated hours.
pub const CAP_TOLERANCE: f64 = 1e-6;

impl Summary {
    pub fn new<T: Scalar>(
        scenario: &str,
        label: &str,
        report: &SavingsReport<T>,
        baseline: &Trajectory<T>,
        runs: &[&Trajectory<T>],
        caps: &[T],
    ) -> Self {
        let tol = T::lit(CAP_TOLERANCE);
        let opt = |x: Option<T>| x.map(|v| v.as_f64());
        Summary {
            scenario: scenario.to_string(),
            label: label.to_string(),
            baseline_cost_per_mwh: report.baseline_cost_per_mwh.as_f64(),
            baseline_cap_violated_hours: baseline.hours_above(caps, tol),
            horizons: report
                .horizons
                .iter()
                .map(|h| HorizonSummary {
                    horizon: h.horizon,
                    cost_per_mwh: h.cost_per_mwh.as_f64(),
                    saving_vs_baseline: h.saving_vs_baseline.as_f64(),
                    forecast_gain: opt(h.forecast_gain),
                    forecast_gain_percent: opt(h.forecast_gain_percent),
                    cap_violated_hours: runs
                        .iter()
                        .find(|r| r.horizon == h.horizon)
                        .map(|r| r.hours_above(caps, tol))
                        .unwrap_or_default(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }

    /// One row per lookahead; empty cells where a value is undefined.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "horizon",
            "cost_per_mwh",
            "saving_vs_baseline",
            "forecast_gain",
            "forecast_gain_percent",
            "cap_violated_hours",
            "label",
        ])
        .map_err(csv_err)?;
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            "baseline".to_string(),
            self.baseline_cost_per_mwh.to_string(),
            "0".into(),
            String::new(),
            String::new(),
            self.baseline_cap_violated_hours.len().to_string(),
            self.label.clone(),
        ])
        .map_err(csv_err)?;
        for h in &self.horizons {
            w.write_record([
                h.horizon.to_string(),
                h.cost_per_mwh.to_string(),
                h.saving_vs_baseline.to_string(),
                cell(h.forecast_gain),
                cell(h.forecast_gain_percent),
                h.cap_violated_hours.len().to_string(),
                self.label.clone(),
            ])
            .map_err(csv_err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(csv_err)?).expect("utf-8"))
    }
}

/// One hour of the flexibility requirement, ignoring storage limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantifyRow {
    pub hour: usize,
    pub pi_des: f64,
    pub lmp_uncapped: f64,
    pub lmp_capped: f64,
    /// MW per price-constrained bus, in network order.
    pub flex_required: Vec<(String, f64)>,
}

pub fn quantify_csv(rows: &[QuantifyRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let buses: Vec<String> = rows
        .first()
        .map(|r| r.flex_required.iter().map(|(b, _)| b.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["hour".to_string(), "pi_des".into(), "lmp_uncapped".into(), "lmp_capped".into()];
    header.extend(buses.iter().map(|b| format!("flex_required_bus{b}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut row = vec![
            r.hour.to_string(),
            r.pi_des.to_string(),
            r.lmp_uncapped.to_string(),
            r.lmp_capped.to_string(),
        ];
        row.extend(r.flex_required.iter().map(|(_, f)| f.to_string()));
        w.write_record(row).map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(csv_err)?).expect("utf-8"))
}

/// One grid point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub horizon: usize,
    pub total_cost: f64,
    pub cost_per_mwh: f64,
    pub saving_vs_baseline: f64,
    pub cap_violated_hours: usize,
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record([
            "parameter",
            "value",
            "horizon",
            "total_cost",
            "cost_per_mwh",
            "saving_vs_baseline",
            "cap_violated_hours",
        ])
        .map_err(csv_err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(csv_err)?).expect("utf-8"))
}
