//! CSV and summary writers. Numbers use Rust's shortest round-trip
//! formatting so identical runs produce identical bytes.

use std::io::Write;

use serde::Serialize;

use crate::engine::{Comparison, MetricsLog, MetricsRow, RunOutput, Scenario};
use crate::error::{Error, Result};
use crate::orbital::{flatten, ContactPlan};
use crate::scheduler::TransmissionSchedule;

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_contact_plan<W: Write>(plan: &ContactPlan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["satellite_id", "pass_index", "rise_s", "set_s", "duration_s", "max_distance_m"])?;
    for (k, passes) in plan.satellites.iter().enumerate() {
        for (n, p) in passes.iter().enumerate() {
            w.write_record([
                k.to_string(),
                n.to_string(),
                p.rise.to_string(),
                p.set.to_string(),
                p.duration().to_string(),
                p.max_distance.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSummaryRow {
    pub satellite: usize,
    pub altitude_km: f64,
    pub passes: usize,
    pub mean_duration_s: Option<f64>,
    pub total_on_time_s: f64,
}

pub fn plan_summary(plan: &ContactPlan, scenario: &Scenario) -> Vec<PlanSummaryRow> {
    flatten(&scenario.orbits)
        .iter()
        .zip(&plan.satellites)
        .enumerate()
        .map(|(k, (sat, passes))| {
            let total: f64 = passes.iter().map(|p| p.duration()).sum();
            PlanSummaryRow {
                satellite: k,
                altitude_km: sat.orbit.altitude / 1e3,
                passes: passes.len(),
                mean_duration_s: (!passes.is_empty()).then(|| total / passes.len() as f64),
                total_on_time_s: total,
            }
        })
        .collect()
}

pub fn write_plan_summary<W: Write>(rows: &[PlanSummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["satellite_id", "altitude_km", "pass_count", "mean_duration_s", "total_on_time_s"])?;
    for r in rows {
        w.write_record([
            r.satellite.to_string(),
            r.altitude_km.to_string(),
            r.passes.to_string(),
            opt(r.mean_duration_s),
            r.total_on_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per update cycle, keyed by the pass holding its download.
pub fn write_schedule<W: Write>(schedule: &TransmissionSchedule, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["satellite_id", "pass_index", "decision", "dl_time_s", "ul_time_s"])?;
    for (k, s) in schedule.satellites.iter().enumerate() {
        for c in &s.cycles {
            w.write_record([
                k.to_string(),
                c.download.pass.to_string(),
                c.decision.name().to_string(),
                c.download.start.to_string(),
                opt(c.upload.map(|u| u.start)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics<W: Write>(log: &MetricsLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sim_time_s",
        "global_epoch",
        "satellite_id",
        "epoch_staleness",
        "time_staleness_s",
        "test_accuracy",
    ])?;
    for row in &log.rows {
        let fields = match row {
            MetricsRow::Upload { time, global_epoch, staleness } => [
                time.to_string(),
                global_epoch.to_string(),
                staleness.satellite.to_string(),
                staleness.epoch_staleness.to_string(),
                staleness.time_staleness.to_string(),
                String::new(),
            ],
            MetricsRow::Eval { time, global_epoch, accuracy } => [
                time.to_string(),
                global_epoch.to_string(),
                String::new(),
                String::new(),
                String::new(),
                accuracy.to_string(),
            ],
        };
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison<W: Write>(cmp: &Comparison, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "threshold",
        "time_to_threshold_s",
        "initial_accuracy",
        "final_accuracy",
        "mean_time_staleness_s",
        "mean_epoch_staleness",
        "uploads",
    ])?;
    for r in &cmp.rows {
        w.write_record([
            r.policy.name().to_string(),
            cmp.threshold.to_string(),
            opt(r.time_to_threshold),
            r.initial_accuracy.to_string(),
            r.final_accuracy.to_string(),
            opt(r.mean_time_staleness),
            opt(r.mean_epoch_staleness),
            r.uploads.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run metadata and headline numbers, written as TOML.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub horizon_s: f64,
    pub eval_period_s: f64,
    pub model_bits: u64,
    pub satellites: usize,
    pub passes: usize,
    pub uploads: usize,
    pub global_epoch: u64,
    pub threshold: Option<f64>,
    pub time_to_threshold_s: Option<f64>,
    pub initial_accuracy: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub mean_time_staleness_s: Option<f64>,
    pub mean_epoch_staleness: Option<f64>,
}

impl RunSummary {
    /// Uses the scenario threshold, or the midpoint of this run's own curve.
    pub fn new(scenario: &Scenario, run: &RunOutput) -> Self {
        let threshold = scenario
            .accuracy_threshold
            .or_else(|| crate::engine::midpoint_threshold(&run.log));
        Self {
            policy: run.policy.name().to_string(),
            seed: scenario.seed,
            horizon_s: scenario.horizon,
            eval_period_s: scenario.eval_period,
            model_bits: run.model_bits,
            satellites: run.plan.satellite_count(),
            passes: run.plan.pass_count(),
            uploads: run.log.staleness().len(),
            global_epoch: run.global_epoch,
            threshold,
            time_to_threshold_s: threshold.and_then(|a| run.log.time_to_threshold(a)),
            initial_accuracy: run.log.initial_accuracy(),
            final_accuracy: run.log.final_accuracy(),
            mean_time_staleness_s: run.log.mean_time_staleness(),
            mean_epoch_staleness: run.log.mean_epoch_staleness(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }
}
