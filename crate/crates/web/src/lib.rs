//! Browser demo bindings. Each export takes a few slider values, runs the
//! simulator on the bundled Bremen constellation and returns JSON for the page
//! to plot.

use leofl_core::link::LinkBudget;
use leofl_core::orbital::flatten;
use leofl_core::scenario::{bundled, Level, Overrides, ScenarioConfig};
use leofl_core::{compare_runs, Policy};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct SatellitePasses {
    id: usize,
    altitude_km: f64,
    passes: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct VisitingPattern {
    horizon_s: f64,
    satellites: Vec<SatellitePasses>,
}

#[derive(Serialize)]
struct LinkPoint {
    distance_km: f64,
    snr_db: f64,
    rate_mbps: f64,
    exchange_ms: f64,
}

#[derive(Serialize)]
struct PolicyCurve {
    policy: &'static str,
    curve: Vec<(f64, f64)>,
    time_to_threshold_s: Option<f64>,
    mean_time_staleness_s: Option<f64>,
}

#[derive(Serialize)]
struct AccuracyCurves {
    threshold: f64,
    runs: Vec<PolicyCurve>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn bremen(text: &str) -> ScenarioConfig {
    ScenarioConfig::parse(text).expect("bundled scenario parses")
}

/// Passes of every satellite for a given elevation mask and horizon.
pub fn visiting_pattern_json(min_elevation_deg: f64, horizon_h: f64) -> Result<String, String> {
    let mut cfg = bremen(bundled::BREMEN_10SAT_PLAN);
    cfg.ground_station.min_elevation_deg = min_elevation_deg;
    cfg.apply(&Overrides { horizon_h: Some(horizon_h), ..Default::default() });
    let scenario = cfg.build().map_err(|e| e.to_string())?;
    let plan = scenario.contact_plan().map_err(|e| e.to_string())?;
    let satellites = flatten(&scenario.orbits)
        .iter()
        .enumerate()
        .map(|(id, sat)| SatellitePasses {
            id,
            altitude_km: sat.orbit.altitude / 1e3,
            passes: plan.passes(id).iter().map(|p| (p.rise, p.set)).collect(),
        })
        .collect();
    to_json(&VisitingPattern { horizon_s: scenario.horizon, satellites })
}

/// SNR, rate and model exchange time against slant range.
pub fn link_profile_json(power_dbm: f64, bandwidth_mhz: f64, model_kbit: f64) -> Result<String, String> {
    let mut cfg = bremen(bundled::BREMEN_10SAT_PLAN);
    cfg.link.power_dbm = Level::Db(power_dbm);
    cfg.link.bandwidth_hz = bandwidth_mhz * 1e6;
    let budget: LinkBudget = cfg.build().map_err(|e| e.to_string())?.downlink;
    let bits = model_kbit * 1e3;
    let points = (0..=80)
        .map(|i| {
            let d = 500e3 + 50e3 * i as f64;
            let snr = leofl_core::link::snr(&budget, d, true).map_err(|e| e.to_string())?;
            Ok(LinkPoint {
                distance_km: d / 1e3,
                snr_db: leofl_core::link::linear_to_db(snr),
                rate_mbps: budget.rate_at(d).map_err(|e| e.to_string())? / 1e6,
                exchange_ms: budget.exchange_time(bits, d).map_err(|e| e.to_string())? * 1e3,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&points)
}

/// Test accuracy over time for FedSat and FedSatSchedule on identical inputs.
pub fn accuracy_curves_json(train_time_s: f64, horizon_h: f64, seed: u64) -> Result<String, String> {
    let base = bremen(bundled::BREMEN_10SAT_SCHEDULE);
    let scenarios = [Policy::FedSat, Policy::FedSatSchedule]
        .iter()
        .map(|&p| {
            let mut cfg = base.clone();
            cfg.apply(&Overrides {
                seed: Some(seed),
                policy: Some(p),
                train_time_s: Some(train_time_s),
                horizon_h: Some(horizon_h),
            });
            cfg.build()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let cmp = compare_runs(&scenarios).map_err(|e| e.to_string())?;
    let runs = cmp
        .rows
        .iter()
        .zip(&cmp.runs)
        .map(|(row, run)| PolicyCurve {
            policy: row.policy.name(),
            curve: run.log.accuracy_curve(),
            time_to_threshold_s: row.time_to_threshold,
            mean_time_staleness_s: row.mean_time_staleness,
        })
        .collect();
    to_json(&AccuracyCurves { threshold: cmp.threshold, runs })
}

#[wasm_bindgen(js_name = visitingPattern)]
pub fn visiting_pattern(min_elevation_deg: f64, horizon_h: f64) -> Result<String, JsValue> {
    visiting_pattern_json(min_elevation_deg, horizon_h).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = linkProfile)]
pub fn link_profile(power_dbm: f64, bandwidth_mhz: f64, model_kbit: f64) -> Result<String, JsValue> {
    link_profile_json(power_dbm, bandwidth_mhz, model_kbit).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = accuracyCurves)]
pub fn accuracy_curves(train_time_s: f64, horizon_h: f64, seed: u32) -> Result<String, JsValue> {
    accuracy_curves_json(train_time_s, horizon_h, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn visiting_pattern_lists_every_satellite() {
        let v: Value = serde_json::from_str(&visiting_pattern_json(10.0, 24.0).unwrap()).unwrap();
        let sats = v["satellites"].as_array().unwrap();
        assert_eq!(sats.len(), 10);
        assert!(sats.iter().all(|s| !s["passes"].as_array().unwrap().is_empty()));
    }

    #[test]
    fn higher_mask_shortens_passes() {
        let total = |mask: f64| {
            let v: Value = serde_json::from_str(&visiting_pattern_json(mask, 24.0).unwrap()).unwrap();
            v["satellites"]
                .as_array()
                .unwrap()
                .iter()
                .flat_map(|s| s["passes"].as_array().unwrap().clone())
                .map(|p| p[1].as_f64().unwrap() - p[0].as_f64().unwrap())
                .sum::<f64>()
        };
        assert!(total(30.0) < total(10.0));
    }

    #[test]
    fn link_rate_falls_with_distance() {
        let v: Value = serde_json::from_str(&link_profile_json(40.0, 20.0, 6.72).unwrap()).unwrap();
        let rates: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["rate_mbps"].as_f64().unwrap()).collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn invalid_inputs_are_reported() {
        assert!(link_profile_json(40.0, -1.0, 1.0).is_err());
        assert!(visiting_pattern_json(10.0, -2.0).is_err());
    }

    #[test]
    fn accuracy_curves_cover_both_policies() {
        let v: Value = serde_json::from_str(&accuracy_curves_json(30.0, 12.0, 1).unwrap()).unwrap();
        let runs = v["runs"].as_array().unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0]["policy"], "fedsat");
        assert_eq!(runs[1]["policy"], "fedsatschedule");
        assert!(runs.iter().all(|r| !r["curve"].as_array().unwrap().is_empty()));
    }
}
