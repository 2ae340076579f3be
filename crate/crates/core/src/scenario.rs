//! Scenario files: TOML with sections `constellation`, `ground_station`,
//! `link`, `learner`, `compute`, `scheduler` and `sim`.
//!
//! Angles are given in degrees and powers/gains in dBm/dBi unless a value
//! carries an explicit unit suffix (`"10 W"`, `"4.99 lin"`). The raw
//! representation is kept so that serialising a parsed file reproduces it.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{LearnerKind, PartitionRule, Scenario, TrainTime};
use crate::error::{Error, Result};
use crate::learning::{ComputeProfile, SgdConfig, SyntheticTask};
use crate::link::{db_to_linear, dbm_to_watts, LinkBudget};
use crate::orbital::{GroundStation, OrbitSpec};
use crate::scheduler::Policy;

/// A number either in the key's native logarithmic unit or with a linear suffix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    /// dBm for powers, dBi for gains.
    Db(f64),
    /// Watts for powers, a plain ratio for gains.
    Linear(f64),
}

impl Level {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let split = s
            .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("cannot read a number from '{s}'"))?;
        match unit.trim().to_ascii_lowercase().as_str() {
            "" | "dbm" | "dbi" | "db" => Ok(Level::Db(value)),
            "w" | "lin" | "x" => Ok(Level::Linear(value)),
            "mw" => Ok(Level::Linear(value / 1000.0)),
            other => Err(format!("unknown unit '{other}' in '{s}' (use dBm, dBi, dB, W, mW or lin)")),
        }
    }

    pub fn watts(self) -> f64 {
        match self {
            Level::Db(dbm) => dbm_to_watts(dbm),
            Level::Linear(w) => w,
        }
    }

    pub fn ratio(self) -> f64 {
        match self {
            Level::Db(db) => db_to_linear(db),
            Level::Linear(x) => x,
        }
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Level::Db(v) => s.serialize_f64(*v),
            Level::Linear(v) => s.serialize_str(&format!("{v:?} lin")),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct LevelVisitor;

        impl Visitor<'_> for LevelVisitor {
            type Value = Level;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number (dB units) or a string with a unit suffix")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Level, E> {
                Ok(Level::Db(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Level, E> {
                Ok(Level::Db(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Level, E> {
                Ok(Level::Db(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Level, E> {
                Level::parse(v).map_err(E::custom)
            }
        }

        d.deserialize_any(LevelVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    #[serde(default)]
    pub phase_deg: f64,
    #[serde(default = "one")]
    pub satellites: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationConfig {
    #[serde(default)]
    pub orbits: Vec<OrbitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub min_elevation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub power_dbm: Level,
    pub gain_sat_dbi: Level,
    pub gain_gs_dbi: Level,
    pub bandwidth_hz: f64,
    pub noise_temp_k: f64,
    pub carrier_hz: f64,
}

impl BudgetConfig {
    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            power: self.power_dbm.watts(),
            gain_sat: self.gain_sat_dbi.ratio(),
            gain_gs: self.gain_gs_dbi.ratio(),
            bandwidth: self.bandwidth_hz,
            noise_temp: self.noise_temp_k,
            carrier: self.carrier_hz,
        }
    }
}

/// Downlink budget; `uplink` overrides it for satellite-to-GS transfers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub power_dbm: Level,
    pub gain_sat_dbi: Level,
    pub gain_gs_dbi: Level,
    pub bandwidth_hz: f64,
    pub noise_temp_k: f64,
    pub carrier_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink: Option<BudgetConfig>,
}

impl LinkConfig {
    fn base(&self) -> BudgetConfig {
        BudgetConfig {
            power_dbm: self.power_dbm,
            gain_sat_dbi: self.gain_sat_dbi,
            gain_gs_dbi: self.gain_gs_dbi,
            bandwidth_hz: self.bandwidth_hz,
            noise_temp_k: self.noise_temp_k,
            carrier_hz: self.carrier_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKindConfig {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionConfig {
    ByAltitude,
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKindConfig,
    pub classes: usize,
    pub feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    pub samples_per_class: usize,
    pub test_per_class: usize,
    pub separation: f64,
    pub spread: f64,
    pub eta: f64,
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_iters: Option<usize>,
    pub partition: PartitionConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    pub policy: String,
    #[serde(default = "yes")]
    pub strict_online_budget: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon_h: f64,
    #[serde(default = "default_step")]
    pub coarse_step_s: f64,
    #[serde(default = "default_eval")]
    pub eval_period_s: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_concurrent_links: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_threshold: Option<f64>,
}

fn default_step() -> f64 {
    10.0
}

fn default_eval() -> f64 {
    600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub constellation: ConstellationConfig,
    pub ground_station: GroundStationConfig,
    pub link: LinkConfig,
    pub learner: LearnerConfig,
    pub compute: ComputeConfig,
    pub scheduler: SchedulerConfig,
    pub sim: SimConfig,
}

/// Command-line style overrides applied on top of a parsed file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub policy: Option<Policy>,
    pub train_time_s: Option<f64>,
    pub horizon_h: Option<f64>,
}

impl ScenarioConfig {
    /// Parses TOML; errors carry the line and column of the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.seed = seed;
        }
        if let Some(p) = o.policy {
            self.scheduler.policy = p.name().to_string();
        }
        if let Some(t) = o.train_time_s {
            self.compute = ComputeConfig { train_time_s: Some(t), c_k: None, nu_k: None };
        }
        if let Some(h) = o.horizon_h {
            self.sim.horizon_h = h;
        }
    }

    /// Converts to the validated runtime scenario (SI units, radians, linear levels).
    pub fn build(&self) -> Result<Scenario> {
        let policy: Policy = self.scheduler.policy.parse()?;
        let learner = match self.learner.kind {
            LearnerKindConfig::Logistic => LearnerKind::Logistic,
            LearnerKindConfig::Mlp => LearnerKind::Mlp {
                hidden: self
                    .learner
                    .hidden
                    .ok_or_else(|| Error::Scenario("learner.hidden is required for kind = \"mlp\"".into()))?,
            },
        };
        let train_time = match (&self.compute.train_time_s, &self.compute.c_k, &self.compute.nu_k) {
            (Some(t), None, None) => TrainTime::Fixed(*t),
            (None, Some(c), Some(nu)) => TrainTime::Compute(ComputeProfile { cycles_per_bit: *c, cpu_hz: *nu }),
            _ => {
                return Err(Error::Scenario(
                    "compute: give either train_time_s or both c_k and nu_k".into(),
                ))
            }
        };
        let base = self.link.base();
        let scenario = Scenario {
            orbits: self
                .constellation
                .orbits
                .iter()
                .map(|o| OrbitSpec {
                    altitude: o.altitude_km * 1e3,
                    inclination: o.inclination_deg.to_radians(),
                    raan: o.raan_deg.to_radians(),
                    initial_arg_latitude: o.phase_deg.to_radians(),
                    satellite_count: o.satellites,
                })
                .collect(),
            ground_station: GroundStation {
                latitude: self.ground_station.latitude_deg.to_radians(),
                longitude: self.ground_station.longitude_deg.to_radians(),
                min_elevation: self.ground_station.min_elevation_deg.to_radians(),
            },
            downlink: base.budget(),
            uplink: self.link.uplink.as_ref().unwrap_or(&base).budget(),
            learner,
            task: SyntheticTask {
                classes: self.learner.classes,
                feature_dim: self.learner.feature_dim,
                samples_per_class: self.learner.samples_per_class,
                test_per_class: self.learner.test_per_class,
                separation: self.learner.separation,
                spread: self.learner.spread,
            },
            sgd: SgdConfig {
                eta: self.learner.eta,
                batch_size: self.learner.batch_size,
                local_iters: self.learner.local_iters,
            },
            partition: match self.learner.partition {
                PartitionConfig::ByAltitude => PartitionRule::ByAltitude,
                PartitionConfig::Iid => PartitionRule::Iid,
            },
            train_time,
            policy,
            strict_online_budget: self.scheduler.strict_online_budget,
            horizon: self.sim.horizon_h * 3600.0,
            coarse_step: self.sim.coarse_step_s,
            eval_period: self.sim.eval_period_s,
            seed: self.sim.seed,
            max_concurrent_links: self.sim.max_concurrent_links,
            model_bits: self.sim.model_bits,
            accuracy_threshold: self.sim.accuracy_threshold,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Scenarios shipped with the crate.
pub mod bundled {
    /// Ten satellites over Bremen, 24 h, for contact-plan inspection.
    pub const BREMEN_10SAT_PLAN: &str = include_str!("../scenarios/bremen_10sat.plan.toml");
    /// Same constellation, 48 h, FedSat policy.
    pub const BREMEN_10SAT_FEDSAT: &str = include_str!("../scenarios/bremen_10sat.fedsat.toml");
    /// Same constellation, 48 h, FedSatSchedule policy.
    pub const BREMEN_10SAT_SCHEDULE: &str = include_str!("../scenarios/bremen_10sat.schedule.toml");
}
