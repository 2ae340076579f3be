//! Deterministic discrete-event loop tying the orbital, link, learning,
//! federation and scheduling pieces into one run.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::federation::{record_staleness, ClientState, ServerState, StalenessRecord};
use crate::learning::{
    evaluate_accuracy, generate_synthetic_task, local_sgd, partition_non_iid, split_labels,
    training_time, ComputeProfile, Dataset, Learner, LogisticRegression, Mlp, Model, ModelParams,
    SgdConfig, SyntheticTask,
};
use crate::link::LinkBudget;
use crate::orbital::{compute_contact_plan, ContactPlan, GroundStation, OrbitSpec};
use crate::scheduler::{
    extract_schedule, Decision, LinkOccupancy, PassWindow, Policy, SatelliteSchedule,
    SatelliteTimeline, TransmissionSchedule, Transfer, UpdateCycle,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearnerKind {
    Logistic,
    Mlp { hidden: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionRule {
    /// Satellites grouped by orbit altitude (ascending); labels split evenly
    /// across the groups in the same order.
    ByAltitude,
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainTime {
    Fixed(f64),
    Compute(ComputeProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub orbits: Vec<OrbitSpec>,
    pub ground_station: GroundStation,
    pub downlink: LinkBudget,
    pub uplink: LinkBudget,
    pub learner: LearnerKind,
    pub task: SyntheticTask,
    pub sgd: SgdConfig,
    pub partition: PartitionRule,
    pub train_time: TrainTime,
    pub policy: Policy,
    pub strict_online_budget: bool,
    pub horizon: f64,
    pub coarse_step: f64,
    pub eval_period: f64,
    pub seed: u64,
    pub max_concurrent_links: Option<usize>,
    /// Overrides S(w) used for link timing; defaults to 32 bits per parameter.
    pub model_bits: Option<u64>,
    pub accuracy_threshold: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.ground_station.validate()?;
        for o in &self.orbits {
            o.validate()?;
        }
        self.downlink.validate()?;
        self.uplink.validate()?;
        self.sgd.validate()?;
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("horizon (s)", self.horizon));
        }
        if !(self.coarse_step > 0.0) || self.coarse_step > crate::orbital::MAX_COARSE_STEP_S {
            return Err(Error::invalid("coarse step (s)", self.coarse_step));
        }
        if !(self.eval_period > 0.0) {
            return Err(Error::invalid("evaluation period (s)", self.eval_period));
        }
        if self.max_concurrent_links == Some(0) {
            return Err(Error::invalid("max concurrent links", 0.0));
        }
        if let Some(a) = self.accuracy_threshold {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid("accuracy threshold", a));
            }
        }
        match self.train_time {
            TrainTime::Fixed(t) if !(t > 0.0) => return Err(Error::invalid("training time (s)", t)),
            TrainTime::Compute(p) if !(p.cycles_per_bit > 0.0 && p.cpu_hz > 0.0) => {
                return Err(Error::invalid("compute profile", p.cpu_hz))
            }
            _ => {}
        }
        if self.task.test_per_class == 0 {
            return Err(Error::invalid("test samples per class", 0.0));
        }
        if let LearnerKind::Mlp { hidden: 0 } = self.learner {
            return Err(Error::invalid("hidden units", 0.0));
        }
        Ok(())
    }

    pub fn model(&self) -> Model {
        match self.learner {
            LearnerKind::Logistic => Model::Logistic(LogisticRegression {
                classes: self.task.classes,
                features: self.task.feature_dim,
            }),
            LearnerKind::Mlp { hidden } => Model::Mlp(Mlp {
                classes: self.task.classes,
                features: self.task.feature_dim,
                hidden,
            }),
        }
    }

    pub fn satellite_count(&self) -> usize {
        self.orbits.iter().map(|o| o.satellite_count).sum()
    }

    pub fn contact_plan(&self) -> Result<ContactPlan> {
        compute_contact_plan(&self.orbits, &self.ground_station, self.horizon, self.coarse_step)
    }

    /// Satellite ids grouped for the non-IID split.
    pub fn satellite_groups(&self) -> Vec<Vec<usize>> {
        let mut ids = Vec::new();
        let mut next = 0;
        for o in &self.orbits {
            for _ in 0..o.satellite_count {
                ids.push((o.altitude, next));
                next += 1;
            }
        }
        if ids.is_empty() {
            return Vec::new();
        }
        match self.partition {
            PartitionRule::Iid => vec![ids.into_iter().map(|(_, k)| k).collect()],
            PartitionRule::ByAltitude => {
                let mut altitudes: Vec<f64> = ids.iter().map(|(h, _)| *h).collect();
                altitudes.sort_by(f64::total_cmp);
                altitudes.dedup();
                altitudes
                    .iter()
                    .map(|h| ids.iter().filter(|(a, _)| a == h).map(|(_, k)| *k).collect())
                    .collect()
            }
        }
    }
}

/// Seeds derived from the scenario seed, one stream per purpose.
fn derive_seed(base: u64, stream: u64, a: u64, b: u64) -> u64 {
    // splitmix64 over the packed inputs
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(a.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(b.wrapping_mul(0x94D0_49BB_1331_11EB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the local SGD run producing update `update_index` (0-based) of `satellite`.
pub fn training_seed(scenario_seed: u64, satellite: usize, update_index: u64) -> u64 {
    derive_seed(scenario_seed, 1, satellite as u64, update_index)
}

pub fn data_seed(scenario_seed: u64) -> u64 {
    derive_seed(scenario_seed, 2, 0, 0)
}

pub fn partition_seed(scenario_seed: u64) -> u64 {
    derive_seed(scenario_seed, 3, 0, 0)
}

pub fn init_seed(scenario_seed: u64) -> u64 {
    derive_seed(scenario_seed, 4, 0, 0)
}

/// Learning inputs shared by every policy run of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub model: Model,
    pub local_data: Vec<Dataset>,
    pub test: Dataset,
    pub initial: ModelParams,
    pub train_times: Vec<f64>,
}

impl Workload {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        let model = scenario.model();
        let (train, test) = generate_synthetic_task(&scenario.task, data_seed(scenario.seed))?;
        let k = scenario.satellite_count();
        let groups = scenario.satellite_groups();
        let local_data = if groups.is_empty() {
            Vec::new()
        } else {
            let labels = split_labels(scenario.task.classes, groups.len())?;
            partition_non_iid(&train, &groups, &labels, k, partition_seed(scenario.seed))?
        };
        let train_times = local_data
            .iter()
            .map(|d| match scenario.train_time {
                TrainTime::Fixed(t) => t,
                TrainTime::Compute(p) => {
                    training_time(&p, scenario.sgd.iterations(d.len()), d.size_bits() as f64)
                }
            })
            .collect();
        Ok(Self {
            initial: model.init_params(init_seed(scenario.seed)),
            model,
            local_data,
            test,
            train_times,
        })
    }

    pub fn model_bits(&self, scenario: &Scenario) -> u64 {
        scenario.model_bits.unwrap_or_else(|| self.initial.wire_bits())
    }
}

/// Per-pass exchange times at the worst-case (longest) distance of each pass.
pub fn satellite_timelines(
    plan: &ContactPlan,
    scenario: &Scenario,
    train_times: &[f64],
    model_bits: u64,
) -> Result<Vec<SatelliteTimeline>> {
    plan.satellites
        .iter()
        .zip(train_times)
        .map(|(passes, &train_time)| {
            let passes = passes
                .iter()
                .map(|p| {
                    Ok(PassWindow {
                        rise: p.rise,
                        set: p.set,
                        downlink_time: scenario.downlink.exchange_time(model_bits as f64, p.max_distance)?,
                        uplink_time: scenario.uplink.exchange_time(model_bits as f64, p.max_distance)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SatelliteTimeline { passes, train_time })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    UlComplete,
    DlComplete,
    TrainComplete,
    Set,
    Rise,
    UlStart,
    DlStart,
    Eval,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::UlComplete => "UL_COMPLETE",
            EventKind::DlComplete => "DL_COMPLETE",
            EventKind::TrainComplete => "TRAIN_COMPLETE",
            EventKind::Set => "SET",
            EventKind::Rise => "RISE",
            EventKind::UlStart => "UL_START",
            EventKind::DlStart => "DL_START",
            EventKind::Eval => "EVAL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub satellite: Option<usize>,
    /// Pass index for RISE/SET, update-cycle index for transfer and training events.
    pub index: usize,
    seq: u64,
}

impl SimEvent {
    fn key(&self) -> (usize, usize, u64) {
        (self.kind as usize, self.satellite.unwrap_or(usize::MAX), self.seq)
    }
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    // reversed: BinaryHeap pops the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.key().cmp(&self.key()))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricsRow {
    Upload {
        time: f64,
        global_epoch: u64,
        staleness: StalenessRecord,
    },
    Eval {
        time: f64,
        global_epoch: u64,
        accuracy: f64,
    },
}

impl MetricsRow {
    pub fn time(&self) -> f64 {
        match self {
            MetricsRow::Upload { time, .. } | MetricsRow::Eval { time, .. } => *time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

impl MetricsLog {
    pub fn accuracy_curve(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| match r {
                MetricsRow::Eval { time, accuracy, .. } => Some((*time, *accuracy)),
                _ => None,
            })
            .collect()
    }

    pub fn staleness(&self) -> Vec<StalenessRecord> {
        self.rows
            .iter()
            .filter_map(|r| match r {
                MetricsRow::Upload { staleness, .. } => Some(*staleness),
                _ => None,
            })
            .collect()
    }

    pub fn initial_accuracy(&self) -> Option<f64> {
        self.accuracy_curve().first().map(|p| p.1)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.accuracy_curve().last().map(|p| p.1)
    }

    /// First evaluation time at which accuracy reaches `threshold`.
    pub fn time_to_threshold(&self, threshold: f64) -> Option<f64> {
        self.accuracy_curve()
            .into_iter()
            .find(|(_, a)| *a >= threshold)
            .map(|(t, _)| t)
    }

    pub fn mean_time_staleness(&self) -> Option<f64> {
        let s = self.staleness();
        (!s.is_empty()).then(|| s.iter().map(|r| r.time_staleness).sum::<f64>() / s.len() as f64)
    }

    pub fn mean_epoch_staleness(&self) -> Option<f64> {
        let s = self.staleness();
        (!s.is_empty()).then(|| s.iter().map(|r| r.epoch_staleness as f64).sum::<f64>() / s.len() as f64)
    }
}

/// Midpoint between the first and last evaluated accuracy.
pub fn midpoint_threshold(log: &MetricsLog) -> Option<f64> {
    Some(0.5 * (log.initial_accuracy()? + log.final_accuracy()?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub policy: Policy,
    pub plan: ContactPlan,
    pub schedule: TransmissionSchedule,
    pub log: MetricsLog,
    pub final_params: ModelParams,
    pub global_epoch: u64,
    pub model_bits: u64,
    pub processed_events: Vec<(f64, EventKind, Option<usize>)>,
}

/// Per-satellite progress in the synchronous baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SyncPhase {
    Idle,
    Downloading,
    Training,
    Ready,
    Uploading,
}

pub struct Engine<'a> {
    scenario: &'a Scenario,
    workload: &'a Workload,
    plan: ContactPlan,
    timelines: Vec<SatelliteTimeline>,
    schedule: TransmissionSchedule,
    server: ServerState,
    clients: Vec<ClientState>,
    queue: BinaryHeap<SimEvent>,
    seq: u64,
    now: f64,
    log: MetricsLog,
    processed: Vec<(f64, EventKind, Option<usize>)>,
    // synchronous baseline only
    sync_phase: Vec<SyncPhase>,
    sync_round_of: Vec<u64>,
    sync_updates: Vec<Option<ModelParams>>,
    current_pass: Vec<Option<usize>>,
    links: LinkOccupancy,
}

impl<'a> Engine<'a> {
    pub fn new(scenario: &'a Scenario, workload: &'a Workload, plan: ContactPlan) -> Result<Self> {
        let k = plan.satellite_count();
        if workload.local_data.len() != k {
            return Err(Error::Internal("workload and contact plan disagree on satellite count".into()));
        }
        let model_bits = workload.model_bits(scenario);
        let timelines = satellite_timelines(&plan, scenario, &workload.train_times, model_bits)?;
        let schedule = if scenario.policy.is_async() {
            extract_schedule(
                &timelines,
                scenario.policy,
                scenario.strict_online_budget,
                scenario.max_concurrent_links,
            )?
        } else {
            TransmissionSchedule { satellites: vec![SatelliteSchedule::default(); k] }
        };
        let sizes: Vec<usize> = workload.local_data.iter().map(Dataset::len).collect();
        Ok(Self {
            scenario,
            workload,
            server: ServerState::new(workload.initial.clone(), &sizes)?,
            clients: (0..k).map(ClientState::new).collect(),
            plan,
            timelines,
            schedule,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            log: MetricsLog::default(),
            processed: Vec::new(),
            sync_phase: vec![SyncPhase::Idle; k],
            sync_round_of: vec![u64::MAX; k],
            sync_updates: vec![None; k],
            current_pass: vec![None; k],
            links: LinkOccupancy::new(scenario.max_concurrent_links),
        })
    }

    pub fn schedule(&self) -> &TransmissionSchedule {
        &self.schedule
    }

    fn push(&mut self, time: f64, kind: EventKind, satellite: Option<usize>, index: usize) {
        if time > self.scenario.horizon {
            return;
        }
        self.seq += 1;
        self.queue.push(SimEvent { time, kind, satellite, index, seq: self.seq });
    }

    fn seed_events(&mut self) {
        for k in 0..self.plan.satellite_count() {
            for n in 0..self.plan.satellites[k].len() {
                let p = self.plan.satellites[k][n];
                self.push(p.rise, EventKind::Rise, Some(k), n);
                self.push(p.set, EventKind::Set, Some(k), n);
            }
        }
        let mut i = 0usize;
        loop {
            let t = self.scenario.eval_period * i as f64;
            if t > self.scenario.horizon {
                break;
            }
            self.push(t, EventKind::Eval, None, i);
            i += 1;
        }
    }

    pub fn run(mut self) -> Result<RunOutput> {
        self.seed_events();
        while let Some(ev) = self.queue.pop() {
            if ev.time < self.now {
                return Err(Error::Internal(format!("event at {} before current time {}", ev.time, self.now)));
            }
            self.now = ev.time;
            self.processed.push((ev.time, ev.kind, ev.satellite));
            self.handle_event(ev)?;
        }
        Ok(RunOutput {
            policy: self.scenario.policy,
            model_bits: self.workload.model_bits(self.scenario),
            global_epoch: self.server.epoch,
            final_params: self.server.global,
            plan: self.plan,
            schedule: self.schedule,
            log: self.log,
            processed_events: self.processed,
        })
    }

    fn satellite(&self, ev: &SimEvent) -> Result<usize> {
        match ev.satellite {
            Some(k) if k < self.clients.len() => Ok(k),
            Some(k) => Err(Error::Internal(format!("event references unknown satellite {k}"))),
            None => Err(Error::Internal(format!("{} event without satellite", ev.kind.name()))),
        }
    }

    fn cycle(&self, k: usize, idx: usize) -> Result<UpdateCycle> {
        self.schedule.satellites[k]
            .cycles
            .get(idx)
            .copied()
            .ok_or_else(|| Error::Internal(format!("satellite {k} has no update cycle {idx}")))
    }

    pub fn handle_event(&mut self, ev: SimEvent) -> Result<()> {
        if ev.kind == EventKind::Eval {
            let accuracy = evaluate_accuracy(&self.workload.model, &self.server.global, &self.workload.test)?;
            self.log.rows.push(MetricsRow::Eval {
                time: ev.time,
                global_epoch: self.server.epoch,
                accuracy,
            });
            return Ok(());
        }
        let k = self.satellite(&ev)?;
        if self.scenario.policy.is_async() {
            self.handle_async(k, ev)
        } else {
            self.handle_sync(k, ev)
        }
    }

    fn train(&mut self, k: usize, update_index: u64) -> Result<()> {
        let start = self.clients[k]
            .cached_global
            .take()
            .ok_or_else(|| Error::Internal(format!("satellite {k} trains without a model")))?;
        let trained = local_sgd(
            &self.workload.model,
            &start,
            &self.workload.local_data[k],
            &self.scenario.sgd,
            training_seed(self.scenario.seed, k, update_index),
        )?;
        self.clients[k].trained = Some(trained);
        Ok(())
    }

    fn upload(&mut self, k: usize) -> Result<()> {
        let msg = self.clients[k].take_update()?;
        let staleness = record_staleness(&msg, self.now, &self.server);
        match self.scenario.policy {
            Policy::FedAvgSync => {
                self.sync_updates[k] = Some(msg.updated);
            }
            _ => self.server.fedsat_aggregate(&msg)?,
        }
        self.log.rows.push(MetricsRow::Upload {
            time: self.now,
            global_epoch: self.server.epoch,
            staleness,
        });
        Ok(())
    }

    fn handle_async(&mut self, k: usize, ev: SimEvent) -> Result<()> {
        match ev.kind {
            EventKind::Rise => {
                let pass = ev.index;
                let cycles = self.schedule.satellites[k].cycles.clone();
                for (i, c) in cycles.iter().enumerate() {
                    if c.download.pass == pass {
                        self.push(c.download.start, EventKind::DlStart, Some(k), i);
                    }
                    if let Some(u) = c.upload.filter(|u| u.pass == pass) {
                        self.push(u.start, EventKind::UlStart, Some(k), i);
                    }
                }
            }
            EventKind::Set => {}
            EventKind::DlStart => {
                let c = self.cycle(k, ev.index)?;
                self.clients[k].receive_global(&self.server, self.now);
                self.push(c.download.end, EventKind::DlComplete, Some(k), ev.index);
            }
            EventKind::DlComplete => {
                let c = self.cycle(k, ev.index)?;
                self.push(c.train_end, EventKind::TrainComplete, Some(k), ev.index);
            }
            EventKind::TrainComplete => {
                let update_index = self.clients[k].local_epoch;
                self.train(k, update_index)?;
            }
            EventKind::UlStart => {
                let c = self.cycle(k, ev.index)?;
                let u = c.upload.ok_or_else(|| Error::Internal("upload event without upload".into()))?;
                if self.clients[k].trained.is_none() {
                    return Err(Error::Internal(format!("satellite {k} uploads before training finished")));
                }
                self.push(u.end, EventKind::UlComplete, Some(k), ev.index);
            }
            EventKind::UlComplete => self.upload(k)?,
            EventKind::Eval => unreachable!("handled by caller"),
        }
        Ok(())
    }

    fn pass_window(&self, k: usize) -> Option<(usize, PassWindow)> {
        self.current_pass[k].map(|n| (n, self.timelines[k].passes[n]))
    }

    fn sync_try_upload(&mut self, k: usize) {
        if self.sync_phase[k] != SyncPhase::Ready {
            return;
        }
        let Some((n, w)) = self.pass_window(k) else { return };
        if let Some(start) = self.links.reserve(self.now, w.uplink_time, w.set) {
            self.sync_phase[k] = SyncPhase::Uploading;
            let end = start + w.uplink_time;
            let c = self.schedule.satellites[k]
                .cycles
                .last_mut()
                .expect("an upload follows a download");
            c.upload = Some(Transfer { pass: n, start, end });
            if n == c.download.pass {
                c.decision = Decision::TrainOnline;
            }
            let idx = self.schedule.satellites[k].cycles.len() - 1;
            self.push(start, EventKind::UlStart, Some(k), idx);
        }
    }

    fn sync_try_download(&mut self, k: usize) {
        let round = self.server.epoch;
        if self.sync_phase[k] != SyncPhase::Idle || self.sync_round_of[k] == round {
            return;
        }
        let Some((n, w)) = self.pass_window(k) else { return };
        if let Some(start) = self.links.reserve(self.now, w.downlink_time, w.set) {
            self.sync_phase[k] = SyncPhase::Downloading;
            self.sync_round_of[k] = round;
            let end = start + w.downlink_time;
            let train_end = end + self.timelines[k].train_time;
            let cycles = &mut self.schedule.satellites[k].cycles;
            // relabelled online if the upload makes it into the same pass
            cycles.push(UpdateCycle {
                decision: Decision::TrainOffline,
                download: Transfer { pass: n, start, end },
                train_start: end,
                train_end,
                upload: None,
            });
            let idx = cycles.len() - 1;
            self.push(start, EventKind::DlStart, Some(k), idx);
        }
    }

    fn handle_sync(&mut self, k: usize, ev: SimEvent) -> Result<()> {
        match ev.kind {
            EventKind::Rise => {
                self.current_pass[k] = Some(ev.index);
                self.sync_try_upload(k);
                self.sync_try_download(k);
            }
            EventKind::Set => self.current_pass[k] = None,
            EventKind::DlStart => {
                let c = self.cycle(k, ev.index)?;
                self.clients[k].receive_global(&self.server, self.now);
                self.push(c.download.end, EventKind::DlComplete, Some(k), ev.index);
            }
            EventKind::DlComplete => {
                let c = self.cycle(k, ev.index)?;
                self.sync_phase[k] = SyncPhase::Training;
                self.push(c.train_end, EventKind::TrainComplete, Some(k), ev.index);
            }
            EventKind::TrainComplete => {
                let update_index = self.clients[k].local_epoch;
                self.train(k, update_index)?;
                self.sync_phase[k] = SyncPhase::Ready;
                self.sync_try_upload(k);
            }
            EventKind::UlStart => {
                let c = self.cycle(k, ev.index)?;
                let u = c.upload.ok_or_else(|| Error::Internal("upload event without upload".into()))?;
                self.push(u.end, EventKind::UlComplete, Some(k), ev.index);
            }
            EventKind::UlComplete => {
                self.upload(k)?;
                self.sync_phase[k] = SyncPhase::Idle;
                if self.sync_updates.iter().all(Option::is_some) {
                    let updates = std::mem::replace(&mut self.sync_updates, vec![None; self.clients.len()]);
                    self.server.fedavg_sync_aggregate(&updates)?;
                    for j in 0..self.clients.len() {
                        self.sync_try_download(j);
                    }
                }
                // own download of a newer round, if the barrier just advanced
                self.sync_try_download(k);
            }
            EventKind::Eval => unreachable!("handled by caller"),
        }
        Ok(())
    }
}

/// Runs one scenario end to end.
pub fn run_simulation(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let plan = scenario.contact_plan()?;
    let workload = Workload::build(scenario)?;
    Engine::new(scenario, &workload, plan)?.run()
}

/// Runs a prepared scenario against an existing plan and workload. Used when
/// several policies share the same inputs.
pub fn run_with(scenario: &Scenario, plan: &ContactPlan, workload: &Workload) -> Result<RunOutput> {
    scenario.validate()?;
    Engine::new(scenario, workload, plan.clone())?.run()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub policy: Policy,
    pub time_to_threshold: Option<f64>,
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub mean_time_staleness: Option<f64>,
    pub mean_epoch_staleness: Option<f64>,
    pub uploads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<RunOutput>,
}

/// Strips the policy so two scenarios can be checked for equality otherwise.
fn without_policy(s: &Scenario) -> Scenario {
    Scenario { policy: Policy::FedSat, ..s.clone() }
}

/// Runs each scenario (identical apart from policy) and tabulates time to a
/// shared accuracy threshold. Without an explicit threshold, the midpoint of
/// the first run's accuracy curve is used.
pub fn compare_runs(scenarios: &[Scenario]) -> Result<Comparison> {
    let first = scenarios
        .first()
        .ok_or_else(|| Error::Mismatch("no scenarios to compare".into()))?;
    for s in &scenarios[1..] {
        if without_policy(s) != without_policy(first) {
            return Err(Error::Mismatch("scenarios differ in more than the policy".into()));
        }
    }
    first.validate()?;
    let plan = first.contact_plan()?;
    let workload = Workload::build(first)?;
    let runs = scenarios
        .iter()
        .map(|s| run_with(s, &plan, &workload))
        .collect::<Result<Vec<_>>>()?;
    if runs.iter().any(|r| r.plan != runs[0].plan) {
        return Err(Error::Internal("contact plans diverged between runs".into()));
    }
    let threshold = match first.accuracy_threshold {
        Some(a) => a,
        None => midpoint_threshold(&runs[0].log)
            .ok_or_else(|| Error::Internal("reference run has no evaluations".into()))?,
    };
    let rows = runs
        .iter()
        .map(|r| ComparisonRow {
            policy: r.policy,
            time_to_threshold: r.log.time_to_threshold(threshold),
            initial_accuracy: r.log.initial_accuracy().unwrap_or(f64::NAN),
            final_accuracy: r.log.final_accuracy().unwrap_or(f64::NAN),
            mean_time_staleness: r.log.mean_time_staleness(),
            mean_epoch_staleness: r.log.mean_epoch_staleness(),
            uploads: r.log.staleness().len(),
        })
        .collect();
    Ok(Comparison { threshold, rows, runs })
}
