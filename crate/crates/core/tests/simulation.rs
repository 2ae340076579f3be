use leofl_core::engine::{training_seed, EventKind, MetricsRow, RunOutput, Workload};
use leofl_core::export::write_metrics;
use leofl_core::learning::local_sgd;
use leofl_core::orbital::flatten;
use leofl_core::scenario::{bundled, Overrides, ScenarioConfig};
use leofl_core::{compare_runs, run_simulation, Decision, Error, Policy, Scenario};

fn config(policy: Policy) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::parse(bundled::BREMEN_10SAT_FEDSAT).unwrap();
    cfg.apply(&Overrides { policy: Some(policy), ..Default::default() });
    cfg
}

fn scenario(policy: Policy) -> Scenario {
    config(policy).build().unwrap()
}

fn metrics_bytes(run: &RunOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    write_metrics(&run.log, &mut buf).unwrap();
    buf
}

#[test]
fn single_satellite_matches_chained_sgd() {
    let mut cfg = config(Policy::FedSat);
    cfg.constellation.orbits.truncate(1);
    let sc = cfg.build().unwrap();
    let run = run_simulation(&sc).unwrap();
    assert!(run.global_epoch >= 3);

    let workload = Workload::build(&sc).unwrap();
    let mut w = workload.initial.clone();
    for m in 0..run.global_epoch {
        w = local_sgd(&workload.model, &w, &workload.local_data[0], &sc.sgd, training_seed(sc.seed, 0, m)).unwrap();
    }
    assert!(run.final_params.max_abs_diff(&w) <= 1e-12);
}

#[test]
fn identical_scenarios_give_identical_logs() {
    let sc = scenario(Policy::FedSatSchedule);
    let a = run_simulation(&sc).unwrap();
    let b = run_simulation(&sc).unwrap();
    assert_eq!(metrics_bytes(&a), metrics_bytes(&b));
    assert_eq!(a.final_params, b.final_params);
}

#[test]
fn empty_constellation_only_evaluates() {
    let mut cfg = config(Policy::FedSat);
    cfg.constellation.orbits.clear();
    let run = run_simulation(&cfg.build().unwrap()).unwrap();
    assert!(!run.log.rows.is_empty());
    let first = run.log.initial_accuracy().unwrap();
    for row in &run.log.rows {
        match row {
            MetricsRow::Eval { accuracy, global_epoch, .. } => {
                assert_eq!(*accuracy, first);
                assert_eq!(*global_epoch, 0);
            }
            MetricsRow::Upload { .. } => panic!("upload without satellites"),
        }
    }
}

#[test]
fn uploads_are_conserved() {
    for policy in [Policy::FedSat, Policy::FedSatSchedule] {
        let run = run_simulation(&scenario(policy)).unwrap();
        let completes = run.processed_events.iter().filter(|e| e.1 == EventKind::UlComplete).count();
        assert_eq!(completes as u64, run.global_epoch, "{policy}");
        assert_eq!(run.log.staleness().len(), completes);
    }
}

#[test]
fn event_queue_is_ordered_and_bounded() {
    for policy in [Policy::FedSat, Policy::FedSatSchedule, Policy::FedAvgSync] {
        let sc = scenario(policy);
        let run = run_simulation(&sc).unwrap();
        let mut last = 0.0;
        let mut downloading = vec![false; sc.satellite_count()];
        for &(t, kind, sat) in &run.processed_events {
            assert!(t >= last && t <= sc.horizon, "{policy} at {t}");
            last = t;
            match (kind, sat) {
                (EventKind::DlStart, Some(k)) => downloading[k] = true,
                (EventKind::DlComplete, Some(k)) => {
                    assert!(downloading[k], "{policy}: download completes without a start");
                    downloading[k] = false;
                }
                _ => {}
            }
        }
        let times: Vec<f64> = run.log.rows.iter().map(|r| r.time()).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn transfers_happen_in_view() {
    for policy in [Policy::FedSat, Policy::FedSatSchedule, Policy::FedAvgSync] {
        let sc = scenario(policy);
        let run = run_simulation(&sc).unwrap();
        let sats = flatten(&sc.orbits);
        for &(t, kind, sat) in &run.processed_events {
            let link = matches!(
                kind,
                EventKind::DlStart | EventKind::DlComplete | EventKind::UlStart | EventKind::UlComplete
            );
            if let (true, Some(k)) = (link, sat) {
                assert!(sats[k].is_visible_at(&sc.ground_station, t), "{policy}: satellite {k} at {t}");
            }
        }
    }
}

#[test]
fn cycles_respect_their_decision() {
    let sc = scenario(Policy::FedSatSchedule);
    let run = run_simulation(&sc).unwrap();
    let t_l = 30.0;
    let mut online = 0;
    for (k, s) in run.schedule.satellites.iter().enumerate() {
        let passes = run.plan.passes(k);
        for c in &s.cycles {
            assert!((c.train_end - c.train_start - t_l).abs() < 1e-9);
            let pass = &passes[c.download.pass];
            match c.decision {
                Decision::TrainOnline => {
                    online += 1;
                    let up = c.upload.expect("online cycles finish in their pass");
                    assert_eq!(up.pass, c.download.pass);
                    assert!(c.download.start >= pass.rise && up.end <= pass.set);
                }
                Decision::TrainOffline => {
                    assert_eq!(c.train_start, c.download.end);
                    if let Some(up) = c.upload {
                        assert!(up.pass > c.download.pass && up.start >= c.train_end);
                    }
                }
            }
        }
    }
    assert!(online > 0);
}

#[test]
fn scheduling_lowers_staleness() {
    let cmp = compare_runs(&[scenario(Policy::FedSat), scenario(Policy::FedSatSchedule)]).unwrap();
    let fedsat = cmp.rows[0].mean_time_staleness.unwrap();
    let scheduled = cmp.rows[1].mean_time_staleness.unwrap();
    assert!(scheduled < fedsat);
    let (a, b) = (cmp.rows[0].time_to_threshold.unwrap(), cmp.rows[1].time_to_threshold.unwrap());
    assert!(b <= a);
}

#[test]
fn long_training_collapses_to_fedsat() {
    let base = scenario(Policy::FedSat);
    let longest = base.contact_plan().unwrap().longest_pass();
    let mut runs = Vec::new();
    for policy in [Policy::FedSat, Policy::FedSatSchedule] {
        let mut cfg = config(policy);
        cfg.apply(&Overrides { train_time_s: Some(1.5 * longest), ..Default::default() });
        runs.push(run_simulation(&cfg.build().unwrap()).unwrap());
    }
    assert_eq!(runs[0].schedule, runs[1].schedule);
    assert_eq!(metrics_bytes(&runs[0]), metrics_bytes(&runs[1]));
}

#[test]
fn synchronous_baseline_is_slowest() {
    let cmp = compare_runs(&[
        scenario(Policy::FedSat),
        scenario(Policy::FedSatSchedule),
        scenario(Policy::FedAvgSync),
    ])
    .unwrap();
    let ttt = |i: usize| cmp.rows[i].time_to_threshold.unwrap_or(f64::INFINITY);
    assert!(ttt(2) > ttt(0) && ttt(2) > ttt(1));
}

#[test]
fn comparing_a_policy_with_itself() {
    let cmp = compare_runs(&[scenario(Policy::FedSat), scenario(Policy::FedSat)]).unwrap();
    assert_eq!(cmp.rows[0], cmp.rows[1]);
    assert_eq!(cmp.runs[0].log, cmp.runs[1].log);
}

#[test]
fn mismatched_scenarios_are_rejected() {
    let mut other = config(Policy::FedSatSchedule);
    other.apply(&Overrides { seed: Some(99), ..Default::default() });
    let err = compare_runs(&[scenario(Policy::FedSat), other.build().unwrap()]).unwrap_err();
    assert!(matches!(err, Error::Mismatch(_)));
}
