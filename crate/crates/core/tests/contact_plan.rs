use leofl_core::orbital::{flatten, orbital_period, ContactPlan};
use leofl_core::scenario::{bundled, ScenarioConfig};
use leofl_core::Scenario;

fn bremen_plan() -> (Scenario, ContactPlan) {
    let scenario = ScenarioConfig::parse(bundled::BREMEN_10SAT_PLAN).unwrap().build().unwrap();
    let plan = scenario.contact_plan().unwrap();
    (scenario, plan)
}

/// First and last visible whole seconds of each pass, with no refinement.
fn brute_force_edges(scenario: &Scenario) -> Vec<Vec<(f64, f64)>> {
    let steps = scenario.horizon as usize;
    flatten(&scenario.orbits)
        .iter()
        .map(|sat| {
            let mut out = Vec::new();
            let mut rise = None;
            for i in 0..=steps {
                let t = i as f64;
                match (sat.is_visible_at(&scenario.ground_station, t), rise) {
                    (true, None) => rise = Some(t),
                    (false, Some(r)) => {
                        out.push((r, t - 1.0));
                        rise = None;
                    }
                    _ => {}
                }
            }
            assert!(rise.is_none(), "horizon ends inside a pass");
            out
        })
        .collect()
}

#[test]
fn refined_plan_matches_one_second_scan() {
    let (scenario, plan) = bremen_plan();
    let brute = brute_force_edges(&scenario);
    assert_eq!(plan.satellite_count(), 10);
    for (k, edges) in brute.iter().enumerate() {
        let passes = plan.passes(k);
        assert_eq!(passes.len(), edges.len(), "satellite {k}");
        for (p, &(r, s)) in passes.iter().zip(edges) {
            assert!((p.rise - r).abs() <= 1.0, "satellite {k} rise {} vs {r}", p.rise);
            assert!((p.set - s).abs() <= 1.0, "satellite {k} set {} vs {s}", p.set);
        }
    }
}

#[test]
fn high_orbits_see_longer_passes() {
    let (scenario, plan) = bremen_plan();
    let sats = flatten(&scenario.orbits);
    let mean = |alt: f64| {
        let d: Vec<f64> = sats
            .iter()
            .enumerate()
            .filter(|(_, s)| s.orbit.altitude == alt)
            .flat_map(|(k, _)| plan.passes(k).iter().map(|p| p.duration()))
            .collect();
        d.iter().sum::<f64>() / d.len() as f64
    };
    assert!(mean(2000e3) > mean(500e3));
}

#[test]
fn revisit_gaps_differ_from_orbital_period() {
    let (scenario, plan) = bremen_plan();
    let sats = flatten(&scenario.orbits);
    for (k, sat) in sats.iter().enumerate() {
        let gaps = plan.gaps(k);
        if gaps.is_empty() {
            continue;
        }
        let period = orbital_period(sat.orbit.altitude).unwrap();
        assert!(gaps.iter().any(|g| (g - period).abs() > 1.0), "satellite {k}");
    }
}

#[test]
fn passes_are_visible_and_ordered() {
    let (scenario, plan) = bremen_plan();
    let sats = flatten(&scenario.orbits);
    for (k, sat) in sats.iter().enumerate() {
        let mut last = f64::NEG_INFINITY;
        for p in plan.passes(k) {
            assert!(p.rise > last && p.set > p.rise);
            assert!(sat.is_visible_at(&scenario.ground_station, 0.5 * (p.rise + p.set)));
            assert!(p.max_distance >= sat.range_at(&scenario.ground_station, p.rise) - 1e-6);
            last = p.set;
        }
    }
}
