use super::*;
use crate::e2e::{analyze, AnalysisOptions};
use crate::scenario::{case_study, parse_scenario, schemes};

#[test]
fn schemes_scenario_parses_and_passes_analysis() {
    let sc = schemes();
    let res = analyze(&sc, &AnalysisOptions::default()).unwrap();
    for r in &res {
        assert!(r.delay_bound.is_some(), "{}", r.flow);
    }
}

#[test]
fn cycle_sim_is_deterministic() {
    let sc = schemes();
    let cfg = SimConfig::new(7, 20_000);
    let a = simulate_cycles(&sc, &cfg).unwrap();
    let b = simulate_cycles(&sc, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_cycles(&sc, &SimConfig::new(8, 20_000)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn no_alarms_no_overwrite_failures() {
    let sc = schemes().with_poisson_rate(0.0).unwrap();
    let rep = simulate_cycles(&sc, &SimConfig::new(1, 10_000)).unwrap();
    let alarm = rep.estimates.iter().find(|e| e.flow == "alarm" && e.metric == "cycle_failure").unwrap();
    assert_eq!(alarm.failures, 0);
    assert_eq!(alarm.analytic, 0.0);
}

#[test]
fn cycle_sim_agrees_with_closed_forms() {
    let sc = schemes().with_poisson_rate(0.1).unwrap().with_link_loss(1e-3);
    let rep = simulate_cycles(&sc, &SimConfig::new(3, 400_000)).unwrap();
    for e in &rep.estimates {
        assert!(e.agrees(4.0), "{e:?}");
    }
    assert!(rep.estimates.iter().any(|e| e.failures > 100));
}

#[test]
fn fixed_allocation_matching_deterministic_load_never_fails() {
    let text = "\
[nodes]
m kind=master
d kind=device
s kind=switch
[units]
u master=m cycle_time_ms=1 resources_bytes=200
[links]
l1 a=d b=m kind=cyclic unit=u reliability=1
l2 a=m b=s kind=switched rate_bps=100e6 reliability=1
[flows]
f src=d dst=s traffic=periodic period_ms=1 size=128 frame_bytes=32 priority=high latency_ms=5 reliability=0.9 scheme=fixed:128
";
    let sc = parse_scenario(text).unwrap();
    let rep = simulate_cycles(&sc, &SimConfig::new(2, 10_000)).unwrap();
    assert!(rep.estimates.iter().all(|e| e.failures == 0 && e.analytic == 0.0), "{:?}", rep.estimates);
}

#[test]
fn lone_frame_sees_access_plus_serialization() {
    let text = "\
[nodes]
m kind=master
d kind=device
s kind=switch
c kind=cloud
[units]
u master=m cycle_time_ms=1 resources_bytes=200
[links]
l1 a=d b=m kind=cyclic unit=u reliability=1
l2 a=m b=s kind=switched rate_bps=100e6 reliability=1
l3 a=s b=c kind=switched rate_bps=100e6 reliability=1
[flows]
f src=d dst=c traffic=periodic period_ms=10 size=125 priority=high latency_ms=5 reliability=0.9
";
    let sc = parse_scenario(text).unwrap();
    let mut cfg = SimConfig::new(0, 1);
    let rep = simulate_queues(&sc, &cfg).unwrap();
    let d = &rep.delays[0];
    assert_eq!(d.frames, 1);
    // one cycle of access, 10 us on each of two links
    assert!((d.max_delay_ms - 1.02).abs() < 1e-9, "{d:?}");
    cfg.pattern = TrafficPattern::Random;
    cfg.count = 50;
    let rep = simulate_queues(&sc, &cfg).unwrap();
    assert_eq!(rep.violations(), 0);
    assert!(rep.delays[0].max_delay_ms > 0.02);
}

#[test]
fn greedy_case_study_respects_bounds() {
    let sc = case_study();
    let rep = simulate_queues(&sc, &SimConfig::new(0, 100_000)).unwrap();
    assert_eq!(rep.violations(), 0, "{:?}", rep.delays.iter().filter(|d| d.violations > 0).collect::<Vec<_>>());
    assert!(rep.frames() >= 99_000);
    for alarm in rep.delays.iter().filter(|d| d.flow.starts_with("alarm")) {
        assert!(alarm.tightness() >= 0.8, "{alarm:?}");
    }
}

#[test]
fn random_case_study_respects_bounds() {
    let sc = case_study().with_poisson_rate(0.2).unwrap();
    let mut cfg = SimConfig::new(5, 50_000);
    cfg.pattern = TrafficPattern::Random;
    let a = simulate_queues(&sc, &cfg).unwrap();
    assert_eq!(a.violations(), 0);
    assert_eq!(a, simulate_queues(&sc, &cfg).unwrap());
}

#[test]
fn alarm_load_slows_patient_requests() {
    let sc = case_study();
    let mut cfg = SimConfig::new(0, 60_000);
    cfg.alarm_frames = Some(1);
    let light = simulate_queues(&sc, &cfg).unwrap();
    cfg.alarm_frames = Some(4);
    let heavy = simulate_queues(&sc, &cfg).unwrap();
    let mean = |r: &SimReport| {
        let v: Vec<_> = r.delays.iter().filter(|d| d.flow.starts_with("patient-request")).collect();
        v.iter().map(|d| d.max_delay_ms).sum::<f64>() / v.len() as f64
    };
    assert!(mean(&heavy) > mean(&light), "{} vs {}", mean(&heavy), mean(&light));
    assert_eq!(heavy.violations(), 0);
}
