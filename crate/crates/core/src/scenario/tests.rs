use super::*;

const SMALL: &str = "\
[nodes]
m kind=master
d kind=device
s kind=switch
c kind=cloud
[units]
u master=m cycle_time_ms=1 resources_bytes=200
[links]
l1 a=m b=d kind=cyclic unit=u reliability=1-1e-9
l2 a=m b=s kind=switched rate_bps=100e6 reliability=0.999
l3 a=s b=c kind=switched rate_bps=100e6 reliability=1-1e-9
[flows]
";

fn small(flows: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario(&format!("{SMALL}{flows}"))
}

#[test]
fn bundled_case_study_shape() {
    let sc = case_study();
    assert_eq!(sc.units.len(), 10);
    assert!(sc.units.iter().all(|u| u.cycle_time_ms == 1.0));
    let switched: Vec<_> = sc.topology.links.iter().filter(|l| !l.is_cyclic()).collect();
    assert_eq!(switched.len(), 11);
    assert!(switched.iter().all(|l| l.bytes_per_ms() == Some(12_500.0)));
    assert!(sc.topology.links.iter().all(|l| l.loss == 1e-9));
    assert_eq!(sc.flows.len(), 70);
    let kinds: HashSet<String> = sc
        .flows
        .iter()
        .map(|f| f.name.trim_end_matches(|c: char| c.is_ascii_digit()).to_string())
        .collect();
    assert_eq!(kinds.len(), 7);
    assert_eq!(sc.sweep.alarm.len(), 10);
}

#[test]
fn requirement_rows_are_encoded_verbatim() {
    let sc = case_study();
    // (flow, src, dst, poisson, period ms, size B, latency ms, failure budget)
    let rows = [
        ("control-down3", "master3", "robot3", false, 1.0, 128, 1.0, 1e-4),
        ("control-up3", "robot3", "master3", false, 1.0, 128, 1.0, 1e-4),
        ("patient-request3", "master3", "cloud", false, 200.0, 128, 10.0, 1e-4),
        ("patient-response3", "cloud", "master3", false, 200.0, 1024, 10.0, 1e-4),
        ("scale3", "scale3", "cloud", false, 200.0, 512, 100.0, 1e-6),
        ("alarm3", "sensor-receiver3", "cloud", true, 60_000.0, 32, 5.0, 1e-6),
        ("hmi3", "cloud", "hmi3", false, 20.0, 20_000, 20.0, 1e-2),
    ];
    for (name, src, dst, poisson, period, size, lat, loss) in rows {
        let f = sc.flow(name).unwrap();
        assert_eq!((f.source.as_str(), f.destination.as_str()), (src, dst), "{name}");
        assert_eq!(f.is_poisson(), poisson, "{name}");
        assert_eq!(f.traffic.period_ms(), period, "{name}");
        assert_eq!(f.traffic.size(), size, "{name}");
        assert_eq!(f.latency_req_ms, lat, "{name}");
        assert_eq!(f.loss_budget, loss, "{name}");
    }
}

#[test]
fn routes_match_link_counts() {
    let sc = case_study();
    let control = route(&sc.topology, "robot1", "master1").unwrap();
    assert_eq!(control.len(), 1);
    assert!(sc.topology.link(&control[0].link).unwrap().is_cyclic());
    let alarm = route(&sc.topology, "sensor-receiver7", "cloud").unwrap();
    let links: Vec<_> = alarm.iter().map(|h| h.link.as_str()).collect();
    assert_eq!(links, ["cyc-sensor7", "eth-master7", "eth-cloud"]);
    assert!(matches!(route(&sc.topology, "cloud", "cloud"), Err(ScenarioError::Invalid { .. })));
}

#[test]
fn round_trip_is_identity() {
    let sc = case_study();
    let text = write_scenario(&sc);
    assert_eq!(parse_scenario(&text).unwrap(), sc);
    let again = write_scenario(&parse_scenario(&text).unwrap());
    assert_eq!(again, text);
}

#[test]
fn empty_flow_list_is_valid() {
    let sc = small("").unwrap();
    assert!(sc.flows.is_empty());
    assert_eq!(sc.topology.link("l2").unwrap().loss, 1.0 - 0.999);
}

#[test]
fn missing_node_is_named() {
    let err = small("f src=m dst=ghost traffic=periodic period_ms=1 size=10 priority=low latency_ms=1 reliability=0.9\n")
        .unwrap_err();
    assert!(matches!(&err, ScenarioError::UnknownReference { id, .. } if id == "ghost"), "{err}");
}

#[test]
fn syntax_errors_carry_position() {
    let err = small("f src=m dst=c traffic=periodic period_ms=x size=10 priority=low latency_ms=1 reliability=0.9\n")
        .unwrap_err();
    match err {
        ScenarioError::Syntax { line, column, .. } => {
            assert_eq!(line, 13);
            assert_eq!(column, 42);
        }
        other => panic!("{other}"),
    }
    let err = parse_scenario("[nodes]\nm kind=router\n").unwrap_err();
    assert!(matches!(err, ScenarioError::Syntax { line: 2, column: 8, .. }), "{err}");
    assert!(matches!(parse_scenario("x kind=master\n"), Err(ScenarioError::Syntax { line: 1, .. })));
    assert!(matches!(parse_scenario("[bogus]\n"), Err(ScenarioError::Syntax { line: 1, column: 1, .. })));
}

#[test]
fn over_allocation_rejected() {
    let f = "a src=d dst=m traffic=periodic period_ms=1 size=128 priority=high latency_ms=1 reliability=0.9\n\
             b src=d dst=m traffic=periodic period_ms=1 size=100 priority=high latency_ms=1 reliability=0.9\n";
    let err = small(f).unwrap_err();
    assert!(matches!(&err, ScenarioError::Invalid { field: "resources_bytes", .. }), "{err}");
}

#[test]
fn scheme_rules() {
    let base = "t src=d dst=m traffic=periodic period_ms=1 size=64 frame_bytes=32 priority=high latency_ms=1 reliability=0.9\n";
    let ok = format!("{base}p src=d dst=c traffic=poisson period_ms=100 size=32 priority=high latency_ms=5 reliability=0.9 scheme=overwrite:t\n");
    let sc = small(&ok).unwrap();
    let spec = sc.cycle_spec("u").unwrap();
    assert_eq!(spec.apps.len(), 2);
    assert_eq!(spec.apps[0].arrival.count, FrameCount::Deterministic(2));

    let unshaped = "p src=m dst=c traffic=poisson period_ms=100 size=32 priority=high latency_ms=5 reliability=0.9\n";
    assert!(matches!(small(unshaped), Err(ScenarioError::Invalid { field: "traffic", .. })));
    let bad_period = "p src=d dst=m traffic=periodic period_ms=1.5 size=32 priority=high latency_ms=5 reliability=0.9\n";
    assert!(matches!(small(bad_period), Err(ScenarioError::Invalid { field: "period_ms", .. })));
    let bad_target = format!("{base}p src=d dst=c traffic=poisson period_ms=100 size=32 priority=high latency_ms=5 reliability=0.9 scheme=overwrite:nope\n");
    assert!(matches!(small(&bad_target), Err(ScenarioError::UnknownReference { .. })));
}

#[test]
fn overrides() {
    let sc = case_study();
    let one = sc.with_target_frames(1).unwrap();
    assert_eq!(one.flow("control-up1").unwrap().frame_bytes, 128);
    assert_eq!(one.flow("control-down1").unwrap().frame_bytes, 32);
    assert!(sc.with_target_frames(3).is_err());
    let lam = sc.with_poisson_rate(0.1).unwrap();
    let spec = lam.cycle_spec("unit1").unwrap();
    let alarm = spec.apps.iter().find(|a| a.id == "alarm1").unwrap();
    assert!(matches!(alarm.arrival.count, FrameCount::Poisson(m) if (m - 0.1).abs() < 1e-15));
    assert!(sc.with_link_loss(1e-3).topology.links.iter().all(|l| l.loss == 1e-3));
}
