//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use netslice::cyclic::{utilization, ArrivalModel, SliceScheme};
use netslice::e2e::{sweep_latency, sweep_reliability, AnalysisOptions};
use netslice::oracle;
use netslice::scenario::{case_study, schemes};
use netslice::sim::{simulate_cycles, simulate_queues, SimConfig};
use netslice::{analyze, Bucket, Server};

struct Outcome {
    ok: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn token_bucket_example() -> Outcome {
    let a = Bucket::new(32.0, 32.0).unwrap();
    let s = Server::new(35.0, 128.0 / 35.0).unwrap();
    let out = a.output_bound(&s).unwrap();
    let d = a.delay_bound(&s).unwrap();
    let ok = (out.rate - 32.0).abs() < 1e-12 && (out.burst - 149.03).abs() <= 0.5 && (d - 4.571).abs() <= 0.01;
    outcome(ok, format!("output burst {:.4} B, delay bound {:.5} ms", out.burst, d))
}

fn control_claim() -> Outcome {
    let sc = case_study();
    let rows = sweep_reliability(&sc, &[4e-6], Some(4)).unwrap();
    let f = rows[0].control_failure;
    let ratio = f / 1e-6;
    outcome((1.0 / 1.05..=1.05).contains(&ratio), format!("control failure {f:.6e} at lambda 4e-6 (ratio {ratio:.4})"))
}

fn floors() -> Outcome {
    let sc = case_study();
    let rows = sweep_reliability(&sc, &[0.0, 1e-12], None).unwrap();
    let alarm_floor = 1.0 - (1.0 - 1e-9_f64).powi(3);
    let ok = rows
        .iter()
        .all(|r| (r.control_failure - 1e-9).abs() <= 1e-12 && (r.alarm_failure - alarm_floor).abs() <= 1e-12);
    outcome(
        ok,
        format!(
            "control {:.6e} (floor 1e-9), alarm {:.6e} (floor {:.6e})",
            rows[1].control_failure, rows[1].alarm_failure, alarm_floor
        ),
    )
}

fn latency_shape() -> Outcome {
    let sc = case_study();
    let grid: Vec<f64> = (0..=80).map(|i| i as f64 * 0.1).collect();
    let rows = sweep_latency(&sc, &grid).unwrap();
    let near = sweep_latency(&sc, &[1e-9]).unwrap()[0].alarm_delay_ms.unwrap();
    let at0 = rows[0].alarm_delay_ms.unwrap();
    let asymptote = (at0 - 1.0).abs() <= 1e-6 && (near - 1.0).abs() <= 1e-6;
    let mut worst_gap = f64::INFINITY;
    for w in rows.windows(2) {
        let dr = w[1].r_alarms - w[0].r_alarms;
        let alarm = (w[1].alarm_delay_ms.unwrap() - w[0].alarm_delay_ms.unwrap()) / dr;
        let patient = (w[1].patient_info_delay_ms.unwrap() - w[0].patient_info_delay_ms.unwrap()) / dr;
        worst_gap = worst_gap.min(patient - alarm);
    }
    outcome(
        asymptote && worst_gap >= 0.0,
        format!("alarm delay {at0:.9} ms at R=0, min slope gap (patient - alarm) {worst_gap:.4e} ms/frame over {} points", rows.len()),
    )
}

fn utilization_claims() -> Outcome {
    let lambda: f64 = 1.0 / 60_000.0;
    let alarm = [ArrivalModel::poisson(lambda, 32).unwrap()];
    let over = utilization(&SliceScheme::Overwrite { target: "control".into() }, &alarm);
    let fixed = utilization(&SliceScheme::Fixed { allocation: 32 }, &alarm);
    let ok = over == 1.0 && (fixed - lambda).abs() <= 1e-8;
    outcome(
        ok,
        format!(
            "overwrite {over}, fixed 32 B {fixed:.6e} vs one alarm per 60000 cycles {lambda:.6e}"
        ),
    )
}

fn oracles() -> Outcome {
    let checks = oracle::run_all(2024);
    let ok = checks.iter().all(|c| c.passed());
    let detail = checks.iter().map(|c| format!("{} {:.1e}", c.name, c.worst)).collect::<Vec<_>>().join(", ");
    outcome(ok, format!("{} checks: {detail}", checks.len()))
}

fn simulation() -> Outcome {
    let sc = case_study();
    let mut cfg = SimConfig::new(42, 1_300_000);
    let greedy = simulate_queues(&sc, &cfg).unwrap();
    let bounds_ok = greedy.frames() >= 1_000_000 && greedy.violations() == 0;
    let alarms: Vec<_> = greedy.delays.iter().filter(|d| d.flow.starts_with("alarm")).collect();
    let alarm_frames: u64 = alarms.iter().map(|d| d.frames).sum();
    let alarm_tight = alarms.iter().map(|d| d.tightness()).fold(f64::INFINITY, f64::min);

    let mut estimates = 0;
    let mut worst_z = 0.0_f64;
    let mut mc_ok = true;
    for lambda in [0.01, 0.1, 0.5] {
        let scaled = schemes().with_poisson_rate(lambda).unwrap();
        cfg.count = 10_000_000;
        let rep = simulate_cycles(&scaled, &cfg).unwrap();
        estimates += rep.estimates.len();
        worst_z = rep.estimates.iter().map(|e| e.z()).fold(worst_z, f64::max);
        mc_ok &= rep.all_agree(4.0);
    }
    outcome(
        bounds_ok && mc_ok,
        format!(
            "{} greedy frames ({alarm_frames} alarm), {} bound violations, alarm delay/bound >= {alarm_tight:.4}; {estimates} Monte Carlo estimates, worst |z| {worst_z:.2}",
            greedy.frames(),
            greedy.violations()
        ),
    )
}

fn main() {
    // ensure the bundled scenario analyses cleanly before timing anything
    analyze(&case_study(), &AnalysisOptions::default()).unwrap();

    let criteria: [Criterion; 7] = [
        ("1 output and delay bound of the DNC example", token_bucket_example, Duration::from_secs(1)),
        ("2 control reliability with 4 frames at lambda 4e-6", control_claim, Duration::from_secs(1)),
        ("3 reliability floors of the links", floors, Duration::from_secs(1)),
        ("4 latency sweep asymptote and slope ordering", latency_shape, Duration::from_secs(5)),
        ("5 utilization of overwrite and fixed allocation", utilization_claims, Duration::from_secs(1)),
        ("6 closed forms against oracles", oracles, Duration::from_secs(30)),
        ("7 simulation dominance and Monte Carlo agreement", simulation, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let ok = o.ok && took <= limit;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({}; {:.3} s of {} s)",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
