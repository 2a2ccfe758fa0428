use netslice::e2e::{LatencyRow, PathResult, ReliabilityRow};
use netslice::oracle::Check;
use netslice::sim::SimReport;

/// Nine significant digits, scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "unbounded".to_string(), sci)
}

pub fn analysis_csv(rows: &[PathResult], reqs: &[(f64, f64)]) -> String {
    let mut out = String::from("flow,delay_bound_ms,latency_req_ms,latency,failure,failure_budget,reliability,verdict\n");
    for (r, (lat, budget)) in rows.iter().zip(reqs) {
        out += &format!(
            "{},{},{},{},{},{},{},{}\n",
            r.flow,
            opt(r.delay_bound),
            sci(*lat),
            verdict(r.latency_met),
            sci(r.delivery_failure),
            sci(*budget),
            verdict(r.reliability_met),
            verdict(r.passes()),
        );
    }
    out
}

pub fn analysis_table(rows: &[PathResult], reqs: &[(f64, f64)]) -> String {
    let width = rows.iter().map(|r| r.flow.len()).max().unwrap_or(4).max(4);
    let mut out = format!(
        "{:<width$}  {:>12}  {:>9}  {:<7}  {:>12}  {:>9}  {:<7}\n",
        "flow", "delay [ms]", "req [ms]", "latency", "failure", "budget", "reliab."
    );
    for (r, (lat, budget)) in rows.iter().zip(reqs) {
        let delay = r.delay_bound.map_or("unbounded".to_string(), |d| format!("{d:.6}"));
        out += &format!(
            "{:<width$}  {:>12}  {:>9}  {:<7}  {:>12.4e}  {:>9.1e}  {:<7}\n",
            r.flow,
            delay,
            lat,
            verdict(r.latency_met),
            r.delivery_failure,
            budget,
            verdict(r.reliability_met),
        );
    }
    out
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn reliability_csv(rows: &[ReliabilityRow]) -> String {
    let mut out = String::from("lambda,control_failure,alarm_failure\n");
    for r in rows {
        out += &format!("{},{},{}\n", sci(r.lambda), sci(r.control_failure), sci(r.alarm_failure));
    }
    out
}

pub fn latency_csv(rows: &[LatencyRow]) -> String {
    let mut out = String::from("r_alarms,alarm_delay_ms,patient_info_delay_ms\n");
    for r in rows {
        out += &format!("{},{},{}\n", sci(r.r_alarms), opt(r.alarm_delay_ms), opt(r.patient_info_delay_ms));
    }
    out
}

pub fn estimates_csv(rep: &SimReport) -> String {
    let mut out = String::from("flow,metric,trials,failures,rate,std_error,ci_low,ci_high,analytic,z\n");
    for e in &rep.estimates {
        out += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            e.flow,
            e.metric,
            e.trials,
            e.failures,
            sci(e.rate),
            sci(e.std_error),
            sci(e.ci_low),
            sci(e.ci_high),
            sci(e.analytic),
            sci(e.z()),
        );
    }
    out
}

pub fn delays_csv(rep: &SimReport) -> String {
    let mut out = String::from("flow,frames,max_delay_ms,mean_delay_ms,bound_ms,tightness,violations\n");
    for d in &rep.delays {
        out += &format!(
            "{},{},{},{},{},{},{}\n",
            d.flow,
            d.frames,
            sci(d.max_delay_ms),
            sci(d.mean_delay_ms),
            sci(d.bound_ms),
            sci(d.tightness()),
            d.violations
        );
    }
    out
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut out = String::from("check,cases,worst,tolerance,verdict\n");
    for c in checks {
        out += &format!("{},{},{},{},{}\n", c.name, c.cases, sci(c.worst), sci(c.tolerance), verdict(c.passed()));
    }
    out
}
