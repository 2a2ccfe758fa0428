//! End-to-end delay bounds and delivery reliabilities of scenario flows, and the
//! reliability and latency sweeps.
//!
//! A flow's path is at most one cyclic hop (first or last) plus switched hops.
//! Each direction of a switched link is a port with a high and a low priority
//! FIFO queue. The high queue sees a rate-latency server `RL(C, T)` with `T = 0`
//! on preemptive links and one low-priority frame time otherwise; the low queue
//! sees the leftover of `RL(C, 0)` after the high aggregate. Each queue is
//! analysed on its aggregate arrival, and a flow's arrival curve at the next port
//! is its output bound (alone in the queue) or its input shifted by the queue delay.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::curves::{CurveError, RateLatency, TokenBucket};
use crate::cyclic::{alarm_egress_bound, AppOutcome, CyclicError};
use crate::scenario::{CyclicPosition, FlowSpec, Hop, LinkKind, Priority, Scenario, ScenarioError, SchemeBinding, Traffic};

type Tb = TokenBucket<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum E2eError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Cyclic(#[from] CyclicError),
    #[error("unbounded delay at hop {hop}: {source}")]
    Unstable { hop: String, source: CurveError },
}

/// `scheme_success · Π links`.
pub fn path_reliability(scheme_success: f64, links: &[f64]) -> f64 {
    links.iter().fold(scheme_success, |acc, r| acc * r)
}

/// `1 - (1 - f_s) Π (1 - f_i)`, accurate when every failure is tiny.
pub fn path_failure(scheme_failure: f64, link_losses: &[f64]) -> f64 {
    let log_ok: f64 = link_losses.iter().map(|f| (-f).ln_1p()).sum::<f64>() + (-scheme_failure).ln_1p();
    -log_ok.exp_m1()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopResult {
    pub hop: String,
    pub delay_ms: f64,
    pub arrival_in: Option<Tb>,
    pub arrival_out: Option<Tb>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub flow: String,
    /// `None` when some hop is unstable.
    pub delay_bound: Option<f64>,
    pub unstable_hop: Option<String>,
    pub delivery_failure: f64,
    pub delivery_reliability: f64,
    pub per_hop: Vec<HopResult>,
    pub latency_met: bool,
    pub reliability_met: bool,
}

impl PathResult {
    pub fn passes(&self) -> bool {
        self.latency_met && self.reliability_met
    }
}

/// One switched hop of a stand-alone path analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedHop {
    pub id: String,
    /// Bytes per ms.
    pub rate: f64,
    pub priority: Priority,
    /// Other high-priority traffic at this port.
    pub high_cross: Tb,
    /// Other low-priority traffic at this port.
    pub low_cross: Tb,
    /// Non-preemptive blocking seen by the high queue, in ms.
    pub blocking_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathDelay {
    pub total_ms: f64,
    pub per_hop: Vec<HopResult>,
}

fn queue_service(rate: f64, priority: Priority, high: &Tb, blocking_ms: f64) -> Result<RateLatency<f64>, CurveError> {
    match priority {
        Priority::High => RateLatency::new(rate, blocking_ms),
        Priority::Low => RateLatency::new(rate, 0.0)?.leftover(high),
    }
}

/// Delay of a token-bucket flow through a cyclic access hop followed by switched
/// hops with the given cross traffic.
pub fn path_delay(arrival: Tb, access_delay_ms: f64, hops: &[SwitchedHop]) -> Result<PathDelay, E2eError> {
    let mut total = access_delay_ms;
    let mut per_hop = Vec::with_capacity(hops.len());
    let mut a = arrival;
    for hop in hops {
        let unstable = |source| E2eError::Unstable { hop: hop.id.clone(), source };
        let (same, high) = match hop.priority {
            Priority::High => (hop.high_cross, a.sum(&hop.high_cross)),
            Priority::Low => (hop.low_cross, hop.high_cross),
        };
        let service = queue_service(hop.rate, hop.priority, &high, hop.blocking_ms).map_err(unstable)?;
        let queue = a.sum(&same);
        let d = queue.delay_bound(&service).map_err(unstable)?;
        let out = if same.is_zero() { a.output_bound(&service).map_err(unstable)? } else { a.delayed(&d) };
        per_hop.push(HopResult { hop: hop.id.clone(), delay_ms: d, arrival_in: Some(a), arrival_out: Some(out) });
        total += d;
        a = out;
    }
    Ok(PathDelay { total_ms: total, per_hop })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    /// Frames per cycle that overwriting flows may emit, replacing the target's
    /// frame count in their egress bound.
    pub alarm_frames: Option<f64>,
}

/// Route and cyclic placement of one flow.
#[derive(Debug, Clone)]
pub struct FlowPath {
    pub hops: Vec<Hop>,
    pub cyclic: Option<(usize, String, CyclicPosition)>,
}

impl FlowPath {
    pub fn switched(&self) -> impl Iterator<Item = &Hop> {
        let skip = self.cyclic.as_ref().map(|c| c.0);
        self.hops.iter().enumerate().filter(move |(i, _)| Some(*i) != skip).map(|(_, h)| h)
    }
}

pub fn flow_paths(sc: &Scenario) -> Result<Vec<FlowPath>, E2eError> {
    sc.flows
        .iter()
        .map(|f| {
            let hops = sc.route(f)?;
            let cyclic = sc.cyclic_hop(&hops).map(|(i, u, p)| (i, u.id.clone(), p));
            Ok(FlowPath { hops, cyclic })
        })
        .collect()
}

/// Shortage outcome of each flow on its cyclic hop, keyed by flow name.
pub fn cyclic_outcomes(sc: &Scenario) -> Result<HashMap<String, AppOutcome<f64>>, E2eError> {
    let mut out = HashMap::new();
    for u in &sc.units {
        for o in sc.cycle_spec(&u.id)?.outcomes()? {
            out.insert(o.id.clone(), o);
        }
    }
    Ok(out)
}

/// End-to-end failure probability of every flow, in declaration order.
pub fn flow_failures(sc: &Scenario) -> Result<Vec<f64>, E2eError> {
    let outcomes = cyclic_outcomes(sc)?;
    let paths = flow_paths(sc)?;
    Ok(sc
        .flows
        .iter()
        .zip(&paths)
        .map(|(f, p)| {
            let shortage = outcomes.get(&f.name).map(|o| o.scheme_failure).unwrap_or(0.0);
            let losses: Vec<f64> = p.hops.iter().map(|h| sc.topology.link(&h.link).map_or(1.0, |l| l.loss)).collect();
            path_failure(shortage, &losses)
        })
        .collect())
}

/// Delay from message arrival at the device until it has crossed a first cyclic hop.
pub fn cyclic_access_delay(flow: &FlowSpec, cycle_ms: f64) -> f64 {
    match flow.scheme {
        SchemeBinding::Reserved => {
            let per_slot = (flow.slot_bytes / flow.frame_bytes as u64).max(1) as u32;
            flow.frames_per_message().div_ceil(per_slot) as f64 * cycle_ms
        }
        _ => cycle_ms,
    }
}

/// Rate-latency service of a reserved slot on a last cyclic hop.
pub fn cyclic_slot_service(flow: &FlowSpec, cycle_ms: f64) -> Result<RateLatency<f64>, CurveError> {
    let per_slot = flow.slot_bytes / flow.frame_bytes as u64;
    RateLatency::new((per_slot * flow.frame_bytes as u64) as f64 / cycle_ms, cycle_ms)
}

fn source_bound(flow: &FlowSpec) -> Tb {
    let s = flow.traffic.size() as f64;
    TokenBucket { rate: s / flow.traffic.period_ms(), burst: s }
}

/// Arrival bound of a flow at its first switched hop, and the delay spent before it.
pub fn ingress_bound(sc: &Scenario, flow: &FlowSpec, path: &FlowPath, opts: &AnalysisOptions) -> (Tb, f64) {
    let Some((_, unit, CyclicPosition::First)) = &path.cyclic else {
        return (source_bound(flow), 0.0);
    };
    let cycle = sc.unit(unit).map_or(1.0, |u| u.cycle_time_ms);
    let d = cyclic_access_delay(flow, cycle);
    let n = flow.frame_bytes;
    let per_cycle = |bytes: u64| {
        let m = (bytes / n as u64) as u32;
        alarm_egress_bound(m, n, &cycle)
    };
    let bound = match &flow.scheme {
        SchemeBinding::Reserved => source_bound(flow).delayed(&d),
        SchemeBinding::Fixed { bytes } => per_cycle(*bytes),
        SchemeBinding::Shared { pool } => per_cycle(sc.pools.iter().find(|p| &p.id == pool).map_or(0, |p| p.bytes)),
        SchemeBinding::Overwrite { target } => match opts.alarm_frames {
            Some(r) => {
                let burst = r * n as f64;
                TokenBucket { rate: burst / cycle, burst }
            }
            None => {
                let frames = sc.flow(target).map_or(0, FlowSpec::frames_per_message);
                alarm_egress_bound(frames, n, &cycle)
            }
        },
    };
    (bound, d)
}

#[derive(Debug, Clone, Default)]
struct PortLoad {
    high: Vec<(usize, usize)>,
    low: Vec<(usize, usize)>,
}

fn port_order(paths: &[Vec<Hop>]) -> Vec<Hop> {
    let mut index: HashMap<&Hop, usize> = HashMap::new();
    let mut ports: Vec<&Hop> = Vec::new();
    for p in paths {
        for h in p {
            index.entry(h).or_insert_with(|| {
                ports.push(h);
                ports.len() - 1
            });
        }
    }
    let mut succ: Vec<HashSet<usize>> = vec![HashSet::new(); ports.len()];
    let mut indeg = vec![0; ports.len()];
    for p in paths {
        for w in p.windows(2) {
            let (a, b) = (index[&w[0]], index[&w[1]]);
            if succ[a].insert(b) {
                indeg[b] += 1;
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..ports.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(ports.len());
    while let Some(i) = queue.pop_front() {
        order.push(ports[i].clone());
        let mut next: Vec<usize> = succ[i].iter().copied().collect();
        next.sort_unstable();
        for j in next {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    // cyclic dependencies would need a fixed point; routes on a tree never create them
    assert_eq!(order.len(), ports.len(), "port dependency graph has a cycle");
    order
}

fn tb_sum<'a>(mut it: impl Iterator<Item = &'a Option<Tb>>) -> Option<Tb> {
    it.try_fold(TokenBucket::zero(), |acc, a| Some(acc.sum(a.as_ref()?)))
}

/// Delay bounds, reliabilities and verdicts of every flow.
pub fn analyze(sc: &Scenario, opts: &AnalysisOptions) -> Result<Vec<PathResult>, E2eError> {
    let failures = flow_failures(sc)?;
    let paths = flow_paths(sc)?;
    let switched: Vec<Vec<Hop>> = paths.iter().map(|p| p.switched().cloned().collect()).collect();

    let n = sc.flows.len();
    // arrivals[f][k]: arrival curve of flow f at its k-th switched hop (k = len: after the last)
    let mut arrivals: Vec<Vec<Option<Tb>>> = switched.iter().map(|s| vec![None; s.len() + 1]).collect();
    let mut hop_delay: Vec<Vec<Option<f64>>> = switched.iter().map(|s| vec![None; s.len()]).collect();
    let mut unstable: Vec<Option<String>> = vec![None; n];
    let mut access = vec![0.0; n];
    for (i, f) in sc.flows.iter().enumerate() {
        let (a, d) = ingress_bound(sc, f, &paths[i], opts);
        arrivals[i][0] = Some(a);
        access[i] = d;
    }

    let mut loads: HashMap<Hop, PortLoad> = HashMap::new();
    for (i, hops) in switched.iter().enumerate() {
        for (k, h) in hops.iter().enumerate() {
            let load = loads.entry(h.clone()).or_default();
            match sc.flows[i].priority {
                Priority::High => load.high.push((i, k)),
                Priority::Low => load.low.push((i, k)),
            }
        }
    }

    for port in port_order(&switched) {
        let load = &loads[&port];
        let link = sc.topology.link(&port.link).expect("routes use known links");
        let (rate, preemptive) = match link.kind {
            LinkKind::Switched { rate_bps, preemptive } => (rate_bps / 8000.0, preemptive),
            LinkKind::Cyclic { .. } => unreachable!("cyclic hops are handled separately"),
        };
        let lmax_low = load.low.iter().map(|&(i, _)| sc.flows[i].frame_bytes).max().unwrap_or(0) as f64;
        let blocking = if preemptive { 0.0 } else { lmax_low / rate };
        let high = tb_sum(load.high.iter().map(|&(i, k)| &arrivals[i][k]));
        for (members, priority) in [(&load.high, Priority::High), (&load.low, Priority::Low)] {
            if members.is_empty() {
                continue;
            }
            let queue = tb_sum(members.iter().map(|&(i, k)| &arrivals[i][k]));
            let service = high
                .as_ref()
                .ok_or(CurveError::Invalid("unbounded high-priority arrival".into()))
                .and_then(|h| queue_service(rate, priority, h, blocking));
            let result = queue
                .ok_or(CurveError::Invalid("unbounded arrival".into()))
                .and_then(|q| service.and_then(|s| Ok((q.delay_bound(&s)?, s))));
            for &(i, k) in members.iter() {
                match (&result, arrivals[i][k]) {
                    (Ok((d, s)), Some(a)) => {
                        let out = if members.len() == 1 { a.output_bound(s).unwrap_or(a.delayed(d)) } else { a.delayed(d) };
                        arrivals[i][k + 1] = Some(out);
                        hop_delay[i][k] = Some(*d);
                    }
                    _ => {
                        if unstable[i].is_none() {
                            unstable[i] = Some(port.to_string());
                        }
                    }
                }
            }
        }
    }

    let mut results = Vec::with_capacity(n);
    for (i, f) in sc.flows.iter().enumerate() {
        let path = &paths[i];
        let mut per_hop = Vec::new();
        let mut total = Some(access[i]);
        let mut sw = 0;
        for (h_idx, h) in path.hops.iter().enumerate() {
            let cyc = path.cyclic.as_ref().filter(|c| c.0 == h_idx);
            match cyc {
                Some((_, unit, CyclicPosition::First)) => {
                    let _ = unit;
                    per_hop.push(HopResult {
                        hop: h.to_string(),
                        delay_ms: access[i],
                        arrival_in: Some(source_bound(f)),
                        arrival_out: arrivals[i][0],
                    });
                }
                Some((_, unit, CyclicPosition::Last)) => {
                    let cycle = sc.unit(unit).map_or(1.0, |u| u.cycle_time_ms);
                    let a = arrivals[i][sw];
                    let d = a.and_then(|a| {
                        let s = cyclic_slot_service(f, cycle).ok()?;
                        a.delay_bound(&s).ok()
                    });
                    if d.is_none() && unstable[i].is_none() {
                        unstable[i] = Some(h.to_string());
                    }
                    total = total.zip(d).map(|(t, d)| t + d);
                    per_hop.push(HopResult { hop: h.to_string(), delay_ms: d.unwrap_or(f64::INFINITY), arrival_in: a, arrival_out: None });
                }
                None => {
                    let d = hop_delay[i][sw];
                    total = total.zip(d).map(|(t, d)| t + d);
                    per_hop.push(HopResult {
                        hop: h.to_string(),
                        delay_ms: d.unwrap_or(f64::INFINITY),
                        arrival_in: arrivals[i][sw],
                        arrival_out: arrivals[i][sw + 1],
                    });
                    sw += 1;
                }
            }
        }
        let failure = failures[i];
        let latency_met = total.is_some_and(|t| t <= f.latency_req_ms * (1.0 + 1e-9));
        let reliability_met = failure <= f.loss_budget * (1.0 + 1e-9);
        results.push(PathResult {
            flow: f.name.clone(),
            delay_bound: total,
            unstable_hop: unstable[i].clone(),
            delivery_failure: failure,
            delivery_reliability: 1.0 - failure,
            per_hop,
            latency_met,
            reliability_met,
        });
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityRow {
    pub lambda: f64,
    pub control_failure: f64,
    pub alarm_failure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRow {
    pub r_alarms: f64,
    /// `None` when unbounded.
    pub alarm_delay_ms: Option<f64>,
    pub patient_info_delay_ms: Option<f64>,
}

fn group_indices(sc: &Scenario, names: &[String]) -> Vec<usize> {
    names.iter().filter_map(|n| sc.flows.iter().position(|f| &f.name == n)).collect()
}

/// Failure of the control and alarm groups for each alarm rate `lambda`
/// (arrivals per cycle). `control_frames` re-splits the control messages.
pub fn sweep_reliability(sc: &Scenario, lambdas: &[f64], control_frames: Option<u32>) -> Result<Vec<ReliabilityRow>, E2eError> {
    let control = group_indices(sc, &sc.sweep.control);
    let alarm = group_indices(sc, &sc.sweep.alarm);
    if control.is_empty() && alarm.is_empty() {
        return Ok(Vec::new());
    }
    let base = match control_frames {
        Some(k) => sc.with_target_frames(k)?,
        None => sc.clone(),
    };
    let worst = |f: &[f64], idx: &[usize]| idx.iter().map(|&i| f[i]).fold(0.0, f64::max);
    lambdas
        .iter()
        .map(|&lambda| {
            let f = flow_failures(&base.with_poisson_rate(lambda)?)?;
            Ok(ReliabilityRow { lambda, control_failure: worst(&f, &control), alarm_failure: worst(&f, &alarm) })
        })
        .collect()
}

/// Worst alarm and patient-info delay bounds for each alarm bound `R_alarms`
/// (frames per cycle admitted into the switched network).
pub fn sweep_latency(sc: &Scenario, r_alarms: &[f64]) -> Result<Vec<LatencyRow>, E2eError> {
    let alarm = group_indices(sc, &sc.sweep.alarm);
    let patient = group_indices(sc, &sc.sweep.patient);
    if alarm.is_empty() && patient.is_empty() {
        return Ok(Vec::new());
    }
    let worst = |res: &[PathResult], idx: &[usize]| {
        idx.iter().try_fold(0.0_f64, |acc, &i| res[i].delay_bound.map(|d| acc.max(d)))
    };
    r_alarms
        .iter()
        .map(|&r| {
            let res = analyze(sc, &AnalysisOptions { alarm_frames: Some(r) })?;
            Ok(LatencyRow { r_alarms: r, alarm_delay_ms: worst(&res, &alarm), patient_info_delay_ms: worst(&res, &patient) })
        })
        .collect()
}

/// Flows of `sc` whose period is a Poisson mean.
pub fn poisson_flows(sc: &Scenario) -> impl Iterator<Item = &FlowSpec> {
    sc.flows.iter().filter(|f| matches!(f.traffic, Traffic::Poisson { .. }))
}
