//! Discrete-event simulation of the switched network with two strict-priority
//! FIFO queues per port, store-and-forward, and reserved slots on last cyclic hops.
//! Time is kept in integer nanoseconds.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{unit_rng, DelayStats, SimConfig, SimMode, SimReport, TrafficPattern};
use crate::cyclic::poisson_pmf;
use crate::e2e::{analyze, flow_paths, ingress_bound, AnalysisOptions, E2eError};
use crate::curves::CurveError;
use crate::scenario::{CyclicPosition, FlowSpec, Hop, LinkKind, Priority, Scenario, SchemeBinding, Traffic};

const NS_PER_MS: f64 = 1e6;

fn ms_to_ns(ms: f64) -> u64 {
    (ms * NS_PER_MS).round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum What {
    Emit { flow: usize },
    Arrive { frame: usize, port: usize },
    TxDone { port: usize, version: u64 },
    Boundary { slot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    /// Arrivals, then transmission ends, then slot boundaries.
    kind: u8,
    priority: u8,
    seq: u64,
    what: What,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    frame: usize,
    remaining_ns: u64,
}

struct Busy {
    job: Job,
    high: bool,
    end: u64,
}

struct Port {
    rate_bps: f64,
    preemptive: bool,
    high: VecDeque<Job>,
    low: VecDeque<Job>,
    busy: Option<Busy>,
    version: u64,
}

impl Port {
    fn tx_ns(&self, bytes: u32) -> u64 {
        (bytes as f64 * 8e9 / self.rate_bps).ceil() as u64
    }
}

struct Slot {
    cycle_ns: u64,
    bytes: u64,
    queue: VecDeque<usize>,
    scheduled: bool,
}

struct Frame {
    flow: usize,
    origin: u64,
    bytes: u32,
    hop: usize,
}

enum Source {
    Greedy {
        rate: f64,
        burst: f64,
        credit_ns: u64,
        /// Clock offset so that every origin is non-negative.
        base: u64,
        sent_bytes: f64,
        msg_left: u32,
        last: u64,
    },
    Periodic {
        period_ns: u64,
        next: u64,
        /// `(cycle, frames per slot)` when a reserved first cyclic hop precedes the network.
        cycle: Option<(u64, u32)>,
    },
    Poisson {
        cdf: Vec<f64>,
        cap: u32,
        cycle_ns: u64,
        next_cycle: u64,
    },
}

struct FlowSim {
    name: String,
    priority: Priority,
    frame_bytes: u32,
    size: u32,
    ports: Vec<usize>,
    slot: Option<usize>,
    bound_ms: f64,
    hops: u64,
    source: Source,
    rng: ChaCha8Rng,
    pending: VecDeque<(u64, u64, u32)>,
    frames: u64,
    max_ns: u64,
    sum_ns: f64,
    violations: u64,
}

impl FlowSim {
    fn frame_sizes(&self) -> impl Iterator<Item = u32> {
        let (n, s) = (self.frame_bytes, self.size);
        (0..s.div_ceil(n)).map(move |j| if (j + 1) * n <= s { n } else { s - j * n })
    }

    /// Refills `pending` with the next emissions `(emit, origin, bytes)`;
    /// false when the source is exhausted.
    fn refill(&mut self) -> bool {
        if !self.pending.is_empty() {
            return true;
        }
        let sizes: Vec<u32> = self.frame_sizes().collect();
        match &mut self.source {
            Source::Greedy { rate, burst, credit_ns, base, sent_bytes, msg_left, last } => {
                if *msg_left == 0 {
                    *msg_left = sizes.len() as u32;
                }
                let bytes = sizes[sizes.len() - *msg_left as usize];
                *msg_left -= 1;
                let total = *sent_bytes + bytes as f64;
                let t = if total <= *burst + 1e-9 {
                    0
                } else if *rate <= 0.0 {
                    return false;
                } else {
                    (((total - *burst) / *rate) * NS_PER_MS).ceil() as u64
                };
                *last = (*last).max(t);
                *sent_bytes = total;
                let t = *base + *last;
                self.pending.push_back((t, t - *credit_ns, bytes));
            }
            Source::Periodic { period_ns, next, cycle } => {
                let arrival = *next;
                *next += *period_ns;
                match cycle {
                    None => {
                        for b in sizes {
                            self.pending.push_back((arrival, arrival, b));
                        }
                    }
                    Some((c, per_slot)) => {
                        let first = (arrival / *c + 1) * *c;
                        for (j, b) in sizes.into_iter().enumerate() {
                            let t = first + (j as u64 / *per_slot as u64) * *c;
                            self.pending.push_back((t, arrival, b));
                        }
                    }
                }
            }
            Source::Poisson { cdf, cap, cycle_ns, next_cycle } => {
                if *cap == 0 || cdf.first().is_some_and(|&p0| p0 >= 1.0) {
                    return false;
                }
                loop {
                    let start = *next_cycle * *cycle_ns;
                    *next_cycle += 1;
                    let u: f64 = self.rng.random();
                    let count = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u32;
                    if count == 0 {
                        continue;
                    }
                    for _ in 0..count.min(*cap) {
                        let offset = (self.rng.random::<f64>() * *cycle_ns as f64) as u64;
                        self.pending.push_back((start + *cycle_ns, start + offset, self.size));
                    }
                    break;
                }
            }
        }
        true
    }
}

struct Engine {
    events: BinaryHeap<Reverse<Event>>,
    seq: u64,
    ports: Vec<Port>,
    slots: Vec<Slot>,
    frames: Vec<Frame>,
    flows: Vec<FlowSim>,
}

impl Engine {
    fn push(&mut self, time: u64, priority: Priority, what: What) {
        let kind = match what {
            What::Emit { .. } | What::Arrive { .. } => 0,
            What::TxDone { .. } => 1,
            What::Boundary { .. } => 2,
        };
        self.seq += 1;
        let priority = match priority {
            Priority::High => 0,
            Priority::Low => 1,
        };
        self.events.push(Reverse(Event { time, kind, priority, seq: self.seq, what }));
    }

    fn start(&mut self, port: usize, now: u64) {
        let p = &mut self.ports[port];
        let (job, high) = match p.high.pop_front() {
            Some(j) => (j, true),
            None => match p.low.pop_front() {
                Some(j) => (j, false),
                None => return,
            },
        };
        p.version += 1;
        let end = now + job.remaining_ns;
        p.busy = Some(Busy { job, high, end });
        let version = p.version;
        let prio = if high { Priority::High } else { Priority::Low };
        self.push(end, prio, What::TxDone { port, version });
    }

    fn arrive(&mut self, frame: usize, port: usize, now: u64) {
        let f = &self.frames[frame];
        let prio = self.flows[f.flow].priority;
        let p = &mut self.ports[port];
        let job = Job { frame, remaining_ns: p.tx_ns(f.bytes) };
        match prio {
            Priority::High => p.high.push_back(job),
            Priority::Low => p.low.push_back(job),
        }
        match &p.busy {
            None => self.start(port, now),
            Some(b) if prio == Priority::High && !b.high && p.preemptive => {
                let b = p.busy.take().expect("checked busy");
                p.low.push_front(Job { frame: b.job.frame, remaining_ns: b.end - now });
                self.start(port, now);
            }
            _ => {}
        }
    }

    fn forward(&mut self, frame: usize, now: u64) {
        let f = &mut self.frames[frame];
        f.hop += 1;
        let flow = &self.flows[f.flow];
        if let Some(&port) = flow.ports.get(f.hop) {
            let prio = flow.priority;
            self.push(now, prio, What::Arrive { frame, port });
        } else if let Some(slot) = flow.slot {
            let s = &mut self.slots[slot];
            s.queue.push_back(frame);
            if !s.scheduled {
                s.scheduled = true;
                let at = (now / s.cycle_ns + 1) * s.cycle_ns;
                self.push(at, Priority::Low, What::Boundary { slot });
            }
        } else {
            self.deliver(frame, now);
        }
    }

    fn deliver(&mut self, frame: usize, now: u64) {
        let f = &self.frames[frame];
        let flow = &mut self.flows[f.flow];
        let d = now - f.origin;
        flow.frames += 1;
        flow.max_ns = flow.max_ns.max(d);
        flow.sum_ns += d as f64;
        if d as f64 > flow.bound_ms * NS_PER_MS + flow.hops as f64 {
            flow.violations += 1;
        }
    }

    fn emit(&mut self, flow: usize, now: u64) {
        let (_, origin, bytes) = self.flows[flow].pending.pop_front().expect("emit follows refill");
        let frame = self.frames.len();
        self.frames.push(Frame { flow, origin, bytes, hop: 0 });
        let port = self.flows[flow].ports[0];
        self.arrive(frame, port, now);
    }
}

fn source_for(
    sc: &Scenario,
    flow: &FlowSpec,
    path: &crate::e2e::FlowPath,
    opts: &AnalysisOptions,
    pattern: TrafficPattern,
    base: u64,
) -> Source {
    let (tb, access) = ingress_bound(sc, flow, path, opts);
    let first_cyclic = match &path.cyclic {
        Some((_, unit, CyclicPosition::First)) => sc.unit(unit),
        _ => None,
    };
    match pattern {
        TrafficPattern::Greedy => Source::Greedy {
            rate: tb.rate,
            burst: tb.burst,
            credit_ns: ms_to_ns(access),
            base,
            sent_bytes: 0.0,
            msg_left: 0,
            last: 0,
        },
        TrafficPattern::Random => match flow.traffic {
            Traffic::Periodic { period_ms, .. } => Source::Periodic {
                period_ns: ms_to_ns(period_ms),
                next: 0,
                cycle: first_cyclic.map(|u| {
                    let per_slot = (flow.slot_bytes / flow.frame_bytes as u64).max(1) as u32;
                    (ms_to_ns(u.cycle_time_ms), per_slot)
                }),
            },
            Traffic::Poisson { mean_period_ms, .. } => {
                let cycle = first_cyclic.map_or(1.0, |u| u.cycle_time_ms);
                let mut acc = 0.0;
                let cdf = poisson_pmf(&(cycle / mean_period_ms))
                    .into_iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                let cap = match flow.scheme {
                    SchemeBinding::Reserved => u32::MAX,
                    _ => (tb.burst / flow.frame_bytes as f64).floor() as u32,
                };
                Source::Poisson { cdf, cap, cycle_ns: ms_to_ns(cycle), next_cycle: 0 }
            }
        },
    }
}

/// Frame-level simulation of every flow that crosses the switched network, until
/// `config.count` frames have been emitted. Observed end-to-end delays include
/// the cyclic access delay: its bound under the greedy pattern, the sampled wait
/// under the random pattern.
pub fn simulate_queues(sc: &Scenario, config: &SimConfig) -> Result<SimReport, E2eError> {
    let opts = AnalysisOptions { alarm_frames: config.alarm_frames.map(f64::from) };
    let results = analyze(sc, &opts)?;
    let paths = flow_paths(sc)?;

    let base = paths
        .iter()
        .zip(&sc.flows)
        .map(|(p, f)| ms_to_ns(ingress_bound(sc, f, p, &opts).1))
        .max()
        .unwrap_or(0);
    let mut ports: Vec<Port> = Vec::new();
    let mut port_ids: Vec<Hop> = Vec::new();
    let mut slots: Vec<Slot> = Vec::new();
    let mut flows = Vec::new();
    for (i, f) in sc.flows.iter().enumerate() {
        let path = &paths[i];
        let switched: Vec<&Hop> = path.switched().collect();
        if switched.is_empty() {
            continue;
        }
        let res = &results[i];
        let bound_ms = res.delay_bound.ok_or_else(|| E2eError::Unstable {
            hop: res.unstable_hop.clone().unwrap_or_default(),
            source: CurveError::Invalid(format!("{} has no delay bound", f.name)),
        })?;
        let mut idx = Vec::new();
        for h in switched {
            let p = match port_ids.iter().position(|q| q == h) {
                Some(p) => p,
                None => {
                    let link = sc.topology.link(&h.link).expect("routes use known links");
                    let LinkKind::Switched { rate_bps, preemptive } = link.kind else { unreachable!("switched hop") };
                    ports.push(Port { rate_bps, preemptive, high: VecDeque::new(), low: VecDeque::new(), busy: None, version: 0 });
                    port_ids.push(h.clone());
                    ports.len() - 1
                }
            };
            idx.push(p);
        }
        let slot = match &path.cyclic {
            Some((_, unit, CyclicPosition::Last)) => {
                let u = sc.unit(unit).expect("validated unit");
                let per_slot = f.slot_bytes / f.frame_bytes as u64;
                slots.push(Slot {
                    cycle_ns: ms_to_ns(u.cycle_time_ms),
                    bytes: per_slot * f.frame_bytes as u64,
                    queue: VecDeque::new(),
                    scheduled: false,
                });
                Some(slots.len() - 1)
            }
            _ => None,
        };
        flows.push(FlowSim {
            name: f.name.clone(),
            priority: f.priority,
            frame_bytes: f.frame_bytes,
            size: f.traffic.size(),
            ports: idx,
            slot,
            bound_ms,
            hops: path.hops.len() as u64,
            source: source_for(sc, f, path, &opts, config.pattern, base),
            rng: unit_rng(config.seed, i as u64),
            pending: VecDeque::new(),
            frames: 0,
            max_ns: 0,
            sum_ns: 0.0,
            violations: 0,
        });
    }

    let mut eng = Engine { events: BinaryHeap::new(), seq: 0, ports, slots, frames: Vec::new(), flows };
    for i in 0..eng.flows.len() {
        if eng.flows[i].refill() {
            let (t, _, _) = eng.flows[i].pending[0];
            let prio = eng.flows[i].priority;
            eng.push(t, prio, What::Emit { flow: i });
        }
    }
    let mut emitted = 0_u64;
    while let Some(Reverse(ev)) = eng.events.pop() {
        let now = ev.time;
        match ev.what {
            What::Emit { flow } => {
                if emitted >= config.count {
                    continue;
                }
                emitted += 1;
                eng.emit(flow, now);
                if eng.flows[flow].refill() {
                    let (t, _, _) = eng.flows[flow].pending[0];
                    let prio = eng.flows[flow].priority;
                    eng.push(t.max(now), prio, What::Emit { flow });
                }
            }
            What::Arrive { frame, port } => eng.arrive(frame, port, now),
            What::TxDone { port, version } => {
                if eng.ports[port].version != version || eng.ports[port].busy.is_none() {
                    continue;
                }
                let b = eng.ports[port].busy.take().expect("checked busy");
                eng.forward(b.job.frame, now);
                eng.start(port, now);
            }
            What::Boundary { slot } => {
                let mut room = eng.slots[slot].bytes;
                while let Some(&fr) = eng.slots[slot].queue.front() {
                    let b = eng.frames[fr].bytes as u64;
                    if b > room {
                        break;
                    }
                    room -= b;
                    eng.slots[slot].queue.pop_front();
                    eng.deliver(fr, now);
                }
                let s = &mut eng.slots[slot];
                if s.queue.is_empty() {
                    s.scheduled = false;
                } else {
                    let next = now + s.cycle_ns;
                    eng.push(next, Priority::Low, What::Boundary { slot });
                }
            }
        }
    }

    let delays = eng
        .flows
        .iter()
        .map(|f| DelayStats {
            flow: f.name.clone(),
            frames: f.frames,
            max_delay_ms: f.max_ns as f64 / NS_PER_MS,
            mean_delay_ms: if f.frames > 0 { f.sum_ns / f.frames as f64 / NS_PER_MS } else { 0.0 },
            bound_ms: f.bound_ms,
            violations: f.violations,
        })
        .collect();
    Ok(SimReport { mode: SimMode::QueueLatency, seed: config.seed, count: config.count, estimates: Vec::new(), delays })
}
