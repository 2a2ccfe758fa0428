//! Scenario model: topology, factory units, pools and flows, plus routing and
//! validation. The text format lives in [`format`].

mod format;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::cyclic::{Allocation, ArrivalModel, CycleApp, CycleSpec, FrameCount};

pub use format::{parse_scenario, write_scenario};

/// Text of the bundled case study.
pub const CASE_STUDY: &str = include_str!("../../scenarios/case_study.scn");

/// Parses the bundled case study.
pub fn case_study() -> Scenario {
    parse_scenario(CASE_STUDY).expect("bundled case study is valid")
}

/// A single unit with one application per slicing scheme.
pub const SCHEMES: &str = include_str!("../../scenarios/schemes.scn");

pub fn schemes() -> Scenario {
    parse_scenario(SCHEMES).expect("bundled scheme scenario is valid")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown {what} `{id}` referenced by {by}")]
    UnknownReference { what: &'static str, id: String, by: String },
    #[error("{item}: invalid `{field}`: {message}")]
    Invalid { item: String, field: &'static str, message: String },
    #[error("no route from {from} to {to}")]
    NoRoute { from: String, to: String },
}

fn invalid(item: &str, field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { item: item.to_string(), field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Device,
    Master,
    Switch,
    Cloud,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Device => "device",
            NodeKind::Master => "master",
            NodeKind::Switch => "switch",
            NodeKind::Cloud => "cloud",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkKind {
    /// Master/slave link inside a factory unit; capacity comes from the unit's cycle.
    Cyclic { unit: String },
    /// Full-duplex Ethernet link with a high and a low priority queue per direction.
    Switched { rate_bps: f64, preemptive: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub a: String,
    pub b: String,
    /// Frame loss probability, `1 - frame reliability`.
    pub loss: f64,
    pub kind: LinkKind,
}

impl Link {
    pub fn is_cyclic(&self) -> bool {
        matches!(self.kind, LinkKind::Cyclic { .. })
    }

    /// Rate in bytes per millisecond for switched links.
    pub fn bytes_per_ms(&self) -> Option<f64> {
        match self.kind {
            LinkKind::Switched { rate_bps, .. } => Some(rate_bps / 8000.0),
            LinkKind::Cyclic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

impl Topology {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: String,
    pub master: String,
    pub cycle_time_ms: f64,
    pub resources_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub id: String,
    pub unit: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Traffic {
    Periodic { period_ms: f64, size: u32 },
    Poisson { mean_period_ms: f64, size: u32 },
}

impl Traffic {
    pub fn size(&self) -> u32 {
        match *self {
            Traffic::Periodic { size, .. } | Traffic::Poisson { size, .. } => size,
        }
    }

    pub fn period_ms(&self) -> f64 {
        match *self {
            Traffic::Periodic { period_ms, .. } => period_ms,
            Traffic::Poisson { mean_period_ms, .. } => mean_period_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Priority {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeBinding {
    Reserved,
    Fixed { bytes: u64 },
    Shared { pool: String },
    Overwrite { target: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub name: String,
    pub source: String,
    pub destination: String,
    pub traffic: Traffic,
    pub priority: Priority,
    pub latency_req_ms: f64,
    /// Tolerated failure probability, `1 - reliability requirement`.
    pub loss_budget: f64,
    /// Bytes per frame on every hop.
    pub frame_bytes: u32,
    /// Bytes per cycle reserved on the cyclic hop for reserved flows.
    pub slot_bytes: u64,
    pub scheme: SchemeBinding,
}

impl FlowSpec {
    pub fn frames_per_message(&self) -> u32 {
        self.traffic.size().div_ceil(self.frame_bytes)
    }

    pub fn is_poisson(&self) -> bool {
        matches!(self.traffic, Traffic::Poisson { .. })
    }
}

/// Flow groups used by the sweeps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSpec {
    pub control: Vec<String>,
    pub alarm: Vec<String>,
    pub patient: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    pub units: Vec<Unit>,
    pub pools: Vec<Pool>,
    pub flows: Vec<FlowSpec>,
    pub sweep: SweepSpec,
}

/// One traversal of a link.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hop {
    pub link: String,
    pub from: String,
    pub to: String,
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}->{})", self.link, self.from, self.to)
    }
}

/// Where a flow's cyclic hop sits on its path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CyclicPosition {
    First,
    Last,
}

/// Shortest path between two nodes; errors unless it exists and is unique.
pub fn route(topology: &Topology, from: &str, to: &str) -> Result<Vec<Hop>, ScenarioError> {
    let no_route = || ScenarioError::NoRoute { from: from.to_string(), to: to.to_string() };
    if from == to {
        return Err(invalid(from, "destination", "source and destination are the same node"));
    }
    for id in [from, to] {
        if topology.node(id).is_none() {
            return Err(ScenarioError::UnknownReference { what: "node", id: id.to_string(), by: "route".into() });
        }
    }
    let mut adj: HashMap<&str, Vec<&Link>> = HashMap::new();
    for l in &topology.links {
        adj.entry(l.a.as_str()).or_default().push(l);
        adj.entry(l.b.as_str()).or_default().push(l);
    }
    // BFS with path counting
    let mut dist: HashMap<&str, usize> = HashMap::from([(from, 0)]);
    let mut count: HashMap<&str, u64> = HashMap::from([(from, 1)]);
    let mut parent: HashMap<&str, (&str, &Link)> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for l in adj.get(u).into_iter().flatten() {
            let v = if l.a == u { l.b.as_str() } else { l.a.as_str() };
            let du = dist[u];
            match dist.get(v) {
                None => {
                    dist.insert(v, du + 1);
                    count.insert(v, count[u]);
                    parent.insert(v, (u, l));
                    queue.push_back(v);
                }
                Some(&dv) if dv == du + 1 => {
                    let c = count[u].saturating_add(count[v]);
                    count.insert(v, c);
                }
                _ => {}
            }
        }
    }
    match count.get(to) {
        None => return Err(no_route()),
        Some(&c) if c > 1 => {
            return Err(invalid(to, "route", format!("{c} equal-length paths from {from}; routes must be unique")))
        }
        _ => {}
    }
    let mut hops = Vec::new();
    let mut at = to;
    while at != from {
        let (prev, link) = parent[at];
        hops.push(Hop { link: link.id.clone(), from: prev.to_string(), to: at.to_string() });
        at = prev;
    }
    hops.reverse();
    Ok(hops)
}

impl Scenario {
    pub fn unit(&self, id: &str) -> Option<&Unit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn flow(&self, name: &str) -> Option<&FlowSpec> {
        self.flows.iter().find(|f| f.name == name)
    }

    pub fn route(&self, flow: &FlowSpec) -> Result<Vec<Hop>, ScenarioError> {
        route(&self.topology, &flow.source, &flow.destination)
    }

    /// The flow's cyclic hop, its unit and whether it is the first or last hop.
    pub fn cyclic_hop(&self, path: &[Hop]) -> Option<(usize, &Unit, CyclicPosition)> {
        path.iter().enumerate().find_map(|(i, h)| {
            let link = self.topology.link(&h.link)?;
            match &link.kind {
                LinkKind::Cyclic { unit } => {
                    let pos = if i == 0 { CyclicPosition::First } else { CyclicPosition::Last };
                    Some((i, self.unit(unit)?, pos))
                }
                _ => None,
            }
        })
    }

    /// Per-cycle arrival model of a flow on its cyclic hop.
    pub fn arrival_model(&self, flow: &FlowSpec, cycle_ms: f64) -> ArrivalModel<f64> {
        let frames = flow.frames_per_message();
        let count = match flow.traffic {
            Traffic::Poisson { mean_period_ms, .. } => FrameCount::Poisson(cycle_ms / mean_period_ms),
            Traffic::Periodic { period_ms, .. } => {
                let every = (period_ms / cycle_ms).round().max(1.0);
                if every <= 1.0 {
                    FrameCount::Deterministic(frames)
                } else {
                    let mut pmf = vec![0.0; frames as usize + 1];
                    pmf[0] = 1.0 - 1.0 / every;
                    pmf[frames as usize] += 1.0 / every;
                    FrameCount::Pmf(pmf)
                }
            }
        };
        ArrivalModel { count, frame_size: flow.frame_bytes }
    }

    /// Cycle specification of one unit, built from the flows crossing its cyclic links.
    pub fn cycle_spec(&self, unit: &str) -> Result<CycleSpec<f64>, ScenarioError> {
        let u = self
            .unit(unit)
            .ok_or_else(|| ScenarioError::UnknownReference { what: "unit", id: unit.to_string(), by: "cycle_spec".into() })?;
        let mut apps = Vec::new();
        for flow in &self.flows {
            let path = self.route(flow)?;
            let Some((_, fu, _)) = self.cyclic_hop(&path) else { continue };
            if fu.id != u.id {
                continue;
            }
            let allocation = match &flow.scheme {
                SchemeBinding::Reserved => Allocation::Reserved { slot_bytes: flow.slot_bytes },
                SchemeBinding::Fixed { bytes } => Allocation::Fixed { allocation: *bytes },
                SchemeBinding::Shared { pool } => Allocation::Shared { pool: pool.clone() },
                SchemeBinding::Overwrite { target } => Allocation::Overwrite { target: target.clone() },
            };
            apps.push(CycleApp { id: flow.name.clone(), arrival: self.arrival_model(flow, u.cycle_time_ms), allocation });
        }
        let pools = self.pools.iter().filter(|p| p.unit == u.id).map(|p| (p.id.clone(), p.bytes)).collect();
        Ok(CycleSpec { cycle_time: u.cycle_time_ms, total_resources: u.resources_bytes, apps, pools })
    }

    /// Replaces the mean of every Poisson flow by `lambda` arrivals per cycle.
    pub fn with_poisson_rate(&self, lambda: f64) -> Result<Scenario, ScenarioError> {
        let mut out = self.clone();
        for i in 0..out.flows.len() {
            if !out.flows[i].is_poisson() {
                continue;
            }
            let path = self.route(&self.flows[i])?;
            let cycle = self.cyclic_hop(&path).map(|(_, u, _)| u.cycle_time_ms).unwrap_or(1.0);
            let size = out.flows[i].traffic.size();
            let mean_period_ms = if lambda > 0.0 { cycle / lambda } else { f64::INFINITY };
            out.flows[i].traffic = Traffic::Poisson { mean_period_ms, size };
        }
        Ok(out)
    }

    /// Splits every overwrite target into `frames` equal frames per message.
    pub fn with_target_frames(&self, frames: u32) -> Result<Scenario, ScenarioError> {
        let targets: HashSet<String> = self
            .flows
            .iter()
            .filter_map(|f| match &f.scheme {
                SchemeBinding::Overwrite { target } => Some(target.clone()),
                _ => None,
            })
            .collect();
        let mut out = self.clone();
        for f in out.flows.iter_mut().filter(|f| targets.contains(&f.name)) {
            let size = f.traffic.size();
            if frames == 0 || size % frames != 0 {
                return Err(invalid(&f.name, "frame_bytes", format!("size {size} does not split into {frames} frames")));
            }
            f.frame_bytes = size / frames;
        }
        out.validate()?;
        Ok(out)
    }

    /// Sets the frame loss probability of every link.
    pub fn with_link_loss(&self, loss: f64) -> Scenario {
        let mut out = self.clone();
        for l in &mut out.topology.links {
            l.loss = loss;
        }
        out
    }

    /// Checks references and every model invariant.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let unknown = |what: &'static str, id: &str, by: &str| ScenarioError::UnknownReference {
            what,
            id: id.to_string(),
            by: by.to_string(),
        };
        let mut ids = HashSet::new();
        for n in &self.topology.nodes {
            if !ids.insert(n.id.as_str()) {
                return Err(invalid(&n.id, "id", "duplicate node id"));
            }
        }
        for (what, list) in [
            ("link", self.topology.links.iter().map(|l| l.id.as_str()).collect::<Vec<_>>()),
            ("unit", self.units.iter().map(|u| u.id.as_str()).collect()),
            ("pool", self.pools.iter().map(|p| p.id.as_str()).collect()),
            ("flow", self.flows.iter().map(|f| f.name.as_str()).collect()),
        ] {
            let mut seen = HashSet::new();
            for id in list {
                if !seen.insert(id) {
                    return Err(invalid(id, "id", format!("duplicate {what} id")));
                }
            }
        }

        for u in &self.units {
            match self.topology.node(&u.master) {
                None => return Err(unknown("node", &u.master, &u.id)),
                Some(n) if n.kind != NodeKind::Master => {
                    return Err(invalid(&u.id, "master", format!("{} is not a master node", u.master)))
                }
                _ => {}
            }
            if !(u.cycle_time_ms > 0.0 && u.cycle_time_ms.is_finite()) {
                return Err(invalid(&u.id, "cycle_time_ms", "must be positive"));
            }
        }
        for p in &self.pools {
            if self.unit(&p.unit).is_none() {
                return Err(unknown("unit", &p.unit, &p.id));
            }
        }
        for l in &self.topology.links {
            for end in [&l.a, &l.b] {
                if self.topology.node(end).is_none() {
                    return Err(unknown("node", end, &l.id));
                }
            }
            if l.a == l.b {
                return Err(invalid(&l.id, "b", "link endpoints must differ"));
            }
            if !(0.0..=1.0).contains(&l.loss) {
                return Err(invalid(&l.id, "reliability", "must lie in [0, 1]"));
            }
            match &l.kind {
                LinkKind::Switched { rate_bps, .. } => {
                    if !(*rate_bps > 0.0 && rate_bps.is_finite()) {
                        return Err(invalid(&l.id, "rate_bps", "must be positive"));
                    }
                }
                LinkKind::Cyclic { unit } => {
                    let u = self.unit(unit).ok_or_else(|| unknown("unit", unit, &l.id))?;
                    let other = if l.a == u.master {
                        &l.b
                    } else if l.b == u.master {
                        &l.a
                    } else {
                        return Err(invalid(&l.id, "unit", format!("cyclic link does not touch master {}", u.master)));
                    };
                    if self.topology.node(other).map(|n| n.kind) != Some(NodeKind::Device) {
                        return Err(invalid(&l.id, "b", format!("{other} is not a device")));
                    }
                }
            }
        }
        self.check_connected()?;

        let mut used: HashMap<&str, u64> = HashMap::new();
        for f in &self.flows {
            self.validate_flow(f, &mut used)?;
        }
        for u in &self.units {
            let pools: u64 = self.pools.iter().filter(|p| p.unit == u.id).map(|p| p.bytes).sum();
            let need = used.get(u.id.as_str()).copied().unwrap_or(0) + pools;
            if need > u.resources_bytes {
                return Err(invalid(
                    &u.id,
                    "resources_bytes",
                    format!("allocations need {need} bytes per cycle but only {} are available", u.resources_bytes),
                ));
            }
        }
        Ok(())
    }

    fn check_connected(&self) -> Result<(), ScenarioError> {
        let Some(first) = self.topology.nodes.first() else { return Ok(()) };
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for l in &self.topology.links {
            adj.entry(&l.a).or_default().push(&l.b);
            adj.entry(&l.b).or_default().push(&l.a);
        }
        let mut seen = HashSet::from([first.id.as_str()]);
        let mut stack = vec![first.id.as_str()];
        while let Some(u) = stack.pop() {
            for v in adj.get(u).into_iter().flatten() {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        match self.topology.nodes.iter().find(|n| !seen.contains(n.id.as_str())) {
            Some(n) => Err(invalid(&n.id, "links", format!("node is not connected to {}", first.id))),
            None => Ok(()),
        }
    }

    fn validate_flow<'a>(&'a self, f: &'a FlowSpec, used: &mut HashMap<&'a str, u64>) -> Result<(), ScenarioError> {
        let name = f.name.as_str();
        for end in [&f.source, &f.destination] {
            if self.topology.node(end).is_none() {
                return Err(ScenarioError::UnknownReference { what: "node", id: end.clone(), by: f.name.clone() });
            }
        }
        if f.source == f.destination {
            return Err(invalid(name, "dst", "source and destination are the same node"));
        }
        let size = f.traffic.size();
        if size == 0 {
            return Err(invalid(name, "size", "must be positive"));
        }
        if !(f.traffic.period_ms() > 0.0) {
            return Err(invalid(name, "period_ms", "must be positive"));
        }
        if !(f.latency_req_ms >= 0.0) {
            return Err(invalid(name, "latency_ms", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&f.loss_budget) {
            return Err(invalid(name, "reliability", "must lie in [0, 1]"));
        }
        if f.frame_bytes == 0 || f.frame_bytes > size {
            return Err(invalid(name, "frame_bytes", format!("must lie in 1..={size}")));
        }
        if f.is_poisson() && f.frame_bytes != size {
            return Err(invalid(name, "frame_bytes", "Poisson messages are single frames"));
        }

        let path = self.route(f)?;
        let cyclic: Vec<usize> = path
            .iter()
            .enumerate()
            .filter(|(_, h)| self.topology.link(&h.link).is_some_and(Link::is_cyclic))
            .map(|(i, _)| i)
            .collect();
        if cyclic.len() > 1 {
            return Err(invalid(name, "route", "path crosses more than one cyclic link"));
        }
        let Some((idx, unit, pos)) = self.cyclic_hop(&path) else {
            if f.scheme != SchemeBinding::Reserved {
                return Err(invalid(name, "scheme", "slicing schemes apply only to flows with a cyclic hop"));
            }
            if f.is_poisson() {
                return Err(invalid(name, "traffic", "Poisson traffic needs a cyclic first hop to bound it"));
            }
            return Ok(());
        };
        if idx != 0 && idx + 1 != path.len() {
            return Err(invalid(name, "route", "cyclic link must be the first or the last hop"));
        }
        let cycle = unit.cycle_time_ms;
        if let Traffic::Periodic { period_ms, .. } = f.traffic {
            let k = period_ms / cycle;
            if (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() < 1.0 {
                return Err(invalid(name, "period_ms", format!("must be a multiple of the {cycle} ms cycle")));
            }
        }
        if pos == CyclicPosition::Last && f.scheme != SchemeBinding::Reserved {
            return Err(invalid(name, "scheme", "only reserved slots are supported on a last cyclic hop"));
        }
        let here = unit.id.as_str();
        match &f.scheme {
            SchemeBinding::Reserved => {
                if f.is_poisson() {
                    return Err(invalid(name, "scheme", "Poisson traffic needs a fixed, shared or overwrite scheme"));
                }
                if f.slot_bytes < f.frame_bytes as u64 {
                    return Err(invalid(name, "slot_bytes", format!("below frame size {}", f.frame_bytes)));
                }
                let per_slot = (f.slot_bytes / f.frame_bytes as u64) as u32;
                let cycles = f.frames_per_message().div_ceil(per_slot) as f64;
                if cycles * cycle > f.traffic.period_ms() * (1.0 + 1e-9) {
                    return Err(invalid(name, "slot_bytes", "slot too small to carry one message per period"));
                }
                *used.entry(here).or_default() += f.slot_bytes;
            }
            SchemeBinding::Fixed { bytes } => *used.entry(here).or_default() += bytes,
            SchemeBinding::Shared { pool } => {
                let p = self
                    .pools
                    .iter()
                    .find(|p| &p.id == pool)
                    .ok_or_else(|| ScenarioError::UnknownReference { what: "pool", id: pool.clone(), by: f.name.clone() })?;
                if p.unit != unit.id {
                    return Err(invalid(name, "scheme", format!("pool {pool} belongs to another unit")));
                }
            }
            SchemeBinding::Overwrite { target } => {
                let t = self
                    .flow(target)
                    .ok_or_else(|| ScenarioError::UnknownReference { what: "flow", id: target.clone(), by: f.name.clone() })?;
                let tpath = self.route(t)?;
                let same_unit = self.cyclic_hop(&tpath).is_some_and(|(_, tu, _)| tu.id == unit.id);
                let every_cycle = matches!(t.traffic, Traffic::Periodic { period_ms, .. } if (period_ms - cycle).abs() <= 1e-9 * cycle);
                if !same_unit || t.scheme != SchemeBinding::Reserved || !every_cycle {
                    return Err(invalid(
                        name,
                        "scheme",
                        format!("overwrite target {target} must be a reserved per-cycle flow of the same unit"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
