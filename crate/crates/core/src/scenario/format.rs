//! Line-oriented scenario text format. See `docs/scenario-format.md` for the grammar.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Scenario,
    Nodes,
    Units,
    Links,
    Pools,
    Flows,
    Sweep,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax { line, column, message: message.into() }
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Token { text: &line[s..i], column: line[..s].chars().count() + 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: line[..s].chars().count() + 1 });
    }
    out
}

/// `key=value` pairs of one entry, with the column of each value.
struct Entry<'a> {
    line: usize,
    id: Option<Token<'a>>,
    fields: HashMap<&'a str, (&'a str, usize)>,
}

impl<'a> Entry<'a> {
    fn parse(line: usize, toks: Vec<Token<'a>>, with_id: bool, allowed: &[&str]) -> Result<Self, ScenarioError> {
        let mut it = toks.into_iter();
        let id = if with_id {
            let t = it.next().expect("caller skips blank lines");
            if t.text.contains('=') {
                return Err(syntax(line, t.column, format!("expected an id before `{}`", t.text)));
            }
            Some(t)
        } else {
            None
        };
        let mut fields = HashMap::new();
        for t in it {
            let Some((k, v)) = t.text.split_once('=') else {
                return Err(syntax(line, t.column, format!("expected key=value, found `{}`", t.text)));
            };
            if !allowed.contains(&k) {
                return Err(syntax(line, t.column, format!("unknown key `{k}`")));
            }
            if v.is_empty() {
                return Err(syntax(line, t.column + k.len() + 1, format!("empty value for `{k}`")));
            }
            if fields.insert(k, (v, t.column + k.chars().count() + 1)).is_some() {
                return Err(syntax(line, t.column, format!("duplicate key `{k}`")));
            }
        }
        Ok(Self { line, id, fields })
    }

    fn id(&self) -> String {
        self.id.as_ref().map(|t| t.text.to_string()).unwrap_or_default()
    }

    fn opt(&self, key: &str) -> Option<(&'a str, usize)> {
        self.fields.get(key).copied()
    }

    fn req(&self, key: &str) -> Result<(&'a str, usize), ScenarioError> {
        self.opt(key)
            .ok_or_else(|| syntax(self.line, 1, format!("missing `{key}` for {}", self.id())))
    }

    fn string(&self, key: &str) -> Result<String, ScenarioError> {
        Ok(self.req(key)?.0.to_string())
    }

    fn num<T: std::str::FromStr>(&self, (v, col): (&str, usize), what: &str) -> Result<T, ScenarioError> {
        v.parse().map_err(|_| syntax(self.line, col, format!("`{v}` is not a valid {what}")))
    }

    fn real(&self, key: &str) -> Result<f64, ScenarioError> {
        let f: f64 = self.num(self.req(key)?, "number")?;
        if f.is_nan() {
            return Err(syntax(self.line, self.req(key)?.1, "NaN is not allowed"));
        }
        Ok(f)
    }

    fn bytes(&self, key: &str) -> Result<u64, ScenarioError> {
        self.num(self.req(key)?, "byte count")
    }

    fn opt_bytes(&self, key: &str) -> Result<Option<u64>, ScenarioError> {
        self.opt(key).map(|v| self.num(v, "byte count")).transpose()
    }

    fn size(&self, key: &str) -> Result<u32, ScenarioError> {
        self.num(self.req(key)?, "byte count")
    }

    /// `1-x` (loss `x`) or a plain probability.
    fn loss(&self, key: &str) -> Result<f64, ScenarioError> {
        let (v, col) = self.req(key)?;
        let parsed = match v.strip_prefix("1-") {
            Some(rest) => rest.parse::<f64>().ok(),
            None => v.parse::<f64>().ok().map(|p| 1.0 - p),
        };
        match parsed {
            Some(x) if (0.0..=1.0).contains(&x) => Ok(x),
            _ => Err(syntax(self.line, col, format!("`{v}` is not a probability"))),
        }
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<T, ScenarioError> {
        let (v, col) = self.req(key)?;
        options.iter().find(|(k, _)| *k == v).map(|(_, t)| *t).ok_or_else(|| {
            let names: Vec<_> = options.iter().map(|(k, _)| *k).collect();
            syntax(self.line, col, format!("`{v}` is not one of {}", names.join(", ")))
        })
    }
}

fn expand(line: &str, replicas: u32) -> Vec<String> {
    if line.contains("{u}") {
        (1..=replicas).map(|u| line.replace("{u}", &u.to_string())).collect()
    } else {
        vec![line.to_string()]
    }
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    let mut section: Option<Section> = None;
    let mut replicas: u32 = 1;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = tokens(content);
        let Some(first) = toks.first() else { continue };
        if first.text.starts_with('[') {
            let name = content.trim();
            section = Some(match name {
                "[scenario]" => Section::Scenario,
                "[nodes]" => Section::Nodes,
                "[units]" => Section::Units,
                "[links]" => Section::Links,
                "[pools]" => Section::Pools,
                "[flows]" => Section::Flows,
                "[sweep]" => Section::Sweep,
                _ => return Err(syntax(line_no, first.column, format!("unknown section `{name}`"))),
            });
            continue;
        }
        let Some(sec) = section else {
            return Err(syntax(line_no, first.column, "entry before the first section header"));
        };
        match sec {
            Section::Scenario => {
                let e = Entry::parse(line_no, toks, false, &["name", "replicas"])?;
                if let Some(v) = e.opt("name") {
                    sc.name = v.0.to_string();
                }
                if let Some(v) = e.opt("replicas") {
                    replicas = e.num(v, "replica count")?;
                    if replicas == 0 {
                        return Err(syntax(line_no, v.1, "replicas must be at least 1"));
                    }
                }
            }
            Section::Sweep => {
                let e = Entry::parse(line_no, toks, false, &["control", "alarm", "patient"])?;
                for (key, list) in [("control", &mut sc.sweep.control), ("alarm", &mut sc.sweep.alarm), ("patient", &mut sc.sweep.patient)] {
                    if let Some((v, _)) = e.opt(key) {
                        for item in v.split(',').filter(|s| !s.is_empty()) {
                            list.extend(expand(item, replicas));
                        }
                    }
                }
            }
            _ => {
                for expanded in expand(content, replicas) {
                    let toks = tokens(&expanded);
                    parse_entry(&mut sc, sec, line_no, toks)?;
                }
            }
        }
    }
    sc.validate()?;
    Ok(sc)
}

fn parse_entry(sc: &mut Scenario, sec: Section, line: usize, toks: Vec<Token<'_>>) -> Result<(), ScenarioError> {
    match sec {
        Section::Nodes => {
            let e = Entry::parse(line, toks, true, &["kind"])?;
            let kind = e.choice(
                "kind",
                &[
                    ("device", NodeKind::Device),
                    ("master", NodeKind::Master),
                    ("switch", NodeKind::Switch),
                    ("cloud", NodeKind::Cloud),
                ],
            )?;
            sc.topology.nodes.push(Node { id: e.id(), kind });
        }
        Section::Units => {
            let e = Entry::parse(line, toks, true, &["master", "cycle_time_ms", "resources_bytes"])?;
            sc.units.push(Unit {
                id: e.id(),
                master: e.string("master")?,
                cycle_time_ms: e.real("cycle_time_ms")?,
                resources_bytes: e.bytes("resources_bytes")?,
            });
        }
        Section::Links => {
            let e = Entry::parse(line, toks, true, &["a", "b", "kind", "unit", "rate_bps", "reliability", "preemptive"])?;
            let cyclic = e.choice("kind", &[("cyclic", true), ("switched", false)])?;
            let kind = if cyclic {
                LinkKind::Cyclic { unit: e.string("unit")? }
            } else {
                let preemptive = match e.opt("preemptive") {
                    None => false,
                    Some(_) => e.choice("preemptive", &[("true", true), ("false", false)])?,
                };
                LinkKind::Switched { rate_bps: e.real("rate_bps")?, preemptive }
            };
            let misplaced = if cyclic { ["rate_bps", "preemptive"] } else { ["unit", "unit"] };
            for k in misplaced {
                if let Some((_, col)) = e.opt(k) {
                    return Err(syntax(line, col, format!("`{k}` does not apply to this link kind")));
                }
            }
            sc.topology.links.push(Link { id: e.id(), a: e.string("a")?, b: e.string("b")?, loss: e.loss("reliability")?, kind });
        }
        Section::Pools => {
            let e = Entry::parse(line, toks, true, &["unit", "bytes"])?;
            sc.pools.push(Pool { id: e.id(), unit: e.string("unit")?, bytes: e.bytes("bytes")? });
        }
        Section::Flows => {
            let e = Entry::parse(
                line,
                toks,
                true,
                &[
                    "src",
                    "dst",
                    "traffic",
                    "period_ms",
                    "size",
                    "priority",
                    "latency_ms",
                    "reliability",
                    "frame_bytes",
                    "slot_bytes",
                    "scheme",
                ],
            )?;
            let size = e.size("size")?;
            let period = e.real("period_ms")?;
            let traffic = if e.choice("traffic", &[("periodic", true), ("poisson", false)])? {
                Traffic::Periodic { period_ms: period, size }
            } else {
                Traffic::Poisson { mean_period_ms: period, size }
            };
            let scheme = match e.opt("scheme") {
                None => SchemeBinding::Reserved,
                Some((v, col)) => {
                    let (kind, arg) = v.split_once(':').unwrap_or((v, ""));
                    match (kind, arg) {
                        ("reserved", "") => SchemeBinding::Reserved,
                        ("fixed", n) => SchemeBinding::Fixed {
                            bytes: n.parse().map_err(|_| syntax(line, col, format!("`{n}` is not a byte count")))?,
                        },
                        ("shared", p) if !p.is_empty() => SchemeBinding::Shared { pool: p.to_string() },
                        ("overwrite", t) if !t.is_empty() => SchemeBinding::Overwrite { target: t.to_string() },
                        _ => return Err(syntax(line, col, format!("unknown scheme `{v}`"))),
                    }
                }
            };
            let frame_bytes = match e.opt("frame_bytes") {
                Some(v) => e.num(v, "byte count")?,
                None => size,
            };
            sc.flows.push(FlowSpec {
                name: e.id(),
                source: e.string("src")?,
                destination: e.string("dst")?,
                traffic,
                priority: e.choice("priority", &[("high", Priority::High), ("low", Priority::Low)])?,
                latency_req_ms: e.real("latency_ms")?,
                loss_budget: e.loss("reliability")?,
                frame_bytes,
                slot_bytes: e.opt_bytes("slot_bytes")?.unwrap_or(size as u64),
                scheme,
            });
        }
        Section::Scenario | Section::Sweep => unreachable!("handled by the caller"),
    }
    Ok(())
}

/// Writes a scenario in canonical form: no templates, every field explicit.
pub fn write_scenario(sc: &Scenario) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[scenario]");
    if !sc.name.is_empty() {
        let _ = writeln!(s, "name={}", sc.name);
    }
    let _ = writeln!(s, "\n[nodes]");
    for n in &sc.topology.nodes {
        let _ = writeln!(s, "{} kind={}", n.id, n.kind.as_str());
    }
    let _ = writeln!(s, "\n[units]");
    for u in &sc.units {
        let _ = writeln!(
            s,
            "{} master={} cycle_time_ms={} resources_bytes={}",
            u.id, u.master, u.cycle_time_ms, u.resources_bytes
        );
    }
    let _ = writeln!(s, "\n[links]");
    for l in &sc.topology.links {
        let _ = write!(s, "{} a={} b={} ", l.id, l.a, l.b);
        match &l.kind {
            LinkKind::Cyclic { unit } => {
                let _ = write!(s, "kind=cyclic unit={unit}");
            }
            LinkKind::Switched { rate_bps, preemptive } => {
                let _ = write!(s, "kind=switched rate_bps={rate_bps} preemptive={preemptive}");
            }
        }
        let _ = writeln!(s, " reliability=1-{:e}", l.loss);
    }
    let _ = writeln!(s, "\n[pools]");
    for p in &sc.pools {
        let _ = writeln!(s, "{} unit={} bytes={}", p.id, p.unit, p.bytes);
    }
    let _ = writeln!(s, "\n[flows]");
    for f in &sc.flows {
        let (kind, period) = match f.traffic {
            Traffic::Periodic { period_ms, .. } => ("periodic", period_ms),
            Traffic::Poisson { mean_period_ms, .. } => ("poisson", mean_period_ms),
        };
        let scheme = match &f.scheme {
            SchemeBinding::Reserved => "reserved".to_string(),
            SchemeBinding::Fixed { bytes } => format!("fixed:{bytes}"),
            SchemeBinding::Shared { pool } => format!("shared:{pool}"),
            SchemeBinding::Overwrite { target } => format!("overwrite:{target}"),
        };
        let priority = match f.priority {
            Priority::High => "high",
            Priority::Low => "low",
        };
        let _ = writeln!(
            s,
            "{} src={} dst={} traffic={kind} period_ms={period} size={} priority={priority} latency_ms={} reliability=1-{:e} frame_bytes={} slot_bytes={} scheme={scheme}",
            f.name,
            f.source,
            f.destination,
            f.traffic.size(),
            f.latency_req_ms,
            f.loss_budget,
            f.frame_bytes,
            f.slot_bytes,
        );
    }
    let sw = &sc.sweep;
    if !(sw.control.is_empty() && sw.alarm.is_empty() && sw.patient.is_empty()) {
        let _ = writeln!(s, "\n[sweep]");
        for (key, list) in [("control", &sw.control), ("alarm", &sw.alarm), ("patient", &sw.patient)] {
            if !list.is_empty() {
                let _ = writeln!(s, "{key}={}", list.join(","));
            }
        }
    }
    s
}
