//! Cycle-level Monte Carlo of the slicing schemes with per-link Bernoulli loss.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{unit_rng, RatioTally, SimConfig, SimMode, SimReport};
use crate::cyclic::Allocation;
use crate::e2e::{path_failure, E2eError};
use crate::scenario::Scenario;

/// Inverse-CDF sampler over a (truncated) count pmf.
struct CountSampler {
    cdf: Vec<f64>,
}

impl CountSampler {
    fn new(pmf: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1) as u32
    }
}

/// Bernoulli loss process of one link, drawn as geometric gaps between losses.
struct LossProcess {
    p: f64,
    until_loss: u64,
}

impl LossProcess {
    fn new(p: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut l = Self { p, until_loss: 0 };
        l.redraw(rng);
        l
    }

    fn redraw(&mut self, rng: &mut ChaCha8Rng) {
        self.until_loss = if self.p <= 0.0 {
            u64::MAX
        } else if self.p >= 1.0 {
            0
        } else {
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / (-self.p).ln_1p()).floor().min(u64::MAX as f64) as u64
        };
    }

    /// Whether the next traversal is lost.
    fn lost(&mut self, rng: &mut ChaCha8Rng) -> bool {
        if self.until_loss == 0 {
            self.redraw(rng);
            true
        } else {
            self.until_loss -= 1;
            false
        }
    }
}

#[derive(Clone, Copy)]
enum Rule {
    Reserved,
    Fixed { frames: u32 },
    Shared,
    Overwrite,
}

struct App {
    flow: String,
    sampler: CountSampler,
    rule: Rule,
    frame_size: u32,
    links: Vec<usize>,
    cycle_failure: Option<f64>,
    frame_loss: f64,
    delivery: f64,
    cycle: RatioTally,
    shortage: RatioTally,
    e2e: RatioTally,
}

struct OverwriteGroup {
    target: usize,
    capacity: u32,
    members: Vec<usize>,
}

struct SharedGroup {
    id: String,
    pool: u64,
    members: Vec<usize>,
}

struct UnitSim {
    apps: Vec<App>,
    overwrite: Vec<OverwriteGroup>,
    shared: Vec<SharedGroup>,
    links: Vec<LossProcess>,
}

fn build_unit(sc: &Scenario, unit: &str, rng: &mut ChaCha8Rng) -> Result<UnitSim, E2eError> {
    let spec = sc.cycle_spec(unit)?;
    let outcomes = spec.outcomes()?;
    let mut link_index: HashMap<String, usize> = HashMap::new();
    let mut links = Vec::new();
    let mut apps = Vec::new();
    let mut overwrite: Vec<OverwriteGroup> = Vec::new();
    let mut shared: Vec<SharedGroup> = Vec::new();
    for (app, outcome) in spec.apps.iter().zip(&outcomes) {
        let flow = sc.flow(&app.id).expect("cycle apps are flows");
        let path = sc.route(flow)?;
        let mut losses = Vec::new();
        let idx: Vec<usize> = path
            .iter()
            .map(|h| {
                let loss = sc.topology.link(&h.link).map_or(1.0, |l| l.loss);
                losses.push(loss);
                *link_index.entry(h.link.clone()).or_insert_with(|| {
                    links.push(LossProcess::new(loss, rng));
                    links.len() - 1
                })
            })
            .collect();
        let me = apps.len();
        let rule = match &app.allocation {
            Allocation::Reserved { .. } => Rule::Reserved,
            Allocation::Fixed { allocation } => Rule::Fixed { frames: (allocation / app.arrival.frame_size as u64) as u32 },
            Allocation::Shared { pool } => {
                let bytes = spec.pools.iter().find(|(id, _)| id == pool).map_or(0, |p| p.1);
                let g = match shared.iter().position(|g| &g.id == pool) {
                    Some(g) => g,
                    None => {
                        shared.push(SharedGroup { id: pool.clone(), pool: bytes, members: Vec::new() });
                        shared.len() - 1
                    }
                };
                shared[g].members.push(me);
                Rule::Shared
            }
            Allocation::Overwrite { target } => {
                let t = spec.apps.iter().position(|a| &a.id == target).expect("validated target");
                let capacity = spec.apps[t].arrival.count_pmf().len() as u32 - 1;
                let g = match overwrite.iter().position(|g| g.target == t) {
                    Some(g) => g,
                    None => {
                        overwrite.push(OverwriteGroup { target: t, capacity, members: Vec::new() });
                        overwrite.len() - 1
                    }
                };
                overwrite[g].members.push(me);
                Rule::Overwrite
            }
        };
        let cycle_failure = match rule {
            Rule::Reserved => None,
            _ => Some(outcome.scheme_failure),
        };
        apps.push(App {
            flow: app.id.clone(),
            sampler: CountSampler::new(&app.arrival.count_pmf()),
            rule,
            frame_size: app.arrival.frame_size,
            links: idx,
            cycle_failure,
            frame_loss: outcome.frame_loss,
            delivery: path_failure(outcome.frame_loss, &losses),
            cycle: RatioTally::default(),
            shortage: RatioTally::default(),
            e2e: RatioTally::default(),
        });
    }
    Ok(UnitSim { apps, overwrite, shared, links })
}

impl UnitSim {
    fn run_cycle(&mut self, rng: &mut ChaCha8Rng, counts: &mut Vec<u32>, sent: &mut Vec<u32>, failed: &mut Vec<bool>) {
        counts.clear();
        counts.extend(self.apps.iter().map(|a| a.sampler.sample(rng)));
        sent.clear();
        sent.extend_from_slice(counts);
        failed.clear();
        failed.resize(self.apps.len(), false);

        for (i, app) in self.apps.iter().enumerate() {
            if let Rule::Fixed { frames } = app.rule {
                sent[i] = counts[i].min(frames);
                failed[i] = counts[i] > frames;
            }
        }
        for g in &self.shared {
            let total: u64 = g.members.iter().map(|&m| counts[m] as u64 * self.apps[m].frame_size as u64).sum();
            let mut room = g.pool;
            for &m in &g.members {
                let size = self.apps[m].frame_size as u64;
                let k = (counts[m] as u64).min(room / size);
                room -= k * size;
                sent[m] = k as u32;
                failed[m] = total > g.pool;
            }
        }
        for g in &self.overwrite {
            let arrived: u32 = g.members.iter().map(|&m| counts[m]).sum();
            let over = arrived.min(g.capacity);
            sent[g.target] = counts[g.target] - over.min(counts[g.target]);
            let mut dropped = arrived - over;
            // drop a uniformly random subset of the stochastic frames
            let mut left: Vec<u32> = g.members.iter().map(|&m| counts[m]).collect();
            let mut remaining = arrived;
            while dropped > 0 {
                let mut pick = rng.random_range(0..remaining);
                let j = left
                    .iter()
                    .position(|&c| {
                        if pick < c {
                            true
                        } else {
                            pick -= c;
                            false
                        }
                    })
                    .expect("pick within total");
                left[j] -= 1;
                remaining -= 1;
                dropped -= 1;
            }
            for (k, &m) in g.members.iter().enumerate() {
                sent[m] = left[k];
                failed[m] = arrived > g.capacity;
            }
        }

        for (i, app) in self.apps.iter_mut().enumerate() {
            let mut lost = 0;
            for _ in 0..sent[i] {
                for &l in &app.links {
                    if self.links[l].lost(rng) {
                        lost += 1;
                        break;
                    }
                }
            }
            let short = (counts[i] - sent[i]) as u64;
            app.cycle.add(failed[i] as u64, 1);
            app.shortage.add(short, counts[i] as u64);
            app.e2e.add(short + lost, counts[i] as u64);
        }
    }
}

/// Monte Carlo over `config.count` cycles of every unit. Each unit uses its own
/// random stream, so results do not depend on the number of units simulated before it.
pub fn simulate_cycles(sc: &Scenario, config: &SimConfig) -> Result<SimReport, E2eError> {
    let sc = match config.control_frames {
        Some(k) => sc.with_target_frames(k)?,
        None => sc.clone(),
    };
    let mut estimates = Vec::new();
    let (mut counts, mut sent, mut failed) = (Vec::new(), Vec::new(), Vec::new());
    for (u_idx, unit) in sc.units.iter().enumerate() {
        let mut rng = unit_rng(config.seed, u_idx as u64);
        let mut sim = build_unit(&sc, &unit.id, &mut rng)?;
        for _ in 0..config.count {
            sim.run_cycle(&mut rng, &mut counts, &mut sent, &mut failed);
        }
        for app in &sim.apps {
            if let Some(p) = app.cycle_failure {
                estimates.push(app.cycle.estimate(&app.flow, "cycle_failure", p));
            }
            estimates.push(app.shortage.estimate(&app.flow, "frame_loss", app.frame_loss));
            estimates.push(app.e2e.estimate(&app.flow, "delivery_failure", app.delivery));
        }
    }
    Ok(SimReport { mode: SimMode::CyclicReliability, seed: config.seed, count: config.count, estimates, delays: Vec::new() })
}
