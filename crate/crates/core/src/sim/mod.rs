//! Stochastic validation of the analytic results.
//!
//! [`simulate_cycles`] replays the slicing schemes cycle by cycle and compares
//! shortage and delivery rates with the closed forms. [`simulate_queues`] is a
//! discrete-event model of the switched network (strict priority, FIFO within a
//! priority, store-and-forward) that checks observed delays against the bounds.
//!
//! Failure rates of 1e-6 to 1e-9 cannot be estimated by plain Monte Carlo in
//! reasonable time; validation runs at scaled-up alarm rates and link losses
//! where analytic and empirical values are comparable.

mod cycles;
mod queues;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use cycles::simulate_cycles;
pub use queues::simulate_queues;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    CyclicReliability,
    QueueLatency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficPattern {
    /// Every source emits the maximal pattern its arrival bound admits.
    Greedy,
    /// Random phases and Poisson alarm counts.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Cycles per unit for [`simulate_cycles`], frames to emit for [`simulate_queues`].
    pub count: u64,
    pub pattern: TrafficPattern,
    /// Frames per cycle admitted by overwrite schemes in the queue model.
    pub alarm_frames: Option<u32>,
    /// Splits every overwrite target into this many frames per message.
    pub control_frames: Option<u32>,
}

impl SimConfig {
    pub fn new(seed: u64, count: u64) -> Self {
        Self { seed, count, pattern: TrafficPattern::Greedy, alarm_frames: None, control_frames: None }
    }
}

/// Empirical failure rate of one flow and metric next to its analytic value.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub flow: String,
    pub metric: &'static str,
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    /// Standard error of `rate`.
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub analytic: f64,
}

impl Estimate {
    /// Deviation from the analytic value in standard errors.
    pub fn z(&self) -> f64 {
        let diff = self.rate - self.analytic;
        if diff == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            diff.abs() / self.std_error
        }
    }

    pub fn agrees(&self, sigmas: f64) -> bool {
        self.z() <= sigmas
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayStats {
    pub flow: String,
    pub frames: u64,
    pub max_delay_ms: f64,
    pub mean_delay_ms: f64,
    pub bound_ms: f64,
    pub violations: u64,
}

impl DelayStats {
    pub fn tightness(&self) -> f64 {
        self.max_delay_ms / self.bound_ms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub mode: SimMode,
    pub seed: u64,
    pub count: u64,
    pub estimates: Vec<Estimate>,
    pub delays: Vec<DelayStats>,
}

impl SimReport {
    pub fn violations(&self) -> u64 {
        self.delays.iter().map(|d| d.violations).sum()
    }

    pub fn frames(&self) -> u64 {
        self.delays.iter().map(|d| d.frames).sum()
    }

    /// Whether every estimate lies within `sigmas` standard errors of its analytic value.
    pub fn all_agree(&self, sigmas: f64) -> bool {
        self.estimates.iter().all(|e| e.agrees(sigmas))
    }
}

fn unit_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Ratio estimator `Σx / Σy` over i.i.d. batches (cycles) with delta-method
/// standard error, floored by the binomial error at the analytic rate.
#[derive(Debug, Clone, Default)]
struct RatioTally {
    n: u64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl RatioTally {
    fn add(&mut self, failures: u64, trials: u64) {
        let (x, y) = (failures as f64, trials as f64);
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn estimate(&self, flow: &str, metric: &'static str, analytic: f64) -> Estimate {
        let trials = self.sy as u64;
        let failures = self.sx as u64;
        let rate = if self.sy > 0.0 { self.sx / self.sy } else { 0.0 };
        let n = self.n.max(1) as f64;
        let p = analytic;
        let mean_d = (self.sx - p * self.sy) / n;
        let second = (self.sxx - 2.0 * p * self.sxy + p * p * self.syy) / n;
        let ybar = self.sy / n;
        let delta = if ybar > 0.0 { ((second - mean_d * mean_d).max(0.0) / n).sqrt() / ybar } else { 0.0 };
        let binomial = if self.sy > 0.0 { (p * (1.0 - p) / self.sy).sqrt() } else { 0.0 };
        let se = delta.max(binomial);
        Estimate {
            flow: flow.to_string(),
            metric,
            trials,
            failures,
            rate,
            std_error: se,
            ci_low: (rate - 1.96 * se).max(0.0),
            ci_high: (rate + 1.96 * se).min(1.0),
            analytic,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_tally_binomial_case() {
        let mut t = RatioTally::default();
        for i in 0..10_000 {
            t.add(u64::from(i % 10 == 0), 1);
        }
        let e = t.estimate("f", "m", 0.1);
        assert!((e.rate - 0.1).abs() < 1e-12);
        assert!((e.std_error - (0.09_f64 / 10_000.0).sqrt()).abs() < 1e-6);
        assert!(e.agrees(4.0));
        let off = t.estimate("f", "m", 0.2);
        assert!(!off.agrees(4.0));
    }

    #[test]
    fn zero_rate_only_agrees_with_zero() {
        let mut t = RatioTally::default();
        t.add(0, 5);
        assert!(t.estimate("f", "m", 0.0).agrees(4.0));
        let mut t = RatioTally::default();
        t.add(1, 5);
        assert!(!t.estimate("f", "m", 0.0).agrees(4.0));
    }
}

#[cfg(test)]
mod sim_tests;
