//! Reliability and utilization of slicing schemes inside a cyclic (master/slave)
//! factory unit.
//!
//! A cycle carries a fixed number of bytes. One deterministic application sends
//! `R_d` frames every cycle; stochastic applications send a random number of
//! frames per cycle. Three ways of giving stochastic traffic resources are modelled:
//!
//! * [`SliceScheme::Fixed`]: `N'_k` bytes reserved for one application,
//! * [`SliceScheme::SharedPool`]: `N'` bytes shared by several applications,
//! * [`SliceScheme::Overwrite`]: stochastic frames overwrite frames of the
//!   deterministic application (puncturing).
//!
//! Frames that find no resources are dropped in the same cycle. Under overwrite,
//! when the aggregate arrival `A` exceeds `R_d` exactly `R_d` deterministic frames
//! are overwritten and the remaining `A - R_d` stochastic frames are dropped.
//!
//! Failure probabilities are computed directly as tail sums rather than as
//! `1 - reliability`, which keeps them accurate in the 1e-9 regime.

use std::collections::{HashMap, HashSet};

use num_integer::Integer;
use thiserror::Error;

use crate::curves::TokenBucket;
use crate::scalar::Scalar;

/// Absolute bound on the probability mass discarded when truncating a Poisson pmf,
/// far enough below 1e-15 that tail probabilities of single-digit frame counts
/// keep their relative precision.
pub const POISSON_TAIL_TOLERANCE: f64 = 1e-40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CyclicError {
    #[error("invalid arrival model: {0}")]
    InvalidModel(String),
    #[error("invalid cycle specification: {0}")]
    InvalidSpec(String),
}

/// Distribution of the number of frames an application emits in one cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameCount<S> {
    Deterministic(u32),
    Poisson(S),
    /// `pmf[n]` is the probability of `n` frames.
    Pmf(Vec<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel<S> {
    pub count: FrameCount<S>,
    /// Bytes per frame.
    pub frame_size: u32,
}

impl<S: Scalar> ArrivalModel<S> {
    pub fn new(count: FrameCount<S>, frame_size: u32) -> Result<Self, CyclicError> {
        if frame_size == 0 {
            return Err(CyclicError::InvalidModel("frame size must be positive".into()));
        }
        match &count {
            FrameCount::Deterministic(_) => {}
            FrameCount::Poisson(mean) => {
                if *mean < S::zero() {
                    return Err(CyclicError::InvalidModel(format!("negative Poisson mean {mean}")));
                }
                if mean.to_f64_lossy() > 500.0 {
                    return Err(CyclicError::InvalidModel(format!("Poisson mean {mean} per cycle is too large")));
                }
            }
            FrameCount::Pmf(p) => {
                if p.is_empty() || p.iter().any(|x| *x < S::zero()) {
                    return Err(CyclicError::InvalidModel("pmf must be non-empty and non-negative".into()));
                }
                let total = p.iter().cloned().fold(S::zero(), |a, b| a + b);
                if (total.to_f64_lossy() - 1.0).abs() > 1e-12 {
                    return Err(CyclicError::InvalidModel(format!("pmf sums to {total}, not 1")));
                }
            }
        }
        Ok(Self { count, frame_size })
    }

    pub fn deterministic(frames: u32, frame_size: u32) -> Result<Self, CyclicError> {
        Self::new(FrameCount::Deterministic(frames), frame_size)
    }

    pub fn poisson(mean: S, frame_size: u32) -> Result<Self, CyclicError> {
        Self::new(FrameCount::Poisson(mean), frame_size)
    }

    pub fn pmf(probabilities: Vec<S>, frame_size: u32) -> Result<Self, CyclicError> {
        Self::new(FrameCount::Pmf(probabilities), frame_size)
    }

    /// Frame-count pmf; Poisson is truncated with discarded mass below
    /// [`POISSON_TAIL_TOLERANCE`].
    pub fn count_pmf(&self) -> Vec<S> {
        match &self.count {
            FrameCount::Deterministic(n) => {
                let mut p = vec![S::zero(); *n as usize + 1];
                p[*n as usize] = S::one();
                p
            }
            FrameCount::Poisson(mean) => poisson_pmf(mean),
            FrameCount::Pmf(p) => p.clone(),
        }
    }

    /// Expected frames per cycle, computed from the (truncated) pmf.
    pub fn mean_frames(&self) -> S {
        pmf_mean(&self.count_pmf())
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.count, FrameCount::Deterministic(_))
    }
}

/// Number of Poisson terms `0..=n` to keep so that the Chernoff bound on
/// `P(X > n)` is below [`POISSON_TAIL_TOLERANCE`].
pub fn poisson_truncation(mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let ln_tol = POISSON_TAIL_TOLERANCE.ln();
    let mut n = mean.floor() as usize;
    loop {
        let k = (n + 1) as f64;
        // P(X >= k) <= e^{-λ} (eλ/k)^k for k > λ
        if k > mean && -mean + k * (1.0 + mean.ln() - k.ln()) < ln_tol {
            return n;
        }
        n += 1;
    }
}

pub fn poisson_pmf<S: Scalar>(mean: &S) -> Vec<S> {
    let n = poisson_truncation(mean.to_f64_lossy());
    let mut out = Vec::with_capacity(n + 1);
    let mut term = (S::zero() - mean.clone()).exp();
    out.push(term.clone());
    for k in 1..=n {
        term = term * mean.clone() / S::from_u64_exact(k as u64);
        out.push(term.clone());
    }
    out
}

pub fn convolve_pmf<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

/// `Σ_{n > k} pmf[n]`.
pub fn tail_above<S: Scalar>(pmf: &[S], k: usize) -> S {
    pmf.iter().skip(k + 1).cloned().fold(S::zero(), |a, b| a + b)
}

pub fn pmf_mean<S: Scalar>(pmf: &[S]) -> S {
    pmf.iter()
        .enumerate()
        .fold(S::zero(), |acc, (n, p)| acc + p.clone() * S::from_u64_exact(n as u64))
}

/// `E[min(X, cap)]`.
pub fn expected_min<S: Scalar>(pmf: &[S], cap: usize) -> S {
    pmf.iter()
        .enumerate()
        .fold(S::zero(), |acc, (n, p)| acc + p.clone() * S::from_u64_exact(n.min(cap) as u64))
}

/// Pmf of the total frame count `Σ_k R_k` over independent applications.
pub fn aggregate_count_pmf<S: Scalar>(apps: &[ArrivalModel<S>]) -> Vec<S> {
    apps.iter()
        .fold(vec![S::one()], |acc, app| convolve_pmf(&acc, &app.count_pmf()))
}

fn frame_gcd<S>(apps: &[ArrivalModel<S>]) -> u64 {
    apps.iter().fold(0_u64, |g, a| g.gcd(&(a.frame_size as u64))).max(1)
}

/// Pmf of the aggregate byte count, indexed in units of `unit` bytes.
pub fn aggregate_byte_pmf<S: Scalar>(apps: &[ArrivalModel<S>]) -> (Vec<S>, u64) {
    let unit = frame_gcd(apps);
    let pmf = apps.iter().fold(vec![S::one()], |acc, app| {
        let step = (app.frame_size as u64 / unit) as usize;
        let counts = app.count_pmf();
        let mut bytes = vec![S::zero(); (counts.len() - 1) * step + 1];
        for (n, p) in counts.into_iter().enumerate() {
            bytes[n * step] = p;
        }
        convolve_pmf(&acc, &bytes)
    });
    (pmf, unit)
}

/// `Pr(R_k N_k > N'_k)`: probability that a cycle overflows a fixed allocation.
pub fn fixed_failure<S: Scalar>(app: &ArrivalModel<S>, allocation: u64) -> S {
    let fits = (allocation / app.frame_size as u64) as usize;
    tail_above(&app.count_pmf(), fits)
}

/// `Pr(R_k N_k <= N'_k)`.
pub fn fixed_reliability<S: Scalar>(app: &ArrivalModel<S>, allocation: u64) -> S {
    S::one() - fixed_failure(app, allocation)
}

/// Fraction of frames lost to shortage under a fixed allocation, `None` without arrivals.
pub fn fixed_frame_loss<S: Scalar>(app: &ArrivalModel<S>, allocation: u64) -> Option<S> {
    let pmf = app.count_pmf();
    let mean = pmf_mean(&pmf);
    if mean.is_zero() {
        return None;
    }
    let fits = (allocation / app.frame_size as u64) as usize;
    let lost = pmf
        .iter()
        .enumerate()
        .skip(fits + 1)
        .fold(S::zero(), |acc, (n, p)| acc + p.clone() * S::from_u64_exact((n - fits) as u64));
    Some(lost / mean)
}

/// `Pr(Σ_k R_k N_k > N')` for a shared pool of `pool` bytes.
pub fn shared_pool_failure<S: Scalar>(apps: &[ArrivalModel<S>], pool: u64) -> S {
    let (pmf, unit) = aggregate_byte_pmf(apps);
    tail_above(&pmf, (pool / unit) as usize)
}

/// `Pr(Σ_k R_k N_k <= N')`.
pub fn shared_pool_reliability<S: Scalar>(apps: &[ArrivalModel<S>], pool: u64) -> S {
    S::one() - shared_pool_failure(apps, pool)
}

/// Expected frames admitted per cycle for each application of a shared pool.
///
/// When the aggregate does not fit, frames are admitted first-fit in application
/// order; an application's frames stop at the first one that does not fit and
/// later applications may still use the remainder.
pub fn shared_pool_admitted<S: Scalar>(apps: &[ArrivalModel<S>], pool: u64) -> Vec<S> {
    let unit = frame_gcd(apps);
    let cap = (pool / unit) as usize;
    let mut used = vec![S::zero(); cap + 1];
    used[0] = S::one();
    let mut admitted = Vec::with_capacity(apps.len());
    for app in apps {
        let w = (app.frame_size as u64 / unit) as usize;
        let counts = app.count_pmf();
        let mut next = vec![S::zero(); cap + 1];
        let mut expected = S::zero();
        for (u, pu) in used.iter().enumerate() {
            if pu.is_zero() {
                continue;
            }
            let room = (cap - u) / w;
            for (n, pn) in counts.iter().enumerate() {
                if pn.is_zero() {
                    continue;
                }
                let k = n.min(room);
                let joint = pu.clone() * pn.clone();
                expected = expected + joint.clone() * S::from_u64_exact(k as u64);
                next[u + k * w] = next[u + k * w].clone() + joint;
            }
        }
        used = next;
        admitted.push(expected);
    }
    admitted
}

/// Per-frame probability that a deterministic frame is overwritten:
/// `E[min(A, R_d)] / R_d` with `A` the aggregate stochastic frame count.
pub fn overwrite_deterministic_failure<S: Scalar>(det_frames: u32, stochastic: &[ArrivalModel<S>]) -> S {
    if det_frames == 0 {
        return S::zero();
    }
    let pmf = aggregate_count_pmf(stochastic);
    expected_min(&pmf, det_frames as usize) / S::from_u64_exact(det_frames as u64)
}

/// Survival probability of one deterministic frame under overwriting.
pub fn overwrite_deterministic_reliability<S: Scalar>(det_frames: u32, stochastic: &[ArrivalModel<S>]) -> S {
    S::one() - overwrite_deterministic_failure(det_frames, stochastic)
}

/// `Pr(Σ_k R_k > R_d)`: the arriving batch finds too few overwritable frames.
pub fn overwrite_stochastic_failure<S: Scalar>(det_frames: u32, stochastic: &[ArrivalModel<S>]) -> S {
    tail_above(&aggregate_count_pmf(stochastic), det_frames as usize)
}

/// `Pr(Σ_k R_k <= R_d)`.
pub fn overwrite_stochastic_reliability<S: Scalar>(det_frames: u32, stochastic: &[ArrivalModel<S>]) -> S {
    S::one() - overwrite_stochastic_failure(det_frames, stochastic)
}

/// `E[min(A, R_d)] / E[A]`: expected fraction of stochastic frames delivered.
pub fn overwrite_delivered_fraction<S: Scalar>(det_frames: u32, stochastic: &[ArrivalModel<S>]) -> Option<S> {
    let pmf = aggregate_count_pmf(stochastic);
    let mean = pmf_mean(&pmf);
    if mean.is_zero() {
        return None;
    }
    Some(expected_min(&pmf, det_frames as usize) / mean)
}

/// How stochastic traffic obtains cycle resources.
#[derive(Debug, Clone, PartialEq)]
pub enum SliceScheme {
    /// Bytes reserved per cycle for each application.
    Fixed { allocation: u64 },
    /// Bytes per cycle shared by the member applications.
    SharedPool { pool: u64, members: Vec<String> },
    /// Overwrite frames of the named deterministic application.
    Overwrite { target: String },
}

/// Expected transmitted bytes over allocated bytes per cycle.
///
/// `Fixed` gives each application its own allocation; overwriting reuses
/// resources that carry deterministic traffic every cycle and is 1 by definition.
pub fn utilization<S: Scalar>(scheme: &SliceScheme, apps: &[ArrivalModel<S>]) -> S {
    match scheme {
        SliceScheme::Overwrite { .. } => S::one(),
        SliceScheme::Fixed { allocation } => {
            if apps.is_empty() || *allocation == 0 {
                return S::zero();
            }
            let sent = apps.iter().fold(S::zero(), |acc, app| {
                let fits = (*allocation / app.frame_size as u64) as usize;
                acc + expected_min(&app.count_pmf(), fits) * S::from_u64_exact(app.frame_size as u64)
            });
            sent / S::from_u64_exact(*allocation * apps.len() as u64)
        }
        SliceScheme::SharedPool { pool, .. } => {
            if *pool == 0 {
                return S::zero();
            }
            let sent = shared_pool_admitted(apps, *pool)
                .into_iter()
                .zip(apps)
                .fold(S::zero(), |acc, (k, app)| acc + k * S::from_u64_exact(app.frame_size as u64));
            sent / S::from_u64_exact(*pool)
        }
    }
}

/// Token-bucket bound on stochastic traffic leaving a unit when it can use at
/// most `frames` frames of `frame_size` bytes per cycle.
pub fn alarm_egress_bound<S: Scalar>(frames: u32, frame_size: u32, cycle_time: &S) -> TokenBucket<S> {
    let burst = S::from_u64_exact(frames as u64 * frame_size as u64);
    TokenBucket { rate: burst.clone() / cycle_time.clone(), burst }
}

/// How an application of a cycle obtains its resources.
#[derive(Debug, Clone, PartialEq)]
pub enum Allocation {
    /// Deterministic slot of `slot_bytes` per cycle.
    Reserved { slot_bytes: u64 },
    Fixed { allocation: u64 },
    /// Member of the named pool.
    Shared { pool: String },
    /// Overwrites the named reserved application.
    Overwrite { target: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleApp<S> {
    pub id: String,
    pub arrival: ArrivalModel<S>,
    pub allocation: Allocation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleSpec<S> {
    pub cycle_time: S,
    pub total_resources: u64,
    pub apps: Vec<CycleApp<S>>,
    /// `(pool id, bytes per cycle)`.
    pub pools: Vec<(String, u64)>,
}

/// Shortage outcome of one application of a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct AppOutcome<S> {
    pub id: String,
    /// Probability that the scheme fails in a cycle (overflow, or the batch not
    /// fitting the overwritable frames). Per-frame for overwritten deterministic apps.
    pub scheme_failure: S,
    /// Probability that a given frame of the application is lost to shortage.
    pub frame_loss: S,
    /// Frames that can leave the unit per cycle, when bounded by the scheme.
    pub egress_frames: Option<u32>,
}

impl<S: Scalar> CycleSpec<S> {
    pub fn reserved_bytes(&self) -> u64 {
        let apps: u64 = self
            .apps
            .iter()
            .map(|a| match a.allocation {
                Allocation::Reserved { slot_bytes } => slot_bytes,
                Allocation::Fixed { allocation } => allocation,
                _ => 0,
            })
            .sum();
        apps + self.pools.iter().map(|(_, b)| b).sum::<u64>()
    }

    fn app(&self, id: &str) -> Option<&CycleApp<S>> {
        self.apps.iter().find(|a| a.id == id)
    }

    pub fn validate(&self) -> Result<(), CyclicError> {
        let bad = |m: String| Err(CyclicError::InvalidSpec(m));
        if self.cycle_time <= S::zero() {
            return bad(format!("cycle_time must be positive, got {}", self.cycle_time));
        }
        let mut seen = HashSet::new();
        for app in &self.apps {
            if !seen.insert(app.id.as_str()) {
                return bad(format!("duplicate application id {}", app.id));
            }
        }
        let pools: HashMap<&str, u64> = self.pools.iter().map(|(id, b)| (id.as_str(), *b)).collect();
        for app in &self.apps {
            match &app.allocation {
                Allocation::Reserved { slot_bytes } => {
                    if *slot_bytes < app.arrival.frame_size as u64 {
                        return bad(format!("{}: slot_bytes {} below frame size {}", app.id, slot_bytes, app.arrival.frame_size));
                    }
                }
                Allocation::Fixed { .. } => {}
                Allocation::Shared { pool } => {
                    if !pools.contains_key(pool.as_str()) {
                        return bad(format!("{}: unknown pool {}", app.id, pool));
                    }
                }
                Allocation::Overwrite { target } => {
                    let Some(t) = self.app(target) else {
                        return bad(format!("{}: unknown overwrite target {}", app.id, target));
                    };
                    if !matches!(t.allocation, Allocation::Reserved { .. }) || !t.arrival.is_deterministic() {
                        return bad(format!("{}: overwrite target {} must be a reserved deterministic application", app.id, target));
                    }
                }
            }
        }
        if self.reserved_bytes() > self.total_resources {
            return bad(format!(
                "total_resources: allocations need {} bytes per cycle but only {} are available",
                self.reserved_bytes(),
                self.total_resources
            ));
        }
        Ok(())
    }

    fn members<'a>(&'a self, pred: impl Fn(&Allocation) -> bool + 'a) -> impl Iterator<Item = &'a CycleApp<S>> + 'a {
        self.apps.iter().filter(move |a| pred(&a.allocation))
    }

    /// Shortage outcome of every application, in declaration order.
    pub fn outcomes(&self) -> Result<Vec<AppOutcome<S>>, CyclicError> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.apps.len());
        for app in &self.apps {
            let outcome = match &app.allocation {
                Allocation::Reserved { .. } => {
                    let overwriters: Vec<_> = self
                        .members(|al| matches!(al, Allocation::Overwrite { target } if *target == app.id))
                        .map(|a| a.arrival.clone())
                        .collect();
                    let f = match app.arrival.count {
                        FrameCount::Deterministic(rd) => overwrite_deterministic_failure(rd, &overwriters),
                        _ => S::zero(),
                    };
                    AppOutcome { id: app.id.clone(), scheme_failure: f.clone(), frame_loss: f, egress_frames: None }
                }
                Allocation::Fixed { allocation } => AppOutcome {
                    id: app.id.clone(),
                    scheme_failure: fixed_failure(&app.arrival, *allocation),
                    frame_loss: fixed_frame_loss(&app.arrival, *allocation).unwrap_or_else(S::zero),
                    egress_frames: Some((*allocation / app.arrival.frame_size as u64) as u32),
                },
                Allocation::Shared { pool } => {
                    let bytes = self.pools.iter().find(|(id, _)| id == pool).map(|(_, b)| *b).unwrap_or(0);
                    let group: Vec<&CycleApp<S>> =
                        self.members(|al| matches!(al, Allocation::Shared { pool: p } if p == pool)).collect();
                    let arrivals: Vec<_> = group.iter().map(|a| a.arrival.clone()).collect();
                    let admitted = shared_pool_admitted(&arrivals, bytes);
                    let idx = group.iter().position(|a| a.id == app.id).expect("member of its own pool");
                    let mean = app.arrival.mean_frames();
                    let loss = if mean.is_zero() {
                        S::zero()
                    } else {
                        S::one() - admitted[idx].clone() / mean
                    };
                    AppOutcome {
                        id: app.id.clone(),
                        scheme_failure: shared_pool_failure(&arrivals, bytes),
                        frame_loss: loss,
                        egress_frames: Some((bytes / app.arrival.frame_size as u64) as u32),
                    }
                }
                Allocation::Overwrite { target } => {
                    let rd = match self.app(target).map(|t| &t.arrival.count) {
                        Some(FrameCount::Deterministic(rd)) => *rd,
                        _ => 0,
                    };
                    let group: Vec<_> = self
                        .members(|al| matches!(al, Allocation::Overwrite { target: t } if t == target))
                        .map(|a| a.arrival.clone())
                        .collect();
                    let delivered = overwrite_delivered_fraction(rd, &group).unwrap_or_else(S::one);
                    AppOutcome {
                        id: app.id.clone(),
                        scheme_failure: overwrite_stochastic_failure(rd, &group),
                        frame_loss: S::one() - delivered,
                        egress_frames: Some(rd),
                    }
                }
            };
            out.push(outcome);
        }
        Ok(out)
    }
}
