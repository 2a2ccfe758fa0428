//! Min-plus network calculus over piecewise-affine curves.
//!
//! Arrival and service curves are both represented as [`PiecewiseAffineCurve`]:
//! a non-negative, non-decreasing, continuous function on `t >= 0` made of
//! finitely many affine segments, the last one extending to infinity. Time is in
//! milliseconds and data in bytes.
//!
//! The common shapes get dedicated types with closed-form operators:
//! [`TokenBucket`] (`r t + b`) for arrivals and [`RateLatency`] (`R [t - T]₊`)
//! for servers. The general operators in [`minplus`] work on arbitrary curves and
//! [`grid`] holds a brute-force evaluator used as an independent check.

pub mod grid;
pub mod minplus;

use std::fmt;

use thiserror::Error;

use crate::scalar::{clamp0, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("curve evaluated at negative time {0}")]
    NegativeTime(f64),
    #[error("invalid curve: {0}")]
    Invalid(String),
    #[error("unbounded delay: arrival rate {arrival_rate} exceeds service rate {service_rate}")]
    Unstable { arrival_rate: f64, service_rate: f64 },
    #[error("no leftover service: high-priority rate {hp_rate} is not below service rate {service_rate}")]
    NoLeftover { hp_rate: f64, service_rate: f64 },
}

/// One affine piece, valid from `start` up to the next segment's start.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<S> {
    pub start: S,
    pub value: S,
    pub slope: S,
}

impl<S: Scalar> Segment<S> {
    pub fn new(start: S, value: S, slope: S) -> Self {
        Self { start, value, slope }
    }

    fn eval(&self, t: &S) -> S {
        self.value.clone() + self.slope.clone() * (t.clone() - self.start.clone())
    }
}

/// Non-decreasing cumulative-bytes bound on `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineCurve<S> {
    segments: Vec<Segment<S>>,
}

impl<S: Scalar> PiecewiseAffineCurve<S> {
    /// Builds a curve, checking every invariant.
    pub fn new(segments: Vec<Segment<S>>) -> Result<Self, CurveError> {
        let first = segments
            .first()
            .ok_or_else(|| CurveError::Invalid("curve has no segments".into()))?;
        if !first.start.is_zero() {
            return Err(CurveError::Invalid(format!(
                "first segment starts at {} instead of 0",
                first.start
            )));
        }
        for (i, seg) in segments.iter().enumerate() {
            if seg.slope < S::zero() {
                return Err(CurveError::Invalid(format!("segment {i} has negative slope {}", seg.slope)));
            }
            if seg.value < S::zero() {
                return Err(CurveError::Invalid(format!("segment {i} has negative value {}", seg.value)));
            }
        }
        for (i, pair) in segments.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.start <= prev.start {
                return Err(CurveError::Invalid(format!(
                    "segment {} does not start after segment {i}",
                    i + 1
                )));
            }
            let reached = prev.eval(&next.start);
            if !reached.approx_eq(&next.value) {
                return Err(CurveError::Invalid(format!(
                    "discontinuity at t={}: {} vs {}",
                    next.start, reached, next.value
                )));
            }
        }
        Ok(Self { segments })
    }

    /// Builds a curve from `(start, value, slope)` triples.
    pub fn from_triples(triples: &[(S, S, S)]) -> Result<Self, CurveError> {
        Self::new(
            triples
                .iter()
                .map(|(a, v, s)| Segment::new(a.clone(), v.clone(), s.clone()))
                .collect(),
        )
    }

    /// The constant zero function, absorbing for min-plus convolution.
    pub fn zero() -> Self {
        Self { segments: vec![Segment::new(S::zero(), S::zero(), S::zero())] }
    }

    /// `rate * t + offset` on `t >= 0`.
    pub fn affine(rate: S, offset: S) -> Result<Self, CurveError> {
        Self::new(vec![Segment::new(S::zero(), offset, rate)])
    }

    pub(crate) fn from_segments_unchecked(segments: Vec<Segment<S>>) -> Self {
        debug_assert!(!segments.is_empty());
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment<S>] {
        &self.segments
    }

    /// Segment start times, including `0`.
    pub fn breakpoints(&self) -> impl Iterator<Item = &S> {
        self.segments.iter().map(|s| &s.start)
    }

    pub fn tail_slope(&self) -> &S {
        &self.segments.last().expect("non-empty").slope
    }

    fn segment_at(&self, t: &S) -> &Segment<S> {
        let idx = self.segments.partition_point(|s| s.start <= *t);
        &self.segments[idx.saturating_sub(1)]
    }

    /// Exact value at `t >= 0`.
    pub fn value(&self, t: &S) -> Result<S, CurveError> {
        if *t < S::zero() {
            return Err(CurveError::NegativeTime(t.to_f64_lossy()));
        }
        Ok(self.segment_at(t).eval(t))
    }

    /// Value at `t`, with negative times mapped to zero (the `[·]₊` convention).
    pub fn value_clamped(&self, t: &S) -> S {
        if *t < S::zero() {
            S::zero()
        } else {
            self.segment_at(t).eval(t)
        }
    }

    /// `(f ⊗ g)(t) = inf_{0<=s<=t} f(s) + g(t-s)`.
    pub fn convolve(&self, other: &Self) -> Self {
        minplus::convolve(self, other)
    }

    /// Maximum horizontal distance from `self` (arrival) to `service`; `None` if unbounded.
    pub fn horizontal_deviation(&self, service: &Self) -> Option<S> {
        minplus::horizontal_deviation(self, service)
    }

    /// Maximum vertical distance from `self` (arrival) to `service`; `None` if unbounded.
    pub fn vertical_deviation(&self, service: &Self) -> Option<S> {
        minplus::vertical_deviation(self, service)
    }

    /// Lossy copy in `f64`, for oracles and output.
    pub fn to_f64(&self) -> PiecewiseAffineCurve<f64> {
        PiecewiseAffineCurve {
            segments: self
                .segments
                .iter()
                .map(|s| Segment::new(s.start.to_f64_lossy(), s.value.to_f64_lossy(), s.slope.to_f64_lossy()))
                .collect(),
        }
    }
}

impl<S: Scalar> fmt::Display for PiecewiseAffineCurve<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .segments
            .iter()
            .map(|s| format!("[{}: {} + {}·dt]", s.start, s.value, s.slope))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Affine arrival bound `r t + b` (bytes/ms, bytes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenBucket<S> {
    pub rate: S,
    pub burst: S,
}

impl<S: Scalar> TokenBucket<S> {
    pub fn new(rate: S, burst: S) -> Result<Self, CurveError> {
        if rate < S::zero() || burst < S::zero() {
            return Err(CurveError::Invalid(format!("token bucket ({rate}, {burst}) has a negative parameter")));
        }
        Ok(Self { rate, burst })
    }

    pub fn zero() -> Self {
        Self { rate: S::zero(), burst: S::zero() }
    }

    /// Bound for a frame of `size` bytes released every `period` ms: `[size/period t + size]₊`.
    pub fn periodic(size: S, period: S) -> Result<Self, CurveError> {
        if period <= S::zero() {
            return Err(CurveError::Invalid(format!("non-positive period {period}")));
        }
        Self::new(size.clone() / period, size)
    }

    pub fn is_zero(&self) -> bool {
        self.rate.is_zero() && self.burst.is_zero()
    }

    pub fn value(&self, t: &S) -> Result<S, CurveError> {
        if *t < S::zero() {
            return Err(CurveError::NegativeTime(t.to_f64_lossy()));
        }
        Ok(self.rate.clone() * t.clone() + self.burst.clone())
    }

    pub fn curve(&self) -> PiecewiseAffineCurve<S> {
        PiecewiseAffineCurve::from_segments_unchecked(vec![Segment::new(
            S::zero(),
            self.burst.clone(),
            self.rate.clone(),
        )])
    }

    /// Aggregate of two flows sharing a queue.
    pub fn sum(&self, other: &Self) -> Self {
        Self {
            rate: self.rate.clone() + other.rate.clone(),
            burst: self.burst.clone() + other.burst.clone(),
        }
    }

    /// `α(t + d)`: the bound seen downstream of a FIFO element with delay at most `d`.
    pub fn delayed(&self, d: &S) -> Self {
        Self {
            rate: self.rate.clone(),
            burst: self.burst.clone() + self.rate.clone() * d.clone(),
        }
    }

    fn check_stable(&self, service: &RateLatency<S>) -> Result<(), CurveError> {
        if self.rate > service.rate && !self.rate.approx_eq(&service.rate) {
            return Err(CurveError::Unstable {
                arrival_rate: self.rate.to_f64_lossy(),
                service_rate: service.rate.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Horizontal deviation against a rate-latency server: `T + b / R`.
    pub fn delay_bound(&self, service: &RateLatency<S>) -> Result<S, CurveError> {
        self.check_stable(service)?;
        Ok(service.latency.clone() + self.burst.clone() / service.rate.clone())
    }

    /// Vertical deviation (worst-case backlog): `b + r T`.
    pub fn backlog_bound(&self, service: &RateLatency<S>) -> Result<S, CurveError> {
        self.check_stable(service)?;
        Ok(self.burst.clone() + self.rate.clone() * service.latency.clone())
    }

    /// Departure bound `α ⊘ β`, again a token bucket with burst `b + r T`.
    pub fn output_bound(&self, service: &RateLatency<S>) -> Result<TokenBucket<S>, CurveError> {
        let burst = self.backlog_bound(service)?;
        Ok(TokenBucket { rate: self.rate.clone(), burst })
    }
}

impl<S: Scalar> fmt::Display for TokenBucket<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}t+{}]₊", self.rate, self.burst)
    }
}

/// Service curve `R [t - T]₊` (bytes/ms, ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLatency<S> {
    pub rate: S,
    pub latency: S,
}

impl<S: Scalar> RateLatency<S> {
    pub fn new(rate: S, latency: S) -> Result<Self, CurveError> {
        if rate <= S::zero() {
            return Err(CurveError::Invalid(format!("rate-latency server needs a positive rate, got {rate}")));
        }
        if latency < S::zero() {
            return Err(CurveError::Invalid(format!("negative server latency {latency}")));
        }
        Ok(Self { rate, latency })
    }

    pub fn value(&self, t: &S) -> Result<S, CurveError> {
        if *t < S::zero() {
            return Err(CurveError::NegativeTime(t.to_f64_lossy()));
        }
        Ok(self.rate.clone() * clamp0(t.clone() - self.latency.clone()))
    }

    pub fn curve(&self) -> PiecewiseAffineCurve<S> {
        let segments = if self.latency.is_zero() {
            vec![Segment::new(S::zero(), S::zero(), self.rate.clone())]
        } else {
            vec![
                Segment::new(S::zero(), S::zero(), S::zero()),
                Segment::new(self.latency.clone(), S::zero(), self.rate.clone()),
            ]
        };
        PiecewiseAffineCurve::from_segments_unchecked(segments)
    }

    /// Concatenation of two servers in tandem: `R = min(R₁, R₂)`, `T = T₁ + T₂`.
    pub fn concatenate(&self, next: &Self) -> Self {
        let rate = if self.rate <= next.rate { self.rate.clone() } else { next.rate.clone() };
        Self { rate, latency: self.latency.clone() + next.latency.clone() }
    }

    /// Strict-priority leftover for the lower queue once `high` has been served:
    /// the non-decreasing closure of `[β(t) - α_H(t)]₊`.
    pub fn leftover(&self, high: &TokenBucket<S>) -> Result<RateLatency<S>, CurveError> {
        if high.rate >= self.rate {
            return Err(CurveError::NoLeftover {
                hp_rate: high.rate.to_f64_lossy(),
                service_rate: self.rate.to_f64_lossy(),
            });
        }
        let rate = self.rate.clone() - high.rate.clone();
        let latency = (self.rate.clone() * self.latency.clone() + high.burst.clone()) / rate.clone();
        Ok(RateLatency { rate, latency })
    }
}

impl<S: Scalar> fmt::Display for RateLatency<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[t-{}]₊", self.rate, self.latency)
    }
}

/// Evaluates a curve at `t`.
pub fn curve_value<S: Scalar>(curve: &PiecewiseAffineCurve<S>, t: &S) -> Result<S, CurveError> {
    curve.value(t)
}

/// Min-plus convolution `f ⊗ g`.
pub fn min_plus_convolution<S: Scalar>(
    f: &PiecewiseAffineCurve<S>,
    g: &PiecewiseAffineCurve<S>,
) -> PiecewiseAffineCurve<S> {
    f.convolve(g)
}

pub fn delay_bound<S: Scalar>(arrival: &TokenBucket<S>, service: &RateLatency<S>) -> Result<S, CurveError> {
    arrival.delay_bound(service)
}

pub fn backlog_bound<S: Scalar>(arrival: &TokenBucket<S>, service: &RateLatency<S>) -> Result<S, CurveError> {
    arrival.backlog_bound(service)
}

pub fn output_bound<S: Scalar>(
    arrival: &TokenBucket<S>,
    service: &RateLatency<S>,
) -> Result<TokenBucket<S>, CurveError> {
    arrival.output_bound(service)
}

pub fn leftover_service<S: Scalar>(
    service: &RateLatency<S>,
    high_priority_arrival: &TokenBucket<S>,
) -> Result<RateLatency<S>, CurveError> {
    service.leftover(high_priority_arrival)
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;

    use super::*;
    use crate::scalar::ratio;

    fn tb(r: f64, b: f64) -> TokenBucket<f64> {
        TokenBucket::new(r, b).unwrap()
    }

    fn rl(r: f64, t: f64) -> RateLatency<f64> {
        RateLatency::new(r, t).unwrap()
    }

    #[test]
    fn token_bucket_values() {
        let a = tb(32.0, 32.0);
        assert_eq!(curve_value(&a.curve(), &0.0).unwrap(), 32.0);
        assert_eq!(curve_value(&a.curve(), &10.0).unwrap(), 352.0);
        assert_eq!(rl(35.0, 128.0 / 35.0).curve().value(&0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_time_rejected() {
        let err = tb(1.0, 1.0).curve().value(&-0.5).unwrap_err();
        assert!(matches!(err, CurveError::NegativeTime(_)));
        assert!(tb(1.0, 1.0).value(&-1.0).is_err());
    }

    #[test]
    fn delay_and_backlog_examples() {
        let a = tb(32.0, 32.0);
        let s = rl(35.0, 128.0 / 35.0);
        assert!((a.delay_bound(&s).unwrap() - 160.0 / 35.0).abs() < 1e-12);
        assert!((a.backlog_bound(&s).unwrap() - (32.0 + 32.0 * 128.0 / 35.0)).abs() < 1e-12);
        let s50 = rl(50.0, 2.56);
        assert!((a.delay_bound(&s50).unwrap() - 3.2).abs() < 1e-12);
        assert!((a.backlog_bound(&s50).unwrap() - 113.92).abs() < 1e-12);
        assert_eq!(TokenBucket::zero().delay_bound(&s).unwrap(), 128.0 / 35.0);
        assert_eq!(tb(0.0, 77.0).backlog_bound(&s).unwrap(), 77.0);
    }

    #[test]
    fn dnc_example_in_exact_arithmetic() {
        let a = TokenBucket::new(ratio(32, 1), ratio(32, 1)).unwrap();
        let s = RateLatency::new(ratio(35, 1), ratio(128, 35)).unwrap();
        assert_eq!(a.delay_bound(&s).unwrap(), ratio(32, 7));
        let out = a.output_bound(&s).unwrap();
        assert_eq!(out.rate, ratio(32, 1));
        assert_eq!(out.burst, ratio(32 * 35 + 32 * 128, 35));
    }

    #[test]
    fn instability_is_reported() {
        let err = tb(40.0, 1.0).delay_bound(&rl(35.0, 0.0)).unwrap_err();
        assert!(matches!(err, CurveError::Unstable { .. }));
        assert!(tb(40.0, 1.0).output_bound(&rl(35.0, 0.0)).is_err());
        // equal rates are still stable
        assert!(tb(35.0, 1.0).delay_bound(&rl(35.0, 1.0)).is_ok());
    }

    #[test]
    fn leftover_examples() {
        let left = rl(12_500.0, 0.0).leftover(&tb(0.032, 32.0)).unwrap();
        assert!((left.rate - 12_499.968).abs() < 1e-9);
        assert!((left.latency - 32.0 / 12_499.968).abs() < 1e-15);
        let left = rl(10.0, 1.0).leftover(&tb(5.0, 10.0)).unwrap();
        assert_eq!((left.rate, left.latency), (5.0, 4.0));
        let same = rl(10.0, 1.0).leftover(&TokenBucket::zero()).unwrap();
        assert_eq!(same, rl(10.0, 1.0));
        assert!(matches!(rl(10.0, 1.0).leftover(&tb(10.0, 0.0)), Err(CurveError::NoLeftover { .. })));
    }

    #[test]
    fn invalid_curves_rejected() {
        assert!(PiecewiseAffineCurve::<f64>::new(vec![]).is_err());
        assert!(PiecewiseAffineCurve::from_triples(&[(1.0, 0.0, 1.0)]).is_err());
        assert!(PiecewiseAffineCurve::from_triples(&[(0.0, 0.0, -1.0)]).is_err());
        assert!(PiecewiseAffineCurve::from_triples(&[(0.0, 0.0, 1.0), (1.0, 5.0, 1.0)]).is_err());
        assert!(PiecewiseAffineCurve::from_triples(&[(0.0, 0.0, 1.0), (0.0, 0.0, 1.0)]).is_err());
        assert!(PiecewiseAffineCurve::from_triples(&[(0.0, 0.0, 1.0), (1.0, 1.0, 0.0)]).is_ok());
        assert!(RateLatency::new(0.0, 1.0).is_err());
        assert!(TokenBucket::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn rate_latency_concatenation() {
        let c = rl(50.0, 1.0).concatenate(&rl(35.0, 2.0));
        assert_eq!(c, rl(35.0, 3.0));
        let exact: RateLatency<BigRational> = RateLatency::new(ratio(7, 2), ratio(1, 3)).unwrap();
        let c = exact.concatenate(&RateLatency::new(ratio(9, 2), ratio(1, 6)).unwrap());
        assert_eq!(c.latency, ratio(1, 2));
    }
}
