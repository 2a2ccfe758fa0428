//! Brute-force min-plus evaluation on a sampling grid.
//!
//! Works for any piecewise-affine input and relies only on pointwise curve
//! evaluation, so it can cross-check the closed forms and the exact envelope
//! code. The grid is `points` uniform samples over `[0, horizon]`, augmented
//! with the curves' breakpoints (and their shifted images where an operator
//! shifts time) so that extrema of piecewise-affine expressions are hit exactly.

use super::PiecewiseAffineCurve;

type Curve = PiecewiseAffineCurve<f64>;

#[derive(Debug, Clone)]
pub struct GridOracle {
    pub points: usize,
    /// Scan horizon in ms; chosen from the curves' breakpoints when `None`.
    pub horizon: Option<f64>,
}

impl Default for GridOracle {
    fn default() -> Self {
        Self { points: 10_000, horizon: None }
    }
}

fn uniform(upto: f64, points: usize) -> impl Iterator<Item = f64> {
    let n = points.max(2) - 1;
    (0..=n).map(move |i| upto * i as f64 / n as f64)
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.retain(|x| x.is_finite() && *x >= 0.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

impl GridOracle {
    pub fn new(points: usize) -> Self {
        Self { points, horizon: None }
    }

    pub fn horizon_for(&self, curves: &[&Curve]) -> f64 {
        self.horizon.unwrap_or_else(|| {
            let last = curves
                .iter()
                .flat_map(|c| c.breakpoints().copied())
                .fold(0.0_f64, f64::max);
            2.0 * last + 10.0
        })
    }

    fn samples(&self, upto: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
        let mut xs: Vec<f64> = uniform(upto, self.points).collect();
        xs.extend(extra.into_iter().filter(|x| *x <= upto));
        sorted(xs)
    }

    /// `inf_{0<=s<=t} f(s) + g(t-s)` by scanning split points.
    pub fn convolution_at(&self, f: &Curve, g: &Curve, t: f64) -> f64 {
        let extra: Vec<f64> = f
            .breakpoints()
            .copied()
            .chain(g.breakpoints().map(|b| t - b))
            .chain([t])
            .collect();
        self.samples(t, extra)
            .into_iter()
            .map(|s| f.value_clamped(&s) + g.value_clamped(&(t - s).max(0.0)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest `u >= from` with `service(u) >= level`, by bracketing and bisection.
    fn reach(service: &Curve, level: f64, from: f64) -> Option<f64> {
        if service.value_clamped(&from) >= level {
            return Some(from);
        }
        let mut lo = from;
        let mut step = 1.0;
        let mut hi = from + step;
        let mut tries = 0;
        while service.value_clamped(&hi) < level {
            lo = hi;
            step *= 2.0;
            hi = from + step;
            tries += 1;
            if tries > 200 {
                return None;
            }
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if service.value_clamped(&mid) >= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// `sup_t inf { d >= 0 : arrival(t) <= service(t + d) }` over the grid.
    pub fn horizontal_deviation(&self, arrival: &Curve, service: &Curve) -> Option<f64> {
        let h = self.horizon_for(&[arrival, service]);
        let mut worst = 0.0_f64;
        for t in self.samples(h, arrival.breakpoints().copied()) {
            let level = arrival.value_clamped(&t);
            let u = Self::reach(service, level, t)?;
            worst = worst.max(u - t);
        }
        Some(worst)
    }

    /// `sup_t arrival(t) - service(t)` over the grid.
    pub fn vertical_deviation(&self, arrival: &Curve, service: &Curve) -> f64 {
        let h = self.horizon_for(&[arrival, service]);
        let extra: Vec<f64> = arrival.breakpoints().chain(service.breakpoints()).copied().collect();
        self.samples(h, extra)
            .into_iter()
            .map(|t| arrival.value_clamped(&t) - service.value_clamped(&t))
            .fold(0.0, f64::max)
    }

    /// `(arrival ⊘ service)(t) = sup_{u>=0} arrival(t+u) - service(u)` over the grid.
    pub fn deconvolution_at(&self, arrival: &Curve, service: &Curve, t: f64) -> f64 {
        let h = self.horizon_for(&[arrival, service]);
        let extra: Vec<f64> = service
            .breakpoints()
            .copied()
            .chain(arrival.breakpoints().map(|b| b - t))
            .collect();
        self.samples(h, extra)
            .into_iter()
            .map(|u| arrival.value_clamped(&(t + u)) - service.value_clamped(&u))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Non-decreasing closure of `[service - high]₊`, evaluated at `t`.
    pub fn leftover_at(&self, service: &Curve, high: &Curve, t: f64) -> f64 {
        let extra: Vec<f64> = service.breakpoints().chain(high.breakpoints()).copied().chain([t]).collect();
        self.samples(t, extra)
            .into_iter()
            .map(|s| (service.value_clamped(&s) - high.value_clamped(&s)).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{RateLatency, TokenBucket};

    #[test]
    fn grid_scan_matches_dnc_example() {
        let oracle = GridOracle::default();
        let a = TokenBucket::new(32.0, 32.0).unwrap().curve();
        let s = RateLatency::new(35.0, 128.0 / 35.0).unwrap().curve();
        let w = oracle.horizontal_deviation(&a, &s).unwrap();
        assert!((w - 160.0 / 35.0).abs() < 1e-9, "{w}");
        let out = oracle.deconvolution_at(&a, &s, 0.0);
        assert!((out - (32.0 + 32.0 * 128.0 / 35.0)).abs() < 1e-9);
    }

    #[test]
    fn unstable_pairs_have_no_finite_reach() {
        let oracle = GridOracle { points: 100, horizon: Some(10.0) };
        let flat = PiecewiseAffineCurve::from_triples(&[(0.0, 0.0, 1.0), (1.0, 1.0, 0.0)]).unwrap();
        let a = TokenBucket::new(1.0, 5.0).unwrap().curve();
        assert_eq!(oracle.horizontal_deviation(&a, &flat), None);
    }
}
