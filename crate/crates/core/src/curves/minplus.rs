//! Exact min-plus operators on arbitrary piecewise-affine curves.
//!
//! Convolution is computed as the lower envelope of the pairwise convolutions
//! of affine pieces; each pairwise result is convex (smaller slope first), so the
//! envelope only breaks at piece endpoints and pairwise intersections.
//! Deviations are evaluated at the finitely many candidate instants where the
//! maximum of a piecewise-affine difference can occur.

use super::{PiecewiseAffineCurve, Segment};
use crate::scalar::{clamp0, max_of, Scalar};

/// Affine piece on `[start, end]`, `end == None` meaning unbounded.
#[derive(Debug, Clone)]
struct Piece<S> {
    start: S,
    end: Option<S>,
    value: S,
    slope: S,
}

impl<S: Scalar> Piece<S> {
    fn eval(&self, t: &S) -> S {
        self.value.clone() + self.slope.clone() * (t.clone() - self.start.clone())
    }

    fn covers(&self, t: &S) -> bool {
        *t >= self.start && self.end.as_ref().is_none_or(|e| t <= e)
    }
}

fn pieces<S: Scalar>(curve: &PiecewiseAffineCurve<S>) -> Vec<Piece<S>> {
    let segs = curve.segments();
    segs.iter()
        .enumerate()
        .map(|(i, s)| Piece {
            start: s.start.clone(),
            end: segs.get(i + 1).map(|n| n.start.clone()),
            value: s.value.clone(),
            slope: s.slope.clone(),
        })
        .collect()
}

fn add_opt<S: Scalar>(a: &Option<S>, b: &Option<S>) -> Option<S> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.clone() + y.clone()),
        _ => None,
    }
}

/// Convolution of two affine pieces: a convex function made of at most two pieces.
fn convolve_pieces<S: Scalar>(p: &Piece<S>, q: &Piece<S>, out: &mut Vec<Piece<S>>) {
    let base = p.start.clone() + q.start.clone();
    let value = p.value.clone() + q.value.clone();
    let len = |x: &Piece<S>| x.end.as_ref().map(|e| e.clone() - x.start.clone());
    let (lo, hi) = if p.slope <= q.slope { (p, q) } else { (q, p) };
    let (len_lo, len_hi) = (len(lo), len(hi));

    if lo.slope == hi.slope {
        out.push(Piece {
            end: add_opt(&Some(base.clone()), &add_opt(&len_lo, &len_hi)),
            start: base,
            value,
            slope: lo.slope.clone(),
        });
        return;
    }
    match len_lo {
        None => out.push(Piece { start: base, end: None, value, slope: lo.slope.clone() }),
        Some(l) => {
            let mid = base.clone() + l.clone();
            let mid_value = value.clone() + lo.slope.clone() * l;
            out.push(Piece { start: base, end: Some(mid.clone()), value, slope: lo.slope.clone() });
            out.push(Piece {
                end: add_opt(&Some(mid.clone()), &len_hi),
                start: mid,
                value: mid_value,
                slope: hi.slope.clone(),
            });
        }
    }
}

fn sort_dedup<S: Scalar>(mut xs: Vec<S>) -> Vec<S> {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("comparable scalars"));
    let mut out: Vec<S> = Vec::with_capacity(xs.len());
    for x in xs {
        if out.last().is_none_or(|l: &S| !l.approx_eq(&x)) {
            out.push(x);
        }
    }
    out
}

/// Lower envelope of a set of pieces that together cover `[0, ∞)`.
fn lower_envelope<S: Scalar>(pieces: &[Piece<S>]) -> PiecewiseAffineCurve<S> {
    let mut cuts: Vec<S> = Vec::new();
    for p in pieces {
        cuts.push(p.start.clone());
        if let Some(e) = &p.end {
            cuts.push(e.clone());
        }
    }
    for (i, a) in pieces.iter().enumerate() {
        for b in &pieces[i + 1..] {
            if a.slope == b.slope {
                continue;
            }
            // a.value + a.slope (x - a.start) = b.value + b.slope (x - b.start)
            let num = b.value.clone() - a.value.clone() + a.slope.clone() * a.start.clone()
                - b.slope.clone() * b.start.clone();
            let x = num / (a.slope.clone() - b.slope.clone());
            if x >= S::zero() && a.covers(&x) && b.covers(&x) {
                cuts.push(x);
            }
        }
    }
    let cuts = sort_dedup(cuts);
    let two = S::one() + S::one();

    let mut segments: Vec<Segment<S>> = Vec::new();
    for (i, left) in cuts.iter().enumerate() {
        let probe = match cuts.get(i + 1) {
            Some(right) => (left.clone() + right.clone()) / two.clone(),
            None => left.clone() + S::one(),
        };
        let best = pieces
            .iter()
            .filter(|p| p.covers(&probe) && p.start.approx_le(left))
            .min_by(|a, b| a.eval(&probe).partial_cmp(&b.eval(&probe)).expect("comparable scalars"));
        let Some(best) = best else { continue };
        let seg = Segment::new(left.clone(), clamp0(best.eval(left)), best.slope.clone());
        if let Some(prev) = segments.last() {
            let reached = prev.eval(&seg.start);
            if prev.slope.approx_eq(&seg.slope) && reached.approx_eq(&seg.value) {
                continue;
            }
        }
        segments.push(seg);
    }
    PiecewiseAffineCurve::from_segments_unchecked(segments)
}

pub fn convolve<S: Scalar>(f: &PiecewiseAffineCurve<S>, g: &PiecewiseAffineCurve<S>) -> PiecewiseAffineCurve<S> {
    let (pf, pg) = (pieces(f), pieces(g));
    let mut all = Vec::with_capacity(2 * pf.len() * pg.len());
    for p in &pf {
        for q in &pg {
            convolve_pieces(p, q, &mut all);
        }
    }
    lower_envelope(&all)
}

/// `inf { t >= 0 : f(t) >= y }`, `None` if `f` never reaches `y`.
pub fn lower_inverse<S: Scalar>(f: &PiecewiseAffineCurve<S>, y: &S) -> Option<S> {
    let segs = f.segments();
    if segs[0].value >= *y {
        return Some(S::zero());
    }
    for (i, s) in segs.iter().enumerate() {
        if s.slope.is_zero() {
            continue;
        }
        let x = s.start.clone() + (y.clone() - s.value.clone()) / s.slope.clone();
        match segs.get(i + 1) {
            Some(next) if x > next.start => continue,
            _ => return Some(max_of(x, s.start.clone())),
        }
    }
    None
}

/// `sup { t >= 0 : f(t) <= y }` (zero when `f(0) > y`), `None` if unbounded.
pub fn upper_inverse<S: Scalar>(f: &PiecewiseAffineCurve<S>, y: &S) -> Option<S> {
    let segs = f.segments();
    let mut best = S::zero();
    for (i, s) in segs.iter().enumerate() {
        if s.value > *y {
            return Some(best);
        }
        let end = segs.get(i + 1).map(|n| n.start.clone());
        if s.slope.is_zero() {
            best = end?;
            continue;
        }
        let x = s.start.clone() + (y.clone() - s.value.clone()) / s.slope.clone();
        match end {
            Some(e) if x >= e => best = e,
            _ => return Some(x),
        }
    }
    Some(best)
}

fn unbounded_tail<S: Scalar>(arrival: &PiecewiseAffineCurve<S>, service: &PiecewiseAffineCurve<S>) -> bool {
    let (a, b) = (arrival.tail_slope(), service.tail_slope());
    a > b && !a.approx_eq(b)
}

/// Delay bound: `sup_t inf { d >= 0 : α(t) <= β(t + d) }`.
pub fn horizontal_deviation<S: Scalar>(
    arrival: &PiecewiseAffineCurve<S>,
    service: &PiecewiseAffineCurve<S>,
) -> Option<S> {
    if unbounded_tail(arrival, service) {
        return None;
    }
    // (instant, use right-limit of the service inverse)
    let mut candidates: Vec<(S, bool)> = arrival.breakpoints().map(|t| (t.clone(), false)).collect();
    let a0 = arrival.segments()[0].value.clone();
    for tau in service.breakpoints() {
        let y = service.value_clamped(tau);
        if y < a0 {
            continue;
        }
        if let Some(t) = lower_inverse(arrival, &y) {
            candidates.push((t, false));
        }
        if let Some(t) = upper_inverse(arrival, &y) {
            candidates.push((t, true));
        }
    }
    let mut worst = S::zero();
    for (t, right_limit) in candidates {
        let y = arrival.value_clamped(&t);
        let reach = if right_limit { upper_inverse(service, &y)? } else { lower_inverse(service, &y)? };
        worst = max_of(worst, reach - t);
    }
    Some(worst)
}

/// Backlog bound: `sup_t α(t) - β(t)`, clamped at zero.
pub fn vertical_deviation<S: Scalar>(
    arrival: &PiecewiseAffineCurve<S>,
    service: &PiecewiseAffineCurve<S>,
) -> Option<S> {
    if unbounded_tail(arrival, service) {
        return None;
    }
    let worst = arrival
        .breakpoints()
        .chain(service.breakpoints())
        .map(|t| arrival.value_clamped(t) - service.value_clamped(t))
        .fold(S::zero(), |acc, d| max_of(acc, d));
    Some(clamp0(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{RateLatency, TokenBucket};
    use crate::scalar::ratio;

    fn curve(triples: &[(f64, f64, f64)]) -> PiecewiseAffineCurve<f64> {
        PiecewiseAffineCurve::from_triples(triples).unwrap()
    }

    #[test]
    fn rate_latency_convolution_matches_closed_form() {
        let a = RateLatency::new(50.0, 1.0).unwrap().curve();
        let b = RateLatency::new(35.0, 2.0).unwrap().curve();
        let c = a.convolve(&b);
        assert_eq!(c, RateLatency::new(35.0, 3.0).unwrap().curve());
    }

    #[test]
    fn zero_curve_absorbs() {
        let f = curve(&[(0.0, 0.0, 2.0), (1.0, 2.0, 1.0)]);
        let z = PiecewiseAffineCurve::zero();
        assert_eq!(f.convolve(&z), z);
        assert_eq!(z.convolve(&f), z);
        // with a burst at the origin the result is the constant f(0)
        let g = curve(&[(0.0, 3.0, 2.0)]);
        assert_eq!(g.convolve(&z), curve(&[(0.0, 3.0, 0.0)]));
    }

    #[test]
    fn token_buckets_convolve_to_min_of_shifted_sums() {
        let tb = TokenBucket::new(32.0, 32.0).unwrap().curve();
        let c = tb.convolve(&tb);
        assert_eq!(c, curve(&[(0.0, 64.0, 32.0)]));
        let a = TokenBucket::new(10.0, 5.0).unwrap().curve();
        let b = TokenBucket::new(2.0, 20.0).unwrap().curve();
        // min(5 + 2t + 20, 10t + 5 + 20): slope 2 everywhere after 0
        assert_eq!(a.convolve(&b), curve(&[(0.0, 25.0, 2.0)]));
    }

    #[test]
    fn exact_convolution_of_mixed_shapes() {
        let tb = TokenBucket::new(ratio(1, 1), ratio(4, 1)).unwrap().curve();
        let rl = RateLatency::new(ratio(3, 1), ratio(2, 1)).unwrap().curve();
        let c = tb.convolve(&rl);
        // flat at the burst while the server is latent, then the bucket's rate
        assert_eq!(c.value(&ratio(2, 1)).unwrap(), ratio(4, 1));
        assert_eq!(c.value(&ratio(4, 1)).unwrap(), ratio(6, 1));
        assert_eq!(c.value(&ratio(10, 1)).unwrap(), ratio(12, 1));
        assert_eq!(c.segments().len(), 2);
    }

    #[test]
    fn inverses() {
        let f = curve(&[(0.0, 0.0, 0.0), (2.0, 0.0, 1.0), (4.0, 2.0, 0.0), (6.0, 2.0, 2.0)]);
        assert_eq!(lower_inverse(&f, &0.0), Some(0.0));
        assert_eq!(lower_inverse(&f, &1.0), Some(3.0));
        assert_eq!(lower_inverse(&f, &2.0), Some(4.0));
        assert_eq!(lower_inverse(&f, &3.0), Some(6.5));
        assert_eq!(upper_inverse(&f, &0.0), Some(2.0));
        assert_eq!(upper_inverse(&f, &2.0), Some(6.0));
        let flat = curve(&[(0.0, 1.0, 0.0)]);
        assert_eq!(lower_inverse(&flat, &2.0), None);
        assert_eq!(upper_inverse(&flat, &1.0), None);
        assert_eq!(upper_inverse(&flat, &0.5), Some(0.0));
    }

    #[test]
    fn deviations_match_token_bucket_closed_forms() {
        let a = TokenBucket::new(32.0_f64, 32.0).unwrap();
        let s = RateLatency::new(50.0_f64, 2.56).unwrap();
        let h = horizontal_deviation(&a.curve(), &s.curve()).unwrap();
        assert!((h - a.delay_bound(&s).unwrap()).abs() < 1e-12);
        let v = vertical_deviation(&a.curve(), &s.curve()).unwrap();
        assert!((v - a.backlog_bound(&s).unwrap()).abs() < 1e-12);
        let fast = TokenBucket::new(60.0, 1.0).unwrap();
        assert_eq!(horizontal_deviation(&fast.curve(), &s.curve()), None);
        assert_eq!(vertical_deviation(&fast.curve(), &s.curve()), None);
    }

    #[test]
    fn horizontal_deviation_sees_flat_service_plateaus() {
        // service stalls between t=1 and t=3 at level 2
        let service = curve(&[(0.0, 0.0, 2.0), (1.0, 2.0, 0.0), (3.0, 2.0, 2.0)]);
        let arrival = curve(&[(0.0, 1.0, 1.0)]);
        // bytes arriving just after t=1 (level 2+) wait until t=3: sup approached as t -> 1+
        let h = horizontal_deviation(&arrival, &service).unwrap();
        assert!((h - 2.0).abs() < 1e-12, "{h}");
    }
}
