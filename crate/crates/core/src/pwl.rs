//! Piecewise-linear over-approximation of exp on an interval.
//!
//! Each segment is the secant of exp between consecutive breakpoints, so the
//! approximation touches exp at every breakpoint and lies above it in
//! between. Breakpoints are placed so that every segment attains the same
//! maximum error, which minimizes the overall error for a given segment
//! count.

use crate::error::{Error, Result};

/// A K-segment secant approximation of exp on [domain.0, domain.1].
#[derive(Debug, Clone)]
pub struct PwlExpApprox {
    pub domain: (f64, f64),
    /// Segment count K.
    pub segments: usize,
    /// K+1 breakpoints, ascending, first = domain.0, last = domain.1.
    pub breakpoints: Vec<f64>,
    /// Secant slopes a_k.
    pub slopes: Vec<f64>,
    /// Secant intercepts b_k; f_k(x) = a_k x + b_k.
    pub intercepts: Vec<f64>,
    /// Shared per-segment maximum of f - exp.
    pub max_error: f64,
}

/// Maximum of (secant of exp) - exp on [c0, c1]; attained where the secant
/// slope equals exp.
pub fn segment_error(c0: f64, c1: f64) -> f64 {
    let (a, b) = secant(c0, c1);
    if a <= 0.0 {
        return 0.0; // exp underflow on a far-left segment
    }
    let x = a.ln();
    (a * x + b - a).max(0.0)
}

fn secant(c0: f64, c1: f64) -> (f64, f64) {
    let a = (c1.exp() - c0.exp()) / (c1 - c0);
    let b = c1.exp() - a * c1;
    (a, b)
}

/// Next breakpoint after `c0` whose segment attains error `target`.
fn advance(c0: f64, target: f64, hard_hi: f64) -> f64 {
    let mut hi = c0 + 0.5;
    while segment_error(c0, hi) < target && hi < hard_hi {
        hi = c0 + (hi - c0) * 2.0;
    }
    let mut lo = c0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if segment_error(c0, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl PwlExpApprox {
    /// Equal-error partition of [a, b] into `segments` secant pieces.
    ///
    /// Outer bisection on the shared error value (to ~1e-9 relative), inner
    /// solves for each breakpoint.
    pub fn equal_error(a: f64, b: f64, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::validation("segment count must be at least 1"));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::validation(format!(
                "invalid domain [{a}, {b}]: need finite a < b"
            )));
        }

        let breakpoints = if segments == 1 {
            vec![a, b]
        } else {
            let hard_hi = b + (b - a) + 1.0;
            let place = |err: f64| -> Vec<f64> {
                let mut points = vec![a];
                for _ in 0..segments {
                    let next = advance(*points.last().unwrap(), err, hard_hi);
                    points.push(next);
                }
                points
            };
            let mut err_hi = segment_error(a, b);
            let mut err_lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (err_lo + err_hi);
                if mid <= err_lo || mid >= err_hi {
                    break;
                }
                if *place(mid).last().unwrap() < b {
                    err_lo = mid;
                } else {
                    err_hi = mid;
                }
            }
            let mut points = place(0.5 * (err_lo + err_hi));
            points[segments] = b; // snap the last breakpoint onto the domain
            points
        };

        let mut slopes = Vec::with_capacity(segments);
        let mut intercepts = Vec::with_capacity(segments);
        let mut max_error = 0.0f64;
        for k in 0..segments {
            let (slope, intercept) = secant(breakpoints[k], breakpoints[k + 1]);
            slopes.push(slope);
            intercepts.push(intercept);
            max_error = max_error.max(segment_error(breakpoints[k], breakpoints[k + 1]));
        }

        Ok(PwlExpApprox {
            domain: (a, b),
            segments,
            breakpoints,
            slopes,
            intercepts,
            max_error,
        })
    }

    /// Evaluate the approximation. `x` must lie in the domain (a hair of
    /// slack is tolerated and clamped).
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.domain;
        debug_assert!(
            x >= a - 1e-9 * (1.0 + b - a) && x <= b + 1e-9 * (1.0 + b - a),
            "{x} outside [{a}, {b}]"
        );
        let x = x.clamp(a, b);
        let k = match self
            .breakpoints
            .partition_point(|&c| c <= x)
        {
            0 => 0,
            p => (p - 1).min(self.segments - 1),
        };
        self.slopes[k] * x + self.intercepts[k]
    }

    /// Per-segment maximum errors (all equal for an equal-error partition).
    pub fn per_segment_errors(&self) -> Vec<f64> {
        (0..self.segments)
            .map(|k| segment_error(self.breakpoints[k], self.breakpoints[k + 1]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Stationarity of secant-minus-exp on [0,1] in closed form:
    // (e-1)ln(e-1) + 1 - (e-1).
    fn unit_interval_error() -> f64 {
        let a = std::f64::consts::E - 1.0;
        a * a.ln() + 1.0 - a
    }

    #[test]
    fn single_segment_closed_form() {
        let pwl = PwlExpApprox::equal_error(0.0, 1.0, 1).unwrap();
        let expected = unit_interval_error();
        assert!(
            (pwl.max_error - expected).abs() < 1e-12,
            "{} vs {expected}",
            pwl.max_error
        );
        // Frozen independently computed value.
        assert!((expected - 0.211_866_832_515_566_37).abs() < 1e-15);
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(PwlExpApprox::equal_error(0.5, 0.5, 1).is_err());
        assert!(PwlExpApprox::equal_error(1.0, 0.0, 2).is_err());
    }

    #[test]
    fn secants_touch_exp_at_breakpoints() {
        let pwl = PwlExpApprox::equal_error(-2.0, 1.5, 7).unwrap();
        for k in 0..pwl.segments {
            let c0 = pwl.breakpoints[k];
            let c1 = pwl.breakpoints[k + 1];
            let f0 = pwl.slopes[k] * c0 + pwl.intercepts[k];
            let f1 = pwl.slopes[k] * c1 + pwl.intercepts[k];
            assert!((f0 - c0.exp()).abs() < 1e-12 * c0.exp().max(1.0));
            assert!((f1 - c1.exp()).abs() < 1e-12 * c1.exp().max(1.0));
        }
    }

    #[test]
    fn dominates_exp_within_error_bound() {
        for k in [1, 4, 18] {
            let pwl = PwlExpApprox::equal_error(-3.0, 2.0, k).unwrap();
            for s in 0..=1000 {
                let x = -3.0 + 5.0 * s as f64 / 1000.0;
                let diff = pwl.eval(x) - x.exp();
                assert!(diff >= -1e-12, "K={k} x={x}: below exp by {diff}");
                assert!(diff <= pwl.max_error + 1e-9, "K={k} x={x}: error {diff}");
            }
        }
    }

    #[test]
    fn per_segment_errors_equal_and_shrinking_in_k() {
        let mut prev = f64::INFINITY;
        for k in [1usize, 4, 18] {
            let pwl = PwlExpApprox::equal_error(0.0, 1.0, k).unwrap();
            let errs = pwl.per_segment_errors();
            let lo = errs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = errs.iter().cloned().fold(0.0f64, f64::max);
            assert!(hi - lo < 1e-6, "K={k}: spread {}", hi - lo);
            assert!(pwl.max_error < prev);
            prev = pwl.max_error;
        }
    }

    // The experiment-scale domains reproduce the published additive
    // guarantees: 2*eps matches the budget-2 guarantee column.
    #[test]
    fn experiment_scale_guarantees() {
        let cases = [
            (5.0, 18, 0.15676),
            (10.0, 21, 0.231791),
            (250.0, 65, 0.597331),
        ];
        for (cap, k, guarantee_b2) in cases {
            let a = cap * 0.1f64.ln(); // min log u = 0, G * log(0.1)
            let b = (cap * 10.0).ln(); // log(G * max u) + log(1)
            let pwl = PwlExpApprox::equal_error(a, b, k).unwrap();
            let got = 2.0 * pwl.max_error;
            assert!(
                (got - guarantee_b2).abs() < 5e-6,
                "G={cap} K={k}: 2*eps = {got}, expected {guarantee_b2}"
            );
        }
    }
}
