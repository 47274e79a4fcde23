//! Traversability cost functions h: positive, nonincreasing on (0,∞), with
//! h(x) = +∞ for x ≤ 0. Sources: closed forms, constants for synthetic
//! tests, or interpolated Monte Carlo tables.

use crate::oracle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HFunError {
    #[error("unknown analytic h id {0:?}")]
    UnknownId(String),
    #[error("table needs at least two usable points")]
    TooFewPoints,
    #[error("table x values must be positive and strictly increasing")]
    BadGrid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum HFunction {
    /// −log β(1−e^{−x}) with β(w) = (w+√(w(4−3w)))/2.
    TwoNeighbour,
    /// −log(1−e^{−x}).
    BasicLog,
    Constant(f64),
    Table(TableInterp),
}

impl HFunction {
    pub fn analytic(id: &str) -> Result<HFunction, HFunError> {
        match id {
            "two-neighbour" | "two_neighbour" => Ok(HFunction::TwoNeighbour),
            "basic-log" | "basic_log" => Ok(HFunction::BasicLog),
            other => Err(HFunError::UnknownId(other.to_string())),
        }
    }

    pub fn from_points(points: Vec<(f64, f64)>) -> Result<HFunction, HFunError> {
        Ok(HFunction::Table(TableInterp::new(points)?))
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::INFINITY;
        }
        match self {
            HFunction::TwoNeighbour => oracle::h_two_neighbour(x),
            HFunction::BasicLog => -(-(-x).exp()).ln_1p(),
            HFunction::Constant(c) => *c,
            HFunction::Table(t) => t.eval(x),
        }
    }
}

/// Monotone cubic interpolation of (log x, h) knots, extended outside the
/// sampled range by the two closed-form envelope shapes fitted at the
/// endpoints, which keeps the extension monotone and integrable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableInterp {
    t: Vec<f64>, // log x
    y: Vec<f64>,
    d: Vec<f64>, // Hermite slopes
    c_left: f64,
    c_right: f64,
    y_scale_left: f64,
}

fn lower_envelope(x: f64, c: f64) -> f64 {
    -c * (-(-x / c).exp()).ln_1p()
}

fn upper_envelope(x: f64, c: f64) -> f64 {
    -(-(-c * x).exp()).ln_1p()
}

impl TableInterp {
    pub fn new(points: Vec<(f64, f64)>) -> Result<TableInterp, HFunError> {
        if points.len() < 2 {
            return Err(HFunError::TooFewPoints);
        }
        if points
            .windows(2)
            .any(|w| w[0].0 <= 0.0 || w[1].0 <= w[0].0)
        {
            return Err(HFunError::BadGrid);
        }
        let t: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let d = fritsch_carlson_slopes(&t, &y);

        // fit the lower-envelope constant at the left end: solve
        // −c log(1−e^{−x0/c}) = h0 by bisection in log c
        let (x0, h0) = points[0];
        let mut lo = 1e-8_f64;
        let mut hi = 1e8_f64;
        for _ in 0..200 {
            let mid = ((lo.ln() + hi.ln()) / 2.0).exp();
            if lower_envelope(x0, mid) < h0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c_left = lo;
        let y_scale_left = h0 / lower_envelope(x0, c_left).max(f64::MIN_POSITIVE);

        // fit the upper-envelope constant at the right end
        let (xk, hk) = *points.last().expect("non-empty");
        let c_right = -(-hk).exp_m1().neg_ln_guard() / xk;

        Ok(TableInterp {
            t,
            y,
            d,
            c_left,
            c_right,
            y_scale_left,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = x.ln();
        let n = self.t.len();
        if t <= self.t[0] {
            return (lower_envelope(x, self.c_left) * self.y_scale_left).max(self.y[0]);
        }
        if t >= self.t[n - 1] {
            return upper_envelope(x, self.c_right).min(self.y[n - 1]);
        }
        let i = match self
            .t
            .binary_search_by(|v| v.partial_cmp(&t).expect("finite"))
        {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        self.y[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
            + self.d[i] * h * (s3 - 2.0 * s2 + s)
            + self.y[i + 1] * (-2.0 * s3 + 3.0 * s2)
            + self.d[i + 1] * h * (s3 - s2)
    }
}

trait NegLnGuard {
    fn neg_ln_guard(self) -> f64;
}

impl NegLnGuard for f64 {
    /// ln of a quantity clamped away from 0 to keep endpoint fits finite.
    fn neg_ln_guard(self) -> f64 {
        (-self).max(f64::MIN_POSITIVE).ln()
    }
}

fn fritsch_carlson_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let delta: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (t[i + 1] - t[i]))
        .collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        d[i] = if delta[i - 1] * delta[i] > 0.0 {
            (delta[i - 1] + delta[i]) / 2.0
        } else {
            0.0
        };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
        } else {
            let a = d[i] / delta[i];
            let b = d[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                d[i] = tau * a * delta[i];
                d[i + 1] = tau * b * delta[i];
            }
        }
    }
    d
}

/// Feasibility search over c on a log grid for the two-sided envelope
/// −c log(1−e^{−x/c}) ≤ h(x) ≤ −log(1−e^{−cx}); returns a witnessing c.
/// `slack` widens the band (e.g. by confidence-interval half-widths).
pub fn envelope_feasible(points: &[(f64, f64)], slack: f64) -> Option<f64> {
    let grid = (-60..=60).map(|k| (k as f64 * 0.1).exp());
    for c in grid {
        let ok = points.iter().all(|&(x, h)| {
            lower_envelope(x, c) <= h + slack && h - slack <= upper_envelope(x, c)
        });
        if ok {
            return Some(c);
        }
    }
    None
}

/// ∫₀^∞ h(x) dx by adaptive Simpson after the substitution x = t², which
/// removes the logarithmic endpoint singularity; the tail beyond x = 60 is
/// negligible for the integrable decaying shapes used here.
pub fn integrate(h: &HFunction, tol: f64) -> f64 {
    let g = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            2.0 * t * h.eval(t * t)
        }
    };
    adaptive_simpson(&g, 0.0, 60f64.sqrt(), tol, 40)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = (a + b) / 2.0;
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = (a + b) / 2.0;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    rec(f, a, b, fa, fm, fb, whole, tol, depth)
}
