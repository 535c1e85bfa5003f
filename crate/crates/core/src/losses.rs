//! Classification loss families: values, gradients, convex conjugates, and
//! the proximal operator of the scaled conjugate that drives the dual
//! coordinate update.
//!
//! The smoothed hinge loss of margin m = y·u is
//!
//! ```text
//! f(u) = 0            (m >= 1)
//!        1/2 - m      (m < 0)
//!        (1 - m)^2/2  (otherwise)
//! ```
//!
//! Its conjugate is f*(a) = y·a + a²/2 on y·a ∈ [-1, 0] (+∞ outside), and
//! prox(u | f*/C) has a closed form. The logistic loss is supported as an
//! optional family; its conjugate prox is solved by safeguarded Newton.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossFamily {
    SmoothedHinge,
    Logistic,
}

impl LossFamily {
    /// Loss value at prediction `u` for a label in {-1, +1}.
    pub fn value(self, u: f64, label: f64) -> f64 {
        debug_assert!(label == 1.0 || label == -1.0);
        let m = label * u;
        match self {
            LossFamily::SmoothedHinge => {
                if m >= 1.0 {
                    0.0
                } else if m < 0.0 {
                    0.5 - m
                } else {
                    0.5 * (1.0 - m) * (1.0 - m)
                }
            }
            // log(1 + exp(-m)) without overflow for large |m|
            LossFamily::Logistic => (-m).max(0.0) + (-m.abs()).exp().ln_1p(),
        }
    }

    /// Derivative of `value` in `u`. At the kinks of the smoothed hinge the
    /// middle-piece value is returned; the solver itself only uses proximal
    /// operations, so this is diagnostic.
    pub fn gradient(self, u: f64, label: f64) -> f64 {
        let m = label * u;
        match self {
            LossFamily::SmoothedHinge => {
                if m >= 1.0 {
                    0.0
                } else if m < 0.0 {
                    -label
                } else {
                    -label * (1.0 - m)
                }
            }
            LossFamily::Logistic => -label / (1.0 + m.exp()),
        }
    }

    /// Convex conjugate f*(a); +∞ encodes a point outside the domain
    /// {a : a·label ∈ [-1, 0]}.
    pub fn conjugate(self, a: f64, label: f64) -> f64 {
        let m = a * label;
        if !(-1.0..=0.0).contains(&m) {
            return f64::INFINITY;
        }
        match self {
            LossFamily::SmoothedHinge => label * a + 0.5 * a * a,
            LossFamily::Logistic => {
                let s = -m; // in [0, 1]
                xlogx(s) + xlogx(1.0 - s)
            }
        }
    }

    /// prox(u | f*/C) = argmin_x (C/2)(x-u)² + f*(x) for C > 0.
    ///
    /// Closed form for the smoothed hinge, first-match-wins over the
    /// branches (they agree at the boundaries):
    ///
    /// ```text
    /// (Cu - y)/(1+C)   if -1 <= (Cuy - 1)/(1+C) <= 0
    /// -y               if (Cuy - 1)/(1+C) < -1
    /// 0                otherwise
    /// ```
    ///
    /// For the logistic loss the minimizer is found by safeguarded Newton
    /// on the open domain; it fails loudly if the 1e-12 tolerance is not
    /// reached.
    pub fn prox_dual(self, u: f64, label: f64, c: f64) -> Result<f64> {
        debug_assert!(c > 0.0);
        match self {
            LossFamily::SmoothedHinge => {
                let t = (c * u * label - 1.0) / (1.0 + c);
                if (-1.0..=0.0).contains(&t) {
                    Ok((c * u - label) / (1.0 + c))
                } else if t < -1.0 {
                    Ok(-label)
                } else {
                    Ok(0.0)
                }
            }
            LossFamily::Logistic => logistic_prox_dual(u, label, c),
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Minimizes (C/2)(x-u)² + f*(x) over x·label ∈ (-1, 0) for the logistic
/// conjugate. Substituting s = -x·label ∈ (0, 1) the stationarity condition
/// is C(s + label·u) + ln(s/(1-s)) = 0, whose left side is strictly
/// increasing, so Newton with a bisection safeguard converges.
fn logistic_prox_dual(u: f64, label: f64, c: f64) -> Result<f64> {
    let grad = |s: f64| c * (s + label * u) + (s / (1.0 - s)).ln();
    let (mut lo, mut hi) = (1e-300, 1.0 - 1e-16);
    let mut s = 0.5;
    let tol = (c + 4.0) * 1e-13;
    for _ in 0..300 {
        let g = grad(s);
        if g.abs() <= tol || hi - lo <= f64::EPSILON {
            return Ok(-label * s);
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let hess = c + 1.0 / (s * (1.0 - s));
        let mut next = s - g / hess;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        s = next;
    }
    Err(Error::ProxNoConvergence {
        residual: grad(s).abs(),
    })
}
