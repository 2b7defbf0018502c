//! C² smoothing of the absolute value.
//!
//! For a width `rho > 0` the smoothed absolute value is
//!
//! ```text
//! |v|_rho = |v|                                  if |v| >= rho
//!         = rho/3 + v^2 (rho - |v|/3) / rho^2    otherwise
//! ```
//!
//! It is even, convex, agrees with `|v|` outside `(-rho, rho)` and has a
//! second derivative bounded by `2/rho` that is Lipschitz with constant
//! `2/rho^2`. The nonlinear solvers apply these scalar maps nodally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing width `rho`, validated positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParam {
    rho: f64,
}

impl SmoothingParam {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho > 0.0 {
            Ok(Self { rho })
        } else {
            Err(Error::Domain(format!("rho must be positive and finite, got {rho}")))
        }
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `|v|_rho`. At `|v| == rho` the outer branch is taken.
    #[inline]
    pub fn abs(&self, v: f64) -> f64 {
        let a = v.abs();
        let r = self.rho;
        if a >= r {
            a
        } else {
            r / 3.0 + v * v * (r - a / 3.0) / (r * r)
        }
    }

    /// First derivative, always in `[-1, 1]`.
    #[inline]
    pub fn deriv(&self, v: f64) -> f64 {
        let a = v.abs();
        let r = self.rho;
        if a >= r {
            v.signum()
        } else {
            // sign(v) (2|v|/rho - v^2/rho^2), written to stay exact at v = 0
            let t = a / r;
            v.signum() * t * (2.0 - t)
        }
    }

    /// Second derivative, in `[0, 2/rho]`.
    #[inline]
    pub fn second(&self, v: f64) -> f64 {
        let a = v.abs();
        let r = self.rho;
        if a >= r {
            0.0
        } else {
            2.0 / r - 2.0 * a / (r * r)
        }
    }
}

fn check(v: f64, p: SmoothingParam) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("argument must be finite, got {v}")));
    }
    // guards against a hand-built param in serialized input
    if !(p.rho.is_finite() && p.rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {}", p.rho)));
    }
    Ok(())
}

/// Checked `|v|_rho`.
pub fn value(v: f64, p: SmoothingParam) -> Result<f64> {
    check(v, p)?;
    Ok(p.abs(v))
}

/// Checked first derivative of `|v|_rho`.
pub fn deriv(v: f64, p: SmoothingParam) -> Result<f64> {
    check(v, p)?;
    Ok(p.deriv(v))
}

/// Checked second derivative of `|v|_rho`.
pub fn second(v: f64, p: SmoothingParam) -> Result<f64> {
    check(v, p)?;
    Ok(p.second(v))
}
