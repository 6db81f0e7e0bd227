//! Truncated exponential conditional families.
//!
//! A continuous unit conditioned on the hidden layer follows a density
//! proportional to `e^{a t}` on its support interval, where the natural
//! parameter `a` is the unit's total input (`b_i + W^T h` for a visible
//! unit, `d + h^T V` for the output). Three supports are available:
//! `[0, inf)`, `[0, 1]` and `[-delta, delta]`. This module provides the
//! density, cumulative distribution, mean and inverse-CDF sampler for each.
//!
//! All branches are written so that exponents stay non-positive; near
//! `a = 0` second-order Taylor expansions replace the `0/0` forms
//! (threshold [`SMALL_PARAM`]).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Natural parameter threshold below which Taylor branches are used.
pub const SMALL_PARAM: f64 = 1e-6;

/// Support interval of a continuous unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SupportInterval {
    /// `[0, inf)`; density exists only for negative natural parameter.
    HalfLine,
    /// `[0, 1]`.
    Unit,
    /// `[-delta, delta]`, `delta > 0`.
    Symmetric { delta: f64 },
}

impl SupportInterval {
    pub fn symmetric(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta.is_finite() {
            Ok(SupportInterval::Symmetric { delta })
        } else {
            Err(Error::InvalidArgument(format!(
                "symmetric interval needs delta > 0, got {delta}"
            )))
        }
    }

    /// Lower and upper endpoints (upper is `+inf` for the half line).
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            SupportInterval::HalfLine => (0.0, f64::INFINITY),
            SupportInterval::Unit => (0.0, 1.0),
            SupportInterval::Symmetric { delta } => (-delta, delta),
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.bounds();
        t >= lo && t <= hi
    }

    /// Midpoint of the support (limit of the mean as `a -> 0`).
    pub fn midpoint(&self) -> f64 {
        match *self {
            SupportInterval::HalfLine => f64::INFINITY,
            SupportInterval::Unit => 0.5,
            SupportInterval::Symmetric { .. } => 0.0,
        }
    }

    /// Clamp a value into the support.
    pub fn clamp(&self, t: f64) -> f64 {
        let (lo, hi) = self.bounds();
        t.clamp(lo, hi)
    }
}

/// Natural parameter of a truncated exponential unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalParameter(pub f64);

impl From<f64> for NaturalParameter {
    fn from(v: f64) -> Self {
        NaturalParameter(v)
    }
}

impl NaturalParameter {
    pub fn value(&self) -> f64 {
        self.0
    }
}

fn check_halfline(a: f64) -> Result<()> {
    if a < 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "half-line density needs a < 0 (non-normalizable), got a = {a}"
        )))
    }
}

/// Density `p(t)` of the truncated exponential with natural parameter `a`.
///
/// Returns `0` for `t` outside the support.
pub fn density(a: NaturalParameter, iv: SupportInterval, t: f64) -> Result<f64> {
    let a = a.0;
    if let SupportInterval::HalfLine = iv {
        check_halfline(a)?;
    }
    if !iv.contains(t) {
        return Ok(0.0);
    }
    Ok(match iv {
        SupportInterval::HalfLine => -a * (a * t).exp(),
        SupportInterval::Unit => {
            if a.abs() < SMALL_PARAM {
                1.0 + a * (t - 0.5) + a * a * (t * t / 2.0 - t / 2.0 + 1.0 / 12.0)
            } else if a > 0.0 {
                a * (a * (t - 1.0)).exp() / (-(-a).exp_m1())
            } else {
                -a * (a * t).exp() / (-a.exp_m1())
            }
        }
        SupportInterval::Symmetric { delta } => {
            if a.abs() < SMALL_PARAM {
                (1.0 + a * t + a * a * (t * t / 2.0 - delta * delta / 6.0)) / (2.0 * delta)
            } else if a > 0.0 {
                a * (a * (t - delta)).exp() / (-(-2.0 * delta * a).exp_m1())
            } else {
                -a * (a * (t + delta)).exp() / (-(2.0 * delta * a).exp_m1())
            }
        }
    })
}

/// Cumulative distribution `P(X <= t)`, clamped to `[0, 1]`.
pub fn cdf(a: NaturalParameter, iv: SupportInterval, t: f64) -> Result<f64> {
    let a = a.0;
    if let SupportInterval::HalfLine = iv {
        check_halfline(a)?;
    }
    let (lo, hi) = iv.bounds();
    if t <= lo {
        return Ok(0.0);
    }
    if t >= hi {
        return Ok(1.0);
    }
    let p = match iv {
        SupportInterval::HalfLine => -(a * t).exp_m1(),
        SupportInterval::Unit => {
            if a.abs() < SMALL_PARAM {
                t * (1.0 + a * (t - 1.0) / 2.0
                    + a * a * (t * t / 6.0 - t / 4.0 + 1.0 / 12.0))
            } else if a > 0.0 {
                (a * (t - 1.0)).exp() * (-a * t).exp_m1() / (-a).exp_m1()
            } else {
                (a * t).exp_m1() / a.exp_m1()
            }
        }
        SupportInterval::Symmetric { delta } => {
            if a.abs() < SMALL_PARAM {
                (t + delta) / (2.0 * delta)
                    * (1.0 + a * (t - delta) / 2.0 + a * a * t * (t - delta) / 6.0)
            } else if a > 0.0 {
                let num = (a * (t - delta)).exp() - (-2.0 * delta * a).exp();
                num / (-(-2.0 * delta * a).exp_m1())
            } else {
                (a * (t + delta)).exp_m1() / (2.0 * delta * a).exp_m1()
            }
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Mean of the distribution; tends to the support midpoint as `a -> 0`.
pub fn mean(a: NaturalParameter, iv: SupportInterval) -> Result<f64> {
    let a = a.0;
    if let SupportInterval::HalfLine = iv {
        check_halfline(a)?;
    }
    Ok(match iv {
        SupportInterval::HalfLine => -1.0 / a,
        SupportInterval::Unit => {
            if a.abs() < SMALL_PARAM {
                0.5 + a / 12.0
            } else if a > 0.0 {
                1.0 / (-(-a).exp_m1()) - 1.0 / a
            } else {
                let b = -a;
                1.0 / b - (-b).exp() / (-(-b).exp_m1())
            }
        }
        SupportInterval::Symmetric { delta } => {
            if a.abs() < SMALL_PARAM {
                delta * delta * a / 3.0
            } else {
                // coth form: better conditioned than the exponential ratio
                delta / (delta * a).tanh() - 1.0 / a
            }
        }
    })
}

/// Inverse-CDF sample at quantile `u` in `(0, 1)`.
pub fn sample(a: NaturalParameter, iv: SupportInterval, u: f64) -> Result<f64> {
    let a = a.0;
    if let SupportInterval::HalfLine = iv {
        check_halfline(a)?;
    }
    Ok(match iv {
        SupportInterval::HalfLine => (-u).ln_1p() / a,
        SupportInterval::Unit => {
            if a.abs() < SMALL_PARAM {
                u + a * u * (1.0 - u) / 2.0 + a * a * u * (1.0 - u) * (1.0 - 2.0 * u) / 6.0
            } else if a > 30.0 {
                1.0 + (u + (1.0 - u) * (-a).exp()).ln() / a
            } else {
                (u * a.exp_m1()).ln_1p() / a
            }
        }
        SupportInterval::Symmetric { delta } => {
            if a.abs() < SMALL_PARAM {
                let t0 = delta * (2.0 * u - 1.0);
                t0 + a * (delta * delta - t0 * t0) / 2.0
            } else if a > 0.0 {
                let e = (-2.0 * delta * a).exp();
                delta + (e + u * (1.0 - e)).ln() / a
            } else {
                -delta + (u * (2.0 * delta * a).exp_m1()).ln_1p() / a
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn unit_density_small_parameter_is_uniform() {
        for t in [0.0, 0.3, 1.0] {
            let p = density(NaturalParameter(0.0), SupportInterval::Unit, t).unwrap();
            assert_relative_eq!(p, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn unit_density_at_zero() {
        // a = 1, t = 0: a/(e^a - 1) = 1/(e-1)
        let p = density(NaturalParameter(1.0), SupportInterval::Unit, 0.0).unwrap();
        assert_relative_eq!(p, 1.0 / (E - 1.0), max_relative = 1e-14);
    }

    #[test]
    fn halfline_density_at_zero() {
        let p = density(NaturalParameter(-2.0), SupportInterval::HalfLine, 0.0).unwrap();
        assert_relative_eq!(p, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn halfline_rejects_nonnegative_parameter() {
        assert!(density(NaturalParameter(0.0), SupportInterval::HalfLine, 0.5).is_err());
        assert!(mean(NaturalParameter(1.0), SupportInterval::HalfLine).is_err());
    }

    #[test]
    fn cdf_endpoints() {
        let ivs = [
            SupportInterval::HalfLine,
            SupportInterval::Unit,
            SupportInterval::Symmetric { delta: 2.0 },
        ];
        for iv in ivs {
            let a = NaturalParameter(-1.5);
            let (lo, hi) = iv.bounds();
            assert_eq!(cdf(a, iv, lo).unwrap(), 0.0);
            let top = if hi.is_finite() { hi } else { 1e6 };
            assert!((cdf(a, iv, top).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_cdf_midpoint() {
        let p = cdf(NaturalParameter(1.0), SupportInterval::Unit, 0.5).unwrap();
        assert_relative_eq!(p, (0.5f64.exp() - 1.0) / (E - 1.0), max_relative = 1e-14);
    }

    #[test]
    fn means_in_the_small_parameter_limit() {
        assert_relative_eq!(
            mean(NaturalParameter(0.0), SupportInterval::Unit).unwrap(),
            0.5
        );
        assert_relative_eq!(
            mean(NaturalParameter(0.0), SupportInterval::Symmetric { delta: 1.0 }).unwrap(),
            0.0
        );
    }

    #[test]
    fn unit_mean_closed_form() {
        let m = mean(NaturalParameter(1.0), SupportInterval::Unit).unwrap();
        assert_relative_eq!(m, 1.0 / (1.0 - (-1.0f64).exp()) - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn sample_low_quantile_hits_lower_endpoint() {
        for iv in [
            SupportInterval::HalfLine,
            SupportInterval::Unit,
            SupportInterval::Symmetric { delta: 0.5 },
        ] {
            let t = sample(NaturalParameter(-1.0), iv, 1e-300).unwrap();
            let (lo, _) = iv.bounds();
            assert!((t - lo).abs() < 1e-9, "iv {iv:?}: {t} vs {lo}");
        }
    }

    #[test]
    fn uniform_sample_is_identity() {
        let t = sample(NaturalParameter(0.0), SupportInterval::Unit, 0.25).unwrap();
        assert_relative_eq!(t, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn taylor_branch_is_continuous() {
        // density/cdf/mean/sample must agree across the branch switch
        let eps = SMALL_PARAM;
        for iv in [SupportInterval::Unit, SupportInterval::Symmetric { delta: 2.5 }] {
            for t in [0.1, 0.4] {
                let below = density(NaturalParameter(eps * 0.99), iv, t).unwrap();
                let above = density(NaturalParameter(eps * 1.01), iv, t).unwrap();
                assert!((below - above).abs() < 1e-10, "{iv:?} density jump");
                let below = cdf(NaturalParameter(eps * 0.99), iv, t).unwrap();
                let above = cdf(NaturalParameter(eps * 1.01), iv, t).unwrap();
                assert!((below - above).abs() < 1e-10, "{iv:?} cdf jump");
            }
            let below = mean(NaturalParameter(eps * 0.99), iv).unwrap();
            let above = mean(NaturalParameter(eps * 1.01), iv).unwrap();
            assert!((below - above).abs() < 1e-10, "{iv:?} mean jump");
        }
    }

    #[test]
    fn extreme_parameters_stay_finite() {
        for iv in [SupportInterval::Unit, SupportInterval::Symmetric { delta: 5.0 }] {
            for a in [-500.0, -50.0, 50.0, 500.0] {
                let (lo, hi) = iv.bounds();
                for t in [lo, (lo + hi) / 2.0, hi] {
                    assert!(density(NaturalParameter(a), iv, t).unwrap().is_finite());
                    assert!(cdf(NaturalParameter(a), iv, t).unwrap().is_finite());
                }
                assert!(mean(NaturalParameter(a), iv).unwrap().is_finite());
                assert!(sample(NaturalParameter(a), iv, 0.37).unwrap().is_finite());
            }
        }
    }
}
