//! The monotone piecewise-C¹ scalar nonlinearity `d` with a single kink.
//!
//! `d(t) = d1(t)` for `t <= t_bar` and `d2(t)` for `t > t_bar`, where both
//! branches are monotonically increasing, continuously differentiable, and
//! agree at the kink. Branches are restricted to validated monotone affine
//! and monotone cubic descriptors so that the directional derivative, the
//! Bouligand subdifferential, and the Clarke generalized gradient are exact.

use serde::{Deserialize, Serialize};

use crate::grid::Field;
use crate::{Error, Result};

/// Scalar branch descriptor: a monotone affine or monotone cubic polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Branch {
    Affine { intercept: f64, slope: f64 },
    /// `c0 + c1 t + c2 t^2 + c3 t^3`, monotone on all of R.
    Cubic { c0: f64, c1: f64, c2: f64, c3: f64 },
}

impl Branch {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Branch::Affine { intercept, slope } => intercept + slope * t,
            Branch::Cubic { c0, c1, c2, c3 } => c0 + t * (c1 + t * (c2 + t * c3)),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            Branch::Affine { slope, .. } => slope,
            Branch::Cubic { c1, c2, c3, .. } => c1 + t * (2.0 * c2 + t * 3.0 * c3),
        }
    }

    /// Monotone increase on all of R: the derivative polynomial must be
    /// nonnegative everywhere.
    fn validate_monotone(&self) -> Result<()> {
        let ok = match *self {
            Branch::Affine { slope, .. } => slope >= 0.0,
            Branch::Cubic { c1, c2, c3, .. } => {
                if c3 == 0.0 {
                    c2 == 0.0 && c1 >= 0.0
                } else {
                    // q(t) = c1 + 2 c2 t + 3 c3 t^2 >= 0 for all t
                    c3 > 0.0 && 4.0 * c2 * c2 - 12.0 * c3 * c1 <= 0.0
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidData(format!(
                "branch {self:?} is not monotonically increasing"
            )))
        }
    }
}

/// Piecewise-C¹ nonlinearity with one kink at `t_bar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pc1Function {
    pub t_bar: f64,
    pub d1: Branch,
    pub d2: Branch,
}

impl Pc1Function {
    /// Validated constructor: branches must be monotone and agree at the kink.
    pub fn new(t_bar: f64, d1: Branch, d2: Branch) -> Result<Pc1Function> {
        d1.validate_monotone()?;
        d2.validate_monotone()?;
        let gap = (d1.value(t_bar) - d2.value(t_bar)).abs();
        let scale = 1.0 + d1.value(t_bar).abs().max(d2.value(t_bar).abs());
        if gap > 1e-14 * scale {
            return Err(Error::InvalidData(format!(
                "branches disagree at the kink: d1({t_bar}) - d2({t_bar}) = {gap:e}"
            )));
        }
        Ok(Pc1Function { t_bar, d1, d2 })
    }

    /// `d(t) = max(t, 0)`: kink at 0, left branch 0, right branch t.
    pub fn max0() -> Pc1Function {
        Pc1Function {
            t_bar: 0.0,
            d1: Branch::Affine { intercept: 0.0, slope: 0.0 },
            d2: Branch::Affine { intercept: 0.0, slope: 1.0 },
        }
    }

    /// Two affine pieces with slopes `s1`, `s2 >= 0` meeting at `t_bar`,
    /// normalized so that `d(t_bar) = s1 * t_bar`.
    pub fn kink(s1: f64, s2: f64, t_bar: f64) -> Result<Pc1Function> {
        if s1 < 0.0 || s2 < 0.0 {
            return Err(Error::InvalidData(format!(
                "kink slopes must be nonnegative, got {s1}, {s2}"
            )));
        }
        Pc1Function::new(
            t_bar,
            Branch::Affine { intercept: 0.0, slope: s1 },
            Branch::Affine { intercept: (s1 - s2) * t_bar, slope: s2 },
        )
    }

    /// Strictly monotone C¹ control group: `d(t) = t + t^3/3` on both sides.
    pub fn smooth() -> Pc1Function {
        let c = Branch::Cubic { c0: 0.0, c1: 1.0, c2: 0.0, c3: 1.0 / 3.0 };
        Pc1Function { t_bar: 0.0, d1: c, d2: c }
    }

    /// True when `d1' = d2'` at the kink, i.e. `d` is C¹.
    pub fn is_differentiable(&self) -> bool {
        self.d1.deriv(self.t_bar) == self.d2.deriv(self.t_bar)
    }

    /// Jump `d1'(t_bar) - d2'(t_bar)` of the derivative across the kink.
    pub fn slope_jump(&self) -> f64 {
        self.d1.deriv(self.t_bar) - self.d2.deriv(self.t_bar)
    }

    /// Largest branch slope over the interval `[lo, hi]` (both branches).
    pub fn max_slope_on(&self, lo: f64, hi: f64) -> f64 {
        let candidates = [lo, hi, self.t_bar];
        let mut m: f64 = 0.0;
        for &t in &candidates {
            let t = t.clamp(lo, hi);
            m = m.max(self.d1.deriv(t)).max(self.d2.deriv(t));
        }
        // cubic derivative is quadratic: check its vertex too
        for b in [&self.d1, &self.d2] {
            if let Branch::Cubic { c2, c3, .. } = *b {
                if c3 != 0.0 {
                    let v = -c2 / (3.0 * c3);
                    if v >= lo && v <= hi {
                        m = m.max(b.deriv(v));
                    }
                }
            }
        }
        m
    }
}

/// Evaluate `d` at a scalar argument.
pub fn pc1_eval(d: &Pc1Function, t: f64) -> f64 {
    if t <= d.t_bar {
        d.d1.value(t)
    } else {
        d.d2.value(t)
    }
}

/// Directional derivative `d'(t; s)`: the branch slope matching the side of
/// the kink, and at `t = t_bar` the slope matching the sign of `s`.
/// Kink membership for scalar calls is bit equality `t == t_bar`.
pub fn pc1_dir_deriv(d: &Pc1Function, t: f64, s: f64) -> f64 {
    if t < d.t_bar {
        d.d1.deriv(t) * s
    } else if t > d.t_bar {
        d.d2.deriv(t) * s
    } else if s < 0.0 {
        d.d1.deriv(t) * s
    } else if s > 0.0 {
        d.d2.deriv(t) * s
    } else {
        0.0
    }
}

/// Bouligand subdifferential of `d` at `t`: one element away from the kink,
/// the two branch slopes at the kink (collapsed when they coincide).
pub fn bouligand_subdiff(d: &Pc1Function, t: f64) -> Vec<f64> {
    if t < d.t_bar {
        vec![d.d1.deriv(t)]
    } else if t > d.t_bar {
        vec![d.d2.deriv(t)]
    } else {
        let (s1, s2) = (d.d1.deriv(t), d.d2.deriv(t));
        if s1 == s2 {
            vec![s1]
        } else {
            vec![s1, s2]
        }
    }
}

/// Clarke generalized gradient `[min, max]` of the Bouligand subdifferential.
pub fn clarke_interval(d: &Pc1Function, t: f64) -> (f64, f64) {
    let s = bouligand_subdiff(d, t);
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Nodewise application of `d` to a field.
pub fn superpose(d: &Pc1Function, y: &Field) -> Field {
    y.map(|t| pc1_eval(d, t))
}

/// Nodewise left-branch slope `d1'(y)`.
pub fn superpose_d1_deriv(d: &Pc1Function, y: &Field) -> Field {
    y.map(|t| d.d1.deriv(t))
}

/// Nodewise right-branch slope `d2'(y)`.
pub fn superpose_d2_deriv(d: &Pc1Function, y: &Field) -> Field {
    y.map(|t| d.d2.deriv(t))
}

/// Nodewise `d'(y)` using the side of the kink; at nodes inside the band
/// `|y - t_bar| <= delta` the supplied `at_kink` slope selector decides.
pub fn superpose_deriv_banded(
    d: &Pc1Function,
    y: &Field,
    delta: f64,
    at_kink: impl Fn(f64) -> f64,
) -> Field {
    y.map(|t| {
        if (t - d.t_bar).abs() <= delta {
            at_kink(t)
        } else if t < d.t_bar {
            d.d1.deriv(t)
        } else {
            d.d2.deriv(t)
        }
    })
}
