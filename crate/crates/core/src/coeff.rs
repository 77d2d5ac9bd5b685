//! Coefficient catalog.
//!
//! Models reference their drift and jump-scale coefficients from a small
//! closed catalog rather than arbitrary user code, so every entry carries
//! exact bounds and a Lipschitz constant by construction. The validator
//! still spot-checks those declarations on a dense grid.

use serde::{Deserialize, Serialize};

/// A bounded Lipschitz coefficient x -> value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        value: f64,
    },
    /// offset + amplitude * sin(x / scale)
    ScaledSine {
        amplitude: f64,
        scale: f64,
        offset: f64,
    },
    /// clamp(slope * x + intercept, lo, hi)
    AffineClipped {
        slope: f64,
        intercept: f64,
        lo: f64,
        hi: f64,
    },
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Coefficient::Constant { value } => value,
            Coefficient::ScaledSine {
                amplitude,
                scale,
                offset,
            } => offset + amplitude * (x / scale).sin(),
            Coefficient::AffineClipped {
                slope,
                intercept,
                lo,
                hi,
            } => (slope * x + intercept).clamp(lo, hi),
        }
    }

    /// Declared range [lo, hi] of the coefficient.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Coefficient::Constant { value } => (value, value),
            Coefficient::ScaledSine {
                amplitude, offset, ..
            } => (offset - amplitude.abs(), offset + amplitude.abs()),
            Coefficient::AffineClipped { lo, hi, .. } => (lo, hi),
        }
    }

    /// Declared Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Coefficient::Constant { .. } => 0.0,
            Coefficient::ScaledSine {
                amplitude, scale, ..
            } => (amplitude / scale).abs(),
            Coefficient::AffineClipped { slope, .. } => slope.abs(),
        }
    }

    /// Largest |value| the declared range allows.
    pub fn sup_abs(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }

    pub fn is_zero(&self) -> bool {
        let (lo, hi) = self.bounds();
        lo == 0.0 && hi == 0.0
    }

    /// Well-formedness of the catalog parameters themselves.
    pub fn well_formed(&self) -> bool {
        match *self {
            Coefficient::Constant { value } => value.is_finite(),
            Coefficient::ScaledSine {
                amplitude,
                scale,
                offset,
            } => amplitude.is_finite() && offset.is_finite() && scale.is_finite() && scale != 0.0,
            Coefficient::AffineClipped {
                slope,
                intercept,
                lo,
                hi,
            } => {
                slope.is_finite()
                    && intercept.is_finite()
                    && lo.is_finite()
                    && hi.is_finite()
                    && lo <= hi
            }
        }
    }
}

/// Initial segment phi on [-b, 0].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialSegment {
    Constant {
        value: f64,
    },
    /// scale * exp(rate * t); phi(0) = scale.
    ExpSegment {
        scale: f64,
        rate: f64,
    },
}

impl InitialSegment {
    pub fn constant(value: f64) -> Self {
        InitialSegment::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            InitialSegment::Constant { value } => value,
            InitialSegment::ExpSegment { scale, rate } => scale * (rate * t).exp(),
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Declared Hoelder data (exponent, constant) on [-b, 0]. Both catalog
    /// entries are smooth, so the exponent is 1 and the constant is the
    /// largest slope magnitude over the segment.
    pub fn holder(&self, delay: f64) -> (f64, f64) {
        match *self {
            InitialSegment::Constant { .. } => (1.0, 0.0),
            InitialSegment::ExpSegment { scale, rate } => {
                let sup = if rate >= 0.0 {
                    scale.abs()
                } else {
                    (scale * (rate * -delay).exp()).abs()
                };
                (1.0, (rate * sup).abs())
            }
        }
    }

    pub fn well_formed(&self) -> bool {
        match *self {
            InitialSegment::Constant { value } => value.is_finite(),
            InitialSegment::ExpSegment { scale, rate } => scale.is_finite() && rate.is_finite(),
        }
    }
}
