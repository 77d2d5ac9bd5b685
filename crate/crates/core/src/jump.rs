//! Jump-mark law: a mixture of exponentials on the positive side and
//! (possibly truncated) exponentials on the negative side, plus the
//! Poisson arrival machinery and the complex-exponent integrals the
//! Fourier pricer needs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::CounterRng;

/// Tail mass below which the support is truncated for quadrature.
const TAIL_EPS: f64 = 1e-15;

/// Positive-side component: density `weight * rate * exp(-rate z)` on z >= 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PosTerm {
    pub weight: f64,
    pub rate: f64,
}

/// Negative-side component on (-truncation, 0); `truncation = None` leaves
/// the tail unbounded below.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NegTerm {
    pub weight: f64,
    pub rate: f64,
    #[serde(default)]
    pub truncation: Option<f64>,
}

impl NegTerm {
    /// Density normalizer: rate / (1 - e^{-rate R}) for truncated terms.
    fn normalizer(&self) -> f64 {
        match self.truncation {
            Some(r) => self.rate / (-(-self.rate * r).exp_m1()),
            None => self.rate,
        }
    }

    /// Mean magnitude of the (truncated) exponential.
    fn mean_abs(&self) -> f64 {
        match self.truncation {
            Some(r) => {
                let e = (-self.rate * r).exp();
                1.0 / self.rate - r * e / (1.0 - e)
            }
            None => 1.0 / self.rate,
        }
    }
}

/// Mixture-of-exponentials jump-mark law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpDistribution {
    pos_terms: Vec<PosTerm>,
    neg_terms: Vec<NegTerm>,
}

impl JumpDistribution {
    /// Build and validate a mixture. Zero-weight components are dropped;
    /// the remaining weights must sum to 1 within 1e-12 and all rates and
    /// truncations must be strictly positive.
    pub fn new(pos_terms: Vec<PosTerm>, neg_terms: Vec<NegTerm>) -> Result<Self> {
        let pos: Vec<PosTerm> = pos_terms.into_iter().filter(|t| t.weight != 0.0).collect();
        let neg: Vec<NegTerm> = neg_terms.into_iter().filter(|t| t.weight != 0.0).collect();
        if pos.is_empty() && neg.is_empty() {
            return Err(Error::InvalidInput("jump law has no components".into()));
        }
        let mut total = 0.0;
        for t in &pos {
            if !(t.weight > 0.0) || !(t.rate > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "positive component needs weight > 0 and rate > 0, got ({}, {})",
                    t.weight, t.rate
                )));
            }
            total += t.weight;
        }
        for t in &neg {
            if !(t.weight > 0.0) || !(t.rate > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "negative component needs weight > 0 and rate > 0, got ({}, {})",
                    t.weight, t.rate
                )));
            }
            if let Some(r) = t.truncation {
                if !(r > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "truncation must be strictly positive, got {r}"
                    )));
                }
            }
            total += t.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "component weights sum to {total}, expected 1"
            )));
        }
        Ok(JumpDistribution {
            pos_terms: pos,
            neg_terms: neg,
        })
    }

    /// Two-sided single-component law, untruncated on the negative side.
    pub fn double_exponential(p: f64, eta: f64, q: f64, theta: f64) -> Result<Self> {
        Self::new(
            vec![PosTerm {
                weight: p,
                rate: eta,
            }],
            vec![NegTerm {
                weight: q,
                rate: theta,
                truncation: None,
            }],
        )
    }

    /// Two-sided single-component law with the negative tail cut at `r`.
    pub fn truncated_double_exponential(
        p: f64,
        eta: f64,
        q: f64,
        theta: f64,
        r: f64,
    ) -> Result<Self> {
        Self::new(
            vec![PosTerm {
                weight: p,
                rate: eta,
            }],
            vec![NegTerm {
                weight: q,
                rate: theta,
                truncation: Some(r),
            }],
        )
    }

    pub fn pos_terms(&self) -> &[PosTerm] {
        &self.pos_terms
    }

    pub fn neg_terms(&self) -> &[NegTerm] {
        &self.neg_terms
    }

    /// True when some negative component has no truncation, so marks are
    /// not bounded below and the positivity guarantee cannot hold.
    pub fn unbounded_below(&self) -> bool {
        self.neg_terms.iter().any(|t| t.truncation.is_none())
    }

    /// Lower end of the support: -max R_j, 0 without negative components,
    /// `None` when unbounded below.
    pub fn lower_bound(&self) -> Option<f64> {
        let mut lo: f64 = 0.0;
        for t in &self.neg_terms {
            lo = lo.min(-t.truncation?);
        }
        Some(lo)
    }

    /// Point beyond which the positive tail carries less than `eps` mass.
    pub fn effective_upper_bound(&self, eps: f64) -> f64 {
        let m = self.pos_terms.len().max(1) as f64;
        self.pos_terms
            .iter()
            .map(|t| (m * t.weight / eps).ln().max(0.0) / t.rate)
            .fold(0.0, f64::max)
    }

    /// Negative counterpart; equals the true lower bound when truncated.
    pub fn effective_lower_bound(&self, eps: f64) -> f64 {
        let m = self.neg_terms.len().max(1) as f64;
        self.neg_terms
            .iter()
            .map(|t| match t.truncation {
                Some(r) => -r,
                None => -(m * t.weight / eps).ln().max(0.0) / t.rate,
            })
            .fold(0.0, f64::min)
    }

    /// Panels for integrating against the density: consecutive intervals
    /// between the effective support ends and the density's structural
    /// breakpoints (the component truncations and the origin). Quadrature
    /// across those points would silently lose the discontinuity.
    pub fn support_segments(&self, eps: f64) -> Vec<(f64, f64)> {
        let lo = self.effective_lower_bound(eps);
        let hi = self.effective_upper_bound(eps);
        let mut cuts = vec![lo];
        for t in &self.neg_terms {
            if let Some(r) = t.truncation {
                if -r > lo {
                    cuts.push(-r);
                }
            }
        }
        if lo < 0.0 {
            cuts.push(0.0);
        }
        if hi > 0.0 {
            cuts.push(hi);
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
        cuts.dedup();
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Mixture density; zero outside the support. The value at z = 0 is the
    /// right limit (the positive side owns the origin).
    pub fn density(&self, z: f64) -> f64 {
        if z >= 0.0 {
            self.pos_terms
                .iter()
                .map(|t| t.weight * t.rate * (-t.rate * z).exp())
                .sum()
        } else {
            self.neg_terms
                .iter()
                .filter(|t| t.truncation.is_none_or(|r| z > -r))
                .map(|t| t.weight * t.normalizer() * (t.rate * z).exp())
                .sum()
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, z: f64) -> f64 {
        if z >= 0.0 {
            let neg_mass: f64 = self.neg_terms.iter().map(|t| t.weight).sum();
            let pos: f64 = self
                .pos_terms
                .iter()
                .map(|t| t.weight * (-(-t.rate * z).exp_m1()))
                .sum();
            neg_mass + pos
        } else {
            self.neg_terms
                .iter()
                .map(|t| match t.truncation {
                    Some(r) if z <= -r => 0.0,
                    Some(r) => {
                        let e = (-t.rate * r).exp();
                        t.weight * ((t.rate * z).exp() - e) / (1.0 - e)
                    }
                    None => t.weight * (t.rate * z).exp(),
                })
                .sum()
        }
    }

    /// Closed-form mean of the mark law.
    pub fn mean(&self) -> f64 {
        let pos: f64 = self.pos_terms.iter().map(|t| t.weight / t.rate).sum();
        let neg: f64 = self.neg_terms.iter().map(|t| t.weight * t.mean_abs()).sum();
        pos - neg
    }

    /// Closed-form mean of |Y|.
    pub fn mean_abs(&self) -> f64 {
        let pos: f64 = self.pos_terms.iter().map(|t| t.weight / t.rate).sum();
        let neg: f64 = self.neg_terms.iter().map(|t| t.weight * t.mean_abs()).sum();
        pos + neg
    }

    /// Draw one mark by inverse CDF: pick a component by weight, then invert
    /// the (truncated) exponential. Deterministic cost, no rejection.
    pub fn sample(&self, rng: &mut CounterRng) -> f64 {
        let u = rng.uniform();
        let mut acc = 0.0;
        for t in &self.pos_terms {
            acc += t.weight;
            if u <= acc {
                return rng.exponential(t.rate);
            }
        }
        for (i, t) in self.neg_terms.iter().enumerate() {
            acc += t.weight;
            if u <= acc || i + 1 == self.neg_terms.len() {
                let v = rng.uniform();
                return match t.truncation {
                    Some(r) => {
                        let e = (-t.rate * r).exp();
                        (e + v * (1.0 - e)).ln() / t.rate
                    }
                    None => v.ln() / t.rate,
                };
            }
        }
        // Rounding pushed u past the cumulative sum; fall back to the last
        // positive component.
        let t = self.pos_terms.last().expect("validated non-empty mixture");
        rng.exponential(t.rate)
    }
}

/// Jump part of the driving process: arrival intensity plus mark law.
/// The implied measure on mark space is `intensity * density(z) dz`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevySpec {
    pub intensity: f64,
    pub dist: JumpDistribution,
}

impl LevySpec {
    pub fn new(intensity: f64, dist: JumpDistribution) -> Result<Self> {
        if !(intensity > 0.0) || !intensity.is_finite() {
            return Err(Error::InvalidInput(format!(
                "jump intensity must be strictly positive, got {intensity}"
            )));
        }
        Ok(LevySpec { intensity, dist })
    }

    /// Mean mark size `L` (not scaled by the intensity).
    pub fn mean_jump(&self) -> f64 {
        self.dist.mean()
    }

    /// The moment `integral (1 + |z|)^q` of the jump measure, q >= 1.
    /// Finite for every mixture-of-exponentials law; evaluated by quadrature.
    pub fn q_moment(&self, q: f64) -> Result<f64> {
        if q < 1.0 {
            return Err(Error::InvalidInput(format!("q must be >= 1, got {q}")));
        }
        let f = |z: f64| (1.0 + z.abs()).powf(q) * self.dist.density(z);
        let mut total = 0.0;
        for (a, b) in self
            .dist
            .support_segments(TAIL_EPS / self.intensity.max(1.0))
        {
            total += quad::integrate(f, a, b, 1e-13)?;
        }
        Ok(self.intensity * total)
    }
}

/// Homogeneous Poisson arrivals on (t0, t1], strictly increasing.
pub fn sample_poisson_times(intensity: f64, t0: f64, t1: f64, rng: &mut CounterRng) -> Vec<f64> {
    debug_assert!(intensity > 0.0 && t0 <= t1);
    let mut times = Vec::new();
    let mut t = t0;
    loop {
        t += rng.exponential(intensity);
        if t > t1 {
            return times;
        }
        times.push(t);
    }
}

/// e^x - x - 1 with a series branch to dodge cancellation near zero.
fn exp_m1_m_x(x: Complex64) -> Complex64 {
    if x.norm() < 1e-4 {
        let x2 = x * x;
        x2 * 0.5 + x2 * x * (1.0 / 6.0) + x2 * x2 * (1.0 / 24.0) + x2 * x2 * x * (1.0 / 120.0)
    } else {
        x.exp() - x - 1.0
    }
}

/// The complex-exponent mark integral
/// `integral [ (1 + z g)^c - c ln(1 + z g) - 1 ] f_Y(z) dz`
/// over the support, with the power taken on the real branch
/// (1 + z g > 0 is required and checked).
///
/// This is the per-unit-intensity building block of the characteristic
/// exponent of the compensated log-jump integral.
pub fn complex_jump_integral(
    dist: &JumpDistribution,
    g_val: f64,
    c: Complex64,
) -> Result<Complex64> {
    if g_val == 0.0 || c == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }

    // 1 + z g must stay positive over the whole support.
    if g_val > 0.0 {
        match dist.lower_bound() {
            None => {
                return Err(Error::Domain(
                    "1 + z g reaches zero: marks unbounded below with g > 0".into(),
                ))
            }
            Some(lo) => {
                if 1.0 + lo * g_val <= 0.0 {
                    return Err(Error::Domain(format!(
                        "1 + z g = {} at the support edge z = {lo}",
                        1.0 + lo * g_val
                    )));
                }
            }
        }
    } else if !dist.pos_terms.is_empty() {
        return Err(Error::Domain(
            "1 + z g reaches zero: marks unbounded above with g < 0".into(),
        ));
    }

    let f = |z: f64| {
        let l = Complex64::new((z * g_val).ln_1p(), 0.0);
        exp_m1_m_x(c * l) * dist.density(z)
    };
    let mut total = Complex64::new(0.0, 0.0);
    for (a, b) in dist.support_segments(TAIL_EPS) {
        total += quad::integrate_complex(f, a, b, 1e-13)?;
    }
    Ok(total)
}
