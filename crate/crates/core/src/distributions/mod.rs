//! Single-generation offspring laws.
//!
//! An [`OffspringDistribution`] is immutable after construction. Everything a
//! sampler or a condition checker needs repeatedly (alias table, hazard rates,
//! power-law normalization) is built once, either eagerly or behind a
//! `OnceLock`, so one value can be shared by every worker.

mod phi;
mod power_law;
mod sampling;

use std::sync::Mutex;

use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub use phi::Phi;
pub use power_law::PowerLaw;
pub use sampling::DEFAULT_CAP;

/// Parametric description of an offspring law; also its JSON config form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `probs[k] = P(X = k)`.
    FinitePmf { probs: Vec<f64> },
    /// `P(X = k) = p (1 - p)^k` with `p = 1 / (1 + mean)`.
    Geometric { mean: f64 },
    Poisson { lambda: f64 },
    /// `P(X = 0) = p0`, `P(X = k) = (1 - p0)(1 - b) b^(k-1)` for `k >= 1`.
    LinearFractional { p0: f64, b: f64 },
    /// `P(X = 0) = p0`, `P(X = k) = c k^-(2 + alpha)` for `k >= 1`.
    PowerLawTail { alpha: f64, p0: f64 },
}

impl Family {
    pub fn kind(&self) -> &'static str {
        match self {
            Family::FinitePmf { .. } => "finite_pmf",
            Family::Geometric { .. } => "geometric",
            Family::Poisson { .. } => "poisson",
            Family::LinearFractional { .. } => "linear_fractional",
            Family::PowerLawTail { .. } => "power_law_tail",
        }
    }
}

#[derive(Debug)]
enum Detail {
    Finite {
        alias: WeightedAliasIndex<f64>,
        /// `P(X = k) / P(X >= k)`
        hazard: Vec<f64>,
    },
    Geometric {
        p: f64,
    },
    Poisson,
    LinearFractional,
    PowerLaw(PowerLaw),
}

/// Asymptotic growth `h(x) = O(x^power log^log_power x)` of an integrand;
/// decides convergence of expectations under the power-law family.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Growth {
    pub power: f64,
    pub log_power: f64,
}

#[derive(Debug)]
pub struct OffspringDistribution {
    family: Family,
    mean: f64,
    variance: f64,
    detail: Detail,
    delta_cache: Mutex<Vec<(u64, f64)>>,
}

impl Clone for OffspringDistribution {
    fn clone(&self) -> Self {
        Self::new(self.family.clone()).expect("family was validated at construction")
    }
}

impl PartialEq for OffspringDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

impl Serialize for OffspringDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.family.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OffspringDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let family = Family::deserialize(deserializer)?;
        Self::new(family).map_err(serde::de::Error::custom)
    }
}

fn check_prob(name: &str, v: f64, allow_one: bool) -> Result<()> {
    let ok = v.is_finite() && v >= 0.0 && (v < 1.0 || (allow_one && v == 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!("{name} = {v} is not a valid probability")))
    }
}

impl OffspringDistribution {
    pub fn new(family: Family) -> Result<Self> {
        let (mean, variance, detail) = match &family {
            Family::FinitePmf { probs } => {
                if probs.is_empty() {
                    return Err(Error::InvalidDistribution("empty pmf".into()));
                }
                if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
                    return Err(Error::InvalidDistribution(format!("pmf entry {bad} is negative or not finite")));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDistribution(format!("pmf sums to {total}, not 1")));
                }
                let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
                let variance: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p * (k as f64 - mean).powi(2))
                    .sum();
                let mut hazard = vec![0.0; probs.len()];
                let mut upper = 0.0;
                for k in (0..probs.len()).rev() {
                    upper += probs[k];
                    hazard[k] = if upper > 0.0 { (probs[k] / upper).min(1.0) } else { 0.0 };
                }
                let alias = WeightedAliasIndex::new(probs.clone())
                    .map_err(|e| Error::InvalidDistribution(format!("alias table: {e}")))?;
                (mean, variance, Detail::Finite { alias, hazard })
            }
            Family::Geometric { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::Unsupported(format!("geometric mean {mean} must be finite and positive")));
                }
                let p = 1.0 / (1.0 + mean);
                (*mean, mean * (1.0 + mean), Detail::Geometric { p })
            }
            Family::Poisson { lambda } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::Unsupported(format!("poisson rate {lambda} must be finite and positive")));
                }
                (*lambda, *lambda, Detail::Poisson)
            }
            Family::LinearFractional { p0, b } => {
                check_prob("p0", *p0, false)?;
                check_prob("b", *b, false)?;
                let mean = (1.0 - p0) / (1.0 - b);
                let second = (1.0 - p0) * (1.0 + b) / (1.0 - b).powi(2);
                (mean, (second - mean * mean).max(0.0), Detail::LinearFractional)
            }
            Family::PowerLawTail { alpha, p0 } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::Unsupported(format!(
                        "power-law tail exponent alpha = {alpha} must be positive (finite mean)"
                    )));
                }
                check_prob("p0", *p0, false)?;
                let law = PowerLaw::new(*alpha, *p0);
                let mean = law.mean();
                let variance = law.variance();
                (mean, variance, Detail::PowerLaw(law))
            }
        };
        Ok(Self {
            family,
            mean,
            variance,
            detail,
            delta_cache: Mutex::new(Vec::new()),
        })
    }

    pub fn finite_pmf(probs: Vec<f64>) -> Result<Self> {
        Self::new(Family::FinitePmf { probs })
    }

    pub fn geometric(mean: f64) -> Result<Self> {
        Self::new(Family::Geometric { mean })
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::new(Family::Poisson { lambda })
    }

    pub fn linear_fractional(p0: f64, b: f64) -> Result<Self> {
        Self::new(Family::LinearFractional { p0, b })
    }

    pub fn power_law_tail(alpha: f64, p0: f64) -> Result<Self> {
        Self::new(Family::PowerLawTail { alpha, p0 })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match (&self.family, &self.detail) {
            (Family::FinitePmf { probs }, _) => probs.get(k as usize).copied().unwrap_or(0.0),
            (_, Detail::Geometric { p }) => p * (k as f64 * (-p).ln_1p()).exp(),
            (Family::Poisson { lambda }, _) => {
                let kf = k as f64;
                (kf * lambda.ln() - lambda - ln_gamma(kf + 1.0)).exp()
            }
            (Family::LinearFractional { p0, b }, _) => {
                if k == 0 {
                    *p0
                } else {
                    (1.0 - p0) * (1.0 - b) * b.powf((k - 1) as f64)
                }
            }
            (_, Detail::PowerLaw(law)) => law.pmf(k),
            _ => unreachable!("family and detail are built together"),
        }
    }

    /// `xi = log E[X]`.
    pub fn log_mean(&self) -> Result<f64> {
        if self.mean > 0.0 && self.mean.is_finite() {
            Ok(self.mean.ln())
        } else {
            Err(Error::Unsupported(format!("mean offspring {} is not in (0, inf)", self.mean)))
        }
    }

    /// `zeta = Var X / (E X)^2`; `+inf` exactly when the second moment diverges.
    pub fn normalized_variance(&self) -> f64 {
        self.variance / (self.mean * self.mean)
    }

    /// `U = |X / E[X] - 1|` at `x`.
    #[inline]
    fn deviation(&self, x: f64) -> f64 {
        (x / self.mean - 1.0).abs()
    }

    /// `E[h(X)]` for a nonnegative `h`, summed exactly on finite support and
    /// to a negligible remainder otherwise. Returns `+inf` when the power-law
    /// tail makes the expectation diverge.
    pub(crate) fn expect<H: Fn(f64) -> f64>(&self, h: H, growth: Growth) -> f64 {
        match (&self.family, &self.detail) {
            (Family::FinitePmf { probs }, _) => probs
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(k, p)| p * h(k as f64))
                .sum(),
            (Family::Poisson { lambda }, _) => {
                let sd = lambda.sqrt();
                let lo = (lambda - 14.0 * sd - 40.0).max(0.0).floor() as u64;
                let hi = (lambda + 14.0 * sd + 40.0 + 4.0 * growth.power.max(0.0)).ceil() as u64;
                let mut total = 0.0;
                for k in lo..=hi {
                    total += self.pmf(k) * h(k as f64);
                }
                total
            }
            (_, Detail::Geometric { p }) => geometric_tail_sum(0.0, 1.0, *p, 1.0 - p, self.mean, &h),
            (Family::LinearFractional { p0, b }, _) => {
                if *b == 0.0 {
                    return p0 * h(0.0) + (1.0 - p0) * h(1.0);
                }
                p0 * h(0.0) + geometric_tail_sum(1.0, 1.0 - p0, 1.0 - b, *b, self.mean, &h)
            }
            (_, Detail::PowerLaw(law)) => law.expect(&h, growth),
            _ => unreachable!("family and detail are built together"),
        }
    }

    /// `E |X e^-xi - 1|^(1 + delta)`. At `delta = 1` this is the normalized
    /// variance; `+inf` once the `(1 + delta)`-moment diverges. Cached per
    /// `delta`.
    pub fn delta_moment(&self, delta: f64) -> f64 {
        let key = delta.to_bits();
        if let Some(v) = self.cached_delta(key) {
            return v;
        }
        let exponent = 1.0 + delta;
        let v = self.expect(
            |x| self.deviation(x).powf(exponent),
            Growth { power: exponent, log_power: 0.0 },
        );
        self.delta_cache.lock().expect("cache lock").push((key, v));
        v
    }

    fn cached_delta(&self, key: u64) -> Option<f64> {
        let cache = self.delta_cache.lock().expect("cache lock");
        cache.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    /// `E[U phi(U * scale)]` with `U = |X e^-xi - 1|`.
    pub fn psi_moment(&self, phi: &Phi, scale: f64) -> f64 {
        if matches!(phi, Phi::Zero) {
            return 0.0;
        }
        let (power, log_power) = phi.growth();
        self.expect(
            |x| {
                let u = self.deviation(x);
                if u == 0.0 {
                    0.0
                } else {
                    u * phi.eval(u * scale)
                }
            },
            Growth { power: 1.0 + power, log_power },
        )
    }

    /// `E[X^2; X >= 2] / (E[X | X >= 1] * E[X; X >= 2])`, the per-generation
    /// ratio bounded uniformly by the classical moment condition.
    pub fn kersting_a_term(&self) -> Result<f64> {
        let p0 = self.pmf(0);
        let p1 = self.pmf(1);
        let p_ge1 = 1.0 - p0;
        let p_ge2 = match &self.family {
            Family::FinitePmf { probs } => probs.iter().skip(2).sum(),
            _ => 1.0 - p0 - p1,
        };
        if p_ge1 <= 0.0 || p_ge2 <= 0.0 {
            return Err(Error::NotApplicable(
                "P(X >= 1) or P(X >= 2) is zero; the ratio is undefined".into(),
            ));
        }
        let second = self.variance + self.mean * self.mean;
        if !second.is_finite() {
            return Ok(f64::INFINITY);
        }
        let (num, restricted_mean) = match &self.family {
            Family::FinitePmf { probs } => {
                let num: f64 = probs.iter().enumerate().skip(2).map(|(k, p)| (k * k) as f64 * p).sum();
                let den: f64 = probs.iter().enumerate().skip(2).map(|(k, p)| k as f64 * p).sum();
                (num, den)
            }
            _ => (second - p1, self.mean - p1),
        };
        let conditional_mean = self.mean / p_ge1;
        Ok(num / (conditional_mean * restricted_mean))
    }

    /// Probability generating function `f(s) = E s^X` on `[0, 1]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match (&self.family, &self.detail) {
            (Family::FinitePmf { probs }, _) => probs.iter().rev().fold(0.0, |acc, p| acc * s + p),
            (_, Detail::Geometric { p }) => p / (1.0 - (1.0 - p) * s),
            (Family::Poisson { lambda }, _) => (lambda * (s - 1.0)).exp(),
            (Family::LinearFractional { p0, b }, _) => p0 + (1.0 - p0) * (1.0 - b) * s / (1.0 - b * s),
            (_, Detail::PowerLaw(law)) => law.pgf(s),
            _ => unreachable!("family and detail are built together"),
        }
    }

    /// Extinction probability of the Galton-Watson process with this law in
    /// every generation: the smallest root of `f(s) = s` in `[0, 1]`.
    pub fn extinction_prob_constant_env(&self) -> f64 {
        if self.mean <= 1.0 {
            return 1.0;
        }
        let p0 = self.pmf(0);
        if p0 == 0.0 {
            return 0.0;
        }
        let g = |s: f64| self.pgf(s) - s;
        // g >= 0 on [0, q], g < 0 on (q, 1)
        let mut lo = 0.0;
        let mut hi = 1.0 - 1e-12;
        if g(hi) >= 0.0 {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        // f iterated from below increases monotonically to the smallest root
        let mut s = lo;
        for _ in 0..10_000 {
            let next = self.pgf(s);
            if next <= s || next > hi {
                break;
            }
            s = next;
        }
        s
    }
}

/// `weight * sum_{k >= start} p ratio^(k - start) h(k)`, summed until the
/// remainder is negligible. Covers the geometric family (start 0) and the
/// positive part of the linear fractional family (start 1).
fn geometric_tail_sum<H: Fn(f64) -> f64>(start: f64, weight: f64, p: f64, ratio: f64, mean: f64, h: &H) -> f64 {
    let mut total = 0.0;
    let mut mass = weight * p;
    let mut k = start;
    let horizon = mean.max(1.0) * 4.0 + 64.0;
    let mut steps: u64 = 0;
    loop {
        let term = mass * h(k);
        total += term;
        if k > horizon && term <= 1e-18 * total.max(f64::MIN_POSITIVE) * (1.0 - ratio) {
            break;
        }
        if mass == 0.0 || steps > 200_000_000 {
            break;
        }
        mass *= ratio;
        k += 1.0;
        steps += 1;
    }
    total
}
