use std::sync::OnceLock;

use rand::Rng;

use super::Growth;
use crate::numeric::{hurwitz_zeta, power_sum, riemann_zeta, tail_integral};

/// Terms summed directly before the tail integral takes over.
const DIRECT_TERMS: u64 = 4096;
/// Hazard rates tabulated for the multinomial head of a generation total.
pub(crate) const HAZARD_TABLE: usize = 1 << 14;

/// `P(X = 0) = p0`, `P(X = k) = c k^-s` for `k >= 1`, `s = 2 + alpha`.
///
/// The positive part `Y = X | X >= 1` is a zeta law; its normalization is
/// the Riemann zeta value at `s`, computed once.
#[derive(Debug)]
pub struct PowerLaw {
    pub alpha: f64,
    pub s: f64,
    pub p0: f64,
    zeta_s: f64,
    hazard: OnceLock<Vec<f64>>,
}

impl PowerLaw {
    pub fn new(alpha: f64, p0: f64) -> Self {
        let s = 2.0 + alpha;
        Self {
            alpha,
            s,
            p0,
            zeta_s: riemann_zeta(s),
            hazard: OnceLock::new(),
        }
    }

    /// Normalizing constant `c = (1 - p0) / zeta(s)`.
    pub fn scale(&self) -> f64 {
        (1.0 - self.p0) / self.zeta_s
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            self.p0
        } else {
            self.scale() * (k as f64).powf(-self.s)
        }
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.p0) * riemann_zeta(self.s - 1.0) / self.zeta_s
    }

    pub fn variance(&self) -> f64 {
        if self.alpha <= 1.0 {
            return f64::INFINITY;
        }
        let second = (1.0 - self.p0) * riemann_zeta(self.s - 2.0) / self.zeta_s;
        let m = self.mean();
        (second - m * m).max(0.0)
    }

    /// `P(Y >= k)` for the positive part, `k >= 1`.
    pub fn positive_survival(&self, k: f64) -> f64 {
        if k <= 1.0 {
            1.0
        } else {
            hurwitz_zeta(self.s, k) / self.zeta_s
        }
    }

    /// `P(Y = k) / P(Y >= k)` for `k = 1..=HAZARD_TABLE` (index `k - 1`).
    pub(crate) fn hazard(&self) -> &[f64] {
        self.hazard.get_or_init(|| {
            (1..=HAZARD_TABLE)
                .map(|k| {
                    let kf = k as f64;
                    (kf.powf(-self.s) / hurwitz_zeta(self.s, kf)).min(1.0)
                })
                .collect()
        })
    }

    pub(crate) fn converges(&self, growth: Growth) -> bool {
        let margin = self.s - growth.power;
        margin > 1.0 || (margin == 1.0 && growth.log_power < -1.0)
    }

    /// `E[h(X)]`: direct sum over `k <= DIRECT_TERMS`, then a midpoint-rule
    /// integral with its first derivative correction for the remainder.
    pub(crate) fn expect<H: Fn(f64) -> f64>(&self, h: &H, growth: Growth) -> f64 {
        if !self.converges(growth) {
            return f64::INFINITY;
        }
        let c = self.scale();
        let f = |x: f64| c * x.powf(-self.s) * h(x);
        let mut total = 0.0;
        for k in (1..=DIRECT_TERMS).rev() {
            total += f(k as f64);
        }
        let x0 = DIRECT_TERMS as f64 + 0.5;
        let integral = tail_integral(f, x0, 1e-14);
        let slope = f(x0 + 0.5) - f(x0 - 0.5);
        total + integral + slope / 24.0 + self.p0 * h(0.0)
    }

    pub fn pgf(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 1.0;
        }
        if x <= 0.0 {
            return self.p0;
        }
        let c = self.scale();
        let mut total = 0.0;
        let mut power = 1.0;
        let mut k = 1u64;
        loop {
            power *= x;
            let term = (k as f64).powf(-self.s) * power;
            total += term;
            if term < 1e-19 || k >= 4_000_000 {
                break;
            }
            k += 1;
        }
        // the remainder lies in [0, x^(k+1) zeta(s, k+1)]; take its midpoint
        let remainder = 0.5 * power * x * hurwitz_zeta(self.s, (k + 1) as f64);
        self.p0 + c * (total + remainder)
    }

    /// Exact draw from `Y | Y >= t` for integer `t >= 1`.
    ///
    /// Proposal: `floor` of a continuous Pareto on `[t, inf)` with the same
    /// exponent. The target/proposal ratio `r(k)` is decreasing in `k`, so
    /// accepting with `r(k) / r(t)` is exact.
    pub fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R, t: f64) -> f64 {
        let shape = self.s - 1.0;
        let ratio = |k: f64| -> f64 {
            // k^-s / int_k^{k+1} x^-s dx, up to the constant (s - 1)
            let d = -(-shape * (1.0 / k).ln_1p()).exp_m1();
            shape / (k * d)
        };
        let r_max = ratio(t);
        loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let x = t * u.powf(-1.0 / shape);
            let k = x.floor();
            if !k.is_finite() {
                continue;
            }
            let v: f64 = rng.random();
            if k > 9.0e15 || v * r_max <= ratio(k) {
                return k;
            }
        }
    }

    /// Moments of `Y | Y <= t`: `(P(Y <= t), mean, variance)`.
    pub fn bulk_moments(&self, t: f64) -> (f64, f64, f64) {
        let m0 = power_sum(self.s, 1.0, t);
        let m1 = power_sum(self.s - 1.0, 1.0, t);
        let m2 = power_sum(self.s - 2.0, 1.0, t);
        let mean = m1 / m0;
        (m0 / self.zeta_s, mean, (m2 / m0 - mean * mean).max(0.0))
    }

    /// Smallest cut `t` with `n * P(Y > t) <= budget`, using the integral
    /// approximation of the zeta tail.
    pub(crate) fn cut_for(&self, n: f64, budget: f64) -> f64 {
        if n <= budget {
            return 0.0;
        }
        let shape = self.s - 1.0;
        (n / (budget * shape * self.zeta_s)).powf(1.0 / shape).floor().max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn normalization_matches_brute_force() {
        // sum_{k=1}^{10^7} k^-2.5 plus the integral tail with midpoint correction
        let law = PowerLaw::new(0.5, 0.2);
        let n = 10_000_000u64;
        let direct: f64 = (1..=n).rev().map(|k| (k as f64).powf(-2.5)).sum();
        let x0 = n as f64 + 0.5;
        let tail = x0.powf(-1.5) / 1.5;
        let zeta = direct + tail;
        assert!((law.zeta_s - zeta).abs() < 1e-12, "{} vs {}", law.zeta_s, zeta);
        let total_mass: f64 = law.p0 + law.scale() * zeta;
        assert!((total_mass - 1.0).abs() < 1e-12);
        let expected_pmf3 = 0.8 / zeta * 3f64.powf(-2.5);
        assert!((law.pmf(3) - expected_pmf3).abs() < 1e-14);
    }

    #[test]
    fn tail_sampler_respects_threshold() {
        let law = PowerLaw::new(0.5, 0.0);
        let mut rng = stream(3, Domain::Path, 0);
        for _ in 0..10_000 {
            assert!(law.sample_tail(&mut rng, 17.0) >= 17.0);
        }
    }

    #[test]
    fn tail_sampler_frequencies() {
        // P(Y = k | Y >= 5) for k = 5..8 against empirical frequencies
        let law = PowerLaw::new(0.5, 0.0);
        let mut rng = stream(11, Domain::Path, 0);
        let n = 400_000;
        let mut counts = [0u32; 4];
        for _ in 0..n {
            let k = law.sample_tail(&mut rng, 5.0) as usize;
            if k < 9 {
                counts[k - 5] += 1;
            }
        }
        let tail = hurwitz_zeta(2.5, 5.0);
        for (i, c) in counts.iter().enumerate() {
            let p = (5.0 + i as f64).powf(-2.5) / tail;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = *c as f64 / n as f64;
            assert!((freq - p).abs() < 4.0 * se, "k={} freq {freq} p {p}", i + 5);
        }
    }

    #[test]
    fn bulk_moments_match_direct_sums() {
        let law = PowerLaw::new(0.5, 0.3);
        let t = 5000.0;
        let (mass, mean, var) = law.bulk_moments(t);
        let w: Vec<f64> = (1..=5000).map(|k| (k as f64).powf(-2.5)).collect();
        let m0: f64 = w.iter().sum();
        let m1: f64 = w.iter().enumerate().map(|(i, x)| x * (i + 1) as f64).sum();
        let m2: f64 = w.iter().enumerate().map(|(i, x)| x * ((i + 1) as f64).powi(2)).sum();
        assert!((mass - m0 / law.zeta_s).abs() < 1e-12);
        assert!((mean - m1 / m0).abs() < 1e-10 * mean);
        let v = m2 / m0 - (m1 / m0).powi(2);
        assert!((var - v).abs() < 1e-9 * v);
    }
}
