use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Normal, Poisson, StandardNormal};

use super::{Detail, Family, OffspringDistribution};
use crate::error::{Error, Result};

/// Parent count above which a family without an exact aggregate closure is
/// summed with the Gaussian approximation.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// Totals sampled through `f64` intermediates stay exact up to here.
const EXACT_F64: f64 = 9_007_199_254_740_992.0;
/// Expected number of exactly drawn tail values per power-law generation.
const TAIL_BUDGET: f64 = 64.0;
/// Below this many parents, individual draws beat any closure.
const SMALL_PARENTS: u128 = 16;

const U128_MAX_F64: f64 = 3.402_823_669_209_385e38;

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("probability in (0, 1)").sample(rng)
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("rate is positive and below the sampler limit").sample(rng)
}

/// Negative binomial (failures before the `n`-th success) as a gamma-mixed
/// Poisson, exact for `n * scale` below the `f64` integer limit.
fn negative_binomial<R: Rng + ?Sized>(rng: &mut R, n: f64, odds: f64) -> f64 {
    if n == 0.0 || odds == 0.0 {
        return 0.0;
    }
    let rate = Gamma::new(n, odds).expect("positive shape and scale").sample(rng);
    poisson(rng, rate)
}

/// `round(N(n * mean, n * var))`, clamped at zero.
fn gaussian_total<R: Rng + ?Sized>(rng: &mut R, n: f64, mean: f64, var: f64) -> Result<u128> {
    let mu = n * mean;
    if mu >= 0.5 * U128_MAX_F64 {
        return Err(Error::Overflow { log_estimate: n.ln() + mean.ln() });
    }
    let sd = (n * var).sqrt();
    let z: f64 = StandardNormal.sample(rng);
    let x = (mu + sd * z).round().max(0.0);
    if x >= U128_MAX_F64 {
        return Err(Error::Overflow { log_estimate: x.ln() });
    }
    Ok(x as u128)
}

fn to_total(x: f64) -> Result<u128> {
    if x >= U128_MAX_F64 {
        Err(Error::Overflow { log_estimate: x.ln() })
    } else {
        Ok(x as u128)
    }
}

impl OffspringDistribution {
    /// One exact draw from the law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match (&self.family, &self.detail) {
            (_, Detail::Finite { alias, .. }) => alias.sample(rng) as u64,
            (_, Detail::Geometric { p }) => Geometric::new(*p).expect("p in (0, 1]").sample(rng),
            (Family::Poisson { lambda }, _) => poisson(rng, *lambda) as u64,
            (Family::LinearFractional { p0, b }, _) => {
                if rng.random::<f64>() < *p0 {
                    0
                } else {
                    1 + Geometric::new(1.0 - b).expect("b in [0, 1)").sample(rng)
                }
            }
            (_, Detail::PowerLaw(law)) => {
                if rng.random::<f64>() < law.p0 {
                    0
                } else {
                    let k = law.sample_tail(rng, 1.0);
                    if k >= u64::MAX as f64 {
                        u64::MAX
                    } else {
                        k as u64
                    }
                }
            }
            _ => unreachable!("family and detail are built together"),
        }
    }

    /// Sum of `parents` independent draws, one at a time.
    pub fn sum_of_draws<R: Rng + ?Sized>(&self, parents: u64, rng: &mut R) -> u128 {
        (0..parents).map(|_| self.sample(rng) as u128).sum()
    }

    /// Total offspring of `parents` individuals, i.e. one generation step.
    ///
    /// Exact closures: multinomial counts for finite support, Poisson
    /// additivity, negative binomial for geometric and linear fractional
    /// laws, and a multinomial head with exactly drawn tail for power-law
    /// laws up to `cap` parents. Returns `(total, approximated)`; the flag is
    /// set when a Gaussian aggregate stands in for the exact law (counts past
    /// the exact `f64` range, or power-law parents beyond `cap`).
    pub fn sample_generation_total<R: Rng + ?Sized>(
        &self,
        parents: u128,
        rng: &mut R,
        cap: u64,
    ) -> Result<(u128, bool)> {
        if parents == 0 {
            return Ok((0, false));
        }
        let n = parents as f64;
        if n * self.mean >= 0.5 * U128_MAX_F64 {
            return Err(Error::Overflow { log_estimate: n.ln() + self.mean.ln() });
        }
        if parents <= SMALL_PARENTS {
            return Ok((self.sum_of_draws(parents as u64, rng), false));
        }
        match (&self.family, &self.detail) {
            (_, Detail::Finite { hazard, .. }) => {
                if n > EXACT_F64 {
                    return Ok((gaussian_total(rng, n, self.mean, self.variance)?, true));
                }
                let mut remaining = parents as u64;
                let mut total: u128 = 0;
                let last = hazard.len() - 1;
                for (k, h) in hazard.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let count = if k == last { remaining } else { binomial(rng, remaining, *h) };
                    total += k as u128 * count as u128;
                    remaining -= count;
                }
                Ok((total, false))
            }
            (_, Detail::Geometric { .. }) => {
                if n * self.mean > 0.25 * EXACT_F64 {
                    return Ok((gaussian_total(rng, n, self.mean, self.variance)?, true));
                }
                Ok((to_total(negative_binomial(rng, n, self.mean))?, false))
            }
            (Family::Poisson { lambda }, _) => {
                if n * lambda > 0.25 * EXACT_F64 {
                    return Ok((gaussian_total(rng, n, self.mean, self.variance)?, true));
                }
                Ok((to_total(poisson(rng, n * lambda))?, false))
            }
            (Family::LinearFractional { p0, b }, _) => {
                if n * self.mean > 0.25 * EXACT_F64 {
                    return Ok((gaussian_total(rng, n, self.mean, self.variance)?, true));
                }
                let positive = binomial(rng, parents as u64, 1.0 - p0) as f64;
                let extra = negative_binomial(rng, positive, b / (1.0 - b));
                Ok((to_total(positive + extra)?, false))
            }
            (_, Detail::PowerLaw(law)) => self.power_law_total(law, parents, rng, cap),
            _ => unreachable!("family and detail are built together"),
        }
    }

    fn power_law_total<R: Rng + ?Sized>(
        &self,
        law: &super::PowerLaw,
        parents: u128,
        rng: &mut R,
        cap: u64,
    ) -> Result<(u128, bool)> {
        let n = parents as f64;
        if parents > cap as u128 && law.alpha > 1.0 {
            return Ok((gaussian_total(rng, n, self.mean, self.variance)?, true));
        }
        let positive: u128 = if parents <= u64::MAX as u128 {
            binomial(rng, parents as u64, 1.0 - law.p0) as u128
        } else {
            let p = 1.0 - law.p0;
            let z: f64 = StandardNormal.sample(rng);
            (n * p + (n * p * law.p0).sqrt() * z).round().max(0.0) as u128
        };
        if positive == 0 {
            return Ok((0, false));
        }
        let npos = positive as f64;
        let cut = law.cut_for(npos, TAIL_BUDGET);

        if parents <= cap as u128 {
            let hazard = law.hazard();
            let head = cut.min(hazard.len() as f64) as usize;
            let mut total: f64 = 0.0;
            if npos <= 4.0 * (head as f64 + TAIL_BUDGET) {
                for _ in 0..positive {
                    total += law.sample_tail(rng, 1.0);
                }
                return Ok((to_total(total)?, false));
            }
            let mut remaining = positive as u64;
            for (i, h) in hazard.iter().take(head).enumerate() {
                if remaining == 0 {
                    break;
                }
                let count = binomial(rng, remaining, *h);
                total += (i + 1) as f64 * count as f64;
                remaining -= count;
            }
            let from = head as f64 + 1.0;
            for _ in 0..remaining {
                total += law.sample_tail(rng, from);
            }
            return Ok((to_total(total)?, false));
        }

        // Infinite variance past the cap: bounded bulk `Y <= cut` summed as a
        // Gaussian with its exact truncated moments, values above the cut
        // drawn one by one.
        let tail_p = 1.0 - law.bulk_moments(cut).0;
        let tail_count = if positive <= u64::MAX as u128 {
            binomial(rng, positive as u64, tail_p)
        } else {
            poisson(rng, npos * tail_p) as u64
        };
        let bulk = npos - tail_count as f64;
        let (_, bulk_mean, bulk_var) = law.bulk_moments(cut);
        let mu = bulk * bulk_mean;
        let sd = (bulk * bulk_var).sqrt();
        let normal = Normal::new(mu, sd.max(f64::MIN_POSITIVE)).expect("finite moments");
        let mut total = normal.sample(rng).round().max(0.0);
        for _ in 0..tail_count {
            total += law.sample_tail(rng, cut + 1.0);
        }
        Ok((to_total(total)?, true))
    }
}
