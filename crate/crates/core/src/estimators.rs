//! Monte Carlo estimators over independent replicas.
//!
//! Replica `r` draws from the path stream `(seed, r)` and, in annealed runs,
//! from its own environment seed derived from `(seed, r)`. Replicas are
//! mapped in parallel and collected in index order; every reduction is a
//! sequential pass over that ordered vector, so results do not depend on the
//! number of worker threads.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::conditions::{a_l, ConditionReport};
use crate::distributions::DEFAULT_CAP;
use crate::environment::{quench, EnvironmentSpec, QuenchedEnvironment};
use crate::error::{Error, Result};
use crate::numeric::{quantile_sorted, sort_floats};
use crate::provenance::{digest, ext_float, opt_ext_float};
use crate::rng::{derive_seed, stream, Domain, Stream};
use crate::simulate::{default_r_n, halving_first_passage, path_functional, simulate_trajectory, uniform_grid, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    #[serde(with = "ext_float")]
    pub value: f64,
    #[serde(with = "ext_float")]
    pub std_error: f64,
    pub replicas: u64,
    pub master_seed: u64,
    pub config_digest: String,
}

impl McEstimate {
    fn proportion(hits: u64, replicas: u64, seed: u64, config_digest: &str) -> Self {
        let p = hits as f64 / replicas as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / replicas as f64).sqrt(),
            replicas,
            master_seed: seed,
            config_digest: config_digest.to_string(),
        }
    }

    fn mean_of(values: &[f64], seed: u64, config_digest: &str) -> Self {
        let (mean, var) = mean_var(values);
        Self {
            value: mean,
            std_error: (var / values.len() as f64).sqrt(),
            replicas: values.len() as u64,
            master_seed: seed,
            config_digest: config_digest.to_string(),
        }
    }

    /// `|value - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Two-pass sample mean and unbiased variance.
fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, if values.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

/// Where each replica's environment comes from.
#[derive(Debug, Clone)]
pub enum EnvSource {
    /// One fixed environment shared by all replicas.
    Quenched(Arc<QuenchedEnvironment>),
    /// A fresh environment per replica, quenched to `horizon`.
    Annealed { spec: EnvironmentSpec, horizon: usize },
}

impl EnvSource {
    pub fn quenched(env: QuenchedEnvironment) -> Self {
        EnvSource::Quenched(Arc::new(env))
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvSource::Quenched(env) => env.horizon(),
            EnvSource::Annealed { horizon, .. } => *horizon,
        }
    }

    pub fn digest(&self) -> String {
        match self {
            EnvSource::Quenched(env) => digest(&("quenched", env.digest())),
            EnvSource::Annealed { spec, horizon } => digest(&("annealed", spec, horizon)),
        }
    }
}

/// Simulation settings shared by the estimators.
#[derive(Debug, Clone, Copy)]
pub struct RunSettings {
    pub replicas: u64,
    pub seed: u64,
    pub cap: u64,
}

impl RunSettings {
    pub fn new(replicas: u64, seed: u64) -> Self {
        Self { replicas, seed, cap: DEFAULT_CAP }
    }
}

fn check_replicas(replicas: u64) -> Result<()> {
    if replicas == 0 {
        Err(Error::InvalidInput("replicas must be positive".into()))
    } else {
        Ok(())
    }
}

/// Runs `f` on replicas `0..replicas`, each simulated to generation `n`.
fn replicate<T, F>(source: &EnvSource, z0: u128, n: usize, run: &RunSettings, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Trajectory) -> T + Sync,
{
    check_replicas(run.replicas)?;
    if n > source.horizon() {
        return Err(Error::InvalidInput(format!("n = {n} exceeds the environment horizon {}", source.horizon())));
    }
    (0..run.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng: Stream = stream(run.seed, Domain::Path, r);
            let traj = match source {
                EnvSource::Quenched(env) => simulate_trajectory(env, z0, n, &mut rng, run.cap)?,
                EnvSource::Annealed { spec, horizon } => {
                    let env = quench(spec, derive_seed(run.seed, Domain::EnvironmentSeed, r), *horizon)?;
                    simulate_trajectory(&env, z0, n, &mut rng, run.cap)?
                }
            };
            Ok(f(&traj))
        })
        .collect()
}

/// Fraction of replicas with `Z_n > 0`.
pub fn mc_survival(source: &EnvSource, z0: u128, n: usize, run: &RunSettings) -> Result<McEstimate> {
    let d = digest(&("survival", source.digest(), z0.to_string(), n, run.replicas, run.cap));
    let alive = replicate(source, z0, n, run, |t| !t.z[n].is_zero())?;
    let hits = alive.iter().filter(|a| **a).count() as u64;
    Ok(McEstimate::proportion(hits, run.replicas, run.seed, &d))
}

/// Empirical `E W_n`; the martingale property makes it `z0`.
pub fn mc_mean_w(source: &EnvSource, z0: u128, n: usize, run: &RunSettings) -> Result<McEstimate> {
    let d = digest(&("mean_w", source.digest(), z0.to_string(), n, run.replicas, run.cap));
    let w = replicate(source, z0, n, run, |t| t.w(n))?;
    Ok(McEstimate::mean_of(&w, run.seed, &d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsEstimate {
    pub epsilon: f64,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub epsilon_low: f64,
    pub epsilon_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityCheck {
    pub p_survive_n: McEstimate,
    pub p_w_above: Vec<EpsEstimate>,
    /// Widest window of the grid spanning at least a decade over which
    /// `p_w_above` is flat within 3 combined standard errors.
    pub plateau: Option<Plateau>,
    /// `p_survive_n - p_w_above(eps*)`, with `eps*` the lower end of the
    /// plateau (the smallest grid point when there is none).
    #[serde(with = "ext_float")]
    pub gap: f64,
    #[serde(with = "ext_float")]
    pub gap_std_error: f64,
}

impl EqualityCheck {
    /// Plateau found and `|gap| < k` combined standard errors.
    pub fn holds(&self, k: f64) -> bool {
        self.plateau.is_some() && (self.gap == 0.0 || self.gap.abs() < k * self.gap_std_error)
    }
}

/// `eps` from `1e-8` to `1e-1` at 1, 2, 5 per decade. The low end matters
/// when `P(0 < W < eps)` decays like a small power of `eps`.
pub fn default_eps_grid() -> Vec<f64> {
    let mut out = Vec::new();
    for d in (2..=8).rev() {
        let scale = 10f64.powi(d);
        out.extend([1.0 / scale, 2.0 / scale, 5.0 / scale]);
    }
    out.push(0.1);
    out
}

/// `P(W_n > eps)` over a grid of `eps`, next to `P(Z_n > 0)` from the same
/// replicas.
pub fn mc_w_positivity(source: &EnvSource, z0: u128, n: usize, eps_grid: &[f64], run: &RunSettings) -> Result<EqualityCheck> {
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0)) || eps_grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidInput("eps_grid must be increasing and positive".into()));
    }
    let d = digest(&("w_positivity", source.digest(), z0.to_string(), n, eps_grid, run.replicas, run.cap));
    let w = replicate(source, z0, n, run, |t| t.w(n))?;
    let survive = w.iter().filter(|v| **v > 0.0).count() as u64;
    let p_survive_n = McEstimate::proportion(survive, run.replicas, run.seed, &d);
    let p_w_above: Vec<EpsEstimate> = eps_grid
        .iter()
        .map(|&epsilon| {
            let hits = w.iter().filter(|v| **v > epsilon).count() as u64;
            EpsEstimate { epsilon, estimate: McEstimate::proportion(hits, run.replicas, run.seed, &d) }
        })
        .collect();
    let flat = |i: usize, j: usize| {
        let (a, b) = (&p_w_above[i].estimate, &p_w_above[j].estimate);
        (a.value - b.value).abs() <= 3.0 * a.std_error.hypot(b.std_error)
    };
    let mut best: Option<(usize, usize)> = None;
    for i in 0..p_w_above.len() {
        for j in (i + 1..p_w_above.len()).rev() {
            if p_w_above[j].epsilon < 10.0 * p_w_above[i].epsilon * (1.0 - 1e-12) {
                break;
            }
            // p_w_above is nonincreasing, so the endpoints bound the window
            if flat(i, j) {
                let width = p_w_above[j].epsilon / p_w_above[i].epsilon;
                if best.is_none_or(|(bi, bj)| width > p_w_above[bj].epsilon / p_w_above[bi].epsilon) {
                    best = Some((i, j));
                }
                break;
            }
        }
    }
    let star = best.map_or(0, |(i, _)| i);
    let at = &p_w_above[star].estimate;
    Ok(EqualityCheck {
        gap: p_survive_n.value - at.value,
        gap_std_error: p_survive_n.std_error.hypot(at.std_error),
        plateau: best.map(|(i, j)| Plateau { epsilon_low: p_w_above[i].epsilon, epsilon_high: p_w_above[j].epsilon }),
        p_survive_n,
        p_w_above,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Check {
    pub estimate: McEstimate,
    /// `k zeta_m e^{-S_{m-1}}`.
    #[serde(with = "ext_float")]
    pub expected: f64,
}

/// Empirical `E[(W_m - W_{m-1})^2 | Z_0 = k]`.
pub fn mc_l2_increment(env: &QuenchedEnvironment, k: u128, m: usize, run: &RunSettings) -> Result<L2Check> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    let zeta = env.zeta(m);
    if !zeta.is_finite() {
        return Err(Error::NotApplicable(format!("generation {m} has infinite or undefined normalized variance")));
    }
    let source = EnvSource::quenched(env.clone());
    let d = digest(&("l2_increment", source.digest(), k.to_string(), m, run.replicas, run.cap));
    let sq = replicate(&source, k, m, run, |t| (t.w(m) - t.w(m - 1)).powi(2))?;
    Ok(L2Check { estimate: McEstimate::mean_of(&sq, run.seed, &d), expected: k as f64 * zeta * (-env.s(m - 1)).exp() })
}

/// Empirical covariance of `W_{n+m} - W_{n+m-1}` and `W_{n+m-1} - W_n`.
pub fn mc_increment_covariance(env: &QuenchedEnvironment, k: u128, n: usize, m: usize, run: &RunSettings) -> Result<McEstimate> {
    if m < 2 {
        return Err(Error::InvalidInput("m must be at least 2 for two non-trivial increments".into()));
    }
    let source = EnvSource::quenched(env.clone());
    let d = digest(&("increment_covariance", source.digest(), k.to_string(), n, m, run.replicas, run.cap));
    let top = n + m;
    let pairs = replicate(&source, k, top, run, |t| (t.w(top) - t.w(top - 1), t.w(top - 1) - t.w(n)))?;
    let len = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / len;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / len;
    let products: Vec<f64> = pairs.iter().map(|(a, b)| (a - ma) * (b - mb)).collect();
    let mut est = McEstimate::mean_of(&products, run.seed, &d);
    est.value *= len / (len - 1.0).max(1.0);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCheck {
    pub m: usize,
    pub estimate: McEstimate,
    /// `k a_n`, the bound from orthogonal increments.
    #[serde(with = "ext_float")]
    pub bound: f64,
    pub holds: bool,
}

/// Empirical `E[(W_{n+m} - W_n)^2 | Z_0 = k]` for each `m`, against `k a_n`.
pub fn mc_l2_span(env: &QuenchedEnvironment, k: u128, n: usize, m_list: &[usize], run: &RunSettings) -> Result<(ConditionReport, Vec<SpanCheck>)> {
    let top = n + m_list.iter().copied().max().unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let a = a_l(env, n, env.horizon() - n, 1e-12)?;
    if !a.is_finite() {
        return Err(Error::NotApplicable(format!("a_{n} is not certified finite ({:?})", a.verdict)));
    }
    let bound = k as f64 * a.upper_bound().expect("finite verdict carries a tail bound");
    let source = EnvSource::quenched(env.clone());
    let d = digest(&("l2_span", source.digest(), k.to_string(), n, m_list, run.replicas, run.cap));
    let spans = replicate(&source, k, top, run, |t| m_list.iter().map(|&m| (t.w(n + m) - t.w(n)).powi(2)).collect::<Vec<_>>())?;
    let checks = m_list
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let v: Vec<f64> = spans.iter().map(|s| s[i]).collect();
            let estimate = McEstimate::mean_of(&v, run.seed, &d);
            let holds = estimate.value <= bound + 3.0 * estimate.std_error;
            SpanCheck { m, estimate, bound, holds }
        })
        .collect();
    Ok((a, checks))
}

/// One-sided upper confidence limit for a binomial proportion
/// (Clopper-Pearson).
pub fn clopper_pearson_upper(hits: u64, n: u64, level: f64) -> f64 {
    if hits >= n {
        return 1.0;
    }
    let (a, b) = ((hits + 1) as f64, (n - hits) as f64);
    // solve I_x(a, b) = level
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingCheck {
    pub estimate: McEstimate,
    pub hits: u64,
    #[serde(with = "ext_float")]
    pub ucl99: f64,
    /// `4 a_start / k`.
    #[serde(with = "ext_float")]
    pub bound: f64,
    pub a_start: ConditionReport,
    pub holds: bool,
}

/// Probability that `Z_j e^{-(S_j - S_start)}` falls below `k / 2` within
/// `horizon` generations after `start`, given `Z_start = k`.
pub fn mc_halving_bound(env: &QuenchedEnvironment, k: u128, start: usize, horizon: usize, run: &RunSettings) -> Result<HalvingCheck> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let l = start.max(1);
    if l >= env.horizon() {
        return Err(Error::InvalidInput(format!("start {start} leaves no room in a horizon-{} environment", env.horizon())));
    }
    let a = a_l(env, l, env.horizon() - l, 1e-12)?;
    if !a.is_finite() {
        return Err(Error::NotApplicable(format!(
            "a_{l} is not certified finite ({:?}); the halving bound does not apply",
            a.verdict
        )));
    }
    let bound = 4.0 * a.upper_bound().expect("finite verdict carries a tail bound") / k as f64;
    let tail_env = if start == 0 { env.clone() } else { env.shifted(start)? };
    let source = EnvSource::quenched(tail_env);
    let d = digest(&("halving", source.digest(), k.to_string(), start, horizon, run.replicas, run.cap));
    let halved = replicate(&source, k, horizon, run, |t| halving_first_passage(t, 0).is_some())?;
    let hits = halved.iter().filter(|h| **h).count() as u64;
    let estimate = McEstimate::proportion(hits, run.replicas, run.seed, &d);
    let ucl99 = clopper_pearson_upper(hits, run.replicas, 0.99);
    Ok(HalvingCheck { estimate, hits, ucl99, bound, a_start: a, holds: ucl99 <= bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FltSummary {
    pub n: usize,
    pub r_n: usize,
    pub survivors: u64,
    #[serde(with = "opt_ext_float")]
    pub median: Option<f64>,
    #[serde(with = "opt_ext_float")]
    pub q90: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FltReport {
    pub replicas: u64,
    pub master_seed: u64,
    pub config_digest: String,
    pub grid_points: usize,
    pub summaries: Vec<FltSummary>,
}

impl FltReport {
    /// Medians strictly decrease along `n_list`.
    pub fn strictly_decreasing(&self) -> bool {
        let medians: Option<Vec<f64>> = self.summaries.iter().map(|s| s.median).collect();
        medians.is_some_and(|m| m.windows(2).all(|p| p[1] < p[0]))
    }
}

pub const FLT_GRID_POINTS: usize = 33;

/// `sup_t |Y_n(t) - Y_n(1)|` over a 33-point grid with `r_n = floor(sqrt n)`,
/// summarized over replicas with `Z_n > 0`. All `n` share the same
/// replicas, simulated once to the largest `n`.
pub fn mc_flt_discrepancy(source: &EnvSource, z0: u128, n_list: &[usize], run: &RunSettings) -> Result<FltReport> {
    mc_flt_discrepancy_on(source, z0, n_list, &uniform_grid(FLT_GRID_POINTS), run)
}

pub fn mc_flt_discrepancy_on(source: &EnvSource, z0: u128, n_list: &[usize], grid: &[f64], run: &RunSettings) -> Result<FltReport> {
    let top = n_list.iter().copied().max().ok_or_else(|| Error::InvalidInput("n_list is empty".into()))?;
    let d = digest(&("flt", source.digest(), z0.to_string(), n_list, grid, run.replicas, run.cap));
    let per_replica = replicate(source, z0, top, run, |t| -> Result<Vec<Option<f64>>> {
        n_list
            .iter()
            .map(|&n| {
                if t.z[n].is_zero() {
                    return Ok(None);
                }
                let prefix = truncated(t, n);
                let y = path_functional(&prefix, default_r_n(n), grid)?;
                let end = prefix.w(n);
                Ok(Some(y.iter().map(|v| (v - end).abs()).fold(0.0, f64::max)))
            })
            .collect()
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let summaries = n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut v: Vec<f64> = per_replica.iter().filter_map(|r| r[i]).collect();
            sort_floats(&mut v);
            let has = !v.is_empty();
            FltSummary {
                n,
                r_n: default_r_n(n),
                survivors: v.len() as u64,
                median: has.then(|| quantile_sorted(&v, 0.5)),
                q90: has.then(|| quantile_sorted(&v, 0.9)),
            }
        })
        .collect();
    Ok(FltReport { replicas: run.replicas, master_seed: run.seed, config_digest: d, grid_points: grid.len(), summaries })
}

/// The first `n` generations of a trajectory.
fn truncated(t: &Trajectory, n: usize) -> Trajectory {
    Trajectory {
        z: t.z[..=n].to_vec(),
        s: t.s.clone(),
        log_w: t.log_w[..=n].to_vec(),
        extinction_time: t.extinction_time.filter(|e| *e <= n),
        approx_from: t.approx_from.filter(|a| *a <= n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSummary {
    pub n: usize,
    pub survivors: u64,
    #[serde(with = "opt_ext_float")]
    pub median_w: Option<f64>,
    #[serde(with = "opt_ext_float")]
    pub q10_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub env_replicas: u64,
    pub path_replicas: u64,
    pub master_seed: u64,
    pub config_digest: String,
    pub summaries: Vec<CriticalSummary>,
    /// Largest ratio of conditional medians between consecutive `n`.
    #[serde(with = "opt_ext_float")]
    pub max_consecutive_ratio: Option<f64>,
    /// Fewer than `MIN_SURVIVORS` survivors at the largest `n`.
    pub inconclusive: bool,
}

pub const MIN_SURVIVORS: u64 = 500;

/// Annealed simulation: `env_replicas` environments, `path_replicas` paths
/// in each; quantiles of `W_n` among paths with `Z_n > 0`. Conditioning on
/// `Z_n > 0` stands in for the measure conditioned on a positive walk.
pub fn mc_conditioned_critical(
    spec: &EnvironmentSpec,
    z0: u128,
    n_list: &[usize],
    env_replicas: u64,
    path_replicas: u64,
    seed: u64,
    cap: u64,
) -> Result<CriticalReport> {
    let top = n_list.iter().copied().max().ok_or_else(|| Error::InvalidInput("n_list is empty".into()))?;
    check_replicas(env_replicas)?;
    check_replicas(path_replicas)?;
    let d = digest(&("critical", spec, z0.to_string(), n_list, env_replicas, path_replicas, cap));
    let per_env: Vec<Vec<Vec<Option<f64>>>> = (0..env_replicas)
        .into_par_iter()
        .map(|e| -> Result<Vec<Vec<Option<f64>>>> {
            let env = quench(spec, derive_seed(seed, Domain::EnvironmentSeed, e), top)?;
            (0..path_replicas)
                .map(|p| {
                    let mut rng = stream(seed, Domain::Path, e * path_replicas + p);
                    let t = simulate_trajectory(&env, z0, top, &mut rng, cap)?;
                    Ok(n_list.iter().map(|&n| (!t.z[n].is_zero()).then(|| t.w(n))).collect())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let summaries: Vec<CriticalSummary> = n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut v: Vec<f64> = per_env.iter().flatten().filter_map(|r| r[i]).collect();
            sort_floats(&mut v);
            let has = !v.is_empty();
            CriticalSummary {
                n,
                survivors: v.len() as u64,
                median_w: has.then(|| quantile_sorted(&v, 0.5)),
                q10_w: has.then(|| quantile_sorted(&v, 0.1)),
            }
        })
        .collect();
    let medians: Option<Vec<f64>> = summaries.iter().map(|s| s.median_w).collect();
    let max_consecutive_ratio = medians.and_then(|m| {
        m.windows(2).map(|p| p[0].max(p[1]) / p[0].min(p[1])).reduce(f64::max)
    });
    let largest = n_list.iter().enumerate().max_by_key(|(_, n)| **n).map(|(i, _)| i).expect("non-empty");
    let inconclusive = summaries[largest].survivors < MIN_SURVIVORS;
    Ok(CriticalReport {
        env_replicas,
        path_replicas,
        master_seed: seed,
        config_digest: d,
        summaries,
        max_consecutive_ratio,
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::OffspringDistribution;
    use crate::environment::critical_preset;

    fn constant(probs: Vec<f64>, h: usize) -> QuenchedEnvironment {
        QuenchedEnvironment::constant(OffspringDistribution::finite_pmf(probs).unwrap(), h).unwrap()
    }

    fn gw(h: usize) -> EnvSource {
        EnvSource::quenched(constant(vec![0.25, 0.25, 0.5], h))
    }

    #[test]
    fn survival_degenerate_cases() {
        let run = RunSettings::new(2000, 1);
        let doubling = EnvSource::quenched(constant(vec![0.0, 0.0, 1.0], 50));
        let s = mc_survival(&doubling, 1, 50, &run).unwrap();
        assert_eq!((s.value, s.std_error), (1.0, 0.0));
        let sub = EnvSource::quenched(constant(vec![0.5, 0.5], 200));
        assert_eq!(mc_survival(&sub, 1, 200, &run).unwrap().value, 0.0);
        assert!(mc_survival(&sub, 1, 200, &RunSettings::new(0, 1)).is_err());
    }

    #[test]
    fn survival_matches_fixed_point() {
        let s = mc_survival(&gw(60), 1, 60, &RunSettings::new(20_000, 5)).unwrap();
        assert!(s.within(0.5, 3.0), "{s:?}");
    }

    #[test]
    fn martingale_mean() {
        let m = mc_mean_w(&gw(30), 3, 30, &RunSettings::new(20_000, 6)).unwrap();
        assert!(m.within(3.0, 3.0), "{m:?}");
    }

    #[test]
    fn w_positivity_on_doubling() {
        let doubling = EnvSource::quenched(constant(vec![0.0, 0.0, 1.0], 20));
        let c = mc_w_positivity(&doubling, 1, 20, &default_eps_grid(), &RunSettings::new(100, 0)).unwrap();
        assert!(c.p_w_above.iter().all(|e| e.estimate.value == 1.0));
        assert_eq!(c.gap, 0.0);
        assert!(c.plateau.is_some());
    }

    #[test]
    fn w_positivity_is_monotone_in_eps() {
        let c = mc_w_positivity(&gw(40), 1, 40, &default_eps_grid(), &RunSettings::new(5000, 2)).unwrap();
        assert!(c.p_w_above.windows(2).all(|p| p[1].estimate.value <= p[0].estimate.value));
        assert!(c.holds(3.0), "{c:?}");
    }

    #[test]
    fn l2_increment_scales_with_k() {
        let env = constant(vec![0.25, 0.25, 0.5], 5);
        let one = mc_l2_increment(&env, 1, 1, &RunSettings::new(100_000, 3)).unwrap();
        assert!((one.expected - 0.44).abs() < 1e-12);
        assert!(one.estimate.within(0.44, 3.0), "{one:?}");
        let five = mc_l2_increment(&env, 5, 1, &RunSettings::new(100_000, 4)).unwrap();
        assert!((five.expected - 2.2).abs() < 1e-12);
        assert!(five.estimate.within(2.2, 3.0), "{five:?}");
        let heavy = QuenchedEnvironment::constant(OffspringDistribution::power_law_tail(0.5, 0.2).unwrap(), 3).unwrap();
        assert!(matches!(mc_l2_increment(&heavy, 1, 1, &RunSettings::new(10, 0)), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn halving_on_doubling_is_zero() {
        let env = constant(vec![0.0, 0.0, 1.0], 100);
        let h = mc_halving_bound(&env, 8, 0, 50, &RunSettings::new(100, 0)).unwrap();
        assert_eq!((h.estimate.value, h.bound), (0.0, 0.0));
        assert!(h.ucl99 > 0.0 && h.ucl99 < 0.05);
    }

    #[test]
    fn halving_bound_k16() {
        let env = constant(vec![0.25, 0.25, 0.5], 400);
        let h = mc_halving_bound(&env, 16, 0, 100, &RunSettings::new(5000, 9)).unwrap();
        assert!((h.bound - 0.55).abs() < 1e-9);
        assert!(h.holds, "{h:?}");
    }

    #[test]
    fn clopper_pearson_known_values() {
        // zero hits: 1 - (1 - level)^(1/n)
        let u = clopper_pearson_upper(0, 100, 0.99);
        assert!((u - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-12);
        // n = 1, one-sided: I_x(h+1, n-h) = level
        let u = clopper_pearson_upper(3, 10, 0.99);
        assert!((beta_reg(4.0, 7.0, u) - 0.99).abs() < 1e-12);
        assert_eq!(clopper_pearson_upper(5, 5, 0.99), 1.0);
    }

    #[test]
    fn flt_doubling_and_trivial_grid() {
        let doubling = EnvSource::quenched(constant(vec![0.0, 0.0, 1.0], 64));
        let r = mc_flt_discrepancy(&doubling, 1, &[16, 64], &RunSettings::new(10, 0)).unwrap();
        assert!(r.summaries.iter().all(|s| s.median.unwrap() < 1e-12));
        let r = mc_flt_discrepancy_on(&gw(64), 1, &[64], &[1.0], &RunSettings::new(200, 0)).unwrap();
        assert_eq!(r.summaries[0].median, Some(0.0));
    }

    #[test]
    fn critical_pipeline_degenerate_and_deterministic() {
        let doubling = EnvironmentSpec::constant(OffspringDistribution::finite_pmf(vec![0.0, 0.0, 1.0]).unwrap());
        let r = mc_conditioned_critical(&doubling, 1, &[8, 16], 3, 4, 0, DEFAULT_CAP).unwrap();
        assert!(r.summaries.iter().all(|s| s.median_w == Some(1.0) && s.survivors == 12));
        assert!(r.inconclusive);
        let a = mc_conditioned_critical(&critical_preset(), 1, &[16, 32], 50, 5, 7, DEFAULT_CAP).unwrap();
        let b = mc_conditioned_critical(&critical_preset(), 1, &[16, 32], 50, 5, 7, DEFAULT_CAP).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let run = RunSettings::new(3000, 11);
        let on = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let c = mc_w_positivity(&gw(50), 1, 50, &default_eps_grid(), &run).unwrap();
                serde_json::to_string(&c).unwrap()
            })
        };
        assert_eq!(on(1), on(4));
    }
}
