//! Numerical checks of the convergence conditions on a quenched environment.
//!
//! Sums run over at most `horizon` terms and stop early once a certified
//! tail bound drops below `tol`. The tail certificate looks at the trailing
//! blocks of the summed range: if every block has positive average drift
//! `>= mu` and the per-generation moments there are at most `m`, the
//! remainder of a series with weights `e^{-r (S_g - S_l)}` is bounded by
//! `m e^{-r (S_end - S_l)} / (1 - e^{-r mu})`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Phi;
use crate::environment::{quench, EnvironmentSpec, QuenchedEnvironment};
use crate::error::{Error, Result};
use crate::numeric::{quantile_sorted, sort_floats};
use crate::provenance::{ext_float, opt_ext_float};
use crate::rng::{derive_seed, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesId {
    #[serde(rename = "a_l")]
    AL,
    #[serde(rename = "a_l_delta")]
    ALDelta,
    #[serde(rename = "a_l_psi")]
    ALPsi,
    #[serde(rename = "jagers")]
    Jagers,
    #[serde(rename = "kersting_A")]
    KerstingA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Divergent,
    Inconclusive,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub series_id: SeriesId,
    pub l: usize,
    /// Partial sum; for the condition-(A) check, the running maximum.
    #[serde(with = "ext_float")]
    pub partial_sum: f64,
    /// Index of the last term included.
    pub horizon: usize,
    #[serde(with = "opt_ext_float")]
    pub tail_bound: Option<f64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl ConditionReport {
    /// `partial_sum + tail_bound` when certified.
    pub fn upper_bound(&self) -> Option<f64> {
        self.tail_bound.map(|t| self.partial_sum + t)
    }

    pub fn is_finite(&self) -> bool {
        self.verdict == Verdict::Finite
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesOptions {
    /// Block length of the drift certificate.
    pub window: usize,
    /// Partial sums above this, with non-positive trailing drift, are
    /// reported divergent.
    pub divergence_threshold: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { window: 64, divergence_threshold: 1e9 }
    }
}

/// Drift summary of the trailing blocks of `(lo, end]`.
struct Trailing {
    min_drift: f64,
    max_drift: f64,
    first: usize,
}

const TRAILING_BLOCKS: usize = 4;

fn trailing(env: &QuenchedEnvironment, lo: usize, end: usize, window: usize) -> Option<Trailing> {
    let available = end.checked_sub(lo)?;
    if available == 0 {
        return None;
    }
    let w = window.min(available).max(1);
    let blocks = (available / w).clamp(1, TRAILING_BLOCKS);
    let mut min_drift = f64::INFINITY;
    let mut max_drift = f64::NEG_INFINITY;
    for b in 0..blocks {
        let hi = end - b * w;
        let avg = env.s_diff(hi, hi - w) / w as f64;
        min_drift = min_drift.min(avg);
        max_drift = max_drift.max(avg);
    }
    Some(Trailing { min_drift, max_drift, first: end - blocks * w + 1 })
}

fn geometric_tail(moment_sup: f64, log_weight: f64, rate_mu: f64) -> f64 {
    if moment_sup == 0.0 {
        return 0.0;
    }
    moment_sup * log_weight.exp() / -(-rate_mu).exp_m1()
}

fn check_range(env: &QuenchedEnvironment, l: usize, horizon: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidInput("l must be at least 1".into()));
    }
    if l + horizon > env.horizon() {
        return Err(Error::InvalidInput(format!(
            "l + horizon = {} exceeds the environment horizon {}",
            l + horizon,
            env.horizon()
        )));
    }
    Ok(())
}

/// The weighted series are undefined once a generation with `P(X = 0) = 1`
/// sends `S` to `-inf`; such ranges get a not-applicable report.
fn killed(id: SeriesId, env: &QuenchedEnvironment, l: usize, horizon: usize) -> Option<ConditionReport> {
    let g = env.first_killing().filter(|g| *g <= l + horizon)?;
    Some(ConditionReport {
        series_id: id,
        l,
        partial_sum: f64::NAN,
        horizon,
        tail_bound: None,
        verdict: Verdict::NotApplicable,
        note: Some(format!("generation {g} has P(X = 0) = 1; extinction is certain")),
    })
}

/// `sum_{i >= 0} m(l + i) e^{-rate (S_{l+i} - S_l)}`.
#[allow(clippy::too_many_arguments)]
fn weighted_series<M: Fn(usize) -> f64>(
    id: SeriesId,
    env: &QuenchedEnvironment,
    l: usize,
    horizon: usize,
    tol: f64,
    opts: &SeriesOptions,
    rate: f64,
    moment: M,
) -> Result<ConditionReport> {
    check_range(env, l, horizon)?;
    if let Some(r) = killed(id, env, l, horizon) {
        return Ok(r);
    }
    let report = |partial_sum, i, tail_bound, verdict, note: Option<String>| ConditionReport {
        series_id: id,
        l,
        partial_sum,
        horizon: i,
        tail_bound,
        verdict,
        note,
    };
    let mut partial = 0.0;
    let mut tail = None;
    for i in 0..=horizon {
        let g = l + i;
        let m = moment(g);
        if !m.is_finite() {
            let note = format!("term at generation {g} is infinite");
            return Ok(report(f64::INFINITY, i, None, Verdict::Divergent, Some(note)));
        }
        partial += m * (-rate * env.s_diff(g, l)).exp();
        if (i + 1) % opts.window != 0 && i != horizon {
            continue;
        }
        tail = None;
        if let Some(t) = trailing(env, l, g, opts.window) {
            if t.min_drift > 0.0 {
                let sup = (t.first..=g).map(&moment).fold(0.0, f64::max);
                tail = Some(geometric_tail(sup, -rate * env.s_diff(g, l), rate * t.min_drift));
            }
            if partial > opts.divergence_threshold && t.max_drift <= 0.0 {
                let note = "partial sums passed the divergence threshold with non-positive drift".to_string();
                return Ok(report(partial, i, None, Verdict::Divergent, Some(note)));
            }
        }
        if tail.is_some_and(|b| b <= tol) {
            return Ok(report(partial, i, tail, Verdict::Finite, None));
        }
    }
    match tail {
        Some(_) => Ok(report(partial, horizon, tail, Verdict::Finite, Some("tail bound above tol".into()))),
        None => Ok(report(partial, horizon, None, Verdict::Inconclusive, Some("no positive-drift certificate".into()))),
    }
}

/// `a_l = sum_{i >= 0} zeta_{l+i} e^{-(S_{l+i} - S_l)}`.
pub fn a_l(env: &QuenchedEnvironment, l: usize, horizon: usize, tol: f64) -> Result<ConditionReport> {
    a_l_with(env, l, horizon, tol, &SeriesOptions::default())
}

pub fn a_l_with(
    env: &QuenchedEnvironment,
    l: usize,
    horizon: usize,
    tol: f64,
    opts: &SeriesOptions,
) -> Result<ConditionReport> {
    weighted_series(SeriesId::AL, env, l, horizon, tol, opts, 1.0, |g| env.zeta(g))
}

/// `a_l^(delta) = sum_{j >= 0} zeta^(delta)_{l+j} e^{-delta (S_{l+j} - S_l)}`
/// with `zeta^(delta) = E U^{1+delta}`.
pub fn a_l_delta(env: &QuenchedEnvironment, l: usize, delta: f64, horizon: usize, tol: f64) -> Result<ConditionReport> {
    a_l_delta_with(env, l, delta, horizon, tol, &SeriesOptions::default())
}

pub fn a_l_delta_with(
    env: &QuenchedEnvironment,
    l: usize,
    delta: f64,
    horizon: usize,
    tol: f64,
    opts: &SeriesOptions,
) -> Result<ConditionReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1], got {delta}")));
    }
    weighted_series(SeriesId::ALDelta, env, l, horizon, tol, opts, delta, |g| env.dist(g).delta_moment(delta))
}

/// `sum_{j >= 1} E[U_{l+j} phi(U_{l+j} e^{-(S_{l+j-1} - S_l)})]`, i.e. the
/// psi-series with both constants set to 1.
///
/// The tail uses a power majorant `phi(x) <= C x^p`, with `p` lowered until
/// `E U^{1+p}` is finite over the trailing blocks.
pub fn a_l_psi(env: &QuenchedEnvironment, l: usize, phi: &Phi, horizon: usize, tol: f64) -> Result<ConditionReport> {
    a_l_psi_with(env, l, phi, horizon, tol, &SeriesOptions::default())
}

pub fn a_l_psi_with(
    env: &QuenchedEnvironment,
    l: usize,
    phi: &Phi,
    horizon: usize,
    tol: f64,
    opts: &SeriesOptions,
) -> Result<ConditionReport> {
    phi.validate().map_err(|e| Error::Unsupported(e.to_string()))?;
    if horizon == 0 {
        return Err(Error::InvalidInput("the psi-series starts at j = 1; horizon must be positive".into()));
    }
    check_range(env, l, horizon)?;
    if let Some(r) = killed(SeriesId::ALPsi, env, l, horizon) {
        return Ok(r);
    }
    let report = |partial_sum, j, tail_bound, verdict, note: Option<String>| ConditionReport {
        series_id: SeriesId::ALPsi,
        l,
        partial_sum,
        horizon: j,
        tail_bound,
        verdict,
        note,
    };
    let mut partial = 0.0;
    let mut tail = None;
    for j in 1..=horizon {
        let g = l + j;
        let scale = (-env.s_diff(g - 1, l)).exp();
        let term = env.dist(g).psi_moment(phi, scale);
        if !term.is_finite() {
            let note = format!("term at generation {g} is infinite");
            return Ok(report(f64::INFINITY, j, None, Verdict::Divergent, Some(note)));
        }
        partial += term;
        if j % opts.window != 0 && j != horizon {
            continue;
        }
        tail = None;
        if let Some(t) = trailing(env, l, g, opts.window) {
            if t.min_drift > 0.0 {
                tail = psi_tail(env, phi, t.first, g, -env.s_diff(g, l), t.min_drift);
            }
        }
        if tail.is_some_and(|b| b <= tol) {
            return Ok(report(partial, j, tail, Verdict::Finite, None));
        }
    }
    match tail {
        Some(_) => Ok(report(partial, horizon, tail, Verdict::Finite, Some("tail bound above tol".into()))),
        None => Ok(report(partial, horizon, None, Verdict::Inconclusive, Some("no positive-drift certificate".into()))),
    }
}

fn psi_tail(env: &QuenchedEnvironment, phi: &Phi, first: usize, end: usize, log_scale: f64, mu: f64) -> Option<f64> {
    let mut max_power = 1.0;
    for _ in 0..8 {
        if let Some((c, p)) = phi.power_majorant(max_power) {
            if c == 0.0 {
                return Some(0.0);
            }
            let sup = (first..=end).map(|g| env.dist(g).delta_moment(p)).fold(0.0, f64::max);
            if sup.is_finite() {
                return Some(c * geometric_tail(sup, p * log_scale, p * mu));
            }
        }
        max_power *= 0.5;
    }
    None
}

/// Partial sums of `sum_i (1 - P(X_i = 1))`. Divergence (the population
/// either dies out or explodes) is certified when terms of size at least
/// `JAGERS_EPS` keep a positive density in both halves of the range;
/// a finite sum when the trailing terms vanish or decay geometrically.
pub fn jagers_criterion(env: &QuenchedEnvironment, horizon: usize) -> Result<ConditionReport> {
    check_range(env, 1, horizon.saturating_sub(1))?;
    let mut report = ConditionReport {
        series_id: SeriesId::Jagers,
        l: 1,
        partial_sum: 0.0,
        horizon,
        tail_bound: None,
        verdict: Verdict::Inconclusive,
        note: None,
    };
    if let Some(g) = (1..=horizon).find(|&g| env.dist(g).pmf(0) >= 1.0) {
        report.verdict = Verdict::NotApplicable;
        report.note = Some(format!("generation {g} has P(X = 0) = 1"));
        return Ok(report);
    }
    let terms: Vec<f64> = (1..=horizon).map(|g| 1.0 - env.dist(g).pmf(1)).collect();
    report.partial_sum = terms.iter().sum();
    let half = horizon / 2;
    let density = |s: &[f64]| s.iter().filter(|t| **t >= JAGERS_EPS).count() as f64 / s.len().max(1) as f64;
    if half >= 1 && density(&terms[..half]) >= JAGERS_DENSITY && density(&terms[half..]) >= JAGERS_DENSITY {
        report.verdict = Verdict::Divergent;
        return Ok(report);
    }
    let w = 64.min(horizon);
    let tail = &terms[horizon - w..];
    if tail.iter().all(|t| *t == 0.0) {
        report.tail_bound = Some(0.0);
        report.verdict = Verdict::Finite;
    } else if w >= 2 && tail.iter().all(|t| *t > 0.0) {
        let r = tail.windows(2).map(|p| p[1] / p[0]).fold(0.0, f64::max);
        if r < 1.0 {
            report.tail_bound = Some(tail[w - 1] * r / (1.0 - r));
            report.verdict = Verdict::Finite;
        }
    }
    Ok(report)
}

const JAGERS_EPS: f64 = 1e-3;
const JAGERS_DENSITY: f64 = 0.1;

/// Running maximum of the condition-(A) ratio over generations
/// `1..=horizon`. A finite horizon cannot certify a supremum, so finite
/// values are reported inconclusive; an infinite term is divergent.
pub fn kersting_condition_a(env: &QuenchedEnvironment, horizon: usize) -> Result<ConditionReport> {
    check_range(env, 1, horizon.saturating_sub(1))?;
    let mut max = f64::NEG_INFINITY;
    let mut skipped = 0usize;
    for g in 1..=horizon {
        match env.dist(g).kersting_a_term() {
            Ok(v) => max = max.max(v),
            Err(Error::NotApplicable(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let verdict = if skipped == horizon {
        Verdict::NotApplicable
    } else if max.is_infinite() {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    Ok(ConditionReport {
        series_id: SeriesId::KerstingA,
        l: 1,
        partial_sum: if skipped == horizon { f64::NAN } else { max },
        horizon,
        tail_bound: None,
        verdict,
        note: (skipped > 0).then(|| format!("{skipped} generations without a defined ratio")),
    })
}

/// Series tracked by the tightness diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TightnessSeries {
    #[serde(rename = "a_l")]
    AL,
    #[serde(rename = "a_l_delta")]
    ALDelta { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub l: usize,
    #[serde(with = "ext_float")]
    pub q10: f64,
    #[serde(with = "ext_float")]
    pub q50: f64,
    #[serde(with = "ext_float")]
    pub q90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessTable {
    pub series: TightnessSeries,
    pub env_replicas: usize,
    pub blowup_factor: f64,
    pub rows: Vec<QuantileRow>,
    pub blowup: bool,
}

impl TightnessTable {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "l,q10,q50,q90,flag")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.l, r.q10, r.q50, r.q90, self.blowup as u8)?;
        }
        Ok(())
    }
}

/// Quantiles, over independent environment draws, of the series truncated
/// after `l` terms, for each `l` in `l_grid`.
///
/// In an i.i.d. environment every `a_l` has the law of `a_1`, so growth in
/// `l` can only show up through truncation: the truncated sums stabilize
/// when the series is a.s. finite and grow without bound otherwise. The
/// blowup flag is set when every tracked quantile grows by more than
/// `blowup_factor` between each pair of consecutive grid points.
pub fn tightness_diagnostic(
    spec: &EnvironmentSpec,
    l_grid: &[usize],
    env_replicas: usize,
    series: TightnessSeries,
    horizon: usize,
    seed: u64,
    blowup_factor: f64,
) -> Result<TightnessTable> {
    if l_grid.is_empty() || l_grid.contains(&0) || l_grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidInput("l_grid must be increasing positive indices".into()));
    }
    if env_replicas == 0 {
        return Err(Error::InvalidInput("env_replicas must be positive".into()));
    }
    let max_l = *l_grid.last().expect("non-empty");
    if horizon < max_l {
        return Err(Error::InvalidInput(format!("horizon {horizon} is below the largest grid point {max_l}")));
    }
    let rate = match series {
        TightnessSeries::AL => 1.0,
        TightnessSeries::ALDelta { delta } => {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::InvalidInput(format!("delta must lie in (0, 1], got {delta}")));
            }
            delta
        }
    };
    let per_replica: Vec<Vec<f64>> = (0..env_replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let env = quench(spec, derive_seed(seed, Domain::EnvironmentSeed, r), horizon)?;
            let mut out = Vec::with_capacity(l_grid.len());
            let mut partial = 0.0;
            let mut next = 0;
            for i in 0..max_l {
                let g = 1 + i;
                let m = match series {
                    TightnessSeries::AL => env.zeta(g),
                    TightnessSeries::ALDelta { delta } => env.dist(g).delta_moment(delta),
                };
                partial += m * (-rate * env.s_diff(g, 1)).exp();
                if i + 1 == l_grid[next] {
                    out.push(partial);
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<QuantileRow> = l_grid
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let mut v: Vec<f64> = per_replica.iter().map(|r| r[k]).collect();
            sort_floats(&mut v);
            QuantileRow {
                l,
                q10: quantile_sorted(&v, 0.1),
                q50: quantile_sorted(&v, 0.5),
                q90: quantile_sorted(&v, 0.9),
            }
        })
        .collect();
    let blowup = rows.len() >= 2
        && rows.windows(2).all(|p| {
            p[1].q10 > blowup_factor * p[0].q10 && p[1].q50 > blowup_factor * p[0].q50 && p[1].q90 > blowup_factor * p[0].q90
        });
    Ok(TightnessTable { series, env_replicas, blowup_factor, rows, blowup })
}
