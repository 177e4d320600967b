//! Environments: the sequence of offspring laws `P_1, P_2, ...`.
//!
//! Random kinds are random-access: generation `i` (or cooling block `b`)
//! draws its law from the keyed stream `(env_seed, i)`, so `dist_at` never
//! needs the prefix and every quench of the same `(spec, seed)` agrees.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distributions::{Family, OffspringDistribution};
use crate::error::{Error, Result};
use crate::numeric::{riemann_zeta, DoubleDouble};
use crate::provenance::digest;
use crate::rng::{stream, Domain};

/// Longest environment `quench` will materialize.
pub const MAX_HORIZON: usize = 1 << 24;

/// Law of the log-mean `xi` of a randomly drawn generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogMeanLaw {
    /// `xi = values[j]` with probability `weights[j]` (normalized).
    Discrete { values: Vec<f64>, weights: Vec<f64> },
    Gaussian { mean: f64, sd: f64 },
}

impl LogMeanLaw {
    pub fn two_point(a: f64, b: f64) -> Self {
        LogMeanLaw::Discrete { values: vec![a, b], weights: vec![0.5, 0.5] }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LogMeanLaw::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
            }
            LogMeanLaw::Gaussian { mean, .. } => *mean,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LogMeanLaw::Discrete { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(Error::InvalidInput("discrete log-mean law needs matching values and weights".into()));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidInput("log-mean weights must be nonnegative with positive total".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("log-mean values must be finite".into()));
                }
                Ok(())
            }
            LogMeanLaw::Gaussian { mean, sd } => {
                if mean.is_finite() && sd.is_finite() && *sd >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("gaussian log-mean law needs finite mean and sd >= 0".into()))
                }
            }
        }
    }
}

/// Parametric family whose mean is set by the drawn `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixerFamily {
    Geometric,
    Poisson,
    /// Fixed tail exponent; the zero mass absorbs the mean.
    PowerLawTail { alpha: f64 },
    /// Fixed ratio `b`; the zero mass absorbs the mean.
    LinearFractional { b: f64 },
}

impl MixerFamily {
    pub fn with_log_mean(&self, xi: f64) -> Result<OffspringDistribution> {
        let mean = xi.exp();
        let family = match *self {
            MixerFamily::Geometric => Family::Geometric { mean },
            MixerFamily::Poisson => Family::Poisson { lambda: mean },
            MixerFamily::PowerLawTail { alpha } => {
                let p0 = 1.0 - mean * riemann_zeta(2.0 + alpha) / riemann_zeta(1.0 + alpha);
                if !(0.0..1.0).contains(&p0) {
                    return Err(Error::Unsupported(format!(
                        "mean {mean} is not attainable by a power-law tail with alpha = {alpha}"
                    )));
                }
                Family::PowerLawTail { alpha, p0 }
            }
            MixerFamily::LinearFractional { b } => {
                let p0 = 1.0 - mean * (1.0 - b);
                if !(0.0..1.0).contains(&p0) {
                    return Err(Error::Unsupported(format!(
                        "mean {mean} is not attainable by a linear fractional law with b = {b}"
                    )));
                }
                Family::LinearFractional { p0, b }
            }
        };
        OffspringDistribution::new(family)
    }
}

/// i.i.d. sampling law over offspring distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mixer {
    pub family: MixerFamily,
    pub log_mean: LogMeanLaw,
    #[serde(skip)]
    atoms: OnceLock<Vec<Arc<OffspringDistribution>>>,
}

impl PartialEq for Mixer {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.log_mean == other.log_mean
    }
}

impl Mixer {
    pub fn new(family: MixerFamily, log_mean: LogMeanLaw) -> Self {
        Self { family, log_mean, atoms: OnceLock::new() }
    }

    pub fn validate(&self) -> Result<()> {
        self.log_mean.validate()?;
        if let LogMeanLaw::Discrete { values, .. } = &self.log_mean {
            for v in values {
                self.family.with_log_mean(*v)?;
            }
        }
        Ok(())
    }

    /// Discrete laws share one distribution object per atom, so moment
    /// caches are reused across generations.
    fn atoms(&self) -> Result<&[Arc<OffspringDistribution>]> {
        if let Some(a) = self.atoms.get() {
            return Ok(a);
        }
        let LogMeanLaw::Discrete { values, .. } = &self.log_mean else {
            return Ok(&[]);
        };
        let built = values
            .iter()
            .map(|v| self.family.with_log_mean(*v).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.atoms.get_or_init(|| built))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Arc<OffspringDistribution>> {
        match &self.log_mean {
            LogMeanLaw::Discrete { weights, .. } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let atoms = self.atoms()?;
                for (atom, w) in atoms.iter().zip(weights) {
                    if u < *w {
                        return Ok(atom.clone());
                    }
                    u -= w;
                }
                let last = weights.iter().rposition(|w| *w > 0.0).expect("positive total weight");
                Ok(atoms[last].clone())
            }
            LogMeanLaw::Gaussian { mean, sd } => {
                let xi = if *sd == 0.0 { *mean } else { Normal::new(*mean, *sd).expect("valid sd").sample(rng) };
                Ok(Arc::new(self.family.with_log_mean(xi)?))
            }
        }
    }
}

/// Lengths of the cooling blocks over which a drawn law is held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockSchedule {
    /// Blocks of length 1, 2, 4, 8, ...
    Doubling,
    /// Given lengths; the last one repeats.
    Explicit { lengths: Vec<u64> },
}

impl BlockSchedule {
    /// Zero-based block index of generation `i >= 1`.
    pub fn block_of(&self, i: u64) -> u64 {
        match self {
            BlockSchedule::Doubling => 63 - i.leading_zeros() as u64,
            BlockSchedule::Explicit { lengths } => {
                let mut start = 1u64;
                for (b, len) in lengths.iter().enumerate() {
                    if i < start + len {
                        return b as u64;
                    }
                    start += len;
                }
                let last = *lengths.last().expect("validated non-empty");
                lengths.len() as u64 - 1 + (i - start) / last + 1
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BlockSchedule::Doubling => Ok(()),
            BlockSchedule::Explicit { lengths } => {
                if lengths.is_empty() || lengths.contains(&0) {
                    Err(Error::InvalidInput("block lengths must be non-empty and positive".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Constant { dist: Arc<OffspringDistribution> },
    /// Finite sequence; generations past its end are an input error.
    ExplicitSequence { dists: Vec<Arc<OffspringDistribution>> },
    Periodic { dists: Vec<Arc<OffspringDistribution>> },
    IidRandom { mixer: Mixer },
    Cooling { mixer: Mixer, blocks: BlockSchedule },
}

impl EnvironmentSpec {
    pub fn constant(dist: OffspringDistribution) -> Self {
        EnvironmentSpec::Constant { dist: Arc::new(dist) }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, EnvironmentSpec::IidRandom { .. } | EnvironmentSpec::Cooling { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EnvironmentSpec::Constant { .. } => "constant",
            EnvironmentSpec::ExplicitSequence { .. } => "explicit_sequence",
            EnvironmentSpec::Periodic { .. } => "periodic",
            EnvironmentSpec::IidRandom { .. } => "iid_random",
            EnvironmentSpec::Cooling { .. } => "cooling",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvironmentSpec::Constant { .. } => Ok(()),
            EnvironmentSpec::ExplicitSequence { dists } | EnvironmentSpec::Periodic { dists } => {
                if dists.is_empty() {
                    Err(Error::InvalidInput(format!("{} environment needs at least one distribution", self.kind())))
                } else {
                    Ok(())
                }
            }
            EnvironmentSpec::IidRandom { mixer } => mixer.validate(),
            EnvironmentSpec::Cooling { mixer, blocks } => {
                mixer.validate()?;
                blocks.validate()
            }
        }
    }

    /// The law of generation `i >= 1`.
    pub fn dist_at(&self, env_seed: u64, i: u64) -> Result<Arc<OffspringDistribution>> {
        if i == 0 {
            return Err(Error::InvalidInput("generations are numbered from 1".into()));
        }
        match self {
            EnvironmentSpec::Constant { dist } => Ok(dist.clone()),
            EnvironmentSpec::ExplicitSequence { dists } => dists.get(i as usize - 1).cloned().ok_or_else(|| {
                Error::InvalidInput(format!("explicit sequence has {} generations, asked for {i}", dists.len()))
            }),
            EnvironmentSpec::Periodic { dists } => Ok(dists[(i as usize - 1) % dists.len()].clone()),
            EnvironmentSpec::IidRandom { mixer } => mixer.draw(&mut stream(env_seed, Domain::Environment, i)),
            EnvironmentSpec::Cooling { mixer, blocks } => {
                mixer.draw(&mut stream(env_seed, Domain::Environment, blocks.block_of(i)))
            }
        }
    }

    /// Mean of `xi_1` under the spec; for deterministic kinds, the
    /// log-mean of the first generation.
    pub fn mean_log_mean(&self) -> Result<f64> {
        match self {
            EnvironmentSpec::IidRandom { mixer } | EnvironmentSpec::Cooling { mixer, .. } => Ok(mixer.log_mean.mean()),
            _ => self.dist_at(0, 1)?.log_mean(),
        }
    }
}

/// A materialized environment of `horizon` generations with cumulative
/// log-means `S_0 = 0, S_1, ..., S_horizon`.
#[derive(Debug, Clone)]
pub struct QuenchedEnvironment {
    dists: Vec<Arc<OffspringDistribution>>,
    log_means: Vec<f64>,
    zetas: Vec<f64>,
    s_dd: Vec<DoubleDouble>,
    s: Arc<[f64]>,
    first_killing: Option<usize>,
    digest: String,
}

impl PartialEq for QuenchedEnvironment {
    fn eq(&self, other: &Self) -> bool {
        self.dists == other.dists && self.s_dd == other.s_dd
    }
}

impl QuenchedEnvironment {
    /// Builds from explicit per-generation laws (`dists[0]` is generation 1).
    pub fn from_distributions(dists: Vec<Arc<OffspringDistribution>>) -> Result<Self> {
        let d = digest(&dists);
        Self::build(dists, d)
    }

    fn build(dists: Vec<Arc<OffspringDistribution>>, digest: String) -> Result<Self> {
        if dists.is_empty() {
            return Err(Error::InvalidInput("environment horizon must be at least 1".into()));
        }
        if dists.len() > MAX_HORIZON {
            return Err(Error::Resource(format!(
                "horizon {} exceeds the in-memory limit of {MAX_HORIZON} generations",
                dists.len()
            )));
        }
        // A generation with P(X = 0) = 1 kills every line: `xi = -inf` and
        // `S` stays at `-inf` from there on.
        let log_means = dists
            .iter()
            .enumerate()
            .map(|(i, d)| {
                if d.pmf(0) >= 1.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                d.log_mean()
                    .map_err(|e| Error::Unsupported(format!("generation {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let first_killing = log_means.iter().position(|x| *x == f64::NEG_INFINITY).map(|i| i + 1);
        let zetas = dists.iter().map(|d| d.normalized_variance()).collect();
        let mut s_dd = Vec::with_capacity(dists.len() + 1);
        let mut acc = DoubleDouble::ZERO;
        s_dd.push(acc);
        for xi in &log_means {
            acc = acc.add_f64(*xi);
            s_dd.push(acc);
        }
        let s: Arc<[f64]> = s_dd.iter().map(|v| v.to_f64()).collect();
        Ok(Self { dists, log_means, zetas, s_dd, s, first_killing, digest })
    }

    pub fn constant(dist: OffspringDistribution, horizon: usize) -> Result<Self> {
        quench(&EnvironmentSpec::constant(dist), 0, horizon)
    }

    pub fn horizon(&self) -> usize {
        self.dists.len()
    }

    /// Law of generation `i`, `1 <= i <= horizon`.
    pub fn dist(&self, i: usize) -> &Arc<OffspringDistribution> {
        &self.dists[i - 1]
    }

    pub fn dists(&self) -> &[Arc<OffspringDistribution>] {
        &self.dists
    }

    /// `xi_i`, `1 <= i <= horizon`.
    pub fn log_mean(&self, i: usize) -> f64 {
        self.log_means[i - 1]
    }

    /// `zeta_i`, `1 <= i <= horizon`.
    pub fn zeta(&self, i: usize) -> f64 {
        self.zetas[i - 1]
    }

    /// `S_n` rounded to `f64`, `0 <= n <= horizon`.
    pub fn s(&self, n: usize) -> f64 {
        self.s[n]
    }

    pub fn s_exact(&self, n: usize) -> DoubleDouble {
        self.s_dd[n]
    }

    /// `S_b - S_a` evaluated in double-double before rounding.
    pub fn s_diff(&self, b: usize, a: usize) -> f64 {
        self.s_dd[b].sub(self.s_dd[a]).to_f64()
    }

    /// First generation whose law has `P(X = 0) = 1`, if any.
    pub fn first_killing(&self) -> Option<usize> {
        self.first_killing
    }

    pub fn s_prefix(&self) -> &Arc<[f64]> {
        &self.s
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// The environment seen from generation `offset`: generation `j` of the
    /// result is generation `offset + j` of `self`.
    pub fn shifted(&self, offset: usize) -> Result<Self> {
        if offset >= self.horizon() {
            return Err(Error::InvalidInput(format!(
                "cannot shift a horizon-{} environment by {offset}",
                self.horizon()
            )));
        }
        let d = digest(&(&self.digest, offset));
        Self::build(self.dists[offset..].to_vec(), d)
    }
}

/// Materializes generations `1..=horizon` of `spec` under `env_seed`.
pub fn quench(spec: &EnvironmentSpec, env_seed: u64, horizon: usize) -> Result<QuenchedEnvironment> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if horizon > MAX_HORIZON {
        return Err(Error::Resource(format!(
            "horizon {horizon} exceeds the in-memory limit of {MAX_HORIZON} generations"
        )));
    }
    spec.validate()?;
    let dists = match spec {
        EnvironmentSpec::Cooling { mixer, blocks } => {
            // one draw per block, shared by the block's generations
            let mut out: Vec<Arc<OffspringDistribution>> = Vec::with_capacity(horizon);
            let mut current: Option<(u64, Arc<OffspringDistribution>)> = None;
            for i in 1..=horizon as u64 {
                let b = blocks.block_of(i);
                let d = match &current {
                    Some((cb, d)) if *cb == b => d.clone(),
                    _ => {
                        let d = mixer.draw(&mut stream(env_seed, Domain::Environment, b))?;
                        current = Some((b, d.clone()));
                        d
                    }
                };
                out.push(d);
            }
            out
        }
        _ => (1..=horizon as u64)
            .map(|i| spec.dist_at(env_seed, i))
            .collect::<Result<Vec<_>>>()?,
    };
    let d = digest(&(spec, env_seed, horizon));
    QuenchedEnvironment::build(dists, d)
}

/// A named, documented environment used by the experiments.
#[derive(Debug, Clone, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: EnvironmentSpec,
}

/// Critical i.i.d. environment: geometric offspring with
/// `xi = +-log 2` equally likely, so `E xi = 0` and `P(S_k > 0) -> 1/2`.
pub fn critical_preset() -> EnvironmentSpec {
    let l2 = std::f64::consts::LN_2;
    EnvironmentSpec::IidRandom { mixer: Mixer::new(MixerFamily::Geometric, LogMeanLaw::two_point(l2, -l2)) }
}

/// Supercritical i.i.d. environment with `E xi = mu`: geometric offspring,
/// `xi = mu +- log 2` equally likely.
pub fn supercritical_preset_with(mu: f64) -> EnvironmentSpec {
    let l2 = std::f64::consts::LN_2;
    EnvironmentSpec::IidRandom {
        mixer: Mixer::new(MixerFamily::Geometric, LogMeanLaw::two_point(mu + l2, mu - l2)),
    }
}

pub fn supercritical_preset() -> EnvironmentSpec {
    supercritical_preset_with(0.2)
}

/// The supercritical mixer held constant over blocks of length 1, 2, 4, ...
pub fn cooling_preset() -> EnvironmentSpec {
    let EnvironmentSpec::IidRandom { mixer } = supercritical_preset() else {
        unreachable!()
    };
    EnvironmentSpec::Cooling { mixer, blocks: BlockSchedule::Doubling }
}

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "critical_two_point",
            description: "iid geometric offspring, xi = +log 2 or -log 2 w.p. 1/2 each (E xi = 0, rho = 1/2)",
            spec: critical_preset(),
        },
        Preset {
            name: "supercritical_mu0.2",
            description: "iid geometric offspring, xi = 0.2 + log 2 or 0.2 - log 2 w.p. 1/2 each (E xi = 0.2)",
            spec: supercritical_preset(),
        },
        Preset {
            name: "cooling_doubling_blocks",
            description: "supercritical_mu0.2 mixer held fixed over blocks of length 1, 2, 4, 8, ...",
            spec: cooling_preset(),
        },
    ]
}

pub fn preset(name: &str) -> Option<EnvironmentSpec> {
    presets().into_iter().find(|p| p.name == name).map(|p| p.spec)
}
