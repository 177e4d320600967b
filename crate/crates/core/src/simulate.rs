//! Forward simulation of `Z_n` in a quenched environment.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::environment::QuenchedEnvironment;
use crate::error::{Error, Result};

/// Population size: exact while it fits in `u128`, a natural log beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Population {
    Exact(u128),
    Log(f64),
}

impl Population {
    pub fn ln(self) -> f64 {
        match self {
            Population::Exact(0) => f64::NEG_INFINITY,
            Population::Exact(z) => (z as f64).ln(),
            Population::Log(l) => l,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Population::Exact(0)
    }

    pub fn exact(self) -> Option<u128> {
        match self {
            Population::Exact(z) => Some(z),
            Population::Log(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `Z_0, ..., Z_n`; zeros after extinction.
    pub z: Vec<Population>,
    /// The environment's `S_0, ..., S_horizon` (may extend past `n`).
    pub s: Arc<[f64]>,
    /// `log W_k = log Z_k - S_k`, `-inf` once extinct.
    pub log_w: Vec<f64>,
    pub extinction_time: Option<usize>,
    /// First generation produced by an approximate step (Gaussian aggregate
    /// or log-space continuation).
    pub approx_from: Option<usize>,
}

impl Trajectory {
    /// Number of simulated generations `n`.
    pub fn n(&self) -> usize {
        self.z.len() - 1
    }

    pub fn w(&self, k: usize) -> f64 {
        self.log_w[k].exp()
    }

    pub fn survived(&self) -> bool {
        self.extinction_time.is_none()
    }
}

/// Simulates generations `1..=n` from `Z_0 = z0`.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    env: &QuenchedEnvironment,
    z0: u128,
    n: usize,
    rng: &mut R,
    cap: u64,
) -> Result<Trajectory> {
    if z0 == 0 {
        return Err(Error::InvalidInput("z0 must be positive".into()));
    }
    if n > env.horizon() {
        return Err(Error::InvalidInput(format!(
            "n = {n} exceeds the environment horizon {}",
            env.horizon()
        )));
    }
    let mut z = Vec::with_capacity(n + 1);
    let mut log_w = Vec::with_capacity(n + 1);
    z.push(Population::Exact(z0));
    log_w.push((z0 as f64).ln());
    let mut extinction_time = None;
    let mut approx_from = None;
    let mut current = Population::Exact(z0);
    for k in 1..=n {
        current = match current {
            _ if env.log_mean(k) == f64::NEG_INFINITY => Population::Exact(0),
            Population::Exact(parents) => match env.dist(k).sample_generation_total(parents, rng, cap) {
                Ok((total, approx)) => {
                    if approx && approx_from.is_none() {
                        approx_from = Some(k);
                    }
                    Population::Exact(total)
                }
                Err(Error::Overflow { log_estimate }) => {
                    approx_from.get_or_insert(k);
                    Population::Log(log_estimate)
                }
                Err(e) => return Err(e),
            },
            Population::Log(log_z) => Population::Log(log_space_step(env, k, log_z, rng)),
        };
        z.push(current);
        let lw = if current.is_zero() { f64::NEG_INFINITY } else { current.ln() - env.s(k) };
        log_w.push(lw);
        if current.is_zero() {
            extinction_time = Some(k);
            z.resize(n + 1, Population::Exact(0));
            log_w.resize(n + 1, f64::NEG_INFINITY);
            break;
        }
    }
    Ok(Trajectory { z, s: env.s_prefix().clone(), log_w, extinction_time, approx_from })
}

/// One generation beyond `u128`: `log Z` moves by `xi_k` plus the CLT
/// fluctuation of the normalized sum, whose relative size is
/// `sqrt(zeta_k / Z)`. With infinite variance the fluctuation is dropped;
/// at these sizes it is below `f64` resolution of `log W` anyway.
fn log_space_step<R: Rng + ?Sized>(env: &QuenchedEnvironment, k: usize, log_z: f64, rng: &mut R) -> f64 {
    let zeta = env.zeta(k);
    let mut next = log_z + env.log_mean(k);
    if zeta.is_finite() && zeta > 0.0 {
        let g: f64 = rng.sample(StandardNormal);
        next += (g * (zeta * (-log_z).exp()).sqrt()).ln_1p();
    }
    next
}

/// `Y_n(t) = W_{floor(r_n + (n - r_n) t)}` on each grid point.
pub fn path_functional(traj: &Trajectory, r_n: usize, grid: &[f64]) -> Result<Vec<f64>> {
    let n = traj.n();
    if r_n > n {
        return Err(Error::InvalidInput(format!("r_n = {r_n} exceeds n = {n}")));
    }
    grid.iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidInput(format!("grid point {t} is outside [0, 1]")));
            }
            let idx = (r_n as f64 + (n - r_n) as f64 * t).floor() as usize;
            Ok(traj.w(idx.min(n)))
        })
        .collect()
}

/// `floor(sqrt(n))`.
pub fn default_r_n(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// `m` equispaced points on `[0, 1]`, both ends included.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
    }
}

/// First `i > start` with `Z_i e^{-(S_i - S_start)} < Z_start / 2`.
pub fn halving_first_passage(traj: &Trajectory, start: usize) -> Option<usize> {
    let threshold = traj.log_w[start] - std::f64::consts::LN_2;
    (start + 1..=traj.n()).find(|&i| traj.log_w[i] < threshold)
}

pub fn write_csv_header<W: Write>(out: &mut W) -> Result<()> {
    writeln!(out, "replica,n,z,log_z,s,log_w,approx")?;
    Ok(())
}

/// One CSV row per generation: `z` is empty once the count is carried in
/// log space.
pub fn write_csv_rows<W: Write>(out: &mut W, replica: u64, traj: &Trajectory) -> Result<()> {
    for (k, pop) in traj.z.iter().enumerate() {
        let z = pop.exact().map(|v| v.to_string()).unwrap_or_default();
        let approx = traj.approx_from.is_some_and(|a| k >= a) as u8;
        writeln!(out, "{replica},{k},{z},{},{},{},{approx}", pop.ln(), traj.s[k], traj.log_w[k])?;
    }
    Ok(())
}
