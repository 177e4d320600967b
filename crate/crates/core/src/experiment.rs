//! Config-driven experiment runner behind the command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::conditions::{
    a_l, a_l_delta, a_l_psi, jagers_criterion, kersting_condition_a, tightness_diagnostic, ConditionReport, SeriesId,
    TightnessSeries,
};
use crate::distributions::{Phi, DEFAULT_CAP};
use crate::environment::{preset, quench, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    default_eps_grid, mc_conditioned_critical, mc_flt_discrepancy, mc_halving_bound, mc_increment_covariance,
    mc_l2_increment, mc_l2_span, mc_survival, mc_w_positivity, EnvSource, RunSettings,
};
use crate::provenance::digest;
use crate::rng::stream;
use crate::simulate::{simulate_trajectory, write_csv_header, write_csv_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Conditions,
    Survival,
    WPositivity,
    L2,
    Halving,
    Flt,
    Tightness,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvMode {
    Quenched,
    Annealed,
}

/// Either `{"preset": name}` or a full environment spec.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentRef {
    Preset(String),
    Spec(EnvironmentSpec),
}

impl EnvironmentRef {
    pub fn resolve(&self) -> Result<EnvironmentSpec> {
        match self {
            EnvironmentRef::Preset(name) => {
                preset(name).ok_or_else(|| Error::Config(format!("environment: unknown preset {name:?}")))
            }
            EnvironmentRef::Spec(spec) => Ok(spec.clone()),
        }
    }
}

impl Serialize for EnvironmentRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EnvironmentRef::Preset(name) => json!({ "preset": name }).serialize(s),
            EnvironmentRef::Spec(spec) => spec.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for EnvironmentRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = Value::deserialize(d)?;
        if let Some(obj) = value.as_object() {
            if let Some(name) = obj.get("preset") {
                if obj.len() != 1 {
                    return Err(D::Error::custom("environment: a preset reference takes no other fields"));
                }
                let name = name.as_str().ok_or_else(|| D::Error::custom("environment.preset must be a string"))?;
                return Ok(EnvironmentRef::Preset(name.to_string()));
            }
        }
        EnvironmentSpec::deserialize(value)
            .map(EnvironmentRef::Spec)
            .map_err(|e| D::Error::custom(format!("environment: {e}")))
    }
}

fn default_env_mode() -> EnvMode {
    EnvMode::Quenched
}
fn default_z0() -> u64 {
    1
}
fn default_n() -> usize {
    200
}
fn default_replicas() -> u64 {
    10_000
}
fn default_l() -> usize {
    1
}
fn default_m_list() -> Vec<usize> {
    vec![1, 10, 100]
}
fn default_n_list() -> Vec<usize> {
    vec![64, 256, 1024]
}
fn default_l_grid() -> Vec<usize> {
    vec![1, 50, 100]
}
fn default_delta() -> f64 {
    0.25
}
fn default_phi() -> Phi {
    Phi::LogPower { gamma: 0.25 }
}
fn default_tol() -> f64 {
    1e-9
}
fn default_cap() -> u64 {
    DEFAULT_CAP
}
fn default_env_replicas() -> u64 {
    200
}
fn default_path_replicas() -> u64 {
    10
}
fn default_blowup() -> f64 {
    2.0
}
fn default_series() -> Vec<SeriesId> {
    vec![SeriesId::AL, SeriesId::ALDelta, SeriesId::ALPsi, SeriesId::Jagers, SeriesId::KerstingA]
}
fn default_tightness_series() -> TightnessSeries {
    TightnessSeries::AL
}

/// One experiment. Every field except `experiment` and `environment` has a
/// default; the resolved form written next to the results spells all of
/// them out, with the environment expanded and the horizon fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub environment: EnvironmentRef,
    #[serde(default = "default_env_mode")]
    pub env_mode: EnvMode,
    #[serde(default)]
    pub env_seed: u64,
    /// Generations materialized per environment; derived when absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "default_z0")]
    pub z0: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    /// Start index of the series (conditions) or of the increments (l2).
    #[serde(default = "default_l")]
    pub l: usize,
    /// Generation at which the halving experiment starts.
    #[serde(default)]
    pub start: usize,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_l_grid")]
    pub l_grid: Vec<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_phi")]
    pub phi: Phi,
    #[serde(default = "default_series")]
    pub series: Vec<SeriesId>,
    #[serde(default = "default_tightness_series")]
    pub tightness_series: TightnessSeries,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default = "default_env_replicas")]
    pub env_replicas: u64,
    #[serde(default = "default_path_replicas")]
    pub path_replicas: u64,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
    /// Number of leading replicas whose trajectories are written to CSV
    /// (survival and w_positivity only).
    #[serde(default)]
    pub export_trajectories: u64,
}

const CONDITION_TERMS: usize = 4096;
const SERIES_MARGIN: usize = 1024;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn needed_horizon(&self) -> usize {
        let max_of = |v: &[usize]| v.iter().copied().max().unwrap_or(0);
        match self.experiment {
            ExperimentKind::Conditions => self.l + CONDITION_TERMS,
            ExperimentKind::Survival | ExperimentKind::WPositivity => self.n,
            ExperimentKind::L2 => self.l + max_of(&self.m_list).max(2) + SERIES_MARGIN,
            ExperimentKind::Halving => self.start + self.n + SERIES_MARGIN,
            ExperimentKind::Flt | ExperimentKind::Critical => max_of(&self.n_list),
            ExperimentKind::Tightness => max_of(&self.l_grid),
        }
    }

    /// Expands the environment, fixes the horizon and checks the fields.
    pub fn resolve(&self) -> Result<Self> {
        let spec = self.environment.resolve()?;
        spec.validate().map_err(|e| Error::Config(format!("environment: {e}")))?;
        let mut out = self.clone();
        out.environment = EnvironmentRef::Spec(spec);
        out.horizon = Some(self.horizon.unwrap_or_else(|| self.needed_horizon()));
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        let horizon = self.horizon.unwrap_or(0);
        if horizon == 0 {
            return bad("horizon", "must be at least 1");
        }
        if self.z0 == 0 {
            return bad("z0", "must be positive");
        }
        if self.replicas == 0 {
            return bad("replicas", "must be positive");
        }
        if self.l == 0 {
            return bad("l", "must be at least 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol", "must be positive");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad("delta", "must lie in (0, 1]");
        }
        if let Err(e) = self.phi.validate() {
            return bad("phi", &e.to_string());
        }
        if self.horizon.is_some_and(|h| h < self.needed_horizon()) {
            let need = self.needed_horizon();
            return Err(Error::Config(format!("horizon: {horizon} is below the {need} generations this experiment needs")));
        }
        let annealed = self.env_mode == EnvMode::Annealed;
        let random = self.spec().is_random();
        match self.experiment {
            ExperimentKind::Conditions | ExperimentKind::L2 | ExperimentKind::Halving if annealed => {
                return bad("env_mode", "this experiment needs a quenched environment");
            }
            ExperimentKind::Tightness | ExperimentKind::Critical if !random => {
                return bad("environment", "this experiment needs a random environment (iid_random or cooling)");
            }
            ExperimentKind::Flt | ExperimentKind::Critical if self.n_list.is_empty() => return bad("n_list", "must not be empty"),
            ExperimentKind::Tightness if self.l_grid.is_empty() => return bad("l_grid", "must not be empty"),
            ExperimentKind::L2 if self.m_list.is_empty() => return bad("m_list", "must not be empty"),
            _ => {}
        }
        Ok(())
    }

    fn spec(&self) -> EnvironmentSpec {
        match &self.environment {
            EnvironmentRef::Spec(s) => s.clone(),
            EnvironmentRef::Preset(name) => preset(name).expect("resolved before use"),
        }
    }

    fn run_settings(&self) -> RunSettings {
        RunSettings { replicas: self.replicas, seed: self.master_seed, cap: self.cap }
    }

    fn source(&self) -> Result<EnvSource> {
        let horizon = self.horizon.expect("resolved");
        Ok(match self.env_mode {
            EnvMode::Quenched => EnvSource::quenched(quench(&self.spec(), self.env_seed, horizon)?),
            EnvMode::Annealed => EnvSource::Annealed { spec: self.spec(), horizon },
        })
    }
}

/// Results of one experiment: the JSON document and named CSV series.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config_digest: String,
    pub resolved: ExperimentConfig,
    pub results: Value,
    pub csv: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn results_json(&self) -> Value {
        json!({
            "experiment": self.resolved.experiment,
            "config_digest": self.config_digest,
            "resolved_config": self.resolved,
            "results": self.results,
        })
    }

    pub fn results_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.results_json()).expect("results serialize");
        s.push('\n');
        s
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn csv_with_digest(digest: &str, body: String) -> String {
    format!("# config_digest={digest}\n{body}")
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let resolved = config.resolve()?;
    let d = digest(&resolved);
    let cfg = &resolved;
    let mut csv = Vec::new();
    let results = match cfg.experiment {
        ExperimentKind::Conditions => {
            let EnvSource::Quenched(env) = cfg.source()? else { unreachable!("validated") };
            let terms = env.horizon() - cfg.l;
            let mut reports: Vec<ConditionReport> = Vec::new();
            for id in &cfg.series {
                reports.push(match id {
                    SeriesId::AL => a_l(&env, cfg.l, terms, cfg.tol)?,
                    SeriesId::ALDelta => a_l_delta(&env, cfg.l, cfg.delta, terms, cfg.tol)?,
                    SeriesId::ALPsi => a_l_psi(&env, cfg.l, &cfg.phi, terms.max(1), cfg.tol)?,
                    SeriesId::Jagers => jagers_criterion(&env, env.horizon())?,
                    SeriesId::KerstingA => kersting_condition_a(&env, env.horizon())?,
                });
            }
            let mut body = String::from("series_id,l,partial_sum,horizon,tail_bound,verdict\n");
            for r in &reports {
                let id = to_value(&r.series_id);
                let verdict = to_value(&r.verdict);
                let tail = r.tail_bound.map(|t| t.to_string()).unwrap_or_default();
                let _ = writeln!(
                    body,
                    "{},{},{},{},{tail},{}",
                    id.as_str().unwrap_or_default(),
                    r.l,
                    r.partial_sum,
                    r.horizon,
                    verdict.as_str().unwrap_or_default()
                );
            }
            csv.push(("conditions.csv".to_string(), csv_with_digest(&d, body)));
            json!({ "reports": reports })
        }
        ExperimentKind::Survival | ExperimentKind::WPositivity => {
            let source = cfg.source()?;
            let run = cfg.run_settings();
            let z0 = cfg.z0 as u128;
            let mut out = if cfg.experiment == ExperimentKind::Survival {
                json!({ "survival": mc_survival(&source, z0, cfg.n, &run)? })
            } else {
                let check = mc_w_positivity(&source, z0, cfg.n, &cfg.eps_grid, &run)?;
                let mut body = String::from("epsilon,p_w_above,std_error\n");
                for e in &check.p_w_above {
                    let _ = writeln!(body, "{},{},{}", e.epsilon, e.estimate.value, e.estimate.std_error);
                }
                csv.push(("w_positivity.csv".to_string(), csv_with_digest(&d, body)));
                json!({ "equality_check": check, "equality_holds": check.holds(3.0) })
            };
            if let EnvironmentSpec::Constant { dist } = cfg.spec() {
                let q = dist.extinction_prob_constant_env();
                out["survival_oracle"] = json!(1.0 - q.powf(cfg.z0 as f64));
            }
            if cfg.export_trajectories > 0 {
                csv.push(("trajectories.csv".to_string(), csv_with_digest(&d, export_trajectories(cfg, &source)?)));
            }
            out
        }
        ExperimentKind::L2 => {
            let EnvSource::Quenched(env) = cfg.source()? else { unreachable!("validated") };
            let run = cfg.run_settings();
            let k = cfg.z0 as u128;
            let increment = mc_l2_increment(&env, k, cfg.l, &run)?;
            let covariance = mc_increment_covariance(&env, k, cfg.l, 2, &run)?;
            let (a, spans) = mc_l2_span(&env, k, cfg.l, &cfg.m_list, &run)?;
            let mut body = String::from("m,mean_sq_increment,std_error,bound\n");
            for s in &spans {
                let _ = writeln!(body, "{},{},{},{}", s.m, s.estimate.value, s.estimate.std_error, s.bound);
            }
            csv.push(("l2_span.csv".to_string(), csv_with_digest(&d, body)));
            json!({
                "increment": increment,
                "increment_covariance": covariance,
                "a_l": a,
                "span": spans,
            })
        }
        ExperimentKind::Halving => {
            let EnvSource::Quenched(env) = cfg.source()? else { unreachable!("validated") };
            let check = mc_halving_bound(&env, cfg.z0 as u128, cfg.start, cfg.n, &cfg.run_settings())?;
            json!({ "halving": check })
        }
        ExperimentKind::Flt => {
            let report = mc_flt_discrepancy(&cfg.source()?, cfg.z0 as u128, &cfg.n_list, &cfg.run_settings())?;
            let mut body = String::from("n,r_n,survivors,median,q90\n");
            for s in &report.summaries {
                let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(body, "{},{},{},{},{}", s.n, s.r_n, s.survivors, f(s.median), f(s.q90));
            }
            csv.push(("flt.csv".to_string(), csv_with_digest(&d, body)));
            json!({ "flt": report, "strictly_decreasing": report.strictly_decreasing() })
        }
        ExperimentKind::Tightness => {
            let table = tightness_diagnostic(
                &cfg.spec(),
                &cfg.l_grid,
                cfg.env_replicas as usize,
                cfg.tightness_series,
                cfg.horizon.expect("resolved"),
                cfg.master_seed,
                cfg.blowup_factor,
            )?;
            let mut body = Vec::new();
            table.write_csv(&mut body)?;
            csv.push(("tightness.csv".to_string(), csv_with_digest(&d, String::from_utf8(body).expect("ascii"))));
            json!({ "tightness": table })
        }
        ExperimentKind::Critical => {
            let report = mc_conditioned_critical(
                &cfg.spec(),
                cfg.z0 as u128,
                &cfg.n_list,
                cfg.env_replicas,
                cfg.path_replicas,
                cfg.master_seed,
                cfg.cap,
            )?;
            let mut body = String::from("n,survivors,median_w,q10_w\n");
            for s in &report.summaries {
                let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(body, "{},{},{},{}", s.n, s.survivors, f(s.median_w), f(s.q10_w));
            }
            csv.push(("critical.csv".to_string(), csv_with_digest(&d, body)));
            json!({ "critical": report, "conditioning": "z_n_positive" })
        }
    };
    Ok(ExperimentOutput { config_digest: d, resolved, results, csv })
}

/// Replays the first replicas with the estimators' stream layout.
fn export_trajectories(cfg: &ExperimentConfig, source: &EnvSource) -> Result<String> {
    use crate::rng::{derive_seed, Domain};
    let mut buf = Vec::new();
    write_csv_header(&mut buf)?;
    for r in 0..cfg.export_trajectories.min(cfg.replicas) {
        let mut rng = stream(cfg.master_seed, Domain::Path, r);
        let traj = match source {
            EnvSource::Quenched(env) => simulate_trajectory(env, cfg.z0 as u128, cfg.n, &mut rng, cfg.cap)?,
            EnvSource::Annealed { spec, horizon } => {
                let env = quench(spec, derive_seed(cfg.master_seed, Domain::EnvironmentSeed, r), *horizon)?;
                simulate_trajectory(&env, cfg.z0 as u128, cfg.n, &mut rng, cfg.cap)?
            }
        };
        write_csv_rows(&mut buf, r, &traj)?;
    }
    Ok(String::from_utf8(buf).expect("ascii"))
}

pub const RESULTS_FILE: &str = "results.json";
pub const RESOLVED_FILE: &str = "resolved_config.json";

/// Runs the config at `config_path` and writes its artifacts into `out_dir`.
/// An existing results file from a different config is never overwritten
/// unless `force` is set.
pub fn run_to_dir(config_path: &Path, out_dir: &Path, force: bool) -> Result<(ExperimentOutput, Vec<PathBuf>)> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let config = ExperimentConfig::from_json(&text)?;
    let resolved = config.resolve()?;
    let d = digest(&resolved);
    let results_path = out_dir.join(RESULTS_FILE);
    if !force {
        if let Ok(existing) = fs::read_to_string(&results_path) {
            let previous = serde_json::from_str::<Value>(&existing)
                .ok()
                .and_then(|v| v.get("config_digest").and_then(|x| x.as_str()).map(str::to_string));
            if previous.as_deref() != Some(d.as_str()) {
                return Err(Error::Config(format!(
                    "{} holds results for a different config (digest {}); refusing to overwrite",
                    results_path.display(),
                    previous.unwrap_or_else(|| "unreadable".into())
                )));
            }
        }
    }
    let output = run(&resolved)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    fs::write(&results_path, output.results_string())?;
    written.push(results_path);
    let resolved_path = out_dir.join(RESOLVED_FILE);
    let mut echo = serde_json::to_string_pretty(&output.resolved)?;
    echo.push('\n');
    fs::write(&resolved_path, echo)?;
    written.push(resolved_path);
    for (name, body) in &output.csv {
        let p = out_dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
    }
    Ok((output, written))
}

/// Process exit code for a runner error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::InvalidInput(_) | Error::InvalidDistribution(_) => 2,
        Error::Resource(_) => 3,
        Error::NotApplicable(_) => 4,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gw_env() -> &'static str {
        r#"{"kind": "constant", "dist": {"kind": "finite_pmf", "probs": [0.25, 0.25, 0.5]}}"#
    }

    #[test]
    fn conditions_on_constant_gw() {
        let cfg = ExperimentConfig::from_json(&format!(r#"{{"experiment": "conditions", "environment": {}}}"#, gw_env())).unwrap();
        let out = run(&cfg).unwrap();
        let a = &out.results["reports"][0];
        assert_eq!(a["series_id"], "a_l");
        assert!((a["partial_sum"].as_f64().unwrap() - 2.2).abs() < 1e-9);
        assert_eq!(a["verdict"], "finite");
    }

    #[test]
    fn w_positivity_on_doubling() {
        let text = r#"{"experiment": "w_positivity", "replicas": 200, "n": 30,
            "environment": {"kind": "constant", "dist": {"kind": "finite_pmf", "probs": [0, 0, 1]}}}"#;
        let out = run(&ExperimentConfig::from_json(text).unwrap()).unwrap();
        let check = &out.results["equality_check"];
        assert_eq!(check["p_survive_n"]["value"], 1.0);
        assert!(check["p_w_above"].as_array().unwrap().iter().all(|e| e["estimate"]["value"] == 1.0));
        assert_eq!(out.results["equality_holds"], true);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = ExperimentConfig::from_json(r#"{"experiment": "survival"}"#).unwrap_err();
        assert!(err.to_string().contains("environment"), "{err}");
        assert_eq!(exit_code(&err), 2);
        let err = ExperimentConfig::from_json(&format!(
            r#"{{"experiment": "survival", "environment": {}, "replicass": 3}}"#,
            gw_env()
        ))
        .unwrap_err();
        assert!(err.to_string().contains("replicass"), "{err}");
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "survival", "environment": {"preset": "nope"}}"#).unwrap();
        assert_eq!(exit_code(&cfg.resolve().unwrap_err()), 2);
    }

    #[test]
    fn not_applicable_and_resource_codes() {
        let heavy = r#"{"kind": "constant", "dist": {"kind": "power_law_tail", "alpha": 0.5, "p0": 0.2}}"#;
        let cfg = ExperimentConfig::from_json(&format!(r#"{{"experiment": "l2", "replicas": 10, "environment": {heavy}}}"#)).unwrap();
        assert_eq!(exit_code(&run(&cfg).unwrap_err()), 4);
        let cfg = ExperimentConfig::from_json(&format!(
            r#"{{"experiment": "survival", "n": 5, "horizon": 100000000, "environment": {}}}"#,
            gw_env()
        ))
        .unwrap();
        assert_eq!(exit_code(&run(&cfg).unwrap_err()), 3);
    }

    #[test]
    fn resolved_echo_reproduces_results() {
        let text = r#"{"experiment": "survival", "replicas": 300, "n": 20, "environment": {"preset": "supercritical_mu0.2"}}"#;
        let first = run(&ExperimentConfig::from_json(text).unwrap()).unwrap();
        let echo = serde_json::to_string(&first.resolved).unwrap();
        let second = run(&ExperimentConfig::from_json(&echo).unwrap()).unwrap();
        assert_eq!(first.results_string(), second.results_string());
        assert!(echo.contains("\"horizon\":20"));
    }

    #[test]
    fn resume_refuses_other_digest() {
        let dir = std::env::temp_dir().join(format!("bpve-resume-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        let cfg_path = dir.join("cfg.json");
        let out = dir.join("out");
        fs::write(&cfg_path, format!(r#"{{"experiment": "survival", "replicas": 50, "n": 10, "environment": {}}}"#, gw_env())).unwrap();
        run_to_dir(&cfg_path, &out, false).unwrap();
        run_to_dir(&cfg_path, &out, false).unwrap();
        fs::write(&cfg_path, format!(r#"{{"experiment": "survival", "replicas": 51, "n": 10, "environment": {}}}"#, gw_env())).unwrap();
        assert!(matches!(run_to_dir(&cfg_path, &out, false), Err(Error::Config(_))));
        run_to_dir(&cfg_path, &out, true).unwrap();
        fs::remove_dir_all(&dir).unwrap();
    }
}
