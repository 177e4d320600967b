//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Oracles are computed here from first principles (pmf sums, closed-form
//! geometric series, the quadratic fixed point) and never read back from the
//! library code under test.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bpve_core::conditions::{a_l, a_l_delta, kersting_condition_a, tightness_diagnostic, TightnessSeries, Verdict};
use bpve_core::environment::{supercritical_preset, supercritical_preset_with};
use bpve_core::estimators::{
    mc_flt_discrepancy, mc_halving_bound, mc_increment_covariance, mc_l2_increment, mc_l2_span, mc_w_positivity,
    EnvSource, RunSettings,
};
use bpve_core::experiment::{self, ExperimentConfig};
use bpve_core::{OffspringDistribution, QuenchedEnvironment};

const GW: [f64; 3] = [0.25, 0.25, 0.5];

fn gw_env(horizon: usize) -> QuenchedEnvironment {
    QuenchedEnvironment::constant(OffspringDistribution::finite_pmf(GW.to_vec()).unwrap(), horizon).unwrap()
}

fn heavy() -> OffspringDistribution {
    OffspringDistribution::power_law_tail(0.5, 0.2).unwrap()
}

/// Mean and normalized variance from the pmf.
fn gw_moments() -> (f64, f64) {
    let m: f64 = GW.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let zeta: f64 = GW.iter().enumerate().map(|(k, p)| p * (k as f64 / m - 1.0).powi(2)).sum();
    (m, zeta)
}

/// `a_l` for a constant environment: `zeta sum_i m^-i = zeta m / (m - 1)`.
fn gw_a_oracle() -> f64 {
    let (m, zeta) = gw_moments();
    zeta * m / (m - 1.0)
}

/// Smallest root of `p0 + p1 s + p2 s^2 = s`.
fn gw_extinction_oracle() -> f64 {
    let (a, b, c) = (GW[2], GW[1] - 1.0, GW[0]);
    let disc = (b * b - 4.0 * a * c).sqrt();
    ((-b - disc) / (2.0 * a)).min((-b + disc) / (2.0 * a))
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let env = gw_env(4000);
    let oracle = gw_a_oracle();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all_finite = true;
    for l in [1, 2, 10, 100, 1000] {
        let r = a_l(&env, l, 2000, 1e-12).unwrap();
        all_finite &= r.verdict == Verdict::Finite;
        worst = worst.max((r.partial_sum - oracle).abs()).max((r.upper_bound().unwrap_or(f64::INFINITY) - oracle).abs());
    }
    let elapsed = t.elapsed();
    outcome(
        all_finite && worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("oracle {oracle}, worst |a_l - oracle| = {worst:.2e} over l in {{1,2,10,100,1000}}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    // E(X^2; X >= 2) = 4 p2, E(X | X >= 1) = (p1 + 2 p2) / (p1 + p2), E(X; X >= 2) = 2 p2
    let exact = (4.0 * GW[2]) / ((GW[1] + 2.0 * GW[2]) / (GW[1] + GW[2]) * (2.0 * GW[2]));
    let gw = kersting_condition_a(&gw_env(10), 10).unwrap();
    let heavy_env = QuenchedEnvironment::constant(heavy(), 12_000).unwrap();
    let heavy_a = kersting_condition_a(&heavy_env, 10).unwrap();
    let delta = a_l_delta(&heavy_env, 1, 0.25, 10_000, 1e-9).unwrap();
    let elapsed = t.elapsed();
    let pass = (gw.partial_sum - exact).abs() < 1e-12
        && heavy_a.partial_sum == f64::INFINITY
        && delta.verdict == Verdict::Finite
        && delta.upper_bound().is_some_and(f64::is_finite)
        && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "GW term {} (exact {exact}); heavy-tail term {}; a_1^(0.25) = {:.6} + tail {:.1e} ({:?}); {elapsed:.2?}",
            gw.partial_sum, heavy_a.partial_sum, delta.partial_sum, delta.tail_bound.unwrap_or(f64::NAN), delta.verdict
        ),
    )
}

fn gw_json(extra: &str) -> String {
    format!(
        r#"{{{extra}, "environment": {{"kind": "constant", "dist": {{"kind": "finite_pmf", "probs": [0.25, 0.25, 0.5]}}}}}}"#
    )
}

fn criterion_3_config() -> ExperimentConfig {
    let text = gw_json(
        r#""experiment": "w_positivity", "n": 200, "replicas": 100000, "master_seed": 3,
           "eps_grid": [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1]"#,
    );
    ExperimentConfig::from_json(&text).unwrap()
}

fn criterion_3(json_out: &mut Vec<String>) -> Outcome {
    let t = Instant::now();
    let out = pool(1).install(|| experiment::run(&criterion_3_config())).unwrap();
    let elapsed = t.elapsed();
    json_out.push(out.results_string());
    let check: bpve_core::estimators::EqualityCheck =
        serde_json::from_value(out.results["equality_check"].clone()).unwrap();
    let target = 1.0 - gw_extinction_oracle();
    let surv = &check.p_survive_n;
    let pass = surv.within(target, 3.0) && check.holds(3.0) && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "P(Z_200 > 0) = {:.5} +- {:.5} (oracle {target}); plateau {:?}; gap {:.2e} vs 3 SE {:.2e}; {elapsed:.2?}",
            surv.value,
            surv.std_error,
            check.plateau.as_ref().map(|p| (p.epsilon_low, p.epsilon_high)),
            check.gap,
            3.0 * check.gap_std_error
        ),
    )
}

fn criterion_4() -> Outcome {
    let env = gw_env(2000);
    let (_, zeta) = gw_moments();
    let run = RunSettings::new(1_000_000, 4);
    let t = Instant::now();
    let eq5 = mc_l2_increment(&env, 1, 1, &run).unwrap();
    let eq6 = mc_increment_covariance(&env, 1, 1, 2, &run).unwrap();
    let (_, eq7) = mc_l2_span(&env, 1, 1, &[1, 10, 100], &run).unwrap();
    let elapsed = t.elapsed();
    let a1 = gw_a_oracle();
    let eq7_ok = eq7.iter().all(|s| s.estimate.value <= a1 + 3.0 * s.estimate.std_error);
    let pass = eq5.estimate.within(zeta, 3.0) && eq6.within(0.0, 3.0) && eq7_ok;
    let spans: Vec<String> =
        eq7.iter().map(|s| format!("m={}: {:.4}+-{:.4}", s.m, s.estimate.value, s.estimate.std_error)).collect();
    outcome(
        pass,
        format!(
            "E(W_1-W_0)^2 = {:.5} +- {:.5} (oracle {zeta}); cov = {:.2e} +- {:.2e}; E(W_(1+m)-W_1)^2 [{}] <= a_1 = {a1}; {elapsed:.2?}",
            eq5.estimate.value,
            eq5.estimate.std_error,
            eq6.value,
            eq6.std_error,
            spans.join(", ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let env = gw_env(2000);
    let bound = 4.0 * gw_a_oracle() / 64.0;
    let t = Instant::now();
    let h = mc_halving_bound(&env, 64, 0, 400, &RunSettings::new(100_000, 5)).unwrap();
    let elapsed = t.elapsed();
    outcome(
        h.ucl99 <= bound && (h.bound - bound).abs() < 1e-9,
        format!(
            "halving frequency {:.5} ({} of {}), 99% UCL {:.5} <= bound {bound}; {elapsed:.2?}",
            h.estimate.value, h.hits, h.estimate.replicas, h.ucl99
        ),
    )
}

fn criterion_6() -> Outcome {
    let source = EnvSource::quenched(gw_env(1024));
    let t = Instant::now();
    let r = mc_flt_discrepancy(&source, 1, &[64, 256, 1024], &RunSettings::new(22_000, 6)).unwrap();
    let elapsed = t.elapsed();
    let enough = r.summaries.iter().all(|s| s.survivors >= 10_000);
    let rows: Vec<String> = r
        .summaries
        .iter()
        .map(|s| format!("n={} ({} survivors): {:.5}", s.n, s.survivors, s.median.unwrap_or(f64::NAN)))
        .collect();
    outcome(
        enough && r.strictly_decreasing() && elapsed < Duration::from_secs(600),
        format!("median sup|Y_n(t)-Y_n(1)|: {}; {elapsed:.2?}", rows.join(", ")),
    )
}

fn criterion_7() -> Outcome {
    let d = heavy();
    let env = QuenchedEnvironment::constant(d.clone(), 12_000).unwrap();
    let variance = a_l(&env, 1, 100, 1e-9).unwrap();
    let delta = a_l_delta(&env, 1, 0.25, 10_000, 1e-9).unwrap();
    let source = EnvSource::quenched(QuenchedEnvironment::constant(d.clone(), 200).unwrap());
    let t = Instant::now();
    // P(0 < W < eps) ~ eps^beta with beta = -ln f'(q) / ln m, small here, so
    // the flat window sits well below 1e-4.
    let q = d.extinction_prob_constant_env();
    let beta = -pgf_derivative(&d, q).ln() / d.mean().ln();
    let grid: Vec<f64> = (0..=40).map(|i| 10f64.powf(-10.0 + 0.25 * i as f64)).collect();
    let check = mc_w_positivity(&source, 1, 200, &grid, &RunSettings::new(100_000, 7)).unwrap();
    let elapsed = t.elapsed();
    let pass = d.mean() > 1.0
        && variance.verdict == Verdict::Divergent
        && delta.verdict == Verdict::Finite
        && check.holds(3.0);
    outcome(
        pass,
        format!(
            "m = {:.4}; beta = {beta:.3}; a_1 {:?}; a_1^(0.25) {:?} ({:.5}); P(Z_200 > 0) = {:.5} (fixed point {:.5}); plateau {:?}; gap {:.2e} vs 3 SE {:.2e}; {elapsed:.2?}",
            d.mean(),
            variance.verdict,
            delta.verdict,
            delta.partial_sum,
            check.p_survive_n.value,
            1.0 - d.extinction_prob_constant_env(),
            check.plateau.as_ref().map(|p| (p.epsilon_low, p.epsilon_high)),
            check.gap,
            3.0 * check.gap_std_error
        ),
    )
}

/// `f'(s) = sum k p_k s^(k-1)`, summed until the terms are negligible.
fn pgf_derivative(d: &OffspringDistribution, s: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..1_000_000u64 {
        let term = k as f64 * d.pmf(k) * s.powi(k as i32 - 1);
        total += term;
        if k > 10 && term < 1e-17 * total {
            break;
        }
    }
    total
}

fn criterion_8() -> Outcome {
    let grid = [1, 50, 100];
    let t = Instant::now();
    let sup = tightness_diagnostic(&supercritical_preset(), &grid, 200, TightnessSeries::AL, 100, 8, 2.0).unwrap();
    let sub = tightness_diagnostic(&supercritical_preset_with(-0.2), &grid, 200, TightnessSeries::AL, 100, 8, 2.0).unwrap();
    let elapsed = t.elapsed();
    let fmt = |t: &bpve_core::conditions::TightnessTable| {
        t.rows.iter().map(|r| format!("l={}: q50={:.3}", r.l, r.q50)).collect::<Vec<_>>().join(" ")
    };
    outcome(
        !sup.blowup && sub.blowup && elapsed < Duration::from_secs(300),
        format!(
            "supercritical flag {} [{}]; subcritical flag {} [{}]; {elapsed:.2?}",
            sup.blowup,
            fmt(&sup),
            sub.blowup,
            fmt(&sub)
        ),
    )
}

fn criterion_9_config() -> ExperimentConfig {
    let text = r#"{"experiment": "critical", "environment": {"preset": "critical_two_point"},
        "n_list": [64, 128], "env_replicas": 4000, "path_replicas": 10, "master_seed": 9}"#;
    ExperimentConfig::from_json(text).unwrap()
}

fn criterion_9(json_out: &mut Vec<String>) -> Outcome {
    let t = Instant::now();
    let out = pool(1).install(|| experiment::run(&criterion_9_config())).unwrap();
    let elapsed = t.elapsed();
    json_out.push(out.results_string());
    let report: bpve_core::estimators::CriticalReport = serde_json::from_value(out.results["critical"].clone()).unwrap();
    let ratio = report.max_consecutive_ratio.unwrap_or(f64::INFINITY);
    let rows: Vec<String> = report
        .summaries
        .iter()
        .map(|s| format!("n={} ({} survivors): median W {:.4}", s.n, s.survivors, s.median_w.unwrap_or(f64::NAN)))
        .collect();
    outcome(
        !report.inconclusive && report.summaries.iter().all(|s| s.survivors >= 500) && ratio < 2.0,
        format!("{}; ratio {ratio:.3}; {elapsed:.2?}", rows.join(", ")),
    )
}

fn criterion_10(single_thread: &[String]) -> Outcome {
    let threads = 4;
    let again: Vec<String> = pool(threads).install(|| {
        [criterion_3_config(), criterion_9_config()]
            .iter()
            .map(|c| experiment::run(c).unwrap().results_string())
            .collect()
    });
    let same = again.len() == single_thread.len() && again.iter().zip(single_thread).all(|(a, b)| a == b);
    outcome(
        same,
        format!("criteria 3 and 9 re-run on {threads} threads: JSON {}", if same { "bitwise identical" } else { "differs" }),
    )
}

fn main() -> ExitCode {
    let mut json = Vec::new();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!("{} [{id}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    report(1, "closed-form a_l", criterion_1());
    report(2, "condition (A) comparison", criterion_2());
    report(3, "survival equals P(W > 0)", criterion_3(&mut json));
    report(4, "L2 increment identities", criterion_4());
    report(5, "halving bound", criterion_5());
    report(6, "functional limit discrepancy", criterion_6());
    report(7, "heavy-tail regime", criterion_7());
    report(8, "tightness dichotomy", criterion_8());
    report(9, "critical conditional stabilization", criterion_9(&mut json));
    report(10, "thread-count determinism", criterion_10(&json));
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
