//! The `verify` command: statistical and analytic self-checks of the
//! closed-form quantities against simulation.

use std::path::Path;

use icdisp::analytic_bounds::{finite_n_ratio_check, scan_phi, scan_rho, BoundReport, Receiver};
use icdisp::channel::{
    first_order, second_order, tau_jacobian_at_zero, u_covariance, vd_from_matrices, ChannelParams, Mat4, U_DIM,
};
use icdisp::densities::{
    clt_ks_distance, densities_from_tau, empirical_stats, empirical_stats_with, info_densities_closed_form,
    info_densities_log_ratio, sample_sphere_trial, tau_jacobian_fd, u_moments, Codewords,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, VerifyConfig};
use crate::output::write_json;
use crate::VerificationFailed;

pub const SCHEMA_VERSION: u32 = 1;

/// Standard errors allowed between a Monte-Carlo estimate and its target.
pub const SIGMA: f64 = 4.0;
/// Standard errors allowed on the importance-sampling mean.
pub const IS_SIGMA: f64 = 3.0;
pub const VD_SYMBOLIC_TOL: f64 = 1e-12;
pub const JACOBIAN_TOL: f64 = 1e-6;
pub const JACOBIAN_STEP: f64 = 1e-5;
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-8;
/// Largest blocklength drawn by the oracle check.
pub const ORACLE_MAX_N: usize = 500;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub seed: Option<u64>,
    pub stats: Value,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// `|x − target| ≤ k·se`, with zero standard error meaning exact equality.
fn within(x: f64, target: f64, se: f64, k: f64) -> bool {
    (x - target).abs() <= k * se
}

fn check(name: impl Into<String>, passed: bool, seed: Option<u64>, stats: Value) -> Check {
    Check { name: name.into(), passed, seed, stats }
}

/// Closed-form V_d with the optional test perturbation applied symmetrically.
fn analytic_vd(ch: &ChannelParams, v: &VerifyConfig) -> Mat4 {
    let mut vd = second_order(ch).vd;
    if let Some(p) = v.vd_perturbation {
        if p.row < 4 && p.col < 4 {
            vd[p.row][p.col] += p.delta;
            if p.row != p.col {
                vd[p.col][p.row] += p.delta;
            }
        }
    }
    vd
}

/// Two fixed codeword pairs: one drawn from the sphere, one structured.
fn codeword_pairs(ch: &ChannelParams, n: usize, seed: u64) -> icdisp::Result<Vec<(&'static str, Vec<f64>, Vec<f64>)>> {
    let s = sample_sphere_trial(ch, n, seed, 0)?;
    let alternating: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut spike = vec![0.5; n];
    spike[0] = 3.0;
    Ok(vec![("random", s.x1, s.x2), ("alternating_spike", alternating, spike)])
}

fn fixed_codeword_checks(ch: &ChannelParams, v: &VerifyConfig, seed: u64) -> icdisp::Result<Vec<Check>> {
    let f = first_order(ch);
    let so = second_order(ch);
    let mut out = Vec::new();
    for (i, (label, x1, x2)) in codeword_pairs(ch, v.n, seed)?.into_iter().enumerate() {
        let s_seed = seed.wrapping_add(1 + i as u64);
        let st = empirical_stats_with(ch, v.n, v.fixed_trials, s_seed, &Codewords::Fixed { x1, x2 })?;
        let mean_ok = within(st.mean[0], f.i11, st.mean_se[0], SIGMA) && within(st.mean[1], f.i21, st.mean_se[1], SIGMA);
        out.push(check(
            format!("fixed_codeword_mean_{label}"),
            mean_ok,
            Some(s_seed),
            json!({
                "n": v.n, "trials": st.trials,
                "mean": [st.mean[0], st.mean[1]], "mean_se": [st.mean_se[0], st.mean_se[1]],
                "target": [f.i11, f.i21],
            }),
        ));
        let cov_ok = within(st.cov[0][0], so.v1, st.cov_se[0][0], SIGMA)
            && within(st.cov[1][1], so.v2, st.cov_se[1][1], SIGMA)
            && within(st.cov[0][1], 0.0, st.cov_se[0][1], SIGMA);
        out.push(check(
            format!("fixed_codeword_cov_{label}"),
            cov_ok,
            Some(s_seed),
            json!({
                "n": v.n, "trials": st.trials,
                "cov": [[st.cov[0][0], st.cov[0][1]], [st.cov[1][0], st.cov[1][1]]],
                "cov_se": [[st.cov_se[0][0], st.cov_se[0][1]], [st.cov_se[1][0], st.cov_se[1][1]]],
                "target": [[so.v1, 0.0], [0.0, so.v2]],
            }),
        ));
    }
    Ok(out)
}

fn u_cov_check(ch: &ChannelParams, v: &VerifyConfig, seed: u64) -> icdisp::Result<Check> {
    let acc = u_moments(ch, v.n, v.u_blocks, seed)?;
    let cov = acc.cov();
    let se = acc.cov_se();
    let target = u_covariance(ch);
    let mut worst: f64 = 0.0;
    let mut failures = 0usize;
    for i in 0..U_DIM {
        for j in i..U_DIM {
            let k = i * U_DIM + j;
            let z = if se[k] > 0.0 { (cov[k] - target[k]).abs() / se[k] } else { f64::INFINITY };
            worst = worst.max(z);
            if !within(cov[k], target[k], se[k], SIGMA) {
                failures += 1;
            }
        }
    }
    Ok(check(
        "u_covariance",
        failures == 0,
        Some(seed),
        json!({ "draws": acc.count(), "entries": U_DIM * (U_DIM + 1) / 2, "failures": failures, "max_z": worst }),
    ))
}

fn jacobian_check(ch: &ChannelParams) -> Check {
    let fd = tau_jacobian_fd(ch, JACOBIAN_STEP);
    let exact = tau_jacobian_at_zero(ch);
    let err = fd.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(
        "tau_jacobian",
        err <= JACOBIAN_TOL,
        None,
        json!({ "step": JACOBIAN_STEP, "max_abs_error": err, "tolerance": JACOBIAN_TOL }),
    )
}

/// Blocklength of oracle block `t`, spread over `2..=ORACLE_MAX_N`.
fn oracle_n(t: u64) -> usize {
    2 + ((t.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 33) as usize) % (ORACLE_MAX_N - 1)
}

fn block_checks(ch: &ChannelParams, v: &VerifyConfig, seed: u64) -> icdisp::Result<Vec<Check>> {
    let mut oracle_err: f64 = 0.0;
    let mut tau_err: f64 = 0.0;
    for t in 0..v.oracle_blocks {
        let s = sample_sphere_trial(ch, oracle_n(t), seed, t)?;
        let cf = info_densities_closed_form(ch, &s).as_array();
        let lr = info_densities_log_ratio(ch, &s).as_array();
        let tr = densities_from_tau(ch, &s)?.as_array();
        for l in 0..4 {
            oracle_err = oracle_err.max((cf[l] - lr[l]).abs());
            tau_err = tau_err.max((cf[l] - tr[l]).abs());
        }
    }
    Ok(vec![
        check(
            "oracle_equivalence",
            oracle_err <= ORACLE_TOL,
            Some(seed),
            json!({ "blocks": v.oracle_blocks, "max_abs_error": oracle_err, "tolerance": ORACLE_TOL }),
        ),
        check(
            "tau_reconstruction",
            tau_err <= RECONSTRUCTION_TOL,
            Some(seed),
            json!({ "blocks": v.oracle_blocks, "max_abs_error": tau_err, "tolerance": RECONSTRUCTION_TOL }),
        ),
    ])
}

fn vd_checks(ch: &ChannelParams, v: &VerifyConfig, seed: u64) -> icdisp::Result<Vec<Check>> {
    let vd = analytic_vd(ch, v);
    let sym = vd_from_matrices(ch);
    let mut sym_err: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            sym_err = sym_err.max((vd[i][j] - sym[i][j]).abs());
        }
    }
    let st = empirical_stats(ch, v.vd_n, v.vd_trials, seed)?;
    let mut failures = 0usize;
    for i in 0..4 {
        for j in i..4 {
            if !within(st.cov[i][j], vd[i][j], st.cov_se[i][j], SIGMA) {
                failures += 1;
            }
        }
    }
    Ok(vec![
        check(
            "vd_symbolic",
            sym_err <= VD_SYMBOLIC_TOL,
            None,
            json!({ "max_abs_error": sym_err, "tolerance": VD_SYMBOLIC_TOL, "perturbed": v.vd_perturbation.is_some() }),
        ),
        check(
            "vd_empirical",
            failures == 0,
            Some(seed),
            json!({ "n": v.vd_n, "trials": st.trials, "cov": st.cov, "cov_se": st.cov_se, "target": vd, "failures": failures }),
        ),
    ])
}

fn scan_stats(r: &BoundReport) -> Value {
    json!({
        "max_value": r.max_value, "argmax": r.argmax, "refined_argmax": r.refined_argmax,
        "violations": r.violation_count, "tolerance": r.tolerance,
    })
}

fn scan_checks(ch: &ChannelParams, v: &VerifyConfig) -> Vec<Check> {
    let mut out = Vec::new();
    for (rx, tag) in [(Receiver::One, 1), (Receiver::Two, 2)] {
        let p = scan_phi(ch, rx, v.scan_points);
        out.push(check(format!("phi_scan_rx{tag}"), p.passed(), None, scan_stats(&p)));
        let r = scan_rho(ch, rx, v.scan_points);
        out.push(check(format!("rho_scan_rx{tag}"), r.passed(), None, scan_stats(&r)));
    }
    out
}

fn ratio_checks(ch: &ChannelParams, v: &VerifyConfig, seed: u64) -> icdisp::Result<Vec<Check>> {
    let mut out = Vec::new();
    for (rx, tag) in [(Receiver::One, 1), (Receiver::Two, 2)] {
        for (i, &n) in v.ratio_n.iter().enumerate() {
            let s = seed.wrapping_add(i as u64);
            let r = finite_n_ratio_check(ch, rx, n, v.ratio_samples, s)?;
            let ok = r.report.passed() && within(r.q_mean, 1.0, r.q_mean_se, IS_SIGMA);
            out.push(check(
                format!("density_ratio_rx{tag}_n{n}"),
                ok,
                Some(s),
                json!({
                    "samples": r.samples, "violations": r.report.violation_count,
                    "max_log_d_minus_bound": r.report.max_value, "max_log_d": r.max_log_d,
                    "sup_bound": r.sup_bound, "q_mean": r.q_mean, "q_mean_se": r.q_mean_se,
                }),
            ));
        }
    }
    Ok(out)
}

/// The normal approximation should improve with `n`: the last distance must be
/// below the first.
fn ks_check(ch: &ChannelParams, v: &VerifyConfig, seed: u64) -> icdisp::Result<Check> {
    let d: Vec<f64> = v.ks_n.iter().map(|&n| clt_ks_distance(ch, n, v.ks_trials, seed)).collect::<Result<_, _>>()?;
    let ok = d.len() < 2 || d[d.len() - 1] < d[0];
    Ok(check("clt_ks_decay", ok, Some(seed), json!({ "n": v.ks_n, "trials": v.ks_trials, "ks": d })))
}

pub fn build_report(cfg: &RunConfig) -> icdisp::Result<VerifyReport> {
    let ch = &cfg.channel;
    let v = &cfg.verify;
    let base = cfg.seed;
    let mut checks = fixed_codeword_checks(ch, v, base)?;
    checks.push(u_cov_check(ch, v, base.wrapping_add(10))?);
    checks.push(jacobian_check(ch));
    checks.extend(block_checks(ch, v, base.wrapping_add(20))?);
    checks.extend(vd_checks(ch, v, base.wrapping_add(30))?);
    checks.extend(scan_checks(ch, v));
    checks.extend(ratio_checks(ch, v, base.wrapping_add(40))?);
    checks.push(ks_check(ch, v, base.wrapping_add(50))?);
    Ok(VerifyReport { schema_version: SCHEMA_VERSION, seed: base, passed: checks.iter().all(|c| c.passed), checks })
}

pub fn run(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let report = build_report(cfg)?;
    write_json(&out.join("verify.json"), &report)?;
    if report.passed {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        Err(VerificationFailed(failed).into())
    }
}
