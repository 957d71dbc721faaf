//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Oracles are written out here independently of the library: Φ comes from
//! `libm::erfc`, the reference-channel constants are hard-coded, and the information
//! densities are recomputed as direct Gaussian log-likelihood ratios.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use icdisp::analytic_bounds::{finite_n_ratio_check, scan_phi, scan_rho, Receiver, SCAN_POINTS};
use icdisp::channel::{
    classify_regime, first_order, second_order, tau_jacobian_at_zero, u_covariance, ChannelParams, RegimeTag, U_DIM,
};
use icdisp::densities::{
    densities_from_tau, empirical_stats, empirical_stats_with, info_densities_closed_form, info_densities_log_ratio,
    sample_sphere_trial, tau_jacobian_fd, u_moments, Codewords, SphereSample,
};
use icdisp::fbl::{second_order_experiment, theorem_prediction};
use icdisp::mvn::{psi_upper, MvnSpec};
use icdisp::region::{
    classify_target, contains, symmetric_corner_point, trace_boundary, RegionCase, RegionSpec, SecondOrderPoint,
    TargetPoint,
};
use icdisp::rng::CounterRng;

/// Slack constant of the bound sandwich: estimates may sit `c/√n` outside the
/// prediction on top of three standard errors.
const SANDWICH_C: f64 = 1.0;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn ex() -> ChannelParams {
    ChannelParams::new(1.0, 4.0, 3.0, 1.0, 1.0, 1.0).unwrap()
}

/// Direct log-likelihood ratios `log N(y; mean, 1) − log N(y; aux mean, aux var)`
/// summed over the block, in the order (i11, i21, i12, i22).
fn oracle_densities(ch: &ChannelParams, s: &SphereSample) -> [f64; 4] {
    let logpdf = |y: f64, m: f64, v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (y - m).powi(2) / (2.0 * v);
    let a11 = 1.0 + ch.h11 * ch.h11 * ch.p1;
    let a12 = a11 + ch.h21 * ch.h21 * ch.p2;
    let a21 = 1.0 + ch.h22 * ch.h22 * ch.p2;
    let a22 = a21 + ch.h12 * ch.h12 * ch.p1;
    let mut d = [0.0; 4];
    for k in 0..s.n {
        let (x1, x2) = (s.x1[k], s.x2[k]);
        let y1 = ch.h11 * x1 + ch.h21 * x2 + s.z1[k];
        let y2 = ch.h22 * x2 + ch.h12 * x1 + s.z2[k];
        let w1 = logpdf(y1, ch.h11 * x1 + ch.h21 * x2, 1.0);
        let w2 = logpdf(y2, ch.h22 * x2 + ch.h12 * x1, 1.0);
        d[0] += w1 - logpdf(y1, ch.h21 * x2, a11);
        d[1] += w2 - logpdf(y2, ch.h12 * x1, a21);
        d[2] += w1 - logpdf(y1, 0.0, a12);
        d[3] += w2 - logpdf(y2, 0.0, a22);
    }
    d
}

/// Blocklength of block `t`, spread over 2..=500.
fn block_n(t: u64) -> usize {
    2 + (CounterRng::new(0xb10c, t, 0).u64_at(0) % 499) as usize
}

fn c1_example_channel() -> Outcome {
    let ch = ex();
    let r = classify_regime(&ch);
    ensure(r.tag == RegimeTag::StrictlyVeryStrong, || format!("regime {:?}", r.tag))?;
    let f = first_order(&ch);
    let s = second_order(&ch);
    let want = [
        ("I11", f.i11, 0.5 * 2f64.ln()),
        ("I21", f.i21, 0.5 * 2f64.ln()),
        ("I12", f.i12, 0.5 * 11f64.ln()),
        ("I22", f.i22, 0.5 * 18f64.ln()),
        ("V1", s.v1, 0.375),
        ("V2", s.v2, 0.375),
    ];
    for (name, got, exact) in want {
        ensure((got - exact).abs() <= 1e-12, || format!("{name} = {got}, want {exact}"))?;
    }
    ensure(f.i11 + f.i21 < f.i12 && f.i11 + f.i21 < f.i22, || "sum rate not below cross rates".into())?;
    Ok(format!("I = ({:.6}, {:.6}, {:.6}, {:.6}), V = {}", f.i11, f.i21, f.i12, f.i22, s.v1))
}

fn c2_oracle_equivalence() -> Outcome {
    let ch = ex();
    let mut worst: f64 = 0.0;
    for t in 0..1000 {
        let s = sample_sphere_trial(&ch, block_n(t), 2024, t).map_err(|e| e.to_string())?;
        let cf = info_densities_closed_form(&ch, &s).as_array();
        let lr = info_densities_log_ratio(&ch, &s).as_array();
        let or = oracle_densities(&ch, &s);
        for l in 0..4 {
            worst = worst.max((cf[l] - lr[l]).abs()).max((cf[l] - or[l]).abs());
        }
    }
    ensure(worst <= 1e-8, || format!("max deviation {worst:e} nats"))?;
    Ok(format!("1000 blocks, max deviation {worst:.2e} nats"))
}

fn c3_fixed_codewords() -> Outcome {
    let ch = ex();
    let n = 100;
    let i = 0.5 * 2f64.ln();
    let random = sample_sphere_trial(&ch, n, 31, 0).map_err(|e| e.to_string())?;
    let alternating: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut spike = vec![0.5; n];
    spike[0] = 3.0;
    let pairs = [(random.x1, random.x2), (alternating, spike)];
    let mut stats = Vec::new();
    for (p, (x1, x2)) in pairs.into_iter().enumerate() {
        let st = empirical_stats_with(&ch, n, 100_000, 300 + p as u64, &Codewords::Fixed { x1, x2 })
            .map_err(|e| e.to_string())?;
        for u in 0..2 {
            let z = (st.mean[u] - i) / st.mean_se[u];
            ensure(z.abs() <= 4.0, || format!("pair {p}: mean {u} off by {z:.2} se"))?;
            let z = (st.cov[u][u] - 0.375) / st.cov_se[u][u];
            ensure(z.abs() <= 4.0, || format!("pair {p}: variance {u} off by {z:.2} se"))?;
        }
        let z = st.cov[0][1] / st.cov_se[0][1];
        ensure(z.abs() <= 4.0, || format!("pair {p}: covariance off by {z:.2} se"))?;
        stats.push(st);
    }
    let (a, b) = (&stats[0], &stats[1]);
    for u in 0..2 {
        let z = (a.mean[u] - b.mean[u]) / a.mean_se[u].hypot(b.mean_se[u]);
        ensure(z.abs() <= 4.0, || format!("pairs disagree on mean {u} by {z:.2} se"))?;
        let z = (a.cov[u][u] - b.cov[u][u]) / a.cov_se[u][u].hypot(b.cov_se[u][u]);
        ensure(z.abs() <= 4.0, || format!("pairs disagree on variance {u} by {z:.2} se"))?;
    }
    Ok(format!(
        "means ({:.5}, {:.5}) / ({:.5}, {:.5}), variances ({:.4}, {:.4}) / ({:.4}, {:.4})",
        a.mean[0], a.mean[1], b.mean[0], b.mean[1], a.cov[0][0], a.cov[1][1], b.cov[0][0], b.cov[1][1]
    ))
}

/// The closed-form reference-channel covariance of the per-letter U vector.
fn example_u_covariance() -> [[f64; U_DIM]; U_DIM] {
    let diag = [2.0, 1.0, 9.0, 9.0, 2.0, 1.0, 16.0, 16.0, 2.0, 2.0];
    let mut c = [[0.0; U_DIM]; U_DIM];
    for i in 0..U_DIM {
        c[i][i] = diag[i];
    }
    c[3][7] = 12.0;
    c[7][3] = 12.0;
    c
}

/// Jacobian of τ at the origin for the reference channel, rows (τ11, τ21, τ12, τ22).
fn example_jacobian() -> [[f64; U_DIM]; 4] {
    let mut j = [[0.0; U_DIM]; 4];
    j[0][0] = 1.0;
    j[0][1] = 2.0;
    j[1][4] = 1.0;
    j[1][5] = 2.0;
    j[2][0] = 10.0;
    j[2][1] = 2.0;
    j[2][2] = 2.0;
    j[2][3] = 2.0;
    j[3][4] = 17.0;
    j[3][5] = 2.0;
    j[3][6] = 2.0;
    j[3][7] = 2.0;
    j
}

fn c4_u_covariance() -> Outcome {
    let ch = ex();
    let target = example_u_covariance();
    let lib = u_covariance(&ch);
    let acc = u_moments(&ch, 100, 10_000, 404).map_err(|e| e.to_string())?;
    ensure(acc.count() == 1_000_000, || format!("{} draws", acc.count()))?;
    let (cov, se) = (acc.cov(), acc.cov_se());
    let mut worst: f64 = 0.0;
    for i in 0..U_DIM {
        for j in i..U_DIM {
            let k = i * U_DIM + j;
            ensure((lib[k] - target[i][j]).abs() <= 1e-12, || format!("closed form ({i},{j}) = {}", lib[k]))?;
            let z = (cov[k] - target[i][j]) / se[k];
            worst = worst.max(z.abs());
            ensure(z.abs() <= 4.0, || format!("entry ({i},{j}) = {:.5} off by {z:.2} se", cov[k]))?;
        }
    }
    let jt = example_jacobian();
    let fd = tau_jacobian_fd(&ch, 1e-5);
    let exact = tau_jacobian_at_zero(&ch);
    let mut jerr: f64 = 0.0;
    for r in 0..4 {
        for c in 0..U_DIM {
            jerr = jerr.max((fd[r * U_DIM + c] - jt[r][c]).abs());
            ensure((exact[r * U_DIM + c] - jt[r][c]).abs() <= 1e-12, || format!("J({r},{c}) = {}", exact[r * U_DIM + c]))?;
        }
    }
    ensure(jerr <= 1e-6, || format!("finite-difference Jacobian off by {jerr:e}"))?;
    let mut rerr: f64 = 0.0;
    for t in 0..1000 {
        let s = sample_sphere_trial(&ch, block_n(t), 4040, t).map_err(|e| e.to_string())?;
        let rebuilt = densities_from_tau(&ch, &s).map_err(|e| e.to_string())?.as_array();
        let direct = oracle_densities(&ch, &s);
        for l in 0..4 {
            rerr = rerr.max((rebuilt[l] - direct[l]).abs());
        }
    }
    ensure(rerr <= 1e-8, || format!("τ reconstruction off by {rerr:e}"))?;
    Ok(format!("55 entries, worst {worst:.2} se; Jacobian error {jerr:.1e}; reconstruction error {rerr:.1e}"))
}

fn c5_dispersion_matrix() -> Outcome {
    let ch = ex();
    let v = 0.375;
    let oracle = [
        [v, 0.0, 3.0 / 11.0, 0.0],
        [0.0, v, 0.0, 19.0 / 72.0],
        [3.0 / 11.0, 0.0, 69.0 / 121.0, 12.0 / 198.0],
        [0.0, 19.0 / 72.0, 12.0 / 198.0, 177.5 / 324.0],
    ];
    let vd = second_order(&ch).vd;
    let st = empirical_stats(&ch, 200, 100_000, 505).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            ensure((vd[i][j] - oracle[i][j]).abs() <= 1e-12, || format!("analytic V_d({i},{j}) = {}", vd[i][j]))?;
            let z = (st.cov[i][j] - vd[i][j]) / st.cov_se[i][j];
            worst = worst.max(z.abs());
            ensure(z.abs() <= 4.0, || format!("V_d({i},{j}) = {:.5} off by {z:.2} se", st.cov[i][j]))?;
        }
    }
    Ok(format!(
        "worst {worst:.2} se; sample V_d(1,2) = {:.4}, V_c = diag({:.4}, {:.4})",
        st.cov[0][1], st.cov[0][0], st.cov[1][1]
    ))
}

/// Bisection for `Φ(−l/√v)² = 1−ε`.
fn bisect_symmetric(v: f64, eps: f64) -> f64 {
    let g = |l: f64| phi(-l / v.sqrt()).powi(2) - (1.0 - eps);
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c6_region() -> Outcome {
    let g = CounterRng::new(606, 0, 0);
    let mut c = 0u64;
    let mut next = || {
        c += 1;
        g.uniform_at(c)
    };
    let mut psi_err: f64 = 0.0;
    for _ in 0..1000 {
        let d = 1 + (next() * 4.0) as usize;
        let mean: Vec<f64> = (0..d).map(|_| 2.0 * next() - 1.0).collect();
        let var: Vec<f64> = (0..d).map(|_| 0.05 + 3.0 * next()).collect();
        let t: Vec<f64> = (0..d).map(|_| 8.0 * next() - 4.0).collect();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = var[i];
        }
        let spec = MvnSpec::new(mean.clone(), cov).map_err(|e| e.to_string())?;
        let got = psi_upper(&t, &spec).map_err(|e| e.to_string())?;
        let prod: f64 = (0..d).map(|i| phi((t[i] - mean[i]) / var[i].sqrt())).product();
        psi_err = psi_err.max((got - prod).abs());
    }
    ensure(psi_err <= 1e-10, || format!("diagonal Ψ off product by {psi_err:e}"))?;

    let ch = ex();
    let f = first_order(&ch);
    let eps = 0.001;
    let spec = classify_target(&ch, &TargetPoint::new(f.i11, f.i21, eps).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(spec.case == RegionCase::Corner, || format!("case {:?}", spec.case))?;
    let trace = trace_boundary(&spec, 1000).map_err(|e| e.to_string())?;
    let sd = 0.375f64.sqrt();
    let mut trace_err: f64 = 0.0;
    for p in &trace.points {
        trace_err = trace_err.max((phi(-p.l1 / sd) * phi(-p.l2 / sd) - (1.0 - eps)).abs());
        ensure(p.l1 < 0.0 && p.l2 < 0.0, || format!("point ({}, {}) outside third quadrant", p.l1, p.l2))?;
    }
    ensure(trace_err <= 1e-9, || format!("trace off the boundary by {trace_err:e}"))?;

    let l = symmetric_corner_point(0.375, eps);
    let oracle = bisect_symmetric(0.375, eps);
    ensure((l - oracle).abs() <= 1e-6, || format!("symmetric point {l} vs bisection {oracle}"))?;

    let region = RegionSpec::new(RegionCase::Corner, 0.375, 0.375, eps).map_err(|e| e.to_string())?;
    let mut inside = 0;
    for _ in 0..10_000 {
        let p = SecondOrderPoint { l1: -6.0 + 6.0 * next(), l2: -6.0 + 6.0 * next() };
        let q = SecondOrderPoint { l1: p.l1 - 2.0 * next(), l2: p.l2 - 2.0 * next() };
        if contains(&region, p) {
            inside += 1;
            ensure(contains(&region, q), || format!("({}, {}) in, ({}, {}) out", p.l1, p.l2, q.l1, q.l2))?;
        }
    }
    Ok(format!(
        "Ψ error {psi_err:.1e}; trace error {trace_err:.1e} over {} points; symmetric point {l:.7}; \
         downward closure on {inside} interior points",
        trace.points.len()
    ))
}

fn c7_bound_sandwich() -> Outcome {
    let ch = ex();
    let f = first_order(&ch);
    let eps = 0.1;
    let tp = TargetPoint::new(f.i11, f.i21, eps).map_err(|e| e.to_string())?;
    let l = bisect_symmetric(0.375, eps);
    let pt = SecondOrderPoint { l1: l, l2: l };
    let pred = 1.0 - phi(-l / 0.375f64.sqrt()).powi(2);
    ensure((theorem_prediction(&ch, pt) - pred).abs() <= 1e-12, || "prediction mismatch".into())?;
    let ns = [100, 200, 400];
    let rows = second_order_experiment(&ch, &tp, pt, &ns, 100_000, 707, None).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for r in &rows {
        let slack = SANDWICH_C / (r.n as f64).sqrt();
        let conv = &r.converse;
        ensure(conv.value <= pred + 3.0 * conv.std_error + slack, || {
            format!("n={}: converse {} above prediction {pred}", r.n, conv.value)
        })?;
        let ach = &r.achievability;
        ensure(ach.event_probability >= pred - 3.0 * ach.std_error - slack, || {
            format!("n={}: achievability union {} below prediction {pred}", r.n, ach.event_probability)
        })?;
        lines.push(format!(
            "n={} conv {:.4} ach-union {:.4}",
            r.n, conv.event_probability, ach.event_probability
        ));
    }
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let noise = |x: f64, y: f64| 3.0 * x.hypot(y);
        ensure(
            b.achievability_gap().abs()
                <= a.achievability_gap().abs() + noise(a.achievability.std_error, b.achievability.std_error),
            || format!("achievability gap grows from n={} to n={}", a.n, b.n),
        )?;
        ensure(
            b.converse_gap().abs() <= a.converse_gap().abs() + noise(a.converse.std_error, b.converse.std_error),
            || format!("converse gap grows from n={} to n={}", a.n, b.n),
        )?;
    }
    Ok(format!("prediction {pred:.4}, c = {SANDWICH_C}; {}", lines.join("; ")))
}

fn c8_analytic_bounds() -> Outcome {
    let ch = ex();
    let p = scan_phi(&ch, Receiver::One, SCAN_POINTS);
    ensure(p.max_value <= 1e-10, || format!("φ max {}", p.max_value))?;
    ensure((p.argmax - 2.0).abs() <= 1e-3, || format!("φ argmax {}", p.argmax))?;
    let r = scan_rho(&ch, Receiver::One, SCAN_POINTS);
    ensure(r.max_value <= 1e-10, || format!("ρ max {}", r.max_value))?;
    ensure((r.argmax - 10.0).abs() <= 1e-3, || format!("ρ argmax {}", r.argmax))?;
    let mut qs = Vec::new();
    for (i, n) in [50usize, 100, 200].into_iter().enumerate() {
        let c = finite_n_ratio_check(&ch, Receiver::One, n, 10_000, 800 + i as u64).map_err(|e| e.to_string())?;
        ensure(c.report.violation_count == 0, || format!("n={n}: {} violations", c.report.violation_count))?;
        let z = (c.q_mean - 1.0) / c.q_mean_se;
        ensure(z.abs() <= 3.0, || format!("n={n}: E_Q[D] = {} ({z:.2} se from 1)", c.q_mean))?;
        qs.push(format!("{:.4}±{:.4}", c.q_mean, c.q_mean_se));
    }
    Ok(format!(
        "φ max {:.1e} at {:.5}; ρ max {:.1e} at {:.5}; E_Q[D] = {}",
        p.max_value,
        p.argmax,
        r.max_value,
        r.argmax,
        qs.join(", ")
    ))
}

fn run_cli(cmd: &str, config: &Path, out: &Path, threads: &str) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_icdisp"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", threads, "--seed", "99"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("{cmd} failed: {}", String::from_utf8_lossy(&o.stderr)))
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "channel": { "h11": 1, "h12": 4, "h21": 3, "h22": 1, "p1": 1, "p2": 1 },
            "target": { "kappa1": "capacity", "kappa2": "capacity", "epsilon": 0.1 },
            "simulate": { "point": "symmetric_boundary", "n_list": [100, 200], "trials": 20000 },
            "verify": { "n": 50, "fixed_trials": 2000, "u_blocks": 200, "vd_n": 50, "vd_trials": 2000,
                        "oracle_blocks": 50, "ratio_n": [50], "ratio_samples": 1000, "scan_points": 2000,
                        "ks_n": [10, 100], "ks_trials": 5000 }
        }"#,
    )
    .map_err(|e| e.to_string())?;
    let mut compared = Vec::new();
    for (cmd, file) in [("simulate", "simulate.csv"), ("region", "region.csv"), ("verify", "verify.json")] {
        let runs: Vec<Vec<u8>> = ["1", "4", "4"]
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let out = dir.path().join(format!("{cmd}-{i}"));
                run_cli(cmd, &config, &out, t)?;
                std::fs::read(out.join(file)).map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        ensure(runs[0] == runs[1] && runs[1] == runs[2], || format!("{file} differs between runs"))?;
        compared.push(format!("{file} ({} bytes)", runs[0].len()));
    }
    Ok(format!("identical under --threads 1/4/4: {}", compared.join(", ")))
}

fn main() {
    // (name, check, runtime budget in seconds)
    let criteria: [(&str, fn() -> Outcome, f64); 9] = [
        ("example channel constants", c1_example_channel, 1.0),
        ("closed form vs log-ratio oracle", c2_oracle_equivalence, 30.0),
        ("fixed-codeword moments", c3_fixed_codewords, 120.0),
        ("U covariance, τ Jacobian, reconstruction", c4_u_covariance, 180.0),
        ("dispersion matrix", c5_dispersion_matrix, 120.0),
        ("second-order region", c6_region, 10.0),
        ("bound sandwich", c7_bound_sandwich, 600.0),
        ("analytic bounds", c8_analytic_bounds, 300.0),
        ("determinism", c9_determinism, f64::INFINITY),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let res = res.and_then(|d| {
            ensure(secs <= *budget, || format!("took {secs:.1}s, budget {budget}s"))?;
            Ok(d)
        });
        match res {
            Ok(detail) => println!("criterion {}: PASS  {name} [{secs:.1}s] {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} [{secs:.1}s] {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
