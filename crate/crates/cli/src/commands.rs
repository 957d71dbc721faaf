use std::path::Path;

use anyhow::Context;
use icdisp::channel::{
    capacity_region_vertices, classify_regime, first_order, second_order, Alphas, FirstOrder, Mat4, RegimeTag,
};
use icdisp::fbl::second_order_experiment;
use icdisp::region::{
    classify_target, single_user_boundary, trace_boundary, RegionCase, RegionSpec, SecondOrderPoint, TargetPoint,
};
use icdisp::special::std_normal_cdf;
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};
use crate::output::{fmt_f64, region_svg, write_csv, write_json};

#[derive(Serialize)]
struct AnalyzeReport {
    regime: RegimeTag,
    slack1: f64,
    slack2: f64,
    first_order: FirstOrder,
    v1: f64,
    v2: f64,
    vd: Mat4,
    alphas: Alphas,
    /// Counter-clockwise from the origin; absent outside very strong interference.
    capacity_rectangle: Option<[(f64, f64); 4]>,
}

pub fn analyze(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let ch = &cfg.channel;
    let r = classify_regime(ch);
    let s = second_order(ch);
    let report = AnalyzeReport {
        regime: r.tag,
        slack1: r.slack1,
        slack2: r.slack2,
        first_order: first_order(ch),
        v1: s.v1,
        v2: s.v2,
        vd: s.vd,
        alphas: s.alphas,
        capacity_rectangle: capacity_region_vertices(ch).ok(),
    };
    write_json(&out.join("analyze.json"), &report)
}

fn target(cfg: &RunConfig) -> anyhow::Result<TargetPoint> {
    let t = cfg.target.as_ref().ok_or_else(|| ConfigError("field `target` is required".into()))?;
    t.resolve(&cfg.channel).map_err(|e| ConfigError(format!("field `target`: {e}")).into())
}

#[derive(Serialize)]
struct RegionReport {
    case: RegionCase,
    v1: f64,
    v2: f64,
    epsilon: f64,
    /// `"all"` or `"empty"` when the region is the whole plane or nothing.
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<&'static str>,
    points: usize,
    clipped: bool,
}

/// Width, in standard deviations, of the free axis in the one-user cases.
const FREE_AXIS_SPAN: f64 = 4.0;

pub fn region(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let tp = target(cfg)?;
    let spec = classify_target(&cfg.channel, &tp)?;
    let grid = cfg.region.grid;
    if grid < 2 {
        return Err(ConfigError(format!("field `region.grid`: need at least 2 points, got {grid}")).into());
    }
    let mut report = RegionReport {
        case: spec.case,
        v1: spec.v1,
        v2: spec.v2,
        epsilon: spec.epsilon,
        region: None,
        points: 0,
        clipped: false,
    };
    let points = match spec.case {
        RegionCase::Interior | RegionCase::Exterior => {
            report.region = Some(if spec.case == RegionCase::Interior { "all" } else { "empty" });
            return write_json(&out.join("region.json"), &report);
        }
        RegionCase::Corner => {
            let t = trace_boundary(&spec, grid)?;
            report.clipped = t.clipped;
            t.points
        }
        RegionCase::Vertical => {
            let l1 = single_user_boundary(spec.v1, spec.epsilon);
            free_axis(spec.v2.sqrt(), grid).map(|l2| SecondOrderPoint { l1, l2 }).collect()
        }
        RegionCase::Horizontal => {
            let l2 = single_user_boundary(spec.v2, spec.epsilon);
            free_axis(spec.v1.sqrt(), grid).map(|l1| SecondOrderPoint { l1, l2 }).rev().collect()
        }
    };
    report.points = points.len();
    let rows: Vec<Vec<String>> = points.iter().map(|p| vec![fmt_f64(p.l1), fmt_f64(p.l2)]).collect();
    write_csv(&out.join("region.csv"), &["l1", "l2"], &rows)?;
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.l1, p.l2)).collect();
    let title = format!("{:?} case, epsilon = {}", spec.case, spec.epsilon);
    let svg_path = out.join("region.svg");
    std::fs::write(&svg_path, region_svg(&xy, &title)).with_context(|| format!("writing {}", svg_path.display()))?;
    write_json(&out.join("region.json"), &report)
}

/// Descending grid on `[−4σ, 4σ]`, so traces run from top-left to bottom-right.
fn free_axis(sd: f64, grid: usize) -> impl DoubleEndedIterator<Item = f64> {
    let half = FREE_AXIS_SPAN * sd;
    (0..grid).map(move |k| half - 2.0 * half * k as f64 / (grid - 1) as f64)
}

fn phi(x: f64) -> f64 {
    std_normal_cdf(x).expect("finite argument")
}

/// The corner-boundary point with `l1 = l2`, by bisection on
/// `Φ(−l/√v1) Φ(−l/√v2) = 1−ε`.
pub fn diagonal_boundary_point(spec: &RegionSpec) -> f64 {
    let (s1, s2) = (spec.v1.sqrt(), spec.v2.sqrt());
    let g = |l: f64| phi(-l / s1) * phi(-l / s2) - (1.0 - spec.epsilon);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) < 0.0 {
        lo *= 2.0;
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub const SIMULATE_HEADER: [&str; 8] = [
    "n",
    "achievability_estimate",
    "achievability_stderr",
    "converse_estimate",
    "converse_stderr",
    "theorem_prediction",
    "achievability_union",
    "converse_union",
];

pub fn simulate(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let tp = target(cfg)?;
    let sim = cfg.simulate.as_ref().ok_or_else(|| ConfigError("field `simulate` is required".into()))?;
    if sim.n_list.is_empty() {
        return Err(ConfigError("field `simulate.n_list` is empty".into()).into());
    }
    let ch = &cfg.channel;
    let pt = match sim.point.explicit() {
        Some(p) => p,
        None => {
            let spec = classify_target(ch, &tp)?;
            let l = diagonal_boundary_point(&spec);
            SecondOrderPoint { l1: l, l2: l }
        }
    };
    let rows = second_order_experiment(ch, &tp, pt, &sim.n_list, sim.trials, cfg.seed, sim.k)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.achievability.value),
                fmt_f64(r.achievability.std_error),
                fmt_f64(r.converse.value),
                fmt_f64(r.converse.std_error),
                fmt_f64(r.prediction),
                fmt_f64(r.achievability.event_probability),
                fmt_f64(r.converse.event_probability),
            ]
        })
        .collect();
    write_csv(&out.join("simulate.csv"), &SIMULATE_HEADER, &table)
}
