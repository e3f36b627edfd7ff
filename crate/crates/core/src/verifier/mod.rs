//! Sampled classification of maps: f-harmonicity, horizontal weak
//! conformality, f-harmonic morphisms, horizontal homothety and minimal
//! fibers, together with the pullback, two-weight and polynomial checks
//! and the built-in catalog.
//!
//! Every "for all points" statement is checked on a seeded sample, so a
//! positive verdict is numerical evidence rather than proof.

mod catalog;
pub mod identities;
mod sampler;

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use catalog::{catalog, hopf_round, lookup, sphere2, sphere3, CatalogEntry, Expected};
pub use sampler::{sample_points, SamplerConfig, ATTEMPTS_PER_POINT};

use crate::conformal::{dilation_jet_unchecked, fiber_from, homothety_from, report_from_jet};
use crate::exprlang::{BinOp, Expr, Func, Jet2, Program};
use crate::geometry::{metric_at_side, RiemannianChart};
use crate::mapcalc::{map_jet, MapSpec};
use crate::{Error, Result, Side};

/// Results at one sample point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    /// `‖τ_f(φ)‖_h`
    pub f_tension_residual: f64,
    pub hwc_residual: f64,
    pub lambda_sq: f64,
    pub is_critical: bool,
    pub is_indeterminate: bool,
    pub is_submersive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horiz_grad_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_homothetic: Option<bool>,
    /// `‖dφ(μ)‖_h`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibers_minimal: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Points that entered the statistics (non-critical ones).
    pub count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackSummary {
    pub test_functions: usize,
    pub max_identity_residual: f64,
    pub max_tau_term: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub max_f_tension_residual: f64,
    /// Over determinate, non-critical points.
    pub max_hwc_residual: f64,
    pub is_f_harmonic: bool,
    pub is_hwc: bool,
    pub is_f_harmonic_morphism: bool,
    pub is_horizontally_homothetic: Option<bool>,
    pub fibers_minimal: Option<bool>,
    pub lambda_stats: Option<LambdaStats>,
    /// Every sampled point is critical (constant map).
    pub degenerate: bool,
    pub critical_points: usize,
    pub indeterminate_points: usize,
    /// Independent check of a positive morphism verdict through the
    /// pullback identity for random test functions.
    pub pullback: Option<PullbackSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_resid: f64,
    pub tol_hwc: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub map: String,
    pub coords: Vec<String>,
    pub points: Vec<PointReport>,
    pub aggregate: Aggregate,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub count: usize,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }

    /// One row per sample: coordinates, residuals, `λ²`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for c in &self.coords {
            let _ = write!(s, "{c},");
        }
        s.push_str("f_tension_residual,hwc_residual,lambda_sq,critical\n");
        for p in &self.points {
            for x in &p.point {
                let _ = write!(s, "{x},");
            }
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{}",
                p.f_tension_residual, p.hwc_residual, p.lambda_sq, p.is_critical
            );
        }
        s
    }
}

/// Weight of the map, or the constant 1 when it has none.
fn weight_or_one(map: &MapSpec, p: &[f64]) -> Result<Jet2<f64>> {
    match map.weight_expr() {
        Some(_) => map.weight_jet(p),
        None => Ok(Jet2::constant(1.0, p.len())),
    }
}

fn point_report(map: &MapSpec, p: &[f64], cfg: &SamplerConfig) -> Result<PointReport> {
    let jet = map_jet(map, p)?;
    let f = weight_or_one(map, p)?;
    let tau_f = jet.f_tension_with(&f);
    let report = report_from_jet(&jet, cfg.tol_hwc)?;
    let mut out = PointReport {
        point: p.to_vec(),
        image: jet.image.clone(),
        f_tension_residual: jet.target.norm(&tau_f),
        hwc_residual: report.hwc_residual,
        lambda_sq: report.lambda_sq,
        is_critical: report.is_critical,
        is_indeterminate: report.is_indeterminate,
        is_submersive: report.is_submersive,
        horiz_grad_norm: None,
        is_homothetic: None,
        fiber_residual: None,
        fibers_minimal: None,
    };
    if report.is_hwc
        && !report.is_critical
        && !report.is_indeterminate
        && map.partial_expr(0, 0).is_some()
    {
        let l2 = dilation_jet_unchecked(map, &jet)?;
        let hom = homothety_from(&report, &l2, cfg.tol_hwc);
        out.horiz_grad_norm = Some(hom.horiz_grad_norm);
        out.is_homothetic = Some(hom.is_homothetic);
        if map.m() > map.n() && report.is_submersive {
            let fib = fiber_from(&jet, &report, &l2);
            let scale = 1.0
                + jet.target.norm(&jet.tension())
                + jet.target.norm(&fib.grad_ln_lambda_pushforward);
            out.fiber_residual = Some(fib.minimal_fiber_residual);
            out.fibers_minimal = Some(fib.minimal_fiber_residual <= cfg.tol_resid * scale);
        }
    }
    Ok(out)
}

/// Samples the source, evaluates every pointwise test and aggregates.
/// Positive morphism verdicts are cross-checked by the pullback identity.
pub fn classify(map: &MapSpec, cfg: &SamplerConfig) -> Result<Verdict> {
    let pts = sample_points(map, cfg)?;
    let points: Vec<PointReport> = pts
        .par_iter()
        .map(|p| point_report(map, p, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let max_f = points
        .iter()
        .fold(0.0f64, |m, p| m.max(p.f_tension_residual));
    let determinate = || {
        points
            .iter()
            .filter(|p| !p.is_critical && !p.is_indeterminate)
    };
    let max_hwc = determinate().fold(0.0f64, |m, p| m.max(p.hwc_residual));
    let critical_points = points.iter().filter(|p| p.is_critical).count();
    let indeterminate_points = points.iter().filter(|p| p.is_indeterminate).count();
    let is_f_harmonic = max_f <= cfg.tol_resid;
    let is_hwc = determinate().all(|p| p.hwc_residual <= cfg.tol_hwc && p.lambda_sq > 0.0);
    let degenerate = critical_points == points.len();
    let all_of = |get: fn(&PointReport) -> Option<bool>| -> Option<bool> {
        let vals: Vec<Option<bool>> = determinate().map(get).collect();
        if vals.is_empty() || vals.iter().any(Option::is_none) {
            None
        } else {
            Some(vals.iter().all(|v| *v == Some(true)))
        }
    };
    let (is_horizontally_homothetic, fibers_minimal) = if is_hwc {
        (
            all_of(|p| p.is_homothetic),
            if map.m() > map.n() {
                all_of(|p| p.fibers_minimal)
            } else {
                None
            },
        )
    } else {
        (None, None)
    };
    let lambdas: Vec<f64> = points
        .iter()
        .filter(|p| !p.is_critical)
        .map(|p| p.lambda_sq)
        .collect();
    let lambda_stats = (!lambdas.is_empty()).then(|| LambdaStats {
        min: lambdas.iter().cloned().fold(f64::INFINITY, f64::min),
        max: lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean: lambdas.iter().sum::<f64>() / lambdas.len() as f64,
        count: lambdas.len(),
    });
    let is_f_harmonic_morphism = is_f_harmonic && is_hwc;
    let pullback = if is_f_harmonic_morphism
        && !degenerate
        && cfg.test_functions > 0
        && map.weight_expr().is_some()
    {
        let r = pullback_on_points(map, &pts, &points, cfg.test_functions, cfg)?;
        Some(PullbackSummary {
            test_functions: cfg.test_functions,
            max_identity_residual: r.max_identity_residual,
            max_tau_term: r.max_tau_term,
            passed: r.max_identity_residual <= cfg.tol_resid && r.max_tau_term <= cfg.tol_resid,
        })
    } else {
        None
    };
    Ok(Verdict {
        map: map.name().to_string(),
        coords: map.source().coords().to_vec(),
        points,
        aggregate: Aggregate {
            max_f_tension_residual: max_f,
            max_hwc_residual: max_hwc,
            is_f_harmonic,
            is_hwc,
            is_f_harmonic_morphism,
            is_horizontally_homothetic,
            fibers_minimal,
            lambda_stats,
            degenerate,
            critical_points,
            indeterminate_points,
            pullback,
        },
        tolerances: Tolerances {
            tol_resid: cfg.tol_resid,
            tol_hwc: cfg.tol_hwc,
            margin: cfg.margin,
        },
        seed: cfg.seed,
        count: cfg.count,
    })
}

/// Random quadratic-plus-trigonometric functions on the target chart with
/// coefficients in `[−1, 1]`.
pub fn random_test_functions(target: &RiemannianChart, k: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57_f00d);
    let vars: Vec<Expr> = target.coords().iter().map(|c| Expr::var(c)).collect();
    let n = vars.len();
    let mut c = move || Expr::num((rng.gen_range(-1.0..=1.0f64) * 1e6).round() / 1e6);
    let bin = |op, a, b| Expr::binary(op, a, b);
    (0..k)
        .map(|idx| {
            let mut e = c();
            for a in 0..n {
                e = bin(BinOp::Add, e, bin(BinOp::Mul, c(), vars[a].clone()));
                for b in a..n {
                    e = bin(
                        BinOp::Add,
                        e,
                        bin(
                            BinOp::Mul,
                            c(),
                            bin(BinOp::Mul, vars[a].clone(), vars[b].clone()),
                        ),
                    );
                }
            }
            let mut arg = c();
            for v in &vars {
                arg = bin(BinOp::Add, arg, bin(BinOp::Mul, c(), v.clone()));
            }
            let trig = if idx % 2 == 0 { Func::Sin } else { Func::Cos };
            bin(
                BinOp::Add,
                e,
                bin(BinOp::Mul, c(), Expr::call(trig, vec![arg])),
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackResult {
    /// `max |Δ_f(u∘φ) − fλ²(Δu)∘φ − du(τ_f)| / (1 + |Δ_f(u∘φ)|)`
    pub max_identity_residual: f64,
    /// `max |du(τ_f(φ))|`; zero for f-harmonic maps.
    pub max_tau_term: f64,
    pub per_fn: Vec<f64>,
    pub points: usize,
}

/// Checks `Δ_f(u∘φ) = fλ²(Δu)∘φ + du(τ_f(φ))` for `k` random test
/// functions on seeded sample points. Requires a weight and horizontal
/// weak conformality at every determinate sample.
pub fn morphism_pullback_test(
    map: &MapSpec,
    k: usize,
    cfg: &SamplerConfig,
) -> Result<PullbackResult> {
    if map.weight_expr().is_none() {
        return Err(Error::WeightMissing(map.name().to_string()));
    }
    let pts = sample_points(map, cfg)?;
    let reports: Vec<PointReport> = pts
        .par_iter()
        .map(|p| point_report(map, p, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    pullback_on_points(map, &pts, &reports, k, cfg)
}

fn pullback_on_points(
    map: &MapSpec,
    pts: &[Vec<f64>],
    reports: &[PointReport],
    k: usize,
    cfg: &SamplerConfig,
) -> Result<PullbackResult> {
    let determinate = reports
        .iter()
        .filter(|r| !r.is_critical && !r.is_indeterminate);
    if let Some(bad) = determinate
        .clone()
        .find(|r| r.hwc_residual > cfg.tol_hwc || r.lambda_sq <= 0.0)
    {
        return Err(Error::NotHwc(bad.hwc_residual));
    }
    let fns = random_test_functions(map.target(), k, cfg.seed);
    let bindings: HashMap<String, Expr> = map
        .target()
        .coords()
        .iter()
        .cloned()
        .zip(map.component_exprs().iter().cloned())
        .collect();
    let src_coords = map.source().coords();
    let tgt_coords = map.target().coords();
    let per_fn: Vec<(f64, f64)> = fns
        .par_iter()
        .map(|u| -> Result<(f64, f64)> {
            let composed = Program::compile(&u.substitute(&bindings), src_coords)?;
            let on_target = Program::compile(u, tgt_coords)?;
            let mut worst = (0.0f64, 0.0f64);
            for (p, rep) in pts.iter().zip(reports) {
                let jet = map_jet(map, p)?;
                let f = map.weight_jet(p)?;
                let lhs = jet
                    .source
                    .f_laplacian(&f, &composed.eval_jet(&Jet2::seed(p))?)?;
                let target = metric_at_side(map.target(), &jet.image, Side::Target)?;
                let uj = on_target.eval_jet(&Jet2::seed(&jet.image))?;
                let tau_f = jet.f_tension_with(&f);
                let du_tau: f64 = uj.grad().iter().zip(&tau_f).map(|(a, b)| a * b).sum();
                let rhs = f.value * rep.lambda_sq * target.laplacian(&uj) + du_tau;
                worst.0 = worst.0.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
                worst.1 = worst.1.max(du_tau.abs());
            }
            Ok(worst)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(PullbackResult {
        max_identity_residual: per_fn.iter().fold(0.0, |m, r| m.max(r.0)),
        max_tau_term: per_fn.iter().fold(0.0, |m, r| m.max(r.1)),
        per_fn: per_fn.iter().map(|r| r.0).collect(),
        points: pts.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoWeightResult {
    /// `max ‖dφ(grad ln(f₁/f₂))‖_h`
    pub max_residual: f64,
    pub passed: bool,
}

/// For two weights that both make the map f-harmonic, `grad ln(f₁/f₂)`
/// must be vertical.
pub fn two_weight_test(
    map: &MapSpec,
    f1: &Expr,
    f2: &Expr,
    cfg: &SamplerConfig,
) -> Result<TwoWeightResult> {
    let m1 = map.with_weight(Some(f1.clone()))?;
    let m2 = map.with_weight(Some(f2.clone()))?;
    let pts = sample_points(map, cfg)?;
    let rows: Vec<(f64, f64, f64)> = pts
        .par_iter()
        .map(|p| -> Result<(f64, f64, f64)> {
            let jet = map_jet(map, p)?;
            let (w1, w2) = (m1.weight_jet(p)?, m2.weight_jet(p)?);
            let r1 = jet.target.norm(&jet.f_tension_with(&w1));
            let r2 = jet.target.norm(&jet.f_tension_with(&w2));
            let dlog: Vec<f64> = w1
                .grad()
                .iter()
                .zip(w2.grad())
                .map(|(a, b)| a / w1.value - b / w2.value)
                .collect();
            let push = jet.push(&jet.source.raise(&dlog));
            Ok((r1, r2, jet.target.norm(&push)))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let worst_weight = rows.iter().fold(0.0f64, |m, r| m.max(r.0).max(r.1));
    if worst_weight > cfg.tol_resid {
        return Err(Error::NotFHarmonic(worst_weight));
    }
    let max_residual = rows.iter().fold(0.0f64, |m, r| m.max(r.2));
    Ok(TwoWeightResult {
        max_residual,
        passed: max_residual <= cfg.tol_resid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialCheck {
    pub is_polynomial: bool,
    pub is_hwc: bool,
    /// Only decided for HWC polynomial maps.
    pub is_harmonic: Option<bool>,
    pub max_tension: f64,
}

fn is_flat_identity(chart: &RiemannianChart) -> bool {
    chart.metric_exprs().iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, e)| matches!(e, Expr::Num(v) if *v == if i == j { 1.0 } else { 0.0 }))
    })
}

/// Polynomial maps between Euclidean charts that are horizontally weakly
/// conformal on the sample must also be harmonic there.
pub fn polynomial_hwc_check(map: &MapSpec, cfg: &SamplerConfig) -> Result<PolynomialCheck> {
    let is_polynomial = is_flat_identity(map.source())
        && is_flat_identity(map.target())
        && map.component_exprs().iter().all(Expr::is_polynomial);
    let pts = sample_points(map, cfg)?;
    let rows: Vec<(bool, f64)> = pts
        .par_iter()
        .map(|p| -> Result<(bool, f64)> {
            let jet = map_jet(map, p)?;
            let rep = report_from_jet(&jet, cfg.tol_hwc)?;
            Ok((
                rep.is_hwc || rep.is_indeterminate,
                jet.target.norm(&jet.tension()),
            ))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let is_hwc = rows.iter().all(|r| r.0);
    let max_tension = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
    Ok(PolynomialCheck {
        is_polynomial,
        is_hwc,
        is_harmonic: (is_polynomial && is_hwc).then_some(max_tension <= cfg.tol_resid),
        max_tension,
    })
}
