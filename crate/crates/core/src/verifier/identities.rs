//! Cross-module identity suites run over the catalog:
//!
//! * `c2`: tension after the conformal change `ḡ = f^{2/(m−2)}g` equals
//!   `f^{−m/(m−2)}τ_f(φ; g)` (sources of dimension 2 are skipped);
//! * `c13`: F-tension of the p-energy, p-tension and f-tension with
//!   `f = |dφ|^{p−2}` coincide for `p ∈ {2, 3, 4}`;
//! * `eq12`: `Δ_f(u∘φ) = fλ²(Δu)∘φ + du(τ_f)` for random `u` on HWC maps;
//! * `eq13`: direct and decomposed `τ_f(ψ∘φ)` for a random quadratic `ψ`;
//! * `t29`: `τ_f = f[−(m−n)dφ(μ) + dφ(grad ln(fλ^{2−n}))]` on submersive
//!   HWC maps with `m > n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{catalog, morphism_pullback_test, sample_points, CatalogEntry, SamplerConfig};
use crate::conformal::trichotomy_check;
use crate::exprlang::{BinOp, Expr};
use crate::geometry::RiemannianChart;
use crate::mapcalc::{
    composition_f_tension, f_tension, map_jet, p_tension, p_weight_expr, tension, F_tension,
    MapSpec, PowerEnergy,
};
use crate::{Error, Result};

pub const SUITES: [&str; 5] = ["c2", "c13", "eq12", "eq13", "t29"];

/// Tolerance of every suite except `c13`.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Tolerance of the `c13` suite.
pub const POWER_TOL: f64 = 1e-10;

/// Random test functions per map in `eq12`.
pub const PULLBACK_FUNCTIONS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityRow {
    pub suite: String,
    pub map: String,
    pub status: Status,
    pub max_residual: Option<f64>,
    pub tol: f64,
    pub points: usize,
    pub note: String,
}

impl IdentityRow {
    fn measured(
        suite: &str,
        map: &str,
        residual: f64,
        tol: f64,
        points: usize,
        note: String,
    ) -> Self {
        let status = if residual <= tol {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            suite: suite.into(),
            map: map.into(),
            status,
            max_residual: Some(residual),
            tol,
            points,
            note,
        }
    }

    fn skip(suite: &str, map: &str, note: &str) -> Self {
        Self {
            suite: suite.into(),
            map: map.into(),
            status: Status::Skip,
            max_residual: None,
            tol: IDENTITY_TOL,
            points: 0,
            note: note.into(),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / (1.0 + norm(b))
}

fn max_over<F>(pts: &[Vec<f64>], f: F) -> Result<(f64, usize)>
where
    F: Fn(&[f64]) -> Result<Option<f64>> + Sync,
{
    let vals: Vec<Option<f64>> = pts
        .par_iter()
        .map(|p| f(p))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let used = vals.iter().flatten().count();
    Ok((vals.iter().flatten().fold(0.0f64, |m, v| m.max(*v)), used))
}

/// Conformal rescaling of the source by `f^{2/(m−2)}`.
pub fn conformal_rescaling(entry: &CatalogEntry, cfg: &SamplerConfig) -> Result<IdentityRow> {
    let map = &entry.map;
    let m = map.m();
    if m < 3 {
        return Ok(IdentityRow::skip(
            "c2",
            &entry.key,
            "exponent 2/(m-2) undefined for m = 2",
        ));
    }
    let f = map
        .weight_expr()
        .ok_or_else(|| Error::WeightMissing(map.name().into()))?
        .clone();
    let factor = Expr::binary(BinOp::Pow, f, Expr::num(2.0 / (m as f64 - 2.0)));
    let scaled = map.source().conformal_scale(&factor)?;
    let rescaled = MapSpec::new(
        map.name(),
        scaled,
        map.target().clone(),
        map.component_exprs().to_vec(),
        None,
    )?;
    let pts = sample_points(map, cfg)?;
    let (res, used) = max_over(&pts, |p| {
        let lhs = tension(&rescaled, p)?;
        let fv = map.weight_jet(p)?.value;
        let rhs: Vec<f64> = f_tension(map, p)?
            .iter()
            .map(|t| fv.powf(-(m as f64) / (m as f64 - 2.0)) * t)
            .collect();
        Ok(Some(rel_diff(&lhs, &rhs)))
    })?;
    Ok(IdentityRow::measured(
        "c2",
        &entry.key,
        res,
        IDENTITY_TOL,
        used,
        String::new(),
    ))
}

/// F-, p- and f-tension of the p-energy, `p ∈ {2, 3, 4}`.
pub fn power_tensions(entry: &CatalogEntry, cfg: &SamplerConfig) -> Result<IdentityRow> {
    let map = &entry.map;
    let pts = sample_points(map, cfg)?;
    let mut worst = 0.0f64;
    let mut skipped = 0;
    let mut used = 0;
    for pexp in [2.0, 3.0, 4.0] {
        let weighted = map.with_weight(Some(p_weight_expr(map, pexp)?))?;
        let vals: Vec<Option<f64>> = pts
            .par_iter()
            .map(|p| -> Result<Option<f64>> {
                let a = match F_tension(map, p, &PowerEnergy(pexp)) {
                    Err(Error::CriticalPoint) => return Ok(None),
                    r => r?,
                };
                let b = match p_tension(map, p, pexp) {
                    Err(Error::CriticalPoint) => return Ok(None),
                    r => r?,
                };
                let c = match f_tension(&weighted, p) {
                    Err(Error::WeightNotPositive(_)) if pexp != 2.0 => return Ok(None),
                    r => r?,
                };
                Ok(Some(rel_diff(&a, &b).max(rel_diff(&c, &b))))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()?;
        skipped += vals.iter().filter(|v| v.is_none()).count();
        used += vals.iter().flatten().count();
        worst = vals.iter().flatten().fold(worst, |m, v| m.max(*v));
    }
    let note = if skipped > 0 {
        format!("{skipped} critical evaluations skipped")
    } else {
        String::new()
    };
    Ok(IdentityRow::measured(
        "c13", &entry.key, worst, POWER_TOL, used, note,
    ))
}

/// Pullback identity for random test functions; HWC maps only.
pub fn pullback_identity(entry: &CatalogEntry, cfg: &SamplerConfig) -> Result<IdentityRow> {
    if entry.expected.is_hwc != Some(true) {
        return Ok(IdentityRow::skip(
            "eq12",
            &entry.key,
            "not horizontally weakly conformal",
        ));
    }
    let r = morphism_pullback_test(&entry.map, PULLBACK_FUNCTIONS, cfg)?;
    let note = format!(
        "{} test functions, max |du(tau_f)| = {:e}",
        PULLBACK_FUNCTIONS, r.max_tau_term
    );
    Ok(IdentityRow::measured(
        "eq12",
        &entry.key,
        r.max_identity_residual,
        IDENTITY_TOL,
        r.points,
        note,
    ))
}

/// Random quadratic map from `chart` into a Euclidean plane.
pub fn random_quadratic_map(chart: &RiemannianChart, seed: u64) -> Result<MapSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0c0_ffee);
    let mut c = move || Expr::num((rng.gen_range(-1.0..=1.0f64) * 1e6).round() / 1e6);
    let vars: Vec<Expr> = chart.coords().iter().map(|s| Expr::var(s)).collect();
    let comps = (0..2)
        .map(|_| {
            let mut e = c();
            for (a, va) in vars.iter().enumerate() {
                e = Expr::binary(BinOp::Add, e, Expr::binary(BinOp::Mul, c(), va.clone()));
                for vb in &vars[a..] {
                    let q = Expr::binary(BinOp::Mul, va.clone(), vb.clone());
                    e = Expr::binary(BinOp::Add, e, Expr::binary(BinOp::Mul, c(), q));
                }
            }
            e
        })
        .collect();
    MapSpec::new(
        "quadratic",
        chart.clone(),
        RiemannianChart::euclidean("R2_out", &["s1", "s2"]),
        comps,
        None,
    )
}

/// Composition law against a random quadratic outer map.
pub fn composition_identity(entry: &CatalogEntry, cfg: &SamplerConfig) -> Result<IdentityRow> {
    let psi = random_quadratic_map(entry.map.target(), cfg.seed)?;
    let pts = sample_points(&entry.map, cfg)?;
    let (res, used) = max_over(&pts, |p| {
        let c = composition_f_tension(&entry.map, &psi, p)?;
        Ok(Some(rel_diff(&c.decomposed, &c.direct)))
    })?;
    Ok(IdentityRow::measured(
        "eq13",
        &entry.key,
        res,
        IDENTITY_TOL,
        used,
        String::new(),
    ))
}

/// Fiber mean-curvature decomposition of `τ_f`.
pub fn trichotomy_identity(entry: &CatalogEntry, cfg: &SamplerConfig) -> Result<IdentityRow> {
    let map = &entry.map;
    if map.m() <= map.n() {
        return Ok(IdentityRow::skip("t29", &entry.key, "fibers are points"));
    }
    if entry.expected.is_hwc != Some(true) {
        return Ok(IdentityRow::skip(
            "t29",
            &entry.key,
            "not horizontally weakly conformal",
        ));
    }
    let pts = sample_points(map, cfg)?;
    let (res, used) = max_over(&pts, |p| {
        let jet = map_jet(map, p)?;
        let rep = crate::conformal::report_from_jet(&jet, cfg.tol_hwc)?;
        if rep.is_critical || rep.is_indeterminate || !rep.is_submersive {
            return Ok(None);
        }
        let t = trichotomy_check(map, p, cfg.tol_hwc)?;
        Ok(Some(t.residual / (1.0 + t.tau_f_norm)))
    })?;
    Ok(IdentityRow::measured(
        "t29",
        &entry.key,
        res,
        IDENTITY_TOL,
        used,
        String::new(),
    ))
}

/// Runs one suite (or `all`) over the catalog.
pub fn run_suite(suite: &str, cfg: &SamplerConfig) -> Result<Vec<IdentityRow>> {
    let suites: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => {
            return Err(Error::Invalid(format!(
                "unknown suite `{other}`; expected one of {SUITES:?} or all"
            )))
        }
    };
    let entries = catalog();
    let mut rows = Vec::new();
    for s in suites {
        for e in &entries {
            rows.push(match s {
                "c2" => conformal_rescaling(e, cfg)?,
                "c13" => power_tensions(e, cfg)?,
                "eq12" => pullback_identity(e, cfg)?,
                "eq13" => composition_identity(e, cfg)?,
                _ => trichotomy_identity(e, cfg)?,
            });
        }
    }
    Ok(rows)
}
