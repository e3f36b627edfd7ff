//! Problem documents: charts, maps referring to them by name, and sampling
//! defaults.

use std::collections::BTreeMap;

use fmorph::exprlang::Expr;
use fmorph::geometry::RiemannianChart;
use fmorph::mapcalc::MapSpec;
use fmorph::verifier::{CatalogEntry, Expected, SamplerConfig};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "fmorph/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub schema: String,
    #[serde(default)]
    pub charts: Vec<RiemannianChart>,
    pub maps: Vec<MapBlock>,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBlock {
    pub name: String,
    pub source: String,
    pub target: String,
    pub components: Vec<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_resid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_hwc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Defaults {
    pub fn apply(&self, mut cfg: SamplerConfig) -> SamplerConfig {
        cfg.tol_resid = self.tol_resid.unwrap_or(cfg.tol_resid);
        cfg.tol_hwc = self.tol_hwc.unwrap_or(cfg.tol_hwc);
        cfg.count = self.samples.unwrap_or(cfg.count);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg
    }
}

/// A resolved map ready for classification.
pub struct Job {
    pub map: MapSpec,
    pub expected: Option<Expected>,
}

/// Parses a document, reporting malformed JSON with its byte offset.
pub fn parse_doc(src: &str) -> Result<ProblemDoc, String> {
    serde_json::from_str(src).map_err(|e| json_diagnostic(src, &e))
}

pub fn json_diagnostic(src: &str, e: &serde_json::Error) -> String {
    use serde_json::error::Category;
    let (kind, at) = match e.classify() {
        Category::Eof => ("malformed JSON", src.len()),
        Category::Syntax => ("malformed JSON", byte_offset(src, e.line(), e.column())),
        _ => ("schema error", byte_offset(src, e.line(), e.column())),
    };
    format!(
        "{kind} at byte {at} (line {}, column {}): {e}",
        e.line(),
        e.column()
    )
}

fn byte_offset(src: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = src.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(src.len())
}

impl ProblemDoc {
    pub fn resolve(&self) -> Result<Vec<Job>, String> {
        if self.schema != SCHEMA {
            return Err(format!(
                "unsupported schema `{}`; expected `{SCHEMA}`",
                self.schema
            ));
        }
        let mut charts = BTreeMap::new();
        for c in &self.charts {
            if charts.insert(c.name().to_string(), c).is_some() {
                return Err(format!("chart `{}` is defined twice", c.name()));
            }
        }
        let chart = |name: &str, map: &str| {
            charts
                .get(name)
                .map(|c| (*c).clone())
                .ok_or_else(|| format!("map `{map}` refers to unknown chart `{name}`"))
        };
        let mut seen = BTreeMap::new();
        self.maps
            .iter()
            .map(|b| {
                if seen.insert(b.name.clone(), ()).is_some() {
                    return Err(format!("map `{}` is defined twice", b.name));
                }
                let map = MapSpec::new(
                    &b.name,
                    chart(&b.source, &b.name)?,
                    chart(&b.target, &b.name)?,
                    b.components.clone(),
                    b.weight.clone(),
                )
                .map_err(|e| format!("map `{}`: {e}", b.name))?;
                Ok(Job {
                    map,
                    expected: b.expected,
                })
            })
            .collect()
    }

    /// Document holding the given catalog entries.
    pub fn from_catalog(entries: &[CatalogEntry]) -> Self {
        let mut charts: Vec<RiemannianChart> = Vec::new();
        for e in entries {
            for c in [e.map.source(), e.map.target()] {
                if !charts.iter().any(|k| k.name() == c.name()) {
                    charts.push(c.clone());
                }
            }
        }
        let maps = entries
            .iter()
            .map(|e| MapBlock {
                name: e.key.clone(),
                source: e.map.source().name().to_string(),
                target: e.map.target().name().to_string(),
                components: e.map.component_exprs().to_vec(),
                weight: e.map.weight_expr().cloned(),
                expected: Some(e.expected),
            })
            .collect();
        Self {
            schema: SCHEMA.to_string(),
            charts,
            maps,
            defaults: Defaults::default(),
        }
    }
}
