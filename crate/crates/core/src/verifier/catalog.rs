//! Built-in example maps with their known classification.

use serde::{Deserialize, Serialize};

use crate::geometry::RiemannianChart;
use crate::mapcalc::MapSpec;

use super::Verdict;

/// Known answers; `None` means "not asserted".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_f_harmonic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_hwc: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_f_harmonic_morphism: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_horizontally_homothetic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibers_minimal: Option<bool>,
}

impl Expected {
    fn morphism() -> Self {
        Self {
            is_f_harmonic: Some(true),
            is_hwc: Some(true),
            is_f_harmonic_morphism: Some(true),
            ..Self::default()
        }
    }

    fn f_harmonic_not_hwc() -> Self {
        Self {
            is_f_harmonic: Some(true),
            is_hwc: Some(false),
            is_f_harmonic_morphism: Some(false),
            ..Self::default()
        }
    }

    fn homothetic(self, v: bool) -> Self {
        Self {
            is_horizontally_homothetic: Some(v),
            ..self
        }
    }

    fn minimal_fibers(self, v: bool) -> Self {
        Self {
            fibers_minimal: Some(v),
            ..self
        }
    }

    /// Field-by-field disagreements with a computed verdict.
    pub fn mismatches(&self, v: &Verdict) -> Vec<String> {
        let a = &v.aggregate;
        let checks = [
            ("is_f_harmonic", self.is_f_harmonic, Some(a.is_f_harmonic)),
            ("is_hwc", self.is_hwc, Some(a.is_hwc)),
            (
                "is_f_harmonic_morphism",
                self.is_f_harmonic_morphism,
                Some(a.is_f_harmonic_morphism),
            ),
            (
                "is_horizontally_homothetic",
                self.is_horizontally_homothetic,
                a.is_horizontally_homothetic,
            ),
            ("fibers_minimal", self.fibers_minimal, a.fibers_minimal),
        ];
        checks
            .iter()
            .filter_map(|(name, want, got)| match want {
                Some(w) if *got != Some(*w) => {
                    Some(format!("{name}: expected {w}, got {}", fmt_opt(*got)))
                }
                _ => None,
            })
            .collect()
    }
}

fn fmt_opt(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_else(|| "n/a".into())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub key: String,
    pub map: MapSpec,
    pub expected: Expected,
    pub note: String,
}

fn euclid3() -> RiemannianChart {
    RiemannianChart::euclidean("R3", &["x", "y", "z"])
}

fn euclid2() -> RiemannianChart {
    RiemannianChart::euclidean("R2", &["u", "v"])
}

/// Round metric on S² in stereographic coordinates, cut off at `|y|² < 100`.
pub fn sphere2() -> RiemannianChart {
    RiemannianChart::conformally_flat(
        "S2",
        &["y1", "y2"],
        "4/(1+y1^2+y2^2)^2",
        Some("100 - y1^2 - y2^2"),
    )
    .expect("sphere chart")
    .with_description("unit 2-sphere, stereographic chart from the north pole")
}

/// Round metric on S³ in stereographic coordinates.
pub fn sphere3() -> RiemannianChart {
    RiemannianChart::conformally_flat("S3", &["x1", "x2", "x3"], "4/(1+x1^2+x2^2+x3^2)^2", None)
        .expect("sphere chart")
        .with_description("unit 3-sphere, stereographic chart")
}

const HOPF: [&str; 2] = [
    "(4*x1*x3 - 2*x2*(x1^2+x2^2+x3^2-1)) / (4*x3^2 + (x1^2+x2^2+x3^2-1)^2)",
    "(2*x1*(x1^2+x2^2+x3^2-1) + 4*x2*x3) / (4*x3^2 + (x1^2+x2^2+x3^2-1)^2)",
];

/// Hopf fibration S³ → S² with both spheres in stereographic charts.
pub fn hopf_round() -> MapSpec {
    MapSpec::parse("hopf_s3", sphere3(), sphere2(), &HOPF, Some("1")).expect("hopf map")
}

fn entry(key: &str, map: MapSpec, expected: Expected, note: &str) -> CatalogEntry {
    CatalogEntry {
        key: key.to_string(),
        map,
        expected,
        note: note.to_string(),
    }
}

pub fn catalog() -> Vec<CatalogEntry> {
    let mk = |key: &str, src: RiemannianChart, dst: RiemannianChart, comps: &[&str], f: &str| {
        MapSpec::parse(key, src, dst, comps, Some(f)).expect("catalog map")
    };
    let shell = RiemannianChart::conformally_flat(
        "R3_shell",
        &["x", "y", "z"],
        "1",
        Some("min(x^2+y^2+z^2 - 0.25, 9 - x^2 - y^2 - z^2)"),
    )
    .expect("shell chart")
    .with_bounds(vec![[-3.0, 3.0]; 3]);
    let upper =
        RiemannianChart::conformally_flat("R3_upper", &["x", "y", "z"], "1", Some("z - 0.2"))
            .expect("half space")
            .with_bounds(vec![[-2.0, 2.0], [-2.0, 2.0], [0.2, 3.0]]);
    let hyperbolic = RiemannianChart::conformally_flat("H2", &["X", "Z"], "1/Z^2", Some("Z"))
        .expect("hyperbolic plane")
        .with_description("upper half-plane model of the hyperbolic plane");
    let punctured = RiemannianChart::conformally_flat(
        "R3_punctured",
        &["x", "y", "z"],
        "1",
        Some("x^2+y^2+z^2 - 0.01"),
    )
    .expect("punctured space");
    let hopf_src = RiemannianChart::euclidean("R3_hopf", &["x1", "x2", "x3"]);
    let cyl = RiemannianChart::euclidean("R_x_C", &["t", "x", "y"]);

    vec![
        entry(
            "ex1_projection",
            mk("ex1_projection", euclid3(), euclid2(), &["x", "y"], "exp(z)"),
            Expected::morphism().homothetic(true).minimal_fibers(true),
            "orthogonal projection of R3 onto the xy-plane, weight e^z",
        ),
        entry(
            "ex1_psi",
            mk("ex1_psi", euclid3(), euclid2(), &["3*x", "x*y"], "exp(z)"),
            Expected::f_harmonic_not_hwc(),
            "polynomial map (3x, xy), harmonic components, weight e^z",
        ),
        entry(
            "ex1_phi",
            mk("ex1_phi", euclid3(), euclid2(), &["x", "y+z"], "exp(y-z)"),
            Expected::f_harmonic_not_hwc(),
            "linear submersion (x, y+z), weight e^(y-z)",
        ),
        entry(
            "mobius_inversion",
            mk(
                "mobius_inversion",
                shell,
                RiemannianChart::euclidean("R3_image", &["a", "b", "c"]),
                &["x/(x^2+y^2+z^2)", "y/(x^2+y^2+z^2)", "z/(x^2+y^2+z^2)"],
                "1/(x^2+y^2+z^2)",
            ),
            Expected::morphism().homothetic(false),
            "inversion in the unit sphere, weight |x|^-2, dilation |x|^-2",
        ),
        entry(
            "euclid_to_hyperbolic",
            mk("euclid_to_hyperbolic", upper, hyperbolic, &["x", "sqrt(y^2+z^2)"], "1/z"),
            Expected::morphism().homothetic(false).minimal_fibers(false),
            "(x, |(y,z)|) into the upper half-plane, weight 1/z, dilation 1/(y^2+z^2)",
        ),
        entry(
            "hopf_r3",
            mk("hopf_r3", hopf_src, sphere2(), &HOPF, "2/(1+x1^2+x2^2+x3^2)"),
            Expected::morphism(),
            "Hopf fibration precomposed with inverse stereographic projection R3 -> S3, weight 2/(1+|x|^2)",
        ),
        entry(
            "radial_projection",
            mk("radial_projection", punctured, sphere2(), &[
                "x/(sqrt(x^2+y^2+z^2) - z)",
                "y/(sqrt(x^2+y^2+z^2) - z)",
            ], "1 + x^2+y^2+z^2"),
            Expected::morphism().homothetic(true).minimal_fibers(true),
            "x/|x| onto the unit sphere, radial weight 1+|x|^2",
        ),
        entry(
            "poly_cyl",
            mk("poly_cyl", cyl, euclid2(), &["x^2 - y^2", "2*x*y"], "exp(t)"),
            Expected::morphism().homothetic(false).minimal_fibers(true),
            "(t, w) -> w^2 on R x C, weight e^t",
        ),
        entry(
            "complex_square",
            mk("complex_square", RiemannianChart::euclidean("C", &["x", "y"]), euclid2(), &["x^2 - y^2", "2*x*y"], "1"),
            Expected::morphism().homothetic(false),
            "w -> w^2 on the complex plane, constant weight",
        ),
    ]
}

pub fn lookup(key: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.key == key)
}
