use fmorph::geometry::{f_laplacian, laplace_beltrami, metric_at, RiemannianChart};
use fmorph::linalg::Matrix;
use fmorph::mapcalc::{tension, MapSpec};
use proptest::prelude::*;

fn warped() -> RiemannianChart {
    RiemannianChart::parse(
        "warped",
        &["a", "b", "c"],
        &[
            &["2 + sin(a)*cos(b)", "0.3*a*c", "0.1*b"],
            &["0.3*a*c", "1 + a^2 + exp(c)/4", "0.2*sin(b)"],
            &["0.1*b", "0.2*sin(b)", "3 + cos(a + c)"],
        ],
        None,
    )
    .unwrap()
}

fn hyperbolic3() -> RiemannianChart {
    RiemannianChart::conformally_flat("H3", &["X", "Y", "Z"], "1/Z^2", Some("Z")).unwrap()
}

fn g_at(chart: &RiemannianChart, p: &[f64]) -> Matrix<f64> {
    metric_at(chart, p).unwrap().g
}

/// `Γᵏᵢⱼ` from central differences of the metric values alone.
fn fd_christoffel(chart: &RiemannianChart, p: &[f64], h: f64) -> Vec<f64> {
    let m = p.len();
    let mut dg = vec![0.0; m * m * m];
    for k in 0..m {
        let (mut a, mut b) = (p.to_vec(), p.to_vec());
        a[k] += h;
        b[k] -= h;
        let (ga, gb) = (g_at(chart, &a), g_at(chart, &b));
        for i in 0..m {
            for j in 0..m {
                dg[(k * m + i) * m + j] = (ga[(i, j)] - gb[(i, j)]) / (2.0 * h);
            }
        }
    }
    let ginv = g_at(chart, p).spd_inverse().unwrap();
    let d = |k: usize, i: usize, j: usize| dg[(k * m + i) * m + j];
    let mut out = vec![0.0; m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                out[(k * m + i) * m + j] = (0..m)
                    .map(|l| 0.5 * ginv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j)))
                    .sum();
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn christoffels_match_finite_differences(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
        let chart = warped();
        let p = [a, b, c];
        let mp = metric_at(&chart, &p).unwrap();
        let fd = fd_christoffel(&chart, &p, 1e-5);
        for (x, y) in mp.christoffel.iter().zip(&fd) {
            prop_assert!((x - y).abs() < 1e-7, "{} vs {}", x, y);
        }
    }

    #[test]
    fn connection_is_metric_and_torsion_free(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
        let mp = metric_at(&warped(), &[a, b, c]).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((mp.gamma(k, i, j) - mp.gamma(k, j, i)).abs() < 1e-14);
                    let rhs: f64 = (0..3).map(|l| mp.gamma(l, k, i) * mp.g[(l, j)] + mp.gamma(l, k, j) * mp.g[(i, l)]).sum();
                    prop_assert!((mp.dg(k, i, j) - rhs).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn laplacian_matches_divergence_form(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
        // Δu = |g|^{-1/2} ∂ᵢ(|g|^{1/2} gⁱʲ ∂ⱼu) with every derivative by central differences.
        let chart = warped();
        let u: fmorph::exprlang::Expr = "sin(a)*b + c^2*exp(-a*b)".parse().unwrap();
        let h = 1e-4;
        let ue = |q: &[f64]| fmorph::exprlang::eval_real(&u, &[("a", q[0]), ("b", q[1]), ("c", q[2])]).unwrap();
        let flux = |q: &[f64], i: usize| {
            let g = g_at(&chart, q);
            let det = g[(0, 0)] * (g[(1, 1)] * g[(2, 2)] - g[(1, 2)] * g[(2, 1)])
                - g[(0, 1)] * (g[(1, 0)] * g[(2, 2)] - g[(1, 2)] * g[(2, 0)])
                + g[(0, 2)] * (g[(1, 0)] * g[(2, 1)] - g[(1, 1)] * g[(2, 0)]);
            let gi = g.spd_inverse().unwrap();
            let du: Vec<f64> = (0..3).map(|j| {
                let (mut x, mut y) = (q.to_vec(), q.to_vec());
                x[j] += h;
                y[j] -= h;
                (ue(&x) - ue(&y)) / (2.0 * h)
            }).collect();
            det.sqrt() * (0..3).map(|j| gi[(i, j)] * du[j]).sum::<f64>()
        };
        let p = [a, b, c];
        let g = g_at(&chart, &p);
        let det = g[(0, 0)] * (g[(1, 1)] * g[(2, 2)] - g[(1, 2)] * g[(2, 1)])
            - g[(0, 1)] * (g[(1, 0)] * g[(2, 2)] - g[(1, 2)] * g[(2, 0)])
            + g[(0, 2)] * (g[(1, 0)] * g[(2, 1)] - g[(1, 1)] * g[(2, 0)]);
        let div: f64 = (0..3).map(|i| {
            let (mut x, mut y) = (p.to_vec(), p.to_vec());
            x[i] += h;
            y[i] -= h;
            (flux(&x, i) - flux(&y, i)) / (2.0 * h)
        }).sum::<f64>() / det.sqrt();
        let lb = laplace_beltrami(&chart, &u, &p).unwrap();
        prop_assert!((lb - div).abs() < 1e-5 * (1.0 + lb.abs()), "{} vs {}", lb, div);
    }
}

#[test]
fn identity_into_hyperbolic_space_has_vertical_tension() {
    let src =
        RiemannianChart::conformally_flat("R3_upper", &["x", "y", "z"], "1", Some("z")).unwrap();
    let id = MapSpec::parse("id", src, hyperbolic3(), &["x", "y", "z"], None).unwrap();
    for p in [[0.0f64, 0.0, 1.0], [0.4, -1.2, 0.25], [3.0, 2.0, 7.5]] {
        let t = tension(&id, &p).unwrap();
        let want = [0.0, 0.0, 1.0 / p[2]];
        for k in 0..3 {
            assert!((t[k] - want[k]).abs() < 1e-13, "{p:?}: {t:?}");
        }
    }
}

#[test]
fn hyperbolic_laplacians() {
    let h = hyperbolic3();
    let p = [0.3f64, -0.2, 0.7];
    // Δ log Z = −2 and Δ Z^s = s(s−2) Z^s in the upper half-space H³.
    assert!((laplace_beltrami(&h, &"log(Z)".parse().unwrap(), &p).unwrap() + 2.0).abs() < 1e-13);
    for s in [0.5f64, 2.0, 3.0] {
        let u = format!("Z^{s}").parse().unwrap();
        let want = s * (s - 2.0) * p[2].powf(s);
        assert!((laplace_beltrami(&h, &u, &p).unwrap() - want).abs() < 1e-12);
    }
    let fl = f_laplacian(&h, &"Z".parse().unwrap(), &"log(Z)".parse().unwrap(), &p).unwrap();
    // f Δu + g(grad f, grad u) = Z(−2) + Z²·1·(1/Z)
    assert!((fl + p[2]).abs() < 1e-13);
}

#[test]
fn conformal_scaling_of_flat_metric_gives_sphere() {
    let flat = RiemannianChart::euclidean("R2", &["y1", "y2"]);
    let sphere = flat
        .conformal_scale(&"4/(1+y1^2+y2^2)^2".parse().unwrap())
        .unwrap();
    let p = [0.5f64, -0.25];
    // Δ on the round sphere of the height function x3 = (r²−1)/(r²+1) is −2 x3.
    let u = "(y1^2+y2^2-1)/(y1^2+y2^2+1)".parse().unwrap();
    let r2: f64 = p[0] * p[0] + p[1] * p[1];
    let x3 = (r2 - 1.0) / (r2 + 1.0);
    assert!((laplace_beltrami(&sphere, &u, &p).unwrap() + 2.0 * x3).abs() < 1e-13);
}

#[test]
fn f32_metric_agrees_with_f64() {
    let chart = warped();
    let a = metric_at(&chart, &[0.2f64, -0.4, 0.6]).unwrap();
    let b = metric_at(&chart, &[0.2f32, -0.4, 0.6]).unwrap();
    for (x, y) in a.christoffel.iter().zip(&b.christoffel) {
        assert!((x - *y as f64).abs() < 1e-5);
    }
}
