use john_s::certify::{symmetric_certificate, target_matrix};
use john_s::fnalg::Halfspace;
use john_s::helly::{helly_select, random_family, HellyConfig};
use john_s::optim::nnls;
use john_s::scalar::kappa_s;
use john_s::sgeom::{height_eval, s_volume};
use john_s::solver::{solve_john, Status};
use john_s::{LogConcaveFn, Matrix, RunConfig, Vector};
use proptest::prelude::*;

fn v1(x: f64) -> Vector {
    Vector::from_vec(vec![x])
}

/// exp(min(g₁x + b₁, g₂x + b₂)) with g₁ > 0 > g₂, optionally cut to x ≤ c.
fn tent() -> impl Strategy<Value = LogConcaveFn> {
    (0.2f64..3.0, -3.0f64..-0.2, -1.0f64..1.0, -1.0f64..1.0, prop::option::of(0.5f64..3.0)).prop_map(|(g1, g2, b1, b2, cut)| {
        let domain = cut.map(|c| vec![Halfspace::new(v1(1.0), c)]).unwrap_or_default();
        LogConcaveFn::exp_polyhedral(vec![(v1(g1), b1), (v1(g2), b2)], domain).unwrap()
    })
}

fn gaussian2() -> impl Strategy<Value = LogConcaveFn> {
    (0.3f64..2.0, 0.3f64..2.0, -0.5f64..0.5, 0.2f64..5.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(l1, l2, off, alpha, a0, a1)| {
        let m = Matrix::from_row_slice(2, 2, &[l1, off * l1.min(l2), off * l1.min(l2), l2]);
        LogConcaveFn::gaussian(m, alpha, Vector::from_vec(vec![a0, a1])).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn kappa_decreases_in_s(d in 1usize..4, s in 0.01f64..50.0, ds in 0.01f64..10.0) {
        prop_assert!(kappa_s(d, s + ds) < kappa_s(d, s));
        prop_assert!(kappa_s(d, s) > 0.0);
    }

    #[test]
    fn symmetric_certificate_identity(d in 1usize..4, s in 0.05f64..40.0) {
        let c = symmetric_certificate(d, s);
        let (m, v) = c.moments();
        prop_assert!((m - target_matrix(d, s)).norm() < 1e-12 * (1.0 + s));
        prop_assert!(v.norm() < 1e-12);
        prop_assert!((c.weight_sum() - (d as f64 + s)).abs() < 1e-12 * (1.0 + s));
    }

    #[test]
    fn nnls_matches_a_feasible_combination(seed in 0u64..10_000, rows in 2usize..6, cols in 2usize..9) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let w = Vector::from_fn(cols, |_, _| rng.random_range(0.0..1.0));
        let b = &a * &w;
        let x = nnls(&a, &b);
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        prop_assert!((&a * &x - &b).norm() <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn function_json_roundtrip(f in tent(), x in -4.0f64..4.0) {
        let g = LogConcaveFn::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(f.psi(&v1(x)), g.psi(&v1(x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn john_function_lies_below(f in tent(), s in 0.3f64..8.0) {
        let cfg = RunConfig::default();
        let r = solve_john(&f, s, &cfg).unwrap();
        prop_assert_eq!(r.status, Status::Converged);
        let e = &r.ellipsoid;
        for k in 0..=200 {
            let x = e.center()[0] + e.a()[(0, 0)] * (-1.0 + k as f64 / 100.0);
            let h = height_eval(e, &v1(x));
            if h > 0.0 {
                prop_assert!(s * h.ln() <= f.log_value(&v1(x)) + 1e-6);
            }
        }
    }

    #[test]
    fn scaling_moves_only_the_height(f in tent(), s in 0.3f64..8.0, gamma in 0.1f64..10.0) {
        let cfg = RunConfig::default();
        let r = solve_john(&f, s, &cfg).unwrap();
        let rg = solve_john(&f.clone().scaled(gamma).unwrap(), s, &cfg).unwrap();
        prop_assert!((rg.s_volume / r.s_volume - gamma).abs() <= 1e-5 * gamma);
        prop_assert!((rg.ellipsoid.alpha() / r.ellipsoid.alpha() - gamma.powf(1.0 / s)).abs() <= 1e-4 * gamma.powf(1.0 / s));
        prop_assert!((rg.ellipsoid.a() - r.ellipsoid.a()).norm() <= 1e-4);
    }

    #[test]
    fn comparison_corridor(f in tent(), s1 in 0.3f64..4.0, factor in 1.5f64..6.0) {
        let cfg = RunConfig::default();
        let s2 = s1 * factor;
        let v1 = solve_john(&f, s1, &cfg).unwrap().s_volume;
        let v2 = solve_john(&f, s2, &cfg).unwrap().s_volume;
        let d = 1.0;
        let upper = kappa_s(1, s1) / kappa_s(1, s2);
        let lower = ((s2 / (d + s2)).powf(s2) * (d / (d + s2)).powf(d)).sqrt() * upper;
        let ratio = v1 / v2;
        prop_assert!(ratio <= upper * (1.0 + 1e-4), "ratio {} above {}", ratio, upper);
        prop_assert!(ratio >= lower * (1.0 - 1e-4), "ratio {} below {}", ratio, lower);
    }

    #[test]
    fn affine_pullback_divides_the_volume(f in gaussian2(), t00 in 0.5f64..2.0, t01 in -0.5f64..0.5, t11 in 0.5f64..2.0, sx in -1.0f64..1.0) {
        let cfg = RunConfig::default();
        let t = Matrix::from_row_slice(2, 2, &[t00, t01, 0.0, t11]);
        let g = LogConcaveFn::pullback(f.clone(), t.clone(), Vector::from_vec(vec![sx, 0.0])).unwrap();
        let r = solve_john(&f, 2.0, &cfg).unwrap();
        let rg = solve_john(&g, 2.0, &cfg).unwrap();
        let expect = r.s_volume / t.determinant().abs();
        prop_assert!((rg.s_volume - expect).abs() <= 1e-4 * expect);
        prop_assert!((s_volume(&rg.ellipsoid, 2.0) - rg.s_volume).abs() <= 1e-9 * rg.s_volume);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn helly_selection_is_small_and_dominates(seed in 0u64..1_000_000, d in 1usize..3, n in 3usize..12) {
        let fam = random_family(d, n, seed).unwrap();
        let sel = helly_select(&fam, &HellyConfig::default(), &RunConfig::default()).unwrap();
        prop_assert!(sel.sigma.len() <= 3 * d + 2);
        prop_assert!(sel.sigma.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(sel.sigma.iter().all(|&i| i < n));
        prop_assert!(sel.ratio >= 1.0 - 1e-6);
        prop_assert!(sel.checks().all());
    }
}
