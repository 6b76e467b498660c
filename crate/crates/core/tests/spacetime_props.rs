mod common;

use common::{conformal_christoffel_oracle, contract_riemann, curved, riemann_tensor, rng, vec_in};
use lightray_core::expr::Expr;
use lightray_core::numeric::observed_order;
use lightray_core::spacetime::{conformal_flat, minkowski, minkowski_ball3, punctured_minkowski2, ChristoffelSource};
use lightray_core::{SpacetimeModel, Vector};
use proptest::prelude::*;
use rand::Rng;

fn sample_domain(model: &SpacetimeModel, r: &mut rand_chacha::ChaCha8Rng) -> Vector {
    loop {
        let d = model.domain();
        let x = Vector::from_fn(model.dim(), |i, _| r.random_range(d.lo[i]..d.hi[i]));
        if model.contains(x.as_slice()) {
            return x;
        }
    }
}

#[test]
fn catalog_models_are_lorentzian_with_timelike_t() {
    let models = vec![
        minkowski(2).unwrap(),
        minkowski(3).unwrap(),
        minkowski(4).unwrap(),
        conformal_flat(3, Expr::parse("0.4").unwrap()).unwrap(),
        conformal_flat(3, Expr::parse("0.1*x1 - 0.05*x2").unwrap()).unwrap(),
        curved(3),
        curved(4),
        punctured_minkowski2().unwrap(),
        minkowski_ball3().unwrap(),
    ];
    let mut r = rng(11);
    for model in &models {
        for _ in 0..100 {
            let x = sample_domain(model, &mut r);
            let g = model.eval_metric(&x).unwrap();
            assert!((&g - g.transpose()).amax() <= 1e-12);
            let negative = g.clone().symmetric_eigenvalues().iter().filter(|e| **e < 0.0).count();
            assert_eq!(negative, 1, "{}", model.name());
            let t = model.time_field(&x).unwrap();
            assert!(t.dot(&(&g * &t)) < 0.0 && t[0] > 0.0);
        }
    }
}

#[test]
fn conformal_connection_linear_sigma_matches_formula() {
    let model = conformal_flat(2, Expr::parse("0.3*x0 - 0.2*x1").unwrap()).unwrap();
    let fd = model.with_christoffel_source(ChristoffelSource::FiniteDifference);
    let oracle = conformal_christoffel_oracle(2, &[0.3, -0.2]);
    let mut r = rng(3);
    for _ in 0..10 {
        let x = vec_in(&mut r, 2, 2.0);
        assert!(fd.christoffel(&x).unwrap().max_abs_diff(&oracle) <= 1e-6);
        assert!(model.christoffel(&x).unwrap().max_abs_diff(&oracle) <= 1e-12);
    }
}

#[test]
fn finite_difference_connection_agrees_with_analytic_on_sine() {
    let model = conformal_flat(3, Expr::parse("0.2*sin(x2)").unwrap()).unwrap();
    let fd = model.with_christoffel_source(ChristoffelSource::FiniteDifference);
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = vec_in(&mut r, 3, 4.0);
        let s = 0.2 * x[2].cos();
        let oracle = conformal_christoffel_oracle(3, &[0.0, 0.0, s]);
        let analytic = model.christoffel(&x).unwrap();
        assert!(analytic.max_abs_diff(&oracle) <= 1e-12);
        worst = worst.max(fd.christoffel(&x).unwrap().max_abs_diff(&analytic));
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn finite_difference_connection_is_second_order() {
    let model = curved(3);
    let x = Vector::from_vec(vec![0.3, -0.7, 0.5]);
    let exact = model.christoffel(&x).unwrap();
    let err = |h: f64| model.christoffel_fd(&x, h).unwrap().max_abs_diff(&exact);
    let (e1, e2, e3) = (err(4e-2), err(2e-2), err(1e-2));
    assert!(observed_order(e1, e2, 2.0) >= 1.9, "{e1} {e2}");
    assert!(observed_order(e2, e3, 2.0) >= 1.9, "{e2} {e3}");
}

#[test]
fn curvature_operator_matches_full_tensor() {
    let mut r = rng(17);
    for m in [3usize, 4] {
        let model = curved(m);
        for _ in 0..10 {
            let x = vec_in(&mut r, m, 2.0);
            let j = vec_in(&mut r, m, 1.0);
            let v = vec_in(&mut r, m, 1.0);
            let tensor = riemann_tensor(&model, &x, 1e-4);
            let direct = contract_riemann(&tensor, m, &j, &v, &v);
            let op = model.riemann_op(&x, &j, &v).unwrap();
            assert!((&op - &direct).amax() <= 1e-6, "{}", (&op - &direct).amax());
            let swapped = contract_riemann(&tensor, m, &v, &j, &v);
            assert!((&direct + &swapped).amax() <= 1e-6);
            let mat = model.riemann_matrix(&x, &v).unwrap();
            assert!((&mat * &j - &op).amax() <= 1e-6);
        }
    }
}

#[test]
fn curvature_vanishes_on_flat_models() {
    let mut r = rng(23);
    for model in [minkowski(3).unwrap(), conformal_flat(3, Expr::parse("0.7").unwrap()).unwrap(), minkowski(4).unwrap()] {
        let m = model.dim();
        for _ in 0..20 {
            let x = vec_in(&mut r, m, 3.0);
            let j = vec_in(&mut r, m, 1.0);
            let v = vec_in(&mut r, m, 1.0);
            assert!(model.riemann_op(&x, &j, &v).unwrap().amax() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raise_after_lower_is_identity(c in proptest::collection::vec(-3.0f64..3.0, 6)) {
        let model = curved(3);
        let x = Vector::from_row_slice(&c[0..3]);
        let v = Vector::from_row_slice(&c[3..6]);
        let back = model.raise_index(&x, &model.lower_index(&x, &v).unwrap()).unwrap();
        prop_assert!((back - &v).amax() <= 1e-12 * (1.0 + v.amax()));
    }

    #[test]
    fn lowering_scales_with_conformal_factor(c in proptest::collection::vec(-3.0f64..3.0, 6)) {
        let model = curved(3);
        let flat = minkowski(3).unwrap();
        let x = Vector::from_row_slice(&c[0..3]);
        let v = Vector::from_row_slice(&c[3..6]);
        let factor = (2.0 * model.metric().sigma(x.as_slice())).exp();
        let expected = flat.lower_index(&x, &v).unwrap() * factor;
        prop_assert!((model.lower_index(&x, &v).unwrap() - expected).amax() <= 1e-12 * (1.0 + v.amax()));
    }
}
