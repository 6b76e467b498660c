mod common;

use common::{curved, rng, vec_in};
use lightray_core::geodesics::{
    geodesic_residual, integrate_geodesic, make_null, reparametrize_to_geodesic, GeodesicNode, Pregeodesic,
};
use lightray_core::numeric::observed_order;
use lightray_core::spacetime::minkowski;
use lightray_core::Vector;
use rand::Rng;

/// Straight null line `p + φ(t) v` sampled on `[-1, 1]` with `φ′ = e^{ct}`.
fn exponential_curve(c: f64, n: usize) -> Pregeodesic {
    let p = Vector::from_vec(vec![0.2, -0.1, 0.3]);
    let v = Vector::from_vec(vec![1.0, 0.6, 0.8]);
    let phi = |t: f64| if c == 0.0 { t } else { ((c * t).exp() - 1.0) / c };
    let samples = (0..=n)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / n as f64;
            GeodesicNode {
                t,
                x: &p + &v * phi(t),
                v: &v * (c * t).exp(),
            }
        })
        .collect();
    Pregeodesic {
        samples,
        f: vec![c; n + 1],
    }
}

#[test]
fn reparametrization_closed_forms() {
    let model = minkowski(3).unwrap();
    for c in [0.0, 0.5] {
        let pre = exponential_curve(c, 400);
        let (tau, geo) = reparametrize_to_geodesic(&model, &pre).unwrap();
        for (s, tau) in pre.samples.iter().zip(&tau) {
            let exact = if c == 0.0 { s.t } else { ((c * s.t).exp() - 1.0) / c };
            assert!((tau - exact).abs() <= 1e-8, "c={c}: {tau} vs {exact}");
        }
        assert!(geodesic_residual(&model, geo.nodes()).unwrap() <= 1e-6);
    }
}

#[test]
fn exponential_curve_is_not_affine_until_reparametrized() {
    let model = minkowski(3).unwrap();
    let pre = exponential_curve(0.5, 400);
    assert!(geodesic_residual(&model, &pre.samples).unwrap() >= 1e-2);
    let (_, geo) = reparametrize_to_geodesic(&model, &pre).unwrap();
    assert!(geodesic_residual(&model, geo.nodes()).unwrap() <= 1e-6);
}

#[test]
fn conformal_geodesics_reparametrize_to_affine_ones() {
    let g = minkowski(3).unwrap();
    let bar = curved(3);
    let mut r = rng(41);
    for _ in 0..10 {
        let p = vec_in(&mut r, 3, 1.0);
        let phi = r.random_range(0.0..std::f64::consts::TAU);
        let v = make_null(&g, &p, &[phi.cos(), phi.sin()]).unwrap();
        let other = integrate_geodesic(&bar, &p, &v, (-1.0, 1.0), 1600).unwrap();
        let pre = Pregeodesic::from_conformal_geodesic(&g, &other);
        assert!(geodesic_residual(&g, &pre.samples).unwrap() > 1e-4);
        let (_, geo) = reparametrize_to_geodesic(&g, &pre).unwrap();
        assert!(geodesic_residual(&g, geo.nodes()).unwrap() <= 1e-6);
        // A straight line in the flat chart: positions are affine in τ.
        let first = geo.first();
        for n in geo.nodes() {
            let predicted = &first.x + &first.v * (n.t - first.t);
            assert!((predicted - &n.x).amax() <= 1e-6);
        }
    }
}

#[test]
fn null_drift_over_test_matrix() {
    let mut r = rng(43);
    for m in [2usize, 3, 4] {
        let model = curved(m);
        for _ in 0..10 {
            let p = vec_in(&mut r, m, 1.0);
            let dir: Vec<f64> = (0..m - 1).map(|_| r.random_range(-1.0..1.0)).collect();
            let v = make_null(&model, &p, &dir).unwrap();
            let geo = integrate_geodesic(&model, &p, &v, (-2.0, 2.0), 3200).unwrap();
            assert!(geo.null_drift() <= 1e-8 * v.norm_squared(), "m={m} drift {} len {} term {:?}", geo.null_drift(), geo.len(), geo.termination());
            assert!(geo.min_future_pairing() > 0.0);
        }
    }
}

#[test]
fn runge_kutta_self_convergence() {
    let model = curved(4);
    let p = Vector::from_vec(vec![0.1, 0.2, -0.3, 0.4]);
    let v = make_null(&model, &p, &[0.3, -0.5, 0.8]).unwrap();
    let end = |n: usize| integrate_geodesic(&model, &p, &v, (0.0, 2.0), n).unwrap().last().x.clone();
    let (a, b, c) = (end(50), end(100), end(200));
    let order = observed_order((&a - &b).amax(), (&b - &c).amax(), 2.0);
    assert!(order >= 3.9, "{order}");
}
