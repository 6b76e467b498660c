mod common;

use common::{curved, random_ray, rng};
use lightray_core::geodesics::integrate_spray;
use lightray_core::jacobi::{class_distance, reduce_at, GeodesicVariation};
use lightray_core::lightrays::{ray_coords, ray_curve, tangent_from_ray_curve, CauchyChart};
use lightray_core::spacetime::{minkowski, CoordBox};
use rand::Rng;
use std::sync::Arc;

#[test]
fn chart_dimension_is_two_m_minus_three() {
    for m in [3usize, 4] {
        let chart = CauchyChart::build(&curved(m), CoordBox::cube(m, 2.0), 0.0).unwrap();
        let mut r = rng(m as u64);
        for _ in 0..10 {
            let coords = ray_coords(&random_ray(&chart, &mut r)).unwrap();
            assert_eq!(coords.len(), 2 * m - 3);
        }
    }
}

#[test]
fn tangent_is_linear_in_the_curve() {
    let mut r = rng(9);
    for m in [3usize, 4] {
        let chart = CauchyChart::build(&curved(m), CoordBox::cube(m, 2.0), 0.0).unwrap();
        for _ in 0..5 {
            let ray = random_ray(&chart, &mut r);
            let c0 = ray_coords(&ray).unwrap().values;
            let d: Vec<f64> = (0..c0.len()).map(|_| r.random_range(-1.0..1.0)).collect();
            let class_for = |a: f64| {
                let c0 = c0.clone();
                let d = d.clone();
                let curve = ray_curve(&chart, move |s| c0.iter().zip(&d).map(|(c, d)| c + a * s * d).collect());
                tangent_from_ray_curve(&chart, &curve, 1e-3).unwrap()
            };
            let one = class_for(1.0);
            for a in [2.0, -1.0] {
                let scaled = class_for(a);
                let d = class_distance(&scaled, &one.scaled(a)).unwrap();
                assert!(d <= 1e-6, "a={a}: {d}");
            }
        }
    }
}

#[test]
fn chart_curve_and_shifted_variation_give_the_same_class() {
    let mut r = rng(10);
    let model = curved(3);
    let chart = CauchyChart::build(&model, CoordBox::cube(3, 2.0), 0.0).unwrap();
    for _ in 0..5 {
        let ray = random_ray(&chart, &mut r);
        let c0 = ray_coords(&ray).unwrap().values;
        let d: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        let coords = move |s: f64| c0.iter().zip(&d).map(|(c, d)| c + s * d).collect::<Vec<f64>>();
        let from_chart = {
            let curve = ray_curve(&chart, coords.clone());
            tangent_from_ray_curve(&chart, &curve, 1e-3).unwrap()
        };
        // Slide the base point along each ray and rescale its velocity.
        let kappa = r.random_range(-0.4..0.4);
        let mu = r.random_range(-0.4..0.4);
        let ch = chart.clone();
        let mm = model.clone();
        let state = Arc::new(move |s: f64| {
            let ray = ray_curve(&ch, coords.clone())(s).unwrap();
            let t = kappa * s;
            let span = if t >= 0.0 { (0.0, t) } else { (t, 0.0) };
            integrate_spray(&mm, &ray.event(), ray.v(), span, 64).unwrap().state_at(t).unwrap()
        });
        let st = state.clone();
        let family = GeodesicVariation::new(move |s| st(s).0, move |s| state(s).1 * (1.0 + mu * s));
        let cls = reduce_at(&model, &ray.event(), ray.v(), &family.initial_data(&model).unwrap()).unwrap();
        let dist = class_distance(&from_chart, &cls).unwrap();
        assert!(dist <= 1e-6, "{dist}");
    }
}

#[test]
fn flat_translation_in_chart_is_a_translation_field() {
    let chart = CauchyChart::build(&minkowski(3).unwrap(), CoordBox::cube(3, 2.0), 0.0).unwrap();
    let curve = ray_curve(&chart, |s| vec![0.1 + s, -0.2, 0.9]);
    let cls = tangent_from_ray_curve(&chart, &curve, 1e-3).unwrap();
    assert!((cls.w0[1] - 1.0).abs() <= 1e-10 && cls.w0dot.amax() <= 1e-10);
}
