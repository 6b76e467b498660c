//! Reference computations that do not go through the code paths they check:
//! closed forms on flat space, explicit variations of geodesics, and
//! deliberately broken variants used as mutation controls.

use std::sync::Arc;

use lightray_core::geodesics::{integrate_spray, make_null_from_vector, GeodesicNode, NullGeodesic, Pregeodesic};
use lightray_core::jacobi::{integrate_jacobi, reduce_state, GeodesicVariation};
use lightray_core::{Expr, JacobiClass, JacobiInit, Matrix, Result, SpacetimeModel, Vector};

/// Straight line `p + t v`.
pub fn flat_geodesic(p: &Vector, v: &Vector, t: f64) -> Vector {
    p + v * t
}

/// Flat Jacobi field `u + t w` with covariant derivative `w`.
pub fn flat_jacobi(u: &Vector, w: &Vector, t: f64) -> (Vector, Vector) {
    (u + w * t, w.clone())
}

/// Affine parameter of the pregeodesic with constant factor `c`.
pub fn affine_parameter(c: f64, t: f64) -> f64 {
    if c == 0.0 {
        t
    } else {
        ((c * t).exp() - 1.0) / c
    }
}

/// Null line `p + φ(t) v` with `φ′ = e^{ct}`, sampled on `[-1, 1]`.
pub fn exponential_pregeodesic(p: &Vector, v: &Vector, c: f64, n: usize) -> Pregeodesic {
    let samples = (0..=n)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / n as f64;
            GeodesicNode {
                t,
                x: p + v * affine_parameter(c, t),
                v: v * (c * t).exp(),
            }
        })
        .collect();
    Pregeodesic {
        samples,
        f: vec![c; n + 1],
    }
}

/// Parameter at which `geo` reaches time coordinate `x0`, by Newton
/// iteration on the dense output.
pub fn time_crossing(geo: &NullGeodesic, x0: f64, guess: f64) -> Result<f64> {
    let mut t = guess;
    for _ in 0..40 {
        let (x, v) = geo.state_at(t)?;
        let step = (x[0] - x0) / v[0];
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    Ok(t)
}

/// Base point moving along `a`, direction rotating in the `(x¹, x²)` plane.
pub fn rotation_family(model: &SpacetimeModel, x: Vector, a: Vector, phi0: f64) -> GeodesicVariation {
    let xb = x.clone();
    let ab = a.clone();
    let model = model.clone();
    GeodesicVariation::new(
        move |s| &xb + &ab * s,
        move |s| {
            let base = &x + &a * s;
            let mut dir = Vector::zeros(model.dim());
            dir[1] = (phi0 + s).cos();
            dir[2] = (phi0 + s).sin();
            make_null_from_vector(&model, &base, &dir).expect("family stays in the domain")
        },
    )
}

/// The rays of `state(s)` with the base point slid to parameter `κs` and
/// the velocity scaled by `1 + μs`: the same curve of unparametrized rays.
pub fn slid_family(
    model: &SpacetimeModel,
    state: impl Fn(f64) -> (Vector, Vector) + Send + Sync + 'static,
    kappa: f64,
    mu: f64,
) -> GeodesicVariation {
    let model = model.clone();
    let moved = Arc::new(move |s: f64| {
        let (p, w) = state(s);
        let t = kappa * s;
        let span = if t >= 0.0 { (0.0, t) } else { (t, 0.0) };
        integrate_spray(&model, &p, &w, span, 64)
            .and_then(|g| g.state_at(t))
            .expect("short geodesic stays in the domain")
    });
    let m2 = moved.clone();
    GeodesicVariation::new(move |s| moved(s).0, move |s| m2(s).1 * (1.0 + mu * s))
}

/// Classes at a common event of the field with data `init` along the
/// `g`-geodesic and of the field built from the same curves along the
/// geodesic of `e^{2σ}g` (same initial velocity), both expressed in `g`.
pub fn conformal_class_pair(
    g: &SpacetimeModel,
    sigma: &str,
    x: &Vector,
    v: &Vector,
    init: &JacobiInit,
    t1: f64,
    steps_per_unit: usize,
) -> Result<(JacobiClass, JacobiClass)> {
    let bar = g.conformal_rescale(Expr::parse(sigma)?);
    let span_g = (0.0, 1.2 * t1);
    let geo = integrate_spray(g, x, v, span_g, (span_g.1 * steps_per_unit as f64) as usize)?;
    let span_b = (0.0, 2.5 * t1);
    let geo_bar = integrate_spray(&bar, x, v, span_b, (span_b.1 * steps_per_unit as f64) as usize)?;
    let diff = bar.christoffel(x)?.difference(&g.christoffel(x)?);
    let init_bar = JacobiInit::new(init.j0.clone(), &init.j0dot + diff.contract(v, &init.j0));
    let field = integrate_jacobi(&geo, init)?;
    let field_bar = integrate_jacobi(&geo_bar, &init_bar)?;
    let (x1, v1) = geo.state_at(t1)?;
    let tb = time_crossing(&geo_bar, x1[0], t1)?;
    let (_, vb) = geo_bar.state_at(tb)?;
    let (j, p) = field.at(t1)?;
    let (jb, pb) = field_bar.at(tb)?;
    let back = bar.christoffel(&x1)?.difference(&g.christoffel(&x1)?);
    let pb_g = &pb - back.contract(&vb, &jb);
    let c = reduce_state(g, &x1, &v1, &j, &p)?;
    let cb = reduce_state(g, &x1, &vb, &jb, &pb_g)?;
    Ok((c, cb))
}

/// `ω₀` with the sign of the second term flipped: symmetric, hence wrong.
pub fn omega0_symmetrized(g: &Matrix, c1: &JacobiClass, c2: &JacobiClass) -> f64 {
    c1.w0.dot(&(g * &c2.w0dot)) + c2.w0.dot(&(g * &c1.w0dot))
}
