//! Fixture models and random sampling shared by the check matrix.

use lightray_core::expr::Expr;
use lightray_core::geodesics::make_null_from_vector;
use lightray_core::jacobi::reduce_at;
use lightray_core::lightrays::coords_to_ray;
use lightray_core::spacetime::{conformal_flat, minkowski, CoordBox};
use lightray_core::{CauchyChart, JacobiClass, JacobiInit, LightRay, RayCoords, Result, SpacetimeModel, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`; the draw
/// sequence of a stream does not depend on which other streams were used.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn vec_in(rng: &mut ChaCha8Rng, m: usize, half: f64) -> Vector {
    Vector::from_fn(m, |_, _| rng.random_range(-half..half))
}

/// Conformal factor with bounded oscillation in every direction.
pub fn curved_sigma(m: usize) -> &'static str {
    match m {
        2 => "0.2*sin(x1) + 0.1*x0",
        3 => "0.2*sin(x1) + 0.15*sin(x2 + 0.5*x0)",
        _ => "0.2*sin(x1) + 0.15*sin(x2 + 0.5*x0) - 0.15*cos(x3)",
    }
}

/// Second factor used for conformal comparisons.
pub fn second_sigma(m: usize) -> &'static str {
    if m == 3 {
        "0.3*cos(x2) - 0.2*x1"
    } else {
        "0.25*sin(x3 + x0) + 0.1*x1"
    }
}

pub fn curved(m: usize) -> SpacetimeModel {
    conformal_flat(m, Expr::parse(curved_sigma(m)).expect("fixture expression")).expect("fixture model")
}

pub fn flat(m: usize) -> SpacetimeModel {
    minkowski(m).expect("fixture model")
}

pub fn chart(model: &SpacetimeModel) -> CauchyChart {
    CauchyChart::build(model, CoordBox::cube(model.dim(), 2.0), 0.0).expect("fixture chart")
}

/// Flat and conformal fixtures in dimensions 3 and 4.
pub fn fixture_models() -> Vec<SpacetimeModel> {
    vec![flat(3), flat(4), curved(3), curved(4)]
}

/// Chart coordinates of a ray placed in the middle 60% of the slice, with a
/// random direction (polar angles kept away from the poles).
pub fn random_coords(chart: &CauchyChart, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = chart.dim();
    let region = chart.region();
    let mut values: Vec<f64> = (1..m)
        .map(|i| {
            let (lo, hi) = (region.lo[i], region.hi[i]);
            rng.random_range(0.8 * lo + 0.2 * hi..0.2 * lo + 0.8 * hi)
        })
        .collect();
    for _ in 0..m.saturating_sub(3) {
        values.push(rng.random_range(0.2..std::f64::consts::PI - 0.2));
    }
    values.push(rng.random_range(0.0..std::f64::consts::TAU));
    values
}

pub fn random_ray(chart: &CauchyChart, rng: &mut ChaCha8Rng) -> Result<LightRay> {
    let values = random_coords(chart, rng);
    coords_to_ray(chart, &RayCoords { values, branch: 1 })
}

/// A future null vector at a random point of the unit-ish cube.
pub fn random_state(model: &SpacetimeModel, rng: &mut ChaCha8Rng) -> Result<(Vector, Vector)> {
    let m = model.dim();
    let x = vec_in(rng, m, 1.5);
    let v = make_null_from_vector(model, &x, &vec_in(rng, m, 1.0))?;
    Ok((x, v))
}

/// Moves `u` along `T` until `g(u, v) = 0`.
pub fn orthogonalize_along_t(model: &SpacetimeModel, x: &Vector, v: &Vector, u: Vector) -> Result<Vector> {
    let g = model.eval_metric(x)?;
    let t = model.time_field(x)?;
    let gv = &g * v;
    Ok(&u - &t * (u.dot(&gv) / t.dot(&gv)))
}

/// Random initial data of a light-ray field; with `contact` the initial
/// vector is orthogonal to the ray as well.
pub fn random_lightray_init(
    model: &SpacetimeModel,
    x: &Vector,
    v: &Vector,
    rng: &mut ChaCha8Rng,
    contact: bool,
) -> Result<JacobiInit> {
    let m = model.dim();
    let j = vec_in(rng, m, 1.0);
    let j = if contact { orthogonalize_along_t(model, x, v, j)? } else { j };
    let p = orthogonalize_along_t(model, x, v, vec_in(rng, m, 1.0))?;
    Ok(JacobiInit::new(j, p))
}

pub fn random_class(ray: &LightRay, rng: &mut ChaCha8Rng, contact: bool) -> Result<JacobiClass> {
    let x = ray.event();
    let init = random_lightray_init(ray.model(), &x, ray.v(), rng, contact)?;
    reduce_at(ray.model(), &x, ray.v(), &init)
}
