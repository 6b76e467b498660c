//! The chart of the space of light rays over a coordinate time slice.
//!
//! A ray is represented by where it meets the slice `x⁰ = c₀` and by its
//! velocity there, normalized by `g(v,T) = −1`. Chart coordinates are the
//! spatial coordinates of the crossing plus the angles of the spatial part
//! of `v` in a Gram–Schmidt frame.

use std::f64::consts::TAU;

use nalgebra::Cholesky;

use crate::defaults;
use crate::error::{Error, Result};
use crate::geodesics::{integrate_geodesic, NullGeodesic};
use crate::jacobi::{reduce_at, JacobiClass, JacobiInit};
use crate::spacetime::{CoordBox, SpacetimeModel};
use crate::Vector;

/// `g`-orthonormal frame `(T̂, e₁, …, e_{m−1})` at a point of the slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub t_hat: Vector,
    /// `√(−g(T,T))`.
    pub t_norm: f64,
    pub legs: Vec<Vector>,
}

/// Region `V` with the slice `C = {x⁰ = c₀} ∩ V`.
#[derive(Clone, Debug)]
pub struct CauchyChart {
    model: SpacetimeModel,
    region: CoordBox,
    c0: f64,
}

impl CauchyChart {
    /// Validates that the slice lies in `V` and is spacelike on a grid of
    /// `10^{m−1}` points.
    pub fn build(model: &SpacetimeModel, region: CoordBox, c0: f64) -> Result<Self> {
        let m = model.dim();
        if region.dim() != m {
            return Err(Error::InvalidArgument("chart box has the wrong dimension".into()));
        }
        if !(region.lo[0] <= c0 && c0 <= region.hi[0]) {
            return Err(Error::SliceOutsideBox { c0 });
        }
        let per_axis = 10usize;
        let total = per_axis.pow((m - 1) as u32);
        let mut x = vec![c0; m];
        for idx in 0..total {
            let mut rem = idx;
            for a in 1..m {
                let k = rem % per_axis;
                rem /= per_axis;
                let f = k as f64 / (per_axis - 1) as f64;
                x[a] = region.lo[a] + f * (region.hi[a] - region.lo[a]);
            }
            if !model.contains(&x) {
                continue;
            }
            let g = model.eval_metric(&Vector::from_row_slice(&x))?;
            let induced = g.view((1, 1), (m - 1, m - 1)).into_owned();
            if Cholesky::new(induced).is_none() {
                return Err(Error::NotSpacelike { c0, point: x.clone() });
            }
        }
        Ok(Self {
            model: model.clone(),
            region,
            c0,
        })
    }

    pub fn model(&self) -> &SpacetimeModel {
        &self.model
    }

    pub fn region(&self) -> &CoordBox {
        &self.region
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// The event `(c₀, q)`.
    pub fn event(&self, q: &Vector) -> Vector {
        let m = self.dim();
        Vector::from_fn(m, |i, _| if i == 0 { self.c0 } else { q[i - 1] })
    }

    /// Whether `q` lies on `C ∩ V` and in the model domain.
    pub fn contains_surface_point(&self, q: &Vector) -> bool {
        let e = self.event(q);
        q.len() + 1 == self.dim() && self.region.contains(e.as_slice()) && self.model.contains(e.as_slice())
    }

    /// Gram–Schmidt of `(T, ∂₁, …, ∂_{m−1})` under `g`.
    pub fn frame(&self, q: &Vector) -> Result<Frame> {
        let x = self.event(q);
        let g = self.model.eval_metric(&x)?;
        let t = self.model.time_field(&x)?;
        let ip = |a: &Vector, b: &Vector| a.dot(&(&g * b));
        let t_norm = (-ip(&t, &t)).sqrt();
        let t_hat = &t / t_norm;
        let m = self.dim();
        let mut legs: Vec<Vector> = Vec::with_capacity(m - 1);
        for i in 1..m {
            let mut e = Vector::zeros(m);
            e[i] = 1.0;
            e += &t_hat * ip(&e, &t_hat);
            for prev in &legs {
                e -= prev * ip(&e, prev);
            }
            let n2 = ip(&e, &e);
            if !(n2 > 0.0) {
                return Err(Error::NotSpacelike {
                    c0: self.c0,
                    point: x.as_slice().to_vec(),
                });
            }
            legs.push(e / n2.sqrt());
        }
        Ok(Frame { t_hat, t_norm, legs })
    }
}

/// A point of the chart: crossing `q ∈ C` and future null `v` with
/// `g(v,T) = −1`.
#[derive(Clone, Debug)]
pub struct LightRay {
    chart: CauchyChart,
    q: Vector,
    v: Vector,
}

impl LightRay {
    pub fn new(chart: &CauchyChart, q: Vector, v: Vector) -> Result<Self> {
        let m = chart.dim();
        if q.len() != m - 1 || v.len() != m {
            return Err(Error::InvalidArgument("ray data has the wrong dimension".into()));
        }
        if !chart.contains_surface_point(&q) {
            return Err(Error::OutOfDomain {
                point: chart.event(&q).as_slice().to_vec(),
                reason: crate::DomainViolation::OutsideBox,
            });
        }
        let x = chart.event(&q);
        let g = chart.model().eval_metric(&x)?;
        let t = chart.model().time_field(&x)?;
        let norm = v.dot(&(&g * &v));
        let tol = defaults::TOL_NORMALIZED * v.norm_squared().max(1.0);
        if norm.abs() > tol {
            return Err(Error::NotNull { norm: norm.abs(), tolerance: tol });
        }
        let residual = v.dot(&(&g * &t)) + 1.0;
        if residual.abs() > defaults::TOL_NORMALIZED {
            return Err(Error::NotNormalized { residual });
        }
        Ok(Self {
            chart: chart.clone(),
            q,
            v,
        })
    }

    pub fn chart(&self) -> &CauchyChart {
        &self.chart
    }

    pub fn model(&self) -> &SpacetimeModel {
        self.chart.model()
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn v(&self) -> &Vector {
        &self.v
    }

    pub fn event(&self) -> Vector {
        self.chart.event(&self.q)
    }
}

/// Where the geodesic crosses the slice, with the velocity renormalized.
pub fn ray_to_chart(chart: &CauchyChart, geo: &NullGeodesic) -> Result<LightRay> {
    let c0 = chart.c0();
    let nodes = geo.nodes();
    let f: Vec<f64> = nodes.iter().map(|n| n.x[0] - c0).collect();
    let mut crossings = Vec::new();
    let mut last_sign = 0.0;
    let mut last_index = 0usize;
    for (i, &fi) in f.iter().enumerate() {
        if fi == 0.0 {
            continue;
        }
        let s = fi.signum();
        if last_sign != 0.0 && s != last_sign {
            crossings.push(last_index);
        }
        last_sign = s;
        last_index = i;
    }
    let bracket = match crossings.len() {
        0 => match f.iter().position(|v| *v == 0.0) {
            Some(i) => (i, i),
            None => return Err(Error::NoCrossing { c0 }),
        },
        1 => {
            let i = crossings[0];
            let j = (i + 1..nodes.len()).find(|&j| f[j] != 0.0).unwrap_or(i + 1);
            match (i..=j).find(|&k| f[k] == 0.0) {
                Some(k) => (k, k),
                None => (i, j),
            }
        }
        count => return Err(Error::MultipleCrossings { c0, count }),
    };
    let t_star = if bracket.0 == bracket.1 {
        nodes[bracket.0].t
    } else {
        let (mut a, mut b) = (nodes[bracket.0].t, nodes[bracket.1].t);
        let (fa, fb) = (f[bracket.0], f[bracket.1]);
        let mut t = a + (b - a) * fa / (fa - fb);
        for _ in 0..60 {
            let (x, v) = geo.state_at(t)?;
            let r = x[0] - c0;
            if r == 0.0 {
                break;
            }
            if r.signum() == fa.signum() {
                a = t;
            } else {
                b = t;
            }
            let newton = t - r / v[0];
            let next = if newton > a.min(b) && newton < a.max(b) {
                newton
            } else {
                0.5 * (a + b)
            };
            let done = (next - t).abs() <= 1e-14 * (1.0 + t.abs());
            t = next;
            if done {
                break;
            }
        }
        t
    };
    let (x, v) = geo.state_at(t_star)?;
    let q = Vector::from_iterator(chart.dim() - 1, x.iter().skip(1).copied());
    if !chart.contains_surface_point(&q) {
        return Err(Error::NoCrossing { c0 });
    }
    let x_on = chart.event(&q);
    let g = chart.model().eval_metric(&x_on)?;
    let t_field = chart.model().time_field(&x_on)?;
    let pairing = v.dot(&(&g * &t_field));
    if !(pairing < 0.0) {
        return Err(Error::NotFuture { pairing });
    }
    LightRay::new(chart, q, v / (-pairing))
}

/// The geodesic through the ray's event with the ray's velocity.
pub fn chart_to_ray(ray: &LightRay, t_span: (f64, f64), n_steps: usize) -> Result<NullGeodesic> {
    integrate_geodesic(ray.model(), &ray.event(), ray.v(), t_span, n_steps)
}

/// Chart coordinates of a ray: `m−1` slice coordinates then `m−2` angles.
#[derive(Clone, Debug, PartialEq)]
pub struct RayCoords {
    pub values: Vec<f64>,
    /// Direction of the spatial part when `m = 2`, where there are no
    /// angles; always `+1` otherwise.
    pub branch: i8,
}

impl RayCoords {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distance with angles compared modulo their period.
    pub fn distance(&self, other: &RayCoords, m: usize) -> f64 {
        let mut worst = 0.0f64;
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let mut d = (a - b).abs();
            if i == self.values.len() - 1 && i >= m - 1 {
                d = d.min(TAU - d);
            }
            worst = worst.max(d);
        }
        if self.branch != other.branch {
            worst = f64::INFINITY;
        }
        worst
    }
}

/// Hyperspherical angles of a unit vector of length `d ≥ 2`: polar angles in
/// `[0, π]` followed by one azimuth in `[0, 2π)`.
pub fn unit_to_angles(s: &[f64]) -> Vec<f64> {
    let d = s.len();
    let mut out = Vec::with_capacity(d.saturating_sub(1));
    for k in 0..d.saturating_sub(2) {
        let tail: f64 = s[k..].iter().map(|c| c * c).sum::<f64>().sqrt();
        let c = if tail > 0.0 { (s[k] / tail).clamp(-1.0, 1.0) } else { 1.0 };
        out.push(c.acos());
    }
    if d >= 2 {
        let mut phi = s[d - 1].atan2(s[d - 2]);
        if phi < 0.0 {
            phi += TAU;
        }
        if phi >= TAU {
            phi -= TAU;
        }
        out.push(phi);
    }
    out
}

/// Inverse of [`unit_to_angles`].
pub fn angles_to_unit(angles: &[f64]) -> Vec<f64> {
    let d = angles.len() + 1;
    let mut s = vec![0.0; d];
    let mut sin_prod = 1.0;
    for k in 0..d.saturating_sub(2) {
        s[k] = sin_prod * angles[k].cos();
        sin_prod *= angles[k].sin();
    }
    let phi = angles[d - 2];
    s[d - 2] = sin_prod * phi.cos();
    s[d - 1] = sin_prod * phi.sin();
    s
}

/// Frame components of the spatial unit direction of `v`.
fn spatial_direction(frame: &Frame, g: &crate::Matrix, v: &Vector) -> Vec<f64> {
    let w = v * frame.t_norm - &frame.t_hat;
    frame.legs.iter().map(|e| e.dot(&(g * &w))).collect()
}

pub fn ray_coords(ray: &LightRay) -> Result<RayCoords> {
    let chart = ray.chart();
    let m = chart.dim();
    let frame = chart.frame(ray.q())?;
    let g = chart.model().eval_metric(&ray.event())?;
    let s = spatial_direction(&frame, &g, ray.v());
    let mut values: Vec<f64> = ray.q().iter().copied().collect();
    let branch = if m == 2 {
        if s[0] >= 0.0 {
            1
        } else {
            -1
        }
    } else {
        values.extend(unit_to_angles(&s));
        1
    };
    Ok(RayCoords { values, branch })
}

pub fn coords_to_ray(chart: &CauchyChart, coords: &RayCoords) -> Result<LightRay> {
    let m = chart.dim();
    if coords.values.len() != 2 * m - 3 {
        return Err(Error::InvalidArgument(format!(
            "ray coordinates need {} entries",
            2 * m - 3
        )));
    }
    let q = Vector::from_row_slice(&coords.values[..m - 1]);
    let frame = chart.frame(&q)?;
    let s = if m == 2 {
        vec![coords.branch as f64]
    } else {
        angles_to_unit(&coords.values[m - 1..])
    };
    let mut s_hat = Vector::zeros(m);
    for (c, e) in s.iter().zip(&frame.legs) {
        s_hat += e * *c;
    }
    let v = (&frame.t_hat + s_hat) / frame.t_norm;
    LightRay::new(chart, q, v)
}

/// The class of `d/ds` of a curve of rays at `s = 0`, from the variation
/// `x(s,t) = exp_{q(s)}(t v(s))`: `J(0) = q′(0)`, `DJ/dt(0) = Dv/ds(0)`.
/// Central differences with step `ds`, Richardson-extrapolated.
pub fn tangent_from_ray_curve(
    chart: &CauchyChart,
    curve: &dyn Fn(f64) -> Result<LightRay>,
    ds: f64,
) -> Result<JacobiClass> {
    tangent_from_ray_curve_with(chart, curve, ds, true)
}

pub fn tangent_from_ray_curve_with(
    chart: &CauchyChart,
    curve: &dyn Fn(f64) -> Result<LightRay>,
    ds: f64,
    richardson: bool,
) -> Result<JacobiClass> {
    let m = chart.dim();
    let centre = curve(0.0)?;
    let diff = |h: f64| -> Result<(Vector, Vector)> {
        let a = curve(h)?;
        let b = curve(-h)?;
        let dq = (a.q() - b.q()) / (2.0 * h);
        let dv = (a.v() - b.v()) / (2.0 * h);
        Ok((Vector::from_fn(m, |i, _| if i == 0 { 0.0 } else { dq[i - 1] }), dv))
    };
    let (dx, dv) = if richardson {
        let (x1, v1) = diff(ds)?;
        let (x2, v2) = diff(0.5 * ds)?;
        ((&x2 * 4.0 - x1) / 3.0, (&v2 * 4.0 - v1) / 3.0)
    } else {
        diff(ds)?
    };
    let x = centre.event();
    let gamma = chart.model().christoffel(&x)?;
    let j0dot = dv + gamma.contract(&dx, centre.v());
    reduce_at(chart.model(), &x, centre.v(), &JacobiInit::new(dx, j0dot))
}

/// Wraps [`coords_to_ray`] around a coordinate curve.
pub fn ray_curve<'a>(
    chart: &'a CauchyChart,
    coords: impl Fn(f64) -> Vec<f64> + 'a,
) -> impl Fn(f64) -> Result<LightRay> + 'a {
    move |s| {
        coords_to_ray(
            chart,
            &RayCoords {
                values: coords(s),
                branch: 1,
            },
        )
    }
}

/// Normalizes an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geodesics::make_null;
    use crate::spacetime::{conformal_flat, minkowski};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v(c: &[f64]) -> Vector {
        Vector::from_row_slice(c)
    }

    fn flat_chart() -> CauchyChart {
        CauchyChart::build(&minkowski(3).unwrap(), CoordBox::cube(3, 2.0), 0.0).unwrap()
    }

    fn curved_chart() -> CauchyChart {
        let c = conformal_flat(3, Expr::parse("0.2*sin(x1) + 0.1*x2*x0").unwrap()).unwrap();
        CauchyChart::build(&c, CoordBox::cube(3, 2.0), 0.0).unwrap()
    }

    #[test]
    fn flat_frame_is_standard() {
        let ch = flat_chart();
        let f = ch.frame(&v(&[0.3, -0.2])).unwrap();
        assert_eq!(f.t_hat, v(&[1.0, 0.0, 0.0]));
        assert_eq!(f.legs[0], v(&[0.0, 1.0, 0.0]));
        assert_eq!(f.legs[1], v(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn slice_checks() {
        let m = minkowski(3).unwrap();
        assert!(matches!(
            CauchyChart::build(&m, CoordBox::cube(3, 1.0), 2.0),
            Err(Error::SliceOutsideBox { .. })
        ));
        // Tilted conformal factor without time dependence keeps the slice spacelike.
        let c = conformal_flat(3, Expr::parse("0.3*x1 + 0.2*x2").unwrap()).unwrap();
        assert!(CauchyChart::build(&c, CoordBox::cube(3, 2.0), 0.0).is_ok());
    }

    #[test]
    fn crossing_of_a_flat_line() {
        let ch = flat_chart();
        let geo = integrate_geodesic(ch.model(), &v(&[1.0, 1.0, 0.0]), &v(&[2.0, 2.0, 0.0]), (-1.0, 1.0), 200).unwrap();
        let ray = ray_to_chart(&ch, &geo).unwrap();
        assert!(ray.q().amax() <= 1e-12);
        assert!((ray.v() - v(&[1.0, 1.0, 0.0])).amax() <= 1e-12);
    }

    #[test]
    fn crossing_errors() {
        let ch = flat_chart();
        let geo = integrate_geodesic(ch.model(), &v(&[1.0, 0.0, 0.0]), &v(&[1.0, 1.0, 0.0]), (0.0, 1.0), 100).unwrap();
        assert!(matches!(ray_to_chart(&ch, &geo), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn coords_examples() {
        let ch = flat_chart();
        let ray = LightRay::new(&ch, v(&[0.0, 0.0]), v(&[1.0, 1.0, 0.0])).unwrap();
        let c = ray_coords(&ray).unwrap();
        assert_eq!(c.values.len(), 3);
        assert!(c.values.iter().all(|x| x.abs() < 1e-15));
        let ray = LightRay::new(&ch, v(&[0.0, 0.0]), v(&[1.0, 0.0, 1.0])).unwrap();
        assert!((ray_coords(&ray).unwrap().values[2] - PI / 2.0).abs() < 1e-15);
        assert!(matches!(
            LightRay::new(&ch, v(&[0.0, 0.0]), v(&[2.0, 2.0, 0.0])),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn degenerate_span_single_node() {
        let ch = flat_chart();
        let ray = LightRay::new(&ch, v(&[0.0, 0.0]), v(&[1.0, 1.0, 0.0])).unwrap();
        assert_eq!(chart_to_ray(&ray, (0.0, 0.0), 0).unwrap().len(), 1);
    }

    #[test]
    fn translation_and_rotation_tangents() {
        let ch = flat_chart();
        let trans = ray_curve(&ch, |s| vec![s, 0.0, 0.0]);
        let c = tangent_from_ray_curve(&ch, &trans, 1e-3).unwrap();
        assert!((&c.w0 - v(&[0.0, 1.0, 0.0])).amax() < 1e-12);
        assert!(c.w0dot.amax() < 1e-12);
        let rot = ray_curve(&ch, |s| vec![0.0, 0.0, s]);
        let c = tangent_from_ray_curve(&ch, &rot, 1e-3).unwrap();
        assert!(c.w0.amax() < 1e-12);
        assert!((&c.w0dot - v(&[0.0, 0.0, 1.0])).amax() < 1e-10);
        let constant = ray_curve(&ch, |_| vec![0.2, 0.1, 1.0]);
        let c = tangent_from_ray_curve(&ch, &constant, 1e-3).unwrap();
        assert_eq!(c.w0.amax().max(c.w0dot.amax()), 0.0);
    }

    #[test]
    fn angles_round_trip_in_four_dimensions() {
        let s = [0.3, -0.5, 0.81f64.sqrt() * 0.2];
        let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s: Vec<f64> = s.iter().map(|x| x / n).collect();
        let back = angles_to_unit(&unit_to_angles(&s));
        for (a, b) in s.iter().zip(&back) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn coords_round_trip(
            q in proptest::collection::vec(-1.5f64..1.5, 2),
            phi in 0.0f64..TAU,
        ) {
            let ch = curved_chart();
            let c = RayCoords { values: vec![q[0], q[1], phi], branch: 1 };
            let ray = coords_to_ray(&ch, &c).unwrap();
            let back = ray_coords(&ray).unwrap();
            prop_assert!(back.distance(&c, 3) <= 1e-10);
        }

        #[test]
        fn crossing_is_parametrization_independent(
            q in proptest::collection::vec(-1.0f64..1.0, 2),
            phi in 0.0f64..TAU,
            shift in -0.4f64..0.4,
            lambda in prop_oneof![Just(0.5f64), Just(3.0f64)],
        ) {
            let ch = curved_chart();
            let ray = coords_to_ray(&ch, &RayCoords { values: vec![q[0], q[1], phi], branch: 1 }).unwrap();
            let geo = chart_to_ray(&ray, (-1.0, 1.0), 1600).unwrap();
            let (x, u) = geo.state_at(shift).unwrap();
            let span = (-2.0 / lambda, 2.0 / lambda);
            let other = integrate_geodesic(ch.model(), &x, &(u * lambda), span, 1600).unwrap();
            let back = ray_to_chart(&ch, &other).unwrap();
            prop_assert!((back.q() - ray.q()).amax() <= 1e-9);
            prop_assert!((back.v() - ray.v()).amax() <= 1e-9);
        }

        #[test]
        fn make_null_agrees_with_frame_direction(phi in 0.0f64..TAU) {
            let ch = curved_chart();
            let q = v(&[0.4, -0.3]);
            let ray = coords_to_ray(&ch, &RayCoords { values: vec![0.4, -0.3, phi], branch: 1 }).unwrap();
            let u = make_null(ch.model(), &ch.event(&q), &[phi.cos(), phi.sin()]).unwrap();
            prop_assert!((u - ray.v()).amax() <= 1e-12);
        }
    }
}
