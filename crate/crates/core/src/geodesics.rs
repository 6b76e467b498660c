//! Geodesic spray, fixed-step integration with dense output, and the
//! reparametrization of null pregeodesics to affine parameter.

use std::sync::Arc;

use serde::Serialize;

use crate::defaults;
use crate::error::{DomainViolation, Error, Result};
use crate::numeric::{cumulative_integral, fornberg_first_derivative, hermite, stencil_window};
use crate::spacetime::SpacetimeModel;
use crate::Vector;

/// One sample of a curve in the tangent bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicNode {
    pub t: f64,
    pub x: Vector,
    pub v: Vector,
}

/// Why integration stopped on one side of the initial point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    IntervalEnd,
    DomainExit { t: f64 },
    ExclusionHit { t: f64, index: usize },
}

impl Termination {
    pub fn is_interval_end(&self) -> bool {
        matches!(self, Termination::IntervalEnd)
    }
}

/// A geodesic with dense output, the initial state sitting at `t = 0`.
#[derive(Clone, Debug)]
pub struct NullGeodesic {
    model: SpacetimeModel,
    nodes: Arc<Vec<GeodesicNode>>,
    origin: usize,
    requested: (f64, f64),
    forward: Termination,
    backward: Termination,
}

/// `(dx, dv) = (v, −Γ(v,v))`.
pub fn spray_rhs(model: &SpacetimeModel, x: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
    let gamma = model.christoffel(x)?;
    Ok((v.clone(), -gamma.contract(v, v)))
}

fn spray_unchecked(model: &SpacetimeModel, x: &Vector, v: &Vector) -> (Vector, Vector) {
    let gamma = model.christoffel_unchecked(x.as_slice());
    (v.clone(), -gamma.contract(v, v))
}

/// One classical Runge–Kutta step of the spray.
pub fn rk4_step(model: &SpacetimeModel, x: &Vector, v: &Vector, h: f64) -> (Vector, Vector) {
    let (k1x, k1v) = spray_unchecked(model, x, v);
    let (k2x, k2v) = spray_unchecked(model, &(x + &k1x * (0.5 * h)), &(v + &k1v * (0.5 * h)));
    let (k3x, k3v) = spray_unchecked(model, &(x + &k2x * (0.5 * h)), &(v + &k2v * (0.5 * h)));
    let (k4x, k4v) = spray_unchecked(model, &(x + &k3x * h), &(v + &k3v * h));
    let xn = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let vn = v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    (xn, vn)
}

/// Checks `v` is null and future directed at `p`.
pub fn check_future_null(model: &SpacetimeModel, p: &Vector, v: &Vector, tol: f64) -> Result<()> {
    let g = model.eval_metric(p)?;
    let norm = v.dot(&(&g * v));
    let bound = tol * v.norm_squared();
    if !(norm.abs() <= bound) {
        return Err(Error::NotNull {
            norm: norm.abs(),
            tolerance: bound,
        });
    }
    let t = model.time_field(p)?;
    let pairing = v.dot(&(&g * &t));
    if !(pairing < 0.0) {
        return Err(Error::NotFuture { pairing });
    }
    Ok(())
}

/// Integrates a future null geodesic from `(p, v)` at `t = 0` over `t_span`.
pub fn integrate_geodesic(
    model: &SpacetimeModel,
    p: &Vector,
    v: &Vector,
    t_span: (f64, f64),
    n_steps: usize,
) -> Result<NullGeodesic> {
    model.check_point(p.as_slice())?;
    if v.len() != model.dim() || v.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("velocity must be finite with one component per coordinate".into()));
    }
    check_future_null(model, p, v, defaults::TOL_NULL)?;
    integrate_spray(model, p, v, t_span, n_steps)
}

/// Same integrator without the null and future checks, for neighbouring
/// curves of a variation which need not be null.
pub fn integrate_spray(
    model: &SpacetimeModel,
    p: &Vector,
    v: &Vector,
    t_span: (f64, f64),
    n_steps: usize,
) -> Result<NullGeodesic> {
    model.check_point(p.as_slice())?;
    let (t0, t1) = t_span;
    if !(t0 <= 0.0 && 0.0 <= t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "parameter span [{t0}, {t1}] must contain the initial parameter 0"
        )));
    }
    let length = t1 - t0;
    if length > 0.0 && n_steps < 16 {
        return Err(Error::InvalidArgument(format!("n_steps = {n_steps} is below the minimum of 16")));
    }
    let (n_fwd, n_bwd) = if length == 0.0 {
        (0, 0)
    } else {
        let h = length / n_steps as f64;
        let mut nf = (t1 / h).round() as usize;
        if t1 > 0.0 {
            nf = nf.max(1);
        }
        let mut nb = n_steps.saturating_sub(nf);
        if t0 < 0.0 {
            nb = nb.max(1);
        } else {
            nb = 0;
        }
        if t1 == 0.0 {
            nf = 0;
        }
        (nf, nb)
    };
    let origin = GeodesicNode {
        t: 0.0,
        x: p.clone(),
        v: v.clone(),
    };
    let (fwd, forward) = march(model, &origin, t1, n_fwd);
    let (bwd, backward) = march(model, &origin, t0, n_bwd);
    let mut nodes = Vec::with_capacity(fwd.len() + bwd.len() + 1);
    nodes.extend(bwd.into_iter().rev());
    let origin_index = nodes.len();
    nodes.push(origin);
    nodes.extend(fwd);
    Ok(NullGeodesic {
        model: model.clone(),
        nodes: Arc::new(nodes),
        origin: origin_index,
        requested: t_span,
        forward,
        backward,
    })
}

fn march(
    model: &SpacetimeModel,
    origin: &GeodesicNode,
    t_end: f64,
    n: usize,
) -> (Vec<GeodesicNode>, Termination) {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return (out, Termination::IntervalEnd);
    }
    let eps = model.eps_excl();
    let mut x = origin.x.clone();
    let mut v = origin.v.clone();
    let mut t = 0.0;
    for s in 1..=n {
        let t_next = if s == n { t_end } else { t_end * s as f64 / n as f64 };
        let step = t_next - t;
        let (xn, vn) = rk4_step(model, &x, &v, step);
        for (index, e) in model.excluded_points().iter().enumerate() {
            let d = &xn - &x;
            let dd = d.norm_squared();
            let frac = if dd > 0.0 {
                ((e - &x).dot(&d) / dd).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let closest = &x + &d * frac;
            if (closest - e).norm() < eps {
                return (
                    out,
                    Termination::ExclusionHit {
                        t: t + frac * step,
                        index,
                    },
                );
            }
        }
        let valid = vn.iter().all(|c| c.is_finite())
            && match model.check_point(xn.as_slice()) {
                Ok(()) => true,
                Err(Error::OutOfDomain {
                    reason: DomainViolation::Excluded { .. },
                    ..
                }) => true,
                Err(_) => false,
            };
        if !valid {
            return (out, Termination::DomainExit { t });
        }
        x = xn;
        v = vn;
        t = t_next;
        out.push(GeodesicNode {
            t,
            x: x.clone(),
            v: v.clone(),
        });
    }
    (out, Termination::IntervalEnd)
}

impl NullGeodesic {
    /// Assembles a geodesic from precomputed nodes sorted by parameter.
    pub fn from_nodes(model: &SpacetimeModel, nodes: Vec<GeodesicNode>, origin: usize) -> Result<Self> {
        if nodes.is_empty() || origin >= nodes.len() {
            return Err(Error::InvalidArgument("empty node list or bad origin".into()));
        }
        if nodes.windows(2).any(|w| !(w[0].t < w[1].t)) {
            return Err(Error::InvalidArgument("node parameters must increase strictly".into()));
        }
        let requested = (nodes[0].t, nodes[nodes.len() - 1].t);
        Ok(Self {
            model: model.clone(),
            nodes: Arc::new(nodes),
            origin,
            requested,
            forward: Termination::IntervalEnd,
            backward: Termination::IntervalEnd,
        })
    }

    pub fn model(&self) -> &SpacetimeModel {
        &self.model
    }

    pub fn nodes(&self) -> &[GeodesicNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn origin_index(&self) -> usize {
        self.origin
    }

    pub fn initial(&self) -> &GeodesicNode {
        &self.nodes[self.origin]
    }

    pub fn first(&self) -> &GeodesicNode {
        &self.nodes[0]
    }

    pub fn last(&self) -> &GeodesicNode {
        &self.nodes[self.nodes.len() - 1]
    }

    /// Parameter range actually covered by the nodes.
    pub fn span(&self) -> (f64, f64) {
        (self.first().t, self.last().t)
    }

    pub fn requested_span(&self) -> (f64, f64) {
        self.requested
    }

    pub fn forward_termination(&self) -> Termination {
        self.forward
    }

    pub fn backward_termination(&self) -> Termination {
        self.backward
    }

    /// The first early stop, forward side first; `IntervalEnd` if none.
    pub fn termination(&self) -> Termination {
        if !self.forward.is_interval_end() {
            self.forward
        } else {
            self.backward
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    /// Index `i` with `t_i ≤ t ≤ t_{i+1}`.
    fn bracket(&self, t: f64) -> Result<usize> {
        let (a, b) = self.span();
        if !(a <= t && t <= b) {
            let reached = if t > b { b } else { a };
            return Err(Error::Truncated { reached, requested: t });
        }
        let i = self.nodes.partition_point(|n| n.t <= t);
        Ok(i.saturating_sub(1).min(self.nodes.len().saturating_sub(2)))
    }

    /// State at an arbitrary parameter: one Runge–Kutta substep from the
    /// nearest stored node, so accuracy matches the node values.
    pub fn state_at(&self, t: f64) -> Result<(Vector, Vector)> {
        if self.nodes.len() == 1 {
            if t == self.nodes[0].t {
                return Ok((self.nodes[0].x.clone(), self.nodes[0].v.clone()));
            }
            return Err(Error::Truncated {
                reached: self.nodes[0].t,
                requested: t,
            });
        }
        let i = self.bracket(t)?;
        let j = if (t - self.nodes[i].t).abs() <= (self.nodes[i + 1].t - t).abs() {
            i
        } else {
            i + 1
        };
        let n = &self.nodes[j];
        if n.t == t {
            return Ok((n.x.clone(), n.v.clone()));
        }
        Ok(rk4_step(&self.model, &n.x, &n.v, t - n.t))
    }

    /// Cubic Hermite interpolant of the position, with its derivative.
    pub fn position_hermite(&self, t: f64) -> Result<(Vector, Vector)> {
        if self.nodes.len() == 1 {
            return self.state_at(t);
        }
        let i = self.bracket(t)?;
        let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
        Ok(hermite(a.t, b.t, &a.x, &b.x, &a.v, &b.v, t))
    }

    /// `max_t |g(v,v)|` over the stored nodes.
    pub fn null_drift(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                let g = self.model.metric_unchecked(n.x.as_slice());
                n.v.dot(&(&g * &n.v)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Minimum over nodes of `-g(v, T)`; positive means future directed.
    pub fn min_future_pairing(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                let g = self.model.metric_unchecked(n.x.as_slice());
                let t = self.model.time_field_unchecked(n.x.as_slice());
                -n.v.dot(&(&g * &t))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Default number of steps for a span at the default resolution.
pub fn default_steps(t_span: (f64, f64)) -> usize {
    (((t_span.1 - t_span.0).abs() * defaults::STEPS_PER_UNIT as f64).ceil() as usize).max(16)
}

/// `exp_p(t w)`.
pub fn exp_map(model: &SpacetimeModel, p: &Vector, w: &Vector, t: f64) -> Result<Vector> {
    model.check_point(p.as_slice())?;
    check_future_null(model, p, w, defaults::TOL_NULL)?;
    if t == 0.0 {
        return Ok(p.clone());
    }
    let span = if t > 0.0 { (0.0, t) } else { (t, 0.0) };
    let geo = integrate_spray(model, p, w, span, default_steps(span))?;
    let (a, b) = geo.span();
    if t > b || t < a {
        return Err(Error::Truncated {
            reached: if t > 0.0 { b } else { a },
            requested: t,
        });
    }
    let node = if t > 0.0 { geo.last() } else { geo.first() };
    Ok(node.x.clone())
}

/// Future null vector `v` at `p` with `g(v,T) = −1` whose spatial part points
/// along `spatial_dir` (the components of coordinates 1..m).
pub fn make_null(model: &SpacetimeModel, p: &Vector, spatial_dir: &[f64]) -> Result<Vector> {
    let m = model.dim();
    if spatial_dir.len() != m - 1 {
        return Err(Error::InvalidArgument(format!(
            "spatial direction needs {} components",
            m - 1
        )));
    }
    let mut dir = Vector::zeros(m);
    for (i, c) in spatial_dir.iter().enumerate() {
        dir[i + 1] = *c;
    }
    make_null_from_vector(model, p, &dir)
}

/// As [`make_null`] with the direction given as a full tangent vector; its
/// component along `T` is discarded.
pub fn make_null_from_vector(model: &SpacetimeModel, p: &Vector, dir: &Vector) -> Result<Vector> {
    let g = model.eval_metric(p)?;
    let t = model.time_field(p)?;
    let tt = t.dot(&(&g * &t));
    let t_norm = (-tt).sqrt();
    let t_hat = &t / t_norm;
    let s = dir + &t_hat * dir.dot(&(&g * &t_hat));
    let ss = s.dot(&(&g * &s));
    if !(ss > 0.0) || !ss.is_finite() {
        return Err(Error::InvalidArgument("spatial direction is zero or not spacelike".into()));
    }
    let s_hat = s / ss.sqrt();
    Ok((t_hat + s_hat) / t_norm)
}

/// A curve with `D_t ẋ = f(t) ẋ`.
#[derive(Clone, Debug)]
pub struct Pregeodesic {
    /// Samples `(t, x, ẋ)` with strictly increasing `t`.
    pub samples: Vec<GeodesicNode>,
    /// Acceleration factor at each sample.
    pub f: Vec<f64>,
}

impl Pregeodesic {
    /// A geodesic of `e^{2σ̄}g_0` seen as a curve of `model` (`e^{2σ}g_0`
    /// with the same base): its factor is `f = −2 d(σ̄ − σ)(ẋ)`.
    pub fn from_conformal_geodesic(model: &SpacetimeModel, other: &NullGeodesic) -> Self {
        let samples = other.nodes().to_vec();
        let f = samples
            .iter()
            .map(|n| {
                let p = n.x.as_slice();
                let d = other.model().metric().sigma_gradient(p) - model.metric().sigma_gradient(p);
                -2.0 * d.dot(&n.v)
            })
            .collect();
        Self { samples, f }
    }
}

/// `max_k ‖dẋ/dt + Γ(ẋ,ẋ) − f ẋ‖` with five-point derivative stencils.
pub fn pregeodesic_residual(model: &SpacetimeModel, samples: &[GeodesicNode], f: Option<&[f64]>) -> Result<f64> {
    let n = samples.len();
    if n < 5 {
        return Err(Error::InvalidArgument("need at least 5 samples".into()));
    }
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        let w = stencil_window(i, n, 5);
        let weights = fornberg_first_derivative(t[i], &t[w.clone()]);
        let mut acc = Vector::zeros(model.dim());
        for (c, s) in weights.iter().zip(&samples[w]) {
            acc += &s.v * *c;
        }
        let gamma = model.christoffel_unchecked(samples[i].x.as_slice());
        acc += gamma.contract(&samples[i].v, &samples[i].v);
        if let Some(f) = f {
            acc -= &samples[i].v * f[i];
        }
        worst = worst.max(acc.norm());
    }
    Ok(worst)
}

/// Covariant acceleration of a sampled curve; zero for affinely
/// parametrized geodesics.
pub fn geodesic_residual(model: &SpacetimeModel, samples: &[GeodesicNode]) -> Result<f64> {
    pregeodesic_residual(model, samples, None)
}

/// Affine reparametrization of a null pregeodesic. Returns the values of
/// the new parameter `τ = h⁻¹(t) = ∫ exp(∫ f)` at the input samples and the
/// curve relabelled by `τ`, with velocities `ẋ e^{−∫f}`.
pub fn reparametrize_to_geodesic(model: &SpacetimeModel, pre: &Pregeodesic) -> Result<(Vec<f64>, NullGeodesic)> {
    let n = pre.samples.len();
    if n < 5 || pre.f.len() != n {
        return Err(Error::InvalidArgument("pregeodesic needs ≥ 5 samples and one factor per sample".into()));
    }
    for s in &pre.samples {
        let g = model.eval_metric(&s.x)?;
        let norm = s.v.dot(&(&g * &s.v)).abs();
        let bound = defaults::TOL_NULL_DRIFT * s.v.norm_squared();
        if norm > bound {
            return Err(Error::NotNull { norm, tolerance: bound });
        }
    }
    let residual = pregeodesic_residual(model, &pre.samples, Some(&pre.f))?;
    if residual > defaults::TOL_PRE {
        return Err(Error::NotPregeodesic {
            residual,
            tolerance: defaults::TOL_PRE,
        });
    }
    let t: Vec<f64> = pre.samples.iter().map(|s| s.t).collect();
    let origin = t.iter().position(|x| *x == 0.0).unwrap_or(0);
    let inner = cumulative_integral(&t, &pre.f);
    let inner: Vec<f64> = inner.iter().map(|v| v - inner[origin]).collect();
    let speed: Vec<f64> = inner.iter().map(|v| v.exp()).collect();
    let outer = cumulative_integral(&t, &speed);
    let tau: Vec<f64> = outer.iter().map(|v| v - outer[origin]).collect();
    let nodes = pre
        .samples
        .iter()
        .zip(tau.iter().zip(&inner))
        .map(|(s, (tau, f))| GeodesicNode {
            t: *tau,
            x: s.x.clone(),
            v: &s.v * (-f).exp(),
        })
        .collect();
    let geo = NullGeodesic::from_nodes(model, nodes, origin)?;
    Ok((tau, geo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::spacetime::{conformal_flat, minkowski, punctured_minkowski2};
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_row_slice(c)
    }

    fn curved() -> SpacetimeModel {
        conformal_flat(3, Expr::parse("0.2*sin(x1) + 0.1*x2").unwrap()).unwrap()
    }

    #[test]
    fn flat_spray_is_free() {
        let m = minkowski(3).unwrap();
        let (dx, dv) = spray_rhs(&m, &v(&[0.1, 0.2, 0.3]), &v(&[1.0, 0.6, 0.8])).unwrap();
        assert_eq!(dx, v(&[1.0, 0.6, 0.8]));
        assert_eq!(dv.norm(), 0.0);
    }

    #[test]
    fn minkowski_straight_line() {
        let m = minkowski(3).unwrap();
        let geo = integrate_geodesic(&m, &v(&[0.0, 0.0, 0.0]), &v(&[1.0, 1.0, 0.0]), (0.0, 1.0), 800).unwrap();
        assert_eq!(geo.termination(), Termination::IntervalEnd);
        for n in geo.nodes() {
            assert!((&n.x - v(&[n.t, n.t, 0.0])).amax() <= 1e-12);
        }
        assert!((&geo.last().x - v(&[1.0, 1.0, 0.0])).amax() <= 1e-12);
    }

    #[test]
    fn punctured_example() {
        let m = punctured_minkowski2().unwrap();
        let miss = integrate_geodesic(&m, &v(&[0.0, 1e-3]), &v(&[1.0, 1.0]), (0.0, 2.0), 1600).unwrap();
        assert_eq!(miss.termination(), Termination::IntervalEnd);
        let hit = integrate_geodesic(&m, &v(&[0.0, 0.0]), &v(&[1.0, 1.0]), (0.0, 2.0), 1600).unwrap();
        match hit.termination() {
            Termination::ExclusionHit { t, index } => {
                assert_eq!(index, 0);
                assert!((t - 1.0).abs() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(hit.last().t < 1.0);
    }

    #[test]
    fn domain_exit_is_recorded() {
        let m = minkowski(2).unwrap();
        let geo = integrate_geodesic(&m, &v(&[0.0, 4.0]), &v(&[1.0, 1.0]), (0.0, 2.0), 200).unwrap();
        match geo.termination() {
            Termination::DomainExit { t } => assert!((t - 1.0).abs() < 0.011),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_initial_data() {
        let m = minkowski(3).unwrap();
        let o = v(&[0.0, 0.0, 0.0]);
        assert!(matches!(
            integrate_geodesic(&m, &o, &v(&[1.0, 0.5, 0.0]), (0.0, 1.0), 100),
            Err(Error::NotNull { .. })
        ));
        assert!(matches!(
            integrate_geodesic(&m, &o, &v(&[-1.0, 1.0, 0.0]), (0.0, 1.0), 100),
            Err(Error::NotFuture { .. })
        ));
        assert!(matches!(
            integrate_geodesic(&m, &v(&[9.0, 0.0, 0.0]), &v(&[1.0, 1.0, 0.0]), (0.0, 1.0), 100),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(integrate_geodesic(&m, &o, &v(&[1.0, 1.0, 0.0]), (0.0, 1.0), 8).is_err());
    }

    #[test]
    fn degenerate_span_gives_single_node() {
        let m = minkowski(3).unwrap();
        let geo = integrate_geodesic(&m, &v(&[0.0, 0.0, 0.0]), &v(&[1.0, 1.0, 0.0]), (0.0, 0.0), 0).unwrap();
        assert_eq!(geo.len(), 1);
    }

    #[test]
    fn exp_map_examples() {
        let m = minkowski(3).unwrap();
        let p = v(&[0.1, -0.2, 0.3]);
        let w = v(&[1.0, 0.6, -0.8]);
        assert!((exp_map(&m, &p, &w, 1.7).unwrap() - (&p + &w * 1.7)).amax() <= 1e-12);
        let c = curved();
        assert_eq!(exp_map(&c, &p, &w, 0.0).unwrap(), p);
    }

    #[test]
    fn curved_self_convergence_is_fourth_order() {
        let c = curved();
        let p = v(&[0.0, 0.2, -0.1]);
        let u = make_null(&c, &p, &[0.6, 0.8]).unwrap();
        let end = |n| integrate_geodesic(&c, &p, &u, (0.0, 2.0), n).unwrap().last().x.clone();
        let (a, b, d) = (end(200), end(400), end(800));
        let order = ((&a - &b).norm() / (&b - &d).norm()).log2();
        assert!(order >= 3.9, "order {order}");
    }

    #[test]
    fn make_null_examples() {
        let m = minkowski(3).unwrap();
        let o = v(&[0.0, 0.0, 0.0]);
        assert!((make_null(&m, &o, &[1.0, 0.0]).unwrap() - v(&[1.0, 1.0, 0.0])).amax() < 1e-15);
        assert!((make_null(&m, &o, &[0.0, 1.0]).unwrap() - v(&[1.0, 0.0, 1.0])).amax() < 1e-15);
        assert!(make_null(&m, &o, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn state_at_matches_nodes_and_interpolates() {
        let c = curved();
        let p = v(&[0.0, 0.2, -0.1]);
        let u = make_null(&c, &p, &[0.6, 0.8]).unwrap();
        let geo = integrate_geodesic(&c, &p, &u, (-0.5, 1.0), 1200).unwrap();
        let n = &geo.nodes()[37];
        assert_eq!(geo.state_at(n.t).unwrap().0, n.x);
        let fine = integrate_geodesic(&c, &p, &u, (-0.5, 1.0), 2400).unwrap();
        let mid = 0.5 * (geo.nodes()[37].t + geo.nodes()[38].t);
        let (x, _) = geo.state_at(mid).unwrap();
        let (y, _) = fine.state_at(mid).unwrap();
        assert!((x - y).amax() < 1e-11);
        assert!(geo.state_at(1.5).is_err());
    }

    #[test]
    fn reparametrize_identity_when_factor_vanishes() {
        let m = minkowski(3).unwrap();
        let w = v(&[1.0, 0.0, 1.0]);
        let samples: Vec<GeodesicNode> = (0..=50)
            .map(|i| {
                let t = i as f64 / 50.0;
                GeodesicNode { t, x: &w * t, v: w.clone() }
            })
            .collect();
        let pre = Pregeodesic { samples: samples.clone(), f: vec![0.0; 51] };
        let (tau, geo) = reparametrize_to_geodesic(&m, &pre).unwrap();
        for (a, s) in tau.iter().zip(&samples) {
            assert!((a - s.t).abs() < 1e-14);
        }
        assert_eq!(geo.nodes()[10].v, w);
    }

    #[test]
    fn reparametrize_rejects_non_pregeodesic() {
        let m = minkowski(3).unwrap();
        let w = v(&[1.0, 0.0, 1.0]);
        let samples: Vec<GeodesicNode> = (0..=50)
            .map(|i| {
                let t = i as f64 / 50.0;
                GeodesicNode { t, x: &w * (t.exp() - 1.0), v: &w * t.exp() }
            })
            .collect();
        let pre = Pregeodesic { samples, f: vec![0.0; 51] };
        assert!(matches!(reparametrize_to_geodesic(&m, &pre), Err(Error::NotPregeodesic { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn affine_rescale_matches_node_for_node(
            phi in 0.0f64..std::f64::consts::TAU,
            y in -0.5f64..0.5,
            lambda in prop_oneof![Just(0.5f64), Just(2.0f64)],
        ) {
            let c = curved();
            let p = v(&[0.0, y, 0.1]);
            let u = make_null(&c, &p, &[phi.cos(), phi.sin()]).unwrap();
            let a = integrate_geodesic(&c, &p, &(&u * lambda), (0.0, 1.0), 400).unwrap();
            let b = integrate_geodesic(&c, &p, &u, (0.0, lambda), 400).unwrap();
            for (na, nb) in a.nodes().iter().zip(b.nodes()) {
                prop_assert!((&na.x - &nb.x).amax() <= 1e-9);
                prop_assert!((&na.v - &nb.v * lambda).amax() <= 1e-9);
            }
        }

        #[test]
        fn null_drift_stays_small(
            phi in 0.0f64..std::f64::consts::TAU,
            x0 in -0.5f64..0.5,
        ) {
            let c = curved();
            let p = v(&[x0, 0.3, -0.2]);
            let u = make_null(&c, &p, &[phi.cos(), phi.sin()]).unwrap();
            let geo = integrate_geodesic(&c, &p, &u, (-1.0, 1.0), 1600).unwrap();
            prop_assert!(geo.null_drift() <= 1e-8 * u.norm_squared());
            prop_assert!(geo.min_future_pairing() > 0.0);
        }

        #[test]
        fn make_null_is_normalized(
            p in proptest::collection::vec(-2.0f64..2.0, 4),
            d in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            prop_assume!(d.iter().map(|c| c * c).sum::<f64>() > 1e-4);
            let c = conformal_flat(4, Expr::parse("0.3*sin(x1) + 0.2*x3*x0").unwrap()).unwrap();
            let p = Vector::from_vec(p);
            let u = make_null(&c, &p, &d).unwrap();
            let t = c.time_field(&p).unwrap();
            prop_assert!(c.inner(&p, &u, &u).unwrap().abs() <= 1e-10);
            prop_assert!((c.inner(&p, &u, &t).unwrap() + 1.0).abs() <= 1e-10);
        }
    }
}
