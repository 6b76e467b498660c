//! Jacobi fields along null geodesics and their classes modulo the
//! reparametrization fields `(a + bt)γ′`.

use crate::defaults;
use crate::error::{Error, Result};
use crate::geodesics::{integrate_spray, NullGeodesic};
use crate::numeric::{fornberg_first_derivative, hermite, stencil_window};
use crate::spacetime::{Christoffel, SpacetimeModel};
use crate::{Matrix, Vector};

/// Initial value `J(0)` and covariant derivative `DJ/dt(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiInit {
    pub j0: Vector,
    pub j0dot: Vector,
}

impl JacobiInit {
    pub fn new(j0: Vector, j0dot: Vector) -> Self {
        Self { j0, j0dot }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            j0: Vector::zeros(m),
            j0dot: Vector::zeros(m),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &JacobiInit, b: f64) -> JacobiInit {
        JacobiInit {
            j0: &self.j0 * a + &other.j0 * b,
            j0dot: &self.j0dot * a + &other.j0dot * b,
        }
    }

    /// Adds the reparametrization field `(a + bt)v`.
    pub fn shifted(&self, v: &Vector, a: f64, b: f64) -> JacobiInit {
        JacobiInit {
            j0: &self.j0 + v * a,
            j0dot: &self.j0dot + v * b,
        }
    }
}

/// A node of a propagated field.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiSample {
    pub t: f64,
    /// `J(t)`.
    pub j: Vector,
    /// Covariant derivative `DJ/dt`.
    pub p: Vector,
    /// Coordinate derivative `dJ/dt`.
    pub jdot: Vector,
    /// Coordinate derivative of `DJ/dt`.
    pub pdot: Vector,
}

/// A Jacobi field sampled on the nodes of its geodesic.
#[derive(Clone, Debug)]
pub struct JacobiField {
    geodesic: NullGeodesic,
    samples: Vec<JacobiSample>,
}

/// Coefficients of the Jacobi system along one geodesic, evaluated once at
/// the nodes and interval midpoints so any number of fields can be
/// propagated with identical discretization.
#[derive(Clone, Debug)]
pub struct JacobiPropagator {
    geodesic: NullGeodesic,
    /// `(A, B)` at each node: `A w = Γ(v, w)`, `B w = R(w, v)v`.
    nodes: Vec<(Matrix, Matrix)>,
    /// The same at the midpoint of each interval `[i, i+1]`.
    mids: Vec<(Matrix, Matrix)>,
}

impl JacobiPropagator {
    pub fn new(geodesic: &NullGeodesic) -> Result<Self> {
        Self::with_model(geodesic, geodesic.model())
    }

    /// Coefficients from `model` along the base curve of `geodesic`. With a
    /// different model this propagates with a foreign connection, which is
    /// how mutation controls plant a wrong connection.
    pub fn with_model(geodesic: &NullGeodesic, model: &SpacetimeModel) -> Result<Self> {
        if model.dim() != geodesic.model().dim() {
            return Err(Error::GridMismatch("model and geodesic dimensions differ".into()));
        }
        let nodes = geodesic.nodes();
        let coeffs = |x: &[f64], v: &Vector| -> (Matrix, Matrix) {
            let gamma = model.christoffel_unchecked(x);
            (gamma.along(v), model.riemann_matrix_unchecked(x, v))
        };
        let accel: Vec<Vector> = nodes
            .iter()
            .map(|n| -model.christoffel_unchecked(n.x.as_slice()).contract(&n.v, &n.v))
            .collect();
        let node_coeffs = nodes.iter().map(|n| coeffs(n.x.as_slice(), &n.v)).collect();
        let mids = nodes
            .windows(2)
            .zip(accel.windows(2))
            .map(|(w, a)| {
                let tm = 0.5 * (w[0].t + w[1].t);
                let (x, _) = hermite(w[0].t, w[1].t, &w[0].x, &w[1].x, &w[0].v, &w[1].v, tm);
                let (v, _) = hermite(w[0].t, w[1].t, &w[0].v, &w[1].v, &a[0], &a[1], tm);
                coeffs(x.as_slice(), &v)
            })
            .collect();
        Ok(Self {
            geodesic: geodesic.clone(),
            nodes: node_coeffs,
            mids,
        })
    }

    pub fn geodesic(&self) -> &NullGeodesic {
        &self.geodesic
    }

    fn rhs(c: &(Matrix, Matrix), j: &Vector, p: &Vector) -> (Vector, Vector) {
        let (a, b) = c;
        (p - a * j, -(b * j) - a * p)
    }

    /// Solves `J′ = P − A J`, `P′ = −B J − A P` with classical RK4 on the
    /// geodesic nodes, where `P = DJ/dt`.
    pub fn propagate(&self, init: &JacobiInit) -> Result<JacobiField> {
        let m = self.geodesic.model().dim();
        if init.j0.len() != m || init.j0dot.len() != m {
            return Err(Error::GridMismatch(format!(
                "initial data must have {m} components"
            )));
        }
        if init.j0.iter().chain(init.j0dot.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("initial data must be finite".into()));
        }
        let nodes = self.geodesic.nodes();
        let n = nodes.len();
        let o = self.geodesic.origin_index();
        let mut js = vec![Vector::zeros(m); n];
        let mut ps = vec![Vector::zeros(m); n];
        js[o] = init.j0.clone();
        ps[o] = init.j0dot.clone();
        for i in o..n - 1 {
            let (j, p) = self.step(i, i + 1, &js[i], &ps[i]);
            js[i + 1] = j;
            ps[i + 1] = p;
        }
        for i in (1..=o).rev() {
            let (j, p) = self.step(i, i - 1, &js[i], &ps[i]);
            js[i - 1] = j;
            ps[i - 1] = p;
        }
        let samples = (0..n)
            .map(|i| {
                let (jdot, pdot) = Self::rhs(&self.nodes[i], &js[i], &ps[i]);
                JacobiSample {
                    t: nodes[i].t,
                    j: js[i].clone(),
                    p: ps[i].clone(),
                    jdot,
                    pdot,
                }
            })
            .collect();
        Ok(JacobiField {
            geodesic: self.geodesic.clone(),
            samples,
        })
    }

    fn step(&self, from: usize, to: usize, j: &Vector, p: &Vector) -> (Vector, Vector) {
        let nodes = self.geodesic.nodes();
        let h = nodes[to].t - nodes[from].t;
        let mid = &self.mids[from.min(to)];
        let (k1j, k1p) = Self::rhs(&self.nodes[from], j, p);
        let (k2j, k2p) = Self::rhs(mid, &(j + &k1j * (0.5 * h)), &(p + &k1p * (0.5 * h)));
        let (k3j, k3p) = Self::rhs(mid, &(j + &k2j * (0.5 * h)), &(p + &k2p * (0.5 * h)));
        let (k4j, k4p) = Self::rhs(&self.nodes[to], &(j + &k3j * h), &(p + &k3p * h));
        (
            j + (k1j + k2j * 2.0 + k3j * 2.0 + k4j) * (h / 6.0),
            p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0),
        )
    }
}

/// Propagates a Jacobi field along `geodesic`.
pub fn integrate_jacobi(geodesic: &NullGeodesic, init: &JacobiInit) -> Result<JacobiField> {
    JacobiPropagator::new(geodesic)?.propagate(init)
}

/// Propagates along `geodesic` using the connection of `model`.
pub fn integrate_jacobi_in(model: &SpacetimeModel, geodesic: &NullGeodesic, init: &JacobiInit) -> Result<JacobiField> {
    JacobiPropagator::with_model(geodesic, model)?.propagate(init)
}

impl JacobiField {
    pub fn geodesic(&self) -> &NullGeodesic {
        &self.geodesic
    }

    pub fn samples(&self) -> &[JacobiSample] {
        &self.samples
    }

    pub fn initial(&self) -> &JacobiSample {
        &self.samples[self.geodesic.origin_index()]
    }

    /// `(J(t), DJ/dt(t))` by Hermite interpolation between nodes.
    pub fn at(&self, t: f64) -> Result<(Vector, Vector)> {
        let s = &self.samples;
        let (a, b) = (s[0].t, s[s.len() - 1].t);
        if !(a <= t && t <= b) {
            return Err(Error::Truncated {
                reached: if t > b { b } else { a },
                requested: t,
            });
        }
        if s.len() == 1 {
            return Ok((s[0].j.clone(), s[0].p.clone()));
        }
        let i = s.partition_point(|x| x.t <= t).saturating_sub(1).min(s.len() - 2);
        let (l, r) = (&s[i], &s[i + 1]);
        let (j, _) = hermite(l.t, r.t, &l.j, &r.j, &l.jdot, &r.jdot, t);
        let (p, _) = hermite(l.t, r.t, &l.p, &r.p, &l.pdot, &r.pdot, t);
        Ok((j, p))
    }

    /// `(t, g(J(t), γ′(t)))` at every node.
    pub fn pairing_series(&self) -> Vec<(f64, f64)> {
        let model = self.geodesic.model();
        self.samples
            .iter()
            .zip(self.geodesic.nodes())
            .map(|(s, n)| {
                let g = model.metric_unchecked(n.x.as_slice());
                (s.t, s.j.dot(&(&g * &n.v)))
            })
            .collect()
    }

    /// Largest residual `‖dP/dt + A P + B J‖` over interior nodes, with `dP/dt`
    /// from five-point differences of the stored samples.
    pub fn ode_residual(&self) -> f64 {
        let model = self.geodesic.model();
        let n = self.samples.len();
        if n < 5 {
            return 0.0;
        }
        let t: Vec<f64> = self.samples.iter().map(|s| s.t).collect();
        let mut worst = 0.0f64;
        for i in 2..n - 2 {
            let w = stencil_window(i, n, 5);
            let weights = fornberg_first_derivative(t[i], &t[w.clone()]);
            let mut dp = Vector::zeros(model.dim());
            for (c, s) in weights.iter().zip(&self.samples[w]) {
                dp += &s.p * *c;
            }
            let node = &self.geodesic.nodes()[i];
            let gamma = model.christoffel_unchecked(node.x.as_slice());
            let b = model.riemann_matrix_unchecked(node.x.as_slice(), &node.v);
            let s = &self.samples[i];
            let r = dp + gamma.along(&node.v) * &s.p + b * &s.j;
            worst = worst.max(r.norm());
        }
        worst
    }

    /// Class of the field at node `i`, after renormalizing the velocity there
    /// to `g(v,T) = −1`.
    pub fn class_at(&self, i: usize) -> Result<JacobiClass> {
        let n = &self.geodesic.nodes()[i];
        let s = &self.samples[i];
        reduce_state(self.geodesic.model(), &n.x, &n.v, &s.j, &s.p)
    }
}

/// Least-squares line through `g(J, γ′)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairingFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

/// Fits `g(J(t), γ′(t)) ≈ a + bt`.
pub fn affine_pairing_fit(field: &JacobiField) -> Result<PairingFit> {
    let series = field.pairing_series();
    if series.len() < 8 {
        return Err(Error::InvalidArgument("pairing fit needs at least 8 samples".into()));
    }
    let n = series.len() as f64;
    let tm = series.iter().map(|s| s.0).sum::<f64>() / n;
    let ym = series.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = series.iter().map(|s| (s.0 - tm).powi(2)).sum();
    let sxy: f64 = series.iter().map(|s| (s.0 - tm) * (s.1 - ym)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = ym - b * tm;
    let residual = series
        .iter()
        .map(|s| (s.1 - a - b * s.0).abs())
        .fold(0.0, f64::max);
    Ok(PairingFit { a, b, residual })
}

/// Scale-aware membership tolerance for light-ray fields.
pub fn lightray_tolerance(a: f64) -> f64 {
    1e-6 * (1.0 + a.abs())
}

/// `|b| ≤ tol`, inclusive.
pub fn is_lightray_fit(fit: &PairingFit, tol: f64) -> bool {
    fit.b.abs() <= tol
}

pub fn is_lightray_jacobi(field: &JacobiField, tol: f64) -> Result<bool> {
    Ok(is_lightray_fit(&affine_pairing_fit(field)?, tol))
}

/// Canonical representative of a class of light-ray Jacobi fields: initial
/// data `g`-orthogonal to `T`, on a velocity with `g(v,T) = −1`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiClass {
    pub x: Vector,
    pub v: Vector,
    pub w0: Vector,
    pub w0dot: Vector,
}

impl JacobiClass {
    /// Builds a class from representatives already orthogonal to `T`.
    pub fn from_parts(x: Vector, v: Vector, w0: Vector, w0dot: Vector) -> Self {
        Self { x, v, w0, w0dot }
    }

    pub fn zero_at(x: &Vector, v: &Vector) -> Self {
        let m = x.len();
        Self::from_parts(x.clone(), v.clone(), Vector::zeros(m), Vector::zeros(m))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_parts(self.x.clone(), self.v.clone(), &self.w0 * a, &self.w0dot * a)
    }

    pub fn add(&self, other: &JacobiClass) -> Result<Self> {
        same_base(self, other)?;
        Ok(Self::from_parts(
            self.x.clone(),
            self.v.clone(),
            &self.w0 + &other.w0,
            &self.w0dot + &other.w0dot,
        ))
    }

    /// The same tangent vector with `DJ/dt` taken in the connection of `to`
    /// instead of `from`; representatives are re-reduced in `to`.
    pub fn change_connection(&self, from: &SpacetimeModel, to: &SpacetimeModel) -> Result<Self> {
        let diff = connection_difference(from, to, &self.x)?;
        let p = &self.w0dot + diff.contract(&self.v, &self.w0);
        reduce_state(to, &self.x, &self.v, &self.w0, &p)
    }

    /// Stacked `(w0, w0dot)` as one vector of length `2m`.
    pub fn stacked(&self) -> Vector {
        let m = self.w0.len();
        Vector::from_fn(2 * m, |i, _| if i < m { self.w0[i] } else { self.w0dot[i - m] })
    }
}

/// `Γ_from − Γ_to` at `x`.
pub fn connection_difference(from: &SpacetimeModel, to: &SpacetimeModel, x: &Vector) -> Result<Christoffel> {
    Ok(from.christoffel(x)?.difference(&to.christoffel(x)?))
}

fn same_base(a: &JacobiClass, b: &JacobiClass) -> Result<()> {
    let tol = 1e-8;
    if a.x.len() != b.x.len()
        || (&a.x - &b.x).amax() > tol
        || (&a.v - &b.v).amax() > tol * (1.0 + a.v.amax())
    {
        return Err(Error::BaseMismatch);
    }
    Ok(())
}

/// Reduces `(J, DJ/dt)` at a point of a geodesic with velocity `v`: the
/// velocity is first renormalized to `g(v,T) = −1` (which rescales `DJ/dt`
/// by the same factor), then both vectors are projected along `v` onto
/// `{T}^⊥`.
pub fn reduce_state(model: &SpacetimeModel, x: &Vector, v: &Vector, j: &Vector, p: &Vector) -> Result<JacobiClass> {
    let g = model.eval_metric(x)?;
    let t = model.time_field(x)?;
    let gvt = v.dot(&(&g * &t));
    if !(gvt < 0.0) {
        return Err(Error::NotFuture { pairing: gvt });
    }
    let a = -1.0 / gvt;
    let vn = v * a;
    let gt = &g * &t;
    let pn = p * a;
    let w0 = j + &vn * j.dot(&gt);
    let w0dot = &pn + &vn * pn.dot(&gt);
    Ok(JacobiClass::from_parts(x.clone(), vn, w0, w0dot))
}

/// Canonical representative of the class of the light-ray field with
/// initial data `init` on a geodesic normalized by `g(v,T) = −1` at `t = 0`.
pub fn mod_gamma_reduce(geodesic: &NullGeodesic, init: &JacobiInit) -> Result<JacobiClass> {
    let node = geodesic.initial();
    reduce_at(geodesic.model(), &node.x, &node.v, init)
}

/// As [`mod_gamma_reduce`] from the base point and velocity directly.
pub fn reduce_at(model: &SpacetimeModel, x: &Vector, v: &Vector, init: &JacobiInit) -> Result<JacobiClass> {
    let g = model.eval_metric(x)?;
    let t = model.time_field(x)?;
    let residual = v.dot(&(&g * &t)) + 1.0;
    if residual.abs() > defaults::TOL_NORMALIZED {
        return Err(Error::NotNormalized { residual });
    }
    let a = init.j0.dot(&(&g * v));
    let b = init.j0dot.dot(&(&g * v));
    let tol = lightray_tolerance(a);
    if b.abs() > tol {
        return Err(Error::NotLightRayField { slope: b, tolerance: tol });
    }
    let gt = &g * &t;
    let w0 = &init.j0 + v * init.j0.dot(&gt);
    let w0dot = &init.j0dot + v * init.j0dot.dot(&gt);
    Ok(JacobiClass::from_parts(x.clone(), v.clone(), w0, w0dot))
}

/// Largest Euclidean distance between the canonical pairs.
pub fn class_distance(c1: &JacobiClass, c2: &JacobiClass) -> Result<f64> {
    same_base(c1, c2)?;
    Ok((&c1.w0 - &c2.w0).norm().max((&c1.w0dot - &c2.w0dot).norm()))
}

/// A one-parameter family of initial data `s ↦ (λ(s), W(s))`.
pub struct GeodesicVariation {
    pub base: Box<dyn Fn(f64) -> Vector + Send + Sync>,
    pub field: Box<dyn Fn(f64) -> Vector + Send + Sync>,
}

impl GeodesicVariation {
    pub fn new(
        base: impl Fn(f64) -> Vector + Send + Sync + 'static,
        field: impl Fn(f64) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            base: Box::new(base),
            field: Box::new(field),
        }
    }

    /// `(λ′(0), W′(0))` by a five-point difference with step `1e-3`.
    pub fn derivatives(&self) -> (Vector, Vector) {
        let d = |f: &dyn Fn(f64) -> Vector| {
            let h = 1e-3;
            (f(-2.0 * h) - f(-h) * 8.0 + f(h) * 8.0 - f(2.0 * h)) / (12.0 * h)
        };
        (d(&*self.base), d(&*self.field))
    }

    /// `J(0) = λ′(0)` and `DJ/dt(0) = DW/ds(0) = W′(0) + Γ(λ′(0), W(0))`.
    pub fn initial_data(&self, model: &SpacetimeModel) -> Result<JacobiInit> {
        let (dl, dw) = self.derivatives();
        let x = (self.base)(0.0);
        let w = (self.field)(0.0);
        let gamma = model.christoffel(&x)?;
        Ok(JacobiInit::new(dl.clone(), dw + gamma.contract(&dl, &w)))
    }
}

/// Output of the finite-difference variation oracle.
#[derive(Clone, Debug)]
pub struct VariationOracle {
    pub t: Vec<f64>,
    pub j: Vec<Vector>,
    pub init: JacobiInit,
    /// Geodesic of the central curve `s = 0`.
    pub central: NullGeodesic,
}

/// `J(t) ≈ [x(ds,t) − x(−ds,t)]/(2ds)` for `x(s,t) = exp_{λ(s)}(t W(s))`.
pub fn variation_jacobi_oracle(
    model: &SpacetimeModel,
    family: &GeodesicVariation,
    t_span: (f64, f64),
    n_steps: usize,
    ds: f64,
) -> Result<VariationOracle> {
    let run = |s: f64| integrate_spray(model, &(family.base)(s), &(family.field)(s), t_span, n_steps);
    let plus = run(ds)?;
    let minus = run(-ds)?;
    let central = run(0.0)?;
    if plus.len() != minus.len() || plus.origin_index() != minus.origin_index() || plus.len() != central.len() {
        return Err(Error::GridMismatch(format!(
            "neighbouring geodesics stopped at different nodes ({} vs {})",
            plus.len(),
            minus.len()
        )));
    }
    let t = central.times();
    let j = plus
        .nodes()
        .iter()
        .zip(minus.nodes())
        .map(|(a, b)| (&a.x - &b.x) / (2.0 * ds))
        .collect();
    Ok(VariationOracle {
        t,
        j,
        init: family.initial_data(model)?,
        central,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geodesics::{integrate_geodesic, make_null};
    use crate::spacetime::{conformal_flat, minkowski};
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_row_slice(c)
    }

    fn flat_geo() -> NullGeodesic {
        let m = minkowski(3).unwrap();
        integrate_geodesic(&m, &v(&[0.0, 0.0, 0.0]), &v(&[1.0, 1.0, 0.0]), (0.0, 1.0), 100).unwrap()
    }

    fn curved() -> SpacetimeModel {
        conformal_flat(3, Expr::parse("0.2*sin(x1) + 0.15*sin(x2*x0)").unwrap()).unwrap()
    }

    fn curved_geo(phi: f64) -> NullGeodesic {
        let c = curved();
        let p = v(&[0.0, 0.1, -0.2]);
        let u = make_null(&c, &p, &[phi.cos(), phi.sin()]).unwrap();
        integrate_geodesic(&c, &p, &u, (-0.5, 1.0), 600).unwrap()
    }

    #[test]
    fn flat_field_is_linear_in_t() {
        let geo = flat_geo();
        let f = integrate_jacobi(&geo, &JacobiInit::new(v(&[0.0, 0.0, 1.0]), v(&[0.0, 0.0, 2.0]))).unwrap();
        for s in f.samples() {
            assert!((&s.j - v(&[0.0, 0.0, 1.0 + 2.0 * s.t])).amax() <= 1e-12);
        }
        let zero = integrate_jacobi(&geo, &JacobiInit::zeros(3)).unwrap();
        assert!(zero.samples().iter().all(|s| s.j.amax() == 0.0 && s.p.amax() == 0.0));
    }

    #[test]
    fn pairing_fit_examples() {
        let geo = flat_geo();
        let f = integrate_jacobi(&geo, &JacobiInit::new(v(&[0.0, 0.0, 1.0]), v(&[0.0, 0.0, 2.0]))).unwrap();
        let fit = affine_pairing_fit(&f).unwrap();
        assert!(fit.a.abs() <= 1e-12 && fit.b.abs() <= 1e-12 && fit.residual <= 1e-12);
        assert!(is_lightray_jacobi(&f, 1e-6).unwrap());
        let f = integrate_jacobi(&geo, &JacobiInit::new(v(&[1.0, 0.0, 0.0]), Vector::zeros(3))).unwrap();
        let fit = affine_pairing_fit(&f).unwrap();
        assert!((fit.a + 1.0).abs() <= 1e-12 && fit.b.abs() <= 1e-12);
        let f = integrate_jacobi(&geo, &JacobiInit::new(Vector::zeros(3), v(&[1.0, 0.0, 0.0]))).unwrap();
        let fit = affine_pairing_fit(&f).unwrap();
        assert!((fit.b + 1.0).abs() <= 1e-12);
        assert!(!is_lightray_jacobi(&f, 1e-6).unwrap());
    }

    #[test]
    fn lightray_boundary_is_inclusive() {
        let fit = PairingFit { a: 0.0, b: 1e-6, residual: 0.0 };
        assert!(is_lightray_fit(&fit, 1e-6));
        let fit = PairingFit { a: 0.0, b: -1e-6, residual: 0.0 };
        assert!(is_lightray_fit(&fit, 1e-6));
        assert!(!is_lightray_fit(&PairingFit { a: 0.0, b: 1.0000001e-6, residual: 0.0 }, 1e-6));
    }

    #[test]
    fn reduction_examples() {
        let geo = flat_geo();
        let c = mod_gamma_reduce(&geo, &JacobiInit::new(v(&[1.0, 1.0, 0.0]), Vector::zeros(3))).unwrap();
        assert_eq!(c.w0.amax(), 0.0);
        assert_eq!(c.w0dot.amax(), 0.0);
        let c = mod_gamma_reduce(&geo, &JacobiInit::new(v(&[1.0, 2.0, 3.0]), Vector::zeros(3))).unwrap();
        assert_eq!(c.w0, v(&[0.0, 1.0, 3.0]));
        assert!(matches!(
            mod_gamma_reduce(&geo, &JacobiInit::new(Vector::zeros(3), v(&[1.0, 0.0, 0.0]))),
            Err(Error::NotLightRayField { .. })
        ));
        let m = minkowski(3).unwrap();
        let g2 = integrate_geodesic(&m, &Vector::zeros(3), &v(&[2.0, 2.0, 0.0]), (0.0, 1.0), 100).unwrap();
        assert!(matches!(
            mod_gamma_reduce(&g2, &JacobiInit::zeros(3)),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn reduction_ignores_reparametrization_fields() {
        let geo = flat_geo();
        let vel = geo.initial().v.clone();
        let init = JacobiInit::new(v(&[0.3, 2.0, -1.0]), v(&[0.5, 0.5, 4.0]));
        let base = mod_gamma_reduce(&geo, &init).unwrap();
        for a in [-1.0, 2.5] {
            for b in [-1.0, 2.5] {
                let c = mod_gamma_reduce(&geo, &init.shifted(&vel, a, b)).unwrap();
                assert!(class_distance(&base, &c).unwrap() <= 1e-14);
            }
        }
    }

    #[test]
    fn class_distance_properties() {
        let geo = flat_geo();
        let a = mod_gamma_reduce(&geo, &JacobiInit::new(v(&[0.0, 1.0, 3.0]), v(&[0.0, 0.0, 1.0]))).unwrap();
        let b = mod_gamma_reduce(&geo, &JacobiInit::new(v(&[0.0, 2.0, 3.0]), v(&[0.0, 0.0, -1.0]))).unwrap();
        assert_eq!(class_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(class_distance(&a, &b).unwrap(), class_distance(&b, &a).unwrap());
        let mut far = b.clone();
        far.x[1] += 0.1;
        assert!(matches!(class_distance(&a, &far), Err(Error::BaseMismatch)));
    }

    #[test]
    fn oracle_translation_and_rotation_families() {
        let m = minkowski(3).unwrap();
        let fam = GeodesicVariation::new(|s| v(&[0.0, s, 0.0]), |_| v(&[1.0, 1.0, 0.0]));
        let o = variation_jacobi_oracle(&m, &fam, (0.0, 1.0), 100, 1e-3).unwrap();
        for j in &o.j {
            assert!((j - v(&[0.0, 1.0, 0.0])).amax() <= 1e-12);
        }
        let fam = GeodesicVariation::new(|_| v(&[0.0, 0.0, 0.0]), |s| v(&[1.0, s.cos(), s.sin()]));
        let o = variation_jacobi_oracle(&m, &fam, (0.0, 1.0), 100, 1e-3).unwrap();
        for (t, j) in o.t.iter().zip(&o.j) {
            assert!((j - v(&[0.0, 0.0, *t])).amax() <= 1e-6 * (1.0 + t));
        }
        assert!((&o.init.j0dot - v(&[0.0, 0.0, 1.0])).amax() <= 1e-10);
    }

    #[test]
    fn curved_field_has_affine_pairing_and_small_residual() {
        let geo = curved_geo(0.7);
        let vel = geo.initial().v.clone();
        let model = geo.model().clone();
        let x = geo.initial().x.clone();
        let mut j0dot = v(&[0.3, -0.4, 0.9]);
        // make it a light-ray field: remove the component pairing with v
        let t = model.time_field(&x).unwrap();
        let g = model.eval_metric(&x).unwrap();
        j0dot -= &t * (j0dot.dot(&(&g * &vel)) / t.dot(&(&g * &vel)));
        let f = integrate_jacobi(&geo, &JacobiInit::new(v(&[0.2, 1.0, -0.5]), j0dot)).unwrap();
        let fit = affine_pairing_fit(&f).unwrap();
        assert!(fit.residual <= 1e-7, "{fit:?}");
        assert!(fit.b.abs() <= 1e-6);
        assert!(f.ode_residual() <= 1e-6, "{}", f.ode_residual());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn propagation_is_linear(
            phi in 0.0f64..std::f64::consts::TAU,
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            u in proptest::collection::vec(-1.0f64..1.0, 6),
            w in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            let geo = curved_geo(phi);
            let prop = JacobiPropagator::new(&geo).unwrap();
            let iu = JacobiInit::new(v(&u[..3]), v(&u[3..]));
            let iw = JacobiInit::new(v(&w[..3]), v(&w[3..]));
            let fu = prop.propagate(&iu).unwrap();
            let fw = prop.propagate(&iw).unwrap();
            let fc = prop.propagate(&iu.combine(a, &iw, b)).unwrap();
            for ((su, sw), sc) in fu.samples().iter().zip(fw.samples()).zip(fc.samples()) {
                prop_assert!((&su.j * a + &sw.j * b - &sc.j).amax() <= 1e-9);
                prop_assert!((&su.p * a + &sw.p * b - &sc.p).amax() <= 1e-9);
            }
        }
    }
}
