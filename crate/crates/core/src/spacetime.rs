//! Lorentzian metrics in a conformal class, their connection and curvature.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{DomainViolation, Error, Result};
use crate::expr::Expr;
use crate::{Matrix, Vector};

/// Christoffel symbols `Γ^k_ij`, stored as `[k][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    m: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.m + i) * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[(k * self.m + i) * self.m + j] = value;
    }

    /// `Γ^k_ij a^i b^j`.
    pub fn contract(&self, a: &Vector, b: &Vector) -> Vector {
        let m = self.m;
        Vector::from_fn(m, |k, _| {
            let mut s = 0.0;
            for i in 0..m {
                if a[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }

    /// The linear map `w ↦ Γ(v, w)`.
    pub fn along(&self, v: &Vector) -> Matrix {
        let m = self.m;
        Matrix::from_fn(m, m, |k, j| (0..m).map(|i| self.get(k, i, j) * v[i]).sum())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = self.m;
        let mut worst = 0.0f64;
        for k in 0..m {
            for i in 0..m {
                for j in 0..i {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self - other`, componentwise.
    pub fn difference(&self, other: &Christoffel) -> Christoffel {
        Christoffel {
            m: self.m,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

pub type MetricFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&[f64]) -> Christoffel + Send + Sync>;

/// The metric a conformal factor is applied to.
#[derive(Clone)]
pub enum BaseMetric {
    Minkowski(usize),
    Custom {
        m: usize,
        g: MetricFn,
        christoffel: Option<ChristoffelFn>,
    },
}

impl fmt::Debug for BaseMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseMetric::Minkowski(m) => write!(f, "Minkowski({m})"),
            BaseMetric::Custom { m, christoffel, .. } => write!(
                f,
                "Custom {{ m: {m}, analytic_christoffel: {} }}",
                christoffel.is_some()
            ),
        }
    }
}

/// `e^{2σ} g_base`.
#[derive(Clone, Debug)]
pub struct MetricField {
    base: BaseMetric,
    sigma: Expr,
    sigma_grad: Vec<Expr>,
}

impl MetricField {
    pub fn minkowski(m: usize) -> Self {
        Self::from_base(BaseMetric::Minkowski(m))
    }

    pub fn custom(m: usize, g: MetricFn, christoffel: Option<ChristoffelFn>) -> Self {
        Self::from_base(BaseMetric::Custom { m, g, christoffel })
    }

    fn from_base(base: BaseMetric) -> Self {
        let m = match &base {
            BaseMetric::Minkowski(m) | BaseMetric::Custom { m, .. } => *m,
        };
        Self {
            base,
            sigma: Expr::Const(0.0),
            sigma_grad: vec![Expr::Const(0.0); m],
        }
    }

    pub fn with_sigma(mut self, sigma: Expr) -> Self {
        self.sigma_grad = sigma.gradient(self.dim());
        self.sigma = sigma;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.base {
            BaseMetric::Minkowski(m) | BaseMetric::Custom { m, .. } => *m,
        }
    }

    pub fn base(&self) -> &BaseMetric {
        &self.base
    }

    pub fn sigma_expr(&self) -> &Expr {
        &self.sigma
    }

    pub fn sigma(&self, x: &[f64]) -> f64 {
        self.sigma.eval(x)
    }

    pub fn sigma_gradient(&self, x: &[f64]) -> Vector {
        Vector::from_iterator(self.dim(), self.sigma_grad.iter().map(|e| e.eval(x)))
    }

    fn base_metric(&self, x: &[f64]) -> Matrix {
        match &self.base {
            BaseMetric::Minkowski(m) => minkowski_matrix(*m),
            BaseMetric::Custom { g, .. } => g(x),
        }
    }

    /// Metric components without any domain or signature validation.
    pub fn eval(&self, x: &[f64]) -> Matrix {
        let g = self.base_metric(x);
        if self.sigma.is_constant() && self.sigma.eval(x) == 0.0 {
            g
        } else {
            g * (2.0 * self.sigma.eval(x)).exp()
        }
    }

    /// Closed-form connection, available when the base has one.
    pub fn analytic_christoffel(&self, x: &[f64]) -> Option<Christoffel> {
        let m = self.dim();
        let s = self.sigma_gradient(x);
        let (mut gamma, g, ginv_s) = match &self.base {
            BaseMetric::Minkowski(_) => {
                let eta = minkowski_matrix(m);
                let mut up = s.clone();
                up[0] = -up[0];
                (Christoffel::zeros(m), eta, up)
            }
            BaseMetric::Custom {
                g,
                christoffel: Some(c),
                ..
            } => {
                let gb = g(x);
                let up = gb.clone().try_inverse()? * &s;
                (c(x), gb, up)
            }
            BaseMetric::Custom { .. } => return None,
        };
        if s.iter().all(|c| *c == 0.0) {
            return Some(gamma);
        }
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut v = gamma.get(k, i, j) - g[(i, j)] * ginv_s[k];
                    if k == i {
                        v += s[j];
                    }
                    if k == j {
                        v += s[i];
                    }
                    gamma.set(k, i, j, v);
                }
            }
        }
        Some(gamma)
    }

    pub fn has_analytic_christoffel(&self) -> bool {
        matches!(
            self.base,
            BaseMetric::Minkowski(_)
                | BaseMetric::Custom {
                    christoffel: Some(_),
                    ..
                }
        )
    }
}

pub fn minkowski_matrix(m: usize) -> Matrix {
    let mut g = Matrix::identity(m, m);
    g[(0, 0)] = -1.0;
    g
}

/// Axis-aligned coordinate box, closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoordBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument(format!(
                "box bounds must be increasing: lo={lo:?}, hi={hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(m: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; m],
            hi: vec![half_width; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }
}

/// Extra open region intersected with the box.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Everywhere,
    /// Euclidean open ball in chart coordinates.
    OpenBall { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Everywhere => true,
            Region::OpenBall { center, radius } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                r2 < radius * radius
            }
        }
    }
}

/// Which path computes the connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChristoffelSource {
    /// Closed form when available, finite differences otherwise.
    Auto,
    /// Always differentiate the metric numerically.
    FiniteDifference,
}

#[derive(Debug)]
struct ModelData {
    name: String,
    metric: MetricField,
    domain: CoordBox,
    region: Region,
    time_field: Vec<Expr>,
    excluded: Vec<Vector>,
    eps_excl: f64,
    h_fd: f64,
    source: ChristoffelSource,
    negate_christoffel: bool,
}

impl Clone for ModelData {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            metric: self.metric.clone(),
            domain: self.domain.clone(),
            region: self.region.clone(),
            time_field: self.time_field.clone(),
            excluded: self.excluded.clone(),
            eps_excl: self.eps_excl,
            h_fd: self.h_fd,
            source: self.source,
            negate_christoffel: self.negate_christoffel,
        }
    }
}

/// A chart of a time-oriented spacetime: metric, domain, exclusions and a
/// global future timelike field. Cheap to clone.
#[derive(Clone, Debug)]
pub struct SpacetimeModel {
    data: Arc<ModelData>,
}

impl SpacetimeModel {
    pub fn new(name: impl Into<String>, metric: MetricField, domain: CoordBox) -> Result<Self> {
        let m = metric.dim();
        if m < 2 {
            return Err(Error::InvalidArgument("dimension must be at least 2".into()));
        }
        if domain.dim() != m {
            return Err(Error::InvalidArgument(format!(
                "domain has dimension {} but metric has {m}",
                domain.dim()
            )));
        }
        if let Some(k) = metric.sigma_expr().max_coord() {
            if k >= m {
                return Err(Error::InvalidArgument(format!(
                    "conformal exponent refers to x{k} in dimension {m}"
                )));
            }
        }
        let mut time_field = vec![Expr::Const(0.0); m];
        time_field[0] = Expr::Const(1.0);
        Ok(Self {
            data: Arc::new(ModelData {
                name: name.into(),
                metric,
                domain,
                region: Region::Everywhere,
                time_field,
                excluded: Vec::new(),
                eps_excl: defaults::EPS_EXCL,
                h_fd: defaults::H_FD,
                source: ChristoffelSource::Auto,
                negate_christoffel: false,
            }),
        })
    }

    fn modified(&self, f: impl FnOnce(&mut ModelData)) -> Self {
        let mut d = (*self.data).clone();
        f(&mut d);
        Self { data: Arc::new(d) }
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        let name = name.into();
        self.modified(|d| d.name = name)
    }

    pub fn with_region(&self, region: Region) -> Self {
        self.modified(|d| d.region = region)
    }

    pub fn with_excluded_points(&self, points: Vec<Vector>) -> Result<Self> {
        for p in &points {
            if !self.data.domain.contains(p.as_slice()) {
                return Err(Error::InvalidArgument(format!(
                    "excluded point {:?} lies outside the domain",
                    p.as_slice()
                )));
            }
        }
        Ok(self.modified(|d| d.excluded = points))
    }

    pub fn with_time_field(&self, field: Vec<Expr>) -> Result<Self> {
        if field.len() != self.dim() {
            return Err(Error::InvalidArgument("time field has wrong length".into()));
        }
        Ok(self.modified(|d| d.time_field = field))
    }

    pub fn with_domain(&self, domain: CoordBox) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::InvalidArgument("domain has wrong dimension".into()));
        }
        Ok(self.modified(|d| d.domain = domain))
    }

    pub fn with_h_fd(&self, h: f64) -> Self {
        self.modified(|d| d.h_fd = h)
    }

    pub fn with_eps_excl(&self, eps: f64) -> Self {
        self.modified(|d| d.eps_excl = eps)
    }

    pub fn with_christoffel_source(&self, source: ChristoffelSource) -> Self {
        self.modified(|d| d.source = source)
    }

    /// Deliberately wrong connection (sign flipped), for mutation controls.
    pub fn with_negated_christoffel(&self) -> Self {
        self.modified(|d| d.negate_christoffel = !d.negate_christoffel)
    }

    pub fn name(&self) -> &str {
        &self.data.name
    }

    pub fn dim(&self) -> usize {
        self.data.metric.dim()
    }

    pub fn metric(&self) -> &MetricField {
        &self.data.metric
    }

    pub fn domain(&self) -> &CoordBox {
        &self.data.domain
    }

    pub fn region(&self) -> &Region {
        &self.data.region
    }

    pub fn excluded_points(&self) -> &[Vector] {
        &self.data.excluded
    }

    pub fn eps_excl(&self) -> f64 {
        self.data.eps_excl
    }

    pub fn h_fd(&self) -> f64 {
        self.data.h_fd
    }

    pub fn christoffel_source(&self) -> ChristoffelSource {
        self.data.source
    }

    /// Validates that `x` is an admissible chart point.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        let fail = |reason| {
            Err(Error::OutOfDomain {
                point: x.to_vec(),
                reason,
            })
        };
        if x.len() != self.dim() {
            return fail(DomainViolation::Dimension);
        }
        if x.iter().any(|c| !c.is_finite()) {
            return fail(DomainViolation::NonFinite);
        }
        if !self.data.domain.contains(x) {
            return fail(DomainViolation::OutsideBox);
        }
        if !self.data.region.contains(x) {
            return fail(DomainViolation::OutsideRegion);
        }
        for (index, p) in self.data.excluded.iter().enumerate() {
            let d2: f64 = x.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() < self.data.eps_excl {
                return fail(DomainViolation::Excluded { index });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check_point(x).is_ok()
    }

    /// Metric at `x`, validated for symmetry and Lorentzian signature.
    pub fn eval_metric(&self, x: &Vector) -> Result<Matrix> {
        self.check_point(x.as_slice())?;
        let g = self.data.metric.eval(x.as_slice());
        validate_lorentzian(&g, x.as_slice())?;
        Ok(g)
    }

    /// Metric without domain or signature validation, for stencil points.
    pub fn metric_unchecked(&self, x: &[f64]) -> Matrix {
        self.data.metric.eval(x)
    }

    pub fn inverse_metric(&self, x: &Vector) -> Result<Matrix> {
        let g = self.eval_metric(x)?;
        invert(g, x.as_slice())
    }

    pub fn inner(&self, x: &Vector, a: &Vector, b: &Vector) -> Result<f64> {
        let g = self.eval_metric(x)?;
        Ok(a.dot(&(&g * b)))
    }

    pub fn lower_index(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        Ok(self.eval_metric(x)? * v)
    }

    pub fn raise_index(&self, x: &Vector, p: &Vector) -> Result<Vector> {
        let g = self.eval_metric(x)?;
        g.lu()
            .solve(p)
            .ok_or_else(|| Error::Signature {
                point: x.as_slice().to_vec(),
                negative: 0,
            })
    }

    /// Global time-orientation field at `x`, checked future timelike.
    pub fn time_field(&self, x: &Vector) -> Result<Vector> {
        let g = self.eval_metric(x)?;
        let t = self.time_field_unchecked(x.as_slice());
        if !(t.dot(&(&g * &t)) < 0.0 && t[0] > 0.0) {
            return Err(Error::BadTimeField {
                point: x.as_slice().to_vec(),
            });
        }
        Ok(t)
    }

    pub fn time_field_unchecked(&self, x: &[f64]) -> Vector {
        Vector::from_iterator(self.dim(), self.data.time_field.iter().map(|e| e.eval(x)))
    }

    pub fn has_analytic_christoffel(&self) -> bool {
        self.data.source == ChristoffelSource::Auto && self.data.metric.has_analytic_christoffel()
    }

    /// Connection coefficients at `x`.
    pub fn christoffel(&self, x: &Vector) -> Result<Christoffel> {
        self.check_point(x.as_slice())?;
        Ok(self.christoffel_unchecked(x.as_slice()))
    }

    pub fn christoffel_unchecked(&self, x: &[f64]) -> Christoffel {
        let mut gamma = match self.data.source {
            ChristoffelSource::Auto => self
                .data
                .metric
                .analytic_christoffel(x)
                .unwrap_or_else(|| self.christoffel_fd_unchecked(x, self.data.h_fd)),
            ChristoffelSource::FiniteDifference => self.christoffel_fd_unchecked(x, self.data.h_fd),
        };
        if self.data.negate_christoffel {
            gamma.scale(-1.0);
        }
        gamma
    }

    /// Connection from central differences of the metric with step `h`.
    pub fn christoffel_fd(&self, x: &Vector, h: f64) -> Result<Christoffel> {
        self.check_point(x.as_slice())?;
        Ok(self.christoffel_fd_unchecked(x.as_slice(), h))
    }

    fn christoffel_fd_unchecked(&self, x: &[f64], h: f64) -> Christoffel {
        let m = self.dim();
        let dg = self.metric_derivatives_unchecked(x, h);
        let ginv = self
            .metric_unchecked(x)
            .try_inverse()
            .unwrap_or_else(|| Matrix::from_element(m, m, f64::NAN));
        let mut gamma = Christoffel::zeros(m);
        for i in 0..m {
            for j in i..m {
                for k in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        s += ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                    }
                    gamma.set(k, i, j, 0.5 * s);
                    gamma.set(k, j, i, 0.5 * s);
                }
            }
        }
        gamma
    }

    /// `∂_k g` for each coordinate `k`, by central differences with step `h`.
    pub fn metric_derivatives(&self, x: &Vector, h: f64) -> Result<Vec<Matrix>> {
        self.check_point(x.as_slice())?;
        Ok(self.metric_derivatives_unchecked(x.as_slice(), h))
    }

    fn metric_derivatives_unchecked(&self, x: &[f64], h: f64) -> Vec<Matrix> {
        let mut xp = x.to_vec();
        (0..self.dim())
            .map(|k| {
                xp[k] = x[k] + h;
                let gp = self.metric_unchecked(&xp);
                xp[k] = x[k] - h;
                let gm = self.metric_unchecked(&xp);
                xp[k] = x[k];
                (gp - gm) / (2.0 * h)
            })
            .collect()
    }

    /// `∂_k g^{-1}` by central differences with step `h`.
    pub fn inverse_metric_derivatives(&self, x: &Vector, h: f64) -> Result<Vec<Matrix>> {
        self.check_point(x.as_slice())?;
        let mut xp = x.as_slice().to_vec();
        (0..self.dim())
            .map(|k| {
                xp[k] = x[k] + h;
                let gp = invert(self.metric_unchecked(&xp), &xp)?;
                xp[k] = x[k] - h;
                let gm = invert(self.metric_unchecked(&xp), &xp)?;
                xp[k] = x[k];
                Ok((gp - gm) / (2.0 * h))
            })
            .collect()
    }

    /// Derivative of `Γ(a, b)` along `u` (with `a`, `b` held fixed), by a
    /// central difference of step `h_fd` along the unit direction of `u`.
    fn directional_contract_derivative(&self, x: &[f64], u: &Vector, a: &Vector, b: &Vector) -> Vector {
        let norm = u.norm();
        if norm == 0.0 {
            return Vector::zeros(self.dim());
        }
        let h = self.data.h_fd;
        let step = u * (h / norm);
        let xp: Vec<f64> = x.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
        let xm: Vec<f64> = x.iter().zip(step.iter()).map(|(p, s)| p - s).collect();
        let gp = self.christoffel_unchecked(&xp).contract(a, b);
        let gm = self.christoffel_unchecked(&xm).contract(a, b);
        (gp - gm) * (norm / (2.0 * h))
    }

    /// Curvature `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` at `x`.
    pub fn riemann(&self, x: &Vector, xv: &Vector, yv: &Vector, zv: &Vector) -> Result<Vector> {
        self.check_point(x.as_slice())?;
        let p = x.as_slice();
        let gamma = self.christoffel_unchecked(p);
        let d1 = self.directional_contract_derivative(p, xv, yv, zv);
        let d2 = self.directional_contract_derivative(p, yv, xv, zv);
        let q1 = gamma.contract(xv, &gamma.contract(yv, zv));
        let q2 = gamma.contract(yv, &gamma.contract(xv, zv));
        Ok(d1 - d2 + q1 - q2)
    }

    /// `R(J, v)v`, the operator of the Jacobi equation.
    pub fn riemann_op(&self, x: &Vector, j: &Vector, v: &Vector) -> Result<Vector> {
        self.riemann(x, j, v, v)
    }

    /// Matrix of `J ↦ R(J, v)v` at `x`.
    pub fn riemann_matrix(&self, x: &Vector, v: &Vector) -> Result<Matrix> {
        self.check_point(x.as_slice())?;
        Ok(self.riemann_matrix_unchecked(x.as_slice(), v))
    }

    pub(crate) fn riemann_matrix_unchecked(&self, x: &[f64], v: &Vector) -> Matrix {
        let m = self.dim();
        let h = self.data.h_fd;
        let gamma = self.christoffel_unchecked(x);
        let gvv = gamma.contract(v, v);
        // Γ(e_i, Γ(v,v)) and the derivative of Γ along v contracted with (e_i, v).
        let along_gvv = gamma.along(&gvv);
        let gamma_v = gamma.along(v);
        let norm = v.norm();
        let dv_gamma_v = if norm == 0.0 {
            Matrix::zeros(m, m)
        } else {
            let step = v * (h / norm);
            let xp: Vec<f64> = x.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let xm: Vec<f64> = x.iter().zip(step.iter()).map(|(p, s)| p - s).collect();
            (self.christoffel_unchecked(&xp).along(v) - self.christoffel_unchecked(&xm).along(v))
                * (norm / (2.0 * h))
        };
        let mut out = Matrix::zeros(m, m);
        let mut xp = x.to_vec();
        for i in 0..m {
            xp[i] = x[i] + h;
            let gp = self.christoffel_unchecked(&xp).contract(v, v);
            xp[i] = x[i] - h;
            let gm = self.christoffel_unchecked(&xp).contract(v, v);
            xp[i] = x[i];
            let di_gvv = (gp - gm) / (2.0 * h);
            let mut col = di_gvv - dv_gamma_v.column(i) + along_gvv.column(i);
            // Γ(v, Γ(e_i, v)) = gamma_v · (gamma_v e_i)
            col -= &gamma_v * gamma_v.column(i);
            out.set_column(i, &col);
        }
        out
    }

    /// The model with metric `e^{2σ} g`; same domain, exclusions and time field.
    pub fn conformal_rescale(&self, sigma: Expr) -> SpacetimeModel {
        let old = self.data.metric.sigma_expr().clone();
        let combined = match (&old, &sigma) {
            (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
            (Expr::Const(z), e) | (e, Expr::Const(z)) if *z == 0.0 => e.clone(),
            _ => old + sigma.clone(),
        };
        let metric = self.data.metric.clone().with_sigma(combined);
        let name = format!("{}*exp(2*({sigma}))", self.data.name);
        self.modified(|d| {
            d.metric = metric;
            d.name = name;
        })
    }
}

fn invert(g: Matrix, x: &[f64]) -> Result<Matrix> {
    g.try_inverse().ok_or_else(|| Error::Signature {
        point: x.to_vec(),
        negative: 0,
    })
}

/// Checks symmetry and signature `(−,+,…,+)`.
pub fn validate_lorentzian(g: &Matrix, x: &[f64]) -> Result<()> {
    let m = g.nrows();
    let scale = g.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut asym = 0.0f64;
    for i in 0..m {
        for j in 0..i {
            asym = asym.max((g[(i, j)] - g[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSymmetric {
            point: x.to_vec(),
            asymmetry: asym,
        });
    }
    // Positive-definite spatial block plus negative determinant forces
    // exactly one negative eigenvalue.
    let spatial = g.view((1, 1), (m - 1, m - 1)).into_owned();
    if Cholesky::new(spatial).is_some() && g.determinant() < 0.0 {
        return Ok(());
    }
    let eig = SymmetricEigen::new(g.clone());
    let negative = eig.eigenvalues.iter().filter(|l| **l < 0.0).count();
    let degenerate = eig.eigenvalues.iter().any(|l| l.abs() <= 1e-14 * scale);
    if negative == 1 && !degenerate {
        Ok(())
    } else {
        Err(Error::Signature {
            point: x.to_vec(),
            negative,
        })
    }
}

/// Built-in metric families addressed by name in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Minkowski { m: usize },
    ConformalFlat { m: usize, sigma: String },
    PuncturedMinkowski2,
    MinkowskiBall3,
}

impl MetricSpec {
    pub fn build(&self) -> Result<SpacetimeModel> {
        match self {
            MetricSpec::Minkowski { m } => minkowski(*m),
            MetricSpec::ConformalFlat { m, sigma } => conformal_flat(*m, Expr::parse(sigma)?),
            MetricSpec::PuncturedMinkowski2 => punctured_minkowski2(),
            MetricSpec::MinkowskiBall3 => minkowski_ball3(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MetricSpec::Minkowski { .. } => "minkowski",
            MetricSpec::ConformalFlat { .. } => "conformal_flat",
            MetricSpec::PuncturedMinkowski2 => "punctured_minkowski2",
            MetricSpec::MinkowskiBall3 => "minkowski_ball3",
        }
    }
}

/// Name, parameters and a one-line description of every catalog entry.
pub fn catalog() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        ("minkowski", "m ∈ {2,3,4}", "flat metric diag(-1,1,..,1) on [-5,5]^m"),
        (
            "conformal_flat",
            "m ∈ {2,3,4}, sigma = expression in x0..x{m-1}",
            "exp(2 sigma) times Minkowski on [-5,5]^m",
        ),
        (
            "punctured_minkowski2",
            "none",
            "2D Minkowski on [-4,4]^2 with the event (1,1) removed",
        ),
        (
            "minkowski_ball3",
            "none",
            "3D Minkowski restricted to t^2+x^2+y^2 < 1",
        ),
    ]
}

fn check_catalog_dim(m: usize) -> Result<()> {
    if (2..=4).contains(&m) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "catalog dimension must be 2, 3 or 4, got {m}"
        )))
    }
}

pub fn minkowski(m: usize) -> Result<SpacetimeModel> {
    check_catalog_dim(m)?;
    SpacetimeModel::new(format!("minkowski{m}"), MetricField::minkowski(m), CoordBox::cube(m, 5.0))
}

pub fn conformal_flat(m: usize, sigma: Expr) -> Result<SpacetimeModel> {
    check_catalog_dim(m)?;
    let name = format!("conformal_flat{m}[{sigma}]");
    SpacetimeModel::new(name, MetricField::minkowski(m).with_sigma(sigma), CoordBox::cube(m, 5.0))
}

pub fn punctured_minkowski2() -> Result<SpacetimeModel> {
    SpacetimeModel::new("punctured_minkowski2", MetricField::minkowski(2), CoordBox::cube(2, 4.0))?
        .with_excluded_points(vec![Vector::from_vec(vec![1.0, 1.0])])
}

pub fn minkowski_ball3() -> Result<SpacetimeModel> {
    Ok(
        SpacetimeModel::new("minkowski_ball3", MetricField::minkowski(3), CoordBox::cube(3, 1.0))?
            .with_region(Region::OpenBall {
                center: vec![0.0; 3],
                radius: 1.0,
            }),
    )
}
