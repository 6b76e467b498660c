//! The canonical forms on the tangent bundle and their reductions to Jacobi
//! classes: `θ_g`, `ω_g`, `θ₀`, `ω₀`, contact frames, and residual checks of
//! the structural identities relating them.

use nalgebra::SVD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geodesics::check_future_null;
use crate::jacobi::JacobiClass;
use crate::lightrays::LightRay;
use crate::spacetime::SpacetimeModel;
use crate::{Matrix, Vector};

/// A tangent vector `(δx, δv)` to the tangent bundle at `(x, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TMTangent {
    pub x: Vector,
    pub v: Vector,
    pub dx: Vector,
    pub dv: Vector,
}

impl TMTangent {
    pub fn new(x: Vector, v: Vector, dx: Vector, dv: Vector) -> Self {
        Self { x, v, dx, dv }
    }

    fn same_base(&self, other: &TMTangent) -> bool {
        self.x == other.x && self.v == other.v
    }
}

/// `θ_g(ξ) = g(v, δx)`.
pub fn theta_g(model: &SpacetimeModel, xi: &TMTangent) -> Result<f64> {
    model.inner(&xi.x, &xi.v, &xi.dx)
}

/// The tautological form `p(δx)` evaluated on the image of `ξ` under index
/// lowering; it agrees with [`theta_g`] identically.
pub fn theta_pullback(model: &SpacetimeModel, xi: &TMTangent) -> Result<f64> {
    Ok(model.lower_index(&xi.x, &xi.v)?.dot(&xi.dx))
}

/// `ω_g(ξ₁, ξ₂) = g(δx₁, Dv₂) − g(δx₂, Dv₁)` with `Dv = δv + Γ(δx, v)`.
pub fn omega_g(model: &SpacetimeModel, xi1: &TMTangent, xi2: &TMTangent) -> Result<f64> {
    if !xi1.same_base(xi2) {
        return Err(Error::BaseMismatch);
    }
    let g = model.eval_metric(&xi1.x)?;
    let gamma = model.christoffel(&xi1.x)?;
    let d1 = &xi1.dv + gamma.contract(&xi1.dx, &xi1.v);
    let d2 = &xi2.dv + gamma.contract(&xi2.dx, &xi2.v);
    Ok(xi1.dx.dot(&(&g * d2)) - xi2.dx.dot(&(&g * d1)))
}

fn check_class_at_ray(ray: &LightRay, c: &JacobiClass) -> Result<Vector> {
    let x = ray.event();
    let tol = 1e-8;
    if c.x.len() != x.len() || (&c.x - &x).amax() > tol || (&c.v - ray.v()).amax() > tol {
        return Err(Error::BaseMismatch);
    }
    Ok(x)
}

/// `θ₀([J]) = g(v, w0)`.
pub fn theta0(ray: &LightRay, cls: &JacobiClass) -> Result<f64> {
    let x = check_class_at_ray(ray, cls)?;
    ray.model().inner(&x, ray.v(), &cls.w0)
}

/// `ω₀([J₁],[J₂]) = g(w0₁, w0dot₂) − g(w0₂, w0dot₁)`.
pub fn omega0(ray: &LightRay, c1: &JacobiClass, c2: &JacobiClass) -> Result<f64> {
    let x = check_class_at_ray(ray, c1)?;
    check_class_at_ray(ray, c2)?;
    Ok(omega0_from_representatives(
        &ray.model().eval_metric(&x)?,
        (&c1.w0, &c1.w0dot),
        (&c2.w0, &c2.w0dot),
    ))
}

/// The same expression on arbitrary representatives `(J(0), DJ/dt(0))`.
pub fn omega0_from_representatives(g: &Matrix, r1: (&Vector, &Vector), r2: (&Vector, &Vector)) -> f64 {
    r1.0.dot(&(g * r2.1)) - r2.0.dot(&(g * r1.1))
}

/// A basis of the contact hyperplane at a ray with its `ω₀` gram matrix.
#[derive(Clone, Debug)]
pub struct ContactFrame {
    pub x: Vector,
    pub v: Vector,
    pub basis: Vec<JacobiClass>,
    pub gram: Matrix,
}

impl ContactFrame {
    /// Gram matrix of `ω₀` for an arbitrary list of classes at the ray.
    pub fn from_basis(ray: &LightRay, basis: Vec<JacobiClass>) -> Result<Self> {
        let k = basis.len();
        let mut gram = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                gram[(i, j)] = omega0(ray, &basis[i], &basis[j])?;
            }
        }
        Ok(Self {
            x: ray.event(),
            v: ray.v().clone(),
            basis,
            gram,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn max_theta0(&self, ray: &LightRay) -> Result<f64> {
        self.basis
            .iter()
            .map(|c| theta0(ray, c).map(f64::abs))
            .try_fold(0.0f64, |m, r| r.map(|r| m.max(r)))
    }
}

/// An orthonormal basis of `{v, T}^⊥` at the ray's event.
pub fn screen_basis(ray: &LightRay) -> Result<Vec<Vector>> {
    let chart = ray.chart();
    let frame = chart.frame(ray.q())?;
    let x = ray.event();
    let g = ray.model().eval_metric(&x)?;
    let ip = |a: &Vector, b: &Vector| a.dot(&(&g * b));
    let s_hat = ray.v() * frame.t_norm - &frame.t_hat;
    let mut pool: Vec<Vector> = frame
        .legs
        .iter()
        .map(|e| e - &s_hat * ip(e, &s_hat))
        .collect();
    let mut out: Vec<Vector> = Vec::new();
    let target = ray.model().dim() - 2;
    while out.len() < target {
        let (best, _) = pool
            .iter()
            .enumerate()
            .map(|(i, e)| (i, ip(e, e)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let e = pool.swap_remove(best);
        let e = &e / ip(&e, &e).sqrt();
        for p in pool.iter_mut() {
            *p -= &e * ip(p, &e);
        }
        out.push(e);
    }
    Ok(out)
}

/// Classes `(e_a, 0)` then `(0, e_a)` for the screen basis `e_a`.
pub fn contact_frame(ray: &LightRay) -> Result<ContactFrame> {
    let x = ray.event();
    let m = x.len();
    let screen = screen_basis(ray)?;
    let zero = Vector::zeros(m);
    let mut basis: Vec<JacobiClass> = screen
        .iter()
        .map(|e| JacobiClass::from_parts(x.clone(), ray.v().clone(), e.clone(), zero.clone()))
        .collect();
    basis.extend(
        screen
            .iter()
            .map(|e| JacobiClass::from_parts(x.clone(), ray.v().clone(), zero.clone(), e.clone())),
    );
    ContactFrame::from_basis(ray, basis)
}

/// Determinant and smallest singular value of the gram.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nondegeneracy {
    pub det: f64,
    pub min_singular: f64,
    pub pass: bool,
}

pub fn nondegeneracy_report(frame: &ContactFrame, tol: f64) -> Nondegeneracy {
    let det = frame.gram.determinant();
    let sv = SVD::new(frame.gram.clone(), false, false).singular_values;
    let min_singular = sv.iter().fold(f64::INFINITY, |m, s| m.min(*s));
    Nondegeneracy {
        det,
        min_singular,
        pass: min_singular > tol,
    }
}

/// Numerical rank from singular values, relative threshold.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = SVD::new(a.clone(), false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |m, s| m.max(*s));
    sv.iter().filter(|s| **s > rel_tol * top.max(1e-300)).count()
}

/// Rank bookkeeping when a class off the hyperplane is appended to a
/// contact frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionReport {
    /// Rank of the stacked representatives before and after.
    pub span_before: usize,
    pub span_after: usize,
    /// Rank of the `ω₀` gram before and after.
    pub gram_before: usize,
    pub gram_after: usize,
    /// `|θ₀|` of the kernel direction of the extended gram.
    pub kernel_theta0: f64,
}

pub fn extension_report(ray: &LightRay, frame: &ContactFrame, extra: &JacobiClass) -> Result<ExtensionReport> {
    let stack = |classes: &[JacobiClass]| {
        let rows: Vec<_> = classes.iter().map(|c| c.stacked().transpose()).collect();
        Matrix::from_rows(&rows)
    };
    let mut ext = frame.basis.clone();
    ext.push(extra.clone());
    let big = ContactFrame::from_basis(ray, ext.clone())?;
    let svd = SVD::new(big.gram.clone(), false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, s)| if *s < a.1 { (i, *s) } else { a });
    let kernel = vt.row(imin).transpose();
    let mut kernel_class = JacobiClass::zero_at(&ray.event(), ray.v());
    for (c, k) in ext.iter().zip(kernel.iter()) {
        kernel_class = kernel_class.add(&c.scaled(*k))?;
    }
    Ok(ExtensionReport {
        span_before: numerical_rank(&stack(&frame.basis), 1e-10),
        span_after: numerical_rank(&stack(&ext), 1e-10),
        gram_before: numerical_rank(&frame.gram, 1e-10),
        gram_after: numerical_rank(&big.gram, 1e-10),
        kernel_theta0: theta0(ray, &kernel_class)?.abs(),
    })
}

/// `θ₀` computed with the velocity `λv` instead of the normalized `v`:
/// the zero set on the frame is unchanged and the values scale by `λ`.
/// Returns the worse of the two residuals.
pub fn scale_invariance_check(ray: &LightRay, lambda: f64, probes: &[JacobiClass]) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    let x = ray.event();
    let model = ray.model();
    let scaled_v = ray.v() * lambda;
    let frame = contact_frame(ray)?;
    let mut worst = 0.0f64;
    for b in &frame.basis {
        worst = worst.max(model.inner(&x, &scaled_v, &b.w0)?.abs());
    }
    for p in probes {
        let base = theta0(ray, p)?;
        let scaled = model.inner(&x, &scaled_v, &p.w0)?;
        worst = worst.max((scaled - lambda * base).abs());
    }
    Ok(worst)
}

/// Largest `|θ̄₀|` on the contact frame of `ray`, where `θ̄₀` is built from a
/// conformally related model with its own `T`-normalization.
pub fn conformal_hyperplane_check(ray: &LightRay, other: &SpacetimeModel) -> Result<f64> {
    let x = ray.event();
    let t = other.time_field(&x)?;
    let pairing = other.inner(&x, ray.v(), &t)?;
    let v_bar = ray.v() / (-pairing);
    let frame = contact_frame(ray)?;
    let mut worst = 0.0f64;
    for b in &frame.basis {
        worst = worst.max(other.inner(&x, &v_bar, &b.w0)?.abs());
    }
    Ok(worst)
}

/// Result of [`spray_kernel_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SprayKernelReport {
    /// `max |ω_g(X_g, Y)|` over random `Y` tangent to the null cone bundle.
    pub residual: f64,
    /// `min |ω_g(X_g, Y')|` over the same `Y` pushed off the cone.
    pub control: f64,
}

/// `(∂g)(δx)(v,v)` by central differences of the metric.
fn metric_derivative_vv(model: &SpacetimeModel, x: &Vector, dx: &Vector, v: &Vector) -> Result<f64> {
    let dg = model.metric_derivatives(x, model.h_fd())?;
    Ok(dg.iter().zip(dx.iter()).map(|(d, c)| c * v.dot(&(d * v))).sum())
}

/// Samples `trials` vectors tangent to the future null cone bundle at
/// `(x, v)` and evaluates `ω_g(X_g, Y)` on them. Tangency is imposed by a
/// correction of `δv` along `T`, using metric derivatives from finite
/// differences; the control adds `T` to `δv`, which leaves the cone.
pub fn spray_kernel_check(
    model: &SpacetimeModel,
    x: &Vector,
    v: &Vector,
    trials: usize,
    seed: u64,
) -> Result<SprayKernelReport> {
    check_future_null(model, x, v, crate::defaults::TOL_NULL)?;
    let m = model.dim();
    let g = model.eval_metric(x)?;
    let t = model.time_field(x)?;
    let gamma = model.christoffel(x)?;
    let spray = TMTangent::new(x.clone(), v.clone(), v.clone(), -gamma.contract(v, v));
    let gvt = v.dot(&(&g * &t));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residual = 0.0f64;
    let mut control = f64::INFINITY;
    for _ in 0..trials {
        let dx = Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let mut dv = Vector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let violation = 2.0 * v.dot(&(&g * &dv)) + metric_derivative_vv(model, x, &dx, v)?;
        dv -= &t * (violation / (2.0 * gvt));
        let y = TMTangent::new(x.clone(), v.clone(), dx.clone(), dv.clone());
        residual = residual.max(omega_g(model, &spray, &y)?.abs());
        let off = TMTangent::new(x.clone(), v.clone(), dx, dv + &t);
        control = control.min(omega_g(model, &spray, &off)?.abs());
    }
    Ok(SprayKernelReport { residual, control })
}

/// Residuals of the index-lowering map carrying the Euler field to the
/// Liouville field and the spray to the Hamiltonian field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntertwineResiduals {
    pub r_delta: f64,
    pub r_x: f64,
}

fn lowering(model: &SpacetimeModel, x: &Vector, v: &Vector) -> (Vector, Vector) {
    (x.clone(), model.metric_unchecked(x.as_slice()) * v)
}

/// Central difference of the lowering map along the straight chart line
/// through `(x, v)` with direction `(ax, av)`.
fn pushforward(model: &SpacetimeModel, x: &Vector, v: &Vector, ax: &Vector, av: &Vector, delta: f64) -> (Vector, Vector) {
    let (xp, pp) = lowering(model, &(x + ax * delta), &(v + av * delta));
    let (xm, pm) = lowering(model, &(x - ax * delta), &(v - av * delta));
    ((xp - xm) / (2.0 * delta), (pp - pm) / (2.0 * delta))
}

/// Hamiltonian field of `H = ½ g^{ij} p_i p_j` at `(x, p)`.
pub fn hamiltonian_field(model: &SpacetimeModel, x: &Vector, p: &Vector) -> Result<(Vector, Vector)> {
    let ginv = model.inverse_metric(x)?;
    let dginv = model.inverse_metric_derivatives(x, model.h_fd())?;
    let xdot = &ginv * p;
    let pdot = Vector::from_iterator(model.dim(), dginv.iter().map(|d| -0.5 * p.dot(&(d * p))));
    Ok((xdot, pdot))
}

pub fn hamiltonian_intertwine_check(
    model: &SpacetimeModel,
    x: &Vector,
    v: &Vector,
    delta: f64,
) -> Result<IntertwineResiduals> {
    let m = model.dim();
    let g = model.eval_metric(x)?;
    let p = &g * v;
    let zero = Vector::zeros(m);
    let (ex, ep) = pushforward(model, x, v, &zero, v, delta);
    let r_delta = ex.amax().max((ep - &p).amax());
    let gamma = model.christoffel(x)?;
    let (sx, sp) = pushforward(model, x, v, v, &-gamma.contract(v, v), delta);
    let (hx, hp) = hamiltonian_field(model, x, &p)?;
    let r_x = (sx - hx).amax().max((sp - hp).amax());
    Ok(IntertwineResiduals { r_delta, r_x })
}

/// Finite-`s` form of `ℒ_E ω = ω`: the fibre scaling `v ↦ e^s v` pulls the
/// symplectic form back to `e^s` times itself. Checked on every pair of
/// coordinate basis vectors, on the cotangent side (canonical form) and on
/// the tangent side (`ω_g`).
pub fn liouville_check(model: &SpacetimeModel, x: &Vector, v: &Vector, s: f64) -> Result<f64> {
    let m = model.dim();
    let es = s.exp();
    let basis = |k: usize| -> (Vector, Vector) {
        let mut a = Vector::zeros(m);
        let mut b = Vector::zeros(m);
        if k < m {
            a[k] = 1.0;
        } else {
            b[k - m] = 1.0;
        }
        (a, b)
    };
    let canonical = |a: &(Vector, Vector), b: &(Vector, Vector)| a.0.dot(&b.1) - b.0.dot(&a.1);
    let mut worst = 0.0f64;
    let vs = v * es;
    for i in 0..2 * m {
        for j in 0..2 * m {
            let (ai, bi) = basis(i);
            let (aj, bj) = basis(j);
            let lhs = canonical(&(ai.clone(), &bi * es), &(aj.clone(), &bj * es));
            let rhs = es * canonical(&(ai.clone(), bi.clone()), &(aj.clone(), bj.clone()));
            worst = worst.max((lhs - rhs).abs());
            let pushed_i = TMTangent::new(x.clone(), vs.clone(), ai.clone(), &bi * es);
            let pushed_j = TMTangent::new(x.clone(), vs.clone(), aj.clone(), &bj * es);
            let lhs = omega_g(model, &pushed_i, &pushed_j)?;
            let plain_i = TMTangent::new(x.clone(), v.clone(), ai, bi);
            let plain_j = TMTangent::new(x.clone(), v.clone(), aj, bj);
            let rhs = es * omega_g(model, &plain_i, &plain_j)?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::lightrays::{coords_to_ray, CauchyChart, RayCoords};
    use crate::spacetime::{conformal_flat, minkowski, CoordBox};
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::from_row_slice(c)
    }

    fn flat_ray(m: usize) -> LightRay {
        let ch = CauchyChart::build(&minkowski(m).unwrap(), CoordBox::cube(m, 2.0), 0.0).unwrap();
        let mut values = vec![0.0; 2 * m - 3];
        if m == 4 {
            values[m - 1] = std::f64::consts::FRAC_PI_2;
        }
        coords_to_ray(&ch, &RayCoords { values, branch: 1 }).unwrap()
    }

    fn curved_ray(phi: f64) -> LightRay {
        let c = conformal_flat(3, Expr::parse("0.2*sin(x1) + 0.1*x2*x0").unwrap()).unwrap();
        let ch = CauchyChart::build(&c, CoordBox::cube(3, 2.0), 0.0).unwrap();
        coords_to_ray(&ch, &RayCoords { values: vec![0.3, -0.4, phi], branch: 1 }).unwrap()
    }

    #[test]
    fn theta_g_examples() {
        let m = minkowski(3).unwrap();
        let x = Vector::zeros(3);
        let xi = TMTangent::new(x.clone(), v(&[1.0, 1.0, 0.0]), v(&[0.0, 1.0, 0.0]), Vector::zeros(3));
        assert_eq!(theta_g(&m, &xi).unwrap(), 1.0);
        let vertical = TMTangent::new(x, v(&[1.0, 1.0, 0.0]), Vector::zeros(3), v(&[0.3, 0.1, 2.0]));
        assert_eq!(theta_g(&m, &vertical).unwrap(), 0.0);
    }

    #[test]
    fn omega_g_flat_example() {
        let m = minkowski(3).unwrap();
        let x = Vector::zeros(3);
        let u = v(&[1.0, 1.0, 0.0]);
        let a = TMTangent::new(x.clone(), u.clone(), v(&[0.0, 0.0, 1.0]), Vector::zeros(3));
        let b = TMTangent::new(x, u, Vector::zeros(3), v(&[0.0, 0.0, 1.0]));
        assert_eq!(omega_g(&m, &a, &b).unwrap(), 1.0);
        let mut c = b.clone();
        c.v[1] = 0.5;
        assert!(matches!(omega_g(&m, &a, &c), Err(Error::BaseMismatch)));
    }

    #[test]
    fn theta0_and_omega0_examples() {
        let ray = flat_ray(3);
        let x = ray.event();
        let u = ray.v().clone();
        let c = |w: &[f64], d: &[f64]| JacobiClass::from_parts(x.clone(), u.clone(), v(w), v(d));
        assert_eq!(theta0(&ray, &c(&[0.0, 1.0, 0.0], &[0.0; 3])).unwrap(), 1.0);
        assert_eq!(theta0(&ray, &c(&[0.0, 0.0, 1.0], &[0.0; 3])).unwrap(), 0.0);
        let c1 = c(&[0.0, 0.0, 1.0], &[0.0; 3]);
        let c2 = c(&[0.0; 3], &[0.0, 0.0, 1.0]);
        assert_eq!(omega0(&ray, &c1, &c2).unwrap(), 1.0);
        assert_eq!(omega0(&ray, &c1, &c1).unwrap(), 0.0);
    }

    #[test]
    fn flat_frames() {
        let ray = flat_ray(3);
        let f = contact_frame(&ray).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.basis[0].w0, v(&[0.0, 0.0, 1.0]));
        assert_eq!(f.basis[1].w0dot, v(&[0.0, 0.0, 1.0]));
        assert!((&f.gram - Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).amax() <= 1e-10);
        let r = nondegeneracy_report(&f, 1e-6);
        assert!((r.det - 1.0).abs() < 1e-12 && (r.min_singular - 1.0).abs() < 1e-12 && r.pass);
        let ray4 = flat_ray(4);
        let f4 = contact_frame(&ray4).unwrap();
        assert_eq!(f4.len(), 4);
        let r = nondegeneracy_report(&f4, 1e-6);
        assert!((r.det - 1.0).abs() < 1e-12 && (r.min_singular - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_basis_is_degenerate() {
        let ray = flat_ray(3);
        let f = contact_frame(&ray).unwrap();
        let dup = ContactFrame::from_basis(&ray, vec![f.basis[0].clone(), f.basis[0].clone()]).unwrap();
        let r = nondegeneracy_report(&dup, 1e-6);
        assert_eq!(r.det, 0.0);
        assert!(!r.pass);
    }

    #[test]
    fn flat_scale_and_kernel() {
        let ray = flat_ray(3);
        assert_eq!(scale_invariance_check(&ray, 1.0, &[]).unwrap(), 0.0);
        let probe = JacobiClass::from_parts(ray.event(), ray.v().clone(), v(&[0.0, 1.0, 0.5]), v(&[0.0, 0.0, 1.0]));
        assert_eq!(scale_invariance_check(&ray, 2.0, &[probe]).unwrap(), 0.0);
        let m = minkowski(3).unwrap();
        let rep = spray_kernel_check(&m, &Vector::zeros(3), &v(&[1.0, 1.0, 0.0]), 20, 7).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert!(rep.control >= 1e-3);
    }

    #[test]
    fn flat_intertwining_and_liouville() {
        let m = minkowski(3).unwrap();
        let x = v(&[0.1, 0.2, 0.3]);
        let u = v(&[1.0, 0.6, 0.8]);
        let r = hamiltonian_intertwine_check(&m, &x, &u, 1e-3).unwrap();
        assert!(r.r_delta <= 1e-12 && r.r_x <= 1e-12, "{r:?}");
        assert_eq!(liouville_check(&m, &x, &u, 0.0).unwrap(), 0.0);
        assert!(liouville_check(&m, &x, &u, 2f64.ln()).unwrap() <= 1e-15);
    }

    #[test]
    fn extension_raises_span_not_gram_rank() {
        let ray = curved_ray(0.9);
        let f = contact_frame(&ray).unwrap();
        let frame = ray.chart().frame(ray.q()).unwrap();
        let s_hat = ray.v() * frame.t_norm - &frame.t_hat;
        let extra = JacobiClass::from_parts(ray.event(), ray.v().clone(), s_hat, Vector::zeros(3));
        let r = extension_report(&ray, &f, &extra).unwrap();
        assert_eq!((r.span_before, r.span_after), (2, 3));
        assert_eq!((r.gram_before, r.gram_after), (2, 2));
        assert!(r.kernel_theta0 > 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn omega_g_is_antisymmetric(
            d in proptest::collection::vec(-1.0f64..1.0, 12),
            phi in 0.0f64..std::f64::consts::TAU,
        ) {
            let ray = curved_ray(phi);
            let model = ray.model().clone();
            let x = ray.event();
            let a = TMTangent::new(x.clone(), ray.v().clone(), v(&d[0..3]), v(&d[3..6]));
            let b = TMTangent::new(x, ray.v().clone(), v(&d[6..9]), v(&d[9..12]));
            prop_assert!(omega_g(&model, &a, &a).unwrap().abs() <= 1e-15);
            let s = omega_g(&model, &a, &b).unwrap() + omega_g(&model, &b, &a).unwrap();
            prop_assert!(s.abs() <= 1e-14);
            prop_assert!((theta_g(&model, &a).unwrap() - theta_pullback(&model, &a).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn curved_frames_are_contact_and_nondegenerate(phi in 0.0f64..std::f64::consts::TAU) {
            let ray = curved_ray(phi);
            let f = contact_frame(&ray).unwrap();
            prop_assert!(f.max_theta0(&ray).unwrap() <= 1e-10);
            prop_assert!((&f.gram + f.gram.transpose()).amax() <= 1e-14);
            prop_assert!(nondegeneracy_report(&f, 1e-6).min_singular > 1e-6);
        }
    }
}
