//! The invariant matrix: one check per module-level property, each emitting
//! residual records, plus the coverage manifest that ties them together.

use std::collections::BTreeMap;

use lightray_core::contact::{
    conformal_hyperplane_check, contact_frame, extension_report, nondegeneracy_report, omega0,
    omega0_from_representatives, scale_invariance_check, spray_kernel_check, theta0, theta_g, TMTangent,
};
use lightray_core::expr::Expr;
use lightray_core::geodesics::{
    geodesic_residual, integrate_geodesic, make_null_from_vector, reparametrize_to_geodesic, Pregeodesic,
};
use lightray_core::jacobi::{
    affine_pairing_fit, class_distance, integrate_jacobi, reduce_at, variation_jacobi_oracle, JacobiPropagator,
};
use lightray_core::lightrays::{chart_to_ray, ray_coords, ray_curve, ray_to_chart, tangent_from_ray_curve};
use lightray_core::numeric::{observed_order, observed_orders};
use lightray_core::spacetime::{conformal_flat, minkowski, minkowski_ball3, punctured_minkowski2};
use lightray_core::{contact::numerical_rank, JacobiInit, Matrix, Result, SpacetimeModel, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::fixtures::{
    chart, curved, fixture_models, flat, random_class, random_coords, random_lightray_init, random_ray, random_state,
    rng_for, second_sigma, vec_in,
};
use crate::oracles::{conformal_class_pair, exponential_pregeodesic, rotation_family, slid_family};
use crate::report::{CheckMeta, Comparison, Record};
use crate::scenario::Tolerances;

/// Seed, tolerances and resolution shared by every check in a run.
#[derive(Clone, Debug)]
pub struct CheckContext {
    pub seed: u64,
    pub tol: Tolerances,
    pub steps_per_unit: usize,
}

impl CheckContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            tol: Tolerances::default(),
            steps_per_unit: lightray_core::defaults::STEPS_PER_UNIT,
        }
    }

    /// Generator for item `item` of check `id`, independent of evaluation order.
    pub fn rng(&self, id: &str, item: u64) -> ChaCha8Rng {
        let h = Sha256::digest(id.as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&h[..8]);
        rng_for(self.seed, u64::from_le_bytes(b) ^ item)
    }

    pub fn steps(&self, span: (f64, f64)) -> usize {
        ((span.1 - span.0) * self.steps_per_unit as f64).ceil().max(16.0) as usize
    }
}

pub type CheckFn = fn(&CheckContext, &CheckMeta) -> Result<Vec<Record>>;

pub struct Check {
    pub meta: CheckMeta,
    pub run: CheckFn,
}

impl Check {
    /// Runs the check; an evaluation error becomes a failing record.
    pub fn evaluate(&self, ctx: &CheckContext) -> Vec<Record> {
        match (self.run)(ctx, &self.meta) {
            Ok(records) => records,
            Err(e) => vec![self.meta.failed(&e.to_string())],
        }
    }
}

/// Every module invariant, by id and owning module. `check_all` refuses to
/// start unless the registered checks cover this list exactly once each.
pub const MANIFEST: &[(&str, &str)] = &[
    ("S1", "spacetime"),
    ("S2", "spacetime"),
    ("S3", "spacetime"),
    ("S4", "spacetime"),
    ("G1", "geodesics"),
    ("G2", "geodesics"),
    ("G3", "geodesics"),
    ("G4", "geodesics"),
    ("J1", "jacobi"),
    ("J2", "jacobi"),
    ("J3", "jacobi"),
    ("J4", "jacobi"),
    ("J5", "jacobi"),
    ("J6", "jacobi"),
    ("L1", "lightrays"),
    ("L2", "lightrays"),
    ("L3", "lightrays"),
    ("L4", "lightrays"),
    ("C1", "contact"),
    ("C2", "contact"),
    ("C3", "contact"),
    ("C4", "contact"),
    ("C5", "contact"),
    ("C6", "contact"),
    ("X1", "cli"),
    ("X2", "cli"),
];

const fn check(id: &'static str, module: &'static str, statement: &'static str, run: CheckFn) -> Check {
    Check {
        meta: CheckMeta { id, module, statement },
        run,
    }
}

pub fn invariant_checks() -> Vec<Check> {
    vec![
        check("S1", "spacetime", "catalog metrics symmetric with one negative eigenvalue and timelike T", s1),
        check("S2", "spacetime", "finite-difference connection converges at second order", s2),
        check("S3", "spacetime", "curvature vanishes on flat and constant-factor models", s3),
        check("S4", "spacetime", "raising undoes lowering", s4),
        check("G1", "geodesics", "null drift along integrated geodesics", g1),
        check("G2", "geodesics", "affine rescaling of the initial velocity", g2),
        check("G3", "geodesics", "RK4 self-convergence order on curved models", g3),
        check("G4", "geodesics", "reparametrized pregeodesics are affine geodesics", g4),
        check("J1", "jacobi", "initial data to field map is linear with trivial kernel", j1),
        check("J2", "jacobi", "pairing with the tangent is affine in the parameter", j2),
        check("J3", "jacobi", "rank of the solution space and of its light-ray part", j3),
        check("J4", "jacobi", "classes agree across a conformal change", j4),
        check("J5", "jacobi", "reparametrized variations give the same class", j5),
        check("J6", "jacobi", "variation oracle converges to the propagated field", j6),
        check("L1", "lightrays", "chart coordinates have length 2m-3", l1),
        check("L2", "lightrays", "chart point invariant under reparametrization", l2),
        check("L3", "lightrays", "tangent is linear in the chart curve", l3),
        check("L4", "lightrays", "chart curve and slid variation give the same class", l4),
        check("C1", "contact", "contact forms independent of representative", c1),
        check("C2", "contact", "symplectic form nondegenerate on contact frames", c2),
        check("C3", "contact", "a non-contact class adds exactly one dimension", c3),
        check("C4", "contact", "hyperplane invariant under rescaling and conformal change", c4),
        check("C5", "contact", "spray is characteristic on the null cone bundle", c5),
        check("C6", "contact", "tautological form and Jacobi formula agree on chart tangents", c6),
        check("X1", "cli", "identical scenario and seed give identical reports", x1),
        check("X2", "cli", "every invariant appears exactly once in the matrix", x2),
    ]
}

/// Every manifest entry is registered exactly once and nothing else is.
pub fn verify_coverage(checks: &[Check]) -> CliResult<()> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for c in checks {
        *seen.entry(c.meta.id).or_default() += 1;
        match MANIFEST.iter().find(|(id, _)| *id == c.meta.id) {
            None => return Err(CliError::Coverage(format!("{} is not in the manifest", c.meta.id))),
            Some((_, module)) if *module != c.meta.module => {
                return Err(CliError::Coverage(format!("{} registered under {}", c.meta.id, c.meta.module)))
            }
            _ => {}
        }
    }
    for (id, _) in MANIFEST {
        match seen.get(id) {
            Some(1) => {}
            Some(n) => return Err(CliError::Coverage(format!("{id} registered {n} times"))),
            None => return Err(CliError::Coverage(format!("{id} has no check"))),
        }
    }
    Ok(())
}

/// A secondary record of `meta`'s check, e.g. a detection control.
fn sub(meta: &CheckMeta, id: &'static str, statement: &'static str) -> CheckMeta {
    debug_assert!(id.starts_with(meta.id));
    CheckMeta {
        id,
        module: meta.module,
        statement,
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

fn sample_point(model: &SpacetimeModel, rng: &mut ChaCha8Rng) -> Vector {
    let d = model.domain();
    loop {
        let x = Vector::from_fn(model.dim(), |i, _| rng.random_range(d.lo[i]..d.hi[i]));
        if model.contains(x.as_slice()) {
            return x;
        }
    }
}

fn catalog_models() -> Result<Vec<SpacetimeModel>> {
    Ok(vec![
        minkowski(2)?,
        minkowski(3)?,
        minkowski(4)?,
        conformal_flat(3, Expr::parse("0.4")?)?,
        conformal_flat(3, Expr::parse("0.1*x1 - 0.05*x2")?)?,
        curved(2),
        curved(3),
        curved(4),
        punctured_minkowski2()?,
        minkowski_ball3()?,
    ])
}

fn s1(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let models = catalog_models()?;
    let per_model: Vec<(f64, usize)> = models
        .par_iter()
        .enumerate()
        .map(|(k, model)| {
            let mut rng = ctx.rng(meta.id, k as u64);
            let mut asym = 0.0f64;
            let mut violations = 0;
            for _ in 0..100 {
                let x = sample_point(model, &mut rng);
                let g = model.eval_metric(&x)?;
                asym = asym.max((&g - g.transpose()).amax());
                let negative = g.clone().symmetric_eigenvalues().iter().filter(|e| **e < 0.0).count();
                let t = model.time_field(&x)?;
                if negative != 1 || !(t.dot(&(&g * &t)) < 0.0) || !(t[0] > 0.0) {
                    violations += 1;
                }
            }
            Ok((asym, violations))
        })
        .collect::<Result<_>>()?;
    let inputs = format!("{} models x 100 points", models.len());
    let n = models.len() * 100;
    Ok(vec![
        meta.record(&inputs, max_of(per_model.iter().map(|p| p.0)), 1e-12, Comparison::AtMost, n),
        sub(meta, "S1.signature", "points with wrong signature or non-timelike T").record(
            &inputs,
            per_model.iter().map(|p| p.1).sum::<usize>() as f64,
            0.0,
            Comparison::Equal,
            n,
        ),
    ])
}

fn s2(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let model = curved(3);
    let mut rng = ctx.rng(meta.id, 0);
    let mut orders = Vec::new();
    for _ in 0..5 {
        let x = vec_in(&mut rng, 3, 2.0);
        let exact = model.christoffel(&x)?;
        let errs: Vec<f64> = [4e-2, 2e-2, 1e-2]
            .iter()
            .map(|h| Ok(model.christoffel_fd(&x, *h)?.max_abs_diff(&exact)))
            .collect::<Result<_>>()?;
        orders.extend(observed_orders(&errs, 2.0));
    }
    Ok(vec![meta.record(
        "curved m=3, 5 points, h = 4e-2/2e-2/1e-2",
        min_of(orders.iter().copied()),
        ctx.tol.order,
        Comparison::AtLeast,
        orders.len(),
    )])
}

fn s3(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let models = [flat(3), flat(4), conformal_flat(3, Expr::parse("0.7")?)?];
    let mut worst = 0.0f64;
    for (k, model) in models.iter().enumerate() {
        let mut rng = ctx.rng(meta.id, k as u64);
        let m = model.dim();
        for _ in 0..20 {
            let x = vec_in(&mut rng, m, 3.0);
            let j = vec_in(&mut rng, m, 1.0);
            let v = vec_in(&mut rng, m, 1.0);
            worst = worst.max(model.riemann_op(&x, &j, &v)?.amax());
        }
    }
    Ok(vec![meta.record("minkowski 3/4 and constant factor, 20 points each", worst, 1e-9, Comparison::AtMost, 60)])
}

fn s4(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    for m in [3usize, 4] {
        let model = curved(m);
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..50 {
            let x = vec_in(&mut rng, m, 3.0);
            let v = vec_in(&mut rng, m, 3.0);
            let back = model.raise_index(&x, &model.lower_index(&x, &v)?)?;
            worst = worst.max((back - &v).amax() / (1.0 + v.amax()));
        }
    }
    Ok(vec![meta.record("curved m=3/4, 50 vectors each", worst, 1e-12, Comparison::AtMost, 100)])
}

fn g1(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let cases: Vec<(usize, u64)> = [2usize, 3, 4].iter().flat_map(|m| (0..10).map(move |i| (*m, i))).collect();
    let span = (-2.0, 2.0);
    let out: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|(m, i)| {
            let model = curved(*m);
            let mut rng = ctx.rng(meta.id, (*m as u64) << 8 | i);
            let (p, v) = random_state(&model, &mut rng)?;
            let geo = integrate_geodesic(&model, &p, &v, span, ctx.steps(span))?;
            Ok((geo.null_drift() / v.norm_squared(), geo.min_future_pairing()))
        })
        .collect::<Result<_>>()?;
    let inputs = "curved m=2/3/4, 10 rays each, span [-2, 2]";
    Ok(vec![
        meta.record(inputs, max_of(out.iter().map(|o| o.0)), ctx.tol.null_drift, Comparison::AtMost, out.len()),
        sub(meta, "G1.future", "minimum of -g(v,T) along the rays").record(
            inputs,
            min_of(out.iter().map(|o| o.1)),
            0.0,
            Comparison::Above,
            out.len(),
        ),
    ])
}

fn g2(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for m in [3usize, 4] {
        let model = curved(m);
        for i in 0..5 {
            let mut rng = ctx.rng(meta.id, (m as u64) << 8 | i);
            let (p, v) = random_state(&model, &mut rng)?;
            let span = (-1.0, 1.5);
            let n = ctx.steps(span);
            let base = integrate_geodesic(&model, &p, &v, span, n)?;
            for lambda in [0.5, 2.0] {
                let scaled = integrate_geodesic(&model, &p, &(&v * lambda), (span.0 / lambda, span.1 / lambda), n)?;
                if scaled.len() != base.len() {
                    worst = f64::INFINITY;
                    continue;
                }
                for (a, b) in base.nodes().iter().zip(scaled.nodes()) {
                    worst = worst.max((&a.x - &b.x).amax()).max((&a.v * lambda - &b.v).amax());
                    worst = worst.max((a.t - lambda * b.t).abs());
                }
                count += 1;
            }
        }
    }
    Ok(vec![meta.record("curved m=3/4, 5 rays, lambda 0.5/2", worst, ctx.tol.affine, Comparison::AtMost, count)])
}

fn g3(_ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let model = curved(4);
    let p = Vector::from_vec(vec![0.1, 0.2, -0.3, 0.4]);
    let v = lightray_core::geodesics::make_null(&model, &p, &[0.3, -0.5, 0.8])?;
    let end = |n: usize| -> Result<Vector> { Ok(integrate_geodesic(&model, &p, &v, (0.0, 2.0), n)?.last().x.clone()) };
    let (a, b, c) = (end(50)?, end(100)?, end(200)?);
    let order = observed_order((&a - &b).amax(), (&b - &c).amax(), 2.0);
    Ok(vec![meta.record("curved m=4, n = 50/100/200 on [0, 2]", order, 3.9, Comparison::AtLeast, 3)])
}

fn g4(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let g = flat(3);
    let mut worst = 0.0f64;
    let p = Vector::from_vec(vec![0.2, -0.1, 0.3]);
    let v = Vector::from_vec(vec![1.0, 0.6, 0.8]);
    for c in [0.0, 0.5] {
        let (_, geo) = reparametrize_to_geodesic(&g, &exponential_pregeodesic(&p, &v, c, 400))?;
        worst = worst.max(geodesic_residual(&g, geo.nodes())?);
    }
    let bar = curved(3);
    for i in 0..5 {
        let mut rng = ctx.rng(meta.id, i);
        let (x, w) = random_state(&g, &mut rng)?;
        let other = integrate_geodesic(&bar, &x, &w, (-1.0, 1.0), ctx.steps((-1.0, 1.0)) * 2)?;
        let pre = Pregeodesic::from_conformal_geodesic(&g, &other);
        let (_, geo) = reparametrize_to_geodesic(&g, &pre)?;
        worst = worst.max(geodesic_residual(&g, geo.nodes())?);
    }
    Ok(vec![meta.record(
        "exponential lines c=0/0.5 and 5 conformal geodesics",
        worst,
        ctx.tol.geodesic,
        Comparison::AtMost,
        7,
    )])
}

fn j1(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    for m in [3usize, 4] {
        let model = curved(m);
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..3 {
            let (x, v) = random_state(&model, &mut rng)?;
            let geo = integrate_geodesic(&model, &x, &v, (-1.0, 1.5), ctx.steps((-1.0, 1.5)))?;
            let prop = JacobiPropagator::new(&geo)?;
            let a = JacobiInit::new(vec_in(&mut rng, m, 1.0), vec_in(&mut rng, m, 1.0));
            let b = JacobiInit::new(vec_in(&mut rng, m, 1.0), vec_in(&mut rng, m, 1.0));
            let (fa, fb) = (prop.propagate(&a)?, prop.propagate(&b)?);
            let fc = prop.propagate(&a.combine(0.7, &b, -1.3))?;
            for ((sa, sb), sc) in fa.samples().iter().zip(fb.samples()).zip(fc.samples()) {
                let j = &sa.j * 0.7 - &sb.j * 1.3;
                let p = &sa.p * 0.7 - &sb.p * 1.3;
                let scale = 1.0 + sc.j.amax() + sc.p.amax();
                worst = worst.max((j - &sc.j).amax() / scale).max((p - &sc.p).amax() / scale);
            }
            let zero = prop.propagate(&JacobiInit::zeros(m))?;
            worst = worst.max(max_of(zero.samples().iter().map(|s| s.j.amax().max(s.p.amax()))));
        }
    }
    Ok(vec![meta.record(
        "curved m=3/4, 3 rays each, combination 0.7a - 1.3b and zero data",
        worst,
        ctx.tol.linearity,
        Comparison::AtMost,
        6,
    )])
}

/// Largest pairing-fit residual over `n` random (model, ray, data) triples.
pub fn pairing_sweep(ctx: &CheckContext, id: &str, n: usize) -> Result<f64> {
    let res: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let m = 3 + k % 2;
            let model = curved(m);
            let mut rng = ctx.rng(id, k as u64);
            let x = vec_in(&mut rng, m, 0.5);
            let v = make_null_from_vector(&model, &x, &vec_in(&mut rng, m, 1.0))?;
            let span = (-1.0, 1.5);
            let geo = integrate_geodesic(&model, &x, &v, span, ctx.steps(span))?;
            let init = JacobiInit::new(vec_in(&mut rng, m, 1.0), vec_in(&mut rng, m, 1.0));
            Ok(affine_pairing_fit(&integrate_jacobi(&geo, &init)?)?.residual)
        })
        .collect::<Result<_>>()?;
    Ok(max_of(res))
}

fn j2(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let worst = pairing_sweep(ctx, meta.id, 100)?;
    Ok(vec![meta.record("100 triples on curved m=3/4", worst, ctx.tol.pairing, Comparison::AtMost, 100)])
}

fn stack_rows(rows: &[Vector]) -> Matrix {
    Matrix::from_rows(&rows.iter().map(|r| r.transpose()).collect::<Vec<_>>())
}

fn j3(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut mismatches = 0usize;
    let mut trials = 0usize;
    for m in [3usize, 4] {
        let model = curved(m);
        for i in 0..3 {
            let mut rng = ctx.rng(meta.id, (m as u64) << 8 | i);
            let (x, v) = random_state(&model, &mut rng)?;
            let geo = integrate_geodesic(&model, &x, &v, (0.0, 1.0), ctx.steps((0.0, 1.0)))?;
            let prop = JacobiPropagator::new(&geo)?;
            let inits: Vec<JacobiInit> = (0..2 * m)
                .map(|_| JacobiInit::new(vec_in(&mut rng, m, 1.0), vec_in(&mut rng, m, 1.0)))
                .collect();
            let end_rows = |inits: &[JacobiInit]| -> Result<Vec<Vector>> {
                inits
                    .iter()
                    .map(|i| {
                        let f = prop.propagate(i)?;
                        let s = f.samples().last().expect("nonempty field");
                        Ok(Vector::from_iterator(2 * m, s.j.iter().chain(s.p.iter()).copied()))
                    })
                    .collect()
            };
            if numerical_rank(&stack_rows(&end_rows(&inits)?), 1e-10) != 2 * m {
                mismatches += 1;
            }
            let constrained: Vec<JacobiInit> = inits
                .iter()
                .map(|i| {
                    Ok(JacobiInit::new(
                        i.j0.clone(),
                        crate::fixtures::orthogonalize_along_t(&model, &x, &v, i.j0dot.clone())?,
                    ))
                })
                .collect::<Result<_>>()?;
            if numerical_rank(&stack_rows(&end_rows(&constrained)?), 1e-10) != 2 * m - 1 {
                mismatches += 1;
            }
            for (a, b) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.7)] {
                let init = JacobiInit::zeros(m).shifted(&v, a, b);
                let cls = reduce_at(&model, &x, &v, &init)?;
                let field = prop.propagate(&init)?;
                let off = max_of(
                    field
                        .samples()
                        .iter()
                        .zip(geo.nodes())
                        .map(|(s, n)| (&s.j - &n.v * (a + b * s.t)).amax()),
                );
                if cls.w0.amax() > 1e-12 || cls.w0dot.amax() > 1e-12 || off > 1e-10 {
                    mismatches += 1;
                }
            }
            trials += 1;
        }
    }
    Ok(vec![meta.record(
        "curved m=3/4: rank 2m, light-ray rank 2m-1, reparametrization fields reduce to zero",
        mismatches as f64,
        0.0,
        Comparison::Equal,
        trials,
    )])
}

/// Worst class distance across a conformal change over `n` fixtures.
pub fn conformal_sweep(ctx: &CheckContext, id: &str, n: usize) -> Result<f64> {
    let res: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let m = 3 + k % 2;
            let g = curved(m);
            let mut rng = ctx.rng(id, k as u64);
            let x = vec_in(&mut rng, m, 0.5);
            let v = make_null_from_vector(&g, &x, &vec_in(&mut rng, m, 1.0))?;
            let init = random_lightray_init(&g, &x, &v, &mut rng, false)?;
            let (c, mut cb) = conformal_class_pair(&g, second_sigma(m), &x, &v, &init, 1.0, 2 * ctx.steps_per_unit)?;
            cb.x = c.x.clone();
            class_distance(&c, &cb)
        })
        .collect::<Result<_>>()?;
    Ok(max_of(res))
}

fn j4(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let worst = conformal_sweep(ctx, meta.id, 20)?;
    Ok(vec![meta.record(
        "20 fixtures on curved m=3/4 with a second conformal factor",
        worst,
        ctx.tol.class,
        Comparison::AtMost,
        20,
    )])
}

fn j5(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    let mut control = f64::INFINITY;
    for i in 0..8 {
        let m = 3 + (i % 2) as usize;
        let model = curved(m);
        let mut rng = ctx.rng(meta.id, i);
        let x = vec_in(&mut rng, m, 0.5);
        let a = vec_in(&mut rng, m, 0.5);
        let phi0 = rng.random_range(0.0..6.0);
        let kappa = rng.random_range(-0.5..0.5);
        let mu = rng.random_range(-0.5..0.5);
        let plain = rotation_family(&model, x.clone(), a.clone(), phi0);
        let inner = rotation_family(&model, x.clone(), a.clone(), phi0);
        let slid = slid_family(&model, move |s| ((inner.base)(s), (inner.field)(s)), kappa, mu);
        let v = (plain.field)(0.0);
        let c1 = reduce_at(&model, &x, &v, &plain.initial_data(&model)?)?;
        let c2 = reduce_at(&model, &x, &v, &slid.initial_data(&model)?)?;
        worst = worst.max(class_distance(&c1, &c2)?);
        let other = rotation_family(&model, x.clone(), &a * 1.5, phi0);
        let c3 = reduce_at(&model, &x, &v, &other.initial_data(&model)?)?;
        control = control.min(class_distance(&c1, &c3)?);
    }
    let inputs = "curved m=3/4, 8 rotation families slid along the rays";
    Ok(vec![
        meta.record(inputs, worst, ctx.tol.class, Comparison::AtMost, 8),
        sub(meta, "J5.control", "a family with a different tangent gives a different class").record(
            inputs,
            control,
            ctx.tol.control,
            Comparison::AtLeast,
            8,
        ),
    ])
}

/// Node-wise errors of the variation oracle against the propagated field
/// for each step in `steps`.
pub fn oracle_errors(ctx: &CheckContext, model: &SpacetimeModel, steps: &[f64]) -> Result<Vec<f64>> {
    let x = Vector::from_fn(model.dim(), |i, _| [0.1, -0.2, 0.3, 0.15][i]);
    let a = Vector::from_fn(model.dim(), |i, _| [0.0, 0.4, -0.3, 0.2][i]);
    let family = rotation_family(model, x, a, 0.8);
    let span = (0.0, 1.5);
    steps
        .iter()
        .map(|ds| {
            let oracle = variation_jacobi_oracle(model, &family, span, ctx.steps(span), *ds)?;
            let field = integrate_jacobi(&oracle.central, &oracle.init)?;
            Ok(max_of(field.samples().iter().zip(&oracle.j).map(|(s, j)| (&s.j - j).amax())))
        })
        .collect()
}

fn j6(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut orders = Vec::new();
    for m in [3usize, 4] {
        let errors = oracle_errors(ctx, &curved(m), &[2e-2, 1e-2, 5e-3, 2.5e-3])?;
        orders.extend(observed_orders(&errors, 2.0));
    }
    Ok(vec![meta.record(
        "rotation families on curved m=3/4, ds = 2e-2 .. 2.5e-3",
        min_of(orders.iter().copied()),
        ctx.tol.order,
        Comparison::AtLeast,
        orders.len(),
    )])
}

fn l1(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut mismatches = 0;
    for m in [3usize, 4] {
        let ch = chart(&curved(m));
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..10 {
            if ray_coords(&random_ray(&ch, &mut rng)?)?.len() != 2 * m - 3 {
                mismatches += 1;
            }
        }
    }
    Ok(vec![meta.record("curved m=3/4, 10 rays each", mismatches as f64, 0.0, Comparison::Equal, 20)])
}

fn l2(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for m in [3usize, 4] {
        let model = curved(m);
        let ch = chart(&model);
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..5 {
            let ray = random_ray(&ch, &mut rng)?;
            let span = (-1.0, 1.5);
            let geo = chart_to_ray(&ray, span, ctx.steps(span))?;
            for shift in [-0.3, 0.4] {
                let (xs, vs) = geo.state_at(shift)?;
                for lambda in [0.5, 3.0] {
                    let span2 = (-1.5, 1.5);
                    let other = integrate_geodesic(&model, &xs, &(&vs * lambda), span2, ctx.steps(span2) * 2)?;
                    let back = ray_to_chart(&ch, &other)?;
                    worst = worst.max((back.q() - ray.q()).amax()).max((back.v() - ray.v()).amax());
                    count += 1;
                }
            }
        }
    }
    Ok(vec![meta.record(
        "curved m=3/4, 5 rays, shifts -0.3/0.4, scales 0.5/3",
        worst,
        ctx.tol.affine,
        Comparison::AtMost,
        count,
    )])
}

fn l3(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    for m in [3usize, 4] {
        let ch = chart(&curved(m));
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..5 {
            let c0 = random_coords(&ch, &mut rng);
            let d: Vec<f64> = (0..c0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let class_for = |a: f64| {
                let (c0, d) = (c0.clone(), d.clone());
                let curve = ray_curve(&ch, move |s| c0.iter().zip(&d).map(|(c, d)| c + a * s * d).collect());
                tangent_from_ray_curve(&ch, &curve, lightray_core::defaults::DS_CHART)
            };
            let one = class_for(1.0)?;
            for a in [2.0, -1.0] {
                worst = worst.max(class_distance(&class_for(a)?, &one.scaled(a))?);
            }
        }
    }
    Ok(vec![meta.record("curved m=3/4, 5 chart lines, a = 2/-1", worst, ctx.tol.class, Comparison::AtMost, 20)])
}

fn l4(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    for i in 0..6 {
        let m = 3 + (i % 2) as usize;
        let model = curved(m);
        let ch = chart(&model);
        let mut rng = ctx.rng(meta.id, i);
        let c0 = random_coords(&ch, &mut rng);
        let d: Vec<f64> = (0..c0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coords = move |s: f64| c0.iter().zip(&d).map(|(c, d)| c + s * d).collect::<Vec<f64>>();
        let ray = ray_curve(&ch, coords.clone())(0.0)?;
        let from_chart = tangent_from_ray_curve(&ch, &ray_curve(&ch, coords.clone()), lightray_core::defaults::DS_CHART)?;
        let kappa = rng.random_range(-0.4..0.4);
        let mu = rng.random_range(-0.4..0.4);
        let ch2 = ch.clone();
        let state = move |s: f64| {
            let r = ray_curve(&ch2, coords.clone())(s).expect("chart curve stays in the chart");
            (r.event(), r.v().clone())
        };
        let family = slid_family(&model, state, kappa, mu);
        let cls = reduce_at(&model, &ray.event(), ray.v(), &family.initial_data(&model)?)?;
        worst = worst.max(class_distance(&from_chart, &cls)?);
    }
    Ok(vec![meta.record("curved m=3/4, 6 chart lines", worst, ctx.tol.class, Comparison::AtMost, 6)])
}

fn c1(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    let shifts = [-1.0, 0.7];
    for m in [3usize, 4] {
        let model = curved(m);
        let ch = chart(&model);
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..10 {
            let ray = random_ray(&ch, &mut rng)?;
            let (c1, c2) = (random_class(&ray, &mut rng, true)?, random_class(&ray, &mut rng, true)?);
            let g = model.eval_metric(&ray.event())?;
            let v = ray.v();
            let w = omega0(&ray, &c1, &c2)?;
            let th = theta0(&ray, &c1)?;
            for a1 in shifts {
                for b1 in shifts {
                    for a2 in shifts {
                        for b2 in shifts {
                            let r1 = (&c1.w0 + v * a1, &c1.w0dot + v * b1);
                            let r2 = (&c2.w0 + v * a2, &c2.w0dot + v * b2);
                            let shifted = omega0_from_representatives(&g, (&r1.0, &r1.1), (&r2.0, &r2.1));
                            worst = worst.max((shifted - w).abs());
                            worst = worst.max((v.dot(&(&g * &r1.0)) - th).abs());
                        }
                    }
                }
            }
        }
    }
    Ok(vec![meta.record(
        "curved m=3/4, 10 rays, shifts a,b in {-1, 0.7}",
        worst,
        ctx.tol.gauge,
        Comparison::AtMost,
        20,
    )])
}

/// Smallest singular value of the contact gram over `per_fixture` rays on
/// each fixture, with the largest `|θ₀|` on the frames and the frame sizes.
pub fn nondegeneracy_sweep(ctx: &CheckContext, id: &str, per_fixture: usize) -> Result<(f64, f64, bool)> {
    let models = fixture_models();
    let out: Vec<(f64, f64, bool)> = models
        .par_iter()
        .enumerate()
        .map(|(k, model)| {
            let ch = chart(model);
            let m = model.dim();
            let mut rng = ctx.rng(id, k as u64);
            let mut min_sv = f64::INFINITY;
            let mut theta = 0.0f64;
            let mut sizes = true;
            for _ in 0..per_fixture {
                let ray = random_ray(&ch, &mut rng)?;
                let frame = contact_frame(&ray)?;
                sizes &= frame.len() == 2 * m - 4;
                theta = theta.max(frame.max_theta0(&ray)?);
                theta = theta.max((&frame.gram + frame.gram.transpose()).amax());
                min_sv = min_sv.min(nondegeneracy_report(&frame, ctx.tol.contact).min_singular);
            }
            Ok((min_sv, theta, sizes))
        })
        .collect::<Result<_>>()?;
    Ok((
        min_of(out.iter().map(|o| o.0)),
        max_of(out.iter().map(|o| o.1)),
        out.iter().all(|o| o.2),
    ))
}

fn c2(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let (min_sv, theta, _) = nondegeneracy_sweep(ctx, meta.id, 20)?;
    let inputs = "flat and conformal m=3/4, 20 rays each";
    Ok(vec![
        meta.record(inputs, min_sv, ctx.tol.contact, Comparison::Above, 80),
        sub(meta, "C2.frame", "contact frames lie in the hyperplane and their gram is antisymmetric").record(
            inputs,
            theta,
            ctx.tol.hyperplane,
            Comparison::AtMost,
            80,
        ),
    ])
}

fn c3(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut mismatches = 0;
    let mut min_theta = f64::INFINITY;
    for m in [3usize, 4] {
        let model = curved(m);
        let ch = chart(&model);
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..5 {
            let ray = random_ray(&ch, &mut rng)?;
            let frame = contact_frame(&ray)?;
            let mut extra = random_class(&ray, &mut rng, true)?;
            let legs = ray.chart().frame(ray.q())?;
            extra.w0 += ray.v() * legs.t_norm - &legs.t_hat;
            let rep = extension_report(&ray, &frame, &extra)?;
            if rep.span_before != 2 * m - 4 || rep.span_after != rep.span_before + 1 || rep.gram_after != rep.gram_before
            {
                mismatches += 1;
            }
            min_theta = min_theta.min(rep.kernel_theta0);
        }
    }
    let inputs = "curved m=3/4, 5 rays, frame plus one class off the hyperplane";
    Ok(vec![
        meta.record(inputs, mismatches as f64, 0.0, Comparison::Equal, 10),
        sub(meta, "C3.kernel", "kernel of the extended gram leaves the hyperplane").record(
            inputs,
            min_theta,
            ctx.tol.contact,
            Comparison::Above,
            10,
        ),
    ])
}

fn c4(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let mut worst = 0.0f64;
    for m in [3usize, 4] {
        let model = curved(m);
        let bar = model.conformal_rescale(Expr::parse(second_sigma(m))?);
        let ch = chart(&model);
        let mut rng = ctx.rng(meta.id, m as u64);
        for _ in 0..10 {
            let ray = random_ray(&ch, &mut rng)?;
            let probes = (0..3).map(|_| random_class(&ray, &mut rng, false)).collect::<Result<Vec<_>>>()?;
            for lambda in [0.5, 3.0] {
                worst = worst.max(scale_invariance_check(&ray, lambda, &probes)?);
            }
            worst = worst.max(conformal_hyperplane_check(&ray, &bar)?);
        }
    }
    Ok(vec![meta.record(
        "curved m=3/4, 10 rays, scales 0.5/3 and a second conformal factor",
        worst,
        ctx.tol.hyperplane,
        Comparison::AtMost,
        20,
    )])
}

/// Worst kernel residual and smallest control over random null states.
pub fn spray_sweep(ctx: &CheckContext, id: &str, states: usize) -> Result<(f64, f64)> {
    let mut residual = 0.0f64;
    let mut control = f64::INFINITY;
    for m in [3usize, 4] {
        let model = curved(m);
        for k in 0..states as u64 {
            let mut rng = ctx.rng(id, (m as u64) << 8 | k);
            let (x, v) = random_state(&model, &mut rng)?;
            let rep = spray_kernel_check(&model, &x, &v, 50, rng.random())?;
            residual = residual.max(rep.residual);
            control = control.min(rep.control);
        }
    }
    Ok((residual, control))
}

fn c5(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let (residual, control) = spray_sweep(ctx, meta.id, 5)?;
    let inputs = "curved m=3/4, 5 states, 50 tangent samples each";
    Ok(vec![
        meta.record(inputs, residual, ctx.tol.spray, Comparison::AtMost, 500),
        sub(meta, "C5.control", "samples pushed off the cone are detected").record(
            inputs,
            control,
            ctx.tol.control,
            Comparison::AtLeast,
            500,
        ),
    ])
}

/// `|θ_g(ξ) − θ₀([J])|` on chart tangents, over `n` random pairs.
pub fn two_path_sweep(ctx: &CheckContext, id: &str, n: usize) -> Result<f64> {
    let res: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let m = 3 + k % 2;
            let model = curved(m);
            let ch = chart(&model);
            let mut rng = ctx.rng(id, k as u64);
            let c0 = random_coords(&ch, &mut rng);
            let d: Vec<f64> = (0..c0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let curve = {
                let (c0, d) = (c0.clone(), d.clone());
                ray_curve(&ch, move |s| c0.iter().zip(&d).map(|(c, d)| c + s * d).collect())
            };
            let ray = curve(0.0)?;
            // The base point moves linearly in the chart, so δx is exact.
            let dx = Vector::from_fn(m, |i, _| if i == 0 { 0.0 } else { d[i - 1] });
            let chain = theta_g(&model, &TMTangent::new(ray.event(), ray.v().clone(), dx, Vector::zeros(m)))?;
            let cls = tangent_from_ray_curve(&ch, &curve, lightray_core::defaults::DS_CHART)?;
            Ok((chain - theta0(&ray, &cls)?).abs())
        })
        .collect::<Result<_>>()?;
    Ok(max_of(res))
}

fn c6(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let worst = two_path_sweep(ctx, meta.id, 50)?;
    Ok(vec![meta.record("50 chart tangents on curved m=3/4", worst, ctx.tol.two_path, Comparison::AtMost, 50)])
}

fn x1(ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let scenario = crate::runner::sample_scenario(ctx.seed);
    let render = || -> std::result::Result<String, String> {
        let outcome = crate::runner::execute(&scenario).map_err(|e| e.to_string())?;
        outcome.report.canonical_json().map_err(|e| e.to_string())
    };
    let (a, b) = (render(), render());
    let differs = match (a, b) {
        (Ok(a), Ok(b)) => (a != b) as usize,
        _ => 1,
    };
    Ok(vec![meta.record(
        "contact_suite on curved m=3, run twice",
        differs as f64,
        0.0,
        Comparison::Equal,
        2,
    )])
}

fn x2(_ctx: &CheckContext, meta: &CheckMeta) -> Result<Vec<Record>> {
    let ok = verify_coverage(&invariant_checks()).is_ok();
    Ok(vec![meta.record(
        "registered checks against the manifest",
        if ok { 0.0 } else { 1.0 },
        0.0,
        Comparison::Equal,
        MANIFEST.len(),
    )])
}

/// Mutation controls: each record passes when the planted bug is caught.
pub fn mutation_controls(ctx: &CheckContext) -> Vec<Record> {
    let m1 = CheckMeta {
        id: "M1",
        module: "cli",
        statement: "negated connection in the Jacobi propagator is caught by the variation oracle",
    };
    let m2 = CheckMeta {
        id: "M2",
        module: "cli",
        statement: "symmetrized symplectic form is caught by the antisymmetry check",
    };
    let run1 = || -> Result<Record> {
        let model = curved(3);
        let x = Vector::from_vec(vec![0.1, -0.2, 0.3]);
        let a = Vector::from_vec(vec![0.0, 0.4, -0.3]);
        let family = rotation_family(&model, x, a, 0.8);
        let span = (0.0, 1.5);
        let oracle = variation_jacobi_oracle(&model, &family, span, ctx.steps(span), 2.5e-3)?;
        let mutant = model.with_negated_christoffel();
        let field = lightray_core::jacobi::integrate_jacobi_in(&mutant, &oracle.central, &oracle.init)?;
        let err = max_of(field.samples().iter().zip(&oracle.j).map(|(s, j)| (&s.j - j).amax()));
        Ok(m1.record("curved m=3 rotation family, ds = 2.5e-3", err, ctx.tol.oracle, Comparison::Above, 1))
    };
    let run2 = || -> Result<Record> {
        let model = curved(3);
        let ch = chart(&model);
        let mut rng = ctx.rng("M2", 0);
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let ray = random_ray(&ch, &mut rng)?;
            let c = random_class(&ray, &mut rng, false)?;
            let g = model.eval_metric(&ray.event())?;
            worst = worst.max(crate::oracles::omega0_symmetrized(&g, &c, &c).abs());
        }
        Ok(m2.record("curved m=3, 5 random classes", worst, ctx.tol.gauge, Comparison::Above, 5))
    };
    vec![
        run1().unwrap_or_else(|e| m1.failed(&e.to_string())),
        run2().unwrap_or_else(|e| m2.failed(&e.to_string())),
    ]
}

/// Runs the invariant matrix in parallel.
pub fn run_matrix(ctx: &CheckContext) -> CliResult<Vec<Record>> {
    let checks = invariant_checks();
    verify_coverage(&checks)?;
    Ok(checks.par_iter().flat_map(|c| c.evaluate(ctx)).collect())
}
