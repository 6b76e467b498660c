//! Scenario execution, `check-all` and the files written for each run.

use std::path::Path;
use std::time::Instant;

use lightray_core::contact::{
    conformal_hyperplane_check, contact_frame, hamiltonian_intertwine_check, liouville_check, nondegeneracy_report,
    omega0, omega0_from_representatives, spray_kernel_check, theta0, theta_g, TMTangent,
};
use lightray_core::expr::Expr;
use lightray_core::jacobi::{affine_pairing_fit, class_distance, integrate_jacobi};
use lightray_core::lightrays::{chart_to_ray, coords_to_ray, ray_curve, tangent_from_ray_curve};
use lightray_core::numeric::observed_order;
use lightray_core::spacetime::{catalog, MetricSpec};
use lightray_core::{CauchyChart, JacobiInit, LightRay, Matrix, RayCoords, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checks::{mutation_controls, run_matrix, CheckContext};
use crate::criteria::acceptance_records;
use crate::error::{CliError, CliResult};
use crate::fixtures::{curved_sigma, random_class, random_lightray_init, random_ray, rng_for, vec_in};
use crate::oracles::{conformal_class_pair, flat_geodesic, flat_jacobi};
use crate::report::{
    write_jacobi, write_rays, write_residuals, CheckMeta, Comparison, JacobiTable, RayTable, Report,
};
use crate::scenario::{IntegratorSpec, RaySpec, Scenario, ScenarioKind, Tolerances};

/// Seed used by `check-all`.
pub const CHECK_ALL_SEED: u64 = 1;

pub const REPORT_FILE: &str = "report.json";
pub const RAYS_FILE: &str = "rays.csv";
pub const JACOBI_FILE: &str = "jacobi.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";

/// A finished scenario: the report plus the plot tables.
pub struct Outcome {
    pub report: Report,
    pub rays: RayTable,
    pub jacobi: JacobiTable,
}

fn meta(id: &'static str, module: &'static str, statement: &'static str) -> CheckMeta {
    CheckMeta { id, module, statement }
}

fn in_scenario(s: &Scenario) -> impl Fn(lightray_core::Error) -> CliError + '_ {
    move |source| CliError::Module {
        scenario: s.name.clone(),
        source,
    }
}

fn is_flat(spec: &MetricSpec) -> bool {
    match spec {
        MetricSpec::Minkowski { .. } | MetricSpec::PuncturedMinkowski2 | MetricSpec::MinkowskiBall3 => true,
        MetricSpec::ConformalFlat { sigma, .. } => Expr::parse(sigma).is_ok_and(|e| e.is_constant()),
    }
}

/// Generator for per-ray random data, on streams disjoint from ray placement.
fn ray_rng(seed: u64, index: usize) -> ChaCha8Rng {
    rng_for(seed, (1 << 32) | index as u64)
}

fn scenario_rays(s: &Scenario, chart: &CauchyChart) -> CliResult<Vec<LightRay>> {
    let err = in_scenario(s);
    match (&s.rays.list, s.rays.count) {
        (Some(list), _) => list
            .iter()
            .map(|values| {
                coords_to_ray(
                    chart,
                    &RayCoords {
                        values: values.clone(),
                        branch: 1,
                    },
                )
                .map_err(&err)
            })
            .collect(),
        (None, Some(count)) => (0..count)
            .map(|i| random_ray(chart, &mut rng_for(s.seed, i as u64)).map_err(&err))
            .collect(),
        (None, None) => Err(CliError::Field {
            field: "rays".into(),
            message: "give `count` or `list`".into(),
        }),
    }
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// Per-ray results of a suite, gathered in ray order.
#[derive(Default)]
struct RayWork {
    rays: Vec<(usize, usize, f64, Vec<f64>, Vec<f64>)>,
    jacobi: Vec<(usize, usize, f64, Vec<f64>, Vec<f64>, f64)>,
    values: Vec<f64>,
}

fn geodesic_rows(i: usize, geo: &lightray_core::NullGeodesic) -> Vec<(usize, usize, f64, Vec<f64>, Vec<f64>)> {
    geo.nodes().iter().map(|n| (i, 0, n.t, to_vec(&n.x), to_vec(&n.v))).collect()
}

fn span(it: &IntegratorSpec) -> (f64, f64) {
    (it.span[0], it.span[1])
}

fn geodesic_demo(s: &Scenario, rays: &[LightRay]) -> CliResult<Vec<RayWork>> {
    let sp = span(&s.integrator);
    let n = s.integrator.steps_for(sp);
    let flat = is_flat(&s.metric);
    rays.par_iter()
        .enumerate()
        .map(|(i, ray)| {
            let geo = chart_to_ray(ray, sp, n).map_err(in_scenario(s))?;
            let (p, v) = (ray.event(), ray.v().clone());
            let flat_err = if flat {
                max_of(geo.nodes().iter().map(|n| (flat_geodesic(&p, &v, n.t) - &n.x).amax().max((&v - &n.v).amax())))
            } else {
                0.0
            };
            Ok(RayWork {
                rays: geodesic_rows(i, &geo),
                jacobi: Vec::new(),
                values: vec![geo.null_drift() / v.norm_squared(), geo.min_future_pairing(), flat_err],
            })
        })
        .collect()
}

fn jacobi_suite(s: &Scenario, rays: &[LightRay]) -> CliResult<Vec<RayWork>> {
    let sp = span(&s.integrator);
    let n = s.integrator.steps_for(sp);
    let flat = is_flat(&s.metric);
    let err = in_scenario(s);
    rays.par_iter()
        .enumerate()
        .map(|(i, ray)| {
            let geo = chart_to_ray(ray, sp, n).map_err(&err)?;
            let model = ray.model();
            let (x, v) = (ray.event(), ray.v().clone());
            let m = model.dim();
            let mut rng = ray_rng(s.seed, i);
            let inits = [
                random_lightray_init(model, &x, &v, &mut rng, false).map_err(&err)?,
                JacobiInit::new(vec_in(&mut rng, m, 1.0), vec_in(&mut rng, m, 1.0)),
            ];
            let mut work = RayWork {
                rays: geodesic_rows(i, &geo),
                ..RayWork::default()
            };
            let mut fit_residual = 0.0f64;
            let mut slope = 0.0f64;
            let mut flat_err = 0.0f64;
            for (k, init) in inits.iter().enumerate() {
                let field = integrate_jacobi(&geo, init).map_err(&err)?;
                let fit = affine_pairing_fit(&field).map_err(&err)?;
                fit_residual = fit_residual.max(fit.residual);
                if k == 0 {
                    slope = fit.b.abs() / (1.0 + fit.a.abs());
                }
                for (sample, (_, pairing)) in field.samples().iter().zip(field.pairing_series()) {
                    if flat {
                        let (j, p) = flat_jacobi(&init.j0, &init.j0dot, sample.t);
                        flat_err = flat_err.max((j - &sample.j).amax()).max((p - &sample.p).amax());
                    }
                    work.jacobi.push((i, k, sample.t, to_vec(&sample.j), to_vec(&sample.p), pairing));
                }
            }
            work.values = vec![fit_residual, slope, flat_err];
            Ok(work)
        })
        .collect()
}

fn conformal_invariance(s: &Scenario, rays: &[LightRay]) -> CliResult<Vec<RayWork>> {
    let err = in_scenario(s);
    let sigma = &s.conformal.as_ref().expect("validated scenario").sigma;
    let sp = span(&s.integrator);
    let n = s.integrator.steps_for(sp);
    rays.par_iter()
        .enumerate()
        .map(|(i, ray)| {
            let model = ray.model();
            let (x, v) = (ray.event(), ray.v().clone());
            let mut rng = ray_rng(s.seed, i);
            let init = random_lightray_init(model, &x, &v, &mut rng, false).map_err(&err)?;
            let t1 = sp.1.clamp(0.25, 1.0);
            let (c, mut cb) =
                conformal_class_pair(model, sigma, &x, &v, &init, t1, s.integrator.n_steps).map_err(&err)?;
            cb.x = c.x.clone();
            let bar = model.conformal_rescale(Expr::parse(sigma).map_err(&err)?);
            let geo = chart_to_ray(ray, sp, n).map_err(&err)?;
            Ok(RayWork {
                rays: geodesic_rows(i, &geo),
                jacobi: Vec::new(),
                values: vec![
                    class_distance(&c, &cb).map_err(&err)?,
                    conformal_hyperplane_check(ray, &bar).map_err(&err)?,
                ],
            })
        })
        .collect()
}

fn contact_suite(s: &Scenario, rays: &[LightRay]) -> CliResult<Vec<RayWork>> {
    let err = in_scenario(s);
    let flat3 = is_flat(&s.metric) && s.model()?.dim() == 3;
    let target = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    rays.par_iter()
        .enumerate()
        .map(|(i, ray)| {
            let m = ray.model().dim();
            let frame = contact_frame(ray).map_err(&err)?;
            let nd = nondegeneracy_report(&frame, s.tolerances.contact);
            let size_mismatch = (frame.len() != 2 * m - 4) as usize as f64;
            let theta = frame.max_theta0(ray).map_err(&err)?;
            let mut rng = ray_rng(s.seed, i);
            let c1 = random_class(ray, &mut rng, true).map_err(&err)?;
            let c2 = random_class(ray, &mut rng, true).map_err(&err)?;
            let g = ray.model().eval_metric(&ray.event()).map_err(&err)?;
            let w = omega0(ray, &c1, &c2).map_err(&err)?;
            let th = theta0(ray, &c1).map_err(&err)?;
            let v = ray.v();
            let mut gauge = 0.0f64;
            for a in [-1.0, 0.7] {
                for b in [-1.0, 0.7] {
                    let r1 = (&c1.w0 + v * a, &c1.w0dot + v * b);
                    let r2 = (&c2.w0 + v * b, &c2.w0dot + v * a);
                    gauge = gauge.max((omega0_from_representatives(&g, (&r1.0, &r1.1), (&r2.0, &r2.1)) - w).abs());
                    gauge = gauge.max((v.dot(&(&g * &r1.0)) - th).abs());
                }
            }
            let flat_gram = if flat3 {
                if frame.gram.shape() == (2, 2) {
                    (&frame.gram - &target).amax()
                } else {
                    f64::INFINITY
                }
            } else {
                0.0
            };
            let geo = chart_to_ray(ray, (0.0, 1.0), s.integrator.steps_for((0.0, 1.0))).map_err(&err)?;
            Ok(RayWork {
                rays: geodesic_rows(i, &geo),
                jacobi: Vec::new(),
                values: vec![nd.min_singular, size_mismatch, theta, gauge, flat_gram],
            })
        })
        .collect()
}

fn reduction_suite(s: &Scenario, rays: &[LightRay], chart: &CauchyChart) -> CliResult<Vec<RayWork>> {
    let err = in_scenario(s);
    rays.par_iter()
        .enumerate()
        .map(|(i, ray)| {
            let model = ray.model();
            let m = model.dim();
            let (x, v) = (ray.event(), ray.v().clone());
            let mut rng = ray_rng(s.seed, i);
            let spray = spray_kernel_check(model, &x, &v, 20, rng.random()).map_err(&err)?;
            let ham: Vec<f64> = [2e-3, 1e-3, 5e-4]
                .iter()
                .map(|d| hamiltonian_intertwine_check(model, &x, &v, *d).map(|r| r.r_x))
                .collect::<Result<_, _>>()
                .map_err(&err)?;
            // Pairs already exact to rounding carry no order information.
            let order = ham
                .windows(2)
                .filter(|w| w[0] > 1e-12)
                .map(|w| observed_order(w[0], w[1], 2.0))
                .fold(f64::INFINITY, f64::min);
            let mut liouville = 0.0f64;
            for s in [0.1, 0.5] {
                liouville = liouville.max(liouville_check(model, &x, &v, s).map_err(&err)?);
            }
            let coords = lightray_core::lightrays::ray_coords(ray).map_err(&err)?.values;
            let d: Vec<f64> = (0..coords.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dx = Vector::from_fn(m, |k, _| if k == 0 { 0.0 } else { d[k - 1] });
            let curve = {
                let (c0, d) = (coords.clone(), d.clone());
                ray_curve(chart, move |t| c0.iter().zip(&d).map(|(c, d)| c + t * d).collect())
            };
            let cls = tangent_from_ray_curve(chart, &curve, s.integrator.ds.min(lightray_core::defaults::DS_CHART))
                .map_err(&err)?;
            let chain = theta_g(model, &TMTangent::new(x.clone(), v.clone(), dx, Vector::zeros(m))).map_err(&err)?;
            let two_path = (chain - theta0(ray, &cls).map_err(&err)?).abs();
            Ok(RayWork {
                rays: Vec::new(),
                jacobi: Vec::new(),
                values: vec![spray.residual, spray.control, ham[2], order, liouville, two_path],
            })
        })
        .collect()
}

fn column(work: &[RayWork], k: usize) -> impl Iterator<Item = f64> + '_ {
    work.iter().map(move |w| w.values[k])
}

/// Runs a scenario without touching the file system.
pub fn execute(s: &Scenario) -> CliResult<Outcome> {
    s.validate()?;
    let start = Instant::now();
    let tol: &Tolerances = &s.tolerances;
    let model = s.model()?;
    let m = model.dim();
    let mut section = None;
    let (records, work) = if s.kind == ScenarioKind::NonhausdorffDemo {
        let demo = crate::demo::nonhausdorff_demo(s)?;
        section = Some(demo.section);
        let work = vec![RayWork {
            rays: demo.rays.rows,
            ..RayWork::default()
        }];
        (demo.records, work)
    } else {
        let chart = s.chart()?;
        let rays = scenario_rays(s, &chart)?;
        let n = rays.len();
        let inputs = format!("{} rays, seed {}", n, s.seed);
        let inputs = inputs.as_str();
        match s.kind {
            ScenarioKind::GeodesicDemo => {
                let w = geodesic_demo(s, &rays)?;
                let mut r = vec![
                    meta("geodesic.drift", "geodesics", "relative null drift").record(
                        inputs,
                        max_of(column(&w, 0)),
                        tol.null_drift,
                        Comparison::AtMost,
                        n,
                    ),
                    meta("geodesic.future", "geodesics", "minimum of -g(v,T) along the rays").record(
                        inputs,
                        min_of(column(&w, 1)),
                        0.0,
                        Comparison::Above,
                        n,
                    ),
                ];
                if is_flat(&s.metric) {
                    r.push(meta("geodesic.flat", "geodesics", "deviation from straight lines").record(
                        inputs,
                        max_of(column(&w, 2)),
                        tol.flat,
                        Comparison::AtMost,
                        n,
                    ));
                }
                (r, w)
            }
            ScenarioKind::JacobiSuite => {
                let w = jacobi_suite(s, &rays)?;
                let mut r = vec![
                    meta("jacobi.pairing", "jacobi", "residual of the affine fit of the pairing").record(
                        inputs,
                        max_of(column(&w, 0)),
                        tol.pairing,
                        Comparison::AtMost,
                        2 * n,
                    ),
                    meta("jacobi.lightray", "jacobi", "pairing slope of light-ray data").record(
                        inputs,
                        max_of(column(&w, 1)),
                        lightray_core::jacobi::lightray_tolerance(0.0),
                        Comparison::AtMost,
                        n,
                    ),
                ];
                if is_flat(&s.metric) {
                    r.push(meta("jacobi.flat", "jacobi", "deviation from J = u + t w").record(
                        inputs,
                        max_of(column(&w, 2)),
                        tol.flat,
                        Comparison::AtMost,
                        2 * n,
                    ));
                }
                (r, w)
            }
            ScenarioKind::ConformalInvariance => {
                let w = conformal_invariance(s, &rays)?;
                let r = vec![
                    meta("conformal.class", "jacobi", "class distance across the conformal change").record(
                        inputs,
                        max_of(column(&w, 0)),
                        tol.class,
                        Comparison::AtMost,
                        n,
                    ),
                    meta("conformal.hyperplane", "contact", "hyperplane change under the conformal change").record(
                        inputs,
                        max_of(column(&w, 1)),
                        tol.hyperplane,
                        Comparison::AtMost,
                        n,
                    ),
                ];
                (r, w)
            }
            ScenarioKind::ContactSuite => {
                let w = contact_suite(s, &rays)?;
                let mut r = vec![
                    meta("contact.min_sv", "contact", "smallest singular value of the frame gram").record(
                        inputs,
                        min_of(column(&w, 0)),
                        tol.contact,
                        Comparison::Above,
                        n,
                    ),
                    meta("contact.size", "contact", "frames whose size is not 2m-4").record(
                        inputs,
                        column(&w, 1).sum(),
                        0.0,
                        Comparison::Equal,
                        n,
                    ),
                    meta("contact.theta", "contact", "tautological form on the frame").record(
                        inputs,
                        max_of(column(&w, 2)),
                        tol.hyperplane,
                        Comparison::AtMost,
                        n,
                    ),
                    meta("contact.gauge", "contact", "dependence of the forms on the representative").record(
                        inputs,
                        max_of(column(&w, 3)),
                        tol.gauge,
                        Comparison::AtMost,
                        n,
                    ),
                ];
                if is_flat(&s.metric) && m == 3 {
                    r.push(meta("contact.flat_gram", "contact", "deviation from the standard symplectic matrix").record(
                        inputs,
                        max_of(column(&w, 4)),
                        tol.hyperplane,
                        Comparison::AtMost,
                        n,
                    ));
                }
                (r, w)
            }
            ScenarioKind::ReductionSuite => {
                let w = reduction_suite(s, &rays, &chart)?;
                let mut r = vec![
                    meta("reduction.spray", "contact", "spray against the kernel of the restricted form").record(
                        inputs,
                        max_of(column(&w, 0)),
                        tol.spray,
                        Comparison::AtMost,
                        20 * n,
                    ),
                    meta("reduction.control", "contact", "samples pushed off the cone are detected").record(
                        inputs,
                        min_of(column(&w, 1)),
                        tol.control,
                        Comparison::AtLeast,
                        20 * n,
                    ),
                    meta("reduction.hamiltonian", "contact", "lowering carries the spray to the Hamiltonian field")
                        .record(inputs, max_of(column(&w, 2)), tol.hamiltonian, Comparison::AtMost, n),
                    meta("reduction.liouville", "contact", "fibre scaling multiplies the symplectic form").record(
                        inputs,
                        max_of(column(&w, 4)),
                        tol.liouville,
                        Comparison::AtMost,
                        2 * n,
                    ),
                    meta("reduction.two_path", "contact", "tautological form against the Jacobi formula").record(
                        inputs,
                        max_of(column(&w, 5)),
                        tol.two_path,
                        Comparison::AtMost,
                        n,
                    ),
                ];
                let order = min_of(column(&w, 3));
                if order.is_finite() {
                    r.push(meta("reduction.order", "contact", "order of the Hamiltonian pushforward residual").record(
                        inputs,
                        order,
                        tol.order,
                        Comparison::AtLeast,
                        n,
                    ));
                }
                (r, w)
            }
            ScenarioKind::NonhausdorffDemo => unreachable!("handled above"),
        }
    };
    let mut report = Report::new(s.kind.as_str(), Some(s.clone()), records);
    report.nonhausdorff = section;
    report.wall_time_s = start.elapsed().as_secs_f64();
    let mut rays = RayTable { m, rows: Vec::new() };
    let mut jacobi = JacobiTable { m, rows: Vec::new() };
    for w in work {
        rays.rows.extend(w.rays);
        jacobi.rows.extend(w.jacobi);
    }
    Ok(Outcome { report, rays, jacobi })
}

/// Loads, runs and writes a scenario; `seed` overrides the file's seed.
pub fn run_scenario(path: &Path, out: &Path, seed: Option<u64>) -> CliResult<Report> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let mut outcome = execute(&scenario)?;
    std::fs::create_dir_all(out)?;
    write_rays(&out.join(RAYS_FILE), &outcome.rays)?;
    write_jacobi(&out.join(JACOBI_FILE), &outcome.jacobi)?;
    write_residuals(&out.join(RESIDUALS_FILE), &outcome.report.records)?;
    outcome.report.artifacts = [REPORT_FILE, RAYS_FILE, JACOBI_FILE, RESIDUALS_FILE].map(String::from).to_vec();
    std::fs::write(out.join(REPORT_FILE), outcome.report.to_json()?)?;
    Ok(outcome.report)
}

/// The full invariant matrix, the mutation controls and the acceptance
/// criteria, with the coverage manifest asserted first.
pub fn check_all_report(seed: u64) -> CliResult<Report> {
    let start = Instant::now();
    let ctx = CheckContext::new(seed);
    let mut records = run_matrix(&ctx)?;
    records.extend(mutation_controls(&ctx));
    records.extend(acceptance_records(&ctx));
    let mut report = Report::new("check_all", None, records);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn check_all(out: &Path) -> CliResult<Report> {
    let mut report = check_all_report(CHECK_ALL_SEED)?;
    std::fs::create_dir_all(out)?;
    write_residuals(&out.join(RESIDUALS_FILE), &report.records)?;
    report.artifacts = [REPORT_FILE, RESIDUALS_FILE].map(String::from).to_vec();
    std::fs::write(out.join(REPORT_FILE), report.to_json()?)?;
    Ok(report)
}

fn base_scenario(name: &str, kind: ScenarioKind, metric: MetricSpec, seed: u64) -> Scenario {
    Scenario {
        name: name.into(),
        kind,
        seed,
        metric,
        chart: None,
        integrator: IntegratorSpec::default(),
        tolerances: Tolerances::default(),
        rays: RaySpec::default(),
        conformal: None,
    }
}

/// Small contact scenario used for the determinism check.
pub fn sample_scenario(seed: u64) -> Scenario {
    let mut s = base_scenario(
        "determinism",
        ScenarioKind::ContactSuite,
        MetricSpec::ConformalFlat {
            m: 3,
            sigma: curved_sigma(3).into(),
        },
        seed,
    );
    s.rays.count = Some(4);
    s
}

pub fn nonhausdorff_scenario() -> Scenario {
    base_scenario("punctured plane", ScenarioKind::NonhausdorffDemo, MetricSpec::PuncturedMinkowski2, 0)
}

pub fn list_metrics() -> String {
    catalog()
        .iter()
        .map(|(name, params, about)| format!("{name:<22} {params:<48} {about}\n"))
        .collect()
}
