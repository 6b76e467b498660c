//! Acceptance criteria A1..A10. Each criterion yields one primary record
//! (`A<n>`) and possibly secondary ones (`A<n>.<what>`); a criterion passes
//! when all of its records do.

use std::time::Instant;

use lightray_core::contact::{contact_frame, hamiltonian_intertwine_check, liouville_check};
use lightray_core::geodesics::{geodesic_residual, integrate_geodesic, make_null_from_vector, reparametrize_to_geodesic};
use lightray_core::jacobi::integrate_jacobi;
use lightray_core::lightrays::ray_coords;
use lightray_core::numeric::observed_orders;
use lightray_core::{JacobiInit, Matrix, Result, Vector};

use crate::checks::{
    conformal_sweep, nondegeneracy_sweep, oracle_errors, pairing_sweep, spray_sweep, two_path_sweep, CheckContext,
};
use crate::fixtures::{chart, curved, flat, random_ray, vec_in};
use crate::oracles::{affine_parameter, exponential_pregeodesic, flat_geodesic, flat_jacobi};
use crate::report::{CheckMeta, Comparison, Record};

pub const CRITERIA: [&str; 10] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"];

const fn meta(id: &'static str, statement: &'static str) -> CheckMeta {
    CheckMeta {
        id,
        module: "acceptance",
        statement,
    }
}

/// Whether `record` belongs to criterion `id` (so `A1` does not claim `A10`).
pub fn belongs_to(record: &Record, id: &str) -> bool {
    record.check_id == id || record.check_id.strip_prefix(id).is_some_and(|r| r.starts_with('.'))
}

fn guarded(meta: CheckMeta, f: impl FnOnce() -> Result<Vec<Record>>) -> Vec<Record> {
    f().unwrap_or_else(|e| vec![meta.failed(&e.to_string())])
}

fn a1(ctx: &CheckContext) -> Vec<Record> {
    let m1 = meta("A1", "flat null geodesics and Jacobi fields match closed forms");
    guarded(m1, || {
        let start = Instant::now();
        let mut worst = 0.0f64;
        let mut count = 0;
        for m in [2usize, 3, 4] {
            let model = flat(m);
            let mut rng = ctx.rng("A1", m as u64);
            for _ in 0..5 {
                let p = vec_in(&mut rng, m, 1.0);
                let v = make_null_from_vector(&model, &p, &vec_in(&mut rng, m, 1.0))?;
                let span = (-1.0, 1.5);
                let geo = integrate_geodesic(&model, &p, &v, span, ctx.steps(span))?;
                for n in geo.nodes() {
                    worst = worst.max((flat_geodesic(&p, &v, n.t) - &n.x).amax());
                    worst = worst.max((&v - &n.v).amax());
                }
                let (u, w) = (vec_in(&mut rng, m, 1.0), vec_in(&mut rng, m, 1.0));
                let field = integrate_jacobi(&geo, &JacobiInit::new(u.clone(), w.clone()))?;
                for s in field.samples() {
                    let (j, p) = flat_jacobi(&u, &w, s.t);
                    worst = worst.max((j - &s.j).amax()).max((p - &s.p).amax());
                }
                count += 1;
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        let inputs = "minkowski m=2/3/4, 5 rays each, span [-1, 1.5]";
        Ok(vec![
            m1.record(inputs, worst, ctx.tol.flat, Comparison::AtMost, count),
            meta("A1.runtime", "wall time of the flat sweep in seconds").record(
                inputs,
                elapsed,
                1.0,
                Comparison::AtMost,
                count,
            ),
        ])
    })
}

fn a2(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A2", "pairing of Jacobi fields with the tangent is affine");
    guarded(m, || {
        let worst = pairing_sweep(ctx, "A2", 100)?;
        Ok(vec![m.record("100 triples on conformal m=3/4", worst, ctx.tol.pairing, Comparison::AtMost, 100)])
    })
}

fn a3(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A3", "variation oracle converges at second order");
    guarded(m, || {
        let steps = [2e-2, 1e-2, 5e-3, 2.5e-3];
        let mut orders = Vec::new();
        let mut finest = 0.0f64;
        for dim in [3usize, 4] {
            let errors = oracle_errors(ctx, &curved(dim), &steps)?;
            orders.extend(observed_orders(&errors, 2.0));
            finest = finest.max(errors[3]);
        }
        let inputs = "rotation families on conformal m=3/4, ds = 2e-2 .. 2.5e-3";
        Ok(vec![
            m.record(inputs, orders.iter().copied().fold(f64::INFINITY, f64::min), ctx.tol.order, Comparison::AtLeast, orders.len()),
            meta("A3.abs", "oracle agreement at ds = 2.5e-3").record(inputs, finest, ctx.tol.oracle, Comparison::AtMost, 2),
        ])
    })
}

fn a4(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A4", "classes agree across a conformal change");
    guarded(m, || {
        let worst = conformal_sweep(ctx, "A4", 20)?;
        Ok(vec![m.record("20 fixtures on conformal m=3/4", worst, ctx.tol.class, Comparison::AtMost, 20)])
    })
}

fn a5(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A5", "reparametrization reproduces the closed-form affine parameters");
    guarded(m, || {
        let model = flat(3);
        let p = Vector::from_vec(vec![0.2, -0.1, 0.3]);
        let v = Vector::from_vec(vec![1.0, 0.6, 0.8]);
        let mut tau_err = 0.0f64;
        let mut residual = 0.0f64;
        for c in [0.0, 0.5] {
            let pre = exponential_pregeodesic(&p, &v, c, 400);
            let (tau, geo) = reparametrize_to_geodesic(&model, &pre)?;
            for (s, tau) in pre.samples.iter().zip(&tau) {
                tau_err = tau_err.max((tau - affine_parameter(c, s.t)).abs());
            }
            residual = residual.max(geodesic_residual(&model, geo.nodes())?);
        }
        let inputs = "straight null line with speed exp(ct), c = 0/0.5, 400 intervals";
        Ok(vec![
            m.record(inputs, tau_err, 1e-8, Comparison::AtMost, 2),
            meta("A5.residual", "geodesic residual after reparametrization").record(
                inputs,
                residual,
                ctx.tol.geodesic,
                Comparison::AtMost,
                2,
            ),
        ])
    })
}

fn a6(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A6", "symplectic gram of contact frames is nondegenerate");
    guarded(m, || {
        let (min_sv, _, _) = nondegeneracy_sweep(ctx, "A6", 20)?;
        let model = flat(3);
        let ch = chart(&model);
        let mut rng = ctx.rng("A6.flat", 0);
        let target = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let frame = contact_frame(&random_ray(&ch, &mut rng)?)?;
            worst = worst.max(if frame.gram.shape() == (2, 2) { (&frame.gram - &target).amax() } else { f64::INFINITY });
        }
        Ok(vec![
            m.record("flat and conformal m=3/4, 20 rays each", min_sv, ctx.tol.contact, Comparison::Above, 80),
            meta("A6.flat_gram", "flat m=3 gram is the standard symplectic matrix").record(
                "minkowski m=3, 20 rays",
                worst,
                1e-10,
                Comparison::AtMost,
                20,
            ),
        ])
    })
}

fn a7(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A7", "chart coordinates have length 2m-3 and contact frames size 2m-4");
    guarded(m, || {
        let mut mismatches = 0;
        let mut count = 0;
        for model in [flat(3), flat(4), curved(3), curved(4)] {
            let dim = model.dim();
            let ch = chart(&model);
            let mut rng = ctx.rng("A7", count as u64);
            for _ in 0..10 {
                let ray = random_ray(&ch, &mut rng)?;
                if ray_coords(&ray)?.len() != 2 * dim - 3 || contact_frame(&ray)?.len() != 2 * dim - 4 {
                    mismatches += 1;
                }
                count += 1;
            }
        }
        Ok(vec![m.record("flat and conformal m=3/4, 10 rays each", mismatches as f64, 0.0, Comparison::Equal, count)])
    })
}

fn a8(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A8", "spray is characteristic on the null cone bundle");
    guarded(m, || {
        let (residual, control) = spray_sweep(ctx, "A8", 5)?;
        let model = curved(3);
        let mut rng = ctx.rng("A8.hamiltonian", 0);
        let mut r_x = 0.0f64;
        let mut order = f64::INFINITY;
        let mut liouville = 0.0f64;
        for _ in 0..10 {
            let (x, v) = crate::fixtures::random_state(&model, &mut rng)?;
            let res = [2e-3, 1e-3, 5e-4]
                .iter()
                .map(|d| Ok(hamiltonian_intertwine_check(&model, &x, &v, *d)?.r_x))
                .collect::<Result<Vec<f64>>>()?;
            r_x = r_x.max(res[2]);
            order = observed_orders(&res, 2.0).into_iter().fold(order, f64::min);
            for s in [0.1, 0.5] {
                liouville = liouville.max(liouville_check(&model, &x, &v, s)?);
            }
        }
        let inputs = "spray on conformal m=3/4, Hamiltonian and Liouville on conformal m=3";
        Ok(vec![
            m.record(inputs, residual, ctx.tol.spray, Comparison::AtMost, 10),
            meta("A8.control", "samples pushed off the cone are detected").record(
                inputs,
                control,
                ctx.tol.control,
                Comparison::AtLeast,
                10,
            ),
            meta("A8.hamiltonian", "lowering carries the spray to the Hamiltonian field at delta = 5e-4").record(
                inputs,
                r_x,
                ctx.tol.hamiltonian,
                Comparison::AtMost,
                10,
            ),
            meta("A8.order", "order of the Hamiltonian pushforward residual").record(
                inputs,
                order,
                ctx.tol.order,
                Comparison::AtLeast,
                20,
            ),
            meta("A8.liouville", "fibre scaling pulls the symplectic form back to a multiple").record(
                inputs,
                liouville,
                ctx.tol.liouville,
                Comparison::AtMost,
                20,
            ),
        ])
    })
}

fn a9(ctx: &CheckContext) -> Vec<Record> {
    let m = meta("A9", "tautological form and Jacobi formula agree on chart tangents");
    guarded(m, || {
        let worst = two_path_sweep(ctx, "A9", 50)?;
        Ok(vec![m.record("50 chart tangents on conformal m=3/4", worst, ctx.tol.two_path, Comparison::AtMost, 50)])
    })
}

fn a10() -> Vec<Record> {
    let m = meta("A10", "punctured plane: two limit segments, single-segment approximants");
    let scenario = crate::runner::nonhausdorff_scenario();
    match crate::demo::nonhausdorff_demo(&scenario) {
        Ok(outcome) => {
            let mut out = vec![m.record(
                "nonhausdorff demo records",
                outcome.records.iter().filter(|r| !r.pass).count() as f64,
                0.0,
                Comparison::Equal,
                outcome.records.len(),
            )];
            out.extend(outcome.records.into_iter().map(|mut r| {
                r.check_id = format!("A10.{}", r.check_id.trim_start_matches("NH."));
                r.module = "acceptance".into();
                r
            }));
            out
        }
        Err(e) => vec![m.failed(&e.to_string())],
    }
}

/// All acceptance records, computed one criterion at a time.
pub fn acceptance_records(ctx: &CheckContext) -> Vec<Record> {
    let mut out = Vec::new();
    for f in [a1, a2, a3, a4, a5, a6, a7, a8, a9] {
        out.extend(f(ctx));
    }
    out.extend(a10());
    out
}

/// One `PASS`/`FAIL` line per criterion, in order.
pub fn criterion_lines(records: &[Record]) -> Vec<(String, bool)> {
    CRITERIA
        .iter()
        .map(|id| {
            let mine: Vec<&Record> = records.iter().filter(|r| belongs_to(r, id)).collect();
            let pass = !mine.is_empty() && mine.iter().all(|r| r.pass);
            let detail = mine
                .iter()
                .map(|r| format!("{}={:.3e}", r.check_id, r.residual))
                .collect::<Vec<_>>()
                .join(" ");
            (format!("{} {id:<4} {detail}", if pass { "PASS" } else { "FAIL" }), pass)
        })
        .collect()
}
