//! Punctured 2D Minkowski: rays `s ↦ (s, τ + s)` converge, as `τ → 0`, to
//! the broken line through the removed event, which splits into two
//! maximal segments meeting at `s = 1`.

use lightray_core::geodesics::integrate_geodesic;
use lightray_core::lightrays::{ray_coords, ray_to_chart};
use lightray_core::spacetime::{CoordBox, MetricSpec};
use lightray_core::{CauchyChart, Error, NullGeodesic, SpacetimeModel, Termination, Vector};

use crate::error::{CliError, CliResult};
use crate::report::{CheckMeta, Comparison, DemoRay, DemoSection, RayTable, Record};
use crate::scenario::Scenario;

/// Parameter window `s ∈ [−1, 3]` covered by every ray.
pub const WINDOW: [f64; 2] = [-1.0, 3.0];
pub const LEVELS: u32 = 12;
/// Heights of the two slices on which chart coordinates are compared.
pub const SLICES: [f64; 2] = [0.0, 2.0];

/// Allowed distance of the split point of the limit segments from `s = 1`.
const SPLIT_TOL: f64 = 1e-3;

const SEGMENTS: CheckMeta = CheckMeta {
    id: "NH.segments",
    module: "cli",
    statement: "the limit line splits into exactly two maximal segments",
};
const SPLIT: CheckMeta = CheckMeta {
    id: "NH.split",
    module: "cli",
    statement: "limit segments end within 1e-3 of s = 1",
};
const SINGLE: CheckMeta = CheckMeta {
    id: "NH.single",
    module: "cli",
    statement: "rays with tau > 0 are single segments with no exclusion hit",
};
const DISJOINT: CheckMeta = CheckMeta {
    id: "NH.disjoint",
    module: "cli",
    statement: "neither limit segment reaches the slice where the other is the limit",
};
const GAP0: CheckMeta = CheckMeta {
    id: "NH.gap0",
    module: "cli",
    statement: "chart gap to the first limit segment on x0 = 0, minus tau",
};
const GAP2: CheckMeta = CheckMeta {
    id: "NH.gap2",
    module: "cli",
    statement: "chart gap to the second limit segment on x0 = 2, minus tau",
};

pub struct DemoOutcome {
    pub section: DemoSection,
    pub records: Vec<Record>,
    pub rays: RayTable,
}

fn exclusion_t(term: Termination) -> Option<f64> {
    match term {
        Termination::ExclusionHit { t, .. } => Some(t),
        _ => None,
    }
}

/// Parameter range in `s` of an integrated segment whose initial point sits
/// at `s = s0`, using the exact hit parameter when a side was cut short.
fn segment(geo: &NullGeodesic, s0: f64) -> [f64; 2] {
    let lo = exclusion_t(geo.backward_termination()).unwrap_or(geo.first().t);
    let hi = exclusion_t(geo.forward_termination()).unwrap_or(geo.last().t);
    [s0 + lo, s0 + hi]
}

fn hits(geo: &NullGeodesic) -> usize {
    [geo.forward_termination(), geo.backward_termination()]
        .iter()
        .filter(|t| exclusion_t(**t).is_some())
        .count()
}

fn slice_chart(model: &SpacetimeModel, c0: f64) -> CliResult<CauchyChart> {
    let d = model.domain();
    let region = CoordBox::new(d.lo.clone(), d.hi.clone()).map_err(module_err)?;
    CauchyChart::build(model, region, c0).map_err(module_err)
}

fn module_err(e: Error) -> CliError {
    CliError::Module {
        scenario: "nonhausdorff_demo".into(),
        source: e,
    }
}

/// Chart coordinate of the geodesic on `chart`, or `None` if it never
/// reaches the slice.
fn slice_coord(chart: &CauchyChart, geo: &NullGeodesic) -> CliResult<Option<(f64, i8)>> {
    match ray_to_chart(chart, geo) {
        Ok(ray) => {
            let c = ray_coords(&ray).map_err(module_err)?;
            Ok(Some((c.values[0], c.branch)))
        }
        Err(Error::NoCrossing { .. }) => Ok(None),
        Err(e) => Err(module_err(e)),
    }
}

fn gap(a: Option<(f64, i8)>, b: Option<(f64, i8)>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if a.1 == b.1 => Some((a.0 - b.0).abs()),
        (Some(_), Some(_)) => Some(f64::INFINITY),
        _ => None,
    }
}

pub fn nonhausdorff_demo(scenario: &Scenario) -> CliResult<DemoOutcome> {
    if scenario.metric != MetricSpec::PuncturedMinkowski2 {
        return Err(CliError::WrongMetric {
            scenario: scenario.name.clone(),
            expected: MetricSpec::PuncturedMinkowski2.kind().into(),
            found: scenario.metric.kind().into(),
        });
    }
    let model = scenario.model()?;
    let len = WINDOW[1] - WINDOW[0];
    let n = scenario.integrator.steps_for((0.0, len));
    let v = Vector::from_vec(vec![1.0, 1.0]);
    let charts = [slice_chart(&model, SLICES[0])?, slice_chart(&model, SLICES[1])?];
    let mut table = RayTable { m: 2, rows: Vec::new() };
    let mut push_rows = |ray: usize, seg: usize, geo: &NullGeodesic, s0: f64| {
        for node in geo.nodes() {
            table.rows.push((ray, seg, s0 + node.t, node.x.iter().copied().collect(), node.v.iter().copied().collect()));
        }
    };

    // Limit line: forward from the window start, backward from its end.
    let start = Vector::from_vec(vec![WINDOW[0], WINDOW[0]]);
    let end = Vector::from_vec(vec![WINDOW[1], WINDOW[1]]);
    let mu1 = integrate_geodesic(&model, &start, &v, (0.0, len), n).map_err(module_err)?;
    let mu2 = integrate_geodesic(&model, &end, &v, (-len, 0.0), n).map_err(module_err)?;
    push_rows(0, 0, &mu1, WINDOW[0]);
    push_rows(0, 1, &mu2, WINDOW[1]);
    let mut limit_segments = Vec::new();
    let mut limit_hits = 0;
    for (geo, s0) in [(&mu1, WINDOW[0]), (&mu2, WINDOW[1])] {
        limit_hits += hits(geo);
        let seg = segment(geo, s0);
        if !limit_segments.contains(&seg) {
            limit_segments.push(seg);
        }
    }
    let mu_coords = [slice_coord(&charts[0], &mu1)?, slice_coord(&charts[1], &mu2)?];
    let crossed = [slice_coord(&charts[1], &mu1)?, slice_coord(&charts[0], &mu2)?];
    let mut rays = vec![DemoRay {
        label: "limit".into(),
        tau: 0.0,
        segments: limit_segments.clone(),
        exclusion_hits: limit_hits,
        coord_slice0: mu_coords[0].map(|c| c.0),
        coord_slice2: mu_coords[1].map(|c| c.0),
        gap_slice0: None,
        gap_slice2: None,
    }];

    let mut non_single = 0usize;
    let mut excess = [f64::NEG_INFINITY; 2];
    for k in 1..=LEVELS {
        let tau = 2f64.powi(-(k as i32));
        let p = Vector::from_vec(vec![WINDOW[0], WINDOW[0] + tau]);
        let geo = integrate_geodesic(&model, &p, &v, (0.0, len), n).map_err(module_err)?;
        push_rows(k as usize, 0, &geo, WINDOW[0]);
        let seg = segment(&geo, WINDOW[0]);
        let h = hits(&geo);
        if h > 0 || !geo.forward_termination().is_interval_end() {
            non_single += 1;
        }
        let c = [slice_coord(&charts[0], &geo)?, slice_coord(&charts[1], &geo)?];
        let gaps = [gap(c[0], mu_coords[0]), gap(c[1], mu_coords[1])];
        for (e, g) in excess.iter_mut().zip(gaps) {
            *e = e.max(g.map_or(f64::INFINITY, |g| g - tau));
        }
        rays.push(DemoRay {
            label: format!("tau_{k}"),
            tau,
            segments: vec![seg],
            exclusion_hits: h,
            coord_slice0: c[0].map(|c| c.0),
            coord_slice2: c[1].map(|c| c.0),
            gap_slice0: gaps[0],
            gap_slice2: gaps[1],
        });
    }

    let split = limit_segments
        .iter()
        .flat_map(|s| s.iter().copied().filter(|e| !WINDOW.contains(e)))
        .map(|e| (e - 1.0).abs())
        .fold(if limit_segments.len() == 2 { 0.0 } else { f64::INFINITY }, f64::max);
    let inputs = format!("tau = 2^-1 .. 2^-{LEVELS}, window {WINDOW:?}, {n} steps");
    // Chart coordinates of straight lines are exact up to rounding, so the
    // gap is compared with tau plus a rounding allowance.
    let rounding = scenario.tolerances.flat;
    let records = vec![
        SEGMENTS.record(&inputs, limit_segments.len() as f64, 2.0, Comparison::Equal, 2),
        SPLIT.record(&inputs, split, SPLIT_TOL, Comparison::AtMost, 2),
        DISJOINT.record(&inputs, crossed.iter().filter(|c| c.is_some()).count() as f64, 0.0, Comparison::Equal, 2),
        SINGLE.record(&inputs, non_single as f64, 0.0, Comparison::Equal, LEVELS as usize),
        GAP0.record(&inputs, excess[0], rounding, Comparison::AtMost, LEVELS as usize),
        GAP2.record(&inputs, excess[1], rounding, Comparison::AtMost, LEVELS as usize),
    ];
    Ok(DemoOutcome {
        section: DemoSection {
            window: WINDOW,
            limit_segments,
            rays,
        },
        records,
        rays: table,
    })
}
