//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use lightray_core::expr::Expr;
use lightray_core::numeric::gauss_legendre;
use lightray_core::spacetime::{conformal_flat, minkowski_matrix, Christoffel};
use lightray_core::{SpacetimeModel, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec_in(rng: &mut ChaCha8Rng, m: usize, half: f64) -> Vector {
    Vector::from_fn(m, |_, _| rng.random_range(-half..half))
}

/// Curved fixtures: conformally flat metrics with nontrivial curvature.
pub fn curved(m: usize) -> SpacetimeModel {
    let sigma = match m {
        2 => "0.2*sin(x1) + 0.1*x0",
        3 => "0.2*sin(x1) + 0.15*sin(x2 + 0.5*x0)",
        _ => "0.2*sin(x1) + 0.15*sin(x2 + 0.5*x0) - 0.15*cos(x3)",
    };
    conformal_flat(m, Expr::parse(sigma).unwrap()).unwrap()
}

/// Conformal connection of `e^{2σ}η` written out from the gradient of σ
/// evaluated by hand, without the model's analytic path.
pub fn conformal_christoffel_oracle(m: usize, grad: &[f64]) -> Christoffel {
    let eta = minkowski_matrix(m);
    let mut out = Christoffel::zeros(m);
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let mut val = 0.0;
                if k == i {
                    val += grad[j];
                }
                if k == j {
                    val += grad[i];
                }
                val -= eta[(i, j)] * eta[(k, k)] * grad[k];
                out.set(k, i, j, val);
            }
        }
    }
    out
}

/// Full tensor `R^l_{kij} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik} + Γ^l_{ip}Γ^p_{jk} − Γ^l_{jp}Γ^p_{ik}`
/// with coordinate derivatives of Γ by central differences.
pub fn riemann_tensor(model: &SpacetimeModel, x: &Vector, h: f64) -> Vec<f64> {
    let m = model.dim();
    let g0 = model.christoffel(x).unwrap();
    let dgamma: Vec<Christoffel> = (0..m)
        .map(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (a, b) = (model.christoffel(&xp).unwrap(), model.christoffel(&xm).unwrap());
            let mut d = Christoffel::zeros(m);
            for k in 0..m {
                for p in 0..m {
                    for q in 0..m {
                        d.set(k, p, q, (a.get(k, p, q) - b.get(k, p, q)) / (2.0 * h));
                    }
                }
            }
            d
        })
        .collect();
    let idx = |l: usize, k: usize, i: usize, j: usize| ((l * m + k) * m + i) * m + j;
    let mut r = vec![0.0; m * m * m * m];
    for l in 0..m {
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut val = dgamma[i].get(l, j, k) - dgamma[j].get(l, i, k);
                    for p in 0..m {
                        val += g0.get(l, i, p) * g0.get(p, j, k) - g0.get(l, j, p) * g0.get(p, i, k);
                    }
                    r[idx(l, k, i, j)] = val;
                }
            }
        }
    }
    r
}

/// `R(X,Y)Z` contracted from the full tensor.
pub fn contract_riemann(r: &[f64], m: usize, xv: &Vector, yv: &Vector, zv: &Vector) -> Vector {
    let idx = |l: usize, k: usize, i: usize, j: usize| ((l * m + k) * m + i) * m + j;
    Vector::from_fn(m, |l, _| {
        let mut s = 0.0;
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    s += r[idx(l, k, i, j)] * zv[k] * xv[i] * yv[j];
                }
            }
        }
        s
    })
}

/// `θ_g = g_ij(x) v^i dx^j` integrated around the parallelogram spanned by
/// `ε ξ₁, ε ξ₂` centred at `(x, v)`, divided by `−ε²`.
pub fn stokes_omega(model: &SpacetimeModel, x: &Vector, v: &Vector, xi1: (&Vector, &Vector), xi2: (&Vector, &Vector), eps: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(4);
    let point = |a: f64, b: f64| {
        (
            x + xi1.0 * (a * eps) + xi2.0 * (b * eps),
            v + xi1.1 * (a * eps) + xi2.1 * (b * eps),
        )
    };
    let theta = |a: f64, b: f64, dx: &Vector| {
        let (px, pv) = point(a, b);
        let g = model.eval_metric(&px).unwrap();
        pv.dot(&(&g * dx))
    };
    // Edges of [-1/2, 1/2]^2 traversed counterclockwise.
    let edges: [((f64, f64), (f64, f64)); 4] = [
        ((-0.5, -0.5), (1.0, 0.0)),
        ((0.5, -0.5), (0.0, 1.0)),
        ((0.5, 0.5), (-1.0, 0.0)),
        ((-0.5, 0.5), (0.0, -1.0)),
    ];
    let mut total = 0.0;
    for ((a0, b0), (da, db)) in edges {
        let dx = (xi1.0 * da + xi2.0 * db) * eps;
        for (n, w) in nodes.iter().zip(&weights) {
            let s = 0.5 * (n + 1.0);
            total += 0.5 * w * theta(a0 + s * da, b0 + s * db, &dx);
        }
    }
    -total / (eps * eps)
}

/// A uniformly placed ray over the slice with a random direction.
pub fn random_ray(chart: &lightray_core::CauchyChart, rng: &mut ChaCha8Rng) -> lightray_core::LightRay {
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
    lightray_core::lightrays::coords_to_ray(chart, &lightray_core::RayCoords { values, branch: 1 }).unwrap()
}
