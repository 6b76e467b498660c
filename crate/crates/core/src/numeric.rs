//! Small numerical kernels shared by the integrators and the checks.

use nalgebra::DVector;

/// Finite-difference weights for the first derivative at `x0` from
/// arbitrary distinct nodes (Fornberg's recursion).
pub fn fornberg_first_derivative(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Index window of `width` consecutive samples centred on `i` and clamped to `0..n`.
pub fn stencil_window(i: usize, n: usize, width: usize) -> std::ops::Range<usize> {
    let width = width.min(n);
    let start = i.saturating_sub(width / 2).min(n - width);
    start..start + width
}

/// Running integral `F(t_k) = ∫_{t_0}^{t_k} f`, fourth-order accurate on
/// non-uniform grids: each panel integrates the cubic through the four
/// nearest samples.
pub fn cumulative_integral(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert_eq!(n, f.len());
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    // Two-point Gauss nodes integrate the local cubic exactly.
    let g = 0.5 / 3f64.sqrt();
    for i in 0..n - 1 {
        let w = if n >= 4 {
            let start = i.saturating_sub(1).min(n - 4);
            start..start + 4
        } else {
            0..n
        };
        let (a, b) = (t[i], t[i + 1]);
        let mid = 0.5 * (a + b);
        let h = b - a;
        let mut s = 0.0;
        for &x in &[mid - g * h, mid + g * h] {
            s += lagrange_eval(&t[w.clone()], &f[w.clone()], x);
        }
        out[i + 1] = out[i] + 0.5 * h * s;
    }
    out
}

fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                l *= (x - xj) / (xi - xj);
            }
        }
        acc += l * yi;
    }
    acc
}

/// Cubic Hermite interpolation on `[t0, t1]`; returns value and derivative.
pub fn hermite(
    t0: f64,
    t1: f64,
    y0: &DVector<f64>,
    y1: &DVector<f64>,
    d0: &DVector<f64>,
    d1: &DVector<f64>,
    t: f64,
) -> (DVector<f64>, DVector<f64>) {
    let h = t1 - t0;
    if h == 0.0 {
        return (y0.clone(), d0.clone());
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h);
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let deriv = y0 * dh00 + d0 * dh10 + y1 * dh01 + d1 * dh11;
    (value, deriv)
}

/// Observed convergence order from errors at two resolutions whose step
/// ratio is `ratio` (coarse / fine).
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

/// Orders between consecutive entries of an error sequence on steps that
/// shrink by `ratio` each time.
pub fn observed_orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| observed_order(w[0], w[1], ratio))
        .collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` for a handful of orders.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => panic!("gauss_legendre: unsupported order {n}"),
    }
}

/// Maximum absolute component.
pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fornberg_reproduces_central_difference() {
        let w = fornberg_first_derivative(0.0, &[-1.0, 0.0, 1.0]);
        assert!((w[0] + 0.5).abs() < 1e-15);
        assert!(w[1].abs() < 1e-15);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fornberg_exact_on_quartics_nonuniform() {
        let nodes = [0.0, 0.13, 0.3, 0.41, 0.6];
        let x0 = 0.3;
        let w = fornberg_first_derivative(x0, &nodes);
        let f = |x: f64| 1.0 + 2.0 * x - x * x + 0.5 * x.powi(3) - 0.25 * x.powi(4);
        let df = |x: f64| 2.0 - 2.0 * x + 1.5 * x * x - x.powi(3);
        let approx: f64 = nodes.iter().zip(&w).map(|(x, c)| c * f(*x)).sum();
        assert!((approx - df(x0)).abs() < 1e-11);
    }

    #[test]
    fn cumulative_integral_exact_for_cubics() {
        let t: Vec<f64> = (0..11).map(|i| (i as f64 * 0.1).powf(1.3)).collect();
        let f: Vec<f64> = t.iter().map(|x| 1.0 - x + 3.0 * x * x * x).collect();
        let out = cumulative_integral(&t, &f);
        for (x, v) in t.iter().zip(&out) {
            let exact = x - 0.5 * x * x + 0.75 * x.powi(4);
            assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
        }
    }

    #[test]
    fn cumulative_integral_fourth_order() {
        let err = |n: usize| {
            let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let f: Vec<f64> = t.iter().map(|x| x.exp()).collect();
            let out = cumulative_integral(&t, &f);
            (out[n] - (1f64.exp() - 1.0)).abs()
        };
        let order = observed_order(err(80), err(160), 2.0);
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn hermite_exact_for_cubic() {
        let f = |t: f64| DVector::from_vec(vec![t * t * t - t, 2.0 * t * t]);
        let df = |t: f64| DVector::from_vec(vec![3.0 * t * t - 1.0, 4.0 * t]);
        let (v, d) = hermite(0.5, 1.5, &f(0.5), &f(1.5), &df(0.5), &df(1.5), 0.8);
        assert!((v - f(0.8)).norm() < 1e-14);
        assert!((d - df(0.8)).norm() < 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 2..=4 {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn stencil_window_stays_in_range(i in 0usize..50, n in 5usize..50) {
            let i = i % n;
            let w = stencil_window(i, n, 5);
            prop_assert_eq!(w.len(), 5);
            prop_assert!(w.end <= n);
            prop_assert!(w.contains(&i));
        }
    }
}
