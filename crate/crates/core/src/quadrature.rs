//! Small quadrature helpers: Gauss–Legendre rules and the cell average of a
//! weakly singular radial kernel.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order > 0);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

/// Average of `ψ(|x|) |x|^{-γ}` over the cube `[-h/2, h/2]^n`.
///
/// The cube is split into `2n` pyramids with apex at the origin. On the
/// pyramid over the face `x_1 = h/2` write `x = r p` with `p = (h/2, y)`,
/// so the integrand becomes `r^{n-1-γ} |p|^{-γ} ψ(r|p|)` times `h/2`; the
/// substitution `r = s^{1/(n-γ)}` removes the endpoint singularity and leaves
/// a smooth integrand for Gauss–Legendre.
pub fn singular_cell_average(
    dim: usize,
    spacing: f64,
    gamma: f64,
    psi: &dyn Fn(f64) -> f64,
) -> f64 {
    assert!(gamma < dim as f64);
    let order = 24;
    let half = 0.5 * spacing;
    let power = 1.0 / (dim as f64 - gamma);
    let (s_nodes, s_weights) = gauss_legendre_on(order, 0.0, 1.0);
    let radial = |p_norm: f64| -> f64 {
        s_nodes
            .iter()
            .zip(&s_weights)
            .map(|(s, w)| w * psi(s.powf(power) * p_norm))
            .sum::<f64>()
            * power
            * p_norm.powf(-gamma)
    };
    let face_integral = match dim {
        1 => radial(half),
        2 => {
            let (y, wy) = gauss_legendre_on(order, -half, half);
            y.iter()
                .zip(&wy)
                .map(|(yi, wi)| wi * radial((half * half + yi * yi).sqrt()))
                .sum()
        }
        3 => {
            let (y, wy) = gauss_legendre_on(order, -half, half);
            let mut acc = 0.0;
            for (y1, w1) in y.iter().zip(&wy) {
                for (y2, w2) in y.iter().zip(&wy) {
                    acc += w1 * w2 * radial((half * half + y1 * y1 + y2 * y2).sqrt());
                }
            }
            acc
        }
        _ => panic!("unsupported dimension {dim}"),
    };
    let integral = 2.0 * dim as f64 * half * face_integral;
    integral / spacing.powi(dim as i32)
}
