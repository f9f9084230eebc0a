//! Gauss–Legendre quadrature with adaptive panel doubling.

use std::sync::OnceLock;

/// Points per panel.
pub const ORDER: usize = 20;

/// Maximum number of accepted panels per call before giving up.
pub const PANEL_CAP: usize = 1 << 14;

/// Nodes and weights on `[-1, 1]` for an `order`-point rule, by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    let nf = order as f64;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 1 { x } else { p1 };
            let pm1 = if order == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// One fixed-order panel.
pub fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        s += w * f(mid + half * x);
    }
    s * half
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOutcome {
    pub value: f64,
    pub panels: usize,
    pub converged: bool,
}

/// Adaptive integral of `f` over `[a, b]` split first at `breaks` (any
/// points outside `(a, b)` are ignored). Each panel is accepted when it
/// agrees with the sum of its halves to `abs_tol` (scaled by the panel's
/// share of the interval) or to `rel_tol` relative.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> QuadOutcome {
    if !(b > a) {
        return QuadOutcome { value: 0.0, panels: 0, converged: true };
    }
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&t| t > a && t < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let total = b - a;
    let mut value = 0.0;
    let mut panels = 0usize;
    let mut converged = true;
    let mut stack: Vec<(f64, f64, f64, u32)> = Vec::new();
    for w in pts.windows(2).rev() {
        stack.push((w[0], w[1], panel(f, w[0], w[1]), 0));
    }
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(f, lo, mid);
        let right = panel(f, mid, hi);
        let refined = left + right;
        let tol = (abs_tol * (hi - lo) / total).max(rel_tol * refined.abs());
        if (refined - whole).abs() <= tol || depth >= 50 || mid <= lo || mid >= hi {
            if depth >= 50 {
                converged = false;
            }
            value += refined;
            panels += 1;
            if panels > PANEL_CAP {
                converged = false;
                // drain what is left coarsely
                for (_, _, w, _) in stack.drain(..) {
                    value += w;
                }
                break;
            }
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    QuadOutcome { value, panels, converged }
}
