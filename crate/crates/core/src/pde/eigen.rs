//! Principal Dirichlet eigenvalue of `-Δ` by inverse power iteration.

use super::grid::Grid2;
use super::radial::{thomas, RadialGrid};

/// Lowest eigenpair of the radial stiffness against the shell volumes.
/// Returns `(λ, eigenvector, residual)`.
pub fn radial_lowest(grid: &RadialGrid) -> (f64, Vec<f64>, f64) {
    let n = grid.cells;
    let vol = grid.volumes().to_vec();
    // K alone: M + s K with the M part removed
    let (mut diag, off) = grid.shifted(1.0);
    for (d, v) in diag.iter_mut().zip(&vol) {
        *d -= v;
    }
    let mut x = vec![1.0; n];
    let mut scratch = vec![0.0; n];
    let mut kx = vec![0.0; n];
    let mut lambda = 0.0;
    for it in 0..500 {
        let mut y: Vec<f64> = x.iter().zip(&vol).map(|(a, v)| a * v).collect();
        thomas(&diag, &off, &mut y, &mut scratch);
        let norm = y.iter().zip(&vol).map(|(a, v)| a * a * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|a| *a /= norm);
        x = y;
        grid.stiffness_apply(&x, &mut kx);
        let new = x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>();
        if it > 3 && (new - lambda).abs() <= 1e-14 * new {
            lambda = new;
            break;
        }
        lambda = new;
    }
    let residual = kx
        .iter()
        .zip(&x)
        .zip(&vol)
        .map(|((k, a), v)| (k - lambda * v * a).powi(2) / v)
        .sum::<f64>()
        .sqrt();
    (lambda, x, residual)
}

/// Conjugate gradients for the grid stiffness (SPD).
fn cg(grid: &Grid2, b: &[f64], x: &mut [f64], tol: f64) -> usize {
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    grid.stiffness_apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for it in 0..20 * n.max(10) {
        if rr.sqrt() <= tol * bnorm {
            return it;
        }
        grid.stiffness_apply(&p, &mut ap);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let new: f64 = r.iter().map(|v| v * v).sum();
        let beta = new / rr;
        rr = new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    20 * n
}

/// Solve `K u = b` on the grid (used by the condenser solver too).
pub(crate) fn grid_solve(grid: &Grid2, b: &[f64], x: &mut [f64], tol: f64) -> usize {
    cg(grid, b, x, tol)
}

pub fn grid_lowest(grid: &Grid2) -> (f64, Vec<f64>, f64) {
    let n = grid.len();
    let h2 = grid.h * grid.h;
    let mut x = vec![1.0 / (n as f64 * h2).sqrt(); n];
    let mut kx = vec![0.0; n];
    let mut lambda = 0.0;
    for it in 0..200 {
        let b: Vec<f64> = x.iter().map(|v| v * h2).collect();
        let mut y = x.clone();
        cg(grid, &b, &mut y, 1e-11);
        let norm = (y.iter().map(|v| v * v).sum::<f64>() * h2).sqrt();
        y.iter_mut().for_each(|a| *a /= norm);
        x = y;
        grid.stiffness_apply(&x, &mut kx);
        let new = x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>();
        if it > 3 && (new - lambda).abs() <= 1e-11 * new {
            lambda = new;
            break;
        }
        lambda = new;
    }
    let residual = (kx.iter().zip(&x).map(|(k, a)| (k - lambda * h2 * a).powi(2)).sum::<f64>() / h2).sqrt();
    (lambda, x, residual)
}
