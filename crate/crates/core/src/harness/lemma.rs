//! Explicit constants for the small-time hitting lower bound
//! `P⁰(τ_K < t) ≥ C e^{-(|a|+δ)²/(2t)}` for `t ∈ (0, T)`.
//!
//! Construction: `L = K ∩ B̄(a, δ/5)`, `Ω = B(0, 3|a| + δ)`, `M` the
//! equilibrium mass of `L` in `Ω`. `T₁` is the first time the killed density
//! of `Ω` at radius `|a| + δ/5` drops below half the free density, and
//! `T ≤ T₁` the first time `∫₀ᵗ (2πs)⁻¹ e^{-b²/(2s)} ds ≥ ½ e^{-c²/(2t)}`
//! fails (`b = |a| + δ/5`, `c = |a| + δ`). Then `C = M/4`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{energy_capacity_on, equilibrium_on_nodes, CapacityError, Node};
use crate::geometry::{CompactSet, Domain, GeometryError, Point};
use crate::kernels::{exp_integral_e1, heat_kernel};
use crate::pde::{solve_killed_density, PdeError, Resolution};
use crate::sampler::log_grid;

#[derive(Debug, Error)]
pub enum LemmaError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("the point a is not a regular boundary point of K")]
    NotRegular,
    #[error("K contains the origin")]
    OriginInK,
    #[error("K is polar")]
    Polar,
    #[error("|a| + δ = {0} reaches the comparison radius 1")]
    DeltaTooLarge(f64),
    #[error("δ must be positive")]
    BadDelta,
    #[error("the time condition fails already at t = {0}")]
    NoTime(f64),
    #[error("lemma constructions are planar")]
    Dimension,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Constants {
    pub k: CompactSet,
    pub a: Point,
    pub delta: f64,
    /// `L = K ∩ B̄(a, l_radius)`.
    pub l_radius: f64,
    pub l_nodes: usize,
    /// `Ω = B(0, omega_radius)`.
    pub omega_radius: f64,
    /// Equilibrium mass of `(Ω, L)` and its discretization error estimate.
    pub m: f64,
    pub m_error: f64,
    /// Logarithmic capacity of `L`.
    pub c2_l: f64,
    /// Concentric-disk lower bound `π / ln(R_Ω / c₂(L))` on `M`.
    pub m_lower_bound: f64,
    pub t1: f64,
    pub t: f64,
    pub c: f64,
    /// `(|a| + δ)² / 2`: the bound reads `C e^{-exponent/t}`.
    pub exponent: f64,
}

impl Lemma1Constants {
    pub fn bound(&self, t: f64) -> f64 {
        self.c * (-self.exponent / t).exp()
    }
}

/// Cells on `∂(p ∩ B̄(a, rho))` for a planar primitive `p`.
fn restricted_primitive(p: &CompactSet, a: &Point, rho: f64, n: usize) -> Vec<Node> {
    let arc = |c: &Point, r: f64, mid: f64, half: f64, k: usize| -> Vec<Node> {
        (0..k)
            .map(|i| {
                let ang = mid - half + (i as f64 + 0.5) * 2.0 * half / k as f64;
                Node { at: c.add(&Point::xy(ang.cos(), ang.sin()).scale(r)), size: 2.0 * half * r / k as f64 }
            })
            .collect()
    };
    match p {
        CompactSet::ClosedBall { center, radius } => {
            let d = center.dist(a);
            if d + rho <= *radius {
                // the small ball lies inside K
                return arc(a, rho, 0.0, PI, n);
            }
            if d + radius <= rho {
                return arc(center, *radius, 0.0, PI, n);
            }
            if d >= radius + rho {
                return Vec::new();
            }
            // lens: arc of ∂K inside B̄(a, ρ) and arc of ∂B(a, ρ) inside K
            let cos1 = ((d * d + radius * radius - rho * rho) / (2.0 * d * radius)).clamp(-1.0, 1.0);
            let cos2 = ((d * d + rho * rho - radius * radius) / (2.0 * d * rho)).clamp(-1.0, 1.0);
            let (h1, h2) = (cos1.acos(), cos2.acos());
            let dir = a.sub(center);
            let to_a = dir.y().atan2(dir.x());
            let (l1, l2) = (2.0 * h1 * radius, 2.0 * h2 * rho);
            let n1 = ((n as f64 * l1 / (l1 + l2)).round() as usize).max(4);
            let n2 = n.saturating_sub(n1).max(4);
            let mut v = arc(center, *radius, to_a, h1, n1);
            v.extend(arc(a, rho, to_a + PI, h2, n2));
            v
        }
        CompactSet::Segment { a: p0, b: p1 } => {
            // chord of the segment inside the disk
            let d = p1.sub(p0);
            let len = d.norm();
            let u = d.scale(1.0 / len);
            let proj = a.sub(p0).dot(&u);
            let off2 = a.sub(p0).dot(&a.sub(p0)) - proj * proj;
            if off2 >= rho * rho {
                return Vec::new();
            }
            let half = (rho * rho - off2).sqrt();
            let (s0, s1) = ((proj - half).max(0.0), (proj + half).min(len));
            if s1 <= s0 {
                return Vec::new();
            }
            let cell = (s1 - s0) / n as f64;
            (0..n).map(|i| Node { at: p0.add(&u.scale(s0 + (i as f64 + 0.5) * cell)), size: cell }).collect()
        }
        _ => Vec::new(),
    }
}

/// Boundary cells of `K ∩ B̄(a, rho)` (non-polar parts only).
pub fn restricted_nodes(k: &CompactSet, a: &Point, rho: f64, points: usize) -> Vec<Node> {
    let parts: Vec<&CompactSet> = k.primitives().into_iter().filter(|p| !p.is_polar()).collect();
    let share = (points / parts.len().max(1)).max(8);
    parts.iter().flat_map(|p| restricted_primitive(p, a, rho, share)).collect()
}

fn is_regular_boundary_point(k: &CompactSet, a: &Point) -> bool {
    k.primitives().iter().any(|p| {
        let on = match p {
            CompactSet::ClosedBall { center, radius } => (a.dist(center) - radius).abs() <= 1e-9 * radius,
            CompactSet::Segment { .. } => p.dist(a) <= 1e-12,
            _ => false,
        };
        // a boundary point of one primitive may be interior to another
        on && !k.primitives().iter().any(|q| match q {
            CompactSet::ClosedBall { center, radius } => a.dist(center) < radius - 1e-9 * radius,
            _ => false,
        })
    })
}

/// Killed-over-free density ratio at radius `r` in `B(0, radius)`, scanned
/// from a radial heat solve; returns the first time it drops below ½ (or
/// the scan end).
fn not_feeling_time(radius: f64, r: f64) -> Result<f64, LemmaError> {
    let t_max = 4.0 * radius * radius;
    let mut times = log_grid(r * r / 20.0, t_max, 160);
    // exp/ln round trip can land a hair past t_max
    *times.last_mut().unwrap() = t_max;
    let res = Resolution::new(radius / 200.0).without_error_estimate();
    let omega = Domain::ball(radius);
    let field = solve_killed_density(&omega, &Point::origin(2), t_max, &res, &times)?;
    let y = Point::xy(r, 0.0);
    let ratio = |k: usize| -> f64 {
        let free = heat_kernel(times[k], &Point::origin(2), &y, 2).unwrap_or(0.0);
        field.density_at(k, &y) / free
    };
    let mut prev = (times[0], ratio(0));
    for k in 1..times.len() {
        let q = ratio(k);
        if q < 0.5 {
            let (t0, q0) = prev;
            let w = (q0 - 0.5) / (q0 - q);
            return Ok(t0 + w * (times[k] - t0));
        }
        prev = (times[k], q);
    }
    Ok(t_max)
}

/// `ln` of `∫₀ᵗ (2πs)⁻¹ e^{-b²/(2s)} ds = E₁(b²/(2t)) / (2π)` minus `ln` of
/// `½ e^{-c²/(2t)}`.
fn time_margin(t: f64, b: f64, c: f64) -> f64 {
    let x = b * b / (2.0 * t);
    // E₁(x) = e^{-x} · (e^{x} E₁(x)); keep the scaled factor to avoid underflow
    let log_e1 = if x < 600.0 { exp_integral_e1(x).ln() } else { -x - x.ln() + (1.0 - 1.0 / x).ln() };
    log_e1 - (2.0 * PI).ln() - (0.5f64.ln() - c * c / (2.0 * t))
}

fn final_time(b: f64, c: f64, t1: f64) -> Result<f64, LemmaError> {
    let lo = b * b / 1000.0;
    if time_margin(lo, b, c) < 0.0 {
        return Err(LemmaError::NoTime(lo));
    }
    let grid = log_grid(lo, t1, 400);
    for w in grid.windows(2) {
        if time_margin(w[1], b, c) < 0.0 {
            let (mut a, mut z) = (w[0], w[1]);
            for _ in 0..80 {
                let m = 0.5 * (a + z);
                if time_margin(m, b, c) >= 0.0 {
                    a = m;
                } else {
                    z = m;
                }
            }
            return Ok(a);
        }
    }
    Ok(t1)
}

/// Constants of the lower bound for `K`, the regular point `a` and `δ`,
/// with `points` boundary cells on `L`.
pub fn lemma1_bound(k: &CompactSet, a: &Point, delta: f64, points: usize) -> Result<Lemma1Constants, LemmaError> {
    k.validate()?;
    if k.dim() != 2 || a.dim() != 2 {
        return Err(LemmaError::Dimension);
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(LemmaError::BadDelta);
    }
    if k.contains(&Point::origin(2)) {
        return Err(LemmaError::OriginInK);
    }
    if k.is_polar() {
        return Err(LemmaError::Polar);
    }
    if !is_regular_boundary_point(k, a) {
        return Err(LemmaError::NotRegular);
    }
    let ra = a.norm();
    if ra + delta >= 1.0 {
        return Err(LemmaError::DeltaTooLarge(ra + delta));
    }
    let rho = delta / 5.0;
    let omega_radius = 3.0 * ra + delta;
    let omega = Domain::ball(omega_radius);
    let fine = restricted_nodes(k, a, rho, points);
    let coarse = restricted_nodes(k, a, rho, points / 2);
    let eq = equilibrium_on_nodes(&omega, &fine, &coarse)?;
    let c2 = energy_capacity_on(&fine, &coarse)?;
    let b = ra + rho;
    let c = ra + delta;
    let t1 = not_feeling_time(omega_radius, b)?;
    let t = final_time(b, c, t1)?;
    let m = eq.report.value;
    Ok(Lemma1Constants {
        k: k.clone(),
        a: *a,
        delta,
        l_radius: rho,
        l_nodes: fine.len(),
        omega_radius,
        m,
        m_error: eq.report.diagnostics.error_estimate,
        c2_l: c2.value,
        m_lower_bound: PI / (omega_radius / c2.value).ln(),
        t1,
        t,
        c: m / 4.0,
        exponent: c * c / 2.0,
    })
}
