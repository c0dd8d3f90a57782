//! Potential theory: energy capacities, condenser capacities and discrete
//! equilibrium measures.
//!
//! Normalizations. The logarithmic kernel is `-ln|x|` (so `c₂ = e^{-R₂}`) and
//! the Newtonian kernel is `|x|^{2-n}` (so `c_n = 1/R_n`). Condenser values use
//! the Green function `G_D = ∫₀^∞ p_D ds` of the generator `½Δ`: the
//! equilibrium total mass `M` then satisfies `M = π / ln(R/r)` for concentric
//! disks, and the Dirichlet integral `I = ∫|∇u|²` equals `2M`.
//! `convention_constant` records the factor between a condenser value and
//! `1/ln(R/r)` (2D) or `1/(1/r - 1/R)` (3D).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CompactSet, Domain, GeometryError, Point};
use crate::kernels::green_closed_form;
use crate::pde::eigen::grid_solve;
use crate::pde::grid::{Grid2, Link, Part, Region};
use crate::pde::PdeError;

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error("compact set is polar (infinite energy)")]
    Polar,
    #[error("discretization nodes {0} and {1} coincide")]
    CoincidentNodes(usize, usize),
    #[error("need at least {0} points")]
    TooFewPoints(usize),
    #[error("compact set touches or leaves the domain boundary")]
    Touching,
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityKind {
    Logarithmic,
    Newtonian,
    CondenserDirichlet,
    CondenserEquilibrium,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Nodes of the finest discretization.
    pub points: usize,
    /// Grid spacing (grid solves only).
    pub h: Option<f64>,
    pub coarse: f64,
    pub fine: f64,
    /// Richardson extrapolation of `coarse` and `fine`.
    pub extrapolated: f64,
    /// `|extrapolated - fine|`.
    pub error_estimate: f64,
    /// A negative or singular system forced pruning or a ridge term.
    pub regularized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub value: f64,
    pub kind: CapacityKind,
    pub convention_constant: f64,
    pub diagnostics: Diagnostics,
}

/// Point masses on (the boundary of) a compact set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedMeasure {
    pub support: Vec<Point>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
}

impl DiscretizedMeasure {
    /// `∫ G_D(x, y) μ(dy)`; for an equilibrium measure this is the
    /// probability of hitting the compact before leaving `domain`.
    pub fn green_potential(&self, domain: &Domain, x: &Point) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| if x == y { 0.0 } else { w * green_closed_form(domain, x, y).unwrap_or(0.0) })
            .sum()
    }

    /// Largest relative deviation of the weights from their mean.
    pub fn relative_spread(&self) -> f64 {
        let mean = self.total_mass / self.weights.len() as f64;
        self.weights.iter().map(|w| (w - mean).abs() / mean).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Polar,
    Nonpolar,
}

/// Polar exactly when every primitive has zero capacity: points always,
/// and segments too in three dimensions.
pub fn polarity_check(k: &CompactSet) -> Polarity {
    let dim = k.dim();
    let nonpolar = k.primitives().iter().any(|p| match p {
        CompactSet::ClosedBall { .. } => true,
        CompactSet::Segment { .. } => dim == 2,
        _ => false,
    });
    if nonpolar {
        Polarity::Nonpolar
    } else {
        Polarity::Polar
    }
}

/// A boundary cell: its center and its length (2D) or area (3D).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub at: Point,
    pub size: f64,
}

fn fibonacci_sphere(center: &Point, r: f64, n: usize) -> Vec<Node> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let area = 4.0 * PI * r * r / n as f64;
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Node { at: center.add(&Point::xyz(s * phi.cos(), s * phi.sin(), z).scale(r)), size: area }
        })
        .collect()
}

fn primitive_nodes(p: &CompactSet, n: usize) -> Vec<Node> {
    match p {
        CompactSet::ClosedBall { center, radius } if center.dim() == 2 => {
            let len = 2.0 * PI * radius / n as f64;
            (0..n)
                .map(|i| {
                    let a = (i as f64 + 0.5) * 2.0 * PI / n as f64;
                    Node { at: center.add(&Point::xy(a.cos(), a.sin()).scale(*radius)), size: len }
                })
                .collect()
        }
        CompactSet::ClosedBall { center, radius } => fibonacci_sphere(center, *radius, n),
        CompactSet::Segment { a, b } => {
            let len = a.dist(b) / n as f64;
            let ab = b.sub(a);
            (0..n).map(|i| Node { at: a.add(&ab.scale((i as f64 + 0.5) / n as f64)), size: len }).collect()
        }
        _ => Vec::new(),
    }
}

/// Boundary discretization of the non-polar part of `k` with about `points`
/// nodes, shared in proportion to boundary measure.
pub fn boundary_nodes(k: &CompactSet, points: usize) -> Result<Vec<Node>, CapacityError> {
    k.validate()?;
    if points < 8 {
        return Err(CapacityError::TooFewPoints(8));
    }
    if polarity_check(k) == Polarity::Polar {
        return Err(CapacityError::Polar);
    }
    let dim = k.dim();
    let measure = |p: &CompactSet| match p {
        CompactSet::ClosedBall { radius, .. } if dim == 2 => 2.0 * PI * radius,
        CompactSet::ClosedBall { radius, .. } => 4.0 * PI * radius * radius,
        CompactSet::Segment { a, b } if dim == 2 => a.dist(b),
        _ => 0.0,
    };
    let parts: Vec<&CompactSet> = k.primitives().into_iter().filter(|p| measure(p) > 0.0).collect();
    let total: f64 = parts.iter().map(|p| measure(p)).sum();
    let mut nodes = Vec::new();
    for p in parts {
        let share = ((points as f64 * measure(p) / total).round() as usize).max(8);
        nodes.extend(primitive_nodes(p, share));
    }
    check_distinct(&nodes)?;
    Ok(nodes)
}

fn check_distinct(nodes: &[Node]) -> Result<(), CapacityError> {
    for i in 0..nodes.len() {
        for j in 0..i {
            if nodes[i].at.dist(&nodes[j].at) <= 1e-12 * (1.0 + nodes[i].at.norm()) {
                return Err(CapacityError::CoincidentNodes(j, i));
            }
        }
    }
    Ok(())
}

/// Disk of the same area as a surface cell.
fn patch_radius(area: f64) -> f64 {
    (area / PI).sqrt()
}

/// Solve `min μᵀFμ` over probability vectors, by the KKT system of the
/// equality-constrained problem with negative weights pruned. Returns
/// `(weights, minimal energy, pruned)`.
fn min_energy(f: &DMatrix<f64>) -> (Vec<f64>, f64, bool) {
    let n = f.nrows();
    let mut active: Vec<usize> = (0..n).collect();
    let mut pruned = false;
    loop {
        let m = active.len();
        let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
        for (i, &p) in active.iter().enumerate() {
            for (j, &q) in active.iter().enumerate() {
                a[(i, j)] = f[(p, q)];
            }
            a[(i, m)] = 1.0;
            a[(m, i)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(m + 1);
        rhs[m] = 1.0;
        let sol = a.lu().solve(&rhs).expect("energy system is singular");
        let neg: Vec<usize> = (0..m).filter(|&i| sol[i] < 0.0).collect();
        if neg.is_empty() || m == 1 {
            let mut w = vec![0.0; n];
            for (i, &p) in active.iter().enumerate() {
                w[p] = sol[i].max(0.0);
            }
            // the multiplier equals minus the equilibrium energy
            return (w, -sol[m], pruned);
        }
        pruned = true;
        let drop: std::collections::HashSet<usize> = neg.iter().map(|&i| active[i]).collect();
        active.retain(|p| !drop.contains(p));
    }
}

fn energy_at(nodes: &[Node], dim: usize) -> (f64, bool) {
    let n = nodes.len();
    let f = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            // self-energy of the cell from its own capacity
            match dim {
                2 => -(nodes[i].size / 4.0).ln(),
                _ => PI / (2.0 * patch_radius(nodes[i].size)),
            }
        } else {
            let r = nodes[i].at.dist(&nodes[j].at);
            match dim {
                2 => -r.ln(),
                _ => r.powi(2 - dim as i32),
            }
        }
    });
    let (_, e, pruned) = min_energy(&f);
    (e, pruned)
}

/// Logarithmic (n = 2) or Newtonian (n = 3) capacity of `k` by discrete
/// energy minimization on about `points` boundary nodes, extrapolated
/// against a half-resolution run.
pub fn energy_capacity(k: &CompactSet, n: usize, points: usize) -> Result<CapacityReport, CapacityError> {
    if k.dim() != n {
        return Err(GeometryError::DimensionMismatch { expected: n, got: k.dim() }.into());
    }
    if !(2..=3).contains(&n) {
        return Err(CapacityError::Unsupported(format!("dimension {n}")));
    }
    let fine_nodes = boundary_nodes(k, points)?;
    let coarse_nodes = boundary_nodes(k, points / 2)?;
    energy_capacity_on(&fine_nodes, &coarse_nodes)
}

/// [`energy_capacity`] on explicit cells (sets outside the primitive catalog).
pub fn energy_capacity_on(fine_nodes: &[Node], coarse_nodes: &[Node]) -> Result<CapacityReport, CapacityError> {
    let n = fine_nodes.first().map_or(2, |nd| nd.at.dim());
    if !(2..=3).contains(&n) {
        return Err(CapacityError::Unsupported(format!("dimension {n}")));
    }
    for nodes in [fine_nodes, coarse_nodes] {
        if nodes.len() < 4 {
            return Err(CapacityError::TooFewPoints(4));
        }
        check_distinct(nodes)?;
    }
    let (ef, pf) = energy_at(fine_nodes, n);
    let (ec, pc) = energy_at(&coarse_nodes, n);
    // energy error is O(1/N) on curves and O(N^{-1/2}) on surfaces
    let ratio = (fine_nodes.len() as f64 / coarse_nodes.len() as f64).powf(if n == 2 { 1.0 } else { 0.5 });
    let e_ext = ef + (ef - ec) / (ratio - 1.0);
    let (cap, kind): (fn(f64) -> f64, _) = match n {
        2 => (|e: f64| (-e).exp(), CapacityKind::Logarithmic),
        _ => (|e: f64| 1.0 / e, CapacityKind::Newtonian),
    };
    let value = cap(e_ext);
    Ok(CapacityReport {
        value,
        kind,
        convention_constant: 1.0,
        diagnostics: Diagnostics {
            points: fine_nodes.len(),
            h: None,
            coarse: cap(ec),
            fine: cap(ef),
            extrapolated: value,
            error_estimate: (value - cap(ef)).abs(),
            regularized: pf || pc,
        },
    })
}

fn origin_ball(d: &Domain) -> Result<f64, CapacityError> {
    match d.resolved() {
        Domain::Ball { center, radius } if center.norm() == 0.0 => Ok(radius),
        _ => Err(CapacityError::Unsupported("condenser domains are balls about the origin".into())),
    }
}

fn check_inside(radius: f64, k: &CompactSet) -> Result<(), CapacityError> {
    k.validate()?;
    if k.extent() >= radius {
        return Err(CapacityError::Touching);
    }
    Ok(())
}

fn dirichlet_at(k: &CompactSet, radius: f64, h: f64) -> Result<(f64, usize), CapacityError> {
    let region = Region { domain: Domain::ComplementOfCompact { compact: k.clone() }, truncation: Some(radius) };
    let grid = Grid2::build(&region, [-radius, -radius], [radius, radius], h, 1e-3)?;
    // u = 1 on K (walls of the compact), 0 on the circle (truncation walls)
    let b: Vec<f64> = grid
        .links
        .iter()
        .map(|l| {
            l.iter()
                .map(|w| match *w {
                    Link::Wall { g, part: Part::Domain } => g,
                    _ => 0.0,
                })
                .sum()
        })
        .collect();
    let mut u = vec![0.5; grid.len()];
    grid_solve(&grid, &b, &mut u, 1e-12);
    // at the discrete minimizer the energy is the flux into K
    let c: f64 = b.iter().sum();
    let bu: f64 = b.iter().zip(&u).map(|(a, v)| a * v).sum();
    Ok((c - bu, grid.len()))
}

/// Condenser capacity `I = inf ∫|∇u|²` over `u = 1` on `k`, `u = 0` on `∂D`,
/// by a planar grid solve at spacing `h` and `2h` (Richardson, second order).
pub fn dirichlet_condenser(d: &Domain, k: &CompactSet, h: f64) -> Result<CapacityReport, CapacityError> {
    if d.dim() != 2 || k.dim() != 2 {
        return Err(CapacityError::Unsupported("grid condenser solves are planar".into()));
    }
    if !(h > 0.0) {
        return Err(CapacityError::Unsupported("h must be positive".into()));
    }
    let radius = origin_ball(d)?;
    check_inside(radius, k)?;
    if polarity_check(k) == Polarity::Polar {
        return Err(CapacityError::Polar);
    }
    let (fine, points) = dirichlet_at(k, radius, h)?;
    let (coarse, _) = dirichlet_at(k, radius, 2.0 * h)?;
    let value = fine + (fine - coarse) / 3.0;
    Ok(CapacityReport {
        value,
        kind: CapacityKind::CondenserDirichlet,
        convention_constant: 2.0 * PI,
        diagnostics: Diagnostics {
            points,
            h: Some(h),
            coarse,
            fine,
            extrapolated: value,
            error_estimate: (value - fine).abs(),
            regularized: false,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub measure: DiscretizedMeasure,
    pub report: CapacityReport,
}

fn collocate(d: &Domain, radius: f64, nodes: &[Node]) -> (DiscretizedMeasure, bool) {
    let dim = d.dim();
    let n = nodes.len();
    let g = DMatrix::from_fn(n, n, |i, j| {
        let x = &nodes[i].at;
        if i != j {
            return green_closed_form(d, x, &nodes[j].at).unwrap_or(0.0);
        }
        // mean over the own cell: singular part exactly, regular part at x
        let gap = (radius * radius - x.dot(x)).max(f64::MIN_POSITIVE);
        match dim {
            2 => (1.0 - (nodes[i].size / 2.0).ln()) / PI + (gap / (radius * radius)).ln() / (2.0 * PI),
            _ => 2.0 / patch_radius(nodes[i].size) / (2.0 * PI) - radius / gap / (2.0 * PI),
        }
    });
    let ones = DVector::from_element(n, 1.0);
    let mut regularized = false;
    let mut w = g.clone().lu().solve(&ones);
    if w.as_ref().map_or(true, |v| v.iter().any(|x| !x.is_finite() || *x < 0.0)) {
        regularized = true;
        let ridge = 1e-10 * g.trace() / n as f64;
        let mut a = g.transpose() * &g;
        for i in 0..n {
            a[(i, i)] += ridge;
        }
        w = a.cholesky().map(|c| c.solve(&(g.transpose() * &ones)));
    }
    let weights: Vec<f64> = w.map(|v| v.iter().map(|x| x.max(0.0)).collect()).unwrap_or_else(|| vec![0.0; n]);
    let total_mass = weights.iter().sum();
    (DiscretizedMeasure { support: nodes.iter().map(|nd| nd.at).collect(), weights, total_mass }, regularized)
}

/// Equilibrium measure of `k` relative to the ball `d`, on explicit
/// boundary cells (used for sets outside the primitive catalog).
pub fn equilibrium_on_nodes(d: &Domain, fine: &[Node], coarse: &[Node]) -> Result<Equilibrium, CapacityError> {
    let radius = origin_ball(d)?;
    let dim = d.dim();
    if !(2..=3).contains(&dim) {
        return Err(CapacityError::Unsupported(format!("dimension {dim}")));
    }
    for nodes in [fine, coarse] {
        if nodes.len() < 4 {
            return Err(CapacityError::TooFewPoints(4));
        }
        if nodes.iter().any(|nd| nd.at.dim() != dim || nd.at.norm() >= radius) {
            return Err(CapacityError::Touching);
        }
        check_distinct(nodes)?;
    }
    let (measure, rf) = collocate(d, radius, fine);
    let (coarse_m, rc) = collocate(d, radius, coarse);
    // collocation error is second order in the cell size on smooth curves
    let ratio = match dim {
        2 => fine.len() as f64 / coarse.len() as f64,
        _ => (fine.len() as f64 / coarse.len() as f64).sqrt(),
    };
    let value = measure.total_mass + (measure.total_mass - coarse_m.total_mass) / (ratio * ratio - 1.0);
    let report = CapacityReport {
        value,
        kind: CapacityKind::CondenserEquilibrium,
        convention_constant: if dim == 2 { PI } else { 2.0 * PI },
        diagnostics: Diagnostics {
            points: fine.len(),
            h: None,
            coarse: coarse_m.total_mass,
            fine: measure.total_mass,
            extrapolated: value,
            error_estimate: (value - measure.total_mass).abs(),
            regularized: rf || rc,
        },
    };
    Ok(Equilibrium { measure, report })
}

/// Equilibrium measure of `k` in the ball `d`: weights with Green potential
/// one at every node of `∂k`. The report's value is the total mass.
pub fn equilibrium_measure(d: &Domain, k: &CompactSet, points: usize) -> Result<Equilibrium, CapacityError> {
    if d.dim() != k.dim() {
        return Err(GeometryError::DimensionMismatch { expected: d.dim(), got: k.dim() }.into());
    }
    let radius = origin_ball(d)?;
    check_inside(radius, k)?;
    let fine = boundary_nodes(k, points)?;
    let coarse = boundary_nodes(k, points / 2)?;
    equilibrium_on_nodes(d, &fine, &coarse)
}
