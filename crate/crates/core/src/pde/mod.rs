//! Deterministic engine for the killed heat equation `∂_t p = ½Δp` with zero
//! boundary values, exit-time distributions from absorbed boundary flux, and
//! the principal Dirichlet eigenvalue.
//!
//! Two discretizations share the same contract:
//!
//! * radial finite volumes when the start point is the center of a ball
//!   (n = 2, 3) or the midline of a strip (the 1D cross-section);
//! * planar masked grids otherwise, with sub-cell boundary distances.
//!
//! Exit probabilities are accumulated from boundary flux, never as one minus
//! the interior mass, so values down to the f64 range survive at small times.

pub mod eigen;
pub mod grid;
pub mod heat2d;
pub mod radial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError, Point};
use crate::kernels::halfspace_exit_cdf;

pub use grid::{Grid2, Part, Region};
pub use radial::{RadialGrid, RadialRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("start point is on or outside the boundary")]
    StartOutside,
    #[error("resolution too coarse to separate the start point from the boundary")]
    TooCoarse,
    #[error("unbounded domain needs a truncation radius")]
    Unbounded,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid time grid: {0}")]
    BadTimes(String),
}

pub type Result<T> = std::result::Result<T, PdeError>;

/// Which discretization to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Auto,
    Radial,
    Grid,
}

/// Spatial resolution and truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub h: f64,
    #[serde(default)]
    pub truncation: Option<f64>,
    #[serde(default)]
    pub engine: Engine,
    /// Also solve at `2h` to report an error estimate.
    #[serde(default = "yes")]
    pub estimate_error: bool,
}

fn yes() -> bool {
    true
}

impl Resolution {
    pub fn new(h: f64) -> Self {
        Resolution { h, truncation: None, engine: Engine::Auto, estimate_error: true }
    }

    pub fn truncated(h: f64, radius: f64) -> Self {
        Resolution { truncation: Some(radius), ..Resolution::new(h) }
    }

    pub fn without_error_estimate(self) -> Self {
        Resolution { estimate_error: false, ..self }
    }

    fn coarsened(&self) -> Self {
        Resolution { h: 2.0 * self.h, ..*self }
    }
}

/// Default truncation margin δ for complements of compacts: the envelope is
/// `D(0, 3 d_r + δ)` with `d_r` the distance to the regular boundary.
pub const TRUNCATION_DELTA: f64 = 0.1;

/// A concrete discretization choice for a (domain, start point) pair.
#[derive(Clone, Debug)]
pub(crate) enum Plan {
    Radial { grid: RadialGrid },
    Planar { grid: Grid2, truncation: Option<f64> },
}

fn bounding_box(domain: &Domain) -> Option<([f64; 2], [f64; 2])> {
    match domain {
        Domain::Ball { center, radius } => {
            Some(([center.x() - radius, center.y() - radius], [center.x() + radius, center.y() + radius]))
        }
        Domain::Annulus { center, outer, .. } => {
            Some(([center.x() - outer, center.y() - outer], [center.x() + outer, center.y() + outer]))
        }
        Domain::GridMask { mask } => Some((
            mask.corner,
            [mask.corner[0] + mask.nx as f64 * mask.h, mask.corner[1] + mask.ny as f64 * mask.h],
        )),
        Domain::Punctured { base, .. } => bounding_box(base),
        Domain::Schlicht { entry } => bounding_box(&entry.domain()),
        _ => None,
    }
}

fn truncation_radius(domain: &Domain, res: &Resolution) -> Option<f64> {
    res.truncation.or_else(|| match domain {
        Domain::ComplementOfCompact { .. } => {
            let (_, dr) = domain.d_regular();
            dr.is_finite().then(|| 3.0 * dr + TRUNCATION_DELTA)
        }
        _ => None,
    })
}

/// Strip the puncture layer: a grid cannot see a point.
fn unpunctured(domain: &Domain) -> Domain {
    match domain.resolved() {
        Domain::Punctured { base, .. } => unpunctured(&base),
        d => d,
    }
}

pub(crate) fn plan(domain: &Domain, x0: &Point, res: &Resolution) -> Result<Plan> {
    domain.validate()?;
    if x0.dim() != domain.dim() {
        return Err(GeometryError::DimensionMismatch { expected: domain.dim(), got: x0.dim() }.into());
    }
    if !(res.h > 0.0) {
        return Err(PdeError::TooCoarse);
    }
    let base = unpunctured(domain);
    let q = base.query_nonpolar(x0);
    if !q.inside {
        return Err(PdeError::StartOutside);
    }
    let radial = match &base {
        Domain::Ball { center, radius } if center == x0 && res.truncation.is_none() => Some((base.dim(), *radius)),
        Domain::Strip { halfwidth, .. } if x0.x() == 0.0 && res.truncation.is_none() => Some((1, *halfwidth)),
        _ => None,
    };
    let use_radial = match res.engine {
        Engine::Radial => {
            if radial.is_none() {
                return Err(PdeError::Unsupported("radial engine needs a ball centered at the start point".into()));
            }
            true
        }
        Engine::Grid => false,
        Engine::Auto => radial.is_some(),
    };
    if use_radial {
        let (dim, radius) = radial.unwrap();
        let cells = (radius / res.h).round() as usize;
        if cells < 16 {
            return Err(PdeError::TooCoarse);
        }
        return Ok(Plan::Radial { grid: RadialGrid::new(dim, radius, cells)? });
    }
    if base.dim() != 2 {
        return Err(PdeError::Unsupported("general solves are planar; 3D is radial only".into()));
    }
    let truncation = truncation_radius(&base, res);
    let (lo, hi) = match (truncation, bounding_box(&base)) {
        (Some(r), _) => ([-r, -r], [r, r]),
        (None, Some(b)) => b,
        (None, None) => return Err(PdeError::Unbounded),
    };
    let region = Region { domain: base, truncation };
    let dist = match truncation {
        Some(r) => q.dist.min(r - x0.norm()),
        None => q.dist,
    };
    // the initial Gaussian has standard deviation 2h
    if dist < 12.0 * res.h {
        return Err(PdeError::TooCoarse);
    }
    let grid = Grid2::build(&region, lo, hi, res.h, grid::THETA_MIN)?;
    Ok(Plan::Planar { grid, truncation })
}

/// Where density values live.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Radial { dim: usize, radius: f64, cells: usize, h: f64 },
    Planar { h: f64, nodes: usize, truncation: Option<f64> },
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub density: Vec<f64>,
}

/// Time-indexed approximation of `p_D(t, x0, ·)`.
#[derive(Clone, Debug, Serialize)]
pub struct KilledHeatField {
    pub grid: GridSpec,
    pub dt: f64,
    pub source: Point,
    pub snapshots: Vec<Snapshot>,
    /// Node coordinates matching snapshot entries (radial: `(r, 0[, 0])`).
    pub nodes: Vec<Point>,
    /// Step end times and cumulative absorbed probability after each step.
    pub step_times: Vec<f64>,
    pub absorbed_flux: Vec<f64>,
    /// Interior mass at each snapshot.
    pub interior_mass: Vec<f64>,
    #[serde(skip)]
    plan: Option<PlanHandle>,
}

#[derive(Clone, Debug)]
struct PlanHandle(Plan);

impl KilledHeatField {
    /// Density at an arbitrary point for snapshot `k` (linear / bilinear
    /// interpolation; zero outside).
    pub fn density_at(&self, k: usize, y: &Point) -> f64 {
        let snap = &self.snapshots[k].density;
        match &self.plan {
            Some(PlanHandle(Plan::Radial { grid })) => {
                let r = match grid.dim {
                    1 => y.x().abs(),
                    _ => y.sub(&self.source).norm(),
                };
                if r >= grid.radius {
                    0.0
                } else {
                    radial::interp_cells(snap, grid.h, r)
                }
            }
            Some(PlanHandle(Plan::Planar { grid, .. })) => grid.interpolate(snap, y),
            None => f64::NAN,
        }
    }

    /// Shell-averaged density at radius `r` for radial fields.
    pub fn radial_profile(&self, k: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.plan {
            Some(PlanHandle(Plan::Radial { grid })) => Some((grid.centers(), self.snapshots[k].density.clone())),
            _ => None,
        }
    }

    pub fn planar_grid(&self) -> Option<&Grid2> {
        match &self.plan {
            Some(PlanHandle(Plan::Planar { grid, .. })) => Some(grid),
            _ => None,
        }
    }

    /// Spatial step.
    pub fn h(&self) -> f64 {
        match &self.grid {
            GridSpec::Radial { h, .. } | GridSpec::Planar { h, .. } => *h,
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(PdeError::BadTimes("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(PdeError::BadTimes("times must be nondecreasing".into()));
    }
    Ok(())
}

/// Evolve the killed density from a point mass at `x0` up to `t_max`,
/// keeping snapshots at `snapshot_times` (each ≤ `t_max`).
pub fn solve_killed_density(
    domain: &Domain,
    x0: &Point,
    t_max: f64,
    res: &Resolution,
    snapshot_times: &[f64],
) -> Result<KilledHeatField> {
    check_times(snapshot_times)?;
    if snapshot_times.last().is_some_and(|&t| t > t_max) {
        return Err(PdeError::BadTimes("snapshot after t_max".into()));
    }
    let plan = plan(domain, x0, res)?;
    let mut step_times = Vec::new();
    let mut absorbed_flux = Vec::new();
    let mut snapshots = Vec::new();
    let mut interior_mass = Vec::new();
    let (spec, nodes, dt) = match &plan {
        Plan::Radial { grid } => {
            let mut st = radial::RadialStepper::new(grid);
            let mut events: Vec<f64> = snapshot_times.to_vec();
            events.push(t_max);
            for (idx, &t) in events.iter().enumerate() {
                while st.t + grid.dt <= t * (1.0 + 1e-14) {
                    st.advance_to(st.t + grid.dt);
                    step_times.push(st.t);
                    absorbed_flux.push(st.absorbed);
                }
                if t > st.t {
                    st.advance_to(t);
                    step_times.push(st.t);
                    absorbed_flux.push(st.absorbed);
                }
                if idx < snapshot_times.len() {
                    snapshots.push(Snapshot { t, density: st.density.clone() });
                    interior_mass.push(st.mass());
                }
            }
            let nodes = grid.centers().into_iter().map(|r| Point::on_axis(x0.dim(), r)).collect();
            (
                GridSpec::Radial { dim: grid.dim, radius: grid.radius, cells: grid.cells, h: grid.h },
                nodes,
                grid.dt,
            )
        }
        Plan::Planar { grid, truncation } => {
            let mut st = heat2d::AdiStepper::new(grid, x0);
            let dt = 0.5 * grid.h * grid.h;
            let mut events: Vec<f64> = snapshot_times.to_vec();
            events.push(t_max);
            for (idx, &t) in events.iter().enumerate() {
                while st.t + dt <= t * (1.0 + 1e-14) {
                    st.step(dt);
                    step_times.push(st.t);
                    absorbed_flux.push(st.absorbed[0] + st.absorbed[1]);
                }
                if t > st.t {
                    st.advance_to(t);
                    step_times.push(st.t);
                    absorbed_flux.push(st.absorbed[0] + st.absorbed[1]);
                }
                if idx < snapshot_times.len() {
                    snapshots.push(Snapshot { t, density: st.density.clone() });
                    interior_mass.push(st.mass());
                }
            }
            let nodes = (0..grid.len()).map(|k| grid.position(k)).collect();
            (GridSpec::Planar { h: grid.h, nodes: grid.len(), truncation: *truncation }, nodes, dt)
        }
    };
    Ok(KilledHeatField {
        grid: spec,
        dt,
        source: *x0,
        snapshots,
        nodes,
        step_times,
        absorbed_flux,
        interior_mass,
        plan: Some(PlanHandle(plan)),
    })
}

/// Exit-time distribution on a time grid.
#[derive(Clone, Debug, Serialize)]
pub struct ExitCdf {
    pub times: Vec<f64>,
    /// P(T_D ≤ t): flux through the domain's own boundary.
    pub cdf: Vec<f64>,
    /// P(T_D > t) as interior mass (meaningful for bounded domains).
    pub survival: Vec<f64>,
    /// Flux through the truncation circle (zero without truncation).
    pub truncation_flux: Vec<f64>,
    /// Rigorous bound on the probability of reaching the truncation circle:
    /// `2n` times the half-line hitting probability at distance `d/√n`.
    pub truncation_bound: Vec<f64>,
    /// `|F_h - F_2h| / 3` (second-order Richardson), or NaN when disabled.
    pub error_estimate: Vec<f64>,
    pub h: f64,
}

fn run_cdf(plan: &Plan, x0: &Point, times: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match plan {
        Plan::Radial { grid } => {
            let run = grid.run(times, false);
            let zeros = vec![0.0; times.len()];
            (run.exit_cdf, run.mass, zeros)
        }
        Plan::Planar { grid, .. } => {
            let mut st = heat2d::AdiStepper::new(grid, x0);
            let mut cdf = Vec::with_capacity(times.len());
            let mut mass = Vec::with_capacity(times.len());
            let mut tr = Vec::with_capacity(times.len());
            for &t in times {
                if t > st.t {
                    st.advance_to(t);
                }
                cdf.push(st.absorbed_part(Part::Domain));
                tr.push(st.absorbed_part(Part::Truncation));
                mass.push(st.mass());
            }
            (cdf, mass, tr)
        }
    }
}

/// `P(T_D ≤ t)` for each `t` in `t_grid`, from accumulated boundary flux.
/// For truncated domains this is the flux through the domain's own boundary,
/// a lower bound on the untruncated value; the truncation flux and a bound
/// on it are reported alongside.
pub fn exit_cdf_flux(domain: &Domain, x0: &Point, t_grid: &[f64], res: &Resolution) -> Result<ExitCdf> {
    check_times(t_grid)?;
    let plan_fine = plan(domain, x0, res)?;
    let (cdf, survival, truncation_flux) = run_cdf(&plan_fine, x0, t_grid);
    let error_estimate = if res.estimate_error {
        match plan(domain, x0, &res.coarsened()) {
            Ok(coarse) => {
                let (c2, _, _) = run_cdf(&coarse, x0, t_grid);
                cdf.iter().zip(&c2).map(|(a, b)| (a - b).abs() / 3.0).collect()
            }
            Err(_) => vec![f64::NAN; t_grid.len()],
        }
    } else {
        vec![f64::NAN; t_grid.len()]
    };
    let (truncation, n) = match &plan_fine {
        Plan::Planar { truncation, .. } => (*truncation, 2.0),
        Plan::Radial { .. } => (None, x0.dim() as f64),
    };
    let truncation_bound = t_grid
        .iter()
        .map(|&t| match truncation {
            Some(r) if t > 0.0 => {
                let d = (r - x0.norm()) / n.sqrt();
                (2.0 * n * halfspace_exit_cdf(t, d).unwrap_or(1.0)).min(1.0)
            }
            _ => 0.0,
        })
        .collect();
    // t = 0 (and anything before the start offset) has no exit
    let cdf = cdf.into_iter().zip(t_grid).map(|(c, &t)| if t == 0.0 { 0.0 } else { c }).collect();
    Ok(ExitCdf {
        times: t_grid.to_vec(),
        cdf,
        survival,
        truncation_flux,
        truncation_bound,
        error_estimate,
        h: res.h,
    })
}

/// Principal eigenpair of the Dirichlet Laplacian (`-Δ`).
#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    pub lambda: f64,
    pub eigenvector: Vec<f64>,
    pub residual: f64,
    /// Set when the domain is unbounded and has no product reduction; then
    /// `lambda` is reported as 0.
    pub unbounded: bool,
    pub method: String,
}

/// `λ(D) = inf ∫|∇φ|² / ∫φ²` by inverse power iteration. Balls use the
/// radial reduction, strips the 1D cross-section, other bounded planar
/// domains the masked grid.
pub fn eigen_lambda(domain: &Domain, res: &Resolution) -> Result<EigenResult> {
    domain.validate()?;
    let base = unpunctured(domain);
    let radial = match &base {
        Domain::Ball { radius, .. } => Some((base.dim(), *radius)),
        Domain::Strip { halfwidth, .. } => Some((1, *halfwidth)),
        _ => None,
    };
    if let Some((dim, radius)) = radial {
        if res.engine != Engine::Grid || dim == 1 {
            let cells = (radius / res.h).round() as usize;
            let grid = RadialGrid::new(dim, radius, cells.max(16))?;
            let (lambda, eigenvector, residual) = eigen::radial_lowest(&grid);
            return Ok(EigenResult {
                lambda,
                eigenvector,
                residual,
                unbounded: false,
                method: if dim == 1 { "slab cross-section".into() } else { "radial".into() },
            });
        }
    }
    let bbox = bounding_box(&base);
    let (lo, hi) = match (bbox, base.is_bounded()) {
        (Some(b), true) if base.dim() == 2 => b,
        (_, true) => return Err(PdeError::Unsupported("eigenvalue grid is planar".into())),
        _ => {
            return Ok(EigenResult {
                lambda: 0.0,
                eigenvector: Vec::new(),
                residual: 0.0,
                unbounded: true,
                method: "unbounded".into(),
            })
        }
    };
    let region = Region { domain: base, truncation: None };
    let grid = Grid2::build(&region, lo, hi, res.h, 1e-3)?;
    let (lambda, eigenvector, residual) = eigen::grid_lowest(&grid);
    Ok(EigenResult { lambda, eigenvector, residual, unbounded: false, method: "grid".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CompactSet, GridMask, SchlichtId};
    use std::f64::consts::PI;

    const J01: f64 = 2.404_825_557_695_773;

    #[test]
    fn disk_eigenvalue_radial_and_grid() {
        let r = eigen_lambda(&Domain::ball(1.0), &Resolution::new(0.005)).unwrap();
        assert!((r.lambda / (J01 * J01) - 1.0).abs() < 5e-3, "{}", r.lambda);
        assert!(r.residual < 1e-6 * r.lambda);
        assert!(r.eigenvector.iter().all(|&v| v > 0.0) || r.eigenvector.iter().all(|&v| v < 0.0));
        let g = eigen_lambda(&Domain::ball(1.0), &Resolution { engine: Engine::Grid, ..Resolution::new(0.02) }).unwrap();
        assert_eq!(g.method, "grid");
        assert!((g.lambda / (J01 * J01) - 1.0).abs() < 5e-3, "{}", g.lambda);
    }

    #[test]
    fn strip_eigenvalue() {
        let r = eigen_lambda(&Domain::schlicht(SchlichtId::Strip), &Resolution::new(0.005)).unwrap();
        assert!((r.lambda - 4.0).abs() < 0.02, "{}", r.lambda);
    }

    #[test]
    fn eigenvalue_scaling() {
        let a = eigen_lambda(&Domain::ball(1.0), &Resolution::new(0.01)).unwrap().lambda;
        let b = eigen_lambda(&Domain::ball(2.0), &Resolution::new(0.02)).unwrap().lambda;
        assert!((b - a / 4.0).abs() < 1e-10 * a);
    }

    #[test]
    fn square_eigenvalue_on_mask() {
        // [-1,1]² as a mask: 2(π/2)² with the staircase exact for a square
        let mask = GridMask { corner: [-1.0, -1.0], h: 0.02, nx: 100, ny: 100, cells: vec![true; 10_000] };
        let r = eigen_lambda(&Domain::GridMask { mask }, &Resolution::new(0.02)).unwrap();
        // node-to-wall distance is h on a mask: effective side 2 + h
        let side: f64 = 2.0 + 0.02;
        let exact = 2.0 * (PI / side).powi(2);
        assert!((r.lambda / exact - 1.0).abs() < 2e-3, "{} vs {exact}", r.lambda);
    }

    #[test]
    fn unbounded_reports_zero() {
        let r = eigen_lambda(&Domain::schlicht(SchlichtId::Halfplane), &Resolution::new(0.01)).unwrap();
        assert!(r.unbounded);
        assert_eq!(r.lambda, 0.0);
    }

    #[test]
    fn start_point_errors() {
        let d = Domain::ball(1.0);
        assert_eq!(
            exit_cdf_flux(&d, &Point::xy(1.0, 0.0), &[0.1], &Resolution::new(0.01)).unwrap_err(),
            PdeError::StartOutside
        );
        assert_eq!(
            exit_cdf_flux(&d, &Point::xy(0.95, 0.0), &[0.1], &Resolution::new(0.01)).unwrap_err(),
            PdeError::TooCoarse
        );
        let hs = Domain::HalfSpace { normal: Point::xy(1.0, 0.0), offset: 1.0 };
        assert_eq!(
            exit_cdf_flux(&hs, &Point::origin(2), &[0.1], &Resolution::new(0.05)).unwrap_err(),
            PdeError::Unbounded
        );
    }

    #[test]
    fn complement_defaults_to_the_proof_envelope() {
        let d = Domain::ComplementOfCompact {
            compact: CompactSet::ClosedBall { center: Point::xy(0.5, 0.0), radius: 0.1 },
        };
        match plan(&d, &Point::origin(2), &Resolution::new(0.02)).unwrap() {
            Plan::Planar { truncation, .. } => assert!((truncation.unwrap() - 1.3).abs() < 1e-12),
            _ => panic!("expected planar"),
        }
    }

    #[test]
    fn slits_absorb_wherever_they_sit() {
        // one slit on a grid line, one between grid lines
        let hit = |x: f64| {
            let d = Domain::ComplementOfCompact {
                compact: CompactSet::Segment { a: Point::xy(x, -0.2), b: Point::xy(x, 0.2) },
            };
            exit_cdf_flux(&d, &Point::origin(2), &[0.2], &Resolution::new(0.02)).unwrap().cdf[0]
        };
        let (on, off) = (hit(0.5), hit(0.5037));
        // Euler paths with a segment-crossing test, 40000 paths at dt 2.5e-5: 0.1614
        for v in [on, off] {
            assert!((v - 0.1614).abs() < 0.01, "{on} vs {off}");
        }
        // a disk through the slit's ends catches more
        let disk = Domain::ComplementOfCompact {
            compact: CompactSet::ClosedBall { center: Point::xy(0.5, 0.0), radius: 0.2 },
        };
        let big = exit_cdf_flux(&disk, &Point::origin(2), &[0.2], &Resolution::new(0.02)).unwrap().cdf[0];
        assert!(big > on);
    }

    #[test]
    fn exit_cdf_zero_at_zero_and_monotone() {
        let d = Domain::ball(1.0);
        let ts = [0.0, 0.05, 0.1, 0.3, 1.0];
        let e = exit_cdf_flux(&d, &Point::origin(2), &ts, &Resolution::new(0.01)).unwrap();
        assert_eq!(e.cdf[0], 0.0);
        for w in e.cdf.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
