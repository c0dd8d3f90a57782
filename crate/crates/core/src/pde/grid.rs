//! Masked planar grids with sub-cell boundary distances.
//!
//! Nodes sit at `corner + (i, j) h`. A node is interior when it lies inside
//! the region (the domain with punctures ignored, intersected with an
//! optional truncation disk); other nodes are absorbing. Each interior node
//! stores, per axis direction, either its interior neighbor or the fraction
//! `θ` of a cell to the boundary crossing. Boundary faces get conductance
//! `1/θ`, which keeps the operator symmetric and second-order accurate.

use crate::geometry::{CompactSet, Domain, Point};

use super::PdeError;

/// Boundary part a face drains into.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    /// The domain's own boundary.
    Domain = 0,
    /// The truncation circle.
    Truncation = 1,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Link {
    Node(usize),
    Wall { g: f64, part: Part },
}

/// The region a grid discretizes.
#[derive(Clone, Debug)]
pub struct Region {
    pub domain: Domain,
    pub truncation: Option<f64>,
}

impl Region {
    pub fn contains(&self, x: &Point) -> bool {
        self.domain.contains_nonpolar(x) && self.truncation.map_or(true, |r| x.norm() < r)
    }

    /// First crossing along `p → q` (p inside, q outside) as a fraction of
    /// the segment, with the part crossed.
    fn crossing(&self, p: &Point, q: &Point) -> (f64, Part) {
        let d = q.sub(p);
        let dom_out = !self.domain.contains_nonpolar(q);
        let mut best = (f64::INFINITY, Part::Domain);
        if dom_out {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.domain.contains_nonpolar(&p.add(&d.scale(mid))) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = (0.5 * (lo + hi), Part::Domain);
        }
        if let Some(r) = self.truncation {
            if q.norm() >= r {
                // |p + s d| = r
                let a = d.dot(&d);
                let b = 2.0 * p.dot(&d);
                let c = p.dot(p) - r * r;
                let s = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
                if s < best.0 {
                    best = (s, Part::Truncation);
                }
            }
        }
        (best.0.clamp(0.0, 1.0), best.1)
    }

    /// Fraction along `p → q` where the link meets a slit (a segment piece of
    /// the boundary). Nodes on either side of a slit are both interior, so
    /// the membership test alone never sees it.
    fn slit_crossing(&self, p: &Point, q: &Point) -> Option<f64> {
        let d = q.sub(p);
        let cross = |u: &Point, v: &Point| u.x() * v.y() - u.y() * v.x();
        slits(&self.domain)
            .iter()
            .filter_map(|(a, b)| {
                let e = b.sub(a);
                let den = cross(&d, &e);
                let w = a.sub(p);
                if den.abs() < 1e-300 {
                    // parallel: blocks only if collinear and overlapping the link
                    if cross(&w, &e).abs() > 1e-12 * e.norm() * d.norm() {
                        return None;
                    }
                    let dd = d.dot(&d);
                    let (sa, sb) = (w.dot(&d) / dd, b.sub(p).dot(&d) / dd);
                    let (lo, hi) = (sa.min(sb).max(0.0), sa.max(sb).min(1.0));
                    return (lo <= hi).then_some(lo);
                }
                let s = cross(&w, &e) / den;
                let u = cross(&w, &d) / den;
                ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u)).then_some(s)
            })
            .min_by(f64::total_cmp)
    }
}

fn slits(domain: &Domain) -> Vec<(Point, Point)> {
    match domain {
        Domain::ComplementOfCompact { compact } => compact
            .primitives()
            .into_iter()
            .filter_map(|c| match c {
                CompactSet::Segment { a, b } => Some((*a, *b)),
                _ => None,
            })
            .collect(),
        Domain::Punctured { base, .. } => slits(base),
        Domain::Schlicht { entry } => slits(&entry.domain()),
        _ => Vec::new(),
    }
}

/// Axis directions: west, east, south, north.
pub(crate) const DIRS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Clone, Debug)]
pub struct Grid2 {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub corner: [f64; 2],
    /// Interior index for each box node.
    pub(crate) index: Vec<Option<usize>>,
    /// Box coordinates of interior nodes.
    pub(crate) nodes: Vec<(usize, usize)>,
    pub(crate) links: Vec<[Link; 4]>,
}

/// Smallest boundary fraction used; nearer crossings are clamped.
pub const THETA_MIN: f64 = 1.0 / 7.0;

impl Grid2 {
    /// Build a grid of spacing `h` over `region`, whose bounding box is
    /// `[lo, hi]` (component-wise). The origin is always a node position.
    pub fn build(region: &Region, lo: [f64; 2], hi: [f64; 2], h: f64, theta_min: f64) -> Result<Self, PdeError> {
        if region.domain.dim() != 2 {
            return Err(PdeError::Unsupported("grid solves are planar".into()));
        }
        if let Domain::GridMask { mask } = &region.domain {
            return Ok(Self::from_mask(mask, region.truncation));
        }
        let i0 = (lo[0] / h).floor() as i64 - 1;
        let j0 = (lo[1] / h).floor() as i64 - 1;
        let i1 = (hi[0] / h).ceil() as i64 + 1;
        let j1 = (hi[1] / h).ceil() as i64 + 1;
        let nx = (i1 - i0 + 1) as usize;
        let ny = (j1 - j0 + 1) as usize;
        if nx * ny > 40_000_000 {
            return Err(PdeError::Unsupported("grid too large".into()));
        }
        let corner = [i0 as f64 * h, j0 as f64 * h];
        let pos = |i: usize, j: usize| Point::xy(corner[0] + i as f64 * h, corner[1] + j as f64 * h);
        let mut index = vec![None; nx * ny];
        let mut nodes = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if region.contains(&pos(i, j)) {
                    index[j * nx + i] = Some(nodes.len());
                    nodes.push((i, j));
                }
            }
        }
        if nodes.is_empty() {
            return Err(PdeError::TooCoarse);
        }
        let mut links = Vec::with_capacity(nodes.len());
        for &(i, j) in &nodes {
            let p = pos(i, j);
            let mut l = [Link::Node(0); 4];
            for (k, (di, dj)) in DIRS.iter().enumerate() {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                let inside = ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny;
                let nb = if inside { index[nj as usize * nx + ni as usize] } else { None };
                let q = Point::xy(corner[0] + ni as f64 * h, corner[1] + nj as f64 * h);
                l[k] = match nb {
                    Some(n) => match region.slit_crossing(&p, &q) {
                        Some(theta) => Link::Wall { g: 1.0 / theta.max(theta_min), part: Part::Domain },
                        None => Link::Node(n),
                    },
                    None => {
                        // q uses the same arithmetic as the membership test, so it is outside
                        let (theta, part) = region.crossing(&p, &q);
                        Link::Wall { g: 1.0 / theta.max(theta_min), part }
                    }
                };
            }
            // keep the explicit half-step of the heat scheme positive along each axis
            for (a, b) in [(0, 1), (2, 3)] {
                if let (Link::Wall { g: ga, .. }, Link::Wall { g: gb, .. }) = (l[a], l[b]) {
                    if ga + gb > 8.0 && theta_min >= THETA_MIN {
                        let cap = |w: Link| match w {
                            Link::Wall { g, part } => Link::Wall { g: g.min(4.0), part },
                            n => n,
                        };
                        l[a] = cap(l[a]);
                        l[b] = cap(l[b]);
                    }
                }
            }
            links.push(l);
        }
        Ok(Grid2 { h, nx, ny, corner, index, nodes, links })
    }

    fn from_mask(mask: &crate::geometry::GridMask, truncation: Option<f64>) -> Self {
        let (nx, ny, h) = (mask.nx, mask.ny, mask.h);
        let corner = [mask.corner[0] + 0.5 * h, mask.corner[1] + 0.5 * h];
        let mut index = vec![None; nx * ny];
        let mut nodes = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p = Point::xy(corner[0] + i as f64 * h, corner[1] + j as f64 * h);
                if mask.cells[j * nx + i] && truncation.map_or(true, |r| p.norm() < r) {
                    index[j * nx + i] = Some(nodes.len());
                    nodes.push((i, j));
                }
            }
        }
        let links = nodes
            .iter()
            .map(|&(i, j)| {
                let mut l = [Link::Wall { g: 1.0, part: Part::Domain }; 4];
                for (k, (di, dj)) in DIRS.iter().enumerate() {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni >= 0 && nj >= 0 && (ni as usize) < nx && (nj as usize) < ny {
                        if let Some(n) = index[nj as usize * nx + ni as usize] {
                            l[k] = Link::Node(n);
                        }
                    }
                }
                l
            })
            .collect();
        Grid2 { h, nx, ny, corner, index, nodes, links }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position(&self, k: usize) -> Point {
        let (i, j) = self.nodes[k];
        Point::xy(self.corner[0] + i as f64 * self.h, self.corner[1] + j as f64 * self.h)
    }

    /// Interior node at exactly `p` when `p` is a node position.
    pub fn node_at(&self, p: &Point) -> Option<usize> {
        let fi = (p.x() - self.corner[0]) / self.h;
        let fj = (p.y() - self.corner[1]) / self.h;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 || i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        if i >= self.nx || j >= self.ny {
            return None;
        }
        self.index[j * self.nx + i]
    }

    /// Bilinear interpolation of nodal values (absorbing nodes read as 0).
    pub fn interpolate(&self, values: &[f64], p: &Point) -> f64 {
        let fi = (p.x() - self.corner[0]) / self.h;
        let fj = (p.y() - self.corner[1]) / self.h;
        let (i, j) = (fi.floor(), fj.floor());
        let (wx, wy) = (fi - i, fj - j);
        let get = |a: f64, b: f64| -> f64 {
            if a < 0.0 || b < 0.0 || a as usize >= self.nx || b as usize >= self.ny {
                return 0.0;
            }
            self.index[b as usize * self.nx + a as usize].map_or(0.0, |k| values[k])
        };
        get(i, j) * (1.0 - wx) * (1.0 - wy)
            + get(i + 1.0, j) * wx * (1.0 - wy)
            + get(i, j + 1.0) * (1.0 - wx) * wy
            + get(i + 1.0, j + 1.0) * wx * wy
    }

    /// Stiffness of `-Δ` times `h²` applied to `p` (SPD 5-point operator).
    pub(crate) fn stiffness_apply(&self, p: &[f64], out: &mut [f64]) {
        for (k, l) in self.links.iter().enumerate() {
            let mut v = 0.0;
            for link in l {
                match *link {
                    Link::Node(n) => v += p[k] - p[n],
                    Link::Wall { g, .. } => v += g * p[k],
                }
            }
            out[k] = v;
        }
    }

    /// Interior runs along x (`axis = 0`) or y (`axis = 1`), as lists of node
    /// indices in order. A run ends at any wall, including slits between two
    /// interior nodes.
    pub(crate) fn lines(&self, axis: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let (outer, inner) = if axis == 0 { (self.ny, self.nx) } else { (self.nx, self.ny) };
        let forward = if axis == 0 { 1 } else { 3 };
        for a in 0..outer {
            let mut run = Vec::new();
            for b in 0..inner {
                let (i, j) = if axis == 0 { (b, a) } else { (a, b) };
                match self.index[j * self.nx + i] {
                    Some(k) => {
                        run.push(k);
                        if !matches!(self.links[k][forward], Link::Node(_)) {
                            out.push(std::mem::take(&mut run));
                        }
                    }
                    None => {
                        if !run.is_empty() {
                            out.push(std::mem::take(&mut run));
                        }
                    }
                }
            }
            if !run.is_empty() {
                out.push(run);
            }
        }
        out
    }
}
