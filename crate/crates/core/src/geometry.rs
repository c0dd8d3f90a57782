//! Domain catalog and point queries.
//!
//! Every domain knows how to answer two questions about a point: is it
//! inside, and how far is it from the boundary. Boundary pieces carry a
//! regularity flag; isolated points (punctures, point compacts) are the only
//! irregular pieces in the catalog and samplers never see them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (only 1, 2 and 3 are supported)")]
    UnsupportedDimension(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid geometry: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// A point in R^n for n ≤ 3. Unused trailing coordinates are kept at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    c: [f64; 3],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self> {
        let dim = coords.len();
        if !(1..=3).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut c = [0.0; 3];
        c[..dim].copy_from_slice(coords);
        Ok(Point { c, dim })
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Point { c: [x, y, 0.0], dim: 2 }
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Point { c: [x, y, z], dim: 3 }
    }

    pub fn origin(dim: usize) -> Self {
        Point { c: [0.0; 3], dim }
    }

    /// `e_1` scaled by `r`.
    pub fn on_axis(dim: usize, r: f64) -> Self {
        let mut p = Point::origin(dim);
        p.c[0] = r;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn x(&self) -> f64 {
        self.c[0]
    }

    pub fn y(&self) -> f64 {
        self.c[1]
    }

    pub fn dot(&self, o: &Point) -> f64 {
        self.c[0] * o.c[0] + self.c[1] * o.c[1] + self.c[2] * o.c[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, o: &Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn add(&self, o: &Point) -> Point {
        Point {
            c: [self.c[0] + o.c[0], self.c[1] + o.c[1], self.c[2] + o.c[2]],
            dim: self.dim,
        }
    }

    pub fn sub(&self, o: &Point) -> Point {
        Point {
            c: [self.c[0] - o.c[0], self.c[1] - o.c[1], self.c[2] - o.c[2]],
            dim: self.dim,
        }
    }

    pub fn scale(&self, a: f64) -> Point {
        Point {
            c: [self.c[0] * a, self.c[1] * a, self.c[2] * a],
            dim: self.dim,
        }
    }

    /// Unit vector in the direction of `self`, or `e_1` for the zero vector.
    pub fn unit(&self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            Point::on_axis(self.dim, 1.0)
        }
    }

    pub(crate) fn from_raw(c: [f64; 3], dim: usize) -> Point {
        Point { c, dim }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            Err(GeometryError::DimensionMismatch { expected: dim, got: self.dim })
        } else {
            Ok(())
        }
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = GeometryError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords().to_vec()
    }
}

/// Nearest boundary point with the outward unit normal of the boundary piece
/// it lies on. The tangent plane through `point` with normal `normal` is what
/// the bridge correction tests against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub point: Point,
    pub normal: Point,
    pub dist: f64,
}

impl BoundaryPoint {
    fn new(x: &Point, point: Point, normal: Point) -> Self {
        BoundaryPoint { point, normal, dist: x.dist(&point) }
    }
}

/// Compact obstacles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompactSet {
    ClosedBall { center: Point, radius: f64 },
    Segment { a: Point, b: Point },
    Point { at: Point },
    Union { parts: Vec<CompactSet> },
}

impl CompactSet {
    pub fn closed_ball(center: Point, radius: f64) -> Result<Self> {
        let k = CompactSet::ClosedBall { center, radius };
        k.validate()?;
        Ok(k)
    }

    pub fn segment(a: Point, b: Point) -> Result<Self> {
        let k = CompactSet::Segment { a, b };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CompactSet::ClosedBall { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::Invalid("ball radius must be positive".into()));
                }
            }
            CompactSet::Segment { a, b } => {
                a.check_dim(b.dim())?;
                if a.dist(b) == 0.0 {
                    return Err(GeometryError::Invalid("segment endpoints coincide".into()));
                }
            }
            CompactSet::Point { .. } => {}
            CompactSet::Union { parts } => {
                if parts.is_empty() {
                    return Err(GeometryError::Invalid("empty union".into()));
                }
                let d = parts[0].dim();
                for p in parts {
                    p.validate()?;
                    if p.dim() != d {
                        return Err(GeometryError::DimensionMismatch { expected: d, got: p.dim() });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            CompactSet::ClosedBall { center, .. } => center.dim(),
            CompactSet::Segment { a, .. } => a.dim(),
            CompactSet::Point { at } => at.dim(),
            CompactSet::Union { parts } => parts[0].dim(),
        }
    }

    /// Leaf primitives of the set.
    pub fn primitives(&self) -> Vec<&CompactSet> {
        match self {
            CompactSet::Union { parts } => parts.iter().flat_map(|p| p.primitives()).collect(),
            other => vec![other],
        }
    }

    /// Isolated points are polar; every other primitive has positive capacity.
    pub fn is_polar(&self) -> bool {
        self.primitives().iter().all(|p| matches!(p, CompactSet::Point { .. }))
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            CompactSet::ClosedBall { center, radius } => x.dist(center) <= *radius,
            CompactSet::Segment { a, b } => segment_nearest(x, a, b).1 == 0.0,
            CompactSet::Point { at } => x == at,
            CompactSet::Union { parts } => parts.iter().any(|p| p.contains(x)),
        }
    }

    /// Distance from `x` to the set (zero inside).
    pub fn dist(&self, x: &Point) -> f64 {
        match self {
            CompactSet::ClosedBall { center, radius } => (x.dist(center) - radius).max(0.0),
            CompactSet::Segment { a, b } => segment_nearest(x, a, b).1,
            CompactSet::Point { at } => x.dist(at),
            CompactSet::Union { parts } => parts.iter().map(|p| p.dist(x)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Distance to the set restricted to its non-polar primitives.
    pub fn dist_nonpolar(&self, x: &Point) -> f64 {
        self.primitives()
            .into_iter()
            .filter(|p| !p.is_polar())
            .map(|p| p.dist(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest point on the boundary of one primitive, with the normal pointing
    /// away from the compact (into the complement). Polar primitives are
    /// skipped unless `include_polar`.
    pub fn nearest_boundary(&self, x: &Point, include_polar: bool) -> Option<BoundaryPoint> {
        let mut best: Option<BoundaryPoint> = None;
        for p in self.primitives() {
            let bp = match p {
                CompactSet::ClosedBall { center, radius } => {
                    let u = x.sub(center).unit();
                    BoundaryPoint::new(x, center.add(&u.scale(*radius)), u)
                }
                CompactSet::Segment { a, b } => {
                    let (q, _) = segment_nearest(x, a, b);
                    BoundaryPoint::new(x, q, x.sub(&q).unit())
                }
                CompactSet::Point { at } => {
                    if !include_polar {
                        continue;
                    }
                    BoundaryPoint::new(x, *at, x.sub(at).unit())
                }
                CompactSet::Union { .. } => unreachable!("primitives are leaves"),
            };
            if best.map_or(true, |b| bp.dist < b.dist) {
                best = Some(bp);
            }
        }
        best
    }

    /// Distance from `x` to the boundary of the set.
    pub fn boundary_dist(&self, x: &Point) -> f64 {
        self.nearest_boundary(x, true).map_or(f64::INFINITY, |b| b.dist)
    }

    /// Bounding radius about the origin.
    pub fn extent(&self) -> f64 {
        match self {
            CompactSet::ClosedBall { center, radius } => center.norm() + radius,
            CompactSet::Segment { a, b } => a.norm().max(b.norm()),
            CompactSet::Point { at } => at.norm(),
            CompactSet::Union { parts } => parts.iter().map(|p| p.extent()).fold(0.0, f64::max),
        }
    }

    pub fn scaled(&self, a: f64) -> CompactSet {
        match self {
            CompactSet::ClosedBall { center, radius } => {
                CompactSet::ClosedBall { center: center.scale(a), radius: radius * a }
            }
            CompactSet::Segment { a: p, b: q } => CompactSet::Segment { a: p.scale(a), b: q.scale(a) },
            CompactSet::Point { at } => CompactSet::Point { at: at.scale(a) },
            CompactSet::Union { parts } => CompactSet::Union { parts: parts.iter().map(|p| p.scaled(a)).collect() },
        }
    }
}

fn segment_nearest(x: &Point, a: &Point, b: &Point) -> (Point, f64) {
    let ab = b.sub(a);
    let s = (x.sub(a).dot(&ab) / ab.dot(&ab)).clamp(0.0, 1.0);
    let q = a.add(&ab.scale(s));
    (q, x.dist(&q))
}

/// Pixel mask on an axis-aligned 2D box. Cells outside the box are outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMask {
    /// Lower-left corner of the box.
    pub corner: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `cells[j * nx + i]` for column `i`, row `j`.
    pub cells: Vec<bool>,
}

impl GridMask {
    /// Rasterize a domain onto a square box `[-half, half]^2`.
    pub fn rasterize(domain: &Domain, half: f64, n: usize) -> GridMask {
        let h = 2.0 * half / n as f64;
        let mut cells = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = Point::xy(-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h);
                cells.push(domain.contains(&p));
            }
        }
        GridMask { corner: [-half, -half], h, nx: n, ny: n, cells }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || self.cells.len() != self.nx * self.ny {
            return Err(GeometryError::Invalid("grid mask shape".into()));
        }
        Ok(())
    }

    fn cell_of(&self, x: &Point) -> Option<(usize, usize)> {
        let fi = ((x.x() - self.corner[0]) / self.h).floor();
        let fj = ((x.y() - self.corner[1]) / self.h).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            None
        } else {
            Some((fi as usize, fj as usize))
        }
    }

    fn at(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            false
        } else {
            self.cells[j as usize * self.nx + i as usize]
        }
    }

    fn center(&self, i: i64, j: i64) -> Point {
        Point::xy(
            self.corner[0] + (i as f64 + 0.5) * self.h,
            self.corner[1] + (j as f64 + 0.5) * self.h,
        )
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.cell_of(x).map_or(false, |(i, j)| self.cells[j * self.nx + i])
    }

    /// Exact distance to the nearest outside cell center. O(h) accurate as a
    /// distance to the true boundary.
    pub fn outside_dist(&self, x: &Point) -> (Point, f64) {
        let mut best = (Point::xy(f64::INFINITY, 0.0), f64::INFINITY);
        for j in -1..=self.ny as i64 {
            for i in -1..=self.nx as i64 {
                if self.at(i, j) {
                    continue;
                }
                let touches = self.at(i - 1, j) || self.at(i + 1, j) || self.at(i, j - 1) || self.at(i, j + 1);
                if !touches {
                    continue;
                }
                let c = self.center(i, j);
                let d = x.dist(&c);
                if d < best.1 {
                    best = (c, d);
                }
            }
        }
        best
    }
}

/// Schlicht catalog identifiers: images of the unit disk under univalent maps
/// normalized by f(0) = 0, f'(0) = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchlichtId {
    /// Identity map.
    Disk,
    /// z/(1-z): half-plane Re w > -1/2.
    Halfplane,
    /// ½ log((1+z)/(1-z)): strip |Im w| < π/4.
    Strip,
    /// z/(1-z)^2: plane minus the slit (-∞, -1/4], slit truncated at radius 3.
    Koebe,
    /// (1/(2α))[((1+z)/(1-z))^α - 1] with α = angle/π: sector of opening
    /// `angle` with apex at -1/(2α).
    Sector { angle: f64 },
}

/// Radius at which the Koebe slit is truncated.
pub const KOEBE_SLIT_END: f64 = 3.0;

impl SchlichtId {
    pub fn domain(&self) -> Domain {
        match *self {
            SchlichtId::Disk => Domain::Ball { center: Point::origin(2), radius: 1.0 },
            SchlichtId::Halfplane => Domain::HalfSpace { normal: Point::xy(-1.0, 0.0), offset: 0.5 },
            // the strip's long axis is irrelevant for exit times; keep it along y
            SchlichtId::Strip => Domain::Strip { halfwidth: PI / 4.0, dim: 2 },
            SchlichtId::Koebe => Domain::ComplementOfCompact {
                compact: CompactSet::Segment { a: Point::xy(-KOEBE_SLIT_END, 0.0), b: Point::xy(-0.25, 0.0) },
            },
            SchlichtId::Sector { angle } => Domain::Sector { angle, apex: PI / (2.0 * angle) },
        }
    }

    pub fn name(&self) -> String {
        match self {
            SchlichtId::Disk => "disk".into(),
            SchlichtId::Halfplane => "halfplane".into(),
            SchlichtId::Strip => "strip".into(),
            SchlichtId::Koebe => "koebe".into(),
            SchlichtId::Sector { angle } => format!("sector({angle:.6})"),
        }
    }
}

fn default_dim() -> usize {
    2
}

/// Catalog domains. All of them contain the origin (a puncture at the origin
/// is allowed: the origin is then an irregular boundary point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Ball { center: Point, radius: f64 },
    /// `{x : normal·x < offset}` (normal is normalized on use).
    HalfSpace { normal: Point, offset: f64 },
    /// `{x : |x_1| < halfwidth}`.
    Strip {
        halfwidth: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// Planar sector of opening `angle`, symmetric about the positive x-axis,
    /// with apex at `(-apex, 0)`.
    Sector { angle: f64, apex: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
    ComplementOfCompact { compact: CompactSet },
    Punctured { base: Box<Domain>, points: Vec<Point> },
    GridMask { mask: GridMask },
    Schlicht { entry: SchlichtId },
}

/// Result of a point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Query {
    pub inside: bool,
    pub dist: f64,
}

/// Boundary pieces with their regularity annotation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityAnnotation {
    pub primitive: String,
    pub regular: bool,
}

impl Domain {
    pub fn ball(radius: f64) -> Domain {
        Domain::Ball { center: Point::origin(2), radius }
    }

    pub fn ball_n(dim: usize, radius: f64) -> Domain {
        Domain::Ball { center: Point::origin(dim), radius }
    }

    pub fn schlicht(entry: SchlichtId) -> Domain {
        Domain::Schlicht { entry }
    }

    /// Check structural invariants (positive radii, angle range, origin
    /// inside, punctures inside the base).
    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Ball { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::Invalid("ball radius must be positive".into()));
                }
            }
            Domain::HalfSpace { normal, .. } => {
                if normal.norm() == 0.0 {
                    return Err(GeometryError::Invalid("half-space normal is zero".into()));
                }
            }
            Domain::Strip { halfwidth, dim } => {
                if !(*halfwidth > 0.0) {
                    return Err(GeometryError::Invalid("strip halfwidth must be positive".into()));
                }
                if !(1..=3).contains(dim) {
                    return Err(GeometryError::UnsupportedDimension(*dim));
                }
            }
            Domain::Sector { angle, apex } => {
                if !(*angle > 0.0 && *angle < 2.0 * PI) {
                    return Err(GeometryError::Invalid("sector angle must lie in (0, 2π)".into()));
                }
                if !(*apex > 0.0) {
                    return Err(GeometryError::Invalid("sector apex must be behind the origin".into()));
                }
            }
            Domain::Annulus { center, inner, outer } => {
                if !(*inner > 0.0 && outer > inner) {
                    return Err(GeometryError::Invalid("annulus radii".into()));
                }
                let _ = center;
            }
            Domain::ComplementOfCompact { compact } => compact.validate()?,
            Domain::Punctured { base, points } => {
                base.validate()?;
                for p in points {
                    p.check_dim(base.dim())?;
                    let q = base.query_unchecked(p);
                    if !q.inside || q.dist <= 0.0 {
                        return Err(GeometryError::Invalid("puncture not interior to base".into()));
                    }
                }
                // the origin may be one of the punctures; otherwise it must be inside
                let o = Point::origin(self.dim());
                if !points.contains(&o) && !self.contains(&o) {
                    return Err(GeometryError::Invalid("domain does not contain the origin".into()));
                }
                return Ok(());
            }
            Domain::GridMask { mask } => mask.validate()?,
            Domain::Schlicht { entry } => return entry.domain().validate(),
        }
        if !self.contains(&Point::origin(self.dim())) {
            return Err(GeometryError::Invalid("domain does not contain the origin".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.dim(),
            Domain::HalfSpace { normal, .. } => normal.dim(),
            Domain::Strip { dim, .. } => *dim,
            Domain::Sector { .. } | Domain::GridMask { .. } | Domain::Schlicht { .. } => 2,
            Domain::ComplementOfCompact { compact } => compact.dim(),
            Domain::Punctured { base, .. } => base.dim(),
        }
    }

    /// Resolve catalog indirection.
    pub fn resolved(&self) -> Domain {
        match self {
            Domain::Schlicht { entry } => entry.domain(),
            other => other.clone(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Domain::Ball { .. } | Domain::Annulus { .. } | Domain::GridMask { .. } => true,
            Domain::HalfSpace { .. }
            | Domain::Strip { .. }
            | Domain::Sector { .. }
            | Domain::ComplementOfCompact { .. } => false,
            Domain::Punctured { base, .. } => base.is_bounded(),
            Domain::Schlicht { entry } => entry.domain().is_bounded(),
        }
    }

    /// Whether `query` returns exact Euclidean distances.
    pub fn has_exact_distance(&self) -> bool {
        match self {
            Domain::GridMask { .. } => false,
            Domain::Punctured { base, .. } => base.has_exact_distance(),
            _ => true,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Domain::Ball { center, radius } => x.dist(center) < *radius,
            Domain::HalfSpace { normal, offset } => normal.unit().dot(x) < *offset,
            Domain::Strip { halfwidth, .. } => x.x().abs() < *halfwidth,
            Domain::Sector { angle, apex } => {
                let v = x.sub(&Point::xy(-apex, 0.0));
                v.norm() > 0.0 && v.y().atan2(v.x()).abs() < angle / 2.0
            }
            Domain::Annulus { center, inner, outer } => {
                let r = x.dist(center);
                r > *inner && r < *outer
            }
            Domain::ComplementOfCompact { compact } => !compact.contains(x),
            Domain::Punctured { base, points } => base.contains(x) && !points.contains(x),
            Domain::GridMask { mask } => mask.contains(x),
            Domain::Schlicht { entry } => entry.domain().contains(x),
        }
    }

    /// Membership and Euclidean distance to the boundary. Punctures count as
    /// boundary here.
    pub fn query(&self, x: &Point) -> Result<Query> {
        x.check_dim(self.dim())?;
        Ok(self.query_unchecked(x))
    }

    pub(crate) fn query_unchecked(&self, x: &Point) -> Query {
        let dist = self.nearest_boundary(x, true).map_or(f64::INFINITY, |b| b.dist);
        Query { inside: self.contains(x), dist }
    }

    /// Membership and distance with polar boundary pieces removed: the view a
    /// Brownian path has of the domain.
    pub fn query_nonpolar(&self, x: &Point) -> Query {
        let dist = self.nearest_boundary(x, false).map_or(f64::INFINITY, |b| b.dist);
        Query { inside: self.contains_nonpolar(x), dist }
    }

    /// Membership ignoring punctures.
    pub fn contains_nonpolar(&self, x: &Point) -> bool {
        match self {
            Domain::Punctured { base, .. } => base.contains_nonpolar(x),
            Domain::ComplementOfCompact { compact } => !compact
                .primitives()
                .iter()
                .any(|p| !p.is_polar() && p.contains(x)),
            other => other.contains(x),
        }
    }

    /// Polar points of the boundary (punctures, point obstacles).
    pub fn polar_points(&self) -> Vec<Point> {
        match self {
            Domain::Punctured { base, points } => {
                let mut v = base.polar_points();
                v.extend(points.iter().copied());
                v
            }
            Domain::ComplementOfCompact { compact } => compact
                .primitives()
                .into_iter()
                .filter_map(|p| match p {
                    CompactSet::Point { at } => Some(*at),
                    _ => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Nearest boundary point and outward normal (pointing out of the domain).
    pub fn nearest_boundary(&self, x: &Point, include_polar: bool) -> Option<BoundaryPoint> {
        match self {
            Domain::Ball { center, radius } => {
                let u = x.sub(center).unit();
                Some(BoundaryPoint::new(x, center.add(&u.scale(*radius)), u))
            }
            Domain::HalfSpace { normal, offset } => {
                let n = normal.unit();
                let gap = offset - n.dot(x);
                Some(BoundaryPoint::new(x, x.add(&n.scale(gap)), n))
            }
            Domain::Strip { halfwidth, dim } => {
                let s = if x.x() >= 0.0 { 1.0 } else { -1.0 };
                let mut q = *x;
                q.c[0] = s * halfwidth;
                Some(BoundaryPoint::new(x, q, Point::on_axis(*dim, s)))
            }
            Domain::Sector { angle, apex } => {
                let a = Point::xy(-apex, 0.0);
                let v = x.sub(&a);
                let half = angle / 2.0;
                let mut best: Option<BoundaryPoint> = None;
                for s in [1.0, -1.0] {
                    let u = Point::xy(half.cos(), s * half.sin());
                    let proj = v.dot(&u);
                    let bp = if proj <= 0.0 {
                        BoundaryPoint::new(x, a, v.unit())
                    } else {
                        // outward normal of this edge
                        let n = Point::xy(-half.sin(), s * half.cos());
                        BoundaryPoint::new(x, a.add(&u.scale(proj)), n)
                    };
                    if best.map_or(true, |b| bp.dist < b.dist) {
                        best = Some(bp);
                    }
                }
                best
            }
            Domain::Annulus { center, inner, outer } => {
                let v = x.sub(center);
                let u = v.unit();
                let r = v.norm();
                if (r - inner).abs() <= (outer - r).abs() {
                    Some(BoundaryPoint::new(x, center.add(&u.scale(*inner)), u.scale(-1.0)))
                } else {
                    Some(BoundaryPoint::new(x, center.add(&u.scale(*outer)), u))
                }
            }
            Domain::ComplementOfCompact { compact } => compact.nearest_boundary(x, include_polar).map(|b| {
                // out of the domain means into the compact
                BoundaryPoint { normal: b.normal.scale(-1.0), ..b }
            }),
            Domain::Punctured { base, points } => {
                let mut best = base.nearest_boundary(x, include_polar);
                if include_polar {
                    for p in points {
                        let bp = BoundaryPoint::new(x, *p, p.sub(x).unit());
                        if best.map_or(true, |b| bp.dist < b.dist) {
                            best = Some(bp);
                        }
                    }
                }
                best
            }
            Domain::GridMask { mask } => {
                let (c, _) = mask.outside_dist(x);
                Some(BoundaryPoint::new(x, c, c.sub(x).unit()))
            }
            Domain::Schlicht { entry } => entry.domain().nearest_boundary(x, include_polar),
        }
    }

    /// `(d(∂D), d((∂D)^r))`: distances from the origin to the boundary and
    /// to its regular part. An empty regular boundary gives `+∞`.
    pub fn d_regular(&self) -> (f64, f64) {
        let o = Point::origin(self.dim());
        let d_boundary = self.nearest_boundary(&o, true).map_or(f64::INFINITY, |b| b.dist);
        let d_regular = self.nearest_boundary(&o, false).map_or(f64::INFINITY, |b| b.dist);
        (d_boundary, d_regular)
    }

    /// Boundary primitives with their regularity flags (catalog rule: isolated
    /// points irregular, everything else regular).
    pub fn regularity(&self) -> Vec<RegularityAnnotation> {
        let ann = |s: &str, regular| RegularityAnnotation { primitive: s.to_string(), regular };
        match self {
            Domain::Ball { .. } => vec![ann("sphere", true)],
            Domain::HalfSpace { .. } => vec![ann("plane", true)],
            Domain::Strip { .. } => vec![ann("plane", true), ann("plane", true)],
            Domain::Sector { .. } => vec![ann("ray", true), ann("ray", true)],
            Domain::Annulus { .. } => vec![ann("sphere", true), ann("sphere", true)],
            Domain::ComplementOfCompact { compact } => compact
                .primitives()
                .into_iter()
                .map(|p| match p {
                    CompactSet::ClosedBall { .. } => ann("sphere", true),
                    CompactSet::Segment { .. } => ann("segment", true),
                    CompactSet::Point { .. } => ann("point", false),
                    CompactSet::Union { .. } => unreachable!(),
                })
                .collect(),
            Domain::Punctured { base, points } => {
                let mut v = base.regularity();
                v.extend(points.iter().map(|_| ann("point", false)));
                v
            }
            Domain::GridMask { .. } => vec![ann("mask edge", true)],
            Domain::Schlicht { entry } => entry.domain().regularity(),
        }
    }

    /// Domain scaled by `a > 0` about the origin.
    pub fn scaled(&self, a: f64) -> Domain {
        match self {
            Domain::Ball { center, radius } => Domain::Ball { center: center.scale(a), radius: radius * a },
            Domain::HalfSpace { normal, offset } => Domain::HalfSpace { normal: *normal, offset: offset * a },
            Domain::Strip { halfwidth, dim } => Domain::Strip { halfwidth: halfwidth * a, dim: *dim },
            Domain::Sector { angle, apex } => Domain::Sector { angle: *angle, apex: apex * a },
            Domain::Annulus { center, inner, outer } => {
                Domain::Annulus { center: center.scale(a), inner: inner * a, outer: outer * a }
            }
            Domain::ComplementOfCompact { compact } => Domain::ComplementOfCompact { compact: compact.scaled(a) },
            Domain::Punctured { base, points } => Domain::Punctured {
                base: Box::new(base.scaled(a)),
                points: points.iter().map(|p| p.scale(a)).collect(),
            },
            Domain::GridMask { mask } => Domain::GridMask {
                mask: GridMask {
                    corner: [mask.corner[0] * a, mask.corner[1] * a],
                    h: mask.h * a,
                    ..mask.clone()
                },
            },
            Domain::Schlicht { entry } => entry.domain().scaled(a),
        }
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match self {
            Domain::Ball { radius, center } => format!("ball(r={radius}, |c|={})", center.norm()),
            Domain::HalfSpace { offset, .. } => format!("halfspace(d={offset})"),
            Domain::Strip { halfwidth, .. } => format!("strip(hw={halfwidth:.6})"),
            Domain::Sector { angle, apex } => format!("sector(angle={angle:.6}, apex={apex:.6})"),
            Domain::Annulus { inner, outer, .. } => format!("annulus({inner}, {outer})"),
            Domain::ComplementOfCompact { .. } => "complement_of_compact".into(),
            Domain::Punctured { base, points } => format!("punctured({}, {} pts)", base.label(), points.len()),
            Domain::GridMask { mask } => format!("mask({}x{})", mask.nx, mask.ny),
            Domain::Schlicht { entry } => format!("schlicht:{}", entry.name()),
        }
    }
}
