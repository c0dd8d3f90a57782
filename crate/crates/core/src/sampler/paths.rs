//! Path engines: Euler–Maruyama with a Brownian-bridge crossing test, and
//! walk-on-spheres with exact-in-law ball exit times.

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal, UnitCircle, UnitSphere};

use crate::geometry::{BoundaryPoint, CompactSet, Domain, Point};
use crate::kernels::ball::QuantileTable;

/// Where a path ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorbed {
    /// Through the outer (domain) boundary.
    Exit,
    /// On the obstacle.
    Hit,
    /// Still alive at the time cap (or step cap).
    Censored,
}

#[derive(Clone, Copy, Debug)]
pub struct PathEnd {
    pub time: f64,
    pub point: Point,
    pub how: Absorbed,
}

/// Killing region seen by a path: a domain, optionally minus an obstacle.
/// Polar pieces (points) are invisible throughout.
pub(crate) struct Killing<'a> {
    pub outer: &'a Domain,
    pub obstacle: Option<&'a CompactSet>,
}

impl Killing<'_> {
    /// `None` while inside, otherwise which part was crossed.
    fn outside(&self, x: &Point) -> Option<Absorbed> {
        if !self.outer.contains_nonpolar(x) {
            return Some(Absorbed::Exit);
        }
        if let Some(k) = self.obstacle {
            if k.primitives().iter().any(|p| !p.is_polar() && p.contains(x)) {
                return Some(Absorbed::Hit);
            }
        }
        None
    }

    /// Nearest regular boundary point with the normal pointing out of the
    /// killing region.
    fn nearest(&self, x: &Point) -> Option<(BoundaryPoint, Absorbed)> {
        let mut best = self.outer.nearest_boundary(x, false).map(|b| (b, Absorbed::Exit));
        if let Some(k) = self.obstacle {
            if let Some(b) = k.nearest_boundary(x, false) {
                let b = BoundaryPoint { normal: b.normal.scale(-1.0), ..b };
                if best.as_ref().map_or(true, |(o, _)| b.dist < o.dist) {
                    best = Some((b, Absorbed::Hit));
                }
            }
        }
        best
    }
}

fn gaussian_step<R: Rng + ?Sized>(rng: &mut R, dim: usize, sd: f64) -> Point {
    let mut c = [0.0; 3];
    for v in c.iter_mut().take(dim) {
        let z: f64 = StandardNormal.sample(rng);
        *v = sd * z;
    }
    Point::from_raw(c, dim)
}

fn sphere_dir<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Point {
    match dim {
        1 => Point::from_raw([if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0, 0.0], 1),
        2 => {
            let [a, b] = UnitCircle.sample(rng);
            Point::xy(a, b)
        }
        _ => {
            let [a, b, c] = UnitSphere.sample(rng);
            Point::xyz(a, b, c)
        }
    }
}

/// Euler–Maruyama options.
#[derive(Clone, Copy, Debug)]
pub struct EmOptions {
    pub dt: f64,
    /// Test each step for an unobserved crossing of the nearest tangent plane.
    pub bridge: bool,
    pub max_time: f64,
}

/// Bridge crossing needs `2 d₁ d₂ / dt` below this to be worth a uniform.
const BRIDGE_CUTOFF: f64 = 40.0;

pub(crate) fn em_walk<R: Rng + ?Sized>(region: &Killing, x0: &Point, opts: &EmOptions, rng: &mut R) -> PathEnd {
    let dim = x0.dim();
    let sd = opts.dt.sqrt();
    let mut x = *x0;
    let mut t = 0.0;
    loop {
        let near = region.nearest(&x);
        let y = x.add(&gaussian_step(rng, dim, sd));
        t += opts.dt;
        if let Some(how) = region.outside(&y) {
            let point = region.nearest(&y).map_or(y, |(b, _)| b.point);
            return PathEnd { time: t, point, how };
        }
        if opts.bridge {
            if let Some((b, how)) = near {
                let d2 = b.point.sub(&y).dot(&b.normal);
                let e = 2.0 * b.dist * d2 / opts.dt;
                if d2 > 0.0 && e < BRIDGE_CUTOFF {
                    let u: f64 = rng.random();
                    if u < (-e).exp() {
                        // crossing inside the step; land on the nearer tangent point
                        let point = region.nearest(&y).map_or(b.point, |(c, _)| c.point);
                        return PathEnd { time: t, point, how };
                    }
                }
            }
        }
        x = y;
        if t >= opts.max_time {
            return PathEnd { time: f64::INFINITY, point: x, how: Absorbed::Censored };
        }
    }
}

/// Walk-on-spheres options.
#[derive(Clone, Copy, Debug)]
pub struct WosOptions {
    pub eps: f64,
    pub max_time: f64,
    /// Accumulate ball exit times (off for pure hitting questions).
    pub with_time: bool,
    pub max_steps: usize,
}

pub(crate) fn wos_walk<R: Rng + ?Sized>(region: &Killing, x0: &Point, opts: &WosOptions, rng: &mut R) -> PathEnd {
    let dim = x0.dim();
    let table = opts.with_time.then(|| QuantileTable::get(dim));
    let mut x = *x0;
    let mut t = 0.0;
    for _ in 0..opts.max_steps {
        let (b, how) = match region.nearest(&x) {
            Some(v) => v,
            None => return PathEnd { time: f64::INFINITY, point: x, how: Absorbed::Censored },
        };
        if b.dist < opts.eps {
            return PathEnd { time: t, point: b.point, how };
        }
        if let Some(q) = table {
            let u: f64 = Open01.sample(rng);
            t += b.dist * b.dist * q.quantile(u);
            if t > opts.max_time {
                return PathEnd { time: f64::INFINITY, point: x, how: Absorbed::Censored };
            }
        }
        x = x.add(&sphere_dir(rng, dim).scale(b.dist));
    }
    PathEnd { time: f64::INFINITY, point: x, how: Absorbed::Censored }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::stream;

    #[test]
    fn em_ends_on_the_boundary() {
        let d = Domain::ball(1.0);
        let region = Killing { outer: &d, obstacle: None };
        let opts = EmOptions { dt: 1e-3, bridge: true, max_time: f64::INFINITY };
        for i in 0..200 {
            let mut rng = stream(3, i);
            let end = em_walk(&region, &Point::origin(2), &opts, &mut rng);
            assert_eq!(end.how, Absorbed::Exit);
            assert!(end.time > 0.0);
            assert!((end.point.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wos_ends_within_eps() {
        let d = Domain::schlicht(crate::geometry::SchlichtId::Strip);
        let d = d.resolved();
        let region = Killing { outer: &d, obstacle: None };
        let opts = WosOptions { eps: 1e-4, max_time: f64::INFINITY, with_time: true, max_steps: 1_000_000 };
        for i in 0..200 {
            let mut rng = stream(5, i);
            let end = wos_walk(&region, &Point::origin(2), &opts, &mut rng);
            assert_eq!(end.how, Absorbed::Exit);
            assert!((end.point.x().abs() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        }
    }

    #[test]
    fn time_cap_censors() {
        let d = Domain::schlicht(crate::geometry::SchlichtId::Halfplane).resolved();
        let region = Killing { outer: &d, obstacle: None };
        let opts = EmOptions { dt: 1e-2, bridge: true, max_time: 0.05 };
        let mut censored = 0;
        for i in 0..100 {
            let end = em_walk(&region, &Point::origin(2), &opts, &mut stream(1, i));
            if end.how == Absorbed::Censored {
                assert!(end.time.is_infinite());
                censored += 1;
            }
        }
        // P(T > 0.05) from distance 1/2 is erf(0.5/√0.1) ≈ 0.886
        assert!(censored > 70);
    }
}
