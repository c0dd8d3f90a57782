//! Closed forms and series: heat kernel, ball and half-space exit laws,
//! hitting probabilities, Green's functions of model domains.

pub mod ball;
pub mod bessel;
pub mod special;

use std::f64::consts::PI;

use statrs::function::erf::erfc;
use thiserror::Error;

use crate::geometry::{Domain, Point};

pub use ball::{ball_exit_cdf, ball_exit_log_cdf, ball_exit_quantile, ball_survival, SeriesTail};
pub use bessel::BesselTable;
pub use special::{exp_integral_e1, kolmogorov_sf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("argument out of range: {0}")]
    Domain(String),
    #[error("unsupported dimension {0}")]
    Dimension(usize),
    #[error("dimension mismatch between points")]
    Mismatch,
    #[error("Green's function has a pole at x = y")]
    Pole,
    #[error("point outside the domain")]
    Outside,
    #[error("no closed form for {0}")]
    NoClosedForm(String),
}

/// `(2πt)^{-n/2} exp(-|x-y|²/2t)`.
pub fn heat_kernel(t: f64, x: &Point, y: &Point, n: usize) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::Domain(format!("t must be positive, got {t}")));
    }
    if x.dim() != n || y.dim() != n {
        return Err(KernelError::Mismatch);
    }
    let d = x.sub(y);
    let r2 = d.dot(&d);
    Ok((2.0 * PI * t).powf(-0.5 * n as f64) * (-r2 / (2.0 * t)).exp())
}

/// Probability that 1D Brownian motion reaches level `d` by time `t`:
/// `2(1 - Φ(d/√t)) = erfc(d/√(2t))`.
pub fn halfspace_exit_cdf(t: f64, d: f64) -> Result<f64, KernelError> {
    if !(t > 0.0 && d > 0.0) {
        return Err(KernelError::Domain(format!("need t, d > 0, got t={t}, d={d}")));
    }
    Ok(erfc(d / (2.0 * t).sqrt()))
}

/// `(r/|x|)^{n-2}`: probability of ever hitting `B(0,r)` from `x`, `n ≥ 3`.
pub fn ball_hit_prob(r: f64, x: &Point, n: usize) -> Result<f64, KernelError> {
    if x.dim() != n {
        return Err(KernelError::Mismatch);
    }
    ball_hit_prob_at(r, x.norm(), n)
}

/// [`ball_hit_prob`] by distance, for any dimension `n ≥ 3`.
pub fn ball_hit_prob_at(r: f64, d: f64, n: usize) -> Result<f64, KernelError> {
    if n < 3 {
        return Err(KernelError::Dimension(n));
    }
    if !(r > 0.0) || d < r {
        return Err(KernelError::Domain(format!("need |x| ≥ r > 0, got |x|={d}, r={r}")));
    }
    Ok((r / d).powi(n as i32 - 2))
}

/// `G_D(x,y) = ∫_0^∞ p_D(s,x,y) ds` for balls and half-spaces (n = 2, 3).
/// Returns 0 when either point is on the boundary.
pub fn green_closed_form(domain: &Domain, x: &Point, y: &Point) -> Result<f64, KernelError> {
    let n = domain.dim();
    if !(2..=3).contains(&n) {
        return Err(KernelError::Dimension(n));
    }
    if x.dim() != n || y.dim() != n {
        return Err(KernelError::Mismatch);
    }
    let rxy = x.dist(y);
    match domain {
        Domain::Ball { center, radius } => {
            let (xr, yr) = (x.sub(center), y.sub(center));
            let r2 = radius * radius;
            let tol = 1e-14 * radius;
            if xr.norm() > radius + tol || yr.norm() > radius + tol {
                return Err(KernelError::Outside);
            }
            if xr.norm() >= radius - tol || yr.norm() >= radius - tol {
                return Ok(0.0);
            }
            if rxy == 0.0 {
                return Err(KernelError::Pole);
            }
            // |y| |x - y*| with y* the inversion of y in the sphere
            let img2 = r2 * r2 - 2.0 * r2 * xr.dot(&yr) + xr.dot(&xr) * yr.dot(&yr);
            Ok(match n {
                2 => (img2 / (r2 * rxy * rxy)).ln() / (2.0 * PI),
                _ => (1.0 / rxy - radius / img2.sqrt()) / (2.0 * PI),
            }
            .max(0.0))
        }
        Domain::HalfSpace { normal, offset } => {
            let u = normal.unit();
            let (dx, dy) = (offset - u.dot(x), offset - u.dot(y));
            if dx < 0.0 || dy < 0.0 {
                return Err(KernelError::Outside);
            }
            if dx == 0.0 || dy == 0.0 {
                return Ok(0.0);
            }
            if rxy == 0.0 {
                return Err(KernelError::Pole);
            }
            let image = y.add(&u.scale(2.0 * dy));
            let rimg = x.dist(&image);
            Ok(match n {
                2 => (rimg / rxy).ln() / PI,
                _ => (1.0 / rxy - 1.0 / rimg) / (2.0 * PI),
            })
        }
        other => Err(KernelError::NoClosedForm(other.label())),
    }
}

/// Rate coefficient `cos²(π/m)/2` in the small-time bound
/// `c(m) exp(-cos²(π/m)/(2t))` for exit through a regular m-gon around the
/// start point. The constant `c(m)` is not produced.
pub fn mcconnell_rate(m: u32) -> Result<f64, KernelError> {
    if m < 3 {
        return Err(KernelError::Domain(format!("need m ≥ 3, got {m}")));
    }
    Ok((PI / m as f64).cos().powi(2) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::RadialGrid;
    use proptest::prelude::*;

    #[test]
    fn heat_kernel_values() {
        let o = Point::origin(2);
        let k = heat_kernel(1.0, &o, &o, 2).unwrap();
        assert!((k - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let k = heat_kernel(0.5, &o, &Point::xy(1.0, 0.0), 2).unwrap();
        assert!((k - (-1.0f64).exp() / PI).abs() < 1e-15);
        assert!(heat_kernel(0.0, &o, &o, 2).is_err());
        assert!(heat_kernel(-1.0, &o, &o, 2).is_err());
    }

    #[test]
    fn heat_kernel_integrates_to_one() {
        // midpoint rule over the square containing the radius-8√t ball
        let t: f64 = 0.3;
        let x = Point::xy(0.2, -0.7);
        let half = 8.0 * t.sqrt();
        let m = 800;
        let h = 2.0 * half / m as f64;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let y = Point::xy(x.x() - half + (i as f64 + 0.5) * h, x.y() - half + (j as f64 + 0.5) * h);
                if y.dist(&x) <= half {
                    s += heat_kernel(t, &x, &y, 2).unwrap();
                }
            }
        }
        assert!((s * h * h - 1.0).abs() < 1e-6, "{}", s * h * h);
    }

    #[test]
    fn halfspace_values() {
        // the erfc evaluator is good to about 1e-10 relative
        assert!((halfspace_exit_cdf(1.0, 1.0).unwrap() - 0.317_310_507_862_914_1).abs() < 1e-9);
        assert!(halfspace_exit_cdf(1e12, 1.0).unwrap() > 1.0 - 1e-6);
        assert_eq!(halfspace_exit_cdf(0.7, 0.4).unwrap(), halfspace_exit_cdf(2.8, 0.8).unwrap());
        assert!(halfspace_exit_cdf(0.0, 1.0).is_err());
        assert!(halfspace_exit_cdf(1.0, -1.0).is_err());
    }

    #[test]
    fn hit_probabilities() {
        assert_eq!(ball_hit_prob(1.0, &Point::xyz(2.0, 0.0, 0.0), 3).unwrap(), 0.5);
        assert_eq!(ball_hit_prob(1.0, &Point::xyz(0.0, 1.0, 0.0), 3).unwrap(), 1.0);
        assert_eq!(ball_hit_prob_at(1.0, 2.0, 5).unwrap(), 0.125);
        assert!(ball_hit_prob(1.0, &Point::xy(2.0, 0.0), 2).is_err());
        assert!(ball_hit_prob(1.0, &Point::xyz(0.5, 0.0, 0.0), 3).is_err());
    }

    #[test]
    fn mcconnell_values() {
        assert!((mcconnell_rate(3).unwrap() - 0.125).abs() < 1e-15);
        assert!((mcconnell_rate(4).unwrap() - 0.25).abs() < 1e-15);
        assert!((mcconnell_rate(1_000_000).unwrap() - 0.5).abs() < 1e-10);
        assert!(mcconnell_rate(2).is_err());
        let mut last = 0.0;
        for m in 3..200 {
            let r = mcconnell_rate(m).unwrap();
            assert!(r > last && r < 0.5);
            last = r;
        }
    }

    #[test]
    fn disk_green_at_center() {
        let d = Domain::ball(1.0);
        let x = Point::xy((-PI).exp(), 0.0);
        let g = green_closed_form(&d, &x, &Point::origin(2)).unwrap();
        assert!((g - 1.0).abs() < 1e-14);
        assert_eq!(green_closed_form(&d, &Point::xy(0.0, 1.0), &Point::origin(2)).unwrap(), 0.0);
        assert_eq!(green_closed_form(&d, &x, &x).unwrap_err(), KernelError::Pole);
    }

    /// Oracle: time integral of the radial killed density from the center.
    /// The density at radius r is integrated in time up to T on the flux
    /// grid; the remainder is the first eigenmode tail `p(T) · 2/j²`.
    #[test]
    fn disk_green_matches_time_integral() {
        let grid = RadialGrid::new(2, 1.0, 400).unwrap();
        let t_end = 3.0;
        let times: Vec<f64> = (1..=3000).map(|k| k as f64 * t_end / 3000.0).collect();
        let run = grid.run(&times, true);
        let dens = run.densities.unwrap();
        let centers = grid.centers();
        let j = bessel::table().get(bessel::Order::Zero).zeros[0];
        for &ri in &[60usize, 120, 200, 300] {
            let r = centers[ri];
            // trapezoid in time; the density is ~0 at the start time 4h²
            let mut integral = 0.5 * dens[0][ri] * times[0];
            for k in 1..times.len() {
                integral += 0.5 * (dens[k][ri] + dens[k - 1][ri]) * (times[k] - times[k - 1]);
            }
            integral += dens[times.len() - 1][ri] * 2.0 / (j * j);
            // shell average of G over the cell
            let (a, b) = (r - 0.5 * grid.h, r + 0.5 * grid.h);
            let exact = {
                let prim = |s: f64| s * s * (0.5 - s.ln());
                (prim(b) - prim(a)) / (PI * (b * b - a * a))
            };
            let closed = green_closed_form(&Domain::ball(1.0), &Point::xy(r, 0.0), &Point::origin(2)).unwrap();
            assert!((integral / exact - 1.0).abs() < 1e-3, "r={r}: {integral} vs {exact}");
            assert!((closed / exact - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn three_ball_green_centered() {
        let d = Domain::ball_n(3, 2.0);
        let x = Point::xyz(0.5, 0.0, 0.0);
        let g = green_closed_form(&d, &x, &Point::origin(3)).unwrap();
        assert!((g - (1.0 / 0.5 - 0.5) / (2.0 * PI)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn heat_kernel_symmetric(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0, t in 0.01f64..5.0) {
            let (x, y) = (Point::xy(a, b), Point::xy(c, d));
            prop_assert_eq!(heat_kernel(t, &x, &y, 2).unwrap(), heat_kernel(t, &y, &x, 2).unwrap());
        }

        #[test]
        fn green_symmetric(r1 in 0.0f64..0.95, a1 in 0.0f64..6.28, r2 in 0.0f64..0.95, a2 in 0.0f64..6.28) {
            let x = Point::xy(r1 * a1.cos(), r1 * a1.sin());
            let y = Point::xy(r2 * a2.cos(), r2 * a2.sin());
            prop_assume!(x.dist(&y) > 1e-6);
            for d in [Domain::ball(1.0), Domain::HalfSpace { normal: Point::xy(0.0, 1.0), offset: 1.0 }] {
                let g1 = green_closed_form(&d, &x, &y).unwrap();
                let g2 = green_closed_form(&d, &y, &x).unwrap();
                prop_assert!((g1 - g2).abs() <= 1e-12 * g1.abs().max(1.0));
                prop_assert!(g1 >= 0.0);
            }
            let d3 = Domain::ball_n(3, 1.0);
            let x3 = Point::xyz(x.x(), x.y(), 0.1);
            let y3 = Point::xyz(y.x(), 0.0, y.y());
            let g1 = green_closed_form(&d3, &x3, &y3).unwrap();
            let g2 = green_closed_form(&d3, &y3, &x3).unwrap();
            prop_assert!((g1 - g2).abs() <= 1e-12 * g1.abs().max(1.0));
        }

        #[test]
        fn green_vanishes_at_boundary(a in 0.0f64..6.28, r in 0.0f64..0.9) {
            let d = Domain::ball(1.0);
            let x = Point::xy((1.0 - 1e-9) * a.cos(), (1.0 - 1e-9) * a.sin());
            let y = Point::xy(r, 0.0);
            prop_assert!(green_closed_form(&d, &x, &y).unwrap() < 1e-8);
        }
    }
}
