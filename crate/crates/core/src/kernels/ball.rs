//! Exit time of Brownian motion from a ball, started at the center.
//!
//! Large times use the Dirichlet eigenfunction series
//! `S(t) = Σ c_k exp(-j_{ν,k}² t / 2R²)`. Below `t/R² = 0.2` the series is
//! fine for the survival probability but useless for the (tiny) exit
//! probability, so that regime is read from a radial boundary-flux solve,
//! tabulated once as `ln F(t) + 1/(2t)` and glued continuously to the series.

use std::sync::OnceLock;

use serde::Serialize;

use super::bessel::{table, Order};
use super::KernelError;
use crate::pde::RadialGrid;

/// Below this value of `t/R²` the flux table is authoritative.
pub const SWITCH: f64 = 0.2;

const TABLE_T_MIN: f64 = 0.02;
const TABLE_POINTS: usize = 181;
const TABLE_CELLS: usize = 320;

/// Accuracy record for a truncated series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesTail {
    pub terms_used: usize,
    /// Bound on the omitted terms.
    pub truncation_bound: f64,
}

fn check_dim(n: usize) -> Result<(), KernelError> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(KernelError::Dimension(n))
    }
}

/// `(j_k, c_k)` of the center survival series in dimension `n`.
fn mode(n: usize, k: usize) -> (f64, f64) {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    match n {
        1 => {
            let j = (k as f64 + 0.5) * std::f64::consts::PI;
            (j, sign * 4.0 / ((2 * k + 1) as f64 * std::f64::consts::PI))
        }
        2 => {
            let zt = table().get(Order::Zero);
            let j = zt.zeros[k];
            (j, sign * 2.0 / (j * zt.jnu1_abs[k]))
        }
        _ => ((k + 1) as f64 * std::f64::consts::PI, sign * 2.0),
    }
}

fn modes(n: usize) -> usize {
    match n {
        2 => table().get(Order::Zero).zeros.len(),
        _ => super::bessel::ZEROS,
    }
}

/// Series value of `P(T > t)` for the unit ball at `τ = t/R² > 0`.
pub fn survival_series(tau: f64, n: usize) -> (f64, SeriesTail) {
    let kmax = modes(n);
    let mut sum = 0.0;
    let mut used = kmax;
    for k in 0..kmax {
        let (j, c) = mode(n, k);
        let term = c * (-0.5 * j * j * tau).exp();
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && k > 0 {
            used = k + 1;
            break;
        }
    }
    // zeros are spaced by more than 3, so j_m² ≥ j_K² + 6 (m − K) j_K and
    // |c_m| ≤ |c_K| beyond the last term kept; sum the dominating geometric tail
    let (jk, ck) = mode(n, used - 1);
    let q = (-3.0 * jk * tau).exp();
    let bound = if q < 1.0 { ck.abs() * (-0.5 * jk * jk * tau).exp() * q / (1.0 - q) } else { f64::INFINITY };
    (sum.clamp(0.0, 1.0), SeriesTail { terms_used: used, truncation_bound: bound })
}

/// Small-time table: `g(t) = ln F(t) + 1/(2t)` on a grid uniform in `1/t`.
struct FluxTable {
    n: usize,
    s: Vec<f64>,
    g: Vec<f64>,
}

impl FluxTable {
    fn build(n: usize) -> FluxTable {
        let s_lo = 1.0 / SWITCH;
        let s_hi = 1.0 / TABLE_T_MIN;
        let s: Vec<f64> = (0..TABLE_POINTS)
            .map(|i| s_hi - (s_hi - s_lo) * i as f64 / (TABLE_POINTS - 1) as f64)
            .collect();
        let times: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
        // second order in h: extrapolate from two resolutions
        let fine = RadialGrid::new(n, 1.0, 2 * TABLE_CELLS).unwrap().run(&times, false).exit_cdf;
        let coarse = RadialGrid::new(n, 1.0, TABLE_CELLS).unwrap().run(&times, false).exit_cdf;
        let mut g: Vec<f64> = fine
            .iter()
            .zip(&coarse)
            .zip(&s)
            .map(|((f, c), s)| {
                let lf = f.ln();
                let lc = c.ln();
                (4.0 * lf - lc) / 3.0 + 0.5 * s
            })
            .collect();
        // glue to the series at the switch point
        let target = (1.0 - survival_series(SWITCH, n).0).ln() + 0.5 * s_lo;
        let shift = target - g[TABLE_POINTS - 1];
        g.iter_mut().for_each(|v| *v += shift);
        FluxTable { n, s, g }
    }

    fn ln_cdf(&self, tau: f64) -> f64 {
        let s = 1.0 / tau;
        let step = self.s[0] - self.s[1];
        let g = if s >= self.s[0] {
            // F ~ 2 P(|B_t| > 1) as t → 0, i.e. g(t) − ((2−n)/2) ln t tends to
            // a known constant; interpolate linearly in t towards it
            let p = (2.0 - self.n as f64) / 2.0;
            let t0 = 1.0 / self.s[0];
            let h0 = self.g[0] - p * t0.ln();
            let a = small_time_constant(self.n);
            a + (h0 - a) * tau / t0 + p * tau.ln()
        } else {
            let x = (self.s[0] - s) / step;
            let i = (x.floor() as usize).min(TABLE_POINTS - 2);
            // cubic Lagrange on four neighbors where available
            let i0 = i.saturating_sub(1).min(TABLE_POINTS - 4);
            let xs = x - i0 as f64;
            let mut v = 0.0;
            for a in 0..4 {
                let mut l = 1.0;
                for b in 0..4 {
                    if a != b {
                        l *= (xs - b as f64) / (a as f64 - b as f64);
                    }
                }
                v += l * self.g[i0 + a];
            }
            v
        };
        g - 0.5 * s
    }
}

/// `lim_{t→0} ln F(t) + 1/(2t) − ((2−n)/2) ln t` for the unit ball.
fn small_time_constant(n: usize) -> f64 {
    match n {
        2 => std::f64::consts::LN_2,
        _ => (2.0 * (2.0 / std::f64::consts::PI).sqrt()).ln(),
    }
}

fn flux_table(n: usize) -> &'static FluxTable {
    static TABLES: [OnceLock<FluxTable>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    TABLES[n - 1].get_or_init(|| FluxTable::build(n))
}

fn check_tr(t: f64, r: f64) -> Result<(), KernelError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(KernelError::Domain(format!("radius must be positive, got {r}")));
    }
    if !(t >= 0.0) {
        return Err(KernelError::Domain(format!("time must be nonnegative, got {t}")));
    }
    Ok(())
}

/// `P^0(T_{B(0,R)} > t)` in dimension `n ∈ {1, 2, 3}` (n = 1: the interval).
pub fn ball_survival(t: f64, r: f64, n: usize) -> Result<f64, KernelError> {
    check_tr(t, r)?;
    check_dim(n)?;
    let tau = t / (r * r);
    if tau == 0.0 {
        return Ok(1.0);
    }
    if tau >= SWITCH {
        Ok(survival_series(tau, n).0)
    } else {
        Ok(-flux_table(n).ln_cdf(tau).exp_m1())
    }
}

/// `P^0(T_{B(0,R)} ≤ t)` with full relative accuracy at small `t`.
pub fn ball_exit_cdf(t: f64, r: f64, n: usize) -> Result<f64, KernelError> {
    check_tr(t, r)?;
    check_dim(n)?;
    let tau = t / (r * r);
    if tau == 0.0 {
        return Ok(0.0);
    }
    if tau >= SWITCH {
        Ok(1.0 - survival_series(tau, n).0)
    } else {
        Ok(flux_table(n).ln_cdf(tau).exp())
    }
}

/// `ln P^0(T_{B(0,R)} ≤ t)`, finite far below the f64 range of the value.
pub fn ball_exit_log_cdf(t: f64, r: f64, n: usize) -> Result<f64, KernelError> {
    check_tr(t, r)?;
    check_dim(n)?;
    let tau = t / (r * r);
    if tau == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if tau >= SWITCH {
        Ok((1.0 - survival_series(tau, n).0).ln())
    } else {
        Ok(flux_table(n).ln_cdf(tau))
    }
}

/// Exact small-time form for the 3-ball from its center (theta-function
/// inversion of the series): `F(t) = 2 √(2/πt) Σ_m exp(-(2m+1)²/2t)`.
pub fn ball3_exit_cdf_images(tau: f64) -> f64 {
    let mut sum = 0.0;
    for m in 0..50 {
        let o = (2 * m + 1) as f64;
        let term = (-o * o / (2.0 * tau)).exp();
        sum += term;
        if term < 1e-20 * sum {
            break;
        }
    }
    2.0 * (2.0 / (std::f64::consts::PI * tau)).sqrt() * sum
}

fn cdf_unit(t: f64, n: usize) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= SWITCH {
        1.0 - survival_series(t, n).0
    } else {
        flux_table(n).ln_cdf(t).exp()
    }
}

/// Regula falsi (Illinois) on a monotone CDF inside a sign-changing bracket.
fn illinois(n: usize, u: f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = cdf_unit(a, n) - u;
    let mut fb = cdf_unit(b, n) - u;
    if fa >= 0.0 {
        return a;
    }
    if fb <= 0.0 {
        return b;
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = cdf_unit(c, n) - u;
        if fc.abs() < 1e-14 || (b - a) < 1e-15 * b {
            return c;
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

/// Inverse CDF samples for fast draws: `t_i` log-spaced, `F_i = F(t_i)`.
pub struct QuantileTable {
    n: usize,
    t: Vec<f64>,
    f: Vec<f64>,
}

const QUANTILE_POINTS: usize = 2048;

impl QuantileTable {
    fn build(n: usize) -> Self {
        let (lo, hi) = (1e-3f64.ln(), 60f64.ln());
        let t: Vec<f64> = (0..QUANTILE_POINTS)
            .map(|i| (lo + (hi - lo) * i as f64 / (QUANTILE_POINTS - 1) as f64).exp())
            .collect();
        let f = t.iter().map(|&t| cdf_unit(t, n)).collect();
        QuantileTable { n, t, f }
    }

    pub fn get(n: usize) -> &'static QuantileTable {
        static TABLES: [OnceLock<QuantileTable>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        TABLES[n - 1].get_or_init(|| QuantileTable::build(n))
    }

    /// Exit time of the unit ball at level `u ∈ (0,1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.n;
        let k = self.f.partition_point(|&f| f < u);
        if k == 0 {
            let mut lo = self.t[0];
            while cdf_unit(lo, n) >= u {
                lo *= 0.5;
                if lo < 1e-9 {
                    return lo;
                }
            }
            return illinois(n, u, lo, self.t[0]);
        }
        if k == self.t.len() {
            // pure first mode: S ≈ c_1 exp(-j_1² t/2)
            let (j, c) = mode(n, 0);
            let guess = 2.0 * (c / (1.0 - u)).ln() / (j * j);
            let hi = guess.max(self.t[k - 1]) * 1.5;
            return illinois(n, u, self.t[k - 1], hi);
        }
        illinois(n, u, self.t[k - 1], self.t[k])
    }
}

/// `t` with `P^0(T_{B(0,1)} ≤ t) = u` in dimension `n`.
pub fn ball_exit_quantile(u: f64, n: usize) -> Result<f64, KernelError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(KernelError::Domain(format!("quantile level must lie in (0,1), got {u}")));
    }
    check_dim(n)?;
    Ok(QuantileTable::get(n).quantile(u))
}
