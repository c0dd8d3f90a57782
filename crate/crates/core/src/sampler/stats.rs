//! Estimators on exit-time samples and survival curves.

use serde::{Deserialize, Serialize};

use super::SamplerError;
use crate::kernels::kolmogorov_sf;

/// Step-function CDF on a time grid with a two-sided DKW band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfEstimate {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub dkw_halfwidth: f64,
    pub n: usize,
    pub alpha: f64,
}

impl CdfEstimate {
    /// Whether `truth(t)` lies in the band at every grid point.
    pub fn covers(&self, truth: impl Fn(f64) -> f64) -> bool {
        self.coverage(truth) == 1.0
    }

    /// Fraction of grid points whose band contains `truth(t)`.
    pub fn coverage(&self, truth: impl Fn(f64) -> f64) -> f64 {
        let inside = self
            .t
            .iter()
            .zip(&self.f)
            .filter(|(t, f)| (truth(**t) - **f).abs() <= self.dkw_halfwidth)
            .count();
        inside as f64 / self.t.len().max(1) as f64
    }
}

pub fn dkw_halfwidth(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Sorted copy; infinite entries (censored) sort last.
fn sorted(times: &[f64]) -> Vec<f64> {
    let mut v = times.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `F̂(t) = #{T_i ≤ t} / N` on `t_grid`.
pub fn ecdf(times: &[f64], t_grid: &[f64], alpha: f64) -> Result<CdfEstimate, SamplerError> {
    if times.is_empty() {
        return Err(SamplerError::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SamplerError::Invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let s = sorted(times);
    let n = s.len();
    let f = t_grid.iter().map(|&t| s.partition_point(|&x| x <= t) as f64 / n as f64).collect();
    Ok(CdfEstimate { t: t_grid.to_vec(), f, dkw_halfwidth: dkw_halfwidth(n, alpha), n, alpha })
}

/// Two-sample Kolmogorov–Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

impl KsTest {
    pub fn accepts(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Asymptotic p-value with Stephens' small-sample adjustment.
fn ks_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest, SamplerError> {
    if a.is_empty() || b.is_empty() {
        return Err(SamplerError::Empty);
    }
    let (x, y) = (sorted(a), sorted(b));
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let v = if x[i].total_cmp(&y[j]).is_le() { x[i] } else { y[j] };
        while i < n1 && x[i] == v {
            i += 1;
        }
        while j < n2 && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(KsTest { statistic: d, p_value: ks_p(d, ne), n1, n2 })
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest, SamplerError> {
    if a.is_empty() {
        return Err(SamplerError::Empty);
    }
    let x = sorted(a);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = if v.is_finite() { cdf(v) } else { 1.0 };
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(KsTest { statistic: d, p_value: ks_p(d, n), n1: x.len(), n2: 0 })
}

/// `P(T > t)` on a grid, with the sample count when it came from Monte Carlo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub n: Option<usize>,
}

impl SurvivalCurve {
    pub fn from_times(times: &[f64], t_grid: &[f64]) -> Result<Self, SamplerError> {
        let e = ecdf(times, t_grid, 0.05)?;
        Ok(SurvivalCurve { t: e.t, s: e.f.iter().map(|f| 1.0 - f).collect(), n: Some(e.n) })
    }

    pub fn exact(t: Vec<f64>, s: Vec<f64>) -> Self {
        SurvivalCurve { t, s, n: None }
    }

    fn window(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.t.iter().zip(&self.s).filter(|(t, _)| **t >= lo && **t <= hi).map(|(t, s)| (*t, *s)).collect()
    }
}

/// `k` points spaced evenly in `log t`.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1).max(1) as f64).exp()).collect()
}

/// Least-squares slope of `y` on `x` with the slope's variance under the
/// covariance `cov(i, j)` of the `y` values.
fn ls_slope(x: &[f64], y: &[f64], cov: &dyn Fn(usize, usize) -> f64) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let w: Vec<f64> = x.iter().map(|v| (v - mx) / sxx).collect();
    let slope: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let mut var = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            var += w[i] * w[j] * cov(i, j);
        }
    }
    (slope, var.max(0.0), my - slope * mx)
}

/// Polynomial tail fit `P(T > t) ≈ c t^{-H}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    /// Exponents fitted on the two halves of the window.
    pub exponent_first_half: f64,
    pub exponent_second_half: f64,
    pub super_polynomial: bool,
    pub window: (f64, f64),
    pub points: usize,
}

/// Minimum number of samples above the window start.
pub const MIN_EXCEEDANCES: f64 = 100.0;

/// Least-squares slope of `log P(T > t)` against `log t` over `window`.
/// Standard errors use the multinomial covariance of the empirical survival
/// function, `Cov(log Ŝ_i, log Ŝ_j) = (1 − S_i)/(N S_i)` for `t_i ≤ t_j`.
/// The tail is flagged super-polynomial when the two half-window exponents
/// differ by more than three standard errors and by more than 15%.
pub fn fit_tail_exponent(curve: &SurvivalCurve, window: (f64, f64)) -> Result<TailFit, SamplerError> {
    let pts = curve.window(window.0, window.1);
    if pts.len() < 4 {
        return Err(SamplerError::Invalid("tail window needs at least 4 grid points".into()));
    }
    if pts.iter().any(|(_, s)| *s <= 0.0) {
        return Err(SamplerError::InsufficientExceedances(0.0));
    }
    if let Some(n) = curve.n {
        let exceed = pts[0].1 * n as f64;
        if exceed < MIN_EXCEEDANCES {
            return Err(SamplerError::InsufficientExceedances(exceed));
        }
    }
    let fit = |p: &[(f64, f64)]| {
        let x: Vec<f64> = p.iter().map(|(t, _)| t.ln()).collect();
        let y: Vec<f64> = p.iter().map(|(_, s)| s.ln()).collect();
        let s: Vec<f64> = p.iter().map(|(_, s)| *s).collect();
        let cov = |i: usize, j: usize| match curve.n {
            Some(n) => {
                let k = i.min(j);
                (1.0 - s[k]) / (n as f64 * s[k])
            }
            None => 0.0,
        };
        let (slope, var, _) = ls_slope(&x, &y, &cov);
        (-slope, var.sqrt())
    };
    let (h, se) = fit(&pts);
    let mid = pts.len() / 2;
    let (h1, se1) = fit(&pts[..=mid]);
    let (h2, se2) = fit(&pts[mid..]);
    let diff = (h1 - h2).abs();
    let super_polynomial = diff > 3.0 * (se1 * se1 + se2 * se2).sqrt() && diff > 0.15 * h.abs().max(0.1);
    Ok(TailFit {
        exponent: h,
        std_err: se,
        ci95: (h - 1.96 * se, h + 1.96 * se),
        exponent_first_half: h1,
        exponent_second_half: h2,
        super_polynomial,
        window,
        points: pts.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub lambda: f64,
    pub std_err: f64,
    /// Half-window slopes differ by more than 5%.
    pub nonlinear: bool,
    pub window: (f64, f64),
}

/// `λ` from the slope of `-2 log P(T > t)` against `t` (weighted when the
/// curve carries a sample count).
pub fn fit_lambda(curve: &SurvivalCurve, window: (f64, f64)) -> Result<LambdaFit, SamplerError> {
    let pts = curve.window(window.0, window.1);
    if pts.len() < 4 {
        return Err(SamplerError::Invalid("lambda window needs at least 4 grid points".into()));
    }
    if pts[0].1 > 0.2 {
        return Err(SamplerError::WindowTooEarly(pts[0].1));
    }
    if pts.iter().any(|(_, s)| *s <= 0.0) {
        return Err(SamplerError::InsufficientExceedances(0.0));
    }
    let fit = |p: &[(f64, f64)]| -> (f64, f64) {
        let w: Vec<f64> = p
            .iter()
            .map(|(_, s)| match curve.n {
                Some(n) => n as f64 * s / (1.0 - s).max(1e-12),
                None => 1.0,
            })
            .collect();
        let sw: f64 = w.iter().sum();
        let mx = p.iter().zip(&w).map(|((t, _), w)| w * t).sum::<f64>() / sw;
        let my = p.iter().zip(&w).map(|((_, s), w)| w * (-2.0 * s.ln())).sum::<f64>() / sw;
        let sxx: f64 = p.iter().zip(&w).map(|((t, _), w)| w * (t - mx).powi(2)).sum();
        let sxy: f64 = p.iter().zip(&w).map(|((t, s), w)| w * (t - mx) * (-2.0 * s.ln() - my)).sum();
        let slope = sxy / sxx;
        // var(-2 log Ŝ) = 4 (1-S)/(N S) = 4 / w
        let se = if curve.n.is_some() { (4.0 / sxx).sqrt() } else { 0.0 };
        (slope, se)
    };
    let (lambda, std_err) = fit(&pts);
    let mid = pts.len() / 2;
    let (a, _) = fit(&pts[..=mid]);
    let (b, _) = fit(&pts[mid..]);
    Ok(LambdaFit { lambda, std_err, nonlinear: (a - b).abs() > 0.05 * lambda.abs(), window })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::erf::erf;

    #[test]
    fn dkw_value() {
        assert!((dkw_halfwidth(10_000, 0.01) - 0.016_277).abs() < 1e-6);
    }

    #[test]
    fn ecdf_contract() {
        let e = ecdf(&[0.5, 0.2, 0.9, f64::INFINITY], &[0.0, 0.2, 0.6, 1.0, 10.0], 0.05).unwrap();
        assert_eq!(e.f, vec![0.0, 0.25, 0.5, 0.75, 0.75]);
        assert!(ecdf(&[], &[1.0], 0.05).is_err());
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let k = ks_two_sample(&a, &a).unwrap();
        assert_eq!(k.statistic, 0.0);
        assert!(k.accepts(0.01));
        let b: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
        let k = ks_two_sample(&a, &b).unwrap();
        assert!((k.statistic - 0.1).abs() < 1e-12);
        assert!(!k.accepts(0.01));
    }

    #[test]
    fn halfplane_tail_exponent_from_closed_form() {
        let t = log_grid(3.0, 30.0, 12);
        let s = t.iter().map(|t| erf(0.5 / (2.0 * t).sqrt())).collect();
        let fit = fit_tail_exponent(&SurvivalCurve::exact(t, s), (3.0, 30.0)).unwrap();
        assert!((fit.exponent - 0.5).abs() < 0.01, "{}", fit.exponent);
        assert!(!fit.super_polynomial);
    }

    #[test]
    fn exponential_tail_is_flagged() {
        let t = log_grid(0.5, 4.0, 12);
        let s = t.iter().map(|t| 1.6 * (-2.89 * t).exp()).collect();
        let fit = fit_tail_exponent(&SurvivalCurve::exact(t, s), (0.5, 4.0)).unwrap();
        assert!(fit.super_polynomial);
    }

    #[test]
    fn lambda_from_pure_mode() {
        let t: Vec<f64> = (0..20).map(|i| 1.0 + 0.2 * i as f64).collect();
        let s = t.iter().map(|t| 1.6 * (-5.7832 * t / 2.0).exp()).collect();
        let fit = fit_lambda(&SurvivalCurve::exact(t, s), (1.0, 5.0)).unwrap();
        assert!((fit.lambda - 5.7832).abs() < 1e-10);
        assert!(!fit.nonlinear);
        let t: Vec<f64> = (0..20).map(|i| 0.01 + 0.01 * i as f64).collect();
        let s = t.iter().map(|t| (-t).exp()).collect();
        assert!(matches!(
            fit_lambda(&SurvivalCurve::exact(t, s), (0.0, 1.0)),
            Err(SamplerError::WindowTooEarly(_))
        ));
    }

    #[test]
    fn too_few_exceedances() {
        let times: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let c = SurvivalCurve::from_times(&times, &log_grid(0.95, 0.99, 5)).unwrap();
        assert!(matches!(fit_tail_exponent(&c, (0.95, 0.99)), Err(SamplerError::InsufficientExceedances(_))));
    }

    proptest! {
        #[test]
        fn ecdf_monotone_in_unit_interval(v in proptest::collection::vec(0.0f64..10.0, 1..200)) {
            let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.25).collect();
            let e = ecdf(&v, &grid, 0.01).unwrap();
            prop_assert_eq!(e.f[0], v.iter().filter(|x| **x <= 0.0).count() as f64 / v.len() as f64);
            for w in e.f.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert!(e.f.iter().all(|f| (0.0..=1.0).contains(f)));
        }

        #[test]
        fn ks_symmetric(a in proptest::collection::vec(0.0f64..1.0, 1..100), b in proptest::collection::vec(0.0f64..1.0, 1..100)) {
            let x = ks_two_sample(&a, &b).unwrap();
            let y = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(x.statistic, y.statistic);
            prop_assert!((0.0..=1.0).contains(&x.statistic));
        }
    }
}
