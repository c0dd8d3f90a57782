//! Exponential integral and the Kolmogorov distribution.

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `E_1(x) = ∫_x^∞ e^{-u}/u du` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs x > 0");
    if x <= 1.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..100 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // continued fraction, modified Lentz
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// `P(K > λ)` for the Kolmogorov distribution (limit of `√N D_N`).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi form converges fast for small λ
        let mut s = 0.0;
        for k in 1..50 {
            let o = (2 * k - 1) as f64;
            s += (-o * o * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: composite Simpson on `∫_0^1 e^{-x/v}/v dv` (substitution
    /// `u = x/v`), which has a smooth integrand for x > 0.
    fn e1_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |v: f64| if v <= 0.0 { 0.0 } else { (-x / v).exp() / v };
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            let v = i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(v);
        }
        s * h / 3.0
    }

    #[test]
    fn e1_against_quadrature() {
        for x in [0.05, 0.3, 0.9, 1.0, 1.1, 2.5, 7.0, 20.0] {
            let a = exp_integral_e1(x);
            let b = e1_quadrature(x);
            assert!((a / b - 1.0).abs() < 1e-8, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn e1_known_value() {
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_branches_meet() {
        let a = kolmogorov_sf(1.0 - 1e-12);
        let b = kolmogorov_sf(1.0);
        assert!((a - b).abs() < 1e-10);
        // standard critical values
        assert!((kolmogorov_sf(1.358_099) - 0.05).abs() < 1e-5);
        assert!((kolmogorov_sf(1.627_624) - 0.01).abs() < 1e-5);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }
}
