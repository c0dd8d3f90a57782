//! Bessel functions of the first kind for the orders the ball exit law needs,
//! and tables of their positive zeros.

use serde::Serialize;
use std::f64::consts::PI;

/// Zeros per order kept in the table.
pub const ZEROS: usize = 64;

/// `J_0` and `J_1` at `x ≥ 0`.
///
/// Power series up to `x = 8`, Miller's backward recurrence above that,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn j01(x: f64) -> (f64, f64) {
    let x = x.abs();
    if x <= 8.0 {
        let q = -0.25 * x * x;
        let (mut t0, mut t1) = (1.0, 0.5 * x);
        let (mut s0, mut s1) = (t0, t1);
        for k in 1..60 {
            let k = k as f64;
            t0 *= q / (k * k);
            t1 *= q / (k * (k + 1.0));
            s0 += t0;
            s1 += t1;
            if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
                break;
            }
        }
        return (s0, s1);
    }
    let start = 2 * ((x as usize + 30 + (10.0 * x.sqrt()) as usize) / 2);
    let (mut jp1, mut j) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let (mut out0, mut out1) = (0.0, 0.0);
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            out1 *= 1e-250;
        }
        // j now holds J_{k-1}
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
        if k == 2 {
            out1 = j;
        }
        if k == 1 {
            out0 = j;
        }
    }
    norm += out0;
    (out0 / norm, out1 / norm)
}

/// `J_{1/2}` and `J_{3/2}` in closed form.
pub fn j_half(x: f64) -> (f64, f64) {
    let a = (2.0 / (PI * x)).sqrt();
    let (s, c) = x.sin_cos();
    (a * s, a * (s / x - c))
}

/// Orders with tabulated zeros: ν = n/2 − 1 for n = 2, 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Order {
    Zero,
    Half,
}

impl Order {
    pub fn for_dim(n: usize) -> Option<Order> {
        match n {
            2 => Some(Order::Zero),
            3 => Some(Order::Half),
            _ => None,
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Order::Zero => 0.0,
            Order::Half => 0.5,
        }
    }

    /// `(J_ν(x), J_{ν+1}(x))`.
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            Order::Zero => j01(x),
            Order::Half => j_half(x),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroTable {
    pub nu: f64,
    pub zeros: Vec<f64>,
    /// `|J_{ν+1}(j_{ν,k})|`.
    pub jnu1_abs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BesselTable {
    pub orders: Vec<ZeroTable>,
}

fn zero_table(order: Order) -> ZeroTable {
    let nu = order.nu();
    let mut zeros = Vec::with_capacity(ZEROS);
    let mut jnu1_abs = Vec::with_capacity(ZEROS);
    for k in 1..=ZEROS {
        // j_{ν,k} lies in ((k + ν/2 − 1/2)π, (k + ν/2)π) for 0 ≤ ν ≤ 1/2
        let mut lo = (k as f64 + 0.5 * nu - 0.5) * PI;
        let mut hi = (k as f64 + 0.5 * nu) * PI;
        let flo = order.eval(lo).0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (order.eval(mid).0 > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let j = if order.eval(lo).0.abs() <= order.eval(hi).0.abs() { lo } else { hi };
        zeros.push(j);
        jnu1_abs.push(order.eval(j).1.abs());
    }
    ZeroTable { nu, zeros, jnu1_abs }
}

impl BesselTable {
    pub fn build() -> Self {
        BesselTable { orders: vec![zero_table(Order::Zero), zero_table(Order::Half)] }
    }

    pub fn get(&self, order: Order) -> &ZeroTable {
        match order {
            Order::Zero => &self.orders[0],
            Order::Half => &self.orders[1],
        }
    }
}

/// Process-wide table, built on first use.
pub fn table() -> &'static BesselTable {
    static TABLE: std::sync::OnceLock<BesselTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(BesselTable::build)
}
