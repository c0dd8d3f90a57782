//! Schlicht catalog: closed-form univalent maps of the unit disk with
//! `f(0) = 0`, `f'(0) = 1`, and the domains they produce.
//!
//! | id | f(z) | image |
//! |----|------|-------|
//! | disk | z | unit disk |
//! | halfplane | z/(1-z) | Re w > -1/2 |
//! | strip | ½ log((1+z)/(1-z)) | \|Im w\| < π/4 |
//! | koebe | z/(1-z)² | plane minus (-∞, -1/4] |
//! | sector(θ) | ((1+z)/(1-z))^α - 1, over 2α, α = θ/π | sector of opening θ, apex -1/(2α) |
//!
//! Normalization: each map is `z + O(z²)` at the origin. For the strip,
//! `½(log(1+z) - log(1-z)) = z + z³/3 + …`; for the sector,
//! `((1+z)/(1-z))^α = 1 + 2αz + O(z²)`.
//!
//! The stored geometry is the image up to a Euclidean isometry (the strip is
//! stored with its long axis vertical), which leaves exit-time laws unchanged.
//! The Koebe slit is cut at radius [`KOEBE_SLIT_END`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{Domain, Point, SchlichtId};
use crate::kernels::bessel::{table, Order};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchlichtEntry {
    pub id: SchlichtId,
    /// The map in words.
    pub map: String,
    pub domain: Domain,
    /// Principal eigenvalue of `-Δ`; 0 when the tail is polynomial.
    pub lambda_ref: f64,
    /// Tail exponent `H(D)`; `None` when the tail is exponential (`H = ∞`).
    pub h_ref: Option<f64>,
}

impl SchlichtEntry {
    pub fn new(id: SchlichtId) -> SchlichtEntry {
        let j01 = table().get(Order::Zero).zeros[0];
        let (map, lambda_ref, h_ref) = match id {
            SchlichtId::Disk => ("z".to_string(), j01 * j01, None),
            SchlichtId::Halfplane => ("z/(1-z)".into(), 0.0, Some(0.5)),
            // cross-section of width π/2
            SchlichtId::Strip => ("log((1+z)/(1-z))/2".into(), 4.0, None),
            // slit plane: Hardy number 1/2
            SchlichtId::Koebe => ("z/(1-z)^2".into(), 0.0, Some(0.25)),
            SchlichtId::Sector { angle } => {
                (format!("(((1+z)/(1-z))^a - 1)/(2a), a = {:.6}", angle / PI), 0.0, Some(PI / (2.0 * angle)))
            }
        };
        SchlichtEntry { id, map, domain: id.domain(), lambda_ref, h_ref }
    }

    pub fn name(&self) -> String {
        self.id.name()
    }

    /// `f(z)` in the stored orientation.
    pub fn map_point(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self.id {
            SchlichtId::Disk => z,
            SchlichtId::Halfplane => z / (one - z),
            SchlichtId::Strip => {
                let w = 0.5 * ((one + z) / (one - z)).ln();
                Complex64::new(w.im, w.re)
            }
            SchlichtId::Koebe => z / ((one - z) * (one - z)),
            SchlichtId::Sector { angle } => {
                let a = angle / PI;
                (((one + z) / (one - z)).powf(a) - one) / (2.0 * a)
            }
        }
    }

    pub fn contains(&self, w: Complex64) -> bool {
        self.domain.contains(&Point::xy(w.re, w.im))
    }
}

/// Every catalog entry, with the quarter-plane sector.
pub fn catalog() -> Vec<SchlichtEntry> {
    [
        SchlichtId::Disk,
        SchlichtId::Halfplane,
        SchlichtId::Strip,
        SchlichtId::Koebe,
        SchlichtId::Sector { angle: PI / 2.0 },
    ]
    .into_iter()
    .map(SchlichtEntry::new)
    .collect()
}
