//! Monte Carlo exit times and the estimators that consume them.
//!
//! Every sample `i` of a batch draws from its own ChaCha stream keyed by
//! `(seed, i)`, so batches are bit-identical for any number of workers.

pub mod paths;
pub mod stats;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CompactSet, Domain, GeometryError, Point};

pub use paths::{Absorbed, EmOptions, PathEnd, WosOptions};
pub use stats::{
    dkw_halfwidth, ecdf, fit_lambda, fit_tail_exponent, ks_one_sample, ks_two_sample, log_grid, CdfEstimate, KsTest,
    LambdaFit, SurvivalCurve, TailFit,
};

use paths::{em_walk, wos_walk, Killing};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("start point is not interior")]
    StartOutside,
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("shell width must be positive, got {0}")]
    BadEps(f64),
    #[error("walk-on-spheres needs exact boundary distances (mask domains are excluded)")]
    NoExactDistance,
    #[error("empty sample")]
    Empty,
    #[error("only {0:.1} samples exceed the window start (need 100)")]
    InsufficientExceedances(f64),
    #[error("survival {0:.3} at the window start is above 0.2")]
    WindowTooEarly(f64),
    #[error("obstacle is not inside the outer domain")]
    ObstacleOutside,
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-sample random stream.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Which path engine and its discretization parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Em {
        dt: f64,
        #[serde(default = "yes")]
        bridge: bool,
    },
    Wos {
        eps: f64,
    },
}

fn yes() -> bool {
    true
}

impl SamplerSpec {
    pub fn id(&self) -> &'static str {
        match self {
            SamplerSpec::Em { .. } => "em",
            SamplerSpec::Wos { .. } => "wos",
        }
    }

    fn check(&self, domain: &Domain) -> Result<(), SamplerError> {
        match *self {
            SamplerSpec::Em { dt, .. } if !(dt > 0.0 && dt.is_finite()) => Err(SamplerError::BadStep(dt)),
            SamplerSpec::Wos { eps } if !(eps > 0.0 && eps.is_finite()) => Err(SamplerError::BadEps(eps)),
            SamplerSpec::Wos { .. } if !domain.has_exact_distance() => Err(SamplerError::NoExactDistance),
            _ => Ok(()),
        }
    }
}

fn check_start(domain: &Domain, x0: &Point) -> Result<(), SamplerError> {
    let q = domain.query(x0)?;
    let q = if q.inside { q } else { domain.query_nonpolar(x0) };
    // starting on a puncture is allowed: a point is invisible to the path
    let on_puncture = domain.polar_points().contains(x0);
    if !(q.inside || on_puncture) || domain.query_nonpolar(x0).dist <= 0.0 {
        return Err(SamplerError::StartOutside);
    }
    Ok(())
}

/// One exit: `exit_time = ∞` marks a path censored at the time cap, with
/// `exit_point` its last position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitSample {
    pub exit_time: f64,
    pub exit_point: Point,
}

impl ExitSample {
    pub fn censored(&self) -> bool {
        !self.exit_time.is_finite()
    }
}

impl From<PathEnd> for ExitSample {
    fn from(e: PathEnd) -> Self {
        ExitSample { exit_time: e.time, exit_point: e.point }
    }
}

/// Single Euler–Maruyama exit with bridge correction.
pub fn em_exit(domain: &Domain, x0: &Point, dt: f64, rng: &mut ChaCha8Rng) -> Result<ExitSample, SamplerError> {
    em_exit_capped(domain, x0, dt, f64::INFINITY, rng)
}

pub fn em_exit_capped(
    domain: &Domain,
    x0: &Point,
    dt: f64,
    max_time: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ExitSample, SamplerError> {
    let domain = domain.resolved();
    SamplerSpec::Em { dt, bridge: true }.check(&domain)?;
    check_start(&domain, x0)?;
    let region = Killing { outer: &domain, obstacle: None };
    Ok(em_walk(&region, x0, &EmOptions { dt, bridge: true, max_time }, rng).into())
}

/// Single walk-on-spheres exit.
pub fn wos_exit(domain: &Domain, x0: &Point, eps: f64, rng: &mut ChaCha8Rng) -> Result<ExitSample, SamplerError> {
    wos_exit_capped(domain, x0, eps, f64::INFINITY, rng)
}

pub fn wos_exit_capped(
    domain: &Domain,
    x0: &Point,
    eps: f64,
    max_time: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ExitSample, SamplerError> {
    let domain = domain.resolved();
    SamplerSpec::Wos { eps }.check(&domain)?;
    check_start(&domain, x0)?;
    let region = Killing { outer: &domain, obstacle: None };
    let opts = WosOptions { eps, max_time, with_time: true, max_steps: usize::MAX };
    Ok(wos_walk(&region, x0, &opts, rng).into())
}

/// Everything needed to regenerate a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub domain: Domain,
    pub x0: Point,
    pub sampler: SamplerSpec,
    pub seed: u64,
    pub count: usize,
    /// Paths alive at this time are censored (required for heavy tails).
    #[serde(default)]
    pub max_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExitSampleBatch {
    pub spec: BatchSpec,
    pub samples: Vec<ExitSample>,
}

/// Sidecar written next to a batch CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    domain_id: String,
    sampler_id: String,
    spec: BatchSpec,
    shell_bias_bound: Option<f64>,
    censored: usize,
}

impl ExitSampleBatch {
    /// Generate `spec.count` samples in parallel.
    pub fn generate(spec: BatchSpec) -> Result<Self, SamplerError> {
        let domain = spec.domain.resolved();
        domain.validate()?;
        spec.sampler.check(&domain)?;
        check_start(&domain, &spec.x0)?;
        let max_time = spec.max_time.unwrap_or(f64::INFINITY);
        let region = Killing { outer: &domain, obstacle: None };
        let run = |i: usize| -> ExitSample {
            let mut rng = stream(spec.seed, i as u64);
            let end = match spec.sampler {
                SamplerSpec::Em { dt, bridge } => em_walk(&region, &spec.x0, &EmOptions { dt, bridge, max_time }, &mut rng),
                SamplerSpec::Wos { eps } => wos_walk(
                    &region,
                    &spec.x0,
                    &WosOptions { eps, max_time, with_time: true, max_steps: usize::MAX },
                    &mut rng,
                ),
            };
            end.into()
        };
        let samples = (0..spec.count).into_par_iter().map(run).collect();
        Ok(ExitSampleBatch { spec, samples })
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.exit_time).collect()
    }

    pub fn censored(&self) -> usize {
        self.samples.iter().filter(|s| s.censored()).count()
    }

    pub fn mean_time(&self) -> Option<f64> {
        if self.censored() > 0 || self.samples.is_empty() {
            return None;
        }
        Some(self.samples.iter().map(|s| s.exit_time).sum::<f64>() / self.samples.len() as f64)
    }

    /// Bias bound on the mean exit time from stopping `eps` short of the
    /// boundary: from distance `eps` the remaining time is at most the slab
    /// value `eps (w - eps)` with `w` the domain's diameter (convex domains).
    pub fn shell_bias_bound(&self) -> Option<f64> {
        let SamplerSpec::Wos { eps } = self.spec.sampler else { return None };
        let w = match self.spec.domain.resolved() {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Punctured { base, .. } => match *base {
                Domain::Ball { radius, .. } => 2.0 * radius,
                _ => return None,
            },
            Domain::Strip { halfwidth, .. } => 2.0 * halfwidth,
            _ => return None,
        };
        Some(eps * w)
    }

    /// CSV `index,exit_time,exit_x,exit_y[,exit_z]` plus a JSON sidecar at
    /// the same path with extension `.json`.
    pub fn write(&self, csv_path: &Path) -> Result<PathBuf, SamplerError> {
        let dim = self.spec.x0.dim();
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
        let mut header = vec!["index", "exit_time", "exit_x", "exit_y", "exit_z"];
        header.truncate(2 + dim.max(2));
        w.write_record(&header)?;
        for (i, s) in self.samples.iter().enumerate() {
            let mut rec = vec![i.to_string(), fmt_f64(s.exit_time)];
            for k in 0..dim.max(2) {
                rec.push(fmt_f64(s.exit_point.coords().get(k).copied().unwrap_or(0.0)));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        let side = csv_path.with_extension("json");
        let meta = Sidecar {
            domain_id: self.spec.domain.label(),
            sampler_id: self.spec.sampler.id().into(),
            spec: self.spec.clone(),
            shell_bias_bound: self.shell_bias_bound(),
            censored: self.censored(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(&side)?), &meta)?;
        Ok(side)
    }

    /// Read a batch written by [`ExitSampleBatch::write`].
    pub fn read(csv_path: &Path) -> Result<Self, SamplerError> {
        let meta: Sidecar = serde_json::from_reader(BufReader::new(File::open(csv_path.with_extension("json"))?))?;
        let dim = meta.spec.x0.dim();
        let mut r = csv::Reader::from_reader(BufReader::new(File::open(csv_path)?));
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64, SamplerError> {
                rec.get(k)
                    .ok_or_else(|| SamplerError::Invalid("short CSV record".into()))?
                    .parse::<f64>()
                    .map_err(|e| SamplerError::Invalid(e.to_string()))
            };
            let coords: Vec<f64> = (0..dim).map(|k| num(2 + k)).collect::<Result<_, _>>()?;
            samples.push(ExitSample { exit_time: num(1)?, exit_point: Point::new(&coords)? });
        }
        Ok(ExitSampleBatch { spec: meta.spec, samples })
    }
}

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        // integral values print without a trailing ".0"; "-0" keeps its sign
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

/// Empirical CDF of a batch on `t_grid` with a DKW band at level `alpha`.
pub fn empirical_cdf(batch: &ExitSampleBatch, t_grid: &[f64], alpha: f64) -> Result<CdfEstimate, SamplerError> {
    ecdf(&batch.times(), t_grid, alpha)
}

/// Engine for hitting questions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HitEngine {
    Wos { eps: f64 },
    Em { dt: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitEstimate {
    pub p: f64,
    pub std_err: f64,
    /// Wilson 95% interval.
    pub ci: (f64, f64),
    pub hits: usize,
    pub n: usize,
}

fn wilson(hits: usize, n: usize) -> (f64, f64) {
    let z = 1.96f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn obstacle_inside(outer: &Domain, k: &CompactSet) -> bool {
    k.primitives().iter().all(|p| match p {
        CompactSet::ClosedBall { center, radius } => {
            outer.contains_nonpolar(center) && outer.query_nonpolar(center).dist > *radius
        }
        CompactSet::Segment { a, b } => {
            let m = a.add(b).scale(0.5);
            [a, b, &m].iter().all(|q| outer.contains_nonpolar(q) && outer.query_nonpolar(q).dist > 0.0)
        }
        CompactSet::Point { at } => outer.contains_nonpolar(at),
        CompactSet::Union { .. } => false,
    })
}

/// `P^{x0}(τ_K < T_outer)` from `n` independent paths.
pub fn hit_before_exit(
    outer: &Domain,
    k: &CompactSet,
    x0: &Point,
    n: usize,
    seed: u64,
    engine: HitEngine,
) -> Result<HitEstimate, SamplerError> {
    let outer = outer.resolved();
    outer.validate()?;
    k.validate()?;
    if k.dim() != outer.dim() || x0.dim() != outer.dim() {
        return Err(GeometryError::DimensionMismatch { expected: outer.dim(), got: x0.dim() }.into());
    }
    if n == 0 {
        return Err(SamplerError::Empty);
    }
    if !obstacle_inside(&outer, k) {
        return Err(SamplerError::ObstacleOutside);
    }
    let sure = |hits: usize| HitEstimate { p: hits as f64 / n as f64, std_err: 0.0, ci: wilson(hits, n), hits, n };
    if k.contains(x0) {
        return Ok(sure(n));
    }
    let q = outer.query_nonpolar(x0);
    if !q.inside || q.dist <= 0.0 {
        return Ok(sure(0));
    }
    if let HitEngine::Wos { .. } = engine {
        if !outer.has_exact_distance() {
            return Err(SamplerError::NoExactDistance);
        }
    }
    let region = Killing { outer: &outer, obstacle: Some(k) };
    let hit = |i: usize| -> bool {
        let mut rng = stream(seed, i as u64);
        let end = match engine {
            HitEngine::Wos { eps } => wos_walk(
                &region,
                x0,
                &WosOptions { eps, max_time: f64::INFINITY, with_time: false, max_steps: 10_000_000 },
                &mut rng,
            ),
            HitEngine::Em { dt } => {
                em_walk(&region, x0, &EmOptions { dt, bridge: true, max_time: f64::INFINITY }, &mut rng)
            }
        };
        end.how == Absorbed::Hit
    };
    let hits = (0..n).into_par_iter().filter(|&i| hit(i)).count();
    let p = hits as f64 / n as f64;
    Ok(HitEstimate { p, std_err: (p * (1.0 - p) / n as f64).sqrt(), ci: wilson(hits, n), hits, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SchlichtId;
    use crate::kernels::ball_survival;

    fn batch(domain: Domain, sampler: SamplerSpec, count: usize, seed: u64) -> ExitSampleBatch {
        let x0 = Point::origin(domain.dim());
        ExitSampleBatch::generate(BatchSpec { domain, x0, sampler, seed, count, max_time: None }).unwrap()
    }

    #[test]
    fn streams_are_independent_of_order() {
        use rand::Rng;
        let a: u64 = stream(9, 4).random();
        let _: u64 = stream(9, 3).random();
        let b: u64 = stream(9, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, stream(9, 5).random::<u64>());
        assert_ne!(a, stream(10, 4).random::<u64>());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = SamplerSpec::Wos { eps: 1e-3 };
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| batch(Domain::ball(1.0), spec, 2000, 77))
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        let bits = |x: &ExitSampleBatch| x.samples.iter().map(|s| s.exit_time.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let mut b = batch(Domain::ball(1.0), SamplerSpec::Em { dt: 1e-3, bridge: true }, 300, 3);
        b.samples[7].exit_time = f64::INFINITY;
        b.write(&path).unwrap();
        let back = ExitSampleBatch::read(&path).unwrap();
        assert_eq!(back, b);
        let head = std::fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("index,exit_time,exit_x,exit_y\n"));
    }

    #[test]
    fn start_checks() {
        let mut rng = stream(0, 0);
        assert!(matches!(em_exit(&Domain::ball(1.0), &Point::xy(1.0, 0.0), 1e-3, &mut rng), Err(SamplerError::StartOutside)));
        assert!(matches!(em_exit(&Domain::ball(1.0), &Point::origin(2), 0.0, &mut rng), Err(SamplerError::BadStep(_))));
        assert!(matches!(wos_exit(&Domain::ball(1.0), &Point::origin(2), -1.0, &mut rng), Err(SamplerError::BadEps(_))));
        let mask = crate::geometry::GridMask::rasterize(&Domain::ball(1.0), 1.2, 40);
        assert!(matches!(
            wos_exit(&Domain::GridMask { mask }, &Point::origin(2), 1e-3, &mut rng),
            Err(SamplerError::NoExactDistance)
        ));
        // the puncture itself is a legitimate start
        let p = Domain::Punctured { base: Box::new(Domain::ball(1.0)), points: vec![Point::origin(2)] };
        assert!(wos_exit(&p, &Point::origin(2), 1e-3, &mut rng).is_ok());
    }

    #[test]
    fn wos_single_ball_matches_series() {
        // eps larger than the radius: exactly one exact ball draw
        let b = batch(Domain::ball(1.0), SamplerSpec::Wos { eps: 1e-9 }, 20_000, 11);
        let grid = log_grid(0.05, 4.0, 40);
        let e = empirical_cdf(&b, &grid, 0.01).unwrap();
        assert!(e.covers(|t| 1.0 - ball_survival(t, 1.0, 2).unwrap()));
    }

    #[test]
    fn em_disk_mean() {
        let b = batch(Domain::ball(1.0), SamplerSpec::Em { dt: 1e-3, bridge: true }, 20_000, 5);
        let m = b.mean_time().unwrap();
        assert!((m - 0.5).abs() < 0.015, "{m}");
    }

    #[test]
    fn hit_trivial_cases() {
        let outer = Domain::ball(2.0);
        let k = CompactSet::ClosedBall { center: Point::origin(2), radius: 1.0 };
        let e = HitEngine::Wos { eps: 1e-4 };
        assert_eq!(hit_before_exit(&outer, &k, &Point::xy(0.5, 0.0), 10, 1, e).unwrap().p, 1.0);
        assert_eq!(hit_before_exit(&outer, &k, &Point::xy(2.0, 0.0), 10, 1, e).unwrap().p, 0.0);
        let far = CompactSet::ClosedBall { center: Point::xy(1.8, 0.0), radius: 0.5 };
        assert!(matches!(
            hit_before_exit(&outer, &far, &Point::origin(2), 10, 1, e),
            Err(SamplerError::ObstacleOutside)
        ));
    }

    #[test]
    fn hit_concentric_annulus() {
        let outer = Domain::ball(2.0);
        let k = CompactSet::ClosedBall { center: Point::origin(2), radius: 1.0 };
        let est = hit_before_exit(&outer, &k, &Point::xy(2f64.sqrt(), 0.0), 20_000, 2, HitEngine::Wos { eps: 1e-4 })
            .unwrap();
        assert!((est.p - 0.5).abs() < 3.0 * est.std_err + 2e-3, "{est:?}");
    }

    #[test]
    fn halfplane_censoring() {
        let domain = Domain::schlicht(SchlichtId::Halfplane);
        let spec = BatchSpec {
            domain,
            x0: Point::origin(2),
            sampler: SamplerSpec::Wos { eps: 1e-4 },
            seed: 1,
            count: 4000,
            max_time: Some(10.0),
        };
        let b = ExitSampleBatch::generate(spec).unwrap();
        // P(T > 10) = erf(0.5/√20) ≈ 0.1256
        let frac = b.censored() as f64 / 4000.0;
        assert!((frac - 0.1256).abs() < 0.02, "{frac}");
        assert!(b.mean_time().is_none());
    }
}
