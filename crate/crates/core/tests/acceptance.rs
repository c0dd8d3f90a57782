//! Acceptance suite: one line per criterion, PASS or FAIL, tolerances pinned
//! below. Run with `cargo test --test acceptance -- --nocapture` to see the
//! table even when everything passes.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use exitlab::capacity::{dirichlet_condenser, energy_capacity, equilibrium_measure, polarity_check, Polarity};
use exitlab::geometry::{CompactSet, Domain, Point, SchlichtId};
use exitlab::harness::cli::run_cli;
use exitlab::harness::{
    verify_fast_exit, verify_hardy_tails, verify_lemma1, verify_long_stay, FastExitSpec, HardySpec, Lemma1Spec,
    LongStaySpec,
};
use exitlab::kernels::{ball_survival, mcconnell_rate};
use exitlab::pde::{eigen_lambda, exit_cdf_flux, solve_killed_density, Resolution};
use exitlab::sampler::{
    empirical_cdf, fit_lambda, hit_before_exit, log_grid, BatchSpec, ExitSampleBatch, HitEngine, SamplerSpec,
    SurvivalCurve,
};

// criterion 1
const C1_PDE_ABS: f64 = 1e-3;
const C1_DKW_ALPHA: f64 = 0.01;
const C1_SAMPLES: usize = 100_000;
const C1_BUDGET: Duration = Duration::from_secs(120);
// criterion 2
const C2_DISK_LAMBDA: f64 = 5.7832;
const C2_DISK_REL: f64 = 0.02;
const C2_STRIP_LAMBDA: f64 = 4.0;
const C2_STRIP_REL: f64 = 0.05;
// criterion 3
const C3_HALFPLANE_AT_1: f64 = 0.383;
const C3_DISK_AT_1: f64 = 0.0888;
const C3_VALUE_ABS: f64 = 5e-4;
const C3_BUDGET: Duration = Duration::from_secs(300);
// criterion 4
const C4_LIMIT: f64 = 0.75;
const C4_REL: f64 = 0.15;
const C4_KS_LEVEL: f64 = 0.01;
const C4_KS_SAMPLES: usize = 100_000;
// criterion 5
const C5_TIMES: usize = 20;
const C5_BUDGET: Duration = Duration::from_secs(300);
// criterion 6
const C6_RATE: (f64, f64) = (0.9, 1.1);
// criterion 7
const C7_DISK_REL: f64 = 0.01;
const C7_SEGMENT_REL: f64 = 0.02;
const C7_BALL3_REL: f64 = 0.02;
const C7_CONDENSER_REL: f64 = 0.01;
const C7_MASS_REL: f64 = 0.02;
const C7_I_2M_REL: f64 = 0.03;
const C7_POINT_PATHS: usize = 1_000_000;
// criterion 8: violations are increases above 2h²
const C8_TOL_FACTOR: f64 = 2.0;
// criterion 9
const C9_REL: f64 = 0.10;
const C9_GROWTH: f64 = 5.0;

struct Line {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn richardson_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    for k in 1..x.len() {
        for i in 0..x.len() - k {
            p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
        }
    }
    p[0]
}

fn criterion_1() -> Line {
    let clock = Instant::now();
    let disk = Domain::ball(1.0);
    let grid = log_grid(0.05, 4.0, 40);
    let series: Vec<f64> = grid.iter().map(|&t| 1.0 - ball_survival(t, 1.0, 2).unwrap()).collect();
    let pde = exit_cdf_flux(&disk, &Point::origin(2), &grid, &Resolution::new(0.005)).unwrap();
    let pde_err = pde.cdf.iter().zip(&series).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let batch = ExitSampleBatch::generate(BatchSpec {
        domain: disk,
        x0: Point::origin(2),
        sampler: SamplerSpec::Wos { eps: 1e-4 },
        seed: 1,
        count: C1_SAMPLES,
        max_time: None,
    })
    .unwrap();
    let est = empirical_cdf(&batch, &grid, C1_DKW_ALPHA).unwrap();
    let wos_err = est.f.iter().zip(&series).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let elapsed = clock.elapsed();
    Line {
        id: 1,
        name: "disk exit law: series, radial PDE, walk-on-spheres",
        passed: pde_err <= C1_PDE_ABS && wos_err <= est.dkw_halfwidth && elapsed < C1_BUDGET,
        detail: format!(
            "max|PDE-series| = {pde_err:.2e} (tol {C1_PDE_ABS:e}); max|WOS-series| = {wos_err:.4} (DKW 99% {:.4}); {:.1}s (budget {}s)",
            est.dkw_halfwidth,
            elapsed.as_secs_f64(),
            C1_BUDGET.as_secs()
        ),
    }
}

fn criterion_2() -> Line {
    let fitted = |d: &Domain, window: (f64, f64)| {
        let grid = log_grid(window.0, window.1, 24);
        let f = exit_cdf_flux(d, &Point::origin(2), &grid, &Resolution::new(0.005)).unwrap();
        fit_lambda(&SurvivalCurve::exact(grid, f.survival), window).unwrap().lambda
    };
    let disk = fitted(&Domain::ball(1.0), (1.0, 3.0));
    let strip_domain = Domain::schlicht(SchlichtId::Strip);
    let strip = fitted(&strip_domain, (1.0, 4.0));
    let res = Resolution::new(0.01);
    let lam_strip = eigen_lambda(&strip_domain, &res).unwrap().lambda;
    let lam_half = eigen_lambda(&Domain::schlicht(SchlichtId::Halfplane), &res).unwrap().lambda;
    let disk_ok = (disk / C2_DISK_LAMBDA - 1.0).abs() <= C2_DISK_REL;
    let strip_ok = (strip / C2_STRIP_LAMBDA - 1.0).abs() <= C2_STRIP_REL;
    let order_ok = lam_strip < disk && lam_half < disk && strip < disk;
    Line {
        id: 2,
        name: "fundamental frequencies",
        passed: disk_ok && strip_ok && order_ok,
        detail: format!(
            "fitted lambda(disk) = {disk:.4} ({C2_DISK_LAMBDA} ± {}%); fitted lambda(strip) = {strip:.4} ({C2_STRIP_LAMBDA} ± {}%); eigen strip {lam_strip:.4}, halfplane {lam_half:.1} < disk",
            C2_DISK_REL * 100.0,
            C2_STRIP_REL * 100.0
        ),
    }
}

fn criterion_3() -> Line {
    let clock = Instant::now();
    let grid: Vec<f64> = (0..=18).map(|k| 1.0 + 0.5 * k as f64).collect();
    let spec = |entry| LongStaySpec {
        entry,
        t_grid: grid.clone(),
        assert_from: 1.0,
        h: 0.01,
        samples: 0,
        eps: 1e-4,
        lambda_window: None,
        refine: 128,
    };
    let half = verify_long_stay(&spec(SchlichtId::Halfplane), 0).unwrap();
    let strip = verify_long_stay(&spec(SchlichtId::Strip), 0).unwrap();
    let sd = half.table.column("survival_d").unwrap()[0];
    let sdisk = half.table.column("survival_disk").unwrap()[0];
    let values_ok = (sd - C3_HALFPLANE_AT_1).abs() <= C3_VALUE_ABS && (sdisk - C3_DISK_AT_1).abs() <= C3_VALUE_ABS;
    let h = half.verdict("long-stay").unwrap();
    let s = strip.verdict("long-stay").unwrap();
    let elapsed = clock.elapsed();
    Line {
        id: 3,
        name: "long stays: halfplane and strip beat the disk on [1, 10]",
        passed: h.passed && s.passed && values_ok && elapsed < C3_BUDGET,
        detail: format!(
            "halfplane min ratio {:.3}, strip min ratio {:.3}; at t=1: {sd:.4} vs {sdisk:.4} (expect {C3_HALFPLANE_AT_1} vs {C3_DISK_AT_1} ± {C3_VALUE_ABS:e}); {:.1}s",
            h.value,
            s.value,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_4() -> Line {
    let disk = |r| Domain::Ball { center: Point::origin(2), radius: r };
    let json = |u: &Domain, extra: &str| -> FastExitSpec {
        serde_json::from_str(&format!(
            r#"{{"u": {}, "w": {}, "t_grid": [0.2, 0.1, 0.05], "h": 0.005{extra}}}"#,
            serde_json::to_string(u).unwrap(),
            serde_json::to_string(&disk(1.0)).unwrap()
        ))
        .unwrap()
    };
    let scaling = verify_fast_exit(&json(&disk(0.5), ""), 0).unwrap();
    let limit = scaling.verdict("diverges").unwrap().value;
    let punctured = Domain::Punctured { base: Box::new(disk(1.0)), points: vec![Point::origin(2)] };
    let control = verify_fast_exit(
        &json(&punctured, &format!(r#", "expect": "bounded", "ks_samples": {C4_KS_SAMPLES}"#)),
        0,
    )
    .unwrap();
    let ks = control.verdict("ks").unwrap();
    let ok = (limit / C4_LIMIT - 1.0).abs() <= C4_REL && control.passed() && ks.value > C4_KS_LEVEL;
    Line {
        id: 4,
        name: "fast exits: B(1/2) vs B(1), punctured control",
        passed: ok,
        detail: format!(
            "extrapolated 2t log r = {limit:.4} ({C4_LIMIT} ± {}%); control |limit| = {:.1e}, KS p = {:.3} (level {C4_KS_LEVEL})",
            C4_REL * 100.0,
            control.verdict("bounded").unwrap().value.abs(),
            ks.value
        ),
    }
}

fn criterion_5() -> Line {
    let clock = Instant::now();
    let spec = Lemma1Spec {
        compact: CompactSet::ClosedBall { center: Point::xy(0.5, 0.0), radius: 0.1 },
        a: Point::xy(0.4, 0.0),
        delta: 0.1,
        points: 160,
        h: 0.01,
        times: C5_TIMES,
        span: 3.0,
    };
    let r = verify_lemma1(&spec, 0).unwrap();
    let v = r.verdict("lower-bound").unwrap();
    let elapsed = clock.elapsed();
    Line {
        id: 5,
        name: "lemma instantiation K = B((0.5,0), 0.1), a = (0.4,0), delta = 0.1",
        passed: v.passed && r.table.rows.len() == C5_TIMES && elapsed < C5_BUDGET,
        detail: format!(
            "C = {}, T = {}, min P/bound = {:.3e} over {} times; {:.1}s",
            r.provenance["C"],
            r.provenance["T"],
            v.value,
            r.table.rows.len(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_6() -> Line {
    let t = [0.05, 0.1, 0.2];
    let f = exit_cdf_flux(&Domain::ball(1.0), &Point::origin(2), &t, &Resolution::new(0.005)).unwrap();
    let y: Vec<f64> = t.iter().zip(&f.cdf).map(|(t, p)| -2.0 * t * p.ln()).collect();
    let rate = richardson_to_zero(&t, &y);
    let rates: Vec<f64> = (3..200).map(|m| mcconnell_rate(m).unwrap()).collect();
    let monotone = rates.windows(2).all(|w| w[1] > w[0]) && rates.iter().all(|&r| r < 0.5);
    let envelope = 2.0 * mcconnell_rate(1_000_000).unwrap();
    let ok = rate >= C6_RATE.0 && rate <= C6_RATE.1 && monotone && rate <= envelope + (C6_RATE.1 - 1.0);
    Line {
        id: 6,
        name: "small-time disk rate and the cos^2(pi/m) envelope",
        passed: ok,
        detail: format!(
            "extrapolated -2t log P(T<t) = {rate:.4} (in [{}, {}]); rate(m) increasing and < 1/2 for m in 3..200; 2 sup rate = {envelope:.6}",
            C6_RATE.0, C6_RATE.1
        ),
    }
}

fn criterion_7() -> Line {
    let rel = |v: f64, want: f64| (v / want - 1.0).abs();
    let disk = energy_capacity(&CompactSet::ClosedBall { center: Point::origin(2), radius: 0.25 }, 2, 200).unwrap();
    let seg = energy_capacity(&CompactSet::Segment { a: Point::xy(-2.0, 0.0), b: Point::xy(2.0, 0.0) }, 2, 400).unwrap();
    let ball3 = energy_capacity(&CompactSet::ClosedBall { center: Point::origin(3), radius: 1.0 }, 3, 800).unwrap();
    let outer = Domain::ball(E);
    let unit = CompactSet::ClosedBall { center: Point::origin(2), radius: 1.0 };
    let cond = dirichlet_condenser(&outer, &unit, E / 160.0).unwrap();
    let eq = equilibrium_measure(&outer, &unit, 400).unwrap();
    let m = eq.measure.total_mass;
    let i2m = rel(cond.value, 2.0 * m);
    let point = CompactSet::Point { at: Point::origin(2) };
    let point_hits = hit_before_exit(
        &Domain::ball(1.0),
        &point,
        &Point::xy(0.3, 0.0),
        C7_POINT_PATHS,
        7,
        HitEngine::Em { dt: 1e-2 },
    )
    .unwrap();
    let mut nonpolar_hit = true;
    let mut hits = Vec::new();
    for k in [
        unit.clone(),
        CompactSet::Segment { a: Point::xy(-0.5, 0.0), b: Point::xy(0.5, 0.0) },
        CompactSet::Union { parts: vec![CompactSet::ClosedBall { center: Point::xy(-1.0, 0.0), radius: 0.3 }, point.clone()] },
    ] {
        let h = hit_before_exit(&outer, &k, &Point::xy(0.0, 1.5), 20_000, 8, HitEngine::Wos { eps: 1e-4 }).unwrap();
        nonpolar_hit &= polarity_check(&k) == Polarity::Nonpolar && h.ci.0 > 0.0;
        hits.push(h.p);
    }
    let polar_ok = polarity_check(&point) == Polarity::Polar && point_hits.hits == 0;
    let ok = rel(disk.value, 0.25) <= C7_DISK_REL
        && rel(seg.value, 1.0) <= C7_SEGMENT_REL
        && rel(ball3.value, 1.0) <= C7_BALL3_REL
        && rel(cond.value, 2.0 * PI) <= C7_CONDENSER_REL
        && rel(m, PI) <= C7_MASS_REL
        && i2m <= C7_I_2M_REL
        && polar_ok
        && nonpolar_hit;
    Line {
        id: 7,
        name: "capacity suite",
        passed: ok,
        detail: format!(
            "c2(disk 0.25) = {:.5}, c2(segment 4) = {:.5}, c3(ball) = {:.5}, I = {:.5}, M = {m:.5}, |I/2M-1| = {i2m:.4}; point hits {}/{}; nonpolar hit rates {:?}",
            disk.value,
            seg.value,
            ball3.value,
            cond.value,
            point_hits.hits,
            point_hits.n,
            hits.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    }
}

fn criterion_8() -> Line {
    let mut violations = 0;
    let mut checked = 0;
    for dim in [2, 3] {
        let res = Resolution::new(0.005).without_error_estimate();
        let times = log_grid(0.01, 1.0, 20);
        let field = solve_killed_density(&Domain::ball_n(dim, 1.0), &Point::origin(dim), 1.0, &res, &times).unwrap();
        let tol = C8_TOL_FACTOR * field.h() * field.h();
        for k in 0..times.len() {
            let (_, p) = field.radial_profile(k).expect("radial plan");
            checked += p.len() - 1;
            violations += p.windows(2).filter(|w| w[1] - w[0] > tol).count();
        }
    }
    Line {
        id: 8,
        name: "killed density is radially decreasing (n = 2, 3)",
        passed: violations == 0,
        detail: format!("{violations} violations above 2h^2 in {checked} adjacent pairs over 40 snapshots"),
    }
}

fn criterion_9() -> Line {
    let spec = HardySpec {
        u: SchlichtId::Sector { angle: PI / 2.0 },
        w: SchlichtId::Halfplane,
        samples: 100_000,
        eps: 1e-4,
        window: (3.0, 30.0),
        points: 16,
        growth: C9_GROWTH,
        rel_tol: C9_REL,
        closed_form: true,
    };
    let r = verify_hardy_tails(&spec, 0).unwrap();
    let v = |n: &str| r.verdict(n).unwrap();
    Line {
        id: 9,
        name: "tail exponents: sector(pi/2) vs halfplane",
        passed: r.passed(),
        detail: format!(
            "H(sector) = {:.4}, H(halfplane) = {:.4} (± {}%), CIs disjoint: {}; ratio growth {:.3}x (need {C9_GROWTH}x)",
            v("exponent-u").value,
            v("exponent-w").value,
            C9_REL * 100.0,
            v("exponent-order").passed,
            v("ratio-growth").value
        ),
    }
}

fn criterion_10() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let runs = [
        (
            "simulate",
            write("sim.json", r#"{"domain": {"type": "ball", "center": [0, 0], "radius": 1}, "sampler": {"kind": "wos", "eps": 0.0001}, "count": 20000}"#),
        ),
        ("verify-long-stay", write("ls.json", r#"{"entry": {"id": "koebe"}, "t_grid": [1, 2, 4, 8], "samples": 4000}"#)),
        (
            "verify-hardy",
            write("hd.json", r#"{"u": {"id": "halfplane"}, "w": {"id": "halfplane"}, "samples": 4000, "closed_form": false}"#),
        ),
    ];
    let mut identical = true;
    let mut detail = Vec::new();
    for (cmd, cfg) in &runs {
        let mut outs = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("{cmd}-{threads}.csv"));
            let code = run_cli([
                "exitlab",
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "7",
                "--threads",
                threads,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(code == 0 || code == 1, "{cmd} exited with {code}");
            outs.push(std::fs::read(&out).unwrap());
        }
        let same = outs[0] == outs[1];
        identical &= same;
        detail.push(format!("{cmd}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    Line {
        id: 10,
        name: "CLI output byte-identical across --threads 1 and 4",
        passed: identical,
        detail: detail.join(", "),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [fn() -> Line; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut failed = Vec::new();
    for c in criteria {
        let l = c();
        println!("criterion {:>2} {} {}: {}", l.id, if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
        if !l.passed {
            failed.push(l.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
