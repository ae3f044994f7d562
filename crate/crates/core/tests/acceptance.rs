//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::fs;

use holoifs::bounds::{self, InequalityKind};
use holoifs::criteria::{
    self, ClassifyOptions, FixedPointOptions, FixedPointVerdict, LimitVerdict, OrbitLimitVerdict, SeriesMode,
    SeriesThresholds,
};
use holoifs::gallery;
use holoifs::geometry::omega;
use holoifs::ifs::{verify_backward_orbit, BackwardOrbit};
use holoifs::moebius::AutKind;
use holoifs::report;
use holoifs::straighten::{self, ProbeGrid, StraightenOptions};
use holoifs::{
    Complex64, DWKind, DiscPoint, GeneratorStream, HyperbolicBall, MapExpr, MoebiusMap, StreamRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn dp(re: f64, im: f64) -> DiscPoint {
    DiscPoint::new(c(re, im)).unwrap()
}

fn point<R: Rng>(rng: &mut R, r: f64) -> DiscPoint {
    DiscPoint::new(Complex64::from_polar(r * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI))).unwrap()
}

fn scale_product(power: f64, offset: f64) -> GeneratorStream {
    GeneratorStream::rule(StreamRule::ScaleProduct { power, offset }).unwrap()
}

fn hyp(a: f64) -> MapExpr {
    MapExpr::mobius(MoebiusMap::disc_auto(DiscPoint::real(a).unwrap(), 0.0)).unwrap()
}

fn schwarz_pick() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_sp, mut worst_iso, mut worst_dist) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let f = bounds::random_map(&mut rng);
        let (z, w) = (point(&mut rng, 0.9), point(&mut rng, 0.9));
        let excess = omega(f.eval_raw(z.value()), f.eval_raw(w.value())) - omega(z.value(), w.value());
        worst_sp = worst_sp.max(excess);

        let g = MoebiusMap::disc_auto(point(&mut rng, 0.9), rng.random_range(-PI..PI));
        let gz = g.apply(z.value()).unwrap();
        let gw = g.apply(w.value()).unwrap();
        worst_iso = worst_iso.max((omega(gz, gw) - omega(z.value(), w.value())).abs());
        let ge = MapExpr::mobius(g).unwrap();
        worst_dist = worst_dist.max((ge.distortion(z).unwrap() - 1.0).abs());
    }
    ensure!(worst_sp <= 1e-10, "semicontraction exceeded by {worst_sp:e}");
    ensure!(worst_iso < 1e-10, "isometry defect {worst_iso:e}");
    ensure!(worst_dist < 1e-10, "automorphism distortion defect {worst_dist:e}");
    Ok(format!("max excess {worst_sp:.2e}, isometry {worst_iso:.2e}, distortion {worst_dist:.2e}"))
}

fn distortion_calculus() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut chain = 0.0f64;
    for _ in 0..10_000 {
        let f = bounds::random_map(&mut rng);
        let g = bounds::random_map(&mut rng);
        let z = point(&mut rng, 0.9);
        let fg = f.after(&g);
        let lhs = fg.distortion(z).unwrap();
        let rhs = f.distortion_raw(g.eval_raw(z.value())).unwrap() * g.distortion(z).unwrap();
        chain = chain.max((lhs - rhs).abs());
    }
    let mut quotient = 0.0f64;
    for _ in 0..1_000 {
        let f = bounds::random_map(&mut rng);
        let z = point(&mut rng, 0.9);
        let q = f.distortion_via_quotient(z, 1e-5).unwrap();
        quotient = quotient.max((q - f.distortion(z).unwrap()).abs());
    }
    ensure!(chain < 1e-10, "chain rule defect {chain:e}");
    ensure!(quotient < 1e-4, "distance-quotient defect {quotient:e}");
    Ok(format!("chain {chain:.2e}, quotient {quotient:.2e}"))
}

fn inequality_margins() -> Check {
    let mut parts = Vec::new();
    for kind in InequalityKind::ALL {
        let (_, s) = bounds::fuzz(kind, 10_000, 2024, 2.0).map_err(|e| e.to_string())?;
        ensure!(s.min_margin >= -1e-9, "{kind}: min margin {:e}", s.min_margin);
        parts.push(format!("{kind} {:.2e}", s.min_margin));
    }
    let f = MapExpr::monomial(2).unwrap();
    let m = bounds::margin(InequalityKind::Lipschitz2, Some(&f), dp(0.5, 0.0), DiscPoint::origin(), 2.0)
        .map_err(|e| e.to_string())?;
    let target = 0.8f64.atanh();
    ensure!((m.lhs - target).abs() < 1e-9 && (m.rhs - target).abs() < 1e-9, "witness sides {} {}", m.lhs, m.rhs);
    ensure!((m.lhs - m.rhs).abs() < 1e-9, "witness gap {:e}", m.lhs - m.rhs);
    Ok(format!("{}; witness gap {:.1e}", parts.join(", "), (m.lhs - m.rhs).abs()))
}

fn left_straightening() -> Check {
    let n = 10_000;
    let s = scale_product(2.0, 1.0);
    let r = straighten::left_straighten(&s, n, &ProbeGrid::default(), StraightenOptions::default())
        .map_err(|e| e.to_string())?;
    let sup = r.h_samples.iter().map(|g| (g.h - g.z * 0.5).norm()).fold(0.0, f64::max);
    ensure!(sup < 1e-3, "sup |H_N - z/2| = {sup:e}");
    let d = straighten::distortion_limit(&s, DiscPoint::origin(), n).map_err(|e| e.to_string())?;
    let exact = (n as f64 + 2.0) / (2.0 * (n as f64 + 1.0));
    ensure!((d.value - 0.5).abs() < 5e-5, "distortion limit {}", d.value);
    ensure!((d.value - exact).abs() < 1e-12, "partial product {} vs {exact}", d.value);
    Ok(format!("sup {sup:.2e}, distortion {:.8}", d.value))
}

fn canned_streams() -> Vec<(&'static str, GeneratorStream)> {
    let rot = |t: f64| MapExpr::scale(Complex64::from_polar(1.0, t)).unwrap();
    let ell = MapExpr::mobius({
        let t = MoebiusMap::disc_auto(dp(0.3, 0.0), 0.0);
        t.compose(&MoebiusMap::rotation(0.9)).unwrap().compose(&t.inverse()).unwrap()
    })
    .unwrap();
    let sharp: Vec<MapExpr> = (1..=4000).map(|n| MapExpr::scale_real(1.0 - 0.5f64.powi(n.min(60))).unwrap()).collect();
    vec![
        ("scale_product p=2", scale_product(2.0, 1.0)),
        ("scale_product p=1", scale_product(1.0, 1.0)),
        ("scale_product p=3", scale_product(3.0, 1.0)),
        ("scale_product p=2 offset 5", scale_product(2.0, 5.0)),
        ("scale_product p=1 offset 3", scale_product(1.0, 3.0)),
        ("scale_product p=0.5", scale_product(0.5, 1.0)),
        ("scale_product p=1.5", scale_product(1.5, 1.0)),
        ("constant scale 1/2", GeneratorStream::rule(StreamRule::ConstantScale { factor: c(0.5, 0.0) }).unwrap()),
        ("constant scale 0.9e^{0.3i}", GeneratorStream::rule(StreamRule::ConstantScale { factor: Complex64::from_polar(0.9, 0.3) }).unwrap()),
        ("rotation", GeneratorStream::rule(StreamRule::ConstantScale { factor: Complex64::from_polar(1.0, 1.0) }).unwrap()),
        ("monomial 2", GeneratorStream::rule(StreamRule::Monomial { power: 2 }).unwrap()),
        ("monomial 3", GeneratorStream::rule(StreamRule::Monomial { power: 3 }).unwrap()),
        (
            "shifted contraction",
            GeneratorStream::rule(StreamRule::ShiftedContraction { base: 0.1, amplitude: 0.01, decay_power: 2.0, contraction: 0.5 })
                .unwrap(),
        ),
        ("alternating rotations", GeneratorStream::cycle(vec![rot(0.7), rot(-1.9)]).unwrap()),
        (
            "blaschke/scale cycle",
            GeneratorStream::cycle(vec![
                MapExpr::blaschke(vec![DiscPoint::origin(), dp(0.3, 0.0)], 0.0).unwrap(),
                MapExpr::scale_real(0.8).unwrap(),
            ])
            .unwrap(),
        ),
        ("elliptic automorphism", GeneratorStream::constant(ell)),
        ("geometric approach to identity", GeneratorStream::list(sharp)),
        ("scale/rotation cycle", GeneratorStream::cycle(vec![MapExpr::scale_real(0.95).unwrap(), rot(2.0)]).unwrap()),
        ("degree-2 blaschke", GeneratorStream::constant(MapExpr::blaschke(vec![DiscPoint::origin(), dp(0.5, 0.0)], 0.0).unwrap())),
        ("half-plane drift", GeneratorStream::constant(MapExpr::hp_affine(c(-1.0, 1.0)).unwrap())),
    ]
}

fn base_point_independence() -> Check {
    let z0 = dp(0.3, 0.2);
    let streams = canned_streams();
    ensure!(streams.len() == 20, "expected 20 streams");
    let mut worst = 0.0f64;
    for (name, s) in &streams {
        let r = criteria::classify_left_limits(s, z0, 2000, ClassifyOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        ensure!(r.base_points_agree, "{name}: verdicts {:?} / {:?}", r.series[0].verdict, r.series[1].verdict);
        let o = criteria::distortion_series(s, z0, 2000, SeriesMode::Orbit, SeriesThresholds::default())
            .map_err(|e| format!("{name}: {e}"))?;
        let res = o.product_identity_residual.unwrap();
        ensure!(res < 1e-9, "{name}: product identity residual {res:e}");
        worst = worst.max(res);
    }
    let o = ClassifyOptions::default();
    let basel = criteria::classify_left_limits(&scale_product(2.0, 1.0), z0, 10_000, o).map_err(|e| e.to_string())?;
    ensure!(basel.verdict == LimitVerdict::NonconstantLimits, "summable stream: {:?}", basel.verdict);
    let harm = criteria::classify_left_limits(&scale_product(1.0, 1.0), dp(0.7, 0.0), 10_000, o).map_err(|e| e.to_string())?;
    ensure!(harm.verdict == LimitVerdict::ConstantLimits, "harmonic stream: {:?}", harm.verdict);
    ensure!(harm.orbit_at_horizon.norm() < 1e-4, "harmonic orbit {}", harm.orbit_at_horizon);
    for (name, s) in [("summable", scale_product(2.0, 1.0)), ("harmonic", scale_product(1.0, 1.0))] {
        let r = criteria::distortion_series(&s, z0, 10_000, SeriesMode::Orbit, SeriesThresholds::default()).map_err(|e| e.to_string())?;
        let res = r.product_identity_residual.unwrap();
        ensure!(res < 1e-9, "{name}: product identity residual {res:e}");
        worst = worst.max(res);
    }
    Ok(format!("20 streams agree, max product residual {worst:.2e}"))
}

fn right_limits() -> Check {
    let o = ClassifyOptions::default();
    let h = criteria::classify_right_limits(&scale_product(1.0, 1.0), dp(0.7, 0.0), 10_000, o).map_err(|e| e.to_string())?;
    ensure!(h.verdict == LimitVerdict::ConstantLimits, "harmonic: {:?}", h.verdict);
    ensure!(h.orbit_at_horizon.norm() < 1e-4, "harmonic orbit {}", h.orbit_at_horizon);
    let b = criteria::classify_right_limits(&scale_product(2.0, 1.0), DiscPoint::origin(), 10_000, o).map_err(|e| e.to_string())?;
    ensure!(b.verdict == LimitVerdict::NonconstantLimits, "summable: {:?}", b.verdict);
    let sup = b.limit_samples.iter().map(|g| (g.h - g.z * 0.5).norm()).fold(0.0, f64::max);
    ensure!(sup < 1e-3, "sup |R_N - z/2| = {sup:e}");
    Ok(format!("|R_N(0.7)| = {:.2e}, sup {sup:.2e}", h.orbit_at_horizon.norm()))
}

fn right_straightening() -> Check {
    let s = GeneratorStream::constant(MapExpr::monomial(2).unwrap());
    let pts: Vec<Complex64> = (0..=40).map(|k| c(0.5f64.powf(0.5f64.powi(k)), 0.0)).collect();
    let long = BackwardOrbit::new(pts.clone()).map_err(|e| e.to_string())?;
    let check = verify_backward_orbit(&s, &long).map_err(|e| e.to_string())?;
    ensure!(check.step_residual < 1e-12, "backward orbit residual {:e}", check.step_residual);

    let n = 20;
    let orbit = BackwardOrbit::new(pts[..=n].to_vec()).map_err(|e| e.to_string())?;
    let opts = StraightenOptions { window: 5, ..StraightenOptions::default() };
    let r = straighten::right_straighten(&s, &orbit, n, &ProbeGrid::default(), opts).map_err(|e| e.to_string())?;
    ensure!(r.converged, "not converged (residual {:e})", r.cauchy_residual);
    ensure!(!r.degenerate, "limit read as constant");
    let phases = straighten::right_phase_values(&s, &orbit, &r).map_err(|e| e.to_string())?;
    let min_phase = phases.iter().map(|g| g.re).fold(f64::INFINITY, f64::min);
    ensure!(min_phase >= -1e-10, "g_n'(0) = {min_phase:e}");
    let floor = r.trace[n - 5..].iter().map(|t| t.distortion_at_zero).fold(f64::INFINITY, f64::min);
    ensure!(floor > 0.1, "distortion at 0 over the trailing window falls to {floor}");
    Ok(format!("orbit residual {:.1e}, min g'(0) {min_phase:.3}, distortion floor {floor:.4}", check.step_residual))
}

fn mu_step() -> Check {
    let g = hyp(0.5);
    let target = 0.5f64.atanh();
    let mut worst = 0.0f64;
    for n in 1..=12 {
        let s = straighten::mu_step(&g, DiscPoint::origin(), 1, n).map_err(|e| e.to_string())?;
        worst = worst.max((s.value - target).abs());
    }
    ensure!(worst < 1e-9, "s_1(0) deviates by {worst:e}");
    let grid = ProbeGrid::circles(&[0.1, 0.2, 0.4, 0.6, 0.8], 64);
    let inf = grid
        .points()
        .iter()
        .map(|&z| straighten::mu_step(&g, DiscPoint::new(z).unwrap(), 1, 3).unwrap().value)
        .fold(f64::INFINITY, f64::min);
    ensure!((inf - 0.5 * 3f64.ln()).abs() < 1e-3, "grid infimum {inf}");
    let mut sub = f64::NEG_INFINITY;
    for &z in ProbeGrid::default().points() {
        let z = DiscPoint::new(z).unwrap();
        let s = |m: usize| straighten::mu_step(&g, z, m, 3).unwrap().value;
        for mu in 1..=5 {
            for nu in 1..=5 {
                sub = sub.max(s(mu + nu) - s(mu) - s(nu));
            }
        }
    }
    ensure!(sub <= 1e-8, "subadditivity exceeded by {sub:e}");
    Ok(format!("s_1 defect {worst:.1e}, infimum {inf:.6}, subadditivity slack {sub:.1e}"))
}

fn denjoy_wolff() -> Check {
    let r = MapExpr::monomial(2).unwrap().denjoy_wolff(10_000, 1e-3).map_err(|e| e.to_string())?;
    ensure!(r.kind == DWKind::EllipticStrict && r.point.norm() == 0.0 && r.multiplier == 0.0, "z^2: {r:?}");
    let r = hyp(0.5).denjoy_wolff(10_000, 1e-3).map_err(|e| e.to_string())?;
    ensure!(r.kind == DWKind::Hyperbolic && (r.point - 1.0).norm() < 1e-9, "hyperbolic: {r:?}");
    ensure!((r.multiplier - 1.0 / 3.0).abs() < 1e-3, "hyperbolic multiplier {}", r.multiplier);
    let r = MapExpr::hp_affine(c(1.0, 0.0)).unwrap().denjoy_wolff(10_000, 1e-3).map_err(|e| e.to_string())?;
    ensure!(r.kind == DWKind::Parabolic, "parabolic: {r:?}");
    ensure!((r.multiplier - 1.0).abs() < 1e-3, "parabolic multiplier {}", r.multiplier);
    Ok("elliptic, hyperbolic and parabolic cases".into())
}

fn section8() -> Check {
    let b = gallery::build_section8(5, gallery::DEFAULT_K_CAP).map_err(|e| e.to_string())?;
    for cond in b.conditions() {
        ensure!(cond.holds, "condition ({}) fails", cond.condition);
    }
    for cert in &b.certificates[1..] {
        ensure!(cert.exit_modulus > cert.n as f64 - 0.5f64.powi(cert.n as i32), "exit certificate n = {}", cert.n);
        ensure!(cert.return_residual < 0.5f64.powi(cert.n as i32), "return certificate n = {}", cert.n);
    }
    for (n, class) in b.g_classes().map_err(|e| e.to_string())?.iter().enumerate() {
        ensure!(class.kind == AutKind::Parabolic, "g_{n} classified {:?}", class.kind);
    }
    let ball = HyperbolicBall::new(DiscPoint::origin(), 1.0).unwrap();
    let cert = gallery::certify_not_compactly_divergent(&b, &ball).map_err(|e| e.to_string())?;
    ensure!(cert.returns.len() >= 4 && cert.exits.len() >= 4, "returns {:?}, exits {:?}", cert.returns, cert.exits);
    Ok(format!("milestones {:?}, {} returns, {} exits", b.milestones, cert.returns.len(), cert.exits.len()))
}

fn dense() -> Check {
    let b = gallery::build_dense(&gallery::dyadic_targets(10), &gallery::dyadic_deltas(10), gallery::DEFAULT_K_CAP)
        .map_err(|e| e.to_string())?;
    ensure!(b.certificates.len() == 10, "only {} targets realized", b.certificates.len());
    let mut start = 0;
    let mut block_max = Vec::new();
    for cert in &b.certificates {
        ensure!(cert.matrix_residual < 1e-8, "target {} residual {:e}", cert.j, cert.matrix_residual);
        let m = b.generators[start..cert.index]
            .iter()
            .map(|g| g.deviation_on_disc(gallery::DEVIATION_RADIUS))
            .fold(0.0, f64::max);
        ensure!(m <= cert.delta, "block {} deviation {m} > {}", cert.j, cert.delta);
        block_max.push(m);
        start = cert.index;
    }
    let nonempty: Vec<f64> = block_max.iter().copied().filter(|&m| m > 0.0).collect();
    ensure!(nonempty.windows(2).all(|w| w[1] < w[0]), "block deviations not decreasing: {block_max:?}");
    Ok(format!("{} generators, last block deviation {:.2e}", b.generators.len(), block_max.last().unwrap()))
}

fn fixed_points() -> Check {
    let s = GeneratorStream::rule(StreamRule::ShiftedContraction { base: 0.1, amplitude: 0.01, decay_power: 2.0, contraction: 0.5 })
        .unwrap();
    // Banach iteration of the limit map z -> gamma_{0.1}(z/2)
    let lim = MoebiusMap::disc_auto(DiscPoint::real(0.1).unwrap(), 0.0);
    let mut a = c(0.0, 0.0);
    for _ in 0..200 {
        a = lim.apply(a * 0.5).unwrap();
    }
    let r = criteria::track_fixed_points(&s, 1000, Some(DiscPoint::new(a).unwrap()), FixedPointOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(r.fixed_point_verdict == FixedPointVerdict::Converges, "a_n: {:?}", r.fixed_point_verdict);
    ensure!(r.orbit_verdict == OrbitLimitVerdict::ConvergesToA, "L_N: {:?}", r.orbit_verdict);
    let gap = r.orbit_gap.unwrap();
    ensure!(gap < 1e-6, "max |L_N z - a| = {gap:e}");
    let rot = GeneratorStream::cycle(vec![
        MapExpr::scale(Complex64::from_polar(1.0, 0.4)).unwrap(),
        MapExpr::scale(Complex64::from_polar(1.0, -1.1)).unwrap(),
    ])
    .unwrap();
    let r = criteria::track_fixed_points(&rot, 100, None, FixedPointOptions::default()).map_err(|e| e.to_string())?;
    ensure!(r.orbit_verdict == OrbitLimitVerdict::HypothesisViolated, "rotations: {:?}", r.orbit_verdict);
    Ok(format!("gap {gap:.1e}, rotations refused"))
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = report::write_suite(a.path(), 7).map_err(|e| e.to_string())?;
    let fb = report::write_suite(b.path(), 7).map_err(|e| e.to_string())?;
    ensure!(fa.len() == fb.len(), "different artifact lists");
    for (x, y) in fa.iter().zip(&fb) {
        let bx = fs::read(x).map_err(|e| e.to_string())?;
        let by = fs::read(y).map_err(|e| e.to_string())?;
        ensure!(bx == by, "{} differs", x.file_name().unwrap().to_string_lossy());
    }
    Ok(format!("{} artifacts byte-identical", fa.len()))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 13] = [
        ("schwarz-pick and isometry suite", schwarz_pick),
        ("distortion calculus", distortion_calculus),
        ("inequality margins", inequality_margins),
        ("left straightening of a telescoping stream", left_straightening),
        ("base-point independence and left limits", base_point_independence),
        ("right system limits", right_limits),
        ("right straightening along a backward orbit", right_straightening),
        ("mu-step and translation length", mu_step),
        ("denjoy-wolff classification", denjoy_wolff),
        ("half-plane milestone construction", section8),
        ("dense automorphism build", dense),
        ("fixed-point tracking", fixed_points),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS [{:2}] {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL [{:2}] {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL [{:2}] {name}: panicked", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
