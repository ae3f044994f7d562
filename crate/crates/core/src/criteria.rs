//! Series criteria for limits of left and right systems, and fixed-point tracking.
//!
//! Verdicts are finite-horizon readings. Every report carries its horizon and
//! the thresholds that produced it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{one_minus_abs2, DiscPoint};
use crate::holomap::{DWKind, MapExpr};
use crate::ifs::{eval_parts, orbit_bounded, Boundedness, GeneratorStream, LeftOrbitCursor, Side};
use crate::moebius::MoebiusMap;
use crate::straighten::{GridSample, ProbeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    /// Terms `1 - f_n^#(z0)`.
    FixedPoint,
    /// Terms `1 - f_n^#(L_{n-1}(z0))`.
    Orbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    SummableSoFar,
    Diverging,
    Inconclusive,
}

/// Which rule produced a series verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesRule {
    /// Partial sum above the divergence threshold with a negligible product.
    Threshold,
    /// Trailing increments and product changes below tolerance.
    TrailingWindow,
    /// Log-log slope of the terms over the second half of the horizon.
    TailExponent,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesThresholds {
    pub divergence_sum: f64,
    pub divergence_product: f64,
    pub window: usize,
    pub window_tol: f64,
    /// Tail exponents below this read as diverging.
    pub diverging_exponent: f64,
    /// Tail exponents above this read as summable.
    pub summable_exponent: f64,
}

impl Default for SeriesThresholds {
    fn default() -> Self {
        SeriesThresholds {
            divergence_sum: 50.0,
            divergence_product: 1e-20,
            window: 100,
            window_tol: 1e-10,
            diverging_exponent: 1.1,
            summable_exponent: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: usize,
    pub term: f64,
    pub partial_sum: f64,
    pub product: f64,
    pub orbit_re: f64,
    pub orbit_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub mode: SeriesMode,
    pub base_point: Complex64,
    pub horizon: usize,
    pub thresholds: SeriesThresholds,
    pub verdict: SeriesVerdict,
    pub rule: SeriesRule,
    pub final_sum: f64,
    pub final_product: f64,
    /// Fitted decay exponent of the terms, when enough positive terms exist.
    pub tail_exponent: Option<f64>,
    /// `max_n |L_n^#(z0) - prod_{k<=n} f_k^#(L_{k-1} z0)|` (orbit mode only).
    pub product_identity_residual: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<SeriesRow>,
}

impl SeriesReport {
    pub fn partial_sums(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.partial_sum)
    }

    pub fn product_trace(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.product)
    }
}

/// Least-squares slope of `log t` against `log n` over positive terms.
fn tail_exponent(rows: &[SeriesRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.term > 0.0)
        .map(|r| ((r.n as f64).ln(), r.term.ln()))
        .collect();
    if pts.len() < 20 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

fn decide(rows: &[SeriesRow], th: &SeriesThresholds) -> (SeriesVerdict, SeriesRule, Option<f64>) {
    let n = rows.len();
    let last = &rows[n - 1];
    if last.partial_sum > th.divergence_sum && last.product < th.divergence_product {
        return (SeriesVerdict::Diverging, SeriesRule::Threshold, None);
    }
    let w = th.window.min(n - 1);
    if w > 0 {
        let before = &rows[n - 1 - w];
        let increment = last.partial_sum - before.partial_sum;
        let product_change = (before.product - last.product).abs();
        if increment < th.window_tol && product_change < th.window_tol {
            return (SeriesVerdict::SummableSoFar, SeriesRule::TrailingWindow, None);
        }
    }
    let tail = &rows[n / 2..];
    if tail.len() >= 20 && tail.iter().all(|r| r.term == 0.0) {
        return (SeriesVerdict::SummableSoFar, SeriesRule::TailExponent, None);
    }
    match tail_exponent(tail) {
        Some(p) if p < th.diverging_exponent => (SeriesVerdict::Diverging, SeriesRule::TailExponent, Some(p)),
        Some(p) if p > th.summable_exponent => (SeriesVerdict::SummableSoFar, SeriesRule::TailExponent, Some(p)),
        p => (SeriesVerdict::Inconclusive, SeriesRule::None, p),
    }
}

/// Partial sums of `1 - f_n^#` and the product of the distortions.
pub fn distortion_series(
    stream: &GeneratorStream,
    z0: DiscPoint,
    horizon: usize,
    mode: SeriesMode,
    thresholds: SeriesThresholds,
) -> Result<SeriesReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    stream.check_nonconstant(horizon)?;
    let mut cursor = LeftOrbitCursor::new(stream, &[z0], false);
    let mut rows = Vec::with_capacity(horizon);
    let mut sum = 0.0;
    let mut product = 1.0;
    let mut identity_residual: f64 = 0.0;
    for n in 1..=horizon {
        let before = cursor.values()[0];
        let at = match mode {
            SeriesMode::FixedPoint => z0.value(),
            SeriesMode::Orbit => before,
        };
        let f = stream.generator_at(n)?;
        let d = f.distortion_raw(at)?;
        cursor.advance()?;
        let term = 1.0 - d;
        sum += term;
        product *= d;
        if mode == SeriesMode::Orbit {
            identity_residual = identity_residual.max((cursor.distortion(0) - product).abs());
        }
        rows.push(SeriesRow { n, term, partial_sum: sum, product, orbit_re: before.re, orbit_im: before.im });
    }
    let (verdict, rule, tail) = decide(&rows, &thresholds);
    Ok(SeriesReport {
        mode,
        base_point: z0.value(),
        horizon,
        thresholds,
        verdict,
        rule,
        final_sum: sum,
        final_product: product,
        tail_exponent: tail,
        product_identity_residual: (mode == SeriesMode::Orbit).then_some(identity_residual),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    NonconstantLimits,
    ConstantLimits,
    NotRelativelyCompact,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Radius used by the boundedness heuristic.
    pub radius: f64,
    pub series: SeriesThresholds,
    /// Second base point for the base-point independence check (default: image of `z0` under `z -> (z+0.3)/(1+0.3z)`).
    pub alt_base: Option<Complex64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { radius: 8.0, series: SeriesThresholds::default(), alt_base: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub base_point: Complex64,
    pub verdict: SeriesVerdict,
    pub rule: SeriesRule,
    pub final_sum: f64,
    pub final_product: f64,
    pub tail_exponent: Option<f64>,
}

impl From<&SeriesReport> for SeriesSummary {
    fn from(r: &SeriesReport) -> Self {
        SeriesSummary {
            base_point: r.base_point,
            verdict: r.verdict,
            rule: r.rule,
            final_sum: r.final_sum,
            final_product: r.final_product,
            tail_exponent: r.tail_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub side: Side,
    pub verdict: LimitVerdict,
    pub horizon: usize,
    pub radius: f64,
    pub thresholds: SeriesThresholds,
    pub boundedness: Boundedness,
    pub series: Vec<SeriesSummary>,
    /// Whether the verdicts at the two base points agree.
    pub base_points_agree: bool,
    /// Orbit of `z0` at the horizon (`L_N(z0)` or `R_N(z0)`).
    pub orbit_at_horizon: Complex64,
    /// `L_N^#(z0)` or `R_N^#(z0)`.
    pub distortion_at_base: f64,
    /// The map at the horizon sampled on the default grid.
    pub limit_samples: Vec<GridSample>,
}

fn alt_base(z0: DiscPoint, opts: &ClassifyOptions) -> Result<DiscPoint> {
    match opts.alt_base {
        Some(z) => DiscPoint::new(z),
        None => {
            let shift = MoebiusMap::disc_auto_raw(Complex64::new(0.3, 0.0), 0.0);
            Ok(DiscPoint::clamped(shift.apply_unchecked(z0.value())).0)
        }
    }
}

fn classify(stream: &GeneratorStream, side: Side, z0: DiscPoint, horizon: usize, opts: ClassifyOptions) -> Result<LimitReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    stream.check_nonconstant(horizon)?;
    let boundedness = orbit_bounded(stream, side, z0, horizon, opts.radius)?;
    let z1 = alt_base(z0, &opts)?;
    let s0 = distortion_series(stream, z0, horizon, SeriesMode::FixedPoint, opts.series)?;
    let s1 = distortion_series(stream, z1, horizon, SeriesMode::FixedPoint, opts.series)?;
    let agree = s0.verdict == s1.verdict;

    let grid = ProbeGrid::default();
    let (orbit_at_horizon, distortion_at_base, limit_samples) = match side {
        Side::Left => {
            let mut seeds = vec![z0];
            seeds.extend(grid.points().iter().map(|&z| DiscPoint::clamped(z).0));
            let mut c = LeftOrbitCursor::new(stream, &seeds, false);
            c.advance_to(horizon)?;
            let samples = grid.points().iter().zip(&c.values()[1..]).map(|(&z, &h)| GridSample { z, h }).collect();
            (c.values()[0], c.distortion(0), samples)
        }
        Side::Right => {
            let parts: Vec<MapExpr> =
                (1..=horizon).map(|n| stream.generator_at(n).map(|g| g.into_owned())).collect::<Result<_>>()?;
            let (v, d) = eval_parts(&parts, z0.value());
            let dist = if d.norm() == 0.0 {
                0.0
            } else {
                (d.norm() * one_minus_abs2(z0.value()) / one_minus_abs2(v)).min(1.0)
            };
            let samples =
                grid.points().iter().map(|&z| GridSample { z, h: eval_parts(&parts, z).0 }).collect();
            (v, dist, samples)
        }
    };

    let verdict = if !boundedness.is_bounded() {
        LimitVerdict::NotRelativelyCompact
    } else if !agree {
        LimitVerdict::Inconclusive
    } else {
        match s0.verdict {
            SeriesVerdict::SummableSoFar => LimitVerdict::NonconstantLimits,
            SeriesVerdict::Diverging => LimitVerdict::ConstantLimits,
            SeriesVerdict::Inconclusive => LimitVerdict::Inconclusive,
        }
    };
    Ok(LimitReport {
        side,
        verdict,
        horizon,
        radius: opts.radius,
        thresholds: opts.series,
        boundedness,
        series: vec![SeriesSummary::from(&s0), SeriesSummary::from(&s1)],
        base_points_agree: agree,
        orbit_at_horizon,
        distortion_at_base,
        limit_samples,
    })
}

/// Limits of the left system: nonconstant iff the distortion series converges (for bounded orbits).
pub fn classify_left_limits(
    stream: &GeneratorStream,
    z0: DiscPoint,
    horizon: usize,
    opts: ClassifyOptions,
) -> Result<LimitReport> {
    classify(stream, Side::Left, z0, horizon, opts)
}

/// Limits of the right system: a diverging series means convergence to a constant.
pub fn classify_right_limits(
    stream: &GeneratorStream,
    z0: DiscPoint,
    horizon: usize,
    opts: ClassifyOptions,
) -> Result<LimitReport> {
    classify(stream, Side::Right, z0, horizon, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointVerdict {
    /// `a_n -> a` at the horizon.
    Converges,
    NotConverged,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitLimitVerdict {
    /// `L_N -> a` on the probe grid.
    ConvergesToA,
    NotConverged,
    /// Some generator is numerically close to an automorphism, or the orbit is unbounded.
    HypothesisViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    /// Generators whose sampled distortion reaches `1 - delta` are refused.
    pub delta: f64,
    /// Tolerance for `|a_N - a|` and `max |L_N z - a|`.
    pub tol: f64,
    pub radius: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { delta: 1e-3, tol: 1e-6, radius: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRow {
    pub n: usize,
    pub point: Option<Complex64>,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub horizon: usize,
    pub options: FixedPointOptions,
    pub track: Vec<FixedPointRow>,
    pub limit_candidate: Option<Complex64>,
    pub final_gap: Option<f64>,
    pub fixed_point_verdict: FixedPointVerdict,
    pub orbit_verdict: OrbitLimitVerdict,
    /// Largest sampled distortion over all generators.
    pub max_sampled_distortion: f64,
    /// `max |L_N z - a|` over the probe grid, when the hypotheses hold.
    pub orbit_gap: Option<f64>,
}

const FIXED_POINT_TOL: f64 = 1e-10;

fn newton(f: &MapExpr, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..60 {
        let (v, d) = f.eval_with_deriv(z);
        let g = v - z;
        let dg = d - 1.0;
        if dg.norm() < 1e-300 {
            return None;
        }
        let step = g / dg;
        z -= step;
        if !(z.norm() < 1.0) {
            return None;
        }
        if step.norm() < 1e-16 {
            break;
        }
    }
    Some(z)
}

fn fixed_point_of(f: &MapExpr, start: Option<Complex64>) -> Option<Complex64> {
    let accept = |z: Complex64| z.norm() < 1.0 && (f.eval_raw(z) - z).norm() < FIXED_POINT_TOL;
    if let Some(s) = start {
        if let Some(z) = newton(f, s) {
            if accept(z) {
                return Some(z);
            }
        }
    }
    let r = f.denjoy_wolff(10_000, 1e-3).ok()?;
    match r.kind {
        DWKind::EllipticStrict | DWKind::EllipticAuto | DWKind::Constant if accept(r.point) => Some(r.point),
        DWKind::Identity => Some(Complex64::new(0.0, 0.0)),
        _ => None,
    }
}

/// Fixed points `a_n` of `f_n` and the behaviour of `L_N` against their limit.
pub fn track_fixed_points(
    stream: &GeneratorStream,
    horizon: usize,
    limit_candidate: Option<DiscPoint>,
    opts: FixedPointOptions,
) -> Result<FixedPointReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if !(opts.delta > 0.0 && opts.tol > 0.0 && opts.radius > 0.0) {
        return Err(Error::InvalidArgument("fixed-point options must be positive".into()));
    }
    let grid = ProbeGrid::default();
    let mut track = Vec::with_capacity(horizon);
    let mut prev: Option<Complex64> = None;
    let mut max_dist: f64 = 0.0;
    for n in 1..=horizon {
        let f = stream.generator_at(n)?;
        for &z in grid.points() {
            max_dist = max_dist.max(f.distortion_raw(z)?);
        }
        let a = fixed_point_of(&f, prev);
        let residual = a.map(|z| (f.eval_raw(z) - z).norm());
        if a.is_some() {
            prev = a;
        }
        track.push(FixedPointRow { n, point: a, residual });
    }
    let all_present = track.iter().all(|r| r.point.is_some());
    let candidate = limit_candidate.map(DiscPoint::value).or_else(|| track.last().and_then(|r| r.point));
    let final_gap = match (track.last().and_then(|r| r.point), candidate) {
        (Some(an), Some(a)) => Some((an - a).norm()),
        _ => None,
    };
    let fixed_point_verdict = match (all_present, final_gap) {
        (true, Some(g)) if g < opts.tol => FixedPointVerdict::Converges,
        (true, Some(_)) => FixedPointVerdict::NotConverged,
        _ => FixedPointVerdict::Inconclusive,
    };

    let bounded = orbit_bounded(stream, Side::Left, DiscPoint::origin(), horizon, opts.radius)?.is_bounded();
    let guard = max_dist < 1.0 - opts.delta;
    let (orbit_verdict, orbit_gap) = match candidate {
        Some(a) if bounded && guard => {
            let seeds: Vec<DiscPoint> = grid.points().iter().map(|&z| DiscPoint::clamped(z).0).collect();
            let mut c = LeftOrbitCursor::new(stream, &seeds, false);
            c.advance_to(horizon)?;
            let gap = c.values().iter().map(|v| (v - a).norm()).fold(0.0, f64::max);
            let v = if gap < opts.tol { OrbitLimitVerdict::ConvergesToA } else { OrbitLimitVerdict::NotConverged };
            (v, Some(gap))
        }
        Some(_) if !(bounded && guard) => (OrbitLimitVerdict::HypothesisViolated, None),
        _ => (OrbitLimitVerdict::NotConverged, None),
    };
    Ok(FixedPointReport {
        horizon,
        options: opts,
        track,
        limit_candidate: candidate,
        final_gap,
        fixed_point_verdict,
        orbit_verdict,
        max_sampled_distortion: max_dist,
        orbit_gap,
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pt(r: f64) -> impl Strategy<Value = Complex64> {
        (0.0..r, 0.0..(2.0 * PI)).prop_map(|(rho, t)| Complex64::from_polar(rho, t))
    }

    fn gen() -> impl Strategy<Value = MapExpr> {
        prop_oneof![
            (pt(0.8), -PI..PI).prop_map(|(a, t)| MapExpr::mobius(MoebiusMap::disc_auto_raw(a, t)).unwrap()),
            (0.2..1.0f64, -PI..PI).prop_map(|(r, t)| MapExpr::scale(Complex64::from_polar(r, t)).unwrap()),
            (prop::collection::vec(pt(0.8), 1..3), -PI..PI).prop_map(|(zs, t)| {
                MapExpr::blaschke(zs.into_iter().map(|z| DiscPoint::new(z).unwrap()).collect(), t).unwrap()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_identity_and_monotone(gens in prop::collection::vec(gen(), 1..30), z in pt(0.9)) {
            let n = gens.len();
            let s = GeneratorStream::list(gens);
            let r = distortion_series(&s, DiscPoint::new(z).unwrap(), n, SeriesMode::Orbit, SeriesThresholds::default()).unwrap();
            prop_assert!(r.product_identity_residual.unwrap() < 1e-9);
            let prods: Vec<f64> = r.product_trace().collect();
            prop_assert!(prods.windows(2).all(|w| w[1] <= w[0]));
            let sums: Vec<f64> = r.partial_sums().collect();
            prop_assert!(sums.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
