//! Straightening of left and right iterated function systems.
//!
//! Left: `H_n = gamma_n^{-1} ∘ L_n` with `gamma_n(0) = L_n(0)` and a phase making
//! `H_n(w)` real and nonnegative. Right: `H_n = R_n ∘ gamma_n^{-1}` with
//! `gamma_n(w_n) = 0` along a backward orbit, phased so that each
//! `g_n = gamma_{n-1} ∘ f_n ∘ gamma_n^{-1}` has `g_n'(0) >= 0`.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{omega, one_minus_abs2, DiscPoint};
use crate::holomap::MapExpr;
use crate::ifs::{eval_parts, verify_backward_orbit, BackwardOrbit, GeneratorStream, LeftOrbitCursor, Side};
use crate::moebius::{DomainTag, MoebiusMap};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Points at which the straightened maps are sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    points: Vec<Complex64>,
}

impl Default for ProbeGrid {
    /// The origin plus 12 points on each of the circles of radius 0.3 and 0.6.
    fn default() -> Self {
        ProbeGrid::circles(&[0.3, 0.6], 12)
    }
}

impl ProbeGrid {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("probe grid is empty".into()));
        }
        for &p in &points {
            DiscPoint::new(p)?;
        }
        Ok(ProbeGrid { points })
    }

    /// The origin and `per_circle` equally spaced points on each circle.
    pub fn circles(radii: &[f64], per_circle: usize) -> Self {
        let mut points = vec![ZERO];
        for &r in radii {
            for j in 0..per_circle {
                points.push(Complex64::from_polar(r, std::f64::consts::TAU * j as f64 / per_circle as f64));
            }
        }
        ProbeGrid { points }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
}

/// Tolerances of a straightening run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightenOptions {
    /// Cauchy residual below which the run counts as converged.
    pub tol: f64,
    /// `|H_n(w)|` below which the limit is taken to be the constant 0.
    pub tol_zero: f64,
    /// Number of trailing steps compared by the Cauchy residual.
    pub window: usize,
    /// Probe point `w` fixing the phase.
    pub probe: Complex64,
}

impl Default for StraightenOptions {
    fn default() -> Self {
        StraightenOptions { tol: 1e-8, tol_zero: 1e-9, window: 10, probe: Complex64::new(0.5, 0.0) }
    }
}

/// `|H_n(w)|` above which the left phase is updated.
const PHASE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub z: Complex64,
    pub h: Complex64,
}

/// Per-step diagnostics of a straightening run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub n: usize,
    /// `max_z omega(H_n z, H_{n-1} z)` over the grid.
    pub residual: f64,
    pub probe_modulus: f64,
    /// `H_n^#(0)`.
    pub distortion_at_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraighteningResult {
    pub side: Side,
    pub horizon: usize,
    pub options: StraightenOptions,
    /// `gamma_1, ..., gamma_N`.
    pub gammas: Vec<MoebiusMap>,
    /// Estimated limit `h` on the grid (`H_N`, or 0 on the degenerate branch).
    pub h_samples: Vec<GridSample>,
    /// Max of `omega(H_n z, H_m z)` over the grid and the trailing window.
    pub cauchy_residual: f64,
    pub converged: bool,
    /// Set when the limit was identified as the constant 0.
    pub degenerate: bool,
    /// Whether `|H_n(w)|` was non-increasing along the run.
    pub probe_monotone: bool,
    pub probe_point: Complex64,
    /// Right side only: the automorphism moving `w_0` to 0.
    pub pre_conjugation: Option<MoebiusMap>,
    pub trace: Vec<StepTrace>,
}

impl StraighteningResult {
    /// `H_N^#(0)`, which tends to `h^#(0)`.
    pub fn final_distortion_at_zero(&self) -> f64 {
        self.trace.last().map_or(1.0, |t| t.distortion_at_zero)
    }

    pub fn h_values(&self) -> Vec<Complex64> {
        self.h_samples.iter().map(|s| s.h).collect()
    }
}

/// Pairwise Cauchy residual over the window of stored grid samples.
fn window_residual(window: &VecDeque<Vec<Complex64>>) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in window.iter().enumerate() {
        for b in window.iter().skip(i + 1) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max(omega(*x, *y));
            }
        }
    }
    worst
}

fn step_residual(prev: &[Complex64], cur: &[Complex64]) -> f64 {
    prev.iter().zip(cur).map(|(a, b)| omega(*a, *b)).fold(0.0, f64::max)
}

fn check_common(n: usize, opts: &StraightenOptions) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument("straightening needs N >= 2".into()));
    }
    if !(opts.tol > 0.0 && opts.tol_zero > 0.0) || opts.window == 0 {
        return Err(Error::InvalidArgument("tolerances must be positive and the window nonempty".into()));
    }
    Ok(())
}

struct Finisher {
    window: VecDeque<Vec<Complex64>>,
    window_len: usize,
    prev: Option<Vec<Complex64>>,
    trace: Vec<StepTrace>,
    monotone: bool,
    last_modulus: f64,
}

impl Finisher {
    fn new(window_len: usize) -> Self {
        Finisher {
            window: VecDeque::new(),
            window_len,
            prev: None,
            trace: Vec::new(),
            monotone: true,
            last_modulus: f64::INFINITY,
        }
    }

    fn record(&mut self, n: usize, h: Vec<Complex64>, probe_modulus: f64, distortion_at_zero: f64) {
        let residual = self.prev.as_ref().map_or(0.0, |p| step_residual(p, &h));
        if probe_modulus > self.last_modulus * (1.0 + 1e-12) + 1e-15 {
            self.monotone = false;
        }
        self.last_modulus = probe_modulus;
        self.trace.push(StepTrace { n, residual, probe_modulus, distortion_at_zero });
        self.window.push_back(h.clone());
        if self.window.len() > self.window_len + 1 {
            self.window.pop_front();
        }
        self.prev = Some(h);
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        side: Side,
        horizon: usize,
        options: StraightenOptions,
        gammas: Vec<MoebiusMap>,
        grid: &ProbeGrid,
        pre_conjugation: Option<MoebiusMap>,
    ) -> StraighteningResult {
        let cauchy_residual = window_residual(&self.window);
        let last = self.prev.unwrap_or_default();
        let degenerate = self.last_modulus < options.tol_zero && self.monotone;
        let converged = degenerate || cauchy_residual < options.tol;
        let h_samples = grid
            .points()
            .iter()
            .zip(&last)
            .map(|(&z, &h)| GridSample { z, h: if degenerate { ZERO } else { h } })
            .collect();
        StraighteningResult {
            side,
            horizon,
            options,
            gammas,
            h_samples,
            cauchy_residual,
            converged,
            degenerate,
            probe_monotone: self.monotone,
            probe_point: options.probe,
            pre_conjugation,
            trace: self.trace,
        }
    }
}

/// Left straightening `gamma_n^{-1} ∘ L_n` up to `n = horizon`.
pub fn left_straighten(
    stream: &GeneratorStream,
    horizon: usize,
    grid: &ProbeGrid,
    opts: StraightenOptions,
) -> Result<StraighteningResult> {
    check_common(horizon, &opts)?;
    let w = DiscPoint::new(opts.probe)?;
    if w.value() == ZERO {
        return Err(Error::InvalidArgument("probe point must differ from 0".into()));
    }
    let mut seeds = vec![DiscPoint::origin(), w];
    seeds.extend(grid.points().iter().map(|&z| DiscPoint::new(z).expect("grid validated")));
    let mut cursor = LeftOrbitCursor::new(stream, &seeds, false);
    let mut theta = 0.0;
    let mut gammas = Vec::with_capacity(horizon);
    let mut fin = Finisher::new(opts.window);
    for n in 1..=horizon {
        cursor.advance()?;
        let vals = cursor.values();
        let a = vals[0];
        let centered = MoebiusMap::disc_auto_raw(a, 0.0).inverse();
        let u = centered.apply_unchecked(vals[1]);
        if u.norm() > PHASE_FLOOR {
            theta = u.arg();
        }
        // A_a ∘ R_theta as a single automorphism
        let gamma = MoebiusMap::disc_auto_raw(a * Complex64::from_polar(1.0, -theta), theta);
        let gi = gamma.inverse();
        let h: Vec<Complex64> = vals[2..].iter().map(|&v| gi.apply_unchecked(v)).collect();
        let probe_modulus = gi.apply_unchecked(vals[1]).norm();
        fin.record(n, h, probe_modulus, cursor.distortion(0));
        gammas.push(gamma);
    }
    Ok(fin.finish(Side::Left, horizon, opts, gammas, grid, None))
}

/// Right straightening `R_n ∘ gamma_n^{-1}` along a backward orbit.
///
/// The first generator is post-composed with the automorphism moving `w_0`
/// to 0, so the reported maps belong to the normalized system.
pub fn right_straighten(
    stream: &GeneratorStream,
    orbit: &BackwardOrbit,
    horizon: usize,
    grid: &ProbeGrid,
    opts: StraightenOptions,
) -> Result<StraighteningResult> {
    check_common(horizon, &opts)?;
    DiscPoint::new(opts.probe)?;
    if orbit.steps() < horizon {
        return Err(Error::InvalidArgument(format!(
            "backward orbit has {} steps, horizon {horizon} requested",
            orbit.steps()
        )));
    }
    let check = verify_backward_orbit(stream, orbit)?;
    if !check.valid {
        return Err(Error::InvalidArgument(format!(
            "backward orbit residual {:e} exceeds tolerance",
            check.step_residual
        )));
    }
    let w0 = orbit.point(0);
    let pre = MoebiusMap::disc_auto_raw(w0, 0.0).inverse();
    let mut parts: Vec<MapExpr> = Vec::with_capacity(horizon);
    let mut theta_prev = 0.0;
    let mut gammas = Vec::with_capacity(horizon);
    let mut fin = Finisher::new(opts.window);
    let mut distortion = 1.0;
    let mut prev_w = ZERO;
    for n in 1..=horizon {
        let f = stream.generator_at(n)?.into_owned();
        let f = if n == 1 { MapExpr::mobius(pre).expect("disc automorphism").after(&f) } else { f };
        let wn = orbit.point(n);
        let fd = f.eval_with_deriv(wn).1;
        let d = Complex64::from_polar(1.0, theta_prev) * fd * one_minus_abs2(wn) / one_minus_abs2(prev_w);
        let theta = if d.norm() > 0.0 { d.arg() } else { theta_prev };
        // g_n'(0) = |D_n| after the phase choice
        distortion *= d.norm();
        // gamma_n(z) = e^{i theta} (z - w_n)/(1 - conj(w_n) z)
        let gamma = MoebiusMap::rotation(theta)
            .compose(&MoebiusMap::disc_auto_raw(wn, 0.0).inverse())
            .expect("disc automorphisms compose");
        let gi = gamma.inverse();
        parts.push(f);
        let h: Vec<Complex64> = grid.points().iter().map(|&z| eval_parts(&parts, gi.apply_unchecked(z)).0).collect();
        let probe_modulus = eval_parts(&parts, gi.apply_unchecked(opts.probe)).0.norm();
        fin.record(n, h, probe_modulus, distortion.min(1.0));
        gammas.push(gamma);
        theta_prev = theta;
        prev_w = wn;
    }
    Ok(fin.finish(Side::Right, horizon, opts, gammas, grid, Some(pre)))
}

/// The phase-condition values `g_n'(0)` of a right straightening, recomputed from its gammas.
pub fn right_phase_values(
    stream: &GeneratorStream,
    orbit: &BackwardOrbit,
    result: &StraighteningResult,
) -> Result<Vec<Complex64>> {
    let pre = result.pre_conjugation.unwrap_or_else(|| MoebiusMap::identity(DomainTag::Disc));
    let mut out = Vec::with_capacity(result.gammas.len());
    let mut prev = MoebiusMap::identity(DomainTag::Disc);
    for (k, gamma) in result.gammas.iter().enumerate() {
        let n = k + 1;
        let f = stream.generator_at(n)?.into_owned();
        let f = if n == 1 { MapExpr::mobius(pre)?.after(&f) } else { f };
        let wn = orbit.point(n);
        // g_n'(0) = gamma_{n-1}'(w_{n-1}) f_n'(w_n) / gamma_n'(w_n)
        let wp = if n == 1 { ZERO } else { orbit.point(n - 1) };
        let num = prev.deriv_unchecked(wp) * f.eval_with_deriv(wn).1;
        out.push(num / gamma.deriv_unchecked(wn));
        prev = *gamma;
    }
    Ok(out)
}

/// A value with the trace of its approximants `n = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub value: f64,
    pub horizon: usize,
    pub trace: Vec<f64>,
}

/// `omega(L_N z, L_N w)`; the trace is non-increasing and bounds the limit from above.
pub fn limit_distance(stream: &GeneratorStream, z: DiscPoint, w: DiscPoint, horizon: usize) -> Result<TraceReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let mut c = LeftOrbitCursor::new(stream, &[z, w], true);
    let mut trace = vec![c.ledger()[0]];
    for _ in 0..horizon {
        c.advance()?;
        trace.push(c.ledger()[0]);
    }
    Ok(TraceReport { value: *trace.last().unwrap(), horizon, trace })
}

/// `L_N^#(z)` with its non-increasing trace.
pub fn distortion_limit(stream: &GeneratorStream, z: DiscPoint, horizon: usize) -> Result<TraceReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let mut c = LeftOrbitCursor::new(stream, &[z], false);
    let mut trace = vec![1.0];
    for _ in 0..horizon {
        c.advance()?;
        trace.push(c.distortion(0));
    }
    Ok(TraceReport { value: *trace.last().unwrap(), horizon, trace })
}

/// Hyperbolic `mu`-step: `omega(f^N z, f^{N+mu} z)` with its trace.
pub fn mu_step(f: &MapExpr, z: DiscPoint, mu: usize, horizon: usize) -> Result<TraceReport> {
    if mu == 0 {
        return Err(Error::InvalidArgument("mu must be >= 1".into()));
    }
    let mut fz = z.value();
    for _ in 0..mu {
        fz = f.eval_raw(fz);
    }
    let stream = GeneratorStream::constant(f.clone());
    limit_distance(&stream, z, DiscPoint::clamped(fz).0, horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemiconjugacyKind {
    Automorphic,
    SemiconjugateToAuto,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconjugacyReport {
    pub kind: SemiconjugacyKind,
    /// `gamma_N^{-1} ∘ gamma_{N+1}` when the limit is nonconstant.
    pub phi_estimate: Option<MoebiusMap>,
    /// `max |H_N(f z) - phi(H_N z)|` over the grid.
    pub residual: f64,
    pub horizon: usize,
    pub cauchy_residual: f64,
    pub distortion_at_zero: f64,
}

/// `max |h|` on the grid below this counts as a constant limit.
const CONSTANT_FLOOR: f64 = 1e-6;

/// Decides whether `f` is semiconjugate to an automorphism through its left straightening.
pub fn semiconjugacy_probe(
    f: &MapExpr,
    horizon: usize,
    grid: &ProbeGrid,
    opts: StraightenOptions,
) -> Result<SemiconjugacyReport> {
    if f.is_constant() {
        return Err(Error::InvalidArgument("semiconjugacy probe needs a nonconstant map".into()));
    }
    let stream = GeneratorStream::constant(f.clone());
    let res = left_straighten(&stream, horizon + 1, grid, opts)?;
    let at_n = left_straighten(&stream, horizon, grid, opts)?;
    if !at_n.converged {
        return Err(Error::Inconclusive {
            iterations: horizon,
            reason: format!("straightening did not converge (Cauchy residual {:e})", at_n.cauchy_residual),
            last_points: at_n.h_values(),
        });
    }
    let distortion_at_zero = at_n.final_distortion_at_zero();
    // h(0) = 0, so the spread of h on the grid detects a constant limit
    let spread = at_n.h_samples.iter().map(|s| s.h.norm()).fold(0.0, f64::max);
    if at_n.degenerate || spread < CONSTANT_FLOOR {
        return Ok(SemiconjugacyReport {
            kind: SemiconjugacyKind::None,
            phi_estimate: None,
            residual: 0.0,
            horizon,
            cauchy_residual: at_n.cauchy_residual,
            distortion_at_zero,
        });
    }
    let gn = at_n.gammas[horizon - 1];
    let phi = gn.inverse().compose(&res.gammas[horizon])?;
    // H_N(f z) from an independent orbit of the points f(z)
    let images: Vec<Complex64> = grid.points().iter().map(|&z| f.eval_raw(z)).collect();
    let img_grid = ProbeGrid { points: images };
    let seeds: Vec<DiscPoint> = img_grid.points().iter().map(|&z| DiscPoint::clamped(z).0).collect();
    let mut c = LeftOrbitCursor::new(&stream, &seeds, false);
    c.advance_to(horizon)?;
    let gi = gn.inverse();
    let residual = c
        .values()
        .iter()
        .zip(at_n.h_samples.iter())
        .map(|(&v, s)| (gi.apply_unchecked(v) - phi.apply_unchecked(s.h)).norm())
        .fold(0.0, f64::max);
    let kind = if (distortion_at_zero - 1.0).abs() < 1e-9 {
        SemiconjugacyKind::Automorphic
    } else {
        SemiconjugacyKind::SemiconjugateToAuto
    };
    Ok(SemiconjugacyReport {
        kind,
        phi_estimate: Some(phi),
        residual,
        horizon,
        cauchy_residual: at_n.cauchy_residual,
        distortion_at_zero,
    })
}
