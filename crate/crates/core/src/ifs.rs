//! Generator streams and orbit engines for left and right iterated function systems.
//!
//! For a stream `f_1, f_2, ...` the left system is `L_n = f_n ∘ ... ∘ f_1`
//! and the right system is `R_n = f_1 ∘ ... ∘ f_n`.

use std::borrow::Cow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{omega, one_minus_abs2, DiscPoint, HyperbolicBall};
use crate::holomap::MapExpr;
use crate::moebius::MoebiusMap;

/// Default cap on the number of parts kept by a right orbit.
pub const DEFAULT_DEPTH_CAP: usize = 100_000;

/// Built-in streams given as pure functions of the index.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamRule {
    /// `z -> (1 - 1/(n + offset)^power) z`.
    ScaleProduct { power: f64, offset: f64 },
    /// `z -> factor z` for every `n`.
    ConstantScale { factor: Complex64 },
    /// `z -> z^power` for every `n`.
    Monomial { power: u32 },
    /// `z -> gamma_{b_n}(c z)` with `b_n = base + amplitude / n^decay_power`,
    /// where `gamma_b` is the disc automorphism sending 0 to `b`.
    ShiftedContraction { base: f64, amplitude: f64, decay_power: f64, contraction: f64 },
}

impl StreamRule {
    fn name(&self) -> &'static str {
        match self {
            StreamRule::ScaleProduct { .. } => "scale_product",
            StreamRule::ConstantScale { .. } => "constant_scale",
            StreamRule::Monomial { .. } => "monomial",
            StreamRule::ShiftedContraction { .. } => "shifted_contraction",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("rule {}: {m}", self.name())));
        match *self {
            StreamRule::ScaleProduct { power, offset } => {
                if !(power > 0.0 && power.is_finite()) {
                    return bad("power must be positive");
                }
                if !(offset > 0.0 && offset.is_finite()) {
                    return bad("offset must be positive");
                }
            }
            StreamRule::ConstantScale { factor } => {
                if !(factor.norm() <= 1.0) {
                    return bad("|factor| must be <= 1");
                }
            }
            StreamRule::Monomial { power } => {
                if power == 0 {
                    return bad("power must be >= 1");
                }
            }
            StreamRule::ShiftedContraction { base, amplitude, decay_power, contraction } => {
                if !(base.abs() + amplitude.abs() < 1.0) {
                    return bad("|base| + |amplitude| must be < 1");
                }
                if !(decay_power > 0.0) {
                    return bad("decay_power must be positive");
                }
                if !(contraction > 0.0 && contraction <= 1.0) {
                    return bad("contraction must lie in (0, 1]");
                }
            }
        }
        Ok(())
    }

    fn generator(&self, n: usize) -> MapExpr {
        let nf = n as f64;
        match *self {
            StreamRule::ScaleProduct { power, offset } => {
                MapExpr::scale_real(1.0 - (nf + offset).powf(-power)).expect("validated rule")
            }
            StreamRule::ConstantScale { factor } => MapExpr::scale(factor).expect("validated rule"),
            StreamRule::Monomial { power } => MapExpr::monomial(power).expect("validated rule"),
            StreamRule::ShiftedContraction { base, amplitude, decay_power, contraction } => {
                let b = base + amplitude * nf.powf(-decay_power);
                let shift = MoebiusMap::disc_auto_raw(Complex64::new(b, 0.0), 0.0);
                MapExpr::compose(vec![
                    MapExpr::mobius(shift).expect("disc automorphism"),
                    MapExpr::scale_real(contraction).expect("validated rule"),
                ])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    List(Vec<MapExpr>),
    Cycle(Vec<MapExpr>),
    Rule(StreamRule),
}

/// A sequence `f_1, f_2, ...` of self-maps; index 0 is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorStream {
    source: Source,
}

impl GeneratorStream {
    pub fn list(generators: Vec<MapExpr>) -> Self {
        GeneratorStream { source: Source::List(generators) }
    }

    pub fn cycle(generators: Vec<MapExpr>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidArgument("cycled stream needs at least one generator".into()));
        }
        Ok(GeneratorStream { source: Source::Cycle(generators) })
    }

    /// The constant stream `f_n = f`.
    pub fn constant(f: MapExpr) -> Self {
        GeneratorStream { source: Source::Cycle(vec![f]) }
    }

    pub fn rule(rule: StreamRule) -> Result<Self> {
        rule.validate()?;
        Ok(GeneratorStream { source: Source::Rule(rule) })
    }

    /// Number of generators, `None` for infinite streams.
    pub fn len(&self) -> Option<usize> {
        match &self.source {
            Source::List(g) => Some(g.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// `f_n`; `f_0` is the identity.
    pub fn generator_at(&self, n: usize) -> Result<Cow<'_, MapExpr>> {
        if n == 0 {
            return Ok(Cow::Owned(MapExpr::identity()));
        }
        match &self.source {
            Source::List(g) => g.get(n - 1).map(Cow::Borrowed).ok_or(Error::StreamExhausted(n)),
            Source::Cycle(g) => Ok(Cow::Borrowed(&g[(n - 1) % g.len()])),
            Source::Rule(r) => Ok(Cow::Owned(r.generator(n))),
        }
    }

    /// Fails with [`Error::ConstantGenerator`] if any of `f_1..=f_n` is constant.
    pub fn check_nonconstant(&self, n: usize) -> Result<()> {
        let upto = match &self.source {
            Source::Cycle(g) => n.min(g.len()),
            _ => n,
        };
        for k in 1..=upto {
            if self.generator_at(k)?.is_constant() {
                return Err(Error::ConstantGenerator(k));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed stream JSON: {e}")))?;
        Self::from_value(v)
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self> {
        let j: StreamJson = serde_json::from_value(v)
            .map_err(|e| Error::InvalidArgument(format!("malformed stream JSON: {e}")))?;
        match j {
            StreamJson::List { generators } => Ok(Self::list(generators)),
            StreamJson::Cycle { generators } => Self::cycle(generators),
            StreamJson::Rule { name, params } => Self::rule(parse_rule(&name, params)?),
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        let j = match &self.source {
            Source::List(g) => StreamJson::List { generators: g.clone() },
            Source::Cycle(g) => StreamJson::Cycle { generators: g.clone() },
            Source::Rule(r) => StreamJson::Rule { name: r.name().into(), params: rule_params(r) },
        };
        serde_json::to_value(j).expect("stream JSON is serializable")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum StreamJson {
    List {
        generators: Vec<MapExpr>,
    },
    Cycle {
        generators: Vec<MapExpr>,
    },
    Rule {
        name: String,
        #[serde(default)]
        params: serde_json::Value,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleProductParams {
    #[serde(default = "two")]
    power: f64,
    #[serde(default = "one")]
    offset: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantScaleParams {
    factor: Complex64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonomialParams {
    power: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShiftedContractionParams {
    base: f64,
    amplitude: f64,
    #[serde(default = "two")]
    decay_power: f64,
    #[serde(default = "half")]
    contraction: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}

fn parse_rule(name: &str, params: serde_json::Value) -> Result<StreamRule> {
    let params = if params.is_null() { serde_json::json!({}) } else { params };
    fn get<T: for<'de> Deserialize<'de>>(name: &str, p: serde_json::Value) -> Result<T> {
        serde_json::from_value(p).map_err(|e| Error::InvalidArgument(format!("rule {name}: bad params: {e}")))
    }
    Ok(match name {
        "scale_product" => {
            let p: ScaleProductParams = get(name, params)?;
            StreamRule::ScaleProduct { power: p.power, offset: p.offset }
        }
        "constant_scale" => {
            let p: ConstantScaleParams = get(name, params)?;
            StreamRule::ConstantScale { factor: p.factor }
        }
        "monomial" => {
            let p: MonomialParams = get(name, params)?;
            StreamRule::Monomial { power: p.power }
        }
        "shifted_contraction" => {
            let p: ShiftedContractionParams = get(name, params)?;
            StreamRule::ShiftedContraction {
                base: p.base,
                amplitude: p.amplitude,
                decay_power: p.decay_power,
                contraction: p.contraction,
            }
        }
        other => return Err(Error::UnknownRule(other.into())),
    })
}

fn rule_params(r: &StreamRule) -> serde_json::Value {
    let v = match *r {
        StreamRule::ScaleProduct { power, offset } => serde_json::to_value(ScaleProductParams { power, offset }),
        StreamRule::ConstantScale { factor } => serde_json::to_value(ConstantScaleParams { factor }),
        StreamRule::Monomial { power } => serde_json::to_value(MonomialParams { power }),
        StreamRule::ShiftedContraction { base, amplitude, decay_power, contraction } => {
            serde_json::to_value(ShiftedContractionParams { base, amplitude, decay_power, contraction })
        }
    };
    v.expect("params are serializable")
}

/// Absolute error budget for a distance between two computed points, from their
/// conditioning near the circle.
fn omega_slack(a: Complex64, b: Complex64, value: f64) -> f64 {
    let cond = one_minus_abs2(a).min(one_minus_abs2(b)).max(f64::MIN_POSITIVE);
    1e-10 * value.max(1.0) + 4.0 * f64::EPSILON / cond
}

#[inline]
fn clamp_raw(z: Complex64) -> Complex64 {
    DiscPoint::clamped(z).0.value()
}

/// Left orbit of several seeds, with derivatives and the pairwise distance ledger.
#[derive(Debug, Clone)]
pub struct LeftOrbitCursor<'a> {
    stream: &'a GeneratorStream,
    n: usize,
    seeds: Vec<Complex64>,
    values: Vec<Complex64>,
    prev: Vec<Complex64>,
    derivs: Vec<Complex64>,
    pairs: Vec<(usize, usize)>,
    ledger: Vec<f64>,
}

impl<'a> LeftOrbitCursor<'a> {
    /// Tracks `seeds`; the ledger covers every pair when `track_pairs` is set.
    pub fn new(stream: &'a GeneratorStream, seeds: &[DiscPoint], track_pairs: bool) -> Self {
        let seeds: Vec<Complex64> = seeds.iter().map(|p| p.value()).collect();
        let mut pairs = Vec::new();
        if track_pairs {
            for i in 0..seeds.len() {
                for j in i + 1..seeds.len() {
                    pairs.push((i, j));
                }
            }
        }
        let ledger = pairs.iter().map(|&(i, j)| omega(seeds[i], seeds[j])).collect();
        LeftOrbitCursor {
            stream,
            n: 0,
            values: seeds.clone(),
            prev: seeds.clone(),
            derivs: vec![Complex64::new(1.0, 0.0); seeds.len()],
            seeds,
            pairs,
            ledger,
        }
    }

    pub fn index(&self) -> usize {
        self.n
    }

    pub fn seeds(&self) -> &[Complex64] {
        &self.seeds
    }

    /// `L_n` of every seed.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `L_n'` at every seed.
    pub fn derivs(&self) -> &[Complex64] {
        &self.derivs
    }

    /// `L_n^#` at seed `i`.
    pub fn distortion(&self, i: usize) -> f64 {
        let d = self.derivs[i].norm();
        if d == 0.0 {
            return 0.0;
        }
        (d * one_minus_abs2(self.seeds[i]) / one_minus_abs2(self.values[i])).min(1.0)
    }

    /// `omega(L_{n-1} z, L_n z)` for seed `i`.
    pub fn step_omega(&self, i: usize) -> f64 {
        omega(self.prev[i], self.values[i])
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn ledger(&self) -> &[f64] {
        &self.ledger
    }

    /// Applies `f_{n+1}` to every tracked value.
    pub fn advance(&mut self) -> Result<()> {
        let f = self.stream.generator_at(self.n + 1)?;
        self.n += 1;
        for k in 0..self.values.len() {
            let (v, d) = f.eval_with_deriv(self.values[k]);
            self.prev[k] = self.values[k];
            self.values[k] = clamp_raw(v);
            self.derivs[k] *= d;
        }
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let (a, b) = (self.values[i], self.values[j]);
            let d = omega(a, b);
            let old = self.ledger[p];
            if d > old + omega_slack(a, b, old) {
                return Err(Error::Consistency(format!(
                    "left distance ledger increased at n = {}: {old} -> {d}",
                    self.n
                )));
            }
            self.ledger[p] = d;
        }
        Ok(())
    }

    pub fn advance_to(&mut self, n: usize) -> Result<()> {
        while self.n < n {
            self.advance()?;
        }
        Ok(())
    }
}

/// Right orbit: keeps the parts `f_1, ..., f_n` and re-evaluates tracked seeds.
#[derive(Debug, Clone)]
pub struct RightOrbitState<'a> {
    stream: &'a GeneratorStream,
    parts: Vec<MapExpr>,
    seeds: Vec<Complex64>,
    values: Vec<Complex64>,
    steps: Vec<f64>,
    depth_cap: usize,
}

impl<'a> RightOrbitState<'a> {
    pub fn new(stream: &'a GeneratorStream, seeds: &[DiscPoint]) -> Self {
        let seeds: Vec<Complex64> = seeds.iter().map(|p| p.value()).collect();
        RightOrbitState {
            stream,
            parts: Vec::new(),
            values: seeds.clone(),
            steps: vec![0.0; seeds.len()],
            seeds,
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    pub fn with_depth_cap(mut self, cap: usize) -> Self {
        self.depth_cap = cap;
        self
    }

    pub fn index(&self) -> usize {
        self.parts.len()
    }

    /// `R_n` of every seed.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `omega(R_{n-1} z, R_n z)` for every seed.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// `R_n` as an expression, outermost part `f_1`.
    pub fn composed(&self) -> MapExpr {
        MapExpr::compose(self.parts.clone())
    }

    pub fn parts(&self) -> &[MapExpr] {
        &self.parts
    }

    /// `R_n(z)` and `R_n'(z)`.
    pub fn eval_with_deriv(&self, z: Complex64) -> (Complex64, Complex64) {
        eval_parts(&self.parts, z)
    }

    fn push_next(&mut self) -> Result<()> {
        let n = self.parts.len() + 1;
        if n > self.depth_cap {
            return Err(Error::DepthCap(self.depth_cap));
        }
        self.parts.push(self.stream.generator_at(n)?.into_owned());
        Ok(())
    }

    /// Appends `f_{n+1}` and refreshes the tracked seeds.
    pub fn advance(&mut self) -> Result<()> {
        self.push_next()?;
        let n = self.parts.len();
        let f = &self.parts[n - 1];
        for k in 0..self.seeds.len() {
            let z = self.seeds[k];
            let fz = f.eval_raw(z);
            let new = clamp_raw(eval_parts(&self.parts[..n - 1], fz).0);
            let step = omega(self.values[k], new);
            let bound = omega(z, fz);
            if step > bound + omega_slack(self.values[k], new, bound) + omega_slack(z, fz, bound) {
                return Err(Error::Consistency(format!(
                    "right step {step} exceeds omega(z, f_n z) = {bound} at n = {n}"
                )));
            }
            self.steps[k] = step;
            self.values[k] = new;
        }
        Ok(())
    }

    /// Appends generators up to `f_n` without evaluating the seeds.
    pub fn extend_to(&mut self, n: usize) -> Result<()> {
        while self.parts.len() < n {
            self.push_next()?;
        }
        for k in 0..self.seeds.len() {
            self.values[k] = clamp_raw(eval_parts(&self.parts, self.seeds[k]).0);
        }
        Ok(())
    }
}

/// Evaluates `parts[0] ∘ parts[1] ∘ ...` with its derivative.
pub(crate) fn eval_parts(parts: &[MapExpr], z: Complex64) -> (Complex64, Complex64) {
    parts.iter().rev().fold((z, Complex64::new(1.0, 0.0)), |(v, d), p| {
        let (v1, d1) = p.eval_with_deriv(v);
        (v1, d * d1)
    })
}

/// Points `w_0, ..., w_N` with `f_n(w_n) = w_{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardOrbit {
    points: Vec<DiscPoint>,
}

impl BackwardOrbit {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("backward orbit needs w_0".into()));
        }
        let points = points.into_iter().map(DiscPoint::new).collect::<Result<Vec<_>>>()?;
        Ok(BackwardOrbit { points })
    }

    /// Number of steps `N` (the orbit stores `N + 1` points).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn point(&self, n: usize) -> Complex64 {
        self.points[n].value()
    }

    pub fn points(&self) -> &[DiscPoint] {
        &self.points
    }
}

/// Residuals of a backward orbit.
///
/// `step_residual` is `max |f_n(w_n) - w_{n-1}|` and decides validity.
/// `composed_residual` is `max |R_n(w_n) - w_0|` computed by direct composition,
/// which loses accuracy quickly for expanding compositions and is informational.
/// `composed_bound` is `sum omega(f_n w_n, w_{n-1})`, a bound on `omega(R_n w_n, w_0)`
/// since every `R_{n-1}` is a semicontraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardCheck {
    pub valid: bool,
    pub step_residual: f64,
    pub composed_residual: f64,
    pub composed_bound: f64,
}

pub const BACKWARD_TOL: f64 = 1e-9;

pub fn verify_backward_orbit(stream: &GeneratorStream, orbit: &BackwardOrbit) -> Result<BackwardCheck> {
    let n_max = orbit.steps();
    stream.generator_at(n_max)?;
    let w0 = orbit.point(0);
    let mut step_residual: f64 = 0.0;
    let mut composed_residual: f64 = 0.0;
    let mut composed_bound = 0.0;
    let mut parts = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let f = stream.generator_at(n)?.into_owned();
        let (wn, prev) = (orbit.point(n), orbit.point(n - 1));
        let img = f.eval_raw(wn);
        step_residual = step_residual.max((img - prev).norm());
        composed_bound += omega(img, prev);
        parts.push(f);
        composed_residual = composed_residual.max((eval_parts(&parts, wn).0 - w0).norm());
    }
    Ok(BackwardCheck { valid: step_residual <= BACKWARD_TOL, step_residual, composed_residual, composed_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Finite-horizon boundedness of one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Boundedness {
    /// `max_n omega(0, orbit_n)` stayed within the radius up to the horizon (hits counts exceedances).
    BoundedWithin { max_omega: f64, argmax: usize, hits: usize },
    /// Three consecutive exceedances starting at `first_n`.
    Escaped { first_n: usize, max_omega: f64 },
}

impl Boundedness {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Boundedness::BoundedWithin { .. })
    }
}

/// Consecutive exceedances required before an escape is declared.
const HYSTERESIS: usize = 3;

/// Heuristic for relative compactness: tracks `omega(0, orbit_n(z))` for `n <= horizon`.
pub fn orbit_bounded(
    stream: &GeneratorStream,
    side: Side,
    z: DiscPoint,
    horizon: usize,
    radius: f64,
) -> Result<Boundedness> {
    if horizon == 0 || !(radius > 0.0) {
        return Err(Error::InvalidArgument("orbit_bounded needs horizon >= 1 and radius > 0".into()));
    }
    let origin = Complex64::new(0.0, 0.0);
    let mut max_omega = omega(origin, z.value());
    let mut argmax = 0;
    let mut hits = 0;
    let mut run = 0;
    let mut run_start = 0;
    let mut observe = |n: usize, v: Complex64| -> Option<Boundedness> {
        let d = omega(origin, v);
        if d > max_omega {
            max_omega = d;
            argmax = n;
        }
        if d > radius {
            hits += 1;
            if run == 0 {
                run_start = n;
            }
            run += 1;
            if run >= HYSTERESIS {
                return Some(Boundedness::Escaped { first_n: run_start, max_omega });
            }
        } else {
            run = 0;
        }
        None
    };
    if let Some(b) = observe(0, z.value()) {
        return Ok(b);
    }
    match side {
        Side::Left => {
            let mut c = LeftOrbitCursor::new(stream, &[z], false);
            for n in 1..=horizon {
                c.advance()?;
                if let Some(b) = observe(n, c.values()[0]) {
                    return Ok(b);
                }
            }
        }
        Side::Right => {
            let mut r = RightOrbitState::new(stream, &[z]);
            for n in 1..=horizon {
                r.advance()?;
                if let Some(b) = observe(n, r.values()[0]) {
                    return Ok(b);
                }
            }
        }
    }
    Ok(Boundedness::BoundedWithin { max_omega, argmax, hits })
}

/// Indices at which sampled images of a ball meet the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactDivergence {
    pub horizon: usize,
    pub hits: Vec<usize>,
    /// First index after which no sampled image met the ball, if that happened before the horizon.
    pub disjoint_from: Option<usize>,
}

pub fn compact_divergence(
    stream: &GeneratorStream,
    side: Side,
    ball: &HyperbolicBall,
    horizon: usize,
) -> Result<CompactDivergence> {
    let sample: Vec<DiscPoint> = ball.sample(3, 12).into_iter().map(|z| DiscPoint::clamped(z).0).collect();
    let mut hits = Vec::new();
    match side {
        Side::Left => {
            let mut c = LeftOrbitCursor::new(stream, &sample, false);
            for n in 1..=horizon {
                c.advance()?;
                if c.values().iter().any(|&v| ball.contains_raw(v)) {
                    hits.push(n);
                }
            }
        }
        Side::Right => {
            let mut r = RightOrbitState::new(stream, &sample);
            for n in 1..=horizon {
                r.advance()?;
                if r.values().iter().any(|&v| ball.contains_raw(v)) {
                    hits.push(n);
                }
            }
        }
    }
    let last = hits.last().copied().unwrap_or(0);
    let disjoint_from = if last < horizon { Some(last + 1) } else { None };
    Ok(CompactDivergence { horizon, hits, disjoint_from })
}

/// One row of the orbit CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRow {
    pub n: usize,
    pub seed_re: f64,
    pub seed_im: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub omega_to_origin: f64,
    pub step_omega: f64,
}

/// Orbit table for `n = 0..=horizon` and every seed.
pub fn simulate(stream: &GeneratorStream, side: Side, seeds: &[DiscPoint], horizon: usize) -> Result<Vec<OrbitRow>> {
    let origin = Complex64::new(0.0, 0.0);
    let row = |n: usize, s: Complex64, v: Complex64, step: f64| OrbitRow {
        n,
        seed_re: s.re,
        seed_im: s.im,
        value_re: v.re,
        value_im: v.im,
        omega_to_origin: omega(origin, v),
        step_omega: step,
    };
    let mut rows: Vec<OrbitRow> = seeds.iter().map(|s| row(0, s.value(), s.value(), 0.0)).collect();
    match side {
        Side::Left => {
            let mut c = LeftOrbitCursor::new(stream, seeds, true);
            for n in 1..=horizon {
                c.advance()?;
                for (i, s) in seeds.iter().enumerate() {
                    rows.push(row(n, s.value(), c.values()[i], c.step_omega(i)));
                }
            }
        }
        Side::Right => {
            let mut r = RightOrbitState::new(stream, seeds);
            for n in 1..=horizon {
                r.advance()?;
                for (i, s) in seeds.iter().enumerate() {
                    rows.push(row(n, s.value(), r.values()[i], r.steps()[i]));
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::c64;

    fn dp(re: f64, im: f64) -> DiscPoint {
        DiscPoint::new(c64(re, im)).unwrap()
    }

    fn basel() -> GeneratorStream {
        GeneratorStream::rule(StreamRule::ScaleProduct { power: 2.0, offset: 1.0 }).unwrap()
    }

    #[test]
    fn generator_zero_is_identity() {
        let s = GeneratorStream::list(vec![MapExpr::monomial(2).unwrap()]);
        assert_eq!(*s.generator_at(0).unwrap(), MapExpr::identity());
        assert!(matches!(s.generator_at(2), Err(Error::StreamExhausted(2))));
        let c = GeneratorStream::cycle(vec![MapExpr::monomial(2).unwrap(), MapExpr::monomial(3).unwrap()]).unwrap();
        assert_eq!(*c.generator_at(3).unwrap(), MapExpr::monomial(2).unwrap());
        assert_eq!(*c.generator_at(4).unwrap(), MapExpr::monomial(3).unwrap());
    }

    #[test]
    fn left_examples() {
        let s = GeneratorStream::constant(MapExpr::scale_real(0.5).unwrap());
        let mut c = LeftOrbitCursor::new(&s, &[dp(0.8, 0.0)], false);
        c.advance().unwrap();
        assert!((c.values()[0] - c64(0.4, 0.0)).norm() < 1e-16);
        c.advance().unwrap();
        assert!((c.values()[0] - c64(0.2, 0.0)).norm() < 1e-16);

        let s = basel();
        let z = c64(0.3, -0.6);
        let mut c = LeftOrbitCursor::new(&s, &[DiscPoint::new(z).unwrap()], false);
        c.advance_to(1000).unwrap();
        // prod_{n<=N} (1 - 1/(n+1)^2) = (N+2)/(2(N+1))
        let expect = z * (1002.0 / 2002.0);
        assert!((c.values()[0] - expect).norm() < 1e-13);

        let s = GeneratorStream::constant(MapExpr::monomial(2).unwrap());
        let mut c = LeftOrbitCursor::new(&s, &[dp(0.5, 0.0)], false);
        c.advance_to(3).unwrap();
        assert_eq!(c.values()[0], c64(0.5f64.powi(8), 0.0));
    }

    #[test]
    fn right_examples() {
        let s = GeneratorStream::list(vec![MapExpr::monomial(2).unwrap(), MapExpr::scale_real(0.5).unwrap()]);
        let mut r = RightOrbitState::new(&s, &[dp(0.8, 0.0)]);
        let mut l = LeftOrbitCursor::new(&s, &[dp(0.8, 0.0)], false);
        r.advance().unwrap();
        r.advance().unwrap();
        l.advance_to(2).unwrap();
        assert!((r.values()[0] - c64(0.16, 0.0)).norm() < 1e-15);
        assert!((l.values()[0] - c64(0.32, 0.0)).norm() < 1e-15);

        let s = GeneratorStream::constant(MapExpr::monomial(2).unwrap());
        let mut r = RightOrbitState::new(&s, &[dp(0.7, 0.1)]);
        let mut l = LeftOrbitCursor::new(&s, &[dp(0.7, 0.1)], false);
        for _ in 0..5 {
            r.advance().unwrap();
            l.advance().unwrap();
            assert_eq!(r.values()[0], l.values()[0]);
        }

        let s = basel();
        let mut r = RightOrbitState::new(&s, &[dp(0.5, 0.5)]);
        for _ in 0..50 {
            r.advance().unwrap();
        }
        let mut l = LeftOrbitCursor::new(&s, &[dp(0.5, 0.5)], false);
        l.advance_to(50).unwrap();
        assert!((r.values()[0] - l.values()[0]).norm() < 1e-15);
    }

    #[test]
    fn depth_cap_aborts() {
        let s = basel();
        let mut r = RightOrbitState::new(&s, &[dp(0.1, 0.0)]).with_depth_cap(3);
        r.extend_to(3).unwrap();
        assert!(matches!(r.advance(), Err(Error::DepthCap(3))));
    }

    #[test]
    fn backward_orbit_examples() {
        let s = GeneratorStream::constant(MapExpr::monomial(2).unwrap());
        let pts: Vec<Complex64> = (0..=20).map(|n| c64(0.5f64.powf(0.5f64.powi(n)), 0.0)).collect();
        let orbit = BackwardOrbit::new(pts).unwrap();
        let check = verify_backward_orbit(&s, &orbit).unwrap();
        assert!(check.valid);
        assert!(check.step_residual < 1e-12);

        // w_n = 0.1 * 2^n leaves the disc at n = 4
        let pts: Vec<Complex64> = (0..6).map(|n| c64(0.1 * 2f64.powi(n), 0.0)).collect();
        assert!(BackwardOrbit::new(pts).is_err());

        let id = GeneratorStream::constant(MapExpr::identity());
        let orbit = BackwardOrbit::new(vec![c64(0.3, 0.2); 10]).unwrap();
        let check = verify_backward_orbit(&id, &orbit).unwrap();
        assert!(check.valid && check.step_residual == 0.0 && check.composed_residual == 0.0);

        let wrong = BackwardOrbit::new(vec![c64(0.3, 0.2), c64(0.1, 0.0)]).unwrap();
        assert!(!verify_backward_orbit(&s, &wrong).unwrap().valid);
    }

    #[test]
    fn boundedness_examples() {
        let s = GeneratorStream::constant(MapExpr::scale_real(0.5).unwrap());
        match orbit_bounded(&s, Side::Left, dp(0.6, 0.2), 100, 5.0).unwrap() {
            Boundedness::BoundedWithin { argmax, .. } => assert_eq!(argmax, 0),
            other => panic!("{other:?}"),
        }
        let rot = GeneratorStream::constant(MapExpr::scale(c64(0.0, 1.0)).unwrap());
        match orbit_bounded(&rot, Side::Right, DiscPoint::origin(), 50, 1.0).unwrap() {
            Boundedness::BoundedWithin { max_omega, .. } => assert_eq!(max_omega, 0.0),
            other => panic!("{other:?}"),
        }
        let hyp = MapExpr::mobius(MoebiusMap::disc_auto(dp(0.5, 0.0), 0.0)).unwrap();
        let s = GeneratorStream::constant(hyp);
        match orbit_bounded(&s, Side::Left, DiscPoint::origin(), 100, 5.0).unwrap() {
            // omega(0, L_n 0) = n * artanh(0.5); exceeds 5 from n = 10 on
            Boundedness::Escaped { first_n, .. } => assert_eq!(first_n, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hysteresis_ignores_isolated_excursions() {
        let out = MapExpr::mobius(MoebiusMap::disc_auto(dp(0.9, 0.0), 0.0)).unwrap();
        let back = MapExpr::mobius(MoebiusMap::disc_auto(dp(-0.9, 0.0), 0.0)).unwrap();
        let s = GeneratorStream::cycle(vec![out, back]).unwrap();
        let b = orbit_bounded(&s, Side::Left, DiscPoint::origin(), 100, 1.0).unwrap();
        assert!(matches!(b, Boundedness::BoundedWithin { hits: 50, .. }));
    }

    #[test]
    fn compact_divergence_detector() {
        let hyp = MapExpr::mobius(MoebiusMap::disc_auto(dp(0.5, 0.0), 0.0)).unwrap();
        let s = GeneratorStream::constant(hyp);
        let ball = HyperbolicBall::new(DiscPoint::origin(), 1.0).unwrap();
        let r = compact_divergence(&s, Side::Left, &ball, 20).unwrap();
        assert!(r.disjoint_from.is_some());
        assert!(r.disjoint_from.unwrap() <= 5);
        let id = GeneratorStream::constant(MapExpr::identity());
        let r = compact_divergence(&id, Side::Left, &ball, 20).unwrap();
        assert_eq!(r.hits.len(), 20);
        assert_eq!(r.disjoint_from, None);
    }

    #[test]
    fn stream_json() {
        let s = GeneratorStream::from_json(r#"{"type":"rule","name":"scale_product","params":{"power":2,"offset":1}}"#)
            .unwrap();
        assert_eq!(s, basel());
        let back = GeneratorStream::from_value(s.to_value()).unwrap();
        assert_eq!(back, s);
        let c = GeneratorStream::from_json(r#"{"type":"cycle","generators":[{"kind":"monomial","power":2}]}"#).unwrap();
        assert_eq!(c, GeneratorStream::constant(MapExpr::monomial(2).unwrap()));
        assert!(matches!(
            GeneratorStream::from_json(r#"{"type":"rule","name":"nope"}"#),
            Err(Error::UnknownRule(_))
        ));
        assert!(matches!(GeneratorStream::from_json("{"), Err(Error::InvalidArgument(_))));
        assert!(GeneratorStream::from_json(r#"{"type":"cycle","generators":[]}"#).is_err());
        assert!(GeneratorStream::from_json(r#"{"type":"rule","name":"scale_product","params":{"offset":-1}}"#).is_err());
    }

    #[test]
    fn nonconstant_check() {
        let s = GeneratorStream::list(vec![MapExpr::identity(), MapExpr::constant(dp(0.1, 0.0))]);
        assert!(matches!(s.check_nonconstant(2), Err(Error::ConstantGenerator(2))));
        assert!(basel().check_nonconstant(100).is_ok());
    }

    #[test]
    fn simulate_rows() {
        let s = basel();
        let rows = simulate(&s, Side::Left, &[dp(0.5, 0.0), dp(0.0, 0.3)], 4).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].step_omega, 0.0);
        assert_eq!(rows[9].n, 4);
    }
}
