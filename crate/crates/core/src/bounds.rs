//! Margin checks for the distortion inequalities and the automorphism
//! approximating a map near a point.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{omega, DiscPoint};
use crate::holomap::MapExpr;
use crate::moebius::MoebiusMap;
use crate::straighten::ProbeGrid;

/// Margins within this band of zero are reported as sharp.
pub const SHARP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    /// `|z - w| <= 2 (1 - |w|) sinh(2 omega(z, w))`.
    Lemma61,
    /// `omega(f^#(z), f^#(w)) <= 2 omega(z, w)` for non-automorphisms.
    Lipschitz2,
    /// `1 - f^#(z) <= c e^{4 omega(z, w)} (1 - f^#(w))`.
    Transfer,
    /// `omega(f(z), gamma(z)) <= c e^{4 omega(z, w)} (1 - f^#(w))`.
    TheoremF,
}

impl InequalityKind {
    pub const ALL: [InequalityKind; 4] =
        [InequalityKind::Lemma61, InequalityKind::Lipschitz2, InequalityKind::Transfer, InequalityKind::TheoremF];

    pub fn name(self) -> &'static str {
        match self {
            InequalityKind::Lemma61 => "lemma_6_1",
            InequalityKind::Lipschitz2 => "lipschitz_2",
            InequalityKind::Transfer => "transfer",
            InequalityKind::TheoremF => "theorem_F",
        }
    }
}

impl fmt::Display for InequalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InequalityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "lemma61" => Ok(InequalityKind::Lemma61),
            "lipschitz2" => Ok(InequalityKind::Lipschitz2),
            "transfer" => Ok(InequalityKind::Transfer),
            "theoremf" => Ok(InequalityKind::TheoremF),
            _ => Err(Error::InvalidArgument(format!("unknown inequality kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityMargin {
    pub kind: InequalityKind,
    pub z: Complex64,
    pub w: Complex64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub sharp: bool,
    /// Coefficient in front of the exponential (transfer and theorem_F).
    pub coefficient: Option<f64>,
    /// Smallest coefficient for which this instance still holds.
    pub required_coefficient: Option<f64>,
    pub map: Option<MapExpr>,
    pub gamma: Option<MoebiusMap>,
}

impl InequalityMargin {
    fn new(kind: InequalityKind, z: Complex64, w: Complex64, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        InequalityMargin {
            kind,
            z,
            w,
            lhs,
            rhs,
            margin,
            sharp: margin.abs() <= SHARP_TOL,
            coefficient: None,
            required_coefficient: None,
            map: None,
            gamma: None,
        }
    }

    pub fn holds(&self) -> bool {
        self.margin >= -SHARP_TOL
    }
}

/// The automorphism `gamma` with `gamma(w) = f(w)` and `arg gamma'(w) = arg f'(w)`.
///
/// Automorphisms are returned unchanged. When `f'(w) = 0` the rotation factor is dropped.
pub fn theorem_f_gamma(f: &MapExpr, w: DiscPoint) -> Result<MoebiusMap> {
    if f.is_constant() {
        return Err(Error::InvalidArgument("theorem_f_gamma needs a nonconstant map".into()));
    }
    if let Some(m) = f.as_automorphism() {
        return Ok(m);
    }
    let (fw, dfw) = f.eval_with_deriv(w.value());
    let fw = DiscPoint::new(fw)?;
    let phi = MoebiusMap::disc_auto(w, 0.0);
    let psi = MoebiusMap::disc_auto(fw, 0.0);
    let inner = if dfw.norm() == 0.0 { phi.inverse() } else { MoebiusMap::rotation(dfw.arg()).compose(&phi.inverse())? };
    psi.compose(&inner)
}

fn exp_factor(z: Complex64, w: Complex64) -> f64 {
    (4.0 * omega(z, w)).exp()
}

/// Evaluates one inequality at `(z, w)`.
///
/// `coefficient` replaces the constant 2 in the transfer and theorem_F bounds.
pub fn margin(
    kind: InequalityKind,
    f: Option<&MapExpr>,
    z: DiscPoint,
    w: DiscPoint,
    coefficient: f64,
) -> Result<InequalityMargin> {
    if !(coefficient > 0.0 && coefficient.is_finite()) {
        return Err(Error::InvalidArgument("coefficient must be positive".into()));
    }
    let (zv, wv) = (z.value(), w.value());
    let need_map = || f.ok_or_else(|| Error::InvalidArgument(format!("{kind} needs a map")));
    let mut out = match kind {
        InequalityKind::Lemma61 => {
            let lhs = (zv - wv).norm();
            let rhs = 2.0 * (1.0 - wv.norm()) * (2.0 * omega(zv, wv)).sinh();
            InequalityMargin::new(kind, zv, wv, lhs, rhs)
        }
        InequalityKind::Lipschitz2 => {
            let f = need_map()?;
            if f.is_automorphism() {
                return Err(Error::InvalidArgument("lipschitz_2 does not apply to automorphisms".into()));
            }
            let (dz, dw) = (f.distortion(z)?, f.distortion(w)?);
            let lhs = omega(Complex64::new(dz, 0.0), Complex64::new(dw, 0.0));
            let mut m = InequalityMargin::new(kind, zv, wv, lhs, 2.0 * omega(zv, wv));
            m.map = Some(f.clone());
            m
        }
        InequalityKind::Transfer => {
            let f = need_map()?;
            let lhs = 1.0 - f.distortion(z)?;
            let base = exp_factor(zv, wv) * (1.0 - f.distortion(w)?);
            let mut m = InequalityMargin::new(kind, zv, wv, lhs, coefficient * base);
            m.coefficient = Some(coefficient);
            m.required_coefficient = (base > 0.0).then(|| lhs / base);
            m.map = Some(f.clone());
            m
        }
        InequalityKind::TheoremF => {
            let f = need_map()?;
            let gamma = theorem_f_gamma(f, w)?;
            let lhs = omega(f.eval_raw(zv), gamma.apply_unchecked(zv));
            let base = exp_factor(zv, wv) * (1.0 - f.distortion(w)?);
            let mut m = InequalityMargin::new(kind, zv, wv, lhs, coefficient * base);
            m.coefficient = Some(coefficient);
            m.required_coefficient = (base > 0.0).then(|| lhs / base);
            m.map = Some(f.clone());
            m.gamma = Some(gamma);
            m
        }
    };
    if kind == InequalityKind::Lemma61 || kind == InequalityKind::Lipschitz2 {
        out.coefficient = None;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryGRow {
    pub n: usize,
    pub z: Complex64,
    /// `(1 - f^#(z_n)) / (1 - |z_n|)^2`.
    pub defect: f64,
    /// `max |gamma_n(z) - f(z)|` over the default probe grid.
    pub gamma_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryGReport {
    pub automorphism: bool,
    pub rows: Vec<CorollaryGRow>,
}

/// Normalized distortion defects along a sequence tending to the boundary.
pub fn corollary_g_probe(f: &MapExpr, seq: &[DiscPoint]) -> Result<CorollaryGReport> {
    if seq.windows(2).any(|p| !(p[1].value().norm() > p[0].value().norm())) {
        return Err(Error::InvalidArgument("sequence must be strictly increasing in modulus".into()));
    }
    let grid = ProbeGrid::default();
    let mut rows = Vec::with_capacity(seq.len());
    for (n, &z) in seq.iter().enumerate() {
        let r = z.value().norm();
        let defect = (1.0 - f.distortion(z)?) / ((1.0 - r) * (1.0 - r));
        let gamma = theorem_f_gamma(f, z)?;
        let gamma_distance = grid
            .points()
            .iter()
            .map(|&p| (gamma.apply_unchecked(p) - f.eval_raw(p)).norm())
            .fold(0.0, f64::max);
        rows.push(CorollaryGRow { n: n + 1, z: z.value(), defect, gamma_distance });
    }
    Ok(CorollaryGReport { automorphism: f.is_automorphism(), rows })
}

/// One fuzz draw: a map (unless the kind needs none) and two points.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzDraw {
    pub seed: u64,
    pub map: Option<MapExpr>,
    pub z: DiscPoint,
    pub w: DiscPoint,
}

fn disc_point<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Blaschke product with 1 to 4 zeros uniform in `|z| <= 0.8` and a uniform phase,
/// post-composed with a random `Scale` (factor modulus in `[0.2, 1)`) with probability 1/2.
pub fn random_map<R: Rng>(rng: &mut R) -> MapExpr {
    let k = rng.random_range(1..=4);
    let zeros = (0..k).map(|_| DiscPoint::new(disc_point(rng, 0.8)).expect("inside disc")).collect();
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let b = MapExpr::blaschke(zeros, phase).expect("nonempty zeros");
    if rng.random::<bool>() {
        let s = Complex64::from_polar(rng.random_range(0.2..1.0), rng.random_range(0.0..std::f64::consts::TAU));
        MapExpr::compose(vec![MapExpr::scale(s).expect("|s| < 1"), b])
    } else {
        b
    }
}

/// The draw for `seed`; points are uniform in `|z| <= 0.9`.
pub fn fuzz_draw(kind: InequalityKind, seed: u64) -> FuzzDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = match kind {
        InequalityKind::Lemma61 => None,
        InequalityKind::Lipschitz2 => loop {
            let f = random_map(&mut rng);
            if !f.is_automorphism() {
                break Some(f);
            }
        },
        _ => Some(random_map(&mut rng)),
    };
    let z = DiscPoint::new(disc_point(&mut rng, 0.9)).expect("inside disc");
    let w = DiscPoint::new(disc_point(&mut rng, 0.9)).expect("inside disc");
    FuzzDraw { seed, map, z, w }
}

/// A fuzz record: the draw seed and the evaluated margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzRecord {
    pub seed: u64,
    pub margin: InequalityMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub kind: InequalityKind,
    pub seed: u64,
    pub draws: usize,
    pub coefficient: f64,
    pub min_margin: f64,
    pub violations: usize,
    pub sharp: usize,
    /// Largest per-draw required coefficient (transfer and theorem_F).
    pub empirical_coefficient: Option<f64>,
}

/// Seed of draw `i` in a run with base seed `seed`.
pub fn draw_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

/// Runs `draws` seeded draws. Batches run on scoped threads and merge in draw order.
pub fn fuzz(kind: InequalityKind, draws: usize, seed: u64, coefficient: f64) -> Result<(Vec<FuzzRecord>, FuzzSummary)> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(16);
    let chunk = draws.div_ceil(threads.max(1)).max(1);
    let run = |range: std::ops::Range<usize>| -> Result<Vec<FuzzRecord>> {
        range
            .map(|i| {
                let d = fuzz_draw(kind, draw_seed(seed, i));
                let mut m = margin(kind, d.map.as_ref(), d.z, d.w, coefficient)?;
                m.map = None;
                Ok(FuzzRecord { seed: d.seed, margin: m })
            })
            .collect()
    };
    let batches: Vec<Result<Vec<FuzzRecord>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..draws)
            .step_by(chunk)
            .map(|start| {
                let range = start..(start + chunk).min(draws);
                s.spawn(move || run(range))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fuzz worker panicked")).collect()
    });
    let mut records = Vec::with_capacity(draws);
    for b in batches {
        records.extend(b?);
    }
    let min_margin = records.iter().map(|r| r.margin.margin).fold(f64::INFINITY, f64::min);
    let empirical = records.iter().filter_map(|r| r.margin.required_coefficient).fold(None, |acc: Option<f64>, c| {
        Some(acc.map_or(c, |a| a.max(c)))
    });
    let summary = FuzzSummary {
        kind,
        seed,
        draws,
        coefficient,
        min_margin,
        violations: records.iter().filter(|r| !r.margin.holds()).count(),
        sharp: records.iter().filter(|r| r.margin.sharp).count(),
        empirical_coefficient: empirical,
    };
    Ok((records, summary))
}

pub(crate) fn fmt_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Margins CSV: `kind, seed, z, w, lhs, rhs, margin`.
pub fn write_margins_csv<W: Write>(out: W, records: &[FuzzRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "seed", "z", "w", "lhs", "rhs", "margin"])?;
    for r in records {
        let m = &r.margin;
        w.write_record([
            m.kind.name().to_string(),
            r.seed.to_string(),
            fmt_complex(m.z),
            fmt_complex(m.w),
            m.lhs.to_string(),
            m.rhs.to_string(),
            m.margin.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
