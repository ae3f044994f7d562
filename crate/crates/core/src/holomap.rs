//! Holomorphic self-maps of the disc as expression trees.
//!
//! Every primitive maps the disc into itself and composition closes, so a
//! [`MapExpr`] is a self-map by construction. Derivatives are analytic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{omega, one_minus_abs2, DiscPoint};
use crate::moebius::{AutKind, DomainTag, MoebiusMap};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Structural residual below which a Möbius expression counts as an automorphism.
const AUTO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Mobius(MoebiusMap),
    Monomial(u32),
    Scale(Complex64),
    Blaschke { zeros: Vec<Complex64>, phase: f64 },
    Constant(Complex64),
    /// `parts[0]` is applied last.
    Compose(Vec<MapExpr>),
    /// `w -> w + t` on the half-plane; `disc` is its Cayley conjugate.
    HalfPlaneAffine { t: Complex64, disc: MoebiusMap },
}

/// A holomorphic self-map of the unit disc.
#[derive(Debug, Clone, PartialEq)]
pub struct MapExpr(Node);

impl MapExpr {
    pub fn identity() -> Self {
        MapExpr(Node::Monomial(1))
    }

    /// A disc automorphism; half-plane automorphisms are transported by the Cayley transform.
    pub fn mobius(m: MoebiusMap) -> Result<Self> {
        let m = match m.tag() {
            DomainTag::Disc => m,
            DomainTag::HalfPlane => m.to_disc()?,
            DomainTag::Generic => {
                let res = m.disc_residual();
                if res > crate::moebius::DISC_STRUCTURE_TOL {
                    return Err(Error::NotDiscAutomorphism(res));
                }
                let [a, b, c, d] = m.matrix();
                MoebiusMap::from_matrix(a, b, c, d, DomainTag::Disc)?
            }
        };
        Ok(MapExpr(Node::Mobius(m)))
    }

    pub fn monomial(power: u32) -> Result<Self> {
        if power == 0 {
            return Err(Error::InvalidArgument("monomial power must be >= 1".into()));
        }
        Ok(MapExpr(Node::Monomial(power)))
    }

    /// `z -> a z` with `|a| <= 1`.
    pub fn scale(a: Complex64) -> Result<Self> {
        if !(a.norm() <= 1.0) {
            return Err(Error::InvalidArgument(format!("scale factor {a} must satisfy |a| <= 1")));
        }
        Ok(MapExpr(Node::Scale(a)))
    }

    pub fn scale_real(a: f64) -> Result<Self> {
        Self::scale(Complex64::new(a, 0.0))
    }

    /// `e^{i phase} prod (z - a_j)/(1 - conj(a_j) z)`; repeated zeros encode multiplicity.
    pub fn blaschke(zeros: Vec<DiscPoint>, phase: f64) -> Result<Self> {
        if zeros.is_empty() {
            return Err(Error::InvalidArgument("Blaschke product needs at least one zero".into()));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidArgument("Blaschke phase must be finite".into()));
        }
        Ok(MapExpr(Node::Blaschke {
            zeros: zeros.into_iter().map(DiscPoint::value).collect(),
            phase,
        }))
    }

    pub fn constant(c: DiscPoint) -> Self {
        MapExpr(Node::Constant(c.value()))
    }

    /// `parts[0] ∘ parts[1] ∘ ...`; nested compositions are flattened.
    pub fn compose(parts: Vec<MapExpr>) -> Self {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match p.0 {
                Node::Compose(inner) => flat.extend(inner),
                _ => flat.push(p),
            }
        }
        match flat.len() {
            0 => MapExpr::identity(),
            1 => flat.pop().unwrap(),
            _ => MapExpr(Node::Compose(flat)),
        }
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &MapExpr) -> MapExpr {
        MapExpr::compose(vec![self.clone(), inner.clone()])
    }

    /// The half-plane translation `w -> w + t` (`Im t >= 0`) seen in the disc.
    pub fn hp_affine(t: Complex64) -> Result<Self> {
        if !(t.im >= 0.0) || !t.re.is_finite() || !t.im.is_finite() {
            return Err(Error::InvalidArgument(format!("half-plane translation {t} needs Im t >= 0")));
        }
        let two_i = Complex64::new(0.0, 2.0);
        let disc = MoebiusMap::infer(two_i - t, t, -t, two_i + t)?;
        Ok(MapExpr(Node::HalfPlaneAffine { t, disc }))
    }

    /// Parts of a composition, outermost first (a single-element slice otherwise).
    pub fn parts(&self) -> &[MapExpr] {
        match &self.0 {
            Node::Compose(p) => p,
            _ => std::slice::from_ref(self),
        }
    }

    pub fn eval_raw(&self, z: Complex64) -> Complex64 {
        match &self.0 {
            Node::Mobius(m) => m.apply_unchecked(z),
            Node::Monomial(k) => z.powu(*k),
            Node::Scale(a) => a * z,
            Node::Blaschke { zeros, phase } => {
                let mut acc = Complex64::from_polar(1.0, *phase);
                for a in zeros {
                    acc *= (z - a) / (ONE - a.conj() * z);
                }
                acc
            }
            Node::Constant(c) => *c,
            Node::Compose(parts) => parts.iter().rev().fold(z, |v, p| p.eval_raw(v)),
            Node::HalfPlaneAffine { disc, .. } => disc.apply_unchecked(z),
        }
    }

    /// Value and complex derivative at `z`.
    pub fn eval_with_deriv(&self, z: Complex64) -> (Complex64, Complex64) {
        match &self.0 {
            Node::Mobius(m) => (m.apply_unchecked(z), m.deriv_unchecked(z)),
            Node::Monomial(k) => {
                let k = *k;
                if k == 1 {
                    (z, ONE)
                } else {
                    let p = z.powu(k - 1);
                    (p * z, p * k as f64)
                }
            }
            Node::Scale(a) => (a * z, *a),
            Node::Blaschke { zeros, phase } => blaschke_with_deriv(zeros, *phase, z),
            Node::Constant(c) => (*c, ZERO),
            Node::Compose(parts) => parts.iter().rev().fold((z, ONE), |(v, d), p| {
                let (v1, d1) = p.eval_with_deriv(v);
                (v1, d * d1)
            }),
            Node::HalfPlaneAffine { disc, .. } => (disc.apply_unchecked(z), disc.deriv_unchecked(z)),
        }
    }

    /// Image of `z`; a result grazing the circle is clamped and the flag is set.
    pub fn eval(&self, z: DiscPoint) -> (DiscPoint, bool) {
        DiscPoint::clamped(self.eval_raw(z.value()))
    }

    pub fn deriv(&self, z: DiscPoint) -> Complex64 {
        self.eval_with_deriv(z.value()).1
    }

    /// Hyperbolic distortion `|f'(z)| (1-|z|^2)/(1-|f(z)|^2)`, clamped to `[0, 1]`.
    pub fn distortion(&self, z: DiscPoint) -> Result<f64> {
        self.distortion_raw(z.value())
    }

    pub fn distortion_raw(&self, z: Complex64) -> Result<f64> {
        let (v, d) = self.eval_with_deriv(z);
        distortion_from(z, v, d)
    }

    /// Distance quotient `omega(f(z+h), f(z)) / omega(z+h, z)`.
    pub fn distortion_via_quotient(&self, z: DiscPoint, h: f64) -> Result<f64> {
        if !(h > 0.0 && h < 1e-3) {
            return Err(Error::InvalidArgument(format!("quotient step h = {h} must lie in (0, 1e-3)")));
        }
        let zh = DiscPoint::new(z.value() + h)?;
        let num = omega(self.eval_raw(zh.value()), self.eval_raw(z.value()));
        Ok(num / omega(zh.value(), z.value()))
    }

    /// The Möbius matrix of a degree-one expression (automorphism or not).
    pub fn as_moebius(&self) -> Option<MoebiusMap> {
        match &self.0 {
            Node::Mobius(m) => Some(*m),
            Node::Monomial(1) => Some(MoebiusMap::identity(DomainTag::Disc)),
            Node::Monomial(_) | Node::Constant(_) => None,
            Node::Scale(a) => {
                if a.norm() == 0.0 {
                    None
                } else {
                    MoebiusMap::infer(*a, ZERO, ZERO, ONE).ok()
                }
            }
            Node::Blaschke { zeros, phase } if zeros.len() == 1 => {
                let e = Complex64::from_polar(1.0, *phase);
                let a = zeros[0];
                MoebiusMap::infer(e, -e * a, -a.conj(), ONE).ok()
            }
            Node::Blaschke { .. } => None,
            Node::HalfPlaneAffine { disc, .. } => Some(*disc),
            Node::Compose(parts) => {
                let mut acc = MoebiusMap::identity(DomainTag::Generic);
                for p in parts {
                    let m = p.as_moebius()?;
                    let [a, b, c, d] = m.matrix();
                    let generic = MoebiusMap::from_matrix(a, b, c, d, DomainTag::Generic).ok()?;
                    acc = acc.compose(&generic).ok()?;
                }
                let [a, b, c, d] = acc.matrix();
                MoebiusMap::infer(a, b, c, d).ok()
            }
        }
    }

    /// The disc automorphism represented by this expression, if it is one.
    pub fn as_automorphism(&self) -> Option<MoebiusMap> {
        let m = self.as_moebius()?;
        if m.disc_residual() <= AUTO_TOL {
            let [a, b, c, d] = m.matrix();
            MoebiusMap::from_matrix(a, b, c, d, DomainTag::Disc).ok()
        } else {
            None
        }
    }

    pub fn is_automorphism(&self) -> bool {
        self.as_automorphism().is_some()
    }

    pub fn is_constant(&self) -> bool {
        match &self.0 {
            Node::Constant(_) => true,
            Node::Scale(a) => a.norm() == 0.0,
            Node::Compose(parts) => parts.iter().any(MapExpr::is_constant),
            _ => false,
        }
    }

    /// Denjoy-Wolff classification; see [`DWReport`].
    pub fn denjoy_wolff(&self, budget: usize, tol: f64) -> Result<DWReport> {
        denjoy_wolff(self, budget, tol)
    }
}

fn blaschke_with_deriv(zeros: &[Complex64], phase: f64, z: Complex64) -> (Complex64, Complex64) {
    let e = Complex64::from_polar(1.0, phase);
    let n = zeros.len();
    let factors: Vec<Complex64> = zeros.iter().map(|a| (z - a) / (ONE - a.conj() * z)).collect();
    let mut prefix = vec![ONE; n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] * factors[j];
    }
    let mut deriv = ZERO;
    let mut suffix = ONE;
    for j in (0..n).rev() {
        let a = zeros[j];
        let den = ONE - a.conj() * z;
        let dj = (1.0 - a.norm_sqr()) / (den * den);
        deriv += prefix[j] * dj * suffix;
        suffix *= factors[j];
    }
    (e * prefix[n], e * deriv)
}

/// Distortion from a point, its image and the derivative there.
pub(crate) fn distortion_from(z: Complex64, fz: Complex64, dfz: Complex64) -> Result<f64> {
    let d = dfz.norm();
    if d == 0.0 {
        return Ok(0.0);
    }
    let den = one_minus_abs2(fz);
    let val = d * one_minus_abs2(z) / den;
    if val.is_nan() || !(den > 0.0) {
        return Err(Error::DistortionExceedsOne(f64::INFINITY));
    }
    if val > 1.0 + 1e-9 {
        return Err(Error::DistortionExceedsOne(val));
    }
    Ok(val.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DWKind {
    EllipticAuto,
    EllipticStrict,
    Parabolic,
    Hyperbolic,
    Identity,
    Constant,
}

/// Outcome of the Denjoy-Wolff classification.
///
/// `multiplier` is `|f'(p)|` at an interior fixed point and the extrapolated
/// angular derivative at a boundary point. The parabolic/hyperbolic split is
/// a numerical decision at the tolerance passed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DWReport {
    pub kind: DWKind,
    pub point: Complex64,
    pub multiplier: f64,
}

const DW_SEEDS: [Complex64; 5] = [
    Complex64::new(0.0, 0.0),
    Complex64::new(0.5, 0.0),
    Complex64::new(-0.5, 0.0),
    Complex64::new(0.0, 0.5),
    Complex64::new(0.0, -0.5),
];

/// Radial quotient `(1 - |f(r tau)|)/(1 - r)` at r = 0.9 ... 0.9999, Richardson-extrapolated.
pub fn angular_derivative(f: &MapExpr, tau: Complex64) -> f64 {
    let q = |h: f64| {
        let r = 1.0 - h;
        (1.0 - f.eval_raw(tau * r).norm()) / h
    };
    let qs: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4].iter().map(|&h| q(h)).collect();
    // error is O(h); one Richardson step with ratio 10
    (10.0 * qs[3] - qs[2]) / 9.0
}

fn newton_fixed_point(f: &MapExpr, mut z: Complex64, iters: usize) -> Option<Complex64> {
    for _ in 0..iters {
        let (v, d) = f.eval_with_deriv(z);
        let g = v - z;
        if g.norm() < 1e-15 {
            return Some(z);
        }
        let dg = d - ONE;
        if dg.norm() < 1e-300 {
            return None;
        }
        let step = g / dg;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1.5 {
            return None;
        }
        if step.norm() < 1e-15 {
            return Some(z);
        }
    }
    Some(z)
}

fn denjoy_wolff(f: &MapExpr, budget: usize, tol: f64) -> Result<DWReport> {
    if f.is_constant() {
        return Ok(DWReport { kind: DWKind::Constant, point: f.eval_raw(ZERO), multiplier: 0.0 });
    }
    if let Some(g) = f.as_automorphism() {
        let class = g.classify_auto()?;
        return match class.kind {
            AutKind::Identity => Ok(DWReport { kind: DWKind::Identity, point: ZERO, multiplier: 1.0 }),
            AutKind::Elliptic => {
                let p = class.fixed_points[0];
                Ok(DWReport { kind: DWKind::EllipticAuto, point: p, multiplier: g.deriv_unchecked(p).norm() })
            }
            AutKind::Parabolic | AutKind::Hyperbolic => {
                let tau = class.fixed_points[0];
                boundary_report(f, tau, tol, budget)
            }
        };
    }

    let mut pts = DW_SEEDS.to_vec();
    let mut steps = vec![f64::INFINITY; pts.len()];
    for it in 1..=budget {
        for (z, s) in pts.iter_mut().zip(steps.iter_mut()) {
            let next = f.eval_raw(*z);
            *s = (next - *z).norm();
            *z = next;
        }
        let max_step = steps.iter().cloned().fold(0.0, f64::max);
        let max_mod = pts.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min_mod = pts.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);

        if max_step < 1e-12 && max_mod < 1.0 - 1e-6 {
            if let Some(p) = newton_fixed_point(f, pts[0], 60) {
                if p.norm() < 1.0 && pts.iter().all(|z| (z - p).norm() < 1e-6) {
                    let (_, d) = f.eval_with_deriv(p);
                    return Ok(DWReport { kind: DWKind::EllipticStrict, point: p, multiplier: d.norm() });
                }
            }
        }
        if min_mod > 1.0 - 1e-4 {
            let guess = pts[0] / pts[0].norm();
            let agree = pts.iter().all(|z| (z / z.norm() - guess).norm() < 0.05);
            if agree {
                if let Some(root) = newton_fixed_point(f, pts[0], 200) {
                    if (root.norm() - 1.0).abs() < 1e-6 && (root - guess).norm() < 0.05 {
                        return boundary_report(f, root / root.norm(), tol, it);
                    }
                }
            }
        }
    }
    Err(Error::Inconclusive {
        iterations: budget,
        reason: "orbits neither settled at an interior point nor reached the boundary".into(),
        last_points: pts,
    })
}

fn boundary_report(f: &MapExpr, tau: Complex64, tol: f64, iterations: usize) -> Result<DWReport> {
    let m = angular_derivative(f, tau);
    if (m - 1.0).abs() <= tol {
        Ok(DWReport { kind: DWKind::Parabolic, point: tau, multiplier: m })
    } else if m < 1.0 && m > 0.0 {
        Ok(DWReport { kind: DWKind::Hyperbolic, point: tau, multiplier: m })
    } else {
        Err(Error::Inconclusive {
            iterations,
            reason: format!("angular derivative estimate {m} at {tau} exceeds 1"),
            last_points: vec![tau],
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ExprJson {
    Monomial {
        power: u32,
    },
    Scale {
        factor: Complex64,
    },
    Blaschke {
        zeros: Vec<Complex64>,
        #[serde(default)]
        phase: f64,
    },
    Mobius {
        matrix: [[f64; 2]; 4],
    },
    Constant {
        value: Complex64,
    },
    Compose {
        parts: Vec<ExprJson>,
    },
    HpAffine {
        translation: Complex64,
    },
}

impl TryFrom<ExprJson> for MapExpr {
    type Error = Error;
    fn try_from(j: ExprJson) -> Result<Self> {
        match j {
            ExprJson::Monomial { power } => MapExpr::monomial(power),
            ExprJson::Scale { factor } => MapExpr::scale(factor),
            ExprJson::Blaschke { zeros, phase } => {
                let zeros = zeros.into_iter().map(DiscPoint::new).collect::<Result<Vec<_>>>()?;
                MapExpr::blaschke(zeros, phase)
            }
            ExprJson::Mobius { matrix } => {
                let [a, b, c, d] = matrix.map(|[re, im]| Complex64::new(re, im));
                MapExpr::mobius(MoebiusMap::infer(a, b, c, d)?)
            }
            ExprJson::Constant { value } => Ok(MapExpr::constant(DiscPoint::new(value)?)),
            ExprJson::Compose { parts } => {
                let parts = parts.into_iter().map(MapExpr::try_from).collect::<Result<Vec<_>>>()?;
                Ok(MapExpr::compose(parts))
            }
            ExprJson::HpAffine { translation } => MapExpr::hp_affine(translation),
        }
    }
}

impl From<&MapExpr> for ExprJson {
    fn from(e: &MapExpr) -> Self {
        match &e.0 {
            Node::Mobius(m) => ExprJson::Mobius { matrix: m.matrix().map(|x| [x.re, x.im]) },
            Node::Monomial(k) => ExprJson::Monomial { power: *k },
            Node::Scale(a) => ExprJson::Scale { factor: *a },
            Node::Blaschke { zeros, phase } => ExprJson::Blaschke { zeros: zeros.clone(), phase: *phase },
            Node::Constant(c) => ExprJson::Constant { value: *c },
            Node::Compose(parts) => ExprJson::Compose { parts: parts.iter().map(ExprJson::from).collect() },
            Node::HalfPlaneAffine { t, .. } => ExprJson::HpAffine { translation: *t },
        }
    }
}

impl Serialize for MapExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExprJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ExprJson::deserialize(d)?;
        MapExpr::try_from(j).map_err(serde::de::Error::custom)
    }
}
