//! Explicit badly behaved systems: a half-plane system that neither converges
//! nor diverges compactly, and a system of near-identity automorphisms whose
//! left compositions hit a prescribed list of targets.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cayley_raw, DiscPoint, HyperbolicBall};
use crate::holomap::MapExpr;
use crate::ifs::GeneratorStream;
use crate::moebius::{matrix_distance, AutClass, DomainTag, MoebiusMap};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default cap on the block length `k_n`.
pub const DEFAULT_K_CAP: usize = 10_000_000;

/// `phi_n(z) = (n z - 1) / (z + n)`, an elliptic automorphism of the half-plane fixing `i`.
pub fn phi(n: usize) -> MoebiusMap {
    let n = n as f64;
    MoebiusMap::half_plane(n, -1.0, 1.0, n).expect("determinant n^2 + 1 > 0")
}

/// `F(z) = z - 1`.
pub fn shift() -> MoebiusMap {
    MoebiusMap::half_plane(1.0, -1.0, 0.0, 1.0).expect("determinant 1")
}

/// `g_n = phi_n ∘ F ∘ phi_n^{-1}`, a parabolic map fixing `n`.
pub fn g(n: usize) -> MoebiusMap {
    let p = phi(n);
    p.compose(&shift()).and_then(|m| m.compose(&p.inverse())).expect("half-plane maps compose")
}

/// Label of one generator of the half-plane construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "map", content = "n", rename_all = "snake_case")]
pub enum Section8Label {
    /// `g_n`.
    G(usize),
    Identity,
    /// `F_n(z) = z - 1 + i/n`.
    F(usize),
}

impl Section8Label {
    /// Native half-plane evaluation.
    pub fn apply(self, z: Complex64) -> Complex64 {
        match self {
            Section8Label::G(n) => g(n).apply_unchecked(z),
            Section8Label::Identity => z,
            Section8Label::F(n) => z - 1.0 + I / n as f64,
        }
    }

    /// The same map acting on the disc.
    pub fn to_disc(self) -> MapExpr {
        match self {
            Section8Label::G(n) => MapExpr::mobius(g(n).to_disc().expect("half-plane automorphism")).expect("disc map"),
            Section8Label::Identity => MapExpr::identity(),
            Section8Label::F(n) => MapExpr::hp_affine(Complex64::new(-1.0, 1.0 / n as f64)).expect("Im t > 0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section8Certificate {
    pub n: usize,
    pub k: usize,
    pub m_even: usize,
    pub m_odd: usize,
    /// `L_{m_{2n}}(i)`.
    pub exit_point: Complex64,
    /// `|L_{m_{2n}}(i)|`, to exceed `n - 2^{-n}`.
    pub exit_modulus: f64,
    pub exit_bound: f64,
    /// `L_{m_{2n+1}}(i)`.
    pub return_point: Complex64,
    /// `|L_{m_{2n+1}}(i) - i|`, to stay below `2^{-n}`.
    pub return_residual: f64,
    pub return_bound: f64,
    /// `|F_n^n(w) - (w - n + i)|` at `w = L_{m_{2n}}(i)`.
    pub telescoping_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section8Build {
    pub n_max: usize,
    /// `m_0, m_1, ..., m_{2 n_max + 1}`.
    pub milestones: Vec<usize>,
    /// `f_0, f_1, ...` (index `j` is the `j`-th map applied).
    pub labels: Vec<Section8Label>,
    pub certificates: Vec<Section8Certificate>,
    /// `L_j(i)` in the half-plane for `j = 0..labels.len()`.
    pub orbit: Vec<Complex64>,
    /// `sup |g_n - F|` over a fixed half-plane grid, for `n = 1..=n_max`.
    pub g_to_f: Vec<f64>,
}

/// Least `k >= 1` for which the closed form `g_n^k(z) = phi_n(phi_n^{-1}(z) - k)` lands
/// within `bound` of `n`.
fn closed_form_k(n: usize, z: Complex64, bound: f64) -> f64 {
    // |phi_n(u) - n| = (n^2 + 1) / |u + n|
    let u = phi(n).inverse().apply_unchecked(z);
    let s = u + n as f64;
    let r = (n as f64 * n as f64 + 1.0) / bound;
    if s.im.abs() >= r {
        return 1.0;
    }
    let h = (r * r - s.im * s.im).sqrt();
    if s.re - h > 1.0 {
        1.0
    } else {
        (s.re + h).floor() + 1.0
    }
}

fn g_to_f_sup(n: usize) -> f64 {
    let grid = [I, Complex64::new(1.0, 1.0), Complex64::new(-1.0, 2.0), Complex64::new(0.5, 0.5), Complex64::new(0.0, 3.0)];
    let gn = g(n);
    let f = shift();
    grid.iter().map(|&z| (gn.apply_unchecked(z) - f.apply_unchecked(z)).norm()).fold(0.0, f64::max)
}

/// Builds the milestone construction up to `n_max`, certifying each milestone.
pub fn build_section8(n_max: usize, k_cap: usize) -> Result<Section8Build> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let mut labels = vec![Section8Label::G(0), Section8Label::Identity];
    let mut milestones = vec![0, 1];
    let mut orbit = vec![Section8Label::G(0).apply(I)];
    orbit.push(orbit[0]);
    let mut certificates = Vec::with_capacity(n_max + 1);

    let m1 = orbit[1];
    certificates.push(Section8Certificate {
        n: 0,
        k: 0,
        m_even: 0,
        m_odd: 1,
        exit_point: orbit[0],
        exit_modulus: orbit[0].norm(),
        exit_bound: -1.0,
        return_point: m1,
        return_residual: (m1 - I).norm(),
        return_bound: 1.0,
        telescoping_residual: 0.0,
        passed: orbit[0].norm() > -1.0 && (m1 - I).norm() < 1.0,
    });

    for n in 1..=n_max {
        let bound = 0.5f64.powi(n as i32);
        let start = *orbit.last().expect("nonempty orbit");
        let gn = g(n);
        let mut k = closed_form_k(n, start, bound);
        if !(k <= k_cap as f64) {
            return Err(Error::IterationCap {
                cap: k_cap,
                reason: format!("block length for n = {n} exceeds the cap ({} milestones certified)", n - 1),
            });
        }
        let mut z = start;
        let mut block = Vec::with_capacity(k as usize);
        for _ in 0..k as usize {
            z = gn.apply_unchecked(z);
            block.push(z);
        }
        while !((z - n as f64).norm() < bound) {
            if block.len() >= k_cap {
                return Err(Error::PrecisionExhausted {
                    n,
                    reason: format!("|g_n^k(z) - n| = {:e} did not fall below {bound:e}", (z - n as f64).norm()),
                });
            }
            z = gn.apply_unchecked(z);
            block.push(z);
            k += 1.0;
        }
        let k = block.len();
        labels.extend(std::iter::repeat_n(Section8Label::G(n), k));
        orbit.extend_from_slice(&block);
        let m_even = milestones[2 * n - 1] + k;
        milestones.push(m_even);

        let w = z;
        let fn_label = Section8Label::F(n);
        for _ in 0..n {
            z = fn_label.apply(z);
            orbit.push(z);
        }
        labels.extend(std::iter::repeat_n(fn_label, n));
        let m_odd = m_even + n;
        milestones.push(m_odd);

        let telescoping = (z - (w - n as f64 + I)).norm();
        let exit_modulus = w.norm();
        let return_residual = (z - I).norm();
        let exit_bound = n as f64 - bound;
        certificates.push(Section8Certificate {
            n,
            k,
            m_even,
            m_odd,
            exit_point: w,
            exit_modulus,
            exit_bound,
            return_point: z,
            return_residual,
            return_bound: bound,
            telescoping_residual: telescoping,
            passed: exit_modulus > exit_bound && return_residual < bound && telescoping < 1e-9 * (1.0 + w.norm()),
        });
    }
    debug_assert_eq!(orbit.len(), labels.len());
    Ok(Section8Build {
        n_max,
        milestones,
        labels,
        certificates,
        orbit,
        g_to_f: (1..=n_max).map(g_to_f_sup).collect(),
    })
}

/// Outcome of one structural condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: char,
    pub holds: bool,
}

impl Section8Build {
    /// The generators acting on the disc, in application order.
    pub fn disc_stream(&self) -> GeneratorStream {
        GeneratorStream::list(self.labels.iter().map(|l| l.to_disc()).collect())
    }

    /// The index bookkeeping conditions (a) to (d) and the milestone certificates (e).
    pub fn conditions(&self) -> Vec<ConditionCheck> {
        let m = &self.milestones;
        let a = m.first() == Some(&0) && m.get(1) == Some(&1);
        let b = self.labels.first() == Some(&Section8Label::G(0)) && self.labels.get(1) == Some(&Section8Label::Identity);
        let c = (1..=self.n_max).all(|n| m[2 * n + 1] == m[2 * n] + n);
        let d = (1..=self.n_max).all(|n| {
            let gs = (m[2 * n - 1] + 1..=m[2 * n]).all(|j| self.labels[j] == Section8Label::G(n));
            let fs = (m[2 * n] + 1..=m[2 * n + 1]).all(|j| self.labels[j] == Section8Label::F(n));
            gs && fs && m[2 * n] > m[2 * n - 1]
        }) && self.labels.len() == m[2 * self.n_max + 1] + 1;
        let e = self.certificates.iter().all(|c| c.passed);
        [('a', a), ('b', b), ('c', c), ('d', d), ('e', e)]
            .into_iter()
            .map(|(condition, holds)| ConditionCheck { condition, holds })
            .collect()
    }

    /// Classification of every `g_n` used, as disc automorphisms.
    pub fn g_classes(&self) -> Result<Vec<AutClass>> {
        (0..=self.n_max).map(|n| g(n).classify_auto()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCertificate {
    pub ball_center: Complex64,
    pub ball_radius: f64,
    /// Odd milestones whose orbit point lies in the ball.
    pub returns: Vec<usize>,
    /// Even milestones whose orbit point lies outside the ball.
    pub exits: Vec<usize>,
    /// Total number of orbit indices inside the ball.
    pub inside_count: usize,
    pub not_convergent: bool,
    pub not_compactly_divergent: bool,
}

/// Returns and exits of a half-plane orbit at the given milestones, measured in the disc.
pub fn certify_orbit(orbit: &[Complex64], milestones: &[usize], ball: &HyperbolicBall) -> DivergenceCertificate {
    let inside = |j: usize| ball.contains_raw(cayley_raw(orbit[j]));
    let returns: Vec<usize> = milestones.iter().skip(1).step_by(2).copied().filter(|&j| j < orbit.len() && inside(j)).collect();
    let exits: Vec<usize> = milestones.iter().step_by(2).copied().filter(|&j| j < orbit.len() && !inside(j)).collect();
    DivergenceCertificate {
        ball_center: ball.center.value(),
        ball_radius: ball.radius,
        inside_count: (0..orbit.len()).filter(|&j| inside(j)).count(),
        not_convergent: !returns.is_empty() && !exits.is_empty(),
        not_compactly_divergent: !returns.is_empty(),
        returns,
        exits,
    }
}

/// Finite-horizon witness that the orbit of `i` keeps returning to `ball` and keeps leaving it.
pub fn certify_not_compactly_divergent(build: &Section8Build, ball: &HyperbolicBall) -> Result<DivergenceCertificate> {
    if !ball.contains(DiscPoint::origin()) {
        return Err(Error::InvalidArgument("the ball must contain cayley(i) = 0".into()));
    }
    Ok(certify_orbit(&build.orbit, &build.milestones, ball))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCertificate {
    pub j: usize,
    pub delta: f64,
    /// Number of copies of the root appended.
    pub k: usize,
    /// `n_j`.
    pub index: usize,
    /// Deviation of the root on `|z| <= 0.9` (0 when no generator was needed).
    pub root_deviation: f64,
    /// `matrix_distance(L_{n_j}, phi_j)` after re-composition.
    pub matrix_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBuild {
    pub targets: Vec<MoebiusMap>,
    pub deltas: Vec<f64>,
    pub generators: Vec<MoebiusMap>,
    pub certificates: Vec<DenseCertificate>,
    /// `sup` of the generator deviations from block `j` on; non-increasing and bounded by `delta_j`.
    pub tail_deviation: Vec<f64>,
}

impl DenseBuild {
    pub fn stream(&self) -> GeneratorStream {
        GeneratorStream::list(self.generators.iter().map(|&m| MapExpr::mobius(m).expect("disc automorphism")).collect())
    }

    pub fn indices(&self) -> Vec<usize> {
        self.certificates.iter().map(|c| c.index).collect()
    }
}

/// `delta_j = 2^{-j}` for `j = 1..=count`.
pub fn dyadic_deltas(count: usize) -> Vec<f64> {
    (1..=count).map(|j| 0.5f64.powi(j as i32)).collect()
}

/// Disc automorphisms `z -> e^{i theta}(z + a)/(1 + conj(a) z)` with `a` on the grid `2^{-q} Z^2`,
/// `|a| <= 1 - 2^{-q}`, and `theta` in `2 pi 2^{-q} Z`, level by level, without repeats.
pub fn dyadic_targets(count: usize) -> Vec<MoebiusMap> {
    let mut seen: Vec<(i64, i64, i64, u32)> = Vec::new();
    let mut out = Vec::with_capacity(count);
    let mut q = 1u32;
    while out.len() < count {
        let s = 1i64 << q;
        let rmax = 1.0 - 1.0 / s as f64;
        // normalized to level 30 so the same parameters are recognised at every level
        let norm = |v: i64| v << (30 - q);
        for t in 0..s {
            for x in -s..=s {
                for y in -s..=s {
                    let a = Complex64::new(x as f64 / s as f64, y as f64 / s as f64);
                    if a.norm() > rmax + 1e-15 {
                        continue;
                    }
                    let key = (norm(x), norm(y), norm(t), 0);
                    if seen.contains(&key) {
                        continue;
                    }
                    seen.push(key);
                    let theta = std::f64::consts::TAU * t as f64 / s as f64;
                    out.push(MoebiusMap::disc_auto_raw(a, theta));
                    if out.len() == count {
                        return out;
                    }
                }
            }
        }
        q += 1;
    }
    out
}

/// Sampling radius for generator deviations.
pub const DEVIATION_RADIUS: f64 = 0.9;
/// Re-composition tolerance on `L_{n_j}`.
pub const DENSE_RESIDUAL_TOL: f64 = 1e-8;

/// Realizes each target as a left composition of near-identity roots.
pub fn build_dense(targets: &[MoebiusMap], deltas: &[f64], k_cap: usize) -> Result<DenseBuild> {
    if deltas.len() < targets.len() {
        return Err(Error::InvalidArgument(format!("{} targets but only {} radii", targets.len(), deltas.len())));
    }
    if deltas.iter().any(|&d| !(d > 0.0)) || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("radii must be positive and strictly decreasing".into()));
    }
    let targets: Vec<MoebiusMap> = targets
        .iter()
        .map(|t| match t.tag() {
            DomainTag::Disc => Ok(*t),
            DomainTag::HalfPlane => t.to_disc(),
            DomainTag::Generic => Err(Error::NotDiscAutomorphism(t.disc_residual())),
        })
        .collect::<Result<_>>()?;
    let mut l = MoebiusMap::identity(DomainTag::Disc);
    let mut generators = Vec::new();
    let mut certificates = Vec::with_capacity(targets.len());
    let mut block_max = Vec::with_capacity(targets.len());
    for (j, (target, &delta)) in targets.iter().zip(deltas).enumerate() {
        let m = target.compose(&l.inverse())?;
        let (k, root, dev) = if m.is_identity(1e-14) {
            (0, None, 0.0)
        } else {
            let mut found = None;
            for k in 1..=k_cap {
                let r = m.kth_root(k.try_into().map_err(|_| Error::InvalidArgument("k overflow".into()))?)?;
                let dev = r.deviation_on_disc(DEVIATION_RADIUS);
                if dev <= delta {
                    found = Some((k, Some(r), dev));
                    break;
                }
            }
            found.ok_or_else(|| Error::IterationCap {
                cap: k_cap,
                reason: format!("no root of target {} within {delta:e} of the identity", j + 1),
            })?
        };
        if let Some(r) = root {
            for _ in 0..k {
                l = r.compose(&l)?;
                generators.push(r);
            }
        }
        let residual = matrix_distance(&l, target);
        if residual >= DENSE_RESIDUAL_TOL {
            return Err(Error::Consistency(format!("target {} re-composes with residual {residual:e}", j + 1)));
        }
        block_max.push(dev);
        certificates.push(DenseCertificate {
            j: j + 1,
            delta,
            k,
            index: generators.len(),
            root_deviation: dev,
            matrix_residual: residual,
        });
    }
    let mut tail = block_max.clone();
    for j in (0..tail.len().saturating_sub(1)).rev() {
        tail[j] = tail[j].max(tail[j + 1]);
    }
    Ok(DenseBuild {
        targets,
        deltas: deltas[..certificates.len()].to_vec(),
        generators,
        certificates,
        tail_deviation: tail,
    })
}
