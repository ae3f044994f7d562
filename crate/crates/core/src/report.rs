//! CSV, JSON and SVG writers. All output is deterministic for fixed inputs.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::bounds::{self, InequalityKind};
use crate::criteria::{self, ClassifyOptions, FixedPointOptions, SeriesMode, SeriesReport, SeriesThresholds};
use crate::error::Result;
use crate::gallery::{self, DenseBuild, Section8Build, Section8Label};
use crate::geometry::{cayley_raw, DiscPoint, HyperbolicBall};
use crate::ifs::{self, GeneratorStream, OrbitRow, Side, StreamRule};
use crate::straighten::{self, ProbeGrid, StraightenOptions, StraighteningResult};

/// Wrapper carrying the parameters that produced a result.
#[derive(Debug, Clone, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: Option<u64>,
    pub params: serde_json::Value,
    pub result: &'a T,
}

impl<'a, T: Serialize> Artifact<'a, T> {
    pub fn new(command: &'a str, seed: Option<u64>, params: serde_json::Value, result: &'a T) -> Self {
        Artifact { tool: "holoifs", version: env!("CARGO_PKG_VERSION"), command, seed, params, result }
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    fs::write(path, buf)?;
    Ok(())
}

/// `n, seed_re, seed_im, value_re, value_im, omega_to_origin, step_omega`.
pub fn write_orbit_csv<W: Write>(out: W, rows: &[OrbitRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `n, term, partial_sum, product, orbit_re, orbit_im`.
pub fn write_series_csv<W: Write>(out: W, report: &SeriesReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `n, residual, probe_modulus, distortion_at_zero`.
pub fn write_residual_csv<W: Write>(out: W, result: &StraighteningResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in &result.trace {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

/// `j, map, n, re, im, disc_re, disc_im` for the orbit of `i`.
pub fn write_section8_orbit_csv<W: Write>(out: W, build: &Section8Build) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "map", "n", "re", "im", "disc_re", "disc_im"])?;
    for (j, (z, label)) in build.orbit.iter().zip(&build.labels).enumerate() {
        let (name, n) = match *label {
            Section8Label::G(n) => ("g", n),
            Section8Label::Identity => ("id", 0),
            Section8Label::F(n) => ("F", n),
        };
        let d = cayley_raw(*z);
        w.write_record([
            j.to_string(),
            name.to_string(),
            n.to_string(),
            z.re.to_string(),
            z.im.to_string(),
            d.re.to_string(),
            d.im.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The half-plane orbit of `i` as a polyline, with milestones marked
/// (exits red, returns blue) and the real axis drawn.
pub fn halfplane_orbit_svg(orbit: &[Complex64], milestones: &[usize]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const PAD: f64 = 20.0;
    let (mut xmin, mut xmax, mut ymax) = (-1.0f64, 1.0f64, 1.5f64);
    for z in orbit {
        xmin = xmin.min(z.re);
        xmax = xmax.max(z.re);
        ymax = ymax.max(z.im);
    }
    let sx = (W - 2.0 * PAD) / (xmax - xmin);
    let sy = (H - 2.0 * PAD) / ymax;
    let s = sx.min(sy);
    let px = |z: Complex64| (PAD + (z.re - xmin) * s, H - PAD - z.im * s);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<line x1="0" y1="{0:.3}" x2="{W}" y2="{0:.3}" stroke="black" stroke-width="1"/>"#, H - PAD);
    let pts: Vec<String> = orbit
        .iter()
        .map(|&z| {
            let (x, y) = px(z);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="gray" stroke-width="0.5" points="{}"/>"#, pts.join(" "));
    for (idx, &m) in milestones.iter().enumerate() {
        if let Some(&z) = orbit.get(m) {
            let (x, y) = px(z);
            let color = if idx % 2 == 0 { "red" } else { "blue" };
            let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{color}"/>"#);
        }
    }
    let (ix, iy) = px(Complex64::new(0.0, 1.0));
    let _ = writeln!(svg, r#"<circle cx="{ix:.3}" cy="{iy:.3}" r="4" fill="none" stroke="black"/>"#);
    svg.push_str("</svg>\n");
    svg
}

fn csv_file(dir: &Path, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    let path = dir.join(name);
    fs::write(&path, buf)?;
    Ok(path)
}

/// Runs a fixed battery of experiments and writes every artifact kind into `dir`.
/// Identical seeds give byte-identical files.
pub fn write_suite(dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let basel = GeneratorStream::rule(StreamRule::ScaleProduct { power: 2.0, offset: 1.0 })?;
    let seeds = [DiscPoint::origin(), DiscPoint::new(Complex64::new(0.3, 0.4))?];

    let rows = ifs::simulate(&basel, Side::Left, &seeds, 200)?;
    out.push(csv_file(dir, "orbit.csv", |b| write_orbit_csv(b, &rows))?);

    let series = criteria::distortion_series(&basel, seeds[1], 2000, SeriesMode::Orbit, SeriesThresholds::default())?;
    out.push(csv_file(dir, "series.csv", |b| write_series_csv(b, &series))?);
    let verdict = criteria::classify_left_limits(&basel, seeds[1], 2000, ClassifyOptions::default())?;
    let params = serde_json::json!({"side": "left", "horizon": 2000, "z0": seeds[1].value()});
    let path = dir.join("verdict.json");
    write_json_file(&path, &Artifact::new("classify", None, params, &verdict))?;
    out.push(path);

    let st = straighten::left_straighten(&basel, 500, &ProbeGrid::default(), StraightenOptions::default())?;
    out.push(csv_file(dir, "residuals.csv", |b| write_residual_csv(b, &st))?);
    let path = dir.join("straighten.json");
    write_json_file(&path, &Artifact::new("straighten", None, serde_json::json!({"side": "left", "horizon": 500}), &st))?;
    out.push(path);

    let (records, summary) = bounds::fuzz(InequalityKind::TheoremF, 2000, seed, 2.0)?;
    out.push(csv_file(dir, "margins.csv", |b| bounds::write_margins_csv(b, &records))?);
    let path = dir.join("margins_summary.json");
    write_json_file(&path, &Artifact::new("verify", Some(seed), serde_json::json!({"draws": 2000}), &summary))?;
    out.push(path);

    let build = gallery::build_section8(4, gallery::DEFAULT_K_CAP)?;
    let ball = HyperbolicBall::new(DiscPoint::origin(), 1.0)?;
    let cert = gallery::certify_not_compactly_divergent(&build, &ball)?;
    let path = dir.join("section8.json");
    write_json_file(&path, &Artifact::new("gallery", None, serde_json::json!({"example": "section8", "n_max": 4}), &section8_summary(&build, &cert)))?;
    out.push(path);
    out.push(csv_file(dir, "section8_orbit.csv", |b| write_section8_orbit_csv(b, &build))?);
    let path = dir.join("section8.svg");
    fs::write(&path, halfplane_orbit_svg(&build.orbit, &build.milestones))?;
    out.push(path);

    let dense = gallery::build_dense(&gallery::dyadic_targets(6), &gallery::dyadic_deltas(6), gallery::DEFAULT_K_CAP)?;
    let path = dir.join("dense.json");
    write_json_file(&path, &Artifact::new("gallery", None, serde_json::json!({"example": "dense", "targets": 6}), &dense_summary(&dense)))?;
    out.push(path);

    let contraction = GeneratorStream::rule(StreamRule::ShiftedContraction {
        base: 0.1,
        amplitude: 0.01,
        decay_power: 2.0,
        contraction: 0.5,
    })?;
    let fp = criteria::track_fixed_points(&contraction, 300, None, FixedPointOptions::default())?;
    let path = dir.join("fixed_points.json");
    write_json_file(&path, &Artifact::new("fixed-points", None, serde_json::json!({"horizon": 300}), &fp))?;
    out.push(path);
    Ok(out)
}

/// Milestones, certificates and structural checks, without the full orbit.
#[derive(Debug, Clone, Serialize)]
pub struct Section8Summary<'a> {
    pub n_max: usize,
    pub milestones: &'a [usize],
    pub conditions: Vec<gallery::ConditionCheck>,
    pub certificates: &'a [gallery::Section8Certificate],
    pub g_to_f: &'a [f64],
    pub divergence: &'a gallery::DivergenceCertificate,
}

pub fn section8_summary<'a>(build: &'a Section8Build, cert: &'a gallery::DivergenceCertificate) -> Section8Summary<'a> {
    Section8Summary {
        n_max: build.n_max,
        milestones: &build.milestones,
        conditions: build.conditions(),
        certificates: &build.certificates,
        g_to_f: &build.g_to_f,
        divergence: cert,
    }
}

/// Targets, radii and certificates of a dense build, without the generator list.
#[derive(Debug, Clone, Serialize)]
pub struct DenseSummary<'a> {
    pub targets: &'a [crate::moebius::MoebiusMap],
    pub deltas: &'a [f64],
    pub generator_count: usize,
    pub certificates: &'a [gallery::DenseCertificate],
    pub tail_deviation: &'a [f64],
}

pub fn dense_summary(build: &DenseBuild) -> DenseSummary<'_> {
    DenseSummary {
        targets: &build.targets,
        deltas: &build.deltas,
        generator_count: build.generators.len(),
        certificates: &build.certificates,
        tail_deviation: &build.tail_deviation,
    }
}
