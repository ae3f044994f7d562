//! `holoifs`: batch experiments on iterated function systems of the disc.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use holoifs::bounds::{self, InequalityKind};
use holoifs::criteria::{self, ClassifyOptions, FixedPointOptions, SeriesMode, SeriesThresholds};
use holoifs::gallery;
use holoifs::ifs::{self, BackwardOrbit};
use holoifs::report::{self, Artifact};
use holoifs::straighten::{self, ProbeGrid, StraightenOptions};
use holoifs::{Complex64, DiscPoint, Error, GeneratorStream, HyperbolicBall, MoebiusMap, Side};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "holoifs", version, about = "Left and right iterated function systems of holomorphic self-maps of the disc")]
struct Cli {
    /// Directory for all output files.
    #[arg(long, global = true, env = "HOLOIFS_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Orbit table of one or more seeds.
    Simulate {
        #[command(flatten)]
        stream: StreamArg,
        #[arg(long, value_enum, default_value = "left")]
        side: SideArg,
        #[arg(long = "N", alias = "n", default_value_t = 100)]
        horizon: usize,
        /// Seed point `re,im` (repeatable).
        #[arg(long = "seed-point", value_parser = parse_point, allow_hyphen_values = true, default_value = "0,0")]
        seed_points: Vec<Complex64>,
    },
    /// Straightening run with per-step residuals.
    Straighten {
        #[command(flatten)]
        stream: StreamArg,
        #[arg(long, value_enum, default_value = "left")]
        side: SideArg,
        #[arg(long = "N", alias = "n", default_value_t = 1000)]
        horizon: usize,
        /// JSON list of `[re, im]` pairs `w_0, ..., w_N` (right side; defaults to all zeros).
        #[arg(long)]
        orbit: Option<PathBuf>,
        #[command(flatten)]
        tol: StraightenArgs,
    },
    /// Constant or nonconstant limits via the distortion series.
    Classify {
        #[command(flatten)]
        stream: StreamArg,
        #[arg(long, value_enum, default_value = "left")]
        side: SideArg,
        #[arg(long = "N", alias = "n", default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0,0")]
        z0: Complex64,
        /// Second base point (default: a fixed translate of z0).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        alt: Option<Complex64>,
        /// Radius used by the boundedness heuristic.
        #[arg(long, default_value_t = 8.0)]
        radius: f64,
    },
    /// Fuzzed inequality margins.
    Verify {
        #[arg(long, value_parser = parse_kind)]
        kind: InequalityKind,
        #[arg(long, default_value_t = 10_000)]
        fuzz: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Constant in front of the exponential (transfer and theorem_F).
        #[arg(long, default_value_t = 2.0)]
        coefficient: f64,
    },
    /// The explicit constructions: `section8` or `dense`.
    Gallery {
        #[arg(long, value_enum)]
        example: Example,
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        /// Dense build targets: a JSON list of maps, or `{"targets": [...], "deltas": [...]}`.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Number of dyadic targets when no file is given.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = gallery::DEFAULT_K_CAP)]
        k_cap: usize,
        #[arg(long)]
        emit_svg: bool,
    },
    /// Fixed points of the generators and the left orbit limit.
    FixedPoints {
        #[command(flatten)]
        stream: StreamArg,
        #[arg(long = "N", alias = "n", default_value_t = 1000)]
        horizon: usize,
        /// Limit candidate `a` (default: the last fixed point found).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        limit: Option<Complex64>,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Args, Debug)]
struct StreamArg {
    /// Stream spec: a JSON file path or inline JSON.
    #[arg(long)]
    stream: String,
}

#[derive(Args, Debug)]
struct StraightenArgs {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol_zero: f64,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0.5,0")]
    probe: Complex64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SideArg {
    Left,
    Right,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Example {
    Section8,
    Dense,
}

fn parse_point(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re,im`, got {s:?}")),
    }
}

fn parse_kind(s: &str) -> Result<InequalityKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

type Res<T> = holoifs::Result<T>;

fn load_stream(spec: &str) -> Res<GeneratorStream> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec).map_err(|e| Error::Io(format!("{spec}: {e}")))?
    };
    GeneratorStream::from_json(&text)
}

fn disc_point(z: Complex64) -> Res<DiscPoint> {
    DiscPoint::new(z)
}

fn positive(name: &str, v: f64) -> Res<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive")))
    }
}

fn horizon_ok(n: usize) -> Res<()> {
    if n == 0 {
        Err(Error::InvalidArgument("horizon N must be >= 1".into()))
    } else {
        Ok(())
    }
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Res<()> {
        report::write_json_file(&self.path(name), value)
    }

    fn csv(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Res<()>) -> Res<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        fs::write(self.path(name), buf)?;
        Ok(())
    }
}

fn run(cli: &Cli) -> Res<()> {
    fs::create_dir_all(&cli.out_dir).map_err(|e| Error::Io(format!("{}: {e}", cli.out_dir.display())))?;
    let out = Out { dir: cli.out_dir.clone() };
    match &cli.command {
        Command::Simulate { stream, side, horizon, seed_points } => {
            horizon_ok(*horizon)?;
            let s = load_stream(&stream.stream)?;
            let seeds = seed_points.iter().map(|&z| disc_point(z)).collect::<Res<Vec<_>>>()?;
            let rows = ifs::simulate(&s, (*side).into(), &seeds, *horizon)?;
            out.csv("orbit.csv", |b| report::write_orbit_csv(b, &rows))?;
            println!("wrote {} rows to orbit.csv", rows.len());
        }
        Command::Straighten { stream, side, horizon, orbit, tol } => {
            horizon_ok(*horizon)?;
            positive("tol", tol.tol)?;
            positive("tol_zero", tol.tol_zero)?;
            let s = load_stream(&stream.stream)?;
            let opts = StraightenOptions { tol: tol.tol, tol_zero: tol.tol_zero, window: tol.window, probe: tol.probe };
            let grid = ProbeGrid::default();
            let r = match side {
                SideArg::Left => straighten::left_straighten(&s, *horizon, &grid, opts)?,
                SideArg::Right => {
                    let pts: Vec<Complex64> = match orbit {
                        Some(p) => {
                            let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                            let raw: Vec<[f64; 2]> = serde_json::from_str(&text)?;
                            raw.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()
                        }
                        None => vec![Complex64::new(0.0, 0.0); horizon + 1],
                    };
                    let orbit = BackwardOrbit::new(pts)?;
                    straighten::right_straighten(&s, &orbit, *horizon, &grid, opts)?
                }
            };
            let params = json!({"side": side_name(*side), "horizon": horizon, "stream": s.to_value()});
            out.json("straighten.json", &Artifact::new("straighten", None, params, &r))?;
            out.csv("residuals.csv", |b| report::write_residual_csv(b, &r))?;
            println!(
                "converged: {}, degenerate: {}, cauchy residual: {:e}",
                r.converged, r.degenerate, r.cauchy_residual
            );
        }
        Command::Classify { stream, side, horizon, z0, alt, radius } => {
            horizon_ok(*horizon)?;
            positive("radius", *radius)?;
            let s = load_stream(&stream.stream)?;
            let z0 = disc_point(*z0)?;
            if let Some(a) = alt {
                disc_point(*a)?;
            }
            let opts = ClassifyOptions { radius: *radius, series: SeriesThresholds::default(), alt_base: *alt };
            let r = match side {
                SideArg::Left => criteria::classify_left_limits(&s, z0, *horizon, opts)?,
                SideArg::Right => criteria::classify_right_limits(&s, z0, *horizon, opts)?,
            };
            let series = criteria::distortion_series(&s, z0, *horizon, SeriesMode::FixedPoint, opts.series)?;
            let params = json!({"side": side_name(*side), "horizon": horizon, "z0": z0.value(), "radius": radius, "stream": s.to_value()});
            out.json("verdict.json", &Artifact::new("classify", None, params, &r))?;
            out.csv("series.csv", |b| report::write_series_csv(b, &series))?;
            println!("{}", serde_json::to_value(r.verdict)?.as_str().unwrap_or_default());
        }
        Command::Verify { kind, fuzz, seed, coefficient } => {
            horizon_ok(*fuzz)?;
            positive("coefficient", *coefficient)?;
            let (records, summary) = bounds::fuzz(*kind, *fuzz, *seed, *coefficient)?;
            out.csv("margins.csv", |b| bounds::write_margins_csv(b, &records))?;
            let params = json!({"kind": kind.name(), "fuzz": fuzz, "coefficient": coefficient});
            out.json("margins_summary.json", &Artifact::new("verify", Some(*seed), params, &summary))?;
            println!("{}: min margin {:e} over {} draws", kind, summary.min_margin, summary.draws);
        }
        Command::Gallery { example, nmax, targets, count, k_cap, emit_svg } => match example {
            Example::Section8 => {
                let b = gallery::build_section8(*nmax, *k_cap)?;
                let ball = HyperbolicBall::new(DiscPoint::origin(), 1.0)?;
                let cert = gallery::certify_not_compactly_divergent(&b, &ball)?;
                let params = json!({"example": "section8", "n_max": nmax, "k_cap": k_cap});
                out.json("section8.json", &Artifact::new("gallery", None, params, &report::section8_summary(&b, &cert)))?;
                out.csv("section8_orbit.csv", |buf| report::write_section8_orbit_csv(buf, &b))?;
                if *emit_svg {
                    fs::write(out.path("section8.svg"), report::halfplane_orbit_svg(&b.orbit, &b.milestones))?;
                }
                println!("milestones {:?}", b.milestones);
            }
            Example::Dense => {
                let (maps, deltas) = match targets {
                    Some(p) => load_targets(p)?,
                    None => (gallery::dyadic_targets(*count), None),
                };
                let deltas = deltas.unwrap_or_else(|| gallery::dyadic_deltas(maps.len()));
                let b = gallery::build_dense(&maps, &deltas, *k_cap)?;
                let params = json!({"example": "dense", "targets": maps.len(), "k_cap": k_cap});
                out.json("dense.json", &Artifact::new("gallery", None, params, &report::dense_summary(&b)))?;
                println!("{} targets realized with {} generators", b.certificates.len(), b.generators.len());
            }
        },
        Command::FixedPoints { stream, horizon, limit, delta, tol } => {
            horizon_ok(*horizon)?;
            positive("delta", *delta)?;
            positive("tol", *tol)?;
            let s = load_stream(&stream.stream)?;
            let limit = limit.map(disc_point).transpose()?;
            let opts = FixedPointOptions { delta: *delta, tol: *tol, ..FixedPointOptions::default() };
            let r = criteria::track_fixed_points(&s, *horizon, limit, opts)?;
            let params = json!({"horizon": horizon, "delta": delta, "tol": tol, "stream": s.to_value()});
            out.json("fixed_points.json", &Artifact::new("fixed-points", None, params, &r))?;
            println!(
                "fixed points: {}, orbit: {}",
                serde_json::to_value(r.fixed_point_verdict)?.as_str().unwrap_or_default(),
                serde_json::to_value(r.orbit_verdict)?.as_str().unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn side_name(s: SideArg) -> &'static str {
    match s {
        SideArg::Left => "left",
        SideArg::Right => "right",
    }
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum TargetsFile {
    List(Vec<MoebiusMap>),
    Full { targets: Vec<MoebiusMap>, deltas: Option<Vec<f64>> },
}

fn load_targets(p: &Path) -> Res<(Vec<MoebiusMap>, Option<Vec<f64>>)> {
    let text = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    Ok(match serde_json::from_str::<TargetsFile>(&text)? {
        TargetsFile::List(t) => (t, None),
        TargetsFile::Full { targets, deltas } => (targets, deltas),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                let diag = json!({
                    "error": e.to_string(),
                    "detail": format!("{e:?}"),
                    "args": std::env::args().skip(1).collect::<Vec<_>>(),
                });
                let path = cli.out_dir.join("diagnostics.json");
                if report::write_json_file(&path, &diag).is_ok() {
                    eprintln!("diagnostics written to {}", path.display());
                }
                ExitCode::from(3)
            }
        }
    }
}
