//! The `kpsr` command line.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cut_locus::{self, CutLocusGrid, SweepParams, TargetMatching};
use crate::error::{Error, Result};
use crate::geodesic::{CurveSamples, GeodesicSpec};
use crate::io::{self, CurveDocument, Header, Tolerances};
use crate::lie::{
    self, AlgebraElement, GroupElement, KpDecomposition, DEFAULT_WITNESS_SEED, SU2_KILLING_SCALE,
};
use crate::numerics::uniform_grid;
use crate::par::Execution;
use crate::quotient;

/// Environment variable holding the default `--seed`.
pub const SEED_ENV: &str = "KPSR_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "kpsr",
    version,
    about = "K-P sub-Riemannian geodesics, SU(2) quotient geometry and cut-locus sweeps"
)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_WITNESS_SEED)]
    pub seed: u64,
    /// TOML file overriding eps_boundary, eps_target, delta_tie, null_space_tol.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run sweeps on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the closed-form geodesic e^{At} e^{(P-A)t}.
    Geodesic(GeodesicArgs),
    /// Dump the SU(2) quotient metric and curvature on a polar grid.
    MetricGrid(MetricGridArgs),
    /// Minimal time to an SU(2) target over the geodesic family.
    Sweep(SweepArgs),
    /// Isotropy algebra dimension of a group element.
    Isotropy(IsotropyArgs),
    /// A regular AIII witness matrix.
    Witness(WitnessArgs),
    /// Horizontal lift of a disc curve.
    Lift(LiftArgs),
    /// Multiplicity table over regular and diagonal SU(2) targets.
    Cutlocus(CutlocusArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveFormat {
    Json,
    Csv,
    /// `t, x, y, vx, vy` of the disc projection (n = 2 only).
    DiscCsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableFormat {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct GeodesicArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub q: usize,
    /// Element of K as JSON, or `zero`.
    #[arg(long = "A", default_value = "zero")]
    pub a: String,
    /// Element of P as JSON.
    #[arg(long = "P")]
    pub p: String,
    #[arg(long)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// First sample time.
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// Rescale P to unit norm.
    #[arg(long)]
    pub normalize: bool,
    /// Inner product scale: <X|Y> = -scale tr(XY).
    #[arg(long, default_value_t = SU2_KILLING_SCALE)]
    pub scale: f64,
    #[arg(long, value_enum, default_value_t = CurveFormat::Json)]
    pub format: CurveFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricGridArgs {
    #[arg(long, default_value_t = 21)]
    pub resolution: usize,
    #[arg(long, default_value_t = 0.9)]
    pub r_max: f64,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepGridArgs {
    #[arg(long, default_value_t = 64)]
    pub phases: usize,
    #[arg(long, default_value_t = 33)]
    pub a_steps: usize,
    #[arg(long, default_value_t = 4.0)]
    pub a_max: f64,
    #[arg(long, default_value_t = 1.2 * PI)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Match targets up to the center {+I, -I}.
    #[arg(long)]
    pub projective: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Target in SU(2) as JSON.
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: SweepGridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IsotropyArgs {
    /// Group element as JSON (a `witness` output file works too).
    #[arg(long)]
    pub x: String,
    /// Block size; read from the input when present, else n / 2.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct WitnessArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LiftArgs {
    /// Disc curve CSV with columns t, x, y, vx, vy.
    #[arg(long)]
    pub curve: PathBuf,
    /// Starting group element as JSON.
    #[arg(long)]
    pub q0: String,
    /// Group curve (JSON or CSV) to compare against at matching times.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Json)]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CutlocusArgs {
    /// Regular targets on a side x side grid inside |z| <= r-max.
    #[arg(long, default_value_t = 3)]
    pub side: usize,
    #[arg(long, default_value_t = 0.75)]
    pub r_max: f64,
    /// Diagonal targets diag(e^{i theta}, e^{-i theta}); comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = CutLocusGrid::default().diagonal_angles)]
    pub diagonal_angles: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: SweepGridArgs,
    #[arg(long, value_enum, default_value_t = TableFormat::Json)]
    pub format: TableFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Context {
    seed: u64,
    tolerances: Tolerances,
    exec: Execution,
    globals: Value,
}

impl Context {
    fn header(&self, command: &str, args: &impl Serialize) -> Header {
        let mut h = Header::new(command, args, self.seed, self.tolerances);
        if let Value::Object(g) = &self.globals {
            for (k, v) in g {
                h.flags.insert(k.clone(), v.clone());
            }
        }
        h
    }

    fn sweep_params(&self, g: &SweepGridArgs) -> SweepParams {
        SweepParams {
            phases: g.phases,
            a_steps: g.a_steps,
            a_max: g.a_max,
            dt: g.dt,
            t_max: g.t_max,
            eps_target: self.tolerances.eps_target,
            delta_tie: self.tolerances.delta_tie,
            matching: if g.projective {
                TargetMatching::Projective
            } else {
                TargetMatching::Strict
            },
            exec: self.exec,
            ..SweepParams::default()
        }
    }
}

fn parse_algebra(arg: &str, n: usize) -> Result<AlgebraElement> {
    if arg.trim() == "zero" {
        return Ok(AlgebraElement::zero(n));
    }
    let a = AlgebraElement::new(io::read_matrix_arg(arg)?)?;
    if a.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.n(),
        });
    }
    Ok(a)
}

fn write_json(out: Option<&Path>, header: &Header, body: &impl Serialize) -> Result<()> {
    io::emit(out, &io::json_string(&io::with_header(header, body)?)?)
}

fn geodesic(ctx: &Context, args: &GeodesicArgs) -> Result<()> {
    let dec = Arc::new(KpDecomposition::aiii(args.n, args.q, args.scale)?);
    let a = parse_algebra(&args.a, args.n)?;
    let p = parse_algebra(&args.p, args.n)?;
    let mut spec = GeodesicSpec::new(dec, a, p, args.t_max, args.dt)?;
    if args.normalize {
        spec = spec.normalized()?;
    }
    if !(args.t0 >= 0.0 && args.t0 <= args.t_max) {
        return Err(Error::OutOfRange {
            what: "t0",
            value: args.t0,
            min: 0.0,
            max: args.t_max,
        });
    }
    if args.format == CurveFormat::DiscCsv {
        let curve = quotient::projected_geodesic(&spec, args.t0, args.t_max, args.dt)?;
        return io::emit(args.out.as_deref(), &io::disc_curve_csv(&curve)?);
    }
    let times = uniform_grid(args.t0, args.t_max, args.dt)?;
    let points = times.iter().map(|&t| spec.point_unchecked(t)).collect();
    let samples = CurveSamples::new(times, points)?;
    match args.format {
        CurveFormat::Csv => io::emit(args.out.as_deref(), &io::curve_csv(&samples)?),
        _ => write_json(
            args.out.as_deref(),
            &ctx.header("geodesic", args),
            &CurveDocument::from_samples(&samples),
        ),
    }
}

fn metric_grid(ctx: &Context, args: &MetricGridArgs) -> Result<()> {
    let rows = quotient::metric_grid(args.resolution, args.r_max)?;
    match args.format {
        TableFormat::Json => write_json(
            args.out.as_deref(),
            &ctx.header("metric-grid", args),
            &json!({ "rows": rows }),
        ),
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["x", "y", "g_xx", "curvature"])?;
            for r in &rows {
                w.write_record([r.x, r.y, r.g_xx, r.curvature].map(|v| v.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            io::emit(args.out.as_deref(), &String::from_utf8_lossy(&bytes))
        }
    }
}

fn sweep(ctx: &Context, args: &SweepArgs) -> Result<()> {
    let target = GroupElement::new(io::read_matrix_arg(&args.target)?)?;
    let report = cut_locus::sweep_distance(&target, &ctx.sweep_params(&args.grid))?;
    write_json(args.out.as_deref(), &ctx.header("sweep", args), &report)
}

fn isotropy(ctx: &Context, args: &IsotropyArgs) -> Result<()> {
    let value = io::read_json_arg(&args.x)?;
    let x = GroupElement::new(io::matrix_from_value(&value)?)?;
    let n = x.n();
    let q = args
        .q
        .or_else(|| value.get("q").and_then(Value::as_u64).map(|q| q as usize))
        .unwrap_or((n / 2).max(1));
    let dec = KpDecomposition::aiii(n, q, SU2_KILLING_SCALE)?;
    let tol = ctx.tolerances.null_space_tol;
    let sv = lie::isotropy_singular_values(&x, &dec)?;
    let dimension = sv.iter().filter(|&&s| s < tol).count();
    let body = json!({
        "n": n,
        "q": q,
        "dimension": dimension,
        "regular": dimension == 0,
        "singular_values": sv,
    });
    write_json(args.out.as_deref(), &ctx.header("isotropy", args), &body)
}

fn witness(ctx: &Context, args: &WitnessArgs) -> Result<()> {
    let w = lie::aiii_regular_witness(args.n, args.q, ctx.seed)?;
    let body = json!({
        "n": args.n,
        "q": args.q,
        "matrix": io::matrix_to_rows(w.matrix()),
    });
    write_json(args.out.as_deref(), &ctx.header("witness", args), &body)
}

fn lift(ctx: &Context, args: &LiftArgs) -> Result<()> {
    let curve = io::read_disc_curve_csv(&std::fs::read(&args.curve)?)?;
    let q0 = GroupElement::new(io::read_matrix_arg(&args.q0)?)?;
    let lifted = quotient::lift_curve(&curve, &q0)?;
    let error = match &args.reference {
        Some(path) => Some(round_trip_error(&lifted, &io::read_curve(path)?)?),
        None => None,
    };
    match args.format {
        TableFormat::Csv => {
            if let Some(e) = error {
                eprintln!("round-trip sup error {e:.3e}");
            }
            io::emit(args.out.as_deref(), &io::curve_csv(&lifted)?)
        }
        TableFormat::Json => {
            let mut body = serde_json::to_value(CurveDocument::from_samples(&lifted))?;
            if let (Some(e), Value::Object(m)) = (error, &mut body) {
                m.insert("round_trip_sup_error".into(), json!(e));
            }
            write_json(args.out.as_deref(), &ctx.header("lift", args), &body)
        }
    }
}

/// Sup Frobenius distance over the reference samples whose times match
/// samples of `lifted`.
pub fn round_trip_error(lifted: &CurveSamples, reference: &CurveSamples) -> Result<f64> {
    let mut worst: Option<f64> = None;
    let mut j = 0;
    for (t, x) in lifted.times.iter().zip(&lifted.points) {
        while j < reference.times.len() && reference.times[j] < t - 1e-9 {
            j += 1;
        }
        if j < reference.times.len() && (reference.times[j] - t).abs() <= 1e-9 {
            if x.n() != reference.points[j].n() {
                return Err(Error::DimensionMismatch {
                    expected: x.n(),
                    found: reference.points[j].n(),
                });
            }
            let d = x.distance(&reference.points[j]);
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst.ok_or_else(|| Error::InvalidParameter("reference curve shares no sample times".into()))
}

fn cutlocus(ctx: &Context, args: &CutlocusArgs) -> Result<()> {
    let grid = CutLocusGrid {
        side: args.side,
        r_max: args.r_max,
        diagonal_angles: args.diagonal_angles.clone(),
        sweep: ctx.sweep_params(&args.grid),
    };
    let report = cut_locus::cut_locus_report(&grid)?;
    match args.format {
        TableFormat::Json => {
            write_json(args.out.as_deref(), &ctx.header("cutlocus", args), &report)
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "kind",
                "x",
                "y",
                "status",
                "best_time",
                "multiplicity",
                "lower_bound",
                "pass",
            ])?;
            for r in &report.rows {
                w.write_record([
                    serde_json::to_value(r.kind)?
                        .as_str()
                        .unwrap_or_default()
                        .to_string(),
                    r.z.x.to_string(),
                    r.z.y.to_string(),
                    serde_json::to_value(r.status)?
                        .as_str()
                        .unwrap_or_default()
                        .to_string(),
                    r.best_time.map_or(String::new(), |t| t.to_string()),
                    r.multiplicity.to_string(),
                    r.lower_bound.to_string(),
                    r.pass.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            io::emit(args.out.as_deref(), &String::from_utf8_lossy(&bytes))
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let tolerances = match &cli.config {
        Some(path) => Tolerances::load(path)?,
        None => Tolerances::default(),
    };
    let ctx = Context {
        seed: cli.seed,
        tolerances,
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
        globals: json!({ "config": cli.config, "sequential": cli.sequential }),
    };
    match &cli.command {
        Command::Geodesic(a) => geodesic(&ctx, a),
        Command::MetricGrid(a) => metric_grid(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Isotropy(a) => isotropy(&ctx, a),
        Command::Witness(a) => witness(&ctx, a),
        Command::Lift(a) => lift(&ctx, a),
        Command::Cutlocus(a) => cutlocus(&ctx, a),
    }
}

/// Process exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        2
    } else {
        3
    }
}
