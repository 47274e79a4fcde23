//! Command-line front end: rule analysis reports, τ sampling, h estimation
//! sweeps, λ solves, τ scaling studies, droplet algebra and a full pipeline.
//!
//! Exit codes: 0 success, 1 a stage produced an inconclusive result, 2
//! invalid input.

use bperc::analysis::{self, Budget, Difficulty, Voracity};
use bperc::direction::Direction;
use bperc::droplet::{DirectionFrame, Droplet, FrameTag};
use bperc::engine::sample_tau;
use bperc::hfun::HFunction;
use bperc::lambda::{minimize_lambda, HAssignment, MinimizeOptions};
use bperc::rules::{
    make_convex_neighbourhood, make_threshold_family, parse_family, serialize_family, Region,
    UpdateFamily,
};
use bperc::scaling::{estimate_h, h_limit_table, HTable};
use bperc::DropletF64;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SCHEMA_VERSION: &str = "1";

#[derive(Parser)]
#[command(name = "bperc", version, about = "Two-dimensional U-bootstrap percolation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate or generate rule files.
    Rules {
        #[command(subcommand)]
        cmd: RulesCmd,
    },
    /// Analyze an update family: stable directions, difficulty, voracity.
    Analyze(AnalyzeArgs),
    /// Sample infection times of the origin on a torus.
    Tau(TauArgs),
    /// Estimate the traversability function h^u_p on an x grid.
    EstimateH(EstimateHArgs),
    /// Minimize the droplet-sequence energy to estimate λ.
    SolveLambda(SolveLambdaArgs),
    /// Droplet geometry: metrics, Minkowski sum, span.
    Droplet {
        #[command(subcommand)]
        cmd: DropletCmd,
    },
    /// τ scaling study: p^α·log τ statistics over a p grid.
    Scaling(ScalingArgs),
    /// Full pipeline: analyze → estimate-h → extrapolate → solve-lambda →
    /// scaling, with a manifest tying artifacts to seeds and versions.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum RulesCmd {
    /// Parse a rule file and report its shape.
    Validate { file: PathBuf },
    /// Generate a symmetric threshold family from a disc neighbourhood.
    Threshold {
        #[arg(long)]
        disc_radius: f64,
        #[arg(long)]
        theta: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    rules: PathBuf,
    /// Largest helping-set size attempted by the difficulty search.
    #[arg(long, default_value_t = 4)]
    budget_size: usize,
    /// Multiplier on the default certification window.
    #[arg(long, default_value_t = 1)]
    budget_window: i64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TauArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    p: f64,
    #[arg(long = "L")]
    l: i64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateHArgs {
    #[arg(long)]
    rules: PathBuf,
    /// Direction as "a,b" (primitive integer vector).
    #[arg(long)]
    direction: String,
    #[arg(long)]
    p: f64,
    /// Geometric grid "lo:hi:steps" of rescaled widths x.
    #[arg(long)]
    x_grid: String,
    /// Rectangle height (number of lines).
    #[arg(long)]
    n: i64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveLambdaArgs {
    #[arg(long)]
    rules: PathBuf,
    /// HTable JSON produced by estimate-h (interpolated as h).
    #[arg(long, conflicts_with = "h_analytic")]
    h_table: Option<PathBuf>,
    /// Closed-form h: "two-neighbour" or "basic-log".
    #[arg(long)]
    h_analytic: Option<String>,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    /// Droplets per optimized sequence.
    #[arg(long = "N", default_value_t = 48)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DropletCmd {
    /// Edge dimensions and perimeter of a droplet.
    Metrics { file: PathBuf },
    /// Minkowski sum of two droplets over the same frame.
    Sum {
        a: PathBuf,
        b: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Smallest droplet containing all the given ones.
    Span {
        files: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long)]
    rules: PathBuf,
    /// Comma-separated strictly decreasing densities.
    #[arg(long)]
    p_grid: String,
    #[arg(long = "L")]
    l: i64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    /// λ̂ reference line for the plot.
    #[arg(long)]
    lambda_ref: Option<f64>,
    /// Output prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(short, long)]
    out: PathBuf,
    /// Optional self-contained SVG plot of p^α·log τ vs p.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Densities for the h-estimation stage (strictly decreasing).
    #[arg(long, default_value = "0.08,0.05,0.03")]
    p_values: String,
    #[arg(long, default_value = "0.35:4.0:10")]
    x_grid: String,
    #[arg(long, default_value_t = 48)]
    n: i64,
    #[arg(long, default_value_t = 20000)]
    reps: u64,
    #[arg(long, default_value_t = 4)]
    starts: usize,
    /// Droplets per optimized sequence in the λ solve.
    #[arg(long, default_value_t = 32)]
    steps: usize,
    /// Densities for the τ scaling stage.
    #[arg(long, default_value = "0.12,0.10,0.08")]
    scaling_p: String,
    #[arg(long = "L", default_value_t = 256)]
    l: i64,
    #[arg(long, default_value_t = 10)]
    tau_reps: u64,
}

#[derive(Debug)]
enum CliError {
    /// Invalid input (exit 2).
    Invalid(String),
    /// A stage was inconclusive (exit 1).
    Inconclusive(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "{m}"),
            CliError::Inconclusive(m) => write!(f, "inconclusive: {m}"),
        }
    }
}

fn invalid(m: impl Into<String>) -> CliError {
    CliError::Invalid(m.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Inconclusive(_) => ExitCode::from(1),
                CliError::Invalid(_) => ExitCode::from(2),
            }
        }
    }
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Rules { cmd } => run_rules(cmd),
        Cmd::Analyze(a) => run_analyze(a),
        Cmd::Tau(a) => run_tau(a),
        Cmd::EstimateH(a) => run_estimate_h(a),
        Cmd::SolveLambda(a) => run_solve_lambda(a),
        Cmd::Droplet { cmd } => run_droplet(cmd),
        Cmd::Scaling(a) => run_scaling(a),
        Cmd::Pipeline(a) => run_pipeline(a),
    }
}

// --- shared helpers -----------------------------------------------------------

fn load_family(path: &Path) -> Result<UpdateFamily, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_family(&text).map_err(|e| invalid(format!("invalid rules file {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    fs::write(path, contents).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn parse_direction(text: &str) -> Result<Direction, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    let err = || invalid(format!("direction must be \"a,b\" with gcd(a,b)=1, got {text:?}"));
    if parts.len() != 2 {
        return Err(err());
    }
    let a: i64 = parts[0].trim().parse().map_err(|_| err())?;
    let b: i64 = parts[1].trim().parse().map_err(|_| err())?;
    Direction::new(a, b).ok_or_else(err)
}

/// "lo:hi:steps" → geometric grid of `steps` points from lo to hi.
fn parse_x_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let err = || invalid(format!("x grid must be \"lo:hi:steps\", got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(err());
    }
    let lo: f64 = parts[0].parse().map_err(|_| err())?;
    let hi: f64 = parts[1].parse().map_err(|_| err())?;
    let steps: usize = parts[2].parse().map_err(|_| err())?;
    if !(lo > 0.0 && hi > lo && steps >= 2) {
        return Err(err());
    }
    let ratio = (hi / lo).powf(1.0 / (steps as f64 - 1.0));
    Ok((0..steps).map(|i| lo * ratio.powi(i as i32)).collect())
}

fn parse_p_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let ps: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let ps = ps.map_err(|_| invalid(format!("bad density list {text:?}")))?;
    if ps.is_empty() || ps.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(invalid(format!("densities must lie in [0,1]: {text:?}")));
    }
    Ok(ps)
}

// --- rules ---------------------------------------------------------------------

fn run_rules(cmd: RulesCmd) -> Result<(), CliError> {
    match cmd {
        RulesCmd::Validate { file } => {
            let fam = load_family(&file)?;
            let summary = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "name": fam.name,
                "rule_count": fam.rule_count().to_string(),
                "threshold": fam.threshold().map(|t| serde_json::json!({
                    "neighbourhood_size": t.neighbourhood.len(),
                    "theta": t.theta,
                })),
                "symmetric": fam.is_symmetric(),
                "diameter": fam.diameter(),
            });
            println!("{}", to_json(&summary).trim_end());
            Ok(())
        }
        RulesCmd::Threshold {
            disc_radius,
            theta,
            out,
        } => {
            let k = make_convex_neighbourhood(&Region::Disc {
                radius: disc_radius,
            })
            .map_err(|e| invalid(e.to_string()))?;
            let fam = make_threshold_family(&k, theta).map_err(|e| invalid(e.to_string()))?;
            write_file(&out, &serialize_family(&fam))?;
            Ok(())
        }
    }
}

// --- analyze ---------------------------------------------------------------------

fn run_analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let fam = load_family(&a.rules)?;
    let budget = Budget {
        max_size: a.budget_size,
        window_scale: a.budget_window,
        ..Budget::default()
    };
    let report = analysis::analyze(&fam, &budget);
    let body = to_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "report": report,
    }));
    match &a.out {
        Some(p) => write_file(p, &body)?,
        None => print!("{body}"),
    }
    let unknown = report
        .directions
        .iter()
        .any(|d| matches!(d.difficulty, Difficulty::Unknown { .. }));
    if unknown || matches!(report.voracious, Voracity::Inconclusive) {
        return Err(CliError::Inconclusive(
            "analysis left some direction unresolved within budget".into(),
        ));
    }
    Ok(())
}

// --- tau ---------------------------------------------------------------------

fn run_tau(a: TauArgs) -> Result<(), CliError> {
    let fam = load_family(&a.rules)?;
    let mut csv = String::from("rep,seed,tau\n");
    for rep in 0..a.reps {
        let tau = sample_tau(&fam, a.p, a.l, a.seed, rep);
        let cell = tau.map_or_else(|| "inf".to_string(), |t| t.to_string());
        writeln!(csv, "{rep},{},{cell}", a.seed).expect("string write");
    }
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

// --- estimate-h -----------------------------------------------------------------

fn run_estimate_h(a: EstimateHArgs) -> Result<(), CliError> {
    let fam = load_family(&a.rules)?;
    let u = parse_direction(&a.direction)?;
    let grid = parse_x_grid(&a.x_grid)?;
    let table = estimate_h(&fam, u, a.p, &grid, a.n, a.reps, a.seed)
        .map_err(|e| invalid(e.to_string()))?;
    write_file(&a.out, &to_json(&with_schema(&table)))?;
    if table.entries.iter().any(|e| !e.usable) {
        return Err(CliError::Inconclusive(
            "some x had no surviving replicates; increase reps or shrink the grid".into(),
        ));
    }
    Ok(())
}

fn with_schema<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "data": value,
    })
}

fn read_schema_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("invalid JSON in {}: {e}", path.display())))?;
    let data = value.get("data").cloned().unwrap_or(value);
    serde_json::from_value(data).map_err(|e| invalid(format!("bad schema in {}: {e}", path.display())))
}

// --- solve-lambda -----------------------------------------------------------------

fn s_alpha_frame(fam: &UpdateFamily) -> Result<(DirectionFrame, u32), CliError> {
    let report = analysis::analyze(fam, &Budget::default());
    let alpha = report
        .alpha
        .ok_or_else(|| CliError::Inconclusive("family has no finite difficulty α".into()))?;
    let frame = DirectionFrame::new(report.s_alpha.clone(), FrameTag::SAlpha)
        .map_err(|e| CliError::Inconclusive(format!("S_α does not bound droplets: {e}")))?;
    Ok((frame, alpha))
}

fn run_solve_lambda(a: SolveLambdaArgs) -> Result<(), CliError> {
    let fam = load_family(&a.rules)?;
    let (frame, _alpha) = s_alpha_frame(&fam)?;
    let h = match (&a.h_table, &a.h_analytic) {
        (Some(path), None) => {
            let table: HTable = read_schema_json(path)?;
            HFunction::from_points(table.points()).map_err(|e| invalid(e.to_string()))?
        }
        (None, Some(id)) => HFunction::analytic(id).map_err(|e| invalid(e.to_string()))?,
        _ => return Err(invalid("exactly one of --h-table/--h-analytic is required")),
    };
    let assignment = HAssignment::uniform(&frame, h);
    let opts = MinimizeOptions {
        starts: a.starts,
        steps: a.n,
        seed: a.seed,
        ..MinimizeOptions::default()
    };
    let result = minimize_lambda(&frame, &assignment, &opts)
        .map_err(|e| CliError::Inconclusive(e.to_string()))?;
    let body = to_json(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "lambda": result.lambda,
        "best_start": result.best_start,
        "start_energies": result.start_energies,
        "sequence": result.sequence,
        "config": {
            "rules": a.rules.display().to_string(),
            "starts": a.starts,
            "N": a.n,
            "seed": a.seed,
        },
    }));
    write_file(&a.out, &body)?;
    if !result.lambda.is_finite() {
        return Err(CliError::Inconclusive("no finite-energy sequence found".into()));
    }
    Ok(())
}

// --- droplet -----------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DropletFile {
    frame: Vec<[i64; 2]>,
    radii: Vec<f64>,
}

fn load_droplet(path: &Path) -> Result<DropletF64, CliError> {
    let file: DropletFile = read_schema_json(path)?;
    let dirs: Option<Vec<Direction>> = file
        .frame
        .iter()
        .map(|&[a, b]| Direction::new(a, b))
        .collect();
    let dirs = dirs.ok_or_else(|| invalid(format!("non-primitive direction in {}", path.display())))?;
    let frame = DirectionFrame::new(dirs, FrameTag::SAlpha)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Droplet::new(frame, file.radii).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn droplet_file(d: &DropletF64) -> DropletFile {
    DropletFile {
        frame: d
            .frame()
            .dirs()
            .iter()
            .map(|u| {
                let v = u.vector();
                [v.x, v.y]
            })
            .collect(),
        radii: d.radii().to_vec(),
    }
}

fn emit_droplet(d: &DropletF64, out: Option<&Path>) -> Result<(), CliError> {
    let body = to_json(&with_schema(&droplet_file(d)));
    match out {
        Some(p) => write_file(p, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run_droplet(cmd: DropletCmd) -> Result<(), CliError> {
    match cmd {
        DropletCmd::Metrics { file } => {
            let d = load_droplet(&file)?;
            let m = d.metrics();
            let body = to_json(&serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "dimension": m.dimension,
                "perimeter": m.perimeter,
                "vertices": d.vertices().iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
            }));
            print!("{body}");
            Ok(())
        }
        DropletCmd::Sum { a, b, out } => {
            let da = load_droplet(&a)?;
            let db = load_droplet(&b)?;
            let sum = da
                .minkowski_sum(&db)
                .map_err(|e| invalid(e.to_string()))?;
            emit_droplet(&sum, out.as_deref())
        }
        DropletCmd::Span { files, out } => {
            if files.is_empty() {
                return Err(invalid("span needs at least one droplet file"));
            }
            let ds: Result<Vec<DropletF64>, CliError> =
                files.iter().map(|f| load_droplet(f)).collect();
            let ds = ds?;
            let refs: Vec<&DropletF64> = ds.iter().collect();
            let span = Droplet::span(&refs).map_err(|e| invalid(e.to_string()))?;
            emit_droplet(&span, out.as_deref())
        }
    }
}

// --- scaling -----------------------------------------------------------------

#[derive(Serialize)]
struct ScalingRow {
    p: f64,
    l: i64,
    reps: u64,
    seed: u64,
    finite: u64,
    median: Option<f64>,
    q1: Option<f64>,
    q3: Option<f64>,
}

#[derive(Serialize)]
struct ScalingReport {
    schema_version: String,
    alpha: u32,
    lambda_ref: Option<f64>,
    rows: Vec<ScalingRow>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() as f64 - 1.0);
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn scaling_report(
    fam: &UpdateFamily,
    ps: &[f64],
    l: i64,
    reps: u64,
    seed: u64,
    lambda_ref: Option<f64>,
) -> Result<ScalingReport, CliError> {
    let report = analysis::analyze(fam, &Budget::default());
    let alpha = report
        .alpha
        .ok_or_else(|| CliError::Inconclusive("no finite α; scaling undefined".into()))?;
    let mut rows = Vec::new();
    for &p in ps {
        let mut vals: Vec<f64> = Vec::new();
        let mut finite = 0;
        for rep in 0..reps {
            if let Some(tau) = sample_tau(fam, p, l, seed, rep) {
                finite += 1;
                vals.push(p.powi(alpha as i32) * (tau.max(1) as f64).ln());
            }
        }
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let stat = |q: f64| (!vals.is_empty()).then(|| quantile(&vals, q));
        rows.push(ScalingRow {
            p,
            l,
            reps,
            seed,
            finite,
            median: stat(0.5),
            q1: stat(0.25),
            q3: stat(0.75),
        });
    }
    Ok(ScalingReport {
        schema_version: SCHEMA_VERSION.to_string(),
        alpha,
        lambda_ref,
        rows,
    })
}

fn scaling_csv(r: &ScalingReport) -> String {
    let mut csv = String::from("p,L,reps,seed,finite,median,q1,q3\n");
    for row in &r.rows {
        let cell = |v: Option<f64>| v.map_or_else(|| "inf".into(), |x| format!("{x}"));
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            row.p,
            row.l,
            row.reps,
            row.seed,
            row.finite,
            cell(row.median),
            cell(row.q1),
            cell(row.q3)
        )
        .expect("string write");
    }
    csv
}

fn run_scaling(a: ScalingArgs) -> Result<(), CliError> {
    let fam = load_family(&a.rules)?;
    let ps = parse_p_grid(&a.p_grid)?;
    if ps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("p grid must be strictly decreasing"));
    }
    let report = scaling_report(&fam, &ps, a.l, a.reps, a.seed, a.lambda_ref)?;
    write_file(&a.out.with_extension("csv"), &scaling_csv(&report))?;
    write_file(&a.out.with_extension("json"), &to_json(&report))?;
    if let Some(svg) = &a.svg {
        let pts: Vec<(f64, f64)> = report
            .rows
            .iter()
            .filter_map(|r| r.median.map(|m| (r.p, m)))
            .collect();
        write_file(
            svg,
            &svg_plot(&pts, a.lambda_ref, "tau scaling", "p", "p^a log tau"),
        )?;
    }
    Ok(())
}

// --- pipeline -----------------------------------------------------------------

#[derive(Serialize)]
struct Stage {
    name: String,
    status: String,
    outputs: Vec<String>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct Manifest {
    schema_version: String,
    tool_version: String,
    seed: u64,
    config_hash: String,
    config: serde_json::Value,
    stages: Vec<Stage>,
}

fn run_pipeline(a: PipelineArgs) -> Result<(), CliError> {
    let fam = load_family(&a.rules)?;
    let ps = parse_p_grid(&a.p_values)?;
    if ps.len() < 3 || ps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("--p-values needs ≥ 3 strictly decreasing densities"));
    }
    let grid = parse_x_grid(&a.x_grid)?;
    let scaling_ps = parse_p_grid(&a.scaling_p)?;
    let dir = &a.out_dir;
    fs::create_dir_all(dir).map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;

    let config = serde_json::json!({
        "rules": a.rules.display().to_string(),
        "seed": a.seed,
        "p_values": ps,
        "x_grid": a.x_grid,
        "n": a.n,
        "reps": a.reps,
        "starts": a.starts,
        "steps": a.steps,
        "scaling_p": scaling_ps,
        "L": a.l,
        "tau_reps": a.tau_reps,
    });
    let config_hash = hex_digest(&serde_json::to_vec(&config).expect("config serializes"));
    let mut stages: Vec<Stage> = Vec::new();
    let mut inconclusive = false;

    // stage 1: analysis
    let report = analysis::analyze(&fam, &Budget::default());
    let report_path = dir.join("analysis.json");
    write_file(
        &report_path,
        &to_json(&serde_json::json!({"schema_version": SCHEMA_VERSION, "report": report})),
    )?;
    let mut notes = Vec::new();
    if matches!(report.voracious, Voracity::No { .. }) {
        notes.push(
            "family is non-voracious: the variational constant computed here can \
             differ from the true threshold constant"
                .to_string(),
        );
    }
    let analysis_ok = report.alpha.is_some();
    stages.push(Stage {
        name: "analyze".into(),
        status: if analysis_ok { "ok" } else { "inconclusive" }.into(),
        outputs: vec![report_path.display().to_string()],
        notes,
    });

    // stage 2: h estimation + extrapolation
    let (h_fn, lambda_stage_ready) = if let Some(_alpha) = report.alpha {
        let u = *report
            .s_alpha
            .first()
            .ok_or_else(|| CliError::Inconclusive("empty S_α".into()))?;
        let mut tables = Vec::new();
        let mut outputs = Vec::new();
        for (i, &p) in ps.iter().enumerate() {
            let t = estimate_h(&fam, u, p, &grid, a.n, a.reps, a.seed.wrapping_add(i as u64))
                .map_err(|e| CliError::Inconclusive(e.to_string()))?;
            let path = dir.join(format!("htable_p{p}.json"));
            write_file(&path, &to_json(&with_schema(&t)))?;
            outputs.push(path.display().to_string());
            tables.push(t);
        }
        match h_limit_table(&tables) {
            Ok(limit) => {
                let path = dir.join("htable_limit.json");
                write_file(&path, &to_json(&with_schema(&limit)))?;
                outputs.push(path.display().to_string());
                let usable = limit.points();
                let h = HFunction::from_points(usable)
                    .map_err(|e| CliError::Inconclusive(e.to_string()))?;
                stages.push(Stage {
                    name: "estimate-h".into(),
                    status: "ok".into(),
                    outputs,
                    notes: vec![],
                });
                (Some(h), true)
            }
            Err(e) => {
                inconclusive = true;
                stages.push(Stage {
                    name: "estimate-h".into(),
                    status: format!("inconclusive ({e})"),
                    outputs,
                    notes: vec![],
                });
                (None, false)
            }
        }
    } else {
        inconclusive = true;
        stages.push(Stage {
            name: "estimate-h".into(),
            status: "skipped (no finite α)".into(),
            outputs: vec![],
            notes: vec![],
        });
        (None, false)
    };

    // stage 3: λ solve
    let mut lambda_hat = None;
    if lambda_stage_ready {
        match s_alpha_frame(&fam) {
            Ok((frame, _)) => {
                let assignment = HAssignment::uniform(&frame, h_fn.expect("stage gated"));
                let opts = MinimizeOptions {
                    starts: a.starts,
                    steps: a.steps,
                    seed: a.seed,
                    ..MinimizeOptions::default()
                };
                match minimize_lambda(&frame, &assignment, &opts) {
                    Ok(res) => {
                        lambda_hat = Some(res.lambda);
                        let path = dir.join("lambda.json");
                        write_file(&path, &to_json(&with_schema(&res)))?;
                        stages.push(Stage {
                            name: "solve-lambda".into(),
                            status: "ok".into(),
                            outputs: vec![path.display().to_string()],
                            notes: vec![],
                        });
                    }
                    Err(e) => {
                        inconclusive = true;
                        stages.push(Stage {
                            name: "solve-lambda".into(),
                            status: format!("inconclusive ({e})"),
                            outputs: vec![],
                            notes: vec![],
                        });
                    }
                }
            }
            Err(e) => {
                inconclusive = true;
                stages.push(Stage {
                    name: "solve-lambda".into(),
                    status: format!("skipped ({e})"),
                    outputs: vec![],
                    notes: vec![],
                });
            }
        }
    } else {
        inconclusive = true;
        stages.push(Stage {
            name: "solve-lambda".into(),
            status: "skipped (h estimation incomplete)".into(),
            outputs: vec![],
            notes: vec![],
        });
    }

    // stage 4: τ scaling
    match scaling_report(&fam, &scaling_ps, a.l, a.tau_reps, a.seed, lambda_hat) {
        Ok(rep) => {
            let csv_path = dir.join("scaling.csv");
            let json_path = dir.join("scaling.json");
            write_file(&csv_path, &scaling_csv(&rep))?;
            write_file(&json_path, &to_json(&rep))?;
            stages.push(Stage {
                name: "scaling".into(),
                status: "ok".into(),
                outputs: vec![
                    csv_path.display().to_string(),
                    json_path.display().to_string(),
                ],
                notes: vec![],
            });
        }
        Err(e) => {
            inconclusive = true;
            stages.push(Stage {
                name: "scaling".into(),
                status: format!("skipped ({e})"),
                outputs: vec![],
                notes: vec![],
            });
        }
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: a.seed,
        config_hash,
        config,
        stages,
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest))?;
    if inconclusive {
        return Err(CliError::Inconclusive(
            "one or more pipeline stages did not complete; see manifest.json".into(),
        ));
    }
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").expect("string write");
        s
    })
}

// --- plotting -----------------------------------------------------------------

/// Minimal self-contained SVG scatter/line plot.
fn svg_plot(
    points: &[(f64, f64)],
    hline: Option<f64>,
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> String {
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let (x0, x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ys.extend(hline);
    let (y0, y1) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
            (a.min(y), b.max(y))
        });
    let pad = |lo: f64, hi: f64| {
        let d = (hi - lo).max(1e-9) * 0.08;
        (lo - d, hi + d)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n\
         <line x1=\"{ml}\" y1=\"{by}\" x2=\"{rx}\" y2=\"{by}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{by}\" stroke=\"black\"/>\n\
         <text x=\"{tx}\" y=\"{lby}\" text-anchor=\"middle\">{xlabel}</text>\n\
         <text x=\"18\" y=\"{my}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {my})\">{ylabel}</text>\n",
        tx = (ml + w - mr) / 2.0,
        by = h - mb,
        rx = w - mr,
        lby = h - 12.0,
        my = (mt + h - mb) / 2.0,
    );
    for &(x, tick) in &[(x0, x0), (x1, x1)] {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{tick:.4}</text>",
            sx(x),
            h - mb + 18.0
        );
    }
    for &(y, tick) in &[(y0, y0), (y1, y1)] {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{tick:.4}</text>",
            ml - 6.0,
            sy(y) + 4.0
        );
    }
    if let Some(yy) = hline {
        let _ = writeln!(
            svg,
            "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"crimson\" stroke-dasharray=\"6 4\"/>",
            sy(yy),
            w - mr
        );
    }
    if points.len() > 1 {
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>",
            path.join(" ")
        );
    }
    for &(x, y) in points {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"steelblue\"/>",
            sx(x),
            sy(y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
