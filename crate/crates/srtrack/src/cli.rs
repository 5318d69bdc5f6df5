//! Command-line front end: one binary exposing the full pipeline as
//! subcommands over files. All intermediate artifacts are files (`SRF1`
//! fields, PGM images, CSV curves, JSON reports), so each stage can be run
//! and inspected independently.
//!
//! Exit codes: 0 on success, 1 on domain errors, 2 on usage errors.
//! Floating-point output is printed with 17 significant digits.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::cost::{self, CostParams};
use crate::eikonal::{self, EikonalProblem, SolveMode, SolveOptions};
use crate::error::{Error, Result};
use crate::fields::ScalarField3;
use crate::geometry::MetricParams;
use crate::maxwell::{self, StageOptions};
use crate::phantom::{self, PhantomKind, PhantomParams};
use crate::tracker::{self, BacktrackOptions};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "srtrack",
    version,
    about = "Sub-Riemannian geodesic tracking on the projective line bundle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a cost field from a grayscale PGM image.
    Cost(CostArgs),
    /// Solve the eikonal problem for a distance map.
    Solve(SolveArgs),
    /// Backtrack a geodesic on a distance map.
    Track(TrackArgs),
    /// Compare the four antipodal assignments against the projective track.
    Compare(CompareArgs),
    /// Probe Maxwell strata on a full-group distance map.
    Maxwell(MaxwellArgs),
    /// Solve the critical-radius system of elliptic equations.
    Rtilde(RtildeArgs),
    /// Time the projective solve against the two-seed full-group solve.
    Bench(BenchArgs),
    /// Render a deterministic synthetic vessel image.
    Phantom(PhantomArgs),
}

#[derive(Args)]
struct CostArgs {
    /// Input PGM image (P2 or P5).
    #[arg(long)]
    image: PathBuf,
    /// Orientation samples on [0, pi).
    #[arg(long, default_value_t = 32)]
    ntheta: usize,
    /// Cost strength.
    #[arg(long, default_value_t = 100.0)]
    lambda: f64,
    /// Contrast exponent.
    #[arg(long, default_value_t = 3.0)]
    p: f64,
    /// Filter scale along the orientation (pixels).
    #[arg(long, default_value_t = 3.0)]
    sigma_long: f64,
    /// Filter scale across the orientation (pixels).
    #[arg(long, default_value_t = 1.0)]
    sigma_short: f64,
    /// Crosswise vesselness scale (pixels).
    #[arg(long, default_value_t = 2.0)]
    sigma_a3: f64,
    /// Positive floor of the cost field.
    #[arg(long, default_value_t = 1e-3)]
    c_min: f64,
    /// Worker threads for the orientation filtering.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output cost field (SRF1).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Input cost field (SRF1).
    #[arg(long)]
    cost: PathBuf,
    /// Solve space: "se2" (2-pi grid) or "pt" (pi grid).
    #[arg(long, default_value = "pt")]
    mode: String,
    /// Spatial anisotropy.
    #[arg(long, default_value_t = 0.01)]
    xi: f64,
    /// Metric relaxation (> 0).
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Seed point "x,y,theta" (repeatable; numbers accept a "pi" suffix).
    #[arg(long, required = true)]
    seed: Vec<String>,
    /// Convergence tolerance on the per-cycle sup change
    /// (default: 1e-8 x domain diameter).
    #[arg(long)]
    tol: Option<f64>,
    /// Sweep cycle budget.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// 1 = sequential sweeps; > 1 = parallel Jacobi passes.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Nested seed-refinement levels.
    #[arg(long, default_value_t = 0)]
    seed_refine: usize,
    /// Output distance map (SRF1).
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON convergence report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TrackArgs {
    /// Distance map (SRF1).
    #[arg(long)]
    dist: PathBuf,
    /// Cost field the map was solved with (SRF1).
    #[arg(long)]
    cost: PathBuf,
    /// Spatial anisotropy.
    #[arg(long, default_value_t = 0.01)]
    xi: f64,
    /// Metric relaxation.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Start point "x,y,theta".
    #[arg(long)]
    start: String,
    /// Step length as a fraction of the smallest grid spacing.
    #[arg(long, default_value_t = 0.4)]
    step_factor: f64,
    /// Stop once W falls below this (default: 2% of W at the start).
    #[arg(long)]
    stop_radius: Option<f64>,
    /// Output stem; writes STEM.csv and STEM.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Cost field (SRF1); a pi-periodic field is unfolded for the
    /// full-group runs, a 2-pi field is folded for the projective run.
    #[arg(long)]
    cost: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    xi: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Seed endpoint "x,y,theta".
    #[arg(long)]
    p0: String,
    /// Tracked endpoint "x,y,theta".
    #[arg(long)]
    p1: String,
    /// Solver tolerance (default: 1e-8 x domain diameter).
    #[arg(long)]
    tol: Option<f64>,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaxwellArgs {
    /// Full-group distance map from a single identity seed (SRF1).
    #[arg(long)]
    dist: PathBuf,
    /// Radii to probe, e.g. "0.4pi,0.75pi,1.2pi".
    #[arg(long)]
    radii: String,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Sphere band (default: 1.5 x the largest grid spacing).
    #[arg(long)]
    band: Option<f64>,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of the antipodal-equality points (x,y,theta,W).
    #[arg(long)]
    m2_csv: Option<PathBuf>,
}

#[derive(Args)]
struct RtildeArgs {
    /// Emit JSON instead of the plain table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// pi-symmetric cost field (SRF1); a pi-periodic field is unfolded to
    /// the full grid first.
    #[arg(long)]
    cost: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    xi: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Seed point "x,y,theta".
    #[arg(long)]
    seed: String,
    #[arg(long)]
    tol: Option<f64>,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    /// Phantom kind: line, scurve or crossing.
    #[arg(long)]
    kind: String,
    /// Image side length in pixels.
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Ridge angle (radians; accepts a "pi" suffix).
    #[arg(long, default_value = "0")]
    angle: String,
    /// Second ridge angle for "crossing".
    #[arg(long, default_value = "0.5pi")]
    angle2: String,
    /// S-curve amplitude as a fraction of the size.
    #[arg(long, default_value_t = 0.22)]
    amplitude: f64,
    /// Gaussian ridge width (pixels).
    #[arg(long, default_value_t = 1.5)]
    width: f64,
    /// Output PGM image.
    #[arg(long)]
    out: PathBuf,
}

/// Parses the command line and executes it, returning the process exit
/// code: 0 success, 1 domain error, 2 usage error.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Error::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Cost(args) => run_cost(args),
        Command::Solve(args) => run_solve(args),
        Command::Track(args) => run_track(args),
        Command::Compare(args) => run_compare(args),
        Command::Maxwell(args) => run_maxwell(args),
        Command::Rtilde(args) => run_rtilde(args),
        Command::Bench(args) => run_bench(args),
        Command::Phantom(args) => run_phantom(args),
    }
}

/// Scalar with an optional "pi" suffix: "0.75pi", "pi", "-pi" or plain.
fn parse_scalar(s: &str) -> Result<f64> {
    let t = s.trim();
    let parse_plain = |p: &str| -> Result<f64> {
        p.parse()
            .map_err(|_| Error::Usage(format!("cannot parse number {p:?}")))
    };
    if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim();
        let factor = match head {
            "" => 1.0,
            "-" => -1.0,
            other => parse_plain(other)?,
        };
        Ok(factor * PI)
    } else {
        parse_plain(t)
    }
}

fn parse_point(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!("expected \"x,y,theta\", got {s:?}")));
    }
    Ok((
        parse_scalar(parts[0])?,
        parse_scalar(parts[1])?,
        parse_scalar(parts[2])?,
    ))
}

fn parse_radii(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_scalar).collect()
}

fn load_field(path: &Path) -> Result<ScalarField3> {
    ScalarField3::load_srf1(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}

/// 17 significant digits; non-finite values become JSON null.
fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn run_cost(args: CostArgs) -> Result<()> {
    let img = cost::load_pgm(&read_bytes(&args.image)?)?;
    let prm = CostParams {
        lambda: args.lambda,
        p: args.p,
        ntheta: args.ntheta,
        sigma_long: args.sigma_long,
        sigma_short: args.sigma_short,
        sigma_a3: args.sigma_a3,
    };
    let score = cost::orientation_lift_threaded(&img, &prm, args.threads)?;
    let ves = cost::vesselness(&score, prm.sigma_a3)?;
    let field = cost::cost_map(&ves, &prm, args.c_min)?;
    field.save_srf1(&args.out)?;
    eprintln!(
        "cost field {}x{}x{} written to {}",
        field.spec().nx,
        field.spec().ny,
        field.spec().ntheta,
        args.out.display()
    );
    Ok(())
}

fn parse_mode(s: &str) -> Result<SolveMode> {
    match s {
        "se2" => Ok(SolveMode::Se2),
        "pt" => Ok(SolveMode::Pt),
        other => Err(Error::Usage(format!(
            "unknown mode {other:?} (expected \"se2\" or \"pt\")"
        ))),
    }
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let cost = load_field(&args.cost)?;
    let mode = parse_mode(&args.mode)?;
    let seeds: Vec<(f64, f64, f64)> = args
        .seed
        .iter()
        .map(|s| parse_point(s))
        .collect::<Result<_>>()?;
    let prob = EikonalProblem::new(&cost, args.xi, args.eps, &seeds, mode)?;
    let opts = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        threads: args.threads,
        seed_refine_levels: args.seed_refine,
        ..SolveOptions::default()
    };
    let (w, report) = eikonal::solve(&prob, &opts)?;
    w.save_srf1(&args.out)?;
    if let Some(report_path) = &args.report {
        let json = format!(
            "{{\"schema_version\":{SCHEMA_VERSION},\"iterations\":{},\"final_residual\":{},\"wall_time\":{},\"converged\":{}}}\n",
            report.iterations,
            fmt_f64(report.final_residual),
            fmt_f64(report.wall_time),
            report.converged
        );
        write_bytes(report_path, json.as_bytes())?;
    }
    eprintln!(
        "solved in {} cycles ({:.2}s), map written to {}",
        report.iterations,
        report.wall_time,
        args.out.display()
    );
    Ok(())
}

fn curve_json(curve: &tracker::GeodesicCurve, cusps: &tracker::CuspReport) -> String {
    let times: Vec<String> = cusps.cusp_times.iter().map(|t| fmt_f64(*t)).collect();
    format!(
        "{{\"schema_version\":{SCHEMA_VERSION},\"length\":{},\"cusp_times\":[{}],\"degenerate\":{},\"mode\":\"{}\"}}\n",
        fmt_f64(curve.total_length),
        times.join(","),
        cusps.degenerate,
        curve.mode
    )
}

fn curve_csv(curve: &tracker::GeodesicCurve) -> String {
    let mut out = String::from("t,x,y,theta,u1,u2\n");
    for s in &curve.samples {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(s.t),
            fmt_f64(s.x),
            fmt_f64(s.y),
            fmt_f64(s.theta),
            fmt_f64(s.u1),
            fmt_f64(s.u2)
        ));
    }
    out
}

fn run_track(args: TrackArgs) -> Result<()> {
    let w = load_field(&args.dist)?;
    let cost = load_field(&args.cost)?;
    let metric = MetricParams::new(args.xi, args.eps, &cost)?;
    let start = parse_point(&args.start)?;
    let opts = BacktrackOptions {
        step_factor: args.step_factor,
        stop_radius: args.stop_radius,
        ..BacktrackOptions::default()
    };
    let curve = tracker::backtrack(&w, &metric, start, &opts)?;
    let cusps = tracker::detect_cusps(&curve, None)?;
    let csv_path = args.out.with_extension("csv");
    let json_path = args.out.with_extension("json");
    write_bytes(&csv_path, curve_csv(&curve).as_bytes())?;
    write_bytes(&json_path, curve_json(&curve, &cusps).as_bytes())?;
    eprintln!(
        "curve with {} samples (length {:.6}, {} cusps) written to {} / {}",
        curve.samples.len(),
        curve.total_length,
        cusps.count,
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let cost = load_field(&args.cost)?;
    let cost_2pi = if cost.spec().is_projective() {
        cost.unfold_to_se2()?
    } else {
        cost
    };
    let p0 = parse_point(&args.p0)?;
    let p1 = parse_point(&args.p1)?;
    let solve_opts = SolveOptions {
        tol: args.tol,
        ..SolveOptions::default()
    };
    let cmp = tracker::compare_modes(
        &cost_2pi,
        args.xi,
        args.eps,
        p0,
        p1,
        &solve_opts,
        &BacktrackOptions::default(),
    )?;
    let se2: Vec<String> = cmp
        .se2
        .iter()
        .map(|a| {
            format!(
                "{{\"seed_flipped\":{},\"end_flipped\":{},\"length\":{},\"cusps\":{},\"degenerate\":{}}}",
                a.seed_flipped, a.end_flipped, fmt_f64(a.length), a.cusp_count, a.degenerate
            )
        })
        .collect();
    let json = format!(
        "{{\"schema_version\":{SCHEMA_VERSION},\"tolerance\":{},\"pt\":{{\"length\":{},\"cusps\":{},\"degenerate\":{}}},\"se2\":[{}]}}\n",
        fmt_f64(cmp.tolerance),
        fmt_f64(cmp.pt_length),
        cmp.pt_cusp_count,
        cmp.pt_degenerate,
        se2.join(",")
    );
    write_bytes(&args.out, json.as_bytes())?;
    eprintln!(
        "PT length {:.6} ({} cusps) vs best SE(2) {:.6}; report written to {}",
        cmp.pt_length,
        cmp.pt_cusp_count,
        cmp.min_se2_length(),
        args.out.display()
    );
    Ok(())
}

fn run_maxwell(args: MaxwellArgs) -> Result<()> {
    let w = load_field(&args.dist)?;
    let radii = parse_radii(&args.radii)?;
    let opts = StageOptions {
        band: args.band,
        ..StageOptions::default()
    };
    let rows = maxwell::stage_report(&w, args.xi, args.eps, &radii, &opts)?;
    let rows_json: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{{\"radius\":{},\"m2_present\":{},\"max_multiplicity\":{},\"m3_proxy_count\":{}}}",
                fmt_f64(r.radius),
                r.m2_present,
                r.max_multiplicity,
                r.m3_proxy_count
            )
        })
        .collect();
    let band = args.band.unwrap_or(1.5 * w.spec().max_spacing());
    let json = format!(
        "{{\"schema_version\":{SCHEMA_VERSION},\"band\":{},\"rows\":[{}]}}\n",
        fmt_f64(band),
        rows_json.join(",")
    );
    write_bytes(&args.out, json.as_bytes())?;

    if let Some(csv_path) = &args.m2_csv {
        let m2 = maxwell::maxwell_m2(&w, 2.0 * w.spec().max_spacing())?;
        let mut csv = String::from("x,y,theta,W\n");
        for p in &m2.points {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(p.x),
                fmt_f64(p.y),
                fmt_f64(p.theta),
                fmt_f64(p.radius)
            ));
        }
        write_bytes(csv_path, csv.as_bytes())?;
    }
    eprintln!("stage report written to {}", args.out.display());
    Ok(())
}

fn run_rtilde(args: RtildeArgs) -> Result<()> {
    let sol = crate::elliptic::solve_rtilde()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if args.json {
        writeln!(
            out,
            "{{\"schema_version\":{SCHEMA_VERSION},\"k1\":{},\"k2\":{},\"p1_of_k2\":{},\"rtilde\":{},\"rtilde_over_pi\":{},\"residual1\":{},\"residual2\":{}}}",
            fmt_f64(sol.k1),
            fmt_f64(sol.k2),
            fmt_f64(sol.p1_of_k2),
            fmt_f64(sol.rtilde),
            fmt_f64(sol.rtilde / PI),
            fmt_f64(sol.residual1),
            fmt_f64(sol.residual2),
        )?;
    } else {
        writeln!(out, "k1         = {}", fmt_f64(sol.k1))?;
        writeln!(out, "k2         = {}", fmt_f64(sol.k2))?;
        writeln!(out, "p1(k2)     = {}", fmt_f64(sol.p1_of_k2))?;
        writeln!(out, "Rtilde     = {}", fmt_f64(sol.rtilde))?;
        writeln!(out, "Rtilde/pi  = {}", fmt_f64(sol.rtilde / PI))?;
        writeln!(out, "residual1  = {}", fmt_f64(sol.residual1))?;
        writeln!(out, "residual2  = {}", fmt_f64(sol.residual2))?;
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let cost = load_field(&args.cost)?;
    let cost_2pi = if cost.spec().is_projective() {
        cost.unfold_to_se2()?
    } else {
        cost
    };
    let seed = parse_point(&args.seed)?;
    let opts = SolveOptions {
        tol: args.tol,
        ..SolveOptions::default()
    };
    let bench = eikonal::bench_pt_vs_se2(&cost_2pi, args.xi, args.eps, seed, &opts)?;
    let json = format!(
        "{{\"schema_version\":{SCHEMA_VERSION},\"se2_wall_time\":{},\"pt_wall_time\":{},\"se2_iterations\":{},\"pt_iterations\":{},\"max_abs_discrepancy\":{},\"speedup\":{}}}\n",
        fmt_f64(bench.se2_wall_time),
        fmt_f64(bench.pt_wall_time),
        bench.se2_iterations,
        bench.pt_iterations,
        fmt_f64(bench.max_abs_discrepancy),
        fmt_f64(bench.speedup),
    );
    write_bytes(&args.out, json.as_bytes())?;
    eprintln!(
        "SE(2) {:.2}s vs PT {:.2}s (speedup {:.2}x), report written to {}",
        bench.se2_wall_time,
        bench.pt_wall_time,
        bench.speedup,
        args.out.display()
    );
    Ok(())
}

fn run_phantom(args: PhantomArgs) -> Result<()> {
    let kind: PhantomKind = args.kind.parse()?;
    let prm = PhantomParams {
        size: args.size,
        angle: parse_scalar(&args.angle)?,
        angle2: parse_scalar(&args.angle2)?,
        amplitude: args.amplitude,
        ridge_width: args.width,
    };
    let img = phantom::phantom(kind, &prm)?;
    write_bytes(&args.out, &cost::write_pgm(&img))?;
    eprintln!(
        "{}x{} phantom written to {}",
        img.width,
        img.height,
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(std::iter::once("srtrack".to_string()).chain(args.iter().map(|s| s.to_string())))
    }

    #[test]
    fn scalar_parser_handles_pi_suffix() {
        assert_eq!(parse_scalar("0.5pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_scalar("pi").unwrap(), PI);
        assert_eq!(parse_scalar("-pi").unwrap(), -PI);
        assert_eq!(parse_scalar("1.25").unwrap(), 1.25);
        assert!(parse_scalar("banana").is_err());
    }

    #[test]
    fn point_parser() {
        assert_eq!(parse_point("1,2,0.5pi").unwrap(), (1.0, 2.0, 0.5 * PI));
        assert!(parse_point("1,2").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run_args(&["rtilde", "--bogus"]), 2);
        assert_eq!(run_args(&["no-such-command"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run_args(&["--help"]), 0);
        assert_eq!(run_args(&["solve", "--help"]), 0);
    }

    #[test]
    fn missing_input_file_is_domain_error() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("w.srf1");
        assert_eq!(
            run_args(&[
                "solve",
                "--cost",
                "/definitely/not/here.srf1",
                "--seed",
                "0,0,0",
                "--out",
                out.to_str().unwrap(),
            ]),
            1
        );
    }

    #[test]
    fn rtilde_runs() {
        assert_eq!(run_args(&["rtilde"]), 0);
        assert_eq!(run_args(&["rtilde", "--json"]), 0);
    }
}
