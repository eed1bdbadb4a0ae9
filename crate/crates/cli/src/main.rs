//! `spikelab`: command-line driver.
//!
//! Exit status: 0 success, 1 configuration error, 2 solver failure or a
//! failed property check, 3 empty boundary gap, 4 saddle divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use spikelab::config::{OutputFormat, Resolved, RunConfig};
use spikelab::io::OutputWriter;
use spikelab::limit_problem::{m_curve, solve_ground_state, GroundStateSummary, ShootingOptions};
use spikelab::minmax::{degree_scan, degree_trace, sweep_csv, ConeSampler, SweepRow};
use spikelab::nonlinearity::{truncation_property_suite, ArReport, NonlinearityKind, PropertyCheck};
use spikelab::pipeline::{common_degree, limit, run_spike, study_report, SpikeRun, SpikeSummary, StudyReport};
use spikelab::potential::{check_v0, classify_critical_point, select_radius_r1, RadiusOptions};
use spikelab::Error;

#[derive(Parser)]
#[command(name = "spikelab", version, about = "Semiclassical spike solver")]
struct Cli {
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid points per axis (overrides `grid.n`).
    #[arg(long, global = true)]
    n: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Radial ground state of the limit problem.
    GroundState {
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Also tabulate m_k over `lo:hi:count`.
        #[arg(long)]
        mcurve: Option<String>,
    },
    /// Table of m_k over `lo:hi:count`.
    Mcurve {
        #[arg(long, default_value = "0.5:4:8")]
        range: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Truncation property suite and hypothesis checks on f.
    TruncationCheck {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Bounds, critical point classification and R1 selection for V.
    PotentialCheck,
    /// Full pipeline at one eps.
    Spike {
        #[arg(long)]
        eps: f64,
    },
    /// Pipeline over the sweep list, in parallel.
    Sweep {
        /// Comma-separated eps values (overrides `sweep.eps_list`)
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
    },
    /// Brouwer degree of the barycenter map on the cone boundary.
    Degree {
        #[arg(long)]
        eps: f64,
    },
    /// Convergence table from the spike summaries of an earlier sweep.
    Report {
        /// Directory holding `spike_eps*.json`; defaults to the output dir.
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

struct Ctx {
    config: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn writer(&self, command: &str) -> Result<OutputWriter, Error> {
        OutputWriter::new(&self.out, command, &self.config)
    }

    fn csv(&self) -> bool {
        self.config.output.wants(OutputFormat::Csv)
    }

    fn json(&self) -> bool {
        self.config.output.wants(OutputFormat::Json)
    }

    fn bin(&self) -> bool {
        self.config.output.wants(OutputFormat::Bin)
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("range must be lo:hi:count, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo) || count < 2 {
        return Err(bad());
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

fn threads() -> Result<Option<usize>, Error> {
    match std::env::var("SPIKELAB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("SPIKELAB_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn say(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn emit<T: Serialize>(value: &T) -> Result<(), Error> {
    say(&(serde_json::to_string_pretty(value)? + "\n"));
    Ok(())
}

#[derive(Serialize)]
struct GroundStateReport {
    #[serde(flatten)]
    summary: GroundStateSummary,
    half_grad_norm_sq: f64,
    h1_norm: f64,
}

fn mcurve_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("k,m_k\n");
    for (k, m) in rows {
        s.push_str(&format!("{k},{m}\n"));
    }
    s
}

fn mcurve_table(ctx: &Ctx, range: &str, dim: usize, w: &mut OutputWriter) -> Result<(), Error> {
    let ks = parse_range(range)?;
    let rows = m_curve(&ks, &ctx.config.nonlinearity, dim, &ShootingOptions::default())?;
    if !rows.windows(2).all(|p| p[1].1 > p[0].1) {
        return Err(Error::Degenerate("m_k is not strictly increasing on the sampled grid".into()));
    }
    if ctx.csv() {
        w.write_str("mcurve.csv", &mcurve_csv(&rows))?;
    }
    say(&mcurve_csv(&rows));
    Ok(())
}

fn cmd_ground_state(ctx: &Ctx, k: f64, dim: usize, mcurve: Option<&str>) -> Result<(), Error> {
    ctx.config.resolve()?;
    ctx.config.nonlinearity.validate(dim)?;
    if !(k > 0.0) {
        return Err(Error::Config(format!("k must be positive, got {k}")));
    }
    let gs = solve_ground_state(k, &ctx.config.nonlinearity, dim, &ShootingOptions::default())?;
    let report = GroundStateReport {
        summary: gs.summary(),
        half_grad_norm_sq: 0.5 * gs.grad_norm_sq,
        h1_norm: gs.h1_norm(),
    };
    let mut w = ctx.writer("ground-state")?;
    if ctx.json() {
        w.write_json("ground_state.json", &report)?;
    }
    if ctx.csv() {
        w.write_str("profile.csv", &gs.profile.to_csv())?;
    }
    emit(&report)?;
    if let Some(r) = mcurve {
        mcurve_table(ctx, r, dim, &mut w)?;
    }
    Ok(())
}

fn cmd_mcurve(ctx: &Ctx, range: &str, dim: usize) -> Result<(), Error> {
    ctx.config.resolve()?;
    ctx.config.nonlinearity.validate(dim)?;
    let mut w = ctx.writer("mcurve")?;
    mcurve_table(ctx, range, dim, &mut w)
}

#[derive(Serialize)]
struct TruncationReport {
    a: f64,
    crossover_r: f64,
    closed_form_r: Option<f64>,
    ambrosetti_rabinowitz: ArReport,
    properties: Vec<PropertyCheck>,
    passes: bool,
}

fn cmd_truncation_check(ctx: &Ctx, samples: usize) -> Result<(), Error> {
    let resolved = ctx.config.resolve()?;
    let comp = &resolved.composite;
    let spec = &comp.trunc.spec;
    let properties = truncation_property_suite(comp, resolved.potential.dim, samples, 7);
    let ar = spec.check_ambrosetti_rabinowitz();
    let closed_form_r = (spec.kind == NonlinearityKind::PurePower)
        .then(|| (comp.params.a / spec.coefficients[0]).powf(1.0 / (spec.exponents[0] - 1.0)));
    let passes = ar.holds && properties.iter().all(|p| p.passed);
    let report = TruncationReport {
        a: comp.params.a,
        crossover_r: comp.trunc.r,
        closed_form_r,
        ambrosetti_rabinowitz: ar,
        properties,
        passes,
    };
    let mut w = ctx.writer("truncation-check")?;
    if ctx.json() {
        w.write_json("truncation_check.json", &report)?;
    }
    emit(&report)?;
    if !passes {
        return Err(Error::Degenerate("truncation property check failed".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckOutcome<T: Serialize> {
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl<T: Serialize> CheckOutcome<T> {
    fn from(r: Result<T, Error>) -> (Self, Option<Error>) {
        match r {
            Ok(v) => (
                Self {
                    passed: true,
                    value: Some(v),
                    error: None,
                },
                None,
            ),
            Err(e) => (
                Self {
                    passed: false,
                    value: None,
                    error: Some(e.to_string()),
                },
                Some(e),
            ),
        }
    }
}

#[derive(Serialize)]
struct PotentialReport {
    alpha1: f64,
    alpha2: f64,
    bounds: CheckOutcome<spikelab::potential::BoundReport>,
    critical_point: CheckOutcome<spikelab::potential::CriticalPointClass>,
    radius_r1: CheckOutcome<f64>,
}

fn cmd_potential_check(ctx: &Ctx) -> Result<(), Error> {
    ctx.config.validate_basic()?;
    let mut v = ctx.config.potential.spec.clone();
    v.rebuild();
    let half_width = 2.0 * ctx.config.truncation.radii[4] + 4.0;
    let (bounds, e1) = CheckOutcome::from(check_v0(&v, half_width, 10_000));
    let (critical_point, e2) = CheckOutcome::from(classify_critical_point(&v, 1e-10));
    let (radius_r1, e3) = CheckOutcome::from(select_radius_r1(
        &v,
        &ctx.config.r1_candidates(),
        &RadiusOptions::default(),
    ));
    let report = PotentialReport {
        alpha1: v.alpha1,
        alpha2: v.alpha2,
        bounds,
        critical_point,
        radius_r1,
    };
    let mut w = ctx.writer("potential-check")?;
    if ctx.json() {
        w.write_json("potential_check.json", &report)?;
    }
    emit(&report)?;
    match e1.or(e3).or(e2) {
        None => Ok(()),
        Some(Error::Degenerate(s)) => Err(Error::Config(s)),
        Some(e) => Err(e),
    }
}

fn eps_tag(eps: f64) -> String {
    format!("eps{eps}")
}

fn write_spike(ctx: &Ctx, w: &mut OutputWriter, run: &SpikeRun) -> Result<SpikeSummary, Error> {
    let tag = eps_tag(run.eps);
    let summary = run.summary();
    let u = &run.estimate.saddle.u_eps;
    if ctx.json() {
        w.write_json(&format!("spike_{tag}.json"), &summary)?;
    }
    if ctx.csv() {
        let (row, _) = u.argmax();
        w.write_str(&format!("slice_{tag}.csv"), &u.slice_csv(row))?;
    }
    if ctx.bin() {
        w.write_field(
            &format!("u_{tag}"),
            u,
            run.eps,
            "constrained saddle u_eps in rescaled coordinates",
        )?;
    }
    Ok(summary)
}

fn cmd_spike(ctx: &Ctx, eps: f64) -> Result<(), Error> {
    let resolved = ctx.config.resolve()?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Config(format!("eps {eps} outside (0, 1]")));
    }
    let lim = limit(&resolved)?;
    let run = run_spike(&resolved, &lim, eps, resolved.config.degree_points)?;
    let mut w = ctx.writer("spike")?;
    let summary = write_spike(ctx, &mut w, &run)?;
    emit(&summary)
}

fn write_study(ctx: &Ctx, w: &mut OutputWriter, study: &StudyReport) -> Result<(), Error> {
    if ctx.csv() {
        w.write_str("convergence.csv", &study.table.to_csv())?;
    }
    if ctx.json() {
        w.write_json("convergence.json", study)?;
    }
    w.write_str("convergence.txt", &study.table.to_text())?;
    say(&study.table.to_text());
    Ok(())
}

fn sweep_status(e: &Error) -> String {
    match e.exit_code() {
        3 => "boundary_gap".into(),
        4 => "saddle_divergence".into(),
        1 => "config_error".into(),
        _ => "solver_failure".into(),
    }
}

fn run_pool(resolved: &Resolved, eps_list: &[f64]) -> Result<Vec<Result<SpikeRun, Error>>, Error> {
    use rayon::prelude::*;
    let lim = limit(resolved)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let degree_points = resolved.config.degree_points;
    Ok(pool.install(|| {
        eps_list
            .par_iter()
            .map(|&eps| run_spike(resolved, &lim, eps, degree_points))
            .collect()
    }))
}

fn cmd_sweep(ctx: &Ctx) -> Result<(), Error> {
    let resolved = ctx.config.resolve()?;
    let eps_list = ctx.config.sweep.eps_list.clone();
    if eps_list.is_empty() {
        return Err(Error::Config("sweep.eps_list is empty".into()));
    }
    let results = run_pool(&resolved, &eps_list)?;
    let mut w = ctx.writer("sweep")?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut first_error: Option<Error> = None;
    for (eps, r) in eps_list.iter().zip(results) {
        match r {
            Ok(run) => {
                rows.push(run.sweep_row());
                summaries.push(write_spike(ctx, &mut w, &run)?);
            }
            Err(e) => {
                eprintln!("eps = {eps}: {e}");
                rows.push(SweepRow::failed(*eps, sweep_status(&e)));
                first_error.get_or_insert(e);
            }
        }
    }
    if ctx.csv() {
        w.write_str("sweep.csv", &sweep_csv(&rows))?;
    }
    if !summaries.is_empty() {
        let study = study_report(summaries[0].m, &summaries);
        write_study(ctx, &mut w, &study)?;
    }
    first_error.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct DegreeReport {
    eps: f64,
    degree: Option<i32>,
    degrees: Vec<(f64, i32)>,
    trace_t: f64,
}

fn cmd_degree(ctx: &Ctx, eps: f64) -> Result<(), Error> {
    let resolved = ctx.config.resolve()?;
    let lim = limit(&resolved)?;
    let problem = resolved.problem(eps)?;
    let sampler = ConeSampler::new(&problem, lim.curve.clone(), resolved.config.cone.clone());
    let degrees = degree_scan(&problem, &sampler, resolved.config.degree_points)?;
    let trace = degree_trace(&problem, &sampler, sampler.curve.t_ground)?;
    let report = DegreeReport {
        eps,
        degree: common_degree(&degrees),
        degrees,
        trace_t: trace.t,
    };
    let mut w = ctx.writer("degree")?;
    let tag = eps_tag(eps);
    if ctx.json() {
        w.write_json(&format!("degree_{tag}.json"), &report)?;
    }
    if ctx.csv() {
        w.write_str(&format!("degree_trace_{tag}.csv"), &trace.to_csv())?;
    }
    match report.degree {
        Some(d) => say(&format!("{d}\n")),
        None => say(&format!("mixed {:?}\n", report.degrees)),
    }
    Ok(())
}

fn read_summaries(dir: &Path) -> Result<Vec<SpikeSummary>, Error> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("spike_eps") && n.ends_with(".json") && !n.ends_with(".manifest.json"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?))
        .collect()
}

fn cmd_report(ctx: &Ctx, from: Option<&Path>) -> Result<(), Error> {
    ctx.config.validate_basic()?;
    let dir = from.unwrap_or(&ctx.out);
    let summaries = read_summaries(dir)?;
    if summaries.is_empty() {
        return Err(Error::Config(format!("no spike summaries in {}", dir.display())));
    }
    let study = study_report(summaries[0].m, &summaries);
    let mut w = ctx.writer("report")?;
    write_study(ctx, &mut w, &study)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.n {
        config.grid.n = n;
    }
    if let Cmd::Sweep { eps_list: Some(list) } = &cli.cmd {
        config.sweep.eps_list = list.clone();
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    let ctx = Ctx { config, out };
    match &cli.cmd {
        Cmd::GroundState { k, dim, mcurve } => cmd_ground_state(&ctx, *k, *dim, mcurve.as_deref()),
        Cmd::Mcurve { range, dim } => cmd_mcurve(&ctx, range, *dim),
        Cmd::TruncationCheck { samples } => cmd_truncation_check(&ctx, *samples),
        Cmd::PotentialCheck => cmd_potential_check(&ctx),
        Cmd::Spike { eps } => cmd_spike(&ctx, *eps),
        Cmd::Sweep { .. } => cmd_sweep(&ctx),
        Cmd::Degree { eps } => cmd_degree(&ctx, *eps),
        Cmd::Report { from } => cmd_report(&ctx, from.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
