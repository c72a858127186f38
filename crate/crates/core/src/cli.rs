//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 for configuration or input-data errors,
//! 2 for numerical failures during a run. On a numerical failure the files
//! written so far stay in place and the manifest is still emitted, so a
//! partial run can be inspected.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{Config, MetricChoice, FULL_SCALE_DPHI, FULL_SCALE_T_END};
use crate::error::KropinaError;
use crate::integrate::{integrate, Trajectory};
use crate::navigation::KropinaMetric;
use crate::output::{
    comparison_csv, fan_svg, isochrone_csv, isochrone_svg, points_csv, reachable_svg,
    trajectory_csv, OutputBundle, Series,
};
use crate::scenario::{
    compare_travel_times, fan_targets, generate_fan, isochrones, reachable_set, Fan, FanRay,
    FanSpec, ReachableSpec,
};
use crate::spray::geodesic_rhs;
use crate::verify;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Original,
    Generalized,
    Both,
}

impl From<MetricArg> for MetricChoice {
    fn from(m: MetricArg) -> MetricChoice {
        match m {
            MetricArg::Original => MetricChoice::Original,
            MetricArg::Generalized => MetricChoice::Generalized,
            MetricArg::Both => MetricChoice::Both,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "kropina",
    version,
    about = "Time-optimal navigation under winds as strong as the craft",
    after_help = "Defaults reproduce the built-in swirl scenario; see config keys in the README."
)]
struct Cli {
    /// TOML configuration file; command-line flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for CSV, SVG, and the manifest.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Which metric series to run.
    #[arg(long, global = true, value_enum)]
    metric: Option<MetricArg>,

    /// Initial heading in radians (geodesic).
    #[arg(long, global = true, value_name = "RAD", allow_hyphen_values = true)]
    phi0: Option<f64>,

    /// Heading step in radians; sweeps cover the full circle.
    #[arg(long, global = true, value_name = "RAD", allow_hyphen_values = true)]
    dphi: Option<f64>,

    /// Flow-time horizon.
    #[arg(long = "t-end", global = true, value_name = "T", allow_hyphen_values = true)]
    t_end: Option<f64>,

    /// Relative tolerance of the step controller.
    #[arg(long = "rel-tol", global = true, value_name = "TOL", allow_hyphen_values = true)]
    rel_tol: Option<f64>,

    /// Also render SVG figures.
    #[arg(long, global = true)]
    svg: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the metric and the geodesic acceleration at one state.
    Eval {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        vx: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vy: f64,
    },
    /// Integrate one geodesic ray from the sweep origin.
    Geodesic,
    /// Sweep a fan of geodesics over equally spaced headings.
    Fan,
    /// Trace fixed-time fronts across a dense fan.
    Isochrone,
    /// Cover the reachable region with a dense long-horizon sweep.
    Reachable {
        /// Use the fine sweep (heading step pi/720, horizon 500).
        #[arg(long)]
        full_scale: bool,
    },
    /// Compare travel times to shared targets under both metrics.
    Compare,
    /// Run the built-in invariant checks and print a pass/fail table.
    Verify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval { .. } => "eval",
            Command::Geodesic => "geodesic",
            Command::Fan => "fan",
            Command::Isochrone => "isochrone",
            Command::Reachable { .. } => "reachable",
            Command::Compare => "compare",
            Command::Verify => "verify",
        }
    }
}

fn exit_code(e: &KropinaError) -> i32 {
    match e {
        KropinaError::Config { .. }
        | KropinaError::Io { .. }
        | KropinaError::DimensionMismatch { .. }
        | KropinaError::NonFiniteCoordinates { .. }
        | KropinaError::NormMismatch { .. }
        | KropinaError::NonPositiveSpeed { .. }
        | KropinaError::BadInitialState { .. }
        | KropinaError::ExcludedHeading { .. }
        | KropinaError::EmptyInput { .. } => 1,
        _ => 2,
    }
}

/// Resolve the configuration from file and flags. The `--full-scale` switch
/// applies before the explicit flags, so `--dphi`/`--t-end` still win.
fn resolve(cli: &Cli) -> Result<Config, KropinaError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(m) = cli.metric {
        cfg.scenario.metric = m.into();
    }
    if let Some(p) = cli.phi0 {
        cfg.sweep.phi0 = p;
    }
    if let Command::Reachable { full_scale: true } = cli.command {
        cfg.reachable.dphi = FULL_SCALE_DPHI;
        cfg.reachable.t_end = FULL_SCALE_T_END;
        eprintln!(
            "warning: full-scale sweep integrates {} rays to t = {}; expect a long run",
            (2.0 * PI / FULL_SCALE_DPHI).round() as usize,
            FULL_SCALE_T_END
        );
    }
    if let Some(d) = cli.dphi {
        if !(d.is_finite() && d > 0.0) {
            return Err(KropinaError::Config {
                detail: format!("--dphi must be a positive angle, got {d}"),
            });
        }
        cfg.sweep.dphi = d;
        cfg.sweep.count = ((2.0 * PI / d).round() as usize).max(1);
        cfg.reachable.dphi = d;
    }
    if let Some(t) = cli.t_end {
        if !(t.is_finite() && t > 0.0) {
            return Err(KropinaError::Config {
                detail: format!("--t-end must be positive, got {t}"),
            });
        }
        cfg.integrate.t_end = t;
        cfg.reachable.t_end = t;
        cfg.compare.t_end = t;
    }
    if let Some(r) = cli.rel_tol {
        if !(r.is_finite() && r > 0.0) {
            return Err(KropinaError::Config {
                detail: format!("--rel-tol must be positive, got {r}"),
            });
        }
        cfg.integrate.rel_tol = r;
        cfg.integrate.abs_tol = r * 1e-2;
        cfg.compare.rel_tol = r;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    if cli.svg {
        cfg.output.svg = true;
    }
    Ok(cfg)
}

/// The metric series selected by the configuration, labeled for file names.
fn selected_metrics(
    cfg: &Config,
) -> Result<Vec<(&'static str, Series, KropinaMetric)>, KropinaError> {
    let (original, generalized) = cfg.metric_pair()?;
    let mut out = Vec::new();
    if cfg.scenario.metric.wants_original() {
        out.push(("original", Series::Original, original));
    }
    if cfg.scenario.metric.wants_generalized() {
        out.push(("generalized", Series::Generalized, generalized));
    }
    Ok(out)
}

fn single_ray_fan(phi0: f64, trajectory: Trajectory) -> Fan {
    Fan {
        rays: vec![FanRay { phi0, trajectory }],
        skipped: vec![],
    }
}

fn write_fan_csv(
    bundle: &mut OutputBundle,
    name: &str,
    metric: &KropinaMetric,
    fan: &Fan,
) -> Result<(), KropinaError> {
    let rays: Vec<(usize, f64, &Trajectory)> = fan
        .rays
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.phi0, &r.trajectory))
        .collect();
    let csv = trajectory_csv(metric, &rays)?;
    bundle.write(name, &csv)
}

fn run_geodesic(cfg: &Config, bundle: &mut OutputBundle) -> Result<(), KropinaError> {
    let icfg = cfg.integrator(cfg.integrate.t_end);
    let origin = cfg.sweep.origin;
    let phi0 = cfg.sweep.phi0;
    let mut figures = Vec::new();
    for (label, series, metric) in selected_metrics(cfg)? {
        let v0 = metric.nav().heading_velocity(&origin, phi0)?;
        let traj = integrate(&metric, &origin, &v0, &icfg)?;
        println!(
            "{label}: phi0 = {phi0:.6}, reached t = {:.6}, stop = {:?}, {} samples",
            traj.end().t,
            traj.stop,
            traj.samples.len()
        );
        let fan = single_ray_fan(phi0, traj);
        write_fan_csv(bundle, &format!("geodesic_{label}.csv"), &metric, &fan)?;
        figures.push((series, fan, metric));
    }
    if cfg.output.svg {
        let parts: Vec<(Series, &Fan)> = figures.iter().map(|(s, f, _)| (*s, f)).collect();
        let glyph_metric = &figures.last().expect("at least one series").2;
        bundle.write("geodesic.svg", &fan_svg(&parts, glyph_metric))?;
    }
    Ok(())
}

fn run_fan(cfg: &Config, bundle: &mut OutputBundle) -> Result<(), KropinaError> {
    let icfg = cfg.integrator(cfg.integrate.t_end);
    let mut figures = Vec::new();
    for (label, series, metric) in selected_metrics(cfg)? {
        let spec = FanSpec {
            origin: cfg.sweep.origin,
            phi_start: cfg.sweep.phi_start,
            dphi: cfg.sweep.dphi,
            count: cfg.sweep.count,
            config: icfg.clone(),
        };
        let fan = generate_fan(&metric, &spec);
        println!(
            "{label}: {} rays, {} headings skipped",
            fan.rays.len(),
            fan.skipped.len()
        );
        for skip in &fan.skipped {
            println!("  skipped phi0 = {:.6}: {}", skip.phi0, skip.reason);
        }
        write_fan_csv(bundle, &format!("fan_{label}.csv"), &metric, &fan)?;
        figures.push((series, fan, metric));
    }
    if cfg.output.svg {
        let parts: Vec<(Series, &Fan)> = figures.iter().map(|(s, f, _)| (*s, f)).collect();
        let glyph_metric = &figures.last().expect("at least one series").2;
        bundle.write("fan.svg", &fan_svg(&parts, glyph_metric))?;
    }
    Ok(())
}

fn run_isochrone(cfg: &Config, bundle: &mut OutputBundle) -> Result<(), KropinaError> {
    let mut times = cfg.isochrone.times.clone();
    times.retain(|t| t.is_finite() && *t > 0.0);
    times.sort_by(f64::total_cmp);
    if times.is_empty() {
        return Err(KropinaError::Config {
            detail: "isochrone times list is empty".to_string(),
        });
    }
    let horizon = times.last().copied().unwrap_or(3.0);
    let icfg = cfg.integrator(horizon);
    let mut figures = Vec::new();
    for (label, series, metric) in selected_metrics(cfg)? {
        let spec = FanSpec::full_circle(cfg.sweep.origin, cfg.isochrone.count, icfg.clone());
        let fan = generate_fan(&metric, &spec);
        let fronts = isochrones(&fan, &times);
        for f in &fronts {
            println!(
                "{label}: t = {:.3}, {} points, {} rays truncated",
                f.t,
                f.points.len(),
                f.truncated
            );
        }
        bundle.write(&format!("isochrone_{label}.csv"), &isochrone_csv(&fronts))?;
        figures.push((series, fronts));
    }
    if cfg.output.svg {
        let parts: Vec<(Series, &[crate::scenario::Isochrone])> = figures
            .iter()
            .map(|(s, fronts)| (*s, fronts.as_slice()))
            .collect();
        bundle.write("isochrone.svg", &isochrone_svg(&parts))?;
    }
    Ok(())
}

fn run_reachable(cfg: &Config, bundle: &mut OutputBundle) -> Result<(), KropinaError> {
    let metrics = selected_metrics(cfg)?;
    // A covered-region sweep is one figure for one metric: take the
    // scenario metric when both are selected.
    let (label, series, metric) = metrics
        .into_iter()
        .last()
        .expect("selected_metrics is never empty");
    let spec = ReachableSpec {
        origin: cfg.sweep.origin,
        dphi: cfg.reachable.dphi,
        config: cfg.integrator(cfg.reachable.t_end),
        alpha_factor: cfg.reachable.alpha_factor,
        snap: cfg.reachable.snap,
    };
    let set = reachable_set(&metric, &spec);
    println!(
        "{label}: {} rays, {} cloud points, boundary of {} points in {} loop(s), alpha = {:.4}",
        set.rays,
        set.cloud.len(),
        set.boundary.len(),
        set.loops,
        set.alpha
    );
    println!(
        "stops: {} time limit, {} domain boundary, {} step failure, {} skipped headings",
        set.tally.time_limit, set.tally.domain_boundary, set.tally.step_failure, set.tally.skipped
    );
    bundle.write("reachable_cloud.csv", &points_csv(&set.cloud))?;
    bundle.write("reachable_boundary.csv", &points_csv(&set.boundary))?;
    if cfg.output.svg {
        bundle.write("reachable.svg", &reachable_svg(&set, series))?;
    }
    Ok(())
}

fn run_compare(cfg: &Config, bundle: &mut OutputBundle) -> Result<(), KropinaError> {
    let (original, generalized) = cfg.metric_pair()?;
    let start = cfg.sweep.origin;
    let targets = if cfg.compare.targets.is_empty() {
        let icfg = cfg.integrator(cfg.compare.sample_t);
        let fan = generate_fan(
            &generalized,
            &FanSpec::full_circle(start, 64, icfg),
        );
        fan_targets(&fan, cfg.compare.sample_t, cfg.compare.sample_count)
    } else {
        cfg.compare.targets.clone()
    };
    if targets.is_empty() {
        return Err(KropinaError::EmptyInput {
            what: "comparison targets",
        });
    }
    let mut shoot_cfg = cfg.integrator(cfg.compare.t_end);
    shoot_cfg.rel_tol = cfg.compare.rel_tol;
    shoot_cfg.abs_tol = cfg.compare.rel_tol * 1e-2;
    let table = compare_travel_times(&original, &generalized, &start, &targets, &shoot_cfg);
    println!(
        "{:>12} {:>12} {:>10} {:>10} {:>10}",
        "target_x", "target_y", "T_F", "T_Ft", "delta_T"
    );
    for r in &table.rows {
        println!(
            "{:>12.6} {:>12.6} {:>10.6} {:>10.6} {:>10.6}",
            r.target[0], r.target[1], r.time_original, r.time_generalized, r.delta
        );
    }
    for (target, e) in &table.skipped {
        println!("unresolved ({:.6}, {:.6}): {e}", target[0], target[1]);
    }
    bundle.write("comparison.csv", &comparison_csv(&table))?;
    if !table.skipped.is_empty() {
        return Err(KropinaError::TargetUnreachable {
            target: table.skipped[0].0.to_vec(),
        });
    }
    Ok(())
}

fn run_eval(cfg: &Config, x: f64, y: f64, vx: f64, vy: f64) -> Result<(), KropinaError> {
    let pos = [x, y];
    let vel = [vx, vy];
    for (label, _, metric) in selected_metrics(cfg)? {
        let value = metric.eval(&pos, &vel)?;
        let beta = metric.beta(&pos, &vel)?;
        let margin = metric.domain_margin(&pos, &vel)?;
        let (_, acc) = geodesic_rhs(&metric, &pos, &vel)?;
        println!("{label}:");
        println!("  F      = {value:.17}");
        println!("  beta   = {beta:.17}");
        println!("  margin = {margin:.6e}");
        println!("  accel  = ({:.10e}, {:.10e})", acc[0], acc[1]);
    }
    Ok(())
}

fn run_verify() -> i32 {
    let results = verify::run_all();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut failures = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag}  {:width$}  {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    if failures == 0 {
        println!("all {} checks passed", results.len());
        0
    } else {
        println!("{failures} of {} checks failed", results.len());
        2
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version travel this path with success status;
            // genuine usage mistakes are configuration errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match &cli.command {
        Command::Verify => return run_verify(),
        Command::Eval { x, y, vx, vy } => {
            return match run_eval(&cfg, *x, *y, *vx, *vy) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            };
        }
        _ => {}
    }

    let started = Instant::now();
    let mut bundle = match OutputBundle::create(std::path::Path::new(&cfg.output.dir)) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = match &cli.command {
        Command::Geodesic => run_geodesic(&cfg, &mut bundle),
        Command::Fan => run_fan(&cfg, &mut bundle),
        Command::Isochrone => run_isochrone(&cfg, &mut bundle),
        Command::Reachable { .. } => run_reachable(&cfg, &mut bundle),
        Command::Compare => run_compare(&cfg, &mut bundle),
        Command::Eval { .. } | Command::Verify => unreachable!("handled above"),
    };
    let wall = started.elapsed().as_millis() as u64;
    if let Err(e) = bundle.finish(cli.command.name(), &cfg, wall) {
        eprintln!("error: {e}");
        return 1;
    }
    match result {
        Ok(()) => {
            println!(
                "wrote {} file(s) to {}",
                bundle.files().len() + 1,
                bundle.dir().display()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
