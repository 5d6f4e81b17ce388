//! `impulse-kam`: simulations, jump verification, Poincaré orbits and scans
//! for impulsive Duffing-type equations.

mod grid;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use impulse_kam::action_angle::ActionAngle;
use impulse_kam::analysis::{
    area_report, boundedness_scan, rotation_number, twist_profile, BoundednessVerdict,
};
use impulse_kam::flow::{iterate_map, trajectory, OrbitStatus, RowKind};
use impulse_kam::impulse::{action_angle_decay_slopes, verify_jump, VerifyGrid};
use impulse_kam::model::{preset, ConfigDocument, PlaneState, System};

use grid::{GridSpec, GridVar};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

#[derive(Parser)]
#[command(name = "impulse-kam", version, about)]
struct Cli {
    /// Worker threads for parallel scans (IMPULSE_KAM_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: paper-n1, unperturbed-n1, unperturbed-n2.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Dense trajectory with left and right limits at impulses.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        y0: f64,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        /// Output rows per unit time.
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Check the area and decay conditions for every impulse.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
    },
    /// Iterate the time-1 map from a grid of initial points.
    Poincare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "amp=1|2|4,phases=1")]
        grid: String,
        #[arg(long, default_value_t = 64)]
        n_periods: usize,
    },
    /// Boundedness, twist or decay scans.
    Scan {
        #[arg(value_enum)]
        mode: ScanMode,
        #[command(flatten)]
        common: Common,
        /// Defaults: h0=10|100|1000 (boundedness), lambda=100..10000/13 (twist),
        /// lambda=10..10000/13,phases=16 (decay).
        #[arg(long)]
        grid: Option<String>,
        /// Defaults: 1000 (boundedness), 16 (twist).
        #[arg(long)]
        n_periods: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Largest accepted h0 growth factor in boundedness scans.
        #[arg(long, default_value_t = 10.0)]
        cap: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanMode {
    Boundedness,
    Twist,
    Decay,
}

impl ScanMode {
    fn name(self) -> &'static str {
        match self {
            ScanMode::Boundedness => "boundedness",
            ScanMode::Twist => "twist",
            ScanMode::Decay => "decay",
        }
    }
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Option<String>,
    preset: Option<String>,
    parameters: Value,
    tool_version: &'static str,
    wall_time_s: f64,
    outputs: Vec<String>,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Output, Failure> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialise");
        text.push('\n');
        self.write(name, &text)
    }

    fn finish(
        mut self,
        common: &Common,
        command: &str,
        parameters: Value,
        start: Instant,
    ) -> Result<(), Failure> {
        let mut outputs = self.files.clone();
        outputs.push("manifest.json".into());
        let manifest = RunManifest {
            command: command.to_string(),
            config: common.config.as_ref().map(|p| p.display().to_string()),
            preset: common.preset.clone(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_time_s: start.elapsed().as_secs_f64(),
            outputs,
        };
        self.json("manifest.json", &manifest)
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn load(common: &Common) -> Result<System, Failure> {
    let doc = match (&common.config, &common.preset) {
        (Some(path), None) => ConfigDocument::load(path),
        (None, Some(name)) => preset(name),
        (None, None) => return Err(usage("one of --config or --preset is required")),
        (Some(_), Some(_)) => return Err(usage("--config and --preset are exclusive")),
    }
    .map_err(|e| usage(e.to_string()))?;
    System::build(&doc).map_err(|e| usage(e.to_string()))
}

fn parse_grid(src: &str) -> Result<GridSpec, Failure> {
    GridSpec::parse(src).map_err(|e| usage(format!("--grid: {e}")))
}

fn lambda_of(sys: &System, var: GridVar, v: f64) -> f64 {
    let chart = sys.chart();
    match var {
        GridVar::Lambda => v,
        GridVar::H0 => chart.lambda_of_energy(v),
        GridVar::Amp => chart.lambda_of(v, 0.0),
    }
}

fn cmd_simulate(
    common: &Common,
    (x0, y0, t0, t_end, samples): (f64, f64, f64, f64, usize),
    start: Instant,
) -> Result<u8, Failure> {
    let sys = load(common)?;
    if !(t_end > t0) || samples == 0 || !x0.is_finite() || !y0.is_finite() {
        return Err(usage(
            "need t-end > t0, samples > 0 and a finite initial state",
        ));
    }
    let mut out = Output::new(&common.out)?;
    let (rows, err) = trajectory(
        &sys,
        &PlaneState::new(x0, y0, t0),
        t_end,
        samples,
        sys.settings(),
    );
    let mut csv = String::from("t,x,y,h0,event,jump\n");
    for r in &rows {
        let event = match r.kind {
            RowKind::Flow => "flow",
            RowKind::JumpLeft => "jump_left",
            RowKind::JumpRight => "jump_right",
        };
        let jump = r.jump.map(|j| j.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{event},{jump}",
            num(r.t),
            num(r.x),
            num(r.y),
            num(r.h0)
        );
    }
    out.write("trajectory.csv", &csv)?;
    let status = match &err {
        None => json!({"status": "completed"}),
        Some(e) => json!({"status": "failed", "blow_up": e.is_blow_up(), "message": e.to_string()}),
    };
    out.json(
        "summary.json",
        &json!({"rows": rows.len(), "result": status}),
    )?;
    let params = json!({"x0": x0, "y0": y0, "t0": t0, "t_end": t_end, "samples": samples});
    out.finish(common, "simulate", params, start)?;
    match err {
        None => Ok(0),
        Some(e) => {
            eprintln!("integration stopped: {e}");
            Ok(if e.is_blow_up() {
                EXIT_BLOWUP
            } else {
                EXIT_FAIL
            })
        }
    }
}

fn cmd_verify(common: &Common, eps: f64, start: Instant) -> Result<u8, Failure> {
    if !(eps > 0.0) {
        return Err(usage("--eps must be positive"));
    }
    let sys = load(common)?;
    let mut out = Output::new(&common.out)?;
    let grid = VerifyGrid::default();
    let mut reports = Vec::new();
    for (index, imp) in sys.impulses().iter().enumerate() {
        let report = verify_jump(&imp.map, sys.chart(), eps, &grid).map_err(|e| Failure {
            code: EXIT_FAIL,
            message: format!("impulse {index}: {e}"),
        })?;
        reports.push(json!({"index": index, "t": imp.time, "report": report}));
    }
    let passed = reports.iter().all(|r| r["report"]["passed"] == json!(true));
    out.json(
        "verify.json",
        &json!({"eps": eps, "passed": passed, "impulses": reports}),
    )?;
    out.finish(common, "verify", json!({"eps": eps}), start)?;
    if passed {
        Ok(0)
    } else {
        eprintln!("verification failed");
        Ok(EXIT_FAIL)
    }
}

fn cmd_poincare(
    common: &Common,
    grid: &str,
    n_periods: usize,
    start: Instant,
) -> Result<u8, Failure> {
    if n_periods == 0 {
        return Err(usage("--n-periods must be at least 1"));
    }
    let spec = parse_grid(grid)?;
    let sys = load(common)?;
    let mut starts = Vec::new();
    for &v in &spec.values {
        let lambda = lambda_of(&sys, spec.var, v);
        for k in 0..spec.phases {
            let theta = k as f64 / spec.phases as f64;
            let (x, y) = sys
                .chart()
                .from_action_angle(&ActionAngle::new(lambda, theta))
                .map_err(|e| usage(format!("grid point {}={v}: {e}", spec.var)))?;
            starts.push(PlaneState::new(x, y, 0.0));
        }
    }
    let mut out = Output::new(&common.out)?;
    use rayon::prelude::*;
    let orbits: Vec<_> = starts
        .par_iter()
        .map(|s| iterate_map(&sys, s, n_periods, sys.settings()))
        .collect();
    let area = area_report(&sys, &starts, sys.settings());

    let mut csv = String::from("orbit,period,x,y,h0,lambda,theta_lift\n");
    let mut summaries = Vec::new();
    let mut blow_up = false;
    for (i, o) in orbits.iter().enumerate() {
        for s in &o.samples {
            let _ = writeln!(
                csv,
                "{i},{},{},{},{},{},{}",
                s.period,
                num(s.x),
                num(s.y),
                num(s.h0),
                num(s.lambda),
                num(s.theta_lift)
            );
        }
        blow_up |= matches!(o.status, OrbitStatus::Escaped { .. });
        let rotation = match rotation_number(o) {
            Ok(r) => json!(r),
            Err(e) => json!({"error": e.to_string()}),
        };
        summaries.push(json!({
            "orbit": i,
            "x0": o.initial.x,
            "y0": o.initial.y,
            "status": o.status,
            "periods_completed": o.periods_completed,
            "min_h0": o.min_h0,
            "max_h0": o.max_h0,
            "rotation": rotation,
        }));
    }
    out.write("orbits.csv", &csv)?;
    out.json(
        "summary.json",
        &json!({
            "grid": grid,
            "n_periods": n_periods,
            "period": sys.chart().period(),
            "orbits": summaries,
            "area": area,
        }),
    )?;
    out.finish(
        common,
        "poincare",
        json!({"grid": grid, "n_periods": n_periods}),
        start,
    )?;
    Ok(if blow_up { EXIT_BLOWUP } else { 0 })
}

fn cmd_scan(
    common: &Common,
    mode: ScanMode,
    grid: Option<&str>,
    n_periods: Option<usize>,
    eps: f64,
    cap: f64,
    start: Instant,
) -> Result<u8, Failure> {
    let sys = load(common)?;
    let failed = |e: &dyn std::fmt::Display| Failure {
        code: EXIT_FAIL,
        message: e.to_string(),
    };
    let mut out = Output::new(&common.out)?;
    let (grid_src, code, params) = match mode {
        ScanMode::Boundedness => {
            let grid_src = grid.unwrap_or("h0=10|100|1000");
            let spec = parse_grid(grid_src)?;
            let n = n_periods.unwrap_or(1000);
            if !(cap > 1.0) {
                return Err(usage("--cap must exceed 1"));
            }
            let levels: Vec<f64> = spec
                .values
                .iter()
                .map(|&v| match spec.var {
                    GridVar::H0 => v,
                    _ => sys.chart().energy_of_lambda(lambda_of(&sys, spec.var, v)),
                })
                .collect();
            let report = boundedness_scan(&sys, &levels, n, cap, sys.settings())
                .map_err(|e| usage(e.to_string()))?;
            let mut csv = String::from(
                "orbit,h0_initial,theta0,min_h0,max_h0,max_norm,ratio,periods_completed,status\n",
            );
            for (i, o) in report.orbits.iter().enumerate() {
                let status = match o.status {
                    OrbitStatus::Completed => "completed",
                    OrbitStatus::Escaped { .. } => "escaped",
                    OrbitStatus::Capped { .. } => "capped",
                    OrbitStatus::Failed { .. } => "failed",
                };
                let _ = writeln!(
                    csv,
                    "{i},{},{},{},{},{},{},{},{status}",
                    num(o.h0_initial),
                    num(o.theta0),
                    num(o.min_h0),
                    num(o.max_h0),
                    num(o.max_norm),
                    num(o.ratio),
                    o.periods_completed
                );
            }
            out.write("boundedness.csv", &csv)?;
            out.json("boundedness.json", &report)?;
            let code = match report.verdict {
                BoundednessVerdict::AllBounded => 0,
                BoundednessVerdict::EscapeDetected { .. } => EXIT_BLOWUP,
                BoundednessVerdict::GrowthDetected { .. } => EXIT_FAIL,
            };
            (grid_src, code, json!({"n_periods": n, "cap": cap}))
        }
        ScanMode::Twist => {
            let grid_src = grid.unwrap_or("lambda=100..10000/13");
            let spec = parse_grid(grid_src)?;
            let n = n_periods.unwrap_or(16);
            let lambdas: Vec<f64> = spec
                .values
                .iter()
                .map(|&v| lambda_of(&sys, spec.var, v))
                .collect();
            let profile =
                twist_profile(&sys, &lambdas, n, sys.settings()).map_err(|e| match e {
                    impulse_kam::analysis::AnalysisError::Grid { .. }
                    | impulse_kam::analysis::AnalysisError::TooShort { .. } => usage(e.to_string()),
                    other => failed(&other),
                })?;
            let mut csv = String::from("lambda,advance\n");
            for (l, r) in profile.lambdas.iter().zip(&profile.advances) {
                let _ = writeln!(csv, "{},{}", num(*l), num(*r));
            }
            out.write("twist.csv", &csv)?;
            out.json("twist.json", &profile)?;
            (
                grid_src,
                if profile.monotone { 0 } else { EXIT_FAIL },
                json!({"n_periods": n}),
            )
        }
        ScanMode::Decay => {
            let grid_src = grid.unwrap_or("lambda=10..10000/13,phases=16");
            let spec = parse_grid(grid_src)?;
            if !(eps > 0.0) {
                return Err(usage("--eps must be positive"));
            }
            let lambdas: Vec<f64> = spec
                .values
                .iter()
                .map(|&v| lambda_of(&sys, spec.var, v))
                .collect();
            let thetas: Vec<f64> = (0..spec.phases)
                .map(|k| k as f64 / spec.phases as f64)
                .collect();
            let mut csv = String::from("impulse,quantity,lambda,max_abs\n");
            let mut reports = Vec::new();
            let mut all = true;
            for (index, imp) in sys.impulses().iter().enumerate() {
                let r = action_angle_decay_slopes(&imp.map, sys.chart(), eps, &lambdas, &thetas)
                    .map_err(|e| failed(&e))?;
                for e in &r.entries {
                    for (l, v) in lambdas.iter().zip(&e.profile) {
                        let _ = writeln!(csv, "{index},{},{},{}", e.quantity, num(*l), num(*v));
                    }
                }
                all &= r.satisfied;
                reports.push(json!({"index": index, "t": imp.time, "report": r}));
            }
            out.write("decay.csv", &csv)?;
            out.json(
                "decay.json",
                &json!({"eps": eps, "satisfied": all, "impulses": reports}),
            )?;
            (
                grid_src,
                if all { 0 } else { EXIT_FAIL },
                json!({"eps": eps}),
            )
        }
    };
    let mut params = params;
    params["grid"] = json!(grid_src);
    params["mode"] = json!(mode.name());
    out.finish(common, "scan", params, start)?;
    Ok(code)
}

fn configure_threads(flag: Option<usize>) -> Result<(), Failure> {
    let threads =
        match std::env::var("IMPULSE_KAM_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                usage(format!("IMPULSE_KAM_THREADS must be an integer, got `{v}`"))
            })?),
            Err(_) => flag,
        };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    configure_threads(cli.threads)?;
    let start = Instant::now();
    match cli.command {
        Command::Simulate {
            common,
            x0,
            y0,
            t0,
            t_end,
            samples,
        } => cmd_simulate(&common, (x0, y0, t0, t_end, samples), start),
        Command::Verify { common, eps } => cmd_verify(&common, eps, start),
        Command::Poincare {
            common,
            grid,
            n_periods,
        } => cmd_poincare(&common, &grid, n_periods, start),
        Command::Scan {
            mode,
            common,
            grid,
            n_periods,
            eps,
            cap,
        } => cmd_scan(&common, mode, grid.as_deref(), n_periods, eps, cap, start),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
