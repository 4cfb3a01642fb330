//! Experiment drivers behind the `honewton` binary: single runs, radius
//! tables, basin rasters and re-verification of stored runs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::Value;

use honewton::jets::FunctionOracle;
use honewton::newton::{self, fmt17, Method, NewtonOptions, StepCheck, StepReport, Termination, Trace};
use honewton::poly::Polynomial;
use honewton::sos::{SdpDump, SosOptions};
use honewton::univariate::{self, basin_radius, converges_from};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const NOT_CONVERGED: i32 = 2;
    pub const SOLVER_FAILURE: i32 = 3;
    pub const USAGE: i32 = 64;
    pub const DATA: i32 = 65;
    pub const NO_INPUT: i32 = 66;
}

#[derive(Debug, Parser)]
#[command(name = "honewton", version, about = "Higher-order Newton methods via sum-of-squares programming")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one method from one start point.
    Minimize(MinimizeArgs),
    /// Basin radii of a univariate objective for several orders.
    RadiusTable(RadiusArgs),
    /// Converged/other raster over a grid of start points.
    Basin(BasinArgs),
    /// Re-check certificates and stationarity of stored runs.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodName {
    Hon,
    Global,
    Classical,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    /// Built-in name (sqrt1, atan1, beale) or path to a polynomial JSON file.
    #[arg(long = "fn")]
    pub function: String,
    /// Start point, comma separated.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub x0: Vec<f64>,
    /// Order; 2 selects classical Newton.
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = MethodName::Hon)]
    pub method: MethodName,
    /// Lipschitz bound M for the global method.
    #[arg(long)]
    pub lipschitz: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub grad_tol: f64,
    /// Directory for trace.csv and trace.json; CSV goes to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every SDP in SDPA sparse format to this directory.
    #[arg(long)]
    pub sdp_dump: Option<PathBuf>,
    /// JSON object whose keys mirror the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RadiusArgs {
    #[arg(long = "fn", default_value = "sqrt1")]
    pub function: String,
    /// Orders, comma separated.
    #[arg(long = "d", value_delimiter = ',', default_value = "2,3,4,5")]
    pub orders: Vec<u32>,
    /// Smallest start point; must lie in the basin.
    #[arg(long, default_value_t = 0.1)]
    pub lo: f64,
    /// Largest start point scanned for a boundary.
    #[arg(long, default_value_t = 20.0)]
    pub hi: f64,
    /// Spacing of the coarse outward scan that brackets the boundary.
    #[arg(long, default_value_t = 0.1)]
    pub scan_step: f64,
    #[arg(long, default_value_t = 200)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// CSV output file; stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sdp_dump: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BasinArgs {
    #[arg(long = "fn", default_value = "beale")]
    pub function: String,
    /// Half-width of the box `|x|_inf <= box`.
    #[arg(long = "box", default_value_t = 4.0)]
    pub half_width: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 41)]
    pub grid: usize,
    /// Order; 2 selects classical Newton.
    #[arg(long, default_value_t = 3)]
    pub d: u32,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long, default_value_t = 350)]
    pub max_iter: usize,
    /// Minimizer the label refers to; defaults to the built-in's known one.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub xstar: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sdp_dump: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory holding trace JSON files from `minimize --out`.
    pub dir: PathBuf,
}

/// Resolves a built-in name or loads a polynomial objective from JSON.
pub fn resolve_function(name: &str) -> anyhow::Result<FunctionOracle> {
    if let Some(f) = FunctionOracle::builtin(name) {
        return Ok(f);
    }
    let path = Path::new(name);
    if !path.is_file() {
        bail!("unknown function `{name}` (built-ins: sqrt1, atan1, beale; or a polynomial JSON path)");
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let p: Polynomial = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("polynomial");
    Ok(FunctionOracle::polynomial(name, p))
}

fn sos_options(dump: &Option<PathBuf>) -> anyhow::Result<SosOptions> {
    let mut opts = SosOptions::default();
    if let Some(dir) = dump {
        opts.dump = Some(SdpDump::new(dir)?);
    }
    Ok(opts)
}

fn method_for(d: u32) -> Method {
    if d <= 2 {
        Method::Classical
    } else {
        Method::Hon { d }
    }
}

// ---------------------------------------------------------------------------
// univariate radii

/// Radius of the basin of a one-dimensional iteration map around `xstar`.
///
/// Starts are scanned outward from `lo` in steps of `scan_step` until the
/// first one that does not converge; the bracket is then bisected.
pub fn scan_radius<F>(
    map: &F,
    xstar: f64,
    lo: f64,
    hi: f64,
    scan_step: f64,
    iters: usize,
    tol: f64,
) -> anyhow::Result<f64>
where
    F: Fn(f64) -> Option<f64>,
{
    if !(scan_step > 0.0) || !(lo < hi) {
        bail!("invalid scan ({lo}, {hi}) with step {scan_step}");
    }
    if !converges_from(map, lo, xstar, iters, tol) {
        bail!("no convergence from the inner start {lo}");
    }
    let mut prev = lo;
    let mut k = 1;
    loop {
        let x = (lo + k as f64 * scan_step).min(hi);
        if !converges_from(map, x, xstar, iters, tol) {
            return Ok(basin_radius(map, xstar, prev, x, iters, tol)?);
        }
        if x >= hi {
            bail!("every start up to {hi} converges");
        }
        prev = x;
        k += 1;
    }
}

/// One-dimensional map of the SDP pipeline. Every step taken is passed to
/// `observe`.
pub fn sdp_map<'a>(
    f: &'a FunctionOracle,
    d: u32,
    eps: f64,
    opts: &'a SosOptions,
    observe: &'a (dyn Fn(&StepReport) + Sync),
) -> impl Fn(f64) -> Option<f64> + 'a {
    move |x: f64| {
        let step = newton::step_order_d(f, &[x], d, eps, opts).ok()?;
        observe(&step);
        Some(step.next[0])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusRow {
    pub d: u32,
    pub method: &'static str,
    pub radius: f64,
}

pub struct RadiusSettings {
    pub lo: f64,
    pub hi: f64,
    pub scan_step: f64,
    pub iters: usize,
    pub tol: f64,
    pub eps: f64,
}

impl Default for RadiusSettings {
    fn default() -> Self {
        RadiusSettings {
            lo: 0.1,
            hi: 20.0,
            scan_step: 0.1,
            iters: 200,
            tol: 1e-9,
            eps: 0.01,
        }
    }
}

/// Radius rows for each order: closed-form maps for `d = 2, 3`, and the SDP
/// pipeline for every `d >= 3`.
pub fn radius_table(
    f: &FunctionOracle,
    orders: &[u32],
    s: &RadiusSettings,
    opts: &SosOptions,
    observe: &(dyn Fn(&StepReport) + Sync),
) -> anyhow::Result<Vec<RadiusRow>> {
    if f.dim() != 1 {
        bail!("radius table needs a univariate objective, `{}` has dimension {}", f.name(), f.dim());
    }
    let xstar = f.minimizer().map_or(0.0, |m| m[0]);
    let mut rows = Vec::new();
    for &d in orders {
        match d {
            0 | 1 => bail!("order must be at least 2, got {d}"),
            2 => {
                let map = |x: f64| univariate::n2_step(f, x).ok();
                let r = scan_radius(&map, xstar, s.lo, s.hi, s.scan_step, s.iters, s.tol)?;
                rows.push(RadiusRow { d, method: "closed_form", radius: r });
            }
            _ => {
                if d == 3 {
                    let map = |x: f64| univariate::n3_step(f, x).ok();
                    let r = scan_radius(&map, xstar, s.lo, s.hi, s.scan_step, s.iters, s.tol)?;
                    rows.push(RadiusRow { d, method: "closed_form", radius: r });
                }
                let map = sdp_map(f, d, s.eps, opts, observe);
                let r = scan_radius(&map, xstar, s.lo, s.hi, s.scan_step, s.iters, s.tol)?;
                rows.push(RadiusRow { d, method: "sdp", radius: r });
            }
        }
    }
    Ok(rows)
}

pub fn radius_csv(rows: &[RadiusRow]) -> String {
    let mut out = String::from("d,method,radius\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.d, r.method, fmt17(r.radius)).unwrap();
    }
    out
}

// ---------------------------------------------------------------------------
// basins

#[derive(Clone, Debug)]
pub struct BasinSettings {
    pub half_width: f64,
    pub grid: usize,
    pub d: u32,
    pub eps: f64,
    pub max_iter: usize,
    /// Distance to the minimizer below which a run counts as converged.
    pub label_tol: f64,
}

impl Default for BasinSettings {
    fn default() -> Self {
        BasinSettings {
            half_width: 4.0,
            grid: 41,
            d: 3,
            eps: 0.01,
            max_iter: 350,
            label_tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BasinPoint {
    /// Grid indices, row-major: `(row, col)`; `row` is 0 in one dimension.
    pub index: (usize, usize),
    pub x0: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
    pub termination: Termination,
    /// Checks of every step taken from this start.
    pub checks: Vec<StepCheck>,
}

#[derive(Clone, Debug)]
pub struct BasinResult {
    pub points: Vec<BasinPoint>,
}

impl BasinResult {
    pub fn converged_fraction(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().filter(|p| p.converged).count() as f64 / self.points.len() as f64
    }

    /// `row,col,x1[,x2],label,steps,termination`, row-major.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.x0.len());
        let mut out = String::from("row,col");
        for i in 0..n {
            write!(out, ",x{}", i + 1).unwrap();
        }
        out.push_str(",label,steps,termination\n");
        for p in &self.points {
            write!(out, "{},{}", p.index.0, p.index.1).unwrap();
            for v in &p.x0 {
                write!(out, ",{}", fmt17(*v)).unwrap();
            }
            let label = if p.converged { "converged" } else { "other" };
            writeln!(out, ",{label},{},{:?}", p.steps, p.termination).unwrap();
        }
        out
    }
}

fn axis(half_width: f64, grid: usize, k: usize) -> f64 {
    if grid == 1 {
        return 0.0;
    }
    -half_width + 2.0 * half_width * k as f64 / (grid - 1) as f64
}

/// Runs the method from every point of a `grid`-per-axis lattice over
/// `|x|_inf <= half_width`. Runs are independent and execute on the rayon
/// pool; results are gathered in row-major grid order.
pub fn basin_scan(
    f: &FunctionOracle,
    xstar: &[f64],
    s: &BasinSettings,
    sos: &SosOptions,
) -> anyhow::Result<BasinResult> {
    let n = f.dim();
    if !(1..=2).contains(&n) {
        bail!("basin scans need dimension 1 or 2, got {n}");
    }
    if xstar.len() != n {
        bail!("minimizer has {} entries, objective has dimension {n}", xstar.len());
    }
    if s.grid == 0 {
        bail!("grid must have at least one point per axis");
    }
    let rows = if n == 2 { s.grid } else { 1 };
    let indices: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..s.grid).map(move |c| (r, c))).collect();
    let opts = NewtonOptions {
        eps: s.eps,
        max_iter: s.max_iter,
        sos: sos.clone(),
        ..NewtonOptions::default()
    };
    let method = method_for(s.d);
    let points = indices
        .par_iter()
        .map(|&(r, c)| {
            // x1 varies along a row, x2 down the rows
            let x0 = if n == 2 {
                vec![axis(s.half_width, s.grid, c), axis(s.half_width, s.grid, r)]
            } else {
                vec![axis(s.half_width, s.grid, c)]
            };
            let trace = newton::minimize(f, &x0, method, &opts)?;
            let dist = trace
                .last()
                .iter()
                .zip(xstar)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok(BasinPoint {
                index: (r, c),
                x0,
                converged: dist <= s.label_tol,
                steps: trace.num_steps(),
                termination: trace.termination,
                checks: trace.steps.iter().map(StepReport::check).collect(),
            })
        })
        .collect::<honewton::Result<Vec<_>>>()?;
    Ok(BasinResult { points })
}

// ---------------------------------------------------------------------------
// verification

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub files: usize,
    pub steps: usize,
    pub failures: Vec<String>,
}

/// Re-checks every step of every `*.json` trace directly inside `dir`.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport, (i32, String)> {
    let entries = std::fs::read_dir(dir).map_err(|e| (exit::NO_INPUT, format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err((exit::NO_INPUT, format!("no trace files in {}", dir.display())));
    }
    let mut report = VerifyReport::default();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(|e| (exit::DATA, format!("{}: {e}", path.display())))?;
        let trace: Trace =
            serde_json::from_str(&text).map_err(|e| (exit::DATA, format!("{}: {e}", path.display())))?;
        report.files += 1;
        for (k, step) in trace.steps.iter().enumerate() {
            report.steps += 1;
            let c = step.check();
            if !c.valid {
                report.failures.push(format!(
                    "{} step {k}: certificate {:?}, |grad| {:.3e} vs {:.3e}",
                    path.display(),
                    c.certificate,
                    c.grad_norm,
                    c.grad_tolerance
                ));
            }
            if trace.iterates.get(k + 1) != Some(&step.next) {
                report.failures.push(format!("{} step {k}: next iterate does not match the trace", path.display()));
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// entry point

/// Splices `--config <file>` into the argument list: each key of the JSON
/// object becomes `--key value` ahead of the explicit flags, which therefore
/// take precedence.
pub fn expand_config(args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let Some(pos) = pos else {
        return Ok(args);
    };
    let path = args.get(pos + 1).ok_or_else(|| anyhow!("--config needs a path"))?.clone();
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.to_string_lossy()))?;
    let value: Value = serde_json::from_str(&text).context("config is not valid JSON")?;
    let obj = value.as_object().ok_or_else(|| anyhow!("config must be a JSON object"))?;
    let mut injected = Vec::new();
    for (k, v) in obj {
        let flag = format!("--{}", k.replace('_', "-"));
        let val = match v {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(anyhow!("unsupported list entry for `{k}`")),
                })
                .collect::<anyhow::Result<Vec<_>>>()?
                .join(","),
            _ => bail!("unsupported value for `{k}`"),
        };
        injected.push(OsString::from(flag));
        injected.push(OsString::from(val));
    }
    let mut rest: Vec<OsString> = args[..pos].to_vec();
    // the subcommand is the first argument after the binary name
    let split = rest.len().min(2);
    let tail = rest.split_off(split);
    rest.extend(injected);
    rest.extend(tail);
    rest.extend(args[pos + 2..].iter().cloned());
    Ok(rest)
}

fn write_out(path: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_minimize(a: &MinimizeArgs) -> anyhow::Result<i32> {
    let f = resolve_function(&a.function)?;
    let method = match a.method {
        MethodName::Hon => method_for(a.d),
        MethodName::Classical => Method::Classical,
        MethodName::Global => {
            let lipschitz = a
                .lipschitz
                .or(f.lipschitz())
                .ok_or_else(|| anyhow!("--method global needs --lipschitz"))?;
            Method::Global { d: a.d, lipschitz }
        }
    };
    let opts = NewtonOptions {
        eps: a.eps,
        grad_tol: a.grad_tol,
        max_iter: a.max_iter,
        sos: sos_options(&a.sdp_dump)?,
        ..NewtonOptions::default()
    };
    let trace = newton::minimize(&f, &a.x0, method, &opts)?;
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("trace.csv"), trace.to_csv())?;
            std::fs::write(dir.join("trace.json"), serde_json::to_string_pretty(&trace)?)?;
        }
        None => write_out(&None, &trace.to_csv())?,
    }
    eprintln!(
        "{}: {:?} after {} steps, |grad| = {:.3e}",
        f.name(),
        trace.termination,
        trace.num_steps(),
        trace.grad_norms.last().copied().unwrap_or(f64::NAN)
    );
    if let Some(e) = &trace.error {
        eprintln!("error: {e}");
    }
    Ok(match trace.termination {
        Termination::GradTol => exit::OK,
        Termination::MaxIter | Termination::Diverged => exit::NOT_CONVERGED,
        Termination::SolverFailure => exit::SOLVER_FAILURE,
    })
}

fn cmd_radius(a: &RadiusArgs) -> anyhow::Result<i32> {
    let f = resolve_function(&a.function)?;
    let settings = RadiusSettings {
        lo: a.lo,
        hi: a.hi,
        scan_step: a.scan_step,
        iters: a.iters,
        tol: a.tol,
        eps: a.eps,
    };
    let rows = radius_table(&f, &a.orders, &settings, &sos_options(&a.sdp_dump)?, &|_| {})?;
    write_out(&a.out, &radius_csv(&rows))?;
    Ok(exit::OK)
}

fn cmd_basin(a: &BasinArgs) -> anyhow::Result<i32> {
    let f = resolve_function(&a.function)?;
    let xstar = match (&a.xstar, f.minimizer()) {
        (Some(x), _) => x.clone(),
        (None, Some(m)) => m.to_vec(),
        (None, None) => bail!("`{}` has no known minimizer; pass --xstar", f.name()),
    };
    let settings = BasinSettings {
        half_width: a.half_width,
        grid: a.grid,
        d: a.d,
        eps: a.eps,
        max_iter: a.max_iter,
        ..BasinSettings::default()
    };
    let result = basin_scan(&f, &xstar, &settings, &sos_options(&a.sdp_dump)?)?;
    write_out(&a.out, &result.to_csv())?;
    eprintln!("converged fraction: {:.6}", result.converged_fraction());
    Ok(exit::OK)
}

fn cmd_verify(a: &VerifyArgs) -> i32 {
    match verify_dir(&a.dir) {
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
        Ok(r) => {
            for f in &r.failures {
                eprintln!("FAIL {f}");
            }
            println!("{} files, {} steps, {} failures", r.files, r.steps, r.failures.len());
            if r.failures.is_empty() {
                exit::OK
            } else {
                exit::VERIFY_FAILED
            }
        }
    }
}

/// Parses `args` (including the binary name), runs the command and returns
/// the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return exit::USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Minimize(a) => cmd_minimize(a),
        Command::RadiusTable(a) => cmd_radius(a),
        Command::Basin(a) => cmd_basin(a),
        Command::Verify(a) => return cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<honewton::Error>() {
                Some(honewton::Error::Solver { .. }) => exit::SOLVER_FAILURE,
                _ => exit::USAGE,
            }
        }
    }
}
