//! Command-line front end: `solve | curves | sweep | voi | verify`.
//!
//! Exit codes: 0 success, 1 solver or verification failure, 2 usage or
//! configuration error, 3 verification inconclusive (too few paths).

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::equilibrium::{sweep_lambda, value_of_information, verify_equilibrium, Equilibrium, GameSpec};
use crate::error::Error;
use crate::montecarlo::{self, empirical_best_response_scan, Estimate, SimConfig, Simulator};
use crate::numeric::linspace;

pub use config::{parse_value_list, ConfigError, Format, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Default observation rates of `sweep`.
pub const DEFAULT_LAMBDAS: &str = "0.1,0.5,1,2,5,10,50,100,500";
/// Default spot prices `e^x` of `voi`.
pub const DEFAULT_VOI_SPOTS: &str = "40,50,60,70,80";

/// Standard-error multiple and relative bias allowance of Monte Carlo checks.
const MC_SE: f64 = 3.0;
const MC_BIAS: f64 = 0.005;

#[derive(Debug, Parser)]
#[command(
    name = "stopgame",
    version,
    about = "Equilibria of the continuous-vs-periodic observation stopping game"
)]
struct Cli {
    /// TOML configuration file; all keys default to the put case study.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for data files (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo seed (overrides `mc.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct SpotRange {
    /// Smallest spot price `e^x` of the curve grid.
    #[arg(long, default_value_t = 20.0)]
    spot_min: f64,
    #[arg(long, default_value_t = 100.0)]
    spot_max: f64,
    #[arg(long, default_value_t = 161)]
    points: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the equilibrium thresholds.
    Solve,
    /// Equilibrium value functions and rewards over a spot grid.
    Curves {
        #[command(flatten)]
        range: SpotRange,
    },
    /// Equilibria over a list of observation rates.
    Sweep {
        /// Comma-separated, strictly increasing observation rates.
        #[arg(long, default_value = DEFAULT_LAMBDAS)]
        lambdas: String,
        #[command(flatten)]
        range: SpotRange,
    },
    /// Value of information `K_p - K_c` over spots and/or observation rates.
    Voi {
        /// Spot prices evaluated at the configured observation rate.
        #[arg(long, default_value = DEFAULT_VOI_SPOTS)]
        spots: String,
        /// Observation rates evaluated at `--spot`.
        #[arg(long)]
        lambdas: Option<String>,
        #[arg(long, default_value_t = 60.0)]
        spot: f64,
    },
    /// Optimality checks, Monte Carlo cross-checks and an empirical
    /// best-response scan.
    Verify,
}

enum Failure {
    Config(String),
    Solver(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Solver(format!("i/o error: {e}"))
    }
}

/// Runs the command line `args` (program name first) with the given
/// environment, writing to `out` and `err`. Returns the exit code.
pub fn run<I, T>(args: I, env: &[(String, String)], out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match execute(&cli, env, out) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Solver(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn load_config(cli: &Cli, env: &[(String, String)]) -> Result<RunConfig, Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::load(&text, env.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(format) = cli.format {
        cfg.output.format = format;
    }
    if let Some(dir) = &cli.out {
        cfg.output.directory = Some(dir.clone());
    }
    Ok(cfg)
}

fn execute(cli: &Cli, env: &[(String, String)], out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load_config(cli, env)?;
    let spec = cfg.game_spec()?;
    let sink = Sink {
        dir: cfg.output.directory.clone(),
        format: cfg.output.format,
    };
    match &cli.command {
        Command::Solve => cmd_solve(&spec, &sink, out),
        Command::Curves { range } => cmd_curves(&spec, range, &sink, out),
        Command::Sweep { lambdas, range } => cmd_sweep(&spec, lambdas, range, &sink, out),
        Command::Voi { spots, lambdas, spot } => cmd_voi(&spec, spots, lambdas.as_deref(), *spot, &sink, out),
        Command::Verify => cmd_verify(&spec, &cfg, &sink, out),
    }
}

// ---------------------------------------------------------------------------
// Output

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Cell::Num(v) => format_float(*v),
                            Cell::Text(t) => t.clone(),
                        })
                        .collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|c| match c {
                                Cell::Num(v) => serde_json::Value::from(*v),
                                Cell::Text(t) => serde_json::Value::from(t.as_str()),
                            })
                            .collect()
                    })
                    .collect();
                let doc = serde_json::json!({ "columns": self.columns, "rows": rows });
                let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct Sink {
    dir: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn extension(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    /// Writes `table` to `<dir>/<name>.<ext>`, or to `out` without a
    /// directory.
    fn emit(&self, name: &str, table: &Table, out: &mut dyn Write) -> Result<(), Failure> {
        let text = table.render(self.format);
        match &self.dir {
            Some(dir) => write_file(dir, &format!("{name}.{}", self.extension()), &text),
            None => Ok(out.write_all(text.as_bytes())?),
        }
    }

    fn emit_text(&self, name: &str, text: &str) -> Result<(), Failure> {
        match &self.dir {
            Some(dir) => write_file(dir, name, text),
            None => Ok(()),
        }
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn spot_grid(range: &SpotRange) -> Result<Vec<f64>, Failure> {
    if !(range.spot_min > 0.0 && range.spot_min < range.spot_max && range.spot_max.is_finite()) {
        return Err(Failure::Config(format!(
            "spot range must satisfy 0 < spot_min < spot_max (got {} .. {})",
            range.spot_min, range.spot_max
        )));
    }
    if range.points < 2 {
        return Err(Failure::Config("points must be >= 2".into()));
    }
    Ok(linspace(range.spot_min, range.spot_max, range.points))
}

fn list(text: &str) -> Result<Vec<f64>, Failure> {
    Ok(parse_value_list(text)?)
}

// ---------------------------------------------------------------------------
// Commands

fn equilibrium_report(eq: &Equilibrium) -> String {
    let mut s = String::new();
    let roots: Vec<String> = eq.all_roots.iter().map(|r| format_float(*r)).collect();
    let _ = writeln!(s, "a*             = {}", format_float(eq.a_star));
    let _ = writeln!(s, "l*             = {}", format_float(eq.l_star));
    let _ = writeln!(s, "exp(a*)        = {}", format_float(eq.a_star.exp()));
    let _ = writeln!(s, "exp(l*)        = {}", format_float(eq.l_star.exp()));
    let _ = writeln!(s, "I(a*; l*)      = {}", format_float(eq.i_residual));
    let _ = writeln!(s, "J(l*; a*)      = {}", format_float(eq.j_residual));
    let _ = writeln!(s, "roots          = {}", roots.join(" "));
    let _ = writeln!(s, "pareto_minimal = {}", eq.pareto_minimal);
    s
}

fn cmd_solve(spec: &GameSpec, sink: &Sink, out: &mut dyn Write) -> Result<i32, Failure> {
    let eq = spec.solve_equilibrium()?;
    out.write_all(equilibrium_report(&eq).as_bytes())?;
    if sink.dir.is_some() {
        let mut t = Table::new(&[
            "a_star",
            "l_star",
            "exp_a_star",
            "exp_l_star",
            "i_residual",
            "j_residual",
            "n_roots",
            "pareto_minimal",
        ]);
        t.push(vec![
            eq.a_star.into(),
            eq.l_star.into(),
            eq.a_star.exp().into(),
            eq.l_star.exp().into(),
            eq.i_residual.into(),
            eq.j_residual.into(),
            (eq.all_roots.len() as f64).into(),
            if eq.pareto_minimal { "true" } else { "false" }.into(),
        ]);
        sink.emit("equilibrium", &t, out)?;
    }
    Ok(EXIT_OK)
}

fn cmd_curves(spec: &GameSpec, range: &SpotRange, sink: &Sink, out: &mut dyn Write) -> Result<i32, Failure> {
    let spots = spot_grid(range)?;
    let eq = spec.solve_equilibrium()?;
    let mut t = Table::new(&["spot", "x", "f_c", "f_p", "v_c", "v_p"]);
    for s in spots {
        let x = s.ln();
        t.push(vec![
            s.into(),
            x.into(),
            spec.f_c(x).into(),
            spec.f_p(x).into(),
            spec.v_c(x, eq.a_star, eq.l_star).into(),
            spec.v_p(x, eq.a_star, eq.l_star).into(),
        ]);
    }
    sink.emit("curves", &t, out)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(
    spec: &GameSpec,
    lambdas: &str,
    range: &SpotRange,
    sink: &Sink,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let lambdas = list(lambdas)?;
    if let Some(&bad) = lambdas.iter().find(|&&l| !(l > 0.0)) {
        return Err(Failure::Config(format!("observation rates must be > 0 (got {bad})")));
    }
    if lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Failure::Config("observation rates must be strictly increasing".into()));
    }
    let spots = spot_grid(range)?;
    let xs: Vec<f64> = spots.iter().map(|s| s.ln()).collect();
    let sweep = sweep_lambda(spec, &lambdas, &xs)?;
    let mut summary = Table::new(&["lambda", "a_star", "l_star", "exp_a_star", "exp_l_star"]);
    let mut curves = Table::new(&["lambda", "spot", "v_c", "v_p"]);
    for row in &sweep.rows {
        let eq = &row.equilibrium;
        summary.push(vec![
            row.lambda.into(),
            eq.a_star.into(),
            eq.l_star.into(),
            eq.a_star.exp().into(),
            eq.l_star.exp().into(),
        ]);
        for (j, &s) in spots.iter().enumerate() {
            curves.push(vec![row.lambda.into(), s.into(), row.v_c[j].into(), row.v_p[j].into()]);
        }
    }
    sink.emit("sweep", &summary, out)?;
    if sink.dir.is_some() {
        sink.emit("sweep_curves", &curves, out)?;
    }
    Ok(EXIT_OK)
}

fn cmd_voi(
    spec: &GameSpec,
    spots: &str,
    lambdas: Option<&str>,
    spot: f64,
    sink: &Sink,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let spots = list(spots)?;
    let lambdas = lambdas.map(list).transpose()?;
    if let Some(&bad) = spots.iter().chain(std::iter::once(&spot)).find(|&&s| !(s > 0.0)) {
        return Err(Failure::Config(format!("spot prices must be > 0 (got {bad})")));
    }
    let mut points: Vec<(f64, GameSpec)> = spots.iter().map(|&s| (s, spec.clone())).collect();
    for &lam in lambdas.iter().flatten() {
        let g = spec
            .with_lambda(lam)
            .map_err(|e| Failure::Config(format!("observation rate {lam}: {e}")))?;
        points.push((spot, g));
    }
    let mut t = Table::new(&["spot", "lambda", "delta", "k_c", "gap", "status"]);
    for (s, g) in &points {
        let (cells, status) = match value_of_information(g, s.ln()) {
            Ok(v) => ([v.delta, v.k_c, v.gap], "ok"),
            Err(Error::NoBracket { .. }) => ([f64::NAN; 3], "no_bracket"),
            Err(Error::NotMonotone { .. }) => ([f64::NAN; 3], "not_monotone"),
            Err(_) => ([f64::NAN; 3], "solver_error"),
        };
        t.push(vec![
            (*s).into(),
            g.lambda().into(),
            cells[0].into(),
            cells[1].into(),
            cells[2].into(),
            status.into(),
        ]);
    }
    sink.emit("voi", &t, out)?;
    Ok(EXIT_OK)
}

fn mc_line(s: &mut String, label: &str, analytic: f64, est: &Estimate) -> bool {
    let ok = est.agrees_with(analytic, MC_SE, MC_BIAS);
    let _ = writeln!(
        s,
        "{:<4} {label:<40} analytic = {:.8e}  mc = {:.8e}  se = {:.3e}  z = {:+.3}",
        if ok { "ok" } else { "FAIL" },
        analytic,
        est.mean,
        est.stderr,
        est.z_score(analytic)
    );
    ok
}

/// Full verification report. Returns the text and whether every check
/// passed.
pub fn verify_report(spec: &GameSpec, sim: &SimConfig, scan_points: usize) -> crate::error::Result<(String, bool)> {
    let eq = spec.solve_equilibrium()?;
    let mut s = String::new();
    s.push_str(&equilibrium_report(&eq));
    s.push_str("\n[optimality]\n");
    let report = verify_equilibrium(spec, &eq);
    let _ = writeln!(s, "{report}");
    let mut ok = report.all_passed();

    s.push_str("\n[monte carlo]\n");
    let _ = writeln!(
        s,
        "paths = {}  seed = {}  scheme = {:?}  antithetic = {}",
        sim.paths, sim.seed, sim.scheme, sim.antithetic
    );
    let (a, l) = (eq.a_star, eq.l_star);
    let x_game = l + 0.1;
    let b = spec.x_bar_p() + 0.25;
    let (c, p) = montecarlo::simulate_game(spec, x_game, a, l, sim)?;
    ok &= mc_line(&mut s, "v_c(x; a*, l*)", spec.v_c(x_game, a, l), &c);
    ok &= mc_line(&mut s, "v_p(x; a*, l*)", spec.v_p(x_game, a, l), &p);
    let (c, p) = montecarlo::simulate_game_two_sided(spec, x_game, a, l, b, sim)?;
    ok &= mc_line(
        &mut s,
        "v_c(x; a*, l*) killed above b",
        spec.v_c_finite(x_game, a, l, b)?,
        &c,
    );
    ok &= mc_line(
        &mut s,
        "v_p(x; a*, l*) killed above b",
        spec.v_p_finite(x_game, a, l, b)?,
        &p,
    );
    let single = Simulator::new(*spec.model(), spec.q(), spec.lambda(), sim.clone())?;
    let au = spec.a_underbar();
    let x_single = au + 0.3;
    let est = single.single_player(spec.reward_c(), x_single, au);
    let exact = crate::rewards::v_single_player(spec.model(), spec.q(), spec.reward_c(), x_single, au)?;
    ok &= mc_line(&mut s, "single-player value at a_underbar", exact, &est);

    s.push_str("\n[empirical best responses]\n");
    let scan = empirical_best_response_scan(spec, &eq, x_game, scan_points, sim)?;
    for (name, side) in [("player C over a", &scan.c), ("player P over l", &scan.p)] {
        let _ = writeln!(
            s,
            "{:<4} {name:<40} at optimum = {:.8e}  grid max excess = {:+.3e}  se = {:.3e}",
            if side.consistent { "ok" } else { "FAIL" },
            side.at_optimum.mean,
            side.excess,
            side.at_optimum.stderr
        );
    }
    ok &= scan.passed();
    Ok((s, ok))
}

fn cmd_verify(spec: &GameSpec, cfg: &RunConfig, sink: &Sink, out: &mut dyn Write) -> Result<i32, Failure> {
    let sim = cfg.sim_config();
    let (mut text, ok) = verify_report(spec, &sim, cfg.mc.scan_points)?;
    let code = if !ok && sim.is_conclusive() {
        text.push_str("\nresult: FAIL\n");
        EXIT_FAILURE
    } else if !sim.is_conclusive() {
        let _ = writeln!(
            text,
            "\nresult: INCONCLUSIVE ({} paths < {} needed for standard-error checks)",
            sim.paths,
            montecarlo::MIN_CONCLUSIVE_PATHS
        );
        EXIT_INCONCLUSIVE
    } else {
        text.push_str("\nresult: PASS\n");
        EXIT_OK
    };
    out.write_all(text.as_bytes())?;
    sink.emit_text("verify.txt", &text)?;
    Ok(code)
}
