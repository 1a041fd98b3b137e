//! The `gmech` command surface.
//!
//! Every subcommand writes one report (JSON by default, CSV with
//! `--format csv`) to stdout or `--out`. Exit codes: 0 pass, 1 numerical
//! failure or failed verdict, 2 usage, 3 input data.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    axiom_suite, doob_meyer, infinitesimal_probe, recover_generator, z_probe, ProbeSpec,
};
use crate::bsde::{as_mechanism, solve_range, DividendStream, LognormalMap, TerminalClaim};
use crate::error::{Error, Result};
use crate::generator::{make_black_scholes_generator, make_g_mu, BSMarketParams, Generator};
use crate::lattice::{AdaptedProcess, Lattice};
use crate::market::{load_chain, run_domination_test, strike_ladder, synth_chain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gmech", version, about = "Nonlinear pricing mechanisms on a Brownian lattice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Output {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price a claim under a named generator.
    Price(PriceArgs),
    /// Run the randomized axiom suite on E^g.
    Axioms(AxiomsArgs),
    /// Build Y = E^g[X; A*] and recover A* by decomposition.
    Decompose(DecomposeArgs),
    /// Recover the generator of E^g on a (y, z) grid.
    Recover(RecoverArgs),
    /// Difference-quotient probes of the generator.
    Probe(ProbeArgs),
    /// Run the four-family domination audit on an option chain.
    Audit(AuditArgs),
    /// Write a synthetic Black–Scholes option chain.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PriceArgs {
    /// zero | gmu:MU | abs_z:C | bs:r=R,b=B,sigma=S
    #[arg(long = "gen")]
    pub generator: String,
    /// bm | linbm:Z | const:C | call:K | put:K
    #[arg(long)]
    pub payoff: String,
    #[arg(long = "t", default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Spot for call/put payoffs.
    #[arg(long, default_value_t = 100.0)]
    pub s0: f64,
    /// Volatility of the underlying when the generator is not `bs`.
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// Constant dividend rate.
    #[arg(long, default_value_t = 0.0)]
    pub dividend_rate: f64,
    /// Include the full price surface.
    #[arg(long)]
    pub surface: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AxiomsArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 24)]
    pub steps: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecomposeArgs {
    #[arg(long = "gen")]
    pub generator: String,
    /// Terminal claim of the constructed supermartingale.
    #[arg(long, default_value = "bm")]
    pub payoff: String,
    /// Rate of the increasing process folded into Y.
    #[arg(long, default_value_t = 0.1)]
    pub rate: f64,
    /// Decompose this JSON-encoded adapted process instead.
    #[arg(long)]
    pub process: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 100.0)]
    pub s0: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RecoverArgs {
    #[arg(long = "gen-hidden")]
    pub generator: String,
    #[arg(long, default_value_t = 6)]
    pub level: u32,
    /// JSON list of [y, z] pairs, or {"ys": [...], "zs": [...]}.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub steps_per_interval: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Z,
    Infinitesimal,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProbeArgs {
    #[arg(long = "gen")]
    pub generator: String,
    #[arg(long, value_enum, default_value = "z")]
    pub kind: ProbeKind,
    #[arg(long, default_value_t = 1.0)]
    pub zbar: f64,
    #[arg(long, default_value_t = 0)]
    pub t_step: usize,
    /// Final step of the z-probe; defaults to the last lattice step.
    #[arg(long = "T-step")]
    pub big_t_step: Option<usize>,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub y: f64,
    /// Constant drift of the probed forward process.
    #[arg(long, default_value_t = 0.0)]
    pub drift: f64,
    /// Constant volatility of the probed forward process.
    #[arg(long, default_value_t = 1.0)]
    pub vol: f64,
    #[arg(long, default_value_t = 1)]
    pub eps_steps: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AuditArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Volatility of the lattice's lognormal map.
    #[arg(long, default_value_t = 0.2)]
    pub vol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0.05)]
    pub r: f64,
    #[arg(long, default_value_t = 0.08)]
    pub b: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100.0)]
    pub s0: f64,
    /// LO:HI:COUNT
    #[arg(long, default_value = "70:130:20")]
    pub strikes: String,
    #[arg(long, default_value_t = 0.0)]
    pub as_of: f64,
    #[arg(long, default_value_t = 365.0)]
    pub expiry: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A run failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Parse { .. } | Error::Schema(_) | Error::Invariant(_) | Error::EmptyChain => EXIT_INPUT,
            Error::NonPositiveHorizon { .. }
            | Error::ZeroSteps
            | Error::StepOutOfRange { .. }
            | Error::ShapeMismatch { .. }
            | Error::NegativeMu(_)
            | Error::InvalidParams(_)
            | Error::BadStepOrder { .. }
            | Error::BadPartition(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<i32, Failure>;

fn parse_kv(spec: &str) -> std::result::Result<Vec<(String, f64)>, Failure> {
    spec.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("bad number `{v}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn number(s: &str) -> std::result::Result<f64, Failure> {
    s.trim().parse().map_err(|_| Failure::usage(format!("bad number `{s}`")))
}

/// A parsed generator spec with the market parameters when it is `bs`.
pub struct GeneratorSpec {
    pub generator: Generator,
    pub market: Option<BSMarketParams>,
}

/// `zero`, `gmu:MU`, `abs_z:C` or `bs:r=R,b=B,sigma=S`.
pub fn parse_generator(spec: &str) -> std::result::Result<GeneratorSpec, Failure> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let generator = match head.trim() {
        "zero" => Generator::zero(),
        "gmu" => make_g_mu(number(rest)?)?,
        "abs_z" => Generator::abs_z(number(rest)?)?,
        "bs" => {
            let kv = parse_kv(rest)?;
            let get = |k: &str| {
                kv.iter()
                    .find(|(n, _)| n == k)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Failure::usage(format!("bs generator needs `{k}`")))
            };
            let p = BSMarketParams::new(get("r")?, get("b")?, get("sigma")?)?;
            return Ok(GeneratorSpec {
                generator: make_black_scholes_generator(p)?,
                market: Some(p),
            });
        }
        other => return Err(Failure::usage(format!("unknown generator `{other}`"))),
    };
    Ok(GeneratorSpec {
        generator,
        market: None,
    })
}

/// `bm`, `linbm:Z`, `const:C`, `call:K` or `put:K`; call and put read the
/// underlying through `map` over horizon `tau`.
pub fn parse_payoff(spec: &str, map: LognormalMap, tau: f64) -> std::result::Result<TerminalClaim, Failure> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match head.trim() {
        "bm" => TerminalClaim::brownian(),
        "linbm" => TerminalClaim::linear_bm(number(rest)?),
        "const" => TerminalClaim::constant(number(rest)?),
        "call" => TerminalClaim::call(map, tau, number(rest)?),
        "put" => TerminalClaim::put(map, tau, number(rest)?),
        other => return Err(Failure::usage(format!("unknown payoff `{other}`"))),
    })
}

fn underlying_map(g: &GeneratorSpec, s0: f64, sigma: f64) -> LognormalMap {
    match g.market {
        Some(p) => LognormalMap {
            s0,
            sigma: p.sigma,
            drift: p.b,
        },
        None => LognormalMap { s0, sigma, drift: 0.0 },
    }
}

fn emit(output: &Output, json: &impl Serialize, csv: impl FnOnce() -> Result<String>, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let text = match output.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(json).map_err(|e| Failure::from(Error::Io(e.to_string())))?;
            s.push('\n');
            s
        }
        Format::Csv => csv()?,
    };
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::from(Error::from(e)))?,
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::from(Error::from(e)))?,
    }
    Ok(())
}

fn csv_of<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Serialize)]
struct PriceReport<'a> {
    config: &'a PriceArgs,
    y0: f64,
    picard_iters: usize,
    residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    surface: Option<&'a [Vec<f64>]>,
}

#[derive(Serialize)]
struct NodeValue {
    step: usize,
    node: usize,
    value: f64,
}

fn node_rows(p: &AdaptedProcess) -> Vec<NodeValue> {
    let mut out = Vec::new();
    for i in p.first_step()..=p.last_step() {
        for j in 0..=i {
            out.push(NodeValue {
                step: i,
                node: j,
                value: p.get(i, j),
            });
        }
    }
    out
}

fn cmd_price(a: &PriceArgs, stdout: &mut dyn Write) -> Outcome {
    let g = parse_generator(&a.generator)?;
    let lattice = Lattice::uniform(a.t0, a.horizon, a.steps)?;
    let tau = a.horizon - a.t0;
    let claim = parse_payoff(&a.payoff, underlying_map(&g, a.s0, a.sigma), tau)?;
    let k = DividendStream::constant_rate(&lattice, a.dividend_rate);
    let res = solve_range(&g.generator, &lattice, 0, a.steps, &claim.terminal_values(&lattice), &k)?;
    let report = PriceReport {
        config: a,
        y0: res.value_at_origin(),
        picard_iters: res.picard_iters,
        residual: res.residual,
        surface: a.surface.then(|| res.y.rows()),
    };
    emit(
        &a.output,
        &report,
        || {
            if a.surface {
                csv_of(node_rows(&res.y))
            } else {
                csv_of([("y0", report.y0)])
            }
        },
        stdout,
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerdictRow {
    axiom: String,
    holds: bool,
    tested: usize,
    failures: usize,
    worst: f64,
}

fn cmd_axioms(a: &AxiomsArgs, stdout: &mut dyn Write) -> Outcome {
    if a.samples == 0 {
        return Err(Failure::usage("samples must be at least 1"));
    }
    let g = parse_generator(&a.generator)?;
    let lattice = Lattice::uniform(0.0, a.horizon, a.steps)?;
    let m = as_mechanism(&g.generator, &lattice);
    let report = axiom_suite(m.as_ref(), a.samples, a.seed)?;
    #[derive(Serialize)]
    struct Out<'a> {
        config: &'a AxiomsArgs,
        all_pass: bool,
        report: &'a crate::analysis::AxiomReport,
    }
    emit(
        &a.output,
        &Out {
            config: a,
            all_pass: report.all_pass(),
            report: &report,
        },
        || {
            csv_of(report.verdicts.iter().map(|v| VerdictRow {
                axiom: v.axiom.to_string(),
                holds: v.holds,
                tested: v.tested,
                failures: v.failures,
                worst: v.worst,
            }))
        },
        stdout,
    )?;
    Ok(if report.all_pass() { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_decompose(a: &DecomposeArgs, stdout: &mut dyn Write) -> Outcome {
    let g = parse_generator(&a.generator)?;
    let lattice = Lattice::uniform(0.0, a.horizon, a.steps)?;
    let zero = DividendStream::zero();
    let (y, planted) = match &a.process {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            let y: AdaptedProcess = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
            (y, None)
        }
        None => {
            let claim = parse_payoff(&a.payoff, underlying_map(&g, a.s0, a.sigma), a.horizon)?;
            let planted = DividendStream::constant_rate(&lattice, a.rate);
            let y = solve_range(&g.generator, &lattice, 0, a.steps, &claim.terminal_values(&lattice), &planted)?.y;
            (y, Some(planted))
        }
    };
    let d = doob_meyer(&g.generator, &y, &zero, &lattice)?;
    let planted_error = planted.map(|p| d.increments.max_abs_diff(&p.to_process(&lattice)));
    #[derive(Serialize)]
    struct Out<'a> {
        config: &'a DecomposeArgs,
        reconstruction_error: f64,
        min_increment: f64,
        planted_error: Option<f64>,
        increments: &'a [Vec<f64>],
    }
    emit(
        &a.output,
        &Out {
            config: a,
            reconstruction_error: d.reconstruction_error,
            min_increment: d.min_increment(),
            planted_error,
            increments: d.increments.rows(),
        },
        || csv_of(node_rows(&d.increments)),
        stdout,
    )?;
    Ok(if d.reconstruction_error <= 1e-9 { EXIT_OK } else { EXIT_NUMERICAL })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointsFile {
    Pairs(Vec<(f64, f64)>),
    Axes { ys: Vec<f64>, zs: Vec<f64> },
}

/// Reads a points file: a list of `[y, z]` pairs or `{"ys": [...], "zs": [...]}`.
pub fn load_points(path: &std::path::Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let parsed: PointsFile = serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
    Ok(match parsed {
        PointsFile::Pairs(p) => p,
        PointsFile::Axes { ys, zs } => crate::analysis::tensor_grid(&ys, &zs),
    })
}

/// Default 5 x 5 grid on `[-0.4, 0.4]^2`.
pub fn default_points() -> Vec<(f64, f64)> {
    let axis = [-0.4, -0.2, 0.0, 0.2, 0.4];
    crate::analysis::tensor_grid(&axis, &axis)
}

fn cmd_recover(a: &RecoverArgs, stdout: &mut dyn Write) -> Outcome {
    let g = parse_generator(&a.generator)?;
    let points = match &a.points {
        Some(p) => load_points(p)?,
        None => default_points(),
    };
    if a.steps_per_interval == 0 {
        return Err(Failure::usage("steps-per-interval must be at least 1"));
    }
    let steps = (1usize << a.level.min(20)) * a.steps_per_interval;
    let lattice = Lattice::uniform(0.0, a.horizon, steps)?;
    let m = as_mechanism(&g.generator, &lattice);
    let rec = recover_generator(m.as_ref(), a.level, &points)?;
    let ok = rec.lipschitz_certified() && rec.max_origin_value() <= 1e-6;
    #[derive(Serialize)]
    struct Out<'a> {
        config: &'a RecoverArgs,
        mu: f64,
        lipschitz_ratio: f64,
        lipschitz_certified: bool,
        max_origin_value: f64,
        table: Vec<crate::analysis::TableRow>,
    }
    emit(
        &a.output,
        &Out {
            config: a,
            mu: rec.mu,
            lipschitz_ratio: rec.lipschitz_ratio,
            lipschitz_certified: rec.lipschitz_certified(),
            max_origin_value: rec.max_origin_value(),
            table: rec.table(),
        },
        || rec.to_csv(),
        stdout,
    )?;
    Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_probe(a: &ProbeArgs, stdout: &mut dyn Write) -> Outcome {
    let g = parse_generator(&a.generator)?;
    let lattice = Lattice::uniform(0.0, a.horizon, a.steps)?;
    let m = as_mechanism(&g.generator, &lattice);
    let value = match a.kind {
        ProbeKind::Z => z_probe(m.as_ref(), a.zbar, a.t_step, a.big_t_step.unwrap_or(a.steps))?,
        ProbeKind::Infinitesimal => {
            let (drift, vol) = (a.drift, a.vol);
            let b = move |_: f64| drift;
            let s = move |_: f64| vol;
            let spec = ProbeSpec {
                x: a.x,
                p: a.p,
                y: a.y,
                b: &b,
                sigma: &s,
                t_step: a.t_step,
            };
            infinitesimal_probe(m.as_ref(), spec, a.eps_steps)?
        }
    };
    #[derive(Serialize)]
    struct Out<'a> {
        config: &'a ProbeArgs,
        value: f64,
    }
    emit(&a.output, &Out { config: a, value }, || csv_of([("value", value)]), stdout)?;
    Ok(EXIT_OK)
}

fn cmd_audit(a: &AuditArgs, stdout: &mut dyn Write) -> Outcome {
    let chain = load_chain(&a.chain)?;
    let report = run_domination_test(&chain, a.mu, a.steps, a.vol)?;
    #[derive(Serialize)]
    struct Out<'a> {
        config: &'a AuditArgs,
        tested: usize,
        violations: usize,
        anomalies: usize,
        report: &'a crate::market::DominationReport,
    }
    emit(
        &a.output,
        &Out {
            config: a,
            tested: report.tested(),
            violations: report.violated(),
            anomalies: report.anomalies.len(),
            report: &report,
        },
        || report.to_csv(),
        stdout,
    )?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_synth(a: &SynthArgs) -> Outcome {
    let parts: Vec<&str> = a.strikes.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::usage("strikes must be LO:HI:COUNT"));
    }
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Failure::usage(format!("bad strike count `{}`", parts[2])))?;
    let strikes = strike_ladder(number(parts[0])?, number(parts[1])?, count);
    let p = BSMarketParams::new(a.r, a.b, a.sigma)?;
    let chain = synth_chain(p, a.s0, &strikes, a.as_of, a.expiry, None)?;
    chain.write(&a.out)?;
    Ok(EXIT_OK)
}

/// Runs the command line in `args` (including the program name), writing
/// reports to `stdout` and diagnostics to stderr. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Price(a) => cmd_price(a, stdout),
        Command::Axioms(a) => cmd_axioms(a, stdout),
        Command::Decompose(a) => cmd_decompose(a, stdout),
        Command::Recover(a) => cmd_recover(a, stdout),
        Command::Probe(a) => cmd_probe(a, stdout),
        Command::Audit(a) => cmd_audit(a, stdout),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("gmech: {}", f.message);
            f.code
        }
    }
}
