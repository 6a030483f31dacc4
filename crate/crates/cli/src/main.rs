//! `afprop` command-line driver.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 numerical failure or a
//! failed verification suite.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use afprop::algebra::{BlockElement, StateVec};
use afprop::cantor::{u_element, CantorPoint};
use afprop::cfrac::cf_expand;
use afprop::linalg::{ComplexMatrix, C64};
use afprop::lipnorm::LipData;
use afprop::mk::{mk_abelian, mk_general};
use afprop::propinquity::{
    effros_shen_chain_bound, effros_shen_continuity_bound, prefix_match_bound, truncation_bound,
    two_lipnorm_bridge_bound, two_lipnorm_grid_bound, uhf_holder_bound,
};
use afprop::spec::{load_tower, parse_tower_spec};
use afprop::sweep::{beta_continuity_sweep, effros_shen_sweep, holder_sweep, write_csv};
use afprop::tower::{cantor_tower, effros_shen_tower, uhf_tower, BetaSequence, InductiveTower};
use afprop::verify::{run_suite, SUITES};
use afprop::Error;

#[derive(Parser)]
#[command(name = "afprop", version, about = "Quantum metrics on AF algebra towers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a tower and print its levels, traces and validation report.
    Build {
        #[arg(value_enum)]
        kind: TowerChoice,
        #[command(flatten)]
        tower: TowerArgs,
    },
    /// Evaluate the Lip-norm of an element of the top level.
    Lip {
        #[command(flatten)]
        tower: TowerFlag,
        /// `unit`, `u<n>` (Cantor), `diag:v1,v2,...` or `@file.json`.
        #[arg(long)]
        element: String,
    },
    /// Monge-Kantorovich distance between two states of the top level.
    Mk {
        #[command(flatten)]
        tower: TowerFlag,
        /// Cantor point for the first state, as a bit string.
        #[arg(long)]
        x: Option<String>,
        /// Cantor point for the second state.
        #[arg(long)]
        y: Option<String>,
        /// First state: `trace`, `point:<block>` or `@file.json`.
        #[arg(long)]
        phi: Option<String>,
        /// Second state.
        #[arg(long)]
        psi: Option<String>,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// Certified upper bounds on the propinquity.
    Bound(BoundArgs),
    /// Run a seeded verification suite (`all` runs every suite).
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate bounds as CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TowerChoice {
    Uhf,
    EffrosShen,
    Cantor,
    Spec,
}

#[derive(Args, Clone)]
struct TowerArgs {
    /// Tower-spec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// UHF multiplicities (level n+1 repeats level n `mult_n + 1` times).
    #[arg(long, value_delimiter = ',')]
    mult: Option<Vec<u64>>,
    /// Continued-fraction digits for Effros-Shen towers.
    #[arg(long, value_delimiter = ',')]
    digits: Option<Vec<u64>>,
    #[arg(long)]
    theta: Option<f64>,
    /// Depth for Cantor towers, or for Effros-Shen towers without digits.
    #[arg(long)]
    depth: Option<usize>,
    /// Exponent of the dimension-power Lip weights.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Ratio of the Cantor weights `r^-n / 2`.
    #[arg(long, default_value_t = 2.0)]
    r: f64,
}

#[derive(Args, Clone)]
struct TowerFlag {
    #[arg(long, value_enum)]
    tower: TowerChoice,
    #[command(flatten)]
    args: TowerArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKindArg {
    Truncation,
    Prefix,
    Holder,
    TwoLipnorm,
    Grid,
    EffrosShenChain,
    Continuity,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKindArg,
    /// First tower-spec file (truncation, prefix, two-lipnorm, grid).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Second tower-spec file (prefix, two-lipnorm, grid).
    #[arg(long)]
    spec_b: Option<PathBuf>,
    #[arg(long)]
    level: Option<usize>,
    /// UHF multiplicity sequences for the Hölder bound.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<u64>>,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    theta2: Option<f64>,
    /// Grid resolution of the two-Lip-norm certificate.
    #[arg(long, default_value_t = 0.05)]
    h: f64,
    #[arg(long, default_value_t = 12)]
    max_level: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Holder,
    EffrosShen,
    Beta,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(value_enum)]
    kind: SweepKind,
    /// Base UHF multiplicities for the Hölder table.
    #[arg(long, value_delimiter = ',', default_value = "1,1,1,1,1,1,1,1,1")]
    mult: Vec<u64>,
    #[arg(long, default_value_t = 8)]
    max_shared: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    k: Vec<f64>,
    #[arg(long, default_value_t = 0.618_033_988_749_894_9)]
    theta: f64,
    /// Exponents m of the offsets `10^-m`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8")]
    m: Vec<i32>,
    #[arg(long, default_value_t = 0.05)]
    h: f64,
    #[arg(long, default_value_t = 12)]
    max_level: usize,
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Indices of the approximating weights `beta (1 - 1/(j+2))`.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000,10000")]
    steps: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    Io(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var("AFPROP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
    }
}

fn print_json(v: &Value) -> CliResult<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v).expect("values serialize"))?;
    Ok(())
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Build { kind, tower } => cmd_build(kind, &tower),
        Command::Lip { tower, element } => cmd_lip(&tower, &element),
        Command::Mk {
            tower,
            x,
            y,
            phi,
            psi,
            tol,
        } => cmd_mk(&tower, x, y, phi, psi, tol),
        Command::Bound(args) => cmd_bound(&args),
        Command::Verify { suite, seed, out } => cmd_verify(&suite, seed, out),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn missing(flag: &str) -> Failure {
    Failure::Lib(Error::Validation(format!("missing --{flag}")))
}

/// Builds the tower without consistency checks (so `build` can report
/// violations), plus its Lip weights.
fn make_tower(kind: TowerChoice, a: &TowerArgs) -> CliResult<(InductiveTower, BetaSequence)> {
    Ok(match kind {
        TowerChoice::Uhf => {
            let mult = a.mult.as_ref().ok_or_else(|| missing("mult"))?;
            uhf_tower(mult, a.depth.unwrap_or(mult.len()), a.k)?
        }
        TowerChoice::EffrosShen => {
            let theta = a.theta.ok_or_else(|| missing("theta"))?;
            let digits = match (&a.digits, a.depth) {
                (Some(d), _) => d.clone(),
                (None, Some(n)) => cf_expand(theta, n, afprop::cfrac::DEFAULT_GUARD)?,
                (None, None) => return Err(missing("digits")),
            };
            effros_shen_tower(&digits, theta, a.k)?
        }
        TowerChoice::Cantor => {
            let depth = a.depth.ok_or_else(|| missing("depth"))?;
            (cantor_tower(depth)?, BetaSequence::cantor(a.r, depth)?)
        }
        TowerChoice::Spec => {
            let path = a.spec.as_ref().ok_or_else(|| missing("spec"))?;
            parse_tower_spec(&fs::read_to_string(path)?)?.assemble()?
        }
    })
}

fn lip_data(t: &TowerFlag) -> CliResult<LipData> {
    let (tower, beta) = make_tower(t.tower, &t.args)?;
    let violations = tower.validate();
    if let Some(v) = violations.first() {
        return Err(Error::Inconsistent(format!("level {}: {}", v.level, v.detail)).into());
    }
    Ok(LipData::new(tower, beta)?)
}

fn cmd_build(kind: TowerChoice, a: &TowerArgs) -> CliResult<()> {
    let (tower, beta) = make_tower(kind, a)?;
    let violations = tower.validate();
    let dims: Vec<&[usize]> = tower.levels().iter().map(|l| l.block_dims()).collect();
    let traces: Vec<&[f64]> = tower.traces().iter().map(|t| t.weights()).collect();
    print_json(&json!({
        "kind": tower.kind(),
        "dims": dims,
        "traces": traces,
        "beta": beta.values(),
        "violations": violations,
        "valid": violations.is_empty(),
    }))?;
    if let Some(v) = violations.first() {
        return Err(Error::Inconsistent(format!("{} violation(s), first at level {}", violations.len(), v.level)).into());
    }
    Ok(())
}

fn parse_element(l: &LipData, text: &str) -> CliResult<BlockElement> {
    let top = l.top();
    if text == "unit" {
        return Ok(top.unit());
    }
    if let Some(n) = text.strip_prefix('u') {
        if let Ok(n) = n.parse::<usize>() {
            if !l.tower().is_cantor() {
                return Err(Error::Validation("u<n> needs a Cantor tower".into()).into());
            }
            return Ok(u_element(n, l.top_level())?);
        }
    }
    if let Some(values) = text.strip_prefix("diag:") {
        let v = values
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(top.diagonal(&v)?);
    }
    if let Some(path) = text.strip_prefix('@') {
        let v: Value = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        return Ok(BlockElement::new(top, blocks_from_json(&v)?)?);
    }
    Err(Error::Parse(format!("unrecognized element {text:?}")).into())
}

/// `[[row, ...], ...]` per block; entries are numbers or `[re, im]`.
fn blocks_from_json(v: &Value) -> CliResult<Vec<ComplexMatrix>> {
    let bad = || Failure::Lib(Error::Parse("expected a list of square blocks".into()));
    let blocks = v.get("blocks").unwrap_or(v).as_array().ok_or_else(bad)?;
    blocks
        .iter()
        .map(|b| {
            let rows = b.as_array().ok_or_else(bad)?;
            let mut data = Vec::new();
            for row in rows {
                for e in row.as_array().ok_or_else(bad)? {
                    let z = match e {
                        Value::Number(n) => C64::new(n.as_f64().ok_or_else(bad)?, 0.0),
                        Value::Array(p) if p.len() == 2 => {
                            C64::new(p[0].as_f64().ok_or_else(bad)?, p[1].as_f64().ok_or_else(bad)?)
                        }
                        _ => return Err(bad()),
                    };
                    data.push(z);
                }
            }
            Ok(ComplexMatrix::from_vec(rows.len(), rows.len(), data)?)
        })
        .collect()
}

fn cmd_lip(t: &TowerFlag, element: &str) -> CliResult<()> {
    let l = lip_data(t)?;
    let a = parse_element(&l, element)?;
    let profile = l.lip_profile(&a)?;
    print_json(&json!({
        "value": profile.iter().copied().fold(0.0, f64::max),
        "profile": profile,
        "lipschitz_constant": l.lipschitz_constant(),
    }))
}

fn parse_state(l: &LipData, text: &str) -> CliResult<StateVec> {
    let top = l.top();
    if text == "trace" {
        return Ok(StateVec::from_trace(top, l.tower().trace(l.top_level()))?);
    }
    if let Some(k) = text.strip_prefix("point:") {
        let k = k.parse::<usize>().map_err(|e| Error::Parse(format!("{k:?}: {e}")))?;
        return Ok(StateVec::point(top, k)?);
    }
    if let Some(path) = text.strip_prefix('@') {
        let v: Value = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        return Ok(StateVec::new(top, blocks_from_json(&v)?)?);
    }
    Err(Error::Parse(format!("unrecognized state {text:?}")).into())
}

fn cmd_mk(
    t: &TowerFlag,
    x: Option<String>,
    y: Option<String>,
    phi: Option<String>,
    psi: Option<String>,
    tol: f64,
) -> CliResult<()> {
    let l = lip_data(t)?;
    let (a, b) = match (x, y, phi, psi) {
        (Some(x), Some(y), None, None) => {
            let n = l.top_level();
            let (x, y): (CantorPoint, CantorPoint) = (x.parse()?, y.parse()?);
            (StateVec::point(l.top(), x.index(n)?)?, StateVec::point(l.top(), y.index(n)?)?)
        }
        (None, None, Some(p), Some(q)) => (parse_state(&l, &p)?, parse_state(&l, &q)?),
        _ => return Err(Error::Validation("give either --x and --y, or --phi and --psi".into()).into()),
    };
    let r = if l.tower().is_abelian() {
        mk_abelian(&l, &a, &b)?
    } else {
        mk_general(&l, &a, &b, tol)?
    };
    print_json(&json!({
        "value": r.value(),
        "lower": r.lower,
        "upper": r.upper,
        "method": r.method,
        "iterations": r.iterations,
        "converged": r.converged,
    }))?;
    if !r.converged {
        return Err(Error::Unconverged("cutting planes hit the iteration cap".into()).into());
    }
    Ok(())
}

fn load_spec(path: &Option<PathBuf>, flag: &str) -> CliResult<(InductiveTower, BetaSequence)> {
    let path = path.as_ref().ok_or_else(|| missing(flag))?;
    Ok(load_tower(&fs::read_to_string(path)?)?)
}

fn cmd_bound(a: &BoundArgs) -> CliResult<()> {
    let bound = match a.kind {
        BoundKindArg::Holder => {
            let beta = a.beta.as_ref().ok_or_else(|| missing("beta"))?;
            let eta = a.eta.as_ref().ok_or_else(|| missing("eta"))?;
            uhf_holder_bound(beta, eta, a.k)?
        }
        BoundKindArg::Truncation => {
            let (t, b) = load_spec(&a.spec, "spec")?;
            let level = a.level.ok_or_else(|| missing("level"))?;
            truncation_bound(&LipData::new(t, b)?, level)?
        }
        BoundKindArg::Prefix => {
            let (ta, ba) = load_spec(&a.spec, "spec")?;
            let (tb, bb) = load_spec(&a.spec_b, "spec-b")?;
            prefix_match_bound(&ta, &ba, &tb, &bb, a.level.ok_or_else(|| missing("level"))?)
        }
        BoundKindArg::TwoLipnorm | BoundKindArg::Grid => {
            let (ta, ba) = load_spec(&a.spec, "spec")?;
            let (tb, bb) = load_spec(&a.spec_b, "spec-b")?;
            let (la, lb) = (LipData::new(ta, ba)?, LipData::new(tb, bb)?);
            if matches!(a.kind, BoundKindArg::Grid) {
                two_lipnorm_grid_bound(&la, &lb, a.h)?
            } else {
                two_lipnorm_bridge_bound(&la, &lb, a.h)?
            }
        }
        BoundKindArg::EffrosShenChain => {
            let theta = a.theta.ok_or_else(|| missing("theta"))?;
            let theta2 = a.theta2.ok_or_else(|| missing("theta2"))?;
            effros_shen_chain_bound(theta, theta2, a.k, a.level.ok_or_else(|| missing("level"))?, a.h)?
        }
        BoundKindArg::Continuity => {
            let theta = a.theta.ok_or_else(|| missing("theta"))?;
            let theta2 = a.theta2.ok_or_else(|| missing("theta2"))?;
            effros_shen_continuity_bound(theta, theta2, a.k, a.max_level, a.h)?
        }
    };
    print_json(&serde_json::to_value(&bound).expect("bounds serialize"))
}

fn cmd_verify(suite: &str, seed: u64, out: Option<PathBuf>) -> CliResult<()> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let reports = names
        .iter()
        .map(|n| run_suite(n, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let value = if reports.len() == 1 {
        serde_json::to_value(&reports[0])
    } else {
        serde_json::to_value(&reports)
    }
    .expect("reports serialize");
    let text = serde_json::to_string_pretty(&value).expect("reports serialize") + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    let failures: Vec<String> = reports
        .iter()
        .filter_map(|r| {
            r.worst_failure().map(|c| {
                format!(
                    "{}: {} residual {:.3e} > {:.1e} at {}",
                    r.suite, c.name, c.max_residual, c.tolerance, c.worst_case
                )
            })
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(failures.join("; ")))
    }
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let mut buf = Vec::new();
    match a.kind {
        SweepKind::Holder => write_csv(&holder_sweep(&a.mult, a.max_shared, &a.k)?, &mut buf)?,
        SweepKind::EffrosShen => {
            let k = a.k.first().copied().unwrap_or(1.0);
            write_csv(&effros_shen_sweep(a.theta, &a.m, k, a.h, a.max_level)?, &mut buf)?
        }
        SweepKind::Beta => write_csv(&beta_continuity_sweep(a.r, a.depth, &a.steps, a.h)?, &mut buf)?,
    }
    match &a.out {
        Some(path) => fs::write(path, buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}
