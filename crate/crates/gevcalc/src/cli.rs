//! Command line front end.
//!
//! Every subcommand reads JSON documents in the [`crate::io`] schemas, runs
//! the corresponding library routine, and prints a single report object on
//! stdout carrying the engine name and version, the fully resolved
//! configuration (defaults filled in), and a command-specific summary.
//! Artifacts such as composed symbols or certificates embed in the report
//! under `"artifact"` and can additionally be written to `--output`; tabular
//! diagnostics embed under `"table"` and go to `--report` as CSV with a
//! leading `#` comment line naming the engine version and configuration.
//! serde_json orders object keys, so rerunning a command on the same inputs
//! produces byte-identical output.
//!
//! Exit codes: 0 on success, 2 for validation failures including argument
//! errors, 3 when a numerical method gives up (a contour point or filter
//! shift lands on the spectrum, the quadrature refuses to converge), and 4
//! when a request exceeds the stored jet or h order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::adiabatic::{
    check_intertwining, check_projector_identity, eigh, growth_report, projector_expansion,
    Contour, FilterSymbol, FloatMatrix, OperatorFamily, DEFAULT_NODES,
};
use crate::error::{Error, Result};
use crate::gevrey::{
    ak_sup, certificate_from_symbol, certificate_neumann, check_derivative_inequality,
    check_product_inequality, fit_growth, GevreyParams, GrowthFit, SampleSet,
};
use crate::io::{read_json, symbol_from_json, symbol_to_json, write_json};
use crate::jet::{Jet, MultiIndex, VarSplit};
use crate::ring::{
    ln_factorial, rat_from_str, rat_to_str, ComplexFloat, GaussianRational, NormValue, Rat, Ring,
    Scalar, SquareMatrix,
};
use crate::symbol::{FormalSymbol, Side};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "gevcalc",
    version,
    about = "Exact calculus for semiclassical symbols with Gevrey growth control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose two symbols with the noncommutative product.
    Sharp(SharpArgs),
    /// Invert an elliptic symbol order by order and report the residual.
    Parametrix(ParametrixArgs),
    /// Evaluate a truncated symbol sum at a concrete semiclassical parameter.
    Resum(ResumArgs),
    /// Fit growth constants to the coefficient norms of a symbol.
    Fit(FitArgs),
    /// Build a norm certificate for a symbol and tabulate its envelope.
    Certify(CertifyArgs),
    /// Expand the spectral projector of an operator family in powers of h.
    Adiabatic(AdiabaticArgs),
    /// Run the built-in consistency checks and print a pass/fail matrix.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Backend {
    /// Gaussian rational coefficients, every identity checked exactly.
    Exact,
    /// Complex double precision coefficients.
    Float,
}

impl Backend {
    fn label(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Float => "float",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
    TwoSided,
}

impl SideArg {
    fn to_side(self) -> Side {
        match self {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
            SideArg::TwoSided => Side::TwoSided,
        }
    }

    fn label(self) -> &'static str {
        match self {
            SideArg::Left => "left",
            SideArg::Right => "right",
            SideArg::TwoSided => "two-sided",
        }
    }
}

#[derive(Args)]
struct SharpArgs {
    /// Left factor, a symbol document.
    #[arg(long)]
    input: PathBuf,
    /// Right factor, a symbol document.
    #[arg(long = "with")]
    with: PathBuf,
    /// Number of h orders to keep in the product.
    #[arg(long)]
    order: u32,
    #[arg(long, value_enum, default_value = "exact")]
    backend: Backend,
    /// Write the composed symbol here as well as embedding it in the report.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ParametrixArgs {
    /// Elliptic symbol document.
    #[arg(long)]
    input: PathBuf,
    /// Number of h orders of the inverse to construct.
    #[arg(long)]
    order: u32,
    /// Which inverse to build; two-sided checks both agree.
    #[arg(long, value_enum, default_value = "two-sided")]
    side: SideArg,
    #[arg(long, value_enum, default_value = "exact")]
    backend: Backend,
    /// Write the parametrix here as well as embedding it in the report.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ResumArgs {
    /// Symbol document to evaluate.
    #[arg(long)]
    input: PathBuf,
    /// Semiclassical parameter, a positive rational such as 1/16.
    #[arg(long = "h", value_name = "RATIONAL")]
    h: String,
    /// Growth radius used to pick the truncation cutoff.
    #[arg(long, value_name = "RATIONAL")]
    radius: String,
    /// Comma-separated offset from the base point, element strings.
    #[arg(long)]
    offset: Option<String>,
    #[arg(long, value_enum, default_value = "exact")]
    backend: Backend,
    /// Write the evaluation record here as well.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Symbol document whose coefficient norms get fitted.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    backend: Backend,
    /// Write the fit record here as well.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the per-order table as CSV (columns k, norm, envelope, ratio).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Symbol document to certify.
    #[arg(long)]
    input: PathBuf,
    /// Pseudonorm window, a positive rational.
    #[arg(long, value_name = "RATIONAL")]
    t0: String,
    #[arg(long, value_enum, default_value = "exact")]
    backend: Backend,
    /// Write the certificate here as well.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the per-order table as CSV (columns k, norm, envelope, ratio).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AdiabaticArgs {
    /// Operator family document.
    #[arg(long)]
    input: PathBuf,
    /// Number of projector corrections to construct.
    #[arg(long)]
    order: u32,
    /// Contour quadrature nodes before adaptive doubling.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    nodes: u32,
    /// Optional spectral filter document applied inside the resolvent.
    #[arg(long)]
    filter: Option<PathBuf>,
    /// Residual budget the summary's within_tol verdict is measured against.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Write the expansion here as well as embedding it in the report.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the per-order table as CSV (columns j, norm, envelope,
    /// fitted_exponent).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Seed for the randomized checks.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Valid jet order of the randomized inputs.
    #[arg(long, default_value_t = 6)]
    jet_order: u32,
}

/// Parses the command line, runs the requested command, and returns the
/// process exit code. All human-facing errors go to stderr; reports go to
/// stdout.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gevcalc: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    let report = match command {
        Command::Sharp(a) => match a.backend {
            Backend::Exact => run_sharp::<GaussianRational>(a)?,
            Backend::Float => run_sharp::<ComplexFloat>(a)?,
        },
        Command::Parametrix(a) => match a.backend {
            Backend::Exact => run_parametrix::<GaussianRational>(a)?,
            Backend::Float => run_parametrix::<ComplexFloat>(a)?,
        },
        Command::Resum(a) => match a.backend {
            Backend::Exact => run_resum::<GaussianRational>(a)?,
            Backend::Float => run_resum::<ComplexFloat>(a)?,
        },
        Command::Fit(a) => match a.backend {
            Backend::Exact => run_fit::<GaussianRational>(a)?,
            Backend::Float => run_fit::<ComplexFloat>(a)?,
        },
        Command::Certify(a) => match a.backend {
            Backend::Exact => run_certify::<GaussianRational>(a)?,
            Backend::Float => run_certify::<ComplexFloat>(a)?,
        },
        Command::Adiabatic(a) => run_adiabatic(a)?,
        Command::Selftest(a) => return Ok(run_selftest(a)),
    };
    println!("{}", to_pretty(&report));
    Ok(0)
}

fn to_pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("report serialization cannot fail")
}

fn path_str(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn opt_path_str(p: &Option<PathBuf>) -> Value {
    p.as_ref().map_or(Value::Null, |p| path_str(p))
}

fn report(command: &str, config: Value, summary: Value) -> Value {
    json!({
        "engine": {"name": "gevcalc", "version": VERSION},
        "command": command,
        "config": config,
        "summary": summary,
    })
}

fn attach(report: &mut Value, key: &str, v: Value) {
    report
        .as_object_mut()
        .expect("reports are objects")
        .insert(key.to_string(), v);
}

fn read_symbol<R: Ring>(path: &Path) -> Result<FormalSymbol<R>>
where
    R::Shape: crate::io::ShapeCode,
{
    symbol_from_json(&read_json(path)?)
}

fn per_order_norms<R: Ring>(s: &FormalSymbol<R>) -> Vec<f64> {
    s.coeffs().iter().map(Jet::max_coeff_nu).collect()
}

fn f64_json(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| json!(v)).collect())
}

/// Writes a CSV table with a leading comment line identifying the engine and
/// the configuration that produced it.
fn write_table(path: &Path, config_line: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = format!("# gevcalc {VERSION} {config_line}\n");
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn table_json(columns: &[&str], rows: &[Vec<String>]) -> Value {
    json!({
        "columns": columns,
        "rows": rows,
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// The fitted envelope C R^k (k!)^e evaluated in log space so large orders
/// cannot overflow prematurely.
fn fitted_envelope(fit: &GrowthFit, k: u32) -> f64 {
    (fit.fitted_c.ln()
        + f64::from(k) * fit.fitted_r.ln()
        + fit.fitted_exponent * ln_factorial(u64::from(k)))
    .exp()
}

fn fit_json(fit: &GrowthFit) -> Value {
    json!({
        "c": fit.fitted_c,
        "r": fit.fitted_r,
        "exponent": fit.fitted_exponent,
        "residual": fit.residual,
        "used": fit.used,
    })
}

fn gevrey_json(params: &GevreyParams) -> Value {
    json!({
        "s": rat_to_str(params.s()),
        "sigma": rat_to_str(params.sigma()),
    })
}

fn run_sharp<R: Ring>(a: &SharpArgs) -> Result<Value>
where
    R::Shape: crate::io::ShapeCode,
{
    let p: FormalSymbol<R> = read_symbol(&a.input)?;
    let q: FormalSymbol<R> = read_symbol(&a.with)?;
    let composed = p.sharp(&q, a.order)?;
    let config = json!({
        "input": path_str(&a.input),
        "with": path_str(&a.with),
        "order": a.order,
        "backend": a.backend.label(),
        "output": opt_path_str(&a.output),
    });
    let summary = json!({
        "gevrey": gevrey_json(composed.symbol.gevrey()),
        "per_order_valid": composed.per_order_valid,
        "per_order_norm": f64_json(&per_order_norms(&composed.symbol)),
    });
    let artifact = symbol_to_json(&composed.symbol);
    if let Some(path) = &a.output {
        write_json(path, &artifact)?;
    }
    let mut rep = report("sharp", config, summary);
    attach(&mut rep, "artifact", artifact);
    Ok(rep)
}

/// Residual of a candidate inverse: the composition minus the identity
/// symbol, reported order by order. The operands are zero-padded first, so a
/// parametrix of deeper h-order than its input composes cleanly.
fn composition_residual<R: Ring>(
    left: &FormalSymbol<R>,
    right: &FormalSymbol<R>,
    order: u32,
) -> Result<Value> {
    let composed = left.padded(order)?.sharp(&right.padded(order)?, order)?.symbol;
    let identity = FormalSymbol::identity(
        composed.gevrey().clone(),
        composed.split(),
        composed.base().to_vec(),
        composed.shape(),
        composed.coeff(0).valid(),
        order,
    )?;
    let residual = composed.sub(&identity)?;
    let per_order = per_order_norms(&residual);
    let max = per_order.iter().cloned().fold(0.0f64, f64::max);
    let exact_zero = residual.coeffs().iter().all(Jet::is_zero);
    Ok(json!({
        "max": max,
        "per_order": f64_json(&per_order),
        "exact_zero": exact_zero,
    }))
}

fn run_parametrix<R: Ring>(a: &ParametrixArgs) -> Result<Value>
where
    R::Shape: crate::io::ShapeCode,
{
    let p: FormalSymbol<R> = read_symbol(&a.input)?;
    let q = p.parametrix(a.order, a.side.to_side())?;
    let residual = match a.side {
        SideArg::Left => json!({"left": composition_residual(&q, &p, a.order)?}),
        SideArg::Right => json!({"right": composition_residual(&p, &q, a.order)?}),
        SideArg::TwoSided => json!({
            "left": composition_residual(&q, &p, a.order)?,
            "right": composition_residual(&p, &q, a.order)?,
        }),
    };
    let config = json!({
        "input": path_str(&a.input),
        "order": a.order,
        "side": a.side.label(),
        "backend": a.backend.label(),
        "output": opt_path_str(&a.output),
    });
    let summary = json!({
        "gevrey": gevrey_json(q.gevrey()),
        "per_order_norm": f64_json(&per_order_norms(&q)),
        "residual": residual,
    });
    let artifact = symbol_to_json(&q);
    if let Some(path) = &a.output {
        write_json(path, &artifact)?;
    }
    let mut rep = report("parametrix", config, summary);
    attach(&mut rep, "artifact", artifact);
    Ok(rep)
}

fn parse_offset<R: Ring>(raw: Option<&str>, arity: usize) -> Result<Vec<R::S>> {
    let Some(raw) = raw else {
        return Ok(vec![<R::S as Scalar>::zero(); arity]);
    };
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != arity {
        return Err(Error::Validation(format!(
            "offset has {} components, the symbol has {arity} variables",
            parts.len()
        )));
    }
    parts
        .into_iter()
        .map(<R::S as Scalar>::parse_element_string)
        .collect()
}

fn run_resum<R: Ring>(a: &ResumArgs) -> Result<Value>
where
    R::Shape: crate::io::ShapeCode,
{
    let p: FormalSymbol<R> = read_symbol(&a.input)?;
    let h = rat_from_str(&a.h)?;
    let radius = rat_from_str(&a.radius)?;
    let offset = parse_offset::<R>(a.offset.as_deref(), p.split().total())?;
    let outcome = p.resum(&h, &radius, &offset)?;
    let offset_strings: Vec<String> = offset.iter().map(Scalar::to_element_string).collect();
    let config = json!({
        "input": path_str(&a.input),
        "h": rat_to_str(&h),
        "radius": rat_to_str(&radius),
        "offset": offset_strings,
        "backend": a.backend.label(),
        "output": opt_path_str(&a.output),
    });
    let artifact = json!({
        "h": rat_to_str(&h),
        "radius": rat_to_str(&radius),
        "offset": offset_strings,
        "cutoff": outcome.cutoff,
        "value": outcome.value.to_json(),
    });
    let summary = json!({
        "cutoff": outcome.cutoff,
        "value": outcome.value.to_json(),
    });
    if let Some(path) = &a.output {
        write_json(path, &artifact)?;
    }
    let mut rep = report("resum", config, summary);
    attach(&mut rep, "artifact", artifact);
    Ok(rep)
}

/// Table rows shared by fit and certify: order, measured norm, model
/// envelope, and their ratio.
fn envelope_rows(norms: &[f64], envelope: impl Fn(u32) -> Result<f64>) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::with_capacity(norms.len());
    for (k, &norm) in norms.iter().enumerate() {
        let env = envelope(k as u32)?;
        let ratio = if env > 0.0 { norm / env } else { f64::NAN };
        rows.push(vec![k.to_string(), fmt_f64(norm), fmt_f64(env), fmt_f64(ratio)]);
    }
    Ok(rows)
}

fn run_fit<R: Ring>(a: &FitArgs) -> Result<Value>
where
    R::Shape: crate::io::ShapeCode,
{
    let p: FormalSymbol<R> = read_symbol(&a.input)?;
    let norms = per_order_norms(&p);
    let fit = fit_growth(&norms, p.gevrey())?;
    let columns = ["k", "norm", "envelope", "ratio"];
    let rows = envelope_rows(&norms, |k| Ok(fitted_envelope(&fit, k)))?;
    let config = json!({
        "input": path_str(&a.input),
        "backend": a.backend.label(),
        "output": opt_path_str(&a.output),
        "report": opt_path_str(&a.report),
    });
    let summary = json!({
        "gevrey": gevrey_json(p.gevrey()),
        "declared_exponent": NormValue::to_f64(&p.gevrey().growth_exponent()),
        "fit": fit_json(&fit),
    });
    let artifact = fit_json(&fit);
    if let Some(path) = &a.output {
        write_json(path, &artifact)?;
    }
    if let Some(path) = &a.report {
        let line = format!("fit backend={} input={}", a.backend.label(), a.input.display());
        write_table(path, &line, &columns, &rows)?;
    }
    let mut rep = report("fit", config, summary);
    attach(&mut rep, "artifact", artifact);
    attach(&mut rep, "table", table_json(&columns, &rows));
    Ok(rep)
}

fn run_certify<R: Ring>(a: &CertifyArgs) -> Result<Value>
where
    R::Shape: crate::io::ShapeCode,
{
    let p: FormalSymbol<R> = read_symbol(&a.input)?;
    let t0 = rat_from_str(&a.t0)?;
    let samples = SampleSet::origin(p.split().total());
    let cert = certificate_from_symbol(&p, &samples, &t0, None)?;
    let norms = per_order_norms(&p);
    let columns = ["k", "norm", "envelope", "ratio"];
    let rows = envelope_rows(&norms, |k| Ok(NormValue::to_f64(&cert.envelope_at(k)?)))?;
    let config = json!({
        "input": path_str(&a.input),
        "t0": rat_to_str(&t0),
        "backend": a.backend.label(),
        "output": opt_path_str(&a.output),
        "report": opt_path_str(&a.report),
    });
    let summary = json!({
        "gevrey": gevrey_json(p.gevrey()),
        "c": rat_to_str(cert.c()),
        "r": rat_to_str(cert.r()),
        "t0": rat_to_str(cert.t0()),
        "exponential": cert.is_exponential(),
        "finite": cert.is_finite(),
        "fitted_exponent": cert.fitted_exponent(),
    });
    let artifact = cert.to_json();
    if let Some(path) = &a.output {
        write_json(path, &artifact)?;
    }
    if let Some(path) = &a.report {
        let line = format!(
            "certify backend={} t0={} input={}",
            a.backend.label(),
            rat_to_str(&t0),
            a.input.display()
        );
        write_table(path, &line, &columns, &rows)?;
    }
    let mut rep = report("certify", config, summary);
    attach(&mut rep, "artifact", artifact);
    attach(&mut rep, "table", table_json(&columns, &rows));
    Ok(rep)
}

fn residual_json(r: &crate::adiabatic::ResidualReport) -> Value {
    json!({
        "max": r.max_residual,
        "per_order": f64_json(&r.per_order),
    })
}

fn run_adiabatic(a: &AdiabaticArgs) -> Result<Value> {
    let family = OperatorFamily::from_json(&read_json(&a.input)?)?;
    let filter = match &a.filter {
        Some(path) => Some(FilterSymbol::from_json(&read_json(path)?)?),
        None => None,
    };
    let contour = Contour::for_gap(family.gap(), a.nodes)?;
    let pi = projector_expansion(&family, a.order, &contour, filter.as_ref())?;
    let identity = check_projector_identity(&pi);
    let intertwining = check_intertwining(&pi, &family, filter.as_ref())?;
    let sigma = filter
        .as_ref()
        .map(|f| f.sigma().clone())
        .unwrap_or_else(|| Rat::from_integer(1.into()));
    let fit = match growth_report(&pi, family.gevrey_s(), &sigma) {
        Ok(fit) => Some(fit),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    // Filtered expansions store the window slice at its base point, so the
    // identity and intertwining checks carry a bounded slice defect from the
    // dropped window derivatives; within_tol is only meaningful without a
    // filter.
    let within_tol = if filter.is_some() {
        Value::Null
    } else {
        Value::Bool(identity.max_residual <= a.tol && intertwining.max_residual <= a.tol)
    };
    let norms = pi.norms_at_base()?;
    let columns = ["j", "norm", "envelope", "fitted_exponent"];
    let rows: Vec<Vec<String>> = norms
        .iter()
        .enumerate()
        .map(|(j, &norm)| {
            let (env, expo) = match &fit {
                Some(fit) => (fitted_envelope(fit, j as u32), fit.fitted_exponent),
                None => (f64::NAN, f64::NAN),
            };
            vec![j.to_string(), fmt_f64(norm), fmt_f64(env), fmt_f64(expo)]
        })
        .collect();
    let config = json!({
        "input": path_str(&a.input),
        "order": a.order,
        "nodes": a.nodes,
        "filter": opt_path_str(&a.filter),
        "tol": a.tol,
        "backend": "float",
        "output": opt_path_str(&a.output),
        "report": opt_path_str(&a.report),
    });
    let summary = json!({
        "dim": family.dim(),
        "order": pi.order(),
        "nodes_used": pi.nodes_used(),
        "construction_residuals": serde_json::to_value(pi.residuals())?,
        "identity": residual_json(&identity),
        "intertwining": residual_json(&intertwining),
        "within_tol": within_tol,
        "slice_defect_expected": filter.is_some(),
        "growth": fit.as_ref().map_or(Value::Null, fit_json),
        "per_order_norm": f64_json(&norms),
    });
    let artifact = pi.to_json();
    if let Some(path) = &a.output {
        write_json(path, &artifact)?;
    }
    if let Some(path) = &a.report {
        let line = format!(
            "adiabatic order={} nodes={} filter={} input={}",
            a.order,
            a.nodes,
            a.filter
                .as_ref()
                .map_or("none".to_string(), |p| p.display().to_string()),
            a.input.display()
        );
        write_table(path, &line, &columns, &rows)?;
    }
    let mut rep = report("adiabatic", config, summary);
    attach(&mut rep, "artifact", artifact);
    attach(&mut rep, "table", table_json(&columns, &rows));
    Ok(rep)
}

fn run_selftest(a: &SelftestArgs) -> i32 {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "gevcalc {VERSION} selftest seed={} jet-order={}",
        a.seed, a.jet_order
    );
    let mut failed = 0usize;
    for (name, outcome) in selftest_checks(a.seed, a.jet_order) {
        match outcome {
            Ok(()) => {
                let _ = writeln!(out, "[PASS] {name}");
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(out, "[FAIL] {name}: {e}");
            }
        }
    }
    if failed == 0 {
        let _ = writeln!(out, "selftest: all checks passed");
    } else {
        let _ = writeln!(out, "selftest: {failed} check(s) failed");
    }
    print!("{out}");
    if failed == 0 {
        0
    } else {
        2
    }
}

fn ensure(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(what.to_string()))
    }
}

fn rlit(s: &str) -> Rat {
    rat_from_str(s).expect("literal rational")
}

type Exact = GaussianRational;

fn qs(n: i64) -> Exact {
    <Exact as Scalar>::from_i64(n)
}

/// A dense random jet in one position and one frequency variable with small
/// integer coefficients, the workhorse input of the randomized checks.
fn random_jet(rng: &mut ChaCha8Rng, valid: u32) -> Result<Jet<Exact>> {
    let split = VarSplit::new(1, 1)?;
    let base = vec![qs(0), qs(0)];
    let mut entries = Vec::new();
    for i in 0..=valid {
        for j in 0..=(valid - i) {
            let c = rng.gen_range(-4i64..=4);
            if c != 0 {
                entries.push((MultiIndex(vec![i, j]), qs(c)));
            }
        }
    }
    Jet::from_parts(split, base, (), valid, valid, entries)
}

fn random_symbol(rng: &mut ChaCha8Rng, h_order: u32, valid: u32) -> Result<FormalSymbol<Exact>> {
    let params = GevreyParams::from_integers(1, 1)?;
    let coeffs: Result<Vec<_>> = (0..=h_order).map(|_| random_jet(rng, valid)).collect();
    FormalSymbol::new(params, coeffs?)
}

/// Like [`random_symbol`] but with the constant term of the leading
/// coefficient pinned away from zero, so the symbol is elliptic.
fn random_elliptic(rng: &mut ChaCha8Rng, h_order: u32, valid: u32) -> Result<FormalSymbol<Exact>> {
    let p = random_symbol(rng, h_order, valid)?;
    let split = p.split();
    let base = p.base().to_vec();
    let shift = Jet::constant(split, base, p.coeff(0).valid(), qs(6))?;
    let mut coeffs: Vec<Jet<Exact>> = p.coeffs().to_vec();
    coeffs[0] = coeffs[0].add(&shift)?;
    FormalSymbol::new(p.gevrey().clone(), coeffs)
}

fn identity_like(p: &FormalSymbol<Exact>, h_order: u32) -> Result<FormalSymbol<Exact>> {
    FormalSymbol::identity(
        p.gevrey().clone(),
        p.split(),
        p.base().to_vec(),
        (),
        p.coeff(0).valid(),
        h_order,
    )
}

fn is_zero_symbol(s: &FormalSymbol<Exact>) -> bool {
    s.coeffs().iter().all(Jet::is_zero)
}

fn check_sharp_units(rng: &mut ChaCha8Rng, valid: u32) -> Result<()> {
    let p = random_symbol(rng, 2, valid)?;
    let one = identity_like(&p, 2)?;
    let left = one.sharp(&p, 2)?.symbol.sub(&p)?;
    let right = p.sharp(&one, 2)?.symbol.sub(&p)?;
    ensure(
        is_zero_symbol(&left) && is_zero_symbol(&right),
        "composing with the identity changed the symbol",
    )
}

fn check_sharp_associativity(rng: &mut ChaCha8Rng, valid: u32) -> Result<()> {
    let a = random_symbol(rng, 2, valid)?;
    let b = random_symbol(rng, 2, valid)?;
    let c = random_symbol(rng, 2, valid)?;
    let left = a.sharp(&b, 2)?.symbol.sharp(&c, 2)?.symbol;
    let right = a.sharp(&b.sharp(&c, 2)?.symbol, 2)?.symbol;
    ensure(
        is_zero_symbol(&left.sub(&right)?),
        "the two association orders disagree",
    )
}

fn check_parametrix(rng: &mut ChaCha8Rng, valid: u32) -> Result<()> {
    let p = random_elliptic(rng, 3, valid)?;
    let q = p.parametrix(3, Side::TwoSided)?;
    let right = composition_is_identity(&p, &q)?;
    let left = composition_is_identity(&q, &p)?;
    ensure(right && left, "the parametrix leaves a residual")
}

fn composition_is_identity(l: &FormalSymbol<Exact>, r: &FormalSymbol<Exact>) -> Result<bool> {
    let composed = l.sharp(r, 3)?.symbol;
    let residual = composed.sub(&identity_like(&composed, 3)?)?;
    Ok(is_zero_symbol(&residual))
}

fn check_product_bound(rng: &mut ChaCha8Rng, valid: u32) -> Result<()> {
    let a = random_jet(rng, valid)?;
    let b = random_jet(rng, valid)?;
    let params = GevreyParams::from_integers(2, 1)?;
    let at = [qs(0), qs(0)];
    check_product_inequality(&a, &b, &rlit("1/2"), &params, &at)?;
    Ok(())
}

fn check_derivative_bound(rng: &mut ChaCha8Rng, valid: u32) -> Result<()> {
    let a = random_jet(rng, valid)?;
    let params = GevreyParams::from_integers(2, 1)?;
    let at = [qs(0), qs(0)];
    let gamma = MultiIndex(vec![1, 0]);
    check_derivative_inequality(&a, &gamma, &rlit("1/4"), &rlit("1/2"), &params, &at)?;
    Ok(())
}

fn check_envelope_supremum() -> Result<()> {
    let sup = ak_sup(3, &rlit("1/2"), &rlit("2"))?;
    ensure(
        (sup.max - 14.0625).abs() < 1e-9 && sup.argmax == 7 && sup.bound >= sup.max,
        "the envelope supremum moved off its pinned value",
    )
}

fn check_neumann_bound() -> Result<()> {
    let split = VarSplit::new(1, 1)?;
    let base = vec![qs(0), qs(0)];
    let quarter = <Exact as Scalar>::parse_element_string("1/4")?;
    let r0 = Jet::constant(split, base.clone(), 4, quarter)?;
    let r1 = Jet::constant(split, base, 4, qs(0))?;
    let remainder = FormalSymbol::new(GevreyParams::from_integers(1, 1)?, vec![r0, r1])?;
    let cert = certificate_from_symbol(&remainder, &SampleSet::origin(2), &rlit("1/8"), None)?;
    let neumann = certificate_neumann(&cert, &rlit("1/16"))?;
    let bound = neumann.norm_upper(&rlit("1/16"))?;
    ensure(
        bound <= rlit("2"),
        "a small remainder produced a Neumann bound above 2",
    )
}

fn cfmat(entries: [[(f64, f64); 2]; 2]) -> FloatMatrix {
    let mut m = SquareMatrix::zero(2);
    for (i, row) in entries.iter().enumerate() {
        for (j, &(re, im)) in row.iter().enumerate() {
            m.set(i, j, ComplexFloat::new(re, im));
        }
    }
    m
}

fn check_eigensolver() -> Result<()> {
    let m = cfmat([[(2.0, 0.0), (1.0, 1.0)], [(1.0, -1.0), (0.0, 0.0)]]);
    let e = eigh(&m, 1e-9)?;
    let s3 = 3f64.sqrt();
    ensure(
        (e.values[0] - (1.0 - s3)).abs() < 1e-12 && (e.values[1] - (1.0 + s3)).abs() < 1e-12,
        "the two-level spectrum moved off 1 +/- sqrt(3)",
    )
}

fn check_constant_projector() -> Result<()> {
    let zero = cfmat([[(0.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (0.0, 0.0)]]);
    let orders = vec![
        cfmat([[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]]),
        zero.clone(),
        zero,
    ];
    let family = OperatorFamily::from_orders(0.0, orders, (0.5, 1.5), rlit("1"))?;
    let contour = Contour::for_gap(family.gap(), 32)?;
    let pi = projector_expansion(&family, 1, &contour, None)?;
    let base = MultiIndex(vec![0]);
    let p0 = pi.pi(0).coeff(&base).expect("order zero is stored");
    let p1_norm = pi.pi(1).max_coeff_nu();
    let ok = (p0.get(0, 0).0.re - 1.0).abs() < 1e-10
        && p0.get(0, 0).0.im.abs() < 1e-10
        && p0.get(0, 1).0.norm() < 1e-10
        && p0.get(1, 0).0.norm() < 1e-10
        && p0.get(1, 1).0.norm() < 1e-10
        && p1_norm < 1e-9;
    ensure(ok, "a constant family grew a nonconstant projector")
}

fn rotating_orders(valid: u32) -> Vec<FloatMatrix> {
    let mut inv_fact = 1.0f64;
    let mut orders = Vec::with_capacity(valid as usize + 1);
    for k in 0..=valid {
        if k > 0 {
            inv_fact /= f64::from(k);
        }
        let (c, s) = match k % 4 {
            0 => (inv_fact, 0.0),
            1 => (0.0, inv_fact),
            2 => (-inv_fact, 0.0),
            _ => (0.0, -inv_fact),
        };
        orders.push(cfmat([[(c, 0.0), (s, 0.0)], [(s, 0.0), (-c, 0.0)]]));
    }
    orders
}

fn check_rotating_correction() -> Result<()> {
    let family = OperatorFamily::from_orders(0.0, rotating_orders(4), (0.0, 2.0), rlit("1"))?;
    let contour = Contour::for_gap(family.gap(), 32)?;
    let pi = projector_expansion(&family, 1, &contour, None)?;
    let base = MultiIndex(vec![0]);
    let p1 = pi.pi(1).coeff(&base).expect("order one is stored");
    let ok = (p1.get(0, 1).0 - num_complex::Complex64::new(0.0, 0.25)).norm() < 1e-8
        && (p1.get(1, 0).0 - num_complex::Complex64::new(0.0, -0.25)).norm() < 1e-8
        && p1.get(0, 0).0.norm() < 1e-8
        && p1.get(1, 1).0.norm() < 1e-8;
    ensure(ok, "the first rotating correction moved off its pinned value")
}

/// The named consistency checks behind the selftest command. Each exercises
/// one load-bearing identity end to end; all are expected to pass on every
/// build and platform.
fn selftest_checks(seed: u64, jet_order: u32) -> Vec<(&'static str, Result<()>)> {
    let jet_order = jet_order.max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        ("sharp unit laws", check_sharp_units(&mut rng, jet_order)),
        (
            "sharp associativity",
            check_sharp_associativity(&mut rng, jet_order),
        ),
        (
            "parametrix two-sided inverse",
            check_parametrix(&mut rng, jet_order),
        ),
        (
            "product pseudonorm bound",
            check_product_bound(&mut rng, jet_order),
        ),
        (
            "derivative pseudonorm bound",
            check_derivative_bound(&mut rng, jet_order),
        ),
        ("envelope supremum value", check_envelope_supremum()),
        ("neumann certificate bound", check_neumann_bound()),
        ("hermitian eigensolver spectrum", check_eigensolver()),
        ("constant family projector", check_constant_projector()),
        (
            "rotating family first correction",
            check_rotating_correction(),
        ),
    ]
}
