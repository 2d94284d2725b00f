//! Batch commands behind the `semistatic` binary. Each returns an exit code
//! together with a JSON document.

mod instance;
mod verify;

use std::path::Path;

use serde::Serialize;

pub use instance::{
    random_instance, unique_coupling_instance, Instance, InstanceFile, MarginalSpec, OptionsSpec, Overrides, PmfSpec,
    PriorSpec, QuoteSpec,
};
pub use verify::{verify_instance, PropertyResult, VerifyReport};

use crate::error::Error;
use crate::market::{check_strassen, StrassenVerdict};
use crate::polytope::{feasibility, polytope_on};
use crate::pricing::{mot_bounds, price, PricingContext};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

pub const VALIDATE_SCHEMA: &str = "semistatic.validate/1";
pub const MOT_SCHEMA: &str = "semistatic.mot/1";
pub const ERROR_SCHEMA: &str = "semistatic.error/1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub code: i32,
    pub document: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::InvalidGrid(_)
        | Error::InvalidMarginal(_)
        | Error::InsufficientQuotes(_)
        | Error::LatticeMismatch => EXIT_PARSE,
        Error::SizeLimit { .. } | Error::HarnessLimit(_) => EXIT_LIMIT,
        _ => EXIT_INFEASIBLE,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidGrid(_) => "invalid_grid",
        Error::InvalidMarginal(_) => "invalid_marginal",
        Error::NonConvexQuotes(_) => "non_convex_quotes",
        Error::InsufficientQuotes(_) => "insufficient_quotes",
        Error::MeanMismatch { .. } => "mean_mismatch",
        Error::SizeLimit { .. } => "size_limit",
        Error::LatticeMismatch => "lattice_mismatch",
        Error::MalformedProgram(_) => "malformed_program",
        Error::InfeasiblePolytope => "infeasible_polytope",
        Error::IterationLimit { .. } => "iteration_limit",
        Error::BracketInvalid { .. } => "bracket_invalid",
        Error::DivergenceInfinite => "divergence_infinite",
        Error::AssumptionViolated(_) => "assumption_violated",
        Error::CrossCheckFailed { .. } => "cross_check_failed",
        Error::HarnessLimit(_) => "harness_limit",
        Error::Numerical(_) => "numerical",
        Error::Parse(_) => "parse",
    }
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    schema_version: &'static str,
    command: &'a str,
    error: &'static str,
    message: String,
}

fn render<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

fn failure(command: &str, e: &Error) -> CommandOutput {
    CommandOutput {
        code: exit_code(e),
        document: render(&ErrorDocument { schema_version: ERROR_SCHEMA, command, error: error_kind(e), message: e.to_string() }),
    }
}

fn finish(command: &str, r: crate::error::Result<CommandOutput>) -> CommandOutput {
    r.unwrap_or_else(|e| failure(command, &e))
}

fn load(text: &str, over: &Overrides) -> crate::error::Result<Instance> {
    InstanceFile::parse(text)?.load(over)
}

fn read(path: &Path) -> crate::error::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

#[derive(Serialize)]
struct RowCounts {
    marginal: usize,
    martingale: usize,
}

#[derive(Serialize)]
struct ValidateReport {
    schema_version: &'static str,
    command: &'static str,
    feasible: bool,
    s0: f64,
    means: Vec<f64>,
    strassen: StrassenVerdict,
    lp_feasible: bool,
    agree: bool,
    n_paths: usize,
    rows: RowCounts,
}

/// Convex-order test cross-checked against LP feasibility.
pub fn run_validate(text: &str, over: &Overrides) -> CommandOutput {
    finish("validate", (|| {
        let inst = load(text, over)?;
        let strassen = check_strassen(&inst.sys);
        let lattice = inst.lattice()?;
        let poly = polytope_on(lattice.clone(), &inst.sys)?;
        let lp_feasible = feasibility(&poly, &inst.opts)?.is_feasible();
        let feasible = lp_feasible && strassen.is_feasible();
        let report = ValidateReport {
            schema_version: VALIDATE_SCHEMA,
            command: "validate",
            feasible,
            s0: inst.sys.s0(),
            means: inst.sys.marginals().iter().map(|m| m.mean()).collect(),
            agree: lp_feasible == strassen.is_feasible(),
            strassen,
            lp_feasible,
            n_paths: lattice.n_paths(),
            rows: RowCounts { marginal: poly.n_marginal_rows(), martingale: poly.n_martingale_rows() },
        };
        Ok(CommandOutput { code: if feasible { EXIT_OK } else { EXIT_INFEASIBLE }, document: render(&report) })
    })())
}

/// Full pricing report for the instance's payoff at its initial capital.
pub fn run_price(text: &str, over: &Overrides) -> CommandOutput {
    finish("price", (|| {
        let inst = load(text, over)?;
        let lattice = inst.lattice()?;
        let psi = inst.payoff_values(&lattice)?;
        let poly = polytope_on(lattice.clone(), &inst.sys)?;
        let amb = inst.ambiguity(&lattice)?;
        let ctx = PricingContext::new(&inst.sys, &poly, &amb, inst.file.utility, &inst.opts)?;
        let report = price(&ctx, &psi, inst.file.x)?;
        Ok(CommandOutput { code: EXIT_OK, document: render(&report) })
    })())
}

#[derive(Serialize)]
struct MotReport {
    schema_version: &'static str,
    command: &'static str,
    mot_low: f64,
    mot_high: f64,
    scale: f64,
    argmin: Vec<f64>,
    argmax: Vec<f64>,
}

/// Model-free bounds only.
pub fn run_mot(text: &str, over: &Overrides) -> CommandOutput {
    finish("mot", (|| {
        let inst = load(text, over)?;
        let lattice = inst.lattice()?;
        let psi = inst.payoff_values(&lattice)?;
        let poly = polytope_on(lattice, &inst.sys)?;
        let b = mot_bounds(&poly, &psi, &inst.opts)?;
        let report = MotReport {
            schema_version: MOT_SCHEMA,
            command: "mot",
            mot_low: b.low,
            mot_high: b.high,
            scale: b.scale(),
            argmin: b.argmin,
            argmax: b.argmax,
        };
        Ok(CommandOutput { code: EXIT_OK, document: render(&report) })
    })())
}

/// Property suite; exit 0 only when every property passes.
pub fn run_verify(text: &str, over: &Overrides) -> CommandOutput {
    finish("verify", (|| {
        let inst = load(text, over)?;
        let report = verify_instance(&inst)?;
        Ok(CommandOutput { code: if report.passed { EXIT_OK } else { EXIT_INFEASIBLE }, document: render(&report) })
    })())
}

fn from_path(command: &str, path: &Path, over: &Overrides, run: fn(&str, &Overrides) -> CommandOutput) -> CommandOutput {
    match read(path) {
        Ok(text) => run(&text, over),
        Err(e) => failure(command, &e),
    }
}

pub fn cmd_validate(path: &Path, over: &Overrides) -> CommandOutput {
    from_path("validate", path, over, run_validate)
}

pub fn cmd_price(path: &Path, over: &Overrides) -> CommandOutput {
    from_path("price", path, over, run_price)
}

pub fn cmd_mot(path: &Path, over: &Overrides) -> CommandOutput {
    from_path("mot", path, over, run_mot)
}

pub fn cmd_verify(path: &Path, over: &Overrides) -> CommandOutput {
    from_path("verify", path, over, run_verify)
}
