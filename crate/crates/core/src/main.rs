//! `slq`: command-line front end.
//!
//! Exit status: 0 valid / sat / agreement / proof accepted, 1 invalid /
//! unsat / disagreement / proof rejected, 2 parse, IO or usage error,
//! 3 internal error.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use slq::core::{normalize_traced, TraceEvent};
use slq::hilbert::{builtin_source, check_derivation, parse_derivation};
use slq::semantics::StateRecord;
use slq::{
    brute_sat, compute_basis, decide_sat, decide_valid, parse, CoreBasis, EnumerationBounds,
    Formula, MemoryState, NormalizedForm, SatResult, ValidResult,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "slq", version, about = "Decide and prove formulas of separation logic with * and -*")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,
    /// Report type counts for every elimination step.
    #[arg(long, global = true)]
    trace: bool,
    /// Include wall-clock timing in the output (makes it non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Record,
}

#[derive(Subcommand)]
enum Verb {
    /// Decide validity; prints a countermodel when invalid.
    Valid { formula: String },
    /// Decide satisfiability; prints a witness when satisfiable.
    Sat { formula: String },
    /// Print an equivalent Boolean combination of core formulas.
    Normalize { formula: String },
    /// Print a satisfying state or `unsat`.
    Model { formula: String },
    /// Decide whether the first formula entails the second.
    Entail { premise: String, conclusion: String },
    /// Check a derivation file (or the name of a builtin derivation).
    CheckProof { proof: String },
    /// Cross-check the decision procedure against bounded enumeration.
    Oracle {
        formula: String,
        #[command(flatten)]
        bounds: BoundFlags,
    },
}

#[derive(Args)]
struct BoundFlags {
    #[arg(long)]
    max_heap: Option<u32>,
    /// Size of the location universe.
    #[arg(long)]
    max_loc: Option<u32>,
    /// Largest heap extension tried for -* and -o.
    #[arg(long)]
    budget: Option<u32>,
    /// Locations available to extensions outside the store.
    #[arg(long)]
    fresh: Option<u32>,
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

fn internal(msg: impl ToString) -> Failure {
    Failure {
        code: 3,
        msg: msg.to_string(),
    }
}

/// Collected output of one invocation.
struct Out {
    verdict: String,
    code: u8,
    lines: Vec<String>,
    record: serde_json::Map<String, Value>,
}

impl Out {
    fn new(verdict: &str, code: u8) -> Out {
        Out {
            verdict: verdict.into(),
            code,
            lines: vec![verdict.into()],
            record: serde_json::Map::new(),
        }
    }

    fn witness(&mut self, m: &MemoryState) {
        self.lines.push(m.to_string());
        self.record.insert("witness".into(), state_json(&m.to_record()));
    }
}

fn state_json(r: &StateRecord) -> Value {
    json!({ "store": r.store, "heap": r.heap })
}

fn basis_json(b: &CoreBasis) -> Value {
    let vars: Vec<&str> = b.vars.iter().map(|v| v.name()).collect();
    json!({ "vars": vars, "alpha": b.alpha })
}

fn read_formula(arg: &str) -> Result<Formula, Failure> {
    let text = if Path::new(arg).is_file() {
        std::fs::read_to_string(arg).map_err(|e| usage(format!("{arg}: {e}")))?
    } else {
        arg.to_string()
    };
    parse(text.trim()).map_err(|e| usage(e.to_string()))
}

fn normalized(f: &Formula, trace: &mut Vec<TraceEvent>, on: bool) -> NormalizedForm {
    if on {
        normalize_traced(f, Some(&mut |e| trace.push(e)))
    } else {
        normalize_traced(f, None)
    }
}

fn run(cli: &Cli, trace: &mut Vec<TraceEvent>) -> Result<Out, Failure> {
    let want_trace = cli.trace;
    match &cli.verb {
        Verb::Valid { formula } => {
            let f = read_formula(formula)?;
            if want_trace {
                normalized(&f.clone().not(), trace, true);
            }
            valid_out(&f)
        }
        Verb::Entail { premise, conclusion } => {
            let f = read_formula(premise)?.implies(read_formula(conclusion)?);
            if want_trace {
                normalized(&f.clone().not(), trace, true);
            }
            valid_out(&f)
        }
        Verb::Sat { formula } | Verb::Model { formula } => {
            let f = read_formula(formula)?;
            if want_trace {
                normalized(&f, trace, true);
            }
            let model = matches!(cli.verb, Verb::Model { .. });
            Ok(match decide_sat(&f).map_err(internal)? {
                SatResult::Sat(m) => {
                    let mut out = Out::new("SAT", 0);
                    if model {
                        out.lines.clear();
                    }
                    out.witness(&m);
                    out
                }
                SatResult::Unsat => Out::new(if model { "unsat" } else { "UNSAT" }, 1),
            })
        }
        Verb::Normalize { formula } => {
            let f = read_formula(formula)?;
            let n = normalized(&f, trace, want_trace);
            let mut out = Out::new(&n.to_formula().to_string(), 0);
            out.lines.push(format!("basis: {}", n.basis));
            out.record.insert("basis".into(), basis_json(&n.basis));
            let cubes = n.cubes().map(|cs| {
                cs.iter()
                    .map(|c| c.iter().map(|l| l.to_record()).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            });
            out.record.insert("cubes".into(), json!(cubes));
            Ok(out)
        }
        Verb::CheckProof { proof } => {
            let text = if Path::new(proof).is_file() {
                std::fs::read_to_string(proof).map_err(|e| usage(format!("{proof}: {e}")))?
            } else if let Some(src) = builtin_source(proof) {
                src.to_string()
            } else {
                return Err(usage(format!("{proof}: no such file or builtin derivation")));
            };
            let d = parse_derivation(&text)
                .map_err(|e| usage(format!("line {}: {}", e.line, e.msg)))?;
            let report = check_derivation(&d);
            let mut out = Out::new(if report.ok { "ACCEPTED" } else { "REJECTED" }, u8::from(!report.ok));
            out.lines.push(report.to_string());
            out.record.insert("report".into(), json!(report));
            Ok(out)
        }
        Verb::Oracle { formula, bounds } => {
            let f = read_formula(formula)?;
            if want_trace {
                normalized(&f, trace, true);
            }
            oracle_out(&f, bounds)
        }
    }
}

fn valid_out(f: &Formula) -> Result<Out, Failure> {
    Ok(match decide_valid(f).map_err(internal)? {
        ValidResult::Valid => Out::new("VALID", 0),
        ValidResult::Invalid(m) => {
            let mut out = Out::new("INVALID", 1);
            out.witness(&m);
            out
        }
    })
}

fn oracle_out(f: &Formula, flags: &BoundFlags) -> Result<Out, Failure> {
    let mut b = EnumerationBounds::exact_for(f);
    if let Some(n) = flags.max_heap {
        b.max_heap_size = n;
    }
    if let Some(n) = flags.max_loc {
        b.location_universe = n;
    }
    if let Some(n) = flags.budget {
        b.wand_extension_budget = n;
    }
    if let Some(n) = flags.fresh {
        b.fresh_locations = n;
    }
    let exact = b.is_exact_for(f);
    if !exact {
        eprintln!("warning: bounds are below the exactness threshold; the oracle answer is approximate");
    }
    let decided = decide_sat(f).map_err(internal)?;
    let brute = brute_sat(f, &b);
    let (d, o) = (matches!(decided, SatResult::Sat(_)), brute.witness.is_some());
    let verb = |s: bool| if s { "SAT" } else { "UNSAT" };
    let agree = d == o;
    let mut out = Out::new(if agree { "AGREE" } else { "DISAGREE" }, u8::from(!agree));
    out.lines.push(format!("normalizer: {}", verb(d)));
    out.lines.push(format!("oracle: {}{}", verb(o), if exact { "" } else { " (approximate)" }));
    if let Some(w) = &brute.witness {
        out.witness(w);
    }
    out.record.insert("normalizer".into(), json!(verb(d)));
    out.record.insert("oracle".into(), json!(verb(o)));
    out.record.insert("exact".into(), json!(exact));
    out.record.insert(
        "bounds".into(),
        json!({
            "max_heap": b.max_heap_size,
            "max_loc": b.location_universe,
            "budget": b.wand_extension_budget,
            "fresh": b.fresh_locations,
        }),
    );
    out.record.insert("basis".into(), basis_json(&compute_basis(f)));
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let mut trace = Vec::new();
    let result = run(&cli, &mut trace);
    let elapsed = start.elapsed();
    let mut out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("slq: {}", e.msg);
            return ExitCode::from(e.code);
        }
    };
    match cli.format {
        Format::Human => {
            for l in &out.lines {
                println!("{l}");
            }
            if cli.trace {
                for e in &trace {
                    println!(
                        "trace: {} {}x{} types, {} pairs -> {} types ({})",
                        e.op, e.left_types, e.right_types, e.pairs, e.result_types, e.basis
                    );
                }
            }
            if cli.timing {
                println!("time: {:.3} ms", elapsed.as_secs_f64() * 1e3);
            }
        }
        Format::Record => {
            let mut rec = serde_json::Map::new();
            rec.insert("schema_version".into(), json!(SCHEMA_VERSION));
            rec.insert("verdict".into(), json!(out.verdict));
            for key in ["witness", "basis", "cubes"] {
                rec.insert(key.into(), out.record.remove(key).unwrap_or(Value::Null));
            }
            rec.insert(
                "timing".into(),
                if cli.timing {
                    json!({ "elapsed_ms": elapsed.as_secs_f64() * 1e3 })
                } else {
                    Value::Null
                },
            );
            if cli.trace {
                rec.insert("trace".into(), json!(trace));
            }
            rec.extend(out.record);
            println!("{}", Value::Object(rec));
        }
    }
    ExitCode::from(out.code)
}
