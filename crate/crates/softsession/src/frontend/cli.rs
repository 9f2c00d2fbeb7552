//! The `sst` command line.
//!
//! Five subcommands over `.sst` files: `check` elaborates every
//! definition, `measures` and `reduce` inspect one target, `analyze` runs
//! the bound analyzer (one `--def`, or every `analyze` directive in the
//! file), and `kernel` validates derivation literals. `--json` switches
//! any of them to a machine-readable report on stdout.
//!
//! Exit codes partition outcomes: 0 success, 1 rejection (diagnostics,
//! failed checks, observed bound violations), 2 malformed input (syntax,
//! unreadable files, unknown names), 3 internal invariant failure. The
//! reduction budget comes from `--budget`, else the `SST_BUDGET`
//! environment variable, else 100000.

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser as CliParser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use super::parse::{parse, Definition, Found, SourceFile};
use super::{analyze_derivation, analyze_process, AnalysisReport};
use crate::calculus::{reduce_trace, Strategy};
use crate::derivation::{check_derivation, erase, Derivation};
use crate::elaborator::{elaborate, Diagnostic, Elaboration, Mode};
use crate::measures::measure;

const DEFAULT_BUDGET: usize = 100_000;

#[derive(CliParser)]
#[command(name = "sst", about = "Soft session types: checker, kernel, and bound analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Elaborate every definition in the file
    Check {
        file: PathBuf,
        /// Check under this discipline instead of each signature's own
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Emit a machine-readable report
        #[arg(long)]
        json: bool,
        /// Elaborate this many definitions in parallel
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the measures of one definition or derivation literal
    Measures {
        file: PathBuf,
        #[arg(long)]
        def: String,
        #[arg(long)]
        json: bool,
    },
    /// Run the erasure of one target to normal form
    Reduce {
        file: PathBuf,
        #[arg(long)]
        def: String,
        /// Maximum number of communication steps
        #[arg(long)]
        budget: Option<usize>,
        /// Print the size after every step
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        json: bool,
    },
    /// Compare observed behavior against the static bounds
    Analyze {
        file: PathBuf,
        /// A single target; defaults to the file's analyze directives
        #[arg(long)]
        def: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        json: bool,
        /// Analyze this many targets in parallel
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Validate every derivation literal in the file
    Kernel {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Dsll,
    Dill,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Dsll => Mode::Dsll,
            ModeArg::Dill => Mode::Dill,
        }
    }
}

/// One buffered result: the text (or JSON value) for a target plus its
/// exit code. Buffering keeps parallel output from interleaving.
struct Outcome {
    text: String,
    value: Value,
    code: i32,
}

/// Runs the command line and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let informational =
                matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = err.print();
            return if informational { 0 } else { 2 };
        }
    };
    match cli.command {
        Command::Check { file, mode, json, jobs } => with_file(&file, |sf| {
            let defs: Vec<&Definition> = sf.definitions().collect();
            let outcomes = run_tasks(&defs, jobs, |def| check_one(def, mode.map(Mode::from)));
            emit_many(outcomes, json)
        }),
        Command::Measures { file, def, json } => with_file(&file, |sf| {
            let target = match resolve(sf, &def) {
                Ok(t) => t,
                Err(code) => return code,
            };
            emit_one(guarded(&def, || measures_one(&def, target)), json)
        }),
        Command::Reduce { file, def, budget, trace, json } => with_file(&file, |sf| {
            let target = match resolve(sf, &def) {
                Ok(t) => t,
                Err(code) => return code,
            };
            let budget = resolve_budget(budget);
            emit_one(guarded(&def, || reduce_one(&def, target, budget, trace)), json)
        }),
        Command::Analyze { file, def, budget, json, jobs } => with_file(&file, |sf| {
            let budget = resolve_budget(budget);
            let targets: Vec<(String, Found<'_>)> = match &def {
                Some(name) => match resolve(sf, name) {
                    Ok(t) => vec![(name.clone(), t)],
                    Err(code) => return code,
                },
                None => {
                    let named: Vec<_> = sf
                        .directives()
                        .map(|n| (n.to_string(), sf.find(n).expect("directives resolve")))
                        .collect();
                    if named.is_empty() {
                        eprintln!("nothing to analyze: no --def and no analyze directives");
                        return 2;
                    }
                    named
                }
            };
            let outcomes = run_tasks(&targets, jobs, |(name, target)| {
                guarded(name, || analyze_one(name, *target, budget))
            });
            if def.is_some() {
                emit_one(outcomes.into_iter().next().expect("one target"), json)
            } else {
                emit_many(outcomes, json)
            }
        }),
        Command::Kernel { file, json } => with_file(&file, |sf| {
            let outcomes: Vec<Outcome> = sf
                .derivations()
                .map(|(name, d)| guarded(name, || kernel_one(name, d)))
                .collect();
            emit_many(outcomes, json)
        }),
    }
}

fn with_file(path: &Path, f: impl FnOnce(&SourceFile) -> i32) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("{}: {err}", path.display());
            return 2;
        }
    };
    match parse(&text) {
        Ok(sf) => f(&sf),
        Err(err) => {
            eprintln!("{}:{err}", path.display());
            2
        }
    }
}

fn resolve<'a>(sf: &'a SourceFile, name: &str) -> Result<Found<'a>, i32> {
    sf.find(name).ok_or_else(|| {
        eprintln!("no definition or derivation named {name}");
        2
    })
}

fn resolve_budget(flag: Option<usize>) -> usize {
    if let Some(b) = flag {
        return b;
    }
    match std::env::var("SST_BUDGET") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("ignoring SST_BUDGET={raw}: not a decimal number");
                DEFAULT_BUDGET
            }
        },
        Err(_) => DEFAULT_BUDGET,
    }
}

fn run_tasks<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if jobs <= 1 {
        items.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("worker pool builds");
        pool.install(|| {
            use rayon::prelude::*;
            items.par_iter().map(&f).collect()
        })
    }
}

/// Runs one task, converting a panic into an exit-3 outcome. A panic here
/// means a kernel invariant failed, not that the input was bad.
fn guarded(name: &str, f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(outcome) => outcome,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            Outcome {
                text: format!("{name}: internal invariant failure: {msg}"),
                value: json!({ "name": name, "ok": false, "internalError": msg }),
                code: 3,
            }
        }
    }
}

fn emit_one(outcome: Outcome, json: bool) -> i32 {
    if json {
        println!("{}", serde_json::to_string_pretty(&outcome.value).expect("reports serialize"));
    } else {
        println!("{}", outcome.text);
    }
    outcome.code
}

fn emit_many(outcomes: Vec<Outcome>, json: bool) -> i32 {
    let mut code = 0;
    if json {
        let values: Vec<&Value> = outcomes.iter().map(|o| &o.value).collect();
        println!("{}", serde_json::to_string_pretty(&values).expect("reports serialize"));
    }
    for outcome in &outcomes {
        if !json {
            println!("{}", outcome.text);
        }
        code = code.max(outcome.code);
    }
    code
}

fn diagnostics_value(diags: &[Diagnostic]) -> Value {
    Value::Array(
        diags
            .iter()
            .map(|d| {
                json!({
                    "kind": d.kind.label(),
                    "channel": d.channel.to_string(),
                    "position": d.position,
                    "explanation": d.explanation,
                })
            })
            .collect(),
    )
}

fn check_one(def: &Definition, over: Option<Mode>) -> Outcome {
    let mut sig = def.signature.clone();
    if let Some(mode) = over {
        sig.mode = mode;
    }
    let mode = sig.mode;
    let name = &def.name;
    guarded(name, || match elaborate(&def.process, &sig) {
        Ok(el) => {
            let judgment = el.judgment();
            let label = match el {
                Elaboration::Kernel(_) => "kernel-checked",
                Elaboration::Reference(_) => "reference-checked",
            };
            Outcome {
                text: format!("check {name}: ok ({mode}, {label}) :: {judgment}"),
                value: json!({
                    "name": name,
                    "mode": mode.to_string(),
                    "ok": true,
                    "kernel": matches!(el, Elaboration::Kernel(_)),
                    "judgment": judgment.to_string(),
                    "diagnostics": [],
                }),
                code: 0,
            }
        }
        Err(diags) => {
            let mut text = format!("check {name}: rejected ({mode})");
            for d in &diags {
                text.push_str(&format!("\n  {d}"));
            }
            Outcome {
                text,
                value: json!({
                    "name": name,
                    "mode": mode.to_string(),
                    "ok": false,
                    "kernel": false,
                    "judgment": Value::Null,
                    "diagnostics": diagnostics_value(&diags),
                }),
                code: 1,
            }
        }
    })
}

/// The kernel derivation behind a target, or a reported reason there is
/// none. Definitions elaborate under their signature; literals are taken
/// as written.
fn target_derivation(name: &str, target: Found<'_>) -> Result<Derivation, Outcome> {
    match target {
        Found::Derivation(_, d) => Ok(d.clone()),
        Found::Definition(def) => {
            if def.signature.mode == Mode::Dill {
                return Err(Outcome {
                    text: format!(
                        "{name}: reference mode admits no kernel derivation; use a dsll signature"
                    ),
                    value: json!({
                        "name": name,
                        "ok": false,
                        "error": "reference mode admits no kernel derivation",
                    }),
                    code: 1,
                });
            }
            match elaborate(&def.process, &def.signature) {
                Ok(Elaboration::Kernel(d)) => Ok(d),
                Ok(Elaboration::Reference(_)) => unreachable!("dsll elaboration yields a kernel"),
                Err(diags) => {
                    let mut text = format!("{name}: rejected");
                    for d in &diags {
                        text.push_str(&format!("\n  {d}"));
                    }
                    Err(Outcome {
                        text,
                        value: json!({
                            "name": name,
                            "ok": false,
                            "diagnostics": diagnostics_value(&diags),
                        }),
                        code: 1,
                    })
                }
            }
        }
    }
}

fn measures_one(name: &str, target: Found<'_>) -> Outcome {
    let d = match target_derivation(name, target) {
        Ok(d) => d,
        Err(out) => return out,
    };
    match measure(&d) {
        Ok(report) => {
            let section = super::MeasureSection::from_report(&report);
            let mut text = format!(
                "measures {name}\n  process size {}\n  box depth {}\n  duplicability {}\n  weight {}",
                report.process_size, report.box_depth, report.duplicability, report.weight
            );
            for (chan, fo) in report.per_channel_fo.iter() {
                text.push_str(&format!("\n  fo {chan} = {fo}"));
            }
            Outcome {
                text,
                value: serde_json::to_value(&section).expect("measures serialize"),
                code: 0,
            }
        }
        Err(err) => Outcome {
            text: format!("measures {name}: {err}"),
            value: json!({ "name": name, "ok": false, "error": err.to_string() }),
            code: 1,
        },
    }
}

fn reduce_one(name: &str, target: Found<'_>, budget: usize, with_trace: bool) -> Outcome {
    let process = match target {
        Found::Definition(def) => def.process.clone(),
        Found::Derivation(_, d) => erase(d),
    };
    let trace = reduce_trace(&process, budget, Strategy::Leftmost);
    let mut text = format!(
        "reduce {name}: {} steps, max size {}, final {}",
        trace.steps,
        trace.max_size(),
        trace.final_process
    );
    if trace.budget_exhausted {
        text.push_str(&format!("\n  budget of {budget} exhausted before normal form"));
    }
    if with_trace {
        let sizes: Vec<String> = trace.sizes.iter().map(usize::to_string).collect();
        text.push_str(&format!("\n  sizes: {}", sizes.join(" ")));
    }
    Outcome {
        text,
        value: json!({
            "steps": trace.steps,
            "maxSize": trace.max_size(),
            "sizes": trace.sizes,
            "finalProcess": trace.final_process.to_string(),
            "budgetExhausted": trace.budget_exhausted,
        }),
        code: 0,
    }
}

fn analyze_one(name: &str, target: Found<'_>, budget: usize) -> Outcome {
    let report = match target {
        Found::Derivation(_, d) => match analyze_derivation(d, budget) {
            Ok(report) => report,
            Err(err) => {
                return Outcome {
                    text: format!("analyze {name}: {err}"),
                    value: json!({ "name": name, "ok": false, "error": err.to_string() }),
                    code: 1,
                }
            }
        },
        Found::Definition(def) => match elaborate(&def.process, &def.signature) {
            Ok(Elaboration::Kernel(d)) => {
                analyze_derivation(&d, budget).expect("kernel elaborations measure")
            }
            Ok(Elaboration::Reference(_)) => analyze_process(&def.process, budget),
            Err(diags) => {
                let mut text = format!("analyze {name}: rejected");
                for d in &diags {
                    text.push_str(&format!("\n  {d}"));
                }
                return Outcome {
                    text,
                    value: json!({
                        "name": name,
                        "ok": false,
                        "diagnostics": diagnostics_value(&diags),
                    }),
                    code: 1,
                };
            }
        },
    };
    render_analysis(name, &report)
}

fn render_analysis(name: &str, report: &AnalysisReport) -> Outcome {
    let verdict = match report.within_bounds {
        Some(true) => "yes".to_string(),
        Some(false) => "NO".to_string(),
        None => "not claimed (reference mode)".to_string(),
    };
    let tree_measures = match (report.measures.duplicability, report.measures.weight) {
        (Some(dup), Some(w)) => format!("\n  duplicability {dup}, weight {w}"),
        _ => String::new(),
    };
    let text = format!(
        "analyze {name} ({})\n  process size {}, box depth {}{}\n  step bound {}, polynomial bound {}, size bound {}\n  observed {} steps, max size {}\n  within bounds: {verdict}\n  budget exhausted: {}",
        report.mode,
        report.measures.process_size,
        report.measures.box_depth,
        tree_measures,
        report.step_bound,
        report.polynomial_bound,
        report.size_bound,
        report.observed_steps,
        report.max_observed_size,
        if report.budget_exhausted { "yes" } else { "no" },
    );
    let code = match report.within_bounds {
        Some(false) if !report.budget_exhausted => 1,
        _ => 0,
    };
    Outcome { text, value: serde_json::to_value(report).expect("reports serialize"), code }
}

fn kernel_one(name: &str, d: &Derivation) -> Outcome {
    match check_derivation(d) {
        Ok(judgment) => Outcome {
            text: format!("kernel {name}: ok :: {judgment}"),
            value: json!({ "name": name, "ok": true, "judgment": judgment.to_string() }),
            code: 0,
        },
        Err(err) => Outcome {
            text: format!("kernel {name}: rejected: {err}"),
            value: json!({ "name": name, "ok": false, "error": err.to_string() }),
            code: 1,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::sync::atomic::{AtomicUsize, Ordering};

    static FILE_SEQ: AtomicUsize = AtomicUsize::new(0);

    fn temp_sst(contents: &str) -> PathBuf {
        let seq = FILE_SEQ.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!(
            "sst-cli-{}-{seq}.sst",
            std::process::id()
        ));
        let mut f = std::fs::File::create(&path).expect("temp file");
        f.write_all(contents.as_bytes()).expect("write temp file");
        path
    }

    fn run(args: &[&str]) -> i32 {
        run_cli(["sst"].iter().chain(args.iter()).copied())
    }

    #[test]
    fn check_exits_zero_on_a_typable_file() {
        let path = temp_sst("process idle gives x : 1 = 0\n");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["check", p]), 0);
        assert_eq!(run(&["check", p, "--json", "--jobs", "2"]), 0);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn check_exits_one_on_a_rejection() {
        // a leftover unit would die silently; a tensor cannot
        let path = temp_sst("process stuck gives x : 1 uses y : 1 * 1 = 0\n");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["check", p]), 1);
        assert_eq!(run(&["check", p, "--mode", "dill"]), 1);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn syntax_and_lookup_errors_exit_two() {
        let path = temp_sst("process broken gives x 1 = 0\n");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["check", p]), 2);
        std::fs::remove_file(&path).ok();
        let path = temp_sst("process idle gives x : 1 = 0\n");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["measures", p, "--def", "ghost"]), 2);
        assert_eq!(run(&["analyze", p]), 2);
        assert_eq!(run(&["check", "/nonexistent/missing.sst"]), 2);
        assert_eq!(run(&["check"]), 2);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(&["--help"]), 0);
        assert_eq!(run(&["check", "--help"]), 0);
    }

    #[test]
    fn the_remaining_subcommands_run_end_to_end() {
        let path = temp_sst(
            "process pair gives z : 1 = new c. (c<v> | c(u))\n\
             derivation ax = (oneR x)\n\
             analyze pair\n\
             analyze ax\n",
        );
        let p = path.to_str().unwrap();
        assert_eq!(run(&["measures", p, "--def", "pair"]), 0);
        assert_eq!(run(&["measures", p, "--def", "pair", "--json"]), 0);
        assert_eq!(run(&["reduce", p, "--def", "pair", "--trace"]), 0);
        assert_eq!(run(&["reduce", p, "--def", "ax", "--budget", "7", "--json"]), 0);
        assert_eq!(run(&["analyze", p, "--def", "pair", "--json"]), 0);
        assert_eq!(run(&["analyze", p, "--jobs", "2"]), 0);
        assert_eq!(run(&["kernel", p, "--json"]), 0);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn kernel_rejections_exit_one() {
        let path = temp_sst("derivation bad = (oneL x (oneR x))\n");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["kernel", p]), 1);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn measures_refuse_reference_mode_targets() {
        let path = temp_sst("process idle gives x : 1 in dill = 0\n");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["measures", p, "--def", "idle"]), 1);
        assert_eq!(run(&["analyze", p, "--def", "idle"]), 0);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn the_budget_falls_back_to_the_environment() {
        assert_eq!(resolve_budget(Some(7)), 7);
        // temp_env-style isolation is overkill for one variable
        std::env::set_var("SST_BUDGET", "42");
        assert_eq!(resolve_budget(None), 42);
        std::env::set_var("SST_BUDGET", "nonsense");
        assert_eq!(resolve_budget(None), DEFAULT_BUDGET);
        std::env::remove_var("SST_BUDGET");
        assert_eq!(resolve_budget(None), DEFAULT_BUDGET);
    }
}
