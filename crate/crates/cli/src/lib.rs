//! Command-line front end for `ctxlock`.
//!
//! [`run_args`] parses arguments, reads the input files, runs one analysis
//! and returns the rendered report with an exit status: 0 when the analysis
//! completed (whatever the verdict), 1 for bad input, 2 when an internal
//! invariant failed.

pub mod format;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctxlock::discipline::{
    check_contextual_static, check_contextual_trace, classify, reorder_to_well_bracketed, Bracketing, DisciplineError,
    StaticVerdict,
};
use ctxlock::explorer::{bounded_reach, Bounds, Exploration, Outcome};
use ctxlock::model::{LockMode, Model, MultiPdsSpec, PairQuery};
use ctxlock::reach::{pairwise_reach, Decision, ReachError};
use ctxlock::reentrant::{compile_cm, verify_reduction, CmOutcome, CompileOptions, CounterMachine, VerifyBounds};
use ctxlock::semantics::{label_word, Computation, SystemConfig};

use crate::format::{parse_cm, parse_model, parse_query, parse_trace, render_model, render_trace, ModelFile};

#[derive(Debug, Parser)]
#[command(
    name = "ctxlock",
    version,
    about = "Pairwise reachability for recursive threads with locks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Debug, Args)]
pub struct Flags {
    /// Stack height bound for bounded search.
    #[arg(long = "max-stack", global = true, default_value_t = 64, value_name = "N")]
    pub max_stack: usize,
    /// Length bound for bounded search.
    #[arg(long = "max-steps", global = true, default_value_t = 100_000, value_name = "N")]
    pub max_steps: usize,
    /// Re-entrant acquisition count bound (also the counter bound of verify-cm).
    #[arg(long = "max-count", global = true, default_value_t = 16, value_name = "N")]
    pub max_count: u32,
    /// How witness computations are printed.
    #[arg(long, global = true, value_enum, default_value_t = WitnessStyle::Labels)]
    pub witness: WitnessStyle,
    /// Leave out the timing block, making reports byte-identical across runs.
    #[arg(long = "no-timing", global = true)]
    pub no_timing: bool,
}

impl Flags {
    pub fn bounds(&self) -> Bounds {
        Bounds {
            max_stack_depth: self.max_stack,
            max_steps: self.max_steps,
            max_count: self.max_count,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WitnessStyle {
    /// Every step with the configuration it leads to.
    Full,
    /// The label word only.
    Labels,
    None,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Static contextual-locking verdict for every thread.
    Check { model: PathBuf },
    /// Decide pair queries with the product construction.
    Reach {
        model: PathBuf,
        /// `<threadA> <stateA> <threadB> <stateB>`; defaults to the file's queries.
        #[arg(long)]
        query: Option<String>,
    },
    /// Answer pair queries by bounded breadth-first search.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        query: Option<String>,
    },
    /// Look for a witness of non-well-bracketing in a trace.
    Classify { model: PathBuf, trace: PathBuf },
    /// Reorder a trace until it is well-bracketed.
    Reorder { model: PathBuf, trace: PathBuf },
    /// Compile a counter machine into a re-entrant 2-thread model.
    ReduceCm {
        cm: PathBuf,
        /// Emit test states for every machine state, not only zero-test targets.
        #[arg(long)]
        full_test_states: bool,
    },
    /// Run a counter machine and its encoding side by side.
    VerifyCm {
        cm: PathBuf,
        #[arg(long)]
        full_test_states: bool,
        /// Step bound for the machine run.
        #[arg(long, default_value_t = 1000, value_name = "N")]
        cm_steps: usize,
    },
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Internal(String),
}

impl From<format::FormatError> for Failure {
    fn from(e: format::FormatError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ReachError> for Failure {
    fn from(e: ReachError) -> Self {
        match e {
            ReachError::Invariant(_) => Failure::Internal(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<DisciplineError> for Failure {
    fn from(e: DisciplineError) -> Self {
        match e {
            DisciplineError::StepNotEnabled { .. } | DisciplineError::Invariant(_) => Failure::Internal(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

/// A report under construction. Everything except the timing block is a
/// function of the inputs and flags.
struct Report {
    body: String,
    timing: Vec<(&'static str, Duration)>,
}

impl Report {
    fn new(echo: String) -> Self {
        Report {
            body: format!("command: {echo}\n"),
            timing: Vec::new(),
        }
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.body, "{key}: {value}").unwrap();
    }

    fn timed<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timing.push((name, start.elapsed()));
        out
    }

    fn finish(mut self, timing: bool) -> String {
        if timing && !self.timing.is_empty() {
            self.body.push_str("timing:\n");
            for (name, d) in &self.timing {
                writeln!(self.body, "  {name}_ms: {:.3}", d.as_secs_f64() * 1e3).unwrap();
            }
        }
        self.body
    }
}

/// Parses `args` (first element is the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Execution
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let (stdout, stderr) = if code == 0 {
                (text, String::new())
            } else {
                (String::new(), text)
            };
            Execution { stdout, stderr, code }
        }
    }
}

pub fn run(cli: &Cli) -> Execution {
    match dispatch(cli) {
        Ok(report) => Execution {
            stdout: report,
            stderr: String::new(),
            code: 0,
        },
        Err(Failure::Input(msg)) => Execution {
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
            code: 1,
        },
        Err(Failure::Internal(msg)) => Execution {
            stdout: String::new(),
            stderr: format!("internal error: {msg}\n"),
            code: 2,
        },
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<(ModelFile, Model), Failure> {
    let file = parse_model(&read(path)?).map_err(|e| Failure::Input(format!("{}:{e}", path.display())))?;
    let model = Model::compile(&file.spec).map_err(|v| Failure::Input(format::FormatError::Invalid(v).to_string()))?;
    Ok((file, model))
}

fn load_cm(path: &Path) -> Result<CounterMachine, Failure> {
    parse_cm(&read(path)?).map_err(|e| Failure::Input(format!("{}:{e}", path.display())))
}

fn queries(file: &ModelFile, flag: &Option<String>) -> Result<Vec<PairQuery>, Failure> {
    let qs = match flag {
        Some(text) => vec![parse_query(text, &file.spec).map_err(|e| Failure::Input(format!("--query: {e}")))?],
        None => file.queries.clone(),
    };
    if qs.is_empty() {
        return Err(Failure::Input("no query: add a `query` line or pass --query".into()));
    }
    Ok(qs)
}

fn system_lines(report: &mut Report, model: &Model) {
    report.line("system", &model.name);
    report.line(
        "threads",
        model
            .threads
            .iter()
            .map(|t| t.name.as_str())
            .collect::<Vec<_>>()
            .join(" "),
    );
    report.line("locks", model.lock_count());
    report.line(
        "mode",
        if model.mode == LockMode::Reentrant {
            "reentrant"
        } else {
            "plain"
        },
    );
}

fn query_text(spec: &MultiPdsSpec, q: &PairQuery) -> String {
    format!(
        "{} {} {} {}",
        spec.threads[q.i].name, q.q_i, spec.threads[q.j].name, q.q_j
    )
}

/// `name=(state,[stack bottom..top],{held})` for every thread.
pub fn render_config(cfg: &SystemConfig, model: &Model) -> String {
    cfg.threads
        .iter()
        .zip(&model.threads)
        .map(|(tc, t)| {
            let stack: Vec<_> = tc.stack.iter().map(|&g| t.symbol_name(g)).collect();
            let held: Vec<String> = (0..model.lock_count())
                .filter_map(|l| {
                    let id = ctxlock::model::LockId(l as u8);
                    match (tc.held.count(id), model.mode) {
                        (0, _) => None,
                        (_, LockMode::Plain) => Some(model.lock_name(id).to_string()),
                        (n, LockMode::Reentrant) => Some(format!("{}:{n}", model.lock_name(id))),
                    }
                })
                .collect();
            format!(
                "{}=({},[{}],{{{}}})",
                t.name,
                t.state_name(tc.state),
                stack.join(" "),
                held.join(" ")
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn witness(report: &mut Report, key: &str, comp: &Computation, model: &Model, style: WitnessStyle) {
    match style {
        WitnessStyle::None => {}
        WitnessStyle::Labels => report.line(key, label_word(&comp.labels(), model)),
        WitnessStyle::Full => {
            let pad = " ".repeat(key.len() - key.trim_start().len() + 2);
            report.line(key, format!("{} steps", comp.len()));
            writeln!(report.body, "{pad}0: {}", render_config(comp.config(0), model)).unwrap();
            for k in 0..comp.len() {
                let label = comp.label(k);
                let next = render_config(comp.config(k + 1), model);
                writeln!(report.body, "{pad}{}: {} -> {next}", k + 1, label.display(model)).unwrap();
            }
        }
    }
}

fn echo(cli: &Cli) -> String {
    let f = &cli.flags;
    let (name, files): (&str, Vec<&Path>) = match &cli.command {
        Command::Check { model } => ("check", vec![model]),
        Command::Reach { model, .. } => ("reach", vec![model]),
        Command::Oracle { model, .. } => ("oracle", vec![model]),
        Command::Classify { model, trace } => ("classify", vec![model, trace]),
        Command::Reorder { model, trace } => ("reorder", vec![model, trace]),
        Command::ReduceCm { cm, .. } => ("reduce-cm", vec![cm]),
        Command::VerifyCm { cm, .. } => ("verify-cm", vec![cm]),
    };
    let mut s = name.to_string();
    for p in files {
        write!(s, " {}", p.display()).unwrap();
    }
    match &cli.command {
        Command::Reach { query: Some(q), .. } | Command::Oracle { query: Some(q), .. } => {
            write!(s, " --query '{q}'").unwrap()
        }
        Command::ReduceCm {
            full_test_states: true, ..
        }
        | Command::VerifyCm {
            full_test_states: true, ..
        } => s.push_str(" --full-test-states"),
        _ => {}
    }
    if let Command::VerifyCm { cm_steps, .. } = &cli.command {
        write!(s, " --cm-steps {cm_steps}").unwrap();
    }
    let w = match f.witness {
        WitnessStyle::Full => "full",
        WitnessStyle::Labels => "labels",
        WitnessStyle::None => "none",
    };
    write!(
        s,
        " --max-stack {} --max-steps {} --max-count {} --witness {w}",
        f.max_stack, f.max_steps, f.max_count
    )
    .unwrap();
    s
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    let flags = &cli.flags;
    let mut report = Report::new(echo(cli));
    match &cli.command {
        Command::Check { model } => {
            let (_, m) = report.timed("parse", || load_model(model))?;
            system_lines(&mut report, &m);
            if m.mode == LockMode::Reentrant {
                return Err(DisciplineError::Reentrant.into());
            }
            let verdicts = report.timed("check", || {
                (0..m.threads.len())
                    .map(|t| check_contextual_static(&m, t))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            for (t, verdict) in verdicts.into_iter().enumerate() {
                let name = &m.threads[t].name;
                match verdict {
                    StaticVerdict::Holds => report.line(&format!("thread {name}"), "holds"),
                    StaticVerdict::Violated { witness: w, violation } => {
                        report.line(&format!("thread {name}"), "violated");
                        report.line("  violation", violation);
                        witness(&mut report, "  witness", &w, &m.project(&[t]), flags.witness);
                    }
                }
            }
        }
        Command::Reach { model, query } => {
            let (file, m) = report.timed("parse", || load_model(model))?;
            system_lines(&mut report, &m);
            for q in queries(&file, query)? {
                report.line("query", query_text(&file.spec, &q));
                let r = report.timed("reach", || pairwise_reach(&m, &q))?;
                match &r.decision {
                    Decision::Reachable { .. } => report.line("verdict", "reachable"),
                    Decision::Unreachable => report.line("verdict", "unreachable"),
                }
                report.line("product_states", r.stats.control_states);
                report.line("state_bound", r.state_bound);
                report.line("automaton_states", r.stats.automaton_states);
                report.line("automaton_transitions", r.stats.transitions);
                if let Decision::Reachable { witness: w, .. } = &r.decision {
                    if !w.validate(&r.pair).is_ok() {
                        return Err(Failure::Internal("reach witness does not replay".into()));
                    }
                    witness(&mut report, "witness", w, &r.pair, flags.witness);
                }
            }
        }
        Command::Oracle { model, query } => {
            let (file, m) = report.timed("parse", || load_model(model))?;
            system_lines(&mut report, &m);
            for q in queries(&file, query)? {
                report.line("query", query_text(&file.spec, &q));
                let target = m
                    .resolve(&q)
                    .map_err(|v| Failure::Input(format::FormatError::Invalid(v).to_string()))?;
                let ex = report.timed("oracle", || bounded_reach(&m, &target, &flags.bounds()));
                exploration(&mut report, &ex, &m, flags.witness);
            }
        }
        Command::Classify { model, trace } => {
            let (_, m) = report.timed("parse", || load_model(model))?;
            let comp =
                parse_trace(&read(trace)?, &m).map_err(|e| Failure::Input(format!("{}:{e}", trace.display())))?;
            system_lines(&mut report, &m);
            report.line("length", comp.len());
            contextual_line(&mut report, &comp, &m);
            match report.timed("classify", || classify(&comp))? {
                Bracketing::WellBracketed => report.line("verdict", "well-bracketed"),
                Bracketing::NonWellBracketed(w) => {
                    report.line("verdict", "not well-bracketed");
                    report.line(
                        "witness",
                        format!("l1={} l2={} l3={} thread={}", w.l1, w.l2, w.l3, w.thread),
                    );
                }
            }
        }
        Command::Reorder { model, trace } => {
            let (_, m) = report.timed("parse", || load_model(model))?;
            let comp =
                parse_trace(&read(trace)?, &m).map_err(|e| Failure::Input(format!("{}:{e}", trace.display())))?;
            system_lines(&mut report, &m);
            report.line("length", comp.len());
            let r = report.timed("reorder", || reorder_to_well_bracketed(&m, &comp))?;
            if r.result.len() != comp.len() || r.result.final_config() != comp.final_config() {
                return Err(Failure::Internal(
                    "reordering changed length or final configuration".into(),
                ));
            }
            report.line("iterations", r.iterations());
            for w in &r.witnesses {
                report.line(
                    "removed",
                    format!("l1={} l2={} l3={} thread={}", w.l1, w.l2, w.l3, w.thread),
                );
            }
            report.line("final_config", render_config(r.result.final_config(), &m));
            report.body.push_str("trace:\n");
            for l in render_trace(&r.result.labels(), &m).lines() {
                writeln!(report.body, "  {l}").unwrap();
            }
        }
        Command::ReduceCm { cm, full_test_states } => {
            let machine = report.timed("parse", || load_cm(cm))?;
            let red = report
                .timed("compile", || {
                    compile_cm(
                        &machine,
                        &CompileOptions {
                            full_test_states: *full_test_states,
                        },
                    )
                })
                .map_err(cm_errors)?;
            // The compiled model is the whole report so that it can be fed
            // back to the other commands.
            let file = ModelFile {
                spec: red.spec,
                queries: vec![red.target],
            };
            return Ok(render_model(&file));
        }
        Command::VerifyCm {
            cm,
            full_test_states,
            cm_steps,
        } => {
            let machine = report.timed("parse", || load_cm(cm))?;
            let bounds = VerifyBounds {
                cm_steps: *cm_steps,
                cm_counter: u64::from(flags.max_count),
                explorer: flags.bounds(),
            };
            let options = CompileOptions {
                full_test_states: *full_test_states,
            };
            let red = compile_cm(&machine, &options).map_err(cm_errors)?;
            let r = report
                .timed("verify", || verify_reduction(&machine, &options, &bounds))
                .map_err(cm_errors)?;
            report.line("machine", &machine.name);
            match &r.machine {
                CmOutcome::Halts(run) => {
                    report.line("machine_verdict", "halts");
                    let text: Vec<_> = run
                        .iter()
                        .map(|c| format!("({},{},{})", machine.states[c.state], c.c1, c.c2))
                        .collect();
                    report.line("machine_run", text.join(" "));
                }
                CmOutcome::NoHaltAtBound { exhausted } => report.line(
                    "machine_verdict",
                    if *exhausted {
                        "never halts"
                    } else {
                        "no halt within bound"
                    },
                ),
            }
            report.line(
                "system_threads",
                red.model
                    .threads
                    .iter()
                    .map(|t| t.states.len().to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            exploration(&mut report, &r.system, &red.model, flags.witness);
            if let Some(p) = &r.projection {
                match p {
                    Ok(run) => {
                        let text: Vec<_> = run
                            .iter()
                            .map(|c| format!("({},{},{})", machine.states[c.state], c.c1, c.c2))
                            .collect();
                        report.line("projection", text.join(" "));
                    }
                    Err(e) => report.line("projection", format!("failed: {e}")),
                }
            }
            report.line("agree", r.agree());
        }
    }
    Ok(report.finish(!flags.no_timing))
}

fn contextual_line(report: &mut Report, comp: &Computation, m: &Model) {
    match check_contextual_trace(comp, m.mode).first() {
        None => report.line("contextual", "yes"),
        Some(v) => report.line("contextual", format!("no ({v})")),
    }
}

fn exploration(report: &mut Report, ex: &Exploration, m: &Model, style: WitnessStyle) {
    match &ex.outcome {
        Outcome::Found(w) => {
            report.line("verdict", "found");
            report.line("visited", ex.visited);
            report.line("length", w.len());
            witness(report, "witness", w, m, style);
        }
        Outcome::NotFound { exhausted } => {
            report.line(
                "verdict",
                if *exhausted {
                    "unreachable (exhausted)"
                } else {
                    "not found within bounds"
                },
            );
            report.line("visited", ex.visited);
        }
    }
}

fn cm_errors(errors: Vec<ctxlock::reentrant::CmError>) -> Failure {
    Failure::Input(format!(
        "invalid counter machine: {}",
        errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
    ))
}
