//! Plain-text formats for models, counter machines and traces.
//!
//! All three are line based: one declaration per line, tokens separated by
//! whitespace, `#` starts a comment. Parse errors carry a 1-based line and
//! column.

use std::fmt::Write as _;

use ctxlock::model::{validate, validate_query, Model, MultiPdsSpec, PairQuery, PdsSpec, TransitionDecl, Violation};
use ctxlock::reentrant::{CmOp, CmTransition, CounterMachine};
use ctxlock::semantics::{kind_name, Computation, Label, LabelKind, ReplayError};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("trace does not replay: {0}")]
    Replay(#[from] ReplayError),
}

fn join(vs: &[Violation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// A token and its 1-based column.
#[derive(Clone, Copy)]
struct Tok<'a> {
    col: usize,
    text: &'a str,
}

struct Line<'a> {
    no: usize,
    toks: Vec<Tok<'a>>,
}

impl<'a> Line<'a> {
    fn head(&self) -> Tok<'a> {
        self.toks[0]
    }

    /// Column just past the last token, for "missing argument" errors.
    fn end(&self) -> usize {
        let last = self.toks.last().unwrap();
        last.col + last.text.chars().count()
    }

    fn args(&self, n: usize, usage: &str) -> Result<Vec<&'a str>, FormatError> {
        let got = self.toks.len() - 1;
        if got < n {
            return Err(syntax(self.no, self.end(), format!("expected `{usage}`")));
        }
        if got > n {
            let extra = self.toks[n + 1];
            return Err(syntax(
                self.no,
                extra.col,
                format!("unexpected `{}`; expected `{usage}`", extra.text),
            ));
        }
        Ok(self.toks[1..].iter().map(|t| t.text).collect())
    }

    fn at_least(&self, n: usize, usage: &str) -> Result<Vec<Tok<'a>>, FormatError> {
        if self.toks.len() - 1 < n {
            return Err(syntax(self.no, self.end(), format!("expected `{usage}`")));
        }
        Ok(self.toks[1..].to_vec())
    }
}

fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let code = raw.split('#').next().unwrap_or("");
        let mut toks = Vec::new();
        let mut start = None;
        for (col, (byte, ch)) in code.char_indices().enumerate() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some((col, byte)),
                (true, Some((c, b))) => {
                    toks.push(Tok {
                        col: c + 1,
                        text: &code[b..byte],
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some((c, b)) = start {
            toks.push(Tok {
                col: c + 1,
                text: &code[b..],
            });
        }
        if !toks.is_empty() {
            out.push(Line { no: i + 1, toks });
        }
    }
    out
}

/// A parsed model file: the system and its queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelFile {
    pub spec: MultiPdsSpec,
    pub queries: Vec<PairQuery>,
}

struct OpenThread {
    spec: PdsSpec,
    line: usize,
    col: usize,
    has_init: bool,
}

fn declare(list: &mut Vec<String>, name: &str) {
    if !list.iter().any(|s| s == name) {
        list.push(name.to_string());
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile, FormatError> {
    let ls = lines(text);
    let Some(first) = ls.first() else {
        return Err(syntax(1, 1, "missing system header"));
    };
    if first.head().text != "system" {
        return Err(syntax(first.no, first.head().col, "missing system header"));
    }
    let name = first.args(1, "system <name>")?[0];
    let mut spec = MultiPdsSpec::new(name, &[], Vec::new());
    let mut seen_reentrant = false;
    let mut open: Option<OpenThread> = None;
    let mut raw_queries = Vec::new();
    for line in &ls[1..] {
        let head = line.head();
        if let Some(t) = open.as_mut() {
            let s = &mut t.spec;
            let decl = match head.text {
                "end" => {
                    line.args(0, "end")?;
                    let t = open.take().unwrap();
                    if !t.has_init {
                        return Err(syntax(
                            t.line,
                            t.col,
                            format!("thread `{}` has no `init` line", t.spec.name),
                        ));
                    }
                    spec.threads.push(t.spec);
                    continue;
                }
                "init" => {
                    let a = line.args(1, "init <state>")?;
                    if t.has_init {
                        return Err(syntax(line.no, head.col, "second `init` in thread"));
                    }
                    t.has_init = true;
                    s.initial = a[0].to_string();
                    declare(&mut s.states, a[0]);
                    continue;
                }
                "states" => {
                    for tok in line.at_least(1, "states <id>+")? {
                        declare(&mut s.states, tok.text);
                    }
                    continue;
                }
                "symbols" => {
                    for tok in line.at_least(1, "symbols <id>+")? {
                        declare(&mut s.stack_alphabet, tok.text);
                    }
                    continue;
                }
                "internal" => {
                    let a = line.args(2, "internal <q> <q'>")?;
                    TransitionDecl::Internal {
                        from: a[0].into(),
                        to: a[1].into(),
                    }
                }
                "push" => {
                    let a = line.args(3, "push <q> <q'> <sym>")?;
                    TransitionDecl::Push {
                        from: a[0].into(),
                        to: a[1].into(),
                        symbol: a[2].into(),
                    }
                }
                "pop" => {
                    let a = line.args(3, "pop <q> <sym> <q'>")?;
                    TransitionDecl::Pop {
                        from: a[0].into(),
                        symbol: a[1].into(),
                        to: a[2].into(),
                    }
                }
                "acq" => {
                    let a = line.args(3, "acq <q> <q'> <lock>")?;
                    TransitionDecl::Acq {
                        from: a[0].into(),
                        to: a[1].into(),
                        lock: a[2].into(),
                    }
                }
                "rel" => {
                    let a = line.args(3, "rel <q> <lock> <q'>")?;
                    TransitionDecl::Rel {
                        from: a[0].into(),
                        lock: a[1].into(),
                        to: a[2].into(),
                    }
                }
                other => {
                    return Err(syntax(
                        line.no,
                        head.col,
                        format!("unknown declaration `{other}` inside thread"),
                    ))
                }
            };
            match &decl {
                TransitionDecl::Internal { from, to }
                | TransitionDecl::Acq { from, to, .. }
                | TransitionDecl::Rel { from, to, .. } => {
                    declare(&mut s.states, from);
                    declare(&mut s.states, to);
                }
                TransitionDecl::Push { from, to, symbol } | TransitionDecl::Pop { from, symbol, to } => {
                    declare(&mut s.states, from);
                    declare(&mut s.states, to);
                    declare(&mut s.stack_alphabet, symbol);
                }
            }
            s.transitions.push(decl);
            continue;
        }
        match head.text {
            "system" => return Err(syntax(line.no, head.col, "second `system` header")),
            "locks" => {
                for tok in line.at_least(1, "locks <id>+")? {
                    if spec.locks.iter().any(|l| l == tok.text) {
                        return Err(syntax(line.no, tok.col, format!("lock `{}` declared twice", tok.text)));
                    }
                    spec.locks.push(tok.text.to_string());
                }
            }
            "reentrant" => {
                let a = line.args(1, "reentrant <true|false>")?;
                if seen_reentrant {
                    return Err(syntax(line.no, head.col, "second `reentrant` line"));
                }
                seen_reentrant = true;
                spec.reentrant = match a[0] {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(syntax(
                            line.no,
                            line.toks[1].col,
                            format!("expected `true` or `false`, got `{other}`"),
                        ))
                    }
                };
            }
            "thread" => {
                let a = line.args(1, "thread <name>")?;
                if spec.threads.iter().any(|t| t.name == a[0]) {
                    return Err(syntax(
                        line.no,
                        line.toks[1].col,
                        format!("thread `{}` declared twice", a[0]),
                    ));
                }
                let mut s = PdsSpec::new(a[0], "");
                s.states.clear();
                open = Some(OpenThread {
                    spec: s,
                    line: line.no,
                    col: head.col,
                    has_init: false,
                });
            }
            "query" => {
                line.args(4, "query <threadA> <stateA> <threadB> <stateB>")?;
                raw_queries.push(line);
            }
            "end" => return Err(syntax(line.no, head.col, "`end` outside a thread block")),
            other => return Err(syntax(line.no, head.col, format!("unknown declaration `{other}`"))),
        }
    }
    if let Some(t) = open {
        return Err(syntax(
            t.line,
            t.col,
            format!("thread `{}` is missing `end`", t.spec.name),
        ));
    }
    let queries = raw_queries
        .into_iter()
        .map(|line| resolve_query(line.no, &line.toks[1..], &spec))
        .collect::<Result<Vec<_>, _>>()?;
    let mut violations = validate(&spec);
    if violations.is_empty() {
        for q in &queries {
            violations.extend(validate_query(&spec, q));
        }
    }
    if !violations.is_empty() {
        return Err(FormatError::Invalid(violations));
    }
    Ok(ModelFile { spec, queries })
}

fn resolve_query(no: usize, toks: &[Tok<'_>], spec: &MultiPdsSpec) -> Result<PairQuery, FormatError> {
    let index = |tok: Tok<'_>| {
        spec.threads
            .iter()
            .position(|t| t.name == tok.text)
            .ok_or_else(|| syntax(no, tok.col, format!("query names unknown thread `{}`", tok.text)))
    };
    Ok(PairQuery::new(
        index(toks[0])?,
        toks[1].text,
        index(toks[2])?,
        toks[3].text,
    ))
}

/// Parses `<threadA> <stateA> <threadB> <stateB>` against `spec`.
pub fn parse_query(text: &str, spec: &MultiPdsSpec) -> Result<PairQuery, FormatError> {
    let toks = lines(text).into_iter().next().map(|l| l.toks).unwrap_or_default();
    if toks.len() != 4 {
        return Err(syntax(1, 1, "expected `<threadA> <stateA> <threadB> <stateB>`"));
    }
    let q = resolve_query(1, &toks, spec)?;
    let violations = validate_query(spec, &q);
    if !violations.is_empty() {
        return Err(FormatError::Invalid(violations));
    }
    Ok(q)
}

/// Renders a model so that [`parse_model`] yields the same spec and
/// queries back. States and symbols are listed explicitly to keep their
/// order.
pub fn render_model(file: &ModelFile) -> String {
    let spec = &file.spec;
    let mut out = format!("system {}\n", spec.name);
    if !spec.locks.is_empty() {
        writeln!(out, "locks {}", spec.locks.join(" ")).unwrap();
    }
    if spec.reentrant {
        out.push_str("reentrant true\n");
    }
    for t in &spec.threads {
        writeln!(out, "\nthread {}", t.name).unwrap();
        if !t.states.is_empty() {
            writeln!(out, "  states {}", t.states.join(" ")).unwrap();
        }
        if !t.stack_alphabet.is_empty() {
            writeln!(out, "  symbols {}", t.stack_alphabet.join(" ")).unwrap();
        }
        writeln!(out, "  init {}", t.initial).unwrap();
        for d in &t.transitions {
            writeln!(out, "  {d}").unwrap();
        }
        out.push_str("end\n");
    }
    if !file.queries.is_empty() {
        out.push('\n');
    }
    for q in &file.queries {
        let name = |i: usize| spec.threads.get(i).map_or("?", |t| t.name.as_str());
        writeln!(out, "query {} {} {} {}", name(q.i), q.q_i, name(q.j), q.q_j).unwrap();
    }
    out
}

pub fn parse_cm(text: &str) -> Result<CounterMachine, FormatError> {
    let ls = lines(text);
    let Some(first) = ls.first() else {
        return Err(syntax(1, 1, "missing cm header"));
    };
    if first.head().text != "cm" {
        return Err(syntax(first.no, first.head().col, "missing cm header"));
    }
    let mut m = CounterMachine::new(first.args(1, "cm <name>")?[0], &[], "", "");
    let (mut init, mut fin, mut states) = (None, None, false);
    for line in &ls[1..] {
        let head = line.head();
        let counter = |tok: Tok<'_>| {
            tok.text
                .parse::<u8>()
                .map_err(|_| syntax(line.no, tok.col, format!("expected counter index, got `{}`", tok.text)))
        };
        let op = match head.text {
            "states" => {
                for tok in line.at_least(1, "states <id>+")? {
                    m.states.push(tok.text.to_string());
                }
                states = true;
                continue;
            }
            "init" | "final" => {
                let a = line.args(1, &format!("{} <q>", head.text))?;
                let slot = if head.text == "init" { &mut init } else { &mut fin };
                if slot.is_some() {
                    return Err(syntax(line.no, head.col, format!("second `{}` line", head.text)));
                }
                *slot = Some(a[0].to_string());
                continue;
            }
            "state" => {
                line.args(2, "state <q> <q'>")?;
                CmOp::State
            }
            "inc" | "dec" | "zero" => {
                line.args(3, &format!("{} <i> <q> <q'>", head.text))?;
                let i = counter(line.toks[1])?;
                match head.text {
                    "inc" => CmOp::Inc(i),
                    "dec" => CmOp::Dec(i),
                    _ => CmOp::Zero(i),
                }
            }
            other => return Err(syntax(line.no, head.col, format!("unknown declaration `{other}`"))),
        };
        let n = line.toks.len();
        m.transitions.push(CmTransition {
            op,
            from: line.toks[n - 2].text.into(),
            to: line.toks[n - 1].text.into(),
        });
    }
    let missing = |what: &str| syntax(ls.last().unwrap().no, 1, format!("missing `{what}` line"));
    if !states {
        return Err(missing("states"));
    }
    m.initial = init.ok_or_else(|| missing("init"))?;
    m.final_state = fin.ok_or_else(|| missing("final"))?;
    Ok(m)
}

pub fn render_cm(m: &CounterMachine) -> String {
    let mut out = format!(
        "cm {}\nstates {}\ninit {}\nfinal {}\n",
        m.name,
        m.states.join(" "),
        m.initial,
        m.final_state
    );
    for t in &m.transitions {
        let op = match t.op {
            CmOp::State => "state".to_string(),
            CmOp::Inc(i) => format!("inc {i}"),
            CmOp::Dec(i) => format!("dec {i}"),
            CmOp::Zero(i) => format!("zero {i}"),
        };
        writeln!(out, "{op} {} {}", t.from, t.to).unwrap();
    }
    out
}

/// Parses a label file against `model` and replays it from the initial
/// configuration.
pub fn parse_trace(text: &str, model: &Model) -> Result<Computation, FormatError> {
    let mut labels = Vec::new();
    for line in lines(text) {
        let a = line.args(1, "<label> <thread-index>")?;
        let (kt, tt) = (line.toks[0], line.toks[1]);
        let thread: usize = a[0]
            .parse()
            .ok()
            .filter(|&t| t < model.threads.len())
            .ok_or_else(|| syntax(line.no, tt.col, format!("no thread with index `{}`", a[0])))?;
        let lock = |arg: &str| {
            model
                .lock_id(arg)
                .ok_or_else(|| syntax(line.no, kt.col, format!("undeclared lock `{arg}`")))
        };
        let kind = match kt.text {
            "state" => LabelKind::State,
            "push" => LabelKind::Push,
            "pop" => LabelKind::Pop,
            k => match k.strip_suffix(')').and_then(|k| k.split_once('(')) {
                Some(("acq", l)) => LabelKind::Acq(lock(l)?),
                Some(("rel", l)) => LabelKind::Rel(lock(l)?),
                _ => return Err(syntax(line.no, kt.col, format!("unknown label `{k}`"))),
            },
        };
        labels.push(Label::new(kind, thread));
    }
    Ok(Computation::from_labels(model, &labels)?)
}

pub fn render_trace(labels: &[Label], model: &Model) -> String {
    labels
        .iter()
        .map(|l| format!("{} {}\n", kind_name(l.kind, model), l.thread))
        .collect()
}
