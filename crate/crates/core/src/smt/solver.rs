//! Runs an external SMT-LIB v2 solver, one process per query.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use thiserror::Error;

use super::encode::{DecodeError, Encoder, ROUTE_SORT};
use super::sexp::{parse_all, Sexp};
use crate::model::Route;

/// Environment variable naming the solver binary.
pub const SOLVER_ENV: &str = "CBGRAPH_SOLVER";
/// Environment variable with whitespace-separated solver arguments.
pub const SOLVER_ARGS_ENV: &str = "CBGRAPH_SOLVER_ARGS";

pub const DEFAULT_SOLVER: &str = "z3";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
    /// When set, every script is also written to this directory.
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            program: DEFAULT_SOLVER.to_string(),
            args: default_args(),
            timeout: DEFAULT_TIMEOUT,
            dump_dir: None,
        }
    }
}

fn default_args() -> Vec<String> {
    vec!["-in".to_string(), "-smt2".to_string()]
}

impl SolverConfig {
    /// Explicit program, else `CBGRAPH_SOLVER`, else `z3` on the search path.
    pub fn discover(program: Option<&str>) -> Self {
        let program = program
            .map(str::to_string)
            .or_else(|| {
                std::env::var(SOLVER_ENV)
                    .ok()
                    .filter(|s| !s.trim().is_empty())
            })
            .unwrap_or_else(|| DEFAULT_SOLVER.to_string());
        let args = std::env::var(SOLVER_ARGS_ENV)
            .ok()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .unwrap_or_else(default_args);
        SolverConfig {
            program,
            args,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("cannot start solver `{program}`: {source}")]
    Spawn {
        program: String,
        source: std::io::Error,
    },
    #[error("solver crashed on {label}: {message}")]
    Crash { label: String, message: String },
    #[error("cannot write SMT dump: {0}")]
    Dump(std::io::Error),
}

/// Outcome of a validity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Valid,
    /// A falsifying assignment for every declared route variable.
    Invalid {
        model: BTreeMap<String, Route>,
    },
    Unknown {
        reason: String,
    },
}

/// A formula with its free route variables. Validity means the formula
/// holds for every assignment of routes to `vars`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub vars: Vec<String>,
    pub term: Sexp,
}

/// Raw solver output or a timeout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Output(String),
    TimedOut,
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Feeds `script` to a fresh solver process and collects its output. The
/// process is killed when the timeout expires.
pub fn run_script(
    cfg: &SolverConfig,
    label: &str,
    script: &str,
) -> Result<RunOutcome, SolverError> {
    if let Some(dir) = &cfg.dump_dir {
        std::fs::create_dir_all(dir).map_err(SolverError::Dump)?;
        std::fs::write(dir.join(format!("{}.smt2", sanitize(label))), script)
            .map_err(SolverError::Dump)?;
    }
    let mut child = Command::new(&cfg.program)
        .args(&cfg.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SolverError::Spawn {
            program: cfg.program.clone(),
            source,
        })?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = script.to_string();
    let writer = thread::spawn(move || {
        // a solver that dies early closes the pipe; the exit status reports it
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut out = String::new();
        let mut err = String::new();
        let r = stdout.read_to_string(&mut out);
        let _ = stderr.read_to_string(&mut err);
        let _ = tx.send((r, out, err));
    });

    match rx.recv_timeout(cfg.timeout) {
        Ok((read, out, err)) => {
            let _ = writer.join();
            let status = child.wait();
            read.map_err(|e| SolverError::Crash {
                label: label.to_string(),
                message: e.to_string(),
            })?;
            match status {
                Ok(s) if s.success() || !out.trim().is_empty() => Ok(RunOutcome::Output(out)),
                Ok(s) => Err(SolverError::Crash {
                    label: label.to_string(),
                    message: format!("exit status {s}; stderr: {}", err.trim()),
                }),
                Err(e) => Err(SolverError::Crash {
                    label: label.to_string(),
                    message: e.to_string(),
                }),
            }
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            Ok(RunOutcome::TimedOut)
        }
    }
}

/// The full script asserting the negation of `f`.
pub fn validity_script(enc: &Encoder<'_>, f: &Formula) -> String {
    let mut s = String::new();
    s.push_str("(set-logic ALL)\n");
    s.push_str(&enc.sort_declaration());
    s.push('\n');
    for v in &f.vars {
        s.push_str(&format!("(declare-const {v} {ROUTE_SORT})\n"));
    }
    s.push_str(&format!("(assert (not {}))\n", f.term));
    s.push_str("(check-sat)\n");
    if !f.vars.is_empty() {
        s.push_str(&format!("(get-value ({}))\n", f.vars.join(" ")));
    }
    s.push_str("(exit)\n");
    s
}

fn crash(label: &str, message: impl Into<String>) -> SolverError {
    SolverError::Crash {
        label: label.to_string(),
        message: message.into(),
    }
}

fn first_error(responses: &[Sexp]) -> Option<String> {
    responses.iter().find_map(|r| match r.as_list() {
        Some([Sexp::Atom(h), msg, ..]) if h == "error" => Some(msg.to_string()),
        _ => None,
    })
}

/// Checks whether `f` is valid.
pub fn check_validity(
    cfg: &SolverConfig,
    enc: &Encoder<'_>,
    label: &str,
    f: &Formula,
) -> Result<SolverVerdict, SolverError> {
    let script = validity_script(enc, f);
    let out = match run_script(cfg, label, &script)? {
        RunOutcome::TimedOut => {
            return Ok(SolverVerdict::Unknown {
                reason: format!("timeout after {:?}", cfg.timeout),
            })
        }
        RunOutcome::Output(out) => out,
    };
    let responses = parse_all(&out).map_err(|e| crash(label, format!("unparsable output: {e}")))?;
    match responses.first().and_then(Sexp::as_atom) {
        Some("unsat") => Ok(SolverVerdict::Valid),
        Some("unknown") => Ok(SolverVerdict::Unknown {
            reason: "solver returned unknown".into(),
        }),
        Some("timeout") => Ok(SolverVerdict::Unknown {
            reason: "solver reported timeout".into(),
        }),
        Some("sat") => {
            if let Some(e) = first_error(&responses) {
                return Err(crash(label, e));
            }
            let model = parse_model(enc, &f.vars, responses.get(1))
                .map_err(|e| crash(label, format!("bad model: {e}")))?;
            Ok(SolverVerdict::Invalid { model })
        }
        _ => Err(crash(
            label,
            first_error(&responses)
                .unwrap_or_else(|| format!("unexpected output `{}`", out.trim())),
        )),
    }
}

fn parse_model(
    enc: &Encoder<'_>,
    vars: &[String],
    values: Option<&Sexp>,
) -> Result<BTreeMap<String, Route>, DecodeError> {
    let mut model = BTreeMap::new();
    let pairs = values.and_then(Sexp::as_list).unwrap_or_default();
    for p in pairs {
        if let Some([Sexp::Atom(name), value]) = p.as_list() {
            model.insert(name.clone(), enc.decode(value)?);
        }
    }
    for v in vars {
        if !model.contains_key(v) {
            return Err(DecodeError::NotARoute(format!("no value for {v}")));
        }
    }
    Ok(model)
}

/// Evaluates ground terms in one solver call and returns their values in
/// order. Used to compare the encoding against concrete evaluation.
pub fn eval_ground(
    cfg: &SolverConfig,
    enc: &Encoder<'_>,
    label: &str,
    terms: &[Sexp],
) -> Result<Vec<Sexp>, SolverError> {
    if terms.is_empty() {
        return Ok(Vec::new());
    }
    let mut s = String::new();
    s.push_str("(set-logic ALL)\n");
    s.push_str(&enc.sort_declaration());
    s.push_str("\n(check-sat)\n(get-value (");
    for (i, t) in terms.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&t.to_string());
    }
    s.push_str("))\n(exit)\n");
    let out = match run_script(cfg, label, &s)? {
        RunOutcome::TimedOut => return Err(crash(label, "timeout during ground evaluation")),
        RunOutcome::Output(out) => out,
    };
    let responses = parse_all(&out).map_err(|e| crash(label, e.to_string()))?;
    if let Some(e) = first_error(&responses) {
        return Err(crash(label, e));
    }
    let values = responses
        .get(1)
        .and_then(Sexp::as_list)
        .ok_or_else(|| crash(label, format!("no values in `{}`", out.trim())))?;
    if values.len() != terms.len() {
        return Err(crash(label, "value count mismatch"));
    }
    values
        .iter()
        .map(|p| match p.as_list() {
            Some([_, v]) => Ok(v.clone()),
            _ => Err(crash(label, format!("bad value pair `{p}`"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitized_labels() {
        assert_eq!(sanitize("CBedge(C->E)"), "CBedge_C-_E_");
    }

    #[test]
    fn missing_solver_is_spawn_error() {
        let cfg = SolverConfig {
            program: "/nonexistent/solver".into(),
            ..SolverConfig::default()
        };
        assert!(matches!(
            run_script(&cfg, "x", "(exit)"),
            Err(SolverError::Spawn { .. })
        ));
    }
}
