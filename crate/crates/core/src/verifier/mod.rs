//! Deductive verifier: obligation generation, discharge and verdicts.

pub mod logic;
pub mod prover;
pub mod smtlib;
mod symexec;

pub use logic::{ArrInit, Decl, LArr, LForm, LTerm, Sort};
pub use smtlib::{emit_smtlib, parse_declarations, run_solver, smt_symbols, SolverAnswer, SolverConfig};
pub use symexec::{uncovered_writes, wp_obligations, ProofObligation, WpResult, MAX_PATHS};

use crate::lang::Program;
use crate::spec::Property;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    True,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discharge {
    Valid,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Internal,
    Smt(SolverConfig),
    /// Internal prover first, the solver for what it leaves open.
    Portfolio(SolverConfig),
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Undischarged obligations; empty exactly when the status is `True`.
    pub feedback: Vec<ProofObligation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Verdict {
    pub fn is_true(&self) -> bool {
        self.status == Status::True
    }
}

pub fn discharge(ob: &ProofObligation, backend: &Backend) -> Discharge {
    let internal = || {
        let hyps: Vec<LForm> = ob.hypothesis_forms().cloned().collect();
        prover::prove(&ob.declarations, &hyps, &ob.goal)
    };
    let smt = |cfg: &SolverConfig| run_solver(cfg, &emit_smtlib(ob)) == SolverAnswer::Unsat;
    let ok = match backend {
        Backend::Internal => internal(),
        Backend::Smt(cfg) => smt(cfg),
        Backend::Portfolio(cfg) => internal() || smt(cfg),
    };
    if ok {
        Discharge::Valid
    } else {
        Discharge::Unknown
    }
}

#[derive(Debug, Clone, Default)]
pub struct Verifier {
    pub backend: Backend,
    /// Every generated obligation is written here as `.txt` and `.smt2`.
    pub dump_dir: Option<PathBuf>,
}

impl Verifier {
    pub fn new(backend: Backend) -> Self {
        Verifier { backend, dump_dir: None }
    }

    pub fn verify(&self, prog: &Program, hyps: &[Property], q: &Property) -> Verdict {
        let wp = match wp_obligations(prog, hyps, q) {
            Ok(wp) => wp,
            Err(e) => {
                let ob = ProofObligation {
                    name: format!("{}.error", q.id),
                    target: q.id.clone(),
                    reason: e.to_string(),
                    hypotheses: Vec::new(),
                    declarations: Vec::new(),
                    goal: LForm::Bool(false),
                    at: q.at.clone(),
                };
                return Verdict { status: Status::Unknown, feedback: vec![ob], warnings: Vec::new() };
            }
        };
        if let Some(dir) = &self.dump_dir {
            self.dump(dir, &wp.obligations);
        }
        let results: Vec<Discharge> = wp.obligations.par_iter().map(|o| discharge(o, &self.backend)).collect();
        let feedback: Vec<ProofObligation> = wp
            .obligations
            .into_iter()
            .zip(results)
            .filter(|(_, r)| *r == Discharge::Unknown)
            .map(|(o, _)| o)
            .collect();
        let status = if feedback.is_empty() { Status::True } else { Status::Unknown };
        Verdict { status, feedback, warnings: wp.warnings }
    }

    fn dump(&self, dir: &std::path::Path, obs: &[ProofObligation]) {
        if std::fs::create_dir_all(dir).is_err() {
            return;
        }
        for o in obs {
            let stem = o.name.replace(['/', ' '], "_");
            let _ = std::fs::write(dir.join(format!("{stem}.txt")), render_obligation(o));
            let _ = std::fs::write(dir.join(format!("{stem}.smt2")), emit_smtlib(o));
        }
    }
}

/// `verify` with the internal prover.
pub fn verify(prog: &Program, hyps: &[Property], q: &Property) -> Verdict {
    Verifier::default().verify(prog, hyps, q)
}

pub fn render_obligation(ob: &ProofObligation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "obligation {} for {} at {} ({})", ob.name, ob.target, ob.at, ob.reason);
    if !ob.declarations.is_empty() {
        let ds: Vec<String> = ob.declarations.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "  given {}", ds.join("; "));
    }
    for (label, f) in &ob.hypotheses {
        let _ = writeln!(s, "  {label}: {f}");
    }
    let _ = writeln!(s, "  Q: {}", ob.goal);
    s
}

pub fn render_feedback(v: &Verdict) -> String {
    v.feedback.iter().map(render_obligation).collect::<Vec<_>>().join("\n")
}

#[derive(Serialize)]
struct Labeled<'a> {
    label: &'a str,
    formula: String,
}

#[derive(Serialize)]
struct ObligationView<'a> {
    name: &'a str,
    target: &'a str,
    reason: &'a str,
    at: String,
    declarations: Vec<String>,
    hypotheses: Vec<Labeled<'a>>,
    goal: String,
}

impl Serialize for ProofObligation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ObligationView {
            name: &self.name,
            target: &self.target,
            reason: &self.reason,
            at: self.at.to_string(),
            declarations: self.declarations.iter().map(|d| d.to_string()).collect(),
            hypotheses: self.hypotheses.iter().map(|(l, f)| Labeled { label: l, formula: f.to_string() }).collect(),
            goal: self.goal.to_string(),
        }
        .serialize(s)
    }
}
