//! Feedback-driven specification synthesis over a V-Unit queue.

pub mod templates;

pub use templates::TemplateProposer;

use crate::analysis::CallGraph;
use crate::lang::{Location, Program};
use crate::spec::{scope_check, Origin, Pred, PropKind, Property, PropertyLedger, ScopeRules};
use crate::verifier::{Backend, Status, Verdict, Verifier};
use crate::vunits::{SiteRole, VUnit, VUnitQueue};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProposerKind {
    #[default]
    Template,
    Llm,
    Hybrid,
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Refinement rounds per unit; at least 1.
    pub iter: usize,
    pub syntax_fix_attempts: usize,
    pub proposer: ProposerKind,
    pub backend: Backend,
    pub dump_dir: Option<std::path::PathBuf>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            iter: 2,
            syntax_fix_attempts: 3,
            proposer: ProposerKind::Template,
            backend: Backend::Internal,
            dump_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Host,
    Callee,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateSpec {
    pub property: Property,
    pub stage: Stage,
    pub raw_text: String,
}

/// What a proposer hands back: a located property, or text that failed to
/// parse or attach, with the error shown to the proposer on correction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Proposal {
    Parsed(CandidateSpec),
    Illegal { stage: Stage, raw_text: String, error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("proposer unavailable: {0}")]
pub struct ProposerUnavailable(pub String);

/// Everything a proposer may look at for one unit.
pub struct Request<'a> {
    pub prog: &'a Program,
    pub unit: &'a VUnit,
    /// `V ∪ H` plus what this unit has accepted so far.
    pub context: &'a [Property],
    pub verdict: &'a Verdict,
}

pub trait Proposer {
    fn name(&self) -> &'static str;

    fn propose(&mut self, stage: Stage, req: &Request<'_>) -> Result<Vec<Proposal>, ProposerUnavailable>;

    /// One correction round for an illegal candidate. `None` means this
    /// proposer does not correct.
    fn correct(
        &mut self,
        _stage: Stage,
        _req: &Request<'_>,
        _raw_text: &str,
        _error: &str,
    ) -> Result<Option<Proposal>, ProposerUnavailable> {
        Ok(None)
    }
}

/// Primary proposals followed by template proposals; template only when the
/// primary is unavailable.
pub struct HybridProposer {
    pub primary: Box<dyn Proposer>,
    pub fallback: TemplateProposer,
}

impl Proposer for HybridProposer {
    fn name(&self) -> &'static str {
        "hybrid"
    }

    fn propose(&mut self, stage: Stage, req: &Request<'_>) -> Result<Vec<Proposal>, ProposerUnavailable> {
        let mut out = self.primary.propose(stage, req).unwrap_or_default();
        out.extend(self.fallback.propose(stage, req)?);
        Ok(out)
    }

    fn correct(
        &mut self,
        stage: Stage,
        req: &Request<'_>,
        raw_text: &str,
        error: &str,
    ) -> Result<Option<Proposal>, ProposerUnavailable> {
        self.primary.correct(stage, req, raw_text, error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub candidate: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IterationRecord {
    pub status: Option<Status>,
    pub obligations: usize,
    pub proposer: String,
    pub proposed: Vec<String>,
    pub accepted: Vec<String>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitRecord {
    pub unit: usize,
    pub guard: String,
    pub host: String,
    pub predicate: String,
    pub at: Location,
    pub kind: &'static str,
    pub iterations: Vec<IterationRecord>,
    pub verdict: Status,
    /// Verify calls on the guard itself (at most `iter + 1`).
    pub verifier_calls: usize,
    pub candidate_checks: usize,
    pub accepted: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SynthesisOutcome {
    pub ledger: PropertyLedger,
    pub timeline: Vec<UnitRecord>,
}

/// Splits `S′` into preconditions and the rest.
pub fn extract_preconditions(s: &[Property]) -> (Vec<Property>, Vec<Property>) {
    s.iter().cloned().partition(|p| p.kind == PropKind::Precondition)
}

fn rules_for(kind: &PropKind) -> ScopeRules {
    let post = *kind == PropKind::Postcondition;
    ScopeRules { allow_result: post, allow_old: post }
}

/// Stage rules and scope for one candidate.
pub fn syntax_check(prog: &Program, unit: &VUnit, c: &CandidateSpec) -> Result<(), String> {
    let p = &c.property;
    let host = unit.host.as_str();
    let callee = |f: &str| unit.context.iter().skip(1).any(|c| c == f);
    match (c.stage, &p.kind) {
        (Stage::Host, PropKind::Precondition) if p.at == Location::Entry(host.to_string()) => {}
        (Stage::Host, PropKind::LoopInvariant | PropKind::LoopAssigns(_) | PropKind::PlainAssert) if p.func == host => {}
        (Stage::Callee, PropKind::Postcondition) if callee(&p.func) && p.at == Location::Exit(p.func.clone()) => {}
        (Stage::Callee, PropKind::LoopInvariant) if callee(&p.func) => {}
        (Stage::Callee, PropKind::Precondition) => {
            return Err("preconditions may not be proposed for callee functions".into());
        }
        (stage, kind) => {
            return Err(format!("a {} clause in `{}` is not allowed in the {stage:?} stage", kind.tag(), p.func));
        }
    }
    if prog.func_of(&p.at) != Some(p.func.as_str()) {
        return Err(format!("location {} is not in `{}`", p.at, p.func));
    }
    if let PropKind::LoopAssigns(xs) = &p.kind {
        let info = prog.loc_info(&p.at).ok_or("unknown location")?;
        if !info.is_loop {
            return Err("loop assigns must be attached to a loop".into());
        }
        for x in xs {
            if !info.scope.iter().any(|(n, _)| n == x) {
                return Err(format!("variable `{x}` is unbound here"));
            }
        }
        return Ok(());
    }
    if p.kind == PropKind::LoopInvariant && !prog.loc_info(&p.at).is_some_and(|i| i.is_loop) {
        return Err("loop invariant must be attached to a loop".into());
    }
    scope_check(prog, &p.predicate, &p.at, rules_for(&p.kind)).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Corrected {
    Fixed(CandidateSpec),
    Discarded { raw_text: String, error: String },
}

/// Checks `cand` and, while it is illegal, asks the proposer for at most `k`
/// corrections, each given the latest error. An unavailable proposer ends
/// the loop like a refusal.
pub fn correction_loop(proposer: &mut dyn Proposer, req: &Request<'_>, cand: Proposal, k: usize) -> Corrected {
    let mut cur = cand;
    let mut attempts = 0;
    loop {
        let (stage, raw_text, error) = match cur {
            Proposal::Parsed(c) => match syntax_check(req.prog, req.unit, &c) {
                Ok(()) => return Corrected::Fixed(c),
                Err(e) => (c.stage, c.raw_text, e),
            },
            Proposal::Illegal { stage, raw_text, error } => (stage, raw_text, error),
        };
        if attempts >= k {
            return Corrected::Discarded { raw_text, error };
        }
        attempts += 1;
        match proposer.correct(stage, req, &raw_text, &error) {
            Ok(Some(p)) => cur = p,
            _ => return Corrected::Discarded { raw_text, error },
        }
    }
}

/// Result of the syntax and semantics filter.
#[derive(Debug, Default)]
pub struct CheckOutcome {
    pub accepted: Vec<Property>,
    pub rejected: Vec<Rejection>,
    pub verify_calls: usize,
}

/// Filters candidates: illegal ones get correction rounds (when the proposer
/// supports it), preconditions are kept unverified, everything else must
/// verify under the context plus what was accepted, rechecked to a fixpoint.
#[allow(clippy::too_many_arguments)]
pub fn check_candidates(
    cands: Vec<Proposal>,
    prog: &Program,
    unit: &VUnit,
    context: &[Property],
    verdict: &Verdict,
    verifier: &Verifier,
    proposer: &mut dyn Proposer,
    fix_attempts: usize,
    next_id: &mut dyn FnMut() -> String,
) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    let mut legal: Vec<CandidateSpec> = Vec::new();
    for cand in cands {
        let req = Request { prog, unit, context, verdict };
        let spec = match correction_loop(proposer, &req, cand, fix_attempts) {
            Corrected::Fixed(c) => Some(c),
            Corrected::Discarded { raw_text, error } => {
                out.rejected.push(Rejection { candidate: raw_text, reason: error });
                None
            }
        };
        let Some(mut spec) = spec else { continue };
        let dup = context.iter().chain(legal.iter().map(|c| &c.property)).any(|q| {
            q.same_content(&spec.property)
                || (q.kind == PropKind::Precondition
                    && spec.property.kind == PropKind::Precondition
                    && q.at == spec.property.at
                    && spec.property.predicate.conjuncts().iter().all(|c| q.predicate.conjuncts().contains(c)))
        });
        if dup {
            out.rejected.push(Rejection { candidate: spec.raw_text, reason: "duplicate".into() });
            continue;
        }
        spec.property.id = next_id();
        spec.property.origin = Origin::Synthesized;
        legal.push(spec);
    }
    // Host candidates first, then callee candidates, each in proposal order.
    legal.sort_by_key(|c| c.stage == Stage::Callee);
    let mut pending: Vec<CandidateSpec> = Vec::new();
    for c in legal {
        if c.property.kind == PropKind::Precondition {
            out.accepted.push(c.property);
        } else {
            pending.push(c);
        }
    }
    loop {
        let mut progress = false;
        let mut rest = Vec::new();
        for c in pending {
            let mut hyps: Vec<Property> = context.to_vec();
            hyps.extend(out.accepted.iter().cloned());
            out.verify_calls += 1;
            if verifier.verify(prog, &hyps, &c.property).is_true() {
                out.accepted.push(c.property);
                progress = true;
            } else {
                rest.push(c);
            }
        }
        pending = rest;
        if !progress || pending.is_empty() {
            break;
        }
    }
    for c in pending {
        out.rejected.push(Rejection { candidate: c.raw_text, reason: "unknown under the current context".into() });
    }
    assert!(
        out.accepted.iter().all(|p| p.kind != PropKind::Precondition || p.func == unit.host),
        "callee precondition accepted"
    );
    out
}

/// The orchestrator state for one run.
pub struct Synthesizer<'a> {
    prog: &'a Program,
    graph: &'a CallGraph,
    cfg: &'a SynthesisConfig,
    verifier: Verifier,
    ledger: PropertyLedger,
    /// One canonical precondition per function, mirrored in S and V or H.
    preconditions: BTreeMap<String, Property>,
    next: usize,
}

impl<'a> Synthesizer<'a> {
    pub fn new(prog: &'a Program, graph: &'a CallGraph, a: &[Property], cfg: &'a SynthesisConfig) -> Self {
        let verifier = Verifier { backend: cfg.backend.clone(), dump_dir: cfg.dump_dir.clone() };
        let ledger = PropertyLedger { a: a.to_vec(), ..Default::default() };
        Synthesizer { prog, graph, cfg, verifier, ledger, preconditions: BTreeMap::new(), next: 0 }
    }

    fn hyps(&self, extra: &[Property]) -> Vec<Property> {
        let mut h: Vec<Property> = self.ledger.v.iter().chain(self.ledger.h.iter()).cloned().collect();
        h.extend(extra.iter().cloned());
        h
    }

    fn verify(&self, extra: &[Property], q: &Property) -> Verdict {
        self.verifier.verify(self.prog, &self.hyps(extra), q)
    }

    pub fn run(mut self, mut queue: VUnitQueue, proposer: &mut dyn Proposer) -> SynthesisOutcome {
        let mut timeline = Vec::new();
        while let Some(unit) = queue.next_unit() {
            let rec = self.process(&unit, &mut queue, proposer);
            timeline.push(rec);
            debug_assert!(self.partition_ok());
        }
        SynthesisOutcome { ledger: self.ledger, timeline }
    }

    /// `A ∪ S = V ∪ H` over the units processed so far.
    fn partition_ok(&self) -> bool {
        let mut l = self.ledger.clone();
        let done: BTreeSet<String> = l.v.iter().chain(l.h.iter()).map(|p| p.id.clone()).collect();
        l.a.retain(|p| done.contains(&p.id));
        l.check_partition().is_ok()
    }

    fn process(&mut self, unit: &VUnit, queue: &mut VUnitQueue, proposer: &mut dyn Proposer) -> UnitRecord {
        let alpha = unit.guard.clone();
        let mut s_prime: Vec<Property> = Vec::new();
        let mut rec = UnitRecord {
            unit: unit.index,
            guard: alpha.id.clone(),
            host: unit.host.clone(),
            predicate: alpha.predicate.to_string(),
            at: alpha.at.clone(),
            kind: alpha.kind.tag(),
            iterations: Vec::new(),
            verdict: Status::Unknown,
            verifier_calls: 0,
            candidate_checks: 0,
            accepted: Vec::new(),
        };
        let mut fallback = TemplateProposer::new();
        for _ in 0..self.cfg.iter.max(1) {
            let verdict = self.verify(&s_prime, &alpha);
            rec.verifier_calls += 1;
            let mut it = IterationRecord {
                status: Some(verdict.status),
                obligations: verdict.feedback.len(),
                proposer: proposer.name().to_string(),
                ..Default::default()
            };
            if verdict.is_true() {
                rec.iterations.push(it);
                break;
            }
            let context = self.hyps(&s_prime);
            let req = Request { prog: self.prog, unit, context: &context, verdict: &verdict };
            let mut cands = Vec::new();
            let mut degraded = false;
            for stage in [Stage::Host, Stage::Callee] {
                if stage == Stage::Callee && unit.context.len() < 2 {
                    continue;
                }
                match proposer.propose(stage, &req) {
                    Ok(ps) => cands.extend(ps),
                    Err(_) => {
                        degraded = true;
                        cands.extend(fallback.propose(stage, &req).unwrap_or_default());
                    }
                }
            }
            if degraded {
                it.proposer = format!("{} (template fallback)", proposer.name());
            }
            it.proposed = cands
                .iter()
                .map(|c| match c {
                    Proposal::Parsed(c) => c.raw_text.clone(),
                    Proposal::Illegal { raw_text, .. } => raw_text.clone(),
                })
                .collect();
            let next = &mut self.next;
            let mut next_id = || {
                *next += 1;
                format!("s{next}")
            };
            let out = check_candidates(
                cands,
                self.prog,
                unit,
                &context,
                &verdict,
                &self.verifier,
                proposer,
                self.cfg.syntax_fix_attempts,
                &mut next_id,
            );
            rec.candidate_checks += out.verify_calls;
            it.accepted = out.accepted.iter().map(|p| p.to_string()).collect();
            it.rejected = out.rejected;
            s_prime.extend(out.accepted);
            rec.iterations.push(it);
        }
        let final_verdict = self.verify(&s_prime, &alpha);
        rec.verifier_calls += 1;
        rec.verdict = final_verdict.status;
        let is_site_check = matches!(unit.role, SiteRole::PreconditionCheck { .. });
        if is_site_check {
            self.ledger.s.push(alpha.clone());
        }
        if final_verdict.is_true() {
            let (pre, rest) = extract_preconditions(&s_prime);
            rec.accepted = s_prime.iter().map(|p| p.to_string()).collect();
            self.ledger.s.extend(rest.iter().cloned());
            self.ledger.v.push(alpha);
            self.ledger.v.extend(rest);
            if !pre.is_empty() {
                self.merge_precondition(&unit.host, &pre, queue);
            }
        } else {
            self.ledger.h.push(alpha);
        }
        rec
    }

    fn merge_precondition(&mut self, f: &str, pre: &[Property], queue: &mut VUnitQueue) {
        let old = self.preconditions.get(f).cloned();
        let pred = Pred::conj(old.iter().chain(pre.iter()).map(|p| p.predicate.clone()));
        let id = format!("pre_{f}");
        let merged = Property::new(&id, PropKind::Precondition, Location::Entry(f.to_string()), pred, Origin::Synthesized, f);
        for set in [&mut self.ledger.s, &mut self.ledger.v, &mut self.ledger.h] {
            set.retain(|p| p.id != id);
        }
        self.ledger.s.push(merged.clone());
        let has_callers = !self.graph.callers(f).is_empty();
        let fresh = queue.update_queue(self.prog, f, std::slice::from_ref(&merged)).is_ok();
        if has_callers && fresh {
            self.ledger.v.push(merged.clone());
        } else {
            self.ledger.h.push(merged.clone());
        }
        self.preconditions.insert(f.to_string(), merged);
    }
}

/// Runs the synthesis loop over `queue`.
pub fn synthesize(
    queue: VUnitQueue,
    prog: &Program,
    graph: &CallGraph,
    a: &[Property],
    cfg: &SynthesisConfig,
    proposer: &mut dyn Proposer,
) -> SynthesisOutcome {
    Synthesizer::new(prog, graph, a, cfg).run(queue, proposer)
}
