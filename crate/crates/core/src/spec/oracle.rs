//! Brute-force oracles over enumerated traces: satisfaction, validity
//! under hypotheses, and runtime-error freeness.

use super::eval::{eval_predicate, Binding};
use super::property::{PropKind, Property};
use super::SpecError;
use crate::lang::{InputDomain, Location, Program, Terminal, Trace};
use std::collections::{HashMap, HashSet};

/// Oracle parameters: entry function, its input domain and the step budget.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub entry: Option<String>,
    pub domain: InputDomain,
    pub max_steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { entry: None, domain: InputDomain::default(), max_steps: 10_000 }
    }
}

/// Whether the last configuration of the prefix `steps[..=idx]` is at `p.at`.
pub fn reaches_at(t: &Trace, idx: usize, p: &Property) -> bool {
    t.steps.get(idx).is_some_and(|c| c.next == p.at)
}

/// `τ` reaches `p`: its last configuration is about to execute `p.at`.
pub fn trace_reaches(t: &Trace, p: &Property) -> bool {
    t.steps.last().is_some_and(|c| c.next == p.at)
}

/// `τ` satisfies `p`: it reaches `p` and the predicate holds there.
pub fn trace_satisfies(prog: &Program, t: &Trace, p: &Property) -> bool {
    let n = t.steps.len();
    n > 0 && trace_reaches(t, p) && holds_at(prog, t, n - 1, p)
}

/// Predicate of `p` evaluated at step `idx` (which must be at `p.at`).
pub fn holds_at(prog: &Program, t: &Trace, idx: usize, p: &Property) -> bool {
    let c = &t.steps[idx];
    match &p.kind {
        PropKind::LoopAssigns(xs) => loop_assigns_holds(prog, t, idx, &p.at, xs),
        _ => {
            let b = Binding { result: c.result, old: Some(c.entry_state()) };
            eval_predicate(&p.predicate, &c.state, b).unwrap_or(false)
        }
    }
}

fn loop_assigns_holds(
    prog: &Program,
    t: &Trace,
    idx: usize,
    at: &Location,
    xs: &std::collections::BTreeSet<String>,
) -> bool {
    let body: HashSet<Location> = prog.loop_body_locs(at).into_iter().collect();
    let frame = t.steps[idx].frame;
    // Walk back over visits of this loop in the same frame until the visit
    // that entered the loop from outside.
    let mut start = idx;
    let mut j = idx;
    loop {
        let prev = (0..j).rev().find(|&k| t.steps[k].frame == frame);
        match prev {
            Some(k) if body.contains(&t.steps[k].next) || t.steps[k].next == *at => {
                if t.steps[k].next == *at {
                    start = k;
                }
                j = k;
            }
            _ => break,
        }
    }
    if start == idx {
        return true;
    }
    let Some(info) = prog.loc_info(at) else { return false };
    let (a, b) = (&t.steps[start].state, &t.steps[idx].state);
    info.scope.iter().filter(|(n, _)| !xs.contains(n)).all(|(n, _)| {
        a.scalar(n) == b.scalar(n) && a.array(n) == b.array(n)
    })
}

/// Enumerated traces with a per-location index of visits.
pub struct TraceSet<'p> {
    pub prog: &'p Program,
    pub traces: Vec<Trace>,
    visits: Vec<HashMap<Location, Vec<usize>>>,
}

impl<'p> TraceSet<'p> {
    pub fn new(prog: &'p Program, cfg: &OracleConfig) -> Result<Self, SpecError> {
        let traces = prog
            .enumerate_traces(cfg.entry.as_deref(), &cfg.domain, cfg.max_steps)
            .map_err(|e| SpecError::Oracle(e.to_string()))?;
        let visits = traces
            .iter()
            .map(|t| {
                let mut m: HashMap<Location, Vec<usize>> = HashMap::new();
                for (i, c) in t.steps.iter().enumerate() {
                    m.entry(c.next.clone()).or_default().push(i);
                }
                m
            })
            .collect();
        Ok(TraceSet { prog, traces, visits })
    }

    pub fn truncated(&self) -> usize {
        self.traces.iter().filter(|t| t.terminal == Terminal::BudgetExceeded).count()
    }

    /// First step index at which `h` is reached and violated.
    fn first_violation(&self, ti: usize, h: &Property) -> usize {
        let t = &self.traces[ti];
        self.visits[ti]
            .get(&h.at)
            .and_then(|vs| vs.iter().copied().find(|&i| !holds_at(self.prog, t, i, h)))
            .unwrap_or(usize::MAX)
    }

    /// Index of a trace (and step) that reaches `q` with every hypothesis
    /// holding on all proper prefixes, yet violates `q`.
    pub fn counterexample(&self, hyps: &[&Property], q: &Property) -> Option<(usize, usize)> {
        for ti in 0..self.traces.len() {
            let Some(vs) = self.visits[ti].get(&q.at) else { continue };
            let cutoff = hyps.iter().map(|h| self.first_violation(ti, h)).min().unwrap_or(usize::MAX);
            for &j in vs {
                if j > cutoff {
                    break;
                }
                if !holds_at(self.prog, &self.traces[ti], j, q) {
                    return Some((ti, j));
                }
            }
        }
        None
    }

    /// `hyps ⊨ q` over the enumerated traces.
    pub fn valid_under(&self, hyps: &[&Property], q: &Property) -> Result<bool, SpecError> {
        if self.counterexample(hyps, q).is_some() {
            return Ok(false);
        }
        match self.truncated() {
            0 => Ok(true),
            n => Err(SpecError::OracleInconclusive { truncated: n }),
        }
    }
}

pub fn oracle_valid_under(
    prog: &Program,
    hyps: &[Property],
    q: &Property,
    cfg: &OracleConfig,
) -> Result<bool, SpecError> {
    let ts = TraceSet::new(prog, cfg)?;
    let hs: Vec<&Property> = hyps.iter().collect();
    ts.valid_under(&hs, q)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Freeness {
    Free,
    FreeUnderH,
    Counterexample { property: String, trace: usize, step: usize },
}

/// Checks mutual consistency of `A ∪ S`: each property valid assuming all
/// others. `Free` when it holds for all, `FreeUnderH` when it holds for all
/// outside `h`.
pub fn check_rte_freeness(
    prog: &Program,
    a: &[Property],
    s: &[Property],
    h: &[Property],
    cfg: &OracleConfig,
) -> Result<Freeness, SpecError> {
    let all: Vec<&Property> = a.iter().chain(s.iter()).collect();
    if all.is_empty() {
        return Ok(Freeness::Free);
    }
    let ts = TraceSet::new(prog, cfg)?;
    let h_ids: HashSet<&str> = h.iter().map(|p| p.id.as_str()).collect();
    let mut failed_in_h = false;
    let mut witness = None;
    for (i, p) in all.iter().enumerate() {
        let others: Vec<&Property> =
            all.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| *q).collect();
        if let Some((trace, step)) = ts.counterexample(&others, p) {
            if h_ids.contains(p.id.as_str()) {
                failed_in_h = true;
            } else if witness.is_none() {
                witness = Some(Freeness::Counterexample { property: p.id.clone(), trace, step });
            }
        }
    }
    if let Some(w) = witness {
        return Ok(w);
    }
    if ts.truncated() > 0 {
        return Err(SpecError::OracleInconclusive { truncated: ts.truncated() });
    }
    Ok(if failed_in_h { Freeness::FreeUnderH } else { Freeness::Free })
}
