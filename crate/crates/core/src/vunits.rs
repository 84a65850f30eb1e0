//! Verification units: one per guard assertion, ordered bottom-up.

use crate::analysis::CallGraph;
use crate::lang::{Expr, Location, ParamKind, Program, StmtKind};
use crate::spec::{Origin, Pred, PropKind, Property, Term};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "role")]
pub enum SiteRole {
    RteCheck,
    PreconditionCheck { callee: String, call_site: Location },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VUnit {
    /// Construction index; also the final tie-breaker of the order.
    pub index: usize,
    pub guard: Property,
    pub host: String,
    /// The host followed by its direct callees.
    pub context: Vec<String>,
    #[serde(flatten)]
    pub role: SiteRole,
}

/// `(rank of host, line, per-line index, construction index)`.
pub type SortKey = (usize, u32, u32, usize);

pub fn sort_key(u: &VUnit, ranks: &HashMap<String, usize>) -> SortKey {
    let r = ranks.get(&u.host).copied().unwrap_or(0);
    (r, u.guard.at.file_line(), u.guard.at.index(), u.index)
}

pub fn compare_vunits(a: &VUnit, b: &VUnit, g: &CallGraph) -> Ordering {
    let ranks = g.ranks();
    sort_key(a, &ranks).cmp(&sort_key(b, &ranks))
}

/// Substitutes a call's actual arguments for the callee's parameters.
/// `None` when an array argument is not a plain array name.
pub fn instantiate_at_call(prog: &Program, site: &Location, pred: &Pred) -> Option<Pred> {
    let StmtKind::Call { callee, args, .. } = &prog.stmt_at(site)?.kind else { return None };
    let f = prog.function(callee)?;
    let mut ints: HashMap<&str, Term> = HashMap::new();
    let mut arrays: HashMap<&str, String> = HashMap::new();
    for (p, a) in f.params.iter().zip(args) {
        match (&p.kind, a) {
            (ParamKind::Int, e) => {
                ints.insert(&p.name, Term::from_expr(e));
            }
            (ParamKind::Array { .. }, Expr::Var(v)) => {
                arrays.insert(&p.name, v.clone());
            }
            _ => return None,
        }
    }
    let p = pred.subst_vars(&|v| ints.get(v).cloned());
    Some(p.rename_arrays(&|a| arrays.get(a).cloned()))
}

/// One unit per RTE assertion, then one placeholder unit per call site.
pub fn construct_vunits(prog: &Program, a: &[Property], g: &CallGraph) -> Vec<VUnit> {
    let context = |f: &str| {
        let mut c = vec![f.to_string()];
        c.extend(g.callees(f).into_iter().map(String::from));
        c
    };
    let mut out: Vec<VUnit> = a
        .iter()
        .map(|p| VUnit { index: 0, guard: p.clone(), host: p.func.clone(), context: context(&p.func), role: SiteRole::RteCheck })
        .collect();
    let mut n = 0;
    for cs in &g.call_sites {
        for site in &cs.sites {
            n += 1;
            let guard = Property::new(
                format!("c{n}"),
                PropKind::CallSiteCheck { callee: cs.callee.clone() },
                site.clone(),
                Pred::tt(),
                Origin::Placeholder,
                &cs.caller,
            );
            debug_assert!(prog.stmt_at(site).is_some());
            out.push(VUnit {
                index: 0,
                guard,
                host: cs.caller.clone(),
                context: context(&cs.caller),
                role: SiteRole::PreconditionCheck { callee: cs.callee.clone(), call_site: site.clone() },
            });
        }
    }
    for (i, u) in out.iter_mut().enumerate() {
        u.index = i;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unit {unit} targeting `{callee}` was already processed")]
pub struct StaleUpdateError {
    pub unit: usize,
    pub callee: String,
}

#[derive(Debug, Clone)]
pub struct VUnitQueue {
    units: Vec<VUnit>,
    cursor: usize,
    ranks: HashMap<String, usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanEntry<'a> {
    pub position: usize,
    #[serde(flatten)]
    pub unit: &'a VUnit,
    pub key: SortKey,
}

impl VUnitQueue {
    pub fn new(mut units: Vec<VUnit>, g: &CallGraph) -> Self {
        let ranks = g.ranks();
        units.sort_by_key(|u| sort_key(u, &ranks));
        VUnitQueue { units, cursor: 0, ranks }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn units(&self) -> &[VUnit] {
        &self.units
    }

    /// Pops the next unprocessed unit.
    pub fn next_unit(&mut self) -> Option<VUnit> {
        let u = self.units.get(self.cursor).cloned()?;
        self.cursor += 1;
        Some(u)
    }

    pub fn key(&self, u: &VUnit) -> SortKey {
        sort_key(u, &self.ranks)
    }

    pub fn plan(&self) -> Vec<PlanEntry<'_>> {
        self.units
            .iter()
            .enumerate()
            .map(|(position, unit)| PlanEntry { position, unit, key: self.key(unit) })
            .collect()
    }

    /// Re-targets every pending call-site unit of `callee` at the conjunction
    /// of `pre`, instantiated with the call's actual arguments.
    pub fn update_queue(&mut self, prog: &Program, callee: &str, pre: &[Property]) -> Result<(), StaleUpdateError> {
        if pre.is_empty() {
            return Ok(());
        }
        let conj = Pred::conj(pre.iter().map(|p| p.predicate.clone()));
        for (i, u) in self.units.iter_mut().enumerate() {
            let SiteRole::PreconditionCheck { callee: c, call_site } = &u.role else { continue };
            if c != callee {
                continue;
            }
            if i < self.cursor {
                return Err(StaleUpdateError { unit: u.index, callee: callee.to_string() });
            }
            // A non-instantiable guard stays false so it can never verify.
            u.guard.predicate = instantiate_at_call(prog, call_site, &conj).unwrap_or(Pred::Bool(false));
            u.guard.origin = Origin::Synthesized;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_call_graph, infer_rte_assertions};
    use crate::lang::parse_program;
    use crate::spec::parse_predicate;

    const ABS: &str = "int abs(int x) {\n  if (x < 0) {\n    return -x;\n  }\n  return x;\n}\n\nint main() {\n  int a = abs(-42);\n  int b = abs(INT_MIN);\n  return 0;\n}\n";

    fn queue(src: &str) -> (Program, VUnitQueue) {
        let p = parse_program(src).unwrap();
        let g = build_call_graph(&p);
        let a = infer_rte_assertions(&p);
        let q = VUnitQueue::new(construct_vunits(&p, &a, &g), &g);
        (p, q)
    }

    #[test]
    fn abs_units_and_update() {
        let (p, mut q) = queue(ABS);
        assert_eq!(q.len(), 3);
        assert_eq!(q.units()[0].role, SiteRole::RteCheck);
        q.next_unit();
        let pre = Property::new(
            "p2",
            PropKind::Precondition,
            Location::Entry("abs".into()),
            parse_predicate("INT_MIN < x").unwrap(),
            Origin::Synthesized,
            "abs",
        );
        q.update_queue(&p, "abs", std::slice::from_ref(&pre)).unwrap();
        let texts: Vec<String> = q.units()[1..].iter().map(|u| u.guard.predicate.to_string()).collect();
        assert_eq!(texts, vec!["INT_MIN < -42", "INT_MIN < INT_MIN"]);
        q.next_unit();
        assert!(q.update_queue(&p, "abs", &[pre]).is_err());
        assert_eq!(q.len(), 3);
    }

    #[test]
    fn empty_update_is_noop() {
        let (p, mut q) = queue(ABS);
        let before = q.units().to_vec();
        q.update_queue(&p, "abs", &[]).unwrap();
        assert_eq!(q.units(), &before[..]);
    }

    #[test]
    fn no_risky_ops_no_units() {
        let (_, q) = queue("int f() {\n  return 0;\n}\n");
        assert!(q.is_empty());
    }
}
