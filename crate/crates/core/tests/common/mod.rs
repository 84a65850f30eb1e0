#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use specforge::lang::*;
use specforge::spec::*;
use specforge::synth::*;
use specforge::verifier::verify;
use std::collections::BTreeSet;

pub fn corpus(name: &str) -> String {
    let p = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

/// `p ⇒ q` discharged by the verifier: a one-function program whose
/// parameters are the free identifiers, `p` required, `q` asserted.
pub fn entails(p: &Pred, q: &Pred) -> bool {
    let r = Term::var("result_");
    let (p, q) = (p.subst_result(&r), q.subst_result(&r));
    let mut vars: BTreeSet<String> = p.idents();
    vars.extend(q.idents());
    vars.retain(|v| v != "INT_MIN" && v != "INT_MAX");
    let params: Vec<String> = vars.iter().map(|v| format!("int {v}")).collect();
    let src = format!("int chk({}) {{\n  return 0;\n}}\n", params.join(", "));
    let prog = parse_program(&src).unwrap();
    let pre = Property::new("h", PropKind::Precondition, Location::Entry("chk".into()), p, Origin::Manual, "chk");
    let goal = Property::new("g", PropKind::PlainAssert, Location::line(2, 0), q, Origin::Manual, "chk");
    verify(&prog, &[pre], &goal).is_true()
}

pub fn equivalent(p: &Pred, q: &Pred) -> bool {
    entails(p, q) && entails(q, p)
}

pub fn pred(s: &str) -> Pred {
    parse_predicate(s).unwrap()
}

/// Proposes the template candidates plus two that must never survive.
pub struct Poisoned {
    pub inner: TemplateProposer,
    pub injected: usize,
}

impl Poisoned {
    pub fn new() -> Self {
        Poisoned { inner: TemplateProposer::new(), injected: 0 }
    }
}

impl Proposer for Poisoned {
    fn name(&self) -> &'static str {
        "poisoned"
    }

    fn propose(&mut self, stage: Stage, req: &Request<'_>) -> Result<Vec<Proposal>, ProposerUnavailable> {
        let mut out = self.inner.propose(stage, req)?;
        let host = &req.unit.host;
        let prog = req.prog;
        let mk = |kind: PropKind, at: Location, p: &str, func: &str| {
            let property = Property::new("x", kind, at, pred(p), Origin::Synthesized, func);
            Proposal::Parsed(CandidateSpec { raw_text: property.annotation(), property, stage })
        };
        match stage {
            Stage::Host => {
                let f = prog.function(host).unwrap();
                let mut loops = Vec::new();
                f.walk(&mut |s| {
                    if matches!(s.kind, StmtKind::While { .. }) {
                        loops.push(s.loc.clone());
                    }
                });
                for l in loops {
                    out.push(mk(PropKind::LoopInvariant, l, "\\false", host));
                    self.injected += 1;
                }
            }
            Stage::Callee => {
                for c in req.unit.context.iter().skip(1) {
                    out.push(mk(PropKind::Postcondition, Location::Exit(c.clone()), "\\result != \\result", c));
                    out.push(mk(PropKind::Postcondition, Location::Exit(c.clone()), "\\result == 12345", c));
                    self.injected += 2;
                }
            }
        }
        Ok(out)
    }
}

pub fn is_poison(q: &Property) -> bool {
    q.predicate == Pred::Bool(false)
        || q.predicate.to_string() == "\\result != \\result"
        || q.predicate.to_string() == "\\result == 12345"
}


/// A random call DAG over `f0..fn`: each function may call earlier ones and
/// carries a few divisions for the analyzer to flag.
pub fn dag_source(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..7);
    let mut src = String::new();
    for i in 0..n {
        src.push_str(&format!("int f{i}(int x) {{\n"));
        let stmts = rng.random_range(1..5);
        for k in 0..stmts {
            if i > 0 && rng.random_bool(0.5) {
                let j = rng.random_range(0..i);
                src.push_str(&format!("  int r{k} = f{j}(x - {k});\n"));
            } else {
                src.push_str(&format!("  int y{k} = {k} / (x - {});\n", rng.random_range(0..3)));
            }
        }
        src.push_str("  return 0;\n}\n\n");
    }
    src
}

/// Small random facts over scalar variables in scope.
pub fn random_facts(prog: &Program, rng: &mut ChaCha8Rng, n: usize) -> Vec<Property> {
    let locs: Vec<Location> = prog.locations().cloned().collect();
    let mut out = Vec::new();
    for k in 0..n * 4 {
        if out.len() == n {
            break;
        }
        let at = locs[rng.random_range(0..locs.len())].clone();
        if matches!(at, Location::Exit(_)) {
            continue;
        }
        let info = prog.loc_info(&at).unwrap();
        let ints: Vec<&str> =
            info.scope.iter().filter(|(_, k)| *k == VarKind::Int).map(|(v, _)| v.as_str()).collect();
        if ints.is_empty() {
            continue;
        }
        let x = ints[rng.random_range(0..ints.len())];
        let c: i32 = [-1, 0, 1, 2, 5][rng.random_range(0..5)];
        let op = ["<=", ">=", "!=", "<", "=="][rng.random_range(0..5)];
        let pred = parse_predicate(&format!("{x} {op} {c}")).unwrap();
        let kind = match (&at, info.is_loop) {
            (Location::Entry(_), _) => PropKind::Precondition,
            (_, true) => PropKind::LoopInvariant,
            _ => PropKind::PlainAssert,
        };
        out.push(Property::new(format!("r{k}"), kind, at, pred, Origin::Manual, &info.func));
    }
    out
}
