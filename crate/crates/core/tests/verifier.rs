mod common;

use common::random_facts;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specforge::analysis::infer_rte_assertions;
use specforge::gen::{random_program, GenConfig};
use specforge::lang::*;
use specforge::spec::*;
use specforge::verifier::logic::sym;
use specforge::verifier::*;
use std::collections::BTreeSet;
use std::time::Duration;

fn corpus(name: &str) -> String {
    let p = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

fn annotated(name: &str) -> (Program, Vec<Property>) {
    let src = corpus(&format!("annotated/{name}"));
    let prog = parse_program(&src).unwrap();
    let props = parse_annotations(&src, &prog).unwrap();
    (prog, props)
}

fn by_id(ps: &[Property], id: &str) -> Property {
    ps.iter().find(|p| p.id == id).cloned().unwrap_or_else(|| panic!("no property {id}"))
}

fn loop_assigns(ps: &[Property]) -> Property {
    ps.iter().find(|p| matches!(p.kind, PropKind::LoopAssigns(_))).cloned().unwrap()
}

fn search_obligation() -> ProofObligation {
    let (prog, ps) = annotated("search.mc");
    let v = verify(&prog, &[by_id(&ps, "p8")], &by_id(&ps, "p7"));
    assert_eq!(v.status, Status::Unknown);
    assert_eq!(v.feedback.len(), 1);
    v.feedback[0].clone()
}

#[test]
fn search_feedback_has_labeled_shape() {
    let ob = search_obligation();
    let hs: Vec<(String, String)> = ob.hypotheses.iter().map(|(l, f)| (l.clone(), f.to_string())).collect();
    assert_eq!(
        hs,
        vec![
            ("P1".to_string(), "\\valid_read(arr_0, 0, len_0 - 1)".to_string()),
            ("P2".to_string(), "0 <= i_1 && i_1 < len_1".to_string()),
        ]
    );
    assert_eq!(ob.goal.to_string(), "\\valid_read(arr_1, i_1, i_1)");
    assert_eq!(ob.target, "p7");
    assert_eq!(ob.at, Location::line(7, 0));
    let names: BTreeSet<&str> = ob.declarations.iter().map(|d| d.name.as_str()).collect();
    assert!(names.is_superset(&["arr_0", "arr_1", "len_0", "len_1", "i_1"].into()));
}

#[test]
fn search_without_invariant_warns() {
    let (prog, ps) = annotated("search.mc");
    let v = verify(&prog, &[by_id(&ps, "p8")], &by_id(&ps, "p7"));
    assert!(v.warnings.iter().any(|w| w.contains("no loop invariant")));
}

#[test]
fn loop_assigns_collapses_the_frame() {
    let (prog, ps) = annotated("search.mc");
    let la = loop_assigns(&ps);
    let v = verify(&prog, &[by_id(&ps, "p8"), la.clone()], &by_id(&ps, "p7"));
    assert_eq!(v.status, Status::True, "{}", render_feedback(&v));
    assert!(v.feedback.is_empty());
    // The clause itself is covered: `i` is the only variable the loop writes.
    assert!(verify(&prog, &[by_id(&ps, "p8")], &la).is_true());
}

#[test]
fn strengthened_antecedent_discharges() {
    let ob = search_obligation();
    assert_eq!(discharge(&ob, &Backend::Internal), Discharge::Unknown);
    let p3 = LForm::and(vec![
        LForm::ArrEq(LArr::Sym("arr_0".into()), LArr::Sym("arr_1".into())),
        LForm::cmp(Cmp::Eq, sym("len_0"), sym("len_1")),
    ]);
    let strong = ob.with_hypothesis(p3);
    assert_eq!(strong.hypotheses.last().unwrap().0, "P3");
    assert_eq!(discharge(&strong, &Backend::Internal), Discharge::Valid);
}

#[test]
fn abs_precondition_entails_negation_guard() {
    let (prog, ps) = annotated("abs.mc");
    assert!(verify(&prog, &[by_id(&ps, "p2")], &by_id(&ps, "p1")).is_true());
    let v = verify(&prog, &[], &by_id(&ps, "p1"));
    assert_eq!(v.status, Status::Unknown);
    assert!(!v.feedback.is_empty());
}

#[test]
fn id_postcondition_entails_division_guard() {
    let (prog, ps) = annotated("id.mc");
    assert!(verify(&prog, &[by_id(&ps, "p5")], &by_id(&ps, "p4")).is_true());
    assert!(!verify(&prog, &[], &by_id(&ps, "p4")).is_true());
    // The postcondition itself holds for the body of `id`.
    assert!(verify(&prog, &[], &by_id(&ps, "p5")).is_true());
}

#[test]
fn abs_precondition_fails_at_the_int_min_call() {
    let (prog, ps) = annotated("abs.mc");
    let v = verify(&prog, &[], &by_id(&ps, "p2"));
    assert_eq!(v.status, Status::Unknown);
    assert!(v.feedback.iter().all(|o| o.reason.contains("call site")));
}

#[test]
fn assignment_is_substitution() {
    let src = "int f(int x) {\n  int y = x;\n  //@ assert q: y == x;\n  return y;\n}\n";
    let prog = parse_program(src).unwrap();
    let ps = parse_annotations(src, &prog).unwrap();
    let wp = wp_obligations(&prog, &[], &ps[0]).unwrap();
    assert_eq!(wp.obligations.len(), 1);
    assert_eq!(wp.obligations[0].goal.to_string(), "x_0 == x_0");
    assert!(verify(&prog, &[], &ps[0]).is_true());
}

#[test]
fn hypothesis_equal_to_goal_is_valid() {
    let decls = vec![Decl { name: "x".into(), sort: Sort::Int32 }];
    let g = LForm::cmp(Cmp::Lt, LTerm::Int(i32::MIN as i128), sym("x"));
    assert!(prover::prove(&decls, std::slice::from_ref(&g), &g));
    assert!(!prover::prove(&decls, &[], &g));
}

#[test]
fn rendering_is_labeled_and_stable() {
    let ob = search_obligation();
    let text = render_obligation(&ob);
    for label in ["P1:", "P2:", "Q:"] {
        assert!(text.lines().any(|l| l.trim_start().starts_with(label)), "{label} missing in\n{text}");
    }
    assert_eq!(text, render_obligation(&search_obligation()));
    let json = serde_json::to_value(&ob).unwrap();
    assert_eq!(json["goal"], "\\valid_read(arr_1, i_1, i_1)");
    assert_eq!(json["hypotheses"][0]["label"], "P1");
}

#[test]
fn uncovered_loop_write_is_reported() {
    let (prog, ps) = annotated("search.mc");
    let la = loop_assigns(&ps);
    let nothing = Property::new("la0", PropKind::LoopAssigns(BTreeSet::new()), la.at.clone(), Pred::tt(), Origin::Manual, "search");
    assert_eq!(uncovered_writes(&prog, &la.at, &BTreeSet::new()), vec!["i".to_string()]);
    let v = verify(&prog, &[by_id(&ps, "p8")], &nothing);
    assert_eq!(v.status, Status::Unknown);
    assert!(v.feedback[0].reason.contains("assigns coverage"), "{}", v.feedback[0].reason);
}

#[test]
fn spec_errors_become_diagnostics() {
    let (prog, ps) = annotated("abs.mc");
    let mut bad = by_id(&ps, "p1");
    bad.predicate = parse_predicate("INT_MIN < nosuch").unwrap();
    let v = verify(&prog, &[], &bad);
    assert_eq!(v.status, Status::Unknown);
    assert_eq!(v.feedback.len(), 1);
    assert!(v.feedback[0].reason.contains("nosuch"), "{}", v.feedback[0].reason);
}

#[test]
fn emitted_obligations_are_dumped() {
    let dir = tempfile::tempdir().unwrap();
    let (prog, ps) = annotated("search.mc");
    let v = Verifier { backend: Backend::Internal, dump_dir: Some(dir.path().to_path_buf()) };
    v.verify(&prog, &[by_id(&ps, "p8")], &by_id(&ps, "p7"));
    assert!(dir.path().join("p7.1.txt").exists());
    assert!(dir.path().join("p7.1.smt2").exists());
}

// --- SMT-LIB surface -------------------------------------------------------

fn trivial() -> ProofObligation {
    ProofObligation {
        name: "t.1".into(),
        target: "t".into(),
        reason: "goal".into(),
        hypotheses: vec![],
        declarations: vec![],
        goal: LForm::tt(),
        at: Location::Entry("f".into()),
    }
}

fn fake_solver(dir: &std::path::Path, body: &str) -> SolverConfig {
    let path = dir.join("solver.sh");
    std::fs::write(&path, format!("#!/bin/sh\ncat > /dev/null\n{body}\n")).unwrap();
    SolverConfig::new(&format!("sh {}", path.display()), Duration::from_millis(1500))
}

#[test]
fn true_goal_negates_to_assert_false() {
    let text = emit_smtlib(&trivial());
    assert!(text.contains("(assert false)"), "{text}");
    assert!(text.contains("(check-sat)"));
}

#[test]
fn smt_answers_map_to_discharge() {
    let dir = tempfile::tempdir().unwrap();
    let ob = trivial();
    let unsat = fake_solver(dir.path(), "echo unsat");
    assert_eq!(discharge(&ob, &Backend::Smt(unsat)), Discharge::Valid);
    for body in ["echo sat", "echo unknown", "echo unsat; exit 3", "sleep 5; echo unsat", "echo garbage"] {
        let cfg = fake_solver(dir.path(), body);
        assert_eq!(discharge(&ob, &Backend::Smt(cfg)), Discharge::Unknown, "{body}");
    }
    let missing = SolverConfig::new("/nonexistent/solver", Duration::from_secs(1));
    assert!(matches!(run_solver(&missing, "(check-sat)"), SolverAnswer::Crash(_)));
    assert_eq!(discharge(&ob, &Backend::Smt(missing)), Discharge::Unknown);
}

#[test]
fn portfolio_uses_internal_prover_first() {
    let missing = SolverConfig::new("/nonexistent/solver", Duration::from_secs(1));
    let (prog, ps) = annotated("abs.mc");
    let v = Verifier::new(Backend::Portfolio(missing));
    assert!(v.verify(&prog, &[by_id(&ps, "p2")], &by_id(&ps, "p1")).is_true());
}

#[test]
fn declarations_round_trip() {
    let ob = search_obligation();
    let text = emit_smtlib(&ob);
    assert_eq!(parse_declarations(&text).unwrap(), smt_symbols(&ob.declarations));
    for ob in corpus_obligations() {
        let text = emit_smtlib(&ob);
        assert_eq!(parse_declarations(&text).unwrap(), smt_symbols(&ob.declarations), "{text}");
    }
}

fn corpus_obligations() -> Vec<ProofObligation> {
    let mut out = Vec::new();
    for name in ["abs.mc", "id.mc", "search.mc"] {
        let (prog, ps) = annotated(name);
        for q in &ps {
            out.extend(wp_obligations(&prog, &ps, q).unwrap().obligations);
        }
    }
    out
}

#[test]
fn emitted_scripts_are_balanced() {
    for ob in corpus_obligations() {
        let text = emit_smtlib(&ob);
        let mut depth = 0i64;
        for c in text.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            assert!(depth >= 0);
        }
        assert_eq!(depth, 0, "{text}");
    }
}

// --- random suite ----------------------------------------------------------

struct Case {
    prog: Program,
    cfg: OracleConfig,
    targets: Vec<Property>,
    facts: Vec<Property>,
}

fn case(seed: u64) -> Case {
    let gp = random_program(seed, &GenConfig::default());
    let prog = parse_program(&gp.source).unwrap();
    let targets = infer_rte_assertions(&prog);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let facts = random_facts(&prog, &mut rng, 4);
    let cfg = OracleConfig { entry: None, domain: gp.domain, max_steps: 10_000 };
    Case { prog, cfg, targets, facts }
}

fn oracle(c: &Case, hyps: &[Property], q: &Property) -> Option<bool> {
    oracle_valid_under(&c.prog, hyps, q, &c.cfg).ok()
}

#[test]
fn verifier_is_sound_against_the_oracle() {
    let mut proved = 0;
    for seed in 0..200 {
        let c = case(seed);
        let mut queries: Vec<Property> = c.targets.clone();
        queries.extend(c.facts.iter().cloned());
        for q in &queries {
            let rest: Vec<Property> = c.targets.iter().filter(|p| p.id != q.id).cloned().collect();
            let mut with_facts = rest.clone();
            with_facts.extend(c.facts.iter().filter(|p| p.id != q.id).cloned());
            for hyps in [vec![], rest, with_facts] {
                if verify(&c.prog, &hyps, q).is_true() {
                    proved += 1;
                    assert_ne!(
                        oracle(&c, &hyps, q),
                        Some(false),
                        "seed {seed}: {q} proved under {:?} but refuted\n{}",
                        hyps.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
                        c.prog.source()
                    );
                }
            }
        }
    }
    assert!(proved > 100, "only {proved} proofs; the suite is not exercising the prover");
}

#[test]
fn verifier_is_monotone_in_hypotheses() {
    for seed in 0..200 {
        let c = case(seed);
        for q in &c.targets {
            let base: Vec<Property> = c.targets.iter().filter(|p| p.id != q.id).cloned().collect();
            let small = verify(&c.prog, &[], q).is_true();
            let mid = verify(&c.prog, &base, q).is_true();
            let mut big = base.clone();
            big.extend(c.facts.iter().cloned());
            let large = verify(&c.prog, &big, q).is_true();
            assert!(!small || mid, "seed {seed}: {q} lost under analyzer hyps\n{}", c.prog.source());
            assert!(!mid || large, "seed {seed}: {q} lost under extra facts\n{}", c.prog.source());
        }
    }
}

#[test]
fn unknown_verdicts_carry_feedback_for_the_goal() {
    for seed in 0..60 {
        let c = case(seed);
        for q in &c.targets {
            let v = verify(&c.prog, &[], q);
            assert_eq!(v.status == Status::True, v.feedback.is_empty());
            assert!(v.feedback.iter().all(|o| o.target == q.id));
        }
    }
}
