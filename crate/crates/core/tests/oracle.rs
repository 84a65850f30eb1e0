use specforge::lang::*;
use specforge::spec::*;

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

fn by_id<'a>(ps: &'a [Property], id: &str) -> &'a Property {
    ps.iter().find(|p| p.id == id).unwrap_or_else(|| panic!("no property {id}"))
}

fn main_cfg() -> OracleConfig {
    OracleConfig { entry: None, domain: InputDomain::new(), max_steps: 10_000 }
}

#[test]
fn requires_attaches_to_entry() {
    let src = "//@ requires INT_MIN < x;\nint abs(int x) {\n  return x;\n}\n";
    let prog = parse_program(src).unwrap();
    let ps = parse_annotations(src, &prog).unwrap();
    assert_eq!(ps.len(), 1);
    assert_eq!(ps[0].kind, PropKind::Precondition);
    assert_eq!(ps[0].at, Location::Entry("abs".into()));
}

#[test]
fn loop_assigns_attaches_to_loop() {
    let (_, ps) = annotated("search.mc");
    let la = ps.iter().find(|p| matches!(p.kind, PropKind::LoopAssigns(_))).unwrap();
    assert_eq!(la.kind, PropKind::LoopAssigns(["i".to_string()].into()));
    assert_eq!(la.at, Location::line(5, 0));
}

#[test]
fn unbound_variable_is_scope_error() {
    let src = "//@ requires x != 0;\nint one() {\n  return 1;\n}\n";
    let prog = parse_program(src).unwrap();
    match parse_annotations(src, &prog) {
        Err(SpecError::Scope { ident, .. }) => assert_eq!(ident, "x"),
        other => panic!("expected scope error, got {other:?}"),
    }
}

#[test]
fn result_outside_postcondition_rejected() {
    let src = "int f(int x) {\n  //@ assert \\result == x;\n  return x;\n}\n";
    let prog = parse_program(src).unwrap();
    assert!(matches!(parse_annotations(src, &prog), Err(SpecError::Scope { .. })));
}

#[test]
fn eval_examples() {
    let mut st = State::default();
    st.set("x", Value::Int(1));
    let b = Binding::default();
    assert!(eval_predicate(&parse_predicate("x != 0").unwrap(), &st, b).unwrap());
    assert!(eval_predicate(&Pred::tt(), &st, b).unwrap());
    st.arrays.insert("a".into(), vec![Value::Int(4), Value::Int(5), Value::Int(6)]);
    let q = parse_predicate("\\forall integer k; 0 <= k < 3 ==> \\init(a, k, k)").unwrap();
    let expected = st.array("a").unwrap().iter().all(|v| *v != Value::Uninit);
    assert_eq!(eval_predicate(&q, &st, b).unwrap(), expected);
    st.arrays.get_mut("a").unwrap()[2] = Value::Uninit;
    assert!(!eval_predicate(&q, &st, b).unwrap());
}

#[test]
fn eval_errors_and_vacuous_ranges() {
    let mut st = State::default();
    st.set("x", Value::Int(0));
    st.arrays.insert("a".into(), vec![Value::Uninit]);
    let b = Binding::default();
    assert!(eval_predicate(&parse_predicate("10 / x > 1").unwrap(), &st, b).is_err());
    assert!(eval_predicate(&parse_predicate("\\valid_read(a, 3, 2)").unwrap(), &st, b).unwrap());
    assert!(eval_predicate(&parse_predicate("\\initialized(a, 1, 0)").unwrap(), &st, b).unwrap());
    assert!(!eval_predicate(&parse_predicate("\\initialized(a, 0, 1)").unwrap(), &st, b).unwrap());
    assert!(!eval_predicate(&parse_predicate("\\valid_read(a, 0, 1)").unwrap(), &st, b).unwrap());
}

/// Prefix of the single main trace ending at the n-th visit of `loc`.
fn prefix_at(prog: &Program, loc: &Location, nth: usize) -> Trace {
    let t = prog.enumerate_traces(None, &InputDomain::new(), 1000).unwrap().remove(0);
    let idx = t.steps.iter().enumerate().filter(|(_, c)| &c.next == loc).nth(nth).unwrap().0;
    Trace { input: t.input.clone(), steps: t.steps[..=idx].to_vec(), terminal: t.terminal.clone() }
}

#[test]
fn reach_and_satisfy_on_abs_prefixes() {
    let (prog, ps) = annotated("abs.mc");
    let p1 = by_id(&ps, "p1");
    let tau2 = prefix_at(&prog, &p1.at, 0);
    assert!(trace_reaches(&tau2, p1) && trace_satisfies(&prog, &tau2, p1));
    let tau3 = prefix_at(&prog, &p1.at, 1);
    assert!(trace_reaches(&tau3, p1) && !trace_satisfies(&prog, &tau3, p1));
    let entry = prefix_at(&prog, &Location::Entry("main".into()), 0);
    assert!(!trace_reaches(&entry, p1));
}

#[test]
fn validity_examples() {
    let (prog, ps) = annotated("abs.mc");
    let (p1, p2) = (by_id(&ps, "p1").clone(), by_id(&ps, "p2").clone());
    assert!(oracle_valid_under(&prog, &[p2], &p1, &main_cfg()).unwrap());
    assert!(!oracle_valid_under(&prog, &[], &p1, &main_cfg()).unwrap());

    let (prog, ps) = annotated("id.mc");
    let (p4, p5) = (by_id(&ps, "p4").clone(), by_id(&ps, "p5").clone());
    assert!(oracle_valid_under(&prog, &[p5], &p4, &main_cfg()).unwrap());
}

#[test]
fn inconclusive_when_truncated() {
    let src = "int main() {\n  int i = 0;\n  while (i < 100) {\n    i = i + 1;\n  }\n  //@ assert i == 100;\n  return 0;\n}\n";
    let prog = parse_program(src).unwrap();
    let ps = parse_annotations(src, &prog).unwrap();
    let cfg = OracleConfig { max_steps: 20, ..main_cfg() };
    assert_eq!(
        oracle_valid_under(&prog, &[], &ps[0], &cfg),
        Err(SpecError::OracleInconclusive { truncated: 1 })
    );
    assert!(oracle_valid_under(&prog, &[], &ps[0], &main_cfg()).unwrap());
}

#[test]
fn loop_assigns_oracle() {
    let src = "int main() {\n  int i = 0;\n  int j = 5;\n  //@ loop assigns i;\n  while (i < 3) {\n    i = i + 1;\n  }\n  //@ loop assigns i;\n  while (i < 6) {\n    i = i + 1;\n    j = j + 1;\n  }\n  return 0;\n}\n";
    let prog = parse_program(src).unwrap();
    let ps = parse_annotations(src, &prog).unwrap();
    assert!(oracle_valid_under(&prog, &[], &ps[0], &main_cfg()).unwrap());
    assert!(!oracle_valid_under(&prog, &[], &ps[1], &main_cfg()).unwrap());
}

#[test]
fn freeness_examples() {
    let (prog, ps) = annotated("id.mc");
    let a = vec![by_id(&ps, "p4").clone()];
    let s = vec![by_id(&ps, "p5").clone()];
    assert_eq!(check_rte_freeness(&prog, &a, &s, &[], &main_cfg()).unwrap(), Freeness::Free);

    let (prog, ps) = annotated("abs.mc");
    let a = vec![by_id(&ps, "p1").clone()];
    let cs3 = Property::new(
        "cs3",
        PropKind::CallSiteCheck { callee: "abs".into() },
        Location::line(11, 0),
        parse_predicate("INT_MIN < INT_MIN").unwrap(),
        Origin::Synthesized,
        "main",
    );
    let s = vec![by_id(&ps, "p2").clone(), cs3.clone()];
    assert_eq!(check_rte_freeness(&prog, &a, &s, &[cs3], &main_cfg()).unwrap(), Freeness::FreeUnderH);
    assert!(matches!(
        check_rte_freeness(&prog, &a, &s, &[], &main_cfg()).unwrap(),
        Freeness::FreeUnderH | Freeness::Counterexample { .. }
    ));

    let empty = parse_program("void f() {\n}\n").unwrap();
    let cfg = OracleConfig { entry: Some("f".into()), ..main_cfg() };
    assert_eq!(check_rte_freeness(&empty, &[], &[], &[], &cfg).unwrap(), Freeness::Free);
}

#[test]
fn placeholder_hypothesis_is_neutral() {
    let (prog, ps) = annotated("abs.mc");
    let p1 = by_id(&ps, "p1").clone();
    let t = Property::new("t", PropKind::PlainAssert, Location::line(11, 0), Pred::tt(), Origin::Placeholder, "main");
    for hyps in [vec![], vec![by_id(&ps, "p2").clone()]] {
        let base = oracle_valid_under(&prog, &hyps, &p1, &main_cfg()).unwrap();
        let mut more = hyps.clone();
        more.push(t.clone());
        assert_eq!(oracle_valid_under(&prog, &more, &p1, &main_cfg()).unwrap(), base);
    }
}

#[test]
fn property_json_roundtrip() {
    let (_, ps) = annotated("search.mc");
    let json = serde_json::to_string(&ps).unwrap();
    let back: Vec<Property> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, ps);
}
