use specforge::lang::*;

fn corpus(name: &str) -> String {
    let p = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

fn run_fn(src: &str, f: &str, args: &[(&str, InputValue)]) -> Trace {
    let p = parse_program(src).unwrap();
    let args: Vec<_> = args.iter().map(|(n, v)| (n.to_string(), v.clone())).collect();
    let c = p.initial(f, &args).unwrap();
    p.run(c, 1000, args)
}

#[test]
fn increment_steps_to_two() {
    let p = parse_program("int f(int x) {\n  x++;\n  return x;\n}\n").unwrap();
    let c = p.initial("f", &[("x".into(), InputValue::Int(1))]).unwrap();
    let Step::Next(c) = p.eval_step(&c) else { panic!() };
    assert_eq!(c.next, Location::line(2, 0));
    let Step::Next(c) = p.eval_step(&c) else { panic!() };
    assert_eq!(c.state.scalar("x"), Some(Value::Int(2)));
    assert_eq!(c.next, Location::line(3, 0));
}

#[test]
fn negating_int_min_halts() {
    let t = run_fn(&corpus("abs.mc"), "abs", &[("x", InputValue::Int(i32::MIN))]);
    assert_eq!(t.terminal, Terminal::Rte { class: RteClass::SignedOverflow, at: Location::line(3, 0) });
    assert_eq!(t.steps.last().unwrap().next, Location::line(3, 0));
}

#[test]
fn reading_uninitialized_cell_halts() {
    let src = "int f() {\n  int a[1];\n  int i = 0;\n  int y = a[i];\n  return y;\n}\n";
    let t = run_fn(src, "f", &[]);
    assert_eq!(t.terminal, Terminal::Rte { class: RteClass::UninitializedRead, at: Location::line(4, 0) });
}

#[test]
fn abs_main_has_one_faulting_trace_through_second_call() {
    let p = parse_program(&corpus("abs.mc")).unwrap();
    let ts = p.enumerate_traces(None, &InputDomain::new(), 1000).unwrap();
    assert_eq!(ts.len(), 1);
    let t = &ts[0];
    assert_eq!(t.terminal, Terminal::Rte { class: RteClass::SignedOverflow, at: Location::line(3, 0) });
    assert!(t.steps.iter().any(|c| c.next == Location::line(10, 0)));
    assert_eq!(t.steps.last().unwrap().depth(), 1);
}

#[test]
fn id_main_completes() {
    let p = parse_program(&corpus("id.mc")).unwrap();
    let ts = p.enumerate_traces(None, &InputDomain::new(), 1000).unwrap();
    assert_eq!(ts.len(), 1);
    assert_eq!(ts[0].terminal, Terminal::Completed);
}

#[test]
fn abs_small_domain_completes() {
    let p = parse_program(&corpus("abs.mc")).unwrap();
    let d = InputDomain::new().ints("x", &[-1, 0, 1]);
    let ts = p.enumerate_traces(Some("abs"), &d, 100).unwrap();
    assert_eq!(ts.len(), 3);
    assert!(ts.iter().all(|t| t.terminal == Terminal::Completed));
    let inputs: Vec<_> = ts.iter().map(|t| t.input[0].1.clone()).collect();
    assert_eq!(inputs, vec![InputValue::Int(-1), InputValue::Int(0), InputValue::Int(1)]);
}

#[test]
fn no_entry_without_main() {
    let p = parse_program(&corpus("search.mc")).unwrap();
    assert!(matches!(p.enumerate_traces(None, &InputDomain::new(), 10), Err(LangError::NoEntry(_))));
}

#[test]
fn budget_truncates() {
    let src = "void f() {\n  int i = 0;\n  while (i < 1000) {\n    i = i + 1;\n  }\n}\n";
    let t = run_fn(src, "f", &[]);
    assert_eq!(t.terminal, Terminal::BudgetExceeded);
}

#[test]
fn two_complement_boundaries() {
    let src = "int add(int a, int b) {\n  return a + b;\n}\nint neg(int a) {\n  return -a;\n}\n";
    let add = |a, b| run_fn(src, "add", &[("a", InputValue::Int(a)), ("b", InputValue::Int(b))]).terminal;
    assert!(matches!(add(i32::MAX, 1), Terminal::Rte { class: RteClass::SignedOverflow, .. }));
    assert_eq!(add(i32::MIN, 1), Terminal::Completed);
    let neg = run_fn(src, "neg", &[("a", InputValue::Int(i32::MIN))]).terminal;
    assert!(matches!(neg, Terminal::Rte { class: RteClass::SignedOverflow, .. }));
}

#[test]
fn division_faults() {
    let src = "int d(int a, int b) {\n  return a / b;\n}\n";
    let d = |a, b| run_fn(src, "d", &[("a", InputValue::Int(a)), ("b", InputValue::Int(b))]).terminal;
    assert!(matches!(d(1, 0), Terminal::Rte { class: RteClass::DivByZero, .. }));
    assert!(matches!(d(i32::MIN, -1), Terminal::Rte { class: RteClass::SignedOverflow, .. }));
    assert_eq!(d(7, -2), Terminal::Completed);
}

#[test]
fn arrays_passed_by_value_and_checked_for_init() {
    let src = "void g(int a[], int n) {\n  a[0] = 5;\n}\nint f() {\n  int b[2];\n  b[0] = 1;\n  b[1] = 2;\n  g(b, 2);\n  return b[0];\n}\nint h() {\n  int c[2];\n  c[0] = 1;\n  g(c, 2);\n  return 0;\n}\n";
    let t = run_fn(src, "f", &[]);
    assert_eq!(t.terminal, Terminal::Completed);
    let exit = t.steps.iter().rev().find(|c| c.next == Location::Exit("f".into())).unwrap();
    assert_eq!(exit.result, Some(1));
    let t = run_fn(src, "h", &[]);
    assert_eq!(t.terminal, Terminal::Rte { class: RteClass::UninitializedRead, at: Location::line(14, 0) });
}

#[test]
fn short_circuit_guards_index() {
    let src = "int f(int a[], int n, int i) {\n  if (0 <= i && i < n && a[i] > 0) {\n    return 1;\n  }\n  return 0;\n}\n";
    let t = run_fn(
        src,
        "f",
        &[("a", InputValue::Array(vec![1, 2])), ("n", InputValue::Int(2)), ("i", InputValue::Int(5))],
    );
    assert_eq!(t.terminal, Terminal::Completed);
}

#[test]
fn exit_state_holds_entry_parameters() {
    let src = "int f(int x) {\n  x = x + 1;\n  return x;\n}\n";
    let t = run_fn(src, "f", &[("x", InputValue::Int(3))]);
    let last = t.steps.last().unwrap();
    assert_eq!(last.next, Location::Exit("f".into()));
    assert_eq!(last.result, Some(4));
    assert_eq!(last.state.scalar("x"), Some(Value::Int(3)));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn eval_step_is_deterministic(x in any::<i32>(), y in any::<i32>()) {
            let src = "int f(int x, int y) {\n  int z = x * y;\n  if (z > x) {\n    z = z - x;\n  }\n  return z / (y + 1);\n}\n";
            let p = parse_program(src).unwrap();
            let args = vec![("x".to_string(), InputValue::Int(x)), ("y".to_string(), InputValue::Int(y))];
            let mut c = p.initial("f", &args).unwrap();
            loop {
                let a = p.eval_step(&c);
                let b = p.eval_step(&c);
                prop_assert_eq!(&a, &b);
                match a {
                    Step::Next(n) => c = n,
                    _ => break,
                }
            }
        }

        #[test]
        fn add_matches_checked_arithmetic(a in any::<i32>(), b in any::<i32>()) {
            let src = "int add(int a, int b) {\n  return a + b;\n}\n";
            let t = run_fn(src, "add", &[("a", InputValue::Int(a)), ("b", InputValue::Int(b))]);
            match a.checked_add(b) {
                Some(v) => {
                    prop_assert_eq!(&t.terminal, &Terminal::Completed);
                    prop_assert_eq!(t.steps.last().unwrap().result, Some(v));
                }
                None => {
                    let overflow = matches!(t.terminal, Terminal::Rte { class: RteClass::SignedOverflow, .. });
                    prop_assert!(overflow);
                }
            }
        }
    }
}
