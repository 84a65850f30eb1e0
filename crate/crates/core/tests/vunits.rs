mod common;

use common::dag_source;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specforge::analysis::{build_call_graph, infer_rte_assertions, CallGraph};
use specforge::lang::{parse_program, Location, Program};
use specforge::spec::{parse_predicate, Origin, PropKind, Property};
use specforge::vunits::*;
use std::cmp::Ordering;

fn build(src: &str) -> (Program, CallGraph, Vec<VUnit>) {
    let prog = parse_program(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let g = build_call_graph(&prog);
    let a = infer_rte_assertions(&prog);
    let units = construct_vunits(&prog, &a, &g);
    (prog, g, units)
}

#[test]
fn sort_key_laws_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut with_edges = 0;
    for _ in 0..1000 {
        let src = dag_source(&mut rng);
        let (_, g, units) = build(&src);
        if !g.edges.is_empty() {
            with_edges += 1;
        }
        for a in &units {
            for b in &units {
                let ab = compare_vunits(a, b, &g);
                assert_eq!(ab, compare_vunits(b, a, &g).reverse(), "antisymmetry\n{src}");
                assert_eq!(ab == Ordering::Equal, a.index == b.index, "totality\n{src}");
                if g.ancestor(&a.host, &b.host) {
                    assert_eq!(ab, Ordering::Greater, "{} calls {} and must come later\n{src}", a.host, b.host);
                }
            }
        }
        for _ in 0..20.min(units.len() * units.len()) {
            let pick = |r: &mut ChaCha8Rng| &units[r.random_range(0..units.len())];
            let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            if compare_vunits(a, b, &g) != Ordering::Greater && compare_vunits(b, c, &g) != Ordering::Greater {
                assert_ne!(compare_vunits(a, c, &g), Ordering::Greater, "transitivity\n{src}");
            }
        }
        let q = VUnitQueue::new(units.clone(), &g);
        assert_eq!(q.len(), units.len());
        for w in q.units().windows(2) {
            assert_eq!(compare_vunits(&w[0], &w[1], &g), Ordering::Less);
        }
    }
    assert!(with_edges > 500, "{with_edges} graphs with calls");
}

#[test]
fn ranks_put_ancestors_higher() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let (_, g, _) = build(&dag_source(&mut rng));
        let r = g.ranks();
        for a in &g.nodes {
            if g.callees(a).is_empty() {
                assert_eq!(r[a], 0);
            }
            for d in &g.nodes {
                if g.ancestor(a, d) {
                    assert!(r[a] > r[d]);
                }
            }
        }
    }
}

fn pre(callee: &str) -> Vec<Property> {
    vec![Property::new(
        "p",
        PropKind::Precondition,
        Location::Entry(callee.into()),
        parse_predicate("x != 2").unwrap(),
        Origin::Synthesized,
        callee,
    )]
}

#[test]
fn updates_keep_the_length_and_refuse_processed_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut stale = 0;
    let mut applied = 0;
    for _ in 0..400 {
        let src = dag_source(&mut rng);
        let (prog, g, units) = build(&src);
        let mut q = VUnitQueue::new(units, &g);
        let n = q.len();
        for _ in 0..3 * n + 1 {
            if rng.random_bool(0.5) {
                q.next_unit();
            } else {
                let callee = g.nodes[rng.random_range(0..g.nodes.len())].clone();
                let before: Vec<VUnit> = q.units().to_vec();
                let done = before[..q.cursor()].iter().any(
                    |u| matches!(&u.role, SiteRole::PreconditionCheck { callee: c, .. } if *c == callee),
                );
                match q.update_queue(&prog, &callee, &pre(&callee)) {
                    Err(e) => {
                        assert!(done, "{e} without a processed unit\n{src}");
                        stale += 1;
                        assert_eq!(q.units(), before.as_slice(), "failed update mutated the queue");
                    }
                    Ok(()) => {
                        assert!(!done);
                        applied += 1;
                        for (u, b) in q.units().iter().zip(&before) {
                            assert_eq!(u.index, b.index, "order changed");
                            match &u.role {
                                SiteRole::PreconditionCheck { callee: c, call_site } if *c == callee => {
                                    let want = instantiate_at_call(&prog, call_site, &pre(c)[0].predicate).unwrap();
                                    assert_eq!(u.guard.predicate, want);
                                    assert_eq!(u.guard.origin, Origin::Synthesized);
                                }
                                _ => assert_eq!(u, b),
                            }
                        }
                    }
                }
            }
            assert_eq!(q.len(), n);
        }
    }
    assert!(stale > 20 && applied > 20, "stale={stale} applied={applied}");
}

#[test]
fn instantiation_substitutes_actuals() {
    let (prog, g, _) = build("int f(int x) {\n  return 0;\n}\n\nint main(int y) {\n  int r = f(y + 1);\n  return r;\n}\n");
    let site = &g.sites("main", "f")[0];
    let p = instantiate_at_call(&prog, site, &parse_predicate("x != 2").unwrap()).unwrap();
    assert_eq!(p, parse_predicate("y + 1 != 2").unwrap());
}

fn plan(name: &str) -> Vec<(String, String)> {
    let src = std::fs::read_to_string(format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let (_, g, units) = build(&src);
    VUnitQueue::new(units, &g).units().iter().map(|u| (u.host.clone(), u.guard.id.clone())).collect()
}

#[test]
fn corpus_plans() {
    let s = |v: &[(&str, &str)]| v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>();
    assert_eq!(plan("abs.mc"), s(&[("abs", "a1"), ("main", "c1"), ("main", "c2")]));
    assert_eq!(plan("search.mc"), s(&[("search", "a1")]));
    let id = plan("id.mc");
    assert_eq!(id[0].0, "one");
    assert!(id.iter().position(|u| u.0 == "one") < id.iter().position(|u| u.0 != "one"));
}
