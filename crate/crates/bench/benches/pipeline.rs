use criterion::{criterion_group, criterion_main, Criterion};
use specforge::analysis::{build_call_graph, infer_rte_assertions};
use specforge::gen::{random_program, GenConfig};
use specforge::lang::parse_program;
use specforge::llm::FailingTransport;
use specforge::report::{run_pipeline, PipelineConfig};
use specforge::spec::{parse_annotations, TraceSet, OracleConfig};
use specforge::verifier::verify;
use std::hint::black_box;

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn pipeline(c: &mut Criterion) {
    let cfg = PipelineConfig::default();
    for name in ["abs.mc", "id.mc", "search.mc"] {
        let src = corpus(name);
        c.bench_function(&format!("pipeline/{name}"), |b| {
            b.iter(|| run_pipeline(name, black_box(&src), &cfg, Some(Box::new(FailingTransport))).unwrap())
        });
    }
    let randoms: Vec<String> = (0..20).map(|s| random_program(s, &GenConfig::default()).source).collect();
    c.bench_function("pipeline/random20", |b| {
        b.iter(|| {
            for src in &randoms {
                run_pipeline("r", black_box(src), &cfg, Some(Box::new(FailingTransport))).unwrap();
            }
        })
    });
}

fn verifier(c: &mut Criterion) {
    let src = corpus("annotated/search.mc");
    let prog = parse_program(&src).unwrap();
    let ps = parse_annotations(&src, &prog).unwrap();
    let goal = ps.iter().find(|p| p.id == "p7").unwrap();
    let hyps: Vec<_> = ps.iter().filter(|p| p.id != "p7").cloned().collect();
    c.bench_function("verify/search", |b| b.iter(|| verify(&prog, black_box(&hyps), goal)));
}

fn analyzer(c: &mut Criterion) {
    let progs: Vec<_> = (0..20).map(|s| parse_program(&random_program(s, &GenConfig::default()).source).unwrap()).collect();
    c.bench_function("analyze/random20", |b| {
        b.iter(|| {
            for p in &progs {
                black_box(infer_rte_assertions(p));
                black_box(build_call_graph(p));
            }
        })
    });
}

fn oracle(c: &mut Criterion) {
    let gens: Vec<_> = (0..20).map(|s| random_program(s, &GenConfig::default())).collect();
    let progs: Vec<_> = gens.iter().map(|g| parse_program(&g.source).unwrap()).collect();
    c.bench_function("oracle/traces20", |b| {
        b.iter(|| {
            for (g, p) in gens.iter().zip(&progs) {
                let cfg = OracleConfig { entry: None, domain: g.domain.clone(), max_steps: 10_000 };
                black_box(TraceSet::new(p, &cfg).unwrap());
            }
        })
    });
}

criterion_group!(benches, pipeline, verifier, analyzer, oracle);
criterion_main!(benches);
