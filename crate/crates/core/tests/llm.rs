use specforge::analysis::{build_call_graph, infer_rte_assertions};
use specforge::lang::*;
use specforge::llm::*;
use specforge::spec::{parse_annotations, PropKind, Property};
use specforge::synth::*;
use specforge::verifier::{render_obligation, verify, Verdict};
use specforge::vunits::{construct_vunits, VUnit, VUnitQueue};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

fn corpus(name: &str) -> String {
    let p = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

fn fixture_client(name: &str) -> Arc<LlmClient> {
    let path = format!("{}/../../corpus/llm/{name}", env!("CARGO_MANIFEST_DIR"));
    let t = FixtureTransport::load(std::path::Path::new(&path)).unwrap();
    Arc::new(LlmClient::new(LlmConfig::default(), Box::new(t)))
}

fn inline_client(replies: &[(Option<&str>, &str)]) -> Arc<LlmClient> {
    let fixture = Fixture {
        replies: replies
            .iter()
            .map(|(w, r)| FixtureReply { when: w.map(str::to_string), reply: r.to_string() })
            .collect(),
    };
    Arc::new(LlmClient::new(LlmConfig::default(), Box::new(FixtureTransport { fixture })))
}

struct Setup {
    prog: Program,
    units: Vec<VUnit>,
}

fn setup(src: &str) -> Setup {
    let prog = parse_program(src).unwrap();
    let g = build_call_graph(&prog);
    let a = infer_rte_assertions(&prog);
    let units = construct_vunits(&prog, &a, &g);
    Setup { prog, units }
}

fn rte_unit<'a>(s: &'a Setup, host: &str) -> &'a VUnit {
    s.units.iter().find(|u| u.host == host && u.guard.kind.tag() == "rte").unwrap()
}

fn run_with(src: &str, proposer: &mut dyn Proposer) -> SynthesisOutcome {
    let prog = parse_program(src).unwrap();
    let g = build_call_graph(&prog);
    let a = infer_rte_assertions(&prog);
    let q = VUnitQueue::new(construct_vunits(&prog, &a, &g), &g);
    synthesize(q, &prog, &g, &a, &SynthesisConfig::default(), proposer)
}

#[test]
fn host_prompt_is_confined_to_the_function() {
    let s = setup(&corpus("abs.mc"));
    let u = rte_unit(&s, "abs");
    let v = verify(&s.prog, &[], &u.guard);
    let req = Request { prog: &s.prog, unit: u, context: &[], verdict: &v };
    let b = build_prompt(Stage::Host, &req, 1 << 20).unwrap();
    assert!(b.context.contains("int abs(int x) {"));
    assert!(b.context.contains("return -x;"));
    assert!(!b.context.contains("abs(-42)"), "call site leaked:\n{}", b.context);
    assert!(!b.context.contains("int main"));
    let ob = render_obligation(&v.feedback[0]);
    assert!(b.obligations.contains(&ob));
    assert!(b.user_text().contains("reason step by step"));
    assert!(b.user_text().contains("Worked examples"));
}

#[test]
fn callee_prompt_holds_host_and_callee_and_forbids_preconditions() {
    let s = setup(&corpus("id.mc"));
    let u = rte_unit(&s, "one");
    let v = verify(&s.prog, &[], &u.guard);
    let req = Request { prog: &s.prog, unit: u, context: &[], verdict: &v };
    let b = build_prompt(Stage::Callee, &req, 1 << 20).unwrap();
    assert!(b.context.contains("int one() {"));
    assert!(b.context.contains("int id(int x) {"));
    assert!(!b.context.contains("int zero()"));
    assert!(b.instructions.contains("Do not write any `requires` clause"));
    let host = build_prompt(Stage::Host, &req, 1 << 20).unwrap();
    assert!(!host.context.contains("int id(int x)"));
}

#[test]
fn known_specs_are_shown_in_context() {
    let s = setup(&corpus("id.mc"));
    let u = rte_unit(&s, "one");
    let ann = parse_annotations(&corpus("annotated/id.mc"), &parse_program(&corpus("annotated/id.mc")).unwrap())
        .unwrap();
    let post: Vec<Property> = ann.into_iter().filter(|p| p.kind == PropKind::Postcondition).collect();
    let v = verify(&s.prog, &[], &u.guard);
    let req = Request { prog: &s.prog, unit: u, context: &post, verdict: &v };
    let b = build_prompt(Stage::Callee, &req, 1 << 20).unwrap();
    assert!(b.context.contains("//@ ensures \\result == x;"), "{}", b.context);
}

#[test]
fn minimal_bundle_and_budget() {
    let s = setup("int f(int x) {\n  return 10 / x;\n}\n");
    let u = rte_unit(&s, "f");
    let v = verify(&s.prog, &[], &u.guard);
    assert_eq!(v.feedback.len(), 1);
    let req = Request { prog: &s.prog, unit: u, context: &[], verdict: &v };
    let b = build_prompt(Stage::Host, &req, 1 << 20).unwrap();
    assert!(b.target.contains("x != 0"));
    assert!(b.user_text().contains("  2 |   return 10 / x;"));
    let err = build_prompt(Stage::Host, &req, 100).unwrap_err();
    assert!(matches!(err, LlmError::ContextTooLarge { budget: 100, .. }));
}

#[test]
fn parse_postcondition_reply() {
    let s = setup(&corpus("id.mc"));
    let scope = ReplyScope { prog: &s.prog, stage: Stage::Callee, funcs: vec!["id".into()] };
    let r = parse_spec_response("Sure.\n```c\n//@ ensures \\result == x;\nint id(int x) {\n  return x;\n}\n```", &scope);
    assert_eq!(r.proposals.len(), 1);
    match &r.proposals[0] {
        Proposal::Parsed(c) => {
            assert_eq!(c.property.kind, PropKind::Postcondition);
            assert_eq!(c.property.at, Location::Exit("id".into()));
            assert_eq!(c.property.predicate.to_string(), "\\result == x");
        }
        p => panic!("{p:?}"),
    }
}

#[test]
fn bare_contract_defaults_to_the_single_callee() {
    let s = setup(&corpus("id.mc"));
    let scope = ReplyScope { prog: &s.prog, stage: Stage::Callee, funcs: vec!["id".into()] };
    let r = parse_spec_response("//@ ensures \\result == x;", &scope);
    match &r.proposals[..] {
        [Proposal::Parsed(c)] => assert_eq!(c.property.func, "id"),
        p => panic!("{p:?}"),
    }
}

#[test]
fn reply_without_annotations() {
    let s = setup(&corpus("id.mc"));
    let scope = ReplyScope { prog: &s.prog, stage: Stage::Host, funcs: vec!["one".into()] };
    let r = parse_spec_response("I cannot help with that.", &scope);
    assert!(r.proposals.is_empty());
    assert_eq!(r.diagnostics.len(), 1);
}

#[test]
fn illegal_requires_carries_scope_error() {
    let s = setup(&corpus("id.mc"));
    let scope = ReplyScope { prog: &s.prog, stage: Stage::Host, funcs: vec!["one".into()] };
    let r = parse_spec_response("```c\n//@ requires x != 0;\nint one() {\n```", &scope);
    match &r.proposals[..] {
        [Proposal::Illegal { raw_text, error, .. }] => {
            assert!(error.contains("scope error"), "{error}");
            assert!(raw_text.contains("int one() {"), "{raw_text}");
        }
        p => panic!("{p:?}"),
    }
}

#[test]
fn prompt_prefixes_are_stripped_and_lines_aligned() {
    let s = setup(&corpus("search.mc"));
    let body = s.prog.function_text("search");
    let wl = body.lines().find(|l| l.contains("while")).unwrap().trim().to_string();
    let reply = format!("```c\n    |   //@ loop invariant 0 <= i;\n  5 |   {wl}\n```");
    let scope = ReplyScope { prog: &s.prog, stage: Stage::Host, funcs: vec!["search".into()] };
    let r = parse_spec_response(&reply, &scope);
    match &r.proposals[..] {
        [Proposal::Parsed(c)] => {
            assert_eq!(c.property.kind, PropKind::LoopInvariant);
            assert!(s.prog.loc_info(&c.property.at).unwrap().is_loop);
        }
        p => panic!("{p:?}"),
    }
}

#[test]
fn unknown_code_line_is_illegal() {
    let s = setup(&corpus("search.mc"));
    let scope = ReplyScope { prog: &s.prog, stage: Stage::Host, funcs: vec!["search".into()] };
    let r = parse_spec_response("//@ loop invariant 0 <= i;\nfor (;;) {", &scope);
    assert!(matches!(&r.proposals[..], [Proposal::Illegal { .. }]));
}

fn one_request(s: &Setup) -> (&VUnit, Verdict) {
    let u = rte_unit(s, "one");
    (u, verify(&s.prog, &[], &u.guard))
}

#[test]
fn correction_never_fixing_scope_is_discarded() {
    let s = setup(&corpus("id.mc"));
    let (u, v) = one_request(&s);
    let client = fixture_client("id.json");
    let mut p = LlmProposer::new(client.clone());
    let req = Request { prog: &s.prog, unit: u, context: &[], verdict: &v };
    let cands = p.propose(Stage::Host, &req).unwrap();
    assert_eq!(client.costs().requests, 1);
    let out = correction_loop(&mut p, &req, cands[0].clone(), 3);
    assert!(matches!(out, Corrected::Discarded { .. }));
    assert_eq!(client.costs().requests, 4);
}

#[test]
fn zero_budget_discards_immediately() {
    let s = setup(&corpus("id.mc"));
    let (u, v) = one_request(&s);
    let client = fixture_client("id.json");
    let mut p = LlmProposer::new(client.clone());
    let req = Request { prog: &s.prog, unit: u, context: &[], verdict: &v };
    let cand = Proposal::Illegal { stage: Stage::Host, raw_text: "//@ requires x != 0".into(), error: "e".into() };
    assert!(matches!(correction_loop(&mut p, &req, cand, 0), Corrected::Discarded { .. }));
    assert_eq!(client.costs().requests, 0);
}

#[test]
fn missing_semicolon_fixed_on_first_attempt() {
    let s = setup(&corpus("id.mc"));
    let (u, v) = one_request(&s);
    let fixed = "```c\n//@ ensures \\result == x;\nint id(int x) {\n```";
    let client = inline_client(&[(Some("This annotation was rejected"), fixed), (None, "//@ ensures \\result == x\nint id(int x) {")]);
    let mut p = LlmProposer::new(client.clone());
    let req = Request { prog: &s.prog, unit: u, context: &[], verdict: &v };
    let cands = p.propose(Stage::Callee, &req).unwrap();
    assert!(matches!(&cands[..], [Proposal::Illegal { .. }]), "{cands:?}");
    let Corrected::Fixed(c) = correction_loop(&mut p, &req, cands[0].clone(), 3) else { panic!("not fixed") };
    assert_eq!(client.costs().requests, 2);
    // Independent route: attach the corrected text with the annotation parser.
    let src = corpus("id.mc").replacen("int id(int x) {", "//@ ensures \\result == x;\nint id(int x) {", 1);
    let prog2 = parse_program(&src).unwrap();
    let direct = parse_annotations(&src, &prog2).unwrap();
    assert_eq!(direct.len(), 1);
    assert_eq!(direct[0].kind, c.property.kind);
    assert_eq!(direct[0].predicate, c.property.predicate);
}

#[test]
fn fixture_pipeline_on_id() {
    let client = fixture_client("id.json");
    let out = run_with(&corpus("id.mc"), &mut LlmProposer::new(client.clone()));
    assert!(out.ledger.h.is_empty());
    let post: Vec<&Property> = out.ledger.s.iter().filter(|p| p.kind == PropKind::Postcondition).collect();
    assert_eq!(post.len(), 1);
    assert_eq!(post[0].predicate.to_string(), "\\result == x");
    assert!(out.ledger.s.iter().all(|p| !(p.kind == PropKind::Precondition && p.func == "one")));
    let a1 = out.timeline.iter().find(|r| r.kind == "rte").unwrap();
    assert!(a1.iterations[0].rejected.iter().any(|r| r.reason.contains("scope error")));
    // propose host, propose callee, three corrections of the illegal requires
    assert_eq!(client.costs().requests, 5);
}

#[test]
fn fixture_replay_is_byte_identical() {
    let a = run_with(&corpus("id.mc"), &mut LlmProposer::new(fixture_client("id.json")));
    let b = run_with(&corpus("id.mc"), &mut LlmProposer::new(fixture_client("id.json")));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

struct Down;
impl Transport for Down {
    fn send(&self, _: &LlmConfig, _: &[Message]) -> Result<String, LlmError> {
        Err(LlmError::Timeout)
    }
}

#[test]
fn unavailable_model_degrades_to_templates() {
    let cfg = LlmConfig { retries: 1, backoff_ms: 1, ..Default::default() };
    let client = Arc::new(LlmClient::new(cfg, Box::new(Down)));
    let degraded = run_with(&corpus("abs.mc"), &mut LlmProposer::new(client.clone()));
    let templ = run_with(&corpus("abs.mc"), &mut TemplateProposer::new());
    assert_eq!(degraded.ledger, templ.ledger);
    let a1 = degraded.timeline.iter().find(|r| r.kind == "rte").unwrap();
    assert_eq!(a1.iterations[0].proposer, "llm (template fallback)");
    assert!(client.costs().failures >= 2);
}

#[test]
fn config_validation() {
    assert!(LlmConfig::default().validate().is_ok());
    assert_eq!(LlmConfig::default().temperature, 0.7);
    assert_eq!(LlmConfig::default().max_tokens, 4096);
    for t in [-0.1, 2.5, f64::NAN] {
        let c = LlmConfig { temperature: t, ..Default::default() };
        assert!(c.validate().is_err(), "{t}");
    }
    let client = LlmClient::new(LlmConfig { temperature: 3.0, ..Default::default() }, Box::new(FailingTransport));
    assert!(matches!(client.chat(&[]), Err(LlmError::Config(_))));
}

#[test]
fn missing_key_fails_before_network() {
    let cfg = LlmConfig {
        endpoint: "http://127.0.0.1:1/never".into(),
        api_key_env: "SPECFORGE_TEST_KEY_THAT_IS_NOT_SET".into(),
        ..Default::default()
    };
    let client = LlmClient::new(cfg, Box::new(HttpTransport));
    let e = client.chat(&[Message::new("user", "hi")]).unwrap_err();
    assert!(matches!(e, LlmError::Auth(_)), "{e}");
    assert_eq!(client.costs().requests, 1);
}

/// Serves one canned `(status, body)` per connection and records requests.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", l.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let Ok((mut sock, _)) = l.accept() else { return };
            let mut r = BufReader::new(sock.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                if r.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
                head.push_str(&line);
            }
            let mut b = vec![0; len];
            let _ = r.read_exact(&mut b);
            log.lock().unwrap().push(format!("{head}\n{}", String::from_utf8_lossy(&b)));
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = sock.write_all(resp.as_bytes());
        }
    });
    (url, seen)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn http_client(url: String, key_env: &str, retries: u32) -> LlmClient {
    let cfg = LlmConfig { endpoint: url, api_key_env: key_env.into(), retries, backoff_ms: 1, timeout_ms: 5000, ..Default::default() };
    LlmClient::new(cfg, Box::new(HttpTransport))
}

#[test]
fn http_round_trip_and_redacted_logs() {
    let key = "sk-test-9f8e7d6c5b4a";
    std::env::set_var("SPECFORGE_TEST_KEY_RT", key);
    let (url, seen) = serve(vec![(200, ok_body(&format!("echo {key}")))]);
    let dir = tempfile::tempdir().unwrap();
    let mut client = http_client(url, "SPECFORGE_TEST_KEY_RT", 0);
    client.log_dir = Some(dir.path().join("llm"));
    let text = client.chat(&[Message::new("system", "s"), Message::new("user", "u")]).unwrap();
    assert_eq!(text, format!("echo {key}"));
    let req = seen.lock().unwrap()[0].clone();
    assert!(req.contains(&format!("Bearer {key}")));
    let body: serde_json::Value = serde_json::from_str(req.split("\n\n").last().unwrap()).unwrap();
    assert_eq!(body["messages"][1]["content"], "u");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 4096);
    let mut logged = 0;
    for e in std::fs::read_dir(dir.path().join("llm")).unwrap() {
        let t = std::fs::read_to_string(e.unwrap().path()).unwrap();
        assert!(!t.contains(key), "key leaked into log");
        assert!(t.contains("[REDACTED]"));
        logged += 1;
    }
    assert_eq!(logged, 1);
}

#[test]
fn http_retries_server_errors() {
    std::env::set_var("SPECFORGE_TEST_KEY_RETRY", "k");
    let (url, seen) = serve(vec![(503, "{}".into()), (500, "{}".into()), (200, ok_body("fine"))]);
    let client = http_client(url, "SPECFORGE_TEST_KEY_RETRY", 3);
    assert_eq!(client.chat(&[Message::new("user", "u")]).unwrap(), "fine");
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert_eq!(client.costs().failures, 2);
}

#[test]
fn http_auth_and_rate_limit() {
    std::env::set_var("SPECFORGE_TEST_KEY_AUTH", "k");
    let (url, seen) = serve(vec![(401, "{}".into())]);
    let client = http_client(url, "SPECFORGE_TEST_KEY_AUTH", 3);
    assert!(matches!(client.chat(&[Message::new("user", "u")]), Err(LlmError::Auth(_))));
    assert_eq!(seen.lock().unwrap().len(), 1, "auth errors are not retried");

    let (url, seen) = serve(vec![(429, "{}".into()), (429, "{}".into())]);
    let client = http_client(url, "SPECFORGE_TEST_KEY_AUTH", 1);
    assert!(matches!(client.chat(&[Message::new("user", "u")]), Err(LlmError::RateLimited)));
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn http_malformed_body() {
    std::env::set_var("SPECFORGE_TEST_KEY_BAD", "k");
    let (url, _) = serve(vec![(200, "{\"choices\": []}".into())]);
    let client = http_client(url, "SPECFORGE_TEST_KEY_BAD", 0);
    assert!(matches!(client.chat(&[Message::new("user", "u")]), Err(LlmError::Malformed(_))));
}
