mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use specforge::analysis::{build_call_graph, infer_rte_assertions};
use specforge::gen::{random_program, GenConfig};
use specforge::lang::{parse_program, InputDomain, InputValue, Program};
use specforge::metrics::{avg_her, avg_sr, MetricsInput};
use specforge::report::{run_pipeline, PipelineConfig};
use specforge::spec::{oracle_valid_under, parse_annotations, OracleConfig, Property, SpecError};
use specforge::synth::ProposerKind;
use specforge::verifier::{Backend, SolverConfig, Verifier};
use specforge::vunits::{construct_vunits, VUnitQueue};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "specforge", version, about = "RTE-guided specification synthesis for MiniC")]
struct Cli {
    /// Settings file; defaults to ./specforge.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also write the JSON output to this file.
    #[arg(long, global = true, value_name = "OUT")]
    json: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full pipeline: analysis, V-Units, synthesis. Exit 0 iff H is empty.
    Run(RunArgs),
    /// RTE guard assertions and the call graph.
    Analyze {
        file: PathBuf,
        /// Print the call graph in DOT instead of JSON.
        #[arg(long)]
        dot: bool,
    },
    /// The prioritized V-Unit queue.
    Plan { file: PathBuf },
    /// Verify every annotation and guard of an annotated file, each under all others.
    Check {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Brute-force validity of a property under hypotheses.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long = "hypo")]
        hypos: Vec<String>,
        /// Entry function; defaults to `main`.
        #[arg(long)]
        entry: Option<String>,
        /// `x=-1,0,1` or `a=[1,2],[]`; repeatable.
        #[arg(long = "domain")]
        domain: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
    },
    /// Average success rate and human-effort reduction over repeated runs.
    Metrics {
        /// Verified V-Units per run, comma separated.
        #[arg(long, value_delimiter = ',')]
        verified: Vec<u64>,
        #[arg(long)]
        total: u64,
        #[arg(long = "std")]
        std_specs: Option<u64>,
        /// Modified specifications per run, comma separated.
        #[arg(long, value_delimiter = ',')]
        modified: Option<Vec<u64>>,
    },
    /// Print a random MiniC program with its input domain.
    Gen {
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProposerArg {
    Template,
    Llm,
    Hybrid,
}

#[derive(Args, Default)]
struct SolverArgs {
    /// External SMT-LIB solver, e.g. `z3 -in`; the internal prover runs first.
    #[arg(long)]
    solver_cmd: Option<String>,
    #[arg(long)]
    solver_timeout_ms: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    proposer: Option<ProposerArg>,
    #[arg(long)]
    iter: Option<usize>,
    #[arg(long)]
    syntax_fix_attempts: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write every proof obligation (.txt and .smt2) into the run directory.
    #[arg(long)]
    emit_obligations: bool,
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long)]
    llm_fixture: Option<PathBuf>,
    /// Environment variable holding the API key.
    #[arg(long)]
    llm_key_env: Option<String>,
    #[arg(long)]
    llm_temperature: Option<f64>,
    /// Accepted for uniformity; runs with the template proposer are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Parent of the per-run directories.
    #[arg(long)]
    runs_dir: Option<PathBuf>,
    /// Do not create a run directory.
    #[arg(long)]
    no_persist: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok((out, code)) => {
            let text = serde_json::to_string_pretty(&out).unwrap_or_default();
            if let Some(p) = &cli.json {
                if let Err(e) = std::fs::write(p, &text) {
                    return fail(&anyhow!("{}: {e}", p.display()));
                }
            }
            match out.get("dot").and_then(Value::as_str) {
                Some(dot) => emit(dot.trim_end()),
                None => emit(&text),
            }
            ExitCode::from(code)
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &anyhow::Error) -> ExitCode {
    let kind = e.downcast_ref::<Kind>().map(|k| k.0);
    let msg: Vec<String> = e.chain().filter(|c| Some(c.to_string().as_str()) != kind).map(|c| c.to_string()).collect();
    let msg = msg.join(": ");
    emit(&json!({ "error": { "kind": kind.unwrap_or("error"), "message": msg } }).to_string());
    ExitCode::from(2)
}

/// Writes a line to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Error category for the error JSON.
#[derive(Debug)]
struct Kind(&'static str);

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0)
    }
}

impl std::error::Error for Kind {}

fn read(file: &Path) -> Result<String> {
    std::fs::read_to_string(file).map_err(|e| anyhow!("{}: {e}", file.display()).context(Kind("io")))
}

fn parse(src: &str) -> Result<Program> {
    parse_program(src).map_err(|e| anyhow!("{e}").context(Kind("parse")))
}

fn dispatch(cli: &Cli) -> Result<(Value, u8)> {
    let fc = config::load(cli.config.as_deref()).context(Kind("config"))?;
    match &cli.cmd {
        Cmd::Run(args) => cmd_run(args, &fc),
        Cmd::Analyze { file, dot } => {
            let prog = parse(&read(file)?)?;
            let g = build_call_graph(&prog);
            if *dot {
                return Ok((json!({ "dot": g.to_dot() }), 0));
            }
            let a = infer_rte_assertions(&prog);
            Ok((json!({ "assertions": a, "call_graph": g }), 0))
        }
        Cmd::Plan { file } => {
            let prog = parse(&read(file)?)?;
            let g = build_call_graph(&prog);
            let a = infer_rte_assertions(&prog);
            let q = VUnitQueue::new(construct_vunits(&prog, &a, &g), &g);
            Ok((json!({ "units": q.plan() }), 0))
        }
        Cmd::Check { file, solver } => cmd_check(file, solver, &fc),
        Cmd::Oracle { file, target, hypos, entry, domain, max_steps } => {
            cmd_oracle(file, target, hypos, entry.clone(), domain, *max_steps)
        }
        Cmd::Metrics { verified, total, std_specs, modified } => {
            let m = MetricsInput { verified: verified.clone(), total: *total, std_specs: *std_specs, modified: modified.clone() };
            let sr = avg_sr(&m).context(Kind("metrics"))?;
            let her = match (&m.std_specs, &m.modified) {
                (None, None) => None,
                _ => Some(avg_her(&m).context(Kind("metrics"))?),
            };
            Ok((json!({ "avg_sr": sr.to_string(), "avg_her": her.map(|h| h.to_string()) }), 0))
        }
        Cmd::Gen { seed } => {
            let seed = seed.or(fc.seed).unwrap_or(0);
            let g = random_program(seed, &GenConfig::default());
            Ok((json!({ "seed": seed, "source": g.source, "domain": domain_json(&g.domain) }), 0))
        }
    }
}

fn backend(solver: &SolverArgs, fc: &config::FileConfig) -> Backend {
    match solver.solver_cmd.clone().or(fc.solver_cmd.clone()) {
        Some(cmd) => {
            let ms = solver.solver_timeout_ms.or(fc.solver_timeout_ms).unwrap_or(10_000);
            Backend::Portfolio(SolverConfig::new(&cmd, Duration::from_millis(ms)))
        }
        None => Backend::Internal,
    }
}

fn cmd_run(args: &RunArgs, fc: &config::FileConfig) -> Result<(Value, u8)> {
    let src = read(&args.file)?;
    let hash = hex::encode(Sha256::digest(src.as_bytes()));
    let proposer = match args.proposer {
        Some(ProposerArg::Template) => ProposerKind::Template,
        Some(ProposerArg::Llm) => ProposerKind::Llm,
        Some(ProposerArg::Hybrid) => ProposerKind::Hybrid,
        None => match fc.proposer.as_deref() {
            None | Some("template") => ProposerKind::Template,
            Some("llm") => ProposerKind::Llm,
            Some("hybrid") => ProposerKind::Hybrid,
            Some(p) => bail!(anyhow!("unknown proposer `{p}` in config").context(Kind("config"))),
        },
    };
    let run_dir = if args.no_persist {
        None
    } else {
        let base = args.runs_dir.clone().or(fc.runs_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));
        let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f");
        let dir = base.join(format!("{stamp}-{}", &hash[..8]));
        std::fs::create_dir_all(&dir).map_err(|e| anyhow!("{}: {e}", dir.display()).context(Kind("io")))?;
        Some(dir)
    };
    let mut cfg = PipelineConfig::default();
    cfg.synth.proposer = proposer;
    cfg.synth.iter = args.iter.or(fc.iter).unwrap_or(cfg.synth.iter).max(1);
    cfg.synth.syntax_fix_attempts = args.syntax_fix_attempts.or(fc.syntax_fix_attempts).unwrap_or(cfg.synth.syntax_fix_attempts);
    cfg.synth.backend = backend(&args.solver, fc);
    if args.emit_obligations || fc.emit_obligations == Some(true) {
        cfg.synth.dump_dir = Some(run_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join("obligations"));
    }
    let l = &fc.llm;
    let d = cfg.llm.clone();
    cfg.llm.endpoint = args.llm_endpoint.clone().or(l.endpoint.clone()).unwrap_or(d.endpoint);
    cfg.llm.model = args.llm_model.clone().or(l.model.clone()).unwrap_or(d.model);
    cfg.llm.api_key_env = args.llm_key_env.clone().or(l.key_env.clone()).unwrap_or(d.api_key_env);
    cfg.llm.temperature = args.llm_temperature.or(l.temperature).unwrap_or(d.temperature);
    cfg.llm.max_tokens = l.max_tokens.unwrap_or(d.max_tokens);
    cfg.llm.timeout_ms = l.timeout_ms.unwrap_or(d.timeout_ms);
    cfg.llm.retries = l.retries.unwrap_or(d.retries);
    cfg.llm_fixture = args.llm_fixture.clone().or(l.fixture.clone());
    cfg.llm_log_dir = run_dir.as_ref().map(|d| d.join("llm"));

    let name = args.file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut report = run_pipeline(&name, &src, &cfg, None).map_err(|e| {
        let kind = e.kind();
        anyhow!("{e}").context(Kind(kind))
    })?;
    report.input_sha256 = Some(hash);
    let value = serde_json::to_value(&report)?;
    if let Some(dir) = &run_dir {
        let text = serde_json::to_string_pretty(&value)?;
        std::fs::write(dir.join("report.json"), text).context(Kind("io"))?;
        std::fs::write(dir.join("input.mc"), &src).context(Kind("io"))?;
    }
    Ok((value, report.exit_code() as u8))
}

fn annotated(file: &Path) -> Result<(Program, Vec<Property>)> {
    let src = read(file)?;
    let prog = parse(&src)?;
    let mut props = infer_rte_assertions(&prog);
    props.extend(parse_annotations(&src, &prog).map_err(|e| anyhow!("{e}").context(Kind("annotation")))?);
    Ok((prog, props))
}

fn cmd_check(file: &Path, solver: &SolverArgs, fc: &config::FileConfig) -> Result<(Value, u8)> {
    let (prog, props) = annotated(file)?;
    let v = Verifier::new(backend(solver, fc));
    let mut all_true = true;
    let results: Vec<Value> = props
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let others: Vec<Property> =
                props.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.clone()).collect();
            let verdict = v.verify(&prog, &others, p);
            all_true &= verdict.is_true();
            json!({ "property": p, "status": verdict.status, "feedback": verdict.feedback, "warnings": verdict.warnings })
        })
        .collect();
    Ok((json!({ "all_true": all_true, "results": results }), if all_true { 0 } else { 1 }))
}

fn parse_domain(specs: &[String]) -> Result<InputDomain> {
    let mut d = InputDomain::new();
    for s in specs {
        let (name, vals) = s.split_once('=').ok_or_else(|| anyhow!("domain `{s}` is not `name=values`"))?;
        let parsed: Value = serde_json::from_str(&format!("[{vals}]")).map_err(|e| anyhow!("domain `{s}`: {e}"))?;
        let items = parsed.as_array().cloned().unwrap_or_default();
        let to_i32 = |v: &Value| v.as_i64().and_then(|x| i32::try_from(x).ok()).ok_or_else(|| anyhow!("domain `{s}`: {v} is not an int"));
        let mut out = Vec::new();
        for it in &items {
            match it {
                Value::Array(xs) => out.push(InputValue::Array(xs.iter().map(to_i32).collect::<Result<_>>()?)),
                v => out.push(InputValue::Int(to_i32(v)?)),
            }
        }
        d.values.insert(name.trim().to_string(), out);
    }
    Ok(d)
}

fn domain_json(d: &InputDomain) -> Value {
    let m: serde_json::Map<String, Value> = d
        .values
        .iter()
        .map(|(k, vs)| {
            let vs: Vec<Value> = vs
                .iter()
                .map(|v| match v {
                    InputValue::Int(x) => json!(x),
                    InputValue::Array(xs) => json!(xs),
                })
                .collect();
            (k.clone(), Value::Array(vs))
        })
        .collect();
    Value::Object(m)
}

fn cmd_oracle(
    file: &Path,
    target: &str,
    hypos: &[String],
    entry: Option<String>,
    domain: &[String],
    max_steps: usize,
) -> Result<(Value, u8)> {
    let (prog, props) = annotated(file)?;
    let find = |id: &str| {
        props.iter().find(|p| p.id == id).cloned().ok_or_else(|| anyhow!("no property `{id}`").context(Kind("usage")))
    };
    let q = find(target)?;
    let hyps: Vec<Property> = hypos.iter().map(|h| find(h)).collect::<Result<_>>()?;
    let cfg = OracleConfig { entry, domain: parse_domain(domain).context(Kind("usage"))?, max_steps };
    match oracle_valid_under(&prog, &hyps, &q, &cfg) {
        Ok(valid) => Ok((json!({ "target": target, "hypotheses": hypos, "valid": valid }), if valid { 0 } else { 1 })),
        Err(e @ SpecError::OracleInconclusive { .. }) => Err(anyhow!("{e}").context(Kind("inconclusive"))),
        Err(e) => Err(anyhow!("{e}").context(Kind("oracle"))),
    }
}
