//! End-to-end pipeline and the run report.

use crate::analysis::{build_call_graph, infer_rte_assertions};
use crate::lang::{parse_program, Program};
use crate::llm::{hybrid, FixtureTransport, HttpTransport, LlmClient, LlmConfig, LlmCosts, LlmError, LlmProposer, Transport};
use crate::spec::{PropertyLedger, Property};
use crate::synth::{synthesize, Proposer, ProposerKind, SynthesisConfig, TemplateProposer, UnitRecord};
use crate::verifier::Status;
use crate::vunits::{construct_vunits, VUnitQueue};
use serde::Serialize;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl PipelineError {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Parse(_) => "parse",
            PipelineError::Llm(_) => "llm",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub synth: SynthesisConfig,
    pub llm: LlmConfig,
    /// Replay replies from this file instead of calling the endpoint.
    pub llm_fixture: Option<PathBuf>,
    /// Request/response logs of the model client.
    pub llm_log_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub rte: usize,
    pub total_vunits: usize,
    pub verified_vunits: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Costs {
    pub verifier_calls: usize,
    pub candidate_checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmCosts>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub program: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    pub proposer: ProposerKind,
    pub iter: usize,
    pub counts: Counts,
    pub ledger: PropertyLedger,
    pub timeline: Vec<UnitRecord>,
    pub wall_time_ms: u64,
    pub costs: Costs,
}

impl RunReport {
    pub fn rte_free(&self) -> bool {
        self.ledger.h.is_empty()
    }

    /// `0` exactly when `H` is empty.
    pub fn exit_code(&self) -> i32 {
        if self.rte_free() {
            0
        } else {
            1
        }
    }
}

fn client(cfg: &PipelineConfig, transport: Option<Box<dyn Transport>>) -> Result<Arc<LlmClient>, PipelineError> {
    cfg.llm.validate()?;
    let t: Box<dyn Transport> = match (transport, &cfg.llm_fixture) {
        (Some(t), _) => t,
        (None, Some(path)) => Box::new(FixtureTransport::load(path)?),
        (None, None) => Box::new(HttpTransport),
    };
    let mut c = LlmClient::new(cfg.llm.clone(), t);
    c.log_dir = cfg.llm_log_dir.clone();
    Ok(Arc::new(c))
}

/// Parse, analyze, plan and synthesize. With the template proposer no model
/// client is ever built, so `transport` is unused.
pub fn run_pipeline(
    name: &str,
    source: &str,
    cfg: &PipelineConfig,
    transport: Option<Box<dyn Transport>>,
) -> Result<RunReport, PipelineError> {
    let start = Instant::now();
    let prog = parse_program(source).map_err(|e| PipelineError::Parse(e.to_string()))?;
    let (mut proposer, llm): (Box<dyn Proposer>, Option<Arc<LlmClient>>) = match cfg.synth.proposer {
        ProposerKind::Template => (Box::new(TemplateProposer::new()), None),
        ProposerKind::Llm => {
            let c = client(cfg, transport)?;
            (Box::new(LlmProposer::new(c.clone())), Some(c))
        }
        ProposerKind::Hybrid => {
            let c = client(cfg, transport)?;
            (Box::new(hybrid(c.clone())), Some(c))
        }
    };
    let (a, out) = run_synthesis(&prog, &cfg.synth, proposer.as_mut());
    let verified = out.timeline.iter().filter(|r| r.verdict == Status::True).count();
    let costs = Costs {
        verifier_calls: out.timeline.iter().map(|r| r.verifier_calls).sum(),
        candidate_checks: out.timeline.iter().map(|r| r.candidate_checks).sum(),
        llm: llm.map(|c| c.costs()),
    };
    Ok(RunReport {
        program: name.to_string(),
        input_sha256: None,
        proposer: cfg.synth.proposer,
        iter: cfg.synth.iter,
        counts: Counts { rte: a.len(), total_vunits: out.timeline.len(), verified_vunits: verified },
        ledger: out.ledger,
        timeline: out.timeline,
        wall_time_ms: start.elapsed().as_millis() as u64,
        costs,
    })
}

fn run_synthesis(
    prog: &Program,
    cfg: &SynthesisConfig,
    proposer: &mut dyn Proposer,
) -> (Vec<Property>, crate::synth::SynthesisOutcome) {
    let g = build_call_graph(prog);
    let a = infer_rte_assertions(prog);
    let q = VUnitQueue::new(construct_vunits(prog, &a, &g), &g);
    let out = synthesize(q, prog, &g, &a, cfg, proposer);
    (a, out)
}
