//! MiniSpec: predicates, properties, annotation parsing and trace oracles.

pub mod eval;
pub mod oracle;
pub mod parse;
pub mod pred;
pub mod property;

pub use eval::{eval_predicate, Binding, EvalError};
pub use oracle::{
    check_rte_freeness, holds_at, oracle_valid_under, trace_reaches, trace_satisfies, Freeness, OracleConfig,
    TraceSet,
};
pub use parse::{parse_clauses, parse_predicate, Clause, LabeledClause};
pub use pred::{BinOpT, Cmp, Pred, Term};
pub use property::{
    clause_location, clause_property, parse_annotations, scope_check, Origin, PropKind, Property,
    PropertyLedger, ScopeRules,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("annotation syntax error at line {line}: {msg}")]
    Syntax { line: u32, msg: String },
    #[error("scope error at {loc}: {msg}")]
    Scope { ident: String, loc: String, msg: String },
    #[error("oracle inconclusive: {truncated} trace(s) exceeded the step budget")]
    OracleInconclusive { truncated: usize },
    #[error("oracle setup failed: {0}")]
    Oracle(String),
}
