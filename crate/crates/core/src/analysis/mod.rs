//! Phase-1 static analysis: RTE guard inference and the call graph.

pub mod absint;
pub mod callgraph;
pub mod interval;

pub use absint::{analyze_intervals, infer_rte_assertions, AbsState, ArrayAbs, Env, InitAbs, ScalarAbs};
pub use callgraph::{build_call_graph, CallGraph, CallSites};
pub use interval::Interval;
