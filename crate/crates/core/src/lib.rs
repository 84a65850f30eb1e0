//! Runtime-error-guided specification synthesis for MiniC.

// Term/Pred/Interval constructors are named after the operators they build.
#![allow(clippy::should_implement_trait)]

pub mod lang;
pub mod spec;
pub mod analysis;
pub mod gen;
pub mod llm;
pub mod metrics;
pub mod report;
pub mod synth;
pub mod verifier;
pub mod vunits;
