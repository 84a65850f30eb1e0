//! Success rate and human-effort reduction over repeated runs.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsInput {
    /// Verified V-Units, one entry per run.
    pub verified: Vec<u64>,
    pub total: u64,
    #[serde(default)]
    pub std_specs: Option<u64>,
    /// Modified specifications, one entry per run.
    #[serde(default)]
    pub modified: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("division by zero: {0}")]
    DivisionByZeroConfig(&'static str),
    #[error("{0}")]
    Invalid(String),
}

/// An exact percentage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Percent(pub Ratio<i128>);

impl Percent {
    /// Tenths of a percent, rounded half away from zero.
    pub fn tenths(self) -> i128 {
        let x = self.0 * Ratio::from_integer(1000);
        let r = x.round();
        r.to_integer()
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.tenths();
        let sign = if t < 0 { "-" } else { "" };
        write!(f, "{sign}{}.{}%", t.abs() / 10, t.abs() % 10)
    }
}

fn n_runs(m: &MetricsInput) -> Result<i128, MetricsError> {
    if m.verified.is_empty() {
        return Err(MetricsError::Invalid("at least one run is required".into()));
    }
    Ok(m.verified.len() as i128)
}

/// `Σ verified / (n · total)`.
pub fn avg_sr(m: &MetricsInput) -> Result<Percent, MetricsError> {
    let n = n_runs(m)?;
    if m.total == 0 {
        return Err(MetricsError::DivisionByZeroConfig("total #V-Unit is 0"));
    }
    if let Some(v) = m.verified.iter().find(|v| **v > m.total) {
        return Err(MetricsError::Invalid(format!("verified count {v} exceeds total {}", m.total)));
    }
    let sum: i128 = m.verified.iter().map(|v| *v as i128).sum();
    Ok(Percent(Ratio::new(sum, n * m.total as i128)))
}

/// `1 − Σ modified / (n · std)`.
pub fn avg_her(m: &MetricsInput) -> Result<Percent, MetricsError> {
    let n = n_runs(m)?;
    let std = m.std_specs.ok_or(MetricsError::Invalid("std #Spec is missing".into()))?;
    let modified = m.modified.as_ref().ok_or(MetricsError::Invalid("modified #Spec is missing".into()))?;
    if std == 0 {
        return Err(MetricsError::DivisionByZeroConfig("std #Spec is 0"));
    }
    if modified.len() as i128 != n {
        return Err(MetricsError::Invalid(format!("{} modified counts for {n} runs", modified.len())));
    }
    let sum: i128 = modified.iter().map(|v| *v as i128).sum();
    Ok(Percent(Ratio::from_integer(1) - Ratio::new(sum, n * std as i128)))
}
