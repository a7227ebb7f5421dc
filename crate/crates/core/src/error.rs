use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// `q <= λ/μ`: the purchased blocks cannot keep up with the arrival rate.
    #[error("unstable queue: arrival rate {lambda} needs more than {crbs} CRBs at service rate {mu}")]
    UnstableQueue { lambda: f64, mu: f64, crbs: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {}", format_violations(.0))]
    InvalidScenario(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
