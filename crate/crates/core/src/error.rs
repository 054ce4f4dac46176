use std::io;

use crate::site::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite {quantity} from term `{term}` anchored at {base}")]
    NonFinite {
        term: String,
        base: Site,
        quantity: &'static str,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("resonant mode {mode:?}: divisor {divisor:e} is below the floor {floor:e}")]
    Resonance {
        mode: Vec<i64>,
        divisor: f64,
        floor: f64,
    },

    #[error("hull Newton iteration did not converge at epsilon = {epsilon:e} (residual history {history:?})")]
    Convergence { epsilon: f64, history: Vec<f64> },

    #[error("window minimization did not converge after {iterations} iterations (gradient history {trajectory:?})")]
    Search {
        iterations: usize,
        trajectory: Vec<f64>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("foliation member beta = {beta} rejected: residual {residual:e} at site {site}")]
    MemberRejected { beta: f64, site: Site, residual: f64 },

    #[error("no path between {from} and {to} inside the window")]
    Unreachable { from: Site, to: Site },

    #[error("hypothesis `{name}` failed: {detail}")]
    Hypothesis { name: String, detail: String },

    #[error("contact counterexample at site {site}: eta = {eta:e}, certified bound = {bound:e}")]
    Counterexample { site: Site, eta: f64, bound: f64 },

    #[error("contact propagation stalled; unreached sites {unreached:?}")]
    Stall { unreached: Vec<Site> },

    #[error("format error: {0}")]
    Format(String),

    #[error("missing input file {0}")]
    MissingInput(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable tag used in JSON error reports and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::Contract(_) => "contract",
            Error::InvalidModel(_) => "invalid_model",
            Error::Resonance { .. } => "resonance",
            Error::Convergence { .. } => "convergence",
            Error::Search { .. } => "search",
            Error::Precondition(_) => "precondition",
            Error::MemberRejected { .. } => "member_rejected",
            Error::Unreachable { .. } => "unreachable",
            Error::Hypothesis { .. } => "hypothesis",
            Error::Counterexample { .. } => "counterexample",
            Error::Stall { .. } => "stall",
            Error::Format(_) => "format",
            Error::MissingInput(_) => "missing_input",
            Error::Io(_) => "io",
        }
    }
}
