use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("chain is reducible: state {to} is not reachable from state {from}")]
    Reducible { from: usize, to: usize },

    #[error("chain is periodic with period {period}")]
    Periodic { period: usize },

    #[error("channel is not degraded (max composition residual {residual:.3e}); this computation requires (X,S) -> Y -> Z")]
    NotDegraded { residual: f64 },

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("axis sets overlap on `{0}`")]
    OverlappingAxes(String),

    #[error("joint law violates the Markov chain {chain} (residual {residual:.3e})")]
    Factorization { chain: &'static str, residual: f64 },

    #[error("joint law is inconsistent with the channel law (residual {residual:.3e})")]
    ChannelMismatch { residual: f64 },

    #[error("size guardrail exceeded for {what}: {estimate} (limit {limit})")]
    Guardrail {
        what: &'static str,
        estimate: u128,
        limit: u128,
    },
}
