pub mod ema;
pub mod eval;
pub mod filter;
pub mod prompts;
pub mod proto_loss;
pub mod prototypes;
pub mod refine;
pub mod stats;

/// How a command ended: `failed` counts records that errored.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub failed: usize,
}

impl Outcome {
    pub fn ok() -> Self {
        Outcome { failed: 0 }
    }

    pub fn success(&self) -> bool {
        self.failed == 0
    }
}
