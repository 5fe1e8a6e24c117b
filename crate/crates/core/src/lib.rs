//! Ski-rental strategies that tolerate noisy cost inputs, plus the online
//! learning loop that produces those inputs from a panel of predictors.
//!
//! The crate has three layers:
//!
//! * [`ski`] — a single rent-or-buy instance: the randomized buy-day rule,
//!   the radius of cost perturbations it absorbs, and exact expected-cost
//!   and competitive-ratio calculators.
//! * [`hedge`] and [`experts`] — exponential-weights forecasters and the
//!   synthetic predictor panels they are run against.
//! * [`learner`] and [`experiments`] — the round-by-round learner that wires
//!   both panels together, and reproducible Monte-Carlo harnesses for the
//!   competitive-ratio and regret studies.
//!
//! Everything that consumes randomness takes a caller-owned RNG; seeds are
//! derived deterministically (see [`seed`]), so every run is replayable.
//!
//! The `book/` directory in the repository holds a longer guide; its code
//! snippets are compiled and run as part of `cargo test --doc`.

pub mod experiments;
pub mod experts;
pub mod hedge;
pub mod learner;
pub mod seed;
pub mod ski;

pub use experts::{draw_instance, linspace, BuyExpertPanel, SkiExpertPanel};
pub use hedge::{HedgeState, Schedule};
pub use learner::{LearnerConfig, LossMode, RoundRecord, RunTrace, SequentialLearner};
pub use ski::{nint, robustness_radius, Branch, BuyDayDistribution, SkiRentalInstance};

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite input {0}")]
    NonFinite(f64),
    #[error("invalid hyper-parameter: {0}")]
    InvalidHyperparameter(String),
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("probabilities sum to {0} before renormalization, expected 1 within 1e-9")]
    BadNormalization(f64),
    #[error("loss vector has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid loss: {0}")]
    InvalidLoss(String),
    #[error("recorded {got} mixture losses for {expected} completed rounds")]
    RoundCountMismatch { expected: u64, got: u64 },
    #[error(
        "rejection sampling gave up after {0} attempts; variance is far above the noise bound"
    )]
    RejectionCapExhausted(u32),
}

pub type Result<T> = std::result::Result<T, Error>;

// The guide chapters double as doctests so the book can never drift from the
// API. Requires the file layout of the repository checkout.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ski-rental.md")]
    mod ski_rental {}
    #[doc = include_str!("../../../book/src/hedge.md")]
    mod hedge {}
    #[doc = include_str!("../../../book/src/sequential-learner.md")]
    mod sequential_learner {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
