//! Exponential-weights forecasting over a finite expert set.
//!
//! The forecaster keeps cumulative losses and derives its weight vector
//! lazily: `w_i ∝ exp(-eta_t * G_i)` where `G_i` is expert `i`'s cumulative
//! loss and `eta_t` comes from the configured [`Schedule`]. Exponentiation
//! always subtracts the minimum cumulative loss first, so weights stay finite
//! for arbitrarily long runs without changing any argmax.

use crate::{Error, Result};

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// Fixed rate, the usual choice when the horizon is known up front.
    Constant { rate: f64 },
    /// `scale / sqrt(t)`, which adapts to stochastic losses and needs no
    /// horizon.
    Decreasing { scale: f64 },
}

impl Schedule {
    /// Horizon-tuned constant rate `sqrt(ln(num_experts) / horizon)`.
    pub fn constant_for(num_experts: usize, horizon: u64) -> Self {
        let rate = ((num_experts as f64).ln() / (horizon.max(1) as f64)).sqrt();
        Schedule::Constant { rate }
    }

    /// Decreasing schedule with scale `sqrt(ln(num_experts))`.
    pub fn decreasing_for(num_experts: usize) -> Self {
        Schedule::Decreasing {
            scale: (num_experts as f64).ln().sqrt(),
        }
    }

    fn rate_at(&self, completed_rounds: u64) -> f64 {
        match *self {
            Schedule::Constant { rate } => rate,
            Schedule::Decreasing { scale } => scale / (completed_rounds.max(1) as f64).sqrt(),
        }
    }
}

/// Weight state for one expert panel.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeState {
    cumulative_losses: Vec<f64>,
    schedule: Schedule,
    round: u64,
    loss_bound: Option<f64>,
}

impl HedgeState {
    pub fn new(num_experts: usize, schedule: Schedule) -> Result<Self> {
        if num_experts == 0 {
            return Err(Error::InvalidConfig(
                "hedge needs at least one expert".into(),
            ));
        }
        Ok(Self {
            cumulative_losses: vec![0.0; num_experts],
            schedule,
            round: 0,
            loss_bound: None,
        })
    }

    /// Declares the per-round loss range `[0, bound]`; updates outside it are
    /// rejected, which catches miscalibrated loss feeds early.
    pub fn with_loss_bound(mut self, bound: f64) -> Self {
        self.loss_bound = Some(bound);
        self
    }

    pub fn num_experts(&self) -> usize {
        self.cumulative_losses.len()
    }

    /// Completed updates so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative_losses
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    /// Current probability vector over experts: the softmax of
    /// `-eta_t * cumulative_losses`, stabilized by shifting the minimum
    /// cumulative loss to zero before exponentiation.
    pub fn weights(&self) -> Vec<f64> {
        let eta = self.schedule.rate_at(self.round);
        let min = self
            .cumulative_losses
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mut weights: Vec<f64> = self
            .cumulative_losses
            .iter()
            .map(|&g| (-eta * (g - min)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        weights
    }

    /// Adds one round of losses. Weight recomputation stays lazy, so two
    /// updates compose exactly like their sum under a constant schedule.
    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.cumulative_losses.len() {
            return Err(Error::LengthMismatch {
                expected: self.cumulative_losses.len(),
                got: losses.len(),
            });
        }
        for &l in losses {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidLoss(format!("loss {l} is not in [0, bound]")));
            }
            if let Some(bound) = self.loss_bound {
                if l > bound {
                    return Err(Error::InvalidLoss(format!(
                        "loss {l} exceeds the declared bound {bound}"
                    )));
                }
            }
        }
        for (g, &l) in self.cumulative_losses.iter_mut().zip(losses) {
            *g += l;
        }
        self.round += 1;
        Ok(())
    }
}

/// Realized regret against the best fixed expert: the sum of the recorded
/// per-round mixture losses minus the smallest cumulative expert loss.
pub fn regret_to_best(state: &HedgeState, mixture_losses: &[f64]) -> Result<f64> {
    if mixture_losses.len() as u64 != state.round {
        return Err(Error::RoundCountMismatch {
            expected: state.round,
            got: mixture_losses.len() as u64,
        });
    }
    let best = state
        .cumulative_losses
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(mixture_losses.iter().sum::<f64>() - best)
}
