//! Simulation of the multiround variable-rate protocol.
//!
//! Each round covers a fresh block of `k` source symbols and has one phase
//! per sensor. In a phase the decoder polls one sensor for successive
//! `ceil(k epsilon)`-bit hashes of its sequence, widening the target set by
//! `epsilon` bits per symbol each time, until exactly one candidate
//! remains. After the last phase the decoder discards every candidate
//! honest set on which the decoded sequences are atypical.

mod adversary;
pub mod experiment;
pub mod hashing;
mod session;
pub mod target;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::typicality::TypicalityParams;

pub use experiment::{run_trials, summarize, trial_seed, Estimate, TrialOutcome, TrialSummary};
pub use session::{
    decode_phase, measure_sum_rate, prune_cover, run_session, DecodeResult, PhaseOutcome,
    PhaseQuery, PhaseRecord, RoundRecord, SessionErrorKind, SessionReport, TransactionRecord,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Symbols per round.
    pub k: usize,
    pub rounds: usize,
    /// Rate increment per transaction and base typicality tolerance.
    pub epsilon: f64,
    /// Number of binning functions a sensor chooses from in each phase.
    pub functions: usize,
    pub seed: u64,
    /// Largest number of traitors the decoder guards against.
    pub t: usize,
    /// Tolerance of the end-of-round typicality test; `2 epsilon` if unset.
    pub typicality_eps: Option<f64>,
}

impl SimParams {
    pub fn new(
        k: usize,
        rounds: usize,
        epsilon: f64,
        functions: usize,
        seed: u64,
        t: usize,
    ) -> Self {
        SimParams {
            k,
            rounds,
            epsilon,
            functions,
            seed,
            t,
            typicality_eps: None,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k == 0 {
            return invalid("k must be at least 1");
        }
        if self.rounds == 0 {
            return invalid("rounds must be at least 1");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.functions == 0 {
            return invalid("the number of binning functions must be at least 1");
        }
        if self.t >= m {
            return invalid(format!(
                "t = {} must be below the number of sensors {m}",
                self.t
            ));
        }
        if let Some(e) = self.typicality_eps {
            if !(e.is_finite() && e > 0.0) {
                return invalid(format!("typicality tolerance must be positive, got {e}"));
            }
        }
        if self.hash_bits() == 0 {
            return invalid("k * epsilon is too small");
        }
        Ok(())
    }

    /// Hash bits per transaction, `ceil(k epsilon)`.
    pub fn hash_bits(&self) -> u32 {
        (self.k as f64 * self.epsilon - 1e-9).ceil().max(0.0) as u32
    }

    /// Bits announcing the chosen function index, `ceil(log2 C)`.
    pub fn index_bits(&self) -> u32 {
        match self.functions {
            0 | 1 => 0,
            c => usize::BITS - (c - 1).leading_zeros(),
        }
    }

    pub fn prune_eps(&self) -> f64 {
        self.typicality_eps.unwrap_or(2.0 * self.epsilon)
    }

    pub fn typicality(&self) -> Result<TypicalityParams> {
        TypicalityParams::new(self.epsilon)
    }
}

/// How the traitors behave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Follow the protocol on the true sources.
    Honest,
    /// Send uniformly random function indices and hashes.
    Gibberish,
    /// Replace the traitors' sources by draws from `q~(x_T | x_H)` and then
    /// follow the protocol.
    Fabricate,
    /// Precompute a sequence that collides with an honest sensor's first
    /// hash under function index 0, report it as the traitor's own, and
    /// plant it as a candidate for the honest sensor.
    Collide,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "honest" => Ok(Strategy::Honest),
            "gibberish" => Ok(Strategy::Gibberish),
            "fabricate" => Ok(Strategy::Fabricate),
            "collide" => Ok(Strategy::Collide),
            other => invalid(format!(
                "unknown strategy {other:?}, expected honest, gibberish, fabricate or collide"
            )),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Honest => "honest",
            Strategy::Gibberish => "gibberish",
            Strategy::Fabricate => "fabricate",
            Strategy::Collide => "collide",
        })
    }
}
