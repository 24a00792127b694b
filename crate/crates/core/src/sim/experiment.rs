use rayon::prelude::*;
use serde::Serialize;

use super::hashing::splitmix64;
use super::session::{measure_sum_rate, run_session, SessionErrorKind};
use super::{SimParams, Strategy};
use crate::error::{Error, Result};
use crate::info::{JointPmf, SensorSet};
use crate::maxent::Cover;

/// z-value of a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Seed of trial `trial` under `master`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut state = master ^ (trial as u64).wrapping_mul(0xA076_1D64_78BD_642F);
    splitmix64(&mut state)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub honest_error: bool,
    pub session_error: Option<SessionErrorKind>,
    pub sum_rate: f64,
    pub final_cover: Cover,
    /// Some member of the final cover contains a traitor.
    pub traitor_in_final_cover: bool,
    pub exposed: SensorSet,
}

/// Runs independent sessions, seeded from `params.seed`, on at most
/// `threads` worker threads (the global pool if `None`). Outcomes are in
/// trial order regardless of scheduling.
pub fn run_trials(
    p: &JointPmf,
    params: &SimParams,
    traitors: SensorSet,
    strategy: Strategy,
    q_tilde: Option<&JointPmf>,
    trials: usize,
    threads: Option<usize>,
) -> Result<Vec<TrialOutcome>> {
    params.validate(p.num_sensors())?;
    let one = |trial: usize| -> Result<TrialOutcome> {
        let seed = trial_seed(params.seed, trial);
        let trial_params = SimParams {
            seed,
            ..params.clone()
        };
        let report = run_session(p, &trial_params, traitors, strategy, q_tilde)?;
        Ok(TrialOutcome {
            trial,
            seed,
            honest_error: report.honest_error,
            session_error: report.session_error,
            sum_rate: measure_sum_rate(&report),
            traitor_in_final_cover: report
                .final_cover
                .sets()
                .iter()
                .any(|s| !s.is_disjoint(traitors)),
            final_cover: report.final_cover,
            exposed: report.exposed,
        })
    };
    let run = || {
        (0..trials)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>>>()
    };
    match threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker threads: {e}")))?
            .install(run),
    }
}

/// Point estimate with a 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    fn wilson(successes: usize, n: usize) -> Self {
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                ci_low: 0.0,
                ci_high: 1.0,
            };
        }
        let nf = n as f64;
        let phat = successes as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let centre = (phat + z2 / (2.0 * nf)) / denom;
        let half = Z95 * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Estimate {
            mean: phat,
            ci_low: (centre - half).max(0.0),
            ci_high: (centre + half).min(1.0),
        }
    }

    fn normal(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let half = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Z95 * (var / n).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub honest_error_rate: Estimate,
    pub session_error_rate: Estimate,
    pub ambiguous: usize,
    pub no_surviving_cover: usize,
    pub sum_rate: Estimate,
    pub traitor_in_final_cover_rate: Estimate,
}

pub fn summarize(outcomes: &[TrialOutcome]) -> TrialSummary {
    let n = outcomes.len();
    let count = |f: &dyn Fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let rates: Vec<f64> = outcomes.iter().map(|o| o.sum_rate).collect();
    TrialSummary {
        trials: n,
        honest_error_rate: Estimate::wilson(count(&|o| o.honest_error), n),
        session_error_rate: Estimate::wilson(count(&|o| o.session_error.is_some()), n),
        ambiguous: count(&|o| o.session_error == Some(SessionErrorKind::Ambiguous)),
        no_surviving_cover: count(&|o| o.session_error == Some(SessionErrorKind::NoSurvivingCover)),
        sum_rate: Estimate::normal(&rates),
        traitor_in_final_cover_rate: Estimate::wilson(count(&|o| o.traitor_in_final_cover), n),
    }
}
