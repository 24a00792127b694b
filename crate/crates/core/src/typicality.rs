//! Empirical types, strong typicality and the decoder's target sets.

use crate::error::{invalid, Error, Result};
use crate::info::{JointPmf, SensorSet, SequenceBlock};

/// Slack on conditional-entropy comparisons, so that a type sitting
/// exactly on a threshold is accepted despite rounding.
pub const ENTROPY_SLACK: f64 = 1e-12;

/// The base tolerance `epsilon` together with the slacks derived from it:
/// `epsilon_prime = 2 epsilon` and `epsilon_dot = epsilon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypicalityParams {
    epsilon: f64,
}

impl TypicalityParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
        Ok(TypicalityParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn epsilon_prime(&self) -> f64 {
        2.0 * self.epsilon
    }

    pub fn epsilon_dot(&self) -> f64 {
        self.epsilon
    }
}

/// Occurrence counts of each symbol tuple over `s`, row-major over the
/// members of `s`.
pub fn type_counts(block: &SequenceBlock, s: SensorSet) -> Vec<u32> {
    let (symbols, alphabet) = block.joint_symbols(s);
    let mut counts = vec![0u32; alphabet];
    for x in symbols {
        counts[x as usize] += 1;
    }
    counts
}

/// The empirical distribution of the block restricted to `s`.
pub fn empirical_type(block: &SequenceBlock, s: SensorSet) -> Result<JointPmf> {
    if s.is_empty() || !s.within(block.num_sensors()) {
        return invalid(format!("set {s} is not a nonempty set of block sensors"));
    }
    let k = block.len() as f64;
    let probs = type_counts(block, s)
        .into_iter()
        .map(|n| n as f64 / k)
        .collect();
    let sizes = s.iter().map(|i| block.alphabet_sizes()[i]).collect();
    JointPmf::from_weights(sizes, probs)
}

fn counts_typical(counts: &[u32], k: usize, q: &[f64], eps: f64) -> bool {
    let k = k as f64;
    counts.iter().zip(q).all(|(&n, &qa)| {
        let f = n as f64 / k;
        if qa <= crate::info::ZERO_PROB && n > 0 {
            return false;
        }
        (f - qa).abs() <= eps
    })
}

/// Strong typicality of the block on `s` with respect to `q`, a pmf over
/// the members of `s`: every cell of the type is within `eps` of `q`, and
/// no tuple outside the support of `q` occurs.
///
/// # Panics
/// If `q`'s alphabets are not those of the members of `s`.
pub fn is_typical(block: &SequenceBlock, s: SensorSet, q: &JointPmf, eps: f64) -> bool {
    let sizes: Vec<usize> = s.iter().map(|i| block.alphabet_sizes()[i]).collect();
    assert_eq!(
        q.alphabet_sizes(),
        &sizes[..],
        "reference pmf does not match {s}"
    );
    counts_typical(&type_counts(block, s), block.len(), q.probs(), eps)
}

/// `true` iff the block is typical on every member of `cover` with respect
/// to the corresponding marginal of `p`. Vacuously true for an empty cover.
pub fn in_s_set(block: &SequenceBlock, p: &JointPmf, cover: &[SensorSet], eps: f64) -> bool {
    cover.iter().all(|&s| {
        !s.is_empty()
            && counts_typical(
                &type_counts(block, s),
                block.len(),
                &p.marginal_probs(s),
                eps,
            )
    })
}

/// Checks that the joint type of the block over the union of the cover has
/// marginals within `epsilon_prime` of `p` on every member of the cover.
///
/// Requires the block to be in the S-set at `epsilon`.
pub fn lemma_marginal_closeness(
    block: &SequenceBlock,
    p: &JointPmf,
    cover: &[SensorSet],
    params: &TypicalityParams,
) -> Result<bool> {
    if !in_s_set(block, p, cover, params.epsilon()) {
        return Err(Error::PreconditionViolation(
            "block is not in the S-set of the cover".into(),
        ));
    }
    let union = cover.iter().fold(SensorSet::EMPTY, |acc, &s| acc.union(s));
    if union.is_empty() {
        return Ok(true);
    }
    let joint = empirical_type(block, union)?;
    let members = union.to_vec();
    for &s in cover {
        let local = SensorSet::from_indices(s.iter().map(|i| {
            members
                .iter()
                .position(|&j| j == i)
                .expect("member of union")
        }));
        let from_joint = joint.marginal_probs(local);
        let target = p.marginal_probs(s);
        let close = from_joint
            .iter()
            .zip(&target)
            .all(|(a, b)| (a - b).abs() <= params.epsilon_prime());
        if !close {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Empirical conditional entropy `H(X | C)` in bits of the joint type of
/// `candidate` (alphabet `alphabet`) and the context rows.
pub fn conditional_type_entropy(
    candidate: &[u8],
    alphabet: usize,
    context: &[&[u8]],
    context_sizes: &[usize],
) -> Result<f64> {
    let k = candidate.len();
    if k == 0 {
        return invalid("empty candidate sequence");
    }
    if context.len() != context_sizes.len() {
        return invalid("one alphabet size per context row is required");
    }
    if context.iter().any(|row| row.len() != k) {
        return invalid("context sequences must have the candidate's length");
    }
    let mut keys: Vec<u64> = (0..k)
        .map(|t| {
            let ctx = context
                .iter()
                .zip(context_sizes)
                .fold(0u64, |acc, (row, &a)| acc * a as u64 + row[t] as u64);
            ctx * alphabet as u64 + candidate[t] as u64
        })
        .collect();
    keys.sort_unstable();
    let mut h = 0.0;
    let mut start = 0;
    while start < k {
        let ctx = keys[start] / alphabet as u64;
        let mut end = start;
        while end < k && keys[end] / alphabet as u64 == ctx {
            end += 1;
        }
        let n_ctx = (end - start) as f64;
        let mut run = start;
        while run < end {
            let mut next = run;
            while next < end && keys[next] == keys[run] {
                next += 1;
            }
            let n = (next - run) as f64;
            h += n * (n_ctx / n).log2();
            run = next;
        }
        start = end;
    }
    Ok(h / k as f64)
}

/// Membership of `candidate` in the target set at rate `rate`: its
/// empirical conditional entropy given the context is at most
/// `rate + epsilon_prime`.
pub fn in_target_set(
    candidate: &[u8],
    alphabet: usize,
    context: &[&[u8]],
    context_sizes: &[usize],
    rate: f64,
    params: &TypicalityParams,
) -> Result<bool> {
    let h = conditional_type_entropy(candidate, alphabet, context, context_sizes)?;
    Ok(h <= rate + params.epsilon_prime() + ENTROPY_SLACK)
}
