use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::Serialize;

use super::adversary::{Adversary, Behavior};
use super::hashing::{derive_key, BinHasher, HashFunction, HashKey, HashValue};
use super::target::TargetSetCounter;
use super::{SimParams, Strategy};
use crate::error::{invalid, Error, Result};
use crate::info::{JointPmf, SensorSet, SequenceBlock};
use crate::maxent::{subsets_of_size, Cover};
use crate::typicality::{conditional_type_entropy, is_typical};

const STREAM_SOURCES: u64 = 1;
const STREAM_ORACLE: u64 = 2;
const STREAM_ADVERSARY: u64 = 3;
const STREAM_HASH: u64 = 4;
const STREAM_SENSOR_BASE: u64 = 100;

/// Above this many anonymous candidates the binomial draw is replaced by
/// a Poisson one.
const EXACT_BINOMIAL_LIMIT: f64 = 1e6;

/// A Poisson mean this large always yields several matches.
const MANY_MATCHES: f64 = 1e3;

/// Slack on `k H` comparisons for named candidates, in bits.
const NAMED_SLACK: f64 = 1e-9;

/// Why a session stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionErrorKind {
    /// Two or more candidates survived a transaction.
    Ambiguous,
    /// No member of the cover survived.
    NoSurvivingCover,
}

impl fmt::Display for SessionErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionErrorKind::Ambiguous => "ambiguous",
            SessionErrorKind::NoSurvivingCover => "no_surviving_cover",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeResult {
    Unique(Vec<u8>),
    None,
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOutcome {
    Decoded,
    /// The rate cap was reached with no consistent candidate; the sensor
    /// is dropped from the cover.
    Exposed,
    Ambiguous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransactionRecord {
    pub round: usize,
    pub sensor: usize,
    /// 1-based within the phase.
    pub transaction: usize,
    pub function: usize,
    /// Rate after this transaction, bits per symbol.
    pub rate: f64,
    pub index_bits: u32,
    pub hash_bits: u32,
}

impl TransactionRecord {
    pub fn bits(&self) -> u64 {
        self.index_bits as u64 + self.hash_bits as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub sensor: usize,
    /// Sensors whose estimates served as side information.
    pub context: SensorSet,
    pub transactions: usize,
    pub bits: u64,
    pub outcome: PhaseOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Cover in force when the round started.
    pub cover: Cover,
    pub phases: Vec<PhaseRecord>,
    /// Decoded sequences, `None` for skipped or exposed sensors.
    pub estimates: Vec<Option<Vec<u8>>>,
    /// Cover after pruning; `None` if the round ended in an error.
    pub cover_after: Option<Cover>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionReport {
    pub k: usize,
    pub rounds_planned: usize,
    pub traitors: SensorSet,
    pub strategy: Strategy,
    pub transcript: Vec<TransactionRecord>,
    pub rounds: Vec<RoundRecord>,
    pub total_bits: u64,
    pub honest_error: bool,
    pub session_error: Option<SessionErrorKind>,
    pub final_cover: Cover,
    /// Sensors removed for sending nothing decodable.
    pub exposed: SensorSet,
}

/// Total bits over `k` times the planned number of rounds.
pub fn measure_sum_rate(report: &SessionReport) -> f64 {
    report.total_bits as f64 / (report.k as f64 * report.rounds_planned as f64)
}

/// Keeps the members of `cover` on which `estimates` is `eps`-typical.
/// Every subset of this family also passes, so it is the largest one.
pub fn prune_cover(
    cover: &Cover,
    estimates: &SequenceBlock,
    p: &JointPmf,
    eps: f64,
) -> std::result::Result<Cover, SessionErrorKind> {
    let mut next = cover.clone();
    next.retain(|&s| {
        let ps = p.marginalize(s).expect("cover members are nonempty");
        is_typical(estimates, s, &ps, eps)
    });
    if next.is_empty() {
        Err(SessionErrorKind::NoSurvivingCover)
    } else {
        Ok(next)
    }
}

/// Everything the decoder knows during one phase.
pub struct PhaseQuery<'a> {
    pub hasher: &'a BinHasher,
    pub round: usize,
    pub sensor: usize,
    pub alphabet: usize,
    /// Previously decoded sequences, in sensor order.
    pub context: &'a [&'a [u8]],
    pub context_sizes: &'a [usize],
    /// `(function index, hash)` of each transaction so far.
    pub received: &'a [(usize, HashValue)],
    /// Sequences checked exactly against the hashes. All other members of
    /// the target set are treated as matching each hash bit independently
    /// with probability one half.
    pub named: &'a [&'a [u8]],
}

/// Resolves the candidates in `T_R(context)` consistent with every hash
/// received so far.
pub fn decode_phase<R: Rng + ?Sized>(
    query: &PhaseQuery<'_>,
    rate: f64,
    params: &SimParams,
    rng: &mut R,
) -> Result<DecodeResult> {
    let typ = params.typicality()?;
    let k = params.k;
    let counter = TargetSetCounter::new(query.alphabet, k, query.context, query.context_sizes)?;
    let bound = k as f64 * (rate + typ.epsilon_prime());
    let bits: u64 = query
        .received
        .iter()
        .map(|_| params.hash_bits() as u64)
        .sum();
    let mut matching = Vec::new();
    let mut inside = 0usize;
    for &x in query.named {
        if x.len() != k {
            return invalid("named candidate has the wrong length");
        }
        let kh = k as f64
            * conditional_type_entropy(x, query.alphabet, query.context, query.context_sizes)?;
        if kh > bound + NAMED_SLACK {
            continue;
        }
        inside += 1;
        let consistent = query.received.iter().enumerate().all(|(j, (c, h))| {
            let key = HashKey {
                round: query.round,
                sensor: query.sensor,
                transaction: j + 1,
                function: *c,
            };
            query.hasher.hash(key, x, params.hash_bits()) == *h
        });
        if consistent {
            matching.push(x.to_vec());
        }
    }
    let anonymous = anonymous_matches(counter.log2_count_upto(bound), inside, bits, rng)?;
    Ok(match (matching.len(), anonymous) {
        (1, 0) => DecodeResult::Unique(matching.pop().expect("one match")),
        (0, 1) => match counter.sample_between(None, bound, rng) {
            Some(x) => DecodeResult::Unique(x),
            None => DecodeResult::None,
        },
        (0, 0) => DecodeResult::None,
        _ => DecodeResult::Ambiguous,
    })
}

/// Number of unnamed target-set members matching `bits` random hash bits,
/// capped at 2.
fn anonymous_matches<R: Rng + ?Sized>(
    log2_count: f64,
    named: usize,
    bits: u64,
    rng: &mut R,
) -> Result<usize> {
    if log2_count == f64::NEG_INFINITY {
        return Ok(0);
    }
    if log2_count <= EXACT_BINOMIAL_LIMIT.log2() {
        let n = (log2_count.exp2().round() as u64).saturating_sub(named as u64);
        if n == 0 {
            return Ok(0);
        }
        if bits == 0 {
            return Ok(n.min(2) as usize);
        }
        let q = (-(bits as f64)).exp2();
        if q == 0.0 {
            return Ok(0);
        }
        let draw = Binomial::new(n, q)
            .map_err(|e| Error::NumericFailure(format!("binomial draw: {e}")))?
            .sample(rng);
        return Ok(draw.min(2) as usize);
    }
    let log2_mean = log2_count - bits as f64;
    if log2_mean > MANY_MATCHES.log2() {
        return Ok(2);
    }
    let mean = log2_mean.exp2();
    if mean < 1e-300 {
        return Ok(0);
    }
    let draw: f64 = Poisson::new(mean)
        .map_err(|e| Error::NumericFailure(format!("poisson draw: {e}")))?
        .sample(rng);
    Ok((draw as usize).min(2))
}

/// Largest `k H(x | context)` the decoder accepts after transaction `j`:
/// the bits received so far less `k epsilon'`, or every sequence once the
/// rate exceeds `log2 |X|` (the last multiple of `epsilon` not above
/// `log2 |X| + epsilon`).
pub(crate) fn decoder_bound(params: &SimParams, alphabet: usize, j: usize) -> Result<f64> {
    let k = params.k as f64;
    let full = (alphabet as f64).log2();
    let rate = j as f64 * params.epsilon;
    if rate > full + 1e-12 {
        Ok(k * full)
    } else {
        Ok((k * (rate - params.typicality()?.epsilon_prime())).min(k * full))
    }
}

enum Sender<'a> {
    Sequence(&'a [u8]),
    Gibberish,
}

struct PhaseRun {
    outcome: PhaseOutcome,
    estimate: Option<Vec<u8>>,
    transactions: Vec<TransactionRecord>,
}

struct PhaseEnv<'a> {
    params: &'a SimParams,
    hasher: &'a BinHasher,
    round: usize,
    sensor: usize,
    alphabet: usize,
    context: &'a [&'a [u8]],
    context_sizes: &'a [usize],
}

struct Named {
    seq: Vec<u8>,
    kh: f64,
    alive: bool,
}

/// One phase: the sender answers successive hash requests; after
/// transaction `j` (rate `j epsilon`) the decoder looks for candidates with
/// `k H <= k (j - 1) epsilon`, only examining the newly admitted shell.
fn run_phase<R: Rng + ?Sized, S: Rng + ?Sized>(
    env: &PhaseEnv<'_>,
    sender: Sender<'_>,
    planted: &[Vec<u8>],
    sender_rng: &mut S,
    oracle: &mut R,
) -> Result<PhaseRun> {
    let params = env.params;
    let k = params.k;
    let b = params.hash_bits();
    let counter = TargetSetCounter::new(env.alphabet, k, env.context, env.context_sizes)?;
    let kh = |x: &[u8]| -> Result<f64> {
        Ok(k as f64 * conditional_type_entropy(x, env.alphabet, env.context, env.context_sizes)?)
    };
    let mut named: Vec<Named> = Vec::new();
    let own = match sender {
        Sender::Sequence(x) => Some(x),
        Sender::Gibberish => None,
    };
    for x in own.into_iter().chain(planted.iter().map(|v| v.as_slice())) {
        if !named.iter().any(|n| n.seq == x) {
            named.push(Named {
                seq: x.to_vec(),
                kh: kh(x)?,
                alive: true,
            });
        }
    }

    let function = sender_rng.gen_range(0..params.functions);
    let cap = k as f64 * (env.alphabet as f64).log2();
    let mut transactions = Vec::new();
    let mut prev: Option<f64> = None;
    for j in 1usize.. {
        let key = HashKey {
            round: env.round,
            sensor: env.sensor,
            transaction: j,
            function,
        };
        let f: HashFunction = env.hasher.function(key, k, b);
        let received = match own {
            Some(x) => f.eval(x),
            None => HashValue::random(b, sender_rng),
        };
        for n in named.iter_mut().filter(|n| n.alive) {
            n.alive = f.eval(&n.seq) == received;
        }
        let rate = j as f64 * params.epsilon;
        transactions.push(TransactionRecord {
            round: env.round,
            sensor: env.sensor,
            transaction: j,
            function,
            rate,
            index_bits: if j == 1 { params.index_bits() } else { 0 },
            hash_bits: b,
        });

        let bound = decoder_bound(params, env.alphabet, j)?;
        let in_shell =
            |v: f64| v <= bound + NAMED_SLACK && prev.is_none_or(|lo| v > lo + NAMED_SLACK);
        let shell_named = named.iter().filter(|n| in_shell(n.kh)).count();
        let matches: Vec<&Named> = named
            .iter()
            .filter(|n| n.alive && n.kh <= bound + NAMED_SLACK)
            .collect();
        let total_bits = j as u64 * b as u64;
        let anonymous = anonymous_matches(
            counter.log2_count_between(prev, bound),
            shell_named,
            total_bits,
            oracle,
        )?;

        let mut done = |outcome, estimate| PhaseRun {
            outcome,
            estimate,
            transactions: std::mem::take(&mut transactions),
        };
        match matches.len() + anonymous {
            0 if bound >= cap - 1e-9 => return Ok(done(PhaseOutcome::Exposed, None)),
            0 => prev = Some(bound),
            1 if anonymous == 0 => {
                return Ok(done(PhaseOutcome::Decoded, Some(matches[0].seq.clone())))
            }
            1 => {
                let x = counter
                    .sample_between(prev, bound, oracle)
                    .or_else(|| counter.sample_between(None, bound, oracle))
                    .ok_or_else(|| Error::NumericFailure("empty target-set shell".into()))?;
                return Ok(done(PhaseOutcome::Decoded, Some(x)));
            }
            _ => return Ok(done(PhaseOutcome::Ambiguous, None)),
        }
    }
    unreachable!("the rate cap ends every phase")
}

fn stream(seed: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(seed, &[label]))
}

/// Runs `params.rounds` rounds of the protocol with the given traitors.
/// Decoding ambiguity and an empty surviving cover end the session and
/// are reported in [`SessionReport::session_error`].
pub fn run_session(
    p: &JointPmf,
    params: &SimParams,
    traitors: SensorSet,
    strategy: Strategy,
    q_tilde: Option<&JointPmf>,
) -> Result<SessionReport> {
    let m = p.num_sensors();
    params.validate(m)?;
    if !traitors.within(m) {
        return invalid(format!(
            "traitor set {traitors} has sensors outside 1..={m}"
        ));
    }
    if traitors.len() > params.t {
        return invalid(format!(
            "{} traitors exceed the bound t = {}",
            traitors.len(),
            params.t
        ));
    }
    if p.alphabet_sizes().iter().any(|&a| a > u8::MAX as usize + 1) {
        return invalid("alphabets above 256 symbols are not supported");
    }

    let mut source_rng = stream(params.seed, STREAM_SOURCES);
    let sources: Vec<SequenceBlock> = (0..params.rounds)
        .map(|_| p.sample_block_with(params.k, &mut source_rng))
        .collect::<Result<_>>()?;
    let mut adv_rng = stream(params.seed, STREAM_ADVERSARY);
    let adversary = Adversary::prepare(
        strategy,
        p,
        params,
        traitors,
        q_tilde,
        &sources,
        &mut adv_rng,
    )?;
    let mut oracle = stream(params.seed, STREAM_ORACLE);
    let mut sensor_rngs: Vec<ChaCha8Rng> = (0..m)
        .map(|i| stream(params.seed, STREAM_SENSOR_BASE + i as u64))
        .collect();
    let hasher = BinHasher::new(derive_key(params.seed, &[STREAM_HASH]));

    let mut cover = Cover::new(m, params.t, subsets_of_size(m, m - params.t))?;
    let mut exposed = SensorSet::EMPTY;
    let mut transcript = Vec::new();
    let mut rounds = Vec::new();
    let mut session_error = None;

    for (round, block) in sources.iter().enumerate() {
        let start_cover = cover.clone();
        let plan = adversary.plan_round(round, cover.union(), block, &hasher, params, &mut adv_rng);
        let mut estimates: Vec<Option<Vec<u8>>> = vec![None; m];
        let mut phases = Vec::new();
        for i in 0..m {
            if !cover.union().contains(i) {
                continue;
            }
            let ctx_set = SensorSet::from_indices(
                (0..i).filter(|&s| cover.union().contains(s) && estimates[s].is_some()),
            );
            let context: Vec<&[u8]> = ctx_set
                .iter()
                .map(|s| estimates[s].as_deref().expect("decoded"))
                .collect();
            let env = PhaseEnv {
                params,
                hasher: &hasher,
                round,
                sensor: i,
                alphabet: p.alphabet_size(i),
                context: &context,
                context_sizes: &p.sizes_of(ctx_set),
            };
            let run = match &plan.behavior[i] {
                None => run_phase(
                    &env,
                    Sender::Sequence(block.row(i)),
                    &plan.planted[i],
                    &mut sensor_rngs[i],
                    &mut oracle,
                )?,
                Some(Behavior::Sequence(x)) => run_phase(
                    &env,
                    Sender::Sequence(x),
                    &plan.planted[i],
                    &mut adv_rng,
                    &mut oracle,
                )?,
                Some(Behavior::Gibberish) => run_phase(
                    &env,
                    Sender::Gibberish,
                    &plan.planted[i],
                    &mut adv_rng,
                    &mut oracle,
                )?,
            };
            phases.push(PhaseRecord {
                sensor: i,
                context: ctx_set,
                transactions: run.transactions.len(),
                bits: run.transactions.iter().map(TransactionRecord::bits).sum(),
                outcome: run.outcome,
            });
            transcript.extend(run.transactions);
            match run.outcome {
                PhaseOutcome::Decoded => estimates[i] = run.estimate,
                PhaseOutcome::Exposed => {
                    exposed.insert(i);
                    cover.retain(|s| !s.contains(i));
                    if cover.is_empty() {
                        session_error = Some(SessionErrorKind::NoSurvivingCover);
                        break;
                    }
                }
                PhaseOutcome::Ambiguous => {
                    session_error = Some(SessionErrorKind::Ambiguous);
                    break;
                }
            }
        }

        let cover_after = if session_error.is_none() {
            let rows = estimates
                .iter()
                .map(|e| e.clone().unwrap_or_else(|| vec![0; params.k]))
                .collect();
            let decoded = SequenceBlock::new(p.alphabet_sizes().to_vec(), rows)?;
            match prune_cover(&cover, &decoded, p, params.prune_eps()) {
                Ok(next) => {
                    cover = next;
                    Some(cover.clone())
                }
                Err(kind) => {
                    session_error = Some(kind);
                    None
                }
            }
        } else {
            None
        };
        rounds.push(RoundRecord {
            round,
            cover: start_cover,
            phases,
            estimates,
            cover_after,
        });
        if session_error.is_some() {
            break;
        }
    }

    let honest = traitors.complement(m);
    let honest_error = session_error.is_some()
        || rounds.len() < params.rounds
        || rounds.iter().zip(&sources).any(|(r, block)| {
            honest
                .iter()
                .any(|h| r.estimates[h].as_deref() != Some(block.row(h)))
        });
    let total_bits = transcript.iter().map(TransactionRecord::bits).sum();
    Ok(SessionReport {
        k: params.k,
        rounds_planned: params.rounds,
        traitors,
        strategy,
        transcript,
        rounds,
        total_bits,
        honest_error,
        session_error,
        final_cover: cover,
        exposed,
    })
}
