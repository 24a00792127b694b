use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::hashing::{BinHasher, HashFunction, HashKey, HashValue, Residues};
use super::session::decoder_bound;
use super::{SimParams, Strategy};
use crate::error::{invalid, Error, Result};
use crate::info::{JointPmf, SensorSet, SequenceBlock};
use crate::maxent::enumerate_minimal_covers;

/// Marginal agreement required of a fabrication distribution.
pub(crate) const QTILDE_TOLERANCE: f64 = 1e-9;

/// Fraction of symbols the collision search perturbs.
const COLLIDE_FLIP_RATE: f64 = 0.05;

const COLLIDE_MAX_TRIES: usize = 1 << 24;

/// What a traitor transmits during its phase.
#[derive(Clone, Debug)]
pub(crate) enum Behavior {
    /// Run the protocol on this sequence.
    Sequence(Vec<u8>),
    /// Random function index and hash bits.
    Gibberish,
}

pub(crate) struct RoundPlan {
    /// Per sensor; `None` for honest sensors.
    pub behavior: Vec<Option<Behavior>>,
    /// Extra sequences the adversary has arranged to match a sensor's hashes.
    pub planted: Vec<Vec<Vec<u8>>>,
}

pub(crate) struct Adversary {
    strategy: Strategy,
    traitors: SensorSet,
    /// Fabricated traitor rows per round, indexed by sensor.
    fakes: Vec<Vec<Option<Vec<u8>>>>,
}

fn max_marginal_gap(a: &JointPmf, b: &JointPmf, s: SensorSet) -> f64 {
    let x = a.marginalize(s).expect("nonempty set");
    let y = b.marginalize(s).expect("nonempty set");
    x.linf_distance(&y)
}

/// Checks that `q_tilde` agrees with `p` on the honest sensors and lies in
/// `Q(V)` for a minimal cover `V` with a member inside the honest set.
pub(crate) fn validate_qtilde(
    p: &JointPmf,
    q_tilde: &JointPmf,
    t: usize,
    honest: SensorSet,
) -> Result<()> {
    if q_tilde.alphabet_sizes() != p.alphabet_sizes() {
        return invalid("q~ must have the same alphabets as p");
    }
    if honest.is_empty() {
        return invalid("fabrication needs at least one honest sensor");
    }
    let gap = max_marginal_gap(p, q_tilde, honest);
    if gap > QTILDE_TOLERANCE {
        return Err(Error::PreconditionViolation(format!(
            "q~ differs from p on the honest sensors {honest} by {gap:e}"
        )));
    }
    let ok = enumerate_minimal_covers(p.num_sensors(), t)?
        .iter()
        .any(|cover| {
            cover.sets().iter().any(|s| s.is_subset_of(honest))
                && cover
                    .sets()
                    .iter()
                    .all(|&s| max_marginal_gap(p, q_tilde, s) <= QTILDE_TOLERANCE)
        });
    if !ok {
        return Err(Error::PreconditionViolation(
            "q~ matches p on no minimal cover containing an honest set".into(),
        ));
    }
    Ok(())
}

fn fabricate<R: Rng + ?Sized>(
    q_tilde: &JointPmf,
    traitors: SensorSet,
    block: &SequenceBlock,
    rng: &mut R,
) -> Result<Vec<Option<Vec<u8>>>> {
    let m = q_tilde.num_sensors();
    let honest = traitors.complement(m);
    let members = traitors.to_vec();
    let sizes = q_tilde.sizes_of(traitors);
    let mut cache: HashMap<Vec<usize>, WeightedIndex<f64>> = HashMap::new();
    let mut rows = vec![Vec::with_capacity(block.len()); members.len()];
    for t in 0..block.len() {
        let ctx: Vec<usize> = honest.iter().map(|i| block.row(i)[t] as usize).collect();
        if !cache.contains_key(&ctx) {
            let cond = q_tilde.condition(traitors, &ctx)?;
            let w = WeightedIndex::new(cond.probs())
                .map_err(|e| Error::NumericFailure(format!("cannot sample q~: {e}")))?;
            cache.insert(ctx.clone(), w);
        }
        let mut idx = cache[&ctx].sample(rng);
        for d in (0..members.len()).rev() {
            rows[d].push((idx % sizes[d]) as u8);
            idx /= sizes[d];
        }
    }
    let mut out = vec![None; m];
    for (i, row) in members.into_iter().zip(rows) {
        out[i] = Some(row);
    }
    Ok(out)
}

impl Adversary {
    pub fn prepare<R: Rng + ?Sized>(
        strategy: Strategy,
        p: &JointPmf,
        params: &SimParams,
        traitors: SensorSet,
        q_tilde: Option<&JointPmf>,
        sources: &[SequenceBlock],
        rng: &mut R,
    ) -> Result<Self> {
        let m = p.num_sensors();
        let fakes = match (strategy, q_tilde) {
            (Strategy::Fabricate, Some(q)) => {
                validate_qtilde(p, q, params.t, traitors.complement(m))?;
                if traitors.is_empty() {
                    vec![vec![None; m]; sources.len()]
                } else {
                    sources
                        .iter()
                        .map(|b| fabricate(q, traitors, b, rng))
                        .collect::<Result<_>>()?
                }
            }
            (Strategy::Fabricate, None) => return invalid("the fabricate strategy needs q~"),
            (_, Some(_)) => return invalid("q~ is only used by the fabricate strategy"),
            (_, None) => Vec::new(),
        };
        Ok(Adversary {
            strategy,
            traitors,
            fakes,
        })
    }

    pub fn plan_round<R: Rng + ?Sized>(
        &self,
        round: usize,
        active: SensorSet,
        block: &SequenceBlock,
        hasher: &BinHasher,
        params: &SimParams,
        rng: &mut R,
    ) -> RoundPlan {
        let m = block.num_sensors();
        let mut behavior: Vec<Option<Behavior>> = vec![None; m];
        let mut planted = vec![Vec::new(); m];
        for i in self.traitors.iter() {
            behavior[i] = Some(match self.strategy {
                Strategy::Honest | Strategy::Collide => Behavior::Sequence(block.row(i).to_vec()),
                Strategy::Gibberish => Behavior::Gibberish,
                Strategy::Fabricate => Behavior::Sequence(
                    self.fakes[round][i]
                        .clone()
                        .expect("fake row for every traitor"),
                ),
            });
        }
        if self.strategy == Strategy::Collide {
            let mut targeted = SensorSet::EMPTY;
            for tr in self.traitors.intersection(active).iter() {
                let target = active.iter().find(|&h| {
                    h > tr
                        && !self.traitors.contains(h)
                        && !targeted.contains(h)
                        && block.alphabet_sizes()[h] == block.alphabet_sizes()[tr]
                });
                let Some(h) = target else { continue };
                if let Some(fake) = collide_search(round, h, block, hasher, params, rng) {
                    targeted.insert(h);
                    planted[h].push(fake.clone());
                    behavior[tr] = Some(Behavior::Sequence(fake));
                }
            }
        }
        RoundPlan { behavior, planted }
    }
}

/// Perturbs the honest sensor's sequence until its hashes under function
/// index 0 agree with the true ones on every transaction up to the first
/// at which the decoder accepts a sequence with zero conditional entropy.
fn collide_search<R: Rng + ?Sized>(
    round: usize,
    target: usize,
    block: &SequenceBlock,
    hasher: &BinHasher,
    params: &SimParams,
    rng: &mut R,
) -> Option<Vec<u8>> {
    let truth = block.row(target);
    let alphabet = block.alphabet_sizes()[target];
    if alphabet < 2 || truth.is_empty() {
        return None;
    }
    let mut last = 1;
    while decoder_bound(params, alphabet, last).ok()? < 0.0 {
        last += 1;
    }
    let functions: Vec<HashFunction> = (1..=last)
        .map(|transaction| {
            let key = HashKey {
                round,
                sensor: target,
                transaction,
                function: 0,
            };
            hasher.function(key, truth.len(), params.hash_bits())
        })
        .collect();
    let goals: Vec<HashValue> = functions.iter().map(|f| f.eval(truth)).collect();
    let base: Vec<Residues> = functions.iter().map(|f| f.residues(truth)).collect();
    let flips = ((truth.len() as f64 * COLLIDE_FLIP_RATE).round() as usize).clamp(1, truth.len());
    let mut y = truth.to_vec();
    let mut state = base;
    let flip = |y: &mut Vec<u8>, state: &mut Vec<Residues>, pos: usize, to: u8| {
        for (f, r) in functions.iter().zip(state.iter_mut()) {
            f.update(r, pos, y[pos], to);
        }
        y[pos] = to;
    };
    let mut flipped: Vec<usize> = rand::seq::index::sample(rng, truth.len(), flips).into_vec();
    for &pos in &flipped {
        let to = ((truth[pos] as usize + rng.gen_range(1..alphabet)) % alphabet) as u8;
        flip(&mut y, &mut state, pos, to);
    }
    for _ in 0..COLLIDE_MAX_TRIES {
        if functions
            .iter()
            .zip(&state)
            .zip(&goals)
            .all(|((f, r), g)| f.finish(r) == *g)
        {
            return Some(y);
        }
        if flips == truth.len() {
            let pos = rng.gen_range(0..truth.len());
            let to = ((y[pos] as usize + rng.gen_range(1..alphabet)) % alphabet) as u8;
            if to != truth[pos] {
                flip(&mut y, &mut state, pos, to);
            }
            continue;
        }
        let slot = rng.gen_range(0..flipped.len());
        let old = flipped[slot];
        flip(&mut y, &mut state, old, truth[old]);
        let pos = loop {
            let pos = rng.gen_range(0..truth.len());
            if y[pos] == truth[pos] && pos != old {
                break pos;
            }
        };
        let to = ((truth[pos] as usize + rng.gen_range(1..alphabet)) % alphabet) as u8;
        flip(&mut y, &mut state, pos, to);
        flipped[slot] = pos;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::{sum_rate_star_report, IpfOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain() -> JointPmf {
        let mut w = vec![0.0; 8];
        for x1 in 0..2 {
            for x2 in 0..2 {
                for x3 in 0..2 {
                    let a = if x1 == x2 { 0.9 } else { 0.1 };
                    let b = if x2 == x3 { 0.8 } else { 0.2 };
                    w[x1 * 4 + x2 * 2 + x3] = 0.5 * a * b;
                }
            }
        }
        JointPmf::new(vec![2, 2, 2], w).unwrap()
    }

    #[test]
    fn qtilde_validation() {
        let p = chain();
        let report = sum_rate_star_report(&p, 1, &IpfOptions::default()).unwrap();
        let best = report.best();
        let honest = best.cover.sets()[0];
        assert!(validate_qtilde(&p, &best.solution.q, 1, honest).is_ok());
        let uniform = JointPmf::uniform(vec![2, 2, 2]).unwrap();
        assert!(validate_qtilde(&p, &uniform, 1, honest).is_err());
        assert!(validate_qtilde(&p, &p, 1, honest).is_ok());
    }

    #[test]
    fn fabricated_rows_follow_qtilde() {
        let p = chain();
        let report = sum_rate_star_report(&p, 1, &IpfOptions::default()).unwrap();
        let best = report.best();
        let honest = best.cover.sets()[0];
        let traitors = honest.complement(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let block = p.sample_block(100_000, 1).unwrap();
        let fake = fabricate(&best.solution.q, traitors, &block, &mut rng).unwrap();
        let mut rows = block.rows().to_vec();
        for i in traitors.iter() {
            rows[i] = fake[i].clone().unwrap();
        }
        let mixed = SequenceBlock::new(vec![2, 2, 2], rows).unwrap();
        let ty = crate::typicality::empirical_type(&mixed, SensorSet::full(3)).unwrap();
        assert!(ty.linf_distance(&best.solution.q) < 0.01);
    }

    #[test]
    fn collision_search_matches_first_hash() {
        let p = JointPmf::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let params = SimParams::new(200, 1, 0.05, 1, 0, 1);
        let block = p.sample_block(200, 3).unwrap();
        let hasher = BinHasher::new(11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fake = collide_search(0, 1, &block, &hasher, &params, &mut rng).unwrap();
        assert_ne!(fake, block.row(1));
        assert!(decoder_bound(&params, 2, 1).unwrap() < 0.0);
        assert!(decoder_bound(&params, 2, 2).unwrap() >= 0.0);
        for transaction in 1..=2 {
            let key = HashKey {
                round: 0,
                sensor: 1,
                transaction,
                function: 0,
            };
            assert_eq!(
                hasher.hash(key, &fake, 10),
                hasher.hash(key, block.row(1), 10)
            );
        }
    }
}
