//! Counting and sampling the sequences of a target set.
//!
//! For a fixed context, `k H(x | context)` of a candidate `x` splits into
//! one term per context symbol that depends only on how many times each
//! symbol of `x` occurs at those positions. A histogram over these terms
//! is accumulated one context symbol at a time, which gives the number of
//! sequences below any conditional-entropy threshold without enumerating
//! them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};

/// Histogram resolution, in bits of `k H`.
pub const BIN_WIDTH: f64 = 1.0 / 32.0;

/// Upper limit on the number of symbol compositions per context symbol.
pub const MAX_COMPOSITIONS: usize = 2_000_000;

struct Composition {
    bin: usize,
    log2_count: f64,
    counts: Vec<u32>,
}

struct ContextPart {
    positions: Vec<usize>,
    comps: Vec<Composition>,
    /// Sparse histogram `(bin, weight)`, weights relative to `2^scale`.
    hist: Vec<(usize, f64)>,
}

struct Stage {
    weights: Vec<f64>,
    scale: f64,
}

/// Number of candidate sequences by conditional type entropy, for one
/// context.
pub struct TargetSetCounter {
    k: usize,
    alphabet: usize,
    parts: Vec<ContextPart>,
    stages: Vec<Stage>,
    cumulative: Vec<f64>,
}

fn log2_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).log2();
    }
    lf
}

fn xlogx(n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * (n as f64).log2()
    }
}

fn compositions(n: u32, parts: usize, out: &mut Vec<Vec<u32>>) {
    fn rec(left: u32, idx: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if idx + 1 == cur.len() {
            cur[idx] = left;
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[idx] = c;
            rec(left - c, idx + 1, cur, out);
        }
    }
    let mut cur = vec![0; parts];
    rec(n, 0, &mut cur, out);
}

fn bin_index(bits: f64) -> usize {
    (bits / BIN_WIDTH).round().max(0.0) as usize
}

impl TargetSetCounter {
    /// `alphabet` is the candidate's alphabet size; `context` holds the
    /// decoded sequences the decoder conditions on, possibly none.
    pub fn new(
        alphabet: usize,
        k: usize,
        context: &[&[u8]],
        context_sizes: &[usize],
    ) -> Result<Self> {
        if alphabet == 0 || k == 0 {
            return invalid("alphabet and block length must be positive");
        }
        if context.len() != context_sizes.len() || context.iter().any(|r| r.len() != k) {
            return invalid("context rows must match the block length");
        }
        let lf = log2_factorials(k + alphabet);
        let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for t in 0..k {
            let key: Vec<u8> = context.iter().map(|row| row[t]).collect();
            groups.entry(key).or_default().push(t);
        }

        let mut parts = Vec::with_capacity(groups.len());
        for positions in groups.into_values() {
            let n = positions.len();
            let ways = lf[n + alphabet - 1] - lf[alphabet - 1] - lf[n];
            if ways > (MAX_COMPOSITIONS as f64).log2() {
                return invalid(format!(
                    "target-set counting needs too many compositions (alphabet {alphabet}, block length {k})"
                ));
            }
            let mut raw = Vec::new();
            compositions(n as u32, alphabet, &mut raw);
            let comps: Vec<Composition> = raw
                .into_iter()
                .map(|counts| {
                    let e = xlogx(n as u32) - counts.iter().map(|&c| xlogx(c)).sum::<f64>();
                    let log2_count = lf[n] - counts.iter().map(|&c| lf[c as usize]).sum::<f64>();
                    Composition {
                        bin: bin_index(e),
                        log2_count,
                        counts,
                    }
                })
                .collect();
            let top = comps.iter().map(|c| c.log2_count).fold(f64::MIN, f64::max);
            let mut hist: BTreeMap<usize, f64> = BTreeMap::new();
            for c in &comps {
                *hist.entry(c.bin).or_default() += (c.log2_count - top).exp2();
            }
            parts.push((
                top,
                ContextPart {
                    positions,
                    comps,
                    hist: hist.into_iter().collect(),
                },
            ));
        }

        let mut stages = vec![Stage {
            weights: vec![1.0],
            scale: 0.0,
        }];
        for (top, part) in &parts {
            let prev = stages.last().expect("initial stage");
            let width = part.hist.last().map_or(0, |&(b, _)| b);
            let mut next = vec![0.0; prev.weights.len() + width];
            for (i, &w) in prev.weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for &(b, h) in &part.hist {
                    next[i + b] += w * h;
                }
            }
            let max = next.iter().copied().fold(0.0, f64::max);
            next.iter_mut().for_each(|x| *x /= max);
            let scale = prev.scale + top + max.log2();
            stages.push(Stage {
                weights: next,
                scale,
            });
        }
        let last = stages.last().expect("at least one stage");
        let mut cumulative = Vec::with_capacity(last.weights.len());
        let mut acc = 0.0;
        for &w in &last.weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(TargetSetCounter {
            k,
            alphabet,
            parts: parts.into_iter().map(|(_, p)| p).collect(),
            stages,
            cumulative,
        })
    }

    pub fn block_len(&self) -> usize {
        self.k
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    fn scale(&self) -> f64 {
        self.stages.last().expect("stages").scale
    }

    /// Highest bin with `k H` at most `bound` bits, `None` if below all.
    fn upto_index(&self, bound: f64) -> Option<usize> {
        if bound < -BIN_WIDTH / 2.0 {
            return None;
        }
        let idx = (bound / BIN_WIDTH + 0.5 + 1e-9).floor() as usize;
        Some(idx.min(self.cumulative.len() - 1))
    }

    fn mass_between(&self, lo: Option<f64>, hi: f64) -> f64 {
        let upper = match self.upto_index(hi) {
            Some(i) => self.cumulative[i],
            None => return 0.0,
        };
        let lower = lo
            .and_then(|lo| self.upto_index(lo))
            .map_or(0.0, |i| self.cumulative[i]);
        (upper - lower).max(0.0)
    }

    /// `log2` of the number of sequences with `k H(x | context)` at most
    /// `bound` bits; negative infinity if there are none.
    pub fn log2_count_upto(&self, bound: f64) -> f64 {
        self.log2_count_between(None, bound)
    }

    /// `log2` of the number of sequences with `lo < k H <= hi`.
    pub fn log2_count_between(&self, lo: Option<f64>, hi: f64) -> f64 {
        let mass = self.mass_between(lo, hi);
        if mass <= 0.0 {
            f64::NEG_INFINITY
        } else {
            mass.log2() + self.scale()
        }
    }

    /// A uniformly drawn sequence with `lo < k H <= hi` (up to histogram
    /// resolution), or `None` if there is no such sequence.
    pub fn sample_between<R: Rng + ?Sized>(
        &self,
        lo: Option<f64>,
        hi: f64,
        rng: &mut R,
    ) -> Option<Vec<u8>> {
        let hi_idx = self.upto_index(hi)?;
        let lo_idx = lo.and_then(|lo| self.upto_index(lo));
        let last = &self.stages.last()?.weights;
        let start = lo_idx.map_or(0, |i| i + 1);
        let total: f64 = last[start..=hi_idx].iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut bin = pick(last[start..=hi_idx].iter().copied(), total, rng)? + start;

        let mut chosen = vec![0usize; self.parts.len()];
        for (c, part) in self.parts.iter().enumerate().rev() {
            let prev = &self.stages[c].weights;
            let options: Vec<(usize, f64)> = part
                .hist
                .iter()
                .filter(|&&(b, _)| b <= bin && bin - b < prev.len())
                .map(|&(b, h)| (b, h * prev[bin - b]))
                .collect();
            let sum: f64 = options.iter().map(|o| o.1).sum();
            let (b, _) = options[pick(options.iter().map(|o| o.1), sum, rng)?];
            let comps: Vec<usize> = (0..part.comps.len())
                .filter(|&i| part.comps[i].bin == b)
                .collect();
            let top = comps
                .iter()
                .map(|&i| part.comps[i].log2_count)
                .fold(f64::MIN, f64::max);
            let weights: Vec<f64> = comps
                .iter()
                .map(|&i| (part.comps[i].log2_count - top).exp2())
                .collect();
            let sum: f64 = weights.iter().sum();
            chosen[c] = comps[pick(weights.into_iter(), sum, rng)?];
            bin -= b;
        }

        let mut x = vec![0u8; self.k];
        for (part, &ci) in self.parts.iter().zip(&chosen) {
            let mut symbols: Vec<u8> = part.comps[ci]
                .counts
                .iter()
                .enumerate()
                .flat_map(|(a, &n)| std::iter::repeat_n(a as u8, n as usize))
                .collect();
            symbols.shuffle(rng);
            for (&pos, s) in part.positions.iter().zip(symbols) {
                x[pos] = s;
            }
        }
        Some(x)
    }
}

fn pick<R: Rng + ?Sized>(
    weights: impl Iterator<Item = f64>,
    total: f64,
    rng: &mut R,
) -> Option<usize> {
    if total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = Some(i);
            if u < w {
                return Some(i);
            }
            u -= w;
        }
    }
    last
}
