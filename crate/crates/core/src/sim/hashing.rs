//! Seeded universal hashing used as the random binning functions.
//!
//! Each `(round, sensor, transaction, function index)` selects an
//! independent multilinear hash over GF(2^61 - 1), so two distinct
//! sequences collide on a `b`-bit output with probability about `2^-b`.

use rand::Rng;

const PRIME: u64 = (1 << 61) - 1;
const WORD_BITS: u32 = 61;

/// One step of the SplitMix64 generator.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically combines a key with a list of labels.
pub fn derive_key(key: u64, labels: &[u64]) -> u64 {
    let mut state = key;
    let mut out = splitmix64(&mut state);
    for &l in labels {
        state ^= l.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        out ^= splitmix64(&mut state);
        state = out;
    }
    out
}

fn mul_mod(a: u64, b: u64) -> u64 {
    let prod = a as u128 * b as u128;
    let lo = (prod as u64) & PRIME;
    let hi = (prod >> 61) as u64;
    let s = lo + hi;
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

/// A hash output of a fixed number of bits, split into 61-bit words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HashValue(Vec<u64>);

impl HashValue {
    pub fn words(&self) -> &[u64] {
        &self.0
    }

    /// Uniformly random bits of the given width.
    pub fn random<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Self {
        HashValue(
            word_widths(bits)
                .map(|w| rng.gen::<u64>() & low_mask(w))
                .collect(),
        )
    }
}

fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn word_widths(bits: u32) -> impl Iterator<Item = u32> {
    let words = bits.div_ceil(WORD_BITS);
    (0..words).map(move |w| (bits - w * WORD_BITS).min(WORD_BITS))
}

/// Selects one binning function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HashKey {
    pub round: usize,
    pub sensor: usize,
    pub transaction: usize,
    pub function: usize,
}

/// The family of binning functions of one session.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinHasher {
    key: u64,
}

impl BinHasher {
    pub fn new(key: u64) -> Self {
        BinHasher { key }
    }

    /// The function for `key`, over sequences of length `len`, with `bits`
    /// output bits.
    pub fn function(&self, key: HashKey, len: usize, bits: u32) -> HashFunction {
        let words = word_widths(bits)
            .enumerate()
            .map(|(w, width)| {
                let mut state = derive_key(
                    self.key,
                    &[
                        key.round as u64,
                        key.sensor as u64,
                        key.transaction as u64,
                        key.function as u64,
                        w as u64,
                    ],
                );
                let coeffs = (0..=len).map(|_| splitmix64(&mut state) % PRIME).collect();
                (coeffs, width)
            })
            .collect();
        HashFunction { words }
    }

    pub fn hash(&self, key: HashKey, x: &[u8], bits: u32) -> HashValue {
        self.function(key, x.len(), bits).eval(x)
    }
}

/// A materialized binning function.
#[derive(Clone, Debug)]
pub struct HashFunction {
    words: Vec<(Vec<u64>, u32)>,
}

impl HashFunction {
    /// # Panics
    /// If `x` is longer than the length the function was built for.
    pub fn eval(&self, x: &[u8]) -> HashValue {
        HashValue(
            self.words
                .iter()
                .map(|(coeffs, width)| {
                    let mut acc = coeffs[0];
                    for (&a, &s) in coeffs[1..].iter().zip(x) {
                        acc = add_mod(acc, mul_mod(a, s as u64 + 1));
                    }
                    acc & low_mask(*width)
                })
                .collect(),
        )
    }
}

/// Untruncated hash state of one sequence, updated one symbol at a time.
#[derive(Clone, Debug)]
pub(crate) struct Residues(Vec<u64>);

impl HashFunction {
    pub(crate) fn residues(&self, x: &[u8]) -> Residues {
        Residues(
            self.words
                .iter()
                .map(|(coeffs, _)| {
                    coeffs[1..].iter().zip(x).fold(coeffs[0], |acc, (&a, &s)| {
                        add_mod(acc, mul_mod(a, s as u64 + 1))
                    })
                })
                .collect(),
        )
    }

    /// Changes position `pos` from symbol `from` to `to`.
    pub(crate) fn update(&self, r: &mut Residues, pos: usize, from: u8, to: u8) {
        for ((coeffs, _), acc) in self.words.iter().zip(r.0.iter_mut()) {
            let a = coeffs[pos + 1];
            *acc = add_mod(*acc, mul_mod(a, to as u64 + 1));
            *acc = add_mod(*acc, PRIME - mul_mod(a, from as u64 + 1));
        }
    }

    pub(crate) fn finish(&self, r: &Residues) -> HashValue {
        HashValue(
            self.words
                .iter()
                .zip(&r.0)
                .map(|((_, width), &acc)| acc & low_mask(*width))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key(transaction: usize, function: usize) -> HashKey {
        HashKey {
            round: 0,
            sensor: 1,
            transaction,
            function,
        }
    }

    #[test]
    fn mul_mod_matches_u128_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let a = rng.gen::<u64>() % PRIME;
            let b = rng.gen::<u64>() % PRIME;
            assert_eq!(
                mul_mod(a, b),
                ((a as u128 * b as u128) % PRIME as u128) as u64
            );
        }
    }

    #[test]
    fn deterministic_and_width_exact() {
        let h = BinHasher::new(7);
        let x = vec![1u8, 0, 1, 1, 0];
        assert_eq!(h.hash(key(1, 3), &x, 10), h.hash(key(1, 3), &x, 10));
        assert_ne!(h.hash(key(1, 3), &x, 40), h.hash(key(1, 4), &x, 40));
        assert!(h.hash(key(1, 0), &x, 10).words()[0] < 1 << 10);
        let wide = h.hash(key(2, 0), &x, 130);
        assert_eq!(wide.words().len(), 3);
        assert!(wide.words()[2] < 1 << 8);
        assert_eq!(
            HashValue::random(10, &mut ChaCha8Rng::seed_from_u64(0))
                .words()
                .len(),
            1
        );
    }

    #[test]
    fn incremental_updates_match_full_evaluation() {
        let h = BinHasher::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x: Vec<u8> = (0..50).map(|_| rng.gen_range(0..3)).collect();
        let f = h.function(key(2, 1), 50, 70);
        let mut r = f.residues(&x);
        for _ in 0..200 {
            let pos = rng.gen_range(0..50);
            let to = rng.gen_range(0..3);
            f.update(&mut r, pos, x[pos], to);
            x[pos] = to;
            assert_eq!(f.finish(&r), f.eval(&x));
        }
    }

    #[test]
    fn collision_rate_near_two_to_minus_bits() {
        let h = BinHasher::new(99);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<u8> = (0..64).map(|_| rng.gen_range(0..2)).collect();
        let mut y = x.clone();
        y[17] ^= 1;
        let trials = 40_000;
        let collisions = (0..trials)
            .filter(|&c| h.hash(key(1, c), &x, 6) == h.hash(key(1, c), &y, 6))
            .count();
        let rate = collisions as f64 / trials as f64;
        assert!((rate - 1.0 / 64.0).abs() < 0.004, "{rate}");
    }
}
