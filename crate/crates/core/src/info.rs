//! Joint distributions over finite alphabets and the information measures
//! built on them.
//!
//! A [`JointPmf`] over `m` sensors stores its cells densely in row-major
//! order: the cell `(x_1, ..., x_m)` lives at
//! `sum_i x_i * stride_i` where `stride_m = 1` and
//! `stride_i = stride_{i+1} * |X_{i+1}|`, so the last sensor varies fastest.
//! Marginals over a [`SensorSet`] use the same convention restricted to the
//! members of the set in increasing index order.
//!
//! All entropies are in bits.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Probabilities below this are treated as exact zeros in `0 log 0`.
pub const ZERO_PROB: f64 = 1e-15;

/// Tolerance on the total mass of a user supplied pmf.
pub const SUM_TOLERANCE: f64 = 1e-12;

pub const MAX_SENSORS: usize = 32;

/// Symbols are stored as bytes in sequence blocks.
pub const MAX_ALPHABET: usize = 256;

/// A subset of the sensor indices `{0, ..., m-1}`, stored as a bitmask.
///
/// Displayed 1-based, e.g. `{1,3}`, to match the usual notation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SensorSet(u32);

impl SensorSet {
    pub const EMPTY: SensorSet = SensorSet(0);

    pub fn from_bits(bits: u32) -> Self {
        SensorSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// `{0, ..., m-1}`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_SENSORS, "at most {MAX_SENSORS} sensors");
        if m == MAX_SENSORS {
            SensorSet(u32::MAX)
        } else {
            SensorSet((1u32 << m) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_SENSORS, "sensor index {i} out of range");
        SensorSet(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(SensorSet::EMPTY, |acc, i| {
            acc.union(SensorSet::singleton(i))
        })
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_SENSORS && self.0 & (1 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        *self = self.union(SensorSet::singleton(i));
    }

    pub fn remove(&mut self, i: usize) {
        *self = self.difference(SensorSet::singleton(i));
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: SensorSet) -> SensorSet {
        SensorSet(self.0 | other.0)
    }

    pub fn intersection(self, other: SensorSet) -> SensorSet {
        SensorSet(self.0 & other.0)
    }

    pub fn difference(self, other: SensorSet) -> SensorSet {
        SensorSet(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: SensorSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset_of(self, other: SensorSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn complement(self, m: usize) -> SensorSet {
        SensorSet::full(m).difference(self)
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Members as 1-based indices, the form used in files and on the command line.
    pub fn to_one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    /// `true` if every member is below `m`.
    pub fn within(self, m: usize) -> bool {
        self.is_subset_of(SensorSet::full(m))
    }
}

impl fmt::Display for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

/// Serialized as the sorted 1-based member list.
impl Serialize for SensorSet {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.to_one_based())
    }
}

impl fmt::Debug for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `-sum p log2 p` over a probability vector, with `0 log 0 = 0`.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > ZERO_PROB)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// Dense joint probability mass function over `m` finite alphabets.
#[derive(Clone, PartialEq)]
pub struct JointPmf {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
}

impl fmt::Debug for JointPmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JointPmf")
            .field("alphabet_sizes", &self.sizes)
            .field("probs", &self.probs)
            .finish()
    }
}

fn strides_for(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    strides
}

fn checked_cells(sizes: &[usize]) -> Result<usize> {
    if sizes.is_empty() {
        return invalid("a joint pmf needs at least one sensor");
    }
    if sizes.len() > MAX_SENSORS {
        return invalid(format!("at most {MAX_SENSORS} sensors are supported"));
    }
    let mut cells: usize = 1;
    for (i, &a) in sizes.iter().enumerate() {
        if a == 0 {
            return invalid(format!("alphabet_sizes[{i}] must be at least 1"));
        }
        if a > MAX_ALPHABET {
            return invalid(format!(
                "alphabet_sizes[{i}] = {a} exceeds the supported maximum of {MAX_ALPHABET}"
            ));
        }
        cells = cells
            .checked_mul(a)
            .ok_or_else(|| Error::InvalidArgument("joint alphabet too large".into()))?;
    }
    Ok(cells)
}

impl JointPmf {
    /// Validating constructor: entries non-negative and finite, total mass
    /// within [`SUM_TOLERANCE`] of one.
    pub fn new(alphabet_sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let cells = checked_cells(&alphabet_sizes)?;
        if probs.len() != cells {
            return invalid(format!(
                "probs has {} entries but the alphabet sizes require {cells}",
                probs.len()
            ));
        }
        for (idx, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return invalid(format!("probs[{idx}] = {p} is not a probability"));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("probs sum to {total}, expected 1"));
        }
        Ok(JointPmf {
            strides: strides_for(&alphabet_sizes),
            sizes: alphabet_sizes,
            probs,
        })
    }

    /// Builds a pmf from non-negative weights, dividing by their sum.
    pub fn from_weights(alphabet_sizes: Vec<usize>, mut weights: Vec<f64>) -> Result<Self> {
        let cells = checked_cells(&alphabet_sizes)?;
        if weights.len() != cells {
            return invalid(format!(
                "{} weights given but the alphabet sizes require {cells}",
                weights.len()
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return invalid("weights must be finite and non-negative");
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return invalid("weights sum to zero");
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(JointPmf {
            strides: strides_for(&alphabet_sizes),
            sizes: alphabet_sizes,
            probs: weights,
        })
    }

    pub fn uniform(alphabet_sizes: Vec<usize>) -> Result<Self> {
        let cells = checked_cells(&alphabet_sizes)?;
        Self::from_weights(alphabet_sizes, vec![1.0; cells])
    }

    pub fn point_mass(alphabet_sizes: Vec<usize>, symbols: &[usize]) -> Result<Self> {
        let cells = checked_cells(&alphabet_sizes)?;
        let mut probs = vec![0.0; cells];
        let strides = strides_for(&alphabet_sizes);
        if symbols.len() != alphabet_sizes.len()
            || symbols.iter().zip(&alphabet_sizes).any(|(x, a)| x >= a)
        {
            return invalid("point mass symbols do not fit the alphabets");
        }
        let idx: usize = symbols.iter().zip(&strides).map(|(x, s)| x * s).sum();
        probs[idx] = 1.0;
        Self::new(alphabet_sizes, probs)
    }

    /// Product distribution `self ⊗ other`; the sensors of `other` are
    /// appended after those of `self`.
    pub fn product(&self, other: &JointPmf) -> Result<Self> {
        let mut sizes = self.sizes.clone();
        sizes.extend_from_slice(&other.sizes);
        checked_cells(&sizes)?;
        let mut probs = Vec::with_capacity(self.probs.len() * other.probs.len());
        for &a in &self.probs {
            for &b in &other.probs {
                probs.push(a * b);
            }
        }
        Self::from_weights(sizes, probs)
    }

    pub fn num_sensors(&self) -> usize {
        self.sizes.len()
    }

    pub fn alphabet_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn alphabet_size(&self, sensor: usize) -> usize {
        self.sizes[sensor]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_cells(&self) -> usize {
        self.probs.len()
    }

    pub fn all_sensors(&self) -> SensorSet {
        SensorSet::full(self.num_sensors())
    }

    pub fn cell_index(&self, symbols: &[usize]) -> usize {
        symbols.iter().zip(&self.strides).map(|(x, s)| x * s).sum()
    }

    pub fn cell_symbols(&self, mut index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let x = index / s;
                index %= s;
                x
            })
            .collect()
    }

    pub fn prob(&self, symbols: &[usize]) -> f64 {
        self.probs[self.cell_index(symbols)]
    }

    /// Alphabet sizes of the members of `s`, in index order.
    pub fn sizes_of(&self, s: SensorSet) -> Vec<usize> {
        s.iter().map(|i| self.sizes[i]).collect()
    }

    fn check_set(&self, s: SensorSet, what: &str) -> Result<()> {
        if !s.within(self.num_sensors()) {
            return invalid(format!(
                "{what} {s} refers to sensors beyond m = {}",
                self.num_sensors()
            ));
        }
        Ok(())
    }

    /// For every joint cell, the index of the corresponding cell of the
    /// marginal on `s`.
    pub fn projection_map(&self, s: SensorSet) -> Vec<usize> {
        let members = s.to_vec();
        let sub_sizes: Vec<usize> = members.iter().map(|&i| self.sizes[i]).collect();
        let sub_strides = strides_for(&sub_sizes);
        let m = self.num_sensors();
        let mut digits = vec![0usize; m];
        let mut map = Vec::with_capacity(self.probs.len());
        for _ in 0..self.probs.len() {
            let idx = members
                .iter()
                .zip(&sub_strides)
                .map(|(&i, st)| digits[i] * st)
                .sum();
            map.push(idx);
            for d in (0..m).rev() {
                digits[d] += 1;
                if digits[d] < self.sizes[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        map
    }

    /// Marginal probabilities on `s` (row-major over the members of `s`).
    /// The marginal on the empty set is `[1.0]`.
    pub(crate) fn marginal_probs(&self, s: SensorSet) -> Vec<f64> {
        if s == self.all_sensors() {
            return self.probs.clone();
        }
        let cells: usize = s.iter().map(|i| self.sizes[i]).product();
        let mut out = vec![0.0; cells];
        for (p, idx) in self.probs.iter().zip(self.projection_map(s)) {
            out[idx] += p;
        }
        out
    }

    pub fn marginalize(&self, s: SensorSet) -> Result<JointPmf> {
        if s.is_empty() {
            return invalid("cannot marginalize onto the empty set");
        }
        self.check_set(s, "set")?;
        Self::from_weights(self.sizes_of(s), self.marginal_probs(s))
    }

    fn entropy_unchecked(&self, s: SensorSet) -> f64 {
        if s.is_empty() {
            return 0.0;
        }
        entropy_bits(&self.marginal_probs(s))
    }

    /// `H_q(X_s)`.
    pub fn entropy(&self, s: SensorSet) -> Result<f64> {
        if s.is_empty() {
            return invalid("entropy of the empty set is undefined here");
        }
        self.check_set(s, "set")?;
        Ok(self.entropy_unchecked(s))
    }

    pub fn joint_entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// `H_q(X_s | X_given) = H(X_s X_given) - H(X_given)`.
    pub fn conditional_entropy(&self, s: SensorSet, given: SensorSet) -> Result<f64> {
        if s.is_empty() {
            return invalid("conditional entropy needs a nonempty target set");
        }
        if !s.is_disjoint(given) {
            return invalid(format!("sets {s} and {given} overlap"));
        }
        self.check_set(s, "set")?;
        self.check_set(given, "conditioning set")?;
        let h = self.entropy_unchecked(s.union(given)) - self.entropy_unchecked(given);
        Ok(h.max(0.0))
    }

    /// `I_q(X_a ; X_b | X_given)`.
    pub fn conditional_mutual_information(
        &self,
        a: SensorSet,
        b: SensorSet,
        given: SensorSet,
    ) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return invalid("mutual information needs nonempty sets");
        }
        if !a.is_disjoint(b) || !a.is_disjoint(given) || !b.is_disjoint(given) {
            return invalid(format!("sets {a}, {b}, {given} are not pairwise disjoint"));
        }
        for s in [a, b, given] {
            self.check_set(s, "set")?;
        }
        let i = self.entropy_unchecked(a.union(given)) + self.entropy_unchecked(b.union(given))
            - self.entropy_unchecked(a.union(b).union(given))
            - self.entropy_unchecked(given);
        Ok(i.max(0.0))
    }

    pub fn mutual_information(&self, a: SensorSet, b: SensorSet) -> Result<f64> {
        self.conditional_mutual_information(a, b, SensorSet::EMPTY)
    }

    /// `q(x_s | x_{s^c} = context)`; `context` lists the symbols of the
    /// complement sensors in increasing index order.
    pub fn condition(&self, s: SensorSet, context: &[usize]) -> Result<JointPmf> {
        if s.is_empty() {
            return invalid("cannot condition onto the empty set");
        }
        self.check_set(s, "set")?;
        let rest = s.complement(self.num_sensors());
        let rest_members = rest.to_vec();
        if context.len() != rest_members.len() {
            return invalid(format!(
                "context has {} symbols, complement of {s} has {} sensors",
                context.len(),
                rest_members.len()
            ));
        }
        for (&i, &x) in rest_members.iter().zip(context) {
            if x >= self.sizes[i] {
                return invalid(format!(
                    "context symbol {x} out of range for sensor {}",
                    i + 1
                ));
            }
        }
        let members = s.to_vec();
        let sub_sizes = self.sizes_of(s);
        let sub_strides = strides_for(&sub_sizes);
        let cells: usize = sub_sizes.iter().product();
        let base: usize = rest_members
            .iter()
            .zip(context)
            .map(|(&i, &x)| x * self.strides[i])
            .sum();
        let mut weights = vec![0.0; cells];
        let mut digits = vec![0usize; members.len()];
        for w in weights.iter_mut() {
            let idx = base
                + members
                    .iter()
                    .zip(&digits)
                    .map(|(&i, &x)| x * self.strides[i])
                    .sum::<usize>();
            *w = self.probs[idx];
            for d in (0..members.len()).rev() {
                digits[d] += 1;
                if digits[d] < sub_sizes[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        debug_assert_eq!(
            sub_strides.first().copied().unwrap_or(1) * sub_sizes[0],
            cells
        );
        let total: f64 = weights.iter().sum();
        if total <= ZERO_PROB {
            return Err(Error::ZeroProbabilityContext);
        }
        Self::from_weights(sub_sizes, weights)
    }

    /// Maximum absolute cell difference. Panics if the shapes differ.
    pub fn linf_distance(&self, other: &JointPmf) -> f64 {
        assert_eq!(self.sizes, other.sizes, "pmf shapes differ");
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `k` i.i.d. draws, reproducible from `seed`.
    pub fn sample_block(&self, k: usize, seed: u64) -> Result<SequenceBlock> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_block_with(k, &mut rng)
    }

    pub fn sample_block_with<R: Rng + ?Sized>(
        &self,
        k: usize,
        rng: &mut R,
    ) -> Result<SequenceBlock> {
        if k == 0 {
            return invalid("block length must be at least 1");
        }
        let sampler = WeightedIndex::new(&self.probs)
            .map_err(|e| Error::NumericFailure(format!("cannot sample pmf: {e}")))?;
        let m = self.num_sensors();
        let mut rows = vec![Vec::with_capacity(k); m];
        for _ in 0..k {
            let mut idx = sampler.sample(rng);
            for (row, &stride) in rows.iter_mut().zip(&self.strides) {
                row.push((idx / stride) as u8);
                idx %= stride;
            }
        }
        SequenceBlock::new(self.sizes.clone(), rows)
    }

    pub fn to_file(&self) -> PmfFile {
        PmfFile {
            schema: Some(crate::SCHEMA_VERSION),
            alphabet_sizes: self.sizes.clone(),
            probs: self.probs.clone(),
        }
    }
}

/// On-disk JSON form of a [`JointPmf`]:
/// `{"schema": 1, "alphabet_sizes": [...], "probs": [...]}` with `probs`
/// row-major over `(x_1, ..., x_m)`, last sensor fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    pub alphabet_sizes: Vec<usize>,
    pub probs: Vec<f64>,
}

impl TryFrom<PmfFile> for JointPmf {
    type Error = Error;

    fn try_from(file: PmfFile) -> Result<Self> {
        if let Some(v) = file.schema {
            if v != crate::SCHEMA_VERSION {
                return invalid(format!("unsupported schema version {v}"));
            }
        }
        JointPmf::new(file.alphabet_sizes, file.probs)
    }
}

impl Serialize for JointPmf {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JointPmf {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let file = PmfFile::deserialize(deserializer)?;
        JointPmf::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// One round of source symbols: `m` rows of `k` symbols each.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SequenceBlock {
    sizes: Vec<usize>,
    rows: Vec<Vec<u8>>,
}

impl SequenceBlock {
    pub fn new(alphabet_sizes: Vec<usize>, rows: Vec<Vec<u8>>) -> Result<Self> {
        checked_cells(&alphabet_sizes)?;
        if rows.len() != alphabet_sizes.len() {
            return invalid("one row per sensor is required");
        }
        let k = rows[0].len();
        if k == 0 {
            return invalid("block length must be at least 1");
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return invalid(format!(
                    "row {} has length {}, expected {k}",
                    i + 1,
                    row.len()
                ));
            }
            if row.iter().any(|&x| x as usize >= alphabet_sizes[i]) {
                return invalid(format!("row {} has a symbol outside its alphabet", i + 1));
            }
        }
        Ok(SequenceBlock {
            sizes: alphabet_sizes,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_sensors(&self) -> usize {
        self.rows.len()
    }

    pub fn alphabet_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn row(&self, sensor: usize) -> &[u8] {
        &self.rows[sensor]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn set_row(&mut self, sensor: usize, row: Vec<u8>) -> Result<()> {
        if row.len() != self.len() {
            return invalid("replacement row has the wrong length");
        }
        if row.iter().any(|&x| x as usize >= self.sizes[sensor]) {
            return invalid("replacement row has a symbol outside its alphabet");
        }
        self.rows[sensor] = row;
        Ok(())
    }

    /// Per time index, the symbol tuple over `s` flattened row-major; also
    /// returns the size of the flattened alphabet. The empty set yields
    /// the constant symbol 0 over an alphabet of size 1.
    pub fn joint_symbols(&self, s: SensorSet) -> (Vec<u32>, usize) {
        let members = s.to_vec();
        let mut alphabet = 1usize;
        let mut out = vec![0u32; self.len()];
        for &i in &members {
            let a = self.sizes[i];
            for (acc, &x) in out.iter_mut().zip(&self.rows[i]) {
                *acc = *acc * a as u32 + x as u32;
            }
            alphabet *= a;
        }
        (out, alphabet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn corr_pair() -> JointPmf {
        JointPmf::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap()
    }

    fn s(ix: &[usize]) -> SensorSet {
        SensorSet::from_indices(ix.iter().copied())
    }

    #[test]
    fn entropy_examples() {
        let uni = JointPmf::uniform(vec![2, 2]).unwrap();
        assert!((uni.entropy(s(&[0])).unwrap() - 1.0).abs() < 1e-12);
        let point = JointPmf::point_mass(vec![2, 2], &[1, 0]).unwrap();
        assert_eq!(point.entropy(s(&[0, 1])).unwrap(), 0.0);
        let h = corr_pair().entropy(s(&[0, 1])).unwrap();
        assert!((h - 1.721928).abs() < 1e-6, "{h}");
        assert!(uni.entropy(SensorSet::EMPTY).is_err());
    }

    #[test]
    fn conditional_entropy_examples() {
        let uni = JointPmf::uniform(vec![2, 2]).unwrap();
        assert!((uni.conditional_entropy(s(&[1]), s(&[0])).unwrap() - 1.0).abs() < 1e-12);
        let diag = JointPmf::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(diag.conditional_entropy(s(&[1]), s(&[0])).unwrap().abs() < 1e-12);
        let h = corr_pair().conditional_entropy(s(&[1]), s(&[0])).unwrap();
        assert!((h - 0.721928).abs() < 1e-6);
        assert!(matches!(
            uni.conditional_entropy(s(&[0, 1]), s(&[1])),
            Err(Error::InvalidArgument(_))
        ));
        assert_eq!(
            uni.conditional_entropy(s(&[0]), SensorSet::EMPTY).unwrap(),
            uni.entropy(s(&[0])).unwrap()
        );
    }

    #[test]
    fn cmi_examples() {
        let triple = JointPmf::uniform(vec![2, 2, 2]).unwrap();
        assert!(
            triple
                .conditional_mutual_information(s(&[0]), s(&[1]), s(&[2]))
                .unwrap()
                .abs()
                < 1e-12
        );
        let same = JointPmf::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((same.mutual_information(s(&[0]), s(&[1])).unwrap() - 1.0).abs() < 1e-12);
        let i = corr_pair().mutual_information(s(&[0]), s(&[1])).unwrap();
        assert!((i - 0.278072).abs() < 1e-6);
        assert!(triple
            .conditional_mutual_information(s(&[0]), s(&[0, 1]), SensorSet::EMPTY)
            .is_err());
    }

    #[test]
    fn marginalize_examples() {
        let p = corr_pair();
        assert_eq!(p.marginalize(s(&[0, 1])).unwrap(), p);
        assert_eq!(p.marginalize(s(&[0])).unwrap().probs(), &[0.5, 0.5]);
        let a = JointPmf::new(vec![3], vec![0.2, 0.3, 0.5]).unwrap();
        let b = JointPmf::new(vec![2], vec![0.9, 0.1]).unwrap();
        let ab = a.product(&b).unwrap();
        assert!(ab.marginalize(s(&[1])).unwrap().linf_distance(&b) < 1e-15);
        assert!(ab.marginalize(s(&[0])).unwrap().linf_distance(&a) < 1e-15);
    }

    #[test]
    fn condition_examples() {
        let uni = JointPmf::uniform(vec![2, 3]).unwrap();
        let c = uni.condition(s(&[1]), &[1]).unwrap();
        assert!(c.linf_distance(&uni.marginalize(s(&[1])).unwrap()) < 1e-15);
        let diag = JointPmf::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(diag.condition(s(&[1]), &[0]).unwrap().probs(), &[1.0, 0.0]);
        let c = corr_pair().condition(s(&[1]), &[0]).unwrap();
        assert!((c.probs()[0] - 0.8).abs() < 1e-12 && (c.probs()[1] - 0.2).abs() < 1e-12);
        let zero = JointPmf::new(vec![2, 2], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(
            zero.condition(s(&[1]), &[1]),
            Err(Error::ZeroProbabilityContext)
        );
    }

    #[test]
    fn sampling() {
        let point = JointPmf::point_mass(vec![3, 2], &[2, 1]).unwrap();
        let b = point.sample_block(50, 3).unwrap();
        assert!(b.row(0).iter().all(|&x| x == 2) && b.row(1).iter().all(|&x| x == 1));
        let p = corr_pair();
        assert_eq!(
            p.sample_block(100, 9).unwrap(),
            p.sample_block(100, 9).unwrap()
        );
        assert_ne!(
            p.sample_block(100, 9).unwrap(),
            p.sample_block(100, 10).unwrap()
        );
        assert!(p.sample_block(0, 1).is_err());
    }

    #[test]
    fn law_of_large_numbers() {
        let uni = JointPmf::uniform(vec![2]).unwrap();
        let b = uni.sample_block(100_000, 42).unwrap();
        let ones = b.row(0).iter().filter(|&&x| x == 1).count() as f64 / 100_000.0;
        assert!((ones - 0.5).abs() < 0.01);
    }

    #[test]
    fn validation_errors() {
        assert!(JointPmf::new(vec![2, 2], vec![0.5, 0.5, 0.1, -0.1]).is_err());
        assert!(JointPmf::new(vec![2, 2], vec![0.5, 0.5, 0.1, 0.1]).is_err());
        assert!(JointPmf::new(vec![2, 0], vec![]).is_err());
        assert!(JointPmf::new(vec![], vec![1.0]).is_err());
        assert!(JointPmf::new(vec![2, 2], vec![0.25; 3]).is_err());
    }

    #[test]
    fn json_schema_row_major() {
        let json = r#"{"schema":1,"alphabet_sizes":[2,3],"probs":[0.1,0.2,0.3,0.1,0.2,0.1]}"#;
        let p: JointPmf = serde_json::from_str(json).unwrap();
        // (x1=1, x2=0) is the fourth entry.
        assert_eq!(p.prob(&[1, 0]), 0.1);
        assert_eq!(p.prob(&[0, 2]), 0.3);
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(back, json);
        let bad = r#"{"schema":2,"alphabet_sizes":[1],"probs":[1.0]}"#;
        assert!(serde_json::from_str::<JointPmf>(bad).is_err());
    }

    #[test]
    fn sensor_set_display() {
        assert_eq!(s(&[0, 2]).to_string(), "{1,3}");
        assert_eq!(SensorSet::full(3).to_vec(), vec![0, 1, 2]);
        assert_eq!(s(&[1]).complement(3), s(&[0, 2]));
    }

    mod props {
        use super::*;
        use crate::testutil::pmf_strategy;
        use proptest::prelude::*;

        fn subsets(m: usize) -> impl Iterator<Item = SensorSet> {
            (1u32..(1 << m)).map(SensorSet::from_bits)
        }

        proptest! {
            #[test]
            fn chain_rule_and_nonnegativity(q in pmf_strategy(4, 3)) {
                let m = q.num_sensors();
                for s in subsets(m) {
                    for given in subsets(m).filter(|g| g.is_disjoint(s)) {
                        let joint = q.entropy(s.union(given)).unwrap();
                        let split = q.entropy(given).unwrap() + q.conditional_entropy(s, given).unwrap();
                        prop_assert!((joint - split).abs() < 1e-9);
                        prop_assert!(q.conditional_entropy(s, given).unwrap() >= -1e-12);
                    }
                    for b in subsets(m).filter(|b| b.is_disjoint(s)) {
                        let rest = s.union(b).complement(m);
                        prop_assert!(q.conditional_mutual_information(s, b, rest).unwrap() >= -1e-12);
                    }
                }
            }

            #[test]
            fn marginalization_consistency(q in pmf_strategy(4, 3)) {
                let m = q.num_sensors();
                for s in subsets(m) {
                    let qs = q.marginalize(s).unwrap();
                    let members = s.to_vec();
                    for local in subsets(s.len()) {
                        let global = SensorSet::from_indices(local.iter().map(|i| members[i]));
                        let twice = qs.marginalize(local).unwrap();
                        prop_assert!(twice.linf_distance(&q.marginalize(global).unwrap()) < 1e-12);
                    }
                }
            }

            #[test]
            fn condition_then_mix(q in pmf_strategy(3, 3), bits in 1u32..8) {
                let m = q.num_sensors();
                let s = SensorSet::from_bits(bits).intersection(SensorSet::full(m));
                prop_assume!(!s.is_empty() && s != SensorSet::full(m));
                let rest = s.complement(m);
                let ctx_marg = q.marginal_probs(rest);
                let target = q.marginalize(s).unwrap();
                let mut mix = vec![0.0; target.num_cells()];
                let ctx_sizes = q.sizes_of(rest);
                for (idx, &w) in ctx_marg.iter().enumerate() {
                    let mut rem = idx;
                    let mut ctx = vec![0; ctx_sizes.len()];
                    for d in (0..ctx_sizes.len()).rev() {
                        ctx[d] = rem % ctx_sizes[d];
                        rem /= ctx_sizes[d];
                    }
                    match q.condition(s, &ctx) {
                        Ok(c) => mix.iter_mut().zip(c.probs()).for_each(|(a, b)| *a += w * b),
                        Err(e) => {
                            prop_assert_eq!(e, Error::ZeroProbabilityContext);
                            prop_assert!(w <= ZERO_PROB);
                        }
                    }
                }
                for (a, b) in mix.iter().zip(target.probs()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
