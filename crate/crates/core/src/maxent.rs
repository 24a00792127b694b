//! Covers of the sensor set, maximum-entropy distributions under marginal
//! constraints, and the minimum variable-rate sum rate `R*`.
//!
//! For a cover `V` the family `Q(V)` holds every `q` whose marginal on each
//! member of `V` equals that of `p`. `R*` is the largest joint entropy
//! attained over the families of all minimal covers.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::info::{entropy_bits, JointPmf, SensorSet};

/// A family of equally sized sensor subsets.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Cover {
    m: usize,
    t: usize,
    sets: Vec<SensorSet>,
}

impl Cover {
    /// Every member must have exactly `m - t` elements drawn from
    /// `{0, ..., m-1}`; members must be distinct.
    pub fn new(m: usize, t: usize, sets: Vec<SensorSet>) -> Result<Self> {
        if m == 0 || t >= m {
            return invalid(format!("need 0 <= t < m, got m = {m}, t = {t}"));
        }
        for (n, s) in sets.iter().enumerate() {
            if !s.within(m) || s.len() != m - t {
                return invalid(format!(
                    "cover member {s} must be a subset of size {}",
                    m - t
                ));
            }
            if sets[..n].contains(s) {
                return invalid(format!("cover member {s} repeated"));
            }
        }
        Ok(Cover { m, t, sets })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn sets(&self) -> &[SensorSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn union(&self) -> SensorSet {
        self.sets
            .iter()
            .fold(SensorSet::EMPTY, |acc, &s| acc.union(s))
    }

    pub fn covers_all(&self) -> bool {
        self.union() == SensorSet::full(self.m)
    }

    /// No member can be dropped without shrinking the union.
    pub fn is_minimal(&self) -> bool {
        (0..self.sets.len()).all(|n| has_private_element(&self.sets, n))
    }

    pub fn retain(&mut self, keep: impl FnMut(&SensorSet) -> bool) {
        self.sets.retain(keep);
    }
}

impl fmt::Display for Cover {
    /// Members separated by `;`, e.g. `{1,2};{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, s) in self.sets.iter().enumerate() {
            if n > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl Serialize for Cover {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let sets: Vec<Vec<usize>> = self.sets.iter().map(|s| s.to_one_based()).collect();
        sets.serialize(serializer)
    }
}

fn has_private_element(sets: &[SensorSet], n: usize) -> bool {
    let others = sets
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != n)
        .fold(SensorSet::EMPTY, |acc, (_, &s)| acc.union(s));
    !sets[n].difference(others).is_empty()
}

/// All `size`-element subsets of `{0, ..., m-1}` in lexicographic order.
pub fn subsets_of_size(m: usize, size: usize) -> Vec<SensorSet> {
    fn rec(start: usize, m: usize, left: usize, cur: SensorSet, out: &mut Vec<SensorSet>) {
        if left == 0 {
            out.push(cur);
            return;
        }
        for i in start..=m - left {
            rec(i + 1, m, left - 1, cur.union(SensorSet::singleton(i)), out);
        }
    }
    let mut out = Vec::new();
    if size <= m {
        rec(0, m, size, SensorSet::EMPTY, &mut out);
    }
    out
}

/// Every inclusion-minimal family of `(m - t)`-subsets whose union is the
/// whole sensor set.
pub fn enumerate_minimal_covers(m: usize, t: usize) -> Result<Vec<Cover>> {
    if m == 0 || m > crate::info::MAX_SENSORS || t >= m {
        return invalid(format!("need 0 <= t < m, got m = {m}, t = {t}"));
    }
    let candidates = subsets_of_size(m, m - t);
    let full = SensorSet::full(m);
    let mut out = Vec::new();
    let mut chosen = Vec::new();

    fn dfs(
        start: usize,
        union: SensorSet,
        full: SensorSet,
        candidates: &[SensorSet],
        chosen: &mut Vec<SensorSet>,
        out: &mut Vec<Vec<SensorSet>>,
    ) {
        for (n, &s) in candidates.iter().enumerate().skip(start) {
            if s.is_subset_of(union) {
                continue;
            }
            chosen.push(s);
            let ok = (0..chosen.len()).all(|j| has_private_element(chosen, j));
            if ok {
                let u = union.union(s);
                if u == full {
                    out.push(chosen.clone());
                } else {
                    dfs(n + 1, u, full, candidates, chosen, out);
                }
            }
            chosen.pop();
        }
    }

    dfs(
        0,
        SensorSet::EMPTY,
        full,
        &candidates,
        &mut chosen,
        &mut out,
    );
    out.into_iter().map(|sets| Cover::new(m, t, sets)).collect()
}

/// Stopping rule for iterative proportional scaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpfOptions {
    /// Target L∞ error over all constrained marginals.
    pub tol: f64,
    /// Maximum number of full passes over the constraints.
    pub max_cycles: usize,
}

impl Default for IpfOptions {
    fn default() -> Self {
        IpfOptions {
            tol: 1e-9,
            max_cycles: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaxEntSolution {
    pub q: JointPmf,
    /// Joint entropy of `q` in bits.
    pub entropy: f64,
    /// Full constraint cycles performed.
    pub iterations: usize,
    /// Largest L∞ distance between a constrained marginal of `q` and of `p`.
    pub marginal_error: f64,
}

struct Constraint {
    map: Vec<usize>,
    target: Vec<f64>,
}

fn constraints(p: &JointPmf, sets: &[SensorSet]) -> Vec<Constraint> {
    sets.iter()
        .map(|&s| Constraint {
            map: p.projection_map(s),
            target: p.marginal_probs(s),
        })
        .collect()
}

fn marginal_of(q: &[f64], c: &Constraint, buf: &mut [f64]) {
    buf.iter_mut().for_each(|b| *b = 0.0);
    for (&x, &idx) in q.iter().zip(&c.map) {
        buf[idx] += x;
    }
}

fn max_error(q: &[f64], cs: &[Constraint], buf: &mut Vec<f64>) -> f64 {
    let mut err: f64 = 0.0;
    for c in cs {
        buf.resize(c.target.len(), 0.0);
        marginal_of(q, c, buf);
        for (a, b) in buf.iter().zip(&c.target) {
            err = err.max((a - b).abs());
        }
    }
    err
}

/// Above this many candidate cells the support is not refined and every
/// cell with positive constrained marginals is kept.
const SUPPORT_LP_MAX_CELLS: usize = 4096;

/// Cells that some member of the family constrained by `sets` puts
/// positive mass on. The support of `p` always qualifies; every other cell
/// whose constrained marginals are all positive is settled by linear
/// programming.
pub fn feasible_support(p: &JointPmf, sets: &[SensorSet]) -> Result<Vec<bool>> {
    let cs = constraints(p, sets);
    let cells = p.num_cells();
    let candidate: Vec<bool> = (0..cells)
        .map(|x| cs.iter().all(|c| c.target[c.map[x]] > 0.0))
        .collect();
    let mut support: Vec<bool> = p.probs().iter().map(|&x| x > 0.0).collect();
    let mut unknown: Vec<usize> = (0..cells)
        .filter(|&x| candidate[x] && !support[x])
        .collect();
    if candidate.iter().filter(|&&c| c).count() > SUPPORT_LP_MAX_CELLS {
        unknown.iter().for_each(|&x| support[x] = true);
        return Ok(support);
    }
    while !unknown.is_empty() {
        let mut open = vec![false; cells];
        unknown.iter().for_each(|&x| open[x] = true);
        let mut lp = minilp::Problem::new(minilp::OptimizationDirection::Maximize);
        let vars: Vec<Option<minilp::Variable>> = (0..cells)
            .map(|x| {
                candidate[x].then(|| {
                    let obj = if open[x] { 1.0 } else { 0.0 };
                    lp.add_var(obj, (0.0, 1.0))
                })
            })
            .collect();
        for c in &cs {
            let mut rows: Vec<Vec<(minilp::Variable, f64)>> = vec![Vec::new(); c.target.len()];
            for (x, v) in vars.iter().enumerate() {
                if let Some(v) = v {
                    rows[c.map[x]].push((*v, 1.0));
                }
            }
            for (row, &rhs) in rows.into_iter().zip(&c.target) {
                if !row.is_empty() {
                    lp.add_constraint(row, minilp::ComparisonOp::Eq, rhs);
                }
            }
        }
        let sol = lp
            .solve()
            .map_err(|e| Error::NumericFailure(format!("support linear program failed: {e}")))?;
        if sol.objective() <= 1e-11 {
            break;
        }
        let before = unknown.len();
        unknown.retain(|&x| {
            let v = *sol.var_value(vars[x].expect("candidate cell"));
            if v > 1e-11 {
                support[x] = true;
                false
            } else {
                true
            }
        });
        if unknown.len() == before {
            break;
        }
    }
    Ok(support)
}

/// Iterative proportional scaling from `start` onto the marginals of `p` on
/// `sets`. From the uniform start this is the maximum-entropy member of the
/// family; from any other start it is the I-projection of `start`.
pub fn ipf(
    p: &JointPmf,
    sets: &[SensorSet],
    start: &JointPmf,
    opts: &IpfOptions,
) -> Result<MaxEntSolution> {
    if start.alphabet_sizes() != p.alphabet_sizes() {
        return invalid("starting point must have the shape of p");
    }
    for &s in sets {
        if s.is_empty() || !s.within(p.num_sensors()) {
            return invalid(format!(
                "constraint set {s} is not a nonempty set of sensors"
            ));
        }
    }
    let cs = constraints(p, sets);
    let mut q = start.probs().to_vec();
    let mut buf = Vec::new();
    let mut err = max_error(&q, &cs, &mut buf);
    let mut cycles = 0;
    while err >= opts.tol && cycles < opts.max_cycles {
        for c in &cs {
            buf.resize(c.target.len(), 0.0);
            marginal_of(&q, c, &mut buf);
            for r in buf.iter_mut().zip(&c.target) {
                let (cur, target) = r;
                *cur = if *cur > 0.0 { target / *cur } else { 0.0 };
            }
            for (x, &idx) in q.iter_mut().zip(&c.map) {
                *x *= buf[idx];
            }
        }
        cycles += 1;
        err = max_error(&q, &cs, &mut buf);
        if !err.is_finite() {
            return Err(Error::NumericFailure(
                "iterative scaling produced a non-finite value".into(),
            ));
        }
    }
    if err >= opts.tol {
        return Err(Error::ConvergenceFailure {
            iterations: cycles,
            achieved_error: err,
        });
    }
    let q = JointPmf::from_weights(p.alphabet_sizes().to_vec(), q)?;
    Ok(MaxEntSolution {
        entropy: q.joint_entropy(),
        q,
        iterations: cycles,
        marginal_error: err,
    })
}

/// The maximum-entropy member of `Q(V)`.
pub fn max_entropy_over_family(
    p: &JointPmf,
    cover: &Cover,
    opts: &IpfOptions,
) -> Result<MaxEntSolution> {
    if cover.m() != p.num_sensors() {
        return invalid(format!(
            "cover is over {} sensors, pmf over {}",
            cover.m(),
            p.num_sensors()
        ));
    }
    let support = feasible_support(p, cover.sets())?;
    let weights = support
        .iter()
        .map(|&on| if on { 1.0 } else { 0.0 })
        .collect();
    let start = JointPmf::from_weights(p.alphabet_sizes().to_vec(), weights)?;
    ipf(p, cover.sets(), &start, opts)
}

#[derive(Clone, Debug)]
pub struct CoverSolution {
    pub cover: Cover,
    pub solution: MaxEntSolution,
}

#[derive(Clone, Debug)]
pub struct SumRateReport {
    pub r_star: f64,
    /// Index into `per_cover` of the maximizing cover.
    pub best: usize,
    pub per_cover: Vec<CoverSolution>,
}

impl SumRateReport {
    pub fn best(&self) -> &CoverSolution {
        &self.per_cover[self.best]
    }
}

/// `R*` together with the per-cover maximizers. Ties keep the first cover
/// in enumeration order.
pub fn sum_rate_star_report(p: &JointPmf, t: usize, opts: &IpfOptions) -> Result<SumRateReport> {
    let covers = enumerate_minimal_covers(p.num_sensors(), t)?;
    let per_cover = covers
        .into_iter()
        .map(|cover| {
            let solution = max_entropy_over_family(p, &cover, opts)?;
            Ok(CoverSolution { cover, solution })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (n, c) in per_cover.iter().enumerate() {
        if c.solution.entropy > per_cover[best].solution.entropy {
            best = n;
        }
    }
    Ok(SumRateReport {
        r_star: per_cover[best].solution.entropy,
        best,
        per_cover,
    })
}

/// The minimum achievable variable-rate sum rate with up to `t` traitors.
pub fn sum_rate_star(p: &JointPmf, t: usize) -> Result<f64> {
    Ok(sum_rate_star_report(p, t, &IpfOptions::default())?.r_star)
}

/// `H(X_1 ... X_m) + max_{i < i'} I(X_i ; X_i' | rest)`, the single-traitor
/// value of `R*`. Also returns the maximizing pair.
pub fn closed_form_t1_with_pair(p: &JointPmf) -> Result<(f64, (usize, usize))> {
    let m = p.num_sensors();
    if m < 2 {
        return invalid("the single-traitor formula needs at least two sensors");
    }
    let mut best = (f64::NEG_INFINITY, (0, 1));
    for i in 0..m {
        for j in i + 1..m {
            let a = SensorSet::singleton(i);
            let b = SensorSet::singleton(j);
            let rest = a.union(b).complement(m);
            let cmi = p.conditional_mutual_information(a, b, rest)?;
            if cmi > best.0 {
                best = (cmi, (i, j));
            }
        }
    }
    Ok((p.joint_entropy() + best.0, best.1))
}

pub fn closed_form_t1(p: &JointPmf) -> Result<f64> {
    Ok(closed_form_t1_with_pair(p)?.0)
}

/// `sum_i H(X_i)`, the value of `R*` when all but one sensor may be traitors.
pub fn closed_form_tm1(p: &JointPmf) -> f64 {
    (0..p.num_sensors())
        .map(|i| entropy_bits(&p.marginal_probs(SensorSet::singleton(i))))
        .sum()
}

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub entropy: f64,
    pub constraint_error: f64,
    pub q: JointPmf,
}

/// Random-search lower bound on the entropy supremum over `Q(V)`.
///
/// Draws `samples` points uniformly from the simplex, projects each onto
/// the constraints, keeps the best, then spends `refine_steps` on
/// multiplicative perturbations of the incumbent. Limited to joint
/// alphabets of at most 64 cells.
pub fn brute_force_maxent(
    p: &JointPmf,
    cover: &Cover,
    samples: usize,
    refine_steps: usize,
    seed: u64,
) -> Result<BruteForceResult> {
    let cells = p.num_cells();
    if cells > 64 {
        return invalid(format!(
            "brute force search limited to 64 cells, got {cells}"
        ));
    }
    let sizes = p.alphabet_sizes().to_vec();
    let opts = IpfOptions {
        tol: 1e-10,
        max_cycles: 5_000,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0, 1.0).map_err(|e| Error::NumericFailure(e.to_string()))?;
    let project = |w: Vec<f64>| -> Option<MaxEntSolution> {
        let start = JointPmf::from_weights(sizes.clone(), w).ok()?;
        ipf(p, cover.sets(), &start, &opts).ok()
    };

    let support = feasible_support(p, cover.sets())?;
    let mut best: Option<MaxEntSolution> = None;
    for _ in 0..samples.max(1) {
        let w: Vec<f64> = (0..cells)
            .map(|x| {
                if support[x] {
                    gamma.sample(&mut rng) + 1e-300
                } else {
                    0.0
                }
            })
            .collect();
        if let Some(sol) = project(w) {
            if best.as_ref().is_none_or(|b| sol.entropy > b.entropy) {
                best = Some(sol);
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::NumericFailure("no feasible sample found".into()))?;
    let mut sigma = 0.5;
    for step in 0..refine_steps {
        let w: Vec<f64> = best
            .q
            .probs()
            .iter()
            .zip(&support)
            .map(|(&x, &on)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if on {
                    (x + 1e-12) * (sigma * z).exp()
                } else {
                    0.0
                }
            })
            .collect();
        if let Some(sol) = project(w) {
            if sol.entropy > best.entropy {
                best = sol;
            }
        }
        if (step + 1) % 200 == 0 {
            sigma = (sigma * 0.7).max(1e-3);
        }
    }
    Ok(BruteForceResult {
        entropy: best.entropy,
        constraint_error: best.marginal_error,
        q: best.q,
    })
}
