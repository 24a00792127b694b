//! Slepian-Wolf polytopes and the fixed-rate achievable regions.
//!
//! `R_k` is the set of rate vectors whose restriction to every `k`-subset
//! of sensors lies in the Slepian-Wolf region of that subset. Deterministic
//! fixed-rate coding achieves `R_{max(1, m - 2t)}`, randomized fixed-rate
//! coding achieves `R_{m - t}`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::info::{JointPmf, SensorSet};
use crate::maxent::{closed_form_t1_with_pair, subsets_of_size};

/// Slack allowed on every rate inequality, so corner points pass.
pub const RATE_TOLERANCE: f64 = 1e-9;

/// Largest `m` accepted by [`min_sum_rate`].
pub const MAX_LP_SENSORS: usize = 6;

/// Per-sensor rates in bits per symbol.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RatePoint(Vec<f64>);

impl RatePoint {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(r) = rates.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return invalid(format!("rate {r} is not a finite nonnegative number"));
        }
        Ok(RatePoint(rates))
    }

    pub fn rates(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for RatePoint {
    type Err = Error;

    /// Comma-separated rates, e.g. `1.0,0.8,0.9`.
    fn from_str(s: &str) -> Result<Self> {
        let rates = s
            .split(',')
            .map(|r| {
                r.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("cannot parse rate {r:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        RatePoint::new(rates)
    }
}

/// A violated inequality `sum_{i in u} R_i >= H(X_u | X_{s \ u})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwViolation {
    #[serde(serialize_with = "one_based")]
    pub subset: SensorSet,
    #[serde(serialize_with = "one_based")]
    pub within: SensorSet,
    pub rate_sum: f64,
    pub required: f64,
}

fn one_based<S: serde::Serializer>(s: &SensorSet, ser: S) -> std::result::Result<S::Ok, S::Error> {
    s.to_one_based().serialize(ser)
}

impl fmt::Display for SwViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rates on {} sum to {:.6} < H(X_{} | rest of {}) = {:.6}",
            self.subset, self.rate_sum, self.subset, self.within, self.required
        )
    }
}

/// Joint entropies of every subset of sensors, indexed by bitmask.
struct EntropyTable(Vec<f64>);

impl EntropyTable {
    fn new(p: &JointPmf) -> Self {
        let m = p.num_sensors();
        EntropyTable(
            (0u32..(1 << m))
                .map(|b| {
                    let s = SensorSet::from_bits(b);
                    if s.is_empty() {
                        0.0
                    } else {
                        p.entropy(s).expect("valid subset")
                    }
                })
                .collect(),
        )
    }

    fn h(&self, s: SensorSet) -> f64 {
        self.0[s.bits() as usize]
    }

    fn conditional(&self, u: SensorSet, given: SensorSet) -> f64 {
        (self.h(u.union(given)) - self.h(given)).max(0.0)
    }
}

/// Nonempty subsets of `s`, by increasing bitmask.
fn nonempty_subsets(s: SensorSet) -> impl Iterator<Item = SensorSet> {
    let full = s.bits();
    let mut sub = 0u32;
    std::iter::from_fn(move || {
        sub = (sub.wrapping_sub(full)) & full;
        (sub != 0).then_some(SensorSet::from_bits(sub))
    })
}

fn check_rates(rates: &RatePoint, p: &JointPmf) -> Result<()> {
    if rates.len() != p.num_sensors() {
        return invalid(format!(
            "{} rates given for {} sensors",
            rates.len(),
            p.num_sensors()
        ));
    }
    Ok(())
}

fn sw_violation(rates: &RatePoint, table: &EntropyTable, s: SensorSet) -> Option<SwViolation> {
    nonempty_subsets(s).find_map(|u| {
        let rate_sum: f64 = u.iter().map(|i| rates.rates()[i]).sum();
        let required = table.conditional(u, s.difference(u));
        (rate_sum < required - RATE_TOLERANCE).then_some(SwViolation {
            subset: u,
            within: s,
            rate_sum,
            required,
        })
    })
}

/// The first Slepian-Wolf inequality for the sources in `s` that the rates
/// violate, if any.
pub fn sw_first_violation(
    rates: &RatePoint,
    p: &JointPmf,
    s: SensorSet,
) -> Result<Option<SwViolation>> {
    check_rates(rates, p)?;
    if s.is_empty() || !s.within(p.num_sensors()) {
        return invalid(format!("{s} is not a nonempty set of sensors"));
    }
    Ok(sw_violation(rates, &EntropyTable::new(p), s))
}

/// `true` iff the rates of the members of `s` lie in the Slepian-Wolf
/// region of `X_s`.
pub fn sw_region_check(rates: &RatePoint, p: &JointPmf, s: SensorSet) -> Result<bool> {
    Ok(sw_first_violation(rates, p, s)?.is_none())
}

fn check_k(p: &JointPmf, k: usize) -> Result<()> {
    if k == 0 || k > p.num_sensors() {
        return invalid(format!("k = {k} must lie in 1..={}", p.num_sensors()));
    }
    Ok(())
}

/// First violated inequality of `R_k`, scanning `k`-subsets lexicographically.
pub fn rk_first_violation(
    rates: &RatePoint,
    p: &JointPmf,
    k: usize,
) -> Result<Option<SwViolation>> {
    check_rates(rates, p)?;
    check_k(p, k)?;
    let table = EntropyTable::new(p);
    Ok(subsets_of_size(p.num_sensors(), k)
        .into_iter()
        .find_map(|s| sw_violation(rates, &table, s)))
}

pub fn in_rk(rates: &RatePoint, p: &JointPmf, k: usize) -> Result<bool> {
    Ok(rk_first_violation(rates, p, k)?.is_none())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionMode {
    /// Deterministic encoders.
    Dfr,
    /// Randomized encoders.
    Rfr,
}

impl RegionMode {
    /// The subset size `k` with region `R_k` for this mode.
    pub fn k(self, m: usize, t: usize) -> usize {
        match self {
            RegionMode::Dfr => m.saturating_sub(2 * t).max(1),
            RegionMode::Rfr => m - t,
        }
    }
}

impl FromStr for RegionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dfr" => Ok(RegionMode::Dfr),
            "rfr" => Ok(RegionMode::Rfr),
            other => invalid(format!(
                "unknown region mode {other:?}, expected dfr or rfr"
            )),
        }
    }
}

impl fmt::Display for RegionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionMode::Dfr => "dfr",
            RegionMode::Rfr => "rfr",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionVerdict {
    pub mode: RegionMode,
    pub k: usize,
    pub achievable: bool,
    pub violation: Option<SwViolation>,
}

pub fn check_region(
    rates: &RatePoint,
    p: &JointPmf,
    t: usize,
    mode: RegionMode,
) -> Result<RegionVerdict> {
    let m = p.num_sensors();
    if t >= m {
        return invalid(format!("t = {t} must be below m = {m}"));
    }
    let k = mode.k(m, t);
    let violation = rk_first_violation(rates, p, k)?;
    Ok(RegionVerdict {
        mode,
        k,
        achievable: violation.is_none(),
        violation,
    })
}

pub fn dfr_check(rates: &RatePoint, p: &JointPmf, t: usize) -> Result<bool> {
    Ok(check_region(rates, p, t, RegionMode::Dfr)?.achievable)
}

pub fn rfr_check(rates: &RatePoint, p: &JointPmf, t: usize) -> Result<bool> {
    Ok(check_region(rates, p, t, RegionMode::Rfr)?.achievable)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinSumRate {
    pub k: usize,
    pub value: f64,
    pub point: RatePoint,
}

/// Minimum of `sum_i R_i` over `R_k`, by linear programming over every
/// inequality of every `k`-subset.
pub fn min_sum_rate(p: &JointPmf, k: usize) -> Result<MinSumRate> {
    check_k(p, k)?;
    let m = p.num_sensors();
    if m > MAX_LP_SENSORS {
        return invalid(format!(
            "min_sum_rate supports at most {MAX_LP_SENSORS} sensors"
        ));
    }
    let table = EntropyTable::new(p);
    let mut lp = minilp::Problem::new(minilp::OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..m)
        .map(|_| lp.add_var(1.0, (0.0, f64::INFINITY)))
        .collect();
    for s in subsets_of_size(m, k) {
        for u in nonempty_subsets(s) {
            let bound = table.conditional(u, s.difference(u));
            if bound > 0.0 {
                let expr: Vec<(minilp::Variable, f64)> = u.iter().map(|i| (vars[i], 1.0)).collect();
                lp.add_constraint(expr, minilp::ComparisonOp::Ge, bound);
            }
        }
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::NumericFailure(format!("sum-rate linear program failed: {e}")))?;
    let point = RatePoint::new(vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect())?;
    Ok(MinSumRate {
        k,
        value: point.sum(),
        point,
    })
}

/// Variable-rate versus randomized fixed-rate sum rate for three sensors
/// and one traitor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    /// `R*` with one traitor.
    pub variable_rate: f64,
    /// Minimum sum rate over `R_2`.
    pub fixed_rate_lower_bound: f64,
    /// `(H(X1X2) + H(X1X3) + H(X2X3)) / 2`.
    pub half_pairwise_sum: f64,
    /// `fixed_rate_lower_bound - variable_rate`.
    pub gap: f64,
    /// The pair maximizing the conditional mutual information, 1-based.
    pub maximizing_pair: (usize, usize),
    /// `I(X_i X_i' ; X_j)` for the maximizing pair `(i, i')` and the third sensor `j`.
    pub pair_information_with_third: f64,
    /// `I(X_i ; X_i' | X_j)`.
    pub pair_conditional_information: f64,
    /// Whether the first exceeds the second.
    pub condition_holds: bool,
}

pub fn gap_demo(p: &JointPmf) -> Result<GapReport> {
    if p.num_sensors() != 3 {
        return invalid("the gap demonstration needs exactly three sensors");
    }
    let (variable_rate, (i, j)) = closed_form_t1_with_pair(p)?;
    let fixed = min_sum_rate(p, 2)?;
    let table = EntropyTable::new(p);
    let half: f64 = subsets_of_size(3, 2)
        .into_iter()
        .map(|s| table.h(s))
        .sum::<f64>()
        / 2.0;
    let pair = SensorSet::from_indices([i, j]);
    let third = pair.complement(3);
    let with_third = p.mutual_information(pair, third)?;
    let conditional =
        p.conditional_mutual_information(SensorSet::singleton(i), SensorSet::singleton(j), third)?;
    Ok(GapReport {
        variable_rate,
        fixed_rate_lower_bound: fixed.value,
        half_pairwise_sum: half,
        gap: fixed.value - variable_rate,
        maximizing_pair: (i + 1, j + 1),
        pair_information_with_third: with_third,
        pair_conditional_information: conditional,
        condition_holds: with_third > conditional + RATE_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::closed_form_tm1;
    use crate::testutil::pmf_strategy;
    use proptest::prelude::*;

    fn set(ix: &[usize]) -> SensorSet {
        SensorSet::from_indices(ix.iter().copied())
    }

    fn rp(r: &[f64]) -> RatePoint {
        RatePoint::new(r.to_vec()).unwrap()
    }

    fn corr_pair() -> JointPmf {
        JointPmf::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap()
    }

    fn copies3() -> JointPmf {
        let mut w = vec![0.0; 8];
        w[0] = 0.5;
        w[7] = 0.5;
        JointPmf::new(vec![2, 2, 2], w).unwrap()
    }

    #[test]
    fn sw_examples() {
        let uni = JointPmf::uniform(vec![2, 2]).unwrap();
        assert!(sw_region_check(&rp(&[1.0, 1.0]), &uni, set(&[0, 1])).unwrap());
        let p = corr_pair();
        let corner = p.conditional_entropy(set(&[1]), set(&[0])).unwrap();
        assert!((corner - 0.721928).abs() < 1e-6);
        assert!(sw_region_check(&rp(&[1.0, corner]), &p, set(&[0, 1])).unwrap());
        assert!(!sw_region_check(&rp(&[1.0, corner - 1e-6]), &p, set(&[0, 1])).unwrap());
        let v = sw_first_violation(&rp(&[0.7, 0.7]), &p, set(&[0, 1]))
            .unwrap()
            .unwrap();
        assert_eq!(v.subset, set(&[0]));
        assert!((v.required - 0.721928).abs() < 1e-6);
        assert!(sw_region_check(&rp(&[1.0]), &p, set(&[0])).is_err());
    }

    #[test]
    fn rk_examples() {
        let p = JointPmf::new(
            vec![2, 2, 2],
            vec![0.2, 0.05, 0.05, 0.2, 0.1, 0.1, 0.1, 0.2],
        )
        .unwrap();
        let h: Vec<f64> = (0..3)
            .map(|i| p.entropy(SensorSet::singleton(i)).unwrap())
            .collect();
        assert!(in_rk(&rp(&h), &p, 2).unwrap());
        assert!(in_rk(&rp(&h), &p, 1).unwrap());
        let lower: Vec<f64> = h.iter().map(|x| x - 0.01).collect();
        assert!(!in_rk(&rp(&lower), &p, 1).unwrap());
        let point = min_sum_rate(&p, 3).unwrap().point;
        assert_eq!(
            in_rk(&point, &p, 3).unwrap(),
            sw_region_check(&point, &p, SensorSet::full(3)).unwrap()
        );
        assert!(in_rk(&rp(&h), &p, 0).is_err());
        assert!(in_rk(&rp(&h), &p, 4).is_err());
    }

    #[test]
    fn mode_subset_sizes() {
        assert_eq!(RegionMode::Dfr.k(3, 0), 3);
        assert_eq!(RegionMode::Rfr.k(3, 0), 3);
        assert_eq!(RegionMode::Dfr.k(3, 1), 1);
        assert_eq!(RegionMode::Rfr.k(3, 1), 2);
        assert_eq!(RegionMode::Dfr.k(5, 1), 3);
        assert_eq!(RegionMode::Rfr.k(4, 3), 1);
    }

    #[test]
    fn extreme_t() {
        let p = JointPmf::new(
            vec![2, 2, 2],
            vec![0.2, 0.05, 0.05, 0.2, 0.1, 0.1, 0.1, 0.2],
        )
        .unwrap();
        let r = rp(&[0.9, 0.3, 0.8]);
        let sw = sw_region_check(&r, &p, SensorSet::full(3)).unwrap();
        assert_eq!(dfr_check(&r, &p, 0).unwrap(), sw);
        assert_eq!(rfr_check(&r, &p, 0).unwrap(), sw);
        let h: Vec<f64> = (0..3)
            .map(|i| p.entropy(SensorSet::singleton(i)).unwrap())
            .collect();
        assert!(rfr_check(&rp(&h), &p, 2).unwrap());
        let mut short = h.clone();
        short[1] -= 1e-3;
        assert!(!rfr_check(&rp(&short), &p, 2).unwrap());
    }

    #[test]
    fn min_sum_rate_examples() {
        let p = JointPmf::new(vec![2, 3, 2], (1..=12).map(|x| x as f64 / 78.0).collect()).unwrap();
        assert!((min_sum_rate(&p, 3).unwrap().value - p.joint_entropy()).abs() < 1e-9);
        assert!((min_sum_rate(&p, 1).unwrap().value - closed_form_tm1(&p)).abs() < 1e-9);
        let r = min_sum_rate(&copies3(), 2).unwrap();
        assert!((r.value - 1.5).abs() < 1e-9);
        assert!(in_rk(&r.point, &copies3(), 2).unwrap());
    }

    #[test]
    fn gap_examples() {
        let indep = JointPmf::new(vec![2], vec![0.3, 0.7])
            .unwrap()
            .product(&JointPmf::uniform(vec![2, 2]).unwrap())
            .unwrap();
        let g = gap_demo(&indep).unwrap();
        assert!(g.gap.abs() < 1e-9);
        assert!((g.variable_rate - indep.joint_entropy()).abs() < 1e-12);

        // Three copies of one uniform bit: R* = 1 + 0, the pairwise constraints force 1.5.
        let g = gap_demo(&copies3()).unwrap();
        assert!((g.variable_rate - 1.0).abs() < 1e-12);
        assert!((g.fixed_rate_lower_bound - 1.5).abs() < 1e-9);
        assert!((g.gap - 0.5).abs() < 1e-9);
        assert!(g.condition_holds);
        assert!(gap_demo(&corr_pair()).is_err());
    }

    #[test]
    fn parsing() {
        assert_eq!(
            "1.0, 0.8,0.9".parse::<RatePoint>().unwrap(),
            rp(&[1.0, 0.8, 0.9])
        );
        assert!("1.0,x".parse::<RatePoint>().is_err());
        assert!("1.0,-1".parse::<RatePoint>().is_err());
        assert_eq!("rfr".parse::<RegionMode>().unwrap(), RegionMode::Rfr);
        assert!("abc".parse::<RegionMode>().is_err());
    }

    fn pmf_and_rates() -> impl Strategy<Value = (JointPmf, Vec<f64>)> {
        pmf_strategy(5, 2).prop_flat_map(|p| {
            let m = p.num_sensors();
            (Just(p), proptest::collection::vec(0.0f64..1.5, m))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn regions_nest((p, r) in pmf_and_rates()) {
            let m = p.num_sensors();
            let r = RatePoint::new(r).unwrap();
            for k in 1..=m {
                if in_rk(&r, &p, k).unwrap() {
                    for k2 in k..=m {
                        prop_assert!(in_rk(&r, &p, k2).unwrap());
                    }
                }
            }
            for t in 0..m {
                if dfr_check(&r, &p, t).unwrap() {
                    prop_assert!(rfr_check(&r, &p, t).unwrap());
                }
            }
        }

        #[test]
        fn min_sum_rate_properties(p in pmf_strategy(4, 3)) {
            let m = p.num_sensors();
            let mut prev = f64::INFINITY;
            for k in 1..=m {
                let r = min_sum_rate(&p, k).unwrap();
                prop_assert!(r.value <= prev + 1e-9);
                prop_assert!(in_rk(&r.point, &p, k).unwrap());
                prev = r.value;
            }
            prop_assert!((prev - p.joint_entropy()).abs() < 1e-9);
        }
    }
}
