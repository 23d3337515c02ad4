//! Welfare indicators and weighted quantile machinery.
//!
//! Two indicators rank households: adjusted disposable income and total
//! consumption expenditure, both including non-monetary components and both
//! used per capita. The income adjustment fills a configurable fraction of
//! the deficit observed when monetary consumption exceeds monetary income,
//! which corrects under-reported incomes at the bottom of the distribution.

use thiserror::Error;

use crate::microdata::MicrodataSet;

/// Fraction of the consumption-income deficit added back to income.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustmentPolicy {
    z_share: f64,
}

impl AdjustmentPolicy {
    pub fn new(z_share: f64) -> Result<AdjustmentPolicy, WelfareError> {
        if !(0.0..=1.0).contains(&z_share) {
            return Err(WelfareError::InvalidZShare(z_share));
        }
        Ok(AdjustmentPolicy { z_share })
    }

    pub fn z_share(&self) -> f64 {
        self.z_share
    }
}

impl Default for AdjustmentPolicy {
    fn default() -> Self {
        AdjustmentPolicy { z_share: 0.5 }
    }
}

#[derive(Debug, Error)]
pub enum WelfareError {
    #[error("z_share {0} outside [0, 1]")]
    InvalidZShare(f64),
    #[error("quantile groups need k >= 2, got {0}")]
    BadGroupCount(usize),
    #[error("percentile fraction {0} outside (0, 1)")]
    BadPercentile(f64),
    #[error("empty set")]
    EmptySet,
}

/// If monetary consumption exceeds monetary income, fill `z_share` of the
/// deficit; otherwise leave income unchanged.
pub fn adjust_income(y_monetary: f64, c_monetary: f64, policy: &AdjustmentPolicy) -> f64 {
    if c_monetary > y_monetary {
        y_monetary + policy.z_share * (c_monetary - y_monetary)
    } else {
        y_monetary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WelfareKind {
    DisposableIncomeAdjusted,
    TotalExpenditure,
}

impl WelfareKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WelfareKind::DisposableIncomeAdjusted => "disposable_income_adjusted",
            WelfareKind::TotalExpenditure => "total_expenditure",
        }
    }
}

/// Per-household indicator values, aligned with the set's storage order,
/// with a per-capita view for ranking and poverty.
#[derive(Debug, Clone, PartialEq)]
pub struct WelfareIndicator {
    pub kind: WelfareKind,
    household_values: Vec<f64>,
    per_capita: Vec<f64>,
}

impl WelfareIndicator {
    /// Wrap externally computed household-level values (e.g. net-of-tax
    /// indicators). Values must align with the set's storage order.
    pub fn from_values(kind: WelfareKind, set: &MicrodataSet, household_values: Vec<f64>) -> Self {
        assert_eq!(household_values.len(), set.len());
        let per_capita = set
            .households()
            .iter()
            .zip(&household_values)
            .map(|(h, v)| v / h.size as f64)
            .collect();
        WelfareIndicator {
            kind,
            household_values,
            per_capita,
        }
    }

    pub fn household_values(&self) -> &[f64] {
        &self.household_values
    }

    pub fn per_capita(&self) -> &[f64] {
        &self.per_capita
    }
}

/// Build a welfare indicator over the whole set.
///
/// Adjusted disposable income: the monetary adjustment plus non-monetary
/// income. Total expenditure: monetary plus non-monetary spending.
pub fn indicator(
    set: &MicrodataSet,
    kind: WelfareKind,
    policy: &AdjustmentPolicy,
) -> WelfareIndicator {
    let values = set
        .households()
        .iter()
        .map(|h| match kind {
            WelfareKind::DisposableIncomeAdjusted => {
                adjust_income(h.income_monetary, h.monetary_expenditure(), policy)
                    + h.income_nonmonetary
            }
            WelfareKind::TotalExpenditure => h.total_expenditure(),
        })
        .collect();
    WelfareIndicator::from_values(kind, set, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Each household counts its sampling weight.
    Household,
    /// Each household counts weight * size (population statements).
    Person,
}

impl WeightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::Household => "household",
            WeightMode::Person => "person",
        }
    }
}

/// Assignment of every household to one of `k` weighted quantile groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    pub k: usize,
    pub weight_mode: WeightMode,
    /// 1-based group per household, aligned with the set's storage order.
    groups: Vec<u32>,
}

impl GroupAssignment {
    /// Build an assignment from explicit 1-based group labels (fixtures,
    /// single-group tables).
    pub fn from_groups(k: usize, weight_mode: WeightMode, groups: Vec<u32>) -> GroupAssignment {
        assert!(k >= 1);
        assert!(groups.iter().all(|&g| g >= 1 && g as usize <= k));
        GroupAssignment {
            k,
            weight_mode,
            groups,
        }
    }

    pub fn group_of_index(&self, idx: usize) -> u32 {
        self.groups[idx]
    }

    pub fn groups(&self) -> &[u32] {
        &self.groups
    }

    pub fn write_csv(&self, set: &MicrodataSet, out: &mut dyn std::io::Write) -> std::io::Result<()> {
        writeln!(out, "household_id,group")?;
        for (h, g) in set.households().iter().zip(&self.groups) {
            writeln!(out, "{},{}", h.id, g)?;
        }
        Ok(())
    }
}

fn mode_weight(h: &crate::microdata::Household, mode: WeightMode) -> f64 {
    match mode {
        WeightMode::Household => h.weight,
        WeightMode::Person => h.weight * h.size as f64,
    }
}

/// Sort households by per-capita indicator (ties broken by id) and cut the
/// cumulative weight into `k` groups: household j lands in group
/// `min(k, floor(k * cum_before_j / total) + 1)`.
pub fn weighted_quantile_groups(
    set: &MicrodataSet,
    ind: &WelfareIndicator,
    k: usize,
    weight_mode: WeightMode,
) -> Result<GroupAssignment, WelfareError> {
    if k < 2 {
        return Err(WelfareError::BadGroupCount(k));
    }
    if set.is_empty() {
        return Err(WelfareError::EmptySet);
    }
    let values = ind.per_capita();
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| set.households()[a].id.cmp(&set.households()[b].id))
    });
    let total: f64 = set
        .households()
        .iter()
        .map(|h| mode_weight(h, weight_mode))
        .sum();
    let mut groups = vec![0u32; set.len()];
    let mut cum_before = 0.0;
    for &idx in &order {
        let g = ((k as f64 * cum_before / total).floor() as usize + 1).min(k);
        groups[idx] = g as u32;
        cum_before += mode_weight(&set.households()[idx], weight_mode);
    }
    Ok(GroupAssignment {
        k,
        weight_mode,
        groups,
    })
}

/// Lower weighted quantile (household weights): the smallest per-capita
/// value whose cumulative weight reaches `p` of the total.
pub fn weighted_percentile(
    set: &MicrodataSet,
    ind: &WelfareIndicator,
    p: f64,
) -> Result<f64, WelfareError> {
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(WelfareError::BadPercentile(p));
    }
    if set.is_empty() {
        return Err(WelfareError::EmptySet);
    }
    let values = ind.per_capita();
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| set.households()[a].id.cmp(&set.households()[b].id))
    });
    let total: f64 = set.households().iter().map(|h| h.weight).sum();
    let threshold = p * total;
    let mut cum = 0.0;
    for &idx in &order {
        cum += set.households()[idx].weight;
        if cum >= threshold {
            return Ok(values[idx]);
        }
    }
    Ok(values[*order.last().expect("non-empty")])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microdata::{Household, HouseholdId, MicrodataSet};

    fn set_of(rows: &[(u64, f64, u32, f64)]) -> MicrodataSet {
        // (id, weight, size, income_monetary)
        MicrodataSet::new(
            rows.iter()
                .map(|&(id, weight, size, income)| Household {
                    id: HouseholdId(id),
                    weight,
                    size,
                    income_monetary: income,
                    income_nonmonetary: 0.0,
                    expenditures: vec![],
                })
                .collect(),
        )
        .unwrap()
    }

    fn ind_of(set: &MicrodataSet, values: &[f64]) -> WelfareIndicator {
        WelfareIndicator::from_values(WelfareKind::TotalExpenditure, set, values.to_vec())
    }

    #[test]
    fn adjust_income_fills_half_the_deficit() {
        let half = AdjustmentPolicy::default();
        assert_eq!(adjust_income(100.0, 150.0, &half), 125.0);
        assert_eq!(adjust_income(200.0, 150.0, &half), 200.0);
        let full = AdjustmentPolicy::new(1.0).unwrap();
        assert_eq!(adjust_income(100.0, 150.0, &full), 150.0);
        assert!(AdjustmentPolicy::new(-0.1).is_err());
        assert!(AdjustmentPolicy::new(1.1).is_err());
    }

    #[test]
    fn indicator_adds_nonmonetary_income_after_adjustment() {
        let set = MicrodataSet::new(vec![Household {
            id: HouseholdId(1),
            weight: 1.0,
            size: 1,
            income_monetary: 100.0,
            income_nonmonetary: 30.0,
            expenditures: vec![],
        }])
        .unwrap();
        // no expenditure rows: C_mon = 0, no deficit
        let ind = indicator(&set, WelfareKind::DisposableIncomeAdjusted, &AdjustmentPolicy::default());
        assert_eq!(ind.household_values()[0], 130.0);
        assert_eq!(adjust_income(100.0, 150.0, &AdjustmentPolicy::default()) + 30.0, 155.0);
    }

    #[test]
    fn total_expenditure_sums_both_components() {
        use crate::rates::{Category, ItemSpec, RateSchedule, TagSet};
        let s = RateSchedule::new(vec![ItemSpec::new(
            "a",
            Category::OtherFood,
            0.1,
            TagSet::EMPTY,
        )])
        .unwrap();
        let set = MicrodataSet::new(vec![Household {
            id: HouseholdId(1),
            weight: 1.0,
            size: 2,
            income_monetary: 0.0,
            income_nonmonetary: 0.0,
            expenditures: vec![crate::microdata::Expenditure {
                item: s.lookup("a").unwrap(),
                monetary: 80.0,
                nonmonetary: 20.0,
            }],
        }])
        .unwrap();
        let ind = indicator(&set, WelfareKind::TotalExpenditure, &AdjustmentPolicy::default());
        assert_eq!(ind.household_values()[0], 100.0);
        assert_eq!(ind.per_capita()[0], 50.0);
    }

    #[test]
    fn z_zero_reproduces_raw_income() {
        let z0 = AdjustmentPolicy::new(0.0).unwrap();
        for (y, c) in [(0.0, 50.0), (100.0, 150.0), (100.0, 90.0)] {
            assert_eq!(adjust_income(y, c, &z0), y);
        }
    }

    #[test]
    fn equal_weight_groups_follow_value_order() {
        let set = set_of(&(1..=10).map(|i| (i, 1.0, 1, 0.0)).collect::<Vec<_>>());
        let ind = ind_of(&set, &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0]);
        let assign = weighted_quantile_groups(&set, &ind, 10, WeightMode::Household).unwrap();
        assert_eq!(assign.groups(), (1..=10).map(|g| g as u32).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn cumulative_weight_cuts_match_enumeration() {
        // weights (1, 1, 2), values (5, 10, 20), k = 2:
        // cum_before = 0, 1, 2 against total 4 -> groups (1, 1, 2)
        let set = set_of(&[(1, 1.0, 1, 0.0), (2, 1.0, 1, 0.0), (3, 2.0, 1, 0.0)]);
        let ind = ind_of(&set, &[5.0, 10.0, 20.0]);
        let assign = weighted_quantile_groups(&set, &ind, 2, WeightMode::Household).unwrap();
        assert_eq!(assign.groups(), &[1, 1, 2]);
    }

    #[test]
    fn ties_break_by_household_id() {
        let set = set_of(&(1..=4).map(|i| (i, 1.0, 1, 0.0)).collect::<Vec<_>>());
        let tied = ind_of(&set, &[7.0, 7.0, 7.0, 7.0]);
        let distinct = ind_of(&set, &[1.0, 2.0, 3.0, 4.0]);
        let a = weighted_quantile_groups(&set, &tied, 2, WeightMode::Household).unwrap();
        let b = weighted_quantile_groups(&set, &distinct, 2, WeightMode::Household).unwrap();
        assert_eq!(a.groups(), b.groups());
    }

    #[test]
    fn percentile_is_lower_weighted_quantile() {
        let set = set_of(&(1..=100).map(|i| (i, 1.0, 1, 0.0)).collect::<Vec<_>>());
        let ind = ind_of(&set, &(1..=100).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(weighted_percentile(&set, &ind, 0.5).unwrap(), 50.0);

        // weights (3, 1), values (10, 99), p = 0.25: cum 3 >= 1 at value 10
        let set2 = set_of(&[(1, 3.0, 1, 0.0), (2, 1.0, 1, 0.0)]);
        let ind2 = ind_of(&set2, &[10.0, 99.0]);
        assert_eq!(weighted_percentile(&set2, &ind2, 0.25).unwrap(), 10.0);

        assert!(weighted_percentile(&set2, &ind2, 0.0).is_err());
        assert!(weighted_percentile(&set2, &ind2, 1.0).is_err());
    }

    #[test]
    fn adjusted_median_dominates_raw_median() {
        // adjustment is pointwise >= raw, so any quantile is >=
        let set = set_of(&[
            (1, 1.0, 1, 50.0),
            (2, 1.0, 1, 100.0),
            (3, 1.0, 1, 150.0),
        ]);
        let raw = ind_of(&set, &[50.0, 100.0, 150.0]);
        let adjusted = ind_of(&set, &[80.0, 100.0, 150.0]);
        let m_raw = weighted_percentile(&set, &raw, 0.5).unwrap();
        let m_adj = weighted_percentile(&set, &adjusted, 0.5).unwrap();
        assert!(m_adj >= m_raw);
    }

    #[test]
    fn assignment_exports_as_csv() {
        let set = set_of(&[(1, 1.0, 1, 0.0), (2, 1.0, 1, 0.0)]);
        let ind = ind_of(&set, &[5.0, 10.0]);
        let assign = weighted_quantile_groups(&set, &ind, 2, WeightMode::Household).unwrap();
        let mut buf = Vec::new();
        assign.write_csv(&set, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "household_id,group\n1,1\n2,2\n");
    }

    #[test]
    fn person_mode_weights_by_household_size() {
        // sizes (1, 3) equal weights: person-mode total 4, household 2 is 3/4 of it
        let set = set_of(&[(1, 1.0, 1, 0.0), (2, 1.0, 3, 0.0)]);
        // household values 1.0 and 6.0 -> per capita 1.0 and 2.0
        let ind = ind_of(&set, &[1.0, 6.0]);
        let person = weighted_quantile_groups(&set, &ind, 2, WeightMode::Person).unwrap();
        assert_eq!(person.groups(), &[1, 1]);
        let household = weighted_quantile_groups(&set, &ind, 2, WeightMode::Household).unwrap();
        assert_eq!(household.groups(), &[1, 2]);
    }
}
