//! Grouped incidence tables: mean tax burden, category budget shares and
//! rate-class shares by quantile group.
//!
//! Every cell is a weighted mean of per-household values within the group —
//! a mean of ratios, never a ratio of aggregates. Households with a zero
//! denominator are excluded from that table's means and counted in a
//! diagnostics sidecar instead of being silently dropped.

use crate::microdata::{Household, MicrodataSet};
use crate::rates::{Category, RateSchedule};
use crate::reform::{CompiledScenario, ResolvedClass};
use crate::welfare::{
    indicator, weighted_quantile_groups, AdjustmentPolicy, GroupAssignment, WeightMode,
    WelfareIndicator, WelfareKind,
};

/// How a row's cells should be rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// Fraction, rendered as percent with one decimal.
    Percent,
    /// Currency/month, two decimals.
    Currency,
    /// Rate fraction, four decimals.
    Rate,
    /// Dimensionless index, four decimals.
    Index,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub kind: CellKind,
    /// One cell per group, plus the all-households cell last.
    pub cells: Vec<f64>,
}

/// A rows-by-groups table with an "all" column.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedReport {
    pub title: String,
    pub label_header: String,
    pub k: usize,
    pub weight_mode: WeightMode,
    pub rows: Vec<ReportRow>,
}

/// Count of households excluded from a table because their denominator was
/// not positive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TableDiagnostics {
    pub zero_base_households: usize,
    pub zero_base_weight: f64,
}

/// Weighted per-group means of a per-household value, `None` marking a
/// zero-base household to exclude and count. Returns k + 1 cells ("all"
/// last) and the exclusion tally.
fn group_means<F>(
    set: &MicrodataSet,
    groups: &GroupAssignment,
    mut value: F,
) -> (Vec<f64>, TableDiagnostics)
where
    F: FnMut(usize, &Household) -> Option<f64>,
{
    let k = groups.k;
    let mut sums = vec![0.0; k + 1];
    let mut weights = vec![0.0; k + 1];
    let mut diag = TableDiagnostics::default();
    for (idx, h) in set.households().iter().enumerate() {
        match value(idx, h) {
            Some(v) => {
                let g = groups.group_of_index(idx) as usize - 1;
                sums[g] += h.weight * v;
                weights[g] += h.weight;
                sums[k] += h.weight * v;
                weights[k] += h.weight;
            }
            None => {
                diag.zero_base_households += 1;
                diag.zero_base_weight += h.weight;
            }
        }
    }
    let cells = sums
        .iter()
        .zip(&weights)
        .map(|(s, w)| if *w > 0.0 { s / w } else { 0.0 })
        .collect();
    (cells, diag)
}

/// Mean tax burden by group: weighted mean over households of
/// `tax / base`, with `base` the chosen welfare indicator.
pub fn burden_table(
    set: &MicrodataSet,
    taxes: &[f64],
    base: &WelfareIndicator,
    groups: &GroupAssignment,
) -> (GroupedReport, TableDiagnostics) {
    assert_eq!(taxes.len(), set.len());
    let (cells, diag) = group_means(set, groups, |idx, _| {
        let b = base.household_values()[idx];
        if b > 0.0 {
            Some(taxes[idx] / b)
        } else {
            None
        }
    });
    let report = GroupedReport {
        title: format!("Mean tax burden over {}", base.kind.as_str()),
        label_header: "base".to_string(),
        k: groups.k,
        weight_mode: groups.weight_mode,
        rows: vec![ReportRow {
            label: base.kind.as_str().to_string(),
            kind: CellKind::Percent,
            cells,
        }],
    };
    (report, diag)
}

/// Mean budget shares by group for the fifteen reporting categories,
/// relative to total (monetary plus non-monetary) expenditure. Columns sum
/// to one across categories.
pub fn budget_share_table(
    set: &MicrodataSet,
    schedule: &RateSchedule,
    groups: &GroupAssignment,
) -> (GroupedReport, TableDiagnostics) {
    let mut rows = Vec::with_capacity(Category::ALL.len());
    let mut diag = TableDiagnostics::default();
    for category in Category::ALL {
        let (cells, d) = group_means(set, groups, |_, h| {
            let total = h.total_expenditure();
            if total <= 0.0 {
                return None;
            }
            let in_category: f64 = h
                .expenditures
                .iter()
                .filter(|e| schedule.category(e.item) == category)
                .map(|e| e.monetary + e.nonmonetary)
                .sum();
            Some(in_category / total)
        });
        diag = d; // identical exclusion set for every category
        rows.push(ReportRow {
            label: category.as_str().to_string(),
            kind: CellKind::Percent,
            cells,
        });
    }
    let report = GroupedReport {
        title: "Mean budget shares by category".to_string(),
        label_header: "category".to_string(),
        k: groups.k,
        weight_mode: groups.weight_mode,
        rows,
    };
    (report, diag)
}

/// Mean shares of monetary spending falling in each reform rate class, by
/// group. Items in an excluded class (domestic services) are dropped from
/// both numerator and denominator, so columns sum to one across classes.
pub fn class_share_table(
    set: &MicrodataSet,
    scenario: &CompiledScenario,
    schedule: &RateSchedule,
    groups: &GroupAssignment,
) -> (GroupedReport, TableDiagnostics) {
    let mut rows = Vec::new();
    let mut diag = TableDiagnostics::default();
    for class_idx in scenario.class_order() {
        let (cells, d) = group_means(set, groups, |_, h| {
            let mut total = 0.0;
            let mut in_class = 0.0;
            for e in &h.expenditures {
                if schedule.is_domestic_service(e.item) {
                    continue;
                }
                match scenario.resolved(e.item) {
                    ResolvedClass::Excluded => continue,
                    resolved => {
                        total += e.monetary;
                        if resolved.class_index() == Some(class_idx) {
                            in_class += e.monetary;
                        }
                    }
                }
            }
            if total > 0.0 {
                Some(in_class / total)
            } else {
                None
            }
        });
        diag = d;
        rows.push(ReportRow {
            label: scenario.class_name(class_idx).to_string(),
            kind: CellKind::Percent,
            cells,
        });
    }
    let report = GroupedReport {
        title: format!("Monetary spending shares by rate class ({})", scenario.name()),
        label_header: "rate_class".to_string(),
        k: groups.k,
        weight_mode: groups.weight_mode,
        rows,
    };
    (report, diag)
}

/// Burden-by-decile rows (income basis) for a grid of income-adjustment
/// fill rates. Deciles are rebuilt per fill rate, mirroring how the
/// sensitivity of measured regressivity to the adjustment is examined.
pub fn burden_z_sweep(
    set: &MicrodataSet,
    taxes: &[f64],
    zs: &[f64],
    k: usize,
) -> Result<GroupedReport, crate::welfare::WelfareError> {
    let mut rows = Vec::with_capacity(zs.len());
    for &z in zs {
        let policy = AdjustmentPolicy::new(z)?;
        let ind = indicator(set, WelfareKind::DisposableIncomeAdjusted, &policy);
        let groups = weighted_quantile_groups(set, &ind, k, WeightMode::Household)?;
        let (table, _) = burden_table(set, taxes, &ind, &groups);
        rows.push(ReportRow {
            label: format!("z={z}"),
            kind: CellKind::Percent,
            cells: table.rows[0].cells.clone(),
        });
    }
    Ok(GroupedReport {
        title: "Burden by income decile across adjustment fill rates".to_string(),
        label_header: "z_share".to_string(),
        k,
        weight_mode: WeightMode::Household,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microdata::{Expenditure, Household, HouseholdId};
    use crate::rates::{ItemSpec, TagSet};

    fn schedule() -> RateSchedule {
        RateSchedule::new(vec![
            ItemSpec::new("food", Category::BasicFoodBasket, 0.1, TagSet::EMPTY),
            ItemSpec::new("clothes", Category::Clothing, 0.2, TagSet::EMPTY),
        ])
        .unwrap()
    }

    fn hh(id: u64, weight: f64, expenditures: Vec<Expenditure>) -> Household {
        Household {
            id: HouseholdId(id),
            weight,
            size: 1,
            income_monetary: 0.0,
            income_nonmonetary: 0.0,
            expenditures,
        }
    }

    fn single_group(set: &MicrodataSet) -> GroupAssignment {
        GroupAssignment::from_groups(1, WeightMode::Household, vec![1; set.len()])
    }

    #[test]
    fn burden_is_mean_of_ratios_not_ratio_of_aggregates() {
        let set = MicrodataSet::new(vec![hh(1, 1.0, vec![]), hh(2, 1.0, vec![])]).unwrap();
        let base =
            WelfareIndicator::from_values(WelfareKind::TotalExpenditure, &set, vec![100.0, 200.0]);
        let taxes = [10.0, 40.0];
        let groups = single_group(&set);
        let (report, diag) = burden_table(&set, &taxes, &base, &groups);
        // mean of ratios: (0.10 + 0.20) / 2
        assert!((report.rows[0].cells[0] - 0.15).abs() < 1e-15);
        // the aggregate ratio would be 50/300
        let aggregate = (10.0 + 40.0) / (100.0 + 200.0);
        assert!((aggregate - report.rows[0].cells[0]).abs() > 0.01);
        assert_eq!(diag.zero_base_households, 0);
    }

    #[test]
    fn zero_taxes_give_zero_cells() {
        let set = MicrodataSet::new(vec![hh(1, 1.0, vec![]), hh(2, 2.0, vec![])]).unwrap();
        let base =
            WelfareIndicator::from_values(WelfareKind::TotalExpenditure, &set, vec![50.0, 70.0]);
        let groups = single_group(&set);
        let (report, _) = burden_table(&set, &[0.0, 0.0], &base, &groups);
        assert!(report.rows[0].cells.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn zero_base_households_are_excluded_and_counted() {
        let set = MicrodataSet::new(vec![hh(1, 1.0, vec![]), hh(2, 2.5, vec![])]).unwrap();
        let base =
            WelfareIndicator::from_values(WelfareKind::TotalExpenditure, &set, vec![100.0, 0.0]);
        let groups = single_group(&set);
        let (report, diag) = burden_table(&set, &[10.0, 10.0], &base, &groups);
        assert_eq!(report.rows[0].cells[0], 0.1);
        assert_eq!(diag.zero_base_households, 1);
        assert_eq!(diag.zero_base_weight, 2.5);
    }

    #[test]
    fn budget_shares_partition_total_expenditure() {
        let s = schedule();
        let food = s.lookup("food").unwrap();
        let clothes = s.lookup("clothes").unwrap();
        let set = MicrodataSet::new(vec![hh(
            1,
            1.0,
            vec![
                Expenditure {
                    item: food,
                    monetary: 50.0,
                    nonmonetary: 0.0,
                },
                Expenditure {
                    item: clothes,
                    monetary: 30.0,
                    nonmonetary: 20.0,
                },
            ],
        )])
        .unwrap();
        let groups = single_group(&set);
        let (report, _) = budget_share_table(&set, &s, &groups);
        let by_label: std::collections::HashMap<&str, f64> = report
            .rows
            .iter()
            .map(|r| (r.label.as_str(), r.cells[0]))
            .collect();
        assert!((by_label["basic_food_basket"] - 0.5).abs() < 1e-12);
        assert!((by_label["clothing"] - 0.5).abs() < 1e-12);
        let column_sum: f64 = report.rows.iter().map(|r| r.cells[0]).sum();
        assert!((column_sum - 1.0).abs() < 1e-4);
    }

    #[test]
    fn weighted_mean_share_uses_household_weights() {
        // weights (1, 3), shares in basic food (100%, 0%) -> cell 25%
        let s = schedule();
        let food = s.lookup("food").unwrap();
        let clothes = s.lookup("clothes").unwrap();
        let set = MicrodataSet::new(vec![
            hh(
                1,
                1.0,
                vec![Expenditure {
                    item: food,
                    monetary: 10.0,
                    nonmonetary: 0.0,
                }],
            ),
            hh(
                2,
                3.0,
                vec![Expenditure {
                    item: clothes,
                    monetary: 99.0,
                    nonmonetary: 0.0,
                }],
            ),
        ])
        .unwrap();
        let groups = single_group(&set);
        let (report, _) = budget_share_table(&set, &s, &groups);
        let food_row = report
            .rows
            .iter()
            .find(|r| r.label == "basic_food_basket")
            .unwrap();
        assert!((food_row.cells[0] - 0.25).abs() < 1e-12);
    }
}
