//! Reform scenarios: differentiated rate classes, selective surtaxes, fixed
//! carve-outs, cashback to poor households, universal transfers, and the
//! revenue-neutral standard-rate solve.
//!
//! A scenario assigns every taxable item to exactly one rate class. Reduced
//! classes and the selective surtax quote as multiples of the standard rate
//! `s`; carve-outs quote an absolute outside-basis rate. Reform taxes apply
//! to net-of-baseline-tax monetary spending ([`crate::rates::net_base`]),
//! holding real consumption bundles fixed.
//!
//! Because every rate is either `m * s` or a constant, and cashback
//! eligibility is evaluated on pre-reform expenditure, aggregate net
//! revenue is affine in `s`. The solver bisects the honest revenue
//! function; the closed-form affine solution is kept as a cross-check.

use thiserror::Error;

use crate::distribution::{impact_report, DistributionError, DistributionReport, PovertyLine};
use crate::incidence::{CellKind, GroupedReport, ReportRow, TableDiagnostics};
use crate::microdata::{Household, MicrodataSet};
use crate::rates::{net_base, ItemId, RateSchedule, TagSet};
use crate::welfare::GroupAssignment;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateClassKind {
    Zero,
    /// Rate = value * standard rate; the class with value 1.0 is the
    /// standard class itself.
    Multiplier(f64),
    /// Selective surtax, also a multiple of the standard rate.
    Selective(f64),
    /// Absolute outside-basis rate, independent of the standard rate.
    Fixed(f64),
    /// Outside every reform tax base (domestic services).
    Excluded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ItemSelector {
    /// Every item not claimed by another class.
    Default,
    Tag(crate::rates::Tag),
    Items(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateClass {
    pub name: String,
    pub kind: RateClassKind,
    pub selector: ItemSelector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardRate {
    Solve,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CashbackScope {
    None,
    /// Refund tax on every item except those carrying one of the tags.
    AllItemsExcept(TagSet),
    /// Refund tax only on items carrying one of the tags.
    OnlyItems(TagSet),
}

/// Tax refund for households whose pre-reform per-capita total expenditure
/// falls below the eligibility line.
#[derive(Debug, Clone, PartialEq)]
pub struct CashbackPolicy {
    pub eligibility_line: PovertyLine,
    pub scope: CashbackScope,
}

impl CashbackPolicy {
    pub fn none() -> CashbackPolicy {
        CashbackPolicy {
            eligibility_line: PovertyLine::default(),
            scope: CashbackScope::None,
        }
    }

    pub fn is_active(&self) -> bool {
        self.scope != CashbackScope::None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransferPolicy {
    None,
    /// Flat per-person transfer financed by the revenue collected on items
    /// carrying the financing tags.
    UniversalPerPerson { financing: TagSet },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReformScenario {
    pub name: String,
    pub classes: Vec<RateClass>,
    pub standard_rate: StandardRate,
    pub cashback: CashbackPolicy,
    pub transfer: TransferPolicy,
    /// Relative tolerance on |net revenue - target| for solved scenarios.
    pub neutrality_tol: f64,
}

#[derive(Debug, Error)]
pub enum ReformError {
    #[error("item {0:?} not assigned to any rate class and no default class declared")]
    UnassignedItem(String),
    #[error("item {item:?} assigned to both {first:?} and {second:?}")]
    MultiplyAssignedItem {
        item: String,
        first: String,
        second: String,
    },
    #[error("scenario must declare exactly one standard class (multiplier 1.0), found {0}")]
    StandardClassCount(usize),
    #[error("more than one class uses the default selector")]
    MultipleDefaultSelectors,
    #[error("class {class:?}: invalid value {value}")]
    InvalidClassValue { class: String, value: f64 },
    #[error("selector references unknown item code {0:?}")]
    UnknownItemCode(String),
    #[error("no class named {0:?} to remove")]
    NoSuchClass(String),
    #[error("transfer financing tag set is empty")]
    EmptyFinancing,
    #[error("transfer policy is not active")]
    InactiveTransfer,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(
        "target {target} outside attainable revenue range [{lo_value}, {hi_value}] on the bracket"
    )]
    Bracket {
        target: f64,
        lo_value: f64,
        hi_value: f64,
    },
    #[error("bisection made no progress: residual {residual} after {iterations} iterations")]
    NoProgress { iterations: usize, residual: f64 },
}

/// Per-item outcome of applying a scenario's selectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedClass {
    /// Rate = multiplier * standard rate (zero class: multiplier 0).
    Scaled { class: u16, multiplier: f64 },
    /// Absolute outside-basis rate.
    FixedRate { class: u16, rate: f64 },
    Excluded,
}

impl ResolvedClass {
    pub fn class_index(self) -> Option<u16> {
        match self {
            ResolvedClass::Scaled { class, .. } | ResolvedClass::FixedRate { class, .. } => {
                Some(class)
            }
            ResolvedClass::Excluded => None,
        }
    }

    pub fn rate(self, standard: f64) -> f64 {
        match self {
            ResolvedClass::Scaled { multiplier, .. } => multiplier * standard,
            ResolvedClass::FixedRate { rate, .. } => rate,
            ResolvedClass::Excluded => 0.0,
        }
    }
}

/// A scenario resolved against a schedule: every item mapped to its class,
/// cashback scope and transfer financing flags precomputed.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    name: String,
    resolved: Vec<ResolvedClass>,
    class_names: Vec<String>,
    /// Reportable classes (everything except excluded), in declared order.
    class_rows: Vec<u16>,
    standard_rate: StandardRate,
    cashback: CashbackPolicy,
    transfer: TransferPolicy,
    neutrality_tol: f64,
    in_cashback_scope: Vec<bool>,
    finances_transfer: Vec<bool>,
}

impl CompiledScenario {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn resolved(&self, item: ItemId) -> ResolvedClass {
        self.resolved[item.index()]
    }

    pub fn class_order(&self) -> Vec<u16> {
        self.class_rows.clone()
    }

    pub fn class_name(&self, class: u16) -> &str {
        &self.class_names[class as usize]
    }

    pub fn standard_rate(&self) -> StandardRate {
        self.standard_rate
    }

    pub fn neutrality_tol(&self) -> f64 {
        self.neutrality_tol
    }

    pub fn cashback(&self) -> &CashbackPolicy {
        &self.cashback
    }

    pub fn transfer_active(&self) -> bool {
        matches!(self.transfer, TransferPolicy::UniversalPerPerson { .. })
    }

    fn eligible_for_cashback(&self, h: &Household) -> bool {
        self.cashback.is_active()
            && h.total_expenditure() / (h.size as f64) < self.cashback.eligibility_line.value()
    }
}

/// Resolve a scenario's selectors against a schedule, checking that the
/// non-excluded items form an exact partition.
pub fn compile(
    scenario: &ReformScenario,
    schedule: &RateSchedule,
) -> Result<CompiledScenario, ReformError> {
    let mut standard_count = 0;
    let mut default_class: Option<u16> = None;
    for (idx, class) in scenario.classes.iter().enumerate() {
        let value_of = |v: f64| -> Result<f64, ReformError> {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(ReformError::InvalidClassValue {
                    class: class.name.clone(),
                    value: v,
                })
            }
        };
        match class.kind {
            RateClassKind::Multiplier(m) => {
                value_of(m)?;
                if m == 1.0 {
                    standard_count += 1;
                }
            }
            RateClassKind::Selective(m) => {
                value_of(m)?;
            }
            RateClassKind::Fixed(f) => {
                value_of(f)?;
            }
            RateClassKind::Zero | RateClassKind::Excluded => {}
        }
        if class.selector == ItemSelector::Default {
            if default_class.is_some() {
                return Err(ReformError::MultipleDefaultSelectors);
            }
            default_class = Some(idx as u16);
        }
    }
    if standard_count != 1 {
        return Err(ReformError::StandardClassCount(standard_count));
    }

    // explicit selectors first; anything untouched falls to the default class
    let mut assigned: Vec<Option<u16>> = vec![None; schedule.len()];
    for (class_idx, class) in scenario.classes.iter().enumerate() {
        let targets: Vec<ItemId> = match &class.selector {
            ItemSelector::Default => continue,
            ItemSelector::Tag(tag) => schedule
                .items()
                .filter(|(_, spec)| spec.tags.contains(*tag))
                .map(|(id, _)| id)
                .collect(),
            ItemSelector::Items(codes) => {
                let mut ids = Vec::with_capacity(codes.len());
                for code in codes {
                    ids.push(
                        schedule
                            .lookup(code)
                            .ok_or_else(|| ReformError::UnknownItemCode(code.clone()))?,
                    );
                }
                ids
            }
        };
        for id in targets {
            if let Some(first) = assigned[id.index()] {
                return Err(ReformError::MultiplyAssignedItem {
                    item: schedule.code(id).to_string(),
                    first: scenario.classes[first as usize].name.clone(),
                    second: class.name.clone(),
                });
            }
            assigned[id.index()] = Some(class_idx as u16);
        }
    }

    let mut resolved = Vec::with_capacity(schedule.len());
    for (id, _) in schedule.items() {
        let class_idx = match assigned[id.index()].or(default_class) {
            Some(c) => c,
            None => return Err(ReformError::UnassignedItem(schedule.code(id).to_string())),
        };
        let class = &scenario.classes[class_idx as usize];
        resolved.push(match class.kind {
            RateClassKind::Zero => ResolvedClass::Scaled {
                class: class_idx,
                multiplier: 0.0,
            },
            RateClassKind::Multiplier(m) | RateClassKind::Selective(m) => ResolvedClass::Scaled {
                class: class_idx,
                multiplier: m,
            },
            RateClassKind::Fixed(f) => ResolvedClass::FixedRate {
                class: class_idx,
                rate: f,
            },
            RateClassKind::Excluded => ResolvedClass::Excluded,
        });
    }

    let in_cashback_scope: Vec<bool> = schedule
        .items()
        .map(|(id, spec)| {
            if resolved[id.index()] == ResolvedClass::Excluded {
                return false;
            }
            match &scenario.cashback.scope {
                CashbackScope::None => false,
                CashbackScope::AllItemsExcept(tags) => !spec.tags.intersects(*tags),
                CashbackScope::OnlyItems(tags) => spec.tags.intersects(*tags),
            }
        })
        .collect();

    let finances_transfer: Vec<bool> = match &scenario.transfer {
        TransferPolicy::None => vec![false; schedule.len()],
        TransferPolicy::UniversalPerPerson { financing } => {
            if financing.is_empty() {
                return Err(ReformError::EmptyFinancing);
            }
            schedule
                .items()
                .map(|(id, spec)| {
                    resolved[id.index()] != ResolvedClass::Excluded
                        && spec.tags.intersects(*financing)
                })
                .collect()
        }
    };

    let class_rows = scenario
        .classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind != RateClassKind::Excluded)
        .map(|(i, _)| i as u16)
        .collect();

    Ok(CompiledScenario {
        name: scenario.name.clone(),
        resolved,
        class_names: scenario.classes.iter().map(|c| c.name.clone()).collect(),
        class_rows,
        standard_rate: scenario.standard_rate,
        cashback: scenario.cashback.clone(),
        transfer: scenario.transfer.clone(),
        neutrality_tol: scenario.neutrality_tol,
        in_cashback_scope,
        finances_transfer,
    })
}

/// Outside-basis rate applying to an item under the scenario at standard
/// rate `s`.
pub fn class_rate(scenario: &CompiledScenario, item: ItemId, s: f64) -> f64 {
    scenario.resolved(item).rate(s)
}

/// Reform tax for one household at standard rate `s`, with the per-item
/// breakdown retained for cashback scoping. `bases` is the output of
/// [`net_base`] for this household.
pub fn scenario_tax(
    household: &Household,
    scenario: &CompiledScenario,
    bases: &[(ItemId, f64)],
    s: f64,
) -> (f64, Vec<(ItemId, f64)>) {
    debug_assert_eq!(bases.len(), household.expenditures.len());
    let mut total = 0.0;
    let mut breakdown = Vec::with_capacity(bases.len());
    for &(item, base) in bases {
        let tax = base * scenario.resolved(item).rate(s);
        total += tax;
        breakdown.push((item, tax));
    }
    (total, breakdown)
}

/// Cashback received by a household given its reform tax breakdown: zero
/// unless the household's pre-reform per-capita total expenditure is below
/// the eligibility line, else the tax paid on in-scope items.
pub fn cashback_amount(
    household: &Household,
    scenario: &CompiledScenario,
    breakdown: &[(ItemId, f64)],
) -> f64 {
    if !scenario.eligible_for_cashback(household) {
        return 0.0;
    }
    breakdown
        .iter()
        .filter(|(item, _)| scenario.in_cashback_scope[item.index()])
        .map(|(_, tax)| tax)
        .sum()
}

/// Flat per-person transfer financed by the revenue on financing-tagged
/// items at standard rate `s`.
pub fn transfer_amount(
    set: &MicrodataSet,
    schedule: &RateSchedule,
    scenario: &CompiledScenario,
    s: f64,
) -> Result<f64, ReformError> {
    if !scenario.transfer_active() {
        return Err(ReformError::InactiveTransfer);
    }
    let mut financing_revenue = 0.0;
    for h in set.households() {
        for e in &h.expenditures {
            if scenario.finances_transfer[e.item.index()] {
                let base = if schedule.is_domestic_service(e.item) {
                    0.0
                } else {
                    e.monetary * (1.0 - schedule.rate_inside(e.item))
                };
                financing_revenue += h.weight * base * scenario.resolved(e.item).rate(s);
            }
        }
    }
    Ok(financing_revenue / set.population())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseholdOutcome {
    pub tax: f64,
    pub cashback: f64,
    pub transfer: f64,
    /// tax - cashback - transfer; negative when transfers exceed the tax
    /// paid.
    pub net: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioAggregates {
    pub gross_revenue: f64,
    pub cashback_outlay: f64,
    pub transfer_outlay: f64,
    /// gross - cashback - transfer, held exactly.
    pub net_revenue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub name: String,
    pub standard_rate: f64,
    pub outcomes: Vec<HouseholdOutcome>,
    pub aggregates: ScenarioAggregates,
}

/// Evaluate a scenario household by household at standard rate `s`,
/// the full per-item route.
pub fn evaluate_scenario(
    set: &MicrodataSet,
    schedule: &RateSchedule,
    scenario: &CompiledScenario,
    s: f64,
) -> ScenarioResult {
    let per_person_transfer = if scenario.transfer_active() {
        transfer_amount(set, schedule, scenario, s).expect("transfer is active")
    } else {
        0.0
    };

    let mut outcomes = Vec::with_capacity(set.len());
    let mut gross_revenue = 0.0;
    let mut cashback_outlay = 0.0;
    let mut transfer_outlay = 0.0;
    for h in set.households() {
        let bases = net_base(h, schedule);
        let (tax, breakdown) = scenario_tax(h, scenario, &bases, s);
        let cashback = cashback_amount(h, scenario, &breakdown);
        let transfer = per_person_transfer * h.size as f64;
        outcomes.push(HouseholdOutcome {
            tax,
            cashback,
            transfer,
            net: tax - cashback - transfer,
        });
        gross_revenue += h.weight * tax;
        cashback_outlay += h.weight * cashback;
        transfer_outlay += h.weight * transfer;
    }
    ScenarioResult {
        name: scenario.name.clone(),
        standard_rate: s,
        outcomes,
        aggregates: ScenarioAggregates {
            gross_revenue,
            cashback_outlay,
            transfer_outlay,
            net_revenue: gross_revenue - cashback_outlay - transfer_outlay,
        },
    }
}

/// Aggregate net revenue reduced to its affine form in the standard rate:
/// every scaled class contributes `multiplier * base * s`, carve-outs a
/// constant, cashback subtracts the in-scope part for eligible households,
/// and the transfer outlay subtracts its own financing revenue.
#[derive(Debug, Clone, Copy)]
pub struct RevenueModel {
    slope: f64,
    intercept: f64,
    pub population: f64,
}

impl RevenueModel {
    pub fn build(
        set: &MicrodataSet,
        schedule: &RateSchedule,
        scenario: &CompiledScenario,
    ) -> RevenueModel {
        let mut slope = 0.0;
        let mut intercept = 0.0;
        for h in set.households() {
            let eligible = scenario.eligible_for_cashback(h);
            for e in &h.expenditures {
                let resolved = scenario.resolved(e.item);
                if resolved == ResolvedClass::Excluded {
                    continue;
                }
                let base = if schedule.is_domestic_service(e.item) {
                    0.0
                } else {
                    e.monetary * (1.0 - schedule.rate_inside(e.item))
                };
                let refunded = eligible && scenario.in_cashback_scope[e.item.index()];
                let financed = scenario.finances_transfer[e.item.index()];
                // weight of this item's tax in net revenue: +1, minus the
                // refund, minus the transfer recycling
                let mut factor = 1.0;
                if refunded {
                    factor -= 1.0;
                }
                if financed {
                    factor -= 1.0;
                }
                match resolved {
                    ResolvedClass::Scaled { multiplier, .. } => {
                        slope += h.weight * base * multiplier * factor;
                    }
                    ResolvedClass::FixedRate { rate, .. } => {
                        intercept += h.weight * base * rate * factor;
                    }
                    ResolvedClass::Excluded => unreachable!(),
                }
            }
        }
        RevenueModel {
            slope,
            intercept,
            population: set.population(),
        }
    }

    pub fn net_revenue(&self, s: f64) -> f64 {
        self.intercept + self.slope * s
    }

    /// Exact solution of `net_revenue(s) = target`; `None` when the slope
    /// vanishes.
    pub fn closed_form_rate(&self, target: f64) -> Option<f64> {
        if self.slope > 0.0 {
            Some((target - self.intercept) / self.slope)
        } else {
            None
        }
    }
}

/// Aggregate net revenue of a scenario at standard rate `s`.
pub fn net_revenue(
    set: &MicrodataSet,
    schedule: &RateSchedule,
    scenario: &CompiledScenario,
    s: f64,
) -> f64 {
    RevenueModel::build(set, schedule, scenario).net_revenue(s)
}

pub const DEFAULT_BRACKET_MAX: f64 = 5.0;
const MAX_BISECTION_ITERATIONS: usize = 200;

/// Bisect for the standard rate whose net revenue hits the target within
/// `tol` (relative). Net revenue must be non-decreasing on the bracket,
/// which holds because every rate-dependent term is linear with a
/// non-negative coefficient.
pub fn solve_neutral_rate(
    model: &RevenueModel,
    target: f64,
    tol: f64,
    s_max: f64,
) -> Result<f64, SolveError> {
    let lo_value = model.net_revenue(0.0);
    let hi_value = model.net_revenue(s_max);
    if target < lo_value || target > hi_value {
        return Err(SolveError::Bracket {
            target,
            lo_value,
            hi_value,
        });
    }
    let tol_abs = tol * target.abs();
    if (lo_value - target).abs() <= tol_abs {
        return Ok(0.0);
    }
    if (hi_value - target).abs() <= tol_abs {
        return Ok(s_max);
    }
    let (mut lo, mut hi) = (0.0, s_max);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let value = model.net_revenue(mid);
        residual = value - target;
        if residual.abs() <= tol_abs {
            return Ok(mid);
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(SolveError::NoProgress {
        iterations: MAX_BISECTION_ITERATIONS,
        residual,
    })
}

/// A compiled scenario together with its standard rate (solved or fixed)
/// and full evaluation at that rate.
#[derive(Debug, Clone)]
pub struct SolvedScenario {
    pub compiled: CompiledScenario,
    pub rate: f64,
    pub solved: bool,
    pub target: f64,
    pub result: ScenarioResult,
}

/// Compile, solve if requested, and evaluate a scenario. `target` is the
/// neutrality target (the baseline aggregate revenue).
pub fn run_scenario(
    set: &MicrodataSet,
    schedule: &RateSchedule,
    scenario: &ReformScenario,
    target: f64,
    tol_override: Option<f64>,
) -> Result<SolvedScenario, ReformError> {
    let compiled = compile(scenario, schedule)?;
    let tol = tol_override.unwrap_or(compiled.neutrality_tol());
    let (rate, solved) = match compiled.standard_rate() {
        StandardRate::Fixed(rate) => (rate, false),
        StandardRate::Solve => {
            let model = RevenueModel::build(set, schedule, &compiled);
            let rate = solve_neutral_rate(&model, target, tol, DEFAULT_BRACKET_MAX)?;
            (rate, true)
        }
    };
    let result = evaluate_scenario(set, schedule, &compiled, rate);
    Ok(SolvedScenario {
        compiled,
        rate,
        solved,
        target,
        result,
    })
}

/// One feature switched off when decomposing the standard rate.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureRemoval {
    /// Drop a zero/reduced/selective/fixed class; its items fall back to
    /// the standard rate.
    ClassToStandard(String),
    DropCashback,
}

impl FeatureRemoval {
    pub fn label(&self) -> String {
        match self {
            FeatureRemoval::ClassToStandard(name) => format!("without_{name}"),
            FeatureRemoval::DropCashback => "without_cashback".to_string(),
        }
    }
}

/// The natural removal list for a scenario: every non-standard,
/// non-excluded class, plus the cashback when active.
pub fn default_removals(scenario: &ReformScenario) -> Vec<FeatureRemoval> {
    let mut removals: Vec<FeatureRemoval> = scenario
        .classes
        .iter()
        .filter(|c| match c.kind {
            RateClassKind::Excluded => false,
            RateClassKind::Multiplier(m) => m != 1.0,
            _ => true,
        })
        .map(|c| FeatureRemoval::ClassToStandard(c.name.clone()))
        .collect();
    if scenario.cashback.is_active() {
        removals.push(FeatureRemoval::DropCashback);
    }
    removals
}

fn apply_removal(
    scenario: &ReformScenario,
    removal: &FeatureRemoval,
) -> Result<ReformScenario, ReformError> {
    let mut variant = scenario.clone();
    match removal {
        FeatureRemoval::ClassToStandard(name) => {
            let before = variant.classes.len();
            variant.classes.retain(|c| &c.name != name);
            if variant.classes.len() == before {
                return Err(ReformError::NoSuchClass(name.clone()));
            }
            variant.name = format!("{}_{}", scenario.name, removal.label());
        }
        FeatureRemoval::DropCashback => {
            variant.cashback.scope = CashbackScope::None;
            variant.name = format!("{}_{}", scenario.name, removal.label());
        }
    }
    Ok(variant)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub variant: String,
    pub rate: f64,
    pub delta_pp: f64,
}

/// Re-solve the neutral standard rate with each feature removed in turn.
/// The first row is the full scenario; deltas are percentage points
/// relative to it.
pub fn decompose_standard_rate(
    set: &MicrodataSet,
    schedule: &RateSchedule,
    scenario: &ReformScenario,
    target: f64,
    removals: &[FeatureRemoval],
) -> Result<Vec<DecompositionRow>, ReformError> {
    let solve = |sc: &ReformScenario| -> Result<f64, ReformError> {
        let compiled = compile(sc, schedule)?;
        let model = RevenueModel::build(set, schedule, &compiled);
        Ok(solve_neutral_rate(
            &model,
            target,
            sc.neutrality_tol,
            DEFAULT_BRACKET_MAX,
        )?)
    };
    let base_rate = solve(scenario)?;
    let mut rows = vec![DecompositionRow {
        variant: "full_scenario".to_string(),
        rate: base_rate,
        delta_pp: 0.0,
    }];
    for removal in removals {
        let variant = apply_removal(scenario, removal)?;
        let rate = solve(&variant)?;
        rows.push(DecompositionRow {
            variant: removal.label(),
            rate,
            delta_pp: (rate - base_rate) * 100.0,
        });
    }
    Ok(rows)
}

/// Per-quintile deltas against the baseline plus the distributional impact
/// of one evaluated scenario.
#[derive(Debug, Clone)]
pub struct ReformComparison {
    pub name: String,
    pub standard_rate: f64,
    pub quintile_table: GroupedReport,
    pub diagnostics: TableDiagnostics,
    pub impact: DistributionReport,
}

/// Compare evaluated scenarios against baseline taxes: mean tax change per
/// expenditure group (level and as a share of monetary spending, mean of
/// ratios) and the poverty/inequality impact on net-of-tax expenditure.
pub fn compare_reforms(
    set: &MicrodataSet,
    baseline_taxes: &[f64],
    expenditure_groups: &GroupAssignment,
    gross_expenditure: &crate::welfare::WelfareIndicator,
    results: &[&ScenarioResult],
    line: PovertyLine,
) -> Result<Vec<ReformComparison>, ReformError> {
    assert_eq!(baseline_taxes.len(), set.len());
    let k = expenditure_groups.k;

    let mut comparisons = Vec::with_capacity(results.len());
    for result in results {
        assert_eq!(result.outcomes.len(), set.len());
        let mut sums = vec![[0.0f64; 4]; k + 1];
        let mut weights = vec![0.0f64; k + 1];
        let mut ratio_sums = vec![0.0f64; k + 1];
        let mut ratio_weights = vec![0.0f64; k + 1];
        let mut diag = TableDiagnostics::default();
        for (idx, h) in set.households().iter().enumerate() {
            let g = expenditure_groups.group_of_index(idx) as usize - 1;
            let monetary = h.monetary_expenditure();
            let delta = result.outcomes[idx].net - baseline_taxes[idx];
            let row = [baseline_taxes[idx], monetary, delta, 0.0];
            for (acc, v) in sums[g].iter_mut().zip(row) {
                *acc += h.weight * v;
            }
            for (acc, v) in sums[k].iter_mut().zip(row) {
                *acc += h.weight * v;
            }
            weights[g] += h.weight;
            weights[k] += h.weight;
            if monetary > 0.0 {
                ratio_sums[g] += h.weight * delta / monetary;
                ratio_weights[g] += h.weight;
                ratio_sums[k] += h.weight * delta / monetary;
                ratio_weights[k] += h.weight;
            } else {
                diag.zero_base_households += 1;
                diag.zero_base_weight += h.weight;
            }
        }
        let cell = |col: usize| -> Vec<f64> {
            sums.iter()
                .zip(&weights)
                .map(|(s, w)| if *w > 0.0 { s[col] / w } else { 0.0 })
                .collect()
        };
        let ratio_cells: Vec<f64> = ratio_sums
            .iter()
            .zip(&ratio_weights)
            .map(|(s, w)| if *w > 0.0 { s / w } else { 0.0 })
            .collect();
        let quintile_table = GroupedReport {
            title: format!("Tax change by expenditure group ({})", result.name),
            label_header: "metric".to_string(),
            k,
            weight_mode: expenditure_groups.weight_mode,
            rows: vec![
                ReportRow {
                    label: "baseline_tax".to_string(),
                    kind: CellKind::Currency,
                    cells: cell(0),
                },
                ReportRow {
                    label: "monetary_expenditure".to_string(),
                    kind: CellKind::Currency,
                    cells: cell(1),
                },
                ReportRow {
                    label: "delta_tax".to_string(),
                    kind: CellKind::Currency,
                    cells: cell(2),
                },
                ReportRow {
                    label: "delta_tax_over_expenditure".to_string(),
                    kind: CellKind::Rate,
                    cells: ratio_cells,
                },
            ],
        };
        let net_taxes: Vec<f64> = result.outcomes.iter().map(|o| o.net).collect();
        let impact = impact_report(set, gross_expenditure, &net_taxes, line)?;
        comparisons.push(ReformComparison {
            name: result.name.clone(),
            standard_rate: result.standard_rate,
            quintile_table,
            diagnostics: diag,
            impact,
        });
    }
    Ok(comparisons)
}
