//! Microsimulation engine for the distributional incidence of indirect
//! (consumption) taxes on household budget-survey microdata.
//!
//! The engine loads weighted household microdata and a baseline
//! effective-rate schedule, measures who bears the current tax burden
//! (burden tables, budget shares, FGT poverty indices, Gini), and simulates
//! revenue-neutral VAT reform scenarios with differentiated rate classes,
//! selective surtaxes, fixed carve-outs, cashback to poor households and
//! universal transfers — solving for the standard rate that keeps aggregate
//! net revenue at its baseline level.
//!
//! Modules follow the pipeline:
//!
//! - [`microdata`]: load, validate and synthesize weighted household data;
//! - [`rates`]: the baseline rate schedule and inside/outside rate algebra;
//! - [`welfare`]: welfare indicators, income adjustment, weighted quantiles;
//! - [`incidence`]: grouped burden, budget-share and rate-class tables;
//! - [`distribution`]: FGT poverty indices and the weighted Gini;
//! - [`reform`]: scenario evaluation, neutral-rate solving, decomposition;
//! - [`config`]: scenario configuration files;
//! - [`synth`]: deterministic synthetic data generation;
//! - [`report`]: CSV and markdown rendering.
//!
//! Every computation is deterministic: aggregations run in household-id
//! order and results do not depend on thread count.

pub mod config;
pub mod distribution;
pub mod incidence;
pub mod microdata;
pub mod rates;
pub mod reform;
pub mod report;
pub mod synth;
pub mod welfare;

pub use config::{load_scenario, parse_scenario, ConfigError};
pub use distribution::{
    fgt, gini, impact_report, DistMetrics, DistributionError, DistributionReport, PovertyLine,
};
pub use incidence::{
    budget_share_table, burden_table, burden_z_sweep, class_share_table, CellKind, GroupedReport,
    ReportRow, TableDiagnostics,
};
pub use microdata::{
    inspect_microdata, load_microdata, write_microdata, Expenditure, Household, HouseholdId,
    LoadError, LoadReport, MicrodataError, MicrodataSet,
};
pub use rates::{
    category_rate_summary,
    baseline_revenue, baseline_tax, baseline_taxes, inside_to_outside, net_base,
    outside_to_inside, Category, ItemId, ItemSpec, RateError, RateSchedule, ScheduleError, Tag,
    TagSet,
};
pub use reform::{
    cashback_amount, class_rate, compare_reforms, compile, decompose_standard_rate,
    default_removals, evaluate_scenario, net_revenue, run_scenario, scenario_tax,
    solve_neutral_rate, transfer_amount, CashbackPolicy, CashbackScope, CompiledScenario,
    DecompositionRow, FeatureRemoval, HouseholdOutcome, ItemSelector, RateClass, RateClassKind,
    ReformComparison, ReformError, ReformScenario, ResolvedClass, RevenueModel, ScenarioAggregates,
    ScenarioResult, SolveError, SolvedScenario, StandardRate, TransferPolicy,
};
pub use synth::{default_catalog, generate_synthetic, SynthError, SynthParams};
pub use welfare::{
    adjust_income, indicator, weighted_percentile, weighted_quantile_groups, AdjustmentPolicy,
    GroupAssignment, WeightMode, WelfareError, WelfareIndicator, WelfareKind,
};
