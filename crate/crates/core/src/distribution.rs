//! Poverty and inequality measurement: the FGT index family and the
//! weighted Gini coefficient, person-weighted throughout.
//!
//! All statistics run over per-capita welfare indicators with person mass
//! `weight * size` and are computed in household-id order, so results do
//! not depend on thread count or platform.

use std::io::Write;

use thiserror::Error;

use crate::microdata::MicrodataSet;
use crate::welfare::WelfareIndicator;

/// Per-person poverty line, currency/month.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovertyLine(f64);

impl PovertyLine {
    pub fn new(line: f64) -> Result<PovertyLine, DistributionError> {
        if !line.is_finite() || line <= 0.0 {
            return Err(DistributionError::NonPositiveLine(line));
        }
        Ok(PovertyLine(line))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for PovertyLine {
    /// World Bank upper-middle-income line at 2018 purchasing power:
    /// R$ 420 per person per month.
    fn default() -> Self {
        PovertyLine(420.0)
    }
}

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("poverty line must be > 0, got {0}")]
    NonPositiveLine(f64),
    #[error("weighted mean must be > 0 to compute a Gini coefficient, got {0}")]
    NonPositiveMean(f64),
}

/// FGT poverty index `P_alpha`: person-weighted mean of
/// `((line - y) / line)^alpha` over the poor (strictly below the line).
///
/// `alpha` 0 is the headcount ratio, 1 the poverty gap, 2 the squared gap.
pub fn fgt(set: &MicrodataSet, ind: &WelfareIndicator, line: PovertyLine, alpha: u8) -> f64 {
    let z = line.value();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (h, &y) in set.households().iter().zip(ind.per_capita()) {
        let person_mass = h.weight * h.size as f64;
        denominator += person_mass;
        if y < z {
            numerator += person_mass * ((z - y) / z).powi(alpha as i32);
        }
    }
    numerator / denominator
}

/// Person-weighted Gini coefficient, computed in the O(n log n) sorted form
/// equivalent to the pairwise definition
/// `G = sum_ij p_i p_j |y_i - y_j| / (2 mu)`.
///
/// Values may be negative (net-of-tax indicators under transfers); the
/// coefficient can then exceed 1.
pub fn gini(set: &MicrodataSet, ind: &WelfareIndicator) -> Result<f64, DistributionError> {
    let values = ind.per_capita();
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| set.households()[a].id.cmp(&set.households()[b].id))
    });

    let total_mass: f64 = set
        .households()
        .iter()
        .map(|h| h.weight * h.size as f64)
        .sum();
    let mut mean = 0.0;
    for (h, &y) in set.households().iter().zip(values) {
        mean += (h.weight * h.size as f64 / total_mass) * y;
    }
    if mean <= 0.0 {
        return Err(DistributionError::NonPositiveMean(mean));
    }

    // sum_ij p_i p_j |y_i - y_j| = 2 * sum_j p_j (y_j C_{j-1} - T_{j-1})
    // over the ascending order, with C the cumulative weight share and T the
    // cumulative weighted value.
    let mut cum_share = 0.0;
    let mut cum_value = 0.0;
    let mut spread = 0.0;
    for &idx in &order {
        let h = &set.households()[idx];
        let p = h.weight * h.size as f64 / total_mass;
        let y = values[idx];
        spread += p * (y * cum_share - cum_value);
        cum_share += p;
        cum_value += p * y;
    }
    Ok(spread / mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistMetrics {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub gini: f64,
}

/// Poverty and inequality before and after deducting taxes from the
/// welfare indicator, with percentage variations.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub indicator: &'static str,
    pub gross: DistMetrics,
    pub net: DistMetrics,
    pub variation_pct: DistMetrics,
    /// Households whose net indicator went negative (possible under reform
    /// scenarios with transfers); the net Gini may exceed 1 when non-zero.
    pub negative_net: usize,
}

impl DistributionReport {
    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "metric,gross,net,variation_pct")?;
        let rows = [
            ("p0", self.gross.p0, self.net.p0, self.variation_pct.p0),
            ("p1", self.gross.p1, self.net.p1, self.variation_pct.p1),
            ("p2", self.gross.p2, self.net.p2, self.variation_pct.p2),
            ("gini", self.gross.gini, self.net.gini, self.variation_pct.gini),
        ];
        for (metric, gross, net, var) in rows {
            writeln!(out, "{metric},{gross:.4},{net:.4},{var:.1}")?;
        }
        Ok(())
    }
}

fn metrics(
    set: &MicrodataSet,
    ind: &WelfareIndicator,
    line: PovertyLine,
) -> Result<DistMetrics, DistributionError> {
    Ok(DistMetrics {
        p0: fgt(set, ind, line, 0),
        p1: fgt(set, ind, line, 1),
        p2: fgt(set, ind, line, 2),
        gini: gini(set, ind)?,
    })
}

fn pct_change(gross: f64, net: f64) -> f64 {
    if gross == 0.0 {
        if net == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (net - gross) / gross * 100.0
    }
}

/// Deduct per-household taxes from the gross indicator and report FGT and
/// Gini for both. Taxes may be negative for reform scenarios where
/// transfers exceed the tax paid.
pub fn impact_report(
    set: &MicrodataSet,
    ind_gross: &WelfareIndicator,
    taxes: &[f64],
    line: PovertyLine,
) -> Result<DistributionReport, DistributionError> {
    assert_eq!(taxes.len(), set.len());
    let net_values: Vec<f64> = ind_gross
        .household_values()
        .iter()
        .zip(taxes)
        .map(|(v, t)| v - t)
        .collect();
    let negative_net = net_values.iter().filter(|&&v| v < 0.0).count();
    let ind_net = WelfareIndicator::from_values(ind_gross.kind, set, net_values);

    let gross = metrics(set, ind_gross, line)?;
    let net = metrics(set, &ind_net, line)?;
    Ok(DistributionReport {
        indicator: ind_gross.kind.as_str(),
        gross,
        net,
        variation_pct: DistMetrics {
            p0: pct_change(gross.p0, net.p0),
            p1: pct_change(gross.p1, net.p1),
            p2: pct_change(gross.p2, net.p2),
            gini: pct_change(gross.gini, net.gini),
        },
        negative_net,
    })
}
