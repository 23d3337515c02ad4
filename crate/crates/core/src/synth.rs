//! Synthetic microdata generator.
//!
//! Real budget-survey microdata is not redistributable, so the engine ships
//! a generator that produces desk-scale stand-ins with the structural
//! features the analysis depends on: heavy-right-tailed per-capita incomes,
//! Engel-like budget shares (food basket falling with income, services
//! rising) and a configurable fraction of households whose monetary
//! consumption exceeds monetary income.
//!
//! Output is deterministic for a fixed `(n, seed, params)` triple.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use thiserror::Error;

use crate::microdata::{Expenditure, Household, HouseholdId, MicrodataSet};
use crate::rates::{Category, ItemSpec, RateSchedule, Tag, TagSet};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Average fraction of households drawn with monetary consumption above
    /// monetary income. Deficit incidence tilts toward low incomes, where
    /// survey income under-reporting concentrates.
    pub deficit_fraction: f64,
    /// Median per-capita income (currency/month) of the lognormal draw.
    pub median_income_per_capita: f64,
    /// Log-scale dispersion of per-capita income.
    pub sigma_log_income: f64,
    /// Mean sampling weight (expansion factor).
    pub mean_weight: f64,
    /// Fraction of households with no expenditure rows at all.
    pub zero_expenditure_fraction: f64,
    /// Log-normal jitter applied to category budget shares.
    pub share_noise_sigma: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            deficit_fraction: 0.10,
            median_income_per_capita: 1200.0,
            sigma_log_income: 0.95,
            mean_weight: 1000.0,
            zero_expenditure_fraction: 0.005,
            share_noise_sigma: 0.30,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidParams(msg.to_string()));
        if !(0.0..=1.0).contains(&self.deficit_fraction) {
            return bad("deficit_fraction outside [0, 1]");
        }
        if self.median_income_per_capita <= 0.0 {
            return bad("median_income_per_capita must be > 0");
        }
        if self.sigma_log_income <= 0.0 {
            return bad("sigma_log_income must be > 0");
        }
        if self.mean_weight <= 0.0 {
            return bad("mean_weight must be > 0");
        }
        if !(0.0..=1.0).contains(&self.zero_expenditure_fraction) {
            return bad("zero_expenditure_fraction outside [0, 1]");
        }
        if self.share_noise_sigma < 0.0 {
            return bad("share_noise_sigma must be >= 0");
        }
        Ok(())
    }
}

/// Base budget share and income elasticity per category. Necessities carry
/// negative elasticities, services positive ones.
fn category_profile(category: Category) -> (f64, f64) {
    match category {
        Category::BasicFoodBasket => (0.089, -0.30),
        Category::OtherFood => (0.089, -0.02),
        Category::TobaccoAlcohol => (0.009, -0.10),
        Category::Clothing => (0.041, -0.10),
        Category::ElectricityGas => (0.065, -0.28),
        Category::Rent => (0.100, -0.05),
        Category::HouseholdGoodsServices => (0.085, 0.08),
        Category::Health => (0.073, 0.12),
        Category::PrivateTransport => (0.096, 0.30),
        Category::PublicTransport => (0.035, -0.22),
        Category::Communication => (0.036, 0.05),
        Category::Education => (0.026, 0.20),
        Category::RecreationCulture => (0.040, 0.12),
        Category::PersonalCare => (0.056, -0.20),
        Category::OtherGoodsServices => (0.037, 0.40),
    }
}

/// Probability that a household consumes an item at all, rising with
/// relative income for the services that concentrate at the top.
fn inclusion_probability(tags: TagSet, relative_income: f64) -> f64 {
    if tags.contains(Tag::DomesticService) {
        (0.05 + 0.20 * relative_income).min(0.85)
    } else if tags.contains(Tag::ProfessionalServices) {
        (0.08 + 0.18 * relative_income).min(0.85)
    } else if tags.contains(Tag::FinancialHealth) {
        (0.20 + 0.25 * relative_income).min(0.95)
    } else if tags.contains(Tag::TobaccoAlcohol) {
        0.45
    } else {
        0.93
    }
}

const HOUSEHOLD_SIZE_WEIGHTS: [u32; 8] = [12, 26, 24, 20, 10, 5, 2, 1];
const MIN_ROW_AMOUNT: f64 = 0.01;

fn draw_size(rng: &mut ChaCha8Rng) -> u32 {
    let total: u32 = HOUSEHOLD_SIZE_WEIGHTS.iter().sum();
    let mut pick = rng.random_range(0..total);
    for (i, &w) in HOUSEHOLD_SIZE_WEIGHTS.iter().enumerate() {
        if pick < w {
            return i as u32 + 1;
        }
        pick -= w;
    }
    HOUSEHOLD_SIZE_WEIGHTS.len() as u32
}

/// Generate `n` households against the given schedule.
pub fn generate_synthetic(
    n: usize,
    seed: u64,
    params: &SynthParams,
    schedule: &RateSchedule,
) -> Result<MicrodataSet, SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidParams("n must be >= 1".to_string()));
    }
    params.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let income_dist = LogNormal::new(
        params.median_income_per_capita.ln(),
        params.sigma_log_income,
    )
    .map_err(|e| SynthError::InvalidParams(e.to_string()))?;

    // deficit probability ~ f * R^-0.5, R the income relative to the
    // median; dividing by E[R^-0.5] keeps the average at f
    let deficit_tilt_norm = (0.125 * params.sigma_log_income.powi(2)).exp();

    let rent_item = schedule
        .items()
        .find(|(_, spec)| spec.category == Category::Rent)
        .map(|(id, _)| id);
    let basket_items: Vec<_> = schedule
        .items()
        .filter(|(_, spec)| spec.category == Category::BasicFoodBasket)
        .map(|(id, _)| id)
        .collect();

    let mut households = Vec::with_capacity(n);
    for id in 1..=n as u64 {
        let size = draw_size(&mut rng);
        let weight = params.mean_weight * rng.random_range(0.4..1.8);
        let per_capita_income = income_dist.sample(&mut rng);
        let relative_income = per_capita_income / params.median_income_per_capita;
        let total_income = per_capita_income * size as f64;
        let nonmonetary_share = rng.random_range(0.08..0.30);
        let income_nonmonetary = total_income * nonmonetary_share;
        let income_monetary = total_income - income_nonmonetary;

        let zero_expenditure = rng.random_bool(params.zero_expenditure_fraction);
        let deficit_probability = (params.deficit_fraction
            * relative_income.powf(-0.5)
            / deficit_tilt_norm)
            .min(1.0);
        let deficit = !zero_expenditure && rng.random_bool(deficit_probability);
        let consumption_ratio = if deficit {
            rng.random_range(1.05..1.80)
        } else {
            rng.random_range(0.65..0.98)
        };
        let monetary_consumption = if zero_expenditure {
            0.0
        } else {
            income_monetary * consumption_ratio
        };
        let nonmonetary_consumption = if zero_expenditure {
            0.0
        } else {
            income_nonmonetary
        };

        // per-item allocation weights: Engel-tilted category share times
        // within-category jitter, zeroed for items the household skips
        let mut item_weights = vec![0.0; schedule.len()];
        let mut weight_sum = 0.0;
        for (item, spec) in schedule.items() {
            if !rng.random_bool(inclusion_probability(spec.tags, relative_income)) {
                continue;
            }
            let (base_share, elasticity) = category_profile(spec.category);
            let tilt = relative_income.powf(elasticity);
            let jitter = if params.share_noise_sigma > 0.0 {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                (z * params.share_noise_sigma).exp()
            } else {
                1.0
            };
            let w = base_share * tilt * jitter;
            item_weights[item.index()] = w;
            weight_sum += w;
        }

        let mut monetary = vec![0.0; schedule.len()];
        let mut nonmonetary = vec![0.0; schedule.len()];
        if monetary_consumption > 0.0 && weight_sum > 0.0 {
            for (w, m) in item_weights.iter().zip(monetary.iter_mut()) {
                *m = monetary_consumption * w / weight_sum;
            }
        }
        if nonmonetary_consumption > 0.0 {
            // imputed rent dominates non-monetary consumption; a slice of
            // own-produced food goes to the basket
            let to_rent = match rent_item {
                Some(_) => 0.85 * nonmonetary_consumption,
                None => 0.0,
            };
            if let Some(rent) = rent_item {
                nonmonetary[rent.index()] += to_rent;
            }
            let remainder = nonmonetary_consumption - to_rent;
            if !basket_items.is_empty() {
                let each = remainder / basket_items.len() as f64;
                for item in &basket_items {
                    nonmonetary[item.index()] += each;
                }
            } else if let Some(rent) = rent_item {
                nonmonetary[rent.index()] += remainder;
            }
        }

        let expenditures: Vec<Expenditure> = schedule
            .items()
            .filter_map(|(item, _)| {
                let m = monetary[item.index()];
                let nm = nonmonetary[item.index()];
                if m >= MIN_ROW_AMOUNT || nm >= MIN_ROW_AMOUNT {
                    Some(Expenditure {
                        item,
                        monetary: m,
                        nonmonetary: nm,
                    })
                } else {
                    None
                }
            })
            .collect();

        households.push(Household {
            id: HouseholdId(id),
            weight,
            size,
            income_monetary,
            income_nonmonetary,
            expenditures,
        });
    }

    MicrodataSet::new(households).map_err(|e| SynthError::InvalidParams(e.to_string()))
}

/// Built-in item catalog: roughly thirty items across the fifteen
/// categories, carrying the category-level baseline effective rates and the
/// policy tags reform scenarios select on.
pub fn default_catalog() -> RateSchedule {
    use Category::*;
    let t = TagSet::of;
    let items = vec![
        ItemSpec::new("rice_beans", BasicFoodBasket, 0.135, t(&[Tag::Basket])),
        ItemSpec::new("staple_grains", BasicFoodBasket, 0.135, t(&[Tag::Basket])),
        ItemSpec::new("milk_dairy", BasicFoodBasket, 0.135, t(&[Tag::Basket])),
        ItemSpec::new("meat_fish_eggs", BasicFoodBasket, 0.135, t(&[Tag::Basket])),
        ItemSpec::new("food_away_from_home", OtherFood, 0.26, TagSet::EMPTY),
        ItemSpec::new("processed_food_beverages", OtherFood, 0.26, TagSet::EMPTY),
        ItemSpec::new("tobacco_products", TobaccoAlcohol, 0.409, t(&[Tag::TobaccoAlcohol])),
        ItemSpec::new("alcoholic_beverages", TobaccoAlcohol, 0.409, t(&[Tag::TobaccoAlcohol])),
        ItemSpec::new("clothing_apparel", Clothing, 0.21, TagSet::EMPTY),
        ItemSpec::new("footwear", Clothing, 0.21, TagSet::EMPTY),
        ItemSpec::new("electricity", ElectricityGas, 0.338, t(&[Tag::EnergyGas])),
        ItemSpec::new("cooking_gas", ElectricityGas, 0.338, t(&[Tag::EnergyGas])),
        ItemSpec::new("housing_rent", Rent, 0.056, TagSet::EMPTY),
        ItemSpec::new("domestic_services", HouseholdGoodsServices, 0.0, t(&[Tag::DomesticService])),
        ItemSpec::new("appliances", HouseholdGoodsServices, 0.139, TagSet::EMPTY),
        ItemSpec::new("furniture_housewares", HouseholdGoodsServices, 0.139, TagSet::EMPTY),
        ItemSpec::new("medicines", Health, 0.153, t(&[Tag::EducHealthMedsTransitCulture])),
        ItemSpec::new("health_services", Health, 0.153, t(&[Tag::EducHealthMedsTransitCulture])),
        ItemSpec::new("health_plans", Health, 0.153, t(&[Tag::FinancialHealth])),
        ItemSpec::new("vehicle_fuel", PrivateTransport, 0.266, TagSet::EMPTY),
        ItemSpec::new("vehicle_purchase_upkeep", PrivateTransport, 0.266, TagSet::EMPTY),
        ItemSpec::new("urban_transit", PublicTransport, 0.21, t(&[Tag::EducHealthMedsTransitCulture])),
        ItemSpec::new("intercity_transport", PublicTransport, 0.21, TagSet::EMPTY),
        ItemSpec::new("phone_internet", Communication, 0.295, TagSet::EMPTY),
        ItemSpec::new("education_services", Education, 0.045, t(&[Tag::EducHealthMedsTransitCulture])),
        ItemSpec::new("books_supplies", Education, 0.045, TagSet::EMPTY),
        ItemSpec::new("cultural_services", RecreationCulture, 0.247, t(&[Tag::EducHealthMedsTransitCulture])),
        ItemSpec::new("pay_tv_streaming", RecreationCulture, 0.247, TagSet::EMPTY),
        ItemSpec::new("personal_care_products", PersonalCare, 0.218, TagSet::EMPTY),
        ItemSpec::new("financial_services", OtherGoodsServices, 0.107, t(&[Tag::FinancialHealth])),
        ItemSpec::new("professional_services", OtherGoodsServices, 0.107, t(&[Tag::ProfessionalServices])),
        ItemSpec::new("misc_goods_services", OtherGoodsServices, 0.107, TagSet::EMPTY),
    ];
    RateSchedule::new(items).expect("built-in catalog is valid")
}
