//! Effective-rate schedule and the inside/outside rate algebra.
//!
//! Rates are stored on the *inside* basis (tax as a fraction of the
//! tax-inclusive price), which is how effective rates embedded in observed
//! spending are expressed. Reform rates quote on the *outside* basis (tax as
//! a fraction of the tax-exclusive price); [`inside_to_outside`] and
//! [`outside_to_inside`] convert between the two.
//!
//! A [`RateSchedule`] owns the item catalog: code, reporting category,
//! baseline inside rate and policy tags. Items are addressed by [`ItemId`]
//! (an index into the schedule) everywhere in the hot paths; codes are only
//! touched at the file boundary.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::microdata::Household;

/// Index of an item within a [`RateSchedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub u32);

impl ItemId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The fifteen reporting categories of goods and services.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    BasicFoodBasket,
    OtherFood,
    TobaccoAlcohol,
    Clothing,
    ElectricityGas,
    Rent,
    HouseholdGoodsServices,
    Health,
    PrivateTransport,
    PublicTransport,
    Communication,
    Education,
    RecreationCulture,
    PersonalCare,
    OtherGoodsServices,
}

impl Category {
    pub const ALL: [Category; 15] = [
        Category::BasicFoodBasket,
        Category::OtherFood,
        Category::TobaccoAlcohol,
        Category::Clothing,
        Category::ElectricityGas,
        Category::Rent,
        Category::HouseholdGoodsServices,
        Category::Health,
        Category::PrivateTransport,
        Category::PublicTransport,
        Category::Communication,
        Category::Education,
        Category::RecreationCulture,
        Category::PersonalCare,
        Category::OtherGoodsServices,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::BasicFoodBasket => "basic_food_basket",
            Category::OtherFood => "other_food",
            Category::TobaccoAlcohol => "tobacco_alcohol",
            Category::Clothing => "clothing",
            Category::ElectricityGas => "electricity_gas",
            Category::Rent => "rent",
            Category::HouseholdGoodsServices => "household_goods_services",
            Category::Health => "health",
            Category::PrivateTransport => "private_transport",
            Category::PublicTransport => "public_transport",
            Category::Communication => "communication",
            Category::Education => "education",
            Category::RecreationCulture => "recreation_culture",
            Category::PersonalCare => "personal_care",
            Category::OtherGoodsServices => "other_goods_services",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Policy tags attached to items.
///
/// Tags drive reform-scenario selectors (rate classes, cashback scopes,
/// transfer financing) and the two structural exclusions: `DomesticService`
/// items are outside every tax base, and `Basket` marks the zero-ratable
/// food basket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Tag {
    Basket = 0,
    TobaccoAlcohol = 1,
    EnergyGas = 2,
    DomesticService = 3,
    FinancialHealth = 4,
    /// 40%-of-standard class: education and health services, medicines,
    /// urban public transit, cultural productions.
    EducHealthMedsTransitCulture = 5,
    /// 70%-of-standard class: regulated professional services.
    ProfessionalServices = 6,
}

impl Tag {
    pub const ALL: [Tag; 7] = [
        Tag::Basket,
        Tag::TobaccoAlcohol,
        Tag::EnergyGas,
        Tag::DomesticService,
        Tag::FinancialHealth,
        Tag::EducHealthMedsTransitCulture,
        Tag::ProfessionalServices,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Basket => "basket",
            Tag::TobaccoAlcohol => "tobacco_alcohol",
            Tag::EnergyGas => "energy_gas",
            Tag::DomesticService => "domestic_service",
            Tag::FinancialHealth => "financial_health",
            Tag::EducHealthMedsTransitCulture => "educ_health_meds_transit_culture",
            Tag::ProfessionalServices => "professional_services",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        Tag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Small set of [`Tag`]s, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct TagSet(u8);

impl TagSet {
    pub const EMPTY: TagSet = TagSet(0);

    pub fn of(tags: &[Tag]) -> TagSet {
        let mut set = TagSet::EMPTY;
        for &t in tags {
            set.insert(t);
        }
        set
    }

    pub fn insert(&mut self, tag: Tag) {
        self.0 |= 1 << tag as u8;
    }

    pub fn with(mut self, tag: Tag) -> TagSet {
        self.insert(tag);
        self
    }

    pub fn contains(self, tag: Tag) -> bool {
        self.0 & (1 << tag as u8) != 0
    }

    pub fn intersects(self, other: TagSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Tag> {
        Tag::ALL.into_iter().filter(move |&t| self.contains(t))
    }
}

impl fmt::Display for TagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for tag in self.iter() {
            if !first {
                f.write_str(";")?;
            }
            f.write_str(tag.as_str())?;
            first = false;
        }
        Ok(())
    }
}

/// One catalog entry: code, category, baseline inside rate and tags.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSpec {
    pub code: String,
    pub category: Category,
    pub rate_inside: f64,
    pub tags: TagSet,
}

impl ItemSpec {
    pub fn new(code: &str, category: Category, rate_inside: f64, tags: TagSet) -> ItemSpec {
        ItemSpec {
            code: code.to_string(),
            category,
            rate_inside,
            tags,
        }
    }
}

#[derive(Debug, Error)]
pub enum RateError {
    #[error("rate {0} outside domain: inside rates must satisfy 0 <= t < 1")]
    InsideDomain(f64),
    #[error("rate {0} outside domain: outside rates must satisfy t >= 0")]
    OutsideDomain(f64),
    #[error("unknown item code {0:?}")]
    UnknownItemCode(String),
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("duplicate item code {0:?}")]
    DuplicateItemCode(String),
    #[error("item {code:?}: rate_inside {rate} outside [0, 1)")]
    RateOutOfRange { code: String, rate: f64 },
    #[error("item {0:?}: domestic_service items must carry rate_inside = 0")]
    TaxedDomesticService(String),
    #[error("item {0:?}: tags basket and tobacco_alcohol are mutually exclusive")]
    ConflictingTags(String),
    #[error("schedule has no items")]
    Empty,
    #[error("{file}:{line}: {message}")]
    MalformedRow {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: expected header {expected:?}, found {found:?}")]
    BadHeader {
        file: String,
        expected: String,
        found: String,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Baseline effective-rate schedule: the item catalog plus per-item inside
/// rates. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    items: Vec<ItemSpec>,
    by_code: HashMap<String, ItemId>,
}

pub const RATES_HEADER: &str = "item_code,category,rate_inside,tags";

impl RateSchedule {
    pub fn new(items: Vec<ItemSpec>) -> Result<RateSchedule, ScheduleError> {
        if items.is_empty() {
            return Err(ScheduleError::Empty);
        }
        let mut by_code = HashMap::with_capacity(items.len());
        for (idx, item) in items.iter().enumerate() {
            if !(0.0..1.0).contains(&item.rate_inside) {
                return Err(ScheduleError::RateOutOfRange {
                    code: item.code.clone(),
                    rate: item.rate_inside,
                });
            }
            if item.tags.contains(Tag::DomesticService) && item.rate_inside != 0.0 {
                return Err(ScheduleError::TaxedDomesticService(item.code.clone()));
            }
            if item.tags.contains(Tag::Basket) && item.tags.contains(Tag::TobaccoAlcohol) {
                return Err(ScheduleError::ConflictingTags(item.code.clone()));
            }
            if by_code
                .insert(item.code.clone(), ItemId(idx as u32))
                .is_some()
            {
                return Err(ScheduleError::DuplicateItemCode(item.code.clone()));
            }
        }
        Ok(RateSchedule { items, by_code })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = (ItemId, &ItemSpec)> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, spec)| (ItemId(i as u32), spec))
    }

    pub fn lookup(&self, code: &str) -> Option<ItemId> {
        self.by_code.get(code).copied()
    }

    pub fn spec(&self, id: ItemId) -> &ItemSpec {
        &self.items[id.index()]
    }

    pub fn code(&self, id: ItemId) -> &str {
        &self.items[id.index()].code
    }

    pub fn rate_inside(&self, id: ItemId) -> f64 {
        self.items[id.index()].rate_inside
    }

    pub fn category(&self, id: ItemId) -> Category {
        self.items[id.index()].category
    }

    pub fn tags(&self, id: ItemId) -> TagSet {
        self.items[id.index()].tags
    }

    pub fn is_domestic_service(&self, id: ItemId) -> bool {
        self.items[id.index()].tags.contains(Tag::DomesticService)
    }

    /// Load a schedule from `rates.csv` (header `item_code,category,rate_inside,tags`,
    /// tags `;`-separated, possibly empty).
    pub fn from_csv_path(path: &Path) -> Result<RateSchedule, ScheduleError> {
        let file = path.display().to_string();
        let io_err = |source| ScheduleError::Io {
            path: file.clone(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(source) => io_err(source),
                other => ScheduleError::MalformedRow {
                    file: file.clone(),
                    line: 1,
                    message: format!("{other:?}"),
                },
            })?;

        let headers = reader
            .headers()
            .map_err(|e| ScheduleError::MalformedRow {
                file: file.clone(),
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if headers != RATES_HEADER {
            return Err(ScheduleError::BadHeader {
                file,
                expected: RATES_HEADER.to_string(),
                found: headers,
            });
        }

        let mut items = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| ScheduleError::MalformedRow {
                file: file.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let malformed = |message: String| ScheduleError::MalformedRow {
                file: file.clone(),
                line,
                message,
            };
            if record.len() != 4 {
                return Err(malformed(format!("expected 4 fields, found {}", record.len())));
            }
            let code = record[0].trim().to_string();
            if code.is_empty() {
                return Err(malformed("empty item_code".to_string()));
            }
            let category = Category::parse(record[1].trim())
                .ok_or_else(|| malformed(format!("unknown category {:?}", &record[1])))?;
            let rate_inside: f64 = record[2]
                .trim()
                .parse()
                .map_err(|_| malformed(format!("non-numeric rate_inside {:?}", &record[2])))?;
            let mut tags = TagSet::EMPTY;
            for part in record[3].split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let tag =
                    Tag::parse(part).ok_or_else(|| malformed(format!("unknown tag {part:?}")))?;
                tags.insert(tag);
            }
            items.push(ItemSpec {
                code,
                category,
                rate_inside,
                tags,
            });
        }
        RateSchedule::new(items)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{RATES_HEADER}")?;
        for item in &self.items {
            writeln!(
                out,
                "{},{},{},{}",
                item.code, item.category, item.rate_inside, item.tags
            )?;
        }
        Ok(())
    }
}

/// Convert an inside-basis rate to the outside basis: `t / (1 - t)`.
pub fn inside_to_outside(t_in: f64) -> Result<f64, RateError> {
    if !(0.0..1.0).contains(&t_in) {
        return Err(RateError::InsideDomain(t_in));
    }
    Ok(t_in / (1.0 - t_in))
}

/// Convert an outside-basis rate to the inside basis: `t / (1 + t)`.
pub fn outside_to_inside(t_out: f64) -> Result<f64, RateError> {
    if !t_out.is_finite() || t_out < 0.0 {
        return Err(RateError::OutsideDomain(t_out));
    }
    Ok(t_out / (1.0 + t_out))
}

/// Tax embedded in a household's observed monetary spending at baseline
/// inside rates. Non-monetary amounts and domestic services contribute
/// nothing.
pub fn baseline_tax(household: &Household, schedule: &RateSchedule) -> f64 {
    let mut tax = 0.0;
    for exp in &household.expenditures {
        if schedule.is_domestic_service(exp.item) {
            continue;
        }
        tax += exp.monetary * schedule.rate_inside(exp.item);
    }
    tax
}

/// Per-item monetary spending stripped of the baseline embedded tax:
/// `amount * (1 - rate_inside)`. This is the base reform rates (quoted
/// outside) apply to. Domestic-service items map to zero.
pub fn net_base(household: &Household, schedule: &RateSchedule) -> Vec<(ItemId, f64)> {
    household
        .expenditures
        .iter()
        .map(|exp| {
            let base = if schedule.is_domestic_service(exp.item) {
                0.0
            } else {
                exp.monetary * (1.0 - schedule.rate_inside(exp.item))
            };
            (exp.item, base)
        })
        .collect()
}

/// Baseline tax for every household, in storage order.
pub fn baseline_taxes(
    set: &crate::microdata::MicrodataSet,
    schedule: &RateSchedule,
) -> Vec<f64> {
    set.households()
        .iter()
        .map(|h| baseline_tax(h, schedule))
        .collect()
}

/// Weighted aggregate baseline revenue, the neutrality target for solved
/// reform scenarios.
pub fn baseline_revenue(
    set: &crate::microdata::MicrodataSet,
    schedule: &RateSchedule,
) -> f64 {
    set.households()
        .iter()
        .map(|h| h.weight * baseline_tax(h, schedule))
        .sum()
}

/// Mean inside rate per category, weighted by aggregate monetary spending,
/// with the outside-basis conversion alongside. Categories nobody spends on
/// fall back to the unweighted item mean.
pub fn category_rate_summary(
    set: &crate::microdata::MicrodataSet,
    schedule: &RateSchedule,
) -> Vec<(Category, f64, f64)> {
    let mut tax = vec![0.0f64; Category::ALL.len()];
    let mut spend = vec![0.0f64; Category::ALL.len()];
    let index_of = |c: Category| Category::ALL.iter().position(|&x| x == c).unwrap();
    for h in set.households() {
        for e in &h.expenditures {
            let idx = index_of(schedule.category(e.item));
            tax[idx] += h.weight * e.monetary * schedule.rate_inside(e.item);
            spend[idx] += h.weight * e.monetary;
        }
    }
    Category::ALL
        .into_iter()
        .enumerate()
        .map(|(idx, category)| {
            let inside = if spend[idx] > 0.0 {
                tax[idx] / spend[idx]
            } else {
                let items: Vec<f64> = schedule
                    .items()
                    .filter(|(_, s)| s.category == category)
                    .map(|(_, s)| s.rate_inside)
                    .collect();
                if items.is_empty() {
                    0.0
                } else {
                    items.iter().sum::<f64>() / items.len() as f64
                }
            };
            let outside = inside_to_outside(inside).unwrap_or(f64::INFINITY);
            (category, inside, outside)
        })
        .collect()
}
