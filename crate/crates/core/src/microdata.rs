//! Household budget-survey microdata: weighted households with itemized
//! monetary and non-monetary expenditures.
//!
//! A [`MicrodataSet`] is immutable after load and canonically ordered by
//! household id, so every downstream aggregation is deterministic. Amounts
//! are currency/month as `f64`; incomes are disposable (net of direct
//! taxes).

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::rates::{ItemId, RateSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HouseholdId(pub u64);

impl fmt::Display for HouseholdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Pre-aggregated spending on one item: at most one row per item per
/// household.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expenditure {
    pub item: ItemId,
    pub monetary: f64,
    pub nonmonetary: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Household {
    pub id: HouseholdId,
    /// Sampling weight (expansion factor), > 0.
    pub weight: f64,
    pub size: u32,
    pub income_monetary: f64,
    pub income_nonmonetary: f64,
    /// Sorted by item id; at most one entry per item.
    pub expenditures: Vec<Expenditure>,
}

impl Household {
    pub fn monetary_expenditure(&self) -> f64 {
        self.expenditures.iter().map(|e| e.monetary).sum()
    }

    pub fn total_expenditure(&self) -> f64 {
        self.expenditures
            .iter()
            .map(|e| e.monetary + e.nonmonetary)
            .sum()
    }
}

#[derive(Debug, Error)]
pub enum MicrodataError {
    #[error("microdata set has no households")]
    Empty,
    #[error("duplicate household id {0}")]
    DuplicateHousehold(HouseholdId),
    #[error("household {id}: {message}")]
    InvalidHousehold { id: HouseholdId, message: String },
}

/// Immutable collection of weighted households, ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrodataSet {
    households: Vec<Household>,
}

impl MicrodataSet {
    /// Canonicalizes: households sorted by id, expenditures sorted by item
    /// with duplicate items merged by summation.
    pub fn new(mut households: Vec<Household>) -> Result<MicrodataSet, MicrodataError> {
        if households.is_empty() {
            return Err(MicrodataError::Empty);
        }
        households.sort_by_key(|h| h.id);
        for pair in households.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(MicrodataError::DuplicateHousehold(pair[1].id));
            }
        }
        for h in &mut households {
            let check = |ok: bool, message: &str| -> Result<(), MicrodataError> {
                if ok {
                    Ok(())
                } else {
                    Err(MicrodataError::InvalidHousehold {
                        id: h.id,
                        message: message.to_string(),
                    })
                }
            };
            check(h.weight > 0.0 && h.weight.is_finite(), "weight must be > 0")?;
            check(h.size >= 1, "size must be >= 1")?;
            check(
                h.income_monetary >= 0.0 && h.income_monetary.is_finite(),
                "income_monetary must be >= 0",
            )?;
            check(
                h.income_nonmonetary >= 0.0 && h.income_nonmonetary.is_finite(),
                "income_nonmonetary must be >= 0",
            )?;
            check(
                h.expenditures
                    .iter()
                    .all(|e| e.monetary >= 0.0 && e.nonmonetary >= 0.0),
                "expenditure amounts must be >= 0",
            )?;
            h.expenditures.sort_by_key(|e| e.item);
            h.expenditures.dedup_by(|next, prev| {
                if next.item == prev.item {
                    prev.monetary += next.monetary;
                    prev.nonmonetary += next.nonmonetary;
                    true
                } else {
                    false
                }
            });
        }
        Ok(MicrodataSet { households })
    }

    pub fn households(&self) -> &[Household] {
        &self.households
    }

    pub fn len(&self) -> usize {
        self.households.len()
    }

    pub fn is_empty(&self) -> bool {
        self.households.is_empty()
    }

    /// Weighted person count: sum of weight * size.
    pub fn population(&self) -> f64 {
        self.households
            .iter()
            .map(|h| h.weight * h.size as f64)
            .sum()
    }

    /// Weighted household count: sum of weights.
    pub fn weighted_households(&self) -> f64 {
        self.households.iter().map(|h| h.weight).sum()
    }
}

pub const HOUSEHOLDS_HEADER: &str = "household_id,weight,size,income_monetary,income_nonmonetary";
pub const EXPENDITURES_HEADER: &str = "household_id,item_code,amount_monetary,amount_nonmonetary";

/// One problem found while reading the input files. `line` is 1-based and
/// counts the header.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("{file}:{line}: MalformedRow: {message}")]
    MalformedRow {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}:{line}: UnknownItemCode: {code:?} not in rate schedule")]
    UnknownItemCode {
        file: String,
        line: u64,
        code: String,
    },
    #[error("{file}:{line}: OrphanExpenditure: household {household} not in households file")]
    OrphanExpenditure {
        file: String,
        line: u64,
        household: u64,
    },
    #[error("{file}:{line}: DuplicateHousehold: id {id} repeated")]
    DuplicateHousehold { file: String, line: u64, id: u64 },
    #[error("{file}: BadHeader: expected {expected:?}, found {found:?}")]
    BadHeader {
        file: String,
        expected: String,
        found: String,
    },
    #[error("{file}: EmptyInput: no data rows")]
    EmptyInput { file: String },
    #[error("{file}: Io: {message}")]
    Io { file: String, message: String },
}

/// Outcome of a lenient scan: the set (if loadable) plus every problem
/// found, in file order.
#[derive(Debug)]
pub struct LoadReport {
    pub set: Option<MicrodataSet>,
    pub errors: Vec<LoadError>,
    pub household_rows: usize,
    pub expenditure_rows: usize,
}

struct CsvScan {
    file: String,
    records: Vec<(u64, csv::StringRecord)>,
    errors: Vec<LoadError>,
}

fn scan_csv(path: &Path, expected_header: &str) -> CsvScan {
    let file = path.display().to_string();
    let mut scan = CsvScan {
        file: file.clone(),
        records: Vec::new(),
        errors: Vec::new(),
    };
    let mut reader = match csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
    {
        Ok(r) => r,
        Err(e) => {
            scan.errors.push(LoadError::Io {
                file,
                message: e.to_string(),
            });
            return scan;
        }
    };
    match reader.headers() {
        Ok(h) => {
            let found = h.iter().collect::<Vec<_>>().join(",");
            if found != expected_header {
                scan.errors.push(LoadError::BadHeader {
                    file: file.clone(),
                    expected: expected_header.to_string(),
                    found,
                });
                return scan;
            }
        }
        Err(e) => {
            scan.errors.push(LoadError::Io {
                file,
                message: e.to_string(),
            });
            return scan;
        }
    }
    for record in reader.records() {
        match record {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line());
                scan.records.push((line, r));
            }
            Err(e) => scan.errors.push(LoadError::MalformedRow {
                file: file.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
        }
    }
    if scan.records.is_empty() && scan.errors.is_empty() {
        scan.errors.push(LoadError::EmptyInput { file });
    }
    scan
}

fn parse_nonneg(field: &str, name: &str) -> Result<f64, String> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("non-numeric {name} {field:?}"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("negative or non-finite {name} {field:?}"));
    }
    Ok(value)
}

/// Scan both input files and report every problem found. The set is
/// returned only when no errors occurred.
pub fn inspect_microdata(
    households_path: &Path,
    expenditures_path: &Path,
    schedule: &RateSchedule,
) -> LoadReport {
    let mut errors = Vec::new();
    let mut household_rows = 0;
    let mut expenditure_rows = 0;

    let hh_scan = scan_csv(households_path, HOUSEHOLDS_HEADER);
    errors.extend(hh_scan.errors.iter().cloned());
    let mut households: Vec<Household> = Vec::with_capacity(hh_scan.records.len());
    let mut by_id: HashMap<u64, usize> = HashMap::with_capacity(hh_scan.records.len());
    for (line, record) in &hh_scan.records {
        household_rows += 1;
        let malformed = |message: String| LoadError::MalformedRow {
            file: hh_scan.file.clone(),
            line: *line,
            message,
        };
        if record.len() != 5 {
            errors.push(malformed(format!("expected 5 fields, found {}", record.len())));
            continue;
        }
        let parsed = (|| -> Result<Household, String> {
            let id: u64 = record[0]
                .trim()
                .parse()
                .map_err(|_| format!("non-numeric household_id {:?}", &record[0]))?;
            let weight = parse_nonneg(&record[1], "weight")?;
            if weight == 0.0 {
                return Err("weight must be > 0".to_string());
            }
            let size: u32 = record[2]
                .trim()
                .parse()
                .map_err(|_| format!("non-integer size {:?}", &record[2]))?;
            if size == 0 {
                return Err("size must be >= 1".to_string());
            }
            Ok(Household {
                id: HouseholdId(id),
                weight,
                size,
                income_monetary: parse_nonneg(&record[3], "income_monetary")?,
                income_nonmonetary: parse_nonneg(&record[4], "income_nonmonetary")?,
                expenditures: Vec::new(),
            })
        })();
        match parsed {
            Ok(h) => match by_id.entry(h.id.0) {
                std::collections::hash_map::Entry::Occupied(_) => {
                    errors.push(LoadError::DuplicateHousehold {
                        file: hh_scan.file.clone(),
                        line: *line,
                        id: h.id.0,
                    });
                }
                std::collections::hash_map::Entry::Vacant(slot) => {
                    slot.insert(households.len());
                    households.push(h);
                }
            },
            Err(message) => errors.push(malformed(message)),
        }
    }

    let exp_scan = scan_csv(expenditures_path, EXPENDITURES_HEADER);
    errors.extend(exp_scan.errors.iter().cloned());
    for (line, record) in &exp_scan.records {
        expenditure_rows += 1;
        let malformed = |message: String| LoadError::MalformedRow {
            file: exp_scan.file.clone(),
            line: *line,
            message,
        };
        if record.len() != 4 {
            errors.push(malformed(format!("expected 4 fields, found {}", record.len())));
            continue;
        }
        let household_id: u64 = match record[0].trim().parse() {
            Ok(id) => id,
            Err(_) => {
                errors.push(malformed(format!(
                    "non-numeric household_id {:?}",
                    &record[0]
                )));
                continue;
            }
        };
        let item = match schedule.lookup(record[1].trim()) {
            Some(item) => item,
            None => {
                errors.push(LoadError::UnknownItemCode {
                    file: exp_scan.file.clone(),
                    line: *line,
                    code: record[1].to_string(),
                });
                continue;
            }
        };
        let amounts = (|| -> Result<(f64, f64), String> {
            Ok((
                parse_nonneg(&record[2], "amount_monetary")?,
                parse_nonneg(&record[3], "amount_nonmonetary")?,
            ))
        })();
        let (monetary, nonmonetary) = match amounts {
            Ok(a) => a,
            Err(message) => {
                errors.push(malformed(message));
                continue;
            }
        };
        match by_id.get(&household_id) {
            Some(&idx) => households[idx].expenditures.push(Expenditure {
                item,
                monetary,
                nonmonetary,
            }),
            None => errors.push(LoadError::OrphanExpenditure {
                file: exp_scan.file.clone(),
                line: *line,
                household: household_id,
            }),
        }
    }

    if !errors.is_empty() {
        return LoadReport {
            set: None,
            errors,
            household_rows,
            expenditure_rows,
        };
    }
    match MicrodataSet::new(households) {
        Ok(set) => LoadReport {
            set: Some(set),
            errors,
            household_rows,
            expenditure_rows,
        },
        Err(e) => LoadReport {
            set: None,
            errors: vec![LoadError::Io {
                file: households_path.display().to_string(),
                message: e.to_string(),
            }],
            household_rows,
            expenditure_rows,
        },
    }
}

/// Strict load: every expenditure row must reference a known item and an
/// existing household; duplicate (household, item) rows merge by summation.
pub fn load_microdata(
    households_path: &Path,
    expenditures_path: &Path,
    schedule: &RateSchedule,
) -> Result<MicrodataSet, LoadError> {
    let mut report = inspect_microdata(households_path, expenditures_path, schedule);
    match report.set {
        Some(set) => Ok(set),
        None => Err(report.errors.remove(0)),
    }
}

/// Write a set back to the two CSV schemas. Reloading the written files
/// against the same schedule reproduces the set exactly.
pub fn write_microdata(
    set: &MicrodataSet,
    schedule: &RateSchedule,
    households_out: &mut dyn Write,
    expenditures_out: &mut dyn Write,
) -> std::io::Result<()> {
    writeln!(households_out, "{HOUSEHOLDS_HEADER}")?;
    writeln!(expenditures_out, "{EXPENDITURES_HEADER}")?;
    for h in set.households() {
        writeln!(
            households_out,
            "{},{},{},{},{}",
            h.id, h.weight, h.size, h.income_monetary, h.income_nonmonetary
        )?;
        for e in &h.expenditures {
            writeln!(
                expenditures_out,
                "{},{},{},{}",
                h.id,
                schedule.code(e.item),
                e.monetary,
                e.nonmonetary
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{Category, ItemSpec, TagSet};
    use std::fs;

    fn schedule() -> RateSchedule {
        RateSchedule::new(vec![
            ItemSpec::new("a", Category::OtherFood, 0.2, TagSet::EMPTY),
            ItemSpec::new("b", Category::Clothing, 0.1, TagSet::EMPTY),
        ])
        .unwrap()
    }

    fn write_files(dir: &Path, households: &str, expenditures: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let hh = dir.join("households.csv");
        let exp = dir.join("expenditures.csv");
        fs::write(&hh, households).unwrap();
        fs::write(&exp, expenditures).unwrap();
        (hh, exp)
    }

    #[test]
    fn loads_two_household_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (hh, exp) = write_files(
            dir.path(),
            "household_id,weight,size,income_monetary,income_nonmonetary\n\
             1,2.0,3,1000,100\n\
             2,1.5,2,800,0\n",
            "household_id,item_code,amount_monetary,amount_nonmonetary\n\
             1,a,100,0\n\
             1,b,50,10\n\
             2,a,200,0\n",
        );
        let set = load_microdata(&hh, &exp, &schedule()).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.population(), 2.0 * 3.0 + 1.5 * 2.0);
        assert_eq!(set.weighted_households(), 3.5);
        assert_eq!(set.households()[0].expenditures.len(), 2);
    }

    #[test]
    fn unknown_item_code_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let (hh, exp) = write_files(
            dir.path(),
            "household_id,weight,size,income_monetary,income_nonmonetary\n1,1,1,10,0\n",
            "household_id,item_code,amount_monetary,amount_nonmonetary\n1,X999,5,0\n",
        );
        let err = load_microdata(&hh, &exp, &schedule()).unwrap_err();
        match err {
            LoadError::UnknownItemCode { code, line, .. } => {
                assert_eq!(code, "X999");
                assert_eq!(line, 2);
            }
            other => panic!("expected UnknownItemCode, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_rows_merge_by_summation() {
        let dir = tempfile::tempdir().unwrap();
        let (hh, exp) = write_files(
            dir.path(),
            "household_id,weight,size,income_monetary,income_nonmonetary\n1,1,1,10,0\n",
            "household_id,item_code,amount_monetary,amount_nonmonetary\n1,a,10,0\n1,a,5,2\n",
        );
        let set = load_microdata(&hh, &exp, &schedule()).unwrap();
        let exps = &set.households()[0].expenditures;
        assert_eq!(exps.len(), 1);
        assert_eq!(exps[0].monetary, 15.0);
        assert_eq!(exps[0].nonmonetary, 2.0);
    }

    #[test]
    fn orphan_and_duplicate_and_malformed_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (hh, exp) = write_files(
            dir.path(),
            "household_id,weight,size,income_monetary,income_nonmonetary\n\
             1,1,1,10,0\n\
             1,2,1,10,0\n\
             3,-1,1,10,0\n",
            "household_id,item_code,amount_monetary,amount_nonmonetary\n9,a,5,0\n",
        );
        let report = inspect_microdata(&hh, &exp, &schedule());
        assert!(report.set.is_none());
        assert!(report
            .errors
            .iter()
            .any(|e| matches!(e, LoadError::DuplicateHousehold { id: 1, .. })));
        assert!(report
            .errors
            .iter()
            .any(|e| matches!(e, LoadError::MalformedRow { line: 4, .. })));
        assert!(report
            .errors
            .iter()
            .any(|e| matches!(e, LoadError::OrphanExpenditure { household: 9, .. })));
    }

    #[test]
    fn households_without_expenditures_are_legal() {
        let dir = tempfile::tempdir().unwrap();
        let (hh, exp) = write_files(
            dir.path(),
            "household_id,weight,size,income_monetary,income_nonmonetary\n1,1,2,10,0\n",
            "household_id,item_code,amount_monetary,amount_nonmonetary\n",
        );
        let report = inspect_microdata(&hh, &exp, &schedule());
        // empty expenditures file (header only) is an EmptyInput diagnostic
        assert!(report
            .errors
            .iter()
            .all(|e| matches!(e, LoadError::EmptyInput { .. })));
    }

    #[test]
    fn load_is_invariant_to_row_order() {
        let dir = tempfile::tempdir().unwrap();
        let (hh1, exp1) = write_files(
            dir.path(),
            "household_id,weight,size,income_monetary,income_nonmonetary\n2,1,1,20,0\n1,1,1,10,0\n",
            "household_id,item_code,amount_monetary,amount_nonmonetary\n2,b,7,0\n1,a,5,0\n2,a,3,0\n",
        );
        let set1 = load_microdata(&hh1, &exp1, &schedule()).unwrap();

        let dir2 = tempfile::tempdir().unwrap();
        let (hh2, exp2) = write_files(
            dir2.path(),
            "household_id,weight,size,income_monetary,income_nonmonetary\n1,1,1,10,0\n2,1,1,20,0\n",
            "household_id,item_code,amount_monetary,amount_nonmonetary\n1,a,5,0\n2,a,3,0\n2,b,7,0\n",
        );
        let set2 = load_microdata(&hh2, &exp2, &schedule()).unwrap();
        assert_eq!(set1, set2);
    }

    #[test]
    fn write_then_load_round_trips() {
        let s = schedule();
        let set = MicrodataSet::new(vec![
            Household {
                id: HouseholdId(1),
                weight: 1.25,
                size: 3,
                income_monetary: 1234.56,
                income_nonmonetary: 78.9,
                expenditures: vec![Expenditure {
                    item: s.lookup("a").unwrap(),
                    monetary: 10.125,
                    nonmonetary: 0.0,
                }],
            },
            Household {
                id: HouseholdId(2),
                weight: 0.5,
                size: 1,
                income_monetary: 0.0,
                income_nonmonetary: 20.0,
                expenditures: vec![],
            },
        ])
        .unwrap();
        let (mut hh_buf, mut exp_buf) = (Vec::new(), Vec::new());
        write_microdata(&set, &s, &mut hh_buf, &mut exp_buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let hh = dir.path().join("h.csv");
        let exp = dir.path().join("e.csv");
        fs::write(&hh, &hh_buf).unwrap();
        fs::write(&exp, &exp_buf).unwrap();
        let reloaded = load_microdata(&hh, &exp, &s).unwrap();
        assert_eq!(set, reloaded);
    }

    #[test]
    fn set_rejects_duplicates_and_bad_fields() {
        let mk = |id| Household {
            id: HouseholdId(id),
            weight: 1.0,
            size: 1,
            income_monetary: 0.0,
            income_nonmonetary: 0.0,
            expenditures: vec![],
        };
        assert!(matches!(
            MicrodataSet::new(vec![mk(1), mk(1)]),
            Err(MicrodataError::DuplicateHousehold(_))
        ));
        assert!(matches!(MicrodataSet::new(vec![]), Err(MicrodataError::Empty)));
        let mut bad = mk(1);
        bad.weight = 0.0;
        assert!(matches!(
            MicrodataSet::new(vec![bad]),
            Err(MicrodataError::InvalidHousehold { .. })
        ));
    }
}
