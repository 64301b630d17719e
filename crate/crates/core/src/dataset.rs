//! Columnar causal datasets: typed ingestion, gap repair, lagged outcomes and
//! per-column summary counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{fill_gaps, FillError, FillMethod};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("no records")]
    NoRecords,
    #[error("schema column `{0}` is absent from the header")]
    MissingColumn(String),
    #[error("column `{0}` appears more than once in the header")]
    DuplicateHeader(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: non-numeric token `{token}`")]
    NonNumeric { row: usize, column: String, token: String },
    #[error("row {row}: period token `{token}` is not an integer")]
    BadPeriod { row: usize, token: String },
    #[error("row {row}: treatment token `{token}` is not TRUE/FALSE or 0/1")]
    BadTreatment { row: usize, token: String },
    #[error("row {row}: missing {what}")]
    MissingKeyField { row: usize, what: &'static str },
    #[error("duplicate unit key ({entity}, {period})")]
    DuplicateKey { entity: String, period: i64 },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is not numeric")]
    NotNumeric(String),
    #[error("column `{column}` has {missing} missing value(s)")]
    MissingValues { column: String, missing: usize },
    #[error("column `{0}` already exists")]
    ColumnExists(String),
    #[error("column length {found} does not match dataset length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("entity `{entity}`: periods are not contiguous ({before} then {after})")]
    NonContiguous { entity: String, before: i64, after: i64 },
    #[error("entity `{0}` has a single period; no lag can be formed")]
    SinglePeriod(String),
    #[error("schema lists `{0}` under more than one role")]
    RoleClash(String),
    #[error("entity `{entity}`: {source}")]
    Fill { entity: String, source: FillError },
}

/// Column-name mapping for the five roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub entity: String,
    pub period: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    pub treatment: String,
    pub outcome: String,
}

impl Schema {
    fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = BTreeSet::new();
        let roles = [&self.entity, &self.period, &self.treatment, &self.outcome]
            .into_iter()
            .chain(self.covariates.iter());
        for name in roles {
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::RoleClash(name.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitKey {
    pub entity: String,
    pub period: i64,
}

impl core::fmt::Display for UnitKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} {}", self.entity, self.period)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl ColumnData {
    fn present(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.iter().filter(|x| x.is_some()).count(),
            ColumnData::Text(v) => v.iter().filter(|x| x.is_some()).count(),
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Text(v) => ColumnData::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Entity,
    Period,
    Treatment,
    Data(usize),
}

/// Count of present cells for one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub non_empty_count: usize,
    pub total_count: usize,
}

/// Which fill method a dataset-level repair uses for each entity's series.
pub type GapPolicy = FillMethod;

/// Units × columns, with roles taken from a [`Schema`].
///
/// Covariate and outcome columns may carry missing cells until they are
/// repaired with [`CausalDataset::fill_column`]; estimators ask for complete
/// columns and report any that are not.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDataset {
    schema: Schema,
    keys: Vec<UnitKey>,
    treatment: Vec<bool>,
    columns: Vec<Column>,
    layout: Vec<Slot>,
}

fn is_missing(token: &str) -> bool {
    let t = token.trim();
    t.is_empty() || t == "NA"
}

fn parse_number(token: &str) -> Option<f64> {
    token.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_treatment(token: &str) -> Option<bool> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("true") || t == "1" {
        Some(true)
    } else if t.eq_ignore_ascii_case("false") || t == "0" {
        Some(false)
    } else {
        None
    }
}

impl CausalDataset {
    /// Types tokenized records against `schema`. Rows keep their order; row
    /// numbers in errors are 1-based data rows.
    ///
    /// Columns that play no role are kept: numeric when every present cell
    /// parses as a number, text otherwise.
    pub fn from_records<H: AsRef<str>, S: AsRef<str>>(
        header: &[H],
        rows: &[Vec<S>],
        schema: &Schema,
    ) -> Result<Self, DatasetError> {
        schema.validate()?;
        let header: Vec<&str> = header.iter().map(|h| h.as_ref().trim()).collect();
        for (i, h) in header.iter().enumerate() {
            if header[..i].contains(h) {
                return Err(DatasetError::DuplicateHeader((*h).to_string()));
            }
        }
        let find = |name: &str| {
            header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
        };
        let entity_at = find(&schema.entity)?;
        let period_at = find(&schema.period)?;
        let treatment_at = find(&schema.treatment)?;
        find(&schema.outcome)?;
        for c in &schema.covariates {
            find(c)?;
        }
        if rows.is_empty() {
            return Err(DatasetError::NoRecords);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != header.len() {
                return Err(DatasetError::RaggedRow { row: r + 1, expected: header.len(), found: row.len() });
            }
        }

        let mut keys = Vec::with_capacity(rows.len());
        let mut treatment = Vec::with_capacity(rows.len());
        let mut seen = BTreeSet::new();
        for (r, row) in rows.iter().enumerate() {
            let entity = row[entity_at].as_ref().trim();
            if is_missing(entity) {
                return Err(DatasetError::MissingKeyField { row: r + 1, what: "entity" });
            }
            let ptok = row[period_at].as_ref().trim();
            if is_missing(ptok) {
                return Err(DatasetError::MissingKeyField { row: r + 1, what: "period" });
            }
            let period = ptok
                .parse::<i64>()
                .map_err(|_| DatasetError::BadPeriod { row: r + 1, token: ptok.to_string() })?;
            let ttok = row[treatment_at].as_ref();
            if is_missing(ttok) {
                return Err(DatasetError::MissingKeyField { row: r + 1, what: "treatment" });
            }
            let t = parse_treatment(ttok)
                .ok_or_else(|| DatasetError::BadTreatment { row: r + 1, token: ttok.trim().to_string() })?;
            let key = UnitKey { entity: entity.to_string(), period };
            if !seen.insert(key.clone()) {
                return Err(DatasetError::DuplicateKey { entity: key.entity, period });
            }
            keys.push(key);
            treatment.push(t);
        }

        let mut columns = Vec::new();
        let mut layout = Vec::with_capacity(header.len());
        for (c, name) in header.iter().enumerate() {
            if c == entity_at {
                layout.push(Slot::Entity);
                continue;
            }
            if c == period_at {
                layout.push(Slot::Period);
                continue;
            }
            if c == treatment_at {
                layout.push(Slot::Treatment);
                continue;
            }
            let role_numeric = *name == schema.outcome || schema.covariates.iter().any(|n| n == name);
            let parsed: Result<Vec<Option<f64>>, DatasetError> = rows
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    let tok = row[c].as_ref();
                    if is_missing(tok) {
                        Ok(None)
                    } else {
                        parse_number(tok).map(Some).ok_or_else(|| DatasetError::NonNumeric {
                            row: r + 1,
                            column: (*name).to_string(),
                            token: tok.trim().to_string(),
                        })
                    }
                })
                .collect();
            let data = match parsed {
                Ok(values) => ColumnData::Numeric(values),
                Err(e) if role_numeric => return Err(e),
                Err(_) => ColumnData::Text(
                    rows.iter()
                        .map(|row| {
                            let tok = row[c].as_ref();
                            (!is_missing(tok)).then(|| tok.trim().to_string())
                        })
                        .collect(),
                ),
            };
            layout.push(Slot::Data(columns.len()));
            columns.push(Column { name: (*name).to_string(), data });
        }

        Ok(Self { schema: schema.clone(), keys, treatment, columns, layout })
    }

    /// Builds a complete dataset from in-memory arrays. Unit keys are
    /// `("u", 0..n)`; the schema uses entity `unit`, period `index`,
    /// treatment `T` and outcome `Y`.
    pub fn from_arrays(
        covariates: &[(&str, Vec<f64>)],
        treatment: Vec<bool>,
        outcome: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        let n = treatment.len();
        if n == 0 {
            return Err(DatasetError::NoRecords);
        }
        if outcome.len() != n {
            return Err(DatasetError::LengthMismatch { expected: n, found: outcome.len() });
        }
        let schema = Schema {
            entity: "unit".into(),
            period: "index".into(),
            covariates: covariates.iter().map(|(n, _)| (*n).to_string()).collect(),
            treatment: "T".into(),
            outcome: "Y".into(),
        };
        schema.validate()?;
        let mut columns = Vec::new();
        let mut layout = alloc::vec![Slot::Entity, Slot::Period];
        for (name, values) in covariates {
            if values.len() != n {
                return Err(DatasetError::LengthMismatch { expected: n, found: values.len() });
            }
            layout.push(Slot::Data(columns.len()));
            columns.push(Column {
                name: (*name).to_string(),
                data: ColumnData::Numeric(values.iter().map(|&v| Some(v)).collect()),
            });
        }
        layout.push(Slot::Treatment);
        layout.push(Slot::Data(columns.len()));
        columns.push(Column { name: "Y".into(), data: ColumnData::Numeric(outcome.into_iter().map(Some).collect()) });
        let keys = (0..n as i64).map(|i| UnitKey { entity: "u".into(), period: i }).collect();
        Ok(Self { schema, keys, treatment, columns, layout })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn keys(&self) -> &[UnitKey] {
        &self.keys
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    pub fn treated_count(&self) -> usize {
        self.treatment.iter().filter(|&&t| t).count()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Header names in file order.
    pub fn header(&self) -> Vec<&str> {
        self.layout
            .iter()
            .map(|s| match s {
                Slot::Entity => self.schema.entity.as_str(),
                Slot::Period => self.schema.period.as_str(),
                Slot::Treatment => self.schema.treatment.as_str(),
                Slot::Data(i) => self.columns[*i].name.as_str(),
            })
            .collect()
    }

    /// A complete numeric column, or an error naming what is wrong with it.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>, DatasetError> {
        if name == self.schema.period {
            return Ok(self.keys.iter().map(|k| k.period as f64).collect());
        }
        if name == self.schema.treatment {
            return Ok(self.treatment.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect());
        }
        let col = self.column(name).ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?;
        match &col.data {
            ColumnData::Numeric(v) => {
                let missing = v.iter().filter(|x| x.is_none()).count();
                if missing > 0 {
                    return Err(DatasetError::MissingValues { column: name.to_string(), missing });
                }
                Ok(v.iter().map(|x| x.unwrap_or_default()).collect())
            }
            ColumnData::Text(_) => Err(DatasetError::NotNumeric(name.to_string())),
        }
    }

    pub fn outcome(&self) -> Result<Vec<f64>, DatasetError> {
        self.numeric(&self.schema.outcome)
    }

    /// Complete covariate columns, one `Vec` per name.
    pub fn covariate_columns(&self, names: &[String]) -> Result<Vec<Vec<f64>>, DatasetError> {
        names.iter().map(|n| self.numeric(n)).collect()
    }

    /// Cell values of any column rendered as group labels.
    pub fn labels(&self, name: &str) -> Result<Vec<Option<String>>, DatasetError> {
        if name == self.schema.entity {
            return Ok(self.keys.iter().map(|k| Some(k.entity.clone())).collect());
        }
        if name == self.schema.period {
            return Ok(self.keys.iter().map(|k| Some(format!("{}", k.period))).collect());
        }
        if name == self.schema.treatment {
            return Ok(self.treatment.iter().map(|&t| Some(format!("{}", u8::from(t)))).collect());
        }
        let col = self.column(name).ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?;
        Ok(match &col.data {
            ColumnData::Numeric(v) => v.iter().map(|x| x.map(|x| format!("{x}"))).collect(),
            ColumnData::Text(v) => v.clone(),
        })
    }

    /// Same units with the treatment column replaced.
    pub fn with_treatment(&self, treatment: Vec<bool>) -> Result<Self, DatasetError> {
        if treatment.len() != self.len() {
            return Err(DatasetError::LengthMismatch { expected: self.len(), found: treatment.len() });
        }
        let mut out = self.clone();
        out.treatment = treatment;
        Ok(out)
    }

    /// Same units with a numeric column replaced (or appended when new).
    pub fn with_numeric_column(&self, name: &str, values: Vec<Option<f64>>) -> Result<Self, DatasetError> {
        if values.len() != self.len() {
            return Err(DatasetError::LengthMismatch { expected: self.len(), found: values.len() });
        }
        if [&self.schema.entity, &self.schema.period, &self.schema.treatment].contains(&&name.to_string()) {
            return Err(DatasetError::ColumnExists(name.to_string()));
        }
        let mut out = self.clone();
        match out.columns.iter_mut().find(|c| c.name == name) {
            Some(c) => c.data = ColumnData::Numeric(values),
            None => {
                out.layout.push(Slot::Data(out.columns.len()));
                out.columns.push(Column { name: name.to_string(), data: ColumnData::Numeric(values) });
            }
        }
        Ok(out)
    }

    /// Keeps the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            keys: rows.iter().map(|&r| self.keys[r].clone()).collect(),
            treatment: rows.iter().map(|&r| self.treatment[r]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column { name: c.name.clone(), data: c.data.select(rows) })
                .collect(),
            layout: self.layout.clone(),
        }
    }

    /// Adds names to the covariate role (they must be numeric columns).
    pub fn with_covariates(&self, extra: &[String]) -> Result<Self, DatasetError> {
        let mut out = self.clone();
        for name in extra {
            match self.column(name) {
                Some(Column { data: ColumnData::Numeric(_), .. }) => {}
                Some(_) => return Err(DatasetError::NotNumeric(name.clone())),
                None => return Err(DatasetError::UnknownColumn(name.clone())),
            }
            if !out.schema.covariates.contains(name) {
                out.schema.covariates.push(name.clone());
            }
        }
        out.schema.validate()?;
        Ok(out)
    }

    /// Row indices grouped by entity, each group sorted by period.
    fn rows_by_entity(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, k) in self.keys.iter().enumerate() {
            groups.entry(k.entity.as_str()).or_default().push(i);
        }
        for rows in groups.values_mut() {
            rows.sort_by_key(|&r| self.keys[r].period);
        }
        groups
    }

    /// Repairs missing cells of a numeric column entity by entity.
    pub fn fill_column(&self, name: &str, method: GapPolicy) -> Result<Self, DatasetError> {
        let col = self.column(name).ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))?;
        let ColumnData::Numeric(values) = &col.data else {
            return Err(DatasetError::NotNumeric(name.to_string()));
        };
        let mut filled = values.clone();
        for (entity, rows) in self.rows_by_entity() {
            let series: Vec<(f64, Option<f64>)> =
                rows.iter().map(|&r| (self.keys[r].period as f64, values[r])).collect();
            let done = fill_gaps(&series, method)
                .map_err(|source| DatasetError::Fill { entity: entity.to_string(), source })?;
            for (&r, v) in rows.iter().zip(done) {
                filled[r] = Some(v);
            }
        }
        self.with_numeric_column(name, filled)
    }

    /// Adds `pre_name` (outcome at t−1) and `post_name` (outcome at t+1)
    /// columns, makes `post_name` the outcome, and drops units lacking either
    /// neighbour. The original outcome column is retained.
    pub fn derive_lagged_outcome(&self, pre_name: &str, post_name: &str) -> Result<Self, DatasetError> {
        for name in [pre_name, post_name] {
            if self.header().contains(&name) {
                return Err(DatasetError::ColumnExists(name.to_string()));
            }
        }
        let outcome = self.outcome()?;
        let mut pre = alloc::vec![None; self.len()];
        let mut post = alloc::vec![None; self.len()];
        for (entity, rows) in self.rows_by_entity() {
            if rows.len() == 1 {
                return Err(DatasetError::SinglePeriod(entity.to_string()));
            }
            for w in rows.windows(2) {
                let (a, b) = (self.keys[w[0]].period, self.keys[w[1]].period);
                if b != a + 1 {
                    return Err(DatasetError::NonContiguous { entity: entity.to_string(), before: a, after: b });
                }
            }
            for w in rows.windows(3) {
                pre[w[1]] = Some(outcome[w[0]]);
                post[w[1]] = Some(outcome[w[2]]);
            }
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&r| pre[r].is_some()).collect();
        if keep.is_empty() {
            return Err(DatasetError::NoRecords);
        }
        let mut out = self
            .with_numeric_column(pre_name, pre)?
            .with_numeric_column(post_name, post)?
            .select_rows(&keep);
        out.schema.outcome = post_name.to_string();
        out.schema.validate()?;
        Ok(out)
    }

    /// One entry per header column, counting present (parseable) cells.
    pub fn summary_stats(&self) -> Vec<ColumnSummary> {
        let n = self.len();
        self.layout
            .iter()
            .map(|slot| {
                let (name, present) = match slot {
                    Slot::Entity => (self.schema.entity.clone(), n),
                    Slot::Period => (self.schema.period.clone(), n),
                    Slot::Treatment => (self.schema.treatment.clone(), n),
                    Slot::Data(i) => (self.columns[*i].name.clone(), self.columns[*i].data.present()),
                };
                ColumnSummary { name, non_empty_count: present, total_count: n }
            })
            .collect()
    }

    /// Header and string cells, suitable for writing back out as CSV.
    /// Numbers use the shortest round-trip decimal form; missing cells are empty.
    pub fn to_records(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = self.header().into_iter().map(String::from).collect();
        let rows = (0..self.len())
            .map(|r| {
                self.layout
                    .iter()
                    .map(|slot| match slot {
                        Slot::Entity => self.keys[r].entity.clone(),
                        Slot::Period => format!("{}", self.keys[r].period),
                        Slot::Treatment => String::from(if self.treatment[r] { "TRUE" } else { "FALSE" }),
                        Slot::Data(i) => match &self.columns[*i].data {
                            ColumnData::Numeric(v) => v[r].map(|x| format!("{x}")).unwrap_or_default(),
                            ColumnData::Text(v) => v[r].clone().unwrap_or_default(),
                        },
                    })
                    .collect()
            })
            .collect();
        (header, rows)
    }
}

/// Two-column fixed-width table: feature name, number of non-empty records.
pub fn render_summary(summaries: &[ColumnSummary]) -> String {
    const LEFT: &str = "Feature name";
    const RIGHT: &str = "Number of non-empty records";
    let width = summaries.iter().map(|s| s.name.chars().count()).chain([LEFT.len()]).max().unwrap_or(0) + 4;
    let mut out = String::new();
    let _ = writeln!(out, "{LEFT:<width$}{RIGHT}");
    for s in summaries {
        let _ = writeln!(out, "{:<width$}{}", s.name, s.non_empty_count);
    }
    if let Some(s) = summaries.first() {
        let _ = writeln!(out, "Total records: {}", s.total_count);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn schema() -> Schema {
        Schema {
            entity: "State".into(),
            period: "Year".into(),
            covariates: vec!["Funds".into()],
            treatment: "Treatment".into(),
            outcome: "Users".into(),
        }
    }

    fn rows(data: &[&[&str]]) -> Vec<Vec<String>> {
        data.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
    }

    const HEADER: [&str; 5] = ["State", "Year", "Funds", "Treatment", "Users"];

    #[test]
    fn table_row_parses_scientific_notation() {
        let header = ["State", "Year", "Funds", "Population_density", "Treatment", "Pre_users", "Post_users"];
        let s = Schema {
            entity: "State".into(),
            period: "Year".into(),
            covariates: vec!["Funds".into(), "Population_density".into()],
            treatment: "Treatment".into(),
            outcome: "Post_users".into(),
        };
        let ds = CausalDataset::from_records(
            &header,
            &rows(&[&["Alabama", "2013", "24296", "95.370708", "FALSE", "3.03E+06", "2.96E+06"]]),
            &s,
        )
        .unwrap();
        assert_eq!(ds.keys()[0], UnitKey { entity: "Alabama".into(), period: 2013 });
        assert_eq!(ds.numeric("Funds").unwrap(), vec![24296.0]);
        assert_eq!(ds.numeric("Population_density").unwrap(), vec![95.370708]);
        assert_eq!(ds.treatment(), &[false]);
        assert_eq!(ds.numeric("Pre_users").unwrap(), vec![3.03e6]);
        assert_eq!(ds.outcome().unwrap(), vec![2.96e6]);
    }

    #[test]
    fn empty_body_is_no_records() {
        let err = CausalDataset::from_records::<String, String>(
            &HEADER.map(String::from),
            &[],
            &schema(),
        )
        .unwrap_err();
        assert_eq!(err, DatasetError::NoRecords);
        assert_eq!(err.to_string(), "no records");
    }

    #[test]
    fn load_errors() {
        let s = schema();
        let bad = rows(&[&["A", "2013", "x1", "TRUE", "1"]]);
        assert!(matches!(CausalDataset::from_records(&HEADER, &bad, &s), Err(DatasetError::NonNumeric { .. })));
        let dup = rows(&[&["A", "2013", "1", "TRUE", "1"], &["A", "2013", "2", "FALSE", "1"]]);
        assert!(matches!(
            CausalDataset::from_records(&HEADER, &dup, &s),
            Err(DatasetError::DuplicateKey { period: 2013, .. })
        ));
        let no_col = ["State", "Year", "Treatment", "Users"];
        assert_eq!(
            CausalDataset::from_records(&no_col, &rows(&[&["A", "1", "0", "1"]]), &s),
            Err(DatasetError::MissingColumn("Funds".into()))
        );
        let tok = rows(&[&["A", "2013", "1", "yes", "1"]]);
        assert!(matches!(CausalDataset::from_records(&HEADER, &tok, &s), Err(DatasetError::BadTreatment { .. })));
    }

    #[test]
    fn missing_cells_stay_missing() {
        let r = rows(&[&["A", "2013", "", "1", "NA"], &["A", "2014", "5", "0", "3"]]);
        let ds = CausalDataset::from_records(&HEADER, &r, &schema()).unwrap();
        assert_eq!(ds.numeric("Users"), Err(DatasetError::MissingValues { column: "Users".into(), missing: 1 }));
        let counts: Vec<usize> = ds.summary_stats().iter().map(|s| s.non_empty_count).collect();
        assert_eq!(counts, vec![2, 2, 1, 2, 1]);
    }

    #[test]
    fn all_missing_column_counts_zero() {
        let r = rows(&[&["A", "2013", "", "1", "1"], &["B", "2013", "NA", "0", "3"]]);
        let ds = CausalDataset::from_records(&HEADER, &r, &schema()).unwrap();
        let funds = ds.summary_stats().into_iter().find(|s| s.name == "Funds").unwrap();
        assert_eq!((funds.non_empty_count, funds.total_count), (0, 2));
    }

    #[test]
    fn lagged_outcome_definition() {
        let r = rows(&[
            &["A", "2012", "1", "0", "10"],
            &["A", "2013", "1", "1", "20"],
            &["A", "2014", "1", "0", "30"],
        ]);
        let ds = CausalDataset::from_records(&HEADER, &r, &schema()).unwrap();
        let lagged = ds.derive_lagged_outcome("Pre", "Post").unwrap();
        assert_eq!(lagged.len(), 1);
        assert_eq!(lagged.keys()[0].period, 2013);
        assert_eq!(lagged.numeric("Pre").unwrap(), vec![10.0]);
        assert_eq!(lagged.outcome().unwrap(), vec![30.0]);
        assert_eq!(lagged.schema().outcome, "Post");
        assert_eq!(lagged.numeric("Users").unwrap(), vec![20.0]);
    }

    #[test]
    fn lag_errors() {
        let gap = rows(&[&["A", "2012", "1", "0", "1"], &["A", "2014", "1", "1", "2"]]);
        let ds = CausalDataset::from_records(&HEADER, &gap, &schema()).unwrap();
        assert!(matches!(ds.derive_lagged_outcome("p", "q"), Err(DatasetError::NonContiguous { .. })));
        let single = rows(&[&["A", "2012", "1", "0", "1"], &["B", "2012", "1", "1", "2"], &["B", "2013", "1", "1", "2"]]);
        let ds = CausalDataset::from_records(&HEADER, &single, &schema()).unwrap();
        assert_eq!(ds.derive_lagged_outcome("p", "q"), Err(DatasetError::SinglePeriod("A".into())));
    }

    #[test]
    fn fill_column_per_entity() {
        let r = rows(&[
            &["A", "2012", "1", "0", "0"],
            &["B", "2016", "1", "0", "7"],
            &["A", "2013", "1", "1", ""],
            &["A", "2014", "1", "0", "2"],
            &["B", "2017", "1", "0", ""],
        ]);
        let ds = CausalDataset::from_records(&HEADER, &r, &schema()).unwrap();
        let filled = ds.fill_column("Users", GapPolicy::CubicPad).unwrap();
        assert_eq!(filled.outcome().unwrap(), vec![0.0, 7.0, 1.0, 2.0, 7.0]);
        assert!(matches!(ds.fill_column("Users", GapPolicy::Cubic), Err(DatasetError::Fill { .. })));
    }

    #[test]
    fn summary_table_layout() {
        let s = [
            ColumnSummary { name: "State".into(), non_empty_count: 400, total_count: 400 },
            ColumnSummary { name: "Funds".into(), non_empty_count: 300, total_count: 400 },
            ColumnSummary { name: "Internet users".into(), non_empty_count: 250, total_count: 400 },
        ];
        let text = render_summary(&s);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Feature name      Number of non-empty records");
        assert_eq!(lines[1], "State             400");
        assert_eq!(lines[2], "Funds             300");
        assert_eq!(lines[3], "Internet users    250");
    }

    #[test]
    fn role_clash_rejected() {
        let mut s = schema();
        s.covariates.push("Users".into());
        assert_eq!(
            CausalDataset::from_records(&HEADER, &rows(&[&["A", "1", "1", "1", "1"]]), &s),
            Err(DatasetError::RoleClash("Users".into()))
        );
    }
}
