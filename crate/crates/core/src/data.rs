//! Feature schemas, instances and CSV-backed datasets.
//!
//! Instances are stored as plain `f64` vectors: numeric features hold their
//! value, categorical features hold the index of their level in the schema's
//! ordered level list.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Level added to a categorical feature when some of its cells are empty.
pub const MISSING_LEVEL: &str = "missing";

const MISSING_TOKENS: [&str; 4] = ["", "NA", "NaN", "?"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row} has {got} fields, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("the file has no data rows")]
    Empty,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("feature `{feature}`: invalid value `{value}`")]
    InvalidValue { feature: String, value: String },
    #[error("instance has {got} values, the schema has {expected} features")]
    ArityMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric { lo: f64, hi: f64 },
    Categorical { levels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numeric(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Numeric { lo, hi },
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    fn check(&self, value: f64) -> bool {
        match &self.kind {
            FeatureKind::Numeric { lo, hi } => value.is_finite() && *lo <= value && value <= *hi,
            FeatureKind::Categorical { levels } => {
                value >= 0.0 && value.fract() == 0.0 && (value as usize) < levels.len()
            }
        }
    }

    /// Encodes a textual cell into the stored representation.
    pub fn encode(&self, raw: &str) -> Result<f64, DataError> {
        let invalid = || DataError::InvalidValue {
            feature: self.name.clone(),
            value: raw.to_string(),
        };
        let value = match &self.kind {
            FeatureKind::Numeric { .. } => raw.trim().parse::<f64>().map_err(|_| invalid())?,
            FeatureKind::Categorical { levels } => {
                levels.iter().position(|l| l == raw.trim()).ok_or_else(invalid)? as f64
            }
        };
        if self.check(value) {
            Ok(value)
        } else {
            Err(invalid())
        }
    }

    /// Renders a stored value back to text.
    pub fn decode(&self, value: f64) -> String {
        match &self.kind {
            FeatureKind::Numeric { .. } => format!("{value}"),
            FeatureKind::Categorical { levels } => levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("{value}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl TryFrom<Vec<Feature>> for FeatureSchema {
    type Error = DataError;

    fn try_from(features: Vec<Feature>) -> Result<Self, DataError> {
        FeatureSchema::new(features)
    }
}

impl From<FeatureSchema> for Vec<Feature> {
    fn from(s: FeatureSchema) -> Self {
        s.features
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self, DataError> {
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(DataError::InvalidSchema(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
            match &f.kind {
                FeatureKind::Numeric { lo, hi } => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(DataError::InvalidSchema(format!(
                            "feature `{}` needs a finite range with lo < hi, got [{lo}, {hi}]",
                            f.name
                        )));
                    }
                }
                FeatureKind::Categorical { levels } => {
                    if levels.is_empty() {
                        return Err(DataError::InvalidSchema(format!(
                            "feature `{}` has no levels",
                            f.name
                        )));
                    }
                    for (k, l) in levels.iter().enumerate() {
                        if levels[..k].contains(l) {
                            return Err(DataError::InvalidSchema(format!(
                                "feature `{}` lists level `{l}` twice",
                                f.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(FeatureSchema { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn validate(&self, values: &[f64]) -> Result<(), DataError> {
        if values.len() != self.len() {
            return Err(DataError::ArityMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        for (f, &v) in self.features.iter().zip(values) {
            if !f.check(v) {
                return Err(DataError::InvalidValue {
                    feature: f.name.clone(),
                    value: f.decode(v),
                });
            }
        }
        Ok(())
    }
}

/// One value per feature, valid for the schema it was built against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(schema: &FeatureSchema, values: Vec<f64>) -> Result<Self, DataError> {
        schema.validate(&values)?;
        Ok(Instance(values))
    }

    /// Cells in schema order, as they would appear in a CSV row.
    pub fn from_strings<S: AsRef<str>>(schema: &FeatureSchema, cells: &[S]) -> Result<Self, DataError> {
        if cells.len() != schema.len() {
            return Err(DataError::ArityMismatch {
                expected: schema.len(),
                got: cells.len(),
            });
        }
        let values = schema
            .features()
            .iter()
            .zip(cells)
            .map(|(f, c)| f.encode(c.as_ref()))
            .collect::<Result<_, _>>()?;
        Ok(Instance(values))
    }

    /// `name=value` pairs; every feature must be given exactly once.
    pub fn from_pairs(schema: &FeatureSchema, pairs: &[(&str, &str)]) -> Result<Self, DataError> {
        let mut cells: Vec<Option<&str>> = vec![None; schema.len()];
        for (name, value) in pairs {
            let i = schema
                .index_of(name)
                .ok_or_else(|| DataError::UnknownColumn(name.to_string()))?;
            cells[i] = Some(value);
        }
        let cells = cells
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| DataError::InvalidValue {
                    feature: schema.feature(i).name.clone(),
                    value: "<missing>".into(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Instance::from_strings(schema, &cells)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `feature=value` pairs for display.
    pub fn describe(&self, schema: &FeatureSchema) -> Vec<(String, String)> {
        schema
            .features()
            .iter()
            .zip(&self.0)
            .map(|(f, &v)| (f.name.clone(), f.decode(v)))
            .collect()
    }
}

/// Optional overrides applied while inferring a schema from CSV.
#[derive(Clone, Debug, Default)]
pub struct SchemaHint {
    /// Label column; `None` loads an unlabelled dataset.
    pub label: Option<String>,
    /// Columns to treat as categorical even when every value parses as a number.
    pub categorical: Vec<String>,
    /// Explicit level orders; levels not listed are appended in order of appearance.
    pub level_order: Vec<(String, Vec<String>)>,
    /// Explicit class order for the label column.
    pub class_order: Option<Vec<String>>,
}

impl SchemaHint {
    pub fn labelled(label: impl Into<String>) -> Self {
        SchemaHint {
            label: Some(label.into()),
            ..SchemaHint::default()
        }
    }

    pub fn with_levels<S: Into<String>>(mut self, column: &str, levels: impl IntoIterator<Item = S>) -> Self {
        self.categorical.push(column.to_string());
        self.level_order
            .push((column.to_string(), levels.into_iter().map(Into::into).collect()));
        self
    }

    pub fn with_classes<S: Into<String>>(mut self, classes: impl IntoIterator<Item = S>) -> Self {
        self.class_order = Some(classes.into_iter().map(Into::into).collect());
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub instances: Vec<Instance>,
    /// Class index per instance; empty for an unlabelled dataset.
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Name of the label column.
    pub label_name: Option<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn is_labelled(&self) -> bool {
        !self.class_names.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            labels: if self.labels.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.labels[i]).collect()
            },
            class_names: self.class_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// Shuffled train/test index split; the first `round(fraction * len)`
    /// shuffled rows train.
    pub fn split_indices(&self, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((train_fraction.clamp(0.0, 1.0) * self.len() as f64).round() as usize)
            .min(self.len());
        let test = idx.split_off(n_train);
        (idx, test)
    }
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.trim())
}

pub fn load_csv(path: impl AsRef<Path>, hint: &SchemaHint) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut text = String::new();
    File::open(path)
        .map_err(io_err)?
        .read_to_string(&mut text)
        .map_err(io_err)?;
    parse_csv(&text, hint)
}

/// Parses CSV text with a header row. Columns whose non-missing cells all
/// parse as numbers become numeric features over their observed range, the
/// rest become categorical.
pub fn parse_csv(text: &str, hint: &SchemaHint) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.iter().all(String::is_empty) {
        return Err(DataError::Empty);
    }
    let width = header.len();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].trim().is_empty() && width > 1 {
            continue;
        }
        if rec.len() != width {
            return Err(DataError::Ragged {
                row: k + 2,
                expected: width,
                got: rec.len(),
            });
        }
        rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
    }

    for name in hint
        .categorical
        .iter()
        .chain(hint.level_order.iter().map(|(n, _)| n))
        .chain(hint.label.iter())
    {
        if !header.contains(name) {
            return Err(DataError::UnknownColumn(name.clone()));
        }
    }
    let label_col = hint
        .label
        .as_ref()
        .and_then(|l| header.iter().position(|h| h == l));

    if let Some(lc) = label_col {
        rows.retain(|r| !is_missing(&r[lc]));
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }

    let mut features = Vec::new();
    let mut columns = Vec::new();
    for (c, name) in header.iter().enumerate() {
        if Some(c) == label_col {
            continue;
        }
        let cells: Vec<&str> = rows.iter().map(|r| r[c].as_str()).collect();
        let forced = hint.categorical.contains(name);
        let parsed: Option<Vec<Option<f64>>> = if forced {
            None
        } else {
            cells
                .iter()
                .map(|c| {
                    if is_missing(c) {
                        Some(None)
                    } else {
                        c.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
                    }
                })
                .collect()
        };
        let feature = match parsed {
            Some(values) if values.iter().any(Option::is_some) => {
                let mut present: Vec<f64> = values.iter().flatten().copied().collect();
                present.sort_by(f64::total_cmp);
                let (mut lo, mut hi) = (present[0], present[present.len() - 1]);
                if lo == hi {
                    lo -= 0.5;
                    hi += 0.5;
                }
                Feature::numeric(name.clone(), lo, hi)
            }
            _ => {
                let mut levels: Vec<String> = hint
                    .level_order
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, l)| l.clone())
                    .unwrap_or_default();
                let mut saw_missing = false;
                for cell in &cells {
                    if is_missing(cell) {
                        saw_missing = true;
                    } else if !levels.iter().any(|l| l == cell) {
                        levels.push(cell.to_string());
                    }
                }
                if saw_missing && !levels.iter().any(|l| l == MISSING_LEVEL) {
                    levels.push(MISSING_LEVEL.to_string());
                }
                Feature::categorical(name.clone(), levels)
            }
        };
        features.push(feature);
        columns.push(c);
    }
    let schema = FeatureSchema::new(features)?;

    // Median of the observed values stands in for missing numeric cells.
    let mut fill: HashMap<usize, String> = HashMap::new();
    for (f, &c) in schema.features().iter().zip(&columns) {
        match &f.kind {
            FeatureKind::Numeric { .. } => {
                let mut present: Vec<f64> = rows
                    .iter()
                    .filter(|r| !is_missing(&r[c]))
                    .filter_map(|r| r[c].parse().ok())
                    .collect();
                present.sort_by(f64::total_cmp);
                let m = present.len();
                let median = if m % 2 == 1 {
                    present[m / 2]
                } else {
                    (present[m / 2 - 1] + present[m / 2]) / 2.0
                };
                fill.insert(c, format!("{median}"));
            }
            FeatureKind::Categorical { .. } => {
                fill.insert(c, MISSING_LEVEL.to_string());
            }
        }
    }

    let mut instances = Vec::with_capacity(rows.len());
    for row in &rows {
        let cells: Vec<&str> = columns
            .iter()
            .map(|&c| if is_missing(&row[c]) { fill[&c].as_str() } else { row[c].as_str() })
            .collect();
        instances.push(Instance::from_strings(&schema, &cells)?);
    }

    let (labels, class_names) = match label_col {
        None => (Vec::new(), Vec::new()),
        Some(lc) => {
            let mut classes = hint.class_order.clone().unwrap_or_default();
            for r in &rows {
                if !classes.contains(&r[lc]) {
                    classes.push(r[lc].clone());
                }
            }
            let labels = rows
                .iter()
                .map(|r| classes.iter().position(|c| *c == r[lc]).unwrap_or_default())
                .collect();
            (labels, classes)
        }
    };

    Ok(Dataset {
        schema,
        instances,
        labels,
        class_names,
        label_name: label_col.map(|c| header[c].clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_numeric_and_categorical() {
        let ds = parse_csv(
            "age,town,y\n3,a,no\n5,b,yes\n4,a,no\n",
            &SchemaHint::labelled("y"),
        )
        .unwrap();
        assert_eq!(ds.schema.len(), 2);
        assert_eq!(ds.schema.feature(0).kind, FeatureKind::Numeric { lo: 3.0, hi: 5.0 });
        assert_eq!(
            ds.schema.feature(1).kind,
            FeatureKind::Categorical {
                levels: vec!["a".into(), "b".into()]
            }
        );
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.class_names, vec!["no", "yes"]);
        assert_eq!(ds.instances[1].values(), &[5.0, 1.0]);
    }

    #[test]
    fn single_row_single_numeric_column() {
        let ds = parse_csv("x\n2.5\n", &SchemaHint::default()).unwrap();
        assert_eq!(ds.schema.len(), 1);
        assert!(!ds.schema.feature(0).is_categorical());
        assert_eq!(ds.len(), 1);
        assert!(!ds.is_labelled());
    }

    #[test]
    fn missing_values_are_handled() {
        let ds = parse_csv(
            "age,port,y\n1,S,a\n,C,b\n3,,a\n9,S,\n",
            &SchemaHint::labelled("y"),
        )
        .unwrap();
        // The row with a missing label is dropped before imputation.
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.instances[1].values()[0], 2.0);
        let port = &ds.schema.feature(1);
        assert_eq!(port.decode(ds.instances[2].values()[1]), MISSING_LEVEL);
    }

    #[test]
    fn hints_force_categorical_and_order() {
        let hint = SchemaHint::labelled("c")
            .with_levels("doors", ["2", "3", "4"])
            .with_classes(["hi", "lo"]);
        let ds = parse_csv("doors,c\n4,lo\n2,lo\n", &hint).unwrap();
        assert!(ds.schema.feature(0).is_categorical());
        assert_eq!(ds.instances[0].values(), &[2.0]);
        assert_eq!(ds.class_names, vec!["hi", "lo"]);
        assert_eq!(ds.labels, vec![1, 1]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_csv("a,b\n1,2\n3\n", &SchemaHint::default()),
            Err(DataError::Ragged { row: 3, .. })
        ));
        assert!(matches!(parse_csv("a,b\n", &SchemaHint::default()), Err(DataError::Empty)));
        assert!(matches!(parse_csv("", &SchemaHint::default()), Err(DataError::Empty)));
        assert!(matches!(
            parse_csv("a\n1\n", &SchemaHint::labelled("z")),
            Err(DataError::UnknownColumn(_))
        ));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &SchemaHint::default()),
            Err(DataError::Io { .. })
        ));
    }

    #[test]
    fn schema_invariants() {
        assert!(FeatureSchema::new(vec![Feature::numeric("a", 1.0, 1.0)]).is_err());
        assert!(FeatureSchema::new(vec![Feature::numeric("a", 0.0, 1.0), Feature::numeric("a", 0.0, 1.0)]).is_err());
        assert!(FeatureSchema::new(vec![Feature::categorical("c", Vec::<String>::new())]).is_err());
        assert!(FeatureSchema::new(vec![Feature::categorical("c", ["x", "x"])]).is_err());
    }

    #[test]
    fn instance_validation() {
        let schema = FeatureSchema::new(vec![
            Feature::numeric("a", 0.0, 1.0),
            Feature::categorical("c", ["x", "y"]),
        ])
        .unwrap();
        assert!(Instance::new(&schema, vec![0.5, 1.0]).is_ok());
        assert!(Instance::new(&schema, vec![1.5, 1.0]).is_err());
        assert!(Instance::new(&schema, vec![0.5, 2.0]).is_err());
        assert!(Instance::new(&schema, vec![0.5]).is_err());
        let x = Instance::from_pairs(&schema, &[("c", "y"), ("a", "0.25")]).unwrap();
        assert_eq!(x.values(), &[0.25, 1.0]);
        assert!(Instance::from_pairs(&schema, &[("a", "0.25")]).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = parse_csv("a\n1\n2\n3\n4\n5\n6\n7\n8\n", &SchemaHint::default()).unwrap();
        let (tr, te) = ds.split_indices(0.75, 7);
        assert_eq!((tr.len(), te.len()), (6, 2));
        assert_eq!(ds.split_indices(0.75, 7), (tr.clone(), te.clone()));
        let mut all: Vec<_> = tr.into_iter().chain(te).collect();
        all.sort();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
    }
}
