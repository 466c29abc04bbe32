use std::path::Path;

use crate::{Error, Result};

/// Where the class label sits in each row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelPosition {
    First,
    Last,
    Column(usize),
}

/// Column layout of a delimited text dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub delimiter: char,
    pub label: LabelPosition,
    /// Expected number of features; inferred from the first row when absent.
    pub feature_count: Option<usize>,
    /// Skip the first non-empty line.
    pub has_header: bool,
    /// Min-max scale every feature to `[0, 1]` over the whole file.
    pub normalize: bool,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        DatasetLayout { delimiter: ',', label: LabelPosition::Last, feature_count: None, has_header: false, normalize: true }
    }
}

/// Labeled static dataset held in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Vec<Vec<f64>>,
    labels: Vec<String>,
    classes: Vec<String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
        }
        let n = features[0].len();
        if let Some((i, row)) = features.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Parse { line: i + 1, message: format!("expected {n} features, got {}", row.len()) });
        }
        let mut classes: Vec<String> = Vec::new();
        for label in &labels {
            if label.is_empty() {
                return Err(Error::Parse { line: 0, message: "empty label".into() });
            }
            if !classes.contains(label) {
                classes.push(label.clone());
            }
        }
        Ok(Dataset { name: name.into(), features, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Class names in order of first occurrence in the file.
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Min-max scales every feature to `[0, 1]`; constant features map to 0.
    pub fn normalize_min_max(&mut self) {
        let n = self.feature_dim();
        for j in 0..n {
            let (lo, hi) = self
                .features
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
            let span = hi - lo;
            for row in &mut self.features {
                row[j] = if span > 0.0 { (row[j] - lo) / span } else { 0.0 };
            }
        }
    }
}

/// Parses delimited text under `layout`. Line numbers in errors are 1-based.
pub fn parse_dataset(name: &str, text: &str, layout: &DatasetLayout) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut expected = layout.feature_count.map(|f| f + 1);
    let mut header_pending = layout.has_header;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields: Vec<&str> = line.split(layout.delimiter).map(str::trim).collect();
        let arity = *expected.get_or_insert(fields.len());
        if fields.len() != arity {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {arity} fields, found {}", fields.len()),
            });
        }
        let label_col = match layout.label {
            LabelPosition::First => 0,
            LabelPosition::Last => arity - 1,
            LabelPosition::Column(c) if c < arity => c,
            LabelPosition::Column(c) => {
                return Err(Error::Parse { line: lineno, message: format!("label column {c} out of range") })
            }
        };
        let mut row = Vec::with_capacity(arity - 1);
        for (col, field) in fields.iter().enumerate() {
            if col == label_col {
                continue;
            }
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumeric { line: lineno, column: col + 1, value: field.to_string() })?;
            row.push(v);
        }
        if fields[label_col].is_empty() {
            return Err(Error::Parse { line: lineno, message: "empty label".into() });
        }
        labels.push(fields[label_col].to_string());
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features[0].is_empty() {
        return Err(Error::Parse { line: 1, message: "row has no feature columns".into() });
    }
    let mut ds = Dataset::new(name, features, labels)?;
    if layout.normalize {
        ds.normalize_min_max();
    }
    Ok(ds)
}

/// Reads and parses a dataset file.
pub fn load_dataset(path: impl AsRef<Path>, layout: &DatasetLayout) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_dataset(&name, &text, layout)
}
