//! Loading, cleaning, splitting and scaling of the 14-column Cleveland
//! heart-disease table.
//!
//! Column order is fixed everywhere: the 13 predictors in [`FEATURE_NAMES`]
//! followed by the diagnosis code `num`. Missing values are written `?`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

pub const N_FEATURES: usize = 13;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang", "oldpeak",
    "slope", "ca", "thal",
];

pub const LABEL_NAME: &str = "num";
pub const ID_NAME: &str = "id";
pub const MISSING_TOKEN: &str = "?";

pub const DEFAULT_SPLIT_SEED: u64 = 42;
pub const DEFAULT_TRAIN_COUNT: usize = 236;

const RAW_NUM_CODES: [u8; 5] = [0, 1, 2, 3, 4];

/// Allowed integer codes of a categorical feature, `None` for continuous ones.
pub fn allowed_codes(feature: usize) -> Option<&'static [u8]> {
    match FEATURE_NAMES.get(feature).copied()? {
        "sex" | "fbs" | "exang" => Some(&[0, 1]),
        "cp" => Some(&[1, 2, 3, 4]),
        "restecg" => Some(&[0, 1, 2]),
        "slope" => Some(&[1, 2, 3]),
        "ca" => Some(&[0, 1, 2, 3]),
        "thal" => Some(&[3, 6, 7]),
        _ => None,
    }
}

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES
        .iter()
        .position(|f| f.eq_ignore_ascii_case(name.trim()))
}

/// Why a single feature value was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureIssue {
    NotFinite,
    Negative,
    OutsideSet(&'static [u8]),
}

impl fmt::Display for FeatureIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureIssue::NotFinite => f.write_str("value must be a finite number"),
            FeatureIssue::Negative => f.write_str("value must be non-negative"),
            FeatureIssue::OutsideSet(set) => write!(f, "value must be one of {set:?}"),
        }
    }
}

pub fn check_feature(feature: usize, value: f64) -> std::result::Result<(), FeatureIssue> {
    if !value.is_finite() {
        return Err(FeatureIssue::NotFinite);
    }
    match allowed_codes(feature) {
        Some(set) => {
            if set.iter().any(|&c| f64::from(c) == value) {
                Ok(())
            } else {
                Err(FeatureIssue::OutsideSet(set))
            }
        }
        None if value < 0.0 => Err(FeatureIssue::Negative),
        None => Ok(()),
    }
}

/// Collapses the 0-4 diagnosis code to absent (0) / present (1).
pub fn binarize(raw_num: u8) -> u8 {
    u8::from(raw_num > 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: Option<String>,
    pub age: f64,
    pub sex: u8,
    pub cp: u8,
    pub trestbps: f64,
    pub chol: f64,
    pub fbs: u8,
    pub restecg: u8,
    pub thalach: f64,
    pub exang: u8,
    pub oldpeak: f64,
    pub slope: u8,
    pub ca: u8,
    pub thal: u8,
    pub raw_num: Option<u8>,
}

impl PatientRecord {
    /// Validates every feature and builds a record. On failure returns the
    /// offending feature index with the reason.
    pub fn from_features(
        values: &[f64; N_FEATURES],
        patient_id: Option<String>,
        raw_num: Option<u8>,
    ) -> std::result::Result<Self, (usize, FeatureIssue)> {
        for (i, &v) in values.iter().enumerate() {
            check_feature(i, v).map_err(|e| (i, e))?;
        }
        let code = |i: usize| values[i] as u8;
        Ok(Self {
            patient_id,
            age: values[0],
            sex: code(1),
            cp: code(2),
            trestbps: values[3],
            chol: values[4],
            fbs: code(5),
            restecg: code(6),
            thalach: values[7],
            exang: code(8),
            oldpeak: values[9],
            slope: code(10),
            ca: code(11),
            thal: code(12),
            raw_num,
        })
    }

    pub fn features(&self) -> [f64; N_FEATURES] {
        [
            self.age,
            f64::from(self.sex),
            f64::from(self.cp),
            self.trestbps,
            self.chol,
            f64::from(self.fbs),
            f64::from(self.restecg),
            self.thalach,
            f64::from(self.exang),
            self.oldpeak,
            f64::from(self.slope),
            f64::from(self.ca),
            f64::from(self.thal),
        ]
    }

    pub fn label(&self) -> Option<u8> {
        self.raw_num.map(binarize)
    }
}

/// Result of [`load_and_clean`].
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub records: Vec<PatientRecord>,
    /// Rows removed because they contained a `?`.
    pub dropped: usize,
    /// Data rows in the file, header excluded.
    pub raw_rows: usize,
}

pub fn load_and_clean(path: impl AsRef<Path>) -> Result<LoadedData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text)
}

fn is_header_token(token: &str) -> bool {
    token.parse::<f64>().is_err() && token.chars().any(|c| c.is_alphabetic())
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Parses labelled training data. See [`load_and_clean`].
pub fn parse_dataset(text: &str) -> Result<LoadedData> {
    let mut rows = Vec::new();
    for rec in csv_reader(text).records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }

    let mut has_id = false;
    let mut body = &rows[..];
    if let Some((line, first)) = rows.first() {
        if first.iter().any(is_header_token) {
            has_id = match first.len() {
                14 => false,
                15 => true,
                found => {
                    return Err(Error::ColumnCount {
                        row: *line,
                        expected: "14 or 15".into(),
                        found,
                    })
                }
            };
            let names: Vec<&str> = first.iter().skip(usize::from(has_id)).collect();
            for (expected, got) in FEATURE_NAMES.iter().zip(&names) {
                if !expected.eq_ignore_ascii_case(got) {
                    return Err(Error::InvalidRow {
                        row: *line,
                        message: format!("header column `{got}` where `{expected}` was expected"),
                    });
                }
            }
            body = &rows[1..];
        }
    }

    let width = N_FEATURES + 1 + usize::from(has_id);
    let mut records = Vec::with_capacity(body.len());
    let mut dropped = 0;
    for (line, rec) in body {
        let row = *line;
        if rec.len() != width {
            return Err(Error::ColumnCount {
                row,
                expected: width.to_string(),
                found: rec.len(),
            });
        }
        if rec.iter().any(|t| t == MISSING_TOKEN) {
            dropped += 1;
            continue;
        }
        let mut fields = rec.iter();
        let patient_id = if has_id {
            fields.next().map(str::to_owned)
        } else {
            None
        };
        let mut values = [0.0; N_FEATURES];
        for (i, tok) in fields.by_ref().take(N_FEATURES).enumerate() {
            values[i] = parse_number(row, FEATURE_NAMES[i], tok)?;
        }
        let num_token = fields.next().unwrap_or_default();
        let num = parse_number(row, LABEL_NAME, num_token)?;
        let raw_num = RAW_NUM_CODES
            .iter()
            .copied()
            .find(|&c| f64::from(c) == num)
            .ok_or_else(|| Error::InvalidCode {
                row,
                field: LABEL_NAME.into(),
                value: num,
                allowed: RAW_NUM_CODES.to_vec(),
            })?;
        let record = PatientRecord::from_features(&values, patient_id, Some(raw_num)).map_err(
            |(i, issue)| match issue {
                FeatureIssue::OutsideSet(set) => Error::InvalidCode {
                    row,
                    field: FEATURE_NAMES[i].into(),
                    value: values[i],
                    allowed: set.to_vec(),
                },
                other => Error::InvalidRow {
                    row,
                    message: format!("{}: {other}", FEATURE_NAMES[i]),
                },
            },
        )?;
        records.push(record);
    }

    Ok(LoadedData {
        records,
        dropped,
        raw_rows: body.len(),
    })
}

fn parse_number(row: usize, column: &str, token: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::NotNumeric {
        row,
        column: column.into(),
        token: token.into(),
    })
}

/// Writes records back out in the loader's format (header row, `id` column
/// only when at least one record carries an id).
pub fn records_to_csv(records: &[PatientRecord]) -> String {
    let with_id = records.iter().any(|r| r.patient_id.is_some());
    let mut out = String::new();
    if with_id {
        out.push_str(ID_NAME);
        out.push(',');
    }
    out.push_str(&FEATURE_NAMES.join(","));
    out.push(',');
    out.push_str(LABEL_NAME);
    out.push('\n');
    for r in records {
        if with_id {
            out.push_str(r.patient_id.as_deref().unwrap_or(""));
            out.push(',');
        }
        let values: Vec<String> = r.features().iter().map(|v| v.to_string()).collect();
        out.push_str(&values.join(","));
        out.push(',');
        match r.raw_num {
            Some(n) => out.push_str(&n.to_string()),
            None => out.push_str(MISSING_TOKEN),
        }
        out.push('\n');
    }
    out
}

/// Stacks the features of labelled records. Fails if any label is absent.
pub fn to_xy(records: &[PatientRecord]) -> Result<(Matrix, Vec<u8>)> {
    let rows: Vec<[f64; N_FEATURES]> = records.iter().map(PatientRecord::features).collect();
    let labels = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.label()
                .ok_or_else(|| Error::invalid(format!("record {i} has no diagnosis")))
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok((Matrix::from_rows(&rows)?, labels))
}

#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub x_train: Matrix,
    pub y_train: Vec<u8>,
    pub x_test: Matrix,
    pub y_test: Vec<u8>,
    /// Original record index of each training row.
    pub train_index: Vec<usize>,
    /// Original record index of each test row.
    pub test_index: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle of the record indices; the first `train_count` go to train.
pub fn split_train_test(
    records: &[PatientRecord],
    seed: u64,
    train_count: usize,
) -> Result<SplitDataset> {
    let n = records.len();
    if train_count == 0 || train_count >= n {
        return Err(Error::invalid(format!(
            "train_count must lie in 1..{n}, got {train_count}"
        )));
    }
    let (x, y) = to_xy(records)?;
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let (train, test) = order.split_at(train_count);
    Ok(SplitDataset {
        x_train: x.select_rows(train),
        y_train: train.iter().map(|&i| y[i]).collect(),
        x_test: x.select_rows(test),
        y_test: test.iter().map(|&i| y[i]).collect(),
        train_index: train.to_vec(),
        test_index: test.to_vec(),
        seed,
    })
}

/// Per-column affine map onto `[0, 1]` fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let mut mins = x.row(0).to_vec();
        let mut maxs = mins.clone();
        for row in x.rows().skip(1) {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    /// No clipping: values outside the fitted range map outside `[0, 1]`.
    /// A constant column (max = min) maps to 0.
    pub fn transform_value(&self, j: usize, v: f64) -> f64 {
        let span = self.maxs[j] - self.mins[j];
        if span == 0.0 {
            0.0
        } else {
            (v - self.mins[j]) / span
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| self.transform_value(j, v))
            .collect())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        x.expect_cols(self.n_features())?;
        let mut out = x.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = self.transform_value(j, *v);
            }
        }
        Ok(out)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.mins.len() != self.maxs.len() {
            return Err("scaler mins and maxs differ in length".into());
        }
        for (j, (lo, hi)) in self.mins.iter().zip(&self.maxs).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(format!("scaler column {j} has invalid range [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

pub fn fit_minmax(x_train: &Matrix) -> Result<MinMaxScaler> {
    MinMaxScaler::fit(x_train)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    MissingValues,
    InvalidValue,
}

/// One row of an unlabelled upload.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRow {
    pub patient_id: String,
    pub status: RowStatus,
    /// Present only when `status` is `Ok`.
    pub features: Option<[f64; N_FEATURES]>,
    pub detail: Option<String>,
}

/// Parses a headed CSV of patients to diagnose. Columns are matched by name;
/// an `id` column is carried through, otherwise ids `1..=n` are assigned;
/// a `num` column is ignored. Rows with `?` (or an empty cell) are marked
/// [`RowStatus::MissingValues`] instead of being dropped.
pub fn parse_inference_csv(text: &str) -> Result<Vec<InferenceRow>> {
    let mut reader = csv_reader(text);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyInput),
    };
    if !header.iter().any(is_header_token) {
        return Err(Error::invalid("the first row must be a header naming the columns"));
    }

    let mut positions = [usize::MAX; N_FEATURES];
    let mut id_col = None;
    for (col, name) in header.iter().enumerate() {
        if name.eq_ignore_ascii_case(ID_NAME) {
            id_col = Some(col);
        } else if let Some(f) = feature_index(name) {
            positions[f] = col;
        }
    }
    let missing: Vec<String> = positions
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == usize::MAX)
        .map(|(f, _)| FEATURE_NAMES[f].to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }

    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let patient_id = match id_col {
            Some(c) => rec.get(c).unwrap_or_default().to_string(),
            None => (i + 1).to_string(),
        };
        out.push(classify_row(patient_id, |f| rec.get(positions[f])));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

fn classify_row<'a>(patient_id: String, cell: impl Fn(usize) -> Option<&'a str>) -> InferenceRow {
    let mut values = [0.0; N_FEATURES];
    let mut missing = Vec::new();
    let mut invalid = Vec::new();
    for (f, v) in values.iter_mut().enumerate() {
        match cell(f) {
            None | Some("") | Some(MISSING_TOKEN) => missing.push(FEATURE_NAMES[f]),
            Some(tok) => match tok.parse::<f64>() {
                Ok(x) => match check_feature(f, x) {
                    Ok(()) => *v = x,
                    Err(issue) => invalid.push(format!("{}: {issue}", FEATURE_NAMES[f])),
                },
                Err(_) => invalid.push(format!("{}: `{tok}` is not a number", FEATURE_NAMES[f])),
            },
        }
    }
    if !missing.is_empty() {
        InferenceRow {
            patient_id,
            status: RowStatus::MissingValues,
            features: None,
            detail: Some(format!("missing: {}", missing.join(", "))),
        }
    } else if !invalid.is_empty() {
        InferenceRow {
            patient_id,
            status: RowStatus::InvalidValue,
            features: None,
            detail: Some(invalid.join("; ")),
        }
    } else {
        InferenceRow {
            patient_id,
            status: RowStatus::Ok,
            features: Some(values),
            detail: None,
        }
    }
}
