//! Biomarker CSV ingestion.
//!
//! The first record is a header: its first cell labels the image-name column
//! (the text is ignored) and every other cell names a region. Each following
//! record is one output image. Rows and columns in diagnostics are 1-based
//! CSV record/field positions, so the header is row 1.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::{Atlas, AtlasError};
use crate::diag::Diagnostic;
use crate::gradient::Gradient;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("empty CSV document")]
    Empty,
    #[error("CSV has no region columns")]
    NoRegions,
    #[error("row {row}: {message}")]
    Syntax { row: usize, message: String },
    #[error("column {column}: {source}")]
    UnresolvedHeader {
        column: usize,
        #[source]
        source: AtlasError,
    },
    #[error("columns {first} and {column} both resolve to region '{region}'")]
    DuplicateRegion {
        column: usize,
        first: usize,
        region: String,
    },
    #[error("row {row}, column {column}: '{text}' is not a number")]
    NonNumeric { row: usize, column: usize, text: String },
    #[error("row {row}, column {column}: value '{text}' is not finite")]
    NonFinite { row: usize, column: usize, text: String },
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}: empty image name")]
    EmptyImageName { row: usize },
    #[error("row {row}: duplicate image name '{name}' (first seen at row {first})")]
    DuplicateImage { row: usize, first: usize, name: String },
}

impl IngestError {
    pub fn to_diagnostic(&self) -> Diagnostic {
        let (code, row, column) = match self {
            IngestError::Empty => ("empty_csv", None, None),
            IngestError::NoRegions => ("no_regions", Some(1), None),
            IngestError::Syntax { row, .. } => ("csv_syntax", Some(*row), None),
            IngestError::UnresolvedHeader { column, .. } => ("unresolved_region", Some(1), Some(*column)),
            IngestError::DuplicateRegion { column, .. } => ("duplicate_region", Some(1), Some(*column)),
            IngestError::NonNumeric { row, column, .. } => ("non_numeric", Some(*row), Some(*column)),
            IngestError::NonFinite { row, column, .. } => ("non_finite", Some(*row), Some(*column)),
            IngestError::RaggedRow { row, .. } => ("ragged_row", Some(*row), None),
            IngestError::EmptyImageName { row } => ("empty_image_name", Some(*row), Some(1)),
            IngestError::DuplicateImage { row, .. } => ("duplicate_image", Some(*row), Some(1)),
        };
        let mut d = Diagnostic::error(code, self.to_string()).at(row, column);
        d.suggestions = self.suggestions().to_vec();
        d
    }

    /// Region-name suggestions carried by an unresolved header, if any.
    pub fn suggestions(&self) -> &[String] {
        match self {
            IngestError::UnresolvedHeader {
                source: AtlasError::Unresolved { suggestions, .. },
                ..
            } => suggestions,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub image_name: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionValueTable {
    pub id_header: String,
    /// Canonical region names in CSV column order.
    pub region_order: Vec<String>,
    pub rows: Vec<TableRow>,
    /// Atlas regions absent from the CSV; they read as 0.
    pub missing: Vec<String>,
}

impl RegionValueTable {
    /// Value of `region` in `row`, with absent regions defaulting to 0.
    pub fn value(&self, row: usize, region: &str) -> f64 {
        self.rows[row].values.get(region).copied().unwrap_or(0.0)
    }

    /// Serializes back to CSV using canonical region names as headers.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec![self.id_header.clone()];
        header.extend(self.region_order.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.image_name.clone()];
            rec.extend(self.region_order.iter().map(|r| format!("{}", row.values[r])));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

fn parse_value(text: &str, row: usize, column: usize) -> Result<f64, IngestError> {
    // Rust's float grammar is locale-free; reject the spellings it accepts
    // for non-finite values so they surface as their own error.
    let v: f64 = text.parse().map_err(|_| IngestError::NonNumeric {
        row,
        column,
        text: text.to_string(),
    })?;
    if !v.is_finite() {
        return Err(IngestError::NonFinite {
            row,
            column,
            text: text.to_string(),
        });
    }
    Ok(v)
}

pub fn parse_biomarker_csv(text: &str, atlas: &Atlas) -> Result<(RegionValueTable, Vec<Diagnostic>), IngestError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim().is_empty() {
        return Err(IngestError::Empty);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(IngestError::Syntax {
                row: 1,
                message: e.to_string(),
            })
        }
        None => return Err(IngestError::Empty),
    };
    if header.len() < 2 {
        return Err(IngestError::NoRegions);
    }

    let mut region_order = Vec::with_capacity(header.len() - 1);
    let mut seen_columns: BTreeMap<String, usize> = BTreeMap::new();
    for (i, cell) in header.iter().enumerate().skip(1) {
        let column = i + 1;
        let region = atlas
            .resolve_region(cell)
            .map_err(|source| IngestError::UnresolvedHeader { column, source })?;
        let name = region.canonical_name.clone();
        if let Some(&first) = seen_columns.get(&name) {
            return Err(IngestError::DuplicateRegion {
                column,
                first,
                region: name,
            });
        }
        seen_columns.insert(name.clone(), column);
        region_order.push(name);
    }

    let mut rows = Vec::new();
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, rec) in records.enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| IngestError::Syntax {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(IngestError::RaggedRow {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let image_name = rec[0].to_string();
        if image_name.is_empty() {
            return Err(IngestError::EmptyImageName { row });
        }
        if let Some(&first) = names.get(&image_name) {
            return Err(IngestError::DuplicateImage {
                row,
                first,
                name: image_name,
            });
        }
        names.insert(image_name.clone(), row);
        let mut values = BTreeMap::new();
        for (i, region) in region_order.iter().enumerate() {
            let column = i + 2;
            values.insert(region.clone(), parse_value(&rec[i + 1], row, column)?);
        }
        rows.push(TableRow { image_name, values });
    }

    let present: HashSet<&str> = region_order.iter().map(String::as_str).collect();
    let missing: Vec<String> = atlas
        .regions
        .iter()
        .filter(|r| !present.contains(r.canonical_name.as_str()))
        .map(|r| r.canonical_name.clone())
        .collect();
    let warnings = missing
        .iter()
        .map(|r| {
            Diagnostic::warning(
                "missing_region",
                format!("region '{r}' not in CSV; rendered with value 0"),
            )
        })
        .collect();

    Ok((
        RegionValueTable {
            id_header: header[0].to_string(),
            region_order,
            rows,
            missing,
        },
        warnings,
    ))
}

/// One warning per (row, region) value outside the gradient's `[0, K]` range.
pub fn check_range(table: &RegionValueTable, g: &Gradient) -> Vec<Diagnostic> {
    let k = g.max_value() as f64;
    let mut out = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        for (c, region) in table.region_order.iter().enumerate() {
            let v = row.values[region];
            if !(0.0..=k).contains(&v) {
                out.push(
                    Diagnostic::warning(
                        "value_out_of_range",
                        format!(
                            "'{}' {region} = {v} outside gradient range [0, {k}]; clamped",
                            row.image_name
                        ),
                    )
                    .at(Some(r + 2), Some(c + 2)),
                );
            }
        }
    }
    out
}
