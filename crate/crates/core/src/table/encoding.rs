use std::collections::BTreeSet;
use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Cell, CellRef, ColumnKind, Dataset, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldEncoding {
    /// Min-max scaled scalar.
    Numeric { min: f64, max: f64 },
    /// One-hot block over a sorted vocabulary.
    Categorical { vocab: Vec<String> },
}

impl FieldEncoding {
    pub fn width(&self) -> usize {
        match self {
            FieldEncoding::Numeric { .. } => 1,
            FieldEncoding::Categorical { vocab } => vocab.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedField {
    pub column: usize,
    pub offset: usize,
    pub encoding: FieldEncoding,
}

impl EncodedField {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.encoding.width()
    }
}

/// Maps table rows to fixed-width real vectors and back.
///
/// Feature columns come first in column order, the label block (if any) last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    n_cols: usize,
    features: Vec<EncodedField>,
    label: Option<EncodedField>,
    encoded_width: usize,
}

fn field_for(ds: &Dataset, col: usize) -> Result<FieldEncoding> {
    let column = ds.column(col);
    match column.kind {
        ColumnKind::Numeric => {
            let values = ds.numeric_values(col);
            if values.is_empty() {
                return Err(Error::Schema(format!(
                    "column '{}' is entirely missing",
                    column.name
                )));
            }
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(FieldEncoding::Numeric { min, max })
        }
        ColumnKind::Categorical => {
            let vocab: BTreeSet<&str> = ds.rows().iter().filter_map(|r| r[col].as_text()).collect();
            if vocab.is_empty() {
                return Err(Error::Schema(format!(
                    "column '{}' is entirely missing",
                    column.name
                )));
            }
            Ok(FieldEncoding::Categorical {
                vocab: vocab.into_iter().map(str::to_string).collect(),
            })
        }
    }
}

pub fn build_encoding(ds: &Dataset) -> Result<EncodingSchema> {
    if ds.is_empty() {
        return Err(Error::Schema("cannot build an encoding from an empty table".into()));
    }
    let mut offset = 0;
    let mut features = Vec::new();
    for col in ds.feature_cols() {
        let encoding = field_for(ds, col)?;
        let width = encoding.width();
        features.push(EncodedField {
            column: col,
            offset,
            encoding,
        });
        offset += width;
    }
    let label = match ds.label_col() {
        Some(col) => {
            let encoding = field_for(ds, col)?;
            debug_assert!(match ds.task() {
                Task::Classification => matches!(encoding, FieldEncoding::Categorical { .. }),
                _ => true,
            });
            let field = EncodedField {
                column: col,
                offset,
                encoding,
            };
            offset += field.encoding.width();
            Some(field)
        }
        None => None,
    };
    Ok(EncodingSchema {
        n_cols: ds.n_cols(),
        features,
        label,
        encoded_width: offset,
    })
}

fn encode_cell(field: &EncodedField, cell: &Cell, out: &mut [f64]) {
    match (&field.encoding, cell) {
        (FieldEncoding::Numeric { min, max }, Cell::Number(x)) => {
            out[field.offset] = if max > min {
                ((x - min) / (max - min)).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        (FieldEncoding::Categorical { vocab }, Cell::Text(s)) => {
            // unseen categories encode as an all-zero block
            if let Ok(i) = vocab.binary_search(s) {
                out[field.offset + i] = 1.0;
            }
        }
        _ => unreachable!("cell kind checked by Dataset invariants"),
    }
}

fn decode_field(field: &EncodedField, v: &[f64]) -> Cell {
    match &field.encoding {
        FieldEncoding::Numeric { min, max } => {
            let t = v[field.offset].clamp(0.0, 1.0);
            // Clamp again: min + 1.0 * (max - min) can round past max.
            Cell::Number(if max > min { (min + t * (max - min)).clamp(*min, *max) } else { *min })
        }
        FieldEncoding::Categorical { vocab } => {
            let block = &v[field.range()];
            let mut best = 0;
            for (i, &x) in block.iter().enumerate() {
                if x > block[best] {
                    best = i;
                }
            }
            Cell::Text(vocab[best].clone())
        }
    }
}

impl EncodingSchema {
    pub fn encoded_width(&self) -> usize {
        self.encoded_width
    }

    /// Width of the feature part, i.e. everything before the label block.
    pub fn feature_width(&self) -> usize {
        self.label.as_ref().map_or(self.encoded_width, |l| l.offset)
    }

    pub fn features(&self) -> &[EncodedField] {
        &self.features
    }

    pub fn label(&self) -> Option<&EncodedField> {
        self.label.as_ref()
    }

    pub fn label_range(&self) -> Option<Range<usize>> {
        self.label.as_ref().map(EncodedField::range)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn fields(&self) -> impl Iterator<Item = &EncodedField> {
        self.features.iter().chain(self.label.iter())
    }

    /// Adds label categories missing from the vocabulary, keeping it sorted.
    pub fn extend_label_vocab<'a>(&mut self, extra: impl IntoIterator<Item = &'a String>) {
        let Some(label) = &mut self.label else { return };
        let FieldEncoding::Categorical { vocab } = &mut label.encoding else {
            return;
        };
        let mut all: BTreeSet<String> = vocab.iter().cloned().collect();
        all.extend(extra.into_iter().cloned());
        let grown = all.len() - vocab.len();
        *vocab = all.into_iter().collect();
        self.encoded_width += grown;
    }

    /// Encodes the given rows; any missing cell among them is an error.
    pub fn encode_rows(&self, ds: &Dataset, rows: &[usize]) -> Result<Array2<f64>> {
        if ds.n_cols() != self.n_cols {
            return Err(Error::Shape {
                expected: self.n_cols,
                got: ds.n_cols(),
            });
        }
        let mut out = Array2::zeros((rows.len(), self.encoded_width));
        for (i, &r) in rows.iter().enumerate() {
            let dst = out.row_mut(i).into_slice().expect("standard layout");
            for field in self.fields() {
                let cell = &ds.row(r)[field.column];
                if cell.is_missing() {
                    return Err(Error::Encode {
                        cell: CellRef::new(r, field.column),
                    });
                }
                encode_cell(field, cell, dst);
            }
        }
        Ok(out)
    }

    pub fn encode_all(&self, ds: &Dataset) -> Result<Array2<f64>> {
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        self.encode_rows(ds, &rows)
    }

    /// Inverse of [`encode_rows`](Self::encode_rows) for one vector.
    pub fn decode_row(&self, v: &[f64]) -> Result<Vec<Cell>> {
        if v.len() != self.encoded_width {
            return Err(Error::Shape {
                expected: self.encoded_width,
                got: v.len(),
            });
        }
        let mut row = vec![Cell::Missing; self.n_cols];
        for field in self.fields() {
            row[field.column] = decode_field(field, v);
        }
        Ok(row)
    }

    /// Decodes a label block (or the scalar regression target) to its cell value.
    pub fn decode_label(&self, block: &[f64]) -> Option<Cell> {
        let label = self.label.as_ref()?;
        let shifted = EncodedField {
            column: label.column,
            offset: 0,
            encoding: label.encoding.clone(),
        };
        Some(decode_field(&shifted, block))
    }
}
