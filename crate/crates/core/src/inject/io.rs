use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ErrorMask, ErrorType};
use crate::error::{Error, Result};
use crate::table::{Cell, CellRef, ColumnKind, Dataset};

/// Writes `row,col,error_type,original_value`.
pub fn write_mask<W: Write>(mask: &ErrorMask, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::io("<mask>", std::io::Error::other(e));
    w.write_record(["row", "col", "error_type", "original_value"])
        .map_err(wrap)?;
    for (at, (ty, original)) in &mask.entries {
        w.write_record([
            at.row.to_string(),
            at.col.to_string(),
            ty.code().to_string(),
            original.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<mask>", e))
}

pub fn write_mask_file(mask: &ErrorMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_mask(mask, std::io::BufWriter::new(file))
}

/// Reads a mask, typing each original value by its column in `ds`.
pub fn read_mask<R: Read>(reader: R, ds: &Dataset) -> Result<ErrorMask> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut mask = ErrorMask::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let parse_err = |message: String| Error::Parse { row: line, message };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", rec.len())));
        }
        let index = |k: usize| {
            rec[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad index '{}': {e}", &rec[k])))
        };
        let at = CellRef::new(index(0)?, index(1)?);
        if at.col >= ds.n_cols() {
            return Err(parse_err(format!("column {} out of range", at.col)));
        }
        let ty: ErrorType = rec[2].parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let raw = &rec[3];
        let original = if raw.is_empty() {
            Cell::Missing
        } else {
            match ds.column(at.col).kind {
                ColumnKind::Numeric => Cell::Number(
                    raw.parse()
                        .map_err(|e| parse_err(format!("bad number '{raw}': {e}")))?,
                ),
                ColumnKind::Categorical => Cell::Text(raw.to_string()),
            }
        };
        mask.entries.insert(at, (ty, original));
    }
    Ok(mask)
}

pub fn read_mask_file(path: impl AsRef<Path>, ds: &Dataset) -> Result<ErrorMask> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_mask(std::io::BufReader::new(file), ds)
}
