use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DetectionSet;
use crate::error::{Error, Result};
use crate::table::CellRef;

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRecord {
    detector_id: String,
    row: usize,
    col: usize,
}

/// Writes sets as CSV with columns `detector_id,row,col`.
pub fn write_detections<'a, W: Write>(
    sets: impl IntoIterator<Item = &'a DetectionSet>,
    writer: W,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let wrap = |e: csv::Error| Error::io("<detections>", std::io::Error::other(e));
    w.write_record(["detector_id", "row", "col"]).map_err(wrap)?;
    for set in sets {
        for cell in &set.cells {
            w.serialize(DetectionRecord {
                detector_id: set.detector_id.clone(),
                row: cell.row,
                col: cell.col,
            })
            .map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| Error::io("<detections>", e))
}

pub fn write_detections_file<'a>(
    sets: impl IntoIterator<Item = &'a DetectionSet>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_detections(sets, std::io::BufWriter::new(file))
}

/// Reads the CSV format of [`write_detections`], one set per detector id in
/// order of first appearance.
pub fn read_detections<R: Read>(reader: R) -> Result<Vec<DetectionSet>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut sets: Vec<DetectionSet> = Vec::new();
    for (i, rec) in rdr.deserialize::<DetectionRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i + 2,
            message: e.to_string(),
        })?;
        let cell = CellRef::new(rec.row, rec.col);
        match sets.iter_mut().find(|s| s.detector_id == rec.detector_id) {
            Some(set) => {
                set.cells.insert(cell);
            }
            None => sets.push(DetectionSet::from_cells(rec.detector_id, [cell])),
        }
    }
    Ok(sets)
}

pub fn read_detections_file(path: impl AsRef<Path>) -> Result<Vec<DetectionSet>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_detections(file)
}
