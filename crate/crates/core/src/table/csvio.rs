use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cell, Column, ColumnKind, Dataset, Task};
use crate::error::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: [&str; 5] = ["", "NA", "NaN", "?", "null"];

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Explicit column kinds by name; unlisted columns are inferred.
    pub schema_hint: HashMap<String, ColumnKind>,
    pub label: Option<String>,
    /// Inferred from the label column kind when `None`.
    pub task: Option<Task>,
    pub missing_tokens: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            schema_hint: HashMap::new(),
            label: None,
            task: None,
            missing_tokens: DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LoadOptions {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_task(mut self, task: Task) -> Self {
        self.task = Some(task);
        self
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn read_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() {
        return Err(Error::Parse {
            row: 1,
            message: "empty header".into(),
        });
    }
    for name in opts.schema_hint.keys() {
        if !header.contains(name) {
            return Err(Error::Config(format!("schema hint names unknown column '{name}'")));
        }
    }

    let mut raw: Vec<Vec<Option<String>>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(raw.len() + 2, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        raw.push(
            record
                .iter()
                .map(|v| {
                    if opts.missing_tokens.iter().any(|t| t == v) {
                        None
                    } else {
                        Some(v.to_string())
                    }
                })
                .collect(),
        );
    }

    let label = match &opts.label {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("unknown label column '{name}'")))?,
        ),
        None => None,
    };
    if label.is_none() && matches!(opts.task, Some(Task::Classification | Task::Regression)) {
        return Err(Error::Config("a supervised task needs a label column".into()));
    }

    let mut kinds = Vec::with_capacity(header.len());
    for (c, name) in header.iter().enumerate() {
        let kind = if let Some(kind) = opts.schema_hint.get(name) {
            *kind
        } else if label == Some(c) && opts.task == Some(Task::Classification) {
            ColumnKind::Categorical
        } else if raw
            .iter()
            .filter_map(|r| r[c].as_deref())
            .all(|v| parse_number(v).is_some())
        {
            ColumnKind::Numeric
        } else {
            ColumnKind::Categorical
        };
        kinds.push(kind);
    }

    let task = match (label, opts.task) {
        (None, _) => Task::None,
        (Some(_), Some(Task::None)) => {
            return Err(Error::Config("label column given with task none".into()))
        }
        (Some(_), Some(t)) => t,
        (Some(l), None) => match kinds[l] {
            ColumnKind::Categorical => Task::Classification,
            ColumnKind::Numeric => Task::Regression,
        },
    };

    let mut rows = Vec::with_capacity(raw.len());
    for (r, raw_row) in raw.into_iter().enumerate() {
        let mut row = Vec::with_capacity(raw_row.len());
        for (c, v) in raw_row.into_iter().enumerate() {
            row.push(match (v, kinds[c]) {
                (None, _) => Cell::Missing,
                (Some(v), ColumnKind::Categorical) => Cell::Text(v),
                (Some(v), ColumnKind::Numeric) => match parse_number(&v) {
                    Some(x) => Cell::Number(x),
                    None => {
                        return Err(Error::Parse {
                            row: r + 2,
                            message: format!(
                                "value '{v}' in numeric column '{}' is not a finite number",
                                header[c]
                            ),
                        })
                    }
                },
            });
        }
        rows.push(row);
    }

    let columns = header
        .into_iter()
        .zip(kinds)
        .map(|(name, kind)| Column { name, kind })
        .collect();
    Dataset::new(columns, rows, label, task)
}

/// Writes the table as RFC 4180 CSV with a header row; missing cells are empty fields.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Io {
        path: "<csv writer>".into(),
        source: std::io::Error::other(e),
    };
    w.write_record(ds.columns().iter().map(|c| c.name.as_str()))
        .map_err(to_err)?;
    for row in ds.rows() {
        w.write_record(row.iter().map(|c| c.to_string()))
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_csv_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        read_csv(s.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn infers_numeric_and_categorical() {
        let ds = parse("a,b\n1,x\n2,y").unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.column(0).kind, ColumnKind::Numeric);
        assert_eq!(ds.column(1).kind, ColumnKind::Categorical);
        assert_eq!(ds.row(1), &[Cell::Number(2.0), Cell::text("y")]);
    }

    #[test]
    fn mixed_content_is_categorical() {
        let ds = parse("a\n1\nfoo").unwrap();
        assert_eq!(ds.column(0).kind, ColumnKind::Categorical);
        assert_eq!(ds.row(0)[0], Cell::text("1"));
    }

    #[test]
    fn missing_tokens_become_missing() {
        let text = "a,b\n?,x\nNA,\n3,null\nNaN,ok";
        let ds = parse(text).unwrap();
        let tokens = &DEFAULT_MISSING_TOKENS;
        for (r, line) in text.lines().skip(1).enumerate() {
            for (c, v) in line.split(',').enumerate() {
                assert_eq!(ds.row(r)[c].is_missing(), tokens.contains(&v), "{r},{c}");
            }
        }
        assert_eq!(ds.column(0).kind, ColumnKind::Numeric);
    }

    #[test]
    fn ragged_row_reports_line() {
        match parse("a,b\n1,2\n3\n") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_config_error() {
        let opts = LoadOptions::default().with_label("nope");
        assert!(matches!(
            read_csv("a\n1".as_bytes(), &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn label_task_inference() {
        let ds = read_csv("x,y\n1,0\n2,1".as_bytes(), &LoadOptions::default().with_label("y"))
            .unwrap();
        assert_eq!(ds.task(), Task::Regression);
        let opts = LoadOptions::default()
            .with_label("y")
            .with_task(Task::Classification);
        let ds = read_csv("x,y\n1,0\n2,1".as_bytes(), &opts).unwrap();
        assert_eq!(ds.task(), Task::Classification);
        assert_eq!(ds.column(1).kind, ColumnKind::Categorical);
        assert_eq!(ds.label_of(1).as_deref(), Some("1"));
    }

    #[test]
    fn hint_forces_kind_and_rejects_bad_numbers() {
        let mut opts = LoadOptions::default();
        opts.schema_hint.insert("a".into(), ColumnKind::Categorical);
        let ds = read_csv("a\n1\n2".as_bytes(), &opts).unwrap();
        assert_eq!(ds.column(0).kind, ColumnKind::Categorical);

        let mut opts = LoadOptions::default();
        opts.schema_hint.insert("a".into(), ColumnKind::Numeric);
        assert!(matches!(
            read_csv("a\n1\nx".as_bytes(), &opts),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    #[test]
    fn write_then_read_is_stable() {
        let text = "a,b\n1.5,\"x, y\"\n,z\n";
        let ds = parse(text).unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        let again = read_csv(out.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(ds, again);
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
