use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Dataset, DatasetSchema, FeatureSchema, Instance, SchemaError};

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}, column {column:?}: {value:?} is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("line {line}: one-hot group {group:?} has {active} active columns")]
    OneHot { line: u64, group: String, active: usize },
    #[error("group {group:?} names unknown or reused column {column:?}")]
    GroupColumn { group: String, column: String },
    #[error("line {line}: expected {expected} cells, got {got}")]
    Ragged { line: u64, expected: usize, got: usize },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// A set of 0/1 columns collapsed into one feature holding the active column's index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotGroup {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub groups: Vec<OneHotGroup>,
}

enum Source {
    Column(usize),
    Group(usize, Vec<usize>),
}

pub fn ingest_csv(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Dataset, TableError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(file, options)
}

/// Reads a headed numeric table; features follow column order, with each
/// group placed at its first column.
pub fn ingest_reader(reader: impl Read, options: &IngestOptions) -> Result<Dataset, TableError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut owner: Vec<Option<usize>> = vec![None; headers.len()];
    let mut group_cols = Vec::with_capacity(options.groups.len());
    for (g, group) in options.groups.iter().enumerate() {
        let mut cols = Vec::with_capacity(group.columns.len());
        for name in &group.columns {
            let bad = || TableError::GroupColumn {
                group: group.name.clone(),
                column: name.clone(),
            };
            let c = headers.iter().position(|h| h == name).ok_or_else(bad)?;
            if owner[c].is_some() {
                return Err(bad());
            }
            owner[c] = Some(g);
            cols.push(c);
        }
        group_cols.push(cols);
    }
    let mut sources = Vec::new();
    let mut names = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        match owner[c] {
            None => {
                sources.push(Source::Column(c));
                names.push((h.clone(), None));
            }
            Some(g) if group_cols[g][0] == c => {
                sources.push(Source::Group(g, group_cols[g].clone()));
                names.push((options.groups[g].name.clone(), Some(options.groups[g].name.clone())));
            }
            Some(_) => {}
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(TableError::Ragged {
                line,
                expected: headers.len(),
                got: record.len(),
            });
        }
        let cell = |c: usize| -> Result<f64, TableError> {
            let raw = record[c].trim();
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| TableError::NonNumeric {
                line,
                column: headers[c].clone(),
                value: raw.to_string(),
            })
        };
        let mut row = Vec::with_capacity(sources.len());
        for src in &sources {
            match src {
                Source::Column(c) => row.push(cell(*c)?),
                Source::Group(g, cols) => {
                    let mut active = Vec::new();
                    for (k, &c) in cols.iter().enumerate() {
                        if cell(c)? != 0.0 {
                            active.push(k);
                        }
                    }
                    if active.len() != 1 {
                        return Err(TableError::OneHot {
                            line,
                            group: options.groups[*g].name.clone(),
                            active: active.len(),
                        });
                    }
                    row.push(active[0] as f64);
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(TableError::Empty);
    }

    let features = sources
        .iter()
        .zip(names)
        .enumerate()
        .map(|(j, (src, (name, group)))| {
            let domain: Vec<f64> = match src {
                Source::Group(_, cols) => (0..cols.len()).map(|k| k as f64).collect(),
                Source::Column(_) => {
                    let mut vals: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    vals.sort_by(f64::total_cmp);
                    vals.dedup();
                    vals
                }
            };
            FeatureSchema::new(j, name, domain, group)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let schema = DatasetSchema::new(features)?;
    Ok(Dataset::new(schema, rows.into_iter().map(Instance::new).collect())?)
}

/// Writes one column per feature; values use the shortest exact decimal form.
pub fn write_csv(data: &Dataset, writer: impl Write) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.schema().features().iter().map(|f| f.name.as_str()))?;
    for x in data.instances() {
        w.write_record(x.values().iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|source| TableError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_table() {
        let text = "a,b,c\n3,1,0.5\n1,1,0.25\n2,0,0.5\n3,1,1\n1,0,0\n";
        let d = ingest_reader(text.as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(d.schema().n(), 3);
        assert_eq!(d.m(), 5);
        assert_eq!(d.schema().feature(0).domain(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.schema().feature(2).domain(), &[0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn one_hot_group() {
        let text = "x,c4,c5,c6,y\n1,0,1,0,7\n2,1,0,0,8\n3,0,0,1,9\n";
        let opts = IngestOptions {
            groups: vec![OneHotGroup {
                name: "color".into(),
                columns: vec!["c4".into(), "c5".into(), "c6".into()],
            }],
        };
        let d = ingest_reader(text.as_bytes(), &opts).unwrap();
        assert_eq!(d.schema().n(), 3);
        let g = d.schema().feature(1);
        assert_eq!(g.name, "color");
        assert_eq!(g.domain(), &[0.0, 1.0, 2.0]);
        assert_eq!(d.instances()[0].values(), &[1.0, 1.0, 7.0]);
        let bad = "x,c4,c5,c6,y\n1,1,1,0,7\n";
        assert!(matches!(
            ingest_reader(bad.as_bytes(), &opts),
            Err(TableError::OneHot { line: 2, active: 2, .. })
        ));
    }

    #[test]
    fn non_numeric_cell_position() {
        let text = "a,b\n1,2\n3,abc\n";
        match ingest_reader(text.as_bytes(), &IngestOptions::default()) {
            Err(TableError::NonNumeric { line, column, value }) => {
                assert_eq!((line, column.as_str(), value.as_str()), (3, "b", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = "a,b\n0.1,-2\n1e-7,3.5\n";
        let d = ingest_reader(text.as_bytes(), &IngestOptions::default()).unwrap();
        let mut out = Vec::new();
        write_csv(&d, &mut out).unwrap();
        let back = ingest_reader(out.as_slice(), &IngestOptions::default()).unwrap();
        assert_eq!(back, d);
    }
}
