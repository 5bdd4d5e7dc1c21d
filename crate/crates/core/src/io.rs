//! CSV input and output for datasets and rosters.
//!
//! Rows are numbered from 1 with the header as row 1, so the first data row
//! is row 2.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{MetaDataset, SampleSizeRoster, StudyTable};

pub const DATASET_COLUMNS: [&str; 5] = ["study_id", "x_control", "n_control", "y_treatment", "m_treatment"];
pub const ROSTER_COLUMNS: [&str; 2] = ["n_control", "m_treatment"];

struct Table {
    /// For every expected column, its position in the file.
    positions: Vec<usize>,
    reader: csv::Reader<Box<dyn Read>>,
}

fn open<R: Read + 'static>(input: R, expected: &[&str]) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(Box::new(input) as Box<dyn Read>);
    let header = reader.headers().map_err(|e| Error::Parse { row: 1, message: e.to_string() })?.clone();
    let positions = expected
        .iter()
        .map(|name| {
            header.iter().position(|h| h.trim_start_matches('\u{feff}') == *name).ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("missing column '{name}' (expected header {})", expected.join(",")),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Table { positions, reader })
}

impl Table {
    /// Data rows as `(row number, fields in expected-column order)`.
    fn rows(&mut self) -> Result<Vec<(usize, Vec<String>)>> {
        let width = self.reader.headers().map(|h| h.len()).unwrap_or(0);
        let mut out = Vec::new();
        for (i, rec) in self.reader.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if rec.len() != width {
                return Err(Error::Parse { row, message: format!("expected {width} fields, found {}", rec.len()) });
            }
            out.push((row, self.positions.iter().map(|&p| rec[p].to_string()).collect()));
        }
        Ok(out)
    }
}

fn count(row: usize, column: &str, value: &str) -> Result<u32> {
    value.parse::<u32>().map_err(|_| Error::Parse {
        row,
        message: format!("column '{column}': '{value}' is not a non-negative integer"),
    })
}

/// Reads a dataset with header `study_id,x_control,n_control,y_treatment,m_treatment`.
/// The result is not yet validated.
pub fn read_dataset<R: Read + 'static>(input: R, label: &str) -> Result<MetaDataset> {
    let mut table = open(input, &DATASET_COLUMNS)?;
    let mut studies = Vec::new();
    let mut ids = Vec::new();
    for (row, f) in table.rows()? {
        let [x, n, y, m] = [1, 2, 3, 4].map(|j| count(row, DATASET_COLUMNS[j], &f[j]));
        let s = StudyTable::new(x?, n?, y?, m?).map_err(|e| Error::Parse {
            row,
            message: match e {
                Error::MalformedCounts { reason, .. } => reason,
                other => other.to_string(),
            },
        })?;
        studies.push(s);
        ids.push(f[0].clone());
    }
    if studies.is_empty() {
        return Err(Error::EmptyDataset);
    }
    MetaDataset::with_ids(label, studies, ids)
}

pub fn read_dataset_path(path: impl AsRef<Path>) -> Result<MetaDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_dataset(file, &label)
}

/// Reads a roster with header `n_control,m_treatment`.
pub fn read_roster<R: Read + 'static>(input: R) -> Result<SampleSizeRoster> {
    let mut table = open(input, &ROSTER_COLUMNS)?;
    let sizes = table
        .rows()?
        .into_iter()
        .map(|(row, f)| {
            let n = count(row, ROSTER_COLUMNS[0], &f[0])?;
            let m = count(row, ROSTER_COLUMNS[1], &f[1])?;
            if n == 0 || m == 0 {
                return Err(Error::Parse { row, message: "arm sizes must be >= 1".into() });
            }
            Ok((n, m))
        })
        .collect::<Result<Vec<_>>>()?;
    SampleSizeRoster::new(sizes)
}

pub fn read_roster_path(path: impl AsRef<Path>) -> Result<SampleSizeRoster> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_roster(file)
}

/// Writes a dataset in the format [`read_dataset`] accepts.
pub fn write_dataset<W: Write>(out: W, d: &MetaDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(DATASET_COLUMNS).map_err(csv_err)?;
    for (s, id) in d.studies().iter().zip(d.ids()) {
        w.write_record([id.clone(), s.x.to_string(), s.n.to_string(), s.y.to_string(), s.m.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &'static str) -> Result<MetaDataset> {
        read_dataset(text.as_bytes(), "t")
    }

    #[test]
    fn reads_dataset() {
        let d =
            parse("study_id,x_control,n_control,y_treatment,m_treatment\ns1,3,100,2,100\ns2, 0 ,600,0,300\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.studies()[1], StudyTable { x: 0, n: 600, y: 0, m: 300 });
        assert_eq!(d.ids(), &["s1".to_string(), "s2".to_string()]);
    }

    #[test]
    fn columns_may_be_reordered() {
        let d = parse("m_treatment,y_treatment,n_control,x_control,study_id\n100,2,100,3,s1\n").unwrap();
        assert_eq!(d.studies()[0], StudyTable { x: 3, n: 100, y: 2, m: 100 });
    }

    #[test]
    fn short_row_names_row_two() {
        let e = parse("study_id,x_control,n_control,y_treatment,m_treatment\na,b,c\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }), "{e}");
        assert!(e.to_string().contains("row 2"));
    }

    #[test]
    fn bad_values_name_their_row() {
        let head = "study_id,x_control,n_control,y_treatment,m_treatment\n";
        let e = read_dataset(std::io::Cursor::new(format!("{head}s1,1,10,1,10\ns2,x,10,1,10\n")), "t");
        assert!(matches!(e, Err(Error::Parse { row: 3, .. })));
        let e = parse("study_id,x_control,n_control,y_treatment,m_treatment\ns1,11,10,1,10\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }), "{e}");
        let e = parse("study_id,x_control,n_control,y_treatment,m_treatment\ns1,-1,10,1,10\n").unwrap_err();
        assert!(matches!(e, Error::Parse { row: 2, .. }));
    }

    #[test]
    fn header_problems() {
        assert!(matches!(parse("id,x,n,y,m\n1,1,1,1,1\n"), Err(Error::Parse { row: 1, .. })));
        assert_eq!(parse("study_id,x_control,n_control,y_treatment,m_treatment\n"), Err(Error::EmptyDataset));
    }

    #[test]
    fn round_trip() {
        let d =
            parse("study_id,x_control,n_control,y_treatment,m_treatment\n\"a, 1\",3,100,2,100\nb,0,5,1,7\n").unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let back = read_dataset(std::io::Cursor::new(buf), "t").unwrap();
        assert_eq!(back.studies(), d.studies());
        assert_eq!(back.ids(), d.ids());
    }

    #[test]
    fn roster() {
        let r = read_roster("n_control,m_treatment\n100,120\n50,50\n".as_bytes()).unwrap();
        assert_eq!(r.sizes(), &[(100, 120), (50, 50)]);
        assert!(matches!(read_roster("n_control,m_treatment\n0,5\n".as_bytes()), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(read_roster("n,m\n1,1\n".as_bytes()), Err(Error::Parse { row: 1, .. })));
    }
}
