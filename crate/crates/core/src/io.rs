//! CSV interchange: samples, weight vectors and replicate tables.
//!
//! Files are UTF-8, comma separated, `.` decimal separator. A leading header
//! row is allowed for samples and is recognised by having no numeric cell.

use std::io::{Read, Write};

use crate::boot::BootstrapReplicate;
use crate::error::{Error, Result};
use crate::kernel::Sample;
use crate::weights::WeightVector;

/// Parses every record as numbers; rows and columns in errors are 1-based
/// and count the header line when present.
pub fn read_numeric_rows<R: Read>(input: R, columns: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    let mut width = columns;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let line = r + 1;
        if r == 0 && !record.is_empty() && record.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::MalformedCsv {
                row: line,
                column: record.len().min(expected) + 1,
                message: format!("expected {expected} columns, got {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::MalformedCsv {
                row: line,
                column: c + 1,
                message: format!("non-numeric cell `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedCsv {
                    row: line,
                    column: c + 1,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// One observation per row, `d` columns.
pub fn read_sample_csv<R: Read>(input: R) -> Result<Sample> {
    let rows = read_numeric_rows(input, None)?;
    let dim = rows
        .first()
        .map(Vec::len)
        .ok_or(Error::Empty("sample file"))?;
    Sample::from_flat(dim, rows.into_iter().flatten().collect())
}

pub fn write_sample_csv<W: Write>(sample: &Sample, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for p in sample.points() {
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weights_csv<'a, W: Write>(
    weights: impl IntoIterator<Item = &'a WeightVector>,
    out: W,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for v in weights {
        w.write_record(v.counts().iter().map(u64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_weights_csv<R: Read>(input: R) -> Result<Vec<WeightVector>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let counts = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<u64>().map_err(|_| Error::MalformedCsv {
                    row: r + 1,
                    column: c + 1,
                    message: format!("not a non-negative integer `{cell}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(WeightVector::from_counts(counts)?);
    }
    Ok(out)
}

pub const REPLICATE_COLUMNS: [&str; 6] =
    ["seed-index", "u_star", "v_star", "q", "pivot_u", "pivot_v"];

/// Replicate table; degenerate pivots are written as empty cells.
pub fn write_replicates_csv<W: Write>(
    rows: impl IntoIterator<Item = (u64, BootstrapReplicate)>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPLICATE_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (idx, r) in rows {
        w.write_record([
            idx.to_string(),
            r.u_star.to_string(),
            r.v_star.to_string(),
            r.q.to_string(),
            opt(r.pivot_u),
            opt(r.pivot_v),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let a = read_sample_csv("x\n1\n2\n3\n".as_bytes()).unwrap();
        let b = read_sample_csv("1\n2\n3\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 3);
        let two = read_sample_csv("a,b\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!((two.n(), two.dim()), (2, 2));
    }

    #[test]
    fn malformed_cells_name_row_and_column() {
        match read_sample_csv("1,2\n3,abc\n".as_bytes()) {
            Err(Error::MalformedCsv { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        match read_sample_csv("1,2\n3\n".as_bytes()) {
            Err(Error::MalformedCsv { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        assert!(read_sample_csv("".as_bytes()).is_err());
        assert!(read_sample_csv("1\nNaN\n".as_bytes()).is_err());
    }

    #[test]
    fn sample_round_trip() {
        let s = Sample::from_flat(2, vec![0.1, -2.5, 1e-300, 7.0]).unwrap();
        let mut buf = Vec::new();
        write_sample_csv(&s, &mut buf).unwrap();
        assert_eq!(read_sample_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn weights_round_trip() {
        let w = vec![
            WeightVector::from_counts(vec![1, 0, 2]).unwrap(),
            WeightVector::from_counts(vec![0, 3, 0]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_weights_csv(&w, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,0,2\n0,3,0\n");
        assert_eq!(read_weights_csv(buf.as_slice()).unwrap(), w);
    }

    #[test]
    fn replicate_table() {
        let r = BootstrapReplicate {
            u_star: 1.5,
            v_star: 2.0,
            q: 0.25,
            pivot_u: Some(0.5),
            pivot_v: None,
            weight_checksum: 4,
        };
        let mut buf = Vec::new();
        write_replicates_csv([(7, r)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "seed-index,u_star,v_star,q,pivot_u,pivot_v\n7,1.5,2,0.25,0.5,\n"
        );
    }
}
