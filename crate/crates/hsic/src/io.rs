//! CSV serialization of samples with full round-trip precision.
//!
//! Layout: header `x1..xp,y1..yq`, one observation per row, values written
//! with 17 significant digits so that reading back reproduces every f64 bit
//! for bit.

use crate::error::{Error, Result};
use crate::kernel::Sample;

/// Writes a sample as CSV with an `x1..xp,y1..yq` header.
pub fn write_sample_csv<W: std::io::Write>(s: &Sample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=s.p()).map(|i| format!("x{i}")).collect();
    header.extend((1..=s.q()).map(|i| format!("y{i}")));
    w.write_record(&header)
        .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?;
    for i in 0..s.n() {
        let mut record: Vec<String> = Vec::with_capacity(s.p() + s.q());
        record.extend(s.x_row(i).iter().map(|v| format!("{v:.16e}")));
        record.extend(s.y_row(i).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&record)
            .map_err(|e| Error::Csv { row: i + 1, message: e.to_string() })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample from CSV written by [`write_sample_csv`] (or any CSV with
/// the same header convention). Parse failures report the 1-based data row.
pub fn read_sample_csv<R: std::io::Read>(input: R) -> Result<Sample> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r
        .headers()
        .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?
        .clone();
    let mut p = 0usize;
    let mut q = 0usize;
    for h in headers.iter() {
        if h.starts_with('x') && q == 0 {
            p += 1;
        } else if h.starts_with('y') {
            q += 1;
        } else {
            return Err(Error::Csv {
                row: 0,
                message: format!("unexpected column {h:?}: x columns must precede y columns"),
            });
        }
    }
    if p == 0 || q == 0 {
        return Err(Error::Csv {
            row: 0,
            message: "header must contain at least one x and one y column".into(),
        });
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv { row, message: e.to_string() })?;
        if record.len() != p + q {
            return Err(Error::Csv {
                row,
                message: format!("expected {} fields, got {}", p + q, record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Csv {
                row,
                message: format!("field {:?} is not a number", field),
            })?;
            if j < p {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    Sample::new(x, y, p, q)
}

/// Writes a sample to a file path.
pub fn write_sample_file(s: &Sample, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_sample_csv(s, std::io::BufWriter::new(f))
}

/// Reads a sample from a file path.
pub fn read_sample_file(path: &std::path::Path) -> Result<Sample> {
    let f = std::fs::File::open(path)?;
    read_sample_csv(std::io::BufReader::new(f))
}
