use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::DiscreteMeasure;
use crate::error::{Error, Result};

/// Reads a measure from CSV with header `w,x1,...,xd`; without a `w` column weights are uniform.
/// Lines starting with `#` are ignored.
pub fn read_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    read_measure_from(File::open(path)?)
}

pub fn read_measure_from<R: Read>(reader: R) -> Result<DiscreteMeasure> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let weight_col = headers.iter().position(|h| h.eq_ignore_ascii_case("w"));
    let dim = headers.len() - usize::from(weight_col.is_some());
    if dim == 0 {
        return Err(Error::Parse(
            "measure file has no coordinate columns".into(),
        ));
    }

    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields, header has {}",
                line + 1,
                record.len(),
                headers.len()
            )));
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("row {}: `{field}` is not a number", line + 1))
            })?;
            if Some(k) == weight_col {
                weights.push(v);
            } else {
                coords.push(v);
            }
        }
    }
    let n = coords.len() / dim;
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    if weight_col.is_none() {
        weights = vec![1.0 / n as f64; n];
    }
    DiscreteMeasure::new(dim, coords, weights)
}

pub fn write_measure(path: impl AsRef<Path>, m: &DiscreteMeasure) -> Result<()> {
    write_measure_to(File::create(path)?, m)
}

/// Values are written in shortest round-trip form, so reading back is lossless.
pub fn write_measure_to<W: Write>(writer: W, m: &DiscreteMeasure) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["w".to_string()];
    header.extend((1..=m.dim()).map(|k| format!("x{k}")));
    wtr.write_record(&header)?;
    for (atom, w) in m.atoms().zip(m.weights()) {
        let mut row = vec![w.to_string()];
        row.extend(atom.iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
