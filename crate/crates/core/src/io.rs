//! Dataset files: CSV with a header naming the columns `x`, `y` and `z`.
//! Lines starting with `#` are comments and may carry units.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::smoothing::SpatialDataset;

const COLUMNS: [&str; 3] = ["x", "y", "z"];

/// Reads a dataset; columns are matched by name, in any order, and extra
/// columns are ignored.
pub fn read_dataset<R: Read>(input: R) -> Result<SpatialDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers().map_err(parse_err)?.clone();
    let header_line = rdr.position().line();
    let mut index = [0usize; 3];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                line: header_line,
                message: format!("missing column '{name}' in header"),
            })?;
    }
    let mut locations = Vec::new();
    let mut responses = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(parse_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = [0.0; 3];
        for (v, (&i, name)) in values.iter_mut().zip(index.iter().zip(COLUMNS)) {
            let cell = record.get(i).unwrap_or("");
            *v = cell.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("column '{name}': '{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column '{name}': non-finite value '{cell}'"),
                });
            }
        }
        locations.extend_from_slice(&values[..2]);
        responses.push(values[2]);
    }
    SpatialDataset::new(2, locations, responses)
}

pub fn read_dataset_file(path: &Path) -> Result<SpatialDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(file))
}

/// Writes `x,y,z` rows; values use the shortest representation that reads
/// back to the same `f64`.
pub fn write_dataset<W: Write>(data: &SpatialDataset, out: W) -> Result<()> {
    if data.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: data.dim(),
        });
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(COLUMNS).map_err(io_err)?;
    for (x, z) in data.locations().chunks(2).zip(data.responses()) {
        wtr.write_record([format_float(x[0]), format_float(x[1]), format_float(*z)]).map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_dataset_file(data: &SpatialDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_dataset(data, std::io::BufWriter::new(file))
}

/// Shortest round-trip text of `v`, switching to exponent notation for very
/// small or large magnitudes.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn parse_err(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# units: miles, miles, feet\nx,y,z\n0,0,1\n1,0,2\n0,1,3\n1,1,4.5\n";

    #[test]
    fn reads_with_comments() {
        let d = read_dataset(SAMPLE.as_bytes()).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.location(3), &[1.0, 1.0]);
        assert_eq!(d.responses()[3], 4.5);
    }

    #[test]
    fn columns_by_name() {
        let d = read_dataset("z,id,y,x\n5,a,1,2\n6,b,3,4\n7,c,0,0\n8,d,1,1\n".as_bytes()).unwrap();
        assert_eq!(d.location(0), &[2.0, 1.0]);
        assert_eq!(d.responses(), &[5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn bad_cell_names_line() {
        let err = read_dataset("x,y,z\n0,0,1\n1,0,2\n0,1,abc\n1,1,1\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_dataset("x,y,z\n0,0,NaN\n1,0,1\n0,1,1\n1,1,1\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_dataset("x,y\n0,0\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let d = SpatialDataset::new(2, vec![0.1, 1.0 / 3.0, 2.0_f64.sqrt(), 1e-300, 0.5, 0.25, 7.0, 8.0], vec![std::f64::consts::PI, -0.0, 1e22, 0.3]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), d);
    }
}
