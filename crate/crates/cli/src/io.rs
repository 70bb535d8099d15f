//! Vector files and CSV output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Reads a vector of binary64 values.
///
/// Binary files hold a little-endian `u64` length followed by that many
/// little-endian `f64`s. Anything else is read as text: numbers separated by
/// whitespace or commas, `#` comments allowed.
pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    if let Some(v) = decode_binary(&bytes) {
        return Ok(v);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| {
        CliError::usage(format!(
            "{}: neither a binary vector nor UTF-8 text",
            path.display()
        ))
    })?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let v = crate::parse::parse_f64(tok)
                .map_err(|_| CliError::usage(format!("{}: bad number `{tok}`", path.display())))?;
            out.push(v);
        }
    }
    Ok(out)
}

fn decode_binary(bytes: &[u8]) -> Option<Vec<f64>> {
    let header: [u8; 8] = bytes.get(..8)?.try_into().ok()?;
    let len = u64::from_le_bytes(header);
    let body = &bytes[8..];
    if len.checked_mul(8)? != body.len() as u64 {
        return None;
    }
    Some(
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    )
}

pub fn write_binary_vector(path: &Path, v: &[f64]) -> Result<(), CliError> {
    let mut buf = Vec::with_capacity(8 + 8 * v.len());
    buf.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// Writes `rows` as CSV with a header to `path`, or to `stdout` if no path is given.
pub fn write_csv<T: Serialize>(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    rows: &[T],
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            write_rows(BufWriter::new(file), rows).map_err(|e| CliError::io(p, e))
        }
        None => write_rows(stdout, rows).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(io::Error::other)?;
    }
    wtr.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_and_text_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("v.bin");
        write_binary_vector(&bin, &[1.5, -2.0, 1e-300]).unwrap();
        assert_eq!(read_vector(&bin).unwrap(), vec![1.5, -2.0, 1e-300]);

        let txt = dir.path().join("v.txt");
        std::fs::write(&txt, "# header\n1 2^-3, 4e2\n\n-5\n").unwrap();
        assert_eq!(read_vector(&txt).unwrap(), vec![1.0, 0.125, 400.0, -5.0]);

        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "1 two 3").unwrap();
        assert!(read_vector(&bad).is_err());
        assert!(read_vector(&dir.path().join("missing")).is_err());
    }
}
