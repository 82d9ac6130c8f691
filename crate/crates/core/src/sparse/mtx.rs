//! MatrixMarket coordinate format (`real general`, 1-based indices).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::SparseMatrix;
use crate::error::{Error, Result};

const BANNER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn read(path: &Path) -> Result<SparseMatrix> {
    let file = File::open(path)?;
    read_from(BufReader::new(file), path)
}

pub fn read_from<R: BufRead>(reader: R, path: &Path) -> Result<SparseMatrix> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = reader.lines().enumerate();

    let (_, banner) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let banner = banner?;
    let fields: Vec<String> = banner
        .split_whitespace()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(err(1, format!("bad banner {banner:?}")));
    }
    if fields[2] != "coordinate" {
        return Err(err(1, format!("unsupported layout {}", fields[2])));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(err(1, format!("unsupported field {}", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(err(1, format!("unsupported symmetry {other}"))),
    };

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| err(lineno, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| err(lineno, format!("bad {what}: {e}")))
        };
        match dims {
            None => {
                let r = next_usize("row count")?;
                let c = next_usize("column count")?;
                let nnz = next_usize("entry count")?;
                dims = Some((r, c, nnz));
                triplets.reserve(nnz);
            }
            Some((nr, nc, _)) => {
                let i = next_usize("row index")?;
                let j = next_usize("column index")?;
                let v: f64 = it
                    .next()
                    .ok_or_else(|| err(lineno, "missing value".into()))?
                    .parse()
                    .map_err(|e| err(lineno, format!("bad value: {e}")))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(err(lineno, format!("index ({i}, {j}) out of range")));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = dims.ok_or_else(|| err(1, "missing size line".into()))?;
    let expected = if symmetric { None } else { Some(nnz) };
    if let Some(e) = expected {
        if triplets.len() != e {
            return Err(err(
                0,
                format!("size line promised {e} entries, found {}", triplets.len()),
            ));
        }
    }
    SparseMatrix::from_triplets(nr, nc, &triplets)
}

pub fn write(m: &SparseMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(m, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Values are written with Rust's shortest round-trip formatting, so a
/// write/read cycle reproduces the matrix bit for bit.
pub fn write_to<W: Write>(m: &SparseMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "{BANNER}")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{} {} {:?}", i + 1, j + 1, v)?;
    }
    Ok(())
}
