//! Matrix Market readers and writers, plus the JSON sidecars that persist
//! coding matrices and redundancy blocks.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::coding::{CodingMatrix, CodingMeta};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{CsrMatrix, SymMatrix, TAU_SYM};
use crate::redundancy::RedundancyBlocks;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmFormat {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmSymmetry {
    General,
    Symmetric,
}

struct MmHeader {
    format: MmFormat,
    symmetry: MmSymmetry,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_header(line: &str) -> std::result::Result<MmHeader, String> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("%%MatrixMarket") {
        return Err("expected a %%MatrixMarket header".into());
    }
    if parts.next() != Some("matrix") {
        return Err("only \"matrix\" objects are supported".into());
    }
    let format = match parts.next() {
        Some("coordinate") => MmFormat::Coordinate,
        Some("array") => MmFormat::Array,
        other => return Err(format!("unsupported format {other:?}")),
    };
    match parts.next() {
        Some("real") | Some("integer") => {}
        other => return Err(format!("unsupported field {other:?}, only real data is readable")),
    }
    let symmetry = match parts.next() {
        Some("general") | None => MmSymmetry::General,
        Some("symmetric") => MmSymmetry::Symmetric,
        other => return Err(format!("unsupported symmetry {other:?}")),
    };
    Ok(MmHeader { format, symmetry })
}

/// Read any real Matrix Market file into a dense matrix.
pub fn read_matrix_market_dense(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (header, header_line) = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break (parse_header(&line).map_err(|m| parse_err(idx + 1, m))?, idx + 1);
            }
            None => return Err(parse_err(1, "empty file")),
        }
    };
    let _ = header_line;

    // size line (after comments)
    let (size_idx, size_line) = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                break (idx + 1, t.to_string());
            }
            None => return Err(parse_err(0, "missing size line")),
        }
    };
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    let parse_usize = |s: &str, idx: usize| -> Result<usize> {
        s.parse::<usize>().map_err(|_| parse_err(idx, format!("bad integer {s:?}")))
    };
    match header.format {
        MmFormat::Coordinate => {
            if dims.len() != 3 {
                return Err(parse_err(size_idx, "coordinate size line needs rows cols nnz"));
            }
            let nrows = parse_usize(dims[0], size_idx)?;
            let ncols = parse_usize(dims[1], size_idx)?;
            let nnz = parse_usize(dims[2], size_idx)?;
            let mut m = DMatrix::zeros(nrows, ncols);
            let mut seen = 0usize;
            for (idx, line) in lines {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                let parts: Vec<&str> = t.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(parse_err(idx + 1, "expected \"i j value\""));
                }
                let i = parse_usize(parts[0], idx + 1)?;
                let j = parse_usize(parts[1], idx + 1)?;
                let v: f64 = parts[2]
                    .parse()
                    .map_err(|_| parse_err(idx + 1, format!("bad value {:?}", parts[2])))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(idx + 1, format!("index ({i}, {j}) out of bounds")));
                }
                m[(i - 1, j - 1)] += v;
                if header.symmetry == MmSymmetry::Symmetric && i != j {
                    m[(j - 1, i - 1)] += v;
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(size_idx, format!("declared {nnz} entries, found {seen}")));
            }
            Ok(m)
        }
        MmFormat::Array => {
            if dims.len() != 2 {
                return Err(parse_err(size_idx, "array size line needs rows cols"));
            }
            let nrows = parse_usize(dims[0], size_idx)?;
            let ncols = parse_usize(dims[1], size_idx)?;
            let mut values = Vec::with_capacity(nrows * ncols);
            for (idx, line) in lines {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                for tok in t.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(idx + 1, format!("bad value {tok:?}")))?;
                    values.push(v);
                }
            }
            let expected = match header.symmetry {
                MmSymmetry::General => nrows * ncols,
                MmSymmetry::Symmetric => ncols * (2 * nrows - ncols + 1) / 2,
            };
            if values.len() != expected {
                return Err(parse_err(
                    size_idx,
                    format!("expected {expected} array values, found {}", values.len()),
                ));
            }
            let mut m = DMatrix::zeros(nrows, ncols);
            match header.symmetry {
                MmSymmetry::General => {
                    // column-major order
                    let mut it = values.into_iter();
                    for j in 0..ncols {
                        for i in 0..nrows {
                            m[(i, j)] = it.next().unwrap();
                        }
                    }
                }
                MmSymmetry::Symmetric => {
                    let mut it = values.into_iter();
                    for j in 0..ncols {
                        for i in j..nrows {
                            let v = it.next().unwrap();
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                }
            }
            Ok(m)
        }
    }
}

/// Read a symmetric matrix. A `general` file that is symmetric only up to
/// round-off (relative max-norm within `TAU_SYM`) is symmetrized and a
/// warning string is returned; larger asymmetry is an error.
pub fn read_symmetric_matrix_market(
    path: impl AsRef<Path>,
) -> Result<(SymMatrix, Option<String>)> {
    let dense = read_matrix_market_dense(path.as_ref())?;
    if dense.nrows() != dense.ncols() {
        return Err(Error::InvalidDimensions(format!(
            "expected a square matrix, got {}x{}",
            dense.nrows(),
            dense.ncols()
        )));
    }
    let scale = dense.amax();
    let mut worst = 0.0f64;
    for i in 0..dense.nrows() {
        for j in (i + 1)..dense.ncols() {
            worst = worst.max((dense[(i, j)] - dense[(j, i)]).abs());
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { 0.0 };
    if rel > TAU_SYM {
        return Err(Error::AsymmetricInput { rel, tol: TAU_SYM });
    }
    let warning = (worst > 0.0).then(|| {
        format!("input is asymmetric at relative level {rel:.2e}; symmetrized")
    });
    let sym = linalg::symmetrize(&dense);
    let n = sym.nrows();
    let nnz = sym.iter().filter(|v| **v != 0.0).count();
    let matrix = if nnz * 4 < n * n {
        SymMatrix::Sparse(CsrMatrix::from_dense(&sym))
    } else {
        SymMatrix::Dense(sym)
    };
    Ok((matrix, warning))
}

/// Write a symmetric matrix in coordinate format, lower triangle only.
pub fn write_matrix_market_sym(path: impl AsRef<Path>, m: &SymMatrix) -> Result<()> {
    let dense = m.to_dense();
    let n = dense.nrows();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            if dense[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, dense[(i, j)]));
            }
        }
    }
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", n, n, entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {v:.17e}")?;
    }
    Ok(())
}

/// Write a rectangular matrix in coordinate format (general symmetry).
pub fn write_matrix_market_coo(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut entries = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, m[(i, j)]));
            }
        }
    }
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {v:.17e}")?;
    }
    Ok(())
}

/// Write a dense matrix in array format (column-major).
pub fn write_matrix_market_array(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            writeln!(w, "{:.17e}", m[(i, j)])?;
        }
    }
    Ok(())
}

/// Persist a coding matrix as `E.mtx` plus the `E.json` sidecar in `dir`.
pub fn write_coding_matrix(dir: impl AsRef<Path>, e: &CodingMatrix) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_matrix_market_coo(dir.join("E.mtx"), &e.to_dense())?;
    let meta = serde_json::to_string_pretty(&e.meta())
        .map_err(|err| Error::InvalidDimensions(err.to_string()))?;
    fs::write(dir.join("E.json"), meta)?;
    Ok(())
}

pub fn read_coding_matrix(dir: impl AsRef<Path>) -> Result<CodingMatrix> {
    let dir = dir.as_ref();
    let meta: CodingMeta = serde_json::from_str(&fs::read_to_string(dir.join("E.json"))?)
        .map_err(|err| parse_err(0, format!("bad sidecar: {err}")))?;
    let dense = read_matrix_market_dense(dir.join("E.mtx"))?;
    if dense.shape() != (meta.n, meta.k) {
        return Err(Error::DimensionMismatch(format!(
            "sidecar says {}x{}, file is {}x{}",
            meta.n,
            meta.k,
            dense.nrows(),
            dense.ncols()
        )));
    }
    let triplets: Vec<(usize, usize, f64)> = (0..meta.n)
        .flat_map(|i| (0..meta.k).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = dense[(i, j)];
            (v != 0.0).then_some((i, j, v))
        })
        .collect();
    CodingMatrix::from_parts(meta, triplets)
}

/// Persist the redundancy blocks next to the coding matrix.
pub fn write_blocks(dir: impl AsRef<Path>, blocks: &RedundancyBlocks) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_matrix_market_coo(dir.join("R.mtx"), &blocks.r)?;
    write_matrix_market_array(dir.join("S.mtx"), &blocks.s)?;
    write_matrix_market_array(dir.join("T.mtx"), &blocks.t)?;
    Ok(())
}

pub fn read_blocks(dir: impl AsRef<Path>) -> Result<RedundancyBlocks> {
    let dir = dir.as_ref();
    Ok(RedundancyBlocks {
        r: read_matrix_market_dense(dir.join("R.mtx"))?,
        s: read_matrix_market_dense(dir.join("S.mtx"))?,
        t: read_matrix_market_dense(dir.join("T.mtx"))?,
    })
}
