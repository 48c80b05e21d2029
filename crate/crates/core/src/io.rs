//! The `dten 1` text format.
//!
//! ```text
//! dten 1
//! 2 3
//! 0.1 0.2 0.3
//! 0.4 0.5 0.6
//! ```
//!
//! Line 1 is the literal header, line 2 the space-separated extents, and the
//! rest row-major values separated by arbitrary whitespace. Values are
//! written with 17 significant digits so they re-parse bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

pub const HEADER: &str = "dten 1";

pub fn parse_dten(text: &str) -> Result<DenseTensor> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
    if header.split_whitespace().collect::<Vec<_>>() != ["dten", "1"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{HEADER}`, found `{}`", header.trim()),
        });
    }
    let (dims_line, dims_text) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse {
            line: 2,
            msg: "missing dimensions line".into(),
        })?;
    let dims = dims_text
        .split_whitespace()
        .map(|w| {
            w.parse::<usize>().map_err(|e| Error::Parse {
                line: dims_line + 1,
                msg: format!("bad extent `{w}`: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = Shape::new(dims)?;

    let mut data = Vec::with_capacity(shape.len());
    for (ln, line) in lines {
        for w in line.split_whitespace() {
            let v: f64 = w.parse().map_err(|e| Error::Parse {
                line: ln + 1,
                msg: format!("bad value `{w}`: {e}"),
            })?;
            data.push(v);
        }
    }
    if data.len() != shape.len() {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("expected {} values for shape {shape}, found {}", shape.len(), data.len()),
        });
    }
    DenseTensor::new(shape, data)
}

pub fn read_dten(mut reader: impl Read) -> Result<DenseTensor> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_dten(&text)
}

pub fn write_dten(mut w: impl Write, t: &DenseTensor) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    let dims: Vec<String> = t.dims().iter().map(|n| n.to_string()).collect();
    writeln!(w, "{}", dims.join(" "))?;
    let row = *t.dims().last().expect("order >= 1");
    for chunk in t.data().chunks(row) {
        let vals: Vec<String> = chunk.iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", vals.join(" "))?;
    }
    Ok(())
}

pub fn to_dten_string(t: &DenseTensor) -> String {
    let mut buf = Vec::new();
    write_dten(&mut buf, t).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

pub fn load(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_dten(File::open(path)?)
}

pub fn save(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dten(&mut w, t)?;
    w.flush()?;
    Ok(())
}

/// Scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
