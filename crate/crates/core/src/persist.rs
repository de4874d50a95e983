//! Plain-text density-matrix files.
//!
//! ```text
//! dim D
//! row col real imag      (D² lines, row-major)
//! ```
//!
//! Floats are written with 17 significant digits in scientific notation,
//! which reproduces every finite `f64` bit-for-bit on reload.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fock::{CMatrix, FieldDensity, C64};

/// Fixed 17-significant-digit rendering used by every text artifact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_text(rho: &FieldDensity) -> String {
    let d = rho.dim();
    let m = rho.matrix();
    let mut out = String::with_capacity(64 * d * d);
    let _ = writeln!(out, "dim {d}");
    for r in 0..d {
        for c in 0..d {
            let z = m[(r, c)];
            let _ = writeln!(out, "{r} {c} {} {}", fmt_f64(z.re), fmt_f64(z.im));
        }
    }
    out
}

pub fn from_text(text: &str) -> Result<FieldDensity> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let d = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["dim", n] => n.parse::<usize>().map_err(|_| Error::Format(format!("bad dimension `{n}`")))?,
        _ => return Err(Error::Format(format!("expected `dim D` header, got `{header}`"))),
    };
    if d < 2 {
        return Err(Error::Format(format!("dimension {d} below 2")));
    }
    let mut m = CMatrix::zeros(d, d);
    let mut seen = vec![false; d * d];
    let mut count = 0usize;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!("line {}: expected 4 fields", lineno + 2)));
        }
        let idx =
            |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("line {}: bad index `{s}`", lineno + 2)));
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Format(format!("line {}: bad number `{s}`", lineno + 2)))
        };
        let (r, c) = (idx(fields[0])?, idx(fields[1])?);
        if r >= d || c >= d {
            return Err(Error::Format(format!("line {}: index out of range", lineno + 2)));
        }
        if std::mem::replace(&mut seen[r * d + c], true) {
            return Err(Error::Format(format!("line {}: duplicate entry ({r}, {c})", lineno + 2)));
        }
        m[(r, c)] = C64::new(num(fields[2])?, num(fields[3])?);
        count += 1;
    }
    if count != d * d {
        return Err(Error::Format(format!("expected {} entries, found {count}", d * d)));
    }
    FieldDensity::from_matrix(m)
}

pub fn save(rho: &FieldDensity, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(rho))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<FieldDensity> {
    from_text(&std::fs::read_to_string(path)?)
}
