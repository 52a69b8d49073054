//! Plain XYZ reading and writing.
//!
//! Layout: atom count, a free comment line, then one `Symbol x y z` line per
//! atom. Extra trailing columns (charges, forces) are ignored, the element may
//! be given as a symbol or an atomic number, and Mathematica style exponents
//! (`1.5*^-3`, as found in QM9) are accepted.

use std::fmt::Write as _;

use super::elements;
use super::molecule::Molecule;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum XyzError {
    #[error("line {line}: invalid atom count '{text}'")]
    BadCount { line: usize, text: String },
    #[error("declared {declared} atoms, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("line {line}: unknown element symbol '{symbol}'")]
    UnknownElement { line: usize, symbol: String },
    #[error("line {line}: non-numeric coordinate '{text}'")]
    BadCoordinate { line: usize, text: String },
    #[error("line {line}: expected 'Symbol x y z'")]
    MissingColumns { line: usize },
}

impl XyzError {
    /// 1-based line number the error refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            XyzError::BadCount { line, .. }
            | XyzError::UnknownElement { line, .. }
            | XyzError::BadCoordinate { line, .. }
            | XyzError::MissingColumns { line } => Some(*line),
            XyzError::CountMismatch { .. } => None,
        }
    }
}

fn parse_coordinate(token: &str, line: usize) -> Result<f64, XyzError> {
    let normalized = token.replace("*^", "e");
    match normalized.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(XyzError::BadCoordinate {
            line,
            text: token.to_string(),
        }),
    }
}

/// Parses a single-frame XYZ document. The returned molecule has an empty id.
pub fn parse_xyz(text: &str) -> Result<Molecule, XyzError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (count_line, count_text) = lines.next().unwrap_or((1, ""));
    let declared: usize = count_text.trim().parse().map_err(|_| XyzError::BadCount {
        line: count_line,
        text: count_text.trim().to_string(),
    })?;
    // comment line
    let _ = lines.next();

    let mut atomic_numbers = Vec::with_capacity(declared);
    let mut positions = Vec::with_capacity(declared);
    for (line, content) in lines {
        if content.trim().is_empty() {
            // blank lines after the atom block end the frame
            if atomic_numbers.len() >= declared {
                break;
            }
            continue;
        }
        if atomic_numbers.len() == declared {
            return Err(XyzError::CountMismatch {
                declared,
                found: declared + 1,
            });
        }
        let mut tokens = content.split_whitespace();
        let symbol = tokens.next().ok_or(XyzError::MissingColumns { line })?;
        let z = elements::parse_element(symbol).ok_or_else(|| XyzError::UnknownElement {
            line,
            symbol: symbol.to_string(),
        })?;
        let mut xyz = [0.0; 3];
        for c in xyz.iter_mut() {
            let token = tokens.next().ok_or(XyzError::MissingColumns { line })?;
            *c = parse_coordinate(token, line)?;
        }
        atomic_numbers.push(z);
        positions.push(xyz);
    }
    if atomic_numbers.len() != declared {
        return Err(XyzError::CountMismatch {
            declared,
            found: atomic_numbers.len(),
        });
    }
    Ok(Molecule {
        id: String::new(),
        atomic_numbers,
        positions,
    })
}

/// Writes a molecule with 12 decimals per coordinate; the id becomes the comment.
pub fn write_xyz(mol: &Molecule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", mol.len());
    let _ = writeln!(out, "{}", mol.id);
    for (z, p) in mol.atomic_numbers.iter().zip(&mol.positions) {
        let symbol = elements::symbol(*z).unwrap_or("X");
        let _ = writeln!(
            out,
            "{symbol:<2} {:>20.12} {:>20.12} {:>20.12}",
            p[0], p[1], p[2]
        );
    }
    out
}
