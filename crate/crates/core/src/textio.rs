//! Plain-text column tables: UTF-8, whitespace-delimited, lines whose first
//! non-blank character is `#` are comments, blank lines are ignored.

use crate::error::{Error, Result};

/// Parses a table whose rows all have one of the `allowed` column counts.
pub fn parse_columns(text: &str, allowed: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}: cannot parse `{tok}` as a number", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if !allowed.contains(&row.len()) {
            return Err(Error::Format(format!(
                "line {}: expected {allowed:?} columns, found {}",
                lineno + 1,
                row.len()
            )));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!(
                    "line {}: column count changed from {w} to {}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("line {}: non-finite value", lineno + 1)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(rows)
}

/// Two-column `(x, y)` table.
pub fn parse_two_column(text: &str) -> Result<Vec<(f64, f64)>> {
    Ok(parse_columns(text, &[2])?.into_iter().map(|r| (r[0], r[1])).collect())
}
