//! ASCII PCD reader (x, y, z fields only).

use std::path::Path;

use crate::error::{Error, Result};

/// Reads the x, y, z columns of an ASCII PCD file. Non-finite records are
/// returned as-is; callers decide whether to drop them.
pub fn read_pcd(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut fields: Vec<String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut points_declared: Option<usize> = None;
    let mut lines = text.lines();
    let mut data_ascii = false;
    for line in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap_or_default().to_ascii_uppercase();
        let rest: Vec<&str> = tokens.collect();
        match key.as_str() {
            "FIELDS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "COUNT" => {
                counts = rest
                    .iter()
                    .map(|s| s.parse().map_err(|_| Error::parse(path, "bad COUNT")))
                    .collect::<Result<_>>()?
            }
            "POINTS" => points_declared = rest.first().and_then(|s| s.parse().ok()),
            "DATA" => {
                if rest.first().map(|s| s.eq_ignore_ascii_case("ascii")) != Some(true) {
                    return Err(Error::UnsupportedFormat(format!(
                        "{}: only ASCII PCD data is supported",
                        path.display()
                    )));
                }
                data_ascii = true;
                break;
            }
            _ => {}
        }
    }
    if !data_ascii {
        return Err(Error::parse(path, "missing DATA line"));
    }
    if counts.is_empty() {
        counts = vec![1; fields.len()];
    }
    if counts.len() != fields.len() {
        return Err(Error::parse(path, "FIELDS and COUNT lengths differ"));
    }
    let column = |name: &str| -> Result<usize> {
        let i = fields
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::parse(path, format!("missing field {name}")))?;
        Ok(counts[..i].iter().sum())
    };
    let cols = [column("x")?, column("y")?, column("z")?];
    let width: usize = counts.iter().sum();

    let mut out = Vec::new();
    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < width {
            return Err(Error::parse(
                path,
                format!("record has {} of {width} values", tokens.len()),
            ));
        }
        let mut p = [0.0; 3];
        for (k, &c) in cols.iter().enumerate() {
            p[k] = match tokens[c].to_ascii_lowercase().as_str() {
                "nan" | "-nan" => f64::NAN,
                t => t.parse().map_err(|_| Error::parse(path, format!("bad number {t:?}")))?,
            };
        }
        out.push(p);
    }
    if let Some(n) = points_declared {
        if n != out.len() {
            return Err(Error::parse(path, format!("POINTS says {n} but found {}", out.len())));
        }
    }
    Ok(out)
}
