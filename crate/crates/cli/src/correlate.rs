//! Pearson correlation between treebank size and augmentation gain.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CorrelationError {
    #[error("need at least 2 pairs, found {0}")]
    TooFewPairs(usize),
    #[error("undefined correlation: a variable has zero variance")]
    UndefinedCorrelation,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Sample Pearson coefficient, computed from centred values.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64, CorrelationError> {
    if pairs.len() < 2 {
        return Err(CorrelationError::TooFewPairs(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Reads `size improvement` pairs separated by tabs, commas or spaces.
/// Blank lines, `#` comments and a non-numeric header line are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>, CorrelationError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parse_error = |message: String| CorrelationError::Parse { line: idx + 1, message };
        if fields.len() != 2 {
            return Err(parse_error(format!("expected 2 fields, found {}", fields.len())));
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => pairs.push((x, y)),
            (Ok(_), Ok(_)) => return Err(parse_error("values must be finite".to_owned())),
            _ if pairs.is_empty() && fields.iter().all(|f| f.parse::<f64>().is_err()) => {}
            _ => return Err(parse_error(format!("`{line}` is not a pair of numbers"))),
        }
    }
    Ok(pairs)
}

/// Plot-ready TSV of the pairs.
pub fn pairs_tsv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("size\timprovement\n");
    for (x, y) in pairs {
        let _ = writeln!(out, "{x}\t{y}");
    }
    out
}
