//! Tidy CSV output, one statistic per row.

use std::path::Path;

use crate::harness::sweep::{ResultRow, ResultTable};
use crate::harness::HarnessError;

pub const HEADER: &str = "experiment,scheme,sweep,stat,mean,stderr,trials,seed";

const SIGNIFICANT_DIGITS: usize = 12;

/// Decimal text with at most 12 significant digits.
///
/// Plain notation between 1e-6 and 1e16, scientific outside; zero is "0".
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    // Rounding is done by the exponent formatter, so carries such as
    // 9.9999999999995 → 10 land in the exponent.
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if negative { "-" } else { "" };
    if !(-6..16).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

fn sorted_rows(table: &ResultTable) -> Vec<&ResultRow> {
    let mut rows: Vec<&ResultRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.sweep.total_cmp(&b.sweep))
            .then(a.stat.cmp(&b.stat))
    });
    rows
}

/// CSV text with rows ordered by scheme, sweep value and statistic.
pub fn to_csv_string(table: &ResultTable) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in sorted_rows(table) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.scheme,
            r.sweep,
            r.stat,
            format_value(r.mean),
            format_value(r.stderr),
            r.trials,
            r.seed
        ));
    }
    out
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, to_csv_string(table)).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(HEADER) => {}
        other => {
            return Err(HarnessError::Csv {
                line: 1,
                message: format!("expected header '{HEADER}', found {other:?}"),
            })
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 2;
            let bad = |message: String| HarnessError::Csv {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(bad(format!("expected 8 fields, found {}", fields.len())));
            }
            let num = |idx: usize| {
                fields[idx]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("field {}: {e}", idx + 1)))
            };
            Ok(ResultRow {
                experiment: fields[0].to_string(),
                scheme: fields[1].to_string(),
                sweep: num(2)?,
                stat: fields[3].to_string(),
                mean: num(4)?,
                stderr: num(5)?,
                trials: fields[6].parse().map_err(|e| bad(format!("trials: {e}")))?,
                seed: fields[7].parse().map_err(|e| bad(format!("seed: {e}")))?,
            })
        })
        .collect()
}
