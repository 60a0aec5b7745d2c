use std::io::Write;

use super::{ExperimentError, SweepRecord};

pub const HEADER: &str = "point,value,stderr,reachable";

fn num(x: f64) -> String {
    // 12 significant digits
    format!("{x:.11e}")
}

/// CSV text with a header row; every line ends in a newline.
pub fn format_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            num(r.point),
            num(r.value),
            num(r.stderr),
            r.reachable
        ));
    }
    out
}

pub fn emit_csv(records: &[SweepRecord], mut dest: impl Write) -> Result<(), ExperimentError> {
    dest.write_all(format_csv(records).as_bytes())?;
    dest.flush()?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => {
            return Err(ExperimentError::CsvInvalid {
                line: 1,
                reason: format!("expected header `{HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| ExperimentError::CsvInvalid {
            line: i + 1,
            reason,
        };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, found {}", cols.len())));
        }
        let f = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("`{s}`: {e}")))
        };
        out.push(SweepRecord {
            point: f(cols[0])?,
            value: f(cols[1])?,
            stderr: f(cols[2])?,
            reachable: cols[3]
                .trim()
                .parse::<bool>()
                .map_err(|e| bad(format!("`{}`: {e}", cols[3])))?,
        });
    }
    Ok(out)
}
