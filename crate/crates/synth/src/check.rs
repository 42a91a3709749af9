//! Standalone robustness monitor over a trace CSV.

use std::path::Path;

use stlbo::{eval_boolean, parse_formula, robustness, Trace};

use crate::SynthError;

/// Reads a trace with a header row. A leading column named `t` is skipped;
/// every other column is one output coordinate.
pub fn read_trace(path: &Path) -> Result<(Vec<String>, Trace), SynthError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let skip = usize::from(header.first().is_some_and(|h| h == "t"));
    let labels = header[skip..].to_vec();
    if labels.is_empty() {
        return Err(SynthError::Config(format!("{}: no signal columns", path.display())));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(skip)
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    SynthError::Config(format!(
                        "{}: row {}: '{}' is not a number",
                        path.display(),
                        line + 1,
                        v
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    let trace = Trace::new(rows)?;
    Ok((labels, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub satisfied: bool,
    pub robustness: f64,
}

/// Evaluates `formula` at time 0 on the trace stored at `path`.
pub fn check_trace(formula: &str, path: &Path) -> Result<CheckReport, SynthError> {
    let (_, trace) = read_trace(path)?;
    let phi = parse_formula(formula, trace.dim())?;
    Ok(CheckReport {
        satisfied: eval_boolean(&phi, &trace, 0)?,
        robustness: robustness(&phi, &trace, 0)?.value(),
    })
}
