//! Joins simulated mean adults with trap counts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use scls_core::aedes::TRAP_COUNTS;

use crate::CliError;

pub const COMPARISON_HEADER: [&str; 3] = ["day", "simulated_mean_adults", "trap_count"];

#[derive(Debug, Deserialize)]
struct TrapRow {
    day: f64,
    count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub day: f64,
    pub simulated: f64,
    pub trap: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// `None` with fewer than two rows or a constant series.
    pub pearson: Option<f64>,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Bundled trap counts as CSV (`day,count`, days after the first sampling).
pub fn bundled_trap_csv() -> String {
    let mut s = String::from("day,count\n");
    for (d, c) in TRAP_COUNTS {
        s.push_str(&format!("{d},{c}\n"));
    }
    s
}

/// Mean of the `adults` column per sample time of a trajectory CSV.
pub fn mean_adults(trajectory: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut rdr = csv::Reader::from_path(trajectory).map_err(|e| CliError::csv(trajectory, e))?;
    let headers = rdr.headers().map_err(|e| CliError::csv(trajectory, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: no column {name:?}", trajectory.display())))
    };
    let (tcol, acol) = (col("time")?, col("adults")?);
    let mut sums: BTreeMap<u64, (f64, f64, u64)> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::csv(trajectory, e))?;
        let num = |c: usize| -> Result<f64, CliError> {
            rec.get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad number in row {}", trajectory.display(), k + 1)))
        };
        let (t, a) = (num(tcol)?, num(acol)?);
        let e = sums.entry(t.to_bits()).or_insert((t, 0.0, 0));
        e.1 += a;
        e.2 += 1;
    }
    let mut out: Vec<(f64, f64)> = sums.into_values().map(|(t, s, n)| (t, s / n as f64)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Pairs each trap day with the mean adults of the latest sample at or
/// before it.
pub fn compare(series: &[(f64, f64)], traps: &str) -> Result<Comparison, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(traps.as_bytes());
    let last = series.last().map_or(f64::NEG_INFINITY, |s| s.0);
    let mut rows = Vec::new();
    for (k, rec) in rdr.deserialize::<TrapRow>().enumerate() {
        let r = rec.map_err(|e| CliError::Config(format!("trap row {}: {e}", k + 1)))?;
        if !(r.day >= 0.0) || r.day > last {
            return Err(CliError::DayOutOfRange { day: r.day, last });
        }
        let i = series.partition_point(|s| s.0 <= r.day);
        if i == 0 {
            return Err(CliError::DayOutOfRange { day: r.day, last });
        }
        rows.push(ComparisonRow {
            day: r.day,
            simulated: series[i - 1].1,
            trap: r.count,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.simulated).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.trap as f64).collect();
    Ok(Comparison {
        pearson: pearson(&xs, &ys),
        rows,
    })
}

/// Reads a trajectory and a trap CSV and writes the comparison CSV.
pub fn compare_traps(trajectory: &Path, traps: &Path, out: &Path) -> Result<Comparison, CliError> {
    let text = std::fs::read_to_string(traps).map_err(|e| CliError::io(traps, e))?;
    let cmp = compare(&mean_adults(trajectory)?, &text)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::csv(out, e))?;
    w.write_record(COMPARISON_HEADER).map_err(|e| CliError::csv(out, e))?;
    for r in &cmp.rows {
        w.write_record([r.day.to_string(), r.simulated.to_string(), r.trap.to_string()])
            .map_err(|e| CliError::csv(out, e))?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    Ok(cmp)
}
