//! Reference tables and observed statistics.
//!
//! A reference table holds `n` rows of (parameter vector, summary-statistic
//! vector) simulated from the prior predictive distribution. Tables are
//! exchanged as UTF-8 TSV files: one header line, parameter columns prefixed
//! `param_`, statistic columns prefixed `stat_`, C-locale decimals and no
//! missing values. An observed-statistics file has the same layout with
//! `stat_` columns only and exactly one data row.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PARAM_PREFIX: &str = "param_";
pub const STAT_PREFIX: &str = "stat_";

/// Simulated (parameter, statistic) pairs, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    param_names: Vec<String>,
    stat_names: Vec<String>,
    params: Vec<f64>,
    stats: Vec<f64>,
    n: usize,
}

impl ReferenceTable {
    /// Builds a table from row-major parameter and statistic buffers.
    pub fn new(
        param_names: Vec<String>,
        stat_names: Vec<String>,
        params: Vec<f64>,
        stats: Vec<f64>,
    ) -> Result<Self> {
        check_names("parameter", &param_names)?;
        check_names("statistic", &stat_names)?;
        let k = stat_names.len();
        let p = param_names.len();
        if k == 0 {
            return Err(Error::InvalidTable("table has no statistic columns".into()));
        }
        if stats.len() % k != 0 {
            return Err(Error::InvalidTable(format!(
                "statistic buffer of length {} is not a multiple of {k} columns",
                stats.len()
            )));
        }
        let n = stats.len() / k;
        if params.len() != n * p {
            return Err(Error::InvalidTable(format!(
                "parameter buffer has {} entries, expected {n} rows x {p} columns",
                params.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidTable(format!("table needs at least 2 rows, got {n}")));
        }
        if let Some(i) = params.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidTable(format!(
                "non-finite parameter in row {} column {}",
                i / p,
                param_names[i % p]
            )));
        }
        if let Some(i) = stats.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidTable(format!(
                "non-finite statistic in row {} column {}",
                i / k,
                stat_names[i % k]
            )));
        }
        Ok(Self {
            param_names,
            stat_names,
            params,
            stats,
            n,
        })
    }

    /// Builds a table from per-row vectors.
    pub fn from_rows(
        param_names: Vec<String>,
        stat_names: Vec<String>,
        rows: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        let p = param_names.len();
        let k = stat_names.len();
        let mut params = Vec::with_capacity(rows.len() * p);
        let mut stats = Vec::with_capacity(rows.len() * k);
        for (i, (theta, s)) in rows.into_iter().enumerate() {
            if theta.len() != p || s.len() != k {
                return Err(Error::InvalidTable(format!(
                    "row {i} has {} parameters and {} statistics, expected {p} and {k}",
                    theta.len(),
                    s.len()
                )));
            }
            params.extend(theta);
            stats.extend(s);
        }
        Self::new(param_names, stat_names, params, stats)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn n_stats(&self) -> usize {
        self.stat_names.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn stat_names(&self) -> &[String] {
        &self.stat_names
    }

    pub fn param_row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.params[i * p..(i + 1) * p]
    }

    pub fn stat_row(&self, i: usize) -> &[f64] {
        let k = self.n_stats();
        &self.stats[i * k..(i + 1) * k]
    }

    pub fn stat_column(&self, j: usize) -> Vec<f64> {
        self.stats.iter().skip(j).step_by(self.n_stats()).copied().collect()
    }

    /// Row-major statistic buffer.
    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    /// Row-major parameter buffer.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Multiplies statistic column `j` by `factor`.
    pub fn scale_stat_column(&mut self, j: usize, factor: f64) {
        let k = self.n_stats();
        for v in self.stats.iter_mut().skip(j).step_by(k) {
            *v *= factor;
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .param_names
            .iter()
            .map(|n| format!("{PARAM_PREFIX}{n}"))
            .chain(self.stat_names.iter().map(|n| format!("{STAT_PREFIX}{n}")))
            .collect();
        out.push_str(&header.join("\t"));
        out.push('\n');
        for i in 0..self.n {
            let mut first = true;
            for v in self.param_row(i).iter().chain(self.stat_row(i)) {
                if !first {
                    out.push('\t');
                }
                first = false;
                write!(out, "{v}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn parse_tsv(text: &str, origin: &str) -> Result<Self> {
        let parsed = parse_tsv(text, origin)?;
        if parsed.rows.is_empty() {
            return Err(parse_err(origin, 1, "no data rows"));
        }
        let mut param_cols = Vec::new();
        let mut stat_cols = Vec::new();
        let mut param_names = Vec::new();
        let mut stat_names = Vec::new();
        for (c, name) in parsed.header.iter().enumerate() {
            if let Some(rest) = name.strip_prefix(PARAM_PREFIX) {
                param_cols.push(c);
                param_names.push(rest.to_string());
            } else if let Some(rest) = name.strip_prefix(STAT_PREFIX) {
                stat_cols.push(c);
                stat_names.push(rest.to_string());
            } else {
                return Err(parse_err(
                    origin,
                    1,
                    format!("column '{name}' has neither a '{PARAM_PREFIX}' nor a '{STAT_PREFIX}' prefix"),
                ));
            }
        }
        let mut params = Vec::with_capacity(parsed.rows.len() * param_cols.len());
        let mut stats = Vec::with_capacity(parsed.rows.len() * stat_cols.len());
        for row in &parsed.rows {
            params.extend(param_cols.iter().map(|&c| row[c]));
            stats.extend(stat_cols.iter().map(|&c| row[c]));
        }
        Self::new(param_names, stat_names, params, stats).map_err(|e| match e {
            Error::InvalidTable(msg) => parse_err(origin, 1, msg),
            other => other,
        })
    }
}

/// Observed summary statistics, one value per named statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedStats {
    stat_names: Vec<String>,
    values: Vec<f64>,
}

impl ObservedStats {
    pub fn new(stat_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        check_names("statistic", &stat_names)?;
        if stat_names.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: stat_names.len(),
                actual: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "observed statistic '{}' is not finite",
                stat_names[j]
            )));
        }
        Ok(Self { stat_names, values })
    }

    pub fn stat_names(&self) -> &[String] {
        &self.stat_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Reorders the statistics to follow `names`. Every name must be present
    /// exactly once; extra or missing statistics are an error.
    pub fn aligned_to(&self, names: &[String]) -> Result<Self> {
        if names.len() != self.stat_names.len() {
            return Err(Error::NameMismatch(format!(
                "observed has {} statistics, table has {}",
                self.stat_names.len(),
                names.len()
            )));
        }
        let mut values = Vec::with_capacity(names.len());
        for name in names {
            let j = self
                .stat_names
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::NameMismatch(format!("statistic '{name}' missing from observed")))?;
            values.push(self.values[j]);
        }
        Ok(Self {
            stat_names: names.to_vec(),
            values,
        })
    }

    /// Fails unless the statistics are in exactly the table's order.
    pub fn ensure_matches(&self, table: &ReferenceTable) -> Result<()> {
        if self.stat_names != table.stat_names() {
            return Err(Error::NameMismatch(format!(
                "observed {:?} vs table {:?}",
                self.stat_names,
                table.stat_names()
            )));
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let header: Vec<String> = self
            .stat_names
            .iter()
            .map(|n| format!("{STAT_PREFIX}{n}"))
            .collect();
        let values: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        format!("{}\n{}\n", header.join("\t"), values.join("\t"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn parse_tsv(text: &str, origin: &str) -> Result<Self> {
        let parsed = parse_tsv(text, origin)?;
        let mut names = Vec::with_capacity(parsed.header.len());
        for name in &parsed.header {
            match name.strip_prefix(STAT_PREFIX) {
                Some(rest) => names.push(rest.to_string()),
                None => {
                    return Err(parse_err(
                        origin,
                        1,
                        format!("observed file column '{name}' lacks the '{STAT_PREFIX}' prefix"),
                    ))
                }
            }
        }
        if parsed.rows.len() != 1 {
            return Err(parse_err(
                origin,
                1,
                format!("observed file must have exactly one data row, found {}", parsed.rows.len()),
            ));
        }
        let values = parsed.rows.into_iter().next().unwrap_or_default();
        Self::new(names, values).map_err(|e| parse_err(origin, 2, e.to_string()))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn load_reference_table(path: impl AsRef<Path>) -> Result<ReferenceTable> {
    let path = path.as_ref();
    let text = read(path)?;
    ReferenceTable::parse_tsv(&text, &path.display().to_string())
}

/// Loads an observed-statistics file and aligns it to `table` by name.
pub fn load_observed(path: impl AsRef<Path>, table: &ReferenceTable) -> Result<ObservedStats> {
    let path = path.as_ref();
    let text = read(path)?;
    ObservedStats::parse_tsv(&text, &path.display().to_string())?.aligned_to(table.stat_names())
}

struct ParsedTsv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_tsv(text: &str, origin: &str) -> Result<ParsedTsv> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let header_line = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
            None => return Err(parse_err(origin, 1, "missing header")),
        }
    };
    let header: Vec<String> = header_line.split('\t').map(|s| s.trim().to_string()).collect();
    if header.iter().any(|h| h.is_empty()) {
        return Err(parse_err(origin, 1, "empty column name in header"));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.len() {
            return Err(parse_err(
                origin,
                lineno,
                format!("expected {} cells, found {}", header.len(), cells.len()),
            ));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (cell, name) in cells.iter().zip(&header) {
            let v: f64 = cell.trim().parse().map_err(|_| {
                parse_err(origin, lineno, format!("column '{name}': non-numeric cell '{cell}'"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    origin,
                    lineno,
                    format!("column '{name}': non-finite cell '{cell}'"),
                ));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(ParsedTsv { header, rows })
}

fn check_names(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if name.is_empty() {
            return Err(Error::InvalidTable(format!("empty {kind} name")));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::InvalidTable(format!("duplicate {kind} name '{name}'")));
        }
    }
    Ok(())
}
