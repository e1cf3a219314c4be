//! The return panel: a T x N matrix of excess returns with period labels
//! and asset identifiers. Universal input to estimation and backtesting.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A validated T x N panel of excess returns.
///
/// Rows are periods (strictly increasing labels), columns are assets
/// (unique identifiers). Values are plain return fractions per period.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    periods: Vec<String>,
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(periods: Vec<String>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != periods.len() || values.ncols() != assets.len() {
            return Err(Error::Invalid(format!(
                "panel shape {}x{} does not match {} periods x {} assets",
                values.nrows(),
                values.ncols(),
                periods.len(),
                assets.len()
            )));
        }
        if periods.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "period labels must be strictly increasing".into(),
            ));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = assets.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(Error::Invalid(format!("duplicate asset identifier '{dup}'")));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::Invalid(format!(
                "non-finite return at period '{}', asset '{}'",
                periods[r], assets[c]
            )));
        }
        Ok(Self { periods, assets, values })
    }

    /// Convenience constructor with generated zero-padded labels.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let periods = (1..=values.nrows()).map(|i| format!("p{i:08}")).collect();
        let assets = (1..=values.ncols()).map(|j| format!("a{j:08}")).collect();
        Self::new(periods, assets, values)
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Aspect ratio N / T of the panel.
    pub fn aspect_ratio(&self) -> f64 {
        self.n_assets() as f64 / self.n_periods() as f64
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Sub-panel holding rows `range` (e.g. a rolling training window).
    pub fn window(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.n_periods() || range.start >= range.end {
            return Err(Error::Invalid(format!(
                "window {range:?} out of bounds for {} periods",
                self.n_periods()
            )));
        }
        let rows: Vec<usize> = range.clone().collect();
        Ok(Self {
            periods: rows.iter().map(|&r| self.periods[r].clone()).collect(),
            assets: self.assets.clone(),
            values: self.values.select_rows(rows.iter()),
        })
    }

    /// Sub-panel holding the given asset columns, in the given order.
    pub fn select_assets(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_assets()) {
            return Err(Error::Invalid(format!("asset index {bad} out of range")));
        }
        Ok(Self {
            periods: self.periods.clone(),
            assets: cols.iter().map(|&c| self.assets[c].clone()).collect(),
            values: self.values.select_columns(cols.iter()),
        })
    }

    /// Load from a delimited text file: header row `period,<asset>,<asset>,...`,
    /// one row per period, first column the period label. The delimiter is
    /// sniffed from the header (tab, comma, or semicolon).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parse the delimited panel format from a string. See [`Self::load`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("empty panel file".into()))?;
        let delim = sniff_delimiter(header);
        let cols: Vec<&str> = header.split(delim).map(str::trim).collect();
        if cols.len() < 2 {
            return Err(Error::Schema(
                "header must contain a period column and at least one asset column".into(),
            ));
        }
        let assets: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
        let n = assets.len();
        let mut periods = Vec::new();
        let mut data: Vec<f64> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(Error::Schema(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    n + 1
                )));
            }
            periods.push(fields[0].to_string());
            for (j, f) in fields[1..].iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| {
                    Error::Schema(format!(
                        "row {}, column '{}': cannot parse '{}' as a number",
                        lineno + 2,
                        assets[j],
                        f
                    ))
                })?;
                data.push(v);
            }
        }
        if periods.is_empty() {
            return Err(Error::Schema("panel file has no data rows".into()));
        }
        let values = DMatrix::from_row_slice(periods.len(), n, &data);
        Self::new(periods, assets, values)
    }

    /// Render in the same delimited format that [`Self::parse`] reads.
    pub fn render(&self, delim: char) -> String {
        let mut out = String::from("period");
        for a in &self.assets {
            out.push(delim);
            out.push_str(a);
        }
        out.push('\n');
        for (i, p) in self.periods.iter().enumerate() {
            out.push_str(p);
            for j in 0..self.n_assets() {
                out.push(delim);
                out.push_str(&format!("{}", self.values[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn sniff_delimiter(header: &str) -> char {
    for d in ['\t', ',', ';'] {
        if header.contains(d) {
            return d;
        }
    }
    ','
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let p = ReturnPanel::new(
            vec!["2001-01".into(), "2001-02".into()],
            vec!["x".into(), "y".into()],
            DMatrix::from_row_slice(2, 2, &[0.01, -0.02, 0.003, 0.004]),
        )
        .unwrap();
        let text = p.render(',');
        let q = ReturnPanel::parse(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let err = ReturnPanel::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]),
        );
        assert!(matches!(err, Err(Error::Invalid(_))));

        let err = ReturnPanel::new(
            vec!["b".into(), "a".into()],
            vec!["x".into()],
            DMatrix::from_row_slice(2, 1, &[0.0, 0.1]),
        );
        assert!(matches!(err, Err(Error::Invalid(_))));

        let err = ReturnPanel::new(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "x".into()],
            DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.2, 0.3]),
        );
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn schema_error_names_column() {
        let text = "period,alpha,beta\np1,0.1,oops\n";
        let err = ReturnPanel::parse(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("beta"), "{msg}");
    }

    #[test]
    fn window_and_select() {
        let p = ReturnPanel::from_values(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        ))
        .unwrap();
        let w = p.window(1..3).unwrap();
        assert_eq!(w.n_periods(), 2);
        assert_eq!(w.values()[(0, 0)], 3.0);
        let s = p.select_assets(&[1]).unwrap();
        assert_eq!(s.values()[(2, 0)], 6.0);
    }
}
