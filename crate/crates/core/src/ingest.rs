//! Monthly panel ingestion: CSV parsing, validation, and missing-data policy.
//!
//! Input CSV layout is `date,<asset1>,<asset2>,...` with dates as `YYYY-MM` or
//! `YYYY-MM-DD` (the day is ignored). Lines starting with `#` are comments.
//! Empty cells and non-finite tokens (`NaN`, `inf`) count as missing.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::Array2;

use crate::date::YearMonth;
use crate::fmt_f64;

/// Whether a panel holds price levels or yields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeriesKind {
    #[default]
    Price,
    Yield,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Price => "price",
            Self::Yield => "yield",
        })
    }
}

impl FromStr for SeriesKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "price" => Ok(Self::Price),
            "yield" => Ok(Self::Yield),
            other => Err(format!(
                "unknown series kind '{other}' (expected price|yield)"
            )),
        }
    }
}

/// How gaps and missing cells are resolved when building a [`PanelData`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Any gap or missing cell is an error.
    #[default]
    Reject,
    /// Missing cells take the most recent prior value of the same asset.
    ForwardFill,
    /// Assets with any missing cell are removed.
    DropAsset,
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Reject => "reject",
            Self::ForwardFill => "ffill",
            Self::DropAsset => "drop",
        })
    }
}

impl FromStr for MissingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reject" => Ok(Self::Reject),
            "ffill" | "forward_fill" => Ok(Self::ForwardFill),
            "drop" | "drop_asset" => Ok(Self::DropAsset),
            other => Err(format!(
                "unknown missing policy '{other}' (expected reject|ffill|drop)"
            )),
        }
    }
}

/// Parsing options for a panel CSV.
#[derive(Debug, Clone, Copy, Default)]
pub struct ColumnSchema {
    pub kind: SeriesKind,
    pub missing: MissingPolicy,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: duplicate timestamp {month}")]
    DuplicateTimestamp { line: u64, month: YearMonth },

    #[error("line {line}: date {month} is not after the previous row's {previous}")]
    NonMonotonicDates {
        line: u64,
        month: YearMonth,
        previous: YearMonth,
    },

    #[error("need at least 2 assets, found {0}")]
    FewerThanTwoAssets(usize),

    #[error("need at least 3 months, found {0}")]
    TooFewMonths(usize),

    #[error("duplicate asset id '{0}'")]
    DuplicateAsset(String),

    #[error("{}", gap_message(.month, .asset))]
    Gap {
        month: YearMonth,
        asset: Option<String>,
    },

    #[error("asset '{asset}' is missing its first observation; nothing to forward-fill from")]
    LeadingMissing { asset: String },

    #[error("dropping assets with missing data leaves {remaining} asset(s); need at least 2")]
    AllAssetsDropped { remaining: usize },

    #[error("panel shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn gap_message(month: &YearMonth, asset: &Option<String>) -> String {
    match asset {
        Some(a) => format!("missing value for asset '{a}' at {month}"),
        None => format!("missing month {month} (gap in dates)"),
    }
}

/// Aligned monthly observations for a fixed set of assets.
///
/// Rows are consecutive calendar months; every cell is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    asset_ids: Vec<String>,
    timestamps: Vec<YearMonth>,
    values: Array2<f64>,
    kind: SeriesKind,
}

impl PanelData {
    /// Validates and builds a panel. `values` is `T x N`.
    pub fn new(
        asset_ids: Vec<String>,
        timestamps: Vec<YearMonth>,
        values: Array2<f64>,
        kind: SeriesKind,
    ) -> Result<Self, IngestError> {
        check_assets(&asset_ids)?;
        if values.dim() != (timestamps.len(), asset_ids.len()) {
            return Err(IngestError::Shape(format!(
                "values are {:?}, expected ({}, {})",
                values.dim(),
                timestamps.len(),
                asset_ids.len()
            )));
        }
        if timestamps.len() < 3 {
            return Err(IngestError::TooFewMonths(timestamps.len()));
        }
        for pair in timestamps.windows(2) {
            if pair[0].succ() != pair[1] {
                return Err(IngestError::Shape(format!(
                    "timestamps {} and {} are not consecutive months",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(((t, i), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(IngestError::Gap {
                month: timestamps[t],
                asset: Some(asset_ids[i].clone()),
            });
        }
        Ok(Self {
            asset_ids,
            timestamps,
            values,
            kind,
        })
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn timestamps(&self) -> &[YearMonth] {
        &self.timestamps
    }

    /// `T x N` matrix of levels.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn n_months(&self) -> usize {
        self.timestamps.len()
    }

    /// Writes the panel in the same CSV schema [`parse_csv`] reads.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IngestError> {
        write_panel_csv(self, &[], out)
    }
}

/// A panel as read from disk, before the missing-data policy is applied.
///
/// Timestamps are strictly increasing but may skip months; missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub asset_ids: Vec<String>,
    pub timestamps: Vec<YearMonth>,
    pub values: Array2<f64>,
    pub kind: SeriesKind,
}

impl From<PanelData> for RawPanel {
    fn from(p: PanelData) -> Self {
        Self {
            asset_ids: p.asset_ids,
            timestamps: p.timestamps,
            values: p.values,
            kind: p.kind,
        }
    }
}

fn check_assets(ids: &[String]) -> Result<(), IngestError> {
    if ids.len() < 2 {
        return Err(IngestError::FewerThanTwoAssets(ids.len()));
    }
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(IngestError::DuplicateAsset(id.clone()));
        }
    }
    Ok(())
}

fn parse_cell(tok: &str) -> Option<Result<f64, ()>> {
    let tok = tok.trim();
    if tok.is_empty() {
        return None;
    }
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(Ok(v)),
        Ok(_) => None,
        Err(_) => Some(Err(())),
    }
}

/// Reads a panel CSV without applying any missing-data policy.
pub fn parse_raw<R: Read>(raw: R, kind: SeriesKind) -> Result<RawPanel, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(raw);

    let header = reader.headers()?.clone();
    let asset_ids: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if let Some(empty) = asset_ids.iter().position(String::is_empty) {
        return Err(IngestError::MalformedRow {
            line: header.position().map_or(1, |p| p.line()),
            reason: format!("empty asset name in header column {}", empty + 2),
        });
    }
    check_assets(&asset_ids)?;
    let n = asset_ids.len();

    let mut timestamps: Vec<YearMonth> = Vec::new();
    let mut cells: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != n + 1 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", n + 1, record.len()),
            });
        }
        let month: YearMonth = record[0]
            .parse()
            .map_err(|e: crate::date::DateParseError| IngestError::MalformedRow {
                line,
                reason: e.to_string(),
            })?;
        if let Some(&previous) = timestamps.last() {
            if month == previous {
                return Err(IngestError::DuplicateTimestamp { line, month });
            }
            if month < previous {
                return Err(IngestError::NonMonotonicDates {
                    line,
                    month,
                    previous,
                });
            }
        }
        timestamps.push(month);
        for (col, tok) in record.iter().enumerate().skip(1) {
            match parse_cell(tok) {
                None => cells.push(f64::NAN),
                Some(Ok(v)) => cells.push(v),
                Some(Err(())) => {
                    return Err(IngestError::MalformedRow {
                        line,
                        reason: format!(
                            "non-numeric value '{}' for asset '{}'",
                            tok.trim(),
                            asset_ids[col - 1]
                        ),
                    })
                }
            }
        }
    }

    let values = Array2::from_shape_vec((timestamps.len(), n), cells)
        .map_err(|e| IngestError::Shape(e.to_string()))?;
    Ok(RawPanel {
        asset_ids,
        timestamps,
        values,
        kind,
    })
}

/// Parses a panel CSV and applies the schema's missing-data policy.
pub fn parse_csv<R: Read>(raw: R, schema: ColumnSchema) -> Result<PanelData, IngestError> {
    let panel = parse_raw(raw, schema.kind)?;
    align_and_fill(panel, schema.missing)
}

/// Expands skipped months into all-missing rows and resolves missing cells per `policy`.
pub fn align_and_fill(panel: RawPanel, policy: MissingPolicy) -> Result<PanelData, IngestError> {
    let RawPanel {
        mut asset_ids,
        timestamps,
        values,
        kind,
    } = panel;
    check_assets(&asset_ids)?;
    let n = asset_ids.len();
    if values.dim() != (timestamps.len(), n) {
        return Err(IngestError::Shape(format!(
            "values are {:?}, expected ({}, {n})",
            values.dim(),
            timestamps.len()
        )));
    }
    let (Some(&first), Some(&last)) = (timestamps.first(), timestamps.last()) else {
        return Err(IngestError::TooFewMonths(0));
    };
    for pair in timestamps.windows(2) {
        if pair[1] <= pair[0] {
            return Err(IngestError::NonMonotonicDates {
                line: 0,
                month: pair[1],
                previous: pair[0],
            });
        }
    }

    let span = first.months_until(last) as usize + 1;
    let full: Vec<YearMonth> = (0..span).map(|k| first.add_months(k as i64)).collect();
    let mut grid = Array2::from_elem((span, n), f64::NAN);
    let mut present = vec![false; span];
    for (row, month) in timestamps.iter().enumerate() {
        let idx = first.months_until(*month) as usize;
        present[idx] = true;
        grid.row_mut(idx).assign(&values.row(row));
    }

    match policy {
        MissingPolicy::Reject => {
            if let Some(idx) = present.iter().position(|p| !p) {
                return Err(IngestError::Gap {
                    month: full[idx],
                    asset: None,
                });
            }
            if let Some(((t, i), _)) = grid.indexed_iter().find(|(_, v)| v.is_nan()) {
                return Err(IngestError::Gap {
                    month: full[t],
                    asset: Some(asset_ids[i].clone()),
                });
            }
        }
        MissingPolicy::ForwardFill => {
            for (i, mut col) in grid.columns_mut().into_iter().enumerate() {
                if col[0].is_nan() {
                    return Err(IngestError::LeadingMissing {
                        asset: asset_ids[i].clone(),
                    });
                }
                for t in 1..span {
                    if col[t].is_nan() {
                        col[t] = col[t - 1];
                    }
                }
            }
        }
        MissingPolicy::DropAsset => {
            let keep: Vec<usize> = (0..n)
                .filter(|&i| grid.column(i).iter().all(|v| !v.is_nan()))
                .collect();
            if keep.len() < 2 {
                return Err(IngestError::AllAssetsDropped {
                    remaining: keep.len(),
                });
            }
            if keep.len() < n {
                grid = grid.select(ndarray::Axis(1), &keep);
                asset_ids = keep.iter().map(|&i| asset_ids[i].clone()).collect();
            }
        }
    }

    PanelData::new(asset_ids, full, grid, kind)
}

/// Writes `panel` as CSV preceded by `#`-prefixed comment lines.
pub fn write_panel_csv<W: Write>(
    panel: &PanelData,
    comments: &[String],
    mut out: W,
) -> Result<(), IngestError> {
    crate::write_comments(&mut out, comments)?;
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_string()];
    header.extend(panel.asset_ids.iter().cloned());
    writer.write_record(&header)?;
    for (t, month) in panel.timestamps.iter().enumerate() {
        let mut row = Vec::with_capacity(panel.n_assets() + 1);
        row.push(month.to_string());
        row.extend(panel.values.row(t).iter().map(|&v| fmt_f64(v)));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
