//! Monthly returns from panel levels.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, Axis};

use crate::date::YearMonth;
use crate::ingest::PanelData;
use crate::{fmt_f64, write_comments};

/// How consecutive levels are turned into a return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReturnOperator {
    /// `ln(P(t) / P(t-1))`.
    #[default]
    LogReturn,
    /// `P(t) - P(t-1)`, for yields near or below zero.
    FirstDifference,
}

impl fmt::Display for ReturnOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LogReturn => "log_return",
            Self::FirstDifference => "first_difference",
        })
    }
}

impl FromStr for ReturnOperator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log" | "log_return" => Ok(Self::LogReturn),
            "diff" | "first_difference" => Ok(Self::FirstDifference),
            other => Err(format!(
                "unknown return operator '{other}' (expected log|diff)"
            )),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReturnsError {
    #[error("asset '{asset}' has non-positive level {value} at {month}; log returns need positive levels")]
    NonPositiveLevel {
        asset: String,
        month: YearMonth,
        value: f64,
    },

    #[error("non-finite return for asset '{asset}' at {month}")]
    NonFinite { asset: String, month: YearMonth },

    #[error("return matrix shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(T-1) x N` returns; row `t` spans month `t-1` to month `t` and is stamped with month `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    asset_ids: Vec<String>,
    timestamps: Vec<YearMonth>,
    values: Array2<f64>,
    operator: ReturnOperator,
}

impl ReturnMatrix {
    /// Builds a return matrix from precomputed values.
    pub fn new(
        asset_ids: Vec<String>,
        timestamps: Vec<YearMonth>,
        values: Array2<f64>,
        operator: ReturnOperator,
    ) -> Result<Self, ReturnsError> {
        if values.dim() != (timestamps.len(), asset_ids.len()) {
            return Err(ReturnsError::Shape(format!(
                "values are {:?}, expected ({}, {})",
                values.dim(),
                timestamps.len(),
                asset_ids.len()
            )));
        }
        for pair in timestamps.windows(2) {
            if pair[0].succ() != pair[1] {
                return Err(ReturnsError::Shape(format!(
                    "timestamps {} and {} are not consecutive months",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(((t, i), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(ReturnsError::NonFinite {
                asset: asset_ids[i].clone(),
                month: timestamps[t],
            });
        }
        Ok(Self {
            asset_ids,
            timestamps,
            values,
            operator,
        })
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn timestamps(&self) -> &[YearMonth] {
        &self.timestamps
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn operator(&self) -> ReturnOperator {
        self.operator
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Row index of `month`, if present.
    pub fn index_of(&self, month: YearMonth) -> Option<usize> {
        let first = *self.timestamps.first()?;
        let idx = first.months_until(month);
        (0..self.len() as i64)
            .contains(&idx)
            .then_some(idx as usize)
    }

    /// Returns a copy with asset columns reordered by `order`.
    pub fn permute_assets(&self, order: &[usize]) -> Self {
        Self {
            asset_ids: order.iter().map(|&i| self.asset_ids[i].clone()).collect(),
            timestamps: self.timestamps.clone(),
            values: self.values.select(Axis(1), order),
            operator: self.operator,
        }
    }

    /// Writes `date,<assets...>` preceded by a `# operator=...` comment.
    pub fn write_csv<W: Write>(&self, comments: &[String], mut out: W) -> Result<(), ReturnsError> {
        let mut lines = comments.to_vec();
        lines.push(format!("operator={}", self.operator));
        write_comments(&mut out, &lines)?;
        writeln!(out, "date,{}", self.asset_ids.join(","))?;
        for (t, month) in self.timestamps.iter().enumerate() {
            let row: Vec<String> = self.values.row(t).iter().map(|&v| fmt_f64(v)).collect();
            writeln!(out, "{month},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Computes per-asset returns between consecutive months.
pub fn compute_returns(
    panel: &PanelData,
    operator: ReturnOperator,
) -> Result<ReturnMatrix, ReturnsError> {
    let levels = panel.values();
    let (t_len, n) = levels.dim();

    if operator == ReturnOperator::LogReturn {
        if let Some(((t, i), &value)) = levels.indexed_iter().find(|(_, &v)| v <= 0.0) {
            return Err(ReturnsError::NonPositiveLevel {
                asset: panel.asset_ids()[i].clone(),
                month: panel.timestamps()[t],
                value,
            });
        }
    }

    let mut values = Array2::zeros((t_len - 1, n));
    for i in 0..n {
        let col = levels.column(i);
        for t in 1..t_len {
            values[[t - 1, i]] = match operator {
                ReturnOperator::LogReturn => (col[t] / col[t - 1]).ln(),
                ReturnOperator::FirstDifference => col[t] - col[t - 1],
            };
        }
    }

    ReturnMatrix::new(
        panel.asset_ids().to_vec(),
        panel.timestamps()[1..].to_vec(),
        values,
        operator,
    )
}
