//! The CARS (conditional average rolling sum) risk indicator.
//!
//! Given the normalized top-k eigenvalue sum `s(t)` of rolling correlation
//! windows, the indicator takes its backward difference `d(t) = s(t) - s(t-1)`
//! and accumulates only the positive increments over a family of trailing
//! windows `ω_1, ..., ω_W` ending at `t`, where `ω_k` covers the last `k`
//! months and contributes its positive sum scaled by `1/k`:
//!
//! ```text
//! CARS(t) = Σ_{k=1..W} (1/k) Σ_{s ∈ ω_k, d(s) > 0} d(s)
//! ```
//!
//! Windows reaching before the first observation cover only the observed
//! months but keep their nominal `1/k` weight. Collecting terms gives each
//! event `j` months in the past the weight `H_W - H_j` (harmonic numbers),
//! so recent increments count most and an increment drops out entirely
//! after `W` months.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::date::YearMonth;
use crate::returns::ReturnMatrix;
use crate::signal::TimeSeries;
use crate::spectra::{rolling_spectra, SpectraError, TopSumSeries};
use crate::{fmt_f64, write_comments};

#[derive(Debug, thiserror::Error)]
pub enum CarsError {
    #[error("series of length {0} is too short to differentiate; need at least 2")]
    SeriesTooShort(usize),

    #[error("CARS window must be at least 1 month, got {0}")]
    InvalidWindow(usize),

    #[error("empty increment series")]
    Empty,
}

/// Failure anywhere in the returns → spectra → CARS chain.
#[derive(Debug, thiserror::Error)]
pub enum RiskError {
    #[error("rolling_spectra: {0}")]
    Spectra(#[from] SpectraError),

    #[error("cars: {0}")]
    Cars(#[from] CarsError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RiskError {
    /// Pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Spectra(_) => "rolling_spectra",
            Self::Cars(_) => "cars",
            Self::Io(_) => "write",
        }
    }
}

/// Window family used by [`cars_with_mode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CarsMode {
    /// Trailing windows of every length `1..=W`; harmonic memory weights.
    #[default]
    Telescoping,
    /// The single trailing window of length `W`; flat weight `1/W`.
    Flat,
}

impl fmt::Display for CarsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Telescoping => "telescoping",
            Self::Flat => "flat",
        })
    }
}

impl FromStr for CarsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "telescoping" => Ok(Self::Telescoping),
            "flat" => Ok(Self::Flat),
            other => Err(format!(
                "unknown CARS mode '{other}' (expected telescoping|flat)"
            )),
        }
    }
}

/// Parameters of the risk pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RiskConfig {
    /// Correlation window length in months.
    pub window_len: usize,
    /// Number of leading eigenvalues summed.
    pub top_k: usize,
    /// CARS memory `W` in months.
    pub cars_window: usize,
    pub mode: CarsMode,
    /// Months between consecutive correlation windows.
    pub stride: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            window_len: 36,
            top_k: 4,
            cars_window: 36,
            mode: CarsMode::Telescoping,
            stride: 1,
        }
    }
}

impl RiskConfig {
    /// A config whose CARS memory equals the correlation window.
    pub fn with_window(window_len: usize) -> Self {
        Self {
            window_len,
            cars_window: window_len,
            ..Self::default()
        }
    }

    /// `key=value` lines describing the config, for output headers.
    pub fn describe(&self) -> Vec<String> {
        vec![
            format!("window={}", self.window_len),
            format!("top_k={}", self.top_k),
            format!("cars_window={}", self.cars_window),
            format!("cars_mode={}", self.mode),
            format!("stride={}", self.stride),
        ]
    }
}

/// Normalized eigenvalue sums, their increments, and CARS for one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSeries {
    /// Window-end month of each `lambda_sum` entry.
    pub timestamps: Vec<YearMonth>,
    pub lambda_sum: Vec<f64>,
    /// `lambda_dot[i]` is stamped with `timestamps[i + 1]`.
    pub lambda_dot: Vec<f64>,
    /// Aligned with `lambda_dot`.
    pub cars: Vec<f64>,
    pub config: RiskConfig,
}

impl RiskSeries {
    /// Months at which `lambda_dot` and `cars` are defined.
    pub fn cars_timestamps(&self) -> &[YearMonth] {
        &self.timestamps[1..]
    }

    pub fn cars_series(&self) -> TimeSeries {
        TimeSeries::new(self.cars_timestamps().to_vec(), self.cars.clone())
            .expect("cars timestamps and values have equal length")
    }

    /// Writes `date,lambda_sum,lambda_dot,cars`; the first row has no increment.
    pub fn write_csv<W: Write>(&self, comments: &[String], mut out: W) -> std::io::Result<()> {
        write_comments(&mut out, comments)?;
        writeln!(out, "date,lambda_sum,lambda_dot,cars")?;
        for (i, month) in self.timestamps.iter().enumerate() {
            let sum = fmt_f64(self.lambda_sum[i]);
            if i == 0 {
                writeln!(out, "{month},{sum},,")?;
            } else {
                writeln!(
                    out,
                    "{month},{sum},{},{}",
                    fmt_f64(self.lambda_dot[i - 1]),
                    fmt_f64(self.cars[i - 1])
                )?;
            }
        }
        Ok(())
    }
}

/// Backward first difference with a unit time step.
pub fn time_derivative(series: &[f64]) -> Result<Vec<f64>, CarsError> {
    if series.len() < 2 {
        return Err(CarsError::SeriesTooShort(series.len()));
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Memory weight of an increment `j` months old, for `j` in `0..w`.
fn memory_weights(w: usize, mode: CarsMode) -> Vec<f64> {
    match mode {
        CarsMode::Flat => vec![1.0 / w as f64; w],
        CarsMode::Telescoping => {
            // H_W - H_j = Σ_{u=j+1..W} 1/u, accumulated from the tail.
            let mut weights = vec![0.0; w];
            let mut acc = 0.0;
            for j in (0..w).rev() {
                acc += 1.0 / (j + 1) as f64;
                weights[j] = acc;
            }
            weights
        }
    }
}

/// CARS with the default telescoping window family.
pub fn cars(lambda_dot: &[f64], w: usize) -> Result<Vec<f64>, CarsError> {
    cars_with_mode(lambda_dot, w, CarsMode::Telescoping)
}

/// CARS over `lambda_dot` with memory `w` and the given window family.
pub fn cars_with_mode(lambda_dot: &[f64], w: usize, mode: CarsMode) -> Result<Vec<f64>, CarsError> {
    if w < 1 {
        return Err(CarsError::InvalidWindow(w));
    }
    if lambda_dot.is_empty() {
        return Err(CarsError::Empty);
    }
    let weights = memory_weights(w, mode);
    let positive: Vec<f64> = lambda_dot.iter().map(|&d| d.max(0.0)).collect();
    Ok((0..positive.len())
        .map(|t| {
            let depth = w.min(t + 1);
            (0..depth).map(|j| positive[t - j] * weights[j]).sum()
        })
        .collect())
}

/// Assembles a [`RiskSeries`] from an already computed top-k sum series.
pub fn risk_from_top_sums(top: &TopSumSeries, config: RiskConfig) -> Result<RiskSeries, CarsError> {
    let lambda_dot = time_derivative(&top.values)?;
    let cars = cars_with_mode(&lambda_dot, config.cars_window, config.mode)?;
    Ok(RiskSeries {
        timestamps: top.timestamps.clone(),
        lambda_sum: top.values.clone(),
        lambda_dot,
        cars,
        config,
    })
}

/// Rolling spectra → eigenvalue-sum increments → CARS.
pub fn risk_series(returns: &ReturnMatrix, config: RiskConfig) -> Result<RiskSeries, RiskError> {
    if config.cars_window < 1 {
        return Err(CarsError::InvalidWindow(config.cars_window).into());
    }
    let top = rolling_spectra(returns, config.window_len, config.top_k, config.stride)?;
    Ok(risk_from_top_sums(&top, config)?)
}
