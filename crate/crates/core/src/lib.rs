//! Systemic-risk analysis of monthly asset panels.
//!
//! The pipeline runs:
//!
//! 1. [`ingest`]: parse and align a monthly panel of prices or yields.
//! 2. [`returns`]: log returns (or first differences) per asset.
//! 3. [`spectra`]: rolling-window correlation matrices and their eigenvalues,
//!    reduced to the normalized sum of the top-k eigenvalues.
//! 4. [`cars`]: the backward time derivative of that sum and the conditional
//!    average rolling sum (CARS) of its positive increments.
//! 5. [`signal`]: autocorrelation, lagged cross-correlation, dominant period
//!    and prominence-based peak detection on CARS series.
//!
//! [`synth`] generates one-factor panels with known ground truth for testing.

use std::io::{self, Write};

pub mod cars;
pub mod date;
pub mod ingest;
pub mod returns;
pub mod signal;
pub mod spectra;
pub mod synth;

pub use cars::{CarsMode, RiskConfig, RiskSeries};
pub use date::YearMonth;
pub use ingest::{ColumnSchema, MissingPolicy, PanelData, SeriesKind};
pub use returns::{ReturnMatrix, ReturnOperator};
pub use signal::{LagCorrelation, Peak, TimeSeries};
pub use spectra::{CorrelationMatrix, EigenSpectrum};
pub use synth::{BetaSchedule, SynthSpec};

/// Formats a float with the shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes each line as a `# `-prefixed comment.
pub fn write_comments<W: Write>(out: &mut W, lines: &[String]) -> io::Result<()> {
    for line in lines {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}
