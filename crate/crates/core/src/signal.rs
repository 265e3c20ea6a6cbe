//! Lag correlations, dominant periods, and peak detection on monthly series.
//!
//! Every lag is a true Pearson correlation of its own overlap: both slices are
//! de-meaned and scaled by their own standard deviations, so values stay in
//! `[-1, 1]` at the cost of a non-Toeplitz estimator.

use std::io::Write;

use crate::cars::RiskSeries;
use crate::date::YearMonth;
use crate::{fmt_f64, write_comments};

#[derive(Debug, thiserror::Error)]
pub enum SignalError {
    #[error("series is constant; correlation is undefined")]
    ConstantSeries,

    #[error("max_lag {max_lag} too large for a series of length {len}; need length > max_lag + 2")]
    LagTooLarge { max_lag: usize, len: usize },

    #[error("inputs are misaligned: {0}")]
    MisalignedInputs(String),

    #[error("split {split} is not strictly inside {first}..={last}")]
    SplitOutOfRange {
        split: YearMonth,
        first: YearMonth,
        last: YearMonth,
    },

    #[error("series share no common timestamps")]
    NoCommonTimestamps,

    #[error("empty series")]
    Empty,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Values stamped with strictly increasing months.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<YearMonth>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<YearMonth>, values: Vec<f64>) -> Result<Self, SignalError> {
        if timestamps.len() != values.len() {
            return Err(SignalError::MisalignedInputs(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(pair) = timestamps.windows(2).find(|p| p[1] <= p[0]) {
            return Err(SignalError::MisalignedInputs(format!(
                "timestamps not increasing at {} -> {}",
                pair[0], pair[1]
            )));
        }
        Ok(Self { timestamps, values })
    }

    pub fn timestamps(&self) -> &[YearMonth] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Appends `other`, which must start after `self` ends.
    pub fn concat(&self, other: &Self) -> Result<Self, SignalError> {
        let mut timestamps = self.timestamps.clone();
        timestamps.extend_from_slice(&other.timestamps);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(timestamps, values)
    }
}

/// Correlation as a function of lag.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCorrelation {
    /// Increasing lags in months.
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
    /// Lag of the largest value; ties go to the smaller `|lag|`, then the negative lag.
    pub argmax_lag: i64,
    /// Number of overlapping pairs behind each value.
    pub n_effective: Vec<usize>,
}

impl LagCorrelation {
    fn from_parts(lags: Vec<i64>, values: Vec<f64>, n_effective: Vec<usize>) -> Self {
        let mut order: Vec<usize> = (0..lags.len()).collect();
        order.sort_by_key(|&i| (lags[i].abs(), lags[i]));
        let mut best = order[0];
        for &i in &order[1..] {
            if values[i] > values[best] {
                best = i;
            }
        }
        Self {
            argmax_lag: lags[best],
            lags,
            values,
            n_effective,
        }
    }

    /// Correlation at `lag`, if computed.
    pub fn value_at(&self, lag: i64) -> Option<f64> {
        let first = *self.lags.first()?;
        let idx = usize::try_from(lag - first).ok()?;
        self.values.get(idx).copied()
    }

    pub fn max_value(&self) -> f64 {
        self.value_at(self.argmax_lag).unwrap_or(f64::NAN)
    }

    /// Writes `lag,value,n_effective`.
    pub fn write_csv<W: Write>(&self, comments: &[String], mut out: W) -> std::io::Result<()> {
        write_comments(&mut out, comments)?;
        writeln!(out, "lag,value,n_effective")?;
        for ((lag, v), n) in self.lags.iter().zip(&self.values).zip(&self.n_effective) {
            writeln!(out, "{lag},{},{n}", fmt_f64(*v))?;
        }
        Ok(())
    }
}

/// Pearson correlation of two equal-length slices; 0 when either slice has no variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn check_lag(len: usize, max_lag: usize) -> Result<(), SignalError> {
    if len <= max_lag + 2 {
        return Err(SignalError::LagTooLarge { max_lag, len });
    }
    Ok(())
}

/// Correlation of `a(t)` with `b(t + lag)` over their overlap.
fn lagged_pearson(a: &[f64], b: &[f64], lag: i64) -> (f64, usize) {
    let len = a.len();
    let shift = lag.unsigned_abs() as usize;
    let n = len - shift;
    let (x, y) = if lag >= 0 {
        (&a[..n], &b[shift..])
    } else {
        (&a[shift..], &b[..n])
    };
    (pearson(x, y), n)
}

/// Autocorrelation for lags `0..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<LagCorrelation, SignalError> {
    check_lag(series.len(), max_lag)?;
    if is_constant(series) {
        return Err(SignalError::ConstantSeries);
    }
    let lags: Vec<i64> = (0..=max_lag as i64).collect();
    let (mut values, n_effective): (Vec<f64>, Vec<usize>) = lags
        .iter()
        .map(|&l| lagged_pearson(series, series, l))
        .unzip();
    values[0] = 1.0;
    Ok(LagCorrelation::from_parts(lags, values, n_effective))
}

/// Cross-correlation for lags `-max_lag..=max_lag`; positive lags mean `b` trails `a`.
pub fn cross_correlation(
    a: &[f64],
    b: &[f64],
    max_lag: usize,
) -> Result<LagCorrelation, SignalError> {
    if a.len() != b.len() {
        return Err(SignalError::MisalignedInputs(format!(
            "lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    check_lag(a.len(), max_lag)?;
    if is_constant(a) || is_constant(b) {
        return Err(SignalError::ConstantSeries);
    }
    let max = max_lag as i64;
    let lags: Vec<i64> = (-max..=max).collect();
    let (values, n_effective): (Vec<f64>, Vec<usize>) =
        lags.iter().map(|&l| lagged_pearson(a, b, l)).unzip();
    Ok(LagCorrelation::from_parts(lags, values, n_effective))
}

/// [`cross_correlation`] of two timestamped series that must share identical timestamps.
pub fn cross_correlation_series(
    a: &TimeSeries,
    b: &TimeSeries,
    max_lag: usize,
) -> Result<LagCorrelation, SignalError> {
    if a.timestamps != b.timestamps {
        return Err(SignalError::MisalignedInputs("timestamps differ".into()));
    }
    cross_correlation(&a.values, &b.values, max_lag)
}

/// Restricts both series to the months they have in common.
pub fn align_common(
    a: &TimeSeries,
    b: &TimeSeries,
) -> Result<(TimeSeries, TimeSeries), SignalError> {
    let (mut i, mut j) = (0, 0);
    let (mut ts, mut va, mut vb) = (Vec::new(), Vec::new(), Vec::new());
    while i < a.len() && j < b.len() {
        match a.timestamps[i].cmp(&b.timestamps[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                ts.push(a.timestamps[i]);
                va.push(a.values[i]);
                vb.push(b.values[j]);
                i += 1;
                j += 1;
            }
        }
    }
    if ts.is_empty() {
        return Err(SignalError::NoCommonTimestamps);
    }
    Ok((TimeSeries::new(ts.clone(), va)?, TimeSeries::new(ts, vb)?))
}

/// Splits into entries before `split` and entries at or after it.
pub fn split_series(
    series: &TimeSeries,
    split: YearMonth,
) -> Result<(TimeSeries, TimeSeries), SignalError> {
    let (Some(&first), Some(&last)) = (series.timestamps.first(), series.timestamps.last()) else {
        return Err(SignalError::Empty);
    };
    if split <= first || split > last {
        return Err(SignalError::SplitOutOfRange { split, first, last });
    }
    let cut = series.timestamps.partition_point(|&m| m < split);
    let before = TimeSeries {
        timestamps: series.timestamps[..cut].to_vec(),
        values: series.values[..cut].to_vec(),
    };
    let after = TimeSeries {
        timestamps: series.timestamps[cut..].to_vec(),
        values: series.values[cut..].to_vec(),
    };
    Ok((before, after))
}

/// Smallest lag `>= 2` that is a strict local maximum with a positive value.
pub fn dominant_period(lagcorr: &LagCorrelation) -> Option<usize> {
    let v = &lagcorr.values;
    (1..v.len().saturating_sub(1))
        .filter(|&i| lagcorr.lags[i] >= 2)
        .find(|&i| v[i] > 0.0 && v[i] > v[i - 1] && v[i] > v[i + 1])
        .map(|i| lagcorr.lags[i] as usize)
}

/// A local maximum of a CARS series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub month: YearMonth,
    pub value: f64,
    pub prominence: f64,
}

/// Index-level peak candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakIndex {
    pub index: usize,
    pub value: f64,
    pub prominence: f64,
}

/// Interior local maxima; a flat top is reported at its first sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of `x[peak]` above the higher of its two bases, where each base is the
/// lowest point between the peak and the nearest strictly higher sample (or the edge).
fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Local maxima with prominence `>= min_prominence`, thinned so that no two kept
/// peaks are closer than `min_separation` samples. Larger peaks win; ties go to
/// the earlier one. Output is in index order.
pub fn find_peaks(x: &[f64], min_prominence: f64, min_separation: usize) -> Vec<PeakIndex> {
    let mut candidates: Vec<PeakIndex> = local_maxima(x)
        .into_iter()
        .map(|index| PeakIndex {
            index,
            value: x[index],
            prominence: prominence(x, index),
        })
        .filter(|p| p.prominence >= min_prominence)
        .collect();

    candidates.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    let mut kept: Vec<PeakIndex> = Vec::new();
    for c in candidates {
        if kept
            .iter()
            .all(|k| k.index.abs_diff(c.index) >= min_separation)
        {
            kept.push(c);
        }
    }
    kept.sort_by_key(|p| p.index);
    kept
}

/// Peaks of a timestamped series.
pub fn detect_peaks_series(
    series: &TimeSeries,
    min_prominence: f64,
    min_separation: usize,
) -> Vec<Peak> {
    find_peaks(&series.values, min_prominence, min_separation)
        .into_iter()
        .map(|p| Peak {
            month: series.timestamps[p.index],
            value: p.value,
            prominence: p.prominence,
        })
        .collect()
}

/// Peaks of the CARS column of a risk series.
pub fn detect_peaks(risk: &RiskSeries, min_prominence: f64, min_separation: usize) -> Vec<Peak> {
    detect_peaks_series(&risk.cars_series(), min_prominence, min_separation)
}

/// The peak with the largest prominence; ties go to the earlier month.
pub fn most_prominent(peaks: &[Peak]) -> Option<Peak> {
    peaks.iter().copied().reduce(|best, p| {
        if p.prominence > best.prominence {
            p
        } else {
            best
        }
    })
}

/// Writes `peak_date,value,prominence`.
pub fn write_peaks_csv<W: Write>(
    peaks: &[Peak],
    comments: &[String],
    mut out: W,
) -> std::io::Result<()> {
    write_comments(&mut out, comments)?;
    writeln!(out, "peak_date,value,prominence")?;
    for p in peaks {
        writeln!(
            out,
            "{},{},{}",
            p.month,
            fmt_f64(p.value),
            fmt_f64(p.prominence)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cars::cars;

    fn months(n: usize) -> Vec<YearMonth> {
        let start = YearMonth::new(2000, 1).unwrap();
        (0..n).map(|k| start.add_months(k as i64)).collect()
    }

    fn sinusoid(period: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / period).sin())
            .collect()
    }

    #[test]
    fn lag_zero_is_one() {
        let x = [0.3, 1.2, -0.4, 0.9, 2.2, -1.0];
        let ac = autocorrelation(&x, 3).unwrap();
        assert_eq!(ac.values[0], 1.0);
        assert_eq!(ac.lags, vec![0, 1, 2, 3]);
        assert_eq!(ac.n_effective, vec![6, 5, 4, 3]);
    }

    #[test]
    fn sinusoid_period_17() {
        let x = sinusoid(17.0, 200);
        let ac = autocorrelation(&x, 34).unwrap();
        let v17 = ac.value_at(17).unwrap();
        assert!(v17 > 0.99, "{v17}");
        assert!(v17 > ac.value_at(16).unwrap() && v17 > ac.value_at(18).unwrap());
        assert_eq!(dominant_period(&ac), Some(17));
    }

    #[test]
    fn alternating_sequence() {
        let x: Vec<f64> = (0..20)
            .map(|t| if t % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let ac = autocorrelation(&x, 4).unwrap();
        assert_eq!(ac.value_at(1), Some(-1.0));
        assert_eq!(ac.value_at(2), Some(1.0));
    }

    #[test]
    fn autocorrelation_errors() {
        assert!(matches!(
            autocorrelation(&[1.0; 10], 2),
            Err(SignalError::ConstantSeries)
        ));
        let x = [1.0, 2.0, 0.5, 3.0, 1.0];
        assert!(matches!(
            autocorrelation(&x, 3),
            Err(SignalError::LagTooLarge { .. })
        ));
        assert!(autocorrelation(&x, 2).is_ok());
    }

    #[test]
    fn decaying_autocorrelation_has_no_period() {
        let lc = LagCorrelation::from_parts(
            (0..10).collect(),
            (0..10).map(|l| 0.8f64.powi(l)).collect(),
            vec![50; 10],
        );
        assert_eq!(dominant_period(&lc), None);
    }

    #[test]
    fn self_cross_correlation_peaks_at_zero() {
        let x = [0.3, 1.2, -0.4, 0.9, 2.2, -1.0, 0.0, 0.7];
        let cc = cross_correlation(&x, &x, 3).unwrap();
        assert_eq!(cc.argmax_lag, 0);
        assert!((cc.max_value() - 1.0).abs() < 1e-15);
        assert_eq!(cc.lags.len(), 7);
    }

    #[test]
    fn shifted_copy_detected() {
        let base: Vec<f64> = (0..80).map(|t| ((t * 7919 + 13) % 101) as f64).collect();
        let a = base[3..].to_vec();
        let b = base[..base.len() - 3].to_vec();
        // b(t) = a(t - 3): b trails a by 3 months.
        let cc = cross_correlation(&a, &b, 6).unwrap();
        assert_eq!(cc.argmax_lag, 3);
        assert!((cc.max_value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_correlation_errors() {
        let x = [1.0, 2.0, 0.0, 4.0, 1.0];
        assert!(matches!(
            cross_correlation(&x, &x[..4], 1),
            Err(SignalError::MisalignedInputs(_))
        ));
        assert!(matches!(
            cross_correlation(&x, &[2.0; 5], 1),
            Err(SignalError::ConstantSeries)
        ));
        assert!(matches!(
            cross_correlation(&x, &x, 3),
            Err(SignalError::LagTooLarge { .. })
        ));
    }

    #[test]
    fn split_partitions_series() {
        let ts = months(192);
        let s = TimeSeries::new(ts.clone(), (0..192).map(f64::from).collect()).unwrap();
        let split = YearMonth::new(2010, 1).unwrap();
        let (before, after) = split_series(&s, split).unwrap();
        assert_eq!(before.len(), 120);
        assert_eq!(after.len(), 72);
        assert_eq!(before.concat(&after).unwrap(), s);

        let early = YearMonth::new(1999, 6).unwrap();
        assert!(matches!(
            split_series(&s, early),
            Err(SignalError::SplitOutOfRange { .. })
        ));
        assert!(matches!(
            split_series(&s, ts[0]),
            Err(SignalError::SplitOutOfRange { .. })
        ));
        assert!(split_series(&s, ts[191]).is_ok());
    }

    #[test]
    fn align_common_intersects() {
        let a = TimeSeries::new(months(5), vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let b = TimeSeries::new(months(8)[2..].to_vec(), vec![9.0; 6]).unwrap();
        let (x, y) = align_common(&a, &b).unwrap();
        assert_eq!(x.values(), [3.0, 4.0, 5.0]);
        assert_eq!(y.timestamps(), x.timestamps());

        let later: Vec<YearMonth> = months(20)[10..].to_vec();
        let c = TimeSeries::new(later, vec![0.0; 10]).unwrap();
        assert!(matches!(
            align_common(&a, &c),
            Err(SignalError::NoCommonTimestamps)
        ));
    }

    #[test]
    fn impulse_response_has_one_peak() {
        let c = cars(&[0.0, 0.0, 0.4, 0.0, 0.0, 0.0, 0.0], 3).unwrap();
        let peaks = find_peaks(&c, 0.0, 1);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].index, 2);
        assert!((peaks[0].prominence - c[2]).abs() < 1e-15);
    }

    #[test]
    fn equal_peaks_tie_to_earlier() {
        let x = [0.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let peaks = find_peaks(&x, 0.0, 6);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].index, 1);
        assert_eq!(find_peaks(&x, 0.0, 2).len(), 2);
    }

    #[test]
    fn prominence_separates_major_and_minor() {
        let x = [0.0, 5.0, 1.0, 2.0, 1.5, 3.0, 0.0];
        let all = find_peaks(&x, 0.0, 1);
        let proms: Vec<f64> = all.iter().map(|p| p.prominence).collect();
        assert_eq!(
            all.iter().map(|p| p.index).collect::<Vec<_>>(),
            vec![1, 3, 5]
        );
        assert_eq!(proms, vec![5.0, 0.5, 2.0]);
        let major = find_peaks(&x, 1.0, 1);
        assert_eq!(
            major.iter().map(|p| p.index).collect::<Vec<_>>(),
            vec![1, 5]
        );
    }

    #[test]
    fn plateau_peak_reported_at_start() {
        let x = [0.0, 2.0, 2.0, 2.0, 1.0];
        let peaks = find_peaks(&x, 0.0, 1);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].index, 1);
        assert!(find_peaks(&[0.0, 1.0, 1.0], 0.0, 1).is_empty());
    }

    #[test]
    fn csv_writers() {
        let peaks = vec![Peak {
            month: YearMonth::new(2008, 11).unwrap(),
            value: 0.5,
            prominence: 0.25,
        }];
        let mut buf = Vec::new();
        write_peaks_csv(&peaks, &["window=36".into()], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# window=36\npeak_date,value,prominence\n2008-11,0.5,0.25\n"
        );
        let ac = autocorrelation(&[1.0, 3.0, 2.0, 5.0], 1).unwrap();
        let mut buf = Vec::new();
        ac.write_csv(&[], &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("lag,value,n_effective\n0,1,4\n1,"));
    }
}
