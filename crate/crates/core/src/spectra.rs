//! Rolling-window correlation matrices and their eigen-spectra.
//!
//! Correlations use population normalization (divide by the window length);
//! the normalization cancels in the ratio, so this matches any other choice.
//! Eigen-decomposition is cyclic Jacobi, which is unconditionally stable for
//! symmetric input and accurate to working precision for the small matrices
//! (tens of assets) this crate targets.

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::date::YearMonth;
use crate::returns::ReturnMatrix;
use crate::{fmt_f64, write_comments};

/// Maximum number of full Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// Off-diagonal Frobenius norm per unit dimension below which Jacobi stops.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Components with smaller magnitude are skipped when fixing eigenvector signs.
const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum SpectraError {
    #[error("asset '{asset}' is constant over the window ending {window_end}")]
    ZeroVariance {
        asset: String,
        window_end: YearMonth,
    },

    #[error("window of {window_len} months ending {window_end} does not fit in the return series ({available} months available)")]
    WindowOutOfRange {
        window_end: YearMonth,
        window_len: usize,
        available: usize,
    },

    #[error("window length {0} is too short; need at least 3 months")]
    WindowTooShort(usize),

    #[error("stride must be at least 1")]
    InvalidStride,

    #[error("top_k = {k} is outside 1..={n}")]
    InvalidTopK { k: usize, n: usize },

    #[error(
        "Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})"
    )]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("not a valid correlation matrix: {0}")]
    InvalidMatrix(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Symmetric `N x N` correlation matrix of one return window.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: Array2<f64>,
    window_end: YearMonth,
    window_len: usize,
}

impl CorrelationMatrix {
    /// Wraps externally built entries after checking shape, symmetry, unit diagonal and bounds.
    pub fn from_entries(
        entries: Array2<f64>,
        window_end: YearMonth,
        window_len: usize,
    ) -> Result<Self, SpectraError> {
        let (rows, cols) = entries.dim();
        if rows != cols || rows == 0 {
            return Err(SpectraError::InvalidMatrix(format!("shape {rows}x{cols}")));
        }
        for i in 0..rows {
            if entries[[i, i]] != 1.0 {
                return Err(SpectraError::InvalidMatrix(format!(
                    "diagonal entry {i} is not 1"
                )));
            }
            for j in 0..i {
                let v = entries[[i, j]];
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                    return Err(SpectraError::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v}"
                    )));
                }
                if v != entries[[j, i]] {
                    return Err(SpectraError::InvalidMatrix(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            window_end,
            window_len,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn window_end(&self) -> YearMonth {
        self.window_end
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }
}

/// Eigenvalues in descending order with matching unit eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<f64>,
    window_end: YearMonth,
}

impl EigenSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` pairs with `eigenvalues()[i]`.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    pub fn window_end(&self) -> YearMonth {
        self.window_end
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Normalized top-k eigenvalue sums, one per rolling window.
#[derive(Debug, Clone, PartialEq)]
pub struct TopSumSeries {
    /// Month at which each window ends.
    pub timestamps: Vec<YearMonth>,
    pub values: Vec<f64>,
    pub window_len: usize,
    pub k: usize,
    pub stride: usize,
}

fn check_window(returns: &ReturnMatrix, end: usize, window_len: usize) -> Result<(), SpectraError> {
    if window_len < 3 {
        return Err(SpectraError::WindowTooShort(window_len));
    }
    if end >= returns.len() || end + 1 < window_len {
        let window_end = returns
            .timestamps()
            .first()
            .map_or(YearMonth::new(0, 1).unwrap(), |m| m.add_months(end as i64));
        return Err(SpectraError::WindowOutOfRange {
            window_end,
            window_len,
            available: returns.len(),
        });
    }
    Ok(())
}

/// Correlation matrix of the `window_len` returns ending at `window_end` (inclusive).
pub fn correlation(
    returns: &ReturnMatrix,
    window_end: YearMonth,
    window_len: usize,
) -> Result<CorrelationMatrix, SpectraError> {
    let end = match returns.index_of(window_end) {
        Some(idx) => idx,
        None => {
            return Err(SpectraError::WindowOutOfRange {
                window_end,
                window_len,
                available: returns.len(),
            })
        }
    };
    correlation_at(returns, end, window_len)
}

/// Like [`correlation`], addressing the window end by row index.
pub fn correlation_at(
    returns: &ReturnMatrix,
    end: usize,
    window_len: usize,
) -> Result<CorrelationMatrix, SpectraError> {
    check_window(returns, end, window_len)?;
    let start = end + 1 - window_len;
    let window_end = returns.timestamps()[end];
    let slice = returns.values().slice(ndarray::s![start..=end, ..]);
    let n = returns.n_assets();

    let mut deviations = Array2::<f64>::zeros((window_len, n));
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let col = slice.column(i);
        if col.iter().all(|&v| v == col[0]) {
            return Err(SpectraError::ZeroVariance {
                asset: returns.asset_ids()[i].clone(),
                window_end,
            });
        }
        let mean = col.sum() / window_len as f64;
        let mut ss = 0.0;
        for (t, &v) in col.iter().enumerate() {
            let d = v - mean;
            deviations[[t, i]] = d;
            ss += d * d;
        }
        if ss <= 0.0 {
            return Err(SpectraError::ZeroVariance {
                asset: returns.asset_ids()[i].clone(),
                window_end,
            });
        }
        norms[i] = ss.sqrt();
    }

    let mut entries = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let cross: f64 = deviations
                .column(i)
                .iter()
                .zip(deviations.column(j).iter())
                .map(|(a, b)| a * b)
                .sum();
            let c = (cross / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            entries[[i, j]] = c;
            entries[[j, i]] = c;
        }
    }

    Ok(CorrelationMatrix {
        entries,
        window_end,
        window_len,
    })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues (unsorted) and the matrix whose columns are the
/// matching eigenvectors. Stops once the off-diagonal Frobenius norm drops
/// below `OFF_DIAGONAL_TOL * n`.
pub fn jacobi_eigen(matrix: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), SpectraError> {
    let n = matrix.nrows();
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(SpectraError::NoConvergence {
            sweeps: 0,
            off_norm: f64::NAN,
        });
    }
    // Row-major working copies.
    let mut a: Vec<f64> = matrix.iter().copied().collect();
    let mut v: Vec<f64> = Array2::<f64>::eye(n).into_iter().collect();
    let tol = OFF_DIAGONAL_TOL * n as f64;

    let mut off = off_diagonal_norm(&a, n);
    let mut sweeps = 0;
    while off >= tol {
        if sweeps == MAX_SWEEPS {
            return Err(SpectraError::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a, n);
    }

    let vectors = Array2::from_shape_vec((n, n), v).expect("n x n buffer");
    Ok(((0..n).map(|i| a[i * n + i]).collect(), vectors))
}

/// Full eigen-spectrum of a correlation matrix, sorted descending.
///
/// Each eigenvector's first non-negligible component is made positive so
/// output is reproducible.
pub fn eigen_symmetric(c: &CorrelationMatrix) -> Result<EigenSpectrum, SpectraError> {
    let (values, vectors) = jacobi_eigen(&c.entries)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));

    let mut eigenvectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let col = vectors.column(src);
        let flip = col
            .iter()
            .find(|x| x.abs() > SIGN_EPS)
            .is_some_and(|&x| x < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        eigenvectors
            .column_mut(dst)
            .iter_mut()
            .zip(col.iter())
            .for_each(|(d, &s)| *d = sign * s);
    }

    Ok(EigenSpectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors,
        window_end: c.window_end,
    })
}

/// Sum of the `k` largest eigenvalues divided by `N`.
pub fn normalized_top_sum(spectrum: &EigenSpectrum, k: usize) -> Result<f64, SpectraError> {
    let n = spectrum.n();
    if k == 0 || k > n {
        return Err(SpectraError::InvalidTopK { k, n });
    }
    Ok(spectrum.eigenvalues[..k].iter().sum::<f64>() / n as f64)
}

fn window_ends(
    returns: &ReturnMatrix,
    window_len: usize,
    stride: usize,
) -> Result<Vec<usize>, SpectraError> {
    if window_len < 3 {
        return Err(SpectraError::WindowTooShort(window_len));
    }
    if stride == 0 {
        return Err(SpectraError::InvalidStride);
    }
    if returns.len() < window_len + 1 {
        return Err(SpectraError::WindowOutOfRange {
            window_end: returns
                .timestamps()
                .last()
                .copied()
                .unwrap_or(YearMonth::new(0, 1).unwrap()),
            window_len,
            available: returns.len(),
        });
    }
    Ok((window_len - 1..returns.len()).step_by(stride).collect())
}

/// Eigen-spectra of every rolling window, in window-end order.
pub fn rolling_eigen(
    returns: &ReturnMatrix,
    window_len: usize,
    stride: usize,
) -> Result<Vec<EigenSpectrum>, SpectraError> {
    let ends = window_ends(returns, window_len, stride)?;
    let results: Vec<Result<EigenSpectrum, SpectraError>> = ends
        .par_iter()
        .map(|&end| correlation_at(returns, end, window_len).and_then(|c| eigen_symmetric(&c)))
        .collect();
    results.into_iter().collect()
}

/// Normalized top-k eigenvalue sum of each rolling window, stamped with the window's last month.
pub fn rolling_spectra(
    returns: &ReturnMatrix,
    window_len: usize,
    k: usize,
    stride: usize,
) -> Result<TopSumSeries, SpectraError> {
    if k == 0 || k > returns.n_assets() {
        return Err(SpectraError::InvalidTopK {
            k,
            n: returns.n_assets(),
        });
    }
    let spectra = rolling_eigen(returns, window_len, stride)?;
    let values = spectra
        .iter()
        .map(|s| normalized_top_sum(s, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TopSumSeries {
        timestamps: spectra.iter().map(EigenSpectrum::window_end).collect(),
        values,
        window_len,
        k,
        stride,
    })
}

/// Writes `window_end,lambda_1,...,lambda_N`.
pub fn write_spectra_csv<W: Write>(
    spectra: &[EigenSpectrum],
    comments: &[String],
    mut out: W,
) -> Result<(), SpectraError> {
    write_comments(&mut out, comments)?;
    let n = spectra.first().map_or(0, EigenSpectrum::n);
    let header: Vec<String> = (1..=n).map(|i| format!("lambda_{i}")).collect();
    writeln!(out, "window_end,{}", header.join(","))?;
    for s in spectra {
        let row: Vec<String> = s.eigenvalues.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{},{}", s.window_end, row.join(","))?;
    }
    Ok(())
}
