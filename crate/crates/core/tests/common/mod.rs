//! Independent reference implementations and random fixtures for integration tests.
//!
//! Nothing here calls into the crate's numerical code paths.

#![allow(dead_code)]

use ndarray::Array2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysrisk_core::{ReturnMatrix, ReturnOperator, YearMonth};

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.0.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn months_from(start: YearMonth, n: usize) -> Vec<YearMonth> {
    (0..n).map(|k| start.add_months(k as i64)).collect()
}

pub fn start() -> YearMonth {
    YearMonth::new(2000, 1).unwrap()
}

pub fn random_returns(rng: &mut TestRng, t: usize, n: usize) -> ReturnMatrix {
    let values = Array2::from_shape_fn((t, n), |_| 0.05 * rng.normal());
    let ids = (0..n).map(|i| format!("x{i}")).collect();
    ReturnMatrix::new(
        ids,
        months_from(start(), t),
        values,
        ReturnOperator::LogReturn,
    )
    .unwrap()
}

/// Random correlation matrix from a random Gram matrix, possibly rank deficient.
pub fn random_correlation(rng: &mut TestRng, n: usize) -> Array2<f64> {
    let m = rng.range(1, 2 * n);
    let b = Array2::from_shape_fn((n, m), |_| rng.normal());
    let gram = b.dot(&b.t());
    let mut c = Array2::eye(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (gram[[i, j]] / (gram[[i, i]] * gram[[j, j]]).sqrt()).clamp(-1.0, 1.0);
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    c
}

/// Pearson correlation matrix of `x[start..=end]` by explicit double loops.
pub fn naive_correlation(x: &Array2<f64>, start: usize, end: usize) -> Array2<f64> {
    let n = x.ncols();
    let len = (end - start + 1) as f64;
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut mi = 0.0;
            let mut mj = 0.0;
            for t in start..=end {
                mi += x[[t, i]];
                mj += x[[t, j]];
            }
            mi /= len;
            mj /= len;
            let (mut cov, mut vi, mut vj) = (0.0, 0.0, 0.0);
            for t in start..=end {
                cov += (x[[t, i]] - mi) * (x[[t, j]] - mj);
                vi += (x[[t, i]] - mi) * (x[[t, i]] - mi);
                vj += (x[[t, j]] - mj) * (x[[t, j]] - mj);
            }
            cov /= len;
            let si = (vi / len).sqrt();
            let sj = (vj / len).sqrt();
            c[[i, j]] = cov / (si * sj);
        }
    }
    c
}

/// Householder reduction of a symmetric matrix to tridiagonal form: (diagonal, off-diagonal).
fn tridiagonalize(a: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[[i, k]]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vnorm);
        let mut h = Array2::<f64>::eye(n);
        for (p, vp) in v.iter().enumerate() {
            for (q, vq) in v.iter().enumerate() {
                h[[k + 1 + p, k + 1 + q]] -= 2.0 * vp * vq;
            }
        }
        a = h.dot(&a).dot(&h);
    }
    let d = (0..n).map(|i| a[[i, i]]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| a[[i + 1, i]]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x` (Sturm sequence).
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let prev = if q == 0.0 { f64::EPSILON * 1e-3 } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues in descending order via tridiagonalization and Sturm bisection.
pub fn oracle_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let (d, e) = tridiagonalize(a);
    let radius = |i: usize| {
        let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { e[i].abs() } else { 0.0 };
        left + right
    };
    let lo = (0..n)
        .map(|i| d[i] - radius(i))
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let hi = (0..n)
        .map(|i| d[i] + radius(i))
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    let mut out: Vec<f64> = (0..n)
        .map(|k| {
            // k-th smallest: smallest x with count(x) > k.
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if sturm_count(&d, &e, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a < 1e-14 {
                    break;
                }
            }
            0.5 * (a + b)
        })
        .collect();
    out.reverse();
    out
}

/// CARS by literally summing over every trailing window `ω_k`, `k = 1..=w`.
pub fn nested_cars(d: &[f64], w: usize) -> Vec<f64> {
    (0..d.len())
        .map(|t| {
            let mut total = 0.0;
            for k in 1..=w {
                let first = (t + 1).saturating_sub(k);
                let mut window_sum = 0.0;
                for &v in &d[first..=t] {
                    if v > 0.0 {
                        window_sum += v;
                    }
                }
                total += window_sum / k as f64;
            }
            total
        })
        .collect()
}

/// Pearson correlation of `a(t)` with `b(t + lag)` by direct summation.
pub fn naive_lagged_pearson(a: &[f64], b: &[f64], lag: i64) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in 0..a.len() as i64 {
        let s = t + lag;
        if s >= 0 && (s as usize) < b.len() {
            xs.push(a[t as usize]);
            ys.push(b[s as usize]);
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for k in 0..xs.len() {
        num += (xs[k] - mx) * (ys[k] - my);
        dx += (xs[k] - mx).powi(2);
        dy += (ys[k] - my).powi(2);
    }
    num / (dx * dy).sqrt()
}

use sysrisk_core::synth::{BetaSchedule, SynthSpec};

/// Fixed fixture seed for the synthetic end-to-end scenarios.
pub const FIXTURE_SEED: u64 = 1;

/// β steps from 0.2 to 0.9 at month 120.
pub fn regime_shift_spec() -> SynthSpec {
    SynthSpec {
        n_assets: 20,
        n_months: 240,
        seed: FIXTURE_SEED,
        beta: BetaSchedule::Constant(0.2),
        idiosyncratic_sigma: 0.1,
        regime_shifts: vec![(120, 0.9)],
        ..SynthSpec::default()
    }
}

/// Loading oscillating with a 17-month period.
pub fn oscillation_spec() -> SynthSpec {
    SynthSpec {
        n_assets: 20,
        n_months: 360,
        seed: FIXTURE_SEED,
        beta: BetaSchedule::Sinusoid {
            mean: 0.5,
            amplitude: 0.4,
            period: 17.0,
            phase: 0.0,
        },
        idiosyncratic_sigma: 0.5,
        ..SynthSpec::default()
    }
}

/// The two members of the coupled-pair scenario.
pub fn coupled_specs() -> (SynthSpec, SynthSpec) {
    let a = SynthSpec {
        n_assets: 20,
        n_months: 240,
        seed: FIXTURE_SEED,
        beta: BetaSchedule::Constant(0.7),
        idiosyncratic_sigma: 0.5,
        ..SynthSpec::default()
    };
    let b = SynthSpec {
        seed: FIXTURE_SEED + 1000,
        ..a.clone()
    };
    (a, b)
}
