//! Deterministic one-factor panel generator.
//!
//! Month `t` (row index, `t >= 1`) gets returns
//!
//! ```text
//! R_i(t) = β(t) · F(t) + σ · ε_i(t)
//! ```
//!
//! with `F` and `ε` independent standard normals, and levels start at 100.0
//! with `P(t) = P(t-1) · exp(R(t))`, so log returns of the panel recover `R`.
//!
//! The random stream is fixed: ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`. A uniform in `(0, 1]` is `1 - (u64 >> 11) · 2^-53`,
//! and normals come in pairs from Box–Muller,
//! `sqrt(-2 ln u1) · (cos 2πu2, sin 2πu2)`. Per month the draws are `F(t)` then
//! `ε_1(t) .. ε_N(t)`.

use std::fmt::Write as _;

use ndarray::Array2;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::date::YearMonth;
use crate::ingest::{PanelData, SeriesKind};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth spec: {key}: {reason}")]
    InvalidSpec { key: String, reason: String },

    #[error(transparent)]
    Panel(#[from] crate::ingest::IngestError),
}

fn invalid(key: &str, reason: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Baseline factor loading over time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    Constant(f64),
    /// `mean + amplitude · sin(2π (t + phase) / period)`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
        phase: f64,
    },
}

impl BetaSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            Self::Constant(b) => b,
            Self::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => mean + amplitude * (std::f64::consts::TAU * (t as f64 + phase) / period).sin(),
        }
    }
}

/// Second-panel linkage: after `coupling_start`, panel b's factor is panel a's
/// factor delayed by `phase_offset` months.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    pub pair_seed: u64,
    pub phase_offset: usize,
    pub coupling_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_assets: usize,
    /// Number of panel rows (levels); returns are one fewer.
    pub n_months: usize,
    pub seed: u64,
    pub start: YearMonth,
    pub beta: BetaSchedule,
    pub idiosyncratic_sigma: f64,
    /// `(month, β)`: from `month` onward the loading is `β`, overriding the schedule.
    pub regime_shifts: Vec<(usize, f64)>,
    pub coupling: Option<Coupling>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_assets: 10,
            n_months: 240,
            seed: 1,
            start: YearMonth::new(2000, 1).unwrap(),
            beta: BetaSchedule::Constant(0.5),
            idiosyncratic_sigma: 1.0,
            regime_shifts: Vec::new(),
            coupling: None,
        }
    }
}

impl SynthSpec {
    /// Factor loading in month `t`.
    pub fn beta_at(&self, t: usize) -> f64 {
        self.regime_shifts
            .iter()
            .filter(|(m, _)| *m <= t)
            .max_by_key(|(m, _)| *m)
            .map_or_else(|| self.beta.at(t), |&(_, b)| b)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_assets < 2 {
            return Err(invalid("n_assets", "need at least 2 assets"));
        }
        if self.n_months < 3 {
            return Err(invalid("n_months", "need at least 3 months"));
        }
        if !(self.idiosyncratic_sigma.is_finite() && self.idiosyncratic_sigma > 0.0) {
            return Err(invalid("sigma", "must be finite and > 0"));
        }
        match self.beta {
            BetaSchedule::Constant(b) if !b.is_finite() => {
                return Err(invalid("beta", "must be finite"));
            }
            BetaSchedule::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => {
                if ![mean, amplitude, phase].iter().all(|v| v.is_finite()) {
                    return Err(invalid("beta", "schedule parameters must be finite"));
                }
                if !(period.is_finite() && period > 0.0) {
                    return Err(invalid("beta_period", "must be finite and > 0"));
                }
            }
            _ => {}
        }
        for &(month, b) in &self.regime_shifts {
            if month == 0 || month >= self.n_months {
                return Err(invalid(
                    "shifts",
                    format!("month {month} outside 1..{}", self.n_months),
                ));
            }
            if !b.is_finite() {
                return Err(invalid(
                    "shifts",
                    format!("non-finite beta at month {month}"),
                ));
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` config; `#` starts a comment.
    ///
    /// Keys: `n_assets`, `n_months`, `seed`, `start`, `beta`, `beta_amplitude`,
    /// `beta_period`, `beta_phase`, `sigma`, `shifts` (`month:beta,...`), and for a
    /// coupled pair `pair_seed`, `phase_offset`, `coupling_start`.
    pub fn from_config(text: &str) -> Result<Self, SynthError> {
        let mut spec = Self::default();
        let mut beta_mean = 0.5;
        let mut amplitude = 0.0;
        let mut period: Option<f64> = None;
        let mut phase = 0.0;
        let mut pair_seed: Option<u64> = None;
        let mut phase_offset: Option<usize> = None;
        let mut coupling_start: Option<usize> = None;

        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, SynthError> {
            value
                .parse()
                .map_err(|_| invalid(key, format!("cannot parse '{value}'")))
        }

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(invalid(
                    line,
                    format!("line {}: expected key = value", lineno + 1),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n_assets" => spec.n_assets = num(key, value)?,
                "n_months" => spec.n_months = num(key, value)?,
                "seed" => spec.seed = num(key, value)?,
                "start" => {
                    spec.start = value
                        .parse()
                        .map_err(|e: crate::date::DateParseError| invalid(key, e.to_string()))?
                }
                "beta" => beta_mean = num(key, value)?,
                "beta_amplitude" => amplitude = num(key, value)?,
                "beta_period" => period = Some(num(key, value)?),
                "beta_phase" => phase = num(key, value)?,
                "sigma" => spec.idiosyncratic_sigma = num(key, value)?,
                "shifts" => {
                    spec.regime_shifts = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|item| {
                            let (m, b) = item.split_once(':').ok_or_else(|| {
                                invalid(key, format!("'{item}' is not month:beta"))
                            })?;
                            Ok((num(key, m.trim())?, num(key, b.trim())?))
                        })
                        .collect::<Result<_, SynthError>>()?;
                }
                "pair_seed" => pair_seed = Some(num(key, value)?),
                "phase_offset" => phase_offset = Some(num(key, value)?),
                "coupling_start" => coupling_start = Some(num(key, value)?),
                other => return Err(invalid(other, "unknown key")),
            }
        }

        spec.beta = if amplitude == 0.0 {
            BetaSchedule::Constant(beta_mean)
        } else {
            let period = period
                .ok_or_else(|| invalid("beta_period", "required when beta_amplitude != 0"))?;
            BetaSchedule::Sinusoid {
                mean: beta_mean,
                amplitude,
                period,
                phase,
            }
        };
        spec.regime_shifts.sort_by_key(|(m, _)| *m);
        spec.coupling = match pair_seed {
            Some(pair_seed) => Some(Coupling {
                pair_seed,
                phase_offset: phase_offset.unwrap_or(0),
                coupling_start: coupling_start.unwrap_or(spec.n_months),
            }),
            None if phase_offset.is_some() || coupling_start.is_some() => {
                return Err(invalid(
                    "pair_seed",
                    "required when phase_offset or coupling_start is set",
                ));
            }
            None => None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Renders the spec back into `from_config` syntax, one key per line.
    pub fn to_config_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("n_assets={}", self.n_assets),
            format!("n_months={}", self.n_months),
            format!("seed={}", self.seed),
            format!("start={}", self.start),
        ];
        match self.beta {
            BetaSchedule::Constant(b) => lines.push(format!("beta={b}")),
            BetaSchedule::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => {
                lines.push(format!("beta={mean}"));
                lines.push(format!("beta_amplitude={amplitude}"));
                lines.push(format!("beta_period={period}"));
                lines.push(format!("beta_phase={phase}"));
            }
        }
        lines.push(format!("sigma={}", self.idiosyncratic_sigma));
        if !self.regime_shifts.is_empty() {
            let mut s = String::new();
            for (i, (m, b)) in self.regime_shifts.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{m}:{b}");
            }
            lines.push(format!("shifts={s}"));
        }
        if let Some(c) = self.coupling {
            lines.push(format!("pair_seed={}", c.pair_seed));
            lines.push(format!("phase_offset={}", c.phase_offset));
            lines.push(format!("coupling_start={}", c.coupling_start));
        }
        lines
    }
}

/// Standard normal stream over ChaCha8 via Box–Muller.
struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform_open0(&mut self) -> f64 {
        1.0 - (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform_open0();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Raw draws for one panel: `factor[t]` and `noise[[t, i]]`, with row 0 unused.
struct Draws {
    factor: Vec<f64>,
    noise: Array2<f64>,
}

fn draw(spec: &SynthSpec, seed: u64) -> Draws {
    let mut normals = NormalStream::new(seed);
    let mut factor = vec![0.0; spec.n_months];
    let mut noise = Array2::zeros((spec.n_months, spec.n_assets));
    for t in 1..spec.n_months {
        factor[t] = normals.next();
        for i in 0..spec.n_assets {
            noise[[t, i]] = normals.next();
        }
    }
    Draws { factor, noise }
}

fn asset_ids(prefix: char, n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Generated returns (`n_months - 1` rows) and the level panel built from them.
fn assemble(
    spec: &SynthSpec,
    draws: &Draws,
    prefix: char,
) -> Result<(Array2<f64>, PanelData), SynthError> {
    let (t_len, n) = (spec.n_months, spec.n_assets);
    let mut returns = Array2::zeros((t_len - 1, n));
    let mut levels = Array2::zeros((t_len, n));
    levels.row_mut(0).fill(100.0);
    for t in 1..t_len {
        let common = spec.beta_at(t) * draws.factor[t];
        for i in 0..n {
            let r = common + spec.idiosyncratic_sigma * draws.noise[[t, i]];
            returns[[t - 1, i]] = r;
            levels[[t, i]] = levels[[t - 1, i]] * r.exp();
        }
    }
    let timestamps = (0..t_len)
        .map(|k| spec.start.add_months(k as i64))
        .collect();
    let panel = PanelData::new(asset_ids(prefix, n), timestamps, levels, SeriesKind::Price)?;
    Ok((returns, panel))
}

/// Generates a panel and also returns the exact returns used to build it.
pub fn generate_with_returns(spec: &SynthSpec) -> Result<(PanelData, Array2<f64>), SynthError> {
    spec.validate()?;
    let (returns, panel) = assemble(spec, &draw(spec, spec.seed), 'a')?;
    Ok((panel, returns))
}

/// Generates a level panel from `spec`.
pub fn generate(spec: &SynthSpec) -> Result<PanelData, SynthError> {
    generate_with_returns(spec).map(|(p, _)| p)
}

/// Two panels whose factors are independent before `coupling_start` and linked after it:
/// from then on panel b's factor at month `t` is panel a's factor at `t - phase_offset`.
pub fn generate_coupled_pair(
    spec_a: &SynthSpec,
    spec_b: &SynthSpec,
    phase_offset: usize,
    coupling_start: usize,
) -> Result<(PanelData, PanelData), SynthError> {
    spec_a.validate()?;
    spec_b.validate()?;
    if spec_a.n_months != spec_b.n_months {
        return Err(invalid(
            "n_months",
            format!(
                "paired panels differ in length ({} vs {})",
                spec_a.n_months, spec_b.n_months
            ),
        ));
    }
    if spec_a.start != spec_b.start {
        return Err(invalid(
            "start",
            "paired panels must start in the same month",
        ));
    }
    let draws_a = draw(spec_a, spec_a.seed);
    let mut draws_b = draw(spec_b, spec_b.seed);
    for t in coupling_start.max(1)..spec_b.n_months {
        if t > phase_offset {
            draws_b.factor[t] = draws_a.factor[t - phase_offset];
        }
    }
    let (_, a) = assemble(spec_a, &draws_a, 'a')?;
    let (_, b) = assemble(spec_b, &draws_b, 'b')?;
    Ok((a, b))
}

/// Generates the pair described by `spec.coupling`: panel b shares every parameter but the seed.
pub fn generate_from_coupling(spec: &SynthSpec) -> Result<(PanelData, PanelData), SynthError> {
    let coupling = spec
        .coupling
        .ok_or_else(|| invalid("pair_seed", "spec has no coupling"))?;
    let spec_b = SynthSpec {
        seed: coupling.pair_seed,
        ..spec.clone()
    };
    generate_coupled_pair(
        spec,
        &spec_b,
        coupling.phase_offset,
        coupling.coupling_start,
    )
}
