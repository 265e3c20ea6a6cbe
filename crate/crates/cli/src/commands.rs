//! Subcommand bodies. Each returns a [`CliError`] carrying the stage and exit code.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sysrisk_core::cars::{risk_series, RiskError};
use sysrisk_core::ingest::{parse_csv, write_panel_csv, ColumnSchema, IngestError, PanelData};
use sysrisk_core::returns::compute_returns;
use sysrisk_core::signal::{
    align_common, autocorrelation, cross_correlation_series, detect_peaks, dominant_period,
    split_series, write_peaks_csv, SignalError,
};
use sysrisk_core::spectra::{rolling_eigen, write_spectra_csv, SpectraError};
use sysrisk_core::synth::{generate, generate_from_coupling, SynthSpec};
use sysrisk_core::{fmt_f64, RiskConfig, RiskSeries};

use crate::{CrossArgs, PipelineArgs, SynthArgs};

/// CARS values this close to zero everywhere are treated as an identically zero series.
const ZERO_CARS_TOL: f64 = 1e-12;

/// User or data problems exit with 1; broken numerical invariants with 2.
const EXIT_USER: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    fn user(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            message: message.into(),
            code: EXIT_USER,
        }
    }
}

fn spectra_exit_code(err: &SpectraError) -> u8 {
    match err {
        SpectraError::NoConvergence { .. } | SpectraError::InvalidMatrix(_) => EXIT_INTERNAL,
        _ => EXIT_USER,
    }
}

impl From<RiskError> for CliError {
    fn from(err: RiskError) -> Self {
        let code = match &err {
            RiskError::Spectra(e) => spectra_exit_code(e),
            _ => EXIT_USER,
        };
        let message = match &err {
            RiskError::Spectra(e) => e.to_string(),
            RiskError::Cars(e) => e.to_string(),
            RiskError::Io(e) => e.to_string(),
        };
        Self {
            stage: err.stage(),
            message,
            code,
        }
    }
}

fn signal_error(stage: &'static str, err: SignalError) -> CliError {
    CliError::user(stage, err.to_string())
}

/// Header lines echoing every setting that shaped an output file.
fn run_config(command: &str, args: &PipelineArgs, extra: &[String]) -> Vec<String> {
    let mut lines = vec![
        format!("sysrisk {command}"),
        format!("input={}", args.input.display()),
    ];
    lines.extend(extra.iter().cloned());
    lines.extend([
        format!("kind={}", args.kind),
        format!("operator={}", args.operator),
        format!("missing={}", args.missing),
    ]);
    lines.extend(risk_config(args).describe());
    lines.extend([
        format!("max_lag={}", args.max_lag),
        format!("min_prominence={}", fmt_f64(args.min_prominence)),
        format!("min_separation={}", args.min_separation),
        format!("out={}", args.out.display()),
    ]);
    lines
}

fn risk_config(args: &PipelineArgs) -> RiskConfig {
    RiskConfig {
        window_len: args.window,
        top_k: args.top_k,
        cars_window: args.cars_window.unwrap_or(args.window),
        mode: args.cars_mode,
        stride: args.stride,
    }
}

fn load_panel(path: &Path, args: &PipelineArgs) -> Result<PanelData, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::user("ingest", format!("cannot open '{}': {e}", path.display())))?;
    let schema = ColumnSchema {
        kind: args.kind,
        missing: args.missing,
    };
    parse_csv(file, schema)
        .map_err(|e: IngestError| CliError::user("ingest", format!("{}: {e}", path.display())))
}

/// Ingest → returns → rolling spectra → CARS for one input file.
fn run_pipeline(
    path: &Path,
    args: &PipelineArgs,
    header: &[String],
    dump_suffix: &str,
) -> Result<RiskSeries, CliError> {
    let panel = load_panel(path, args)?;
    let returns = compute_returns(&panel, args.operator)
        .map_err(|e| CliError::user("returns", format!("{}: {e}", path.display())))?;
    if args.dump_returns {
        let target = out_file(args, &format!("returns{dump_suffix}.csv"))?;
        write_with(&target, |w| {
            returns.write_csv(header, w).map_err(std::io::Error::other)
        })?;
    }
    let config = risk_config(args);
    if args.dump_spectra {
        let spectra = rolling_eigen(&returns, config.window_len, config.stride)
            .map_err(|e| CliError::from(RiskError::Spectra(e)))?;
        let target = out_file(args, &format!("spectra{dump_suffix}.csv"))?;
        write_with(&target, |w| {
            write_spectra_csv(&spectra, header, w).map_err(std::io::Error::other)
        })?;
    }
    Ok(risk_series(&returns, config)?)
}

fn out_file(args: &PipelineArgs, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&args.out).map_err(|e| {
        CliError::user(
            "write",
            format!("cannot create '{}': {e}", args.out.display()),
        )
    })?;
    Ok(args.out.join(name))
}

fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::user("write", format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(fail)?);
    body(&mut w).map_err(fail)?;
    w.flush().map_err(fail)
}

fn write_risk_outputs(
    args: &PipelineArgs,
    risk: &RiskSeries,
    header: &[String],
) -> Result<(), CliError> {
    write_with(&out_file(args, "risk_series.csv")?, |w| {
        risk.write_csv(header, w)
    })?;
    let peaks = detect_peaks(risk, args.min_prominence, args.min_separation);
    write_with(&out_file(args, "peaks.csv")?, |w| {
        write_peaks_csv(&peaks, header, w)
    })
}

pub fn analyze(args: &PipelineArgs) -> Result<(), CliError> {
    let header = run_config("analyze", args, &[]);
    let risk = run_pipeline(&args.input, args, &header, "")?;
    write_risk_outputs(args, &risk, &header)
}

pub fn autocorr(args: &PipelineArgs) -> Result<(), CliError> {
    let header = run_config("autocorr", args, &[]);
    let risk = run_pipeline(&args.input, args, &header, "")?;
    write_risk_outputs(args, &risk, &header)?;

    if risk.cars.iter().all(|c| c.abs() <= ZERO_CARS_TOL) {
        return Err(signal_error("autocorrelation", SignalError::ConstantSeries));
    }
    let ac = autocorrelation(&risk.cars, args.max_lag)
        .map_err(|e| signal_error("autocorrelation", e))?;
    let mut lines = header;
    lines.push(match dominant_period(&ac) {
        Some(p) => format!("dominant_period={p}"),
        None => "dominant_period=none".to_string(),
    });
    write_with(&out_file(args, "autocorr.csv")?, |w| {
        ac.write_csv(&lines, w)
    })
}

pub fn crosscorr(args: &CrossArgs) -> Result<(), CliError> {
    let p = &args.pipeline;
    let extra = [
        format!("input2={}", args.input2.display()),
        format!("split={}", args.split),
    ];
    let header = run_config("crosscorr", p, &extra);
    let risk_a = run_pipeline(&p.input, p, &header, "_a")?;
    let risk_b = run_pipeline(&args.input2, p, &header, "_b")?;

    let (a, b) = align_common(&risk_a.cars_series(), &risk_b.cars_series())
        .map_err(|e| signal_error("align", e))?;
    let (a_before, a_after) = split_series(&a, args.split).map_err(|e| signal_error("split", e))?;
    let (b_before, b_after) = split_series(&b, args.split).map_err(|e| signal_error("split", e))?;

    for (name, x, y) in [
        ("crosscorr_before.csv", &a_before, &b_before),
        ("crosscorr_after.csv", &a_after, &b_after),
    ] {
        let cc = cross_correlation_series(x, y, p.max_lag)
            .map_err(|e| signal_error("cross_correlation", e))?;
        let mut lines = header.clone();
        lines.push(format!("argmax_lag={}", cc.argmax_lag));
        write_with(&out_file(p, name)?, |w| cc.write_csv(&lines, w))?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec).map_err(|e| {
        CliError::user(
            "synth",
            format!("cannot read '{}': {e}", args.spec.display()),
        )
    })?;
    let spec = SynthSpec::from_config(&text).map_err(|e| CliError::user("synth", e.to_string()))?;
    let mut header = vec![format!("sysrisk synth spec={}", args.spec.display())];
    header.extend(spec.to_config_lines());

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| {
            CliError::user(
                "write",
                format!("cannot create '{}': {e}", parent.display()),
            )
        })?;
    }
    let emit = |path: &Path, panel: &PanelData| {
        write_with(path, |w| {
            write_panel_csv(panel, &header, w).map_err(std::io::Error::other)
        })
    };

    if spec.coupling.is_some() {
        let (a, b) =
            generate_from_coupling(&spec).map_err(|e| CliError::user("synth", e.to_string()))?;
        emit(&paired_path(&args.out, "a"), &a)?;
        emit(&paired_path(&args.out, "b"), &b)
    } else {
        let panel = generate(&spec).map_err(|e| CliError::user("synth", e.to_string()))?;
        emit(&args.out, &panel)
    }
}

/// `dir/name.csv` → `dir/name_<tag>.csv`.
fn paired_path(out: &Path, tag: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "synth".into(), |s| s.to_string_lossy().into_owned());
    let ext = out
        .extension()
        .map_or_else(|| "csv".into(), |e| e.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_{tag}.{ext}"))
}
