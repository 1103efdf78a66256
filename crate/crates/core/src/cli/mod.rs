//! Command-line front-end: `spectrum`, `weyl-curve`, `symbol-check`, `frame-check`.
//!
//! Exit codes: 0 on success, 1 for usage, configuration and I/O errors,
//! 2 for numerical failures (certification, breakdown, wrapped windows).

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{parse_pairs, ExperimentConfig, SpectrumSource, KEYS};

use crate::domain::{rectangle_domain, GridDomain};
use crate::eigen::{dense_spectrum, spectrum_below};
use crate::error::{Error, Result};
use crate::frame::{analytic_symbol, positive_part, symbol, CoherentFrame};
use crate::operators::{assemble_kind, OperatorKind};
use crate::weyl::{
    build_curve, build_operator_curve, exact_spectrum_box, fit_remainder_exponent, lambda_grid, leading_term,
    CurveMeta, EpsilonRule,
};
use crate::{fmt_f64, VERSION};

#[derive(Debug, Parser)]
#[command(name = "cweyl", version, about = "Coherent-state checks and Weyl-law curves on grid domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certified eigenvalues of the discrete operator.
    Spectrum(CommonArgs),
    /// Riesz-mean curve against the phase-space leading term, as CSV.
    WeylCurve(CommonArgs),
    /// Discrete coherent-state symbols against the closed forms at h and h/2.
    SymbolCheck(CommonArgs),
    /// Frame tightness, trace identity and symbol convergence report.
    FrameCheck(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::WeylCurve(_) => "weyl-curve",
            Command::SymbolCheck(_) => "symbol-check",
            Command::FrameCheck(_) => "frame-check",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Spectrum(a) | Command::WeylCurve(a) | Command::SymbolCheck(a) | Command::FrameCheck(a) => a,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::CertificationFailed { .. }
        | Error::Breakdown { .. }
        | Error::PartialLimit { .. }
        | Error::DenseLimit { .. }
        | Error::WindowWraps { .. }
        | Error::UncertifiedTail { .. }
        | Error::Asymmetric { .. } => 2,
        _ => 1,
    }
}

/// Config file first, then `--set` overrides, then the dedicated flags.
pub fn load_config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut pairs = match &args.config {
        Some(path) => parse_pairs(&fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    for s in &args.set {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got '{s}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(p) = &args.out {
        pairs.push(("out".into(), p.display().to_string()));
    }
    if let Some(n) = args.threads {
        pairs.push(("threads".into(), n.to_string()));
    }
    if let Some(s) = args.seed {
        pairs.push(("seed".into(), s.to_string()));
    }
    ExperimentConfig::from_pairs(&pairs)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_config(cli.command.common()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(w) = cfg.validity_warning() {
        eprintln!("{w}");
    }
    match execute(&cli.command, &cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<()> {
    let body = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| render(command, cfg))?,
        None => render(command, cfg)?,
    };
    match &cfg.out {
        Some(path) => fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

/// Full output of a command, header included.
pub fn render(command: &Command, cfg: &ExperimentConfig) -> Result<String> {
    let mut out = header(command.name(), cfg);
    let body = match command {
        Command::Spectrum(_) => cmd_spectrum(cfg)?,
        Command::WeylCurve(_) => cmd_weyl_curve(cfg)?,
        Command::SymbolCheck(_) => cmd_symbol_check(cfg)?,
        Command::FrameCheck(_) => cmd_frame_check(cfg)?,
    };
    out.push_str(&body);
    Ok(out)
}

fn header(command: &str, cfg: &ExperimentConfig) -> String {
    let mut s = format!("# coherent-weyl {VERSION}\n# command = {command}\n");
    for (k, v) in cfg.effective() {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

fn domain(cfg: &ExperimentConfig, h: f64) -> Result<GridDomain> {
    rectangle_domain(&cfg.bounds, h)
}

pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<String> {
    let op = assemble_kind(&domain(cfg, cfg.h)?, cfg.kind);
    let spec = match cfg.cutoff {
        Some(c) => spectrum_below(&op, c)?,
        None => dense_spectrum(&op)?,
    };
    let mut buf = Vec::new();
    spec.write_text(&mut buf, cfg.kind.name(), Some(cfg.h))?;
    Ok(String::from_utf8(buf).expect("ascii output"))
}

pub fn cmd_weyl_curve(cfg: &ExperimentConfig) -> Result<String> {
    let lambdas = lambda_grid(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count, cfg.lambda_log)?;
    let rule = EpsilonRule { alpha: cfg.alpha, window: cfg.base_window() };
    let dom = domain(cfg, cfg.h)?;
    let curve = match cfg.source {
        SpectrumSource::Discrete => build_operator_curve(&assemble_kind(&dom, cfg.kind), &lambdas, &rule)?,
        SpectrumSource::Exact => {
            if cfg.kind == OperatorKind::Hyperbolic && cfg.dim() > 1 {
                return Err(Error::InvalidArgument("exact spectra exist only for the euclidean box or d = 1".into()));
            }
            let lengths: Vec<f64> = cfg.bounds.iter().map(|(lo, hi)| hi - lo).collect();
            let spec = exact_spectrum_box(&lengths, cfg.lambda_max)?;
            let meta = CurveMeta { kind: cfg.kind, domain: "exact box".into(), h: None, alpha: cfg.alpha };
            build_curve(&spec, |lam| leading_term(cfg.kind, &dom, lam), &lambdas, &rule, meta)?
        }
    };
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    let mut s = String::from_utf8(buf).expect("ascii output");
    match fit_remainder_exponent(&curve, cfg.lambda_min, cfg.lambda_max) {
        Ok(fit) => {
            let _ = writeln!(
                s,
                "# fit slope = {} intercept = {} residual = {} samples = {}",
                fmt_f64(fit.slope),
                fmt_f64(fit.intercept),
                fmt_f64(fit.residual),
                fit.samples
            );
        }
        Err(e) => {
            let _ = writeln!(s, "# fit unavailable: {e}");
        }
    }
    Ok(s)
}

/// Grid nodes of `dom` whose window support stays at least `reach` inside the box.
fn interior_node_range(dom: &GridDomain, axis: usize, reach: f64) -> Option<(usize, usize)> {
    let (lo, hi) = dom.bounding_box()[axis];
    let first = (0..dom.shape()[axis]).find(|&i| dom.coordinate(axis, i) - reach >= lo)?;
    let last = (0..dom.shape()[axis]).rev().find(|&i| dom.coordinate(axis, i) + reach <= hi)?;
    (first <= last).then_some((first, last))
}

fn symbol_errors(cfg: &ExperimentConfig, xi: &[f64], y: &[f64]) -> Result<[f64; 5]> {
    let window = cfg.base_window().scale(cfg.epsilon);
    let exact = analytic_symbol(cfg.kind, &window, xi, y)?;
    let mut out = [0.0, 0.0, 0.0, 0.0, exact];
    for (i, h) in [cfg.h, cfg.h / 2.0].into_iter().enumerate() {
        let op = assemble_kind(&domain(cfg, h)?, cfg.kind);
        let s = symbol(&window, &op, xi, y)?;
        if s.truncated {
            return Err(Error::InvalidArgument(format!("window support leaves the domain at y = {y:?}")));
        }
        out[2 * i] = s.value;
        out[2 * i + 1] = (s.value - exact).abs();
    }
    Ok(out)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

pub fn cmd_symbol_check(cfg: &ExperimentConfig) -> Result<String> {
    let dom = domain(cfg, cfg.h)?;
    let reach = cfg.epsilon;
    let ranges: Vec<(usize, usize)> = (0..cfg.dim())
        .map(|a| interior_node_range(&dom, a, reach))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidArgument(format!("epsilon {} leaves no interior centre", cfg.epsilon)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = String::from("# xi y symbol_h error_h symbol_h2 error_h2 exact ratio\n");
    for _ in 0..cfg.samples {
        let y: Vec<f64> =
            ranges.iter().enumerate().map(|(a, &(lo, hi))| dom.coordinate(a, rng.random_range(lo..=hi))).collect();
        let xi: Vec<f64> = (0..cfg.dim()).map(|_| rng.random_range(-4i32..=4) as f64).collect();
        let [v1, e1, v2, e2, exact] = symbol_errors(cfg, &xi, &y)?;
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            join(&xi),
            join(&y),
            fmt_f64(v1),
            fmt_f64(e1),
            fmt_f64(v2),
            fmt_f64(e2),
            fmt_f64(exact),
            fmt_f64(e1 / e2)
        );
    }
    Ok(s)
}

pub fn cmd_frame_check(cfg: &ExperimentConfig) -> Result<String> {
    let dom = domain(cfg, cfg.h)?;
    let window = cfg.base_window().scale(cfg.epsilon);
    let frame = match cfg.frame_n {
        Some(n) => CoherentFrame::new(cfg.bounds.iter().map(|b| b.0).collect(), n, cfg.h, window.clone())?,
        None => CoherentFrame::for_domain(&dom, &window)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut parseval: f64 = 0.0;
    let mut reconstruction: f64 = 0.0;
    for i in 0..cfg.vectors {
        let f: Vec<Complex64> = (0..frame.grid_len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = frame.grid_norm_sq(&f);
        let big = frame.forward(&f)?;
        parseval = parseval.max((frame.phase_norm_sq(&big)? - norm).abs() / norm);
        if i == 0 {
            let back = frame.adjoint(&big)?;
            let diff: Vec<Complex64> = back.iter().zip(&f).map(|(a, b)| a - b).collect();
            reconstruction = (frame.grid_norm_sq(&diff) / norm).sqrt();
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "frame_n = {}", frame.n());
    let _ = writeln!(s, "lattice_sum = {}", fmt_f64(frame.lattice_sum()));
    let _ = writeln!(s, "parseval_max_defect = {}", fmt_f64(parseval));
    let _ = writeln!(s, "reconstruction_defect = {}", fmt_f64(reconstruction));
    if cfg.dim() == 1 && cfg.frame_n.is_none() {
        let op = assemble_kind(&dom, cfg.kind);
        let a = op.matrix().to_dense();
        let spec = dense_spectrum(&op)?;
        let lam = spec.values[spec.len() / 2];
        let t = frame.embed_matrix(&op, &positive_part(&a, lam))?;
        let direct: f64 = spec.values.iter().map(|v| (lam - v).max(0.0)).sum();
        let via = frame.trace_via_frame(&t)?;
        let _ = writeln!(s, "trace_relative_defect = {}", fmt_f64((via - direct).abs() / direct));
    } else {
        let _ = writeln!(s, "trace_relative_defect = skipped");
    }
    let centre: Vec<f64> = (0..cfg.dim())
        .map(|a| {
            let (lo, hi) = cfg.bounds[a];
            let i = ((0.5 * (lo + hi) - dom.origin()[a]) / cfg.h).round() as usize;
            dom.coordinate(a, i)
        })
        .collect();
    let zero = vec![0.0; cfg.dim()];
    let [_, e1, _, e2, _] = symbol_errors(cfg, &zero, &centre)?;
    let _ = writeln!(s, "symbol_error_h = {}", fmt_f64(e1));
    let _ = writeln!(s, "symbol_error_h2 = {}", fmt_f64(e2));
    let _ = writeln!(s, "symbol_error_ratio = {}", fmt_f64(e1 / e2));
    Ok(s)
}
