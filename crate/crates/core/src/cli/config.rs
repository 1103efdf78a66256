//! `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::operators::OperatorKind;
use crate::window::{make_bump_window, make_cosine_window, ProfileShape, Window};

/// Where a Weyl curve takes its eigenvalues from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumSource {
    /// Closed-form Dirichlet eigenvalues of the box.
    Exact,
    /// Certified eigenvalues of the finite-difference operator.
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: OperatorKind,
    pub bounds: Vec<(f64, f64)>,
    pub h: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    pub lambda_log: bool,
    pub alpha: f64,
    pub window: ProfileShape,
    pub source: SpectrumSource,
    pub cutoff: Option<f64>,
    pub epsilon: f64,
    pub samples: usize,
    pub vectors: usize,
    pub frame_n: Option<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "alpha",
    "box",
    "cutoff",
    "dim",
    "epsilon",
    "frame_n",
    "h",
    "kind",
    "lambda_count",
    "lambda_max",
    "lambda_min",
    "lambda_scale",
    "out",
    "samples",
    "seed",
    "source",
    "threads",
    "vectors",
    "window",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: OperatorKind::Euclidean,
            bounds: vec![(0.0, 1.0)],
            h: 0.01,
            lambda_min: 10.0,
            lambda_max: 1000.0,
            lambda_count: 20,
            lambda_log: true,
            alpha: 1.0 / 3.0,
            window: ProfileShape::Cosine,
            source: SpectrumSource::Discrete,
            cutoff: None,
            epsilon: 0.2,
            samples: 5,
            vectors: 20,
            frame_n: None,
            seed: 0,
            threads: None,
            out: None,
        }
    }
}

/// Splits a config file into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected key = value", lineno + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("{key}: cannot parse '{v}'")))
}

fn parse_bounds(v: &str) -> Result<Vec<(f64, f64)>> {
    v.split(',')
        .map(|axis| {
            let (lo, hi) = axis
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("box: expected lo:hi, got '{axis}'")))?;
            Ok((number("box", lo.trim())?, number("box", hi.trim())?))
        })
        .collect()
}

impl ExperimentConfig {
    /// Applies `pairs` in order on top of the defaults; later pairs win.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut dim = None;
        let mut box_given = false;
        for (k, v) in pairs {
            match k.as_str() {
                "kind" => cfg.kind = v.parse()?,
                "box" => {
                    cfg.bounds = parse_bounds(v)?;
                    box_given = true;
                }
                "dim" => dim = Some(number::<usize>(k, v)?),
                "h" => cfg.h = number(k, v)?,
                "lambda_min" => cfg.lambda_min = number(k, v)?,
                "lambda_max" => cfg.lambda_max = number(k, v)?,
                "lambda_count" => cfg.lambda_count = number(k, v)?,
                "lambda_scale" => {
                    cfg.lambda_log = match v.as_str() {
                        "log" => true,
                        "linear" => false,
                        _ => return Err(Error::Parse(format!("lambda_scale: expected log or linear, got '{v}'"))),
                    }
                }
                "alpha" => cfg.alpha = number(k, v)?,
                "window" => {
                    cfg.window = match v.as_str() {
                        "cosine" => ProfileShape::Cosine,
                        "bump" => ProfileShape::Bump,
                        _ => return Err(Error::Parse(format!("window: expected cosine or bump, got '{v}'"))),
                    }
                }
                "source" => {
                    cfg.source = match v.as_str() {
                        "exact" => SpectrumSource::Exact,
                        "discrete" => SpectrumSource::Discrete,
                        _ => return Err(Error::Parse(format!("source: expected exact or discrete, got '{v}'"))),
                    }
                }
                "cutoff" => cfg.cutoff = if v == "none" { None } else { Some(number(k, v)?) },
                "epsilon" => cfg.epsilon = number(k, v)?,
                "samples" => cfg.samples = number(k, v)?,
                "vectors" => cfg.vectors = number(k, v)?,
                "frame_n" => cfg.frame_n = if v == "none" { None } else { Some(number(k, v)?) },
                "seed" => cfg.seed = number(k, v)?,
                "threads" => cfg.threads = if v == "none" { None } else { Some(number(k, v)?) },
                "out" => cfg.out = if v == "none" { None } else { Some(PathBuf::from(v)) },
                _ => return Err(Error::Parse(format!("unknown key '{k}'"))),
            }
        }
        if let Some(d) = dim {
            if !box_given {
                cfg.bounds = vec![(0.0, 1.0); d];
            } else if d != cfg.bounds.len() {
                return Err(Error::DimensionMismatch { expected: d, got: cfg.bounds.len() });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.bounds.is_empty() {
            return bad("box has no axes".into());
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("box axis {lo}:{hi} is empty"));
            }
            if self.h >= hi - lo {
                return bad(format!("h = {} is not below the side {}", self.h, hi - lo));
            }
        }
        if !(self.lambda_min > 0.0 && self.lambda_max >= self.lambda_min && self.lambda_max.is_finite()) {
            return bad(format!("lambda range [{}, {}] is invalid", self.lambda_min, self.lambda_max));
        }
        if self.lambda_count == 0 || self.samples == 0 || self.vectors == 0 {
            return bad("lambda_count, samples and vectors must be positive".into());
        }
        if !(self.alpha > 0.0) || !(self.epsilon > 0.0) {
            return bad("alpha and epsilon must be positive".into());
        }
        if matches!(self.cutoff, Some(c) if !(c >= 0.0)) {
            return bad("cutoff must be non-negative".into());
        }
        if matches!(self.threads, Some(0)) || matches!(self.frame_n, Some(0)) {
            return bad("threads and frame_n must be positive".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Warning text when `λ_max h²` leaves the range where the difference
    /// scheme resolves eigenfunctions.
    pub fn validity_warning(&self) -> Option<String> {
        let top = self.cutoff.unwrap_or(0.0).max(self.lambda_max);
        (top * self.h * self.h > 1.0).then(|| {
            format!("warning: lambda {top} exceeds 1/h^2 = {}; discretization error is large", 1.0 / (self.h * self.h))
        })
    }

    /// Unscaled window of the configured shape.
    pub fn base_window(&self) -> Window {
        match self.window {
            ProfileShape::Cosine => make_cosine_window(self.dim()),
            ProfileShape::Bump => make_bump_window(self.dim()),
        }
    }

    /// Every key with its effective value, sorted by key.
    pub fn effective(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let bounds: Vec<String> = self.bounds.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
        let mut m = BTreeMap::new();
        m.insert("alpha", format!("{}", self.alpha));
        m.insert("box", bounds.join(","));
        m.insert("cutoff", opt(self.cutoff.map(|c| c.to_string())));
        m.insert("dim", self.dim().to_string());
        m.insert("epsilon", self.epsilon.to_string());
        m.insert("frame_n", opt(self.frame_n.map(|n| n.to_string())));
        m.insert("h", self.h.to_string());
        m.insert("kind", self.kind.to_string());
        m.insert("lambda_count", self.lambda_count.to_string());
        m.insert("lambda_max", self.lambda_max.to_string());
        m.insert("lambda_min", self.lambda_min.to_string());
        m.insert("lambda_scale", if self.lambda_log { "log" } else { "linear" }.into());
        m.insert("out", opt(self.out.as_ref().map(|p| p.display().to_string())));
        m.insert("samples", self.samples.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert(
            "source",
            match self.source {
                SpectrumSource::Exact => "exact",
                SpectrumSource::Discrete => "discrete",
            }
            .into(),
        );
        m.insert("threads", opt(self.threads.map(|n| n.to_string())));
        m.insert("vectors", self.vectors.to_string());
        m.insert("window", self.window.name().into());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_pairs(text).unwrap()
    }

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
        assert_eq!(ExperimentConfig::from_pairs(&[]).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_every_key() {
        let cfg = ExperimentConfig::from_pairs(&pairs(
            "# comment\nkind = hyperbolic\nbox = 0:1, 0:2\nh = 0.05\nlambda_min=5\nlambda_max = 50\n\
             lambda_count = 7\nlambda_scale = linear\nalpha = 0.5\nwindow = bump\nsource = exact\ncutoff = 12\n\
             epsilon = 0.3\nsamples = 3\nvectors = 4\nframe_n = 64\nseed = 9\nthreads = 2\nout = x.csv\n",
        ))
        .unwrap();
        assert_eq!(cfg.kind, OperatorKind::Hyperbolic);
        assert_eq!(cfg.bounds, vec![(0.0, 1.0), (0.0, 2.0)]);
        assert!(!cfg.lambda_log);
        assert_eq!(cfg.source, SpectrumSource::Exact);
        assert_eq!(cfg.cutoff, Some(12.0));
        assert_eq!(cfg.frame_n, Some(64));
        assert_eq!(cfg.effective().len(), KEYS.len());
        assert!(cfg.effective().keys().copied().eq(KEYS.iter().copied()));
    }

    #[test]
    fn later_pairs_win() {
        let cfg = ExperimentConfig::from_pairs(&pairs("h = 0.1\nh = 0.02")).unwrap();
        assert_eq!(cfg.h, 0.02);
    }

    #[test]
    fn dim_without_box_gives_unit_cube() {
        let cfg = ExperimentConfig::from_pairs(&pairs("dim = 3")).unwrap();
        assert_eq!(cfg.bounds, vec![(0.0, 1.0); 3]);
        assert!(ExperimentConfig::from_pairs(&pairs("dim = 2\nbox = 0:1")).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["h = -1", "h = 2", "nope = 1", "lambda_min = 0", "window = gauss", "box = 1:0", "h 0.1"] {
            assert!(parse_pairs(text).and_then(|p| ExperimentConfig::from_pairs(&p)).is_err(), "{text}");
        }
    }

    #[test]
    fn warns_beyond_validity() {
        let cfg = ExperimentConfig::from_pairs(&pairs("h = 0.1\nlambda_max = 200")).unwrap();
        assert!(cfg.validity_warning().is_some());
        assert!(ExperimentConfig::default().validity_warning().is_none());
    }
}
