//! Eigenvalues of [`DiscreteOperator`]s.
//!
//! Counting uses Sylvester's law of inertia: for a symmetric `A` and a shift
//! `σ`, the number of negative pivots in `A - σI = L D Lᵀ` equals the number
//! of eigenvalues below `σ`. The operators are banded in the natural node
//! ordering, so the factorization is a band `LDLᵀ` costing `O(n b²)`.
//! Partial spectra are obtained by bisection on these counts, which makes
//! every returned value certified by construction.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::operators::{DiscreteOperator, SparseSymmetricMatrix};

pub const DEFAULT_DENSE_LIMIT: usize = 5000;
pub const DEFAULT_PARTIAL_LIMIT: usize = 20_000;

/// Pivots smaller than this multiple of `‖A‖∞` count as a breakdown.
pub const BREAKDOWN_RTOL: f64 = 1e-12;
const MAX_PERTURBATIONS: usize = 8;

/// Eigenvalues in nondecreasing order, with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// `Some(Λ)` when the list holds exactly the eigenvalues below `Λ`.
    pub cutoff: Option<f64>,
    pub certified: bool,
}

impl Spectrum {
    pub fn new(mut values: Vec<f64>, cutoff: Option<f64>, certified: bool) -> Spectrum {
        values.sort_by(f64::total_cmp);
        Spectrum { values, cutoff, certified }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of stored eigenvalues strictly below `lam`.
    pub fn count_below(&self, lam: f64) -> usize {
        self.values.partition_point(|&v| v < lam)
    }

    /// Plain-text export: `#` header lines, then one value per line.
    pub fn write_text<W: Write>(&self, mut out: W, kind: &str, h: Option<f64>) -> Result<()> {
        writeln!(out, "# kind={kind}")?;
        writeln!(out, "# h={}", h.map_or_else(|| "none".to_string(), fmt_f64))?;
        writeln!(out, "# cutoff={}", self.cutoff.map_or_else(|| "none".to_string(), fmt_f64))?;
        writeln!(out, "# certified={}", self.certified)?;
        writeln!(out, "# count={}", self.values.len())?;
        for v in &self.values {
            writeln!(out, "{}", fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn read_text<R: std::io::BufRead>(input: R) -> Result<Spectrum> {
        let mut values = Vec::new();
        let mut cutoff = None;
        let mut certified = false;
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(c) = meta.strip_prefix("cutoff=") {
                    cutoff = if c == "none" { None } else { Some(c.parse().map_err(|_| Error::Parse(line.into()))?) };
                } else if let Some(c) = meta.strip_prefix("certified=") {
                    certified = c == "true";
                }
            } else if !line.is_empty() {
                values.push(line.parse::<f64>().map_err(|_| Error::Parse(line.into()))?);
            }
        }
        Ok(Spectrum::new(values, cutoff, certified))
    }
}

/// Result of an inertia count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaCount {
    /// Eigenvalues below `shift`.
    pub below: usize,
    /// The shift actually factored.
    pub shift: f64,
    /// Set when the requested shift had to be moved off a near-singular point.
    pub perturbed: bool,
}

/// Lower band of a symmetric matrix, row `i` holding columns `i-b ..= i`.
struct Band {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl Band {
    fn from_sparse(a: &SparseSymmetricMatrix) -> Band {
        let n = a.n();
        let b = a.bandwidth();
        let mut data = vec![0.0; n * (b + 1)];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[i * (b + 1) + (j + b - i)] = v;
                }
            }
        }
        Band { n, b, data }
    }

    /// Counts negative pivots of `A - shift·I = L D Lᵀ`. Returns `None` when a
    /// pivot falls below `tiny` in magnitude, unless `clamp` is set, in which
    /// case such pivots are replaced by `-tiny`.
    fn negative_pivots(&self, shift: f64, tiny: f64, clamp: bool) -> Option<usize> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        // l[i*w + (k + b - i)] = L_ik for k < i; the slot for k == i holds D_i.
        let mut l = vec![0.0; n * w];
        let mut count = 0;
        let mut t = vec![0.0; w];
        for i in 0..n {
            let lo = i.saturating_sub(b);
            // t_k = L_ik D_k, built left to right.
            for j in lo..i {
                let mut s = self.data[i * w + (j + b - i)];
                let klo = lo.max(j.saturating_sub(b));
                for k in klo..j {
                    s -= t[k - lo] * l[j * w + (k + b - j)];
                }
                t[j - lo] = s;
                l[i * w + (j + b - i)] = s / l[j * w + b];
            }
            let mut d = self.data[i * w + b] - shift;
            for j in lo..i {
                d -= t[j - lo] * l[i * w + (j + b - i)];
            }
            if d.abs() < tiny {
                if !clamp {
                    return None;
                }
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
            l[i * w + b] = d;
        }
        Some(count)
    }
}

/// Inertia count with the breakdown policy: a pivot below
/// `1e-12 ‖A‖∞` moves the shift by that amount (upwards first, then
/// alternating) and flags the result.
pub fn inertia_count(op: &DiscreteOperator, lam: f64) -> Result<InertiaCount> {
    let band = Band::from_sparse(op.matrix());
    inertia_with_band(&band, op.matrix().norm_inf(), lam)
}

fn inertia_with_band(band: &Band, norm: f64, lam: f64) -> Result<InertiaCount> {
    let tiny = BREAKDOWN_RTOL * norm.max(f64::MIN_POSITIVE);
    for attempt in 0..=MAX_PERTURBATIONS {
        let offset = match attempt {
            0 => 0.0,
            k => {
                let step = tiny * k.div_ceil(2) as f64;
                if k % 2 == 1 {
                    step
                } else {
                    -step
                }
            }
        };
        let shift = lam + offset;
        if let Some(below) = band.negative_pivots(shift, tiny, false) {
            return Ok(InertiaCount { below, shift, perturbed: attempt > 0 });
        }
    }
    Err(Error::Breakdown { shift: lam, attempts: MAX_PERTURBATIONS })
}

/// Number of eigenvalues below `lam`.
pub fn count_below(op: &DiscreteOperator, lam: f64) -> Result<usize> {
    Ok(inertia_count(op, lam)?.below)
}

pub fn dense_spectrum(op: &DiscreteOperator) -> Result<Spectrum> {
    dense_spectrum_with_limit(op, DEFAULT_DENSE_LIMIT)
}

pub fn dense_spectrum_with_limit(op: &DiscreteOperator, limit: usize) -> Result<Spectrum> {
    let n = op.n();
    if n > limit {
        return Err(Error::DenseLimit { n, limit });
    }
    let values = op.matrix().to_dense().symmetric_eigenvalues();
    Ok(Spectrum::new(values.iter().copied().collect(), None, true))
}

pub fn spectrum_below(op: &DiscreteOperator, lam: f64) -> Result<Spectrum> {
    spectrum_below_with_limit(op, lam, DEFAULT_PARTIAL_LIMIT)
}

/// All eigenvalues below `lam`, located by bisection on inertia counts.
pub fn spectrum_below_with_limit(op: &DiscreteOperator, lam: f64, limit: usize) -> Result<Spectrum> {
    let matrix = op.matrix();
    let band = Band::from_sparse(matrix);
    let norm = matrix.norm_inf();
    let top = inertia_with_band(&band, norm, lam)?;
    if top.below > limit {
        return Err(Error::PartialLimit { count: top.below, limit });
    }
    let mut values = Vec::with_capacity(top.below);
    if top.below > 0 {
        let (gersh_lo, _) = matrix.gershgorin_bounds();
        let tiny = f64::EPSILON * norm.max(f64::MIN_POSITIVE);
        let lo = gersh_lo.min(top.shift) - 1.0 - tiny;
        let count = |s: f64| band.negative_pivots(s, tiny, true).unwrap_or(0);
        let c_lo = count(lo);
        bisect(&count, lo, top.shift, c_lo, top.below, tiny, &mut values);
    }
    let certified = values.len() == top.below;
    if !certified {
        return Err(Error::CertificationFailed { found: values.len(), expected: top.below });
    }
    Ok(Spectrum::new(values, Some(lam), true))
}

fn bisect<F: Fn(f64) -> usize>(
    count: &F,
    lo: f64,
    hi: f64,
    c_lo: usize,
    c_hi: usize,
    resolution: f64,
    out: &mut Vec<f64>,
) {
    if c_hi <= c_lo {
        return;
    }
    let mid = 0.5 * (lo + hi);
    let width = hi - lo;
    if width <= resolution.max(2.0 * f64::EPSILON * lo.abs().max(hi.abs())) || mid <= lo || mid >= hi {
        out.extend(std::iter::repeat_n(mid, c_hi - c_lo));
        return;
    }
    let c_mid = count(mid).clamp(c_lo, c_hi);
    bisect(count, lo, mid, c_lo, c_mid, resolution, out);
    bisect(count, mid, hi, c_mid, c_hi, resolution, out);
}
