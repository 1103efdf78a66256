//! Riesz means, phase-space leading terms and remainder fits.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::domain::GridDomain;
use crate::eigen::{spectrum_below, Spectrum};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::operators::{DiscreteOperator, OperatorKind};
use crate::window::{CConstants, Window};

pub const CSV_HEADER: &str = "lambda,riesz,leading,remainder,ratio,epsilon,c1,c2,c3";

/// `Σ_k (λ - λ_k)₊`, summed in increasing eigenvalue order.
pub fn riesz_mean(spec: &Spectrum, lam: f64) -> Result<f64> {
    if let Some(cutoff) = spec.cutoff {
        if cutoff < lam {
            return Err(Error::UncertifiedTail { cutoff, lambda: lam });
        }
    }
    Ok(spec.values.iter().take_while(|&&v| v < lam).map(|v| lam - v).sum())
}

/// Dirichlet eigenvalues `(kπ/L)²` of `-d²/dx²` on an interval of length `L`, strictly below `lam_max`.
pub fn exact_spectrum_interval(length: f64, lam_max: f64) -> Result<Spectrum> {
    exact_spectrum_box(&[length], lam_max)
}

/// Dirichlet eigenvalues `Σ_j (k_j π/L_j)²` of `-Δ` on a box, strictly below `lam_max`.
pub fn exact_spectrum_box(lengths: &[f64], lam_max: f64) -> Result<Spectrum> {
    if lengths.is_empty() || lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::DegenerateBox(format!("side lengths {lengths:?}")));
    }
    let base: Vec<f64> = lengths.iter().map(|l| (PI / l).powi(2)).collect();
    let mut values = Vec::new();
    enumerate_box(&base, 0, 0.0, lam_max, &mut values);
    Ok(Spectrum::new(values, Some(lam_max), true))
}

fn enumerate_box(base: &[f64], axis: usize, partial: f64, lam_max: f64, out: &mut Vec<f64>) {
    // The remaining axes contribute at least Σ base (all k = 1).
    let floor: f64 = base[axis + 1..].iter().sum();
    let mut k = 1u64;
    loop {
        let v = partial + (k * k) as f64 * base[axis];
        if v + floor >= lam_max {
            break;
        }
        if axis + 1 == base.len() {
            out.push(v);
        } else {
            enumerate_box(base, axis + 1, v, lam_max, out);
        }
        k += 1;
    }
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// `∫(1 - |ξ|²)₊ dξ` over `R^d`.
pub fn reduced_integral(d: usize) -> f64 {
    unit_ball_volume(d) * 2.0 / (d as f64 + 2.0)
}

/// `vol · λ^{1+d/2} · C_d / (2π)^d`.
pub fn euclidean_leading(vol: f64, d: usize, lam: f64) -> f64 {
    if lam <= 0.0 {
        return 0.0;
    }
    vol * lam.powf(1.0 + d as f64 / 2.0) * reduced_integral(d) / (2.0 * PI).powi(d as i32)
}

/// The Li–Yau bound coincides with the leading term.
pub fn li_yau_bound(vol: f64, d: usize, lam: f64) -> f64 {
    euclidean_leading(vol, d, lam)
}

/// `∫_Ω e^{-(d-1)y₁} dy`: closed form on rectangles, a node sum on masks.
pub fn hyperbolic_weighted_volume(dom: &GridDomain) -> f64 {
    let d = dom.dim();
    if d == 1 {
        return dom.volume();
    }
    let k = (d - 1) as f64;
    match dom.rect() {
        Some(b) => {
            let tilde: f64 = b[1..].iter().map(|(lo, hi)| hi - lo).product();
            tilde * ((-k * b[0].0).exp() - (-k * b[0].1).exp()) / k
        }
        None => {
            let hd = dom.h().powi(d as i32);
            rows_by_y1(dom).iter().map(|&(y1, count)| count as f64 * hd * (-k * y1).exp()).sum()
        }
    }
}

/// `λ^{1+d/2} (2π)^{-d} C_d ∫_Ω e^{-(d-1)y₁} dy`.
pub fn hyperbolic_leading(dom: &GridDomain, lam: f64) -> f64 {
    let d = dom.dim();
    if d == 1 {
        return euclidean_leading(dom.volume(), 1, lam);
    }
    euclidean_leading(hyperbolic_weighted_volume(dom), d, lam)
}

/// Leading term for the operator kind on `dom`.
pub fn leading_term(kind: OperatorKind, dom: &GridDomain, lam: f64) -> f64 {
    match kind {
        OperatorKind::Euclidean => euclidean_leading(dom.volume(), dom.dim(), lam),
        OperatorKind::Hyperbolic => hyperbolic_leading(dom, lam),
    }
}

fn rows_by_y1(dom: &GridDomain) -> Vec<(f64, usize)> {
    let stride = dom.stride(0);
    let mut counts = vec![0usize; dom.shape()[0]];
    for flat in dom.masked_nodes() {
        counts[flat / stride] += 1;
    }
    counts.into_iter().enumerate().filter(|(_, c)| *c > 0).map(|(i, c)| (dom.coordinate(0, i), c)).collect()
}

/// Midpoint-rule value of `(2π)^{-d} ∫∫ (λ - σ(ξ, y))₊ dξ dy` with the
/// principal symbol `σ = |ξ|²` (euclidean) or `ξ₁² + e^{2y₁}|ξ̃|²` (hyperbolic).
/// The ξ box is `|ξ₁| ≤ √λ`, `|ξ̃| ≤ √λ e^{-r}` with `r = inf y₁`.
pub fn phase_space_volume(kind: OperatorKind, dom: &GridDomain, lam: f64, resolution: usize) -> Result<f64> {
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!("resolution {resolution} below 16")));
    }
    if lam <= 0.0 {
        return Ok(0.0);
    }
    let d = dom.dim();
    let root = lam.sqrt();
    // (y₁, weight) pairs; the integrand depends on y only through y₁.
    let rows: Vec<(f64, f64)> = match (kind, dom.rect()) {
        (OperatorKind::Euclidean, _) => vec![(0.0, dom.volume())],
        (OperatorKind::Hyperbolic, Some(b)) => {
            let tilde: f64 = b[1..].iter().map(|(lo, hi)| hi - lo).product();
            let step = (b[0].1 - b[0].0) / resolution as f64;
            (0..resolution).map(|i| (b[0].0 + (i as f64 + 0.5) * step, tilde * step)).collect()
        }
        (OperatorKind::Hyperbolic, None) => {
            let hd = dom.h().powi(d as i32);
            rows_by_y1(dom).into_iter().map(|(y1, c)| (y1, c as f64 * hd)).collect()
        }
    };
    let tilde_half = match kind {
        OperatorKind::Euclidean => root,
        OperatorKind::Hyperbolic => root * (-dom.y1_min()).exp(),
    };
    let half: Vec<f64> = (0..d).map(|a| if a == 0 { root } else { tilde_half }).collect();
    let steps: Vec<f64> = half.iter().map(|w| 2.0 * w / resolution as f64).collect();
    let cell: f64 = steps.iter().product();
    let total: f64 = rows
        .par_iter()
        .map(|&(y1, weight)| {
            let growth = match kind {
                OperatorKind::Euclidean => 1.0,
                OperatorKind::Hyperbolic => (2.0 * y1).exp(),
            };
            let mut idx = vec![0usize; d];
            let mut sum = 0.0;
            'cells: loop {
                let mut sigma = 0.0;
                for a in 0..d {
                    let xi = -half[a] + (idx[a] as f64 + 0.5) * steps[a];
                    sigma += if a == 0 { xi * xi } else { growth * xi * xi };
                }
                if sigma < lam {
                    sum += lam - sigma;
                }
                for a in (0..d).rev() {
                    idx[a] += 1;
                    if idx[a] < resolution {
                        continue 'cells;
                    }
                    idx[a] = 0;
                }
                break;
            }
            sum * cell * weight
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total / (2.0 * PI).powi(d as i32))
}

/// `n` points from `lo` to `hi`, geometric when `log` is set.
pub fn lambda_grid(lo: f64, hi: f64, n: usize, log: bool) -> Result<Vec<f64>> {
    if n == 0 || !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::InvalidArgument(format!("lambda grid [{lo}, {hi}] with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else if log {
                (lo.ln() + t(i) * (hi.ln() - lo.ln())).exp()
            } else {
                lo + t(i) * (hi - lo)
            }
        })
        .collect())
}

/// `ε = λ^{-α}` applied to a base window, for the diagnostic columns.
#[derive(Debug, Clone)]
pub struct EpsilonRule {
    pub alpha: f64,
    pub window: Window,
}

impl EpsilonRule {
    pub fn epsilon(&self, lam: f64) -> f64 {
        lam.powf(-self.alpha)
    }

    pub fn constants(&self, lam: f64) -> Result<CConstants> {
        self.window.scale(self.epsilon(lam)).c_constants()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveMeta {
    pub kind: OperatorKind,
    pub domain: String,
    pub h: Option<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RieszCurve {
    pub lambdas: Vec<f64>,
    pub riesz: Vec<f64>,
    pub leading: Vec<f64>,
    pub remainder: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub constants: Vec<CConstants>,
    pub meta: CurveMeta,
}

impl RieszCurve {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `riesz / leading`; zero where the leading term vanishes.
    pub fn ratio(&self, i: usize) -> f64 {
        if self.leading[i] == 0.0 {
            0.0
        } else {
            self.riesz[i] / self.leading[i]
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            let c = &self.constants[i];
            let fields = [
                self.lambdas[i],
                self.riesz[i],
                self.leading[i],
                self.remainder[i],
                self.ratio(i),
                self.epsilon[i],
                c.c1,
                c.c2,
                c.c3,
            ];
            let row: Vec<String> = fields.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Curve from a spectrum and a leading-term function.
pub fn build_curve<L>(
    spec: &Spectrum,
    leading: L,
    lambdas: &[f64],
    rule: &EpsilonRule,
    meta: CurveMeta,
) -> Result<RieszCurve>
where
    L: Fn(f64) -> f64 + Sync,
{
    if lambdas.iter().any(|&l| !(l > 0.0)) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be positive and increasing".into()));
    }
    let rows: Vec<(f64, f64, f64, CConstants)> = lambdas
        .par_iter()
        .map(|&lam| {
            let r = riesz_mean(spec, lam)?;
            Ok((r, leading(lam), rule.epsilon(lam), rule.constants(lam)?))
        })
        .collect::<Result<_>>()?;
    let mut curve = RieszCurve {
        lambdas: lambdas.to_vec(),
        riesz: Vec::with_capacity(rows.len()),
        leading: Vec::with_capacity(rows.len()),
        remainder: Vec::with_capacity(rows.len()),
        epsilon: Vec::with_capacity(rows.len()),
        constants: Vec::with_capacity(rows.len()),
        meta,
    };
    for (r, l, e, c) in rows {
        curve.riesz.push(r);
        curve.leading.push(l);
        curve.remainder.push(r - l);
        curve.epsilon.push(e);
        curve.constants.push(c);
    }
    Ok(curve)
}

/// Curve for a discrete operator: certified spectrum below `max λ` and the
/// leading term for the operator's kind on its domain.
pub fn build_operator_curve(op: &DiscreteOperator, lambdas: &[f64], rule: &EpsilonRule) -> Result<RieszCurve> {
    let top = lambdas.last().copied().unwrap_or(0.0);
    let spec = spectrum_below(op, top)?;
    let dom = op.domain();
    let meta = CurveMeta { kind: op.kind(), domain: describe_domain(dom), h: Some(dom.h()), alpha: rule.alpha };
    build_curve(&spec, |lam| leading_term(op.kind(), dom, lam), lambdas, rule, meta)
}

fn describe_domain(dom: &GridDomain) -> String {
    let b: Vec<String> = dom.bounding_box().iter().map(|(lo, hi)| format!("[{lo},{hi}]")).collect();
    let shape = if dom.rect().is_some() { "box" } else { "mask" };
    format!("{shape} {}", b.join("x"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares slope of `ln|remainder|` against `ln λ` over `λ ∈ [lo, hi]`.
pub fn fit_remainder_exponent(curve: &RieszCurve, lo: f64, hi: f64) -> Result<ExponentFit> {
    let points: Vec<(f64, f64)> = curve
        .lambdas
        .iter()
        .zip(&curve.remainder)
        .filter(|(&l, &r)| l >= lo && l <= hi && r != 0.0 && r.is_finite())
        .map(|(&l, &r)| (l.ln(), r.abs().ln()))
        .collect();
    let in_window = curve.lambdas.iter().filter(|&&l| l >= lo && l <= hi).count();
    if points.is_empty() && in_window > 0 {
        return Err(Error::AllZeroRemainder);
    }
    if points.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExponentFit { slope, intercept, residual, window: (lo, hi), samples: points.len() })
}
