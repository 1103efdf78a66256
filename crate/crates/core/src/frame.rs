//! Discrete coherent-state transform on a periodic grid.
//!
//! The embedding grid has `N` nodes per axis with spacing `h`, so the period
//! is `L = N·h`. Coherent states are `e_{ξ,y}(x) = e^{iξ·x} g^ε(x - y) / √s`
//! where `ξ` runs over the `N^d` discrete Fourier frequencies `2πk/L`, `y`
//! over the grid nodes, and `s = h^d Σ_m g^ε(m h)²` is the lattice sum of the
//! window. With the measure `(2π/L)^d h^d (2π)^{-d} = N^{-d}` on `(ξ, y)`,
//! discrete Plancherel gives
//!
//! ```text
//! Σ_{ξ,y} N^{-d} |⟨e_{ξ,y}, f⟩|² = ‖f‖²   (‖f‖² = h^d Σ_x |f(x)|²)
//! ```
//!
//! exactly, as long as the window support does not wrap around the torus.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::operators::{DiscreteOperator, OperatorKind};
use crate::window::Window;

const BINARY_MAGIC: &[u8; 8] = b"CSTPSF01";

#[derive(Clone)]
pub struct CoherentFrame {
    dim: usize,
    n: usize,
    h: f64,
    origin: Vec<f64>,
    window: Window,
    /// Half-width, in nodes, of the window sample table.
    reach: usize,
    /// `g^ε(m h)` for offsets `m ∈ [-reach, reach]^d`, row-major.
    samples: Vec<f64>,
    lattice_sum: f64,
    /// `e^{-iξ_k·origin}` for every frequency index `k`.
    origin_phase: Vec<Complex64>,
    forward_fft: Arc<dyn Fft<f64>>,
    inverse_fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CoherentFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoherentFrame")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("h", &self.h)
            .field("origin", &self.origin)
            .field("window", &self.window)
            .field("lattice_sum", &self.lattice_sum)
            .finish()
    }
}

/// Values `Φf(ξ_k, y_j)` stored y-major, ξ-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceFunction {
    key: FrameKey,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
struct FrameKey {
    dim: usize,
    n: usize,
    h: f64,
    eps: f64,
    origin: Vec<f64>,
}

/// Diagonal matrix element of an operator against a coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolValue {
    pub value: f64,
    /// Set when part of the window support falls outside the operator's nodes.
    pub truncated: bool,
}

/// Header and payload of a phase-space binary file.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceRecord {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub period: f64,
    pub eps: f64,
    pub values: Vec<(f32, f32)>,
}

/// Frame on the smallest cubic torus with spacing `h` that contains
/// `bounds` padded by the window support and one extra node.
pub fn build_frame(bounds: &[(f64, f64)], h: f64, window: &Window) -> Result<CoherentFrame> {
    if bounds.len() != window.dim() {
        return Err(Error::DimensionMismatch { expected: window.dim(), got: bounds.len() });
    }
    let pad = (window.support_radius() / h).ceil() as usize + 1;
    let origin: Vec<f64> = bounds.iter().map(|b| b.0 - pad as f64 * h).collect();
    let n = bounds.iter().map(|(lo, hi)| ((hi - lo) / h).ceil() as usize + 1 + 2 * pad).max().unwrap_or(1);
    CoherentFrame::new(origin, n, h, window.clone())
}

impl CoherentFrame {
    pub fn new(origin: Vec<f64>, n: usize, h: f64, window: Window) -> Result<CoherentFrame> {
        let dim = window.dim();
        if origin.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: origin.len() });
        }
        if n == 0 || !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid frame grid n = {n}, h = {h}")));
        }
        let period = n as f64 * h;
        let support = window.support_radius();
        if 2.0 * support >= period {
            return Err(Error::WindowWraps { support, period });
        }
        let reach = ((support / h).ceil() as usize).min((n - 1) / 2);
        let side = 2 * reach + 1;
        let table_len = side.pow(dim as u32);
        let mut samples = vec![0.0; table_len];
        let mut offset = vec![0.0; dim];
        for (t, s) in samples.iter_mut().enumerate() {
            let mut rem = t;
            for a in (0..dim).rev() {
                offset[a] = ((rem % side) as f64 - reach as f64) * h;
                rem /= side;
            }
            *s = window.value(&offset);
        }
        let hd = h.powi(dim as i32);
        let lattice_sum = hd * samples.iter().map(|g| g * g).sum::<f64>();
        if lattice_sum <= 0.0 {
            return Err(Error::InvalidArgument("window vanishes on the grid".into()));
        }
        let mut planner = FftPlanner::new();
        let forward_fft = planner.plan_fft_forward(n);
        let inverse_fft = planner.plan_fft_inverse(n);
        let mut frame = CoherentFrame {
            dim,
            n,
            h,
            origin,
            window,
            reach,
            samples,
            lattice_sum,
            origin_phase: Vec::new(),
            forward_fft,
            inverse_fft,
        };
        frame.origin_phase = (0..frame.grid_len())
            .map(|k| {
                let xi = frame.frequency(k);
                let phase: f64 = xi.iter().zip(&frame.origin).map(|(a, b)| a * b).sum();
                Complex64::from_polar(1.0, -phase)
            })
            .collect();
        Ok(frame)
    }

    /// Frame whose nodes contain the nodes of `dom`, padded by the window support.
    pub fn for_domain(dom: &GridDomain, window: &Window) -> Result<CoherentFrame> {
        if dom.dim() != window.dim() {
            return Err(Error::DimensionMismatch { expected: window.dim(), got: dom.dim() });
        }
        let h = dom.h();
        let pad = (window.support_radius() / h).ceil() as usize + 1;
        let origin: Vec<f64> = dom.origin().iter().map(|o| o - pad as f64 * h).collect();
        let n = dom.shape().iter().max().copied().unwrap_or(1) + 2 * pad;
        CoherentFrame::new(origin, n, h, window.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn period(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// `s = h^d Σ_m g^ε(m h)²`.
    pub fn lattice_sum(&self) -> f64 {
        self.lattice_sum
    }

    /// `N^d`, the number of grid nodes (and of frequencies).
    pub fn grid_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn weight_xi(&self) -> f64 {
        (2.0 * PI / self.period()).powi(self.dim as i32)
    }

    pub fn weight_y(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn measure_normalizer(&self) -> f64 {
        (2.0 * PI).powi(-(self.dim as i32))
    }

    /// Phase-space weight of a single `(ξ, y)` pair, equal to `N^{-d}`.
    pub fn atom_weight(&self) -> f64 {
        self.weight_xi() * self.weight_y() * self.measure_normalizer()
    }

    fn key(&self) -> FrameKey {
        FrameKey { dim: self.dim, n: self.n, h: self.h, eps: self.window.epsilon(), origin: self.origin.clone() }
    }

    fn split(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    fn join(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Frequency vector of index `k` (DFT order, signed frequencies).
    pub fn frequency(&self, k: usize) -> Vec<f64> {
        let step = 2.0 * PI / self.period();
        self.split(k)
            .into_iter()
            .map(|i| {
                let signed = if i < self.n.div_ceil(2) { i as f64 } else { i as f64 - self.n as f64 };
                signed * step
            })
            .collect()
    }

    /// Position of grid node `j`.
    pub fn node(&self, j: usize) -> Vec<f64> {
        self.split(j).into_iter().zip(&self.origin).map(|(i, o)| o + i as f64 * self.h).collect()
    }

    /// Grid index of a position that lies on the frame lattice.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = Vec::with_capacity(self.dim);
        for (xa, oa) in x.iter().zip(&self.origin) {
            let t = (xa - oa) / self.h;
            let r = t.round();
            if (t - r).abs() > 1e-6 || r < 0.0 || r >= self.n as f64 {
                return None;
            }
            idx.push(r as usize);
        }
        Some(self.join(&idx))
    }

    /// Nonzero window samples around node `j`: `(grid index x, g^ε(x - y_j))`,
    /// with `x - y_j` taken as the minimum periodic image.
    fn window_around(&self, j: usize) -> Vec<(usize, f64)> {
        let side = 2 * self.reach + 1;
        let center = self.split(j);
        let mut idx = vec![0; self.dim];
        let mut out = Vec::new();
        for (t, &g) in self.samples.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let mut rem = t;
            for a in (0..self.dim).rev() {
                let off = (rem % side) as isize - self.reach as isize;
                rem /= side;
                idx[a] = (center[a] as isize + off).rem_euclid(self.n as isize) as usize;
            }
            out.push((self.join(&idx), g));
        }
        out
    }

    fn fft_nd(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inverse_fft } else { &self.forward_fft };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                plan.process(buf);
                continue;
            }
            let block = stride * n;
            for start in 0..buf.len() {
                if (start % block) >= stride {
                    continue;
                }
                for (k, l) in line.iter_mut().enumerate() {
                    *l = buf[start + k * stride];
                }
                plan.process(&mut line);
                for (k, l) in line.iter().enumerate() {
                    buf[start + k * stride] = *l;
                }
            }
        }
    }

    fn check_grid_vector(&self, len: usize) -> Result<()> {
        if len != self.grid_len() {
            return Err(Error::DimensionMismatch { expected: self.grid_len(), got: len });
        }
        Ok(())
    }

    /// Calls `visit(j, row)` with `row[k] = Φf(ξ_k, y_j)` for every node `j`.
    pub fn for_each_row<F: FnMut(usize, &[Complex64])>(&self, f: &[Complex64], mut visit: F) -> Result<()> {
        self.check_grid_vector(f.len())?;
        let scale = self.weight_y() / self.lattice_sum.sqrt();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        for j in 0..self.grid_len() {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (x, g) in self.window_around(j) {
                buf[x] = f[x] * (g * scale);
            }
            self.fft_nd(&mut buf, false);
            for (b, p) in buf.iter_mut().zip(&self.origin_phase) {
                *b *= p;
            }
            visit(j, &buf);
        }
        Ok(())
    }

    /// `Φf(ξ_k, y_j) = h^d Σ_x e^{-iξ_k·x} g^ε(x - y_j) f(x) / √s`.
    pub fn forward(&self, f: &[Complex64]) -> Result<PhaseSpaceFunction> {
        let len = self.grid_len();
        let mut values = vec![Complex64::new(0.0, 0.0); len * len];
        self.for_each_row(f, |j, row| values[j * len..(j + 1) * len].copy_from_slice(row))?;
        Ok(PhaseSpaceFunction { key: self.key(), values })
    }

    pub fn forward_real(&self, f: &[f64]) -> Result<PhaseSpaceFunction> {
        let c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&c)
    }

    /// `Φ*F(x) = Σ_{k,j} N^{-d} e^{iξ_k·x} g^ε(x - y_j) F(ξ_k, y_j) / √s`.
    pub fn adjoint(&self, big_f: &PhaseSpaceFunction) -> Result<Vec<Complex64>> {
        if big_f.key != self.key() {
            return Err(Error::FrameMismatch);
        }
        let len = self.grid_len();
        let scale = self.atom_weight() / self.lattice_sum.sqrt();
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for j in 0..len {
            let row = &big_f.values[j * len..(j + 1) * len];
            for ((b, v), p) in buf.iter_mut().zip(row).zip(&self.origin_phase) {
                *b = v * p.conj();
            }
            self.fft_nd(&mut buf, true);
            for (x, g) in self.window_around(j) {
                out[x] += buf[x] * (g * scale);
            }
        }
        Ok(out)
    }

    /// `h^d Σ_x |f(x)|²`.
    pub fn grid_norm_sq(&self, f: &[Complex64]) -> f64 {
        self.weight_y() * f.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `h^d Σ_x conj(a(x)) b(x)`.
    pub fn grid_inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.weight_y()
    }

    /// `Σ N^{-d} conj(F) G`.
    pub fn phase_inner(&self, a: &PhaseSpaceFunction, b: &PhaseSpaceFunction) -> Result<Complex64> {
        if a.key != self.key() || b.key != self.key() {
            return Err(Error::FrameMismatch);
        }
        Ok(a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.atom_weight())
    }

    pub fn phase_norm_sq(&self, big_f: &PhaseSpaceFunction) -> Result<f64> {
        Ok(self.phase_inner(big_f, big_f)?.re)
    }

    /// `⟨f, Φ* m Φ f⟩ = Σ N^{-d} m(ξ_k, y_j) |Φf(ξ_k, y_j)|²`, streamed over `y`.
    pub fn multiplier_form<M: Fn(&[f64], &[f64]) -> f64>(&self, f: &[Complex64], m: M) -> Result<f64> {
        let len = self.grid_len();
        let freqs: Vec<Vec<f64>> = (0..len).map(|k| self.frequency(k)).collect();
        let mut total = 0.0;
        self.for_each_row(f, |j, row| {
            let y = self.node(j);
            total += row.iter().zip(&freqs).map(|(v, xi)| m(xi, &y) * v.norm_sqr()).sum::<f64>();
        })?;
        Ok(total * self.atom_weight())
    }

    /// The coherent state `e_{ξ_k, y_j}` on the grid, including the `1/√s` factor.
    pub fn atom(&self, k: usize, j: usize) -> Vec<Complex64> {
        let xi = self.frequency(k);
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        let norm = self.lattice_sum.sqrt();
        for (x, g) in self.window_around(j) {
            let pos = self.node(x);
            let phase: f64 = xi.iter().zip(&pos).map(|(a, b)| a * b).sum();
            out[x] = Complex64::from_polar(g / norm, phase);
        }
        out
    }

    /// `Σ_{ξ,y} N^{-d} ⟨e_{ξ,y}, T e_{ξ,y}⟩` for a real symmetric `T` acting on
    /// grid vectors. Equals `tr T` by tightness.
    pub fn trace_via_frame(&self, t: &DMatrix<f64>) -> Result<f64> {
        let len = self.grid_len();
        if t.nrows() != len || t.ncols() != len {
            return Err(Error::DimensionMismatch { expected: len, got: t.nrows() });
        }
        let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let defect = (t - t.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if defect > 1e-12 * scale {
            return Err(Error::Asymmetric { defect });
        }
        let freqs: Vec<Vec<f64>> = (0..len).map(|k| self.frequency(k)).collect();
        let hd = self.weight_y();
        let mut total = 0.0;
        for j in 0..len {
            let support = self.window_around(j);
            let m = support.len();
            let sub = DMatrix::from_fn(m, m, |a, b| t[(support[a].0, support[b].0)]);
            let positions: Vec<Vec<f64>> = support.iter().map(|(x, _)| self.node(*x)).collect();
            let mut atom = DVector::<Complex64>::zeros(m);
            for xi in &freqs {
                for (a, ((_, g), pos)) in support.iter().zip(&positions).enumerate() {
                    let phase: f64 = xi.iter().zip(pos).map(|(p, q)| p * q).sum();
                    atom[a] = Complex64::from_polar(*g, phase);
                }
                let mut form = Complex64::new(0.0, 0.0);
                for a in 0..m {
                    let row: Complex64 = (0..m).map(|b| atom[b] * sub[(a, b)]).sum();
                    form += atom[a].conj() * row;
                }
                total += form.re;
            }
        }
        Ok(total * hd / self.lattice_sum * self.atom_weight())
    }

    /// Zero-extends a vector indexed by the operator's rows onto the frame grid.
    pub fn embed(&self, op: &DiscreteOperator, v: &[f64]) -> Result<Vec<Complex64>> {
        if v.len() != op.n() {
            return Err(Error::DimensionMismatch { expected: op.n(), got: v.len() });
        }
        let map = self.operator_map(op)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid_len()];
        for (r, &x) in map.iter().enumerate() {
            out[x] = Complex64::new(v[r], 0.0);
        }
        Ok(out)
    }

    /// Zero-extends a matrix indexed by the operator's rows onto the frame grid.
    pub fn embed_matrix(&self, op: &DiscreteOperator, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if t.nrows() != op.n() || t.ncols() != op.n() {
            return Err(Error::DimensionMismatch { expected: op.n(), got: t.nrows() });
        }
        let map = self.operator_map(op)?;
        let mut out = DMatrix::zeros(self.grid_len(), self.grid_len());
        for (a, &xa) in map.iter().enumerate() {
            for (b, &xb) in map.iter().enumerate() {
                out[(xa, xb)] = t[(a, b)];
            }
        }
        Ok(out)
    }

    fn operator_map(&self, op: &DiscreteOperator) -> Result<Vec<usize>> {
        let dom = op.domain();
        op.nodes().iter().map(|&flat| self.index_of(&dom.node_position(flat)).ok_or(Error::FrameMismatch)).collect()
    }

    /// `Re ⟨e, A e⟩ / ⟨e, e⟩` for `e = e^{iξ·x} g^ε(x - y)` restricted to the
    /// operator's nodes.
    pub fn symbol(&self, op: &DiscreteOperator, xi: &[f64], y: &[f64]) -> Result<SymbolValue> {
        symbol(&self.window, op, xi, y)
    }

    /// Writes `F` in the documented binary layout.
    pub fn write_binary<W: Write>(&self, big_f: &PhaseSpaceFunction, mut out: W) -> Result<()> {
        if big_f.key != self.key() {
            return Err(Error::FrameMismatch);
        }
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.n as u32).to_le_bytes())?;
        out.write_all(&self.h.to_le_bytes())?;
        out.write_all(&self.period().to_le_bytes())?;
        out.write_all(&self.window.epsilon().to_le_bytes())?;
        let mut bytes = Vec::with_capacity(big_f.values.len() * 8);
        for v in &big_f.values {
            bytes.extend_from_slice(&(v.re as f32).to_le_bytes());
            bytes.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }
}

impl PhaseSpaceRecord {
    pub fn read<R: Read>(mut input: R) -> Result<PhaseSpaceRecord> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse("bad phase-space magic".into()));
        }
        let mut u4 = [0u8; 4];
        let mut f8 = [0u8; 8];
        input.read_exact(&mut u4)?;
        let dim = u32::from_le_bytes(u4) as usize;
        input.read_exact(&mut u4)?;
        let n = u32::from_le_bytes(u4) as usize;
        let mut read_f64 = |input: &mut R| -> Result<f64> {
            input.read_exact(&mut f8)?;
            Ok(f64::from_le_bytes(f8))
        };
        let h = read_f64(&mut input)?;
        let period = read_f64(&mut input)?;
        let eps = read_f64(&mut input)?;
        let count = n.pow(2 * dim as u32);
        let mut raw = vec![0u8; count * 8];
        input.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| (f32::from_le_bytes([c[0], c[1], c[2], c[3]]), f32::from_le_bytes([c[4], c[5], c[6], c[7]])))
            .collect();
        Ok(PhaseSpaceRecord { dim, n, h, period, eps, values })
    }
}

/// Coherent-state symbol of `op` at `(ξ, y)` with window `window`.
pub fn symbol(window: &Window, op: &DiscreteOperator, xi: &[f64], y: &[f64]) -> Result<SymbolValue> {
    let dom = op.domain();
    let dim = dom.dim();
    if xi.len() != dim || y.len() != dim || window.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: xi.len().min(y.len()) });
    }
    let h = dom.h();
    let radius = window.support_radius();
    let mut ranges = Vec::with_capacity(dim);
    let mut truncated = false;
    for a in 0..dim {
        let lo = ((y[a] - radius - dom.origin()[a]) / h).floor() as isize;
        let hi = ((y[a] + radius - dom.origin()[a]) / h).ceil() as isize;
        if lo < 0 || hi >= dom.shape()[a] as isize {
            // Part of the support may lie off the grid; detected below node by node
            // for the in-grid part, and flagged here for the rest.
            let off_grid_support = (lo..=hi).any(|i| {
                (i < 0 || i >= dom.shape()[a] as isize) && {
                    let z = dom.origin()[a] + i as f64 * h - y[a];
                    let mut probe = vec![0.0; dim];
                    probe[a] = z;
                    window.value(&probe) != 0.0
                }
            });
            truncated |= off_grid_support;
        }
        ranges.push((lo.max(0) as usize, hi.min(dom.shape()[a] as isize - 1).max(0) as usize));
    }
    let mut state: Vec<(usize, Complex64)> = Vec::new();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    let mut z = vec![0.0; dim];
    'outer: loop {
        for a in 0..dim {
            z[a] = dom.coordinate(a, idx[a]) - y[a];
        }
        let g = window.value(&z);
        if g != 0.0 {
            match op.row_of(dom.flatten(&idx)) {
                Some(r) => {
                    let phase: f64 = (0..dim).map(|a| xi[a] * dom.coordinate(a, idx[a])).sum();
                    state.push((r, Complex64::from_polar(g, phase)));
                }
                None => truncated = true,
            }
        }
        for a in (0..dim).rev() {
            if idx[a] < ranges[a].1 {
                idx[a] += 1;
                continue 'outer;
            }
            idx[a] = ranges[a].0;
        }
        break;
    }
    let norm: f64 = state.iter().map(|(_, v)| v.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("coherent state vanishes on the operator's nodes".into()));
    }
    let mut lookup = std::collections::HashMap::with_capacity(state.len());
    for (k, (r, _)) in state.iter().enumerate() {
        lookup.insert(*r, k);
    }
    let matrix = op.matrix();
    let mut form = Complex64::new(0.0, 0.0);
    for (r, v) in &state {
        let av: Complex64 = matrix.row(*r).filter_map(|(c, a)| lookup.get(&c).map(|&k| state[k].1 * a)).sum();
        form += v.conj() * av;
    }
    Ok(SymbolValue { value: form.re / norm, truncated })
}

/// Continuum symbol: `|ξ|² + ∫|∇g^ε|²` for `-Δ`, and
/// `ξ₁² + e^{2y₁}|ξ̃|² c3 + e^{2y₁} c2 + c1` for `H`.
pub fn analytic_symbol(kind: OperatorKind, window: &Window, xi: &[f64], y: &[f64]) -> Result<f64> {
    match kind {
        OperatorKind::Euclidean => Ok(xi.iter().map(|v| v * v).sum::<f64>() + window.gradient_energy()?),
        OperatorKind::Hyperbolic => {
            let c = window.c_constants()?;
            let tilde: f64 = xi[1..].iter().map(|v| v * v).sum();
            let growth = (2.0 * y[0]).exp();
            Ok(xi[0] * xi[0] + growth * tilde * c.c3 + growth * c.c2 + c.c1)
        }
    }
}

/// `(λ - A)₊` for a real symmetric matrix, via its eigendecomposition.
pub fn positive_part(a: &DMatrix<f64>, lam: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let clipped = eig.eigenvalues.map(|v| (lam - v).max(0.0));
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&clipped) * q.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::rectangle_domain;
    use crate::operators::{assemble_euclidean, assemble_hyperbolic};
    use crate::window::{make_bump_window, make_cosine_window};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn parseval_one_dimensional() {
        let w = make_cosine_window(1).scale(0.2);
        let frame = CoherentFrame::new(vec![0.0], 128, 0.05, w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let f = random_vector(&mut rng, 128);
            let big = frame.forward(&f).unwrap();
            let a = frame.phase_norm_sq(&big).unwrap();
            let b = frame.grid_norm_sq(&f);
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn lattice_sum_is_a_riemann_sum() {
        for (h, tol) in [(0.01, 1e-6), (0.005, 1e-6 / 4.0)] {
            let frame = CoherentFrame::new(vec![0.0], 256, h, make_cosine_window(1).scale(0.3)).unwrap();
            assert!((frame.lattice_sum() - 1.0).abs() <= tol, "{}", frame.lattice_sum());
        }
    }

    #[test]
    fn wrapping_window_is_rejected() {
        let w = make_cosine_window(1).scale(0.6);
        assert!(matches!(CoherentFrame::new(vec![0.0], 20, 0.05, w), Err(Error::WindowWraps { .. })));
    }

    #[test]
    fn zero_maps_to_zero() {
        let frame = CoherentFrame::new(vec![0.0, 0.0], 12, 0.1, make_cosine_window(2).scale(0.3)).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); 144];
        let big = frame.forward(&zero).unwrap();
        assert!(big.values.iter().all(|v| v.norm() == 0.0));
        assert!(frame.adjoint(&big).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn impulse_has_window_modulus() {
        let h = 0.05;
        let frame = CoherentFrame::new(vec![-1.0], 64, h, make_cosine_window(1).scale(0.4)).unwrap();
        let mut f = vec![Complex64::new(0.0, 0.0); 64];
        let x0 = 30;
        f[x0] = Complex64::new(1.0, 0.0);
        let big = frame.forward(&f).unwrap();
        let s = frame.lattice_sum();
        for j in 0..64 {
            let z = frame.node(x0)[0] - frame.node(j)[0];
            let expected = (h * frame.window().value(&[z])).powi(2) / s;
            for k in 0..64 {
                assert!((big.values[j * 64 + k].norm_sqr() - expected).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn forward_matches_direct_sum() {
        let frame = CoherentFrame::new(vec![0.3, -0.2], 10, 0.1, make_cosine_window(2).scale(0.35)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_vector(&mut rng, 100);
        let big = frame.forward(&f).unwrap();
        for &(k, j) in &[(0usize, 0usize), (3, 17), (57, 42), (99, 99)] {
            let direct = frame.grid_inner(&frame.atom(k, j), &f);
            assert!((big.values[j * 100 + k] - direct).norm() <= 1e-13);
        }
    }

    #[test]
    fn adjoint_inverts_forward_and_is_adjoint() {
        let frame = CoherentFrame::new(vec![0.0], 16, 0.1, make_cosine_window(1).scale(0.3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_vector(&mut rng, 16);
        let back = frame.adjoint(&frame.forward(&f).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).norm() <= 1e-12);
        }
        // Adjointness against a direct double sum over atoms.
        let big_g = PhaseSpaceFunction { key: frame.key(), values: random_vector(&mut rng, 256) };
        let lhs = frame.phase_inner(&frame.forward(&f).unwrap(), &big_g).unwrap();
        let mut synth = vec![Complex64::new(0.0, 0.0); 16];
        for j in 0..16 {
            for k in 0..16 {
                let atom = frame.atom(k, j);
                for (s, a) in synth.iter_mut().zip(&atom) {
                    *s += a * big_g.values[j * 16 + k] * frame.atom_weight();
                }
            }
        }
        let rhs = frame.grid_inner(&f, &synth);
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        let other = CoherentFrame::new(vec![0.0], 16, 0.1, make_cosine_window(1).scale(0.2)).unwrap();
        assert!(matches!(other.adjoint(&big_g), Err(Error::FrameMismatch)));
    }

    #[test]
    fn trace_of_identity_and_diagonal() {
        let frame = CoherentFrame::new(vec![0.0], 16, 0.1, make_cosine_window(1).scale(0.3)).unwrap();
        let id = DMatrix::<f64>::identity(16, 16);
        assert!((frame.trace_via_frame(&id).unwrap() - 16.0).abs() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let diag: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..5.0)).collect();
        let t = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
        let trace: f64 = diag.iter().sum();
        assert!((frame.trace_via_frame(&t).unwrap() - trace).abs() <= 1e-10 * trace);
        let mut asym = id.clone();
        asym[(0, 1)] = 1.0;
        assert!(matches!(frame.trace_via_frame(&asym), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn euclidean_symbol_converges_at_second_order() {
        let eps = 0.2;
        let w = make_cosine_window(1).scale(eps);
        let exact = analytic_symbol(OperatorKind::Euclidean, &w, &[0.0], &[0.5]).unwrap();
        let errors: Vec<f64> = [eps / 20.0, eps / 40.0]
            .iter()
            .map(|&h| {
                let op = assemble_euclidean(&rectangle_domain(&[(0.0, 1.0)], h).unwrap());
                let s = symbol(&w, &op, &[0.0], &[0.5]).unwrap();
                assert!(!s.truncated);
                (s.value - exact).abs()
            })
            .collect();
        let ratio = errors[0] / errors[1];
        assert!((3.0..=5.0).contains(&ratio), "{errors:?}");
    }

    #[test]
    fn euclidean_symbol_with_momentum() {
        let w = make_cosine_window(2).scale(0.2 * 2f64.sqrt());
        let op = assemble_euclidean(&rectangle_domain(&[(0.0, 1.0), (0.0, 1.0)], 1.0 / 80.0).unwrap());
        let xi = [3.0, -4.0];
        let s = symbol(&w, &op, &xi, &[0.5, 0.5]).unwrap();
        let exact = analytic_symbol(OperatorKind::Euclidean, &w, &xi, &[0.5, 0.5]).unwrap();
        assert!((s.value - exact).abs() <= 1e-2 * exact);
    }

    #[test]
    fn hyperbolic_symbol_close_to_lemma() {
        let w = make_cosine_window(2).scale(0.2 * 2f64.sqrt());
        let op = assemble_hyperbolic(&rectangle_domain(&[(0.0, 1.0), (0.0, 1.0)], 1.0 / 80.0).unwrap());
        for (xi, y) in [([1.0, 1.0], [0.5, 0.5]), ([-2.0, 5.0], [0.3, 0.6])] {
            let s = symbol(&w, &op, &xi, &y).unwrap();
            let exact = analytic_symbol(OperatorKind::Hyperbolic, &w, &xi, &y).unwrap();
            assert!(!s.truncated);
            assert!((s.value - exact).abs() <= 1e-2 * exact, "{} vs {exact}", s.value);
        }
    }

    #[test]
    fn truncated_symbol_is_flagged() {
        let w = make_cosine_window(1).scale(0.2);
        let op = assemble_euclidean(&rectangle_domain(&[(0.0, 1.0)], 0.01).unwrap());
        assert!(symbol(&w, &op, &[0.0], &[0.1]).unwrap().truncated);
        assert!(!symbol(&w, &op, &[0.0], &[0.5]).unwrap().truncated);
        assert!(symbol(&w, &op, &[0.0], &[-0.1]).unwrap().truncated);
    }

    #[test]
    fn analytic_symbol_reductions() {
        let w1 = make_cosine_window(1).scale(0.5);
        let e = analytic_symbol(OperatorKind::Euclidean, &w1, &[0.0], &[0.0]).unwrap();
        assert!((e - w1.gradient_energy().unwrap()).abs() < 1e-12);
        let h = analytic_symbol(OperatorKind::Hyperbolic, &w1, &[2.0], &[0.7]).unwrap();
        assert!((h - 4.0 - w1.c_constants().unwrap().c1).abs() < 1e-12);
        let w2 = make_cosine_window(2);
        let c = w2.c_constants().unwrap();
        let v = analytic_symbol(OperatorKind::Hyperbolic, &w2, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((v - (1.0 + c.c3 + c.c2 + c.c1)).abs() < 1e-12);
    }

    #[test]
    fn jensen_direction_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(2..8);
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = &b + b.transpose();
            let mut e = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            e /= e.norm();
            let lam = rng.random_range(-2.0..2.0);
            let lhs = (e.transpose() * positive_part(&a, lam) * &e)[(0, 0)];
            let rhs = (lam - (e.transpose() * &a * &e)[(0, 0)]).max(0.0);
            assert!(lhs >= rhs - 1e-12);
        }
    }

    #[test]
    fn binary_roundtrip() {
        let frame = CoherentFrame::new(vec![0.0], 8, 0.1, make_bump_window(1).scale(0.3)).unwrap();
        let f: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let big = frame.forward_real(&f).unwrap();
        let mut buf = Vec::new();
        frame.write_binary(&big, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 24 + 64 * 8);
        let rec = PhaseSpaceRecord::read(buf.as_slice()).unwrap();
        assert_eq!((rec.dim, rec.n), (1, 8));
        assert_eq!(rec.h, 0.1);
        assert_eq!(rec.period, 0.8);
        assert_eq!(rec.eps, 0.3);
        for (r, v) in rec.values.iter().zip(&big.values) {
            assert_eq!(r.0, v.re as f32);
            assert_eq!(r.1, v.im as f32);
        }
    }
}
