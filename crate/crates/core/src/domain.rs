//! Bounded domains represented as masks on a uniform grid.
//!
//! Nodes sit at `origin + i·h` along every axis and are stored row-major
//! (last axis fastest). A node is part of the domain when its mask bit is
//! set; every other node acts as Dirichlet boundary. The outermost layer of
//! the grid is never masked, so each masked node has all its neighbors
//! inside the grid.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::fmt_f64;

// Relative slack, in grid units, for boundary and distance comparisons.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    h: f64,
    origin: Vec<f64>,
    shape: Vec<usize>,
    bounding_box: Vec<(f64, f64)>,
    mask: Vec<bool>,
    /// Set when the domain is exactly an axis-aligned box.
    rect: Option<Vec<(f64, f64)>>,
}

/// The open box `Π (lo_j, hi_j)` sampled with spacing `h`; the mask holds
/// the nodes strictly inside.
pub fn rectangle_domain(bounds: &[(f64, f64)], h: f64) -> Result<GridDomain> {
    GridDomain::rectangle(bounds, h)
}

pub fn erode(dom: &GridDomain, eps: f64) -> Result<GridDomain> {
    dom.erode(eps)
}

pub fn dilate(dom: &GridDomain, eps: f64) -> Result<GridDomain> {
    dom.dilate(eps)
}

pub fn measure(dom: &GridDomain) -> f64 {
    dom.measure()
}

impl GridDomain {
    pub fn rectangle(bounds: &[(f64, f64)], h: f64) -> Result<GridDomain> {
        if bounds.is_empty() {
            return Err(Error::DegenerateBox("no axes".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
        }
        for &(lo, hi) in bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::DegenerateBox(format!("interval ({lo}, {hi})")));
            }
            if h >= hi - lo {
                return Err(Error::DegenerateBox(format!(
                    "spacing {h} is not smaller than the side {} of ({lo}, {hi})",
                    hi - lo
                )));
            }
        }
        let origin: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        // The last node sits on or beyond the upper face so it is never masked.
        let shape: Vec<usize> = bounds.iter().map(|&(lo, hi)| ((hi - lo) / h - SNAP).ceil() as usize + 1).collect();
        let mut dom = GridDomain {
            dim: bounds.len(),
            h,
            origin,
            shape,
            bounding_box: bounds.to_vec(),
            mask: Vec::new(),
            rect: Some(bounds.to_vec()),
        };
        let total = dom.node_count();
        let mut mask = vec![false; total];
        let mut idx = vec![0usize; dom.dim];
        for (flat, m) in mask.iter_mut().enumerate() {
            dom.unflatten_into(flat, &mut idx);
            *m = idx.iter().enumerate().all(|(a, &i)| {
                let x = dom.origin[a] + i as f64 * h;
                let (lo, hi) = bounds[a];
                x > lo + SNAP * h && x < hi - SNAP * h
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::DegenerateBox("no interior nodes".into()));
        }
        dom.mask = mask;
        Ok(dom)
    }

    /// A domain from an explicit mask. The outermost grid layer must be unmasked.
    pub fn from_mask(
        h: f64,
        origin: Vec<f64>,
        shape: Vec<usize>,
        bounding_box: Vec<(f64, f64)>,
        mask: Vec<bool>,
    ) -> Result<GridDomain> {
        let dim = shape.len();
        if dim == 0 || origin.len() != dim || bounding_box.len() != dim {
            return Err(Error::InvalidArgument("inconsistent dimensions".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
        }
        let total: usize = shape.iter().product();
        if mask.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: mask.len() });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidArgument("mask is empty".into()));
        }
        let dom = GridDomain { dim, h, origin, shape, bounding_box, mask, rect: None };
        let mut idx = vec![0usize; dim];
        for flat in dom.masked_nodes() {
            dom.unflatten_into(flat, &mut idx);
            if idx.iter().zip(&dom.shape).any(|(&i, &n)| i == 0 || i + 1 >= n) {
                return Err(Error::InvalidArgument("masked node on the outer grid layer".into()));
            }
            for (a, &i) in idx.iter().enumerate() {
                let x = dom.origin[a] + i as f64 * h;
                let (lo, hi) = dom.bounding_box[a];
                if !(x > lo && x < hi) {
                    return Err(Error::InvalidArgument("masked node outside the bounding box".into()));
                }
            }
        }
        Ok(dom)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bounding_box(&self) -> &[(f64, f64)] {
        &self.bounding_box
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// The exact box when the domain is a rectangle built by [`rectangle_domain`].
    pub fn rect(&self) -> Option<&[(f64, f64)]> {
        self.rect.as_deref()
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn interior_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn masked_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn is_masked(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    /// Stride of `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    pub fn unflatten_into(&self, mut flat: usize, idx: &mut [usize]) {
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        self.origin[axis] + index as f64 * self.h
    }

    pub fn node_position(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        self.unflatten_into(flat, &mut idx);
        idx.iter().enumerate().map(|(a, &i)| self.coordinate(a, i)).collect()
    }

    /// `count · h^d`.
    pub fn measure(&self) -> f64 {
        self.interior_count() as f64 * self.h.powi(self.dim as i32)
    }

    /// The volume used by leading terms: the exact box volume for
    /// rectangles, the grid measure otherwise.
    pub fn volume(&self) -> f64 {
        match &self.rect {
            Some(b) => b.iter().map(|(lo, hi)| hi - lo).product(),
            None => self.measure(),
        }
    }

    fn first_axis_extent(&self) -> (usize, usize) {
        let stride = self.stride(0);
        let rows: Vec<usize> = self.masked_nodes().map(|f| f / stride).collect();
        let lo = rows.iter().copied().min().unwrap_or(0);
        let hi = rows.iter().copied().max().unwrap_or(0);
        (lo, hi)
    }

    /// `r = inf { y₁ : y ∈ Ω }`. Exact for rectangles, otherwise the first
    /// unmasked node below the lowest masked row.
    pub fn y1_min(&self) -> f64 {
        match &self.rect {
            Some(b) => b[0].0,
            None => self.coordinate(0, self.first_axis_extent().0) - self.h,
        }
    }

    /// `R = sup { y₁ : y ∈ Ω }`, with the same conventions as [`Self::y1_min`].
    pub fn y1_max(&self) -> f64 {
        match &self.rect {
            Some(b) => b[0].1,
            None => self.coordinate(0, self.first_axis_extent().1) + self.h,
        }
    }

    /// Squared euclidean distance, in grid units, from every node to the
    /// nearest node whose mask bit equals `target`.
    fn distance_sq_to(&self, target: bool) -> Vec<f64> {
        let mut dist: Vec<f64> = self.mask.iter().map(|&m| if m == target { 0.0 } else { f64::INFINITY }).collect();
        for axis in 0..self.dim {
            let n = self.shape[axis];
            let stride = self.stride(axis);
            let mut line = vec![0.0; n];
            let mut out = vec![0.0; n];
            let mut scratch = EdtScratch::new(n);
            for start in 0..self.node_count() {
                // Lines along `axis` start at nodes whose index on that axis is zero.
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for (k, l) in line.iter_mut().enumerate() {
                    *l = dist[start + k * stride];
                }
                scratch.transform(&line, &mut out);
                for (k, &v) in out.iter().enumerate() {
                    dist[start + k * stride] = v;
                }
            }
        }
        dist
    }

    /// `Ω_ε`: masked nodes farther than `eps` from every unmasked node.
    pub fn erode(&self, eps: f64) -> Result<GridDomain> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be non-negative, got {eps}")));
        }
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let limit = eps / self.h;
        let dist = self.distance_sq_to(false);
        let mask: Vec<bool> =
            self.mask.iter().zip(&dist).map(|(&m, &d2)| m && d2.sqrt() > limit * (1.0 + SNAP)).collect();
        if !mask.iter().any(|&m| m) {
            return Err(Error::EmptyErosion { eps });
        }
        Ok(GridDomain { mask, rect: None, ..self.clone() })
    }

    /// `Ω^ε`: nodes closer than `eps` to a masked node. The grid is padded so
    /// the dilated set keeps an unmasked outer layer.
    pub fn dilate(&self, eps: f64) -> Result<GridDomain> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be non-negative, got {eps}")));
        }
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let limit = eps / self.h;
        let pad = (limit * (1.0 + SNAP)).floor() as usize + 1;
        let shape: Vec<usize> = self.shape.iter().map(|n| n + 2 * pad).collect();
        let origin: Vec<f64> = self.origin.iter().map(|o| o - pad as f64 * self.h).collect();
        let bounding_box: Vec<(f64, f64)> = self.bounding_box.iter().map(|&(lo, hi)| (lo - eps, hi + eps)).collect();
        let mut padded =
            GridDomain { dim: self.dim, h: self.h, origin, shape, bounding_box, mask: Vec::new(), rect: None };
        let mut mask = vec![false; padded.node_count()];
        let mut idx = vec![0; self.dim];
        for flat in self.masked_nodes() {
            self.unflatten_into(flat, &mut idx);
            idx.iter_mut().for_each(|i| *i += pad);
            mask[padded.flatten(&idx)] = true;
        }
        padded.mask = mask;
        let dist = padded.distance_sq_to(true);
        for (m, d2) in padded.mask.iter_mut().zip(dist) {
            if d2.sqrt() < limit * (1.0 - SNAP) {
                *m = true;
            }
        }
        Ok(padded)
    }

    /// Writes the mask in the plain-text run-length format documented in the
    /// README.
    pub fn write_mask<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# coherent-weyl grid mask")?;
        writeln!(out, "dim {}", self.dim)?;
        writeln!(out, "h {}", fmt_f64(self.h))?;
        let mut line = String::from("box");
        for (lo, hi) in &self.bounding_box {
            write!(line, " {} {}", fmt_f64(*lo), fmt_f64(*hi)).unwrap();
        }
        writeln!(out, "{line}")?;
        let origin: Vec<String> = self.origin.iter().map(|&o| fmt_f64(o)).collect();
        writeln!(out, "origin {}", origin.join(" "))?;
        let shape: Vec<String> = self.shape.iter().map(|n| n.to_string()).collect();
        writeln!(out, "shape {}", shape.join(" "))?;
        let row_len = self.shape[self.dim - 1];
        for row in self.mask.chunks(row_len) {
            let mut runs = Vec::new();
            let mut current = false;
            let mut run = 0usize;
            for &bit in row {
                if bit == current {
                    run += 1;
                } else {
                    runs.push(run.to_string());
                    current = bit;
                    run = 1;
                }
            }
            runs.push(run.to_string());
            writeln!(out, "row {}", runs.join(" "))?;
        }
        Ok(())
    }

    pub fn read_mask<R: BufRead>(input: R) -> Result<GridDomain> {
        fn floats(tokens: &[&str]) -> Result<Vec<f64>> {
            tokens.iter().map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t}: {e}")))).collect()
        }
        let mut dim = None;
        let mut h = None;
        let mut bbox = None;
        let mut origin = None;
        let mut shape: Option<Vec<usize>> = None;
        let mut mask = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "dim" => {
                    dim = Some(
                        tokens.get(1).and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| Error::Parse(line.into()))?,
                    )
                }
                "h" => h = Some(floats(&tokens[1..])?.first().copied().ok_or_else(|| Error::Parse(line.into()))?),
                "box" => {
                    let v = floats(&tokens[1..])?;
                    if v.len() % 2 != 0 {
                        return Err(Error::Parse("box needs lo/hi pairs".into()));
                    }
                    bbox = Some(v.chunks(2).map(|c| (c[0], c[1])).collect::<Vec<_>>());
                }
                "origin" => origin = Some(floats(&tokens[1..])?),
                "shape" => {
                    shape = Some(
                        tokens[1..]
                            .iter()
                            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("{t}: {e}"))))
                            .collect::<Result<_>>()?,
                    )
                }
                "row" => {
                    let row_len = *shape
                        .as_ref()
                        .and_then(|s| s.last())
                        .ok_or_else(|| Error::Parse("row before shape".into()))?;
                    let mut bit = false;
                    let start = mask.len();
                    for t in &tokens[1..] {
                        let run: usize = t.parse().map_err(|e| Error::Parse(format!("{t}: {e}")))?;
                        mask.extend(std::iter::repeat_n(bit, run));
                        bit = !bit;
                    }
                    if mask.len() - start != row_len {
                        return Err(Error::Parse(format!("row of length {} instead of {row_len}", mask.len() - start)));
                    }
                }
                other => return Err(Error::Parse(format!("unknown key {other}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing {k}"));
        let dim = dim.ok_or_else(|| missing("dim"))?;
        let shape = shape.ok_or_else(|| missing("shape"))?;
        let origin = origin.ok_or_else(|| missing("origin"))?;
        let bbox = bbox.ok_or_else(|| missing("box"))?;
        if shape.len() != dim {
            return Err(Error::Parse("shape does not match dim".into()));
        }
        GridDomain::from_mask(h.ok_or_else(|| missing("h"))?, origin, shape, bbox, mask)
    }
}

/// One-dimensional exact squared-distance transform (lower envelope of
/// parabolas), applied axis by axis.
struct EdtScratch {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl EdtScratch {
    fn new(n: usize) -> Self {
        EdtScratch { vertices: vec![0; n], bounds: vec![0.0; n + 1] }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
        if finite.is_empty() {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
        let v = &mut self.vertices;
        let z = &mut self.bounds;
        let mut k = 0usize;
        v[0] = finite[0];
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        let parabola = |q: usize| f[q] + (q * q) as f64;
        for &q in &finite[1..] {
            // z[0] = -inf, so the envelope never empties.
            let s = loop {
                let p = v[k];
                let s = (parabola(q) - parabola(p)) / (2.0 * (q as f64 - p as f64));
                if s <= z[k] {
                    k -= 1;
                } else {
                    break s;
                }
            };
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        let mut k = 0usize;
        for (q, o) in out.iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let d = q as f64 - v[k] as f64;
            *o = d * d + f[v[k]];
        }
    }
}
