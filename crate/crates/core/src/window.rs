//! Windows `g` for coherent states and their scaled copies `g^ε`.
//!
//! A window is even, has unit `L²` norm and is supported in the ball of
//! radius `ε`. The shipped windows are separable, `g(z) = Π_j p_j(z_j)`, with
//! every factor even, non-negative and unit-normalized. Each factor lives on
//! `|u| ≤ ε/√d`, so the product is supported in the ball of radius `ε`.
//!
//! Separability makes every window integral a product of one-dimensional
//! integrals, which are evaluated with adaptive Gauss–Kronrod quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

const QUAD_ABS_TOL: f64 = 1e-10;
const QUAD_REL_TOL: f64 = 1e-12;

/// Reference shape of a one-dimensional factor on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileShape {
    /// `cos(πv/2)`; continuous, with a slope jump at `|v| = 1`.
    Cosine,
    /// `exp(-1/(1 - v²))`; smooth with compact support.
    Bump,
}

impl ProfileShape {
    fn value(self, v: f64) -> f64 {
        if v.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            ProfileShape::Cosine => (0.5 * PI * v).cos(),
            ProfileShape::Bump => (-1.0 / (1.0 - v * v)).exp(),
        }
    }

    fn derivative(self, v: f64) -> f64 {
        if v.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            ProfileShape::Cosine => -0.5 * PI * (0.5 * PI * v).sin(),
            ProfileShape::Bump => {
                let q = 1.0 - v * v;
                (-1.0 / q).exp() * (-2.0 * v / (q * q))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProfileShape::Cosine => "cosine",
            ProfileShape::Bump => "bump",
        }
    }
}

/// An even one-dimensional factor `u ↦ amplitude · shape(u / half_width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub shape: ProfileShape,
    pub half_width: f64,
    pub amplitude: f64,
}

impl Profile {
    pub fn value(&self, u: f64) -> f64 {
        self.amplitude * self.shape.value(u / self.half_width)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.amplitude / self.half_width * self.shape.derivative(u / self.half_width)
    }

    /// `p_ε(u) = ε^{-1/2} p(u/ε)`.
    fn scaled(&self, eps: f64) -> Profile {
        Profile { shape: self.shape, half_width: self.half_width * eps, amplitude: self.amplitude / eps.sqrt() }
    }

    fn integral<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        integrate(f, -self.half_width, self.half_width, QUAD_ABS_TOL, QUAD_REL_TOL).value
    }

    /// `∫ p²`.
    pub fn norm_sq(&self) -> f64 {
        self.integral(|u| self.value(u).powi(2))
    }

    /// `∫ (p')²`.
    pub fn derivative_norm_sq(&self) -> f64 {
        self.integral(|u| self.derivative(u).powi(2))
    }

    /// `∫ e^{2u} p(u)²`.
    pub fn exp_weighted_norm_sq(&self) -> f64 {
        self.integral(|u| (2.0 * u).exp() * self.value(u).powi(2))
    }
}

type WindowFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Form {
    Separable(Vec<Profile>),
    /// Arbitrary window given as a closure on the unscaled coordinates.
    General {
        base: WindowFn,
        scale: f64,
    },
}

/// The window `g^ε`.
#[derive(Clone)]
pub struct Window {
    dim: usize,
    eps: f64,
    support_radius: f64,
    form: Form,
}

impl fmt::Debug for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Window");
        s.field("dim", &self.dim).field("eps", &self.eps).field("support_radius", &self.support_radius);
        match &self.form {
            Form::Separable(p) => s.field("profiles", p),
            Form::General { .. } => s.field("profiles", &"<non-separable>"),
        };
        s.finish()
    }
}

/// The constants entering the symbol of `H`:
/// `c1 = ∫(∂₁g^ε)²`, `c2 = ∫e^{2z₁}|∇_z̃ g^ε|²`, `c3 = ∫e^{2z₁}(g^ε)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

fn separable(dim: usize, shape: ProfileShape) -> Window {
    assert!(dim >= 1, "window dimension must be at least 1");
    let half_width = 1.0 / (dim as f64).sqrt();
    let unit = Profile { shape, half_width, amplitude: 1.0 };
    let amplitude = match shape {
        // ∫_{-a}^{a} cos²(πu/2a) du = a.
        ProfileShape::Cosine => half_width.sqrt().recip(),
        ProfileShape::Bump => unit.norm_sq().sqrt().recip(),
    };
    let profile = Profile { amplitude, ..unit };
    Window { dim, eps: 1.0, support_radius: 1.0, form: Form::Separable(vec![profile; dim]) }
}

/// Separable window with factors `d^{1/4} cos(π√d u / 2)` on `|u| ≤ 1/√d`.
pub fn make_cosine_window(dim: usize) -> Window {
    separable(dim, ProfileShape::Cosine)
}

/// Separable window with factors proportional to `exp(-1/(1 - d u²))` on
/// `|u| < 1/√d`, normalized numerically.
pub fn make_bump_window(dim: usize) -> Window {
    separable(dim, ProfileShape::Bump)
}

/// `g^ε(z) = ε^{-d/2} g(z/ε)`.
pub fn scale(w: &Window, eps: f64) -> Window {
    w.scale(eps)
}

/// See [`Window::c_constants`].
pub fn c_constants(w: &Window) -> Result<CConstants> {
    w.c_constants()
}

impl Window {
    /// A window from explicit factors, one per axis. The factors are used as
    /// given; callers are responsible for evenness and normalization.
    pub fn from_profiles(profiles: Vec<Profile>) -> Result<Window> {
        if profiles.is_empty() {
            return Err(Error::InvalidArgument("at least one factor is required".into()));
        }
        let support_radius = profiles.iter().map(|p| p.half_width * p.half_width).sum::<f64>().sqrt();
        Ok(Window { dim: profiles.len(), eps: 1.0, support_radius, form: Form::Separable(profiles) })
    }

    /// A non-separable window from a closure. Only pointwise evaluation (and
    /// hence the frame transforms) is available for such windows.
    pub fn general<F>(dim: usize, support_radius: f64, f: F) -> Window
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Window { dim, eps: 1.0, support_radius, form: Form::General { base: Arc::new(f), scale: 1.0 } }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.form, Form::Separable(_))
    }

    pub fn profiles(&self) -> Option<&[Profile]> {
        match &self.form {
            Form::Separable(p) => Some(p),
            Form::General { .. } => None,
        }
    }

    /// Name of the factor shape, or `"general"`.
    pub fn kind_name(&self) -> &'static str {
        match &self.form {
            Form::Separable(p) => p[0].shape.name(),
            Form::General { .. } => "general",
        }
    }

    pub fn scale(&self, eps: f64) -> Window {
        assert!(eps > 0.0 && eps.is_finite(), "scale factor must be positive");
        let form = match &self.form {
            Form::Separable(p) => Form::Separable(p.iter().map(|f| f.scaled(eps)).collect()),
            Form::General { base, scale } => Form::General { base: Arc::clone(base), scale: scale * eps },
        };
        Window { dim: self.dim, eps: self.eps * eps, support_radius: self.support_radius * eps, form }
    }

    /// `g(z)`.
    pub fn value(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim);
        match &self.form {
            Form::Separable(p) => p.iter().zip(z).map(|(f, &u)| f.value(u)).product(),
            Form::General { base, scale } => {
                let unscaled: Vec<f64> = z.iter().map(|u| u / scale).collect();
                scale.powf(-(self.dim as f64) / 2.0) * base(&unscaled)
            }
        }
    }

    fn factors(&self) -> Result<&[Profile]> {
        self.profiles().ok_or(Error::NotSeparable)
    }

    /// `∫ g²`.
    pub fn norm_sq(&self) -> Result<f64> {
        Ok(self.factors()?.iter().map(Profile::norm_sq).product())
    }

    /// `∫ (∂_j g)²`.
    pub fn partial_energy(&self, axis: usize) -> Result<f64> {
        let p = self.factors()?;
        Ok(p.iter().enumerate().map(|(j, f)| if j == axis { f.derivative_norm_sq() } else { f.norm_sq() }).product())
    }

    /// `∫ |∇g|²`, the constant in the symbol of `-Δ`.
    pub fn gradient_energy(&self) -> Result<f64> {
        (0..self.dim).map(|j| self.partial_energy(j)).sum()
    }

    pub fn c_constants(&self) -> Result<CConstants> {
        let p = self.factors()?;
        let first = &p[0];
        let rest = &p[1..];
        let rest_norms: Vec<f64> = rest.iter().map(Profile::norm_sq).collect();
        let rest_norm: f64 = rest_norms.iter().product();
        let weighted = first.exp_weighted_norm_sq();
        let tilde_energy: f64 = rest
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let others: f64 = rest_norms.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, n)| n).product();
                f.derivative_norm_sq() * others
            })
            // `sum` of an empty f64 iterator is -0.0.
            .fold(0.0, |acc, v| acc + v);
        Ok(CConstants {
            c1: first.derivative_norm_sq() * rest_norm,
            c2: weighted * tilde_energy,
            c3: weighted * rest_norm,
        })
    }
}
