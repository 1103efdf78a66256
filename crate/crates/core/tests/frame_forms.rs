//! Phase-space multiplier identities: `Φ* ξ₁² Φ` and `Φ* e^{2y₁}|ξ̃|² Φ`
//! against their position-space forms, checked for second-order convergence.

use std::f64::consts::PI;

use coherent_weyl::frame::CoherentFrame;
use coherent_weyl::window::make_bump_window;
use num_complex::Complex64;

/// `cos⁴(π(x - c)/(2w))` on `|x - c| < w`; three continuous derivatives.
fn profile(x: f64, c: f64, w: f64) -> f64 {
    let t = (x - c) / w;
    if t.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * PI * t).cos().powi(4)
    }
}

fn xi1_error(n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let window = make_bump_window(1).scale(0.3);
    let c1 = window.c_constants().unwrap().c1;
    let frame = CoherentFrame::new(vec![0.0], n, h, window).unwrap();
    let psi: Vec<f64> = (0..n).map(|i| profile(i as f64 * h, 0.5, 0.25)).collect();
    let f: Vec<Complex64> = psi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let lhs = frame.multiplier_form(&f, |xi, _| xi[0] * xi[0]).unwrap();
    let diff: f64 = (0..n).map(|i| ((psi[(i + 1) % n] - psi[i]) / h).powi(2)).sum::<f64>() * h;
    let norm: f64 = psi.iter().map(|v| v * v).sum::<f64>() * h;
    (lhs - diff - c1 * norm).abs()
}

fn tilde_error(n: usize) -> f64 {
    let h = 1.0 / n as f64;
    // Factor half-width 0.4/√2 ≈ 0.28; ψ lives in [0.3, 0.7]², so no atom
    // touching ψ wraps around the unit torus.
    let window = make_bump_window(2).scale(0.4);
    let c = window.c_constants().unwrap();
    let frame = CoherentFrame::new(vec![0.0, 0.0], n, h, window).unwrap();
    let psi: Vec<f64> =
        (0..n * n).map(|k| profile((k / n) as f64 * h, 0.5, 0.2) * profile((k % n) as f64 * h, 0.5, 0.2)).collect();
    let f: Vec<Complex64> = psi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let lhs = frame.multiplier_form(&f, |xi, y| (2.0 * y[0]).exp() * xi[1] * xi[1]).unwrap();
    let mut weighted = 0.0;
    let mut tilde = 0.0;
    for i in 0..n {
        let growth = (2.0 * i as f64 * h).exp();
        for j in 0..n {
            let v = psi[i * n + j];
            let d = (psi[i * n + (j + 1) % n] - v) / h;
            weighted += growth * v * v;
            tilde += growth * d * d;
        }
    }
    let hd = h * h;
    (lhs - c.c2 * weighted * hd - c.c3 * tilde * hd).abs()
}

#[test]
fn xi1_squared_form_converges_at_second_order() {
    let (a, b) = (xi1_error(64), xi1_error(128));
    let ratio = a / b;
    assert!((3.0..=5.0).contains(&ratio), "errors {a:e} {b:e} ratio {ratio}");
}

#[test]
fn tilde_form_converges_at_second_order() {
    let (a, b) = (tilde_error(40), tilde_error(80));
    let ratio = a / b;
    assert!((3.0..=5.0).contains(&ratio), "errors {a:e} {b:e} ratio {ratio}");
}
