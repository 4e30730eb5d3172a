//! Numerical integration used to check the leaf model against its definition.

use metatree_core::NormalGammaParams;
use std::f64::consts::PI;

pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

pub fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    h * (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>()
}

fn normal_pdf(x: f64, mean: f64, precision: f64) -> f64 {
    (precision / (2.0 * PI)).sqrt() * (-0.5 * precision * (x - mean).powi(2)).exp()
}

/// `∫∫ N(y | μ, 1/τ) N(μ | m, 1/(κτ)) Gam(τ | α, β) dμ dτ`, integrating over
/// `u = ln τ` and, for each `τ`, over a window around the product's mode.
pub fn predictive_density_2d(p: &NormalGammaParams, y: f64) -> f64 {
    let log_norm = p.alpha * p.beta.ln() - libm::lgamma(p.alpha);
    let outer = |u: f64| {
        let tau = u.exp();
        // Gam(τ) dτ = Gam(τ) τ du
        let w = (log_norm + p.alpha * u - p.beta * tau).exp();
        if w == 0.0 {
            return 0.0;
        }
        let centre = (p.kappa * p.m + y) / (p.kappa + 1.0);
        let half = 12.0 / (tau * (p.kappa + 1.0)).sqrt();
        let inner = trapezoid(
            |mu| normal_pdf(y, mu, tau) * normal_pdf(mu, p.m, p.kappa * tau),
            centre - half,
            centre + half,
            200,
        );
        w * inner
    };
    trapezoid(outer, -30.0, 8.0, 1500)
}

/// `∫ f(y) dy` over the real line through `y = c + s·tan θ`.
pub fn integrate_real_line(f: impl Fn(f64) -> f64, c: f64, s: f64, n: usize) -> f64 {
    midpoint(
        |theta| {
            let t = theta.tan();
            f(c + s * t) * s * (1.0 + t * t)
        },
        -PI / 2.0,
        PI / 2.0,
        n,
    )
}
