//! Independent evaluation of (−Δ)^{α/2} Φ_{k,α} in d = 2 from the singular
//! integral (C/2) ∫ (2f(x) − f(x+y) − f(x−y)) / |y|^{2+α} dy.

use branchpde::quad::{integrate, QuadConfig};
use branchpde::specfun::gamma_fn;

fn bump(beta: f64, p: [f64; 2]) -> f64 {
    let base = 1.0 - p[0] * p[0] - p[1] * p[1];
    if base <= 0.0 {
        0.0
    } else {
        base.powf(beta)
    }
}

/// `x = (x0, 0)` with `0 < x0 < 1`.
pub fn fractional_laplacian_of_bump_2d(k: u32, alpha: f64, x0: f64) -> f64 {
    let beta = k as f64 + 0.5 * alpha;
    let fx = bump(beta, [x0, 0.0]);
    let s = 0.5 * alpha;
    // |Γ(−s)| = Γ(1−s)/s
    let c = 2f64.powf(alpha) * gamma_fn(1.0 + s).unwrap()
        / (std::f64::consts::PI * gamma_fn(1.0 - s).unwrap() / s);
    let tight = QuadConfig {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };

    // G(r) = 4 ∫₀^π (f(x) − f(x + rω)) dθ, split where the circle crosses the unit sphere
    let g = |r: f64| -> f64 {
        let h = |th: f64| fx - bump(beta, [x0 + r * th.cos(), r * th.sin()]);
        let cth = (1.0 - x0 * x0 - r * r) / (2.0 * r * x0);
        let pi = std::f64::consts::PI;
        let v = if cth.abs() < 1.0 {
            let th = cth.acos();
            integrate(h, 0.0, th, tight).unwrap().value + integrate(h, th, pi, tight).unwrap().value
        } else {
            integrate(h, 0.0, pi, tight).unwrap().value
        };
        4.0 * v
    };

    // Laplacian of (1 − ρ)^β at ρ = x0²
    let rho = x0 * x0;
    let lap = -4.0 * beta * (1.0 - rho).powf(beta - 1.0)
        + 4.0 * beta * (beta - 1.0) * rho * (1.0 - rho).powf(beta - 2.0);
    let r0: f64 = 1e-3;
    let near = -std::f64::consts::PI * lap * r0.powf(2.0 - alpha) / (2.0 - alpha);

    // r = v^m flattens the r^{1−α} behaviour at the origin
    let m = 1.0 / (2.0 - alpha);
    let f = |v: f64| {
        let r = v.powf(m);
        g(r) * r.powf(-1.0 - alpha) * m * v.powf(m - 1.0)
    };
    let knots = [r0, 1.0 - x0, 1.0 + x0];
    let mut mid = 0.0;
    for w in knots.windows(2) {
        mid += integrate(
            f,
            w[0].powf(1.0 / m),
            w[1].powf(1.0 / m),
            QuadConfig::rel(1e-10),
        )
        .unwrap()
        .value;
    }
    // beyond 1 + x0 the shifted point is always outside the ball
    let far = 4.0 * std::f64::consts::PI * fx * (1.0 + x0).powf(-alpha) / alpha;
    0.5 * c * (near + mid + far)
}
