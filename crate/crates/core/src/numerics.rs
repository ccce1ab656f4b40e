//! Quadrature and inversion primitives shared by the mathematical modules.
//!
//! Three building blocks live here: an adaptive Gauss-Legendre integrator
//! for integrands with an inverse-square-root singularity at the upper
//! endpoint (removed by the substitution x = b - u^2), a semi-infinite
//! integrator for integrands with algebraic ~1/2 and ~3/2 decay exponents,
//! and a bracketed inversion of strictly monotone scalar maps.
//!
//! All functions are pure; nodes and weights are computed once at first use.

use std::f64::consts::PI;
use std::sync::LazyLock;

use crate::error::{Error, Result};

/// Tolerances and refinement budget for quadrature and inversion.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Relative tolerance, > 0.
    pub rel_tol: f64,
    /// Absolute floor, >= 0.
    pub abs_tol: f64,
    /// Maximum number of panel splits (or inversion iterations), >= 1.
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        // Downstream acceptance tolerances are all >= 1e-8; these defaults
        // leave two orders of headroom.
        QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_refinements: 2000,
        }
    }
}

impl QuadratureSpec {
    /// Tighter-than-default spec used where results feed further cancellation.
    pub fn tight() -> Self {
        QuadratureSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_refinements: 4000,
        }
    }

    pub fn tolerance_for(&self, value: f64) -> f64 {
        (self.rel_tol * value.abs()).max(self.abs_tol)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || self.max_refinements < 1 {
            return Err(Error::InvalidDomain(format!(
                "quadrature spec requires rel_tol > 0, abs_tol >= 0, max_refinements >= 1 \
                 (got {:?})",
                self
            )));
        }
        Ok(())
    }
}

/// Value, its error estimate, and the number of integrand evaluations.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rules, derived at runtime by Newton iteration on P_n.

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 1..=m {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..64 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                let (p, d) = legendre_and_deriv(n, x);
                dp = d;
                x -= p / d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i - 1] = x;
        weights[i - 1] = w;
        nodes[n - i] = -x;
        weights[n - i] = w;
    }
    (nodes, weights)
}

static RULE_LO: LazyLock<(Vec<f64>, Vec<f64>)> = LazyLock::new(|| gauss_legendre_rule(7));
static RULE_HI: LazyLock<(Vec<f64>, Vec<f64>)> = LazyLock::new(|| gauss_legendre_rule(15));

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn eval_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, evals: &mut usize) -> Result<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut hi = 0.0;
    for (x, w) in RULE_HI.0.iter().zip(RULE_HI.1.iter()) {
        let t = c + h * x;
        let y = f(t);
        if !y.is_finite() {
            return Err(Error::NonFiniteIntegrand(format!("f({t}) = {y}")));
        }
        hi += w * y;
    }
    let mut lo = 0.0;
    for (x, w) in RULE_LO.0.iter().zip(RULE_LO.1.iter()) {
        let t = c + h * x;
        let y = f(t);
        if !y.is_finite() {
            return Err(Error::NonFiniteIntegrand(format!("f({t}) = {y}")));
        }
        lo += w * y;
    }
    *evals += RULE_HI.0.len() + RULE_LO.0.len();
    Ok(Panel {
        a,
        b,
        value: h * hi,
        error: (h * (hi - lo)).abs(),
    })
}

/// Adaptive quadrature of a regular integrand on [a, b]. Worst-panel
/// bisection until the summed error estimate meets the tolerance.
///
/// If the requested tolerance lies below the rounding floor of the panel
/// sums, refinement stops there and the achieved estimate is returned;
/// splitting further only accumulates rounding noise.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    if !(a < b) {
        return Err(Error::InvalidDomain(format!("need a < b, got [{a}, {b}]")));
    }
    let mut evals = 0usize;
    let mut panels = vec![eval_panel(&f, a, b, &mut evals)?];
    let mut refinements = 0usize;
    let mut best_error = f64::INFINITY;
    let mut last_improvement = 0usize;
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let noise_floor = 8.0 * f64::EPSILON * panels.iter().map(|p| p.value.abs()).sum::<f64>();
        if error < 0.99 * best_error {
            best_error = error;
            last_improvement = refinements;
        }
        // Plateaued estimates mean the integrand's own evaluation noise has
        // been reached; further splits only shuffle rounding error around.
        let stalled = refinements - last_improvement >= 50;
        if error <= spec.tolerance_for(value).max(noise_floor) || stalled {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                evaluations: evals,
            });
        }
        if refinements >= spec.max_refinements {
            return Err(Error::NonConvergence {
                context: "integrate_adaptive",
                value,
                error_estimate: error,
                evaluations: evals,
            });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty panel list");
        let worst = panels[idx];
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Panel collapsed to adjacent floats; no further refinement possible.
            return Err(Error::NonConvergence {
                context: "integrate_adaptive (panel width exhausted)",
                value,
                error_estimate: error,
                evaluations: evals,
            });
        }
        let left = eval_panel(&f, worst.a, mid, &mut evals)?;
        let right = eval_panel(&f, mid, worst.b, &mut evals)?;
        panels[idx] = left;
        panels.push(right);
        refinements += 1;
    }
}

/// Integral of `f(x, b - x)` over (a, b) where f may blow up like
/// (b - x)^{-1/2} at the upper endpoint. The substitution x = b - u^2 makes
/// the transformed integrand bounded, and the offset b - x = u^2 is handed
/// to the integrand exactly, so singular factors can be computed without
/// subtracting nearly equal floats.
pub fn integrate_endpoint_singular_offset<F: Fn(f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(a < b) {
        return Err(Error::InvalidDomain(format!("need a < b, got [{a}, {b}]")));
    }
    let len = b - a;
    let g = move |u: f64| {
        let u2 = u * u;
        let x = (b - u2).max(a);
        2.0 * u * f(x, u2)
    };
    integrate_adaptive(g, 0.0, len.sqrt(), spec)
}

/// Integral of `f` over (a, b) with an inverse-square-root singularity
/// allowed at the upper endpoint. Convenience wrapper over the offset form
/// for integrands that do not need the exact endpoint distance.
pub fn integrate_endpoint_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let largest_below_b = f64::from_bits(b.to_bits().wrapping_sub(1));
    integrate_endpoint_singular_offset(
        move |x, _| {
            // Keep x strictly below b: the substitution can round x to b
            // itself, where f is allowed to be singular.
            f(if x < b { x } else { largest_below_b })
        },
        a,
        b,
        spec,
    )
}

/// Integral of `f` over (0, inf) for integrands bounded by
/// min(zeta^{-1/2}, zeta^{-3/2}) up to a constant. Split at zeta = 1: the
/// head uses zeta = u^2, which removes the zeta -> 0 square-root
/// singularity exactly, and the tail uses zeta = (1 - u^2)/u^2 (the
/// rational map zeta = t/(1-t) composed with t = 1 - u^2), which turns the
/// 3/2-power decay into a bounded integrand.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let head = integrate_adaptive(|u| 2.0 * u * f(u * u), 0.0, 1.0, spec)?;
    let tail = integrate_adaptive(
        |u| {
            let u2 = u * u;
            2.0 * f((1.0 - u2) / u2) / (u2 * u)
        },
        0.0,
        std::f64::consts::FRAC_1_SQRT_2,
        spec,
    )?;
    Ok(QuadResult {
        value: head.value + tail.value,
        error_estimate: head.error_estimate + tail.error_estimate,
        evaluations: head.evaluations + tail.evaluations,
    })
}

/// Solve g(x) = target for strictly increasing g on [lo, hi].
///
/// Secant proposals accelerated by a maintained bracket; falls back to
/// bisection whenever the proposal leaves the bracket, so convergence is
/// guaranteed. Stops when |g(x) - target| <= max(rel_tol |target|, abs_tol).
pub fn invert_monotone<G: FnMut(f64) -> Result<f64>>(
    mut g: G,
    target: f64,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if !(lo < hi) {
        return Err(Error::BracketInvalid(format!(
            "need lo < hi, got [{lo}, {hi}]"
        )));
    }
    let ftol = spec.tolerance_for(target);
    let mut a = lo;
    let mut b = hi;
    let mut fa = g(a)? - target;
    if fa.abs() <= ftol {
        return Ok(a);
    }
    let mut fb = g(b)? - target;
    if fb.abs() <= ftol {
        return Ok(b);
    }
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::BracketInvalid(format!(
            "target {target} outside [g({lo}), g({hi})] = [{}, {}]",
            fa + target,
            fb + target
        )));
    }
    let mut best = (a, fa.abs());
    for _ in 0..spec.max_refinements.max(64) {
        let w = b - a;
        // Secant through the bracket endpoints, kept strictly interior.
        let mut x = a - fa * w / (fb - fa);
        if !x.is_finite() || x <= a + 1e-3 * w || x >= b - 1e-3 * w {
            x = a + 0.5 * w;
        }
        if !(a < x && x < b) {
            break; // bracket reduced to adjacent floats
        }
        let fx = g(x)? - target;
        if fx.abs() < best.1 {
            best = (x, fx.abs());
        }
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    if best.1 <= ftol {
        return Ok(best.0);
    }
    Err(Error::NonConvergence {
        context: "invert_monotone",
        value: best.0,
        error_estimate: best.1,
        evaluations: 0,
    })
}
