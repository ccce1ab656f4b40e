//! The Boltzmann collision kernel B_s(|v-v*|, cos theta) = |v-v*|^gamma
//! b_s(cos theta) and its quantitative behavior: the hard-sphere limit
//! b_s -> 1/4, the grazing singularity theta^{-1-2/(s-1)} with constant C_s,
//! and the uniform bound on theta^{1+2/(s-1)} b_s sin theta.
//!
//! b_s is evaluated through the factor chain
//!
//!   b_s(cos theta) = (1/2) 2^{4/(s-1)} beta(x) beta'(x) x'(phi) / sin theta,
//!
//! with phi = (pi - theta)/2 and x'(phi) = 1/phi_s'(x). Below
//! `THETA_SWITCH` the root is solved in eps = 1 - x and the (1-x) powers are
//! pulled out analytically, which avoids the cancellation that kills the
//! naive chain near theta = 0.

use crate::error::{Error, Result};
use crate::numerics::{integrate_adaptive, invert_monotone, QuadratureSpec};
use crate::scattering::{
    beta_from_one_minus_x2, beta_of_x, dphi_dx, dphi_dx_from_one_minus_x2, pio2_minus_phi,
    x_of_phi, InteractionParams,
};
use crate::special::sqrt_pi_half_gamma_ratio;
use std::cell::RefCell;
use std::f64::consts::PI;

/// Below this deviation angle the grazing (eps-parametrized) evaluation
/// path is used; both paths agree to better than 1e-6 on [1e-2, 1e-1].
pub const THETA_SWITCH: f64 = 1e-2;

/// Below this phi (theta near pi) the chain is replaced by its head-on
/// limit 2^{4/(s-1)} / (4 phi_s'(0)^2); the neglected correction is O(phi^2).
const PHI_HEAD_ON: f64 = 1e-7;

fn quad_spec() -> QuadratureSpec {
    QuadratureSpec::tight()
}

/// Angular kernel via the direct chain: x from inverting phi_s, closed-form
/// beta and beta', and x' = 1/phi_s'(x). Accurate for theta not too close
/// to zero.
pub fn angular_kernel_b_direct(params: &InteractionParams, theta: f64) -> Result<f64> {
    let s = require_finite(params, theta)?;
    let phi = 0.5 * (PI - theta);
    let pref = 2.0f64.powf(4.0 / (s - 1.0));
    if phi < PHI_HEAD_ON {
        let c0 = dphi_dx(params, 0.0)?;
        return Ok(pref / (4.0 * c0 * c0));
    }
    let x = x_of_phi(params, phi)?;
    let (beta, dbeta) = beta_of_x(params, x)?;
    let dphi = dphi_dx(params, x)?;
    Ok(0.5 * pref * beta * dbeta / (dphi * theta.sin()))
}

/// Angular kernel via the grazing representation: solve eps = 1 - x from
/// pi/2 - phi_s(1-eps) = theta/2 and form every factor from eps directly.
pub fn angular_kernel_b_grazing(params: &InteractionParams, theta: f64) -> Result<f64> {
    let s = require_finite(params, theta)?;
    let half = 0.5 * theta;
    let eps = solve_grazing_eps(s, half)?;
    let om2 = eps * (2.0 - eps);
    let (beta, dbeta) = beta_from_one_minus_x2(s, 1.0 - eps, om2);
    let dphi = dphi_dx_from_one_minus_x2(s, om2)?;
    let pref = 2.0f64.powf(4.0 / (s - 1.0));
    Ok(0.5 * pref * beta * dbeta / (dphi * theta.sin()))
}

/// Solve pi/2 - phi_s(1 - eps) = d for eps, bracketing from the mean-value
/// seed d / phi_s'(1).
fn solve_grazing_eps(s: f64, d: f64) -> Result<f64> {
    let seed = d / sqrt_pi_half_gamma_ratio(s);
    let mut lo = 0.9 * seed;
    let mut shrink = 0;
    // phi_s' is increasing for s >= 3, making the seed a lower bound; for
    // s in (2,3) no such guarantee exists, so shrink defensively.
    while pio2_minus_phi(s, lo)? > d {
        lo *= 0.25;
        shrink += 1;
        if shrink > 100 {
            return Err(Error::NonConvergence {
                context: "grazing eps lower bracket",
                value: lo,
                error_estimate: f64::INFINITY,
                evaluations: shrink,
            });
        }
    }
    let mut hi = (2.0 * lo).min(1.0);
    let mut grow = 0;
    while pio2_minus_phi(s, hi)? < d {
        hi = (2.0 * hi).min(1.0);
        grow += 1;
        if grow > 100 || hi == 1.0 && pio2_minus_phi(s, 1.0)? < d {
            return Err(Error::NonConvergence {
                context: "grazing eps upper bracket",
                value: hi,
                error_estimate: f64::INFINITY,
                evaluations: grow,
            });
        }
    }
    invert_monotone(|e| pio2_minus_phi(s, e), d, lo, hi, &quad_spec())
}

fn require_finite(params: &InteractionParams, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::DomainError(format!(
            "deviation angle must lie in (0, pi], got {theta}"
        )));
    }
    match params {
        InteractionParams::InversePower { s } => Ok(*s),
        InteractionParams::HardSphere => Err(Error::DomainError(
            "angular kernel chain applies to finite exponents".into(),
        )),
    }
}

/// Angular part b_s(cos theta) of the collision kernel; 1/4 identically for
/// hard spheres. Switches to the grazing path below `THETA_SWITCH`.
pub fn angular_kernel_b(params: &InteractionParams, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::DomainError(format!(
            "deviation angle must lie in (0, pi], got {theta}"
        )));
    }
    match params {
        InteractionParams::HardSphere => Ok(0.25),
        InteractionParams::InversePower { .. } => {
            if theta < THETA_SWITCH {
                angular_kernel_b_grazing(params, theta)
            } else {
                angular_kernel_b_direct(params, theta)
            }
        }
    }
}

/// Full kernel B_s = |v-v*|^{gamma(s)} b_s(cos theta); g/4 for hard spheres.
pub fn full_kernel_b(params: &InteractionParams, g: f64, theta: f64) -> Result<f64> {
    if !(g >= 0.0) {
        return Err(Error::DomainError(format!("relative speed must be >= 0, got {g}")));
    }
    let gamma = params.gamma();
    if g == 0.0 && gamma < 0.0 {
        return Err(Error::DomainError(
            "g = 0 with gamma < 0 (s < 5): kernel diverges".into(),
        ));
    }
    Ok(g.powf(gamma) * angular_kernel_b(params, theta)?)
}

/// Grazing constant of the small-angle asymptotics
/// theta^{1+2/(s-1)} b_s(cos theta) sin theta -> C_s:
///
///   C_s = 2^{4/(s-1)}/(s-1) * (sqrt(pi) Gamma(s/2)/Gamma((s-1)/2))^{2/(s-1)}.
pub fn singular_constant_cs(s: f64) -> Result<f64> {
    if !(s > 2.0) {
        return Err(Error::DomainError(format!("C_s requires s > 2, got {s}")));
    }
    let sm1 = s - 1.0;
    Ok(2.0f64.powf(4.0 / sm1) / sm1 * sqrt_pi_half_gamma_ratio(s).powf(2.0 / sm1))
}

/// C_s assembled through the Wallis integral W_{s-1} = Int_0^{pi/2}
/// sin^{s-1} u du, evaluated by quadrature. Independent route used as a
/// self-check on `singular_constant_cs`.
pub fn singular_constant_cs_wallis(s: f64) -> Result<f64> {
    if !(s > 2.0) {
        return Err(Error::DomainError(format!("C_s requires s > 2, got {s}")));
    }
    let w = integrate_adaptive(|u| u.sin().powf(s - 1.0), 0.0, PI / 2.0, &quad_spec())?;
    let sm1 = s - 1.0;
    Ok(2.0f64.powf(4.0 / sm1) / sm1 * (sm1 * w.value).powf(2.0 / sm1))
}

/// Exponent 1 + 2/(s-1) of the grazing singularity of b_s sin theta.
pub fn singular_exponent(s: f64) -> f64 {
    1.0 + 2.0 / (s - 1.0)
}

/// Weighted kernel V(theta) = theta^{1+2/(s-1)} b_s(cos theta) sin theta.
pub fn weighted_kernel(params: &InteractionParams, theta: f64) -> Result<f64> {
    let b = angular_kernel_b(params, theta)?;
    let expo = match params {
        InteractionParams::InversePower { s } => singular_exponent(*s),
        InteractionParams::HardSphere => 1.0,
    };
    Ok(theta.powf(expo) * b * theta.sin())
}

/// Max of the weighted kernel over a grid; the grid must reach down to
/// theta <= 1e-4 to probe the grazing side. Requires s >= 3, the range of
/// the uniform bound.
pub fn singular_sup_norm(s: f64, theta_grid: &[f64]) -> Result<f64> {
    if !(s >= 3.0) {
        return Err(Error::DomainError(format!(
            "uniform bound holds for s >= 3, got {s}"
        )));
    }
    if theta_grid.is_empty() {
        return Err(Error::DomainError("empty theta grid".into()));
    }
    if theta_grid.iter().copied().fold(f64::INFINITY, f64::min) > 1e-4 {
        return Err(Error::DomainError(
            "theta grid must include angles down to 1e-4".into(),
        ));
    }
    let params = InteractionParams::InversePower { s };
    let mut sup = 0.0f64;
    for &theta in theta_grid {
        sup = sup.max(weighted_kernel(&params, theta)?);
    }
    Ok(sup)
}

/// Log-spaced theta grid on [lo, hi] with exact endpoints.
pub fn log_theta_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

/// Adaptive quadrature over a Result-returning integrand: the first inner
/// error aborts the integration and is propagated.
fn integrate_result<F: Fn(f64) -> Result<f64>>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let stash: RefCell<Option<Error>> = RefCell::new(None);
    let r = integrate_adaptive(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                stash.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        a,
        b,
        spec,
    );
    if let Some(e) = stash.into_inner() {
        return Err(e);
    }
    Ok(r?.value)
}

/// Momentum-transfer integral Int_0^pi theta b_s(cos theta) sin theta dtheta.
///
/// Near zero the integrand behaves like C_s theta^{-2/(s-1)}, so the
/// integral converges only for s > 3 (at s = 3 the exponent reaches -1 and
/// the integral diverges logarithmically). The singular part is added
/// analytically below the switch angle and its residual integrated with the
/// weighted kernel.
pub fn momentum_transfer_integral(s: f64) -> Result<f64> {
    if !(s > 3.0) {
        return Err(Error::DomainError(format!(
            "momentum-transfer integral diverges for s <= 3 (theta exponent \
             -2/(s-1) reaches -1); got {s}"
        )));
    }
    let params = InteractionParams::InversePower { s };
    let cs = singular_constant_cs(s)?;
    let p = 2.0 / (s - 1.0);
    let delta = THETA_SWITCH;
    let theta_lo = 1e-6;
    // Relative tolerances looser than the defaults: each integrand
    // evaluation is itself a solved quadrature chain.
    let spec = QuadratureSpec {
        rel_tol: 1e-8,
        abs_tol: 1e-12,
        max_refinements: 400,
    };
    let outer = integrate_result(
        |theta| Ok(theta * angular_kernel_b(&params, theta)? * theta.sin()),
        delta,
        PI,
        &spec,
    )?;
    let analytic = cs * delta.powf(1.0 - p) / (1.0 - p);
    let residual = integrate_result(
        |theta| Ok((weighted_kernel(&params, theta)? - cs) * theta.powf(-p)),
        theta_lo,
        delta,
        &spec,
    )?;
    Ok(outer + analytic + residual)
}

/// Sampled angular kernel with its singularity metadata.
#[derive(Debug, Clone)]
pub struct AngularKernelEval {
    pub params: InteractionParams,
    pub theta_grid: Vec<f64>,
    pub b_values: Vec<f64>,
    /// Exponent 1 + 2/(s-1) of the grazing singularity (1 for hard spheres).
    pub singular_exponent: f64,
    /// Grazing constant C_s (0 for hard spheres, the s -> inf limit).
    pub c_s: f64,
}

impl AngularKernelEval {
    pub fn tabulate(params: &InteractionParams, theta_grid: &[f64]) -> Result<Self> {
        let (expo, c_s) = match params {
            InteractionParams::InversePower { s } => {
                (singular_exponent(*s), singular_constant_cs(*s)?)
            }
            InteractionParams::HardSphere => (1.0, 0.0),
        };
        let mut b_values = Vec::with_capacity(theta_grid.len());
        for &theta in theta_grid {
            let b = angular_kernel_b(params, theta)?;
            if !(b > 0.0) {
                return Err(Error::NonConvergence {
                    context: "angular kernel positivity",
                    value: b,
                    error_estimate: 0.0,
                    evaluations: 0,
                });
            }
            b_values.push(b);
        }
        Ok(AngularKernelEval {
            params: *params,
            theta_grid: theta_grid.to_vec(),
            b_values,
            singular_exponent: expo,
            c_s,
        })
    }
}

/// Closed-form s = 3 angular kernel, b_3 = 4x/(pi (1-x^2)^2 sin theta) with
/// x = 1 - theta/pi. Test oracle for the general chain.
pub fn b3_closed_form(theta: f64) -> f64 {
    let x = 1.0 - theta / PI;
    if theta == PI {
        // x/sin(theta) -> 1/pi as theta -> pi
        return 4.0 / (PI * PI);
    }
    4.0 * x / (PI * (1.0 - x * x).powi(2) * theta.sin())
}
