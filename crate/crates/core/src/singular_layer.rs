//! The rescaled grazing layer of the kernel as s -> inf.
//!
//! With theta = psi/sqrt(s), the angular kernel b_s(cos(psi/sqrt(s)))
//! approaches a limit profile Phi(psi) built from two semi-infinite
//! integrals:
//!
//!   psi_inf(xi)  = 2 xi Int_0^inf (1-e^{-z}) / (sqrt(2z) sqrt(h) (sqrt(2z)+sqrt(h))) dz
//!   psi_inf'(xi) = Int_0^inf (1-e^{-z}) / h^{3/2} dz,     h = 2z + xi (1-e^{-z}),
//!
//! its inverse xi_inf, and
//!
//!   Phi(psi) = xi_inf'(psi) / (xi_inf(psi) psi) + xi_inf'(psi) / (2 psi).
//!
//! Phi carries the expansion Phi = 1/psi^2 + 1/(sqrt(pi) psi) + Phi_0(psi)
//! with Phi_0 continuous down to psi = 0; `phi_layer_regular` extracts it.

use crate::error::{Error, Result};
use crate::numerics::{integrate_semi_infinite, invert_monotone, QuadratureSpec};
use std::f64::consts::PI;

/// f(0) = 2 xi_inf'(0) J(0) = 1.
pub const F_AT_ZERO: f64 = 1.0;

/// xi_inf'(0) = sqrt(2/pi).
pub fn xi_prime_at_zero() -> f64 {
    (2.0 / PI).sqrt()
}

/// f'(0) = (sqrt(2) - 1)/sqrt(2 pi).
pub fn f_prime_at_zero() -> f64 {
    (2.0f64.sqrt() - 1.0) / (2.0 * PI).sqrt()
}

fn quad_spec() -> QuadratureSpec {
    QuadratureSpec::tight()
}

#[inline]
fn one_minus_exp_neg(z: f64) -> f64 {
    -(-z).exp_m1()
}

/// h(zeta, xi) = 2 zeta + xi (1 - e^{-zeta}); h >= 2 zeta and h >= zeta.
pub fn h_fn(zeta: f64, xi: f64) -> f64 {
    2.0 * zeta + xi * one_minus_exp_neg(zeta)
}

/// J(xi): the integral with psi_inf(xi) = 2 xi J(xi). Defined for all
/// xi >= 0 (the representation has no 0/0 at xi = 0).
pub fn j_integral(xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::DomainError(format!("j_integral requires xi >= 0, got {xi}")));
    }
    let r = integrate_semi_infinite(
        |z| {
            let num = one_minus_exp_neg(z);
            let root2z = (2.0 * z).sqrt();
            let rooth = h_fn(z, xi).sqrt();
            num / (root2z * rooth * (root2z + rooth))
        },
        &quad_spec(),
    )?;
    Ok(r.value)
}

/// psi_inf(xi) = 2 xi J(xi); strictly increasing with psi_inf(0) = 0.
pub fn psi_inf(xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::DomainError(format!("psi_inf requires xi >= 0, got {xi}")));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * xi * j_integral(xi)?)
}

/// psi_inf'(xi); positive and decreasing, with psi_inf'(0) = sqrt(pi/2).
pub fn psi_inf_prime(xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::DomainError(format!(
            "psi_inf_prime requires xi >= 0, got {xi}"
        )));
    }
    let r = integrate_semi_infinite(
        |z| {
            let h = h_fn(z, xi);
            one_minus_exp_neg(z) / (h * h.sqrt())
        },
        &quad_spec(),
    )?;
    Ok(r.value)
}

/// Inverse xi_inf(psi) = psi_inf^{-1}(psi) together with its derivative
/// xi_inf'(psi) = 1 / psi_inf'(xi_inf(psi)).
pub fn xi_inf(psi: f64) -> Result<(f64, f64)> {
    if !(psi >= 0.0) {
        return Err(Error::DomainError(format!("xi_inf requires psi >= 0, got {psi}")));
    }
    if psi == 0.0 {
        return Ok((0.0, 1.0 / psi_inf_prime(0.0)?));
    }
    let mut hi = psi.max(1.0);
    let mut grow = 0;
    while psi_inf(hi)? < psi {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::BracketInvalid(format!(
                "xi_inf bracket expansion failed at psi = {psi}"
            )));
        }
    }
    let xi = invert_monotone(psi_inf, psi, 0.0, hi, &quad_spec())?;
    Ok((xi, 1.0 / psi_inf_prime(xi)?))
}

/// Layer profile Phi(psi) for psi > 0; real analytic, tending to 1/4 as
/// psi -> inf and to the 1/psi^2 singularity as psi -> 0.
pub fn phi_layer(psi: f64) -> Result<f64> {
    if !(psi > 0.0) {
        return Err(Error::DomainError(format!(
            "phi_layer requires psi > 0 (got {psi}); use phi_layer_regular at 0"
        )));
    }
    let (xi, xi_prime) = xi_inf(psi)?;
    Ok(xi_prime / (xi * psi) + xi_prime / (2.0 * psi))
}

/// f(psi) = 2 xi_inf'(psi) J(xi_inf(psi)); enters the Taylor split of Phi.
pub fn layer_f(psi: f64) -> Result<f64> {
    let (xi, xi_prime) = xi_inf(psi)?;
    Ok(2.0 * xi_prime * j_integral(xi)?)
}

/// Regular part Phi_0(psi) = Phi(psi) - 1/psi^2 - 1/(sqrt(pi) psi),
/// evaluated through the Taylor-remainder form
///
///   Phi_0 = (1/psi) [ (f(psi) - f(0) - f'(0) psi)/psi
///                     + (xi_inf'(psi) - xi_inf'(0))/2 ],
///
/// which stays finite through psi = 0; the value at exactly 0 is a
/// Richardson extrapolation of the psi > 0 form.
pub fn phi_layer_regular(psi: f64) -> Result<f64> {
    if !(psi >= 0.0) {
        return Err(Error::DomainError(format!(
            "phi_layer_regular requires psi >= 0, got {psi}"
        )));
    }
    if psi == 0.0 {
        let h = 1e-3;
        let a = phi_layer_regular(h)?;
        let b = phi_layer_regular(2.0 * h)?;
        return Ok(2.0 * a - b);
    }
    let f = layer_f(psi)?;
    let (_, xi_prime) = xi_inf(psi)?;
    let taylor = (f - F_AT_ZERO - f_prime_at_zero() * psi) / psi;
    Ok((taylor + 0.5 * (xi_prime - xi_prime_at_zero())) / psi)
}

/// Sampled layer profile on a psi-grid.
#[derive(Debug, Clone)]
pub struct LayerProfile {
    pub psi_grid: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub phi0_values: Vec<f64>,
    pub xi_values: Vec<f64>,
    pub xi_prime_values: Vec<f64>,
}

impl LayerProfile {
    pub fn tabulate(psi_grid: &[f64]) -> Result<Self> {
        let mut phi_values = Vec::with_capacity(psi_grid.len());
        let mut phi0_values = Vec::with_capacity(psi_grid.len());
        let mut xi_values = Vec::with_capacity(psi_grid.len());
        let mut xi_prime_values = Vec::with_capacity(psi_grid.len());
        for &psi in psi_grid {
            if !(psi > 0.0) {
                return Err(Error::DomainError(format!(
                    "layer profile grid must be positive, got {psi}"
                )));
            }
            let (xi, xi_prime) = xi_inf(psi)?;
            let phi = xi_prime / (xi * psi) + xi_prime / (2.0 * psi);
            if !(phi > 0.0) || !(xi_prime > 0.0) {
                return Err(Error::NonConvergence {
                    context: "layer profile positivity",
                    value: phi,
                    error_estimate: 0.0,
                    evaluations: 0,
                });
            }
            phi_values.push(phi);
            phi0_values.push(phi_layer_regular(psi)?);
            xi_values.push(xi);
            xi_prime_values.push(xi_prime);
        }
        Ok(LayerProfile {
            psi_grid: psi_grid.to_vec(),
            phi_values,
            phi0_values,
            xi_values,
            xi_prime_values,
        })
    }
}
