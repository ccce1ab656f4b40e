//! Classical two-body scattering maps for the potential U(r) = 1/r^{s-1}.
//!
//! The deviation angle of a binary collision is theta = pi - 2 phi, where
//!
//!   phi_s(x) = x * Int_0^1 dz / sqrt(1 - z^{s-1} - x^2 (z^2 - z^{s-1}))
//!
//! and x in [0,1) is the positive root of 1 - x^2 - (x/beta)^{s-1} = 0 for
//! the rescaled impact parameter beta. The maps beta -> x -> phi are
//! strictly increasing, so inverses are computed by bracketed inversion.
//!
//! Near the grazing regime x -> 1 all quantities are parametrized by
//! eps = 1 - x. The radicand is evaluated as
//!
//!   D(z) = (1 - z^2) + eps (2 - eps) (z^2 - z^{s-1}),
//!
//! and pi/2 - phi as an explicit difference integral, so no precision is
//! lost to cancellation however small eps is.

use crate::error::{Error, Result};
use crate::numerics::{integrate_endpoint_singular_offset, invert_monotone, QuadratureSpec};
use std::f64::consts::{FRAC_PI_2, PI};

/// Largest admissible x for direct evaluation of `phi_of_x`; beyond this the
/// grazing-layer representation takes over.
pub const X_MAX: f64 = 1.0 - 1e-12;

/// Interaction selector: a finite inverse-power exponent s > 2, or the
/// hard-sphere limit object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionParams {
    InversePower { s: f64 },
    HardSphere,
}

impl InteractionParams {
    /// Finite inverse-power-law interaction with exponent s > 2.
    pub fn inverse_power(s: f64) -> Result<Self> {
        if !(s > 2.0) || !s.is_finite() {
            return Err(Error::DomainError(format!(
                "exponent must exceed 2, got {s}"
            )));
        }
        Ok(InteractionParams::InversePower { s })
    }

    pub fn hard_sphere() -> Self {
        InteractionParams::HardSphere
    }

    /// Velocity exponent gamma = (s-5)/(s-1); 1 for hard spheres.
    pub fn gamma(&self) -> f64 {
        match self {
            InteractionParams::InversePower { s } => (s - 5.0) / (s - 1.0),
            InteractionParams::HardSphere => 1.0,
        }
    }

    /// The finite exponent, if any.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            InteractionParams::InversePower { s } => Some(*s),
            InteractionParams::HardSphere => None,
        }
    }

    fn finite_s(&self, op: &str) -> Result<f64> {
        match self {
            InteractionParams::InversePower { s } => Ok(*s),
            InteractionParams::HardSphere => Err(Error::DomainError(format!(
                "{op} is defined only for finite exponents; the hard-sphere \
                 relation is handled by the kernel and simulation modules"
            ))),
        }
    }
}

fn quad_spec() -> QuadratureSpec {
    QuadratureSpec::tight()
}

/// Pieces of the radicand at z = 1 - w, all computed without cancellation:
/// returns (1 - z^2, z^2 - z^{s-1}, 1 - z^{s-1}). Using the exact endpoint
/// distance w keeps these accurate deep into the z -> 1 layer, which is
/// where the quadrature concentrates for large s.
#[inline]
fn radicand_parts(w: f64, s: f64) -> (f64, f64, f64) {
    if w >= 1.0 {
        return (1.0, 0.0, 1.0); // z = 0
    }
    let one_minus_z2 = w * (2.0 - w);
    let l = (-w).ln_1p(); // ln z
    let one_minus_zs = -((s - 1.0) * l).exp_m1();
    let z2_minus_zs = (2.0 * l).exp() * (-((s - 3.0) * l).exp_m1());
    (one_minus_z2, z2_minus_zs, one_minus_zs)
}

/// Int_0^1 dz / sqrt(D(z)); phi_s(x) = x * this.
fn phi_integral(s: f64, one_minus_x2: f64) -> Result<f64> {
    let r = integrate_endpoint_singular_offset(
        |_z, w| {
            let (omz2, z2mzs, _) = radicand_parts(w, s);
            1.0 / (omz2 + one_minus_x2 * z2mzs).sqrt()
        },
        0.0,
        1.0,
        &quad_spec(),
    )?;
    Ok(r.value)
}

/// Deviation-angle integral phi_s(x) of the rearranged orbit equation.
pub fn phi_of_x(params: &InteractionParams, x: f64) -> Result<f64> {
    let s = params.finite_s("phi_of_x")?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::DomainError(format!("phi_of_x requires 0 <= x < 1, got {x}")));
    }
    if x > X_MAX {
        return Err(Error::DomainError(format!(
            "phi_of_x is evaluated only up to x = 1 - 1e-12 (got {x}); use the \
             grazing/eps representation beyond"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let one_minus_x2 = (1.0 - x) * (1.0 + x);
    Ok(x * phi_integral(s, one_minus_x2)?)
}

/// pi/2 - phi_s(1 - eps), formed as a difference integral so it stays
/// accurate for arbitrarily small eps:
///
///   pi/2 - phi = eps(2-eps) I1 + eps I2,
///   I1 = Int (z^2 - z^{s-1}) / (sqrt(1-z^2) sqrt(D) (sqrt(D)+sqrt(1-z^2))),
///   I2 = Int dz / sqrt(D).
pub fn pio2_minus_phi(s: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::DomainError(format!(
            "pio2_minus_phi requires 0 < eps <= 1, got {eps}"
        )));
    }
    let om2 = eps * (2.0 - eps);
    let spec = quad_spec();
    let i1 = if s == 3.0 {
        0.0 // z^2 - z^{s-1} vanishes identically
    } else {
        integrate_endpoint_singular_offset(
            |_z, w| {
                let (omz2, z2mzs, _) = radicand_parts(w, s);
                let d = omz2 + om2 * z2mzs;
                z2mzs / (omz2.sqrt() * d.sqrt() * (d.sqrt() + omz2.sqrt()))
            },
            0.0,
            1.0,
            &spec,
        )?
        .value
    };
    let i2 = phi_integral(s, om2)?;
    Ok(om2 * i1 + eps * i2)
}

/// Derivative phi_s'(x) = Int_0^1 (1 - z^{s-1}) D(z)^{-3/2} dz, with
/// 1 - x^2 supplied directly (pass eps*(2-eps) in the grazing regime).
pub fn dphi_dx_from_one_minus_x2(s: f64, one_minus_x2: f64) -> Result<f64> {
    let r = integrate_endpoint_singular_offset(
        |_z, w| {
            let (omz2, z2mzs, omzs) = radicand_parts(w, s);
            let d = omz2 + one_minus_x2 * z2mzs;
            omzs / (d * d.sqrt())
        },
        0.0,
        1.0,
        &quad_spec(),
    )?;
    Ok(r.value)
}

/// phi_s'(x) for x in [0, 1]. The integrand stays integrable at x = 1, where
/// the value equals sqrt(pi) Gamma(s/2) / Gamma((s-1)/2).
pub fn dphi_dx(params: &InteractionParams, x: f64) -> Result<f64> {
    let s = params.finite_s("dphi_dx")?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::DomainError(format!("dphi_dx requires 0 <= x <= 1, got {x}")));
    }
    dphi_dx_from_one_minus_x2(s, (1.0 - x) * (1.0 + x))
}

/// Inverse map x_s(phi), by bracketed inversion of `phi_of_x` on [0, X_MAX].
pub fn x_of_phi(params: &InteractionParams, phi: f64) -> Result<f64> {
    let s = params.finite_s("x_of_phi")?;
    if !(0.0..FRAC_PI_2).contains(&phi) {
        return Err(Error::BracketInvalid(format!(
            "x_of_phi requires 0 <= phi < pi/2, got {phi}"
        )));
    }
    if phi == 0.0 {
        return Ok(0.0);
    }
    let p = InteractionParams::InversePower { s };
    invert_monotone(|x| phi_of_x(&p, x), phi, 0.0, X_MAX, &quad_spec())
}

/// beta_s and its derivative from the closed forms
///   beta_s(x)  = x (1-x^2)^{-1/(s-1)},
///   beta_s'(x) = 2/(s-1) (1-x^2)^{-s/(s-1)} + (s-3)/(s-1) (1-x^2)^{-1/(s-1)}.
pub fn beta_of_x(params: &InteractionParams, x: f64) -> Result<(f64, f64)> {
    let s = params.finite_s("beta_of_x")?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::DomainError(format!("beta_of_x requires 0 <= x < 1, got {x}")));
    }
    Ok(beta_from_one_minus_x2(s, x, (1.0 - x) * (1.0 + x)))
}

/// Same closed forms with 1 - x^2 passed explicitly (exact in the grazing
/// regime when formed from eps).
pub fn beta_from_one_minus_x2(s: f64, x: f64, one_minus_x2: f64) -> (f64, f64) {
    let sm1 = s - 1.0;
    let beta = x * one_minus_x2.powf(-1.0 / sm1);
    let dbeta = 2.0 / sm1 * one_minus_x2.powf(-s / sm1)
        + (s - 3.0) / sm1 * one_minus_x2.powf(-1.0 / sm1);
    (beta, dbeta)
}

/// eps = 1 - x at the turning-point root for a given beta > 0, solved in
/// u = -ln(eps) so the grazing regime (eps far below 1e-16) stays resolved.
pub fn eps_of_beta(s: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::DomainError(format!(
            "eps_of_beta requires beta > 0, got {beta}"
        )));
    }
    let beta_at = |u: f64| {
        let eps = (-u).exp();
        beta_from_one_minus_x2(s, 1.0 - eps, eps * (2.0 - eps)).0
    };
    let mut hi = 5.0f64;
    let mut grow = 0;
    while beta_at(hi) < beta {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::NonConvergence {
                context: "eps_of_beta bracket expansion",
                value: hi,
                error_estimate: f64::INFINITY,
                evaluations: grow,
            });
        }
    }
    // u = 0 gives eps = 1, i.e. x = 0 and beta = 0, so [0, hi] brackets.
    let u = invert_monotone(|u| Ok(beta_at(u)), beta, 0.0, hi, &quad_spec())?;
    Ok((-u).exp())
}

/// The unique root x in [0,1) of 1 - x^2 - (x/beta)^{s-1} = 0.
///
/// Roots with 1 - x below f64 resolution are clamped to the largest double
/// strictly less than one; `theta_of_beta` keeps full precision by working
/// in eps throughout.
pub fn x_of_beta(params: &InteractionParams, beta: f64) -> Result<f64> {
    let s = params.finite_s("x_of_beta")?;
    if beta < 0.0 {
        return Err(Error::DomainError(format!("beta must be >= 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let eps = eps_of_beta(s, beta)?;
    let x = 1.0 - eps;
    Ok(if x >= 1.0 {
        f64::from_bits(1.0f64.to_bits() - 1)
    } else {
        x
    })
}

/// Deviation angle theta(beta) = pi - 2 phi_s(x_s(beta)), strictly
/// decreasing, with theta(0) = pi (head-on collision).
pub fn theta_of_beta(params: &InteractionParams, beta: f64) -> Result<f64> {
    let s = params.finite_s("theta_of_beta")?;
    if beta < 0.0 {
        return Err(Error::DomainError(format!("beta must be >= 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(PI);
    }
    let eps = eps_of_beta(s, beta)?;
    Ok(2.0 * pio2_minus_phi(s, eps)?)
}

/// One tabulated point of the beta <-> x <-> phi <-> theta relation.
#[derive(Debug, Clone, Copy)]
pub struct ScatterNode {
    pub beta: f64,
    pub x: f64,
    pub phi: f64,
    pub theta: f64,
    /// Root-equation residual |1 - x^2 - (x/beta)^{s-1}| at this node.
    pub residual: f64,
}

/// Monotone tabulation of the scattering relation for one fixed s.
#[derive(Debug, Clone)]
pub struct ScatteringCurve {
    pub params: InteractionParams,
    pub nodes: Vec<ScatterNode>,
}

impl ScatteringCurve {
    /// Tabulate along an increasing beta grid. Construction verifies the
    /// root-equation residual (<= 1e-10) and monotonicity at every node.
    pub fn from_beta_grid(params: &InteractionParams, betas: &[f64]) -> Result<Self> {
        let s = params.finite_s("ScatteringCurve")?;
        let mut nodes = Vec::with_capacity(betas.len());
        for &beta in betas {
            if beta < 0.0 {
                return Err(Error::DomainError(format!("beta must be >= 0, got {beta}")));
            }
            let node = if beta == 0.0 {
                ScatterNode {
                    beta,
                    x: 0.0,
                    phi: 0.0,
                    theta: PI,
                    residual: 0.0,
                }
            } else {
                let eps = eps_of_beta(s, beta)?;
                let x = 1.0 - eps;
                let half_defect = pio2_minus_phi(s, eps)?;
                // (x/beta)^{s-1} should equal 1 - x^2 = eps(2-eps) at the root.
                let residual = (eps * (2.0 - eps) - ((1.0 - eps) / beta).powf(s - 1.0)).abs();
                ScatterNode {
                    beta,
                    x,
                    phi: FRAC_PI_2 - half_defect,
                    theta: 2.0 * half_defect,
                    residual,
                }
            };
            if node.residual > 1e-10 {
                return Err(Error::NonConvergence {
                    context: "scattering curve root residual",
                    value: node.residual,
                    error_estimate: node.residual,
                    evaluations: 0,
                });
            }
            nodes.push(node);
        }
        let curve = ScatteringCurve {
            params: *params,
            nodes,
        };
        curve.check_monotone()?;
        Ok(curve)
    }

    /// Default grid resolving the grazing regime: linear in x up to 0.9,
    /// then logarithmic in 1 - x down to `one_minus_x_min`.
    pub fn default_beta_grid(
        params: &InteractionParams,
        n: usize,
        one_minus_x_min: f64,
    ) -> Result<Vec<f64>> {
        let s = params.finite_s("default_beta_grid")?;
        if n < 4 || !(one_minus_x_min > 0.0 && one_minus_x_min < 0.1) {
            return Err(Error::DomainError(
                "need n >= 4 and 0 < one_minus_x_min < 0.1".into(),
            ));
        }
        let half = n / 2;
        let mut betas = Vec::with_capacity(n);
        for i in 0..half {
            let x = 0.9 * i as f64 / half as f64;
            betas.push(beta_from_one_minus_x2(s, x, (1.0 - x) * (1.0 + x)).0);
        }
        let lg0 = 0.1f64.ln();
        let lg1 = one_minus_x_min.ln();
        for i in 0..(n - half) {
            let t = i as f64 / (n - half - 1) as f64;
            let omx = (lg0 + t * (lg1 - lg0)).exp();
            let x = 1.0 - omx;
            betas.push(beta_from_one_minus_x2(s, x, omx * (2.0 - omx)).0);
        }
        Ok(betas)
    }

    fn check_monotone(&self) -> Result<()> {
        for w in self.nodes.windows(2) {
            let ok = w[1].beta > w[0].beta
                && w[1].x >= w[0].x
                && w[1].phi >= w[0].phi
                && w[1].theta <= w[0].theta;
            if !ok {
                return Err(Error::NonConvergence {
                    context: "scattering curve monotonicity",
                    value: w[1].beta,
                    error_estimate: 0.0,
                    evaluations: 0,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ip(s: f64) -> InteractionParams {
        InteractionParams::inverse_power(s).unwrap()
    }

    #[test]
    fn gamma_exponent_values() {
        assert_eq!(ip(5.0).gamma(), 0.0);
        assert_eq!(InteractionParams::hard_sphere().gamma(), 1.0);
        assert!((ip(3.0).gamma() + 1.0).abs() < 1e-15);
        assert!((ip(1.0e6).gamma() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_soft_exponents() {
        assert!(InteractionParams::inverse_power(2.0).is_err());
        assert!(InteractionParams::inverse_power(1.5).is_err());
        assert!(InteractionParams::inverse_power(f64::NAN).is_err());
    }

    #[test]
    fn hard_sphere_rejects_scattering_maps() {
        let hs = InteractionParams::hard_sphere();
        assert!(phi_of_x(&hs, 0.5).is_err());
        assert!(beta_of_x(&hs, 0.5).is_err());
        assert!(theta_of_beta(&hs, 1.0).is_err());
    }

    #[test]
    fn phi_s3_is_linear() {
        // s = 3 collapses the radicand to 1 - z^2, so phi_3(x) = pi x / 2.
        let p = ip(3.0);
        assert!((phi_of_x(&p, 0.5).unwrap() - PI / 4.0).abs() < 1e-10);
        for x in [0.1, 0.3, 0.7, 0.9, 0.99] {
            let got = phi_of_x(&p, x).unwrap();
            assert!((got - PI * x / 2.0).abs() < 1e-9, "x={x}: {got}");
        }
        assert_eq!(phi_of_x(&p, 0.0).unwrap(), 0.0);
        assert_eq!(phi_of_x(&ip(17.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_large_s_approaches_arcsine() {
        let p = ip(1.0e4);
        let got = phi_of_x(&p, 0.5).unwrap();
        assert!((got - 0.5f64.asin()).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn dphi_s3_constant_and_gamma_identity() {
        let p = ip(3.0);
        assert!((dphi_dx(&p, 1.0).unwrap() - PI / 2.0).abs() < 1e-9);
        assert!((dphi_dx(&p, 0.3).unwrap() - PI / 2.0).abs() < 1e-9);
        // s = 7: sqrt(pi) Gamma(3.5)/Gamma(3) = 15 pi/16
        let got = dphi_dx(&ip(7.0), 1.0).unwrap();
        assert!((got - 15.0 * PI / 16.0).abs() < 1e-8, "got {got}");
        // generic s against the gamma oracle
        for s in [5.0, 10.0, 40.0] {
            let got = dphi_dx(&ip(s), 1.0).unwrap();
            let want = crate::special::sqrt_pi_half_gamma_ratio(s);
            assert!((got - want).abs() < 1e-8 * want, "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn dphi_matches_finite_differences() {
        let h = 1e-5;
        for s in [3.0, 5.0, 7.0, 10.0, 40.0] {
            let p = ip(s);
            for x in [0.1, 0.4, 0.7, 0.9] {
                let d = dphi_dx(&p, x).unwrap();
                let fd =
                    (phi_of_x(&p, x + h).unwrap() - phi_of_x(&p, x - h).unwrap()) / (2.0 * h);
                assert!(
                    (d - fd).abs() < 1e-5 * d.abs(),
                    "s={s} x={x}: {d} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn x_of_phi_round_trips() {
        for s in [3.0, 5.0, 7.0, 10.0, 40.0] {
            let p = ip(s);
            for x in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99] {
                let phi = phi_of_x(&p, x).unwrap();
                let back = x_of_phi(&p, phi).unwrap();
                assert!((back - x).abs() < 1e-8, "s={s} x={x}: back {back}");
            }
        }
    }

    #[test]
    fn x_of_phi_examples() {
        assert!((x_of_phi(&ip(3.0), PI / 4.0).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(x_of_phi(&ip(9.0), 0.0).unwrap(), 0.0);
        // Thm-style large-s limit: x_s(phi) -> sin(phi)
        let x = x_of_phi(&ip(1.0e4), PI / 6.0).unwrap();
        assert!((x - 0.5).abs() < 1e-3, "got {x}");
    }

    #[test]
    fn x_of_phi_rejects_out_of_range() {
        // The sup of phi_s over the admissible x range sits within ~1e-12 of
        // pi/2, so pi/2 itself is the practical rejection boundary.
        assert!(matches!(
            x_of_phi(&ip(3.0), FRAC_PI_2),
            Err(Error::BracketInvalid(_))
        ));
        assert!(x_of_phi(&ip(3.0), 1.6).is_err());
        assert!(x_of_phi(&ip(3.0), -0.1).is_err());
    }

    #[test]
    fn beta_closed_form_values() {
        let p = ip(3.0);
        let x = 1.0 / 2.0f64.sqrt();
        let (b, db) = beta_of_x(&p, x).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        assert!((db - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
        for s in [3.0, 4.0, 7.0, 40.0] {
            let (b0, db0) = beta_of_x(&ip(s), 0.0).unwrap();
            assert_eq!(b0, 0.0);
            assert!((db0 - 1.0).abs() < 1e-14, "s={s}: beta'(0) = {db0}");
        }
        // beta_s(x) -> x, beta_s'(x) -> 1 as s -> inf
        let (b, db) = beta_of_x(&ip(1.0e4), 0.5).unwrap();
        assert!((b - 0.5).abs() < 1e-3);
        assert!((db - 1.0).abs() < 1e-3);
    }

    #[test]
    fn beta_derivative_matches_finite_differences() {
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = rng.random_range(2.2..60.0);
            let x = rng.random_range(0.05..0.9);
            let p = ip(s);
            let (_, db) = beta_of_x(&p, x).unwrap();
            let fd = (beta_of_x(&p, x + h).unwrap().0 - beta_of_x(&p, x - h).unwrap().0)
                / (2.0 * h);
            assert!((db - fd).abs() < 1e-5 * db.abs(), "s={s} x={x}");
        }
    }

    #[test]
    fn x_of_beta_closed_forms_s3() {
        let p = ip(3.0);
        // 1 - x^2 = x^2/beta^2  =>  x = beta/sqrt(1+beta^2)
        assert!((x_of_beta(&p, 1.0).unwrap() - 1.0 / 2.0f64.sqrt()).abs() < 1e-10);
        assert!((x_of_beta(&p, 2.0).unwrap() - 2.0 / 5.0f64.sqrt()).abs() < 1e-10);
        assert_eq!(x_of_beta(&p, 0.0).unwrap(), 0.0);
        assert_eq!(x_of_beta(&ip(11.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn x_beta_round_trips() {
        for s in [3.0, 5.0, 7.0, 10.0, 40.0] {
            let p = ip(s);
            for x in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
                let (b, _) = beta_of_x(&p, x).unwrap();
                let back = x_of_beta(&p, b).unwrap();
                assert!((back - x).abs() < 1e-8, "s={s} x={x}: {back}");
            }
        }
    }

    #[test]
    fn theta_s3_closed_form() {
        let p = ip(3.0);
        for beta in [0.25, 0.5, 1.0, 2.0, 10.0] {
            let got = theta_of_beta(&p, beta).unwrap();
            let want = PI * (1.0 - beta / (1.0 + beta * beta).sqrt());
            assert!((got - want).abs() < 1e-8, "beta={beta}: {got} vs {want}");
        }
        assert_eq!(theta_of_beta(&p, 0.0).unwrap(), PI);
    }

    #[test]
    fn theta_strictly_decreasing() {
        for s in [2.5, 3.0, 7.0, 40.0] {
            let p = ip(s);
            let mut prev = theta_of_beta(&p, 0.0).unwrap();
            for i in 1..=20 {
                let beta = 0.3 * i as f64;
                let t = theta_of_beta(&p, beta).unwrap();
                assert!(t < prev, "s={s} beta={beta}: {t} !< {prev}");
                prev = t;
            }
        }
    }

    #[test]
    fn grazing_regime_beyond_x_resolution() {
        // s = 40, beta = 10: the root has 1 - x ~ 1e-40, far below f64
        // resolution in x; the eps path must still produce a sane angle.
        let s = 40.0;
        let eps = eps_of_beta(s, 10.0).unwrap();
        assert!(eps > 0.0 && eps < 1e-30, "eps = {eps}");
        let theta = theta_of_beta(&ip(s), 10.0).unwrap();
        assert!(theta > 0.0 && theta < 1e-25, "theta = {theta}");
        // residual of the root equation in the eps representation
        let resid = (eps * (2.0 - eps) - ((1.0 - eps) / 10.0).powf(s - 1.0)).abs();
        assert!(resid < 1e-45, "residual {resid}");
    }

    #[test]
    fn integrand_majorant_from_uniform_bound() {
        // For s >= 3 the radicand satisfies D >= (1-z)(1-x^2 z^2), so the
        // integrand of the angle integral never exceeds
        // (1-z)^{-1/2} (1-x^2 z^2)^{-1/2}.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let s = rng.random_range(3.0..200.0);
            let x = rng.random_range(0.0..0.999);
            let w = rng.random_range(1e-4..1.0);
            let z = 1.0 - w;
            let (omz2, z2mzs, _) = radicand_parts(w, s);
            let d = omz2 + (1.0 - x) * (1.0 + x) * z2mzs;
            let bound = w * (1.0 - x * x * z * z);
            assert!(
                d >= bound - 1e-14,
                "majorant violated at s={s} x={x} z={z}: D={d} < {bound}"
            );
        }
    }

    #[test]
    fn curve_construction_and_residuals() {
        for s in [3.0, 7.0, 40.0] {
            let p = ip(s);
            let betas = ScatteringCurve::default_beta_grid(&p, 40, 1e-6).unwrap();
            let curve = ScatteringCurve::from_beta_grid(&p, &betas).unwrap();
            assert_eq!(curve.nodes.len(), 40);
            for n in &curve.nodes {
                assert!(n.residual <= 1e-10);
                assert!(n.theta > 0.0 && n.theta <= PI);
                assert!((0.0..FRAC_PI_2).contains(&n.phi));
            }
        }
    }
}
