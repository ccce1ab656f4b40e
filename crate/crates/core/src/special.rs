//! Gamma function and related ratios.
//!
//! `ln_gamma` uses the Stirling asymptotic series with Bernoulli-number
//! coefficients for arguments >= 10 and the recurrence Γ(x+1) = x Γ(x) to
//! lift smaller arguments. Relative accuracy is better than 1e-12 on
//! [0.5, 200], which is what the kernel constants require.

use std::f64::consts::PI;

/// Stirling series coefficients B_{2n} / (2n (2n-1)) for n = 1..=7.
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

/// Arguments below this are lifted by the recurrence before applying the
/// asymptotic series (its truncation error is ~3e-17 at x = 10).
const STIRLING_MIN: f64 = 10.0;

fn stirling_ln_gamma(x: f64) -> f64 {
    let mut series = 0.0;
    let x2 = x * x;
    let mut xp = x;
    for c in STIRLING {
        series += c / xp;
        xp *= x2;
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

/// Natural log of Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x >= STIRLING_MIN {
        return stirling_ln_gamma(x);
    }
    let mut shift = 0.0;
    let mut y = x;
    while y < STIRLING_MIN {
        shift += y.ln();
        y += 1.0;
    }
    stirling_ln_gamma(y) - shift
}

/// Γ(x) for x > 0. Overflows to +inf for x beyond ~171.6, like the usual
/// double-precision gamma.
pub fn gamma(x: f64) -> f64 {
    assert!(x > 0.0, "gamma requires x > 0, got {x}");
    if x >= STIRLING_MIN {
        return stirling_ln_gamma(x).exp();
    }
    // Γ(x) = Γ(y) / (x (x+1) ... (y-1)) with y lifted above the series cutoff.
    let mut prod = 1.0;
    let mut y = x;
    while y < STIRLING_MIN {
        prod *= y;
        y += 1.0;
    }
    stirling_ln_gamma(y).exp() / prod
}

/// √π Γ(s/2) / Γ((s-1)/2), evaluated through `ln_gamma` so large s does not
/// overflow. This ratio is the x = 1 value of the deviation-angle derivative
/// and enters the grazing constant.
pub fn sqrt_pi_half_gamma_ratio(s: f64) -> f64 {
    assert!(s > 1.0, "ratio requires s > 1, got {s}");
    PI.sqrt() * (ln_gamma(s / 2.0) - ln_gamma((s - 1.0) / 2.0)).exp()
}
