//! Gamma, digamma and trigamma for positive real arguments.
//!
//! Γ uses the Lanczos approximation (Pugh's g = 10.900511 coefficient set,
//! accurate to ~16 digits). ψ and ψ′ use the ascending recurrences
//! ψ(x) = ψ(x+1) − 1/x and ψ′(x) = ψ′(x+1) + 1/x² to push the argument
//! above 10, followed by the Bernoulli asymptotic series. Derivatives of Γ
//! are then Γ′ = Γψ and Γ″ = Γ(ψ² + ψ′).

/// Polynomial coefficients for the Lanczos approximation of Γ.
const GAMMA_DK: &[f64] = &[
    2.4857408913875355e-5,
    1.0514237858172197,
    -3.4568709722201625,
    4.512277094668948,
    -2.9828522532357664,
    1.056397115771267,
    -1.9542877319164587e-1,
    1.709705434044412e-2,
    -5.719261174043057e-4,
    4.633994733599057e-6,
    -2.7199490848860772e-9,
];

/// Auxiliary shift in the Lanczos approximation.
const GAMMA_R: f64 = 10.900511;

/// Constant value for `2 * sqrt(e / pi)`.
const TWO_SQRT_E_OVER_PI: f64 = 1.8603827342052657;

/// Gamma function Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = GAMMA_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(GAMMA_DK[0], |s, t| s + t.1 / (t.0 as f64 - x));

        std::f64::consts::PI
            / ((std::f64::consts::PI * x).sin()
                * s
                * TWO_SQRT_E_OVER_PI
                * ((0.5 - x + GAMMA_R) / std::f64::consts::E).powf(0.5 - x))
    } else {
        let s = GAMMA_DK
            .iter()
            .enumerate()
            .skip(1)
            .fold(GAMMA_DK[0], |s, t| s + t.1 / (x + t.0 as f64 - 1.0));

        s * TWO_SQRT_E_OVER_PI * ((x - 0.5 + GAMMA_R) / std::f64::consts::E).powf(x - 0.5)
    }
}

/// Constant value for `ln(2 * sqrt(e / pi))`.
const LN_2_SQRT_E_OVER_PI: f64 = 0.6207822376352452;

/// ln Γ(x) for x > 0 (Lanczos in log space; no overflow for large x).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return gamma(x).ln();
    }
    let s = GAMMA_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(GAMMA_DK[0], |s, t| s + t.1 / (x + t.0 as f64 - 1.0));
    s.ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + GAMMA_R) / std::f64::consts::E).ln()
}

/// Digamma function ψ(x) = Γ′(x)/Γ(x) for x > 0.
pub fn digamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // Asymptotic series: ψ(x) ~ ln x − 1/(2x) − Σ B_2k / (2k x^2k).
    let inv2 = 1.0 / (x * x);
    let series = inv2
        * (-1.0 / 12.0
            + inv2
                * (1.0 / 120.0
                    + inv2
                        * (-1.0 / 252.0
                            + inv2
                                * (1.0 / 240.0
                                    + inv2
                                        * (-1.0 / 132.0
                                            + inv2 * (691.0 / 32760.0 + inv2 * (-1.0 / 12.0)))))));
    acc + x.ln() - 0.5 / x + series
}

/// Trigamma function ψ′(x) for x > 0.
pub fn trigamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    // ψ′(x) ~ 1/x + 1/(2x²) + Σ B_2k / x^{2k+1}.
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * inv
        * (1.0 / 6.0
            + inv2
                * (-1.0 / 30.0
                    + inv2
                        * (1.0 / 42.0
                            + inv2
                                * (-1.0 / 30.0
                                    + inv2
                                        * (5.0 / 66.0
                                            + inv2 * (-691.0 / 2730.0 + inv2 * (7.0 / 6.0)))))));
    acc + inv + 0.5 * inv2 + series
}
