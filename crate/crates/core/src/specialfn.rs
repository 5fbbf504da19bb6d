//! Real special functions used by the closed-form covariances.
//!
//! Method per function, and where each switches regime:
//!
//! | function | small argument | large argument | crossover |
//! |----------|----------------|----------------|-----------|
//! | Γ        | reflection for x < 1/2 | Lanczos (g = 7, 9 terms) | 0.5 |
//! | K_ν      | trapezoid on ∫ e^{-x cosh t} cosh νt dt, step shrinking with x and ν | same | n/a |
//! | J_0, J_1 | periodic trapezoid on Bessel's integral | same | n/a |
//! | Y_0, Y_1 | Gauss–Legendre on [0, π] + exp–sinh Laplace tail | same | n/a |
//! | H_0, H_1 | power series | Y_ν + (H_ν − Y_ν), the difference as a Laplace integral | [`STRUVE_SERIES_MAX`] |
//! | Ci, Si   | power series | continued fraction for e^{ix}E₁(ix) | [`TRIG_INTEGRAL_SERIES_MAX`] |
//!
//! All functions are pure and thread-safe.

use crate::error::{domain, Result};
use crate::quadrature::{exp_sinh, GaussLegendre};
use num_complex::Complex64;
use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};
use std::sync::OnceLock;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument Struve functions use their power series.
pub const STRUVE_SERIES_MAX: f64 = 12.0;

/// Below this argument Ci and Si use their power series.
pub const TRIG_INTEGRAL_SERIES_MAX: f64 = 2.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(z: f64) -> f64 {
    // z = x - 1
    let mut s = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + i as f64);
    }
    s
}

/// sin(πx) with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        (PI * (-1.0 - r)).sin()
    } else {
        (PI * r).sin()
    }
}

/// Γ(x) for real x away from the poles {0, −1, −2, …}.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("gamma: non-finite argument {x}"));
    }
    if x <= 0.0 && x == x.round() {
        return domain(format!("gamma: pole at {x}"));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        PI / (sin_pi(x) * gamma_unchecked(1.0 - x))
    } else if x == x.round() && x <= 171.0 {
        // exact factorials
        (1..(x as u64)).fold(1.0, |acc, k| acc * k as f64)
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
    }
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("ln_gamma: argument must be positive and finite, got {x}"));
    }
    if x < 0.5 {
        return Ok((PI / (sin_pi(x) * gamma_unchecked(1.0 - x))).ln());
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// ln(n!).
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else if n <= 170 {
        gamma_unchecked(n as f64 + 1.0).ln()
    } else {
        ln_gamma(n as f64 + 1.0).expect("positive argument")
    }
}

/// Modified Bessel function of the second kind K_ν(x), x > 0.
///
/// Trapezoidal rule on `e^{x} K_ν(x) = ∫_0^∞ e^{−2x sinh²(t/2)} cosh(νt) dt`.
/// The integrand is even and entire, so the rule converges geometrically in
/// 1/h; the step shrinks with x and ν to keep the strip error below 1e−16
/// relative to the exponentially scaled value.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("bessel_k: argument must be positive, got {x}"));
    }
    if !nu.is_finite() {
        return domain("bessel_k: non-finite order");
    }
    Ok(bessel_k_scaled(nu.abs(), x) * (-x).exp())
}

/// e^{x} K_ν(x).
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let h = 0.25 / (1.0 + x / 10.0 + nu / 4.0);
    let log_term = |t: f64| {
        let s = (0.5 * t).sinh();
        nu * t - 2.0 * x * s * s
    };
    let cosh_factor = |t: f64| 0.5 * (1.0 + (-2.0 * nu * t).exp());
    let mut sum = 0.5;
    let mut k = 1usize;
    loop {
        let t = k as f64 * h;
        let lt = log_term(t);
        let v = lt.exp() * cosh_factor(t);
        sum += v;
        // past the peak of the integrand and negligible
        let past_peak = x * t.sinh() > nu;
        if past_peak && v < 1e-18 * sum {
            break;
        }
        if t > 750.0 {
            break;
        }
        k += 1;
    }
    sum * h
}

/// Bessel function of the first kind J_n(x), n ∈ {0, 1}.
///
/// Periodic trapezoid on `J_n(x) = (1/π) ∫_0^π cos(nθ − x sin θ) dθ`; with
/// ⌈|x|⌉ + 40 panels the aliasing terms are Bessel functions of order > 2|x| + 79
/// and negligible.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    if order > 1 {
        return domain(format!("bessel_j: order {order} not supported (0 or 1)"));
    }
    if !x.is_finite() {
        return domain("bessel_j: non-finite argument");
    }
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    let n = order as f64;
    let m = x.abs().ceil() as usize + 40;
    let step = PI / m as f64;
    let mut sum = 0.5 * (1.0 + (n * PI).cos());
    for j in 1..m {
        let th = j as f64 * step;
        sum += (n * th - x * th.sin()).cos();
    }
    Ok(sum / m as f64)
}

fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Bessel function of the second kind Y_n(x), n ∈ {0, 1}, x > 0.
///
/// Uses `π Y_n(x) = ∫_0^π sin(x sin θ − nθ) dθ − ∫_0^∞ (e^{nt} + (−1)^n e^{−nt}) e^{−x sinh t} dt`;
/// the second integral is rewritten with u = x sinh t as a Laplace integral.
pub fn bessel_y(order: u32, x: f64) -> Result<f64> {
    if order > 1 {
        return domain(format!("bessel_y: order {order} not supported (0 or 1)"));
    }
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("bessel_y: argument must be positive, got {x}"));
    }
    let n = order as f64;
    let panels = (x / 3.0).ceil() as usize + 2;
    let oscillatory = gl20().integrate_composite(|th| (x * th.sin() - n * th).sin(), 0.0, PI, panels);
    let laplace = if order == 0 {
        exp_sinh(|u| 2.0 * (-u).exp() / u.hypot(x), 0.0, 0.0, 1e-15).value
    } else {
        exp_sinh(|u| 2.0 * u * (-u).exp() / (x * u.hypot(x)), 0.0, 0.0, 1e-15).value
    };
    Ok((oscillatory - laplace) / PI)
}

/// Struve function H_n(x), n ∈ {0, 1}, x ≥ 0.
///
/// Power series below [`STRUVE_SERIES_MAX`]; above it `Y_n + (H_n − Y_n)`
/// with the difference from [`struve_h_minus_y`].
pub fn struve_h(order: u32, x: f64) -> Result<f64> {
    if order > 1 {
        return domain(format!("struve_h: order {order} not supported (0 or 1)"));
    }
    if !x.is_finite() {
        return domain("struve_h: non-finite argument");
    }
    if x < 0.0 {
        // H_0 is odd, H_1 is even
        let v = struve_h(order, -x)?;
        return Ok(if order == 0 { -v } else { v });
    }
    if x < STRUVE_SERIES_MAX {
        return Ok(struve_series(order, x));
    }
    Ok(bessel_y(order, x)? + struve_h_minus_y(order, x)?)
}

fn struve_series(order: u32, x: f64) -> f64 {
    let nu = order as f64;
    let half = 0.5 * x;
    // Γ(3/2) Γ(ν + 3/2)
    let g = if order == 0 { 0.25 * PI } else { 0.375 * PI };
    let mut term = half.powf(nu + 1.0) / g;
    let mut sum = term;
    let q = half * half;
    for k in 0..500 {
        let kf = k as f64;
        term *= -q / ((kf + 1.5) * (kf + nu + 1.5));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// H_n(x) − Y_n(x) for x > 0 as a single Laplace integral,
/// `(2 (x/2)^n / (√π Γ(n + 1/2))) ∫_0^∞ e^{−xt} (1 + t²)^{n − 1/2} dt`,
/// which has no cancellation at any argument.
pub fn struve_h_minus_y(order: u32, x: f64) -> Result<f64> {
    match order {
        0 => {
            if !(x > 0.0) {
                return domain(format!("struve_h_minus_y: argument must be positive, got {x}"));
            }
            let r = exp_sinh(|t| (-x * t).exp() / t.hypot(1.0), 0.0, 0.0, 1e-15);
            Ok(FRAC_2_PI * r.value)
        }
        1 => Ok(FRAC_2_PI + struve_h1_minus_y1_excess(x)?),
        _ => domain(format!("struve_h_minus_y: order {order} not supported (0 or 1)")),
    }
}

/// `H_1(x) − Y_1(x) − 2/π = (2x/π) ∫_0^∞ e^{−xt} (√(1+t²) − 1) dt`.
pub fn struve_h1_minus_y1_excess(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("struve_h1_minus_y1_excess: argument must be positive, got {x}"));
    }
    let r = exp_sinh(
        |t| {
            let t2 = t * t;
            (-x * t).exp() * t2 / (1.0 + (1.0 + t2).sqrt())
        },
        0.0,
        0.0,
        1e-15,
    );
    Ok(FRAC_2_PI * x * r.value)
}

/// e^{ix} E₁(ix) by modified Lentz continued fraction; equals g(x) − i f(x)
/// with f, g the auxiliary functions of the trigonometric integrals.
fn exp_e1_imag(x: f64) -> Complex64 {
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..10_000 {
        let a = -((i - 1) as f64).powi(2);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h
}

fn trig_integral_series(x: f64) -> (f64, f64) {
    // returns (Ci − γ − ln x, Si)
    let x2 = x * x;
    let mut si = x;
    let mut term = x; // x^{2k+1}/(2k+1)!
    let mut ci = 0.0;
    let mut cterm = 1.0; // x^{2k}/(2k)!
    for k in 1..200 {
        let kf = k as f64;
        cterm *= -x2 / ((2.0 * kf - 1.0) * (2.0 * kf));
        ci += cterm / (2.0 * kf);
        term *= -x2 / ((2.0 * kf) * (2.0 * kf + 1.0));
        si += term / (2.0 * kf + 1.0);
        if term.abs() < 1e-18 * si.abs() && cterm.abs() < 1e-18 {
            break;
        }
    }
    (ci, si)
}

/// Cosine integral Ci(x) = γ + ln x + ∫_0^x (cos t − 1)/t dt, x > 0.
pub fn cosint(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("cosint: argument must be positive, got {x}"));
    }
    if x <= TRIG_INTEGRAL_SERIES_MAX {
        let (c, _) = trig_integral_series(x);
        return Ok(EULER_GAMMA + x.ln() + c);
    }
    let h = exp_e1_imag(x);
    let (g, f) = (h.re, -h.im);
    Ok(f * x.sin() - g * x.cos())
}

/// Sine integral Si(x) = ∫_0^x sin t / t dt (odd in x).
pub fn sinint(x: f64) -> Result<f64> {
    if x.is_nan() {
        return domain("sinint: NaN argument");
    }
    if x.is_infinite() {
        return Ok(FRAC_PI_2.copysign(x));
    }
    if x < 0.0 {
        return Ok(-sinint(-x)?);
    }
    if x <= TRIG_INTEGRAL_SERIES_MAX {
        return Ok(trig_integral_series(x).1);
    }
    let h = exp_e1_imag(x);
    let (g, f) = (h.re, -h.im);
    Ok(FRAC_PI_2 - f * x.cos() - g * x.sin())
}

/// First auxiliary function of the trigonometric integrals,
/// f(z) = Ci(z) sin z + (π/2 − Si(z)) cos z = ∫_0^∞ e^{−zt}/(t² + 1) dt.
pub fn aux_f(z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return domain(format!("aux_f: argument must be non-negative, got {z}"));
    }
    if z == 0.0 {
        return Ok(FRAC_PI_2);
    }
    if z.is_infinite() {
        return Ok(0.0);
    }
    if z <= TRIG_INTEGRAL_SERIES_MAX {
        let (c, s) = trig_integral_series(z);
        let ci = EULER_GAMMA + z.ln() + c;
        return Ok(ci * z.sin() + (FRAC_PI_2 - s) * z.cos());
    }
    Ok(-exp_e1_imag(z).im)
}
