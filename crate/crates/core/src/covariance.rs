//! Symbols, spectral densities, dispersal kernels and stationary covariances
//! of the four dispersal-operator families.
//!
//! Conventions: the time-independent spectral density is
//! `(2π)^{-d/2} g(ξ)^{-2}` and the covariance is its Fourier transform
//! `ρ(h) = (2π)^{-d} ∫ e^{iξ·h} g(ξ)^{-2} dξ`. Radial functions take the lag
//! norm `‖h‖`.

use crate::error::{domain, Error, Result};
use crate::quadrature::{exp_sinh, oscillatory_half_line, tanh_sinh, QuadResult};
use crate::specialfn::{aux_f, bessel_j, bessel_k, gamma, struve_h1_minus_y1_excess, struve_h_minus_y};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Shape of a convolution dispersal kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", deny_unknown_fields)]
pub enum KernelSpec {
    /// `J(x) ∝ e^{-‖x‖/β}`.
    Exponential { beta: f64 },
    /// Kernel whose characteristic function is `(1 + β²‖ξ‖²)^{-m}`.
    MaternKernel { m: u32, beta: f64 },
    /// Singular kernel `c_{d,α}/‖x‖^{d+α}` of the fractional Laplacian.
    PowerLaw { alpha: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Exponential { beta } | KernelSpec::MaternKernel { beta, .. } if !(beta > 0.0) => {
                domain(format!("kernel: beta must be positive, got {beta}"))
            }
            KernelSpec::MaternKernel { m: 0, .. } => domain("kernel: Matérn order m must be ≥ 1"),
            KernelSpec::PowerLaw { alpha } if !(alpha > 0.0 && alpha < 2.0) => {
                domain(format!("kernel: power-law alpha must lie in (0,2), got {alpha}"))
            }
            _ => Ok(()),
        }
    }

    /// Whether the kernel has unit mass (false for the power law).
    pub fn is_normalizable(&self) -> bool {
        !matches!(self, KernelSpec::PowerLaw { .. })
    }

    /// `(2π)^{d/2} F(J)(ξ) = ∫ J(x) e^{-iξ·x} dx` at `‖ξ‖ = r`.
    pub fn characteristic(&self, r: f64, d: usize) -> Result<f64> {
        self.validate()?;
        match *self {
            KernelSpec::Exponential { beta } => Ok((1.0 + beta * beta * r * r).powf(-(d as f64 + 1.0) / 2.0)),
            KernelSpec::MaternKernel { m, beta } => Ok((1.0 + beta * beta * r * r).powi(-(m as i32))),
            KernelSpec::PowerLaw { .. } => Err(Error::Domain(
                "power-law kernel has no characteristic function; use the FractionalReaction family".into(),
            )),
        }
    }

    /// Kernel value `J(x)` at `‖x‖ = r`, normalized to unit mass.
    pub fn density(&self, r: f64, d: usize) -> Result<f64> {
        self.validate()?;
        check_dim(d)?;
        match *self {
            KernelSpec::Exponential { beta } => {
                let df = d as f64;
                let norm = (2.0 * beta).powi(d as i32) * PI.powf((df - 1.0) / 2.0) * gamma((df + 1.0) / 2.0)?;
                Ok((-r / beta).exp() / norm)
            }
            KernelSpec::MaternKernel { m, beta } => {
                let alpha = m as f64;
                if r == 0.0 && alpha <= d as f64 / 2.0 {
                    return domain("Matérn kernel is unbounded at the origin for m ≤ d/2");
                }
                Ok(beta.powf(-2.0 * alpha) * matern_radial(r, alpha, 1.0 / beta, d)?)
            }
            KernelSpec::PowerLaw { alpha } => {
                if !(r > 0.0) {
                    return domain("power-law kernel is singular at the origin");
                }
                Ok(frac_laplacian_constant(d, alpha)? / r.powf(d as f64 + alpha))
            }
        }
    }
}

/// Operator family with its family-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Family {
    /// `(κ² − Δ)^{α/2}`.
    DampedFractional { alpha: f64 },
    /// `(−Δ)^{α/2} + κ²`.
    FractionalReaction { alpha: f64 },
    /// `−D(J⋆U − U) + κ²U`.
    ConvolutionKernel { dispersal: f64, kernel: KernelSpec },
    /// Pure absorption without dispersal (the D → 0 limit): white-noise field.
    Nugget,
}

/// A dispersal operator family with absorption rate κ in dimension d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub family: Family,
    pub kappa: f64,
    pub d: usize,
}

/// Wavevector and optional temporal frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPoint {
    pub xi: Vec<f64>,
    pub omega: Option<f64>,
}

impl SpectralPoint {
    pub fn spatial(xi: Vec<f64>) -> Self {
        Self { xi, omega: None }
    }

    pub fn norm(&self) -> f64 {
        self.xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        domain(format!("dimension must be 1, 2 or 3, got {d}"))
    }
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return domain(format!("kappa must be positive, got {}", self.kappa));
        }
        match self.family {
            Family::DampedFractional { alpha } | Family::FractionalReaction { alpha } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return domain(format!("alpha must lie in (0,2], got {alpha}"));
                }
            }
            Family::ConvolutionKernel { dispersal, kernel } => {
                if !(dispersal > 0.0) {
                    return domain(format!("dispersal rate must be positive, got {dispersal}"));
                }
                kernel.validate()?;
                if !kernel.is_normalizable() {
                    return domain(
                        "power-law kernel is not integrable; use the FractionalReaction family with the same alpha",
                    );
                }
            }
            Family::Nugget => {}
        }
        Ok(())
    }

    /// Mass of the Dirac component of the covariance at h = 0.
    pub fn nugget(&self) -> f64 {
        let k2 = self.kappa * self.kappa;
        match self.family {
            Family::ConvolutionKernel { dispersal, .. } => (k2 + dispersal).powi(-2),
            Family::Nugget => k2.powi(-2),
            _ => 0.0,
        }
    }

    /// Symbol g at `‖ξ‖ = r`.
    pub fn symbol_radial(&self, r: f64) -> Result<f64> {
        self.validate()?;
        let k2 = self.kappa * self.kappa;
        Ok(match self.family {
            Family::DampedFractional { alpha } => (r * r + k2).powf(alpha / 2.0),
            Family::FractionalReaction { alpha } => r.powf(alpha) + k2,
            Family::ConvolutionKernel { dispersal, kernel } => {
                dispersal * (1.0 - kernel.characteristic(r, self.d)?) + k2
            }
            Family::Nugget => k2,
        })
    }

    /// `g(ξ)^{-2}` minus its limit at infinity (the Lebesgue part), at `‖ξ‖ = r`.
    fn continuous_weight(&self, r: f64) -> f64 {
        let g = self.symbol_radial(r).expect("validated spec");
        let w = 1.0 / (g * g);
        match self.family {
            Family::ConvolutionKernel { dispersal, kernel } => {
                // (q/(Pq − D))² − 1/P² with q = 1/characteristic, written without cancellation
                let p = self.kappa * self.kappa + dispersal;
                let c = kernel.characteristic(r, self.d).expect("validated kernel");
                let denom = p - dispersal * c;
                let t = dispersal * c / (p * denom);
                t * (2.0 / p + t)
            }
            Family::Nugget => 0.0,
            _ => w,
        }
    }

    /// Closed-form (or, where none exists, transform-based) continuous part
    /// of the covariance at lag norm `h`. The nugget is reported separately
    /// by [`CovarianceSpec::nugget`].
    pub fn covariance(&self, h: f64) -> Result<f64> {
        self.validate()?;
        let (d, kappa) = (self.d, self.kappa);
        let df = d as f64;
        match self.family {
            Family::DampedFractional { alpha } => {
                if alpha > df / 2.0 {
                    matern_cov(h, alpha, kappa, d)
                } else if alpha == df / 2.0 {
                    generalized_matern_cov(h, kappa, d)
                } else {
                    domain(format!("damped fractional covariance needs alpha ≥ d/2, got alpha={alpha}, d={d}"))
                }
            }
            Family::FractionalReaction { alpha } if alpha == 1.0 && d == 1 => frac_reaction_cov_1d(h, kappa),
            Family::FractionalReaction { alpha } if alpha == 1.0 && d == 2 => frac_reaction_cov_2d(h, kappa),
            Family::FractionalReaction { alpha } if alpha == 2.0 && d == 1 => matern_cov(h, 2.0, kappa, d),
            Family::ConvolutionKernel { dispersal, kernel: KernelSpec::Exponential { beta } } if d == 1 => {
                Ok(cov_exp_kernel_1d(h, dispersal, kappa, beta)?.continuous)
            }
            Family::Nugget => Ok(0.0),
            _ => {
                let scale = self.covariance_scale();
                Ok(cov_by_transform(self, h, &TransformConfig { abs_tol: 1e-10 * scale, ..Default::default() })?.value)
            }
        }
    }

    /// Rough magnitude of the covariance, used to set absolute tolerances.
    fn covariance_scale(&self) -> f64 {
        let k2 = self.kappa * self.kappa;
        (1.0 / (k2 * k2)).min(1.0).max(1e-12)
    }
}

/// Symbol `g(ξ)` of the operator family.
pub fn symbol(spec: &CovarianceSpec, p: &SpectralPoint) -> Result<f64> {
    if p.xi.len() != spec.d {
        return domain(format!("wavevector has {} components, expected {}", p.xi.len(), spec.d));
    }
    spec.symbol_radial(p.norm())
}

/// Spectral density: `(2π)^{-(d+1)/2}/(ω² + g²)` when `p.omega` is set,
/// `(2π)^{-d/2} g^{-2}` otherwise.
pub fn spectral_density(spec: &CovarianceSpec, p: &SpectralPoint) -> Result<f64> {
    let g = symbol(spec, p)?;
    let df = spec.d as f64;
    Ok(match p.omega {
        Some(w) => (2.0 * PI).powf(-(df + 1.0) / 2.0) / (w * w + g * g),
        None => (2.0 * PI).powf(-df / 2.0) / (g * g),
    })
}

/// Radial Matérn-type kernel `(κh)^ν K_ν(κh) / ((2π)^{d/2} 2^{α−1} κ^{2α−d} Γ(α))`,
/// ν = α − d/2 of any sign, at h > 0; finite limit at h = 0 when ν > 0.
fn matern_radial(h: f64, alpha: f64, kappa: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    let nu = alpha - df / 2.0;
    let norm = (2.0 * PI).powf(df / 2.0) * 2f64.powf(alpha - 1.0) * kappa.powf(2.0 * alpha - df) * gamma(alpha)?;
    if h == 0.0 {
        if nu > 0.0 {
            return Ok(2f64.powf(nu - 1.0) * gamma(nu)? / norm);
        }
        return domain("covariance diverges at h = 0 for alpha ≤ d/2");
    }
    let z = kappa * h;
    if z > 700.0 {
        return Ok(0.0);
    }
    Ok(z.powf(nu) * bessel_k(nu, z)? / norm)
}

/// Matérn covariance of the damped fractional operator, α > d/2.
pub fn matern_cov(h: f64, alpha: f64, kappa: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    if !(kappa > 0.0) {
        return domain(format!("matern_cov: kappa must be positive, got {kappa}"));
    }
    if !(alpha > d as f64 / 2.0) {
        return domain(format!(
            "matern_cov: alpha={alpha} ≤ d/2={}; use generalized_matern_cov for alpha = d/2",
            d as f64 / 2.0
        ));
    }
    if !(h >= 0.0) {
        return domain("matern_cov: lag norm must be non-negative");
    }
    matern_radial(h, alpha, kappa, d)
}

/// Generalized Matérn covariance for α = d/2, `K₀(κh)/((2π)^{d/2} 2^{d/2−1} Γ(d/2))`;
/// the constant continues the Matérn normalization to ν = 0 (1/(2π) in d = 2).
pub fn generalized_matern_cov(h: f64, kappa: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    if !(h > 0.0) {
        return domain("generalized_matern_cov: diverges logarithmically at h = 0");
    }
    if !(kappa > 0.0) {
        return domain(format!("generalized_matern_cov: kappa must be positive, got {kappa}"));
    }
    matern_radial(h, d as f64 / 2.0, kappa, d)
}

/// Covariance of the fractional operator with linear reaction, d = 1, α = 1:
/// `ρ(h) = (1 − z f(z)) / (κ²π)` with `z = κ²|h|`.
pub fn frac_reaction_cov_1d(h: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return domain(format!("frac_reaction_cov_1d: kappa must be positive, got {kappa}"));
    }
    let k2 = kappa * kappa;
    let z = k2 * h.abs();
    let bracket = if z < 20.0 {
        1.0 - z * aux_f(z)?
    } else {
        // 1 − z f(z) = ∫_0^∞ e^{−s} s²/(z² + s²) ds
        exp_sinh(|s| (-s).exp() * s * s / (z * z + s * s), 0.0, 0.0, 1e-15).value
    };
    Ok(bracket / (k2 * PI))
}

/// Covariance of the fractional operator with linear reaction, d = 2, α = 1:
/// `ρ(h) = (z/4)[(Y₁ − H₁)(z) + 2/π] − (1/4)(Y₀ − H₀)(z)` with `z = κ²‖h‖`.
/// Returns +∞ at h = 0 (logarithmic divergence of the variance).
pub fn frac_reaction_cov_2d(h: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return domain(format!("frac_reaction_cov_2d: kappa must be positive, got {kappa}"));
    }
    let z = kappa * kappa * h.abs();
    if z == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.25 * struve_h_minus_y(0, z)? - 0.25 * z * struve_h1_minus_y1_excess(z)?)
}

/// Damped fractional dispersal kernel `K_{(α+d)/2}(κs)/s^{(α+d)/2}`.
pub fn damped_kernel(s: f64, alpha: f64, kappa: f64, d: usize) -> Result<f64> {
    if !(s > 0.0) {
        return domain(format!("damped_kernel: s must be positive, got {s}"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("damped_kernel: alpha must lie in (0,2), got {alpha}"));
    }
    let nu = (alpha + d as f64) / 2.0;
    Ok(bessel_k(nu, kappa * s)? / s.powf(nu))
}

/// Absorption rate `h_κ = (1/|Γ(−α/2)|) ∫_0^∞ (1 − e^{−κ²t}) t^{−1−α/2} dt`
/// by quadrature (equal to κ^α).
pub fn h_kappa(alpha: f64, kappa: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("h_kappa: alpha must lie in (0,2), got {alpha}"));
    }
    if !(kappa >= 0.0) {
        return domain(format!("h_kappa: kappa must be non-negative, got {kappa}"));
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let k2 = kappa * kappa;
    let half = alpha / 2.0;
    let t0 = 1.0 / k2;
    // [0, t0] directly, [t0, ∞) through t = t0/v
    let near = tanh_sinh(|t| -(-k2 * t).exp_m1() * t.powf(-1.0 - half), 0.0, t0, 0.0, 1e-14);
    let far = tanh_sinh(|v| -(-1.0 / v).exp_m1() * v.powf(half - 1.0), 0.0, 1.0, 0.0, 1e-14);
    let total = near.value + t0.powf(-half) * far.value;
    Ok(total / gamma(-half)?.abs())
}

/// `c_{d,α} = 2^α Γ((d+α)/2) / (π^{d/2} |Γ(−α/2)|)`.
pub fn frac_laplacian_constant(d: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("alpha must lie in (0,2), got {alpha}"));
    }
    let df = d as f64;
    Ok(2f64.powf(alpha) * gamma((df + alpha) / 2.0)? / (PI.powf(df / 2.0) * gamma(-alpha / 2.0)?.abs()))
}

/// Nugget and continuous part of a covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuggetCov {
    pub nugget: f64,
    pub continuous: f64,
}

/// Constants `(a, c, c̃)` of `(c|h| + c̃) e^{−a|h|}` for the exponential kernel in d = 1.
pub fn exp_kernel_constants(dispersal: f64, kappa: f64, beta: f64) -> Result<(f64, f64, f64)> {
    if !(dispersal >= 0.0 && kappa > 0.0 && beta > 0.0) {
        return domain("exp_kernel_constants: need D ≥ 0, kappa > 0, beta > 0");
    }
    let p = kappa * kappa + dispersal;
    let a = kappa / (beta * p.sqrt());
    let c1 = 2.0 * dispersal / (beta * beta * p.powi(3));
    let c2 = dispersal * dispersal / (beta.powi(4) * p.powi(4));
    let c = c2 / (4.0 * a * a);
    let c_tilde = c1 / (2.0 * a) + c2 / (4.0 * a.powi(3));
    Ok((a, c, c_tilde))
}

/// Covariance for the exponential dispersal kernel, d = 1: nugget mass
/// `1/(κ² + D)²` at h = 0 plus `(c|h| + c̃) e^{−a|h|}`.
pub fn cov_exp_kernel_1d(h: f64, dispersal: f64, kappa: f64, beta: f64) -> Result<NuggetCov> {
    let (a, c, c_tilde) = exp_kernel_constants(dispersal, kappa, beta)?;
    let p = kappa * kappa + dispersal;
    let ah = a * h.abs();
    Ok(NuggetCov { nugget: 1.0 / (p * p), continuous: (c * h.abs() + c_tilde) * (-ah).exp() })
}

/// Tolerance settings for [`cov_by_transform`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConfig {
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-8, max_panels: 4000 }
    }
}

/// Zeros of J₀ by McMahon's expansion (accurate enough for panel breakpoints).
fn j0_zero_approx(k: usize) -> f64 {
    let b = (k as f64 - 0.25) * PI;
    let x = 8.0 * b;
    b + 1.0 / x - 124.0 / (3.0 * x.powi(3)) + 120_928.0 / (15.0 * x.powi(5))
}

/// Covariance by numerical radial Fourier (d = 1, 3) or Hankel (d = 2)
/// inversion of the spectral density, after removing any Lebesgue part.
///
/// Fails with [`Error::Quadrature`] when the error estimate exceeds
/// `cfg.abs_tol`.
pub fn cov_by_transform(spec: &CovarianceSpec, h: f64, cfg: &TransformConfig) -> Result<QuadResult> {
    spec.validate()?;
    if matches!(spec.family, Family::Nugget) {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let h = h.abs();
    let w = |r: f64| spec.continuous_weight(r);
    let ctx = format!("cov_by_transform({:?}, h={h})", spec.family);
    let r = if h == 0.0 {
        let (pow, c) = match spec.d {
            1 => (0, 1.0 / PI),
            2 => (1, 1.0 / (2.0 * PI)),
            _ => (2, 1.0 / (2.0 * PI * PI)),
        };
        let q = exp_sinh(|r| r.powi(pow) * w(r), 0.0, cfg.abs_tol * 1e-2, 1e-13);
        if !q.value.is_finite() || q.abs_error > q.value.abs() * 1e-3 + cfg.abs_tol {
            return Err(Error::Quadrature {
                estimate: q.abs_error,
                tolerance: cfg.abs_tol,
                context: format!("{ctx}: variance integral does not converge"),
            });
        }
        QuadResult { value: c * q.value, abs_error: c * q.abs_error, evaluations: q.evaluations }
    } else {
        let (q, c) = match spec.d {
            1 => (
                oscillatory_half_line(
                    |r| (h * r).cos() * w(r),
                    |k| (k as f64 + 0.5) * PI / h,
                    cfg.abs_tol * PI,
                    cfg.max_panels,
                ),
                1.0 / PI,
            ),
            2 => (
                oscillatory_half_line(
                    |r| bessel_j(0, h * r).expect("finite argument") * r * w(r),
                    |k| j0_zero_approx(k + 1) / h,
                    cfg.abs_tol * 2.0 * PI,
                    cfg.max_panels,
                ),
                1.0 / (2.0 * PI),
            ),
            _ => {
                let c = 1.0 / (2.0 * PI * PI * h);
                (
                    oscillatory_half_line(
                        |r| (h * r).sin() * r * w(r),
                        |k| (k as f64 + 1.0) * PI / h,
                        cfg.abs_tol / c,
                        cfg.max_panels,
                    ),
                    c,
                )
            }
        };
        QuadResult { value: c * q.value, abs_error: c * q.abs_error, evaluations: q.evaluations }
    };
    r.require(cfg.abs_tol, &ctx)
}

/// First lag at which a decreasing curve crosses `level`, by bisection on `[lo, hi]`.
pub fn practical_range<F>(curve: F, level: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    bisect(|h| Ok(curve(h)? - level), lo, hi, 1e-12).map_err(|e| Error::NonConvergence(format!("practical_range: {e}")))
}

/// Root of `f` on `[lo, hi]` by bisection to absolute width `xtol`.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NonConvergence(format!("no sign change on [{lo}, {hi}] ({flo}, {fhi})")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol * (1.0 + mid.abs()) {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// κ of the d = 2, α = 1 fractional-reaction covariance whose curve crosses
/// `level` at the same lag as the d = 2, α = 1 damped (generalized Matérn)
/// covariance with κ = `kappa_l`.
pub fn matched_reaction_kappa(kappa_l: f64, level: f64) -> Result<f64> {
    let range = practical_range(|h| generalized_matern_cov(h, kappa_l, 2), level, 1e-6, 50.0 / kappa_l)?;
    bisect(|k| Ok(frac_reaction_cov_2d(range, k)? - level), 0.05, 20.0, 1e-12)
}
