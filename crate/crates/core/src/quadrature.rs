//! Integration rules shared by the special functions, the covariance oracles
//! and the intensity measures.
//!
//! * [`GaussLegendre`]: fixed-order rule, used tensorised on observation windows.
//! * [`adaptive_gk15`]: globally adaptive Gauss–Kronrod 7/15 on a finite interval.
//! * [`tanh_sinh`] / [`exp_sinh`]: double-exponential rules for endpoint
//!   singularities and half-infinite ranges.
//! * [`oscillatory_half_line`]: panel-by-panel integration between zeros of an
//!   oscillating factor with Wynn-epsilon acceleration of the partial sums.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Composite rule with `panels` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * width;
                self.integrate(&mut f, lo, lo + width)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

/// Globally adaptive Gauss–Kronrod (7, 15) quadrature on `[a, b]`.
///
/// Bisects the interval carrying the largest error until the summed error
/// drops below `max(abs_tol, rel_tol * |I|)` or `max_segments` is reached. The
/// result always carries the final error estimate; the caller decides whether
/// it is acceptable (see [`QuadResult::require`]).
pub fn adaptive_gk15<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> QuadResult {
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut evaluations = 15;
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < max_segments {
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to remove drift from incremental updates.
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    QuadResult { value, abs_error, evaluations }
}

impl QuadResult {
    /// Fails with [`Error::Quadrature`] when the estimated error exceeds `tol`.
    pub fn require(self, tol: f64, context: &str) -> Result<Self> {
        if !self.value.is_finite() {
            return Err(Error::Quadrature {
                estimate: f64::INFINITY,
                tolerance: tol,
                context: format!("{context}: non-finite value"),
            });
        }
        if self.abs_error > tol {
            return Err(Error::Quadrature { estimate: self.abs_error, tolerance: tol, context: context.to_string() });
        }
        Ok(self)
    }
}

const DE_MAX_LEVEL: usize = 10;
const DE_S_LIMIT: f64 = 6.5;

/// Trapezoidal sum of a double-exponentially decaying integrand in `s`,
/// refined by halving the step until two successive levels agree.
fn de_driver<M, F>(map: M, mut f: F, abs_tol: f64, rel_tol: f64) -> QuadResult
where
    M: Fn(f64) -> Option<(f64, f64)>,
    F: FnMut(f64) -> f64,
{
    let mut evaluations = 0usize;
    let mut term = |s: f64, evaluations: &mut usize| -> Option<f64> {
        let (x, w) = map(s)?;
        *evaluations += 1;
        let v = w * f(x);
        if v.is_finite() {
            Some(v)
        } else {
            None
        }
    };

    // Level 0 with h = 1/2 also fixes the truncation window.
    let h0 = 0.5;
    let mut sum = term(0.0, &mut evaluations).unwrap_or(f64::NAN);
    let mut window = [0.0_f64; 2];
    for (dir_idx, dir) in [-1.0_f64, 1.0].into_iter().enumerate() {
        let mut small = 0;
        let mut k = 1;
        loop {
            let s = dir * k as f64 * h0;
            if s.abs() > DE_S_LIMIT {
                break;
            }
            match term(s, &mut evaluations) {
                Some(v) => {
                    sum += v;
                    window[dir_idx] = s;
                    if v.abs() <= 1e-20 * sum.abs().max(f64::MIN_POSITIVE) {
                        small += 1;
                        if small >= 3 {
                            break;
                        }
                    } else {
                        small = 0;
                    }
                }
                None => break,
            }
            k += 1;
        }
    }
    let (s_lo, s_hi) = (window[0], window[1]);
    let mut estimate = sum * h0;
    let mut error = f64::INFINITY;
    let mut h = h0;
    for _level in 1..=DE_MAX_LEVEL {
        h *= 0.5;
        let mut added = 0.0;
        let mut s = s_lo + h;
        while s < s_hi {
            if let Some(v) = term(s, &mut evaluations) {
                added += v;
            }
            s += 2.0 * h;
        }
        sum += added;
        let next = sum * h;
        error = (next - estimate).abs();
        estimate = next;
        if error <= abs_tol.max(rel_tol * estimate.abs()) {
            break;
        }
    }
    QuadResult { value: estimate, abs_error: error, evaluations }
}

/// Tanh–sinh quadrature on a finite interval; tolerates integrable endpoint
/// singularities. The integrand is never evaluated exactly at `a` or `b`.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    let half = 0.5 * (b - a);
    let map = move |s: f64| -> Option<(f64, f64)> {
        let u = FRAC_PI_2 * s.sinh();
        let cosh_u = u.cosh();
        if !cosh_u.is_finite() {
            return None;
        }
        // distance from the nearer endpoint, in units of `half`
        let e = (-2.0 * u.abs()).exp();
        let delta = 2.0 * e / (1.0 + e);
        if delta == 0.0 {
            return None;
        }
        let x = if s < 0.0 { a + half * delta } else { b - half * delta };
        let w = half * FRAC_PI_2 * s.cosh() / (cosh_u * cosh_u);
        Some((x, w))
    };
    de_driver(map, f, abs_tol, rel_tol)
}

/// Exp–sinh quadrature on `[a, ∞)`.
pub fn exp_sinh<F: FnMut(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    let map = move |s: f64| -> Option<(f64, f64)> {
        let u = FRAC_PI_2 * s.sinh();
        if u > 700.0 || u < -700.0 {
            return None;
        }
        let e = u.exp();
        let x = a + e;
        Some((x, FRAC_PI_2 * s.cosh() * e))
    };
    de_driver(map, f, abs_tol, rel_tol)
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
///
/// Returns the extrapolated limit and the difference between the last two
/// even-column estimates as an error indicator.
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let n = partial_sums.len();
    if n == 0 {
        return (0.0, f64::INFINITY);
    }
    if n < 3 {
        let last = partial_sums[n - 1];
        let prev = if n == 2 { partial_sums[0] } else { f64::INFINITY };
        return (last, (last - prev).abs());
    }
    // prev_col = eps_{k-1}, col = eps_k; entries indexed by n offset.
    let mut prev_col = vec![0.0; n + 1];
    let mut col: Vec<f64> = partial_sums.to_vec();
    let mut estimates = vec![col[col.len() - 1]];
    let mut k = 0;
    while col.len() > 1 {
        let mut next = Vec::with_capacity(col.len() - 1);
        for i in 0..col.len() - 1 {
            let diff = col[i + 1] - col[i];
            if diff == 0.0 {
                let last = col[i + 1];
                return (last, 0.0);
            }
            next.push(prev_col[i + 1] + 1.0 / diff);
        }
        prev_col = col;
        col = next;
        k += 1;
        if k % 2 == 0 {
            let v = col[col.len() - 1];
            if v.is_finite() {
                estimates.push(v);
            }
        }
    }
    let m = estimates.len();
    if m >= 2 {
        (estimates[m - 1], (estimates[m - 1] - estimates[m - 2]).abs())
    } else {
        (estimates[0], f64::INFINITY)
    }
}

/// Integrates `f` over `[0, ∞)` for an integrand whose oscillating factor
/// changes sign at the increasing `breakpoints(k)`, k = 0, 1, ...
///
/// `[0, b_0]` and every `[b_k, b_{k+1}]` are integrated with
/// [`adaptive_gk15`]; the partial sums form an alternating sequence that is
/// accelerated with [`wynn_epsilon`]. Stops when the extrapolation error is
/// below `tol` or after `max_panels`.
pub fn oscillatory_half_line<F, B>(mut f: F, breakpoints: B, tol: f64, max_panels: usize) -> QuadResult
where
    F: FnMut(f64) -> f64,
    B: Fn(usize) -> f64,
{
    let panel_tol = tol * 1e-3;
    let mut evaluations = 0;
    let mut sums = Vec::with_capacity(max_panels);
    let mut lo = 0.0;
    let mut total = 0.0;
    let mut panel_err = 0.0;
    let mut last = (f64::NAN, f64::INFINITY);
    for k in 0..max_panels {
        let hi = breakpoints(k);
        let r = adaptive_gk15(&mut f, lo, hi, panel_tol, 1e-14, 200);
        evaluations += r.evaluations;
        total += r.value;
        panel_err += r.abs_error;
        sums.push(total);
        lo = hi;
        if sums.len() >= 8 {
            let window = &sums[sums.len().saturating_sub(24)..];
            let (v, e) = wynn_epsilon(window);
            let prev = last.0;
            last = (v, e.max((v - prev).abs()));
            if last.1 + panel_err < tol {
                break;
            }
        }
    }
    QuadResult { value: last.0, abs_error: last.1 + panel_err, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(10);
        // degree 19 is exact for 10 nodes
        let v = gl.integrate(|x| x.powi(18) + 3.0 * x.powi(5), -1.0, 1.0);
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let w: f64 = gl.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_large_order_is_sane() {
        let gl = GaussLegendre::new(64);
        let v = gl.integrate(f64::exp, 0.0, 1.0);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn gk15_adapts_to_a_peak() {
        let r = adaptive_gk15(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12, 500);
        let exact = 2.0 * (1.0 / 1e-2) * (1.0_f64 / 1e-2).atan();
        assert!((r.value - exact).abs() / exact < 1e-11, "{:?} vs {exact}", r);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let r = tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-14, 1e-14);
        assert!((r.value - 2.0).abs() < 1e-12, "{r:?}");
        let r = tanh_sinh(|x| x.ln(), 0.0, 1.0, 1e-14, 1e-14);
        assert!((r.value + 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn exp_sinh_on_half_line() {
        let r = exp_sinh(|x| (-x).exp(), 0.0, 1e-15, 1e-15);
        assert!((r.value - 1.0).abs() < 1e-13, "{r:?}");
        let r = exp_sinh(|x| 1.0 / (1.0 + x * x), 0.0, 1e-15, 1e-15);
        assert!((r.value - FRAC_PI_2).abs() < 1e-13, "{r:?}");
        // slow algebraic tail
        let r = exp_sinh(|x| 1.0 / (1.0 + x).powf(1.1), 0.0, 1e-14, 1e-14);
        assert!((r.value - 10.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let sums: Vec<f64> = (1..=15)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&sums);
        assert!((v - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_dirichlet_integral() {
        // ∫ sin(x)/x dx = π/2 over [0, ∞)
        let r = oscillatory_half_line(
            |x| if x == 0.0 { 1.0 } else { x.sin() / x },
            |k| (k + 1) as f64 * std::f64::consts::PI,
            1e-10,
            200,
        );
        assert!((r.value - FRAC_PI_2).abs() < 1e-9, "{r:?}");
    }
}
