//! Point patterns of alive particles: window counts, thinning samplers,
//! intensity measures, the conditional sampler given a partial observation,
//! and the exact likelihood of small fully observed instances.

use crate::error::{config, domain, Error, Result};
use crate::estimation::ModelParams;
use crate::particles::{analytic_intensity_unchecked, normal_interval};
use crate::quadrature::{GaussLegendre, QuadResult};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Axis-aligned box, half-open `[low, high)` for membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl Window {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        let w = Self { low, high };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.low.len() != self.high.len() || self.low.is_empty() || self.low.len() > 2 {
            return config("window needs matching bounds in 1 or 2 dimensions");
        }
        if self.low.iter().zip(&self.high).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return config(format!("window bounds must satisfy low < high: {:?} / {:?}", self.low, self.high));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.low.len()
    }

    pub fn volume(&self) -> f64 {
        self.low.iter().zip(&self.high).map(|(a, b)| b - a).product()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.low.iter().zip(&self.high)).all(|(v, (a, b))| *v >= *a && *v < *b)
    }

    /// The three observation windows of the estimation example.
    pub fn table2() -> [Window; 3] {
        [
            Window { low: vec![0.0, 0.0], high: vec![1.0, 1.0] },
            Window { low: vec![-1.0, -1.0], high: vec![0.0, 0.0] },
            Window { low: vec![1.0, 2.0], high: vec![2.0, 3.0] },
        ]
    }
}

/// Points at one time, optionally restricted to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub points: Vec<Vec<f64>>,
    pub t: f64,
    pub window: Option<Window>,
}

impl PointPattern {
    pub fn new(points: Vec<Vec<f64>>, t: f64, window: Option<Window>) -> Result<Self> {
        if let Some(w) = &window {
            if let Some(p) = points.iter().find(|p| !w.contains(p)) {
                return domain(format!("point {p:?} lies outside its window"));
            }
        }
        Ok(Self { points, t, window })
    }

    /// The points of `self` inside `w`, labelled with `w`.
    pub fn restrict(&self, w: &Window) -> PointPattern {
        PointPattern {
            points: self.points.iter().filter(|p| w.contains(p)).cloned().collect(),
            t: self.t,
            window: Some(w.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Number of points of `pattern` in `window`.
pub fn count(pattern: &PointPattern, window: &Window) -> usize {
    pattern.points.iter().filter(|p| window.contains(p)).count()
}

/// Intensity `u(x, t)` with an upper bound `M` valid on the sampling window.
pub struct IntensityFn<'a> {
    eval: Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync + 'a>,
    pub bound: f64,
}

impl<'a> IntensityFn<'a> {
    pub fn new(eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'a, bound: f64) -> Self {
        Self { eval: Box::new(eval), bound }
    }

    /// Bound from a 64^d grid scan of `window` at time `t`, times 1.01.
    pub fn scanned(eval: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'a, window: &Window, t: f64) -> Self {
        let m: usize = 64;
        let d = window.d();
        let mut max: f64 = 0.0;
        let mut x = vec![0.0; d];
        for k in 0..m.pow(d as u32) {
            let mut r = k;
            for a in 0..d {
                let i = r % m;
                r /= m;
                x[a] = window.low[a] + (i as f64 + 0.5) / m as f64 * (window.high[a] - window.low[a]);
            }
            max = max.max(eval(&x, t));
        }
        Self { eval: Box::new(eval), bound: 1.01 * max }
    }

    /// Analytic intensity of Brownian particles, bounded by its peak times 1.01.
    pub fn gaussian(theta: ModelParams, eta0: f64, t: f64) -> Self {
        let peak = eta0 * (-theta.kappa * theta.kappa * t).exp() / (2.0 * PI * theta.sigma * theta.sigma * t);
        Self::new(move |x, s| analytic_intensity_unchecked(x, s, &theta, eta0), 1.01 * peak)
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }
}

/// Inhomogeneous Poisson pattern on `window` by thinning homogeneous
/// `Poisson(M |window|)` proposals with acceptance `u/M`.
pub fn sample_poisson<R: Rng + ?Sized>(
    intensity: &IntensityFn<'_>,
    window: &Window,
    t: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    window.validate()?;
    let m = intensity.bound;
    if !(m >= 0.0) || !m.is_finite() {
        return domain(format!("intensity bound must be finite and non-negative, got {m}"));
    }
    let mean = m * window.volume();
    if mean == 0.0 {
        return Ok(PointPattern { points: vec![], t, window: Some(window.clone()) });
    }
    let n = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng) as usize;
    let d = window.d();
    let mut points = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|a| rng.random_range(window.low[a]..window.high[a])).collect();
        let u = intensity.eval(&x, t);
        if u > m {
            return Err(Error::BoundViolated { value: u, bound: m, location: x });
        }
        if rng.random::<f64>() * m < u {
            points.push(x);
        }
    }
    Ok(PointPattern { points, t, window: Some(window.clone()) })
}

/// Tensor Gauss–Legendre `∫_window u(x, t) dx` with `nodes` per axis; the
/// error estimate is the difference to the rule with `nodes/2`.
pub fn intensity_measure(intensity: &IntensityFn<'_>, window: &Window, t: f64, nodes: usize) -> Result<QuadResult> {
    window.validate()?;
    let fine = tensor_gl(intensity, window, t, nodes)?;
    let coarse = tensor_gl(intensity, window, t, (nodes / 2).max(1))?;
    Ok(QuadResult { value: fine, abs_error: (fine - coarse).abs(), evaluations: nodes.pow(window.d() as u32) })
}

fn tensor_gl(intensity: &IntensityFn<'_>, window: &Window, t: f64, nodes: usize) -> Result<f64> {
    let gl = GaussLegendre::new(nodes);
    let d = window.d();
    let mid: Vec<f64> = (0..d).map(|a| 0.5 * (window.low[a] + window.high[a])).collect();
    let half: Vec<f64> = (0..d).map(|a| 0.5 * (window.high[a] - window.low[a])).collect();
    let mut sum = 0.0;
    let mut x = vec![0.0; d];
    for k in 0..nodes.pow(d as u32) {
        let mut r = k;
        let mut w = 1.0;
        for a in 0..d {
            let i = r % nodes;
            r /= nodes;
            x[a] = mid[a] + half[a] * gl.nodes()[i];
            w *= half[a] * gl.weights()[i];
        }
        let v = intensity.eval(&x, t);
        if !v.is_finite() {
            return domain(format!("non-finite intensity {v} at {x:?}"));
        }
        sum += w * v;
    }
    Ok(sum)
}

/// Probability that a particle seen at `x` at time `t` was inside `a` at time `s`
/// (Gaussian bridge from the Dirac release at 0).
fn bridge_prob_in(a: &Window, x: &[f64], s: f64, t: f64, theta: &ModelParams) -> f64 {
    let b = [theta.b1, theta.b2];
    let sd = theta.sigma * (s * (t - s) / t).sqrt();
    let mut p = 1.0;
    for ax in 0..x.len() {
        let mean = b[ax] * s + (s / t) * (x[ax] - b[ax] * t);
        p *= normal_interval(a.low[ax], a.high[ax], mean, sd);
    }
    p
}

/// Intensity at `(x, t)` of alive particles conditional on the pattern
/// `observed` seen inside window `a` at time `s`: contributions of the
/// observed points plus that of the unobserved mass outside `a`.
pub fn conditional_intensity(
    observed: &PointPattern,
    a: &Window,
    x: &[f64],
    t: f64,
    theta: &ModelParams,
    eta0: f64,
) -> f64 {
    let s = observed.t;
    let h = t - s;
    let k2 = theta.kappa * theta.kappa;
    let b = [theta.b1, theta.b2];
    let v = theta.sigma * theta.sigma * h;
    let d = x.len() as f64;
    let norm = (-k2 * h).exp() * (2.0 * PI * v).powf(-d / 2.0);
    let from_points: f64 = observed
        .points
        .iter()
        .map(|p| {
            let r2: f64 = (0..x.len()).map(|ax| (x[ax] - p[ax] - b[ax] * h).powi(2)).sum();
            norm * (-r2 / (2.0 * v)).exp()
        })
        .sum();
    let outside = analytic_intensity_unchecked(x, t, theta, eta0) * (1.0 - bridge_prob_in(a, x, s, t, theta));
    from_points + outside
}

/// Pattern at time `t` on `superwindow` conditional on `observed` (seen in
/// its window at time `observed.t < t`): each observed point survives with
/// probability `e^{−κ²(t−s)}` and moves by the Gaussian transition; the
/// particles unobserved at `s` form an independent Poisson pattern sampled
/// by thinning.
pub fn conditional_sampler<R: Rng + ?Sized>(
    observed: &PointPattern,
    theta: &ModelParams,
    eta0: f64,
    t: f64,
    superwindow: &Window,
    rng: &mut R,
) -> Result<PointPattern> {
    let s = observed.t;
    if !(t > s) || !(s > 0.0) {
        return domain(format!("conditional_sampler needs 0 < s < t, got s = {s}, t = {t}"));
    }
    let a = observed
        .window
        .as_ref()
        .ok_or_else(|| Error::Domain("conditional_sampler: observed pattern needs a window".into()))?;
    let h = t - s;
    let survive = (-theta.kappa * theta.kappa * h).exp();
    let b = [theta.b1, theta.b2];
    let sd = theta.sigma * h.sqrt();
    let mut points = Vec::new();
    for p in &observed.points {
        if rng.random::<f64>() < survive {
            let y: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(ax, v)| {
                    let z: f64 = rng.sample(StandardNormal);
                    v + b[ax] * h + sd * z
                })
                .collect();
            if superwindow.contains(&y) {
                points.push(y);
            }
        }
    }
    let a2 = a.clone();
    let th = *theta;
    let outside = IntensityFn::new(
        move |x, tt| analytic_intensity_unchecked(x, tt, &th, eta0) * (1.0 - bridge_prob_in(&a2, x, s, tt, &th)),
        IntensityFn::gaussian(*theta, eta0, t).bound,
    );
    points.extend(sample_poisson(&outside, superwindow, t, rng)?.points);
    Ok(PointPattern { points, t, window: Some(superwindow.clone()) })
}

/// Variance-to-mean ratios of window counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessResult {
    /// Ratio of `N_t(A)` given the pattern observed in `A` at `s`.
    pub conditional_ratio: f64,
    /// Ratio of `N_t(A)` over fresh patterns.
    pub unconditional_ratio: f64,
    /// `N_s(A)` of the conditioning pattern.
    pub observed_count: usize,
}

fn var_mean_ratio(counts: &[usize]) -> f64 {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var / mean
}

/// Shows that `N_t(A)` given `X_{sA}` is not Poisson: draws one conditioning
/// pattern in `A` at `s` (redrawn until non-empty), then `reps` conditional
/// and `reps` unconditional patterns at `t`.
pub fn non_poisson_witness<R: Rng + ?Sized>(
    theta: &ModelParams,
    eta0: f64,
    s: f64,
    t: f64,
    a: &Window,
    reps: usize,
    rng: &mut R,
) -> Result<WitnessResult> {
    if reps < 2 {
        return domain("non_poisson_witness needs at least 2 replicates");
    }
    let u_s = IntensityFn::gaussian(*theta, eta0, s);
    let mut observed = sample_poisson(&u_s, a, s, rng)?;
    for _ in 0..1000 {
        if !observed.is_empty() {
            break;
        }
        observed = sample_poisson(&u_s, a, s, rng)?;
    }
    if observed.is_empty() {
        return domain("window A is (almost surely) empty at time s");
    }
    let mut cond = Vec::with_capacity(reps);
    let mut uncond = Vec::with_capacity(reps);
    let u_t = IntensityFn::gaussian(*theta, eta0, t);
    for _ in 0..reps {
        if t == s {
            cond.push(observed.len());
        } else {
            cond.push(conditional_sampler(&observed, theta, eta0, t, a, rng)?.len());
        }
        uncond.push(sample_poisson(&u_t, a, t, rng)?.len());
    }
    Ok(WitnessResult {
        conditional_ratio: var_mean_ratio(&cond),
        unconditional_ratio: var_mean_ratio(&uncond),
        observed_count: observed.len(),
    })
}

/// Largest instance accepted by [`exact_loglik_small`].
pub const EXACT_MAX_POINTS: usize = 8;
pub const EXACT_MAX_TIMES: usize = 3;

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log Σ_ψ Π_i exp(logp[i][ψ_i])` over injective maps ψ from `n` rows to `m` columns.
fn log_injective_sum(logp: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
    if row == logp.len() {
        return 0.0;
    }
    let mut acc = f64::NEG_INFINITY;
    for j in 0..used.len() {
        if !used[j] {
            used[j] = true;
            let rest = log_injective_sum(logp, row + 1, used);
            used[j] = false;
            acc = log_sum_exp(acc, logp[row][j] + rest);
        }
    }
    acc
}

/// Exact log-likelihood of fully observed patterns (windows = whole space)
/// at increasing times, particles released from a Dirac mass at 0.
///
/// The first pattern has the Poisson (Janossy) density
/// `e^{−Λ} Π ũ(xᵢ, t₁)` with `Λ = η₀ e^{−κ²t₁}`. Each transition sums over
/// injective assignments ψ of the new points to the previous ones, with
/// weight `q^n (1 − q)^{m−n}`, `q = e^{−κ²Δt}`, times the Gaussian
/// transition densities.
pub fn exact_loglik_small(observations: &[PointPattern], theta: &ModelParams, eta0: f64) -> Result<f64> {
    if observations.is_empty() {
        return domain("exact_loglik_small needs at least one pattern");
    }
    let total: usize = observations.iter().map(|p| p.len()).sum();
    if total > EXACT_MAX_POINTS || observations.len() > EXACT_MAX_TIMES {
        return domain(format!(
            "instance too large for exact enumeration: {total} points over {} times (max {EXACT_MAX_POINTS} / {EXACT_MAX_TIMES})",
            observations.len()
        ));
    }
    if observations.iter().any(|p| p.window.is_some()) {
        return domain("exact_loglik_small requires whole-space observation");
    }
    if observations.windows(2).any(|w| !(w[1].t > w[0].t)) || !(observations[0].t > 0.0) {
        return domain("observation times must be positive and strictly increasing");
    }
    let k2 = theta.kappa * theta.kappa;
    let first = &observations[0];
    let mut ll = -eta0 * (-k2 * first.t).exp();
    for p in &first.points {
        ll += analytic_intensity_unchecked(p, first.t, theta, eta0).ln();
    }
    let b = [theta.b1, theta.b2];
    for w in observations.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let (m, n) = (prev.len(), next.len());
        if n > m {
            return Ok(f64::NEG_INFINITY);
        }
        let h = next.t - prev.t;
        let q = (-k2 * h).exp();
        let v = theta.sigma * theta.sigma * h;
        let logp: Vec<Vec<f64>> = next
            .points
            .iter()
            .map(|y| {
                prev.points
                    .iter()
                    .map(|x| {
                        let d = y.len() as f64;
                        let r2: f64 = (0..y.len()).map(|a| (y[a] - x[a] - b[a] * h).powi(2)).sum();
                        -0.5 * d * (2.0 * PI * v).ln() - r2 / (2.0 * v)
                    })
                    .collect()
            })
            .collect();
        let weight = n as f64 * q.ln() + if m > n { (m - n) as f64 * (1.0 - q).ln() } else { 0.0 };
        ll += weight + log_injective_sum(&logp, 0, &mut vec![false; m]);
    }
    Ok(ll)
}
