//! Pseudo-likelihood estimation of `Θ = (B₁, B₂, σ, κ)` from particle
//! locations or window counts, and the Monte-Carlo study over replicates.

use crate::error::{config, domain, Error, Result};
use crate::particles::{exact_gaussian_transition, gaussian_window_mass, init, InitialDistribution, LevyParams};
use crate::pointprocess::{intensity_measure, IntensityFn, Window};
use crate::rng::stream;
use crate::specialfn::ln_factorial;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Drift, noise amplitude and deposition parameter of Brownian particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub b1: f64,
    pub b2: f64,
    pub sigma: f64,
    pub kappa: f64,
}

impl ModelParams {
    pub fn to_array(&self) -> [f64; 4] {
        [self.b1, self.b2, self.sigma, self.kappa]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { b1: v[0], b2: v[1], sigma: v[2], kappa: v[3] }
    }

    /// Mean deposition time `1/κ²`.
    pub fn mean_deposition_time(&self) -> f64 {
        1.0 / (self.kappa * self.kappa)
    }

    /// True parameters of the estimation example.
    pub fn table2() -> Self {
        Self { b1: 0.3, b2: 0.5, sigma: 0.3, kappa: 1.0 / 3f64.sqrt() }
    }
}

/// Open box `Π (low_i, high_i)` for the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub low: [f64; 4],
    pub high: [f64; 4],
}

impl Default for Bounds {
    /// `(−1, 1) × (−1, 1) × (0.01, 1) × (0.1, 10)`.
    fn default() -> Self {
        Self { low: [-1.0, -1.0, 0.01, 0.1], high: [1.0, 1.0, 1.0, 10.0] }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        if self.low.iter().zip(&self.high).any(|(a, b)| !(a < b)) {
            return config("bounds need low < high for every parameter");
        }
        if !(self.low[2] > 0.0 && self.low[3] > 0.0) {
            return config("sigma and kappa bounds must be positive");
        }
        Ok(())
    }

    pub fn contains_strictly(&self, p: &ModelParams) -> bool {
        p.to_array().iter().enumerate().all(|(i, v)| *v > self.low[i] && *v < self.high[i])
    }

    pub fn center(&self) -> ModelParams {
        ModelParams::from_array(std::array::from_fn(|i| 0.5 * (self.low[i] + self.high[i])))
    }

    /// Scaled logit of `p`.
    pub fn to_unbounded(&self, p: &ModelParams) -> [f64; 4] {
        let v = p.to_array();
        std::array::from_fn(|i| {
            let u = (v[i] - self.low[i]) / (self.high[i] - self.low[i]);
            (u / (1.0 - u)).ln()
        })
    }

    /// Inverse of [`Bounds::to_unbounded`]; arguments are clamped to ±30 so
    /// the image stays strictly inside the box.
    pub fn from_unbounded(&self, z: &[f64; 4]) -> ModelParams {
        ModelParams::from_array(std::array::from_fn(|i| {
            let u = 1.0 / (1.0 + (-z[i].clamp(-30.0, 30.0)).exp());
            self.low[i] + (self.high[i] - self.low[i]) * u
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsMode {
    Locations,
    Counts,
}

/// Points or count observed in one window at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowObservation {
    pub window: Window,
    pub t: f64,
    /// Empty in count mode.
    pub points: Vec<Vec<f64>>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub mode: ObsMode,
    pub records: Vec<WindowObservation>,
}

impl ObservationSet {
    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return config("observation set is empty");
        }
        if self.records.windows(2).any(|w| !(w[1].t > w[0].t)) || !(self.records[0].t > 0.0) {
            return config("observation times must be positive and strictly increasing");
        }
        for r in &self.records {
            r.window.validate()?;
            if r.window.d() != 2 {
                return config("estimation windows must be two-dimensional");
            }
            if self.mode == ObsMode::Locations {
                if r.points.len() != r.count {
                    return config("location records need count = number of points");
                }
                if r.points.iter().any(|p| !r.window.contains(p)) {
                    return domain("an observed point lies outside its window");
                }
            }
        }
        Ok(())
    }

    /// The same data reduced to window counts.
    pub fn to_counts(&self) -> ObservationSet {
        ObservationSet {
            mode: ObsMode::Counts,
            records: self
                .records
                .iter()
                .map(|r| WindowObservation { window: r.window.clone(), t: r.t, points: vec![], count: r.count })
                .collect(),
        }
    }
}

/// How `φ_{Θ,t}(A) = ∫_A ũ` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhiMethod {
    /// Product of normal interval probabilities.
    Exact,
    /// Tensor Gauss–Legendre with the given nodes per axis.
    Quadrature { nodes: usize },
}

fn phi(w: &Window, t: f64, theta: &ModelParams, eta0: f64, method: PhiMethod) -> Result<f64> {
    match method {
        PhiMethod::Exact => gaussian_window_mass(&w.low, &w.high, t, theta, eta0),
        PhiMethod::Quadrature { nodes } => {
            Ok(intensity_measure(&IntensityFn::gaussian(*theta, eta0, t), w, t, nodes)?.value)
        }
    }
}

/// `Σ_k [ |A_k| − φ_k + Σ_i log ũ(t_k, X_k^i) ]`; −∞ when a point has zero intensity.
pub fn pseudo_loglik_locations(obs: &ObservationSet, theta: &ModelParams, eta0: f64, method: PhiMethod) -> Result<f64> {
    if obs.mode != ObsMode::Locations {
        return domain("pseudo_loglik_locations needs a Locations observation set");
    }
    let stats = LocationStats::new(obs);
    stats.eval(theta, eta0, method)
}

/// `Σ_k [ N_k log φ_k − φ_k − log N_k! ]`.
pub fn pseudo_loglik_counts(obs: &ObservationSet, theta: &ModelParams, eta0: f64, method: PhiMethod) -> Result<f64> {
    let mut ll = 0.0;
    for r in &obs.records {
        let f = phi(&r.window, r.t, theta, eta0, method)?;
        let n = r.count as f64;
        ll += if r.count == 0 { -f } else { n * f.ln() - f - ln_factorial(r.count as u64) };
    }
    Ok(ll)
}

/// Centred sufficient statistics of the observed locations per record.
#[derive(Debug, Clone)]
struct LocationStats {
    records: Vec<(Window, f64, f64, [f64; 2], f64)>, // window, t, n, mean, Σ‖x − mean‖²
}

impl LocationStats {
    fn new(obs: &ObservationSet) -> Self {
        let records = obs
            .records
            .iter()
            .map(|r| {
                let n = r.points.len() as f64;
                let mut mean = [0.0; 2];
                for p in &r.points {
                    mean[0] += p[0];
                    mean[1] += p[1];
                }
                if n > 0.0 {
                    mean[0] /= n;
                    mean[1] /= n;
                }
                let ss = r.points.iter().map(|p| (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2)).sum();
                (r.window.clone(), r.t, n, mean, ss)
            })
            .collect();
        Self { records }
    }

    fn eval(&self, theta: &ModelParams, eta0: f64, method: PhiMethod) -> Result<f64> {
        let k2 = theta.kappa * theta.kappa;
        let mut ll = 0.0;
        for (w, t, n, mean, ss) in &self.records {
            let f = phi(w, *t, theta, eta0, method)?;
            ll += w.volume() - f;
            if *n > 0.0 {
                let v = theta.sigma * theta.sigma * t;
                let off = (mean[0] - theta.b1 * t).powi(2) + (mean[1] - theta.b2 * t).powi(2);
                let r2 = ss + n * off;
                ll += n * (eta0.ln() - k2 * t - (2.0 * PI * v).ln()) - r2 / (2.0 * v);
            }
        }
        Ok(if ll.is_nan() { f64::NEG_INFINITY } else { ll })
    }
}

/// Starting points of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Start {
    Point(ModelParams),
    /// Box centre plus `lhs` Latin-hypercube points drawn with `seed`.
    Multistart {
        lhs: usize,
        seed: u64,
    },
}

impl Default for Start {
    fn default() -> Self {
        Start::Multistart { lhs: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub max_evals: usize,
    /// Simplex diameter in the unbounded coordinates.
    pub xtol: f64,
    pub initial_step: f64,
    pub phi: PhiMethod,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_evals: 2000, xtol: 1e-6, initial_step: 0.5, phi: PhiMethod::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub loglik: f64,
    pub evaluations: usize,
    /// The best start met the simplex-diameter criterion.
    pub converged: bool,
    pub starts: usize,
}

/// Minimizes `f` by Nelder–Mead from the simplex `x0 + step·e_i`.
/// Returns `(argmin, min, evaluations, converged)`.
pub fn nelder_mead<const N: usize>(
    mut f: impl FnMut(&[f64; N]) -> f64,
    x0: [f64; N],
    step: f64,
    xtol: f64,
    max_evals: usize,
) -> ([f64; N], f64, usize, bool) {
    let mut evals = 0;
    let mut call = |x: &[f64; N], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((x0, call(&x0, &mut evals)));
    for i in 0..N {
        let mut x = x0;
        x[i] += step;
        let v = call(&x, &mut evals);
        simplex.push((x, v));
    }
    let diameter = |s: &[([f64; N], f64)]| {
        s[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&s[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < xtol {
            return (simplex[0].0, simplex[0].1, evals, true);
        }
        if evals >= max_evals {
            return (simplex[0].0, simplex[0].1, evals, false);
        }
        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] += x[i] / N as f64;
            }
        }
        let worst = simplex[N];
        let along = |c: f64| -> [f64; N] { std::array::from_fn(|i| centroid[i] + c * (worst.0[i] - centroid[i])) };
        let xr = along(-1.0);
        let fr = call(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = call(&xe, &mut evals);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(-0.5);
                (x, call(&x, &mut evals))
            } else {
                let x = along(0.5);
                (x, call(&x, &mut evals))
            };
            if fc < fr.min(worst.1) {
                simplex[N] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = std::array::from_fn(|i| best[i] + 0.5 * (v.0[i] - best[i]));
                    v.1 = call(&v.0, &mut evals);
                }
            }
        }
    }
}

/// Box centre followed by `n` Latin-hypercube points (one per stratum on every axis).
pub fn multistart_points<R: Rng + ?Sized>(bounds: &Bounds, n: usize, rng: &mut R) -> Vec<ModelParams> {
    let mut out = vec![bounds.center()];
    if n == 0 {
        return out;
    }
    let strata: Vec<Vec<usize>> = (0..4)
        .map(|_| {
            let mut s: Vec<usize> = (0..n).collect();
            s.shuffle(rng);
            s
        })
        .collect();
    for k in 0..n {
        out.push(ModelParams::from_array(std::array::from_fn(|i| {
            let u = (strata[i][k] as f64 + rng.random::<f64>()) / n as f64;
            bounds.low[i] + (bounds.high[i] - bounds.low[i]) * u.clamp(1e-9, 1.0 - 1e-9)
        })));
    }
    out
}

/// Maximizes the pseudo-likelihood of `obs` inside `bounds`.
///
/// Nelder–Mead runs on the scaled-logit image of the box; every start is
/// run to convergence and the best end point is returned. Errors when no
/// start improves on its initial value.
pub fn fit(obs: &ObservationSet, bounds: &Bounds, start: &Start, eta0: f64, opts: &FitOptions) -> Result<FitResult> {
    fit_traced(obs, bounds, start, eta0, opts, |_| {})
}

/// [`fit`] calling `trace` with every parameter vector evaluated.
pub fn fit_traced(
    obs: &ObservationSet,
    bounds: &Bounds,
    start: &Start,
    eta0: f64,
    opts: &FitOptions,
    mut trace: impl FnMut(&ModelParams),
) -> Result<FitResult> {
    obs.validate()?;
    bounds.validate()?;
    let starts = match start {
        Start::Point(p) => {
            if !bounds.contains_strictly(p) {
                return config(format!("initial point {p:?} lies outside the parameter box"));
            }
            vec![*p]
        }
        Start::Multistart { lhs, seed } => multistart_points(bounds, *lhs, &mut stream(*seed, 0)),
    };
    let stats = LocationStats::new(obs);
    let objective = |p: &ModelParams| -> f64 {
        let ll = match obs.mode {
            ObsMode::Locations => stats.eval(p, eta0, opts.phi),
            ObsMode::Counts => pseudo_loglik_counts(obs, p, eta0, opts.phi),
        };
        match ll {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let mut best: Option<FitResult> = None;
    let mut total = 0;
    let mut improved = false;
    for s in &starts {
        let z0 = bounds.to_unbounded(s);
        let f0 = objective(s);
        let (z, fz, evals, converged) = nelder_mead(
            |z| {
                let p = bounds.from_unbounded(z);
                assert!(bounds.contains_strictly(&p), "optimizer left the parameter box: {p:?}");
                trace(&p);
                objective(&p)
            },
            z0,
            opts.initial_step,
            opts.xtol,
            opts.max_evals,
        );
        total += evals;
        if fz < f0 || (fz == f0 && fz.is_finite()) {
            improved |= fz < f0 || converged;
        }
        if fz.is_finite() && best.as_ref().is_none_or(|b| -fz > b.loglik) {
            best = Some(FitResult {
                params: bounds.from_unbounded(&z),
                loglik: -fz,
                evaluations: 0,
                converged,
                starts: starts.len(),
            });
        }
    }
    match best {
        Some(mut b) if improved => {
            b.evaluations = total;
            Ok(b)
        }
        _ => Err(Error::NonConvergence("no optimizer start improved the pseudo-likelihood".into())),
    }
}

/// Setup of the Monte-Carlo estimation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub theta: ModelParams,
    pub eta0: f64,
    /// Radius of the release disc centred at 0.
    pub release_radius: f64,
    pub windows: Vec<Window>,
    pub times: Vec<f64>,
    pub bounds: Bounds,
    /// Latin-hypercube starts added to the box centre.
    pub lhs_starts: usize,
    pub fit: FitOptions,
}

impl StudyConfig {
    /// B = (0.3, 0.5), σ = 0.3, 1/κ² = 3, η₀ = 10⁴, release disc of radius
    /// 0.05, windows A₁, A₂, A₃ observed at t = 1, 3, 6.
    pub fn table2() -> Self {
        Self {
            theta: ModelParams::table2(),
            eta0: 1e4,
            release_radius: 0.05,
            windows: Window::table2().to_vec(),
            times: vec![1.0, 3.0, 6.0],
            bounds: Bounds::default(),
            lhs_starts: 4,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.len() != self.times.len() || self.windows.is_empty() {
            return config("study needs one window per observation time");
        }
        if !(self.eta0 > 0.0 && self.release_radius > 0.0) {
            return config("eta0 and release_radius must be positive");
        }
        self.bounds.validate()?;
        if !self.bounds.contains_strictly(&self.theta) {
            return config("true parameters lie outside the bounds");
        }
        for w in &self.windows {
            w.validate()?;
        }
        Ok(())
    }
}

/// Simulates one dataset: particles released in the disc, moved by exact
/// Gaussian transitions, alive particles recorded in `A_k` at `t_k`.
pub fn simulate_observations<R: Rng + ?Sized>(cfg: &StudyConfig, rng: &mut R) -> Result<ObservationSet> {
    cfg.validate()?;
    let p0 = InitialDistribution::UniformDisc { center: vec![0.0, 0.0], radius: cfg.release_radius };
    let params = LevyParams::gaussian(&cfg.theta, cfg.eta0, p0);
    let mut sys = init(&params, rng)?;
    let mut records = Vec::with_capacity(cfg.times.len());
    for (w, &t) in cfg.windows.iter().zip(&cfg.times) {
        exact_gaussian_transition(&mut sys, t, &params, rng)?;
        let points: Vec<Vec<f64>> = sys.alive_positions().into_iter().filter(|p| w.contains(p)).collect();
        records.push(WindowObservation { window: w.clone(), t, count: points.len(), points });
    }
    Ok(ObservationSet { mode: ObsMode::Locations, records })
}

/// Fits of one replicate; `None` marks a failed fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub rep: usize,
    pub counts_observed: Vec<usize>,
    pub locations: Option<FitResult>,
    pub counts: Option<FitResult>,
}

/// Mean and SD of one estimator over the successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub param: String,
    pub mode: String,
    pub mean: f64,
    pub sd: f64,
    pub reps: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub rows: Vec<SummaryRow>,
    pub replicates: Vec<ReplicateResult>,
}

impl StudySummary {
    pub fn row(&self, param: &str, mode: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.param == param && r.mode == mode)
    }
}

/// Minimum replicate count accepted by [`mc_study`].
pub const MIN_REPS: usize = 30;

/// Runs `reps` independent replicates in parallel; replicate `r` draws from
/// stream `(master_seed, r)` and fits both observation modes.
pub fn mc_study(cfg: &StudyConfig, reps: usize, master_seed: u64) -> Result<StudySummary> {
    if reps < MIN_REPS {
        return config(format!("mc_study needs at least {MIN_REPS} replicates, got {reps}"));
    }
    mc_study_unchecked(cfg, reps, master_seed)
}

/// [`mc_study`] without the replicate floor (for reproducibility checks).
pub fn mc_study_unchecked(cfg: &StudyConfig, reps: usize, master_seed: u64) -> Result<StudySummary> {
    cfg.validate()?;
    let replicates: Vec<ReplicateResult> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<ReplicateResult> {
            let mut rng = stream(master_seed, r as u64);
            let obs = simulate_observations(cfg, &mut rng)?;
            let start = Start::Multistart { lhs: cfg.lhs_starts, seed: rng.random() };
            let locations = fit(&obs, &cfg.bounds, &start, cfg.eta0, &cfg.fit).ok();
            let counts = fit(&obs.to_counts(), &cfg.bounds, &start, cfg.eta0, &cfg.fit).ok();
            Ok(ReplicateResult {
                rep: r,
                counts_observed: obs.records.iter().map(|o| o.count).collect(),
                locations,
                counts,
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let extract: [(&str, fn(&ModelParams) -> f64); 4] =
        [("B1", |p| p.b1), ("B2", |p| p.b2), ("sigma", |p| p.sigma), ("inv_kappa2", |p| p.mean_deposition_time())];
    for (mode, pick) in [
        ("locations", (|r: &ReplicateResult| r.locations.clone()) as fn(&ReplicateResult) -> Option<FitResult>),
        ("counts", |r: &ReplicateResult| r.counts.clone()),
    ] {
        let fits: Vec<FitResult> = replicates.iter().filter_map(pick).collect();
        for (name, f) in extract {
            let v: Vec<f64> = fits.iter().map(|fr| f(&fr.params)).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            rows.push(SummaryRow {
                param: name.into(),
                mode: mode.into(),
                mean,
                sd,
                reps: v.len(),
                excluded: reps - v.len(),
            });
        }
    }
    Ok(StudySummary { rows, replicates })
}
