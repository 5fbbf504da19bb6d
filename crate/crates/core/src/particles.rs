//! Poisson-initialised particles moving as α-stable Lévy flights with drift
//! and depositing after an Exp(κ²) time.

use crate::error::{config, domain, Error, Result};
use crate::estimation::ModelParams;
use crate::fields::{DriftSpec, GridField};
use crate::output::{fmt_f64, CsvWriter};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Poisson, StandardNormal};
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Law of the initial particle locations.
#[derive(Debug, Clone)]
pub enum InitialDistribution {
    UniformDisc {
        center: Vec<f64>,
        radius: f64,
    },
    DiracAt(Vec<f64>),
    /// Piecewise-constant density proportional to the (non-negative) cell values.
    DensityGrid(GridField),
}

impl InitialDistribution {
    fn dim(&self) -> usize {
        match self {
            InitialDistribution::UniformDisc { center, .. } => center.len(),
            InitialDistribution::DiracAt(p) => p.len(),
            InitialDistribution::DensityGrid(g) => g.grid.d,
        }
    }
}

/// Noise amplitude σ(x, t).
#[derive(Clone)]
pub enum Scale {
    Constant(f64),
    Custom(Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::Constant(v) => write!(f, "Constant({v})"),
            Scale::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Scale {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Scale::Constant(v) => *v,
            Scale::Custom(f) => f(x, t),
        }
    }
}

/// Parameters of the particle system.
#[derive(Debug, Clone)]
pub struct LevyParams {
    pub alpha: f64,
    pub gamma: f64,
    pub drift: DriftSpec,
    pub sigma: Scale,
    pub kappa: f64,
    pub eta0: f64,
    pub p0: InitialDistribution,
}

impl LevyParams {
    /// Brownian (α = 2, γ = 1/2) particles with constant coefficients.
    pub fn gaussian(theta: &ModelParams, eta0: f64, p0: InitialDistribution) -> Self {
        Self {
            alpha: 2.0,
            gamma: 0.5,
            drift: DriftSpec::Constant(vec![theta.b1, theta.b2]),
            sigma: Scale::Constant(theta.sigma),
            kappa: theta.kappa,
            eta0,
            p0,
        }
    }

    pub fn d(&self) -> usize {
        self.p0.dim()
    }

    /// Constant drift and noise amplitude.
    pub fn is_homogeneous(&self) -> bool {
        matches!(self.drift, DriftSpec::None | DriftSpec::Constant(_)) && matches!(self.sigma, Scale::Constant(_))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return config(format!("alpha must lie in (0, 2], got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.kappa > 0.0 && self.eta0 > 0.0) {
            return config("gamma, kappa and eta0 must be positive");
        }
        let d = self.d();
        if !(d == 1 || d == 2) {
            return config(format!("particle dimension must be 1 or 2, got {d}"));
        }
        if let DriftSpec::Constant(b) = &self.drift {
            if b.len() != d {
                return config("drift dimension differs from the initial distribution");
            }
        }
        if let Scale::Constant(s) = self.sigma {
            if !(s >= 0.0) {
                return config("sigma must be non-negative");
            }
        }
        match &self.p0 {
            InitialDistribution::UniformDisc { radius, .. } if !(*radius > 0.0) => {
                config("disc radius must be positive")
            }
            InitialDistribution::DensityGrid(g) if g.values.iter().any(|v| !(*v >= 0.0)) || g.mass() <= 0.0 => {
                config("initial density grid must be non-negative with positive mass")
            }
            _ => Ok(()),
        }
    }
}

/// State of all particles drawn at initialisation.
///
/// `positions` holds `d` coordinates per particle; for deposited particles
/// it is the deposit position.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub d: usize,
    pub positions: Vec<f64>,
    pub alive: Vec<bool>,
    /// Pre-drawn deposition times τᵢ ~ Exp(κ²).
    pub tau: Vec<f64>,
    pub deposit_time: Vec<Option<f64>>,
    pub t: f64,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn alive_positions(&self) -> Vec<Vec<f64>> {
        (0..self.len()).filter(|&i| self.alive[i]).map(|i| self.position(i).to_vec()).collect()
    }

    /// `(deposit time, position)` of every deposited particle.
    pub fn deposits(&self) -> Vec<(f64, Vec<f64>)> {
        (0..self.len()).filter_map(|i| self.deposit_time[i].map(|t| (t, self.position(i).to_vec()))).collect()
    }

    /// Writes `id,x1,x2,t,status` (`id,x,t,status` in d = 1); `t` is the
    /// deposit time for deposited particles and the current time otherwise.
    pub fn write_csv(&self, path: &Path) -> Result<PathBuf> {
        let header: &[&str] =
            if self.d == 1 { &["id", "x", "t", "status"] } else { &["id", "x1", "x2", "t", "status"] };
        let mut w = CsvWriter::create(path, header)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string()];
            row.extend(self.position(i).iter().map(|v| fmt_f64(*v)));
            match self.deposit_time[i] {
                Some(t) => row.extend([fmt_f64(t), "deposited".into()]),
                None => row.extend([fmt_f64(self.t), "alive".into()]),
            }
            w.row(&row)?;
        }
        w.finish()
    }
}

fn sample_initial<R: Rng + ?Sized>(p0: &InitialDistribution, rng: &mut R, out: &mut [f64]) -> Result<()> {
    match p0 {
        InitialDistribution::DiracAt(p) => out.copy_from_slice(p),
        InitialDistribution::UniformDisc { center, radius } => {
            if center.len() == 1 {
                out[0] = center[0] + radius * rng.random_range(-1.0..1.0);
            } else {
                let r = radius * rng.random::<f64>().sqrt();
                let th = 2.0 * PI * rng.random::<f64>();
                out[0] = center[0] + r * th.cos();
                out[1] = center[1] + r * th.sin();
            }
        }
        InitialDistribution::DensityGrid(_) => unreachable!("grid sampling is prepared by the caller"),
    }
    Ok(())
}

/// Draws `N₀ ~ Poisson(η₀)` particles from `p₀` with deposition times `Exp(κ²)`.
pub fn init<R: Rng + ?Sized>(params: &LevyParams, rng: &mut R) -> Result<ParticleSystem> {
    params.validate()?;
    let d = params.d();
    let n0 = Poisson::new(params.eta0).map_err(|e| Error::Config(e.to_string()))?.sample(rng) as usize;
    let mut positions = vec![0.0; n0 * d];
    match &params.p0 {
        InitialDistribution::DensityGrid(g) => {
            let cells = WeightedIndex::new(&g.values).map_err(|e| Error::Config(e.to_string()))?;
            let dx = g.grid.dx();
            for p in positions.chunks_mut(d) {
                let c = g.grid.point(cells.sample(rng));
                for a in 0..d {
                    p[a] = c[a] + dx * (rng.random::<f64>() - 0.5);
                }
            }
        }
        p0 => {
            for p in positions.chunks_mut(d) {
                sample_initial(p0, rng, p)?;
            }
        }
    }
    let exp = Exp::new(params.kappa * params.kappa).map_err(|e| Error::Config(e.to_string()))?;
    let tau = (0..n0).map(|_| exp.sample(rng)).collect();
    Ok(ParticleSystem { d, positions, alive: vec![true; n0], tau, deposit_time: vec![None; n0], t: 0.0 })
}

/// Positive (α/2)-stable variable with Laplace transform `e^{−λ^{α/2}}` (Kanter's representation).
fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random_range(f64::EPSILON..1.0);
    let e: f64 = rng.sample(Exp1);
    let num = (a * u).sin().powf(a / (1.0 - a)) * ((1.0 - a) * u).sin();
    let den = u.sin().powf(1.0 / (1.0 - a));
    (num / den / e).powf((1.0 - a) / a)
}

/// Rotation-invariant α-stable increment with characteristic function
/// `exp(−dt γ ‖ξ‖^α)`, written into `out` (length d).
///
/// Sub-Gaussian construction `√S · G`: `G ~ N(0, v I)` with `v = 2 (dt γ)^{2/α}`
/// and `S` positive (α/2)-stable; `S ≡ 1` when α = 2.
pub fn stable_increment<R: Rng + ?Sized>(dt: f64, alpha: f64, gamma: f64, rng: &mut R, out: &mut [f64]) {
    let v = 2.0 * (dt * gamma).powf(2.0 / alpha);
    let s = if alpha >= 2.0 { 1.0 } else { positive_stable(alpha / 2.0, rng) };
    let amp = (v * s).sqrt();
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = amp * z;
    }
}

/// One Euler step of length `dt` for every alive particle. Particles with
/// `τ ∈ (t, t + dt]` are deposited at their pre-step position.
pub fn step_euler<R: Rng + ?Sized>(sys: &mut ParticleSystem, dt: f64, params: &LevyParams, rng: &mut R) -> Result<()> {
    if !(dt > 0.0) {
        return domain(format!("step_euler: dt must be positive, got {dt}"));
    }
    let d = sys.d;
    let t = sys.t;
    let mut b = [0.0; 2];
    let mut dl = [0.0; 2];
    for i in 0..sys.len() {
        if !sys.alive[i] {
            continue;
        }
        if sys.tau[i] <= t + dt {
            sys.alive[i] = false;
            sys.deposit_time[i] = Some(sys.tau[i]);
            continue;
        }
        let x = &mut sys.positions[i * d..(i + 1) * d];
        params.drift.eval(x, t, &mut b[..d]);
        let s = params.sigma.eval(x, t);
        stable_increment(dt, params.alpha, params.gamma, rng, &mut dl[..d]);
        for a in 0..d {
            x[a] += b[a] * dt + s * dl[a];
        }
    }
    sys.t = t + dt;
    Ok(())
}

/// Exact jump to `t_next` for Brownian particles with constant coefficients.
/// Deposited particles are placed at their exact position at τ.
pub fn exact_gaussian_transition<R: Rng + ?Sized>(
    sys: &mut ParticleSystem,
    t_next: f64,
    params: &LevyParams,
    rng: &mut R,
) -> Result<()> {
    if !params.is_homogeneous() || params.alpha != 2.0 {
        return domain("exact_gaussian_transition needs α = 2 and constant coefficients");
    }
    if !(t_next >= sys.t) {
        return domain(format!("exact_gaussian_transition: t_next {t_next} precedes current time {}", sys.t));
    }
    let d = sys.d;
    let mut b = [0.0; 2];
    params.drift.eval(&[0.0; 2][..d], sys.t, &mut b[..d]);
    let s = params.sigma.eval(&[0.0; 2][..d], sys.t);
    // σ L_t has variance 2γσ² t per coordinate
    let diff = 2.0 * params.gamma * s * s;
    for i in 0..sys.len() {
        if !sys.alive[i] {
            continue;
        }
        let end = if sys.tau[i] <= t_next {
            sys.alive[i] = false;
            sys.deposit_time[i] = Some(sys.tau[i]);
            sys.tau[i]
        } else {
            t_next
        };
        let h = end - sys.t;
        let sd = (diff * h).sqrt();
        let x = &mut sys.positions[i * d..(i + 1) * d];
        for a in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[a] += b[a] * h + sd * z;
        }
    }
    sys.t = t_next;
    Ok(())
}

/// Intensity `η₀ e^{−κ²t} (σ√(2πt))^{−d} exp(−‖x − Bt‖²/(2σ²t))` of alive
/// particles released from a Dirac mass at 0 (d = len(x) ≤ 2).
pub fn analytic_intensity(x: &[f64], t: f64, theta: &ModelParams, eta0: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("analytic_intensity: t must be positive, got {t}"));
    }
    Ok(analytic_intensity_unchecked(x, t, theta, eta0))
}

#[inline]
pub(crate) fn analytic_intensity_unchecked(x: &[f64], t: f64, theta: &ModelParams, eta0: f64) -> f64 {
    let b = [theta.b1, theta.b2];
    let s2t = theta.sigma * theta.sigma * t;
    let mut r2 = 0.0;
    for (a, xa) in x.iter().enumerate() {
        let dxa = xa - b[a] * t;
        r2 += dxa * dxa;
    }
    let d = x.len() as f64;
    eta0 * (-theta.kappa * theta.kappa * t).exp() * (2.0 * PI * s2t).powf(-d / 2.0) * (-r2 / (2.0 * s2t)).exp()
}

/// `P(a < N(μ, s²) < b)` without cancellation in either tail.
pub fn normal_interval(a: f64, b: f64, mu: f64, s: f64) -> f64 {
    use statrs::function::erf::erfc;
    let za = (a - mu) / (s * std::f64::consts::SQRT_2);
    let zb = (b - mu) / (s * std::f64::consts::SQRT_2);
    if za + zb > 0.0 {
        0.5 * (erfc(za) - erfc(zb))
    } else {
        0.5 * (erfc(-zb) - erfc(-za))
    }
}

/// `∫_A ũ(x, t) dx` for a box `A = Π [low_a, high_a]`, in closed form.
pub fn gaussian_window_mass(low: &[f64], high: &[f64], t: f64, theta: &ModelParams, eta0: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("gaussian_window_mass: t must be positive, got {t}"));
    }
    let b = [theta.b1, theta.b2];
    let s = theta.sigma * t.sqrt();
    let mut p = eta0 * (-theta.kappa * theta.kappa * t).exp();
    for a in 0..low.len() {
        p *= normal_interval(low[a], high[a], b[a] * t, s);
    }
    Ok(p)
}

/// Observed against expected deposit count in a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepositDiagnostic {
    pub observed: usize,
    /// `κ² ∫_0^t ∫_A ũ(x, s) dx ds`.
    pub expected: f64,
    /// `(observed − expected)/√expected`.
    pub z: f64,
}

/// Deposits by time `t` inside the box `[low, high)` compared with the
/// deposition rate integrated from the analytic intensity.
pub fn deposited_density_check(
    sys: &ParticleSystem,
    low: &[f64],
    high: &[f64],
    t: f64,
    theta: &ModelParams,
    eta0: f64,
) -> Result<DepositDiagnostic> {
    let observed = sys
        .deposits()
        .iter()
        .filter(|(s, x)| *s <= t && x.iter().enumerate().all(|(a, v)| *v >= low[a] && *v < high[a]))
        .count();
    let expected = if t <= 0.0 {
        0.0
    } else {
        let k2 = theta.kappa * theta.kappa;
        let q = crate::quadrature::adaptive_gk15(
            |s| if s <= 0.0 { 0.0 } else { gaussian_window_mass(low, high, s, theta, eta0).unwrap_or(f64::NAN) },
            0.0,
            t,
            1e-10 * eta0,
            1e-12,
            200,
        )
        .require(1e-6 * eta0, "deposited_density_check")?;
        k2 * q.value
    };
    let z = if expected > 0.0 { (observed as f64 - expected) / expected.sqrt() } else { observed as f64 };
    Ok(DepositDiagnostic { observed, expected, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn table2() -> ModelParams {
        ModelParams { b1: 0.3, b2: 0.5, sigma: 0.3, kappa: 1.0 / 3f64.sqrt() }
    }

    #[test]
    fn dirac_initialisation() {
        let p = LevyParams::gaussian(&table2(), 50.0, InitialDistribution::DiracAt(vec![0.0, 0.0]));
        let sys = init(&p, &mut stream(1, 0)).unwrap();
        assert!(sys.positions.iter().all(|v| *v == 0.0));
        assert_eq!(sys.alive_count(), sys.len());
    }

    #[test]
    fn disc_initialisation_stays_in_disc() {
        let p0 = InitialDistribution::UniformDisc { center: vec![1.0, -1.0], radius: 0.05 };
        let p = LevyParams::gaussian(&table2(), 500.0, p0);
        let sys = init(&p, &mut stream(2, 0)).unwrap();
        for i in 0..sys.len() {
            let x = sys.position(i);
            assert!(((x[0] - 1.0).powi(2) + (x[1] + 1.0).powi(2)).sqrt() <= 0.05);
        }
    }

    #[test]
    fn zero_coefficients_freeze_positions() {
        let theta = ModelParams { b1: 0.0, b2: 0.0, sigma: 0.0, kappa: 1e-3 };
        let p0 = InitialDistribution::UniformDisc { center: vec![0.0, 0.0], radius: 1.0 };
        let p = LevyParams::gaussian(&theta, 100.0, p0);
        let mut rng = stream(3, 0);
        let mut sys = init(&p, &mut rng).unwrap();
        let before = sys.positions.clone();
        step_euler(&mut sys, 0.1, &p, &mut rng).unwrap();
        assert_eq!(before, sys.positions);
    }

    #[test]
    fn zero_interval_transition_is_identity() {
        let p0 = InitialDistribution::UniformDisc { center: vec![0.0, 0.0], radius: 1.0 };
        let p = LevyParams::gaussian(&table2(), 100.0, p0);
        let mut rng = stream(4, 0);
        let mut sys = init(&p, &mut rng).unwrap();
        let before = sys.clone();
        exact_gaussian_transition(&mut sys, 0.0, &p, &mut rng).unwrap();
        assert_eq!(before, sys);
    }

    #[test]
    fn exact_transition_rejects_heterogeneous_params() {
        let mut p = LevyParams::gaussian(&table2(), 10.0, InitialDistribution::DiracAt(vec![0.0, 0.0]));
        p.drift = DriftSpec::Swirl;
        let mut rng = stream(5, 0);
        let mut sys = init(&p, &mut rng).unwrap();
        assert!(exact_gaussian_transition(&mut sys, 1.0, &p, &mut rng).is_err());
    }

    #[test]
    fn intensity_peak_and_domain() {
        let th = table2();
        let t = 2.0;
        let peak = analytic_intensity(&[0.6, 1.0], t, &th, 1e4).unwrap();
        let expect = 1e4 * (-t / 3.0f64).exp() / (2.0 * PI * 0.09 * t);
        assert!((peak - expect).abs() < 1e-12 * expect);
        assert!(analytic_intensity(&[0.0, 0.0], 0.0, &th, 1.0).is_err());
    }

    #[test]
    fn window_mass_tails_are_accurate() {
        assert!((normal_interval(-1e3, 1e3, 0.0, 1.0) - 1.0).abs() < 1e-15);
        let far = normal_interval(10.0, 11.0, 0.0, 1.0);
        assert!(far > 0.0 && (far - 7.619_661_958_203_076e-24).abs() < 1e-9 * far);
        assert_eq!(normal_interval(-11.0, -10.0, 0.0, 1.0), far);
    }

    #[test]
    fn no_deposits_at_time_zero() {
        let p = LevyParams::gaussian(&table2(), 100.0, InitialDistribution::DiracAt(vec![0.0, 0.0]));
        let sys = init(&p, &mut stream(6, 0)).unwrap();
        let diag = deposited_density_check(&sys, &[-1.0, -1.0], &[1.0, 1.0], 0.0, &table2(), 100.0).unwrap();
        assert_eq!(diag.observed, 0);
        assert_eq!(diag.expected, 0.0);
    }
}
