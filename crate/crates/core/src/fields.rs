//! Explicit finite-difference / spectral integrator for
//! `∂U = 𝒟[U] − div(BU) + f(U) + σ W` on a regular cell-centred grid.
//!
//! Time step: forward Euler. Noise: per-cell increment `σ √dt dx^{−d/2} Z`.
//! Stability is checked as one budget,
//! `dt · (r_dispersal + r_drift + r_reaction) ≤ 1`, with
//!
//! * second-order operators: `r = 4 d max D / dx²`;
//! * spectral fractional: `r = γ (√d π / dx)^α`;
//! * kernel convolution: `r = 2 D`;
//! * upwind drift: `r = Σ_axes max |B_a| / dx`;
//! * linear reaction: `r = 2 κ²`; bistable: `r = 2 max(Kρ, K(K − ρ)) + 2 κ²`.
//!
//! Under this budget the deterministic linear scheme is monotone, so the
//! discrete comparison principle holds exactly.

use crate::covariance::{frac_laplacian_constant, KernelSpec};
use crate::error::{config, domain, Error, Result};
use crate::quadrature::{exp_sinh, GaussLegendre};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Boundary condition of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Ghost values 0.
    Dirichlet0,
    /// Mirrored ghosts, no flux.
    Neumann0,
    Periodic,
}

/// Square lattice `[low, high]^d` with `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub d: usize,
    pub low: f64,
    pub high: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(d: usize, low: f64, high: f64, n: usize) -> Result<Self> {
        let g = Self { d, low, high, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d == 1 || self.d == 2) {
            return config(format!("grid dimension must be 1 or 2, got {}", self.d));
        }
        if self.n < 8 {
            return config(format!("grid needs at least 8 cells per axis, got {}", self.n));
        }
        if !(self.high > self.low) || !self.low.is_finite() || !self.high.is_finite() {
            return config(format!("grid extent [{}, {}] is empty", self.low, self.high));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.high - self.low) / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    /// Coordinate of cell centre `i` along any axis.
    pub fn center(&self, i: usize) -> f64 {
        self.low + (i as f64 + 0.5) * self.dx()
    }

    /// Cell-centre coordinates of flat index `idx` (unused axes are 0).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.d {
            1 => [self.center(idx), 0.0],
            _ => [self.center(idx / self.n), self.center(idx % self.n)],
        }
    }
}

/// Field values on a grid at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GridField {
    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()], time: 0.0 }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..grid.d])).collect();
        Self { grid, values, time: 0.0 }
    }

    /// `Σ U dx^d`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

type ScalarFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

/// Spatially (and possibly temporally) varying diffusivity.
#[derive(Clone)]
pub enum Diffusivity {
    Constant(f64),
    /// `D₀ + D₁ (1 − e^{−‖x‖²/(2σ_D²)})`.
    GaussianDip {
        d0: f64,
        d1: f64,
        sigma_d: f64,
    },
    Custom(ScalarFn),
}

impl fmt::Debug for Diffusivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusivity::Constant(v) => write!(f, "Constant({v})"),
            Diffusivity::GaussianDip { d0, d1, sigma_d } => {
                write!(f, "GaussianDip {{ d0: {d0}, d1: {d1}, sigma_d: {sigma_d} }}")
            }
            Diffusivity::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Diffusivity {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Diffusivity::Constant(v) => *v,
            Diffusivity::GaussianDip { d0, d1, sigma_d } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                d0 + d1 * (1.0 - (-r2 / (2.0 * sigma_d * sigma_d)).exp())
            }
            Diffusivity::Custom(f) => f(x, t),
        }
    }

    fn is_static(&self) -> bool {
        !matches!(self, Diffusivity::Custom(_))
    }
}

/// Dispersal operator.
#[derive(Debug, Clone)]
pub enum OperatorSpec {
    /// `D ΔU`.
    Laplacian { diffusivity: f64 },
    /// `Δ(D U)`.
    FokkerPlanck(Diffusivity),
    /// `div(D ∇U)`.
    Fickian(Diffusivity),
    /// `−γ (−Δ)^{α/2} U`, periodic grids only.
    FractionalSpectral { alpha: f64, gamma: f64 },
    /// `D (J ⋆ U − U)`.
    KernelConvolution { dispersal: f64, kernel: KernelSpec },
}

/// Reaction term f(U).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ReactionSpec {
    None,
    /// `−κ² U`.
    Linear {
        kappa2: f64,
    },
    /// `U (K − U)(U − ρ) − κ² U`.
    Bistable {
        k: f64,
        rho: f64,
        kappa2: f64,
    },
}

impl ReactionSpec {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            ReactionSpec::None => 0.0,
            ReactionSpec::Linear { kappa2 } => -kappa2 * u,
            ReactionSpec::Bistable { k, rho, kappa2 } => u * (k - u) * (u - rho) - kappa2 * u,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ReactionSpec::Linear { kappa2 } if !(kappa2 >= 0.0) => config("linear reaction needs kappa2 ≥ 0"),
            ReactionSpec::Bistable { k, rho, kappa2 } if !(k > 0.0 && rho > 0.0 && rho < k && kappa2 >= 0.0) => {
                config(format!("bistable reaction needs K > 0, 0 < rho < K, kappa2 ≥ 0 (K={k}, rho={rho})"))
            }
            _ => Ok(()),
        }
    }

    fn rate(&self) -> f64 {
        match *self {
            ReactionSpec::None => 0.0,
            ReactionSpec::Linear { kappa2 } => 2.0 * kappa2,
            ReactionSpec::Bistable { k, rho, kappa2 } => 2.0 * (k * rho).max(k * (k - rho)) + 2.0 * kappa2,
        }
    }
}

/// Drift field B(x, t).
#[derive(Clone, Default)]
pub enum DriftSpec {
    #[default]
    None,
    Constant(Vec<f64>),
    /// Rotating wind in d = 2:
    /// `B₁ = 2x₂ cos(2πt/10)/√(0.1 + ‖x‖²)`, `B₂ = 2x₁ sin(2πt/10)/√(0.1 + ‖x‖²)`.
    Swirl,
    Custom(VectorFn),
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftSpec::None => write!(f, "None"),
            DriftSpec::Constant(b) => write!(f, "Constant({b:?})"),
            DriftSpec::Swirl => write!(f, "Swirl"),
            DriftSpec::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl DriftSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, DriftSpec::None)
    }

    /// Writes B(x, t) into `out`.
    pub fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match self {
            DriftSpec::None => out.iter_mut().for_each(|v| *v = 0.0),
            DriftSpec::Constant(b) => out.copy_from_slice(&b[..out.len()]),
            DriftSpec::Swirl => {
                let w = 2.0 * PI * t / 10.0;
                swirl(x, w.cos(), w.sin(), out)
            }
            DriftSpec::Custom(f) => f(x, t, out),
        }
    }
}

#[inline]
fn swirl(x: &[f64], c: f64, s: f64, out: &mut [f64]) {
    let den = (0.1 + x[0] * x[0] + x[1] * x[1]).sqrt();
    out[0] = 2.0 * x[1] * c / den;
    out[1] = 2.0 * x[0] * s / den;
}

/// Full simulation setup.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Grid,
    pub operator: Option<OperatorSpec>,
    pub reaction: ReactionSpec,
    pub drift: DriftSpec,
    pub sigma_noise: f64,
    pub bc: Boundary,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
}

fn sample_times(t_end: f64) -> impl Iterator<Item = f64> {
    (0..=16).map(move |k| t_end * k as f64 / 16.0)
}

impl SimConfig {
    /// Largest dt satisfying the stability budget.
    pub fn max_stable_dt(&self) -> Result<f64> {
        self.grid.validate()?;
        let dx = self.grid.dx();
        let d = self.grid.d as f64;
        let mut rate = self.reaction.rate();
        if let Some(op) = &self.operator {
            rate += match op {
                OperatorSpec::Laplacian { diffusivity } => 4.0 * d * diffusivity / (dx * dx),
                OperatorSpec::FokkerPlanck(df) | OperatorSpec::Fickian(df) => {
                    let mut maxd: f64 = 0.0;
                    for t in sample_times(self.t_end) {
                        for i in 0..self.grid.len() {
                            maxd = maxd.max(df.eval(&self.grid.point(i)[..self.grid.d], t));
                        }
                        if df.is_static() {
                            break;
                        }
                    }
                    4.0 * d * maxd / (dx * dx)
                }
                OperatorSpec::FractionalSpectral { alpha, gamma } => gamma * (d.sqrt() * PI / dx).powf(*alpha),
                OperatorSpec::KernelConvolution { dispersal, .. } => 2.0 * dispersal,
            };
        }
        if !self.drift.is_none() {
            let mut b = [0.0; 2];
            let mut maxb = [0.0f64; 2];
            for t in sample_times(self.t_end) {
                for i in 0..self.grid.len() {
                    self.drift.eval(&self.grid.point(i)[..self.grid.d], t, &mut b[..self.grid.d]);
                    for a in 0..self.grid.d {
                        maxb[a] = maxb[a].max(b[a].abs());
                    }
                }
            }
            rate += maxb.iter().sum::<f64>() / dx;
        }
        Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.reaction.validate()?;
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return config("dt and t_end must be positive");
        }
        if !(self.sigma_noise >= 0.0) {
            return config("sigma_noise must be non-negative");
        }
        for &s in &self.snapshot_times {
            if !(0.0..=self.t_end * (1.0 + 1e-12)).contains(&s) {
                return config(format!("snapshot time {s} outside [0, {}]", self.t_end));
            }
        }
        if let DriftSpec::Constant(b) = &self.drift {
            if b.len() != self.grid.d {
                return config("constant drift has the wrong dimension");
            }
        }
        if matches!(self.drift, DriftSpec::Swirl) && self.grid.d != 2 {
            return config("swirl drift is defined in d = 2 only");
        }
        match &self.operator {
            Some(OperatorSpec::FractionalSpectral { alpha, gamma }) => {
                if self.bc != Boundary::Periodic {
                    return config("FractionalSpectral requires Periodic boundaries");
                }
                if !(*alpha > 0.0 && *alpha <= 2.0 && *gamma > 0.0) {
                    return config("FractionalSpectral needs alpha in (0,2] and gamma > 0");
                }
            }
            Some(OperatorSpec::KernelConvolution { dispersal, kernel }) => {
                if !(*dispersal > 0.0) {
                    return config("kernel dispersal rate must be positive");
                }
                kernel.validate()?;
                if !kernel.is_normalizable() {
                    return config("power-law kernel cannot be discretized; use FractionalSpectral");
                }
            }
            Some(OperatorSpec::Laplacian { diffusivity }) if !(*diffusivity > 0.0) => {
                return config("Laplacian diffusivity must be positive");
            }
            _ => {}
        }
        let max_dt = self.max_stable_dt()?;
        if self.dt > max_dt * (1.0 + 1e-12) {
            return config(format!("dt = {} exceeds the stability bound {max_dt}", self.dt));
        }
        Ok(())
    }
}

/// Index of the neighbour of `i` along an axis of length `n`, or `None` for a ghost.
#[inline]
fn neighbor(i: usize, n: usize, forward: bool, bc: Boundary) -> Option<usize> {
    if forward {
        if i + 1 < n {
            Some(i + 1)
        } else if bc == Boundary::Periodic {
            Some(0)
        } else {
            None
        }
    } else if i > 0 {
        Some(i - 1)
    } else if bc == Boundary::Periodic {
        Some(n - 1)
    } else {
        None
    }
}

/// Calls `f(cell, neighbour or None)` for both neighbours of every cell along every axis.
#[inline]
fn for_each_link(grid: &Grid, bc: Boundary, mut f: impl FnMut(usize, Option<usize>)) {
    let n = grid.n;
    match grid.d {
        1 => {
            for i in 0..n {
                f(i, neighbor(i, n, false, bc));
                f(i, neighbor(i, n, true, bc));
            }
        }
        _ => {
            for i0 in 0..n {
                for i1 in 0..n {
                    let c = i0 * n + i1;
                    f(c, neighbor(i0, n, false, bc).map(|j| j * n + i1));
                    f(c, neighbor(i0, n, true, bc).map(|j| j * n + i1));
                    f(c, neighbor(i1, n, false, bc).map(|j| i0 * n + j));
                    f(c, neighbor(i1, n, true, bc).map(|j| i0 * n + j));
                }
            }
        }
    }
}

/// Second difference `Σ_links (w_nb − w_c) / dx²` with ghost rule of `bc`.
fn second_difference(grid: &Grid, bc: Boundary, w: &[f64], out: &mut [f64]) {
    let inv = 1.0 / (grid.dx() * grid.dx());
    out.iter_mut().for_each(|v| *v = 0.0);
    for_each_link(grid, bc, |c, nb| {
        let wn = match nb {
            Some(j) => w[j],
            None if bc == Boundary::Dirichlet0 => 0.0,
            None => w[c],
        };
        out[c] += (wn - w[c]) * inv;
    });
}

/// Separable complex FFT on an `m^d` lattice.
struct FftNd {
    m: usize,
    d: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    column: Vec<Complex<f64>>,
}

impl FftNd {
    fn new(m: usize, d: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            d,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            column: vec![Complex::default(); m],
        }
    }

    fn run(&mut self, data: &mut [Complex<f64>], forward: bool) {
        let plan = if forward { self.fwd.clone() } else { self.inv.clone() };
        let m = self.m;
        for row in data.chunks_mut(m) {
            plan.process(row);
        }
        if self.d == 2 {
            for j in 0..m {
                for i in 0..m {
                    self.column[i] = data[i * m + j];
                }
                plan.process(&mut self.column);
                for i in 0..m {
                    data[i * m + j] = self.column[i];
                }
            }
        }
        if !forward {
            let s = 1.0 / (m.pow(self.d as u32) as f64);
            data.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Signed frequency index of DFT bin `j` on `m` points.
fn signed_bin(j: usize, m: usize) -> f64 {
    if j <= m / 2 {
        j as f64
    } else {
        j as f64 - m as f64
    }
}

struct DiffCache {
    spec: Diffusivity,
    values: Vec<f64>,
    time: f64,
}

impl DiffCache {
    fn new(spec: Diffusivity, grid: &Grid) -> Self {
        let mut c = Self { spec, values: vec![0.0; grid.len()], time: f64::NAN };
        c.refresh(grid, 0.0);
        c
    }

    fn refresh(&mut self, grid: &Grid, t: f64) {
        if self.time == t || (self.spec.is_static() && !self.time.is_nan()) {
            return;
        }
        for (i, v) in self.values.iter_mut().enumerate() {
            *v = self.spec.eval(&grid.point(i)[..grid.d], t);
        }
        self.time = t;
    }
}

enum Prepared {
    Laplacian(f64),
    FokkerPlanck(DiffCache),
    Fickian(DiffCache),
    Spectral { fft: FftNd, multiplier: Vec<f64>, buf: Vec<Complex<f64>> },
    Kernel { fft: FftNd, hat: Vec<f64>, dispersal: f64, buf: Vec<Complex<f64>> },
}

/// A dispersal operator bound to a grid and boundary condition.
pub struct PreparedOperator {
    grid: Grid,
    bc: Boundary,
    kind: Prepared,
    scratch: Vec<f64>,
}

impl PreparedOperator {
    pub fn new(op: &OperatorSpec, grid: &Grid, bc: Boundary) -> Result<Self> {
        grid.validate()?;
        let n = grid.n;
        let d = grid.d;
        let kind = match op {
            OperatorSpec::Laplacian { diffusivity } => Prepared::Laplacian(*diffusivity),
            OperatorSpec::FokkerPlanck(df) => Prepared::FokkerPlanck(DiffCache::new(df.clone(), grid)),
            OperatorSpec::Fickian(df) => Prepared::Fickian(DiffCache::new(df.clone(), grid)),
            OperatorSpec::FractionalSpectral { alpha, gamma } => {
                if bc != Boundary::Periodic {
                    return config("FractionalSpectral requires Periodic boundaries");
                }
                let k0 = 2.0 * PI / (n as f64 * grid.dx());
                let multiplier = (0..grid.len())
                    .map(|idx| {
                        let r2 = if d == 1 {
                            signed_bin(idx, n).powi(2)
                        } else {
                            signed_bin(idx / n, n).powi(2) + signed_bin(idx % n, n).powi(2)
                        };
                        -gamma * (k0 * k0 * r2).powf(alpha / 2.0)
                    })
                    .collect();
                Prepared::Spectral { fft: FftNd::new(n, d), multiplier, buf: vec![Complex::default(); grid.len()] }
            }
            OperatorSpec::KernelConvolution { dispersal, kernel } => {
                if !kernel.is_normalizable() {
                    return config("power-law kernel cannot be discretized; use FractionalSpectral");
                }
                let m = if bc == Boundary::Periodic { n } else { 2 * n };
                let dx = grid.dx();
                let total = m.pow(d as u32);
                let mut w = Vec::with_capacity(total);
                for idx in 0..total {
                    let r2 = if d == 1 {
                        signed_bin(idx, m).powi(2)
                    } else {
                        signed_bin(idx / m, m).powi(2) + signed_bin(idx % m, m).powi(2)
                    };
                    let r = r2.sqrt() * dx;
                    // singular centre: sample a quarter cell away
                    let v = match kernel.density(r, d) {
                        Ok(v) if v.is_finite() => v,
                        _ => kernel.density(0.25 * dx, d)?,
                    };
                    w.push(v);
                }
                let s: f64 = w.iter().sum();
                let mut fft = FftNd::new(m, d);
                let mut buf: Vec<Complex<f64>> = w.iter().map(|v| Complex::new(v / s, 0.0)).collect();
                fft.run(&mut buf, true);
                let hat = buf.iter().map(|c| c.re).collect();
                Prepared::Kernel { fft, hat, dispersal: *dispersal, buf }
            }
        };
        Ok(Self { grid: *grid, bc, kind, scratch: vec![0.0; grid.len()] })
    }

    /// Writes the dispersal term at time `t` into `out`.
    pub fn apply(&mut self, u: &[f64], t: f64, out: &mut [f64]) {
        let grid = self.grid;
        let bc = self.bc;
        match &mut self.kind {
            Prepared::Laplacian(dcoef) => {
                second_difference(&grid, bc, u, out);
                out.iter_mut().for_each(|v| *v *= *dcoef);
            }
            Prepared::FokkerPlanck(cache) => {
                cache.refresh(&grid, t);
                for ((w, &ui), &di) in self.scratch.iter_mut().zip(u).zip(&cache.values) {
                    *w = di * ui;
                }
                second_difference(&grid, bc, &self.scratch, out);
            }
            Prepared::Fickian(cache) => {
                cache.refresh(&grid, t);
                let dv = &cache.values;
                let inv = 1.0 / (grid.dx() * grid.dx());
                out.iter_mut().for_each(|v| *v = 0.0);
                for_each_link(&grid, bc, |c, nb| match nb {
                    Some(j) => {
                        let h = 2.0 * dv[c] * dv[j] / (dv[c] + dv[j]);
                        out[c] += h * (u[j] - u[c]) * inv;
                    }
                    None if bc == Boundary::Dirichlet0 => out[c] -= dv[c] * u[c] * inv,
                    None => {}
                });
            }
            Prepared::Spectral { fft, multiplier, buf } => {
                for (b, &v) in buf.iter_mut().zip(u) {
                    *b = Complex::new(v, 0.0);
                }
                fft.run(buf, true);
                for (b, &m) in buf.iter_mut().zip(multiplier.iter()) {
                    *b *= m;
                }
                fft.run(buf, false);
                for (o, b) in out.iter_mut().zip(buf.iter()) {
                    *o = b.re;
                }
            }
            Prepared::Kernel { fft, hat, dispersal, buf } => {
                let n = grid.n;
                let m = fft.m;
                // extension: periodic (m = n), zero padding (Dirichlet) or even reflection (Neumann)
                let ext = |j: usize| -> Option<usize> {
                    if j < n {
                        Some(j)
                    } else if bc == Boundary::Neumann0 {
                        Some(2 * n - 1 - j)
                    } else {
                        None
                    }
                };
                if grid.d == 1 {
                    for j in 0..m {
                        buf[j] = Complex::new(ext(j).map_or(0.0, |s| u[s]), 0.0);
                    }
                } else {
                    for j0 in 0..m {
                        for j1 in 0..m {
                            let v = match (ext(j0), ext(j1)) {
                                (Some(a), Some(b)) => u[a * n + b],
                                _ => 0.0,
                            };
                            buf[j0 * m + j1] = Complex::new(v, 0.0);
                        }
                    }
                }
                fft.run(buf, true);
                for (b, &h) in buf.iter_mut().zip(hat.iter()) {
                    *b *= h;
                }
                fft.run(buf, false);
                if grid.d == 1 {
                    for i in 0..n {
                        out[i] = *dispersal * (buf[i].re - u[i]);
                    }
                } else {
                    for i0 in 0..n {
                        for i1 in 0..n {
                            let c = i0 * n + i1;
                            out[c] = *dispersal * (buf[i0 * m + i1].re - u[c]);
                        }
                    }
                }
            }
        }
    }
}

/// Upwind `−div(B U)` at time `t`, accumulated into `out`.
fn add_drift(grid: &Grid, bc: Boundary, drift: &DriftSpec, t: f64, u: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let dx = grid.dx();
    let d = grid.d;
    let (cw, sw) = {
        let w = 2.0 * PI * t / 10.0;
        (w.cos(), w.sin())
    };
    let mut b = [0.0; 2];
    let mut eval = |x: &[f64], b: &mut [f64]| match drift {
        DriftSpec::Swirl => swirl(x, cw, sw, b),
        other => other.eval(x, t, b),
    };
    // face f along an axis lies between cells f − 1 and f; faces 0 and n are boundary faces
    for axis in 0..d {
        let lines = if d == 1 { 1 } else { n };
        for line in 0..lines {
            let cell = |i: usize| -> usize {
                match (d, axis) {
                    (1, _) => i,
                    (_, 0) => i * n + line,
                    _ => line * n + i,
                }
            };
            let mut x = [0.0; 2];
            if d == 2 {
                x[1 - axis] = grid.center(line);
            }
            let flux_at = |f: usize, eval: &mut dyn FnMut(&[f64], &mut [f64]), b: &mut [f64; 2], x: &mut [f64; 2]| {
                x[axis] = grid.low + f as f64 * dx;
                eval(&x[..d], &mut b[..d]);
                let ba = b[axis];
                let left = if f > 0 {
                    Some(u[cell(f - 1)])
                } else {
                    match bc {
                        Boundary::Periodic => Some(u[cell(n - 1)]),
                        Boundary::Dirichlet0 => Some(0.0),
                        Boundary::Neumann0 => None,
                    }
                };
                let right = if f < n {
                    Some(u[cell(f)])
                } else {
                    match bc {
                        Boundary::Periodic => Some(u[cell(0)]),
                        Boundary::Dirichlet0 => Some(0.0),
                        Boundary::Neumann0 => None,
                    }
                };
                match (left, right) {
                    (Some(l), Some(r)) => ba.max(0.0) * l + ba.min(0.0) * r,
                    _ => 0.0,
                }
            };
            let mut prev = flux_at(0, &mut eval, &mut b, &mut x);
            for f in 1..=n {
                let next = flux_at(f, &mut eval, &mut b, &mut x);
                out[cell(f - 1)] -= (next - prev) / dx;
                prev = next;
            }
        }
    }
}

/// Dispersal term of `op` applied to `field`.
pub fn apply_dispersal(field: &GridField, op: &OperatorSpec, bc: Boundary) -> Result<GridField> {
    let mut p = PreparedOperator::new(op, &field.grid, bc)?;
    let mut out = vec![0.0; field.values.len()];
    p.apply(&field.values, field.time, &mut out);
    Ok(GridField { grid: field.grid, values: out, time: field.time })
}

/// Upwind drift term `−div(B U)` of `field` at time `t`.
pub fn apply_drift(field: &GridField, drift: &DriftSpec, bc: Boundary, t: f64) -> Result<GridField> {
    let mut out = vec![0.0; field.values.len()];
    if let DriftSpec::Constant(b) = drift {
        if b.len() != field.grid.d {
            return config("constant drift has the wrong dimension");
        }
    }
    add_drift(&field.grid, bc, drift, t, &field.values, &mut out);
    Ok(GridField { grid: field.grid, values: out, time: t })
}

/// Reusable Euler stepper for one configuration.
pub struct Stepper {
    cfg: SimConfig,
    op: Option<PreparedOperator>,
    rhs: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let op = cfg.operator.as_ref().map(|o| PreparedOperator::new(o, &cfg.grid, cfg.bc)).transpose()?;
        let len = cfg.grid.len();
        Ok(Self { cfg: cfg.clone(), op, rhs: vec![0.0; len], tmp: vec![0.0; len] })
    }

    /// One Euler step of length `cfg.dt`; `field.time` advances.
    pub fn step<R: Rng + ?Sized>(&mut self, field: &mut GridField, rng: &mut R) -> Result<()> {
        let cfg = &self.cfg;
        let t = field.time;
        let dt = cfg.dt;
        let u = &mut field.values;
        match &mut self.op {
            Some(op) => op.apply(u, t, &mut self.rhs),
            None => self.rhs.iter_mut().for_each(|v| *v = 0.0),
        }
        if !cfg.drift.is_none() {
            self.tmp.iter_mut().for_each(|v| *v = 0.0);
            add_drift(&cfg.grid, cfg.bc, &cfg.drift, t, u, &mut self.tmp);
            for (r, v) in self.rhs.iter_mut().zip(&self.tmp) {
                *r += v;
            }
        }
        let reaction = cfg.reaction;
        for (ui, r) in u.iter_mut().zip(&self.rhs) {
            *ui += dt * (r + reaction.eval(*ui));
        }
        if cfg.sigma_noise > 0.0 {
            let amp = cfg.sigma_noise * dt.sqrt() * cfg.grid.dx().powf(-(cfg.grid.d as f64) / 2.0);
            for ui in u.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *ui += amp * z;
            }
        }
        field.time = t + dt;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: field.time });
        }
        Ok(())
    }
}

/// One Euler step (prepares the operator on every call; use [`Stepper`] in loops).
pub fn step<R: Rng + ?Sized>(field: &GridField, cfg: &SimConfig, rng: &mut R) -> Result<GridField> {
    let mut s = Stepper::new(cfg)?;
    let mut f = field.clone();
    s.step(&mut f, rng)?;
    Ok(f)
}

/// Runs from `initial` (at time 0) to `cfg.t_end`, returning the fields at
/// the step nearest to each snapshot time. Deterministic in `(cfg, initial)`.
pub fn simulate(cfg: &SimConfig, initial: &GridField) -> Result<Vec<GridField>> {
    use rand::SeedableRng;
    if initial.grid != cfg.grid {
        return config("initial field grid differs from the configured grid");
    }
    let mut stepper = Stepper::new(cfg)?;
    let mut rng = crate::rng::ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut targets: Vec<(usize, usize)> =
        cfg.snapshot_times.iter().enumerate().map(|(i, &s)| (((s / cfg.dt).round() as usize).min(steps), i)).collect();
    targets.sort();
    let mut out: Vec<Option<GridField>> = vec![None; cfg.snapshot_times.len()];
    let mut field = initial.clone();
    field.time = 0.0;
    let mut next = 0;
    for k in 0..=steps {
        while next < targets.len() && targets[next].0 == k {
            let mut snap = field.clone();
            snap.time = k as f64 * cfg.dt;
            out[targets[next].1] = Some(snap);
            next += 1;
        }
        if k == steps {
            break;
        }
        stepper.step(&mut field, &mut rng)?;
        // avoid drift of the accumulated time
        field.time = (k + 1) as f64 * cfg.dt;
    }
    Ok(out.into_iter().map(|f| f.expect("every snapshot index is reached")).collect())
}

/// Deterministic long-time limit of a mass-conserving setup.
///
/// Integrates with `cfg.dt` until `max|ΔU| / (max|U| dt) < 1e-10` or
/// `max_time` is reached (error). Requires σ = 0, no drift, Neumann0 and no
/// absorption.
pub fn steady_state_deterministic(cfg: &SimConfig, initial: &GridField, max_time: f64) -> Result<GridField> {
    if cfg.sigma_noise != 0.0 || !cfg.drift.is_none() || cfg.bc != Boundary::Neumann0 {
        return config("steady state needs sigma = 0, no drift and Neumann0 boundaries");
    }
    if !matches!(cfg.reaction, ReactionSpec::None | ReactionSpec::Linear { kappa2: 0.0 }) {
        return config("steady state needs a mass-conserving setup (no reaction)");
    }
    if !(initial.mass() > 0.0) {
        return config("steady state needs positive initial mass");
    }
    let mut stepper = Stepper::new(cfg)?;
    let mut rng = crate::rng::stream(cfg.seed, 0);
    let mut field = initial.clone();
    let max_steps = (max_time / cfg.dt).ceil() as usize;
    let mut prev = field.values.clone();
    for _ in 0..max_steps {
        stepper.step(&mut field, &mut rng)?;
        let scale = field.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = field.values.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change / (scale * cfg.dt) < 1e-10 {
            return Ok(field);
        }
        prev.copy_from_slice(&field.values);
    }
    Err(Error::NonConvergence(format!("no steady state within t = {max_time}")))
}

/// Pointwise fractional Laplacian `−(−Δ)^{α/2} v(x)` for d ∈ {1, 2} by the
/// singular-integral representation with constant `c_{d,α}`.
///
/// The radial integral is split at `s_c = 1e−2` (where `I(s)/s²` is fitted
/// by `a + b s²` from two samples to avoid cancellation), Gauss–Legendre on
/// geometric panels up to 1, and exp–sinh beyond. Assumes `v` varies on unit
/// length scales.
pub fn frac_laplacian_pointwise(v: &dyn Fn(&[f64]) -> f64, x: &[f64], alpha: f64, tol: f64) -> Result<f64> {
    let d = x.len();
    if !(d == 1 || d == 2) {
        return domain("frac_laplacian_pointwise supports d = 1, 2");
    }
    let c = frac_laplacian_constant(d, alpha)?;
    let vx = v(x);
    let gl_angle = GaussLegendre::new(48);
    // I(s) = Σ over directions of v(x + sθ) + v(x − sθ) − 2 v(x)
    let ring = |s: f64| -> f64 {
        if d == 1 {
            v(&[x[0] + s]) + v(&[x[0] - s]) - 2.0 * vx
        } else {
            gl_angle.integrate(
                |th| {
                    let (sn, cs) = th.sin_cos();
                    v(&[x[0] + s * cs, x[1] + s * sn]) + v(&[x[0] - s * cs, x[1] - s * sn]) - 2.0 * vx
                },
                0.0,
                PI,
            )
        }
    };
    let sc = 1e-2;
    let g1 = ring(sc) / (sc * sc);
    let g2 = ring(0.5 * sc) / (0.25 * sc * sc);
    let b = (g1 - g2) / (0.75 * sc * sc);
    let a = g2 - b * 0.25 * sc * sc;
    let small = a * sc.powf(2.0 - alpha) / (2.0 - alpha) + b * sc.powf(4.0 - alpha) / (4.0 - alpha);
    let gl = GaussLegendre::new(24);
    let mut mid = 0.0;
    let mut lo = sc;
    while lo < 1.0 {
        let hi = (2.0 * lo).min(1.0);
        mid += gl.integrate(|s| ring(s) * s.powf(-1.0 - alpha), lo, hi);
        lo = hi;
    }
    let tail = exp_sinh(|s| ring(s) * s.powf(-1.0 - alpha), 1.0, tol * 1e-2, 1e-12);
    if !tail.value.is_finite() || tail.abs_error > tol {
        return Err(Error::Quadrature {
            estimate: tail.abs_error,
            tolerance: tol,
            context: "frac_laplacian_pointwise tail".into(),
        });
    }
    Ok(c * (small + mid + tail.value))
}

/// Fractions of cell values in `(−∞, k/3]`, `(k/3, 2k/3)` and `[2k/3, ∞)`.
pub fn third_fractions(field: &GridField, k: f64) -> [f64; 3] {
    let mut c = [0usize; 3];
    for &v in &field.values {
        let slot = if v <= k / 3.0 {
            0
        } else if v < 2.0 * k / 3.0 {
            1
        } else {
            2
        };
        c[slot] += 1;
    }
    let n = field.values.len() as f64;
    c.map(|x| x as f64 / n)
}

/// Configured runs behind the CLI presets.
pub mod presets {
    use super::*;

    /// Rotating-drift advection–diffusion with absorption (D = 0.05, κ = 0.1,
    /// σ = 1, T = 6) on `[−5, 5]²`, δx = 0.05, Dirichlet0, U(·,0) = 0.
    pub fn fig2(seed: u64, with_drift: bool) -> Result<(SimConfig, GridField)> {
        let grid = Grid::new(2, -5.0, 5.0, 200)?;
        let mut cfg = SimConfig {
            grid,
            operator: Some(OperatorSpec::Laplacian { diffusivity: 0.05 }),
            reaction: ReactionSpec::Linear { kappa2: 0.01 },
            drift: if with_drift { DriftSpec::Swirl } else { DriftSpec::None },
            sigma_noise: 1.0,
            bc: Boundary::Dirichlet0,
            dt: 1.0,
            t_end: 6.0,
            snapshot_times: vec![6.0],
            seed,
        };
        cfg.dt = largest_dividing_dt(&cfg)?;
        Ok((cfg, GridField::constant(grid, 0.0)))
    }

    /// Stochastic Allen–Cahn (K = 2, ρ = K/2, σ = 1, T = 10) on `[−5, 5]²`,
    /// δx = 0.05, Neumann0, U(·,0) = K/2, diffusivity `d`.
    pub fn fig4(seed: u64, d: f64) -> Result<(SimConfig, GridField)> {
        let grid = Grid::new(2, -5.0, 5.0, 200)?;
        let k = 2.0;
        let mut cfg = SimConfig {
            grid,
            operator: Some(OperatorSpec::Laplacian { diffusivity: d }),
            reaction: ReactionSpec::Bistable { k, rho: k / 2.0, kappa2: 0.0 },
            drift: DriftSpec::None,
            sigma_noise: 1.0,
            bc: Boundary::Neumann0,
            dt: 1.0,
            t_end: 10.0,
            snapshot_times: vec![10.0],
            seed,
        };
        cfg.dt = largest_dividing_dt(&cfg)?;
        Ok((cfg, GridField::constant(grid, k / 2.0)))
    }

    /// Diffusivity of the Fokker–Planck / Fickian comparison.
    pub fn b6_diffusivity() -> Diffusivity {
        Diffusivity::GaussianDip { d0: 1e-3, d1: 1e-1, sigma_d: 0.25 }
    }

    /// Heterogeneous diffusion with absorption (κ = 0.1, σ = 1, T = 10) on
    /// `[−1, 1]²`, δx = 0.05, Neumann0, U(·,0) = 0.
    pub fn fig_b6(seed: u64, fokker_planck: bool) -> Result<(SimConfig, GridField)> {
        let grid = Grid::new(2, -1.0, 1.0, 40)?;
        let df = b6_diffusivity();
        let mut cfg = SimConfig {
            grid,
            operator: Some(if fokker_planck { OperatorSpec::FokkerPlanck(df) } else { OperatorSpec::Fickian(df) }),
            reaction: ReactionSpec::Linear { kappa2: 0.01 },
            drift: DriftSpec::None,
            sigma_noise: 1.0,
            bc: Boundary::Neumann0,
            dt: 1.0,
            t_end: 10.0,
            snapshot_times: vec![10.0],
            seed,
        };
        cfg.dt = largest_dividing_dt(&cfg)?;
        Ok((cfg, GridField::constant(grid, 0.0)))
    }

    /// Largest stable dt that divides `t_end` and every snapshot time into whole steps.
    pub fn largest_dividing_dt(cfg: &SimConfig) -> Result<f64> {
        let max = cfg.max_stable_dt()?;
        let steps = (cfg.t_end / max).ceil().max(1.0);
        Ok(cfg.t_end / steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn periodic_cfg(grid: Grid, op: OperatorSpec, bc: Boundary) -> SimConfig {
        let mut cfg = SimConfig {
            grid,
            operator: Some(op),
            reaction: ReactionSpec::None,
            drift: DriftSpec::None,
            sigma_noise: 0.0,
            bc,
            dt: 1.0,
            t_end: 1.0,
            snapshot_times: vec![],
            seed: 1,
        };
        cfg.dt = cfg.max_stable_dt().unwrap();
        cfg
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(2, -1.0, 1.0, 8).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.point(9), [-0.625, -0.625]);
        assert!(Grid::new(2, 0.0, 1.0, 4).is_err());
        assert!(Grid::new(3, 0.0, 1.0, 8).is_err());
    }

    #[test]
    fn constants_are_fixed_points_of_dispersal() {
        let g2 = Grid::new(2, -2.0, 2.0, 16).unwrap();
        let f = GridField::constant(g2, 3.0);
        let ops = [
            OperatorSpec::Laplacian { diffusivity: 0.5 },
            OperatorSpec::FokkerPlanck(Diffusivity::Constant(0.3)),
            OperatorSpec::Fickian(Diffusivity::GaussianDip { d0: 0.1, d1: 1.0, sigma_d: 0.5 }),
            OperatorSpec::KernelConvolution { dispersal: 1.0, kernel: KernelSpec::Exponential { beta: 0.4 } },
        ];
        for bc in [Boundary::Neumann0, Boundary::Periodic] {
            for op in &ops {
                let out = apply_dispersal(&f, op, bc).unwrap();
                assert!(out.values.iter().all(|v| v.abs() < 1e-12), "{op:?} {bc:?}");
            }
        }
        let out = apply_dispersal(&f, &OperatorSpec::FractionalSpectral { alpha: 0.7, gamma: 1.0 }, Boundary::Periodic)
            .unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1e-12));
        assert!(apply_dispersal(&f, &OperatorSpec::FractionalSpectral { alpha: 0.7, gamma: 1.0 }, Boundary::Neumann0)
            .is_err());
    }

    #[test]
    fn spectral_eigenfunction() {
        let g = Grid::new(2, 0.0, 2.0 * PI, 32).unwrap();
        let f = GridField::from_fn(g, |x| (2.0 * x[0] + 3.0 * x[1]).cos());
        let (alpha, gamma) = (1.3, 0.7);
        let out = apply_dispersal(&f, &OperatorSpec::FractionalSpectral { alpha, gamma }, Boundary::Periodic).unwrap();
        let lam = -gamma * 13f64.powf(alpha / 2.0);
        for (o, v) in out.values.iter().zip(&f.values) {
            assert!((o - lam * v).abs() < 1e-11);
        }
    }

    #[test]
    fn spectral_alpha_two_matches_stencil() {
        let mut errs = vec![];
        for &n in &[32usize, 64] {
            let g = Grid::new(1, 0.0, 2.0 * PI, n).unwrap();
            let f = GridField::from_fn(g, |x| (x[0].sin()).exp());
            let a =
                apply_dispersal(&f, &OperatorSpec::FractionalSpectral { alpha: 2.0, gamma: 1.0 }, Boundary::Periodic)
                    .unwrap();
            let b = apply_dispersal(&f, &OperatorSpec::Laplacian { diffusivity: 1.0 }, Boundary::Periodic).unwrap();
            errs.push(a.values.iter().zip(&b.values).fold(0.0f64, |m, (p, q)| m.max((p - q).abs())));
        }
        // second-order convergence of the stencil towards the spectral value
        assert!(errs[0] / errs[1] > 3.5 && errs[0] / errs[1] < 4.5, "{errs:?}");
    }

    #[test]
    fn drift_examples() {
        let g = Grid::new(2, -1.0, 1.0, 16).unwrap();
        let f = GridField::constant(g, 2.0);
        let out = apply_drift(&f, &DriftSpec::Constant(vec![0.4, -0.3]), Boundary::Periodic, 0.0).unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1e-13));
        let f = GridField::from_fn(g, |x| x[0]);
        let out = apply_drift(&f, &DriftSpec::Constant(vec![1.0, 0.0]), Boundary::Neumann0, 0.0).unwrap();
        for i0 in 1..15 {
            for i1 in 0..16 {
                assert!((out.values[i0 * 16 + i1] + 1.0).abs() < 1e-12);
            }
        }
        let mut b = [0.0; 2];
        DriftSpec::Swirl.eval(&[1.0, 1.0], 0.0, &mut b);
        assert!((b[0] - 2.0 / 2.1f64.sqrt()).abs() < 1e-15 && b[1].abs() < 1e-15);
        assert!((b[0] - 1.380_131_118_684_708_3).abs() < 1e-12);
    }

    #[test]
    fn stability_bound_enforced() {
        let g = Grid::new(1, 0.0, 1.0, 10).unwrap();
        let mut cfg = periodic_cfg(g, OperatorSpec::Laplacian { diffusivity: 1.0 }, Boundary::Periodic);
        assert!((cfg.dt - 0.01 / 4.0).abs() < 1e-15);
        cfg.dt *= 1.01;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn conservation_per_step() {
        let g = Grid::new(2, -1.0, 1.0, 16).unwrap();
        let init = GridField::from_fn(g, |x| (-(x[0] - 0.3).powi(2) * 8.0 - x[1].powi(2) * 5.0).exp() + 0.1);
        let ops = [
            (OperatorSpec::Laplacian { diffusivity: 0.2 }, Boundary::Neumann0),
            (OperatorSpec::Fickian(Diffusivity::GaussianDip { d0: 1e-3, d1: 0.1, sigma_d: 0.3 }), Boundary::Neumann0),
            (
                OperatorSpec::FokkerPlanck(Diffusivity::GaussianDip { d0: 1e-3, d1: 0.1, sigma_d: 0.3 }),
                Boundary::Periodic,
            ),
            (
                OperatorSpec::KernelConvolution {
                    dispersal: 1.0,
                    kernel: KernelSpec::MaternKernel { m: 2, beta: 0.2 },
                },
                Boundary::Neumann0,
            ),
            (
                OperatorSpec::KernelConvolution { dispersal: 1.0, kernel: KernelSpec::Exponential { beta: 0.2 } },
                Boundary::Periodic,
            ),
            (OperatorSpec::FractionalSpectral { alpha: 1.2, gamma: 0.1 }, Boundary::Periodic),
        ];
        for (op, bc) in ops {
            let cfg = periodic_cfg(g, op.clone(), bc);
            let mut s = Stepper::new(&cfg).unwrap();
            let mut f = init.clone();
            let mut rng = stream(1, 0);
            let m0 = f.mass();
            for _ in 0..50 {
                let before = f.mass();
                s.step(&mut f, &mut rng).unwrap();
                assert!((f.mass() - before).abs() < 1e-12 * m0, "{op:?}");
            }
        }
    }

    #[test]
    fn neumann_kernel_operator_is_symmetric() {
        let g = Grid::new(1, 0.0, 1.0, 12).unwrap();
        let op = OperatorSpec::KernelConvolution { dispersal: 1.0, kernel: KernelSpec::Exponential { beta: 0.3 } };
        let mut p = PreparedOperator::new(&op, &g, Boundary::Neumann0).unwrap();
        let mut cols = vec![];
        for j in 0..12 {
            let mut e = vec![0.0; 12];
            e[j] = 1.0;
            let mut out = vec![0.0; 12];
            p.apply(&e, 0.0, &mut out);
            cols.push(out);
        }
        for i in 0..12 {
            for j in 0..12 {
                assert!((cols[j][i] - cols[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bistable_ode_limit() {
        let g = Grid::new(1, 0.0, 1.0, 8).unwrap();
        let mut cfg = SimConfig {
            grid: g,
            operator: None,
            reaction: ReactionSpec::Bistable { k: 2.0, rho: 1.0, kappa2: 0.0 },
            drift: DriftSpec::None,
            sigma_noise: 0.0,
            bc: Boundary::Neumann0,
            dt: 0.01,
            t_end: 30.0,
            snapshot_times: vec![30.0],
            seed: 0,
        };
        cfg.validate().unwrap();
        let init = GridField::from_fn(g, |x| if x[0] < 0.5 { 0.9 } else { 1.1 });
        let out = simulate(&cfg, &init).unwrap();
        for (i, v) in out[0].values.iter().enumerate() {
            let target = if i < 4 { 0.0 } else { 2.0 };
            assert!((v - target).abs() < 1e-8, "cell {i}: {v}");
        }
        cfg.dt = 10.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_stays_zero_without_noise() {
        let (mut cfg, init) = presets::fig2(3, true).unwrap();
        cfg.sigma_noise = 0.0;
        cfg.t_end = 0.2;
        cfg.snapshot_times = vec![0.0, 0.2];
        let out = simulate(&cfg, &init).unwrap();
        assert!(out.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn frac_laplacian_constant_field_is_zero() {
        let v = |_: &[f64]| 2.5;
        assert!(frac_laplacian_pointwise(&v, &[0.3], 1.0, 1e-10).unwrap().abs() < 1e-12);
    }
}
