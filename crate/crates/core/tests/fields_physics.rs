use mechspde::covariance::KernelSpec;
use mechspde::fields::*;
use mechspde::quadrature::GaussLegendre;
use mechspde::rng::stream;
use rand::Rng;
use std::f64::consts::PI;

fn base(grid: Grid, op: Option<OperatorSpec>, reaction: ReactionSpec, bc: Boundary, t_end: f64) -> SimConfig {
    let mut cfg = SimConfig {
        grid,
        operator: op,
        reaction,
        drift: DriftSpec::None,
        sigma_noise: 0.0,
        bc,
        dt: 1.0,
        t_end,
        snapshot_times: vec![],
        seed: 11,
    };
    cfg.dt = presets::largest_dividing_dt(&cfg).unwrap();
    cfg
}

fn random_field(grid: Grid, seed: u64) -> GridField {
    let mut rng = stream(seed, 0);
    let mut f = GridField::constant(grid, 0.0);
    f.values.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    f
}

#[test]
fn simulate_is_linear_in_initial_condition() {
    let g = Grid::new(2, -1.0, 1.0, 16).unwrap();
    let mut cfg = base(
        g,
        Some(OperatorSpec::Fickian(Diffusivity::GaussianDip { d0: 0.01, d1: 0.1, sigma_d: 0.3 })),
        ReactionSpec::Linear { kappa2: 0.5 },
        Boundary::Dirichlet0,
        0.5,
    );
    cfg.drift = DriftSpec::Swirl;
    cfg.dt = presets::largest_dividing_dt(&cfg).unwrap();
    cfg.snapshot_times = vec![0.25, 0.5];
    for seed in 0..3 {
        let a = random_field(g, 2 * seed);
        let b = random_field(g, 2 * seed + 1);
        let mut ab = a.clone();
        for (v, w) in ab.values.iter_mut().zip(&b.values) {
            *v = 2.0 * *v - 3.0 * w;
        }
        let (sa, sb, sab) = (simulate(&cfg, &a).unwrap(), simulate(&cfg, &b).unwrap(), simulate(&cfg, &ab).unwrap());
        for k in 0..2 {
            for i in 0..g.len() {
                let lin = 2.0 * sa[k].values[i] - 3.0 * sb[k].values[i];
                assert!((sab[k].values[i] - lin).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn comparison_principle_bounds() {
    let g = Grid::new(2, -1.0, 1.0, 20).unwrap();
    let kappa2 = 0.7;
    let ops = [
        (OperatorSpec::Laplacian { diffusivity: 0.1 }, Boundary::Neumann0),
        (OperatorSpec::Fickian(Diffusivity::GaussianDip { d0: 1e-3, d1: 0.1, sigma_d: 0.25 }), Boundary::Dirichlet0),
        (
            OperatorSpec::KernelConvolution { dispersal: 2.0, kernel: KernelSpec::Exponential { beta: 0.2 } },
            Boundary::Periodic,
        ),
        (
            OperatorSpec::KernelConvolution { dispersal: 2.0, kernel: KernelSpec::MaternKernel { m: 2, beta: 0.1 } },
            Boundary::Neumann0,
        ),
    ];
    for (op, bc) in ops {
        let mut cfg = base(g, Some(op.clone()), ReactionSpec::Linear { kappa2 }, bc, 2.0);
        cfg.snapshot_times = (1..=8).map(|k| 0.25 * k as f64).collect();
        let init = random_field(g, 5);
        let (lo, hi) = (init.min(), init.max());
        for snap in simulate(&cfg, &init).unwrap() {
            let decay = (-kappa2 * snap.time).exp();
            for &v in &snap.values {
                assert!(v >= lo * decay - 1e-14 && v <= hi * decay + 1e-14, "{op:?} t={} v={v}", snap.time);
            }
        }
    }
}

#[test]
fn linear_reaction_decay_without_dispersal() {
    let g = Grid::new(1, 0.0, 1.0, 8).unwrap();
    let mut cfg = base(g, None, ReactionSpec::Linear { kappa2: 1.0 }, Boundary::Neumann0, 1.0);
    cfg.dt = 1e-4;
    cfg.snapshot_times = vec![1.0];
    let out = simulate(&cfg, &GridField::constant(g, 1.0)).unwrap();
    let exact = (-1.0f64).exp();
    // Euler error ≈ t κ⁴ dt / 2 · e^{−κ²t}
    assert!((out[0].values[0] - exact).abs() < 1e-4 * exact);
}

/// Sample variance of independent per-cell OU processes after burn-in.
fn ou_variance(dt: f64, seed: u64) -> f64 {
    let g = Grid::new(1, 0.0, 1e5 * 1e-2, 100_000).unwrap();
    let snapshots: Vec<f64> = (0..10).map(|k| 10.0 + 5.0 * k as f64).collect();
    let cfg = SimConfig {
        grid: g,
        operator: None,
        reaction: ReactionSpec::Linear { kappa2: 1.0 },
        drift: DriftSpec::None,
        sigma_noise: 1.0,
        bc: Boundary::Periodic,
        dt,
        t_end: 55.0,
        snapshot_times: snapshots,
        seed,
    };
    let snaps = simulate(&cfg, &GridField::constant(g, 0.0)).unwrap();
    let n = (snaps.len() * g.len()) as f64;
    snaps.iter().flat_map(|s| s.values.iter()).map(|v| v * v).sum::<f64>() / n
}

#[test]
fn ou_stationary_variance_and_dt_order() {
    let dx = 1e-2;
    let continuous = 1.0 / (2.0 * dx);
    let coarse = ou_variance(0.2, 1);
    let fine = ou_variance(0.1, 2);
    for (dt, v) in [(0.2, coarse), (0.1, fine)] {
        let discrete = 1.0 / (dx * (2.0 - dt));
        assert!((v / continuous - 1.0).abs() < 0.2, "dt={dt}: {v} vs {continuous}");
        assert!((v / discrete - 1.0).abs() < 0.01, "dt={dt}: {v} vs discrete {discrete}");
    }
    let ratio = (coarse / continuous - 1.0) / (fine / continuous - 1.0);
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "error ratio {ratio}");
}

#[test]
fn heterogeneous_diffusion_steady_states() {
    let grid = Grid::new(2, -1.0, 1.0, 40).unwrap();
    let df = presets::b6_diffusivity();
    let init = GridField::from_fn(grid, |x| 1.0 + 0.5 * (PI * x[0]).sin() * (0.5 * PI * x[1]).cos());
    let fp = base(grid, Some(OperatorSpec::FokkerPlanck(df.clone())), ReactionSpec::None, Boundary::Neumann0, 1.0);
    let fp_ss = steady_state_deterministic(&fp, &init, 2000.0).unwrap();
    let ud: Vec<f64> = fp_ss.values.iter().enumerate().map(|(i, u)| u * df.eval(&grid.point(i)[..2], 0.0)).collect();
    let mut sorted = ud.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let dev = ud.iter().fold(0.0f64, |m, v| m.max((v / median - 1.0).abs()));
    assert!(dev < 2e-2, "Fokker–Planck U·D deviation {dev}");
    assert!((fp_ss.mass() - init.mass()).abs() < 1e-9 * init.mass());

    let fick = base(grid, Some(OperatorSpec::Fickian(df)), ReactionSpec::None, Boundary::Neumann0, 1.0);
    let fick_ss = steady_state_deterministic(&fick, &init, 2000.0).unwrap();
    let mean = fick_ss.values.iter().sum::<f64>() / grid.len() as f64;
    let dev = fick_ss.values.iter().fold(0.0f64, |m, v| m.max((v / mean - 1.0).abs()));
    assert!(dev < 1e-6, "Fickian deviation {dev}");
}

#[test]
fn constant_diffusivity_forms_coincide() {
    let g = Grid::new(2, -1.0, 1.0, 24).unwrap();
    let mut a = base(
        g,
        Some(OperatorSpec::FokkerPlanck(Diffusivity::Constant(0.2))),
        ReactionSpec::None,
        Boundary::Neumann0,
        1.0,
    );
    a.snapshot_times = vec![0.5, 1.0];
    let mut b = a.clone();
    b.operator = Some(OperatorSpec::Fickian(Diffusivity::Constant(0.2)));
    let init = random_field(g, 9);
    for (x, y) in simulate(&a, &init).unwrap().iter().zip(simulate(&b, &init).unwrap().iter()) {
        for (p, q) in x.values.iter().zip(&y.values) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn steady_state_rejects_noisy_or_absorbing_setups() {
    let g = Grid::new(1, 0.0, 1.0, 16).unwrap();
    let mut cfg = base(
        g,
        Some(OperatorSpec::Laplacian { diffusivity: 1.0 }),
        ReactionSpec::Linear { kappa2: 0.1 },
        Boundary::Neumann0,
        1.0,
    );
    let init = GridField::constant(g, 1.0);
    assert!(steady_state_deterministic(&cfg, &init, 10.0).is_err());
    cfg.reaction = ReactionSpec::None;
    cfg.sigma_noise = 1.0;
    assert!(steady_state_deterministic(&cfg, &init, 10.0).is_err());
}

/// `−(−Δ)^{α/2} e^{−x²}` at `x` by inverse cosine transform of `|ξ|^α √π e^{−ξ²/4}`.
fn spectral_oracle(x: f64, alpha: f64) -> f64 {
    let gl = GaussLegendre::new(40);
    let f = |xi: f64| xi.powf(alpha) * PI.sqrt() * (-xi * xi / 4.0).exp() * (xi * x).cos();
    let head = gl.integrate(f, 0.0, 1.0);
    -(head + gl.integrate_composite(f, 1.0, 20.0, 40)) / PI
}

#[test]
fn pointwise_fractional_laplacian_matches_spectral() {
    let v = |y: &[f64]| (-y[0] * y[0]).exp();
    for &alpha in &[0.5, 1.0, 1.5] {
        for &x in &[0.0, 0.4, 1.3] {
            let p = frac_laplacian_pointwise(&v, &[x], alpha, 1e-10).unwrap();
            let s = spectral_oracle(x, alpha);
            assert!((p - s).abs() < 1e-3 * s.abs(), "alpha={alpha} x={x}: {p} vs {s}");
        }
    }
}

#[test]
fn pointwise_agrees_with_fft_operator() {
    // wide periodic box: the bump is negligible at the boundary
    let g = Grid::new(1, -320.0, 320.0, 32768).unwrap();
    let f = GridField::from_fn(g, |x| (-x[0] * x[0]).exp());
    let v = |y: &[f64]| (-y[0] * y[0]).exp();
    for &alpha in &[0.5, 1.0, 1.5] {
        let out =
            apply_dispersal(&f, &OperatorSpec::FractionalSpectral { alpha, gamma: 1.0 }, Boundary::Periodic).unwrap();
        let i = 16384; // cell centre at dx/2
        let p = frac_laplacian_pointwise(&v, &[g.center(i)], alpha, 1e-10).unwrap();
        assert!((out.values[i] - p).abs() < 1e-3 * p.abs(), "alpha={alpha}: fft {} pointwise {p}", out.values[i]);
    }
}

#[test]
fn pointwise_two_dimensional_and_laplacian_limit() {
    let v2 = |y: &[f64]| (-(y[0] * y[0] + y[1] * y[1])).exp();
    // radial spectral oracle in d = 2: −∫ ξ^{1+α} (π e^{−ξ²/4}) J0(ξr) dξ / (2π)
    let alpha = 1.0;
    let gl = GaussLegendre::new(40);
    let oracle =
        -gl.integrate_composite(|xi| xi.powf(1.0 + alpha) * PI * (-xi * xi / 4.0).exp(), 0.0, 20.0, 40) / (2.0 * PI);
    let p = frac_laplacian_pointwise(&v2, &[0.0, 0.0], alpha, 1e-10).unwrap();
    assert!((p - oracle).abs() < 1e-3 * oracle.abs(), "{p} vs {oracle}");

    let v = |y: &[f64]| (-y[0] * y[0]).exp();
    for &x in &[0.0, 0.5] {
        let lap = (4.0 * x * x - 2.0) * (-x * x as f64).exp();
        let p = frac_laplacian_pointwise(&v, &[x], 1.98, 1e-10).unwrap();
        assert!((p - lap).abs() < 0.05 * lap.abs(), "x={x}: {p} vs {lap}");
    }
}

#[test]
fn fig2_preset_runs_finite_with_centred_mean() {
    let (mut cfg, init) = presets::fig2(42, true).unwrap();
    cfg.t_end = 1.0;
    cfg.snapshot_times = vec![1.0];
    cfg.dt = presets::largest_dividing_dt(&cfg).unwrap();
    let out = simulate(&cfg, &init).unwrap();
    let f = &out[0];
    assert!(f.values.iter().all(|v| v.is_finite()));
    let n = f.values.len() as f64;
    let mean = f.values.iter().sum::<f64>() / n;
    let sd = (f.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 0.05 * sd, "mean {mean} sd {sd}");
}

#[test]
fn simulation_is_deterministic_in_seed() {
    let (mut cfg, init) = presets::fig_b6(5, true).unwrap();
    cfg.t_end = 0.5;
    cfg.snapshot_times = vec![0.5];
    cfg.dt = presets::largest_dividing_dt(&cfg).unwrap();
    let a = simulate(&cfg, &init).unwrap();
    let b = simulate(&cfg, &init).unwrap();
    assert_eq!(a[0].values, b[0].values);
    cfg.seed = 6;
    assert_ne!(simulate(&cfg, &init).unwrap()[0].values, a[0].values);
}
