use mechspde::estimation::ModelParams;
use mechspde::particles::{exact_gaussian_transition, gaussian_window_mass, init, InitialDistribution, LevyParams};
use mechspde::pointprocess::*;
use mechspde::quadrature::GaussLegendre;
use mechspde::rng::stream;

fn table2() -> ModelParams {
    ModelParams::table2()
}

fn a1() -> Window {
    Window::table2()[0].clone()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn homogeneous_counts_are_poisson() {
    let w = Window::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
    let u = IntensityFn::new(|_, _| 5.0, 5.0);
    let mut rng = stream(30, 0);
    let counts: Vec<f64> = (0..10_000).map(|_| sample_poisson(&u, &w, 0.0, &mut rng).unwrap().len() as f64).collect();
    let (m, v) = mean_var(&counts);
    assert!((m - 20.0).abs() < 3.0 * (20.0f64 / 1e4).sqrt());
    assert!((0.9..=1.1).contains(&(v / m)), "ratio {}", v / m);
}

#[test]
fn window_count_mean_matches_intensity_measure() {
    let th = table2();
    let eta0 = 300.0;
    let phi = intensity_measure(&IntensityFn::gaussian(th, eta0, 1.0), &a1(), 1.0, 32).unwrap().value;
    let p = LevyParams::gaussian(&th, eta0, InitialDistribution::DiracAt(vec![0.0, 0.0]));
    let counts: Vec<f64> = (0..400)
        .map(|r| {
            let mut rng = stream(31, r);
            let mut sys = init(&p, &mut rng).unwrap();
            exact_gaussian_transition(&mut sys, 1.0, &p, &mut rng).unwrap();
            count(&PointPattern::new(sys.alive_positions(), 1.0, None).unwrap(), &a1()) as f64
        })
        .collect();
    let (m, _) = mean_var(&counts);
    assert!((m - phi).abs() < 3.0 * (phi / 400.0).sqrt(), "{m} vs {phi}");
}

#[test]
fn intensity_measure_normalization_and_refinement() {
    let th = table2();
    let t = 1.0;
    let s = th.sigma;
    let big = Window::new(vec![th.b1 - 8.0 * s, th.b2 - 8.0 * s], vec![th.b1 + 8.0 * s, th.b2 + 8.0 * s]).unwrap();
    let total = intensity_measure(&IntensityFn::gaussian(th, 1e4, t), &big, t, 96).unwrap();
    let expect = 1e4 * (-1.0f64 / 3.0).exp();
    assert!((total.value - expect).abs() < 1e-6 * expect);

    let q32 = intensity_measure(&IntensityFn::gaussian(th, 1e4, t), &a1(), t, 32).unwrap();
    let q64 = intensity_measure(&IntensityFn::gaussian(th, 1e4, t), &a1(), t, 64).unwrap();
    assert!((q32.value - q64.value).abs() < 1e-8 * q64.value);
    let exact = gaussian_window_mass(&[0.0, 0.0], &[1.0, 1.0], t, &th, 1e4).unwrap();
    assert!((q64.value - exact).abs() < 1e-8 * exact);
}

#[test]
fn thinning_scales_with_intensity() {
    let th = table2();
    let w = a1();
    let mut rng = stream(32, 0);
    let base = IntensityFn::gaussian(th, 100.0, 1.0);
    let scaled = IntensityFn::gaussian(th, 300.0, 1.0);
    let phi = gaussian_window_mass(&w.low, &w.high, 1.0, &th, 100.0).unwrap();
    let reps = 2000;
    let m1 =
        (0..reps).map(|_| sample_poisson(&base, &w, 1.0, &mut rng).unwrap().len()).sum::<usize>() as f64 / reps as f64;
    let m3 = (0..reps).map(|_| sample_poisson(&scaled, &w, 1.0, &mut rng).unwrap().len()).sum::<usize>() as f64
        / reps as f64;
    assert!((m1 - phi).abs() < 3.0 * (phi / reps as f64).sqrt());
    assert!((m3 - 3.0 * phi).abs() < 3.0 * (3.0 * phi / reps as f64).sqrt());
}

#[test]
fn disjoint_windows_are_uncorrelated() {
    let th = table2();
    let eta0 = 200.0;
    let p = LevyParams::gaussian(&th, eta0, InitialDistribution::DiracAt(vec![0.0, 0.0]));
    let (wa, wb) =
        (Window::new(vec![0.0, 0.0], vec![0.3, 1.0]).unwrap(), Window::new(vec![0.3, 0.0], vec![1.0, 1.0]).unwrap());
    let reps = 3000;
    let mut pairs = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = stream(33, r as u64);
        let mut sys = init(&p, &mut rng).unwrap();
        exact_gaussian_transition(&mut sys, 1.0, &p, &mut rng).unwrap();
        let pat = PointPattern::new(sys.alive_positions(), 1.0, None).unwrap();
        pairs.push((count(&pat, &wa) as f64, count(&pat, &wb) as f64));
    }
    let (xa, xb): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let ((ma, va), (mb, vb)) = (mean_var(&xa), mean_var(&xb));
    let cov = xa.iter().zip(&xb).map(|(a, b)| (a - ma) * (b - mb)).sum::<f64>() / (reps as f64 - 1.0);
    let corr = cov / (va * vb).sqrt();
    assert!(corr.abs() < 3.0 / (reps as f64).sqrt(), "corr {corr}");
}

#[test]
fn conditional_sampler_limits() {
    let th = table2();
    let eta0 = 500.0;
    let w = a1();
    let mut rng = stream(34, 0);
    let observed = sample_poisson(&IntensityFn::gaussian(th, eta0, 1.0), &w, 1.0, &mut rng).unwrap();
    assert!(!observed.is_empty());

    // κ² (t − s) large: no observed point survives; only the outside component remains
    let fast = ModelParams { kappa: 10.0, ..th };
    let obs_fast = PointPattern { t: 1.0, ..observed.clone() };
    let total: usize =
        (0..200).map(|_| conditional_sampler(&obs_fast, &fast, eta0, 1.5, &w, &mut rng).unwrap().len()).sum();
    assert_eq!(total, 0);

    // t → s⁺: away from the edge of A the retained points stay on top of the observed ones
    let next = conditional_sampler(&observed, &th, eta0, 1.0 + 1e-8, &w, &mut rng).unwrap();
    let inner = Window::new(vec![1e-3, 1e-3], vec![1.0 - 1e-3, 1.0 - 1e-3]).unwrap();
    let mut max_gap: f64 = 0.0;
    for p in next.points.iter().filter(|p| inner.contains(p)) {
        let nearest = observed.points.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min);
        max_gap = max_gap.max(nearest);
    }
    assert!(max_gap < 1e-3, "gap {max_gap}");
    assert!(count(&next, &w) >= observed.len() * 99 / 100);
}

#[test]
fn conditional_intensity_averages_to_unconditional() {
    let th = table2();
    let eta0 = 300.0;
    let w = a1();
    let (s, t) = (1.0, 1.5);
    let x = [0.6, 0.9];
    let reps = 4000;
    let mut rng = stream(35, 0);
    let vals: Vec<f64> = (0..reps)
        .map(|_| {
            let obs = sample_poisson(&IntensityFn::gaussian(th, eta0, s), &w, s, &mut rng).unwrap();
            conditional_intensity(&obs, &w, &x, t, &th, eta0)
        })
        .collect();
    let (m, v) = mean_var(&vals);
    let u0 = mechspde::particles::analytic_intensity(&x, t, &th, eta0).unwrap();
    assert!((m - u0).abs() < 3.0 * (v / reps as f64).sqrt(), "{m} vs {u0}");
}

#[test]
fn witness_exact_time_has_zero_variance() {
    let th = ModelParams { kappa: 1.0, ..table2() };
    let r = non_poisson_witness(&th, 500.0, 1.0, 1.0, &a1(), 50, &mut stream(36, 0)).unwrap();
    assert_eq!(r.conditional_ratio, 0.0);
}

#[test]
fn exact_loglik_empty_evolution() {
    let th = ModelParams { kappa: 1.0, ..table2() };
    let eta0 = 0.5;
    let obs = vec![PointPattern::new(vec![], 1.0, None).unwrap(), PointPattern::new(vec![], 2.0, None).unwrap()];
    let ll = exact_loglik_small(&obs, &th, eta0).unwrap();
    // enumeration over N₀: Σ_k Poisson(k; η₀) (1 − e^{−κ²t₁})^k
    let dead = 1.0 - (-1.0f64).exp();
    let mut p = 0.0;
    let mut pk = (-eta0).exp();
    for k in 0..60 {
        p += pk * dead.powi(k);
        pk *= eta0 / (k + 1) as f64;
    }
    assert!((ll - p.ln()).abs() < 1e-14);
}

#[test]
fn exact_loglik_two_particles_by_hand() {
    let th = table2();
    let eta0 = 3.0;
    let a = vec![vec![0.2, 0.3], vec![0.4, 0.1]];
    let b = vec![vec![0.9, 1.4]];
    let obs = vec![PointPattern::new(a.clone(), 1.0, None).unwrap(), PointPattern::new(b.clone(), 2.5, None).unwrap()];
    let ll = exact_loglik_small(&obs, &th, eta0).unwrap();
    let k2 = th.kappa * th.kappa;
    let h = 1.5;
    let q = (-k2 * h).exp();
    let v = th.sigma * th.sigma * h;
    let g = |x: &Vec<f64>| {
        let r2 = (b[0][0] - x[0] - th.b1 * h).powi(2) + (b[0][1] - x[1] - th.b2 * h).powi(2);
        (-r2 / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v)
    };
    let u = |x: &Vec<f64>| mechspde::particles::analytic_intensity(x, 1.0, &th, eta0).unwrap();
    let expect = (-eta0 * (-k2).exp() + (u(&a[0]) * u(&a[1])).ln()) + (q * (1.0 - q) * (g(&a[0]) + g(&a[1]))).ln();
    assert!((ll - expect).abs() < 1e-12, "{ll} vs {expect}");
}

#[test]
fn exact_loglik_finite_and_prefers_drift_line() {
    let th = ModelParams { kappa: 0.1, ..table2() };
    let a = vec![vec![0.3, 0.5], vec![0.1, 0.6]];
    for t2 in [1.5, 2.0, 3.0, 5.0] {
        let h = t2 - 1.0;
        let ll_at = |off: f64| {
            let b = vec![vec![0.3 + th.b1 * h + off, 0.5 + th.b2 * h]];
            let obs = vec![PointPattern::new(a.clone(), 1.0, None).unwrap(), PointPattern::new(b, t2, None).unwrap()];
            exact_loglik_small(&obs, &th, 5.0).unwrap()
        };
        let (on, off) = (ll_at(0.0), ll_at(0.5));
        assert!(on.is_finite() && off.is_finite());
        assert!(on > off, "t2 {t2}: {on} vs {off}");
    }
}

#[test]
fn conditional_intensity_cell_integrals() {
    // expected counts per cell of the conditional pattern against the formula, 400 replicates
    let th = table2();
    let eta0 = 400.0;
    let w = a1();
    let (s, t) = (1.0, 1.3);
    let mut rng = stream(37, 0);
    let observed = sample_poisson(&IntensityFn::gaussian(th, eta0, s), &w, s, &mut rng).unwrap();
    let sup = Window::new(vec![0.0, 0.0], vec![1.5, 1.5]).unwrap();
    let n = 5;
    let reps = 400;
    let mut sums = vec![0.0; n * n];
    let mut sq = vec![0.0; n * n];
    let cell =
        |p: &[f64]| ((p[0] / 1.5 * n as f64) as usize).min(n - 1) * n + ((p[1] / 1.5 * n as f64) as usize).min(n - 1);
    for _ in 0..reps {
        let pat = conditional_sampler(&observed, &th, eta0, t, &sup, &mut rng).unwrap();
        let mut c = vec![0.0; n * n];
        for p in &pat.points {
            c[cell(p)] += 1.0;
        }
        for k in 0..n * n {
            sums[k] += c[k];
            sq[k] += c[k] * c[k];
        }
    }
    let gl = GaussLegendre::new(8);
    let h = 1.5 / n as f64;
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let (x0, y0) = (i as f64 * h, j as f64 * h);
            let expect = gl.integrate(
                |x| gl.integrate(|y| conditional_intensity(&observed, &w, &[x, y], t, &th, eta0), y0, y0 + h),
                x0,
                x0 + h,
            );
            let m = sums[k] / reps as f64;
            let var = sq[k] / reps as f64 - m * m;
            let se = (var / reps as f64).sqrt().max(1e-9);
            assert!((m - expect).abs() < 4.0 * se, "cell ({i},{j}): {m} vs {expect} (se {se})");
        }
    }
}
