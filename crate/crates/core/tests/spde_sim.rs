use fracspde_core::kernel::{c_star, green_kernel};
use fracspde_core::special_fn::{mittag_leffler, MLParams};
use fracspde_core::spde_sim::*;
use fracspde_core::{Error, ModelParams};

fn heat() -> ModelParams {
    ModelParams::new(1.0, 2.0, 1.0, 1).unwrap()
}

fn periodic(nx: usize, nt: usize, t_max: f64) -> SpaceTimeGrid {
    SpaceTimeGrid::new(-8.0, 8.0, nx, t_max, nt, Boundary::Periodic).unwrap()
}

fn spec(params: ModelParams, grid: SpaceTimeGrid, u0: Vec<f64>, sigma: NonlinearitySpec, replicas: usize) -> SimulationSpec {
    SimulationSpec {
        params,
        grid,
        u0,
        sigma,
        seed: 99,
        replicas,
        record_cells: vec![grid.nearest_cell(0.0), grid.nearest_cell(1.0)],
    }
}

fn indicator(grid: &SpaceTimeGrid, half: f64) -> Vec<f64> {
    grid.xs().iter().map(|x| if x.abs() <= half { 1.0 } else { 0.0 }).collect()
}

#[test]
fn grid_validation() {
    assert!(SpaceTimeGrid::new(0.0, 1.0, 8, 1.0, 8, Boundary::ZeroPadded).is_err());
    assert!(SpaceTimeGrid::new(0.0, 1.0, 16, 1.0, 4, Boundary::ZeroPadded).is_err());
    assert!(SpaceTimeGrid::new(1.0, 0.0, 16, 1.0, 8, Boundary::ZeroPadded).is_err());
    assert!(SpaceTimeGrid::new(0.0, 1.0, 24, 1.0, 8, Boundary::Periodic).is_err());
    let g = SpaceTimeGrid::new(0.0, 1.0, 24, 1.0, 8, Boundary::ZeroPadded).unwrap();
    assert_eq!(g.nearest_cell(0.5), 12);
    assert_eq!(g.nearest_cell(-3.0), 0);
    assert_eq!(g.nearest_cell(3.0), 23);
    assert!((g.x(0) - 1.0 / 48.0).abs() < 1e-15);
}

#[test]
fn narrow_domain_is_a_truncation_error() {
    let g = SpaceTimeGrid::new(-1.0, 1.0, 32, 1.0, 8, Boundary::Periodic).unwrap();
    let s = spec(heat(), g, vec![1.0; 32], NonlinearitySpec::zero(), 2);
    assert!(matches!(simulate(&s), Err(Error::Truncation(_))));
}

#[test]
fn unsupported_operator() {
    let p = ModelParams::new(0.5, 1.5, 1.0, 1).unwrap();
    let g = periodic(64, 8, 0.25);
    let s = spec(p, g, vec![1.0; 64], NonlinearitySpec::zero(), 2);
    assert!(matches!(simulate(&s), Err(Error::Unsupported(_))));
}

#[test]
fn sampled_sigma_constants() {
    let s = NonlinearitySpec::sampled(vec![-1.0, 0.0, 1.0, 2.0], vec![-2.0, 0.0, 1.0, 1.5]).unwrap();
    assert_eq!(s.lip_sigma, 2.0);
    assert_eq!(s.l_sigma, 0.5);
    assert_eq!(s.eval(3.0), 2.0);
    assert_eq!(s.eval(-2.0), -4.0);
    assert_eq!(s.eval(0.5), 0.5);
    assert!(s.vanishes_at_zero());
    let shifted = NonlinearitySpec::sampled(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
    assert!(!shifted.vanishes_at_zero());
    assert!(NonlinearitySpec::sampled(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
    let mut bad = NonlinearitySpec::linear(1.0).unwrap();
    bad.l_sigma = 2.0;
    assert!(bad.validate().is_err());
}

#[test]
fn noise_free_constant_is_exact() {
    for beta in [1.0, 0.5] {
        let p = ModelParams::new(beta, 2.0, 1.0, 1).unwrap();
        let g = periodic(64, 8, 0.5);
        let e = simulate(&spec(p, g, vec![1.0; 64], NonlinearitySpec::zero(), 3)).unwrap();
        for m in 0..e.levels() {
            for (v, se) in moment_field(&e, 2, m).unwrap() {
                assert_eq!((v, se), (1.0, 0.0));
            }
            let pt = estimate_moment(&e, 2, m, &e.recorded_cells.clone()).unwrap();
            assert_eq!(pt.estimate, 1.0);
            assert_eq!(pt.stderr, 0.0);
        }
    }
}

#[test]
fn noise_free_point_mass_tracks_kernel() {
    let p = ModelParams::new(0.6, 2.0, 1.0, 1).unwrap();
    let g = SpaceTimeGrid::new(-8.0, 8.0, 128, 1.0, 8, Boundary::ZeroPadded).unwrap();
    let k0 = g.nearest_cell(0.0);
    let mut u0 = vec![0.0; 128];
    u0[k0] = 1.0 / g.dx();
    let s = spec(p, g, u0, NonlinearitySpec::zero(), 1);
    let sim = Simulator::new(&s).unwrap();
    for m in [2, 8] {
        let t = g.t(m);
        for j in [k0, k0 + 4, k0 + 16] {
            let want = green_kernel(&p, t, &[g.x(j) - g.x(k0)]).unwrap();
            let got = sim.deterministic(m)[j];
            // lattice mass normalization resolves the cusp at x = 0 to O(dx²)
            assert!((got - want).abs() < 3e-3 * want + 1e-6, "t={t} j={j}: {got} vs {want}");
        }
    }
}

#[test]
fn one_step_variance_is_the_integrated_l2_mass() {
    // Var u_{dt}(x) = λ² ∫_0^{dt} ‖G_s‖² ds = λ² C* dt^{1-θ}/(1-θ)
    let p = heat();
    let g = periodic(64, 8, 0.5);
    let lambda = 0.7;
    let s = spec(p, g, vec![1.0; 64], NonlinearitySpec::linear(lambda).unwrap(), 4000);
    let e = simulate(&s).unwrap();
    let w1 = noise_lag_weights(c_star(&p).unwrap(), 0.5, g.dt(), 1)[0];
    let want = lambda * lambda * w1;
    // replicas are independent; cells of one replica are not, so use one cell
    let j = e.recorded_cells[0];
    let xs: Vec<f64> = (0..e.replicas).map(|r| (e.recorded_value(r, 1, 0) - 1.0).powi(2)).collect();
    let (v, se) = fracspde_core::stats::jackknife_of_mean(&xs, |m| m).unwrap();
    assert!((v - want).abs() < 3.0 * se, "cell {j}: {v} ± {se} vs {want}");
}

#[test]
fn replay_with_truncated_horizon_is_a_prefix() {
    let p = ModelParams::new(0.5, 2.0, 1.0, 1).unwrap();
    let long = periodic(64, 16, 0.5);
    let short = periodic(64, 8, 0.25);
    let sigma = NonlinearitySpec::linear(1.0).unwrap();
    let a = Simulator::new(&spec(p, long, vec![1.0; 64], sigma.clone(), 4)).unwrap();
    let b = Simulator::new(&spec(p, short, vec![1.0; 64], sigma, 4)).unwrap();
    for r in 0..4 {
        let mut fa = vec![0.0; 17 * 64];
        let mut fb = vec![0.0; 9 * 64];
        a.run_replica(r, &mut fa).unwrap();
        b.run_replica(r, &mut fb).unwrap();
        assert_eq!(&fa[..fb.len()], &fb[..]);
    }
}

#[test]
fn identical_seeds_reproduce_and_chunks_must_be_ordered() {
    let g = periodic(64, 8, 0.25);
    let s = spec(heat(), g, vec![1.0; 64], NonlinearitySpec::linear(1.0).unwrap(), 70);
    let a = simulate(&s).unwrap();
    let b = simulate(&s).unwrap();
    assert_eq!(a, b);
    let mut other = s.clone();
    other.seed += 1;
    assert_ne!(simulate(&other).unwrap().recorded, a.recorded);
    let sim = Simulator::new(&s).unwrap();
    assert_eq!(sim.n_chunks(), 2);
    let mut builder = sim.builder();
    assert!(builder.push(sim.run_chunk(1).unwrap()).is_err());
    builder.push(sim.run_chunk(0).unwrap()).unwrap();
    assert!(sim.builder().finish().is_err());
}

#[test]
fn mean_stays_at_initial_value() {
    let g = periodic(64, 16, 1.0);
    let e = simulate(&spec(heat(), g, vec![1.0; 64], NonlinearitySpec::linear(0.5).unwrap(), 2000)).unwrap();
    for m in [4, 8, 16] {
        let pt = estimate_moment(&e, 1, m, &[e.recorded_cells[0]]).unwrap();
        assert!((pt.estimate - 1.0).abs() < 3.0 * pt.stderr, "{pt:?}");
    }
}

#[test]
fn second_moment_matches_renewal_oracle() {
    // λ = 0.5 keeps the check cheap; the acceptance run covers λ = 1
    for beta in [1.0, 0.75, 0.5] {
        let p = ModelParams::new(beta, 2.0, 1.0, 1).unwrap();
        let g = periodic(128, 16, 1.0);
        let sigma = NonlinearitySpec::linear(0.5).unwrap();
        let mut s = spec(p, g, vec![1.0; 128], sigma.clone(), 2000);
        s.seed = 5;
        let e = simulate(&s).unwrap();
        let times = g.times();
        let oracle = second_moment_renewal(&p, &sigma, &[1.0], &times[1..]).unwrap();
        let cell = e.recorded_cells[0];
        for m in 1..e.levels() {
            let pt = estimate_moment(&e, 2, m, &[cell]).unwrap();
            let z = (pt.estimate - oracle.f[m - 1]) / pt.stderr;
            assert!(z.abs() < 3.0, "beta={beta} t={}: z = {z}", pt.t);
        }
    }
}

#[test]
fn moment_errors() {
    let g = periodic(64, 8, 0.25);
    let e = simulate(&spec(heat(), g, vec![1.0; 64], NonlinearitySpec::zero(), 2)).unwrap();
    assert!(matches!(estimate_moment(&e, 2, 1, &[]), Err(Error::Estimation(_))));
    assert!(matches!(estimate_moment(&e, 2, 1, &[5]), Err(Error::Estimation(_))));
    assert!(moment_field(&e, 3, 1).is_err());
    assert!(estimate_moment(&e, 2, 99, &[e.recorded_cells[0]]).is_err());
}

fn synthetic_curve(t: Vec<f64>, f: impl Fn(f64) -> f64) -> MomentCurve {
    let estimate: Vec<f64> = t.iter().map(|&s| f(s)).collect();
    MomentCurve {
        p: 2,
        cells: vec![0],
        x: vec![0.0],
        stderr: vec![0.0; t.len()],
        estimate,
        t,
        replicas: 1,
        seed: 0,
    }
}

#[test]
fn lyapunov_fits() {
    let ts: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
    let flat = estimate_lyapunov(&synthetic_curve(ts, |_| 3.0), None).unwrap();
    assert!(flat.rate.abs() < 1e-14);
    // exact second moment for β = 1, λ = 1: E_{1/2}(√(t/8)), rate 1/8
    let ml = MLParams::with_default_tol(0.5).unwrap();
    let ts: Vec<f64> = (0..=100).map(|i| i as f64 * 8.0).collect();
    let fit = estimate_lyapunov(&synthetic_curve(ts, |t| mittag_leffler(&ml, (t / 8.0).sqrt()).unwrap()), None).unwrap();
    assert!((fit.rate - 0.125).abs() < 0.02 * 0.125, "{fit:?}");
    let short: Vec<f64> = (0..4).map(|i| i as f64).collect();
    assert!(estimate_lyapunov(&synthetic_curve(short, |_| 1.0), None).is_err());
    let ts: Vec<f64> = (0..=10).map(|i| i as f64).collect();
    assert!(estimate_lyapunov(&synthetic_curve(ts, |t| 5.0 - t), None).is_err());
}

#[test]
fn weighted_norm_cases() {
    let g = periodic(64, 8, 0.5);
    let e = simulate(&spec(heat(), g, vec![1.0; 64], NonlinearitySpec::zero(), 2)).unwrap();
    assert_eq!(weighted_norm(&e, 1.0, 0.0).unwrap(), 1.0);
    let e = simulate(&spec(heat(), g, vec![1.0; 64], NonlinearitySpec::linear(1.0).unwrap(), 50)).unwrap();
    let mut last = f64::INFINITY;
    for gamma in [0.1, 0.5, 1.0, 4.0] {
        let n = weighted_norm(&e, gamma, 0.3).unwrap();
        assert!(n <= last);
        last = n;
    }
}

#[test]
fn envelope_cases() {
    let p = ModelParams::new(0.5, 2.0, 1.0, 1).unwrap();
    let g = SpaceTimeGrid::new(-8.0, 8.0, 128, 0.5, 8, Boundary::ZeroPadded).unwrap();
    let u0 = indicator(&g, 0.5);
    let quiet = simulate(&spec(p, g, u0.clone(), NonlinearitySpec::zero(), 2)).unwrap();
    let rep = envelope_check(&quiet, 1.0, None).unwrap();
    assert!(rep.pass && rep.fraction_within == 1.0, "{rep:?}");
    let sigma = NonlinearitySpec::linear(1.0).unwrap();
    let noisy = simulate(&spec(p, g, u0, sigma, 400)).unwrap();
    let c_min = envelope_min_c(0.5, 1.0, 1.0).unwrap();
    assert!(matches!(envelope_check(&noisy, 0.9 * c_min, None), Err(Error::Domain(_))));
    let rep = envelope_check(&noisy, 1.1 * c_min, None).unwrap();
    assert!(rep.pass, "{} violations", rep.violations.len());
    let injected = envelope_check(&noisy, 1.1 * c_min, Some(0.5 * rep.a_fit)).unwrap();
    assert!(!injected.pass && !injected.violations.is_empty());
    let flat = simulate(&spec(p, g, vec![1.0; 128], NonlinearitySpec::zero(), 2)).unwrap();
    assert!(envelope_check(&flat, 1.0, None).is_err());
    // e^{c|x|} e^{-c|x|} rounds above 1 at the edge cells of this indicator
    let fine = SpaceTimeGrid::new(-8.0, 8.0, 256, 0.5, 8, Boundary::ZeroPadded).unwrap();
    let edge = simulate(&spec(p, fine, indicator(&fine, 0.5), NonlinearitySpec::zero(), 2)).unwrap();
    let rep = envelope_check(&edge, 1.1 * c_min, None).unwrap();
    assert!(rep.pass, "{:?}", rep.violations);
}

#[test]
fn front_cases() {
    let p = ModelParams::new(0.5, 2.0, 1.0, 1).unwrap();
    let g = SpaceTimeGrid::new(-8.0, 8.0, 128, 1.0, 8, Boundary::ZeroPadded).unwrap();
    let u0 = indicator(&g, 0.5);
    let quiet = simulate(&spec(p, g, u0.clone(), NonlinearitySpec::zero(), 2)).unwrap();
    let far = estimate_front(&quiet, 3.0, None).unwrap();
    assert!(far.proxy_t.iter().all(|v| *v < 0.0));
    let noisy = simulate(&spec(p, g, u0, NonlinearitySpec::linear(1.0).unwrap(), 200)).unwrap();
    let thetas = [0.0, 0.5, 1.0, 2.0, 4.0];
    let fronts: Vec<FrontEstimate> = thetas.iter().map(|&th| estimate_front(&noisy, th, None).unwrap()).collect();
    for w in fronts.windows(2) {
        for (a, b) in w[0].proxy_t.iter().zip(&w[1].proxy_t) {
            assert!(a >= b);
        }
    }
    assert!(matches!(estimate_front(&noisy, 20.0, None), Err(Error::Truncation(_))));
}

#[test]
fn energy_cases() {
    let g = periodic(64, 8, 0.5);
    let quiet = simulate(&spec(heat(), g, vec![1.0; 64], NonlinearitySpec::zero(), 2)).unwrap();
    let rep = l2_energy_check(&quiet, 0.5).unwrap();
    assert!(rep.pass);
    assert!(rep.levels.windows(2).all(|w| w[1].estimate <= w[0].estimate + 1e-12));
    let noisy = simulate(&spec(heat(), g, vec![1.0; 64], NonlinearitySpec::linear(1.0).unwrap(), 200)).unwrap();
    let rep = l2_energy_check(&noisy, 0.5).unwrap();
    assert!((rep.rate - 0.5).abs() < 1e-14);
    assert!(rep.pass);
    assert!(l2_energy_check(&noisy, 1.0).is_err());
}

#[test]
fn convexity_synthetic() {
    let pts = |f: fn(f64) -> f64| -> Vec<LyapunovPoint> {
        [2.0, 4.0, 6.0]
            .iter()
            .map(|&k| LyapunovPoint { k, eta: f(k), stderr: 0.0 })
            .collect()
    };
    let sq = convexity_diagnostic(&pts(|k| k * k)).unwrap();
    assert!(sq.convex && sq.ratio_nondecreasing && sq.ratio_strictly_increasing);
    let lin = convexity_diagnostic(&pts(|k| k)).unwrap();
    assert!(lin.convex && lin.ratio_nondecreasing && !lin.ratio_strictly_increasing);
    let concave = convexity_diagnostic(&pts(|k| k.sqrt())).unwrap();
    assert!(!concave.convex && !concave.ratio_nondecreasing);
    assert!(convexity_diagnostic(&pts(|k| k)[..2]).is_err());
}
