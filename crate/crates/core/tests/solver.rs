use minkmembrane::fields::{derivative, GridSpec, ScalarField};
use minkmembrane::solver::{
    acceleration, acceleration_rate, evolve, initial_state, scale_solution, step, InitialData,
    Profile, SolverConfig, State, Termination, Trajectory,
};
use minkmembrane::Error;

fn gaussian(x: f64) -> f64 {
    (-x * x).exp()
}

fn run_linear_1d(points: usize, t_end: f64) -> (GridSpec, State) {
    let grid = GridSpec::new(1, 12.0, points).unwrap();
    let data = InitialData::new(Profile::Gaussian, 1e-4, 1.0);
    let mut state = initial_state(&data, grid, 0.6).unwrap();
    let term = evolve(&mut state, t_end, &SolverConfig::default(), None, |_| Ok(())).unwrap();
    assert_eq!(term, Termination::ReachedEnd);
    (grid, state)
}

fn dalembert_error(points: usize) -> f64 {
    let t = 5.0;
    let (grid, state) = run_linear_1d(points, t);
    let eps = 1e-4;
    (0..grid.len())
        .map(|i| {
            let x = grid.coordinate(i);
            let exact = 0.5 * eps * (gaussian(x - t) + gaussian(x + t));
            (state.phi().value(i) - exact).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn small_data_matches_dalembert_at_fourth_order() {
    let coarse = dalembert_error(241);
    let fine = dalembert_error(481);
    assert!(fine < 1e-4 * 1e-4, "fine-grid error {fine}");
    let ratio = coarse / fine;
    assert!(ratio > 12.0 && ratio < 20.0, "refinement ratio {ratio}");
}

#[test]
fn zero_state_stays_zero() {
    let grid = GridSpec::new(2, 4.0, 41).unwrap();
    let mut state = State::new(0.0, ScalarField::zeros(grid, "phi"), ScalarField::zeros(grid, "psi"), 0.0).unwrap();
    step(&mut state, 0.05, &SolverConfig::default()).unwrap();
    assert_eq!(state.phi().norm_sup(), 0.0);
    assert!((state.t() - 0.05).abs() < 1e-15);
    let term = evolve(&mut state, 3.0, &SolverConfig::default(), Some(1.0), |_| Ok(())).unwrap();
    assert_eq!(term, Termination::ReachedEnd);
    assert_eq!(state.phi().norm_sup(), 0.0);
    assert_eq!(state.t(), 3.0);
}

#[test]
fn affine_state_has_zero_acceleration() {
    let grid = GridSpec::new(2, 3.0, 31).unwrap();
    let phi = ScalarField::from_fn(grid, "phi", |x| 0.1 * x[0] - 0.2 * x[1] + 0.3).unwrap();
    let psi = ScalarField::constant(grid, 0.25, "psi").unwrap();
    let state = State::new(0.0, phi, psi, 1.0).unwrap();
    let acc = acceleration(&state, 0.9).unwrap();
    // Interior nodes only: the zero walls break affinity at the edge.
    for node in 0..grid.len() {
        let x = grid.node_coords(node);
        if x[0].abs() < 2.5 && x[1].abs() < 2.5 {
            assert!(acc.value(node).abs() < 1e-13);
        }
    }
}

#[test]
fn small_amplitude_acceleration_is_the_laplacian_up_to_cubic_terms() {
    let grid = GridSpec::new(2, 6.0, 61).unwrap();
    let base = |eps: f64| {
        let phi = ScalarField::from_fn(grid, "phi", |x| eps * (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp()).unwrap();
        let psi = ScalarField::from_fn(grid, "psi", |x| eps * x[0] * (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        State::new(0.0, phi, psi, eps).unwrap()
    };
    let mut ratios = Vec::new();
    for eps in [1e-1, 1e-2] {
        let s = base(eps);
        let acc = acceleration(&s, 0.9).unwrap();
        let lap = derivative(s.phi(), 0, 2).unwrap().combine(1.0, &derivative(s.phi(), 1, 2).unwrap(), 1.0).unwrap();
        let diff = acc.combine(1.0, &lap, -1.0).unwrap();
        let interior = (0..grid.len())
            .filter(|&n| grid.node_coords(n)[..2].iter().all(|v| v.abs() < 5.0))
            .map(|n| diff.value(n).abs())
            .fold(0.0, f64::max);
        ratios.push(interior / eps.powi(3));
    }
    // O(ε³): the normalised deviation is the same at both amplitudes.
    assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.05, "{ratios:?}");
}

#[test]
fn single_step_matches_semi_discrete_mode_to_fifth_order() {
    let grid = GridSpec::new(1, 10.0, 201).unwrap();
    let h = grid.spacing();
    let k: f64 = 1.3;
    let eps = 1e-6;
    // symbol of the centred 5-point second derivative
    let kh2 = (30.0 - 32.0 * (k * h).cos() + 2.0 * (2.0 * k * h).cos()) / (12.0 * h * h);
    let omega = kh2.sqrt();
    let err = |dt: f64| {
        let phi = ScalarField::from_fn(grid, "phi", |x| eps * (k * x[0]).sin()).unwrap();
        let psi = ScalarField::zeros(grid, "psi");
        let mut s = State::new(0.0, phi, psi, eps).unwrap();
        step(&mut s, dt, &SolverConfig::default()).unwrap();
        (0..grid.len())
            .filter(|&i| grid.coordinate(i).abs() < 7.0)
            .map(|i| {
                let exact = eps * (k * grid.coordinate(i)).sin() * (omega * dt).cos();
                (s.phi().value(i) - exact).abs() / eps
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.04), err(0.02));
    let order = (e1 / e2).log2();
    assert!(order > 4.5, "single-step order {order} ({e1}, {e2})");
}

#[test]
fn acceleration_rate_matches_time_difference() {
    let grid = GridSpec::new(2, 6.0, 81).unwrap();
    let eps = 0.2;
    let phi = ScalarField::from_fn(grid, "phi", |x| eps * (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
    let psi = ScalarField::from_fn(grid, "psi", |x| eps * x[1] * (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
    let s0 = State::new(0.0, phi, psi, eps).unwrap();
    let cfg = SolverConfig::default();
    let acc0 = acceleration(&s0, cfg.q_max).unwrap();
    let rate = acceleration_rate(&s0, &acc0, cfg.q_max).unwrap();
    let dt = 0.01;
    let forward = {
        let mut s = s0.clone();
        step(&mut s, dt, &cfg).unwrap();
        acceleration(&s, cfg.q_max).unwrap()
    };
    let backward = {
        let mut s = s0.time_reversed().unwrap();
        step(&mut s, dt, &cfg).unwrap();
        acceleration(&s, cfg.q_max).unwrap()
    };
    // central difference in time; the reversed run gives φ_tt(-dt) directly
    let fd = forward.combine(0.5 / dt, &backward, -0.5 / dt).unwrap();
    let err = fd.combine(1.0, &rate, -1.0).unwrap().norm_sup();
    assert!(err < 1e-3 * rate.norm_sup(), "err {err} vs {}", rate.norm_sup());
}

fn energy_drift(points: usize) -> f64 {
    let grid = GridSpec::new(2, 14.0, points).unwrap();
    let data = InitialData::new(Profile::Gaussian, 1e-3, 1.0);
    let mut state = initial_state(&data, grid, 0.7).unwrap();
    let energy = |s: &State| {
        let mut e = 0.5 * s.psi().norm_l2().powi(2);
        for a in 0..2 {
            e += 0.5 * derivative(s.phi(), a, 1).unwrap().norm_l2().powi(2);
        }
        e
    };
    let e0 = energy(&state);
    let mut drift: f64 = 0.0;
    evolve(&mut state, 6.0, &SolverConfig::default(), Some(1.0), |s| {
        drift = drift.max((energy(s) - e0).abs() / e0);
        Ok(())
    })
    .unwrap();
    drift
}

#[test]
fn energy_drift_shrinks_at_fourth_order() {
    let coarse = energy_drift(141);
    let fine = energy_drift(281);
    assert!(fine < 1e-4, "relative energy drift {fine}");
    assert!(coarse / fine > 10.0, "drift ratio {}", coarse / fine);
}

#[test]
fn propagation_speed_is_bounded() {
    // Support measured at the 1e-12 ε level, starting from the initial
    // support at that level.
    let grid = GridSpec::new(1, 30.0, 601).unwrap();
    let eps = 1e-2;
    let data = InitialData::new(Profile::Gaussian, eps, 1.0);
    let mut state = initial_state(&data, grid, 1.0).unwrap();
    let threshold = 1e-12 * eps;
    let radius = |s: &State| {
        (0..grid.len())
            .filter(|&i| s.phi().value(i).abs() > threshold)
            .map(|i| grid.coordinate(i).abs())
            .fold(0.0, f64::max)
    };
    let r0 = radius(&state);
    evolve(&mut state, 20.0, &SolverConfig::default(), Some(1.0), |s| {
        let r = radius(s);
        assert!(r <= 1.05 * s.t() + r0, "radius {r} at t {}", s.t());
        Ok(())
    })
    .unwrap();
}

#[test]
fn reflected_data_give_reflected_solution() {
    let grid = GridSpec::new(2, 8.0, 81).unwrap();
    let make = |sign: f64| {
        let phi = ScalarField::from_fn(grid, "phi", |x| {
            0.05 * (-(x[0] - sign * 1.0).powi(2) - 2.0 * x[1] * x[1]).exp()
        })
        .unwrap();
        State::new(0.0, phi, ScalarField::zeros(grid, "psi"), 0.05).unwrap()
    };
    let mut a = make(1.0);
    let mut b = make(-1.0);
    let cfg = SolverConfig::default();
    evolve(&mut a, 2.0, &cfg, None, |_| Ok(())).unwrap();
    evolve(&mut b, 2.0, &cfg, None, |_| Ok(())).unwrap();
    let m = grid.points();
    for j in 0..m {
        for i in 0..m {
            let va = a.phi().value(grid.node(&[i, j]));
            let vb = b.phi().value(grid.node(&[m - 1 - i, j]));
            assert!((va - vb).abs() <= 1e-15 * 0.05, "({i},{j})");
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let grid = GridSpec::new(2, 8.0, 81).unwrap();
    let data = InitialData::new(Profile::Gaussian, 0.05, 1.0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut s = initial_state(&data, grid, 0.4).unwrap();
            evolve(&mut s, 1.0, &SolverConfig::default(), None, |_| Ok(())).unwrap();
            s.phi().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn steep_large_data_break_down() {
    let grid = GridSpec::new(1, 10.0, 401).unwrap();
    let data = InitialData::new(Profile::Gaussian, 3.0, 0.5);
    let mut state = initial_state(&data, grid, 0.5).unwrap();
    let term = evolve(&mut state, 5.0, &SolverConfig::default(), None, |_| Ok(())).unwrap();
    match term {
        Termination::Breakdown { t, q, .. } => {
            assert!(t > 0.0 && t < 5.0);
            assert!(q >= 0.9);
        }
        other => panic!("expected breakdown, got {other:?}"),
    }
}

#[test]
fn support_guard_fires_when_solution_reaches_the_edge() {
    // Gaussian tail reaches 1e-14 of the peak about 2.8 from the centre for
    // width 0.5; the guard band starts at 7.6.
    let grid = GridSpec::new(1, 8.0, 161).unwrap();
    let data = InitialData::new(Profile::Gaussian, 1e-3, 0.5);
    let mut state = initial_state(&data, grid, 0.4).unwrap();
    let term = evolve(&mut state, 20.0, &SolverConfig::default(), None, |_| Ok(())).unwrap();
    match term {
        Termination::SupportGuard { t, .. } => assert!(t > 4.0 && t < 7.6, "t = {t}"),
        other => panic!("expected support guard, got {other:?}"),
    }
}

#[test]
fn cfl_violation_rejected() {
    let grid = GridSpec::new(1, 4.0, 81).unwrap();
    let mut s = State::new(0.0, ScalarField::zeros(grid, "phi"), ScalarField::zeros(grid, "psi"), 0.0).unwrap();
    assert!(matches!(step(&mut s, 0.05, &SolverConfig::default()), Err(Error::CflViolation { .. })));
}

#[test]
fn history_keeps_five_uniform_slices() {
    let grid = GridSpec::new(1, 6.0, 61).unwrap();
    let data = InitialData::new(Profile::Gaussian, 1e-2, 0.5);
    let mut s = initial_state(&data, grid, 0.3).unwrap();
    evolve(&mut s, 1.0, &SolverConfig::default(), None, |_| Ok(())).unwrap();
    let h = s.history();
    assert_eq!(h.len(), 5);
    assert_eq!(h.back().unwrap().t, s.t());
    let dt = h[1].t - h[0].t;
    for k in 1..5 {
        assert!(((h[k].t - h[k - 1].t) - dt).abs() < 1e-12 * dt);
    }
}

fn record(points: usize, extent: f64, eps: f64, width: f64, t_end: f64, every: f64) -> Trajectory {
    let grid = GridSpec::new(1, extent, points).unwrap();
    let data = InitialData::new(Profile::Gaussian, eps, width);
    let mut s = initial_state(&data, grid, 0.5).unwrap();
    let mut traj = Trajectory::new(grid);
    evolve(&mut s, t_end, &SolverConfig::default(), Some(every), |s| traj.push_state(s)).unwrap();
    traj
}

#[test]
fn scale_by_one_is_identity() {
    let traj = record(121, 10.0, 1e-2, 1.0, 1.0, 0.5);
    let same = scale_solution(&traj, 1.0, *traj.grid()).unwrap();
    for (a, b) in traj.slices().iter().zip(same.slices()) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.phi.values(), b.phi.values());
    }
    let wide = GridSpec::new(1, 20.0, 41).unwrap();
    assert!(matches!(scale_solution(&traj, 1.0, wide), Err(Error::OutOfBounds(_))));
}

fn scaling_mismatch(refine: usize) -> f64 {
    // φ from data (ε f(x), 0); φ_2(t, x) = φ(2t, 2x)/2 has data (ε/2 f(2x), 0).
    let a = 2.0;
    let eps = 0.3;
    let source = record(240 * refine + 1, 12.0, eps, 1.0, 4.0, 0.8);
    let target = GridSpec::new(1, 6.0, 300 * refine + 1).unwrap();
    let scaled = scale_solution(&source, a, target).unwrap();
    let direct = record(300 * refine + 1, 6.0, eps / a, 1.0 / a, 2.0, 0.4);
    let mut worst: f64 = 0.0;
    for (s, d) in scaled.slices().iter().zip(direct.slices()) {
        assert!((s.t - d.t).abs() < 1e-12);
        worst = worst.max(s.phi.combine(1.0, &d.phi, -1.0).unwrap().norm_sup());
    }
    worst
}

#[test]
fn scaled_trajectory_solves_the_equation() {
    let coarse = scaling_mismatch(1);
    let fine = scaling_mismatch(2);
    assert!(coarse < 1e-4 * 0.3, "coarse mismatch {coarse}");
    assert!(coarse / fine > 10.0, "refinement ratio {}", coarse / fine);
}
