use subgeo::drift_geometry::{CoefficientModel, Diffusion};
use subgeo::quadrature::{integrate_to_infinity, QuadOptions};
use subgeo::simulate::{
    euler_maruyama, jump_sde, subordinator_sample, synchronous_pair, JumpLaw, JumpSdeSpec, SimOptions,
    SubordinatorSpec,
};

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[test]
fn frozen_model_gives_constant_paths() {
    let m = CoefficientModel::<f64>::new(1, |_: &[f64], out: &mut [f64]| out[0] = 0.0, Diffusion::Constant { matrix: vec![0.0], cols: 1 }, "frozen")
        .unwrap();
    let ens = euler_maruyama(&m, &[vec![0.7]], &SimOptions { t_end: 1.0, dt: 0.01, n_paths: 4, seed: 1, record_every: 10 })
        .unwrap();
    assert!(ens.states.iter().all(|&x| x == 0.7));
}

#[test]
fn ou_variance_matches_closed_form() {
    let m = CoefficientModel::<f64>::ou(1.0, 1.0, 1).unwrap();
    let n = 10_000;
    let t_end = 5.0;
    let ens = euler_maruyama(&m, &[vec![0.0]], &SimOptions { t_end, dt: 1e-3, n_paths: n, seed: 21, record_every: 0 })
        .unwrap();
    let squares: Vec<f64> = ens.column_at(1, 0).iter().map(|x| x * x).collect();
    let (var, sd) = mean_sd(&squares);
    let exact = (1.0 - (-2.0 * t_end).exp()) / 2.0;
    assert!((var - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "{var} vs {exact}");
}

#[test]
fn linear_drift_coupling_is_deterministic() {
    let theta = 1.0;
    let m = CoefficientModel::<f64>::ou(theta, 1.0, 1).unwrap();
    let dt = 1e-4;
    let opts = SimOptions { t_end: 2.0, dt, n_paths: 16, seed: 3, record_every: 1000 };
    let ens = synchronous_pair(&m, &[1.0], &[-0.5], &opts, None).unwrap();
    for path in 0..ens.n_paths {
        for (k, &t) in ens.times.iter().enumerate() {
            let gap = (ens.state(path, k)[0] - ens.partner_state(path, k).unwrap()[0]).abs();
            // Euler gives exactly (1 − θ dt)^{t/dt}; the continuous limit is e^{−θt}
            let euler = 1.5 * (1.0 - theta * dt).powf(t / dt);
            assert!((gap - euler).abs() < 1e-10, "path {path}, t = {t}: {gap} vs {euler}");
            assert!((gap - 1.5 * (-theta * t).exp()).abs() < 1e-3);
        }
    }
}

#[test]
fn diagonal_start_is_coupled_at_once() {
    let m = CoefficientModel::<f64>::power_drift(2.0, 1.0, 1).unwrap();
    let opts = SimOptions { t_end: 1.0, dt: 1e-2, n_paths: 8, seed: 4, record_every: 10 };
    let ens = synchronous_pair(&m, &[0.3], &[0.3], &opts, None).unwrap();
    assert_eq!(ens.states, ens.partner.clone().unwrap());
    assert!(ens.coupling_times.unwrap().iter().all(|t| *t == Some(0.0)));
}

#[test]
fn coupled_partners_share_increments() {
    let m = CoefficientModel::<f64>::power_drift(2.0, 1.0, 1).unwrap();
    let dt = 1e-3;
    let opts = SimOptions { t_end: 0.5, dt, n_paths: 8, seed: 5, record_every: 1 };
    let ens = synchronous_pair(&m, &[1.0], &[-1.0], &opts, None).unwrap();
    let b = |x: f64| -x.signum() * x * x;
    for path in 0..ens.n_paths {
        for k in 0..ens.n_times() - 1 {
            let (x0, x1) = (ens.state(path, k)[0], ens.state(path, k + 1)[0]);
            let (z0, z1) = (ens.partner_state(path, k).unwrap()[0], ens.partner_state(path, k + 1).unwrap()[0]);
            let xi = (x1 - x0 - b(x0) * dt) / dt.sqrt();
            let zeta = (z1 - z0 - b(z0) * dt) / dt.sqrt();
            assert!((xi - zeta).abs() < 1e-9, "path {path}, step {k}: {xi} vs {zeta}");
        }
    }
}

#[test]
fn quadratic_drift_distance_is_monotone() {
    let m = CoefficientModel::<f64>::power_drift(2.0, 1.0, 1).unwrap();
    let dt = 1e-3;
    let opts = SimOptions { t_end: 5.0, dt, n_paths: 200, seed: 6, record_every: 1 };
    let ens = synchronous_pair(&m, &[1.0], &[-1.0], &opts, None).unwrap();
    for path in 0..ens.n_paths {
        let mut prev = f64::INFINITY;
        for k in 0..ens.n_times() {
            let d = (ens.state(path, k)[0] - ens.partner_state(path, k).unwrap()[0]).abs();
            assert!(d <= prev + dt, "path {path} grew at step {k}");
            prev = prev.min(d);
        }
    }
}

#[test]
fn non_constant_sigma_is_refused_for_coupling() {
    let m = CoefficientModel::<f64>::new(
        1,
        |x: &[f64], out: &mut [f64]| out[0] = -x[0],
        Diffusion::Field { cols: 1, field: std::sync::Arc::new(|x: &[f64], out: &mut [f64]| out[0] = 1.0 + x[0].abs()) },
        "variable",
    )
    .unwrap();
    let opts = SimOptions { t_end: 1.0, dt: 1e-2, n_paths: 2, seed: 1, record_every: 0 };
    assert!(synchronous_pair(&m, &[1.0], &[0.0], &opts, None).is_err());
}

#[test]
fn zero_rate_jump_sde_is_euler_maruyama() {
    let mut spec = JumpSdeSpec::<f64>::clamped_drift_uniform_jumps();
    spec.rate = 0.0;
    let opts = SimOptions { t_end: 2.0, dt: 1e-3, n_paths: 32, seed: 8, record_every: 50 };
    let jumps = jump_sde(&spec, &[vec![2.0]], &opts).unwrap();
    let em = euler_maruyama(&spec.diffusion_model().unwrap(), &[vec![2.0]], &opts).unwrap();
    assert_eq!(
        jumps.states.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        em.states.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn jump_counts_are_poisson() {
    let spec = JumpSdeSpec::<f64>::new(
        1,
        |_: &[f64], out: &mut [f64]| out[0] = 0.0,
        vec![0.0],
        vec![0.0],
        1.0,
        JumpLaw::Constant(vec![1.0]),
        "unit jumps",
    )
    .unwrap();
    let t_end = 3.0;
    let n = 10_000;
    let ens = jump_sde(&spec, &[vec![0.0]], &SimOptions { t_end, dt: 1e-2, n_paths: n, seed: 9, record_every: 0 })
        .unwrap();
    let counts: Vec<f64> = ens.jump_counts.clone().unwrap().iter().map(|&c| c as f64).collect();
    let (mean, sd) = mean_sd(&counts);
    assert!((mean - t_end).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean}");
    // unit jumps, no drift, no noise: the state is the jump count
    let finals = ens.column_at(1, 0);
    assert!(finals.iter().zip(&counts).all(|(x, c)| (x - c).abs() < 1e-12));
}

#[test]
fn gamma_laplace_transform_matches_levy_khintchine_exponent() {
    let (a, b) = (1.5, 2.0);
    let spec = SubordinatorSpec::Gamma { a, b };
    // φ(u) = ∫ (1 − e^{−us}) a e^{−bs}/s ds
    let u = 1.0;
    let phi = integrate_to_infinity(
        |s: f64| if s == 0.0 { a * u } else { -(-u * s).exp_m1() * a * (-b * s).exp() / s },
        0.0,
        &QuadOptions::default(),
    )
    .unwrap()
    .value;
    assert!((phi - spec.bernstein(u)).abs() < 1e-8);
    let t = 1.3;
    let n = 100_000;
    let s: Vec<f64> = subordinator_sample(&spec, t, n, 12).unwrap();
    let vals: Vec<f64> = s.iter().map(|x| (-u * x).exp()).collect();
    let (mean, sd) = mean_sd(&vals);
    let exact = (-t * phi).exp();
    assert!((mean - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {exact}");
}

#[test]
fn ensembles_are_reproducible_across_thread_counts() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let m = CoefficientModel::<f64>::ou(1.0, 1.0, 2).unwrap();
            let opts = SimOptions { t_end: 1.0, dt: 1e-2, n_paths: 100, seed: 13, record_every: 5 };
            euler_maruyama(&m, &[vec![1.0, -1.0]], &opts).unwrap()
        })
    };
    let (a, b) = (run(1), run(8));
    assert_eq!(
        a.states.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.states.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn exports_are_written() {
    let m = CoefficientModel::<f64>::ou(1.0, 1.0, 1).unwrap();
    let ens = euler_maruyama(&m, &[vec![0.0]], &SimOptions { t_end: 1.0, dt: 0.1, n_paths: 5, seed: 1, record_every: 1 })
        .unwrap();
    let mut bin = Vec::new();
    ens.write_binary(&mut bin).unwrap();
    assert!(bin.len() >= ens.states.len() * 8);
    let mut csv = Vec::new();
    ens.write_summary_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), ens.n_times() + 1);
}
