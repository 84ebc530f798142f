use subgeo::simulate::{PositiveJumpLaw, SubordinatorSpec};
use subgeo::subordinate::{
    subordinate_curve, subordinate_rate, write_curve_csv, BaseRate, SubordinatedRate, SubordinationMethod,
};

fn rate(base: BaseRate<f64>, spec: SubordinatorSpec, p: f64, method: SubordinationMethod) -> SubordinatedRate<f64> {
    SubordinatedRate { base_rate: base, spec, p, method }
}

#[test]
fn exponential_rate_under_gamma_time_change() {
    let (lambda, a, b) = (0.7, 1.5, 2.0);
    let sr = rate(
        BaseRate::exponential(lambda),
        SubordinatorSpec::Gamma { a, b },
        1.0,
        SubordinationMethod::MonteCarlo { n: 100_000, seed: 1 },
    );
    for t in [0.5, 1.0, 3.0] {
        let v = subordinate_rate(&sr, t).unwrap();
        let exact = (1.0 + lambda / b).powf(-a * t);
        assert!((v.value - exact).abs() < 3.0 * v.se, "t = {t}: {} vs {exact} (se {})", v.value, v.se);
        assert!(!v.heavy_tail);
    }
}

#[test]
fn drift_only_is_a_deterministic_time_change() {
    let base = BaseRate::power_decay(1.2);
    let sr = rate(base.clone(), SubordinatorSpec::DriftOnly { b: 0.4 }, 1.0, SubordinationMethod::MonteCarlo { n: 10, seed: 1 });
    for t in [0.0, 1.0, 7.5] {
        let v = subordinate_rate(&sr, t).unwrap();
        assert_eq!(v.value, base.eval(0.4 * t));
        assert_eq!(v.se, 0.0);
    }
}

#[test]
fn monte_carlo_agrees_with_density_quadrature() {
    let spec = SubordinatorSpec::Gamma { a: 1.0, b: 1.0 };
    let mc = rate(BaseRate::power_decay(1.0), spec, 2.0, SubordinationMethod::MonteCarlo { n: 100_000, seed: 2 });
    let quad = rate(BaseRate::power_decay(1.0), spec, 2.0, SubordinationMethod::DensityQuadrature);
    let (m, q) = (subordinate_rate(&mc, 2.0).unwrap(), subordinate_rate(&quad, 2.0).unwrap());
    let se = (m.se * m.se + q.se * q.se).sqrt();
    assert!((m.value - q.value).abs() < 3.0 * se, "{} vs {} (se {se})", m.value, q.value);
}

#[test]
fn quadrature_handles_small_shape() {
    // shape a·t < 1 puts an integrable singularity at zero
    let spec = SubordinatorSpec::Gamma { a: 0.5, b: 3.0 };
    let quad = rate(BaseRate::exponential(2.0), spec, 1.0, SubordinationMethod::DensityQuadrature);
    for t in [0.1, 0.5, 1.9] {
        let v = subordinate_rate(&quad, t).unwrap();
        let exact = (1.0f64 + 2.0 / 3.0).powf(-0.5 * t);
        assert!((v.value - exact).abs() < 1e-9, "t = {t}: {} vs {exact}", v.value);
    }
}

#[test]
fn higher_moments_dominate() {
    let spec = SubordinatorSpec::CompoundPoisson { drift: 0.2, rate: 1.5, jumps: PositiveJumpLaw::Exponential { rate: 0.5 } };
    let times = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mk = |p| rate(BaseRate::exponential(1.0), spec, p, SubordinationMethod::MonteCarlo { n: 20_000, seed: 3 });
    let one = subordinate_curve(&mk(1.0), &times).unwrap();
    let two = subordinate_curve(&mk(2.0), &times).unwrap();
    for (a, b) in one.iter().zip(&two) {
        assert!(b.value >= a.value);
    }
    // non-increasing base rates stay non-increasing after mixing
    assert!(one.windows(2).all(|w| w[1].value <= w[0].value));
    let mut csv = Vec::new();
    write_curve_csv(&one, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), times.len() + 1);
}

#[test]
fn invalid_inputs_are_rejected() {
    let spec = SubordinatorSpec::Gamma { a: 1.0, b: 1.0 };
    let m = SubordinationMethod::MonteCarlo { n: 100, seed: 1 };
    assert!(subordinate_rate(&rate(BaseRate::exponential(1.0), spec, 0.5, m), 1.0).is_err());
    assert!(subordinate_rate(&rate(BaseRate::exponential(1.0), spec, 1.0, m), -1.0).is_err());
    let negative = BaseRate::new("negative", |_: f64| -1.0);
    assert!(subordinate_rate(&rate(negative, spec, 1.0, m), 1.0).is_err());
}
