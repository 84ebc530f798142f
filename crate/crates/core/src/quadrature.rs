//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The error estimate of a panel is the raw difference between the Kronrod and
//! Gauss values. That is pessimistic for smooth integrands, so a converged
//! result is usually accurate well beyond the requested tolerance.

// Nodes and weights are tabulated to more digits than f64 holds.
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod abscissae (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_intervals: 4000,
        }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
    /// `false` when the interval budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod_panel<T: Scalar, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Result<Panel<T>> {
    let two = T::lit(2.0);
    let center = (a + b) / two;
    let half = (b - a) / two;
    let mut eval = |x: T| -> Result<T> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteIntegrand { abscissa: x.as_f64() })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let sum = eval(center - dx)? + eval(center + dx)?;
        kronrod = kronrod + T::lit(WGK[j]) * sum;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * sum;
        }
    }
    Ok(Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrates `f` over `[a, b]` with the given options.
///
/// `a > b` yields the negated integral. Any non-finite sample aborts with
/// [`Error::NonFiniteIntegrand`] naming the abscissa.
pub fn integrate<T, F>(mut f: F, a: T, b: T, opts: &QuadOptions) -> Result<Quadrature<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            abs_error: T::zero(),
            evaluations: 0,
            converged: true,
        });
    }
    if a > b {
        let q = integrate(f, b, a, opts)?;
        return Ok(Quadrature { value: -q.value, ..q });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Argument("integration bounds must be finite".into()));
    }

    let mut panels = vec![kronrod_panel(&mut f, a, b)?];
    let mut evaluations = 15;
    let floor = T::epsilon() * T::lit(50.0);
    loop {
        let total: T = panels.iter().fold(T::zero(), |s, p| s + p.value);
        let err: T = panels.iter().fold(T::zero(), |s, p| s + p.error);
        let tol = T::lit(opts.abs_tol)
            .max(T::lit(opts.rel_tol) * total.abs())
            .max(floor * total.abs());
        if err <= tol {
            return Ok(Quadrature { value: total, abs_error: err, evaluations, converged: true });
        }
        if panels.len() >= opts.max_intervals {
            return Ok(Quadrature { value: total, abs_error: err, evaluations, converged: false });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) / T::lit(2.0);
        if mid <= p.a || mid >= p.b {
            // panel cannot be split further in this precision
            return Ok(Quadrature { value: total, abs_error: err, evaluations, converged: false });
        }
        panels.push(kronrod_panel(&mut f, p.a, mid)?);
        panels.push(kronrod_panel(&mut f, mid, p.b)?);
        evaluations += 30;
    }
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + s/(1-s)`.
pub fn integrate_to_infinity<T, F>(mut f: F, a: T, opts: &QuadOptions) -> Result<Quadrature<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let one = T::one();
    let mut last_x = a;
    let res = integrate(
        |s: T| {
            let w = one - s;
            let x = a + s / w;
            last_x = x;
            let y = f(x);
            if y == T::zero() {
                T::zero()
            } else {
                y / (w * w)
            }
        },
        T::zero(),
        one,
        opts,
    );
    match res {
        Err(Error::NonFiniteIntegrand { .. }) => {
            Err(Error::NonFiniteIntegrand { abscissa: last_x.as_f64() })
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x: f64| x.powi(5) - 3.0 * x, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!(q.converged);
        assert!((q.value - (64.0 / 6.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn reversed_bounds_negate() {
        let o = QuadOptions::default();
        let q = integrate(|x: f64| x.exp(), 1.0, 0.0, &o).unwrap();
        assert!((q.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let q = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &QuadOptions::default()).unwrap();
        assert!(q.converged);
        assert!((q.value - 2.0).abs() <= q.abs_error.max(2e-8), "{q:?}");
    }

    #[test]
    fn semi_infinite_exponential() {
        let q = integrate_to_infinity(|x: f64| (-x).exp(), 1.0, &QuadOptions::default()).unwrap();
        assert!((q.value - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_sample_names_abscissa() {
        let err = integrate(
            |x: f64| if x > 0.5 { f64::NAN } else { 1.0 },
            0.0,
            1.0,
            &QuadOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::NonFiniteIntegrand { abscissa } => assert!(abscissa > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_precision_stops_at_its_floor() {
        let q = integrate(|x: f32| x.cos(), 0.0, 1.0, &QuadOptions::default()).unwrap();
        assert!(q.converged);
        assert!((q.value - 1f32.sin()).abs() < 1e-6);
    }
}
