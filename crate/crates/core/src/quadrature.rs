//! Adaptive Gauss–Kronrod (7/15) quadrature over finite intervals.

use crate::error::{Error, Result};
use crate::scalar::Real;

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
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of a quadrature: value and an upper estimate of the absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
}

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let centre = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(centre);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = h * T::lit(x);
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        kronrod = kronrod + (f1 + f2) * T::lit(w);
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * T::lit(WG[j / 2]);
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]`, bisecting the worst panel until the summed
/// error estimate falls below `abs_tol`. Fails loudly when `max_panels` is hit.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    max_panels: usize,
) -> Result<Quadrature<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(Quadrature { value: T::zero(), abs_error: T::zero(), evaluations: 0 });
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let (total, err) = panels
            .iter()
            .fold((T::zero(), T::zero()), |(s, r), p| (s + p.2, r + p.3));
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= abs_tol {
            return Ok(Quadrature { value: total, abs_error: err, evaluations });
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above tolerance {abs_tol:e} after {max_panels} panels on [{a}, {b}]"
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature(format!("panel [{lo}, {hi}] cannot be bisected further")));
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evaluations += 30;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// Five-point Gauss–Legendre rule on `[a, b]`; exact for polynomials of degree 9.
pub fn gauss_legendre5<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    X.iter().zip(&W).map(|(&x, &w)| w * f(c + h * x)).sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let q = integrate(|x: f64| x * x, 0.0, 3.0, 1e-12, 100).unwrap();
        assert!((q.value - 9.0).abs() < 1e-12);
        let q = integrate(|x: f64| (-x).exp(), 0.0, 10.0, 1e-12, 100).unwrap();
        assert!((q.value - (1.0 - (-10f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let q = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-9, 2000).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn reports_failure_instead_of_silent_value() {
        let r = integrate(|x: f64| (1.0 / x).sin() / x, 1e-12, 1.0, 1e-14, 8);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn single_precision() {
        let q = integrate(|x: f32| x.cos(), 0.0, 1.0, 1e-5, 50).unwrap();
        assert!((q.value - 1f32.sin()).abs() < 1e-5);
    }

    #[test]
    fn gauss_legendre_degree_nine() {
        let v = gauss_legendre5(|x| x.powi(9) + x.powi(4), 0.0, 2.0);
        assert!((v - (1024.0 / 10.0 + 32.0 / 5.0)).abs() < 1e-9);
    }
}
