//! Strictly stable laws with characteristic function
//! `exp{-c|w|^α (1 - iβ sign(w) tan(πα/2))}`: admissibility, density and CDF by
//! Fourier inversion, positivity parameter, exact sampling, norming sequences.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand::distr::Open01;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::scalar::Real;

/// Parameters `(α, β, c)` of a stable law in the admissible set
/// `{α ∈ (0,2) \ {1}, |β| < 1} ∪ {α = 1, β = 0} ∪ {α = 2, β = 0}`, `c > 0`.
#[derive(Clone, Debug)]
pub struct StableParams<T: Real> {
    alpha: T,
    beta: T,
    c: T,
    cms: Cms,
    g0: OnceLock<Result<T>>,
}

/// Constants of the Chambers–Mallows–Stuck transform, kept in f64.
#[derive(Clone, Copy, Debug)]
struct Cms {
    shift: f64,
    stretch: f64,
    scale: f64,
}

impl<T: Real> PartialEq for StableParams<T> {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.beta == other.beta && self.c == other.c
    }
}

/// Inverted density or distribution value with its declared error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inverted<T> {
    pub value: T,
    pub abs_error: T,
}

/// Norming sequences `a_n = n^{1/α}` and `b_n = 1/(a_n n)` (slowly varying part ≡ 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingSequence<T> {
    inv_alpha: T,
}

impl<T: Real> ScalingSequence<T> {
    pub fn a(&self, n: u64) -> T {
        T::lit(n as f64).powf(self.inv_alpha)
    }

    pub fn b(&self, n: u64) -> T {
        T::one() / (self.a(n) * T::lit(n as f64))
    }

    pub fn inv_alpha(&self) -> T {
        self.inv_alpha
    }
}

impl<T: Real> StableParams<T> {
    pub fn new(alpha: T, beta: T, c: T) -> Result<Self> {
        let reject = |rule| Error::Inadmissible {
            alpha: alpha.as_f64(),
            beta: beta.as_f64(),
            c: c.as_f64(),
            rule,
        };
        let two = T::lit(2.0);
        if !(alpha > T::zero() && alpha <= two) {
            return Err(reject("alpha must lie in (0, 2]"));
        }
        if !(beta.abs() < T::one()) {
            return Err(reject("|beta| must be < 1"));
        }
        if alpha == T::one() && beta != T::zero() {
            return Err(reject("alpha = 1 requires beta = 0"));
        }
        if alpha == two && beta != T::zero() {
            return Err(reject("alpha = 2 requires beta = 0"));
        }
        if !(c > T::zero() && c.is_finite()) {
            return Err(reject("c must be > 0"));
        }
        let (a, b, cf) = (alpha.as_f64(), beta.as_f64(), c.as_f64());
        let t = if b == 0.0 { 0.0 } else { b * (PI * a / 2.0).tan() };
        let cms = Cms {
            shift: t.atan() / a,
            stretch: (1.0 + t * t).powf(1.0 / (2.0 * a)),
            scale: cf.powf(1.0 / a),
        };
        Ok(Self { alpha, beta, c, cms, g0: OnceLock::new() })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn c(&self) -> T {
        self.c
    }

    /// The law of `-Y`: parameters `(α, -β, c)`.
    pub fn mirrored(&self) -> Self {
        Self::new(self.alpha, -self.beta, self.c).expect("mirror of admissible params is admissible")
    }

    pub fn is_symmetric(&self) -> bool {
        self.beta == T::zero()
    }

    /// `c β tan(πα/2)`, the coefficient of the phase of the characteristic function.
    fn phase_coefficient(&self) -> T {
        if self.beta == T::zero() {
            T::zero()
        } else {
            self.c * self.beta * (T::PI() * self.alpha / T::lit(2.0)).tan()
        }
    }

    /// Declared absolute error target of inverted densities and CDFs.
    pub fn inversion_target() -> T {
        T::lit(1e-10).max(T::epsilon() * T::lit(500.0))
    }

    pub fn density(&self, x: T) -> Result<Inverted<T>> {
        self.invert(x, Inversion::Density)
    }

    pub fn cdf(&self, x: T) -> Result<Inverted<T>> {
        self.invert(x, Inversion::Cdf)
    }

    /// `g_{α,β}(0)`, computed once per parameter value.
    pub fn density_at_zero(&self) -> Result<T> {
        self.g0
            .get_or_init(|| self.density(T::zero()).map(|d| d.value))
            .clone()
    }

    /// `ρ = P(Y_1 > 0)`.
    pub fn positivity_rho(&self) -> Result<T> {
        let f0 = self.cdf(T::zero())?;
        Ok(T::one() - f0.value)
    }

    /// Right/left tail constants: `P(Y > x) ~ c₊ x^{-α}`, `P(Y < -x) ~ c₋ x^{-α}` (α < 2).
    pub fn tail_constants(&self) -> Option<(T, T)> {
        if self.alpha >= T::lit(2.0) {
            return None;
        }
        let a = self.alpha.as_f64();
        let k = self.c.as_f64() * statrs::function::gamma::gamma(a) * (PI * a / 2.0).sin() / PI;
        let b = self.beta.as_f64();
        Some((T::lit(k * (1.0 + b)), T::lit(k * (1.0 - b))))
    }

    pub fn scaling(&self) -> ScalingSequence<T> {
        ScalingSequence { inv_alpha: T::one() / self.alpha }
    }

    /// One exact draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        T::lit(self.sample_f64(rng))
    }

    #[inline]
    pub(crate) fn sample_f64<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha.as_f64();
        if a == 2.0 {
            let z: f64 = rng.sample(StandardNormal);
            return (2.0 * self.c.as_f64()).sqrt() * z;
        }
        let u: f64 = rng.sample(Open01);
        if a == 1.0 {
            return self.cms.scale * (PI * (u - 0.5)).tan();
        }
        let v = PI * (u - 0.5);
        let w: f64 = rng.sample(Exp1);
        let Cms { shift, stretch, scale } = self.cms;
        let arg = a * (v + shift);
        let x = stretch * arg.sin() / v.cos().powf(1.0 / a)
            * ((v - arg).cos() / w).powf((1.0 - a) / a);
        scale * x
    }

    fn invert(&self, x: T, what: Inversion) -> Result<Inverted<T>> {
        let alpha = self.alpha;
        let c = self.c;
        let k = self.phase_coefficient();
        let one = T::one();
        let target = Self::inversion_target();
        // For α < 1 integrate in t = w^α, where the integrand is smooth and decays like e^{-ct}.
        let in_t = alpha < one;
        let p = one / alpha;

        let integrand = |u: T| -> T {
            if in_t {
                let w = u.powf(p);
                let phase = k * u - w * x;
                match what {
                    Inversion::Density => p * u.powf(p - one) * (-c * u).exp() * phase.cos(),
                    Inversion::Cdf => p * (-c * u).exp() * phase.sin() / u,
                }
            } else {
                let wa = u.powf(alpha);
                let phase = k * wa - u * x;
                match what {
                    Inversion::Density => (-c * wa).exp() * phase.cos(),
                    Inversion::Cdf => (-c * wa).exp() * phase.sin() / u,
                }
            }
        };
        // Bound on |∫_U^∞ integrand| for U ≥ 1.
        let tail_bound = |upper: T| -> T {
            if in_t {
                match what {
                    Inversion::Density => {
                        p * upper.powf(p - one) * (-c * upper).exp() * T::lit(2.0) / c
                    }
                    Inversion::Cdf => p * (-c * upper).exp() / c,
                }
            } else {
                (-c * upper.powf(alpha)).exp() / (c * alpha * upper.powf(alpha - one))
            }
        };
        let frequency = |u: T| -> T {
            if in_t {
                k.abs() + p * u.powf(p - one) * x.abs()
            } else {
                k.abs() * alpha * u.powf(alpha - one) + x.abs()
            }
        };

        let tail_tol = target * T::lit(0.05);
        let mut upper = one;
        let mut guard = 0;
        while tail_bound(upper) > tail_tol || (in_t && upper < T::lit(2.0) * (p - one) / c) {
            upper = upper * T::lit(2.0);
            guard += 1;
            if guard > 200 {
                return Err(Error::Quadrature("could not bound the inversion tail".into()));
            }
        }

        // panels double in width past 1, capped at a few oscillations each
        let mut edges = vec![T::zero()];
        let mut lo = T::zero();
        let eight_pi = T::lit(8.0 * PI);
        while lo < upper {
            let mut width = if lo < one { one - lo } else { lo };
            let f = frequency(lo + width).max(frequency(lo));
            if f > T::zero() {
                width = width.min(eight_pi / f);
            }
            let hi = (lo + width).min(upper);
            edges.push(hi);
            lo = hi;
            if edges.len() > 200_000 {
                return Err(Error::Quadrature("too many inversion panels".into()));
            }
        }
        let panels = edges.len() - 1;
        let panel_tol = target * T::lit(0.9) / T::lit(panels as f64);
        let mut sum = T::zero();
        let mut err = tail_bound(upper);
        for pair in edges.windows(2) {
            let q = integrate(integrand, pair[0], pair[1], panel_tol, 4000)?;
            sum = sum + q.value;
            err = err + q.abs_error;
        }
        let inv_pi = T::FRAC_1_PI();
        let (value, abs_error) = match what {
            Inversion::Density => (sum * inv_pi, err * inv_pi),
            Inversion::Cdf => (T::lit(0.5) - sum * inv_pi, err * inv_pi),
        };
        if !(abs_error <= target) {
            return Err(Error::Quadrature(format!(
                "inversion error {abs_error:e} exceeds target {target:e} at x = {x}"
            )));
        }
        Ok(Inverted { value, abs_error })
    }
}

#[derive(Clone, Copy)]
enum Inversion {
    Density,
    Cdf,
}

pub fn make_stable_params<T: Real>(alpha: T, beta: T, c: T) -> Result<StableParams<T>> {
    StableParams::new(alpha, beta, c)
}

pub fn density<T: Real>(params: &StableParams<T>, x: T) -> Result<Inverted<T>> {
    params.density(x)
}

pub fn density_at_zero<T: Real>(params: &StableParams<T>) -> Result<T> {
    params.density_at_zero()
}

pub fn positivity_rho<T: Real>(params: &StableParams<T>) -> Result<T> {
    params.positivity_rho()
}

pub fn sample_stable<T: Real, R: Rng + ?Sized>(params: &StableParams<T>, rng: &mut R) -> T {
    params.sample(rng)
}

pub fn scaling_for<T: Real>(params: &StableParams<T>) -> ScalingSequence<T> {
    params.scaling()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn p(a: f64, b: f64, c: f64) -> StableParams<f64> {
        StableParams::new(a, b, c).unwrap()
    }

    #[test]
    fn admissible_set() {
        assert!(StableParams::new(2.0, 0.0, 0.5).is_ok());
        assert!(StableParams::new(1.5, 0.4, 1.0).is_ok());
        assert!(StableParams::new(1.0, 0.0, 1.0).is_ok());
        for (a, b, c) in [
            (1.0, 0.3, 1.0),
            (2.0, 0.1, 1.0),
            (0.0, 0.0, 1.0),
            (2.1, 0.0, 1.0),
            (1.5, 1.0, 1.0),
            (1.5, -1.0, 1.0),
            (1.5, 0.0, 0.0),
            (1.5, 0.0, -1.0),
            (f64::NAN, 0.0, 1.0),
        ] {
            assert!(StableParams::new(a, b, c).is_err(), "({a}, {b}, {c}) accepted");
        }
        let e = StableParams::new(1.0, 0.3, 1.0).unwrap_err();
        assert!(e.to_string().contains("alpha = 1 requires beta = 0"));
    }

    #[test]
    fn closed_form_densities_at_zero() {
        let g = p(2.0, 0.0, 0.5).density_at_zero().unwrap();
        assert!((g - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-10);
        let g = p(1.0, 0.0, 1.0).density_at_zero().unwrap();
        assert!((g - 1.0 / PI).abs() < 1e-10);
        let g = p(0.75, 0.0, 1.0).density_at_zero().unwrap();
        assert!((g - gamma(1.0 + 4.0 / 3.0) / PI).abs() < 1e-9);
    }

    #[test]
    fn gaussian_density_away_from_zero() {
        let d = p(2.0, 0.0, 0.5).density(1.3).unwrap();
        let exact = (-1.3f64 * 1.3 / 2.0).exp() / (2.0 * PI).sqrt();
        assert!((d.value - exact).abs() < 1e-10);
        assert!(d.abs_error <= 1e-10);
    }

    #[test]
    fn cauchy_cdf() {
        let f = p(1.0, 0.0, 2.0).cdf(3.0).unwrap();
        assert!((f.value - (0.5 + (1.5f64).atan() / PI)).abs() < 1e-10);
    }

    #[test]
    fn mirror_reflects_density() {
        let a = p(1.3, 0.6, 1.0);
        let b = a.mirrored();
        let x = 0.7;
        let da = a.density(x).unwrap().value;
        let db = b.density(-x).unwrap().value;
        assert!((da - db).abs() < 1e-10);
    }

    #[test]
    fn scaling_examples() {
        let s = p(2.0, 0.0, 1.0).scaling();
        assert_eq!(s.a(1), 1.0);
        assert_eq!(s.b(1), 1.0);
        assert!((s.a(100) - 10.0).abs() < 1e-12);
        assert!((s.b(100) - 1e-3).abs() < 1e-15);
        let s = p(0.5, 0.0, 1.0).scaling();
        assert_eq!(s.a(16), 256.0);
        assert_eq!(s.b(16), 1.0 / 4096.0);
    }

    #[test]
    fn single_precision_density() {
        let q = StableParams::<f32>::new(2.0, 0.0, 0.5).unwrap();
        let g = q.density_at_zero().unwrap();
        assert!((g - 0.398_942_3).abs() < 1e-5);
    }

    #[test]
    fn tail_constants_cauchy() {
        let (cp, cm) = p(1.0, 0.0, 1.0).tail_constants().unwrap();
        assert!((cp - 1.0 / PI).abs() < 1e-12 && (cm - 1.0 / PI).abs() < 1e-12);
        assert!(p(2.0, 0.0, 1.0).tail_constants().is_none());
    }
}
