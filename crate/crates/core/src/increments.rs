//! Step laws for the walk: exact stable, Gaussian, logistic and a
//! tail-equivalent family with exact stable-type Pareto tails.

use std::f64::consts::PI;

use rand::Rng;
use rand::distr::Open01;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stable::{ScalingSequence, StableParams};

#[derive(Clone, Debug, PartialEq)]
pub enum IncrementKind<T: Real> {
    ExactStable(StableParams<T>),
    Gaussian { variance: T },
    TailEquivalent(TailEquivalent<T>),
    /// `X = scale · log(U / (1 - U))`; with the geometric offspring link this
    /// makes the success probability of the offspring law uniform.
    Logistic { scale: T },
}

/// Symmetric-bump body on `[-x0, x0]` glued to Pareto tails
/// `P(X > t) = c₊ t^{-α}`, `P(X < -t) = c₋ t^{-α}` for `t ≥ x0`, with the tail
/// constants of the target stable law and the body tilted so that `E X = 0` when α > 1.
#[derive(Clone, Debug, PartialEq)]
pub struct TailEquivalent<T: Real> {
    pub target: StableParams<T>,
    pub crossover: f64,
    right_mass: f64,
    left_mass: f64,
    tilt: f64,
}

impl<T: Real> TailEquivalent<T> {
    pub fn new(target: StableParams<T>, crossover: f64) -> Result<Self> {
        let (cp, cm) = target.tail_constants().ok_or_else(|| {
            Error::InvalidArgument("tail-equivalent family needs alpha < 2".into())
        })?;
        if !(crossover > 0.0 && crossover.is_finite()) {
            return Err(Error::InvalidArgument(format!("crossover must be > 0, got {crossover}")));
        }
        let a = target.alpha().as_f64();
        let (cp, cm) = (cp.as_f64(), cm.as_f64());
        let right_mass = cp * crossover.powf(-a);
        let left_mass = cm * crossover.powf(-a);
        let body = 1.0 - right_mass - left_mass;
        if body <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "crossover {crossover} leaves no mass for the body; increase it"
            )));
        }
        // Body on u = x/x0 has density ∝ (1-u²)²(1+su) and mean s/7.
        let tilt = if a > 1.0 {
            let tail_mean = a * (cp - cm) * crossover.powf(1.0 - a) / (a - 1.0);
            -7.0 * tail_mean / (body * crossover)
        } else {
            0.0
        };
        if tilt.abs() > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "centering needs body tilt {tilt:.3} outside [-1, 1]; change the crossover"
            )));
        }
        Ok(Self { target, crossover, right_mass, left_mass, tilt })
    }

    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    /// `P(X > t)` for `t ≥ crossover`, `P(X < -t)` via `left`.
    pub fn tail(&self, t: f64, left: bool) -> f64 {
        assert!(t >= self.crossover, "closed-form tail only beyond the crossover");
        let a = self.target.alpha().as_f64();
        let m = if left { self.left_mass } else { self.right_mass };
        m * (t / self.crossover).powf(-a)
    }

    fn pdf(&self, x: f64) -> f64 {
        let a = self.target.alpha().as_f64();
        let x0 = self.crossover;
        if x > x0 {
            a * self.right_mass / x0 * (x / x0).powf(-a - 1.0)
        } else if x < -x0 {
            a * self.left_mass / x0 * (-x / x0).powf(-a - 1.0)
        } else {
            let u = x / x0;
            let body = 1.0 - self.right_mass - self.left_mass;
            body * 15.0 / 16.0 * (1.0 - u * u).powi(2) * (1.0 + self.tilt * u) / x0
        }
    }

    #[inline]
    fn sample_f64<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.target.alpha().as_f64();
        let r: f64 = rng.sample(Open01);
        if r < self.right_mass {
            return self.crossover * (r / self.right_mass).powf(-1.0 / a);
        }
        let r = r - self.right_mass;
        if r < self.left_mass {
            return -self.crossover * (r / self.left_mass).powf(-1.0 / a);
        }
        let bound = 1.0 + self.tilt.abs();
        loop {
            let u: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let v: f64 = rng.random::<f64>() * bound;
            if v <= (1.0 - u * u).powi(2) * (1.0 + self.tilt * u) {
                return self.crossover * u;
            }
        }
    }
}

/// A sampleable step law tagged with the stable law it is attracted to and
/// the matching norming sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementModel<T: Real> {
    kind: IncrementKind<T>,
    attraction: StableParams<T>,
    scaling: ScalingSequence<T>,
}

impl<T: Real> IncrementModel<T> {
    pub fn exact_stable(params: StableParams<T>) -> Self {
        let scaling = params.scaling();
        Self { attraction: params.clone(), kind: IncrementKind::ExactStable(params), scaling }
    }

    /// Centered normal steps; attracted to `(2, 0, σ²/2)`.
    pub fn gaussian(variance: T) -> Result<Self> {
        if !(variance > T::zero() && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance must be > 0, got {variance}")));
        }
        let attraction = StableParams::new(T::lit(2.0), T::zero(), variance / T::lit(2.0))?;
        Ok(Self { scaling: attraction.scaling(), attraction, kind: IncrementKind::Gaussian { variance } })
    }

    pub fn tail_equivalent(target: StableParams<T>, crossover: f64) -> Result<Self> {
        let te = TailEquivalent::new(target.clone(), crossover)?;
        Ok(Self { scaling: target.scaling(), attraction: target, kind: IncrementKind::TailEquivalent(te) })
    }

    /// Logistic steps of the given scale; variance `π² s² / 3`.
    pub fn logistic(scale: T) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be > 0, got {scale}")));
        }
        let s = scale.as_f64();
        let attraction = StableParams::new(T::lit(2.0), T::zero(), T::lit(PI * PI * s * s / 6.0))?;
        Ok(Self { scaling: attraction.scaling(), attraction, kind: IncrementKind::Logistic { scale } })
    }

    pub fn kind(&self) -> &IncrementKind<T> {
        &self.kind
    }

    pub fn attraction(&self) -> &StableParams<T> {
        &self.attraction
    }

    pub fn scaling(&self) -> ScalingSequence<T> {
        self.scaling
    }

    /// Short human-readable description used in reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            IncrementKind::ExactStable(p) => {
                format!("exact_stable(alpha={},beta={},c={})", p.alpha(), p.beta(), p.c())
            }
            IncrementKind::Gaussian { variance } => format!("gaussian(sigma2={variance})"),
            IncrementKind::TailEquivalent(te) => format!(
                "tail_equivalent(alpha={},beta={},c={},crossover={})",
                te.target.alpha(),
                te.target.beta(),
                te.target.c(),
                te.crossover
            ),
            IncrementKind::Logistic { scale } => format!("logistic(scale={scale})"),
        }
    }

    /// Density of one step.
    pub fn pdf(&self, x: T) -> Result<T> {
        let xf = x.as_f64();
        Ok(match &self.kind {
            IncrementKind::ExactStable(p) => p.density(x)?.value,
            IncrementKind::Gaussian { variance } => {
                let v = variance.as_f64();
                T::lit((-xf * xf / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
            }
            IncrementKind::TailEquivalent(te) => T::lit(te.pdf(xf)),
            IncrementKind::Logistic { scale } => {
                let s = scale.as_f64();
                let e = (-xf.abs() / s).exp();
                T::lit(e / (s * (1.0 + e) * (1.0 + e)))
            }
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        T::lit(self.sample_f64(rng))
    }

    #[inline]
    pub fn sample_f64<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            IncrementKind::Gaussian { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                variance.as_f64().sqrt() * z
            }
            IncrementKind::ExactStable(p) => p.sample_f64(rng),
            IncrementKind::TailEquivalent(te) => te.sample_f64(rng),
            IncrementKind::Logistic { scale } => {
                let u: f64 = rng.sample(Open01);
                scale.as_f64() * (u / (1.0 - u)).ln()
            }
        }
    }
}

pub fn sample_increment<T: Real, R: Rng + ?Sized>(model: &IncrementModel<T>, rng: &mut R) -> T {
    model.sample(rng)
}
