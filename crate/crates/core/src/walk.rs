//! Walk paths and their extremal functionals.
//!
//! `L_n` and `M_n` are taken over `S_1..S_n` (the start is excluded), while
//! `τ_n` is the first index in `0..=n` at which `min(0, L_n)` is attained, so
//! the start `S_0 = 0` does take part there. That convention lives in
//! [`Walker`] and nowhere else.

use rand::Rng;

use crate::error::{Error, Result};
use crate::increments::IncrementModel;
use crate::scalar::{Real, WalkScalar};

/// Streaming path summary with O(1) memory.
#[derive(Clone, Debug)]
pub struct Walker<T> {
    start: T,
    position: T,
    steps: usize,
    min: Option<T>,
    max: Option<T>,
    tau: Option<(usize, T)>,
}

impl<T: WalkScalar> Walker<T> {
    pub fn new(start: T) -> Self {
        let tau = if start == T::zero() { Some((0, T::zero())) } else { None };
        Self { position: start.clone(), start, steps: 0, min: None, max: None, tau }
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        self.position = self.position.clone() + x;
        self.steps += 1;
        let s = &self.position;
        if self.min.as_ref().map_or(true, |m| s < m) {
            self.min = Some(s.clone());
        }
        if self.max.as_ref().map_or(true, |m| s > m) {
            self.max = Some(s.clone());
        }
        if let Some((_, best)) = &self.tau {
            // strict: ties keep the earliest index
            if s < best {
                self.tau = Some((self.steps, s.clone()));
            }
        }
    }

    pub fn position(&self) -> &T {
        &self.position
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn start(&self) -> &T {
        &self.start
    }

    /// `L_k = min(S_1..S_k)`; `None` before the first step.
    pub fn min(&self) -> Option<&T> {
        self.min.as_ref()
    }

    /// `M_k = max(S_1..S_k)`; `None` before the first step.
    pub fn max(&self) -> Option<&T> {
        self.max.as_ref()
    }

    /// `(τ_k, S_{τ_k})`; only defined for walks started at 0.
    pub fn tau(&self) -> Result<(usize, T)> {
        self.tau.clone().ok_or_else(|| Error::TauUndefined(f64::NAN))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSummary<T> {
    pub n: usize,
    pub start: T,
    /// `S_1..S_n` when requested, otherwise empty.
    pub partial_sums: Vec<T>,
    /// `L_n`
    pub min: T,
    /// `M_n`
    pub max: T,
    pub end: T,
    tau: Option<(usize, T)>,
}

impl<T: WalkScalar> PathSummary<T> {
    /// `(τ_n, S_{τ_n})`; rejected for shifted starts.
    pub fn tau(&self) -> Result<(usize, T)> {
        self.tau.clone().ok_or(Error::TauUndefined(f64::NAN))
    }

    fn from_walker(w: Walker<T>, partial_sums: Vec<T>) -> Result<Self> {
        let (Some(min), Some(max)) = (w.min.clone(), w.max.clone()) else {
            return Err(Error::EmptyPath);
        };
        Ok(Self {
            n: w.steps,
            start: w.start,
            partial_sums,
            min,
            max,
            end: w.position,
            tau: w.tau,
        })
    }
}

/// Summarizes the walk `start + x_1 + … + x_k`, keeping the partial sums.
/// Works for any ordered additive scalar, including exact rationals.
pub fn summarize_increments<T: WalkScalar>(start: T, increments: &[T]) -> Result<PathSummary<T>> {
    if increments.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut w = Walker::new(start);
    let mut sums = Vec::with_capacity(increments.len());
    for x in increments {
        w.push(x.clone());
        sums.push(w.position().clone());
    }
    PathSummary::from_walker(w, sums)
}

/// Simulates `n` steps from `start_x`. `τ_n` in the result is only available when `start_x = 0`.
pub fn generate_path<T: Real, R: Rng + ?Sized>(
    model: &IncrementModel<T>,
    n: usize,
    start_x: T,
    rng: &mut R,
) -> Result<PathSummary<T>> {
    if n == 0 {
        return Err(Error::EmptyPath);
    }
    let increments: Vec<T> = (0..n).map(|_| model.sample(rng)).collect();
    summarize_increments(start_x, &increments).map_err(|e| match e {
        Error::TauUndefined(_) => Error::TauUndefined(start_x.as_f64()),
        other => other,
    })
}

/// Time reversal of the increments: `(x_n, …, x_1)`. Partial sums of the result
/// are `S_n - S_{n-k}`.
pub fn reverse_path<T: Clone>(increments: &[T]) -> Vec<T> {
    increments.iter().rev().cloned().collect()
}
