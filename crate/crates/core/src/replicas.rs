//! Replica-parallel map-reduce with scheduling-independent results, Monte
//! Carlo estimates, and pilot-based replica budgeting.
//!
//! Replicas are grouped into fixed chunks. Each chunk is reduced sequentially,
//! and chunk results are merged in chunk order, so floating-point sums are
//! bit-identical for any number of worker threads.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CHUNK: u64 = 1 << 12;
const CHUNKS_PER_WAVE: u64 = 512;

pub trait Merge: Send {
    fn merge(&mut self, other: Self);
}

pub fn map_reduce<A, I, K>(replicas: u64, init: I, kernel: K) -> A
where
    A: Merge,
    I: Fn() -> A + Sync,
    K: Fn(u64, &mut A) + Sync,
{
    let chunks = replicas.div_ceil(CHUNK);
    let mut total = init();
    let mut wave_start = 0;
    while wave_start < chunks {
        let wave_end = (wave_start + CHUNKS_PER_WAVE).min(chunks);
        let parts: Vec<A> = (wave_start..wave_end)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                    kernel(r, &mut acc);
                }
                acc
            })
            .collect();
        for p in parts {
            total.merge(p);
        }
        wave_start = wave_end;
    }
    total
}

/// Running sums of a scalar replica value.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAccumulator {
    #[inline]
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Sample standard deviation of one replica value.
    pub fn std_dev(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        ((self.sum_sq - n * m * m).max(0.0) / (n - 1.0)).sqrt()
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.std_dev() / (self.count as f64).sqrt()
        }
    }
}

impl Merge for MeanAccumulator {
    fn merge(&mut self, other: Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

impl<A: Merge> Merge for Vec<A> {
    fn merge(&mut self, other: Self) {
        assert_eq!(self.len(), other.len(), "merging accumulators of different shape");
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

/// A Monte Carlo quantity with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub replicas: u64,
    pub seed: u64,
    pub config_hash: String,
}

impl Estimate {
    pub fn from_accumulator(acc: &MeanAccumulator, seed: u64, config: &str) -> Self {
        Self {
            value: acc.mean(),
            stderr: acc.stderr(),
            replicas: acc.count,
            seed,
            config_hash: digest(config),
        }
    }

    pub fn rel_stderr(&self) -> f64 {
        if self.value == 0.0 {
            f64::INFINITY
        } else {
            self.stderr / self.value.abs()
        }
    }

    /// `|self - other|` in units of the combined standard error.
    pub fn z_distance(&self, other: f64, other_stderr: f64) -> f64 {
        let s = (self.stderr * self.stderr + other_stderr * other_stderr).sqrt();
        if s == 0.0 {
            if self.value == other {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other).abs() / s
        }
    }
}

/// First 16 hex digits of SHA-256.
pub fn digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Fixed(u64),
    /// Size the run from a pilot so the relative standard error lands at `target_rel_stderr`.
    Auto { target_rel_stderr: f64, pilot: u64, max_replicas: u64 },
}

pub const MAX_REPLICAS: u64 = 1_000_000_000;

impl Budget {
    pub fn auto(target_rel_stderr: f64) -> Self {
        Budget::Auto { target_rel_stderr, pilot: 200_000, max_replicas: MAX_REPLICAS }
    }

    /// Replica count for the main run. `pilot` runs the estimator on a
    /// separate stream family with the requested number of replicas.
    pub fn resolve(&self, pilot: impl FnOnce(u64) -> MeanAccumulator) -> Result<u64> {
        match *self {
            Budget::Fixed(n) if n == 0 => Err(Error::InvalidArgument("replicas must be >= 1".into())),
            Budget::Fixed(n) => Ok(n),
            Budget::Auto { target_rel_stderr, pilot: pilot_n, max_replicas } => {
                if !(target_rel_stderr > 0.0) || pilot_n < 2 {
                    return Err(Error::InvalidArgument("auto budget needs target > 0 and pilot >= 2".into()));
                }
                let acc = pilot(pilot_n);
                let mean = acc.mean();
                let sd = acc.std_dev();
                let needed = if mean > 0.0 {
                    (sd / mean / target_rel_stderr).powi(2)
                } else {
                    f64::INFINITY
                };
                if needed > max_replicas as f64 {
                    return Err(Error::BudgetRefused {
                        needed,
                        limit: max_replicas as f64,
                        report: format!(
                            "pilot of {pilot_n} replicas: mean {mean:.6e}, std dev {sd:.6e}, target rel stderr {target_rel_stderr}"
                        ),
                    });
                }
                Ok((needed.ceil() as u64).max(pilot_n))
            }
        }
    }
}
