//! Branching processes in random environment.
//!
//! Each generation draws an offspring law from the environment; its log-mean
//! is the step `X` of the associated walk `S`, so `E[Z_n | environment] =
//! e^{S_n}`. Populations are held as `f64`: offspring sums are sampled exactly
//! while the expected next generation stays below [`EXACT_LIMIT`], and by the
//! normal approximation above it.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::increments::IncrementModel;
use crate::renewal::{RenewalKind, RenewalTable};
use crate::replicas::{map_reduce, Estimate, MeanAccumulator, Merge};
use crate::rng::RandomStream;
use crate::walk::Walker;

/// Expected offspring total above which the normal approximation is used.
pub const EXACT_LIMIT: f64 = (1u64 << 50) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OffspringFamily {
    /// Geometric on `{0, 1, …}` with success probability `p = 1/(1+e^X)`.
    GeometricLink,
    /// Poisson with mean `e^X`.
    PoissonLink,
}

impl OffspringFamily {
    pub fn name(self) -> &'static str {
        match self {
            OffspringFamily::GeometricLink => "geometric",
            OffspringFamily::PoissonLink => "poisson",
        }
    }

    pub fn law(self, x: f64) -> OffspringLaw {
        match self {
            // 1/(1+e^X) without overflow for large |X|
            OffspringFamily::GeometricLink => OffspringLaw::Geometric { p: logistic(-x) },
            OffspringFamily::PoissonLink => OffspringLaw::Poisson { mean: x.exp() },
        }
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// One generation's offspring distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OffspringLaw {
    Geometric { p: f64 },
    Poisson { mean: f64 },
}

impl OffspringLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            OffspringLaw::Geometric { p } => (1.0 - p) / p,
            OffspringLaw::Poisson { mean } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            OffspringLaw::Geometric { p } => (1.0 - p) / (p * p),
            OffspringLaw::Poisson { mean } => mean,
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match *self {
            OffspringLaw::Geometric { p } => p * (1.0 - p).powf(k as f64),
            OffspringLaw::Poisson { mean } => {
                (k as f64 * mean.ln() - mean - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp()
            }
        }
    }

    /// `γ(b) = Σ_{k≥b} k² F({k}) / (Σ_i i F({i}))²`.
    pub fn gamma(&self, b: u64) -> f64 {
        let m = self.mean();
        let second = self.variance() + m * m;
        let head: f64 = (0..b).map(|k| (k * k) as f64 * self.pmf(k)).sum();
        (second - head).max(0.0) / (m * m)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            OffspringLaw::Geometric { p } => Geometric::new(p).expect("p in (0,1]").sample(rng),
            OffspringLaw::Poisson { mean } => poisson(mean, rng) as u64,
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        0.0
    } else {
        Poisson::new(mean).expect("finite positive mean").sample(rng)
    }
}

/// A law on offspring distributions, driven by the associated-walk increment.
#[derive(Clone, Debug)]
pub struct EnvironmentModel {
    pub family: OffspringFamily,
    pub driver: IncrementModel<f64>,
}

impl EnvironmentModel {
    pub fn new(family: OffspringFamily, driver: IncrementModel<f64>) -> Self {
        Self { family, driver }
    }

    pub fn describe(&self) -> String {
        format!("{}-link/{}", self.family.name(), self.driver.describe())
    }

    /// One generation: the offspring law and its log-mean `X`.
    pub fn sample_environment<R: Rng + ?Sized>(&self, rng: &mut R) -> (OffspringLaw, f64) {
        let x = self.driver.sample_f64(rng);
        (self.family.law(x), x)
    }

    /// Monte Carlo `E[(log⁺ γ(b))^{α+ε}]` over environments.
    pub fn gamma_diagnostic(&self, b: u64, eps: f64, samples: u64, stream: &RandomStream) -> Result<Estimate> {
        if samples == 0 {
            return Err(Error::InvalidArgument("samples must be >= 1".into()));
        }
        let power = self.driver.attraction().alpha() + eps;
        let acc = map_reduce(samples, MeanAccumulator::default, |r, acc| {
            let mut rng = stream.replica(r).rng();
            let (law, _) = self.sample_environment(&mut rng);
            acc.push(law.gamma(b).ln().max(0.0).powf(power));
        });
        Ok(Estimate::from_accumulator(&acc, stream.seed(), &format!("gamma|{}|b={b}|eps={eps}", self.describe())))
    }
}

/// Sum of `z` independent offspring counts. Returns the new size and whether
/// the normal approximation was used. Zero is absorbing.
pub fn step_population<R: Rng + ?Sized>(z: f64, law: &OffspringLaw, rng: &mut R) -> (f64, bool) {
    if z <= 0.0 {
        return (0.0, false);
    }
    let mean = z * law.mean();
    if mean > EXACT_LIMIT {
        let sd = (z * law.variance()).sqrt();
        let g: f64 = rng.sample(StandardNormal);
        return ((mean + sd * g).round().max(0.0), true);
    }
    let next = match *law {
        OffspringLaw::Geometric { p } if z <= 16.0 => {
            let g = Geometric::new(p).expect("p in (0,1]");
            (0..z as u64).map(|_| g.sample(rng) as f64).sum()
        }
        OffspringLaw::Geometric { p } => {
            // negative binomial as a gamma mixture of Poisson laws
            let lambda = Gamma::new(z, (1.0 - p) / p).expect("positive shape and scale").sample(rng);
            poisson(lambda, rng)
        }
        OffspringLaw::Poisson { mean: m } => poisson(z * m, rng),
    };
    (next, false)
}

/// Population trajectory in a fixed environment, starting from `z0`.
pub fn run_population<R: Rng + ?Sized>(laws: &[OffspringLaw], z0: f64, rng: &mut R) -> f64 {
    let mut z = z0;
    for law in laws {
        let (next, _) = step_population(z, law, rng);
        assert!(z > 0.0 || next == 0.0, "zero is absorbing");
        z = next;
        if z == 0.0 {
            break;
        }
    }
    z
}

/// One row of a constrained-survival report.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalRow {
    pub n: u64,
    pub k: f64,
    pub j: u64,
    /// Frequency of `{Z_n > 0, S_n ≤ K}`.
    pub raw: Estimate,
    /// `raw / b_n`.
    pub normalized: f64,
    pub normalized_stderr: f64,
    /// Event counts with `τ_n` in `[0, J]`, `(J, n-J]`, `(n-J, n]`.
    pub bucket_counts: [u64; 3],
    /// Mean of `e^{S_{τ_n}} 1{S_n ≤ K}` over the same replicas.
    pub bound: Estimate,
    /// Fraction of replicas that left the exact sampling regime.
    pub capped_frac: f64,
}

impl SurvivalRow {
    pub fn event_count(&self) -> u64 {
        self.bucket_counts.iter().sum()
    }

    pub fn bucket_masses(&self) -> [f64; 3] {
        let r = self.raw.replicas as f64;
        self.bucket_counts.map(|c| c as f64 / r)
    }

    /// Share of the event with `τ_n ∈ (J, n-J]`.
    pub fn middle_share(&self) -> f64 {
        let total = self.event_count();
        if total == 0 {
            0.0
        } else {
            self.bucket_counts[1] as f64 / total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SurvivalReport {
    pub rows: Vec<SurvivalRow>,
}

impl SurvivalReport {
    /// CSV with columns
    /// `n,K,J,raw,raw_stderr,normalized,bucket_left,bucket_mid,bucket_right,capped_frac,replicas,seed`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("n,K,J,raw,raw_stderr,normalized,bucket_left,bucket_mid,bucket_right,capped_frac,replicas,seed\n");
        for r in &self.rows {
            let [l, m, rt] = r.bucket_masses();
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{},{:e},{:e},{:e},{},{},{}",
                r.n, r.k, r.j, r.raw.value, r.raw.stderr, r.normalized, l, m, rt, r.capped_frac, r.raw.replicas, r.raw.seed
            );
        }
        out
    }
}

#[derive(Default)]
struct SurvivalAcc {
    event: MeanAccumulator,
    bound: MeanAccumulator,
    buckets: [u64; 3],
    capped: u64,
}

impl Merge for SurvivalAcc {
    fn merge(&mut self, o: Self) {
        self.event.merge(o.event);
        self.bound.merge(o.bound);
        for i in 0..3 {
            self.buckets[i] += o.buckets[i];
        }
        self.capped += o.capped;
    }
}

/// Joint simulation of environment and population for `n` generations,
/// estimating `P(Z_n > 0, S_n ≤ K)` with its `τ_n` decomposition.
pub fn survival_constrained(
    model: &EnvironmentModel,
    n: u64,
    k: f64,
    replicas: u64,
    j: u64,
    stream: &RandomStream,
) -> Result<SurvivalRow> {
    if n <= 2 * j {
        return Err(Error::InvalidArgument(format!("n = {n} must exceed 2J = {}", 2 * j)));
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be >= 1".into()));
    }
    let acc = map_reduce(replicas, SurvivalAcc::default, |r, acc| {
        let mut rng = stream.replica(r).rng();
        let mut w = Walker::new(0.0f64);
        let mut z = 1.0;
        let mut capped = false;
        for _ in 0..n {
            let (law, x) = model.sample_environment(&mut rng);
            w.push(x);
            if z > 0.0 {
                let (next, c) = step_population(z, &law, &mut rng);
                z = next;
                capped |= c;
            }
        }
        let (tau, s_tau) = w.tau().expect("start is 0");
        let below = *w.position() <= k;
        let hit = below && z > 0.0;
        acc.event.push(hit as u8 as f64);
        acc.bound.push(if below { s_tau.exp() } else { 0.0 });
        if hit {
            let tau = tau as u64;
            let b = if tau <= j {
                0
            } else if tau <= n - j {
                1
            } else {
                2
            };
            acc.buckets[b] += 1;
        }
        acc.capped += capped as u64;
    });
    let config = format!("survival|{}|n={n}|K={k}|J={j}|replicas={replicas}", model.describe());
    let raw = Estimate::from_accumulator(&acc.event, stream.seed(), &config);
    let bn = model.driver.scaling().b(n);
    Ok(SurvivalRow {
        n,
        k,
        j,
        normalized: raw.value / bn,
        normalized_stderr: raw.stderr / bn,
        bound: Estimate::from_accumulator(&acc.bound, stream.seed(), &format!("{config}|bound")),
        bucket_counts: acc.buckets,
        capped_frac: acc.capped as f64 / replicas as f64,
        raw,
    })
}

/// Rows for every `n` of the grid, each from `stream.derive("survival/n=<n>")`.
pub fn survival_report(
    model: &EnvironmentModel,
    n_grid: &[u64],
    k: f64,
    replicas: u64,
    j: u64,
    stream: &RandomStream,
) -> Result<SurvivalReport> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("n_grid is empty".into()));
    }
    let rows = n_grid
        .iter()
        .map(|&n| survival_constrained(model, n, k, replicas, j, &stream.derive(&format!("survival/n={n}"))))
        .collect::<Result<_>>()?;
    Ok(SurvivalReport { rows })
}

/// `P(Z_n > 0)` at every `n` of an increasing grid from one set of runs, so
/// the estimates are nested pathwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve {
    pub n_grid: Vec<u64>,
    pub survival: Vec<Estimate>,
    /// Share of survivors at the last `n` with `S_n < 0`.
    pub negative_share: f64,
    pub capped_frac: f64,
}

impl SurvivalCurve {
    /// Least-squares slope of `log P(Z_n > 0)` against `log n`.
    pub fn log_log_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> =
            self.n_grid.iter().zip(&self.survival).map(|(n, e)| ((*n as f64).ln(), e.value.ln())).collect();
        slope(&pts)
    }
}

pub(crate) fn slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Default)]
struct CurveAcc {
    alive: Vec<MeanAccumulator>,
    survivors_last: u64,
    negative_last: u64,
    capped: u64,
}

impl Merge for CurveAcc {
    fn merge(&mut self, o: Self) {
        if self.alive.is_empty() {
            self.alive = o.alive;
        } else {
            self.alive.merge(o.alive);
        }
        self.survivors_last += o.survivors_last;
        self.negative_last += o.negative_last;
        self.capped += o.capped;
    }
}

pub fn survival_curve(
    model: &EnvironmentModel,
    n_grid: &[u64],
    replicas: u64,
    stream: &RandomStream,
) -> Result<SurvivalCurve> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(Error::InvalidArgument("n_grid must be nonempty, positive and increasing".into()));
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be >= 1".into()));
    }
    let n_max = *n_grid.last().expect("nonempty");
    let m = n_grid.len();
    let acc = map_reduce(
        replicas,
        || CurveAcc { alive: vec![MeanAccumulator::default(); m], ..Default::default() },
        |r, acc| {
            let mut rng = stream.replica(r).rng();
            let mut z = 1.0;
            let mut s = 0.0;
            let mut next = 0;
            let mut capped = false;
            for gen in 1..=n_max {
                let (law, x) = model.sample_environment(&mut rng);
                s += x;
                let (nz, c) = step_population(z, &law, &mut rng);
                z = nz;
                capped |= c;
                if gen == n_grid[next] {
                    acc.alive[next].push((z > 0.0) as u8 as f64);
                    next += 1;
                }
                if z == 0.0 {
                    break;
                }
            }
            while next < m {
                acc.alive[next].push(0.0);
                next += 1;
            }
            if z > 0.0 {
                acc.survivors_last += 1;
                acc.negative_last += (s < 0.0) as u64;
            }
            acc.capped += capped as u64;
        },
    );
    let survival = acc
        .alive
        .iter()
        .zip(n_grid)
        .map(|(a, n)| Estimate::from_accumulator(a, stream.seed(), &format!("survival|{}|n={n}", model.describe())))
        .collect();
    Ok(SurvivalCurve {
        n_grid: n_grid.to_vec(),
        survival,
        negative_share: if acc.survivors_last == 0 {
            0.0
        } else {
            acc.negative_last as f64 / acc.survivors_last as f64
        },
        capped_frac: acc.capped as f64 / replicas as f64,
    })
}

/// `P(Z_n > 0)`.
pub fn survival_unconstrained(model: &EnvironmentModel, n: u64, replicas: u64, stream: &RandomStream) -> Result<Estimate> {
    Ok(survival_curve(model, &[n], replicas, stream)?.survival.remove(0))
}

/// A function of the walk path `R_0..R_n`, possibly randomized.
pub trait PathFunctional: Sync {
    fn eval(&self, path: &[f64], rng: &mut ChaCha8Rng) -> f64;
}

/// `g ≡ 1`.
pub struct One;

impl PathFunctional for One {
    fn eval(&self, _: &[f64], _: &mut ChaCha8Rng) -> f64 {
        1.0
    }
}

/// Survival to the end of the path of a branching process started from
/// `initial` particles whose environment has the path's increments as log-means.
pub struct EmbeddedSurvival {
    pub family: OffspringFamily,
    pub initial: u64,
}

impl PathFunctional for EmbeddedSurvival {
    fn eval(&self, path: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        let laws: Vec<OffspringLaw> = path.windows(2).map(|w| self.family.law(w[1] - w[0])).collect();
        (run_population(&laws, self.initial as f64, rng) > 0.0) as u8 as f64
    }
}

#[derive(Default)]
struct WeightedAcc {
    values: MeanAccumulator,
    /// Σ weight · relative table error at the end point
    table_rel: f64,
    weight: f64,
}

impl Merge for WeightedAcc {
    fn merge(&mut self, o: Self) {
        self.values.merge(o.values);
        self.table_rel += o.table_rel;
        self.weight += o.weight;
    }
}

#[derive(Clone, Copy)]
enum Side {
    Plus,
    Minus,
}

fn h_transform(
    side: Side,
    driver: &IncrementModel<f64>,
    g: &dyn PathFunctional,
    x: f64,
    n: u64,
    replicas: u64,
    table: &RenewalTable,
    stream: &RandomStream,
) -> Result<Estimate> {
    let (kind, ok_start) = match side {
        Side::Plus => (RenewalKind::U, x >= 0.0),
        Side::Minus => (RenewalKind::V, x <= 0.0),
    };
    if table.which != kind {
        return Err(Error::Table(format!("expected a {} table, got {}", kind.name(), table.which.name())));
    }
    if !ok_start {
        return Err(Error::InvalidArgument(format!("start {x} is on the wrong side of 0")));
    }
    if table.tail_fit.is_none() {
        return Err(Error::Table(format!(
            "{} tail fit unavailable: {}",
            kind.name(),
            table.tail_fit_note.as_deref().unwrap_or("none")
        )));
    }
    if n == 0 || replicas == 0 {
        return Err(Error::InvalidArgument("n and replicas must be >= 1".into()));
    }
    let h = |s: f64| match side {
        Side::Plus => table.value_at(s),
        Side::Minus => table.value_at(-s),
    };
    let h_rel = |s: f64| {
        let y = match side {
            Side::Plus => s,
            Side::Minus => -s,
        };
        let v = table.value_at(y).unwrap_or(0.0);
        if v > 0.0 {
            table.stderr_at(y) / v
        } else {
            0.0
        }
    };
    let hx = h(x)?;
    let acc = map_reduce(replicas, WeightedAcc::default, |r, acc| {
        let mut rng = stream.replica(r).rng();
        let mut path = Vec::with_capacity(n as usize + 1);
        path.push(x);
        let mut s = x;
        for _ in 0..n {
            s += driver.sample_f64(&mut rng);
            let killed = match side {
                Side::Plus => s < 0.0,
                Side::Minus => s >= 0.0,
            };
            if killed {
                acc.values.push(0.0);
                return;
            }
            path.push(s);
        }
        let w = h(s).expect("tail fit checked") / hx;
        assert!(w >= 0.0);
        acc.values.push(w * g.eval(&path, &mut rng));
        acc.table_rel += w * h_rel(s);
        acc.weight += w;
    });
    let config = format!("h-transform|{}|x={x}|n={n}|replicas={replicas}", driver.describe());
    let mut est = Estimate::from_accumulator(&acc.values, stream.seed(), &config);
    let table_rel = if acc.weight > 0.0 { acc.table_rel / acc.weight } else { 0.0 };
    let norm_rel = {
        let y = x.abs();
        table.stderr_at(y) / hx
    };
    est.stderr = est.stderr.hypot(est.value.abs() * table_rel.hypot(norm_rel));
    Ok(est)
}

/// `E_x⁺[g] = E_x[g U(S_n); L_n ≥ 0] / U(x)`.
pub fn plus_measure_expectation(
    driver: &IncrementModel<f64>,
    g: &dyn PathFunctional,
    x: f64,
    n: u64,
    replicas: u64,
    u: &RenewalTable,
    stream: &RandomStream,
) -> Result<Estimate> {
    h_transform(Side::Plus, driver, g, x, n, replicas, u, stream)
}

/// `E_x⁻[g] = E_x[g V(S_n); M_n < 0] / V(x)`.
pub fn minus_measure_expectation(
    driver: &IncrementModel<f64>,
    g: &dyn PathFunctional,
    x: f64,
    n: u64,
    replicas: u64,
    v: &RenewalTable,
    stream: &RandomStream,
) -> Result<Estimate> {
    h_transform(Side::Minus, driver, g, x, n, replicas, v, stream)
}

/// `E⁺` means of `W_j = Z_{[j/2]} e^{-(S_{[j/2]} - S_0)}` at the checkpoints,
/// and of `1{W > 10⁻³}` at the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct WTrack {
    pub checkpoints: Vec<u64>,
    pub means: Vec<Estimate>,
    pub positive_share: Estimate,
}

pub fn martingale_w_track(
    model: &EnvironmentModel,
    x: f64,
    checkpoints: &[u64],
    replicas: u64,
    u: &RenewalTable,
    stream: &RandomStream,
) -> Result<WTrack> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("checkpoints must be nonempty and increasing".into()));
    }
    let horizon = (checkpoints.last().expect("nonempty") / 2).max(1);
    let family = model.family;
    let cps: Vec<u64> = checkpoints.to_vec();
    struct Track {
        cps: Vec<u64>,
        family: OffspringFamily,
        slot: usize,
    }
    impl PathFunctional for Track {
        fn eval(&self, path: &[f64], rng: &mut ChaCha8Rng) -> f64 {
            let mut z = 1.0;
            let mut out = Vec::with_capacity(self.cps.len() + 1);
            let mut gen = 0usize;
            for &j in &self.cps {
                let m = (j / 2) as usize;
                while gen < m {
                    let law = self.family.law(path[gen + 1] - path[gen]);
                    z = step_population(z, &law, rng).0;
                    gen += 1;
                }
                out.push(z * (path[0] - path[m]).exp());
            }
            let last = *out.last().expect("nonempty");
            out.push((last > 1e-3) as u8 as f64);
            out[self.slot]
        }
    }
    // Each slot reruns the same replicas, so every checkpoint sees identical paths.
    let mut means = Vec::with_capacity(cps.len());
    for slot in 0..=cps.len() {
        let g = Track { cps: cps.clone(), family, slot };
        means.push(plus_measure_expectation(&model.driver, &g, x, horizon, replicas, u, stream)?);
    }
    let positive_share = means.pop().expect("slot for the positivity share");
    Ok(WTrack { checkpoints: cps, means, positive_share })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo() -> EnvironmentModel {
        EnvironmentModel::new(OffspringFamily::GeometricLink, IncrementModel::gaussian(1.0).unwrap())
    }

    #[test]
    fn link_formulas() {
        assert_eq!(OffspringFamily::GeometricLink.law(0.0), OffspringLaw::Geometric { p: 0.5 });
        let p = OffspringFamily::PoissonLink.law(2f64.ln());
        assert!((p.mean() - 2.0).abs() < 1e-12);
        for x in [-3.0, -0.2, 0.0, 1.7, 40.0] {
            let l = OffspringFamily::GeometricLink.law(x);
            assert!((l.mean().ln() - x).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn gamma_closed_forms() {
        // geometric: γ(1) = E ξ² / m² = (1 + q) / q
        let l = OffspringLaw::Geometric { p: 0.25 };
        assert!((l.gamma(1) - 1.75 / 0.75).abs() < 1e-12);
        let l = OffspringLaw::Poisson { mean: 3.0 };
        assert!((l.gamma(0) - 12.0 / 9.0).abs() < 1e-12);
        let brute: f64 = (3..200).map(|k| (k * k) as f64 * l.pmf(k)).sum::<f64>() / 9.0;
        assert!((l.gamma(3) - brute).abs() < 1e-12);
    }

    #[test]
    fn zero_is_absorbing() {
        let mut rng = RandomStream::from_seed(1).rng();
        assert_eq!(step_population(0.0, &OffspringLaw::Poisson { mean: 5.0 }, &mut rng), (0.0, false));
    }

    #[test]
    fn large_population_sum_has_the_right_mean() {
        let s = RandomStream::from_seed(2);
        let law = OffspringLaw::Geometric { p: 0.5 };
        let acc = map_reduce(2000, MeanAccumulator::default, |r, acc| {
            acc.push(step_population(1e4, &law, &mut s.replica(r).rng()).0);
        });
        // Var of the sum is 2·10⁴ per draw
        assert!((acc.mean() - 1e4).abs() < 3.0 * (2e4f64 / 2000.0).sqrt(), "{}", acc.mean());
        let big = step_population(1e16, &law, &mut s.rng());
        assert!(big.1 && (big.0 / 1e16 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn survival_row_partitions_the_event() {
        let row = survival_constrained(&geo(), 40, 0.0, 20_000, 4, &RandomStream::from_seed(3)).unwrap();
        let total = row.event_count() as f64;
        assert_eq!(row.raw.value, total / 20_000.0);
        assert!(survival_constrained(&geo(), 8, 0.0, 10, 4, &RandomStream::from_seed(3)).is_err());
    }

    #[test]
    fn survival_curve_is_nested() {
        let c = survival_curve(&geo(), &[4, 8, 16], 5000, &RandomStream::from_seed(4)).unwrap();
        assert!(c.survival.windows(2).all(|w| w[1].value <= w[0].value));
    }
}
