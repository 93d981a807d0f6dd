//! Monte Carlo renewal functions of the ladder structure:
//!
//! * `U(x) = 1{x ≥ 0} + Σ_{n≥1} P(S_n ≥ -x, M_n < 0)`
//! * `V(x) = 1{x < 0} + Σ_{n≥1} P(S_n < -x, L_n ≥ 0)`
//! * `V₀(x) = 1{x ≤ 0} + Σ_{n≥1} P(S_n ≤ -x, L_n ≥ 0)`
//!
//! Each series is the expected number of visits of a stopped path: for `U`,
//! visits to `[-x, 0)` before the first nonnegative time; for `V`, `V₀`,
//! visits to `[0, y)` resp. `[0, y]` before the first negative time. One path
//! serves the whole grid. Tables are indexed by the magnitude `y ≥ 0` of the
//! argument: a `U` table holds `U(y)`, a `V`/`V₀` table holds `V(-y)`/`V₀(-y)`.
//! At `y = 0` the `V` table holds the left limit `V(-0) = 1`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::increments::IncrementModel;
use crate::replicas::{map_reduce, Merge};
use crate::rng::RandomStream;

/// Atom constant of the ascending ladder process. Zero for every shipped
/// family: all of them are absolutely continuous, so `V₀(0) = 1/(1-ζ) = 1`.
pub const ZETA: f64 = 0.0;

/// Largest accepted gap between a tail-fit exponent and its theoretical value.
pub const TAIL_EXPONENT_TOLERANCE: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RenewalKind {
    U,
    V,
    V0,
}

impl RenewalKind {
    pub fn name(self) -> &'static str {
        match self {
            RenewalKind::U => "U",
            RenewalKind::V => "V",
            RenewalKind::V0 => "V0",
        }
    }
}

/// `value(y) ≈ coefficient · y^exponent` beyond the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailFit {
    pub exponent: f64,
    pub coefficient: f64,
}

impl TailFit {
    pub fn eval(&self, y: f64) -> f64 {
        self.coefficient * y.powf(self.exponent)
    }
}

/// Integration weight for [`RenewalTable::integral`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Unit,
    ExpDecay(f64),
}

/// A quantity derived from renewal tables, with its propagated standard error
/// and truncation bias bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagated {
    pub value: f64,
    pub stderr: f64,
    pub truncation_bound: f64,
}

impl Propagated {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, truncation_bound: 0.0 }
    }

    pub fn scale(self, k: f64) -> Self {
        Self { value: self.value * k, stderr: self.stderr * k.abs(), truncation_bound: self.truncation_bound * k.abs() }
    }

    pub fn rel_stderr(&self) -> f64 {
        if self.value == 0.0 { 0.0 } else { self.stderr / self.value.abs() }
    }

    /// Product of factors estimated from independent tables: relative errors
    /// add in quadrature, relative bias bounds add linearly.
    pub fn product(self, other: Self) -> Self {
        let value = self.value * other.value;
        let rel = self.rel_stderr().hypot(other.rel_stderr());
        let rb = |p: &Self| if p.value == 0.0 { 0.0 } else { p.truncation_bound / p.value.abs() };
        Self { value, stderr: rel * value.abs(), truncation_bound: (rb(&self) + rb(&other)) * value.abs() }
    }

    /// Fails when the truncation bias bound exceeds the standard error.
    pub fn check_truncation(&self, what: &str) -> Result<()> {
        if self.truncation_bound > self.stderr && self.truncation_bound > 0.0 {
            return Err(Error::Table(format!(
                "{what}: truncation bias bound {:.3e} exceeds stderr {:.3e}; raise n_max",
                self.truncation_bound, self.stderr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenewalTable {
    pub which: RenewalKind,
    /// Argument magnitudes, strictly increasing, starting at 0.
    pub grid: Vec<f64>,
    /// Replica means before isotonic projection.
    pub raw: Vec<f64>,
    /// Nondecreasing values used by every evaluator.
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: u64,
    pub n_max: u64,
    /// Fraction of replicas still running at `n_max`.
    pub censor_frac: f64,
    /// Per-point bound on the bias from stopping at `n_max`.
    pub truncation_bound: Vec<f64>,
    pub tail_fit: Option<TailFit>,
    /// Why no tail fit is available, when it is not.
    pub tail_fit_note: Option<String>,
}

impl RenewalTable {
    /// A table with known values and zero error, e.g. for closed-form checks.
    pub fn synthetic(which: RenewalKind, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::Table("grid and values differ in length".into()));
        }
        let n = grid.len();
        Ok(Self {
            which,
            raw: values.clone(),
            values: isotonic(&values),
            grid,
            stderr: vec![0.0; n],
            replicas: 0,
            n_max: 0,
            censor_frac: 0.0,
            truncation_bound: vec![0.0; n],
            tail_fit: None,
            tail_fit_note: Some("not fitted".into()),
        })
    }

    pub fn with_tail_fit(mut self, fit: TailFit) -> Self {
        self.tail_fit = Some(fit);
        self.tail_fit_note = None;
        self
    }

    /// Copy with `delta` added pointwise; the tail fit keeps its exponent and
    /// is rescaled to the relative shift at the last grid point.
    pub fn shifted(&self, delta: &[f64]) -> Self {
        let mut t = self.clone();
        for (v, d) in t.values.iter_mut().zip(delta) {
            *v += d;
        }
        let last = t.values.len() - 1;
        if let Some(fit) = t.tail_fit.as_mut() {
            if self.values[last] > 0.0 {
                fit.coefficient *= t.values[last] / self.values[last];
            }
        }
        t
    }

    pub fn max_argument(&self) -> f64 {
        *self.grid.last().expect("validated grid is nonempty")
    }

    /// Least-squares fit of `log value` on `log y` over the top decade of the
    /// grid. With `expected`, the exponent must lie within
    /// [`TAIL_EXPONENT_TOLERANCE`] of it.
    pub fn fit_tail(&self, expected: Option<f64>) -> Result<TailFit> {
        let top = self.max_argument();
        let pts: Vec<(f64, f64)> = self
            .grid
            .iter()
            .zip(&self.values)
            .filter(|(y, v)| **y >= top / 10.0 && **y > 0.0 && **v > 0.0)
            .map(|(y, v)| (y.ln(), v.ln()))
            .collect();
        if pts.len() < 3 {
            return Err(Error::Table(format!("tail fit needs 3 points in [{}, {}]", top / 10.0, top)));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx <= 0.0 {
            return Err(Error::Table("degenerate tail-fit abscissae".into()));
        }
        let exponent = sxy / sxx;
        let fit = TailFit { exponent, coefficient: (my - exponent * mx).exp() };
        if let Some(e) = expected {
            if (exponent - e).abs() > TAIL_EXPONENT_TOLERANCE {
                return Err(Error::Table(format!(
                    "{} tail exponent {exponent:.3} is more than {TAIL_EXPONENT_TOLERANCE} from {e:.3}",
                    self.which.name()
                )));
            }
        }
        Ok(fit)
    }

    fn tail(&self) -> Result<TailFit> {
        self.tail_fit.ok_or_else(|| {
            Error::Table(format!(
                "{} tail fit unavailable: {}",
                self.which.name(),
                self.tail_fit_note.as_deref().unwrap_or("none")
            ))
        })
    }

    fn locate(&self, y: f64) -> usize {
        // index i with grid[i] <= y < grid[i+1]
        self.grid.partition_point(|g| *g <= y).saturating_sub(1).min(self.grid.len() - 2)
    }

    /// Value at magnitude `y`: linear interpolation inside the grid, tail fit beyond.
    pub fn value_at(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Table(format!("argument magnitude must be >= 0, got {y}")));
        }
        let top = self.max_argument();
        if y > top {
            return Ok(self.tail()?.eval(y));
        }
        let i = self.locate(y);
        let (y0, y1) = (self.grid[i], self.grid[i + 1]);
        let t = (y - y0) / (y1 - y0);
        Ok(self.values[i] * (1.0 - t) + self.values[i + 1] * t)
    }

    pub fn stderr_at(&self, y: f64) -> f64 {
        self.interpolate_column(&self.stderr, y)
    }

    pub fn truncation_at(&self, y: f64) -> f64 {
        self.interpolate_column(&self.truncation_bound, y)
    }

    /// Value, standard error and truncation bound at a single point.
    pub fn point(&self, y: f64) -> Result<Propagated> {
        Ok(Propagated { value: self.value_at(y)?, stderr: self.stderr_at(y), truncation_bound: self.truncation_at(y) })
    }

    // Beyond the grid the column keeps the relative size it has at the last point.
    fn interpolate_column(&self, col: &[f64], y: f64) -> f64 {
        let top = self.max_argument();
        let last = self.grid.len() - 1;
        if y >= top {
            let v = self.values[last];
            return if v > 0.0 { col[last] / v * self.value_at(y).unwrap_or(v) } else { col[last] };
        }
        let i = self.locate(y.max(0.0));
        let t = (y - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        col[i] * (1.0 - t) + col[i + 1] * t
    }

    /// `∫_0^upper weight(z) value(z) dz` with piecewise-linear interpolation on
    /// the grid; beyond the grid the tail fit is integrated in closed form.
    /// Standard errors are propagated as if fully correlated.
    pub fn integral(&self, weight: Weight, upper: f64) -> Result<Propagated> {
        if let Weight::ExpDecay(theta) = weight {
            if !(theta > 0.0) {
                return Err(Error::InvalidArgument(format!("theta must be > 0, got {theta}")));
            }
        }
        if upper.is_infinite() && weight == Weight::Unit {
            return Err(Error::InvalidArgument("unit weight needs a finite upper limit".into()));
        }
        if !(upper >= 0.0) {
            return Err(Error::InvalidArgument(format!("upper limit must be >= 0, got {upper}")));
        }
        if self.grid.iter().filter(|g| **g < upper).count() < 4 {
            return Err(Error::Table(format!("table too coarse: fewer than 4 grid points below {upper}")));
        }
        self.integral_unchecked(weight, upper)
    }

    /// [`integral`](Self::integral) without the coarseness check, for
    /// evaluators that integrate over short sub-ranges.
    pub(crate) fn integral_unchecked(&self, weight: Weight, upper: f64) -> Result<Propagated> {
        let top = self.max_argument();
        let end = upper.min(top);
        let mut value = 0.0;
        let mut err = 0.0;
        let mut bias = 0.0;
        for i in 0..self.grid.len() - 1 {
            let (a, b) = (self.grid[i], self.grid[i + 1]);
            if a >= end {
                break;
            }
            let b_cut = b.min(end);
            let (va, vb) = (self.values[i], self.values[i + 1]);
            let (sa, sb) = (self.stderr[i], self.stderr[i + 1]);
            // value on [a, b] is va + (vb - va)(z - a)/h; integrate over [a, b_cut]
            let h = b - a;
            let (i0, i1) = segment_moments(weight, a, b_cut);
            let wa = i0 - i1 / h;
            let wb = i1 / h;
            value += va * wa + vb * wb;
            err += sa * wa.abs() + sb * wb.abs();
            bias += self.truncation_bound[i] * wa.abs() + self.truncation_bound[i + 1] * wb.abs();
        }
        if upper > top {
            let fit = self.tail()?;
            let s = fit.exponent + 1.0;
            let tail = match weight {
                Weight::Unit => fit.coefficient * (upper.powf(s) - top.powf(s)) / s,
                Weight::ExpDecay(theta) => {
                    let upper_part = |x: f64| {
                        if x.is_infinite() {
                            0.0
                        } else {
                            statrs::function::gamma::gamma_ur(s, theta * x)
                        }
                    };
                    fit.coefficient * theta.powf(-s) * statrs::function::gamma::gamma(s)
                        * (upper_part(top) - upper_part(upper))
                }
            };
            let last = self.grid.len() - 1;
            let v = self.values[last];
            let (rel, rel_bias) = if v > 0.0 {
                (self.stderr[last] / v, self.truncation_bound[last] / v)
            } else {
                (0.0, 0.0)
            };
            value += tail;
            err += tail.abs() * rel;
            bias += tail.abs() * rel_bias;
        }
        Ok(Propagated { value, stderr: err, truncation_bound: bias })
    }

    /// Points where isotonic projection moved the raw mean by more than `k` stderr.
    pub fn projection_outliers(&self, k: f64) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&i| (self.values[i] - self.raw[i]).abs() > k * self.stderr[i].max(1e-300))
            .filter(|&i| self.values[i] != self.raw[i])
            .collect()
    }

    /// Fails when the truncation bias bound exceeds one standard error anywhere.
    pub fn check_truncation(&self) -> Result<()> {
        for (i, (&b, &s)) in self.truncation_bound.iter().zip(&self.stderr).enumerate() {
            if b > s && b > 0.0 {
                return Err(Error::Table(format!(
                    "{} truncation bias bound {b:.3e} exceeds stderr {s:.3e} at y = {} (n_max = {})",
                    self.which.name(),
                    self.grid[i],
                    self.n_max
                )));
            }
        }
        Ok(())
    }

    /// CSV with columns `which,x,value,stderr,replicas,n_max,censor_frac,tail_exp,tail_coef`;
    /// `x` is the signed argument (`-y` for `V` and `V0`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("which,x,value,stderr,replicas,n_max,censor_frac,tail_exp,tail_coef\n");
        let (te, tc) = self
            .tail_fit
            .map(|f| (f.exponent.to_string(), f.coefficient.to_string()))
            .unwrap_or_else(|| ("nan".into(), "nan".into()));
        for i in 0..self.grid.len() {
            let x = match self.which {
                RenewalKind::U => self.grid[i],
                _ => -self.grid[i],
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.which.name(),
                x,
                self.values[i],
                self.stderr[i],
                self.replicas,
                self.n_max,
                self.censor_frac,
                te,
                tc
            );
        }
        out
    }
}

/// `(∫_a^b w(z) dz, ∫_a^b (z - a) w(z) dz)`.
fn segment_moments(weight: Weight, a: f64, b: f64) -> (f64, f64) {
    let d = b - a;
    match weight {
        Weight::Unit => (d, d * d / 2.0),
        Weight::ExpDecay(theta) => {
            let ea = (-theta * a).exp();
            let x = theta * d;
            if x < 1e-4 {
                // series in θd to avoid cancellation
                let i0 = ea * d * (1.0 - x / 2.0 + x * x / 6.0);
                let i1 = ea * d * d * (0.5 - x / 3.0 + x * x / 8.0);
                (i0, i1)
            } else {
                let eb = (-theta * b).exp();
                let i0 = (ea - eb) / theta;
                let i1 = -d * eb / theta + (ea - eb) / (theta * theta);
                (i0, i1)
            }
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Table("grid needs at least 2 points".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::Table(format!("grid must start at 0, starts at {}", grid[0])));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::Table("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Pool-adjacent-violators projection onto nondecreasing sequences.
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let n = n1 + n2;
            blocks.push(((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n));
        }
    }
    blocks.into_iter().flat_map(|(m, n)| std::iter::repeat(m).take(n)).collect()
}

struct RenewalAcc {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    late: Vec<f64>,
    replicas: u64,
    censored: u64,
    hist: Vec<u32>,
    late_hist: Vec<u32>,
}

impl RenewalAcc {
    fn new(m: usize) -> Self {
        Self {
            sum: vec![0.0; m],
            sum_sq: vec![0.0; m],
            late: vec![0.0; m],
            replicas: 0,
            censored: 0,
            hist: vec![0; m],
            late_hist: vec![0; m],
        }
    }
}

impl Merge for RenewalAcc {
    fn merge(&mut self, o: Self) {
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
            self.late[i] += o.late[i];
        }
        self.replicas += o.replicas;
        self.censored += o.censored;
    }
}

fn estimate(
    which: RenewalKind,
    model: &IncrementModel<f64>,
    grid: Vec<f64>,
    replicas: u64,
    n_max: u64,
    stream: &RandomStream,
) -> Result<RenewalTable> {
    validate_grid(&grid)?;
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be >= 1".into()));
    }
    if n_max < 10 {
        return Err(Error::InvalidArgument("n_max must be >= 10".into()));
    }
    let m = grid.len();
    let late_from = n_max / 10;
    let stream = stream.derive(which.name());
    let acc = map_reduce(
        replicas,
        || RenewalAcc::new(m),
        |r, acc| {
            let mut rng = stream.replica(r).rng();
            let mut s = 0.0f64;
            let mut first = m;
            let mut exited = false;
            for k in 1..=n_max {
                s += model.sample_f64(&mut rng);
                // index of the first grid point counting this visit
                let idx = match which {
                    RenewalKind::U => {
                        if s >= 0.0 {
                            exited = true;
                            break;
                        }
                        let y = -s;
                        grid.partition_point(|g| *g < y)
                    }
                    RenewalKind::V => {
                        if s < 0.0 {
                            exited = true;
                            break;
                        }
                        grid.partition_point(|g| *g <= s)
                    }
                    RenewalKind::V0 => {
                        if s < 0.0 {
                            exited = true;
                            break;
                        }
                        grid.partition_point(|g| *g < s)
                    }
                };
                if idx < m {
                    acc.hist[idx] += 1;
                    if k > late_from {
                        acc.late_hist[idx] += 1;
                    }
                    first = first.min(idx);
                }
            }
            acc.replicas += 1;
            if !exited {
                acc.censored += 1;
            }
            let (mut c, mut l) = (0u64, 0u64);
            for i in first..m {
                c += acc.hist[i] as u64;
                l += acc.late_hist[i] as u64;
                acc.hist[i] = 0;
                acc.late_hist[i] = 0;
                let cf = c as f64;
                acc.sum[i] += cf;
                acc.sum_sq[i] += cf * cf;
                acc.late[i] += l as f64;
            }
        },
    );
    let n = acc.replicas as f64;
    let raw: Vec<f64> = acc.sum.iter().map(|s| 1.0 + s / n).collect();
    let stderr: Vec<f64> = acc
        .sum
        .iter()
        .zip(&acc.sum_sq)
        .map(|(s, q)| {
            let mean = s / n;
            if n < 2.0 {
                0.0
            } else {
                ((q - n * mean * mean).max(0.0) / (n - 1.0) / n).sqrt()
            }
        })
        .collect();
    // Residual Σ_{k > n_max} decays like k^{-1/α} relative to the last-decade mass.
    let inv_alpha = model.scaling().inv_alpha();
    let decade_ratio = 1.0 / (10f64.powf(inv_alpha) - 1.0);
    let truncation_bound = acc.late.iter().map(|l| l / n * decade_ratio).collect();
    let mut table = RenewalTable {
        which,
        values: isotonic(&raw),
        raw,
        grid,
        stderr,
        replicas: acc.replicas,
        n_max,
        censor_frac: acc.censored as f64 / n,
        truncation_bound,
        tail_fit: None,
        tail_fit_note: None,
    };
    let expected = expected_tail_exponent(which, model);
    match expected.and_then(|e| table.fit_tail(Some(e))) {
        Ok(fit) => table.tail_fit = Some(fit),
        Err(e) => table.tail_fit_note = Some(e.to_string()),
    }
    Ok(table)
}

/// `αρ` for `U`, `α(1-ρ)` for `V` and `V₀`.
pub fn expected_tail_exponent(which: RenewalKind, model: &IncrementModel<f64>) -> Result<f64> {
    let p = model.attraction();
    let rho = p.positivity_rho()?;
    Ok(match which {
        RenewalKind::U => p.alpha() * rho,
        _ => p.alpha() * (1.0 - rho),
    })
}

/// `U` on a grid of arguments `x ≥ 0` (strictly increasing, starting at 0).
pub fn estimate_u(
    model: &IncrementModel<f64>,
    grid: &[f64],
    replicas: u64,
    n_max: u64,
    stream: &RandomStream,
) -> Result<RenewalTable> {
    estimate(RenewalKind::U, model, grid.to_vec(), replicas, n_max, stream)
}

fn magnitudes(grid_negatives: &[f64]) -> Result<Vec<f64>> {
    if grid_negatives.iter().any(|x| *x > 0.0) {
        return Err(Error::Table("V/V0 arguments must be <= 0".into()));
    }
    Ok(grid_negatives.iter().map(|x| -x + 0.0).collect())
}

/// `V` on arguments `x ≤ 0`, given as `0, -y₁, -y₂, …` with increasing magnitudes.
pub fn estimate_v(
    model: &IncrementModel<f64>,
    grid_negatives: &[f64],
    replicas: u64,
    n_max: u64,
    stream: &RandomStream,
) -> Result<RenewalTable> {
    estimate(RenewalKind::V, model, magnitudes(grid_negatives)?, replicas, n_max, stream)
}

/// `V₀` on arguments `x ≤ 0`, same grid convention as [`estimate_v`].
pub fn estimate_v0(
    model: &IncrementModel<f64>,
    grid_negatives: &[f64],
    replicas: u64,
    n_max: u64,
    stream: &RandomStream,
) -> Result<RenewalTable> {
    estimate(RenewalKind::V0, model, magnitudes(grid_negatives)?, replicas, n_max, stream)
}

pub fn integral_against_table(table: &RenewalTable, weight: Weight, upper: f64) -> Result<Propagated> {
    table.integral(weight, upper)
}

/// `0, step, 2·step, …, max` (inclusive up to rounding).
pub fn uniform_grid(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// The three renewal tables used by the asymptotic evaluators.
#[derive(Clone, Debug, PartialEq)]
pub struct RenewalSet {
    pub u: RenewalTable,
    pub v: RenewalTable,
    pub v0: RenewalTable,
}

impl RenewalSet {
    pub fn estimate(
        model: &IncrementModel<f64>,
        grid: &[f64],
        replicas: u64,
        n_max: u64,
        stream: &RandomStream,
    ) -> Result<Self> {
        let neg: Vec<f64> = grid.iter().map(|y| -y).collect();
        Ok(Self {
            u: estimate_u(model, grid, replicas, n_max, stream)?,
            v: estimate_v(model, &neg, replicas, n_max, stream)?,
            v0: estimate_v0(model, &neg, replicas, n_max, stream)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_u() -> RenewalTable {
        let grid = uniform_grid(0.25, 40.0);
        let vals = grid.iter().map(|z| 1.0 + z).collect();
        let t = RenewalTable::synthetic(RenewalKind::U, grid, vals).unwrap();
        let fit = t.fit_tail(None).unwrap();
        t.with_tail_fit(fit)
    }

    #[test]
    fn exp_integral_of_linear_table() {
        let t = linear_u();
        let i = t.integral(Weight::ExpDecay(1.0), f64::INFINITY).unwrap();
        assert!((i.value - 2.0).abs() < 1e-6, "{}", i.value);
    }

    #[test]
    fn unit_integral_of_constant_table() {
        let grid = uniform_grid(0.5, 10.0);
        let t = RenewalTable::synthetic(RenewalKind::V, grid.clone(), vec![1.0; grid.len()]).unwrap();
        assert!((t.integral(Weight::Unit, 7.3).unwrap().value - 7.3).abs() < 1e-12);
    }

    #[test]
    fn power_table_against_simpson_oracle() {
        let f = |z: f64| (1.0 + z).powf(1.3);
        let grid = uniform_grid(0.01, 30.0);
        let vals = grid.iter().map(|z| f(*z)).collect();
        let t = RenewalTable::synthetic(RenewalKind::U, grid, vals).unwrap();
        let t = {
            let fit = t.fit_tail(None).unwrap();
            t.with_tail_fit(fit)
        };
        let got = t.integral(Weight::ExpDecay(2.0), f64::INFINITY).unwrap().value;
        // composite Simpson, independent of the table machinery
        let (a, b, n) = (0.0, 40.0, 400_000);
        let h = (b - a) / n as f64;
        let mut s = f(a) * (-2.0 * a).exp() + f(b) * (-2.0 * b).exp();
        for i in 1..n {
            let z = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z) * (-2.0 * z).exp();
        }
        let oracle = s * h / 3.0;
        assert!(((got - oracle) / oracle).abs() < 1e-4, "{got} vs {oracle}");
    }

    #[test]
    fn integral_errors() {
        let t = linear_u();
        assert!(t.integral(Weight::Unit, f64::INFINITY).is_err());
        assert!(t.integral(Weight::ExpDecay(0.0), 1.0).is_err());
        assert!(matches!(t.integral(Weight::Unit, 0.5), Err(Error::Table(_))));
        let no_fit = RenewalTable::synthetic(RenewalKind::U, vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0; 5]).unwrap();
        assert!(no_fit.integral(Weight::ExpDecay(1.0), f64::INFINITY).is_err());
        assert!(no_fit.value_at(5.0).is_err());
    }

    #[test]
    fn pava() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn grid_validation() {
        assert!(RenewalTable::synthetic(RenewalKind::U, vec![0.0, 2.0, 1.0], vec![1.0; 3]).is_err());
        assert!(RenewalTable::synthetic(RenewalKind::U, vec![0.5, 1.0], vec![1.0; 2]).is_err());
    }

    #[test]
    fn csv_uses_signed_arguments() {
        let grid = vec![0.0, 1.0];
        let t = RenewalTable::synthetic(RenewalKind::V, grid, vec![1.0, 2.0]).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("which,x,value,stderr,replicas,n_max,censor_frac,tail_exp,tail_coef\n"));
        assert!(csv.contains("\nV,-0,1,") && csv.contains("\nV,-1,2,"));
    }
}
