//! Monte Carlo estimators of walk functionals under constraints on the
//! terminal value, the asymptotic formulas they are compared against, and the
//! ratio experiments that put the two side by side over a grid of `n`.

use std::fmt::Write as _;

use num_traits::ToPrimitive;
use rand::Rng;

use crate::error::{Error, Result};
use crate::increments::IncrementModel;
use crate::quadrature::gauss_legendre5;
use crate::renewal::{Propagated, RenewalKind, RenewalSet, RenewalTable, Weight};
use crate::replicas::{digest, map_reduce, Budget, Estimate, MeanAccumulator};
use crate::rng::RandomStream;
use crate::scalar::WalkScalar;
use crate::walk::{PathSummary, Walker};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `S_n ≤ φ(n)` with `φ(n) → +∞`.
    UpperPositive,
    /// `S_n ≤ ψ(n)` with `ψ(n) → -∞`.
    UpperNegative,
    /// `S_n ≤ K`.
    FixedK,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Power(f64),
    LogPower(f64),
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintSpec {
    kind: ConstraintKind,
    family: Family,
}

impl ConstraintSpec {
    /// Validates the family against the kind. Power families need `0 < δ < 1/α`
    /// so that the bound is `o(a_n)`.
    pub fn new(kind: ConstraintKind, family: Family, alpha: f64) -> Result<Self> {
        match (kind, family) {
            (ConstraintKind::FixedK, Family::Constant(k)) if k.is_finite() => {}
            (ConstraintKind::FixedK, _) => {
                return Err(Error::InvalidArgument("fixed_K needs a finite constant family".into()))
            }
            (_, Family::Power(d)) => {
                if !(d > 0.0 && d < 1.0 / alpha) {
                    return Err(Error::InvalidArgument(format!(
                        "power exponent {d} must lie in (0, 1/alpha) = (0, {})",
                        1.0 / alpha
                    )));
                }
            }
            (_, Family::LogPower(p)) => {
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::InvalidArgument(format!("log-power exponent {p} must be > 0")));
                }
            }
            (_, Family::Constant(_)) => {
                return Err(Error::InvalidArgument("phi/psi constraints must grow; constant family is for fixed_K".into()))
            }
        }
        Ok(Self { kind, family })
    }

    pub fn phi(family: Family, alpha: f64) -> Result<Self> {
        Self::new(ConstraintKind::UpperPositive, family, alpha)
    }

    pub fn psi(family: Family, alpha: f64) -> Result<Self> {
        Self::new(ConstraintKind::UpperNegative, family, alpha)
    }

    pub fn fixed_k(k: f64) -> Result<Self> {
        Self::new(ConstraintKind::FixedK, Family::Constant(k), 1.0)
    }

    /// `δ = min(0.3, 0.8/α)`.
    pub fn default_delta(alpha: f64) -> f64 {
        0.3f64.min(0.8 / alpha)
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The bound at `n`; negative for ψ-kind constraints.
    pub fn value(&self, n: u64) -> f64 {
        let n = n as f64;
        let magnitude = match self.family {
            Family::Power(d) => n.powf(d),
            Family::LogPower(p) => n.ln().max(0.0).powf(p),
            Family::Constant(k) => return k,
        };
        match self.kind {
            ConstraintKind::UpperNegative => -magnitude,
            _ => magnitude,
        }
    }

    pub fn describe(&self) -> String {
        let (name, sign) = match self.kind {
            ConstraintKind::UpperPositive => ("phi", ""),
            ConstraintKind::UpperNegative => ("psi", "-"),
            ConstraintKind::FixedK => ("K", ""),
        };
        match self.family {
            Family::Power(d) => format!("{name}={sign}n^{d}"),
            Family::LogPower(p) => format!("{name}={sign}(log n)^{p}"),
            Family::Constant(k) => format!("{name}={k}"),
        }
    }

    fn expect(&self, kind: ConstraintKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::ConstraintKind { expected: format!("{kind:?}"), got: format!("{:?}", self.kind) });
        }
        Ok(())
    }
}

/// Per-path integrands. Each is a bounded function of the path summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    /// `e^{θ S_{τ_n}} 1{S_n ≤ bound}`.
    TauExp { theta: f64, bound: f64 },
    /// `e^{θ S_n} 1{S_n ≤ bound, M_n < 0}`.
    EndExpNegative { theta: f64, bound: f64 },
    /// `e^{θ S_n} 1{S_n ≤ bound, τ_n = n}`.
    EndExpAtMinimum { theta: f64, bound: f64 },
    /// `1{S_n ≤ bound, L_n ≥ 0}`.
    StayNonnegative { bound: f64 },
}

impl Functional {
    fn validate(&self, start: f64) -> Result<()> {
        match *self {
            Functional::TauExp { theta, .. }
            | Functional::EndExpNegative { theta, .. }
            | Functional::EndExpAtMinimum { theta, .. } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return Err(Error::InvalidArgument(format!("theta must be > 0, got {theta}")));
                }
            }
            Functional::StayNonnegative { .. } => {}
        }
        match self {
            Functional::EndExpNegative { .. } if start > 0.0 => {
                Err(Error::InvalidArgument(format!("start x must be <= 0, got {start}")))
            }
            Functional::EndExpNegative { .. } => Ok(()),
            _ if start != 0.0 => Err(Error::TauUndefined(start)),
            _ => Ok(()),
        }
    }

    /// Value on a complete path summary. Works for any ordered additive scalar,
    /// which is what the exact duality check relies on.
    pub fn evaluate<T: WalkScalar + ToPrimitive>(&self, s: &PathSummary<T>) -> Result<f64> {
        let f = |v: &T| v.to_f64().expect("scalar converts to f64");
        let end = f(&s.end);
        Ok(match *self {
            Functional::TauExp { theta, bound } => {
                let (_, s_tau) = s.tau()?;
                if end <= bound {
                    (theta * f(&s_tau)).exp()
                } else {
                    0.0
                }
            }
            Functional::EndExpNegative { theta, bound } => {
                if s.max < T::zero() && end <= bound {
                    (theta * end).exp()
                } else {
                    0.0
                }
            }
            Functional::EndExpAtMinimum { theta, bound } => {
                let (tau, _) = s.tau()?;
                if tau == s.n && end <= bound {
                    (theta * end).exp()
                } else {
                    0.0
                }
            }
            Functional::StayNonnegative { bound } => {
                if s.min >= T::zero() && end <= bound {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// One replica, streaming. Paths stop early once the indicator is decided,
    /// so the value equals [`evaluate`](Self::evaluate) on the full path drawn
    /// from the same generator.
    #[inline]
    fn simulate<R: Rng + ?Sized>(&self, model: &IncrementModel<f64>, n: u64, start: f64, rng: &mut R) -> f64 {
        match *self {
            Functional::TauExp { theta, bound } => {
                let mut w = Walker::new(0.0f64);
                for _ in 0..n {
                    w.push(model.sample_f64(rng));
                }
                let (_, s_tau) = w.tau().expect("start is 0");
                assert!(s_tau <= 0.0, "S_tau must be nonpositive");
                if *w.position() <= bound {
                    (theta * s_tau).exp()
                } else {
                    0.0
                }
            }
            Functional::EndExpNegative { theta, bound } => {
                let mut s = start;
                for _ in 0..n {
                    s += model.sample_f64(rng);
                    if s >= 0.0 {
                        return 0.0;
                    }
                }
                if s <= bound {
                    (theta * s).exp()
                } else {
                    0.0
                }
            }
            Functional::EndExpAtMinimum { theta, bound } => {
                let mut w = Walker::new(0.0f64);
                for _ in 0..n {
                    w.push(model.sample_f64(rng));
                }
                let (tau, _) = w.tau().expect("start is 0");
                if tau as u64 == n && *w.position() <= bound {
                    (theta * w.position()).exp()
                } else {
                    0.0
                }
            }
            Functional::StayNonnegative { bound } => {
                let mut s = 0.0;
                for _ in 0..n {
                    s += model.sample_f64(rng);
                    if s < 0.0 {
                        return 0.0;
                    }
                }
                if s <= bound {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// Mean of `functional` over `replicas` paths of length `n` from `start`.
/// Replica `r` uses `stream.replica(r)`, so two calls on the same stream see
/// the same paths.
pub fn estimate_functional(
    model: &IncrementModel<f64>,
    functional: Functional,
    n: u64,
    start: f64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    let acc = accumulate(model, functional, n, start, replicas, stream)?;
    let config = format!("{}|{}|n={n}|start={start}|replicas={replicas}", model.describe(), functional.describe());
    Ok(Estimate::from_accumulator(&acc, stream.seed(), &config))
}

fn accumulate(
    model: &IncrementModel<f64>,
    functional: Functional,
    n: u64,
    start: f64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<MeanAccumulator> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be >= 1".into()));
    }
    functional.validate(start)?;
    Ok(map_reduce(replicas, MeanAccumulator::default, |r, acc| {
        let mut rng = stream.replica(r).rng();
        acc.push(functional.simulate(model, n, start, &mut rng));
    }))
}

pub fn lhs_theorem1(
    model: &IncrementModel<f64>,
    theta: f64,
    phi: &ConstraintSpec,
    n: u64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    phi.expect(ConstraintKind::UpperPositive)?;
    estimate_functional(model, Functional::TauExp { theta, bound: phi.value(n) }, n, 0.0, replicas, stream)
}

pub fn lhs_theorem2(
    model: &IncrementModel<f64>,
    theta: f64,
    x: f64,
    psi: &ConstraintSpec,
    n: u64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    psi.expect(ConstraintKind::UpperNegative)?;
    estimate_functional(model, Functional::EndExpNegative { theta, bound: psi.value(n) }, n, x, replicas, stream)
}

pub fn lhs_corollary_vatvat(
    model: &IncrementModel<f64>,
    theta: f64,
    psi: &ConstraintSpec,
    n: u64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    psi.expect(ConstraintKind::UpperNegative)?;
    estimate_functional(model, Functional::EndExpAtMinimum { theta, bound: psi.value(n) }, n, 0.0, replicas, stream)
}

pub fn lhs_theorem3(
    model: &IncrementModel<f64>,
    theta: f64,
    psi: &ConstraintSpec,
    n: u64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    psi.expect(ConstraintKind::UpperNegative)?;
    estimate_functional(model, Functional::TauExp { theta, bound: psi.value(n) }, n, 0.0, replicas, stream)
}

pub fn lhs_theorem4(
    model: &IncrementModel<f64>,
    theta: f64,
    k: f64,
    n: u64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    estimate_functional(model, Functional::TauExp { theta, bound: k }, n, 0.0, replicas, stream)
}

pub fn lhs_maxsmall(
    model: &IncrementModel<f64>,
    theta: f64,
    x: f64,
    n: u64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    estimate_functional(model, Functional::EndExpNegative { theta, bound: f64::INFINITY }, n, x, replicas, stream)
}

/// Frequency of `{S_n ≤ x_upper, L_n ≥ 0}`.
pub fn conditioned_prob(
    model: &IncrementModel<f64>,
    n: u64,
    x_upper: f64,
    replicas: u64,
    stream: &RandomStream,
) -> Result<Estimate> {
    if !(x_upper > 0.0) {
        return Err(Error::InvalidArgument(format!("x_upper must be > 0, got {x_upper}")));
    }
    estimate_functional(model, Functional::StayNonnegative { bound: x_upper }, n, 0.0, replicas, stream)
}

fn expect_table(t: &RenewalTable, which: RenewalKind) -> Result<()> {
    if t.which != which {
        return Err(Error::Table(format!("expected a {} table, got {}", which.name(), t.which.name())));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be > 0, got {theta}")));
    }
    Ok(())
}

/// `g_{α,β}(0)` and `g_{α,-β}(0)`.
fn g_pair(model: &IncrementModel<f64>) -> Result<(f64, f64)> {
    let p = model.attraction();
    Ok((p.density_at_zero()?, p.mirrored().density_at_zero()?))
}

fn b_n(model: &IncrementModel<f64>, n: u64) -> f64 {
    model.scaling().b(n)
}

/// `θ g_{α,β}(0) b_n ∫_0^{φ(n)} V(-w)dw ∫_0^∞ e^{-θz}U(z)dz`.
pub fn rhs_theorem1(
    model: &IncrementModel<f64>,
    theta: f64,
    phi: &ConstraintSpec,
    n: u64,
    u: &RenewalTable,
    v: &RenewalTable,
) -> Result<Propagated> {
    phi.expect(ConstraintKind::UpperPositive)?;
    check_theta(theta)?;
    expect_table(u, RenewalKind::U)?;
    expect_table(v, RenewalKind::V)?;
    let (g, _) = g_pair(model)?;
    let iv = v.integral(Weight::Unit, phi.value(n))?;
    let iu = u.integral(Weight::ExpDecay(theta), f64::INFINITY)?;
    Ok(iv.product(iu).scale(theta * g * b_n(model, n)))
}

/// `g_{α,-β}(0) b_n V(x) U(-ψ(n)) θ^{-1} e^{θψ(n)}`.
pub fn rhs_theorem2(
    model: &IncrementModel<f64>,
    theta: f64,
    x: f64,
    psi: &ConstraintSpec,
    n: u64,
    u: &RenewalTable,
    v: &RenewalTable,
) -> Result<Propagated> {
    psi.expect(ConstraintKind::UpperNegative)?;
    check_theta(theta)?;
    if x > 0.0 {
        return Err(Error::InvalidArgument(format!("x must be <= 0, got {x}")));
    }
    expect_table(u, RenewalKind::U)?;
    expect_table(v, RenewalKind::V)?;
    let (_, g_minus) = g_pair(model)?;
    let p = psi.value(n);
    let vx = v.point(-x)?;
    let up = u.point(-p)?;
    Ok(vx.product(up).scale(g_minus * b_n(model, n) * (theta * p).exp() / theta))
}

/// The corollary's right side: [`rhs_theorem2`] at `x = 0`, where `V(-0) = 1`.
pub fn rhs_corollary_vatvat(
    model: &IncrementModel<f64>,
    theta: f64,
    psi: &ConstraintSpec,
    n: u64,
    u: &RenewalTable,
) -> Result<Propagated> {
    psi.expect(ConstraintKind::UpperNegative)?;
    check_theta(theta)?;
    expect_table(u, RenewalKind::U)?;
    let (_, g_minus) = g_pair(model)?;
    let p = psi.value(n);
    Ok(u.point(-p)?.scale(g_minus * b_n(model, n) * (theta * p).exp() / theta))
}

/// `g_{α,-β}(0) b_n U(-ψ(n)) e^{θψ(n)} ∫_0^∞ e^{-θz} V₀(-z)dz`.
pub fn rhs_theorem3(
    model: &IncrementModel<f64>,
    theta: f64,
    psi: &ConstraintSpec,
    n: u64,
    u: &RenewalTable,
    v0: &RenewalTable,
) -> Result<Propagated> {
    psi.expect(ConstraintKind::UpperNegative)?;
    check_theta(theta)?;
    expect_table(u, RenewalKind::U)?;
    expect_table(v0, RenewalKind::V0)?;
    let (_, g_minus) = g_pair(model)?;
    let p = psi.value(n);
    let iv0 = v0.integral(Weight::ExpDecay(theta), f64::INFINITY)?;
    Ok(u.point(-p)?.product(iv0).scale(g_minus * b_n(model, n) * (theta * p).exp()))
}

/// `g_{α,β}(0) b_n V(x) ∫_0^∞ e^{-θz}U(z)dz`.
pub fn rhs_maxsmall(
    model: &IncrementModel<f64>,
    theta: f64,
    x: f64,
    n: u64,
    u: &RenewalTable,
    v: &RenewalTable,
) -> Result<Propagated> {
    check_theta(theta)?;
    if x > 0.0 {
        return Err(Error::InvalidArgument(format!("x must be <= 0, got {x}")));
    }
    expect_table(u, RenewalKind::U)?;
    expect_table(v, RenewalKind::V)?;
    let (g, _) = g_pair(model)?;
    let iu = u.integral(Weight::ExpDecay(theta), f64::INFINITY)?;
    Ok(v.point(-x)?.product(iu).scale(g * b_n(model, n)))
}

/// `g_{α,β}(0) b_n ∫_0^x V(-w)dw`.
pub fn rhs_integvw(model: &IncrementModel<f64>, n: u64, x: f64, v: &RenewalTable) -> Result<Propagated> {
    expect_table(v, RenewalKind::V)?;
    let (g, _) = g_pair(model)?;
    Ok(v.integral(Weight::Unit, x)?.scale(g * b_n(model, n)))
}

/// Largest U-grid step accepted near 0 by [`rhs_theorem4`].
pub const THEOREM4_MAX_STEP: f64 = 0.25;

/// The limit of `E[e^{θS_{τ_n}}; S_n ≤ K] / b_n`:
///
/// `g_{α,β}(0) ∫_{x ≤ min(K,0)} e^{θx} U(-dx) ∫_0^{K-x} V(-w)dw
///   + g_{α,-β}(0) ∫_{x ≤ min(K,0)} e^{θx} U(-x) V₀(-(K-x)) dx`.
///
/// `U(-dx)` carries the unit atom at 0 when `K ≥ 0`. Errors are obtained by
/// shifting each table by its standard error (resp. truncation bound): the
/// expression is linear in each table separately.
pub fn rhs_theorem4(
    model: &IncrementModel<f64>,
    theta: f64,
    k: f64,
    u: &RenewalTable,
    v: &RenewalTable,
    v0: &RenewalTable,
) -> Result<Propagated> {
    check_theta(theta)?;
    expect_table(u, RenewalKind::U)?;
    expect_table(v, RenewalKind::V)?;
    expect_table(v0, RenewalKind::V0)?;
    let near_zero = u.grid.iter().take_while(|y| **y <= 1.0).count().max(2);
    if u.grid.windows(2).take(near_zero).any(|w| w[1] - w[0] > THEOREM4_MAX_STEP + 1e-12) {
        return Err(Error::Table(format!("U grid step near 0 exceeds {THEOREM4_MAX_STEP}")));
    }
    let (g, g_minus) = g_pair(model)?;
    let eval = |u: &RenewalTable, v: &RenewalTable, v0: &RenewalTable| theorem4_terms(theta, k, u, v, v0, g, g_minus);
    let value = eval(u, v, v0)?;
    let se = |t: &RenewalTable| t.shifted(&t.stderr);
    let tb = |t: &RenewalTable| t.shifted(&t.truncation_bound);
    let du = eval(&se(u), v, v0)? - value;
    let dv = eval(u, &se(v), v0)? - value;
    let dv0 = eval(u, v, &se(v0))? - value;
    let bias = eval(&tb(u), &tb(v), &tb(v0))? - value;
    Ok(Propagated {
        value,
        stderr: (du * du + dv * dv + dv0 * dv0).sqrt(),
        truncation_bound: bias.abs(),
    })
}

fn theorem4_terms(
    theta: f64,
    k: f64,
    u: &RenewalTable,
    v: &RenewalTable,
    v0: &RenewalTable,
    g: f64,
    g_minus: f64,
) -> Result<f64> {
    // Substitute y = -x ≥ y0; both integrands carry e^{-θy}.
    let y0 = (-k).max(0.0);
    let int_v = |s: f64| -> Result<f64> {
        if s <= 0.0 {
            Ok(0.0)
        } else {
            Ok(v.integral_unchecked(Weight::Unit, s)?.value)
        }
    };
    let mut first = if k >= 0.0 { int_v(k)? } else { 0.0 };
    let mut second = 0.0;
    let top = u.max_argument();
    let far = top + 60.0 / theta;
    // panels: the U grid above y0, then geometric-free fixed panels to `far`
    let mut cuts: Vec<f64> = std::iter::once(y0).chain(u.grid.iter().copied().filter(|y| *y > y0)).collect();
    let mut y = top.max(y0);
    while y < far {
        y = (y + 0.5).min(far);
        cuts.push(y);
    }
    let mut err: Option<Error> = None;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let slope = if b <= top {
            let i = u.grid.partition_point(|g| *g <= a).saturating_sub(1);
            (u.values[i + 1] - u.values[i]) / (u.grid[i + 1] - u.grid[i])
        } else {
            f64::NAN
        };
        let mut f1 = |y: f64| -> f64 {
            let du = if slope.is_nan() {
                match u.tail_fit {
                    Some(fit) => fit.coefficient * fit.exponent * y.powf(fit.exponent - 1.0),
                    None => {
                        err.get_or_insert(Error::Table("U tail fit unavailable".into()));
                        0.0
                    }
                }
            } else {
                slope
            };
            match int_v(k + y) {
                Ok(iv) => (-theta * y).exp() * iv * du,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        };
        first += gauss_legendre5(&mut f1, a, b);
        let mut f2 = |y: f64| -> f64 {
            match (u.value_at(y), v0.value_at(k + y)) {
                (Ok(uy), Ok(vy)) => (-theta * y).exp() * uy * vy,
                (Err(e), _) | (_, Err(e)) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        };
        second += gauss_legendre5(&mut f2, a, b);
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(g * first + g_minus * second)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TheoremId {
    Theorem1,
    Theorem2,
    Theorem3,
    Theorem4,
    CorollaryVatVat,
    MaxSmall,
    IntegVW,
}

impl TheoremId {
    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Theorem1 => "theorem1",
            TheoremId::Theorem2 => "theorem2",
            TheoremId::Theorem3 => "theorem3",
            TheoremId::Theorem4 => "theorem4",
            TheoremId::CorollaryVatVat => "corollary_vatvat",
            TheoremId::MaxSmall => "maxsmall",
            TheoremId::IntegVW => "integvw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            TheoremId::Theorem1,
            TheoremId::Theorem2,
            TheoremId::Theorem3,
            TheoremId::Theorem4,
            TheoremId::CorollaryVatVat,
            TheoremId::MaxSmall,
            TheoremId::IntegVW,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }
}

/// Parameters of a ratio experiment. Which fields matter depends on the theorem:
/// theorems 1 and IntegVW read a φ-constraint, theorems 2, 3 and the corollary a
/// ψ-constraint, theorem 4 reads `k`, theorem 2 and MaxSmall read `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioParams {
    pub theta: f64,
    pub constraint: Option<ConstraintSpec>,
    pub x: f64,
    pub k: f64,
}

impl RatioParams {
    fn constraint(&self, kind: ConstraintKind) -> Result<ConstraintSpec> {
        let c = self.constraint.ok_or_else(|| Error::InvalidArgument("experiment needs a constraint".into()))?;
        c.expect(kind)?;
        Ok(c)
    }

    fn describe(&self, id: TheoremId) -> String {
        match id {
            TheoremId::Theorem4 => format!("K={}", self.k),
            TheoremId::MaxSmall => format!("x={}", self.x),
            TheoremId::Theorem2 => format!(
                "{};x={}",
                self.constraint.map(|c| c.describe()).unwrap_or_default(),
                self.x
            ),
            _ => self.constraint.map(|c| c.describe()).unwrap_or_default(),
        }
    }
}

fn experiment_functional(id: TheoremId, p: &RatioParams, n: u64) -> Result<(Functional, f64)> {
    let theta = p.theta;
    Ok(match id {
        TheoremId::Theorem1 => {
            (Functional::TauExp { theta, bound: p.constraint(ConstraintKind::UpperPositive)?.value(n) }, 0.0)
        }
        TheoremId::Theorem2 => (
            Functional::EndExpNegative { theta, bound: p.constraint(ConstraintKind::UpperNegative)?.value(n) },
            p.x,
        ),
        TheoremId::CorollaryVatVat => (
            Functional::EndExpAtMinimum { theta, bound: p.constraint(ConstraintKind::UpperNegative)?.value(n) },
            0.0,
        ),
        TheoremId::Theorem3 => {
            (Functional::TauExp { theta, bound: p.constraint(ConstraintKind::UpperNegative)?.value(n) }, 0.0)
        }
        TheoremId::Theorem4 => (Functional::TauExp { theta, bound: p.k }, 0.0),
        TheoremId::MaxSmall => (Functional::EndExpNegative { theta, bound: f64::INFINITY }, p.x),
        TheoremId::IntegVW => (
            Functional::StayNonnegative { bound: p.constraint(ConstraintKind::UpperPositive)?.value(n) },
            0.0,
        ),
    })
}

/// Right side of the experiment at `n`, including the `b_n` factor.
pub fn experiment_rhs(
    id: TheoremId,
    model: &IncrementModel<f64>,
    p: &RatioParams,
    n: u64,
    tables: &RenewalSet,
) -> Result<Propagated> {
    let theta = p.theta;
    match id {
        TheoremId::Theorem1 => {
            rhs_theorem1(model, theta, &p.constraint(ConstraintKind::UpperPositive)?, n, &tables.u, &tables.v)
        }
        TheoremId::Theorem2 => {
            rhs_theorem2(model, theta, p.x, &p.constraint(ConstraintKind::UpperNegative)?, n, &tables.u, &tables.v)
        }
        TheoremId::CorollaryVatVat => {
            rhs_corollary_vatvat(model, theta, &p.constraint(ConstraintKind::UpperNegative)?, n, &tables.u)
        }
        TheoremId::Theorem3 => {
            rhs_theorem3(model, theta, &p.constraint(ConstraintKind::UpperNegative)?, n, &tables.u, &tables.v0)
        }
        TheoremId::Theorem4 => {
            Ok(rhs_theorem4(model, theta, p.k, &tables.u, &tables.v, &tables.v0)?.scale(b_n(model, n)))
        }
        TheoremId::MaxSmall => rhs_maxsmall(model, theta, p.x, n, &tables.u, &tables.v),
        TheoremId::IntegVW => {
            rhs_integvw(model, n, p.constraint(ConstraintKind::UpperPositive)?.value(n), &tables.v)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub n: u64,
    pub lhs: Estimate,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub theorem: TheoremId,
    pub theta: f64,
    pub constraint_desc: String,
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    pub fn n_grid(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn last(&self) -> &RatioRow {
        self.rows.last().expect("reports have at least one row")
    }

    /// Whether `|ratio - 1|` never grows along the grid by more than twice the
    /// combined standard error of consecutive ratios.
    pub fn drift_toward_one(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let slack = 2.0 * w[0].ratio_stderr.hypot(w[1].ratio_stderr);
            (w[1].ratio - 1.0).abs() <= (w[0].ratio - 1.0).abs() + slack
        })
    }

    /// CSV with columns
    /// `theorem,n,theta,constraint_desc,lhs,lhs_stderr,rhs,ratio,ratio_stderr,replicas,seed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theorem,n,theta,constraint_desc,lhs,lhs_stderr,rhs,ratio,ratio_stderr,replicas,seed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{:e},{:e},{},{},{},{}",
                self.theorem.name(),
                r.n,
                self.theta,
                self.constraint_desc,
                r.lhs.value,
                r.lhs.stderr,
                r.rhs,
                r.ratio,
                r.ratio_stderr,
                r.lhs.replicas,
                r.lhs.seed
            );
        }
        out
    }
}

/// Runs the lhs estimator and the rhs evaluator at every `n` of the grid.
/// The per-`n` stream is `stream.derive("<theorem>/n=<n>")`; the pilot of an
/// automatic budget uses a separate derived stream.
pub fn run_ratio_experiment(
    id: TheoremId,
    model: &IncrementModel<f64>,
    params: &RatioParams,
    n_grid: &[u64],
    budget: Budget,
    tables: &RenewalSet,
    stream: &RandomStream,
) -> Result<RatioReport> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("n_grid is empty".into()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("n_grid must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let context = |e: Error| match e {
            Error::BudgetRefused { needed, limit, report } => {
                Error::BudgetRefused { needed, limit, report: format!("{} n={n}: {report}", id.name()) }
            }
            other => Error::InvalidArgument(format!("{} n={n}: {other}", id.name())),
        };
        let (functional, start) = experiment_functional(id, params, n).map_err(context)?;
        let rhs = experiment_rhs(id, model, params, n, tables).map_err(context)?;
        if !(rhs.value > 0.0) {
            return Err(context(Error::Table(format!("rhs is not positive: {}", rhs.value))));
        }
        rhs.check_truncation(&format!("{} rhs", id.name())).map_err(context)?;
        let label = format!("{}/n={n}", id.name());
        let main = stream.derive(&label);
        let pilot = stream.derive(&format!("{label}/pilot"));
        let replicas = budget
            .resolve(|k| accumulate(model, functional, n, start, k, &pilot).unwrap_or_default())
            .map_err(context)?;
        let acc = accumulate(model, functional, n, start, replicas, &main).map_err(context)?;
        let config = format!(
            "{}|{}|{}|n={n}|replicas={replicas}",
            id.name(),
            model.describe(),
            params.describe(id)
        );
        let lhs = Estimate { config_hash: digest(&config), ..Estimate::from_accumulator(&acc, stream.seed(), &config) };
        let ratio = lhs.value / rhs.value;
        let ratio_stderr = ratio.abs() * lhs.rel_stderr().hypot(rhs.rel_stderr());
        rows.push(RatioRow { n, lhs, rhs: rhs.value, rhs_stderr: rhs.stderr, ratio, ratio_stderr });
    }
    Ok(RatioReport {
        theorem: id,
        theta: if id == TheoremId::IntegVW { 0.0 } else { params.theta },
        constraint_desc: params.describe(id),
        rows,
    })
}
