use statrs::distribution::{ContinuousCDF, Normal};
use walklab_core::functionals::{
    estimate_functional, lhs_corollary_vatvat, lhs_theorem1, lhs_theorem2, lhs_theorem3, lhs_theorem4, ConstraintSpec,
    Family, Functional,
};
use walklab_core::quadrature::integrate;
use walklab_core::{Estimate, IncrementModel, RandomStream, StableParams};

const REPS: u64 = 400_000;

fn phi03() -> ConstraintSpec {
    ConstraintSpec::phi(Family::Power(0.3), 2.0).unwrap()
}

fn psi03() -> ConstraintSpec {
    ConstraintSpec::psi(Family::Power(0.3), 2.0).unwrap()
}

fn within(e: &Estimate, want: f64, what: &str) {
    assert!((e.value - want).abs() <= 3.0 * e.stderr, "{what}: {} ± {} vs {want}", e.value, e.stderr);
}

#[test]
fn one_step_gaussian_closed_forms() {
    let m = IncrementModel::gaussian(1.0).unwrap();
    let nd = Normal::new(0.0, 1.0).unwrap();
    let s = RandomStream::from_seed(401);
    for theta in [0.5, 1.0, 4.0] {
        let e_half = (theta * theta / 2.0f64).exp();
        // φ(1) = 1: E[e^{θS_1}; S_1 < 0] + P(0 ≤ S_1 ≤ 1)
        let t1 = lhs_theorem1(&m, theta, &phi03(), 1, REPS, &s.derive("t1")).unwrap();
        within(&t1, e_half * nd.cdf(-theta) + nd.cdf(1.0) - 0.5, "theorem1");
        // ψ(1) = -1
        let want = e_half * nd.cdf(-1.0 - theta);
        within(&lhs_theorem2(&m, theta, 0.0, &psi03(), 1, REPS, &s.derive("t2")).unwrap(), want, "theorem2 x=0");
        within(&lhs_theorem3(&m, theta, &psi03(), 1, REPS, &s.derive("t3")).unwrap(), want, "theorem3");
        within(&lhs_corollary_vatvat(&m, theta, &psi03(), 1, REPS, &s.derive("c")).unwrap(), want, "corollary");
        let want = (-2.0 * theta).exp() * e_half * nd.cdf(1.0 - theta);
        within(&lhs_theorem2(&m, theta, -2.0, &psi03(), 1, REPS, &s.derive("t2x")).unwrap(), want, "theorem2 x=-2");
    }
}

#[test]
fn one_step_quadrature_for_heavy_tails() {
    let models = [
        IncrementModel::exact_stable(StableParams::new(1.5, 0.3, 1.0).unwrap()),
        IncrementModel::tail_equivalent(StableParams::new(1.5, 0.3, 1.0).unwrap(), 4.0).unwrap(),
    ];
    let s = RandomStream::from_seed(402);
    let theta = 1.0;
    for m in &models {
        let a = m.attraction().alpha();
        let phi = ConstraintSpec::phi(Family::Power(0.3), a).unwrap();
        let pdf = |y: f64| m.pdf(y).unwrap();
        // everything below -60 carries less than e^{-60} weight
        let below = integrate(|y: f64| (theta * y).exp() * pdf(y), -60.0, 0.0, 1e-9, 4000).unwrap().value;
        let mid = integrate(pdf, 0.0, 1.0, 1e-9, 4000).unwrap().value;
        let e = lhs_theorem1(m, theta, &phi, 1, REPS, &s.derive(&m.describe())).unwrap();
        within(&e, below + mid, &m.describe());
        let psi = ConstraintSpec::psi(Family::Power(0.3), a).unwrap();
        let tail = integrate(|y: f64| (theta * y).exp() * pdf(y), -60.0, -1.0, 1e-9, 4000).unwrap().value;
        let e = lhs_theorem3(m, theta, &psi, 1, REPS, &s.derive(&format!("{}/3", m.describe()))).unwrap();
        within(&e, tail, &m.describe());
    }
}

#[test]
fn theta_monotone_and_dominance_on_shared_streams() {
    let m = IncrementModel::gaussian(1.0).unwrap();
    let s = RandomStream::from_seed(403);
    let n = 64;
    let reps = 50_000;
    let est = |f: Functional| estimate_functional(&m, f, n, 0.0, reps, &s).unwrap().value;
    let b = phi03().value(n);
    let mut last = f64::INFINITY;
    for theta in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let v = est(Functional::TauExp { theta, bound: b });
        assert!(v <= last, "theta {theta}: {v} > {last}");
        last = v;
        // {τ_n = n} makes S_τ = S_n, so the at-minimum integrand is dominated pathwise
        let at_min = est(Functional::EndExpAtMinimum { theta, bound: -1.0 });
        assert!(at_min <= est(Functional::TauExp { theta, bound: -1.0 }));
    }
    let mut prev = 0.0;
    for k in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let v = lhs_theorem4(&m, 1.0, k, n, reps, &s).unwrap().value;
        assert!(v >= prev, "K {k}");
        prev = v;
    }
}

fn needed_replicas(pilot: &Estimate, target: f64) -> f64 {
    let sd = pilot.stderr * (pilot.replicas as f64).sqrt();
    (sd / pilot.value / target).powi(2)
}

#[test]
fn pilot_budgets_fit_the_stated_caps() {
    let m = IncrementModel::gaussian(1.0).unwrap();
    let s = RandomStream::from_seed(404);
    let n = 256;
    let pilot = lhs_theorem1(&m, 1.0, &phi03(), n, 20_000, &s.derive("p1")).unwrap();
    let need = needed_replicas(&pilot, 0.05);
    assert!(need <= 1e7, "{need}");
    let full = lhs_theorem1(&m, 1.0, &phi03(), n, (need.ceil() as u64).max(20_000), &s.derive("f1")).unwrap();
    assert!(full.value.is_finite() && full.value > 0.0 && full.rel_stderr() < 0.05, "{full:?}");

    let pilot = lhs_theorem2(&m, 1.0, -2.0, &psi03(), n, 20_000, &s.derive("p2")).unwrap();
    let need = needed_replicas(&pilot, 0.10);
    assert!(need <= 1e8, "{need}");
    let full = lhs_theorem2(&m, 1.0, -2.0, &psi03(), n, (need.ceil() as u64).max(20_000), &s.derive("f2")).unwrap();
    assert!(full.value.is_finite() && full.value > 0.0 && full.rel_stderr() < 0.10, "{full:?}");
}

#[test]
fn theorem4_normalized_level_settles() {
    let m = IncrementModel::gaussian(1.0).unwrap();
    let s = RandomStream::from_seed(405);
    let scaled = |n: u64, reps: u64| {
        let e = lhs_theorem4(&m, 1.0, 1.0, n, reps, &s.derive(&format!("n={n}"))).unwrap();
        (e.value / m.scaling().b(n), e.rel_stderr())
    };
    let (a, ra) = scaled(256, 300_000);
    let (b, rb) = scaled(512, 700_000);
    assert!(ra < 0.03 && rb < 0.03, "{ra} {rb}");
    assert!((b / a - 1.0).abs() < 0.15, "{a} -> {b}");
}
