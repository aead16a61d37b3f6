//! Property tests for the standing invariants of the characteristic
//! machinery and the model families.

use proptest::prelude::*;

use matpop::characteristics::CharTables;
use matpop::model::{check_delta_strict, ModelSpec};

fn family(kappa: f64, alpha: f64, delta: f64, gamma: f64, beta0: f64) -> (ModelSpec, CharTables) {
    let spec = ModelSpec::reference_family(kappa, alpha, delta, gamma, beta0, 1.0, 2.0).unwrap();
    let tables = CharTables::new(&spec).unwrap();
    (spec, tables)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Backward characteristics compose: χ(s₁, χ(s₂, m)) = χ(s₁+s₂, m).
    #[test]
    fn chi_semigroup(
        m in 1e-6..1.0f64,
        s1 in -3.0..0.0f64,
        s2 in -3.0..0.0f64,
        alpha_v in 0.5..3.0f64,
        p in 1.0..2.5f64,
    ) {
        let spec = ModelSpec::build(
            matpop::model::VelocityFamily::power_law(alpha_v, p),
            matpop::model::DelayFamily::log_affine(4.0),
            matpop::model::DivisionFamily::linear(2.0),
            matpop::model::ReentryFamily::hill(1.0, 1.0, 2.0),
            matpop::model::MortalityProfiles::constant(0.1, 0.2),
            matpop::model::Profile::constant(1.0),
        ).unwrap();
        let t = CharTables::new(&spec).unwrap();
        let direct = t.chi(s1 + s2, m);
        let composed = t.chi(s1, t.chi(s2, m));
        prop_assert!((direct - composed).abs() <= 1e-10 + 1e-10 * direct.abs());
    }

    /// Θ satisfies its fixed-point equation and sits strictly inside (0, m);
    /// Δ stays below Θ(1) and increases below g(1).
    #[test]
    fn commitment_fixed_point_and_bounds(
        m in 1e-4..1.0f64,
        kappa in 1.1..5.0f64,
        alpha in 1.2..8.0f64,
    ) {
        let (spec, t) = family(kappa, alpha, 0.1, 0.2, 1.0);
        let theta = t.theta(m).unwrap();
        prop_assert!(theta > 0.0 && theta < m);
        let residual = (theta - t.chi(-spec.delay.eval(theta), m)).abs();
        prop_assert!(residual <= 1e-9);
        let delta = t.delta(m);
        let theta1 = t.theta(1.0).unwrap();
        prop_assert!(theta <= delta + 1e-12);
        prop_assert!(delta <= theta1 + 1e-9);
    }

    /// h and m ↦ χ(s, m) are strictly increasing; kernels stay in (0, 1]
    /// for nonnegative rates.
    #[test]
    fn monotonicity_and_kernel_bounds(
        m1 in 1e-4..0.99f64,
        gap in 1e-3..0.5f64,
        s in -2.0..-1e-3f64,
        tt in 0.0..3.0f64,
    ) {
        let (_, t) = family(2.0, 4.0, 0.1, 0.2, 1.0);
        let m2 = (m1 + gap).min(1.0);
        prop_assert!(t.h(m2) > t.h(m1));
        prop_assert!(t.chi(s, m2) > t.chi(s, m1));
        let k = t.kernel_resting(tt, m1).unwrap();
        let h = t.kernel_proliferating(tt, m1).unwrap();
        prop_assert!(k > 0.0 && k <= 1.0);
        prop_assert!(h > 0.0 && h <= 1.0);
    }

    /// The Hill re-entry rate is strictly decreasing in the population
    /// argument, and the division family keeps 0 <= g(m) <= m.
    #[test]
    fn hill_decreasing_and_division_bounds(
        m in 0.0..1.0f64,
        x1 in 0.0..50.0f64,
        dx in 1e-3..10.0f64,
        beta0 in 0.1..5.0f64,
        theta in 0.2..3.0f64,
        n in 1.0..4.0f64,
        kappa in 1.01..6.0f64,
    ) {
        let spec = ModelSpec::build(
            matpop::model::VelocityFamily::power_law(1.0, 1.0),
            matpop::model::DelayFamily::log_affine(4.0),
            matpop::model::DivisionFamily::linear(kappa),
            matpop::model::ReentryFamily::hill(beta0, theta, n),
            matpop::model::MortalityProfiles::constant(0.1, 0.2),
            matpop::model::Profile::constant(1.0),
        ).unwrap();
        prop_assert!(spec.reentry.eval(m, x1 + dx) < spec.reentry.eval(m, x1));
        let g = spec.division.eval(m);
        prop_assert!((0.0..=m).contains(&g));
        prop_assert!(spec.velocity.eval(m.max(1e-9)) > 0.0);
        prop_assert!(spec.delay.eval(m) > 0.0);
    }

    /// On the closed-form family the strict-commitment check agrees with
    /// the sign of alpha - kappa.
    #[test]
    fn delta_strict_sign(kappa in 1.05..6.0f64, alpha in 1.1..8.0f64) {
        prop_assume!((alpha - kappa).abs() > 1e-9);
        let (spec, t) = family(kappa, alpha, 0.1, 0.2, 1.0);
        let v = check_delta_strict(&spec, &t);
        prop_assert_eq!(v.holds, alpha > kappa);
    }

    /// Schedule sanity: strictly increasing transmission sequence ending at
    /// g(1), the escape index bracketing Θ(1), and the time formulas
    /// reproduced from their components.
    #[test]
    fn schedule_sanity(b in 0.01..0.95f64, kappa in 1.2..3.0f64, extra in 0.5..4.0f64) {
        let alpha = kappa + extra; // strict commitment holds
        let (spec, t) = family(kappa, alpha, 0.1, 0.2, 1.0);
        let s = t.schedule(b).unwrap();
        prop_assert!(s.b_seq.windows(2).all(|w| w[1] > w[0]));
        let g1 = spec.division.g1();
        prop_assert!((s.b_seq.last().unwrap() - g1).abs() <= 1e-12);
        let theta1 = t.theta(1.0).unwrap();
        if s.b_seq.len() > 2 {
            prop_assert!(s.b_seq[s.n_index] < theta1);
            prop_assert!(s.b_seq[s.n_index + 1] >= theta1);
        }
        let t_bar = (t.h(g1) / t.h(spec.division.eval(b))).ln()
            + (s.n_index as f64 + 2.0) * spec.tau_max;
        prop_assert!((s.t_bar - t_bar).abs() <= 1e-12 * (1.0 + t_bar.abs()));
        let gap = spec.tau_max - t.h(g1).ln();
        prop_assert!((s.t_full - s.t_bar - gap).abs() <= 1e-12 * (1.0 + gap.abs()));
    }

    /// Rebuilding a model from its serialized form reproduces the derived
    /// constants bit for bit.
    #[test]
    fn serde_rebuild_bit_exact(
        kappa in 1.1..5.0f64,
        alpha in 1.2..8.0f64,
        delta in 0.0..3.0f64,
        gamma in 0.0..3.0f64,
        beta0 in 0.0..4.0f64,
    ) {
        let (spec, _) = family(kappa, alpha, delta, gamma, beta0);
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        let rebuilt = ModelSpec::build(
            back.velocity, back.delay, back.division, back.reentry, back.mortality, back.alpha_pi,
        ).unwrap();
        prop_assert_eq!(spec.tau_max.to_bits(), rebuilt.tau_max.to_bits());
        prop_assert_eq!(spec.rho.to_bits(), rebuilt.rho.to_bits());
        prop_assert_eq!(spec.eta.to_bits(), rebuilt.eta.to_bits());
        prop_assert_eq!(spec.r.to_bits(), rebuilt.r.to_bits());
    }
}
