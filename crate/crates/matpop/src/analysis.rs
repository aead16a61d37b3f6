//! Executable stability criteria and the dependence / extinction
//! experiments, with consolidated reporting.
//!
//! The classification logic combines three verdicts:
//!
//! * the local exponential-stability criterion
//!   `(1 + 2 sup ξ) sup β(·, 0) < min(inf(δ + V'), inf(γ + V'))`,
//! * the strict-commitment geometry `Δ(m) < m`,
//! * the boundary dichotomy `(2ξ̄₀ - 1) β(0,0) < ρ` (globally stable) vs
//!   `>=` (unstable).
//!
//! Local stability together with `Δ(m) < m` upgrades boundary decay to
//! global exponential stability of the whole field; a non-positive boundary
//! margin makes the whole field unstable. A stable boundary with the local
//! criterion failing stays a boundary-only statement, and anything else is
//! honestly indeterminate.

use serde::Serialize;

use crate::characteristics::{CharTables, PropagationSchedule};
use crate::error::{Error, Result};
use crate::immature::{
    self, classify_stability, ImmatureClassification, ImmatureVerdict, IntegratorOptions,
};
use crate::model::{check_delta_strict, DeltaStrictness, InitialData, Profile, VelocityFamily};
use crate::structured::{simulate, FieldSolution, SolverConfig};

/// Evaluation of the local exponential-stability inequality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalCriterion {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub sup_xi: f64,
    pub sup_beta0: f64,
}

/// `lhs = (1 + 2 sup_{Ω_Δ} ξ) · sup_m β(m, 0)`,
/// `rhs = min(inf_m (δ + V'), inf_m (γ + V'))`; closed forms where the
/// family admits them, dense-grid evaluation otherwise.
pub fn local_criterion(tables: &CharTables) -> Result<LocalCriterion> {
    let spec = tables.spec();
    let sup_xi = sup_xi_over_initial_layer(tables)?;
    let sup_beta0 = spec.reentry.sup_beta0();
    let lhs = (1.0 + 2.0 * sup_xi) * sup_beta0;

    let grid = 2048;
    let mut inf_rest = f64::INFINITY;
    let mut inf_prol = f64::INFINITY;
    for i in 0..=grid {
        let m = i as f64 / grid as f64;
        let vp = spec.velocity.deriv(m);
        inf_rest = inf_rest.min(spec.mortality.delta.eval(m) + vp);
        inf_prol = inf_prol.min(spec.mortality.gamma.eval(m) + vp);
    }
    let rhs = inf_rest.min(inf_prol);
    Ok(LocalCriterion {
        lhs,
        rhs,
        holds: lhs < rhs,
        sup_xi,
        sup_beta0,
    })
}

fn sup_xi_over_initial_layer(tables: &CharTables) -> Result<f64> {
    let spec = tables.spec();
    // with linear velocity and constant apoptosis the attrition exponent is
    // nonnegative, so ξ peaks at t = 0 where it equals (g⁻¹)'
    let fast = matches!(
        (&spec.velocity, &spec.mortality.gamma),
        (VelocityFamily::PowerLaw { exponent, .. }, Profile::Constant { .. }) if *exponent >= 1.0
    );
    let sup_inv_deriv = match &spec.division {
        crate::model::DivisionFamily::Linear { kappa } => *kappa,
        _ => {
            let mut s: f64 = 0.0;
            for i in 0..=512 {
                let m = i as f64 / 512.0;
                s = s.max(spec.division.inverse_deriv(m));
            }
            s
        }
    };
    if fast {
        return Ok(sup_inv_deriv);
    }
    // generic: scan maturities and the time layer, tracking the smallest
    // cumulative attrition along each characteristic
    let mut sup: f64 = 0.0;
    let pts = 256;
    for i in 1..=pts {
        let m = i as f64 / pts as f64;
        let d = spec.division.inverse_deriv(m);
        if d <= 0.0 {
            continue;
        }
        let w = spec.division.inverse(m);
        let tau_delta = spec.delay.eval(tables.delta(m));
        let curve = tables.survival_curve(true, w, tau_delta);
        let mut min_att = f64::INFINITY;
        for k in 0..=32 {
            let t = tau_delta * k as f64 / 32.0;
            min_att = min_att.min(curve.log_attrition(tables, t));
        }
        sup = sup.max(d * (-min_att).exp());
    }
    Ok(sup)
}

/// Overall verdict for the full structured system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OverallVerdict {
    /// Local criterion and strict commitment both hold: the trivial
    /// solution attracts everything, exponentially.
    GloballyExpStable,
    /// The boundary population is globally stable but the local criterion
    /// fails, so only boundary decay is certified.
    ImmatureStableOnly,
    /// Non-positive boundary margin destabilizes the whole field.
    Unstable,
    /// None of the sufficient conditions resolves the instance.
    Indeterminate,
}

/// Decay metrics of the certification run of the boundary system.
#[derive(Debug, Clone, Serialize)]
pub struct ImmatureSimVerdict {
    pub horizon: f64,
    pub x_initial_sup: f64,
    pub x_final_sup: f64,
    pub x_decayed: bool,
    pub y_final: f64,
    pub y_decayed: bool,
    pub lyapunov_nonincreasing: bool,
}

/// Consolidated stability report.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub local: LocalCriterion,
    pub delta_strict: DeltaStrictness,
    pub immature: ImmatureClassification,
    pub dominant_root_real_part: f64,
    pub schedule: Option<PropagationSchedule>,
    pub simulation: ImmatureSimVerdict,
    pub overall: OverallVerdict,
}

/// Evaluate every criterion and classify.
///
/// The boundary simulation probes membership of the attraction set through
/// the immature system itself (boundary decay is exactly what global
/// stability reduces to): one biological run from `μ̄₀ = θ(0)` with
/// compatible proliferating data over `50 r`.
pub fn classify(tables: &CharTables) -> Result<StabilityReport> {
    let spec = tables.spec();
    let local = local_criterion(tables)?;
    let delta_strict = check_delta_strict(spec, tables);
    let params = immature::ImmatureParams::from_spec(spec)?;
    let immature_class = classify_stability(&params);
    let root = immature::characteristic_root(&params)?;

    let schedule = if delta_strict.holds {
        Some(tables.schedule(0.05)?)
    } else {
        None
    };

    // certification run
    let mu0 = params.hill.theta;
    let gamma0 = params.hill.flux(mu0);
    let opts = IntegratorOptions::default();
    let phase = immature::solve_initial_phase(&params, mu0, |_| gamma0, &opts)?;
    let horizon = 50.0 * params.r;
    let traj = immature::solve_dde(&params, &phase, horizon, &opts)?;
    let x_initial_sup = traj.sup_x(0.0, params.r);
    let x_final_sup = traj.sup_x(horizon - params.r, horizon);
    let y_final = traj.y(horizon).unwrap_or(0.0);
    let mut lyapunov_ok = true;
    if immature_class.verdict == ImmatureVerdict::GloballyStable {
        let mut prev = immature::lyapunov_j_along(&traj, 0.0);
        let samples = 200;
        for k in 1..=samples {
            let t = (horizon - params.r) * k as f64 / samples as f64;
            let j = immature::lyapunov_j_along(&traj, t);
            if j > prev + 10.0 * (immature::RTOL * (1.0 + prev.abs())) {
                lyapunov_ok = false;
                break;
            }
            prev = j;
        }
    }
    let simulation = ImmatureSimVerdict {
        horizon,
        x_initial_sup,
        x_final_sup,
        x_decayed: x_final_sup <= 1e-4 * x_initial_sup.max(f64::MIN_POSITIVE),
        y_final,
        y_decayed: y_final.abs() <= 1e-4 * x_initial_sup.max(f64::MIN_POSITIVE),
        lyapunov_nonincreasing: lyapunov_ok,
    };

    let overall = if immature_class.margin <= 0.0 {
        OverallVerdict::Unstable
    } else if local.holds && delta_strict.holds {
        OverallVerdict::GloballyExpStable
    } else if !local.holds {
        OverallVerdict::ImmatureStableOnly
    } else {
        OverallVerdict::Indeterminate
    };

    Ok(StabilityReport {
        local,
        delta_strict,
        immature: immature_class,
        dominant_root_real_part: root.real_part,
        schedule,
        simulation,
        overall,
    })
}

// ---------------------------------------------------------------------------
// Twin-run dependence experiment
// ---------------------------------------------------------------------------

/// Per-dump-time field differences of the twin runs.
#[derive(Debug, Clone, Serialize)]
pub struct DependenceRow {
    pub t: f64,
    /// max |N₁ - N₂| over the inherited band `[0, g(b)]`.
    pub diff_low: f64,
    /// ... over `[0, g(1)]`.
    pub diff_mid: f64,
    /// ... over `[0, 1]`.
    pub diff_full: f64,
    pub diff_p_full: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DependenceOutcome {
    pub schedule: PropagationSchedule,
    pub rows: Vec<DependenceRow>,
    /// (i) `N₁ = N₂` bit-exactly on `[0, g(b)]` at every dump time.
    pub exact_low_band: bool,
    /// (ii) agreement on `[0, g(1)]` within `tol_mid` for `t >= t̄`.
    pub mid_band_pass: bool,
    /// (iii) agreement on `[0, 1]` within `tol_full` for `t >= t_full`.
    pub full_pass: bool,
    /// same as (iii) for the proliferating field.
    pub p_full_pass: bool,
    pub tol_mid: f64,
    pub tol_full: f64,
}

/// Run the twin simulations and evaluate the finite-time dependence
/// thresholds. `data1` and `data2` must agree exactly on `[0, b]`; the
/// mid/full tolerances are supplied by the caller (typically a multiple of
/// the measured self-convergence error at the same resolution).
#[allow(clippy::too_many_arguments)]
pub fn dependence_experiment(
    tables: &CharTables,
    data1: &InitialData,
    data2: &InitialData,
    b: f64,
    config: &SolverConfig,
    horizon: f64,
    dump_times: &[f64],
    tol_mid: f64,
    tol_full: f64,
) -> Result<(DependenceOutcome, FieldSolution, FieldSolution)> {
    let spec = tables.spec();
    // exact agreement of the data below b
    for i in 0..=512 {
        let m = b * i as f64 / 512.0;
        if data1.mu(m) != data2.mu(m) {
            return Err(Error::PreconditionViolated {
                detail: format!("resting data differ at m = {m} <= b"),
            });
        }
        for k in 0..=8 {
            let a = spec.tau_max * k as f64 / 8.0;
            if data1.gamma(m, a) != data2.gamma(m, a) {
                return Err(Error::PreconditionViolated {
                    detail: format!("proliferating data differ at (m, a) = ({m}, {a})"),
                });
            }
        }
    }
    let strict = check_delta_strict(spec, tables);
    if !strict.holds {
        return Err(Error::PreconditionViolated {
            detail: "the strict commitment inequality Δ(m) < m must hold".into(),
        });
    }

    let schedule = tables.schedule(b)?;
    let sol1 = simulate(tables, data1, config, horizon, dump_times)?;
    let sol2 = simulate(tables, data2, config, horizon, dump_times)?;

    let g_b = spec.division.eval(b);
    let g_1 = spec.division.g1();
    let mut rows = Vec::new();
    let mut exact_low = true;
    let mut mid_pass = true;
    let mut full_pass = true;
    let mut p_full_pass = true;
    for si in 0..sol1.snapshots.len() {
        let t = sol1.snapshots[si].t;
        let row = DependenceRow {
            t,
            diff_low: sol1.max_diff_n(&sol2, si, g_b),
            diff_mid: sol1.max_diff_n(&sol2, si, g_1),
            diff_full: sol1.max_diff_n(&sol2, si, 1.0),
            diff_p_full: sol1.max_diff_p(&sol2, si, 1.0),
        };
        if row.diff_low != 0.0 {
            exact_low = false;
        }
        if t >= schedule.t_bar && row.diff_mid > tol_mid {
            mid_pass = false;
        }
        if t >= schedule.t_full {
            if row.diff_full > tol_full {
                full_pass = false;
            }
            if row.diff_p_full > tol_full {
                p_full_pass = false;
            }
        }
        rows.push(row);
    }
    Ok((
        DependenceOutcome {
            schedule,
            rows,
            exact_low_band: exact_low,
            mid_band_pass: mid_pass,
            full_pass,
            p_full_pass,
            tol_mid,
            tol_full,
        },
        sol1,
        sol2,
    ))
}

// ---------------------------------------------------------------------------
// Extinction experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ExtinctionOutcome {
    /// Predicted extinction deadline `(N+3) τ_max - ln h(g(b))`.
    pub predicted: f64,
    /// First dump time with `sup_m |N| <= 1e-8 ·` (initial sup).
    pub extinct_by: Option<f64>,
    pub initial_sup: f64,
    /// Whether the band `[0, g(b)]` stayed bit-exactly zero all run.
    pub zero_band_exact: bool,
    pub pass: bool,
}

/// Simulate initial data vanishing on `[0, b]` and check the population is
/// numerically extinct no later than the predicted deadline.
pub fn extinction_experiment(
    tables: &CharTables,
    data: &InitialData,
    b: f64,
    config: &SolverConfig,
) -> Result<(ExtinctionOutcome, FieldSolution)> {
    let spec = tables.spec();
    for i in 0..=512 {
        let m = b * i as f64 / 512.0;
        if data.mu(m) != 0.0 || data.gamma(m, 0.0) != 0.0 {
            return Err(Error::PreconditionViolated {
                detail: format!("data must vanish exactly on [0, b]; nonzero at m = {m}"),
            });
        }
    }
    let strict = check_delta_strict(spec, tables);
    if !strict.holds {
        return Err(Error::PreconditionViolated {
            detail: "the strict commitment inequality Δ(m) < m must hold".into(),
        });
    }
    let schedule = tables.schedule(b)?;
    let predicted = schedule.t_full;
    let horizon = predicted * 1.08;
    let mut dumps: Vec<f64> = (0..)
        .map(|k| 0.25 * k as f64)
        .take_while(|&t| t < horizon)
        .collect();
    dumps.push(predicted);
    dumps.push(horizon);

    let mut cfg = config.clone();
    cfg.track_zero_below = Some(spec.division.eval(b));
    let sol = simulate(tables, data, &cfg, horizon, &dumps)?;

    let initial_sup = sol.sup_n(0, 1.0);
    let threshold = 1e-8 * initial_sup.max(f64::MIN_POSITIVE);
    let extinct_by = sol
        .snapshots
        .iter()
        .enumerate()
        .find(|(si, _)| sol.sup_n(*si, 1.0) <= threshold)
        .map(|(_, s)| s.t);
    // dump times snap to the step grid; allow that alignment slack
    let pass = extinct_by.map(|t| t <= predicted + sol.dt).unwrap_or(initial_sup == 0.0);
    Ok((
        ExtinctionOutcome {
            predicted,
            extinct_by,
            initial_sup,
            zero_band_exact: sol.diagnostics.zero_band_violations == 0,
            pass,
        },
        sol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use approx::assert_relative_eq;

    fn tables_for(kappa: f64, alpha: f64, delta: f64, gamma: f64, beta0: f64) -> CharTables {
        let spec = ModelSpec::reference_family(kappa, alpha, delta, gamma, beta0, 1.0, 2.0).unwrap();
        CharTables::new(&spec).unwrap()
    }

    #[test]
    fn local_criterion_reference_arithmetic() {
        // κ=2, γ=0.2, δ=0.1, β₀≡1: lhs = (1+2κ)·1 = 5, rhs = 1.1
        let t = tables_for(2.0, 4.0, 0.1, 0.2, 1.0);
        let c = local_criterion(&t).unwrap();
        assert_relative_eq!(c.sup_xi, 2.0, epsilon = 1e-12);
        assert_relative_eq!(c.lhs, 5.0, epsilon = 1e-12);
        assert_relative_eq!(c.rhs, 1.1, epsilon = 1e-12);
        assert!(!c.holds);
    }

    #[test]
    fn local_criterion_zero_reentry_limit() {
        let t = tables_for(2.0, 4.0, 0.3, 0.5, 0.0);
        let c = local_criterion(&t).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.holds);
    }

    #[test]
    fn classify_three_regimes() {
        // κ=2, α=4, δ=γ=6, β₀≡1: lhs = 5 < rhs = 7, α > κ
        let t = tables_for(2.0, 4.0, 6.0, 6.0, 1.0);
        let rep = classify(&t).unwrap();
        assert_eq!(rep.overall, OverallVerdict::GloballyExpStable);
        assert!(rep.simulation.x_decayed && rep.simulation.y_decayed);
        assert!(rep.simulation.lyapunov_nonincreasing);
        assert!(rep.dominant_root_real_part < 0.0);

        // κ=4, α=4.5, γ=δ=0, β₀≡2: immature margin ≈ -0.556
        let t = tables_for(4.0, 4.5, 0.0, 0.0, 2.0);
        let rep = classify(&t).unwrap();
        assert_eq!(rep.overall, OverallVerdict::Unstable);
        assert_relative_eq!(rep.immature.margin, -0.5555556, epsilon = 1e-6);
        assert!(rep.dominant_root_real_part > 0.0);

        // reference regime: immature stable, local criterion fails
        let t = tables_for(2.0, 4.0, 0.1, 0.2, 1.0);
        let rep = classify(&t).unwrap();
        assert_eq!(rep.overall, OverallVerdict::ImmatureStableOnly);
        assert_relative_eq!(rep.immature.margin, 1.342142, epsilon = 1e-5);
        assert!(rep.schedule.is_some());
    }

    #[test]
    fn classify_indeterminate_when_only_commitment_fails() {
        // heavy mortality satisfies the local criterion and the boundary
        // margin, but α < κ breaks the strict commitment inequality: none
        // of the sufficient conditions applies
        let t = tables_for(2.0, 1.5, 6.0, 6.0, 1.0);
        let rep = classify(&t).unwrap();
        assert!(rep.local.holds);
        assert!(!rep.delta_strict.holds);
        assert!(rep.immature.margin > 0.0);
        assert_eq!(rep.overall, OverallVerdict::Indeterminate);
        assert!(rep.schedule.is_none());
    }

    #[test]
    fn classify_monotone_in_beta0() {
        // scaling β₀ down never flips GloballyExpStable to Unstable
        for (kappa, alpha, d, g) in [(2.0, 4.0, 6.0, 6.0), (1.5, 3.0, 4.0, 5.0)] {
            let hi = classify(&tables_for(kappa, alpha, d, g, 1.0)).unwrap();
            if hi.overall == OverallVerdict::GloballyExpStable {
                for scale in [0.5, 0.1, 0.01] {
                    let lo = classify(&tables_for(kappa, alpha, d, g, scale)).unwrap();
                    assert_ne!(lo.overall, OverallVerdict::Unstable);
                }
            }
        }
    }

    #[test]
    fn dependence_identical_data_differ_nowhere() {
        let t = tables_for(2.0, 4.0, 0.1, 0.2, 1.0);
        let data = InitialData::new(
            crate::model::ProfileSpec::Constant { value: 0.4 },
            crate::model::ProfileSpec::Zero,
        )
        .unwrap();
        let cfg = SolverConfig {
            nodes: 64,
            u_floor: 4e-3,
            dt: 4e-3,
            ..Default::default()
        };
        let (out, _, _) =
            dependence_experiment(&t, &data, &data, 0.05, &cfg, 2.0, &[0.0, 1.0, 2.0], 1e-12, 1e-12)
                .unwrap();
        for row in &out.rows {
            assert_eq!(row.diff_full, 0.0);
            assert_eq!(row.diff_p_full, 0.0);
        }
        assert!(out.exact_low_band);
    }

    #[test]
    fn dependence_rejects_differing_low_band() {
        let t = tables_for(2.0, 4.0, 0.1, 0.2, 1.0);
        let d1 = InitialData::new(
            crate::model::ProfileSpec::Constant { value: 0.4 },
            crate::model::ProfileSpec::Zero,
        )
        .unwrap();
        let d2 = InitialData::new(
            crate::model::ProfileSpec::Constant { value: 0.5 },
            crate::model::ProfileSpec::Zero,
        )
        .unwrap();
        let cfg = SolverConfig::default();
        let r = dependence_experiment(&t, &d1, &d2, 0.05, &cfg, 1.0, &[1.0], 1e-9, 1e-9);
        assert!(matches!(r, Err(Error::PreconditionViolated { .. })));
    }

    #[test]
    fn globally_stable_spec_field_decays_in_simulation() {
        // heavy mortality: classification is GloballyExpStable and a full
        // field run from bounded biological data must drop below 1e-4 of
        // its initial sup within the horizon (loss rate >= 7 here)
        let t = tables_for(2.0, 4.0, 6.0, 6.0, 1.0);
        let rep = classify(&t).unwrap();
        assert_eq!(rep.overall, OverallVerdict::GloballyExpStable);
        let data = InitialData::new(
            crate::model::ProfileSpec::Constant { value: 1.0 },
            crate::model::ProfileSpec::Constant { value: 0.5 },
        )
        .unwrap();
        let cfg = SolverConfig {
            nodes: 64,
            u_floor: 4e-3,
            dt: 2e-3,
            ..Default::default()
        };
        let sol = crate::structured::simulate(&t, &data, &cfg, 2.0, &[0.0, 2.0]).unwrap();
        let initial = sol.sup_n(0, 1.0);
        let final_sup = sol.sup_n(1, 1.0);
        assert!(
            final_sup < 1e-4 * initial,
            "field sup {final_sup} did not decay below 1e-4 of {initial}"
        );
        // the branch hand-over diagnostic is populated (jumps are expected
        // for generally incompatible data: logged, not asserted small)
        assert!(sol.diagnostics.branch_mismatch_max.is_finite());
        assert!(sol.diagnostics.min_n > -1e-8, "undershoot monitor");
    }

    #[test]
    fn extinction_trivial_all_zero_data() {
        let t = tables_for(2.0, 4.0, 0.1, 0.2, 1.0);
        let data = InitialData::new(
            crate::model::ProfileSpec::Zero,
            crate::model::ProfileSpec::Zero,
        )
        .unwrap();
        let cfg = SolverConfig {
            nodes: 64,
            u_floor: 4e-3,
            dt: 4e-3,
            ..Default::default()
        };
        let (out, _) = extinction_experiment(&t, &data, 0.05, &cfg).unwrap();
        assert!(out.pass);
        assert_eq!(out.extinct_by, Some(0.0));
        assert!(out.zero_band_exact);
    }
}
