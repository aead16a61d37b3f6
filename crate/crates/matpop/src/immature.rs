//! The immature-boundary (`m = 0`) system.
//!
//! At maturity 0 the field equations close into a scalar system for
//! `x(t) = N(t, 0)` and `y(t) = P(t, 0)`:
//!
//! ```text
//! x'(t) = -(ρ + β(0, x(t))) x(t) + 2 ξ₀(t) Γ(0, r - t)        on [0, r]
//! x'(t) = -(ρ + β(0, x(t))) x(t) + 2 ξ̄₀ β(0, x(t-r)) x(t-r)   for t >= r
//! ```
//!
//! with `ρ = δ(0) + V'(0)`, `η = γ(0) + V'(0)`, `r = τ(0)`, and the
//! boundary survival rates `ξ₀(t) = ξ̄₀ e^{η (r - t)}`, `π₀(t) = e^{-η t}`.
//! `y` never feeds back: on `[0, r]` it is the explicit `ψ` and for
//! `t >= r` it is the window integral `y(t) = ∫_{t-r}^t e^{-η(t-s)} β(0, x(s)) x(s) ds`.
//!
//! The delay equation is solved by the method of steps with an adaptive
//! Dormand–Prince 5(4) pair restarted at every breakpoint `t = k r`;
//! delayed arguments are always read from the previous segment's dense
//! output.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{HillAtMaturity, ModelSpec};
use crate::numerics::{bisect_root, gauss20, CumulativeCurve};

/// Default per-step tolerances of the adaptive integrator.
pub const RTOL: f64 = 1e-8;
pub const ATOL: f64 = 1e-10;

/// Boundary parameters of the immature system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImmatureParams {
    /// Resting loss rate `δ(0) + V'(0)`.
    pub rho: f64,
    /// Proliferating loss rate `γ(0) + V'(0)`.
    pub eta: f64,
    /// Division delay `τ(0)`.
    pub r: f64,
    /// Post-initial-layer division survival `ξ̄(0) > 0`.
    pub xi_bar0: f64,
    /// Post-initial-layer exit survival `π̄(0) = e^{-η r}`.
    pub pi_bar0: f64,
    /// Re-entry rate `β(0, ·)`.
    pub hill: HillAtMaturity,
}

impl ImmatureParams {
    // negated comparisons are deliberate: they reject NaN parameters too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(rho: f64, eta: f64, r: f64, xi_bar0: f64, hill: HillAtMaturity) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::DomainError {
                op: "ImmatureParams".into(),
                detail: format!("delay r = {r} must be > 0"),
            });
        }
        if rho < 0.0 || eta < 0.0 || !(xi_bar0 > 0.0) {
            return Err(Error::DomainError {
                op: "ImmatureParams".into(),
                detail: format!("need rho, eta >= 0 and xi_bar0 > 0 (got {rho}, {eta}, {xi_bar0})"),
            });
        }
        Ok(ImmatureParams {
            rho,
            eta,
            r,
            xi_bar0,
            pi_bar0: (-eta * r).exp(),
            hill,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let hill = spec.reentry.at(0.0);
        let xi_bar0 = spec.division.inverse_deriv(0.0) * (-spec.eta * spec.r).exp();
        ImmatureParams::new(spec.rho, spec.eta, spec.r, xi_bar0, hill)
    }

    /// Time-dependent boundary division survival `ξ(t, 0) = ξ̄₀ e^{η (r - t)}`.
    pub fn xi0(&self, t: f64) -> f64 {
        self.xi_bar0 * (self.eta * (self.r - t)).exp()
    }

    /// Time-dependent boundary exit survival `π(t, 0) = e^{-η t}`.
    pub fn pi0(&self, t: f64) -> f64 {
        (-self.eta * t).exp()
    }

    /// `β(0, 0)`.
    pub fn beta_at_zero(&self) -> f64 {
        self.hill.beta(0.0)
    }

    /// Stability margin `ρ - (2 ξ̄₀ - 1) β(0, 0)`.
    pub fn margin(&self) -> f64 {
        self.rho - (2.0 * self.xi_bar0 - 1.0) * self.beta_at_zero()
    }
}

// ---------------------------------------------------------------------------
// Adaptive Dormand–Prince 5(4) with cubic-Hermite dense output
// ---------------------------------------------------------------------------

/// Dense output of one integration span: accepted-step knots with values and
/// derivatives, evaluated between knots by cubic Hermite interpolation.
#[derive(Debug, Clone, Serialize)]
pub struct DenseSegment {
    ts: Vec<f64>,
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl DenseSegment {
    /// Build directly from sampled values and derivatives (used for
    /// prescribed history segments).
    pub fn from_samples(ts: Vec<f64>, xs: Vec<f64>, fs: Vec<f64>) -> Self {
        debug_assert!(ts.len() == xs.len() && xs.len() == fs.len() && ts.len() >= 2);
        DenseSegment { ts, xs, fs }
    }

    /// Sample a closure on a uniform grid (derivatives by central
    /// differences) so it can serve as an initial history segment.
    pub fn from_closure<F: Fn(f64) -> f64>(f: F, t0: f64, t1: f64, knots: usize) -> Self {
        let n = knots.max(8);
        let dt = (t1 - t0) / (n - 1) as f64;
        let ts: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
        let xs: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
        let h = dt * 1e-3;
        let fs: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let a = (t - h).max(t0);
                let b = (t + h).min(t1);
                (f(b) - f(a)) / (b - a)
            })
            .collect();
        DenseSegment { ts, xs, fs }
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn end_value(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn end_deriv(&self) -> f64 {
        *self.fs.last().unwrap()
    }

    fn cell(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(self.ts.len() - 2),
            Err(i) => i.clamp(1, self.ts.len() - 1) - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.cell(t);
        let h = self.ts[i + 1] - self.ts[i];
        let s = ((t - self.ts[i]) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.xs[i]
            + (s3 - 2.0 * s2 + s) * h * self.fs[i]
            + (-2.0 * s3 + 3.0 * s2) * self.xs[i + 1]
            + (s3 - s2) * h * self.fs[i + 1]
    }

    pub fn eval_deriv(&self, t: f64) -> f64 {
        let i = self.cell(t);
        let h = self.ts[i + 1] - self.ts[i];
        let s = ((t - self.ts[i]) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        (6.0 * s2 - 6.0 * s) / h * self.xs[i]
            + (3.0 * s2 - 4.0 * s + 1.0) * self.fs[i]
            + (-6.0 * s2 + 6.0 * s) / h * self.xs[i + 1]
            + (3.0 * s2 - 2.0 * s) * self.fs[i + 1]
    }
}

/// Integrator controls. `fixed_step` disables the error controller (used by
/// the convergence-order tests).
#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub fixed_step: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: RTOL,
            atol: ATOL,
            fixed_step: None,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate the scalar ODE `x' = f(t, x)` over `[t0, t1]`, recording dense
/// output. The right-hand side is evaluated freshly at stage times, so
/// discontinuous forcing must be confined to span endpoints (the method of
/// steps guarantees that).
pub fn integrate_scalar<F: Fn(f64, f64) -> f64>(
    f: F,
    t0: f64,
    t1: f64,
    x0: f64,
    opts: &IntegratorOptions,
) -> Result<DenseSegment> {
    let span = t1 - t0;
    debug_assert!(span > 0.0);
    let mut ts = vec![t0];
    let mut xs = vec![x0];
    let mut fs = vec![f(t0, x0)];

    let mut t = t0;
    let mut x = x0;
    let mut k1 = fs[0];
    // the dense output is cubic Hermite, two orders below the propagated
    // solution; capping the step keeps interpolated (delayed) reads at the
    // same accuracy level as the knots
    let h_max = span / 32.0;
    let mut h = match opts.fixed_step {
        Some(h) => h,
        None => span / 64.0,
    };
    let h_min = span * 1e-14;
    let mut k = [0.0_f64; 7];

    while t < t1 {
        let h_eff = h.min(t1 - t);
        if h_eff < h_min && t1 - t > 2.0 * h_min {
            return Err(Error::StepSizeUnderflow { t, h: h_eff });
        }
        k[0] = k1;
        for stage in 1..7 {
            let mut acc = 0.0;
            for (j, a) in DP_A[stage - 1].iter().enumerate().take(stage) {
                acc += a * k[j];
            }
            k[stage] = f(t + DP_C[stage] * h_eff, x + h_eff * acc);
        }
        let x5 = x + h_eff * (0..7).map(|i| DP_B5[i] * k[i]).sum::<f64>();
        let x4 = x + h_eff * (0..7).map(|i| DP_B4[i] * k[i]).sum::<f64>();
        let scale = opts.atol + opts.rtol * x.abs().max(x5.abs());
        let err = ((x5 - x4) / scale).abs();

        let accept = opts.fixed_step.is_some() || err <= 1.0;
        if accept {
            t += h_eff;
            x = x5;
            k1 = k[6]; // FSAL: stage 7 is f(t + h, x5)
            ts.push(t);
            xs.push(x);
            fs.push(k1);
        }
        if opts.fixed_step.is_none() {
            let grow = 0.9 * err.max(1e-12).powf(-0.2);
            h = (h_eff * grow.clamp(0.2, 5.0)).min(h_max);
        }
    }
    Ok(DenseSegment { ts, xs, fs })
}

// ---------------------------------------------------------------------------
// Initial phase and the delay equation
// ---------------------------------------------------------------------------

/// Solution of the initial-phase system on `[0, r]`: dense `φ` and the
/// explicitly evaluated `ψ`.
#[derive(Debug, Clone)]
pub struct InitialPhase {
    pub phi: DenseSegment,
    pub psi: DenseSegment,
}

/// Integrate the initial phase:
/// `φ' = -(ρ + β(0, φ)) φ + 2 ξ₀(t) Γ₀(r - t)`, `φ(0) = μ̄₀`, and evaluate
/// `ψ(t) = e^{-ηt} ∫₀^{r-t} Γ₀ + ∫₀^t e^{-η(t-s)} β(0, φ(s)) φ(s) ds`.
pub fn solve_initial_phase<G: Fn(f64) -> f64>(
    params: &ImmatureParams,
    mu0: f64,
    gamma0: G,
    opts: &IntegratorOptions,
) -> Result<InitialPhase> {
    let r = params.r;
    let hill = params.hill;
    let rhs = |t: f64, x: f64| -(params.rho + hill.beta(x)) * x + 2.0 * params.xi0(t) * gamma0(r - t);
    let phi = integrate_scalar(rhs, 0.0, r, mu0, opts)?;

    // ψ by its explicit representation; no feedback into φ.
    let gamma_cum = CumulativeCurve::build(&gamma0, r, 512);
    let weighted = |s: f64| (params.eta * s).exp() * hill.flux(phi.eval(s));
    let flux_cum = CumulativeCurve::build(weighted, r, 512);
    let mut ts = Vec::with_capacity(phi.ts.len());
    let mut xs = Vec::with_capacity(phi.ts.len());
    let mut fs = Vec::with_capacity(phi.ts.len());
    for &t in &phi.ts {
        let decay = (-params.eta * t).exp();
        let psi = decay * gamma_cum.eval(&gamma0, r - t) + decay * flux_cum.eval(weighted, t);
        ts.push(t);
        xs.push(psi);
        // exact derivative from the integral equation
        fs.push(-params.eta * psi + hill.flux(phi.eval(t)) - params.pi0(t) * gamma0(r - t));
    }
    Ok(InitialPhase {
        phi,
        psi: DenseSegment::from_samples(ts, xs, fs),
    })
}

/// Boundary trajectory: `x` over `[0, T]` as per-delay-interval dense
/// segments, with `ψ` kept for `y` on the initial interval.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ImmatureParams,
    segments: Vec<DenseSegment>,
    psi: Option<DenseSegment>,
    pub horizon: f64,
    /// One-sided derivative mismatch `x'(r⁺) - x'(r⁻)`; zero (to integrator
    /// accuracy) exactly when the initial data are compatible.
    pub derivative_jump_at_r: f64,
}

impl Trajectory {
    pub fn delay(&self) -> f64 {
        self.params.r
    }

    /// `x(t)` for `t ∈ [0, horizon]`.
    pub fn x(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        let k = ((t / self.params.r) as usize).min(self.segments.len() - 1);
        // segment k covers [k r, (k+1) r]; boundary times favor the earlier
        // segment, where both agree by construction
        let k = if t < self.segments[k].t_start() { k - 1 } else { k };
        self.segments[k].eval(t)
    }

    pub fn x_deriv(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        let k = ((t / self.params.r) as usize).min(self.segments.len() - 1);
        let k = if t < self.segments[k].t_start() { k - 1 } else { k };
        self.segments[k].eval_deriv(t)
    }

    /// `y(t)`: `ψ(t)` on `[0, r)` (when the trajectory came from full
    /// initial data), the window integral
    /// `∫_{t-r}^t e^{-η(t-s)} β(0,x(s)) x(s) ds` for `t >= r`.
    pub fn y(&self, t: f64) -> Option<f64> {
        let r = self.params.r;
        if t < r {
            return self.psi.as_ref().map(|p| p.eval(t));
        }
        let t = t.min(self.horizon);
        let hill = self.params.hill;
        let eta = self.params.eta;
        let f = |s: f64| (-eta * (t - s)).exp() * hill.flux(self.x(s));
        // split the window at the unique interior breakpoint multiple of r
        let lo = t - r;
        let k = (t / r).floor() * r;
        Some(if k > lo && k < t {
            gauss20(f, lo, k) + gauss20(f, k, t)
        } else {
            gauss20(f, lo, t)
        })
    }

    /// Largest `x` over `[from, to]`, scanned on the dense knots.
    pub fn sup_x(&self, from: f64, to: f64) -> f64 {
        let mut sup = f64::NEG_INFINITY;
        for seg in &self.segments {
            if seg.t_end() < from || seg.t_start() > to {
                continue;
            }
            for (i, &t) in seg.ts.iter().enumerate() {
                if t >= from && t <= to {
                    sup = sup.max(seg.xs[i]);
                }
            }
        }
        sup.max(self.x(from)).max(self.x(to))
    }

    /// Total variation of `x` over `[from, to]` from the dense knots.
    pub fn variation(&self, from: f64, to: f64) -> f64 {
        let mut tv = 0.0;
        let mut prev = self.x(from);
        for seg in &self.segments {
            if seg.t_end() < from || seg.t_start() > to {
                continue;
            }
            for (i, &t) in seg.ts.iter().enumerate() {
                if t > from && t <= to {
                    tv += (seg.xs[i] - prev).abs();
                    prev = seg.xs[i];
                }
            }
        }
        tv + (self.x(to) - prev).abs()
    }

    /// Uniformly sampled `(t, x, y)` rows.
    pub fn sample(&self, dt: f64) -> Vec<(f64, f64, Option<f64>)> {
        let n = (self.horizon / dt).round() as usize;
        (0..=n)
            .map(|k| {
                let t = (k as f64 * dt).min(self.horizon);
                (t, self.x(t), self.y(t))
            })
            .collect()
    }
}

/// Solve the delay equation by the method of steps from a full initial
/// phase (keeps `ψ` so `y` is defined from `t = 0`).
pub fn solve_dde(
    params: &ImmatureParams,
    phase: &InitialPhase,
    horizon: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    solve_dde_inner(params, phase.phi.clone(), Some(phase.psi.clone()), horizon, opts)
}

/// Solve the delay equation from a directly prescribed initial segment
/// `x = segment(t)` on `[0, r]` (no `ψ`; `y` is defined for `t >= r` only).
pub fn solve_dde_from_segment<F: Fn(f64) -> f64>(
    params: &ImmatureParams,
    segment: F,
    horizon: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let seg0 = DenseSegment::from_closure(segment, 0.0, params.r, 2048);
    solve_dde_inner(params, seg0, None, horizon, opts)
}

fn solve_dde_inner(
    params: &ImmatureParams,
    seg0: DenseSegment,
    psi: Option<DenseSegment>,
    horizon: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let r = params.r;
    if horizon <= r {
        return Err(Error::DomainError {
            op: "solve_dde".into(),
            detail: format!("horizon {horizon} must exceed the delay {r}"),
        });
    }
    let hill = params.hill;
    let mut segments = vec![seg0];
    let mut jump = 0.0;
    let mut k = 1usize;
    loop {
        let t_lo = k as f64 * r;
        if t_lo >= horizon {
            break;
        }
        let t_hi = ((k + 1) as f64 * r).min(horizon);
        let prev = segments[k - 1].clone();
        let x_lo = prev.end_value();
        let rhs = |t: f64, x: f64| {
            let xd = prev.eval(t - r);
            -(params.rho + hill.beta(x)) * x + 2.0 * params.xi_bar0 * hill.flux(xd)
        };
        if k == 1 {
            jump = rhs(t_lo, x_lo) - prev.end_deriv();
        }
        segments.push(integrate_scalar(rhs, t_lo, t_hi, x_lo, opts)?);
        k += 1;
    }
    Ok(Trajectory {
        params: *params,
        segments,
        psi,
        horizon,
        derivative_jump_at_r: jump,
    })
}

// ---------------------------------------------------------------------------
// Stability objects
// ---------------------------------------------------------------------------

/// Limit of `y` when `x(t) → C`:
/// `(1 - e^{-ηr})/η · β(0, C) C` for `η > 0`, `r β(0, C) C` for `η = 0`.
pub fn asymptotic_y(params: &ImmatureParams, c: f64) -> f64 {
    let flux = params.hill.flux(c);
    if params.eta > 0.0 {
        (1.0 - (-params.eta * params.r).exp()) / params.eta * flux
    } else {
        params.r * flux
    }
}

/// Lyapunov functional over one delay window:
/// `J(φ) = 𝓕(φ(r)) + ξ̄₀ ∫₀^r f²(φ(σ)) dσ` with `f(x) = x β(0, x)` and
/// `𝓕 = ∫₀^· f`.
pub fn lyapunov_j<F: Fn(f64) -> f64>(params: &ImmatureParams, segment: F) -> f64 {
    let hill = params.hill;
    let integrand = |s: f64| {
        let v = hill.flux(segment(s));
        v * v
    };
    // composite panels keep the quadrature error well under the descent
    // allowance even for wiggly segments
    let panels = 8;
    let mut acc = 0.0;
    for i in 0..panels {
        let a = params.r * i as f64 / panels as f64;
        let b = params.r * (i + 1) as f64 / panels as f64;
        acc += gauss20(integrand, a, b);
    }
    hill.flux_antiderivative(segment(params.r)) + params.xi_bar0 * acc
}

/// Dissipation rate `λ(u) = (ρ - (2ξ̄₀ - 1) β(0, u)) β(0, u) u²`; positive
/// for `u > 0` exactly in the globally stable regime.
pub fn lyapunov_rate(params: &ImmatureParams, u: f64) -> f64 {
    let b = params.hill.beta(u);
    (params.rho - (2.0 * params.xi_bar0 - 1.0) * b) * b * u * u
}

/// `J` along a trajectory: the window `[t, t + r]` as the current segment.
pub fn lyapunov_j_along(traj: &Trajectory, t: f64) -> f64 {
    lyapunov_j(&traj.params, |s| traj.x(t + s))
}

/// Verdict of the boundary stability dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ImmatureVerdict {
    GloballyStable,
    Unstable,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImmatureClassification {
    pub verdict: ImmatureVerdict,
    /// `ρ - (2ξ̄₀ - 1) β(0, 0)`: positive margins are globally stable,
    /// non-positive margins unstable.
    pub margin: f64,
}

/// The trivial solution of the boundary delay equation is globally stable
/// iff `(2ξ̄₀ - 1) β(0, 0) < ρ`.
pub fn classify_stability(params: &ImmatureParams) -> ImmatureClassification {
    let margin = params.margin();
    ImmatureClassification {
        verdict: if margin > 0.0 {
            ImmatureVerdict::GloballyStable
        } else {
            ImmatureVerdict::Unstable
        },
        margin,
    }
}

/// Dominant characteristic root of the linearization at 0:
/// `λ = -(ρ + β(0,0)) + 2 ξ̄₀ β(0,0) e^{-λ r}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CharacteristicRoot {
    /// Real part of the rightmost root (the real branch; with a positive
    /// delayed coefficient it dominates every complex pair).
    pub real_part: f64,
    /// Number of roots found strictly to the right of the real branch by
    /// the argument-principle scan (0 certifies dominance).
    pub roots_right_of_real: usize,
}

pub fn characteristic_root(params: &ImmatureParams) -> Result<CharacteristicRoot> {
    let c = params.rho + params.beta_at_zero();
    let b = 2.0 * params.xi_bar0 * params.beta_at_zero();
    let r = params.r;
    if b == 0.0 {
        return Ok(CharacteristicRoot {
            real_part: -c,
            roots_right_of_real: 0,
        });
    }
    // real branch: d(λ) = λ + c - b e^{-λ r} is strictly increasing
    let d = |l: f64| l + c - b * (-l * r).exp();
    let mut lo = 0.0;
    let mut hi = 0.0;
    if d(0.0) <= 0.0 {
        hi = b.max(1.0);
        while d(hi) < 0.0 {
            hi *= 2.0;
        }
    } else {
        lo = -1.0;
        while d(lo) > 0.0 {
            lo *= 2.0;
            if lo < -1e6 {
                return Err(Error::SearchInconclusive {
                    detail: "real characteristic branch escaped the search window".into(),
                });
            }
        }
    }
    let real_part = bisect_root(d, lo, hi, 1e-13)?;

    // argument-principle scan of the strip to the right of the real branch:
    // every root satisfies |λ + c| = b e^{-Re λ · r}, so roots with
    // Re λ >= real_part + gap live inside a known disc around -c.
    let gap = 1e-6 + 1e-9 * real_part.abs();
    let left = real_part + gap;
    let radius = b * (-left * r).exp();
    let right = (radius - c).max(left) + 1.0;
    let height = radius + 1.0;
    let count = winding_zero_count(c, b, r, left, right, -height, height)?;
    Ok(CharacteristicRoot {
        real_part,
        roots_right_of_real: count,
    })
}

/// Count zeros of `D(λ) = λ + c - b e^{-λ r}` inside the rectangle by the
/// winding number of `D` along its boundary, refining segments until each
/// argument increment is small.
fn winding_zero_count(
    c: f64,
    b: f64,
    r: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
) -> Result<usize> {
    let eval = |x: f64, y: f64| -> (f64, f64) {
        // D(x + iy) = x + iy + c - b e^{-xr} (cos(yr) - i sin(yr))
        let e = b * (-x * r).exp();
        (x + c - e * (y * r).cos(), y + e * (y * r).sin())
    };
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)];
    let mut total = 0.0;
    for w in corners.windows(2) {
        let (xa, ya) = w[0];
        let (xb, yb) = w[1];
        let mut stack = vec![(0.0_f64, 1.0_f64)];
        while let Some((s0, s1)) = stack.pop() {
            let p0 = eval(xa + (xb - xa) * s0, ya + (yb - ya) * s0);
            let p1 = eval(xa + (xb - xa) * s1, ya + (yb - ya) * s1);
            let m0 = (p0.0 * p0.0 + p0.1 * p0.1).sqrt();
            let m1 = (p1.0 * p1.0 + p1.1 * p1.1).sqrt();
            if m0 == 0.0 || m1 == 0.0 {
                return Err(Error::SearchInconclusive {
                    detail: "characteristic function vanished on the scan contour".into(),
                });
            }
            let cross = p0.0 * p1.1 - p0.1 * p1.0;
            let dot = p0.0 * p1.0 + p0.1 * p1.1;
            let dang = cross.atan2(dot);
            if dang.abs() < 0.5 && dot > 0.0 {
                total += dang;
            } else {
                if s1 - s0 < 1e-12 {
                    return Err(Error::SearchInconclusive {
                        detail: "contour refinement exhausted".into(),
                    });
                }
                let mid = 0.5 * (s0 + s1);
                stack.push((s0, mid));
                stack.push((mid, s1));
            }
        }
    }
    let winding = total / std::f64::consts::TAU;
    let count = winding.round();
    if (winding - count).abs() > 0.25 || count < 0.0 {
        return Err(Error::SearchInconclusive {
            detail: format!("non-integer winding number {winding}"),
        });
    }
    Ok(count as usize)
}

/// Whether the unbounded-growth counterexample hypotheses hold: `ρ = 0`,
/// Hill exponent `n > 1` (so the flux decreases beyond `x̄ = θ/(n-1)^{1/n}`),
/// `μ̄(0) > x̄`, compatible initial data, and
/// `2 ξ₀(t) Γ₀(r - t) > Γ₀(0)` on the delay interval.
#[derive(Debug, Clone, Serialize)]
pub struct UnboundedScenario {
    pub applies: bool,
    pub x_bar: f64,
    pub reasons: Vec<String>,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn unbounded_scenario_check<G: Fn(f64) -> f64>(
    params: &ImmatureParams,
    mu0: f64,
    gamma0: G,
) -> UnboundedScenario {
    let mut reasons = Vec::new();
    let n = params.hill.exponent;
    let x_bar = if n > 1.0 {
        params.hill.theta / (n - 1.0).powf(1.0 / n)
    } else {
        reasons.push("Hill exponent must exceed 1 for the flux to turn over".into());
        f64::INFINITY
    };
    if params.rho != 0.0 {
        reasons.push(format!("rho = {} must be exactly 0", params.rho));
    }
    if !(mu0 > x_bar) {
        reasons.push(format!("initial boundary density {mu0} must exceed x̄ = {x_bar}"));
    }
    let compat = (gamma0(0.0) - params.hill.flux(mu0)).abs();
    if compat > crate::model::COMPATIBILITY_TOL {
        reasons.push(format!("initial data incompatible (|Γ(0,0) - f(μ̄₀)| = {compat:e})"));
    }
    let g00 = gamma0(0.0);
    let grid = 512;
    for i in 0..=grid {
        let t = params.r * i as f64 / grid as f64;
        if 2.0 * params.xi0(t) * gamma0(params.r - t) <= g00 {
            reasons.push(format!("2 ξ₀(t) Γ₀(r - t) <= Γ₀(0) at t = {t}"));
            break;
        }
    }
    UnboundedScenario {
        applies: reasons.is_empty(),
        x_bar,
        reasons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_params() -> ImmatureParams {
        // reference family κ=2, α=4, δ=0.1, γ=0.2, Hill(1,1,2):
        // ρ=1.1, η=1.2, r=ln4, ξ̄₀ = 2·4^{-1.2}
        let spec =
            crate::model::ModelSpec::reference_family(2.0, 4.0, 0.1, 0.2, 1.0, 1.0, 2.0).unwrap();
        ImmatureParams::from_spec(&spec).unwrap()
    }

    #[test]
    fn params_from_reference_spec() {
        let p = reference_params();
        assert_relative_eq!(p.rho, 1.1, epsilon = 1e-15);
        assert_relative_eq!(p.eta, 1.2, epsilon = 1e-15);
        assert_relative_eq!(p.r, 4.0_f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(p.xi_bar0, 2.0 * 4.0_f64.powf(-1.2), epsilon = 1e-14);
        assert_relative_eq!(p.pi_bar0, 4.0_f64.powf(-1.2), epsilon = 1e-14);
    }

    #[test]
    fn integrator_matches_linear_decay() {
        // Γ₀ ≡ 0 and β ≡ 0 reduce the initial phase to φ' = -ρφ
        let p = ImmatureParams::new(1.0, 0.5, 1.0, 0.4, HillAtMaturity::new(0.0, 1.0, 2.0))
            .unwrap();
        let phase = solve_initial_phase(&p, 2.0, |_| 0.0, &IntegratorOptions::default()).unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            assert_relative_eq!(phase.phi.eval(t), 2.0 * (-t).exp(), epsilon = 1e-7);
        }
    }

    #[test]
    fn integrator_fixed_step_order() {
        // fifth-order propagation: halving the step shrinks endpoint error ~32x;
        // dense Hermite sampling still gains >= 2^4
        let f = |t: f64, x: f64| -x + (2.0 * t).sin();
        let exact = |t: f64| {
            // solution of x' = -x + sin 2t, x(0) = 1
            let c = 1.0 + 2.0 / 5.0;
            c * (-t).exp() + (2.0 * t).sin() / 5.0 - 2.0 * (2.0 * t).cos() / 5.0
        };
        let mut errs = Vec::new();
        for n in [40.0, 80.0] {
            let seg = integrate_scalar(
                f,
                0.0,
                2.0,
                1.0,
                &IntegratorOptions {
                    fixed_step: Some(2.0 / n),
                    ..Default::default()
                },
            )
            .unwrap();
            let mut e = 0.0_f64;
            for k in 0..=400 {
                let t = 2.0 * k as f64 / 400.0;
                e = e.max((seg.eval(t) - exact(t)).abs());
            }
            errs.push(e);
        }
        assert!(
            errs[0] / errs[1] >= 14.0,
            "convergence ratio {} below nominal order",
            errs[0] / errs[1]
        );
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = reference_params();
        let phase = solve_initial_phase(&p, 0.0, |_| 0.0, &IntegratorOptions::default()).unwrap();
        let traj = solve_dde(&p, &phase, 10.0 * p.r, &IntegratorOptions::default()).unwrap();
        for k in 0..=100 {
            let t = traj.horizon * k as f64 / 100.0;
            assert_eq!(traj.x(t), 0.0);
            if t >= p.r {
                assert_eq!(traj.y(t).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn nonnegative_data_stay_nonnegative() {
        let p = reference_params();
        let phase =
            solve_initial_phase(&p, 1.5, |a| 0.3 + 0.2 * a, &IntegratorOptions::default()).unwrap();
        for k in 0..=50 {
            let t = p.r * k as f64 / 50.0;
            assert!(phase.phi.eval(t) >= 0.0);
            assert!(phase.psi.eval(t) >= 0.0);
        }
        let traj = solve_dde(&p, &phase, 30.0 * p.r, &IntegratorOptions::default()).unwrap();
        for k in 0..=300 {
            let t = traj.horizon * k as f64 / 300.0;
            assert!(traj.x(t) >= -1e-12);
            if t >= p.r {
                assert!(traj.y(t).unwrap() >= -1e-12);
            }
        }
    }

    #[test]
    fn stable_reference_regime_decays() {
        let p = reference_params();
        assert!(classify_stability(&p).margin > 0.0);
        let phase = solve_initial_phase(&p, 1.0, |_| 0.4, &IntegratorOptions::default()).unwrap();
        let traj = solve_dde(&p, &phase, 50.0 * p.r, &IntegratorOptions::default()).unwrap();
        let tail = traj.sup_x(traj.horizon - p.r, traj.horizon);
        assert!(tail < 1e-4, "tail sup {tail} did not decay");
    }

    #[test]
    fn y_consistency_direct_integration_vs_window_formula() {
        let p = reference_params();
        let phase = solve_initial_phase(&p, 1.2, |a| 0.3 * (1.0 + a), &IntegratorOptions::default())
            .unwrap();
        let traj = solve_dde(&p, &phase, 6.0 * p.r, &IntegratorOptions::default()).unwrap();
        // integrate y' = -ηy + f(x(t)) - π̄₀ f(x(t-r)) from y(r), restarting
        // at the breakpoints where the delayed flux has kinks
        let hill = p.hill;
        let rhs = |t: f64, y: f64| {
            -p.eta * y + hill.flux(traj.x(t)) - p.pi_bar0 * hill.flux(traj.x(t - p.r))
        };
        let mut y = traj.y(p.r).unwrap();
        let mut segs = Vec::new();
        let mut k = 1;
        while (k as f64) * p.r < traj.horizon {
            let a = k as f64 * p.r;
            let b = ((k + 1) as f64 * p.r).min(traj.horizon);
            let seg = integrate_scalar(rhs, a, b, y, &IntegratorOptions::default()).unwrap();
            y = seg.end_value();
            segs.push(seg);
            k += 1;
        }
        for seg in &segs {
            for j in 0..=10 {
                let t = seg.t_start() + (seg.t_end() - seg.t_start()) * j as f64 / 10.0;
                assert_relative_eq!(seg.eval(t), traj.y(t).unwrap(), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn derivative_jump_tracks_compatibility() {
        let p = reference_params();
        // compatible: Γ(0,0) = β(0, μ̄₀) μ̄₀ = 0.5 for μ̄₀ = 1
        let phase = solve_initial_phase(&p, 1.0, |_| 0.5, &IntegratorOptions::default()).unwrap();
        let traj = solve_dde(&p, &phase, 3.0 * p.r, &IntegratorOptions::default()).unwrap();
        assert!(traj.derivative_jump_at_r.abs() < 1e-7);
        // incompatible: Γ(0,0) = 0.7
        let phase = solve_initial_phase(&p, 1.0, |_| 0.7, &IntegratorOptions::default()).unwrap();
        let traj = solve_dde(&p, &phase, 3.0 * p.r, &IntegratorOptions::default()).unwrap();
        // jump = 2 ξ̄₀ (f(μ̄₀) - Γ₀(0)) = 2 ξ̄₀ (0.5 - 0.7)
        assert_relative_eq!(
            traj.derivative_jump_at_r,
            2.0 * p.xi_bar0 * (0.5 - 0.7),
            epsilon = 1e-6
        );
    }

    #[test]
    fn asymptotic_y_cases() {
        let hill = HillAtMaturity::new(1.0, 1.0, 2.0);
        // η = 0, r = 2, C = 1: r β(0,1)·1 = 2·(1/2) = 1
        let p = ImmatureParams::new(0.5, 0.0, 2.0, 0.6, hill).unwrap();
        assert_relative_eq!(asymptotic_y(&p, 1.0), 1.0, epsilon = 1e-14);
        assert_eq!(asymptotic_y(&p, 0.0), 0.0);
        // η = 0.5, r = ln 4, C = 2: (1 - 0.5)/0.5 · (1/5)·2 = 0.4
        let p = ImmatureParams::new(0.5, 0.5, 4.0_f64.ln(), 0.6, hill).unwrap();
        assert_relative_eq!(asymptotic_y(&p, 2.0), 0.4, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_examples() {
        let p = reference_params();
        assert_eq!(lyapunov_j(&p, |_| 0.0), 0.0);
        assert_eq!(lyapunov_rate(&p, 0.0), 0.0);
        // J(1) = ½ ln 2 + ξ̄₀ · ln 4 · ¼
        let expected = 0.5 * 2.0_f64.ln() + p.xi_bar0 * 4.0_f64.ln() * 0.25;
        assert_relative_eq!(lyapunov_j(&p, |_| 1.0), expected, epsilon = 1e-12);
        assert_relative_eq!(expected, 0.4779004, epsilon = 1e-6);
        // positive margin makes λ(u) > 0 away from 0
        for u in [0.1, 1.0, 7.5] {
            assert!(lyapunov_rate(&p, u) > 0.0);
        }
    }

    #[test]
    fn classification_examples() {
        let p = reference_params();
        let c = classify_stability(&p);
        assert_eq!(c.verdict, ImmatureVerdict::GloballyStable);
        assert_relative_eq!(c.margin, 1.342142, epsilon = 1e-5);

        // κ=4, α=4.5, γ=0, δ=0, β₀=2: ξ̄₀ = κ/α, margin = 1 - (2κ/α - 1)·2
        let hill = HillAtMaturity::new(2.0, 1.0, 2.0);
        let p = ImmatureParams::new(1.0, 1.0, 4.5_f64.ln(), 4.0 / 4.5, hill).unwrap();
        let c = classify_stability(&p);
        assert_eq!(c.verdict, ImmatureVerdict::Unstable);
        assert_relative_eq!(c.margin, 1.0 - (8.0 / 4.5 - 1.0) * 2.0, epsilon = 1e-12);
        assert_relative_eq!(c.margin, -0.555556, epsilon = 1e-5);

        // ξ̄₀ = 1/2 neutralizes the delayed term: margin = ρ
        let p = ImmatureParams::new(0.7, 1.0, 1.0, 0.5, HillAtMaturity::new(5.0, 1.0, 2.0))
            .unwrap();
        assert_relative_eq!(classify_stability(&p).margin, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn characteristic_root_cases() {
        // ρ = 0, 2ξ̄₀ = 1: λ = 0 exactly
        let p = ImmatureParams::new(0.0, 0.3, 1.0, 0.5, HillAtMaturity::new(1.0, 1.0, 2.0))
            .unwrap();
        let root = characteristic_root(&p).unwrap();
        assert_relative_eq!(root.real_part, 0.0, epsilon = 1e-10);
        assert_eq!(root.roots_right_of_real, 0);

        // stable reference regime: dominant root negative
        let root = characteristic_root(&reference_params()).unwrap();
        assert!(root.real_part < 0.0);
        assert_eq!(root.roots_right_of_real, 0);

        // unstable example: dominant root positive
        let hill = HillAtMaturity::new(2.0, 1.0, 2.0);
        let p = ImmatureParams::new(1.0, 1.0, 4.5_f64.ln(), 4.0 / 4.5, hill).unwrap();
        let root = characteristic_root(&p).unwrap();
        assert!(root.real_part > 0.0);
        assert_eq!(root.roots_right_of_real, 0);
    }

    #[test]
    fn unbounded_scenario_gates() {
        let hill = HillAtMaturity::new(4.0, 1.0, 2.0);
        let p = ImmatureParams::new(0.0, 0.2, 1.0, 0.95, hill).unwrap();
        assert_relative_eq!(
            unbounded_scenario_check(&p, 2.0, |_| hill.flux(2.0)).x_bar,
            1.0,
            epsilon = 1e-14
        );
        // Γ₀ ≡ 0 fails the strict forcing inequality
        let s = unbounded_scenario_check(&p, 2.0, |_| 0.0);
        assert!(!s.applies);
        // ρ > 0 fails
        let p2 = ImmatureParams::new(0.1, 0.2, 1.0, 0.95, hill).unwrap();
        let s = unbounded_scenario_check(&p2, 2.0, |_| hill.flux(2.0));
        assert!(!s.applies);
        // the full setup applies
        let s = unbounded_scenario_check(&p, 2.0, |_| hill.flux(2.0));
        assert!(s.applies, "{:?}", s.reasons);
    }

    #[test]
    fn bounded_when_rho_positive() {
        let p = reference_params();
        let phase = solve_initial_phase(&p, 3.0, |_| 1.0, &IntegratorOptions::default()).unwrap();
        let t1 = solve_dde(&p, &phase, 40.0 * p.r, &IntegratorOptions::default()).unwrap();
        let t2 = solve_dde(&p, &phase, 80.0 * p.r, &IntegratorOptions::default()).unwrap();
        let s1 = t1.sup_x(0.0, t1.horizon);
        let s2 = t2.sup_x(0.0, t2.horizon);
        assert!(s1.is_finite() && s2.is_finite());
        assert!((s2 - s1).abs() <= 0.01 * s1.max(1e-12));
    }
}
