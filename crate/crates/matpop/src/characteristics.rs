//! Characteristic-curve machinery.
//!
//! Backward characteristics of the maturation flow are
//! `χ(s, m) = h⁻¹(h(m) eˢ)` for `s <= 0`, where
//! `h(m) = exp(-∫ₘ¹ ds/V(s))` maps maturity onto `[0, 1]` with `h(0) = 0`.
//! On top of `h` sit the commitment maturity `Θ(m)` (unique solution of
//! `x = χ(-τ(x), m)`), the mother-commitment maturity `Δ(m) = Θ(g⁻¹(m))`,
//! the phase survival kernels
//!
//! ```text
//! K(t, m) = exp(-∫₀ᵗ [δ(χ(-s, m)) + V'(χ(-s, m))] ds)
//! H(t, m) = exp(-∫₀ᵗ [γ(χ(-s, m)) + V'(χ(-s, m))] ds)
//! ```
//!
//! and the division/exit survival rates `ξ(t, m) = (g⁻¹)'(m) · H(t, g⁻¹(m))`
//! and `π(t, m) = α_π(m) · H(t, m)`, with their post-initial-layer values
//! `ξ̄(m) = ξ(τ(Δ(m)), m)` and `π̄(m) = π(τ(Θ(m)), m)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::numerics::{bisect_root, integrate, CumulativeCurve, MonotoneCubic};

/// Default relative tolerance of kernel quadratures.
pub const QUAD_TOL: f64 = 1e-10;
/// Default root-finding tolerance on maturity.
pub const ROOT_TOL: f64 = 1e-10;
/// Maturity cutoff below which `h` is treated as 0 on the generic path.
pub const M_FLOOR: f64 = 1e-12;
/// Size of the log-spaced `h` table for generic velocity families.
pub const H_TABLE_SIZE: usize = 4096;

#[derive(Debug, Clone)]
enum HBackend {
    /// `V(m) = c·m`: `h(m) = m^(1/c)` exactly.
    PowerLawLinear { c: f64 },
    /// `V(m) = c·m^p`, `p > 1`: `h(m) = exp((1 - m^(1-p)) / (c (p-1)))`.
    PowerLaw { c: f64, p: f64 },
    /// Log-spaced table of `ln h` against `ln m`, cumulative quadrature of
    /// `1/V`, monotone-cubic interpolated in log-log space.
    Table { ln_h_of_ln_m: MonotoneCubic },
}

/// Immutable evaluators for the characteristic machinery of one model.
///
/// Closed forms are used where the velocity family admits them; otherwise a
/// cached monotone table backs `h`/`h⁻¹`. [`CharTables::new_numeric`] forces
/// the generic table path regardless, which the oracle tests compare against
/// the closed forms.
#[derive(Debug, Clone)]
pub struct CharTables {
    spec: ModelSpec,
    backend: HBackend,
    pub quad_tol: f64,
    pub root_tol: f64,
    pub m_floor: f64,
}

impl CharTables {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        Self::build(spec, false)
    }

    /// Build with the generic table/quadrature backend even when closed
    /// forms exist.
    pub fn new_numeric(spec: &ModelSpec) -> Result<Self> {
        Self::build(spec, true)
    }

    fn build(spec: &ModelSpec, force_numeric: bool) -> Result<Self> {
        let backend = match (&spec.velocity, force_numeric) {
            (crate::model::VelocityFamily::PowerLaw { coefficient, exponent }, false) => {
                if *exponent == 1.0 {
                    HBackend::PowerLawLinear { c: *coefficient }
                } else {
                    HBackend::PowerLaw {
                        c: *coefficient,
                        p: *exponent,
                    }
                }
            }
            _ => {
                // cumulative ∫ 1/V from the top down on a log-spaced grid
                let n = H_TABLE_SIZE;
                let ln_floor = M_FLOOR.ln();
                let ln_ms: Vec<f64> =
                    (0..n).map(|i| ln_floor * (1.0 - i as f64 / (n - 1) as f64)).collect();
                let mut ln_hs = vec![0.0; n];
                for i in (0..n - 1).rev() {
                    let a = ln_ms[i].exp();
                    let b = ln_ms[i + 1].exp();
                    let panel = integrate(|s| 1.0 / spec.velocity.eval(s), a, b, QUAD_TOL)?;
                    ln_hs[i] = ln_hs[i + 1] - panel;
                }
                HBackend::Table {
                    ln_h_of_ln_m: MonotoneCubic::new(ln_ms, ln_hs)?,
                }
            }
        };
        Ok(CharTables {
            spec: spec.clone(),
            backend,
            quad_tol: QUAD_TOL,
            root_tol: ROOT_TOL,
            m_floor: M_FLOOR,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// `h(m) = exp(-∫ₘ¹ ds/V(s))`, increasing from `h(0) = 0` to `h(1) = 1`.
    pub fn h(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        if m >= 1.0 {
            return 1.0;
        }
        match &self.backend {
            HBackend::PowerLawLinear { c } => {
                if *c == 1.0 {
                    m
                } else {
                    m.powf(1.0 / c)
                }
            }
            HBackend::PowerLaw { c, p } => ((1.0 - m.powf(1.0 - p)) / (c * (p - 1.0))).exp(),
            HBackend::Table { ln_h_of_ln_m } => {
                if m <= self.m_floor {
                    0.0
                } else {
                    ln_h_of_ln_m.eval(m.ln()).exp()
                }
            }
        }
    }

    /// Inverse of `h` on `(0, 1]`; arguments at or below `h(m_floor)` clamp
    /// to the floor on the table path.
    pub fn h_inv(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match &self.backend {
            HBackend::PowerLawLinear { c } => {
                if *c == 1.0 {
                    u
                } else {
                    u.powf(*c)
                }
            }
            HBackend::PowerLaw { c, p } => {
                // invert u = exp((1 - m^(1-p))/(c(p-1)))
                let t = 1.0 - c * (p - 1.0) * u.ln();
                t.powf(1.0 / (1.0 - p))
            }
            HBackend::Table { ln_h_of_ln_m } => {
                let ln_u = u.ln();
                if ln_u <= ln_h_of_ln_m.eval(self.m_floor.ln()) {
                    return self.m_floor;
                }
                match ln_h_of_ln_m.invert(ln_u, 1e-14) {
                    Ok(ln_m) => ln_m.exp(),
                    Err(_) => self.m_floor,
                }
            }
        }
    }

    /// Direct adaptive quadrature of `h` (no table); used by tests to bound
    /// the table error.
    pub fn h_quadrature(&self, m: f64) -> Result<f64> {
        if m <= 0.0 {
            return Ok(0.0);
        }
        if m >= 1.0 {
            return Ok(1.0);
        }
        let integral = integrate(
            |s| 1.0 / self.spec.velocity.eval(s),
            m.max(self.m_floor),
            1.0,
            self.quad_tol,
        )?;
        Ok((-integral).exp())
    }

    /// Backward characteristic: maturity at time `s <= 0` of the cell that
    /// reaches maturity `m` at time 0.
    pub fn chi(&self, s: f64, m: f64) -> f64 {
        debug_assert!(s <= 0.0);
        if m <= 0.0 {
            return 0.0;
        }
        self.h_inv(self.h(m) * s.exp())
    }

    /// Commitment maturity `Θ(m)`: the unique `x ∈ (0, m)` with
    /// `x = χ(-τ(x), m)`.
    pub fn theta(&self, m: f64) -> Result<f64> {
        if m <= 0.0 {
            return Ok(0.0);
        }
        let residual = |x: f64| x - self.chi(-self.spec.delay.eval(x), m);
        // χ(-τ(x), m) >= χ(-τ_max, m), so anything below that is a lower bracket
        let lower_anchor = self.chi(-self.spec.tau_max, m);
        let lo = (lower_anchor * 0.5).max(self.m_floor * 0.5);
        let hi = m;
        if residual(hi) < 0.0 {
            // τ(m) <= 0 or similar breakage: hypothesis violation upstream
            return Err(Error::RootNotBracketed {
                lo,
                hi,
                flo: residual(lo),
                fhi: residual(hi),
            });
        }
        let x = bisect_root(residual, lo, hi, self.root_tol * 1e-2)?;
        Ok(x)
    }

    /// Mother-commitment maturity `Δ(m) = Θ(g⁻¹(m))`; constant at `Θ(1)`
    /// for `m >= g(1)` and `Δ(0) = 0`.
    pub fn delta(&self, m: f64) -> f64 {
        let gi = self.spec.division.inverse(m.clamp(0.0, 1.0));
        if gi <= 0.0 {
            return 0.0;
        }
        self.theta(gi).unwrap_or(0.0)
    }

    /// Inverse of `Δ` on its increasing branch `[0, g(1)] → [0, Θ(1))`.
    pub fn delta_inv(&self, y: f64) -> Result<f64> {
        let theta1 = self.theta(1.0)?;
        if y < 0.0 || y >= theta1 {
            return Err(Error::DomainError {
                op: "delta_inv".into(),
                detail: format!("y = {y} outside [0, Θ(1) = {theta1})"),
            });
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let g1 = self.spec.division.g1();
        bisect_root(|z| self.delta(z) - y, 0.0, g1, self.root_tol * 1e-2)
    }

    /// Log-attrition `∫₀ᵗ [loss(χ(-s, w)) + V'(χ(-s, w))] ds` along the
    /// backward characteristic through `w`, with `loss` one of the mortality
    /// profiles. Constant-integrand fast paths cover `w = 0` and the linear
    /// velocity + constant-profile case.
    fn log_attrition(&self, loss: &crate::model::Profile, w: f64, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        if let Some(c) = self.constant_loss_rate(loss, w) {
            return Ok(c * t);
        }
        integrate(
            |s| {
                let x = self.chi(-s, w);
                loss.eval(x) + self.spec.velocity.deriv(x)
            },
            0.0,
            t,
            self.quad_tol,
        )
    }

    fn constant_loss_rate(&self, loss: &crate::model::Profile, w: f64) -> Option<f64> {
        if w == 0.0 {
            // χ(-s, 0) = 0: the integrand is frozen at maturity 0
            return Some(loss.eval(0.0) + self.spec.velocity.deriv(0.0));
        }
        match (&self.spec.velocity, loss) {
            (
                crate::model::VelocityFamily::PowerLaw { coefficient, exponent },
                crate::model::Profile::Constant { value },
            ) if *exponent == 1.0 => Some(value + coefficient),
            _ => None,
        }
    }

    /// Resting-phase survival kernel `K(t, m)`.
    pub fn kernel_resting(&self, t: f64, m: f64) -> Result<f64> {
        Ok((-self.log_attrition(&self.spec.mortality.delta, m, t)?).exp())
    }

    /// Proliferating-phase survival kernel `H(t, m)`.
    pub fn kernel_proliferating(&self, t: f64, m: f64) -> Result<f64> {
        Ok((-self.log_attrition(&self.spec.mortality.gamma, m, t)?).exp())
    }

    /// Division survival rate `ξ(t, m) = (g⁻¹)'(m) H(t, g⁻¹(m))`; vanishes
    /// identically for `m > g(1)`.
    pub fn xi(&self, t: f64, m: f64) -> Result<f64> {
        let d = self.spec.division.inverse_deriv(m);
        if d == 0.0 {
            return Ok(0.0);
        }
        Ok(d * self.kernel_proliferating(t, self.spec.division.inverse(m))?)
    }

    /// Exit survival rate `π(t, m) = α_π(m) H(t, m)`.
    pub fn pi(&self, t: f64, m: f64) -> Result<f64> {
        Ok(self.spec.alpha_pi.eval(m) * self.kernel_proliferating(t, m)?)
    }

    /// `ξ̄(m) = ξ(τ(Δ(m)), m)`.
    pub fn xi_bar(&self, m: f64) -> Result<f64> {
        let tau_delta = self.spec.delay.eval(self.delta(m));
        self.xi(tau_delta, m)
    }

    /// `π̄(m) = π(τ(Θ(m)), m)`.
    pub fn pi_bar(&self, m: f64) -> Result<f64> {
        let theta = if m > 0.0 { self.theta(m)? } else { 0.0 };
        self.pi(self.spec.delay.eval(theta), m)
    }

    /// Precompute the cumulative log-attrition along the characteristic
    /// through `w` for `t ∈ [0, t_max]`, for hot-loop evaluation of the
    /// time-dependent rates during the initial layer.
    pub fn survival_curve(&self, loss_gamma: bool, w: f64, t_max: f64) -> SurvivalCurve {
        let loss = if loss_gamma {
            self.spec.mortality.gamma.clone()
        } else {
            self.spec.mortality.delta.clone()
        };
        if let Some(c) = self.constant_loss_rate(&loss, w) {
            return SurvivalCurve::Linear { rate: c };
        }
        let integrand = |s: f64| {
            let x = self.chi(-s, w);
            loss.eval(x) + self.spec.velocity.deriv(x)
        };
        let cells = 256.max((t_max * 128.0) as usize).min(4096);
        SurvivalCurve::Sampled {
            w,
            gamma: loss_gamma,
            curve: CumulativeCurve::build(integrand, t_max.max(1e-12), cells),
        }
    }

    /// Compute the finite-time propagation schedule for initial data known
    /// on `[0, b]`: the maturity transmission sequence between generations,
    /// its escape index, and the times `t̄` (agreement on `[0, g(1)]`) and
    /// `t_full` (agreement on `[0, 1]`).
    pub fn schedule(&self, b: f64) -> Result<PropagationSchedule> {
        if !(0.0 < b && b < 1.0) {
            return Err(Error::DomainError {
                op: "schedule".into(),
                detail: format!("b = {b} must lie in (0, 1)"),
            });
        }
        let g1 = self.spec.division.g1();
        let theta1 = self.theta(1.0)?;
        let b0 = self.spec.division.eval(b);
        let tau_max = self.spec.tau_max;

        let (b_seq, n_index) = if b0 >= theta1 {
            // the transmission recursion is vacuous; one generation reaches g(1)
            (vec![b0, g1], 0usize)
        } else {
            let mut seq = vec![b0];
            loop {
                let last = *seq.last().unwrap();
                if last >= theta1 {
                    break;
                }
                let next = self.delta_inv(last)?;
                if next <= last {
                    return Err(Error::DomainError {
                        op: "schedule".into(),
                        detail: format!(
                            "maturity transmission stalled at {last}: Δ(m) < m must hold"
                        ),
                    });
                }
                if seq.len() > 10_000 {
                    return Err(Error::DomainError {
                        op: "schedule".into(),
                        detail: "maturity transmission did not escape in 10000 generations".into(),
                    });
                }
                seq.push(next);
            }
            let n = seq.len() - 2; // b_N < Θ(1) <= b_{N+1}
            seq.push(g1);
            (seq, n)
        };

        let t_bar = (self.h(g1) / self.h(b0)).ln() + (n_index as f64 + 2.0) * tau_max;
        let t_full = t_bar + tau_max - self.h(g1).ln();
        Ok(PropagationSchedule {
            b_seq,
            n_index,
            t_bar,
            t_full,
        })
    }
}

/// Cumulative log-attrition along one backward characteristic, either exact
/// (constant rate) or sampled.
#[derive(Debug, Clone)]
pub enum SurvivalCurve {
    Linear { rate: f64 },
    Sampled {
        w: f64,
        gamma: bool,
        curve: CumulativeCurve,
    },
}

impl SurvivalCurve {
    /// `Λ(t)`; the sampled variant re-derives its integrand from `tables`.
    pub fn log_attrition(&self, tables: &CharTables, t: f64) -> f64 {
        match self {
            SurvivalCurve::Linear { rate } => rate * t,
            SurvivalCurve::Sampled { w, gamma, curve } => {
                let spec = tables.spec();
                let loss = if *gamma {
                    &spec.mortality.gamma
                } else {
                    &spec.mortality.delta
                };
                curve.eval(
                    |s| {
                        let x = tables.chi(-s, *w);
                        loss.eval(x) + spec.velocity.deriv(x)
                    },
                    t,
                )
            }
        }
    }

    /// Survival factor `exp(-Λ(t))`.
    pub fn survival(&self, tables: &CharTables, t: f64) -> f64 {
        (-self.log_attrition(tables, t)).exp()
    }
}

/// Finite-time dependence schedule for data known on `[0, b]`.
#[derive(Debug, Clone, Serialize)]
pub struct PropagationSchedule {
    /// Maturity transmission sequence `b₀, …, b_{N+2}` (shortened to
    /// `[b₀, g(1)]` when `g(b) >= Θ(1)` already).
    pub b_seq: Vec<f64>,
    /// Escape index `N`: `b_N < Θ(1) <= b_{N+1}`.
    pub n_index: usize,
    /// Time after which solutions agree on `[0, g(1)]`.
    pub t_bar: f64,
    /// Time after which solutions agree on all of `[0, 1]`
    /// (`t̄ + τ_max - ln h(g(1))`).
    pub t_full: f64,
}
