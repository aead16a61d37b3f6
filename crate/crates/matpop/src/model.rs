//! Model parameterization: the function families entering the two-phase
//! population model, their standing hypotheses, and validated construction
//! of [`ModelSpec`] / [`InitialData`].
//!
//! All functions live on the maturity interval `[0, 1]`. The model is fixed
//! by six ingredients:
//!
//! * `V(m)` — maturation velocity, `V(0) = 0`, positive on `(0, 1]`, with
//!   `∫₀ᵐ ds/V(s) = +∞` (immature cells take unbounded time to mature),
//! * `τ(m)` — division delay of a cell committing at maturity `m`,
//! * `g(m)` — daughter maturity after division at maturity `m`,
//! * `β(m, x)` — re-entry rate from rest into proliferation (Hill in the
//!   resting density `x`),
//! * `δ(m)`, `γ(m)` — death rates in the resting / proliferating phase,
//! * `α_π(m)` — survival prefactor of the proliferating exit rate,
//!   normalized to `α_π(0) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::MonotoneCubic;

/// Number of points of the validation grid on which "for all m" hypotheses
/// are checked for tabulated families.
pub const VALIDATION_GRID: usize = 2048;
/// Lower end of the validation grid (hypotheses are checked on `(ε, 1]`).
pub const VALIDATION_FLOOR: f64 = 1e-6;
/// Absolute tolerance of the advisory initial-data compatibility check.
pub const COMPATIBILITY_TOL: f64 = 1e-9;

fn validation_grid() -> impl Iterator<Item = f64> {
    (0..VALIDATION_GRID).map(|i| {
        VALIDATION_FLOOR + (1.0 - VALIDATION_FLOOR) * (i as f64 / (VALIDATION_GRID - 1) as f64)
    })
}

fn violation(which: &str, location: f64, detail: impl Into<String>) -> Error {
    Error::HypothesisViolation {
        which: which.into(),
        location,
        detail: detail.into(),
    }
}

/// A scalar maturity profile: constant or tabulated with monotone-cubic
/// interpolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    Tabulated { table: MonotoneCubic },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn tabulated(ms: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Profile::Tabulated {
            table: MonotoneCubic::new(ms, values)?,
        })
    }

    pub fn eval(&self, m: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Tabulated { table } => table.eval(m),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant { .. })
    }

    fn check_nonnegative(&self, name: &str) -> Result<()> {
        for m in validation_grid() {
            let v = self.eval(m);
            if !(v.is_finite() && v >= 0.0) {
                return Err(violation(name, m, format!("value {v} must be >= 0")));
            }
        }
        Ok(())
    }

    fn check_positive(&self, name: &str) -> Result<()> {
        for m in validation_grid() {
            let v = self.eval(m);
            if !(v.is_finite() && v > 0.0) {
                return Err(violation(name, m, format!("value {v} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Maturation velocity family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityFamily {
    /// `V(m) = coefficient · m^exponent`, `coefficient > 0`, `exponent >= 1`.
    PowerLaw { coefficient: f64, exponent: f64 },
    /// Samples of `V` including the pinned point `(0, 0)`; interpolated with
    /// a monotone cubic so the derivative is continuous.
    Tabulated { table: MonotoneCubic },
}

impl VelocityFamily {
    pub fn power_law(coefficient: f64, exponent: f64) -> Self {
        VelocityFamily::PowerLaw {
            coefficient,
            exponent,
        }
    }

    pub fn tabulated(ms: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        Ok(VelocityFamily::Tabulated {
            table: MonotoneCubic::new(ms, vs)?,
        })
    }

    pub fn eval(&self, m: f64) -> f64 {
        match self {
            VelocityFamily::PowerLaw {
                coefficient,
                exponent,
            } => {
                if m == 0.0 {
                    0.0
                } else if *exponent == 1.0 {
                    coefficient * m
                } else {
                    coefficient * m.powf(*exponent)
                }
            }
            VelocityFamily::Tabulated { table } => table.eval(m),
        }
    }

    pub fn deriv(&self, m: f64) -> f64 {
        match self {
            VelocityFamily::PowerLaw {
                coefficient,
                exponent,
            } => {
                if *exponent == 1.0 {
                    *coefficient
                } else if m == 0.0 {
                    0.0
                } else {
                    coefficient * exponent * m.powf(exponent - 1.0)
                }
            }
            VelocityFamily::Tabulated { table } => table.eval_deriv(m),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            VelocityFamily::PowerLaw {
                coefficient,
                exponent,
            } => {
                if !(coefficient.is_finite() && *coefficient > 0.0) {
                    return Err(violation("velocity", 0.0, "power-law coefficient must be > 0"));
                }
                if !(exponent.is_finite() && *exponent >= 1.0) {
                    return Err(violation(
                        "velocity",
                        0.0,
                        "power-law exponent must be >= 1 so that 1/V is non-integrable at 0",
                    ));
                }
            }
            VelocityFamily::Tabulated { table } => {
                if table.x_min() != 0.0 || table.x_max() != 1.0 {
                    return Err(violation("velocity", table.x_min(), "samples must span [0, 1]"));
                }
                if table.eval(0.0) != 0.0 {
                    return Err(violation("velocity", 0.0, "V(0) must be 0"));
                }
                // C¹ with V(0)=0 forces V(m) <= sup|V'|·m, so 1/V is
                // automatically non-integrable at 0; only positivity needs a
                // grid check.
                for m in validation_grid() {
                    if table.eval(m) <= 0.0 {
                        return Err(violation("velocity", m, "V must be > 0 on (0, 1]"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Division-delay family `τ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayFamily {
    /// `τ(m) = ln(m + alpha)` with `alpha > 1`.
    LogAffine { alpha: f64 },
    /// Constant delay `r > 0`.
    Constant { r: f64 },
    Tabulated { table: MonotoneCubic },
}

impl DelayFamily {
    pub fn log_affine(alpha: f64) -> Self {
        DelayFamily::LogAffine { alpha }
    }

    pub fn constant(r: f64) -> Self {
        DelayFamily::Constant { r }
    }

    pub fn tabulated(ms: Vec<f64>, taus: Vec<f64>) -> Result<Self> {
        Ok(DelayFamily::Tabulated {
            table: MonotoneCubic::new(ms, taus)?,
        })
    }

    pub fn eval(&self, m: f64) -> f64 {
        match self {
            DelayFamily::LogAffine { alpha } => (m + alpha).ln(),
            DelayFamily::Constant { r } => *r,
            DelayFamily::Tabulated { table } => table.eval(m),
        }
    }

    pub fn deriv(&self, m: f64) -> f64 {
        match self {
            DelayFamily::LogAffine { alpha } => 1.0 / (m + alpha),
            DelayFamily::Constant { .. } => 0.0,
            DelayFamily::Tabulated { table } => table.eval_deriv(m),
        }
    }

    /// Maximum of `τ` over `[0, 1]`.
    pub fn max(&self) -> f64 {
        match self {
            DelayFamily::LogAffine { alpha } => (1.0 + alpha).ln(),
            DelayFamily::Constant { r } => *r,
            DelayFamily::Tabulated { .. } => {
                let mut mx = self.eval(0.0);
                for m in validation_grid() {
                    mx = mx.max(self.eval(m));
                }
                mx
            }
        }
    }

    /// Minimum of `τ` over `[0, 1]` (strictly positive for valid families).
    pub fn min(&self) -> f64 {
        match self {
            DelayFamily::LogAffine { alpha } => alpha.ln(),
            DelayFamily::Constant { r } => *r,
            DelayFamily::Tabulated { .. } => {
                let mut mn = self.eval(0.0);
                for m in validation_grid() {
                    mn = mn.min(self.eval(m));
                }
                mn
            }
        }
    }

    fn validate(&self, velocity: &VelocityFamily) -> Result<()> {
        match self {
            DelayFamily::LogAffine { alpha } => {
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return Err(violation("delay", 0.0, "log-affine alpha must be > 1"));
                }
            }
            DelayFamily::Constant { r } => {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(violation("delay", 0.0, "constant delay must be > 0"));
                }
            }
            DelayFamily::Tabulated { .. } => {}
        }
        for m in std::iter::once(0.0).chain(validation_grid()) {
            if self.eval(m) <= 0.0 {
                return Err(violation("delay", m, "τ must be > 0 on [0, 1]"));
            }
        }
        // τ'(m) + 1/V(m) > 0 makes the commitment maturity well defined.
        for m in validation_grid() {
            let v = velocity.eval(m);
            if v > 0.0 && self.deriv(m) + 1.0 / v <= 0.0 {
                return Err(violation("delay", m, "τ'(m) + 1/V(m) must be > 0 on (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Division (daughter-maturity) family `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivisionFamily {
    /// `g(m) = m / kappa` with `kappa > 1`.
    Linear { kappa: f64 },
    /// Strictly increasing samples with `g(m) <= m`.
    Tabulated { table: MonotoneCubic },
}

impl DivisionFamily {
    pub fn linear(kappa: f64) -> Self {
        DivisionFamily::Linear { kappa }
    }

    pub fn tabulated(ms: Vec<f64>, gs: Vec<f64>) -> Result<Self> {
        Ok(DivisionFamily::Tabulated {
            table: MonotoneCubic::new(ms, gs)?,
        })
    }

    pub fn eval(&self, m: f64) -> f64 {
        match self {
            DivisionFamily::Linear { kappa } => m / kappa,
            DivisionFamily::Tabulated { table } => table.eval(m),
        }
    }

    /// Top of the daughter-maturity range.
    pub fn g1(&self) -> f64 {
        self.eval(1.0)
    }

    /// Inverse with the standing extension `g⁻¹(m) = 1` for `m > g(1)`.
    pub fn inverse(&self, m: f64) -> f64 {
        if m >= self.g1() {
            return 1.0;
        }
        match self {
            DivisionFamily::Linear { kappa } => (kappa * m).min(1.0),
            DivisionFamily::Tabulated { table } => table.invert(m, 1e-13).unwrap_or(1.0),
        }
    }

    /// `(g⁻¹)'` with the extension `(g⁻¹)'(m) = 0` for `m > g(1)`.
    pub fn inverse_deriv(&self, m: f64) -> f64 {
        if m > self.g1() {
            return 0.0;
        }
        match self {
            DivisionFamily::Linear { kappa } => *kappa,
            DivisionFamily::Tabulated { table } => {
                let x = self.inverse(m);
                let d = table.eval_deriv(x);
                if d > 0.0 {
                    1.0 / d
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DivisionFamily::Linear { kappa } => {
                if !(kappa.is_finite() && *kappa > 1.0) {
                    return Err(violation(
                        "division",
                        0.5,
                        format!("kappa must be > 1 so that g(m) <= m (got {kappa})"),
                    ));
                }
            }
            DivisionFamily::Tabulated { table } => {
                if table.x_min() != 0.0 || table.x_max() != 1.0 {
                    return Err(violation("division", table.x_min(), "samples must span [0, 1]"));
                }
                if table.eval(0.0) < 0.0 {
                    return Err(violation("division", 0.0, "g(0) must be >= 0"));
                }
                let mut prev = table.eval(0.0);
                for m in validation_grid() {
                    let v = table.eval(m);
                    if v > m {
                        return Err(violation("division", m, format!("g(m) = {v} exceeds m")));
                    }
                    if v <= prev - 1e-15 {
                        return Err(violation("division", m, "g must be strictly increasing"));
                    }
                    prev = v;
                }
            }
        }
        Ok(())
    }
}

/// Hill re-entry rate with maturity-dependent coefficient profiles:
/// `β(m, x) = β₀(m) · θ(m)ⁿ / (θ(m)ⁿ + xⁿ)`.
///
/// The Hill shape guarantees the standing hypotheses on `x ↦ β(m, x)`:
/// positive, decreasing, vanishing at infinity, uniformly bounded by
/// `sup β₀`, and `x β(m, x)` locally Lipschitz. `β₀ ≡ 0` is accepted as the
/// degenerate no-re-entry limit used by transport oracles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReentryFamily {
    pub beta0: Profile,
    pub theta: Profile,
    pub exponent: f64,
}

impl ReentryFamily {
    pub fn hill(beta0: f64, theta: f64, exponent: f64) -> Self {
        ReentryFamily {
            beta0: Profile::constant(beta0),
            theta: Profile::constant(theta),
            exponent,
        }
    }

    pub fn eval(&self, m: f64, x: f64) -> f64 {
        hill(self.beta0.eval(m), self.theta.eval(m), self.exponent, x)
    }

    /// Pointwise Hill coefficients at maturity `m`, for hot loops.
    pub fn at(&self, m: f64) -> HillAtMaturity {
        HillAtMaturity::new(self.beta0.eval(m), self.theta.eval(m), self.exponent)
    }

    pub fn sup_beta0(&self) -> f64 {
        let mut s = self.beta0.eval(0.0);
        for m in validation_grid() {
            s = s.max(self.beta0.eval(m));
        }
        s
    }

    fn validate(&self) -> Result<()> {
        if !(self.exponent.is_finite() && self.exponent >= 1.0) {
            return Err(violation("reentry", 0.0, "Hill exponent must be >= 1"));
        }
        self.beta0.check_nonnegative("reentry.beta0")?;
        self.theta.check_positive("reentry.theta")?;
        Ok(())
    }
}

/// `β₀ θⁿ / (θⁿ + xⁿ)` with fast paths for the common exponents.
pub fn hill(beta0: f64, theta: f64, n: f64, x: f64) -> f64 {
    let x = x.max(0.0);
    let tn = if n == 2.0 {
        theta * theta
    } else if n == 1.0 {
        theta
    } else {
        theta.powf(n)
    };
    let xn = if n == 2.0 {
        x * x
    } else if n == 1.0 {
        x
    } else {
        x.powf(n)
    };
    beta0 * tn / (tn + xn)
}

/// Frozen Hill coefficients at one maturity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HillAtMaturity {
    pub beta0: f64,
    pub theta: f64,
    pub exponent: f64,
    theta_n: f64,
}

impl HillAtMaturity {
    pub fn new(beta0: f64, theta: f64, exponent: f64) -> Self {
        let theta_n = if exponent == 2.0 {
            theta * theta
        } else if exponent == 1.0 {
            theta
        } else {
            theta.powf(exponent)
        };
        Self {
            beta0,
            theta,
            exponent,
            theta_n,
        }
    }

    #[inline]
    pub fn beta(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        let xn = if self.exponent == 2.0 {
            x * x
        } else if self.exponent == 1.0 {
            x
        } else {
            x.powf(self.exponent)
        };
        self.beta0 * self.theta_n / (self.theta_n + xn)
    }

    /// `f(x) = x β(x)`, the re-entry flux.
    #[inline]
    pub fn flux(&self, x: f64) -> f64 {
        x * self.beta(x)
    }

    /// Antiderivative `∫₀ˣ f` of the flux; closed form for `n ∈ {1, 2}`,
    /// quadrature otherwise.
    pub fn flux_antiderivative(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        if self.exponent == 2.0 {
            let t2 = self.theta_n;
            0.5 * self.beta0 * t2 * (1.0 + x * x / t2).ln()
        } else if self.exponent == 1.0 {
            let t = self.theta;
            self.beta0 * t * (x - t * (1.0 + x / t).ln())
        } else {
            crate::numerics::gauss20(|s| self.flux(s), 0.0, x)
        }
    }

    /// Lipschitz bound for the flux used by the field solver's step cap:
    /// `sup |f'| <= β₀ (1 + n/4)` for the Hill family.
    pub fn flux_lipschitz(&self) -> f64 {
        self.beta0 * (1.0 + 0.25 * self.exponent)
    }
}

/// Resting (`δ`) and proliferating (`γ`) death-rate profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MortalityProfiles {
    pub delta: Profile,
    pub gamma: Profile,
}

impl MortalityProfiles {
    pub fn constant(delta: f64, gamma: f64) -> Self {
        MortalityProfiles {
            delta: Profile::constant(delta),
            gamma: Profile::constant(gamma),
        }
    }

    fn validate(&self) -> Result<()> {
        self.delta.check_nonnegative("mortality.delta")?;
        self.gamma.check_nonnegative("mortality.gamma")
    }
}

/// A fully validated model instance with its derived constants.
///
/// Construction via [`ModelSpec::build`] checks every standing hypothesis;
/// the value is immutable afterwards and can be shared across workers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub velocity: VelocityFamily,
    pub delay: DelayFamily,
    pub division: DivisionFamily,
    pub reentry: ReentryFamily,
    pub mortality: MortalityProfiles,
    pub alpha_pi: Profile,
    /// `max τ` over `[0, 1]`.
    pub tau_max: f64,
    /// `min τ` over `[0, 1]`.
    pub tau_min: f64,
    /// `δ(0) + V'(0)`: total loss rate of resting immature cells.
    pub rho: f64,
    /// `γ(0) + V'(0)`: total loss rate of proliferating immature cells.
    pub eta: f64,
    /// `τ(0)`: division delay at maturity 0.
    pub r: f64,
}

impl ModelSpec {
    /// Validate all families and derive the boundary constants.
    pub fn build(
        velocity: VelocityFamily,
        delay: DelayFamily,
        division: DivisionFamily,
        reentry: ReentryFamily,
        mortality: MortalityProfiles,
        alpha_pi: Profile,
    ) -> Result<Self> {
        velocity.validate()?;
        delay.validate(&velocity)?;
        division.validate()?;
        reentry.validate()?;
        mortality.validate()?;
        alpha_pi.check_positive("alpha_pi")?;
        let a0 = alpha_pi.eval(0.0);
        if (a0 - 1.0).abs() > 1e-12 {
            return Err(violation("alpha_pi", 0.0, format!("α_π(0) must be 1, got {a0}")));
        }

        let v_prime0 = velocity.deriv(0.0);
        if !v_prime0.is_finite() {
            return Err(violation("velocity", 0.0, "V'(0) must be finite"));
        }
        let tau_max = delay.max();
        let tau_min = delay.min();
        let r = delay.eval(0.0);
        let rho = mortality.delta.eval(0.0) + v_prime0;
        let eta = mortality.gamma.eval(0.0) + v_prime0;
        debug_assert!(tau_max > 0.0 && r > 0.0);

        Ok(ModelSpec {
            velocity,
            delay,
            division,
            reentry,
            mortality,
            alpha_pi,
            tau_max,
            tau_min,
            rho,
            eta,
            r,
        })
    }

    /// The worked family used throughout the tests and experiments:
    /// `V(m) = m`, `τ(m) = ln(m + alpha)`, `g(m) = m/kappa`, constant
    /// mortality, constant Hill coefficients, `α_π ≡ 1`.
    pub fn reference_family(
        kappa: f64,
        alpha: f64,
        delta: f64,
        gamma: f64,
        beta0: f64,
        theta: f64,
        n: f64,
    ) -> Result<Self> {
        ModelSpec::build(
            VelocityFamily::power_law(1.0, 1.0),
            DelayFamily::log_affine(alpha),
            DivisionFamily::linear(kappa),
            ReentryFamily::hill(beta0, theta, n),
            MortalityProfiles::constant(delta, gamma),
            Profile::constant(1.0),
        )
    }

    /// Whether the instance is the analytically tractable combination
    /// (`V(m) = m`, log-affine `τ`, linear `g`): closed forms exist for
    /// `h`, `χ`, `Θ`, `Δ` and the strict-commitment test.
    pub fn closed_form_params(&self) -> Option<(f64, f64)> {
        match (&self.velocity, &self.delay, &self.division) {
            (
                VelocityFamily::PowerLaw {
                    coefficient,
                    exponent,
                },
                DelayFamily::LogAffine { alpha },
                DivisionFamily::Linear { kappa },
            ) if *coefficient == 1.0 && *exponent == 1.0 => Some((*kappa, *alpha)),
            _ => None,
        }
    }
}

/// Result of the strict-commitment check `Δ(m) < m` on `(0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaStrictness {
    pub holds: bool,
    /// A maturity with `Δ(m) >= m`, when one exists on the grid. Boundary
    /// (limit-sense) failures at `m → 0` report `holds = false` with no
    /// witness.
    pub witness: Option<f64>,
}

/// Check that daughters are born strictly below their mother's commitment
/// maturity: `Δ(m) < m` for all `m ∈ (0, 1]`, including in the `m → 0`
/// limit sense.
///
/// For the closed-form family the test is exact (`alpha > kappa`); otherwise
/// `Δ` is evaluated on a dense grid and the ratio `Δ(m)/m` is additionally
/// required to stay away from 1 near the origin.
pub fn check_delta_strict(
    spec: &ModelSpec,
    tables: &crate::characteristics::CharTables,
) -> DeltaStrictness {
    if let Some((kappa, alpha)) = spec.closed_form_params() {
        let holds = alpha > kappa;
        let witness = if alpha < kappa {
            // Δ(m) >= m exactly when m <= kappa - alpha
            Some(((kappa - alpha).min(spec.division.g1())) * 0.5)
        } else {
            None
        };
        return DeltaStrictness { holds, witness };
    }

    for m in validation_grid() {
        let d = tables.delta(m);
        if d >= m {
            return DeltaStrictness {
                holds: false,
                witness: Some(m),
            };
        }
    }
    // limit check at the origin: Δ(m)/m must not approach 1
    let m0 = VALIDATION_FLOOR;
    let ratio = tables.delta(m0) / m0;
    DeltaStrictness {
        holds: ratio < 1.0 - 1e-6,
        witness: None,
    }
}

/// Outcome of the advisory initial-data compatibility check
/// `Γ(0, 0) = β(0, μ̄(0)) μ̄(0)`; when it fails, the boundary trajectory has
/// a derivative jump one delay after start.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Compatibility {
    pub compatible: bool,
    pub lhs: f64,
    pub rhs: f64,
}

pub fn check_compatibility(spec: &ModelSpec, data: &InitialData) -> Compatibility {
    let mu0 = data.mu(0.0);
    let lhs = data.gamma(0.0, 0.0);
    let rhs = spec.reentry.eval(0.0, mu0) * mu0;
    Compatibility {
        compatible: (lhs - rhs).abs() <= COMPATIBILITY_TOL,
        lhs,
        rhs,
    }
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// A maturity profile preset for initial data. All presets that vanish below
/// a threshold return literal `0.0` there, which the field solver's
/// zero-propagation guarantee relies on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// Identically zero.
    Zero,
    /// Constant `value`.
    Constant { value: f64 },
    /// `height · sin²(π (m - b) / (1 - b))` on `[b, 1]`, exactly 0 below `b`.
    Bump { b: f64, height: f64 },
    /// Exactly 0 on `[0, b]`, smooth ramp `s((m-b)/(1-b))` with
    /// `s(x) = x²(3 - 2x)` up to 1 at `m = 1`.
    ZeroBelow { b: f64 },
    /// Tabulated samples with monotone-cubic interpolation.
    Tabulated { table: MonotoneCubic },
    /// Pointwise sum of sub-profiles.
    Sum { terms: Vec<ProfileSpec> },
}

impl ProfileSpec {
    pub fn eval(&self, m: f64) -> f64 {
        match self {
            ProfileSpec::Zero => 0.0,
            ProfileSpec::Constant { value } => *value,
            ProfileSpec::Bump { b, height } => {
                if m <= *b {
                    0.0
                } else {
                    let s = (std::f64::consts::PI * (m - b) / (1.0 - b)).sin();
                    height * s * s
                }
            }
            ProfileSpec::ZeroBelow { b } => {
                if m <= *b {
                    0.0
                } else {
                    let x = ((m - b) / (1.0 - b)).clamp(0.0, 1.0);
                    x * x * (3.0 - 2.0 * x)
                }
            }
            ProfileSpec::Tabulated { table } => table.eval(m),
            ProfileSpec::Sum { terms } => terms.iter().map(|p| p.eval(m)).sum(),
        }
    }

    fn min_on_grid(&self) -> f64 {
        let mut mn = self.eval(0.0);
        for m in validation_grid() {
            mn = mn.min(self.eval(m));
        }
        mn
    }
}

/// Age dependence of a separable initial proliferating density `Γ(m, a)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgeShape {
    /// `Γ(m, a) = p(m)`: no age dependence.
    Uniform,
    /// `Γ(m, a) = p(m) / τ(Θ(m))`: the maturity profile is interpreted as
    /// the age-integrated density `Γ̄`, reproduced exactly on re-ingestion.
    HoldIntegral,
}

/// A rectangular `(m, a)` table of the proliferating age-density with
/// bilinear interpolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gamma2d {
    ms: Vec<f64>,
    ages: Vec<f64>,
    /// row-major: `values[i * ages.len() + j] = Γ(ms[i], ages[j])`
    values: Vec<f64>,
}

impl Gamma2d {
    pub fn new(ms: Vec<f64>, ages: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ms.len() < 2 || ages.len() < 2 || values.len() != ms.len() * ages.len() {
            return Err(Error::InvalidTable {
                detail: format!(
                    "gamma table needs a full {}x{} rectangle, got {} values",
                    ms.len(),
                    ages.len(),
                    values.len()
                ),
            });
        }
        if ms.windows(2).any(|w| w[1] <= w[0]) || ages.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable {
                detail: "gamma table axes must be strictly increasing".into(),
            });
        }
        Ok(Gamma2d { ms, ages, values })
    }

    fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
        if x <= axis[0] {
            return (0, 0.0);
        }
        if x >= axis[axis.len() - 1] {
            return (axis.len() - 2, 1.0);
        }
        let k = axis.partition_point(|&v| v < x).max(1) - 1;
        (k, (x - axis[k]) / (axis[k + 1] - axis[k]))
    }

    pub fn eval(&self, m: f64, a: f64) -> f64 {
        let (i, wm) = Self::bracket(&self.ms, m);
        let (j, wa) = Self::bracket(&self.ages, a);
        let na = self.ages.len();
        let v00 = self.values[i * na + j];
        let v01 = self.values[i * na + j + 1];
        let v10 = self.values[(i + 1) * na + j];
        let v11 = self.values[(i + 1) * na + j + 1];
        let lo = v00 + (v01 - v00) * wa;
        let hi = v10 + (v11 - v10) * wa;
        lo + (hi - lo) * wm
    }

    /// `∫₀^span Γ(m, a) da`, exact for the bilinear interpolant (trapezoids
    /// over the age knots restricted to the span).
    pub fn integrate_age(&self, m: f64, span: f64) -> f64 {
        let mut acc = 0.0;
        let mut prev_a = 0.0;
        let mut prev_v = self.eval(m, 0.0);
        for &a in self.ages.iter().filter(|&&a| a > 0.0) {
            let a_cut = a.min(span);
            if a_cut > prev_a {
                let v = self.eval(m, a_cut);
                acc += 0.5 * (prev_v + v) * (a_cut - prev_a);
                prev_a = a_cut;
                prev_v = v;
            }
            if a >= span {
                break;
            }
        }
        if span > prev_a {
            // constant extension beyond the last age knot
            acc += prev_v * (span - prev_a);
        }
        acc
    }

    fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }
}

/// The proliferating initial density: a separable profile×age-shape or a
/// full `(m, a)` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSpec {
    Separable {
        profile: ProfileSpec,
        age: AgeShape,
    },
    Table { table: Gamma2d },
}

/// Initial state of the two populations: resting density `μ̄(m)` on `[0, 1]`
/// and proliferating age-density `Γ(m, a)` on `[0, 1] × [0, τ_max]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialData {
    pub mu_bar: ProfileSpec,
    pub gamma: GammaSpec,
    /// Reject negative data (default). Disable only for difference-system
    /// diagnostics.
    pub biological: bool,
}

impl InitialData {
    /// Separable data with an age-uniform proliferating profile.
    pub fn new(mu_bar: ProfileSpec, gamma_profile: ProfileSpec) -> Result<Self> {
        let data = InitialData {
            mu_bar,
            gamma: GammaSpec::Separable {
                profile: gamma_profile,
                age: AgeShape::Uniform,
            },
            biological: true,
        };
        data.validate()?;
        Ok(data)
    }

    /// Data with a full `(m, a)` proliferating table.
    pub fn with_gamma_table(mu_bar: ProfileSpec, table: Gamma2d) -> Result<Self> {
        let data = InitialData {
            mu_bar,
            gamma: GammaSpec::Table { table },
            biological: true,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_age_shape(mut self, shape: AgeShape) -> Self {
        if let GammaSpec::Separable { age, .. } = &mut self.gamma {
            *age = shape;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.biological {
            let mn = self.mu_bar.min_on_grid();
            if mn < 0.0 {
                return Err(violation("initial.mu", 0.0, format!("μ̄ must be >= 0 (min {mn})")));
            }
            let gn = match &self.gamma {
                GammaSpec::Separable { profile, .. } => profile.min_on_grid(),
                GammaSpec::Table { table } => table.min_value(),
            };
            if gn < 0.0 {
                return Err(violation("initial.gamma", 0.0, format!("Γ must be >= 0 (min {gn})")));
            }
        }
        Ok(())
    }

    /// Resting density `μ̄(m)`.
    pub fn mu(&self, m: f64) -> f64 {
        self.mu_bar.eval(m)
    }

    /// Proliferating age-density `Γ(m, a)`. The `HoldIntegral` shape needs
    /// the local age span `τ(Θ(m))`; use [`InitialData::gamma_with_span`]
    /// where it is known.
    pub fn gamma(&self, m: f64, a: f64) -> f64 {
        match &self.gamma {
            GammaSpec::Separable { profile, .. } => profile.eval(m),
            GammaSpec::Table { table } => table.eval(m, a),
        }
    }

    /// `Γ(m, a)` given the proliferating age span `span = τ(Θ(m))` at `m`.
    pub fn gamma_with_span(&self, m: f64, a: f64, span: f64) -> f64 {
        match &self.gamma {
            GammaSpec::Separable { profile, age } => match age {
                AgeShape::Uniform => profile.eval(m),
                AgeShape::HoldIntegral => {
                    if span > 0.0 {
                        profile.eval(m) / span
                    } else {
                        0.0
                    }
                }
            },
            GammaSpec::Table { table } => table.eval(m, a),
        }
    }

    /// Age-integrated proliferating density `Γ̄(m) = ∫₀^{τ(Θ(m))} Γ(m, a) da`.
    /// Exact for the separable shapes and for the bilinear table.
    pub fn gamma_bar(&self, m: f64, span: f64) -> f64 {
        match &self.gamma {
            GammaSpec::Separable { profile, age } => match age {
                AgeShape::Uniform => profile.eval(m) * span,
                AgeShape::HoldIntegral => profile.eval(m),
            },
            GammaSpec::Table { table } => table.integrate_age(m, span),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_spec() -> ModelSpec {
        ModelSpec::reference_family(2.0, 4.0, 0.1, 0.2, 1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn derived_constants_of_reference_family() {
        let spec = reference_spec();
        assert_relative_eq!(spec.tau_max, 5.0_f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(spec.rho, 1.1, epsilon = 1e-15);
        assert_relative_eq!(spec.eta, 1.2, epsilon = 1e-15);
        assert_relative_eq!(spec.r, 4.0_f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn negative_constant_delay_rejected() {
        let r = ModelSpec::build(
            VelocityFamily::power_law(1.0, 1.0),
            DelayFamily::constant(-0.5),
            DivisionFamily::linear(2.0),
            ReentryFamily::hill(1.0, 1.0, 2.0),
            MortalityProfiles::constant(0.1, 0.2),
            Profile::constant(1.0),
        );
        assert!(matches!(r, Err(Error::HypothesisViolation { which, .. }) if which == "delay"));
    }

    #[test]
    fn kappa_below_one_rejected() {
        let r = ModelSpec::build(
            VelocityFamily::power_law(1.0, 1.0),
            DelayFamily::log_affine(4.0),
            DivisionFamily::linear(0.5),
            ReentryFamily::hill(1.0, 1.0, 2.0),
            MortalityProfiles::constant(0.1, 0.2),
            Profile::constant(1.0),
        );
        assert!(matches!(r, Err(Error::HypothesisViolation { which, .. }) if which == "division"));
    }

    #[test]
    fn power_law_exponent_below_one_rejected() {
        let r = ModelSpec::build(
            VelocityFamily::power_law(1.0, 0.5),
            DelayFamily::log_affine(4.0),
            DivisionFamily::linear(2.0),
            ReentryFamily::hill(1.0, 1.0, 2.0),
            MortalityProfiles::constant(0.1, 0.2),
            Profile::constant(1.0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn division_inverse_extension() {
        let spec = reference_spec();
        assert_relative_eq!(spec.division.inverse(0.25), 0.5, epsilon = 1e-15);
        assert_eq!(spec.division.inverse(0.7), 1.0);
        assert_eq!(spec.division.inverse_deriv(0.7), 0.0);
        assert_eq!(spec.division.inverse_deriv(0.25), 2.0);
    }

    #[test]
    fn hill_flux_antiderivative_closed_forms() {
        let h2 = HillAtMaturity::new(1.0, 1.0, 2.0);
        assert_relative_eq!(
            h2.flux_antiderivative(1.0),
            0.5 * 2.0_f64.ln(),
            epsilon = 1e-14
        );
        let h1 = HillAtMaturity::new(2.0, 0.5, 1.0);
        // closed form vs quadrature
        let quad = crate::numerics::integrate(|s| h1.flux(s), 0.0, 3.0, 1e-12).unwrap();
        assert_relative_eq!(h1.flux_antiderivative(3.0), quad, epsilon = 1e-10);
        let h3 = HillAtMaturity::new(1.5, 1.2, 3.0);
        let quad = crate::numerics::integrate(|s| h3.flux(s), 0.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(h3.flux_antiderivative(2.0), quad, max_relative = 1e-8);
    }

    #[test]
    fn compatibility_examples() {
        let spec = reference_spec();
        // both sides zero
        let data = InitialData::new(ProfileSpec::Zero, ProfileSpec::Zero).unwrap();
        let c = check_compatibility(&spec, &data);
        assert!(c.compatible);
        // β(0,1)·1 = 1/2 for Hill(1,1,2): Γ(0,0)=0.5 is compatible
        let data = InitialData::new(
            ProfileSpec::Constant { value: 1.0 },
            ProfileSpec::Constant { value: 0.5 },
        )
        .unwrap();
        let c = check_compatibility(&spec, &data);
        assert!(c.compatible);
        assert_relative_eq!(c.rhs, 0.5, epsilon = 1e-15);
        // Γ(0,0)=0.7 is not
        let data = InitialData::new(
            ProfileSpec::Constant { value: 1.0 },
            ProfileSpec::Constant { value: 0.7 },
        )
        .unwrap();
        let c = check_compatibility(&spec, &data);
        assert!(!c.compatible);
        assert_relative_eq!(c.lhs, 0.7, epsilon = 1e-15);
        assert_relative_eq!(c.rhs, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn negative_biological_data_rejected() {
        let r = InitialData::new(ProfileSpec::Constant { value: -1.0 }, ProfileSpec::Zero);
        assert!(r.is_err());
    }

    #[test]
    fn bump_preset_is_exactly_zero_below_threshold() {
        let p = ProfileSpec::Bump {
            b: 0.05,
            height: 1.0,
        };
        for k in 0..=50 {
            let m = 0.05 * k as f64 / 50.0;
            assert_eq!(p.eval(m), 0.0);
        }
        assert!(p.eval(0.5) > 0.9);
    }

    #[test]
    fn serialized_spec_rebuilds_with_identical_derived_constants() {
        let spec = reference_spec();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec.tau_max.to_bits(), back.tau_max.to_bits());
        assert_eq!(spec.rho.to_bits(), back.rho.to_bits());
        assert_eq!(spec.eta.to_bits(), back.eta.to_bits());
        assert_eq!(spec.r.to_bits(), back.r.to_bits());
        // and rebuilding from the deserialized families gives the same bits
        let rebuilt = ModelSpec::build(
            back.velocity,
            back.delay,
            back.division,
            back.reentry,
            back.mortality,
            back.alpha_pi,
        )
        .unwrap();
        assert_eq!(spec.tau_max.to_bits(), rebuilt.tau_max.to_bits());
        assert_eq!(spec.rho.to_bits(), rebuilt.rho.to_bits());
    }
}
