//! Field solver for the full two-phase system on a maturity grid.
//!
//! The integrated formulation propagates the resting density along
//! backward characteristics:
//!
//! ```text
//! N(t+Δt, m) = K(Δt, m) N(t, χ(-Δt, m))
//!            - ∫₀^Δt K(Δt-s, m) β(m_s, N(t+s, m_s)) N(t+s, m_s) ds
//!            + ∫₀^Δt K(Δt-s, m) F(t+s, m_s, N(t+s - τ(Δ(m_s)), Δ(m_s))) ds
//! ```
//!
//! with `m_s = χ(-(Δt-s), m)`, and the analogous form with `H`, `G` and a
//! `+β` sign for the proliferating density `P`. Because the kernels
//! factorize along characteristics and the division source `F` keeps global
//! time, this restarted form is exactly the original equation — stepping it
//! is the discretization, not an approximation of the model.
//!
//! Discretization choices:
//! * maturity nodes placed uniformly in `h`-space (characteristics are
//!   translations there), plus the `m = 0` row fed by the boundary delay
//!   system of [`crate::immature`];
//! * the step integrals use the 2-point Gauss rule; all field reads go
//!   through the history ring buffer with cubic interpolation in time and
//!   **linear interpolation in `h(m)`** across nodes — linearity keeps every
//!   read local to one cell, which makes zero regions and twin-run
//!   agreement below a data threshold propagate bit-exactly;
//! * the implicit dependence of the new row on itself (loss term at the
//!   Gauss times) is resolved by a short fixed-point iteration.

use crate::characteristics::{CharTables, SurvivalCurve};
use crate::error::{Error, Result};
use crate::immature::{self, IntegratorOptions};
use crate::model::{HillAtMaturity, InitialData};

/// Grid and stepping controls.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Interior maturity nodes of the base grid (the `m = 0` boundary row
    /// is extra).
    pub nodes: usize,
    /// Smallest resolved `h`-coordinate; base nodes are uniform on
    /// `[u_floor, 1]` before pinning.
    pub u_floor: f64,
    /// Time step; `0.0` selects the default
    /// `min(τ(0), smallest cell transit) / 20`, capped by the fixed-point
    /// contraction bound.
    pub dt: f64,
    /// Maturities forced onto the grid. The solution has a stationary kink
    /// wherever a model coefficient cuts off (the division source edge
    /// `g(1)` is always pinned internally); aligning such maturities with
    /// nodes keeps interpolation one-sided there. Experiment thresholds
    /// (`b`, `g(b)`) belong here too.
    pub pin_maturities: Vec<f64>,
    /// Cell-midpoint refinement level: level `k` splits every base cell
    /// `2^k` times, preserving pinned nodes, so nested resolutions share
    /// all coarse nodes.
    pub refine: u32,
    /// When set, every step asserts that nodes with `m <= threshold` hold
    /// exactly `0.0` and counts violations (extinction experiments).
    pub track_zero_below: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nodes: 192,
            u_floor: 1e-3,
            dt: 0.0,
            pin_maturities: Vec::new(),
            refine: 0,
            track_zero_below: None,
        }
    }
}

/// Per-node values cached at grid construction (also the payload of the
/// table-dump interface).
#[derive(Debug, Clone)]
pub struct NodeCache {
    pub m: f64,
    pub h: f64,
    pub theta: f64,
    pub delta: f64,
    pub tau_delta: f64,
    pub tau_theta: f64,
    pub xi_bar: f64,
    pub pi_bar: f64,
}

/// Maturity grid in `h`-space with per-node caches.
#[derive(Debug, Clone)]
pub struct MaturityGrid {
    /// Node maturities, `ms[0] = 0`.
    pub ms: Vec<f64>,
    /// Node `h`-coordinates, `us[0] = 0`, strictly increasing to 1.
    pub us: Vec<f64>,
    pub cache: Vec<NodeCache>,
}

impl MaturityGrid {
    pub fn build(
        tables: &CharTables,
        nodes: usize,
        u_floor: f64,
        pins: &[f64],
        refine: u32,
    ) -> Result<Self> {
        if nodes < 8 || !(u_floor > 0.0 && u_floor < 0.5) {
            return Err(Error::DomainError {
                op: "MaturityGrid".into(),
                detail: format!("need nodes >= 8 and u_floor in (0, 0.5), got {nodes}, {u_floor}"),
            });
        }
        // base grid: uniform in h-space, then snap the nearest node onto
        // each pinned coordinate
        let mut interior: Vec<f64> = (0..nodes)
            .map(|j| u_floor + (1.0 - u_floor) * j as f64 / (nodes - 1) as f64)
            .collect();
        let mut pin_us: Vec<f64> = pins.iter().map(|&m| tables.h(m)).collect();
        pin_us.sort_by(f64::total_cmp);
        pin_us.dedup();
        for &u_p in &pin_us {
            if u_p <= u_floor || u_p >= 1.0 {
                continue;
            }
            let i = interior
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - u_p).abs().total_cmp(&(b.1 - u_p).abs()))
                .map(|(i, _)| i)
                .unwrap()
                .clamp(1, nodes - 2);
            interior[i] = u_p;
        }
        if interior.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DomainError {
                op: "MaturityGrid".into(),
                detail: "pinned maturities collide at this resolution".into(),
            });
        }
        // nested refinement: split every cell at its midpoint
        for _ in 0..refine {
            let mut finer = Vec::with_capacity(2 * interior.len() - 1);
            for w in interior.windows(2) {
                finer.push(w[0]);
                finer.push(0.5 * (w[0] + w[1]));
            }
            finer.push(*interior.last().unwrap());
            interior = finer;
        }

        let spec = tables.spec();
        let mut ms = vec![0.0];
        let mut us = vec![0.0];
        for &u in &interior {
            us.push(u);
            ms.push(tables.h_inv(u));
        }
        let mut cache = Vec::with_capacity(ms.len());
        for (&m, &u) in ms.iter().zip(us.iter()) {
            let theta = if m > 0.0 { tables.theta(m)? } else { 0.0 };
            let delta = tables.delta(m);
            cache.push(NodeCache {
                m,
                h: u,
                theta,
                delta,
                tau_delta: spec.delay.eval(delta),
                tau_theta: spec.delay.eval(theta),
                xi_bar: tables.xi_bar(m)?,
                pi_bar: tables.pi_bar(m)?,
            });
        }
        Ok(MaturityGrid { ms, us, cache })
    }

    pub fn len(&self) -> usize {
        self.ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ms.is_empty()
    }

    /// Linear interpolation in `h`-space within one cell. Reads are local:
    /// only the two surrounding node values enter, so all-zero neighborhoods
    /// return literal `0.0`.
    #[inline]
    fn interp(&self, row: &[f64], u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u));
        let k = self.us.partition_point(|&v| v < u);
        if k == 0 {
            return row[0];
        }
        if k >= self.us.len() {
            return row[self.us.len() - 1];
        }
        let (u0, u1) = (self.us[k - 1], self.us[k]);
        let w = (u - u0) / (u1 - u0);
        row[k - 1] + (row[k] - row[k - 1]) * w
    }
}

/// One Gauss point of the step integrals for one node: every
/// time-independent coefficient the update needs.
#[derive(Debug, Clone)]
struct GaussPoint {
    /// Offset `s` within the step.
    s_off: f64,
    /// `K(Δt - s, m_j)` and `H(Δt - s, m_j)`.
    kk: f64,
    kh: f64,
    /// `h`-coordinate of the pullback maturity `m_s = χ(-(Δt-s), m_j)`.
    u_s: f64,
    beta_s: HillAtMaturity,
    // division source (F)
    inv_deriv: f64,
    u_ginv: f64,
    tau_delta: f64,
    u_delta: f64,
    beta_delta: HillAtMaturity,
    xi_bar: f64,
    surv_f: SurvivalCurve,
    // proliferating exit (G)
    tau_theta: f64,
    u_theta: f64,
    beta_theta: HillAtMaturity,
    pi_bar: f64,
    alpha_pi: f64,
    surv_g: SurvivalCurve,
    /// Set once the step times cross `τ(Δ(m_s))` (branch diagnostic).
    crossed: bool,
}

#[derive(Debug, Clone)]
struct NodePlan {
    u_transport: f64,
    k_full: f64,
    h_full: f64,
    gauss: [GaussPoint; 2],
}

/// Solver health counters reported with every run.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct SolverDiagnostics {
    pub steps: usize,
    pub max_fixed_point_sweeps: usize,
    pub final_fixed_point_residual: f64,
    /// Most negative field value observed (interpolation undershoots are
    /// monitored, never clamped internally).
    pub min_n: f64,
    pub min_p: f64,
    /// Largest relative mismatch of the two division-source branches at
    /// their hand-over time (jumps are expected for incompatible data away
    /// from `m = 0` and are logged, not asserted).
    pub branch_mismatch_max: f64,
    /// Largest `|N(t, m_1) - x(t)|` over the run (boundary consistency).
    pub boundary_gap_max: f64,
    /// Nonzero values seen at nodes below the tracked zero band.
    pub zero_band_violations: usize,
}

/// A dumped field state.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub n: Vec<f64>,
    pub p: Vec<f64>,
}

/// Output of a run: node coordinates, requested snapshots, diagnostics.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub ms: Vec<f64>,
    pub us: Vec<f64>,
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: SolverDiagnostics,
}

impl FieldSolution {
    /// Max `|N|` over nodes with `m <= m_hi` in snapshot `si`.
    pub fn sup_n(&self, si: usize, m_hi: f64) -> f64 {
        self.snapshots[si]
            .n
            .iter()
            .zip(self.ms.iter())
            .filter(|(_, &m)| m <= m_hi)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    }

    /// Interpolated `N` of snapshot `si` at maturity `m` (linear in `h`).
    pub fn n_at(&self, si: usize, u: f64) -> f64 {
        interp_row(&self.us, &self.snapshots[si].n, u)
    }

    pub fn p_at(&self, si: usize, u: f64) -> f64 {
        interp_row(&self.us, &self.snapshots[si].p, u)
    }

    /// Max node-wise `|N_a - N_b|` over `m <= m_hi` for same-grid runs.
    pub fn max_diff_n(&self, other: &FieldSolution, si: usize, m_hi: f64) -> f64 {
        self.snapshots[si]
            .n
            .iter()
            .zip(other.snapshots[si].n.iter())
            .zip(self.ms.iter())
            .filter(|(_, &m)| m <= m_hi)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_diff_p(&self, other: &FieldSolution, si: usize, m_hi: f64) -> f64 {
        self.snapshots[si]
            .p
            .iter()
            .zip(other.snapshots[si].p.iter())
            .zip(self.ms.iter())
            .filter(|(_, &m)| m <= m_hi)
            .map(|((a, b), _)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn interp_row(us: &[f64], row: &[f64], u: f64) -> f64 {
    let k = us.partition_point(|&v| v < u);
    if k == 0 {
        return row[0];
    }
    if k >= us.len() {
        return row[us.len() - 1];
    }
    let (u0, u1) = (us[k - 1], us[k]);
    let w = (u - u0) / (u1 - u0);
    row[k - 1] + (row[k] - row[k - 1]) * w
}

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;
const MAX_FIXED_POINT_SWEEPS: usize = 5;
const FIXED_POINT_TOL: f64 = 1e-13;

/// The stepping engine. Construction precomputes every kernel value,
/// pullback coordinate and survival curve; [`FieldSolver::run`] is then a
/// pure arithmetic loop over the history buffer.
pub struct FieldSolver<'a> {
    tables: &'a CharTables,
    data: &'a InitialData,
    pub grid: MaturityGrid,
    plan: Vec<NodePlan>,
    pub dt: f64,
    track_zero_below: Option<f64>,
    // history ring: logical row k holds the field at t = k·dt
    ring_n: Vec<Vec<f64>>,
    row_p: Vec<f64>,
    depth: usize,
    latest: usize,
    // boundary feed
    xs: Vec<f64>,
    ys: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl<'a> FieldSolver<'a> {
    pub fn new(
        tables: &'a CharTables,
        data: &'a InitialData,
        config: &SolverConfig,
        horizon: f64,
    ) -> Result<Self> {
        data.validate()?;
        let spec = tables.spec();
        // the division source switches off above g(1); that edge is a
        // stationary kink of the field and must sit on a node
        let mut pins = config.pin_maturities.clone();
        pins.push(spec.division.g1());
        let grid = MaturityGrid::build(tables, config.nodes, config.u_floor, &pins, config.refine)?;

        // time step: fraction of the smallest characteristic cell transit,
        // capped by the contraction bound of the loss fixed point
        let mut transit_min = f64::INFINITY;
        for w in grid.us.windows(2).skip(1) {
            transit_min = transit_min.min((w[1] / w[0]).ln());
        }
        let lipschitz = spec.reentry.sup_beta0() * (1.0 + 0.25 * spec.reentry.exponent);
        let dt = if config.dt > 0.0 {
            config.dt
        } else {
            (spec.r.min(transit_min) / 20.0).min(0.5 / lipschitz.max(1e-12))
        };
        if dt >= spec.tau_min {
            return Err(Error::DomainError {
                op: "FieldSolver".into(),
                detail: format!("dt = {dt} must stay below the smallest delay {}", spec.tau_min),
            });
        }
        if dt * lipschitz >= 1.0 {
            return Err(Error::FixedPointDivergence {
                t: 0.0,
                residual: dt * lipschitz,
                iters: 0,
            });
        }

        // per-node, per-Gauss-point coefficients (time independent)
        let s_offsets = [0.5 * dt * (1.0 - INV_SQRT3), 0.5 * dt * (1.0 + INV_SQRT3)];
        let mut plan = Vec::with_capacity(grid.len());
        plan.push(NodePlan {
            u_transport: 0.0,
            k_full: 0.0,
            h_full: 0.0,
            gauss: [dummy_gauss(), dummy_gauss()],
        });
        for j in 1..grid.len() {
            let m_j = grid.ms[j];
            let u_j = grid.us[j];
            let mut gauss = Vec::with_capacity(2);
            for &s in &s_offsets {
                let back = dt - s;
                let u_s = u_j * (-back).exp();
                let m_s = tables.h_inv(u_s);
                let inv_deriv = spec.division.inverse_deriv(m_s);
                let ginv = spec.division.inverse(m_s);
                let delta_s = tables.delta(m_s);
                let theta_s = if m_s > 0.0 { tables.theta(m_s)? } else { 0.0 };
                let tau_delta = spec.delay.eval(delta_s);
                let tau_theta = spec.delay.eval(theta_s);
                gauss.push(GaussPoint {
                    s_off: s,
                    kk: tables.kernel_resting(back, m_j)?,
                    kh: tables.kernel_proliferating(back, m_j)?,
                    u_s,
                    beta_s: spec.reentry.at(m_s),
                    inv_deriv,
                    u_ginv: tables.h(ginv),
                    tau_delta,
                    u_delta: tables.h(delta_s),
                    beta_delta: spec.reentry.at(delta_s),
                    xi_bar: tables.xi_bar(m_s)?,
                    surv_f: tables.survival_curve(true, ginv, tau_delta),
                    tau_theta,
                    u_theta: tables.h(theta_s),
                    beta_theta: spec.reentry.at(theta_s),
                    pi_bar: tables.pi_bar(m_s)?,
                    alpha_pi: spec.alpha_pi.eval(m_s),
                    surv_g: tables.survival_curve(true, m_s, tau_theta),
                    crossed: false,
                });
            }
            plan.push(NodePlan {
                u_transport: u_j * (-dt).exp(),
                k_full: tables.kernel_resting(dt, m_j)?,
                h_full: tables.kernel_proliferating(dt, m_j)?,
                gauss: [gauss.remove(0), gauss.remove(0)],
            });
        }

        // boundary trajectory over the full horizon
        let params = immature::ImmatureParams::from_spec(spec)?;
        let gamma0 = |a: f64| data.gamma_with_span(0.0, a, spec.r);
        let phase = immature::solve_initial_phase(&params, data.mu(0.0), gamma0, &IntegratorOptions::default())?;
        let traj = immature::solve_dde(&params, &phase, horizon + spec.r + 2.0 * dt, &IntegratorOptions::default())?;
        let steps_total = (horizon / dt).ceil() as usize;
        let xs: Vec<f64> = (0..=steps_total + 1).map(|k| traj.x(k as f64 * dt)).collect();
        let ys: Vec<f64> = (0..=steps_total + 1)
            .map(|k| traj.y(k as f64 * dt).unwrap_or(0.0))
            .collect();

        // initial rows
        let mut row_n0 = Vec::with_capacity(grid.len());
        let mut row_p0 = Vec::with_capacity(grid.len());
        for j in 0..grid.len() {
            row_n0.push(data.mu(grid.ms[j]));
            row_p0.push(data.gamma_bar(grid.ms[j], grid.cache[j].tau_theta));
        }

        let depth = (spec.tau_max / dt).ceil() as usize + 6;
        let mut ring_n = vec![Vec::new(); depth];
        ring_n[0] = row_n0;

        Ok(FieldSolver {
            tables,
            data,
            grid,
            plan,
            dt,
            track_zero_below: config.track_zero_below,
            ring_n,
            row_p: row_p0,
            depth,
            latest: 0,
            xs,
            ys,
            diagnostics: SolverDiagnostics::default(),
        })
    }

    fn row(&self, k: i64) -> &[f64] {
        let k = k.max(0) as usize; // negative times carry the initial data
        debug_assert!(k + self.depth > self.latest && k <= self.latest + 1);
        &self.ring_n[k % self.depth]
    }

    /// History lookup of `N` at `(t, u)`: cubic in time over four stamped
    /// rows (shifted one-sided at the live end, padded with the initial row
    /// below `t = 0`), linear in `h`-space within each row.
    fn lookup_n(&self, t: f64, u: f64, top: i64) -> f64 {
        let s = t / self.dt;
        let kf = s.floor();
        let theta = s - kf;
        let kf = kf as i64;
        if theta == 0.0 {
            return self.grid.interp(self.row(kf), u);
        }
        let base = (kf - 1).min(top - 3);
        let x = s - base as f64;
        // cubic Lagrange on uniform stamps at offsets 0..3
        let l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
        let l1 = x * (x - 2.0) * (x - 3.0) / 2.0;
        let l2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
        let l3 = x * (x - 1.0) * (x - 2.0) / 6.0;
        let v0 = self.grid.interp(self.row(base), u);
        let v1 = self.grid.interp(self.row(base + 1), u);
        let v2 = self.grid.interp(self.row(base + 2), u);
        let v3 = self.grid.interp(self.row(base + 3), u);
        l0 * v0 + l1 * v1 + l2 * v2 + l3 * v3
    }

    /// Division source `F` at global time `tg` for one Gauss point. The
    /// initial-layer branch reads the age density of the founding
    /// proliferating population; afterwards the delayed resting density
    /// feeds back.
    fn eval_f(&self, gp: &GaussPoint, tg: f64, top: i64) -> f64 {
        if gp.inv_deriv == 0.0 {
            return 0.0;
        }
        if tg <= gp.tau_delta {
            let xi_t = gp.inv_deriv * gp.surv_f.survival(self.tables, tg);
            let m_arg = self.tables.h_inv(gp.u_ginv * (-tg).exp());
            let span = self.gamma_span(m_arg);
            2.0 * xi_t * self.data.gamma_with_span(m_arg, gp.tau_delta - tg, span)
        } else {
            let xd = self.lookup_n(tg - gp.tau_delta, gp.u_delta, top);
            2.0 * gp.xi_bar * gp.beta_delta.beta(xd) * xd
        }
    }

    /// Proliferating exit source `G` at global time `tg`.
    fn eval_g(&self, gp: &GaussPoint, tg: f64, top: i64) -> f64 {
        if tg <= gp.tau_theta {
            let pi_t = gp.alpha_pi * gp.surv_g.survival(self.tables, tg);
            let m_arg = self.tables.h_inv(gp.u_s * (-tg).exp());
            let span = self.gamma_span(m_arg);
            pi_t * self.data.gamma_with_span(m_arg, gp.tau_theta - tg, span)
        } else {
            let xd = self.lookup_n(tg - gp.tau_theta, gp.u_theta, top);
            gp.pi_bar * gp.beta_theta.beta(xd) * xd
        }
    }

    /// Proliferating age span `τ(Θ(m))` needed when the age shape stores the
    /// integrated density; the other shapes never ask for it.
    fn gamma_span(&self, m: f64) -> f64 {
        match &self.data.gamma {
            crate::model::GammaSpec::Separable {
                age: crate::model::AgeShape::HoldIntegral,
                ..
            } => {
                let theta = if m > 0.0 {
                    self.tables.theta(m).unwrap_or(0.0)
                } else {
                    0.0
                };
                self.tables.spec().delay.eval(theta)
            }
            _ => 0.0,
        }
    }

    /// Advance both fields by one step.
    pub fn step(&mut self) -> Result<()> {
        let k = self.latest as i64;
        let t = k as f64 * self.dt;
        let dt = self.dt;
        let w = 0.5 * dt;
        let n_nodes = self.grid.len();
        let new_idx = (self.latest + 1) % self.depth;
        let top = k + 1;

        // transport predictor (exact row read at time t)
        let mut transport = vec![0.0; n_nodes];
        let mut prov = vec![0.0; n_nodes];
        prov[0] = self.xs[self.latest + 1];
        for j in 1..n_nodes {
            transport[j] = self.plan[j].k_full * self.grid.interp(self.row(k), self.plan[j].u_transport);
            prov[j] = transport[j];
        }
        self.ring_n[new_idx] = prov;

        // fixed-point sweeps over the loss and source integrals
        let mut residual = f64::INFINITY;
        let mut sweeps = 0;
        while sweeps < MAX_FIXED_POINT_SWEEPS {
            sweeps += 1;
            let mut scratch = vec![0.0; n_nodes];
            scratch[0] = self.xs[self.latest + 1];
            for j in 1..n_nodes {
                let mut acc = transport[j];
                for gi in 0..2 {
                    let gp = &self.plan[j].gauss[gi];
                    let tg = t + gp.s_off;
                    let n_s = self.lookup_n(tg, gp.u_s, top);
                    let loss = gp.beta_s.beta(n_s) * n_s;
                    acc += w * gp.kk * (self.eval_f(gp, tg, top) - loss);
                }
                scratch[j] = acc;
            }
            residual = scratch
                .iter()
                .zip(self.ring_n[new_idx].iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale = 1.0 + scratch.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
            self.ring_n[new_idx] = scratch;
            if residual <= FIXED_POINT_TOL * scale {
                break;
            }
        }
        let scale = 1.0 + self.ring_n[new_idx].iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
        if residual > 1e-9 * scale {
            return Err(Error::FixedPointDivergence {
                t,
                residual,
                iters: sweeps,
            });
        }
        self.diagnostics.max_fixed_point_sweeps = self.diagnostics.max_fixed_point_sweeps.max(sweeps);
        self.diagnostics.final_fixed_point_residual = residual;

        // proliferating field: single pass, reads only settled N history
        let mut new_p = Vec::with_capacity(n_nodes);
        new_p.push(self.ys[self.latest + 1]);
        for j in 1..n_nodes {
            let mut acc = self.plan[j].h_full * interp_row(&self.grid.us, &self.row_p, self.plan[j].u_transport);
            for gi in 0..2 {
                let gp = &self.plan[j].gauss[gi];
                let tg = t + gp.s_off;
                let n_s = self.lookup_n(tg, gp.u_s, top);
                let gain = gp.beta_s.beta(n_s) * n_s;
                acc += w * gp.kh * (gain - self.eval_g(gp, tg, top));
            }
            new_p.push(acc);
        }
        self.row_p = new_p;

        // branch hand-over probe: first step past τ(Δ(m_s)) compares the
        // two F branches at the crossing time
        for j in 1..n_nodes {
            for gi in 0..2 {
                let (crossed, tau_delta, active) = {
                    let gp = &self.plan[j].gauss[gi];
                    (gp.crossed, gp.tau_delta, gp.inv_deriv != 0.0)
                };
                if !crossed && active && t + dt > tau_delta {
                    let gp = &self.plan[j].gauss[gi];
                    let xi_t = gp.inv_deriv * gp.surv_f.survival(self.tables, tau_delta);
                    // χ(-τ(Δ), g⁻¹(m_s)) = Δ(m_s): the hand-over compares
                    // the founding density against the compatibility value
                    // at the mother's commitment maturity
                    let m_arg = self.tables.h_inv(gp.u_ginv * (-tau_delta).exp());
                    let span = self.gamma_span(m_arg);
                    let init = 2.0 * xi_t * self.data.gamma_with_span(m_arg, 0.0, span);
                    let xd = self.lookup_n(0.0, gp.u_delta, top);
                    let late = 2.0 * gp.xi_bar * gp.beta_delta.beta(xd) * xd;
                    let mismatch = (init - late).abs() / (1.0 + init.abs());
                    self.diagnostics.branch_mismatch_max =
                        self.diagnostics.branch_mismatch_max.max(mismatch);
                    self.plan[j].gauss[gi].crossed = true;
                }
            }
        }

        self.latest += 1;
        self.diagnostics.steps += 1;

        // monitors
        let newest = &self.ring_n[new_idx];
        for &v in newest.iter() {
            self.diagnostics.min_n = self.diagnostics.min_n.min(v);
        }
        for &v in self.row_p.iter() {
            self.diagnostics.min_p = self.diagnostics.min_p.min(v);
        }
        let gap = (newest[1] - self.xs[self.latest]).abs();
        self.diagnostics.boundary_gap_max = self.diagnostics.boundary_gap_max.max(gap);
        if let Some(thr) = self.track_zero_below {
            for (j, &m) in self.grid.ms.iter().enumerate() {
                if m <= thr && newest[j] != 0.0 {
                    self.diagnostics.zero_band_violations += 1;
                }
            }
        }
        Ok(())
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.latest as f64 * self.dt,
            n: self.ring_n[self.latest % self.depth].clone(),
            p: self.row_p.clone(),
        }
    }

    /// Run to `horizon`, dumping at the step times nearest each requested
    /// dump time.
    pub fn run(mut self, horizon: f64, dump_times: &[f64]) -> Result<FieldSolution> {
        let steps = (horizon / self.dt).ceil() as usize;
        let mut dump_steps: Vec<usize> = dump_times
            .iter()
            .map(|&t| ((t / self.dt).round() as usize).min(steps))
            .collect();
        dump_steps.sort_unstable();
        dump_steps.dedup();

        let mut snapshots = Vec::with_capacity(dump_steps.len());
        let mut next_dump = 0;
        if dump_steps.first() == Some(&0) {
            snapshots.push(self.snapshot());
            next_dump = 1;
        }
        for k in 1..=steps {
            self.step()?;
            if next_dump < dump_steps.len() && dump_steps[next_dump] == k {
                snapshots.push(self.snapshot());
                next_dump += 1;
            }
        }
        Ok(FieldSolution {
            ms: self.grid.ms.clone(),
            us: self.grid.us.clone(),
            dt: self.dt,
            snapshots,
            diagnostics: self.diagnostics,
        })
    }
}

fn dummy_gauss() -> GaussPoint {
    GaussPoint {
        s_off: 0.0,
        kk: 0.0,
        kh: 0.0,
        u_s: 0.0,
        beta_s: HillAtMaturity::new(0.0, 1.0, 2.0),
        inv_deriv: 0.0,
        u_ginv: 0.0,
        tau_delta: 0.0,
        u_delta: 0.0,
        beta_delta: HillAtMaturity::new(0.0, 1.0, 2.0),
        xi_bar: 0.0,
        surv_f: SurvivalCurve::Linear { rate: 0.0 },
        tau_theta: 0.0,
        u_theta: 0.0,
        beta_theta: HillAtMaturity::new(0.0, 1.0, 2.0),
        pi_bar: 0.0,
        alpha_pi: 0.0,
        surv_g: SurvivalCurve::Linear { rate: 0.0 },
        crossed: false,
    }
}

/// Convenience wrapper: build tables, solver, and run.
pub fn simulate(
    tables: &CharTables,
    data: &InitialData,
    config: &SolverConfig,
    horizon: f64,
    dump_times: &[f64],
) -> Result<FieldSolution> {
    FieldSolver::new(tables, data, config, horizon)?.run(horizon, dump_times)
}

/// Division source term of the resting equation at global time `t`,
/// maturity `m`, with `x` the delayed resting density
/// `N(t - τ(Δ(m)), Δ(m))`:
///
/// * while `t <= τ(Δ(m))` the dividing mothers come from the founding
///   proliferating population: `2 ξ(t, m) Γ(χ(-t, g⁻¹(m)), τ(Δ(m)) - t)`;
/// * afterwards from re-entered resting cells: `2 ξ̄(m) β(Δ(m), x) x`.
///
/// Vanishes identically for `m > g(1)` (daughters cannot be born there).
pub fn source_f(
    tables: &CharTables,
    data: &InitialData,
    t: f64,
    m: f64,
    x: f64,
) -> Result<f64> {
    let spec = tables.spec();
    if spec.division.inverse_deriv(m) == 0.0 && m > spec.division.g1() {
        return Ok(0.0);
    }
    let delta = tables.delta(m);
    let tau_delta = spec.delay.eval(delta);
    if t <= tau_delta {
        let xi_t = tables.xi(t, m)?;
        let m_arg = tables.chi(-t, spec.division.inverse(m));
        let span = gamma_span_at(tables, data, m_arg)?;
        Ok(2.0 * xi_t * data.gamma_with_span(m_arg, tau_delta - t, span))
    } else {
        Ok(2.0 * tables.xi_bar(m)? * spec.reentry.eval(delta, x) * x)
    }
}

/// Exit source term of the proliferating equation, the analogue of
/// [`source_f`] with `π`, `Θ` and no mitosis factor.
pub fn source_g(
    tables: &CharTables,
    data: &InitialData,
    t: f64,
    m: f64,
    x: f64,
) -> Result<f64> {
    let spec = tables.spec();
    let theta = if m > 0.0 { tables.theta(m)? } else { 0.0 };
    let tau_theta = spec.delay.eval(theta);
    if t <= tau_theta {
        let pi_t = tables.pi(t, m)?;
        let m_arg = tables.chi(-t, m);
        let span = gamma_span_at(tables, data, m_arg)?;
        Ok(pi_t * data.gamma_with_span(m_arg, tau_theta - t, span))
    } else {
        Ok(tables.pi_bar(m)? * spec.reentry.eval(theta, x) * x)
    }
}

fn gamma_span_at(tables: &CharTables, data: &InitialData, m: f64) -> Result<f64> {
    match &data.gamma {
        crate::model::GammaSpec::Separable {
            age: crate::model::AgeShape::HoldIntegral,
            ..
        } => {
            let theta = if m > 0.0 { tables.theta(m)? } else { 0.0 };
            Ok(tables.spec().delay.eval(theta))
        }
        _ => Ok(0.0),
    }
}
