//! Subcommand implementations. Everything here is deterministic given the
//! configuration file: no clocks, no randomness, stable field order in
//! JSON, 17-significant-digit floats in CSV.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use matpop::analysis;
use matpop::characteristics::CharTables;
use matpop::immature::{self, IntegratorOptions};
use matpop::model::{check_compatibility, ModelSpec};
use matpop::scenarios;
use matpop::structured::{FieldSolution, MaturityGrid, SolverConfig};

use crate::config::{RunConfig, SweepRun};
use crate::csvio::CsvWriter;

/// Resolve the output directory: the environment variable wins, then the
/// explicit flag, then the config value.
pub fn resolve_out_dir(config: &RunConfig, flag: Option<&Path>) -> PathBuf {
    if let Ok(env) = std::env::var("MATPOP_OUT") {
        return PathBuf::from(env);
    }
    match flag {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(&config.output.dir),
    }
}

fn solver_config(config: &RunConfig) -> SolverConfig {
    SolverConfig {
        nodes: config.grid.nodes,
        u_floor: config.grid.u_floor,
        dt: config.grid.dt,
        pin_maturities: config.grid.pins.clone(),
        refine: 0,
        track_zero_below: None,
    }
}

fn dump_times(config: &RunConfig) -> Vec<f64> {
    if !config.run.dump_times.is_empty() {
        return config.run.dump_times.clone();
    }
    let every = config.run.dump_every.unwrap_or(config.run.horizon / 10.0);
    let mut times: Vec<f64> = (0..)
        .map(|k| k as f64 * every)
        .take_while(|&t| t < config.run.horizon)
        .collect();
    times.push(config.run.horizon);
    times
}

#[derive(Serialize)]
struct DerivedConstants {
    tau_max: f64,
    tau_min: f64,
    rho: f64,
    eta: f64,
    r: f64,
    g_of_one: f64,
    theta_of_one: f64,
    xi_bar_at_zero: f64,
}

#[derive(Serialize)]
struct Meta<'a> {
    config: &'a RunConfig,
    out_dir: String,
    derived: DerivedConstants,
    compatibility: matpop::model::Compatibility,
    effective_dt: f64,
    effective_nodes: usize,
    diagnostics: &'a matpop::structured::SolverDiagnostics,
}

/// Full simulation run: writes `fields.csv`, `immature.csv`, `initial.csv`
/// and `meta.json` into the output directory.
pub fn cmd_simulate(config: &RunConfig, base_dir: &Path, out_dir: &Path) -> Result<()> {
    let spec = config.build_spec()?;
    let data = config.build_initial(base_dir)?;
    let tables = CharTables::new(&spec)?;
    let compat = check_compatibility(&spec, &data);
    let cfg = solver_config(config);
    let horizon = config.run.horizon;
    let dumps = dump_times(config);

    let sol = matpop::structured::simulate(&tables, &data, &cfg, horizon, &dumps)?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    // fields.csv: one row per (dump time, node); negative interpolation
    // undershoots are clamped in the export only
    let mut w = CsvWriter::create(&out_dir.join("fields.csv"), &["t", "m", "N", "P"])?;
    for snap in &sol.snapshots {
        for (j, &m) in sol.ms.iter().enumerate() {
            w.row(&[snap.t, m, snap.n[j].max(0.0), snap.p[j].max(0.0)])?;
        }
    }
    w.finish()?;

    // boundary trajectory at a fine uniform sampling
    let params = immature::ImmatureParams::from_spec(&spec)?;
    let gamma0 = |a: f64| data.gamma_with_span(0.0, a, spec.r);
    let phase = immature::solve_initial_phase(&params, data.mu(0.0), gamma0, &IntegratorOptions::default())?;
    let traj = immature::solve_dde(&params, &phase, horizon.max(2.0 * spec.r), &IntegratorOptions::default())?;
    let dt_out = horizon / 1000.0;
    let mut w = CsvWriter::create(&out_dir.join("immature.csv"), &["t", "x", "y"])?;
    for (t, x, y) in traj.sample(dt_out) {
        w.row(&[t, x, y.unwrap_or(f64::NAN)])?;
    }
    w.finish()?;

    // initial data at the grid nodes (re-ingestable)
    let mut w = CsvWriter::create(&out_dir.join("initial.csv"), &["m", "mu", "gbar"])?;
    for (j, &m) in sol.ms.iter().enumerate() {
        w.row(&[m, sol.snapshots.first().map(|s| s.n[j]).unwrap_or(data.mu(m)), {
            let theta = if m > 0.0 { tables.theta(m)? } else { 0.0 };
            data.gamma_bar(m, spec.delay.eval(theta))
        }])?;
    }
    w.finish()?;

    let meta = Meta {
        config,
        out_dir: out_dir.display().to_string(),
        derived: derived_constants(&spec, &tables)?,
        compatibility: compat,
        effective_dt: sol.dt,
        effective_nodes: sol.ms.len() - 1,
        diagnostics: &sol.diagnostics,
    };
    write_json(&out_dir.join("meta.json"), &meta)?;
    Ok(())
}

fn derived_constants(spec: &ModelSpec, tables: &CharTables) -> Result<DerivedConstants> {
    Ok(DerivedConstants {
        tau_max: spec.tau_max,
        tau_min: spec.tau_min,
        rho: spec.rho,
        eta: spec.eta,
        r: spec.r,
        g_of_one: spec.division.g1(),
        theta_of_one: tables.theta(1.0)?,
        xi_bar_at_zero: tables.xi_bar(0.0)?,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Criteria evaluation: writes `stability.json` and prints the verdict.
pub fn cmd_analyze(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let spec = config.build_spec()?;
    let tables = CharTables::new(&spec)?;
    let report = analysis::classify(&tables)?;
    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("stability.json"), &report)?;
    println!("overall verdict: {:?}", report.overall);
    println!(
        "  local criterion: lhs = {:.6} {} rhs = {:.6}",
        report.local.lhs,
        if report.local.holds { "<" } else { ">=" },
        report.local.rhs
    );
    println!(
        "  strict commitment Δ(m) < m: {}",
        if report.delta_strict.holds { "holds" } else { "fails" }
    );
    println!(
        "  immature margin: {:.6} ({:?}), dominant root Re λ = {:.6}",
        report.immature.margin, report.immature.verdict, report.dominant_root_real_part
    );
    println!(
        "  immature simulation: x decayed = {}, y decayed = {}, Lyapunov nonincreasing = {}",
        report.simulation.x_decayed, report.simulation.y_decayed,
        report.simulation.lyapunov_nonincreasing
    );
    Ok(())
}

/// Run one verification suite (or all); returns whether everything passed.
pub fn cmd_verify(suite: &str) -> Result<bool> {
    let names: Vec<&str> = if suite == "all" {
        scenarios::SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut passed = 0usize;
    let mut failed = 0usize;
    for name in names {
        let report = scenarios::run_suite(name)?;
        for a in &report.assertions {
            println!(
                "[{}] {} :: {} — {}",
                if a.passed { "PASS" } else { "FAIL" },
                report.suite,
                a.name,
                a.detail
            );
            if a.passed {
                passed += 1;
            } else {
                failed += 1;
            }
        }
    }
    println!("verify: {passed} passed, {failed} failed");
    Ok(failed == 0)
}

/// Characteristic tables on the configured grid: `tables.csv` with columns
/// `(m, h, theta, delta, xi_bar, pi_bar)`.
pub fn cmd_dump_tables(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let spec = config.build_spec()?;
    let tables = CharTables::new(&spec)?;
    let mut pins = config.grid.pins.clone();
    pins.push(spec.division.g1());
    let grid = MaturityGrid::build(&tables, config.grid.nodes, config.grid.u_floor, &pins, 0)?;
    std::fs::create_dir_all(out_dir)?;
    let mut w = CsvWriter::create(
        &out_dir.join("tables.csv"),
        &["m", "h", "theta", "delta", "xi_bar", "pi_bar"],
    )?;
    for c in &grid.cache {
        w.row(&[c.m, c.h, c.theta, c.delta, c.xi_bar, c.pi_bar])?;
    }
    w.finish()?;
    Ok(())
}

/// Fan the sweep entries out over a fixed-size worker pool; each run writes
/// its artifacts under `out_dir/<name>/`.
pub fn cmd_sweep(config: &RunConfig, base_dir: &Path, out_dir: &Path, workers: usize) -> Result<()> {
    let sweep = config
        .sweep
        .as_ref()
        .context("config has no [sweep] section")?;
    let jobs: Vec<(RunConfig, PathBuf)> = sweep
        .runs
        .iter()
        .map(|run| {
            let cfg = apply_overrides(config, run)?;
            Ok((cfg, out_dir.join(&run.name)))
        })
        .collect::<Result<_>>()?;

    let next = std::sync::atomic::AtomicUsize::new(0);
    let failures = std::sync::Mutex::new(Vec::<String>::new());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let (cfg, dir) = &jobs[i];
                if let Err(e) = cmd_simulate(cfg, base_dir, dir) {
                    failures.lock().unwrap().push(format!("{}: {e:#}", dir.display()));
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    if !failures.is_empty() {
        bail!("sweep failures:\n{}", failures.join("\n"));
    }
    Ok(())
}

fn apply_overrides(base: &RunConfig, run: &SweepRun) -> Result<RunConfig> {
    use crate::config::{DelaySection, DivisionSection, ProfileValue};
    let mut cfg = base.clone();
    if let Some(b0) = run.beta0 {
        cfg.model.reentry.beta0 = ProfileValue::Constant(b0);
    }
    if let Some(th) = run.theta {
        cfg.model.reentry.theta = ProfileValue::Constant(th);
    }
    if let Some(k) = run.kappa {
        match &mut cfg.model.division {
            DivisionSection::Linear { kappa } => *kappa = k,
            _ => bail!("sweep '{}': kappa override needs a linear division family", run.name),
        }
    }
    if let Some(a) = run.alpha {
        match &mut cfg.model.delay {
            DelaySection::LogAffine { alpha } => *alpha = a,
            _ => bail!("sweep '{}': alpha override needs a log-affine delay family", run.name),
        }
    }
    if let Some(d) = run.delta {
        cfg.model.mortality.delta = ProfileValue::Constant(d);
    }
    if let Some(g) = run.gamma {
        cfg.model.mortality.gamma = ProfileValue::Constant(g);
    }
    Ok(cfg)
}

/// Dependence / extinction experiment driver used by the `experiment`-bearing
/// configs: runs the twin (or extinction) setup and writes a JSON report.
pub fn cmd_experiment(config: &RunConfig, base_dir: &Path, out_dir: &Path) -> Result<()> {
    let exp = config
        .experiment
        .as_ref()
        .context("config has no [experiment] section")?;
    let spec = config.build_spec()?;
    let tables = CharTables::new(&spec)?;
    let data1 = config.build_initial(base_dir)?;
    let mut cfg = solver_config(config);
    cfg.pin_maturities.push(exp.b);
    cfg.pin_maturities.push(spec.division.eval(exp.b));
    std::fs::create_dir_all(out_dir)?;

    match (&exp.mu2, &exp.gamma2) {
        (Some(mu2), gamma2) => {
            let mu2 = crate::config::data_source_to_profile(mu2, base_dir, "mu")?;
            let data2 = match gamma2 {
                Some(g) => matpop::model::InitialData::new(
                    mu2,
                    crate::config::data_source_to_profile(g, base_dir, "gamma")?,
                )?,
                None => {
                    let mut d = data1.clone();
                    d.mu_bar = mu2;
                    d.validate()?;
                    d
                }
            };
            let dumps = dump_times(config);
            // pin the effective step (cfg.dt may be 0 = auto) so the
            // refinement probe halves it exactly
            if cfg.dt == 0.0 {
                cfg.dt = matpop::structured::FieldSolver::new(
                    &tables,
                    &data1,
                    &cfg,
                    config.run.horizon,
                )?
                .dt;
            }
            // tolerance from a one-level self-convergence probe
            let fine = SolverConfig {
                dt: 0.5 * cfg.dt,
                refine: cfg.refine + 1,
                ..cfg.clone()
            };
            let base_sol =
                matpop::structured::simulate(&tables, &data1, &cfg, config.run.horizon, &dumps)?;
            let fine_sol =
                matpop::structured::simulate(&tables, &data1, &fine, config.run.horizon, &dumps)?;
            let last = base_sol.snapshots.len() - 1;
            let tol = 10.0 * nested_diff(&base_sol, &fine_sol, last);
            let (outcome, _, _) = analysis::dependence_experiment(
                &tables,
                &data1,
                &data2,
                exp.b,
                &cfg,
                config.run.horizon,
                &dumps,
                tol,
                tol,
            )?;
            write_json(&out_dir.join("dependence.json"), &outcome)?;
            println!(
                "dependence: exact low band = {}, mid pass = {}, full pass = {}, P pass = {}",
                outcome.exact_low_band, outcome.mid_band_pass, outcome.full_pass, outcome.p_full_pass
            );
        }
        (None, _) => {
            let (outcome, _) = analysis::extinction_experiment(&tables, &data1, exp.b, &cfg)?;
            write_json(&out_dir.join("extinction.json"), &outcome)?;
            println!(
                "extinction: predicted {:.4}, extinct by {:?}, pass = {}",
                outcome.predicted, outcome.extinct_by, outcome.pass
            );
        }
    }
    Ok(())
}

fn nested_diff(coarse: &FieldSolution, fine: &FieldSolution, si: usize) -> f64 {
    let ratio = (fine.ms.len() - 2) / (coarse.ms.len() - 2);
    let mut d = (coarse.snapshots[si].n[0] - fine.snapshots[si].n[0]).abs();
    for j in 1..coarse.ms.len() {
        let fj = 1 + ratio * (j - 1);
        d = d.max((coarse.snapshots[si].n[j] - fine.snapshots[si].n[fj]).abs());
    }
    d
}
