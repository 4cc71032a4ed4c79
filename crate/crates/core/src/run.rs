//! Batch runs: ensemble, optional reference solution, convergence sweep, and
//! the files they produce.
//!
//! Output directory contents:
//! - `ensemble.csv`: `time`, `mean_<obs>`…, `stderr_<obs>`… (time in `τ`)
//! - `oracle.csv`: the master-equation series in the same layout (zero errors)
//! - `mse_sweep.csv`: `n_trajectories`, then per observable the mean
//!   per-trajectory MSE and the MSE of the ensemble mean, both time-averaged
//!   and divided by the squared range of the reference
//! - `jumps.csv`: `trajectory`, `seed`, `time`, `channel`
//! - `manifest.json`
//!
//! Numbers are written with 12 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::Serialize;

use crate::config::{PropagatorKind, RunConfig};
use crate::mcwf::{self, Propagator, TrajectoryEnsemble, TrajectoryResult};
use crate::model::{Representation, System};
use crate::ode::Tolerances;
use crate::oracle::{self, OracleResult};
use crate::{Error, Result};

/// `%.12g`-style formatting.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
        format!("{m}e{exp}")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakageReport {
    pub dof: String,
    pub time: f64,
    pub population: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceFlags {
    pub truncation_leakage: Vec<LeakageReport>,
    pub integration_failures: Vec<String>,
    /// Largest per-interval jump probability in any trajectory.
    pub max_jump_probability: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub propagator: String,
    pub time_unit: f64,
    /// Interval length in units of τ.
    pub dt: f64,
    pub n_intervals: usize,
    pub hilbert_dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub jump_count: usize,
    pub oracle_basis_dim: Option<usize>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub flags: ConvergenceFlags,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_trajectories: usize,
    /// Per observable.
    pub mse_trajectories: Vec<f64>,
    pub mse_mean: Vec<f64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub ensemble: TrajectoryEnsemble,
    pub oracle: Option<OracleResult>,
    pub sweep: Option<Vec<SweepRow>>,
    pub manifest: RunManifest,
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|&x| format_number(x)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn series_header(labels: &[String]) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    h.extend(labels.iter().map(|l| format!("mean_{l}")));
    h.extend(labels.iter().map(|l| format!("stderr_{l}")));
    h
}

pub fn write_ensemble_csv(path: &Path, ens: &TrajectoryEnsemble, time_unit: f64) -> Result<()> {
    let n_obs = ens.labels.len();
    write_table(
        path,
        &series_header(&ens.labels),
        ens.times.iter().enumerate().map(|(i, t)| {
            let mut r = vec![t / time_unit];
            r.extend((0..n_obs).map(|j| ens.mean[(i, j)]));
            r.extend((0..n_obs).map(|j| ens.std_error[(i, j)]));
            r
        }),
    )
}

pub fn write_oracle_csv(path: &Path, o: &OracleResult, time_unit: f64) -> Result<()> {
    let n_obs = o.labels.len();
    write_table(
        path,
        &series_header(&o.labels),
        o.times.iter().enumerate().map(|(i, t)| {
            let mut r = vec![t / time_unit];
            r.extend((0..n_obs).map(|j| o.values[(i, j)]));
            r.extend(std::iter::repeat_n(0.0, n_obs));
            r
        }),
    )
}

fn write_jumps_csv(path: &Path, trajs: &[TrajectoryResult], time_unit: f64) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "trajectory,seed,time,channel")?;
    for t in trajs {
        for j in &t.jumps {
            writeln!(out, "{},{},{},{}", t.index, t.seed, format_number(j.time / time_unit), j.label)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Convergence of the first `n` trajectories of a pool against a reference.
pub fn sweep_rows(pool: &[TrajectoryResult], reference: &OracleResult, counts: &[usize]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &n in counts {
        if n > pool.len() {
            return Err(Error::InvalidArgument(format!("sweep needs {n} trajectories, pool has {}", pool.len())));
        }
        let subset = &pool[..n];
        let mut mse_t = Vec::new();
        let mut mse_m = Vec::new();
        for j in 0..reference.labels.len() {
            let r: Vec<f64> = reference.values.column(j).iter().copied().collect();
            let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
            let range2 = ((hi - lo) * (hi - lo)).max(1e-300);
            let per_time = mcwf::mse_vs_reference(subset, j, &r)?;
            mse_t.push(per_time.iter().sum::<f64>() / per_time.len() as f64 / range2);
            let mean: Vec<f64> = (0..r.len())
                .map(|i| subset.iter().map(|t| t.observables[(i, j)]).sum::<f64>() / n as f64)
                .collect();
            mse_m.push(mcwf::normalized_mse(&mean, &r));
        }
        rows.push(SweepRow { n_trajectories: n, mse_trajectories: mse_t, mse_mean: mse_m });
    }
    Ok(rows)
}

fn realize(cfg: &RunConfig) -> Result<(System, Propagator, f64)> {
    let scenario = cfg.scenario()?;
    let tau = scenario.time_unit;
    Ok(match cfg.propagator {
        PropagatorKind::Exact => (scenario.realize(&cfg.fock_representation(&scenario))?, Propagator::exact(), tau),
        PropagatorKind::Mctdh => {
            let rep = Representation::grids(&scenario, cfg.grid.n_points)?;
            let spfs = cfg.spf_counts(&rep);
            (scenario.realize(&rep)?, Propagator::mctdh(spfs), tau)
        }
    })
}

/// Execute a validated configuration and write all artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let clock = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let (system, propagator, tau) = realize(cfg)?;
    let opts = cfg.engine_options(tau);
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let mut flags = ConvergenceFlags::default();
    let n_pool = cfg.sweep.as_ref().and_then(|s| s.iter().max().copied()).unwrap_or(0).max(cfg.n_trajectories);
    let simulated = pool.install(|| -> Result<(f64, Vec<TrajectoryResult>)> {
        let dt = match opts.dt {
            Some(dt) => dt,
            None => mcwf::estimate_dt(&system, &propagator, &opts)?,
        };
        let trajs = mcwf::run_trajectories(&system, &propagator, &opts, dt, cfg.master_seed, 0, n_pool)?;
        Ok((dt, trajs))
    });
    let (dt, pool_trajs) = match simulated {
        Ok(v) => v,
        Err(e) => {
            flags.integration_failures.push(e.to_string());
            let manifest = RunManifest {
                config: cfg.clone(),
                version: env!("CARGO_PKG_VERSION").into(),
                propagator: propagator.name().into(),
                time_unit: tau,
                dt: opts.dt.map_or(f64::NAN, |d| d / tau),
                n_intervals: 0,
                hilbert_dims: system.dims(),
                seeds: (0..cfg.n_trajectories).map(|k| mcwf::trajectory_seed(cfg.master_seed, k)).collect(),
                jump_count: 0,
                oracle_basis_dim: None,
                started_unix,
                wall_clock_seconds: clock.elapsed().as_secs_f64(),
                flags,
                files: vec!["manifest.json".into()],
            };
            fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
            return Err(e);
        }
    };
    flags.max_jump_probability = pool_trajs.iter().map(|t| t.max_jump_probability).fold(0.0, f64::max);
    let ensemble = mcwf::average_ensemble(system.observable_labels(), dt, pool_trajs[..cfg.n_trajectories].to_vec())?;
    let mut files = vec!["ensemble.csv".to_string(), "jumps.csv".to_string()];
    write_ensemble_csv(&dir.join("ensemble.csv"), &ensemble, tau)?;
    write_jumps_csv(&dir.join("jumps.csv"), &ensemble.trajectories, tau)?;

    let oracle_result = if cfg.oracle || cfg.sweep.is_some() {
        let scenario = cfg.scenario()?;
        let osys = scenario.realize(&cfg.fock_representation(&scenario))?;
        let tol = Tolerances::new(cfg.rtol.min(1e-10), cfg.atol.min(1e-12));
        let r = oracle::solve(&osys, &ensemble.times, tol, cfg.oracle_reduce)?;
        info!("oracle: {} of {} basis states retained", r.basis_dim, r.full_dim);
        for f in &r.leakage {
            let label = osys.dof_labels[f.dof].clone();
            warn!("truncation leakage on `{label}`: top-level population {:.2e} at t = {:.3} τ", f.population, f.time / tau);
            flags.truncation_leakage.push(LeakageReport { dof: label, time: f.time / tau, population: f.population });
        }
        write_oracle_csv(&dir.join("oracle.csv"), &r, tau)?;
        files.push("oracle.csv".into());
        Some(r)
    } else {
        None
    };

    let sweep = match (&cfg.sweep, &oracle_result) {
        (Some(counts), Some(reference)) => {
            let rows = sweep_rows(&pool_trajs, reference, counts)?;
            let mut header = vec!["n_trajectories".to_string()];
            header.extend(ensemble.labels.iter().map(|l| format!("mse_trajectories_{l}")));
            header.extend(ensemble.labels.iter().map(|l| format!("mse_mean_{l}")));
            write_table(
                &dir.join("mse_sweep.csv"),
                &header,
                rows.iter().map(|r| {
                    let mut v = vec![r.n_trajectories as f64];
                    v.extend(&r.mse_trajectories);
                    v.extend(&r.mse_mean);
                    v
                }),
            )?;
            files.push("mse_sweep.csv".into());
            Some(rows)
        }
        _ => None,
    };

    files.push("manifest.json".into());
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        propagator: propagator.name().into(),
        time_unit: tau,
        dt: dt / tau,
        n_intervals: ensemble.times.len() - 1,
        hilbert_dims: system.dims(),
        seeds: ensemble.trajectories.iter().map(|t| t.seed).collect(),
        jump_count: ensemble.jump_count(),
        oracle_basis_dim: oracle_result.as_ref().map(|o| o.basis_dim),
        started_unix,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        flags,
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunOutcome { output_dir: dir, ensemble, oracle: oracle_result, sweep, manifest })
}
