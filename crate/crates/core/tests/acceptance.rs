//! End-to-end acceptance run over all scenarios. Prints one PASS/FAIL line
//! per criterion and exits nonzero if any fails.
//!
//! `cargo test --release --test acceptance -- [criterion numbers]`

use std::process::ExitCode;
use std::time::Instant;

use mcmctdh::mcwf::{self, EngineOptions, Propagator, TrajectoryEnsemble};
use mcmctdh::model::presets::*;
use mcmctdh::model::{Representation, Scenario, System};
use mcmctdh::ode::Tolerances;
use mcmctdh::oracle::{self, DensityMatrix, OracleResult};
use mcmctdh::Result;

const SEED: u64 = 1;

fn oracle_tol() -> Tolerances {
    Tolerances::new(1e-10, 1e-12)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn oracle_for(scenario: &Scenario, nu_max: usize, n_max: usize, times: &[f64]) -> Result<OracleResult> {
    let fock = scenario.realize(&Representation::fock_truncated(scenario, nu_max, n_max))?;
    oracle::solve(&fock, times, oracle_tol(), true)
}

/// Indices of samples with `t ≤ limit`.
fn upto(times: &[f64], limit: f64) -> usize {
    times.iter().take_while(|&&t| t <= limit * (1.0 + 1e-12)).count()
}

fn lossy_scenario() -> Scenario {
    lossy_cavity(&LossyCavityParams { omega_c: 1.0, kappa: 0.016, n0: 8 })
}

fn lossy_ensemble(n: usize) -> Result<(System, TrajectoryEnsemble)> {
    let s = lossy_scenario();
    let sys = s.realize(&Representation::fock(&[10]))?;
    let ens = mcwf::run_ensemble(&sys, &Propagator::exact(), &EngineOptions::auto(60.0 * s.time_unit), SEED, n)?;
    Ok((sys, ens))
}

fn analytic_decay(times: &[f64]) -> Vec<f64> {
    times.iter().map(|t| 8.0 * (-0.016 * t).exp()).collect()
}

fn criterion_1() -> Result<Verdict> {
    let (_, ens) = lossy_ensemble(400)?;
    let reference = analytic_decay(&ens.times);
    let per_time = mcwf::mse_vs_reference(&ens.trajectories, 0, &reference)?;
    let (lo, hi) = reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let nmse = per_time.iter().sum::<f64>() / per_time.len() as f64 / (hi - lo).powi(2);
    let mean_nmse = mcwf::normalized_mse(&ens.column("n_a").unwrap(), &reference);
    Ok(verdict(
        nmse <= 0.015,
        format!("time-averaged normalized MSE {:.3}% (≤ 1.5%), mean-vs-analytic {:.2e}", 100.0 * nmse, mean_nmse),
    ))
}

fn criterion_2() -> Result<Verdict> {
    let (_, ens) = lossy_ensemble(400)?;
    let mut worst_int = 0.0f64;
    let mut rises = 0;
    for t in &ens.trajectories {
        let col = t.observables.column(0);
        for (i, &v) in col.iter().enumerate() {
            worst_int = worst_int.max((v - v.round()).abs());
            if i > 0 && v > col[i - 1] + 1e-6 {
                rises += 1;
            }
        }
    }
    Ok(verdict(
        worst_int <= 1e-6 && rises == 0,
        format!("max distance from an integer {worst_int:.1e}, {rises} increases over {} trajectories", ens.n_trajectories),
    ))
}

fn criterion_3() -> Result<Verdict> {
    let s = rabi(&RabiParams::default());
    let tau = s.time_unit;
    let sys = s.realize(&Representation::fock_truncated(&s, 3, 3))?;
    let ens = mcwf::run_ensemble(&sys, &Propagator::exact(), &EngineOptions::auto(30.0 * tau), SEED, 200)?;
    let reference = oracle_for(&s, 3, 3, &ens.times)?;
    let m = upto(&ens.times, 20.0 * tau);
    let rms = mcwf::rms_deviation(&ens.column("n_b").unwrap()[..m], &reference.column("n_b").unwrap()[..m]);
    let rms_full = mcwf::rms_deviation(&ens.column("n_b").unwrap(), &reference.column("n_b").unwrap());
    Ok(verdict(rms <= 0.02, format!("RMS of n_b over t ≤ 20τ {rms:.4} (≤ 0.02); over 30τ {rms_full:.4}")))
}

/// Envelope of an oscillating series: RMS around the running mean in a
/// centered window of `half` samples on either side.
fn envelope(x: &[f64], half: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            let w = &x[lo..hi];
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt()
        })
        .collect()
}

/// `(collapse depth ratio, revival peak time)` of an envelope, searching for
/// the collapse in `[a, b]` and the revival in `[b, c]` (times in `τ`).
fn revival(times: &[f64], env: &[f64], tau: f64, a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let idx = |t: f64| upto(times, t * tau).min(times.len() - 1);
    let (ia, ib, ic) = (idx(a), idx(b), idx(c));
    let start = env[..ia].iter().cloned().fold(0.0, f64::max);
    let floor = env[ia..ib].iter().cloned().fold(f64::INFINITY, f64::min);
    let (ipk, peak) = env[ib..ic].iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    (floor / start, peak / floor, times[ib + ipk])
}

fn criterion_4() -> Result<Verdict> {
    let s = jaynes_cummings(&JaynesCummingsParams::default());
    let tau = s.time_unit;
    let grids = s.realize(&Representation::grids(&s, 41)?)?;
    let ens = mcwf::run_ensemble(&grids, &Propagator::mctdh(vec![2, 4]), &EngineOptions::auto(40.0 * tau), SEED, 400)?;
    let n_max = (5.0 + 8.0 * 5f64.sqrt()).ceil() as usize;
    let reference = oracle_for(&s, 0, n_max.max(10), &ens.times)?;
    let w = ens.column("W").unwrap();
    let w_ref = reference.column("W").unwrap();
    let rms = mcwf::rms_deviation(&w, &w_ref);
    let half = (tau / ens.dt).round() as usize;
    let (env, env_ref) = (envelope(&w, half), envelope(&w_ref, half));
    let (depth, rise, t_peak) = revival(&ens.times, &env, tau, 2.0, 10.0, 28.0);
    let (_, _, t_ref) = revival(&reference.times, &env_ref, tau, 2.0, 10.0, 28.0);
    let rel = (t_peak - t_ref).abs() / t_ref;
    let shows = depth < 0.5 && rise > 2.0;
    Ok(verdict(
        shows && rel <= 0.05 && rms <= 0.05,
        format!(
            "collapse to {:.1}% of initial envelope, revival ×{rise:.1}; peak {:.2}τ vs oracle {:.2}τ ({:.1}%, ≤ 5%); RMS of W {rms:.4} (≤ 0.05)",
            100.0 * depth,
            t_peak / tau,
            t_ref / tau,
            100.0 * rel
        ),
    ))
}

fn criterion_5() -> Result<Verdict> {
    let s = n_oscillators(&OscillatorArrayParams::independent())?;
    let tau = s.time_unit;
    let rep = Representation::fock_truncated(&s, 2, 3);
    let d: usize = rep.dims().iter().product();
    let sys = s.realize(&rep)?;
    let ens = mcwf::run_ensemble(&sys, &Propagator::exact(), &EngineOptions::auto(30.0 * tau), SEED, 200)?;
    let reference = oracle::solve(&sys, &ens.times, oracle_tol(), true)?;
    let col = |l: &str| (ens.column(l).unwrap(), reference.column(l).unwrap());
    let (b1, b1r) = col("n_b1");
    let (b3, b3r) = col("n_b3");
    let (na, nar) = col("n_a");
    let (p2, p2r) = col("P2_a");
    let rms1 = mcwf::rms_deviation(&b1, &b1r);
    let rms3 = mcwf::rms_deviation(&b3, &b3r);
    // Long-time cavity deviation: last third of the window, relative to the
    // oracle's peak occupation.
    let tail = 2 * na.len() / 3;
    let peak_a = nar.iter().cloned().fold(0.0, f64::max);
    let dev_a = mcwf::rms_deviation(&na[tail..], &nar[tail..]) / peak_a;
    let p2_err = p2.iter().zip(&p2r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ipk = p2r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let rises_then_decays = p2r[ipk] > p2r[0] + 0.01 && p2r[ipk] > *p2r.last().unwrap() + 0.01;
    let ipk_mc = p2.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let mc_shape = p2[ipk_mc] > p2[0] + 0.01 && p2[ipk_mc] > *p2.last().unwrap() + 0.01;
    Ok(verdict(
        rms1 <= 0.02 && rms3 <= 0.02 && dev_a <= 0.05 && p2_err <= 0.02 && rises_then_decays && mc_shape,
        format!(
            "d = {d}; RMS n_b1 {rms1:.4}, n_b3 {rms3:.4} (≤ 0.02); late n_a deviation {:.2}% (≤ 5%); max |ΔP2| {p2_err:.4} (≤ 0.02), P2 peak at {:.1}τ",
            100.0 * dev_a,
            ens.times[ipk_mc] / tau
        ),
    ))
}

fn ring(high: bool, n_max_cap: f64) -> Result<Verdict> {
    let mut p = OscillatorArrayParams::ring();
    if high {
        p.initial = vec![1, 1, 0, 0, 2];
    }
    let s = ring_array(&p)?;
    let tau = s.time_unit;
    let grids = s.realize(&Representation::grids(&s, 41)?)?;
    let clock = Instant::now();
    let ens = mcwf::run_ensemble(&grids, &Propagator::mctdh(vec![4; 5]), &EngineOptions::auto(20.0 * tau), SEED, 300)?;
    let traj_secs = clock.elapsed().as_secs_f64();
    let peak_rss = peak_rss_bytes();
    let (nu_max, n_max) = if high { (5, 7) } else { (3, 5) };
    let reference = oracle_for(&s, nu_max, n_max, &ens.times)?;
    let na = ens.column("n_a").unwrap();
    let nar = reference.column("n_a").unwrap();
    let rel = mcwf::rms_deviation(&na, &nar) / nar[0];
    let d = reference.full_dim;
    let mut detail = format!(
        "RMS of n_a / n_a(0) = {:.2}% (≤ {n_max_cap}%) vs oracle d = {d} ({} reachable), {:.0} s for 300 trajectories",
        100.0 * rel,
        reference.basis_dim,
        traj_secs
    );
    let mut pass = 100.0 * rel <= n_max_cap;
    if !reference.leakage.is_empty() {
        detail.push_str(&format!("; oracle truncation leakage flagged on {} DOFs", reference.leakage.len()));
    }
    if high {
        let dense = (d * d * 16) as f64;
        let state = mcmctdh::mctdh::initial_state(&grids, &[4; 5])?.memory_bytes() as f64;
        let budget = dense / 10.0;
        let used = peak_rss.unwrap_or(f64::INFINITY);
        pass &= used <= budget;
        detail.push_str(&format!(
            "; process peak RSS {:.1} MB (one MCTDH state {:.1} kB) vs dense ρ {:.0} MB / 10",
            used / 1e6,
            state / 1e3,
            dense / 1e6
        ));
    }
    Ok(verdict(pass, detail))
}

fn peak_rss_bytes() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024.0)
}

fn criterion_6() -> Result<Verdict> {
    ring(false, 1.5)
}

fn criterion_7() -> Result<Verdict> {
    ring(true, 2.0)
}

fn criterion_8() -> Result<Verdict> {
    let s = rabi(&RabiParams::default());
    let tau = s.time_unit;
    let rep = Representation::fock_truncated(&s, 3, 3);
    let sys = s.realize(&rep)?;
    let opts = EngineOptions::auto(30.0 * tau);
    let dt = mcwf::estimate_dt(&sys, &Propagator::exact(), &opts)?;
    let n = (opts.t_final / dt).round() as usize;
    let rows: Vec<usize> = (1..=20).map(|i| i * n / 20).collect();
    let avg = mcwf::ensemble_density(&sys, &Propagator::exact(), &opts, SEED, 2000, &rows)?;
    let times: Vec<f64> = std::iter::once(0.0).chain(rows.iter().map(|&r| r as f64 * dt)).collect();
    let lind = oracle::Lindbladian::for_system(&sys, false)?;
    let rho0 = lind.pure_state(&sys.initial_vector())?;
    let mut worst = 0.0f64;
    let mut err = None;
    oracle::propagate_density(&lind, &rho0, &times, oracle_tol(), |i, rho| {
        if i > 0 {
            let mc = DensityMatrix { data: avg[i - 1].clone(), ..rho.clone() };
            match oracle::trace_distance(&mc, rho) {
                Ok(td) => worst = worst.max(td),
                Err(e) => err = Some(e),
            }
        }
        Ok(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(verdict(
        worst <= 0.03,
        format!("d = {}, 2000 trajectories: max trace distance over 20 times {worst:.4} (≤ 0.03)", lind.full_dim()),
    ))
}

/// Same seeds through the exact and the complete-basis MCTDH propagators;
/// compares trajectories without jumps.
fn completeness(sys: &System, spfs: Vec<usize>, t_final: f64, wanted: usize) -> Result<(usize, f64)> {
    let mut opts = EngineOptions::auto(t_final);
    opts.tol = Tolerances::new(1e-10, 1e-12);
    let dt = mcwf::estimate_dt(sys, &Propagator::exact(), &opts)?;
    let mctdh = Propagator::mctdh(spfs);
    let mut found = 0;
    let mut worst = 0.0f64;
    for k in 0..200 {
        let seed = mcwf::trajectory_seed(SEED, k);
        let e = mcwf::run_trajectory(sys, &Propagator::exact(), &opts, dt, k, seed)?;
        if !e.jumps.is_empty() {
            continue;
        }
        let m = mcwf::run_trajectory(sys, &mctdh, &opts, dt, k, seed)?;
        worst = worst.max((&e.observables - &m.observables).amax());
        found += 1;
        if found == wanted {
            break;
        }
    }
    Ok((found, worst))
}

fn criterion_9() -> Result<Verdict> {
    let s = lossy_cavity(&LossyCavityParams { omega_c: 1.0, kappa: 0.016, n0: 2 });
    let lossy = s.realize(&Representation::grids(&s, 21)?)?;
    let (f1, e1) = completeness(&lossy, vec![21], 5.0 * s.time_unit, 3)?;
    let s = rabi(&RabiParams::default());
    let r = s.realize(&Representation::grids(&s, 11)?)?;
    let (f2, e2) = completeness(&r, vec![11, 11], 5.0 * s.time_unit, 3)?;
    Ok(verdict(
        f1 == 3 && f2 == 3 && e1 <= 1e-5 && e2 <= 1e-5,
        format!("lossy cavity ({f1} jump-free seeds) max |Δ| {e1:.1e}; Rabi ({f2} seeds) max |Δ| {e2:.1e} (≤ 1e-5)"),
    ))
}

fn criterion_10() -> Result<Verdict> {
    let sizes = [50usize, 100, 200, 400, 800];
    let (_, ens) = lossy_ensemble(800)?;
    let reference = analytic_decay(&ens.times);
    let mut mse = Vec::new();
    for &n in &sizes {
        let sub = mcwf::average_ensemble(ens.labels.clone(), ens.dt, ens.trajectories[..n].to_vec())?;
        mse.push(mcwf::normalized_mse(&sub.column("n_a").unwrap(), &reference));
    }
    let u: Vec<f64> = sizes.iter().map(|&n| 1.0 / n as f64).collect();
    let c = u.iter().zip(&mse).map(|(a, b)| a * b).sum::<f64>() / u.iter().map(|a| a * a).sum::<f64>();
    let mean = mse.iter().sum::<f64>() / mse.len() as f64;
    let ss_res: f64 = u.iter().zip(&mse).map(|(a, b)| (b - c * a).powi(2)).sum();
    let ss_tot: f64 = mse.iter().map(|b| (b - mean).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let table: Vec<String> = sizes.iter().zip(&mse).map(|(n, m)| format!("{n}:{m:.2e}")).collect();
    Ok(verdict(r2 >= 0.9, format!("MSE of the mean {}; fit c = {c:.3e}, R² = {r2:.3} (≥ 0.9)", table.join(" "))))
}

type Criterion = fn() -> Result<Verdict>;

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, Criterion); 10] = [
        (1, "exponential decay", criterion_1),
        (2, "decay staircase", criterion_2),
        (3, "vacuum Rabi", criterion_3),
        (4, "Jaynes-Cummings revivals", criterion_4),
        (5, "independent oscillators", criterion_5),
        (6, "ring array, low excitation", criterion_6),
        (7, "ring array, high excitation", criterion_7),
        (8, "density-matrix equivalence", criterion_8),
        (9, "MCTDH complete-basis limit", criterion_9),
        (10, "statistical scaling", criterion_10),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let clock = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
