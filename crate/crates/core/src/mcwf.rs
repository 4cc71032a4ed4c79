//! Monte Carlo wavefunction (quantum-jump) trajectories.
//!
//! Each interval `[t, t + Δt]` draws `ε ∈ (0, 1)` and compares it with the
//! total jump probability `δp = Δt Σ_j ⟨ψ(t)|L_j†L_j|ψ(t)⟩` of the normalized
//! state. Without a jump the state is propagated under `H_eff` and
//! renormalized; with a jump it becomes `L_j ψ(t)` (normalized), the channel
//! drawn in proportion to `δp_j`. Every trajectory owns a ChaCha stream
//! seeded from the master seed and its index, so ensembles are reproducible
//! regardless of thread scheduling.

use log::warn;
use nalgebra::DMatrix;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::exact::{apply_sop, propagate_with, StateVector};
use crate::mctdh::{apply_one_body_jump, Gauge, MctdhPropagator, MctdhState, DEFAULT_REGULARIZATION};
use crate::model::{JumpChannel, System};
use crate::ode::{Dopri5, Tolerances};
use crate::operator::{Scratch, SumOfProducts};
use crate::{Error, Result, C64};

/// How the jumping channel is picked once a jump occurs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelSelection {
    /// Second uniform draw, channel `j` with probability `δp_j / δp`.
    Weighted,
    /// Smallest `δp_j` exceeding the same `ε` that triggered the jump,
    /// otherwise the largest `δp_j`.
    Threshold,
}

/// How the state is rescaled after a no-jump interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoJumpScaling {
    /// Divide by the actual norm of the propagated state.
    ActualNorm,
    /// Divide by `√(1 − δp)`, the first-order norm estimate.
    FirstOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Propagator {
    Exact,
    /// MCTDH with the given number of SPFs per DOF.
    Mctdh { spfs: Vec<usize>, regularization: f64, gauge: Gauge },
}

impl Propagator {
    pub fn exact() -> Self {
        Propagator::Exact
    }

    pub fn mctdh(spfs: Vec<usize>) -> Self {
        Propagator::Mctdh { spfs, regularization: DEFAULT_REGULARIZATION, gauge: Gauge::OneBody }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Propagator::Exact => "exact",
            Propagator::Mctdh { .. } => "mctdh",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    /// Interval length; `None` picks one from [`estimate_dt`].
    pub dt: Option<f64>,
    pub t_final: f64,
    pub tol: Tolerances,
    pub selection: ChannelSelection,
    pub scaling: NoJumpScaling,
    /// Target bound on `δp` used when choosing `Δt` automatically.
    pub max_jump_probability: f64,
}

impl EngineOptions {
    pub fn new(dt: f64, t_final: f64) -> Self {
        EngineOptions { dt: Some(dt), ..Self::auto(t_final) }
    }

    pub fn auto(t_final: f64) -> Self {
        EngineOptions {
            dt: None,
            t_final,
            tol: Tolerances::default(),
            selection: ChannelSelection::Weighted,
            scaling: NoJumpScaling::ActualNorm,
            max_jump_probability: 0.01,
        }
    }

    /// The literal first-order scheme: threshold channel choice and
    /// `√(1 − δp)` rescaling.
    pub fn literal(mut self) -> Self {
        self.selection = ChannelSelection::Threshold;
        self.scaling = NoJumpScaling::FirstOrder;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpRecord {
    /// End of the interval in which the jump happened.
    pub time: f64,
    pub channel: usize,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub index: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    /// `times.len() × n_observables`.
    pub observables: DMatrix<f64>,
    pub jumps: Vec<JumpRecord>,
    /// Largest `δp` met along the trajectory.
    pub max_jump_probability: f64,
    /// Largest `|‖ψ̃‖² − (1 − δp)|` over no-jump intervals.
    pub max_norm_defect: f64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub dt: f64,
    pub mean: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    pub n_trajectories: usize,
    pub trajectories: Vec<TrajectoryResult>,
}

impl TrajectoryEnsemble {
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.mean.column(i).iter().copied().collect())
    }

    pub fn jump_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.jumps.len()).sum()
    }
}

/// SplitMix64 finalizer applied to `master + (k + 1)·golden`.
pub fn trajectory_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent streams for `ε` and for the channel choice.
pub fn trajectory_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut eps = ChaCha8Rng::seed_from_u64(seed);
    eps.set_stream(0);
    let mut choice = ChaCha8Rng::seed_from_u64(seed);
    choice.set_stream(1);
    (eps, choice)
}

/// Anything that can report expectation values.
pub trait WaveFunction {
    /// `⟨ψ|O|ψ⟩` without dividing by the norm.
    fn expectation_value(&self, op: &SumOfProducts) -> C64;
    fn norm_squared(&self) -> f64;
    /// Amplitudes in the full tensor-product basis.
    fn amplitudes(&self) -> Vec<C64>;
}

impl WaveFunction for StateVector {
    fn expectation_value(&self, op: &SumOfProducts) -> C64 {
        self.expectation(op)
    }
    fn norm_squared(&self) -> f64 {
        self.norm_sqr()
    }
    fn amplitudes(&self) -> Vec<C64> {
        self.amplitudes.clone()
    }
}

impl WaveFunction for MctdhState {
    fn expectation_value(&self, op: &SumOfProducts) -> C64 {
        self.expectation(op)
    }
    fn norm_squared(&self) -> f64 {
        self.norm_sqr()
    }
    fn amplitudes(&self) -> Vec<C64> {
        self.to_full()
    }
}

/// `δp_j = Δt ⟨L_j†L_j⟩ / ⟨ψ|ψ⟩`.
pub fn jump_probabilities<W: WaveFunction>(psi: &W, channels: &[JumpChannel], dt: f64) -> Result<Vec<f64>> {
    let norm = psi.norm_squared();
    if !(norm > 0.0) {
        return Err(Error::NumericalConsistency(format!("state norm² is {norm}")));
    }
    let mut out = Vec::with_capacity(channels.len());
    for ch in channels {
        let p = dt * psi.expectation_value(&ch.ldag_l).re / norm;
        if p < -1e-12 || !p.is_finite() {
            return Err(Error::NumericalConsistency(format!("jump probability {p} for channel `{}`", ch.label)));
        }
        out.push(p.max(0.0));
    }
    let total: f64 = out.iter().sum();
    if total > 0.1 {
        warn!("total jump probability {total:.3} per interval exceeds 0.1; reduce the interval length");
    }
    Ok(out)
}

/// Choose the jumping channel given that a jump occurs.
pub fn select_channel(dp: &[f64], eps: f64, selection: ChannelSelection, rng: &mut impl Rng) -> usize {
    assert!(!dp.is_empty(), "no channels to select from");
    match selection {
        ChannelSelection::Weighted => {
            let total: f64 = dp.iter().sum();
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            for (j, p) in dp.iter().enumerate() {
                acc += p;
                if r < acc {
                    return j;
                }
            }
            dp.iter().rposition(|&p| p > 0.0).unwrap_or(dp.len() - 1)
        }
        ChannelSelection::Threshold => {
            let above = dp
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > eps)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j);
            above.unwrap_or_else(|| {
                dp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j).unwrap()
            })
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Wave {
    Exact { v: StateVector, h: SumOfProducts, ode: Dopri5, scratch: Scratch },
    Mctdh { s: MctdhState, prop: MctdhPropagator },
}

impl Wave {
    fn new(system: &System, propagator: &Propagator, tol: Tolerances) -> Result<Self> {
        let h = system.effective_hamiltonian();
        match propagator {
            Propagator::Exact => Ok(Wave::Exact {
                v: StateVector::product(&system.initial),
                h,
                ode: Dopri5::new(tol),
                scratch: Scratch::default(),
            }),
            Propagator::Mctdh { spfs, regularization, gauge } => {
                for ch in &system.channels {
                    if ch.operator.single_dof().is_none() {
                        return Err(Error::InvalidArgument(format!(
                            "MCTDH propagation needs single-DOF jump operators; `{}` is not",
                            ch.label
                        )));
                    }
                }
                let s = crate::mctdh::initial_state(system, spfs)?;
                let mut prop = MctdhPropagator::with_gauge(&h, tol, *gauge);
                prop.regularization = *regularization;
                Ok(Wave::Mctdh { s, prop })
            }
        }
    }

    fn as_wave(&self) -> &dyn WaveFunction {
        match self {
            Wave::Exact { v, .. } => v,
            Wave::Mctdh { s, .. } => s,
        }
    }

    fn propagate(&mut self, dt: f64) -> Result<()> {
        match self {
            Wave::Exact { v, h, ode, scratch } => propagate_with(v, h, dt, ode, scratch).map(|_| ()),
            Wave::Mctdh { s, prop } => prop.step(s, dt),
        }
    }

    fn scale(&mut self, f: f64) {
        match self {
            Wave::Exact { v, .. } => v.scale(f),
            Wave::Mctdh { s, .. } => s.scale(f),
        }
    }

    fn jump(&mut self, ch: &JumpChannel) -> Result<()> {
        match self {
            Wave::Exact { v, .. } => {
                let mut out = apply_sop(&ch.operator, v)?;
                let n = out.norm_sqr();
                if !(n >= 1e-14) {
                    return Err(Error::ZeroProbabilityJump { channel: ch.label.clone(), norm: n });
                }
                out.scale(1.0 / n.sqrt());
                *v = out;
            }
            Wave::Mctdh { s, prop } => {
                *s = apply_one_body_jump(s, ch)?;
                prop.reset_step();
            }
        }
        Ok(())
    }
}

impl WaveFunction for Wave {
    fn expectation_value(&self, op: &SumOfProducts) -> C64 {
        self.as_wave().expectation_value(op)
    }
    fn norm_squared(&self) -> f64 {
        self.as_wave().norm_squared()
    }
    fn amplitudes(&self) -> Vec<C64> {
        self.as_wave().amplitudes()
    }
}

fn record(wave: &Wave, system: &System, row: usize, out: &mut DMatrix<f64>) {
    let n = wave.norm_squared();
    for (i, o) in system.observables.iter().enumerate() {
        out[(row, i)] = wave.expectation_value(&o.operator).re / n;
    }
}

fn interval_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(Error::InvalidArgument(format!("need Δt > 0 and t_final > 0, got {dt}, {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} is not a multiple of Δt = {dt}")));
    }
    Ok(n.max(1.0) as usize)
}

/// `Δt` such that the largest total jump probability along a no-jump
/// trajectory stays below `opts.max_jump_probability`, rounded so that
/// `t_final / Δt` is an integer and capped at `time_unit / 20`.
pub fn estimate_dt(system: &System, propagator: &Propagator, opts: &EngineOptions) -> Result<f64> {
    let cap = system.time_unit / 20.0;
    let probe = (opts.t_final / 200.0).min(cap);
    let n = (opts.t_final / probe).ceil() as usize;
    let probe = opts.t_final / n as f64;
    let mut wave = Wave::new(system, propagator, opts.tol)?;
    let mut max_rate = 0.0f64;
    for step in 0..=n {
        let rate: f64 = jump_probabilities(&wave, &system.channels, 1.0)?.iter().sum();
        max_rate = max_rate.max(rate);
        if step == n {
            break;
        }
        wave.propagate(probe)?;
        let norm = wave.norm_squared();
        if !(norm > 1e-300) {
            break;
        }
        wave.scale(1.0 / norm.sqrt());
    }
    let raw = if max_rate > 0.0 { opts.max_jump_probability / max_rate } else { cap };
    let dt = raw.min(cap);
    let intervals = (opts.t_final / dt).ceil().max(1.0);
    Ok(opts.t_final / intervals)
}

fn resolve_dt(system: &System, propagator: &Propagator, opts: &EngineOptions) -> Result<f64> {
    match opts.dt {
        Some(dt) => Ok(dt),
        None => estimate_dt(system, propagator, opts),
    }
}

/// One trajectory with `Δt` already resolved.
pub fn run_trajectory(
    system: &System,
    propagator: &Propagator,
    opts: &EngineOptions,
    dt: f64,
    index: usize,
    seed: u64,
) -> Result<TrajectoryResult> {
    run_trajectory_with(system, propagator, opts, dt, index, seed, |_, _| {})
}

/// [`run_trajectory`] that also hands the normalized state at every sample
/// (row index, state) to `visit`.
pub fn run_trajectory_with(
    system: &System,
    propagator: &Propagator,
    opts: &EngineOptions,
    dt: f64,
    index: usize,
    seed: u64,
    mut visit: impl FnMut(usize, &dyn WaveFunction),
) -> Result<TrajectoryResult> {
    let n = interval_count(dt, opts.t_final)?;
    let (mut eps_rng, mut choice_rng) = trajectory_rngs(seed);
    let mut wave = Wave::new(system, propagator, opts.tol)?;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let mut obs = DMatrix::zeros(n + 1, system.observables.len());
    record(&wave, system, 0, &mut obs);
    visit(0, wave.as_wave());
    let mut jumps = Vec::new();
    let mut max_dp = 0.0f64;
    let mut max_defect = 0.0f64;
    for step in 1..=n {
        let dp = jump_probabilities(&wave, &system.channels, dt)?;
        let total: f64 = dp.iter().sum();
        max_dp = max_dp.max(total);
        let eps: f64 = eps_rng.sample(Open01);
        if eps < total {
            let j = select_channel(&dp, eps, opts.selection, &mut choice_rng);
            wave.jump(&system.channels[j])?;
            jumps.push(JumpRecord { time: times[step], channel: j, label: system.channels[j].label.clone() });
        } else {
            let before = wave.norm_squared();
            wave.propagate(dt)
                .map_err(|e| match e {
                    Error::IntegrationFailure { time, reason } => {
                        Error::IntegrationFailure { time: times[step - 1] + time, reason }
                    }
                    other => other,
                })?;
            let after = wave.norm_squared();
            if !(after > 0.0) || !after.is_finite() {
                return Err(Error::NumericalConsistency(format!(
                    "trajectory {index}: norm² {after} after interval ending at t = {}",
                    times[step]
                )));
            }
            max_defect = max_defect.max((after / before - (1.0 - total)).abs());
            match opts.scaling {
                NoJumpScaling::ActualNorm => wave.scale(1.0 / after.sqrt()),
                NoJumpScaling::FirstOrder => wave.scale(1.0 / (1.0 - total).max(1e-300).sqrt()),
            }
        }
        record(&wave, system, step, &mut obs);
        visit(step, wave.as_wave());
    }
    Ok(TrajectoryResult {
        index,
        seed,
        times,
        observables: obs,
        jumps,
        max_jump_probability: max_dp,
        max_norm_defect: max_defect,
    })
}

/// Trajectories `first .. first + count` of the ensemble seeded by `master`.
pub fn run_trajectories(
    system: &System,
    propagator: &Propagator,
    opts: &EngineOptions,
    dt: f64,
    master_seed: u64,
    first: usize,
    count: usize,
) -> Result<Vec<TrajectoryResult>> {
    (first..first + count)
        .into_par_iter()
        .map(|k| run_trajectory(system, propagator, opts, dt, k, trajectory_seed(master_seed, k)))
        .collect()
}

/// Mean and standard error of each observable at each time.
pub fn average_ensemble(labels: Vec<String>, dt: f64, trajectories: Vec<TrajectoryResult>) -> Result<TrajectoryEnsemble> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot average an empty ensemble".into()))?;
    let (rows, cols) = first.observables.shape();
    let n = trajectories.len();
    let mut mean = DMatrix::zeros(rows, cols);
    for t in &trajectories {
        if t.observables.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch("trajectories have different sampling".into()));
        }
        mean += &t.observables;
    }
    mean /= n as f64;
    let mut var = DMatrix::zeros(rows, cols);
    for t in &trajectories {
        let d = &t.observables - &mean;
        var += d.component_mul(&d);
    }
    let std_error = if n > 1 {
        var.map(|v: f64| (v / (n as f64 - 1.0) / n as f64).sqrt())
    } else {
        DMatrix::zeros(rows, cols)
    };
    Ok(TrajectoryEnsemble {
        labels,
        times: first.times.clone(),
        dt,
        mean,
        std_error,
        n_trajectories: n,
        trajectories,
    })
}

/// Run `n_trajectories` trajectories in parallel and average them. Results
/// depend only on `master_seed`, not on the thread count.
pub fn run_ensemble(
    system: &System,
    propagator: &Propagator,
    opts: &EngineOptions,
    master_seed: u64,
    n_trajectories: usize,
) -> Result<TrajectoryEnsemble> {
    if n_trajectories == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    if !(opts.t_final > 0.0) {
        return Err(Error::InvalidArgument(format!("t_final must be positive, got {}", opts.t_final)));
    }
    let dt = resolve_dt(system, propagator, opts)?;
    let trajs = run_trajectories(system, propagator, opts, dt, master_seed, 0, n_trajectories)?;
    average_ensemble(system.observable_labels(), dt, trajs)
}

/// Ensemble average of `|ψ⟩⟨ψ|` (normalized states) at the given sample
/// rows, in the full tensor-product basis.
pub fn ensemble_density(
    system: &System,
    propagator: &Propagator,
    opts: &EngineOptions,
    master_seed: u64,
    n_trajectories: usize,
    rows: &[usize],
) -> Result<Vec<DMatrix<C64>>> {
    if n_trajectories == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    let dt = resolve_dt(system, propagator, opts)?;
    let n = interval_count(dt, opts.t_final)?;
    if let Some(&r) = rows.iter().find(|&&r| r > n) {
        return Err(Error::InvalidArgument(format!("sample row {r} beyond the last row {n}")));
    }
    let d: usize = system.dims().iter().product();
    let zero = || vec![DMatrix::<C64>::zeros(d, d); rows.len()];
    let sum = (0..n_trajectories)
        .into_par_iter()
        .map(|k| {
            let mut acc = zero();
            run_trajectory_with(system, propagator, opts, dt, k, trajectory_seed(master_seed, k), |row, w| {
                for (slot, _) in rows.iter().enumerate().filter(|(_, &r)| r == row) {
                    let psi = nalgebra::DVector::from_vec(w.amplitudes());
                    let nrm = psi.norm_squared();
                    acc[slot] += (&psi * psi.adjoint()) / C64::new(nrm, 0.0);
                }
            })?;
            Ok::<_, Error>(acc)
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            Ok(a)
        })?;
    let scale = C64::new(1.0 / n_trajectories as f64, 0.0);
    Ok(sum.into_iter().map(|m| m * scale).collect())
}

/// Per-time `(1/n_T) Σ_k (O_k(t) − O_ref(t))²` for observable `column`.
pub fn mse_vs_reference(trajectories: &[TrajectoryResult], column: usize, reference: &[f64]) -> Result<Vec<f64>> {
    if trajectories.is_empty() {
        return Err(Error::InvalidArgument("no trajectories".into()));
    }
    let mut out = vec![0.0; reference.len()];
    for t in trajectories {
        if t.observables.nrows() != reference.len() {
            return Err(Error::DimensionMismatch(format!(
                "trajectory has {} samples, reference {}",
                t.observables.nrows(),
                reference.len()
            )));
        }
        for (i, r) in reference.iter().enumerate() {
            out[i] += (t.observables[(i, column)] - r).powi(2);
        }
    }
    let n = trajectories.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Time-averaged squared deviation of a series from a reference, divided by
/// the squared range of the reference.
pub fn normalized_mse(series: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(series.len(), reference.len());
    let mse = series.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / series.len() as f64;
    let (lo, hi) = reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let range = (hi - lo).max(1e-300);
    mse / (range * range)
}

/// Root-mean-square deviation between two series.
pub fn rms_deviation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::*;
    use crate::model::Representation;

    fn lossy(n0: usize, kappa: f64) -> System {
        let s = lossy_cavity(&LossyCavityParams { omega_c: 1.0, kappa, n0 });
        s.realize(&Representation::fock(&[n0 + 2])).unwrap()
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|k| trajectory_seed(1, k)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_eq!(trajectory_seed(1, 3), a[3]);
        assert_ne!(trajectory_seed(2, 3), a[3]);
    }

    #[test]
    fn jump_probability_of_fock_state() {
        let sys = lossy(8, 0.016);
        let v = StateVector::product(&sys.initial);
        let dp = jump_probabilities(&v, &sys.channels, 0.05).unwrap();
        assert!((dp[0] - 0.05 * 0.016 * 8.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_selection_frequencies() {
        let dp = [0.002, 0.001];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| select_channel(&dp, 0.0, ChannelSelection::Weighted, &mut rng) == 0).count();
        let f = hits as f64 / n as f64;
        assert!((f - 2.0 / 3.0).abs() < 0.002, "{f}");
    }

    #[test]
    fn threshold_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dp = [0.003, 0.001, 0.002];
        assert_eq!(select_channel(&dp, 0.0015, ChannelSelection::Threshold, &mut rng), 2);
        assert_eq!(select_channel(&dp, 0.0025, ChannelSelection::Threshold, &mut rng), 0);
        assert_eq!(select_channel(&dp, 0.0045, ChannelSelection::Threshold, &mut rng), 0);
    }

    #[test]
    fn no_channels_means_no_jumps() {
        let sys = lossy(3, 0.2).without_channels();
        let e = run_ensemble(&sys, &Propagator::exact(), &EngineOptions::new(0.1, 5.0), 4, 8).unwrap();
        assert_eq!(e.jump_count(), 0);
        for v in e.mean.column(0).iter() {
            assert!((v - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn photon_number_drops_by_one_per_jump() {
        let sys = lossy(4, 0.2);
        let t = run_trajectory(&sys, &Propagator::exact(), &EngineOptions::new(0.02, 20.0), 0.02, 0, 99).unwrap();
        let mut n = 4.0;
        let mut jumps = t.jumps.iter().peekable();
        for (i, time) in t.times.iter().enumerate() {
            while jumps.peek().is_some_and(|j| (j.time - time).abs() < 1e-12) {
                jumps.next();
                n -= 1.0;
            }
            assert!((t.observables[(i, 0)] - n).abs() < 1e-9, "t = {time}");
        }
        assert!(!t.jumps.is_empty());
    }

    #[test]
    fn ensembles_reproducible() {
        let sys = lossy(3, 0.1);
        let opts = EngineOptions::new(0.05, 4.0);
        let a = run_ensemble(&sys, &Propagator::exact(), &opts, 5, 6).unwrap();
        let b = run_ensemble(&sys, &Propagator::exact(), &opts, 5, 6).unwrap();
        assert_eq!(a.mean, b.mean);
        let c = run_ensemble(&sys, &Propagator::exact(), &opts, 6, 6).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn auto_dt_bounds_jump_probability() {
        let sys = lossy(8, 0.016);
        let opts = EngineOptions::auto(20.0);
        let dt = estimate_dt(&sys, &Propagator::exact(), &opts).unwrap();
        assert!(dt * 0.016 * 8.0 <= 0.01 + 1e-12);
        assert!((20.0 / dt - (20.0 / dt).round()).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_multiple_final_time() {
        let sys = lossy(2, 0.1);
        let r = run_ensemble(&sys, &Propagator::exact(), &EngineOptions::new(0.3, 1.0), 1, 2);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mse_matches_hand_computation() {
        let mk = |v: f64| TrajectoryResult {
            index: 0,
            seed: 0,
            times: vec![0.0],
            observables: DMatrix::from_element(1, 1, v),
            jumps: vec![],
            max_jump_probability: 0.0,
            max_norm_defect: 0.0,
        };
        let mse = mse_vs_reference(&[mk(1.0), mk(3.0)], 0, &[2.0]).unwrap();
        assert_eq!(mse, vec![1.0]);
    }
}
