//! Cavity-QED scenarios: lossy cavity, vacuum Rabi oscillations,
//! Jaynes–Cummings revivals, independent oscillators sharing a cavity, and a
//! ring of coupled oscillators in a cavity. All Hamiltonians are in the
//! rotating-wave form; the cavity is always the last DOF.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{ChannelSpec, Dof, InitialDof, LocalOp, ObservableSpec, Scenario, SymbolicOperator};
use crate::{c64, Error, Result};

use LocalOp::*;

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn number_obs(label: &str, dof: usize) -> ObservableSpec {
    ObservableSpec { label: label.into(), operator: SymbolicOperator::single(1.0, dof, Number) }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossyCavityParams {
    pub omega_c: f64,
    pub kappa: f64,
    pub n0: usize,
}

impl Default for LossyCavityParams {
    fn default() -> Self {
        LossyCavityParams { omega_c: 1.0, kappa: 0.016, n0: 8 }
    }
}

/// Single cavity mode `ω_c a†a` leaking through `L = √κ a`, starting in `|n0⟩`.
pub fn lossy_cavity(p: &LossyCavityParams) -> Scenario {
    Scenario {
        name: "lossy_cavity".into(),
        dofs: vec![Dof::oscillator("a", p.omega_c)],
        hamiltonian: SymbolicOperator::single(p.omega_c, 0, Number),
        channels: vec![ChannelSpec::decay("kappa", p.kappa, 0, Annihilate)],
        initial: vec![InitialDof::Fock(p.n0)],
        observables: vec![number_obs("n_a", 0)],
        parameters: params(&[("omega_c", p.omega_c), ("kappa", p.kappa), ("n0", p.n0 as f64)]),
        time_unit: 2.0 * PI / p.omega_c,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiParams {
    pub omega_c: f64,
    pub omega_0: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl Default for RabiParams {
    fn default() -> Self {
        RabiParams { omega_c: 1.0, omega_0: 1.0, g: 0.13, kappa: 0.026, gamma: 0.013 }
    }
}

/// Oscillator `b` (DOF 0) bilinearly coupled to cavity `a` (DOF 1), starting
/// in `|1⟩_b|0⟩_a`.
pub fn rabi(p: &RabiParams) -> Scenario {
    let h = SymbolicOperator::new()
        .term(p.omega_c, &[(1, Number)])
        .term(p.omega_0, &[(0, Number)])
        .term(p.g, &[(0, Create), (1, Annihilate)])
        .term(p.g, &[(0, Annihilate), (1, Create)]);
    Scenario {
        name: "rabi".into(),
        dofs: vec![Dof::oscillator("b", p.omega_0), Dof::oscillator("a", p.omega_c)],
        hamiltonian: h,
        channels: vec![
            ChannelSpec::decay("kappa", p.kappa, 1, Annihilate),
            ChannelSpec::decay("gamma", p.gamma, 0, Annihilate),
        ],
        initial: vec![InitialDof::Fock(1), InitialDof::Fock(0)],
        observables: vec![number_obs("n_b", 0), number_obs("n_a", 1)],
        parameters: params(&[
            ("omega_c", p.omega_c),
            ("omega_0", p.omega_0),
            ("g", p.g),
            ("kappa", p.kappa),
            ("gamma", p.gamma),
        ]),
        time_unit: 2.0 * PI / p.omega_0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JaynesCummingsParams {
    pub omega_0: f64,
    pub omega_c: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Real coherent amplitude; the mean photon number is `α²`.
    pub alpha: f64,
}

impl Default for JaynesCummingsParams {
    fn default() -> Self {
        JaynesCummingsParams { omega_0: 1.0, omega_c: 1.0, g: 0.13, kappa: 3.5e-3, gamma: 3.5e-3, alpha: 5f64.sqrt() }
    }
}

/// Qubit (DOF 0) in a cavity (DOF 1) prepared in `|e⟩|α⟩`. Records the
/// inversion `W = σ+σ- − σ-σ+` and the photon number.
pub fn jaynes_cummings(p: &JaynesCummingsParams) -> Scenario {
    let h = SymbolicOperator::new()
        .term(0.5 * p.omega_0, &[(0, SigmaZ)])
        .term(p.omega_c, &[(1, Number)])
        .term(p.g, &[(0, SigmaPlus), (1, Annihilate)])
        .term(p.g, &[(0, SigmaMinus), (1, Create)]);
    // σ+σ- − σ-σ+ is σz in the ground/excited ordering.
    let w = SymbolicOperator::single(1.0, 0, SigmaZ);
    Scenario {
        name: "jaynes_cummings".into(),
        dofs: vec![Dof::spin("sigma", p.omega_0), Dof::oscillator("a", p.omega_c)],
        hamiltonian: h,
        channels: vec![
            ChannelSpec::decay("kappa", p.kappa, 1, Annihilate),
            ChannelSpec::decay("gamma", p.gamma, 0, SigmaMinus),
        ],
        initial: vec![InitialDof::SpinExcited, InitialDof::Coherent(c64(p.alpha, 0.0))],
        observables: vec![ObservableSpec { label: "W".into(), operator: w }, number_obs("n_a", 1)],
        parameters: params(&[
            ("omega_0", p.omega_0),
            ("omega_c", p.omega_c),
            ("g", p.g),
            ("kappa", p.kappa),
            ("gamma", p.gamma),
            ("alpha", p.alpha),
        ]),
        time_unit: 2.0 * PI / p.omega_0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorArrayParams {
    pub n_sites: usize,
    pub omega_c: f64,
    pub omega_0: f64,
    pub g: f64,
    /// Nearest-neighbour coupling; ignored by [`n_oscillators`].
    pub lambda: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Occupations `ν_1 … ν_N, n` (cavity last).
    pub initial: Vec<usize>,
}

impl OscillatorArrayParams {
    /// Independent-oscillator defaults: `|1,1,0,0,n=0⟩`.
    pub fn independent() -> Self {
        OscillatorArrayParams {
            n_sites: 4,
            omega_c: 1.0,
            omega_0: 1.0,
            g: 0.13,
            lambda: 0.0,
            kappa: 0.026,
            gamma: 0.013,
            initial: vec![1, 1, 0, 0, 0],
        }
    }

    /// Ring defaults: `λ = g/2`, `|0,0,0,0,n=2⟩`.
    pub fn ring() -> Self {
        OscillatorArrayParams { lambda: 0.065, initial: vec![0, 0, 0, 0, 2], ..Self::independent() }
    }
}

fn array_common(p: &OscillatorArrayParams, name: &str) -> Result<Scenario> {
    let n = p.n_sites;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one oscillator".into()));
    }
    if p.initial.len() != n + 1 {
        return Err(Error::InvalidArgument(format!(
            "initial occupations must list {} oscillators and the cavity, got {} entries",
            n,
            p.initial.len()
        )));
    }
    let cav = n;
    let mut h = SymbolicOperator::new().term(p.omega_c, &[(cav, Number)]);
    let mut channels = Vec::new();
    let mut dofs = Vec::new();
    let mut observables = Vec::new();
    for i in 0..n {
        h = h
            .term(p.omega_0, &[(i, Number)])
            .term(p.g, &[(i, Create), (cav, Annihilate)])
            .term(p.g, &[(i, Annihilate), (cav, Create)]);
        channels.push(ChannelSpec::decay(&format!("gamma_b{}", i + 1), p.gamma, i, Annihilate));
        dofs.push(Dof::oscillator(&format!("b{}", i + 1), p.omega_0));
        observables.push(number_obs(&format!("n_b{}", i + 1), i));
    }
    channels.push(ChannelSpec::decay("kappa", p.kappa, cav, Annihilate));
    dofs.push(Dof::oscillator("a", p.omega_c));
    observables.push(number_obs("n_a", cav));
    Ok(Scenario {
        name: name.into(),
        dofs,
        hamiltonian: h,
        channels,
        initial: p.initial.iter().map(|&k| InitialDof::Fock(k)).collect(),
        observables,
        parameters: params(&[
            ("n_sites", n as f64),
            ("omega_c", p.omega_c),
            ("omega_0", p.omega_0),
            ("g", p.g),
            ("lambda", p.lambda),
            ("kappa", p.kappa),
            ("gamma", p.gamma),
        ]),
        time_unit: 2.0 * PI / p.omega_0,
    })
}

/// `N` uncoupled oscillators sharing one lossy cavity. Besides occupations
/// it records the cavity two-photon population `P2`.
pub fn n_oscillators(p: &OscillatorArrayParams) -> Result<Scenario> {
    let mut s = array_common(p, "n_oscillators")?;
    s.parameters.remove("lambda");
    s.observables.push(ObservableSpec {
        label: "P2_a".into(),
        operator: SymbolicOperator::single(1.0, p.n_sites, FockProjector(2)),
    });
    Ok(s)
}

/// Periodic ring of `N ≥ 2` oscillators with nearest-neighbour coupling `λ`,
/// including the closing `b_1 ↔ b_N` bond, inside a common cavity.
pub fn ring_array(p: &OscillatorArrayParams) -> Result<Scenario> {
    if p.n_sites < 2 {
        return Err(Error::InvalidArgument(format!("ring needs N >= 2 sites, got {}", p.n_sites)));
    }
    let mut s = array_common(p, "ring_array")?;
    let n = p.n_sites;
    let mut h = s.hamiltonian;
    for i in 0..n - 1 {
        h = h.term(p.lambda, &[(i, Create), (i + 1, Annihilate)]).term(p.lambda, &[(i, Annihilate), (i + 1, Create)]);
    }
    h = h.term(p.lambda, &[(0, Create), (n - 1, Annihilate)]).term(p.lambda, &[(0, Annihilate), (n - 1, Create)]);
    s.hamiltonian = h;
    Ok(s)
}
