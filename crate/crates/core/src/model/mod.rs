//! Scenario descriptions and their realization as matrices.
//!
//! A [`Scenario`] is written symbolically in terms of ladder, number and
//! Pauli operators. [`Scenario::realize`] turns it into a [`System`] of
//! sum-of-products operators in a chosen [`Representation`]: a truncated
//! Fock basis per DOF (for the exact propagator and the density-matrix
//! oracle) or harmonic-oscillator DVR grids (for MCTDH).

pub mod presets;

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dvr::{self, DvrGrid, GridKind};
use crate::operator::{OneBodyOperator, SumOfProducts};
use crate::{c64, Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum DofKind {
    Oscillator { frequency: f64 },
    Spin { splitting: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dof {
    pub label: String,
    pub kind: DofKind,
}

impl Dof {
    pub fn oscillator(label: &str, frequency: f64) -> Self {
        Dof { label: label.into(), kind: DofKind::Oscillator { frequency } }
    }

    pub fn spin(label: &str, splitting: f64) -> Self {
        Dof { label: label.into(), kind: DofKind::Spin { splitting } }
    }

    pub fn is_spin(&self) -> bool {
        matches!(self.kind, DofKind::Spin { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocalOp {
    Annihilate,
    Create,
    Number,
    /// `|m⟩⟨m|` in the oscillator eigenbasis.
    FockProjector(usize),
    SigmaZ,
    SigmaPlus,
    SigmaMinus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicTerm {
    pub coeff: C64,
    pub factors: Vec<(usize, LocalOp)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymbolicOperator {
    pub terms: Vec<SymbolicTerm>,
}

impl SymbolicOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, coeff: f64, factors: &[(usize, LocalOp)]) -> Self {
        self.terms.push(SymbolicTerm { coeff: c64(coeff, 0.0), factors: factors.to_vec() });
        self
    }

    pub fn cterm(mut self, coeff: C64, factors: &[(usize, LocalOp)]) -> Self {
        self.terms.push(SymbolicTerm { coeff, factors: factors.to_vec() });
        self
    }

    pub fn single(coeff: f64, dof: usize, op: LocalOp) -> Self {
        Self::new().term(coeff, &[(dof, op)])
    }
}

/// Dissipation channel `L = √rate · op`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    pub label: String,
    pub rate: f64,
    pub operator: SymbolicOperator,
}

impl ChannelSpec {
    pub fn decay(label: &str, rate: f64, dof: usize, op: LocalOp) -> Self {
        ChannelSpec { label: label.into(), rate, operator: SymbolicOperator::single(rate.sqrt(), dof, op) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialDof {
    Fock(usize),
    Coherent(C64),
    SpinExcited,
    SpinGround,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSpec {
    pub label: String,
    pub operator: SymbolicOperator,
}

/// Symbolic open-system model: Hamiltonian, channels, product initial state
/// and the observables to record.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dofs: Vec<Dof>,
    pub hamiltonian: SymbolicOperator,
    pub channels: Vec<ChannelSpec>,
    pub initial: Vec<InitialDof>,
    pub observables: Vec<ObservableSpec>,
    pub parameters: BTreeMap<String, f64>,
    /// One oscillation period `2π/ω` of the reference frequency.
    pub time_unit: f64,
}

/// Primitive basis of one DOF.
#[derive(Clone, Debug)]
pub enum DofBasis {
    /// Truncated number basis `|0⟩ … |dim-1⟩` (for spins: ground, excited).
    Fock(usize),
    Grid(Arc<DvrGrid>),
}

impl DofBasis {
    pub fn dim(&self) -> usize {
        match self {
            DofBasis::Fock(d) => *d,
            DofBasis::Grid(g) => g.n_points,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Representation {
    pub bases: Vec<DofBasis>,
}

impl Representation {
    pub fn fock(dims: &[usize]) -> Self {
        Representation { bases: dims.iter().map(|&d| DofBasis::Fock(d)).collect() }
    }

    /// Oscillator truncation `ν_max` for every oscillator but the last
    /// oscillator DOF, which is treated as the cavity with `n_max`. Spins get
    /// two levels.
    pub fn fock_truncated(scenario: &Scenario, nu_max: usize, n_max: usize) -> Self {
        let last_osc = scenario.dofs.iter().rposition(|d| !d.is_spin());
        let dims = scenario
            .dofs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if d.is_spin() {
                    2
                } else if Some(k) == last_osc {
                    n_max + 1
                } else {
                    nu_max + 1
                }
            })
            .collect::<Vec<_>>();
        Self::fock(&dims)
    }

    /// HO-DVR grids of `n_points` matched to each oscillator's frequency.
    pub fn grids(scenario: &Scenario, n_points: usize) -> Result<Self> {
        let mut bases = Vec::new();
        for (k, d) in scenario.dofs.iter().enumerate() {
            let grid = match d.kind {
                DofKind::Oscillator { frequency } => dvr::build_ho_dvr(n_points, frequency)?,
                DofKind::Spin { splitting } => dvr::spin_grid(splitting, k)?.0,
            };
            bases.push(DofBasis::Grid(Arc::new(grid)));
        }
        Ok(Representation { bases })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.dim()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub label: String,
    pub rate: f64,
    /// `L` with the rate folded in.
    pub operator: SumOfProducts,
    /// `L†L`.
    pub ldag_l: SumOfProducts,
}

#[derive(Clone, Debug)]
pub struct Observable {
    pub label: String,
    pub operator: SumOfProducts,
}

/// A scenario realized in a concrete representation.
#[derive(Clone, Debug)]
pub struct System {
    pub name: String,
    pub dof_labels: Vec<String>,
    pub representation: Representation,
    pub hamiltonian: SumOfProducts,
    pub channels: Vec<JumpChannel>,
    /// Initial single-DOF vectors; the initial state is their product.
    pub initial: Vec<Vec<C64>>,
    pub observables: Vec<Observable>,
    pub time_unit: f64,
}

impl System {
    pub fn dims(&self) -> Vec<usize> {
        self.representation.dims()
    }

    /// `H_S - (i/2) Σ_j L_j† L_j`.
    pub fn effective_hamiltonian(&self) -> SumOfProducts {
        effective_hamiltonian(&self.hamiltonian, &self.channels)
    }

    pub fn observable_labels(&self) -> Vec<String> {
        self.observables.iter().map(|o| o.label.clone()).collect()
    }

    /// Full product initial state vector.
    pub fn initial_vector(&self) -> Vec<C64> {
        let mut v = vec![c64(1.0, 0.0)];
        for f in &self.initial {
            let mut next = Vec::with_capacity(v.len() * f.len());
            for a in &v {
                for b in f {
                    next.push(a * b);
                }
            }
            v = next;
        }
        v
    }

    /// The same system with no dissipation channels.
    pub fn without_channels(&self) -> System {
        System { channels: Vec::new(), ..self.clone() }
    }
}

pub fn effective_hamiltonian(h: &SumOfProducts, channels: &[JumpChannel]) -> SumOfProducts {
    let mut heff = h.clone();
    for ch in channels {
        heff = heff.plus(&ch.ldag_l.scaled(c64(0.0, -0.5))).expect("channel dims match");
    }
    heff.simplified()
}

struct Realizer<'a> {
    scenario: &'a Scenario,
    rep: &'a Representation,
    cache: HashMap<(usize, LocalOp), OneBodyOperator>,
}

impl<'a> Realizer<'a> {
    fn local(&mut self, dof: usize, op: LocalOp) -> Result<OneBodyOperator> {
        if let Some(m) = self.cache.get(&(dof, op)) {
            return Ok(m.clone());
        }
        let m = self.build_local(dof, op)?;
        self.cache.insert((dof, op), m.clone());
        Ok(m)
    }

    fn build_local(&mut self, dof: usize, op: LocalOp) -> Result<OneBodyOperator> {
        let spec = self
            .scenario
            .dofs
            .get(dof)
            .ok_or_else(|| Error::InvalidArgument(format!("operator on DOF {dof} outside the scenario")))?;
        let basis = &self.rep.bases[dof];
        let bad = || {
            Error::InvalidArgument(format!("operator {op:?} is not defined for DOF `{}`", spec.label))
        };
        if spec.is_spin() {
            if basis.dim() != 2 {
                return Err(Error::DimensionMismatch(format!("spin DOF `{}` needs a 2-level basis", spec.label)));
            }
            let s = dvr::spin_operators(dof);
            return match op {
                LocalOp::SigmaZ => Ok(s.sigma_z),
                LocalOp::SigmaPlus => Ok(s.sigma_plus),
                LocalOp::SigmaMinus => Ok(s.sigma_minus),
                _ => Err(bad()),
            };
        }
        match basis {
            DofBasis::Fock(d) => {
                let d = *d;
                let mut a = DMatrix::<C64>::zeros(d, d);
                for n in 1..d {
                    a[(n - 1, n)] = c64((n as f64).sqrt(), 0.0);
                }
                match op {
                    LocalOp::Annihilate => Ok(OneBodyOperator::new(dof, "a", a)),
                    LocalOp::Create => Ok(OneBodyOperator::new(dof, "a†", a.adjoint())),
                    LocalOp::Number => Ok(OneBodyOperator::new(
                        dof,
                        "n",
                        DMatrix::from_fn(d, d, |i, j| if i == j { c64(i as f64, 0.0) } else { c64(0.0, 0.0) }),
                    )),
                    LocalOp::FockProjector(m) if m < d => {
                        let mut p = DMatrix::zeros(d, d);
                        p[(m, m)] = c64(1.0, 0.0);
                        Ok(OneBodyOperator::new(dof, format!("P{m}"), p))
                    }
                    LocalOp::FockProjector(m) => {
                        Err(Error::DimensionMismatch(format!("projector |{m}⟩⟨{m}| outside truncation {d}")))
                    }
                    _ => Err(bad()),
                }
            }
            DofBasis::Grid(g) => {
                if g.kind != GridKind::HarmonicOscillator {
                    return Err(bad());
                }
                match op {
                    LocalOp::Annihilate => Ok(dvr::ladder_operators(g, dof)?.0),
                    LocalOp::Create => Ok(dvr::ladder_operators(g, dof)?.1),
                    LocalOp::Number => dvr::number_operator(g, dof),
                    LocalOp::FockProjector(m) if m < g.n_points => {
                        let v = g.eigenfunction(m);
                        let p = DMatrix::from_fn(g.n_points, g.n_points, |i, j| v[i] * v[j].conj());
                        Ok(OneBodyOperator::new(dof, format!("P{m}"), p))
                    }
                    LocalOp::FockProjector(m) => {
                        Err(Error::DimensionMismatch(format!("projector |{m}⟩⟨{m}| outside grid")))
                    }
                    _ => Err(bad()),
                }
            }
        }
    }

    fn operator(&mut self, sym: &SymbolicOperator) -> Result<SumOfProducts> {
        let dims = self.rep.dims();
        let mut out = SumOfProducts::zero(&dims);
        for t in &sym.terms {
            let factors = t
                .factors
                .iter()
                .map(|&(dof, op)| self.local(dof, op))
                .collect::<Result<Vec<_>>>()?;
            out.add_term(t.coeff, factors)?;
        }
        Ok(out.simplified())
    }

    fn initial(&self, dof: usize, init: InitialDof) -> Result<Vec<C64>> {
        let basis = &self.rep.bases[dof];
        let d = basis.dim();
        let unit = |k: usize| {
            let mut v = vec![c64(0.0, 0.0); d];
            v[k] = c64(1.0, 0.0);
            v
        };
        let is_spin = self.scenario.dofs[dof].is_spin();
        match (init, basis) {
            (InitialDof::SpinExcited, _) if is_spin => Ok(unit(1)),
            (InitialDof::SpinGround, _) if is_spin => Ok(unit(0)),
            (InitialDof::SpinExcited | InitialDof::SpinGround, _) => Err(Error::InvalidArgument(format!(
                "spin initial state on oscillator DOF `{}`",
                self.scenario.dofs[dof].label
            ))),
            (_, _) if is_spin => Err(Error::InvalidArgument(format!(
                "oscillator initial state on spin DOF `{}`",
                self.scenario.dofs[dof].label
            ))),
            (InitialDof::Fock(n), DofBasis::Fock(_)) => {
                if n >= d {
                    return Err(Error::DimensionMismatch(format!("Fock |{n}⟩ outside truncation {d}")));
                }
                Ok(unit(n))
            }
            (InitialDof::Fock(n), DofBasis::Grid(g)) => dvr::fock_state(g, n),
            (InitialDof::Coherent(alpha), DofBasis::Fock(_)) => {
                // Poisson amplitudes, truncated and renormalized.
                let mut v = Vec::with_capacity(d);
                let mut amp = c64((-0.5 * alpha.norm_sqr()).exp(), 0.0);
                for n in 0..d {
                    if n > 0 {
                        amp = amp * alpha / (n as f64).sqrt();
                    }
                    v.push(amp);
                }
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                Ok(v.into_iter().map(|z| z / norm).collect())
            }
            (InitialDof::Coherent(alpha), DofBasis::Grid(g)) => dvr::coherent_state(g, alpha),
        }
    }
}

impl Scenario {
    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    /// Realize all operators and the initial state in `rep`.
    pub fn realize(&self, rep: &Representation) -> Result<System> {
        if rep.bases.len() != self.dofs.len() {
            return Err(Error::DimensionMismatch(format!(
                "representation has {} DOFs, scenario `{}` has {}",
                rep.bases.len(),
                self.name,
                self.dofs.len()
            )));
        }
        if self.initial.len() != self.dofs.len() {
            return Err(Error::InvalidArgument(format!(
                "initial state of `{}` covers {} of {} DOFs",
                self.name,
                self.initial.len(),
                self.dofs.len()
            )));
        }
        let mut r = Realizer { scenario: self, rep, cache: HashMap::new() };
        let hamiltonian = r.operator(&self.hamiltonian)?;
        let mut channels = Vec::new();
        for ch in &self.channels {
            let operator = r.operator(&ch.operator)?;
            let ldag_l = operator.adjoint().compose(&operator)?;
            channels.push(JumpChannel { label: ch.label.clone(), rate: ch.rate, operator, ldag_l });
        }
        let observables = self
            .observables
            .iter()
            .map(|o| Ok(Observable { label: o.label.clone(), operator: r.operator(&o.operator)? }))
            .collect::<Result<Vec<_>>>()?;
        let initial = self
            .initial
            .iter()
            .enumerate()
            .map(|(k, &init)| r.initial(k, init))
            .collect::<Result<Vec<_>>>()?;
        Ok(System {
            name: self.name.clone(),
            dof_labels: self.dofs.iter().map(|d| d.label.clone()).collect(),
            representation: rep.clone(),
            hamiltonian,
            channels,
            initial,
            observables,
            time_unit: self.time_unit,
        })
    }
}
