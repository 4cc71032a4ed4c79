//! Dense Lindblad master-equation reference solver.
//!
//! `dρ/dt = −i (H_eff ρ − ρ H_eff†) + Σ_j L_j ρ L_j†`, which equals
//! `−i[H, ρ] + Σ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})`.
//!
//! The density matrix lives on the smallest set of product basis states that
//! contains the initial state and is closed under `H_eff` and every `L_j`
//! (found by a breadth-first search over matrix nonzeros). The dynamics never
//! leaves that set, so the reduction is exact; for excitation-conserving
//! models it shrinks the problem by orders of magnitude. Reduction can be
//! switched off to work in the full truncated space.

use std::collections::{HashMap, VecDeque};

use log::warn;
use nalgebra::DMatrix;

use crate::model::{DofBasis, System};
use crate::ode::{Dopri5, Tolerances};
use crate::operator::SumOfProducts;
use crate::{Error, Result, C64};

/// Operator columns in the full product basis, evaluated on demand.
type SparseColumns = Vec<Vec<(usize, C64)>>;

struct ColumnAction {
    dims: Vec<usize>,
    strides: Vec<usize>,
    /// `(coeff, [(dof, entries of each column)])`.
    terms: Vec<(C64, Vec<(usize, SparseColumns)>)>,
}

impl ColumnAction {
    fn new(op: &SumOfProducts) -> Self {
        let dims = op.dims().to_vec();
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let terms = op
            .terms()
            .iter()
            .map(|t| {
                let factors = t
                    .factors
                    .iter()
                    .map(|f| {
                        let mut cols = vec![Vec::new(); f.dim()];
                        for &(r, c, v) in f.nonzeros() {
                            cols[c].push((r, v));
                        }
                        (f.dof, cols)
                    })
                    .collect();
                (t.coeff, factors)
            })
            .collect();
        ColumnAction { dims, strides, terms }
    }

    /// Nonzero entries `(row, value)` of column `s` (duplicates possible).
    fn column(&self, s: usize, out: &mut Vec<(usize, C64)>) {
        out.clear();
        let mut cur = Vec::new();
        let mut next = Vec::new();
        for (coeff, factors) in &self.terms {
            cur.clear();
            cur.push((s, *coeff));
            for (dof, cols) in factors {
                let idx = (s / self.strides[*dof]) % self.dims[*dof];
                next.clear();
                for &(s2, v) in &cur {
                    for &(r, m) in &cols[idx] {
                        let shifted = s2 + r * self.strides[*dof] - idx * self.strides[*dof];
                        next.push((shifted, v * m));
                    }
                }
                std::mem::swap(&mut cur, &mut next);
            }
            out.extend_from_slice(&cur);
        }
    }
}

/// Compressed sparse rows on the retained basis.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    fn from_triplets(dim: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2.norm() > 0.0);
        let mut row_ptr = vec![0; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            dim,
            row_ptr,
            cols: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = A X` for a dense square `X`.
    fn mul_dense(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let n = self.dim;
        out.fill(C64::new(0.0, 0.0));
        for c in 0..n {
            let xc = x.column(c);
            let xs = xc.as_slice();
            let mut oc = out.column_mut(c);
            for r in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * xs[self.cols[k]];
                }
                oc[r] = acc;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

/// Density matrix on a set of product basis states.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub data: DMatrix<C64>,
    /// Full flat index of each retained basis state.
    pub basis: Vec<usize>,
    pub dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.data * &self.data).trace().re
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, op: &SumOfProducts) -> C64 {
        let action = ColumnAction::new(op);
        let index: HashMap<usize, usize> = self.basis.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut col = Vec::new();
        let mut total = C64::new(0.0, 0.0);
        for (b, &s) in self.basis.iter().enumerate() {
            action.column(s, &mut col);
            for &(r, v) in &col {
                if let Some(&a) = index.get(&r) {
                    // O_{ab} ρ_{ba}
                    total += v * self.data[(b, a)];
                }
            }
        }
        total
    }

    /// Population of each level of `dof`.
    pub fn populations(&self, dof: usize) -> Vec<f64> {
        let stride: usize = self.dims[dof + 1..].iter().product();
        let mut p = vec![0.0; self.dims[dof]];
        for (i, &s) in self.basis.iter().enumerate() {
            p[(s / stride) % self.dims[dof]] += self.data[(i, i)].re;
        }
        p
    }
}

/// `½ Σ |λ_i(ρ − σ)|`; both must share a basis.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.basis != sigma.basis {
        return Err(Error::DimensionMismatch("density matrices on different bases".into()));
    }
    let d = &rho.data - &sigma.data;
    let h = (&d + d.adjoint()) * C64::new(0.5, 0.0);
    Ok(0.5 * h.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
}

/// Lindblad generator restricted to a closed set of basis states.
#[derive(Clone, Debug)]
pub struct Lindbladian {
    pub dims: Vec<usize>,
    pub basis: Vec<usize>,
    pub h_eff: SparseMatrix,
    pub jumps: Vec<SparseMatrix>,
}

impl Lindbladian {
    /// `reduce = false` keeps every product state (only for small spaces).
    pub fn new(h: &SumOfProducts, jumps: &[&SumOfProducts], seeds: &[usize], reduce: bool) -> Result<Self> {
        let dims = h.dims().to_vec();
        for l in jumps {
            if l.dims() != dims.as_slice() {
                return Err(Error::DimensionMismatch("jump operator and Hamiltonian dimensions differ".into()));
            }
        }
        let full: usize = dims.iter().product();
        let actions: Vec<ColumnAction> =
            std::iter::once(ColumnAction::new(h)).chain(jumps.iter().map(|l| ColumnAction::new(l))).collect();
        let basis: Vec<usize> = if reduce {
            let mut seen = vec![false; full];
            let mut queue: VecDeque<usize> = VecDeque::new();
            for &s in seeds {
                if !seen[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
            let mut col = Vec::new();
            while let Some(s) = queue.pop_front() {
                for a in &actions {
                    a.column(s, &mut col);
                    for &(r, v) in &col {
                        if v.norm() > 0.0 && !seen[r] {
                            seen[r] = true;
                            queue.push_back(r);
                        }
                    }
                }
            }
            (0..full).filter(|&s| seen[s]).collect()
        } else {
            (0..full).collect()
        };
        let index: HashMap<usize, usize> = basis.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let restrict = |a: &ColumnAction| -> Result<SparseMatrix> {
            let mut trip = Vec::new();
            let mut col = Vec::new();
            for (c, &s) in basis.iter().enumerate() {
                a.column(s, &mut col);
                for &(r, v) in &col {
                    match index.get(&r) {
                        Some(&ri) => trip.push((ri, c, v)),
                        None if v.norm() == 0.0 => {}
                        None => {
                            return Err(Error::NumericalConsistency("retained basis is not closed".into()));
                        }
                    }
                }
            }
            Ok(SparseMatrix::from_triplets(basis.len(), trip))
        };
        let h_eff = restrict(&actions[0])?;
        let jumps = actions[1..].iter().map(restrict).collect::<Result<Vec<_>>>()?;
        Ok(Lindbladian { dims, basis, h_eff, jumps })
    }

    pub fn for_system(system: &System, reduce: bool) -> Result<Self> {
        let psi0 = system.initial_vector();
        let seeds: Vec<usize> = psi0.iter().enumerate().filter(|(_, z)| z.norm() > 0.0).map(|(i, _)| i).collect();
        let jumps: Vec<&SumOfProducts> = system.channels.iter().map(|c| &c.operator).collect();
        Self::new(&system.effective_hamiltonian(), &jumps, &seeds, reduce)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn full_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// `|ψ⟩⟨ψ|` restricted to the retained basis.
    pub fn pure_state(&self, psi: &[C64]) -> Result<DensityMatrix> {
        if psi.len() != self.full_dim() {
            return Err(Error::DimensionMismatch(format!("state of length {} for space {}", psi.len(), self.full_dim())));
        }
        let v: Vec<C64> = self.basis.iter().map(|&s| psi[s]).collect();
        let kept: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let total: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (kept - total).abs() > 1e-12 * total.max(1.0) {
            return Err(Error::InvalidArgument("state has weight outside the retained basis".into()));
        }
        let col = DMatrix::from_column_slice(v.len(), 1, &v);
        Ok(DensityMatrix { data: &col * col.adjoint(), basis: self.basis.clone(), dims: self.dims.clone() })
    }

    /// `dρ/dt`.
    pub fn rhs(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut x = DMatrix::zeros(n, n);
        let mut y = DMatrix::zeros(n, n);
        self.rhs_into(rho, &mut out, &mut x, &mut y);
        out
    }

    fn rhs_into(&self, rho: &DMatrix<C64>, out: &mut DMatrix<C64>, x: &mut DMatrix<C64>, y: &mut DMatrix<C64>) {
        let mi = C64::new(0.0, -1.0);
        self.h_eff.mul_dense(rho, x);
        out.copy_from(x);
        *out -= x.adjoint();
        *out *= mi;
        for l in &self.jumps {
            // L ρ L† = (L (L ρ)†)†
            l.mul_dense(rho, x);
            x.adjoint_to(y);
            l.mul_dense(y, x);
            *out += x.adjoint();
        }
    }
}

/// Highest-level population of a truncated oscillator exceeding the
/// threshold at some time.
#[derive(Clone, Debug, PartialEq)]
pub struct LeakageFlag {
    pub dof: usize,
    pub time: f64,
    pub population: f64,
}

pub const LEAKAGE_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `times.len() × n_observables`.
    pub values: DMatrix<f64>,
    pub basis_dim: usize,
    pub full_dim: usize,
    pub leakage: Vec<LeakageFlag>,
    pub final_state: DensityMatrix,
}

impl OracleResult {
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.values.column(i).iter().copied().collect())
    }
}

/// Propagate `ρ` through the given times (the first must be the time of `ρ`).
pub fn propagate_density(
    lindbladian: &Lindbladian,
    rho0: &DensityMatrix,
    times: &[f64],
    tol: Tolerances,
    mut on_sample: impl FnMut(usize, &DensityMatrix) -> Result<()>,
) -> Result<DensityMatrix> {
    let n = lindbladian.dim();
    if rho0.data.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("ρ is {:?}, generator acts on {n}", rho0.data.shape())));
    }
    let mut ode = Dopri5::new(tol);
    let mut y: Vec<C64> = rho0.data.as_slice().to_vec();
    let mut rho = rho0.clone();
    let mut bufs = (DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n));
    on_sample(0, &rho)?;
    for i in 1..times.len() {
        ode.integrate(&mut y, times[i - 1], times[i], |_, yv, dy| {
            let (r, o, x, w) = &mut bufs;
            r.as_mut_slice().copy_from_slice(yv);
            lindbladian.rhs_into(r, o, x, w);
            dy.copy_from_slice(o.as_slice());
            Ok(())
        })?;
        rho.data.as_mut_slice().copy_from_slice(&y);
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
            return Err(Error::NumericalConsistency(format!("trace drifted to {tr} at t = {}", times[i])));
        }
        on_sample(i, &rho)?;
    }
    Ok(rho)
}

/// Observables of `system` at `times` (starting at 0) from the master
/// equation.
pub fn solve(system: &System, times: &[f64], tol: Tolerances, reduce: bool) -> Result<OracleResult> {
    if times.first().copied() != Some(0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("oracle times must start at 0 and increase".into()));
    }
    let lind = Lindbladian::for_system(system, reduce)?;
    let rho0 = lind.pure_state(&system.initial_vector())?;
    let mut values = DMatrix::zeros(times.len(), system.observables.len());
    let fock_oscillators: Vec<usize> = system
        .representation
        .bases
        .iter()
        .enumerate()
        .filter(|(_, b)| matches!(b, DofBasis::Fock(d) if *d > 2))
        .map(|(k, _)| k)
        .collect();
    let mut leakage: Vec<LeakageFlag> = Vec::new();
    let final_state = propagate_density(&lind, &rho0, times, tol, |i, rho| {
        for (j, o) in system.observables.iter().enumerate() {
            values[(i, j)] = rho.expectation(&o.operator).re;
        }
        for &k in &fock_oscillators {
            let top = *rho.populations(k).last().unwrap();
            if top > LEAKAGE_THRESHOLD && !leakage.iter().any(|f| f.dof == k) {
                warn!(
                    "truncation leakage: top level of `{}` holds {top:.2e} at t = {}",
                    system.dof_labels[k], times[i]
                );
                leakage.push(LeakageFlag { dof: k, time: times[i], population: top });
            }
        }
        Ok(())
    })?;
    Ok(OracleResult {
        labels: system.observable_labels(),
        times: times.to_vec(),
        values,
        basis_dim: lind.dim(),
        full_dim: lind.full_dim(),
        leakage,
        final_state,
    })
}
