//! Multi-configuration time-dependent Hartree wavefunctions.
//!
//! `Ψ = Σ_J A_J Π_k φ^(k)_{j_k}`: a coefficient tensor `A` of shape
//! `(n_1, …, n_f)` and, for each DOF, `n_k` single-particle functions (SPFs)
//! stored as the columns of an `N_k × n_k` matrix over the primitive basis.
//! SPFs evolve in the `g = 0` gauge, so they stay orthonormal up to
//! integration error; [`MctdhPropagator::step`] re-orthonormalizes when the
//! Gram matrix drifts.

mod eom;

pub use eom::{eom_rhs, mean_fields, regularized_inverse, MeanFieldBlock, MeanFieldSet, DEFAULT_REGULARIZATION};

use nalgebra::{DMatrix, DVector};

use crate::model::{DofBasis, JumpChannel, System};
use crate::ode::{Dopri5, Stats, Tolerances};
use crate::operator::{contract_axis, hole_overlap, OneBodyOperator, SumOfProducts};
use crate::{Error, Result, C64};

use eom::{Layout, Prepared, Workspace};

/// Gram-matrix deviation that triggers re-orthonormalization.
pub const GRAM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MctdhState {
    /// Coefficient tensor, row-major over `spf_dims`.
    pub a: Vec<C64>,
    /// Per DOF, `N_k × n_k` with SPFs as columns.
    pub spfs: Vec<DMatrix<C64>>,
    /// Ordered candidates used to complete SPF sets (`N_k × N_k`).
    candidates: Vec<DMatrix<C64>>,
}

fn candidates_for(basis: &DofBasis) -> DMatrix<C64> {
    match basis {
        DofBasis::Fock(d) => DMatrix::identity(*d, *d),
        DofBasis::Grid(g) => g.eigenbasis.map(|x| C64::new(x, 0.0)),
    }
}

/// Orthonormalize the columns of `v` by modified Gram–Schmidt (two passes).
/// Returns `(Q, R)` with `v = Q R`, `R` upper triangular. Columns that are
/// linearly dependent are replaced by the first candidate column with a
/// sizeable component outside the current span; their `R` diagonal is zero.
pub fn orthonormalize(v: &DMatrix<C64>, candidates: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let (rows, n) = v.shape();
    let mut q = DMatrix::<C64>::zeros(rows, n);
    let mut r = DMatrix::<C64>::zeros(n, n);
    let scale = (0..n).map(|j| v.column(j).norm()).fold(0.0, f64::max).max(1e-300);
    let mut next_candidate = 0;
    for j in 0..n {
        let mut col: DVector<C64> = v.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let c = q.column(i).dotc(&col);
                r[(i, j)] += c;
                col -= q.column(i) * c;
            }
        }
        let norm = col.norm();
        if norm > 1e-8 * scale {
            r[(j, j)] = C64::new(norm, 0.0);
            q.set_column(j, &(col / C64::new(norm, 0.0)));
            continue;
        }
        // Dependent column: fill with a fresh orthonormal direction.
        loop {
            assert!(next_candidate < candidates.ncols(), "ran out of complement candidates");
            let mut c: DVector<C64> = candidates.column(next_candidate).into_owned();
            next_candidate += 1;
            for _pass in 0..2 {
                for i in 0..j {
                    let p = q.column(i).dotc(&c);
                    c -= q.column(i) * p;
                }
            }
            let cn = c.norm();
            if cn > 1e-6 {
                q.set_column(j, &(c / C64::new(cn, 0.0)));
                break;
            }
        }
    }
    (q, r)
}

impl MctdhState {
    /// Single-configuration state: `A = e_(0,…,0)`, first SPF of each DOF the
    /// given function, the rest filled with the lowest basis eigenfunctions
    /// orthogonalized against it.
    pub fn from_product_state(bases: &[DofBasis], initial: &[Vec<C64>], n_spf: &[usize]) -> Result<Self> {
        if bases.len() != initial.len() || bases.len() != n_spf.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bases, {} initial functions, {} SPF counts",
                bases.len(),
                initial.len(),
                n_spf.len()
            )));
        }
        let mut spfs = Vec::new();
        let mut candidates = Vec::new();
        for (k, ((basis, f), &n)) in bases.iter().zip(initial).zip(n_spf).enumerate() {
            let big_n = basis.dim();
            if n == 0 || n > big_n {
                return Err(Error::InvalidArgument(format!(
                    "DOF {k}: need 1 <= n_k <= N_k, got n_k = {n}, N_k = {big_n}"
                )));
            }
            if f.len() != big_n {
                return Err(Error::DimensionMismatch(format!(
                    "DOF {k}: initial function has {} entries, basis has {big_n}",
                    f.len()
                )));
            }
            let norm: f64 = f.iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!("DOF {k}: initial function has norm² {norm}")));
            }
            let cand = candidates_for(basis);
            let mut v = DMatrix::<C64>::zeros(big_n, n);
            v.set_column(0, &DVector::from_column_slice(f));
            let (q, _) = orthonormalize(&v, &cand);
            spfs.push(q);
            candidates.push(cand);
        }
        let size: usize = n_spf.iter().product();
        let mut a = vec![C64::new(0.0, 0.0); size];
        a[0] = C64::new(1.0, 0.0);
        Ok(MctdhState { a, spfs, candidates })
    }

    pub fn n_dofs(&self) -> usize {
        self.spfs.len()
    }

    pub fn spf_dims(&self) -> Vec<usize> {
        self.spfs.iter().map(|s| s.ncols()).collect()
    }

    pub fn grid_dims(&self) -> Vec<usize> {
        self.spfs.iter().map(|s| s.nrows()).collect()
    }

    /// `Π n_k + Σ n_k N_k`.
    pub fn equation_count(&self) -> usize {
        self.a.len() + self.spfs.iter().map(|s| s.len()).sum::<usize>()
    }

    /// Complex numbers held by the state (coefficients plus SPFs).
    pub fn memory_bytes(&self) -> usize {
        self.equation_count() * std::mem::size_of::<C64>()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.a.iter_mut().for_each(|z| *z *= s);
    }

    pub fn reduced_density(&self, k: usize) -> DMatrix<C64> {
        hole_overlap(&self.a, &self.a, &self.spf_dims(), k)
    }

    /// Largest deviation of any SPF Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        self.spfs
            .iter()
            .map(|s| {
                let g = s.adjoint() * s;
                (g - DMatrix::<C64>::identity(s.ncols(), s.ncols())).camax()
            })
            .fold(0.0, f64::max)
    }

    /// Re-orthonormalize every SPF set, absorbing the change into `A`.
    pub fn orthonormalize(&mut self) {
        for k in 0..self.n_dofs() {
            self.reorthonormalize_dof(k, None);
        }
    }

    /// Replace SPFs of DOF `k` by `new` (or re-orthonormalize the current
    /// ones) and rotate `A` accordingly.
    fn reorthonormalize_dof(&mut self, k: usize, new: Option<DMatrix<C64>>) {
        let v = new.unwrap_or_else(|| self.spfs[k].clone());
        let (q, r) = orthonormalize(&v, &self.candidates[k]);
        let dims = self.spf_dims();
        let mut out = vec![C64::new(0.0, 0.0); self.a.len()];
        contract_axis(&r, &self.a, &dims, k, &mut out);
        self.a = out;
        self.spfs[k] = q;
    }

    /// Full wavefunction on the primitive product grid. Only for small
    /// systems (tests, diagnostics).
    pub fn to_full(&self) -> Vec<C64> {
        let mut cur = self.a.clone();
        let mut dims = self.spf_dims();
        for k in 0..self.n_dofs() {
            let big_n = self.spfs[k].nrows();
            let mut nd = dims.clone();
            nd[k] = big_n;
            let mut out = vec![C64::new(0.0, 0.0); nd.iter().product()];
            contract_axis(&self.spfs[k], &cur, &dims, k, &mut out);
            cur = out;
            dims = nd;
        }
        cur
    }

    /// `⟨Ψ|O|Ψ⟩` (not divided by the norm).
    pub fn expectation(&self, op: &SumOfProducts) -> C64 {
        let prepared = Prepared::new(op);
        let dims = self.spf_dims();
        let mut total = C64::new(0.0, 0.0);
        let ht: Vec<DMatrix<C64>> = prepared
            .ops
            .iter()
            .map(|o| {
                let phi = &self.spfs[o.dof];
                phi.adjoint() * o.matrix() * phi
            })
            .collect();
        let mut buf = vec![C64::new(0.0, 0.0); self.a.len()];
        for (coeff, idx) in &prepared.terms {
            let mut cur = self.a.clone();
            for &i in idx {
                contract_axis(&ht[i], &cur, &dims, prepared.ops[i].dof, &mut buf);
                std::mem::swap(&mut cur, &mut buf);
            }
            let v: C64 = self.a.iter().zip(&cur).map(|(x, y)| x.conj() * y).sum();
            total += coeff * v;
        }
        total
    }

    fn pack(&self, layout: &Layout, y: &mut Vec<C64>) {
        y.clear();
        y.resize(layout.total, C64::new(0.0, 0.0));
        y[..self.a.len()].copy_from_slice(&self.a);
        for (k, s) in self.spfs.iter().enumerate() {
            y[layout.spf_offsets[k]..layout.spf_offsets[k] + s.len()].copy_from_slice(s.as_slice());
        }
    }

    fn unpack(&mut self, layout: &Layout, y: &[C64]) {
        let na = self.a.len();
        self.a.copy_from_slice(&y[..na]);
        for (k, s) in self.spfs.iter_mut().enumerate() {
            let len = s.len();
            s.as_mut_slice().copy_from_slice(&y[layout.spf_offsets[k]..layout.spf_offsets[k] + len]);
        }
    }
}

/// Apply a single-DOF jump operator and renormalize to unit norm.
pub fn apply_one_body_jump(state: &MctdhState, channel: &JumpChannel) -> Result<MctdhState> {
    let dof = channel.operator.single_dof().ok_or_else(|| {
        Error::InvalidArgument(format!("jump channel `{}` must act on a single DOF", channel.label))
    })?;
    let l = channel.operator.as_one_body(dof).expect("single-DOF operator");
    let mut out = state.clone();
    let transformed = l.matrix() * &state.spfs[dof];
    out.reorthonormalize_dof(dof, Some(transformed));
    let norm = out.norm_sqr();
    if !(norm >= 1e-14) {
        return Err(Error::ZeroProbabilityJump { channel: channel.label.clone(), norm });
    }
    out.scale(1.0 / norm.sqrt());
    Ok(out)
}

/// Constraint used when integrating the SPFs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// `i⟨φ_j|φ̇_l⟩ = 0`.
    Zero,
    /// `i⟨φ_j|φ̇_l⟩ = ⟨φ_j|h_k|φ_l⟩` with `h_k` the Hermitian part of the
    /// single-DOF terms of DOF `k`. The SPFs are then integrated in the
    /// rotating frame of `h_k`, which removes its fast phases from the
    /// step-size control. The wavefunction is the same as for [`Gauge::Zero`].
    OneBody,
}

/// Eigenbasis of a DOF's one-body Hamiltonian.
#[derive(Clone, Debug)]
struct Frame {
    energies: Vec<f64>,
    basis: DMatrix<C64>,
}

/// Drop rounding-level entries so rotated ladder operators stay sparse.
fn sparsify(m: DMatrix<C64>) -> DMatrix<C64> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    m.map(|z| if z.norm() <= 1e-14 * scale { C64::new(0.0, 0.0) } else { z })
}

/// Remove the Hermitian one-body part of each DOF from `h` and express the
/// remainder in the eigenbases of those one-body parts.
fn split_one_body(h: &SumOfProducts) -> Result<(SumOfProducts, Vec<Option<Frame>>)> {
    let dims = h.dims().to_vec();
    let mut single: Vec<Option<DMatrix<C64>>> = vec![None; dims.len()];
    for t in h.terms() {
        if let [f] = t.factors.as_slice() {
            let m = f.matrix() * t.coeff;
            single[f.dof] = Some(match single[f.dof].take() {
                Some(acc) => acc + m,
                None => m,
            });
        }
    }
    let mut frames = Vec::with_capacity(dims.len());
    let mut residual = Vec::with_capacity(dims.len());
    for s in &single {
        match s {
            None => {
                frames.push(None);
                residual.push(None);
            }
            Some(s) => {
                let h0 = (s + s.adjoint()) * C64::new(0.5, 0.0);
                let eig = h0.clone().symmetric_eigen();
                frames.push(Some(Frame { energies: eig.eigenvalues.iter().copied().collect(), basis: eig.eigenvectors }));
                residual.push(Some(s - h0));
            }
        }
    }
    let rotate = |dof: usize, m: &DMatrix<C64>| -> DMatrix<C64> {
        match &frames[dof] {
            Some(f) => sparsify(f.basis.adjoint() * m * &f.basis),
            None => m.clone(),
        }
    };
    let mut out = SumOfProducts::zero(&dims);
    let mut cache: Vec<(usize, OneBodyOperator)> = Vec::new();
    for t in h.terms() {
        if t.factors.len() == 1 {
            continue;
        }
        let mut factors = Vec::with_capacity(t.factors.len());
        for f in &t.factors {
            let key = f.storage_key();
            let op = match cache.iter().find(|(k, _)| *k == key) {
                Some((_, op)) => op.clone(),
                None => {
                    let op = OneBodyOperator::new(f.dof, f.label.clone(), rotate(f.dof, f.matrix()));
                    cache.push((key, op.clone()));
                    op
                }
            };
            factors.push(op);
        }
        out.add_term(t.coeff, factors)?;
    }
    for (k, r) in residual.iter().enumerate() {
        if let Some(r) = r {
            let scale = single[k].as_ref().map_or(0.0, |s| s.iter().map(|z| z.norm()).fold(0.0, f64::max));
            if r.iter().any(|z| z.norm() > 1e-14 * scale) {
                out.add_term(C64::new(1.0, 0.0), vec![OneBodyOperator::new(k, "h_res", rotate(k, r))])?;
            }
        }
    }
    Ok((out, frames))
}

/// Variational propagator for one MCTDH wavefunction under a fixed
/// (possibly non-Hermitian) Hamiltonian.
pub struct MctdhPropagator {
    gauge: Gauge,
    prepared: Prepared,
    frames: Vec<Option<Frame>>,
    energies: Vec<Option<Vec<f64>>>,
    layout: Option<Layout>,
    workspace: Workspace,
    integrator: Dopri5,
    buffer: Vec<C64>,
    pub regularization: f64,
    pub stats: Stats,
}

impl MctdhPropagator {
    pub fn new(h: &SumOfProducts, tol: Tolerances) -> Self {
        Self::with_gauge(h, tol, Gauge::OneBody)
    }

    pub fn with_gauge(h: &SumOfProducts, tol: Tolerances, gauge: Gauge) -> Self {
        let (prepared, frames) = match gauge {
            Gauge::Zero => (Prepared::new(h), vec![None; h.n_dofs()]),
            Gauge::OneBody => {
                let (rest, frames) = split_one_body(h).expect("terms of a valid operator");
                (Prepared::new(&rest), frames)
            }
        };
        let energies = frames.iter().map(|f| f.as_ref().map(|f| f.energies.clone())).collect();
        MctdhPropagator {
            gauge,
            prepared,
            frames,
            energies,
            layout: None,
            workspace: Workspace::default(),
            integrator: Dopri5::new(tol),
            buffer: Vec::new(),
            regularization: DEFAULT_REGULARIZATION,
            stats: Stats::default(),
        }
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn reset_step(&mut self) {
        self.integrator.reset_step();
    }

    /// Integrate the equations of motion over `dt` (state left unnormalized).
    pub fn step(&mut self, state: &mut MctdhState, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("interval length must be positive, got {dt}")));
        }
        if state.n_dofs() != self.frames.len() {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian has {} DOFs, state {}",
                self.frames.len(),
                state.n_dofs()
            )));
        }
        let layout = match &self.layout {
            Some(l) if l.matches(state) => l.clone(),
            _ => {
                let l = Layout::new(state);
                self.layout = Some(l.clone());
                l
            }
        };
        let mut work = state.clone();
        for (phi, frame) in work.spfs.iter_mut().zip(&self.frames) {
            if let Some(f) = frame {
                *phi = f.basis.adjoint() * &*phi;
            }
        }
        work.pack(&layout, &mut self.buffer);
        let prepared = &self.prepared;
        let energies = &self.energies;
        let ws = &mut self.workspace;
        let reg = self.regularization;
        let stats = self.integrator.integrate(&mut self.buffer, 0.0, dt, |s, y, dy| {
            eom::rhs_packed(prepared, &layout, energies, s, y, dy, ws, reg)
        })?;
        self.stats += stats;
        work.unpack(&layout, &self.buffer);
        for (phi, frame) in work.spfs.iter_mut().zip(&self.frames) {
            if let Some(f) = frame {
                for (i, e) in f.energies.iter().enumerate() {
                    let ph = C64::from_polar(1.0, -e * dt);
                    for l in 0..phi.ncols() {
                        phi[(i, l)] *= ph;
                    }
                }
                *phi = &f.basis * &*phi;
            }
        }
        if work.gram_deviation() > GRAM_TOLERANCE {
            work.orthonormalize();
        }
        *state = work;
        Ok(())
    }
}

/// One-shot `step`: returns the propagated (unnormalized) state.
pub fn step(state: &MctdhState, h_eff: &SumOfProducts, dt: f64, tol: Tolerances) -> Result<MctdhState> {
    let mut out = state.clone();
    MctdhPropagator::new(h_eff, tol).step(&mut out, dt)?;
    Ok(out)
}

/// Build the initial MCTDH state of a realized system.
pub fn initial_state(system: &System, n_spf: &[usize]) -> Result<MctdhState> {
    MctdhState::from_product_state(&system.representation.bases, &system.initial, n_spf)
}
