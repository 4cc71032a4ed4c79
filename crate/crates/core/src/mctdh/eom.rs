//! Equations of motion for the coefficients and SPFs.
//!
//! `i Ȧ = Σ_r c_r (⊗_k h̃_r^(k)) A` with `h̃ = Φ† h Φ`, and for every DOF with
//! `n_k < N_k`
//! `i Φ̇ = (1 − Φ Φ†) [Σ_r c_r h_r Φ M_r^T] ρ_reg^(-T)`,
//! where `M_r` is the mean-field weight of term `r` (the hole overlap of `A`
//! with `A` acted on by the other factors of the term). Terms not touching a
//! DOF only contribute to its SPFs through the projector and drop out.

use nalgebra::{DMatrix, DMatrixView};

use crate::operator::{contract_axis, hole_overlap, OneBodyOperator, SumOfProducts};
use crate::{Error, Result, C64};

use super::MctdhState;

/// `ε` in the density regularization `λ → λ + ε exp(−λ/ε)`.
pub const DEFAULT_REGULARIZATION: f64 = 1e-8;

/// Unique one-body factors of an operator and the terms as index lists.
/// Two-factor terms are also listed per factor as `(coeff, partner)` so that
/// all terms sharing a factor need one contraction.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    pub ops: Vec<OneBodyOperator>,
    pub terms: Vec<(C64, Vec<usize>)>,
    pub partners: Vec<Vec<(C64, usize)>>,
}

impl Prepared {
    pub fn new(op: &SumOfProducts) -> Self {
        let mut ops: Vec<OneBodyOperator> = Vec::new();
        let mut keys = Vec::new();
        let mut terms = Vec::new();
        for t in op.terms() {
            let mut idx = Vec::new();
            for f in &t.factors {
                let key = f.storage_key();
                let i = match keys.iter().position(|&k| k == key) {
                    Some(i) => i,
                    None => {
                        keys.push(key);
                        ops.push(f.clone());
                        ops.len() - 1
                    }
                };
                idx.push(i);
            }
            terms.push((t.coeff, idx));
        }
        let mut partners = vec![Vec::new(); ops.len()];
        for (c, idx) in &terms {
            if let [i, j] = idx[..] {
                partners[i].push((*c, j));
                partners[j].push((*c, i));
            }
        }
        Prepared { ops, terms, partners }
    }
}

/// Offsets of `A` and the SPF blocks inside the packed ODE vector.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub a_len: usize,
    pub spf_dims: Vec<usize>,
    pub grid_dims: Vec<usize>,
    pub spf_offsets: Vec<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(state: &MctdhState) -> Self {
        let a_len = state.a.len();
        let mut off = a_len;
        let mut spf_offsets = Vec::new();
        for s in &state.spfs {
            spf_offsets.push(off);
            off += s.len();
        }
        Layout { a_len, spf_dims: state.spf_dims(), grid_dims: state.grid_dims(), spf_offsets, total: off }
    }

    pub fn matches(&self, state: &MctdhState) -> bool {
        self.spf_dims == state.spf_dims() && self.grid_dims == state.grid_dims()
    }
}

#[derive(Default)]
pub(crate) struct Workspace {
    phi: Vec<DMatrix<C64>>,
    hphi: Vec<DMatrix<C64>>,
    ht: Vec<DMatrix<C64>>,
    applied: Vec<Vec<C64>>,
    paired: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    tmp2: Vec<C64>,
}

/// Regularized inverse of a reduced density matrix.
pub fn regularized_inverse(rho: &DMatrix<C64>, eps: f64) -> DMatrix<C64> {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let u = &eig.eigenvectors;
    let inv_diag = eig.eigenvalues.map(|l| {
        let reg = l + eps * (-l / eps).exp();
        C64::new(1.0 / reg, 0.0)
    });
    u * DMatrix::from_diagonal(&inv_diag) * u.adjoint()
}

#[allow(clippy::too_many_arguments)]
fn product_applied(
    ws_applied: &[Vec<C64>],
    ht: &[DMatrix<C64>],
    ops: &[OneBodyOperator],
    idx: &[usize],
    dims: &[usize],
    a: &[C64],
    skip: Option<usize>,
    out: &mut Vec<C64>,
    buf: &mut Vec<C64>,
) {
    let rest: Vec<usize> = idx.iter().copied().filter(|&i| Some(ops[i].dof) != skip).collect();
    match rest.as_slice() {
        [] => {
            out.clear();
            out.extend_from_slice(a);
        }
        [first, others @ ..] => {
            out.clear();
            out.extend_from_slice(&ws_applied[*first]);
            buf.resize(out.len(), C64::new(0.0, 0.0));
            for &i in others {
                contract_axis(&ht[i], out, dims, ops[i].dof, buf);
                std::mem::swap(out, buf);
            }
        }
    }
}

/// `phi_{il} *= exp(sign · i E_i s)`.
fn rotate_rows(m: &mut DMatrix<C64>, energies: &[f64], s: f64, sign: f64) {
    for (i, e) in energies.iter().enumerate() {
        let ph = C64::from_polar(1.0, sign * e * s);
        for l in 0..m.ncols() {
            m[(i, l)] *= ph;
        }
    }
}

#[allow(clippy::too_many_arguments)]
/// Packed right-hand side `dy = f(s, y)`. With `frames[k] = Some(E)` the SPFs
/// of DOF `k` are stored in the rotating frame `χ = exp(i E s) φ` of a
/// diagonal one-body Hamiltonian that has been removed from `prepared`.
pub(crate) fn rhs_packed(
    prepared: &Prepared,
    layout: &Layout,
    frames: &[Option<Vec<f64>>],
    s: f64,
    y: &[C64],
    dy: &mut [C64],
    ws: &mut Workspace,
    eps: f64,
) -> Result<()> {
    let na = layout.a_len;
    let dims = &layout.spf_dims;
    let a = &y[..na];
    let nd = dims.len();
    ws.phi.resize(nd, DMatrix::zeros(0, 0));
    for k in 0..nd {
        let off = layout.spf_offsets[k];
        let len = layout.grid_dims[k] * dims[k];
        let view = DMatrixView::from_slice(&y[off..off + len], layout.grid_dims[k], dims[k]);
        ws.phi[k] = view.into_owned();
        if let Some(Some(e)) = frames.get(k) {
            rotate_rows(&mut ws.phi[k], e, s, -1.0);
        }
    }

    let nops = prepared.ops.len();
    ws.hphi.resize(nops, DMatrix::zeros(0, 0));
    ws.ht.resize(nops, DMatrix::zeros(0, 0));
    ws.applied.resize(nops, Vec::new());
    for (i, op) in prepared.ops.iter().enumerate() {
        let phi = &ws.phi[op.dof];
        let (big_n, n) = phi.shape();
        let hp = &mut ws.hphi[i];
        if hp.shape() != (big_n, n) {
            *hp = DMatrix::zeros(big_n, n);
        } else {
            hp.fill(C64::new(0.0, 0.0));
        }
        if op.nonzeros().len() * 4 < big_n * big_n * 3 {
            let src = phi.as_slice();
            let dst = hp.as_mut_slice();
            for &(r, c, v) in op.nonzeros() {
                for l in 0..n {
                    dst[r + l * big_n] += v * src[c + l * big_n];
                }
            }
        } else {
            hp.gemm(C64::new(1.0, 0.0), op.matrix(), phi, C64::new(0.0, 0.0));
        }
        ws.ht[i] = phi.adjoint() * &*hp;
        ws.applied[i].resize(na, C64::new(0.0, 0.0));
        contract_axis(&ws.ht[i], a, dims, op.dof, &mut ws.applied[i]);
    }

    // paired[i] = Σ_partners c · (partner applied to A).
    ws.paired.resize(nops, Vec::new());
    for (i, ps) in prepared.partners.iter().enumerate() {
        let w = &mut ws.paired[i];
        w.clear();
        if ps.is_empty() {
            continue;
        }
        w.resize(na, C64::new(0.0, 0.0));
        for &(c, j) in ps {
            for (d, s) in w.iter_mut().zip(&ws.applied[j]) {
                *d += c * s;
            }
        }
    }

    // Coefficients. Each two-factor term appears under both of its factors.
    let minus_i = C64::new(0.0, -1.0);
    {
        let (da, _) = dy.split_at_mut(na);
        da.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (c, idx) in &prepared.terms {
            let src: &[C64] = match idx.len() {
                0 => a,
                1 => &ws.applied[idx[0]],
                2 => continue,
                _ => {
                    product_applied(&ws.applied, &ws.ht, &prepared.ops, idx, dims, a, None, &mut ws.tmp, &mut ws.tmp2);
                    &ws.tmp
                }
            };
            for (d, s) in da.iter_mut().zip(src) {
                *d += c * s;
            }
        }
        ws.tmp.resize(na, C64::new(0.0, 0.0));
        for (i, w) in ws.paired.iter().enumerate() {
            if w.is_empty() {
                continue;
            }
            contract_axis(&ws.ht[i], w, dims, prepared.ops[i].dof, &mut ws.tmp);
            for (d, s) in da.iter_mut().zip(&ws.tmp) {
                *d += 0.5 * s;
            }
        }
        da.iter_mut().for_each(|z| *z *= minus_i);
    }

    // SPFs.
    for k in 0..nd {
        let (big_n, n) = (layout.grid_dims[k], dims[k]);
        let off = layout.spf_offsets[k];
        let out = &mut dy[off..off + big_n * n];
        if n == big_n {
            out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            continue;
        }
        let rho = hole_overlap(a, a, dims, k);
        let mut yk = DMatrix::<C64>::zeros(big_n, n);
        for (c, idx) in &prepared.terms {
            let Some(&ik) = idx.iter().find(|&&i| prepared.ops[i].dof == k) else {
                continue;
            };
            let m = if idx.len() == 1 {
                rho.clone()
            } else if idx.len() == 2 {
                continue;
            } else {
                product_applied(&ws.applied, &ws.ht, &prepared.ops, idx, dims, a, Some(k), &mut ws.tmp, &mut ws.tmp2);
                hole_overlap(a, &ws.tmp, dims, k)
            };
            yk.gemm(*c, &ws.hphi[ik], &m.transpose(), C64::new(1.0, 0.0));
        }
        for (i, w) in ws.paired.iter().enumerate() {
            if w.is_empty() || prepared.ops[i].dof != k {
                continue;
            }
            let m = hole_overlap(a, w, dims, k);
            yk.gemm(C64::new(1.0, 0.0), &ws.hphi[i], &m.transpose(), C64::new(1.0, 0.0));
        }
        let phi = &ws.phi[k];
        let proj = phi * (phi.adjoint() * &yk);
        yk -= proj;
        let inv = regularized_inverse(&rho, eps);
        let mut dphi = yk * inv.transpose() * minus_i;
        if let Some(Some(e)) = frames.get(k) {
            rotate_rows(&mut dphi, e, s, 1.0);
        }
        // Non-finite values are left for the integrator, which rejects the step.
        out.copy_from_slice(dphi.as_slice());
    }
    Ok(())
}

/// Time derivatives `(dA/dt, dΦ_k/dt)` of a state under `h`.
pub fn eom_rhs(state: &MctdhState, h: &SumOfProducts, regularization: f64) -> Result<(Vec<C64>, Vec<DMatrix<C64>>)> {
    let prepared = Prepared::new(h);
    let layout = Layout::new(state);
    let mut y = Vec::new();
    state.pack(&layout, &mut y);
    let mut dy = vec![C64::new(0.0, 0.0); layout.total];
    rhs_packed(&prepared, &layout, &[], 0.0, &y, &mut dy, &mut Workspace::default(), regularization)?;
    if let Some(i) = dy.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalConsistency(format!("non-finite derivative at packed index {i}")));
    }
    let da = dy[..layout.a_len].to_vec();
    let dphi = (0..state.n_dofs())
        .map(|k| {
            let off = layout.spf_offsets[k];
            let (big_n, n) = (layout.grid_dims[k], layout.spf_dims[k]);
            DMatrix::from_column_slice(big_n, n, &dy[off..off + big_n * n])
        })
        .collect();
    Ok((da, dphi))
}

/// One term's contribution to a DOF's mean field: `coeff · weights_{jl} · op`
/// (`op = None` is the identity).
#[derive(Clone, Debug)]
pub struct MeanFieldBlock {
    pub coeff: C64,
    pub weights: DMatrix<C64>,
    pub operator: Option<OneBodyOperator>,
}

#[derive(Clone, Debug)]
pub struct MeanFieldSet {
    pub densities: Vec<DMatrix<C64>>,
    pub blocks: Vec<Vec<MeanFieldBlock>>,
}

impl MeanFieldSet {
    /// The primitive-basis matrix `⟨H⟩^(k)_{jl}`.
    pub fn operator_matrix(&self, k: usize, j: usize, l: usize, big_n: usize) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(big_n, big_n);
        for b in &self.blocks[k] {
            let w = b.coeff * b.weights[(j, l)];
            match &b.operator {
                Some(op) => out += op.matrix() * w,
                None => out += DMatrix::<C64>::identity(big_n, big_n) * w,
            }
        }
        out
    }
}

/// Reduced densities and mean-field blocks of `h` for every DOF.
pub fn mean_fields(state: &MctdhState, h: &SumOfProducts) -> MeanFieldSet {
    let dims = state.spf_dims();
    let a = &state.a;
    let densities: Vec<DMatrix<C64>> = (0..state.n_dofs()).map(|k| state.reduced_density(k)).collect();
    let ht = |f: &OneBodyOperator| {
        let phi = &state.spfs[f.dof];
        phi.adjoint() * f.matrix() * phi
    };
    let mut blocks = vec![Vec::new(); state.n_dofs()];
    let mut buf = vec![C64::new(0.0, 0.0); a.len()];
    for t in h.terms() {
        for (k, bk) in blocks.iter_mut().enumerate() {
            let mut cur = a.clone();
            for f in t.factors.iter().filter(|f| f.dof != k) {
                contract_axis(&ht(f), &cur, &dims, f.dof, &mut buf);
                std::mem::swap(&mut cur, &mut buf);
            }
            bk.push(MeanFieldBlock {
                coeff: t.coeff,
                weights: hole_overlap(a, &cur, &dims, k),
                operator: t.factor_on(k).cloned(),
            });
        }
    }
    MeanFieldSet { densities, blocks }
}
