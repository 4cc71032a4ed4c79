//! One-body matrices and sum-of-products operators acting on tensor-product
//! spaces.
//!
//! Vectors on a product space are stored flat in row-major order: the last
//! degree of freedom is the fastest-running index.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// A single-DOF operator matrix in whatever primitive basis the DOF uses.
#[derive(Clone)]
pub struct OneBodyOperator {
    pub dof: usize,
    pub label: String,
    matrix: Arc<DMatrix<C64>>,
    nonzeros: Arc<Vec<(usize, usize, C64)>>,
}

impl fmt::Debug for OneBodyOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OneBodyOperator")
            .field("dof", &self.dof)
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("nnz", &self.nonzeros.len())
            .finish()
    }
}

impl OneBodyOperator {
    pub fn new(dof: usize, label: impl Into<String>, matrix: DMatrix<C64>) -> Self {
        assert!(matrix.is_square(), "one-body operators must be square");
        let nonzeros = nonzero_entries(&matrix);
        OneBodyOperator {
            dof,
            label: label.into(),
            matrix: Arc::new(matrix),
            nonzeros: Arc::new(nonzeros),
        }
    }

    pub fn from_real(dof: usize, label: impl Into<String>, matrix: &DMatrix<f64>) -> Self {
        Self::new(dof, label, matrix.map(|x| C64::new(x, 0.0)))
    }

    pub fn identity(dof: usize, dim: usize) -> Self {
        Self::new(dof, "1", DMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nonzeros(&self) -> &[(usize, usize, C64)] {
        &self.nonzeros
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.dof, format!("{}†", self.label), self.matrix.adjoint())
    }

    /// Matrix product `self · rhs`; both must act on the same DOF.
    pub fn compose(&self, rhs: &OneBodyOperator) -> Self {
        assert_eq!(self.dof, rhs.dof, "composing operators on different DOFs");
        Self::new(
            self.dof,
            format!("{}{}", self.label, rhs.label),
            &*self.matrix * &*rhs.matrix,
        )
    }

    /// Replace the matrix by its Hermitian part.
    pub fn symmetrized(&self) -> Self {
        let m = &*self.matrix;
        Self::new(self.dof, self.label.clone(), (m + m.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let m = &*self.matrix;
        (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn same_matrix(&self, other: &OneBodyOperator) -> bool {
        if Arc::ptr_eq(&self.matrix, &other.matrix) {
            return true;
        }
        if self.dof != other.dof || self.matrix.shape() != other.matrix.shape() {
            return false;
        }
        // Products like a†·a and the number matrix differ only by rounding.
        let scale = self.matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        self.matrix.iter().zip(other.matrix.iter()).all(|(a, b)| (a - b).norm() <= 1e-13 * scale)
    }

    /// Identity of the shared matrix storage.
    pub(crate) fn storage_key(&self) -> usize {
        Arc::as_ptr(&self.matrix) as usize
    }

    /// Apply to a single-DOF vector.
    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        apply_entries(&self.nonzeros, v, 1, self.dim(), 1, &mut out);
        out
    }

    /// `dst = M ×_axis src` for a flat tensor of shape `dims`.
    pub fn apply_axis(&self, src: &[C64], dims: &[usize], axis: usize, dst: &mut [C64]) {
        let (outer, d, inner) = axis_split(dims, axis);
        debug_assert_eq!(d, self.dim());
        apply_entries(&self.nonzeros, src, outer, d, inner, dst);
    }
}

fn nonzero_entries(m: &DMatrix<C64>) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((i, j, z));
            }
        }
    }
    out
}

/// Split `dims` around `axis` into (outer, axis length, inner) extents.
pub fn axis_split(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = dims[..axis].iter().product();
    let inner = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

fn apply_entries(
    entries: &[(usize, usize, C64)],
    src: &[C64],
    outer: usize,
    d: usize,
    inner: usize,
    dst: &mut [C64],
) {
    dst.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    let block = d * inner;
    if inner == 1 {
        for o in 0..outer {
            let s = &src[o * block..(o + 1) * block];
            let t = &mut dst[o * block..(o + 1) * block];
            for &(i, j, m) in entries {
                t[i] += m * s[j];
            }
        }
    } else {
        for o in 0..outer {
            let base = o * block;
            for &(i, j, m) in entries {
                let s = &src[base + j * inner..base + (j + 1) * inner];
                let t = &mut dst[base + i * inner..base + (i + 1) * inner];
                for (a, b) in t.iter_mut().zip(s) {
                    *a += m * b;
                }
            }
        }
    }
}

/// `dst = M ×_axis src` with a dense (small) matrix `M` of shape
/// `d_out × d_in`; `dims` is the shape of `src`.
pub fn contract_axis(m: &DMatrix<C64>, src: &[C64], dims: &[usize], axis: usize, dst: &mut [C64]) {
    let (outer, d_in, inner) = axis_split(dims, axis);
    let d_out = m.nrows();
    debug_assert_eq!(m.ncols(), d_in);
    debug_assert_eq!(dst.len(), outer * d_out * inner);
    dst.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    if inner == 1 {
        for o in 0..outer {
            let s = &src[o * d_in..(o + 1) * d_in];
            for (i, t) in dst[o * d_out..(o + 1) * d_out].iter_mut().enumerate() {
                *t = (0..d_in).map(|j| m[(i, j)] * s[j]).sum();
            }
        }
        return;
    }
    for o in 0..outer {
        let sb = o * d_in * inner;
        let tb = o * d_out * inner;
        for i in 0..d_out {
            let t = &mut dst[tb + i * inner..tb + (i + 1) * inner];
            for j in 0..d_in {
                let mij = m[(i, j)];
                if mij.re == 0.0 && mij.im == 0.0 {
                    continue;
                }
                let s = &src[sb + j * inner..sb + (j + 1) * inner];
                for (a, b) in t.iter_mut().zip(s) {
                    *a += mij * b;
                }
            }
        }
    }
}

/// `out_{jl} = Σ_{all indices but axis} conj(x_{..j..}) y_{..l..}`.
pub fn hole_overlap(x: &[C64], y: &[C64], dims: &[usize], axis: usize) -> DMatrix<C64> {
    let (outer, d, inner) = axis_split(dims, axis);
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    if inner < d {
        for o in 0..outer {
            let b = o * d * inner;
            for i in 0..inner {
                for j in 0..d {
                    let xj = x[b + j * inner + i].conj();
                    let row = &mut out[j * d..(j + 1) * d];
                    for (l, acc) in row.iter_mut().enumerate() {
                        *acc += xj * y[b + l * inner + i];
                    }
                }
            }
        }
    } else {
        for o in 0..outer {
            let b = o * d * inner;
            for j in 0..d {
                let xs = &x[b + j * inner..b + (j + 1) * inner];
                for l in 0..d {
                    let ys = &y[b + l * inner..b + (l + 1) * inner];
                    let mut acc = C64::new(0.0, 0.0);
                    for (a, c) in xs.iter().zip(ys) {
                        acc += a.conj() * c;
                    }
                    out[j * d + l] += acc;
                }
            }
        }
    }
    DMatrix::from_row_slice(d, d, &out)
}

/// One scalar-weighted tensor product of one-body factors. Factors are kept
/// sorted by DOF with at most one factor per DOF; DOFs without a factor carry
/// the identity.
#[derive(Clone, Debug)]
pub struct ProductTerm {
    pub coeff: C64,
    pub factors: Vec<OneBodyOperator>,
}

impl ProductTerm {
    pub fn factor_on(&self, dof: usize) -> Option<&OneBodyOperator> {
        self.factors.iter().find(|f| f.dof == dof)
    }

    pub fn touches(&self, dof: usize) -> bool {
        self.factor_on(dof).is_some()
    }
}

/// Operator expressed as `Σ_r c_r ⊗_k h_r^(k)`.
#[derive(Clone, Debug)]
pub struct SumOfProducts {
    dims: Vec<usize>,
    terms: Vec<ProductTerm>,
}

/// Reusable buffers for matrix-free application.
#[derive(Default)]
pub struct Scratch {
    a: Vec<C64>,
    b: Vec<C64>,
}

impl SumOfProducts {
    pub fn zero(dims: &[usize]) -> Self {
        SumOfProducts { dims: dims.to_vec(), terms: Vec::new() }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let mut op = Self::zero(dims);
        op.terms.push(ProductTerm { coeff: C64::new(1.0, 0.0), factors: Vec::new() });
        op
    }

    /// Single term built from the given factors.
    pub fn product(dims: &[usize], coeff: C64, factors: Vec<OneBodyOperator>) -> Result<Self> {
        let mut op = Self::zero(dims);
        op.add_term(coeff, factors)?;
        Ok(op)
    }

    pub fn add_term(&mut self, coeff: C64, mut factors: Vec<OneBodyOperator>) -> Result<()> {
        factors.sort_by_key(|f| f.dof);
        for w in factors.windows(2) {
            if w[0].dof == w[1].dof {
                return Err(Error::InvalidArgument(format!(
                    "two factors on DOF {} in one product term",
                    w[0].dof
                )));
            }
        }
        for f in &factors {
            if f.dof >= self.dims.len() {
                return Err(Error::DimensionMismatch(format!(
                    "factor `{}` on DOF {} but operator has {} DOFs",
                    f.label,
                    f.dof,
                    self.dims.len()
                )));
            }
            if f.dim() != self.dims[f.dof] {
                return Err(Error::DimensionMismatch(format!(
                    "factor `{}` has dimension {} but DOF {} has {}",
                    f.label,
                    f.dim(),
                    f.dof,
                    self.dims[f.dof]
                )));
            }
        }
        self.terms.push(ProductTerm { coeff, factors });
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_dofs(&self) -> usize {
        self.dims.len()
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn terms(&self) -> &[ProductTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= c;
        }
        out
    }

    pub fn plus(&self, other: &SumOfProducts) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "adding operators on {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        SumOfProducts {
            dims: self.dims.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| ProductTerm {
                    coeff: t.coeff.conj(),
                    factors: t.factors.iter().map(|f| f.adjoint()).collect(),
                })
                .collect(),
        }
    }

    /// Operator product `self · rhs`, expanded term by term.
    pub fn compose(&self, rhs: &SumOfProducts) -> Result<Self> {
        if self.dims != rhs.dims {
            return Err(Error::DimensionMismatch(format!(
                "composing operators on {:?} and {:?}",
                self.dims, rhs.dims
            )));
        }
        let mut out = Self::zero(&self.dims);
        for l in &self.terms {
            for r in &rhs.terms {
                let mut factors = Vec::new();
                for dof in 0..self.dims.len() {
                    match (l.factor_on(dof), r.factor_on(dof)) {
                        (Some(a), Some(b)) => factors.push(a.compose(b)),
                        (Some(a), None) => factors.push(a.clone()),
                        (None, Some(b)) => factors.push(b.clone()),
                        (None, None) => {}
                    }
                }
                out.add_term(l.coeff * r.coeff, factors)?;
            }
        }
        Ok(out.simplified())
    }

    /// Merge terms whose factor lists are identical.
    pub fn simplified(&self) -> Self {
        let mut merged: Vec<ProductTerm> = Vec::new();
        for t in &self.terms {
            let hit = merged.iter_mut().find(|m| {
                m.factors.len() == t.factors.len()
                    && m.factors.iter().zip(&t.factors).all(|(a, b)| a.same_matrix(b))
            });
            match hit {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t.clone()),
            }
        }
        merged.retain(|t| t.coeff.norm() > 0.0);
        SumOfProducts { dims: self.dims.clone(), terms: merged }
    }

    /// The single DOF this operator acts on, if every term touches only it.
    pub fn single_dof(&self) -> Option<usize> {
        let mut dof = None;
        for t in &self.terms {
            match t.factors.as_slice() {
                [] => {}
                [f] => match dof {
                    None => dof = Some(f.dof),
                    Some(d) if d == f.dof => {}
                    Some(_) => return None,
                },
                _ => return None,
            }
        }
        dof
    }

    /// Collapse into one matrix on `dof` (requires [`Self::single_dof`]).
    pub fn as_one_body(&self, dof: usize) -> Option<OneBodyOperator> {
        if self.single_dof().is_some_and(|d| d != dof) {
            return None;
        }
        let n = self.dims[dof];
        let mut m = DMatrix::zeros(n, n);
        let mut labels = Vec::new();
        for t in &self.terms {
            match t.factors.as_slice() {
                [] => m += DMatrix::<C64>::identity(n, n) * t.coeff,
                [f] => {
                    m += f.matrix() * t.coeff;
                    labels.push(f.label.clone());
                }
                _ => return None,
            }
        }
        Some(OneBodyOperator::new(dof, labels.join("+"), m))
    }

    /// `out = O v` without building the full matrix.
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        let mut scratch = Scratch::default();
        self.apply_with(v, out, &mut scratch);
    }

    pub fn apply_with(&self, v: &[C64], out: &mut [C64], scratch: &mut Scratch) {
        let n = self.size();
        assert_eq!(v.len(), n, "vector length does not match operator");
        assert_eq!(out.len(), n);
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        scratch.a.resize(n, C64::new(0.0, 0.0));
        scratch.b.resize(n, C64::new(0.0, 0.0));
        for t in &self.terms {
            match t.factors.len() {
                0 => {
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += t.coeff * x;
                    }
                }
                _ => {
                    let (mut cur, mut next) = (&mut scratch.a, &mut scratch.b);
                    t.factors[0].apply_axis(v, &self.dims, t.factors[0].dof, cur);
                    for f in &t.factors[1..] {
                        f.apply_axis(cur, &self.dims, f.dof, next);
                        std::mem::swap(&mut cur, &mut next);
                    }
                    for (o, x) in out.iter_mut().zip(cur.iter()) {
                        *o += t.coeff * x;
                    }
                }
            }
        }
    }

    /// `⟨v|O|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let mut ov = vec![C64::new(0.0, 0.0); v.len()];
        self.apply(v, &mut ov);
        v.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum()
    }

    /// Explicit Kronecker-product matrix. Only sensible for small spaces.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.size();
        let mut out = DMatrix::zeros(n, n);
        for t in &self.terms {
            let mut m = DMatrix::from_element(1, 1, t.coeff);
            for (dof, &d) in self.dims.iter().enumerate() {
                let f = match t.factor_on(dof) {
                    Some(f) => f.matrix().clone(),
                    None => DMatrix::identity(d, d),
                };
                m = m.kronecker(&f);
            }
            out += m;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    fn random_matrix(n: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        DMatrix::from_fn(n, n, |_, _| c64(next(), next()))
    }

    #[test]
    fn axis_application_matches_kronecker() {
        let dims = [2, 3, 4];
        let m = random_matrix(3, 1);
        let op = OneBodyOperator::new(1, "m", m.clone());
        let sop = SumOfProducts::product(&dims, c64(1.0, 0.0), vec![op.clone()]).unwrap();
        let dense = DMatrix::<C64>::identity(2, 2)
            .kronecker(&m)
            .kronecker(&DMatrix::<C64>::identity(4, 4));
        let v: Vec<C64> = (0..24).map(|i| c64(i as f64, -(i as f64) * 0.5)).collect();
        let mut out = vec![c64(0.0, 0.0); 24];
        sop.apply(&v, &mut out);
        let expect = &dense * nalgebra::DVector::from_vec(v.clone());
        for (a, b) in out.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((sop.to_dense() - dense).norm() < 1e-12);
    }

    #[test]
    fn rejects_duplicate_dof() {
        let a = OneBodyOperator::identity(0, 2);
        let err = SumOfProducts::product(&[2, 2], c64(1.0, 0.0), vec![a.clone(), a]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_mismatched_dimension() {
        let a = OneBodyOperator::identity(1, 3);
        assert!(SumOfProducts::product(&[2, 2], c64(1.0, 0.0), vec![a]).is_err());
    }

    #[test]
    fn compose_and_adjoint_match_dense() {
        let dims = [2, 3];
        let a = OneBodyOperator::new(0, "a", random_matrix(2, 3));
        let b = OneBodyOperator::new(1, "b", random_matrix(3, 4));
        let c = OneBodyOperator::new(1, "c", random_matrix(3, 5));
        let mut x = SumOfProducts::product(&dims, c64(0.3, 0.1), vec![a.clone(), b]).unwrap();
        x.add_term(c64(-1.0, 2.0), vec![c]).unwrap();
        let y = SumOfProducts::product(&dims, c64(1.5, 0.0), vec![a]).unwrap();
        let xy = x.compose(&y).unwrap();
        assert!((xy.to_dense() - x.to_dense() * y.to_dense()).norm() < 1e-12);
        assert!((x.adjoint().to_dense() - x.to_dense().adjoint()).norm() < 1e-12);
    }

    #[test]
    fn simplify_merges_equal_factors() {
        let n = OneBodyOperator::new(0, "n", random_matrix(3, 9));
        let n2 = OneBodyOperator::new(0, "n'", n.matrix().clone());
        let mut op = SumOfProducts::product(&[3], c64(1.0, 0.0), vec![n]).unwrap();
        op.add_term(c64(0.0, -0.5), vec![n2]).unwrap();
        let s = op.simplified();
        assert_eq!(s.terms().len(), 1);
        assert!((s.terms()[0].coeff - c64(1.0, -0.5)).norm() < 1e-15);
        assert!((s.to_dense() - op.to_dense()).norm() < 1e-12);
    }

    #[test]
    fn contract_axis_rectangular() {
        let dims = [2, 3];
        let src: Vec<C64> = (0..6).map(|i| c64(i as f64, 1.0)).collect();
        let m = DMatrix::from_fn(4, 3, |i, j| c64((i + 2 * j) as f64, 0.0));
        let mut dst = vec![c64(0.0, 0.0); 8];
        contract_axis(&m, &src, &dims, 1, &mut dst);
        for o in 0..2 {
            for i in 0..4 {
                let expect: C64 = (0..3).map(|j| m[(i, j)] * src[o * 3 + j]).sum();
                assert!((dst[o * 4 + i] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hole_overlap_is_partial_trace() {
        let dims = [2, 3];
        let x: Vec<C64> = (0..6).map(|i| c64(i as f64, 0.5 * i as f64)).collect();
        let rho = hole_overlap(&x, &x, &dims, 0);
        for j in 0..2 {
            for l in 0..2 {
                let expect: C64 = (0..3).map(|r| x[j * 3 + r].conj() * x[l * 3 + r]).sum();
                assert!((rho[(j, l)] - expect).norm() < 1e-13);
            }
        }
    }
}
