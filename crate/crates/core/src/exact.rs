//! Exact non-Hermitian propagation of state vectors in a full tensor-product
//! basis (truncated Fock states or complete grids).

use crate::ode::{Dopri5, Stats, Tolerances};
use crate::operator::{Scratch, SumOfProducts};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
    pub dims: Vec<usize>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for dimensions {:?} (product {n})",
                amplitudes.len(),
                dims
            )));
        }
        Ok(StateVector { amplitudes, dims })
    }

    /// Product state from per-DOF vectors.
    pub fn product(factors: &[Vec<C64>]) -> Self {
        let mut amps = vec![C64::new(1.0, 0.0)];
        for f in factors {
            amps = amps.iter().flat_map(|a| f.iter().map(move |b| a * b)).collect();
        }
        StateVector { amplitudes: amps, dims: factors.iter().map(|f| f.len()).collect() }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.amplitudes.iter_mut().for_each(|z| *z *= s);
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.scale(1.0 / n);
        }
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// `⟨v|O|v⟩` (not divided by the norm).
    pub fn expectation(&self, op: &SumOfProducts) -> C64 {
        op.expectation(&self.amplitudes)
    }

    /// Population of each level of `dof`.
    pub fn populations(&self, dof: usize) -> Vec<f64> {
        let (outer, d, inner) = crate::operator::axis_split(&self.dims, dof);
        let mut p = vec![0.0; d];
        for o in 0..outer {
            for (i, pi) in p.iter_mut().enumerate() {
                let b = (o * d + i) * inner;
                *pi += self.amplitudes[b..b + inner].iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        p
    }
}

/// `O v`, applied factor by factor along each DOF axis.
pub fn apply_sop(op: &SumOfProducts, v: &StateVector) -> Result<StateVector> {
    if op.dims() != v.dims.as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "operator on {:?} applied to state on {:?}",
            op.dims(),
            v.dims
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    op.apply(&v.amplitudes, &mut out);
    Ok(StateVector { amplitudes: out, dims: v.dims.clone() })
}

/// Integrate `i dv/dt = H v` over `[0, dt]` with an existing integrator, so
/// that its step-size memory carries across consecutive intervals.
pub fn propagate_with(
    v: &mut StateVector,
    h: &SumOfProducts,
    dt: f64,
    integrator: &mut Dopri5,
    scratch: &mut Scratch,
) -> Result<Stats> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("interval length must be positive, got {dt}")));
    }
    if h.dims() != v.dims.as_slice() {
        return Err(Error::DimensionMismatch(format!("Hamiltonian on {:?}, state on {:?}", h.dims(), v.dims)));
    }
    let minus_i = C64::new(0.0, -1.0);
    integrator.integrate(&mut v.amplitudes, 0.0, dt, |_, y, dy| {
        h.apply_with(y, dy, scratch);
        dy.iter_mut().for_each(|z| *z *= minus_i);
        Ok(())
    })
}

/// Unnormalized solution of `i dv/dt = H_eff v` after `dt`.
pub fn propagate_interval(v: &StateVector, h_eff: &SumOfProducts, dt: f64, tol: Tolerances) -> Result<StateVector> {
    let mut out = v.clone();
    let mut ode = Dopri5::new(tol);
    propagate_with(&mut out, h_eff, dt, &mut ode, &mut Scratch::default())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::*;
    use crate::model::Representation;
    use crate::c64;

    #[test]
    fn identity_leaves_vector() {
        let v = StateVector::new(vec![c64(1.0, 2.0), c64(-0.5, 0.0), c64(0.0, 1.0), c64(3.0, 0.0)], vec![2, 2]).unwrap();
        let id = SumOfProducts::identity(&[2, 2]);
        assert_eq!(apply_sop(&id, &v).unwrap(), v);
    }

    #[test]
    fn cavity_number_on_fock_eigenstate() {
        let p = OscillatorArrayParams { initial: vec![1, 1, 0, 0, 2], ..OscillatorArrayParams::ring() };
        let s = ring_array(&p).unwrap();
        let sys = s.realize(&Representation::fock_truncated(&s, 2, 3)).unwrap();
        let v = StateVector::product(&sys.initial);
        let n_a = &sys.observables.last().unwrap().operator;
        let out = apply_sop(n_a, &v).unwrap();
        for (a, b) in out.amplitudes.iter().zip(&v.amplitudes) {
            assert!((a - 2.0 * b).norm() < 1e-15);
        }
    }

    #[test]
    fn mismatched_dims_rejected() {
        let v = StateVector::product(&[vec![c64(1.0, 0.0); 3]]);
        assert!(apply_sop(&SumOfProducts::identity(&[2]), &v).is_err());
        assert!(StateVector::new(vec![c64(0.0, 0.0); 3], vec![2, 2]).is_err());
    }

    #[test]
    fn fock_state_decay_amplitude() {
        let (w, kappa, n, dt) = (1.0, 0.1, 3usize, 0.7);
        let s = lossy_cavity(&LossyCavityParams { omega_c: w, kappa, n0: n });
        let sys = s.realize(&Representation::fock(&[6])).unwrap();
        let v = StateVector::product(&sys.initial);
        let out = propagate_interval(&v, &sys.effective_hamiltonian(), dt, Tolerances::new(1e-10, 1e-12)).unwrap();
        let expect = (c64(0.0, -1.0) * c64(w, -kappa / 2.0) * (n as f64 * dt)).exp();
        assert!((out.amplitudes[n] - expect).norm() < 1e-8);
        assert!((out.norm_sqr() - (-kappa * n as f64 * dt).exp()).abs() < 1e-8, "{}", out.norm_sqr());
    }

    #[test]
    fn hermitian_limit_preserves_norm() {
        let s = jaynes_cummings(&JaynesCummingsParams { kappa: 0.0, gamma: 0.0, ..Default::default() });
        let sys = s.realize(&Representation::fock(&[2, 25])).unwrap();
        let v = StateVector::product(&sys.initial);
        let out = propagate_interval(&v, &sys.effective_hamiltonian(), 5.0, Tolerances::new(1e-10, 1e-12)).unwrap();
        assert!((out.norm_sqr() - v.norm_sqr()).abs() < 1e-9, "{}", out.norm_sqr());
    }

    #[test]
    fn lossless_rabi_swaps_excitation() {
        let g = 0.13;
        let s = rabi(&RabiParams { g, kappa: 0.0, gamma: 0.0, ..Default::default() });
        let sys = s.realize(&Representation::fock(&[2, 2])).unwrap();
        let v = StateVector::product(&sys.initial);
        let out =
            propagate_interval(&v, &sys.effective_hamiltonian(), std::f64::consts::PI / (2.0 * g), Tolerances::default())
                .unwrap();
        // |0⟩_b|1⟩_a has flat index 1.
        assert!(out.amplitudes[1].norm_sqr() > 1.0 - 1e-6);
    }
}
