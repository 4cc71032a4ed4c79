//! Harmonic-oscillator discrete variable representation and the one-body
//! operators built on it.
//!
//! Coordinates are in oscillator units with unit mass: a grid of frequency
//! `ω` has points `x_i = q_i / √ω`, where `q_i` are the Gauss–Hermite nodes.
//! Vectors on a grid are coefficients in the orthonormal DVR basis, so the
//! plain Euclidean inner product is the grid inner product.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::operator::OneBodyOperator;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    HarmonicOscillator,
    /// Two flat potentials standing in for a spin-1/2.
    TwoLevel,
}

#[derive(Clone, Debug)]
pub struct DvrGrid {
    pub n_points: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// `-½ d²/dx²` in the DVR basis.
    pub kinetic: DMatrix<f64>,
    /// `d/dx` in the DVR basis.
    pub derivative: DMatrix<f64>,
    /// Column `n` holds the n-th oscillator eigenfunction on the grid.
    pub eigenbasis: DMatrix<f64>,
    /// Diagonal potential on the grid.
    pub potential: Vec<f64>,
    pub frequency: f64,
    pub mass: f64,
    pub kind: GridKind,
}

impl DvrGrid {
    /// Grid Hamiltonian `kinetic + diag(potential)`.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let mut h = self.kinetic.clone();
        for i in 0..self.n_points {
            h[(i, i)] += self.potential[i];
        }
        h
    }

    /// Position operator (diagonal on the grid).
    pub fn position(&self, dof: usize) -> OneBodyOperator {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.n_points,
            self.points.iter().map(|&x| C64::new(x, 0.0)),
        ));
        OneBodyOperator::new(dof, "x", m)
    }

    /// The n-th eigenfunction of the grid Hamiltonian's reference basis.
    pub fn eigenfunction(&self, n: usize) -> Vec<C64> {
        self.eigenbasis.column(n).iter().map(|&x| C64::new(x, 0.0)).collect()
    }
}

/// `χ_0 .. χ_{n_max}` at `q` (dimensionless Hermite functions).
pub fn hermite_functions(n_max: usize, q: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let chi0 = PI.powf(-0.25) * (-0.5 * q * q).exp();
    out.push(chi0);
    if n_max >= 1 {
        out.push(2f64.sqrt() * q * chi0);
    }
    for n in 1..n_max {
        let next = (2.0 / (n as f64 + 1.0)).sqrt() * q * out[n]
            - (n as f64 / (n as f64 + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Build the harmonic-oscillator DVR with `n_points` points for an oscillator
/// of the given frequency.
pub fn build_ho_dvr(n_points: usize, frequency: f64) -> Result<DvrGrid> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!("DVR needs at least 2 points, got {n_points}")));
    }
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::InvalidArgument(format!("DVR frequency must be positive, got {frequency}")));
    }
    let n = n_points;
    // Position in the Hermite basis: <m|q|m+1> = sqrt((m+1)/2).
    let mut x_fbr = DMatrix::<f64>::zeros(n, n);
    for m in 0..n - 1 {
        let v = ((m as f64 + 1.0) / 2.0).sqrt();
        x_fbr[(m, m + 1)] = v;
        x_fbr[(m + 1, m)] = v;
    }
    let eig = SymmetricEigen::new(x_fbr);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let q: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    // transform[(i, n)] = <DVR_i|χ_n>, with the sign fixed so that χ_0 > 0.
    let mut transform = DMatrix::<f64>::zeros(n, n);
    for (row, &col) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            transform[(row, k)] = sign * v[k];
        }
    }

    // d/dq and d²/dq² in the Hermite basis.
    let mut d1 = DMatrix::<f64>::zeros(n, n);
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        if k >= 1 {
            d1[(k - 1, k)] = (kf / 2.0).sqrt();
        }
        if k + 1 < n {
            d1[(k + 1, k)] = -((kf + 1.0) / 2.0).sqrt();
        }
        d2[(k, k)] = -(2.0 * kf + 1.0) / 2.0;
        if k >= 2 {
            d2[(k - 2, k)] = (kf * (kf - 1.0)).sqrt() / 2.0;
        }
        if k + 2 < n {
            d2[(k + 2, k)] = ((kf + 1.0) * (kf + 2.0)).sqrt() / 2.0;
        }
    }
    let to_dvr = |m: &DMatrix<f64>| &transform * m * transform.transpose();
    let mut kinetic = to_dvr(&d2) * (-0.5 * frequency);
    kinetic = (&kinetic + kinetic.transpose()) * 0.5;
    let derivative = to_dvr(&d1) * frequency.sqrt();

    let scale = frequency.sqrt();
    let points: Vec<f64> = q.iter().map(|&qi| qi / scale).collect();
    let weights: Vec<f64> = q
        .iter()
        .enumerate()
        .map(|(i, &qi)| {
            let chi0 = PI.powf(-0.25) * (-0.5 * qi * qi).exp();
            (transform[(i, 0)] / chi0).powi(2) / scale
        })
        .collect();
    let potential = points.iter().map(|&x| 0.5 * frequency * frequency * x * x).collect();

    Ok(DvrGrid {
        n_points: n,
        points,
        weights,
        kinetic,
        derivative,
        eigenbasis: transform,
        potential,
        frequency,
        mass: 1.0,
        kind: GridKind::HarmonicOscillator,
    })
}

/// `(â, â†)` with `â = √(ω/2)(x̂ + i p̂/ω)`, `p̂ = -i d/dx`.
pub fn ladder_operators(grid: &DvrGrid, dof: usize) -> Result<(OneBodyOperator, OneBodyOperator)> {
    if grid.kind != GridKind::HarmonicOscillator {
        return Err(Error::InvalidArgument("ladder operators need an oscillator grid".into()));
    }
    let w = grid.frequency;
    let n = grid.n_points;
    let pref = (w / 2.0).sqrt();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let x = if i == j { grid.points[i] } else { 0.0 };
        // i p/ω = (d/dx)/ω
        C64::new(pref * (x + grid.derivative[(i, j)] / w), 0.0)
    });
    let a = OneBodyOperator::new(dof, "a", a);
    let adag = a.adjoint();
    Ok((a, adag))
}

/// `â†â`, Hermitian-symmetrized.
pub fn number_operator(grid: &DvrGrid, dof: usize) -> Result<OneBodyOperator> {
    let (a, adag) = ladder_operators(grid, dof)?;
    let mut n = adag.compose(&a).symmetrized();
    n.label = "n".into();
    Ok(n)
}

/// Pauli operators of a two-level DOF.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub sigma_z: OneBodyOperator,
    pub sigma_plus: OneBodyOperator,
    pub sigma_minus: OneBodyOperator,
}

/// Two-level "grid": index 0 is the ground level at `-ω₀/2`, index 1 the
/// excited level at `+ω₀/2`, with no kinetic coupling.
pub fn spin_grid(omega0: f64, dof: usize) -> Result<(DvrGrid, SpinOperators)> {
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(Error::InvalidArgument(format!("spin splitting must be positive, got {omega0}")));
    }
    let grid = DvrGrid {
        n_points: 2,
        points: vec![0.0, 1.0],
        weights: vec![1.0, 1.0],
        kinetic: DMatrix::zeros(2, 2),
        derivative: DMatrix::zeros(2, 2),
        eigenbasis: DMatrix::identity(2, 2),
        potential: vec![-0.5 * omega0, 0.5 * omega0],
        frequency: omega0,
        mass: 1.0,
        kind: GridKind::TwoLevel,
    };
    Ok((grid, spin_operators(dof)))
}

pub fn spin_operators(dof: usize) -> SpinOperators {
    let z = |re: f64| C64::new(re, 0.0);
    SpinOperators {
        sigma_z: OneBodyOperator::new(dof, "σz", DMatrix::from_row_slice(2, 2, &[z(-1.0), z(0.0), z(0.0), z(1.0)])),
        sigma_plus: OneBodyOperator::new(dof, "σ+", DMatrix::from_row_slice(2, 2, &[z(0.0), z(0.0), z(1.0), z(0.0)])),
        sigma_minus: OneBodyOperator::new(dof, "σ-", DMatrix::from_row_slice(2, 2, &[z(0.0), z(1.0), z(0.0), z(0.0)])),
    }
}

fn normalized(mut v: Vec<C64>) -> Vec<C64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

/// Fock state `|n⟩` from Hermite functions evaluated on the grid points.
pub fn fock_state(grid: &DvrGrid, n: usize) -> Result<Vec<C64>> {
    if n >= grid.n_points {
        return Err(Error::InvalidArgument(format!(
            "Fock state |{n}⟩ needs more than {} grid points",
            grid.n_points
        )));
    }
    if grid.kind == GridKind::TwoLevel {
        let mut v = vec![C64::new(0.0, 0.0); 2];
        v[n] = C64::new(1.0, 0.0);
        return Ok(v);
    }
    let s = grid.frequency.sqrt();
    let v = grid
        .points
        .iter()
        .zip(&grid.weights)
        .map(|(&x, &w)| {
            let chi = hermite_functions(n, x * s)[n];
            C64::new((w * s).sqrt() * chi, 0.0)
        })
        .collect();
    Ok(normalized(v))
}

/// Coherent state `|α⟩`: a displaced Gaussian evaluated on the grid points.
pub fn coherent_state(grid: &DvrGrid, alpha: C64) -> Result<Vec<C64>> {
    if grid.kind != GridKind::HarmonicOscillator {
        return Err(Error::InvalidArgument("coherent states need an oscillator grid".into()));
    }
    let s = grid.frequency.sqrt();
    let q0 = 2f64.sqrt() * alpha.re;
    let p0 = 2f64.sqrt() * alpha.im;
    let v = grid
        .points
        .iter()
        .zip(&grid.weights)
        .map(|(&x, &w)| {
            let q = x * s;
            let amp = PI.powf(-0.25) * (-0.5 * (q - q0).powi(2)).exp();
            C64::from_polar((w * s).sqrt() * amp, p0 * q)
        })
        .collect();
    Ok(normalized(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expect(op: &OneBodyOperator, v: &[C64]) -> C64 {
        let ov = op.apply_vec(v);
        v.iter().zip(&ov).map(|(a, b)| a.conj() * b).sum()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_ho_dvr(1, 1.0).is_err());
        assert!(build_ho_dvr(10, 0.0).is_err());
        assert!(build_ho_dvr(10, -2.0).is_err());
        assert!(spin_grid(0.0, 0).is_err());
    }

    #[test]
    fn two_point_grid_is_symmetric() {
        let g = build_ho_dvr(2, 1.0).unwrap();
        assert!((g.points[0] + g.points[1]).abs() < 1e-14);
        assert!((g.points[1] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(g.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn grid_invariants() {
        for &(n, w) in &[(41, 1.0), (20, 2.5), (7, 0.3)] {
            let g = build_ho_dvr(n, w).unwrap();
            assert!(g.points.windows(2).all(|p| p[1] > p[0]));
            assert!(g.weights.iter().all(|&x| x > 0.0));
            assert!((&g.kinetic - g.kinetic.transpose()).amax() < 1e-13);
            // Gauss-Hermite weights integrate the ground density to one.
            let s = w.sqrt();
            let total: f64 = g
                .points
                .iter()
                .zip(&g.weights)
                .map(|(&x, &wt)| wt * s * hermite_functions(0, x * s)[0].powi(2))
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_reproduces_oscillator_levels() {
        for &(n, w) in &[(41usize, 1.0), (41, 1.7), (16, 0.5)] {
            let g = build_ho_dvr(n, w).unwrap();
            let mut ev: Vec<f64> = SymmetricEigen::new(g.hamiltonian()).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            for (k, e) in ev.iter().take(n / 2).enumerate() {
                let exact = w * (k as f64 + 0.5);
                assert!(((e - exact) / exact).abs() < 1e-6, "n={n} level {k}: {e} vs {exact}");
            }
        }
    }

    #[test]
    fn hermite_samples_match_transform() {
        let g = build_ho_dvr(41, 1.3).unwrap();
        for n in [0, 1, 5, 8, 20] {
            let v = fock_state(&g, n).unwrap();
            let col = g.eigenfunction(n);
            let overlap: C64 = col.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-8, "n={n} {}", overlap.norm());
        }
    }

    #[test]
    fn annihilation_kills_ground_state() {
        let g = build_ho_dvr(41, 1.0).unwrap();
        let (a, _) = ladder_operators(&g, 0).unwrap();
        let v0 = fock_state(&g, 0).unwrap();
        let av: f64 = a.apply_vec(&v0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(av < 1e-8);
    }

    #[test]
    fn number_operator_on_fock_states() {
        let g = build_ho_dvr(41, 1.0).unwrap();
        let n_op = number_operator(&g, 0).unwrap();
        assert!(n_op.hermiticity_deviation() < 1e-12);
        for n in 0..=8 {
            let v = fock_state(&g, n).unwrap();
            let e = expect(&n_op, &v);
            assert!((e.re - n as f64).abs() < 1e-6 && e.im.abs() < 1e-12, "n={n}: {e}");
        }
        let v0 = fock_state(&g, 0).unwrap();
        assert!(expect(&n_op, &v0).re.abs() < 1e-8);
    }

    #[test]
    fn ladder_commutator_on_low_subspace() {
        let g = build_ho_dvr(41, 0.8).unwrap();
        let (a, adag) = ladder_operators(&g, 0).unwrap();
        let comm = a.matrix() * adag.matrix() - adag.matrix() * a.matrix();
        let basis = g.eigenbasis.map(|x| C64::new(x, 0.0));
        let low = basis.columns(0, 20);
        let restricted = low.adjoint() * &comm * low;
        let dev = (restricted - DMatrix::<C64>::identity(20, 20)).camax();
        assert!(dev < 1e-6, "{dev}");
        assert!((adag.matrix() - a.matrix().adjoint()).camax() == 0.0);
    }

    #[test]
    fn coherent_state_photon_number() {
        let g = build_ho_dvr(41, 1.0).unwrap();
        let n_op = number_operator(&g, 0).unwrap();
        let alpha = C64::new(5f64.sqrt(), 0.0);
        let v = coherent_state(&g, alpha).unwrap();
        assert!((expect(&n_op, &v).re - 5.0).abs() < 1e-6);
        // Coherent states are eigenstates of â.
        let (a, _) = ladder_operators(&g, 0).unwrap();
        let av = a.apply_vec(&v);
        let res: f64 = av.iter().zip(&v).map(|(x, y)| (x - alpha * y).norm_sqr()).sum::<f64>().sqrt();
        assert!(res < 1e-6, "{res}");
    }

    #[test]
    fn spin_algebra() {
        let (g, s) = spin_grid(1.3, 0).unwrap();
        assert_eq!(g.n_points, 2);
        let z = s.sigma_z.matrix();
        assert_eq!(z[(0, 0)].re, -1.0);
        assert_eq!(z[(1, 1)].re, 1.0);
        let pm = s.sigma_plus.compose(&s.sigma_minus);
        assert_eq!(pm.matrix()[(1, 1)].re, 1.0);
        assert_eq!(pm.matrix()[(0, 0)].re, 0.0);
        let h = g.hamiltonian();
        assert!((h[(0, 0)] + 0.65).abs() < 1e-15 && (h[(1, 1)] - 0.65).abs() < 1e-15);
        assert!(s.sigma_z.hermiticity_deviation() < 1e-12);
    }
}
