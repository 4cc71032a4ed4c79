//! Harmonic-oscillator DVR: grid spectrum, ladder operators and Fock or
//! coherent states represented on the grid.
//!
//! `cargo run --release --example dvr_grid -- [n_points]`

use mcmctdh::dvr::{build_ho_dvr, coherent_state, fock_state, ladder_operators, number_operator};
use mcmctdh::C64;
use nalgebra::DVector;

fn main() -> mcmctdh::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(41);
    let grid = build_ho_dvr(n, 1.0)?;
    let eig = grid.hamiltonian().symmetric_eigen();
    let mut levels: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    levels.sort_by(f64::total_cmp);
    println!("{n}-point grid on [{:.3}, {:.3}]", grid.points[0], grid.points[n - 1]);
    for (k, e) in levels.iter().take(10).enumerate() {
        println!("  level {k}: {e:.10} (error {:.1e})", (e - (k as f64 + 0.5)).abs());
    }
    let (a, _) = ladder_operators(&grid, 0)?;
    let num = number_operator(&grid, 0)?;
    let expect = |v: &[C64], m: &nalgebra::DMatrix<C64>| {
        let v = DVector::from_column_slice(v);
        (v.adjoint() * m * &v)[(0, 0)].re / v.norm_squared()
    };
    let ground = fock_state(&grid, 0)?;
    println!("|a|0>| = {:.2e}", (a.matrix() * DVector::from_column_slice(&ground)).norm());
    for k in [1, 4, 8] {
        println!("<{k}|n|{k}> = {:.8}", expect(&fock_state(&grid, k)?, num.matrix()));
    }
    let alpha = C64::new(5f64.sqrt(), 0.0);
    println!("coherent |alpha|^2 = 5: <n> = {:.8}", expect(&coherent_state(&grid, alpha)?, num.matrix()));
    Ok(())
}
