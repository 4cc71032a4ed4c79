//! Collapse and revival of the atomic inversion for a qubit in a coherent
//! cavity field. The qubit is a two-state DOF and the cavity a 41-point DVR
//! grid, propagated with MCTDH.
//!
//! `cargo run --release --example jaynes_cummings -- [n_trajectories]`

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{jaynes_cummings, JaynesCummingsParams};
use mcmctdh::model::Representation;
use mcmctdh::ode::Tolerances;
use mcmctdh::oracle;

fn main() -> mcmctdh::Result<()> {
    let n_traj: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let p = JaynesCummingsParams::default();
    let scenario = jaynes_cummings(&p);
    let tau = scenario.time_unit;
    let grids = scenario.realize(&Representation::grids(&scenario, 41)?)?;
    // A qubit and one mode: two SPFs for the cavity already span the state.
    let ens = mcwf::run_ensemble(&grids, &Propagator::mctdh(vec![2, 4]), &EngineOptions::auto(40.0 * tau), 1, n_traj)?;

    let n_max = (p.alpha * p.alpha + 8.0 * p.alpha).ceil() as usize;
    let fock = scenario.realize(&Representation::fock_truncated(&scenario, 0, n_max))?;
    let reference = oracle::solve(&fock, &ens.times, Tolerances::new(1e-10, 1e-12), true)?;
    let w = ens.column("W").unwrap();
    let w_ref = reference.column("W").unwrap();
    println!("{:>6} {:>8} {:>8}", "t/tau", "W", "oracle");
    for i in (0..w.len()).step_by(8) {
        println!("{:6.2} {:8.4} {:8.4}", ens.times[i] / tau, w[i], w_ref[i]);
    }
    println!("RMS deviation of W over {} trajectories: {:.4}", n_traj, mcwf::rms_deviation(&w, &w_ref));
    Ok(())
}
