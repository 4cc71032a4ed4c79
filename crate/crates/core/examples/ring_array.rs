//! Ring of four coupled oscillators in a lossy cavity, propagated with
//! MCTDH on 41-point DVR grids (four SPFs per DOF), compared against the
//! master equation in a truncated Fock basis.
//!
//! `cargo run --release --example ring_array -- [n_trajectories] [high]`
//! (`high` starts from |1,1,0,0,2⟩ instead of |0,0,0,0,2⟩).

use std::time::Instant;

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{ring_array, OscillatorArrayParams};
use mcmctdh::model::Representation;
use mcmctdh::ode::Tolerances;
use mcmctdh::oracle;

fn main() -> mcmctdh::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n_traj: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let high = args.get(2).is_some_and(|s| s == "high");
    let mut p = OscillatorArrayParams::ring();
    if high {
        p.initial = vec![1, 1, 0, 0, 2];
    }
    let scenario = ring_array(&p)?;
    let tau = scenario.time_unit;
    let grids = scenario.realize(&Representation::grids(&scenario, 41)?)?;
    let propagator = Propagator::mctdh(vec![4; 5]);
    let opts = EngineOptions::new(0.05 * tau, 20.0 * tau);

    let clock = Instant::now();
    let ens = mcwf::run_ensemble(&grids, &propagator, &opts, 1, n_traj)?;
    println!(
        "{n_traj} MCTDH trajectories in {:.1} s ({} jumps)",
        clock.elapsed().as_secs_f64(),
        ens.jump_count()
    );

    let (nu_max, n_max) = if high { (5, 7) } else { (3, 5) };
    let fock = scenario.realize(&Representation::fock_truncated(&scenario, nu_max, n_max))?;
    let clock = Instant::now();
    let reference = oracle::solve(&fock, &ens.times, Tolerances::new(1e-10, 1e-12), true)?;
    println!(
        "master equation on {} of {} states in {:.1} s",
        reference.basis_dim,
        reference.full_dim,
        clock.elapsed().as_secs_f64()
    );

    let n_a = ens.column("n_a").unwrap();
    let n_ref = reference.column("n_a").unwrap();
    println!("{:>8} {:>10} {:>10}", "t/tau", "n_a", "oracle");
    for i in (0..ens.times.len()).step_by(20) {
        println!("{:8.2} {:10.5} {:10.5}", ens.times[i] / tau, n_a[i], n_ref[i]);
    }
    let rms = mcwf::rms_deviation(&n_a, &n_ref) / n_ref[0].max(1e-12);
    println!("RMS deviation of n_a relative to its initial value: {:.2}%", 100.0 * rms);
    Ok(())
}
