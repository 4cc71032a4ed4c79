//! Four uncoupled oscillators sharing one lossy cavity, started from
//! |1,1,0,0,n=0⟩, with the cavity two-photon population.
//!
//! `cargo run --release --example independent_oscillators -- [n_trajectories]`

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{n_oscillators, OscillatorArrayParams};
use mcmctdh::model::Representation;
use mcmctdh::ode::Tolerances;
use mcmctdh::oracle;

fn main() -> mcmctdh::Result<()> {
    let n_traj: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let scenario = n_oscillators(&OscillatorArrayParams::independent())?;
    let tau = scenario.time_unit;
    let rep = Representation::fock_truncated(&scenario, 2, 3);
    let system = scenario.realize(&rep)?;
    let ens = mcwf::run_ensemble(&system, &Propagator::exact(), &EngineOptions::auto(30.0 * tau), 1, n_traj)?;
    let reference = oracle::solve(&system, &ens.times, Tolerances::new(1e-10, 1e-12), true)?;
    println!("product basis d = {}, master equation on {} states", reference.full_dim, reference.basis_dim);

    let labels = ["n_b1", "n_b3", "n_a", "P2_a"];
    print!("{:>6}", "t/tau");
    for l in labels {
        print!(" {l:>8} {:>8}", "oracle");
    }
    println!();
    for i in (0..ens.times.len()).step_by((ens.times.len() / 15).max(1)) {
        print!("{:6.1}", ens.times[i] / tau);
        for l in labels {
            print!(" {:8.4} {:8.4}", ens.column(l).unwrap()[i], reference.column(l).unwrap()[i]);
        }
        println!();
    }
    for l in labels {
        println!("RMS {l}: {:.4}", mcwf::rms_deviation(&ens.column(l).unwrap(), &reference.column(l).unwrap()));
    }
    Ok(())
}
