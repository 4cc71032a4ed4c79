//! The ensemble average of |ψ⟩⟨ψ| over quantum-jump trajectories converges to
//! the Lindblad density matrix; trace distance versus ensemble size.
//!
//! `cargo run --release --example density_equivalence`

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{rabi, RabiParams};
use mcmctdh::model::Representation;
use mcmctdh::ode::Tolerances;
use mcmctdh::oracle::{self, DensityMatrix, Lindbladian};

fn main() -> mcmctdh::Result<()> {
    let scenario = rabi(&RabiParams::default());
    let system = scenario.realize(&Representation::fock_truncated(&scenario, 3, 3))?;
    let opts = EngineOptions::auto(10.0 * scenario.time_unit);
    let dt = mcwf::estimate_dt(&system, &Propagator::exact(), &opts)?;
    let last = (opts.t_final / dt).round() as usize;

    let lind = Lindbladian::for_system(&system, false)?;
    let rho0 = lind.pure_state(&system.initial_vector())?;
    let rho = oracle::propagate_density(&lind, &rho0, &[0.0, last as f64 * dt], Tolerances::new(1e-10, 1e-12), |_, _| Ok(()))?;
    println!("d = {}, t = {:.1} tau, purity of ρ = {:.4}", lind.full_dim(), opts.t_final / scenario.time_unit, rho.purity());
    for n in [25, 100, 400, 1600] {
        let avg = mcwf::ensemble_density(&system, &Propagator::exact(), &opts, 1, n, &[last])?;
        let mc = DensityMatrix { data: avg[0].clone(), ..rho.clone() };
        println!("{n:>5} trajectories: trace distance {:.4}", oracle::trace_distance(&mc, &rho)?);
    }
    Ok(())
}
