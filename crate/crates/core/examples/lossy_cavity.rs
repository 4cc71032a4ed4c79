//! Photon decay from an 8-photon Fock state: ensemble average against the
//! analytic `8 e^{-κt}`, plus the spread of individual trajectories.
//!
//! `cargo run --release --example lossy_cavity -- [n_trajectories]`

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{lossy_cavity, LossyCavityParams};
use mcmctdh::model::Representation;

fn main() -> mcmctdh::Result<()> {
    let n_traj: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let p = LossyCavityParams::default();
    let scenario = lossy_cavity(&p);
    let tau = scenario.time_unit;
    let system = scenario.realize(&Representation::fock(&[p.n0 + 2]))?;
    let ens = mcwf::run_ensemble(&system, &Propagator::exact(), &EngineOptions::auto(60.0 * tau), 1, n_traj)?;

    let exact: Vec<f64> = ens.times.iter().map(|t| p.n0 as f64 * (-p.kappa * t).exp()).collect();
    let mean = ens.column("n_a").unwrap();
    println!("{:>6} {:>9} {:>9} {:>9}", "t/tau", "<n>", "8e^-kt", "stderr");
    let stride = ens.times.len() / 12;
    for i in (0..ens.times.len()).step_by(stride.max(1)) {
        println!("{:6.1} {:9.4} {:9.4} {:9.4}", ens.times[i] / tau, mean[i], exact[i], ens.std_error[(i, 0)]);
    }
    let spread = mcwf::mse_vs_reference(&ens.trajectories, 0, &exact)?;
    let range = exact[0] - exact.last().unwrap();
    println!(
        "{} trajectories, {} jumps; trajectory MSE / range² = {:.2}%, ensemble-mean MSE / range² = {:.1e}",
        ens.n_trajectories,
        ens.jump_count(),
        100.0 * spread.iter().sum::<f64>() / spread.len() as f64 / (range * range),
        mcwf::normalized_mse(&mean, &exact)
    );
    Ok(())
}
