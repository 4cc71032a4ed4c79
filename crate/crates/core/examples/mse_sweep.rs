//! Convergence of the ensemble mean with the number of trajectories for the
//! lossy cavity: mean-squared error falls as 1/n_T.
//!
//! `cargo run --release --example mse_sweep`

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{lossy_cavity, LossyCavityParams};
use mcmctdh::model::Representation;

fn main() -> mcmctdh::Result<()> {
    let p = LossyCavityParams::default();
    let scenario = lossy_cavity(&p);
    let system = scenario.realize(&Representation::fock(&[p.n0 + 2]))?;
    let opts = EngineOptions::auto(60.0 * scenario.time_unit);
    let pool = mcwf::run_ensemble(&system, &Propagator::exact(), &opts, 1, 1600)?;
    let exact: Vec<f64> = pool.times.iter().map(|t| p.n0 as f64 * (-p.kappa * t).exp()).collect();
    println!("{:>6} {:>12} {:>12}", "n_T", "MSE/range²", "n_T·MSE");
    for n in [25, 50, 100, 200, 400, 800, 1600] {
        let sub = mcwf::average_ensemble(pool.labels.clone(), pool.dt, pool.trajectories[..n].to_vec())?;
        let mse = mcwf::normalized_mse(&sub.column("n_a").unwrap(), &exact);
        println!("{n:>6} {mse:>12.3e} {:>12.3e}", n as f64 * mse);
    }
    Ok(())
}
