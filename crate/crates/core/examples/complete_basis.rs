//! With as many SPFs as grid points MCTDH is exact: the same seeds give the
//! same trajectories through both propagators, jumps included.
//!
//! `cargo run --release --example complete_basis`

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{rabi, RabiParams};
use mcmctdh::model::Representation;
use mcmctdh::ode::Tolerances;

fn main() -> mcmctdh::Result<()> {
    let scenario = rabi(&RabiParams::default());
    let points = 11;
    let grids = scenario.realize(&Representation::grids(&scenario, points)?)?;
    let mut opts = EngineOptions::auto(10.0 * scenario.time_unit);
    opts.tol = Tolerances::new(1e-10, 1e-12);
    let dt = mcwf::estimate_dt(&grids, &Propagator::exact(), &opts)?;
    for (label, spfs) in [("complete", vec![points, points]), ("two SPFs", vec![2, 2]), ("one SPF", vec![1, 1])] {
        let mut worst = 0.0f64;
        for k in 0..5 {
            let seed = mcwf::trajectory_seed(1, k);
            let e = mcwf::run_trajectory(&grids, &Propagator::exact(), &opts, dt, k, seed)?;
            let m = mcwf::run_trajectory(&grids, &Propagator::mctdh(spfs.clone()), &opts, dt, k, seed)?;
            worst = worst.max((&e.observables - &m.observables).amax());
        }
        println!("{label:>9}: largest observable difference over 5 trajectories {worst:.2e}");
    }
    Ok(())
}
