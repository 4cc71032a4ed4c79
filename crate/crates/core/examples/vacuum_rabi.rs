//! Vacuum Rabi oscillations between an excited oscillator and an empty
//! lossy cavity, for two ensemble sizes, against the master equation.
//!
//! `cargo run --release --example vacuum_rabi`

use mcmctdh::mcwf::{self, EngineOptions, Propagator};
use mcmctdh::model::presets::{rabi, RabiParams};
use mcmctdh::model::Representation;
use mcmctdh::ode::Tolerances;
use mcmctdh::oracle;

fn main() -> mcmctdh::Result<()> {
    let scenario = rabi(&RabiParams::default());
    let tau = scenario.time_unit;
    let system = scenario.realize(&Representation::fock_truncated(&scenario, 3, 3))?;
    let opts = EngineOptions::auto(30.0 * tau);
    let small = mcwf::run_ensemble(&system, &Propagator::exact(), &opts, 1, 50)?;
    let large = mcwf::run_ensemble(&system, &Propagator::exact(), &opts, 1, 200)?;
    let reference = oracle::solve(&system, &large.times, Tolerances::new(1e-10, 1e-12), true)?;

    let (s, l, r) = (small.column("n_b").unwrap(), large.column("n_b").unwrap(), reference.column("n_b").unwrap());
    println!("{:>6} {:>9} {:>9} {:>9}", "t/tau", "n_T=50", "n_T=200", "oracle");
    for i in (0..r.len()).step_by((r.len() / 15).max(1)) {
        println!("{:6.1} {:9.4} {:9.4} {:9.4}", large.times[i] / tau, s[i], l[i], r[i]);
    }
    println!(
        "RMS deviation of n_b: {:.4} (n_T=50), {:.4} (n_T=200)",
        mcwf::rms_deviation(&s, &r),
        mcwf::rms_deviation(&l, &r)
    );
    Ok(())
}
