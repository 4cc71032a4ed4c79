use mcmctdh::exact::{propagate_interval, StateVector};
use mcmctdh::mcwf::{self, EngineOptions, Propagator, WaveFunction};
use mcmctdh::model::presets::*;
use mcmctdh::model::{Representation, System};
use mcmctdh::ode::Tolerances;
use mcmctdh::operator::{OneBodyOperator, SumOfProducts};
use mcmctdh::oracle::{self, Lindbladian};
use mcmctdh::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rabi_system() -> System {
    let s = rabi(&RabiParams::default());
    s.realize(&Representation::fock_truncated(&s, 3, 3)).unwrap()
}

#[test]
fn state_is_normalized_after_every_interval() {
    let sys = rabi_system();
    let opts = EngineOptions::auto(20.0);
    let dt = mcwf::estimate_dt(&sys, &Propagator::exact(), &opts).unwrap();
    for k in 0..10 {
        let mut worst = 0.0f64;
        mcwf::run_trajectory_with(&sys, &Propagator::exact(), &opts, dt, k, mcwf::trajectory_seed(3, k), |_, w| {
            worst = worst.max((w.norm_squared() - 1.0).abs());
        })
        .unwrap();
        assert!(worst <= 1e-9, "trajectory {k}: {worst}");
    }
}

#[test]
fn mctdh_state_is_normalized_after_every_interval() {
    let s = rabi(&RabiParams::default());
    let sys = s.realize(&Representation::grids(&s, 15).unwrap()).unwrap();
    let opts = EngineOptions::auto(40.0);
    let dt = mcwf::estimate_dt(&sys, &Propagator::mctdh(vec![2, 2]), &opts).unwrap();
    let mut worst = 0.0f64;
    for k in 0..4 {
        mcwf::run_trajectory_with(&sys, &Propagator::mctdh(vec![2, 2]), &opts, dt, k, mcwf::trajectory_seed(5, k), |_, w| {
            worst = worst.max((w.norm_squared() - 1.0).abs());
        })
        .unwrap();
    }
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn without_channels_trajectories_follow_closed_evolution() {
    let sys = rabi_system().without_channels();
    let opts = EngineOptions::new(0.5, 10.0);
    let t = mcwf::run_trajectory(&sys, &Propagator::exact(), &opts, 0.5, 0, 9).unwrap();
    assert!(t.jumps.is_empty());
    let v = StateVector::product(&sys.initial);
    let closed = propagate_interval(&v, &sys.hamiltonian, 10.0, Tolerances::new(1e-11, 1e-13)).unwrap();
    let n_b = closed.expectation(&sys.observables[0].operator).re;
    assert!((t.observables[(t.times.len() - 1, 0)] - n_b).abs() < 1e-6);
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let sys = rabi_system();
    let opts = EngineOptions::auto(10.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mcwf::run_ensemble(&sys, &Propagator::exact(), &opts, 11, 24).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.mean, b.mean);
    for (x, y) in a.trajectories.iter().zip(&b.trajectories) {
        assert_eq!(x.jumps, y.jumps);
    }
}

#[test]
fn channel_frequencies_follow_integrated_rates() {
    let sys = rabi_system();
    let t_final = 60.0;
    let opts = EngineOptions::auto(t_final);
    let ens = mcwf::run_ensemble(&sys, &Propagator::exact(), &opts, 2, 1500).unwrap();
    // Expected jumps per trajectory on channel j: ∫ ⟨L_j†L_j⟩ dt from the
    // master equation.
    let lind = Lindbladian::for_system(&sys, true).unwrap();
    let rho0 = lind.pure_state(&sys.initial_vector()).unwrap();
    let mut rates = vec![Vec::new(); sys.channels.len()];
    oracle::propagate_density(&lind, &rho0, &ens.times, Tolerances::new(1e-10, 1e-12), |_, rho| {
        for (j, ch) in sys.channels.iter().enumerate() {
            rates[j].push(rho.expectation(&ch.ldag_l).re);
        }
        Ok(())
    })
    .unwrap();
    let dt = ens.dt;
    for (j, ch) in sys.channels.iter().enumerate() {
        let r = &rates[j];
        let expected: f64 = r.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
        let counts: Vec<f64> = ens
            .trajectories
            .iter()
            .map(|t| t.jumps.iter().filter(|jr| jr.channel == j).count() as f64)
            .collect();
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - expected).abs() <= 3.0 * se, "{}: {mean} vs {expected} ± {se}", ch.label);
    }
}

fn random_hermitian(d: usize, vals: &[f64]) -> DMatrix<C64> {
    let m = DMatrix::from_fn(d, d, |i, j| C64::new(vals[(2 * (i * d + j)) % vals.len()], vals[(2 * (i * d + j) + 1) % vals.len()]));
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oracle_keeps_rho_positive_and_normalized(
        d0 in 2usize..=4,
        d1 in 1usize..=4,
        rates in (0.0f64..0.5, 0.0f64..0.5),
        vals in prop::collection::vec(-1.0f64..1.0, 20..60),
    ) {
        let dims = [d0, d1];
        let mut h = SumOfProducts::zero(&dims);
        h.add_term(C64::new(1.0, 0.0), vec![OneBodyOperator::new(0, "h0", random_hermitian(d0, &vals))]).unwrap();
        h.add_term(C64::new(1.0, 0.0), vec![OneBodyOperator::new(1, "h1", random_hermitian(d1, &vals[5..]))]).unwrap();
        let x0 = OneBodyOperator::new(0, "x0", random_hermitian(d0, &vals[7..]));
        let x1 = OneBodyOperator::new(1, "x1", random_hermitian(d1, &vals[9..]));
        h.add_term(C64::new(0.3, 0.0), vec![x0, x1]).unwrap();
        let lower = |d: usize, dof: usize, rate: f64| {
            let m = DMatrix::from_fn(d, d, |i, j| if j == i + 1 { C64::new((rate * j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
            SumOfProducts::product(&dims, C64::new(1.0, 0.0), vec![OneBodyOperator::new(dof, "L", m)]).unwrap()
        };
        let l0 = lower(d0, 0, rates.0);
        let l1 = lower(d1, 1, rates.1);
        let mut heff = h.clone();
        for l in [&l0, &l1] {
            heff = heff.plus(&l.adjoint().compose(l).unwrap().scaled(C64::new(0.0, -0.5))).unwrap();
        }
        let lind = Lindbladian::new(&heff, &[&l0, &l1], &[], false).unwrap();
        let n = d0 * d1;
        let mut psi = vec![C64::new(0.0, 0.0); n];
        psi[n - 1] = C64::new(1.0, 0.0);
        psi[0] = C64::new(0.0, 1.0);
        let s = 0.5f64.sqrt();
        psi.iter_mut().for_each(|z| *z *= s);
        let rho0 = lind.pure_state(&psi).unwrap();
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let mut worst_eig = 0.0f64;
        let mut worst_trace = 0.0f64;
        oracle::propagate_density(&lind, &rho0, &times, Tolerances::new(1e-10, 1e-12), |_, rho| {
            let herm = (&rho.data + rho.data.adjoint()) * C64::new(0.5, 0.0);
            let min = herm.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            worst_eig = worst_eig.min(min);
            worst_trace = worst_trace.max((rho.trace() - C64::new(1.0, 0.0)).norm());
            Ok(())
        }).unwrap();
        prop_assert!(worst_eig >= -1e-8, "{}", worst_eig);
        prop_assert!(worst_trace <= 1e-8, "{}", worst_trace);
    }

    #[test]
    fn weighted_channel_choice_is_proportional(
        weights in prop::collection::vec(0.01f64..1.0, 2..5),
        seed in any::<u64>(),
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let draws = 20000;
        let mut counts = vec![0usize; weights.len()];
        for _ in 0..draws {
            counts[mcwf::select_channel(&weights, 0.0, mcwf::ChannelSelection::Weighted, &mut rng)] += 1;
        }
        let total: f64 = weights.iter().sum();
        for (c, w) in counts.iter().zip(&weights) {
            let p = w / total;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            prop_assert!((*c as f64 / draws as f64 - p).abs() <= 5.0 * se);
        }
    }

    #[test]
    fn jump_probabilities_are_nonnegative_and_scale_with_dt(
        vals in prop::collection::vec(-1.0f64..1.0, 8..40),
        dt in 0.001f64..0.5,
    ) {
        let sys = rabi_system();
        let n: usize = sys.dims().iter().product();
        let amps: Vec<C64> = (0..n).map(|i| C64::new(vals[(2 * i) % vals.len()], vals[(2 * i + 1) % vals.len()])).collect();
        let v = StateVector::new(amps, sys.dims()).unwrap();
        prop_assume!(v.norm_squared() > 1e-6);
        let a = mcwf::jump_probabilities(&v, &sys.channels, dt).unwrap();
        let b = mcwf::jump_probabilities(&v, &sys.channels, 2.0 * dt).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(*x >= 0.0);
            prop_assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y));
        }
    }
}
