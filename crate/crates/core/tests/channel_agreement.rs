use grover_decoherence::density::exact_series;
use grover_decoherence::observables::Observable;
use grover_decoherence::{run_ensemble, EnsembleSpec, GroverCircuit, GroverConfig, NoiseModel, TickMode};

fn agreement(n_q: usize, tau: usize, mode: TickMode, gamma: f64, m: usize, seed: u64) -> f64 {
    let circuit = GroverCircuit::build(GroverConfig::new(n_q, tau).unwrap())
        .unwrap()
        .with_tick_mode(mode)
        .unwrap();
    let noise = NoiseModel::new(gamma).unwrap();
    let t_max = 20;
    let exact = exact_series(&circuit, &noise, t_max).unwrap();
    let ens = run_ensemble(&circuit, &noise, EnsembleSpec::new(t_max, m, seed)).unwrap();
    let mut inside = 0;
    let mut total = 0;
    for t in 1..=t_max {
        for obs in Observable::ALL {
            let z = (ens.mean(t, obs) - exact.records[t].mean.get(obs)).abs();
            total += 1;
            if z <= 3.0 * ens.stderr(t, obs) + 1e-9 {
                inside += 1;
            }
        }
    }
    inside as f64 / total as f64
}

#[test]
fn ensemble_matches_density_matrix() {
    assert!(agreement(3, 5, TickMode::Actual, 0.005, 3000, 11) >= 0.9);
    assert!(agreement(3, 2, TickMode::Paper, 0.01, 3000, 12) >= 0.9);
}

#[test]
fn corrupted_unraveling_is_detected() {
    let circuit = GroverCircuit::build(GroverConfig::new(3, 6).unwrap()).unwrap();
    let t_max = 20;
    let exact = exact_series(&circuit, &NoiseModel::new(0.01).unwrap(), t_max).unwrap();
    let bad = NoiseModel::corrupted(0.01, 0.0).unwrap();
    let ens = run_ensemble(&circuit, &bad, EnsembleSpec::new(t_max, 3000, 4)).unwrap();
    let worst = (1..=t_max)
        .map(|t| {
            let d = ens.mean(t, Observable::FourState) - exact.records[t].mean.get(Observable::FourState);
            d.abs() / ens.stderr(t, Observable::FourState).max(1e-12)
        })
        .fold(0.0, f64::max);
    assert!(worst > 5.0, "{worst}");
}

#[test]
fn same_seed_same_series() {
    let circuit = GroverCircuit::build(GroverConfig::new(4, 9).unwrap()).unwrap();
    let noise = NoiseModel::new(0.002).unwrap();
    let spec = EnsembleSpec::new(10, 200, 99);
    let a = run_ensemble(&circuit, &noise, spec).unwrap();
    let b = run_ensemble(&circuit, &noise, spec.with_workers(2)).unwrap();
    assert_eq!(a.series(), b.series());
}
