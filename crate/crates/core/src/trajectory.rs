//! Quantum-jump trajectories through the gate-decomposed Grover iteration and
//! their ensemble averages.
//!
//! Trajectory `a` of an ensemble draws from the ChaCha8 stream `a` of the
//! master seed, and statistics are accumulated in trajectory-index order, so
//! results are bit-identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grover::{GroverCircuit, GroverConfig};
use crate::noise::{FastTicker, NoiseModel};
use crate::observables::{IdealReference, Observable, ObservableSeries, Sample, SeriesRecord};
use crate::qstate::StateVector;

/// Trajectories evaluated in parallel between two in-order reductions.
const CHUNK: usize = 64;

/// Upper bound on jackknife blocks.
pub const MAX_BLOCKS: usize = 20;

/// Independent random stream for trajectory `index` under `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Summary of one trajectory run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrajectoryOutcome {
    pub jumps: u64,
}

/// Circuit plus precomputed noise tables, shared by all trajectories.
struct Engine<'a> {
    circuit: &'a GroverCircuit,
    ticker: FastTicker,
}

impl<'a> Engine<'a> {
    fn new(circuit: &'a GroverCircuit, noise: &NoiseModel) -> Self {
        Self {
            circuit,
            ticker: FastTicker::new(noise, circuit.config().n_tot()),
        }
    }

    fn run<R, F>(&self, t_max: usize, rng: &mut R, mut recorder: F) -> Result<TrajectoryOutcome>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &StateVector),
    {
        let config = self.circuit.config();
        let mut state = StateVector::uniform_state(config.n_q(), 0)?;
        let mut scale = 1.0;
        let mut jumps = 0u64;
        recorder(0, &state);
        for t in 1..=t_max {
            let amps = state.amplitudes_mut();
            for (gate, &ticks) in self.circuit.gates().iter().zip(self.circuit.ticks_after()) {
                gate.apply_raw(amps);
                for _ in 0..ticks {
                    jumps += self.ticker.tick(amps, &mut scale, rng) as u64;
                }
            }
            if scale != 1.0 {
                amps.iter_mut().for_each(|z| *z *= scale);
                scale = 1.0;
            }
            recorder(t, &state);
        }
        Ok(TrajectoryOutcome { jumps })
    }
}

/// Evolves `|psi_0> (x) |0>` for `t_max` iterations, alternating each gate
/// with its noise ticks. `recorder` sees the normalized state at `t = 0` and
/// after every completed iteration.
pub fn run_trajectory<R, F>(
    circuit: &GroverCircuit,
    noise: &NoiseModel,
    t_max: usize,
    rng: &mut R,
    recorder: F,
) -> Result<TrajectoryOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &StateVector),
{
    Engine::new(circuit, noise).run(t_max, rng, recorder)
}

/// Running mean and sum of squared deviations (Welford), mergeable with
/// Chan's rule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation; zero below two samples.
    pub fn std_dev(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2.max(0.0) / (self.count - 1) as f64).sqrt()
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.std_dev() / (self.count as f64).sqrt()
        }
    }
}

/// Per-iteration statistics of `(w_G, w_4, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    stats: Vec<[RunningStats; 3]>,
}

impl SeriesStats {
    fn new(len: usize) -> Self {
        Self {
            stats: vec![[RunningStats::default(); 3]; len],
        }
    }

    fn push(&mut self, samples: &[Sample]) {
        for (slot, s) in self.stats.iter_mut().zip(samples) {
            for (st, v) in slot.iter_mut().zip(s.0) {
                st.push(v);
            }
        }
    }

    fn merge(&mut self, other: &SeriesStats) {
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.stats.first().map_or(0, |s| s[0].count())
    }

    pub fn get(&self, t: usize, obs: Observable) -> &RunningStats {
        &self.stats[t][obs.index()]
    }

    pub fn to_series(&self) -> ObservableSeries {
        let records = self
            .stats
            .iter()
            .enumerate()
            .map(|(t, s)| SeriesRecord {
                t,
                mean: Sample([s[0].mean(), s[1].mean(), s[2].mean()]),
                stderr: Sample([s[0].std_err(), s[1].std_err(), s[2].std_err()]),
            })
            .collect();
        ObservableSeries { records }
    }
}

/// Ensemble run parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub t_max: usize,
    pub trajectories: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses the global rayon pool, 1 runs inline.
    pub workers: usize,
    pub keep_trajectories: bool,
}

impl EnsembleSpec {
    pub fn new(t_max: usize, trajectories: usize, master_seed: u64) -> Self {
        Self {
            t_max,
            trajectories,
            master_seed,
            workers: 0,
            keep_trajectories: false,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn keep_trajectories(mut self, keep: bool) -> Self {
        self.keep_trajectories = keep;
        self
    }
}

/// Ensemble means and standard errors over `M` trajectories, plus
/// contiguous trajectory blocks for jackknife error estimates.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    config: GroverConfig,
    gamma: f64,
    ticks_per_iteration: usize,
    spec: EnsembleSpec,
    total: SeriesStats,
    blocks: Vec<SeriesStats>,
    trajectories: Option<Vec<Vec<Sample>>>,
    jumps: u64,
}

impl TrajectoryEnsemble {
    pub fn config(&self) -> &GroverConfig {
        &self.config
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ticks_per_iteration(&self) -> usize {
        self.ticks_per_iteration
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn trajectories(&self) -> usize {
        self.spec.trajectories
    }

    pub fn t_max(&self) -> usize {
        self.spec.t_max
    }

    pub fn total_jumps(&self) -> u64 {
        self.jumps
    }

    pub fn mean(&self, t: usize, obs: Observable) -> f64 {
        self.total.get(t, obs).mean()
    }

    pub fn stderr(&self, t: usize, obs: Observable) -> f64 {
        self.total.get(t, obs).std_err()
    }

    pub fn series(&self) -> ObservableSeries {
        self.total.to_series()
    }

    pub fn blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Series with trajectory block `skip` left out.
    pub fn leave_one_out(&self, skip: usize) -> ObservableSeries {
        let mut acc = SeriesStats::new(self.spec.t_max + 1);
        for (b, block) in self.blocks.iter().enumerate() {
            if b != skip {
                acc.merge(block);
            }
        }
        acc.to_series()
    }

    /// Per-trajectory samples, when retained.
    pub fn per_trajectory(&self) -> Option<&[Vec<Sample>]> {
        self.trajectories.as_deref()
    }
}

/// Runs `M` independent trajectories and aggregates `(w_G, w_4, f)` per
/// iteration. The fidelity reference is the noiseless run of the same
/// circuit.
pub fn run_ensemble(circuit: &GroverCircuit, noise: &NoiseModel, spec: EnsembleSpec) -> Result<TrajectoryEnsemble> {
    if spec.trajectories == 0 {
        return Err(Error::InvalidConfig("ensemble needs at least one trajectory".into()));
    }
    let reference = IdealReference::from_circuit(circuit, spec.t_max)?;
    let engine = Engine::new(circuit, noise);
    let m = spec.trajectories;
    let len = spec.t_max + 1;
    let n_blocks = m.min(MAX_BLOCKS);
    let block_of = |a: usize| (a * n_blocks) / m;

    let run_one = |a: usize| -> Result<(Vec<Sample>, u64)> {
        let mut rng = trajectory_rng(spec.master_seed, a as u64);
        let mut samples = Vec::with_capacity(len);
        let outcome = engine.run(spec.t_max, &mut rng, |t, s| {
            samples.push(reference.measure(t, s.amplitudes()));
        })?;
        Ok((samples, outcome.jumps))
    };

    let pool = if spec.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(spec.workers)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut total = SeriesStats::new(len);
    let mut blocks: Vec<SeriesStats> = (0..n_blocks).map(|_| SeriesStats::new(len)).collect();
    let mut kept = spec.keep_trajectories.then(|| Vec::with_capacity(m));
    let mut jumps = 0u64;

    for start in (0..m).step_by(CHUNK) {
        let end = (start + CHUNK).min(m);
        let results: Vec<Result<(Vec<Sample>, u64)>> = match (&pool, spec.workers) {
            (Some(pool), _) => pool.install(|| (start..end).into_par_iter().map(run_one).collect()),
            (None, 1) => (start..end).map(run_one).collect(),
            (None, _) => (start..end).into_par_iter().map(run_one).collect(),
        };
        for (offset, r) in results.into_iter().enumerate() {
            let (samples, j) = r?;
            total.push(&samples);
            blocks[block_of(start + offset)].push(&samples);
            jumps += j;
            if let Some(k) = kept.as_mut() {
                k.push(samples);
            }
        }
    }

    Ok(TrajectoryEnsemble {
        config: *circuit.config(),
        gamma: noise.gamma(),
        ticks_per_iteration: circuit.ticks_per_iteration(),
        spec,
        total,
        blocks,
        trajectories: kept,
        jumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grover::{ideal_probability, TickMode};
    use crate::noise::noise_tick;

    fn circuit(n_q: usize, tau: usize) -> GroverCircuit {
        GroverCircuit::build(GroverConfig::new(n_q, tau).unwrap()).unwrap()
    }

    #[test]
    fn welford_merge_matches_direct() {
        let xs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 13.0).collect();
        let mut all = RunningStats::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = RunningStats::default();
        let mut b = RunningStats::default();
        xs[..11].iter().for_each(|&x| a.push(x));
        xs[11..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-12);
        assert!((a.std_dev() - all.std_dev()).abs() < 1e-12);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((all.std_dev() - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn noiseless_trajectory_follows_closed_form() {
        let c = circuit(5, 19);
        let cfg = *c.config();
        let mut rng = trajectory_rng(1, 0);
        let mut worst: f64 = 0.0;
        run_trajectory(&c, &NoiseModel::noiseless(), 40, &mut rng, |t, s| {
            let wg = crate::observables::w_searched(s, &cfg).unwrap();
            worst = worst.max((wg - ideal_probability(t, &cfg)).abs());
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn fast_engine_matches_reference_tick_path() {
        let c = circuit(3, 5).with_tick_mode(TickMode::Actual).unwrap();
        let noise = NoiseModel::new(0.02).unwrap();
        let mut fast_states = Vec::new();
        let mut rng = trajectory_rng(9, 4);
        let out = run_trajectory(&c, &noise, 30, &mut rng, |_, s| fast_states.push(s.clone())).unwrap();
        assert!(out.jumps > 0);

        let mut rng = trajectory_rng(9, 4);
        let mut s = StateVector::uniform_state(3, 0).unwrap();
        let mut jumps = 0;
        for t in 1..=30 {
            for g in c.gates() {
                s.apply_gate(g).unwrap();
                jumps += noise_tick(&mut s, &noise, &mut rng).unwrap();
            }
            for (a, b) in s.amplitudes().iter().zip(fast_states[t].amplitudes()) {
                assert!((a - b).norm() < 1e-10, "t={t}");
            }
        }
        assert_eq!(jumps as u64, out.jumps);
    }

    #[test]
    fn states_stay_normalized() {
        let c = circuit(4, 3).with_tick_mode(TickMode::Paper).unwrap();
        let noise = NoiseModel::new(0.01).unwrap();
        let mut rng = trajectory_rng(2, 0);
        run_trajectory(&c, &noise, 50, &mut rng, |_, s| {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        })
        .unwrap();
    }

    #[test]
    fn single_trajectory_ensemble_equals_run_trajectory() {
        let c = circuit(4, 9);
        let noise = NoiseModel::new(0.005).unwrap();
        let ens = run_ensemble(&c, &noise, EnsembleSpec::new(25, 1, 77)).unwrap();
        let reference = IdealReference::from_circuit(&c, 25).unwrap();
        let mut rng = trajectory_rng(77, 0);
        let mut samples = Vec::new();
        run_trajectory(&c, &noise, 25, &mut rng, |t, s| samples.push(reference.measure(t, s.amplitudes())))
            .unwrap();
        for (t, s) in samples.iter().enumerate() {
            for obs in Observable::ALL {
                assert_eq!(ens.mean(t, obs), s.get(obs));
                assert_eq!(ens.stderr(t, obs), 0.0);
            }
        }
    }

    #[test]
    fn noiseless_ensemble_has_zero_spread() {
        let c = circuit(4, 2);
        let ens = run_ensemble(&c, &NoiseModel::noiseless(), EnsembleSpec::new(10, 30, 5)).unwrap();
        for t in 0..=10 {
            for obs in Observable::ALL {
                assert_eq!(ens.stderr(t, obs), 0.0);
            }
            assert!((ens.mean(t, Observable::Fidelity) - 1.0).abs() < 1e-10);
            assert!((ens.mean(t, Observable::FourState) - 1.0).abs() < 1e-9);
        }
        assert_eq!(ens.total_jumps(), 0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = circuit(4, 11);
        let noise = NoiseModel::new(0.003).unwrap();
        let base = EnsembleSpec::new(15, 150, 1234);
        let one = run_ensemble(&c, &noise, base.with_workers(1)).unwrap();
        let three = run_ensemble(&c, &noise, base.with_workers(3)).unwrap();
        let global = run_ensemble(&c, &noise, base).unwrap();
        assert_eq!(one.series(), three.series());
        assert_eq!(one.series(), global.series());
        assert_eq!(one.total_jumps(), three.total_jumps());
        let other_seed = run_ensemble(&c, &noise, EnsembleSpec::new(15, 150, 1235)).unwrap();
        assert_ne!(one.series(), other_seed.series());
    }

    #[test]
    fn blocks_partition_the_ensemble() {
        let c = circuit(3, 1);
        let noise = NoiseModel::new(0.01).unwrap();
        let ens = run_ensemble(&c, &noise, EnsembleSpec::new(5, 45, 3).keep_trajectories(true)).unwrap();
        assert_eq!(ens.blocks(), MAX_BLOCKS);
        let kept = ens.per_trajectory().unwrap();
        assert_eq!(kept.len(), 45);
        // Leaving out block 0 (trajectories 0..=2) equals the mean of the rest.
        let loo = ens.leave_one_out(0);
        let first_block = 45usize.div_ceil(MAX_BLOCKS);
        for t in 0..=5 {
            let direct: f64 = kept[first_block..].iter().map(|s| s[t].0[1]).sum::<f64>()
                / (45 - first_block) as f64;
            assert!((loo.records[t].mean.0[1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_damping_lowers_mean_excitation() {
        // No gates between ticks: ensemble-mean excitation must not increase.
        let noise = NoiseModel::new(0.05).unwrap();
        let mut states: Vec<StateVector> = (0..400)
            .map(|_| {
                let mut s = StateVector::basis_state(3, 0).unwrap();
                for q in 0..3 {
                    s.apply_gate(&crate::qstate::Gate::hadamard(q)).unwrap();
                }
                s
            })
            .collect();
        let excitation = |states: &[StateVector]| -> f64 {
            states
                .iter()
                .map(|s| (0..3).map(|q| s.excited_population(q)).sum::<f64>())
                .sum::<f64>()
                / states.len() as f64
        };
        let mut rngs: Vec<_> = (0..400).map(|a| trajectory_rng(8, a)).collect();
        let mut prev = excitation(&states);
        for _ in 0..30 {
            for (s, r) in states.iter_mut().zip(rngs.iter_mut()) {
                noise_tick(s, &noise, r).unwrap();
            }
            let now = excitation(&states);
            assert!(now <= prev + 1e-12);
            prev = now;
        }
    }

    #[test]
    fn zero_trajectories_rejected() {
        let c = circuit(2, 0);
        assert!(run_ensemble(&c, &NoiseModel::noiseless(), EnsembleSpec::new(3, 0, 0)).is_err());
    }
}
