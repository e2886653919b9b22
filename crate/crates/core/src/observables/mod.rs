//! Searched-state probability, 4-state subspace weight, fidelity, and Husimi
//! distributions.
//!
//! All quantities work on full `n_tot`-qubit states where the ancilla is the
//! top qubit, so register index `x` appears at `x` (ancilla 0) and `x + N`
//! (ancilla 1).

mod husimi;

pub use husimi::{default_sigma, husimi, husimi_summary, HusimiGrid, HusimiSummary};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grover::{eta_state, GroverCircuit, GroverConfig};
use crate::qstate::StateVector;

/// Anything that can report `<v|rho|v>` and populations.
pub trait QuantumState {
    fn n_qubits(&self) -> usize;
    /// Population of basis state `x`.
    fn population(&self, x: usize) -> f64;
    /// `<v|rho|v>` for a normalized `v`.
    fn expectation_pure(&self, v: &StateVector) -> Result<f64>;
}

impl QuantumState for StateVector {
    fn n_qubits(&self) -> usize {
        StateVector::n_qubits(self)
    }

    fn population(&self, x: usize) -> f64 {
        self.probability(x)
    }

    fn expectation_pure(&self, v: &StateVector) -> Result<f64> {
        Ok(v.inner_product(self)?.norm_sqr())
    }
}

fn check_dims<S: QuantumState + ?Sized>(state: &S, config: &GroverConfig) -> Result<()> {
    if state.n_qubits() != config.n_tot() {
        return Err(Error::DimensionMismatch {
            left: 1 << state.n_qubits(),
            right: 1 << config.n_tot(),
        });
    }
    Ok(())
}

/// Register vector `v` placed on ancilla branch `ancilla`.
pub fn with_ancilla(register: &StateVector, ancilla: u8) -> StateVector {
    let n = register.dim();
    let mut amps = vec![Complex64::new(0.0, 0.0); 2 * n];
    let off = usize::from(ancilla) * n;
    amps[off..off + n].copy_from_slice(register.amplitudes());
    StateVector::from_amplitudes(amps).expect("doubling a valid register")
}

/// Orthonormal basis of the 4-state subspace `{tau, eta} x {ancilla 0, 1}`.
pub fn four_state_basis(config: &GroverConfig) -> [StateVector; 4] {
    let tau = StateVector::basis_state(config.n_q(), config.tau()).expect("tau validated");
    let eta = eta_state(config);
    [
        with_ancilla(&tau, 0),
        with_ancilla(&tau, 1),
        with_ancilla(&eta, 0),
        with_ancilla(&eta, 1),
    ]
}

/// `w_G`: probability of register value `tau`, summed over both ancilla values.
pub fn w_searched<S: QuantumState + ?Sized>(state: &S, config: &GroverConfig) -> Result<f64> {
    check_dims(state, config)?;
    let n = config.search_size();
    Ok(state.population(config.tau()) + state.population(config.tau() + n))
}

/// `w_4`: weight of the rank-4 projector onto `{tau, eta} x {0, 1}`.
pub fn w_four<S: QuantumState + ?Sized>(state: &S, config: &GroverConfig) -> Result<f64> {
    check_dims(state, config)?;
    let [_, _, eta0, eta1] = four_state_basis(config);
    Ok(w_searched(state, config)? + state.expectation_pure(&eta0)? + state.expectation_pure(&eta1)?)
}

/// `<ideal|rho|ideal>`; for an ensemble use [`ensemble_fidelity`].
pub fn fidelity<S: QuantumState + ?Sized>(state: &S, ideal: &StateVector) -> Result<f64> {
    if state.n_qubits() != ideal.n_qubits() {
        return Err(Error::DimensionMismatch {
            left: 1 << state.n_qubits(),
            right: ideal.dim(),
        });
    }
    state.expectation_pure(ideal)
}

/// Mean squared overlap `1/M sum_a |<ideal|psi_a>|^2`.
pub fn ensemble_fidelity(states: &[StateVector], ideal: &StateVector) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidConfig("empty ensemble".into()));
    }
    let mut total = 0.0;
    for s in states {
        total += fidelity(s, ideal)?;
    }
    Ok(total / states.len() as f64)
}

/// The three per-iteration observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    Searched,
    FourState,
    Fidelity,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::Searched, Observable::FourState, Observable::Fidelity];

    pub fn index(self) -> usize {
        match self {
            Observable::Searched => 0,
            Observable::FourState => 1,
            Observable::Fidelity => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::Searched => "w_G",
            Observable::FourState => "w_4",
            Observable::Fidelity => "f",
        }
    }
}

/// One measurement of `(w_G, w_4, f)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample(pub [f64; 3]);

impl Sample {
    pub fn get(&self, obs: Observable) -> f64 {
        self.0[obs.index()]
    }
}

/// Noiseless circuit evolution stored as its coordinates on
/// `|tau, 0>` and `|eta, 0>`, one pair per iteration.
#[derive(Debug, Clone)]
pub struct IdealReference {
    config: GroverConfig,
    coords: Vec<(Complex64, Complex64)>,
}

const REFERENCE_RESIDUAL_TOL: f64 = 1e-9;

impl IdealReference {
    /// Runs the circuit without noise for `t_max` iterations. The ancilla
    /// returns to `|0>` and the register stays in the `{tau, eta}` plane, which
    /// is checked at every step.
    pub fn from_circuit(circuit: &GroverCircuit, t_max: usize) -> Result<Self> {
        let config = *circuit.config();
        let mut state = StateVector::uniform_state(config.n_q(), 0)?;
        let mut coords = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            if t > 0 {
                circuit.apply(&mut state)?;
            }
            let (ct, ce) = plane_coordinates(state.amplitudes(), &config, 0);
            let residual = (1.0 - ct.norm_sqr() - ce.norm_sqr()).abs();
            if residual > REFERENCE_RESIDUAL_TOL {
                return Err(Error::Numerical(format!(
                    "noiseless state left the Grover plane at t={t} (residual {residual:.3e})"
                )));
            }
            coords.push((ct, ce));
        }
        Ok(Self { config, coords })
    }

    pub fn t_max(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn config(&self) -> &GroverConfig {
        &self.config
    }

    /// Full `n_tot`-qubit ideal state after `t` iterations.
    pub fn state(&self, t: usize) -> StateVector {
        let (ct, ce) = self.coords[t];
        let n = self.config.search_size();
        let e = ce / ((n - 1) as f64).sqrt();
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * n];
        amps[..n].fill(e);
        amps[self.config.tau()] = ct;
        StateVector::from_amplitudes(amps).expect("valid size")
    }

    /// Measures `(w_G, w_4, f)` on normalized amplitudes at iteration `t` in
    /// a single pass.
    pub fn measure(&self, t: usize, amps: &[Complex64]) -> Sample {
        let (t0, e0) = plane_coordinates(amps, &self.config, 0);
        let (t1, e1) = plane_coordinates(amps, &self.config, 1);
        let w_g = t0.norm_sqr() + t1.norm_sqr();
        let w_4 = w_g + e0.norm_sqr() + e1.norm_sqr();
        let (rt, re) = self.coords[t];
        let f = (rt.conj() * t0 + re.conj() * e0).norm_sqr();
        Sample([w_g, w_4, f])
    }
}

/// `(<tau, a|psi>, <eta, a|psi>)` on ancilla branch `a`.
fn plane_coordinates(amps: &[Complex64], config: &GroverConfig, ancilla: usize) -> (Complex64, Complex64) {
    let n = config.search_size();
    let branch = &amps[ancilla * n..(ancilla + 1) * n];
    let at_tau = branch[config.tau()];
    let sum: Complex64 = branch.iter().sum();
    (at_tau, (sum - at_tau) / ((n - 1) as f64).sqrt())
}

/// Per-iteration record of an observable series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub t: usize,
    pub mean: Sample,
    pub stderr: Sample,
}

/// Observable time series with ensemble standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub records: Vec<SeriesRecord>,
}

impl ObservableSeries {
    /// `(t, value, stderr)` triples for one observable.
    pub fn points(&self, obs: Observable) -> Vec<(usize, f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.t, r.mean.get(obs), r.stderr.get(obs)))
            .collect()
    }

    /// Checks the range invariant `0 <= v <= 1 + 5 stderr` (with a 1e-9
    /// floating slack) and returns the first violation.
    pub fn check_bounds(&self) -> Option<(usize, Observable, f64)> {
        for r in &self.records {
            for obs in Observable::ALL {
                let v = r.mean.get(obs);
                if v < -1e-12 || v > 1.0 + 5.0 * r.stderr.get(obs) + 1e-9 {
                    return Some((r.t, obs, v));
                }
            }
        }
        None
    }
}
