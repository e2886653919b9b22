//! Exact density-matrix evolution under the gate sequence and per-qubit
//! amplitude damping, for small systems.
//!
//! `rho` is stored as a vector over `i + D j` (`rho_ij`), i.e. a state of
//! `2 n` qubits, so `U rho U^dag` is `U` on the low qubits and `conj(U)` on the
//! high ones and reuses the state-vector kernels.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grover::GroverCircuit;
use crate::noise::NoiseModel;
use crate::observables::{IdealReference, ObservableSeries, QuantumState, Sample, SeriesRecord};
use crate::qstate::{Gate, StateVector};

/// Largest system accepted by the dense oracle.
pub const MAX_DENSITY_QUBITS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: Vec<Complex64>,
}

fn check_size(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_DENSITY_QUBITS {
        return Err(Error::TooLarge {
            what: "density-matrix qubits",
            limit: MAX_DENSITY_QUBITS,
            requested: n_qubits,
        });
    }
    Ok(())
}

impl DensityMatrix {
    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let n = state.n_qubits();
        check_size(n)?;
        let d = state.dim();
        let a = state.amplitudes();
        let mut entries = vec![ZERO; d * d];
        for j in 0..d {
            for i in 0..d {
                entries[i + d * j] = a[i] * a[j].conj();
            }
        }
        Ok(Self { n_qubits: n, entries })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let d = 1usize << n_qubits;
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            entries[i + d * i] = Complex64::new(1.0 / d as f64, 0.0);
        }
        Ok(Self { n_qubits, entries })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// `rho_ij`.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i + self.dim() * j]
    }

    /// `rho <- U rho U^dag`.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        gate.apply_raw(&mut self.entries);
        let n = self.n_qubits;
        let column_gate = match gate {
            Gate::Single { target, matrix } => Gate::Single {
                target: target + n,
                matrix: [
                    [matrix[0][0].conj(), matrix[0][1].conj()],
                    [matrix[1][0].conj(), matrix[1][1].conj()],
                ],
            },
            Gate::Cnot { control, target } => Gate::Cnot {
                control: control + n,
                target: target + n,
            },
            Gate::Toffoli { controls, target } => Gate::Toffoli {
                controls: [controls[0] + n, controls[1] + n],
                target: target + n,
            },
        };
        column_gate.apply_raw(&mut self.entries);
        Ok(())
    }

    /// `rho <- E0 rho E0^dag + E1 rho E1^dag` on `qubit`.
    pub fn apply_damping(&mut self, qubit: usize, gamma: f64) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        let row = 1usize << qubit;
        let col = 1usize << (qubit + self.n_qubits);
        let s = (1.0 - gamma).sqrt();
        for idx in 0..self.entries.len() {
            if idx & (row | col) != 0 {
                continue;
            }
            let e11 = self.entries[idx | row | col];
            self.entries[idx] += e11 * gamma;
            self.entries[idx | row] *= s;
            self.entries[idx | col] *= s;
            self.entries[idx | row | col] = e11 * (1.0 - gamma);
        }
        Ok(())
    }

    /// One noise tick: damping on every qubit.
    pub fn apply_tick(&mut self, gamma: f64) {
        for q in 0..self.n_qubits {
            self.apply_damping(q, gamma).expect("qubit in range");
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// `Tr(rho^2) = sum_ij |rho_ij|^2` for Hermitian `rho`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest `|rho_ij - conj(rho_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| {
            // Symmetrize so round-off asymmetry does not leak into the solver.
            (self.entry(i, j) + self.entry(j, i).conj()) * 0.5
        });
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(P rho)`.
    pub fn expectation(&self, projector: &Projector) -> Result<f64> {
        match projector {
            Projector::Identity => Ok(self.trace().re),
            Projector::Span(vectors) => {
                let mut total = 0.0;
                for v in vectors {
                    total += self.expectation_pure(v)?;
                }
                Ok(total)
            }
        }
    }
}

impl QuantumState for DensityMatrix {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn population(&self, x: usize) -> f64 {
        self.entry(x, x).re
    }

    fn expectation_pure(&self, v: &StateVector) -> Result<f64> {
        if v.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: v.dim(),
            });
        }
        let d = self.dim();
        let a = v.amplitudes();
        let mut acc = ZERO;
        for j in 0..d {
            if a[j] == ZERO {
                continue;
            }
            let mut row = ZERO;
            for i in 0..d {
                row += a[i].conj() * self.entries[i + d * j];
            }
            acc += row * a[j];
        }
        Ok(acc.re)
    }
}

/// Projector given by the identity or by an orthonormal set of vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    Identity,
    Span(Vec<StateVector>),
}

/// Evolves `|psi_0><psi_0| (x) |0><0|` through `t_max` iterations, applying
/// each gate followed by its noise ticks. Entry `t` is `rho` after `t`
/// iterations.
pub fn evolve_exact(circuit: &GroverCircuit, noise: &NoiseModel, t_max: usize) -> Result<Vec<DensityMatrix>> {
    let config = circuit.config();
    check_size(config.n_tot())?;
    let mut rho = DensityMatrix::from_pure(&StateVector::uniform_state(config.n_q(), 0)?)?;
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(rho.clone());
    for _ in 0..t_max {
        for (gate, &ticks) in circuit.gates().iter().zip(circuit.ticks_after()) {
            rho.apply_gate(gate)?;
            for _ in 0..ticks {
                rho.apply_tick(noise.gamma());
            }
        }
        out.push(rho.clone());
    }
    Ok(out)
}

/// `(w_G, w_4, f)` of the exact evolution, with zero standard errors.
pub fn exact_series(circuit: &GroverCircuit, noise: &NoiseModel, t_max: usize) -> Result<ObservableSeries> {
    let config = *circuit.config();
    let reference = IdealReference::from_circuit(circuit, t_max)?;
    let rhos = evolve_exact(circuit, noise, t_max)?;
    let mut records = Vec::with_capacity(rhos.len());
    for (t, rho) in rhos.iter().enumerate() {
        let w_g = crate::observables::w_searched(rho, &config)?;
        let w_4 = crate::observables::w_four(rho, &config)?;
        let f = crate::observables::fidelity(rho, &reference.state(t))?;
        records.push(SeriesRecord {
            t,
            mean: Sample([w_g, w_4, f]),
            stderr: Sample([0.0; 3]),
        });
    }
    Ok(ObservableSeries { records })
}
