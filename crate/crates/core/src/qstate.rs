//! Dense state vectors and elementary gate kernels.
//!
//! Basis index bit `q` is qubit `q`, so qubit 0 is the least-significant bit.
//! Gates mutate amplitudes in place, touching only the pairs that differ in
//! the target bit.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 20;

/// Row-major 2x2 complex matrix.
pub type Matrix2 = [[Complex64; 2]; 2];

const UNITARY_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn hadamard_matrix() -> Matrix2 {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

pub fn pauli_x_matrix() -> Matrix2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_z_matrix() -> Matrix2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

/// `a * b` for 2x2 matrices.
pub fn matmul2(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[ZERO; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn scale2(m: &Matrix2, s: Complex64) -> Matrix2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

/// Largest entry of `|M M† - I|`.
pub fn unitarity_error(m: &Matrix2) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let v = m[i][0] * m[j][0].conj() + m[i][1] * m[j][1].conj();
            let expect = if i == j { ONE } else { ZERO };
            worst = worst.max((v - expect).norm());
        }
    }
    worst
}

/// One elementary gate of the circuit model.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    /// Arbitrary single-qubit unitary.
    Single { target: usize, matrix: Matrix2 },
    Cnot { control: usize, target: usize },
    Toffoli { controls: [usize; 2], target: usize },
}

impl Gate {
    /// Single-qubit gate; rejects matrices that are not unitary to 1e-12.
    pub fn single(target: usize, matrix: Matrix2) -> Result<Self> {
        let err = unitarity_error(&matrix);
        if !(err <= UNITARY_TOL) {
            return Err(Error::InvalidGate(format!(
                "matrix on qubit {target} is not unitary (error {err:.3e})"
            )));
        }
        Ok(Gate::Single { target, matrix })
    }

    pub fn hadamard(target: usize) -> Self {
        Gate::Single {
            target,
            matrix: hadamard_matrix(),
        }
    }

    pub fn pauli_x(target: usize) -> Self {
        Gate::Single {
            target,
            matrix: pauli_x_matrix(),
        }
    }

    pub fn pauli_z(target: usize) -> Self {
        Gate::Single {
            target,
            matrix: pauli_z_matrix(),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Result<Self> {
        if control == target {
            return Err(Error::InvalidGate(format!(
                "CNOT control and target coincide ({control})"
            )));
        }
        Ok(Gate::Cnot { control, target })
    }

    pub fn toffoli(c0: usize, c1: usize, target: usize) -> Result<Self> {
        if c0 == c1 || c0 == target || c1 == target {
            return Err(Error::InvalidGate(format!(
                "Toffoli indices must be distinct, got ({c0}, {c1}; {target})"
            )));
        }
        Ok(Gate::Toffoli {
            controls: [c0, c1],
            target,
        })
    }

    /// Qubits the gate touches, target last.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Single { target, .. } => vec![*target],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Toffoli { controls, target } => vec![controls[0], controls[1], *target],
        }
    }

    pub fn target(&self) -> usize {
        match self {
            Gate::Single { target, .. } | Gate::Cnot { target, .. } | Gate::Toffoli { target, .. } => {
                *target
            }
        }
    }

    /// True for gates that permute computational basis states.
    pub fn is_classical(&self) -> bool {
        match self {
            Gate::Single { matrix, .. } => {
                matrix[0][0] == ZERO && matrix[1][1] == ZERO && matrix[0][1] == ONE && matrix[1][0] == ONE
            }
            _ => true,
        }
    }

    /// Checks that all indices address qubits of an `n_qubits` register.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
            }
        }
        Ok(())
    }

    /// Applies the gate to a raw amplitude slice. Indices must already be
    /// validated against `amps.len()`.
    pub(crate) fn apply_raw(&self, amps: &mut [Complex64]) {
        match self {
            Gate::Single { target, matrix } => apply_single(amps, *target, matrix),
            Gate::Cnot { control, target } => apply_cnot(amps, *control, *target),
            Gate::Toffoli { controls, target } => apply_toffoli(amps, controls[0], controls[1], *target),
        }
    }

    /// One dump line: `KIND q_indices [matrix]`.
    pub fn dump_line(&self) -> String {
        match self {
            Gate::Single { target, matrix } => {
                let entries: Vec<String> = matrix
                    .iter()
                    .flatten()
                    .map(|z| format!("({},{})", z.re, z.im))
                    .collect();
                format!("U1 {target} {}", entries.join(" "))
            }
            Gate::Cnot { control, target } => format!("CNOT {control} {target}"),
            Gate::Toffoli { controls, target } => {
                format!("TOFFOLI {} {} {target}", controls[0], controls[1])
            }
        }
    }
}

/// Inserts a zero bit at position `bit`, shifting higher bits up.
#[inline(always)]
fn insert_zero(x: usize, bit: usize) -> usize {
    let low = x & ((1usize << bit) - 1);
    ((x >> bit) << (bit + 1)) | low
}

pub(crate) fn apply_single(amps: &mut [Complex64], target: usize, m: &Matrix2) {
    let stride = 1usize << target;
    let [[a, b], [c, d]] = *m;
    let diagonal = b == ZERO && c == ZERO;
    let flip = a == ZERO && d == ZERO && b == ONE && c == ONE;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        if flip {
            lo.swap_with_slice(hi);
        } else if diagonal {
            lo.iter_mut().for_each(|z| *z *= a);
            hi.iter_mut().for_each(|z| *z *= d);
        } else {
            for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x0, *x1);
                *x0 = a * u + b * v;
                *x1 = c * u + d * v;
            }
        }
    }
}

pub(crate) fn apply_cnot(amps: &mut [Complex64], control: usize, target: usize) {
    let (lo, hi) = if control < target { (control, target) } else { (target, control) };
    let cbit = 1usize << control;
    let tbit = 1usize << target;
    for k in 0..amps.len() / 4 {
        let i = insert_zero(insert_zero(k, lo), hi) | cbit;
        amps.swap(i, i | tbit);
    }
}

pub(crate) fn apply_toffoli(amps: &mut [Complex64], c0: usize, c1: usize, target: usize) {
    let mut bits = [c0, c1, target];
    bits.sort_unstable();
    let cmask = (1usize << c0) | (1usize << c1);
    let tbit = 1usize << target;
    for k in 0..amps.len() / 8 {
        let i = insert_zero(insert_zero(insert_zero(k, bits[0]), bits[1]), bits[2]) | cmask;
        amps.swap(i, i | tbit);
    }
}

/// Normalized complex amplitudes over `2^n_qubits` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_size(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::InvalidConfig("register needs at least one qubit".into()));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::TooLarge {
            what: "state vector",
            limit: MAX_QUBITS,
            requested: n_qubits,
        });
    }
    Ok(())
}

impl StateVector {
    /// Computational basis state `|x>`.
    pub fn basis_state(n_qubits: usize, x: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if x >= dim {
            return Err(Error::IndexOutOfRange { index: x, dim });
        }
        let mut amps = vec![ZERO; dim];
        amps[x] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Uniform superposition over the `2^n_q` register states, tensored with
    /// the ancilla (qubit `n_q`) fixed to `ancilla`.
    pub fn uniform_state(n_q: usize, ancilla: u8) -> Result<Self> {
        if ancilla > 1 {
            return Err(Error::InvalidConfig(format!("ancilla value must be 0 or 1, got {ancilla}")));
        }
        check_size(n_q + 1)?;
        let n = 1usize << n_q;
        let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        let mut amps = vec![ZERO; 2 * n];
        let offset = usize::from(ancilla) * n;
        amps[offset..offset + n].fill(amp);
        Ok(Self {
            n_qubits: n_q + 1,
            amps,
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two. No
    /// normalization is applied.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_size(n_qubits)?;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Rescales to unit norm. Fails on the zero vector.
    pub fn normalize(&mut self) -> Result<()> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize state of norm^2 {n2}")));
        }
        let s = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|z| *z *= s);
        Ok(())
    }

    pub fn probability(&self, x: usize) -> f64 {
        self.amps[x].norm_sqr()
    }

    /// Population of `|1>` on `qubit`, i.e. `<n_q>` for a normalized state.
    pub fn excited_population(&self, qubit: usize) -> f64 {
        let bit = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .filter(|(x, _)| x & bit != 0)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    /// `sum_x conj(self_x) * other_x`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        gate.apply_raw(&mut self.amps);
        Ok(())
    }

    pub fn apply_gates<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }
}
