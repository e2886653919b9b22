//! Gate-level Grover iteration and its analytic reference.
//!
//! One iteration is the phase oracle on `|tau>` followed by the diffusion
//! (reflection about the uniform state). Both reduce to a multi-controlled Z
//! on the register, built from a clean-ancilla split into two sub-gates whose
//! V-chains borrow the idle register qubits as dirty ancillas.
//!
//! Negative-polarity controls are X-conjugated only around the sub-gate that
//! reads them. Flipping the whole register for the full multi-controlled gate
//! would park the dominant component of the state in `|1...1>` for most of
//! the iteration, which inflates the amplitude-damping exposure well above
//! the register's natural half-filled occupation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qstate::{self, Gate, Matrix2, StateVector, MAX_QUBITS};

/// Search problem: `n_q` register qubits plus one ancilla, marked state `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroverConfig {
    n_q: usize,
    tau: usize,
}

impl GroverConfig {
    pub fn new(n_q: usize, tau: usize) -> Result<Self> {
        if n_q == 0 {
            return Err(Error::InvalidConfig("n_q must be at least 1".into()));
        }
        if n_q + 1 > MAX_QUBITS {
            return Err(Error::TooLarge {
                what: "Grover register including ancilla",
                limit: MAX_QUBITS,
                requested: n_q + 1,
            });
        }
        let n = 1usize << n_q;
        if tau >= n {
            return Err(Error::IndexOutOfRange { index: tau, dim: n });
        }
        Ok(Self { n_q, tau })
    }

    /// Lowest searched index whose binary expansion has `n_units` ones.
    pub fn with_units(n_q: usize, n_units: usize) -> Result<Self> {
        if n_units > n_q {
            return Err(Error::InvalidConfig(format!(
                "cannot place {n_units} units in a {n_q}-bit register"
            )));
        }
        Self::new(n_q, (1usize << n_units) - 1)
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    /// Register plus ancilla.
    pub fn n_tot(&self) -> usize {
        self.n_q + 1
    }

    /// `N = 2^n_q`.
    pub fn search_size(&self) -> usize {
        1 << self.n_q
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Number of ones in the binary expansion of `tau`.
    pub fn n_units(&self) -> usize {
        self.tau.count_ones() as usize
    }

    /// Grover frequency `2 asin(sqrt(1/N))`.
    pub fn omega(&self) -> f64 {
        2.0 * (1.0 / self.search_size() as f64).sqrt().asin()
    }

    /// Quarter period `pi / (2 omega)` in iterations (35.5 for `N = 2048`).
    pub fn t_grover(&self) -> f64 {
        PI / (2.0 * self.omega())
    }

    /// Iterations nearest to the maxima of `sin^2((t + 1/2) omega)` up to
    /// `t_max` inclusive.
    pub fn peak_iterations(&self, t_max: usize) -> Vec<usize> {
        let w = self.omega();
        (0..)
            .map(|k| ((PI / 2.0 + k as f64 * PI) / w - 0.5).round().max(0.0) as usize)
            .take_while(|&t| t <= t_max)
            .collect()
    }

    /// Paper-declared elementary gate count `12 n_tot - 42`, when positive.
    pub fn n_g_paper(&self) -> Option<usize> {
        let n = 12 * self.n_tot() as i64 - 42;
        (n > 0).then_some(n as usize)
    }
}

/// Exact success probability `sin^2((t + 1/2) omega)` after `t` iterations.
pub fn ideal_probability(t: usize, config: &GroverConfig) -> f64 {
    ((t as f64 + 0.5) * config.omega()).sin().powi(2)
}

/// Uniform superposition of all register states except `tau`.
pub fn eta_state(config: &GroverConfig) -> StateVector {
    let n = config.search_size();
    let a = Complex64::new(1.0 / ((n - 1) as f64).sqrt(), 0.0);
    let mut amps = vec![a; n];
    amps[config.tau()] = Complex64::new(0.0, 0.0);
    StateVector::from_amplitudes(amps).expect("register size validated by config")
}

/// Applies `G = (2|psi_0><psi_0| - 1) O_tau` directly to a register-only
/// state of `n_q` qubits.
pub fn apply_exact_grover(register: &mut StateVector, config: &GroverConfig) -> Result<()> {
    if register.n_qubits() != config.n_q() {
        return Err(Error::DimensionMismatch {
            left: register.dim(),
            right: config.search_size(),
        });
    }
    let amps = register.amplitudes_mut();
    amps[config.tau()] = -amps[config.tau()];
    let mean: Complex64 = amps.iter().sum::<Complex64>() / amps.len() as f64;
    for z in amps.iter_mut() {
        *z = 2.0 * mean - *z;
    }
    Ok(())
}

/// Which count drives the noise ticks of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TickMode {
    /// One tick after every elementary gate.
    #[default]
    Actual,
    /// Exactly `12 n_tot - 42` ticks, spread uniformly over the gates.
    Paper,
}

impl TickMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TickMode::Actual => "actual",
            TickMode::Paper => "paper",
        }
    }
}

impl std::str::FromStr for TickMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "actual" => Ok(TickMode::Actual),
            "paper" => Ok(TickMode::Paper),
            other => Err(Error::InvalidConfig(format!("unknown tick mode '{other}'"))),
        }
    }
}

/// The elementary gates of one Grover iteration plus its noise-tick layout.
#[derive(Debug, Clone)]
pub struct GroverCircuit {
    config: GroverConfig,
    gates: Vec<Gate>,
    tick_mode: TickMode,
    ticks_after: Vec<usize>,
}

impl GroverCircuit {
    /// Builds the iteration with one noise tick per gate.
    pub fn build(config: GroverConfig) -> Result<Self> {
        if config.n_q() < 2 {
            return Err(Error::InvalidConfig("circuit needs n_q >= 2".into()));
        }
        let gates = build_gates(&config)?;
        let ticks_after = vec![1; gates.len()];
        Ok(Self {
            config,
            gates,
            tick_mode: TickMode::Actual,
            ticks_after,
        })
    }

    pub fn with_tick_mode(mut self, mode: TickMode) -> Result<Self> {
        let n_ticks = match mode {
            TickMode::Actual => self.gates.len(),
            TickMode::Paper => self.config.n_g_paper().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "paper tick count 12 n_tot - 42 is not positive for n_tot = {}",
                    self.config.n_tot()
                ))
            })?,
        };
        self.ticks_after = spread_ticks(self.gates.len(), n_ticks);
        self.tick_mode = mode;
        Ok(self)
    }

    pub fn config(&self) -> &GroverConfig {
        &self.config
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn tick_mode(&self) -> TickMode {
        self.tick_mode
    }

    pub fn n_g_actual(&self) -> usize {
        self.gates.len()
    }

    pub fn n_g_paper(&self) -> Option<usize> {
        self.config.n_g_paper()
    }

    /// Noise ticks per iteration under the current tick mode.
    pub fn ticks_per_iteration(&self) -> usize {
        self.ticks_after.iter().sum()
    }

    /// Number of noise ticks following each gate.
    pub fn ticks_after(&self) -> &[usize] {
        &self.ticks_after
    }

    /// Runs one noiseless iteration on a full `n_tot`-qubit state.
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        if state.n_qubits() != self.config.n_tot() {
            return Err(Error::DimensionMismatch {
                left: state.dim(),
                right: 1 << self.config.n_tot(),
            });
        }
        for g in &self.gates {
            g.apply_raw(state.amplitudes_mut());
        }
        Ok(())
    }

    /// Plain-text gate list, one gate per line.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "# n_q={} n_tot={} tau={} n_g_actual={} n_g_paper={} tick_mode={}\n",
            self.config.n_q(),
            self.config.n_tot(),
            self.config.tau(),
            self.n_g_actual(),
            self.n_g_paper().map_or_else(|| "NA".to_string(), |n| n.to_string()),
            self.tick_mode.as_str(),
        );
        for g in &self.gates {
            out.push_str(&g.dump_line());
            out.push('\n');
        }
        out
    }
}

/// Distributes `n_ticks` ticks over `n_gates` gates; tick `k` follows gate
/// `ceil((k + 1) n_gates / n_ticks) - 1`.
fn spread_ticks(n_gates: usize, n_ticks: usize) -> Vec<usize> {
    let mut counts = vec![0; n_gates];
    for k in 0..n_ticks {
        let g = ((k + 1) * n_gates).div_ceil(n_ticks) - 1;
        counts[g] += 1;
    }
    counts
}

struct Builder {
    gates: Vec<Gate>,
}

impl Builder {
    fn x(&mut self, q: usize) {
        self.gates.push(Gate::pauli_x(q));
    }

    fn flip(&mut self, qubits: &[usize], negative: u64) {
        for &q in qubits {
            if negative >> q & 1 == 1 {
                self.x(q);
            }
        }
    }

    /// Multi-controlled X with `dirty.len() >= controls.len() - 2` borrowed
    /// qubits in arbitrary states, which are restored.
    fn vchain(&mut self, controls: &[usize], target: usize, dirty: &[usize]) -> Result<()> {
        let m = controls.len();
        match m {
            0 => return Err(Error::InvalidGate("multi-controlled X without controls".into())),
            1 => self.gates.push(Gate::cnot(controls[0], target)?),
            2 => self.gates.push(Gate::toffoli(controls[0], controls[1], target)?),
            _ => {
                if dirty.len() < m - 2 {
                    return Err(Error::InvalidGate(format!(
                        "{m}-controlled X needs {} borrowed qubits, got {}",
                        m - 2,
                        dirty.len()
                    )));
                }
                let a = &dirty[..m - 2];
                let top = Gate::toffoli(controls[m - 1], a[m - 3], target)?;
                let mut ladder = Vec::with_capacity(m - 3);
                for i in (2..m - 1).rev() {
                    ladder.push(Gate::toffoli(controls[i], a[i - 2], a[i - 1])?);
                }
                let mut core = ladder.clone();
                core.push(Gate::toffoli(controls[0], controls[1], a[0])?);
                core.extend(ladder.into_iter().rev());
                for _ in 0..2 {
                    self.gates.push(top.clone());
                    self.gates.extend(core.iter().cloned());
                }
            }
        }
        Ok(())
    }

    /// Phase flip of the register basis state whose bits are 0 on `negative`
    /// and 1 elsewhere. The ancilla must be `|0>` and is returned to `|0>`.
    fn multi_controlled_z(&mut self, n_q: usize, ancilla: usize, negative: u64) -> Result<()> {
        let target = n_q - 1;
        let controls: Vec<usize> = (0..target).collect();
        let target_negative = negative >> target & 1 == 1;

        if target_negative {
            self.x(target);
        }
        self.gates.push(Gate::hadamard(target));

        let m = controls.len();
        if m <= 2 {
            self.flip(&controls, negative);
            self.vchain(&controls, target, &[])?;
            self.flip(&controls, negative);
        } else {
            let (a, b) = controls.split_at(m / 2);
            let mut dirty_for_a = b.to_vec();
            dirty_for_a.push(target);
            let mut b_and_anc = b.to_vec();
            b_and_anc.push(ancilla);

            self.flip(a, negative);
            self.vchain(a, ancilla, &dirty_for_a)?;
            self.flip(a, negative);

            self.flip(b, negative);
            self.vchain(&b_and_anc, target, a)?;
            self.flip(b, negative);

            self.flip(a, negative);
            self.vchain(a, ancilla, &dirty_for_a)?;
            self.flip(a, negative);
        }

        self.gates.push(Gate::hadamard(target));
        if target_negative {
            self.x(target);
        }
        Ok(())
    }
}

fn build_gates(config: &GroverConfig) -> Result<Vec<Gate>> {
    let n_q = config.n_q();
    let ancilla = n_q;
    let register_mask = (1u64 << n_q) - 1;
    let mut b = Builder { gates: Vec::new() };

    // Oracle: controls take the polarity of tau's bits.
    b.multi_controlled_z(n_q, ancilla, !(config.tau() as u64) & register_mask)?;

    // Diffusion: H^n (phase flip of |0...0>) H^n = -(2|psi_0><psi_0| - 1).
    for q in 0..n_q {
        b.gates.push(Gate::hadamard(q));
    }
    b.multi_controlled_z(n_q, ancilla, register_mask)?;
    for q in 0..n_q {
        b.gates.push(Gate::hadamard(q));
    }

    let mut gates = fuse_single_qubit_runs(b.gates);
    // Absorb the -1 of the diffusion into the last single-qubit gate on qubit 0.
    let last_on_0 = gates
        .iter()
        .rposition(|g| g.qubits().contains(&0))
        .ok_or_else(|| Error::InvalidGate("qubit 0 untouched".into()))?;
    match &mut gates[last_on_0] {
        Gate::Single { matrix, .. } => *matrix = qstate::scale2(matrix, Complex64::new(-1.0, 0.0)),
        _ => {
            let minus = Complex64::new(-1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            gates.push(Gate::Single {
                target: 0,
                matrix: [[minus, zero], [zero, minus]],
            });
        }
    }
    Ok(gates)
}

fn is_identity(m: &Matrix2) -> bool {
    let one = Complex64::new(1.0, 0.0);
    (m[0][0] - one).norm() < 1e-14
        && (m[1][1] - one).norm() < 1e-14
        && m[0][1].norm() < 1e-14
        && m[1][0].norm() < 1e-14
}

/// Merges consecutive single-qubit gates acting on the same qubit with no
/// intervening gate on that qubit, dropping products equal to the identity.
fn fuse_single_qubit_runs(gates: Vec<Gate>) -> Vec<Gate> {
    let mut out: Vec<Option<Gate>> = Vec::with_capacity(gates.len());
    let mut last_touch: Vec<Option<usize>> = Vec::new();
    for g in gates {
        let qs = g.qubits();
        let max_q = qs.iter().copied().max().unwrap_or(0);
        if last_touch.len() <= max_q {
            last_touch.resize(max_q + 1, None);
        }
        if let Gate::Single { target, matrix } = &g {
            if let Some(idx) = last_touch[*target] {
                if let Some(Gate::Single { matrix: prev, .. }) = &out[idx] {
                    let fused = qstate::matmul2(matrix, prev);
                    if is_identity(&fused) {
                        out[idx] = None;
                        last_touch[*target] = None;
                    } else {
                        out[idx] = Some(Gate::Single {
                            target: *target,
                            matrix: fused,
                        });
                    }
                    continue;
                }
            }
        }
        out.push(Some(g));
        for q in qs {
            last_touch[q] = Some(out.len() - 1);
        }
    }
    out.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Classical action of a gate list on a basis index, for permutation-only
    /// gate lists.
    fn classical_image(gates: &[Gate], mut x: usize) -> usize {
        for g in gates {
            match g {
                Gate::Cnot { control, target } => {
                    if x >> control & 1 == 1 {
                        x ^= 1 << target;
                    }
                }
                Gate::Toffoli { controls, target } => {
                    if x >> controls[0] & 1 == 1 && x >> controls[1] & 1 == 1 {
                        x ^= 1 << target;
                    }
                }
                Gate::Single { target, .. } => {
                    assert!(g.is_classical());
                    x ^= 1 << target;
                }
            }
        }
        x
    }

    #[test]
    fn vchain_is_multi_controlled_x_for_every_input() {
        // 6 controls, 4 dirty qubits, 1 target; exhaustive over all 2^11 inputs.
        let controls = [0, 1, 2, 3, 4, 5];
        let dirty = [6, 7, 8, 9];
        let target = 10;
        let mut b = Builder { gates: vec![] };
        b.vchain(&controls, target, &dirty).unwrap();
        assert_eq!(b.gates.len(), 4 * (controls.len() - 2));
        for x in 0..1usize << 11 {
            let all = controls.iter().all(|&c| x >> c & 1 == 1);
            let expect = if all { x ^ (1 << target) } else { x };
            assert_eq!(classical_image(&b.gates, x), expect, "input {x:#b}");
        }
    }

    #[test]
    fn vchain_rejects_missing_dirty_qubits() {
        let mut b = Builder { gates: vec![] };
        assert!(b.vchain(&[0, 1, 2, 3], 4, &[5]).is_err());
    }

    #[test]
    fn config_examples() {
        let c = GroverConfig::new(11, 0).unwrap();
        assert_eq!(c.n_tot(), 12);
        assert_eq!(c.n_g_paper(), Some(102));
        assert_eq!(GroverConfig::new(8, 0).unwrap().n_g_paper(), Some(66));
        assert_eq!(GroverConfig::new(2, 0).unwrap().n_g_paper(), None);
        assert!((c.t_grover() - 35.5).abs() < 0.05);
        assert_eq!(GroverConfig::with_units(8, 4).unwrap().tau(), 0b1111);
        assert_eq!(GroverConfig::with_units(8, 4).unwrap().n_units(), 4);
        assert!(GroverConfig::new(2, 4).is_err());
        assert!(GroverConfig::with_units(3, 4).is_err());
        assert!(GroverConfig::new(20, 0).is_err());
    }

    #[test]
    fn ideal_probability_examples() {
        let c4 = GroverConfig::new(2, 0).unwrap();
        assert!((c4.omega() - PI / 3.0).abs() < 1e-15);
        assert!((ideal_probability(1, &c4) - 1.0).abs() < 1e-15);
        let c = GroverConfig::new(11, 5).unwrap();
        assert!((ideal_probability(0, &c) - 1.0 / 2048.0).abs() < 1e-15);
        assert!((PI / c.omega() - 71.0).abs() < 0.2);
        let w35 = ideal_probability(35, &c);
        assert!(w35 > 1.0 - 1e-3 && w35 <= 1.0);
    }

    #[test]
    fn eta_state_examples() {
        let c = GroverConfig::new(2, 2).unwrap();
        let eta = eta_state(&c);
        let a = 1.0 / 3f64.sqrt();
        let expect = [a, a, 0.0, a];
        for (z, e) in eta.amplitudes().iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-15 && z.im == 0.0);
        }
        for n_q in 1..6 {
            for tau in [0, (1 << n_q) - 1] {
                let c = GroverConfig::new(n_q, tau).unwrap();
                let eta = eta_state(&c);
                let t = StateVector::basis_state(n_q, tau).unwrap();
                assert!(eta.inner_product(&t).unwrap().norm() < 1e-15);
                let n = c.search_size() as f64;
                let mut psi0 = StateVector::uniform_state(n_q, 0).unwrap().into_amplitudes();
                psi0.truncate(c.search_size());
                let psi0 = StateVector::from_amplitudes(psi0).unwrap();
                let ov = eta.inner_product(&psi0).unwrap();
                assert!((ov.re - ((n - 1.0) / n).sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_grover_examples() {
        let c = GroverConfig::new(2, 0).unwrap();
        let mut psi = StateVector::from_amplitudes(vec![Complex64::new(0.5, 0.0); 4]).unwrap();
        apply_exact_grover(&mut psi, &c).unwrap();
        assert!((psi.probability(0) - 1.0).abs() < 1e-14);

        // |eta> sits at angle 0 of the rotation plane, so one step gives
        // sin(omega)|tau> + cos(omega)|eta>.
        let c = GroverConfig::new(2, 1).unwrap();
        let mut eta = eta_state(&c);
        apply_exact_grover(&mut eta, &c).unwrap();
        let w = c.omega();
        let expect_tau = w.sin();
        let expect_eta = w.cos() / 3f64.sqrt();
        assert!((eta.amplitudes()[1].re - expect_tau).abs() < 1e-14);
        for x in [0, 2, 3] {
            assert!((eta.amplitudes()[x].re - expect_eta).abs() < 1e-14);
        }
    }

    #[test]
    fn small_circuit_finds_tau_in_one_step() {
        for tau in 0..4 {
            let c = GroverConfig::new(2, tau).unwrap();
            let circuit = GroverCircuit::build(c).unwrap();
            let mut s = StateVector::uniform_state(2, 0).unwrap();
            circuit.apply(&mut s).unwrap();
            assert!((s.probability(tau) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tick_spreading() {
        assert_eq!(spread_ticks(4, 4), vec![1, 1, 1, 1]);
        assert_eq!(spread_ticks(4, 2), vec![0, 1, 0, 1]);
        assert_eq!(spread_ticks(2, 5), vec![2, 3]);
        for (g, t) in [(150, 102), (60, 54), (7, 30)] {
            let s = spread_ticks(g, t);
            assert_eq!(s.iter().sum::<usize>(), t);
            assert_eq!(*s.last().unwrap() >= 1, true);
        }
    }

    #[test]
    fn paper_tick_mode_counts() {
        let c = GroverConfig::new(11, 3).unwrap();
        let circ = GroverCircuit::build(c).unwrap();
        assert_eq!(circ.ticks_per_iteration(), circ.n_g_actual());
        let paper = circ.with_tick_mode(TickMode::Paper).unwrap();
        assert_eq!(paper.ticks_per_iteration(), 102);
        let tiny = GroverCircuit::build(GroverConfig::new(2, 0).unwrap()).unwrap();
        assert!(tiny.with_tick_mode(TickMode::Paper).is_err());
    }

    #[test]
    fn gate_set_and_dump() {
        let circ = GroverCircuit::build(GroverConfig::new(5, 9).unwrap()).unwrap();
        let dump = circ.dump();
        assert_eq!(dump.lines().count(), circ.n_g_actual() + 1);
        for line in dump.lines().skip(1) {
            let kind = line.split_whitespace().next().unwrap();
            assert!(["U1", "CNOT", "TOFFOLI"].contains(&kind), "{line}");
        }
        // Deterministic build.
        let again = GroverCircuit::build(GroverConfig::new(5, 9).unwrap()).unwrap();
        assert_eq!(again.gates(), circ.gates());
    }
}
