//! Per-qubit amplitude damping and its quantum-jump unraveling.
//!
//! Kraus pair per qubit and tick: `E0 = diag(1, sqrt(1 - gamma))` (no jump)
//! and `E1 = sqrt(gamma) |0><1|` (jump). Qubits are processed in index order
//! and each consumes exactly one uniform draw per tick, so the random stream
//! stays aligned regardless of the state.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::qstate::{Matrix2, StateVector};

/// Amplitude-damping rate per qubit per tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    gamma: f64,
    no_jump_gamma: f64,
}

fn check_rate(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("damping rate must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

impl NoiseModel {
    pub fn new(gamma: f64) -> Result<Self> {
        check_rate(gamma)?;
        Ok(Self {
            gamma,
            no_jump_gamma: gamma,
        })
    }

    /// Deliberately inconsistent unraveling: jumps fire with rate `gamma` but
    /// the no-jump branch damps with `no_jump_gamma`. Only useful as a
    /// negative control for validation runs.
    #[doc(hidden)]
    pub fn corrupted(gamma: f64, no_jump_gamma: f64) -> Result<Self> {
        check_rate(gamma)?;
        check_rate(no_jump_gamma)?;
        Ok(Self { gamma, no_jump_gamma })
    }

    pub fn noiseless() -> Self {
        Self {
            gamma: 0.0,
            no_jump_gamma: 0.0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_noiseless(&self) -> bool {
        self.gamma == 0.0 && self.no_jump_gamma == 0.0
    }

    pub fn is_corrupted(&self) -> bool {
        self.gamma != self.no_jump_gamma
    }

    /// Amplitude factor the no-jump branch applies to `|1>`.
    pub fn no_jump_factor(&self) -> f64 {
        (1.0 - self.no_jump_gamma).sqrt()
    }

    /// `(E0, E1)` for the channel rate `gamma`.
    pub fn kraus(&self) -> (Matrix2, Matrix2) {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let e0 = [[one, z], [z, Complex64::new((1.0 - self.gamma).sqrt(), 0.0)]];
        let e1 = [[z, Complex64::new(self.gamma.sqrt(), 0.0)], [z, z]];
        (e0, e1)
    }
}

/// Applies `E1` on `qubit` (unnormalized): moves the `|1>` amplitudes down,
/// scaled by `sqrt(gamma)`, and clears the `|1>` branch.
pub(crate) fn apply_jump(amps: &mut [Complex64], qubit: usize, gamma: f64) {
    let stride = 1usize << qubit;
    let s = gamma.sqrt();
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            *a0 = *a1 * s;
            *a1 = Complex64::new(0.0, 0.0);
        }
    }
}

/// One noise tick on every qubit, qubit 0 first, following the sequential
/// jump/no-jump rule. Returns the number of jumps.
pub fn noise_tick<R: Rng + ?Sized>(state: &mut StateVector, noise: &NoiseModel, rng: &mut R) -> Result<usize> {
    let mut jumps = 0;
    let f = noise.no_jump_factor();
    for m in 0..state.n_qubits() {
        let u: f64 = rng.random();
        let p = noise.gamma * state.excited_population(m) / state.norm_sqr();
        if u < p {
            apply_jump(state.amplitudes_mut(), m, noise.gamma);
            jumps += 1;
        } else {
            let bit = 1usize << m;
            for (x, z) in state.amplitudes_mut().iter_mut().enumerate() {
                if x & bit != 0 {
                    *z *= f;
                }
            }
        }
        state.normalize()?;
    }
    Ok(jumps)
}

/// Noise tick with deferred diagonal scaling.
///
/// Consecutive no-jump factors are diagonal, so they are accumulated in a
/// qubit mask and applied in one pass at the end of the tick. The exact jump
/// probability is only evaluated when the uniform draw falls below `gamma`,
/// since `p_m <= gamma` always. Normalization is folded into the next pass
/// through `scale`; callers must apply `scale` before reading the state.
#[derive(Debug, Clone)]
pub(crate) struct FastTicker {
    gamma: f64,
    n_qubits: usize,
    /// `f^k` for `k` excited qubits in the pending mask (amplitude factor).
    powers: Vec<f64>,
    /// `f^popcount(x)` for every basis index, for the all-qubit mask.
    full: Vec<f64>,
    noiseless: bool,
}

impl FastTicker {
    pub(crate) fn new(noise: &NoiseModel, n_qubits: usize) -> Self {
        let f = noise.no_jump_factor();
        let powers: Vec<f64> = (0..=n_qubits as i32).map(|k| f.powi(k)).collect();
        let full = if noise.is_noiseless() {
            Vec::new()
        } else {
            (0..1usize << n_qubits)
                .map(|x| powers[x.count_ones() as usize])
                .collect()
        };
        Self {
            gamma: noise.gamma,
            n_qubits,
            powers,
            full,
            noiseless: noise.is_noiseless(),
        }
    }

    /// Multiplies pending no-jump factors and `scale` into the amplitudes and
    /// returns the resulting squared norm.
    fn materialize(&self, amps: &mut [Complex64], mask: usize, scale: f64) -> f64 {
        let mut n2 = 0.0;
        if mask == (1usize << self.n_qubits) - 1 {
            for (z, &f) in amps.iter_mut().zip(&self.full) {
                *z *= f * scale;
                n2 += z.norm_sqr();
            }
        } else {
            for (x, z) in amps.iter_mut().enumerate() {
                *z *= self.powers[(x & mask).count_ones() as usize] * scale;
                n2 += z.norm_sqr();
            }
        }
        n2
    }

    pub(crate) fn tick<R: Rng + ?Sized>(&self, amps: &mut [Complex64], scale: &mut f64, rng: &mut R) -> usize {
        if self.noiseless {
            for _ in 0..self.n_qubits {
                let _: f64 = rng.random();
            }
            return 0;
        }
        let mut jumps = 0;
        let mut mask = 0usize;
        for m in 0..self.n_qubits {
            let u: f64 = rng.random();
            if u < self.gamma && self.jump_probability(amps, mask, m) > u {
                self.materialize(amps, mask, 1.0);
                apply_jump(amps, m, self.gamma);
                let n2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
                let s = 1.0 / n2.sqrt();
                amps.iter_mut().for_each(|z| *z *= s);
                *scale = 1.0;
                mask = 0;
                jumps += 1;
            } else {
                mask |= 1 << m;
            }
        }
        if mask == 0 && *scale == 1.0 {
            return jumps;
        }
        let n2 = self.materialize(amps, mask, *scale);
        *scale = 1.0 / n2.sqrt();
        jumps
    }

    /// `gamma * <n_m>` on the state with the pending mask applied.
    fn jump_probability(&self, amps: &[Complex64], mask: usize, m: usize) -> f64 {
        let bit = 1usize << m;
        let (mut total, mut excited) = (0.0, 0.0);
        for (x, z) in amps.iter().enumerate() {
            let f = self.powers[(x & mask).count_ones() as usize];
            let w = z.norm_sqr() * f * f;
            total += w;
            if x & bit != 0 {
                excited += w;
            }
        }
        self.gamma * excited / total
    }
}
