//! Experiment configuration: built-in defaults per command, an optional JSON
//! file, then command-line flags.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use grover_decoherence::{GroverConfig, TickMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest total qubit count accepted by the trajectory commands.
pub const MAX_TOTAL_QUBITS: usize = 20;
/// Largest total qubit count accepted by `validate`.
pub const MAX_ORACLE_QUBITS: usize = grover_decoherence::density::MAX_DENSITY_QUBITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Ideal,
    Trajectories,
    Scan,
    Husimi,
    Validate,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Ideal => "ideal",
            CommandKind::Trajectories => "trajectories",
            CommandKind::Scan => "scan",
            CommandKind::Husimi => "husimi",
            CommandKind::Validate => "validate",
        }
    }
}

mod tick_mode_name {
    use grover_decoherence::TickMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(mode: &TickMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(mode.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TickMode, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything that determines the numbers in an output file. Output
/// location, worker count and plot-script emission are read from config
/// files but never embedded in headers, so they cannot change output bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_q: Vec<usize>,
    pub tau: Option<usize>,
    pub n_u: Vec<usize>,
    pub gamma: Vec<f64>,
    pub trajectories: usize,
    pub t_max: Option<usize>,
    pub seed: u64,
    #[serde(with = "tick_mode_name")]
    pub tick_mode: TickMode,
    pub husimi_times: Vec<usize>,
    pub husimi_bins: Option<usize>,
    pub validate_seeds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupt_no_jump: Option<f64>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    #[serde(skip_serializing)]
    pub workers: usize,
    #[serde(skip_serializing)]
    pub gnuplot: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_q: vec![11],
            tau: None,
            n_u: Vec::new(),
            gamma: vec![4e-5],
            trajectories: 400,
            t_max: None,
            seed: 1,
            tick_mode: TickMode::Actual,
            husimi_times: vec![1, 17, 35],
            husimi_bins: None,
            validate_seeds: 3,
            corrupt_no_jump: None,
            out: PathBuf::from("out"),
            workers: 0,
            gnuplot: false,
        }
    }
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Register qubits (repeatable).
    #[arg(long = "nq", value_name = "N_Q")]
    pub n_q: Vec<usize>,
    /// Searched register value.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Number of units in tau; selects tau = 2^n_u - 1 (repeatable).
    #[arg(long = "nu", value_name = "N_U")]
    pub n_u: Vec<usize>,
    /// Single-qubit decay rate per gate (repeatable).
    #[arg(long)]
    pub gamma: Vec<f64>,
    /// Trajectories per ensemble.
    #[arg(long = "traj", value_name = "M")]
    pub trajectories: Option<usize>,
    /// Grover iterations to simulate [default: ceil(12 t_G)].
    #[arg(long = "tmax")]
    pub t_max: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise ticks per iteration: one per gate, or 12 n_tot - 42.
    #[arg(long = "tick-mode", value_name = "actual|paper")]
    pub tick_mode: Option<TickMode>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (0: all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write gnuplot scripts next to the data files.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct HusimiArgs {
    /// Iterations at which grids are written.
    #[arg(long, value_delimiter = ',')]
    pub times: Vec<usize>,
    /// Grid size after block summing (must divide 2N).
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ValidateArgs {
    /// Number of master seeds, starting at --seed.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Test fixture: trajectories use this rate in the no-jump factor.
    #[arg(long = "corrupt-no-jump", hide = true)]
    pub corrupt_no_jump: Option<f64>,
}

impl ExperimentConfig {
    /// Built-in defaults for `kind`.
    pub fn defaults_for(kind: CommandKind) -> Self {
        let base = Self::default();
        match kind {
            CommandKind::Validate => Self {
                n_q: vec![3, 4],
                gamma: vec![1e-3],
                trajectories: 10_000,
                t_max: Some(50),
                ..base
            },
            CommandKind::Husimi => Self {
                gamma: vec![2e-4],
                trajectories: 1,
                ..base
            },
            _ => base,
        }
    }

    /// Defaults, then the config file (its fields replace defaults), then
    /// flags.
    pub fn resolve(
        kind: CommandKind,
        common: &CommonArgs,
        husimi: Option<&HusimiArgs>,
        validate: Option<&ValidateArgs>,
    ) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                merge_onto(Self::defaults_for(kind), value)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => Self::defaults_for(kind),
        };
        if !common.n_q.is_empty() {
            cfg.n_q = common.n_q.clone();
        }
        if common.tau.is_some() {
            cfg.tau = common.tau;
            cfg.n_u.clear();
        }
        if !common.n_u.is_empty() {
            cfg.n_u = common.n_u.clone();
            cfg.tau = None;
        }
        if !common.gamma.is_empty() {
            cfg.gamma = common.gamma.clone();
        }
        if let Some(m) = common.trajectories {
            cfg.trajectories = m;
        }
        if common.t_max.is_some() {
            cfg.t_max = common.t_max;
        }
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if let Some(mode) = common.tick_mode {
            cfg.tick_mode = mode;
        }
        if let Some(out) = &common.out {
            cfg.out = out.clone();
        }
        if let Some(w) = common.workers {
            cfg.workers = w;
        }
        cfg.gnuplot |= common.gnuplot;
        if let Some(h) = husimi {
            if !h.times.is_empty() {
                cfg.husimi_times = h.times.clone();
            }
            if h.bins.is_some() {
                cfg.husimi_bins = h.bins;
            }
        }
        if let Some(v) = validate {
            if let Some(s) = v.seeds {
                cfg.validate_seeds = s;
            }
            if v.corrupt_no_jump.is_some() {
                cfg.corrupt_no_jump = v.corrupt_no_jump;
            }
        }
        cfg.validate(kind)?;
        Ok(cfg)
    }

    pub fn validate(&self, kind: CommandKind) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n_q.is_empty() {
            return bad("at least one n_q is required".into());
        }
        let limit = if kind == CommandKind::Validate {
            MAX_ORACLE_QUBITS
        } else {
            MAX_TOTAL_QUBITS
        };
        for &n_q in &self.n_q {
            if n_q < 2 {
                return bad(format!("n_q must be at least 2, got {n_q}"));
            }
            if n_q + 1 > limit {
                return bad(format!(
                    "n_tot = {} exceeds the limit of {limit} qubits for `{}`",
                    n_q + 1,
                    kind.name()
                ));
            }
            if let Some(tau) = self.tau {
                if tau >= 1 << n_q {
                    return bad(format!("tau = {tau} out of range for n_q = {n_q}"));
                }
            }
            for &u in &self.n_u {
                if u > n_q {
                    return bad(format!("n_u = {u} exceeds n_q = {n_q}"));
                }
            }
        }
        if self.tau.is_some() && !self.n_u.is_empty() {
            return bad("set either tau or n_u, not both".into());
        }
        if self.gamma.is_empty() && kind != CommandKind::Ideal {
            return bad("at least one gamma is required".into());
        }
        for &g in &self.gamma {
            if !(0.0..1.0).contains(&g) {
                return bad(format!("gamma must lie in [0, 1), got {g}"));
            }
        }
        if let Some(g) = self.corrupt_no_jump {
            if !(0.0..1.0).contains(&g) {
                return bad(format!("corrupted no-jump rate must lie in [0, 1), got {g}"));
            }
        }
        if self.trajectories == 0 {
            return bad("at least one trajectory is required".into());
        }
        if self.t_max == Some(0) && kind != CommandKind::Husimi {
            return bad("t_max must be positive".into());
        }
        if kind == CommandKind::Validate && self.validate_seeds == 0 {
            return bad("at least one validation seed is required".into());
        }
        if kind == CommandKind::Husimi {
            if self.husimi_times.is_empty() {
                return bad("at least one Husimi time is required".into());
            }
            if let Some(t_max) = self.t_max {
                if let Some(&t) = self.husimi_times.iter().find(|&&t| t > t_max) {
                    return bad(format!("Husimi time {t} exceeds t_max = {t_max}"));
                }
            }
        }
        if self.tick_mode == TickMode::Paper {
            for &n_q in &self.n_q {
                let cfg = GroverConfig::new(n_q, 0).map_err(|e| CliError::Config(e.to_string()))?;
                if cfg.n_g_paper().is_none() {
                    return bad(format!("paper tick mode undefined for n_tot = {}", n_q + 1));
                }
            }
        }
        Ok(())
    }

    /// Searched values for `n_q`: from `n_u` if given, else `tau`, else
    /// `2^(n_q/2) - 1`.
    pub fn taus(&self, n_q: usize) -> Vec<usize> {
        if !self.n_u.is_empty() {
            self.n_u.iter().map(|&u| (1usize << u) - 1).collect()
        } else {
            vec![self.tau.unwrap_or((1 << (n_q / 2)) - 1)]
        }
    }

    /// `t_max` for a point, defaulting to `ceil(12 t_G)`.
    pub fn t_max_for(&self, config: &GroverConfig) -> usize {
        self.t_max.unwrap_or_else(|| (12.0 * config.t_grover()).ceil() as usize)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Overlays the JSON object `value` onto `base` field by field.
fn merge_onto(base: ExperimentConfig, value: serde_json::Value) -> Result<ExperimentConfig, serde_json::Error> {
    let mut merged = serde_json::to_value(&base)?;
    // Fields skipped on serialization still need their defaults.
    let extras = serde_json::json!({
        "out": base.out,
        "workers": base.workers,
        "gnuplot": base.gnuplot,
    });
    let obj = merged.as_object_mut().expect("config is an object");
    for (k, v) in extras.as_object().expect("object") {
        obj.insert(k.clone(), v.clone());
    }
    match value {
        serde_json::Value::Object(fields) => {
            for (k, v) in fields {
                obj.insert(k, v);
            }
        }
        other => {
            return Err(serde::de::Error::custom(format!("expected a JSON object, got {other}")));
        }
    }
    serde_json::from_value(merged)
}
