use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LdgError, Result};
use crate::mesh::Rectangle;
use crate::orlicz::default_alpha;
use crate::solver::{NewtonOptions, ShiftMode};

/// How each level's Newton iteration is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    #[default]
    Zero,
    /// Prolongation of the previous level's solution; on the first level
    /// the solution of the linear (`p = 2`) problem with the same data.
    Continuation,
}

impl std::str::FromStr for InitialGuess {
    type Err = LdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitialGuess::Zero),
            "continuation" => Ok(InitialGuess::Continuation),
            _ => Err(LdgError::Usage(format!(
                "unknown initial guess '{s}' (expected zero or continuation)"
            ))),
        }
    }
}

/// Everything that defines one run of the manufactured-solution experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    pub k: usize,
    /// Number of mesh levels `0..levels`.
    pub levels: usize,
    pub beta: f64,
    pub domain: Rectangle,
    /// Spacing of the level-0 grid.
    pub h0: f64,
    pub atol: f64,
    pub rtol: f64,
    pub max_iter: usize,
    pub shift_mode: ShiftMode,
    pub initial_guess: InitialGuess,
    /// Extra quadrature orders on cells touching the origin.
    pub origin_extra_order: usize,
    pub out: PathBuf,
}

impl RunConfig {
    /// Defaults of the experiment for exponent `p`; `α` from the built-in table
    /// (falling back to 1 for exponents not in it).
    pub fn for_p(p: f64) -> Self {
        RunConfig {
            p,
            delta: 1e-3,
            alpha: default_alpha(p).unwrap_or(1.0),
            k: 1,
            levels: 5,
            beta: 0.01,
            domain: Rectangle::square(-2.0, 2.0),
            h0: 1.0,
            atol: 1e-8,
            rtol: 1e-10,
            max_iter: 100,
            shift_mode: ShiftMode::Lagged,
            initial_guess: InitialGuess::Zero,
            origin_extra_order: 4,
            out: PathBuf::from("out"),
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            atol: self.atol,
            rtol: self.rtol,
            max_iter: self.max_iter,
            shift_mode: self.shift_mode,
            ..NewtonOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !(self.delta >= 0.0) || !(self.alpha > 0.0) {
            return Err(LdgError::Config(format!(
                "need p > 1, delta >= 0 and alpha > 0 (got p = {}, delta = {}, alpha = {})",
                self.p, self.delta, self.alpha
            )));
        }
        if self.levels == 0 {
            return Err(LdgError::Config("levels must be at least 1".into()));
        }
        if !(self.atol > 0.0) || !(self.rtol > 0.0) {
            return Err(LdgError::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Parses a flat `key = value` file; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            LdgError::Usage(format!(
                "config line {}: expected key=value, got '{line}'",
                n + 1
            ))
        })?;
        let key = k.trim().replace('_', "-");
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}
