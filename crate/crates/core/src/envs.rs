//! Small episodic reinforcement environments.
//!
//! Each environment is a pure transition function: the full episode state is
//! carried in [`EnvState`], so stepping depends only on `(state, action,
//! params)`. Returns are undiscounted sums of per-step reinforcements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("action {action} is outside 0..{count}")]
    InvalidAction { action: usize, count: usize },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown parameter `{0}` for this environment")]
    UnknownParam(String),
    #[error("parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvName {
    Xor,
    Gridnav,
    GridnavCompositional,
}

/// The `"env"` block of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: EnvName,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl EnvConfig {
    pub fn new(name: EnvName) -> Self {
        Self { name, params: BTreeMap::new() }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }
}

const GRID_PARAMS: &[&str] = &[
    "grid_size",
    "goal_x",
    "goal_y",
    "subgoal_x",
    "subgoal_y",
    "step_penalty",
    "goal_reward",
    "subgoal_reward",
    "max_steps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    pub size: i64,
    pub goal: (i64, i64),
    pub subgoal: (i64, i64),
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub subgoal_reward: f64,
}

/// A validated environment description.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: EnvName,
    pub input_dim: usize,
    pub output_dim: usize,
    pub max_steps: usize,
    pub params: BTreeMap<String, f64>,
    grid: Option<GridParams>,
}

fn int_param(params: &BTreeMap<String, f64>, name: &str, default: i64) -> Result<i64, EnvError> {
    match params.get(name) {
        None => Ok(default),
        Some(&v) if v.fract() == 0.0 && v.is_finite() => Ok(v as i64),
        Some(_) => Err(EnvError::InvalidParam { name: name.into(), reason: "must be an integer".into() }),
    }
}

fn real_param(params: &BTreeMap<String, f64>, name: &str, default: f64) -> Result<f64, EnvError> {
    match params.get(name) {
        None => Ok(default),
        Some(&v) if v.is_finite() && v >= 0.0 => Ok(v),
        Some(_) => Err(EnvError::InvalidParam { name: name.into(), reason: "must be finite and non-negative".into() }),
    }
}

impl EnvSpec {
    pub fn from_config(config: &EnvConfig) -> Result<Self, EnvError> {
        let p = &config.params;
        match config.name {
            EnvName::Xor => {
                if let Some(key) = p.keys().next() {
                    return Err(EnvError::UnknownParam(key.clone()));
                }
                Ok(Self { name: EnvName::Xor, input_dim: 2, output_dim: 1, max_steps: 1, params: p.clone(), grid: None })
            }
            EnvName::Gridnav | EnvName::GridnavCompositional => {
                if let Some(key) = p.keys().find(|k| !GRID_PARAMS.contains(&k.as_str())) {
                    return Err(EnvError::UnknownParam(key.clone()));
                }
                let size = int_param(p, "grid_size", 5)?;
                if size < 2 {
                    return Err(EnvError::InvalidParam { name: "grid_size".into(), reason: "must be at least 2".into() });
                }
                let cell = |name: &str, default: i64| -> Result<i64, EnvError> {
                    let v = int_param(p, name, default)?;
                    if !(0..size).contains(&v) {
                        return Err(EnvError::InvalidParam { name: name.into(), reason: format!("must lie in 0..{size}") });
                    }
                    Ok(v)
                };
                let goal = (cell("goal_x", size - 1)?, cell("goal_y", size - 1)?);
                let subgoal = (cell("subgoal_x", 0)?, cell("subgoal_y", size - 1)?);
                if goal == (0, 0) {
                    return Err(EnvError::InvalidParam { name: "goal_x".into(), reason: "goal must differ from the start cell".into() });
                }
                let cap = 4 * size * size;
                let max_steps = int_param(p, "max_steps", 2 * size * size)?;
                if max_steps < 1 || max_steps > cap {
                    return Err(EnvError::InvalidParam { name: "max_steps".into(), reason: format!("must lie in 1..={cap}") });
                }
                let grid = GridParams {
                    size,
                    goal,
                    subgoal,
                    step_penalty: real_param(p, "step_penalty", 0.01)?,
                    goal_reward: real_param(p, "goal_reward", 1.0)?,
                    subgoal_reward: real_param(p, "subgoal_reward", 0.5)?,
                };
                Ok(Self {
                    name: config.name,
                    input_dim: 4,
                    output_dim: 4,
                    max_steps: max_steps as usize,
                    params: p.clone(),
                    grid: Some(grid),
                })
            }
        }
    }

    pub fn xor() -> Self {
        Self::from_config(&EnvConfig::new(EnvName::Xor)).expect("default xor")
    }

    pub fn gridnav(size: i64) -> Self {
        Self::from_config(&EnvConfig::new(EnvName::Gridnav).with_param("grid_size", size as f64)).expect("default gridnav")
    }

    pub fn gridnav_compositional(size: i64) -> Self {
        Self::from_config(&EnvConfig::new(EnvName::GridnavCompositional).with_param("grid_size", size as f64))
            .expect("default gridnav-compositional")
    }

    pub fn grid(&self) -> Option<&GridParams> {
        self.grid.as_ref()
    }

    /// Overrides the step cap; a cap of zero yields empty episodes.
    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn action_count(&self) -> usize {
        match self.name {
            EnvName::Xor => 2,
            _ => 4,
        }
    }

    /// Number of distinct start states cycled through by episode index.
    pub fn cycle_len(&self) -> usize {
        match self.name {
            EnvName::Xor => XOR_PATTERNS.len(),
            _ => 1,
        }
    }

    /// Start state for the given episode index.
    pub fn reset(&self, episode_index: usize) -> EnvState {
        match self.name {
            EnvName::Xor => EnvState::Xor { inputs: XOR_PATTERNS[episode_index % XOR_PATTERNS.len()] },
            _ => EnvState::Grid { x: 0, y: 0, subgoal_visited: false, steps: 0 },
        }
    }

    /// Network-facing state vector, every component in [−1, 1].
    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        match (state, &self.grid) {
            (EnvState::Xor { inputs }, _) => inputs.to_vec(),
            (EnvState::Grid { x, y, subgoal_visited, .. }, Some(g)) => {
                let span = (g.size - 1) as f64;
                let target = if self.name == EnvName::GridnavCompositional && !subgoal_visited { g.subgoal } else { g.goal };
                vec![
                    2.0 * *x as f64 / span - 1.0,
                    2.0 * *y as f64 / span - 1.0,
                    (target.0 - x) as f64 / span,
                    (target.1 - y) as f64 / span,
                ]
            }
            (EnvState::Grid { .. }, None) => unreachable!("grid state on a non-grid environment"),
        }
    }

    /// Maps raw network outputs to an action: threshold at zero for xor,
    /// argmax (lowest index wins ties) for the grids.
    pub fn decode_action(&self, outputs: &[f64]) -> Result<usize, EnvError> {
        if outputs.len() != self.output_dim {
            return Err(EnvError::DimensionMismatch { expected: self.output_dim, got: outputs.len() });
        }
        Ok(match self.name {
            EnvName::Xor => usize::from(outputs[0] > 0.0),
            _ => {
                let mut best = 0;
                for (i, &v) in outputs.iter().enumerate() {
                    if v > outputs[best] {
                        best = i;
                    }
                }
                best
            }
        })
    }

    pub fn step(&self, state: &EnvState, action: usize) -> Result<Transition, EnvError> {
        if action >= self.action_count() {
            return Err(EnvError::InvalidAction { action, count: self.action_count() });
        }
        match (state, &self.grid) {
            (EnvState::Xor { inputs }, _) => {
                let target = usize::from((inputs[0] > 0.0) != (inputs[1] > 0.0));
                Ok(Transition {
                    next: state.clone(),
                    reinforcement: if action == target { 1.0 } else { 0.0 },
                    terminal: true,
                    truncated: false,
                })
            }
            (EnvState::Grid { x, y, subgoal_visited, steps }, Some(g)) => {
                let (dx, dy) = match action {
                    0 => (0, 1),
                    1 => (1, 0),
                    2 => (0, -1),
                    _ => (-1, 0),
                };
                let nx = (x + dx).clamp(0, g.size - 1);
                let ny = (y + dy).clamp(0, g.size - 1);
                let steps = steps + 1;
                let mut reinforcement = -g.step_penalty;
                let mut visited = *subgoal_visited;
                let mut terminal = false;
                if self.name == EnvName::GridnavCompositional {
                    if !visited && (nx, ny) == g.subgoal {
                        visited = true;
                        reinforcement += g.subgoal_reward;
                    } else if visited && (nx, ny) == g.goal {
                        reinforcement += g.goal_reward;
                        terminal = true;
                    }
                } else if (nx, ny) == g.goal {
                    reinforcement += g.goal_reward;
                    terminal = true;
                }
                Ok(Transition {
                    next: EnvState::Grid { x: nx, y: ny, subgoal_visited: visited, steps },
                    reinforcement,
                    terminal,
                    truncated: !terminal && steps as usize >= self.max_steps,
                })
            }
            (EnvState::Grid { .. }, None) => unreachable!("grid state on a non-grid environment"),
        }
    }

    /// Whether an episode counts as solving the task.
    pub fn episode_solved(&self, episode: &Episode) -> bool {
        match self.name {
            EnvName::Xor => episode.return_value >= 1.0,
            _ => episode.terminal,
        }
    }

    /// Runs one episode under `policy`, stopping at a terminal state or the
    /// step cap.
    pub fn run_episode<F>(&self, episode_index: usize, mut policy: F) -> Result<Episode, EnvError>
    where
        F: FnMut(&[f64]) -> Result<usize, EnvError>,
    {
        let mut state = self.reset(episode_index);
        let mut steps = Vec::new();
        let mut terminal = false;
        while steps.len() < self.max_steps {
            let observation = self.observe(&state);
            let action = policy(&observation)?;
            let t = self.step(&state, action)?;
            steps.push(Step { state: observation, action, reinforcement: t.reinforcement });
            state = t.next;
            if t.terminal {
                terminal = true;
                break;
            }
            if t.truncated {
                break;
            }
        }
        let return_value = episodic_return(&steps);
        Ok(Episode { steps, terminal, return_value })
    }
}

const XOR_PATTERNS: [[f64; 2]; 4] = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];

#[derive(Debug, Clone, PartialEq)]
pub enum EnvState {
    Xor { inputs: [f64; 2] },
    Grid { x: i64, y: i64, subgoal_visited: bool, steps: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: EnvState,
    pub reinforcement: f64,
    pub terminal: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub action: usize,
    pub reinforcement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: Vec<Step>,
    pub terminal: bool,
    pub return_value: f64,
}

pub fn episodic_return(steps: &[Step]) -> f64 {
    steps.iter().map(|s| s.reinforcement).sum()
}
