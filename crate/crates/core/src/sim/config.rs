//! MFP run configuration and its TOML file schema.
//!
//! ```toml
//! [game]
//! u1 = [[1.0, 0.0], [0.0, 1.0]]
//! u2 = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [exploration1]
//! m0 = [[0.5, 0.5], [0.5, 0.5]]
//! pi0 = [0.5, 0.5]
//!
//! [exploration2]
//! m0 = [[0.5, 0.5], [0.5, 0.5]]
//! pi0 = [0.5, 0.5]
//!
//! [schedule]
//! A1 = 0.5
//! A2 = 0.5
//! interpretation = "ratio"
//!
//! [run]
//! horizon = 10000
//! replicas = 4
//! ```
//!
//! Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::game::{BetaForm, BetaSchedule, ExplorationMatrix, Game, Interpretation};

/// How much of the noise sequence `U_n` a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRecording {
    #[default]
    None,
    /// Only at the recorded (thinned) steps.
    Thinned,
    /// Every `U_n`, `n = 1..=N`.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfpConfig {
    pub game: Game,
    pub exploration: [ExplorationMatrix; 2],
    pub beta: [BetaSchedule; 2],
    pub interpretation: Interpretation,
    /// Number of steps `N`.
    pub horizon: usize,
    /// Record every `thin`-th step (plus the first and last).
    pub thin: usize,
    pub seed: u64,
    pub replicas: usize,
    /// Initial pure actions `(X_0, Y_0)`, zero-based.
    pub start: (usize, usize),
    pub noise: NoiseRecording,
    /// Keep every pure action `X_0..X_N` (needed by the noise decomposition).
    pub keep_actions: bool,
}

impl MfpConfig {
    /// Uniform exploration, logarithmic schedules with the same `A`.
    pub fn new(game: Game, a: f64, horizon: usize) -> Self {
        let (m1, m2) = game.actions();
        Self {
            game,
            exploration: [ExplorationMatrix::uniform(m1), ExplorationMatrix::uniform(m2)],
            beta: [BetaSchedule::logarithmic(a), BetaSchedule::logarithmic(a)],
            interpretation: Interpretation::Ratio,
            horizon,
            thin: 1,
            seed: 0,
            replicas: 1,
            start: (0, 0),
            noise: NoiseRecording::None,
            keep_actions: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (m1, m2) = self.game.actions();
        if self.exploration[0].size() != m1 || self.exploration[1].size() != m2 {
            return domain("exploration matrix sizes must match the action counts");
        }
        if self.horizon < 10 {
            return domain("horizon must be at least 10");
        }
        if self.thin == 0 || self.replicas == 0 {
            return domain("thin and replicas must be positive");
        }
        if self.start.0 >= m1 || self.start.1 >= m2 {
            return domain("start actions out of range");
        }
        for b in &self.beta {
            if !(b.a >= 0.0) || !b.a.is_finite() {
                return domain("schedule constants A must be finite and nonnegative");
            }
            if let BetaForm::SubLogarithmic { exponent } = b.form {
                if !(exponent > 0.0 && exponent < 1.0) {
                    return domain("sub-logarithmic exponent must lie in (0, 1)");
                }
            }
        }
        Ok(())
    }

    /// Dimension of `v_n = (x̄_n, ȳ_n)`.
    pub fn state_dim(&self) -> usize {
        let (m1, m2) = self.game.actions();
        m1 + m2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSection {
    pub m0: Vec<Vec<f64>>,
    pub pi0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(default)]
    pub interpretation: Interpretation,
    #[serde(default)]
    pub form: BetaForm,
    #[serde(rename = "override_tilde_A1", default, skip_serializing_if = "Option::is_none")]
    pub override_tilde_a1: Option<f64>,
    #[serde(rename = "override_tilde_A2", default, skip_serializing_if = "Option::is_none")]
    pub override_tilde_a2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub horizon: usize,
    pub thin: usize,
    pub seed: u64,
    pub replicas: usize,
    /// One-based initial actions `[X_0, Y_0]`.
    pub start: [usize; 2],
    pub noise: NoiseRecording,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            thin: 1,
            seed: 0,
            replicas: 8,
            start: [1, 1],
            noise: NoiseRecording::None,
        }
    }
}

/// Settings of the analysis commands; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Window length `T`.
    pub window: f64,
    /// Euler step of the shadowing bundles.
    pub h: f64,
    pub bundle: usize,
    /// Threshold `ε` of the tail table.
    pub eps: f64,
    pub n_grid: Vec<usize>,
    pub radius: f64,
    pub grid_resolution: usize,
    pub tie_tol: f64,
    pub tail_fraction: f64,
    pub grid_eps: f64,
    /// Certificate constants; calibrated when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_cert: Option<f64>,
    /// Half-width of the basin probe box around each strict equilibrium.
    pub probe_width: f64,
    /// Moment exponent `q` for the step-size check.
    pub q: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            window: 1.0,
            h: 0.01,
            bundle: 4,
            eps: 0.1,
            n_grid: vec![100, 1_000, 10_000],
            radius: 0.05,
            grid_resolution: 50,
            tie_tol: crate::game::DEFAULT_TIE_TOL,
            tail_fraction: 0.1,
            grid_eps: 0.05,
            alpha: None,
            t_cert: None,
            probe_width: 0.2,
            q: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSection {
    pub name: String,
    pub version: String,
}

/// On-disk configuration; also the layout of run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub game: GameSection,
    pub exploration1: ExplorationSection,
    pub exploration2: ExplorationSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<ToolSection>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds and validates the run configuration.
    pub fn to_config(&self) -> Result<MfpConfig> {
        let game = Game::from_rows(&self.game.u1, &self.game.u2)?;
        let e1 = ExplorationMatrix::from_rows(&self.exploration1.m0, &self.exploration1.pi0)?;
        let e2 = ExplorationMatrix::from_rows(&self.exploration2.m0, &self.exploration2.pi0)?;
        let s = &self.schedule;
        let beta = |a, over| BetaSchedule {
            a,
            form: s.form,
            override_tilde_a: over,
        };
        if self.run.start.iter().any(|&a| a == 0) {
            return domain("run.start is one-based");
        }
        let cfg = MfpConfig {
            game,
            exploration: [e1, e2],
            beta: [beta(s.a1, s.override_tilde_a1), beta(s.a2, s.override_tilde_a2)],
            interpretation: s.interpretation,
            horizon: self.run.horizon,
            thin: self.run.thin,
            seed: self.run.seed,
            replicas: self.run.replicas,
            start: (self.run.start[0] - 1, self.run.start[1] - 1),
            noise: self.run.noise,
            keep_actions: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COORD: &str = r#"
[game]
u1 = [[1.0, 0.0], [0.0, 1.0]]
u2 = [[1.0, 0.0], [0.0, 1.0]]

[exploration1]
m0 = [[0.5, 0.5], [0.5, 0.5]]
pi0 = [0.5, 0.5]

[exploration2]
m0 = [[0.5, 0.5], [0.5, 0.5]]
pi0 = [0.5, 0.5]

[schedule]
A1 = 0.5
A2 = 1.0
"#;

    #[test]
    fn parses_minimal_file() {
        let file = ConfigFile::parse(COORD).unwrap();
        let cfg = file.to_config().unwrap();
        assert_eq!(cfg.beta[1].a, 1.0);
        assert_eq!(cfg.interpretation, Interpretation::Ratio);
        assert_eq!(cfg.horizon, 10_000);
        assert_eq!(cfg.start, (0, 0));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_sections() {
        let bad = COORD.replace("A2 = 1.0", "A2 = 1.0\nA3 = 2.0");
        assert!(ConfigFile::parse(&bad).unwrap_err().to_string().contains("A3"));
        let missing = COORD.replace("[game]", "[gamez]");
        let err = ConfigFile::parse(&missing).unwrap_err().to_string();
        assert!(err.contains("gamez") || err.contains("game"), "{err}");
    }

    #[test]
    fn manifest_round_trip() {
        let mut file = ConfigFile::parse(COORD).unwrap();
        file.tool = Some(ToolSection {
            name: "mfp".into(),
            version: "0.1.0".into(),
        });
        let back = ConfigFile::parse(&file.to_toml()).unwrap();
        assert_eq!(back, file);
    }
}
