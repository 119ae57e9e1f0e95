//! Scenario configuration files (TOML).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub state: StateConfig,
    /// Applied in order to the input state; for trees, before the splitting network.
    #[serde(default)]
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    Tree {
        depth: u32,
        r: f64,
    },
    Cluster {
        modes: usize,
        r: f64,
        g: f64,
        /// Defaults to the linear chain.
        #[serde(default)]
        edges: Option<Vec<[usize; 2]>>,
    },
    Product {
        modes: usize,
        r: f64,
    },
    TwoMode {
        r: f64,
    },
}

impl StateConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StateConfig::Tree { .. } => "tree",
            StateConfig::Cluster { .. } => "cluster",
            StateConfig::Product { .. } => "product",
            StateConfig::TwoMode { .. } => "two-mode",
        }
    }

    pub fn r(&self) -> f64 {
        match *self {
            StateConfig::Tree { r, .. }
            | StateConfig::Cluster { r, .. }
            | StateConfig::Product { r, .. }
            | StateConfig::TwoMode { r } => r,
        }
    }

    /// Modes of the state before any splitting network.
    pub fn input_modes(&self) -> usize {
        match *self {
            StateConfig::Tree { .. } | StateConfig::TwoMode { .. } => 2,
            StateConfig::Cluster { modes, .. } | StateConfig::Product { modes, .. } => modes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Channel {
    /// One transmissivity per input mode, or a single value for all.
    Loss { eta: Vec<f64> },
    /// One `[re, im]` pair per input mode.
    Displace { alpha: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    Average,
    Custom,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    #[serde(default)]
    pub direction: Direction,
    /// Required for `custom`; normalised on load.
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
}

/// Grid axes. A missing axis takes the value from `state` (or no channel).
/// `alpha` displaces input mode 0 by a real amplitude and `eta` applies a
/// uniform loss; both act after the listed channels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub r: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
    pub depth: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    #[default]
    Shots,
    Wishart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub shots: u64,
    pub repetitions: usize,
    /// 0 disables the adaptive pre-run.
    pub pre_shots: u64,
    pub theta: [f64; 2],
    pub sampler: SamplerKind,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self { shots: 100_000, repetitions: 200, pre_shots: 1000, theta: [0.01, 0.03], sampler: SamplerKind::Shots }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub n_max: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { n_max: 40 }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        cfg.normalize()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let finite = |name: &str, xs: &[f64]| match xs.iter().find(|x| !x.is_finite()) {
            Some(x) => Err(format!("{name}: non-finite value {x}")),
            None => Ok(()),
        };
        finite("state.r", &[self.state.r()])?;
        match &self.state {
            StateConfig::Tree { depth, .. } if *depth == 0 => return Err("state.depth must be at least 1".into()),
            StateConfig::Cluster { modes: 0, .. } | StateConfig::Product { modes: 0, .. } => {
                return Err("state.modes must be at least 1".into())
            }
            StateConfig::Cluster { modes, g, edges, .. } => {
                finite("state.g", &[*g])?;
                for [a, b] in edges.iter().flatten() {
                    if a == b || a >= modes || b >= modes {
                        return Err(format!("state.edges: invalid edge ({a}, {b}) for {modes} modes"));
                    }
                }
            }
            _ => {}
        }
        let m = self.state.input_modes();
        for (k, ch) in self.channels.iter().enumerate() {
            match ch {
                Channel::Loss { eta } => {
                    if eta.len() != 1 && eta.len() != m {
                        return Err(format!("channels[{k}]: {} transmissivities for {m} modes", eta.len()));
                    }
                    if let Some(x) = eta.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                        return Err(format!("channels[{k}]: transmissivity {x} outside [0, 1]"));
                    }
                }
                Channel::Displace { alpha } => {
                    if alpha.len() != m {
                        return Err(format!("channels[{k}]: {} amplitudes for {m} modes", alpha.len()));
                    }
                    finite(&format!("channels[{k}].alpha"), alpha.as_flattened())?;
                }
            }
        }
        let s = &self.sweep;
        for (name, axis) in [("r", &s.r), ("eta", &s.eta), ("alpha", &s.alpha), ("g", &s.g)] {
            if let Some(xs) = axis {
                if xs.is_empty() {
                    return Err(format!("sweep.{name} is empty"));
                }
                finite(&format!("sweep.{name}"), xs)?;
            }
        }
        if let Some(xs) = &s.eta {
            if let Some(x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(format!("sweep.eta: transmissivity {x} outside [0, 1]"));
            }
        }
        if let Some(ds) = &s.depth {
            if ds.is_empty() {
                return Err("sweep.depth is empty".into());
            }
            if !matches!(self.state, StateConfig::Tree { .. }) {
                return Err("sweep.depth needs a tree state".into());
            }
            if let Some(d) = ds.iter().find(|d| **d == 0 || **d > cvpriv_core::network::MAX_DEPTH) {
                return Err(format!("sweep.depth: depth {d} out of range"));
            }
        }
        if s.g.is_some() && !matches!(self.state, StateConfig::Cluster { .. }) {
            return Err("sweep.g needs a cluster state".into());
        }
        let p = &self.protocol;
        if p.shots < 2 || p.repetitions < 2 {
            return Err("protocol needs at least 2 shots and 2 repetitions".into());
        }
        finite("protocol.theta", &p.theta)?;
        if self.oracle.n_max == 0 {
            return Err("oracle.n_max must be positive".into());
        }
        Ok(())
    }

    fn normalize(&mut self) -> Result<(), String> {
        match (self.target.direction, &mut self.target.vector) {
            (Direction::Average, Some(_)) => Err("target.vector given with direction = \"average\"".into()),
            (Direction::Average, None) => Ok(()),
            (Direction::Custom, None) => Err("target.direction = \"custom\" needs target.vector".into()),
            (Direction::Custom, Some(v)) => {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err("target.vector must be finite and non-zero".into());
                }
                v.iter_mut().for_each(|x| *x /= norm);
                Ok(())
            }
        }
    }

    /// First 16 hex digits of the SHA-256 of the normalised configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "schema_version = 1\n[state]\nkind = \"tree\"\ndepth = 2\nr = 1.0\n";

    #[test]
    fn parses_minimal_config() {
        let cfg = ScenarioConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.state, StateConfig::Tree { depth: 2, r: 1.0 });
        assert_eq!(cfg.target.direction, Direction::Average);
        assert_eq!(cfg.protocol.shots, 100_000);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ScenarioConfig::from_toml(&format!("{BASE}colour = 3\n")).is_err());
        assert!(ScenarioConfig::from_toml(&BASE.replace("r = 1.0", "r = 1.0\nwidth = 2")).is_err());
        assert!(ScenarioConfig::from_toml(&format!("{BASE}[sweep]\nbeta = [1.0]\n")).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ScenarioConfig::from_toml(&BASE.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(ScenarioConfig::from_toml(&format!("{BASE}[sweep]\nr = []\n")).is_err());
        assert!(ScenarioConfig::from_toml(&format!("{BASE}[sweep]\neta = [1.5]\n")).is_err());
        assert!(ScenarioConfig::from_toml(&format!("{BASE}[sweep]\ng = [0.5]\n")).is_err());
        assert!(ScenarioConfig::from_toml(&format!("{BASE}[[channels]]\nkind = \"loss\"\neta = [0.5, 0.5, 0.5]\n")).is_err());
        assert!(ScenarioConfig::from_toml(&format!("{BASE}[target]\ndirection = \"custom\"\n")).is_err());
    }

    #[test]
    fn custom_direction_is_normalised() {
        let cfg = ScenarioConfig::from_toml(&format!("{BASE}[target]\ndirection = \"custom\"\nvector = [3.0, 4.0]\n")).unwrap();
        assert_eq!(cfg.target.vector, Some(vec![0.6, 0.8]));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::from_toml(BASE).unwrap();
        let b = ScenarioConfig::from_toml(&BASE.replace("r = 1.0", "r = 1.5")).unwrap();
        assert_eq!(a.hash(), ScenarioConfig::from_toml(BASE).unwrap().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
