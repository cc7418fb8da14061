//! TOML scenario files.
//!
//! ```toml
//! index_base = 1
//! seed = 1
//! horizon = 400
//!
//! [graph]
//! kind = "circulant"
//! n = 14
//! k = 5
//! undirected = true
//!
//! [roles]
//! leaders = [1, 2, 3, 4, 5]
//!
//! [params]
//! f = 2
//! eta = 10
//!
//! [signal]
//! kind = "sinusoid"
//! amplitude = 10.0
//! rate_over_pi = 1.0
//!
//! [initial]
//! kind = "uniform"
//! lo = -25.0
//! hi = 25.0
//!
//! [[adversaries]]
//! agent = 1
//! behavior = "malicious"
//! ```
//!
//! Agent labels in `roles` and `adversaries` are shifted by `index_base`.
//! Edge-list files are always 0-based. Unknown keys are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundled;
use crate::engine::{InitialStates, Scenario};
use crate::error::{Error, Result};
use crate::graph::{k_circulant, AgentId, Digraph};
use crate::protocol::{Misbehavior, ProtocolParams, ValueSource};
use crate::signal::ReferenceSignal;

/// Horizon used when the file omits one, in periods.
pub const DEFAULT_HORIZON_PERIODS: u64 = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub index_base: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    pub graph: GraphSpec,
    pub roles: RolesSpec,
    pub params: ProtocolParams,
    pub signal: ReferenceSignal,
    pub initial: InitialStates,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adversaries: Vec<AdversarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Circulant {
        n: usize,
        k: usize,
        #[serde(default)]
        undirected: bool,
    },
    Complete {
        n: usize,
    },
    /// Inline 0-based `[head, tail]` pairs.
    Edges {
        n: usize,
        edges: Vec<[usize; 2]>,
    },
    /// Path to an edge-list file, relative to the scenario file.
    EdgeList {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
}

impl GraphSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Digraph> {
        let wrap = |e: Error| Error::schema("graph", e.to_string());
        match self {
            GraphSpec::Circulant { n, k, undirected } => {
                k_circulant(*n, *k, *undirected).map_err(wrap)
            }
            GraphSpec::Complete { n } => Ok(Digraph::complete(*n)),
            GraphSpec::Edges { n, edges } => {
                Digraph::from_edges(*n, edges.iter().map(|e| (e[0], e[1]))).map_err(wrap)
            }
            GraphSpec::EdgeList { path, n } => {
                let full = base_dir.join(path);
                let text = fs::read_to_string(&full).map_err(|e| {
                    Error::schema("graph.path", format!("cannot read {}: {e}", full.display()))
                })?;
                Digraph::from_edge_list(&text, *n).map_err(wrap)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesSpec {
    pub leaders: Vec<usize>,
    /// Optional; defaults to every non-leader.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followers: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    Malicious,
    Byzantine,
    FaultyFixed,
    StateHijack,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub agent: usize,
    pub behavior: BehaviorKind,
    /// Value source for everything but `faulty_fixed`; defaults to
    /// uniform on `[-50, 50]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ValueSource>,
    /// Constant for `faulty_fixed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl AdversarySpec {
    fn to_misbehavior(&self, key: &str) -> Result<Misbehavior> {
        let source = || self.source.clone().unwrap_or_default();
        let m = match self.behavior {
            BehaviorKind::FaultyFixed => {
                if self.source.is_some() {
                    return Err(Error::schema(
                        key,
                        "faulty_fixed takes `value`, not `source`",
                    ));
                }
                let value = self
                    .value
                    .ok_or_else(|| Error::schema(key, "faulty_fixed requires `value`"))?;
                Misbehavior::FaultyFixed { value }
            }
            _ if self.value.is_some() => {
                return Err(Error::schema(key, "`value` is only valid for faulty_fixed"));
            }
            BehaviorKind::Malicious => Misbehavior::Malicious { source: source() },
            BehaviorKind::Byzantine => Misbehavior::Byzantine { source: source() },
            BehaviorKind::StateHijack => Misbehavior::StateHijack { source: source() },
        };
        m.validate()
            .map_err(|e| Error::schema(key, e.to_string()))?;
        Ok(m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Command-line style overrides applied on top of a file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub eta: Option<u64>,
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub u_max: Option<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(eta) = o.eta {
            self.params.eta = eta;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(h) = o.horizon {
            self.horizon = Some(h);
        }
        if let Some(u) = o.u_max {
            self.params.u_max = Some(u);
        }
    }

    fn label(&self, key: &str, label: usize) -> Result<AgentId> {
        label
            .checked_sub(self.index_base)
            .map(AgentId)
            .ok_or_else(|| {
                Error::schema(
                    key,
                    format!("label {label} is below index_base {}", self.index_base),
                )
            })
    }

    /// Builds the runnable scenario. Relative graph paths resolve against
    /// `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario> {
        if self.index_base > 1 {
            return Err(Error::schema("index_base", "must be 0 or 1"));
        }
        let graph = self.graph.build(base_dir)?;
        let n = graph.n();

        let mut leaders = BTreeSet::new();
        for (k, &l) in self.roles.leaders.iter().enumerate() {
            let key = format!("roles.leaders[{k}]");
            let id = self.label(&key, l)?;
            if id.0 >= n {
                return Err(Error::schema(key, format!("agent {l} out of range")));
            }
            if !leaders.insert(id) {
                return Err(Error::schema(key, format!("agent {l} listed twice")));
            }
        }
        if let Some(followers) = &self.roles.followers {
            let mut seen = BTreeSet::new();
            for (k, &f) in followers.iter().enumerate() {
                let key = format!("roles.followers[{k}]");
                let id = self.label(&key, f)?;
                if leaders.contains(&id) {
                    return Err(Error::schema(
                        key,
                        format!("agent {f} is both leader and follower; leader and follower sets must partition the agents"),
                    ));
                }
                if id.0 >= n || !seen.insert(id) {
                    return Err(Error::schema(
                        key,
                        format!("agent {f} out of range or repeated"),
                    ));
                }
            }
            if seen.len() + leaders.len() != n {
                return Err(Error::schema(
                    "roles.followers",
                    "leaders and followers together must cover every agent",
                ));
            }
        }

        let mut adversaries = BTreeMap::new();
        for (k, a) in self.adversaries.iter().enumerate() {
            let key = format!("adversaries[{k}]");
            let id = self.label(&key, a.agent)?;
            if id.0 >= n {
                return Err(Error::schema(
                    key,
                    format!("agent {} out of range", a.agent),
                ));
            }
            if adversaries.insert(id, a.to_misbehavior(&key)?).is_some() {
                return Err(Error::schema(
                    key,
                    format!("agent {} declared twice", a.agent),
                ));
            }
        }

        let sc = Scenario {
            graph,
            leaders,
            adversaries,
            params: self.params.clone(),
            signal: self.signal.clone(),
            initial: self.initial.clone(),
            horizon: self
                .horizon
                .unwrap_or(DEFAULT_HORIZON_PERIODS * self.params.eta.max(1)),
            seed: self.seed,
        };
        sc.check()?;
        Ok(sc)
    }
}

#[derive(Clone, Debug)]
pub struct LoadedScenario {
    /// Display name: the file's `name`, else the file stem.
    pub name: String,
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

/// Loads a scenario from a path.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    load_with(path, &Overrides::default())
}

/// Loads a scenario from a path, or from the bundled set when `arg` names
/// one and no such file exists.
pub fn load_with(path: &Path, overrides: &Overrides) -> Result<LoadedScenario> {
    let (text, base_dir) = if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (text, base)
    } else if let Some(text) = path.to_str().and_then(bundled::get) {
        (text.to_string(), bundled::dir())
    } else {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file or bundled scenario",
            ),
        ));
    };
    let mut file = ScenarioFile::parse(&text, path)?;
    file.apply(overrides);
    let scenario = file.resolve(&base_dir)?;
    let name = file.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    Ok(LoadedScenario {
        name,
        file,
        scenario,
        base_dir,
    })
}
