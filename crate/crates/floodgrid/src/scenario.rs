//! Flood scenario ingestion and the derived quantities the formulations
//! need: the flooded substation set, the per-substation maximum depth used
//! for model tightening, and the mean scenario.
//!
//! Depths are whole feet. Scenario files carry integer depths; fractional
//! depths from upstream sources must be rounded up before they reach a file
//! (see [`FloodScenario::from_feet_ceil`]), since a barrier built to a
//! truncated height would not actually protect the substation.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

use crate::grid::{Grid, SubstationId};

/// Tolerance for probabilities summing to one.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// One flood scenario: a probability and per-substation depths in feet.
/// Substations absent from `depths` are dry.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodScenario {
    pub id: ScenarioId,
    pub probability: f64,
    pub depths: BTreeMap<SubstationId, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioId(pub String);

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ScenarioId {
    fn from(s: &str) -> Self {
        ScenarioId(s.to_string())
    }
}

impl FloodScenario {
    pub fn depth(&self, substation: &SubstationId) -> u32 {
        self.depths.get(substation).copied().unwrap_or(0)
    }

    /// Builds a scenario from fractional depths, rounding each up to whole
    /// feet. Rounding up is the conservative direction for protection
    /// planning.
    pub fn from_feet_ceil(
        id: impl Into<ScenarioId>,
        probability: f64,
        depths: impl IntoIterator<Item = (SubstationId, f64)>,
    ) -> Result<Self, ScenarioError> {
        let id = id.into();
        let mut out = BTreeMap::new();
        for (sub, feet) in depths {
            if !feet.is_finite() || feet < 0.0 {
                return Err(ScenarioError::BadDepth {
                    scenario: id.0.clone(),
                    substation: sub.0.clone(),
                    value: feet.to_string(),
                });
            }
            let whole = feet.ceil() as u32;
            if whole > 0 {
                out.insert(sub, whole);
            }
        }
        Ok(FloodScenario {
            id,
            probability,
            depths: out,
        })
    }
}

/// A validated scenario collection plus its derived fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: Vec<FloodScenario>,
    flooded_substations: BTreeSet<SubstationId>,
    max_depths: BTreeMap<SubstationId, u32>,
}

impl ScenarioSet {
    /// Assembles the set from scenarios, checking probabilities and deriving
    /// the flooded set and per-substation maxima. Every referenced
    /// substation must exist in the grid.
    pub fn new(scenarios: Vec<FloodScenario>, grid: &Grid) -> Result<Self, ScenarioError> {
        if scenarios.is_empty() {
            return Err(ScenarioError::Empty);
        }
        let mut seen = BTreeSet::new();
        for s in &scenarios {
            if !seen.insert(s.id.clone()) {
                return Err(ScenarioError::DuplicateScenario { id: s.id.0.clone() });
            }
            if !s.probability.is_finite() || s.probability < 0.0 {
                return Err(ScenarioError::BadProbability {
                    scenario: s.id.0.clone(),
                    value: s.probability,
                });
            }
            for sub in s.depths.keys() {
                if grid.substation(sub).is_none() {
                    return Err(ScenarioError::UnknownSubstation {
                        scenario: s.id.0.clone(),
                        substation: sub.0.clone(),
                    });
                }
            }
        }
        let total: f64 = scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(ScenarioError::ProbabilitiesDoNotSumToOne { total });
        }
        let mut flooded = BTreeSet::new();
        let mut max_depths = BTreeMap::new();
        for s in &scenarios {
            for (sub, &d) in &s.depths {
                if d > 0 {
                    flooded.insert(sub.clone());
                    let entry = max_depths.entry(sub.clone()).or_insert(0);
                    *entry = (*entry).max(d);
                }
            }
        }
        Ok(ScenarioSet {
            scenarios,
            flooded_substations: flooded,
            max_depths,
        })
    }

    pub fn scenarios(&self) -> &[FloodScenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenario(&self, id: &ScenarioId) -> Option<&FloodScenario> {
        self.scenarios.iter().find(|s| &s.id == id)
    }

    /// Substations flooded in at least one scenario.
    pub fn flooded_substations(&self) -> &BTreeSet<SubstationId> {
        &self.flooded_substations
    }

    pub fn is_flooded(&self, substation: &SubstationId) -> bool {
        self.flooded_substations.contains(substation)
    }

    /// Maximum flood depth across scenarios, per flooded substation.
    pub fn max_depths(&self) -> &BTreeMap<SubstationId, u32> {
        &self.max_depths
    }

    pub fn max_depth(&self, substation: &SubstationId) -> u32 {
        self.max_depths.get(substation).copied().unwrap_or(0)
    }

    /// The mean scenario: per-substation probability-weighted average depth
    /// rounded to the nearest whole foot, ties rounded up.
    pub fn mean_scenario(&self) -> FloodScenario {
        let mut depths = BTreeMap::new();
        for sub in &self.flooded_substations {
            let mean: f64 = self
                .scenarios
                .iter()
                .map(|s| s.probability * f64::from(s.depth(sub)))
                .sum();
            let rounded = (mean + 0.5).floor() as u32;
            if rounded > 0 {
                depths.insert(sub.clone(), rounded);
            }
        }
        FloodScenario {
            id: ScenarioId::from("mean"),
            probability: 1.0,
            depths,
        }
    }

    /// All scenarios flooding the given substation, deepest first. Errors
    /// when the substation is never flooded.
    pub fn scenario_support(
        &self,
        substation: &SubstationId,
    ) -> Result<Vec<(ScenarioId, u32)>, ScenarioError> {
        if !self.is_flooded(substation) {
            return Err(ScenarioError::NeverFlooded {
                substation: substation.0.clone(),
            });
        }
        let mut out: Vec<(ScenarioId, u32)> = self
            .scenarios
            .iter()
            .filter_map(|s| {
                let d = s.depth(substation);
                (d > 0).then(|| (s.id.clone(), d))
            })
            .collect();
        // Stable sort keeps file order among equal depths.
        out.sort_by(|a, b| b.1.cmp(&a.1));
        Ok(out)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario set is empty")]
    Empty,
    #[error("duplicate scenario id {id}")]
    DuplicateScenario { id: String },
    #[error("scenario {scenario} references unknown substation {substation}")]
    UnknownSubstation { scenario: String, substation: String },
    #[error("scenario {scenario} has a negative or non-integer depth {value} at substation {substation}")]
    BadDepth {
        scenario: String,
        substation: String,
        value: String,
    },
    #[error("scenario {scenario} has invalid probability {value}")]
    BadProbability { scenario: String, value: f64 },
    #[error("probabilities are only partially specified; give all or none")]
    PartialProbabilities,
    #[error("probabilities sum to {total}, not 1")]
    ProbabilitiesDoNotSumToOne { total: f64 },
    #[error("substation {substation} is not flooded in any scenario")]
    NeverFlooded { substation: String },
}

#[derive(Debug, Deserialize)]
struct RawScenarioFile {
    scenarios: Vec<RawScenario>,
}

#[derive(Debug, Deserialize)]
struct RawScenario {
    id: String,
    #[serde(default)]
    probability: Option<f64>,
    #[serde(default)]
    depths: BTreeMap<String, serde_json::Number>,
}

/// Parses a scenario document against a grid. When the file carries no
/// probabilities every scenario is equally likely.
pub fn parse_scenarios(source: &[u8], grid: &Grid) -> Result<ScenarioSet, ScenarioError> {
    let raw: RawScenarioFile = serde_json::from_slice(source)?;
    let with_prob = raw.scenarios.iter().filter(|s| s.probability.is_some()).count();
    if with_prob != 0 && with_prob != raw.scenarios.len() {
        return Err(ScenarioError::PartialProbabilities);
    }
    if raw.scenarios.is_empty() {
        return Err(ScenarioError::Empty);
    }
    let uniform = 1.0 / raw.scenarios.len() as f64;
    let mut scenarios = Vec::with_capacity(raw.scenarios.len());
    for s in raw.scenarios {
        let mut depths = BTreeMap::new();
        for (sub, number) in s.depths {
            let depth = number.as_u64().and_then(|d| u32::try_from(d).ok());
            match depth {
                Some(0) => {} // dry entries are dropped
                Some(d) => {
                    depths.insert(SubstationId(sub), d);
                }
                None => {
                    return Err(ScenarioError::BadDepth {
                        scenario: s.id,
                        substation: sub,
                        value: number.to_string(),
                    });
                }
            }
        }
        scenarios.push(FloodScenario {
            id: ScenarioId(s.id),
            probability: s.probability.unwrap_or(uniform),
            depths,
        });
    }
    ScenarioSet::new(scenarios, grid)
}
