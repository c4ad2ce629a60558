//! JSON instance files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "demo",
//!   "seed": 7,
//!   "horizon": { "start": 0.0, "end": 1440.0, "grid": [480.0, 960.0] },
//!   "facilities": ["a", "b"],
//!   "customers": ["a", "b"],
//!   "arcs": [ { "i": "a", "j": "b", "breakpoints": [[0.0, 12.5], [1440.0, 12.5]] } ]
//! }
//! ```
//!
//! `customers` may be omitted, in which case every facility is also a
//! customer. Reading validates the network completely.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tdnet::{ArcId, PiecewiseLinearTT, TDNetwork, TdNetError, TimeHorizon};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: malformed JSON: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: schema violation: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: invalid network{}: {source}", arc_label(.arc))]
    Validation {
        path: PathBuf,
        /// `(i, j)` ids of the offending arc, when there is one.
        arc: Option<(String, String)>,
        #[source]
        source: TdNetError,
    },
}

fn arc_label(arc: &Option<(String, String)>) -> String {
    arc.as_ref()
        .map(|(i, j)| format!(" at arc ({i}, {j})"))
        .unwrap_or_default()
}

impl InstanceError {
    /// Malformed content, as opposed to a failure to reach the file.
    pub fn is_invalid_content(&self) -> bool {
        !matches!(self, InstanceError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub start: f64,
    pub end: f64,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub i: String,
    pub j: String,
    pub breakpoints: Vec<(f64, f64)>,
}

/// On-disk layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub horizon: HorizonSpec,
    pub facilities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customers: Option<Vec<String>>,
    pub arcs: Vec<ArcSpec>,
}

/// A validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub seed: Option<u64>,
    pub network: TDNetwork,
}

impl Instance {
    pub fn to_file(&self) -> InstanceFile {
        let net = &self.network;
        let h = net.horizon();
        let same_sets = net.facilities() == net.customers();
        let arcs = net
            .arcs()
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let id = net.arc_id(k);
                ArcSpec {
                    i: net.facilities()[id.facility].clone(),
                    j: net.customers()[id.customer].clone(),
                    breakpoints: f.breakpoints().to_vec(),
                }
            })
            .collect();
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            name: self.name.clone(),
            seed: self.seed,
            horizon: HorizonSpec {
                start: h.start(),
                end: h.end(),
                grid: h.grid().to_vec(),
            },
            facilities: net.facilities().to_vec(),
            customers: (!same_sets).then(|| net.customers().to_vec()),
            arcs,
        }
    }

    /// Validates a parsed file; `path` only labels errors.
    pub fn from_file(file: InstanceFile, path: &Path) -> Result<Self, InstanceError> {
        let schema = |message: String| InstanceError::Schema {
            path: path.to_path_buf(),
            message,
        };
        if file.schema_version != SCHEMA_VERSION {
            return Err(schema(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let facilities = file.facilities;
        let customers = file.customers.unwrap_or_else(|| facilities.clone());
        let fidx = index_ids(&facilities).map_err(|id| schema(format!("duplicate facility id {id:?}")))?;
        let cidx = index_ids(&customers).map_err(|id| schema(format!("duplicate customer id {id:?}")))?;

        let invalid = |source: TdNetError| {
            let arc = match source {
                TdNetError::MisalignedBreakpoint { facility, customer, .. }
                | TdNetError::HorizonMismatch { facility, customer }
                | TdNetError::FifoViolation { facility, customer, .. }
                | TdNetError::MissingArc { facility, customer }
                | TdNetError::DuplicateArc { facility, customer } => facilities
                    .get(facility)
                    .zip(customers.get(customer))
                    .map(|(i, j)| (i.clone(), j.clone())),
                _ => None,
            };
            InstanceError::Validation {
                path: path.to_path_buf(),
                arc,
                source,
            }
        };

        let horizon = TimeHorizon::new(file.horizon.start, file.horizon.end, file.horizon.grid).map_err(&invalid)?;
        let mut arcs = Vec::with_capacity(file.arcs.len());
        for a in file.arcs {
            let facility = *fidx
                .get(a.i.as_str())
                .ok_or_else(|| schema(format!("arc refers to unknown facility {:?}", a.i)))?;
            let customer = *cidx
                .get(a.j.as_str())
                .ok_or_else(|| schema(format!("arc refers to unknown customer {:?}", a.j)))?;
            let f = PiecewiseLinearTT::new(a.breakpoints).map_err(|source| InstanceError::Validation {
                path: path.to_path_buf(),
                arc: Some((a.i.clone(), a.j.clone())),
                source,
            })?;
            arcs.push((ArcId { facility, customer }, f));
        }
        let network = TDNetwork::from_arcs(facilities.clone(), customers.clone(), horizon, arcs).map_err(&invalid)?;
        Ok(Self {
            name: file.name,
            seed: file.seed,
            network,
        })
    }
}

fn index_ids(ids: &[String]) -> Result<HashMap<&str, usize>, String> {
    let mut map = HashMap::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if map.insert(id.as_str(), k).is_some() {
            return Err(id.clone());
        }
    }
    Ok(map)
}

/// Parses and validates instance JSON; `path` only labels errors.
pub fn parse_instance(text: &str, path: &Path) -> Result<Instance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => InstanceError::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        _ => InstanceError::Json {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    })?;
    Instance::from_file(file, path)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&text, path)
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&inst.to_file()).expect("instance serializes")
}

pub fn write_instance(path: impl AsRef<Path>, inst: &Instance) -> Result<(), InstanceError> {
    let path = path.as_ref();
    fs::write(path, instance_to_json(inst)).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A file path with the outcome of loading it.
pub type LoadedInstance = (PathBuf, Result<Instance, InstanceError>);

/// Every `*.json` file directly inside `dir`, sorted by file name.
pub fn read_instance_dir(dir: impl AsRef<Path>) -> Result<Vec<LoadedInstance>, InstanceError> {
    let dir = dir.as_ref();
    let io = |source| InstanceError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| {
            let inst = read_instance(&p);
            (p, inst)
        })
        .collect())
}
