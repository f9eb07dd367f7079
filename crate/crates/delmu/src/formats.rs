//! On-disk formats: topology and utility-parameter JSON documents, the
//! versioned surrogate model container, and event scripts.
//!
//! All indices in these files are 0-based (the gateway is node 0); the
//! built-in topology *index* passed on the command line is the only
//! 1-based identifier, matching the evaluation naming.

use delmu_core::nn::{Activation, Architecture, Layer, LayerSpec, SurrogateModel};
use delmu_core::{Topology, UtilityKind, UtilityParams, UtilitySpec};
use serde::{Deserialize, Serialize};

use crate::harness::EventScript;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation error: {0}")]
    Model(delmu_core::model::ModelError),
    #[error("validation error: {0}")]
    Utility(delmu_core::utility::UtilityError),
    #[error("validation error: {0}")]
    Network(delmu_core::nn::NnError),
    #[error("unsupported model format version {0}, expected {MODEL_FORMAT_VERSION}")]
    ModelVersion(u32),
    #[error("unknown utility kind {0:?}")]
    UnknownUtilityKind(String),
}

impl From<delmu_core::model::ModelError> for FormatError {
    fn from(e: delmu_core::model::ModelError) -> Self {
        FormatError::Model(e)
    }
}

impl From<delmu_core::utility::UtilityError> for FormatError {
    fn from(e: delmu_core::utility::UtilityError) -> Self {
        FormatError::Utility(e)
    }
}

impl From<delmu_core::nn::NnError> for FormatError {
    fn from(e: delmu_core::nn::NnError) -> Self {
        FormatError::Network(e)
    }
}

// --------------------------------------------------------------------
// Topology document
// --------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TopologyDoc {
    name: String,
    nodes: usize,
    links: Vec<LinkDoc>,
    paths: Vec<Vec<usize>>,
    slices: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkDoc {
    src: usize,
    dst: usize,
    capacity_mbps: f64,
}

/// Parses and validates a topology JSON document.
pub fn load_topology(text: &str) -> Result<Topology, FormatError> {
    let doc: TopologyDoc = serde_json::from_str(text)?;
    let links = doc
        .links
        .into_iter()
        .map(|l| delmu_core::model::Link {
            src: l.src,
            dst: l.dst,
            capacity_mbps: l.capacity_mbps,
        })
        .collect();
    Ok(Topology::new(
        &doc.name, doc.nodes, links, doc.paths, doc.slices,
    )?)
}

/// Serializes a topology in canonical form (paths gateway-first, fields
/// in schema order).
pub fn save_topology(topology: &Topology) -> String {
    let doc = TopologyDoc {
        name: topology.name().to_string(),
        nodes: topology.node_count(),
        links: topology
            .links()
            .iter()
            .map(|l| LinkDoc {
                src: l.src,
                dst: l.dst,
                capacity_mbps: l.capacity_mbps,
            })
            .collect(),
        paths: topology.paths().to_vec(),
        slices: topology.slice_count(),
    };
    serde_json::to_string_pretty(&doc).expect("topology serializes")
}

// --------------------------------------------------------------------
// Utility parameter document
// --------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SpecDoc {
    kind: String,
    alpha: f64,
    beta: f64,
}

/// Parses a utility parameter file: a JSON list of {kind, alpha, beta},
/// one entry per slice in slice order.
pub fn load_params(text: &str) -> Result<UtilityParams, FormatError> {
    let docs: Vec<SpecDoc> = serde_json::from_str(text)?;
    let mut specs = Vec::with_capacity(docs.len());
    for doc in docs {
        let kind = match doc.kind.as_str() {
            "linear" => UtilityKind::Linear,
            "sigmoid" => UtilityKind::Sigmoid,
            "polynomial" => UtilityKind::Polynomial,
            "logarithmic" => UtilityKind::Logarithmic,
            other => return Err(FormatError::UnknownUtilityKind(other.to_string())),
        };
        specs.push(UtilitySpec::new(kind, doc.alpha, doc.beta)?);
    }
    Ok(UtilityParams::new(specs)?)
}

pub fn save_params(params: &UtilityParams) -> String {
    let docs: Vec<SpecDoc> = params
        .specs()
        .iter()
        .map(|s| SpecDoc {
            kind: s.kind.name().to_string(),
            alpha: s.alpha,
            beta: s.beta,
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("params serialize")
}

// --------------------------------------------------------------------
// Demand instance document
// --------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    /// Rows are slices, columns are paths.
    min_rate_mbps: Vec<Vec<f64>>,
    max_demand_mbps: Vec<Vec<f64>>,
}

pub fn load_instance(text: &str) -> Result<delmu_core::DemandInstance, FormatError> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    let slices = doc.min_rate_mbps.len();
    let paths = doc.min_rate_mbps.first().map(|r| r.len()).unwrap_or(0);
    let flatten = |rows: Vec<Vec<f64>>| -> Result<Vec<f64>, FormatError> {
        let mut flat = Vec::with_capacity(slices * paths);
        for row in rows {
            if row.len() != paths {
                return Err(FormatError::Model(
                    delmu_core::model::ModelError::DimensionMismatch,
                ));
            }
            flat.extend(row);
        }
        Ok(flat)
    };
    let min_rate = flatten(doc.min_rate_mbps)?;
    let max_demand = flatten(doc.max_demand_mbps)?;
    Ok(delmu_core::DemandInstance::new(
        slices, paths, min_rate, max_demand,
    )?)
}

pub fn save_instance(instance: &delmu_core::DemandInstance) -> String {
    let unflatten = |flat: &[f64]| -> Vec<Vec<f64>> {
        flat.chunks(instance.path_count()).map(|c| c.to_vec()).collect()
    };
    let doc = InstanceDoc {
        min_rate_mbps: unflatten(instance.min_rates()),
        max_demand_mbps: unflatten(instance.max_demands()),
    };
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}

// --------------------------------------------------------------------
// Model container
// --------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    input_len: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerDoc {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: String,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        activation: String,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Selu => "selu",
        Activation::Linear => "linear",
    }
}

fn parse_activation(name: &str) -> Result<Activation, FormatError> {
    match name {
        "selu" => Ok(Activation::Selu),
        "linear" => Ok(Activation::Linear),
        other => Err(FormatError::UnknownUtilityKind(other.to_string())),
    }
}

/// Serializes a model with its layer specs and row-major weight arrays.
pub fn save_model(model: &SurrogateModel) -> String {
    let layers = model
        .layers()
        .iter()
        .map(|layer| match *layer.spec() {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                activation,
            } => LayerDoc::Conv1d {
                in_channels,
                out_channels,
                kernel,
                activation: activation_name(activation).to_string(),
                weights: layer.weights().to_vec(),
                bias: layer.bias().to_vec(),
            },
            LayerSpec::Dense {
                inputs,
                outputs,
                activation,
            } => LayerDoc::Dense {
                inputs,
                outputs,
                activation: activation_name(activation).to_string(),
                weights: layer.weights().to_vec(),
                bias: layer.bias().to_vec(),
            },
        })
        .collect();
    let doc = ModelDoc {
        version: MODEL_FORMAT_VERSION,
        input_len: model.input_len(),
        layers,
    };
    serde_json::to_string(&doc).expect("model serializes")
}

/// Loads a model container, validating the version and the layer shape
/// chain.
pub fn load_model(text: &str) -> Result<SurrogateModel, FormatError> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    if doc.version != MODEL_FORMAT_VERSION {
        return Err(FormatError::ModelVersion(doc.version));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for layer in doc.layers {
        let (spec, weights, bias) = match layer {
            LayerDoc::Conv1d {
                in_channels,
                out_channels,
                kernel,
                activation,
                weights,
                bias,
            } => (
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    activation: parse_activation(&activation)?,
                },
                weights,
                bias,
            ),
            LayerDoc::Dense {
                inputs,
                outputs,
                activation,
                weights,
                bias,
            } => (
                LayerSpec::Dense {
                    inputs,
                    outputs,
                    activation: parse_activation(&activation)?,
                },
                weights,
                bias,
            ),
        };
        layers.push(Layer::new(spec, weights, bias)?);
    }
    Ok(SurrogateModel::from_layers(doc.input_len, layers)?)
}

// --------------------------------------------------------------------
// Event scripts
// --------------------------------------------------------------------

pub fn load_event_script(text: &str) -> Result<EventScript, FormatError> {
    let script: EventScript = serde_json::from_str(text)?;
    Ok(script)
}

pub fn save_event_script(script: &EventScript) -> String {
    serde_json::to_string_pretty(script).expect("script serializes")
}

/// Convenience: the default surrogate architecture, exposed so the CLI
/// can describe it.
pub fn default_architecture() -> Architecture {
    Architecture::surrogate_default()
}
