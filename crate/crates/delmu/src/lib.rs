//! Std companion to `delmu-core`: synthetic dataset generation and
//! labelling, the evaluation/replay harness, and the on-disk formats
//! (topology and utility-parameter JSON, model containers, dataset CSV,
//! event scripts and report CSVs). The `delmu` binary wires these into
//! the CLI.

pub mod data;
pub mod formats;
pub mod harness;

pub use data::{generate_instances, label_instances, split_dataset, Dataset, LabeledRow};
pub use formats::{
    load_event_script, load_instance, load_model, load_params, load_topology, save_event_script,
    save_instance, save_model, save_params, save_topology,
};
pub use harness::{evaluate, fig7_default_script, replay, EvalReport, Event, EventKind, EventScript};
