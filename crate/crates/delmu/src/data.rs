//! Synthetic demand instances, global-search labelling and dataset
//! persistence.
//!
//! Demands are drawn in 50 Mbps increments up to 750 Mbps; minimum
//! rates are uniform integers up to 100 Mbps, capped by the demand.
//! Every instance gets its own PRNG stream derived from (seed, row), so
//! resuming or parallelising labelling cannot change the data.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use delmu_core::globalsearch::{multistart_solve, GsOptions};
use delmu_core::model::{builtin_topology, check_feasible, UsageState, FEASIBILITY_TOL};
use delmu_core::nn::{featurize, TrainSample, RATE_SCALE_MBPS};
use delmu_core::rng::{mix, SplitMix64};
use delmu_core::utility::total_utility;
use delmu_core::{DemandInstance, RateAllocation, Topology, UtilityParams};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const DEMAND_STEP_MBPS: f64 = 50.0;
pub const DEMAND_LEVELS: u64 = 16; // 0, 50, ..., 750
pub const MIN_RATE_CAP_MBPS: u64 = 100;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("model error: {0}")]
    Model(#[from] delmu_core::model::ModelError),
    #[error("solver error: {0}")]
    Solve(#[from] delmu_core::SolveError),
    #[error("network error: {0}")]
    Nn(#[from] delmu_core::nn::NnError),
    #[error("utility error: {0}")]
    Utility(#[from] delmu_core::utility::UtilityError),
    #[error("split ratio must lie strictly between 0 and 1")]
    InvalidRatio,
    #[error("split would leave the {0} side empty")]
    EmptySplit(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset parse error on line {line}: {what}")]
    Parse { line: usize, what: String },
    #[error("stored label for row {row} is infeasible")]
    InfeasibleLabel { row: usize },
}

/// One labelled dataset row: the demand instance, the global-search
/// allocation, its utility, and the solve wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub row: usize,
    pub instance: DemandInstance,
    pub label: RateAllocation,
    pub utility: f64,
    pub gs_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema_version: u32,
    pub topology_index: usize,
    pub seed: u64,
    pub rows: Vec<LabeledRow>,
}

/// Draws `count` demand instances for a built-in topology. Instances
/// whose all-minimum allocation would violate the node time constraints
/// are redrawn from the same per-row stream; the second return value
/// counts the redraws.
pub fn generate_instances(
    topology_index: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<DemandInstance>, usize), DataError> {
    let topology = builtin_topology(topology_index)?;
    let flows = topology.flow_count();
    let mut instances = Vec::with_capacity(count);
    let mut resampled = 0usize;
    for row in 0..count {
        let mut rng = SplitMix64::new(mix(seed, row as u64));
        loop {
            let mut min_rate = Vec::with_capacity(flows);
            let mut max_demand = Vec::with_capacity(flows);
            for _ in 0..flows {
                let d = DEMAND_STEP_MBPS * rng.next_below(DEMAND_LEVELS) as f64;
                let lo = (rng.next_below(MIN_RATE_CAP_MBPS + 1) as f64).min(d);
                min_rate.push(lo);
                max_demand.push(d);
            }
            let instance = DemandInstance::new(
                topology.slice_count(),
                topology.path_count(),
                min_rate,
                max_demand,
            )?;
            let usage = UsageState::from_allocation(&topology, &instance.min_allocation());
            if usage.worst_entry().2 <= 1.0 + FEASIBILITY_TOL {
                instances.push(instance);
                break;
            }
            resampled += 1;
        }
    }
    Ok((instances, resampled))
}

/// Labels instances with the multistart global search, timing each
/// solve. Rows present in `prior` (same row index and instance) are
/// reused, which makes labelling resumable; fresh rows are solved in
/// parallel with per-row seeds `mix(seed, row)`.
pub fn label_instances(
    topology: &Topology,
    topology_index: usize,
    instances: &[DemandInstance],
    params: &UtilityParams,
    gs_options: &GsOptions,
    seed: u64,
    prior: Option<&Dataset>,
) -> Result<Dataset, DataError> {
    let mut rows: Vec<Option<LabeledRow>> = vec![None; instances.len()];
    if let Some(prior) = prior {
        for row in &prior.rows {
            if row.row < instances.len() && instances[row.row] == row.instance {
                rows[row.row] = Some(row.clone());
            }
        }
    }

    let pending: Vec<usize> = (0..instances.len()).filter(|&i| rows[i].is_none()).collect();
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(pending.len().max(1));

    let mut solved: Vec<(usize, Result<LabeledRow, String>)> = Vec::with_capacity(pending.len());
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in pending.chunks(pending.len().div_ceil(workers).max(1)) {
            handles.push(scope.spawn(move || {
                let mut out = Vec::with_capacity(chunk.len());
                for &row in chunk {
                    let instance = &instances[row];
                    let options = GsOptions {
                        seed: mix(seed, row as u64),
                        ..gs_options.clone()
                    };
                    let started = Instant::now();
                    let result = multistart_solve(topology, instance, params, &options);
                    let gs_seconds = started.elapsed().as_secs_f64();
                    let entry = result
                        .and_then(|label| {
                            let utility = total_utility(params, &label)?;
                            Ok(LabeledRow {
                                row,
                                instance: instance.clone(),
                                label,
                                utility,
                                gs_seconds,
                            })
                        })
                        .map_err(|e| e.to_string());
                    out.push((row, entry));
                }
                out
            }));
        }
        for handle in handles {
            solved.extend(handle.join().expect("labelling worker panicked"));
        }
    });

    for (row, entry) in solved {
        match entry {
            Ok(labeled) => rows[row] = Some(labeled),
            Err(what) => eprintln!("warning: skipping row {row}: {what}"),
        }
    }

    Ok(Dataset {
        schema_version: DATASET_SCHEMA_VERSION,
        topology_index,
        seed,
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Deterministic shuffled split into train/test parts.
pub fn split_dataset(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::InvalidRatio);
    }
    let mut order: Vec<usize> = (0..dataset.rows.len()).collect();
    SplitMix64::new(mix(seed, 0x5917)).shuffle(&mut order);
    let n_train = (dataset.rows.len() as f64 * ratio) as usize;
    if n_train == 0 {
        return Err(DataError::EmptySplit("train"));
    }
    if n_train == dataset.rows.len() {
        return Err(DataError::EmptySplit("test"));
    }
    let take = |indices: &[usize]| Dataset {
        schema_version: dataset.schema_version,
        topology_index: dataset.topology_index,
        seed: dataset.seed,
        rows: indices.iter().map(|&i| dataset.rows[i].clone()).collect(),
    };
    Ok((take(&order[..n_train]), take(&order[n_train..])))
}

/// Scales a labelled dataset into surrogate training samples.
pub fn to_train_samples(dataset: &Dataset) -> Result<Vec<TrainSample>, DataError> {
    dataset
        .rows
        .iter()
        .map(|row| {
            let features = featurize(&row.instance, dataset.topology_index)?;
            Ok(TrainSample {
                features: features.values().to_vec(),
                target: row
                    .label
                    .rates()
                    .iter()
                    .map(|r| r / RATE_SCALE_MBPS)
                    .collect(),
            })
        })
        .collect()
}

/// Re-checks every stored label against its instance and the stored
/// topology index.
pub fn validate_dataset(dataset: &Dataset) -> Result<(), DataError> {
    let topology = builtin_topology(dataset.topology_index)?;
    for row in &dataset.rows {
        let report = check_feasible(&topology, &row.instance, &row.label)?;
        if !report.is_feasible() {
            return Err(DataError::InfeasibleLabel { row: row.row });
        }
    }
    Ok(())
}

fn csv_header(flows: usize) -> String {
    let mut header = String::from("topo,seed,row");
    for prefix in ["delta", "d", "r"] {
        for f in 0..flows {
            let _ = write!(header, ",{prefix}_{f}");
        }
    }
    header.push_str(",utility,gs_seconds");
    header
}

/// Serializes a dataset as CSV. Floats use the shortest round-trip
/// representation, so save/load/save is byte-identical.
pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let flows = dataset
        .rows
        .first()
        .map(|r| r.instance.slice_count() * r.instance.path_count())
        .unwrap_or(12);
    let mut out = csv_header(flows);
    out.push('\n');
    for row in &dataset.rows {
        let _ = write!(out, "{},{},{}", dataset.topology_index, dataset.seed, row.row);
        for v in row.instance.min_rates() {
            let _ = write!(out, ",{v}");
        }
        for v in row.instance.max_demands() {
            let _ = write!(out, ",{v}");
        }
        for v in row.label.rates() {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{}", row.utility, row.gs_seconds);
    }
    out
}

/// Parses a dataset CSV produced by [`dataset_to_csv`].
pub fn dataset_from_csv(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::Parse {
        line: 1,
        what: "empty file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 5 || columns[0] != "topo" || columns[1] != "seed" || columns[2] != "row" {
        return Err(DataError::Parse {
            line: 1,
            what: format!("unexpected header {header:?}"),
        });
    }
    let flows = (columns.len() - 5) / 3;
    if 3 + 3 * flows + 2 != columns.len() || columns[3] != "delta_0" {
        return Err(DataError::Parse {
            line: 1,
            what: format!("unexpected header {header:?}"),
        });
    }
    // Slice/path structure comes from the topology index.
    let mut topology_index = 0usize;
    let mut seed = 0u64;
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| DataError::Parse {
            line: idx + 1,
            what: what.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(bad("wrong field count"));
        }
        topology_index = fields[0].parse().map_err(|_| bad("topo"))?;
        seed = fields[1].parse().map_err(|_| bad("seed"))?;
        let row: usize = fields[2].parse().map_err(|_| bad("row"))?;
        let parse_block = |offset: usize| -> Result<Vec<f64>, DataError> {
            fields[offset..offset + flows]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad("rate field")))
                .collect()
        };
        let min_rate = parse_block(3)?;
        let max_demand = parse_block(3 + flows)?;
        let rates = parse_block(3 + 2 * flows)?;
        let utility: f64 = fields[3 + 3 * flows].parse().map_err(|_| bad("utility"))?;
        let gs_seconds: f64 = fields[4 + 3 * flows].parse().map_err(|_| bad("gs_seconds"))?;

        let topology = builtin_topology(topology_index)?;
        let (slices, paths) = (topology.slice_count(), topology.path_count());
        rows.push(LabeledRow {
            row,
            instance: DemandInstance::new(slices, paths, min_rate, max_demand)?,
            label: RateAllocation::new(slices, paths, rates)?,
            utility,
            gs_seconds,
        });
    }
    Ok(Dataset {
        schema_version: DATASET_SCHEMA_VERSION,
        topology_index,
        seed,
        rows,
    })
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    Ok(std::fs::write(path, dataset_to_csv(dataset))?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    dataset_from_csv(&std::fs::read_to_string(path)?)
}
