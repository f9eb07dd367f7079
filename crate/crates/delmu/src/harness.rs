//! End-to-end evaluation (utility distributions, runtimes, per-slice
//! decomposition) and the dynamic-scenario replayer.
//!
//! Timing wraps the solve call only: no IO, and three discarded warm-up
//! solves before the measured loop.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use delmu_core::baseline::greedy_solve;
use delmu_core::model::check_feasible;
use delmu_core::nn::{infer_with, ForwardCache, SurrogateModel};
use delmu_core::repair::repair;
use delmu_core::utility::{flow_utility, total_utility};
use delmu_core::{DemandInstance, RateAllocation, Topology, UtilityParams};
use serde::{Deserialize, Serialize};

use crate::data::LabeledRow;

/// Minimum service rate granted to active flows when a join event does
/// not override it.
pub const DEFAULT_MIN_RATE_MBPS: f64 = 10.0;

const WARMUP_SOLVES: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("no rows to evaluate")]
    NoRows,
    #[error("model error: {0}")]
    Model(#[from] delmu_core::model::ModelError),
    #[error("network error: {0}")]
    Nn(#[from] delmu_core::nn::NnError),
    #[error("solver error: {0}")]
    Solve(#[from] delmu_core::SolveError),
    #[error("utility error: {0}")]
    Utility(#[from] delmu_core::utility::UtilityError),
    #[error("invalid event script: {0}")]
    Script(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Distribution summary plus mean wall time for one solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub mean_seconds: f64,
    pub feasibility_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerFlowUtility {
    pub solver: &'static str,
    pub slice: usize,
    pub path: usize,
    pub utility: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub topology_index: usize,
    pub rows_evaluated: usize,
    pub gs: SolverStats,
    pub greedy: SolverStats,
    pub delmu: SolverStats,
    /// Per-flow utilities of the first evaluated instance, for the
    /// per-slice decomposition table.
    pub per_slice: Vec<PerFlowUtility>,
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

fn stats(utilities: &[f64], mean_seconds: f64, feasibility_rate: f64) -> SolverStats {
    let mut sorted = utilities.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    SolverStats {
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        min: sorted[0],
        max: *sorted.last().unwrap(),
        mean_seconds,
        feasibility_rate,
    }
}

fn per_flow(
    solver: &'static str,
    params: &UtilityParams,
    allocation: &RateAllocation,
) -> Result<Vec<PerFlowUtility>, HarnessError> {
    let mut out = Vec::with_capacity(allocation.slice_count() * allocation.path_count());
    for i in 0..allocation.slice_count() {
        for j in 0..allocation.path_count() {
            out.push(PerFlowUtility {
                solver,
                slice: i,
                path: j,
                utility: flow_utility(params.spec(i), allocation.rate(i, j))?,
            });
        }
    }
    Ok(out)
}

/// Runs greedy and the surrogate (infer + repair) on every labelled
/// test row, reusing the stored global-search utilities and wall times,
/// and aggregates distribution statistics and mean solve times.
pub fn evaluate(
    topology: &Topology,
    topology_index: usize,
    rows: &[LabeledRow],
    model: &SurrogateModel,
    params: &UtilityParams,
) -> Result<EvalReport, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::NoRows);
    }
    let mut cache = ForwardCache::for_model(model);

    // Warm-up solves: first-touch costs stay out of the measurements.
    for _ in 0..WARMUP_SOLVES {
        let instance = &rows[0].instance;
        let _ = greedy_solve(topology, instance, params, 1.0)?;
        let raw = infer_with(model, instance, topology_index, &mut cache)?;
        let _ = repair(topology, instance, params, &raw)?;
    }

    let mut gs_utilities = Vec::with_capacity(rows.len());
    let mut gs_seconds = 0.0;
    let mut greedy_utilities = Vec::with_capacity(rows.len());
    let mut greedy_seconds = 0.0;
    let mut greedy_feasible = 0usize;
    let mut delmu_utilities = Vec::with_capacity(rows.len());
    let mut delmu_seconds = 0.0;
    let mut delmu_feasible = 0usize;
    let mut per_slice = Vec::new();

    for (idx, row) in rows.iter().enumerate() {
        gs_utilities.push(row.utility);
        gs_seconds += row.gs_seconds;

        let started = Instant::now();
        let greedy = greedy_solve(topology, &row.instance, params, 1.0)?;
        greedy_seconds += started.elapsed().as_secs_f64();
        if check_feasible(topology, &row.instance, &greedy)?.is_feasible() {
            greedy_feasible += 1;
        }
        greedy_utilities.push(total_utility(params, &greedy)?);

        let started = Instant::now();
        let raw = infer_with(model, &row.instance, topology_index, &mut cache)?;
        let fixed = repair(topology, &row.instance, params, &raw)?;
        delmu_seconds += started.elapsed().as_secs_f64();
        if check_feasible(topology, &row.instance, &fixed)?.is_feasible() {
            delmu_feasible += 1;
        }
        delmu_utilities.push(total_utility(params, &fixed)?);

        if idx == 0 {
            per_slice.extend(per_flow("gs", params, &row.label)?);
            per_slice.extend(per_flow("greedy", params, &greedy)?);
            per_slice.extend(per_flow("delmu", params, &fixed)?);
        }
    }

    let n = rows.len() as f64;
    Ok(EvalReport {
        topology_index,
        rows_evaluated: rows.len(),
        gs: stats(&gs_utilities, gs_seconds / n, 1.0),
        greedy: stats(&greedy_utilities, greedy_seconds / n, greedy_feasible as f64 / n),
        delmu: stats(&delmu_utilities, delmu_seconds / n, delmu_feasible as f64 / n),
        per_slice,
    })
}

/// Writes `utility_dist.csv`, `runtimes.csv` and `per_slice.csv`.
pub fn write_eval_csvs(report: &EvalReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut dist = String::from("solver,topology,median,q1,q3,min,max,feasibility_rate\n");
    let mut runtimes = String::from("solver,topology,mean_seconds\n");
    for (solver, stats) in [
        ("gs", &report.gs),
        ("greedy", &report.greedy),
        ("delmu", &report.delmu),
    ] {
        dist.push_str(&format!(
            "{solver},{},{},{},{},{},{},{}\n",
            report.topology_index,
            stats.median,
            stats.q1,
            stats.q3,
            stats.min,
            stats.max,
            stats.feasibility_rate
        ));
        runtimes.push_str(&format!(
            "{solver},{},{}\n",
            report.topology_index, stats.mean_seconds
        ));
    }
    std::fs::write(dir.join("utility_dist.csv"), dist)?;
    std::fs::write(dir.join("runtimes.csv"), runtimes)?;

    let mut per_slice = String::from("solver,slice,path,utility\n");
    for row in &report.per_slice {
        per_slice.push_str(&format!(
            "{},{},{},{}\n",
            row.solver, row.slice, row.path, row.utility
        ));
    }
    std::fs::write(dir.join("per_slice.csv"), per_slice)?;
    Ok(())
}

// --------------------------------------------------------------------
// Replay
// --------------------------------------------------------------------

/// A timed event feeding the replayer. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    FlowJoin {
        slice: usize,
        path: usize,
        d_mbps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_mbps: Option<f64>,
    },
    FlowLeave {
        slice: usize,
        path: usize,
    },
    CapacityChange {
        src: usize,
        dst: usize,
        capacity_mbps: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventScript(pub Vec<Event>);

impl EventScript {
    fn validate(&self, topology: &Topology) -> Result<(), HarnessError> {
        let mut last = 0u64;
        for (idx, event) in self.0.iter().enumerate() {
            if event.t_ms < last {
                return Err(HarnessError::Script(format!(
                    "event {idx} at t={}ms is earlier than its predecessor",
                    event.t_ms
                )));
            }
            last = event.t_ms;
            match event.kind {
                EventKind::FlowJoin { slice, path, d_mbps, delta_mbps } => {
                    if slice >= topology.slice_count() || path >= topology.path_count() {
                        return Err(HarnessError::Script(format!(
                            "event {idx} references unknown flow ({slice}, {path})"
                        )));
                    }
                    if !(d_mbps >= 0.0) {
                        return Err(HarnessError::Script(format!(
                            "event {idx} has negative demand"
                        )));
                    }
                    let lo = delta_mbps.unwrap_or(DEFAULT_MIN_RATE_MBPS);
                    if !(lo >= 0.0) || lo > d_mbps {
                        return Err(HarnessError::Script(format!(
                            "event {idx} has a minimum rate above its demand"
                        )));
                    }
                }
                EventKind::FlowLeave { slice, path } => {
                    if slice >= topology.slice_count() || path >= topology.path_count() {
                        return Err(HarnessError::Script(format!(
                            "event {idx} references unknown flow ({slice}, {path})"
                        )));
                    }
                }
                EventKind::CapacityChange { src, dst, capacity_mbps } => {
                    if topology.link_capacity(src, dst).is_none() {
                        return Err(HarnessError::Script(format!(
                            "event {idx} references unknown link ({src}, {dst})"
                        )));
                    }
                    if !(capacity_mbps > 0.0) {
                        return Err(HarnessError::Script(format!(
                            "event {idx} sets a non-positive capacity"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One replay step: the instantaneous topology/instance and the
/// surrogate allocation computed for them.
#[derive(Debug, Clone)]
pub struct ReplayPoint {
    pub t_ms: u64,
    pub topology: Topology,
    pub instance: DemandInstance,
    pub allocation: RateAllocation,
    pub solve_seconds: f64,
}

/// Replays a timed event script: at each event timestamp the demand
/// instance and capacities are rebuilt and re-solved with infer +
/// repair. Inactive flows carry zero bounds; joining flows default to a
/// 10 Mbps minimum rate.
pub fn replay(
    topology: &Topology,
    topology_index: usize,
    script: &EventScript,
    model: &SurrogateModel,
    params: &UtilityParams,
) -> Result<Vec<ReplayPoint>, HarnessError> {
    script.validate(topology)?;
    let slices = topology.slice_count();
    let paths = topology.path_count();
    let mut bounds = vec![(0.0f64, 0.0f64); slices * paths];
    let mut current = topology.clone();
    let mut cache = ForwardCache::for_model(model);
    let mut points = Vec::new();

    let solve = |t_ms: u64,
                 topo: &Topology,
                 bounds: &[(f64, f64)],
                 cache: &mut ForwardCache|
     -> Result<ReplayPoint, HarnessError> {
        let instance = DemandInstance::new(
            slices,
            paths,
            bounds.iter().map(|b| b.0).collect(),
            bounds.iter().map(|b| b.1).collect(),
        )?;
        let started = Instant::now();
        let raw = infer_with(model, &instance, topology_index, cache)?;
        let allocation = repair(topo, &instance, params, &raw)?;
        let solve_seconds = started.elapsed().as_secs_f64();
        Ok(ReplayPoint {
            t_ms,
            topology: topo.clone(),
            instance,
            allocation,
            solve_seconds,
        })
    };

    // Events sharing a timestamp apply atomically before one re-solve.
    let mut grouped: BTreeMap<u64, Vec<&Event>> = BTreeMap::new();
    for event in &script.0 {
        grouped.entry(event.t_ms).or_default().push(event);
    }
    if grouped.is_empty() {
        points.push(solve(0, &current, &bounds, &mut cache)?);
        return Ok(points);
    }

    for (t_ms, events) in grouped {
        for event in events {
            match event.kind {
                EventKind::FlowJoin { slice, path, d_mbps, delta_mbps } => {
                    let lo = delta_mbps.unwrap_or(DEFAULT_MIN_RATE_MBPS).min(d_mbps);
                    bounds[slice * paths + path] = (lo, d_mbps);
                }
                EventKind::FlowLeave { slice, path } => {
                    bounds[slice * paths + path] = (0.0, 0.0);
                }
                EventKind::CapacityChange { src, dst, capacity_mbps } => {
                    current = current.with_link_capacity(src, dst, capacity_mbps)?;
                }
            }
        }
        points.push(solve(t_ms, &current, &bounds, &mut cache)?);
    }
    Ok(points)
}

/// The shipped dynamic scenario for topology 3: linear, polynomial and
/// logarithmic flows active on all paths from t=0 with 200 Mbps demands;
/// a 400 Mbps sigmoid flow joins path 1 at t=100ms; link (0, 1) drops
/// from 2772 to 693 Mbps at t=200ms; the sigmoid flow leaves at t=300ms.
pub fn fig7_default_script() -> EventScript {
    let mut events = Vec::new();
    for slice in [0usize, 2, 3] {
        for path in 0..3 {
            events.push(Event {
                t_ms: 0,
                kind: EventKind::FlowJoin {
                    slice,
                    path,
                    d_mbps: 200.0,
                    delta_mbps: None,
                },
            });
        }
    }
    events.push(Event {
        t_ms: 100,
        kind: EventKind::FlowJoin {
            slice: 1,
            path: 1,
            d_mbps: 400.0,
            delta_mbps: None,
        },
    });
    events.push(Event {
        t_ms: 200,
        kind: EventKind::CapacityChange {
            src: 0,
            dst: 1,
            capacity_mbps: 693.0,
        },
    });
    events.push(Event {
        t_ms: 300,
        kind: EventKind::FlowLeave { slice: 1, path: 1 },
    });
    EventScript(events)
}

/// Writes `replay.csv`: one line per (event time, flow).
pub fn write_replay_csv(points: &[ReplayPoint], dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut out = String::from("t_ms,slice,path,rate_mbps,solve_seconds\n");
    for point in points {
        for (i, j, rate) in point.allocation.iter_flows() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                point.t_ms, i, j, rate, point.solve_seconds
            ));
        }
    }
    std::fs::write(dir.join("replay.csv"), out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_instances, label_instances};
    use delmu_core::globalsearch::GsOptions;
    use delmu_core::model::builtin_topology;
    use delmu_core::nn::Architecture;

    fn small_model() -> SurrogateModel {
        SurrogateModel::init(
            &Architecture {
                input_len: 28,
                conv_channels: vec![2, 2],
                kernel: 3,
                dense_widths: vec![8],
                outputs: 12,
            },
            42,
        )
    }

    fn temp_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "delmu-test-{tag}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn quantiles_interpolate() {
        let values = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&values, 0.5), 2.5);
        assert_eq!(quantile(&values, 0.0), 1.0);
        assert_eq!(quantile(&values, 1.0), 4.0);
        assert_eq!(quantile(&values, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.5), 7.0);
    }

    #[test]
    fn evaluate_reports_full_feasibility_for_the_surrogate() {
        let topology = builtin_topology(1).unwrap();
        let params = UtilityParams::default_four_slices();
        let (instances, _) = generate_instances(1, 5, 77).unwrap();
        let options = GsOptions {
            n_starts: 2,
            max_ascent_iters: 120,
            ..GsOptions::default()
        };
        let dataset =
            label_instances(&topology, 1, &instances, &params, &options, 77, None).unwrap();
        let model = small_model();
        let report = evaluate(&topology, 1, &dataset.rows, &model, &params).unwrap();
        assert_eq!(report.rows_evaluated, 5);
        assert_eq!(report.delmu.feasibility_rate, 1.0);
        assert_eq!(report.greedy.feasibility_rate, 1.0);
        assert!(report.gs.median >= report.greedy.median - 1e-9);
        // 3 solvers x 12 flows of the sampled instance.
        assert_eq!(report.per_slice.len(), 36);

        let dir = temp_dir("eval");
        write_eval_csvs(&report, &dir).unwrap();
        for file in ["utility_dist.csv", "runtimes.csv", "per_slice.csv"] {
            let text = std::fs::read_to_string(dir.join(file)).unwrap();
            assert!(text.lines().count() >= 2, "{file} is empty");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_script_replays_a_single_constant_point() {
        let topology = builtin_topology(3).unwrap();
        let params = UtilityParams::default_four_slices();
        let model = small_model();
        let points = replay(&topology, 3, &EventScript(Vec::new()), &model, &params).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].t_ms, 0);
        assert!(points[0].allocation.rates().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn replay_points_feasible_after_capacity_drop() {
        let topology = builtin_topology(3).unwrap();
        let params = UtilityParams::default_four_slices();
        let model = small_model();
        let points = replay(&topology, 3, &fig7_default_script(), &model, &params).unwrap();
        assert_eq!(points.len(), 4); // t = 0, 100, 200, 300
        for point in &points {
            let report =
                check_feasible(&point.topology, &point.instance, &point.allocation).unwrap();
            assert!(report.is_feasible(), "t={}ms", point.t_ms);
        }
        // The capacity change is visible from t=200ms on.
        assert_eq!(points[1].topology.link_capacity(0, 1), Some(2772.0));
        assert_eq!(points[2].topology.link_capacity(0, 1), Some(693.0));
        assert_eq!(points[3].topology.link_capacity(0, 1), Some(693.0));
        // The sigmoid flow is bounded only while active.
        assert_eq!(points[0].instance.max_demand(1, 1), 0.0);
        assert_eq!(points[1].instance.max_demand(1, 1), 400.0);
        assert_eq!(points[1].instance.min_rate(1, 1), DEFAULT_MIN_RATE_MBPS);
        assert_eq!(points[3].instance.max_demand(1, 1), 0.0);

        let dir = temp_dir("replay");
        write_replay_csv(&points, &dir).unwrap();
        let text = std::fs::read_to_string(dir.join("replay.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 12);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn scripts_validated() {
        let topology = builtin_topology(3).unwrap();
        let params = UtilityParams::default_four_slices();
        let model = small_model();

        let unknown_link = EventScript(vec![Event {
            t_ms: 0,
            kind: EventKind::CapacityChange {
                src: 0,
                dst: 7,
                capacity_mbps: 100.0,
            },
        }]);
        assert!(matches!(
            replay(&topology, 3, &unknown_link, &model, &params),
            Err(HarnessError::Script(_))
        ));

        let unknown_flow = EventScript(vec![Event {
            t_ms: 0,
            kind: EventKind::FlowLeave { slice: 9, path: 0 },
        }]);
        assert!(replay(&topology, 3, &unknown_flow, &model, &params).is_err());

        let out_of_order = EventScript(vec![
            Event {
                t_ms: 100,
                kind: EventKind::FlowLeave { slice: 0, path: 0 },
            },
            Event {
                t_ms: 50,
                kind: EventKind::FlowLeave { slice: 0, path: 0 },
            },
        ]);
        assert!(replay(&topology, 3, &out_of_order, &model, &params).is_err());
    }

    #[test]
    fn script_round_trips_through_json() {
        let script = fig7_default_script();
        let text = crate::formats::save_event_script(&script);
        let back = crate::formats::load_event_script(&text).unwrap();
        assert_eq!(back, script);
        // Spot-check the serialized form.
        assert!(text.contains("\"kind\": \"flow_join\""));
        assert!(text.contains("\"kind\": \"capacity_change\""));
        assert!(text.contains("\"t_ms\": 300"));
    }
}
