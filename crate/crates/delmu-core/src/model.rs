//! Network model: topologies, demand instances, rate allocations and the
//! per-node TDMA time constraints.
//!
//! A topology is a directed-link graph with a gateway at node 0 and a
//! fixed set of simple paths, each anchored at the gateway. Flows are
//! downlink (gateway towards the path tail), one flow per (slice, path)
//! pair. A node `m` forwarding path `j` transmits on the path's outbound
//! edge `(m, n)` and receives on its inbound edge `(l, m)`; each Mbps of
//! flow rate consumes `1/c` of that node's Tx or Rx time, and the total
//! time per node and direction must not exceed 1.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Gateway node id; all paths are anchored here.
pub const GATEWAY: usize = 0;

/// Absolute tolerance on time fractions (and on demand bounds, in Mbps)
/// when checking feasibility. Solver outputs are floating point; a strict
/// comparison would flag round-off.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub src: usize,
    pub dst: usize,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Tx,
    Rx,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Tx => "tx",
            Direction::Rx => "rx",
        }
    }

    fn index(self) -> usize {
        match self {
            Direction::Tx => 0,
            Direction::Rx => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    EmptyTopology,
    LinkEndpointOutOfRange { link: usize },
    SelfLoop { link: usize },
    NonPositiveCapacity { link: usize },
    DuplicateLink { src: usize, dst: usize },
    PathTooShort { path: usize },
    PathNodeOutOfRange { path: usize },
    PathNotAnchoredAtGateway { path: usize },
    PathNotSimple { path: usize },
    DanglingPathEdge { path: usize, src: usize, dst: usize },
    LinkNotFound { src: usize, dst: usize },
    InvalidTopologyIndex { index: usize },
    DimensionMismatch,
    InvalidRate { slice: usize, path: usize, value: f64 },
    InvalidDemand { slice: usize, path: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::EmptyTopology => write!(f, "topology needs nodes, paths and slices"),
            ModelError::LinkEndpointOutOfRange { link } => {
                write!(f, "link {link} references a node out of range")
            }
            ModelError::SelfLoop { link } => write!(f, "link {link} is a self loop"),
            ModelError::NonPositiveCapacity { link } => {
                write!(f, "link {link} has non-positive capacity")
            }
            ModelError::DuplicateLink { src, dst } => {
                write!(f, "duplicate link ({src}, {dst})")
            }
            ModelError::PathTooShort { path } => write!(f, "path {path} has fewer than 2 nodes"),
            ModelError::PathNodeOutOfRange { path } => {
                write!(f, "path {path} references a node out of range")
            }
            ModelError::PathNotAnchoredAtGateway { path } => {
                write!(f, "path {path} neither starts nor ends at the gateway")
            }
            ModelError::PathNotSimple { path } => write!(f, "path {path} repeats a node"),
            ModelError::DanglingPathEdge { path, src, dst } => {
                write!(f, "path {path} uses edge ({src}, {dst}) which is not a link")
            }
            ModelError::LinkNotFound { src, dst } => write!(f, "no link ({src}, {dst})"),
            ModelError::InvalidTopologyIndex { index } => {
                write!(f, "built-in topology index {index} out of range 1..=4")
            }
            ModelError::DimensionMismatch => write!(f, "dimension mismatch"),
            ModelError::InvalidRate { slice, path, value } => {
                write!(f, "rate for flow ({slice}, {path}) is invalid: {value}")
            }
            ModelError::InvalidDemand { slice, path } => {
                write!(f, "demand bounds for flow ({slice}, {path}) are invalid")
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// One time-constraint entry loaded by a path: the node, the direction in
/// which it handles the path's traffic, and the capacity of the incident
/// path edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoad {
    pub node: usize,
    pub direction: Direction,
    pub capacity_mbps: f64,
}

/// Immutable backhaul topology. Paths are canonicalised to start at the
/// gateway; a path supplied tail-first (ending at node 0) is reversed on
/// construction.
#[derive(Debug, Clone)]
pub struct Topology {
    name: String,
    node_count: usize,
    links: Vec<Link>,
    paths: Vec<Vec<usize>>,
    slice_count: usize,
    path_loads: Vec<Vec<PathLoad>>,
    incident_paths: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(
        name: &str,
        node_count: usize,
        links: Vec<Link>,
        paths: Vec<Vec<usize>>,
        slice_count: usize,
    ) -> Result<Self, ModelError> {
        if node_count == 0 || slice_count == 0 || paths.is_empty() {
            return Err(ModelError::EmptyTopology);
        }
        for (idx, link) in links.iter().enumerate() {
            if link.src >= node_count || link.dst >= node_count {
                return Err(ModelError::LinkEndpointOutOfRange { link: idx });
            }
            if link.src == link.dst {
                return Err(ModelError::SelfLoop { link: idx });
            }
            if !(link.capacity_mbps > 0.0) || !link.capacity_mbps.is_finite() {
                return Err(ModelError::NonPositiveCapacity { link: idx });
            }
            if links[..idx]
                .iter()
                .any(|l| l.src == link.src && l.dst == link.dst)
            {
                return Err(ModelError::DuplicateLink {
                    src: link.src,
                    dst: link.dst,
                });
            }
        }

        let mut canonical = Vec::with_capacity(paths.len());
        for (idx, path) in paths.into_iter().enumerate() {
            if path.len() < 2 {
                return Err(ModelError::PathTooShort { path: idx });
            }
            if path.iter().any(|&n| n >= node_count) {
                return Err(ModelError::PathNodeOutOfRange { path: idx });
            }
            let mut path = path;
            if path[0] != GATEWAY {
                if *path.last().unwrap() == GATEWAY {
                    path.reverse();
                } else {
                    return Err(ModelError::PathNotAnchoredAtGateway { path: idx });
                }
            }
            for (i, &n) in path.iter().enumerate() {
                if path[..i].contains(&n) {
                    return Err(ModelError::PathNotSimple { path: idx });
                }
            }
            for pair in path.windows(2) {
                if !links.iter().any(|l| l.src == pair[0] && l.dst == pair[1]) {
                    return Err(ModelError::DanglingPathEdge {
                        path: idx,
                        src: pair[0],
                        dst: pair[1],
                    });
                }
            }
            canonical.push(path);
        }

        let mut topology = Topology {
            name: String::from(name),
            node_count,
            links,
            paths: canonical,
            slice_count,
            path_loads: Vec::new(),
            incident_paths: Vec::new(),
        };
        topology.rebuild_loads();
        Ok(topology)
    }

    fn rebuild_loads(&mut self) {
        let capacity = |src: usize, dst: usize| -> f64 {
            self.links
                .iter()
                .find(|l| l.src == src && l.dst == dst)
                .map(|l| l.capacity_mbps)
                .expect("validated path edge")
        };
        self.path_loads = self
            .paths
            .iter()
            .map(|path| {
                let mut loads = Vec::with_capacity(2 * (path.len() - 1));
                for pair in path.windows(2) {
                    let cap = capacity(pair[0], pair[1]);
                    loads.push(PathLoad {
                        node: pair[0],
                        direction: Direction::Tx,
                        capacity_mbps: cap,
                    });
                    loads.push(PathLoad {
                        node: pair[1],
                        direction: Direction::Rx,
                        capacity_mbps: cap,
                    });
                }
                loads
            })
            .collect();
        self.incident_paths = vec![Vec::new(); 2 * self.node_count];
        for (j, loads) in self.path_loads.iter().enumerate() {
            for load in loads {
                let slot = &mut self.incident_paths[2 * load.node + load.direction.index()];
                if !slot.contains(&j) {
                    slot.push(j);
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    pub fn slice_count(&self) -> usize {
        self.slice_count
    }

    pub fn flow_count(&self) -> usize {
        self.slice_count * self.paths.len()
    }

    pub fn link_capacity(&self, src: usize, dst: usize) -> Option<f64> {
        self.links
            .iter()
            .find(|l| l.src == src && l.dst == dst)
            .map(|l| l.capacity_mbps)
    }

    /// Returns a copy of the topology with one link capacity replaced.
    pub fn with_link_capacity(
        &self,
        src: usize,
        dst: usize,
        capacity_mbps: f64,
    ) -> Result<Topology, ModelError> {
        let mut links = self.links.clone();
        let link = links
            .iter_mut()
            .find(|l| l.src == src && l.dst == dst)
            .ok_or(ModelError::LinkNotFound { src, dst })?;
        link.capacity_mbps = capacity_mbps;
        Topology::new(
            &self.name,
            self.node_count,
            links,
            self.paths.clone(),
            self.slice_count,
        )
    }

    /// Time-constraint entries loaded by path `j`, in path order.
    pub fn path_loads(&self, path: usize) -> &[PathLoad] {
        &self.path_loads[path]
    }

    /// Paths that load the given (node, direction) time constraint.
    pub fn incident_paths(&self, node: usize, direction: Direction) -> &[usize] {
        &self.incident_paths[2 * node + direction.index()]
    }
}

/// The four evaluation topologies. Node counts are 4, 6, 8 and 10, each
/// carries 3 gateway paths and 4 slices (12 flows), and link capacities
/// are drawn from {693, 1386, 2772, 6800} Mbps. Topology 3 routes all
/// paths over link (0, 1) at 2772 Mbps, the link whose partial blockage
/// the replay scenario exercises.
pub fn builtin_topology(index: usize) -> Result<Topology, ModelError> {
    let link = |src, dst, capacity_mbps| Link {
        src,
        dst,
        capacity_mbps,
    };
    match index {
        1 => Topology::new(
            "topology-1",
            4,
            vec![link(0, 1, 2772.0), link(0, 2, 1386.0), link(2, 3, 1386.0)],
            vec![vec![0, 1], vec![0, 2], vec![0, 2, 3]],
            4,
        ),
        2 => Topology::new(
            "topology-2",
            6,
            vec![
                link(0, 1, 1386.0),
                link(1, 2, 693.0),
                link(0, 3, 2772.0),
                link(0, 4, 1386.0),
                link(4, 5, 1386.0),
            ],
            vec![vec![0, 1, 2], vec![0, 3], vec![0, 4, 5]],
            4,
        ),
        3 => Topology::new(
            "topology-3",
            8,
            vec![
                link(0, 1, 2772.0),
                link(1, 2, 1386.0),
                link(2, 3, 2772.0),
                link(1, 4, 1386.0),
                link(4, 5, 1386.0),
                link(1, 6, 1386.0),
                link(6, 7, 693.0),
            ],
            vec![vec![0, 1, 2, 3], vec![0, 1, 4, 5], vec![0, 1, 6, 7]],
            4,
        ),
        4 => Topology::new(
            "topology-4",
            10,
            vec![
                link(0, 1, 6800.0),
                link(1, 2, 2772.0),
                link(2, 3, 2772.0),
                link(3, 4, 1386.0),
                link(0, 5, 6800.0),
                link(5, 6, 2772.0),
                link(6, 7, 1386.0),
                link(0, 8, 2772.0),
                link(8, 9, 1386.0),
            ],
            vec![vec![0, 1, 2, 3, 4], vec![0, 5, 6, 7], vec![0, 8, 9]],
            4,
        ),
        _ => Err(ModelError::InvalidTopologyIndex { index }),
    }
}

/// Number of built-in topologies.
pub const BUILTIN_TOPOLOGY_COUNT: usize = 4;

/// Per-flow demand bounds: the minimum rate that keeps the service
/// available and the demand ceiling beyond which extra rate is wasted.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandInstance {
    slices: usize,
    paths: usize,
    min_rate: Vec<f64>,
    max_demand: Vec<f64>,
}

impl DemandInstance {
    pub fn new(
        slices: usize,
        paths: usize,
        min_rate: Vec<f64>,
        max_demand: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if min_rate.len() != slices * paths || max_demand.len() != slices * paths {
            return Err(ModelError::DimensionMismatch);
        }
        for i in 0..slices {
            for j in 0..paths {
                let lo = min_rate[i * paths + j];
                let hi = max_demand[i * paths + j];
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                    return Err(ModelError::InvalidDemand { slice: i, path: j });
                }
            }
        }
        Ok(DemandInstance {
            slices,
            paths,
            min_rate,
            max_demand,
        })
    }

    pub fn slice_count(&self) -> usize {
        self.slices
    }

    pub fn path_count(&self) -> usize {
        self.paths
    }

    pub fn min_rate(&self, slice: usize, path: usize) -> f64 {
        self.min_rate[slice * self.paths + path]
    }

    pub fn max_demand(&self, slice: usize, path: usize) -> f64 {
        self.max_demand[slice * self.paths + path]
    }

    pub fn min_rates(&self) -> &[f64] {
        &self.min_rate
    }

    pub fn max_demands(&self) -> &[f64] {
        &self.max_demand
    }

    /// The allocation that grants every flow exactly its minimum rate.
    pub fn min_allocation(&self) -> RateAllocation {
        RateAllocation {
            slices: self.slices,
            paths: self.paths,
            rates: self.min_rate.clone(),
        }
    }

    pub fn matches(&self, topology: &Topology) -> bool {
        self.slices == topology.slice_count() && self.paths == topology.path_count()
    }
}

/// A rate (Mbps) for every (slice, path) flow.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    slices: usize,
    paths: usize,
    rates: Vec<f64>,
}

impl RateAllocation {
    pub fn new(slices: usize, paths: usize, rates: Vec<f64>) -> Result<Self, ModelError> {
        if rates.len() != slices * paths {
            return Err(ModelError::DimensionMismatch);
        }
        for (idx, &r) in rates.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(ModelError::InvalidRate {
                    slice: idx / paths,
                    path: idx % paths,
                    value: r,
                });
            }
        }
        Ok(RateAllocation {
            slices,
            paths,
            rates,
        })
    }

    pub fn zeros(slices: usize, paths: usize) -> Self {
        RateAllocation {
            slices,
            paths,
            rates: vec![0.0; slices * paths],
        }
    }

    pub fn slice_count(&self) -> usize {
        self.slices
    }

    pub fn path_count(&self) -> usize {
        self.paths
    }

    pub fn rate(&self, slice: usize, path: usize) -> f64 {
        self.rates[slice * self.paths + path]
    }

    pub fn set_rate(&mut self, slice: usize, path: usize, rate: f64) {
        debug_assert!(rate.is_finite() && rate >= 0.0);
        self.rates[slice * self.paths + path] = rate;
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Total rate carried on one path across all slices.
    pub fn path_rate(&self, path: usize) -> f64 {
        (0..self.slices).map(|i| self.rate(i, path)).sum()
    }

    pub fn iter_flows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let paths = self.paths;
        self.rates
            .iter()
            .enumerate()
            .map(move |(idx, &r)| (idx / paths, idx % paths, r))
    }

    pub fn matches(&self, topology: &Topology) -> bool {
        self.slices == topology.slice_count() && self.paths == topology.path_count()
    }
}

/// Running per-(node, direction) time fractions for an allocation.
/// Solvers update it incrementally as they move single flows.
#[derive(Debug, Clone)]
pub struct UsageState {
    tx: Vec<f64>,
    rx: Vec<f64>,
}

impl UsageState {
    pub fn zeros(topology: &Topology) -> Self {
        UsageState {
            tx: vec![0.0; topology.node_count()],
            rx: vec![0.0; topology.node_count()],
        }
    }

    pub fn from_allocation(topology: &Topology, allocation: &RateAllocation) -> Self {
        let mut state = UsageState::zeros(topology);
        for j in 0..topology.path_count() {
            state.add_path_rate(topology, j, allocation.path_rate(j));
        }
        state
    }

    /// Adds `delta_mbps` of rate to every constraint loaded by `path`.
    pub fn add_path_rate(&mut self, topology: &Topology, path: usize, delta_mbps: f64) {
        for load in topology.path_loads(path) {
            let entry = match load.direction {
                Direction::Tx => &mut self.tx[load.node],
                Direction::Rx => &mut self.rx[load.node],
            };
            *entry += delta_mbps / load.capacity_mbps;
        }
    }

    pub fn fraction(&self, node: usize, direction: Direction) -> f64 {
        match direction {
            Direction::Tx => self.tx[node],
            Direction::Rx => self.rx[node],
        }
    }

    /// Whether adding `delta_mbps` on `path` keeps every touched
    /// constraint within `1 + FEASIBILITY_TOL`.
    pub fn can_add(&self, topology: &Topology, path: usize, delta_mbps: f64) -> bool {
        topology.path_loads(path).iter().all(|load| {
            self.fraction(load.node, load.direction) + delta_mbps / load.capacity_mbps
                <= 1.0 + FEASIBILITY_TOL
        })
    }

    /// The most loaded (node, direction) entry.
    pub fn worst_entry(&self) -> (usize, Direction, f64) {
        let mut best = (0, Direction::Tx, f64::NEG_INFINITY);
        for (node, &f) in self.tx.iter().enumerate() {
            if f > best.2 {
                best = (node, Direction::Tx, f);
            }
        }
        for (node, &f) in self.rx.iter().enumerate() {
            if f > best.2 {
                best = (node, Direction::Rx, f);
            }
        }
        best
    }

    /// Compares against a freshly computed state; used to validate the
    /// incremental updates.
    pub fn matches_allocation(
        &self,
        topology: &Topology,
        allocation: &RateAllocation,
        tol: f64,
    ) -> bool {
        let fresh = UsageState::from_allocation(topology, allocation);
        self.tx
            .iter()
            .zip(&fresh.tx)
            .chain(self.rx.iter().zip(&fresh.rx))
            .all(|(a, b)| (a - b).abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeViolation {
    pub node: usize,
    pub direction: Direction,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandViolation {
    pub slice: usize,
    pub path: usize,
    pub rate: f64,
    pub min_rate: f64,
    pub max_demand: f64,
}

/// Per-(node, direction) time fractions plus any constraint violations.
#[derive(Debug, Clone)]
pub struct UsageReport {
    tx: Vec<f64>,
    rx: Vec<f64>,
    time_violations: Vec<TimeViolation>,
    demand_violations: Vec<DemandViolation>,
}

impl UsageReport {
    pub fn fraction(&self, node: usize, direction: Direction) -> f64 {
        match direction {
            Direction::Tx => self.tx[node],
            Direction::Rx => self.rx[node],
        }
    }

    pub fn tx_fractions(&self) -> &[f64] {
        &self.tx
    }

    pub fn rx_fractions(&self) -> &[f64] {
        &self.rx
    }

    pub fn time_violations(&self) -> &[TimeViolation] {
        &self.time_violations
    }

    pub fn demand_violations(&self) -> &[DemandViolation] {
        &self.demand_violations
    }

    pub fn is_feasible(&self) -> bool {
        self.time_violations.is_empty() && self.demand_violations.is_empty()
    }
}

fn usage_report(topology: &Topology, allocation: &RateAllocation) -> UsageReport {
    let state = UsageState::from_allocation(topology, allocation);
    let mut time_violations = Vec::new();
    for node in 0..topology.node_count() {
        for direction in [Direction::Tx, Direction::Rx] {
            let fraction = state.fraction(node, direction);
            if fraction > 1.0 + FEASIBILITY_TOL {
                time_violations.push(TimeViolation {
                    node,
                    direction,
                    fraction,
                });
            }
        }
    }
    UsageReport {
        tx: state.tx,
        rx: state.rx,
        time_violations,
        demand_violations: Vec::new(),
    }
}

/// Computes the per-(node, direction) time fractions for an allocation
/// and flags entries exceeding `1 + FEASIBILITY_TOL`.
pub fn node_time_usage(
    topology: &Topology,
    allocation: &RateAllocation,
) -> Result<UsageReport, ModelError> {
    if !allocation.matches(topology) {
        return Err(ModelError::DimensionMismatch);
    }
    Ok(usage_report(topology, allocation))
}

/// Full feasibility check: demand bounds plus node time constraints.
/// The report enumerates every violation.
pub fn check_feasible(
    topology: &Topology,
    instance: &DemandInstance,
    allocation: &RateAllocation,
) -> Result<UsageReport, ModelError> {
    if !allocation.matches(topology) || !instance.matches(topology) {
        return Err(ModelError::DimensionMismatch);
    }
    let mut report = usage_report(topology, allocation);
    for i in 0..allocation.slice_count() {
        for j in 0..allocation.path_count() {
            let rate = allocation.rate(i, j);
            let lo = instance.min_rate(i, j);
            let hi = instance.max_demand(i, j);
            if rate < lo - FEASIBILITY_TOL || rate > hi + FEASIBILITY_TOL {
                report.demand_violations.push(DemandViolation {
                    slice: i,
                    path: j,
                    rate,
                    min_rate: lo,
                    max_demand: hi,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn two_node_topology(capacity: f64, slices: usize) -> Topology {
        Topology::new(
            "pair",
            2,
            vec![Link {
                src: 0,
                dst: 1,
                capacity_mbps: capacity,
            }],
            vec![vec![0, 1]],
            slices,
        )
        .unwrap()
    }

    #[test]
    fn builtin_shapes() {
        assert_eq!(builtin_topology(1).unwrap().node_count(), 4);
        assert_eq!(builtin_topology(2).unwrap().node_count(), 6);
        assert_eq!(builtin_topology(3).unwrap().node_count(), 8);
        assert_eq!(builtin_topology(4).unwrap().node_count(), 10);
        for k in 1..=4 {
            let t = builtin_topology(k).unwrap();
            assert_eq!(t.path_count(), 3, "topology {k}");
            assert_eq!(t.slice_count(), 4, "topology {k}");
            assert_eq!(t.flow_count(), 12, "topology {k}");
        }
        assert!(matches!(
            builtin_topology(0),
            Err(ModelError::InvalidTopologyIndex { index: 0 })
        ));
        assert!(builtin_topology(5).is_err());
    }

    #[test]
    fn topology_3_has_the_blockable_link() {
        let t = builtin_topology(3).unwrap();
        assert_eq!(t.link_capacity(0, 1), Some(2772.0));
    }

    #[test]
    fn builtin_capacities_in_catalogue() {
        let catalogue = [693.0, 1386.0, 2772.0, 6800.0];
        for k in 1..=4 {
            let t = builtin_topology(k).unwrap();
            for link in t.links() {
                assert!(
                    catalogue.contains(&link.capacity_mbps),
                    "topology {k} capacity {}",
                    link.capacity_mbps
                );
            }
        }
    }

    #[test]
    fn tau_each_interior_node_once_per_direction() {
        for k in 1..=4 {
            let t = builtin_topology(k).unwrap();
            for (j, path) in t.paths().iter().enumerate() {
                let loads = t.path_loads(j);
                for (pos, &node) in path.iter().enumerate() {
                    let tx = loads
                        .iter()
                        .filter(|l| l.node == node && l.direction == Direction::Tx)
                        .count();
                    let rx = loads
                        .iter()
                        .filter(|l| l.node == node && l.direction == Direction::Rx)
                        .count();
                    if pos == 0 {
                        assert_eq!((tx, rx), (1, 0));
                    } else if pos == path.len() - 1 {
                        assert_eq!((tx, rx), (0, 1));
                    } else {
                        assert_eq!((tx, rx), (1, 1), "interior node {node} on path {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_flow_usage_split() {
        let t = two_node_topology(100.0, 1);
        let alloc = RateAllocation::new(1, 1, alloc::vec![50.0]).unwrap();
        let report = node_time_usage(&t, &alloc).unwrap();
        assert_eq!(report.fraction(0, Direction::Tx), 0.5);
        assert_eq!(report.fraction(1, Direction::Rx), 0.5);
        assert_eq!(report.fraction(0, Direction::Rx), 0.0);
        assert!(report.is_feasible());
    }

    #[test]
    fn zero_rates_no_violations() {
        let t = builtin_topology(2).unwrap();
        let report = node_time_usage(&t, &RateAllocation::zeros(4, 3)).unwrap();
        assert!(report.is_feasible());
        assert!(report.tx_fractions().iter().all(|&f| f == 0.0));
        assert!(report.rx_fractions().iter().all(|&f| f == 0.0));
    }

    #[test]
    fn overloaded_link_flagged() {
        let t = two_node_topology(100.0, 2);
        let alloc = RateAllocation::new(2, 1, alloc::vec![80.0, 80.0]).unwrap();
        let report = node_time_usage(&t, &alloc).unwrap();
        assert!((report.fraction(0, Direction::Tx) - 1.6).abs() < 1e-12);
        assert_eq!(report.time_violations().len(), 2); // node 0 Tx and node 1 Rx
        assert!(!report.is_feasible());
    }

    #[test]
    fn check_feasible_flags_demand_bounds() {
        let t = two_node_topology(1000.0, 2);
        let instance =
            DemandInstance::new(2, 1, alloc::vec![10.0, 0.0], alloc::vec![100.0, 50.0]).unwrap();
        let ok = check_feasible(&t, &instance, &instance.min_allocation()).unwrap();
        assert!(ok.is_feasible());

        let above = RateAllocation::new(2, 1, alloc::vec![101.0, 0.0]).unwrap();
        let report = check_feasible(&t, &instance, &above).unwrap();
        assert_eq!(report.demand_violations().len(), 1);
        assert_eq!(report.demand_violations()[0].slice, 0);

        let below = RateAllocation::new(2, 1, alloc::vec![9.0, 0.0]).unwrap();
        let report = check_feasible(&t, &instance, &below).unwrap();
        assert_eq!(report.demand_violations().len(), 1);
    }

    #[test]
    fn usage_linear_in_rates() {
        let t = builtin_topology(2).unwrap();
        let mut rng = SplitMix64::new(5);
        for _ in 0..50 {
            let rates: alloc::vec::Vec<f64> = (0..12).map(|_| rng.next_range(0.0, 400.0)).collect();
            let alloc = RateAllocation::new(4, 3, rates.clone()).unwrap();
            let a = rng.next_range(0.0, 3.0);
            let scaled =
                RateAllocation::new(4, 3, rates.iter().map(|r| a * r).collect()).unwrap();
            let u1 = node_time_usage(&t, &alloc).unwrap();
            let u2 = node_time_usage(&t, &scaled).unwrap();
            for node in 0..t.node_count() {
                for dir in [Direction::Tx, Direction::Rx] {
                    let expect = a * u1.fraction(node, dir);
                    let got = u2.fraction(node, dir);
                    let scale = expect.abs().max(1e-12);
                    assert!(
                        (got - expect).abs() / scale < 1e-12,
                        "node {node} {dir:?}: {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn worst_case_min_rates_feasible_on_all_builtins() {
        // Instance generation caps minimum rates at 100 Mbps; even the
        // all-100 instance must be feasible on every built-in topology.
        for k in 1..=4 {
            let t = builtin_topology(k).unwrap();
            let n = t.flow_count();
            let instance =
                DemandInstance::new(4, 3, alloc::vec![100.0; n], alloc::vec![100.0; n]).unwrap();
            let report = check_feasible(&t, &instance, &instance.min_allocation()).unwrap();
            assert!(report.is_feasible(), "topology {k}");
        }
    }

    #[test]
    fn paths_canonicalised_to_start_at_gateway() {
        let t = Topology::new(
            "reversed",
            3,
            vec![
                Link {
                    src: 0,
                    dst: 1,
                    capacity_mbps: 100.0,
                },
                Link {
                    src: 1,
                    dst: 2,
                    capacity_mbps: 100.0,
                },
            ],
            vec![vec![2, 1, 0]],
            1,
        )
        .unwrap();
        assert_eq!(t.paths()[0], alloc::vec![0, 1, 2]);
    }

    #[test]
    fn validation_errors() {
        let link = |src, dst, capacity_mbps| Link {
            src,
            dst,
            capacity_mbps,
        };
        // Dangling path edge.
        assert!(matches!(
            Topology::new(
                "bad",
                3,
                vec![link(0, 1, 10.0)],
                vec![vec![0, 1, 2]],
                1
            ),
            Err(ModelError::DanglingPathEdge { .. })
        ));
        // Non-positive capacity.
        assert!(matches!(
            Topology::new("bad", 2, vec![link(0, 1, 0.0)], vec![vec![0, 1]], 1),
            Err(ModelError::NonPositiveCapacity { .. })
        ));
        // Path not touching the gateway.
        assert!(matches!(
            Topology::new(
                "bad",
                3,
                vec![link(0, 1, 10.0), link(1, 2, 10.0)],
                vec![vec![1, 2]],
                1
            ),
            Err(ModelError::PathNotAnchoredAtGateway { .. })
        ));
        // Repeated node.
        assert!(matches!(
            Topology::new(
                "bad",
                3,
                vec![link(0, 1, 10.0), link(1, 0, 10.0)],
                vec![vec![0, 1, 0]],
                1
            ),
            Err(ModelError::PathNotSimple { .. })
        ));
        // Node id out of range.
        assert!(matches!(
            Topology::new("bad", 2, vec![link(0, 3, 10.0)], vec![vec![0, 1]], 1),
            Err(ModelError::LinkEndpointOutOfRange { .. })
        ));
    }

    #[test]
    fn with_link_capacity_replaces_and_revalidates() {
        let t = builtin_topology(3).unwrap();
        let dropped = t.with_link_capacity(0, 1, 693.0).unwrap();
        assert_eq!(dropped.link_capacity(0, 1), Some(693.0));
        assert_eq!(t.link_capacity(0, 1), Some(2772.0));
        assert!(t.with_link_capacity(0, 7, 100.0).is_err());
        assert!(t.with_link_capacity(0, 1, 0.0).is_err());
    }

    #[test]
    fn incremental_usage_matches_fresh() {
        let t = builtin_topology(1).unwrap();
        let mut alloc = RateAllocation::zeros(4, 3);
        let mut state = UsageState::from_allocation(&t, &alloc);
        let mut rng = SplitMix64::new(77);
        for _ in 0..200 {
            let i = rng.next_below(4) as usize;
            let j = rng.next_below(3) as usize;
            let delta = rng.next_range(-20.0, 60.0);
            let new_rate = (alloc.rate(i, j) + delta).max(0.0);
            let applied = new_rate - alloc.rate(i, j);
            alloc.set_rate(i, j, new_rate);
            state.add_path_rate(&t, j, applied);
        }
        assert!(state.matches_allocation(&t, &alloc, 1e-9));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let t = builtin_topology(1).unwrap();
        let alloc = RateAllocation::zeros(2, 2);
        assert!(matches!(
            node_time_usage(&t, &alloc),
            Err(ModelError::DimensionMismatch)
        ));
    }

    #[test]
    fn rate_allocation_validates() {
        assert!(RateAllocation::new(1, 1, alloc::vec![-1.0]).is_err());
        assert!(RateAllocation::new(1, 1, alloc::vec![f64::NAN]).is_err());
        assert!(RateAllocation::new(1, 2, alloc::vec![1.0]).is_err());
        assert!(DemandInstance::new(1, 1, alloc::vec![5.0], alloc::vec![4.0]).is_err());
    }
}
