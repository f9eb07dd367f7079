//! Benchmark solvers: the greedy baseline and a grid brute-force oracle
//! for small instances.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{DemandInstance, RateAllocation, Topology, UsageState, FEASIBILITY_TOL};
use crate::utility::{self, UtilityParams};
use crate::SolveError;

fn check_dims(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
) -> Result<(), SolveError> {
    if !instance.matches(topology) || params.slice_count() != topology.slice_count() {
        return Err(SolveError::DimensionMismatch);
    }
    Ok(())
}

fn min_rates_feasible(topology: &Topology, instance: &DemandInstance) -> bool {
    let state = UsageState::from_allocation(topology, &instance.min_allocation());
    state.worst_entry().2 <= 1.0 + FEASIBILITY_TOL
}

/// Greedy solver: start every flow at its minimum rate, then repeatedly
/// grant `step_mbps` (capped at the remaining demand) to the flow with
/// the highest utility gain whose increase keeps the node time
/// constraints satisfied. Ties go to the lowest (slice, path) index.
pub fn greedy_solve(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
    step_mbps: f64,
) -> Result<RateAllocation, SolveError> {
    greedy_solve_traced(topology, instance, params, step_mbps, None)
}

/// Same as [`greedy_solve`], optionally recording the total utility
/// after every committed increase.
pub(crate) fn greedy_solve_traced(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
    step_mbps: f64,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<RateAllocation, SolveError> {
    check_dims(topology, instance, params)?;
    if !(step_mbps > 0.0) || !step_mbps.is_finite() {
        return Err(SolveError::InvalidArgument { what: "step" });
    }
    if !min_rates_feasible(topology, instance) {
        return Err(SolveError::InfeasibleMinRates);
    }

    let slices = topology.slice_count();
    let paths = topology.path_count();
    let mut allocation = instance.min_allocation();
    let mut usage = UsageState::from_allocation(topology, &allocation);
    let mut total = if trace.is_some() {
        utility::total_utility(params, &allocation)?
    } else {
        0.0
    };

    // Each committed step either grants the full step or pins a flow at
    // its ceiling, so the loop is bounded by sum((d - delta) / step)
    // plus one capping step per flow.
    let mut budget: u64 = slices as u64 * paths as u64 + 1;
    for i in 0..slices {
        for j in 0..paths {
            let headroom = instance.max_demand(i, j) - instance.min_rate(i, j);
            budget += (headroom / step_mbps) as u64 + 1;
        }
    }

    for _ in 0..budget {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for i in 0..slices {
            let spec = params.spec(i);
            for j in 0..paths {
                let rate = allocation.rate(i, j);
                let headroom = instance.max_demand(i, j) - rate;
                if headroom <= 0.0 {
                    continue;
                }
                let step = step_mbps.min(headroom);
                if !usage.can_add(topology, j, step) {
                    continue;
                }
                let gain = utility::utility_delta(spec, rate, step)?;
                if best.map_or(true, |(_, _, g, _)| gain > g) {
                    best = Some((i, j, gain, step));
                }
            }
        }
        let Some((i, j, gain, step)) = best else {
            break;
        };
        let rate = allocation.rate(i, j);
        // Land exactly on the ceiling when the step is capped.
        let new_rate = if step < step_mbps {
            instance.max_demand(i, j)
        } else {
            rate + step
        };
        usage.add_path_rate(topology, j, new_rate - rate);
        allocation.set_rate(i, j, new_rate);
        if let Some(trace) = trace.as_deref_mut() {
            total += gain;
            trace.push(total);
        }
    }
    Ok(allocation)
}

/// Search-space guard for the brute-force oracle: the product of
/// per-flow grid sizes may not exceed this.
pub const BRUTE_FORCE_POINT_LIMIT: u128 = 10_000_000;

/// Exhaustive grid search over `r[i][j] in {delta, delta+grid, ..., d}`
/// (the ceiling is always included). Returns the feasible maximiser of
/// the total utility; ties break to the lexicographically smallest
/// allocation in row-major (slice, path) order.
pub fn brute_force_solve(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
    grid_mbps: f64,
) -> Result<RateAllocation, SolveError> {
    check_dims(topology, instance, params)?;
    if !(grid_mbps > 0.0) || !grid_mbps.is_finite() {
        return Err(SolveError::InvalidArgument { what: "grid" });
    }

    let slices = topology.slice_count();
    let paths = topology.path_count();
    let flows = slices * paths;

    // Per-flow grid values and cached utilities.
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(flows);
    let mut utilities: Vec<Vec<f64>> = Vec::with_capacity(flows);
    let mut points: u128 = 1;
    for i in 0..slices {
        let spec = params.spec(i);
        for j in 0..paths {
            let lo = instance.min_rate(i, j);
            let hi = instance.max_demand(i, j);
            let mut vals = Vec::new();
            let mut v = lo;
            let mut k = 0u64;
            while v < hi {
                vals.push(v);
                k += 1;
                v = lo + grid_mbps * k as f64;
            }
            vals.push(hi);
            points = points.saturating_mul(vals.len() as u128);
            if points > BRUTE_FORCE_POINT_LIMIT {
                return Err(SolveError::SearchSpaceTooLarge {
                    points,
                    limit: BRUTE_FORCE_POINT_LIMIT,
                });
            }
            let us: Result<Vec<f64>, _> =
                vals.iter().map(|&r| utility::flow_utility(spec, r)).collect();
            values.push(vals);
            utilities.push(us?);
        }
    }

    // Node-time constraints expressed over per-path totals: each
    // (node, direction) entry is sum_j total[j] / capacity.
    let mut constraints: Vec<Vec<(usize, f64)>> = Vec::new();
    {
        let mut keyed: Vec<(usize, usize, Vec<(usize, f64)>)> = Vec::new();
        for j in 0..paths {
            for load in topology.path_loads(j) {
                let key = (load.node, load.direction as usize);
                match keyed.iter_mut().find(|(n, d, _)| (*n, *d) == key) {
                    Some((_, _, terms)) => terms.push((j, 1.0 / load.capacity_mbps)),
                    None => keyed.push((key.0, key.1, vec![(j, 1.0 / load.capacity_mbps)])),
                }
            }
        }
        constraints.extend(keyed.into_iter().map(|(_, _, terms)| terms));
    }

    // Odometer enumeration in lexicographic order with incremental
    // utility and per-path totals; the first strict improvement wins,
    // which realises the lexicographic tie-break.
    let mut digits = vec![0usize; flows];
    let mut path_totals = vec![0.0f64; paths];
    let mut total_utility = 0.0f64;
    for f in 0..flows {
        path_totals[f % paths] += values[f][0];
        total_utility += utilities[f][0];
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let feasible = constraints.iter().all(|terms| {
            terms
                .iter()
                .map(|&(j, inv_cap)| path_totals[j] * inv_cap)
                .sum::<f64>()
                <= 1.0 + FEASIBILITY_TOL
        });
        if feasible && best.as_ref().map_or(true, |(u, _)| total_utility > *u) {
            best = Some((total_utility, digits.clone()));
        }

        // Advance the odometer, last digit fastest.
        let mut exhausted = true;
        for pos in (0..flows).rev() {
            let old = digits[pos];
            let next = if old + 1 < values[pos].len() { old + 1 } else { 0 };
            digits[pos] = next;
            path_totals[pos % paths] += values[pos][next] - values[pos][old];
            total_utility += utilities[pos][next] - utilities[pos][old];
            if next != 0 {
                exhausted = false;
                break;
            }
        }
        if exhausted {
            break;
        }
    }

    let (_, digits) = best.ok_or(SolveError::NoFeasiblePoint)?;
    let rates: Vec<f64> = digits.iter().enumerate().map(|(f, &k)| values[f][k]).collect();
    Ok(RateAllocation::new(slices, paths, rates).expect("grid rates are valid"))
}
