//! Two-phase feasibility repair for raw (possibly infeasible) rate
//! allocations, e.g. surrogate inferences or random start points.
//!
//! Phase 1 walks the most overloaded (node, direction) time constraint
//! and takes 10 Mbps off the incident flow that loses the least utility,
//! until every constraint holds. Phase 2 then hands out 1 Mbps increases
//! to whichever flow gains the most, as long as all constraints stay
//! satisfied. Inputs are clamped into the demand box first, since the
//! decrease/increase loops never fix a rate sitting outside `[delta, d]`.

use crate::model::{DemandInstance, RateAllocation, Topology, UsageState, FEASIBILITY_TOL};
use crate::utility::{self, UtilityParams};
use crate::SolveError;

/// Rate removed per Phase 1 step (capped at the distance to the flow's
/// minimum rate).
pub const DECREASE_STEP_MBPS: f64 = 10.0;

/// Rate granted per Phase 2 step (capped at the distance to the flow's
/// demand ceiling).
pub const INCREASE_STEP_MBPS: f64 = 1.0;

/// Adjusts `raw` into the feasible region with minimal utility loss,
/// then greedily refills any headroom. The output always satisfies the
/// demand bounds and node time constraints, provided the all-minimum
/// allocation is feasible.
pub fn repair(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
    raw: &RateAllocation,
) -> Result<RateAllocation, SolveError> {
    if !instance.matches(topology)
        || !raw.matches(topology)
        || params.slice_count() != topology.slice_count()
    {
        return Err(SolveError::DimensionMismatch);
    }
    let slices = topology.slice_count();
    let paths = topology.path_count();

    {
        let min_usage = UsageState::from_allocation(topology, &instance.min_allocation());
        if min_usage.worst_entry().2 > 1.0 + FEASIBILITY_TOL {
            return Err(SolveError::InfeasibleMinRates);
        }
    }

    // Clamp into the demand box.
    let mut allocation = raw.clone();
    for i in 0..slices {
        for j in 0..paths {
            let clamped = raw
                .rate(i, j)
                .clamp(instance.min_rate(i, j), instance.max_demand(i, j));
            allocation.set_rate(i, j, clamped);
        }
    }
    let mut usage = UsageState::from_allocation(topology, &allocation);

    let mut headroom_total = 0.0;
    for i in 0..slices {
        for j in 0..paths {
            headroom_total += instance.max_demand(i, j) - instance.min_rate(i, j);
        }
    }
    let flows = (slices * paths) as u64;

    // Phase 1: minimum-loss decreases until every time constraint holds.
    // Every step removes a full DECREASE_STEP or pins a flow at its
    // minimum, which bounds the iteration count. Losses depend only on
    // the flow's own rate, so they are cached until the flow commits.
    let budget = (headroom_total / DECREASE_STEP_MBPS) as u64 + flows + 2;
    let mut iterations = 0u64;
    let mut cached_loss: alloc::vec::Vec<Option<(f64, f64)>> =
        alloc::vec![None; slices * paths];
    while usage.worst_entry().2 > 1.0 + FEASIBILITY_TOL {
        let (node, direction, _) = usage.worst_entry();
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for i in 0..slices {
            let spec = params.spec(i);
            for &j in topology.incident_paths(node, direction) {
                let rate = allocation.rate(i, j);
                let slack = rate - instance.min_rate(i, j);
                if slack <= 0.0 {
                    continue;
                }
                let (loss, step) = match cached_loss[i * paths + j] {
                    Some(entry) => entry,
                    None => {
                        let step = DECREASE_STEP_MBPS.min(slack);
                        let entry = (-utility::utility_delta(spec, rate, -step)?, step);
                        cached_loss[i * paths + j] = Some(entry);
                        entry
                    }
                };
                if best.map_or(true, |(_, _, l, _)| loss < l) {
                    best = Some((i, j, loss, step));
                }
            }
        }
        let Some((i, j, _, step)) = best else {
            // No incident flow above its minimum, yet the entry is still
            // overloaded: the minimum allocation itself is infeasible.
            return Err(SolveError::InfeasibleMinRates);
        };
        let rate = allocation.rate(i, j);
        let new_rate = if step < DECREASE_STEP_MBPS {
            instance.min_rate(i, j)
        } else {
            rate - step
        };
        usage.add_path_rate(topology, j, new_rate - rate);
        allocation.set_rate(i, j, new_rate);
        cached_loss[i * paths + j] = None;
        debug_assert!(usage.matches_allocation(topology, &allocation, 1e-6));
        iterations += 1;
        if iterations > budget {
            debug_assert!(false, "phase 1 exceeded its iteration budget");
            break;
        }
    }

    // Phase 2: maximum-gain increases while any flow can still grow.
    // Utilities are per-flow, so a committed step only changes the
    // committing flow's own gain; gains are cached and invalidated per
    // flow, which keeps this loop cheap on the inference path.
    let budget = (headroom_total / INCREASE_STEP_MBPS) as u64 + flows + 2;
    let mut iterations = 0u64;
    let mut cached_gain: alloc::vec::Vec<Option<(f64, f64)>> =
        alloc::vec![None; slices * paths];
    // Usage only grows in this phase and a blocked flow never commits,
    // so once a flow's step stops fitting it stays blocked for good.
    let mut blocked = alloc::vec![false; slices * paths];
    loop {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for i in 0..slices {
            let spec = params.spec(i);
            for j in 0..paths {
                let f = i * paths + j;
                if blocked[f] {
                    continue;
                }
                let rate = allocation.rate(i, j);
                let headroom = instance.max_demand(i, j) - rate;
                if headroom <= 0.0 {
                    blocked[f] = true;
                    continue;
                }
                let (gain, step) = match cached_gain[f] {
                    Some(entry) => entry,
                    None => {
                        let step = INCREASE_STEP_MBPS.min(headroom);
                        let entry = (utility::utility_delta(spec, rate, step)?, step);
                        cached_gain[f] = Some(entry);
                        entry
                    }
                };
                if !usage.can_add(topology, j, step) {
                    blocked[f] = true;
                    continue;
                }
                if best.map_or(true, |(_, _, g, _)| gain > g) {
                    best = Some((i, j, gain, step));
                }
            }
        }
        let Some((i, j, _, step)) = best else {
            break;
        };
        let rate = allocation.rate(i, j);
        let new_rate = if step < INCREASE_STEP_MBPS {
            instance.max_demand(i, j)
        } else {
            rate + step
        };
        usage.add_path_rate(topology, j, new_rate - rate);
        allocation.set_rate(i, j, new_rate);
        cached_gain[i * paths + j] = None;
        debug_assert!(usage.matches_allocation(topology, &allocation, 1e-6));
        iterations += 1;
        if iterations > budget {
            debug_assert!(false, "phase 2 exceeded its iteration budget");
            break;
        }
    }

    Ok(allocation)
}
