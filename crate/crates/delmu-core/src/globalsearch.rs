//! Multistart global search over the rate polytope.
//!
//! Each start point is drawn uniformly in the demand box, repaired into
//! the feasible region, nudged strictly inside, and then improved by
//! damped Newton ascent on a log-barrier objective over a decreasing
//! barrier weight schedule. The greedy solution is always included as a
//! start, so the returned utility never falls below greedy's. This
//! solver also produces the labels the surrogate network is trained on.

use alloc::vec;
use alloc::vec::Vec;

use crate::baseline::greedy_solve;
use crate::model::{check_feasible, DemandInstance, RateAllocation, Topology};
use crate::repair::repair;
use crate::rng::{mix, SplitMix64};
use crate::utility::{self, UtilityParams};
use crate::SolveError;

/// Armijo sufficient-increase slope.
const ARMIJO_SLOPE: f64 = 1e-4;
/// Backtracking factor.
const BACKTRACK: f64 = 0.5;
/// Relative inward perturbation applied to boundary starts.
const INTERIOR_MARGIN: f64 = 1e-6;
/// Strict slack required of time constraints at the interior start.
const TIME_MARGIN: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct GsOptions {
    /// Number of random start points (the greedy solution is added on
    /// top of these).
    pub n_starts: usize,
    /// Ascent iteration cap per barrier stage.
    pub max_ascent_iters: usize,
    /// Decreasing barrier weights, scaled internally by the magnitude of
    /// the start utility.
    pub barrier_weights: Vec<f64>,
    /// Convergence tolerance on the barrier objective, in utility units.
    pub tol: f64,
    pub seed: u64,
}

impl Default for GsOptions {
    fn default() -> Self {
        GsOptions {
            n_starts: 100,
            max_ascent_iters: 500,
            // Both ends of the schedule matter. A head weight near the
            // utility scale drags every start towards the analytic
            // centre and collapses the multistart basins; a tail above
            // 1e-5 leaves iterates short of boundary optima by more
            // than the 0.1% the oracle comparisons allow.
            barrier_weights: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl GsOptions {
    pub fn with_seed(seed: u64) -> Self {
        GsOptions {
            seed,
            ..GsOptions::default()
        }
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.n_starts < 1 {
            return Err(SolveError::InvalidArgument { what: "n_starts" });
        }
        if !(self.tol > 0.0) {
            return Err(SolveError::InvalidArgument { what: "tol" });
        }
        if self.barrier_weights.is_empty() || self.barrier_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(SolveError::InvalidArgument {
                what: "barrier_weights",
            });
        }
        Ok(())
    }
}

/// Shared geometry for one ascent run: which flows can move, and the
/// node-time constraints expressed over per-path rate totals.
struct AscentProblem<'a> {
    topology: &'a Topology,
    instance: &'a DemandInstance,
    params: &'a UtilityParams,
    free: Vec<bool>,
    /// Per constraint: (path, 1/capacity) terms.
    constraints: Vec<Vec<(usize, f64)>>,
    /// Per path: (constraint index, 1/capacity) memberships.
    path_terms: Vec<Vec<(usize, f64)>>,
}

impl<'a> AscentProblem<'a> {
    fn new(topology: &'a Topology, instance: &'a DemandInstance, params: &'a UtilityParams) -> Self {
        let slices = topology.slice_count();
        let paths = topology.path_count();
        let mut free = vec![false; slices * paths];
        for i in 0..slices {
            for j in 0..paths {
                free[i * paths + j] = instance.max_demand(i, j) > instance.min_rate(i, j);
            }
        }

        let mut keys: Vec<(usize, usize)> = Vec::new();
        let mut constraints: Vec<Vec<(usize, f64)>> = Vec::new();
        for j in 0..paths {
            for load in topology.path_loads(j) {
                let key = (load.node, load.direction as usize);
                let idx = match keys.iter().position(|&k| k == key) {
                    Some(idx) => idx,
                    None => {
                        keys.push(key);
                        constraints.push(Vec::new());
                        keys.len() - 1
                    }
                };
                constraints[idx].push((j, 1.0 / load.capacity_mbps));
            }
        }
        let mut path_terms = vec![Vec::new(); paths];
        for (c, terms) in constraints.iter().enumerate() {
            for &(j, inv_cap) in terms {
                path_terms[j].push((c, inv_cap));
            }
        }
        AscentProblem {
            topology,
            instance,
            params,
            free,
            constraints,
            path_terms,
        }
    }

    fn path_totals(&self, rates: &[f64]) -> Vec<f64> {
        let paths = self.topology.path_count();
        let mut totals = vec![0.0; paths];
        for (f, &r) in rates.iter().enumerate() {
            totals[f % paths] += r;
        }
        totals
    }

    fn slacks(&self, rates: &[f64]) -> Vec<f64> {
        let totals = self.path_totals(rates);
        self.constraints
            .iter()
            .map(|terms| {
                1.0 - terms
                    .iter()
                    .map(|&(j, inv_cap)| totals[j] * inv_cap)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Barrier objective `U(r) + w * sum(log slack)`. Returns `None`
    /// outside the strictly feasible domain.
    fn objective(&self, rates: &[f64], weight: f64) -> Result<Option<(f64, f64)>, SolveError> {
        let paths = self.topology.path_count();
        let mut utility_total = 0.0;
        let mut barrier = 0.0;
        for (f, &r) in rates.iter().enumerate() {
            let (i, j) = (f / paths, f % paths);
            utility_total += utility::flow_utility(self.params.spec(i), r)?;
            if self.free[f] {
                let lo = r - self.instance.min_rate(i, j);
                let hi = self.instance.max_demand(i, j) - r;
                if lo <= 0.0 || hi <= 0.0 {
                    return Ok(None);
                }
                barrier += libm_ln(lo) + libm_ln(hi);
            }
        }
        for slack in self.slacks(rates) {
            if slack <= 0.0 {
                return Ok(None);
            }
            barrier += libm_ln(slack);
        }
        let phi = utility_total + weight * barrier;
        if !phi.is_finite() {
            return Ok(None);
        }
        Ok(Some((phi, utility_total)))
    }

    /// Gradient of the barrier objective over free flows (zero on fixed
    /// ones). Assumes `rates` is strictly interior. The ascent itself
    /// uses [`Self::gradient_and_hessian`]; this entry point backs the
    /// finite-difference invariant checks.
    #[cfg(test)]
    fn gradient(&self, rates: &[f64], weight: f64, grad: &mut [f64]) -> Result<(), SolveError> {
        let paths = self.topology.path_count();
        let slacks = self.slacks(rates);
        for (f, &r) in rates.iter().enumerate() {
            if !self.free[f] {
                grad[f] = 0.0;
                continue;
            }
            let (i, j) = (f / paths, f % paths);
            let mut g = utility::flow_utility_slope(self.params.spec(i), r)?;
            g += weight
                * (1.0 / (r - self.instance.min_rate(i, j))
                    - 1.0 / (self.instance.max_demand(i, j) - r));
            for &(c, inv_cap) in &self.path_terms[j] {
                g -= weight * inv_cap / slacks[c];
            }
            grad[f] = g;
        }
        Ok(())
    }

    /// Gradient plus the Hessian of the negated barrier objective
    /// (positive semidefinite once the non-concave part of the utility
    /// curvature is clipped). The time-constraint barrier contributes
    /// rank-one blocks that couple flows sharing a constraint; solving
    /// against the full matrix is what lets iterates slide along a
    /// binding constraint instead of creeping.
    fn gradient_and_hessian(
        &self,
        rates: &[f64],
        weight: f64,
        grad: &mut [f64],
        hessian: &mut [f64],
    ) -> Result<(), SolveError> {
        let paths = self.topology.path_count();
        let flows = rates.len();
        let slacks = self.slacks(rates);
        hessian.fill(0.0);
        for (f, &r) in rates.iter().enumerate() {
            if !self.free[f] {
                grad[f] = 0.0;
                hessian[f * flows + f] = 1.0;
                continue;
            }
            let (i, j) = (f / paths, f % paths);
            let spec = self.params.spec(i);
            let lo = r - self.instance.min_rate(i, j);
            let hi = self.instance.max_demand(i, j) - r;
            let mut g = utility::flow_utility_slope(spec, r)?;
            g += weight * (1.0 / lo - 1.0 / hi);
            for &(c, inv_cap) in &self.path_terms[j] {
                g -= weight * inv_cap / slacks[c];
            }
            grad[f] = g;
            hessian[f * flows + f] = weight * (1.0 / (lo * lo) + 1.0 / (hi * hi))
                + (-utility::flow_utility_curvature(spec, r)?).max(0.0)
                + 1e-12;
        }
        // Rank-one slack terms: (weight / s^2) * a a^T with a the
        // per-flow inverse capacities of the constraint.
        for (c, terms) in self.constraints.iter().enumerate() {
            let coeff = weight / (slacks[c] * slacks[c]);
            for &(ja, inv_a) in terms {
                for &(jb, inv_b) in terms {
                    for ia in 0..self.topology.slice_count() {
                        let fa = ia * paths + ja;
                        if !self.free[fa] {
                            continue;
                        }
                        for ib in 0..self.topology.slice_count() {
                            let fb = ib * paths + jb;
                            if self.free[fb] {
                                hessian[fa * flows + fb] += coeff * inv_a * inv_b;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Clamps a feasible point strictly inside the box and scales it
    /// towards the minimum rates until every time constraint has slack.
    fn interiorize(&self, rates: &[f64]) -> Option<Vec<f64>> {
        let paths = self.topology.path_count();
        let mut interior: Vec<f64> = rates.to_vec();
        for (f, r) in interior.iter_mut().enumerate() {
            let (i, j) = (f / paths, f % paths);
            let lo = self.instance.min_rate(i, j);
            let hi = self.instance.max_demand(i, j);
            if self.free[f] {
                let margin = INTERIOR_MARGIN * (hi - lo);
                *r = r.clamp(lo + margin, hi - margin);
            } else {
                *r = lo;
            }
        }
        let base: Vec<f64> = (0..interior.len())
            .map(|f| self.instance.min_rate(f / paths, f % paths))
            .collect();
        let slacks_interior = self.slacks(&interior);
        let slacks_base = self.slacks(&base);
        let mut scale = 1.0f64;
        for (s_int, s_base) in slacks_interior.iter().zip(&slacks_base) {
            if *s_int >= TIME_MARGIN {
                continue;
            }
            // Usage is affine along the segment towards the minimum
            // rates; pick the scale that restores the margin.
            let diff = s_base - s_int;
            if diff <= 0.0 || *s_base < TIME_MARGIN {
                return None;
            }
            scale = scale.min((s_base - TIME_MARGIN) / diff);
        }
        if scale < 1.0 {
            if scale < 0.0 {
                return None;
            }
            for (f, r) in interior.iter_mut().enumerate() {
                *r = base[f] + scale * (*r - base[f]);
            }
        }
        Some(interior)
    }
}

fn libm_ln(x: f64) -> f64 {
    libm::log(x)
}

/// Cholesky solve of a small SPD system; returns `None` if a pivot
/// collapses.
fn cholesky_solve(matrix: &[f64], rhs: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = matrix.to_vec();
    for k in 0..n {
        let mut d = m[k * n + k];
        for p in 0..k {
            d -= m[k * n + p] * m[k * n + p];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = libm::sqrt(d);
        m[k * n + k] = d;
        for r in (k + 1)..n {
            let mut v = m[r * n + k];
            for p in 0..k {
                v -= m[r * n + p] * m[k * n + p];
            }
            m[r * n + k] = v / d;
        }
    }
    let mut x = rhs.to_vec();
    for r in 0..n {
        let mut v = x[r];
        for p in 0..r {
            v -= m[r * n + p] * x[p];
        }
        x[r] = v / m[r * n + r];
    }
    for r in (0..n).rev() {
        let mut v = x[r];
        for p in (r + 1)..n {
            v -= m[p * n + r] * x[p];
        }
        x[r] = v / m[r * n + r];
    }
    Some(x)
}

/// Gradient ascent with backtracking line search on the log-barrier
/// objective, over the decreasing barrier weight schedule. Returns the
/// best-utility feasible iterate seen, which is never worse than a
/// feasible start.
pub fn local_ascent(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
    start: &RateAllocation,
    options: &GsOptions,
) -> Result<RateAllocation, SolveError> {
    local_ascent_traced(topology, instance, params, start, options, None)
}

pub(crate) fn local_ascent_traced(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
    start: &RateAllocation,
    options: &GsOptions,
    mut trace: Option<&mut Vec<(usize, f64)>>,
) -> Result<RateAllocation, SolveError> {
    options.validate()?;
    if !instance.matches(topology)
        || !start.matches(topology)
        || params.slice_count() != topology.slice_count()
    {
        return Err(SolveError::DimensionMismatch);
    }
    let problem = AscentProblem::new(topology, instance, params);

    // Track the best feasible point in plain utility; seed it with the
    // start itself when the start is already feasible.
    let mut best: Option<(f64, Vec<f64>)> = None;
    if check_feasible(topology, instance, start)
        .map(|r| r.is_feasible())
        .unwrap_or(false)
    {
        let u = utility::total_utility(params, start)?;
        best = Some((u, start.rates().to_vec()));
    }

    if problem.free.iter().all(|&f| !f) {
        // Every coordinate pinned: the minimum allocation is the only
        // candidate.
        let rates = instance.min_rates().to_vec();
        let alloc = RateAllocation::new(
            topology.slice_count(),
            topology.path_count(),
            rates,
        )
        .expect("minimum rates are valid");
        return Ok(alloc);
    }

    let Some(mut rates) = problem.interiorize(start.rates()) else {
        return match best {
            Some((_, rates)) => Ok(RateAllocation::new(
                topology.slice_count(),
                topology.path_count(),
                rates,
            )
            .expect("feasible rates are valid")),
            None => Err(SolveError::InvalidArgument {
                what: "start cannot be moved strictly inside the feasible region",
            }),
        };
    };

    let start_utility = match problem.objective(&rates, 1.0)? {
        Some((_, u)) => u,
        None => return Err(SolveError::NonFiniteObjective),
    };
    if !start_utility.is_finite() {
        return Err(SolveError::NonFiniteObjective);
    }
    let scale = start_utility.abs().max(1.0);

    let flows = rates.len();
    let mut gradient = vec![0.0; flows];
    let mut hessian = vec![0.0; flows * flows];
    let mut candidate = vec![0.0; flows];
    let mut widest_box = 0.0f64;
    for f in 0..flows {
        let (i, j) = (f / topology.path_count(), f % topology.path_count());
        widest_box = widest_box.max(instance.max_demand(i, j) - instance.min_rate(i, j));
    }

    for (stage, &base_weight) in options.barrier_weights.iter().enumerate() {
        let weight = base_weight * scale;
        let Some((mut phi, mut u)) = problem.objective(&rates, weight)? else {
            return Err(SolveError::NonFiniteObjective);
        };
        if best.as_ref().map_or(true, |(bu, _)| u > *bu) {
            best = Some((u, rates.clone()));
        }

        let mut stall = 0u32;
        for _iter in 0..options.max_ascent_iters {
            problem.gradient_and_hessian(&rates, weight, &mut gradient, &mut hessian)?;
            // Damped Newton direction on the barrier objective; fall
            // back to the raw gradient if the factorisation collapses.
            let direction = match cholesky_solve(&hessian, &gradient, flows) {
                Some(p) => p,
                None => {
                    let max_diag = (0..flows)
                        .map(|f| hessian[f * flows + f])
                        .fold(1e-12, f64::max);
                    for f in 0..flows {
                        hessian[f * flows + f] += 1e-8 * max_diag;
                    }
                    match cholesky_solve(&hessian, &gradient, flows) {
                        Some(p) => p,
                        None => gradient.clone(),
                    }
                }
            };
            let dd: f64 = gradient.iter().zip(&direction).map(|(g, p)| g * p).sum();
            if !dd.is_finite() {
                return Err(SolveError::NonFiniteObjective);
            }
            if dd < 1e-18 {
                break;
            }

            // Backtracking line search from the Newton unit step,
            // capped so no coordinate moves more than half the widest
            // box edge.
            let p_inf = direction.iter().fold(0.0f64, |m, p| m.max(p.abs()));
            let mut step = (0.5 * widest_box / p_inf).min(1.0).max(1e-14);
            let mut accepted = false;
            for _ in 0..60 {
                for f in 0..flows {
                    candidate[f] = rates[f] + step * direction[f];
                }
                if let Some((phi_new, u_new)) = problem.objective(&candidate, weight)? {
                    // Strict progress required: a numerically flat move
                    // means this stage has converged.
                    if phi_new >= phi + ARMIJO_SLOPE * step * dd && phi_new > phi {
                        let improved = phi_new - phi;
                        rates.copy_from_slice(&candidate);
                        phi = phi_new;
                        u = u_new;
                        accepted = true;
                        if let Some(trace) = trace.as_deref_mut() {
                            trace.push((stage, phi));
                        }
                        if best.as_ref().map_or(true, |(bu, _)| u > *bu) {
                            best = Some((u, rates.clone()));
                        }
                        if improved <= options.tol {
                            stall += 1;
                        } else {
                            stall = 0;
                        }
                        break;
                    }
                }
                step *= BACKTRACK;
            }
            if !accepted || stall >= 3 {
                break;
            }
        }
    }

    let (_, rates) = best.expect("interior iterate recorded");
    Ok(
        RateAllocation::new(topology.slice_count(), topology.path_count(), rates)
            .expect("ascent iterates are valid rates"),
    )
}

/// Multistart solve: uniform box samples repaired into the polytope,
/// plus the greedy solution, each improved by [`local_ascent`]; the
/// best local maximum wins. Deterministic in the seed, with ties broken
/// towards the earliest candidate (greedy first).
pub fn multistart_solve(
    topology: &Topology,
    instance: &DemandInstance,
    params: &UtilityParams,
    options: &GsOptions,
) -> Result<RateAllocation, SolveError> {
    options.validate()?;
    let greedy = greedy_solve(topology, instance, params, 1.0)?;

    let slices = topology.slice_count();
    let paths = topology.path_count();
    let mut candidates: Vec<RateAllocation> = Vec::with_capacity(options.n_starts + 2);
    candidates.push(greedy.clone());
    if let Ok(from_greedy) = local_ascent(topology, instance, params, &greedy, options) {
        candidates.push(from_greedy);
    }

    for s in 0..options.n_starts {
        let mut rng = SplitMix64::new(mix(options.seed, s as u64 + 1));
        let mut rates = Vec::with_capacity(slices * paths);
        for i in 0..slices {
            for j in 0..paths {
                rates.push(rng.next_range(instance.min_rate(i, j), instance.max_demand(i, j)));
            }
        }
        let raw = RateAllocation::new(slices, paths, rates).expect("box samples are valid");
        let Ok(projected) = repair(topology, instance, params, &raw) else {
            continue;
        };
        if let Ok(improved) = local_ascent(topology, instance, params, &projected, options) {
            candidates.push(improved);
        }
    }

    let mut best_idx = 0;
    let mut best_utility = f64::NEG_INFINITY;
    for (idx, candidate) in candidates.iter().enumerate() {
        let u = utility::total_utility(params, candidate)?;
        if u > best_utility {
            best_utility = u;
            best_idx = idx;
        }
    }
    Ok(candidates.swap_remove(best_idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::brute_force_solve;
    use crate::model::{builtin_topology, Link};
    use crate::utility::{total_utility, UtilityKind, UtilitySpec};

    fn one_link_two_flows() -> (Topology, DemandInstance, UtilityParams) {
        let topology = Topology::new(
            "one-link",
            2,
            vec![Link {
                src: 0,
                dst: 1,
                capacity_mbps: 1000.0,
            }],
            vec![vec![0, 1]],
            2,
        )
        .unwrap();
        let instance = DemandInstance::new(2, 1, vec![0.0, 0.0], vec![1000.0, 400.0]).unwrap();
        let params = UtilityParams::new(vec![
            UtilitySpec::new(UtilityKind::Linear, 0.00133, 0.0).unwrap(),
            UtilitySpec::new(UtilityKind::Sigmoid, 0.08, 350.0).unwrap(),
        ])
        .unwrap();
        (topology, instance, params)
    }

    fn concave_two_flows() -> (Topology, DemandInstance, UtilityParams) {
        let topology = Topology::new(
            "concave",
            3,
            vec![
                Link {
                    src: 0,
                    dst: 1,
                    capacity_mbps: 1000.0,
                },
                Link {
                    src: 1,
                    dst: 2,
                    capacity_mbps: 800.0,
                },
            ],
            vec![vec![0, 1, 2]],
            2,
        )
        .unwrap();
        let instance = DemandInstance::new(2, 1, vec![0.0, 10.0], vec![700.0, 600.0]).unwrap();
        let params = UtilityParams::new(vec![
            UtilitySpec::new(UtilityKind::Logarithmic, 0.00229, 1.0).unwrap(),
            UtilitySpec::new(UtilityKind::Logarithmic, 0.01, 1.0).unwrap(),
        ])
        .unwrap();
        (topology, instance, params)
    }

    #[test]
    fn concave_instance_matches_brute_force() {
        let (topology, instance, params) = concave_two_flows();
        let brute = brute_force_solve(&topology, &instance, &params, 1.0).unwrap();
        let brute_utility = total_utility(&params, &brute).unwrap();

        let mid = RateAllocation::new(2, 1, vec![350.0, 300.0]).unwrap();
        let options = GsOptions::with_seed(1);
        let out = local_ascent(&topology, &instance, &params, &mid, &options).unwrap();
        let out_utility = total_utility(&params, &out).unwrap();
        assert!(
            out_utility >= brute_utility * (1.0 - 0.005),
            "ascent {out_utility} vs brute {brute_utility}"
        );
    }

    #[test]
    fn ascent_from_optimum_stays_put() {
        let (topology, instance, params) = one_link_two_flows();
        let optimum = RateAllocation::new(2, 1, vec![600.0, 400.0]).unwrap();
        let u_opt = total_utility(&params, &optimum).unwrap();
        let options = GsOptions::with_seed(2);
        let out = local_ascent(&topology, &instance, &params, &optimum, &options).unwrap();
        let u_out = total_utility(&params, &out).unwrap();
        assert!(u_out >= u_opt - options.tol, "{u_out} vs {u_opt}");
    }

    #[test]
    fn ascent_converges_to_the_sigmoid_optimum_nearby() {
        let (topology, instance, params) = one_link_two_flows();
        let start = RateAllocation::new(2, 1, vec![590.0, 395.0]).unwrap();
        let options = GsOptions::with_seed(3);
        let out = local_ascent(&topology, &instance, &params, &start, &options).unwrap();
        let u_out = total_utility(&params, &out).unwrap();
        // Continuous optimum is exactly (600, 400).
        assert!(u_out >= 1.7800137900379085 - 1e-3, "got {u_out}");
        assert!((out.rate(1, 0) - 400.0).abs() < 5.0, "sigmoid at {}", out.rate(1, 0));
    }

    #[test]
    fn objective_monotone_within_each_stage() {
        let (topology, instance, params) = one_link_two_flows();
        let start = RateAllocation::new(2, 1, vec![100.0, 100.0]).unwrap();
        let options = GsOptions::with_seed(4);
        let mut trace = Vec::new();
        local_ascent_traced(&topology, &instance, &params, &start, &options, Some(&mut trace))
            .unwrap();
        assert!(!trace.is_empty());
        for pair in trace.windows(2) {
            if pair[0].0 == pair[1].0 {
                assert!(
                    pair[1].1 >= pair[0].1,
                    "objective decreased within stage {}: {} -> {}",
                    pair[0].0,
                    pair[0].1,
                    pair[1].1
                );
            }
        }
    }

    #[test]
    fn barrier_gradient_matches_finite_differences() {
        let topology = builtin_topology(1).unwrap();
        let params = UtilityParams::default_four_slices();
        let mut rng = SplitMix64::new(55);
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for _ in 0..12 {
            let d = 300.0 + 50.0 * rng.next_below(8) as f64;
            lo.push(rng.next_below(51) as f64);
            hi.push(d);
        }
        let instance = DemandInstance::new(4, 3, lo, hi).unwrap();
        let problem = AscentProblem::new(&topology, &instance, &params);
        let weight = 0.37;
        let h = 1e-4;

        let base: Vec<f64> = instance.min_rates().to_vec();
        let base_slacks = problem.slacks(&base);
        let mut checked = 0;
        for _ in 0..100 {
            // Draw a box point and pull it towards the minimum rates
            // until every time constraint has comfortable slack, so the
            // finite-difference stencil stays strictly interior.
            let mut rates = Vec::with_capacity(12);
            for f in 0..12 {
                let (i, j) = (f / 3, f % 3);
                let lo = instance.min_rate(i, j);
                let hi = instance.max_demand(i, j);
                rates.push(lo + (hi - lo) * rng.next_range(0.2, 0.8));
            }
            let point_slacks = problem.slacks(&rates);
            let mut scale = 1.0f64;
            for (sp, sb) in point_slacks.iter().zip(&base_slacks) {
                if *sp < 0.05 {
                    scale = scale.min((sb - 0.05) / (sb - sp));
                }
            }
            assert!(scale > 0.0);
            for (r, b) in rates.iter_mut().zip(&base) {
                *r = b + scale * (*r - b);
            }

            let mut analytic = vec![0.0; 12];
            problem.gradient(&rates, weight, &mut analytic).unwrap();
            for f in 0..12 {
                let mut plus = rates.clone();
                plus[f] += h;
                let mut minus = rates.clone();
                minus[f] -= h;
                let (phi_plus, _) = problem.objective(&plus, weight).unwrap().unwrap();
                let (phi_minus, _) = problem.objective(&minus, weight).unwrap().unwrap();
                let numeric = (phi_plus - phi_minus) / (2.0 * h);
                let scale = analytic[f].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic[f] - numeric).abs() / scale < 1e-5,
                    "flow {f}: analytic {} vs numeric {numeric}",
                    analytic[f]
                );
            }
            checked += 1;
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn multistart_dominates_greedy() {
        let (topology, instance, params) = one_link_two_flows();
        let greedy = greedy_solve(&topology, &instance, &params, 1.0).unwrap();
        let greedy_utility = total_utility(&params, &greedy).unwrap();
        let options = GsOptions {
            n_starts: 1,
            seed: 9,
            ..GsOptions::default()
        };
        let gs = multistart_solve(&topology, &instance, &params, &options).unwrap();
        let gs_utility = total_utility(&params, &gs).unwrap();
        assert!(gs_utility >= greedy_utility);
    }

    #[test]
    fn multistart_finds_the_sigmoid_jump() {
        let (topology, instance, params) = one_link_two_flows();
        let options = GsOptions {
            n_starts: 20,
            seed: 10,
            ..GsOptions::default()
        };
        let gs = multistart_solve(&topology, &instance, &params, &options).unwrap();
        let gs_utility = total_utility(&params, &gs).unwrap();

        let upper = brute_force_solve(&topology, &instance, &params, 1.0).unwrap();
        let upper_utility = total_utility(&params, &upper).unwrap();
        let lower = brute_force_solve(&topology, &instance, &params, 10.0).unwrap();
        let lower_utility = total_utility(&params, &lower).unwrap();
        assert!(
            gs_utility >= lower_utility * (1.0 - 0.001),
            "gs {gs_utility} vs grid-10 brute {lower_utility}"
        );
        assert!(
            gs_utility <= upper_utility * (1.0 + 0.001),
            "gs {gs_utility} vs grid-1 brute {upper_utility}"
        );
    }

    #[test]
    fn multistart_deterministic_in_seed() {
        let (topology, instance, params) = one_link_two_flows();
        let options = GsOptions {
            n_starts: 5,
            seed: 77,
            ..GsOptions::default()
        };
        let a = multistart_solve(&topology, &instance, &params, &options).unwrap();
        let b = multistart_solve(&topology, &instance, &params, &options).unwrap();
        assert_eq!(a.rates(), b.rates());
    }

    #[test]
    fn multistart_output_feasible() {
        let topology = builtin_topology(1).unwrap();
        let params = UtilityParams::default_four_slices();
        let mut rng = SplitMix64::new(21);
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for _ in 0..12 {
            let d = 50.0 * rng.next_below(16) as f64;
            lo.push((rng.next_below(101) as f64).min(d));
            hi.push(d);
        }
        let instance = DemandInstance::new(4, 3, lo, hi).unwrap();
        let options = GsOptions {
            n_starts: 4,
            seed: 31,
            ..GsOptions::default()
        };
        let gs = multistart_solve(&topology, &instance, &params, &options).unwrap();
        let report = check_feasible(&topology, &instance, &gs).unwrap();
        assert!(report.is_feasible());
    }

    #[test]
    fn invalid_options_rejected() {
        let (topology, instance, params) = one_link_two_flows();
        let mut options = GsOptions::default();
        options.n_starts = 0;
        assert!(matches!(
            multistart_solve(&topology, &instance, &params, &options),
            Err(SolveError::InvalidArgument { .. })
        ));
        let mut options = GsOptions::default();
        options.barrier_weights.clear();
        assert!(local_ascent(
            &topology,
            &instance,
            &params,
            &instance.min_allocation(),
            &options
        )
        .is_err());
    }

    #[test]
    fn infeasible_min_rates_propagate() {
        let (topology, _, params) = one_link_two_flows();
        let instance = DemandInstance::new(2, 1, vec![900.0, 900.0], vec![950.0, 950.0]).unwrap();
        assert!(matches!(
            multistart_solve(&topology, &instance, &params, &GsOptions::with_seed(1)),
            Err(SolveError::InfeasibleMinRates)
        ));
    }
}

