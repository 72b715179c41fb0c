//! The scope-bounded traversal optimizer, with healing and stitching.
//!
//! A single optimization thread starts from a *seed* variable, extracts the
//! unoptimized neighborhood within the scope radius, builds the restricted
//! objective containing exactly the components that are decidable from the
//! neighborhood plus already-committed values, solves it with the inner
//! solver, commits the result, and traverses to the next center — repeating
//! until every variable is assigned exactly once. Multiple threads run from
//! different seeds in parallel and the configuration with the lowest total
//! predicted error wins.
//!
//! The scope parameter interpolates between purely local optimization
//! (scope 1: one variable at a time) and a single global solve (scope
//! `Global`). Traversal candidates come from the configured rule — adjacent
//! variables, variables within two hops, or an annular ring whose radius
//! matches the scope so consecutive neighborhoods tile the processor — and
//! the frontier heuristic decides which candidate goes next.
//!
//! [`heal`] re-optimizes a target set in place, touching nothing outside
//! the targets' closure; [`stitch`] optimizes disjoint regions in parallel
//! with cross-region couplings severed, then heals the seam variables
//! against the full model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{BenchmarkPrediction, Bounds, Estimator};
use crate::genmodel::splitmix64;
use crate::topology::{GateVar, GateVariableGraph, ProcessorGraph, QubitId, VarId};

// ====================== Parameters ======================

/// Neighborhood radius of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Jointly optimize the unoptimized variables within this hop radius of
    /// the center (radius ≥ 1; 1 is the local limit).
    Bounded(u32),
    /// One solve over everything: the global limit.
    Global,
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Bounded(s) => write!(f, "{s}"),
            Scope::Global => write!(f, "global"),
        }
    }
}

/// Where the next traversal candidates come from after a step at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraversalRule {
    /// Variables adjacent to the center.
    Nearest,
    /// Variables within two hops of the center.
    NextNearest,
    /// Variables in an annular ring at the scope radius, so each new
    /// neighborhood lands just beyond the region already committed. The
    /// only rule that keeps up with scopes above 3.
    Ring,
}

/// How the frontier picks the next center among queued candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraversalHeuristic {
    /// First in, first out: breadth-first sweep.
    Breadth,
    /// Last in, first out: depth-first plunge.
    Depth,
    /// Uniformly random pick, seeded.
    Random,
}

/// Which variables start optimization threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStrategy {
    /// One thread per variable.
    AllSeeds,
    /// A seeded random subset of this many distinct variables.
    RandomSubset(usize),
}

/// Inner-loop solver for one neighborhood sub-problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Exact search over the frequency grid (anchored at each variable's
    /// upper bound, descending by `step`). Exponential in dimension.
    ExhaustiveGrid { step: f64 },
    /// Differential evolution on the same grid within an evaluation
    /// budget, followed by one budget-counted coordinate-descent polish
    /// sweep.
    StochasticGlobal { step: f64, budget: usize },
    /// Exhaustive below 3 dimensions; at 3 and above, seeded multi-start
    /// coordinate descent run until no axis moves — exact where exact is
    /// affordable, converged conditional line scans elsewhere. The budget
    /// scales the random probe phase that picks the descent start.
    Auto { step: f64, budget: usize },
}

impl InnerSolver {
    pub fn step(&self) -> f64 {
        match *self {
            InnerSolver::ExhaustiveGrid { step }
            | InnerSolver::StochasticGlobal { step, .. }
            | InnerSolver::Auto { step, .. } => step,
        }
    }
}

/// Default operating-frequency grid pitch (GHz): 2 MHz.
pub const DEFAULT_GRID_STEP: f64 = 0.002;

/// Full parameterization of one optimizer run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnakeParams {
    pub scope: Scope,
    pub rule: TraversalRule,
    pub heuristic: TraversalHeuristic,
    pub seeds: SeedStrategy,
    pub solver: InnerSolver,
    /// Root seed for every stochastic choice (frontier shuffles, inner
    /// solver populations, seed subsets).
    pub seed: u64,
}

impl Default for SnakeParams {
    fn default() -> Self {
        SnakeParams {
            scope: Scope::Bounded(2),
            rule: TraversalRule::NextNearest,
            heuristic: TraversalHeuristic::Breadth,
            seeds: SeedStrategy::AllSeeds,
            solver: InnerSolver::Auto {
                step: DEFAULT_GRID_STEP,
                budget: 3000,
            },
            seed: 0,
        }
    }
}

impl SnakeParams {
    pub fn validate(&self) -> Result<()> {
        match self.scope {
            Scope::Bounded(0) => {
                return Err(Error::optimizer("scope must be at least 1"));
            }
            Scope::Bounded(s) if s > 3 && self.rule != TraversalRule::Ring => {
                return Err(Error::optimizer(format!(
                    "scope {s} needs the ring traversal rule: nearest and \
                     next-nearest candidates fall inside the optimized patch"
                )));
            }
            Scope::Global if self.rule != TraversalRule::Ring => {
                return Err(Error::optimizer(
                    "global scope needs the ring traversal rule",
                ));
            }
            _ => {}
        }
        if let SeedStrategy::RandomSubset(n) = self.seeds {
            if n == 0 {
                return Err(Error::optimizer("seed subset must be nonempty"));
            }
        }
        let (step, budget) = match self.solver {
            InnerSolver::ExhaustiveGrid { step } => (step, 1),
            InnerSolver::StochasticGlobal { step, budget }
            | InnerSolver::Auto { step, budget } => (step, budget),
        };
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::optimizer("solver grid step must be positive"));
        }
        if budget == 0 {
            return Err(Error::optimizer("solver budget must be positive"));
        }
        Ok(())
    }
}

// ====================== Neighborhood and restricted objective ======================

/// Unoptimized, eligible variables within the scope radius of `center`
/// (hop distance < S on the gate-variable incidence graph), sorted.
pub fn neighborhood(
    graph: &GateVariableGraph,
    center: VarId,
    scope: Scope,
    optimized: &[bool],
    eligible: &[bool],
) -> Vec<VarId> {
    match scope {
        Scope::Bounded(s) => graph
            .ball(center, s)
            .into_iter()
            .filter(|v| eligible[v.0] && !optimized[v.0])
            .collect(),
        Scope::Global => (0..graph.len())
            .map(VarId)
            .filter(|v| eligible[v.0] && !optimized[v.0])
            .collect(),
    }
}

/// The restricted objective over a free set: exactly the components whose
/// dependencies are decidable (free or already committed), with committed
/// values entering as constants through the shared scratch configuration.
#[derive(Debug, Clone)]
pub struct SnakeEstimator {
    free: Vec<VarId>,
    comps: Vec<u32>,
    avail: Vec<bool>,
}

impl SnakeEstimator {
    /// `available` must be true exactly for committed variables and the
    /// free set.
    pub fn build(est: &Estimator, free: Vec<VarId>, available: &[bool]) -> SnakeEstimator {
        let comps = est.contained_components(&free, available);
        SnakeEstimator {
            free,
            comps,
            avail: available.to_vec(),
        }
    }

    pub fn free(&self) -> &[VarId] {
        &self.free
    }

    /// The availability mask the restriction was built against: committed
    /// variables plus the free set.
    pub fn available(&self) -> &[bool] {
        &self.avail
    }

    pub fn components(&self) -> &[u32] {
        &self.comps
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Writes `trial` into the scratch configuration and evaluates the
    /// restricted objective.
    pub fn evaluate(&self, est: &Estimator, scratch: &mut [f64], trial: &[f64]) -> f64 {
        debug_assert_eq!(trial.len(), self.free.len());
        for (v, &t) in self.free.iter().zip(trial) {
            scratch[v.0] = t;
        }
        est.sum_components(&self.comps, scratch)
    }
}

// ====================== Inner solvers ======================

/// Grid for one axis: anchored at the upper bound and descending by `step`
/// until the lower bound, returned ascending. The upper bound (a qubit's
/// sweet spot for idle variables) is always representable.
pub(crate) fn axis_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    debug_assert!(hi >= lo && step > 0.0);
    let n = ((hi - lo) / step).floor() as usize;
    (0..=n).map(|k| hi - (n - k) as f64 * step).collect()
}

/// Snaps `x` onto the hi-anchored grid, clamped into the bounds.
fn snap(lo: f64, hi: f64, step: f64, x: f64) -> f64 {
    let n = ((hi - lo) / step).floor();
    let k = ((hi - x) / step).round().clamp(0.0, n);
    hi - k * step
}

/// Result of one neighborhood solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    /// One value per free variable, aligned with the free set.
    pub values: Vec<f64>,
    /// Restricted-objective value at the solution.
    pub value: f64,
    /// Objective evaluations spent.
    pub evals: usize,
}

/// Cap on exhaustive-grid combinations; beyond this the solve would not
/// finish in reasonable time and the stochastic solver is the right tool.
const MAX_EXHAUSTIVE_COMBINATIONS: u128 = 20_000_000;

fn solve_exhaustive(
    est: &Estimator,
    sub: &SnakeEstimator,
    bounds: &Bounds,
    scratch: &mut [f64],
    step: f64,
) -> Result<InnerSolution> {
    let grids: Vec<Vec<f64>> = sub
        .free()
        .iter()
        .map(|&v| axis_grid(bounds.lo[v.0], bounds.hi[v.0], step))
        .collect();
    let combos = grids.iter().map(|g| g.len() as u128).product::<u128>();
    if combos > MAX_EXHAUSTIVE_COMBINATIONS {
        return Err(Error::optimizer(format!(
            "exhaustive solve over {combos} grid combinations is infeasible; \
             use the stochastic solver for {}-dimensional neighborhoods",
            sub.dim()
        )));
    }
    let dim = sub.dim();
    let mut idx = vec![0usize; dim];
    let mut trial: Vec<f64> = grids.iter().map(|g| g[0]).collect();
    let mut best = InnerSolution {
        values: trial.clone(),
        value: f64::INFINITY,
        evals: 0,
    };
    loop {
        let value = sub.evaluate(est, scratch, &trial);
        best.evals += 1;
        // Strict improvement plus ascending enumeration keeps the lowest
        // frequencies among exact ties.
        if value < best.value {
            best.value = value;
            best.values.copy_from_slice(&trial);
        }
        // Odometer increment, least-significant axis last so enumeration
        // order is lexicographic ascending.
        let mut axis = dim;
        loop {
            if axis == 0 {
                best.values_into(scratch, sub);
                return Ok(best);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < grids[axis].len() {
                trial[axis] = grids[axis][idx[axis]];
                break;
            }
            idx[axis] = 0;
            trial[axis] = grids[axis][0];
        }
    }
}

impl InnerSolution {
    /// Writes the solution back into the scratch configuration.
    fn values_into(&self, scratch: &mut [f64], sub: &SnakeEstimator) {
        for (v, &x) in sub.free().iter().zip(&self.values) {
            scratch[v.0] = x;
        }
    }
}

/// Exact line scans over the free axes, starting from `current` whose
/// objective is `value`: each axis in turn is pinned at its best grid
/// point conditioned on all the others (ascending scans with strict
/// improvement settle ties on the lowest frequency), and full sweeps
/// repeat until one changes nothing or the cap is reached. Returns the
/// objective at the settled configuration.
#[allow(clippy::too_many_arguments)]
fn coordinate_sweeps(
    est: &Estimator,
    sub: &SnakeEstimator,
    bounds: &Bounds,
    scratch: &mut [f64],
    step: f64,
    current: &mut [f64],
    mut value: f64,
    evals: &mut usize,
    max_sweeps: usize,
) -> f64 {
    for _ in 0..max_sweeps {
        let mut moved = false;
        for (axis, &v) in sub.free().iter().enumerate() {
            let prev = current[axis];
            let mut best_axis = prev;
            let mut best_val = value;
            for x in axis_grid(bounds.lo[v.0], bounds.hi[v.0], step) {
                if x == prev {
                    continue;
                }
                current[axis] = x;
                let c = sub.evaluate(est, scratch, current);
                *evals += 1;
                if c < best_val {
                    best_val = c;
                    best_axis = x;
                }
            }
            current[axis] = best_axis;
            if best_axis != prev {
                value = best_val;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    value
}

/// Two-start coordinate descent for small coupled neighborhoods.
///
/// Start one is a sequential-exact fill: the free axes are placed one at
/// a time in order, each by an exact line scan over the components that
/// are decidable so far (committed context plus already-filled axes).
/// This reproduces, inside the block, what a scope-1 traversal would
/// have committed, so the joint polish departs from at-least-greedy
/// quality. Start two is the best of roughly `budget / 4` seeded random
/// probes, which can land in basins the greedy fill walks past. Both
/// starts are settled by exact line sweeps until no axis moves, and the
/// better settled configuration wins; the budget only scales the probe
/// phase, so blocks are solved near-exactly at line-scan cost.
fn solve_descent(
    est: &Estimator,
    sub: &SnakeEstimator,
    bounds: &Bounds,
    scratch: &mut [f64],
    step: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<InnerSolution> {
    let dim = sub.dim();
    let lo: Vec<f64> = sub.free().iter().map(|&v| bounds.lo[v.0]).collect();
    let hi: Vec<f64> = sub.free().iter().map(|&v| bounds.hi[v.0]).collect();
    let mut evals = 0usize;
    // The cap only guards against grid-precision limit cycles; line scans
    // revisit every axis, so descents settle in a few sweeps.
    const MAX_SWEEPS: usize = 8;

    // Sequential-exact fill. The mask starts as committed-only context and
    // grows one free axis per placement; undecidable components (those
    // touching a still-unfilled axis) stay excluded, so stale scratch
    // entries for later axes are never read.
    let mut mask = sub.available().to_vec();
    for &v in sub.free() {
        mask[v.0] = false;
    }
    let mut fill = vec![0.0; dim];
    for (k, &v) in sub.free().iter().enumerate() {
        mask[v.0] = true;
        let comps_k = est.contained_components(&[v], &mask);
        let mut best_x = f64::NAN;
        let mut best_c = f64::INFINITY;
        for x in axis_grid(bounds.lo[v.0], bounds.hi[v.0], step) {
            scratch[v.0] = x;
            let c = est.sum_components(&comps_k, scratch);
            evals += 1;
            if c < best_c {
                best_c = c;
                best_x = x;
            }
        }
        fill[k] = best_x;
        scratch[v.0] = best_x;
    }
    let fill_value = sub.evaluate(est, scratch, &fill);
    evals += 1;
    let mut best = InnerSolution {
        values: fill.clone(),
        value: fill_value,
        evals: 0,
    };

    // Random probe start.
    let n_probe = (budget / 4).max(2 * dim).min((2 * dim).max(240));
    let mut probe_best = f64::INFINITY;
    let mut probe_vals = vec![0.0; dim];
    let mut probe = vec![0.0; dim];
    for _ in 0..n_probe {
        for i in 0..dim {
            probe[i] = snap(lo[i], hi[i], step, rng.gen_range(lo[i]..=hi[i]));
        }
        let c = sub.evaluate(est, scratch, &probe);
        evals += 1;
        if c < probe_best {
            probe_best = c;
            probe_vals.copy_from_slice(&probe);
        }
    }

    for (start, start_value) in [(fill, fill_value), (probe_vals, probe_best)] {
        let mut current = start;
        let value = coordinate_sweeps(
            est, sub, bounds, scratch, step, &mut current, start_value, &mut evals, MAX_SWEEPS,
        );
        if value < best.value {
            best.value = value;
            best.values.copy_from_slice(&current);
        }
    }
    best.evals = evals;
    best.values_into(scratch, sub);
    Ok(best)
}

/// Differential evolution (rand/1/bin) over the snapped grid, followed by
/// one coordinate-descent polish sweep whose cost is reserved out of the
/// evaluation budget up front.
fn solve_stochastic(
    est: &Estimator,
    sub: &SnakeEstimator,
    bounds: &Bounds,
    scratch: &mut [f64],
    step: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<InnerSolution> {
    let dim = sub.dim();
    let lo: Vec<f64> = sub.free().iter().map(|&v| bounds.lo[v.0]).collect();
    let hi: Vec<f64> = sub.free().iter().map(|&v| bounds.hi[v.0]).collect();
    let snap_all = |x: &mut Vec<f64>| {
        for i in 0..dim {
            x[i] = snap(lo[i], hi[i], step, x[i]);
        }
    };
    let pop_size = (15 * dim).clamp(8, 60);
    let (f_weight, crossover) = (0.7, 0.9);

    let mut evals = 0usize;
    let mut pop: Vec<Vec<f64>> = (0..pop_size)
        .map(|_| {
            let mut x: Vec<f64> = (0..dim).map(|i| rng.gen_range(lo[i]..=hi[i])).collect();
            snap_all(&mut x);
            x
        })
        .collect();
    let mut cost: Vec<f64> = pop
        .iter()
        .map(|x| {
            evals += 1;
            sub.evaluate(est, scratch, x)
        })
        .collect();
    let mut best = InnerSolution {
        values: pop[0].clone(),
        value: cost[0],
        evals: 0,
    };
    for i in 1..pop_size {
        if cost[i] < best.value {
            best.value = cost[i];
            best.values = pop[i].clone();
        }
    }

    // Reserve the polish pass's evaluations out of the budget up front.
    let polish_cost: usize = sub
        .free()
        .iter()
        .map(|&v| axis_grid(bounds.lo[v.0], bounds.hi[v.0], step).len())
        .sum();
    let de_budget = budget.saturating_sub(polish_cost).max(2 * pop_size);

    let mut trial = vec![0.0; dim];
    while evals + pop_size <= de_budget {
        for i in 0..pop_size {
            let (r1, r2, r3) = distinct_three(rng, pop_size, i);
            let j_rand = rng.gen_range(0..dim);
            for j in 0..dim {
                trial[j] = if j == j_rand || rng.gen_bool(crossover) {
                    let m = pop[r1][j] + f_weight * (pop[r2][j] - pop[r3][j]);
                    snap(lo[j], hi[j], step, m.clamp(lo[j], hi[j]))
                } else {
                    pop[i][j]
                };
            }
            let c = sub.evaluate(est, scratch, &trial);
            evals += 1;
            if c < cost[i] {
                pop[i].copy_from_slice(&trial);
                cost[i] = c;
                if c < best.value {
                    best.value = c;
                    best.values.copy_from_slice(&trial);
                }
            }
        }
    }

    // One polish sweep from the best member (reserved above): sampling
    // finds the basin, a single round of exact line scans settles it.
    let mut current = best.values.clone();
    let value = coordinate_sweeps(
        est, sub, bounds, scratch, step, &mut current, best.value, &mut evals, 1,
    );
    if value < best.value {
        best.value = value;
        best.values.copy_from_slice(&current);
    }

    best.evals = evals;
    best.values_into(scratch, sub);
    Ok(best)
}

fn distinct_three(rng: &mut ChaCha8Rng, n: usize, exclude: usize) -> (usize, usize, usize) {
    debug_assert!(n >= 4);
    let mut pick = || loop {
        let r = rng.gen_range(0..n);
        if r != exclude {
            return r;
        }
    };
    let r1 = pick();
    let (mut r2, mut r3);
    loop {
        r2 = pick();
        if r2 != r1 {
            break;
        }
    }
    loop {
        r3 = pick();
        if r3 != r1 && r3 != r2 {
            break;
        }
    }
    (r1, r2, r3)
}

/// Solves one neighborhood sub-problem with the configured solver.
pub fn inner_solve(
    est: &Estimator,
    sub: &SnakeEstimator,
    bounds: &Bounds,
    scratch: &mut [f64],
    solver: InnerSolver,
    rng: &mut ChaCha8Rng,
) -> Result<InnerSolution> {
    if sub.dim() == 0 {
        return Err(Error::optimizer("empty neighborhood"));
    }
    for &v in sub.free() {
        if !(bounds.hi[v.0] >= bounds.lo[v.0]) {
            return Err(Error::optimizer(format!(
                "empty bounds for variable v{}",
                v.0
            )));
        }
    }
    match solver {
        InnerSolver::ExhaustiveGrid { step } => solve_exhaustive(est, sub, bounds, scratch, step),
        InnerSolver::StochasticGlobal { step, budget } => {
            solve_stochastic(est, sub, bounds, scratch, step, budget, rng)
        }
        InnerSolver::Auto { step, budget } => {
            if sub.dim() < 3 {
                solve_exhaustive(est, sub, bounds, scratch, step)
            } else {
                solve_descent(est, sub, bounds, scratch, step, budget, rng)
            }
        }
    }
}

// ====================== Single-thread traversal ======================

/// One committed neighborhood solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub center: VarId,
    /// The free set optimized at this step.
    pub free: Vec<VarId>,
    /// Restricted-objective value at the committed solution.
    pub value: f64,
    pub evals: usize,
    /// Wall-clock seconds; informational, excluded from determinism
    /// comparisons.
    pub wall: f64,
}

/// Outcome of one optimization thread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadOutcome {
    pub seed: VarId,
    /// Complete configuration (for region-restricted runs, only eligible
    /// variables are meaningful).
    pub values: Vec<f64>,
    /// Total objective: the full model when every variable is eligible,
    /// otherwise the eligible-internal restriction.
    pub total: f64,
    pub steps: Vec<StepRecord>,
    pub evals: usize,
    pub wall: f64,
}

/// Fixed context for one thread: preset values are committed before the
/// traversal starts and never move.
struct Preset<'a> {
    values: &'a [f64],
    committed: &'a [bool],
}

fn run_thread(
    est: &Estimator,
    bounds: &Bounds,
    params: &SnakeParams,
    seed_var: VarId,
    eligible: &[bool],
    preset: Option<&Preset>,
) -> Result<ThreadOutcome> {
    let graph = est.graph();
    let n = graph.len();
    let t0 = Instant::now();
    let mut vals = vec![f64::NAN; n];
    let mut optimized = vec![false; n];
    if let Some(p) = preset {
        for i in 0..n {
            if p.committed[i] {
                vals[i] = p.values[i];
                optimized[i] = true;
            }
        }
    }
    let mut remaining = (0..n).filter(|&i| eligible[i] && !optimized[i]).count();
    // Each thread gets an independent deterministic stream keyed by the
    // run seed and its starting variable.
    let mut rng =
        ChaCha8Rng::seed_from_u64(splitmix64(params.seed ^ splitmix64(seed_var.0 as u64 + 1)));
    let mut frontier: VecDeque<VarId> = VecDeque::new();
    let mut availability = vec![false; n];
    let mut steps = Vec::new();
    let mut total_evals = 0usize;
    let mut center = Some(seed_var);

    while remaining > 0 {
        let c = match center.take() {
            Some(c) => c,
            None => match pop_frontier(&mut frontier, params.heuristic, &mut rng) {
                Some(c) => c,
                // The frontier ran dry (disconnected patch, ring gaps):
                // jump to the smallest unoptimized eligible variable.
                None => VarId(
                    (0..n)
                        .find(|&i| eligible[i] && !optimized[i])
                        .expect("remaining > 0"),
                ),
            },
        };
        let free = neighborhood(graph, c, params.scope, &optimized, eligible);
        if free.is_empty() {
            continue; // Stale center: everything nearby is already done.
        }
        availability.copy_from_slice(&optimized);
        for &f in &free {
            availability[f.0] = true;
        }
        let sub = SnakeEstimator::build(est, free, &availability);
        let t_step = Instant::now();
        let sol = inner_solve(est, &sub, bounds, &mut vals, params.solver, &mut rng)
            .map_err(|e| Error::optimizer(format!("step {}: {e}", steps.len())))?;
        for &f in sub.free() {
            optimized[f.0] = true;
        }
        remaining -= sub.dim();
        total_evals += sol.evals;
        steps.push(StepRecord {
            step: steps.len(),
            center: c,
            free: sub.free().to_vec(),
            value: sol.value,
            evals: sol.evals,
            wall: t_step.elapsed().as_secs_f64(),
        });
        if remaining > 0 {
            push_candidates(graph, c, params, &optimized, eligible, &mut frontier);
        }
    }

    // Total objective: the full model when the thread owned every
    // variable, otherwise the restriction internal to its patch.
    let all_eligible = eligible.iter().all(|&e| e);
    let total = if all_eligible && preset.is_none() {
        est.evaluate(&vals)?
    } else {
        let free: Vec<VarId> = (0..n).filter(|&i| eligible[i]).map(VarId).collect();
        let sub = SnakeEstimator::build(est, free, &optimized);
        est.sum_components(sub.components(), &vals)
    };
    Ok(ThreadOutcome {
        seed: seed_var,
        values: vals,
        total,
        steps,
        evals: total_evals,
        wall: t0.elapsed().as_secs_f64(),
    })
}

fn pop_frontier(
    frontier: &mut VecDeque<VarId>,
    heuristic: TraversalHeuristic,
    rng: &mut ChaCha8Rng,
) -> Option<VarId> {
    match heuristic {
        TraversalHeuristic::Breadth => frontier.pop_front(),
        TraversalHeuristic::Depth => frontier.pop_back(),
        TraversalHeuristic::Random => {
            if frontier.is_empty() {
                None
            } else {
                let i = rng.gen_range(0..frontier.len());
                frontier.swap(i, 0);
                frontier.pop_front()
            }
        }
    }
}

/// Variables within `hops` steps of `center` under the adjacency relation
/// (shared qubit, or coupled idle pair), sorted; includes the center.
fn adjacent_within(graph: &GateVariableGraph, center: VarId, hops: u32) -> Vec<VarId> {
    let mut dist: BTreeMap<VarId, u32> = BTreeMap::new();
    dist.insert(center, 0);
    let mut frontier = vec![center];
    for d in 1..=hops {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in graph.adjacent(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d);
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    dist.into_keys().collect()
}

fn push_candidates(
    graph: &GateVariableGraph,
    center: VarId,
    params: &SnakeParams,
    optimized: &[bool],
    eligible: &[bool],
    frontier: &mut VecDeque<VarId>,
) {
    /// Ring width in hops: wide enough that consecutive annuli overlap and
    /// no variable is skipped between them.
    const RING_WIDTH: u32 = 2;
    let cands: Vec<VarId> = match (params.rule, params.scope) {
        // Global scope finishes in one step; candidates are moot.
        (_, Scope::Global) => Vec::new(),
        (TraversalRule::Nearest, _) => graph.adjacent(center).to_vec(),
        (TraversalRule::NextNearest, _) => adjacent_within(graph, center, 2),
        (TraversalRule::Ring, Scope::Bounded(s)) => graph.ring(center, s, RING_WIDTH),
    };
    // Candidates arrive sorted, which keeps threads deterministic. Entries
    // that get optimized while queued are skipped as stale when popped.
    for v in cands {
        if v != center && eligible[v.0] && !optimized[v.0] {
            frontier.push_back(v);
        }
    }
}

// ====================== Multi-seed optimization ======================

/// Summary of one thread for reporting without the full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: VarId,
    pub total: f64,
    pub steps: usize,
    pub evals: usize,
    pub wall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    /// Best configuration across seeds.
    pub values: Vec<f64>,
    /// Full-model objective of the best configuration.
    pub total: f64,
    pub best_seed: VarId,
    /// Trace of the winning thread.
    pub steps: Vec<StepRecord>,
    /// Per-seed summaries, in seed order.
    pub seeds: Vec<SeedOutcome>,
}

/// Enumerates the seed variables for a strategy over the eligible set.
fn seed_vars(
    graph: &GateVariableGraph,
    params: &SnakeParams,
    eligible: &[bool],
) -> Vec<VarId> {
    let pool: Vec<VarId> = (0..graph.len()).filter(|&i| eligible[i]).map(VarId).collect();
    match params.seeds {
        SeedStrategy::AllSeeds => pool,
        SeedStrategy::RandomSubset(n) => {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(params.seed ^ 0x5eed));
            let mut pool = pool;
            pool.shuffle(&mut rng);
            pool.truncate(n.min(pool.len()));
            pool.sort_unstable();
            pool
        }
    }
}

fn optimize_restricted(
    est: &Estimator,
    bounds: &Bounds,
    params: &SnakeParams,
    eligible: &[bool],
    preset: Option<&Preset>,
) -> Result<OptimizeResult> {
    params.validate()?;
    if bounds.len() != est.n_vars() {
        return Err(Error::optimizer(format!(
            "bounds cover {} variables, estimator has {}",
            bounds.len(),
            est.n_vars()
        )));
    }
    let seeds = seed_vars(est.graph(), params, eligible);
    if seeds.is_empty() {
        return Err(Error::optimizer("no eligible seed variables"));
    }
    let outcomes: Vec<ThreadOutcome> = seeds
        .par_iter()
        .map(|&s| run_thread(est, bounds, params, s, eligible, preset))
        .collect::<Result<_>>()?;
    // Lowest total wins; the earliest seed breaks exact ties.
    let best_idx = outcomes
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.total.total_cmp(&b.total))
        .map(|(i, _)| i)
        .expect("nonempty seeds");
    let summaries = outcomes
        .iter()
        .map(|o| SeedOutcome {
            seed: o.seed,
            total: o.total,
            steps: o.steps.len(),
            evals: o.evals,
            wall: o.wall,
        })
        .collect();
    let best = outcomes.into_iter().nth(best_idx).expect("index valid");
    Ok(OptimizeResult {
        values: best.values,
        total: best.total,
        best_seed: best.seed,
        steps: best.steps,
        seeds: summaries,
    })
}

/// Optimizes the full processor: one thread per seed, best total wins.
pub fn optimize(est: &Estimator, bounds: &Bounds, params: &SnakeParams) -> Result<OptimizeResult> {
    let eligible = vec![true; est.n_vars()];
    optimize_restricted(est, bounds, params, &eligible, None)
}

// ====================== Healing ======================

/// Thresholds classifying benchmark outliers for healing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HealThresholds {
    /// Per-pair cycle error at or above which the interaction is targeted.
    pub interaction: f64,
    /// Per-qubit error at or above which the idle is targeted.
    pub idle: f64,
    /// A qubit participating in at least this many outlier pairs is
    /// targeted even when its own benchmark looks fine.
    pub outlier_membership: usize,
}

impl Default for HealThresholds {
    fn default() -> Self {
        HealThresholds {
            interaction: 1.5e-2,
            idle: 1.5e-3,
            outlier_membership: 2,
        }
    }
}

/// Variables whose benchmarks mark them as outliers worth re-optimizing.
/// Returns a sorted, deduplicated set (possibly empty).
pub fn select_heal_targets(
    graph: &GateVariableGraph,
    prediction: &BenchmarkPrediction,
    thresholds: &HealThresholds,
) -> Vec<VarId> {
    let mut targets = Vec::new();
    let mut outlier_count: BTreeMap<QubitId, usize> = BTreeMap::new();
    for p in &prediction.per_pair {
        if p.cycle >= thresholds.interaction {
            if let Some(v) = graph.interaction_var(p.a, p.b) {
                targets.push(v);
            }
            *outlier_count.entry(p.a).or_default() += 1;
            *outlier_count.entry(p.b).or_default() += 1;
        }
    }
    for q in &prediction.per_qubit {
        let in_outliers = outlier_count.get(&q.qubit).copied().unwrap_or(0);
        if q.error >= thresholds.idle || in_outliers >= thresholds.outlier_membership {
            if let Some(v) = graph.idle_var(q.qubit) {
                targets.push(v);
            }
        }
    }
    targets.sort_unstable();
    targets.dedup();
    targets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealResult {
    pub values: Vec<f64>,
    /// Full-model objective after healing.
    pub total: f64,
    /// The variables that were allowed to move: the targets plus, for each
    /// idle target, its hinged interactions.
    pub closure: Vec<VarId>,
    pub steps: Vec<StepRecord>,
}

/// Computes the healing closure: each idle target drags in the interaction
/// variables hinged on it, since moving a qubit's parking spot invalidates
/// every two-qubit-gate decision it participates in.
pub fn heal_closure(graph: &GateVariableGraph, targets: &[VarId]) -> Result<Vec<VarId>> {
    if targets.is_empty() {
        return Err(Error::optimizer("healing needs at least one target"));
    }
    let mut closure = BTreeSet::new();
    for &t in targets {
        if t.0 >= graph.len() {
            return Err(Error::optimizer(format!("unknown variable v{}", t.0)));
        }
        closure.insert(t);
        if graph.is_idle(t) {
            closure.extend(graph.incident(t).iter().copied());
        }
    }
    Ok(closure.into_iter().collect())
}

/// Re-optimizes the target closure in place: everything outside it is a
/// fixed constraint and comes back bit-identical.
pub fn heal(
    est: &Estimator,
    bounds: &Bounds,
    config: &[f64],
    targets: &[VarId],
    params: &SnakeParams,
) -> Result<HealResult> {
    let graph = est.graph();
    let n = graph.len();
    if config.len() != n {
        return Err(Error::optimizer(format!(
            "configuration has {} values, graph has {n} variables",
            config.len()
        )));
    }
    let closure = heal_closure(graph, targets)?;
    let mut eligible = vec![false; n];
    for &v in &closure {
        eligible[v.0] = true;
    }
    let committed: Vec<bool> = eligible.iter().map(|e| !e).collect();
    let preset = Preset {
        values: config,
        committed: &committed,
    };
    let result = optimize_restricted(est, bounds, params, &eligible, Some(&preset))?;
    let mut values = config.to_vec();
    for &v in &closure {
        values[v.0] = result.values[v.0];
    }
    let total = est.evaluate(&values)?;
    Ok(HealResult {
        values,
        total,
        closure,
        steps: result.steps,
    })
}

// ====================== Stitching ======================

/// Partition of the variables into independently optimized regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchPlan {
    /// Disjoint variable sets covering the whole graph.
    pub regions: Vec<Vec<VarId>>,
    /// Optimizer parameters per region (same length as `regions`).
    pub region_params: Vec<SnakeParams>,
    /// Parameters for the seam-reconciliation pass.
    pub seam_params: SnakeParams,
}

impl StitchPlan {
    /// Splits by processor geometry: qubits are sorted by x-position and
    /// chunked into `r` contiguous columns; an idle variable follows its
    /// qubit and an interaction variable follows its leftmost endpoint.
    pub fn by_columns(
        processor: &ProcessorGraph,
        graph: &GateVariableGraph,
        r: usize,
        params: SnakeParams,
    ) -> Result<StitchPlan> {
        if r == 0 {
            return Err(Error::optimizer("need at least one region"));
        }
        let mut order: Vec<(i32, i32, QubitId)> = processor
            .qubits()
            .iter()
            .map(|q| (q.x, q.y, q.id))
            .collect();
        order.sort_unstable();
        let per = order.len().div_ceil(r);
        let mut region_of: BTreeMap<QubitId, usize> = BTreeMap::new();
        let mut rank: BTreeMap<QubitId, (i32, i32, QubitId)> = BTreeMap::new();
        for (i, &(x, y, q)) in order.iter().enumerate() {
            region_of.insert(q, (i / per).min(r - 1));
            rank.insert(q, (x, y, q));
        }
        let lookup = |q: QubitId| {
            region_of
                .get(&q)
                .copied()
                .ok_or_else(|| Error::optimizer(format!("qubit {q} is not in the processor")))
        };
        let mut regions = vec![Vec::new(); r];
        for i in 0..graph.len() {
            let v = VarId(i);
            let owner = match graph.var(v) {
                GateVar::Idle(q) => lookup(q)?,
                GateVar::Interaction(a, b) => lookup(if rank[&a] <= rank[&b] { a } else { b })?,
            };
            regions[owner].push(v);
        }
        regions.retain(|rg| !rg.is_empty());
        let n_regions = regions.len();
        Ok(StitchPlan {
            regions,
            region_params: vec![params; n_regions],
            seam_params: params,
        })
    }

    /// Checks the partition property: pairwise disjoint, covering all
    /// variables, with one parameter set per region.
    pub fn validate(&self, graph: &GateVariableGraph) -> Result<()> {
        if self.regions.len() != self.region_params.len() {
            return Err(Error::optimizer(format!(
                "{} regions but {} parameter sets",
                self.regions.len(),
                self.region_params.len()
            )));
        }
        let mut owner = vec![None; graph.len()];
        for (r, region) in self.regions.iter().enumerate() {
            for &v in region {
                if v.0 >= graph.len() {
                    return Err(Error::optimizer(format!("unknown variable v{}", v.0)));
                }
                if let Some(prev) = owner[v.0] {
                    return Err(Error::optimizer(format!(
                        "variable v{} appears in regions {prev} and {r}",
                        v.0
                    )));
                }
                owner[v.0] = Some(r);
            }
        }
        if let Some(i) = owner.iter().position(|o| o.is_none()) {
            return Err(Error::optimizer(format!(
                "variable v{i} is not covered by any region"
            )));
        }
        Ok(())
    }
}

/// Variables involved in any component whose dependencies span more than
/// one region — the set a stitched configuration must reconcile.
pub fn seam_variables(est: &Estimator, plan: &StitchPlan) -> Vec<VarId> {
    let mut region_of = vec![usize::MAX; est.n_vars()];
    for (r, region) in plan.regions.iter().enumerate() {
        for &v in region {
            region_of[v.0] = r;
        }
    }
    let mut seam = BTreeSet::new();
    for c in est.components() {
        let first = region_of[c.deps[0].0];
        if c.deps.iter().any(|d| region_of[d.0] != first) {
            seam.extend(c.deps.iter().copied());
        }
    }
    seam.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOutcome {
    pub region: usize,
    pub n_vars: usize,
    pub best_seed: VarId,
    /// Region-internal objective of the winning thread.
    pub total: f64,
    pub wall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchResult {
    pub values: Vec<f64>,
    /// Full-model objective of the reconciled configuration.
    pub total: f64,
    pub seam: Vec<VarId>,
    pub regions: Vec<RegionOutcome>,
}

/// Optimizes each region concurrently with cross-region components severed,
/// merges, and heals the seam variables against the full model.
pub fn stitch(est: &Estimator, bounds: &Bounds, plan: &StitchPlan) -> Result<StitchResult> {
    let graph = est.graph();
    plan.validate(graph)?;
    for p in &plan.region_params {
        p.validate()?;
    }
    plan.seam_params.validate()?;
    let results: Vec<(usize, OptimizeResult)> = plan
        .regions
        .par_iter()
        .zip(&plan.region_params)
        .enumerate()
        .map(|(r, (region, params))| {
            let mut eligible = vec![false; graph.len()];
            for &v in region {
                eligible[v.0] = true;
            }
            optimize_restricted(est, bounds, params, &eligible, None).map(|res| (r, res))
        })
        .collect::<Result<_>>()?;
    let mut values = vec![f64::NAN; graph.len()];
    let mut regions = Vec::with_capacity(results.len());
    for (r, res) in &results {
        for &v in &plan.regions[*r] {
            values[v.0] = res.values[v.0];
        }
        regions.push(RegionOutcome {
            region: *r,
            n_vars: plan.regions[*r].len(),
            best_seed: res.best_seed,
            total: res.total,
            wall: res.seeds.iter().map(|s| s.wall).fold(0.0, f64::max),
        });
    }
    let seam = seam_variables(est, plan);
    if seam.is_empty() {
        let total = est.evaluate(&values)?;
        return Ok(StitchResult {
            values,
            total,
            seam,
            regions,
        });
    }
    let healed = heal(est, bounds, &values, &seam, &plan.seam_params)?;
    Ok(StitchResult {
        values: healed.values,
        total: healed.total,
        seam,
        regions,
    })
}

// ====================== Tests ======================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{
        hard_bounds, BoundsOptions, MitigationFlags, WeightTable,
    };
    use crate::genmodel::{generate, GenerativeSpec};
    use crate::topology::{
        build_surface_code_lattice, color_cz_layers, ProcessorGraph, Qubit,
    };
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn toy(name: &str, qubits: Vec<Qubit>, couplers: Vec<(u32, u32)>, seed: u64) -> (Estimator, Bounds) {
        let g = ProcessorGraph::from_parts(name, qubits, couplers, None).unwrap();
        let spec = GenerativeSpec::new(g.clone(), seed);
        let data = generate(&spec).unwrap();
        let layers = color_cz_layers(&g).unwrap();
        let graph = Arc::new(GateVariableGraph::from_processor(&g));
        let bounds = hard_bounds(&data, &graph, &BoundsOptions::default()).unwrap();
        let est = Estimator::build(
            graph,
            Arc::new(data),
            &layers,
            MitigationFlags::all(),
            WeightTable::reference(),
        )
        .unwrap();
        (est, bounds)
    }

    fn pair_toy(seed: u64) -> (Estimator, Bounds) {
        toy(
            "pair",
            vec![Qubit { id: 0, x: 0, y: 0 }, Qubit { id: 1, x: 1, y: 0 }],
            vec![(0, 1)],
            seed,
        )
    }

    fn chain3_toy(seed: u64) -> (Estimator, Bounds) {
        toy(
            "chain3",
            vec![
                Qubit { id: 0, x: 0, y: 0 },
                Qubit { id: 1, x: 1, y: 0 },
                Qubit { id: 2, x: 2, y: 0 },
            ],
            vec![(0, 1), (1, 2)],
            seed,
        )
    }

    fn lattice(d: u32, seed: u64) -> (Estimator, Bounds) {
        let g = build_surface_code_lattice(d).unwrap();
        let spec = GenerativeSpec::new(g.clone(), seed);
        let data = generate(&spec).unwrap();
        let layers = color_cz_layers(&g).unwrap();
        let graph = Arc::new(GateVariableGraph::from_processor(&g));
        let bounds = hard_bounds(&data, &graph, &BoundsOptions::default()).unwrap();
        let est = Estimator::build(
            graph,
            Arc::new(data),
            &layers,
            MitigationFlags::all(),
            WeightTable::reference(),
        )
        .unwrap();
        (est, bounds)
    }

    fn global_exhaustive(step: f64) -> SnakeParams {
        SnakeParams {
            scope: Scope::Global,
            rule: TraversalRule::Ring,
            solver: InnerSolver::ExhaustiveGrid { step },
            ..SnakeParams::default()
        }
    }

    /// Brute-force global optimum by enumerating the full grid product.
    fn brute_force(est: &Estimator, bounds: &Bounds, step: f64) -> (Vec<f64>, f64) {
        let n = est.n_vars();
        let grids: Vec<Vec<f64>> = (0..n)
            .map(|i| axis_grid(bounds.lo[i], bounds.hi[i], step))
            .collect();
        let mut idx = vec![0usize; n];
        let mut trial: Vec<f64> = grids.iter().map(|g| g[0]).collect();
        let mut best = (trial.clone(), f64::INFINITY);
        loop {
            let e = est.evaluate(&trial).unwrap();
            if e < best.1 {
                best = (trial.clone(), e);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    return best;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < grids[axis].len() {
                    trial[axis] = grids[axis][idx[axis]];
                    break;
                }
                idx[axis] = 0;
                trial[axis] = grids[axis][0];
            }
        }
    }

    #[test]
    fn params_validation() {
        let mut p = SnakeParams::default();
        p.scope = Scope::Bounded(0);
        assert!(p.validate().is_err());
        p.scope = Scope::Bounded(4);
        p.rule = TraversalRule::NextNearest;
        assert!(p.validate().is_err(), "scope 4 requires the ring rule");
        p.rule = TraversalRule::Ring;
        p.validate().unwrap();
        p.scope = Scope::Bounded(3);
        p.rule = TraversalRule::Nearest;
        p.validate().unwrap();
        p.seeds = SeedStrategy::RandomSubset(0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn neighborhood_scope_limits() {
        let (est, _) = lattice(3, 1);
        let graph = est.graph();
        let optimized = vec![false; graph.len()];
        let eligible = vec![true; graph.len()];
        let center = VarId(graph.len() / 2);
        let n1 = neighborhood(graph, center, Scope::Bounded(1), &optimized, &eligible);
        assert_eq!(n1, vec![center], "scope 1 is the local limit");
        let all = neighborhood(graph, center, Scope::Global, &optimized, &eligible);
        assert_eq!(all.len(), graph.len(), "global scope takes everything");
        // Optimized variables drop out.
        let mut some = optimized.clone();
        some[center.0] = true;
        let n = neighborhood(graph, center, Scope::Bounded(2), &some, &eligible);
        assert!(!n.contains(&center));
    }

    #[test]
    fn global_scope_matches_brute_force_on_toys() {
        // ≥ 20 random instances over 1–5 variable toys with coarse grids.
        let mut matched = 0;
        for seed in 0..10 {
            for (est, bounds) in [pair_toy(seed), chain3_toy(100 + seed)] {
                let step = 0.09; // ≤ 12 points per axis on 0.45/0.635 bands
                let got = optimize(&est, &bounds, &global_exhaustive(step)).unwrap();
                let (want_vals, want_e) = brute_force(&est, &bounds, step);
                assert_eq!(got.values, want_vals, "seed {seed}: argmin differs");
                assert_eq!(got.total, want_e, "seed {seed}: optimum differs");
                matched += 1;
            }
        }
        assert!(matched >= 20);
    }

    #[test]
    fn single_variable_graph_equals_inner_solve() {
        let (est, bounds) = toy(
            "lone",
            vec![Qubit { id: 0, x: 0, y: 0 }],
            vec![],
            42,
        );
        let res = optimize(&est, &bounds, &global_exhaustive(0.01)).unwrap();
        let grid = axis_grid(bounds.lo[0], bounds.hi[0], 0.01);
        let best = grid
            .iter()
            .copied()
            .min_by(|&a, &b| {
                est.evaluate(&[a]).unwrap().total_cmp(&est.evaluate(&[b]).unwrap())
            })
            .unwrap();
        assert_eq!(res.values, vec![best]);
        assert_eq!(res.steps.len(), 1);
    }

    #[test]
    fn tie_break_prefers_lowest_frequency() {
        // Zero weights make every configuration cost 0: the lowest grid
        // frequency must win everywhere.
        let (mut est, bounds) = pair_toy(3);
        est.set_weights(WeightTable::zeros());
        let res = optimize(&est, &bounds, &global_exhaustive(0.05)).unwrap();
        for i in 0..est.n_vars() {
            let lowest = axis_grid(bounds.lo[i], bounds.hi[i], 0.05)[0];
            assert_eq!(res.values[i], lowest);
        }
    }

    #[test]
    fn scope_one_commits_conditional_optima() {
        let (est, bounds) = lattice(2, 5);
        let params = SnakeParams {
            scope: Scope::Bounded(1),
            rule: TraversalRule::Nearest,
            solver: InnerSolver::ExhaustiveGrid { step: 0.01 },
            ..SnakeParams::default()
        };
        let res = optimize(&est, &bounds, &params).unwrap();
        assert_eq!(
            res.steps.len(),
            est.n_vars(),
            "scope 1 takes one step per variable"
        );
        // Replay the winning thread: at each step, the committed value must
        // equal the single-variable conditional optimum given what was
        // already fixed.
        let mut vals = vec![f64::NAN; est.n_vars()];
        let mut optimized = vec![false; est.n_vars()];
        for rec in &res.steps {
            assert_eq!(rec.free.len(), 1);
            let v = rec.free[0];
            let mut avail = optimized.clone();
            avail[v.0] = true;
            let sub = SnakeEstimator::build(&est, vec![v], &avail);
            let grid = axis_grid(bounds.lo[v.0], bounds.hi[v.0], 0.01);
            let mut best = (f64::INFINITY, f64::NAN);
            for x in grid {
                let e = sub.evaluate(&est, &mut vals, &[x]);
                if e < best.0 {
                    best = (e, x);
                }
            }
            vals[v.0] = res.values[v.0];
            optimized[v.0] = true;
            assert_eq!(res.values[v.0], best.1, "step {} variable {v}", rec.step);
            assert_relative_eq!(rec.value, best.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn every_variable_assigned_once_and_deterministic() {
        let (est, bounds) = lattice(3, 9);
        for heuristic in [
            TraversalHeuristic::Breadth,
            TraversalHeuristic::Depth,
            TraversalHeuristic::Random,
        ] {
            for (scope, rule) in [
                (Scope::Bounded(2), TraversalRule::Nearest),
                (Scope::Bounded(2), TraversalRule::NextNearest),
                (Scope::Bounded(4), TraversalRule::Ring),
            ] {
                let params = SnakeParams {
                    scope,
                    rule,
                    heuristic,
                    seeds: SeedStrategy::RandomSubset(3),
                    solver: InnerSolver::Auto {
                        step: 0.01,
                        budget: 400,
                    },
                    seed: 13,
                };
                let a = optimize(&est, &bounds, &params).unwrap();
                // Completeness: each variable in exactly one step's free set.
                let mut seen = vec![0usize; est.n_vars()];
                for rec in &a.steps {
                    for v in &rec.free {
                        seen[v.0] += 1;
                    }
                }
                assert!(seen.iter().all(|&c| c == 1), "{scope:?} {rule:?}");
                assert!(a.values.iter().all(|v| v.is_finite()));
                // Determinism: identical inputs, identical outcome.
                let b = optimize(&est, &bounds, &params).unwrap();
                assert_eq!(a.values, b.values);
                assert_eq!(a.total, b.total);
                assert_eq!(a.best_seed, b.best_seed);
                assert_eq!(a.steps.len(), b.steps.len());
                for (ra, rb) in a.steps.iter().zip(&b.steps) {
                    assert_eq!(ra.center, rb.center);
                    assert_eq!(ra.free, rb.free);
                    assert_eq!(ra.value, rb.value);
                    assert_eq!(ra.evals, rb.evals);
                }
            }
        }
    }

    #[test]
    fn stochastic_close_to_coarse_exhaustive_on_5d() {
        // 3-qubit chain: 5 variables. Coarse 10-point grids make the
        // exhaustive optimum affordable (10^5 evaluations).
        let (est, bounds) = chain3_toy(77);
        let widest = (0..est.n_vars())
            .map(|i| bounds.hi[i] - bounds.lo[i])
            .fold(0.0, f64::max);
        let step = widest / 9.0; // ≤ 10 points per axis
        let (_, want) = brute_force(&est, &bounds, step);
        let params = SnakeParams {
            scope: Scope::Global,
            rule: TraversalRule::Ring,
            seeds: SeedStrategy::RandomSubset(1),
            solver: InnerSolver::StochasticGlobal {
                step,
                budget: 10_000,
            },
            ..SnakeParams::default()
        };
        let got = optimize(&est, &bounds, &params).unwrap();
        assert!(
            got.total <= want * 1.05,
            "stochastic {} vs exhaustive {want}",
            got.total
        );
    }

    #[test]
    fn heal_requires_targets_and_known_ids() {
        let (est, bounds) = lattice(2, 3);
        let config = optimize(&est, &bounds, &SnakeParams::default())
            .unwrap()
            .values;
        assert!(heal(&est, &bounds, &config, &[], &SnakeParams::default()).is_err());
        let bad = [VarId(est.n_vars() + 5)];
        assert!(heal(&est, &bounds, &config, &bad, &SnakeParams::default()).is_err());
    }

    #[test]
    fn heal_touches_only_the_closure() {
        let (est, bounds) = lattice(3, 21);
        let params = SnakeParams {
            seeds: SeedStrategy::RandomSubset(4),
            ..SnakeParams::default()
        };
        let config = optimize(&est, &bounds, &params).unwrap().values;
        let graph = est.graph();
        // Heal one interaction variable: idles must come back bit-identical.
        let int_var = VarId(graph.n_idle());
        let healed = heal(&est, &bounds, &config, &[int_var], &params).unwrap();
        assert_eq!(healed.closure, vec![int_var]);
        for i in 0..est.n_vars() {
            if i != int_var.0 {
                assert!(
                    healed.values[i].to_bits() == config[i].to_bits(),
                    "variable v{i} moved"
                );
            }
        }
        // Heal an idle variable: closure = the idle plus its hinged
        // interactions; everything else bit-identical.
        let idle_var = VarId(1);
        let healed = heal(&est, &bounds, &config, &[idle_var], &params).unwrap();
        let mut expect = vec![idle_var];
        expect.extend(graph.incident(idle_var).iter().copied());
        expect.sort_unstable();
        assert_eq!(healed.closure, expect);
        for i in 0..est.n_vars() {
            if !healed.closure.contains(&VarId(i)) {
                assert!(healed.values[i].to_bits() == config[i].to_bits());
            }
        }
    }

    #[test]
    fn heal_improves_degraded_configurations() {
        let (est, bounds) = lattice(3, 33);
        let params = SnakeParams {
            seeds: SeedStrategy::RandomSubset(4),
            ..SnakeParams::default()
        };
        let config = optimize(&est, &bounds, &params).unwrap().values;
        // Degrade one idle variable to its band edge (worst dephasing).
        let victim = VarId(2);
        let mut degraded = config.clone();
        degraded[victim.0] = bounds.lo[victim.0];
        let e_degraded = est.evaluate(&degraded).unwrap();
        let healed = heal(&est, &bounds, &degraded, &[victim], &params).unwrap();
        assert!(
            healed.total < e_degraded,
            "healing must strictly improve: {} vs {e_degraded}",
            healed.total
        );
        // Gates whose budgets share no variables with the closure keep
        // their per-gate error exactly.
        let before = est.per_gate_errors(&degraded).unwrap();
        let after = est.per_gate_errors(&healed.values).unwrap();
        let graph = est.graph();
        for g in 0..est.n_vars() {
            let (lo, hi) = est.gate_component_range(VarId(g));
            let touches = est.components()[lo..hi]
                .iter()
                .any(|c| c.deps.iter().any(|d| healed.closure.contains(d)));
            if !touches {
                assert_eq!(before[g], after[g], "gate {} drifted", graph.name(VarId(g)));
            }
        }
    }

    #[test]
    fn heal_target_selection_thresholds() {
        let (est, _) = lattice(2, 2);
        let graph = est.graph();
        let th = HealThresholds::default();
        let quiet = || BenchmarkPrediction {
            per_qubit: (0..graph.n_idle())
                .map(|i| match graph.var(VarId(i)) {
                    GateVar::Idle(q) => crate::estimator::QubitPrediction {
                        qubit: q,
                        error: 1e-4,
                    },
                    GateVar::Interaction(..) => unreachable!(),
                })
                .collect(),
            per_pair: (graph.n_idle()..graph.len())
                .map(|i| match graph.var(VarId(i)) {
                    GateVar::Interaction(a, b) => crate::estimator::PairPrediction {
                        a,
                        b,
                        sq_a: 1e-4,
                        sq_b: 1e-4,
                        cz: 5e-3,
                        cycle: 5.2e-3,
                    },
                    GateVar::Idle(_) => unreachable!(),
                })
                .collect(),
            untrained_weights: false,
        };
        // All quiet: nothing selected.
        let mut pred = quiet();
        assert!(select_heal_targets(graph, &pred, &th).is_empty());
        // One pair over threshold: exactly its interaction variable.
        pred.per_pair[0].cycle = 2.0e-2;
        let (a0, b0) = (pred.per_pair[0].a, pred.per_pair[0].b);
        let targets = select_heal_targets(graph, &pred, &th);
        assert_eq!(targets, vec![graph.interaction_var(a0, b0).unwrap()]);
        // A hot idle benchmark joins the set.
        let hot = pred
            .per_qubit
            .iter()
            .position(|q| q.qubit != a0 && q.qubit != b0)
            .unwrap();
        pred.per_qubit[hot].error = 2e-3;
        let q_hot = pred.per_qubit[hot].qubit;
        let targets = select_heal_targets(graph, &pred, &th);
        assert!(targets.contains(&graph.idle_var(q_hot).unwrap()));
        assert_eq!(targets.len(), 2);
        // A qubit in two outlier pairs is targeted even with a clean idle
        // benchmark; its partners in those pairs are not.
        let mut pred = quiet();
        let shared = pred
            .per_pair
            .iter()
            .flat_map(|p| [p.a, p.b])
            .find(|&q| {
                pred.per_pair
                    .iter()
                    .filter(|p| p.a == q || p.b == q)
                    .count()
                    >= 2
            })
            .expect("some qubit joins two pairs");
        let hot_pairs: Vec<usize> = pred
            .per_pair
            .iter()
            .enumerate()
            .filter(|(_, p)| p.a == shared || p.b == shared)
            .map(|(i, _)| i)
            .take(2)
            .collect();
        for &i in &hot_pairs {
            pred.per_pair[i].cycle = 3e-2;
        }
        let targets = select_heal_targets(graph, &pred, &th);
        assert!(targets.contains(&graph.idle_var(shared).unwrap()));
        for &i in &hot_pairs {
            let p = &pred.per_pair[i];
            let partner = if p.a == shared { p.b } else { p.a };
            let solo = pred
                .per_pair
                .iter()
                .filter(|q| (q.a == partner || q.b == partner) && q.cycle >= th.interaction)
                .count();
            if solo < th.outlier_membership {
                assert!(!targets.contains(&graph.idle_var(partner).unwrap()));
            }
        }
    }

    #[test]
    fn stitch_single_region_equals_plain_optimize() {
        let (est, bounds) = lattice(2, 8);
        let processor = build_surface_code_lattice(2).unwrap();
        let params = SnakeParams {
            seeds: SeedStrategy::RandomSubset(3),
            ..SnakeParams::default()
        };
        let plain = optimize(&est, &bounds, &params).unwrap();
        let plan = StitchPlan::by_columns(&processor, est.graph(), 1, params).unwrap();
        assert_eq!(plan.regions.len(), 1);
        let stitched = stitch(&est, &bounds, &plan).unwrap();
        assert!(stitched.seam.is_empty());
        assert_eq!(stitched.values, plain.values);
        assert_eq!(stitched.total, plain.total);
    }

    #[test]
    fn stitch_partition_validation() {
        let (est, _) = lattice(2, 8);
        let processor = build_surface_code_lattice(2).unwrap();
        let graph = est.graph();
        let params = SnakeParams::default();
        let mut plan = StitchPlan::by_columns(&processor, graph, 2, params).unwrap();
        plan.validate(graph).unwrap();
        // Overlap: duplicate a variable across regions.
        let dup = plan.regions[0][0];
        plan.regions[1].push(dup);
        assert!(plan.validate(graph).is_err());
        // Gap: drop a variable entirely.
        let mut plan = StitchPlan::by_columns(&processor, graph, 2, params).unwrap();
        plan.regions[0].remove(0);
        assert!(plan.validate(graph).is_err());
    }

    #[test]
    fn seam_matches_brute_force_cut_scan() {
        let g = ProcessorGraph::standard68();
        let spec = GenerativeSpec::new(g.clone(), 4);
        let data = generate(&spec).unwrap();
        let layers = color_cz_layers(&g).unwrap();
        let graph = Arc::new(GateVariableGraph::from_processor(&g));
        let est = Estimator::build(
            graph.clone(),
            Arc::new(data),
            &layers,
            MitigationFlags::all(),
            WeightTable::reference(),
        )
        .unwrap();
        let plan = StitchPlan::by_columns(&g, &graph, 2, SnakeParams::default()).unwrap();
        let seam = seam_variables(&est, &plan);
        assert!(!seam.is_empty());
        // Independent scan: region index per variable, then every
        // component with dependencies in ≥ 2 regions contributes its deps.
        let mut region_of = vec![usize::MAX; est.n_vars()];
        for (r, region) in plan.regions.iter().enumerate() {
            for &v in region {
                region_of[v.0] = r;
            }
        }
        let mut want = BTreeSet::new();
        for c in est.components() {
            let rs: BTreeSet<usize> = c.deps.iter().map(|d| region_of[d.0]).collect();
            if rs.len() >= 2 {
                want.extend(c.deps.iter().copied());
            }
        }
        assert_eq!(seam, want.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn stitch_two_regions_produces_complete_config() {
        let (est, bounds) = lattice(3, 14);
        let processor = build_surface_code_lattice(3).unwrap();
        let params = SnakeParams {
            seeds: SeedStrategy::RandomSubset(2),
            ..SnakeParams::default()
        };
        let plan = StitchPlan::by_columns(&processor, est.graph(), 2, params).unwrap();
        let res = stitch(&est, &bounds, &plan).unwrap();
        assert!(res.values.iter().all(|v| v.is_finite()));
        assert_eq!(res.regions.len(), 2);
        assert!(!res.seam.is_empty());
        // The reconciled total matches a fresh full evaluation.
        assert_relative_eq!(
            res.total,
            est.evaluate(&res.values).unwrap(),
            max_relative = 1e-12
        );
    }
}
