//! Simulation experiment harness: baselines, sweeps, and model fits.
//!
//! Each sweep builds simulated processors from a distance and a seed list,
//! runs the optimizer under the sweep's settings, scores the resulting
//! configurations with the full error model, and reduces the per-pair
//! cycle-error distributions to percentile reports. Curve fits condense
//! series into a few parameters: a saturating-exponential model for error
//! versus processor size and a quadratic model for runtime versus size.
//!
//! Everything is deterministic given the option structs: processors,
//! configurations, and tables depend only on seeds, never on thread
//! scheduling. Wall-clock fields are the one exception and are kept in
//! clearly separated fields.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    hard_bounds, median, Bounds, BoundsOptions, Estimator, MitigationFlags, WeightTable,
};
use crate::genmodel::{generate, splitmix64, CharacterizationData, GenerativeSpec};
use crate::snake::{
    axis_grid, optimize, InnerSolver, Scope, SeedStrategy, SnakeParams, TraversalRule,
};
use crate::topology::{
    build_surface_code_lattice, color_cz_layers, GateVariableGraph, LayerColoring,
    ProcessorGraph,
};

/// Cycle-error level above which a gate counts as a performance outlier,
/// independent of processor size.
pub const OUTLIER_THRESHOLD: f64 = 1.5e-2;

/// Median cycle error of the bundled crossover standard distribution.
pub const CROSSOVER_MEDIAN: f64 = 6.2e-3;

// ====================== Percentile reports ======================

/// Summary statistics of one benchmark distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileReport {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    #[serde(rename = "p2.5")]
    pub p2_5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    #[serde(rename = "p97.5")]
    pub p97_5: f64,
}

/// Linear-interpolated percentile of an ascending-sorted slice: rank
/// `h = (n - 1) p / 100` interpolated between its floor and ceiling.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl PercentileReport {
    pub fn from_values(values: &[f64]) -> Result<PercentileReport> {
        if values.is_empty() {
            return Err(Error::numerical("percentile report of an empty sample"));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::numerical(format!(
                "percentile report over non-finite value {x}"
            )));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(PercentileReport {
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p2_5: percentile(&sorted, 2.5),
            p25: percentile(&sorted, 25.0),
            p50: percentile(&sorted, 50.0),
            p75: percentile(&sorted, 75.0),
            p97_5: percentile(&sorted, 97.5),
        })
    }

    /// The ordering every report must satisfy by construction.
    pub fn is_monotonic(&self) -> bool {
        self.min <= self.p2_5
            && self.p2_5 <= self.p25
            && self.p25 <= self.p50
            && self.p50 <= self.p75
            && self.p75 <= self.p97_5
            && self.p97_5 <= self.max
    }
}

// ====================== Reference tables ======================

/// One row of a benchmark table: a labeled distribution at one processor
/// size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub benchmark: String,
    /// Number of qubits.
    pub n: u32,
    /// How many independent configurations were pooled, when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configurations: Option<u32>,
    pub label: String,
    pub stats: PercentileReport,
}

/// Renders rows as the canonical benchmark table:
/// `benchmark,n,label,min,max,mean,p2.5,p25,p50,p75,p97.5`.
pub fn report_table_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("benchmark,n,label,min,max,mean,p2.5,p25,p50,p75,p97.5\n");
    for r in rows {
        let s = &r.stats;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.benchmark, r.n, r.label, s.min, s.max, s.mean, s.p2_5, s.p25, s.p50, s.p75, s.p97_5
        ));
    }
    out
}

/// Parses a benchmark table with the canonical columns, tolerating an
/// optional `configurations` column between `n` and `label`.
pub fn parse_report_table(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("empty benchmark table"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_configs = match cols.as_slice() {
        ["benchmark", "n", "label", "min", "max", "mean", "p2.5", "p25", "p50", "p75", "p97.5"] => {
            false
        }
        ["benchmark", "n", "configurations", "label", "min", "max", "mean", "p2.5", "p25", "p50", "p75", "p97.5"] => {
            true
        }
        _ => {
            return Err(Error::parse(format!(
                "unexpected benchmark table header {header:?}"
            )))
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let want = if with_configs { 12 } else { 11 };
        if fields.len() != want {
            return Err(Error::parse(format!(
                "benchmark table line {}: expected {want} fields, found {}",
                i + 1,
                fields.len()
            )));
        }
        let bad =
            |what: &str| Error::parse(format!("benchmark table line {}: bad {what}", i + 1));
        let mut f = fields.iter();
        let benchmark = f.next().unwrap().to_string();
        let n: u32 = f.next().unwrap().parse().map_err(|_| bad("n"))?;
        let configurations = if with_configs {
            Some(f.next().unwrap().parse().map_err(|_| bad("configurations"))?)
        } else {
            None
        };
        let label = f.next().unwrap().to_string();
        let mut num = |what: &str| -> Result<f64> {
            f.next().unwrap().parse().map_err(|_| bad(what))
        };
        let stats = PercentileReport {
            min: num("min")?,
            max: num("max")?,
            mean: num("mean")?,
            p2_5: num("p2.5")?,
            p25: num("p25")?,
            p50: num("p50")?,
            p75: num("p75")?,
            p97_5: num("p97.5")?,
        };
        rows.push(ReportRow {
            benchmark,
            n,
            configurations,
            label,
            stats,
        });
    }
    Ok(rows)
}

/// The bundled reference standards: the outlier threshold, the published
/// baseline and crossover distributions, and the hardware scaling series.
#[derive(Debug, Clone)]
pub struct Standards {
    pub outlier_threshold: f64,
    pub crossover_median: f64,
    /// Full-processor baseline and crossover distributions.
    pub standards: Vec<ReportRow>,
    /// Optimized and baseline distributions versus processor size.
    pub scaling: Vec<ReportRow>,
}

impl Standards {
    pub fn bundled() -> Standards {
        let standards = parse_report_table(include_str!("../data/reference_standards.csv"))
            .expect("bundled standards table is valid");
        let scaling = parse_report_table(include_str!("../data/reference_scaling.csv"))
            .expect("bundled scaling table is valid");
        Standards {
            outlier_threshold: OUTLIER_THRESHOLD,
            crossover_median: CROSSOVER_MEDIAN,
            standards,
            scaling,
        }
    }

    /// `(n, mean)` series for one label of the scaling table, ascending n.
    pub fn scaling_means(&self, label: &str) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .scaling
            .iter()
            .filter(|r| r.label == label)
            .map(|r| (r.n as f64, r.stats.mean))
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts
    }
}

// ====================== Saturation fit ======================

/// Parameters of the size-saturation model
/// `mean(N) = e_sat − e_scale · exp(−N / n_sat)`, with 1σ uncertainties
/// from the fit covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub e_sat: f64,
    pub e_scale: f64,
    pub n_sat: f64,
    pub e_sat_sigma: f64,
    pub e_scale_sigma: f64,
    pub n_sat_sigma: f64,
    /// Sum of squared residuals at the solution.
    pub ssr: f64,
    pub iterations: usize,
}

fn saturation_model(n: f64, theta: &[f64; 3]) -> f64 {
    let [e_sat, e_scale, n_sat] = *theta;
    e_sat - e_scale * (-n / n_sat).exp()
}

fn saturation_ssr(points: &[(f64, f64)], theta: &[f64; 3]) -> f64 {
    points
        .iter()
        .map(|&(n, y)| {
            let r = y - saturation_model(n, theta);
            r * r
        })
        .sum()
}

/// Solves the 3×3 system `A x = b` by Gaussian elimination with partial
/// pivoting; `None` when `A` is singular to working precision.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut acc = b[col];
        for k in col + 1..3 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Inverts a symmetric 3×3 matrix column by column; `None` when singular.
fn invert3(a: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0; 3]; 3];
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        let x = solve3(a, e)?;
        for row in 0..3 {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

/// Fits the saturation model by Levenberg–Marquardt with an analytic
/// Jacobian. Initialization is deterministic: `e_sat = max(y)`,
/// `e_scale = max(y) − min(y)`, `n_sat = median(N)`.
pub fn fit_saturation(points: &[(f64, f64)]) -> Result<SaturationFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::numerical(format!(
            "saturation fit needs at least 4 distinct sizes, found {}",
            distinct.len()
        )));
    }
    if points.iter().any(|&(n, y)| !n.is_finite() || !y.is_finite() || n <= 0.0) {
        return Err(Error::numerical("saturation fit given non-finite or non-positive data"));
    }
    let y_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let y_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut theta = [y_max, y_max - y_min, median(&mut ns)];
    let mut ssr = saturation_ssr(points, &theta);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    const MAX_ITERATIONS: usize = 200;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // Normal equations from the analytic Jacobian.
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(n, y) in points {
            let e = (-n / theta[2]).exp();
            let j = [1.0, -e, -theta[1] * e * n / (theta[2] * theta[2])];
            let r = y - saturation_model(n, &theta);
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let grad_norm = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < 1e-14 {
            converged = true;
            break;
        }
        // Damped step; raise the damping until a step reduces the SSR.
        let mut stepped = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for d in 0..3 {
                damped[d][d] += lambda * jtj[d][d].max(1e-300);
            }
            if let Some(delta) = solve3(damped, jtr) {
                let trial = [
                    theta[0] + delta[0],
                    theta[1] + delta[1],
                    theta[2] + delta[2],
                ];
                if trial[2] > 0.0 {
                    let trial_ssr = saturation_ssr(points, &trial);
                    if trial_ssr <= ssr {
                        let gain = ssr - trial_ssr;
                        theta = trial;
                        ssr = trial_ssr;
                        lambda = (lambda / 3.0).max(1e-12);
                        stepped = true;
                        if gain <= 1e-16 * ssr.max(1e-300) {
                            converged = true;
                        }
                        break;
                    }
                }
            }
            lambda *= 3.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged {
            break;
        }
        if !stepped {
            // No productive direction even under heavy damping: we are at
            // a numerical minimum.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "saturation fit did not converge within {MAX_ITERATIONS} iterations; \
             residual sum of squares {ssr:.3e}"
        )));
    }

    // Covariance from the unweighted residual variance.
    let dof = points.len().saturating_sub(3);
    let mut sigmas = [f64::INFINITY; 3];
    if dof > 0 {
        let s2 = ssr / dof as f64;
        let mut jtj = [[0.0; 3]; 3];
        for &(n, _) in points {
            let e = (-n / theta[2]).exp();
            let j = [1.0, -e, -theta[1] * e * n / (theta[2] * theta[2])];
            for a in 0..3 {
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        if let Some(cov) = invert3(jtj) {
            for (s, row) in sigmas.iter_mut().zip(cov.iter().enumerate()) {
                let v = s2 * row.1[row.0];
                *s = if v >= 0.0 { v.sqrt() } else { f64::INFINITY };
            }
        }
    }
    Ok(SaturationFit {
        e_sat: theta[0],
        e_scale: theta[1],
        n_sat: theta[2],
        e_sat_sigma: sigmas[0],
        e_scale_sigma: sigmas[1],
        n_sat_sigma: sigmas[2],
        ssr,
        iterations,
    })
}

// ====================== Runtime fit ======================

/// Coefficients of the runtime model `r(N) = a + b·N + c·N²` with 1σ
/// uncertainties and the coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub c_sigma: f64,
    pub r_squared: f64,
}

/// Ordinary least squares on the quadratic runtime model; the model is
/// linear in its coefficients, so the normal equations solve it exactly.
pub fn fit_runtime(points: &[(f64, f64)]) -> Result<RuntimeFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if points.len() < 4 || distinct.len() < 3 {
        return Err(Error::numerical(
            "runtime fit needs ≥ 4 points over ≥ 3 distinct sizes",
        ));
    }
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for &(n, r) in points {
        let x = [1.0, n, n * n];
        for a in 0..3 {
            xty[a] += x[a] * r;
            for b in 0..3 {
                xtx[a][b] += x[a] * x[b];
            }
        }
    }
    let beta = solve3(xtx, xty)
        .ok_or_else(|| Error::numerical("runtime fit design matrix is rank-deficient"))?;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let mut ssr = 0.0;
    let mut sst = 0.0;
    for &(n, r) in points {
        let fit = beta[0] + beta[1] * n + beta[2] * n * n;
        ssr += (r - fit) * (r - fit);
        sst += (r - mean_y) * (r - mean_y);
    }
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let dof = points.len().saturating_sub(3);
    let mut sigmas = [f64::INFINITY; 3];
    if dof > 0 {
        if let Some(cov) = invert3(xtx) {
            let s2 = ssr / dof as f64;
            for (i, s) in sigmas.iter_mut().enumerate() {
                let v = s2 * cov[i][i];
                *s = if v >= 0.0 { v.sqrt() } else { f64::INFINITY };
            }
        }
    }
    Ok(RuntimeFit {
        a: beta[0],
        b: beta[1],
        c: beta[2],
        a_sigma: sigmas[0],
        b_sigma: sigmas[1],
        c_sigma: sigmas[2],
        r_squared,
    })
}

// ====================== Random baseline ======================

/// Draws an independent uniform grid point per variable within its hard
/// bounds: the unoptimized configuration a processor would start from.
pub fn random_baseline(bounds: &Bounds, step: f64, seed: u64) -> Result<Vec<f64>> {
    if bounds.len() == 0 {
        return Err(Error::optimizer("baseline draw over empty bounds"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::optimizer("baseline grid step must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0xba5e));
    let mut out = Vec::with_capacity(bounds.len());
    for i in 0..bounds.len() {
        if !(bounds.hi[i] >= bounds.lo[i]) {
            return Err(Error::optimizer(format!("empty bounds for variable v{i}")));
        }
        let grid = axis_grid(bounds.lo[i], bounds.hi[i], step);
        out.push(grid[rng.gen_range(0..grid.len())]);
    }
    Ok(out)
}

// ====================== Shared sweep plumbing ======================

/// One simulated processor instance with everything the sweeps need.
struct Instance {
    processor: ProcessorGraph,
    graph: Arc<GateVariableGraph>,
    data: Arc<CharacterizationData>,
    layers: LayerColoring,
    bounds: Bounds,
}

impl Instance {
    fn simulate(distance: u32, seed: u64) -> Result<Instance> {
        let processor = build_surface_code_lattice(distance)?;
        let spec = GenerativeSpec::new(processor.clone(), seed);
        let data = Arc::new(generate(&spec)?);
        let layers = color_cz_layers(&processor)?;
        let graph = Arc::new(GateVariableGraph::from_processor(&processor));
        let bounds = hard_bounds(&data, &graph, &BoundsOptions::default())?;
        Ok(Instance {
            processor,
            graph,
            data,
            layers,
            bounds,
        })
    }

    fn estimator(&self, flags: MitigationFlags) -> Result<Estimator> {
        Estimator::build(
            self.graph.clone(),
            self.data.clone(),
            &self.layers,
            flags,
            WeightTable::reference(),
        )
    }
}

/// Fraction of cycle errors at or above the outlier threshold.
pub fn outlier_fraction(cycle_errors: &[f64]) -> f64 {
    if cycle_errors.is_empty() {
        return 0.0;
    }
    cycle_errors
        .iter()
        .filter(|&&e| e >= OUTLIER_THRESHOLD)
        .count() as f64
        / cycle_errors.len() as f64
}

/// Default per-sub-problem settings shared by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSolver {
    /// Frequency grid pitch (GHz).
    pub step: f64,
    /// Evaluation budget per sub-problem.
    pub budget: usize,
    /// Optimization threads launched per run (random seed subset).
    pub threads: usize,
}

impl Default for SweepSolver {
    fn default() -> Self {
        SweepSolver {
            step: crate::snake::DEFAULT_GRID_STEP,
            budget: 600,
            threads: 3,
        }
    }
}

impl SweepSolver {
    fn params(&self, scope: Scope, seed: u64) -> SnakeParams {
        let rule = match scope {
            Scope::Bounded(s) if s <= 3 => TraversalRule::NextNearest,
            _ => TraversalRule::Ring,
        };
        SnakeParams {
            scope,
            rule,
            seeds: SeedStrategy::RandomSubset(self.threads),
            solver: InnerSolver::Auto {
                step: self.step,
                budget: self.budget,
            },
            seed,
            ..SnakeParams::default()
        }
    }

    /// Parameters for the global-scope run whose stochastic budget matches
    /// a scoped run that solved `n_subproblems` sub-problems: the single
    /// joint search draws the same per-sub-problem allowance for every one
    /// of them. Matching nominal budgets rather than raw evaluation counts
    /// keeps the comparison close to wall-clock fair, because the scoped
    /// runs spend their overage on line-structured scans that incremental
    /// evaluation makes cheap, while every sample here reprices the whole
    /// configuration.
    fn global_params(&self, n_subproblems: usize, seed: u64) -> SnakeParams {
        SnakeParams {
            scope: Scope::Global,
            rule: TraversalRule::Ring,
            seeds: SeedStrategy::RandomSubset(1),
            solver: InnerSolver::StochasticGlobal {
                step: self.step,
                budget: self.budget * n_subproblems.max(1),
            },
            seed,
            ..SnakeParams::default()
        }
    }
}

// ====================== Scope sweep ======================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScopeSweepOptions {
    /// Lattice distances cycled across master seeds.
    pub distances: Vec<u32>,
    pub master_seeds: Vec<u64>,
    /// Bounded scopes to run; the global limit always runs, budget-matched
    /// to the scope-2 trace of the same instance.
    pub scopes: Vec<u32>,
    pub solver: SweepSolver,
}

impl Default for ScopeSweepOptions {
    fn default() -> Self {
        ScopeSweepOptions {
            distances: vec![3, 4, 5],
            master_seeds: (0..10).collect(),
            scopes: vec![1, 2, 3],
            solver: SweepSolver::default(),
        }
    }
}

/// One (instance, scope) cell of the scope sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeEntry {
    pub master_seed: u64,
    pub distance: u32,
    pub n_qubits: u32,
    /// `"1"`, `"2"`, … or `"global"`.
    pub scope: String,
    pub median_cycle_error: f64,
    pub outlier_fraction: f64,
    pub total_error: f64,
    pub evals: usize,
    pub stats: PercentileReport,
    /// Wall-clock seconds; excluded from reproducibility comparisons.
    pub wall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeSweepResult {
    pub options: ScopeSweepOptions,
    pub entries: Vec<ScopeEntry>,
}

impl ScopeSweepResult {
    /// Rows for the canonical CSV table (wall-clock free).
    pub fn rows(&self) -> Vec<ReportRow> {
        self.entries
            .iter()
            .map(|e| ReportRow {
                benchmark: "czxeb".into(),
                n: e.n_qubits,
                configurations: Some(1),
                label: format!("scope-{}-seed-{}", e.scope, e.master_seed),
                stats: e.stats,
            })
            .collect()
    }

    /// Per-master-seed medians keyed by scope label, for trend checks.
    pub fn medians_by_scope(&self, scope: &str) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.scope == scope)
            .map(|e| e.median_cycle_error)
            .collect()
    }
}

/// Optimizes each simulated instance at every requested scope plus the
/// global limit, budget-matched to the evaluations the scope-2 run
/// actually spent, scoring every configuration with the full error model.
pub fn run_scope_sweep(opts: &ScopeSweepOptions) -> Result<ScopeSweepResult> {
    if opts.distances.is_empty() || opts.master_seeds.is_empty() {
        return Err(Error::optimizer("scope sweep needs distances and seeds"));
    }
    if !opts.scopes.contains(&2) {
        return Err(Error::optimizer(
            "scope sweep needs scope 2: the global limit is budget-matched to it",
        ));
    }
    let mut entries = Vec::new();
    for (i, &master_seed) in opts.master_seeds.iter().enumerate() {
        let distance = opts.distances[i % opts.distances.len()];
        let inst = Instance::simulate(distance, master_seed)?;
        let est = inst.estimator(MitigationFlags::all())?;
        let mut push = |scope: String, params: SnakeParams| -> Result<usize> {
            let t0 = Instant::now();
            let run = optimize(&est, &inst.bounds, &params)?;
            let wall = t0.elapsed().as_secs_f64();
            let pred = est.predict_benchmarks(&run.values)?;
            let cycles = pred.cycle_errors();
            let evals = run.seeds.iter().map(|s| s.evals).sum();
            entries.push(ScopeEntry {
                master_seed,
                distance,
                n_qubits: inst.processor.n_qubits() as u32,
                scope,
                median_cycle_error: pred.median_cycle_error(),
                outlier_fraction: outlier_fraction(&cycles),
                total_error: run.total,
                evals,
                stats: PercentileReport::from_values(&cycles)?,
                wall,
            });
            Ok(run.steps.len())
        };
        let mut scope2_steps = 0;
        for &s in &opts.scopes {
            let steps = push(s.to_string(), opts.solver.params(Scope::Bounded(s), master_seed))?;
            if s == 2 {
                scope2_steps = steps;
            }
        }
        push(
            "global".into(),
            opts.solver.global_params(scope2_steps, master_seed),
        )?;
    }
    Ok(ScopeSweepResult {
        options: opts.clone(),
        entries,
    })
}

// ====================== Mitigation sweep ======================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MitigationSweepOptions {
    pub distance: u32,
    pub master_seeds: Vec<u64>,
    pub solver: SweepSolver,
}

impl Default for MitigationSweepOptions {
    fn default() -> Self {
        MitigationSweepOptions {
            distance: 3,
            master_seeds: (0..10).collect(),
            solver: SweepSolver::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationEntry {
    pub master_seed: u64,
    /// `"none"` or `+`-joined mechanism names.
    pub mitigation: String,
    pub flags: MitigationFlags,
    /// Median cycle error under the full error model.
    pub median_cycle_error: f64,
    pub outlier_fraction: f64,
    /// Median |f_max − idle| over qubits (GHz).
    pub median_idle_detuning: f64,
    pub stats: PercentileReport,
    /// Wall-clock seconds; excluded from reproducibility comparisons.
    pub wall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationSweepResult {
    pub options: MitigationSweepOptions,
    pub entries: Vec<MitigationEntry>,
}

/// Human-readable label of a mitigation subset.
pub fn mitigation_label(flags: &MitigationFlags) -> String {
    let mut parts = Vec::new();
    if flags.relaxation {
        parts.push("relaxation");
    }
    if flags.dephasing {
        parts.push("dephasing");
    }
    if flags.stray_coupling {
        parts.push("stray_coupling");
    }
    if flags.pulse_distortion {
        parts.push("pulse_distortion");
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join("+")
    }
}

impl MitigationSweepResult {
    pub fn medians_for(&self, mitigation: &str) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.mitigation == mitigation)
            .map(|e| e.median_cycle_error)
            .collect()
    }
}

/// Optimizes against every subset of the four mitigation mechanisms and
/// scores each resulting configuration with the full error model — the
/// optimizer only knows what its subset lets it see, the judge sees
/// everything.
pub fn run_mitigation_sweep(opts: &MitigationSweepOptions) -> Result<MitigationSweepResult> {
    if opts.master_seeds.is_empty() {
        return Err(Error::optimizer("mitigation sweep needs seeds"));
    }
    let mut entries = Vec::new();
    for &master_seed in &opts.master_seeds {
        let inst = Instance::simulate(opts.distance, master_seed)?;
        let full = inst.estimator(MitigationFlags::all())?;
        for flags in MitigationFlags::subsets() {
            let t0 = Instant::now();
            let partial = inst.estimator(flags)?;
            let params = opts.solver.params(Scope::Bounded(2), master_seed);
            let run = optimize(&partial, &inst.bounds, &params)?;
            let wall = t0.elapsed().as_secs_f64();
            let pred = full.predict_benchmarks(&run.values)?;
            let cycles = pred.cycle_errors();
            let mut detunings: Vec<f64> = (0..inst.graph.n_idle())
                .map(|i| (inst.data.qubits[i].f_max - run.values[i]).abs())
                .collect();
            entries.push(MitigationEntry {
                master_seed,
                mitigation: mitigation_label(&flags),
                flags,
                median_cycle_error: pred.median_cycle_error(),
                outlier_fraction: outlier_fraction(&cycles),
                median_idle_detuning: median(&mut detunings),
                stats: PercentileReport::from_values(&cycles)?,
                wall,
            });
        }
    }
    Ok(MitigationSweepResult {
        options: opts.clone(),
        entries,
    })
}

// ====================== Scaling sweep ======================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingSweepOptions {
    pub distances: Vec<u32>,
    /// Independent configurations pooled per distance (aligned with
    /// `distances`); small processors get several to boost statistics.
    pub configurations: Vec<usize>,
    pub base_seed: u64,
    pub solver: SweepSolver,
}

impl Default for ScalingSweepOptions {
    fn default() -> Self {
        ScalingSweepOptions {
            distances: vec![3, 5, 7, 9, 11],
            configurations: vec![4, 3, 2, 1, 1],
            base_seed: 0,
            solver: SweepSolver::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSweepResult {
    pub options: ScalingSweepOptions,
    /// One row per (size, label), pooled over that size's configurations.
    pub rows: Vec<ReportRow>,
    pub baseline_fit: Option<SaturationFit>,
    pub optimized_fit: Option<SaturationFit>,
    /// e_sat ratio baseline / optimized, when both fits succeeded.
    pub saturation_ratio: Option<f64>,
}

/// For each lattice size: draws random-baseline configurations and runs
/// the optimizer on freshly simulated processors, pools the cycle-error
/// distributions, and fits the saturation model to both mean series.
pub fn run_scaling_sweep(opts: &ScalingSweepOptions) -> Result<ScalingSweepResult> {
    if opts.distances.len() != opts.configurations.len() {
        return Err(Error::optimizer(
            "scaling sweep needs one configuration count per distance",
        ));
    }
    if opts.distances.is_empty() {
        return Err(Error::optimizer("scaling sweep needs distances"));
    }
    let mut rows = Vec::new();
    let mut base_means = Vec::new();
    let mut opt_means = Vec::new();
    for (&d, &configs) in opts.distances.iter().zip(&opts.configurations) {
        let configs = configs.max(1);
        let mut base_cycles = Vec::new();
        let mut opt_cycles = Vec::new();
        let mut n_qubits = 0;
        for c in 0..configs {
            let seed = splitmix64(opts.base_seed ^ splitmix64((d as u64) << 20 | c as u64));
            let inst = Instance::simulate(d, seed)?;
            n_qubits = inst.processor.n_qubits() as u32;
            let est = inst.estimator(MitigationFlags::all())?;
            let baseline = random_baseline(&inst.bounds, opts.solver.step, seed)?;
            base_cycles.extend(est.predict_benchmarks(&baseline)?.cycle_errors());
            let params = opts.solver.params(Scope::Bounded(2), seed);
            let run = optimize(&est, &inst.bounds, &params)?;
            opt_cycles.extend(est.predict_benchmarks(&run.values)?.cycle_errors());
        }
        for (label, cycles) in [("baseline", &base_cycles), ("optimized", &opt_cycles)] {
            let stats = PercentileReport::from_values(cycles)?;
            if label == "baseline" {
                base_means.push((n_qubits as f64, stats.mean));
            } else {
                opt_means.push((n_qubits as f64, stats.mean));
            }
            rows.push(ReportRow {
                benchmark: "czxeb".into(),
                n: n_qubits,
                configurations: Some(configs as u32),
                label: label.to_string(),
                stats,
            });
        }
    }
    let baseline_fit = fit_saturation(&base_means).ok();
    let optimized_fit = fit_saturation(&opt_means).ok();
    let saturation_ratio = match (&baseline_fit, &optimized_fit) {
        (Some(b), Some(o)) if o.e_sat > 0.0 => Some(b.e_sat / o.e_sat),
        _ => None,
    };
    Ok(ScalingSweepResult {
        options: opts.clone(),
        rows,
        baseline_fit,
        optimized_fit,
        saturation_ratio,
    })
}

// ====================== Runtime sweep ======================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeSweepOptions {
    pub distances: Vec<u32>,
    pub master_seed: u64,
    pub solver: SweepSolver,
    /// Distance on which to also time the scope ordering (1, 2, global);
    /// zero disables the ordering measurement.
    pub ordering_distance: u32,
}

impl Default for RuntimeSweepOptions {
    fn default() -> Self {
        RuntimeSweepOptions {
            distances: (3..=13).collect(),
            master_seed: 0,
            solver: SweepSolver::default(),
            ordering_distance: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimePoint {
    pub distance: u32,
    pub n_qubits: u32,
    pub n_vars: u32,
    /// Single-thread scope-2 wall seconds.
    pub wall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeOrdering {
    pub distance: u32,
    pub wall_scope1: f64,
    pub wall_scope2: f64,
    pub wall_global: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSweepResult {
    pub options: RuntimeSweepOptions,
    pub points: Vec<RuntimePoint>,
    pub fit: RuntimeFit,
    pub ordering: Option<RuntimeOrdering>,
}

/// Times single-thread scope-2 runs across lattice sizes and fits the
/// quadratic runtime model; optionally times the scope ordering on one
/// size. Wall-clock data is the payload here, so this sweep is the one
/// whose outputs legitimately vary between runs.
pub fn run_runtime_sweep(opts: &RuntimeSweepOptions) -> Result<RuntimeSweepResult> {
    if opts.distances.len() < 4 {
        return Err(Error::optimizer("runtime sweep needs at least 4 distances"));
    }
    let single = |solver: &SweepSolver| SweepSolver {
        threads: 1,
        ..*solver
    };
    let mut points = Vec::new();
    for &d in &opts.distances {
        let inst = Instance::simulate(d, opts.master_seed)?;
        let est = inst.estimator(MitigationFlags::all())?;
        let params = single(&opts.solver).params(Scope::Bounded(2), opts.master_seed);
        let t0 = Instant::now();
        optimize(&est, &inst.bounds, &params)?;
        points.push(RuntimePoint {
            distance: d,
            n_qubits: inst.processor.n_qubits() as u32,
            n_vars: inst.graph.len() as u32,
            wall: t0.elapsed().as_secs_f64(),
        });
    }
    let fit = fit_runtime(
        &points
            .iter()
            .map(|p| (p.n_qubits as f64, p.wall))
            .collect::<Vec<_>>(),
    )?;
    let ordering = if opts.ordering_distance > 0 {
        let d = opts.ordering_distance;
        let inst = Instance::simulate(d, opts.master_seed)?;
        let est = inst.estimator(MitigationFlags::all())?;
        let solver = single(&opts.solver);
        let time = |params: SnakeParams| -> Result<(f64, usize)> {
            let t0 = Instant::now();
            let run = optimize(&est, &inst.bounds, &params)?;
            Ok((t0.elapsed().as_secs_f64(), run.steps.len()))
        };
        let (wall_scope1, _) = time(solver.params(Scope::Bounded(1), opts.master_seed))?;
        let (wall_scope2, steps2) = time(solver.params(Scope::Bounded(2), opts.master_seed))?;
        let (wall_global, _) = time(solver.global_params(steps2, opts.master_seed))?;
        Some(RuntimeOrdering {
            distance: d,
            wall_scope1,
            wall_scope2,
            wall_global,
        })
    } else {
        None
    };
    Ok(RuntimeSweepResult {
        options: opts.clone(),
        points,
        fit,
        ordering,
    })
}

// ====================== Tests ======================

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn percentile_singleton_and_interpolation() {
        let r = PercentileReport::from_values(&[5.0]).unwrap();
        assert_eq!(
            (r.min, r.max, r.mean, r.p2_5, r.p25, r.p50, r.p75, r.p97_5),
            (5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0)
        );
        // 1..=100: h = 99·p/100 between order statistics.
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = PercentileReport::from_values(&v).unwrap();
        assert_relative_eq!(r.p50, 50.5);
        assert_relative_eq!(r.p2_5, 3.475);
        assert_relative_eq!(r.p97_5, 97.525);
        assert_relative_eq!(r.p25, 25.75);
        assert_relative_eq!(r.p75, 75.25);
        assert!(PercentileReport::from_values(&[]).is_err());
        assert!(PercentileReport::from_values(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn percentile_matches_sort_oracle() {
        // Independent oracle: direct rank arithmetic on a sorted copy.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..200);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let r = PercentileReport::from_values(&v).unwrap();
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            for (p, got) in [
                (2.5, r.p2_5),
                (25.0, r.p25),
                (50.0, r.p50),
                (75.0, r.p75),
                (97.5, r.p97_5),
            ] {
                let h = (n - 1) as f64 * p / 100.0;
                let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
                let want = s[lo] + (h - lo as f64) * (s[hi] - s[lo]);
                assert_relative_eq!(got, want, max_relative = 1e-12);
            }
            assert!(r.is_monotonic());
        }
    }

    proptest! {
        #[test]
        fn percentile_reports_are_monotonic(v in prop::collection::vec(-1e6f64..1e6, 1..300)) {
            let r = PercentileReport::from_values(&v).unwrap();
            prop_assert!(r.is_monotonic());
        }
    }

    #[test]
    fn bundled_standards_replay() {
        let s = Standards::bundled();
        assert_eq!(s.outlier_threshold, 1.5e-2);
        // Published full-processor medians survive the round trip.
        let baseline = s
            .standards
            .iter()
            .find(|r| r.label == "baseline" && r.n == 68)
            .unwrap();
        assert_eq!(baseline.stats.p50, 1.67e-2);
        let crossover = s.standards.iter().find(|r| r.label == "crossover").unwrap();
        assert_eq!(crossover.stats.p50, s.crossover_median);
        assert!(s.standards.iter().all(|r| r.stats.is_monotonic()));
        assert!(s.scaling.iter().all(|r| r.stats.is_monotonic()));
        // Scaling series: 11 optimized + 11 baseline sizes.
        assert_eq!(s.scaling_means("optimized").len(), 11);
        assert_eq!(s.scaling_means("baseline").len(), 11);
    }

    #[test]
    fn saturation_recovers_noiseless_parameters() {
        let truth = [7.5e-3, 3.1e-3, 22.0];
        let points: Vec<(f64, f64)> = [2.0, 4.0, 9.0, 16.0, 24.0, 33.0, 40.0, 47.0, 54.0, 62.0, 68.0]
            .iter()
            .map(|&n| (n, saturation_model(n, &truth)))
            .collect();
        let fit = fit_saturation(&points).unwrap();
        assert_relative_eq!(fit.e_sat, truth[0], max_relative = 0.01);
        assert_relative_eq!(fit.e_scale, truth[1], max_relative = 0.01);
        assert_relative_eq!(fit.n_sat, truth[2], max_relative = 0.01);
    }

    #[test]
    fn saturation_degenerates_gracefully_on_constant_data() {
        let points: Vec<(f64, f64)> = (1..=8).map(|n| (n as f64 * 8.0, 4.2e-3)).collect();
        let fit = fit_saturation(&points).unwrap();
        assert_relative_eq!(fit.e_sat, 4.2e-3, max_relative = 1e-9);
        assert!(fit.e_scale.abs() < 1e-12);
        assert!(fit.ssr < 1e-20);
    }

    #[test]
    fn saturation_fit_of_reference_scaling_means() {
        // Frozen oracle: an independent nonlinear least-squares
        // implementation fit to the same bundled optimized means gives
        // e_sat = 7.532e-3, e_scale = 3.12e-3, n_sat = 22.29.
        let s = Standards::bundled();
        let fit = fit_saturation(&s.scaling_means("optimized")).unwrap();
        assert_relative_eq!(fit.e_sat, 7.532e-3, max_relative = 2e-3);
        assert_relative_eq!(fit.e_scale, 3.12e-3, max_relative = 2e-2);
        assert_relative_eq!(fit.n_sat, 22.29, max_relative = 2e-2);
        // And the headline number stays inside twice its published spread.
        assert!((fit.e_sat - 7.5e-3).abs() <= 2.0 * 0.4e-3);
    }

    #[test]
    fn saturation_rejects_underdetermined_input() {
        assert!(fit_saturation(&[(3.0, 1.0), (5.0, 2.0), (7.0, 3.0)]).is_err());
        let dup = [(3.0, 1.0), (3.0, 1.1), (5.0, 2.0), (5.0, 2.1)];
        assert!(fit_saturation(&dup).is_err());
    }

    #[test]
    fn runtime_fit_recovers_exact_coefficients() {
        let quad: Vec<(f64, f64)> = (1..=8)
            .map(|n| {
                let n = n as f64 * 25.0;
                (n, -8.4 + 3.6 * n + 0.004 * n * n)
            })
            .collect();
        let fit = fit_runtime(&quad).unwrap();
        assert_relative_eq!(fit.a, -8.4, max_relative = 1e-9);
        assert_relative_eq!(fit.b, 3.6, max_relative = 1e-9);
        assert_relative_eq!(fit.c, 0.004, max_relative = 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
        // Linear data: the quadratic coefficient vanishes.
        let lin: Vec<(f64, f64)> = (1..=8).map(|n| (n as f64 * 25.0, 2.0 + 0.5 * n as f64 * 25.0)).collect();
        let fit = fit_runtime(&lin).unwrap();
        assert!(fit.c.abs() < 1e-9, "c = {}", fit.c);
    }

    #[test]
    fn runtime_fit_rejects_rank_deficiency() {
        // Two distinct sizes cannot pin three coefficients.
        let pts = [(10.0, 1.0), (10.0, 1.1), (20.0, 2.0), (20.0, 2.1)];
        assert!(fit_runtime(&pts).is_err());
    }

    #[test]
    fn baseline_draws_are_uniform_and_deterministic() {
        // Degenerate bounds pin every draw.
        let b = Bounds {
            lo: vec![4.5, 5.0],
            hi: vec![4.5, 5.0],
        };
        let draw = random_baseline(&b, 0.002, 1).unwrap();
        assert_eq!(draw, vec![4.5, 5.0]);
        // Same seed, same draw; different seed, (almost surely) different.
        let b = Bounds {
            lo: vec![4.0; 6],
            hi: vec![4.5; 6],
        };
        let a1 = random_baseline(&b, 0.002, 7).unwrap();
        let a2 = random_baseline(&b, 0.002, 7).unwrap();
        let c = random_baseline(&b, 0.002, 8).unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, c);
        // χ² uniformity over 10 equal index bins, 10⁴ single-variable
        // draws: 99.9th percentile of χ²(9) is 27.88.
        let b = Bounds {
            lo: vec![4.0],
            hi: vec![4.0 + 0.002 * 999.0],
        };
        let mut counts = [0usize; 10];
        for seed in 0..10_000u64 {
            let x = random_baseline(&b, 0.002, seed).unwrap()[0];
            let idx = ((x - 4.0) / 0.002).round() as usize;
            counts[idx / 100] += 1;
        }
        let expected = 1000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 27.88, "χ² = {chi2}, counts {counts:?}");
    }

    #[test]
    fn report_table_round_trips() {
        let rows = vec![ReportRow {
            benchmark: "czxeb".into(),
            n: 17,
            configurations: None,
            label: "optimized".into(),
            stats: PercentileReport::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
        }];
        let csv = report_table_csv(&rows);
        let back = parse_report_table(&csv).unwrap();
        assert_eq!(back, rows);
        assert!(parse_report_table("nonsense,header\n1,2\n").is_err());
    }

    #[test]
    fn scope_sweep_smoke_and_reproducibility() {
        let opts = ScopeSweepOptions {
            distances: vec![2],
            master_seeds: vec![1, 2],
            scopes: vec![1, 2],
            solver: SweepSolver {
                budget: 150,
                threads: 2,
                ..SweepSolver::default()
            },
        };
        let a = run_scope_sweep(&opts).unwrap();
        // 2 seeds × (2 bounded scopes + global).
        assert_eq!(a.entries.len(), 6);
        assert!(a.entries.iter().all(|e| e.stats.is_monotonic()));
        assert!(a
            .entries
            .iter()
            .all(|e| e.median_cycle_error > 0.0 && e.median_cycle_error.is_finite()));
        let b = run_scope_sweep(&opts).unwrap();
        // Identical modulo wall clocks — compare the canonical tables.
        assert_eq!(report_table_csv(&a.rows()), report_table_csv(&b.rows()));
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.median_cycle_error, y.median_cycle_error);
            assert_eq!(x.evals, y.evals);
            assert_eq!(x.total_error, y.total_error);
        }
        // The global run must refuse to go unmatched.
        let bad = ScopeSweepOptions {
            scopes: vec![1, 3],
            ..opts
        };
        assert!(run_scope_sweep(&bad).is_err());
    }

    #[test]
    fn mitigation_sweep_judges_with_the_full_model() {
        let opts = MitigationSweepOptions {
            distance: 2,
            master_seeds: vec![3],
            solver: SweepSolver {
                budget: 150,
                threads: 2,
                ..SweepSolver::default()
            },
        };
        let res = run_mitigation_sweep(&opts).unwrap();
        assert_eq!(res.entries.len(), 16);
        let all = res.medians_for("relaxation+dephasing+stray_coupling+pulse_distortion");
        let none = res.medians_for("none");
        assert_eq!(all.len(), 1);
        assert_eq!(none.len(), 1);
        // Optimizing against nothing cannot beat optimizing against
        // everything when everything is what's scored.
        assert!(none[0] >= all[0], "none {} vs all {}", none[0], all[0]);
        // Dephasing-aware runs keep idles near their maxima.
        let deph = res
            .entries
            .iter()
            .find(|e| e.mitigation == "dephasing")
            .unwrap();
        assert!(
            deph.median_idle_detuning < 0.05,
            "median idle detuning {} GHz",
            deph.median_idle_detuning
        );
    }

    #[test]
    fn scaling_sweep_shapes_and_labels() {
        let opts = ScalingSweepOptions {
            distances: vec![2],
            configurations: vec![2],
            base_seed: 5,
            solver: SweepSolver {
                budget: 150,
                threads: 2,
                ..SweepSolver::default()
            },
        };
        let res = run_scaling_sweep(&opts).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert_eq!(res.rows[0].label, "baseline");
        assert_eq!(res.rows[1].label, "optimized");
        assert_eq!(res.rows[0].n, 7);
        assert_eq!(res.rows[0].configurations, Some(2));
        // One distance cannot support a saturation fit.
        assert!(res.baseline_fit.is_none());
        assert!(res.optimized_fit.is_none());
        // The optimizer must at least beat random draws on its own model.
        assert!(res.rows[1].stats.p50 <= res.rows[0].stats.p50);
    }

    #[test]
    fn runtime_sweep_rejects_short_series() {
        let opts = RuntimeSweepOptions {
            distances: vec![2, 3],
            ..RuntimeSweepOptions::default()
        };
        assert!(run_runtime_sweep(&opts).is_err());
    }
}
