//! Supervised weight training and prediction-accuracy reporting.
//!
//! Benchmark measurements come in two flavors: *isolated* pair benchmarks
//! run one pair at a time (only relaxation and dephasing contribute) and
//! *parallel* benchmarks run full surface-code cycles (everything
//! interferes). Training exploits this in two iterations: the first fits
//! the relaxation and dephasing group weights against isolated samples; the
//! second freezes those and fits the stray-coupling and distortion groups
//! against parallel samples.
//!
//! Because predictions are linear in the weights, each (sample, pair)
//! target reduces to a precomputed kernel-sum row `K[t][g]` and training is
//! full-batch Adam on a mean-absolute-error cost over `w_g = s_g·exp(θ_g)`
//! — the log-space parameterization keeps weights positive and makes the
//! step size scale-free across groups of very different magnitudes.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    median, Bounds, Estimator, Mechanism, WeightTable, GROUP_NAMES, ISOLATED_GROUPS,
};
use crate::topology::{GateVar, QubitId, VarId};

// ====================== Training data ======================

/// How a benchmark sample was executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolationTag {
    /// One pair at a time: no concurrent gates, so only relaxation and
    /// dephasing contribute to the measured error.
    Isolated,
    /// Full parallel operation: all modeled mechanisms contribute.
    Parallel,
}

/// One measured per-pair cycle error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMeasurement {
    pub a: QubitId,
    pub b: QubitId,
    pub cycle_error: f64,
}

/// One benchmark run: the frequency configuration it executed at, how it
/// was executed, and what it measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    /// Dense configuration in gate-variable order.
    pub config: Vec<f64>,
    pub tag: IsolationTag,
    pub measured: Vec<PairMeasurement>,
}

/// On-disk training set with enough context to catch mismatched processors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetFile {
    pub processor: String,
    pub n_vars: usize,
    pub samples: Vec<TrainingSample>,
}

impl TrainingSetFile {
    pub fn validate(&self, est: &Estimator) -> Result<()> {
        if self.n_vars != est.n_vars() {
            return Err(Error::parse(format!(
                "training set built for {} variables, estimator has {}",
                self.n_vars,
                est.n_vars()
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.config.len() != self.n_vars {
                return Err(Error::parse(format!(
                    "sample {i} has {} configuration values, expected {}",
                    s.config.len(),
                    self.n_vars
                )));
            }
            for m in &s.measured {
                est.graph().interaction_var(m.a, m.b).ok_or_else(|| {
                    Error::parse(format!(
                        "sample {i} measures unknown pair ({}, {})",
                        m.a, m.b
                    ))
                })?;
            }
        }
        Ok(())
    }
}

// ====================== Options and report ======================

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub iterations: usize,
    /// Fraction of targets held out of training in each iteration.
    pub holdout_fraction: f64,
    /// Seed for the train/holdout split shuffle.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.05,
            iterations: 4000,
            holdout_fraction: 0.4,
            seed: 7,
        }
    }
}

/// Outcome of one training iteration (phase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    /// Names of the groups fit in this phase.
    pub fitted_groups: Vec<String>,
    pub n_train_targets: usize,
    pub n_holdout_targets: usize,
    pub train_mae: f64,
    pub holdout_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub weights: WeightTable,
    pub phases: Vec<PhaseReport>,
}

// ====================== Kernel-sum targets ======================

/// One scalar regression target: a measured pair error and the per-group
/// kernel sums that predict it at the sample's configuration.
struct Target {
    kernel_sums: Vec<f64>,
    measured: f64,
}

/// Builds the kernel-sum row for pair `(a, b)` at `config`. The predicted
/// cycle error sums the pair's two idle budgets and its interaction budget;
/// isolated execution restricts to relaxation and dephasing components.
fn kernel_row(
    est: &Estimator,
    a: QubitId,
    b: QubitId,
    config: &[f64],
    tag: IsolationTag,
) -> Result<Vec<f64>> {
    let graph = est.graph();
    let int = graph
        .interaction_var(a, b)
        .ok_or_else(|| Error::estimator(format!("no interaction variable for ({a}, {b})")))?;
    let gates = [
        graph
            .idle_var(a)
            .ok_or_else(|| Error::estimator(format!("no idle variable for {a}")))?,
        graph
            .idle_var(b)
            .ok_or_else(|| Error::estimator(format!("no idle variable for {b}")))?,
        int,
    ];
    let mut row = vec![0.0; GROUP_NAMES.len()];
    for gate in gates {
        let (lo, hi) = est.gate_component_range(gate);
        for ci in lo..hi {
            let c = &est.components()[ci];
            if tag == IsolationTag::Isolated
                && !matches!(c.mechanism, Mechanism::Relaxation | Mechanism::Dephasing)
            {
                continue;
            }
            row[c.group] += est.component_value(ci, config);
        }
    }
    Ok(row)
}

fn build_targets(
    est: &Estimator,
    samples: &[TrainingSample],
    tag: IsolationTag,
) -> Result<Vec<Target>> {
    let mut out = Vec::new();
    for s in samples.iter().filter(|s| s.tag == tag) {
        if s.config.len() != est.n_vars() {
            return Err(Error::estimator(format!(
                "sample configuration has {} values, estimator expects {}",
                s.config.len(),
                est.n_vars()
            )));
        }
        for m in &s.measured {
            if !(m.cycle_error.is_finite() && m.cycle_error >= 0.0) {
                return Err(Error::estimator(format!(
                    "measured error for ({}, {}) must be finite and ≥ 0",
                    m.a, m.b
                )));
            }
            out.push(Target {
                kernel_sums: kernel_row(est, m.a, m.b, &s.config, tag)?,
                measured: m.cycle_error,
            });
        }
    }
    Ok(out)
}

// ====================== Adam in log-weight space ======================

fn mae(targets: &[&Target], weights: &[f64]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for t in targets {
        let p: f64 = t
            .kernel_sums
            .iter()
            .zip(weights)
            .map(|(k, w)| k * w)
            .sum();
        acc += (p - t.measured).abs();
    }
    acc / targets.len() as f64
}

/// Minimizes MAE over the `free` groups with the rest frozen, returning the
/// best-on-train weights. Learning rate halves every `iterations / 5` steps
/// so late iterations settle instead of oscillating around the optimum.
fn fit_phase(
    targets_train: &[&Target],
    targets_holdout: &[&Target],
    weights: &mut WeightTable,
    free: &[usize],
    opts: &TrainOptions,
) -> (f64, f64) {
    let anchors: Vec<f64> = free.iter().map(|&g| weights.value(g).max(1e-300)).collect();
    let mut theta: Vec<f64> = vec![0.0; free.len()];
    let mut m: Vec<f64> = vec![0.0; free.len()];
    let mut v: Vec<f64> = vec![0.0; free.len()];
    // A short second-moment window keeps the normalizer tracking the
    // *current* gradient scale; in log-weight space gradients shrink with
    // the weights themselves, and a long memory would stall the descent.
    let (beta1, beta2, eps) = (0.9, 0.9, 1e-12);
    let decay_every = (opts.iterations / 8).max(1);
    let n = targets_train.len().max(1) as f64;

    let mut w = weights.values().to_vec();
    let mut best_theta = theta.clone();
    let mut best_mae = mae(targets_train, &w);
    for step in 0..opts.iterations {
        for (i, &g) in free.iter().enumerate() {
            w[g] = anchors[i] * theta[i].exp();
        }
        // Full-batch MAE subgradient, mapped to θ-space.
        let mut grad = vec![0.0; free.len()];
        for t in targets_train {
            let p: f64 = t.kernel_sums.iter().zip(&w).map(|(k, wg)| k * wg).sum();
            let s = (p - t.measured).signum();
            for (i, &g) in free.iter().enumerate() {
                grad[i] += s * t.kernel_sums[g] * w[g] / n;
            }
        }
        let lr = opts.learning_rate * 0.5f64.powi((step / decay_every) as i32);
        let t1 = step as f64 + 1.0;
        for i in 0..free.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let mhat = m[i] / (1.0 - beta1.powf(t1));
            let vhat = v[i] / (1.0 - beta2.powf(t1));
            theta[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        for (i, &g) in free.iter().enumerate() {
            w[g] = anchors[i] * theta[i].exp();
        }
        let cur = mae(targets_train, &w);
        if cur < best_mae {
            best_mae = cur;
            best_theta = theta.clone();
        }
    }
    for (i, &g) in free.iter().enumerate() {
        weights.set_value(g, anchors[i] * best_theta[i].exp());
    }
    let final_w = weights.values().to_vec();
    (mae(targets_train, &final_w), mae(targets_holdout, &final_w))
}

// ====================== Public entry points ======================

fn split_targets<'a>(
    targets: &'a [Target],
    opts: &TrainOptions,
    phase: u64,
) -> (Vec<&'a Target>, Vec<&'a Target>) {
    let mut idx: Vec<usize> = (0..targets.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(phase));
    idx.shuffle(&mut rng);
    let n_holdout = ((targets.len() as f64) * opts.holdout_fraction).round() as usize;
    let n_train = targets.len() - n_holdout.min(targets.len());
    let train = idx[..n_train].iter().map(|&i| &targets[i]).collect();
    let holdout = idx[n_train..].iter().map(|&i| &targets[i]).collect();
    (train, holdout)
}

/// Groups with at least one component in the estimator — the groups the
/// model can express at all.
fn reachable_groups(est: &Estimator) -> Vec<bool> {
    let mut reach = vec![false; GROUP_NAMES.len()];
    for c in est.components() {
        reach[c.group] = true;
    }
    reach
}

/// Verifies every fit-candidate group has signal in the training targets;
/// errors with the full list of unfit groups otherwise.
fn check_coverage(targets: &[&Target], free: &[usize], phase: &str) -> Result<()> {
    let unfit: Vec<&str> = free
        .iter()
        .filter(|&&g| targets.iter().all(|t| t.kernel_sums[g] == 0.0))
        .map(|&g| GROUP_NAMES[g])
        .collect();
    if unfit.is_empty() {
        Ok(())
    } else {
        Err(Error::estimator(format!(
            "no {phase} training coverage for weight groups: {}",
            unfit.join(", ")
        )))
    }
}

/// Two-iteration supervised fit of the weight table. The estimator's
/// current weights serve as initialization anchors; the returned table is
/// marked trained. See the module docs for the schedule.
pub fn train_weights(
    est: &Estimator,
    samples: &[TrainingSample],
    opts: &TrainOptions,
) -> Result<TrainReport> {
    let reach = reachable_groups(est);
    let mut weights = est.weights().clone();
    let mut phases = Vec::new();

    // Iteration 1: relaxation + dephasing on isolated samples.
    let isolated = build_targets(est, samples, IsolationTag::Isolated)?;
    let free1: Vec<usize> = ISOLATED_GROUPS
        .iter()
        .copied()
        .filter(|&g| reach[g])
        .collect();
    if !free1.is_empty() {
        let (train, holdout) = split_targets(&isolated, opts, 1);
        check_coverage(&train, &free1, "isolated")?;
        let (train_mae, holdout_mae) = fit_phase(&train, &holdout, &mut weights, &free1, opts);
        phases.push(PhaseReport {
            fitted_groups: free1.iter().map(|&g| GROUP_NAMES[g].to_string()).collect(),
            n_train_targets: train.len(),
            n_holdout_targets: holdout.len(),
            train_mae,
            holdout_mae,
        });
    }

    // Iteration 2: stray coupling + distortion on parallel samples, with
    // the relaxation/dephasing groups frozen.
    let parallel = build_targets(est, samples, IsolationTag::Parallel)?;
    let free2: Vec<usize> = (0..GROUP_NAMES.len())
        .filter(|g| reach[*g] && !ISOLATED_GROUPS.contains(g))
        .collect();
    if !free2.is_empty() {
        let (train, holdout) = split_targets(&parallel, opts, 2);
        check_coverage(&train, &free2, "parallel")?;
        let (train_mae, holdout_mae) = fit_phase(&train, &holdout, &mut weights, &free2, opts);
        phases.push(PhaseReport {
            fitted_groups: free2.iter().map(|&g| GROUP_NAMES[g].to_string()).collect(),
            n_train_targets: train.len(),
            n_holdout_targets: holdout.len(),
            train_mae,
            holdout_mae,
        });
    }

    weights.mark_trained();
    Ok(TrainReport { weights, phases })
}

/// Predicted pair errors under the estimator's current weights for every
/// measured pair of `sample`, respecting its isolation tag.
pub fn predict_sample(est: &Estimator, sample: &TrainingSample) -> Result<Vec<f64>> {
    let w = est.weights().values();
    sample
        .measured
        .iter()
        .map(|m| {
            let row = kernel_row(est, m.a, m.b, &sample.config, sample.tag)?;
            Ok(row.iter().zip(w).map(|(k, wg)| k * wg).sum())
        })
        .collect()
}

// ====================== Synthetic benchmark generation ======================

/// Options for [`synthesize_training_set`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    pub n_isolated: usize,
    pub n_parallel: usize,
    /// Multiplicative measurement noise: measured = predicted·(1 + σ·ξ),
    /// floored at zero.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            n_isolated: 24,
            n_parallel: 24,
            noise: 0.0,
            seed: 11,
        }
    }
}

/// Generates a synthetic training set by sampling random in-bounds
/// configurations and measuring them with `truth` — an estimator whose
/// weights play the role of ground truth.
pub fn synthesize_training_set(
    truth: &Estimator,
    bounds: &Bounds,
    opts: &SynthesisOptions,
) -> Result<Vec<TrainingSample>> {
    let graph = truth.graph();
    let pairs: Vec<(QubitId, QubitId)> = (graph.n_idle()..graph.len())
        .map(|i| match graph.var(VarId(i)) {
            GateVar::Interaction(a, b) => (a, b),
            GateVar::Idle(_) => unreachable!("interaction range"),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples = Vec::new();
    let tags = std::iter::repeat(IsolationTag::Isolated)
        .take(opts.n_isolated)
        .chain(std::iter::repeat(IsolationTag::Parallel).take(opts.n_parallel));
    for tag in tags {
        let config: Vec<f64> = (0..graph.len())
            .map(|i| rng.gen_range(bounds.lo[i]..=bounds.hi[i]))
            .collect();
        let w = truth.weights().values();
        let mut measured = Vec::with_capacity(pairs.len());
        for &(a, b) in &pairs {
            let row = kernel_row(truth, a, b, &config, tag)?;
            let clean: f64 = row.iter().zip(w).map(|(k, wg)| k * wg).sum();
            let noisy = if opts.noise > 0.0 {
                let xi: f64 = rng.sample(rand_distr::StandardNormal);
                (clean * (1.0 + opts.noise * xi)).max(0.0)
            } else {
                clean
            };
            measured.push(PairMeasurement {
                a,
                b,
                cycle_error: noisy,
            });
        }
        samples.push(TrainingSample {
            config,
            tag,
            measured,
        });
    }
    Ok(samples)
}

// ====================== Accuracy reporting ======================

/// Prediction-accuracy summary over aligned (predicted, measured) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: usize,
    /// Targets with zero measured error, excluded from relative metrics.
    pub n_zero_measured: usize,
    pub median_inaccuracy: f64,
    /// Median of |predicted − measured| / measured over nonzero targets;
    /// NaN when every measurement is zero.
    pub median_relative: f64,
    /// Sorted |predicted − measured| values (the empirical CDF support).
    pub inaccuracy_cdf: Vec<f64>,
    /// Sorted relative inaccuracies over nonzero-measured targets.
    pub relative_cdf: Vec<f64>,
    /// Measured-error range (GHz-free, same units as the inputs) over which
    /// the median relative inaccuracy stays ≤ 1/2 — the span where
    /// predictions can be trusted to track measurements.
    pub trust_region: Option<(f64, f64)>,
}

/// Width of the logarithmic bins used for the trust region, in decades.
const TRUST_BIN_DEX: f64 = 0.25;

/// Compares predictions against measurements. Errors when lengths differ
/// or values are non-finite; zero measurements are excluded from relative
/// metrics and counted.
pub fn accuracy_report(predicted: &[f64], measured: &[f64]) -> Result<AccuracyReport> {
    if predicted.len() != measured.len() {
        return Err(Error::estimator(format!(
            "{} predictions vs {} measurements",
            predicted.len(),
            measured.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::estimator("empty accuracy comparison"));
    }
    if predicted
        .iter()
        .chain(measured)
        .any(|v| !v.is_finite())
    {
        return Err(Error::estimator("non-finite value in accuracy comparison"));
    }
    let mut inaccuracy: Vec<f64> = predicted
        .iter()
        .zip(measured)
        .map(|(p, m)| (p - m).abs())
        .collect();
    let mut relative = Vec::new();
    let mut nonzero = Vec::new();
    for (p, &m) in predicted.iter().zip(measured) {
        if m > 0.0 {
            relative.push((p - m).abs() / m);
            nonzero.push(((p - m).abs() / m, m));
        }
    }
    let n_zero_measured = measured.len() - relative.len();
    let median_inaccuracy = median(&mut inaccuracy.clone());
    let median_relative = if relative.is_empty() {
        f64::NAN
    } else {
        median(&mut relative.clone())
    };
    inaccuracy.sort_by(f64::total_cmp);
    relative.sort_by(f64::total_cmp);
    Ok(AccuracyReport {
        n: predicted.len(),
        n_zero_measured,
        median_inaccuracy,
        median_relative,
        inaccuracy_cdf: inaccuracy,
        relative_cdf: relative,
        trust_region: trust_region(&nonzero),
    })
}

/// Longest contiguous run of `TRUST_BIN_DEX`-wide logarithmic bins of
/// measured error whose median relative inaccuracy is ≤ 1/2. Empty bins
/// break the run: absence of data is not evidence of trust.
fn trust_region(relative_and_measured: &[(f64, f64)]) -> Option<(f64, f64)> {
    if relative_and_measured.is_empty() {
        return None;
    }
    let logs: Vec<f64> = relative_and_measured
        .iter()
        .map(|&(_, m)| m.log10())
        .collect();
    let lo_bin = (logs.iter().cloned().fold(f64::INFINITY, f64::min) / TRUST_BIN_DEX).floor()
        as i64;
    let hi_bin = (logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / TRUST_BIN_DEX)
        .floor() as i64;
    let n_bins = (hi_bin - lo_bin + 1) as usize;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (&(rel, _), &lg) in relative_and_measured.iter().zip(&logs) {
        let b = ((lg / TRUST_BIN_DEX).floor() as i64 - lo_bin) as usize;
        bins[b.min(n_bins - 1)].push(rel);
    }
    let good: Vec<bool> = bins
        .iter()
        .map(|b| !b.is_empty() && median(&mut b.clone()) <= 0.5)
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut run_start = None;
    for (i, &g) in good.iter().chain(std::iter::once(&false)).enumerate() {
        match (g, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                let len = i - s;
                if best.map_or(true, |(bs, be)| len > be - bs) {
                    best = Some((s, i));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best.map(|(s, e)| {
        let lo = 10f64.powf((lo_bin + s as i64) as f64 * TRUST_BIN_DEX);
        let hi = 10f64.powf((lo_bin + e as i64) as f64 * TRUST_BIN_DEX);
        (lo, hi)
    })
}

// ====================== Tests ======================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{hard_bounds, BoundsOptions, MitigationFlags};
    use crate::genmodel::{generate, GenerativeSpec};
    use crate::topology::{build_surface_code_lattice, color_cz_layers, GateVariableGraph};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn fixture(seed: u64) -> (Estimator, Bounds) {
        let g = build_surface_code_lattice(3).unwrap();
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

    /// Reference weights scaled per group by a seeded factor in [0.5, 2].
    fn scrambled_truth(est: &Estimator, seed: u64) -> Estimator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = WeightTable::reference();
        for g in 0..GROUP_NAMES.len() {
            let f: f64 = rng.gen_range(0.5..2.0);
            w.set_value(g, w.value(g) * f);
        }
        let mut truth = est.clone();
        truth.set_weights(w);
        truth
    }

    #[test]
    fn noiseless_recovery_within_five_percent() {
        let (est, bounds) = fixture(31);
        let truth = scrambled_truth(&est, 5);
        let samples = synthesize_training_set(
            &truth,
            &bounds,
            &SynthesisOptions {
                n_isolated: 24,
                n_parallel: 24,
                noise: 0.0,
                seed: 11,
            },
        )
        .unwrap();
        let report = train_weights(&est, &samples, &TrainOptions::default()).unwrap();
        assert!(report.weights.is_trained());
        assert_eq!(report.phases.len(), 2);
        for g in 0..GROUP_NAMES.len() {
            let got = report.weights.value(g);
            let want = truth.weights().value(g);
            let rel = (got - want).abs() / want;
            assert!(
                rel <= 0.05,
                "group {} recovered {got:.6e}, truth {want:.6e} ({:.1}% off)",
                GROUP_NAMES[g],
                100.0 * rel
            );
        }
    }

    #[test]
    fn zero_targets_drive_weights_to_zero() {
        let (est, bounds) = fixture(32);
        let mut samples = synthesize_training_set(
            &est,
            &bounds,
            &SynthesisOptions {
                n_isolated: 6,
                n_parallel: 6,
                noise: 0.0,
                seed: 3,
            },
        )
        .unwrap();
        for s in &mut samples {
            for m in &mut s.measured {
                m.cycle_error = 0.0;
            }
        }
        let report = train_weights(&est, &samples, &TrainOptions::default()).unwrap();
        let mut trained = est.clone();
        trained.set_weights(report.weights);
        for s in &samples {
            for p in predict_sample(&trained, s).unwrap() {
                assert!(p < 1e-6, "prediction {p} after zero-target training");
            }
        }
    }

    #[test]
    fn noisy_targets_keep_holdout_accuracy() {
        let (est, bounds) = fixture(33);
        let truth = scrambled_truth(&est, 9);
        let samples = synthesize_training_set(
            &truth,
            &bounds,
            &SynthesisOptions {
                n_isolated: 24,
                n_parallel: 24,
                noise: 0.10,
                seed: 17,
            },
        )
        .unwrap();
        let report = train_weights(&est, &samples, &TrainOptions::default()).unwrap();
        // Fresh noisy evaluation set from the same truth.
        let eval = synthesize_training_set(
            &truth,
            &bounds,
            &SynthesisOptions {
                n_isolated: 0,
                n_parallel: 8,
                noise: 0.10,
                seed: 18,
            },
        )
        .unwrap();
        let mut trained = est.clone();
        trained.set_weights(report.weights);
        let mut predicted = Vec::new();
        let mut measured = Vec::new();
        for s in &eval {
            predicted.extend(predict_sample(&trained, s).unwrap());
            measured.extend(s.measured.iter().map(|m| m.cycle_error));
        }
        let acc = accuracy_report(&predicted, &measured).unwrap();
        assert!(
            acc.median_relative <= 0.30,
            "median relative inaccuracy {}",
            acc.median_relative
        );
    }

    #[test]
    fn missing_isolated_samples_is_a_named_error() {
        let (est, bounds) = fixture(34);
        let samples = synthesize_training_set(
            &est,
            &bounds,
            &SynthesisOptions {
                n_isolated: 0,
                n_parallel: 4,
                noise: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        let err = train_weights(&est, &samples, &TrainOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sq.relaxation") && msg.contains("cz.dephasing"), "{msg}");
    }

    #[test]
    fn accuracy_trivial_cases() {
        let m = [1e-3, 2e-3, 5e-3, 1e-2];
        let r = accuracy_report(&m, &m).unwrap();
        assert_eq!(r.median_inaccuracy, 0.0);
        assert_eq!(r.median_relative, 0.0);
        assert!(r.trust_region.is_some());
        let doubled: Vec<f64> = m.iter().map(|v| 2.0 * v).collect();
        let r = accuracy_report(&doubled, &m).unwrap();
        assert!(r.relative_cdf.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(r.trust_region.is_none(), "2× predictions are untrustworthy");
    }

    #[test]
    fn accuracy_median_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let measured: Vec<f64> = (0..101).map(|_| rng.gen_range(1e-4..1e-1)).collect();
        let predicted: Vec<f64> = measured
            .iter()
            .map(|m| m * rng.gen_range(0.7..1.4))
            .collect();
        let r = accuracy_report(&predicted, &measured).unwrap();
        let mut diffs: Vec<f64> = predicted
            .iter()
            .zip(&measured)
            .map(|(p, m)| (p - m).abs())
            .collect();
        diffs.sort_by(f64::total_cmp);
        assert_relative_eq!(r.median_inaccuracy, diffs[50], max_relative = 1e-12);
    }

    #[test]
    fn zero_measurements_excluded_with_count() {
        let measured = [0.0, 1e-3, 0.0, 2e-3];
        let predicted = [1e-4, 1.1e-3, 0.0, 2.2e-3];
        let r = accuracy_report(&predicted, &measured).unwrap();
        assert_eq!(r.n_zero_measured, 2);
        assert_eq!(r.relative_cdf.len(), 2);
    }

    #[test]
    fn trust_region_tracks_good_bins() {
        // Accurate below 1e-2, wildly off above: the region must stop at
        // the crossover.
        let mut predicted = Vec::new();
        let mut measured = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..400 {
            let m = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let p = if m < 1e-2 { m * 1.1 } else { m * 3.0 };
            measured.push(m);
            predicted.push(p);
        }
        let (lo, hi) = accuracy_report(&predicted, &measured)
            .unwrap()
            .trust_region
            .unwrap();
        assert!(lo <= 2e-4, "trust region starts near the bottom: {lo}");
        assert!((5e-3..=2e-2).contains(&hi), "trust region ends near 1e-2: {hi}");
    }

    #[test]
    fn training_set_file_validation() {
        let (est, bounds) = fixture(35);
        let samples = synthesize_training_set(&est, &bounds, &SynthesisOptions::default()).unwrap();
        let file = TrainingSetFile {
            processor: "surface-3".to_string(),
            n_vars: est.n_vars(),
            samples,
        };
        file.validate(&est).unwrap();
        let mut bad = file.clone();
        bad.n_vars += 1;
        assert!(bad.validate(&est).is_err());
        let mut bad = file.clone();
        bad.samples[0].measured[0].b = 999;
        assert!(bad.validate(&est).is_err());
        let json = serde_json::to_string(&file).unwrap();
        let back: TrainingSetFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file, back);
    }
}
