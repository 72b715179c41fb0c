//! Generative sampling of processor characterizations for simulation studies.
//!
//! Real deployments measure a processor's characterization (relaxation
//! spectra, flux sensitivities, stray couplings, distortion) directly. For
//! simulation and benchmarking we instead *sample* one: first architectural
//! parameters per qubit/coupler from configurable priors
//! ([`sample_architecture`]), then the derived characterization data the
//! error model consumes ([`synthesize_characterization`]). The chain is
//! deterministic given `(spec, seed, processor)` and every entity draws from
//! its own counter-derived RNG stream, so adding a qubit or field never
//! perturbs the values of others.
//!
//! Units are GHz for frequencies (including linewidths and stray couplings),
//! µs for times, and 1/µs for relaxation rates throughout; flux sensitivity
//! is GHz per flux quantum.
//!
//! [`validate_statistics`] compares two characterizations (e.g. measured vs
//! synthesized) through two-sample summary statistics — banded relaxation
//! means/variances, spectral peak density, flux-sensitivity envelopes — each
//! with a z-score and pass flag at a configurable threshold.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{ProcessorGraph, QubitId};

// ====================== Flux model ======================

/// Transmon flux tuning curve: `f(φ) = f_max · √|cos(πφ)|` with `φ` in flux
/// quanta. Valid on the principal branch `φ ∈ [0, 1/2)`.
pub fn flux_frequency(f_max: f64, phi: f64) -> f64 {
    f_max * (PI * phi).cos().abs().sqrt()
}

/// Inverse of [`flux_frequency`] on the principal branch: the flux bias at
/// which the qubit sits at `f`. Errors when `f` is outside `(0, f_max]`.
pub fn flux_phase(f_max: f64, f: f64) -> Result<f64> {
    if !(f > 0.0 && f <= f_max) {
        return Err(Error::numerical(format!(
            "frequency {f} GHz outside the tunable range (0, {f_max}]"
        )));
    }
    let c = (f / f_max).powi(2);
    Ok(c.min(1.0).acos() / PI)
}

/// Flux sensitivity `|df/dφ|` expressed as a function of frequency:
/// `(π f_max² / 2f) · √(1 − (f/f_max)⁴)` below `f_max`, exactly 0 at and
/// above it (the sweet spot, where dephasing mitigation parks qubits).
pub fn flux_sensitivity(f_max: f64, f: f64) -> f64 {
    if f >= f_max || f <= 0.0 {
        return 0.0;
    }
    let r = f / f_max;
    (PI * f_max * f_max / (2.0 * f)) * (1.0 - r.powi(4)).sqrt()
}

// ====================== Priors ======================

/// A one-dimensional sampling distribution with explicit hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Dist {
    /// Point mass.
    Fixed { value: f64 },
    Normal { mean: f64, sd: f64 },
    /// `|Normal(0, scale)|`.
    HalfNormal { scale: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `exp(Uniform(ln lo, ln hi))`; requires `0 < lo ≤ hi`.
    LogUniform { lo: f64, hi: f64 },
}

impl Dist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Dist::Fixed { value } => value.is_finite(),
            Dist::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            Dist::HalfNormal { scale } => scale.is_finite() && scale >= 0.0,
            Dist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Dist::LogUniform { lo, hi } => {
                lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::generative(format!("invalid distribution {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Dist::Fixed { value } => value,
            Dist::Normal { mean, sd } => Normal::new(mean, sd)
                .expect("validated hyperparameters")
                .sample(rng),
            Dist::HalfNormal { scale } => Normal::new(0.0, scale)
                .expect("validated hyperparameters")
                .sample(rng)
                .abs(),
            Dist::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..=hi)
                }
            }
            Dist::LogUniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo.ln()..=hi.ln()).exp()
                }
            }
        }
    }

    /// Analytic mean, used by Monte-Carlo oracles in tests.
    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Fixed { value } => value,
            Dist::Normal { mean, .. } => mean,
            Dist::HalfNormal { scale } => scale * (2.0 / PI).sqrt(),
            Dist::Uniform { lo, hi } => 0.5 * (lo + hi),
            Dist::LogUniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    (hi - lo) / (hi / lo).ln()
                }
            }
        }
    }

    /// Analytic standard deviation.
    pub fn sd(&self) -> f64 {
        match *self {
            Dist::Fixed { .. } => 0.0,
            Dist::Normal { sd, .. } => sd,
            Dist::HalfNormal { scale } => scale * (1.0 - 2.0 / PI).sqrt(),
            Dist::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Dist::LogUniform { lo, hi } => {
                if lo == hi {
                    return 0.0;
                }
                let m = self.mean();
                let m2 = (hi * hi - lo * lo) / (2.0 * (hi / lo).ln());
                (m2 - m * m).max(0.0).sqrt()
            }
        }
    }
}

/// Priors over every architectural parameter. All fields have documented
/// defaults and can be overridden individually from a JSON priors file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    /// Maximum |0⟩↔|1⟩ frequency per qubit (GHz).
    pub f_max: Dist,
    /// Accepted band for sampled `f_max`; draws outside are rejected.
    pub f_max_band: (f64, f64),
    /// Anharmonicity η per qubit (GHz, must be negative).
    pub anharmonicity: Dist,
    /// Background relaxation time T1 per qubit (µs, must be positive).
    pub t1_background: Dist,
    /// Readout resonator frequency per qubit (GHz).
    pub readout_freq: Dist,
    /// Quadratic pulse-distortion coefficient per qubit.
    pub distortion: Dist,
    /// Mean number of spectral defects per GHz per qubit.
    pub tls_density: f64,
    /// Defects are placed on `[f_max − below, f_max + above]`.
    pub tls_band_below: f64,
    pub tls_band_above: f64,
    /// Defect half-linewidth (GHz), floored at `tls_linewidth_floor`.
    pub tls_linewidth: Dist,
    pub tls_linewidth_floor: f64,
    /// Peak relaxation rate a defect adds at its center (1/µs).
    pub tls_depth: Dist,
    /// Half-normal scales (GHz) for stray coupling strength by hop distance:
    /// index 0 = directly coupled pairs, 1 = next-nearest, … The list length
    /// sets how far parasitic couplings reach.
    pub coupling_scales: Vec<f64>,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            f_max: Dist::Normal { mean: 6.0, sd: 0.1 },
            f_max_band: (5.0, 7.0),
            // Fabrication spread matters: with identical anharmonicities
            // everywhere, same-transition collisions (01↔01 and 12↔12)
            // would occur at exactly the same detunings and their weight
            // groups would be indistinguishable from benchmark data.
            anharmonicity: Dist::Normal {
                mean: -0.21,
                sd: 0.006,
            },
            t1_background: Dist::LogUniform { lo: 15.0, hi: 40.0 },
            readout_freq: Dist::Normal { mean: 4.6, sd: 0.05 },
            distortion: Dist::HalfNormal { scale: 2e-3 },
            tls_density: 1.5,
            tls_band_below: 1.5,
            tls_band_above: 0.1,
            tls_linewidth: Dist::HalfNormal { scale: 0.015 },
            tls_linewidth_floor: 0.001,
            tls_depth: Dist::HalfNormal { scale: 0.3 },
            coupling_scales: vec![1.0e-2, 3.5e-3, 1.2e-3],
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        for d in [
            &self.f_max,
            &self.anharmonicity,
            &self.t1_background,
            &self.readout_freq,
            &self.distortion,
            &self.tls_linewidth,
            &self.tls_depth,
        ] {
            d.validate()?;
        }
        if self.f_max_band.0 >= self.f_max_band.1 {
            return Err(Error::generative("empty f_max acceptance band"));
        }
        if self.tls_density < 0.0
            || self.tls_band_below < 0.0
            || self.tls_band_above < 0.0
            || self.tls_linewidth_floor <= 0.0
        {
            return Err(Error::generative("negative defect-model hyperparameter"));
        }
        if self.coupling_scales.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::generative("negative stray-coupling scale"));
        }
        Ok(())
    }
}

/// Settings for turning architectural parameters into gridded spectra and
/// gate descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Spectrum grid spacing (GHz).
    pub grid_step: f64,
    /// Grid extends from `min f_max − below` to `max f_max + above`.
    pub grid_margin_below: f64,
    pub grid_margin_above: f64,
    /// Single-qubit and two-qubit gate lengths (µs).
    pub sq_gate_time: f64,
    pub cz_gate_time: f64,
    /// Number of samples along a two-qubit-gate frequency trajectory.
    pub trajectory_points: u32,
    /// Fraction of the gate spent on each linear ramp (hold = 1 − 2·ramp).
    pub ramp_fraction: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            grid_step: 0.002,
            grid_margin_below: 1.2,
            grid_margin_above: 0.2,
            sq_gate_time: 0.025,
            cz_gate_time: 0.034,
            trajectory_points: 32,
            ramp_fraction: 0.25,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 0.002) {
            return Err(Error::generative(
                "grid step must be positive and at most 0.002 GHz",
            ));
        }
        if self.grid_margin_below < 0.0 || self.grid_margin_above < 0.0 {
            return Err(Error::generative("negative grid margin"));
        }
        if !(self.sq_gate_time > 0.0 && self.cz_gate_time > 0.0) {
            return Err(Error::generative("gate times must be positive"));
        }
        if self.trajectory_points < 4 {
            return Err(Error::generative("trajectory needs at least 4 samples"));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 0.5) {
            return Err(Error::generative("ramp fraction must lie in (0, 0.5]"));
        }
        Ok(())
    }
}

/// Everything needed to draw one simulated processor: the processor graph,
/// the RNG seed, priors, and synthesis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub seed: u64,
    pub processor: ProcessorGraph,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
}

impl GenerativeSpec {
    pub fn new(processor: ProcessorGraph, seed: u64) -> GenerativeSpec {
        GenerativeSpec {
            seed,
            processor,
            priors: Priors::default(),
            synthesis: SynthesisConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        self.synthesis.validate()
    }
}

// ====================== Architectural parameters ======================

/// One spectral defect: a Lorentzian relaxation hotspot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsParams {
    /// Center frequency (GHz).
    pub freq: f64,
    /// Half-width at half maximum (GHz).
    pub linewidth: f64,
    /// Added relaxation rate at the center (1/µs).
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub id: QubitId,
    /// Maximum frequency (GHz).
    pub f_max: f64,
    /// Anharmonicity η (GHz, negative).
    pub anharmonicity: f64,
    /// Background relaxation time (µs).
    pub t1_background: f64,
    /// Readout resonator frequency (GHz).
    pub readout_freq: f64,
    /// Quadratic pulse-distortion coefficient.
    pub distortion: f64,
    /// Spectral defects, sorted by center frequency.
    pub tls: Vec<TlsParams>,
}

impl QubitParams {
    /// Relaxation rate at `f`: background plus Lorentzian defect profiles.
    pub fn relaxation_rate(&self, f: f64) -> f64 {
        let mut rate = 1.0 / self.t1_background;
        for t in &self.tls {
            let g2 = t.linewidth * t.linewidth;
            let d = f - t.freq;
            rate += t.depth * g2 / (g2 + d * d);
        }
        rate
    }
}

/// Stray coupling between a pair of qubits `hops` couplers apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCoupling {
    pub a: QubitId,
    pub b: QubitId,
    pub hops: u32,
    /// Coupling strength χ (GHz).
    pub strength: f64,
}

/// One sampled processor: per-qubit circuit/defect parameters plus pairwise
/// stray couplings, with the synthesis settings that turn it into
/// characterization data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitecturalParams {
    /// Sorted by qubit id, covering every qubit of the processor.
    pub qubits: Vec<QubitParams>,
    /// Sorted by `(a, b)`; includes directly coupled pairs at `hops = 1`.
    pub couplings: Vec<PairCoupling>,
    pub synthesis: SynthesisConfig,
}

impl ArchitecturalParams {
    pub fn qubit(&self, id: QubitId) -> Option<&QubitParams> {
        self.qubits
            .binary_search_by_key(&id, |q| q.id)
            .ok()
            .map(|i| &self.qubits[i])
    }

    pub fn validate(&self, g: &ProcessorGraph) -> Result<()> {
        if self.qubits.len() != g.n_qubits() {
            return Err(Error::generative(format!(
                "architectural parameters cover {} qubits, processor has {}",
                self.qubits.len(),
                g.n_qubits()
            )));
        }
        for q in &self.qubits {
            if g.qubit(q.id).is_none() {
                return Err(Error::generative(format!("unknown qubit {}", q.id)));
            }
            if !(q.f_max > 0.0) {
                return Err(Error::generative(format!("qubit {}: f_max ≤ 0", q.id)));
            }
            if !(q.anharmonicity < 0.0) {
                return Err(Error::generative(format!(
                    "qubit {}: anharmonicity must be negative",
                    q.id
                )));
            }
            if !(q.t1_background > 0.0) {
                return Err(Error::generative(format!(
                    "qubit {}: background T1 must be positive",
                    q.id
                )));
            }
            if q.tls.iter().any(|t| !(t.linewidth > 0.0) || t.depth < 0.0) {
                return Err(Error::generative(format!(
                    "qubit {}: defect with non-positive linewidth or negative depth",
                    q.id
                )));
            }
        }
        for c in &self.couplings {
            if g.qubit(c.a).is_none() || g.qubit(c.b).is_none() || c.a >= c.b {
                return Err(Error::generative(format!(
                    "invalid coupling pair ({}, {})",
                    c.a, c.b
                )));
            }
        }
        Ok(())
    }
}

// ====================== Entity RNG streams ======================

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent, reproducible RNG stream for one `(field, entity)` pair.
/// Streams never overlap across fields or entities, so adding defects to one
/// qubit cannot shift another qubit's draws.
fn stream(seed: u64, field: u64, a: u64, b: u64) -> ChaCha8Rng {
    let h = splitmix64(splitmix64(splitmix64(seed ^ field) ^ a.wrapping_add(1)) ^ b.wrapping_add(1));
    ChaCha8Rng::seed_from_u64(h)
}

const FIELD_F_MAX: u64 = 1;
const FIELD_ANHARMONICITY: u64 = 2;
const FIELD_T1_BACKGROUND: u64 = 3;
const FIELD_READOUT: u64 = 4;
const FIELD_DISTORTION: u64 = 5;
const FIELD_TLS: u64 = 6;
const FIELD_COUPLING: u64 = 7;

// ====================== Sampling ======================

/// Draws architectural parameters for every qubit and qubit pair of the
/// spec's processor. Deterministic given `(spec.seed, processor)`; qubits and
/// couplings are conditionally independent given the priors.
pub fn sample_architecture(spec: &GenerativeSpec) -> Result<ArchitecturalParams> {
    spec.validate()?;
    let p = &spec.priors;
    let seed = spec.seed;
    let mut qubits = Vec::with_capacity(spec.processor.n_qubits());
    for q in spec.processor.qubits() {
        let id = q.id as u64;
        let f_max = {
            let mut rng = stream(seed, FIELD_F_MAX, id, 0);
            let (lo, hi) = p.f_max_band;
            let mut draw = p.f_max.sample(&mut rng);
            let mut tries = 1;
            while !(lo..=hi).contains(&draw) {
                if tries >= 64 {
                    return Err(Error::generative(format!(
                        "f_max prior failed to land in [{lo}, {hi}] after {tries} draws"
                    )));
                }
                draw = p.f_max.sample(&mut rng);
                tries += 1;
            }
            draw
        };
        let anharmonicity = p
            .anharmonicity
            .sample(&mut stream(seed, FIELD_ANHARMONICITY, id, 0));
        if !(anharmonicity < 0.0) {
            return Err(Error::generative(format!(
                "anharmonicity prior produced non-negative value {anharmonicity}"
            )));
        }
        let t1_background = p
            .t1_background
            .sample(&mut stream(seed, FIELD_T1_BACKGROUND, id, 0));
        if !(t1_background > 0.0) {
            return Err(Error::generative(format!(
                "background T1 prior produced non-positive value {t1_background}"
            )));
        }
        let readout_freq = p.readout_freq.sample(&mut stream(seed, FIELD_READOUT, id, 0));
        let distortion = p.distortion.sample(&mut stream(seed, FIELD_DISTORTION, id, 0));
        let tls = {
            let mut rng = stream(seed, FIELD_TLS, id, 0);
            let band = p.tls_band_below + p.tls_band_above;
            let lambda = p.tls_density * band;
            let count = if lambda > 0.0 {
                Poisson::new(lambda)
                    .map_err(|e| Error::generative(format!("defect density: {e}")))?
                    .sample(&mut rng) as usize
            } else {
                0
            };
            let mut tls = Vec::with_capacity(count);
            for _ in 0..count {
                let freq = rng.gen_range(f_max - p.tls_band_below..=f_max + p.tls_band_above);
                let linewidth = p.tls_linewidth.sample(&mut rng).max(p.tls_linewidth_floor);
                let depth = p.tls_depth.sample(&mut rng);
                tls.push(TlsParams {
                    freq,
                    linewidth,
                    depth,
                });
            }
            tls.sort_by(|a, b| a.freq.total_cmp(&b.freq));
            tls
        };
        qubits.push(QubitParams {
            id: q.id,
            f_max,
            anharmonicity,
            t1_background,
            readout_freq,
            distortion,
            tls,
        });
    }
    let range = p.coupling_scales.len() as u32;
    let mut couplings = Vec::new();
    for (a, b, hops) in spec.processor.pairs_within_hops(range) {
        let scale = p.coupling_scales[(hops - 1) as usize];
        let strength = Dist::HalfNormal { scale }
            .sample(&mut stream(seed, FIELD_COUPLING, a as u64, b as u64));
        couplings.push(PairCoupling {
            a,
            b,
            hops,
            strength,
        });
    }
    let arch = ArchitecturalParams {
        qubits,
        couplings,
        synthesis: spec.synthesis.clone(),
    };
    arch.validate(&spec.processor)?;
    Ok(arch)
}

// ====================== Characterization data ======================

/// Uniform frequency grid shared by every spectrum of a processor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    /// First grid frequency (GHz).
    pub start: f64,
    /// Spacing (GHz).
    pub step: f64,
    pub len: usize,
}

impl FrequencyGrid {
    pub fn value(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn end(&self) -> f64 {
        self.value(self.len - 1)
    }

    /// Clamped linear interpolation of `values` (one per grid point) at `f`.
    pub fn lerp(&self, values: &[f64], f: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len);
        let x = (f - self.start) / self.step;
        if x <= 0.0 {
            return values[0];
        }
        let last = self.len - 1;
        if x >= last as f64 {
            return values[last];
        }
        let i = x as usize;
        let frac = x - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }

    /// Grids are comparable when they share the step and their offsets are
    /// congruent modulo the step; spans may differ.
    fn comparable(&self, other: &FrequencyGrid) -> bool {
        if (self.step - other.step).abs() > 1e-12 {
            return false;
        }
        let shift = (other.start - self.start) / self.step;
        (shift - shift.round()).abs() < 1e-6
    }
}

/// Shape of a two-qubit-gate frequency excursion: linear ramp to the
/// interaction point, hold, linear ramp back, discretized to `points`
/// samples uniform in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryShape {
    pub a: QubitId,
    pub b: QubitId,
    pub points: u32,
    pub ramp_fraction: f64,
}

impl TrajectoryShape {
    /// Frequency at normalized time `t ∈ [0, 1]` for a qubit excursing from
    /// `idle` to `endpoint`.
    pub fn freq_at(&self, t: f64, idle: f64, endpoint: f64) -> f64 {
        let r = self.ramp_fraction;
        if t < r {
            idle + (endpoint - idle) * (t / r)
        } else if t <= 1.0 - r {
            endpoint
        } else {
            idle + (endpoint - idle) * ((1.0 - t) / r)
        }
    }

    /// The discretized trajectory samples.
    pub fn sample_path(&self, idle: f64, endpoint: f64) -> Vec<f64> {
        let n = self.points as usize;
        (0..n)
            .map(|k| self.freq_at(k as f64 / (n - 1) as f64, idle, endpoint))
            .collect()
    }

    /// Trapezoidal time average of `f` along the trajectory; multiplying by
    /// the gate length gives the time integral.
    pub fn time_average(&self, idle: f64, endpoint: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let n = self.points as usize;
        let mut acc = 0.0;
        for k in 0..n {
            let v = f(self.freq_at(k as f64 / (n - 1) as f64, idle, endpoint));
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += w * v;
        }
        acc / (n - 1) as f64
    }
}

/// Per-qubit characterization: scalars plus spectra on the common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCharacterization {
    pub id: QubitId,
    pub f_max: f64,
    pub anharmonicity: f64,
    pub readout_freq: f64,
    pub distortion: f64,
    /// Relaxation rate T1⁻¹ on the grid (1/µs).
    pub relaxation_rate: Vec<f64>,
    /// Flux sensitivity |df/dφ| on the grid (GHz per flux quantum).
    pub flux_sensitivity: Vec<f64>,
}

/// The measured view of a processor that the error model consumes: gridded
/// spectra per qubit, stray couplings per pair, a trajectory descriptor per
/// coupler, and gate lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationData {
    pub grid: FrequencyGrid,
    /// Gate lengths (µs).
    pub sq_gate_time: f64,
    pub cz_gate_time: f64,
    /// Sorted by qubit id, aligned with the processor's qubit order.
    pub qubits: Vec<QubitCharacterization>,
    /// Stray couplings for all parasitic pairs, sorted by `(a, b)`.
    pub couplings: Vec<PairCoupling>,
    /// One trajectory descriptor per coupler, sorted by `(a, b)`.
    pub trajectories: Vec<TrajectoryShape>,
}

impl CharacterizationData {
    pub fn qubit_index(&self, id: QubitId) -> Option<usize> {
        self.qubits.binary_search_by_key(&id, |q| q.id).ok()
    }

    pub fn qubit(&self, id: QubitId) -> Option<&QubitCharacterization> {
        self.qubit_index(id).map(|i| &self.qubits[i])
    }

    /// Interpolated relaxation rate of qubit index `idx` at `f` (1/µs).
    pub fn relax_rate_at(&self, idx: usize, f: f64) -> f64 {
        self.grid.lerp(&self.qubits[idx].relaxation_rate, f)
    }

    /// Interpolated flux sensitivity of qubit index `idx` at `f`. Exactly 0
    /// at and above the qubit's sweet spot regardless of grid placement.
    pub fn sensitivity_at(&self, idx: usize, f: f64) -> f64 {
        let q = &self.qubits[idx];
        if f >= q.f_max {
            return 0.0;
        }
        self.grid.lerp(&q.flux_sensitivity, f)
    }

    pub fn trajectory(&self, a: QubitId, b: QubitId) -> Option<&TrajectoryShape> {
        let pair = if a < b { (a, b) } else { (b, a) };
        self.trajectories
            .binary_search_by_key(&pair, |t| (t.a, t.b))
            .ok()
            .map(|i| &self.trajectories[i])
    }

    /// Checks qubit coverage and ordering against a processor.
    pub fn validate_against(&self, g: &ProcessorGraph) -> Result<()> {
        if self.qubits.len() != g.n_qubits()
            || self
                .qubits
                .iter()
                .zip(g.qubits())
                .any(|(c, q)| c.id != q.id)
        {
            return Err(Error::generative(
                "characterization does not cover the processor's qubits",
            ));
        }
        if self.grid.len < 2 {
            return Err(Error::generative("spectrum grid needs at least 2 points"));
        }
        for q in &self.qubits {
            if q.relaxation_rate.len() != self.grid.len
                || q.flux_sensitivity.len() != self.grid.len
            {
                return Err(Error::generative(format!(
                    "qubit {}: spectrum length does not match the grid",
                    q.id
                )));
            }
        }
        for t in g.couplers() {
            if self.trajectory(t.0, t.1).is_none() {
                return Err(Error::generative(format!(
                    "missing trajectory for coupler ({}, {})",
                    t.0, t.1
                )));
            }
        }
        Ok(())
    }
}

/// Derives characterization data from architectural parameters: relaxation
/// spectra as background plus Lorentzian defects, flux sensitivities from the
/// tuning-curve model, and a ramp–hold–ramp trajectory per coupler. The
/// deterministic second stage of generation — no randomness here.
pub fn synthesize_characterization(
    arch: &ArchitecturalParams,
    g: &ProcessorGraph,
) -> Result<CharacterizationData> {
    arch.validate(g)?;
    arch.synthesis.validate()?;
    let s = &arch.synthesis;
    let f_lo = arch
        .qubits
        .iter()
        .map(|q| q.f_max)
        .fold(f64::INFINITY, f64::min)
        - s.grid_margin_below;
    let f_hi = arch
        .qubits
        .iter()
        .map(|q| q.f_max)
        .fold(f64::NEG_INFINITY, f64::max)
        + s.grid_margin_above;
    // Align the grid to integer multiples of the step so equal-parameter
    // processors produce bit-identical grids.
    let i_lo = (f_lo / s.grid_step).floor() as i64;
    let i_hi = (f_hi / s.grid_step).ceil() as i64;
    let grid = FrequencyGrid {
        start: i_lo as f64 * s.grid_step,
        step: s.grid_step,
        len: (i_hi - i_lo + 1) as usize,
    };
    let qubits = arch
        .qubits
        .iter()
        .map(|q| {
            let relaxation_rate = (0..grid.len)
                .map(|i| q.relaxation_rate(grid.value(i)))
                .collect();
            let flux_sensitivity = (0..grid.len)
                .map(|i| flux_sensitivity(q.f_max, grid.value(i)))
                .collect();
            QubitCharacterization {
                id: q.id,
                f_max: q.f_max,
                anharmonicity: q.anharmonicity,
                readout_freq: q.readout_freq,
                distortion: q.distortion,
                relaxation_rate,
                flux_sensitivity,
            }
        })
        .collect();
    let trajectories = g
        .couplers()
        .iter()
        .map(|&(a, b)| TrajectoryShape {
            a,
            b,
            points: s.trajectory_points,
            ramp_fraction: s.ramp_fraction,
        })
        .collect();
    let data = CharacterizationData {
        grid,
        sq_gate_time: s.sq_gate_time,
        cz_gate_time: s.cz_gate_time,
        qubits,
        couplings: arch.couplings.clone(),
        trajectories,
    };
    data.validate_against(g)?;
    Ok(data)
}

/// Convenience for the full chain: sample architecture, then synthesize.
pub fn generate(spec: &GenerativeSpec) -> Result<CharacterizationData> {
    let arch = sample_architecture(spec)?;
    synthesize_characterization(&arch, &spec.processor)
}

// ====================== Statistical comparison ======================

/// Options for [`validate_statistics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatOptions {
    /// Two-sample z-score above which a statistic fails.
    pub threshold: f64,
    /// Number of equal frequency bands for relaxation statistics.
    pub bands: usize,
    /// Detunings below f_max (GHz) at which flux-sensitivity envelopes are
    /// compared.
    pub detunings: Vec<f64>,
    /// A grid point counts as a spectral peak when it is a local maximum
    /// exceeding the qubit's minimum rate by this much (1/µs).
    pub peak_prominence: f64,
}

impl Default for StatOptions {
    fn default() -> Self {
        StatOptions {
            threshold: 4.5,
            bands: 4,
            detunings: vec![0.1, 0.3, 0.5],
            peak_prominence: 0.05,
        }
    }
}

/// One two-sample statistic with its z-score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatCheck {
    pub name: String,
    pub value_a: f64,
    pub value_b: f64,
    pub z: f64,
    pub pass: bool,
}

/// Result of comparing two characterizations statistic by statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub threshold: f64,
    pub checks: Vec<StatCheck>,
}

impl StatReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.checks.is_empty() {
            return 1.0;
        }
        self.checks.iter().filter(|c| c.pass).count() as f64 / self.checks.len() as f64
    }

    pub fn check(&self, name: &str) -> Option<&StatCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn welch_z(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let se = (sa * sa / a.len() as f64 + sb * sb / b.len() as f64).sqrt();
    let z = if se == 0.0 {
        if (ma - mb).abs() < 1e-15 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (ma - mb).abs() / se
    };
    (ma, mb, z)
}

fn count_peaks(r: &[f64], prominence: f64) -> usize {
    let floor = r.iter().copied().fold(f64::INFINITY, f64::min) + prominence;
    (1..r.len().saturating_sub(1))
        .filter(|&i| r[i] > r[i - 1] && r[i] > r[i + 1] && r[i] >= floor)
        .count()
}

/// Compares two characterizations through two-sample summary statistics:
/// per-band relaxation-rate means and spreads, spectral peak density, and
/// flux-sensitivity envelopes at fixed detunings. Each statistic gets a
/// z-score; a statistic passes when `z ≤ threshold`. Identical inputs pass
/// everything; grossly different defect densities fail the peak-density
/// statistic.
pub fn validate_statistics(
    a: &CharacterizationData,
    b: &CharacterizationData,
    opts: &StatOptions,
) -> Result<StatReport> {
    if !a.grid.comparable(&b.grid) {
        return Err(Error::generative(
            "characterizations use different spectrum grids",
        ));
    }
    if a.qubits.is_empty() || b.qubits.is_empty() {
        return Err(Error::generative("empty characterization"));
    }
    // Banded statistics are computed over the grids' overlapping window.
    let step = a.grid.step;
    let ov_start = a.grid.start.max(b.grid.start);
    let ov_end = a.grid.end().min(b.grid.end());
    let len = ((ov_end - ov_start) / step).round() as i64 + 1;
    if len < 2 * opts.bands.max(1) as i64 {
        return Err(Error::generative("spectrum grids barely overlap"));
    }
    let len = len as usize;
    let off_a = ((ov_start - a.grid.start) / step).round() as usize;
    let off_b = ((ov_start - b.grid.start) / step).round() as usize;
    let mut checks = Vec::new();
    let mut push = |name: String, va: f64, vb: f64, z: f64| {
        checks.push(StatCheck {
            name,
            value_a: va,
            value_b: vb,
            z,
            pass: z <= opts.threshold,
        });
    };
    let band_edges: Vec<usize> = (0..=opts.bands)
        .map(|k| k * (len - 1) / opts.bands)
        .collect();
    for band in 0..opts.bands {
        let (lo, hi) = (band_edges[band], band_edges[band + 1].max(band_edges[band] + 1));
        let band_means = |d: &CharacterizationData, off: usize| -> Vec<f64> {
            d.qubits
                .iter()
                .map(|q| {
                    let s = &q.relaxation_rate[off + lo..=off + hi];
                    s.iter().sum::<f64>() / s.len() as f64
                })
                .collect()
        };
        let ba = band_means(a, off_a);
        let bb = band_means(b, off_b);
        let (ma, mb, z) = welch_z(&ba, &bb);
        let f_lo = ov_start + lo as f64 * step;
        let f_hi = ov_start + hi as f64 * step;
        push(format!("relaxation mean, {f_lo:.2}-{f_hi:.2} GHz"), ma, mb, z);

        // Spread of per-qubit band means, compared on a log scale where the
        // sampling error of a variance is approximately normal.
        let (_, sa) = mean_sd(&ba);
        let (_, sb) = mean_sd(&bb);
        let (va, vb) = (sa * sa, sb * sb);
        let z = if va == 0.0 || vb == 0.0 {
            if (va - vb).abs() < 1e-30 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            let se = (2.0 / (ba.len() as f64 - 1.0) + 2.0 / (bb.len() as f64 - 1.0)).sqrt();
            (va / vb).ln().abs() / se
        };
        push(format!("relaxation spread, {f_lo:.2}-{f_hi:.2} GHz"), va, vb, z);
    }
    // Spectral peak density per GHz of the overlap window, compared as
    // Poisson rates.
    let span = (len - 1) as f64 * step;
    let peaks_a: usize = a
        .qubits
        .iter()
        .map(|q| count_peaks(&q.relaxation_rate[off_a..off_a + len], opts.peak_prominence))
        .sum();
    let peaks_b: usize = b
        .qubits
        .iter()
        .map(|q| count_peaks(&q.relaxation_rate[off_b..off_b + len], opts.peak_prominence))
        .sum();
    let la = span * a.qubits.len() as f64;
    let lb = span * b.qubits.len() as f64;
    let (ra, rb) = (peaks_a as f64 / la, peaks_b as f64 / lb);
    let se = (ra / la + rb / lb).sqrt();
    let z = if se == 0.0 {
        if (ra - rb).abs() < 1e-15 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (ra - rb).abs() / se
    };
    push("spectral peak density".to_string(), ra, rb, z);
    for &d in &opts.detunings {
        let env = |data: &CharacterizationData| -> Vec<f64> {
            data.qubits
                .iter()
                .enumerate()
                .map(|(i, q)| data.sensitivity_at(i, q.f_max - d))
                .collect()
        };
        let (ma, mb, z) = welch_z(&env(a), &env(b));
        push(format!("flux sensitivity at {d:.1} GHz detuning"), ma, mb, z);
    }
    Ok(StatReport {
        threshold: opts.threshold,
        checks,
    })
}

// ====================== Tests ======================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_surface_code_lattice;
    use approx::assert_relative_eq;

    fn test_spec(d: u32, seed: u64) -> GenerativeSpec {
        GenerativeSpec::new(build_surface_code_lattice(d).unwrap(), seed)
    }

    #[test]
    fn dist_moments_match_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dists = [
            Dist::Normal { mean: 6.0, sd: 0.1 },
            Dist::HalfNormal { scale: 0.3 },
            Dist::Uniform { lo: 2.0, hi: 5.0 },
            Dist::LogUniform { lo: 10.0, hi: 25.0 },
        ];
        let n = 4000;
        for d in dists {
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let (m, s) = mean_sd(&xs);
            let se = d.sd() / (n as f64).sqrt();
            assert!(
                (m - d.mean()).abs() < 4.0 * se,
                "{d:?}: mean {m} vs {}",
                d.mean()
            );
            assert!((s - d.sd()).abs() / d.sd() < 0.1, "{d:?}: sd {s} vs {}", d.sd());
        }
    }

    #[test]
    fn zero_variance_priors_degenerate() {
        let mut spec = test_spec(3, 5);
        spec.priors = Priors {
            f_max: Dist::Fixed { value: 6.0 },
            anharmonicity: Dist::Fixed { value: -0.21 },
            t1_background: Dist::Fixed { value: 15.0 },
            readout_freq: Dist::Fixed { value: 4.6 },
            distortion: Dist::Fixed { value: 8e-4 },
            tls_density: 0.0,
            coupling_scales: vec![0.0],
            ..Priors::default()
        };
        let arch = sample_architecture(&spec).unwrap();
        for q in &arch.qubits {
            assert_eq!(q.f_max, 6.0);
            assert_eq!(q.anharmonicity, -0.21);
            assert_eq!(q.t1_background, 15.0);
            assert_eq!(q.readout_freq, 4.6);
            assert_eq!(q.distortion, 8e-4);
            assert!(q.tls.is_empty());
        }
        for c in &arch.couplings {
            assert_eq!(c.strength, 0.0);
        }
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let spec = test_spec(3, 42);
        let a = serde_json::to_string(&generate(&spec).unwrap()).unwrap();
        let b = serde_json::to_string(&generate(&spec).unwrap()).unwrap();
        assert_eq!(a, b, "identical spec and seed must give identical bytes");
        let c = serde_json::to_string(&generate(&test_spec(3, 43)).unwrap()).unwrap();
        assert_ne!(a, c, "different seeds must give different data");
    }

    #[test]
    fn f_max_rejection_respects_band() {
        let mut spec = test_spec(3, 9);
        spec.priors.f_max = Dist::Normal { mean: 5.1, sd: 0.4 };
        let arch = sample_architecture(&spec).unwrap();
        for q in &arch.qubits {
            assert!((5.0..=7.0).contains(&q.f_max));
        }
        // A prior that can never land in the band errors instead of spinning.
        spec.priors.f_max = Dist::Fixed { value: 4.0 };
        assert!(sample_architecture(&spec).is_err());
    }

    #[test]
    fn flux_model_shapes() {
        let f_max = 6.05;
        assert_eq!(flux_frequency(f_max, 0.0), f_max);
        assert_eq!(flux_sensitivity(f_max, f_max), 0.0);
        assert_eq!(flux_sensitivity(f_max, f_max + 0.3), 0.0);
        // Round trip through the inverse.
        for f in [3.0, 4.5, 5.2, 6.0, f_max] {
            let phi = flux_phase(f_max, f).unwrap();
            assert_relative_eq!(flux_frequency(f_max, phi), f, max_relative = 1e-12);
        }
        // Monotone growth with detuning below f_max.
        let mut last = 0.0;
        for k in 1..200 {
            let f = f_max - 0.004 * k as f64;
            let s = flux_sensitivity(f_max, f);
            assert!(s > last, "sensitivity must grow with detuning");
            last = s;
        }
        assert!(flux_phase(f_max, 0.0).is_err());
        assert!(flux_phase(f_max, f_max + 0.1).is_err());
    }

    /// Numerically differentiating the tuning curve and mapping through its
    /// inverse must reproduce the closed-form sensitivity.
    #[test]
    fn flux_sensitivity_matches_numeric_derivative() {
        let f_max = 5.93;
        let h = 1e-7;
        let mut f = 3.0;
        while f < f_max - 1e-3 {
            let phi = flux_phase(f_max, f).unwrap();
            let numeric =
                ((flux_frequency(f_max, phi + h) - flux_frequency(f_max, phi - h)) / (2.0 * h))
                    .abs();
            let analytic = flux_sensitivity(f_max, f);
            assert_relative_eq!(numeric, analytic, max_relative = 1e-6);
            f += 0.013;
        }
    }

    #[test]
    fn spectrum_background_and_defect_peak() {
        let q = QubitParams {
            id: 0,
            f_max: 6.0,
            anharmonicity: -0.21,
            t1_background: 20.0,
            readout_freq: 4.6,
            distortion: 0.0,
            tls: vec![],
        };
        // No defects: flat at the background rate.
        for f in [4.8, 5.5, 6.2] {
            assert_relative_eq!(q.relaxation_rate(f), 0.05, max_relative = 1e-12);
        }
        // One defect: background + depth exactly at the center.
        let q = QubitParams {
            tls: vec![TlsParams {
                freq: 5.7,
                linewidth: 0.012,
                depth: 0.31,
            }],
            ..q
        };
        assert_relative_eq!(q.relaxation_rate(5.7), 0.05 + 0.31, max_relative = 1e-12);
        // Half depth at one linewidth of detuning.
        assert_relative_eq!(
            q.relaxation_rate(5.7 + 0.012) - 0.05,
            0.31 / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn synthesized_spectra_are_physical() {
        for seed in 0..20 {
            let spec = test_spec(3, seed);
            let arch = sample_architecture(&spec).unwrap();
            let data = synthesize_characterization(&arch, &spec.processor).unwrap();
            assert!(data.grid.step <= 0.002 + 1e-15);
            for (q, params) in data.qubits.iter().zip(&arch.qubits) {
                let bg = 1.0 / params.t1_background;
                for &r in &q.relaxation_rate {
                    assert!(r >= bg - 1e-12, "rate below background");
                }
                // Sensitivity: zero at and above f_max, non-increasing as the
                // grid ascends toward f_max.
                let mut prev = f64::INFINITY;
                for (i, &s) in q.flux_sensitivity.iter().enumerate() {
                    let f = data.grid.value(i);
                    assert!(s >= 0.0);
                    if f >= q.f_max {
                        assert_eq!(s, 0.0);
                    } else {
                        assert!(s <= prev);
                        prev = s;
                    }
                }
            }
        }
    }

    #[test]
    fn synthesized_grid_covers_operating_band_uniformly() {
        let spec = test_spec(3, 7);
        let data = generate(&spec).unwrap();
        let f_lo = data.qubits.iter().map(|q| q.f_max).fold(f64::INFINITY, f64::min);
        let f_hi = data
            .qubits
            .iter()
            .map(|q| q.f_max)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(data.grid.start <= f_lo - 1.2);
        assert!(data.grid.end() >= f_hi + 0.2);
        // Interpolation at a grid point returns the stored value exactly.
        let idx = data.grid.len / 2;
        let f = data.grid.value(idx);
        assert_eq!(
            data.relax_rate_at(0, f),
            data.qubits[0].relaxation_rate[idx]
        );
        // Clamping beyond the ends.
        assert_eq!(
            data.relax_rate_at(0, data.grid.start - 1.0),
            data.qubits[0].relaxation_rate[0]
        );
    }

    #[test]
    fn trajectory_shape_and_average() {
        let t = TrajectoryShape {
            a: 0,
            b: 1,
            points: 32,
            ramp_fraction: 0.25,
        };
        let path = t.sample_path(6.0, 5.6);
        assert_eq!(path.len(), 32);
        assert_eq!(path[0], 6.0);
        assert_eq!(path[31], 6.0);
        let mid = path[15];
        assert_eq!(mid, 5.6, "hold plateau sits at the endpoint");
        for w in path.windows(2) {
            assert!((w[0] - w[1]).abs() <= (6.0 - 5.6) / (0.25 * 31.0) + 1e-12);
        }
        // Average of a constant is that constant; average frequency lies
        // between idle and endpoint, closer to the held endpoint.
        assert_relative_eq!(t.time_average(6.0, 5.6, |_| 3.5), 3.5, max_relative = 1e-12);
        let avg_f = t.time_average(6.0, 5.6, |f| f);
        assert!(avg_f > 5.6 && avg_f < 6.0);
        assert!((avg_f - 5.7) < 0.05, "hold dominates the average: {avg_f}");
    }

    #[test]
    fn tls_counts_are_poisson_consistent() {
        // One large processor gives 481 independent qubit draws.
        let spec = test_spec(16, 123);
        let arch = sample_architecture(&spec).unwrap();
        let n = arch.qubits.len();
        assert!(n >= 500, "need a large sample, got {n}");
        let lambda = spec.priors.tls_density * (spec.priors.tls_band_below + spec.priors.tls_band_above);
        let max_k = 7usize;
        let mut observed = vec![0.0; max_k + 1];
        for q in &arch.qubits {
            observed[q.tls.len().min(max_k)] += 1.0;
        }
        let mut pmf = vec![0.0; max_k + 1];
        let mut p = (-lambda).exp();
        for (k, slot) in pmf.iter_mut().enumerate().take(max_k) {
            *slot = p;
            p *= lambda / (k + 1) as f64;
        }
        pmf[max_k] = 1.0 - pmf[..max_k].iter().sum::<f64>();
        let chi2: f64 = observed
            .iter()
            .zip(&pmf)
            .map(|(o, p)| {
                let e = p * n as f64;
                (o - e).powi(2) / e
            })
            .sum();
        // 99.9th percentile of χ² with 7 degrees of freedom.
        assert!(chi2 < 24.32, "χ² = {chi2}");
    }

    #[test]
    fn statistics_identity_passes() {
        let data = generate(&test_spec(4, 3)).unwrap();
        let report = validate_statistics(&data, &data, &StatOptions::default()).unwrap();
        assert!(report.all_pass(), "identity comparison must pass: {report:?}");
        for c in &report.checks {
            assert_eq!(c.z, 0.0, "{}", c.name);
        }
    }

    #[test]
    fn statistics_seed_pairs_mostly_pass() {
        let mut passes = 0;
        let mut total = 0;
        for seed in 0..20u64 {
            let a = generate(&test_spec(3, 1000 + seed)).unwrap();
            let b = generate(&test_spec(3, 2000 + seed)).unwrap();
            let report = validate_statistics(&a, &b, &StatOptions::default()).unwrap();
            passes += report.checks.iter().filter(|c| c.pass).count();
            total += report.checks.len();
        }
        assert!(total > 0);
        let rate = passes as f64 / total as f64;
        assert!(rate >= 0.9, "pass rate {rate} over {total} statistics");
    }

    #[test]
    fn statistics_catch_defect_density_contrast() {
        let base = test_spec(3, 77);
        let mut dense = test_spec(3, 78);
        dense.priors.tls_density = 15.0;
        // Equalize grids by pinning f_max so the comparison is well-posed.
        let mut base = base;
        base.priors.f_max = Dist::Fixed { value: 6.0 };
        dense.priors.f_max = Dist::Fixed { value: 6.0 };
        let a = generate(&base).unwrap();
        let b = generate(&dense).unwrap();
        let report = validate_statistics(&a, &b, &StatOptions::default()).unwrap();
        let density = report.check("spectral peak density").unwrap();
        assert!(!density.pass, "10× defect density must fail: {density:?}");
    }

    #[test]
    fn statistics_reject_mismatched_grids() {
        let a = generate(&test_spec(3, 5)).unwrap();
        let mut spec = test_spec(3, 5);
        spec.synthesis.grid_step = 0.001;
        let b = generate(&spec).unwrap();
        assert!(validate_statistics(&a, &b, &StatOptions::default()).is_err());
    }

    #[test]
    fn spec_and_characterization_round_trip() {
        let spec = test_spec(2, 1);
        let json = serde_json::to_string(&spec).unwrap();
        let back: GenerativeSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        // Partial priors files fill the rest from defaults.
        let priors: Priors = serde_json::from_str(r#"{"tls_density": 3.0}"#).unwrap();
        assert_eq!(priors.tls_density, 3.0);
        assert_eq!(priors.f_max, Priors::default().f_max);

        let data = generate(&spec).unwrap();
        let json = serde_json::to_string(&data).unwrap();
        let back: CharacterizationData = serde_json::from_str(&json).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn coupling_strengths_follow_distance_classes() {
        let spec = test_spec(5, 17);
        let arch = sample_architecture(&spec).unwrap();
        let by_hops = |h: u32| -> Vec<f64> {
            arch.couplings
                .iter()
                .filter(|c| c.hops == h)
                .map(|c| c.strength)
                .collect()
        };
        for h in 1..=3u32 {
            let xs = by_hops(h);
            assert!(!xs.is_empty());
            let scale = spec.priors.coupling_scales[(h - 1) as usize];
            let (m, _) = mean_sd(&xs);
            let expect = Dist::HalfNormal { scale }.mean();
            assert!(
                (m - expect).abs() < 4.0 * scale / (xs.len() as f64).sqrt() + 0.2 * scale,
                "hop {h}: mean {m} vs {expect}"
            );
            for x in xs {
                assert!(x >= 0.0);
            }
        }
        // Directly coupled pairs match the processor's couplers.
        let hop1: Vec<(QubitId, QubitId)> = arch
            .couplings
            .iter()
            .filter(|c| c.hops == 1)
            .map(|c| (c.a, c.b))
            .collect();
        assert_eq!(hop1, spec.processor.couplers());
    }
}
