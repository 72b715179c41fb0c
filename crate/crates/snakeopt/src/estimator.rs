//! The decomposable error model: a weighted sum of per-gate, per-mechanism
//! error components over the gate-variable graph.
//!
//! Total predicted error is `E(F) = Σ_gate Σ_mechanism w · ε(F_deps)`, where
//! each component's kernel `ε` depends only on a small dependency set of
//! frequency variables (one or two) and each component is assigned to one of
//! a small number of *tied weight groups* — the only trainable capacity of
//! the model. Mechanisms:
//!
//! * **Relaxation**: gate time × interpolated T1⁻¹ at the operating
//!   frequency; two-qubit gates integrate the rate along the ramp–hold–ramp
//!   trajectory, once per qubit per transition branch.
//! * **Dephasing**: gate time × flux sensitivity, zero at the sweet spot；
//!   trajectory-averaged for two-qubit gates.
//! * **Stray coupling**: a unit-peak Lorentzian `χ²/(χ² + Δ²)` per collision
//!   channel between two parasitically coupled gates, evaluated at the
//!   channel's shifted detuning. Four channels per gate pair (|0⟩↔|1⟩ and
//!   |1⟩↔|2⟩ on each side); a component is emitted from each side so every
//!   gate's error budget sees the collisions it suffers.
//! * **Pulse distortion**: quadratic in each qubit's excursion from idle to
//!   its two-qubit-gate endpoint.
//!
//! Which gate pairs can collide follows the four-layer circuit structure:
//! single-qubit gates all run concurrently; two-qubit gates collide with
//! same-layer gates and with spectator qubits idling through their layer. An
//! *arbitrary-algorithm* flag widens this to all parasitically coupled
//! combinations for algorithm-agnostic optimization.
//!
//! [`EvalCache`] supports incremental re-evaluation after a few variables
//! change, recomputing only the touched components; [`hard_bounds`] derives
//! each variable's allowed interval; [`predict_benchmarks`] maps component
//! sums to per-qubit and per-pair benchmark error predictions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{CharacterizationData, TrajectoryShape};
use crate::topology::{GateVar, GateVariableGraph, LayerColoring, QubitId, VarId};

// ====================== Mechanisms and flags ======================

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Relaxation,
    Dephasing,
    StrayCoupling,
    PulseDistortion,
}

/// Which error mechanisms the estimator models, plus the algorithm-structure
/// switch for stray coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MitigationFlags {
    pub relaxation: bool,
    pub dephasing: bool,
    pub stray_coupling: bool,
    pub pulse_distortion: bool,
    /// Emit stray-coupling components for every parasitically coupled gate
    /// combination instead of only circuit-concurrent ones.
    pub arbitrary_algorithm: bool,
}

impl Default for MitigationFlags {
    fn default() -> Self {
        MitigationFlags::all()
    }
}

impl MitigationFlags {
    pub fn all() -> Self {
        MitigationFlags {
            relaxation: true,
            dephasing: true,
            stray_coupling: true,
            pulse_distortion: true,
            arbitrary_algorithm: false,
        }
    }

    pub fn none() -> Self {
        MitigationFlags {
            relaxation: false,
            dephasing: false,
            stray_coupling: false,
            pulse_distortion: false,
            arbitrary_algorithm: false,
        }
    }

    pub fn has(&self, m: Mechanism) -> bool {
        match m {
            Mechanism::Relaxation => self.relaxation,
            Mechanism::Dephasing => self.dephasing,
            Mechanism::StrayCoupling => self.stray_coupling,
            Mechanism::PulseDistortion => self.pulse_distortion,
        }
    }

    /// The 16 mechanism subsets (arbitrary-algorithm off), for mitigation
    /// sweeps; index bit order: relaxation, dephasing, stray, distortion.
    pub fn subsets() -> Vec<MitigationFlags> {
        (0..16u8)
            .map(|bits| MitigationFlags {
                relaxation: bits & 1 != 0,
                dephasing: bits & 2 != 0,
                stray_coupling: bits & 4 != 0,
                pulse_distortion: bits & 8 != 0,
                arbitrary_algorithm: false,
            })
            .collect()
    }
}

// ====================== Weight table ======================

/// Names of the tied weight groups, in stable index order. Collision groups
/// are split by the unordered pair of transitions involved (`g01`/`g12`).
pub const GROUP_NAMES: [&str; 14] = [
    "sq.relaxation",
    "sq.dephasing",
    "sq.stray.g01_g01",
    "sq.stray.g01_g12",
    "sq.stray.g12_g12",
    "cz.relaxation",
    "cz.dephasing",
    "cz.stray.cz_cz.g01_g01",
    "cz.stray.cz_cz.g01_g12",
    "cz.stray.cz_cz.g12_g12",
    "cz.stray.cz_sq.g01_g01",
    "cz.stray.cz_sq.g01_g12",
    "cz.stray.cz_sq.g12_g12",
    "cz.distortion",
];

pub const G_SQ_RELAX: usize = 0;
pub const G_SQ_DEPHASE: usize = 1;
pub const G_SQ_STRAY: usize = 2;
pub const G_CZ_RELAX: usize = 5;
pub const G_CZ_DEPHASE: usize = 6;
pub const G_CZ_CZ_STRAY: usize = 7;
pub const G_CZ_SQ_STRAY: usize = 10;
pub const G_CZ_DISTORTION: usize = 13;

/// Group indices fit against isolated benchmarks (relaxation + dephasing);
/// the rest are fit against parallel benchmarks with these frozen.
pub const ISOLATED_GROUPS: [usize; 4] = [G_SQ_RELAX, G_SQ_DEPHASE, G_CZ_RELAX, G_CZ_DEPHASE];

/// The trainable capacity of the estimator: one nonnegative weight per tied
/// group. Far fewer groups than components keeps the model identifiable from
/// a modest number of benchmark measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    values: Vec<f64>,
    trained: bool,
}

impl WeightTable {
    /// Hand-calibrated reference weights, flagged untrained. These serve as
    /// training anchors and as defaults when no trained table is supplied.
    pub fn reference() -> WeightTable {
        let mut values = vec![0.0; GROUP_NAMES.len()];
        values[G_SQ_RELAX] = 0.5;
        values[G_SQ_DEPHASE] = 1.5e-2;
        for c in 0..3 {
            values[G_SQ_STRAY + c] = 5e-3;
            values[G_CZ_CZ_STRAY + c] = 5e-3;
            values[G_CZ_SQ_STRAY + c] = 5e-3;
        }
        values[G_CZ_RELAX] = 0.5;
        values[G_CZ_DEPHASE] = 7e-3;
        values[G_CZ_DISTORTION] = 1.0;
        WeightTable {
            values,
            trained: false,
        }
    }

    pub fn zeros() -> WeightTable {
        WeightTable {
            values: vec![0.0; GROUP_NAMES.len()],
            trained: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, group: usize) -> f64 {
        self.values[group]
    }

    pub fn set_value(&mut self, group: usize, w: f64) {
        assert!(w >= 0.0 && w.is_finite(), "weights must be finite and ≥ 0");
        self.values[group] = w;
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        GROUP_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, w: f64) -> Result<()> {
        match GROUP_NAMES.iter().position(|n| *n == name) {
            Some(i) => {
                self.set_value(i, w);
                Ok(())
            }
            None => Err(Error::estimator(format!("unknown weight group {name:?}"))),
        }
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn mark_trained(&mut self) {
        self.trained = true;
    }
}

#[derive(Serialize, Deserialize)]
struct WeightTableFile {
    trained: bool,
    weights: BTreeMap<String, f64>,
}

impl Serialize for WeightTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WeightTableFile {
            trained: self.trained,
            weights: GROUP_NAMES
                .iter()
                .zip(&self.values)
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = WeightTableFile::deserialize(d)?;
        let mut table = WeightTable::reference();
        table.trained = file.trained;
        for (name, value) in &file.weights {
            if !(*value >= 0.0 && value.is_finite()) {
                return Err(serde::de::Error::custom(format!(
                    "weight {name:?} must be finite and ≥ 0"
                )));
            }
            table
                .set(name, *value)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(table)
    }
}

// ====================== Components ======================

/// The evaluator shape of one component, with everything pre-resolved to
/// dense indices and constants.
#[derive(Debug, Clone)]
pub enum ComponentKind {
    /// `time · T1⁻¹(f_var)` for a parked qubit.
    IdleRelax { qubit: usize, var: VarId, time: f64 },
    /// `time · |df/dφ|(f_var)` for a parked qubit.
    IdleDephase { qubit: usize, var: VarId, time: f64 },
    /// Trajectory-averaged relaxation for one qubit of a two-qubit gate, on
    /// one transition branch (`branch_shift` 0 or the qubit's anharmonicity).
    PathRelax {
        qubit: usize,
        idle: VarId,
        int: VarId,
        endpoint_shift: f64,
        branch_shift: f64,
        time: f64,
        shape: TrajectoryShape,
    },
    /// Trajectory-averaged flux sensitivity, same geometry as `PathRelax`.
    PathDephase {
        qubit: usize,
        idle: VarId,
        int: VarId,
        endpoint_shift: f64,
        branch_shift: f64,
        time: f64,
        shape: TrajectoryShape,
    },
    /// Unit-peak Lorentzian in the shifted detuning between two operating
    /// frequencies: `χ² / (χ² + Δ²)`, `Δ = (f_a + shift_a) − (f_b + shift_b)`.
    Collision {
        a: VarId,
        a_shift: f64,
        b: VarId,
        b_shift: f64,
        chi: f64,
    },
    /// `coeff · (f_idle − endpoint)²`: quadratic excursion cost.
    Distortion {
        idle: VarId,
        int: VarId,
        endpoint_shift: f64,
        coeff: f64,
    },
}

/// One error component: a kernel, its dependency set, its owning gate, and
/// its tied weight group.
#[derive(Debug, Clone)]
pub struct ErrorComponent {
    /// The gate whose error budget this component belongs to.
    pub gate: VarId,
    pub mechanism: Mechanism,
    /// Index into [`GROUP_NAMES`].
    pub group: usize,
    /// Variables the kernel reads; perturbing anything else never changes it.
    pub deps: Vec<VarId>,
    pub kind: ComponentKind,
}

/// Transition channels for a collision pair: 0 = |0⟩↔|1⟩ (no shift),
/// 1 = |1⟩↔|2⟩ (shifted by that side's anharmonicity).
const CHANNELS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Maps a channel to its tied-group offset: both-01, mixed, both-12.
fn channel_class(ta: u8, tb: u8) -> usize {
    (ta + tb) as usize
}

struct BuildContext<'a> {
    graph: &'a GateVariableGraph,
    data: &'a CharacterizationData,
    /// Parasitic partners per characterization qubit index.
    partners: Vec<Vec<(usize, f64)>>,
    /// χ by characterization index pair `(lo, hi)`.
    chi: BTreeMap<(usize, usize), f64>,
    /// Coupler layer by interaction variable.
    layer_of: BTreeMap<VarId, u8>,
    /// Interaction variable a qubit drives in each layer, if any.
    gate_in_layer: Vec<[Option<VarId>; 4]>,
}

impl<'a> BuildContext<'a> {
    fn new(
        graph: &'a GateVariableGraph,
        data: &'a CharacterizationData,
        layers: &LayerColoring,
    ) -> Result<BuildContext<'a>> {
        let n_q = data.qubits.len();
        let mut partners = vec![Vec::new(); n_q];
        let mut chi = BTreeMap::new();
        for c in &data.couplings {
            if c.strength <= 0.0 {
                continue;
            }
            let (ia, ib) = match (data.qubit_index(c.a), data.qubit_index(c.b)) {
                (Some(ia), Some(ib)) => (ia, ib),
                _ => {
                    return Err(Error::estimator(format!(
                        "coupling ({}, {}) references an uncharacterized qubit",
                        c.a, c.b
                    )))
                }
            };
            partners[ia].push((ib, c.strength));
            partners[ib].push((ia, c.strength));
            chi.insert((ia.min(ib), ia.max(ib)), c.strength);
        }
        let mut layer_of = BTreeMap::new();
        let mut gate_in_layer = vec![[None; 4]; n_q];
        for i in 0..graph.len() {
            let id = VarId(i);
            if let GateVar::Interaction(a, b) = graph.var(id) {
                let layer = layers.layer_of(a, b).ok_or_else(|| {
                    Error::estimator(format!("coupler ({a}, {b}) missing from layer coloring"))
                })?;
                layer_of.insert(id, layer);
                for q in [a, b] {
                    let qi = data
                        .qubit_index(q)
                        .ok_or_else(|| Error::estimator(format!("qubit {q} uncharacterized")))?;
                    gate_in_layer[qi][layer as usize] = Some(id);
                }
            }
        }
        Ok(BuildContext {
            graph,
            data,
            partners,
            chi,
            layer_of,
            gate_in_layer,
        })
    }

    fn qubit_index(&self, q: QubitId) -> usize {
        self.data.qubit_index(q).expect("validated coverage")
    }

    fn eta(&self, qubit: usize) -> f64 {
        self.data.qubits[qubit].anharmonicity
    }

    /// Endpoint shift of qubit `q` during the two-qubit gate on `(a, b)`:
    /// the pair splits by its mean anharmonicity around the interaction
    /// frequency, lower id below (`+η̄/2`, η̄ < 0), higher id above.
    fn endpoint_shift(&self, a: QubitId, b: QubitId, q: QubitId) -> f64 {
        let eta_bar =
            0.5 * (self.eta(self.qubit_index(a)) + self.eta(self.qubit_index(b)));
        if q == a.min(b) {
            0.5 * eta_bar
        } else {
            -0.5 * eta_bar
        }
    }
}

/// Builds the full component list for a processor under the given mechanism
/// flags. Components are emitted gate-major (all of a gate's components are
/// consecutive), in deterministic order.
pub fn build_components(
    graph: &GateVariableGraph,
    data: &CharacterizationData,
    layers: &LayerColoring,
    flags: MitigationFlags,
) -> Result<Vec<ErrorComponent>> {
    for i in 0..graph.len() {
        for &q in graph.support(VarId(i)) {
            if data.qubit_index(q).is_none() {
                return Err(Error::estimator(format!(
                    "characterization missing qubit {q}"
                )));
            }
        }
    }
    let ctx = BuildContext::new(graph, data, layers)?;
    let mut out = Vec::new();
    for i in 0..graph.len() {
        let gate = VarId(i);
        match graph.var(gate) {
            GateVar::Idle(q) => build_idle_gate(&ctx, flags, gate, q, &mut out)?,
            GateVar::Interaction(a, b) => {
                build_interaction_gate(&ctx, flags, gate, a, b, &mut out)?
            }
        }
    }
    Ok(out)
}

fn build_idle_gate(
    ctx: &BuildContext,
    flags: MitigationFlags,
    gate: VarId,
    q: QubitId,
    out: &mut Vec<ErrorComponent>,
) -> Result<()> {
    let qi = ctx.qubit_index(q);
    let t = ctx.data.sq_gate_time;
    if flags.relaxation {
        out.push(ErrorComponent {
            gate,
            mechanism: Mechanism::Relaxation,
            group: G_SQ_RELAX,
            deps: vec![gate],
            kind: ComponentKind::IdleRelax {
                qubit: qi,
                var: gate,
                time: t,
            },
        });
    }
    if flags.dephasing {
        out.push(ErrorComponent {
            gate,
            mechanism: Mechanism::Dephasing,
            group: G_SQ_DEPHASE,
            deps: vec![gate],
            kind: ComponentKind::IdleDephase {
                qubit: qi,
                var: gate,
                time: t,
            },
        });
    }
    if !flags.stray_coupling {
        return Ok(());
    }
    // Single-qubit gates all run concurrently: every parasitic partner is a
    // potential collision, on four transition channels, attributed here to
    // this gate (the partner's own iteration attributes its side).
    for &(ri, chi) in &ctx.partners[qi] {
        let r_idle = ctx
            .graph
            .idle_var(ctx.data.qubits[ri].id)
            .ok_or_else(|| Error::estimator("partner qubit outside graph".to_string()))?;
        for (tq, tr) in CHANNELS {
            out.push(ErrorComponent {
                gate,
                mechanism: Mechanism::StrayCoupling,
                group: G_SQ_STRAY + channel_class(tq, tr),
                deps: vec![gate, r_idle],
                kind: ComponentKind::Collision {
                    a: gate,
                    a_shift: tq as f64 * ctx.eta(qi),
                    b: r_idle,
                    b_shift: tr as f64 * ctx.eta(ri),
                    chi,
                },
            });
        }
    }
    // Under the arbitrary-algorithm flag the qubit's single-qubit gate can
    // also coincide with any parasitically coupled two-qubit gate.
    if flags.arbitrary_algorithm {
        for j in ctx.graph.n_idle()..ctx.graph.len() {
            let int = VarId(j);
            let (a, b) = match ctx.graph.var(int) {
                GateVar::Interaction(a, b) => (a, b),
                GateVar::Idle(_) => unreachable!("interaction range"),
            };
            if a == q || b == q {
                continue;
            }
            for x in [a, b] {
                let xi = ctx.qubit_index(x);
                let key = (qi.min(xi), qi.max(xi));
                let Some(&chi) = ctx.chi.get(&key) else {
                    continue;
                };
                let end = ctx.endpoint_shift(a, b, x);
                for (tq, tx) in CHANNELS {
                    out.push(ErrorComponent {
                        gate,
                        mechanism: Mechanism::StrayCoupling,
                        group: G_CZ_SQ_STRAY + channel_class(tq, tx),
                        deps: vec![gate, int],
                        kind: ComponentKind::Collision {
                            a: gate,
                            a_shift: tq as f64 * ctx.eta(qi),
                            b: int,
                            b_shift: end + tx as f64 * ctx.eta(xi),
                            chi,
                        },
                    });
                }
            }
        }
    }
    Ok(())
}

fn build_interaction_gate(
    ctx: &BuildContext,
    flags: MitigationFlags,
    gate: VarId,
    a: QubitId,
    b: QubitId,
    out: &mut Vec<ErrorComponent>,
) -> Result<()> {
    let t = ctx.data.cz_gate_time;
    let shape = *ctx
        .data
        .trajectory(a, b)
        .ok_or_else(|| Error::estimator(format!("missing trajectory for ({a}, {b})")))?;
    let idle_vars = [
        ctx.graph.idle_var(a).expect("idle var exists"),
        ctx.graph.idle_var(b).expect("idle var exists"),
    ];
    // Relaxation and dephasing accumulate along each qubit's excursion, once
    // per transition branch the gate populates (|0⟩↔|1⟩ unshifted, |1⟩↔|2⟩
    // shifted down by the qubit's anharmonicity).
    for (q, idle) in [a, b].into_iter().zip(idle_vars) {
        let qi = ctx.qubit_index(q);
        let end = ctx.endpoint_shift(a, b, q);
        for branch in [0.0, ctx.eta(qi)] {
            if flags.relaxation {
                out.push(ErrorComponent {
                    gate,
                    mechanism: Mechanism::Relaxation,
                    group: G_CZ_RELAX,
                    deps: vec![idle, gate],
                    kind: ComponentKind::PathRelax {
                        qubit: qi,
                        idle,
                        int: gate,
                        endpoint_shift: end,
                        branch_shift: branch,
                        time: t,
                        shape,
                    },
                });
            }
            if flags.dephasing {
                out.push(ErrorComponent {
                    gate,
                    mechanism: Mechanism::Dephasing,
                    group: G_CZ_DEPHASE,
                    deps: vec![idle, gate],
                    kind: ComponentKind::PathDephase {
                        qubit: qi,
                        idle,
                        int: gate,
                        endpoint_shift: end,
                        branch_shift: branch,
                        time: t,
                        shape,
                    },
                });
            }
        }
    }
    if flags.stray_coupling {
        let layer = ctx.layer_of[&gate];
        // Collisions with other two-qubit gates: same layer by default,
        // every other coupler under the arbitrary-algorithm flag. The
        // operating position of each participant is its hold endpoint.
        for j in ctx.graph.n_idle()..ctx.graph.len() {
            let other = VarId(j);
            if other == gate {
                continue;
            }
            if !flags.arbitrary_algorithm && ctx.layer_of[&other] != layer {
                continue;
            }
            let (k, l) = match ctx.graph.var(other) {
                GateVar::Interaction(k, l) => (k, l),
                GateVar::Idle(_) => unreachable!("interaction range"),
            };
            if k == a || k == b || l == a || l == b {
                continue;
            }
            for p in [a, b] {
                let pi = ctx.qubit_index(p);
                let p_end = ctx.endpoint_shift(a, b, p);
                for x in [k, l] {
                    let xi = ctx.qubit_index(x);
                    let key = (pi.min(xi), pi.max(xi));
                    let Some(&chi) = ctx.chi.get(&key) else {
                        continue;
                    };
                    let x_end = ctx.endpoint_shift(k, l, x);
                    for (tp, tx) in CHANNELS {
                        out.push(ErrorComponent {
                            gate,
                            mechanism: Mechanism::StrayCoupling,
                            group: G_CZ_CZ_STRAY + channel_class(tp, tx),
                            deps: vec![gate, other],
                            kind: ComponentKind::Collision {
                                a: gate,
                                a_shift: p_end + tp as f64 * ctx.eta(pi),
                                b: other,
                                b_shift: x_end + tx as f64 * ctx.eta(xi),
                                chi,
                            },
                        });
                    }
                }
            }
        }
        // Collisions with spectators: qubits parked at idle through this
        // gate's layer. Under the arbitrary-algorithm flag every parked
        // parasitic partner counts regardless of layer.
        for p in [a, b] {
            let pi = ctx.qubit_index(p);
            let p_end = ctx.endpoint_shift(a, b, p);
            for &(ki, chi) in &ctx.partners[pi] {
                let k = ctx.data.qubits[ki].id;
                if k == a || k == b {
                    continue;
                }
                if !flags.arbitrary_algorithm && ctx.gate_in_layer[ki][layer as usize].is_some()
                {
                    continue;
                }
                let k_idle = ctx
                    .graph
                    .idle_var(k)
                    .ok_or_else(|| Error::estimator("spectator outside graph".to_string()))?;
                for (tp, tk) in CHANNELS {
                    out.push(ErrorComponent {
                        gate,
                        mechanism: Mechanism::StrayCoupling,
                        group: G_CZ_SQ_STRAY + channel_class(tp, tk),
                        deps: vec![gate, k_idle],
                        kind: ComponentKind::Collision {
                            a: gate,
                            a_shift: p_end + tp as f64 * ctx.eta(pi),
                            b: k_idle,
                            b_shift: tk as f64 * ctx.eta(ki),
                            chi,
                        },
                    });
                }
            }
        }
    }
    if flags.pulse_distortion {
        for (q, idle) in [a, b].into_iter().zip(idle_vars) {
            let qi = ctx.qubit_index(q);
            out.push(ErrorComponent {
                gate,
                mechanism: Mechanism::PulseDistortion,
                group: G_CZ_DISTORTION,
                deps: vec![idle, gate],
                kind: ComponentKind::Distortion {
                    idle,
                    int: gate,
                    endpoint_shift: ctx.endpoint_shift(a, b, q),
                    coeff: ctx.data.qubits[qi].distortion,
                },
            });
        }
    }
    Ok(())
}

// ====================== Estimator ======================

/// The assembled error model for one processor: components, weights, and the
/// per-variable index that makes incremental evaluation and neighborhood
/// extraction cheap.
#[derive(Debug, Clone)]
pub struct Estimator {
    graph: Arc<GateVariableGraph>,
    data: Arc<CharacterizationData>,
    flags: MitigationFlags,
    components: Vec<ErrorComponent>,
    weights: WeightTable,
    /// Component indices depending on each variable.
    var_index: Vec<Vec<u32>>,
    /// Contiguous component range per gate variable.
    gate_ranges: Vec<(u32, u32)>,
}

impl Estimator {
    pub fn build(
        graph: Arc<GateVariableGraph>,
        data: Arc<CharacterizationData>,
        layers: &LayerColoring,
        flags: MitigationFlags,
        weights: WeightTable,
    ) -> Result<Estimator> {
        let components = build_components(&graph, &data, layers, flags)?;
        let mut var_index = vec![Vec::new(); graph.len()];
        let mut gate_ranges = vec![(0u32, 0u32); graph.len()];
        let mut cursor = 0usize;
        for g in 0..graph.len() {
            let start = cursor;
            while cursor < components.len() && components[cursor].gate == VarId(g) {
                cursor += 1;
            }
            gate_ranges[g] = (start as u32, cursor as u32);
        }
        debug_assert_eq!(cursor, components.len(), "components must be gate-major");
        for (i, c) in components.iter().enumerate() {
            for &d in &c.deps {
                var_index[d.0].push(i as u32);
            }
        }
        Ok(Estimator {
            graph,
            data,
            flags,
            components,
            weights,
            var_index,
            gate_ranges,
        })
    }

    pub fn graph(&self) -> &Arc<GateVariableGraph> {
        &self.graph
    }

    pub fn data(&self) -> &Arc<CharacterizationData> {
        &self.data
    }

    pub fn flags(&self) -> MitigationFlags {
        self.flags
    }

    pub fn components(&self) -> &[ErrorComponent] {
        &self.components
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: WeightTable) {
        self.weights = weights;
    }

    pub fn n_vars(&self) -> usize {
        self.graph.len()
    }

    /// Component indices that depend on `var`.
    pub fn components_of_var(&self, var: VarId) -> &[u32] {
        &self.var_index[var.0]
    }

    /// Contiguous component index range `[start, end)` of a gate's budget.
    pub fn gate_component_range(&self, gate: VarId) -> (usize, usize) {
        let (lo, hi) = self.gate_ranges[gate.0];
        (lo as usize, hi as usize)
    }

    /// Unweighted kernel value of component `idx`.
    pub fn component_value(&self, idx: usize, vals: &[f64]) -> f64 {
        kernel(&self.data, &self.components[idx].kind, vals)
    }

    /// Weighted value of component `idx`.
    pub fn weighted_value(&self, idx: usize, vals: &[f64]) -> f64 {
        self.weights.values()[self.components[idx].group]
            * kernel(&self.data, &self.components[idx].kind, vals)
    }

    /// Sum of the weighted values of `indices` (callers guarantee the
    /// dependency values are set; used for sub-model evaluation).
    pub fn sum_components(&self, indices: &[u32], vals: &[f64]) -> f64 {
        let w = self.weights.values();
        let mut acc = 0.0;
        for &i in indices {
            let c = &self.components[i as usize];
            acc += w[c.group] * kernel(&self.data, &c.kind, vals);
        }
        acc
    }

    /// Full weighted evaluation. Errors when `vals` has the wrong arity or a
    /// missing (NaN) entry.
    pub fn evaluate(&self, vals: &[f64]) -> Result<f64> {
        self.check_vals(vals)?;
        let w = self.weights.values();
        let mut acc = 0.0;
        for c in &self.components {
            acc += w[c.group] * kernel(&self.data, &c.kind, vals);
        }
        Ok(acc)
    }

    /// Weighted error attributed to each gate variable, aligned by `VarId`.
    pub fn per_gate_errors(&self, vals: &[f64]) -> Result<Vec<f64>> {
        self.check_vals(vals)?;
        let w = self.weights.values();
        let mut out = vec![0.0; self.graph.len()];
        for (g, &(lo, hi)) in self.gate_ranges.iter().enumerate() {
            let mut acc = 0.0;
            for c in &self.components[lo as usize..hi as usize] {
                acc += w[c.group] * kernel(&self.data, &c.kind, vals);
            }
            out[g] = acc;
        }
        Ok(out)
    }

    fn check_vals(&self, vals: &[f64]) -> Result<()> {
        if vals.len() != self.graph.len() {
            return Err(Error::estimator(format!(
                "configuration has {} values, graph has {} variables",
                vals.len(),
                self.graph.len()
            )));
        }
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::estimator(format!(
                "missing value for variable {}",
                self.graph.name(VarId(i))
            )));
        }
        Ok(())
    }

    /// Components whose dependencies all lie in `available` and that touch
    /// at least one variable of `free`. This is the containment rule for
    /// scoped sub-models: using a component is sound only when every value
    /// it reads is either being optimized (`free`) or already committed.
    /// Returns sorted, deduplicated indices.
    pub fn contained_components(&self, free: &[VarId], available: &[bool]) -> Vec<u32> {
        debug_assert_eq!(available.len(), self.graph.len());
        let mut out = Vec::new();
        for &f in free {
            debug_assert!(available[f.0], "free variables must be available");
            for &ci in &self.var_index[f.0] {
                let c = &self.components[ci as usize];
                if c.deps.iter().all(|d| available[d.0]) {
                    out.push(ci);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn kernel(data: &CharacterizationData, kind: &ComponentKind, vals: &[f64]) -> f64 {
    match *kind {
        ComponentKind::IdleRelax { qubit, var, time } => {
            time * data.relax_rate_at(qubit, vals[var.0])
        }
        ComponentKind::IdleDephase { qubit, var, time } => {
            time * data.sensitivity_at(qubit, vals[var.0])
        }
        ComponentKind::PathRelax {
            qubit,
            idle,
            int,
            endpoint_shift,
            branch_shift,
            time,
            ref shape,
        } => {
            let start = vals[idle.0] + branch_shift;
            let end = vals[int.0] + endpoint_shift + branch_shift;
            time * shape.time_average(start, end, |f| data.relax_rate_at(qubit, f))
        }
        ComponentKind::PathDephase {
            qubit,
            idle,
            int,
            endpoint_shift,
            branch_shift,
            time,
            ref shape,
        } => {
            let start = vals[idle.0] + branch_shift;
            let end = vals[int.0] + endpoint_shift + branch_shift;
            time * shape.time_average(start, end, |f| data.sensitivity_at(qubit, f))
        }
        ComponentKind::Collision {
            a,
            a_shift,
            b,
            b_shift,
            chi,
        } => {
            let d = (vals[a.0] + a_shift) - (vals[b.0] + b_shift);
            let c2 = chi * chi;
            c2 / (c2 + d * d)
        }
        ComponentKind::Distortion {
            idle,
            int,
            endpoint_shift,
            coeff,
        } => {
            let exc = vals[idle.0] - (vals[int.0] + endpoint_shift);
            coeff * exc * exc
        }
    }
}

// ====================== Incremental evaluation ======================

/// Cached evaluation state for incremental updates: the configuration, every
/// component's weighted value, and a compensated running total.
#[derive(Debug, Clone)]
pub struct EvalCache {
    vals: Vec<f64>,
    comp_vals: Vec<f64>,
    sum: f64,
    compensation: f64,
    epoch: u64,
    stamps: Vec<u64>,
}

impl EvalCache {
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn component_value(&self, idx: usize) -> f64 {
        self.comp_vals[idx]
    }
}

fn neumaier_add(sum: &mut f64, compensation: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *compensation += (*sum - t) + x;
    } else {
        *compensation += (x - t) + *sum;
    }
    *sum = t;
}

impl Estimator {
    /// Evaluates `vals` in full and returns the cache for incremental
    /// updates.
    pub fn init_cache(&self, vals: &[f64]) -> Result<EvalCache> {
        self.check_vals(vals)?;
        let w = self.weights.values();
        let mut comp_vals = Vec::with_capacity(self.components.len());
        let mut sum = 0.0;
        let mut compensation = 0.0;
        for c in &self.components {
            let v = w[c.group] * kernel(&self.data, &c.kind, vals);
            comp_vals.push(v);
            neumaier_add(&mut sum, &mut compensation, v);
        }
        Ok(EvalCache {
            vals: vals.to_vec(),
            comp_vals,
            sum,
            compensation,
            epoch: 0,
            stamps: vec![0; self.components.len()],
        })
    }

    /// Applies `changes` to the cached configuration and recomputes only the
    /// components that depend on a changed variable. Returns the new total.
    /// An empty change set returns the cached total unchanged.
    pub fn evaluate_delta(
        &self,
        cache: &mut EvalCache,
        changes: &[(VarId, f64)],
    ) -> Result<f64> {
        if cache.comp_vals.len() != self.components.len()
            || cache.vals.len() != self.graph.len()
        {
            return Err(Error::estimator(
                "evaluation cache was built for a different estimator",
            ));
        }
        for &(v, f) in changes {
            if v.0 >= cache.vals.len() {
                return Err(Error::estimator(format!("unknown variable {v}")));
            }
            if !f.is_finite() {
                return Err(Error::estimator(format!(
                    "missing value for variable {}",
                    self.graph.name(v)
                )));
            }
            cache.vals[v.0] = f;
        }
        cache.epoch += 1;
        let w = self.weights.values();
        for &(v, _) in changes {
            for &ci in &self.var_index[v.0] {
                let ci = ci as usize;
                if cache.stamps[ci] == cache.epoch {
                    continue;
                }
                cache.stamps[ci] = cache.epoch;
                let c = &self.components[ci];
                let new = w[c.group] * kernel(&self.data, &c.kind, &cache.vals);
                neumaier_add(
                    &mut cache.sum,
                    &mut cache.compensation,
                    new - cache.comp_vals[ci],
                );
                cache.comp_vals[ci] = new;
            }
        }
        Ok(cache.total())
    }

    /// Recomputes the cache's configuration from scratch and errors when the
    /// incremental total has drifted beyond 1e-9 relative — a safety valve
    /// against stale caches.
    pub fn verify_cache(&self, cache: &EvalCache) -> Result<f64> {
        let full = self.evaluate(&cache.vals)?;
        let incremental = cache.total();
        let scale = full.abs().max(1e-30);
        if ((full - incremental) / scale).abs() > 1e-9 {
            return Err(Error::numerical(format!(
                "evaluation cache drifted: incremental {incremental} vs full {full}"
            )));
        }
        Ok(full)
    }
}

// ====================== Benchmark prediction ======================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitPrediction {
    pub qubit: QubitId,
    /// Predicted single-qubit-gate error e_i.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub a: QubitId,
    pub b: QubitId,
    /// Single-qubit contributions of the two participants.
    pub sq_a: f64,
    pub sq_b: f64,
    /// Inferred two-qubit-gate error e_ij (cycle minus SQ contributions).
    pub cz: f64,
    /// Predicted per-cycle pair error e_c,ij = sq_a + sq_b + cz.
    pub cycle: f64,
}

/// Per-qubit and per-pair benchmark predictions derived from the weighted
/// per-gate error sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPrediction {
    pub per_qubit: Vec<QubitPrediction>,
    pub per_pair: Vec<PairPrediction>,
    /// Set when the weight table has not been trained; predictions then use
    /// reference weights and should be treated as provisional.
    pub untrained_weights: bool,
}

impl BenchmarkPrediction {
    /// The per-pair cycle-error distribution e_c.
    pub fn cycle_errors(&self) -> Vec<f64> {
        self.per_pair.iter().map(|p| p.cycle).collect()
    }

    pub fn median_cycle_error(&self) -> f64 {
        median(&mut self.cycle_errors())
    }
}

pub(crate) fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty set");
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

impl Estimator {
    /// Maps per-gate error sums to benchmark predictions: e_i per qubit from
    /// its idle gate, and per pair the cycle error e_c,ij combining both
    /// participants' single-qubit errors with the two-qubit-gate error.
    pub fn predict_benchmarks(&self, vals: &[f64]) -> Result<BenchmarkPrediction> {
        let per_gate = self.per_gate_errors(vals)?;
        let mut per_qubit = Vec::with_capacity(self.graph.n_idle());
        for i in 0..self.graph.n_idle() {
            match self.graph.var(VarId(i)) {
                GateVar::Idle(q) => per_qubit.push(QubitPrediction {
                    qubit: q,
                    error: per_gate[i],
                }),
                GateVar::Interaction(..) => unreachable!("idle range"),
            }
        }
        let mut per_pair = Vec::with_capacity(self.graph.n_interaction());
        for i in self.graph.n_idle()..self.graph.len() {
            let (a, b) = match self.graph.var(VarId(i)) {
                GateVar::Interaction(a, b) => (a, b),
                GateVar::Idle(_) => unreachable!("interaction range"),
            };
            let sq_a = per_gate[self.graph.idle_var(a).expect("idle exists").0];
            let sq_b = per_gate[self.graph.idle_var(b).expect("idle exists").0];
            let cz = per_gate[i];
            per_pair.push(PairPrediction {
                a,
                b,
                sq_a,
                sq_b,
                cz,
                cycle: sq_a + sq_b + cz,
            });
        }
        Ok(BenchmarkPrediction {
            per_qubit,
            per_pair,
            untrained_weights: !self.weights.is_trained(),
        })
    }
}

// ====================== Bounds ======================

/// Per-variable frequency intervals, dense by `VarId`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn width(&self, v: VarId) -> f64 {
        self.hi[v.0] - self.lo[v.0]
    }

    pub fn contains(&self, v: VarId, f: f64, tol: f64) -> bool {
        f >= self.lo[v.0] - tol && f <= self.hi[v.0] + tol
    }

    pub fn clamp(&self, v: VarId, f: f64) -> f64 {
        f.clamp(self.lo[v.0], self.hi[v.0])
    }

    /// Checks a full configuration, naming the first violating variable.
    pub fn validate_config(
        &self,
        graph: &GateVariableGraph,
        vals: &[f64],
        tol: f64,
    ) -> Result<()> {
        if vals.len() != self.len() {
            return Err(Error::estimator(format!(
                "configuration has {} values, bounds have {}",
                vals.len(),
                self.len()
            )));
        }
        for (i, &f) in vals.iter().enumerate() {
            let v = VarId(i);
            if !f.is_finite() || !self.contains(v, f, tol) {
                return Err(Error::estimator(format!(
                    "variable {} at {f} GHz outside bounds [{}, {}]",
                    graph.name(v),
                    self.lo[i],
                    self.hi[i]
                )));
            }
        }
        Ok(())
    }
}

/// Options for [`hard_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsOptions {
    /// Idle operating band width below the qubit's maximum frequency (GHz):
    /// the dephasing-limiting maximum detuning.
    pub sq_width: f64,
    /// Interaction band width below the pairwise-mean maximum frequency.
    pub cz_width: f64,
    /// Half-width of the exclusion zone around each readout resonator.
    pub readout_margin: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            sq_width: 0.45,
            cz_width: 0.635,
            readout_margin: 0.06,
        }
    }
}

/// Subtracts `exclusions` from `[lo, hi]` and returns the widest remaining
/// piece, or `None` when nothing remains.
fn widest_piece(lo: f64, hi: f64, exclusions: &[(f64, f64)]) -> Option<(f64, f64)> {
    let mut pieces = vec![(lo, hi)];
    for &(a, b) in exclusions {
        let mut next = Vec::with_capacity(pieces.len() + 1);
        for (plo, phi) in pieces {
            if b <= plo || a >= phi {
                next.push((plo, phi));
                continue;
            }
            if a > plo {
                next.push((plo, a));
            }
            if b < phi {
                next.push((b, phi));
            }
        }
        pieces = next;
    }
    pieces
        .into_iter()
        .filter(|(a, b)| b > a)
        .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
}

/// Derives each variable's allowed frequency interval: idles operate within
/// `sq_width` of their maximum frequency, interactions within `cz_width` of
/// the pairwise mean maximum, both minus exclusion zones around the
/// participating readout resonators (widest remaining piece wins). An empty
/// interval is an error naming the variable.
pub fn hard_bounds(
    data: &CharacterizationData,
    graph: &GateVariableGraph,
    opts: &BoundsOptions,
) -> Result<Bounds> {
    let mut lo = vec![0.0; graph.len()];
    let mut hi = vec![0.0; graph.len()];
    for i in 0..graph.len() {
        let v = VarId(i);
        let (band_lo, band_hi, exclusions) = match graph.var(v) {
            GateVar::Idle(q) => {
                let c = data
                    .qubit(q)
                    .ok_or_else(|| Error::estimator(format!("qubit {q} uncharacterized")))?;
                let m = opts.readout_margin;
                (
                    c.f_max - opts.sq_width,
                    c.f_max,
                    vec![(c.readout_freq - m, c.readout_freq + m)],
                )
            }
            GateVar::Interaction(a, b) => {
                let ca = data
                    .qubit(a)
                    .ok_or_else(|| Error::estimator(format!("qubit {a} uncharacterized")))?;
                let cb = data
                    .qubit(b)
                    .ok_or_else(|| Error::estimator(format!("qubit {b} uncharacterized")))?;
                let reference = 0.5 * (ca.f_max + cb.f_max);
                let m = opts.readout_margin;
                (
                    reference - opts.cz_width,
                    reference,
                    vec![
                        (ca.readout_freq - m, ca.readout_freq + m),
                        (cb.readout_freq - m, cb.readout_freq + m),
                    ],
                )
            }
        };
        match widest_piece(band_lo, band_hi, &exclusions) {
            Some((a, b)) => {
                lo[i] = a;
                hi[i] = b;
            }
            None => {
                return Err(Error::estimator(format!(
                    "empty bound interval for variable {}",
                    graph.name(v)
                )))
            }
        }
    }
    Ok(Bounds { lo, hi })
}

// ====================== Configuration files ======================

/// Rounds to 1e-6 GHz (1 kHz) for serialization; far finer than the 2 MHz
/// operating grid, so round-tripping never moves a value off its decision.
pub fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// On-disk form of a frequency configuration: named variables plus their
/// bounds, both quantized to 1e-6 GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub variables: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, (f64, f64)>,
}

/// Tolerance for bound containment after 1e-6 GHz quantization.
pub const BOUND_TOL: f64 = 1e-6;

impl ConfigFile {
    pub fn from_state(graph: &GateVariableGraph, vals: &[f64], bounds: &Bounds) -> ConfigFile {
        assert_eq!(vals.len(), graph.len());
        let mut variables = BTreeMap::new();
        let mut bmap = BTreeMap::new();
        for i in 0..graph.len() {
            let name = graph.name(VarId(i));
            variables.insert(name.clone(), round6(vals[i]));
            bmap.insert(name, (round6(bounds.lo[i]), round6(bounds.hi[i])));
        }
        ConfigFile {
            variables,
            bounds: bmap,
        }
    }

    /// Resolves names against the graph and validates bound containment
    /// within [`BOUND_TOL`].
    pub fn into_state(&self, graph: &GateVariableGraph) -> Result<(Vec<f64>, Bounds)> {
        let n = graph.len();
        if self.variables.len() != n {
            return Err(Error::parse(format!(
                "configuration has {} variables, graph expects {n}",
                self.variables.len()
            )));
        }
        let mut vals = vec![f64::NAN; n];
        let mut lo = vec![f64::NAN; n];
        let mut hi = vec![f64::NAN; n];
        for (name, &value) in &self.variables {
            let v = graph.lookup_name(name)?;
            vals[v.0] = value;
            let &(a, b) = self.bounds.get(name).ok_or_else(|| {
                Error::parse(format!("missing bounds for variable {name:?}"))
            })?;
            lo[v.0] = a;
            hi[v.0] = b;
        }
        let bounds = Bounds { lo, hi };
        bounds.validate_config(graph, &vals, BOUND_TOL)?;
        Ok((vals, bounds))
    }
}

// ====================== Tests ======================
