//! Processor topologies and the gate-variable graph layered on top of them.
//!
//! A [`ProcessorGraph`] is a planar lattice of frequency-tunable qubits joined
//! by couplers. Qubits live on integer grid coordinates and couplers only join
//! qubits at Manhattan distance 1, which keeps every lattice produced here at
//! degree ≤ 4 and makes coupler orientation (horizontal/vertical) well defined.
//!
//! Two generators are provided:
//!
//! * [`build_surface_code_lattice`]: the distance-`d` square lattice used for
//!   error-correction studies, with `N = 2d² − 1` qubits and `4d(d−1)`
//!   couplers (data qubits plus measure qubits, drawn in the 45°-rotated frame
//!   so couplers are unit steps).
//! * [`ProcessorGraph::standard68`]: a fixed 68-qubit, 109-coupler processor
//!   shipped as a static description file, used as the standard mid-size
//!   instance throughout the crate.
//!
//! On top of a processor sits the [`GateVariableGraph`]: one *idle* variable
//! per qubit (its parked operating frequency) and one *interaction* variable
//! per coupler (the frequency where its two qubits meet to execute a two-qubit
//! gate). Optimization, healing and stitching all operate on this graph rather
//! than on raw qubits. Two variables are adjacent when they share a qubit, or
//! when they are the idle variables of two coupled qubits. The graph also
//! exposes the idle↔interaction *incidence* relation, which drives scoped
//! neighborhood growth and heal-closure rules elsewhere in the crate.
//!
//! [`color_cz_layers`] partitions couplers into the four standard interleaved
//! layers (orientation × parity) such that no qubit participates twice in any
//! layer; the layer index is what decides which two-qubit gates run
//! concurrently in benchmarking circuits.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable integer qubit identifier. Ids survive subgraph extraction.
pub type QubitId = u32;

/// A qubit at an integer lattice coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Qubit {
    pub id: QubitId,
    pub x: i32,
    pub y: i32,
}

/// Serialized form of [`ProcessorGraph`]; validation happens on conversion.
#[derive(Serialize, Deserialize)]
struct ProcessorGraphData {
    name: String,
    qubits: Vec<Qubit>,
    couplers: Vec<(QubitId, QubitId)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distance: Option<u32>,
}

/// A lattice of qubits and couplers with validated structure.
#[derive(Debug, Clone)]
pub struct ProcessorGraph {
    name: String,
    /// Sorted by id.
    qubits: Vec<Qubit>,
    /// Each pair normalized `(lo, hi)`; the list is sorted.
    couplers: Vec<(QubitId, QubitId)>,
    /// Code distance when the graph is a full surface-code lattice.
    distance: Option<u32>,
    /// Neighbor ids per qubit, aligned with `qubits`, each list sorted.
    adjacency: Vec<Vec<QubitId>>,
}

impl PartialEq for ProcessorGraph {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.qubits == other.qubits
            && self.couplers == other.couplers
            && self.distance == other.distance
    }
}

impl ProcessorGraph {
    /// Validates and indexes a processor description.
    ///
    /// Rejects duplicate ids or coordinates, couplers that reference unknown
    /// qubits, self-couplers, duplicate couplers, and couplers joining qubits
    /// that are not at Manhattan distance 1.
    pub fn from_parts(
        name: impl Into<String>,
        mut qubits: Vec<Qubit>,
        couplers: Vec<(QubitId, QubitId)>,
        distance: Option<u32>,
    ) -> Result<Self> {
        qubits.sort_by_key(|q| q.id);
        let mut ids = BTreeSet::new();
        let mut coords = BTreeSet::new();
        for q in &qubits {
            if !ids.insert(q.id) {
                return Err(Error::topology(format!("duplicate qubit id {}", q.id)));
            }
            if !coords.insert((q.x, q.y)) {
                return Err(Error::topology(format!(
                    "duplicate qubit coordinate ({}, {})",
                    q.x, q.y
                )));
            }
        }
        let index: BTreeMap<QubitId, usize> =
            qubits.iter().enumerate().map(|(i, q)| (q.id, i)).collect();
        let mut normalized: Vec<(QubitId, QubitId)> = Vec::with_capacity(couplers.len());
        for &(a, b) in &couplers {
            if a == b {
                return Err(Error::topology(format!("self-coupler on qubit {a}")));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (ia, ib) = match (index.get(&lo), index.get(&hi)) {
                (Some(&ia), Some(&ib)) => (ia, ib),
                _ => {
                    return Err(Error::topology(format!(
                        "coupler ({lo}, {hi}) references an unknown qubit"
                    )))
                }
            };
            let (qa, qb) = (&qubits[ia], &qubits[ib]);
            if (qa.x - qb.x).abs() + (qa.y - qb.y).abs() != 1 {
                return Err(Error::topology(format!(
                    "coupler ({lo}, {hi}) joins qubits at Manhattan distance != 1"
                )));
            }
            normalized.push((lo, hi));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::topology("duplicate coupler".to_string()));
        }
        let mut adjacency = vec![Vec::new(); qubits.len()];
        for &(a, b) in &normalized {
            adjacency[index[&a]].push(b);
            adjacency[index[&b]].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(ProcessorGraph {
            name: name.into(),
            qubits,
            couplers: normalized,
            distance,
            adjacency,
        })
    }

    /// The fixed 68-qubit, 109-coupler processor bundled with the crate.
    pub fn standard68() -> ProcessorGraph {
        static GRAPH: OnceLock<ProcessorGraph> = OnceLock::new();
        GRAPH
            .get_or_init(|| {
                serde_json::from_str::<ProcessorGraph>(include_str!("../data/standard68.json"))
                    .expect("bundled standard68 description is valid")
            })
            .clone()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn couplers(&self) -> &[(QubitId, QubitId)] {
        &self.couplers
    }

    pub fn distance(&self) -> Option<u32> {
        self.distance
    }

    pub fn qubit(&self, id: QubitId) -> Option<&Qubit> {
        self.index_of(id).map(|i| &self.qubits[i])
    }

    fn index_of(&self, id: QubitId) -> Option<usize> {
        self.qubits.binary_search_by_key(&id, |q| q.id).ok()
    }

    /// Sorted neighbor ids of `id`; empty for unknown ids.
    pub fn neighbors(&self, id: QubitId) -> &[QubitId] {
        match self.index_of(id) {
            Some(i) => &self.adjacency[i],
            None => &[],
        }
    }

    pub fn degree(&self, id: QubitId) -> usize {
        self.neighbors(id).len()
    }

    pub fn has_coupler(&self, a: QubitId, b: QubitId) -> bool {
        let pair = if a < b { (a, b) } else { (b, a) };
        self.couplers.binary_search(&pair).is_ok()
    }

    /// Hop distance from `a` to `b` along couplers, up to `cap`; `None` when
    /// unreachable within the cap or when either id is unknown.
    pub fn hop_distance(&self, a: QubitId, b: QubitId, cap: u32) -> Option<u32> {
        if self.index_of(a).is_none() || self.index_of(b).is_none() {
            return None;
        }
        if a == b {
            return Some(0);
        }
        let mut dist: BTreeMap<QubitId, u32> = BTreeMap::new();
        dist.insert(a, 0);
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du >= cap {
                continue;
            }
            for &v in self.neighbors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                    if v == b {
                        return Some(du + 1);
                    }
                    e.insert(du + 1);
                    queue.push_back(v);
                }
            }
        }
        None
    }

    /// All unordered qubit pairs within `max_hops` coupler hops of each other,
    /// with their hop distance. Sorted by `(a, b)`; distances are ≥ 1.
    pub fn pairs_within_hops(&self, max_hops: u32) -> Vec<(QubitId, QubitId, u32)> {
        let mut out = Vec::new();
        for q in &self.qubits {
            let mut dist: BTreeMap<QubitId, u32> = BTreeMap::new();
            dist.insert(q.id, 0);
            let mut frontier = vec![q.id];
            for d in 1..=max_hops {
                let mut next = Vec::new();
                for &u in &frontier {
                    for &v in self.neighbors(u) {
                        if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                            e.insert(d);
                            next.push(v);
                        }
                    }
                }
                frontier = next;
            }
            for (&t, &d) in &dist {
                if t > q.id && d >= 1 {
                    out.push((q.id, t, d));
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.qubits.is_empty() {
            return true;
        }
        let mut seen = BTreeSet::from([self.qubits[0].id]);
        let mut stack = vec![self.qubits[0].id];
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == self.qubits.len()
    }

    /// The induced subgraph on `keep`: those qubits (ids and coordinates
    /// unchanged) and every coupler with both endpoints kept. Keeping every
    /// qubit returns a graph equal to the original.
    pub fn induced_subgraph(&self, keep: &BTreeSet<QubitId>) -> Result<ProcessorGraph> {
        for &id in keep {
            if self.index_of(id).is_none() {
                return Err(Error::topology(format!(
                    "induced subgraph references unknown qubit {id}"
                )));
            }
        }
        if keep.len() == self.qubits.len() {
            return Ok(self.clone());
        }
        let qubits: Vec<Qubit> = self
            .qubits
            .iter()
            .filter(|q| keep.contains(&q.id))
            .copied()
            .collect();
        let couplers: Vec<(QubitId, QubitId)> = self
            .couplers
            .iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b))
            .copied()
            .collect();
        ProcessorGraph::from_parts(
            format!("{}[{}q]", self.name, qubits.len()),
            qubits,
            couplers,
            None,
        )
    }
}

impl Serialize for ProcessorGraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ProcessorGraphData {
            name: self.name.clone(),
            qubits: self.qubits.clone(),
            couplers: self.couplers.clone(),
            distance: self.distance,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProcessorGraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let data = ProcessorGraphData::deserialize(deserializer)?;
        ProcessorGraph::from_parts(data.name, data.qubits, data.couplers, data.distance)
            .map_err(serde::de::Error::custom)
    }
}

/// Builds the distance-`d` surface-code lattice: `2d² − 1` qubits (a `d×d`
/// grid of data qubits interleaved with `d² − 1` measure qubits) and
/// `4d(d−1)` couplers, drawn in the rotated frame where couplers are unit
/// grid steps. Ids are assigned in sorted coordinate order.
pub fn build_surface_code_lattice(d: u32) -> Result<ProcessorGraph> {
    if d == 0 {
        return Err(Error::topology("lattice distance must be at least 1"));
    }
    let d = d as i64;
    // Data qubits at even-even coordinates of the unrotated frame; measure
    // qubits at the plaquette centers, including the alternating boundary
    // half-plaquettes (top/right take even rows/columns, bottom/left odd).
    let mut raw: Vec<(i64, i64)> = Vec::new();
    for c in 0..d {
        for r in 0..d {
            raw.push((2 * c, 2 * r));
        }
    }
    for c in -1..d {
        for r in -1..d {
            let interior = (0..=d - 2).contains(&c) && (0..=d - 2).contains(&r);
            let top = r == -1 && (0..=d - 2).contains(&c) && c % 2 == 0;
            let bottom = r == d - 1 && (0..=d - 2).contains(&c) && c.rem_euclid(2) == 1;
            let left = c == -1 && (0..=d - 2).contains(&r) && r.rem_euclid(2) == 1;
            let right = c == d - 1 && (0..=d - 2).contains(&r) && r % 2 == 0;
            if interior || top || bottom || left || right {
                raw.push((2 * c + 1, 2 * r + 1));
            }
        }
    }
    // Rotate 45°: (x, y) → ((x+y)/2, (y−x)/2). Couplers (measure ↔ diagonal
    // data neighbors) become unit steps in the rotated frame.
    let rotate = |(x, y): (i64, i64)| (((x + y) / 2) as i32, ((y - x) / 2) as i32);
    let mut coords: Vec<(i32, i32)> = raw.iter().map(|&p| rotate(p)).collect();
    coords.sort_unstable();
    let id_of: BTreeMap<(i32, i32), QubitId> = coords
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i as QubitId))
        .collect();
    let qubits: Vec<Qubit> = coords
        .iter()
        .map(|&(x, y)| Qubit {
            id: id_of[&(x, y)],
            x,
            y,
        })
        .collect();
    let raw_set: BTreeSet<(i64, i64)> = raw.iter().copied().collect();
    let mut couplers = Vec::new();
    for &(x, y) in &raw_set {
        // Measure qubits sit at odd-odd unrotated coordinates.
        if x.rem_euclid(2) == 1 {
            for dx in [-1, 1] {
                for dy in [-1, 1] {
                    let p = (x + dx, y + dy);
                    if raw_set.contains(&p) {
                        couplers.push((id_of[&rotate((x, y))], id_of[&rotate(p)]));
                    }
                }
            }
        }
    }
    ProcessorGraph::from_parts(format!("surface-{}", d), qubits, couplers, Some(d as u32))
}

// ====================== Gate-variable graph ======================

/// A tunable frequency variable: a qubit's idle frequency or a coupler's
/// interaction frequency. Interaction pairs are normalized `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateVar {
    Idle(QubitId),
    Interaction(QubitId, QubitId),
}

impl GateVar {
    pub fn interaction(a: QubitId, b: QubitId) -> GateVar {
        if a < b {
            GateVar::Interaction(a, b)
        } else {
            GateVar::Interaction(b, a)
        }
    }

    /// Stable textual name: `q7` for idles, `q7-q12` for interactions.
    pub fn name(&self) -> String {
        match *self {
            GateVar::Idle(q) => format!("q{q}"),
            GateVar::Interaction(a, b) => format!("q{a}-q{b}"),
        }
    }

    /// Parses the `name()` format back into a variable.
    pub fn parse(s: &str) -> Result<GateVar> {
        let err = || Error::parse(format!("invalid variable name {s:?}"));
        let body = s.strip_prefix('q').ok_or_else(err)?;
        match body.split_once("-q") {
            None => Ok(GateVar::Idle(body.parse().map_err(|_| err())?)),
            Some((a, b)) => {
                let a: QubitId = a.parse().map_err(|_| err())?;
                let b: QubitId = b.parse().map_err(|_| err())?;
                if a >= b {
                    return Err(err());
                }
                Ok(GateVar::Interaction(a, b))
            }
        }
    }
}

/// Index of a variable within a [`GateVariableGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl std::fmt::Display for VarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// The optimization graph over gate variables.
///
/// Variables are laid out as all idles (sorted by qubit id) followed by all
/// interactions (sorted by pair), so a `VarId` doubles as a dense array index.
#[derive(Debug, Clone)]
pub struct GateVariableGraph {
    vars: Vec<GateVar>,
    supports: Vec<Vec<QubitId>>,
    /// Variables sharing a qubit, plus idle–idle pairs joined by a coupler.
    adjacency: Vec<Vec<VarId>>,
    /// Idle ↔ interaction incidence only (an interaction touches exactly the
    /// idles of its two qubits). Drives scoped neighborhoods and closures.
    incidence: Vec<Vec<VarId>>,
    index: BTreeMap<GateVar, VarId>,
    n_idle: usize,
    qubit_ids: Vec<QubitId>,
}

impl GateVariableGraph {
    pub fn from_processor(g: &ProcessorGraph) -> GateVariableGraph {
        let qubit_ids: Vec<QubitId> = g.qubits().iter().map(|q| q.id).collect();
        let mut vars: Vec<GateVar> = qubit_ids.iter().map(|&q| GateVar::Idle(q)).collect();
        vars.extend(g.couplers().iter().map(|&(a, b)| GateVar::Interaction(a, b)));
        let n_idle = qubit_ids.len();
        let index: BTreeMap<GateVar, VarId> = vars
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, VarId(i)))
            .collect();
        let supports: Vec<Vec<QubitId>> = vars
            .iter()
            .map(|v| match *v {
                GateVar::Idle(q) => vec![q],
                GateVar::Interaction(a, b) => vec![a, b],
            })
            .collect();
        // Variables supported on each qubit, in VarId order.
        let mut on_qubit: BTreeMap<QubitId, Vec<VarId>> = BTreeMap::new();
        for (i, support) in supports.iter().enumerate() {
            for &q in support {
                on_qubit.entry(q).or_default().push(VarId(i));
            }
        }
        let mut adjacency: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); vars.len()];
        for list in on_qubit.values() {
            for &a in list {
                for &b in list {
                    if a != b {
                        adjacency[a.0].insert(b);
                    }
                }
            }
        }
        for &(a, b) in g.couplers() {
            let ia = index[&GateVar::Idle(a)];
            let ib = index[&GateVar::Idle(b)];
            adjacency[ia.0].insert(ib);
            adjacency[ib.0].insert(ia);
        }
        let adjacency: Vec<Vec<VarId>> = adjacency
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();
        let mut incidence: Vec<Vec<VarId>> = vec![Vec::new(); vars.len()];
        for (i, v) in vars.iter().enumerate() {
            if let GateVar::Interaction(a, b) = *v {
                let ia = index[&GateVar::Idle(a)];
                let ib = index[&GateVar::Idle(b)];
                incidence[i] = vec![ia, ib];
                incidence[ia.0].push(VarId(i));
                incidence[ib.0].push(VarId(i));
            }
        }
        for list in &mut incidence {
            list.sort_unstable();
        }
        GateVariableGraph {
            vars,
            supports,
            adjacency,
            incidence,
            index,
            n_idle,
            qubit_ids,
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn n_idle(&self) -> usize {
        self.n_idle
    }

    pub fn n_interaction(&self) -> usize {
        self.vars.len() - self.n_idle
    }

    pub fn vars(&self) -> &[GateVar] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> GateVar {
        self.vars[id.0]
    }

    pub fn is_idle(&self, id: VarId) -> bool {
        id.0 < self.n_idle
    }

    pub fn name(&self, id: VarId) -> String {
        self.vars[id.0].name()
    }

    pub fn lookup(&self, v: GateVar) -> Option<VarId> {
        self.index.get(&v).copied()
    }

    /// Resolves a `name()`-format string to a variable id.
    pub fn lookup_name(&self, s: &str) -> Result<VarId> {
        let v = GateVar::parse(s)?;
        self.lookup(v)
            .ok_or_else(|| Error::topology(format!("unknown variable {s:?}")))
    }

    pub fn idle_var(&self, q: QubitId) -> Option<VarId> {
        self.qubit_ids
            .binary_search(&q)
            .ok()
            .map(VarId)
    }

    pub fn interaction_var(&self, a: QubitId, b: QubitId) -> Option<VarId> {
        self.lookup(GateVar::interaction(a, b))
    }

    /// Qubits the variable's gate acts on (1 for idles, 2 for interactions).
    pub fn support(&self, id: VarId) -> &[QubitId] {
        &self.supports[id.0]
    }

    /// Sorted adjacent variables (shared qubit, or coupled idle pair).
    pub fn adjacent(&self, id: VarId) -> &[VarId] {
        &self.adjacency[id.0]
    }

    /// Idle ↔ interaction incidence: for an idle, its interactions; for an
    /// interaction, its two idles.
    pub fn incident(&self, id: VarId) -> &[VarId] {
        &self.incidence[id.0]
    }

    /// Variables within incidence-graph distance `< radius` of `center`
    /// (alternating idle/interaction shells), in sorted order. The distance of
    /// `center` to itself is 0, so `radius = 1` yields just the center.
    pub fn ball(&self, center: VarId, radius: u32) -> Vec<VarId> {
        let mut dist: BTreeMap<VarId, u32> = BTreeMap::new();
        dist.insert(center, 0);
        let mut frontier = vec![center];
        for d in 1..radius {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in self.incident(u) {
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

    /// Variables at incidence-graph distance in `[radius, radius + width)` of
    /// `center`: the annulus just beyond `ball(center, radius)`.
    pub fn ring(&self, center: VarId, radius: u32, width: u32) -> Vec<VarId> {
        let inner: BTreeSet<VarId> = self.ball(center, radius).into_iter().collect();
        let outer = self.ball(center, radius + width);
        outer.into_iter().filter(|v| !inner.contains(v)).collect()
    }
}

// ====================== Layer coloring ======================

/// Assignment of every coupler to one of the four interleaved two-qubit-gate
/// layers. Within a layer no qubit appears twice, so all of a layer's gates
/// can execute concurrently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerColoring {
    layers: [Vec<(QubitId, QubitId)>; 4],
    by_coupler: BTreeMap<(QubitId, QubitId), u8>,
}

impl LayerColoring {
    pub fn layers(&self) -> &[Vec<(QubitId, QubitId)>; 4] {
        &self.layers
    }

    pub fn layer_of(&self, a: QubitId, b: QubitId) -> Option<u8> {
        let pair = if a < b { (a, b) } else { (b, a) };
        self.by_coupler.get(&pair).copied()
    }
}

/// Colors couplers into the four standard layers by orientation and parity:
/// horizontal couplers split on the parity of `min(x) + y`, vertical on the
/// parity of `x + min(y)`. A qubit's two horizontal (or vertical) couplers
/// always land in different layers, so the partition is conflict-free on any
/// valid processor.
pub fn color_cz_layers(g: &ProcessorGraph) -> Result<LayerColoring> {
    for q in g.qubits() {
        if g.degree(q.id) > 4 {
            return Err(Error::topology(format!(
                "qubit {} has degree {} > 4; cannot 4-color couplers",
                q.id,
                g.degree(q.id)
            )));
        }
    }
    let mut layers: [Vec<(QubitId, QubitId)>; 4] = Default::default();
    let mut by_coupler = BTreeMap::new();
    for &(a, b) in g.couplers() {
        let qa = g.qubit(a).expect("validated coupler endpoint");
        let qb = g.qubit(b).expect("validated coupler endpoint");
        let layer = if qa.y == qb.y {
            (qa.x.min(qb.x) + qa.y).rem_euclid(2) as u8
        } else {
            2 + (qa.x + qa.y.min(qb.y)).rem_euclid(2) as u8
        };
        layers[layer as usize].push((a, b));
        by_coupler.insert((a, b), layer);
    }
    for (i, layer) in layers.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for &(a, b) in layer {
            if !seen.insert(a) || !seen.insert(b) {
                return Err(Error::topology(format!(
                    "layer {i} uses a qubit twice; processor is not 4-layerable"
                )));
            }
        }
    }
    Ok(LayerColoring { layers, by_coupler })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lattice_counts_match_closed_forms() {
        for d in [1u32, 2, 3, 5, 8, 23] {
            let g = build_surface_code_lattice(d).unwrap();
            let n = g.n_qubits() as u32;
            assert_eq!(n, 2 * d * d - 1, "qubit count at d={d}");
            assert_eq!(g.couplers().len() as u32, 4 * d * (d - 1), "couplers at d={d}");
            assert_eq!(g.distance(), Some(d));
            assert!(g.is_connected(), "lattice d={d} connected");
            for q in g.qubits() {
                assert!(g.degree(q.id) <= 4);
            }
        }
    }

    #[test]
    fn lattice_distance_zero_rejected() {
        assert!(build_surface_code_lattice(0).is_err());
    }

    #[test]
    fn standard68_shape() {
        let g = ProcessorGraph::standard68();
        assert_eq!(g.n_qubits(), 68);
        assert_eq!(g.couplers().len(), 109);
        assert!(g.is_connected());
        for q in g.qubits() {
            assert!(g.degree(q.id) <= 4);
        }
        let vars = GateVariableGraph::from_processor(&g);
        assert_eq!(vars.len(), 177);
        assert_eq!(vars.n_idle(), 68);
        assert_eq!(vars.n_interaction(), 109);
    }

    #[test]
    fn manhattan_validation_rejects_long_couplers() {
        let qubits = vec![
            Qubit { id: 0, x: 0, y: 0 },
            Qubit { id: 1, x: 2, y: 0 },
        ];
        let err = ProcessorGraph::from_parts("bad", qubits, vec![(0, 1)], None).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn induced_subgraph_is_stable_and_idempotent() {
        let g = build_surface_code_lattice(3).unwrap();
        let all: BTreeSet<QubitId> = g.qubits().iter().map(|q| q.id).collect();
        assert_eq!(g.induced_subgraph(&all).unwrap(), g);

        let keep: BTreeSet<QubitId> = all.iter().copied().take(9).collect();
        let sub = g.induced_subgraph(&keep).unwrap();
        assert_eq!(sub.n_qubits(), 9);
        for q in sub.qubits() {
            let orig = g.qubit(q.id).unwrap();
            assert_eq!((q.x, q.y), (orig.x, orig.y), "coordinates preserved");
        }
        for &(a, b) in sub.couplers() {
            assert!(keep.contains(&a) && keep.contains(&b));
            assert!(g.has_coupler(a, b));
        }
        let missing: BTreeSet<QubitId> = BTreeSet::from([9999]);
        assert!(g.induced_subgraph(&missing).is_err());
    }

    #[test]
    fn variable_counts_scale_with_lattice() {
        let g = build_surface_code_lattice(3).unwrap();
        let vars = GateVariableGraph::from_processor(&g);
        assert_eq!(vars.len(), 17 + 24);
        // Roughly 3N variables on large lattices (N idles + ~2N interactions).
        let g = build_surface_code_lattice(11).unwrap();
        let vars = GateVariableGraph::from_processor(&g);
        let ratio = vars.len() as f64 / g.n_qubits() as f64;
        assert!((2.5..3.2).contains(&ratio), "ratio {ratio}");
    }

    /// Brute-force adjacency oracle: supports intersect, or both are idles of
    /// qubits joined by a coupler.
    fn adjacency_oracle(g: &ProcessorGraph, vars: &GateVariableGraph) {
        for a in 0..vars.len() {
            let a = VarId(a);
            for b in 0..vars.len() {
                let b = VarId(b);
                if a == b {
                    continue;
                }
                let sa = vars.support(a);
                let sb = vars.support(b);
                let share = sa.iter().any(|q| sb.contains(q));
                let coupled_idles = match (vars.var(a), vars.var(b)) {
                    (GateVar::Idle(p), GateVar::Idle(q)) => g.has_coupler(p, q),
                    _ => false,
                };
                let expect = share || coupled_idles;
                let got = vars.adjacent(a).binary_search(&b).is_ok();
                assert_eq!(expect, got, "adjacency {a} vs {b}");
            }
        }
    }

    #[test]
    fn adjacency_matches_brute_force() {
        let g = build_surface_code_lattice(3).unwrap();
        adjacency_oracle(&g, &GateVariableGraph::from_processor(&g));
        let g = ProcessorGraph::standard68();
        adjacency_oracle(&g, &GateVariableGraph::from_processor(&g));
    }

    #[test]
    fn interaction_adjacency_structure() {
        let g = build_surface_code_lattice(5).unwrap();
        let vars = GateVariableGraph::from_processor(&g);
        for i in 0..vars.len() {
            let id = VarId(i);
            if let GateVar::Interaction(a, b) = vars.var(id) {
                // Exactly the two idles plus interactions sharing a qubit.
                for &adj in vars.adjacent(id) {
                    match vars.var(adj) {
                        GateVar::Idle(q) => assert!(q == a || q == b),
                        GateVar::Interaction(p, q) => {
                            assert!([p, q].iter().any(|x| *x == a || *x == b))
                        }
                    }
                }
                let idle_count = vars
                    .adjacent(id)
                    .iter()
                    .filter(|&&v| vars.is_idle(v))
                    .count();
                assert_eq!(idle_count, 2);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        let g = build_surface_code_lattice(3).unwrap();
        let vars = GateVariableGraph::from_processor(&g);
        for i in 0..vars.len() {
            let id = VarId(i);
            assert_eq!(vars.lookup_name(&vars.name(id)).unwrap(), id);
        }
        assert!(GateVar::parse("bogus").is_err());
        assert!(GateVar::parse("q3-q1").is_err(), "reversed pair rejected");
        assert!(vars.lookup_name("q9999").is_err());
    }

    #[test]
    fn incidence_shell_sizes_match_scope_dimensions() {
        // On a lattice interior, the ball of the incidence metric grows
        // 1, 5, 9, 21, 29, 49 with its radius: idle center, then hinged
        // interactions, then neighbor idles, and so on outward.
        let g = build_surface_code_lattice(7).unwrap();
        let vars = GateVariableGraph::from_processor(&g);
        // Pick the qubit nearest the lattice centroid.
        let n = g.n_qubits() as i64;
        let cx = g.qubits().iter().map(|q| q.x as i64).sum::<i64>() / n;
        let cy = g.qubits().iter().map(|q| q.y as i64).sum::<i64>() / n;
        let center_q = g
            .qubits()
            .iter()
            .min_by_key(|q| (q.x as i64 - cx).abs() + (q.y as i64 - cy).abs())
            .unwrap()
            .id;
        let center = vars.idle_var(center_q).unwrap();
        assert_eq!(g.degree(center_q), 4, "central qubit is interior");
        let expected = [1usize, 5, 9, 21, 29, 49];
        for (i, want) in expected.iter().enumerate() {
            let got = vars.ball(center, (i + 1) as u32).len();
            assert_eq!(got, *want, "ball radius {}", i + 1);
        }
    }

    #[test]
    fn ring_is_annulus() {
        let g = build_surface_code_lattice(5).unwrap();
        let vars = GateVariableGraph::from_processor(&g);
        let center = VarId(12);
        let ball2: BTreeSet<VarId> = vars.ball(center, 2).into_iter().collect();
        let ring = vars.ring(center, 2, 2);
        assert!(!ring.is_empty());
        for v in &ring {
            assert!(!ball2.contains(v));
        }
        let ball4: BTreeSet<VarId> = vars.ball(center, 4).into_iter().collect();
        for v in &ring {
            assert!(ball4.contains(v));
        }
    }

    #[test]
    fn coloring_partitions_all_couplers() {
        for g in [build_surface_code_lattice(5).unwrap(), ProcessorGraph::standard68()] {
            let coloring = color_cz_layers(&g).unwrap();
            let total: usize = coloring.layers().iter().map(|l| l.len()).sum();
            assert_eq!(total, g.couplers().len());
            let mut seen = BTreeSet::new();
            for (i, layer) in coloring.layers().iter().enumerate() {
                let mut qubits = BTreeSet::new();
                for &(a, b) in layer {
                    assert!(seen.insert((a, b)), "coupler colored twice");
                    assert!(qubits.insert(a), "qubit {a} twice in layer {i}");
                    assert!(qubits.insert(b), "qubit {b} twice in layer {i}");
                    assert_eq!(coloring.layer_of(a, b), Some(i as u8));
                }
            }
        }
    }

    #[test]
    fn pairs_within_hops_brute_force() {
        let g = build_surface_code_lattice(2).unwrap();
        let pairs = g.pairs_within_hops(2);
        for &(a, b, d) in &pairs {
            assert!(a < b);
            assert_eq!(g.hop_distance(a, b, 10), Some(d));
            assert!((1..=2).contains(&d));
        }
        // Completeness: every pair with hop distance ≤ 2 appears.
        let ids: Vec<QubitId> = g.qubits().iter().map(|q| q.id).collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if let Some(d) = g.hop_distance(a, b, 2) {
                    assert!(pairs.contains(&(a, b, d)), "missing pair ({a},{b})");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lattice_couplers_are_unit_steps(d in 1u32..12) {
            let g = build_surface_code_lattice(d).unwrap();
            for &(a, b) in g.couplers() {
                let qa = g.qubit(a).unwrap();
                let qb = g.qubit(b).unwrap();
                prop_assert_eq!((qa.x - qb.x).abs() + (qa.y - qb.y).abs(), 1);
            }
        }

        #[test]
        fn adjacency_symmetric_irreflexive(d in 1u32..7) {
            let g = build_surface_code_lattice(d).unwrap();
            let vars = GateVariableGraph::from_processor(&g);
            for i in 0..vars.len() {
                let id = VarId(i);
                for &j in vars.adjacent(id) {
                    prop_assert_ne!(id, j);
                    prop_assert!(vars.adjacent(j).binary_search(&id).is_ok());
                }
            }
        }
    }
}
