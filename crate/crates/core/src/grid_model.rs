//! Distribution grid data model, equipment catalog and the JSON grid schema.
//!
//! A [`Network`] is a single-voltage-level grid with exactly one PCC bus.
//! The only buses allowed on a different voltage level are the high-voltage
//! sides of transformers (normally the PCC itself).
//!
//! Sign convention: unit injections are positive into the grid, so loads
//! live on `p <= 0`. The PCC flow is reported as import into the
//! distribution grid.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PqPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VoltageLevel {
    LV,
    MV,
    HV,
}

impl VoltageLevel {
    /// Default voltage band when a bus does not carry its own bounds.
    pub fn default_band(self) -> (f64, f64) {
        match self {
            VoltageLevel::LV => (0.90, 1.10),
            VoltageLevel::MV | VoltageLevel::HV => (0.95, 1.05),
        }
    }
}

impl fmt::Display for VoltageLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VoltageLevel::LV => "LV",
            VoltageLevel::MV => "MV",
            VoltageLevel::HV => "HV",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Urbanization {
    Rural,
    Suburban,
    Urban,
}

impl fmt::Display for Urbanization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Urbanization::Rural => "rural",
            Urbanization::Suburban => "suburban",
            Urbanization::Urban => "urban",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub voltage_level: VoltageLevel,
    pub base_kv: f64,
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    pub is_pcc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: String,
    voltage_level: VoltageLevel,
    base_kv: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_min_pu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_max_pu: Option<f64>,
    #[serde(default)]
    is_pcc: bool,
}

impl From<BusRecord> for Bus {
    fn from(r: BusRecord) -> Self {
        let (lo, hi) = r.voltage_level.default_band();
        Bus {
            id: r.id,
            voltage_level: r.voltage_level,
            base_kv: r.base_kv,
            v_min_pu: r.v_min_pu.unwrap_or(lo),
            v_max_pu: r.v_max_pu.unwrap_or(hi),
            is_pcc: r.is_pcc,
        }
    }
}

impl From<Bus> for BusRecord {
    fn from(b: Bus) -> Self {
        BusRecord {
            id: b.id,
            voltage_level: b.voltage_level,
            base_kv: b.base_kv,
            v_min_pu: Some(b.v_min_pu),
            v_max_pu: Some(b.v_max_pu),
            is_pcc: b.is_pcc,
        }
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub length_km: f64,
    pub type_id: String,
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub i_max_ka: f64,
    #[serde(default = "one")]
    pub parallel_count: u32,
}

impl Line {
    /// Series impedance of all parallel circuits in ohms.
    pub fn impedance_ohm(&self) -> Complex64 {
        Complex64::new(self.r_ohm_per_km, self.x_ohm_per_km) * self.length_km
            / f64::from(self.parallel_count)
    }

    /// Series impedance in per unit of the given voltage/power base.
    pub fn impedance_pu(&self, base_kv: f64, base_mva: f64) -> Complex64 {
        ohm_to_pu(self.impedance_ohm(), base_kv, base_mva)
    }

    /// Thermal rating in MVA at the given nominal voltage.
    pub fn rating_mva(&self, base_kv: f64) -> f64 {
        3f64.sqrt() * base_kv * self.i_max_ka * f64::from(self.parallel_count)
    }

    pub fn apply_type(&mut self, line_type: &LineType) {
        self.r_ohm_per_km = line_type.r_ohm_per_km;
        self.x_ohm_per_km = line_type.x_ohm_per_km;
        self.i_max_ka = line_type.i_max_ka;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transformer {
    pub id: String,
    pub hv_bus: String,
    pub lv_bus: String,
    pub s_rated_mva: f64,
    pub vk_percent: f64,
    pub type_id: String,
    #[serde(default = "one")]
    pub parallel_count: u32,
}

impl Transformer {
    /// Series reactance on the system base; ideal ratio, no copper losses.
    pub fn reactance_pu(&self, base_mva: f64) -> f64 {
        self.vk_percent / 100.0 * base_mva / self.rating_mva()
    }

    pub fn rating_mva(&self) -> f64 {
        self.s_rated_mva * f64::from(self.parallel_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Load,
    Generator,
    EquivalentFpr,
}

/// The PQ set of an embedded child grid, in the parent's injection convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalentRegion {
    pub vertices: Vec<PqPoint>,
    pub cost: f64,
    pub stage_ref: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Unit {
    pub id: String,
    pub bus: String,
    pub kind: UnitKind,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub q_min_mvar: f64,
    pub q_max_mvar: f64,
    #[serde(default)]
    pub technology: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child_fpr_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalent: Option<EquivalentRegion>,
}

impl Unit {
    /// Setpoint of the box range closest to zero injection.
    pub fn neutral(&self) -> (f64, f64) {
        (
            0f64.clamp(self.p_min_mw, self.p_max_mw),
            0f64.clamp(self.q_min_mvar, self.q_max_mvar),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineType {
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    pub i_max_ka: f64,
    pub c_mat_per_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerType {
    pub s_rated_mva: f64,
    pub c_trafo: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquipmentCatalog {
    pub line_types: BTreeMap<String, LineType>,
    pub transformer_types: BTreeMap<String, TransformerType>,
    pub install_cost_per_km: BTreeMap<Urbanization, f64>,
}

impl EquipmentCatalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let catalog: EquipmentCatalog = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        catalog.check()?;
        Ok(catalog)
    }

    fn check(&self) -> Result<()> {
        for (id, t) in &self.line_types {
            if !(t.i_max_ka > 0.0) || t.c_mat_per_km < 0.0 || t.r_ohm_per_km < 0.0 {
                return Err(Error::Catalog(format!(
                    "line type {id} has invalid parameters"
                )));
            }
        }
        for (id, t) in &self.transformer_types {
            if !(t.s_rated_mva > 0.0) || t.c_trafo < 0.0 {
                return Err(Error::Catalog(format!(
                    "transformer type {id} has invalid parameters"
                )));
            }
        }
        if let Some((u, _)) = self.install_cost_per_km.iter().find(|(_, c)| **c < 0.0) {
            return Err(Error::Catalog(format!("negative install cost for {u}")));
        }
        Ok(())
    }

    /// Line types ordered by ampacity, ties broken by id.
    pub fn line_types_by_ampacity(&self) -> Vec<(&str, &LineType)> {
        let mut types: Vec<_> = self
            .line_types
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .collect();
        types.sort_by(|a, b| a.1.i_max_ka.total_cmp(&b.1.i_max_ka).then(a.0.cmp(b.0)));
        types
    }

    pub fn transformer_types_by_rating(&self) -> Vec<(&str, &TransformerType)> {
        let mut types: Vec<_> = self
            .transformer_types
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .collect();
        types.sort_by(|a, b| {
            a.1.s_rated_mva
                .total_cmp(&b.1.s_rated_mva)
                .then(a.0.cmp(b.0))
        });
        types
    }

    pub fn line_type(&self, id: &str) -> Result<&LineType> {
        self.line_types
            .get(id)
            .ok_or_else(|| Error::Catalog(format!("unknown line type `{id}`")))
    }

    pub fn transformer_type(&self, id: &str) -> Result<&TransformerType> {
        self.transformer_types
            .get(id)
            .ok_or_else(|| Error::Catalog(format!("unknown transformer type `{id}`")))
    }

    pub fn install_cost(&self, urbanization: Urbanization) -> Result<f64> {
        self.install_cost_per_km
            .get(&urbanization)
            .copied()
            .ok_or_else(|| Error::Catalog(format!("no install cost for {urbanization}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub id: String,
    pub urbanization: Urbanization,
    pub base_mva: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    meta: Meta,
    buses: Vec<BusRecord>,
    #[serde(default)]
    lines: Vec<Line>,
    #[serde(default)]
    transformers: Vec<Transformer>,
    #[serde(default)]
    units: Vec<Unit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "NetworkFile", into = "NetworkFile")]
pub struct Network {
    pub id: String,
    pub urbanization: Urbanization,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub transformers: Vec<Transformer>,
    pub units: Vec<Unit>,
}

impl From<NetworkFile> for Network {
    fn from(f: NetworkFile) -> Self {
        Network {
            id: f.meta.id,
            urbanization: f.meta.urbanization,
            base_mva: f.meta.base_mva,
            buses: f.buses.into_iter().map(Bus::from).collect(),
            lines: f.lines,
            transformers: f.transformers,
            units: f.units,
        }
    }
}

impl From<Network> for NetworkFile {
    fn from(n: Network) -> Self {
        NetworkFile {
            meta: Meta {
                id: n.id,
                urbanization: n.urbanization,
                base_mva: n.base_mva,
            },
            buses: n.buses.into_iter().map(BusRecord::from).collect(),
            lines: n.lines,
            transformers: n.transformers,
            units: n.units,
        }
    }
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Finding {
    pub element: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

impl Network {
    pub fn bus_index(&self) -> HashMap<&str, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn pcc_index(&self) -> Result<usize> {
        let mut pcc = self.buses.iter().enumerate().filter(|(_, b)| b.is_pcc);
        match (pcc.next(), pcc.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(Error::Topology(format!(
                "network {} has no PCC bus",
                self.id
            ))),
            (Some(_), Some(_)) => Err(Error::Topology(format!(
                "network {} has multiple PCC buses",
                self.id
            ))),
        }
    }

    pub fn pcc_bus(&self) -> Result<&Bus> {
        self.pcc_index().map(|i| &self.buses[i])
    }

    /// The voltage level of the grid body, i.e. ignoring transformer HV sides.
    pub fn voltage_level(&self) -> VoltageLevel {
        let hv: BTreeSet<&str> = self
            .transformers
            .iter()
            .map(|t| t.hv_bus.as_str())
            .collect();
        self.buses
            .iter()
            .find(|b| !hv.contains(b.id.as_str()))
            .or_else(|| self.buses.first())
            .map(|b| b.voltage_level)
            .unwrap_or(VoltageLevel::LV)
    }

    pub fn unit(&self, id: &str) -> Option<&Unit> {
        self.units.iter().find(|u| u.id == id)
    }

    /// Largest absolute aggregate active power the units can draw or inject.
    pub fn peak_mw(&self) -> f64 {
        let low: f64 = self.units.iter().map(|u| u.p_min_mw).sum();
        let high: f64 = self.units.iter().map(|u| u.p_max_mw).sum();
        low.abs().max(high.abs())
    }

    /// Sum of embedded child-grid costs carried by equivalent units.
    pub fn embedded_cost(&self) -> f64 {
        self.units
            .iter()
            .filter_map(|u| u.equivalent.as_ref())
            .fold(0.0, |acc, e| acc + e.cost)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Adjacency over lines and transformers as (neighbour index, branch id).
    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, &str)>> {
        let index = self.bus_index();
        let mut adj = vec![Vec::new(); self.buses.len()];
        let edges = self
            .lines
            .iter()
            .map(|l| (l.from_bus.as_str(), l.to_bus.as_str(), l.id.as_str()))
            .chain(
                self.transformers
                    .iter()
                    .map(|t| (t.hv_bus.as_str(), t.lv_bus.as_str(), t.id.as_str())),
            );
        for (a, b, id) in edges {
            if let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) {
                adj[i].push((j, id));
                adj[j].push((i, id));
            }
        }
        adj
    }

    fn is_connected(&self) -> bool {
        if self.buses.is_empty() {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub fn z_base_ohm(base_kv: f64, base_mva: f64) -> f64 {
    base_kv * base_kv / base_mva
}

pub fn ohm_to_pu(z: Complex64, base_kv: f64, base_mva: f64) -> Complex64 {
    z / z_base_ohm(base_kv, base_mva)
}

pub fn pu_to_ohm(z: Complex64, base_kv: f64, base_mva: f64) -> Complex64 {
    z * z_base_ohm(base_kv, base_mva)
}

/// Checks every network invariant and returns the broken ones, ordered by
/// element id.
pub fn validate(network: &Network) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |element: &str, message: String| {
        out.push(Finding {
            element: element.to_string(),
            message,
        })
    };

    if !(network.base_mva > 0.0) {
        push(&network.id, "base_mva must be positive".into());
    }

    let mut seen = BTreeSet::new();
    for b in &network.buses {
        if !seen.insert(b.id.as_str()) {
            push(&b.id, "duplicate bus id".into());
        }
        if !(b.base_kv > 0.0) {
            push(&b.id, "base_kv must be positive".into());
        }
        if !(0.0 < b.v_min_pu && b.v_min_pu < b.v_max_pu) {
            push(
                &b.id,
                "voltage band requires 0 < v_min_pu < v_max_pu".into(),
            );
        }
    }
    match network.buses.iter().filter(|b| b.is_pcc).count() {
        1 => {}
        0 => push(&network.id, "no PCC".into()),
        _ => push(&network.id, "multiple PCC".into()),
    }

    let index = network.bus_index();
    let mut branch_ids = BTreeSet::new();
    for l in &network.lines {
        if !branch_ids.insert(l.id.as_str()) {
            push(&l.id, "duplicate branch id".into());
        }
        for end in [&l.from_bus, &l.to_bus] {
            if !index.contains_key(end.as_str()) {
                push(&l.id, format!("unknown bus `{end}`"));
            }
        }
        if l.from_bus == l.to_bus {
            push(&l.id, "from_bus equals to_bus".into());
        }
        if !(l.length_km > 0.0) {
            push(&l.id, "length_km must be positive".into());
        }
        if !(l.i_max_ka > 0.0) {
            push(&l.id, "i_max_ka must be positive".into());
        }
        if l.parallel_count < 1 {
            push(&l.id, "parallel_count must be at least 1".into());
        }
        if l.r_ohm_per_km < 0.0 || l.x_ohm_per_km < 0.0 || l.r_ohm_per_km + l.x_ohm_per_km <= 0.0 {
            push(&l.id, "impedance must be non-negative and nonzero".into());
        }
        if let (Some(a), Some(b)) = (network.bus(&l.from_bus), network.bus(&l.to_bus)) {
            if a.base_kv != b.base_kv {
                push(&l.id, "line connects buses with different base_kv".into());
            }
        }
    }
    for t in &network.transformers {
        if !branch_ids.insert(t.id.as_str()) {
            push(&t.id, "duplicate branch id".into());
        }
        for end in [&t.hv_bus, &t.lv_bus] {
            if !index.contains_key(end.as_str()) {
                push(&t.id, format!("unknown bus `{end}`"));
            }
        }
        if t.hv_bus == t.lv_bus {
            push(&t.id, "hv_bus equals lv_bus".into());
        }
        if !(t.s_rated_mva > 0.0) {
            push(&t.id, "s_rated_mva must be positive".into());
        }
        if !(t.vk_percent > 0.0 && t.vk_percent < 100.0) {
            push(&t.id, "vk_percent must lie in (0, 100)".into());
        }
        if t.parallel_count < 1 {
            push(&t.id, "parallel_count must be at least 1".into());
        }
    }

    let mut unit_ids = BTreeSet::new();
    for u in &network.units {
        if !unit_ids.insert(u.id.as_str()) {
            push(&u.id, "duplicate unit id".into());
        }
        if !index.contains_key(u.bus.as_str()) {
            push(&u.id, format!("unknown bus `{}`", u.bus));
        }
        if !(u.p_min_mw <= u.p_max_mw) {
            push(&u.id, "p_min_mw exceeds p_max_mw".into());
        }
        if !(u.q_min_mvar <= u.q_max_mvar) {
            push(&u.id, "q_min_mvar exceeds q_max_mvar".into());
        }
        match u.kind {
            UnitKind::Load if u.p_max_mw > 0.0 => {
                push(&u.id, "load must not inject (p_max_mw > 0)".into())
            }
            UnitKind::EquivalentFpr if u.equivalent.is_none() => {
                push(&u.id, "equivalent unit without region".into())
            }
            _ => {}
        }
    }

    let hv: BTreeSet<&str> = network
        .transformers
        .iter()
        .map(|t| t.hv_bus.as_str())
        .collect();
    let levels: BTreeSet<VoltageLevel> = network
        .buses
        .iter()
        .filter(|b| !hv.contains(b.id.as_str()))
        .map(|b| b.voltage_level)
        .collect();
    if levels.len() > 1 {
        push(&network.id, "buses span more than one voltage level".into());
    }
    if !network.buses.is_empty() && !network.is_connected() {
        push(&network.id, "network is not connected".into());
    }

    out.sort();
    out
}

/// Reads a grid file, checks it against the catalog and all invariants.
pub fn load_network(path: impl AsRef<Path>, catalog: &EquipmentCatalog) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text, path, catalog)
}

pub fn parse_network(text: &str, path: &Path, catalog: &EquipmentCatalog) -> Result<Network> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let network: Network = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;

    let mut seen = BTreeSet::new();
    for b in &network.buses {
        if !seen.insert(b.id.as_str()) {
            return Err(schema(format!("duplicate bus id `{}`", b.id)));
        }
    }
    for l in &network.lines {
        if !catalog.line_types.contains_key(&l.type_id) {
            return Err(Error::Catalog(format!(
                "line {} references unknown type `{}`",
                l.id, l.type_id
            )));
        }
    }
    for t in &network.transformers {
        if !catalog.transformer_types.contains_key(&t.type_id) {
            return Err(Error::Catalog(format!(
                "transformer {} references unknown type `{}`",
                t.id, t.type_id
            )));
        }
    }

    let findings = validate(&network);
    if findings
        .iter()
        .any(|f| f.message == "network is not connected")
    {
        return Err(Error::Topology(format!(
            "network {} is not connected",
            network.id
        )));
    }
    if !findings.is_empty() {
        let joined: Vec<String> = findings.iter().map(|f| f.to_string()).collect();
        return Err(schema(joined.join("; ")));
    }
    Ok(network)
}
