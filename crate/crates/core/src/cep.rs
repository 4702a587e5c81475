//! Linear multi-node capacity expansion with TSO/DSO links.
//!
//! Every DSO link connects a transmission node to a distribution node named
//! after the link. The link capacity `M` is priced by the linearized planning
//! region of the grid behind it and bounds the link flow per snapshot.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpr_builder::{CapacityMetric, LinearFprModel};
use crate::lp::{self, LinearProgram, LpStatus, Sense};

fn default_loss() -> f64 {
    0.02
}

fn one() -> f64 {
    1.0
}

fn inf() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    /// Demand per snapshot; empty means none.
    #[serde(default)]
    pub demand_mw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: String,
    /// TSO node id or DSO link id.
    pub node: String,
    pub technology: String,
    pub capex_per_mw: f64,
    pub marginal_cost: f64,
    /// Availability per snapshot; empty means always 1.
    #[serde(default)]
    pub availability: Vec<f64>,
    #[serde(default)]
    pub p_nom_min: f64,
    #[serde(default = "inf", with = "opt_inf")]
    pub p_nom_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storage {
    pub id: String,
    pub node: String,
    pub technology: String,
    pub capex_per_mw: f64,
    pub capex_per_mwh: f64,
    /// Charging efficiency; discharge is lossless.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxLink {
    pub id: String,
    pub from: String,
    pub to: String,
    pub capex_per_mw: f64,
    #[serde(default)]
    pub loss_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsoLink {
    pub id: String,
    pub node: String,
    /// Linearized planning region; without one the link is free and unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fpr_model: Option<LinearFprModel>,
    #[serde(default = "default_loss")]
    pub loss_factor: f64,
    #[serde(default)]
    pub demand_mw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CepModel {
    pub name: String,
    /// Hours represented by each snapshot.
    pub weights: Vec<f64>,
    /// Factor converting capital cost into cost per modeled period.
    #[serde(default = "one")]
    pub annualization: f64,
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub storage: Vec<Storage>,
    #[serde(default)]
    pub tx_links: Vec<TxLink>,
    #[serde(default)]
    pub dso_links: Vec<DsoLink>,
}

/// Infinite upper bounds are written as `null`.
mod opt_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl CepModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: CepModel = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        model.check()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn snapshots(&self) -> usize {
        self.weights.len()
    }

    pub fn check(&self) -> Result<()> {
        let t = self.snapshots();
        let bad = |m: String| Err(Error::Invalid(m));
        if t == 0 {
            return bad("model has no snapshots".into());
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return bad("snapshot weights must be positive".into());
        }
        if !(self.annualization >= 0.0) {
            return bad("annualization must be nonnegative".into());
        }
        let profile = |what: &str, id: &str, p: &[f64]| -> Result<()> {
            if !p.is_empty() && p.len() != t {
                return Err(Error::Invalid(format!(
                    "{what} of {id} has {} entries, expected {t}",
                    p.len()
                )));
            }
            Ok(())
        };
        let mut ids: HashMap<&str, bool> = HashMap::new();
        for n in &self.nodes {
            profile("demand", &n.id, &n.demand_mw)?;
            if n.demand_mw.iter().any(|d| !(*d >= 0.0)) {
                return bad(format!("negative demand at {}", n.id));
            }
            if ids.insert(&n.id, true).is_some() {
                return bad(format!("duplicate node {}", n.id));
            }
        }
        for d in &self.dso_links {
            profile("demand", &d.id, &d.demand_mw)?;
            if d.demand_mw.iter().any(|x| !(*x >= 0.0)) {
                return bad(format!("negative demand at {}", d.id));
            }
            if !(0.0..1.0).contains(&d.loss_factor) {
                return bad(format!("loss factor of {} outside [0, 1)", d.id));
            }
            if !ids.get(d.node.as_str()).copied().unwrap_or(false) {
                return bad(format!(
                    "DSO link {} attaches to unknown node {}",
                    d.id, d.node
                ));
            }
            if ids.insert(&d.id, false).is_some() {
                return bad(format!("duplicate node {}", d.id));
            }
            if let Some(m) = &d.fpr_model {
                if m.capex_per_mw < 0.0
                    || m.m_min_mw > m.m_max_mw
                    || m.f_min_pu > 0.0
                    || m.f_max_pu < 0.0
                {
                    return bad(format!("inconsistent region model on {}", d.id));
                }
            }
        }
        for g in &self.generators {
            profile("availability", &g.id, &g.availability)?;
            if g.availability.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return bad(format!("availability of {} outside [0, 1]", g.id));
            }
            if !ids.contains_key(g.node.as_str()) {
                return bad(format!("generator {} at unknown node {}", g.id, g.node));
            }
            if g.p_nom_min > g.p_nom_max {
                return bad(format!("capacity bounds of {} cross", g.id));
            }
        }
        for s in &self.storage {
            if !ids.contains_key(s.node.as_str()) {
                return bad(format!("storage {} at unknown node {}", s.id, s.node));
            }
            if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
                return bad(format!("efficiency of {} outside (0, 1]", s.id));
            }
        }
        for l in &self.tx_links {
            for end in [&l.from, &l.to] {
                if !ids.get(end.as_str()).copied().unwrap_or(false) {
                    return bad(format!(
                        "transmission link {} ends at unknown node {end}",
                        l.id
                    ));
                }
            }
            if !(0.0..1.0).contains(&l.loss_factor) {
                return bad(format!("loss factor of {} outside [0, 1)", l.id));
            }
        }
        Ok(())
    }

    fn is_dso_node(&self, id: &str) -> bool {
        self.dso_links.iter().any(|d| d.id == id)
    }
}

/// Scenario A: links carry no cost and no capacity limit.
pub fn scenario_a(model: &CepModel) -> CepModel {
    let mut m = model.clone();
    m.name = format!("{}-A", model.name);
    for d in &mut m.dso_links {
        d.fpr_model = d.fpr_model.as_ref().map(|f| LinearFprModel {
            capex_per_mw: 0.0,
            base_cost: 0.0,
            intercept: 0.0,
            opex_per_mwh: 0.0,
            m_min_mw: 0.0,
            m_max_mw: f64::INFINITY,
            f_min_pu: -1.0,
            f_max_pu: 1.0,
            ..f.clone()
        });
    }
    m
}

/// Scenario B: links priced by their linearized planning regions.
pub fn scenario_b(model: &CepModel) -> CepModel {
    let mut m = model.clone();
    m.name = format!("{}-B", model.name);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    Balance,
    Capacity,
    Link,
    Storage,
}

#[derive(Debug, Clone)]
pub struct CepLp {
    pub lp: LinearProgram,
    pub origins: Vec<RowOrigin>,
    pub index: BTreeMap<String, usize>,
}

impl CepLp {
    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cap_gen(id: &str) -> String {
    format!("cap_gen_{}", sanitize(id))
}
pub fn p_gen(id: &str, t: usize) -> String {
    format!("p_gen_{}_t{t}", sanitize(id))
}
pub fn cap_link(id: &str) -> String {
    format!("M_{}", sanitize(id))
}
pub fn f_plus(id: &str, t: usize) -> String {
    format!("fp_{}_t{t}", sanitize(id))
}
pub fn f_minus(id: &str, t: usize) -> String {
    format!("fm_{}_t{t}", sanitize(id))
}

struct Builder {
    lp: LinearProgram,
    origins: Vec<RowOrigin>,
    index: BTreeMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: String, cost: f64, lo: f64, hi: f64) -> usize {
        let j = self.lp.add_var(name.clone(), cost, lo, hi);
        self.index.insert(name, j);
        j
    }

    fn row(
        &mut self,
        origin: RowOrigin,
        name: String,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.lp.add_row(name, coeffs, sense, rhs);
        self.origins.push(origin);
    }
}

/// Builds the LP: capital and operating costs, nodal balances, availability
/// limits, storage dynamics and the link bounds `f_min M <= f <= f_max M`.
pub fn build(model: &CepModel) -> Result<CepLp> {
    model.check()?;
    let nt = model.snapshots();
    let ann = model.annualization;
    let w = &model.weights;
    let mut b = Builder {
        lp: LinearProgram::default(),
        origins: Vec::new(),
        index: BTreeMap::new(),
    };
    // (node id) -> per snapshot list of (var, coefficient) injections
    let mut inj: BTreeMap<&str, Vec<Vec<(usize, f64)>>> = BTreeMap::new();
    for n in &model.nodes {
        inj.insert(&n.id, vec![Vec::new(); nt]);
    }
    for d in &model.dso_links {
        inj.insert(&d.id, vec![Vec::new(); nt]);
    }

    for g in &model.generators {
        let cap = b.var(
            cap_gen(&g.id),
            ann * g.capex_per_mw,
            g.p_nom_min,
            g.p_nom_max,
        );
        for t in 0..nt {
            let p = b.var(p_gen(&g.id, t), w[t] * g.marginal_cost, 0.0, f64::INFINITY);
            let avail = g.availability.get(t).copied().unwrap_or(1.0);
            b.row(
                RowOrigin::Capacity,
                format!("avail_{}_t{t}", sanitize(&g.id)),
                vec![(p, 1.0), (cap, -avail)],
                Sense::Le,
                0.0,
            );
            inj.get_mut(g.node.as_str()).expect("checked")[t].push((p, 1.0));
        }
    }

    for s in &model.storage {
        let id = sanitize(&s.id);
        let pcap = b.var(
            format!("cap_sto_p_{id}"),
            ann * s.capex_per_mw,
            0.0,
            f64::INFINITY,
        );
        let ecap = b.var(
            format!("cap_sto_e_{id}"),
            ann * s.capex_per_mwh,
            0.0,
            f64::INFINITY,
        );
        let mut soc = Vec::with_capacity(nt);
        let mut flows = Vec::with_capacity(nt);
        for t in 0..nt {
            let ch = b.var(format!("ch_{id}_t{t}"), 0.0, 0.0, f64::INFINITY);
            let dis = b.var(format!("dis_{id}_t{t}"), 0.0, 0.0, f64::INFINITY);
            let e = b.var(format!("soc_{id}_t{t}"), 0.0, 0.0, f64::INFINITY);
            for (v, what) in [(ch, "ch"), (dis, "dis")] {
                b.row(
                    RowOrigin::Capacity,
                    format!("{what}max_{id}_t{t}"),
                    vec![(v, 1.0), (pcap, -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
            b.row(
                RowOrigin::Capacity,
                format!("socmax_{id}_t{t}"),
                vec![(e, 1.0), (ecap, -1.0)],
                Sense::Le,
                0.0,
            );
            let node = inj.get_mut(s.node.as_str()).expect("checked");
            node[t].push((dis, 1.0));
            node[t].push((ch, -1.0));
            soc.push(e);
            flows.push((ch, dis));
        }
        // cyclic state of charge
        for t in 0..nt {
            let prev = soc[(t + nt - 1) % nt];
            let (ch, dis) = flows[t];
            let mut coeffs = vec![(soc[t], 1.0), (ch, -s.efficiency * w[t]), (dis, w[t])];
            if prev != soc[t] {
                coeffs.push((prev, -1.0));
            } else {
                coeffs[0].1 = 0.0;
            }
            b.row(
                RowOrigin::Storage,
                format!("soc_{id}_t{t}"),
                coeffs,
                Sense::Eq,
                0.0,
            );
        }
    }

    for l in &model.tx_links {
        let id = sanitize(&l.id);
        let cap = b.var(
            format!("cap_tx_{id}"),
            ann * l.capex_per_mw,
            0.0,
            f64::INFINITY,
        );
        let keep = 1.0 - l.loss_factor;
        for t in 0..nt {
            let fp = b.var(f_plus(&l.id, t), 0.0, 0.0, f64::INFINITY);
            let fm = b.var(f_minus(&l.id, t), 0.0, 0.0, f64::INFINITY);
            for (v, dir) in [(fp, "fwd"), (fm, "bwd")] {
                b.row(
                    RowOrigin::Capacity,
                    format!("tx{dir}_{id}_t{t}"),
                    vec![(v, 1.0), (cap, -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
            inj.get_mut(l.from.as_str()).expect("checked")[t].extend([(fp, -1.0), (fm, keep)]);
            inj.get_mut(l.to.as_str()).expect("checked")[t].extend([(fp, keep), (fm, -1.0)]);
        }
    }

    for d in &model.dso_links {
        let id = sanitize(&d.id);
        let free = LinearFprModel {
            grid_id: d.id.clone(),
            metric: CapacityMetric::MaxAbsP,
            capex_per_mw: 0.0,
            base_cost: 0.0,
            intercept: 0.0,
            m_min_mw: 0.0,
            m_max_mw: f64::INFINITY,
            f_min_pu: -1.0,
            f_max_pu: 1.0,
            opex_per_mwh: 0.0,
            r_squared: 1.0,
            degenerate: false,
        };
        let fm_model = d.fpr_model.as_ref().unwrap_or(&free);
        let m = b.var(
            cap_link(&d.id),
            ann * fm_model.capex_per_mw,
            fm_model.m_min_mw,
            fm_model.m_max_mw,
        );
        b.lp.objective_offset += ann * fm_model.base_cost;
        let keep = 1.0 - d.loss_factor;
        for t in 0..nt {
            let fp = b.var(
                f_plus(&d.id, t),
                w[t] * fm_model.opex_per_mwh,
                0.0,
                f64::INFINITY,
            );
            let fm = b.var(f_minus(&d.id, t), 0.0, 0.0, f64::INFINITY);
            b.row(
                RowOrigin::Link,
                format!("linkmax_{id}_t{t}"),
                vec![(fp, 1.0), (fm, -1.0), (m, -fm_model.f_max_pu)],
                Sense::Le,
                0.0,
            );
            b.row(
                RowOrigin::Link,
                format!("linkmin_{id}_t{t}"),
                vec![(fp, -1.0), (fm, 1.0), (m, fm_model.f_min_pu)],
                Sense::Le,
                0.0,
            );
            inj.get_mut(d.node.as_str()).expect("checked")[t].extend([(fp, -1.0), (fm, keep)]);
            inj.get_mut(d.id.as_str()).expect("checked")[t].extend([(fp, keep), (fm, -1.0)]);
        }
    }

    let demand: HashMap<&str, &Vec<f64>> = model
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), &n.demand_mw))
        .chain(
            model
                .dso_links
                .iter()
                .map(|d| (d.id.as_str(), &d.demand_mw)),
        )
        .collect();
    let order: Vec<&str> = model
        .nodes
        .iter()
        .map(|n| n.id.as_str())
        .chain(model.dso_links.iter().map(|d| d.id.as_str()))
        .collect();
    for node in order {
        let per_t = inj.remove(node).expect("registered");
        for (t, coeffs) in per_t.into_iter().enumerate() {
            let rhs = demand[node].get(t).copied().unwrap_or(0.0);
            b.row(
                RowOrigin::Balance,
                format!("bal_{}_t{t}", sanitize(node)),
                coeffs,
                Sense::Eq,
                rhs,
            );
        }
    }

    Ok(CepLp {
        lp: b.lp,
        origins: b.origins,
        index: b.index,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub capacities: BTreeMap<String, f64>,
    pub dispatch: BTreeMap<String, Vec<f64>>,
    pub message: String,
}

/// Solves the built LP and maps the result back to model names.
pub fn solve_model(model: &CepModel) -> Result<(CepLp, CepSolution, Vec<f64>)> {
    let built = build(model)?;
    let sol = lp::solve(&built.lp)?;
    let nt = model.snapshots();
    let mut capacities = BTreeMap::new();
    let mut dispatch = BTreeMap::new();
    if sol.status == LpStatus::Optimal {
        let x = &sol.x;
        for g in &model.generators {
            capacities.insert(g.id.clone(), x[built.index[&cap_gen(&g.id)]]);
            dispatch.insert(
                g.id.clone(),
                (0..nt).map(|t| x[built.index[&p_gen(&g.id, t)]]).collect(),
            );
        }
        for s in &model.storage {
            let id = sanitize(&s.id);
            capacities.insert(
                format!("{}.power", s.id),
                x[built.index[&format!("cap_sto_p_{id}")]],
            );
            capacities.insert(
                format!("{}.energy", s.id),
                x[built.index[&format!("cap_sto_e_{id}")]],
            );
            dispatch.insert(
                s.id.clone(),
                (0..nt)
                    .map(|t| {
                        x[built.index[&format!("dis_{id}_t{t}")]]
                            - x[built.index[&format!("ch_{id}_t{t}")]]
                    })
                    .collect(),
            );
        }
        for (id, cap) in model
            .tx_links
            .iter()
            .map(|l| (&l.id, format!("cap_tx_{}", sanitize(&l.id))))
            .chain(model.dso_links.iter().map(|d| (&d.id, cap_link(&d.id))))
        {
            capacities.insert(id.clone(), x[built.index[&cap]]);
            dispatch.insert(
                id.clone(),
                (0..nt)
                    .map(|t| x[built.index[&f_plus(id, t)]] - x[built.index[&f_minus(id, t)]])
                    .collect(),
            );
        }
    }
    let out = CepSolution {
        status: sol.status,
        objective: sol.objective,
        capacities,
        dispatch,
        message: sol.message,
    };
    Ok((built, out, sol.x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyRow {
    pub technology: String,
    pub provided_mwh: f64,
    pub consumed_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub objective: f64,
    pub technologies: Vec<TechnologyRow>,
    /// Energy entering the TSO/DSO links, both directions.
    pub link_energy_mwh: f64,
    pub link_losses_mwh: f64,
    /// Share of generated energy produced at DSO nodes.
    pub dso_local_share: f64,
    pub capacities: BTreeMap<String, f64>,
}

impl ScenarioReport {
    pub fn provided(&self) -> f64 {
        self.technologies.iter().map(|r| r.provided_mwh).sum()
    }

    pub fn consumed(&self) -> f64 {
        self.technologies.iter().map(|r| r.consumed_mwh).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("technology,provided_mwh,consumed_mwh\n");
        for r in &self.technologies {
            let _ = writeln!(s, "{},{},{}", r.technology, r.provided_mwh, r.consumed_mwh);
        }
        s
    }
}

pub const LINK_LOSS_ROW: &str = "tso_dso_link_losses";
pub const TX_LOSS_ROW: &str = "transmission_losses";
pub const DEMAND_ROW: &str = "demand";

/// Energy balance of an optimal solution, one row per technology. Loss
/// rows are consumption, so provided and consumed totals agree.
pub fn report(
    model: &CepModel,
    built: &CepLp,
    sol: &CepSolution,
    x: &[f64],
) -> Result<ScenarioReport> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::Infeasible(format!(
            "{} is {:?}: {}",
            model.name, sol.status, sol.message
        )));
    }
    let nt = model.snapshots();
    let w = &model.weights;
    let energy = |name: &dyn Fn(usize) -> String| -> f64 {
        (0..nt).map(|t| w[t] * x[built.index[&name(t)]]).sum()
    };
    let mut rows: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let (mut local, mut total_gen) = (0.0, 0.0);
    for g in &model.generators {
        let e = energy(&|t| p_gen(&g.id, t));
        rows.entry(g.technology.clone()).or_default().0 += e;
        total_gen += e;
        if model.is_dso_node(&g.node) {
            local += e;
        }
    }
    for s in &model.storage {
        let id = sanitize(&s.id);
        let dis = energy(&|t| format!("dis_{id}_t{t}"));
        let ch = energy(&|t| format!("ch_{id}_t{t}"));
        let r = rows.entry(s.technology.clone()).or_default();
        r.0 += dis;
        r.1 += ch;
    }
    let demand: f64 = model
        .nodes
        .iter()
        .map(|n| &n.demand_mw)
        .chain(model.dso_links.iter().map(|d| &d.demand_mw))
        .flat_map(|p| p.iter().zip(w).map(|(d, wt)| d * wt))
        .sum();
    rows.entry(DEMAND_ROW.into()).or_default().1 += demand;
    let (mut link_energy, mut link_losses, mut tx_losses) = (0.0, 0.0, 0.0);
    for d in &model.dso_links {
        let e = energy(&|t| f_plus(&d.id, t)) + energy(&|t| f_minus(&d.id, t));
        link_energy += e;
        link_losses += d.loss_factor * e;
    }
    for l in &model.tx_links {
        let e = energy(&|t| f_plus(&l.id, t)) + energy(&|t| f_minus(&l.id, t));
        tx_losses += l.loss_factor * e;
    }
    rows.entry(LINK_LOSS_ROW.into()).or_default().1 += link_losses;
    if !model.tx_links.is_empty() {
        rows.entry(TX_LOSS_ROW.into()).or_default().1 += tx_losses;
    }
    Ok(ScenarioReport {
        name: model.name.clone(),
        objective: sol.objective,
        technologies: rows
            .into_iter()
            .map(|(technology, (p, c))| TechnologyRow {
                technology,
                provided_mwh: p,
                consumed_mwh: c,
            })
            .collect(),
        link_energy_mwh: link_energy,
        link_losses_mwh: link_losses,
        dso_local_share: if total_gen > 0.0 {
            local / total_gen
        } else {
            0.0
        },
        capacities: sol.capacities.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub a: ScenarioReport,
    pub b: ScenarioReport,
    pub objective_delta: f64,
}

impl StudyReport {
    /// `metric,a,b,delta` summary.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("metric,a,b,delta\n");
        let rows = [
            ("objective", self.a.objective, self.b.objective),
            (
                "link_energy_mwh",
                self.a.link_energy_mwh,
                self.b.link_energy_mwh,
            ),
            (
                "link_losses_mwh",
                self.a.link_losses_mwh,
                self.b.link_losses_mwh,
            ),
            (
                "dso_local_share",
                self.a.dso_local_share,
                self.b.dso_local_share,
            ),
        ];
        for (name, a, b) in rows {
            let _ = writeln!(s, "{name},{a},{b},{}", b - a);
        }
        s
    }

    /// Per-technology comparison `technology,provided_a,provided_b,consumed_a,consumed_b`.
    pub fn technology_csv(&self) -> String {
        let mut techs: Vec<&str> = self
            .a
            .technologies
            .iter()
            .chain(&self.b.technologies)
            .map(|r| r.technology.as_str())
            .collect();
        techs.sort_unstable();
        techs.dedup();
        let find = |r: &ScenarioReport, t: &str| {
            r.technologies
                .iter()
                .find(|x| x.technology == t)
                .map(|x| (x.provided_mwh, x.consumed_mwh))
                .unwrap_or((0.0, 0.0))
        };
        let mut s = String::from(
            "technology,provided_mwh_a,provided_mwh_b,consumed_mwh_a,consumed_mwh_b\n",
        );
        for t in techs {
            let (pa, ca) = find(&self.a, t);
            let (pb, cb) = find(&self.b, t);
            let _ = writeln!(s, "{t},{pa},{pb},{ca},{cb}");
        }
        s
    }
}

pub fn solve_report(model: &CepModel) -> Result<ScenarioReport> {
    let (built, sol, x) = solve_model(model)?;
    report(model, &built, &sol, &x)
}

/// Solves both scenarios and compares them.
pub fn run_study(a: &CepModel, b: &CepModel) -> Result<StudyReport> {
    let (ra, rb) = rayon::join(|| solve_report(a), || solve_report(b));
    let (ra, rb) = (ra?, rb?);
    Ok(StudyReport {
        objective_delta: rb.objective - ra.objective,
        a: ra,
        b: rb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_node() -> CepModel {
        CepModel {
            name: "one".into(),
            weights: vec![1.0],
            annualization: 1.0,
            nodes: vec![Node {
                id: "n".into(),
                demand_mw: vec![1.0],
            }],
            generators: vec![Generator {
                id: "g".into(),
                node: "n".into(),
                technology: "gas".into(),
                capex_per_mw: 10.0,
                marginal_cost: 5.0,
                availability: vec![],
                p_nom_min: 0.0,
                p_nom_max: f64::INFINITY,
            }],
            storage: vec![],
            tx_links: vec![],
            dso_links: vec![],
        }
    }

    fn linear(capex: f64) -> LinearFprModel {
        LinearFprModel {
            grid_id: "d".into(),
            metric: CapacityMetric::MaxAbsP,
            capex_per_mw: capex,
            base_cost: 3.0,
            intercept: 3.0,
            m_min_mw: 0.0,
            m_max_mw: 10.0,
            f_min_pu: -1.0,
            f_max_pu: 1.0,
            opex_per_mwh: 0.5,
            r_squared: 1.0,
            degenerate: false,
        }
    }

    #[test]
    fn smallest_model() {
        let built = build(&single_node()).unwrap();
        assert_eq!(built.lp.n_vars(), 2);
        let balance = built
            .origins
            .iter()
            .filter(|o| **o == RowOrigin::Balance)
            .count();
        assert_eq!(balance, 1);
        assert!(built.origins.contains(&RowOrigin::Capacity));
        let (_, sol, _) = solve_model(&single_node()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 15.0).abs() < 1e-9);
    }

    #[test]
    fn link_rows_per_snapshot() {
        let mut m = single_node();
        m.weights = vec![1.0; 3];
        m.nodes[0].demand_mw = vec![1.0; 3];
        m.dso_links.push(DsoLink {
            id: "d".into(),
            node: "n".into(),
            fpr_model: Some(linear(1.0)),
            loss_factor: 0.02,
            demand_mw: vec![0.5; 3],
        });
        let built = build(&m).unwrap();
        let mcol = built.var("M_d").unwrap();
        let link_rows: Vec<usize> = (0..built.origins.len())
            .filter(|&i| built.origins[i] == RowOrigin::Link)
            .collect();
        assert_eq!(link_rows.len(), 6);
        assert!(link_rows
            .iter()
            .all(|&i| built.lp.rows[i].coeffs.iter().any(|&(j, _)| j == mcol)));
    }

    #[test]
    fn scenario_b_prices_the_link() {
        let mut m = single_node();
        m.dso_links.push(DsoLink {
            id: "d".into(),
            node: "n".into(),
            fpr_model: Some(linear(2.0)),
            loss_factor: 0.02,
            demand_mw: vec![0.5],
        });
        let nz = |m: &CepModel| {
            build(m)
                .unwrap()
                .lp
                .cost
                .iter()
                .filter(|c| **c != 0.0)
                .count()
        };
        let (a, b) = (scenario_a(&m), scenario_b(&m));
        assert!(nz(&b) > nz(&a));
        let study = run_study(&a, &b).unwrap();
        assert!(study.b.objective >= study.a.objective);
        for r in [&study.a, &study.b] {
            assert!((r.provided() - r.consumed()).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_scenarios_have_zero_delta() {
        let m = single_node();
        let s = run_study(&m, &m).unwrap();
        assert_eq!(s.objective_delta, 0.0);
        assert_eq!(s.a.technologies, s.b.technologies);
    }

    #[test]
    fn profile_length_mismatch_is_rejected() {
        let mut m = single_node();
        m.nodes[0].demand_mw = vec![1.0, 2.0];
        assert!(build(&m).is_err());
    }

    #[test]
    fn storage_shifts_cheap_energy() {
        // free solar at noon only, expensive gas; demand flat over two hours
        let mut m = single_node();
        m.weights = vec![1.0, 1.0];
        m.nodes[0].demand_mw = vec![1.0, 1.0];
        m.generators[0].capex_per_mw = 0.0;
        m.generators[0].marginal_cost = 100.0;
        m.generators.push(Generator {
            id: "pv".into(),
            node: "n".into(),
            technology: "pv".into(),
            capex_per_mw: 1.0,
            marginal_cost: 0.0,
            availability: vec![1.0, 0.0],
            p_nom_min: 0.0,
            p_nom_max: f64::INFINITY,
        });
        m.storage.push(Storage {
            id: "bat".into(),
            node: "n".into(),
            technology: "battery".into(),
            capex_per_mw: 1.0,
            capex_per_mwh: 1.0,
            efficiency: 0.9,
        });
        let r = solve_report(&m).unwrap();
        let bat = r
            .technologies
            .iter()
            .find(|t| t.technology == "battery")
            .unwrap();
        assert!(bat.provided_mwh > 0.9);
        assert!((bat.provided_mwh - 0.9 * bat.consumed_mwh).abs() < 1e-6);
        assert!((r.provided() - r.consumed()).abs() < 1e-6);
    }
}
