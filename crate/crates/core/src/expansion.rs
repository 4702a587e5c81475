//! Worst-case use cases, heuristic reinforcement and stage cost.
//!
//! Reinforcement first removes thermal overloads by type replacement or
//! parallel circuits, then voltage-band violations by line separation: the
//! feeder toward the worst bus is split at two-thirds of its cumulative
//! impedance and the split point is fed by a new line from the substation.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PqPoint;
use crate::grid_model::{Bus, EquipmentCatalog, Line, Network, UnitKind, Urbanization};
use crate::power_flow::{
    check_violations, DispatchPoint, PfModel, PfOptions, PfSolution, ViolationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCase {
    HighLoad,
    HighFeedIn,
}

impl UseCase {
    pub const ALL: [UseCase; 2] = [UseCase::HighLoad, UseCase::HighFeedIn];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReinforceConfig {
    pub max_iterations: usize,
    /// Headroom required of an upgraded element relative to its worst flow.
    pub thermal_margin: f64,
    /// Share of full load kept in the high feed-in case.
    pub feed_in_load_fraction: f64,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        ReinforceConfig {
            max_iterations: 25,
            thermal_margin: 0.2,
            feed_in_load_fraction: 0.1,
        }
    }
}

/// Dispatch of the given worst case. Reactive setpoints stay as close to
/// zero as each unit's range allows.
pub fn use_case_dispatch(network: &Network, case: UseCase, cfg: &ReinforceConfig) -> DispatchPoint {
    let mut d = DispatchPoint::default();
    for u in &network.units {
        let q0 = 0f64.clamp(u.q_min_mvar, u.q_max_mvar);
        let sp = match (u.kind, case) {
            (UnitKind::Load, UseCase::HighLoad) | (UnitKind::Generator, UseCase::HighLoad) => {
                PqPoint::new(u.p_min_mw, q0)
            }
            (UnitKind::Generator, UseCase::HighFeedIn) => PqPoint::new(u.p_max_mw, q0),
            (UnitKind::Load, UseCase::HighFeedIn) => PqPoint::new(
                (cfg.feed_in_load_fraction * u.p_min_mw).clamp(u.p_min_mw, u.p_max_mw),
                q0,
            ),
            (UnitKind::EquivalentFpr, _) => {
                let vertices = u
                    .equivalent
                    .as_ref()
                    .map(|e| e.vertices.as_slice())
                    .unwrap_or(&[]);
                let pick = vertices.iter().copied().reduce(|best, v| {
                    let better = match case {
                        UseCase::HighLoad => v.p_mw < best.p_mw,
                        UseCase::HighFeedIn => v.p_mw > best.p_mw,
                    };
                    let tie = v.p_mw == best.p_mw && v.q_mvar.abs() < best.q_mvar.abs();
                    if better || tie {
                        v
                    } else {
                        best
                    }
                });
                pick.unwrap_or_else(|| PqPoint::new(u.neutral().0, u.neutral().1))
            }
        };
        d.setpoints.insert(u.id.clone(), sp);
    }
    d
}

pub struct CaseResult {
    pub case: UseCase,
    pub solution: PfSolution,
    pub report: ViolationReport,
}

/// Power flow and violation check for both use cases.
pub fn evaluate_use_cases(network: &Network, cfg: &ReinforceConfig) -> Result<Vec<CaseResult>> {
    let model = PfModel::new(network)?;
    UseCase::ALL
        .iter()
        .map(|&case| {
            let sol = model.solve(
                &use_case_dispatch(network, case, cfg),
                &PfOptions::default(),
            )?;
            if !sol.converged {
                return Err(Error::Divergence(format!(
                    "{:?} case of {} after {} iterations, mismatch {:e}",
                    case, network.id, sol.iterations, sol.max_mismatch
                )));
            }
            let report = check_violations(network, &sol)?;
            Ok(CaseResult {
                case,
                solution: sol,
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    ReplaceLineType,
    AddParallelLine,
    SplitLineAtTwoThirds,
    ReplaceTransformer,
    AddParallelTransformer,
}

impl MeasureKind {
    pub fn is_line(self) -> bool {
        matches!(
            self,
            MeasureKind::ReplaceLineType
                | MeasureKind::AddParallelLine
                | MeasureKind::SplitLineAtTwoThirds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measure {
    pub kind: MeasureKind,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_type: Option<String>,
    /// Length of newly laid conductor per circuit (line measures only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_km: Option<f64>,
    /// Number of circuits or transformers installed.
    pub count: u32,
    pub cost_delta: f64,
}

impl Measure {
    fn priced(
        kind: MeasureKind,
        target: &str,
        new_type: &str,
        length_km: Option<f64>,
        count: u32,
        catalog: &EquipmentCatalog,
        urbanization: Urbanization,
    ) -> Result<Self> {
        let mut m = Measure {
            kind,
            target: target.to_string(),
            new_type: Some(new_type.to_string()),
            length_km,
            count,
            cost_delta: 0.0,
        };
        m.cost_delta = measure_cost(&m, catalog, urbanization)?;
        Ok(m)
    }
}

fn measure_cost(
    m: &Measure,
    catalog: &EquipmentCatalog,
    urbanization: Urbanization,
) -> Result<f64> {
    let type_id = m
        .new_type
        .as_deref()
        .ok_or_else(|| Error::Catalog(format!("measure on {} has no equipment type", m.target)))?;
    let count = f64::from(m.count);
    if m.kind.is_line() {
        let line = catalog.line_type(type_id)?;
        let install = catalog.install_cost(urbanization)?;
        let length = m.length_km.unwrap_or(0.0);
        Ok((install + line.c_mat_per_km) * length * count)
    } else {
        Ok(catalog.transformer_type(type_id)?.c_trafo * count)
    }
}

/// Total line and transformer cost of the equipment the measures install:
/// sum over lines of (install + material) per km times length, plus the
/// transformer prices.
pub fn stage_cost(
    measures: &[Measure],
    catalog: &EquipmentCatalog,
    urbanization: Urbanization,
) -> Result<f64> {
    measures.iter().try_fold(0.0, |acc, m| {
        Ok(acc + measure_cost(m, catalog, urbanization)?)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionStage {
    pub scenario_id: u64,
    pub scale_factor: f64,
    /// Measures cost plus costs of embedded child regions.
    pub total_cost: f64,
    pub grid_cost: f64,
    /// Cumulative measure cost after each reinforcement iteration.
    pub cost_history: Vec<f64>,
    pub measures: Vec<Measure>,
    pub network: Network,
}

impl ExpansionStage {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Reinforces a network until both use cases are violation-free.
pub fn reinforce(
    network: &Network,
    catalog: &EquipmentCatalog,
    cfg: &ReinforceConfig,
) -> Result<ExpansionStage> {
    reinforce_scenario(network, catalog, cfg, 0, 1.0)
}

pub fn reinforce_scenario(
    network: &Network,
    catalog: &EquipmentCatalog,
    cfg: &ReinforceConfig,
    scenario_id: u64,
    scale_factor: f64,
) -> Result<ExpansionStage> {
    let mut net = network.clone();
    let mut measures: Vec<Measure> = Vec::new();
    let mut cost_history = vec![0.0];
    let mut new_ids = 0usize;

    for iteration in 0..=cfg.max_iterations {
        let cases = match evaluate_use_cases(&net, cfg) {
            Ok(c) => c,
            Err(Error::Divergence(msg)) if iteration == 0 => {
                return Err(Error::Unplannable {
                    reason: format!("base power flow does not converge: {msg}"),
                    residual: None,
                })
            }
            Err(e) => return Err(e),
        };
        if cases.iter().all(|c| c.report.is_empty()) {
            let grid_cost = stage_cost(&measures, catalog, net.urbanization)?;
            return Ok(ExpansionStage {
                scenario_id,
                scale_factor,
                total_cost: grid_cost + net.embedded_cost(),
                grid_cost,
                cost_history,
                measures,
                network: net,
            });
        }
        if iteration == cfg.max_iterations {
            break;
        }

        let added = if cases.iter().any(|c| !c.report.thermal.is_empty()) {
            thermal_pass(&mut net, &cases, catalog, cfg)?
        } else {
            voltage_pass(&mut net, &cases, catalog, &mut new_ids)?
        };
        if added.is_empty() {
            return Err(Error::Unplannable {
                reason: format!(
                    "no applicable measure for remaining violations in {}",
                    net.id
                ),
                residual: Some(Box::new(merged_report(&cases))),
            });
        }
        measures.extend(added);
        cost_history.push(measures.iter().fold(0.0, |acc, m| acc + m.cost_delta));
    }

    let cases = evaluate_use_cases(&net, cfg)?;
    Err(Error::Unplannable {
        reason: format!(
            "iteration cap of {} reached for {}",
            cfg.max_iterations, net.id
        ),
        residual: Some(Box::new(merged_report(&cases))),
    })
}

fn merged_report(cases: &[CaseResult]) -> ViolationReport {
    let mut out = ViolationReport::default();
    for c in cases {
        out.thermal.extend(c.report.thermal.iter().cloned());
        out.voltage.extend(c.report.voltage.iter().cloned());
    }
    out
}

fn thermal_pass(
    net: &mut Network,
    cases: &[CaseResult],
    catalog: &EquipmentCatalog,
    cfg: &ReinforceConfig,
) -> Result<Vec<Measure>> {
    // element -> (worst loading, worst apparent flow)
    let mut worst: Vec<(String, f64, f64)> = Vec::new();
    for c in cases {
        for v in &c.report.thermal {
            let flow = c
                .solution
                .flow(&v.element)
                .expect("flow of reported element");
            let s = flow.s_from_mva.max(flow.s_to_mva);
            match worst.iter_mut().find(|w| w.0 == v.element) {
                Some(w) => {
                    w.1 = w.1.max(v.loading_percent);
                    w.2 = w.2.max(s);
                }
                None => worst.push((v.element.clone(), v.loading_percent, s)),
            }
        }
    }
    worst.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let urbanization = net.urbanization;
    let mut out = Vec::new();
    for (id, _, flow) in worst {
        let need = (1.0 + cfg.thermal_margin) * flow;
        if let Some(li) = net.lines.iter().position(|l| l.id == id) {
            let kv = net
                .bus(&net.lines[li].from_bus)
                .map(|b| b.base_kv)
                .unwrap_or(1.0);
            let line = &mut net.lines[li];
            let types = catalog.line_types_by_ampacity();
            let single = |i_max: f64| 3f64.sqrt() * kv * i_max;
            let fit = types.iter().find(|(_, t)| {
                t.i_max_ka > line.i_max_ka
                    && single(t.i_max_ka) * f64::from(line.parallel_count) >= need
            });
            match fit {
                Some((tid, t)) => {
                    out.push(Measure::priced(
                        MeasureKind::ReplaceLineType,
                        &line.id,
                        tid,
                        Some(line.length_km),
                        line.parallel_count,
                        catalog,
                        urbanization,
                    )?);
                    line.apply_type(t);
                    line.type_id = tid.to_string();
                }
                None => {
                    let (tid, t) = *types
                        .last()
                        .ok_or_else(|| Error::Catalog("catalog has no line types".into()))?;
                    if t.i_max_ka > line.i_max_ka {
                        out.push(Measure::priced(
                            MeasureKind::ReplaceLineType,
                            &line.id,
                            tid,
                            Some(line.length_km),
                            line.parallel_count,
                            catalog,
                            urbanization,
                        )?);
                        line.apply_type(t);
                        line.type_id = tid.to_string();
                    }
                    let circuits =
                        ((need / single(line.i_max_ka)).ceil() as u32).max(line.parallel_count + 1);
                    let add = circuits - line.parallel_count;
                    out.push(Measure::priced(
                        MeasureKind::AddParallelLine,
                        &line.id,
                        &line.type_id.clone(),
                        Some(line.length_km),
                        add,
                        catalog,
                        urbanization,
                    )?);
                    line.parallel_count = circuits;
                }
            }
        } else if let Some(trafo) = net.transformers.iter_mut().find(|t| t.id == id) {
            let types = catalog.transformer_types_by_rating();
            let fit = types.iter().find(|(_, t)| {
                t.s_rated_mva > trafo.s_rated_mva
                    && t.s_rated_mva * f64::from(trafo.parallel_count) >= need
            });
            match fit {
                Some((tid, t)) => {
                    out.push(Measure::priced(
                        MeasureKind::ReplaceTransformer,
                        &trafo.id,
                        tid,
                        None,
                        trafo.parallel_count,
                        catalog,
                        urbanization,
                    )?);
                    trafo.s_rated_mva = t.s_rated_mva;
                    trafo.type_id = tid.to_string();
                }
                None => {
                    let (tid, t) = *types
                        .last()
                        .ok_or_else(|| Error::Catalog("catalog has no transformer types".into()))?;
                    if t.s_rated_mva > trafo.s_rated_mva {
                        out.push(Measure::priced(
                            MeasureKind::ReplaceTransformer,
                            &trafo.id,
                            tid,
                            None,
                            trafo.parallel_count,
                            catalog,
                            urbanization,
                        )?);
                        trafo.s_rated_mva = t.s_rated_mva;
                        trafo.type_id = tid.to_string();
                    }
                    let units =
                        ((need / trafo.s_rated_mva).ceil() as u32).max(trafo.parallel_count + 1);
                    let add = units - trafo.parallel_count;
                    out.push(Measure::priced(
                        MeasureKind::AddParallelTransformer,
                        &trafo.id,
                        &trafo.type_id.clone(),
                        None,
                        add,
                        catalog,
                        urbanization,
                    )?);
                    trafo.parallel_count = units;
                }
            }
        }
    }
    Ok(out)
}

/// Edge on a feeder path: (branch id, is_line, from index, to index).
type PathEdge = (String, bool, usize, usize);

/// Shortest |z| distance from the PCC to every bus, with the last edge of
/// each shortest path.
type ImpedanceTree = (Vec<f64>, Vec<Option<(usize, String, bool)>>);

pub(crate) fn impedance_tree(net: &Network) -> Result<ImpedanceTree> {
    let index = net.bus_index();
    let n = net.buses.len();
    let mut adj: Vec<Vec<(usize, f64, String, bool)>> = vec![Vec::new(); n];
    for l in &net.lines {
        let (a, b) = (index[l.from_bus.as_str()], index[l.to_bus.as_str()]);
        let w = l.impedance_pu(net.buses[a].base_kv, net.base_mva).norm();
        adj[a].push((b, w, l.id.clone(), true));
        adj[b].push((a, w, l.id.clone(), true));
    }
    for t in &net.transformers {
        let (a, b) = (index[t.hv_bus.as_str()], index[t.lv_bus.as_str()]);
        let w = t.reactance_pu(net.base_mva);
        adj[a].push((b, w, t.id.clone(), false));
        adj[b].push((a, w, t.id.clone(), false));
    }
    let src = net.pcc_index()?;
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<(usize, String, bool)>> = vec![None; n];
    dist[src] = 0.0;
    // distances are non-negative; ordered on bits for a total order
    let mut heap = BinaryHeap::from([Reverse((0u64, src))]);
    while let Some(Reverse((dbits, i))) = heap.pop() {
        let d = f64::from_bits(dbits);
        if d > dist[i] {
            continue;
        }
        for (j, w, id, is_line) in &adj[i] {
            let nd = d + w;
            if nd < dist[*j] {
                dist[*j] = nd;
                prev[*j] = Some((i, id.clone(), *is_line));
                heap.push(Reverse((nd.to_bits(), *j)));
            }
        }
    }
    Ok((dist, prev))
}

/// Minimum-impedance path from the PCC to `target`.
fn impedance_path(net: &Network, target: usize) -> Result<Vec<PathEdge>> {
    let src = net.pcc_index()?;
    let (_, prev) = impedance_tree(net)?;
    let mut path = Vec::new();
    let mut cur = target;
    while let Some((p, id, is_line)) = prev[cur].clone() {
        path.push((id, is_line, p, cur));
        cur = p;
    }
    if cur != src {
        return Err(Error::Topology(format!(
            "bus {} unreachable",
            net.buses[target].id
        )));
    }
    path.reverse();
    Ok(path)
}

fn unique_id(taken: impl Fn(&str) -> bool, base: &str, counter: &mut usize) -> String {
    loop {
        *counter += 1;
        let id = format!("{base}~{counter}");
        if !taken(&id) {
            return id;
        }
    }
}

fn voltage_pass(
    net: &mut Network,
    cases: &[CaseResult],
    catalog: &EquipmentCatalog,
    counter: &mut usize,
) -> Result<Vec<Measure>> {
    let mut worst: Vec<(String, f64)> = Vec::new();
    for c in cases {
        for v in &c.report.voltage {
            let bus = net.bus(&v.bus).expect("reported bus");
            let severity = (bus.v_min_pu - v.v_pu).max(v.v_pu - bus.v_max_pu);
            match worst.iter_mut().find(|w| w.0 == v.bus) {
                Some(w) => w.1 = w.1.max(severity),
                None => worst.push((v.bus.clone(), severity)),
            }
        }
    }
    worst.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let (largest_id, largest) = catalog
        .line_types_by_ampacity()
        .last()
        .map(|(id, t)| (id.to_string(), **t))
        .ok_or_else(|| Error::Catalog("catalog has no line types".into()))?;
    let urbanization = net.urbanization;

    let mut feeders_done = BTreeSet::new();
    let mut out = Vec::new();
    for (bus_id, _) in worst {
        let index = net.bus_index();
        let target = index[bus_id.as_str()];
        let path = impedance_path(net, target)?;
        let Some(first_line) = path.iter().position(|e| e.1) else {
            continue;
        };
        if !feeders_done.insert(path[first_line].0.clone()) {
            continue;
        }
        let substation = path[first_line].2;
        let segments: Vec<(usize, f64, f64)> = path[first_line..]
            .iter()
            .map(|(id, _, _, _)| {
                let li = net
                    .lines
                    .iter()
                    .position(|l| &l.id == id)
                    .expect("path line");
                let l = &net.lines[li];
                let kv = net.bus(&l.from_bus).map(|b| b.base_kv).unwrap_or(1.0);
                (li, l.impedance_pu(kv, net.base_mva).norm(), l.length_km)
            })
            .collect();
        let total: f64 = segments.iter().map(|s| s.1).sum();
        let goal = 2.0 / 3.0 * total;

        let mut cum_z = 0.0;
        let mut cum_len = 0.0;
        let mut split = None;
        for (k, &(li, z, len)) in segments.iter().enumerate() {
            if cum_z + z >= goal - 1e-12 * total {
                split = Some((k, li, ((goal - cum_z) / z).clamp(0.0, 1.0), len));
                break;
            }
            cum_z += z;
            cum_len += len;
        }
        let Some((k, li, frac, len)) = split else {
            continue;
        };
        let (near, far) = (path[first_line + k].2, path[first_line + k].3);

        let (split_bus, split_target) = if frac >= 1.0 - 1e-9 {
            (far, net.lines[li].id.clone())
        } else if frac <= 1e-9 {
            (near, net.lines[li].id.clone())
        } else {
            let template: Bus = net.buses[near].clone();
            let new_bus = unique_id(|id| net.bus(id).is_some(), &net.lines[li].id, counter);
            let tail_id = unique_id(
                |id| net.lines.iter().any(|l| l.id == id),
                &net.lines[li].id,
                counter,
            );
            let far_id = net.buses[far].id.clone();
            net.buses.push(Bus {
                id: new_bus.clone(),
                is_pcc: false,
                ..template
            });
            let line = &mut net.lines[li];
            let mut tail: Line = line.clone();
            if line.to_bus == far_id {
                line.to_bus = new_bus.clone();
                tail.from_bus = new_bus.clone();
            } else {
                line.from_bus = new_bus.clone();
                tail.to_bus = new_bus.clone();
            }
            line.length_km = len * frac;
            tail.length_km = len * (1.0 - frac);
            tail.id = tail_id;
            let target = line.id.clone();
            net.lines.push(tail);
            (net.buses.len() - 1, target)
        };
        if split_bus == substation {
            continue;
        }

        let new_len = cum_len + len * frac;
        let sep_id = unique_id(|id| net.lines.iter().any(|l| l.id == id), "sep", counter);
        let mut sep = Line {
            id: sep_id,
            from_bus: net.buses[substation].id.clone(),
            to_bus: net.buses[split_bus].id.clone(),
            length_km: new_len,
            type_id: largest_id.clone(),
            r_ohm_per_km: 0.0,
            x_ohm_per_km: 0.0,
            i_max_ka: 0.0,
            parallel_count: 1,
        };
        sep.apply_type(&largest);
        net.lines.push(sep);
        out.push(Measure::priced(
            MeasureKind::SplitLineAtTwoThirds,
            &split_target,
            &largest_id,
            Some(new_len),
            1,
            catalog,
            urbanization,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_model::{LineType, TransformerType, Unit};
    use std::collections::BTreeMap;

    fn catalog() -> EquipmentCatalog {
        EquipmentCatalog {
            line_types: BTreeMap::from([
                (
                    "small".into(),
                    LineType {
                        r_ohm_per_km: 0.0,
                        x_ohm_per_km: 0.1,
                        i_max_ka: 0.5,
                        c_mat_per_km: 50_000.0,
                    },
                ),
                (
                    "big".into(),
                    LineType {
                        r_ohm_per_km: 0.0,
                        x_ohm_per_km: 0.1,
                        i_max_ka: 1.0,
                        c_mat_per_km: 80_000.0,
                    },
                ),
            ]),
            transformer_types: BTreeMap::from([(
                "t1".into(),
                TransformerType {
                    s_rated_mva: 0.63,
                    c_trafo: 20_000.0,
                },
            )]),
            install_cost_per_km: BTreeMap::from([(Urbanization::Rural, 100_000.0)]),
        }
    }

    fn line_measure(kind: MeasureKind, new_type: &str, length: f64) -> Measure {
        Measure {
            kind,
            target: "l".into(),
            new_type: Some(new_type.into()),
            length_km: Some(length),
            count: 1,
            cost_delta: 0.0,
        }
    }

    #[test]
    fn empty_measures_cost_nothing() {
        assert_eq!(
            stage_cost(&[], &catalog(), Urbanization::Rural).unwrap(),
            0.0
        );
    }

    #[test]
    fn replaced_kilometre_costs_install_plus_material() {
        let m = line_measure(MeasureKind::ReplaceLineType, "small", 1.0);
        assert_eq!(
            stage_cost(&[m], &catalog(), Urbanization::Rural).unwrap(),
            150_000.0
        );
    }

    #[test]
    fn split_plus_transformer() {
        let split = line_measure(MeasureKind::SplitLineAtTwoThirds, "small", 0.667);
        let trafo = Measure {
            kind: MeasureKind::ReplaceTransformer,
            target: "t".into(),
            new_type: Some("t1".into()),
            length_km: None,
            count: 1,
            cost_delta: 0.0,
        };
        let c = stage_cost(&[split, trafo], &catalog(), Urbanization::Rural).unwrap();
        assert!((c - (150_000.0 * 0.667 + 20_000.0)).abs() < 1e-9);
    }

    #[test]
    fn missing_install_cost_is_a_catalog_error() {
        let m = line_measure(MeasureKind::ReplaceLineType, "small", 1.0);
        assert!(stage_cost(&[m], &catalog(), Urbanization::Urban).is_err());
    }

    #[test]
    fn use_cases_respect_ranges() {
        let mut n = crate::test_support::two_bus_with(0.0, 0.1, 0.5);
        n.units.push(Unit {
            id: "pv".into(),
            bus: "b2".into(),
            kind: UnitKind::Generator,
            p_min_mw: 0.0,
            p_max_mw: 0.3,
            q_min_mvar: 0.05,
            q_max_mvar: 0.1,
            technology: "pv".into(),
            child_fpr_ref: None,
            equivalent: None,
        });
        let cfg = ReinforceConfig::default();
        for case in UseCase::ALL {
            let d = use_case_dispatch(&n, case, &cfg);
            d.check_ranges(&n, 0.0).unwrap();
        }
        let fi = use_case_dispatch(&n, UseCase::HighFeedIn, &cfg);
        assert_eq!(fi.setpoints["pv"], PqPoint::new(0.3, 0.05));
        assert!((fi.setpoints["load"].p_mw - 0.1 * n.unit("load").unwrap().p_min_mw).abs() < 1e-15);
    }

    fn catalog_for(small_ka: f64, big_ka: f64) -> EquipmentCatalog {
        let mut c = catalog();
        c.line_types.get_mut("small").unwrap().i_max_ka = small_ka;
        c.line_types.get_mut("big").unwrap().i_max_ka = big_ka;
        c
    }

    fn set_load(n: &mut Network, p: f64) {
        let u = n.units.iter_mut().find(|u| u.id == "load").unwrap();
        u.p_min_mw = -p;
        u.q_min_mvar = 0.0;
        u.q_max_mvar = 0.0;
    }

    #[test]
    fn violation_free_grid_is_a_fixed_point() {
        let mut n = crate::test_support::two_bus_with(0.0, 0.1, 5.0);
        set_load(&mut n, 0.5);
        let stage = reinforce(&n, &catalog_for(5.0, 10.0), &ReinforceConfig::default()).unwrap();
        assert!(stage.measures.is_empty());
        assert_eq!(stage.total_cost, 0.0);
        assert_eq!(stage.network, n);
    }

    #[test]
    fn overloaded_line_gets_one_replacement() {
        // Lossless line: S_from = sqrt(P^2 + (X P^2 / v2^2)^2).
        let (x, p) = (0.1f64, 0.5f64);
        let v2sq = (1.0 + (1.0 - 4.0 * x * x * p * p).sqrt()) / 2.0;
        let s_from = (p * p + (x * p * p / v2sq).powi(2)).sqrt();
        let i_max = s_from / (1.2 * 3f64.sqrt());
        let mut n = crate::test_support::two_bus_with(0.0, x, i_max);
        set_load(&mut n, p);

        let cfg = ReinforceConfig::default();
        let before = evaluate_use_cases(&n, &cfg).unwrap();
        assert!((before[0].report.thermal[0].loading_percent - 120.0).abs() < 0.1);

        let stage = reinforce(&n, &catalog_for(i_max, 2.0 * i_max), &cfg).unwrap();
        assert_eq!(stage.measures.len(), 1);
        assert_eq!(stage.measures[0].kind, MeasureKind::ReplaceLineType);
        assert_eq!(stage.measures[0].new_type.as_deref(), Some("big"));
        assert_eq!(stage.total_cost, 180_000.0);
        for c in evaluate_use_cases(&stage.network, &cfg).unwrap() {
            assert!(c
                .solution
                .branch_flows
                .iter()
                .all(|f| f.loading_percent <= 100.0));
        }
    }

    #[test]
    fn overload_beyond_largest_type_adds_parallel_circuits() {
        let mut n = crate::test_support::two_bus_with(0.0, 0.1, 0.1);
        set_load(&mut n, 0.5);
        let stage = reinforce(&n, &catalog_for(0.1, 0.2), &ReinforceConfig::default()).unwrap();
        let kinds: Vec<_> = stage.measures.iter().map(|m| m.kind).collect();
        assert_eq!(
            kinds,
            [MeasureKind::ReplaceLineType, MeasureKind::AddParallelLine]
        );
        let line = &stage.network.lines[0];
        assert_eq!(line.type_id, "big");
        // 0.5 MW * 1.2 margin over 0.346 MVA per circuit -> 2 circuits
        assert_eq!(line.parallel_count, 2);
    }

    #[test]
    fn undervoltage_is_fixed_by_separation_at_two_thirds() {
        let x = 0.1f64;
        let v_target = 0.88f64;
        let p = v_target * (1.0 - v_target * v_target).sqrt() / x;
        let mut n = crate::test_support::two_bus_with(0.0, x, 5.0);
        set_load(&mut n, p);
        let cfg = ReinforceConfig::default();
        let before = evaluate_use_cases(&n, &cfg).unwrap();
        assert!((before[0].solution.v_pu[1] - v_target).abs() < 1e-8);
        assert_eq!(before[0].report.voltage.len(), 1);

        let stage = reinforce(&n, &catalog_for(5.0, 10.0), &cfg).unwrap();
        assert_eq!(stage.measures.len(), 1);
        let m = &stage.measures[0];
        assert_eq!(m.kind, MeasureKind::SplitLineAtTwoThirds);
        assert!((m.length_km.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((stage.total_cost - 180_000.0 * 2.0 / 3.0).abs() < 1e-6);

        // Two-thirds segment in parallel with the new line, then the remaining third.
        let x_eff = (2.0 / 3.0) * x / 2.0 + x / 3.0;
        let v_after = ((1.0 + (1.0 - 4.0 * x_eff * x_eff * p * p).sqrt()) / 2.0).sqrt();
        let after = evaluate_use_cases(&stage.network, &cfg).unwrap();
        let v = after[0].solution.voltage("b2").unwrap();
        assert!((v - v_after).abs() < 1e-8, "{v} vs {v_after}");
        assert!(v >= 0.9);
        assert_eq!(stage.network.buses.len(), 3);
        assert_eq!(stage.network.lines.len(), 3);
    }

    #[test]
    fn unfixable_violation_reports_residual() {
        // Voltage drop lives entirely in the transformer; separation cannot help.
        let mut n = crate::test_support::two_bus_with(0.0, 0.1, 5.0);
        n.lines.clear();
        n.buses[0].voltage_level = crate::grid_model::VoltageLevel::MV;
        n.transformers.push(crate::grid_model::Transformer {
            id: "t".into(),
            hv_bus: "pcc".into(),
            lv_bus: "b2".into(),
            s_rated_mva: 2.0,
            vk_percent: 60.0,
            type_id: "t1".into(),
            parallel_count: 1,
        });
        set_load(&mut n, 1.5);
        match reinforce(&n, &catalog(), &ReinforceConfig::default()) {
            Err(Error::Unplannable {
                residual: Some(r), ..
            }) => assert!(!r.voltage.is_empty()),
            other => panic!("expected unplannable, got {other:?}"),
        }
    }

    #[test]
    fn diverging_base_case_is_unplannable() {
        let mut n = crate::test_support::two_bus_with(0.0, 0.1, 5.0);
        set_load(&mut n, 6.0);
        assert!(matches!(
            reinforce(&n, &catalog(), &ReinforceConfig::default()),
            Err(Error::Unplannable { residual: None, .. })
        ));
    }
}
