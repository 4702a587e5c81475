//! Feasible planning region assembly, child embedding and linearization.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::ExpansionStage;
use crate::for_engine::ForPolygon;
use crate::geometry::{self, PqPoint};
use crate::grid_model::{EquivalentRegion, Network, Unit, UnitKind, Urbanization, VoltageLevel};

/// Relative tolerance under which two stage costs count as equal.
pub const COST_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridClass {
    pub voltage_level: VoltageLevel,
    pub urbanization: Urbanization,
}

impl GridClass {
    pub fn of(network: &Network) -> Self {
        GridClass {
            voltage_level: network.voltage_level(),
            urbanization: network.urbanization,
        }
    }
}

/// One expansion stage reduced to what the region needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FprEntry {
    pub cost: f64,
    pub polygon: ForPolygon,
    pub stage_ref: u64,
    pub scale_factor: f64,
}

impl FprEntry {
    pub fn from_stage(stage: &ExpansionStage, polygon: ForPolygon) -> Self {
        FprEntry {
            cost: stage.total_cost,
            polygon,
            stage_ref: stage.scenario_id,
            scale_factor: stage.scale_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fpr {
    pub grid_id: String,
    pub grid_class: GridClass,
    /// Strictly increasing in cost.
    pub entries: Vec<FprEntry>,
}

impl Fpr {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self, metric: CapacityMetric) -> String {
        let mut s = String::from("cost,area,R\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{}",
                e.cost,
                e.polygon.area,
                metric.capacity(&e.polygon)
            );
        }
        s
    }
}

fn same_cost(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOLERANCE * a.abs().max(b.abs())
}

/// Sorts stages by cost and keeps the largest region among equal-cost ones
/// (lower stage reference on exact ties).
pub fn assemble(grid_id: &str, grid_class: GridClass, stages: Vec<FprEntry>) -> Result<Fpr> {
    if stages.is_empty() {
        return Err(Error::Invalid(format!(
            "no stages to assemble for {grid_id}"
        )));
    }
    let mut stages = stages;
    stages.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(a.stage_ref.cmp(&b.stage_ref))
    });
    let mut entries: Vec<FprEntry> = Vec::new();
    let mut group_cost = f64::NAN;
    for s in stages {
        if !entries.is_empty() && same_cost(group_cost, s.cost) {
            let kept = entries.last_mut().expect("nonempty");
            if s.polygon.area > kept.polygon.area {
                *kept = s;
            }
        } else {
            group_cost = s.cost;
            entries.push(s);
        }
    }
    Ok(Fpr {
        grid_id: grid_id.to_string(),
        grid_class,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMetric {
    #[default]
    MaxAbsP,
    MaxApparent,
}

impl CapacityMetric {
    pub fn capacity(self, polygon: &ForPolygon) -> f64 {
        match self {
            CapacityMetric::MaxAbsP => polygon.max_abs_p(),
            CapacityMetric::MaxApparent => polygon.max_apparent(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearFprModel {
    pub grid_id: String,
    pub metric: CapacityMetric,
    pub capex_per_mw: f64,
    /// Fitted intercept clipped at zero.
    pub base_cost: f64,
    /// Fitted intercept before clipping.
    pub intercept: f64,
    pub m_min_mw: f64,
    pub m_max_mw: f64,
    pub f_min_pu: f64,
    pub f_max_pu: f64,
    pub opex_per_mwh: f64,
    pub r_squared: f64,
    /// Fewer than two distinct capacities; the slope is meaningless.
    pub degenerate: bool,
}

impl LinearFprModel {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Least-squares line `y = a x + b` among lines with `a >= 0`.
///
/// The objective is a convex quadratic, so when the free minimizer has a
/// negative slope the constrained one lies on `a = 0`, i.e. the mean.
pub fn nonneg_slope_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    if sxx > 0.0 && sxy > 0.0 {
        let a = sxy / sxx;
        (a, my - a * mx)
    } else {
        (0.0, my)
    }
}

/// Linear cost model of the region for the capacity expansion problem.
pub fn linearize(fpr: &Fpr, metric: CapacityMetric, opex_per_mwh: f64) -> Result<LinearFprModel> {
    if fpr.entries.is_empty() {
        return Err(Error::Invalid(format!(
            "region of {} has no entries",
            fpr.grid_id
        )));
    }
    let r: Vec<f64> = fpr
        .entries
        .iter()
        .map(|e| metric.capacity(&e.polygon))
        .collect();
    let c: Vec<f64> = fpr.entries.iter().map(|e| e.cost).collect();
    let m_min = r.iter().copied().fold(f64::INFINITY, f64::min);
    let m_max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = m_max - m_min <= 1e-12 * m_max.abs().max(1.0);

    let (a, intercept) = nonneg_slope_fit(&r, &c);
    let mean = c.iter().sum::<f64>() / c.len() as f64;
    let sst: f64 = c.iter().map(|ci| (ci - mean).powi(2)).sum();
    let sse: f64 = r
        .iter()
        .zip(&c)
        .map(|(ri, ci)| (ci - a * ri - intercept).powi(2))
        .sum();
    let r_squared = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse <= 1e-18 {
        1.0
    } else {
        0.0
    };

    let widest = r
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
        .map(|(i, _)| i)
        .expect("entries");
    let rw = r[widest];
    let (p_lo, p_hi, _, _) = geometry::bounding_box(&fpr.entries[widest].polygon.vertices);
    let (f_min, f_max) = if rw > 0.0 {
        ((p_lo / rw).clamp(-1.0, 0.0), (p_hi / rw).clamp(0.0, 1.0))
    } else {
        (0.0, 0.0)
    };
    if degenerate {
        log::warn!(
            "region of {} has a single capacity level; slope fixed at 0",
            fpr.grid_id
        );
    }
    Ok(LinearFprModel {
        grid_id: fpr.grid_id.clone(),
        metric,
        capex_per_mw: a,
        base_cost: intercept.max(0.0),
        intercept,
        m_min_mw: m_min,
        m_max_mw: m_max,
        f_min_pu: f_min,
        f_max_pu: f_max,
        opex_per_mwh,
        r_squared,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChildSelection {
    /// Entry whose stage scale factor is closest to the given one.
    ByScale(f64),
    /// Most expensive (final) entry.
    Largest,
}

pub fn select_entry(fpr: &Fpr, selection: ChildSelection) -> Result<&FprEntry> {
    let entry = match selection {
        ChildSelection::Largest => fpr.entries.last(),
        ChildSelection::ByScale(f) => fpr.entries.iter().min_by(|a, b| {
            (a.scale_factor - f)
                .abs()
                .total_cmp(&(b.scale_factor - f).abs())
        }),
    };
    entry.ok_or_else(|| Error::Invalid(format!("region of {} has no entries", fpr.grid_id)))
}

/// Adds the child region as an equivalent unit at `attach_bus`. The child's
/// PCC import becomes an injection of the opposite sign in the parent.
pub fn embed_child(
    parent: &Network,
    child: &Fpr,
    attach_bus: &str,
    selection: ChildSelection,
) -> Result<Network> {
    if parent.bus(attach_bus).is_none() {
        return Err(Error::Topology(format!(
            "attach bus `{attach_bus}` not found in {}",
            parent.id
        )));
    }
    let entry = select_entry(child, selection)?;
    let vertices: Vec<PqPoint> = entry.polygon.vertices.iter().map(|v| v.neg()).collect();
    let (p_min, p_max, q_min, q_max) = geometry::bounding_box(&vertices);
    let mut id = format!("{}.fpr", child.grid_id);
    let mut n = 1;
    while parent.unit(&id).is_some() {
        n += 1;
        id = format!("{}.fpr{}", child.grid_id, n);
    }
    let mut net = parent.clone();
    net.units.push(Unit {
        id,
        bus: attach_bus.to_string(),
        kind: UnitKind::EquivalentFpr,
        p_min_mw: p_min,
        p_max_mw: p_max,
        q_min_mvar: q_min,
        q_max_mvar: q_max,
        technology: "fpr".into(),
        child_fpr_ref: Some(child.grid_id.clone()),
        equivalent: Some(EquivalentRegion {
            vertices,
            cost: entry.cost,
            stage_ref: entry.stage_ref,
        }),
    });
    Ok(net)
}
