//! Feasible operation region (FOR) at the PCC.
//!
//! The region is traced by a direction sweep around an interior base point.
//! Along each ray the largest feasible scale is found by bisection, where a
//! target PCC flow counts as feasible iff some dispatch realizes it with a
//! converged, violation-free AC power flow. Every vertex keeps that dispatch
//! as a certificate so it can be re-checked by the power flow alone.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{impedance_tree, use_case_dispatch, ReinforceConfig, UseCase};
use crate::geometry::{self, PqPoint};
use crate::grid_model::{Network, UnitKind};
use crate::power_flow::{check_violations, DispatchPoint, PfModel, PfOptions, PfSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_directions: usize,
    /// Defaults to 1% of the grid peak.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisection_tol_mw: Option<f64>,
    pub max_bisection_steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_directions: 36,
            bisection_tol_mw: None,
            max_bisection_steps: 40,
        }
    }
}

impl SweepConfig {
    pub fn with_directions(n_directions: usize) -> Self {
        SweepConfig {
            n_directions,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_directions < 8 {
            return Err(Error::Invalid("n_directions must be at least 8".into()));
        }
        if self.max_bisection_steps == 0 {
            return Err(Error::Invalid(
                "max_bisection_steps must be positive".into(),
            ));
        }
        match self.bisection_tol_mw {
            Some(t) if !(t > 0.0) => {
                Err(Error::Invalid("bisection_tol_mw must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Bisection tolerance resolved against the grid.
    pub fn tolerance(&self, network: &Network) -> f64 {
        self.bisection_tol_mw.unwrap_or_else(|| {
            let peak = network.peak_mw();
            if peak > 0.0 {
                0.01 * peak
            } else {
                1e-6
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexCertificate {
    pub dispatch: DispatchPoint,
    /// Distance between the last feasible and first infeasible scale.
    pub gap_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForPolygon {
    /// Counterclockwise, one vertex per sweep direction starting at 0 degrees.
    pub vertices: Vec<PqPoint>,
    pub base_point: PqPoint,
    pub area: f64,
    pub tolerance_mw: f64,
    pub certificates: Vec<VertexCertificate>,
}

impl ForPolygon {
    pub fn direction_deg(&self, k: usize) -> f64 {
        360.0 * k as f64 / self.vertices.len() as f64
    }

    pub fn direction(&self, k: usize) -> PqPoint {
        let th = self.direction_deg(k).to_radians();
        PqPoint::new(th.cos(), th.sin())
    }

    /// Ray scale of vertex `k` measured from the base point.
    pub fn extent(&self, k: usize) -> f64 {
        self.vertices[k].dist(self.base_point)
    }

    pub fn max_abs_p(&self) -> f64 {
        self.vertices.iter().fold(0.0, |m, v| m.max(v.p_mw.abs()))
    }

    pub fn max_apparent(&self) -> f64 {
        self.vertices
            .iter()
            .fold(0.0, |m, v| m.max(v.p_mw.hypot(v.q_mvar)))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta_deg,p_mw,q_mvar\n");
        for (k, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.direction_deg(k), v.p_mw, v.q_mvar);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Policy {
    /// Every unit moves by the same fraction of its range.
    Proportional,
    /// Units leave their neutral setpoint in order of electrical distance.
    NearestFirst,
}

const POLICIES: [(Policy, Policy); 4] = [
    (Policy::Proportional, Policy::Proportional),
    (Policy::NearestFirst, Policy::NearestFirst),
    (Policy::NearestFirst, Policy::Proportional),
    (Policy::Proportional, Policy::NearestFirst),
];

const LOSS_ITERATIONS: usize = 40;

/// Feasibility oracle for target PCC flows of one network.
pub struct ForOracle<'a> {
    network: &'a Network,
    model: PfModel,
    opts: PfOptions,
    /// Unit indices by electrical distance from the PCC.
    nearest: Vec<usize>,
    p_ranges: Vec<(f64, f64)>,
    match_tol: f64,
}

impl<'a> ForOracle<'a> {
    pub fn new(network: &'a Network) -> Result<Self> {
        let model = PfModel::new(network)?;
        let (dist, _) = impedance_tree(network)?;
        let index = network.bus_index();
        let mut nearest: Vec<usize> = (0..network.units.len()).collect();
        let d = |i: usize| dist[index[network.units[i].bus.as_str()]];
        nearest.sort_by(|&a, &b| {
            d(a).total_cmp(&d(b))
                .then_with(|| network.units[a].id.cmp(&network.units[b].id))
        });
        let p_ranges = network
            .units
            .iter()
            .map(|u| match &u.equivalent {
                Some(eq) if !eq.vertices.is_empty() => {
                    let (lo, hi, _, _) = geometry::bounding_box(&eq.vertices);
                    (lo.max(u.p_min_mw), hi.min(u.p_max_mw))
                }
                _ => (u.p_min_mw, u.p_max_mw),
            })
            .collect();
        Ok(ForOracle {
            network,
            model,
            opts: PfOptions::default(),
            nearest,
            p_ranges,
            match_tol: 1e-7 * network.peak_mw().max(1.0),
        })
    }

    pub fn network(&self) -> &Network {
        self.network
    }

    /// Power flow of a dispatch if it is converged and violation-free.
    pub fn verify(&self, dispatch: &DispatchPoint) -> Option<PfSolution> {
        dispatch.check_ranges(self.network, 1e-9).ok()?;
        let sol = self.model.solve(dispatch, &self.opts).ok()?;
        if !sol.converged {
            return None;
        }
        check_violations(self.network, &sol)
            .ok()?
            .is_empty()
            .then_some(sol)
    }

    /// A dispatch realizing `target` at the PCC without violations.
    pub fn feasible(&self, target: PqPoint) -> Option<DispatchPoint> {
        POLICIES
            .iter()
            .find_map(|&(pp, qp)| self.try_policy(target, pp, qp))
    }

    fn try_policy(
        &self,
        target: PqPoint,
        p_policy: Policy,
        q_policy: Policy,
    ) -> Option<DispatchPoint> {
        // total injection needed = losses - import
        // Guesses may overshoot the reachable range while the loss estimate
        // settles, so they are clamped; a persistent overshoot means the
        // target is out of reach.
        let mut need = target.neg();
        let mut last_excess = f64::INFINITY;
        for it in 0..LOSS_ITERATIONS {
            let (dispatch, excess) = self.allocate(need, p_policy, q_policy)?;
            if excess > 0.1 * self.match_tol {
                if it >= 2 && excess > 0.5 * last_excess {
                    return None;
                }
                last_excess = excess;
            }
            let sol = self.model.solve(&dispatch, &self.opts).ok()?;
            if !sol.converged {
                return None;
            }
            let err = PqPoint::new(sol.pcc_p_mw - target.p_mw, sol.pcc_q_mvar - target.q_mvar);
            if err.p_mw.abs().max(err.q_mvar.abs()) <= self.match_tol {
                let ok = dispatch.check_ranges(self.network, 1e-9).is_ok()
                    && check_violations(self.network, &sol).ok()?.is_empty();
                return ok.then_some(dispatch);
            }
            let used = dispatch.total();
            need = PqPoint::new(used.p_mw + err.p_mw, used.q_mvar + err.q_mvar);
        }
        None
    }

    /// Dispatch realizing the total injection, clamped to what the units can
    /// reach, plus the largest clamping distance.
    fn allocate(
        &self,
        total: PqPoint,
        p_policy: Policy,
        q_policy: Policy,
    ) -> Option<(DispatchPoint, f64)> {
        let units = &self.network.units;
        let (p, ex_p) = split(total.p_mw, &self.p_ranges, p_policy, &self.nearest)?;
        let q_ranges: Vec<(f64, f64)> = units
            .iter()
            .zip(&p)
            .map(|(u, &pu)| match &u.equivalent {
                Some(eq) if !eq.vertices.is_empty() => geometry::q_range_at(&eq.vertices, pu)
                    .map(|(lo, hi)| (lo.max(u.q_min_mvar), hi.min(u.q_max_mvar)))
                    .unwrap_or((u.q_min_mvar, u.q_min_mvar)),
                _ => (u.q_min_mvar, u.q_max_mvar),
            })
            .collect();
        let (q, ex_q) = split(total.q_mvar, &q_ranges, q_policy, &self.nearest)?;
        let mut d = DispatchPoint::default();
        for ((u, pu), qu) in units.iter().zip(p).zip(q) {
            let mut sp = PqPoint::new(pu, qu);
            if let Some(eq) = u.equivalent.as_ref().filter(|e| !e.vertices.is_empty()) {
                sp = geometry::project(&eq.vertices, sp);
            }
            d.setpoints.insert(u.id.clone(), sp);
        }
        Some((d, ex_p.max(ex_q)))
    }

    /// Ray search from `base` along unit direction `dir`, up to `s_outer`.
    fn ray(
        &self,
        base: PqPoint,
        base_dispatch: &DispatchPoint,
        dir: PqPoint,
        s_outer: f64,
        tol: f64,
        max_steps: usize,
    ) -> (PqPoint, VertexCertificate) {
        let at = |s: f64| PqPoint::new(base.p_mw + s * dir.p_mw, base.q_mvar + s * dir.q_mvar);
        let mut lo = 0.0;
        let mut best = base_dispatch.clone();
        if let Some(d) = self.feasible(at(s_outer)) {
            return (
                at(s_outer),
                VertexCertificate {
                    dispatch: d,
                    gap_mw: 0.0,
                },
            );
        }
        let mut hi = s_outer;
        // The feasible set along a ray need not be an interval; after each
        // bisection probe just beyond the bracket and resume if still feasible.
        for _ in 0..8 {
            let mut steps = 0;
            while hi - lo > tol && steps < max_steps {
                let mid = 0.5 * (lo + hi);
                match self.feasible(at(mid)) {
                    Some(d) => {
                        lo = mid;
                        best = d;
                    }
                    None => hi = mid,
                }
                steps += 1;
            }
            let probe = lo + 2.0 * tol;
            if probe >= s_outer {
                break;
            }
            match self.feasible(at(probe)) {
                Some(d) => {
                    lo = probe;
                    best = d;
                    hi = s_outer;
                }
                None => break,
            }
        }
        (
            at(lo),
            VertexCertificate {
                dispatch: best,
                gap_mw: hi - lo,
            },
        )
    }
}

/// Splits `total` over units with the given ranges after clamping it onto
/// the reachable interval; also returns the clamping distance.
fn split(
    total: f64,
    ranges: &[(f64, f64)],
    policy: Policy,
    order: &[usize],
) -> Option<(Vec<f64>, f64)> {
    let lo_sum = ranges.iter().fold(0.0, |a, r| a + r.0);
    let hi_sum = ranges.iter().fold(0.0, |a, r| a + r.1);
    if ranges.iter().any(|r| r.0 > r.1) || !total.is_finite() {
        return None;
    }
    let clamped = total.clamp(lo_sum, hi_sum);
    let excess = (total - clamped).abs();
    let total = clamped;
    let x = match policy {
        Policy::Proportional => {
            let span = hi_sum - lo_sum;
            let lambda = if span > 0.0 {
                ((total - lo_sum) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            ranges
                .iter()
                .map(|&(lo, hi)| lo + lambda * (hi - lo))
                .collect()
        }
        Policy::NearestFirst => {
            let mut x: Vec<f64> = ranges.iter().map(|&(lo, hi)| 0f64.clamp(lo, hi)).collect();
            let mut rest = total - x.iter().sum::<f64>();
            for &i in order {
                let (lo, hi) = ranges[i];
                let d = if rest > 0.0 {
                    rest.min(hi - x[i])
                } else {
                    rest.max(lo - x[i])
                };
                x[i] += d;
                rest -= d;
            }
            x
        }
    };
    Some((x, excess))
}

/// Convenience wrapper building a fresh oracle.
pub fn feasible(network: &Network, target: PqPoint) -> Result<Option<DispatchPoint>> {
    Ok(ForOracle::new(network)?.feasible(target))
}

/// Outer box of reachable PCC flows ignoring the network: (p_lo, p_hi, q_lo, q_hi).
fn capacity_box(network: &Network) -> (f64, f64, f64, f64) {
    network
        .units
        .iter()
        .fold((0.0, 0.0, 0.0, 0.0), |(a, b, c, d), u| {
            let (p_lo, p_hi, q_lo, q_hi) = match &u.equivalent {
                Some(eq) if !eq.vertices.is_empty() => geometry::bounding_box(&eq.vertices),
                _ => (u.p_min_mw, u.p_max_mw, u.q_min_mvar, u.q_max_mvar),
            };
            (a - p_hi, b - p_lo, c - q_hi, d - q_lo)
        })
}

/// PCC flow of the network under a dispatch, if the power flow converges.
fn pcc_of(oracle: &ForOracle, dispatch: &DispatchPoint) -> Option<PqPoint> {
    let sol = oracle.model.solve(dispatch, &oracle.opts).ok()?;
    sol.converged.then(|| sol.pcc())
}

/// Interior anchor of the sweep: the midpoint of the two use-case PCC
/// flows, pulled toward the high-load flow (then the feed-in flow, then the
/// all-neutral flow) when the midpoint itself is infeasible.
fn base_point(oracle: &ForOracle) -> Result<(PqPoint, DispatchPoint)> {
    let net = oracle.network;
    let rc = ReinforceConfig::default();
    let hl = pcc_of(oracle, &use_case_dispatch(net, UseCase::HighLoad, &rc));
    let fi = pcc_of(oracle, &use_case_dispatch(net, UseCase::HighFeedIn, &rc));
    let mut neutral = DispatchPoint::default();
    for u in &net.units {
        let (p, q) = u.neutral();
        let mut sp = PqPoint::new(p, q);
        if let Some(eq) = u.equivalent.as_ref().filter(|e| !e.vertices.is_empty()) {
            sp = geometry::project(&eq.vertices, sp);
        }
        neutral.setpoints.insert(u.id.clone(), sp);
    }
    let zero = pcc_of(oracle, &neutral);

    let mut candidates = Vec::new();
    if let (Some(a), Some(b)) = (hl, fi) {
        let mid = PqPoint::new(0.5 * (a.p_mw + b.p_mw), 0.5 * (a.q_mvar + b.q_mvar));
        candidates.push(mid);
        for anchor in [a, b] {
            for k in 1..=6 {
                let t = 0.5f64.powi(k);
                candidates.push(PqPoint::new(
                    anchor.p_mw + t * (mid.p_mw - anchor.p_mw),
                    anchor.q_mvar + t * (mid.q_mvar - anchor.q_mvar),
                ));
            }
            candidates.push(anchor);
        }
    }
    candidates.extend(hl.into_iter().chain(fi).chain(zero));
    for c in candidates {
        if let Some(d) = oracle.feasible(c) {
            return Ok((c, d));
        }
    }
    Err(Error::Infeasible(format!(
        "no feasible base point found for {}",
        net.id
    )))
}

/// Direction sweep with bisection; rays are evaluated in parallel.
pub fn compute_for(network: &Network, cfg: &SweepConfig) -> Result<ForPolygon> {
    cfg.check()?;
    let oracle = ForOracle::new(network)?;
    let tol = cfg.tolerance(network);
    let (base, base_dispatch) = base_point(&oracle)?;
    let (p_lo, p_hi, q_lo, q_hi) = capacity_box(network);
    let reach = [(p_lo, q_lo), (p_lo, q_hi), (p_hi, q_lo), (p_hi, q_hi)]
        .iter()
        .map(|&(p, q)| PqPoint::new(p, q).dist(base))
        .fold(0.0, f64::max);
    let s_outer = 1.5 * reach + 4.0 * tol;

    let n = cfg.n_directions;
    let rays: Vec<(PqPoint, VertexCertificate)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let th = (360.0 * k as f64 / n as f64).to_radians();
            let dir = PqPoint::new(th.cos(), th.sin());
            oracle.ray(
                base,
                &base_dispatch,
                dir,
                s_outer,
                tol,
                cfg.max_bisection_steps,
            )
        })
        .collect();
    let (vertices, certificates): (Vec<_>, Vec<_>) = rays.into_iter().unzip();
    let area = geometry::signed_area(&vertices).max(0.0);
    Ok(ForPolygon {
        vertices,
        base_point: base,
        area,
        tolerance_mw: tol,
        certificates,
    })
}

/// Re-checks every vertex certificate with a fresh power flow.
pub fn verify_certificates(network: &Network, polygon: &ForPolygon) -> Result<()> {
    let oracle = ForOracle::new(network)?;
    let match_tol = polygon.tolerance_mw.max(oracle.match_tol);
    for (k, (v, c)) in polygon
        .vertices
        .iter()
        .zip(&polygon.certificates)
        .enumerate()
    {
        let sol = oracle.verify(&c.dispatch).ok_or_else(|| {
            Error::Infeasible(format!("certificate {k} of {} is not feasible", network.id))
        })?;
        if sol.pcc().dist(*v) > match_tol {
            return Err(Error::Infeasible(format!(
                "certificate {k} of {} realizes ({}, {}) instead of ({}, {})",
                network.id, sol.pcc_p_mw, sol.pcc_q_mvar, v.p_mw, v.q_mvar
            )));
        }
    }
    Ok(())
}

/// Whether a network has any flexible unit at all.
pub fn has_flexibility(network: &Network) -> bool {
    network.units.iter().any(|u| {
        u.kind == UnitKind::EquivalentFpr || u.p_min_mw < u.p_max_mw || u.q_min_mvar < u.q_max_mvar
    })
}
