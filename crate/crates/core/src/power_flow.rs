//! Balanced AC power flow with the PCC as slack bus.
//!
//! Newton-Raphson in polar coordinates from a flat start. Lines are series
//! impedances (no shunt charging), transformers are series reactances with
//! ideal ratio. Every non-PCC bus is a PQ bus.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, PqPoint};
use crate::grid_model::Network;

/// Setpoints of all units, keyed by unit id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchPoint {
    pub setpoints: BTreeMap<String, PqPoint>,
}

impl DispatchPoint {
    pub fn set(&mut self, unit: &str, p_mw: f64, q_mvar: f64) {
        self.setpoints
            .insert(unit.to_string(), PqPoint::new(p_mw, q_mvar));
    }

    /// Checks that every unit has a setpoint inside its feasible set.
    pub fn check_ranges(&self, network: &Network, tol: f64) -> Result<()> {
        for u in &network.units {
            let sp = self
                .setpoints
                .get(&u.id)
                .ok_or_else(|| Error::Invalid(format!("no setpoint for unit {}", u.id)))?;
            let in_box = sp.p_mw >= u.p_min_mw - tol
                && sp.p_mw <= u.p_max_mw + tol
                && sp.q_mvar >= u.q_min_mvar - tol
                && sp.q_mvar <= u.q_max_mvar + tol;
            if !in_box {
                return Err(Error::Invalid(format!(
                    "setpoint of {} outside its range",
                    u.id
                )));
            }
            if let Some(eq) = &u.equivalent {
                if !geometry::contains(&eq.vertices, *sp, tol) {
                    return Err(Error::Invalid(format!(
                        "setpoint of {} outside its child region",
                        u.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total(&self) -> PqPoint {
        self.setpoints.values().fold(PqPoint::default(), |acc, s| {
            PqPoint::new(acc.p_mw + s.p_mw, acc.q_mvar + s.q_mvar)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Line,
    Transformer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    pub id: String,
    pub kind: BranchKind,
    pub p_from_mw: f64,
    pub q_from_mvar: f64,
    pub p_to_mw: f64,
    pub q_to_mvar: f64,
    pub s_from_mva: f64,
    pub s_to_mva: f64,
    pub loading_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfSolution {
    pub bus_ids: Vec<String>,
    pub v_pu: Vec<f64>,
    pub theta_rad: Vec<f64>,
    pub branch_flows: Vec<BranchFlow>,
    /// Import into the distribution grid through the PCC.
    pub pcc_p_mw: f64,
    pub pcc_q_mvar: f64,
    pub losses_mw: f64,
    pub losses_mvar: f64,
    pub converged: bool,
    /// Singular Jacobian or non-finite iterate.
    pub diverged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PfSolution {
    pub fn voltage(&self, bus: &str) -> Option<f64> {
        self.bus_ids
            .iter()
            .position(|b| b == bus)
            .map(|i| self.v_pu[i])
    }

    pub fn flow(&self, element: &str) -> Option<&BranchFlow> {
        self.branch_flows.iter().find(|f| f.id == element)
    }

    pub fn pcc(&self) -> PqPoint {
        PqPoint::new(self.pcc_p_mw, self.pcc_q_mvar)
    }

    pub fn bus_csv(&self) -> String {
        let mut s = String::from("bus,v_pu,theta_rad\n");
        for ((b, v), t) in self.bus_ids.iter().zip(&self.v_pu).zip(&self.theta_rad) {
            let _ = writeln!(s, "{b},{v},{t}");
        }
        s
    }

    pub fn branch_csv(&self) -> String {
        let mut s = String::from("element,loading_percent\n");
        for f in &self.branch_flows {
            let _ = writeln!(s, "{},{}", f.id, f.loading_percent);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for PfOptions {
    fn default() -> Self {
        PfOptions {
            tolerance: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalViolation {
    pub element: String,
    pub loading_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageViolation {
    pub bus: String,
    pub v_pu: f64,
    pub bound: Bound,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    pub thermal: Vec<ThermalViolation>,
    pub voltage: Vec<VoltageViolation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.thermal.is_empty() && self.voltage.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Branch {
    id: String,
    kind: BranchKind,
    from: usize,
    to: usize,
    y: Complex64,
    rating_mva: f64,
}

/// Admittance model of a network, reusable across many dispatches.
#[derive(Debug, Clone)]
pub struct PfModel {
    bus_ids: Vec<String>,
    slack: usize,
    base_mva: f64,
    y_bus: DMatrix<Complex64>,
    branches: Vec<Branch>,
    /// (unit id, bus index)
    units: Vec<(String, usize)>,
}

impl PfModel {
    pub fn new(network: &Network) -> Result<Self> {
        let index = network.bus_index();
        let slack = network.pcc_index()?;
        let nb = network.buses.len();
        let base_mva = network.base_mva;
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::Topology(format!("unknown bus `{id}`")))
        };

        let mut branches = Vec::with_capacity(network.lines.len() + network.transformers.len());
        for l in &network.lines {
            let from = lookup(&l.from_bus)?;
            let to = lookup(&l.to_bus)?;
            let kv = network.buses[from].base_kv;
            branches.push(Branch {
                id: l.id.clone(),
                kind: BranchKind::Line,
                from,
                to,
                y: l.impedance_pu(kv, base_mva).inv(),
                rating_mva: l.rating_mva(kv),
            });
        }
        for t in &network.transformers {
            branches.push(Branch {
                id: t.id.clone(),
                kind: BranchKind::Transformer,
                from: lookup(&t.hv_bus)?,
                to: lookup(&t.lv_bus)?,
                y: Complex64::new(0.0, t.reactance_pu(base_mva)).inv(),
                rating_mva: t.rating_mva(),
            });
        }

        let mut y_bus = DMatrix::from_element(nb, nb, Complex64::new(0.0, 0.0));
        for b in &branches {
            y_bus[(b.from, b.from)] += b.y;
            y_bus[(b.to, b.to)] += b.y;
            y_bus[(b.from, b.to)] -= b.y;
            y_bus[(b.to, b.from)] -= b.y;
        }

        let units = network
            .units
            .iter()
            .map(|u| Ok((u.id.clone(), lookup(&u.bus)?)))
            .collect::<Result<Vec<_>>>()?;

        Ok(PfModel {
            bus_ids: network.buses.iter().map(|b| b.id.clone()).collect(),
            slack,
            base_mva,
            y_bus,
            branches,
            units,
        })
    }

    pub fn y_bus(&self) -> &DMatrix<Complex64> {
        &self.y_bus
    }

    /// Net specified injection per bus in per unit.
    fn injections(&self, dispatch: &DispatchPoint) -> Result<Vec<Complex64>> {
        let mut s = vec![Complex64::new(0.0, 0.0); self.bus_ids.len()];
        for (id, bus) in &self.units {
            let sp = dispatch
                .setpoints
                .get(id)
                .ok_or_else(|| Error::Invalid(format!("dispatch misses unit {id}")))?;
            s[*bus] += Complex64::new(sp.p_mw, sp.q_mvar) / self.base_mva;
        }
        if let Some(extra) = dispatch
            .setpoints
            .keys()
            .find(|k| !self.units.iter().any(|(u, _)| u == *k))
        {
            return Err(Error::Invalid(format!(
                "dispatch names unknown unit {extra}"
            )));
        }
        Ok(s)
    }

    pub fn solve(&self, dispatch: &DispatchPoint, opts: &PfOptions) -> Result<PfSolution> {
        let s_set = self.injections(dispatch)?;
        Ok(self.solve_injections(&s_set, opts))
    }

    fn solve_injections(&self, s_set: &[Complex64], opts: &PfOptions) -> PfSolution {
        let nb = self.bus_ids.len();
        let pq: Vec<usize> = (0..nb).filter(|&i| i != self.slack).collect();
        let n = pq.len();
        let mut vm = vec![1.0; nb];
        let mut va = vec![0.0; nb];

        let mut converged = false;
        let mut diverged = false;
        let mut iterations = 0;
        let mut max_mismatch;

        loop {
            let (p_calc, q_calc) = self.calc_power(&vm, &va);
            let mut f = DVector::zeros(2 * n);
            for (k, &i) in pq.iter().enumerate() {
                f[k] = s_set[i].re - p_calc[i];
                f[n + k] = s_set[i].im - q_calc[i];
            }
            max_mismatch = if n == 0 { 0.0 } else { f.amax() };
            if !max_mismatch.is_finite() {
                diverged = true;
                break;
            }
            if max_mismatch <= opts.tolerance {
                converged = true;
                break;
            }
            if iterations >= opts.max_iter {
                break;
            }
            iterations += 1;

            let jac = self.jacobian(&pq, &vm, &va, &p_calc, &q_calc);
            let Some(dx) = jac.lu().solve(&f) else {
                diverged = true;
                break;
            };
            for (k, &i) in pq.iter().enumerate() {
                va[i] += dx[k];
                vm[i] += dx[n + k];
            }
            if vm.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                diverged = true;
                break;
            }
        }

        self.assemble(s_set, vm, va, converged, diverged, iterations, max_mismatch)
    }

    fn calc_power(&self, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nb = vm.len();
        let mut p = vec![0.0; nb];
        let mut q = vec![0.0; nb];
        for i in 0..nb {
            for k in 0..nb {
                let y = self.y_bus[(i, k)];
                if y.re == 0.0 && y.im == 0.0 {
                    continue;
                }
                let (s, c) = (va[i] - va[k]).sin_cos();
                p[i] += vm[i] * vm[k] * (y.re * c + y.im * s);
                q[i] += vm[i] * vm[k] * (y.re * s - y.im * c);
            }
        }
        (p, q)
    }

    fn jacobian(&self, pq: &[usize], vm: &[f64], va: &[f64], p: &[f64], q: &[f64]) -> DMatrix<f64> {
        let n = pq.len();
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for (r, &i) in pq.iter().enumerate() {
            for (c, &k) in pq.iter().enumerate() {
                let y = self.y_bus[(i, k)];
                let (g, b) = (y.re, y.im);
                if i == k {
                    j[(r, c)] = -q[i] - b * vm[i] * vm[i];
                    j[(r, n + c)] = p[i] / vm[i] + g * vm[i];
                    j[(n + r, c)] = p[i] - g * vm[i] * vm[i];
                    j[(n + r, n + c)] = q[i] / vm[i] - b * vm[i];
                } else {
                    if g == 0.0 && b == 0.0 {
                        continue;
                    }
                    let (s, co) = (va[i] - va[k]).sin_cos();
                    j[(r, c)] = vm[i] * vm[k] * (g * s - b * co);
                    j[(r, n + c)] = vm[i] * (g * co + b * s);
                    j[(n + r, c)] = -vm[i] * vm[k] * (g * co + b * s);
                    j[(n + r, n + c)] = vm[i] * (g * s - b * co);
                }
            }
        }
        j
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        s_set: &[Complex64],
        vm: Vec<f64>,
        va: Vec<f64>,
        converged: bool,
        diverged: bool,
        iterations: usize,
        max_mismatch: f64,
    ) -> PfSolution {
        let v: Vec<Complex64> = vm
            .iter()
            .zip(&va)
            .map(|(m, a)| Complex64::from_polar(*m, *a))
            .collect();
        let base = self.base_mva;

        let mut branch_flows = Vec::with_capacity(self.branches.len());
        let mut losses = Complex64::new(0.0, 0.0);
        for br in &self.branches {
            let i = (v[br.from] - v[br.to]) * br.y;
            let s_from = v[br.from] * i.conj() * base;
            let s_to = v[br.to] * (-i).conj() * base;
            losses += s_from + s_to;
            let loading = s_from.norm().max(s_to.norm()) / br.rating_mva * 100.0;
            branch_flows.push(BranchFlow {
                id: br.id.clone(),
                kind: br.kind,
                p_from_mw: s_from.re,
                q_from_mvar: s_from.im,
                p_to_mw: s_to.re,
                q_to_mvar: s_to.im,
                s_from_mva: s_from.norm(),
                s_to_mva: s_to.norm(),
                loading_percent: loading,
            });
        }

        let sl = self.slack;
        let mut i_slack = Complex64::new(0.0, 0.0);
        for k in 0..v.len() {
            i_slack += self.y_bus[(sl, k)] * v[k];
        }
        let import = (v[sl] * i_slack.conj() - s_set[sl]) * base;

        PfSolution {
            bus_ids: self.bus_ids.clone(),
            v_pu: vm,
            theta_rad: va,
            branch_flows,
            pcc_p_mw: import.re,
            pcc_q_mvar: import.im,
            losses_mw: losses.re,
            losses_mvar: losses.im,
            converged,
            diverged,
            iterations,
            max_mismatch,
        }
    }
}

/// One-shot power flow with default options.
pub fn solve(network: &Network, dispatch: &DispatchPoint) -> Result<PfSolution> {
    PfModel::new(network)?.solve(dispatch, &PfOptions::default())
}

/// Thermal and voltage-band violations of a converged solution.
pub fn check_violations(network: &Network, sol: &PfSolution) -> Result<ViolationReport> {
    if !sol.converged {
        return Err(Error::Contract(
            "violation check on a non-converged power flow".into(),
        ));
    }
    let mut report = ViolationReport::default();
    for f in &sol.branch_flows {
        if f.loading_percent > 100.0 {
            report.thermal.push(ThermalViolation {
                element: f.id.clone(),
                loading_percent: f.loading_percent,
            });
        }
    }
    for (bus, v) in network.buses.iter().zip(&sol.v_pu) {
        let bound = if *v < bus.v_min_pu {
            Bound::Min
        } else if *v > bus.v_max_pu {
            Bound::Max
        } else {
            continue;
        };
        report.voltage.push(VoltageViolation {
            bus: bus.id.clone(),
            v_pu: *v,
            bound,
        });
    }
    report.thermal.sort_by(|a, b| a.element.cmp(&b.element));
    report.voltage.sort_by(|a, b| a.bus.cmp(&b.bus));
    Ok(report)
}
