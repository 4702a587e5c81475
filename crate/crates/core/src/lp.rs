//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated as `min c'x + offset` over rows `a'x {<=,>=,=} b`
//! and variable bounds. Bounds are folded into nonnegative variables and
//! extra rows; the tableau pivots with Dantzig's rule and switches to
//! Bland's rule once a run of degenerate pivots suggests cycling.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub var_names: Vec<String>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    pub objective_offset: f64,
}

impl LinearProgram {
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.var_names.push(name.into());
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_offset
    }

    /// Largest bound or row violation of `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match r.sense {
                Sense::Le => lhs - r.rhs,
                Sense::Ge => r.rhs - lhs,
                Sense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if self.cost.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Invalid(
                "linear program vectors disagree in length".into(),
            ));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::Invalid(format!(
                    "bad bounds on {}",
                    self.var_names[j]
                )));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() || r.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(Error::Invalid(format!("malformed row {}", r.name)));
            }
        }
        if self.cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite cost".into()));
        }
        Ok(())
    }

    /// CPLEX-style LP text. The objective offset is written as a comment.
    pub fn to_lp_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\\ objective offset {}", self.objective_offset);
        s.push_str("Minimize\n obj:");
        let mut any = false;
        for (j, &c) in self.cost.iter().enumerate() {
            if c != 0.0 {
                write_term(&mut s, c, &self.var_names[j]);
                any = true;
            }
        }
        if !any {
            s.push_str(" + 0 ");
            s.push_str(self.var_names.first().map(String::as_str).unwrap_or("x"));
        }
        s.push_str("\nSubject To\n");
        for r in &self.rows {
            let _ = write!(s, " {}:", r.name);
            if r.coeffs.is_empty() {
                s.push_str(" + 0 ");
                s.push_str(self.var_names.first().map(String::as_str).unwrap_or("x"));
            }
            for &(j, a) in &r.coeffs {
                write_term(&mut s, a, &self.var_names[j]);
            }
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", r.rhs);
        }
        s.push_str("Bounds\n");
        for (j, name) in self.var_names.iter().enumerate() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let _ = match (l.is_finite(), u.is_finite()) {
                (false, false) => writeln!(s, " {name} free"),
                (true, true) => writeln!(s, " {l} <= {name} <= {u}"),
                (true, false) => writeln!(s, " {name} >= {l}"),
                (false, true) => writeln!(s, " -inf <= {name} <= {u}"),
            };
        }
        s.push_str("End\n");
        s
    }

    /// Parses the subset of LP text written by [`LinearProgram::to_lp_text`].
    pub fn from_lp_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Invalid(format!("LP text: {m}"));
        let mut lp = LinearProgram::default();
        let mut index = std::collections::HashMap::new();
        let mut var = |lp: &mut LinearProgram, name: &str| -> usize {
            *index
                .entry(name.to_string())
                .or_insert_with(|| lp.add_var(name, 0.0, 0.0, f64::INFINITY))
        };
        // Bounds list every variable in order, so they are read first.
        let mut in_bounds = false;
        for line in text.lines().map(str::trim) {
            match line {
                "Bounds" => in_bounds = true,
                "End" | "Minimize" | "Subject To" => in_bounds = false,
                _ if in_bounds && !line.is_empty() => {
                    let t: Vec<&str> = line.split_whitespace().collect();
                    let num = |s: &str| -> Result<f64> {
                        match s {
                            "-inf" => Ok(f64::NEG_INFINITY),
                            "+inf" | "inf" => Ok(f64::INFINITY),
                            _ => s.parse().map_err(|_| bad("bound")),
                        }
                    };
                    match t.as_slice() {
                        [name, "free"] => {
                            let j = var(&mut lp, name);
                            lp.lower[j] = f64::NEG_INFINITY;
                            lp.upper[j] = f64::INFINITY;
                        }
                        [l, "<=", name, "<=", u] => {
                            let j = var(&mut lp, name);
                            lp.lower[j] = num(l)?;
                            lp.upper[j] = num(u)?;
                        }
                        [name, ">=", l] => {
                            let j = var(&mut lp, name);
                            lp.lower[j] = num(l)?;
                        }
                        _ => return Err(bad("unrecognized bound")),
                    }
                }
                _ => {}
            }
        }
        let mut section = "";
        for line in text.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("\\ objective offset ") {
                lp.objective_offset = rest.trim().parse().map_err(|_| bad("offset"))?;
                continue;
            }
            if line.is_empty() || line.starts_with('\\') {
                continue;
            }
            match line {
                "Minimize" | "Subject To" | "Bounds" | "End" => {
                    section = line;
                    continue;
                }
                _ => {}
            }
            match section {
                "Minimize" | "Subject To" => {
                    let (name, body) = line.split_once(':').ok_or_else(|| bad("missing label"))?;
                    let tokens: Vec<&str> = body.split_whitespace().collect();
                    let op_at = tokens.iter().position(|t| matches!(*t, "<=" | ">=" | "="));
                    let terms_end = op_at.unwrap_or(tokens.len());
                    let mut coeffs = Vec::new();
                    let mut k = 0;
                    while k < terms_end {
                        let sign = match tokens[k] {
                            "+" => 1.0,
                            "-" => -1.0,
                            _ => return Err(bad("expected sign")),
                        };
                        let c: f64 = tokens
                            .get(k + 1)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| bad("coefficient"))?;
                        let v = tokens.get(k + 2).ok_or_else(|| bad("variable"))?;
                        let j = var(&mut lp, v);
                        coeffs.push((j, sign * c));
                        k += 3;
                    }
                    if section == "Minimize" {
                        for (j, c) in coeffs {
                            lp.cost[j] += c;
                        }
                    } else {
                        let op = op_at.ok_or_else(|| bad("row without relation"))?;
                        let sense = match tokens[op] {
                            "<=" => Sense::Le,
                            ">=" => Sense::Ge,
                            _ => Sense::Eq,
                        };
                        let rhs = tokens
                            .get(op + 1)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| bad("rhs"))?;
                        let coeffs = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
                        lp.add_row(name.trim(), coeffs, sense, rhs);
                    }
                }
                "Bounds" => {}
                _ => return Err(bad("text outside a section")),
            }
        }
        Ok(lp)
    }
}

fn write_term(s: &mut String, c: f64, name: &str) {
    let sign = if c < 0.0 { '-' } else { '+' };
    let _ = write!(s, " {sign} {} {name}", c.abs());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit or a solution failing the residual check.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub message: String,
}

/// How an original variable is recovered from tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + col
    Shift(usize, f64),
    /// x = offset - col
    Mirror(usize, f64),
    /// x = pos - neg
    Split(usize, usize),
}

const EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

struct Tableau {
    rows: usize,
    cols: usize,
    /// (rows + 1) x (cols + 1); last row holds reduced costs, last column rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    bland: bool,
    degenerate_run: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.t[r * w + c];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        let (head, tail) = self.t.split_at_mut(r * w);
        let (prow, tail) = tail.split_at_mut(w);
        for row in head.chunks_mut(w).chain(tail.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for j in 0..w {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Rebuilds the reduced-cost row for the cost vector `c`.
    fn price(&mut self, c: &[f64]) {
        let w = self.cols + 1;
        let m = self.rows;
        for j in 0..w {
            let mut z = if j < self.cols { c[j] } else { 0.0 };
            for i in 0..m {
                z -= c[self.basis[i]] * self.t[i * w + j];
            }
            self.t[m * w + j] = z;
        }
    }

    fn run(&mut self, allowed: &[bool]) -> Step {
        let m = self.rows;
        loop {
            if self.iterations >= MAX_PIVOTS {
                return Step::Limit;
            }
            let mut enter = None;
            let mut best = -EPS;
            for j in 0..self.cols {
                if !allowed[j] {
                    continue;
                }
                let d = self.at(m, j);
                if d < best {
                    enter = Some(j);
                    if self.bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else {
                return Step::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.at(i, c);
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((k, r)) => {
                            ratio < r - 1e-12
                                || (ratio <= r + 1e-12 && self.basis[i] < self.basis[k])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Step::Unbounded;
            };
            if ratio.abs() <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > 50 {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// Solves the program; never panics on well-formed input.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.n_vars();

    // columns for the shifted, nonnegative variables
    let mut maps = Vec::with_capacity(n);
    let mut cols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            maps.push(VarMap::Shift(cols, l));
            if u.is_finite() {
                bound_rows.push((cols, u - l));
            }
            cols += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Mirror(cols, u));
            cols += 1;
        } else {
            maps.push(VarMap::Split(cols, cols + 1));
            cols += 2;
        }
    }
    let n_struct = cols;

    // dense rows over structural columns, with rhs >= 0 after sign flips
    let mut a_rows: Vec<(Vec<f64>, Sense, f64)> =
        Vec::with_capacity(lp.rows.len() + bound_rows.len());
    let mut cost = vec![0.0; n_struct];
    for (j, m) in maps.iter().enumerate() {
        match *m {
            VarMap::Shift(c, _) => cost[c] += lp.cost[j],
            VarMap::Mirror(c, _) => cost[c] -= lp.cost[j],
            VarMap::Split(p, q) => {
                cost[p] += lp.cost[j];
                cost[q] -= lp.cost[j];
            }
        }
    }
    for r in &lp.rows {
        let mut a = vec![0.0; n_struct];
        let mut rhs = r.rhs;
        for &(j, v) in &r.coeffs {
            match maps[j] {
                VarMap::Shift(c, o) => {
                    a[c] += v;
                    rhs -= v * o;
                }
                VarMap::Mirror(c, o) => {
                    a[c] -= v;
                    rhs -= v * o;
                }
                VarMap::Split(p, q) => {
                    a[p] += v;
                    a[q] -= v;
                }
            }
        }
        a_rows.push((a, r.sense, rhs));
    }
    for &(c, ub) in &bound_rows {
        let mut a = vec![0.0; n_struct];
        a[c] = 1.0;
        a_rows.push((a, Sense::Le, ub));
    }
    for (a, sense, rhs) in a_rows.iter_mut() {
        if *rhs < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let m = a_rows.len();
    let n_slack = a_rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = a_rows.iter().filter(|r| r.1 != Sense::Le).count();
    let total = n_struct + n_slack + n_art;
    let w = total + 1;
    let mut t = vec![0.0; (m + 1) * w];
    let mut basis = vec![0usize; m];
    let mut is_art = vec![false; total];
    let (mut s_next, mut a_next) = (n_struct, n_struct + n_slack);
    for (i, (a, sense, rhs)) in a_rows.iter().enumerate() {
        t[i * w..i * w + n_struct].copy_from_slice(a);
        t[i * w + total] = *rhs;
        match sense {
            Sense::Le => {
                t[i * w + s_next] = 1.0;
                basis[i] = s_next;
                s_next += 1;
            }
            Sense::Ge => {
                t[i * w + s_next] = -1.0;
                s_next += 1;
                t[i * w + a_next] = 1.0;
                basis[i] = a_next;
                is_art[a_next] = true;
                a_next += 1;
            }
            Sense::Eq => {
                t[i * w + a_next] = 1.0;
                basis[i] = a_next;
                is_art[a_next] = true;
                a_next += 1;
            }
        }
    }
    let mut tab = Tableau {
        rows: m,
        cols: total,
        t,
        basis,
        iterations: 0,
        bland: false,
        degenerate_run: 0,
    };
    let scale = 1.0 + a_rows.iter().map(|r| r.2).fold(0.0, f64::max);

    let fail = |status, message: String, iterations| LpSolution {
        status,
        objective: f64::NAN,
        x: vec![f64::NAN; n],
        iterations,
        residual: f64::NAN,
        message,
    };

    // phase 1
    if n_art > 0 {
        let c1: Vec<f64> = is_art.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        tab.price(&c1);
        let all = vec![true; total];
        match tab.run(&all) {
            Step::Optimal => {}
            Step::Unbounded => {
                return Ok(fail(
                    LpStatus::Failed,
                    "phase 1 unbounded".into(),
                    tab.iterations,
                ));
            }
            Step::Limit => {
                return Ok(fail(
                    LpStatus::Failed,
                    "pivot limit in phase 1".into(),
                    tab.iterations,
                ));
            }
        }
        let infeas = -tab.at(m, total);
        if infeas > 1e-8 * scale {
            return Ok(fail(
                LpStatus::Infeasible,
                format!("phase 1 ends with infeasibility {infeas:e}"),
                tab.iterations,
            ));
        }
        // drive remaining artificials out of the basis
        for i in 0..m {
            if is_art[tab.basis[i]] {
                if let Some(j) = (0..total).find(|&j| !is_art[j] && tab.at(i, j).abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    // phase 2
    let mut c2 = vec![0.0; total];
    c2[..n_struct].copy_from_slice(&cost);
    tab.price(&c2);
    let allowed: Vec<bool> = is_art.iter().map(|a| !a).collect();
    tab.bland = false;
    tab.degenerate_run = 0;
    match tab.run(&allowed) {
        Step::Optimal => {}
        Step::Unbounded => {
            return Ok(fail(
                LpStatus::Unbounded,
                "objective unbounded below".into(),
                tab.iterations,
            ));
        }
        Step::Limit => {
            return Ok(fail(
                LpStatus::Failed,
                "pivot limit in phase 2".into(),
                tab.iterations,
            ));
        }
    }

    let mut col_val = vec![0.0; total];
    for i in 0..m {
        col_val[tab.basis[i]] = tab.rhs(i);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift(c, o) => o + col_val[c],
            VarMap::Mirror(c, o) => o - col_val[c],
            VarMap::Split(p, q) => col_val[p] - col_val[q],
        })
        .collect();
    let residual = lp.residual(&x);
    let objective = lp.objective(&x);
    let tol = 1e-6 * scale;
    if !(residual <= tol) || !objective.is_finite() {
        let mut f = fail(
            LpStatus::Failed,
            format!("residual {residual:e} exceeds {tol:e}"),
            tab.iterations,
        );
        f.x = x;
        f.residual = residual;
        return Ok(f);
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        x,
        iterations: tab.iterations,
        residual,
        message: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", -3.0, 0.0, f64::INFINITY);
        let y = lp.add_var("y", -5.0, 0.0, f64::INFINITY);
        lp.add_row("a", vec![(x, 1.0)], Sense::Le, 4.0);
        lp.add_row("b", vec![(y, 2.0)], Sense::Le, 12.0);
        lp.add_row("c", vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equality_rows() {
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 1.0, 0.0, f64::INFINITY);
        let y = lp.add_var("y", 2.0, 0.0, f64::INFINITY);
        lp.add_row("e1", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 2.0);
        lp.add_row("e2", vec![(x, 2.0), (y, 2.0)], Sense::Eq, 4.0);
        lp.add_row("g", vec![(y, 1.0)], Sense::Ge, 0.5);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", 1.0, 0.0, 1.0);
        lp.add_row("c", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", -1.0, 0.0, f64::INFINITY);
        lp.add_row("c", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn mirrored_and_free_variables() {
        // min -x + y with x <= 2 (no lower bound), y free, y >= x - 5, x >= -10
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", -1.0, f64::NEG_INFINITY, 2.0);
        let y = lp.add_var("y", 1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row("link", vec![(y, 1.0), (x, -1.0)], Sense::Ge, -5.0);
        lp.add_row("floor", vec![(x, 1.0)], Sense::Ge, -10.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 5.0).abs() < 1e-9);
    }

    #[test]
    fn lp_text_round_trip() {
        let mut lp = LinearProgram::default();
        let x = lp.add_var("x", -3.0, 0.0, 4.0);
        let y = lp.add_var("y", -5.0, 0.0, f64::INFINITY);
        let z = lp.add_var("z", 0.5, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row("b", vec![(y, 2.0)], Sense::Le, 12.0);
        lp.add_row("c", vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        lp.add_row("d", vec![(z, 1.0), (x, -1.0)], Sense::Eq, 0.25);
        lp.objective_offset = 7.0;
        let text = lp.to_lp_text();
        let back = LinearProgram::from_lp_text(&text).unwrap();
        assert_eq!(back.to_lp_text(), text);
        let (a, b) = (solve(&lp).unwrap(), solve(&back).unwrap());
        assert!((a.objective - b.objective).abs() < 1e-9);
    }
}
