#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use fpr_core::grid_model::{load_network, EquipmentCatalog, Network};
use fpr_core::lp::{LinearProgram, Sense};
use fpr_core::power_flow::DispatchPoint;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn lv_catalog() -> EquipmentCatalog {
    EquipmentCatalog::load(fixture("catalog_lv.json")).unwrap()
}

pub fn mv_catalog() -> EquipmentCatalog {
    EquipmentCatalog::load(fixture("catalog_mv.json")).unwrap()
}

pub fn lv_feeder() -> Network {
    load_network(fixture("lv_feeder.json"), &lv_catalog()).unwrap()
}

pub fn two_bus() -> Network {
    load_network(fixture("two_bus.json"), &lv_catalog()).unwrap()
}

pub fn mv_grid() -> Network {
    load_network(fixture("mv_grid.json"), &mv_catalog()).unwrap()
}

/// Gauss-Seidel power flow built straight from the network data.
/// Returns complex bus voltages in network bus order.
pub fn gauss_seidel(net: &Network, dispatch: &DispatchPoint) -> Vec<Complex64> {
    let n = net.buses.len();
    let idx = |id: &str| net.buses.iter().position(|b| b.id == id).unwrap();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut stamp = |a: usize, b: usize, z: Complex64| {
        let yy = z.inv();
        y[a][a] += yy;
        y[b][b] += yy;
        y[a][b] -= yy;
        y[b][a] -= yy;
    };
    for l in &net.lines {
        let (a, b) = (idx(&l.from_bus), idx(&l.to_bus));
        let kv = net.buses[a].base_kv;
        let z_base = kv * kv / net.base_mva;
        let z = Complex64::new(l.r_ohm_per_km, l.x_ohm_per_km) * l.length_km
            / l.parallel_count as f64
            / z_base;
        stamp(a, b, z);
    }
    for t in &net.transformers {
        let x = t.vk_percent / 100.0 * net.base_mva / (t.s_rated_mva * t.parallel_count as f64);
        stamp(idx(&t.hv_bus), idx(&t.lv_bus), Complex64::new(0.0, x));
    }
    let mut s = vec![Complex64::new(0.0, 0.0); n];
    for u in &net.units {
        let sp = dispatch.setpoints[&u.id];
        s[idx(&u.bus)] += Complex64::new(sp.p_mw, sp.q_mvar) / net.base_mva;
    }
    let slack = net.buses.iter().position(|b| b.is_pcc).unwrap();
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..1_000_000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if i == slack {
                continue;
            }
            let mut acc = s[i].conj() / v[i].conj();
            for k in 0..n {
                if k != i {
                    acc -= y[i][k] * v[k];
                }
            }
            let new = acc / y[i][i];
            delta = delta.max((new - v[i]).norm());
            v[i] = new;
        }
        if delta < 1e-13 {
            break;
        }
    }
    v
}

/// Minimum of a bounded LP by enumerating every basic solution.
/// Bounds must be finite. Returns None when no vertex is feasible.
pub fn enumerate_vertices(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    // every constraint as a.x <= b; an equality becomes a pair, so
    // redundant equality rows need no special care
    let mut ineq: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        match r.sense {
            Sense::Le => ineq.push((a, r.rhs)),
            Sense::Ge => ineq.push((a.iter().map(|v| -v).collect(), -r.rhs)),
            Sense::Eq => {
                ineq.push((a.iter().map(|v| -v).collect(), -r.rhs));
                ineq.push((a, r.rhs));
            }
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ineq.push((e.clone(), lp.upper[j]));
        e[j] = -1.0;
        ineq.push((e, -lp.lower[j]));
    }
    let need = n;
    let feasible = |x: &[f64]| lp.residual(x) <= 1e-9;
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..need).collect();
    loop {
        let rows: Vec<&(Vec<f64>, f64)> = pick.iter().map(|&i| &ineq[i]).collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i].0[j]);
        let b = DVector::from_fn(n, |i, _| rows[i].1);
        if let Some(x) = a.clone().lu().solve(&b) {
            let resid = (&a * &x - &b).amax();
            let x: Vec<f64> = x.iter().copied().collect();
            if resid < 1e-9 && x.iter().all(|v| v.is_finite()) && feasible(&x) {
                let obj = lp.objective(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let m = ineq.len();
        let mut i = need;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - need + i {
                pick[i] += 1;
                for k in i + 1..need {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Result of the grid search, with the affine map into the unit square.
pub struct GridFit {
    pub a: f64,
    pub b: f64,
    x0: f64,
    y0: f64,
    rx: f64,
    ry: f64,
}

impl GridFit {
    /// A line in original units expressed in the normalized coordinates.
    pub fn normalized(&self, a: f64, b: f64) -> (f64, f64) {
        (a * self.rx / self.ry, (b + a * self.x0 - self.y0) / self.ry)
    }
}

/// Best nonnegative-slope line on a regular grid of the given step over the
/// data mapped into the unit square.
pub fn grid_search_line(x: &[f64], y: &[f64], step: f64) -> GridFit {
    let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, y0) = (lo(x), lo(y));
    let rx = (hi(x) - x0).max(1e-12);
    let ry = (hi(y) - y0).max(1e-12);
    let xn: Vec<f64> = x.iter().map(|v| (v - x0) / rx).collect();
    let yn: Vec<f64> = y.iter().map(|v| (v - y0) / ry).collect();
    let sse = |a: f64, b: f64| -> f64 {
        xn.iter()
            .zip(&yn)
            .map(|(xi, yi)| (yi - a * xi - b).powi(2))
            .sum()
    };
    let (mut best, mut arg) = (f64::INFINITY, (0.0, 0.0));
    let na = (4.0 / step).round() as i64;
    let (b_lo, b_hi) = ((-4.0 / step).round() as i64, (1.0 / step).round() as i64);
    for i in 0..=na {
        let a = i as f64 * step;
        for k in b_lo..=b_hi {
            let b = k as f64 * step;
            let e = sse(a, b);
            if e < best {
                best = e;
                arg = (a, b);
            }
        }
    }
    let a = arg.0 * ry / rx;
    GridFit {
        a,
        b: y0 + ry * arg.1 - a * x0,
        x0,
        y0,
        rx,
        ry,
    }
}

/// Remote-bus voltage of a two-bus system with slack at 1 pu and a load
/// consuming P + jQ through z = R + jX (high-voltage root).
pub fn two_bus_voltage(r: f64, x: f64, p: f64, q: f64) -> f64 {
    let b = 1.0 - 2.0 * (p * r + q * x);
    let c = (r * r + x * x) * (p * p + q * q);
    ((b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt()
}

/// Limit checks computed from Gauss-Seidel voltages. Returns a description
/// of every violation beyond `rel_tol`.
pub fn independent_violations(
    net: &Network,
    dispatch: &DispatchPoint,
    rel_tol: f64,
) -> Vec<String> {
    let v = gauss_seidel(net, dispatch);
    let idx = |id: &str| net.buses.iter().position(|b| b.id == id).unwrap();
    let mut out = Vec::new();
    for (b, vb) in net.buses.iter().zip(&v) {
        let m = vb.norm();
        if m < b.v_min_pu - rel_tol || m > b.v_max_pu + rel_tol {
            out.push(format!("bus {} at {m:.6} pu", b.id));
        }
    }
    let mut branch = |id: &str, a: usize, b: usize, z: Complex64, rating: f64| {
        let i = (v[a] - v[b]) / z;
        let s_from = (v[a] * i.conj()).norm() * net.base_mva;
        let s_to = (v[b] * i.conj()).norm() * net.base_mva;
        let loading = s_from.max(s_to) / rating;
        if loading > 1.0 + rel_tol {
            out.push(format!("{id} loaded {:.4}%", 100.0 * loading));
        }
    };
    for l in &net.lines {
        let (a, b) = (idx(&l.from_bus), idx(&l.to_bus));
        let kv = net.buses[a].base_kv;
        let z = Complex64::new(l.r_ohm_per_km, l.x_ohm_per_km) * l.length_km
            / l.parallel_count as f64
            / (kv * kv / net.base_mva);
        let rating = 3f64.sqrt() * kv * l.i_max_ka * l.parallel_count as f64;
        branch(&l.id, a, b, z, rating);
    }
    for t in &net.transformers {
        let rating = t.s_rated_mva * t.parallel_count as f64;
        let z = Complex64::new(0.0, t.vk_percent / 100.0 * net.base_mva / rating);
        branch(&t.id, idx(&t.hv_bus), idx(&t.lv_bus), z, rating);
    }
    out
}

/// Uniform random dispatch inside every unit's box.
pub fn random_dispatch(net: &Network, rng: &mut impl rand::Rng) -> DispatchPoint {
    let mut d = DispatchPoint::default();
    for u in &net.units {
        let p = u.p_min_mw + rng.gen::<f64>() * (u.p_max_mw - u.p_min_mw);
        let q = u.q_min_mvar + rng.gen::<f64>() * (u.q_max_mvar - u.q_min_mvar);
        d.set(&u.id, p, q);
    }
    d
}

/// Random bounded LP with `n` variables and `m` rows; feasible by
/// construction around a random interior point.
pub fn random_lp(rng: &mut impl rand::Rng, n: usize, m: usize) -> LinearProgram {
    let mut lp = LinearProgram::default();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..4.5)).collect();
    for j in 0..n {
        let c = rng.gen_range(-5.0..5.0);
        let lo = if rng.gen_bool(0.3) {
            rng.gen_range(-3.0..0.0)
        } else {
            0.0
        };
        lp.add_var(&format!("x{j}"), c, lo, rng.gen_range(5.0..10.0));
    }
    for i in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let a = rng.gen_range(-3.0f64..3.0).round();
            if rng.gen_bool(0.7) && a != 0.0 {
                coeffs.push((j, a));
            }
        }
        if coeffs.is_empty() {
            coeffs.push((i % n, 1.0));
        }
        let ax: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let (sense, rhs) = match rng.gen_range(0..5) {
            0 => (Sense::Eq, ax),
            1 | 2 => (Sense::Le, ax + rng.gen_range(0.0..3.0)),
            _ => (Sense::Ge, ax - rng.gen_range(0.0..3.0)),
        };
        lp.add_row(&format!("r{i}"), coeffs, sense, rhs);
    }
    lp
}
