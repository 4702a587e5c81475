//! Randomized supply-task scenarios on a fixed topology.
//!
//! For each draw, total load and total generation capacity are split over
//! every non-PCC bus with independent uniform weights, then scaled by each
//! configured scale factor. Buses without a unit of a kind receive a
//! zero-capacity placeholder unit (see [`with_candidate_units`]) so that
//! every candidate bus can host both kinds.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{Network, Unit, UnitKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_random_draws: usize,
    pub scale_factors: Vec<f64>,
    pub master_seed: u64,
    pub technology_mix: BTreeMap<String, f64>,
    /// Reactive band is derived from the active range at this power factor.
    pub power_factor: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_random_draws: 4,
            scale_factors: vec![1.0, 1.25, 1.5, 2.0, 3.0],
            master_seed: 42,
            technology_mix: BTreeMap::from([("pv".to_string(), 1.0)]),
            power_factor: 0.9,
        }
    }
}

impl ScenarioConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_random_draws < 1 {
            return Err(Error::Invalid("n_random_draws must be at least 1".into()));
        }
        if self.scale_factors.first() != Some(&1.0) {
            return Err(Error::Invalid("scale_factors must start at 1.0".into()));
        }
        if self.scale_factors.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid(
                "scale_factors must be strictly increasing".into(),
            ));
        }
        let total: f64 = self.technology_mix.values().sum();
        if self.technology_mix.values().any(|s| *s < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(
                "technology shares must be non-negative and sum to 1".into(),
            ));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(Error::Invalid("power_factor must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitOverride {
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub q_min_mvar: f64,
    pub q_max_mvar: f64,
    pub technology: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplyTaskScenario {
    pub scenario_id: u64,
    pub seed: u64,
    pub scale_factor: f64,
    pub unit_overrides: BTreeMap<String, UnitOverride>,
}

impl SupplyTaskScenario {
    /// The unmodified supply task.
    pub fn identity(scenario_id: u64) -> Self {
        SupplyTaskScenario {
            scenario_id,
            seed: 0,
            scale_factor: 1.0,
            unit_overrides: BTreeMap::new(),
        }
    }
}

/// Seed of one (draw, scale) cell, mixed from the master seed.
pub fn derive_seed(master_seed: u64, draw: u64, scale_index: u64) -> u64 {
    let mut z = master_seed;
    for part in [draw, scale_index] {
        z = splitmix64(z ^ splitmix64(part.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    z
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn placeholder_id(kind: UnitKind, bus: &str) -> String {
    match kind {
        UnitKind::Load => format!("{bus}.load"),
        _ => format!("{bus}.gen"),
    }
}

/// Adds zero-capacity load/generator units at every non-PCC bus missing one.
/// Idempotent.
pub fn with_candidate_units(network: &Network) -> Network {
    let mut out = network.clone();
    for bus in network.buses.iter().filter(|b| !b.is_pcc) {
        for kind in [UnitKind::Load, UnitKind::Generator] {
            let present = out.units.iter().any(|u| u.bus == bus.id && u.kind == kind);
            let id = placeholder_id(kind, &bus.id);
            if !present && out.unit(&id).is_none() {
                out.units.push(Unit {
                    id,
                    bus: bus.id.clone(),
                    kind,
                    p_min_mw: 0.0,
                    p_max_mw: 0.0,
                    q_min_mvar: 0.0,
                    q_max_mvar: 0.0,
                    technology: String::new(),
                    child_fpr_ref: None,
                    equivalent: None,
                });
            }
        }
    }
    out
}

fn totals(network: &Network, kind: UnitKind) -> (f64, f64) {
    network
        .units
        .iter()
        .filter(|u| u.kind == kind)
        .fold((0.0, 0.0), |(lo, hi), u| (lo + u.p_min_mw, hi + u.p_max_mw))
}

fn sample_technology(rng: &mut ChaCha8Rng, mix: &BTreeMap<String, f64>) -> String {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (tech, share) in mix {
        acc += share;
        if x < acc {
            return tech.clone();
        }
    }
    mix.keys().next_back().cloned().unwrap_or_default()
}

/// Generates `n_random_draws x |scale_factors|` scenarios, draw-major.
pub fn generate(network: &Network, cfg: &ScenarioConfig) -> Result<Vec<SupplyTaskScenario>> {
    cfg.check()?;
    let has_units = network
        .units
        .iter()
        .any(|u| matches!(u.kind, UnitKind::Load | UnitKind::Generator));
    if !has_units {
        return Err(Error::Invalid(format!(
            "network {} has no loads or generators to redistribute",
            network.id
        )));
    }
    let prepared = with_candidate_units(network);
    let candidates: Vec<&str> = prepared
        .buses
        .iter()
        .filter(|b| !b.is_pcc)
        .map(|b| b.id.as_str())
        .collect();
    if candidates.is_empty() {
        return Err(Error::Invalid(format!(
            "network {} has no candidate buses",
            network.id
        )));
    }
    let tan_phi = (1.0 / (cfg.power_factor * cfg.power_factor) - 1.0)
        .max(0.0)
        .sqrt();

    let mut out = Vec::with_capacity(cfg.n_random_draws * cfg.scale_factors.len());
    for draw in 0..cfg.n_random_draws {
        for (si, &scale) in cfg.scale_factors.iter().enumerate() {
            let seed = derive_seed(cfg.master_seed, draw as u64, si as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut overrides = BTreeMap::new();

            for kind in [UnitKind::Load, UnitKind::Generator] {
                let (lo, hi) = totals(&prepared, kind);
                let weights: Vec<f64> = candidates.iter().map(|_| rng.gen::<f64>()).collect();
                let wsum: f64 = weights.iter().sum();
                for (bus, w) in candidates.iter().zip(&weights) {
                    let share = if wsum > 0.0 {
                        w / wsum
                    } else {
                        1.0 / candidates.len() as f64
                    };
                    let at_bus: Vec<&Unit> = prepared
                        .units
                        .iter()
                        .filter(|u| u.kind == kind && u.bus == *bus)
                        .collect();
                    let split = share * scale / at_bus.len() as f64;
                    for u in at_bus {
                        let (p_min, p_max) = (lo * split, hi * split);
                        let q = tan_phi * p_min.abs().max(p_max.abs());
                        let technology = match kind {
                            UnitKind::Generator if !cfg.technology_mix.is_empty() => {
                                sample_technology(&mut rng, &cfg.technology_mix)
                            }
                            _ => u.technology.clone(),
                        };
                        overrides.insert(
                            u.id.clone(),
                            UnitOverride {
                                p_min_mw: p_min,
                                p_max_mw: p_max,
                                q_min_mvar: -q,
                                q_max_mvar: q,
                                technology,
                            },
                        );
                    }
                }
            }

            out.push(SupplyTaskScenario {
                scenario_id: (draw * cfg.scale_factors.len() + si) as u64,
                seed,
                scale_factor: scale,
                unit_overrides: overrides,
            });
        }
    }
    Ok(out)
}

/// Returns a copy of the network with the scenario's unit ranges applied.
/// Topology, lines and transformers are untouched.
pub fn apply(network: &Network, scenario: &SupplyTaskScenario) -> Result<Network> {
    let mut out = if scenario.unit_overrides.is_empty() {
        network.clone()
    } else {
        with_candidate_units(network)
    };
    for (id, o) in &scenario.unit_overrides {
        let unit = out
            .units
            .iter_mut()
            .find(|u| &u.id == id)
            .ok_or_else(|| Error::Invalid(format!("scenario overrides unknown unit {id}")))?;
        if unit.kind == UnitKind::Load && o.p_max_mw > 0.0 {
            return Err(Error::Invalid(format!("override makes load {id} inject")));
        }
        unit.p_min_mw = o.p_min_mw;
        unit.p_max_mw = o.p_max_mw;
        unit.q_min_mvar = o.q_min_mvar;
        unit.q_max_mvar = o.q_max_mvar;
        unit.technology = o.technology.clone();
    }
    Ok(out)
}

pub fn to_json(scenarios: &[SupplyTaskScenario]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(scenarios)?;
    s.push('\n');
    Ok(s)
}
