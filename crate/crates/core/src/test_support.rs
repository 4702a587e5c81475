//! Small hand-built networks shared by unit tests.

use crate::grid_model::{Bus, Line, Network, Unit, UnitKind, Urbanization, VoltageLevel};

/// PCC plus one load bus on a 1 kV / 1 MVA base, so ohms equal per unit.
pub(crate) fn two_bus_with(r: f64, x: f64, i_max_ka: f64) -> Network {
    let bus = |id: &str, pcc| Bus {
        id: id.into(),
        voltage_level: VoltageLevel::LV,
        base_kv: 1.0,
        v_min_pu: 0.9,
        v_max_pu: 1.1,
        is_pcc: pcc,
    };
    Network {
        id: "2bus".into(),
        urbanization: Urbanization::Rural,
        base_mva: 1.0,
        buses: vec![bus("pcc", true), bus("b2", false)],
        lines: vec![Line {
            id: "l1".into(),
            from_bus: "pcc".into(),
            to_bus: "b2".into(),
            length_km: 1.0,
            type_id: "small".into(),
            r_ohm_per_km: r,
            x_ohm_per_km: x,
            i_max_ka,
            parallel_count: 1,
        }],
        transformers: vec![],
        units: vec![Unit {
            id: "load".into(),
            bus: "b2".into(),
            kind: UnitKind::Load,
            p_min_mw: -10.0,
            p_max_mw: 0.0,
            q_min_mvar: -10.0,
            q_max_mvar: 10.0,
            technology: String::new(),
            child_fpr_ref: None,
            equivalent: None,
        }],
    }
}
