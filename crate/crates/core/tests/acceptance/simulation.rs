//! Simulations of the compiled cam and biped models.

use std::collections::HashMap;

use coredel::explicit::RangeBox;
use coredel::sim::{SimState, Simulator};
use coredel::{corpus, pipeline};

use crate::numeric::var;

pub const CAM_DT: f64 = 1e-4;
pub const CAM_END: f64 = 5.0;
const CAM_TOLERANCE: f64 = 1e-3;

/// Criterion 9: along the trajectory, the emitted `v` is the derivative of
/// the emitted `x`, and `a` that of `v`.
pub fn cam(dt: f64, end: f64) -> Result<String, String> {
    let m = pipeline::compile("cam.cdl", corpus::CAM, &RangeBox::new()).map_err(|e| e.to_string())?;
    let sim = Simulator::new(&m).map_err(|e| e.to_string())?;
    let init: HashMap<_, _> = [(var("t"), 0.0), (var("t'"), 1.0)].into();
    let start = SimState::from_map(&m, 0.0, &init).map_err(|e| e.to_string())?;
    let tr = sim.run(&start, dt, end).map_err(|e| e.to_string())?;

    let slot = |name: &str| m.aux.iter().position(|(x, _)| *x == var(name)).ok_or_else(|| format!("no aux `{name}`"));
    let (xs, vs, as_) = (slot("x")?, slot("v")?, slot("a")?);
    let aux: Vec<Vec<f64>> = tr.rows.iter().map(|s| sim.aux(s)).collect();
    let mut worst_v: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for k in 1..aux.len() - 1 {
        let dx = (aux[k + 1][xs] - aux[k - 1][xs]) / (2.0 * dt);
        let dv = (aux[k + 1][vs] - aux[k - 1][vs]) / (2.0 * dt);
        worst_v = worst_v.max((aux[k][vs] - dx).abs());
        worst_a = worst_a.max((aux[k][as_] - dv).abs());
        if worst_v > CAM_TOLERANCE || worst_a > CAM_TOLERANCE {
            let time = tr.rows[k].time;
            return Err(format!("at t = {time}: v = {}, dx/dt = {dx}; a = {}, dv/dt = {dv}", aux[k][vs], aux[k][as_]));
        }
    }
    Ok(format!("{} steps, max |v - dx/dt| = {worst_v:.1e}, max |a - dv/dt| = {worst_a:.1e}", tr.rows.len() - 1))
}

/// The documented biped start: stance leg slightly behind vertical, swing
/// leg further back and moving.
pub const BIPED_INIT: [(&str, f64); 4] = [("t1", -0.1), ("t1'", 0.0), ("t2", -0.4), ("t2'", -0.5)];
pub const BIPED_DT: f64 = 1e-3;
pub const BIPED_END: f64 = 5.0;

/// Criterion 10.
pub fn biped() -> Result<String, String> {
    let m = pipeline::compile("biped.cdl", corpus::BIPED, &RangeBox::new()).map_err(|e| e.to_string())?;
    if m.events.is_empty() {
        return Err("the compiled biped has no events".into());
    }
    let init: HashMap<_, _> = BIPED_INIT.iter().map(|(n, v)| (var(n), *v)).collect();
    let start = SimState::from_map(&m, 0.0, &init).map_err(|e| e.to_string())?;
    let tr = coredel::sim::simulate(&m, &start, BIPED_DT, BIPED_END).map_err(|e| e.to_string())?;
    if tr.events.is_empty() {
        return Err(format!("no event in {BIPED_END} s"));
    }
    let largest = tr.rows.iter().flat_map(|s| s.values.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    if !largest.is_finite() {
        return Err("a state became non-finite".into());
    }
    Ok(format!("{} events in {BIPED_END} s (first at t = {:.3}), largest |state| {largest:.2}", tr.events.len(), tr.events[0]))
}
