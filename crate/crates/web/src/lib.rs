//! Browser bindings. Each export takes plain strings and numbers and returns
//! a JSON document; errors come back as thrown strings.

use ldpc_bounds::bounds::{bec_de, bec_threshold, bhattacharyya_threshold, ms_upper_bound, sp_lower_bound};
use ldpc_bounds::density_evolution::DensityEvolution;
use ldpc_bounds::{ChannelModel, Ensemble, QuantizationParams};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

// Kept small so a browser tab stays responsive.
const DE_M_MAX: f64 = 25.0;
const MAX_ITERS: usize = 2000;

fn inputs(ensemble_json: &str, channel: &str) -> Result<(Ensemble, ChannelModel), String> {
    let ens = Ensemble::from_json(ensemble_json).map_err(|e| format!("ensemble: {e}"))?;
    let ch = channel.parse::<ChannelModel>().map_err(|e| format!("channel: {e}"))?;
    Ok((ens, ch))
}

fn iters_ok(iters: usize) -> Result<(), String> {
    if iters > MAX_ITERS {
        return Err(format!("at most {MAX_ITERS} iterations"));
    }
    Ok(())
}

/// Non-finite numbers have no JSON form; the page treats null as off-scale.
fn series(values: &[f64]) -> Value {
    values.iter().map(|&v| if v.is_finite() { json!(v) } else { Value::Null }).collect()
}

pub fn bound_trajectories(ensemble_json: &str, channel: &str, iters: usize, root_inclusive: bool) -> Result<String, String> {
    iters_ok(iters)?;
    let (ens, ch) = inputs(ensemble_json, channel)?;
    let e = |err: ldpc_bounds::Error| err.to_string();
    let mut traj = vec![
        ms_upper_bound(&ens, ch.bhattacharyya(), iters, root_inclusive).map_err(e)?,
        sp_lower_bound(&ens, ch.uncoded_error_prob(), iters).map_err(e)?,
    ];
    if let ChannelModel::Bec { eps } = ch {
        traj.push(bec_de(&ens, eps, iters).map_err(e)?);
    }
    let traj: Vec<Value> = traj
        .iter()
        .map(|t| json!({ "kind": t.kind, "values": series(&t.values), "vacuous_after": t.vacuous_after }))
        .collect();
    Ok(json!({
        "ensemble": ens.id(),
        "rate": ens.design_rate(),
        "channel": ch.to_string(),
        "bhattacharyya": ch.bhattacharyya(),
        "p0": ch.uncoded_error_prob(),
        "trajectories": traj,
    })
    .to_string())
}

/// Density evolution with error trajectories and the final
/// variable-to-check density (finite lattice points above `1e-12` only).
pub fn density_snapshot(ensemble_json: &str, channel: &str, iters: usize, delta: f64) -> Result<String, String> {
    iters_ok(iters)?;
    let (ens, ch) = inputs(ensemble_json, channel)?;
    let e = |err: ldpc_bounds::Error| err.to_string();
    let q = QuantizationParams::new(delta, DE_M_MAX).map_err(e)?;
    let mut de = DensityEvolution::new(&ens, &ch, q).map_err(e)?;
    let mut edge = vec![de.var_to_check().error_prob()];
    let mut node = vec![de.node_error_prob().map_err(e)?];
    for _ in 0..iters {
        de.step().map_err(e)?;
        edge.push(de.var_to_check().error_prob());
        node.push(de.node_error_prob().map_err(e)?);
    }
    let d = de.var_to_check();
    let (llr, mass): (Vec<f64>, Vec<f64>) = d
        .masses()
        .iter()
        .enumerate()
        .filter(|&(_, &m)| m > 1e-12)
        .map(|(i, &m)| (d.llr_at(i), m))
        .unzip();
    Ok(json!({
        "ensemble": ens.id(),
        "channel": ch.to_string(),
        "delta": d.delta(),
        "edge": series(&edge),
        "node": series(&node),
        "density": { "llr": llr, "mass": mass, "pos_inf": d.pos_inf(), "neg_inf": d.neg_inf() },
    })
    .to_string())
}

pub fn ensemble_thresholds(ensemble_json: &str, tol: f64) -> Result<String, String> {
    let ens = Ensemble::from_json(ensemble_json).map_err(|e| format!("ensemble: {e}"))?;
    if !(tol > 0.0) {
        return Err("tolerance must be positive".into());
    }
    let e = |err: ldpc_bounds::Error| err.to_string();
    let union = bhattacharyya_threshold(&ens, tol).map_err(e)?;
    let erasure = bec_threshold(&ens, tol).map_err(e)?;
    Ok(json!({
        "ensemble": ens.id(),
        "rate": ens.design_rate(),
        "bhattacharyya": union,
        "bec": erasure,
        "bec_capacity_limit": 1.0 - ens.design_rate(),
    })
    .to_string())
}

#[wasm_bindgen(js_name = boundTrajectories)]
pub fn bound_trajectories_js(ensemble_json: &str, channel: &str, iters: usize, root_inclusive: bool) -> Result<String, JsValue> {
    bound_trajectories(ensemble_json, channel, iters, root_inclusive).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = densitySnapshot)]
pub fn density_snapshot_js(ensemble_json: &str, channel: &str, iters: usize, delta: f64) -> Result<String, JsValue> {
    density_snapshot(ensemble_json, channel, iters, delta).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = ensembleThresholds)]
pub fn ensemble_thresholds_js(ensemble_json: &str, tol: f64) -> Result<String, JsValue> {
    ensemble_thresholds(ensemble_json, tol).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const E36: &str = r#"{"lambda": {"3": 1.0}, "rho": {"6": 1.0}}"#;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn erasure_channel_gets_three_curves() {
        let v = parse(&bound_trajectories(E36, "bec:0.4", 10, false).unwrap());
        let t = v["trajectories"].as_array().unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[2]["kind"], "BEC_DE");
        assert_eq!(t[0]["values"].as_array().unwrap().len(), 11);
        assert_eq!(v["rate"], 0.5);
        let bsc = parse(&bound_trajectories(E36, "bsc:0.05", 4, true).unwrap());
        assert_eq!(bsc["trajectories"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn overflowing_union_bound_becomes_null() {
        let v = parse(&bound_trajectories(E36, "bsc:0.4", 1200, false).unwrap());
        let ms = v["trajectories"][0]["values"].as_array().unwrap();
        assert!(ms.last().unwrap().is_null());
        assert_eq!(v["trajectories"][0]["vacuous_after"], 1);
    }

    #[test]
    fn snapshot_below_threshold_collapses_to_certainty() {
        let v = parse(&density_snapshot(E36, "bsc:0.03", 25, 0.1).unwrap());
        let edge = v["edge"].as_array().unwrap();
        assert_eq!(edge.len(), 26);
        assert!(edge[25].as_f64().unwrap() < 1e-9);
        let mass: f64 = v["density"]["mass"].as_array().unwrap().iter().map(|m| m.as_f64().unwrap()).sum();
        assert!((mass + v["density"]["pos_inf"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn snapshot_on_erasure_channel_uses_infinite_atoms() {
        let v = parse(&density_snapshot(E36, "bec:0.5", 10, 0.1).unwrap());
        assert!(v["density"]["pos_inf"].as_f64().unwrap() > 0.0);
        assert_eq!(v["density"]["llr"], json!([0.0]));
    }

    #[test]
    fn thresholds_of_the_rate_half_code() {
        let v = parse(&ensemble_thresholds(E36, 1e-4).unwrap());
        assert!((v["bhattacharyya"]["value"].as_f64().unwrap() - 0.04).abs() <= 1e-4);
        assert!((v["bec"]["value"].as_f64().unwrap() - 0.4294).abs() <= 1e-4);
        assert_eq!(v["bec_capacity_limit"], 0.5);
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(bound_trajectories("{", "bec:0.4", 3, false).unwrap_err().starts_with("ensemble"));
        assert!(bound_trajectories(E36, "bec:2", 3, false).unwrap_err().starts_with("channel"));
        assert!(density_snapshot(E36, "bsc:0.1", 3, -1.0).is_err());
        assert!(density_snapshot(E36, "bsc:0.1", 5000, 0.1).is_err());
        assert!(ensemble_thresholds(E36, 0.0).is_err());
    }
}
