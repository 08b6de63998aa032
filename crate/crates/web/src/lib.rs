//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON string;
//! the `*_json` functions hold the logic so they can be tested natively.

use serde_json::{json, Value};
use triphoton::design::{fom_all, ideal_tritter, measured_tritter, TargetSpec};
use triphoton::distinguishability::{
    delay_limits, hom_curve as hom_scan, threefold_curve as threefold_scan, two_photon_limits,
    visibility_three, visibility_two, DelayReference,
};
use triphoton::formats::parse_matrix_json;
use triphoton::tomography::predict_visibilities;
use triphoton::{PhotonConfiguration, TransferMatrix};
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 4001;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `preset` is "ideal", "measured" or "custom" (then `custom_json` is a
/// matrix file's contents).
pub fn matrix_for(preset: &str, custom_json: &str) -> Result<TransferMatrix, String> {
    match preset {
        "ideal" => Ok(ideal_tritter()),
        "measured" => Ok(measured_tritter()),
        "custom" => parse_matrix_json(custom_json).map_err(text),
        other => Err(format!("unknown preset {other:?}")),
    }
}

fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err("delay grid needs start <= stop and a positive step".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n + 1 > MAX_POINTS {
        return Err(format!("delay grid has more than {MAX_POINTS} points"));
    }
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

fn label(mode: usize) -> Result<usize, String> {
    mode.checked_sub(1)
        .ok_or_else(|| "modes are numbered from 1".to_string())
}

/// HOM curve with the photon in `j` delayed; modes are 1-based.
#[allow(clippy::too_many_arguments)]
pub fn hom_curve_json(
    preset: &str,
    custom_json: &str,
    i: usize,
    j: usize,
    l: usize,
    m: usize,
    start: f64,
    stop: f64,
    step: f64,
    sigma: f64,
) -> Result<String, String> {
    let matrix = matrix_for(preset, custom_json)?;
    let inputs = (label(i)?, label(j)?);
    let outputs = (label(l)?, label(m)?);
    let scan =
        hom_scan(&matrix, inputs, outputs, &grid(start, stop, step)?, sigma).map_err(text)?;
    let (c_inf, c0) = two_photon_limits(&matrix, inputs, outputs).map_err(text)?;
    Ok(json!({
        "delays": scan.delays(),
        "values": scan.values(),
        "c_inf": c_inf,
        "c_zero": c0,
        "visibility": visibility_two(c_inf, c0).ok(),
    })
    .to_string())
}

/// Three-photon curve for inputs and outputs 1, 2, 3 with `delayed` (1-based)
/// delayed.
pub fn threefold_curve_json(
    preset: &str,
    custom_json: &str,
    delayed: usize,
    start: f64,
    stop: f64,
    step: f64,
    sigma: f64,
) -> Result<String, String> {
    let matrix = matrix_for(preset, custom_json)?;
    let delayed = label(delayed)?;
    let scan = threefold_scan(
        &matrix,
        [0, 1, 2],
        [0, 1, 2],
        delayed,
        &grid(start, stop, step)?,
        sigma,
    )
    .map_err(text)?;
    let all = PhotonConfiguration::new([0, 1, 2]).map_err(text)?;
    let (c_mix, c0) =
        delay_limits(&matrix, &all, &all, DelayReference::DelayedInput(delayed)).map_err(text)?;
    let (c_all, _) =
        delay_limits(&matrix, &all, &all, DelayReference::AllDistinguishable).map_err(text)?;
    Ok(json!({
        "delays": scan.delays(),
        "values": scan.values(),
        "c_zero": c0,
        "c_inf_delayed": c_mix,
        "c_inf_all": c_all,
        "visibility_delayed": visibility_three(c_mix, c0).ok(),
        "visibility_all": visibility_three(c_all, c0).ok(),
    })
    .to_string())
}

/// Nine two-photon visibilities and the figure of merit against the ideal
/// tritter.
pub fn predict_json(preset: &str, custom_json: &str) -> Result<String, String> {
    let matrix = matrix_for(preset, custom_json)?;
    let records = predict_visibilities(&matrix).map_err(text)?;
    let visibilities: Vec<Value> = records
        .iter()
        .map(|r| {
            let (i, j, l, m) = r.key.labels();
            json!({ "i": i, "j": j, "l": l, "m": m, "V": r.value })
        })
        .collect();
    let fom = if matrix.rows() == 3 && matrix.cols() == 3 {
        let (per, overall) = fom_all(&matrix, &TargetSpec::tritter()).map_err(text)?;
        json!({ "per_input": per, "overall": overall })
    } else {
        Value::Null
    };
    Ok(json!({ "visibilities": visibilities, "fom": fom }).to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn hom_curve(
    preset: &str,
    custom_json: &str,
    i: usize,
    j: usize,
    l: usize,
    m: usize,
    start: f64,
    stop: f64,
    step: f64,
    sigma: f64,
) -> Result<String, JsValue> {
    js(hom_curve_json(
        preset,
        custom_json,
        i,
        j,
        l,
        m,
        start,
        stop,
        step,
        sigma,
    ))
}

#[wasm_bindgen]
pub fn threefold_curve(
    preset: &str,
    custom_json: &str,
    delayed: usize,
    start: f64,
    stop: f64,
    step: f64,
    sigma: f64,
) -> Result<String, JsValue> {
    js(threefold_curve_json(
        preset,
        custom_json,
        delayed,
        start,
        stop,
        step,
        sigma,
    ))
}

#[wasm_bindgen]
pub fn predict(preset: &str, custom_json: &str) -> Result<String, JsValue> {
    js(predict_json(preset, custom_json))
}
