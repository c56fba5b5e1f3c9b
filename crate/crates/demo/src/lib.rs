//! WebAssembly bindings for the browser demo in `www/`. Every export takes
//! and returns JSON strings; errors surface as thrown JS strings.

use rieszlab::energy::wint_monte_carlo;
use rieszlab::generators::{sample, ProcessModel, Seed};
use rieszlab::onedim::{free_energy_scan, geometric_grid, ScanOptions};
use rieszlab::{Kernel, Window};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn parse<T: serde::de::DeserializeOwned>(what: &str, doc: &str) -> Result<T, String> {
    serde_json::from_str(doc).map_err(|e| format!("{what}: {e}"))
}

/// Points of one replica of `model` in the centred cube of side `side`,
/// as `{d, side, coords}` with coordinates flattened point by point.
pub fn sample_points(model: &str, side: f64, seed: u64) -> Result<String, String> {
    let model: ProcessModel = parse("model", model)?;
    let window = Window::centered(model.dim(), side).map_err(|e| e.to_string())?;
    let config = sample(&model, &window, Seed::new(seed, 0)).map_err(|e| e.to_string())?;
    Ok(json!({ "d": model.dim(), "side": side, "coords": config.coords() }).to_string())
}

/// Monte Carlo energy ladder and its extrapolation.
pub fn energy_ladder(model: &str, kernel: &str, r_list: &[f64], n_replicas: usize, seed: u64) -> Result<String, String> {
    let model: ProcessModel = parse("model", model)?;
    let kernel: Kernel = parse("kernel", kernel)?;
    let report = wint_monte_carlo(&model, &kernel, r_list, n_replicas, seed).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Free-energy scan over the Gamma renewal family on a half-octave grid
/// from 1/16 to 64.
pub fn free_energy(beta: f64, kernel: &str) -> Result<String, String> {
    let kernel: Kernel = parse("kernel", kernel)?;
    let scan = free_energy_scan(beta, &kernel, &geometric_grid(-4, 12, 2), &ScanOptions::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&scan).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = samplePoints)]
pub fn sample_points_js(model: &str, side: f64, seed: u32) -> Result<String, JsValue> {
    sample_points(model, side, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = energyLadder)]
pub fn energy_ladder_js(model: &str, kernel: &str, r_list: Vec<f64>, n_replicas: u32, seed: u32) -> Result<String, JsValue> {
    energy_ladder(model, kernel, &r_list, n_replicas as usize, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = freeEnergy)]
pub fn free_energy_js(beta: f64, kernel: &str) -> Result<String, JsValue> {
    free_energy(beta, kernel).map_err(|e| JsValue::from_str(&e))
}
