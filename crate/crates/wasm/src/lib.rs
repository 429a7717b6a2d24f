//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every export takes and returns JSON strings; errors surface as JS
//! exceptions carrying the message.

pub mod demo;

use wasm_bindgen::prelude::*;

use demo::{CompareOptions, DemoInstance};

fn input(json: &str) -> Result<DemoInstance, String> {
    serde_json::from_str(json).map_err(|e| format!("bad instance: {e}"))
}

fn output<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

/// Comma-separated radii, e.g. `0,0.1,0.5`.
pub fn parse_omega(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad radius {s:?}")))
        .collect()
}

#[wasm_bindgen(js_name = exampleInstance)]
pub fn example_instance(seed: u32) -> Result<String, JsError> {
    output(demo::example(seed.into()))
}

#[wasm_bindgen(js_name = epsilonCurve)]
pub fn epsilon_curve(instance: &str, omega: &str) -> Result<String, JsError> {
    output(input(instance).and_then(|i| demo::epsilon_curve(&i, &parse_omega(omega)?)))
}

#[wasm_bindgen(js_name = worstCase)]
pub fn worst_case(instance: &str, epsilon: f64) -> Result<String, JsError> {
    output(input(instance).and_then(|i| demo::worst_case(&i, epsilon)))
}

#[wasm_bindgen]
pub fn compare(
    instance: &str,
    epsilon: f64,
    shift: u32,
    shift_fraction: f64,
    samples: u32,
    seed: u32,
) -> Result<String, JsError> {
    let opts = CompareOptions {
        epsilon,
        shift,
        shift_fraction,
        samples: samples as usize,
        seed: seed.into(),
    };
    output(input(instance).and_then(|i| demo::compare(&i, &opts)))
}
