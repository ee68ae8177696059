//! wasm-bindgen entry points for the static demo in `www/`.
//!
//! Every function returns a JSON string so the page needs no glue beyond
//! `JSON.parse`. The `*_json` functions are plain Rust and are what the
//! native tests exercise.

use serde_json::json;
use wasm_bindgen::prelude::*;

use fsmwt_core::capacity::{continuous_capacity, Argmax, ContinuousModel};
use fsmwt_core::channels::{bsc, degraded_from, GaussianSpec};
use fsmwt_core::markov::StateChain;
use fsmwt_core::region::trace_degraded_region;

fn model(feedback: bool) -> ContinuousModel {
    if feedback {
        ContinuousModel::GaussianFeedback
    } else {
        ContinuousModel::Gaussian
    }
}

fn two_state_gaussian(sigma2_g: f64, sigma2_b: f64, sigma2_w: f64, p0: f64) -> GaussianSpec {
    GaussianSpec {
        sigma2: vec![sigma2_g, sigma2_b],
        sigma2_w,
        p0,
    }
}

/// Capacity for `d = 0..=d_max` plus the `d -> inf` limit.
#[allow(clippy::too_many_arguments)]
pub fn capacity_curve_json(
    u: f64,
    c: f64,
    sigma2_g: f64,
    sigma2_b: f64,
    sigma2_w: f64,
    p0: f64,
    d_max: u32,
    feedback: bool,
) -> Result<String, String> {
    let spec = two_state_gaussian(sigma2_g, sigma2_b, sigma2_w, p0);
    spec.validate().map_err(|e| e.to_string())?;
    let spec = spec.as_fading();
    let chain = StateChain::two_state(u, c).map_err(|e| e.to_string())?;
    let at = |d: Option<u64>| {
        continuous_capacity(&spec, model(feedback), &chain, d)
            .map(|r| r.value)
            .map_err(|e| e.to_string())
    };
    let values = (0..=u64::from(d_max)).map(|d| at(Some(d))).collect::<Result<Vec<_>, _>>()?;
    Ok(json!({ "values": values, "limit": at(None)? }).to_string())
}

/// Optimal power per delayed state and the resulting capacity.
#[allow(clippy::too_many_arguments)]
pub fn power_allocation_json(
    u: f64,
    c: f64,
    sigma2_g: f64,
    sigma2_b: f64,
    sigma2_w: f64,
    p0: f64,
    d: u32,
    feedback: bool,
) -> Result<String, String> {
    let spec = two_state_gaussian(sigma2_g, sigma2_b, sigma2_w, p0);
    spec.validate().map_err(|e| e.to_string())?;
    let chain = StateChain::two_state(u, c).map_err(|e| e.to_string())?;
    let r = continuous_capacity(&spec.as_fading(), model(feedback), &chain, Some(u64::from(d)))
        .map_err(|e| e.to_string())?;
    let power = match r.argmax {
        Argmax::Power(p) => p.p,
        Argmax::Input(_) => Vec::new(),
    };
    Ok(json!({ "value": r.value, "power": power, "pi": chain.pi(), "flags": r.flags }).to_string())
}

/// Boundary of the degraded region for a binary channel whose main
/// crossover is `p_g` or `p_b` by state, with the eavesdropper behind a
/// further BSC(`q`).
#[allow(clippy::too_many_arguments)]
pub fn region_json(
    p_g: f64,
    p_b: f64,
    q: f64,
    u: f64,
    c: f64,
    d: u32,
    feedback: bool,
    points: u32,
) -> Result<String, String> {
    for (name, p) in [("p_G", p_g), ("p_B", p_b), ("q", q)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("{name}={p} must lie in [0,1]"));
        }
    }
    let ch = degraded_from(&[bsc(p_g), bsc(p_b)], &bsc(q)).map_err(|e| e.to_string())?;
    let chain = StateChain::two_state(u, c).map_err(|e| e.to_string())?;
    let b = trace_degraded_region(&ch, &chain, u64::from(d), feedback, points as usize).map_err(|e| e.to_string())?;
    let r: Vec<f64> = b.points.iter().map(|p| p.r).collect();
    let re: Vec<f64> = b.points.iter().map(|p| p.re).collect();
    Ok(json!({ "r": r, "re": re, "r_max": b.r_max, "secrecy_capacity": b.secrecy_capacity }).to_string())
}

fn js<T>(r: Result<T, String>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn capacity_curve(
    u: f64,
    c: f64,
    sigma2_g: f64,
    sigma2_b: f64,
    sigma2_w: f64,
    p0: f64,
    d_max: u32,
    feedback: bool,
) -> Result<String, JsValue> {
    js(capacity_curve_json(u, c, sigma2_g, sigma2_b, sigma2_w, p0, d_max, feedback))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn power_allocation(
    u: f64,
    c: f64,
    sigma2_g: f64,
    sigma2_b: f64,
    sigma2_w: f64,
    p0: f64,
    d: u32,
    feedback: bool,
) -> Result<String, JsValue> {
    js(power_allocation_json(u, c, sigma2_g, sigma2_b, sigma2_w, p0, d, feedback))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn region(p_g: f64, p_b: f64, q: f64, u: f64, c: f64, d: u32, feedback: bool, points: u32) -> Result<String, JsValue> {
    js(region_json(p_g, p_b, q, u, c, d, feedback, points))
}
