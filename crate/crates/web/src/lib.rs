//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Everything crossing the boundary is a number, a byte buffer or a JSON
//! string, so the same functions are testable natively.

use hyperperc::cluster::explore_cluster_in;
use hyperperc::plane::build_inclined_basis;
use hyperperc::stats::{estimate_decay_curve, model_select, DEFAULT_AIC_MARGIN};
use hyperperc::{FieldView, HyperplaneField, LatticeBox, ParamVector};
use serde_json::json;
use wasm_bindgen::prelude::*;

const CLOSED: u8 = 0;
const OPEN: u8 = 1;
const IN_CLUSTER: u8 = 2;

fn three_planes(p12: f64, p13: f64, p23: f64) -> Result<ParamVector, String> {
    ParamVector::from_ranked(3, 2, vec![p12, p13, p23]).map_err(|e| e.to_string())
}

/// Horizontal slice `x_3 = level` of an `n = 3, k = 2` field over
/// `[-half, half]^2`, row-major with `x_1` as the row. Sites of the origin
/// cluster (explored inside `[-half, half]^3`) are marked `2`.
#[wasm_bindgen]
pub fn field_slice(seed: u32, p12: f64, p13: f64, p23: f64, half: u32, level: i32) -> Vec<u8> {
    let Ok(params) = three_planes(p12, p13, p23) else {
        return Vec::new();
    };
    let field = HyperplaneField::new(seed as u64, params);
    let view = FieldView::full(&field);
    let h = half as i64;
    let side = (2 * h + 1) as usize;
    let mut cells = vec![CLOSED; side * side];
    for (r, x1) in (-h..=h).enumerate() {
        for (c, x2) in (-h..=h).enumerate() {
            if view.is_open(&[x1, x2, level as i64]) {
                cells[r * side + c] = OPEN;
            }
        }
    }
    let cluster = explore_cluster_in(&view, &LatticeBox::centered(3, half as u64), 2_000_000);
    for s in cluster.sites.iter().filter(|s| s[2] == level as i64) {
        let (r, c) = ((s[0] + h) as usize, (s[1] + h) as usize);
        cells[r * side + c] = IN_CLUSTER;
    }
    cells
}

/// Size of the origin cluster in `[-half, half]^3` and whether it reaches
/// the boundary, as JSON.
#[wasm_bindgen]
pub fn cluster_summary(seed: u32, p12: f64, p13: f64, p23: f64, half: u32) -> String {
    let params = match three_planes(p12, p13, p23) {
        Ok(p) => p,
        Err(e) => return json!({ "error": e }).to_string(),
    };
    let field = HyperplaneField::new(seed as u64, params.clone());
    let view = FieldView::full(&field);
    let c = explore_cluster_in(&view, &LatticeBox::centered(3, half as u64), 2_000_000);
    json!({
        "sites": c.sites.len(),
        "touches_boundary": c.touched_boundary,
        "complete": c.frontier_exhausted,
        "open_probability": params.open_probability(),
    })
    .to_string()
}

/// Decay curve of `[o ↔ ∂B(K)]` (or the truncated event with `M = 4K`)
/// for `K = 1..=k_max`, with both fits and the model-selection verdict.
#[wasm_bindgen]
pub fn decay_report(seed: u32, p12: f64, p13: f64, p23: f64, trials: u32, k_max: u32, truncated: bool) -> String {
    let params = match three_planes(p12, p13, p23) {
        Ok(p) => p,
        Err(e) => return json!({ "error": e }).to_string(),
    };
    let ks: Vec<u64> = (1..=k_max.max(1) as u64).collect();
    let trunc = truncated.then_some(4);
    match estimate_decay_curve(&params, &ks, trials.max(1) as u64, seed as u64, trunc, 1) {
        Ok(curve) => {
            let selection = model_select(&curve, DEFAULT_AIC_MARGIN);
            json!({ "curve": curve, "selection": selection }).to_string()
        }
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Inclined basis of `Z^n` with its separation constant.
#[wasm_bindgen]
pub fn basis_report(n: u32) -> String {
    match build_inclined_basis(n as usize) {
        Ok(b) => json!({
            "n": b.n,
            "w1": b.w1,
            "w2": b.w2,
            "radius": b.radius,
            "inner_product": b.inner_product(),
            "separation": b.separation.to_string(),
        })
        .to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}
