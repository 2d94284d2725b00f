//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export takes and returns JSON strings. The `*_json` functions hold the
//! logic and run natively as well, so they are tested without a browser.

use serde::Serialize;
use serde_json::Value;
use wasm_bindgen::prelude::*;

use semistatic::cli::{run_price, run_validate, InstanceFile, Overrides};
use semistatic::divergence::UtilitySpec;
use semistatic::market::call_function;

#[derive(Serialize)]
struct CallCurves {
    strikes: Vec<f64>,
    /// One curve per maturity, sampled at `strikes`.
    calls: Vec<Vec<f64>>,
    validate: Value,
}

/// Sampled call curves `K -> E(S_i - K)^+` plus the validate report.
pub fn call_curves_json(instance: &str, samples: usize) -> Result<String, String> {
    let file = InstanceFile::parse(instance).map_err(|e| e.to_string())?;
    let sys = file.marginal_system().map_err(|e| e.to_string())?;
    let (lo, hi) = sys
        .marginals()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m.grid().min()), hi.max(m.grid().max())));
    let pad = 0.1 * (hi - lo).max(1.0);
    let n = samples.max(2);
    let strikes: Vec<f64> = (0..n).map(|k| lo - pad + (hi - lo + 2.0 * pad) * k as f64 / (n - 1) as f64).collect();
    let calls = sys.marginals().iter().map(|m| strikes.iter().map(|&k| call_function(m, k)).collect()).collect();
    let validate = serde_json::from_str(&run_validate(instance, &Overrides::default()).document).map_err(|e| e.to_string())?;
    serde_json::to_string(&CallCurves { strikes, calls, validate }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SweepPoint {
    risk_aversion: f64,
    code: i32,
    p_sell: Option<f64>,
    p_buy: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Sweep {
    mot_low: Option<f64>,
    mot_high: Option<f64>,
    points: Vec<SweepPoint>,
}

/// Seller and buyer indifference prices as the risk-aversion parameter varies.
/// The utility kind of the instance is kept; `a` or `kappa` is replaced.
pub fn price_sweep_json(instance: &str, risk_aversions: &[f64]) -> Result<String, String> {
    let mut file = InstanceFile::parse(instance).map_err(|e| e.to_string())?;
    let mut sweep = Sweep { mot_low: None, mot_high: None, points: Vec::with_capacity(risk_aversions.len()) };
    for &r in risk_aversions {
        file.utility = match file.utility {
            UtilitySpec::Exponential { .. } => UtilitySpec::Exponential { a: r },
            UtilitySpec::EntropicQuadratic { .. } => UtilitySpec::EntropicQuadratic { kappa: r },
        };
        let out = run_price(&file.to_json(), &Overrides::default());
        let v: Value = serde_json::from_str(&out.document).map_err(|e| e.to_string())?;
        if out.code == 0 {
            sweep.mot_low = v["mot_low"].as_f64();
            sweep.mot_high = v["mot_high"].as_f64();
        }
        sweep.points.push(SweepPoint {
            risk_aversion: r,
            code: out.code,
            p_sell: v["p_sell"].as_f64(),
            p_buy: v["p_buy"].as_f64(),
            error: v["message"].as_str().map(str::to_owned),
        });
    }
    serde_json::to_string(&sweep).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct UtilityCurve {
    x: Vec<f64>,
    u: Vec<f64>,
    y: Vec<f64>,
    v: Vec<f64>,
}

/// `U` on `[lo, hi]` and its conjugate `V` on the matching marginal-utility range.
pub fn utility_curve_json(utility: &str, lo: f64, hi: f64, samples: usize) -> Result<String, String> {
    let spec: UtilitySpec = serde_json::from_str(utility).map_err(|e| e.to_string())?;
    spec.validate().map_err(|e| e.to_string())?;
    if !(lo < hi) {
        return Err("need lo < hi".into());
    }
    let n = samples.max(2);
    let x: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let u = x.iter().map(|&t| spec.u(t)).collect();
    // y = U'(x) runs from U'(hi) to U'(lo)
    let (y0, y1) = (spec.u_prime(hi), spec.u_prime(lo));
    let y: Vec<f64> = (0..n).map(|k| y0 + (y1 - y0) * k as f64 / (n - 1) as f64).collect();
    let v = y.iter().map(|&t| spec.v(t)).collect();
    serde_json::to_string(&UtilityCurve { x, u, y, v }).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn call_curves(instance: &str, samples: usize) -> Result<String, JsError> {
    call_curves_json(instance, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn price_sweep(instance: &str, risk_aversions: Vec<f64>) -> Result<String, JsError> {
    price_sweep_json(instance, &risk_aversions).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn utility_curve(utility: &str, lo: f64, hi: f64, samples: usize) -> Result<String, JsError> {
    utility_curve_json(utility, lo, hi, samples).map_err(|e| JsError::new(&e))
}
