//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain numbers or strings and returns a JSON string.
//! The work happens in the `*_json` functions, which are ordinary Rust and
//! are what the native tests call.

use nalgebra::DVector;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use psdxc::bounds::{counting_capacity, polygon_bound, xc01_lower_bound, BoundReport};
use psdxc::pipeline::unbalanced;
use psdxc::polytope::{build_slack, builtin_instance, Instance};
use psdxc::psdfact::diagonal_embed;
use psdxc::rescaler::{john_decompose, rescale, RescaleConfig};

/// Most points accepted from a page.
pub const MAX_POINTS: usize = 400;
/// Largest instance dimension offered for rescaling.
pub const MAX_RESCALE_DIM: usize = 4;
pub const MAX_CURVE_POINTS: usize = 512;

#[derive(Debug, Serialize)]
pub struct Ellipse {
    pub k: usize,
    /// Rows of the `2 × k` ellipsoid map.
    pub t: Vec<Vec<f64>>,
    pub contacts: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub identity_residual: f64,
}

/// John ellipse of the symmetric hull of `xy = [x0, y0, x1, y1, …]`.
pub fn john_ellipse_json(xy: &[f64]) -> Result<String, String> {
    if xy.len() % 2 != 0 {
        return Err("coordinates must come in (x, y) pairs".into());
    }
    if xy.len() / 2 > MAX_POINTS {
        return Err(format!("at most {MAX_POINTS} points"));
    }
    let pts: Vec<DVector<f64>> = xy
        .chunks_exact(2)
        .map(|c| DVector::from_column_slice(c))
        .collect();
    let j = john_decompose(&pts, 1e-9).map_err(|e| e.to_string())?;
    let out = Ellipse {
        k: j.k,
        identity_residual: j.identity_residual(),
        t: j.t.clone(),
        contacts: j.contact_points.iter().map(|z| [z[0], z[1]]).collect(),
        weights: j.weights,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub phi: f64,
    pub lmax_u: f64,
    pub lmax_v: f64,
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub instance: String,
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    /// `√(dΔ)`.
    pub target: f64,
    pub certificate: bool,
    pub termination: String,
    pub points: Vec<TrajectoryPoint>,
}

/// Rescales the diagonal factorization of a built-in instance after an
/// ill-conditioned congruence and returns the potential per iteration.
pub fn rescale_trajectory_json(instance: &str, n: usize, seed: u64) -> Result<String, String> {
    let inst = Instance::ALL
        .iter()
        .copied()
        .find(|i| i.name() == instance && i.is_01())
        .ok_or_else(|| format!("unknown instance `{instance}`"))?;
    if n == 0 || n > MAX_RESCALE_DIM {
        return Err(format!("n must lie in 1..={MAX_RESCALE_DIM}"));
    }
    let (h, v) = builtin_instance(inst, n).map_err(|e| e.to_string())?;
    let s = build_slack(&h, &v).map_err(|e| e.to_string())?;
    let f = unbalanced(&diagonal_embed(&s)).map_err(|e| e.to_string())?;
    let cfg = RescaleConfig {
        seed,
        ..RescaleConfig::default()
    };
    let res = rescale(&f, &s, &cfg).map_err(|e| e.to_string())?;
    let out = Trajectory {
        instance: inst.name().to_string(),
        n,
        d: res.d,
        delta: res.delta_eff,
        target: (res.d as f64 * res.delta_eff).sqrt(),
        certificate: res.certificate,
        termination: format!("{:?}", res.termination),
        points: res
            .trajectory
            .iter()
            .map(|p| TrajectoryPoint {
                iteration: p.iteration,
                phi: p.phi,
                lmax_u: p.lmax_u,
                lmax_v: p.lmax_v,
            })
            .collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub x: u32,
    pub log2: f64,
    /// Second series where the formula has one (the left side of `counting`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_log2: Option<f64>,
}

/// `formula ∈ {xc01, counting, polygon}` evaluated at `from..=to`; `param`
/// is `R` for `counting` and ignored otherwise.
pub fn bound_curve_json(formula: &str, from: u32, to: u32, param: f64) -> Result<String, String> {
    if from > to || (to - from) as usize >= MAX_CURVE_POINTS {
        return Err(format!("need from ≤ to with at most {MAX_CURVE_POINTS} points"));
    }
    let eval = |x: u32| -> Result<BoundReport, String> {
        match formula {
            "xc01" => xc01_lower_bound(x),
            "counting" => counting_capacity(x, param),
            "polygon" => polygon_bound(x),
            other => return Err(format!("unknown formula `{other}`")),
        }
        .map_err(|e| e.to_string())
    };
    let points = (from..=to)
        .map(|x| {
            let r = eval(x)?;
            Ok(CurvePoint {
                x,
                log2: r.log2_value,
                other_log2: r.extras.get("left_log2").copied(),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn john_ellipse(xy: &[f64]) -> Result<String, JsError> {
    john_ellipse_json(xy).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rescale_trajectory(instance: &str, n: usize, seed: u64) -> Result<String, JsError> {
    rescale_trajectory_json(instance, n, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bound_curve(formula: &str, from: u32, to: u32, param: f64) -> Result<String, JsError> {
    bound_curve_json(formula, from, to, param).map_err(|e| JsError::new(&e))
}
