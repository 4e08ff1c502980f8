//! Browser bindings for the mixed solver: Cook's membrane deformation,
//! beam convergence errors and the patch rank test.

use dualpress::analysis::{
    evaluate_at, patch_rank_test, run_beam, solve_cook, BeamConfig, BeamParams, CookConfig, Discretization,
};
use dualpress::fespace::Enrichment;
use wasm_bindgen::prelude::*;

fn js_err(e: dualpress::FemError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn discretization(mixed: bool) -> Discretization {
    if mixed {
        Discretization::Mixed
    } else {
        Discretization::Standard
    }
}

/// Deformed Cook mesh, flattened for drawing.
#[wasm_bindgen]
pub struct CookResult {
    n: usize,
    positions: Vec<f64>,
    displacements: Vec<f64>,
    pressure: Vec<f64>,
    tip: f64,
}

#[wasm_bindgen]
impl CookResult {
    /// Elements per edge.
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Vertex coordinates `x0, y0, x1, y1, …`, vertex `j (n+1) + i`.
    pub fn positions(&self) -> Vec<f64> {
        self.positions.clone()
    }

    pub fn displacements(&self) -> Vec<f64> {
        self.displacements.clone()
    }

    /// Dual-cell pressure per vertex (empty for the standard method).
    pub fn pressure(&self) -> Vec<f64> {
        self.pressure.clone()
    }

    /// Vertical displacement of the top-right corner.
    #[wasm_bindgen(getter)]
    pub fn tip(&self) -> f64 {
        self.tip
    }
}

pub fn cook(n: usize, poisson: f64, mixed: bool) -> Result<CookResult, dualpress::FemError> {
    let cfg = CookConfig {
        poisson,
        discretization: discretization(mixed),
        ..CookConfig::default()
    };
    let (mesh, dofmap, sol) = solve_cook(&cfg, n)?;
    let mut positions = Vec::with_capacity(2 * mesh.n_vertices());
    let mut displacements = Vec::with_capacity(2 * mesh.n_vertices());
    for (v, x) in mesh.vertices().iter().enumerate() {
        positions.extend_from_slice(&x[..2]);
        displacements.push(sol.u[dofmap.vertex_dof(v, 0)]);
        displacements.push(sol.u[dofmap.vertex_dof(v, 1)]);
    }
    let tip = evaluate_at(&mesh, &dofmap, &sol.u, &cfg.tip.point())?[1];
    Ok(CookResult {
        n,
        positions,
        displacements,
        pressure: sol.p,
        tip,
    })
}

/// Solve Cook's membrane with `n` elements per edge.
#[wasm_bindgen(js_name = solveCook)]
pub fn solve_cook_js(n: usize, poisson: f64, mixed: bool) -> Result<CookResult, JsValue> {
    if !(1..=64).contains(&n) {
        return Err(JsValue::from_str("n must be between 1 and 64"));
    }
    cook(n, poisson, mixed).map_err(js_err)
}

/// Beam errors per level as rows `h, ‖e_u‖₀, ‖e_u‖₁, ‖e_p‖₀`.
pub fn beam_errors(levels: usize, poisson: f64, mixed: bool) -> Result<Vec<f64>, dualpress::FemError> {
    let cfg = BeamConfig {
        params: BeamParams {
            poisson,
            ..BeamParams::default()
        },
        levels,
        discretization: discretization(mixed),
        ..BeamConfig::default()
    };
    let report = run_beam(&cfg)?;
    let mut out = Vec::new();
    for l in &report.levels {
        let e = l.errors.expect("beam levels carry errors");
        out.extend_from_slice(&[l.h, e.u_l2, e.u_h1, e.p_l2]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = beamErrors)]
pub fn beam_errors_js(levels: usize, poisson: f64, mixed: bool) -> Result<Vec<f64>, JsValue> {
    if !(2..=5).contains(&levels) {
        return Err(JsValue::from_str("levels must be between 2 and 5"));
    }
    beam_errors(levels, poisson, mixed).map_err(js_err)
}

/// Patch test: `[rank, kernel dimension, pressures, velocities]`.
pub fn patch_rank(dim: usize, enrichment: &str) -> Result<Vec<usize>, dualpress::FemError> {
    let e = match enrichment {
        "gradient" => Enrichment::GradientWeighted,
        "bubble" => Enrichment::PlainBubble,
        "scalar" => Enrichment::ScalarGradient,
        "none" => Enrichment::None,
        other => return Err(dualpress::FemError::InvalidInput(format!("unknown enrichment {other:?}"))),
    };
    let r = patch_rank_test(dim, e)?;
    Ok(vec![r.rank, r.kernel_dim, r.n_pressure, r.n_velocity])
}

#[wasm_bindgen(js_name = patchRank)]
pub fn patch_rank_js(dim: usize, enrichment: &str) -> Result<Vec<usize>, JsValue> {
    patch_rank(dim, enrichment).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cook_result_shapes() {
        let r = cook(4, 0.49999, true).unwrap();
        assert_eq!(r.positions.len(), 50);
        assert_eq!(r.displacements.len(), 50);
        assert_eq!(r.pressure.len(), 25);
        assert!(r.tip > 0.0);
    }

    #[test]
    fn patch_rank_strings() {
        assert_eq!(patch_rank(2, "gradient").unwrap()[..2], [8, 1]);
        assert!(patch_rank(2, "nope").is_err());
    }

    #[test]
    fn beam_rows() {
        let rows = beam_errors(2, 0.3, true).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows[6] < rows[2]);
    }
}
