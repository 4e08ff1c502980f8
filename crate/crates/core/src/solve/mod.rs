//! Linear solvers for the mixed system.
//!
//! Two routes are provided and cross-checked in tests:
//! - [`condense_and_solve`] eliminates the pressure with the diagonal `C` and
//!   solves the SPD system `(A + λ Bᵀ C⁻¹ B) u = f + λ Bᵀ C⁻¹ g`.
//! - [`solve_saddle`] keeps the block structure and runs preconditioned CG on
//!   the pressure Schur complement `B A⁻¹ Bᵀ + C/λ`, which also covers λ = ∞.

pub mod cg;
pub mod cholesky;
pub mod sparse;

use crate::assembly::{MaterialParams, SystemMatrices};
use crate::error::{FemError, Result};
use cg::pcg;
use cholesky::EnvelopeCholesky;
use sparse::{norm, CsrMatrix};

/// Systems up to this size use the direct factorization under [`LinearMethod::Auto`].
pub const DIRECT_SOLVE_LIMIT: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Elasticity,
    Stokes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    Auto,
    Direct,
    Cg,
}

/// How the zero-mean pressure condition is imposed when constants are in
/// the kernel of `Bᵀ` (closed Dirichlet boundary, Stokes limit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanConstraint {
    /// Keep iterates and residuals in the `C`-weighted zero-mean subspace.
    Projection,
    /// Fix pressure dof 0, solve, then shift to zero mean.
    PinAndShift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: LinearMethod,
    pub mean: MeanConstraint,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 20_000,
            method: LinearMethod::Auto,
            mean: MeanConstraint::Projection,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub method: &'static str,
    pub iterations: usize,
    /// Relative residual of the full block system.
    pub residual: f64,
    /// Part of the pressure right-hand side removed to make a Stokes
    /// problem compatible (zero for elasticity).
    pub incompatibility: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub mode: Mode,
    pub diagnostics: SolverDiagnostics,
}

/// Solve an SPD system by envelope Cholesky or Jacobi-CG.
pub fn solve_spd(k: &CsrMatrix, rhs: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, &'static str, usize)> {
    let direct = match opts.method {
        LinearMethod::Direct => true,
        LinearMethod::Cg => false,
        LinearMethod::Auto => k.nrows() <= DIRECT_SOLVE_LIMIT,
    };
    if direct {
        let fac = EnvelopeCholesky::factor(k)?;
        Ok((fac.solve(rhs)?, "cholesky", 0))
    } else {
        let (x, rep) = cg::cg_jacobi(k, rhs, opts.tol, opts.max_iter)?;
        Ok((x, "cg-jacobi", rep.iterations))
    }
}

/// Relative residual `‖[A u + Bᵀp − f; B u − C p/λ − g]‖ / ‖[f; g]‖`.
pub fn block_residual(system: &SystemMatrices, params: &MaterialParams, u: &[f64], p: &[f64]) -> Result<f64> {
    let au = system.a.matvec(u)?;
    let btp = system.b.transpose_matvec(p)?;
    let bu = system.b.matvec(u)?;
    let il = params.inv_lambda();
    let mut r2 = 0.0;
    for i in 0..u.len() {
        r2 += (au[i] + btp[i] - system.f[i]).powi(2);
    }
    for i in 0..p.len() {
        r2 += (bu[i] - il * system.c[i] * p[i] - system.g[i]).powi(2);
    }
    let scale = (norm(&system.f).powi(2) + norm(&system.g).powi(2)).sqrt();
    Ok(if scale > 0.0 { r2.sqrt() / scale } else { r2.sqrt() })
}

/// Pressure-condensed SPD solve. Pressure is recovered as
/// `p_i = λ/|V_i| ∫_{V_i} div u_h`.
pub fn condense_and_solve(system: &SystemMatrices, params: &MaterialParams, opts: &SolveOptions) -> Result<Solution> {
    if params.is_stokes() {
        return Err(FemError::InvalidInput(
            "pressure condensation needs a finite λ; use solve_saddle for Stokes".into(),
        ));
    }
    let lambda = params.lambda;
    let inv_c: Vec<f64> = system.c.iter().map(|c| 1.0 / c).collect();
    let mut rhs = system.f.clone();
    let k = if lambda == 0.0 {
        system.a.clone()
    } else {
        let penalty = system.b.gram_weighted(&inv_c)?;
        let cg: Vec<f64> = system.g.iter().zip(&inv_c).map(|(g, ic)| lambda * g * ic).collect();
        for (r, e) in rhs.iter_mut().zip(system.b.transpose_matvec(&cg)?) {
            *r += e;
        }
        system.a.add_scaled(lambda, &penalty)?
    };
    let (u, method, iterations) = solve_spd(&k, &rhs, opts)?;
    let bu = system.b_full.matvec(&u)?;
    let p: Vec<f64> = bu.iter().zip(&inv_c).map(|(b, ic)| lambda * ic * b).collect();
    let residual = block_residual(system, params, &u, &p)?;
    Ok(Solution {
        u,
        p,
        mode: Mode::Elasticity,
        diagnostics: SolverDiagnostics {
            method,
            iterations,
            residual,
            incompatibility: 0.0,
        },
    })
}

/// True when the constant pressure lies in the kernel of `Bᵀ` (no free dof
/// touches the boundary).
fn constants_in_kernel(b: &CsrMatrix) -> Result<bool> {
    let ones = vec![1.0; b.nrows()];
    let s = b.transpose_matvec(&ones)?;
    let m = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(m <= 1e-9 * b.max_abs())
}

/// Block saddle-point solve via the pressure Schur complement.
pub fn solve_saddle(system: &SystemMatrices, params: &MaterialParams, opts: &SolveOptions) -> Result<Solution> {
    let a = EnvelopeCholesky::factor(&system.a)?;
    let il = params.inv_lambda();
    let b = &system.b;
    let c = &system.c;
    let np = c.len();
    let volume: f64 = c.iter().sum();

    let a_inv_f = a.solve(&system.f)?;
    let mut rhs = b.matvec(&a_inv_f)?;
    for (r, g) in rhs.iter_mut().zip(&system.g) {
        *r -= g;
    }

    let schur = |p: &[f64]| -> Result<Vec<f64>> {
        let w = a.solve(&b.transpose_matvec(p)?)?;
        let mut y = b.matvec(&w)?;
        for i in 0..np {
            y[i] += il * c[i] * p[i];
        }
        Ok(y)
    };
    let pscale = 1.0 / (0.5 / params.mu + il);
    let precond = |r: &[f64]| -> Vec<f64> { r.iter().zip(c).map(|(ri, ci)| pscale * ri / ci).collect() };

    let kernel = constants_in_kernel(b)?;
    let mode = if params.is_stokes() { Mode::Stokes } else { Mode::Elasticity };
    let mut incompatibility = 0.0;
    let (p, iterations) = if kernel {
        let total: f64 = rhs.iter().sum();
        let alpha = if mode == Mode::Stokes {
            incompatibility = total.abs() / norm(&rhs).max(f64::MIN_POSITIVE);
            0.0
        } else {
            total / (il * volume)
        };
        let project_res = |r: &mut [f64]| {
            let s: f64 = r.iter().sum();
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= s * ci / volume;
            }
        };
        let mut r0 = rhs.clone();
        project_res(&mut r0);
        let (mut p, iters) = match opts.mean {
            MeanConstraint::Projection => {
                let (p, rep) = pcg(&schur, &precond, &r0, None, opts.tol, opts.max_iter, Some(&project_res))?;
                (p, rep.iterations)
            }
            MeanConstraint::PinAndShift => {
                let pinned = |p: &[f64]| -> Result<Vec<f64>> {
                    let mut q = p.to_vec();
                    q[0] = 0.0;
                    let mut y = schur(&q)?;
                    y[0] = 0.0;
                    Ok(y)
                };
                let pin_pre = |r: &[f64]| -> Vec<f64> {
                    let mut z = precond(r);
                    z[0] = 0.0;
                    z
                };
                let mut r = r0.clone();
                r[0] = 0.0;
                let (mut p, rep) = pcg(pinned, pin_pre, &r, None, opts.tol, opts.max_iter, None)?;
                p[0] = 0.0;
                let mean: f64 = p.iter().zip(c).map(|(pi, ci)| pi * ci).sum::<f64>() / volume;
                for pi in p.iter_mut() {
                    *pi -= mean;
                }
                (p, rep.iterations)
            }
        };
        for pi in p.iter_mut() {
            *pi += alpha;
        }
        (p, iters)
    } else {
        let (p, rep) = pcg(&schur, &precond, &rhs, None, opts.tol, opts.max_iter, None)?;
        (p, rep.iterations)
    };

    let btp = b.transpose_matvec(&p)?;
    let rhs_u: Vec<f64> = system.f.iter().zip(&btp).map(|(f, x)| f - x).collect();
    let u = a.solve(&rhs_u)?;
    let residual = block_residual(system, params, &u, &p)?;
    Ok(Solution {
        u,
        p,
        mode,
        diagnostics: SolverDiagnostics {
            method: "schur-pcg",
            iterations,
            residual,
            incompatibility,
        },
    })
}

/// Solve the displacement-only system `K u = f` (standard method).
pub fn solve_displacement(k: &CsrMatrix, f: &[f64], opts: &SolveOptions) -> Result<Solution> {
    let (u, method, iterations) = solve_spd(k, f, opts)?;
    let ku = k.matvec(&u)?;
    let r: Vec<f64> = ku.iter().zip(f).map(|(a, b)| a - b).collect();
    let scale = norm(f);
    Ok(Solution {
        u,
        p: Vec::new(),
        mode: Mode::Elasticity,
        diagnostics: SolverDiagnostics {
            method,
            iterations,
            residual: if scale > 0.0 { norm(&r) / scale } else { norm(&r) },
            incompatibility: 0.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{apply_dirichlet, assemble_system, Traction};
    use crate::fespace::{build_dofmap, Enrichment};
    use crate::mesh::{build_dual, generate_rect_grid};
    use rand::{Rng, SeedableRng};

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm(&d) / norm(a).max(f64::MIN_POSITIVE)
    }

    /// Unit square grid, clamped left edge, shear on the right edge.
    fn cantilever(nx: usize, ny: usize, params: &MaterialParams) -> SystemMatrices {
        let mut mesh = generate_rect_grid(&[2.0, 1.0], &[nx, ny]).unwrap();
        let left = mesh
            .boundary_vertices()
            .iter()
            .copied()
            .filter(|&v| mesh.vertices()[v][0] == 0.0)
            .collect();
        mesh.set_dirichlet_vertices(left);
        let dual = build_dual(&mesh).unwrap();
        let dm = build_dofmap(&mesh, &dual, Enrichment::GradientWeighted);
        let tr = [Traction::constant("xmax", [0.0, -1.0, 0.0])];
        let sys = assemble_system(&mesh, &dual, &dm, params, None, &tr).unwrap();
        apply_dirichlet(sys, &dm, &vec![0.0; dm.n_velocity()]).unwrap()
    }

    /// Closed box with a rotating body force and affine boundary data.
    fn closed_box(params: &MaterialParams) -> SystemMatrices {
        let mesh = generate_rect_grid(&[1.0, 1.0], &[6, 6]).unwrap();
        let dual = build_dual(&mesh).unwrap();
        let dm = build_dofmap(&mesh, &dual, Enrichment::GradientWeighted);
        let force = |x: &crate::Point| [x[1] - 0.5, 0.5 - x[0], 0.0];
        let sys = assemble_system(&mesh, &dual, &dm, params, Some(&force), &[]).unwrap();
        let mut vals = vec![0.0; dm.n_velocity()];
        for &v in mesh.dirichlet_vertices() {
            let x = mesh.vertices()[v];
            vals[dm.vertex_dof(v, 0)] = 0.1 * x[1];
            vals[dm.vertex_dof(v, 1)] = 0.05 * x[0] * x[0];
        }
        apply_dirichlet(sys, &dm, &vals).unwrap()
    }

    #[test]
    fn condensed_and_saddle_agree() {
        let params = MaterialParams::from_young_poisson(1500.0, 0.4999).unwrap();
        let sys = cantilever(4, 2, &params);
        let opts = SolveOptions::default();
        let a = condense_and_solve(&sys, &params, &opts).unwrap();
        let b = solve_saddle(&sys, &params, &opts).unwrap();
        assert!(rel_diff(&a.u, &b.u) < 1e-8);
        assert!(rel_diff(&a.p, &b.p) < 1e-8);
        assert!(a.diagnostics.residual < 1e-10 && b.diagnostics.residual < 1e-10);
    }

    #[test]
    fn closed_box_elasticity_agrees_with_saddle() {
        let params = MaterialParams::from_lame(1e4, 1.0).unwrap();
        let sys = closed_box(&params);
        let opts = SolveOptions::default();
        let a = condense_and_solve(&sys, &params, &opts).unwrap();
        let b = solve_saddle(&sys, &params, &opts).unwrap();
        assert!(rel_diff(&a.u, &b.u) < 1e-8);
        assert!(rel_diff(&a.p, &b.p) < 1e-8);
    }

    #[test]
    fn zero_lambda_gives_zero_pressure() {
        let params = MaterialParams::from_lame(0.0, 1.0).unwrap();
        let sys = cantilever(4, 2, &params);
        let s = condense_and_solve(&sys, &params, &SolveOptions::default()).unwrap();
        assert!(s.p.iter().all(|&p| p == 0.0));
        let direct = EnvelopeCholesky::factor(&sys.a).unwrap().solve(&sys.f).unwrap();
        assert!(rel_diff(&direct, &s.u) < 1e-13);
    }

    #[test]
    fn stokes_pressure_has_zero_mean_both_ways() {
        let params = MaterialParams::stokes(1.0).unwrap();
        let sys = closed_box(&params);
        assert!(condense_and_solve(&sys, &params, &SolveOptions::default()).is_err());
        let mut sols = Vec::new();
        for mean in [MeanConstraint::Projection, MeanConstraint::PinAndShift] {
            let s = solve_saddle(
                &sys,
                &params,
                &SolveOptions {
                    mean,
                    ..SolveOptions::default()
                },
            )
            .unwrap();
            assert_eq!(s.mode, Mode::Stokes);
            let m: f64 = s.p.iter().zip(&sys.c).map(|(p, c)| p * c).sum();
            let scale = s.p.iter().fold(0.0f64, |a, p| a.max(p.abs()));
            assert!(m.abs() <= 1e-12 * scale.max(1.0));
            assert!(s.diagnostics.residual < 1e-9);
            sols.push(s);
        }
        assert!(rel_diff(&sols[0].u, &sols[1].u) < 1e-8);
        assert!(rel_diff(&sols[0].p, &sols[1].p) < 1e-8);
    }

    #[test]
    fn penalty_only_adds_energy() {
        let params = MaterialParams::from_young_poisson(1.0, 0.45).unwrap();
        let sys = cantilever(3, 3, &params);
        let inv_c: Vec<f64> = sys.c.iter().map(|c| 1.0 / c).collect();
        let k = sys
            .a
            .add_scaled(params.lambda, &sys.b.gram_weighted(&inv_c).unwrap())
            .unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let u: Vec<f64> = (0..k.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ek = sparse::dot(&u, &k.matvec(&u).unwrap());
            let ea = sparse::dot(&u, &sys.a.matvec(&u).unwrap());
            assert!(ek >= ea * (1.0 - 1e-14));
        }
    }

    #[test]
    fn discrete_constraint_residual_is_small() {
        let params = MaterialParams::from_young_poisson(1.0, 0.49).unwrap();
        let sys = cantilever(4, 4, &params);
        let s = condense_and_solve(&sys, &params, &SolveOptions::default()).unwrap();
        let bu = sys.b.matvec(&s.u).unwrap();
        let r: Vec<f64> = (0..bu.len())
            .map(|i| bu[i] - sys.c[i] * s.p[i] / params.lambda - sys.g[i])
            .collect();
        assert!(norm(&r) <= 1e-10 * norm(&bu).max(1e-300) + 1e-14);
    }

    #[test]
    fn cg_route_matches_direct() {
        let params = MaterialParams::from_young_poisson(1.0, 0.3).unwrap();
        let sys = cantilever(6, 3, &params);
        let d = condense_and_solve(&sys, &params, &SolveOptions::default()).unwrap();
        let c = condense_and_solve(
            &sys,
            &params,
            &SolveOptions {
                method: LinearMethod::Cg,
                tol: 1e-12,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(c.diagnostics.method, "cg-jacobi");
        assert!(rel_diff(&d.u, &c.u) < 1e-8);
    }

    #[test]
    fn lambda_sweep_saturates() {
        let norms: Vec<f64> = [1e3, 1e5, 1e7, 1e8, 1e9]
            .iter()
            .map(|&lambda| {
                let params = MaterialParams::from_lame(lambda, 1.0).unwrap();
                let sys = cantilever(4, 2, &params);
                let s = condense_and_solve(&sys, &params, &SolveOptions::default()).unwrap();
                let pn: f64 = s.p.iter().zip(&sys.c).map(|(p, c)| c * p * p).sum::<f64>().sqrt();
                norm(&s.u) + pn
            })
            .collect();
        let top = (norms[4] - norms[3]).abs() / norms[4];
        assert!(top < 0.01, "{norms:?}");
        assert!(norms.iter().all(|n| n.is_finite() && *n > 0.0));
    }
}
