//! Preconditioned conjugate gradients over closures.

use super::sparse::{axpy, dot, norm, CsrMatrix};
use crate::error::{FemError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve `A x = b` for SPD `A` given as a closure, with preconditioner
/// application `precond(r) ≈ A⁻¹ r`. Stops when `‖r‖ ≤ tol ‖b‖`.
///
/// The optional `project` hook is applied to every residual; it lets callers
/// run CG on an invariant subspace (for instance zero-mean pressures).
pub fn pcg<A, M>(
    apply: A,
    precond: M,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<(Vec<f64>, CgReport)>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let ax = apply(&x)?;
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    if let Some(p) = project {
        p(&mut r);
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bnorm;
    let mut it = 0;
    while res > tol {
        if it == max_iter {
            return Err(FemError::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::Singular(format!(
                "CG breakdown: pᵀAp = {pap:e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if let Some(proj) = project {
            proj(&mut r);
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        res = norm(&r) / bnorm;
        it += 1;
    }
    Ok((
        x,
        CgReport {
            iterations: it,
            relative_residual: res,
        },
    ))
}

/// Jacobi-preconditioned CG on a sparse SPD matrix.
pub fn cg_jacobi(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport)> {
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    pcg(
        |x| a.matvec(x),
        |r| r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect(),
        b,
        None,
        tol,
        max_iter,
        None,
    )
}
