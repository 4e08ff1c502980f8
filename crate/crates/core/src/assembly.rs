//! Global matrices of the mixed system
//!
//! ```text
//! [ A   Bᵀ     ] [u]   [f]
//! [ B  -C/λ    ] [p] = [g]
//! ```
//!
//! `A` from `2μ ∫ ε(u):ε(v)`, `B[i,s] = ∫_{V_i} div ψ_s`, `C = diag |V_i|`.
//! `g` is zero until Dirichlet values are eliminated.

use rayon::prelude::*;

use crate::error::{FemError, Result};
use crate::fespace::{
    facet_rule, gauss_rule, local_basis, n_corners, sub_box_rule, DofMap, ElementMap, Mat3,
};
use crate::mesh::{facet_corners, DualMesh, Mesh};
use crate::solve::sparse::{CsrMatrix, TripletMatrix};
use crate::Point;

/// Gauss points per axis for element volume integrals of `A` and the loads.
pub const ELEMENT_QUADRATURE: usize = 4;
/// Gauss points per axis on each dual subcell for `B`.
pub const SUBCELL_QUADRATURE: usize = 3;

/// Isotropic material. `lambda = ∞` selects the Stokes limit with viscosity `2μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub young: Option<f64>,
    pub poisson: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
}

impl MaterialParams {
    /// Standard 3D / plane-strain relations.
    pub fn from_young_poisson(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) {
            return Err(FemError::InvalidInput(format!("E must be positive, got {young}")));
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(FemError::InvalidInput(format!(
                "Poisson ratio must lie in [0, 0.5), got {poisson}; use the Stokes mode for 0.5"
            )));
        }
        let mu = young / (2.0 * (1.0 + poisson));
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        Ok(MaterialParams {
            young: Some(young),
            poisson: Some(poisson),
            lambda,
            mu,
        })
    }

    /// `lambda` may be zero (pure shear) or infinite (Stokes).
    pub fn from_lame(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(FemError::InvalidInput(format!("μ must be positive, got {mu}")));
        }
        if !(lambda >= 0.0) {
            return Err(FemError::InvalidInput(format!("λ must be non-negative, got {lambda}")));
        }
        Ok(MaterialParams {
            young: None,
            poisson: None,
            lambda,
            mu,
        })
    }

    /// Incompressible Stokes flow with kinematic viscosity `gamma = 2μ`.
    pub fn stokes(gamma: f64) -> Result<Self> {
        Self::from_lame(f64::INFINITY, 0.5 * gamma)
    }

    pub fn is_stokes(&self) -> bool {
        self.lambda.is_infinite()
    }

    /// `1/λ`, zero in the Stokes limit.
    pub fn inv_lambda(&self) -> f64 {
        if self.is_stokes() {
            0.0
        } else {
            1.0 / self.lambda
        }
    }
}

/// `(μ, λ)` from `(E, ν)`.
pub fn lame_from_e_nu(young: f64, poisson: f64) -> Result<MaterialParams> {
    MaterialParams::from_young_poisson(young, poisson)
}

/// Surface load on all boundary facets carrying `tag` (force per unit length/area).
pub struct Traction {
    pub tag: String,
    load: Box<dyn Fn(&Point) -> Point + Send + Sync>,
}

impl Traction {
    pub fn constant(tag: &str, value: Point) -> Self {
        Traction {
            tag: tag.to_string(),
            load: Box::new(move |_| value),
        }
    }

    pub fn field<F>(tag: &str, f: F) -> Self
    where
        F: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        Traction {
            tag: tag.to_string(),
            load: Box::new(f),
        }
    }

    pub fn eval(&self, x: &Point) -> Point {
        (self.load)(x)
    }
}

impl std::fmt::Debug for Traction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Traction").field("tag", &self.tag).finish()
    }
}

#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    /// `B` before Dirichlet columns were removed; pressure recovery uses it.
    pub b_full: CsrMatrix,
    pub c: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub dirichlet_applied: bool,
}

fn sym(g: &Mat3) -> Mat3 {
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = 0.5 * (g[i][j] + g[j][i]);
        }
    }
    e
}

fn ddot(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Local matrices computed in parallel, scattered in element order.
fn assemble_elementwise<F>(mesh: &Mesh, dofmap: &DofMap, local: F) -> Result<CsrMatrix>
where
    F: Fn(&ElementMap) -> Result<Vec<f64>> + Sync,
{
    let n = dofmap.local_velocity_len();
    let locals = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| local(&ElementMap::new(mesh, k)))
        .collect::<Result<Vec<_>>>()?;
    let nv = dofmap.n_velocity();
    let mut t = TripletMatrix::with_capacity(nv, nv, mesh.n_elements() * n * n);
    for (k, m) in locals.iter().enumerate() {
        let dofs = dofmap.element_velocity_dofs(k);
        for (r, &gr) in dofs.iter().enumerate() {
            for (s, &gs) in dofs.iter().enumerate() {
                t.push(gr, gs, m[r * n + s]);
            }
        }
    }
    Ok(t.to_csr())
}

/// `2μ ∫ ε:ε + λ ∫ div div` over the velocity basis of `dofmap`.
fn assemble_elastic(mesh: &Mesh, dofmap: &DofMap, two_mu: f64, lambda: f64) -> Result<CsrMatrix> {
    let rule = gauss_rule(mesh.dim(), ELEMENT_QUADRATURE)?;
    let n = dofmap.local_velocity_len();
    let variant = dofmap.enrichment();
    assemble_elementwise(mesh, dofmap, |map| {
        let mut m = vec![0.0; n * n];
        for (p, w) in rule.iter() {
            let basis = local_basis(map, p, variant)?;
            let wd = w * basis.det;
            let eps: Vec<Mat3> = basis.shapes.iter().map(|s| sym(&s.grad)).collect();
            let div: Vec<f64> = basis.shapes.iter().map(|s| s.divergence()).collect();
            for r in 0..n {
                for s in r..n {
                    let v = wd * (two_mu * ddot(&eps[r], &eps[s]) + lambda * div[r] * div[s]);
                    m[r * n + s] += v;
                }
            }
        }
        for r in 0..n {
            for s in 0..r {
                m[r * n + s] = m[s * n + r];
            }
        }
        Ok(m)
    })
}

/// `A[r,s] = 2μ ∫ ε(ψ_r):ε(ψ_s)`.
pub fn assemble_a(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> Result<CsrMatrix> {
    assemble_elastic(mesh, dofmap, 2.0 * params.mu, 0.0)
}

/// Displacement-method stiffness `∫ C ε:ε = 2μ ∫ ε:ε + λ ∫ div div`, meant
/// for a dof map without enrichment. Locks as λ → ∞.
pub fn assemble_standard_q1(mesh: &Mesh, dofmap: &DofMap, params: &MaterialParams) -> Result<CsrMatrix> {
    if params.is_stokes() {
        return Err(FemError::InvalidInput("the displacement method needs finite λ".into()));
    }
    assemble_elastic(mesh, dofmap, 2.0 * params.mu, params.lambda)
}

/// `H¹` Gram matrix `∫ u·v + ∇u:∇v` of the velocity basis.
pub fn assemble_h1_gram(mesh: &Mesh, dofmap: &DofMap) -> Result<CsrMatrix> {
    let rule = gauss_rule(mesh.dim(), ELEMENT_QUADRATURE)?;
    let n = dofmap.local_velocity_len();
    let variant = dofmap.enrichment();
    assemble_elementwise(mesh, dofmap, |map| {
        let mut m = vec![0.0; n * n];
        for (p, w) in rule.iter() {
            let basis = local_basis(map, p, variant)?;
            let wd = w * basis.det;
            for r in 0..n {
                for s in 0..n {
                    let a = &basis.shapes[r];
                    let b = &basis.shapes[s];
                    let mass: f64 = (0..3).map(|i| a.value[i] * b.value[i]).sum();
                    m[r * n + s] += wd * (mass + ddot(&a.grad, &b.grad));
                }
            }
        }
        Ok(m)
    })
}

/// `B[i, s] = ∫_{V_i} div ψ_s`, summed over the corner subcells of every element.
pub fn assemble_b(mesh: &Mesh, dual: &DualMesh, dofmap: &DofMap) -> Result<CsrMatrix> {
    let dim = mesh.dim();
    let nc = n_corners(dim);
    let rules = (0..nc)
        .map(|c| sub_box_rule(dim, c, SUBCELL_QUADRATURE))
        .collect::<Result<Vec<_>>>()?;
    let n = dofmap.local_velocity_len();
    let variant = dofmap.enrichment();
    let locals = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let map = ElementMap::new(mesh, k);
            let mut m = vec![0.0; nc * n];
            for (c, rule) in rules.iter().enumerate() {
                for (p, w) in rule.iter() {
                    let basis = local_basis(&map, p, variant)?;
                    for (s, shape) in basis.shapes.iter().enumerate() {
                        m[c * n + s] += w * basis.det * shape.divergence();
                    }
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = TripletMatrix::with_capacity(dofmap.n_pressure(), dofmap.n_velocity(), locals.len() * nc * n);
    for (k, m) in locals.iter().enumerate() {
        let vdofs = dofmap.element_velocity_dofs(k);
        for (c, sub) in dual.element_subcells(k).iter().enumerate() {
            for (s, &gs) in vdofs.iter().enumerate() {
                t.push(sub.vertex, gs, m[c * n + s]);
            }
        }
    }
    Ok(t.to_csr())
}

/// Diagonal pressure mass: `C[i] = |V_i|`.
pub fn assemble_c(dual: &DualMesh) -> Vec<f64> {
    dual.cell_volumes().to_vec()
}

/// `f[s] = ∫ f·ψ_s + Σ_facets ∫ t·ψ_s`. Enrichment fields have zero trace, so
/// tractions only reach vertex dofs.
pub fn assemble_load(
    mesh: &Mesh,
    dofmap: &DofMap,
    body_force: Option<&(dyn Fn(&Point) -> Point + Sync)>,
    tractions: &[Traction],
) -> Result<Vec<f64>> {
    let dim = mesh.dim();
    let mut f = vec![0.0; dofmap.n_velocity()];
    if let Some(force) = body_force {
        let rule = gauss_rule(dim, ELEMENT_QUADRATURE)?;
        for k in 0..mesh.n_elements() {
            let map = ElementMap::new(mesh, k);
            let dofs = dofmap.element_velocity_dofs(k);
            for (p, w) in rule.iter() {
                let basis = local_basis(&map, p, dofmap.enrichment())?;
                let fx = force(&basis.point);
                for (s, shape) in basis.shapes.iter().enumerate() {
                    let v: f64 = (0..dim).map(|a| fx[a] * shape.value[a]).sum();
                    f[dofs[s]] += w * basis.det * v;
                }
            }
        }
    }
    for t in tractions {
        let facets: Vec<_> = mesh.boundary_facets().iter().filter(|bf| bf.tag == t.tag).collect();
        if facets.is_empty() {
            return Err(FemError::UnknownFacetTag(t.tag.clone()));
        }
        for bf in facets {
            let map = ElementMap::new(mesh, bf.element);
            let rule = facet_rule(dim, bf.facet, ELEMENT_QUADRATURE)?;
            let axis = bf.facet / 2;
            let corners = facet_corners(dim, bf.facet);
            let el = mesh.element(bf.element);
            for (p, w) in rule.iter() {
                let jac = map.jacobian(p)?;
                let tangents: Vec<[f64; 3]> = (0..dim)
                    .filter(|&b| b != axis)
                    .map(|b| [jac.matrix[0][b], jac.matrix[1][b], jac.matrix[2][b]])
                    .collect();
                let measure = if dim == 2 {
                    (tangents[0][0].powi(2) + tangents[0][1].powi(2)).sqrt()
                } else {
                    let (u, v) = (tangents[0], tangents[1]);
                    let cx = u[1] * v[2] - u[2] * v[1];
                    let cy = u[2] * v[0] - u[0] * v[2];
                    let cz = u[0] * v[1] - u[1] * v[0];
                    (cx * cx + cy * cy + cz * cz).sqrt()
                };
                let x = map.map_point(p);
                let tx = t.eval(&x);
                let q = crate::fespace::eval_q1(dim, p);
                for &c in &corners {
                    for a in 0..dim {
                        f[dofmap.vertex_dof(el[c], a)] += w * measure * q.values[c] * tx[a];
                    }
                }
            }
        }
    }
    Ok(f)
}

/// Assemble `A`, `B`, `C` and the load for the mixed method.
pub fn assemble_system(
    mesh: &Mesh,
    dual: &DualMesh,
    dofmap: &DofMap,
    params: &MaterialParams,
    body_force: Option<&(dyn Fn(&Point) -> Point + Sync)>,
    tractions: &[Traction],
) -> Result<SystemMatrices> {
    let a = assemble_a(mesh, dofmap, params)?;
    let b = assemble_b(mesh, dual, dofmap)?;
    let f = assemble_load(mesh, dofmap, body_force, tractions)?;
    Ok(SystemMatrices {
        a,
        b_full: b.clone(),
        b,
        c: assemble_c(dual),
        f,
        g: vec![0.0; dofmap.n_pressure()],
        dirichlet_applied: false,
    })
}

/// Symmetric elimination of constrained dofs: rows and columns zeroed, unit
/// diagonal, right-hand side carries the prescribed values.
pub fn eliminate_dirichlet(a: &CsrMatrix, f: &mut [f64], mask: &[bool], values: &[f64]) -> Result<CsrMatrix> {
    let n = a.nrows();
    for len in [f.len(), mask.len(), values.len()] {
        if len != n {
            return Err(FemError::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut t = TripletMatrix::with_capacity(n, n, a.nnz());
    for i in 0..n {
        if mask[i] {
            t.push(i, i, 1.0);
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if mask[j] {
                f[i] -= v * values[j];
            } else {
                t.push(i, j, v);
            }
        }
    }
    for i in 0..n {
        if mask[i] {
            f[i] = values[i];
        }
    }
    Ok(t.to_csr())
}

/// Apply the dof map's Dirichlet mask with prescribed `values` (length = velocity dofs;
/// entries at free dofs are ignored). Idempotent.
pub fn apply_dirichlet(mut system: SystemMatrices, dofmap: &DofMap, values: &[f64]) -> Result<SystemMatrices> {
    let mask = dofmap.dirichlet_mask();
    system.a = eliminate_dirichlet(&system.a, &mut system.f, mask, values)?;
    let mut t = TripletMatrix::with_capacity(system.b.nrows(), system.b.ncols(), system.b.nnz());
    for i in 0..system.b.nrows() {
        let (cols, vals) = system.b.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if mask[j] {
                system.g[i] -= v * values[j];
            } else {
                t.push(i, j, v);
            }
        }
    }
    system.b = t.to_csr();
    system.dirichlet_applied = true;
    Ok(system)
}
