//! Verification instruments: the bending-beam exact solution, error norms,
//! the patch rank test, the numerical inf-sup test and the two benchmarks.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assembly::{
    apply_dirichlet, assemble_b, assemble_h1_gram, assemble_load, assemble_standard_q1, assemble_system,
    eliminate_dirichlet, MaterialParams, SystemMatrices, Traction, ELEMENT_QUADRATURE,
};
use crate::error::{FemError, Result};
use crate::fespace::{
    build_dofmap, eval_enrichment, eval_q1, gauss_rule, local_basis, n_corners, sub_box_rule, DofMap,
    ElementMap, Enrichment, Mat3,
};
use crate::mesh::{build_dual, extract_patch, generate_cook_mesh, generate_rect_grid, generate_rect_grid_at, DualMesh, Mesh};
use crate::solve::cholesky::EnvelopeCholesky;
use crate::solve::{condense_and_solve, solve_displacement, solve_saddle, Solution, SolveOptions};
use crate::Point;

/// Closed-form displacement/pressure field used as an error reference.
pub trait ExactField: Sync {
    fn displacement(&self, x: &Point) -> Point;
    /// `grad[a][b] = ∂u_a/∂x_b`.
    fn gradient(&self, x: &Point) -> Mat3;
    fn pressure(&self, x: &Point) -> f64;
}

/// Beam of length `L`, height `l`, bent by a couple of magnitude `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub length: f64,
    pub height: f64,
    pub young: f64,
    pub poisson: f64,
    pub load: f64,
}

impl Default for BeamParams {
    fn default() -> Self {
        BeamParams {
            length: 10.0,
            height: 2.0,
            young: 1500.0,
            poisson: 0.4999,
            load: 3000.0,
        }
    }
}

/// Plane-strain pure-bending solution
/// `u = 2f(1-ν²)/(El) x (l/2 - y)`, `v = f(1-ν²)/(El) (x² + ν/(1-ν) y(y-l))`.
/// It carries no body force, zero shear stress and zero `σ_yy`.
#[derive(Debug, Clone, Copy)]
pub struct BeamExact {
    pub params: BeamParams,
    /// `λ`; infinite at `ν = 1/2`.
    pub lambda: f64,
    pub mu: f64,
}

pub fn beam_exact(params: BeamParams) -> BeamExact {
    let (e, nu) = (params.young, params.poisson);
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = if nu >= 0.5 {
        f64::INFINITY
    } else {
        e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    };
    BeamExact { params, lambda, mu }
}

impl BeamExact {
    fn amplitude(&self) -> f64 {
        let p = &self.params;
        p.load * (1.0 - p.poisson * p.poisson) / (p.young * p.height)
    }

    fn ratio(&self) -> f64 {
        self.params.poisson / (1.0 - self.params.poisson)
    }

    /// Cauchy stress `σ = λ tr(ε) I + 2μ ε`, with `λ tr ε` taken as the pressure.
    pub fn stress(&self, x: &Point) -> Mat3 {
        let g = self.gradient(x);
        let p = self.pressure(x);
        let mut s = [[0.0; 3]; 3];
        for a in 0..2 {
            for b in 0..2 {
                s[a][b] = self.mu * (g[a][b] + g[b][a]);
            }
            s[a][a] += p;
        }
        s
    }
}

impl ExactField for BeamExact {
    fn displacement(&self, x: &Point) -> Point {
        let a = self.amplitude();
        let l = self.params.height;
        [
            2.0 * a * x[0] * (0.5 * l - x[1]),
            a * (x[0] * x[0] + self.ratio() * x[1] * (x[1] - l)),
            0.0,
        ]
    }

    fn gradient(&self, x: &Point) -> Mat3 {
        let a = self.amplitude();
        let l = self.params.height;
        let mut g = [[0.0; 3]; 3];
        g[0][0] = 2.0 * a * (0.5 * l - x[1]);
        g[0][1] = -2.0 * a * x[0];
        g[1][0] = 2.0 * a * x[0];
        g[1][1] = a * self.ratio() * (2.0 * x[1] - l);
        g
    }

    /// `λ div u = ν f (l - 2y) / l`, finite as `ν → 1/2`.
    fn pressure(&self, x: &Point) -> f64 {
        let p = &self.params;
        p.poisson * p.load * (p.height - 2.0 * x[1]) / p.height
    }
}

/// Error norms of a discrete solution against an exact field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub u_l2: f64,
    pub u_h1_semi: f64,
    pub u_h1: f64,
    pub p_l2: f64,
}

/// Value and gradient of the discrete velocity at a reference point of element `k`.
pub fn eval_velocity(mesh: &Mesh, dofmap: &DofMap, u: &[f64], k: usize, xhat: &Point) -> Result<(Point, Mat3, f64, Point)> {
    let map = ElementMap::new(mesh, k);
    let basis = local_basis(&map, xhat, dofmap.enrichment())?;
    let mut val = [0.0; 3];
    let mut grad = [[0.0; 3]; 3];
    for (s, &gs) in dofmap.element_velocity_dofs(k).iter().enumerate() {
        let c = u[gs];
        let sh = &basis.shapes[s];
        for a in 0..3 {
            val[a] += c * sh.value[a];
            for b in 0..3 {
                grad[a][b] += c * sh.grad[a][b];
            }
        }
    }
    Ok((val, grad, basis.det, basis.point))
}

/// Discrete velocity at a physical point.
pub fn evaluate_at(mesh: &Mesh, dofmap: &DofMap, u: &[f64], x: &Point) -> Result<Point> {
    let (k, xhat) = mesh.locate(x)?;
    Ok(eval_velocity(mesh, dofmap, u, k, &xhat)?.0)
}

fn velocity_errors(mesh: &Mesh, dofmap: &DofMap, u: &[f64], exact: &dyn ExactField) -> Result<(f64, f64)> {
    let rule = gauss_rule(mesh.dim(), ELEMENT_QUADRATURE)?;
    let dim = mesh.dim();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for k in 0..mesh.n_elements() {
        for (p, w) in rule.iter() {
            let (val, grad, det, x) = eval_velocity(mesh, dofmap, u, k, p)?;
            let ue = exact.displacement(&x);
            let ge = exact.gradient(&x);
            for a in 0..dim {
                l2 += w * det * (ue[a] - val[a]).powi(2);
                for b in 0..dim {
                    h1 += w * det * (ge[a][b] - grad[a][b]).powi(2);
                }
            }
        }
    }
    Ok((l2, h1))
}

/// `L²`, `H¹` errors of `u_h` and `L²` error of the dual-cell pressure.
pub fn compute_errors(
    mesh: &Mesh,
    dual: &DualMesh,
    dofmap: &DofMap,
    u: &[f64],
    p: &[f64],
    exact: &dyn ExactField,
) -> Result<ErrorNorms> {
    let (l2, semi) = velocity_errors(mesh, dofmap, u, exact)?;
    let dim = mesh.dim();
    let rules = (0..n_corners(dim))
        .map(|c| sub_box_rule(dim, c, ELEMENT_QUADRATURE))
        .collect::<Result<Vec<_>>>()?;
    let mut pe = 0.0;
    for sub in dual.subcells() {
        let map = ElementMap::new(mesh, sub.element);
        for (xh, w) in rules[sub.corner].iter() {
            let det = map.jacobian(xh)?.det;
            let x = map.map_point(xh);
            pe += w * det * (exact.pressure(&x) - p[sub.vertex]).powi(2);
        }
    }
    Ok(ErrorNorms {
        u_l2: l2.sqrt(),
        u_h1_semi: semi.sqrt(),
        u_h1: (l2 + semi).sqrt(),
        p_l2: pe.sqrt(),
    })
}

/// Errors for the displacement method, whose pressure is `λ div u_h` pointwise.
pub fn compute_errors_standard(
    mesh: &Mesh,
    dofmap: &DofMap,
    u: &[f64],
    lambda: f64,
    exact: &dyn ExactField,
) -> Result<ErrorNorms> {
    let (l2, semi) = velocity_errors(mesh, dofmap, u, exact)?;
    let rule = gauss_rule(mesh.dim(), ELEMENT_QUADRATURE)?;
    let mut pe = 0.0;
    for k in 0..mesh.n_elements() {
        for (xh, w) in rule.iter() {
            let (_, grad, det, x) = eval_velocity(mesh, dofmap, u, k, xh)?;
            let div = grad[0][0] + grad[1][1] + grad[2][2];
            pe += w * det * (exact.pressure(&x) - lambda * div).powi(2);
        }
    }
    Ok(ErrorNorms {
        u_l2: l2.sqrt(),
        u_h1_semi: semi.sqrt(),
        u_h1: (l2 + semi).sqrt(),
        p_l2: pe.sqrt(),
    })
}

struct ZeroField;

impl ExactField for ZeroField {
    fn displacement(&self, _: &Point) -> Point {
        [0.0; 3]
    }
    fn gradient(&self, _: &Point) -> Mat3 {
        [[0.0; 3]; 3]
    }
    fn pressure(&self, _: &Point) -> f64 {
        0.0
    }
}

/// `(‖u_h‖₁, ‖p_h‖₀)`.
pub fn solution_norms(mesh: &Mesh, dofmap: &DofMap, u: &[f64], p: &[f64], dual: &DualMesh) -> Result<(f64, f64)> {
    let (l2, semi) = velocity_errors(mesh, dofmap, u, &ZeroField)?;
    let pn: f64 = p.iter().zip(dual.cell_volumes()).map(|(pi, v)| v * pi * pi).sum();
    Ok(((l2 + semi).sqrt(), pn.sqrt()))
}

/// Interpolant of an exact field: nodal values at vertices, enrichment
/// coefficients by element-local `L²` projection of the remainder.
pub fn interpolate(mesh: &Mesh, dofmap: &DofMap, exact: &dyn ExactField) -> Result<Vec<f64>> {
    let dim = mesh.dim();
    let mut u = vec![0.0; dofmap.n_velocity()];
    for (v, x) in mesh.vertices().iter().enumerate() {
        let ue = exact.displacement(x);
        for a in 0..dim {
            u[dofmap.vertex_dof(v, a)] = ue[a];
        }
    }
    let m = dofmap.enrichment().per_element(dim);
    if m == 0 {
        return Ok(u);
    }
    let rule = gauss_rule(dim, ELEMENT_QUADRATURE)?;
    for k in 0..mesh.n_elements() {
        let map = ElementMap::new(mesh, k);
        let mut mass = DMatrix::<f64>::zeros(m, m);
        let mut rhs = nalgebra::DVector::<f64>::zeros(m);
        for (xh, w) in rule.iter() {
            let det = map.jacobian(xh)?.det;
            let x = map.map_point(xh);
            let q = eval_q1(dim, xh);
            let mut rem = exact.displacement(&x);
            for (c, &v) in mesh.element(k).iter().enumerate() {
                for a in 0..dim {
                    rem[a] -= q.values[c] * u[dofmap.vertex_dof(v, a)];
                }
            }
            let psi = eval_enrichment(&map, xh, dofmap.enrichment())?;
            for i in 0..m {
                for j in 0..m {
                    mass[(i, j)] += w * det * (0..dim).map(|a| psi[i].value[a] * psi[j].value[a]).sum::<f64>();
                }
                rhs[i] += w * det * (0..dim).map(|a| psi[i].value[a] * rem[a]).sum::<f64>();
            }
        }
        let coef = mass
            .lu()
            .solve(&rhs)
            .ok_or_else(|| FemError::Singular(format!("enrichment mass of element {k}")))?;
        for j in 0..m {
            u[dofmap.bubble_dof(k, j)] = coef[j];
        }
    }
    Ok(u)
}

/// Geometry of the test patch: `2^dim` cells of size `scale · stretch_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchGeometry {
    pub origin: Point,
    pub scale: f64,
    pub stretch: [f64; 3],
}

impl Default for PatchGeometry {
    fn default() -> Self {
        PatchGeometry {
            origin: [0.0; 3],
            scale: 1.0,
            stretch: [1.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRankReport {
    pub dim: usize,
    pub enrichment: Enrichment,
    pub n_pressure: usize,
    pub n_velocity: usize,
    pub rank: usize,
    /// Dimension of `{q : b(v, q) = 0 for all patch velocities v}`.
    pub kernel_dim: usize,
    pub constants_in_kernel: bool,
    pub singular_values: Vec<f64>,
}

/// Relative threshold below which singular values count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub fn patch_rank_test(dim: usize, enrichment: Enrichment) -> Result<PatchRankReport> {
    patch_rank_test_on(dim, enrichment, &PatchGeometry::default())
}

/// Assemble `b(v, q)` on one vertex patch with homogeneous Dirichlet data on
/// its boundary and measure the rank by SVD.
pub fn patch_rank_test_on(dim: usize, enrichment: Enrichment, geom: &PatchGeometry) -> Result<PatchRankReport> {
    let lengths: Vec<f64> = (0..dim).map(|k| 2.0 * geom.scale * geom.stretch[k]).collect();
    let mesh = generate_rect_grid_at(&geom.origin, &lengths, &vec![2; dim])?;
    let center = (0..mesh.n_vertices())
        .find(|v| !mesh.boundary_vertices().contains(v))
        .ok_or_else(|| FemError::InvalidInput("patch has no interior vertex".into()))?;
    let patch = extract_patch(&mesh, center)?;
    debug_assert_eq!(patch.elements.len(), mesh.n_elements());
    let dual = build_dual(&mesh)?;
    let dofmap = build_dofmap(&mesh, &dual, enrichment);
    let b = assemble_b(&mesh, &dual, &dofmap)?;
    let free = dofmap.free_dofs();
    let rows: Vec<usize> = patch.vertices.clone();
    let bp = b.submatrix(&rows, &free).to_dense();
    let svd = bp.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count();
    let ones = nalgebra::DVector::from_element(rows.len(), 1.0);
    let bt1 = bp.transpose() * ones;
    let constants_in_kernel = bt1.amax() <= RANK_TOLERANCE * smax.max(f64::MIN_POSITIVE);
    Ok(PatchRankReport {
        dim,
        enrichment,
        n_pressure: rows.len(),
        n_velocity: free.len(),
        rank,
        kernel_dim: rows.len() - rank,
        constants_in_kernel,
        singular_values: sv,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfSupLevel {
    pub h: f64,
    /// Discrete inf-sup constant; zero when spurious pressure modes exist.
    pub beta: f64,
    /// Number of (numerically) zero eigenvalues, constants included.
    pub zero_modes: usize,
    pub spurious_modes: bool,
    pub n_pressure: usize,
    pub n_free_velocity: usize,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfSupReport {
    pub levels: Vec<InfSupLevel>,
}

/// `β_h² = ` smallest nonzero eigenvalue of `B G⁻¹ Bᵀ q = β² C q`, with `G` the
/// full `H¹` Gram matrix on the free velocity dofs. The constant pressure is
/// deflated when no free velocity dof reaches the boundary.
pub fn inf_sup_beta(mesh: &Mesh) -> Result<InfSupLevel> {
    let dual = build_dual(mesh)?;
    let dofmap = build_dofmap(mesh, &dual, Enrichment::GradientWeighted);
    let free = dofmap.free_dofs();
    let np = dofmap.n_pressure();
    let b = assemble_b(mesh, &dual, &dofmap)?;
    let g = assemble_h1_gram(mesh, &dofmap)?.submatrix(&free, &free);
    let all: Vec<usize> = (0..np).collect();
    let bf = b.submatrix(&all, &free);
    let c = dual.cell_volumes();
    let n_free = free.len();
    let mut y = DMatrix::<f64>::zeros(n_free, np);
    if n_free > 0 {
        let chol = EnvelopeCholesky::factor(&g)?;
        let cols: Vec<Vec<f64>> = (0..np)
            .into_par_iter()
            .map(|i| {
                let mut rhs = vec![0.0; n_free];
                let (cc, vv) = bf.row(i);
                for (&j, &v) in cc.iter().zip(vv) {
                    rhs[j] = v / c[i].sqrt();
                }
                chol.half_solve(&rhs)
            })
            .collect::<Result<_>>()?;
        for (i, col) in cols.iter().enumerate() {
            y.column_mut(i).copy_from_slice(col);
        }
    }
    let s = y.transpose() * &y;
    let eig = s.symmetric_eigen();
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    let max = ev.last().copied().unwrap_or(0.0).max(0.0);
    let zero_modes = ev.iter().filter(|&&e| e <= RANK_TOLERANCE * max).count();
    let constants = constants_deflatable(&bf);
    let allowed = usize::from(constants);
    let spurious_modes = zero_modes > allowed;
    let beta = if spurious_modes || ev.len() <= allowed {
        0.0
    } else {
        ev[allowed].max(0.0).sqrt()
    };
    Ok(InfSupLevel {
        h: mesh.max_edge_length(),
        beta,
        zero_modes,
        spurious_modes,
        n_pressure: np,
        n_free_velocity: n_free,
        max_eigenvalue: max,
    })
}

fn constants_deflatable(bf: &crate::solve::sparse::CsrMatrix) -> bool {
    let s = bf.transpose_matvec(&vec![1.0; bf.nrows()]).unwrap_or_default();
    let m = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    m <= 1e-9 * bf.max_abs().max(f64::MIN_POSITIVE)
}

pub fn inf_sup_test(meshes: &[Mesh]) -> Result<InfSupReport> {
    let levels = meshes.iter().map(inf_sup_beta).collect::<Result<_>>()?;
    Ok(InfSupReport { levels })
}

/// Uniform unit-square meshes with `h = 1/4, 1/8, …` (`levels` of them).
pub fn unit_square_sequence(levels: usize) -> Result<Vec<Mesh>> {
    (0..levels)
        .map(|k| {
            let n = 4 << k;
            generate_rect_grid(&[1.0, 1.0], &[n, n])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// Bubble-enriched Q1 displacement with dual-mesh pressure.
    Mixed,
    /// Plain Q1 displacement method.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamBoundary {
    /// Exact displacement prescribed on the whole boundary.
    Dirichlet,
    /// `u = 0` on `x = 0`, `v(0,0) = 0`, exact traction on `x = L`,
    /// traction-free top and bottom.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub params: BeamParams,
    /// Element counts of the coarsest level.
    pub base: (usize, usize),
    pub levels: usize,
    pub discretization: Discretization,
    pub boundary: BeamBoundary,
    pub solve: SolveOptions,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            params: BeamParams::default(),
            base: (4, 2),
            levels: 4,
            discretization: Discretization::Mixed,
            boundary: BeamBoundary::Dirichlet,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    /// Elements per edge (Cook) or along the beam axis.
    pub n: usize,
    pub n_elems: usize,
    pub h: f64,
    pub errors: Option<ErrorNorms>,
    pub tip: Option<f64>,
    /// `‖u_h‖₁ + ‖p_h‖₀`.
    pub stability_norm: f64,
    pub solver_residual: f64,
    /// Largest `|p_i − λ/|V_i| (B u)_i|` relative to `max |p_i|` (mixed runs only).
    pub recovery_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResult>,
}

impl ConvergenceReport {
    fn rates(&self, f: impl Fn(&ErrorNorms) -> f64) -> Vec<Option<f64>> {
        let mut out = vec![None];
        for w in self.levels.windows(2) {
            let r = match (&w[0].errors, &w[1].errors) {
                (Some(a), Some(b)) => Some((f(a) / f(b)).log2()),
                _ => None,
            };
            out.push(r);
        }
        out
    }

    /// `log₂(e_k / e_{k+1})`, `None` at the first level.
    pub fn rates_u_l2(&self) -> Vec<Option<f64>> {
        self.rates(|e| e.u_l2)
    }

    pub fn rates_u_h1(&self) -> Vec<Option<f64>> {
        self.rates(|e| e.u_h1)
    }

    pub fn rates_p_l2(&self) -> Vec<Option<f64>> {
        self.rates(|e| e.p_l2)
    }

    pub fn tips(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.tip).collect()
    }
}

/// Mixed-method solve on an assembled problem: Dirichlet elimination, condensed
/// solve (or saddle solve in the Stokes limit).
pub fn solve_mixed(
    mesh: &Mesh,
    dual: &DualMesh,
    dofmap: &DofMap,
    params: &MaterialParams,
    tractions: &[Traction],
    dirichlet_values: &[f64],
    opts: &SolveOptions,
) -> Result<(SystemMatrices, Solution)> {
    let sys = assemble_system(mesh, dual, dofmap, params, None, tractions)?;
    let sys = apply_dirichlet(sys, dofmap, dirichlet_values)?;
    let sol = if params.is_stokes() {
        solve_saddle(&sys, params, opts)?
    } else {
        condense_and_solve(&sys, params, opts)?
    };
    Ok((sys, sol))
}

fn recovery_defect(sys: &SystemMatrices, params: &MaterialParams, sol: &Solution) -> Result<f64> {
    if params.is_stokes() {
        return Ok(0.0);
    }
    let bu = sys.b_full.matvec(&sol.u)?;
    let pmax = sol.p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut d: f64 = 0.0;
    for i in 0..bu.len() {
        d = d.max((sol.p[i] - params.lambda / sys.c[i] * bu[i]).abs());
    }
    Ok(if pmax > 0.0 { d / pmax } else { d })
}

/// Mesh, dof map and solution of one beam level.
pub struct BeamSolve {
    pub mesh: Mesh,
    pub dual: DualMesh,
    pub dofmap: DofMap,
    pub params: MaterialParams,
    pub solution: Solution,
    /// Assembled mixed system (absent for the standard method).
    pub system: Option<SystemMatrices>,
}

/// Solve the beam on level `level` (`base · 2^level` elements).
pub fn solve_beam(cfg: &BeamConfig, level: usize) -> Result<BeamSolve> {
    let bp = cfg.params;
    let exact = beam_exact(bp);
    let params = MaterialParams::from_young_poisson(bp.young, bp.poisson)?;
    let (nx, ny) = (cfg.base.0 << level, cfg.base.1 << level);
    let mesh = generate_rect_grid(&[bp.length, bp.height], &[nx, ny])?;
    let dual = build_dual(&mesh)?;
    let enrichment = match cfg.discretization {
        Discretization::Mixed => Enrichment::GradientWeighted,
        Discretization::Standard => Enrichment::None,
    };
    let mut dofmap = build_dofmap(&mesh, &dual, enrichment);
    let mut tractions = Vec::new();
    let mut values = vec![0.0; dofmap.n_velocity()];
    match cfg.boundary {
        BeamBoundary::Dirichlet => {
            for &v in mesh.dirichlet_vertices() {
                let ue = exact.displacement(&mesh.vertices()[v]);
                for a in 0..2 {
                    values[dofmap.vertex_dof(v, a)] = ue[a];
                }
            }
        }
        BeamBoundary::Clamped => {
            let verts = mesh.vertices().to_vec();
            dofmap = dofmap.with_vertex_constraints(|v, a| {
                let x = verts[v];
                (x[0] == 0.0 && a == 0) || (x[0] == 0.0 && x[1] == 0.0 && a == 1)
            });
            tractions.push(Traction::field("xmax", move |x| {
                let s = exact.stress(x);
                [s[0][0], s[1][0], 0.0]
            }));
        }
    }
    let (solution, system) = match cfg.discretization {
        Discretization::Mixed => {
            let (sys, sol) = solve_mixed(&mesh, &dual, &dofmap, &params, &tractions, &values, &cfg.solve)?;
            (sol, Some(sys))
        }
        Discretization::Standard => {
            let k = assemble_standard_q1(&mesh, &dofmap, &params)?;
            let mut f = assemble_load(&mesh, &dofmap, None, &tractions)?;
            let k = eliminate_dirichlet(&k, &mut f, dofmap.dirichlet_mask(), &values)?;
            (solve_displacement(&k, &f, &cfg.solve)?, None)
        }
    };
    Ok(BeamSolve {
        mesh,
        dual,
        dofmap,
        params,
        solution,
        system,
    })
}

fn beam_level(cfg: &BeamConfig, level: usize) -> Result<LevelResult> {
    let exact = beam_exact(cfg.params);
    let run = solve_beam(cfg, level)?;
    let (mesh, dofmap, sol) = (&run.mesh, &run.dofmap, &run.solution);
    let (errors, stability_norm, recovery) = match &run.system {
        Some(sys) => {
            let errors = compute_errors(mesh, &run.dual, dofmap, &sol.u, &sol.p, &exact)?;
            let (nu, np) = solution_norms(mesh, dofmap, &sol.u, &sol.p, &run.dual)?;
            (errors, nu + np, recovery_defect(sys, &run.params, sol)?)
        }
        None => {
            let errors = compute_errors_standard(mesh, dofmap, &sol.u, run.params.lambda, &exact)?;
            let norms = compute_errors_standard(mesh, dofmap, &sol.u, run.params.lambda, &ZeroField)?;
            (errors, norms.u_h1 + norms.p_l2, 0.0)
        }
    };
    Ok(LevelResult {
        level,
        n: cfg.base.0 << level,
        n_elems: mesh.n_elements(),
        h: mesh.max_edge_length(),
        errors: Some(errors),
        tip: None,
        stability_norm,
        solver_residual: sol.diagnostics.residual,
        recovery_defect: recovery,
    })
}

/// Refinement study of the bending beam; levels run in parallel, results
/// are ordered by level.
pub fn run_beam(cfg: &BeamConfig) -> Result<ConvergenceReport> {
    if cfg.levels < 2 {
        return Err(FemError::InvalidInput("need at least two levels".into()));
    }
    let levels = (0..cfg.levels)
        .into_par_iter()
        .map(|k| beam_level(cfg, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport { levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TipPoint {
    /// Top-right corner `(48, 60)`.
    Corner,
    /// Midpoint of the loaded edge `(48, 52)`.
    MidEdge,
}

impl TipPoint {
    pub fn point(self) -> Point {
        match self {
            TipPoint::Corner => [48.0, 60.0, 0.0],
            TipPoint::MidEdge => [48.0, 52.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CookConfig {
    pub young: f64,
    pub poisson: f64,
    /// Total shear force on the right edge.
    pub load: f64,
    pub levels: usize,
    pub discretization: Discretization,
    pub tip: TipPoint,
    pub solve: SolveOptions,
}

impl Default for CookConfig {
    fn default() -> Self {
        CookConfig {
            young: 250.0,
            poisson: 0.49999,
            load: 100.0,
            levels: 5,
            discretization: Discretization::Mixed,
            tip: TipPoint::Corner,
            solve: SolveOptions::default(),
        }
    }
}

/// Cook mesh, dof map and the displacement solution at `n` elements per edge.
pub fn solve_cook(cfg: &CookConfig, n: usize) -> Result<(Mesh, DofMap, Solution)> {
    let params = MaterialParams::from_young_poisson(cfg.young, cfg.poisson)?;
    let mesh = generate_cook_mesh(n)?;
    let dual = build_dual(&mesh)?;
    let right_edge = (crate::mesh::COOK_CORNERS[2][1] - crate::mesh::COOK_CORNERS[1][1]).abs();
    let tractions = [Traction::constant("load", [0.0, cfg.load / right_edge, 0.0])];
    match cfg.discretization {
        Discretization::Mixed => {
            let dofmap = build_dofmap(&mesh, &dual, Enrichment::GradientWeighted);
            let values = vec![0.0; dofmap.n_velocity()];
            let (_, sol) = solve_mixed(&mesh, &dual, &dofmap, &params, &tractions, &values, &cfg.solve)?;
            Ok((mesh, dofmap, sol))
        }
        Discretization::Standard => {
            let dofmap = build_dofmap(&mesh, &dual, Enrichment::None);
            let k = assemble_standard_q1(&mesh, &dofmap, &params)?;
            let mut f = assemble_load(&mesh, &dofmap, None, &tractions)?;
            let values = vec![0.0; dofmap.n_velocity()];
            let k = eliminate_dirichlet(&k, &mut f, dofmap.dirichlet_mask(), &values)?;
            let sol = solve_displacement(&k, &f, &cfg.solve)?;
            Ok((mesh, dofmap, sol))
        }
    }
}

/// Tip deflection study on Cook meshes with `n = 2, 4, 8, …` elements per edge.
pub fn run_cook(cfg: &CookConfig) -> Result<ConvergenceReport> {
    if cfg.levels < 2 {
        return Err(FemError::InvalidInput("need at least two levels".into()));
    }
    let levels = (0..cfg.levels)
        .into_par_iter()
        .map(|k| {
            let n = 2 << k;
            let (mesh, dofmap, sol) = solve_cook(cfg, n)?;
            let tip = evaluate_at(&mesh, &dofmap, &sol.u, &cfg.tip.point())?[1];
            Ok(LevelResult {
                level: k,
                n,
                n_elems: mesh.n_elements(),
                h: mesh.max_edge_length(),
                errors: None,
                tip: Some(tip),
                stability_norm: f64::NAN,
                solver_residual: sol.diagnostics.residual,
                recovery_defect: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport { levels })
}
