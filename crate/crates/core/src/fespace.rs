//! Reference-element basis functions, quadrature and the global dof map.
//!
//! Reference element is `(0,1)^dim`. Corners are numbered lexicographically:
//! corner `c` sits at `x̂_k = (c >> k) & 1`, so in 2D the order is
//! `(0,0), (1,0), (0,1), (1,1)` and in 3D the z-bit is the slowest.

use crate::error::{FemError, Result};
use crate::mesh::{DualMesh, Mesh};
use crate::Point;

pub type Mat3 = [[f64; 3]; 3];

/// Number of corners of the reference element.
pub fn n_corners(dim: usize) -> usize {
    1 << dim
}

/// Reference coordinate of corner `c` along `axis` (0 or 1).
pub fn corner_bit(c: usize, axis: usize) -> usize {
    (c >> axis) & 1
}

// Gauss-Legendre nodes/weights on [-1, 1], positive half only (symmetric rules).
const GL_NODES: [&[(f64, f64)]; 5] = [
    &[(0.0, 2.0)],
    &[(0.577_350_269_189_625_8, 1.0)],
    &[(0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)],
    &[
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    ],
    &[
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664_0, 0.236_926_885_056_189_1),
    ],
];

/// 1D Gauss-Legendre rule with `n` points on `(0,1)`, sorted by node.
pub fn gauss_1d(n: usize) -> Result<Vec<(f64, f64)>> {
    if !(1..=5).contains(&n) {
        return Err(FemError::InvalidInput(format!(
            "Gauss rule with {n} points per axis is not supported (1..=5)"
        )));
    }
    let mut rule = Vec::with_capacity(n);
    for &(t, w) in GL_NODES[n - 1] {
        if t == 0.0 {
            rule.push((0.5, 0.5 * w));
        } else {
            rule.push((0.5 * (1.0 - t), 0.5 * w));
            rule.push((0.5 * (1.0 + t), 0.5 * w));
        }
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rule)
}

/// Tensor-product quadrature rule in reference coordinates.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Tensor rule on the box `Π_k [lo_k, lo_k + len_k]`.
    fn on_box(dim: usize, lo: &[f64], len: &[f64], n: usize) -> Result<Self> {
        let line = gauss_1d(n)?;
        let total = n.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let mut p = [0.0; 3];
            let mut w = 1.0;
            let mut rem = idx;
            for k in 0..dim {
                let (t, wt) = line[rem % n];
                rem /= n;
                p[k] = lo[k] + len[k] * t;
                w *= len[k] * wt;
            }
            points.push(p);
            weights.push(w);
        }
        Ok(QuadratureRule {
            dim,
            points,
            weights,
        })
    }
}

/// Gauss-Legendre rule on the full reference element, exact for `Q_{2n-1}`.
pub fn gauss_rule(dim: usize, n: usize) -> Result<QuadratureRule> {
    check_dim(dim)?;
    QuadratureRule::on_box(dim, &[0.0; 3], &[1.0; 3], n)
}

/// Gauss-Legendre rule on the corner sub-box of the reference element that
/// contains corner `corner`: `[0,1/2]` or `[1/2,1]` per axis.
pub fn sub_box_rule(dim: usize, corner: usize, n: usize) -> Result<QuadratureRule> {
    check_dim(dim)?;
    if corner >= n_corners(dim) {
        return Err(FemError::InvalidInput(format!(
            "corner {corner} out of range for dim {dim}"
        )));
    }
    let mut lo = [0.0; 3];
    for (k, l) in lo.iter_mut().enumerate().take(dim) {
        *l = 0.5 * corner_bit(corner, k) as f64;
    }
    QuadratureRule::on_box(dim, &lo, &[0.5; 3], n)
}

/// Rule on a reference facet, embedded in the reference element. Facet
/// `2*axis + side` is the face `x̂_axis = side`. Weights sum to 1.
pub fn facet_rule(dim: usize, facet: usize, n: usize) -> Result<QuadratureRule> {
    check_dim(dim)?;
    let axis = facet / 2;
    let side = (facet % 2) as f64;
    if axis >= dim {
        return Err(FemError::InvalidInput(format!(
            "facet {facet} out of range for dim {dim}"
        )));
    }
    let inner = QuadratureRule::on_box(dim - 1, &[0.0; 3], &[1.0; 3], n)?;
    let points = inner
        .points
        .iter()
        .map(|q| {
            let mut p = [0.0; 3];
            let mut m = 0;
            for (k, pk) in p.iter_mut().enumerate().take(dim) {
                if k == axis {
                    *pk = side;
                } else {
                    *pk = q[m];
                    m += 1;
                }
            }
            p
        })
        .collect();
    Ok(QuadratureRule {
        dim,
        points,
        weights: inner.weights,
    })
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(FemError::InvalidInput(format!("dimension must be 2 or 3, got {dim}")))
    }
}

/// Q1 shape function values and reference gradients at a point.
#[derive(Debug, Clone, Copy)]
pub struct Q1Values {
    pub n: usize,
    pub values: [f64; 8],
    pub grads: [Point; 8],
}

/// Tensor-product Q1 basis on the reference element in corner order.
pub fn eval_q1(dim: usize, xhat: &Point) -> Q1Values {
    let n = n_corners(dim);
    let mut out = Q1Values {
        n,
        values: [0.0; 8],
        grads: [[0.0; 3]; 8],
    };
    for c in 0..n {
        let mut f = [0.0; 3];
        let mut df = [0.0; 3];
        for k in 0..dim {
            if corner_bit(c, k) == 1 {
                f[k] = xhat[k];
                df[k] = 1.0;
            } else {
                f[k] = 1.0 - xhat[k];
                df[k] = -1.0;
            }
        }
        let mut v = 1.0;
        for fk in f.iter().take(dim) {
            v *= fk;
        }
        out.values[c] = v;
        for k in 0..dim {
            let mut g = df[k];
            for m in 0..dim {
                if m != k {
                    g *= f[m];
                }
            }
            out.grads[c][k] = g;
        }
    }
    out
}

/// Reference Hessian of Q1 shape function `c`. Only mixed partials are nonzero.
pub fn q1_hessian(dim: usize, c: usize, xhat: &Point) -> Mat3 {
    let mut f = [0.0; 3];
    let mut df = [0.0; 3];
    for k in 0..dim {
        if corner_bit(c, k) == 1 {
            f[k] = xhat[k];
            df[k] = 1.0;
        } else {
            f[k] = 1.0 - xhat[k];
            df[k] = -1.0;
        }
    }
    let mut h = [[0.0; 3]; 3];
    for a in 0..dim {
        for b in 0..dim {
            if a == b {
                continue;
            }
            let mut v = df[a] * df[b];
            for m in 0..dim {
                if m != a && m != b {
                    v *= f[m];
                }
            }
            h[a][b] = v;
        }
    }
    h
}

/// Reference bubble `Π_k 4 x̂_k (1 - x̂_k)` and its reference gradient.
pub fn eval_bubble(dim: usize, xhat: &Point) -> (f64, Point) {
    let mut f = [1.0; 3];
    let mut df = [0.0; 3];
    for k in 0..dim {
        f[k] = 4.0 * xhat[k] * (1.0 - xhat[k]);
        df[k] = 4.0 - 8.0 * xhat[k];
    }
    let value = f[..dim].iter().product();
    let mut grad = [0.0; 3];
    for k in 0..dim {
        let mut g = df[k];
        for m in 0..dim {
            if m != k {
                g *= f[m];
            }
        }
        grad[k] = g;
    }
    (value, grad)
}

/// Jacobian of an element map at one reference point.
/// `matrix[a][b] = ∂x_a/∂x̂_b`, `inverse[b][a] = ∂x̂_b/∂x_a`.
#[derive(Debug, Clone, Copy)]
pub struct Jacobian {
    pub dim: usize,
    pub matrix: Mat3,
    pub inverse: Mat3,
    pub det: f64,
}

impl Jacobian {
    /// Push a reference gradient to physical coordinates (`J^{-T} ĝ`).
    pub fn physical_gradient(&self, gref: &Point) -> Point {
        let mut g = [0.0; 3];
        for (a, ga) in g.iter_mut().enumerate().take(self.dim) {
            for b in 0..self.dim {
                *ga += self.inverse[b][a] * gref[b];
            }
        }
        g
    }
}

/// Isoparametric Q1 map `F_K` of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub dim: usize,
    pub element: usize,
    pub corners: [Point; 8],
}

impl ElementMap {
    pub fn new(mesh: &Mesh, element: usize) -> Self {
        let mut corners = [[0.0; 3]; 8];
        for (c, &v) in mesh.element(element).iter().enumerate() {
            corners[c] = mesh.vertices()[v];
        }
        ElementMap {
            dim: mesh.dim(),
            element,
            corners,
        }
    }

    pub fn map_point(&self, xhat: &Point) -> Point {
        let q = eval_q1(self.dim, xhat);
        let mut x = [0.0; 3];
        for c in 0..q.n {
            for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
                *xa += q.values[c] * self.corners[c][a];
            }
        }
        x
    }

    pub fn jacobian(&self, xhat: &Point) -> Result<Jacobian> {
        let q = eval_q1(self.dim, xhat);
        self.jacobian_from(&q)
    }

    fn jacobian_from(&self, q: &Q1Values) -> Result<Jacobian> {
        let d = self.dim;
        let mut m = [[0.0; 3]; 3];
        for c in 0..q.n {
            for a in 0..d {
                for b in 0..d {
                    m[a][b] += self.corners[c][a] * q.grads[c][b];
                }
            }
        }
        let (det, inverse) = if d == 2 {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let mut inv = [[0.0; 3]; 3];
            inv[0][0] = m[1][1] / det;
            inv[0][1] = -m[0][1] / det;
            inv[1][0] = -m[1][0] / det;
            inv[1][1] = m[0][0] / det;
            (det, inv)
        } else {
            let cof = |i: usize, j: usize| {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
            };
            let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
            let mut inv = [[0.0; 3]; 3];
            for (i, row) in inv.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = cof(j, i) / det;
                }
            }
            (det, inv)
        };
        if !(det > 0.0) || !det.is_finite() {
            return Err(FemError::DegenerateElement {
                element: self.element,
                det,
            });
        }
        Ok(Jacobian {
            dim: d,
            matrix: m,
            inverse,
            det,
        })
    }

    /// Physical Hessian of Q1 function `c`, including the curvature of
    /// non-affine maps: `H = J^{-T} (Ĥ - Σ_m (∂_m φ) Ĥ x_m) J^{-1}`.
    fn physical_hessian(&self, jac: &Jacobian, c: usize, grad_phys: &Point, xhat: &Point) -> Mat3 {
        let d = self.dim;
        let mut href = q1_hessian(d, c, xhat);
        for corner in 0..n_corners(d) {
            let hc = q1_hessian(d, corner, xhat);
            let mut coef = 0.0;
            for m in 0..d {
                coef += grad_phys[m] * self.corners[corner][m];
            }
            if coef != 0.0 {
                for b in 0..d {
                    for e in 0..d {
                        href[b][e] -= coef * hc[b][e];
                    }
                }
            }
        }
        let mut h = [[0.0; 3]; 3];
        for a in 0..d {
            for e in 0..d {
                let mut s = 0.0;
                for b in 0..d {
                    for cc in 0..d {
                        s += jac.inverse[b][a] * href[b][cc] * jac.inverse[cc][e];
                    }
                }
                h[a][e] = s;
            }
        }
        h
    }
}

/// Choice of element enrichment added to the vector Q1 space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Enrichment {
    /// `dim` fields per element: `(∂φ_T/∂x_j) b_T e_j`, `φ_T` the Q1 function
    /// of local corner 0. This is the stable default.
    GradientWeighted,
    /// `dim` fields per element: `b_T e_j`.
    PlainBubble,
    /// One field per element: `∇φ_T b_T`.
    ScalarGradient,
    /// Pure vector Q1, no enrichment.
    None,
}

impl Enrichment {
    pub fn per_element(self, dim: usize) -> usize {
        match self {
            Enrichment::GradientWeighted | Enrichment::PlainBubble => dim,
            Enrichment::ScalarGradient => 1,
            Enrichment::None => 0,
        }
    }
}

/// Vector-valued basis function at a point: value and gradient
/// (`grad[a][b] = ∂v_a/∂x_b`).
#[derive(Debug, Clone, Copy, Default)]
pub struct VectorShape {
    pub value: Point,
    pub grad: Mat3,
}

impl VectorShape {
    pub fn divergence(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1] + self.grad[2][2]
    }
}

/// Enrichment fields of one element at reference point `xhat`.
pub fn eval_enrichment(
    map: &ElementMap,
    xhat: &Point,
    variant: Enrichment,
) -> Result<Vec<VectorShape>> {
    let dim = map.dim;
    let q = eval_q1(dim, xhat);
    let jac = map.jacobian_from(&q)?;
    Ok(enrichment_at(map, &jac, &q, xhat, variant))
}

fn enrichment_at(
    map: &ElementMap,
    jac: &Jacobian,
    q: &Q1Values,
    xhat: &Point,
    variant: Enrichment,
) -> Vec<VectorShape> {
    let dim = map.dim;
    let (b, bref) = eval_bubble(dim, xhat);
    let gb = jac.physical_gradient(&bref);
    let anchor = || {
        let g = jac.physical_gradient(&q.grads[0]);
        let h = map.physical_hessian(jac, 0, &g, xhat);
        (g, h)
    };
    match variant {
        Enrichment::None => Vec::new(),
        Enrichment::PlainBubble => (0..dim)
            .map(|j| {
                let mut s = VectorShape::default();
                s.value[j] = b;
                s.grad[j] = gb;
                s
            })
            .collect(),
        Enrichment::GradientWeighted => {
            let (g, h) = anchor();
            (0..dim)
                .map(|j| {
                    let mut s = VectorShape::default();
                    s.value[j] = g[j] * b;
                    for k in 0..dim {
                        s.grad[j][k] = b * h[j][k] + g[j] * gb[k];
                    }
                    s
                })
                .collect()
        }
        Enrichment::ScalarGradient => {
            let (g, h) = anchor();
            let mut s = VectorShape::default();
            for a in 0..dim {
                s.value[a] = g[a] * b;
                for k in 0..dim {
                    s.grad[a][k] = b * h[a][k] + g[a] * gb[k];
                }
            }
            vec![s]
        }
    }
}

/// All local velocity basis functions of an element at one point, in gather
/// order: vertex functions (corner-major, component-minor) then enrichment.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub point: Point,
    pub det: f64,
    pub shapes: Vec<VectorShape>,
}

pub fn local_basis(map: &ElementMap, xhat: &Point, variant: Enrichment) -> Result<LocalBasis> {
    let dim = map.dim;
    let q = eval_q1(dim, xhat);
    let jac = map.jacobian_from(&q)?;
    let mut shapes = Vec::with_capacity(dim * q.n + variant.per_element(dim));
    let mut point = [0.0; 3];
    for c in 0..q.n {
        let g = jac.physical_gradient(&q.grads[c]);
        for a in 0..dim {
            point[a] += q.values[c] * map.corners[c][a];
            let mut s = VectorShape::default();
            s.value[a] = q.values[c];
            s.grad[a] = g;
            shapes.push(s);
        }
    }
    shapes.extend(enrichment_at(map, &jac, &q, xhat, variant));
    Ok(LocalBasis {
        point,
        det: jac.det,
        shapes,
    })
}

/// Degree-of-freedom layout for `V_h = [S_h]^d ⊕ B_h` and the dual pressure space.
///
/// Velocity dofs: all vertex dofs first (`dim * vertex + component`), then the
/// enrichment dofs element by element. Pressure dof `i` is dual cell `V_i`.
#[derive(Debug, Clone)]
pub struct DofMap {
    dim: usize,
    n_vertices: usize,
    n_elements: usize,
    enrichment: Enrichment,
    velocity_gather: Vec<usize>,
    pressure_gather: Vec<usize>,
    dirichlet: Vec<bool>,
}

impl DofMap {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn enrichment(&self) -> Enrichment {
        self.enrichment
    }

    pub fn n_vertex_dofs(&self) -> usize {
        self.dim * self.n_vertices
    }

    pub fn n_bubble_dofs(&self) -> usize {
        self.n_elements * self.enrichment.per_element(self.dim)
    }

    pub fn n_velocity(&self) -> usize {
        self.n_vertex_dofs() + self.n_bubble_dofs()
    }

    pub fn n_pressure(&self) -> usize {
        self.n_vertices
    }

    pub fn vertex_dof(&self, vertex: usize, component: usize) -> usize {
        self.dim * vertex + component
    }

    pub fn bubble_dof(&self, element: usize, j: usize) -> usize {
        self.n_vertex_dofs() + self.enrichment.per_element(self.dim) * element + j
    }

    pub fn local_velocity_len(&self) -> usize {
        self.dim * n_corners(self.dim) + self.enrichment.per_element(self.dim)
    }

    pub fn element_velocity_dofs(&self, element: usize) -> &[usize] {
        let n = self.local_velocity_len();
        &self.velocity_gather[element * n..(element + 1) * n]
    }

    pub fn element_pressure_dofs(&self, element: usize) -> &[usize] {
        let n = n_corners(self.dim);
        &self.pressure_gather[element * n..(element + 1) * n]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn n_free(&self) -> usize {
        self.dirichlet.iter().filter(|c| !**c).count()
    }

    /// Indices of unconstrained velocity dofs, ascending.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.n_velocity()).filter(|&s| !self.dirichlet[s]).collect()
    }

    /// Replace the constraint set: `constrained(vertex, component)` decides
    /// each vertex dof. Enrichment dofs are never constrained.
    pub fn with_vertex_constraints<F>(mut self, constrained: F) -> Self
    where
        F: Fn(usize, usize) -> bool,
    {
        for v in 0..self.n_vertices {
            for a in 0..self.dim {
                let s = self.vertex_dof(v, a);
                self.dirichlet[s] = constrained(v, a);
            }
        }
        self
    }
}

/// Build the dof map; vertex dofs on `mesh.dirichlet_vertices()` are clamped.
pub fn build_dofmap(mesh: &Mesh, dual: &DualMesh, enrichment: Enrichment) -> DofMap {
    debug_assert_eq!(dual.cell_volumes().len(), mesh.n_vertices());
    let dim = mesh.dim();
    let nc = n_corners(dim);
    let m = enrichment.per_element(dim);
    let mut map = DofMap {
        dim,
        n_vertices: mesh.n_vertices(),
        n_elements: mesh.n_elements(),
        enrichment,
        velocity_gather: Vec::with_capacity(mesh.n_elements() * (dim * nc + m)),
        pressure_gather: Vec::with_capacity(mesh.n_elements() * nc),
        dirichlet: Vec::new(),
    };
    for k in 0..mesh.n_elements() {
        for &v in mesh.element(k) {
            for a in 0..dim {
                map.velocity_gather.push(dim * v + a);
            }
            map.pressure_gather.push(v);
        }
        for j in 0..m {
            map.velocity_gather.push(dim * mesh.n_vertices() + m * k + j);
        }
    }
    map.dirichlet = vec![false; map.n_velocity()];
    for &v in mesh.dirichlet_vertices() {
        for a in 0..dim {
            map.dirichlet[dim * v + a] = true;
        }
    }
    map
}
