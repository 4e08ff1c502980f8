//! Primal quad/hex meshes, the vertex-centred dual mesh and vertex patches.

use std::collections::BTreeSet;
use std::io::{self, Write};

use crate::error::{FemError, Result};
use crate::fespace::{corner_bit, eval_q1, gauss_rule, n_corners, sub_box_rule, ElementMap};
use crate::Point;

/// One tagged boundary facet: facet `2*axis + side` of `element` is the
/// reference face `x̂_axis = side`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub element: usize,
    pub facet: usize,
    pub tag: String,
}

/// Local corners lying on reference facet `facet`, ascending.
pub fn facet_corners(dim: usize, facet: usize) -> Vec<usize> {
    let (axis, side) = (facet / 2, facet % 2);
    (0..n_corners(dim))
        .filter(|&c| corner_bit(c, axis) == side)
        .collect()
}

/// Primal mesh of quadrilaterals (dim 2) or hexahedra (dim 3).
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    connectivity: Vec<usize>,
    boundary_facets: Vec<BoundaryFacet>,
    boundary_vertices: BTreeSet<usize>,
    dirichlet_vertices: BTreeSet<usize>,
    domain_volume: f64,
}

impl Mesh {
    /// Validates connectivity and element orientation. `domain_volume` is the
    /// analytic volume of the meshed domain; boundary vertices are collected
    /// from the tagged facets.
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        connectivity: Vec<usize>,
        boundary_facets: Vec<BoundaryFacet>,
        dirichlet_vertices: BTreeSet<usize>,
        domain_volume: f64,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(FemError::InvalidInput(format!("dimension must be 2 or 3, got {dim}")));
        }
        let nc = n_corners(dim);
        if connectivity.is_empty() || connectivity.len() % nc != 0 {
            return Err(FemError::InvalidInput(format!(
                "connectivity length {} is not a positive multiple of {nc}",
                connectivity.len()
            )));
        }
        for (k, el) in connectivity.chunks(nc).enumerate() {
            if let Some(&v) = el.iter().find(|&&v| v >= vertices.len()) {
                return Err(FemError::InvalidInput(format!(
                    "element {k} references missing vertex {v}"
                )));
            }
            let distinct: BTreeSet<_> = el.iter().collect();
            if distinct.len() != nc {
                return Err(FemError::InvalidInput(format!("element {k} repeats a vertex")));
            }
        }
        let n_elements = connectivity.len() / nc;
        let mut boundary_vertices = BTreeSet::new();
        for f in &boundary_facets {
            if f.element >= n_elements || f.facet >= 2 * dim {
                return Err(FemError::InvalidInput(format!(
                    "boundary facet ({}, {}) out of range",
                    f.element, f.facet
                )));
            }
            for c in facet_corners(dim, f.facet) {
                boundary_vertices.insert(connectivity[f.element * nc + c]);
            }
        }
        if let Some(&v) = dirichlet_vertices.iter().find(|&&v| v >= vertices.len()) {
            return Err(FemError::InvalidInput(format!("Dirichlet vertex {v} does not exist")));
        }
        let mesh = Mesh {
            dim,
            vertices,
            connectivity,
            boundary_facets,
            boundary_vertices,
            dirichlet_vertices,
            domain_volume,
        };
        let rule = gauss_rule(dim, 4)?;
        for k in 0..n_elements {
            let map = ElementMap::new(&mesh, k);
            for p in &rule.points {
                map.jacobian(p)?;
            }
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.connectivity.len() / n_corners(self.dim)
    }

    /// Vertex indices of element `k` in reference corner order.
    pub fn element(&self, k: usize) -> &[usize] {
        let nc = n_corners(self.dim);
        &self.connectivity[k * nc..(k + 1) * nc]
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn boundary_vertices(&self) -> &BTreeSet<usize> {
        &self.boundary_vertices
    }

    /// Vertices whose displacement is clamped by default.
    pub fn dirichlet_vertices(&self) -> &BTreeSet<usize> {
        &self.dirichlet_vertices
    }

    pub fn set_dirichlet_vertices(&mut self, vertices: BTreeSet<usize>) {
        self.dirichlet_vertices = vertices;
    }

    /// Analytic volume of the meshed domain.
    pub fn domain_volume(&self) -> f64 {
        self.domain_volume
    }

    pub fn element_volume(&self, k: usize) -> Result<f64> {
        let map = ElementMap::new(self, k);
        let rule = gauss_rule(self.dim, 3)?;
        let mut vol = 0.0;
        for (p, w) in rule.iter() {
            vol += w * map.jacobian(p)?.det;
        }
        Ok(vol)
    }

    pub fn total_volume(&self) -> Result<f64> {
        (0..self.n_elements()).map(|k| self.element_volume(k)).sum()
    }

    /// Largest element edge length.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for k in 0..self.n_elements() {
            let el = self.element(k);
            for (c, &v) in el.iter().enumerate() {
                for axis in 0..self.dim {
                    if corner_bit(c, axis) == 0 {
                        let w = el[c | (1 << axis)];
                        h = h.max(distance(&self.vertices[v], &self.vertices[w]));
                    }
                }
            }
        }
        h
    }

    /// Elements touching each vertex, ascending.
    pub fn vertex_elements(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for k in 0..self.n_elements() {
            for &v in self.element(k) {
                adj[v].push(k);
            }
        }
        adj
    }

    /// Element and reference coordinates of a physical point, found by Newton
    /// inversion of each candidate element map.
    pub fn locate(&self, x: &Point) -> Result<(usize, Point)> {
        let tol = 1e-10;
        for k in 0..self.n_elements() {
            let el = self.element(k);
            let scale = el
                .iter()
                .map(|&v| distance(&self.vertices[v], &self.vertices[el[0]]))
                .fold(0.0, f64::max);
            let inside_box = (0..self.dim).all(|a| {
                let lo = el.iter().map(|&v| self.vertices[v][a]).fold(f64::INFINITY, f64::min);
                let hi = el.iter().map(|&v| self.vertices[v][a]).fold(f64::NEG_INFINITY, f64::max);
                x[a] >= lo - tol * scale && x[a] <= hi + tol * scale
            });
            if !inside_box {
                continue;
            }
            let map = ElementMap::new(self, k);
            let mut xhat = [0.5, 0.5, if self.dim == 3 { 0.5 } else { 0.0 }];
            for _ in 0..50 {
                let fx = map.map_point(&xhat);
                let jac = map.jacobian(&xhat)?;
                let mut delta = [0.0; 3];
                let mut err: f64 = 0.0;
                for b in 0..self.dim {
                    for a in 0..self.dim {
                        delta[b] += jac.inverse[b][a] * (x[a] - fx[a]);
                    }
                    err = err.max(delta[b].abs());
                }
                for b in 0..self.dim {
                    xhat[b] += delta[b];
                }
                if err < 1e-14 {
                    break;
                }
            }
            if (0..self.dim).all(|a| xhat[a] >= -1e-9 && xhat[a] <= 1.0 + 1e-9) {
                for a in 0..self.dim {
                    xhat[a] = xhat[a].clamp(0.0, 1.0);
                }
                return Ok((k, xhat));
            }
        }
        Err(FemError::PointOutside {
            x: x[0],
            y: x[1],
            z: x[2],
        })
    }

    /// Legacy ASCII VTK unstructured grid (cell types 9/12) with optional
    /// per-vertex and per-cell scalar or vector fields.
    pub fn write_vtk<W: Write>(
        &self,
        out: &mut W,
        point_fields: &[(&str, VtkField<'_>)],
        cell_fields: &[(&str, VtkField<'_>)],
    ) -> io::Result<()> {
        let nc = n_corners(self.dim);
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "dualpress mesh")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {} double", self.n_vertices())?;
        for p in &self.vertices {
            writeln!(out, "{} {} {}", p[0], p[1], p[2])?;
        }
        let n_el = self.n_elements();
        writeln!(out, "CELLS {} {}", n_el, n_el * (nc + 1))?;
        // VTK wants counter-clockwise corner order per face
        let order: &[usize] = if self.dim == 2 {
            &[0, 1, 3, 2]
        } else {
            &[0, 1, 3, 2, 4, 5, 7, 6]
        };
        for k in 0..n_el {
            let el = self.element(k);
            write!(out, "{nc}")?;
            for &c in order {
                write!(out, " {}", el[c])?;
            }
            writeln!(out)?;
        }
        writeln!(out, "CELL_TYPES {n_el}")?;
        let ty = if self.dim == 2 { 9 } else { 12 };
        for _ in 0..n_el {
            writeln!(out, "{ty}")?;
        }
        write_vtk_fields(out, "POINT_DATA", self.n_vertices(), point_fields)?;
        write_vtk_fields(out, "CELL_DATA", n_el, cell_fields)?;
        Ok(())
    }
}

/// Field attached to a VTK export; vectors are stored `dim`-strided.
#[derive(Debug, Clone, Copy)]
pub enum VtkField<'a> {
    Scalar(&'a [f64]),
    Vector { dim: usize, data: &'a [f64] },
}

fn write_vtk_fields<W: Write>(
    out: &mut W,
    header: &str,
    n: usize,
    fields: &[(&str, VtkField<'_>)],
) -> io::Result<()> {
    if fields.is_empty() {
        return Ok(());
    }
    writeln!(out, "{header} {n}")?;
    for (name, field) in fields {
        match field {
            VtkField::Scalar(data) => {
                writeln!(out, "SCALARS {name} double 1")?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for v in data.iter().take(n) {
                    writeln!(out, "{v}")?;
                }
            }
            VtkField::Vector { dim, data } => {
                writeln!(out, "VECTORS {name} double")?;
                for i in 0..n {
                    let mut v = [0.0; 3];
                    v[..*dim].copy_from_slice(&data[i * dim..(i + 1) * dim]);
                    writeln!(out, "{} {} {}", v[0], v[1], v[2])?;
                }
            }
        }
    }
    Ok(())
}

fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Structured grid of axis-aligned cells on `Π [0, lengths_k]`; every boundary
/// vertex is clamped. Facet tags: `xmin`, `xmax`, `ymin`, `ymax`, `zmin`, `zmax`.
pub fn generate_rect_grid(lengths: &[f64], counts: &[usize]) -> Result<Mesh> {
    generate_rect_grid_at(&[0.0; 3], lengths, counts)
}

/// As [`generate_rect_grid`] with the lower corner at `origin`.
pub fn generate_rect_grid_at(origin: &Point, lengths: &[f64], counts: &[usize]) -> Result<Mesh> {
    let dim = lengths.len();
    if dim != counts.len() || !(dim == 2 || dim == 3) {
        return Err(FemError::InvalidInput(format!(
            "need 2 or 3 extents and matching counts, got {} and {}",
            lengths.len(),
            counts.len()
        )));
    }
    if let Some(l) = lengths.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
        return Err(FemError::InvalidInput(format!("extent {l} must be positive")));
    }
    if counts.contains(&0) {
        return Err(FemError::InvalidInput("element counts must be at least 1".into()));
    }
    let mut nv = [1usize; 3];
    let mut ne = [1usize; 3];
    for k in 0..dim {
        nv[k] = counts[k] + 1;
        ne[k] = counts[k];
    }
    let vid = |i: [usize; 3]| i[0] + nv[0] * (i[1] + nv[1] * i[2]);
    let mut vertices = Vec::with_capacity(nv.iter().product());
    for kz in 0..nv[2] {
        for ky in 0..nv[1] {
            for kx in 0..nv[0] {
                let idx = [kx, ky, kz];
                let mut p = [0.0; 3];
                for a in 0..dim {
                    p[a] = origin[a] + lengths[a] * idx[a] as f64 / counts[a] as f64;
                }
                vertices.push(p);
            }
        }
    }
    let nc = n_corners(dim);
    let mut connectivity = Vec::with_capacity(ne.iter().product::<usize>() * nc);
    let mut facets = Vec::new();
    const TAGS: [[&str; 2]; 3] = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];
    let mut element = 0;
    for ez in 0..ne[2] {
        for ey in 0..ne[1] {
            for ex in 0..ne[0] {
                let e = [ex, ey, ez];
                for c in 0..nc {
                    let mut i = e;
                    for a in 0..dim {
                        i[a] += corner_bit(c, a);
                    }
                    connectivity.push(vid(i));
                }
                for a in 0..dim {
                    if e[a] == 0 {
                        facets.push(BoundaryFacet {
                            element,
                            facet: 2 * a,
                            tag: TAGS[a][0].into(),
                        });
                    }
                    if e[a] + 1 == ne[a] {
                        facets.push(BoundaryFacet {
                            element,
                            facet: 2 * a + 1,
                            tag: TAGS[a][1].into(),
                        });
                    }
                }
                element += 1;
            }
        }
    }
    let mut boundary = BTreeSet::new();
    for f in &facets {
        for c in facet_corners(dim, f.facet) {
            boundary.insert(connectivity[f.element * nc + c]);
        }
    }
    let volume = lengths.iter().product();
    Mesh::new(dim, vertices, connectivity, facets, boundary, volume)
}

/// Corners of Cook's membrane, counter-clockwise from the origin.
pub const COOK_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [48.0, 44.0], [48.0, 60.0], [0.0, 44.0]];

/// `n × n` mesh of Cook's membrane by bilinear interpolation of its corners.
/// Left edge vertices are clamped; facet tags `left`, `load` (right edge),
/// `bottom`, `top`.
pub fn generate_cook_mesh(n: usize) -> Result<Mesh> {
    if n < 1 {
        return Err(FemError::InvalidInput("Cook mesh needs n >= 1".into()));
    }
    let [p0, p1, p2, p3] = COOK_CORNERS;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        let t = j as f64 / n as f64;
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let mut p = [0.0; 3];
            for a in 0..2 {
                p[a] = (1.0 - s) * (1.0 - t) * p0[a]
                    + s * (1.0 - t) * p1[a]
                    + s * t * p2[a]
                    + (1.0 - s) * t * p3[a];
            }
            vertices.push(p);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut connectivity = Vec::with_capacity(4 * n * n);
    let mut facets = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            connectivity.extend_from_slice(&[vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)]);
            let mut tag = |facet: usize, name: &str| {
                facets.push(BoundaryFacet {
                    element: k,
                    facet,
                    tag: name.into(),
                })
            };
            if i == 0 {
                tag(0, "left");
            }
            if i + 1 == n {
                tag(1, "load");
            }
            if j == 0 {
                tag(2, "bottom");
            }
            if j + 1 == n {
                tag(3, "top");
            }
        }
    }
    let clamped = (0..=n).map(|j| vid(0, j)).collect();
    Mesh::new(2, vertices, connectivity, facets, clamped, cook_area())
}

/// Shoelace area of the Cook trapezoid.
pub fn cook_area() -> f64 {
    let c = COOK_CORNERS;
    let mut s = 0.0;
    for i in 0..4 {
        let (a, b) = (c[i], c[(i + 1) % 4]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s.abs()
}

/// Portion `K ∩ V_i` of a dual cell inside one element: the reference
/// sub-box of `K̂` at local corner `corner`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subcell {
    pub element: usize,
    pub corner: usize,
    pub vertex: usize,
    pub volume: f64,
}

/// Vertex-centred control volumes, held implicitly as per-element corner sub-boxes.
#[derive(Debug, Clone)]
pub struct DualMesh {
    dim: usize,
    cell_volumes: Vec<f64>,
    subcells: Vec<Subcell>,
}

impl DualMesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|V_i|` for every vertex `i`.
    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    /// Subcells ordered element-major, corner-minor.
    pub fn subcells(&self) -> &[Subcell] {
        &self.subcells
    }

    pub fn element_subcells(&self, element: usize) -> &[Subcell] {
        let nc = n_corners(self.dim);
        &self.subcells[element * nc..(element + 1) * nc]
    }
}

/// Split every element at the reference midpoints and gather the corner
/// pieces into control volumes.
pub fn build_dual(mesh: &Mesh) -> Result<DualMesh> {
    let dim = mesh.dim();
    let nc = n_corners(dim);
    let rules = (0..nc)
        .map(|c| sub_box_rule(dim, c, 3))
        .collect::<Result<Vec<_>>>()?;
    let mut cell_volumes = vec![0.0; mesh.n_vertices()];
    let mut subcells = Vec::with_capacity(mesh.n_elements() * nc);
    for k in 0..mesh.n_elements() {
        let map = ElementMap::new(mesh, k);
        for (c, &v) in mesh.element(k).iter().enumerate() {
            let mut volume = 0.0;
            for (p, w) in rules[c].iter() {
                volume += w * map.jacobian(p)?.det;
            }
            cell_volumes[v] += volume;
            subcells.push(Subcell {
                element: k,
                corner: c,
                vertex: v,
                volume,
            });
        }
    }
    Ok(DualMesh {
        dim,
        cell_volumes,
        subcells,
    })
}

/// The `2^dim` elements around an interior vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub center_vertex: usize,
    pub elements: Vec<usize>,
    pub vertices: Vec<usize>,
}

pub fn extract_patch(mesh: &Mesh, vertex: usize) -> Result<Patch> {
    if vertex >= mesh.n_vertices() {
        return Err(FemError::InvalidInput(format!("vertex {vertex} does not exist")));
    }
    if mesh.boundary_vertices().contains(&vertex) {
        return Err(FemError::BoundaryVertex { vertex });
    }
    let elements: Vec<usize> = (0..mesh.n_elements())
        .filter(|&k| mesh.element(k).contains(&vertex))
        .collect();
    let expected = n_corners(mesh.dim());
    if elements.len() != expected {
        return Err(FemError::IrregularValence {
            vertex,
            valence: elements.len(),
            expected,
        });
    }
    let vertices: BTreeSet<usize> = elements
        .iter()
        .flat_map(|&k| mesh.element(k).iter().copied())
        .collect();
    Ok(Patch {
        center_vertex: vertex,
        elements,
        vertices: vertices.into_iter().collect(),
    })
}

/// Value of the Q1 interpolant of vertex data at a reference point of element `k`.
pub fn interpolate_vertex_scalar(mesh: &Mesh, k: usize, xhat: &Point, data: &[f64]) -> f64 {
    let q = eval_q1(mesh.dim(), xhat);
    mesh.element(k)
        .iter()
        .enumerate()
        .map(|(c, &v)| q.values[c] * data[v])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn rect_grid_counts() {
        let m = generate_rect_grid(&[1.0, 1.0], &[1, 1]).unwrap();
        assert_eq!(m.n_elements(), 1);
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.vertices()[3], [1.0, 1.0, 0.0]);

        let m = generate_rect_grid(&[10.0, 2.0], &[2, 1]).unwrap();
        assert_eq!((m.n_elements(), m.n_vertices()), (2, 6));
        assert!(rel(m.total_volume().unwrap(), 20.0) < 1e-12);

        let m = generate_rect_grid(&[1.0, 1.0, 1.0], &[2, 2, 2]).unwrap();
        assert_eq!((m.n_elements(), m.n_vertices()), (8, 27));
        assert_eq!(m.n_vertices() - m.boundary_vertices().len(), 1);
    }

    #[test]
    fn rect_grid_rejects_bad_input() {
        assert!(generate_rect_grid(&[1.0, 1.0], &[0, 1]).is_err());
        assert!(generate_rect_grid(&[1.0, -1.0], &[1, 1]).is_err());
        assert!(generate_rect_grid(&[0.0, 1.0], &[1, 1]).is_err());
        assert!(generate_rect_grid(&[1.0], &[1]).is_err());
    }

    #[test]
    fn mesh_rejects_bad_connectivity() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(Mesh::new(2, v.clone(), vec![0, 1, 2, 7], vec![], BTreeSet::new(), 1.0).is_err());
        assert!(Mesh::new(2, v.clone(), vec![0, 1, 1, 3], vec![], BTreeSet::new(), 1.0).is_err());
        // swapped corners invert the map
        let err = Mesh::new(2, v, vec![1, 0, 3, 2], vec![], BTreeSet::new(), 1.0).unwrap_err();
        assert!(matches!(err, FemError::DegenerateElement { .. }));
    }

    #[test]
    fn cook_mesh_geometry() {
        let m = generate_cook_mesh(1).unwrap();
        let expect = [[0.0, 0.0], [48.0, 44.0], [0.0, 44.0], [48.0, 60.0]];
        for (c, &v) in m.element(0).iter().enumerate() {
            assert_eq!(m.vertices()[v][..2], expect[c]);
        }
        let m = generate_cook_mesh(2).unwrap();
        assert_eq!((m.n_elements(), m.n_vertices()), (4, 9));
        assert_eq!(m.vertices()[4][..2], [24.0, 37.0]);
        // trapezoid with parallel vertical sides 44 and 16, width 48
        assert_eq!(cook_area(), 48.0 * (44.0 + 16.0) / 2.0);
        for n in [1, 2, 3, 5, 8] {
            let m = generate_cook_mesh(n).unwrap();
            assert!(rel(m.total_volume().unwrap(), 1440.0) < 1e-10);
        }
        assert!(generate_cook_mesh(0).is_err());
    }

    #[test]
    fn dual_cells_unit_square() {
        let m = generate_rect_grid(&[1.0, 1.0], &[2, 2]).unwrap();
        let d = build_dual(&m).unwrap();
        let v = d.cell_volumes();
        assert!((v[4] - 0.25).abs() < 1e-15);
        for i in [0, 2, 6, 8] {
            assert!((v[i] - 0.0625).abs() < 1e-15);
        }
        for i in [1, 3, 5, 7] {
            assert!((v[i] - 0.125).abs() < 1e-15);
        }
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dual_partitions_every_mesh() {
        let meshes = vec![
            generate_rect_grid(&[10.0, 2.0], &[8, 4]).unwrap(),
            generate_rect_grid(&[1.0, 2.0, 3.0], &[3, 2, 4]).unwrap(),
            generate_cook_mesh(7).unwrap(),
        ];
        for m in meshes {
            let d = build_dual(&m).unwrap();
            let total: f64 = d.cell_volumes().iter().sum();
            assert!(rel(total, m.domain_volume()) < 1e-12);
            assert!(d.cell_volumes().iter().all(|&v| v > 0.0));
            for k in 0..m.n_elements() {
                let subs = d.element_subcells(k);
                assert_eq!(subs.len(), 1 << m.dim());
                let s: f64 = subs.iter().map(|s| s.volume).sum();
                assert!(rel(s, m.element_volume(k).unwrap()) < 1e-12);
            }
        }
    }

    #[test]
    fn dual_regularity_on_uniform_grids() {
        for (lengths, counts) in [(vec![1.0, 1.0], vec![5, 5]), (vec![2.0, 2.0, 2.0], vec![4, 4, 4])] {
            let m = generate_rect_grid(&lengths, &counts).unwrap();
            let d = build_dual(&m).unwrap();
            let max = d.cell_volumes().iter().cloned().fold(0.0, f64::max);
            let min = d.cell_volumes().iter().cloned().fold(f64::INFINITY, f64::min);
            let dim = lengths.len() as i32;
            assert!(min >= max / 2f64.powi(dim) - 1e-15);
            let h = lengths[0] / counts[0] as f64;
            for v in 0..m.n_vertices() {
                if !m.boundary_vertices().contains(&v) {
                    assert!(rel(d.cell_volumes()[v], h.powi(dim)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn patches() {
        let m = generate_rect_grid(&[1.0, 1.0], &[2, 2]).unwrap();
        let p = extract_patch(&m, 4).unwrap();
        assert_eq!(p.elements.len(), 4);
        assert_eq!(p.vertices.len(), 9);
        assert!(matches!(extract_patch(&m, 0), Err(FemError::BoundaryVertex { vertex: 0 })));

        let m = generate_rect_grid(&[1.0, 1.0, 1.0], &[2, 2, 2]).unwrap();
        let p = extract_patch(&m, 13).unwrap();
        assert_eq!((p.elements.len(), p.vertices.len()), (8, 27));
    }

    #[test]
    fn locate_points() {
        let m = generate_cook_mesh(4).unwrap();
        let (k, xhat) = m.locate(&[48.0, 60.0, 0.0]).unwrap();
        assert_eq!(k, 15);
        assert!((xhat[0] - 1.0).abs() < 1e-12 && (xhat[1] - 1.0).abs() < 1e-12);
        let x = [20.0, 40.0, 0.0];
        let (k, xhat) = m.locate(&x).unwrap();
        let back = ElementMap::new(&m, k).map_point(&xhat);
        assert!((back[0] - x[0]).abs() < 1e-10 && (back[1] - x[1]).abs() < 1e-10);
        assert!(m.locate(&[-1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn vtk_export_shape() {
        let m = generate_rect_grid(&[1.0, 1.0], &[2, 1]).unwrap();
        let p: Vec<f64> = (0..m.n_vertices()).map(|i| i as f64).collect();
        let u = vec![0.0; 2 * m.n_vertices()];
        let mut buf = Vec::new();
        m.write_vtk(
            &mut buf,
            &[("p", VtkField::Scalar(&p)), ("u", VtkField::Vector { dim: 2, data: &u })],
            &[],
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("CELLS 2 10"));
        assert!(s.contains("4 0 1 4 3"));
        assert!(s.contains("CELL_TYPES 2\n9\n9"));
        assert!(s.contains("POINT_DATA 6"));
    }
}
