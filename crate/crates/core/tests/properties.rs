use std::collections::BTreeSet;

use dualpress::analysis::*;
use dualpress::assembly::*;
use dualpress::fespace::*;
use dualpress::mesh::*;
use dualpress::solve::sparse::CsrMatrix;
use dualpress::solve::{cholesky::EnvelopeCholesky, condense_and_solve, SolveOptions};
use dualpress::Point;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn patch_rank_is_affine_invariant(
        ox in -50.0..50.0f64,
        oy in -50.0..50.0f64,
        scale in 1e-2..1e2f64,
        sx in 1.0..4.0f64,
        sy in 1.0..4.0f64,
    ) {
        let geom = PatchGeometry { origin: [ox, oy, 0.0], scale, stretch: [sx, sy, 1.0] };
        let g = patch_rank_test_on(2, Enrichment::GradientWeighted, &geom).unwrap();
        prop_assert_eq!((g.rank, g.kernel_dim), (8, 1));
        prop_assert!(g.constants_in_kernel);
        let p = patch_rank_test_on(2, Enrichment::PlainBubble, &geom).unwrap();
        prop_assert_eq!((p.rank, p.kernel_dim), (7, 2));
    }

    #[test]
    fn patch_rank_3d_is_affine_invariant(
        o in prop::array::uniform3(-5.0..5.0f64),
        scale in 0.1..10.0f64,
        s in prop::array::uniform3(1.0..4.0f64),
    ) {
        let reference = patch_rank_test(3, Enrichment::GradientWeighted).unwrap();
        let geom = PatchGeometry { origin: o, scale, stretch: s };
        let r = patch_rank_test_on(3, Enrichment::GradientWeighted, &geom).unwrap();
        prop_assert_eq!((r.rank, r.kernel_dim), (reference.rank, reference.kernel_dim));
        prop_assert!(r.constants_in_kernel);
    }

    #[test]
    fn dual_cells_partition_the_domain(
        nx in 1usize..7, ny in 1usize..7, lx in 0.1..20.0f64, ly in 0.1..20.0f64,
    ) {
        let mesh = generate_rect_grid(&[lx, ly], &[nx, ny]).unwrap();
        let dual = build_dual(&mesh).unwrap();
        let total: f64 = dual.cell_volumes().iter().sum();
        prop_assert!((total - lx * ly).abs() <= 1e-12 * lx * ly);
        prop_assert!(dual.cell_volumes().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn divergence_of_zero_trace_fields_integrates_to_zero(n in 1usize..9) {
        let mesh = generate_cook_mesh(n).unwrap();
        let dual = build_dual(&mesh).unwrap();
        let dm = build_dofmap(&mesh, &dual, Enrichment::GradientWeighted);
        let b = assemble_b(&mesh, &dual, &dm).unwrap();
        let sums = b.transpose_matvec(&vec![1.0; b.nrows()]).unwrap();
        let scale = b.max_abs();
        for s in dm.n_vertex_dofs()..dm.n_velocity() {
            prop_assert!(sums[s].abs() <= 1e-12 * scale);
        }
    }
}

struct Quadratic;

impl ExactField for Quadratic {
    fn displacement(&self, x: &Point) -> Point {
        [x[0] * x[0] + 0.5 * x[0] * x[1], x[1] * x[1] - x[0], 0.0]
    }
    fn gradient(&self, x: &Point) -> [[f64; 3]; 3] {
        [[2.0 * x[0] + 0.5 * x[1], 0.5 * x[0], 0.0], [-1.0, 2.0 * x[1], 0.0], [0.0; 3]]
    }
    fn pressure(&self, _: &Point) -> f64 {
        0.0
    }
}

#[test]
fn nodal_interpolant_converges_at_expected_rates() {
    let mut h1 = Vec::new();
    let mut l2 = Vec::new();
    for k in 0..4 {
        let n = 2 << k;
        let mesh = generate_rect_grid(&[1.0, 1.0], &[n, n]).unwrap();
        let dual = build_dual(&mesh).unwrap();
        let dm = build_dofmap(&mesh, &dual, Enrichment::None);
        let u = interpolate(&mesh, &dm, &Quadratic).unwrap();
        let p = vec![0.0; dm.n_pressure()];
        let e = compute_errors(&mesh, &dual, &dm, &u, &p, &Quadratic).unwrap();
        h1.push(e.u_h1_semi);
        l2.push(e.u_l2);
    }
    for w in h1.windows(2) {
        let r = (w[0] / w[1]).log2();
        assert!((r - 1.0).abs() <= 0.1, "H1 rate {r}");
    }
    for w in l2.windows(2) {
        let r = (w[0] / w[1]).log2();
        assert!((r - 2.0).abs() <= 0.1, "L2 rate {r}");
    }
}

#[test]
fn enrichment_projection_improves_the_interpolant() {
    let mesh = generate_rect_grid(&[1.0, 1.0], &[4, 4]).unwrap();
    let dual = build_dual(&mesh).unwrap();
    let plain = build_dofmap(&mesh, &dual, Enrichment::None);
    let rich = build_dofmap(&mesh, &dual, Enrichment::GradientWeighted);
    let p = vec![0.0; dual.cell_volumes().len()];
    let e0 = compute_errors(&mesh, &dual, &plain, &interpolate(&mesh, &plain, &Quadratic).unwrap(), &p, &Quadratic).unwrap();
    let e1 = compute_errors(&mesh, &dual, &rich, &interpolate(&mesh, &rich, &Quadratic).unwrap(), &p, &Quadratic).unwrap();
    assert!(e1.u_l2 < e0.u_l2);
}

/// Average of the exact pressure over each dual cell.
fn cell_average_pressure(mesh: &Mesh, dual: &DualMesh, exact: &dyn ExactField) -> Vec<f64> {
    let mut p = vec![0.0; dual.cell_volumes().len()];
    for sub in dual.subcells() {
        let map = ElementMap::new(mesh, sub.element);
        let rule = sub_box_rule(mesh.dim(), sub.corner, 4).unwrap();
        for (xh, w) in rule.iter() {
            let det = map.jacobian(xh).unwrap().det;
            p[sub.vertex] += w * det * exact.pressure(&map.map_point(xh));
        }
    }
    for (pi, v) in p.iter_mut().zip(dual.cell_volumes()) {
        *pi /= v;
    }
    p
}

/// `rᵀ G⁻¹ r` on free dofs plus the `C⁻¹`-weighted constraint residual.
fn consistency_residual(level: usize) -> (f64, f64) {
    let bp = BeamParams::default();
    let exact = beam_exact(bp);
    let params = MaterialParams::from_young_poisson(bp.young, bp.poisson).unwrap();
    let mesh = generate_rect_grid(&[bp.length, bp.height], &[4 << level, 2 << level]).unwrap();
    let dual = build_dual(&mesh).unwrap();
    let dm = build_dofmap(&mesh, &dual, Enrichment::GradientWeighted);
    let sys = assemble_system(&mesh, &dual, &dm, &params, None, &[]).unwrap();
    let u = interpolate(&mesh, &dm, &exact).unwrap();
    let p = cell_average_pressure(&mesh, &dual, &exact);
    let au = sys.a.matvec(&u).unwrap();
    let btp = sys.b.transpose_matvec(&p).unwrap();
    let free = dm.free_dofs();
    let r: Vec<f64> = free.iter().map(|&s| au[s] + btp[s] - sys.f[s]).collect();
    let g = assemble_h1_gram(&mesh, &dm).unwrap().submatrix(&free, &free);
    let y = EnvelopeCholesky::factor(&g).unwrap().half_solve(&r).unwrap();
    let ru = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bu = sys.b.matvec(&u).unwrap();
    let rp = (0..p.len())
        .map(|i| (bu[i] - sys.c[i] * p[i] / params.lambda).powi(2) / sys.c[i])
        .sum::<f64>()
        .sqrt();
    (ru, rp)
}

#[test]
fn galerkin_residual_of_the_interpolant_vanishes_at_first_order() {
    let res: Vec<(f64, f64)> = (0..4).map(consistency_residual).collect();
    assert!(res.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1), "{res:?}");
    let (a, b) = (res[2], res[3]);
    let ru = (a.0 / b.0).log2();
    let rp = (a.1 / b.1).log2();
    assert!(ru >= 1.0, "momentum residual rate {ru} ({res:?})");
    assert!(rp >= 1.0, "constraint residual rate {rp} ({res:?})");
}

fn renumbered(mesh: &Mesh, perm: &[usize]) -> Mesh {
    // perm[old] = new
    let mut verts = vec![[0.0; 3]; mesh.n_vertices()];
    for (old, x) in mesh.vertices().iter().enumerate() {
        verts[perm[old]] = *x;
    }
    let conn: Vec<usize> = (0..mesh.n_elements())
        .flat_map(|k| mesh.element(k).iter().map(|&v| perm[v]).collect::<Vec<_>>())
        .collect();
    let dir: BTreeSet<usize> = mesh.dirichlet_vertices().iter().map(|&v| perm[v]).collect();
    Mesh::new(
        mesh.dim(),
        verts,
        conn,
        mesh.boundary_facets().to_vec(),
        dir,
        mesh.domain_volume(),
    )
    .unwrap()
}

fn solve_clamped_beam(mesh: &Mesh) -> (DofMap, Vec<f64>, Vec<f64>) {
    let params = MaterialParams::from_young_poisson(1500.0, 0.4999).unwrap();
    let dual = build_dual(mesh).unwrap();
    let dm = build_dofmap(mesh, &dual, Enrichment::GradientWeighted);
    let exact = beam_exact(BeamParams::default());
    let mut vals = vec![0.0; dm.n_velocity()];
    for &v in mesh.dirichlet_vertices() {
        let u = exact.displacement(&mesh.vertices()[v]);
        vals[dm.vertex_dof(v, 0)] = u[0];
        vals[dm.vertex_dof(v, 1)] = u[1];
    }
    let (_, sol) = solve_mixed(mesh, &dual, &dm, &params, &[], &vals, &SolveOptions::default()).unwrap();
    (dm, sol.u, sol.p)
}

#[test]
fn solution_is_invariant_under_vertex_renumbering() {
    let mesh = generate_rect_grid(&[10.0, 2.0], &[8, 4]).unwrap();
    let mut perm: Vec<usize> = (0..mesh.n_vertices()).collect();
    perm.shuffle(&mut rand::rngs::StdRng::seed_from_u64(5));
    let other = renumbered(&mesh, &perm);
    let (dm0, u0, p0) = solve_clamped_beam(&mesh);
    let (dm1, u1, p1) = solve_clamped_beam(&other);
    let umax = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pmax = p0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in 0..mesh.n_vertices() {
        for a in 0..2 {
            assert!((u0[dm0.vertex_dof(v, a)] - u1[dm1.vertex_dof(perm[v], a)]).abs() <= 1e-9 * umax);
        }
        assert!((p0[v] - p1[perm[v]]).abs() <= 1e-9 * pmax);
    }
}

#[test]
fn recovered_pressure_identity_holds_on_benchmarks() {
    let rep = run_beam(&BeamConfig {
        levels: 3,
        ..BeamConfig::default()
    })
    .unwrap();
    assert!(rep.levels.iter().all(|l| l.recovery_defect < 1e-12));
    let rep = run_beam(&BeamConfig {
        levels: 3,
        boundary: BeamBoundary::Clamped,
        ..BeamConfig::default()
    })
    .unwrap();
    assert!(rep.levels.iter().all(|l| l.recovery_defect < 1e-12));
}

#[test]
fn inf_sup_constant_settles_under_refinement() {
    let rep = inf_sup_test(&unit_square_sequence(3).unwrap()).unwrap();
    for w in rep.levels.windows(2).skip(1) {
        assert!(w[1].beta >= 0.9 * w[0].beta);
    }
    assert!(rep.levels.iter().all(|l| l.zero_modes == 1 && !l.spurious_modes));
}

#[test]
fn condensed_system_matrix_is_symmetric() {
    let params = MaterialParams::from_young_poisson(250.0, 0.49999).unwrap();
    let mesh = generate_cook_mesh(4).unwrap();
    let dual = build_dual(&mesh).unwrap();
    let dm = build_dofmap(&mesh, &dual, Enrichment::GradientWeighted);
    let sys = assemble_system(&mesh, &dual, &dm, &params, None, &[]).unwrap();
    let inv_c: Vec<f64> = sys.c.iter().map(|c| 1.0 / c).collect();
    let k: CsrMatrix = sys.a.add_scaled(params.lambda, &sys.b.gram_weighted(&inv_c).unwrap()).unwrap();
    assert!(k.asymmetry() <= 1e-12 * k.max_abs());
}

#[test]
fn cook_mixed_tip_is_stable_between_solvers() {
    let cfg = CookConfig {
        levels: 2,
        ..CookConfig::default()
    };
    let (mesh, dm, sol) = solve_cook(&cfg, 8).unwrap();
    let tip = evaluate_at(&mesh, &dm, &sol.u, &TipPoint::Corner.point()).unwrap()[1];
    let params = MaterialParams::from_young_poisson(cfg.young, cfg.poisson).unwrap();
    let dual = build_dual(&mesh).unwrap();
    let tr = [Traction::constant("load", [0.0, 100.0 / 16.0, 0.0])];
    let sys = apply_dirichlet(
        assemble_system(&mesh, &dual, &dm, &params, None, &tr).unwrap(),
        &dm,
        &vec![0.0; dm.n_velocity()],
    )
    .unwrap();
    let s2 = dualpress::solve::solve_saddle(&sys, &params, &SolveOptions::default()).unwrap();
    let tip2 = evaluate_at(&mesh, &dm, &s2.u, &TipPoint::Corner.point()).unwrap()[1];
    assert!((tip - tip2).abs() <= 1e-8 * tip.abs());
    let c = condense_and_solve(&sys, &params, &SolveOptions::default()).unwrap();
    assert_eq!(c.u, sol.u);
}
