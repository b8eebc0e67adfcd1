use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;

fn geom(target: usize) -> FlustrukGeometry {
    FlustrukGeometry { target_vertex_count: target, ..FlustrukGeometry::default() }
}

fn coarse() -> Mesh {
    build_flustruk_mesh(&geom(600)).unwrap()
}

fn edge_len(m: &Mesh, a: usize, b: usize) -> f64 {
    let (p, q) = (m.vertices[a], m.vertices[b]);
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn sigma_edges_match_topology(m: &Mesh) -> bool {
    let mut from_topology = Vec::new();
    for (key, owners) in m.edge_map() {
        if owners.len() == 2 && m.regions[owners[0].0] != m.regions[owners[1].0] {
            from_topology.push(key);
        }
    }
    let mut labelled: Vec<_> = m
        .boundary_edges
        .iter()
        .filter(|e| e.label == BoundaryLabel::Sigma)
        .map(|e| (e.v[0].min(e.v[1]), e.v[0].max(e.v[1])))
        .collect();
    labelled.sort();
    from_topology == labelled
}

#[test]
fn flustruk_mesh_at_full_resolution() {
    let g = geom(2500);
    let m = build_flustruk_mesh(&g).unwrap();
    let n = m.num_vertices() as f64;
    assert!((n / 2500.0 - 1.0).abs() <= 0.2, "{n} vertices");
    assert!(check_valid(&m).is_ok());
    assert!(m.region_area(Region::Solid) > 0.0 && m.region_area(Region::Fluid) > 0.0);
    let exact = g.length * g.height - PI * g.radius * g.radius;
    assert!((m.total_area() - exact).abs() / exact < 5e-3);
    assert!(sigma_edges_match_topology(&m));
    for label in [BoundaryLabel::GammaIn, BoundaryLabel::GammaOut, BoundaryLabel::GammaWall, BoundaryLabel::Sigma] {
        assert!(m.has_label(label), "{label:?} missing");
    }
}

#[test]
fn flag_root_is_clamped_on_the_circle() {
    let g = geom(300);
    let m = build_flustruk_mesh(&g).unwrap();
    assert!(check_valid(&m).is_ok());
    let labels = m.vertex_labels();
    let mut root = 0;
    for v in 0..m.n_solid_vertices {
        let p = m.vertices[v];
        let dist = ((p[0] - g.center).powi(2) + (p[1] - g.center).powi(2)).sqrt();
        if (dist - g.radius).abs() < 1e-12 {
            root += 1;
            assert!(labels[v].contains(&BoundaryLabel::GammaWall));
        }
    }
    assert!(root >= 4);
    let tip_x = m.vertices[..m.n_solid_vertices].iter().map(|p| p[0]).fold(f64::MIN, f64::max);
    assert!((tip_x - g.tip()[0]).abs() < 1e-14);
}

#[test]
fn infeasible_geometry_is_rejected() {
    let thick = FlustrukGeometry { flag_thickness: 0.11, ..geom(500) };
    assert!(matches!(build_flustruk_mesh(&thick), Err(FsiError::Geometry(_))));
    let long = FlustrukGeometry { flag_length: 2.4, ..geom(500) };
    assert!(build_flustruk_mesh(&long).is_err());
}

#[test]
fn area_sum_equals_boundary_polygon_area() {
    for m in [coarse(), build_channel_mesh(2.0, 0.5, 400).unwrap()] {
        let a = m.total_area();
        assert!((a - m.boundary_polygon_area()).abs() <= 1e-10 * a);
    }
}

#[test]
fn inverted_triangles_are_reported() {
    let mut m = coarse();
    let t = m.triangles.len() / 2;
    m.triangles[t].swap(0, 1);
    assert_eq!(check_valid(&m), Validity::Invalid(vec![(t, m.area(t))]));

    let mut m = coarse();
    let [a, b, c] = m.triangles[0];
    let mid = [(m.vertices[b][0] + m.vertices[c][0]) / 2.0, (m.vertices[b][1] + m.vertices[c][1]) / 2.0];
    let pa = m.vertices[a];
    m.vertices[a] = [2.0 * mid[0] - pa[0], 2.0 * mid[1] - pa[1]];
    match check_valid(&m) {
        Validity::Invalid(bad) => assert!(bad.iter().any(|(t, _)| *t == 0)),
        Validity::Ok => panic!("flip not detected"),
    }
}

#[test]
fn solid_motion() {
    let m = coarse();
    let ns = m.n_solid_vertices;
    assert_eq!(move_solid_vertices(&m, &vec![[0.0; 2]; ns], 0.1).unwrap(), m);

    let moved = move_solid_vertices(&m, &vec![[1.0, 0.0]; ns], 0.01).unwrap();
    for v in 0..ns {
        assert_eq!(moved.vertices[v], [m.vertices[v][0] + 0.01, m.vertices[v][1]]);
    }
    for v in ns..m.num_vertices() {
        assert_eq!(moved.vertices[v], m.vertices[v]);
    }
    assert_eq!(moved.vertex_ids, m.vertex_ids);
    for t in m.solid_triangles() {
        assert!((moved.area(t) - m.area(t)).abs() <= 1e-12 * m.area(t));
    }

    // u = 10 x e_x with dt = 0.01 stretches x by 1.1.
    let u: Vec<[f64; 2]> = m.vertices[..ns].iter().map(|p| [10.0 * p[0], 0.0]).collect();
    let stretched = move_solid_vertices(&m, &u, 0.01).unwrap();
    let ratio = stretched.region_area(Region::Solid) / m.region_area(Region::Solid);
    assert!((ratio - 1.1).abs() < 1e-12);

    let crush: Vec<[f64; 2]> = m.vertices[..ns].iter().map(|p| [-200.0 * (p[0] - 0.2), 0.0]).collect();
    assert!(matches!(move_solid_vertices(&m, &crush, 0.01), Err(FsiError::FlipOver { .. })));
}

#[test]
fn rigid_motions_and_edge_lengths() {
    let m = coarse();
    let ns = m.n_solid_vertices;
    let solid_edges: Vec<(usize, usize)> =
        m.edge_map().keys().copied().filter(|(a, b)| *a < ns && *b < ns).collect();
    let moved = move_solid_vertices(&m, &vec![[0.3, -0.7]; ns], 0.5).unwrap();
    for &(a, b) in &solid_edges {
        let (l0, l1) = (edge_len(&m, a, b), edge_len(&moved, a, b));
        assert!((l0 - l1).abs() <= 1e-15 * 4.0, "translation changed an edge");
    }
    // Linearised rotation about (0.3, 0.1): the length error scales like dt².
    let u: Vec<[f64; 2]> = m.vertices[..ns].iter().map(|p| [-(p[1] - 0.1), p[0] - 0.3]).collect();
    let err = |dt: f64| {
        let mv = move_solid_vertices(&m, &u, dt).unwrap();
        solid_edges
            .iter()
            .map(|&(a, b)| ((edge_len(&mv, a, b) - edge_len(&m, a, b)) / edge_len(&m, a, b)).abs())
            .fold(0.0, f64::max)
    };
    let (e2, e3, e4) = (err(1e-2), err(1e-3), err(1e-4));
    assert!((e2 / e3 / 100.0 - 1.0).abs() < 0.05, "{e2} {e3}");
    assert!((e3 / e4 / 100.0 - 1.0).abs() < 0.05, "{e3} {e4}");
}

#[test]
fn interface_of_the_flag() {
    let m = coarse();
    let lines = extract_interface(&m).unwrap();
    assert_eq!(lines.len(), 1);
    let l = &lines[0];
    assert!(!l.closed);
    let first = m.vertices[l.vertices[0]];
    let last = m.vertices[*l.vertices.last().unwrap()];
    assert!(first[1] > last[1], "starts at the upper root corner");
    assert!(first[0] < 0.25 && last[0] < 0.25);
    // Fluid on the left: the first edge runs along the top of the flag towards the tip.
    assert!(m.vertices[l.vertices[1]][0] > first[0]);

    assert!(extract_interface(&build_channel_mesh(1.0, 1.0, 100).unwrap()).unwrap().is_empty());
}

#[test]
fn two_squares_give_two_closed_loops() {
    let m = build_box_with_solid_squares(1.0, 1.0, &[([0.2, 0.2], 0.2, 3), ([0.6, 0.5], 0.25, 4)], 0.05).unwrap();
    assert!(check_valid(&m).is_ok());
    let lines = extract_interface(&m).unwrap();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.closed));
    assert_eq!(lines[0].vertices.len() + lines[1].vertices.len(), 12 + 16);
    // Traversed clockwise around each square, which keeps the fluid on the left.
    for l in &lines {
        let area: f64 = (0..l.vertices.len())
            .map(|k| {
                let p = m.vertices[l.vertices[k]];
                let q = m.vertices[l.vertices[(k + 1) % l.vertices.len()]];
                0.5 * (p[0] * q[1] - q[0] * p[1])
            })
            .sum();
        assert!(area < 0.0);
    }
}

#[test]
fn remesh_of_unmoved_mesh() {
    let m = coarse();
    let r = remesh_fluid(&m, 25.0).unwrap();
    assert!(check_valid(&r).is_ok());
    let nf = |m: &Mesh| m.num_vertices() - m.n_solid_vertices;
    assert!((nf(&r) as f64 / nf(&m) as f64 - 1.0).abs() < 0.3);
    assert_eq!(r.vertices[..r.n_solid_vertices], m.vertices[..m.n_solid_vertices]);
    assert!(sigma_edges_match_topology(&r));
    assert_eq!(extract_interface(&r).unwrap(), extract_interface(&m).unwrap());
    let total = m.total_area();
    assert!((r.total_area() - total).abs() <= 1e-10 * total);
}

#[test]
fn remesh_after_translation() {
    let m = coarse();
    let ns = m.n_solid_vertices;
    let moved = move_solid_vertices(&m, &vec![[1.0, 0.0]; ns], 0.01).unwrap();
    let r = remesh_fluid(&moved, 25.0).unwrap();
    assert!(check_valid(&r).is_ok());
    assert_eq!(r.vertices[..ns], moved.vertices[..ns]);
    assert_eq!(r.triangles[..m.solid_triangles().count()], m.triangles[..m.solid_triangles().count()]);
    let total = r.total_area();
    let fluid = r.region_area(Region::Fluid);
    assert!((fluid - (total - r.region_area(Region::Solid))).abs() <= 1e-10 * total);
    assert!((total - r.boundary_polygon_area()).abs() <= 1e-10 * total);
    // Every outer vertex of the original mesh survives at the same place.
    let outer: Vec<_> = m
        .boundary_edges
        .iter()
        .filter(|e| e.label != BoundaryLabel::Sigma)
        .flat_map(|e| e.v)
        .filter(|&v| v >= ns)
        .map(|v| (m.vertex_ids[v], m.vertices[v]))
        .collect();
    for (id, p) in outer {
        let k = r.vertex_ids.iter().position(|&x| x == id).expect("boundary vertex kept");
        assert_eq!(r.vertices[k], p);
    }
    assert_eq!(extract_interface(&r).unwrap()[0].ids, extract_interface(&m).unwrap()[0].ids);
}

#[test]
fn folded_flag_cannot_be_remeshed() {
    let m = coarse();
    let ns = m.n_solid_vertices;
    // Push the tip end up through the channel wall.
    let u: Vec<[f64; 2]> = m.vertices[..ns].iter().map(|p| [0.0, 40.0 * (p[0] - 0.24).max(0.0)]).collect();
    let moved = move_solid_vertices(&m, &u, 0.1).unwrap();
    assert!(remesh_fluid(&moved, 25.0).is_err());
}

#[test]
fn interpolation_reproduces_linears() {
    let old = coarse();
    let new = build_flustruk_mesh(&geom(900)).unwrap();
    let f = |p: &Point| [2.0 * p[0] + 3.0 * p[1], 1.5];
    let field: Vec<[f64; 2]> = old.vertices.iter().map(f).collect();
    let out = interpolate_to_new_mesh(&old, &field, &new, 1e-6 * 0.41).unwrap();
    for (p, v) in new.vertices.iter().zip(&out) {
        assert!((v[0] - f(p)[0]).abs() < 1e-12, "{p:?} {v:?} {:?}", f(p));
        assert!((v[1] - 1.5).abs() < 1e-14);
    }
}

#[test]
fn interpolation_error_is_second_order() {
    let q = |p: &Point| [p[0] * p[0] + 3.0 * p[0] * p[1] - p[1] * p[1]];
    let err = |n: usize| {
        let coarse = build_channel_mesh(1.0, 1.0, n).unwrap();
        let fine = build_channel_mesh(1.0, 1.0, 4 * n).unwrap();
        let field: Vec<[f64; 1]> = coarse.vertices.iter().map(q).collect();
        let there = interpolate_to_new_mesh(&coarse, &field, &fine, 1e-6).unwrap();
        let back = interpolate_to_new_mesh(&fine, &there, &coarse, 1e-6).unwrap();
        let _ = back;
        fine.vertices.iter().zip(&there).map(|(p, v)| (v[0] - q(p)[0]).abs()).fold(0.0, f64::max)
    };
    let ratio = err(150) / err(600);
    assert!((2.5..6.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn points_outside_are_rejected_beyond_tolerance() {
    let m = build_channel_mesh(1.0, 1.0, 100).unwrap();
    let loc = Locator::new(&m, None);
    let near = loc.locate_within([1.0 + 1e-8, 0.5], None, 1e-6).unwrap();
    assert!(near.distance > 0.0 && near.distance < 1e-7);
    assert!(matches!(loc.locate_within([1.01, 0.5], None, 1e-6), Err(FsiError::PointOutside { .. })));
}

#[test]
fn text_round_trip_is_exact() {
    let m = remesh_fluid(&coarse(), 25.0).unwrap();
    let mut buf = Vec::new();
    write_text(&m, &mut buf).unwrap();
    let back = read_text(buf.as_slice()).unwrap();
    assert_eq!(back, m);
    assert!(read_text("vertices 1\n0 0.0\n".as_bytes()).is_err());
}

#[test]
fn vtk_has_expected_sections() {
    let m = coarse();
    let u = vec![[1.0, 2.0]; m.num_vertices()];
    let mut buf = Vec::new();
    write_vtk(&m, &VtkFields { velocity: Some(&u), ..Default::default() }, &mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    for key in ["UNSTRUCTURED_GRID", "VECTORS velocity", "SCALARS pressure", "VECTORS displacement", "SCALARS region"] {
        assert!(s.contains(key), "{key}");
    }
    assert!(s.contains(&format!("POINTS {} double", m.num_vertices())));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn remeshed_meshes_keep_their_invariants(vx in -1.0..1.0f64, vy in -1.0..1.0f64, w in -2.0..2.0f64) {
        let m = coarse();
        let ns = m.n_solid_vertices;
        let u: Vec<[f64; 2]> = m.vertices[..ns]
            .iter()
            .map(|p| [vx - w * (p[1] - 0.2), vy + w * (p[0] - 0.25)])
            .collect();
        let r = remesh_fluid(&move_solid_vertices(&m, &u, 0.005).unwrap(), 25.0).unwrap();
        prop_assert!(check_valid(&r).is_ok());
        prop_assert!(sigma_edges_match_topology(&r));
        let a = r.total_area();
        prop_assert!((a - r.boundary_polygon_area()).abs() <= 1e-10 * a);
        let again = remesh_fluid(&r, 25.0).unwrap();
        prop_assert_eq!(extract_interface(&again).unwrap(), extract_interface(&r).unwrap());
    }
}
