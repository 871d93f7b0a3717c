use emsource::forward::{assemble_trace_gradient, assemble_traces, ForwardConfig, Want};
use emsource::source::{gradient_source, reference_source};
use emsource::volume::QuadratureOrders;
use emsource::{DomainGeometry, Error, ForwardSolver, FrequencyPoint, MediumParams, Point, Poly, SourcePair, SurfaceMesh, C64};

fn light_solver(m: MediumParams) -> ForwardSolver {
    ForwardSolver::new(
        m,
        ForwardConfig {
            orders: QuadratureOrders::new(24, 12, 24),
            nodes_per_wavelength: 6.0,
        },
    )
}

fn source() -> SourcePair {
    reference_source(&DomainGeometry::unit_ball()).unwrap()
}

fn max_rel(a: &[emsource::CVec3], b: &[emsource::CVec3]) -> f64 {
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

#[test]
fn batch_matches_reference_loops() {
    let m = MediumParams::new(1.3, 0.8).unwrap();
    let sol = light_solver(m);
    let s = source();
    let mesh = SurfaceMesh::sphere(Point::zeros(), 1.0, 4, 8).unwrap();
    let alpha = vec![0.7; mesh.len()];
    for omega in [C64::new(2.0, 0.0), C64::new(3.0, 0.5), C64::new(-1.5, 0.2)] {
        let fp = FrequencyPoint::new(omega, &m);
        let b = &sol.fields_batch(&[&s], &mesh.nodes, &[omega], Want::ALL).unwrap()[0][0];
        let r = sol.radiate_fields(&s, &mesh.nodes, &fp).unwrap();
        assert!(max_rel(&r.e, &b.e) < 1e-12);
        assert!(max_rel(&r.h, &b.h) < 1e-12);
        let (te, ta) = assemble_traces(&mesh, &b.e, &b.h, &alpha);
        assert!(max_rel(&sol.boundary_trace_tangential_e(&s, &mesh, &fp).unwrap(), &te) < 1e-12);
        assert!(max_rel(&sol.boundary_trace_absorbing(&s, &mesh, &fp, &alpha).unwrap(), &ta) < 1e-12);
        let g = sol.trace_gradient_by_parts(&s, &mesh, &fp).unwrap();
        let ga = assemble_trace_gradient(&mesh, &b.e, &b.grad_e);
        let scale = g.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let err = g.iter().zip(&ga).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12 * scale, "gradient routes differ by {err:e}");
    }
}

#[test]
fn trace_gradient_matches_differences() {
    let m = MediumParams::unit();
    let sol = ForwardSolver::with_medium(m);
    let s = source();
    let fp = FrequencyPoint::new(2.0, &m);
    let mesh = SurfaceMesh::sphere(Point::zeros(), 1.1, 3, 4).unwrap();
    let b = &sol.fields_batch(&[&s], &mesh.nodes, &[fp.omega], Want::ALL).unwrap()[0][0];
    let h = 1e-4;
    for n in 0..mesh.len() {
        for j in 0..3 {
            let mut d = Point::zeros();
            d[j] = h;
            let f = sol.radiate_fields(&s, &[mesh.nodes[n] + d, mesh.nodes[n] - d], &fp).unwrap();
            for k in 0..3 {
                let fd = (f.e[0][k] - f.e[1][k]) / (2.0 * h);
                let err = (fd - b.grad_e[n][(j, k)]).norm();
                assert!(err < 1e-5 * (1.0 + fd.norm()), "{err:e}");
            }
        }
    }
}

#[test]
fn absorbing_trace_tends_to_tangential() {
    let m = MediumParams::unit();
    let sol = light_solver(m);
    let s = source();
    let mesh = SurfaceMesh::sphere(Point::zeros(), 1.0, 3, 6).unwrap();
    let fp = FrequencyPoint::new(C64::new(1.5, 0.3), &m);
    let te = sol.boundary_trace_tangential_e(&s, &mesh, &fp).unwrap();
    let ta = sol.boundary_trace_absorbing(&s, &mesh, &fp, &vec![1e-12; mesh.len()]).unwrap();
    assert!(max_rel(&te, &ta) < 1e-10);
    assert!(sol.boundary_trace_absorbing(&s, &mesh, &fp, &vec![0.0; mesh.len()]).is_err());
}

#[test]
fn fields_are_linear_in_the_source() {
    let m = MediumParams::unit();
    let sol = light_solver(m);
    let s = source();
    let c = C64::new(2.0, 3.0);
    let pts = [Point::new(1.0, 0.2, 0.0), Point::new(-0.3, 1.4, 0.5)];
    let fp = FrequencyPoint::new(2.0, &m);
    let a = sol.radiate_fields(&s, &pts, &fp).unwrap();
    let b = sol.radiate_fields(&s.scale(c), &pts, &fp).unwrap();
    let ca: Vec<_> = a.e.iter().map(|v| v * c).collect();
    assert!(max_rel(&ca, &b.e) < 1e-13);
    let sum = sol.radiate_fields(&s.add(&s.scale(c)).unwrap(), &pts, &fp).unwrap();
    let expect: Vec<_> = a.h.iter().map(|v| v * (c + 1.0)).collect();
    assert!(max_rel(&expect, &sum.h) < 1e-13);
}

#[test]
fn quadrature_self_convergence() {
    let m = MediumParams::unit();
    let s = source();
    let pts = [Point::new(0.0, 0.0, 1.0), Point::new(0.6, -0.8, 0.0), Point::new(0.9, 0.9, 0.9)];
    let fp = FrequencyPoint::new(2.0, &m);
    let cfg = |o| ForwardConfig {
        orders: o,
        nodes_per_wavelength: 12.0,
    };
    let o = QuadratureOrders::new(64, 32, 64);
    let a = ForwardSolver::new(m, cfg(o)).radiate_fields(&s, &pts, &fp).unwrap();
    let b = ForwardSolver::new(m, cfg(o.doubled())).radiate_fields(&s, &pts, &fp).unwrap();
    assert!(max_rel(&a.e, &b.e) < 1e-8);
    assert!(max_rel(&a.h, &b.h) < 1e-8);
}

#[test]
fn silver_muller_defect_decays() {
    let m = MediumParams::unit();
    let sol = light_solver(m);
    let s = source();
    let fp = FrequencyPoint::new(2.0, &m);
    let d: Vec<f64> = [10.0, 20.0, 40.0]
        .iter()
        .map(|r| sol.radiation_defect(&s, *r, &fp, 24).unwrap())
        .collect();
    assert!(d[0] / d[1] >= 1.8 && d[1] / d[2] >= 1.8, "{d:?}");
}

#[test]
fn conjugate_symmetry_for_real_sources() {
    let m = MediumParams::unit();
    let sol = light_solver(m);
    let s = source();
    let pts = [Point::new(1.0, 0.0, 0.3)];
    let w = C64::new(1.7, 0.4);
    let a = sol.radiate_fields(&s, &pts, &FrequencyPoint::new(w, &m)).unwrap();
    let b = sol.radiate_fields(&s, &pts, &FrequencyPoint::new(-w.conj(), &m)).unwrap();
    for k in 0..3 {
        assert!((a.e[0][k].conj() - b.e[0][k]).norm() < 1e-13);
        assert!((a.h[0][k].conj() - b.h[0][k]).norm() < 1e-13);
    }
}

fn probes() -> Vec<Point> {
    vec![
        Point::new(1.0, 0.0, 0.0),
        Point::new(0.0, 1.2, 0.3),
        Point::new(-0.7, 0.7, 0.8),
        Point::new(0.2, -0.3, -1.4),
    ]
}

#[test]
fn maxwell_and_helmholtz_residuals() {
    let m = MediumParams::unit();
    let sol = ForwardSolver::with_medium(m);
    let s = source();
    for w in [1.0, 2.0, 4.0] {
        let snap = sol.radiate_fields(&s, &probes(), &FrequencyPoint::new(w, &m)).unwrap();
        let rm = sol.residual_maxwell(&snap, &s, 1e-3).unwrap().relative();
        let rh = sol.residual_helmholtz(&snap, &s, 1e-3).unwrap().relative();
        assert!(rm < 1e-4 && rh < 1e-4, "ω={w}: {rm:e} {rh:e}");
    }
}

#[test]
fn residuals_are_second_order() {
    let m = MediumParams::unit();
    let sol = ForwardSolver::with_medium(m);
    let s = source();
    let snap = sol.radiate_fields(&s, &probes(), &FrequencyPoint::new(2.0, &m)).unwrap();
    let a = sol.residual_maxwell(&snap, &s, 0.04).unwrap();
    let b = sol.residual_maxwell(&snap, &s, 0.02).unwrap();
    let ratio = a.first.max(a.second) / b.first.max(b.second);
    assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
}

#[test]
fn targets_inside_support_are_rejected() {
    let m = MediumParams::unit();
    let sol = light_solver(m);
    let err = sol.radiate_fields(&source(), &[Point::new(0.1, 0.0, 0.0)], &FrequencyPoint::new(1.0, &m));
    assert!(matches!(err, Err(Error::InsideSupport { .. })));
}

#[test]
fn zero_source_radiates_nothing() {
    let m = MediumParams::unit();
    let sol = light_solver(m);
    let snap = sol
        .radiate_fields(&SourcePair::zero(), &[Point::new(0.0, 0.0, 0.0)], &FrequencyPoint::new(1.0, &m))
        .unwrap();
    assert_eq!(snap.e[0].norm(), 0.0);
}

#[test]
fn gradient_source_is_silent_outside() {
    let m = MediumParams::unit();
    // Second derivatives of the bump need a finer radial rule.
    let sol = ForwardSolver::new(
        m,
        ForwardConfig {
            orders: QuadratureOrders::new(96, 24, 48),
            nodes_per_wavelength: 12.0,
        },
    );
    let g = DomainGeometry::unit_ball();
    let phi = Poly::constant(1.0).add(&Poly::monomial(0.5, [1, 0, 0]));
    let grad = gradient_source(&phi, &g, 0.8).unwrap();
    assert!(!grad.is_divergence_free());
    let snap = sol.radiate_fields(&grad, &probes(), &FrequencyPoint::new(2.0, &m)).unwrap();
    let reference = sol.radiate_fields(&source(), &probes(), &FrequencyPoint::new(2.0, &m)).unwrap();
    let silent = snap.e.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let loud = reference.e.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(silent < 1e-5 * loud, "{silent:e} vs {loud:e}");
    assert!(sol.radiate_fields(&grad, &probes(), &FrequencyPoint::new(0.0, &m)).is_err());
}

#[test]
fn snapshot_csv_has_header_and_rows() {
    let m = MediumParams::unit();
    let snap = light_solver(m)
        .radiate_fields(&source(), &probes(), &FrequencyPoint::new(1.0, &m))
        .unwrap();
    let mut buf = vec![];
    snap.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], emsource::FieldSnapshot::CSV_HEADER);
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1].split(',').count(), 15);
}
