use emsource::dataset_io::{read_dataset, read_header, save_dataset, load_dataset, write_dataset};
use emsource::forward::ForwardConfig;
use emsource::quadrature::adaptive_gk15;
use emsource::source::reference_source;
use emsource::spectral::{
    add_noise, boundary_traces, eps0_sq, epsilon_norms, surface_norm_sq, synthesize_dataset, BoundaryDataset,
    SynthesisOptions,
};
use emsource::volume::QuadratureOrders;
use emsource::{DomainGeometry, Error, ForwardSolver, MediumParams, Point, SourcePair, SurfaceMesh, C64};

fn solver() -> ForwardSolver {
    ForwardSolver::new(
        MediumParams::unit(),
        ForwardConfig {
            orders: QuadratureOrders::new(24, 12, 24),
            nodes_per_wavelength: 6.0,
        },
    )
}

fn mesh() -> SurfaceMesh {
    SurfaceMesh::sphere(Point::zeros(), 1.0, 4, 8).unwrap()
}

fn opts(k: f64, n: usize, gradients: bool) -> SynthesisOptions {
    SynthesisOptions {
        band_limit: k,
        n_freq: n,
        alpha: vec![1.0; 32],
        gradients,
    }
}

fn source() -> SourcePair {
    reference_source(&DomainGeometry::unit_ball()).unwrap()
}

fn dataset(k: f64, n: usize) -> BoundaryDataset {
    synthesize_dataset(&solver(), &source(), "reference", &mesh(), &opts(k, n, true)).unwrap()
}

#[test]
fn zero_source_gives_zero_dataset() {
    let ds = synthesize_dataset(&solver(), &SourcePair::zero(), "zero", &mesh(), &opts(2.0, 4, true)).unwrap();
    let n = epsilon_norms(&ds).unwrap();
    assert_eq!((n.eps0_sq, n.eps1_sq), (0.0, 0.0));
    assert_eq!(n.e0, f64::INFINITY);
    assert_eq!(n.e1, f64::INFINITY);
}

#[test]
fn frequency_rule_has_converged() {
    let a = eps0_sq(&dataset(2.0, 12)).unwrap();
    let b = eps0_sq(&dataset(2.0, 24)).unwrap();
    assert!((a - b).abs() < 1e-6 * b);
}

#[test]
fn gauss_rule_matches_adaptive_quadrature() {
    let ds = dataset(2.0, 16);
    let s = source();
    let m = mesh();
    let alpha = vec![1.0; m.len()];
    let sol = solver();
    let f = |w: f64| {
        let t = boundary_traces(&sol, &s, &m, &alpha, &[C64::new(w, 0.0)], false, None).unwrap();
        vec![C64::new(surface_norm_sq(&t[0].absorbing, &m, 0, None).unwrap(), 0.0)]
    };
    let adaptive = adaptive_gk15(f, 0.0, 2.0, 1e-10, 0.0, 200).unwrap()[0].re;
    let gauss = eps0_sq(&ds).unwrap();
    assert!((adaptive - gauss).abs() < 1e-6 * gauss, "{adaptive} vs {gauss}");
}

#[test]
fn data_norms_grow_with_the_band() {
    let e: Vec<_> = [1.0, 2.0, 3.0].iter().map(|k| epsilon_norms(&dataset(*k, 16)).unwrap()).collect();
    assert!(e[0].eps0_sq <= e[1].eps0_sq && e[1].eps0_sq <= e[2].eps0_sq);
    assert!(e[0].eps1_sq <= e[1].eps1_sq && e[1].eps1_sq <= e[2].eps1_sq);
    assert!(e[1].eps1_sq >= 0.0 && (e[1].e0 - (0.5 * e[1].eps0_sq.ln()).abs()).abs() < 1e-15);
}

#[test]
fn datasets_are_linear_and_norms_quadratic() {
    let c = C64::new(2.0, -1.0);
    let a = dataset(2.0, 8);
    let b = synthesize_dataset(&solver(), &source().scale(c), "scaled", &mesh(), &opts(2.0, 8, true)).unwrap();
    for (ra, rb) in a.absorbing.iter().zip(&b.absorbing) {
        for (va, vb) in ra.iter().zip(rb) {
            assert!((va * c - vb).norm() < 1e-12 * (1.0 + vb.norm()));
        }
    }
    let (na, nb) = (epsilon_norms(&a).unwrap(), epsilon_norms(&b).unwrap());
    assert!((nb.eps0_sq - c.norm_sqr() * na.eps0_sq).abs() < 1e-12 * nb.eps0_sq);
    assert!((nb.eps1_sq - c.norm_sqr() * na.eps1_sq).abs() < 1e-12 * nb.eps1_sq);
}

#[test]
fn norms_ignore_node_order() {
    let m = mesh();
    let perm: Vec<usize> = (0..m.len()).rev().collect();
    let a = epsilon_norms(&dataset(2.0, 8)).unwrap();
    let b = epsilon_norms(
        &synthesize_dataset(&solver(), &source(), "reference", &m.permuted(&perm).unwrap(), &opts(2.0, 8, true)).unwrap(),
    )
    .unwrap();
    assert!((a.eps0_sq - b.eps0_sq).abs() < 1e-12 * a.eps0_sq);
    assert!((a.eps1_sq - b.eps1_sq).abs() < 1e-12 * a.eps1_sq);
}

#[test]
fn noise_statistics() {
    let ds = dataset(2.0, 6);
    assert_eq!(add_noise(&ds, 0.0, 3).unwrap().absorbing, ds.absorbing);
    assert!(matches!(add_noise(&ds, -0.1, 3), Err(Error::InvalidArgument(_))));
    let level = 0.1;
    // Mean of the perturbation over many seeds.
    let seeds = 1000;
    let mut mean = vec![vec![emsource::CVec3::zeros(); ds.n_nodes()]; ds.n_freq()];
    for seed in 0..seeds {
        let noisy = add_noise(&ds, level, seed).unwrap();
        for (m, (n, c)) in mean.iter_mut().zip(noisy.absorbing.iter().zip(&ds.absorbing)) {
            for (mv, (nv, cv)) in m.iter_mut().zip(n.iter().zip(c)) {
                *mv += (nv - cv) / C64::new(seeds as f64, 0.0);
            }
        }
    }
    let clean = eps0_sq(&ds).unwrap();
    let mut mean_ds = ds.clone();
    mean_ds.absorbing = mean;
    // Weighted RMS of one component of the clean data.
    let area_band: f64 = ds.mesh.area() * ds.band_limit;
    let rms = (clean / (3.0 * area_band)).sqrt();
    let mean_rms = (eps0_sq(&mean_ds).unwrap() / (3.0 * area_band)).sqrt();
    assert!(mean_rms < 5.0 * level * rms / (seeds as f64).sqrt(), "{mean_rms} vs {rms}");
    // Energy of the noisy data.
    let vals: Vec<f64> = (0..100).map(|s| eps0_sq(&add_noise(&ds, level, 10_000 + s).unwrap()).unwrap()).collect();
    let avg = vals.iter().sum::<f64>() / 100.0;
    let sd = (vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / 99.0).sqrt();
    let expect = clean * (1.0 + level * level);
    assert!((avg - expect).abs() < 3.0 * sd / 10.0, "{avg} vs {expect} (sd {sd})");
    let again = add_noise(&ds, level, 7).unwrap();
    assert_eq!(again, add_noise(&ds, level, 7).unwrap());
}

#[test]
fn file_round_trip_is_bit_exact() {
    let ds = add_noise(&dataset(2.0, 5), 0.01, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.emds");
    save_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    let header = read_header(&path).unwrap();
    assert_eq!(header.provenance, ds.provenance);
    assert_eq!(header.n_freq, 5);
    assert!(header.has_gradients);
}

#[test]
fn damaged_files_are_rejected() {
    let ds = dataset(2.0, 3);
    let mut buf = vec![];
    write_dataset(&ds, &mut buf).unwrap();
    let truncated = &buf[..buf.len() - 8];
    assert!(matches!(read_dataset(truncated), Err(Error::Format(_))));
    let mut longer = buf.clone();
    longer.extend([0u8; 8]);
    assert!(matches!(read_dataset(&longer[..]), Err(Error::Format(_))));
    let text = String::from_utf8_lossy(&buf).replacen("\"schema_version\":1", "\"schema_version\":9", 1);
    assert!(matches!(read_dataset(text.as_bytes()), Err(Error::Format(_))));
    assert!(matches!(read_dataset(&b"garbage\n"[..]), Err(Error::Format(_))));
}

#[test]
fn dataset_csv_is_long_format() {
    let ds = dataset(2.0, 3);
    let mut buf = vec![];
    ds.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 32);
    assert_eq!(text.lines().next().unwrap(), BoundaryDataset::CSV_HEADER);
}
