//! The six pipelines. Each writes its artifacts into the output directory and
//! returns the checks it made.

use crate::config::{ExperimentConfig, SourceKind};
use crate::report::{Check, Relation, RunReport};
use anyhow::{bail, Context, Result};
use emsource::cavity::{ball_eigenvalues, monotonicity_check, write_modes_csv, Family};
use emsource::continuation::{
    bound_i0, bound_i1, harmonic_measure_lb, truncation_delta, ContinuationConfig, ContinuationFunctional,
    FunctionalKind,
};
use emsource::dataset_io::{load_dataset, save_dataset};
use emsource::field::div_field;
use emsource::geometry::Region;
use emsource::reconstruction::{
    assemble_operator, build_basis, reconstruct_with, stability_sweep, DataKind, DivFreeBasis, SweepConfig,
};
use emsource::source::{gradient_source, random_divfree_source, reference_source, sobolev_norm_with};
use emsource::spectral::{add_noise, eps0_sq, epsilon_norms, synthesize_dataset, BoundaryDataset, SynthesisOptions, TraceNorm};
use emsource::time_domain::{
    fourier_laplace_errors, plancherel_check, time_fields, KirchhoffConfig, PlancherelConfig, WaveSolution,
};
use emsource::{DomainGeometry, ForwardSolver, FrequencyPoint, Point, Poly, SourcePair, SurfaceMesh, C64};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Diag,
    Verify,
    Invert,
    Sweep,
    Cavity,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Synth,
        Command::Diag,
        Command::Verify,
        Command::Invert,
        Command::Sweep,
        Command::Cavity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Diag => "diag",
            Command::Verify => "verify",
            Command::Invert => "invert",
            Command::Sweep => "sweep",
            Command::Cavity => "cavity",
        }
    }
}

impl FromStr for Command {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .with_context(|| format!("unknown command {s:?}"))
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?))
}

struct Stages<'a> {
    report: &'a mut RunReport,
    clock: Instant,
}

impl Stages<'_> {
    fn lap(&mut self, stage: &str) {
        self.report.timings.push((stage.to_string(), self.clock.elapsed().as_secs_f64()));
        self.clock = Instant::now();
    }
}

/// Runs one pipeline, writing artifacts and the resolved config into `out`.
pub fn run_experiment(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?).context("writing resolved config")?;
    let mut report = RunReport::new(command.name());
    let mut stages = Stages {
        report: &mut report,
        clock: Instant::now(),
    };
    let result = match command {
        Command::Synth => synth(cfg, out, &mut stages),
        Command::Diag => diag(cfg, out, &mut stages),
        Command::Verify => verify(cfg, out, &mut stages),
        Command::Invert => invert(cfg, out, &mut stages),
        Command::Sweep => sweep(cfg, out, &mut stages),
        Command::Cavity => cavity(cfg, out, &mut stages),
    };
    result.with_context(|| format!("{} failed", command.name()))?;
    Ok(report)
}

pub fn build_source(cfg: &ExperimentConfig, geometry: &DomainGeometry) -> Result<SourcePair> {
    let s = match cfg.source.kind {
        SourceKind::Reference => reference_source(geometry),
        SourceKind::Random => random_divfree_source(geometry, cfg.source.degree, cfg.source_seed()),
        SourceKind::Gradient => {
            let phi = Poly::monomial(1.0, [1, 1, 0]).add(&Poly::constant(0.5));
            gradient_source(&phi, geometry, geometry.max_support_radius())
        }
    };
    s.context("building the source")
}

fn dataset(cfg: &ExperimentConfig, solver: &ForwardSolver, source: &SourcePair, mesh: &SurfaceMesh, gradients: bool) -> Result<BoundaryDataset> {
    let opts = SynthesisOptions {
        band_limit: cfg.band.band_limit,
        n_freq: cfg.band.n_freq,
        alpha: vec![cfg.alpha.value; mesh.len()],
        gradients,
    };
    let id = format!("{:?}-{}", cfg.source.kind, cfg.source_seed()).to_lowercase();
    synthesize_dataset(solver, source, &id, mesh, &opts).context("synthesizing boundary data")
}

fn noise_norm(clean: &BoundaryDataset, noisy: &BoundaryDataset) -> Result<f64> {
    let mut diff = noisy.clone();
    for (d, c) in diff.absorbing.iter_mut().zip(&clean.absorbing) {
        for (x, y) in d.iter_mut().zip(c) {
            *x -= y;
        }
    }
    Ok(eps0_sq(&diff)?.sqrt())
}

fn synth(cfg: &ExperimentConfig, out: &Path, st: &mut Stages) -> Result<()> {
    let geometry = cfg.geometry()?;
    let source = build_source(cfg, &geometry)?;
    let ds = dataset(cfg, &cfg.solver()?, &source, &cfg.mesh()?, true)?;
    st.lap("synthesize");
    let path = out.join("dataset.emds");
    save_dataset(&ds, &path)?;
    ds.write_csv(create(out, "traces.csv")?)?;
    let back = load_dataset(&path)?;
    st.report
        .push(Check::flag("synth.roundtrip", back.absorbing == ds.absorbing && back.omegas == ds.omegas));
    let norms = epsilon_norms(&ds)?;
    let mut w = create(out, "norms.csv")?;
    writeln!(w, "eps0_sq,eps1_sq")?;
    writeln!(w, "{:e},{:e}", norms.eps0_sq, norms.eps1_sq)?;
    st.report
        .push(Check::flag("synth.norms_finite", norms.eps0_sq.is_finite() && norms.eps1_sq.is_finite()));
    let level = cfg.noise.level;
    if level > 0.0 {
        let clean = norms.eps0_sq.sqrt();
        for (i, &seed) in cfg.noise.seeds.iter().enumerate() {
            let noisy = add_noise(&ds, level, seed)?;
            let ratio = noise_norm(&ds, &noisy)? / (level * clean);
            let spread = ratio.max(1.0 / ratio);
            st.report.push(Check::new(
                format!("synth.noise_ratio.seed{seed}"),
                spread,
                Relation::Le,
                cfg.tolerances.noise_factor,
            ));
            if i == 0 {
                save_dataset(&noisy, out.join("dataset_noisy.emds"))?;
            }
        }
    }
    st.lap("write");
    Ok(())
}

fn diag(cfg: &ExperimentConfig, out: &Path, st: &mut Stages) -> Result<()> {
    let geometry = cfg.geometry()?;
    let medium = cfg.medium()?;
    let source = build_source(cfg, &geometry)?;
    let mesh = cfg.mesh()?;
    let ds = dataset(cfg, &cfg.solver()?, &source, &mesh, true)?;
    let norms = epsilon_norms(&ds)?;
    st.lap("synthesize");
    let k_band = cfg.band.band_limit;
    let k_max = cfg.diagnostics.k_max_factor * k_band;
    let mut config = ContinuationConfig::new(k_band, k_max);
    if let Some(o) = ds.provenance.volume_orders {
        config.volume_orders = o;
    }
    let alpha = vec![cfg.alpha.value; mesh.len()];
    let f0 = ContinuationFunctional::new(FunctionalKind::I0, &source, &mesh, &medium, alpha.clone(), config)?;
    let f1 = ContinuationFunctional::new(FunctionalKind::I1, &source, &mesh, &medium, alpha, config)?;
    let tol = &cfg.tolerances;
    let kk = C64::new(k_band, 0.0);
    for (f, target, name) in [(&f0, norms.eps0_sq, "diag.i0_identity"), (&f1, norms.eps1_sq, "diag.i1_identity")] {
        let v = f.evaluate(kk)?;
        let err = if target == 0.0 { v.norm() } else { (v - 2.0 * target).norm() / (2.0 * target) };
        st.report.push(Check::new(name, err, Relation::Lt, tol.functional_identity));
    }
    let mut worst = 0.0f64;
    for j in 0..5 {
        let theta = -PI / 4.0 + (j as f64 + 0.5) * PI / 10.0;
        let k = C64::from_polar(k_band * (0.6 + 0.4 * j as f64), theta);
        for f in [&f0, &f1] {
            let straight = f.evaluate(k)?;
            let bent = f.evaluate_path(&[C64::new(k.re, 0.0), k])?;
            let scale = straight.norm();
            worst = worst.max(if scale == 0.0 { bent.norm() } else { (straight - bent).norm() / scale });
        }
    }
    st.report.push(Check::new("diag.path_agreement", worst, Relation::Lt, tol.path_agreement));
    st.lap("functionals");

    let d = geometry.diameter();
    let orders = cfg.diagnostics.sobolev_orders;
    let m1 = sobolev_norm_with(&source, 1, orders)?;
    let m2 = sobolev_norm_with(&source, 2, orders)?;
    let n = cfg.diagnostics.grid;
    let mut w = create(out, "sector_grid.csv")?;
    writeln!(w, "functional,re_k,im_k,abs_value,bound,ratio")?;
    for (f, m, name) in [(&f0, m1, "I0"), (&f1, m2, "I1")] {
        let mut ratios = vec![];
        for i in 0..n {
            let r = k_max * (i + 1) as f64 / n as f64;
            for j in 0..n {
                let theta = -PI / 4.0 + (j as f64 + 0.5) * PI / (2.0 * n as f64);
                let k = C64::from_polar(r, theta);
                let v = f.evaluate(k)?.norm();
                let b = match f.kind() {
                    FunctionalKind::I0 => bound_i0(k, m, d, &medium)?,
                    FunctionalKind::I1 => bound_i1(k, m, d, &medium)?,
                };
                writeln!(w, "{name},{:e},{:e},{v:e},{b:e},{:e}", k.re, k.im, v / b)?;
                ratios.push(v / b);
            }
        }
        ratios.sort_by(f64::total_cmp);
        let mid = ratios.len() / 2;
        let median = if ratios.len() % 2 == 0 { 0.5 * (ratios[mid - 1] + ratios[mid]) } else { ratios[mid] };
        let spread = ratios.last().copied().unwrap_or(0.0) / median;
        st.report
            .push(Check::new(format!("diag.growth_spread.{name}"), spread, Relation::Lt, tol.growth_spread));
    }
    st.lap("sector grid");

    let at_k = harmonic_measure_lb(k_band, k_band)?;
    st.report.push(Check::new("diag.harmonic_at_band", (at_k - 0.5).abs(), Relation::Le, 0.0));
    let at_root2 = harmonic_measure_lb(2f64.sqrt() * k_band, k_band)?;
    st.report.push(Check::new(
        "diag.harmonic_at_root2",
        (at_root2 - 1.0 / (PI * 3f64.sqrt())).abs(),
        Relation::Lt,
        tol.closed_form,
    ));
    let start = 2f64.powf(0.25) * k_band;
    let grid: Vec<f64> = (0..100)
        .map(|i| harmonic_measure_lb(start * (1.0 + 3.0 * i as f64 / 99.0), k_band))
        .collect::<emsource::Result<_>>()?;
    st.report
        .push(Check::flag("diag.harmonic_nonincreasing", grid.windows(2).all(|p| p[1] <= p[0])));
    let delta = truncation_delta(d, &medium);
    let closed = (2.0 * PI * (d + 1.0) * medium.slowness()).powf(-1.0 / 3.0);
    st.report
        .push(Check::new("diag.truncation_delta", (delta - closed).abs() / closed, Relation::Lt, tol.closed_form));
    let e = 2f64.powf(0.75) * delta.powi(-3) * k_band;
    let branch = delta * k_band.powf(2.0 / 3.0) * e.cbrt();
    let target = 2f64.powf(0.25) * k_band;
    st.report
        .push(Check::new("diag.truncation_branch", (branch - target).abs() / target, Relation::Lt, tol.closed_form));
    Ok(())
}

fn verify(cfg: &ExperimentConfig, out: &Path, st: &mut Stages) -> Result<()> {
    let geometry = cfg.geometry()?;
    let medium = cfg.medium()?;
    let v = &cfg.verify;
    let tol = &cfg.tolerances;
    let mut w = create(out, "verify.csv")?;
    writeln!(w, "quantity,index,value")?;

    // Seeded div-free sources, probed on a grid over the bounding box.
    let (lo, hi) = geometry.bounding_box();
    let grid: Vec<Point> = (0..11 * 11 * 11)
        .map(|i| {
            let t = |k: usize| k as f64 / 10.0;
            let f = Point::new(t(i % 11), t(i / 11 % 11), t(i / 121));
            lo + (hi - lo).component_mul(&f)
        })
        .collect();
    let mut worst_div = 0.0f64;
    let mut inside = true;
    for s in 0..v.divergence_sources {
        let seed = cfg.seed.wrapping_add(s as u64);
        let src = random_divfree_source(&geometry, cfg.source.degree, seed)?;
        for field in [&src.j_eps, &src.j_mu] {
            let scale = grid.iter().map(|p| field.eval(p).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let div = div_field(field, &grid)?.iter().map(|d| d.norm()).fold(0.0, f64::max) / scale;
            writeln!(w, "divergence,{seed},{div:e}")?;
            worst_div = worst_div.max(div);
        }
        if let Some(b) = src.support() {
            inside &= geometry.signed_distance_inside(&b.center) - b.radius > 0.0;
        }
    }
    st.report.push(Check::new("verify.divergence", worst_div, Relation::Lt, tol.divergence));
    st.report.push(Check::flag("verify.support_inside", inside));
    st.lap("divergence");

    let source = reference_source(&geometry)?;
    let solver = ForwardSolver::with_medium(medium);
    let support = source.support().context("reference source has a support")?;
    let probes: Vec<Point> = [[1.0, 0.2, -0.1], [0.0, 1.2, 0.3], [-0.7, 0.7, 0.8], [0.2, -0.3, -1.4]]
        .iter()
        .map(|p| support.center + Point::from(*p) * (support.radius / 0.8))
        .collect();
    for &omega in &v.residual_omegas {
        let snap = solver.radiate_fields(&source, &probes, &FrequencyPoint::new(omega, &medium))?;
        let rm = solver.residual_maxwell(&snap, &source, 1e-3)?.relative();
        let rh = solver.residual_helmholtz(&snap, &source, 1e-3)?.relative();
        writeln!(w, "residual_maxwell,{omega},{rm:e}")?;
        writeln!(w, "residual_helmholtz,{omega},{rh:e}")?;
        st.report.push(Check::new(format!("verify.residual_maxwell.w{omega}"), rm, Relation::Lt, tol.pde_residual));
        st.report
            .push(Check::new(format!("verify.residual_helmholtz.w{omega}"), rh, Relation::Lt, tol.pde_residual));
    }
    let snap = solver.radiate_fields(&source, &probes, &FrequencyPoint::new(2.0, &medium))?;
    let a = solver.residual_maxwell(&snap, &source, 0.04)?;
    let b = solver.residual_maxwell(&snap, &source, 0.02)?;
    let ratio = a.first.max(a.second) / b.first.max(b.second);
    st.report
        .push(Check::new("verify.richardson_ratio", (ratio - 4.0).abs(), Relation::Lt, tol.richardson_ratio));
    st.lap("residuals");

    let n = v.huygens_grid.max(2);
    let c = geometry.center();
    let r = geometry.inradius();
    let ball: Vec<Point> = (0..n * n * n)
        .map(|i| {
            let t = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1) as f64;
            Point::new(t(i % n), t(i / n % n), t(i / (n * n)))
        })
        .filter(|p| p.norm() <= 1.0)
        .map(|p| c + p * r)
        .collect();
    let start = time_fields(&source, &ball, 0.0, &medium)?.sup();
    let late = time_fields(&source, &ball, v.huygens_time, &medium)?.sup();
    let huygens = if start == 0.0 { late } else { late / start };
    writeln!(w, "huygens,0,{huygens:e}")?;
    st.report.push(Check::new("verify.huygens", huygens, Relation::Lt, tol.huygens));
    st.lap("huygens");

    let mesh = cfg.mesh()?;
    let wave = WaveSolution::new(&source, &medium, KirchhoffConfig::default())?;
    let count = v.fourier_points.clamp(1, mesh.len());
    let mut worst = 0.0f64;
    for i in 0..count {
        let x = mesh.nodes[i * mesh.len() / count];
        let t_max = wave.active_window(&x).map_or(1.0, |(_, t1)| t1 * 1.01);
        for (j, e) in fourier_laplace_errors(&solver, &source, &x, &v.fourier_omegas, t_max)?.into_iter().enumerate() {
            writeln!(w, "fourier_laplace,{},{e:e}", i * v.fourier_omegas.len() + j)?;
            worst = worst.max(e);
        }
    }
    st.report.push(Check::new("verify.fourier_laplace", worst, Relation::Lt, tol.fourier_laplace));
    st.lap("fourier-laplace");

    let coarse = SurfaceMesh::for_domain(&geometry, v.plancherel_resolution)?;
    let t_max = coarse
        .nodes
        .iter()
        .filter_map(|x| wave.active_window(x).map(|(_, t1)| t1))
        .fold(0.0, f64::max)
        * 1.01;
    let light = cfg.solver()?;
    let alpha = vec![cfg.alpha.value; coarse.len()];
    let p = plancherel_check(
        &light,
        &source,
        &coarse,
        &alpha,
        v.plancherel_omega_max,
        t_max,
        TraceNorm::Absorbing,
        &PlancherelConfig {
            max_tail_fraction: tol.plancherel,
            ..Default::default()
        },
    )?;
    writeln!(w, "plancherel,0,{:e}", p.mismatch)?;
    st.report.push(Check::new("verify.plancherel", p.mismatch, Relation::Lt, tol.plancherel));
    st.lap("plancherel");

    let phi = Poly::monomial(1.0, [1, 1, 0]).add(&Poly::constant(0.5));
    let grad = gradient_source(&phi, &geometry, geometry.max_support_radius())?;
    let fine = ForwardSolver::new(
        medium,
        emsource::forward::ForwardConfig {
            orders: emsource::volume::QuadratureOrders::new(48, 24, 48),
            nodes_per_wavelength: 6.0,
        },
    );
    let silent = eps0_sq(&dataset(cfg, &fine, &grad, &mesh, false)?)?;
    let loud = eps0_sq(&dataset(cfg, &fine, &source, &mesh, false)?)?;
    writeln!(w, "gradient_ratio,0,{:e}", silent / loud)?;
    st.report.push(Check::new("verify.gradient_ratio", silent / loud, Relation::Lt, tol.gradient_ratio));
    st.lap("gradient source");

    cavity_oracles(cfg, st)?;
    st.lap("cavity");
    Ok(())
}

fn basis_for(cfg: &ExperimentConfig, geometry: &DomainGeometry) -> Result<DivFreeBasis> {
    let radius = cfg.basis.bump_radius.unwrap_or(geometry.max_support_radius());
    build_basis(geometry, cfg.basis.degree, radius).context("building the basis")
}

fn invert(cfg: &ExperimentConfig, out: &Path, st: &mut Stages) -> Result<()> {
    let geometry = cfg.geometry()?;
    let solver = cfg.solver()?;
    let source = build_source(cfg, &geometry)?;
    let mesh = cfg.mesh()?;
    let ds = dataset(cfg, &solver, &source, &mesh, false)?;
    let basis = basis_for(cfg, &geometry)?;
    st.lap("synthesize");
    let op = assemble_operator(
        &solver,
        &basis,
        &ds.mesh,
        &ds.omegas,
        &ds.omega_weights,
        &ds.alpha,
        DataKind::Absorbing,
        ds.provenance.volume_orders,
    )?;
    st.lap("operator");
    let level = cfg.noise.level;
    let runs: Vec<Option<u64>> = if level > 0.0 {
        cfg.noise.seeds.iter().map(|s| Some(*s)).collect()
    } else {
        vec![None]
    };
    let mut w = create(out, "inversion.csv")?;
    writeln!(w, "seed,error,residual,data_norm,lambda")?;
    let mut coefficients = vec![];
    for seed in runs {
        let data = match seed {
            Some(s) => add_noise(&ds, level, s)?,
            None => ds.clone(),
        };
        let res = reconstruct_with(&op, &data, &basis, cfg.basis.lambda, Some(&source))?;
        let error = res.relative_error.unwrap_or(f64::NAN);
        let label = seed.map_or("clean".to_string(), |s| s.to_string());
        writeln!(w, "{label},{error:e},{:e},{:e},{:e}", res.residual_norm, res.data_norm, res.lambda)?;
        let (name, bound) = match seed {
            Some(s) => (format!("invert.error.seed{s}"), cfg.tolerances.inversion_noisy),
            None => ("invert.error".to_string(), cfg.tolerances.inversion_clean),
        };
        st.report.push(Check::new(name, error, Relation::Lt, bound));
        if let Some(warning) = res.warning {
            st.report.warnings.push(format!("seed {label}: {warning}"));
        }
        if coefficients.is_empty() {
            coefficients = res.coefficients;
        }
    }
    let mut w = create(out, "coefficients.csv")?;
    writeln!(w, "index,channel,component,a1,a2,a3,value")?;
    for (j, c) in coefficients.iter().enumerate() {
        let (comp, alpha) = basis.labels[j % basis.per_channel()];
        let channel = if j < basis.per_channel() { "eps" } else { "mu" };
        writeln!(w, "{j},{channel},{comp},{},{},{},{c:e}", alpha[0], alpha[1], alpha[2])?;
    }
    st.lap("reconstruct");
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, out: &Path, st: &mut Stages) -> Result<()> {
    if !(cfg.noise.level > 0.0) {
        bail!("sweep needs noise.level > 0 to calibrate the envelope");
    }
    let geometry = cfg.geometry()?;
    let source = build_source(cfg, &geometry)?;
    let basis = basis_for(cfg, &geometry)?;
    let config = SweepConfig {
        k_list: cfg.sweep.k_list.clone(),
        noise_level: cfg.noise.level,
        seeds: cfg.noise.seeds.clone(),
        freq_per_unit: cfg.sweep.freq_per_unit,
        alpha: cfg.alpha.value,
        lambda_rule: cfg.basis.lambda,
    };
    let rep = stability_sweep(&cfg.solver()?, &source, &basis, &cfg.mesh()?, &config)?;
    st.lap("sweep");
    rep.write_csv(create(out, "sweep.csv")?)?;
    let mut w = create(out, "sweep_summary.csv")?;
    writeln!(w, "K,mean_error,std_error,eps,envelope")?;
    for s in &rep.summary {
        writeln!(w, "{:e},{:e},{:e},{:e},{:e}", s.k, s.mean_error, s.std_error, s.eps, s.envelope)?;
    }
    st.report.push(Check::new("sweep.spearman", rep.spearman, Relation::Le, cfg.tolerances.spearman));
    st.report.push(Check::flag("sweep.error_nonincreasing", rep.error_nonincreasing()));
    st.report.push(Check::flag("sweep.envelope_nonincreasing", rep.envelope_nonincreasing()));
    st.report.warnings.extend(rep.warnings);
    Ok(())
}

fn cavity_oracles(cfg: &ExperimentConfig, st: &mut Stages) -> Result<()> {
    let modes = ball_eigenvalues(1.0, &cfg.medium()?, 1, 1)?;
    for (family, expected) in [(Family::TE, 4.493409), (Family::TM, 2.743707)] {
        let x = modes.iter().find(|m| m.family == family).context("first mode")?.x;
        st.report.push(Check::new(
            format!("cavity.first_root.{family}"),
            (x - expected).abs(),
            Relation::Lt,
            cfg.tolerances.root_oracle,
        ));
    }
    Ok(())
}

fn cavity(cfg: &ExperimentConfig, out: &Path, st: &mut Stages) -> Result<()> {
    let medium = cfg.medium()?;
    let radius = match cfg.geometry.shape {
        crate::config::Shape::Ball => match cfg.geometry()?.region() {
            Region::Ball { radius, .. } => *radius,
            Region::Box { .. } => unreachable!("ball shape"),
        },
        crate::config::Shape::Box => bail!("cavity modes are computed for balls only"),
    };
    let c = &cfg.cavity;
    let modes = ball_eigenvalues(radius, &medium, c.n_max, c.m_max)?;
    write_modes_csv(&modes, create(out, "modes.csv")?)?;
    let mut w = create(out, "monotonicity.csv")?;
    writeln!(w, "r1,r2,k,omega_r1,omega_r2")?;
    for [r1, r2] in &c.pairs {
        let rep = monotonicity_check(*r1, *r2, &medium, c.count)?;
        for (k, (a, b)) in rep.pairs.iter().enumerate() {
            writeln!(w, "{r1:e},{r2:e},{k},{a:e},{b:e}")?;
        }
        st.report
            .push(Check::new(format!("cavity.margin.{r1}-{r2}"), rep.min_margin, Relation::Gt, 0.0));
        if rep.inconclusive {
            st.report.warnings.push(format!("pair ({r1}, {r2}) has a tie within 1e-12"));
        }
    }
    cavity_oracles(cfg, st)?;
    st.lap("cavity");
    Ok(())
}
