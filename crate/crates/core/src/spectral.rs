//! Multi-frequency boundary data and the data functionals.
//!
//! A [`BoundaryDataset`] holds `E × ν` and `E × ν - α H_τ` on a surface mesh
//! at Gauss-Legendre nodes of `(0, K)`, so that `∫₀^K dω` is a weighted node
//! sum. From it
//!
//! ```text
//! ε₀² = ∫₀^K ‖E × ν - α H_τ‖²₍₀₎ dω      ε₁² = ∫₀^K ‖E × ν‖²₍₁₎ dω
//! ```

use crate::forward::{assemble_trace_gradient, assemble_traces, check_alpha, ForwardSolver, Want};
use crate::geometry::{MediumParams, SurfaceMesh};
use crate::quadrature::gauss_legendre_on;
use crate::source::SourcePair;
use crate::volume::{QuadratureOrders, VolumeRule};
use crate::{Error, Point, Result, CVec3, C64};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source_id: String,
    pub medium: MediumParams,
    /// Volume rule actually used for the traces.
    pub volume_orders: Option<QuadratureOrders>,
    pub frequency_rule: String,
    pub noise_level: f64,
    pub noise_seed: Option<u64>,
}

/// Boundary traces on `mesh` at frequencies `omegas ⊂ (0, K)`. Arrays are
/// indexed `[frequency][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDataset {
    pub mesh: SurfaceMesh,
    pub band_limit: f64,
    pub omegas: Vec<f64>,
    pub omega_weights: Vec<f64>,
    pub alpha: Vec<f64>,
    pub tangential: Vec<Vec<CVec3>>,
    pub absorbing: Vec<Vec<CVec3>>,
    /// `[j][k] = ∂_j (E × ν)_k`, present when synthesized with gradients.
    pub gradients: Option<Vec<Vec<Matrix3<C64>>>>,
    pub provenance: Provenance,
}

impl BoundaryDataset {
    pub fn n_freq(&self) -> usize {
        self.omegas.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (nf, nn) = (self.n_freq(), self.n_nodes());
        if !(self.band_limit > 0.0) {
            return Err(Error::Format(format!("band limit must be positive, got {}", self.band_limit)));
        }
        if self.omegas.windows(2).any(|w| w[0] >= w[1])
            || self.omegas.iter().any(|w| !(*w > 0.0 && *w < self.band_limit))
        {
            return Err(Error::Format("frequencies must increase strictly inside (0, K)".into()));
        }
        let shape_ok = self.omega_weights.len() == nf
            && self.alpha.len() == nn
            && self.tangential.len() == nf
            && self.absorbing.len() == nf
            && self.tangential.iter().chain(&self.absorbing).all(|t| t.len() == nn)
            && self
                .gradients
                .as_ref()
                .is_none_or(|g| g.len() == nf && g.iter().all(|t| t.len() == nn));
        if !shape_ok {
            return Err(Error::Format(format!("array shapes inconsistent with {nf} frequencies and {nn} nodes")));
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str = "omega,omega_weight,node,re_ax,im_ax,re_ay,im_ay,re_az,im_az,re_tx,im_tx,re_ty,im_ty,re_tz,im_tz";

    /// Long format, one row per (frequency, node): absorbing then tangential
    /// trace components.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for (f, (omega, wt)) in self.omegas.iter().zip(&self.omega_weights).enumerate() {
            for n in 0..self.n_nodes() {
                write!(w, "{omega:e},{wt:e},{n}")?;
                for v in self.absorbing[f][n].iter().chain(self.tangential[f][n].iter()) {
                    write!(w, ",{:e},{:e}", v.re, v.im)?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Traces of one source at one frequency.
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub tangential: Vec<CVec3>,
    pub absorbing: Vec<CVec3>,
    pub gradient: Option<Vec<Matrix3<C64>>>,
}

/// Boundary traces at arbitrary (complex) frequencies. `rule` defaults to the
/// solver's rule for the largest |κ|.
pub fn boundary_traces(
    solver: &ForwardSolver,
    source: &SourcePair,
    mesh: &SurfaceMesh,
    alpha: &[f64],
    omegas: &[C64],
    gradients: bool,
    rule: Option<&VolumeRule>,
) -> Result<Vec<TraceSet>> {
    check_alpha(alpha, mesh)?;
    let want = Want {
        e: true,
        h: true,
        grad_e: gradients,
    };
    let batch = match rule {
        Some(r) => solver.fields_batch_on(&[source], &mesh.nodes, omegas, want, r)?,
        None => solver.fields_batch(&[source], &mesh.nodes, omegas, want)?,
    };
    Ok(batch
        .into_iter()
        .next()
        .expect("one source")
        .into_iter()
        .map(|fb| {
            let (tangential, absorbing) = assemble_traces(mesh, &fb.e, &fb.h, alpha);
            let gradient = gradients.then(|| assemble_trace_gradient(mesh, &fb.e, &fb.grad_e));
            TraceSet {
                tangential,
                absorbing,
                gradient,
            }
        })
        .collect())
}

/// Band and trace options for [`synthesize_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub band_limit: f64,
    pub n_freq: usize,
    /// Absorbing coefficient per mesh node.
    pub alpha: Vec<f64>,
    pub gradients: bool,
}

/// Gauss-Legendre frequency nodes and weights on `(0, K)`.
pub fn frequency_rule(band_limit: f64, n_freq: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_freq < 2 || !(band_limit > 0.0 && band_limit.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need K > 0 and at least 2 frequencies, got K={band_limit}, n={n_freq}"
        )));
    }
    Ok(gauss_legendre_on(n_freq, 0.0, band_limit))
}

/// Volume rule a dataset with this band would use.
pub fn dataset_rule(solver: &ForwardSolver, source: &SourcePair, band_limit: f64) -> Result<Option<VolumeRule>> {
    solver.rule_for(source, solver.medium().kappa(C64::new(band_limit, 0.0)).norm())
}

pub fn synthesize_dataset(
    solver: &ForwardSolver,
    source: &SourcePair,
    source_id: &str,
    mesh: &SurfaceMesh,
    opts: &SynthesisOptions,
) -> Result<BoundaryDataset> {
    let rule = dataset_rule(solver, source, opts.band_limit)?;
    synthesize_dataset_on(solver, source, source_id, mesh, opts, rule.as_ref())
}

/// [`synthesize_dataset`] on an explicit volume rule (`None` only for the
/// zero source).
pub fn synthesize_dataset_on(
    solver: &ForwardSolver,
    source: &SourcePair,
    source_id: &str,
    mesh: &SurfaceMesh,
    opts: &SynthesisOptions,
    rule: Option<&VolumeRule>,
) -> Result<BoundaryDataset> {
    let (omegas, omega_weights) = frequency_rule(opts.band_limit, opts.n_freq)?;
    check_alpha(&opts.alpha, mesh)?;
    let (nf, nn) = (omegas.len(), mesh.len());
    let mut ds = BoundaryDataset {
        mesh: mesh.clone(),
        band_limit: opts.band_limit,
        omegas,
        omega_weights,
        alpha: opts.alpha.clone(),
        tangential: vec![vec![CVec3::zeros(); nn]; nf],
        absorbing: vec![vec![CVec3::zeros(); nn]; nf],
        gradients: opts.gradients.then(|| vec![vec![Matrix3::zeros(); nn]; nf]),
        provenance: Provenance {
            source_id: source_id.to_string(),
            medium: *solver.medium(),
            volume_orders: rule.map(|r| r.orders),
            frequency_rule: "gauss-legendre".into(),
            noise_level: 0.0,
            noise_seed: None,
        },
    };
    if source.is_zero() {
        return Ok(ds);
    }
    let rule = rule.ok_or_else(|| Error::InvalidArgument("nonzero source needs a volume rule".into()))?;
    let omegas: Vec<C64> = ds.omegas.iter().map(|w| C64::new(*w, 0.0)).collect();
    let traces = boundary_traces(solver, source, mesh, &opts.alpha, &omegas, opts.gradients, Some(rule))?;
    for (f, t) in traces.into_iter().enumerate() {
        ds.tangential[f] = t.tangential;
        ds.absorbing[f] = t.absorbing;
        if let (Some(g), Some(tg)) = (ds.gradients.as_mut(), t.gradient) {
            g[f] = tg;
        }
    }
    Ok(ds)
}

/// Which boundary quantity a band integral measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceNorm {
    /// `‖E × ν - α H_τ‖²₍₀₎`.
    Absorbing,
    /// `‖E × ν‖²₍₁₎`.
    TangentialH1,
}

/// Band integrals of a trace norm over `|ω|` split into panels on `(0, ω_max)`.
/// Each mass counts `ω` and `-ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandEnergy {
    pub breaks: Vec<f64>,
    pub masses: Vec<f64>,
}

impl BandEnergy {
    fn within(&self, lo: f64, hi: f64) -> f64 {
        let slack = 1e-12 * self.breaks.last().copied().unwrap_or(1.0);
        self.breaks
            .windows(2)
            .zip(&self.masses)
            .filter(|(w, _)| w[0] >= lo - slack && w[1] <= hi + slack)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn omega_max(&self) -> f64 {
        self.breaks.last().copied().unwrap_or(0.0)
    }

    /// Mass of the panels starting at or beyond `k`.
    pub fn mass_from(&self, k: f64) -> f64 {
        self.within(k, f64::INFINITY)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass beyond `ω_max` relative to the total, extrapolated with the
    /// geometric decay rate seen between the two windows of width `window`
    /// below `ω_max`. Infinite when the windows do not show decay.
    pub fn beyond_fraction(&self, window: f64) -> f64 {
        let total = self.total();
        if total == 0.0 {
            return 0.0;
        }
        let top = self.omega_max();
        if top - 2.0 * window < 0.0 {
            return f64::INFINITY;
        }
        let near = self.within(top - window, top);
        let far = self.within(top - 2.0 * window, top - window);
        if near < far {
            // Decay rate ln(far/near)/window per unit ω.
            near / (far / near).ln() / total
        } else {
            f64::INFINITY
        }
    }
}

/// Integrates a trace norm over `0 < |ω| < ω_max` with `nodes_per_panel`
/// Gauss nodes on panels no wider than `panel_width`. Panel boundaries
/// include every entry of `edges` (increasing, from 0 to `ω_max`). Each panel
/// gets a volume rule sized for its own largest frequency.
#[allow(clippy::too_many_arguments)]
pub fn band_energy(
    solver: &ForwardSolver,
    source: &SourcePair,
    mesh: &SurfaceMesh,
    alpha: &[f64],
    edges: &[f64],
    panel_width: f64,
    nodes_per_panel: usize,
    norm: TraceNorm,
) -> Result<BandEnergy> {
    if edges.len() < 2 || edges[0] < 0.0 || edges.windows(2).any(|w| !(w[0] < w[1])) || !(panel_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "band edges must increase from a nonnegative start, got {edges:?} with panel width {panel_width}"
        )));
    }
    let omega_max = *edges.last().unwrap();
    let mut breaks = vec![];
    for w in edges.windows(2) {
        let pieces = ((w[1] - w[0]) / panel_width).ceil().max(1.0) as usize;
        for p in 0..pieces {
            breaks.push(w[0] + (w[1] - w[0]) * p as f64 / pieces as f64);
        }
    }
    breaks.push(omega_max);
    if source.is_zero() {
        let masses = vec![0.0; breaks.len() - 1];
        return Ok(BandEnergy { breaks, masses });
    }
    let symmetric = source.is_real();
    let gradients = norm == TraceNorm::TangentialH1;
    let value = |t: &TraceSet| match norm {
        TraceNorm::Absorbing => surface_norm_sq(&t.absorbing, mesh, 0, None),
        TraceNorm::TangentialH1 => surface_norm_sq(&t.tangential, mesh, 1, t.gradient.as_deref()),
    };
    let masses = breaks
        .windows(2)
        .map(|w| {
            let (nodes, weights) = gauss_legendre_on(nodes_per_panel, w[0], w[1]);
            let mut omegas: Vec<C64> = nodes.iter().map(|w| C64::new(*w, 0.0)).collect();
            if !symmetric {
                omegas.extend(nodes.iter().map(|w| C64::new(-*w, 0.0)));
            }
            let traces = boundary_traces(solver, source, mesh, alpha, &omegas, gradients, None)?;
            let n = nodes.len();
            let mut mass = 0.0;
            for i in 0..n {
                let v = value(&traces[i])?;
                let v = if symmetric { 2.0 * v } else { v + value(&traces[n + i])? };
                mass += weights[i] * v;
            }
            Ok(mass)
        })
        .collect::<Result<_>>()?;
    Ok(BandEnergy { breaks, masses })
}

/// `|P G|²` summed over entries, with `P = I - νν^T` acting on the derivative
/// index: the squared tangential gradient of a 3-vector trace.
pub fn tangential_gradient_sq(g: &Matrix3<C64>, nu: &Point) -> f64 {
    let mut total = 0.0;
    for k in 0..3 {
        let col = [g[(0, k)], g[(1, k)], g[(2, k)]];
        let dn = col[0] * nu.x + col[1] * nu.y + col[2] * nu.z;
        for j in 0..3 {
            total += (col[j] - dn * nu[j]).norm_sqr();
        }
    }
    total
}

/// Surface norm of a trace: order 0 is the L² norm, order 1 adds the
/// tangential part of the ambient gradient (required then).
pub fn surface_norm(trace: &[CVec3], mesh: &SurfaceMesh, order: u8, gradient: Option<&[Matrix3<C64>]>) -> Result<f64> {
    Ok(surface_norm_sq(trace, mesh, order, gradient)?.sqrt())
}

pub fn surface_norm_sq(trace: &[CVec3], mesh: &SurfaceMesh, order: u8, gradient: Option<&[Matrix3<C64>]>) -> Result<f64> {
    if trace.len() != mesh.len() {
        return Err(Error::InvalidArgument(format!(
            "trace has {} values for {} mesh nodes",
            trace.len(),
            mesh.len()
        )));
    }
    let mut total: f64 = trace.iter().zip(&mesh.weights).map(|(t, w)| w * t.norm_squared()).sum();
    match order {
        0 => {}
        1 => {
            let g = gradient.ok_or_else(|| Error::InvalidArgument("order-1 surface norm needs trace gradients".into()))?;
            if g.len() != mesh.len() {
                return Err(Error::InvalidArgument("gradient array does not match the mesh".into()));
            }
            total += g
                .iter()
                .zip(&mesh.normals)
                .zip(&mesh.weights)
                .map(|((g, nu), w)| w * tangential_gradient_sq(g, nu))
                .sum::<f64>();
        }
        _ => return Err(Error::InvalidArgument(format!("surface norm order must be 0 or 1, got {order}"))),
    }
    Ok(total)
}

/// ε₀², ε₁² and `𝓔 = |ln ε|` (`+∞` when ε = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataNorms {
    pub eps0_sq: f64,
    pub eps1_sq: f64,
    pub e0: f64,
    pub e1: f64,
}

/// `|ln √x|`, with `+∞` for `x = 0`.
pub fn log_level(eps_sq: f64) -> f64 {
    if eps_sq == 0.0 {
        f64::INFINITY
    } else {
        (0.5 * eps_sq.ln()).abs()
    }
}

impl DataNorms {
    pub fn from_squares(eps0_sq: f64, eps1_sq: f64) -> Self {
        DataNorms {
            eps0_sq,
            eps1_sq,
            e0: log_level(eps0_sq),
            e1: log_level(eps1_sq),
        }
    }
}

/// `∫₀^K ‖E × ν - α H_τ‖²₍₀₎ dω`.
pub fn eps0_sq(ds: &BoundaryDataset) -> Result<f64> {
    let mut total = 0.0;
    for (t, w) in ds.absorbing.iter().zip(&ds.omega_weights) {
        total += w * surface_norm_sq(t, &ds.mesh, 0, None)?;
    }
    Ok(total)
}

/// `∫₀^K ‖E × ν‖²₍₁₎ dω`; needs gradients.
pub fn eps1_sq(ds: &BoundaryDataset) -> Result<f64> {
    let g = ds
        .gradients
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("ε₁ needs a dataset synthesized with gradients".into()))?;
    let mut total = 0.0;
    for ((t, g), w) in ds.tangential.iter().zip(g).zip(&ds.omega_weights) {
        total += w * surface_norm_sq(t, &ds.mesh, 1, Some(g))?;
    }
    Ok(total)
}

pub fn epsilon_norms(ds: &BoundaryDataset) -> Result<DataNorms> {
    Ok(DataNorms::from_squares(eps0_sq(ds)?, eps1_sq(ds)?))
}

/// Quadrature-weighted RMS of one complex component over the band and surface.
fn weighted_rms<T, F: Fn(&T) -> f64>(arr: &[Vec<T>], ds: &BoundaryDataset, components: f64, sq: F) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (row, wo) in arr.iter().zip(&ds.omega_weights) {
        for (v, wn) in row.iter().zip(&ds.mesh.weights) {
            num += wo * wn * sq(v);
            den += wo * wn * components;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

fn complex_normal(rng: &mut ChaCha8Rng, sigma: f64) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C64::new(a, b) * (sigma / std::f64::consts::SQRT_2)
}

/// Adds i.i.d. complex Gaussian noise with `E|n|² = (level · RMS)²` per
/// component, where RMS is the quadrature-weighted RMS of each array. Then
/// the expected ε₀² of the noisy data is `(1 + level²)` times the clean one.
pub fn add_noise(ds: &BoundaryDataset, level: f64, seed: u64) -> Result<BoundaryDataset> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {level}")));
    }
    let mut out = ds.clone();
    out.provenance.noise_level = level;
    out.provenance.noise_seed = Some(seed);
    if level == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for arr in [&mut out.absorbing, &mut out.tangential] {
        let sigma = level * weighted_rms(arr, ds, 3.0, |v: &CVec3| v.norm_squared());
        for row in arr.iter_mut() {
            for v in row.iter_mut() {
                for c in v.iter_mut() {
                    *c += complex_normal(&mut rng, sigma);
                }
            }
        }
    }
    if let Some(g) = out.gradients.as_mut() {
        let sigma = level * weighted_rms(g, ds, 9.0, |m: &Matrix3<C64>| m.norm_squared());
        for row in g.iter_mut() {
            for m in row.iter_mut() {
                for c in m.iter_mut() {
                    *c += complex_normal(&mut rng, sigma);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_tangential_field_on_sphere() {
        let mesh = SurfaceMesh::sphere(Point::zeros(), 1.0, 6, 12).unwrap();
        let c = CVec3::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(0.0, 0.5));
        let trace = vec![c; mesh.len()];
        let n = surface_norm(&trace, &mesh, 0, None).unwrap();
        assert!((n - c.norm() * (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!(surface_norm(&trace, &mesh, 1, None).is_err());
        let g = vec![Matrix3::from_element(C64::new(0.1, 0.2)); mesh.len()];
        assert!(surface_norm(&trace, &mesh, 1, Some(&g)).unwrap() >= n);
    }

    #[test]
    fn tangential_gradient_drops_normal_derivative() {
        let nu = Point::new(0.0, 0.0, 1.0);
        let mut g = Matrix3::<C64>::zeros();
        g[(2, 0)] = C64::new(5.0, 0.0);
        assert_eq!(tangential_gradient_sq(&g, &nu), 0.0);
        g[(0, 1)] = C64::new(0.0, 2.0);
        assert!((tangential_gradient_sq(&g, &nu) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn log_levels() {
        assert_eq!(log_level(0.0), f64::INFINITY);
        assert!((log_level((-2.0f64).exp()) - 1.0).abs() < 1e-15);
    }
}
