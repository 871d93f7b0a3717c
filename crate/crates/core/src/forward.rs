//! Frequency-domain forward map.
//!
//! Fields are volume integrals of the Helmholtz kernel `g = e^{iκr}/(4πr)`
//! against the source densities
//!
//! ```text
//! D_E = iωμ₀ J_eps + curl J_mu + (i/(ωε₀)) ∇div J_eps
//! D_H = -iωε₀ J_mu + curl J_eps - (i/(ωμ₀)) ∇div J_mu
//! ```
//!
//! so that `E = ∫ g D_E`, `H = ∫ g D_H`. The gradient-divergence terms vanish
//! for the divergence-free sources of interest and are kept only so that
//! gradient sources radiate correctly (to nothing outside their support).
//! Negative and complex ω are handled by the same formulas.
//!
//! Two evaluation paths exist: literal per-node loops (the reference
//! `radiate_fields` / `boundary_trace_*`), and [`ForwardSolver::fields_batch`],
//! which forms kernel matrices and multiplies them against all density
//! columns at once. Tests keep the two in agreement to rounding.

use crate::geometry::{project, MediumParams, SurfaceMesh};
use crate::field::VectorField;
use crate::source::SourcePair;
use crate::volume::{QuadratureOrders, VolumeRule};
use crate::{cvec, Error, Point, Result, CVec3, C64};
use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

const I: C64 = C64::new(0.0, 1.0);

/// Angular frequency together with its wave number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyPoint {
    pub omega: C64,
    pub kappa: C64,
}

impl FrequencyPoint {
    pub fn new(omega: impl Into<C64>, medium: &MediumParams) -> Self {
        let omega = omega.into();
        FrequencyPoint {
            omega,
            kappa: medium.kappa(omega),
        }
    }
}

/// `exp(iκ|x-y|) / (4π|x-y|)`.
pub fn green_kernel(x: &Point, y: &Point, kappa: C64) -> Result<C64> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::Singularity(format!("Green kernel evaluated at x = y = {x:?}")));
    }
    Ok((I * kappa * r).exp() / (4.0 * PI * r))
}

/// Gradient of [`green_kernel`] with respect to `x`.
pub fn green_gradient(x: &Point, y: &Point, kappa: C64) -> Result<CVec3> {
    let d = x - y;
    let r = d.norm();
    let g = green_kernel(x, y, kappa)?;
    let f = g * (I * kappa - 1.0 / r) / r;
    Ok(cvec(&d) * f)
}

/// Quadrature settings for the volume integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardConfig {
    /// Minimum node counts of the spherical product rule.
    pub orders: QuadratureOrders,
    /// Nodes per wavelength of the kernel phase; raises `orders` at high |κ|.
    pub nodes_per_wavelength: f64,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            orders: QuadratureOrders::default(),
            nodes_per_wavelength: 12.0,
        }
    }
}

/// Radiated fields at a set of points.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub omega: C64,
    pub points: Vec<Point>,
    pub e: Vec<CVec3>,
    pub h: Vec<CVec3>,
}

impl FieldSnapshot {
    pub const CSV_HEADER: &'static str =
        "x,y,z,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez,re_hx,im_hx,re_hy,im_hy,re_hz,im_hz";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for ((p, e), h) in self.points.iter().zip(&self.e).zip(&self.h) {
            write!(w, "{:e},{:e},{:e}", p.x, p.y, p.z)?;
            for v in e.iter().chain(h.iter()) {
                write!(w, ",{:e},{:e}", v.re, v.im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Maximum PDE residuals at the probes, with the field scale used to make
/// them relative.
#[derive(Debug, Clone, Copy)]
pub struct Residual {
    pub first: f64,
    pub second: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.first.max(self.second) / self.scale
        }
    }
}

// Channel order of the sampled densities. Channels from `PARTIALS` on hold
// `∂_j` of the E-side densities, used for trace gradients.
const J_EPS: usize = 0;
const J_MU: usize = 1;
const CURL_EPS: usize = 2;
const CURL_MU: usize = 3;
const GD_EPS: usize = 4;
const GD_MU: usize = 5;
const PARTIALS: usize = 6;
const N_CHANNELS: usize = PARTIALS + 9;

fn partial_channel(base: usize, j: usize) -> usize {
    let slot = match base {
        J_EPS => 0,
        CURL_MU => 1,
        _ => 2,
    };
    PARTIALS + 3 * j + slot
}

/// Source densities sampled at the nodes of a volume rule.
#[derive(Debug, Clone)]
pub struct SourceSamples {
    pub(crate) channels: Vec<Option<Vec<CVec3>>>,
    divergence_free: bool,
}

impl SourceSamples {
    pub fn new(source: &SourcePair, rule: &VolumeRule) -> Result<Self> {
        Self::build(source, &rule.nodes, false)
    }

    /// Also samples the first partials of the E-side densities.
    pub fn with_partials(source: &SourcePair, rule: &VolumeRule) -> Result<Self> {
        Self::build(source, &rule.nodes, true)
    }

    /// Densities at arbitrary points.
    pub fn at_points(source: &SourcePair, points: &[Point]) -> Result<Self> {
        Self::build(source, points, false)
    }

    fn build(source: &SourcePair, nodes: &[Point], partials: bool) -> Result<Self> {
        let (j_eps, j_mu) = (&source.j_eps, &source.j_mu);
        let divergence_free = source.is_divergence_free();
        let mut fields: Vec<Option<VectorField>> = vec![None; N_CHANNELS];
        fields[J_EPS] = Some(j_eps.clone());
        fields[J_MU] = Some(j_mu.clone());
        fields[CURL_EPS] = Some(j_eps.curl()?);
        fields[CURL_MU] = Some(j_mu.curl()?);
        if !divergence_free {
            fields[GD_EPS] = Some(j_eps.div()?.gradient());
            fields[GD_MU] = Some(j_mu.div()?.gradient());
        }
        if partials {
            for j in 0..3 {
                for base in [J_EPS, CURL_MU, GD_EPS] {
                    if let Some(f) = &fields[base] {
                        fields[partial_channel(base, j)] = Some(f.partial(j)?);
                    }
                }
            }
        }
        let channels = fields
            .into_iter()
            .map(|f| {
                f.filter(|f| !f.is_zero())
                    .map(|f| nodes.par_iter().map(|y| f.eval(y)).collect())
            })
            .collect();
        Ok(SourceSamples {
            channels,
            divergence_free,
        })
    }

    fn get(&self, c: usize, i: usize) -> CVec3 {
        match &self.channels[c] {
            Some(v) => v[i],
            None => CVec3::zeros(),
        }
    }

    fn check_omega(&self, omega: C64) -> Result<()> {
        if !self.divergence_free && omega == C64::new(0.0, 0.0) {
            return Err(Error::InvalidArgument(
                "fields of a non-solenoidal source are undefined at ω = 0".into(),
            ));
        }
        Ok(())
    }

    fn coefficients(&self, omega: C64, m: &MediumParams) -> Coefficients {
        let (ge, gh) = if self.divergence_free {
            (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (I / (omega * m.eps0()), -I / (omega * m.mu0()))
        };
        Coefficients {
            ce: I * omega * m.mu0(),
            ch: -I * omega * m.eps0(),
            ge,
            gh,
        }
    }

    fn density_e(&self, i: usize, omega: C64, m: &MediumParams) -> CVec3 {
        let c = self.coefficients(omega, m);
        self.get(J_EPS, i) * c.ce + self.get(CURL_MU, i) + self.get(GD_EPS, i) * c.ge
    }

    fn density_h(&self, i: usize, omega: C64, m: &MediumParams) -> CVec3 {
        let c = self.coefficients(omega, m);
        self.get(J_MU, i) * c.ch + self.get(CURL_EPS, i) + self.get(GD_MU, i) * c.gh
    }

    fn density_e_partial(&self, i: usize, j: usize, omega: C64, m: &MediumParams) -> CVec3 {
        let c = self.coefficients(omega, m);
        self.get(partial_channel(J_EPS, j), i) * c.ce
            + self.get(partial_channel(CURL_MU, j), i)
            + self.get(partial_channel(GD_EPS, j), i) * c.ge
    }
}

#[derive(Debug, Clone, Copy)]
struct Coefficients {
    ce: C64,
    ch: C64,
    ge: C64,
    gh: C64,
}

/// Which outputs [`ForwardSolver::fields_batch`] should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Want {
    pub e: bool,
    pub h: bool,
    pub grad_e: bool,
}

impl Want {
    pub const ALL: Want = Want {
        e: true,
        h: true,
        grad_e: true,
    };
    pub const FIELDS: Want = Want {
        e: true,
        h: true,
        grad_e: false,
    };
}

/// Fields of one source at one frequency on a target set. `grad_e[i][(j, k)]`
/// is `∂_j E_k` at target `i`.
#[derive(Debug, Clone, Default)]
pub struct FieldBatch {
    pub e: Vec<CVec3>,
    pub h: Vec<CVec3>,
    pub grad_e: Vec<Matrix3<C64>>,
}

pub(crate) type ColumnIndex = Option<(usize, Option<usize>)>;

/// Real matrix of weighted density columns shared by several sources.
pub(crate) struct DensityColumns {
    pub(crate) mat: DMatrix<f64>,
    // [source][channel] -> (first real column, first imaginary column)
    pub(crate) index: Vec<Vec<ColumnIndex>>,
}

impl DensityColumns {
    pub(crate) fn new(samples: &[&SourceSamples], weights: &[f64], channels: &[usize]) -> Self {
        let mut cols: Vec<Vec<f64>> = vec![];
        let mut index = vec![];
        for s in samples {
            let mut idx: Vec<ColumnIndex> = vec![None; N_CHANNELS];
            for &c in channels {
                let Some(v) = &s.channels[c] else { continue };
                let re = cols.len();
                for k in 0..3 {
                    cols.push(v.iter().zip(weights).map(|(x, w)| x[k].re * w).collect());
                }
                let im = if v.iter().any(|x| x.iter().any(|z| z.im != 0.0)) {
                    let im = cols.len();
                    for k in 0..3 {
                        cols.push(v.iter().zip(weights).map(|(x, w)| x[k].im * w).collect());
                    }
                    Some(im)
                } else {
                    None
                };
                idx[c] = Some((re, im));
            }
            index.push(idx);
        }
        let n = weights.len();
        let mat = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        DensityColumns { mat, index }
    }
}

/// Kernel matrix applied to density columns, `K D`, split into the real and
/// imaginary parts of `K`.
pub(crate) struct Applied {
    pub(crate) vr: DMatrix<f64>,
    pub(crate) vi: DMatrix<f64>,
}

impl Applied {
    /// Complex potential of a channel at target `x`.
    pub(crate) fn potential(&self, col: ColumnIndex, x: usize) -> CVec3 {
        let Some((re, im)) = col else {
            return CVec3::zeros();
        };
        CVec3::from_fn(|k, _| {
            let mut v = C64::new(self.vr[(x, re + k)], self.vi[(x, re + k)]);
            if let Some(im) = im {
                v += I * C64::new(self.vr[(x, im + k)], self.vi[(x, im + k)]);
            }
            v
        })
    }
}

const CHUNK: usize = 16;

pub(crate) fn apply_kernel(targets: &[Point], nodes: &[Point], dens: &DMatrix<f64>, kappa: C64) -> Result<Applied> {
    let m = dens.ncols();
    let ny = nodes.len();
    let parts: Vec<(DMatrix<f64>, DMatrix<f64>)> = targets
        .par_chunks(CHUNK)
        .map(|xs| {
            let ch = xs.len();
            let mut kr = DMatrix::<f64>::zeros(ch, ny);
            let mut ki = DMatrix::<f64>::zeros(ch, ny);
            for (b, y) in nodes.iter().enumerate() {
                for (a, x) in xs.iter().enumerate() {
                    let r = (x - y).norm();
                    if r == 0.0 {
                        return Err(Error::Singularity(format!("target {x:?} coincides with a quadrature node")));
                    }
                    let amp = if kappa.im == 0.0 {
                        1.0 / (4.0 * PI * r)
                    } else {
                        (-kappa.im * r).exp() / (4.0 * PI * r)
                    };
                    let (s, c) = (kappa.re * r).sin_cos();
                    kr[(a, b)] = amp * c;
                    ki[(a, b)] = amp * s;
                }
            }
            Ok((&kr * dens, &ki * dens))
        })
        .collect::<Result<_>>()?;
    let nx = targets.len();
    let mut out = Applied {
        vr: DMatrix::zeros(nx, m),
        vi: DMatrix::zeros(nx, m),
    };
    let mut row = 0;
    for (vr, vi) in parts {
        let ch = vr.nrows();
        out.vr.rows_mut(row, ch).copy_from(&vr);
        out.vi.rows_mut(row, ch).copy_from(&vi);
        row += ch;
    }
    Ok(out)
}

/// Taylor expansion of the volume potentials in the wave number about the
/// distance `r₀ = |x - c|` from each target to the support centre:
///
/// ```text
/// ∫ e^{iκr}/(4πr) D(y) dy = e^{iκr₀} Σₙ (iκ)ⁿ Mₙ(x),   Mₙ(x) = ∫ (r - r₀)ⁿ/(n! 4πr) D(y) dy
/// ```
///
/// With `|r - r₀| ≤ b` the series converges for every κ; the moments are
/// real kernels applied once, after which fields at any κ with
/// `|κ| ≤ kappa_max` cost `O(terms)` per target.
#[derive(Debug, Clone)]
pub struct KernelExpansion {
    r0: Vec<f64>,
    moments: Vec<DMatrix<f64>>,
    index: Vec<ColumnIndex>,
    divergence_free: bool,
    kappa_max: f64,
    gradients: bool,
}

impl KernelExpansion {
    /// Expansion of the E, H (and with `gradients`, ∂E) potentials of
    /// `source` at `targets` on `rule`, valid for `|κ| ≤ kappa_max`.
    pub fn new(source: &SourcePair, targets: &[Point], rule: &VolumeRule, kappa_max: f64, gradients: bool) -> Result<Self> {
        ForwardSolver::check_outside(source, targets)?;
        let samples = if gradients {
            SourceSamples::with_partials(source, rule)?
        } else {
            SourceSamples::new(source, rule)?
        };
        let mut channels = vec![J_EPS, CURL_MU, GD_EPS, J_MU, CURL_EPS, GD_MU];
        if gradients {
            channels.extend(PARTIALS..N_CHANNELS);
        }
        let dens = DensityColumns::new(&[&samples], &rule.weights, &channels);
        let reach = rule
            .nodes
            .iter()
            .map(|y| (y - rule.center).norm())
            .fold(0.0, f64::max);
        let terms = Self::terms_for(kappa_max * reach);
        let m = dens.mat.ncols();
        let r0: Vec<f64> = targets.iter().map(|x| (x - rule.center).norm()).collect();
        let parts: Vec<Vec<DMatrix<f64>>> = targets
            .par_chunks(CHUNK)
            .zip(r0.par_chunks(CHUNK))
            .map(|(xs, r0s)| {
                let ch = xs.len();
                let ny = rule.nodes.len();
                let mut p = DMatrix::<f64>::zeros(ch, ny);
                let mut delta = DMatrix::<f64>::zeros(ch, ny);
                for (b, y) in rule.nodes.iter().enumerate() {
                    for (a, x) in xs.iter().enumerate() {
                        let r = (x - y).norm();
                        if r == 0.0 {
                            return Err(Error::Singularity(format!("target {x:?} coincides with a quadrature node")));
                        }
                        p[(a, b)] = 1.0 / (4.0 * PI * r);
                        delta[(a, b)] = r - r0s[a];
                    }
                }
                let mut out = Vec::with_capacity(terms);
                for n in 0..terms {
                    if n > 0 {
                        let inv = 1.0 / n as f64;
                        p.zip_apply(&delta, |v, d| *v *= d * inv);
                    }
                    out.push(&p * &dens.mat);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let nx = targets.len();
        let mut moments = vec![DMatrix::<f64>::zeros(nx, m); terms];
        let mut row = 0;
        for part in parts {
            let ch = part[0].nrows();
            for (n, mn) in part.into_iter().enumerate() {
                moments[n].rows_mut(row, ch).copy_from(&mn);
            }
            row += ch;
        }
        Ok(KernelExpansion {
            r0,
            moments,
            index: dens.index.into_iter().next().expect("one source"),
            divergence_free: samples.divergence_free,
            kappa_max,
            gradients,
        })
    }

    /// Terms needed for `x = |κ| max|r - r₀|`: the first `n > x` with
    /// `xⁿ/n! < 1e-17`, plus a margin.
    fn terms_for(x: f64) -> usize {
        let mut term = 1.0;
        let mut n = 0usize;
        while !(n as f64 > x && term < 1e-17) && n < 400 {
            n += 1;
            term *= x / n as f64;
        }
        n + 3
    }

    pub fn terms(&self) -> usize {
        self.moments.len()
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    /// E, H and (if built with gradients) ∂E at the targets.
    pub fn fields(&self, omega: C64, medium: &MediumParams) -> Result<FieldBatch> {
        let kappa = medium.kappa(omega);
        if kappa.norm() > self.kappa_max * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "|κ| = {} exceeds the expansion range {}",
                kappa.norm(),
                self.kappa_max
            )));
        }
        let samples = SourceSamples {
            channels: vec![],
            divergence_free: self.divergence_free,
        };
        samples.check_omega(omega)?;
        let c = samples.coefficients(omega, medium);
        let ik = I * kappa;
        let mut powers = Vec::with_capacity(self.terms());
        let mut p = C64::new(1.0, 0.0);
        for _ in 0..self.terms() {
            powers.push(p);
            p *= ik;
        }
        let m = self.moments[0].ncols();
        let mut fb = FieldBatch::default();
        let mut sums = vec![C64::new(0.0, 0.0); m];
        for (x, r0) in self.r0.iter().enumerate() {
            sums.iter_mut().for_each(|s| *s = C64::new(0.0, 0.0));
            for (pn, mn) in powers.iter().zip(&self.moments) {
                for (col, s) in sums.iter_mut().enumerate() {
                    *s += pn * mn[(x, col)];
                }
            }
            let phase = (ik * r0).exp();
            let pot = |ch: usize| -> CVec3 {
                let Some((re, im)) = self.index[ch] else {
                    return CVec3::zeros();
                };
                CVec3::from_fn(|k, _| {
                    let mut v = sums[re + k];
                    if let Some(im) = im {
                        v += I * sums[im + k];
                    }
                    v * phase
                })
            };
            fb.e.push(pot(J_EPS) * c.ce + pot(CURL_MU) + pot(GD_EPS) * c.ge);
            fb.h.push(pot(J_MU) * c.ch + pot(CURL_EPS) + pot(GD_MU) * c.gh);
            if self.gradients {
                let mut g = Matrix3::<C64>::zeros();
                for j in 0..3 {
                    let row = pot(partial_channel(J_EPS, j)) * c.ce
                        + pot(partial_channel(CURL_MU, j))
                        + pot(partial_channel(GD_EPS, j)) * c.ge;
                    for k in 0..3 {
                        g[(j, k)] = row[k];
                    }
                }
                fb.grad_e.push(g);
            }
        }
        Ok(fb)
    }
}

/// Frequency-domain solver for a fixed medium and quadrature configuration.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    medium: MediumParams,
    config: ForwardConfig,
}

impl ForwardSolver {
    pub fn new(medium: MediumParams, config: ForwardConfig) -> Self {
        ForwardSolver { medium, config }
    }

    pub fn with_medium(medium: MediumParams) -> Self {
        Self::new(medium, ForwardConfig::default())
    }

    pub fn medium(&self) -> &MediumParams {
        &self.medium
    }

    pub fn config(&self) -> &ForwardConfig {
        &self.config
    }

    /// Volume rule over the support of `source`, sized for wave numbers up to
    /// `kappa_abs`. `None` for the zero source.
    pub fn rule_for(&self, source: &SourcePair, kappa_abs: f64) -> Result<Option<VolumeRule>> {
        let Some(b) = source.support() else {
            return Ok(None);
        };
        let orders = self
            .config
            .orders
            .for_wavenumber(kappa_abs, b.radius, self.config.nodes_per_wavelength);
        Ok(Some(VolumeRule::ball(b.center, b.radius, orders)?))
    }

    fn check_outside(source: &SourcePair, points: &[Point]) -> Result<()> {
        if let Some(b) = source.support() {
            for p in points {
                let dist = (p - b.center).norm() - b.radius;
                if dist <= 0.0 {
                    return Err(Error::InsideSupport {
                        point: [p.x, p.y, p.z],
                        distance: dist,
                    });
                }
            }
        }
        Ok(())
    }

    fn prepare(&self, source: &SourcePair, points: &[Point], fp: &FrequencyPoint) -> Result<Option<(VolumeRule, SourceSamples)>> {
        Self::check_outside(source, points)?;
        let Some(rule) = self.rule_for(source, fp.kappa.norm())? else {
            return Ok(None);
        };
        let samples = SourceSamples::new(source, &rule)?;
        samples.check_omega(fp.omega)?;
        Ok(Some((rule, samples)))
    }

    /// E and H at `points` by direct quadrature of the volume integrals.
    pub fn radiate_fields(&self, source: &SourcePair, points: &[Point], fp: &FrequencyPoint) -> Result<FieldSnapshot> {
        let mut snap = FieldSnapshot {
            omega: fp.omega,
            points: points.to_vec(),
            e: vec![CVec3::zeros(); points.len()],
            h: vec![CVec3::zeros(); points.len()],
        };
        let Some((rule, samples)) = self.prepare(source, points, fp)? else {
            return Ok(snap);
        };
        let m = self.medium;
        let eh: Vec<(CVec3, CVec3)> = points
            .par_iter()
            .map(|x| {
                let mut e = CVec3::zeros();
                let mut h = CVec3::zeros();
                for (i, (y, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                    let g = green_kernel(x, y, fp.kappa)? * *w;
                    e += samples.density_e(i, fp.omega, &m) * g;
                    h += samples.density_h(i, fp.omega, &m) * g;
                }
                Ok((e, h))
            })
            .collect::<Result<_>>()?;
        for (i, (e, h)) in eh.into_iter().enumerate() {
            snap.e[i] = e;
            snap.h[i] = h;
        }
        Ok(snap)
    }

    /// `E × ν` on the mesh, integrating `g (D_E × ν)` node by node.
    pub fn boundary_trace_tangential_e(&self, source: &SourcePair, mesh: &SurfaceMesh, fp: &FrequencyPoint) -> Result<Vec<CVec3>> {
        let Some((rule, samples)) = self.prepare(source, &mesh.nodes, fp)? else {
            return Ok(vec![CVec3::zeros(); mesh.len()]);
        };
        let m = self.medium;
        (0..mesh.len())
            .into_par_iter()
            .map(|n| {
                let (x, nu) = (mesh.nodes[n], cvec(&mesh.normals[n]));
                let mut t = CVec3::zeros();
                for (i, (y, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                    let g = green_kernel(&x, y, fp.kappa)? * *w;
                    t += samples.density_e(i, fp.omega, &m).cross(&nu) * g;
                }
                Ok(t)
            })
            .collect()
    }

    /// `E × ν - α H_τ` on the mesh through the combined kernel
    /// `g [D_E × ν - α (D_H - (D_H·ν) ν)]`.
    pub fn boundary_trace_absorbing(
        &self,
        source: &SourcePair,
        mesh: &SurfaceMesh,
        fp: &FrequencyPoint,
        alpha: &[f64],
    ) -> Result<Vec<CVec3>> {
        check_alpha(alpha, mesh)?;
        let Some((rule, samples)) = self.prepare(source, &mesh.nodes, fp)? else {
            return Ok(vec![CVec3::zeros(); mesh.len()]);
        };
        let m = self.medium;
        (0..mesh.len())
            .into_par_iter()
            .map(|n| {
                let (x, nu) = (mesh.nodes[n], mesh.normals[n]);
                let nuc = cvec(&nu);
                let mut t = CVec3::zeros();
                for (i, (y, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                    let g = green_kernel(&x, y, fp.kappa)? * *w;
                    let de = samples.density_e(i, fp.omega, &m);
                    let dh = samples.density_h(i, fp.omega, &m);
                    t += (de.cross(&nuc) - project(&dh, &nu).scale(alpha[n])) * g;
                }
                Ok(t)
            })
            .collect()
    }

    /// Ambient gradients `[j][k] = ∂_j (E × ν)_k` at the mesh nodes, with ν
    /// extended by the analytic normal field. The derivative is moved onto
    /// the density by integration by parts, `∂_{x_j} ∫ g D = ∫ g ∂_{y_j} D`.
    pub fn trace_gradient_by_parts(&self, source: &SourcePair, mesh: &SurfaceMesh, fp: &FrequencyPoint) -> Result<Vec<Matrix3<C64>>> {
        Self::check_outside(source, &mesh.nodes)?;
        let Some(rule) = self.rule_for(source, fp.kappa.norm())? else {
            return Ok(vec![Matrix3::zeros(); mesh.len()]);
        };
        let samples = SourceSamples::with_partials(source, &rule)?;
        samples.check_omega(fp.omega)?;
        let m = self.medium;
        (0..mesh.len())
            .into_par_iter()
            .map(|n| {
                let x = mesh.nodes[n];
                let mut e = CVec3::zeros();
                let mut grad = Matrix3::<C64>::zeros();
                for (i, (y, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                    let g = green_kernel(&x, y, fp.kappa)? * *w;
                    e += samples.density_e(i, fp.omega, &m) * g;
                    for j in 0..3 {
                        let d = samples.density_e_partial(i, j, fp.omega, &m) * g;
                        for k in 0..3 {
                            grad[(j, k)] += d[k];
                        }
                    }
                }
                Ok(trace_gradient_at(mesh, n, &e, &grad))
            })
            .collect()
    }

    /// Fields of several sources at several frequencies through shared
    /// kernel matrices. All sources must lie inside the support of the first
    /// nonzero one. Result is indexed `[source][frequency]`.
    pub fn fields_batch(
        &self,
        sources: &[&SourcePair],
        targets: &[Point],
        omegas: &[C64],
        want: Want,
    ) -> Result<Vec<Vec<FieldBatch>>> {
        let kmax = omegas.iter().map(|w| self.medium.kappa(*w).norm()).fold(0.0, f64::max);
        let Some(first) = sources.iter().find(|s| !s.is_zero()) else {
            let empty = FieldBatch {
                e: vec![CVec3::zeros(); targets.len()],
                h: vec![CVec3::zeros(); targets.len()],
                grad_e: if want.grad_e { vec![Matrix3::zeros(); targets.len()] } else { vec![] },
            };
            return Ok(vec![vec![empty; omegas.len()]; sources.len()]);
        };
        let rule = self.rule_for(first, kmax)?.expect("nonzero source");
        self.fields_batch_on(sources, targets, omegas, want, &rule)
    }

    /// [`fields_batch`](Self::fields_batch) on an explicit volume rule.
    pub fn fields_batch_on(
        &self,
        sources: &[&SourcePair],
        targets: &[Point],
        omegas: &[C64],
        want: Want,
        rule: &VolumeRule,
    ) -> Result<Vec<Vec<FieldBatch>>> {
        for s in sources {
            Self::check_outside(s, targets)?;
            if let Some(b) = s.support() {
                if (b.center - rule.center).norm() + b.radius > rule.radius * (1.0 + 1e-12) {
                    return Err(Error::InvalidArgument("source support exceeds the shared volume rule".into()));
                }
            }
        }
        let samples: Vec<SourceSamples> = sources
            .iter()
            .map(|s| {
                if want.grad_e {
                    SourceSamples::with_partials(s, rule)
                } else {
                    SourceSamples::new(s, rule)
                }
            })
            .collect::<Result<_>>()?;
        for s in &samples {
            for w in omegas {
                s.check_omega(*w)?;
            }
        }
        let mut channels = vec![];
        if want.e {
            channels.extend([J_EPS, CURL_MU, GD_EPS]);
        }
        if want.h {
            channels.extend([J_MU, CURL_EPS, GD_MU]);
        }
        if want.grad_e {
            channels.extend(PARTIALS..N_CHANNELS);
        }
        let refs: Vec<&SourceSamples> = samples.iter().collect();
        let dens = DensityColumns::new(&refs, &rule.weights, &channels);
        let m = self.medium;
        let mut out = vec![Vec::with_capacity(omegas.len()); sources.len()];
        for &omega in omegas {
            let ap = apply_kernel(targets, &rule.nodes, &dens.mat, m.kappa(omega))?;
            for (si, s) in samples.iter().enumerate() {
                let idx = &dens.index[si];
                let c = s.coefficients(omega, &m);
                let mut fb = FieldBatch::default();
                for x in 0..targets.len() {
                    if want.e {
                        fb.e.push(
                            ap.potential(idx[J_EPS], x) * c.ce + ap.potential(idx[CURL_MU], x) + ap.potential(idx[GD_EPS], x) * c.ge,
                        );
                    }
                    if want.h {
                        fb.h.push(
                            ap.potential(idx[J_MU], x) * c.ch + ap.potential(idx[CURL_EPS], x) + ap.potential(idx[GD_MU], x) * c.gh,
                        );
                    }
                    if want.grad_e {
                        let mut gmat = Matrix3::<C64>::zeros();
                        for j in 0..3 {
                            let row = ap.potential(idx[partial_channel(J_EPS, j)], x) * c.ce
                                + ap.potential(idx[partial_channel(CURL_MU, j)], x)
                                + ap.potential(idx[partial_channel(GD_EPS, j)], x) * c.ge;
                            for k in 0..3 {
                                gmat[(j, k)] = row[k];
                            }
                        }
                        fb.grad_e.push(gmat);
                    }
                }
                out[si].push(fb);
            }
        }
        Ok(out)
    }

    fn stencil_fields(&self, source: &SourcePair, snapshot: &FieldSnapshot, h: f64) -> Result<(Vec<Point>, FieldSnapshot)> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("stencil width must be positive, got {h}")));
        }
        let mut pts = Vec::with_capacity(snapshot.points.len() * 6);
        for p in &snapshot.points {
            for j in 0..3 {
                let mut e = Point::zeros();
                e[j] = h;
                pts.push(p + e);
                pts.push(p - e);
            }
        }
        if let Some(b) = source.support() {
            for p in &pts {
                if (p - b.center).norm() <= b.radius {
                    return Err(Error::InvalidArgument(format!(
                        "finite-difference stencil point {p:?} enters the source support"
                    )));
                }
            }
        }
        let fp = FrequencyPoint {
            omega: snapshot.omega,
            kappa: self.medium.kappa(snapshot.omega),
        };
        let s = self.radiate_fields(source, &pts, &fp)?;
        Ok((pts, s))
    }

    /// Central-difference check of `curl E - iωμ₀H = J_mu` and
    /// `curl H + iωε₀E = J_eps` at the snapshot points. The scale is
    /// `max(|ωμ₀H|, |ωε₀E|)` over the probes.
    pub fn residual_maxwell(&self, snapshot: &FieldSnapshot, source: &SourcePair, h: f64) -> Result<Residual> {
        let (_, s) = self.stencil_fields(source, snapshot, h)?;
        let (w, m) = (snapshot.omega, self.medium);
        let mut res = Residual {
            first: 0.0,
            second: 0.0,
            scale: 0.0,
        };
        for (p, x) in snapshot.points.iter().enumerate() {
            let d = |f: &[CVec3], j: usize, k: usize| (f[6 * p + 2 * j][k] - f[6 * p + 2 * j + 1][k]) / (2.0 * h);
            let curl = |f: &[CVec3]| CVec3::new(d(f, 1, 2) - d(f, 2, 1), d(f, 2, 0) - d(f, 0, 2), d(f, 0, 1) - d(f, 1, 0));
            let r1 = curl(&s.e) - snapshot.h[p] * (I * w * m.mu0()) - source.j_mu.eval(x);
            let r2 = curl(&s.h) + snapshot.e[p] * (I * w * m.eps0()) - source.j_eps.eval(x);
            res.first = res.first.max(r1.norm());
            res.second = res.second.max(r2.norm());
            res.scale = res
                .scale
                .max((snapshot.h[p] * (w * m.mu0())).norm())
                .max((snapshot.e[p] * (w * m.eps0())).norm());
        }
        Ok(res)
    }

    /// 7-point Laplacian check of `ΔE + κ²E = -D_E` and `ΔH + κ²H = -D_H`.
    /// The scale is `max(|κ²E|, |κ²H|)` over the probes.
    pub fn residual_helmholtz(&self, snapshot: &FieldSnapshot, source: &SourcePair, h: f64) -> Result<Residual> {
        let (_, s) = self.stencil_fields(source, snapshot, h)?;
        let fp = FrequencyPoint::new(snapshot.omega, &self.medium);
        let k2 = fp.kappa * fp.kappa;
        // Right-hand sides vanish outside the support; evaluate them anyway so
        // probes inside a support would be caught by the residual.
        let rhs = if source.is_zero() {
            None
        } else {
            Some(SourceSamples::at_points(source, &snapshot.points)?)
        };
        let mut res = Residual {
            first: 0.0,
            second: 0.0,
            scale: 0.0,
        };
        for p in 0..snapshot.points.len() {
            let lap = |f: &[CVec3], c: &CVec3| {
                let mut acc = c.scale(-6.0);
                for q in 0..6 {
                    acc += f[6 * p + q];
                }
                acc.unscale(h * h)
            };
            let (de, dh) = match &rhs {
                Some(r) => (r.density_e(p, fp.omega, &self.medium), r.density_h(p, fp.omega, &self.medium)),
                None => (CVec3::zeros(), CVec3::zeros()),
            };
            let r1 = lap(&s.e, &snapshot.e[p]) + snapshot.e[p] * k2 + de;
            let r2 = lap(&s.h, &snapshot.h[p]) + snapshot.h[p] * k2 + dh;
            res.first = res.first.max(r1.norm());
            res.second = res.second.max(r2.norm());
            res.scale = res.scale.max((snapshot.e[p] * k2).norm()).max((snapshot.h[p] * k2).norm());
        }
        Ok(res)
    }

    /// Silver-Müller defect `max |x| |√μ₀ H × σ - √ε₀ E|` over `n_dirs`
    /// directions `σ` on the sphere of radius `radius` about the origin.
    pub fn radiation_defect(&self, source: &SourcePair, radius: f64, fp: &FrequencyPoint, n_dirs: usize) -> Result<f64> {
        let golden = PI * (3.0 - 5f64.sqrt());
        let dirs: Vec<Point> = (0..n_dirs)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n_dirs as f64;
                let s = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                Point::new(s * phi.cos(), s * phi.sin(), z)
            })
            .collect();
        let pts: Vec<Point> = dirs.iter().map(|d| d * radius).collect();
        let snap = self.radiate_fields(source, &pts, fp)?;
        let (se, sm) = (self.medium.eps0().sqrt(), self.medium.mu0().sqrt());
        Ok(dirs
            .iter()
            .enumerate()
            .map(|(i, d)| radius * (snap.h[i].cross(&cvec(d)).scale(sm) - snap.e[i].scale(se)).norm())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn check_alpha(alpha: &[f64], mesh: &SurfaceMesh) -> Result<()> {
    if alpha.len() != mesh.len() {
        return Err(Error::InvalidArgument(format!(
            "alpha has {} values for {} mesh nodes",
            alpha.len(),
            mesh.len()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {a}")));
    }
    Ok(())
}

/// Builds `E × ν` and `E × ν - α H_τ` from fields on the mesh.
pub fn assemble_traces(mesh: &SurfaceMesh, e: &[CVec3], h: &[CVec3], alpha: &[f64]) -> (Vec<CVec3>, Vec<CVec3>) {
    let mut te = Vec::with_capacity(mesh.len());
    let mut ta = Vec::with_capacity(mesh.len());
    for n in 0..mesh.len() {
        let nu = mesh.normals[n];
        let t = e[n].cross(&cvec(&nu));
        ta.push(t - project(&h[n], &nu).scale(alpha[n]));
        te.push(t);
    }
    (te, ta)
}

fn trace_gradient_at(mesh: &SurfaceMesh, n: usize, e: &CVec3, grad_e: &Matrix3<C64>) -> Matrix3<C64> {
    let nu = cvec(&mesh.normals[n]);
    let dnu = mesh.normal_jacobian(n);
    let mut out = Matrix3::<C64>::zeros();
    for j in 0..3 {
        let dje = CVec3::from_fn(|k, _| grad_e[(j, k)]);
        let djnu = CVec3::from_fn(|k, _| C64::new(dnu[(j, k)], 0.0));
        let row = dje.cross(&nu) + e.cross(&djnu);
        for k in 0..3 {
            out[(j, k)] = row[k];
        }
    }
    out
}

/// `[j][k] = ∂_j (E × ν)_k` from ambient field gradients and the normal
/// Jacobian of the mesh.
pub fn assemble_trace_gradient(mesh: &SurfaceMesh, e: &[CVec3], grad_e: &[Matrix3<C64>]) -> Vec<Matrix3<C64>> {
    (0..mesh.len()).map(|n| trace_gradient_at(mesh, n, &e[n], &grad_e[n])).collect()
}
