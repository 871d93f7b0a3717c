//! Time-domain ground truth from the Kirchhoff formula.
//!
//! Each Cartesian component of `e` and `h` solves `ε₀μ₀ ∂ₜ²u = Δu` with
//!
//! ```text
//! e(0) = -√(2π)/ε₀ Jε      ∂ₜe(0) = √(2π)/(ε₀μ₀) curl Jμ
//! h(0) =  √(2π)/μ₀ Jμ      ∂ₜh(0) = √(2π)/(ε₀μ₀) curl Jε
//! ```
//!
//! and is evaluated pointwise as `u = ∂ₜ(t M_{ct} f₀) + t M_{ct} f₁`, where
//! `M_r` is the mean over the sphere of radius `r`. Nothing is time-stepped,
//! so the sharp Huygens cut-off is exact.
//!
//! With this normalisation `(1/√(2π)) ∫ e(x,t) e^{iωt} dt` is the
//! time-harmonic `E(x, ω)` of [`crate::forward`].
//!
//! The sphere mean is taken over the cap the sphere cuts from the support
//! ball. On that cap the squared distance to the bump centre is linear in the
//! polar cosine, so the polar integral becomes a radial one and reuses the
//! `ρ = b tanh(s)` substitution of the volume rule. The azimuthal integrand is
//! a trigonometric polynomial, which the trapezoid rule integrates exactly
//! once it has enough nodes.

use crate::field::{Support, VectorField};
use crate::forward::{assemble_trace_gradient, assemble_traces, check_alpha, ForwardSolver, FrequencyPoint};
use crate::geometry::{tangent_frame, MediumParams, SurfaceMesh};
use crate::quadrature::{adaptive_gk15, gauss_legendre_on, periodic_trapezoid};
use crate::source::{sobolev_norm_with, SourcePair};
use crate::spectral::{band_energy, surface_norm_sq, TraceNorm};
use crate::volume::QuadratureOrders;
use crate::{Error, Point, Result, CVec3, C64};
use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

// Upper end of the tanh-mapped radial variable; the bump is below 1e-43 there.
const RADIAL_SPAN: f64 = 3.0;

/// Quadrature of the sphere means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KirchhoffConfig {
    /// Gauss nodes across the cap.
    pub radial: usize,
    pub azimuth: usize,
    /// Re-evaluate with doubled orders and fail when the two differ by more
    /// than `check_tol` times the integrand mass.
    pub self_check: bool,
    pub check_tol: f64,
}

impl Default for KirchhoffConfig {
    fn default() -> Self {
        KirchhoffConfig {
            radial: 32,
            azimuth: 8,
            self_check: true,
            check_tol: 1e-10,
        }
    }
}

impl KirchhoffConfig {
    fn validate(&self) -> Result<()> {
        if self.radial < 2 || self.azimuth < 2 || !(self.check_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid Kirchhoff quadrature {self:?}")));
        }
        Ok(())
    }
}

/// Mean of `f(y, σ)` over the sphere `y = x + rσ`, restricted to where
/// `support` can be nonzero. Returns the mean and the mean of `|f|`.
fn sphere_mean<F>(support: Support, x: &Point, r: f64, radial: usize, azimuth: usize, f: F) -> (CVec3, f64)
where
    F: Fn(&Point, &Point) -> CVec3,
{
    let (phis, wphi) = periodic_trapezoid(azimuth);
    let ring = |pole: &Point, u: f64, wu: f64, acc: &mut (CVec3, f64)| {
        let (t1, t2) = tangent_frame(pole);
        let s = (1.0 - u * u).max(0.0).sqrt();
        for (phi, wp) in phis.iter().zip(&wphi) {
            let sigma = pole * u + (t1 * phi.cos() + t2 * phi.sin()) * s;
            let v = f(&(x + sigma * r), &sigma);
            let w = wu * wp / (4.0 * PI);
            acc.0 += v.scale(w);
            acc.1 += w * v.norm();
        }
    };
    let mut acc = (CVec3::zeros(), 0.0);
    match support {
        Support::Empty => {}
        Support::Unbounded => {
            let (us, wus) = gauss_legendre_on(radial, -1.0, 1.0);
            for (u, wu) in us.iter().zip(&wus) {
                ring(&Point::z(), *u, *wu, &mut acc);
            }
        }
        Support::Ball { center, radius: b } => {
            let to_center = center - x;
            let dist = to_center.norm();
            let lo = (dist - r).abs();
            let hi = (dist + r).min(b);
            if lo >= b * RADIAL_SPAN.tanh() {
                return acc;
            }
            if dist <= 1e-14 * b.max(r) {
                // Sphere centred on the bump: the whole sphere sits at ρ = r.
                let (us, wus) = gauss_legendre_on(radial, -1.0, 1.0);
                for (u, wu) in us.iter().zip(&wus) {
                    ring(&Point::z(), *u, *wu, &mut acc);
                }
                return acc;
            }
            let pole = to_center / dist;
            let s_lo = (lo / b).atanh();
            let s_hi = if hi >= b { RADIAL_SPAN } else { (hi / b).atanh().min(RADIAL_SPAN) };
            if !(s_hi > s_lo) {
                return acc;
            }
            let (ss, ws) = gauss_legendre_on(radial, s_lo, s_hi);
            for (s, w) in ss.iter().zip(&ws) {
                let th = s.tanh();
                let rho = b * th;
                let drho = b * (1.0 - th * th);
                // ρ² = D² + r² - 2rDu
                let u = ((dist * dist + r * r - rho * rho) / (2.0 * r * dist)).clamp(-1.0, 1.0);
                let wu = w * drho * rho / (r * dist);
                ring(&pole, u, wu, &mut acc);
            }
        }
    }
    acc
}

/// Initial data of one scalar wave problem (applied componentwise) with the
/// derivatives the Kirchhoff formula needs.
#[derive(Debug, Clone)]
pub struct WaveData {
    f0: VectorField,
    df0: [VectorField; 3],
    f1: VectorField,
}

impl WaveData {
    pub fn new(f0: VectorField, f1: VectorField) -> Result<Self> {
        let df0 = [f0.partial(0)?, f0.partial(1)?, f0.partial(2)?];
        Ok(WaveData { f0, df0, f1 })
    }

    pub fn is_zero(&self) -> bool {
        self.f0.is_zero() && self.f1.is_zero()
    }

    fn evaluate_with(&self, c: f64, x: &Point, t: f64, radial: usize, azimuth: usize) -> (CVec3, f64) {
        let r = c * t;
        let (m0, a0) = sphere_mean(self.f0.support(), x, r, radial, azimuth, |y, sigma| {
            let mut v = self.f0.eval(y);
            for j in 0..3 {
                v += self.df0[j].eval(y).scale(r * sigma[j]);
            }
            v
        });
        let (m1, a1) = sphere_mean(self.f1.support(), x, r, radial, azimuth, |y, _| self.f1.eval(y));
        (m0 + m1.scale(t), a0 + t * a1)
    }

    /// `∂ₜ(t M_{ct} f₀)(x) + t M_{ct} f₁(x)`.
    pub fn evaluate(&self, c: f64, x: &Point, t: f64, config: &KirchhoffConfig) -> Result<CVec3> {
        if !(t >= 0.0 && t.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("need t ≥ 0 and c > 0, got t={t}, c={c}")));
        }
        config.validate()?;
        if self.is_zero() {
            return Ok(CVec3::zeros());
        }
        if t == 0.0 {
            return Ok(self.f0.eval(x));
        }
        if !config.self_check {
            return Ok(self.evaluate_with(c, x, t, config.radial, config.azimuth).0);
        }
        let (coarse, _) = self.evaluate_with(c, x, t, config.radial, config.azimuth);
        let (fine, mass) = self.evaluate_with(c, x, t, 2 * config.radial, 2 * config.azimuth);
        let diff = (fine - coarse).norm();
        if diff > config.check_tol * mass {
            return Err(Error::Quadrature(format!(
                "sphere mean at x={:?}, t={t} changed by {diff:.3e} under order doubling (integrand mass {mass:.3e})",
                [x.x, x.y, x.z]
            )));
        }
        Ok(fine)
    }
}

/// Kirchhoff solution of `∂ₜ²u = c²Δu`, `u(0) = f0`, `∂ₜu(0) = f1`, at `(x, t)`.
pub fn kirchhoff_evaluate(
    f0: &VectorField,
    f1: &VectorField,
    c: f64,
    x: &Point,
    t: f64,
    config: &KirchhoffConfig,
) -> Result<CVec3> {
    WaveData::new(f0.clone(), f1.clone())?.evaluate(c, x, t, config)
}

/// `e` and `h` at a time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSnapshot {
    pub t: f64,
    pub points: Vec<Point>,
    pub e: Vec<CVec3>,
    pub h: Vec<CVec3>,
}

impl TimeSnapshot {
    pub const CSV_HEADER: &'static str =
        "t,node,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez,re_hx,im_hx,re_hy,im_hy,re_hz,im_hz";

    /// Largest `|e| + |h|` over the points.
    pub fn sup(&self) -> f64 {
        self.e.iter().zip(&self.h).map(|(e, h)| e.norm() + h.norm()).fold(0.0, f64::max)
    }
}

/// Long-format time traces, one row per snapshot and point.
pub fn write_time_csv<W: Write>(snapshots: &[TimeSnapshot], mut w: W) -> Result<()> {
    writeln!(w, "{}", TimeSnapshot::CSV_HEADER)?;
    for s in snapshots {
        for (n, (e, h)) in s.e.iter().zip(&s.h).enumerate() {
            write!(w, "{:e},{n}", s.t)?;
            for v in e.iter().chain(h.iter()) {
                write!(w, ",{:e},{:e}", v.re, v.im)?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// The time-domain fields radiated by a source pair.
#[derive(Debug, Clone)]
pub struct WaveSolution {
    medium: MediumParams,
    support: Option<crate::Bump>,
    e: WaveData,
    h: WaveData,
    grad_e: Option<Box<[WaveData; 3]>>,
    config: KirchhoffConfig,
}

impl WaveSolution {
    pub fn new(source: &SourcePair, medium: &MediumParams, config: KirchhoffConfig) -> Result<Self> {
        config.validate()?;
        let root = (2.0 * PI).sqrt();
        let (eps, mu) = (medium.eps0(), medium.mu0());
        let real = |s: f64| C64::new(s, 0.0);
        let e = WaveData::new(
            source.j_eps.scale(real(-root / eps)),
            source.j_mu.curl()?.scale(real(root / (eps * mu))),
        )?;
        let h = WaveData::new(
            source.j_mu.scale(real(root / mu)),
            source.j_eps.curl()?.scale(real(root / (eps * mu))),
        )?;
        Ok(WaveSolution {
            medium: *medium,
            support: source.support(),
            e,
            h,
            grad_e: None,
            config,
        })
    }

    /// Also prepares `∂_j e`, which solve the same wave problem with
    /// differentiated data.
    pub fn with_gradients(mut self) -> Result<Self> {
        let d = |j: usize| WaveData::new(self.e.f0.partial(j)?, self.e.f1.partial(j)?);
        self.grad_e = Some(Box::new([d(0)?, d(1)?, d(2)?]));
        Ok(self)
    }

    pub fn wave_speed(&self) -> f64 {
        self.medium.wave_speed()
    }

    pub fn config(&self) -> &KirchhoffConfig {
        &self.config
    }

    /// Times at which `x` can see a nonzero field, or `None` for the zero
    /// source.
    pub fn active_window(&self, x: &Point) -> Option<(f64, f64)> {
        let b = self.support?;
        let c = self.wave_speed();
        let dist = (x - b.center).norm();
        Some((((dist - b.radius) / c).max(0.0), (dist + b.radius) / c))
    }

    pub fn fields_at(&self, x: &Point, t: f64) -> Result<(CVec3, CVec3)> {
        let c = self.wave_speed();
        Ok((self.e.evaluate(c, x, t, &self.config)?, self.h.evaluate(c, x, t, &self.config)?))
    }

    /// `[j][k] = ∂_j e_k`; needs [`WaveSolution::with_gradients`].
    pub fn grad_e_at(&self, x: &Point, t: f64) -> Result<Matrix3<C64>> {
        let g = self
            .grad_e
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("field gradients were not prepared".into()))?;
        let c = self.wave_speed();
        let mut out = Matrix3::zeros();
        for (j, d) in g.iter().enumerate() {
            let row = d.evaluate(c, x, t, &self.config)?;
            for k in 0..3 {
                out[(j, k)] = row[k];
            }
        }
        Ok(out)
    }

    pub fn snapshot(&self, points: &[Point], t: f64) -> Result<TimeSnapshot> {
        let eh: Vec<(CVec3, CVec3)> = points.par_iter().map(|x| self.fields_at(x, t)).collect::<Result<_>>()?;
        let (e, h) = eh.into_iter().unzip();
        Ok(TimeSnapshot {
            t,
            points: points.to_vec(),
            e,
            h,
        })
    }

    /// Surface integrand of the boundary energy at time `t`.
    fn boundary_density(&self, mesh: &SurfaceMesh, alpha: &[f64], t: f64, norm: TraceNorm) -> Result<f64> {
        let snap = self.snapshot(&mesh.nodes, t)?;
        let (te, ta) = assemble_traces(mesh, &snap.e, &snap.h, alpha);
        match norm {
            TraceNorm::Absorbing => surface_norm_sq(&ta, mesh, 0, None),
            TraceNorm::TangentialH1 => {
                let grads: Vec<Matrix3<C64>> =
                    mesh.nodes.par_iter().map(|x| self.grad_e_at(x, t)).collect::<Result<_>>()?;
                let g = assemble_trace_gradient(mesh, &snap.e, &grads);
                surface_norm_sq(&te, mesh, 1, Some(&g))
            }
        }
    }

    /// `∫_{t0}^{t1}` of the boundary energy density by adaptive quadrature,
    /// clipped to when any node can see the source. The sphere means are
    /// self-checked at a few spot times and evaluated unchecked inside the
    /// time quadrature.
    pub fn boundary_energy(
        &self,
        mesh: &SurfaceMesh,
        alpha: &[f64],
        t0: f64,
        t1: f64,
        norm: TraceNorm,
    ) -> Result<f64> {
        check_alpha(alpha, mesh)?;
        if norm == TraceNorm::TangentialH1 && self.grad_e.is_none() {
            return Err(Error::InvalidArgument("the H¹ boundary energy needs field gradients".into()));
        }
        let Some((lo, hi)) = self.mesh_window(mesh) else {
            return Ok(0.0);
        };
        let (a, b) = (lo.max(t0), hi.min(t1));
        if !(b > a) {
            return Ok(0.0);
        }
        if self.config.self_check {
            for s in [0.3, 0.5, 0.7] {
                self.boundary_density(mesh, alpha, a + s * (b - a), norm)?;
            }
        }
        let mut bulk = self.clone();
        bulk.config.self_check = false;
        let f = |t: f64| vec![C64::new(bulk.boundary_density(mesh, alpha, t, norm).unwrap_or(f64::NAN), 0.0)];
        Ok(adaptive_gk15(f, a, b, 1e-9, 0.0, 200)?[0].re)
    }

    fn mesh_window(&self, mesh: &SurfaceMesh) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for x in &mesh.nodes {
            let (a, b) = self.active_window(x)?;
            out = Some(match out {
                None => (a, b),
                Some((lo, hi)) => (lo.min(a), hi.max(b)),
            });
        }
        out
    }
}

/// `e`, `h` at time `t` with the default quadrature.
pub fn time_fields(source: &SourcePair, points: &[Point], t: f64, medium: &MediumParams) -> Result<TimeSnapshot> {
    WaveSolution::new(source, medium, KirchhoffConfig::default())?.snapshot(points, t)
}

/// Largest Faraday and Ampère residuals `|μ₀∂ₜh + curl e|`,
/// `|ε₀∂ₜe - curl h|` over probes and times, by central differences of step
/// `step` in `t` and `x`. `scale` is the largest `|ε₀∂ₜe| + |μ₀∂ₜh|` seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellResidual {
    pub faraday: f64,
    pub ampere: f64,
    pub scale: f64,
}

impl MaxwellResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.faraday.max(self.ampere) / self.scale
        }
    }
}

pub fn maxwell_equiv_check(
    source: &SourcePair,
    probes: &[Point],
    t_list: &[f64],
    medium: &MediumParams,
    step: f64,
) -> Result<MaxwellResidual> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    if let Some(t) = t_list.iter().find(|t| !(**t - step >= 0.0)) {
        return Err(Error::InvalidArgument(format!("time stencil at t={t} reaches below 0 with step {step}")));
    }
    let sol = WaveSolution::new(source, medium, KirchhoffConfig::default())?;
    let (eps, mu) = (medium.eps0(), medium.mu0());
    let jobs: Vec<(Point, f64)> = probes.iter().flat_map(|p| t_list.iter().map(move |t| (*p, *t))).collect();
    let per: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .map(|(x, t)| {
            let (ep, hp) = sol.fields_at(x, t + step)?;
            let (em, hm) = sol.fields_at(x, t - step)?;
            let dt_e = (ep - em).scale(0.5 / step);
            let dt_h = (hp - hm).scale(0.5 / step);
            // d[j] = (∂_j e, ∂_j h)
            let mut d = [(CVec3::zeros(), CVec3::zeros()); 3];
            for (j, dj) in d.iter_mut().enumerate() {
                let mut off = Point::zeros();
                off[j] = step;
                let (e1, h1) = sol.fields_at(&(x + off), *t)?;
                let (e0, h0) = sol.fields_at(&(x - off), *t)?;
                *dj = ((e1 - e0).scale(0.5 / step), (h1 - h0).scale(0.5 / step));
            }
            let curl = |f: &dyn Fn(usize) -> CVec3| {
                CVec3::new(f(1)[2] - f(2)[1], f(2)[0] - f(0)[2], f(0)[1] - f(1)[0])
            };
            let curl_e = curl(&|j| d[j].0);
            let curl_h = curl(&|j| d[j].1);
            let faraday = (dt_h.scale(mu) + curl_e).norm();
            let ampere = (dt_e.scale(eps) - curl_h).norm();
            Ok((faraday, ampere, dt_e.scale(eps).norm() + dt_h.scale(mu).norm()))
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().fold(
        MaxwellResidual {
            faraday: 0.0,
            ampere: 0.0,
            scale: 0.0,
        },
        |acc, (f, a, s)| MaxwellResidual {
            faraday: acc.faraday.max(f),
            ampere: acc.ampere.max(a),
            scale: acc.scale.max(s),
        },
    ))
}

/// Relative errors `|E_time - E_freq| / |E_freq|` at `x`, one per frequency,
/// where `E_time = (1/√(2π)) ∫₀^{T_max} e(x,t) e^{iωt} dt`.
pub fn fourier_laplace_errors(
    solver: &ForwardSolver,
    source: &SourcePair,
    x: &Point,
    omegas: &[f64],
    t_max: f64,
) -> Result<Vec<f64>> {
    let medium = solver.medium();
    let sol = WaveSolution::new(source, medium, KirchhoffConfig::default())?;
    let Some((lo, hi)) = sol.active_window(x) else {
        return Ok(vec![0.0; omegas.len()]);
    };
    if t_max < hi {
        return Err(Error::InvalidArgument(format!(
            "T_max = {t_max} cuts the signal at x, which lasts until t = {hi}"
        )));
    }
    let n = omegas.len();
    let f = |t: f64| -> Vec<C64> {
        let e = match sol.e.evaluate(sol.wave_speed(), x, t, &sol.config) {
            Ok(e) => e,
            Err(_) => return vec![C64::new(f64::NAN, 0.0); 3 * n],
        };
        omegas
            .iter()
            .flat_map(|w| {
                let phase = C64::from_polar(1.0, w * t);
                [e[0] * phase, e[1] * phase, e[2] * phase]
            })
            .collect()
    };
    let integral = adaptive_gk15(f, lo, hi, 1e-11, 0.0, 400)?;
    let root = (2.0 * PI).sqrt();
    omegas
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let e_freq = solver.radiate_fields(source, &[*x], &FrequencyPoint::new(*w, medium))?.e[0];
            let e_time = CVec3::new(integral[3 * i], integral[3 * i + 1], integral[3 * i + 2]).scale(1.0 / root);
            let denom = e_freq.norm();
            Ok(if denom == 0.0 {
                e_time.norm()
            } else {
                (e_time - e_freq).norm() / denom
            })
        })
        .collect()
}

pub fn fourier_laplace_check(solver: &ForwardSolver, source: &SourcePair, x: &Point, omega: f64, t_max: f64) -> Result<f64> {
    Ok(fourier_laplace_errors(solver, source, x, &[omega], t_max)?[0])
}

/// Frequency-side settings of [`plancherel_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlancherelConfig {
    pub panel_width: f64,
    pub nodes_per_panel: usize,
    /// Window used to extrapolate the band tail beyond `ω_max`.
    pub fit_window: f64,
    /// Largest admissible tail fraction on either side.
    pub max_tail_fraction: f64,
}

impl Default for PlancherelConfig {
    fn default() -> Self {
        PlancherelConfig {
            panel_width: 2.0,
            nodes_per_panel: 8,
            fit_window: 8.0,
            max_tail_fraction: 1e-3,
        }
    }
}

/// Boundary energies on both sides of Parseval's identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlancherelReport {
    pub frequency_side: f64,
    pub time_side: f64,
    pub mismatch: f64,
    pub beyond_fraction: f64,
}

/// Compares `∫_{|ω|<ω_max}` of a trace norm with the time integral of the
/// same norm of the Kirchhoff traces.
#[allow(clippy::too_many_arguments)]
pub fn plancherel_check(
    solver: &ForwardSolver,
    source: &SourcePair,
    mesh: &SurfaceMesh,
    alpha: &[f64],
    omega_max: f64,
    t_max: f64,
    norm: TraceNorm,
    config: &PlancherelConfig,
) -> Result<PlancherelReport> {
    check_alpha(alpha, mesh)?;
    let mut sol = WaveSolution::new(source, solver.medium(), KirchhoffConfig::default())?;
    if norm == TraceNorm::TangentialH1 {
        sol = sol.with_gradients()?;
    }
    if let Some((_, hi)) = sol.mesh_window(mesh) {
        if t_max < hi {
            return Err(Error::Quadrature(format!(
                "time tail not resolved: boundary signal lasts until t = {hi} > T_max = {t_max}"
            )));
        }
    }
    let band = band_energy(
        solver,
        source,
        mesh,
        alpha,
        &[0.0, omega_max],
        config.panel_width,
        config.nodes_per_panel,
        norm,
    )?;
    let beyond_fraction = band.beyond_fraction(config.fit_window);
    if !(beyond_fraction < config.max_tail_fraction) {
        return Err(Error::Quadrature(format!(
            "frequency tail beyond ω_max = {omega_max} not resolved: estimated fraction {beyond_fraction:.3e}"
        )));
    }
    let frequency_side = band.total();
    let time_side = sol.boundary_energy(mesh, alpha, 0.0, t_max, norm)?;
    let mismatch = if frequency_side == 0.0 && time_side == 0.0 {
        0.0
    } else {
        (frequency_side - time_side).abs() / frequency_side
    };
    Ok(PlancherelReport {
        frequency_side,
        time_side,
        mismatch,
        beyond_fraction,
    })
}

/// `(‖Jε‖² + ‖Jμ‖²) / ∫₀^T ‖e×ν - αh_τ‖² dt` with `T = √(ε₀μ₀) d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observability {
    pub ratio: f64,
    pub source_energy: f64,
    pub boundary_energy: f64,
    pub t_final: f64,
}

pub fn observability_ratio(
    source: &SourcePair,
    mesh: &SurfaceMesh,
    medium: &MediumParams,
    alpha: &[f64],
    diameter: f64,
) -> Result<Observability> {
    if source.is_zero() {
        return Err(Error::InvalidArgument("observability needs a nonzero source".into()));
    }
    if !(diameter > 0.0) {
        return Err(Error::InvalidArgument(format!("diameter must be positive, got {diameter}")));
    }
    let t_final = medium.slowness() * diameter;
    let source_energy = sobolev_norm_with(source, 0, QuadratureOrders::default())?.powi(2);
    let sol = WaveSolution::new(source, medium, KirchhoffConfig::default())?;
    let boundary_energy = sol.boundary_energy(mesh, alpha, 0.0, t_final, TraceNorm::Absorbing)?;
    if !(boundary_energy > 0.0) {
        return Err(Error::LemmaViolation(format!(
            "zero boundary energy for a nonzero source: source energy {source_energy:.6e}, \
             T = {t_final}, {} mesh nodes, support {:?}, boundary window {:?}",
            mesh.len(),
            source.support(),
            sol.mesh_window(mesh)
        )));
    }
    Ok(Observability {
        ratio: source_energy / boundary_energy,
        source_energy,
        boundary_energy,
        t_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Poly;

    #[test]
    fn polynomial_data_is_exact() {
        // u = x² + c²t² + t solves the wave equation with u(0) = x², u_t(0) = 1.
        let f0 = VectorField::polynomial([Poly::monomial(1.0, [2, 0, 0]), Poly::zero(), Poly::zero()]);
        let f1 = VectorField::constant([1.0, 0.0, 0.0]);
        let x = Point::new(0.3, -0.2, 0.5);
        let (c, t) = (1.5, 0.7);
        let u = kirchhoff_evaluate(&f0, &f1, c, &x, t, &KirchhoffConfig::default()).unwrap();
        let expected = x.x * x.x + c * c * t * t + t;
        assert!((u[0].re - expected).abs() < 1e-12, "{} vs {expected}", u[0].re);
        assert!(u[1].norm() < 1e-14);
    }

    #[test]
    fn initial_value_and_zero_data() {
        let f0 = VectorField::constant([1.0, 2.0, 3.0]);
        let x = Point::new(0.1, 0.2, 0.3);
        let cfg = KirchhoffConfig::default();
        let u = kirchhoff_evaluate(&f0, &VectorField::zero(), 1.0, &x, 0.0, &cfg).unwrap();
        assert_eq!(u, f0.eval(&x));
        let z = kirchhoff_evaluate(&VectorField::zero(), &VectorField::zero(), 1.0, &x, 2.0, &cfg).unwrap();
        assert_eq!(z, CVec3::zeros());
        assert!(kirchhoff_evaluate(&f0, &f0, 1.0, &x, -1.0, &cfg).is_err());
        assert!(kirchhoff_evaluate(&f0, &f0, 0.0, &x, 1.0, &cfg).is_err());
    }
}
