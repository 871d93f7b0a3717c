//! Analytic continuation of the data functionals and the explicit bounds
//! around it.
//!
//! ```text
//! I₀(k) = 2 ∫₀^k ∫_∂Ω (E×ν - αH_τ)(x, ω) · (E×ν - αH_τ)(x, -ω) dΓ dω
//! I₁(k) = 2 ∫₀^k ∫_∂Ω [(E×ν)(ω)·(E×ν)(-ω) + ∇_∂Ω(E×ν)(ω) : ∇_∂Ω(E×ν)(-ω)] dΓ dω
//! ```
//!
//! The pairing is bilinear (no conjugation), so both are entire in `k`; the
//! line integral runs along `ω = ks`, `s ∈ (0, 1)`. At real `k` and for a
//! real source they are twice the partial-band data norms.

use crate::forward::{assemble_trace_gradient, assemble_traces, check_alpha, FieldBatch, ForwardSolver, KernelExpansion};
use crate::geometry::{MediumParams, SurfaceMesh};
use crate::quadrature::gauss_legendre_on;
use crate::source::SourcePair;
use crate::spectral::{band_energy, TraceNorm};
use crate::stats::linear_fit;
use crate::volume::{QuadratureOrders, VolumeRule};
use crate::{Error, Point, Result, CVec3, C64};
use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionalKind {
    I0,
    I1,
}

/// Quadrature settings of a [`ContinuationFunctional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationConfig {
    /// Volume rule; use the dataset's orders to compare with its norms.
    pub volume_orders: QuadratureOrders,
    /// Gauss-Legendre nodes per path segment for `|k| ≤ 2K`.
    pub path_nodes: usize,
    /// Band limit `K` that sets the path node scaling.
    pub band_limit: f64,
    /// Largest `|k|` that will be evaluated.
    pub k_max: f64,
}

impl ContinuationConfig {
    pub fn new(band_limit: f64, k_max: f64) -> Self {
        ContinuationConfig {
            volume_orders: QuadratureOrders::default(),
            path_nodes: 64,
            band_limit,
            k_max,
        }
    }
}

/// `I₀` or `I₁` of one source on one mesh.
#[derive(Debug, Clone)]
pub struct ContinuationFunctional {
    kind: FunctionalKind,
    mesh: SurfaceMesh,
    medium: MediumParams,
    alpha: Vec<f64>,
    config: ContinuationConfig,
    expansion: Option<KernelExpansion>,
}

impl ContinuationFunctional {
    pub fn new(
        kind: FunctionalKind,
        source: &SourcePair,
        mesh: &SurfaceMesh,
        medium: &MediumParams,
        alpha: Vec<f64>,
        config: ContinuationConfig,
    ) -> Result<Self> {
        check_alpha(&alpha, mesh)?;
        if config.path_nodes < 2 || !(config.band_limit > 0.0) || !(config.k_max > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid continuation config {config:?}")));
        }
        let expansion = match source.support() {
            None => None,
            Some(b) => {
                let rule = VolumeRule::ball(b.center, b.radius, config.volume_orders)?;
                let kappa_max = medium.kappa(C64::new(config.k_max, 0.0)).norm();
                Some(KernelExpansion::new(
                    source,
                    &mesh.nodes,
                    &rule,
                    kappa_max,
                    kind == FunctionalKind::I1,
                )?)
            }
        };
        Ok(ContinuationFunctional {
            kind,
            mesh: mesh.clone(),
            medium: *medium,
            alpha,
            config,
            expansion,
        })
    }

    pub fn kind(&self) -> FunctionalKind {
        self.kind
    }

    pub fn config(&self) -> &ContinuationConfig {
        &self.config
    }

    fn fields(&self, omega: C64) -> Result<Option<FieldBatch>> {
        match &self.expansion {
            None => Ok(None),
            Some(ex) => ex.fields(omega, &self.medium).map(Some),
        }
    }

    /// Paired surface integrand at `ω`; the functional is `2 ∫` of it.
    pub fn integrand(&self, omega: C64) -> Result<C64> {
        let (Some(plus), Some(minus)) = (self.fields(omega)?, self.fields(-omega)?) else {
            return Ok(C64::new(0.0, 0.0));
        };
        let mesh = &self.mesh;
        let dot = |a: &CVec3, b: &CVec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let mut total = C64::new(0.0, 0.0);
        match self.kind {
            FunctionalKind::I0 => {
                let (_, ap) = assemble_traces(mesh, &plus.e, &plus.h, &self.alpha);
                let (_, am) = assemble_traces(mesh, &minus.e, &minus.h, &self.alpha);
                for n in 0..mesh.len() {
                    total += dot(&ap[n], &am[n]) * mesh.weights[n];
                }
            }
            FunctionalKind::I1 => {
                let (tp, _) = assemble_traces(mesh, &plus.e, &plus.h, &self.alpha);
                let (tm, _) = assemble_traces(mesh, &minus.e, &minus.h, &self.alpha);
                let gp = assemble_trace_gradient(mesh, &plus.e, &plus.grad_e);
                let gm = assemble_trace_gradient(mesh, &minus.e, &minus.grad_e);
                for n in 0..mesh.len() {
                    let pair = tangential_pairing(&gp[n], &gm[n], &mesh.normals[n]);
                    total += (dot(&tp[n], &tm[n]) + pair) * mesh.weights[n];
                }
            }
        }
        Ok(total)
    }

    fn segment_nodes(&self, length: f64) -> usize {
        let scale = (length / (2.0 * self.config.band_limit)).ceil().max(1.0);
        self.config.path_nodes * scale as usize
    }

    /// Functional at `k` along the straight path `0 → k`.
    pub fn evaluate(&self, k: C64) -> Result<C64> {
        self.evaluate_path(&[k])
    }

    /// Functional at the last vertex along `0 → v₁ → … → vₙ`.
    pub fn evaluate_path(&self, vertices: &[C64]) -> Result<C64> {
        let Some(last) = vertices.last() else {
            return Ok(C64::new(0.0, 0.0));
        };
        if last.norm() > self.config.k_max * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "|k| = {} exceeds the configured k_max = {}",
                last.norm(),
                self.config.k_max
            )));
        }
        let mut total = C64::new(0.0, 0.0);
        let mut start = C64::new(0.0, 0.0);
        for &end in vertices {
            let step = end - start;
            if step.norm() > 0.0 {
                let (s, w) = gauss_legendre_on(self.segment_nodes(step.norm()), 0.0, 1.0);
                let vals: Vec<C64> = s
                    .par_iter()
                    .map(|s| self.integrand(start + step * s))
                    .collect::<Result<_>>()?;
                total += vals.iter().zip(&w).map(|(v, w)| v * w).sum::<C64>() * step;
            }
            start = end;
        }
        Ok(total * 2.0)
    }
}

/// `Σ (P G₊)_{jk} (P G₋)_{jk}` with `P = I - νν^T` on the derivative index.
fn tangential_pairing(gp: &Matrix3<C64>, gm: &Matrix3<C64>, nu: &Point) -> C64 {
    let project = |g: &Matrix3<C64>| {
        let mut out = *g;
        for k in 0..3 {
            let dn = g[(0, k)] * nu.x + g[(1, k)] * nu.y + g[(2, k)] * nu.z;
            for j in 0..3 {
                out[(j, k)] -= dn * nu[j];
            }
        }
        out
    };
    let (a, b) = (project(gp), project(gm));
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `I₀(k)` along the straight path.
pub fn evaluate_i(functional: &ContinuationFunctional, k: C64) -> Result<C64> {
    functional.evaluate(k)
}

fn check_bound_args(m: f64, d: f64) -> Result<()> {
    if !(m > 0.0 && d > 0.0) {
        return Err(Error::InvalidArgument(format!("norm bound and diameter must be positive, got M={m}, d={d}")));
    }
    Ok(())
}

/// `(1 + |k|³) M₁² exp(2d√(ε₀μ₀)|Im k|)`, the growth bound of `I₀` up to its
/// constant.
pub fn bound_i0(k: C64, m1: f64, d: f64, medium: &MediumParams) -> Result<f64> {
    check_bound_args(m1, d)?;
    Ok((1.0 + k.norm().powi(3)) * m1 * m1 * (2.0 * d * medium.slowness() * k.im.abs()).exp())
}

/// Same as [`bound_i0`] with the H² norm bound `M₂`.
pub fn bound_i1(k: C64, m2: f64, d: f64, medium: &MediumParams) -> Result<f64> {
    bound_i0(k, m2, d, medium)
}

/// Lower bound of the harmonic measure of `(0, K)` at `k` in the sector:
/// `1/2` for `k ≤ 2^{1/4} K` (the branch point included), else
/// `(1/π)((k/K)⁴ - 1)^{-1/2}`.
pub fn harmonic_measure_lb(k: f64, band_limit: f64) -> Result<f64> {
    if !(k > 0.0 && band_limit > 0.0) {
        return Err(Error::InvalidArgument(format!("need k, K > 0, got k={k}, K={band_limit}")));
    }
    let ratio = k / band_limit;
    if ratio <= 2f64.powf(0.25) {
        Ok(0.5)
    } else {
        Ok(1.0 / (PI * (ratio.powi(4) - 1.0).sqrt()))
    }
}

/// `δ = (2π(d+1)√(ε₀μ₀))^{-1/3}`.
pub fn truncation_delta(d: f64, medium: &MediumParams) -> f64 {
    (2.0 * PI * (d + 1.0) * medium.slowness()).powf(-1.0 / 3.0)
}

/// `δ K^{2/3} 𝓔^{1/3}` when `𝓔 > 2^{3/4} δ^{-3} K`, else `K`. An infinite
/// `𝓔` (exact data) gives an infinite wave number.
pub fn truncation_wavenumber(band_limit: f64, e: f64, d: f64, medium: &MediumParams) -> Result<f64> {
    if !(band_limit >= 1.0) {
        return Err(Error::InvalidArgument(format!("band limit must be at least 1, got {band_limit}")));
    }
    if !(e > 0.0) {
        return Err(Error::InvalidArgument(format!("log data level must be positive, got {e}")));
    }
    let delta = truncation_delta(d, medium);
    if e > 2f64.powf(0.75) * delta.powi(-3) * band_limit {
        Ok(delta * band_limit.powf(2.0 / 3.0) * e.cbrt())
    } else {
        Ok(band_limit)
    }
}

/// `C (ε² + M²/(1 + K^{4/3} |ln ε|^{2/3}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityEnvelope {
    pub c_cal: f64,
    pub m: f64,
    pub band_limit: f64,
}

impl StabilityEnvelope {
    pub fn value(&self, eps: f64) -> Result<f64> {
        stability_envelope(eps, self.m, self.band_limit, self.c_cal)
    }

    /// Chooses `C` so the envelope equals `measured` at `eps`.
    pub fn calibrate(measured: f64, eps: f64, m: f64, band_limit: f64) -> Result<Self> {
        let unit = stability_envelope(eps, m, band_limit, 1.0)?;
        if !(unit > 0.0) {
            return Err(Error::InvalidArgument("cannot calibrate against a vanishing envelope".into()));
        }
        Ok(StabilityEnvelope {
            c_cal: measured / unit,
            m,
            band_limit,
        })
    }
}

/// `C_cal (ε² + M²/(1 + K^{4/3} |ln ε|^{2/3}))` for `0 ≤ ε < 1`; `ε = 0`
/// takes the limit, which is zero.
pub fn stability_envelope(eps: f64, m: f64, band_limit: f64, c_cal: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("ε must lie in [0, 1), got {eps}")));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let log_term = (-eps.ln()).powf(2.0 / 3.0);
    Ok(c_cal * (eps * eps + m * m / (1.0 + band_limit.powf(4.0 / 3.0) * log_term)))
}

/// Tail integrals and their log-log fit.
#[derive(Debug, Clone, PartialEq)]
pub struct TailDecay {
    /// `(k, T(k))` with `T(k) = ∫_{k<|ω|<ω_max} ‖trace(ω)‖²₍₀₎ dω`.
    pub tails: Vec<(f64, f64)>,
    /// Least-squares slope of `ln T` against `ln k`.
    pub slope: f64,
    /// Estimated mass beyond `ω_max` relative to the whole band `|ω| < ω_max`.
    pub beyond_fraction: f64,
}

/// Settings of [`tail_decay_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    /// Largest panel width of the composite frequency rule.
    pub panel_width: f64,
    pub nodes_per_panel: usize,
    /// Width of the two windows below `ω_max` used to fit the decay rate.
    /// Should cover a few oscillations of the integrand.
    pub fit_window: f64,
    /// Largest admissible mass beyond `ω_max`, relative to the band total.
    pub max_beyond_fraction: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig {
            panel_width: 2.0,
            nodes_per_panel: 8,
            fit_window: 8.0,
            max_beyond_fraction: 1e-3,
        }
    }
}

/// Tail integrals of the absorbing trace at the wave numbers `k_list` and
/// the fitted decay exponent. The mass beyond `ω_max` is extrapolated from
/// two windows of width `fit_window` just below `ω_max` and must be below `max_beyond_fraction`.
pub fn tail_decay_estimate(
    solver: &ForwardSolver,
    source: &SourcePair,
    mesh: &SurfaceMesh,
    alpha: &[f64],
    k_list: &[f64],
    omega_max: f64,
    config: &TailConfig,
) -> Result<TailDecay> {
    if k_list.len() < 2
        || k_list.windows(2).any(|w| w[0] >= w[1])
        || k_list.iter().any(|k| !(*k > 0.0 && *k < omega_max / 2.0))
    {
        return Err(Error::InvalidArgument(format!(
            "k_list must be increasing, at least two points, inside (0, ω_max/2 = {})",
            omega_max / 2.0
        )));
    }
    let mut edges = vec![0.0];
    edges.extend(k_list);
    edges.push(omega_max);
    let band = band_energy(
        solver,
        source,
        mesh,
        alpha,
        &edges,
        config.panel_width,
        config.nodes_per_panel,
        TraceNorm::Absorbing,
    )?;
    let tails: Vec<(f64, f64)> = k_list.iter().map(|k| (*k, band.mass_from(*k))).collect();
    let total = band.total();
    let beyond_fraction = band.beyond_fraction(config.fit_window);
    if total > 0.0 && !(beyond_fraction < config.max_beyond_fraction) {
        return Err(Error::Quadrature(format!(
            "tail beyond ω_max = {omega_max} not resolved: estimated fraction {beyond_fraction:.3e} exceeds {:.1e}",
            config.max_beyond_fraction
        )));
    }
    if tails.iter().any(|(_, t)| !(*t > 0.0)) {
        return Err(Error::Quadrature("tail integral vanished; cannot fit a decay exponent".into()));
    }
    let xs: Vec<f64> = tails.iter().map(|(k, _)| k.ln()).collect();
    let ys: Vec<f64> = tails.iter().map(|(_, t)| t.ln()).collect();
    let (slope, _) = linear_fit(&xs, &ys)?;
    Ok(TailDecay {
        tails,
        slope,
        beyond_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_measure_values() {
        assert_eq!(harmonic_measure_lb(2.0, 2.0).unwrap(), 0.5);
        assert_eq!(harmonic_measure_lb(2f64.powf(0.25) * 3.0, 3.0).unwrap(), 0.5);
        let v = harmonic_measure_lb(2f64.sqrt() * 1.5, 1.5).unwrap();
        assert!((v - 1.0 / (PI * 3f64.sqrt())).abs() < 1e-12);
        assert!(harmonic_measure_lb(0.0, 1.0).is_err());
    }

    #[test]
    fn envelope_values() {
        let v = stability_envelope((-1.0f64).exp(), 1.0, 1.0, 1.0).unwrap();
        assert!((v - ((-2.0f64).exp() + 0.5)).abs() < 1e-15);
        assert!(stability_envelope(1.0, 1.0, 1.0, 1.0).is_err());
        assert_eq!(stability_envelope(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn pairing_ignores_normal_derivatives() {
        let nu = Point::new(1.0, 0.0, 0.0);
        let mut g = Matrix3::<C64>::zeros();
        g[(0, 2)] = C64::new(3.0, 1.0);
        assert_eq!(tangential_pairing(&g, &g, &nu), C64::new(0.0, 0.0));
        g[(1, 2)] = C64::new(0.0, 2.0);
        assert_eq!(tangential_pairing(&g, &g, &nu), C64::new(-4.0, 0.0));
    }
}
