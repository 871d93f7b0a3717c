//! Experiment configuration. One TOML file describes one experiment; every
//! section is optional and unknown keys are rejected.

use anyhow::{bail, Context, Result};
use emsource::forward::ForwardConfig;
use emsource::geometry::Region;
use emsource::reconstruction::LambdaRule;
use emsource::volume::QuadratureOrders;
use emsource::{DomainGeometry, ForwardSolver, MediumParams, Point, SurfaceMesh};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Base seed for every random choice not seeded explicitly.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub medium: MediumConfig,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub alpha: AlphaConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub cavity: CavityConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Ball,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub shape: Shape,
    pub center: [f64; 3],
    pub radius: f64,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Distance kept between source supports and ∂Ω; 0.2 × inradius if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_margin: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            shape: Shape::Ball,
            center: [0.0; 3],
            radius: 1.0,
            lo: [-1.0; 3],
            hi: [1.0; 3],
            support_margin: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    pub eps0: f64,
    pub mu0: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig { eps0: 1.0, mu0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Fixed degree-1 potentials on the largest admissible bump.
    Reference,
    /// Seeded Gaussian potentials of the given degree.
    Random,
    /// `∇(χ(xy + 1/2))`, invisible to boundary data.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub degree: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            kind: SourceKind::Random,
            degree: 1,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Polar nodes on a sphere (twice as many azimuthal), or nodes per face
    /// edge on a box.
    pub resolution: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { resolution: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub orders: QuadratureOrders,
    pub nodes_per_wavelength: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            orders: QuadratureOrders::new(24, 12, 24),
            nodes_per_wavelength: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub band_limit: f64,
    pub n_freq: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            band_limit: 2.0,
            n_freq: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaConfig {
    /// Absorbing coefficient, constant over ∂Ω.
    pub value: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative noise level; 0 means clean data.
    pub level: f64,
    pub seeds: Vec<u64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            level: 0.0,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Points per direction of the polar grid in the sector.
    pub grid: usize,
    /// The grid reaches `|k| = k_max_factor · K`.
    pub k_max_factor: f64,
    /// Volume orders for the `M₁`, `M₂` norms.
    pub sobolev_orders: QuadratureOrders,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            grid: 10,
            k_max_factor: 3.0,
            sobolev_orders: QuadratureOrders::new(40, 32, 64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub degree: u8,
    /// Bump radius; the largest admissible one if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bump_radius: Option<f64>,
    pub lambda: LambdaRule,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            degree: 1,
            bump_radius: None,
            lambda: LambdaRule::Discrepancy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub k_list: Vec<f64>,
    pub freq_per_unit: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            k_list: vec![1.0, 2.0, 4.0, 8.0],
            freq_per_unit: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    /// Nested pairs `(R1, R2)`.
    pub pairs: Vec<[f64; 2]>,
    pub count: usize,
    /// Table extent written to `modes.csv`.
    pub n_max: usize,
    pub m_max: usize,
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            pairs: vec![[1.0, 1.1], [1.0, 2.0], [0.5, 0.6], [2.0, 2.01], [0.3, 1.0]],
            count: 20,
            n_max: 4,
            m_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Seeded sources for the divergence check.
    pub divergence_sources: usize,
    pub residual_omegas: Vec<f64>,
    pub huygens_grid: usize,
    pub huygens_time: f64,
    /// Boundary points for the time/frequency comparison.
    pub fourier_points: usize,
    pub fourier_omegas: Vec<f64>,
    pub plancherel_omega_max: f64,
    pub plancherel_resolution: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            divergence_sources: 10,
            residual_omegas: vec![1.0, 2.0, 4.0],
            huygens_grid: 9,
            huygens_time: 2.5,
            fourier_points: 2,
            fourier_omegas: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            plancherel_omega_max: 48.0,
            plancherel_resolution: 2,
        }
    }
}

/// Every pass/fail threshold, with the acceptance values as defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub divergence: f64,
    pub pde_residual: f64,
    /// Allowed deviation of the halving ratio from 4.
    pub richardson_ratio: f64,
    pub huygens: f64,
    pub fourier_laplace: f64,
    pub plancherel: f64,
    pub functional_identity: f64,
    pub path_agreement: f64,
    pub growth_spread: f64,
    pub closed_form: f64,
    pub gradient_ratio: f64,
    pub inversion_clean: f64,
    pub inversion_noisy: f64,
    /// Measured noise norm within this factor of `level · ‖data‖`.
    pub noise_factor: f64,
    pub spearman: f64,
    pub root_oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            divergence: 1e-12,
            pde_residual: 1e-4,
            richardson_ratio: 0.8,
            huygens: 1e-6,
            fourier_laplace: 1e-4,
            plancherel: 3e-3,
            functional_identity: 1e-8,
            path_agreement: 1e-6,
            growth_spread: 50.0,
            closed_form: 1e-12,
            gradient_ratio: 1e-10,
            inversion_clean: 1e-4,
            inversion_noisy: 0.1,
            noise_factor: 2.0,
            spearman: -0.8,
            root_oracle: 1e-6,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks that do not need the numerics.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version);
        }
        if self.band.n_freq == 0 || !(self.band.band_limit > 0.0) {
            bail!("band: need band_limit > 0 and n_freq ≥ 1");
        }
        if !(self.alpha.value > 0.0) {
            bail!("alpha.value must be positive, got {}", self.alpha.value);
        }
        if self.noise.seeds.is_empty() {
            bail!("noise.seeds must not be empty");
        }
        if self.mesh.resolution == 0 {
            bail!("mesh.resolution must be at least 1");
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<DomainGeometry> {
        let g = &self.geometry;
        let region = match g.shape {
            Shape::Ball => Region::Ball {
                center: g.center,
                radius: g.radius,
            },
            Shape::Box => Region::Box { lo: g.lo, hi: g.hi },
        };
        let base = match g.shape {
            Shape::Ball => DomainGeometry::ball(Point::from(g.center), g.radius),
            Shape::Box => DomainGeometry::cuboid(Point::from(g.lo), Point::from(g.hi)),
        }
        .context("geometry")?;
        let margin = g.support_margin.unwrap_or(base.support_margin());
        DomainGeometry::new(region, margin).context("geometry.support_margin")
    }

    pub fn medium(&self) -> Result<MediumParams> {
        MediumParams::new(self.medium.eps0, self.medium.mu0).context("medium")
    }

    pub fn mesh(&self) -> Result<SurfaceMesh> {
        SurfaceMesh::for_domain(&self.geometry()?, self.mesh.resolution).context("mesh")
    }

    pub fn solver(&self) -> Result<ForwardSolver> {
        Ok(ForwardSolver::new(
            self.medium()?,
            ForwardConfig {
                orders: self.solver.orders,
                nodes_per_wavelength: self.solver.nodes_per_wavelength,
            },
        ))
    }

    pub fn source_seed(&self) -> u64 {
        self.source.seed.unwrap_or(self.seed)
    }
}
