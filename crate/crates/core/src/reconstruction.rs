//! Finite-basis Tikhonov recovery of `(Jε, Jμ)` from boundary data, and the
//! increasing-stability sweep.
//!
//! The basis consists of curls of bump-localised monomial potentials in each
//! channel. Columns of the operator are the weighted stacked traces of the
//! basis elements, so `|Ax - b|²` is the `ε₀²` of the residual dataset.
//!
//! Only the `Jε` channel is radiated. For a divergence-free `J` the pair
//! `(0, J)` radiates `E = H[J, 0]` and `H = -(ε₀/μ₀) E[J, 0]`, which gives
//! the `Jμ` columns for free.

use crate::continuation::{stability_envelope, StabilityEnvelope};
use crate::field::{Poly, VectorField};
use crate::forward::{assemble_traces, check_alpha, ForwardSolver, Want};
use crate::geometry::{DomainGeometry, SurfaceMesh};
use crate::source::{make_divfree_source, multi_indices, sobolev_norm_with, SourcePair};
use crate::spectral::{add_noise, dataset_rule, eps0_sq, synthesize_dataset_on, BoundaryDataset, SynthesisOptions};
use crate::stats::{mean_std, spearman};
use crate::volume::{QuadratureOrders, VolumeRule};
use crate::{Error, Point, Result, CVec3, C64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

// Pivots below this fraction of the largest Gram diagonal are treated as
// null combinations.
const PIVOT_TOL: f64 = 1e-10;

/// Relative `λ` used for noise-free data under the discrepancy rule.
pub const CLEAN_LAMBDA: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Eps,
    Mu,
}

/// Which trace the data vector holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Absorbing,
    TangentialE,
}

/// Divergence-free basis `curl(χ e_c x^α / b^|α|)` in both channels.
#[derive(Debug, Clone)]
pub struct DivFreeBasis {
    pub degree: u8,
    pub bump_radius: f64,
    /// Kept potentials, shared by both channels.
    pub potentials: Vec<VectorField>,
    /// `(component, α)` of each kept potential.
    pub labels: Vec<(usize, [u8; 3])>,
    /// Elements: the `Jε` channel first, then the `Jμ` channel.
    pub elements: Vec<SourcePair>,
    pub gram_condition: f64,
    pub gram_min_eigenvalue: f64,
}

impl DivFreeBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn per_channel(&self) -> usize {
        self.potentials.len()
    }

    pub fn channel(&self, j: usize) -> Channel {
        if j < self.per_channel() {
            Channel::Eps
        } else {
            Channel::Mu
        }
    }

    /// `Σ c_j φ_j`.
    pub fn combine(&self, coefficients: &[f64]) -> Result<SourcePair> {
        if coefficients.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a basis of {}",
                coefficients.len(),
                self.len()
            )));
        }
        let mut out = SourcePair::zero();
        for (c, phi) in coefficients.iter().zip(&self.elements) {
            if *c != 0.0 {
                out = out.add(&phi.scale(C64::new(*c, 0.0)))?;
            }
        }
        Ok(out)
    }
}

fn l2_gram(fields: &[VectorField], rule: &VolumeRule) -> DMatrix<f64> {
    let n = fields.len();
    let samples: Vec<Vec<CVec3>> = fields.iter().map(|f| rule.nodes.iter().map(|y| f.eval(y)).collect()).collect();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = samples[i]
                .iter()
                .zip(&samples[j])
                .zip(&rule.weights)
                .map(|((a, b), w)| w * a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum::<f64>())
                .sum();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Greedy pivoted Cholesky; returns the pivots kept in selection order.
fn pivoted_cholesky(g: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let n = g.nrows();
    let mut diag: Vec<f64> = (0..n).map(|i| g[(i, i)]).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut kept = vec![];
    for k in 0..n {
        let (p, d) = diag
            .iter()
            .enumerate()
            .filter(|(i, _)| !kept.contains(i))
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, d)| (i, *d))
            .unwrap_or((0, 0.0));
        if !(d > tol * top) {
            break;
        }
        let s = d.sqrt();
        for i in 0..n {
            let mut v = g[(i, p)];
            for j in 0..k {
                v -= l[(i, j)] * l[(p, j)];
            }
            l[(i, k)] = v / s;
        }
        for (i, di) in diag.iter_mut().enumerate() {
            *di -= l[(i, k)] * l[(i, k)];
        }
        kept.push(p);
    }
    kept
}

/// Builds the basis for potentials of degree `0..=degree` (at most 3) on the
/// bump of radius `bump_radius` about the centre of Ω, dropping candidates
/// whose curls are linearly dependent (such as `χ x`, a gradient).
pub fn build_basis(geometry: &DomainGeometry, degree: u8, bump_radius: f64) -> Result<DivFreeBasis> {
    if degree > 3 {
        return Err(Error::UnsupportedClosure(format!("basis degree {degree} exceeds the closure limit 3")));
    }
    let mut candidates = vec![];
    for n in 0..=degree {
        for alpha in multi_indices(n) {
            for c in 0..3 {
                let mut comps = [Poly::zero(), Poly::zero(), Poly::zero()];
                comps[c] = Poly::monomial(bump_radius.powi(-(n as i32)), alpha);
                candidates.push(((c, alpha), VectorField::polynomial(comps)));
            }
        }
    }
    let zero = VectorField::zero();
    let currents: Vec<SourcePair> = candidates
        .iter()
        .map(|(_, a)| make_divfree_source(a, &zero, geometry, bump_radius))
        .collect::<Result<_>>()?;
    let bump = currents[0].support().expect("nonzero basis current");
    let rule = VolumeRule::ball(bump.center, bump.radius, QuadratureOrders::default())?;
    let j: Vec<VectorField> = currents.iter().map(|s| s.j_eps.clone()).collect();
    let gram = l2_gram(&j, &rule);
    let mut kept = pivoted_cholesky(&gram, PIVOT_TOL);
    kept.sort_unstable();
    let sub = DMatrix::from_fn(kept.len(), kept.len(), |a, b| gram[(kept[a], kept[b])]);
    let eig = SymmetricEigen::new(sub).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) {
        return Err(Error::SingularGram(format!("smallest Gram eigenvalue {lo:e} after pivoting")));
    }
    let potentials: Vec<VectorField> = kept.iter().map(|&i| candidates[i].1.clone()).collect();
    let labels = kept.iter().map(|&i| candidates[i].0).collect();
    let mut elements: Vec<SourcePair> = kept.iter().map(|&i| currents[i].clone()).collect();
    for a in &potentials {
        elements.push(make_divfree_source(&zero, a, geometry, bump_radius)?);
    }
    Ok(DivFreeBasis {
        degree,
        bump_radius,
        potentials,
        labels,
        elements,
        gram_condition: hi / lo,
        gram_min_eigenvalue: lo,
    })
}

/// Real least-squares operator; rows run over frequency, node, component
/// and real/imaginary part.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub a: DMatrix<f64>,
    pub kind: DataKind,
    pub n_freq: usize,
    pub n_nodes: usize,
}

fn row_weights(omega_weights: &[f64], mesh: &SurfaceMesh) -> Vec<f64> {
    omega_weights
        .iter()
        .flat_map(|wf| mesh.weights.iter().map(move |wn| (wf * wn).sqrt()))
        .collect()
}

fn stack(traces: &[Vec<CVec3>], weights: &[f64]) -> DVector<f64> {
    let mut out = Vec::with_capacity(traces.len() * 6 * traces.first().map_or(0, Vec::len));
    let mut w = weights.iter();
    for row in traces {
        for v in row {
            let s = *w.next().expect("one weight per node and frequency");
            for c in v.iter() {
                out.push(s * c.re);
                out.push(s * c.im);
            }
        }
    }
    DVector::from_vec(out)
}

/// Weighted stacked data vector of a dataset.
pub fn data_vector(ds: &BoundaryDataset, kind: DataKind) -> DVector<f64> {
    let traces = match kind {
        DataKind::Absorbing => &ds.absorbing,
        DataKind::TangentialE => &ds.tangential,
    };
    stack(traces, &row_weights(&ds.omega_weights, &ds.mesh))
}

/// Operator columns for the basis at the given frequency rule. `orders`
/// fixes the volume rule (use the dataset's to match it exactly); `None`
/// lets the solver pick one for the largest frequency.
#[allow(clippy::too_many_arguments)]
pub fn assemble_operator(
    solver: &ForwardSolver,
    basis: &DivFreeBasis,
    mesh: &SurfaceMesh,
    omegas: &[f64],
    omega_weights: &[f64],
    alpha: &[f64],
    kind: DataKind,
    orders: Option<QuadratureOrders>,
) -> Result<OperatorMatrix> {
    check_alpha(alpha, mesh)?;
    if omegas.len() != omega_weights.len() || omegas.is_empty() {
        return Err(Error::InvalidArgument("frequency nodes and weights must match and be nonempty".into()));
    }
    let m = basis.per_channel();
    let eps_channel: Vec<&SourcePair> = basis.elements[..m].iter().collect();
    let cw: Vec<C64> = omegas.iter().map(|w| C64::new(*w, 0.0)).collect();
    let want = Want {
        e: true,
        h: true,
        grad_e: false,
    };
    let fields = match orders {
        Some(o) => {
            let b = eps_channel[0].support().expect("nonzero basis element");
            let rule = VolumeRule::ball(b.center, b.radius, o)?;
            solver.fields_batch_on(&eps_channel, &mesh.nodes, &cw, want, &rule)?
        }
        None => solver.fields_batch(&eps_channel, &mesh.nodes, &cw, want)?,
    };
    let medium = solver.medium();
    let ratio = medium.eps0() / medium.mu0();
    let weights = row_weights(omega_weights, mesh);
    let columns: Vec<DVector<f64>> = (0..2 * m)
        .into_par_iter()
        .map(|j| {
            let per_freq: Vec<Vec<CVec3>> = fields[j % m]
                .iter()
                .map(|fb| {
                    let (e, h): (Vec<CVec3>, Vec<CVec3>) = if j < m {
                        (fb.e.clone(), fb.h.clone())
                    } else {
                        (fb.h.clone(), fb.e.iter().map(|v| v.scale(-ratio)).collect())
                    };
                    let (te, ta) = assemble_traces(mesh, &e, &h, alpha);
                    match kind {
                        DataKind::Absorbing => ta,
                        DataKind::TangentialE => te,
                    }
                })
                .collect();
            stack(&per_freq, &weights)
        })
        .collect();
    let a = DMatrix::from_columns(&columns);
    Ok(OperatorMatrix {
        a,
        kind,
        n_freq: omegas.len(),
        n_nodes: mesh.len(),
    })
}

/// `A`, `b` and `λ` of one Tikhonov problem.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct TikhonovSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub solution_norm: f64,
}

/// Filtered SVD of `A` with `b` projected on the left singular vectors.
#[derive(Debug, Clone)]
pub struct SpectralFactors {
    sigma: Vec<f64>,
    v: DMatrix<f64>,
    beta: Vec<f64>,
    /// `|b|²` outside the range of `A`.
    outside: f64,
}

impl SpectralFactors {
    pub fn new(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::InvalidArgument(format!("A has {} rows, b has {}", a.nrows(), b.len())));
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V^T").transpose();
        let beta: Vec<f64> = (0..svd.singular_values.len()).map(|i| u.column(i).dot(b)).collect();
        let outside = (b.norm_squared() - beta.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        Ok(SpectralFactors {
            sigma: svd.singular_values.iter().copied().collect(),
            v,
            beta,
            outside,
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn solve(&self, lambda: f64) -> Result<TikhonovSolution> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
        }
        let mut x = DVector::zeros(self.v.nrows());
        let mut res = self.outside;
        for (i, (s, bt)) in self.sigma.iter().zip(&self.beta).enumerate() {
            let f = s / (s * s + lambda);
            x += self.v.column(i) * (f * bt);
            let damp = lambda / (s * s + lambda);
            res += (damp * bt).powi(2);
        }
        let solution_norm = x.norm();
        Ok(TikhonovSolution {
            x,
            residual_norm: res.sqrt(),
            solution_norm,
        })
    }

    /// Residual norm at `λ`; increasing in `λ`.
    pub fn residual(&self, lambda: f64) -> f64 {
        let mut res = self.outside;
        for (s, bt) in self.sigma.iter().zip(&self.beta) {
            res += (lambda / (s * s + lambda) * bt).powi(2);
        }
        res.sqrt()
    }
}

/// Minimises `|Ax - b|² + λ|x|²`. Uses the SVD filter form of the normal
/// equations, which avoids squaring the condition number.
pub fn tikhonov_solve(problem: &InverseProblem) -> Result<TikhonovSolution> {
    SpectralFactors::new(&problem.a, &problem.b)?.solve(problem.lambda)
}

/// Largest squared column norm of `A`, the scale for default `λ`.
pub fn column_scale(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ = factor · max column norm²`.
    Relative { factor: f64 },
    Fixed { lambda: f64 },
    /// Residual matched to the dataset's declared noise level; for clean
    /// data `λ = CLEAN_LAMBDA · max column norm²`.
    Discrepancy,
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Relative { factor: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub coefficients: Vec<f64>,
    pub source: SourcePair,
    /// `‖J_rec - J_true‖₍₀₎ / ‖J_true‖₍₀₎` when the truth is known.
    pub relative_error: Option<f64>,
    pub residual_norm: f64,
    pub data_norm: f64,
    pub lambda: f64,
    pub band_limit: f64,
    pub noise_level: f64,
    pub warning: Option<String>,
}

/// `‖a - b‖₍₀₎` over the pair, on the support rule of `b` (or of `a`).
pub fn l2_distance(a: &SourcePair, b: &SourcePair, orders: QuadratureOrders) -> Result<f64> {
    let (Some(sa), sb) = (a.support().or(b.support()), b.support().or(a.support())) else {
        return Ok(0.0);
    };
    let sb = sb.expect("one support exists");
    let center = sa.center;
    let radius = sa.radius.max((sb.center - sa.center).norm() + sb.radius);
    let rule = VolumeRule::ball(center, radius, orders)?;
    let sq = rule.integrate(|y| {
        (a.j_eps.eval(y) - b.j_eps.eval(y)).norm_squared() + (a.j_mu.eval(y) - b.j_mu.eval(y)).norm_squared()
    });
    Ok(sq.sqrt())
}

/// Recovers the basis coefficients from a dataset.
pub fn reconstruct(
    solver: &ForwardSolver,
    ds: &BoundaryDataset,
    basis: &DivFreeBasis,
    rule: LambdaRule,
    truth: Option<&SourcePair>,
) -> Result<ReconstructionResult> {
    let op = assemble_operator(
        solver,
        basis,
        &ds.mesh,
        &ds.omegas,
        &ds.omega_weights,
        &ds.alpha,
        DataKind::Absorbing,
        ds.provenance.volume_orders,
    )?;
    reconstruct_with(&op, ds, basis, rule, truth)
}

/// [`reconstruct`] with a prebuilt operator matching the dataset.
pub fn reconstruct_with(
    op: &OperatorMatrix,
    ds: &BoundaryDataset,
    basis: &DivFreeBasis,
    rule: LambdaRule,
    truth: Option<&SourcePair>,
) -> Result<ReconstructionResult> {
    if op.n_freq != ds.n_freq() || op.n_nodes != ds.n_nodes() || op.a.ncols() != basis.len() {
        return Err(Error::InvalidArgument("operator does not match the dataset and basis".into()));
    }
    let b = data_vector(ds, op.kind);
    let factors = SpectralFactors::new(&op.a, &b)?;
    let scale = column_scale(&op.a);
    let default_lambda = 1e-8 * scale;
    let mut warning = None;
    let lambda = match rule {
        LambdaRule::Relative { factor } => factor * scale,
        LambdaRule::Fixed { lambda } => lambda,
        // Clean data: the discrepancy λ tends to zero, so take the floor.
        LambdaRule::Discrepancy if ds.provenance.noise_level == 0.0 => CLEAN_LAMBDA * scale,
        LambdaRule::Discrepancy => {
            let level = ds.provenance.noise_level;
            let target = level * b.norm() / (1.0 + level * level).sqrt();
            match discrepancy_lambda(&factors, target, scale) {
                Some(l) => l,
                None => {
                    warning = Some(format!(
                        "discrepancy target {target:.3e} unreachable; fell back to λ = {default_lambda:.3e}"
                    ));
                    default_lambda
                }
            }
        }
    };
    let sol = factors.solve(lambda)?;
    let coefficients: Vec<f64> = sol.x.iter().copied().collect();
    let source = basis.combine(&coefficients)?;
    let relative_error = match truth {
        None => None,
        Some(t) => {
            let norm = l2_distance(t, &SourcePair::zero(), QuadratureOrders::default())?;
            let diff = l2_distance(&source, t, QuadratureOrders::default())?;
            Some(if norm == 0.0 { diff } else { diff / norm })
        }
    };
    Ok(ReconstructionResult {
        coefficients,
        source,
        relative_error,
        residual_norm: sol.residual_norm,
        data_norm: b.norm(),
        lambda,
        band_limit: ds.band_limit,
        noise_level: ds.provenance.noise_level,
        warning,
    })
}

/// Bisection on `log λ` for `residual(λ) = target`, accepted within a
/// factor 2. `None` when the target lies outside the reachable range.
fn discrepancy_lambda(f: &SpectralFactors, target: f64, scale: f64) -> Option<f64> {
    if !(target > 0.0 && scale > 0.0) {
        return None;
    }
    let (mut lo, mut hi) = ((1e-16 * scale).ln(), (1e2 * scale).ln());
    let r = |l: f64| f.residual(l.exp());
    if r(lo) > 2.0 * target || r(hi) < 0.5 * target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if r(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let l = 0.5 * (lo + hi);
    let got = r(l);
    (got <= 2.0 * target && got >= 0.5 * target).then(|| l.exp())
}

/// Settings of [`stability_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub k_list: Vec<f64>,
    pub noise_level: f64,
    pub seeds: Vec<u64>,
    /// Frequencies per unit of band limit (at least 8 in total).
    pub freq_per_unit: f64,
    pub alpha: f64,
    pub lambda_rule: LambdaRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub seed: u64,
    pub error: f64,
    pub residual: f64,
    pub lambda: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub k: f64,
    pub mean_error: f64,
    pub std_error: f64,
    /// Data error norm `ε` between noisy and clean data, averaged over seeds.
    pub eps: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
    /// Spearman correlation of `K` with the mean error.
    pub spearman: f64,
    pub envelope: StabilityEnvelope,
    pub warnings: Vec<String>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "K,seed,error,residual,lambda,envelope";

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(w, "{:e},{},{:e},{:e},{:e},{:e}", r.k, r.seed, r.error, r.residual, r.lambda, r.envelope)?;
        }
        Ok(())
    }

    /// Mean error nonincreasing within one pooled standard deviation.
    pub fn error_nonincreasing(&self) -> bool {
        let pooled = (self.summary.iter().map(|s| s.std_error.powi(2)).sum::<f64>() / self.summary.len() as f64).sqrt();
        self.summary.windows(2).all(|w| w[1].mean_error <= w[0].mean_error + pooled)
    }

    pub fn envelope_nonincreasing(&self) -> bool {
        self.summary.windows(2).all(|w| w[1].envelope <= w[0].envelope)
    }
}

/// For each `K`: synthesise, add seeded noise, reconstruct and record the
/// error. The envelope uses `M = ‖J‖₍₁₎` of the truth and is calibrated to
/// the mean error at the smallest `K`.
#[allow(clippy::too_many_arguments)]
pub fn stability_sweep(
    solver: &ForwardSolver,
    source: &SourcePair,
    basis: &DivFreeBasis,
    mesh: &SurfaceMesh,
    config: &SweepConfig,
) -> Result<SweepReport> {
    let ks = &config.k_list;
    if ks.len() < 4 || ks.windows(2).any(|w| !(w[0] < w[1])) || !(ks[0] >= 1.0) {
        return Err(Error::InvalidArgument(format!("K_list must hold at least 4 increasing values ≥ 1, got {ks:?}")));
    }
    if config.seeds.len() < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 seeds, got {}", config.seeds.len())));
    }
    let m = sobolev_norm_with(source, 1, QuadratureOrders::default())?;
    let mut rows = vec![];
    let mut per_k = vec![];
    let mut warnings = vec![];
    for &k in ks {
        let opts = SynthesisOptions {
            band_limit: k,
            n_freq: ((config.freq_per_unit * k).ceil() as usize).max(8),
            alpha: vec![config.alpha; mesh.len()],
            gradients: false,
        };
        let rule = dataset_rule(solver, source, k)?;
        let clean = synthesize_dataset_on(solver, source, "sweep", mesh, &opts, rule.as_ref())?;
        let op = assemble_operator(
            solver,
            basis,
            mesh,
            &clean.omegas,
            &clean.omega_weights,
            &clean.alpha,
            DataKind::Absorbing,
            clean.provenance.volume_orders,
        )?;
        let mut errors = vec![];
        let mut eps = vec![];
        for &seed in &config.seeds {
            let noisy = add_noise(&clean, config.noise_level, seed)?;
            let mut diff = noisy.clone();
            for (d, c) in diff.absorbing.iter_mut().zip(&clean.absorbing) {
                for (x, y) in d.iter_mut().zip(c) {
                    *x -= y;
                }
            }
            eps.push(eps0_sq(&diff)?.sqrt());
            let res = reconstruct_with(&op, &noisy, basis, config.lambda_rule, Some(source))?;
            if let Some(w) = res.warning {
                warnings.push(format!("K={k}, seed={seed}: {w}"));
            }
            let error = res.relative_error.expect("truth given");
            errors.push(error);
            rows.push(SweepRow {
                k,
                seed,
                error,
                residual: res.residual_norm,
                lambda: res.lambda,
                envelope: f64::NAN,
            });
        }
        let (mean, std) = mean_std(&errors);
        let (eps_mean, _) = mean_std(&eps);
        per_k.push((k, mean, std, eps_mean));
    }
    let (k0, mean0, _, eps0) = per_k[0];
    let envelope = StabilityEnvelope::calibrate(mean0, eps0.min(0.999), m, k0)?;
    let mut summary = vec![];
    for &(k, mean, std, eps) in &per_k {
        let env = stability_envelope(eps.min(0.999), m, k, envelope.c_cal)?;
        summary.push(SweepSummary {
            k,
            mean_error: mean,
            std_error: std,
            eps,
            envelope: env,
        });
        for r in rows.iter_mut().filter(|r| r.k == k) {
            r.envelope = env;
        }
    }
    let xs: Vec<f64> = summary.iter().map(|s| s.k).collect();
    let ys: Vec<f64> = summary.iter().map(|s| s.mean_error).collect();
    let spearman = spearman(&xs, &ys)?;
    Ok(SweepReport {
        rows,
        summary,
        spearman,
        envelope,
        warnings,
    })
}

/// Fresh points in the support ball, used by tests and the CLI to probe
/// divergence of basis elements.
pub fn probe_points(basis: &DivFreeBasis, n: usize) -> Vec<Point> {
    let Some(b) = basis.elements.first().and_then(|e| e.support()) else {
        return vec![];
    };
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) / n as f64;
            let (th, ph) = ((1.0 - 2.0 * t).acos(), 2.399963229728653 * i as f64);
            let r = b.radius * 0.9 * t.cbrt();
            b.center + Point::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()) * r
        })
        .collect()
}
