//! Source current pairs `(J_eps, J_mu)` and their volume Sobolev norms.

use crate::field::{Bump, Poly, ScalarField, Support, VectorField};
use crate::geometry::DomainGeometry;
use crate::volume::{QuadratureOrders, VolumeRule};
use crate::{Error, Point, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Electric and magnetic current densities supported in a ball inside Ω.
#[derive(Debug, Clone)]
pub struct SourcePair {
    pub j_eps: VectorField,
    pub j_mu: VectorField,
    /// Potentials `A` with `J = curl(chi A)`, when the pair was built that way.
    pub potential_eps: Option<VectorField>,
    pub potential_mu: Option<VectorField>,
    support: Option<Bump>,
    divergence_free: bool,
}

impl SourcePair {
    pub fn zero() -> Self {
        SourcePair {
            j_eps: VectorField::zero(),
            j_mu: VectorField::zero(),
            potential_eps: Some(VectorField::zero()),
            potential_mu: Some(VectorField::zero()),
            support: None,
            divergence_free: true,
        }
    }

    /// Wraps arbitrary currents. Closure fields must be carried by a bump
    /// inside `support`; opaque fields are trusted to vanish outside it.
    /// Divergence is checked symbolically when possible, so non-solenoidal
    /// currents (such as gradients) are accepted and flagged.
    pub fn from_currents(j_eps: VectorField, j_mu: VectorField, support: Bump, geometry: &DomainGeometry) -> Result<Self> {
        check_support(&support, geometry)?;
        let mut divergence_free = true;
        for (name, f) in [("J_eps", &j_eps), ("J_mu", &j_mu)] {
            match f.support() {
                Support::Empty => {}
                Support::Ball { center, radius } => {
                    if (center - support.center).norm() + radius > support.radius * (1.0 + 1e-12) {
                        return Err(Error::SupportTouchesBoundary(format!(
                            "{name} has support ball ({center:?}, {radius}) outside the declared support"
                        )));
                    }
                }
                Support::Unbounded if f.is_closure() => {
                    return Err(Error::InvalidArgument(format!(
                        "{name} is a polynomial without a bump and does not vanish outside Ω"
                    )))
                }
                Support::Unbounded => {}
            }
            if f.is_closure() {
                divergence_free &= f.div()?.is_zero();
            } else {
                divergence_free = false;
            }
        }
        let empty = j_eps.is_zero() && j_mu.is_zero();
        Ok(SourcePair {
            j_eps,
            j_mu,
            potential_eps: None,
            potential_mu: None,
            support: if empty { None } else { Some(support) },
            divergence_free,
        })
    }

    /// Support ball, `None` for the zero pair.
    pub fn support(&self) -> Option<Bump> {
        self.support
    }

    /// True when both currents are symbolically divergence-free.
    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub fn is_zero(&self) -> bool {
        self.j_eps.is_zero() && self.j_mu.is_zero()
    }

    /// Real-valued currents have conjugate-symmetric spectra.
    pub fn is_real(&self) -> bool {
        self.j_eps.is_real() && self.j_mu.is_real()
    }

    pub fn scale(&self, c: C64) -> Self {
        SourcePair {
            j_eps: self.j_eps.scale(c),
            j_mu: self.j_mu.scale(c),
            potential_eps: self.potential_eps.as_ref().map(|a| a.scale(c)),
            potential_mu: self.potential_mu.as_ref().map(|a| a.scale(c)),
            support: if c == C64::new(0.0, 0.0) { None } else { self.support },
            divergence_free: self.divergence_free,
        }
    }

    /// Sum of two pairs with the same support bump.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let support = match (self.support, other.support) {
            (None, s) | (s, None) => s,
            (Some(a), Some(b)) if a == b => Some(a),
            _ => {
                return Err(Error::InvalidArgument("cannot add sources with different supports".into()));
            }
        };
        let pot = |a: &Option<VectorField>, b: &Option<VectorField>| match (a, b) {
            (Some(a), Some(b)) => a.add(b).ok(),
            _ => None,
        };
        Ok(SourcePair {
            j_eps: self.j_eps.add(&other.j_eps)?,
            j_mu: self.j_mu.add(&other.j_mu)?,
            potential_eps: pot(&self.potential_eps, &other.potential_eps),
            potential_mu: pot(&self.potential_mu, &other.potential_mu),
            support,
            divergence_free: self.divergence_free && other.divergence_free,
        })
    }
}

fn check_support(bump: &Bump, geometry: &DomainGeometry) -> Result<()> {
    let room = geometry.signed_distance_inside(&bump.center) - bump.radius;
    // Allow rounding slack when the radius is exactly the admissible maximum.
    if room < geometry.support_margin() * (1.0 - 1e-12) {
        return Err(Error::SupportTouchesBoundary(format!(
            "support ball of radius {} at {:?} leaves {room:.4} to ∂Ω, margin {} required",
            bump.radius,
            bump.center,
            geometry.support_margin()
        )));
    }
    Ok(())
}

/// `J = curl(chi A)` for polynomial potentials `A` of degree at most 3, with
/// `chi` the bump of radius `bump_radius` about the centre of Ω.
pub fn make_divfree_source(
    a_eps: &VectorField,
    a_mu: &VectorField,
    geometry: &DomainGeometry,
    bump_radius: f64,
) -> Result<SourcePair> {
    let bump = Bump::new(geometry.center(), bump_radius)?;
    check_support(&bump, geometry)?;
    let mut out = Vec::with_capacity(2);
    for (name, a) in [("A_eps", a_eps), ("A_mu", a_mu)] {
        let comps = a.components().ok_or_else(|| {
            Error::UnsupportedClosure(format!("{name} must be a polynomial closure, got an opaque field"))
        })?;
        if a.bump().is_some() {
            return Err(Error::UnsupportedClosure(format!("{name} must be a plain polynomial; the bump is applied here")));
        }
        let deg = comps.iter().map(Poly::degree).max().unwrap_or(0);
        if deg > 3 {
            return Err(Error::UnsupportedClosure(format!("{name} has degree {deg}, the closure family stops at 3")));
        }
        let localized = a.with_bump(bump)?;
        out.push((localized.curl()?, localized));
    }
    let (j_mu, p_mu) = out.pop().expect("two channels");
    let (j_eps, p_eps) = out.pop().expect("two channels");
    let empty = j_eps.is_zero() && j_mu.is_zero();
    Ok(SourcePair {
        j_eps,
        j_mu,
        potential_eps: Some(p_eps),
        potential_mu: Some(p_mu),
        support: if empty { None } else { Some(bump) },
        divergence_free: true,
    })
}

/// Random polynomial potential with independent standard normal coefficients
/// on every monomial of degree at most `degree`.
pub fn random_potential<R: Rng>(rng: &mut R, degree: u8) -> VectorField {
    let mut comps = [Poly::zero(), Poly::zero(), Poly::zero()];
    for comp in comps.iter_mut() {
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let v: f64 = rng.sample(StandardNormal);
                    *comp = comp.add(&Poly::monomial(v, [a, b, c]));
                }
            }
        }
    }
    VectorField::polynomial(comps)
}

/// Seeded random divergence-free source of the given potential degree, with
/// the largest admissible bump about the centre of Ω.
pub fn random_divfree_source(geometry: &DomainGeometry, degree: u8, seed: u64) -> Result<SourcePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_eps = random_potential(&mut rng, degree);
    let a_mu = random_potential(&mut rng, degree);
    make_divfree_source(&a_eps, &a_mu, geometry, geometry.max_support_radius())
}

/// The fixed source used by the verification suite:
/// `A_eps = (1 + x₂, -0.5 + x₃, 0.7 x₁)`, `A_mu = (0.4 x₃, 1 - x₁, 0.8 + 0.6 x₂)`
/// with the largest admissible bump.
pub fn reference_source(geometry: &DomainGeometry) -> Result<SourcePair> {
    let a_eps = VectorField::polynomial([
        Poly::constant(1.0).add(&Poly::monomial(1.0, [0, 1, 0])),
        Poly::constant(-0.5).add(&Poly::monomial(1.0, [0, 0, 1])),
        Poly::monomial(0.7, [1, 0, 0]),
    ]);
    let a_mu = VectorField::polynomial([
        Poly::monomial(0.4, [0, 0, 1]),
        Poly::constant(1.0).add(&Poly::monomial(-1.0, [1, 0, 0])),
        Poly::constant(0.8).add(&Poly::monomial(0.6, [0, 1, 0])),
    ]);
    make_divfree_source(&a_eps, &a_mu, geometry, geometry.max_support_radius())
}

/// Pure gradient source `J_eps = ∇(chi phi)`, `J_mu = 0`. It radiates
/// nothing outside its support.
pub fn gradient_source(phi: &Poly, geometry: &DomainGeometry, bump_radius: f64) -> Result<SourcePair> {
    let bump = Bump::new(geometry.center(), bump_radius)?;
    let j_eps = ScalarField::polynomial(phi.clone()).with_bump(bump)?.gradient();
    SourcePair::from_currents(j_eps, VectorField::zero(), bump, geometry)
}

/// All multi-indices of total order exactly `n`.
pub fn multi_indices(n: u8) -> Vec<[u8; 3]> {
    let mut out = vec![];
    for a in (0..=n).rev() {
        for b in (0..=n - a).rev() {
            out.push([a, b, n - a - b]);
        }
    }
    out
}

/// `(sum_{|alpha| <= order} ∫ |d^alpha J_eps|^2 + |d^alpha J_mu|^2)^(1/2)`,
/// summing over distinct multi-indices, by the spherical product rule with
/// node spacing about `h`.
pub fn sobolev_norm(pair: &SourcePair, order: u8, h: f64) -> Result<f64> {
    if order > 2 {
        return Err(Error::InvalidArgument(format!("Sobolev order must be 0, 1 or 2, got {order}")));
    }
    let Some(bump) = pair.support() else {
        return Ok(0.0);
    };
    let orders = QuadratureOrders::for_spacing(bump.radius, h)?;
    sobolev_norm_with(pair, order, orders)
}

/// [`sobolev_norm`] with explicit quadrature orders.
pub fn sobolev_norm_with(pair: &SourcePair, order: u8, orders: QuadratureOrders) -> Result<f64> {
    let Some(bump) = pair.support() else {
        return Ok(0.0);
    };
    let rule = VolumeRule::ball(bump.center, bump.radius, orders)?;
    let mut fields = Vec::new();
    for n in 0..=order {
        for alpha in multi_indices(n) {
            for j in [&pair.j_eps, &pair.j_mu] {
                if n == 0 {
                    fields.push(j.clone());
                } else {
                    fields.push(j.derivative(alpha)?);
                }
            }
        }
    }
    let total: f64 = fields
        .iter()
        .map(|f| rule.integrate(|y| f.eval(y).norm_squared()))
        .sum();
    Ok(total.sqrt())
}

/// Convenience: the point at the centre of the support, or the origin.
pub fn support_center(pair: &SourcePair) -> Point {
    pair.support().map(|b| b.center).unwrap_or_else(Point::zeros)
}
