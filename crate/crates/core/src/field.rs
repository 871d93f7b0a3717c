//! Closure algebra for vector fields.
//!
//! A closure field is a finite sum of polynomial terms, optionally multiplied
//! by the compact bump
//!
//! ```text
//! chi(y) = exp(1 - q),   q = 1 / (1 - |y - c|^2 / b^2)   for |y - c| < b,
//! ```
//!
//! and zero outside the ball `B(c, b)`. With a bump present the polynomial
//! variables are the shifted coordinates `z = y - c` and the auxiliary `q`.
//! Since `dq/dz_j = 2 z_j q^2 / b^2`, derivatives stay in the same family:
//!
//! ```text
//! d_j [z^a q^m chi] = a_j z^(a-e_j) q^m chi + (2/b^2) (m z^(a+e_j) q^(m+1) - z^(a+e_j) q^(m+2)) chi
//! ```
//!
//! so curls, divergences and higher partials are exact symbolic operations.
//! Fields built from an arbitrary Rust closure ([`VectorField::opaque`]) can be
//! evaluated but not differentiated.

use crate::{Error, Point, Result, CVec3, C64};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Exponents of `(z1, z2, z3, q)`.
pub type Exps = [u8; 4];

// Beyond this value of q the bump is below 1e-300 and is treated as zero.
const Q_CUTOFF: f64 = 700.0;
// Relative size below which a sum of two coefficients counts as exact
// cancellation. Keeps div(curl A) identically zero despite rounding in the
// order of products.
const CANCEL_TOL: f64 = 1e-13;

/// The smooth compact bump `exp(1 - 1/(1 - r^2/b^2))`, equal to 1 at its centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("bump radius must be positive, got {radius}")));
        }
        Ok(Bump { center, radius })
    }

    pub fn eval(&self, y: &Point) -> f64 {
        match self.frame(y) {
            Some((_, q)) => (1.0 - q).exp(),
            None => 0.0,
        }
    }

    /// Shifted coordinates and `q`, or `None` where the bump vanishes.
    fn frame(&self, y: &Point) -> Option<([f64; 3], f64)> {
        let z = y - self.center;
        let s = z.norm_squared() / (self.radius * self.radius);
        if s >= 1.0 {
            return None;
        }
        let q = 1.0 / (1.0 - s);
        if q > Q_CUTOFF {
            return None;
        }
        Some(([z.x, z.y, z.z], q))
    }
}

/// A polynomial in `(z1, z2, z3, q)` with complex coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Exps, C64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: impl Into<C64>) -> Self {
        Poly::monomial(c, [0, 0, 0])
    }

    /// `c * x1^p1 * x2^p2 * x3^p3`.
    pub fn monomial(c: impl Into<C64>, powers: [u8; 3]) -> Self {
        let mut p = Poly::zero();
        p.add_term([powers[0], powers[1], powers[2], 0], c.into());
        p
    }

    /// Linear combination `sum c_i x_i`.
    pub fn linear(c: [f64; 3]) -> Self {
        let mut p = Poly::zero();
        for (i, ci) in c.iter().enumerate() {
            let mut e = [0u8; 4];
            e[i] = 1;
            p.add_term(e, C64::new(*ci, 0.0));
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exps, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree in the coordinate variables.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e[0] as usize + e[1] as usize + e[2] as usize)
            .max()
            .unwrap_or(0)
    }

    fn q_degree(&self) -> u8 {
        self.terms.keys().map(|e| e[3]).max().unwrap_or(0)
    }

    fn add_term(&mut self, e: Exps, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let old = *o.get();
                let s = old + c;
                if s.norm() <= CANCEL_TOL * (old.norm() + c.norm()) {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, *c);
        }
        out
    }

    pub fn scale(&self, c: C64) -> Poly {
        if c == C64::new(0.0, 0.0) {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.im == 0.0)
    }

    fn max_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `p(z + c)` expanded in `z`. Only valid for q-free polynomials.
    fn shift(&self, c: &Point) -> Poly {
        let mut out = Poly::zero();
        for (e, coef) in &self.terms {
            debug_assert_eq!(e[3], 0);
            // Expand each (z_j + c_j)^n_j binomially.
            let factors: Vec<Vec<(u8, f64)>> = (0..3)
                .map(|j| {
                    let n = e[j] as u32;
                    (0..=n)
                        .map(|k| (k as u8, binomial(n, k) * c[j].powi((n - k) as i32)))
                        .collect()
                })
                .collect();
            for (a, ca) in &factors[0] {
                for (b, cb) in &factors[1] {
                    for (d, cd) in &factors[2] {
                        out.add_term([*a, *b, *d, 0], coef * (ca * cb * cd));
                    }
                }
            }
        }
        out
    }

    fn d_plain(&self, j: usize) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            if e[j] > 0 {
                let mut f = *e;
                f[j] -= 1;
                out.add_term(f, c * e[j] as f64);
            }
        }
        out
    }

    fn d_bump(&self, j: usize, radius: f64) -> Poly {
        let s = 2.0 / (radius * radius);
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            if e[j] > 0 {
                let mut f = *e;
                f[j] -= 1;
                out.add_term(f, c * e[j] as f64);
            }
            let mut up = *e;
            up[j] += 1;
            let m = e[3];
            if m > 0 {
                let mut f = up;
                f[3] = m + 1;
                out.add_term(f, c * (s * m as f64));
            }
            let mut f = up;
            f[3] = m + 2;
            out.add_term(f, -c * s);
        }
        out
    }

    fn eval(&self, z: &[f64; 3], q: f64) -> C64 {
        let deg = self
            .terms
            .keys()
            .map(|e| e[0].max(e[1]).max(e[2]))
            .max()
            .unwrap_or(0) as usize;
        let qdeg = self.q_degree() as usize;
        let pw = |x: f64, n: usize| {
            let mut v = Vec::with_capacity(n + 1);
            let mut acc = 1.0;
            for _ in 0..=n {
                v.push(acc);
                acc *= x;
            }
            v
        };
        let p0 = pw(z[0], deg);
        let p1 = pw(z[1], deg);
        let p2 = pw(z[2], deg);
        let pq = pw(q, qdeg);
        let mut s = C64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let m = p0[e[0] as usize] * p1[e[1] as usize] * p2[e[2] as usize] * pq[e[3] as usize];
            s += c * m;
        }
        s
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Where a field can be nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Empty,
    Ball { center: Point, radius: f64 },
    Unbounded,
}

type OpaqueFn = Arc<dyn Fn(&Point) -> CVec3 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Closure { bump: Option<Bump>, comps: [Poly; 3] },
    Opaque { label: String, f: OpaqueFn },
}

/// A complex vector field on R^3.
#[derive(Clone)]
pub struct VectorField {
    repr: Repr,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Closure { bump, comps } => f
                .debug_struct("VectorField")
                .field("bump", bump)
                .field("terms", &comps.iter().map(Poly::len).collect::<Vec<_>>())
                .finish(),
            Repr::Opaque { label, .. } => write!(f, "VectorField(opaque {label:?})"),
        }
    }
}

impl VectorField {
    pub fn zero() -> Self {
        VectorField {
            repr: Repr::Closure {
                bump: None,
                comps: [Poly::zero(), Poly::zero(), Poly::zero()],
            },
        }
    }

    /// Polynomial components in absolute coordinates.
    pub fn polynomial(comps: [Poly; 3]) -> Self {
        for p in &comps {
            assert!(p.q_degree() == 0, "plain polynomial fields cannot contain q");
        }
        VectorField {
            repr: Repr::Closure { bump: None, comps },
        }
    }

    pub fn constant(v: [f64; 3]) -> Self {
        VectorField::polynomial(v.map(Poly::constant))
    }

    /// Evaluation-only field. Differential operators on it fail with
    /// [`Error::UnsupportedClosure`].
    pub fn opaque<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Point) -> CVec3 + Send + Sync + 'static,
    {
        VectorField {
            repr: Repr::Opaque {
                label: label.into(),
                f: Arc::new(f),
            },
        }
    }

    /// Multiplies a plain polynomial field by `bump`.
    pub fn with_bump(&self, bump: Bump) -> Result<Self> {
        match &self.repr {
            Repr::Closure { bump: None, comps } => {
                let c = bump.center;
                Ok(VectorField {
                    repr: Repr::Closure {
                        bump: Some(bump),
                        comps: [comps[0].shift(&c), comps[1].shift(&c), comps[2].shift(&c)],
                    },
                })
            }
            Repr::Closure { bump: Some(_), .. } => Err(Error::UnsupportedClosure(
                "field already carries a bump; products of bumps are outside the closure family".into(),
            )),
            Repr::Opaque { label, .. } => Err(Error::UnsupportedClosure(format!(
                "cannot multiply opaque field {label:?} by a bump"
            ))),
        }
    }

    /// Builds a bump field directly from polynomials in the shifted variables
    /// `(z, q)`.
    pub fn from_bump_terms(bump: Bump, comps: [Poly; 3]) -> Self {
        VectorField {
            repr: Repr::Closure {
                bump: Some(bump),
                comps,
            },
        }
    }

    pub fn bump(&self) -> Option<&Bump> {
        match &self.repr {
            Repr::Closure { bump, .. } => bump.as_ref(),
            Repr::Opaque { .. } => None,
        }
    }

    /// Polynomial components, if this is a closure field.
    pub fn components(&self) -> Option<&[Poly; 3]> {
        match &self.repr {
            Repr::Closure { comps, .. } => Some(comps),
            Repr::Opaque { .. } => None,
        }
    }

    pub fn is_closure(&self) -> bool {
        matches!(self.repr, Repr::Closure { .. })
    }

    /// True for a closure field with no terms.
    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Closure { comps, .. } => comps.iter().all(Poly::is_zero),
            Repr::Opaque { .. } => false,
        }
    }

    /// True if every coefficient is real (so the field is real-valued).
    pub fn is_real(&self) -> bool {
        match &self.repr {
            Repr::Closure { comps, .. } => comps.iter().all(Poly::is_real),
            Repr::Opaque { .. } => false,
        }
    }

    pub fn support(&self) -> Support {
        match &self.repr {
            _ if self.is_zero() => Support::Empty,
            Repr::Closure { bump: Some(b), .. } => Support::Ball {
                center: b.center,
                radius: b.radius,
            },
            _ => Support::Unbounded,
        }
    }

    pub fn eval(&self, y: &Point) -> CVec3 {
        match &self.repr {
            Repr::Closure { bump: None, comps } => {
                let z = [y.x, y.y, y.z];
                CVec3::new(comps[0].eval(&z, 0.0), comps[1].eval(&z, 0.0), comps[2].eval(&z, 0.0))
            }
            Repr::Closure { bump: Some(b), comps } => match b.frame(y) {
                None => CVec3::zeros(),
                Some((z, q)) => {
                    let chi = (1.0 - q).exp();
                    CVec3::new(
                        comps[0].eval(&z, q) * chi,
                        comps[1].eval(&z, q) * chi,
                        comps[2].eval(&z, q) * chi,
                    )
                }
            },
            Repr::Opaque { f, .. } => f(y),
        }
    }

    fn closure_parts(&self, op: &str) -> Result<(Option<Bump>, &[Poly; 3])> {
        match &self.repr {
            Repr::Closure { bump, comps } => Ok((*bump, comps)),
            Repr::Opaque { label, .. } => Err(Error::UnsupportedClosure(format!(
                "{op} needs symbolic derivatives, but field {label:?} is an opaque closure"
            ))),
        }
    }

    fn d(p: &Poly, bump: &Option<Bump>, j: usize) -> Poly {
        match bump {
            Some(b) => p.d_bump(j, b.radius),
            None => p.d_plain(j),
        }
    }

    /// Partial derivative along axis `j` (0-based).
    pub fn partial(&self, j: usize) -> Result<Self> {
        assert!(j < 3);
        let (bump, c) = self.closure_parts("partial derivative")?;
        Ok(VectorField {
            repr: Repr::Closure {
                bump,
                comps: [Self::d(&c[0], &bump, j), Self::d(&c[1], &bump, j), Self::d(&c[2], &bump, j)],
            },
        })
    }

    /// Mixed partial `d^alpha`.
    pub fn derivative(&self, alpha: [u8; 3]) -> Result<Self> {
        self.closure_parts("derivative")?;
        let mut f = self.clone();
        for (j, &n) in alpha.iter().enumerate() {
            for _ in 0..n {
                f = f.partial(j)?;
            }
        }
        Ok(f)
    }

    pub fn curl(&self) -> Result<Self> {
        let (bump, c) = self.closure_parts("curl")?;
        let d = |i: usize, j: usize| Self::d(&c[i], &bump, j);
        let comps = [
            d(2, 1).add(&d(1, 2).scale(C64::new(-1.0, 0.0))),
            d(0, 2).add(&d(2, 0).scale(C64::new(-1.0, 0.0))),
            d(1, 0).add(&d(0, 1).scale(C64::new(-1.0, 0.0))),
        ];
        Ok(VectorField {
            repr: Repr::Closure { bump, comps },
        })
    }

    pub fn div(&self) -> Result<ScalarField> {
        let (bump, c) = self.closure_parts("divergence")?;
        let poly = Self::d(&c[0], &bump, 0)
            .add(&Self::d(&c[1], &bump, 1))
            .add(&Self::d(&c[2], &bump, 2));
        Ok(ScalarField { bump, poly })
    }

    pub fn scale(&self, s: C64) -> Self {
        match &self.repr {
            Repr::Closure { bump, comps } => VectorField {
                repr: Repr::Closure {
                    bump: *bump,
                    comps: [comps[0].scale(s), comps[1].scale(s), comps[2].scale(s)],
                },
            },
            Repr::Opaque { label, f } => {
                let f = f.clone();
                VectorField::opaque(format!("{s} * {label}"), move |y| f(y) * s)
            }
        }
    }

    /// Sum of two closure fields. Both must share the same bump (or one of
    /// them be zero).
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let (b1, c1) = self.closure_parts("addition")?;
        let (b2, c2) = other.closure_parts("addition")?;
        if b1 != b2 {
            return Err(Error::UnsupportedClosure(
                "cannot add fields carrying different bumps".into(),
            ));
        }
        Ok(VectorField {
            repr: Repr::Closure {
                bump: b1,
                comps: [c1[0].add(&c2[0]), c1[1].add(&c2[1]), c1[2].add(&c2[2])],
            },
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Largest coefficient magnitude, used for relative tolerances.
    pub fn coefficient_scale(&self) -> f64 {
        match &self.repr {
            Repr::Closure { comps, .. } => comps.iter().map(Poly::max_coefficient).fold(0.0, f64::max),
            Repr::Opaque { .. } => f64::NAN,
        }
    }

    /// Samples on the `n^3` grid spanning the box `[lo, hi]` (nodes include
    /// both ends).
    pub fn sample_grid(&self, lo: Point, hi: Point, n: usize) -> GridSamples {
        assert!(n >= 2, "grid needs at least two nodes per axis");
        let h = (hi - lo) / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let y = lo + Point::new(i as f64 * h.x, j as f64 * h.y, k as f64 * h.z);
                    values.push(self.eval(&y));
                }
            }
        }
        GridSamples { lo, h, n, values }
    }
}

/// A complex scalar field in the same closure family.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    bump: Option<Bump>,
    poly: Poly,
}

impl ScalarField {
    pub fn polynomial(poly: Poly) -> Self {
        assert!(poly.q_degree() == 0, "plain polynomial fields cannot contain q");
        ScalarField { bump: None, poly }
    }

    pub fn with_bump(&self, bump: Bump) -> Result<Self> {
        if self.bump.is_some() {
            return Err(Error::UnsupportedClosure(
                "field already carries a bump; products of bumps are outside the closure family".into(),
            ));
        }
        Ok(ScalarField {
            bump: Some(bump),
            poly: self.poly.shift(&bump.center),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    pub fn eval(&self, y: &Point) -> C64 {
        match &self.bump {
            None => self.poly.eval(&[y.x, y.y, y.z], 0.0),
            Some(b) => match b.frame(y) {
                None => C64::new(0.0, 0.0),
                Some((z, q)) => self.poly.eval(&z, q) * (1.0 - q).exp(),
            },
        }
    }

    pub fn gradient(&self) -> VectorField {
        let d = |j| VectorField::d(&self.poly, &self.bump, j);
        VectorField {
            repr: Repr::Closure {
                bump: self.bump,
                comps: [d(0), d(1), d(2)],
            },
        }
    }
}

/// Samples of a field on a regular grid. Derived data: always regenerated from
/// the closure, never used as the source of truth.
#[derive(Debug, Clone)]
pub struct GridSamples {
    pub lo: Point,
    pub h: Point,
    pub n: usize,
    pub values: Vec<CVec3>,
}

impl GridSamples {
    pub fn node(&self, i: usize, j: usize, k: usize) -> Point {
        self.lo + Point::new(i as f64 * self.h.x, j as f64 * self.h.y, k as f64 * self.h.z)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> CVec3 {
        self.values[(i * self.n + j) * self.n + k]
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Exact curl of a closure field.
pub fn curl_field(f: &VectorField) -> Result<VectorField> {
    f.curl()
}

/// Exact divergence of a closure field at the probe points.
pub fn div_field(f: &VectorField, probes: &[Point]) -> Result<Vec<C64>> {
    let d = f.div()?;
    Ok(probes.iter().map(|p| d.eval(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn curl_of_linear_field() {
        // f = (0, 0, x1): curl f = (d2 f3 - d3 f2, d3 f1 - d1 f3, d1 f2 - d2 f1) = (0, -1, 0)
        let f = VectorField::polynomial([Poly::zero(), Poly::zero(), Poly::monomial(1.0, [1, 0, 0])]);
        let c = f.curl().unwrap();
        let v = c.eval(&Point::new(0.3, -2.0, 5.0));
        assert!(close(v[0], 0.0.into(), 0.0) && close(v[1], (-1.0).into(), 0.0) && close(v[2], 0.0.into(), 0.0));
    }

    #[test]
    fn curl_of_rotation() {
        let f = VectorField::polynomial([Poly::monomial(-1.0, [0, 1, 0]), Poly::monomial(1.0, [1, 0, 0]), Poly::zero()]);
        let v = f.curl().unwrap().eval(&Point::new(1.0, 2.0, 3.0));
        assert_eq!(v, CVec3::new(0.0.into(), 0.0.into(), 2.0.into()));
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let phi = ScalarField::polynomial(Poly::monomial(1.0, [1, 1, 1]));
        let c = phi.gradient().curl().unwrap();
        assert!(c.is_zero());
    }

    #[test]
    fn divergence_examples() {
        let id = VectorField::polynomial([
            Poly::monomial(1.0, [1, 0, 0]),
            Poly::monomial(1.0, [0, 1, 0]),
            Poly::monomial(1.0, [0, 0, 1]),
        ]);
        let d = div_field(&id, &[Point::new(0.1, 0.2, 0.3), Point::new(-4.0, 1.0, 9.0)]).unwrap();
        assert!(d.iter().all(|v| *v == C64::new(3.0, 0.0)));
        let sq = VectorField::polynomial([Poly::monomial(1.0, [2, 0, 0]), Poly::zero(), Poly::zero()]);
        assert_eq!(div_field(&sq, &[Point::new(2.0, 0.0, 0.0)]).unwrap()[0], C64::new(4.0, 0.0));
    }

    #[test]
    fn bump_derivative_matches_finite_differences() {
        let b = Bump::new(Point::new(0.1, -0.2, 0.05), 0.8).unwrap();
        let f = VectorField::polynomial([
            Poly::monomial(1.0, [0, 1, 1]),
            Poly::monomial(C64::new(0.5, 2.0), [2, 0, 0]).add(&Poly::constant(1.0)),
            Poly::monomial(-0.7, [1, 1, 1]),
        ])
        .with_bump(b)
        .unwrap();
        let y = Point::new(0.3, 0.1, -0.2);
        let h = 1e-5;
        for j in 0..3 {
            let dj = f.partial(j).unwrap().eval(&y);
            let mut e = Point::zeros();
            e[j] = h;
            let fd = (f.eval(&(y + e)) - f.eval(&(y - e))) / C64::new(2.0 * h, 0.0);
            assert!((dj - fd).norm() < 1e-8 * (1.0 + dj.norm()), "axis {j}: {dj:?} vs {fd:?}");
        }
    }

    #[test]
    fn bump_shift_preserves_values() {
        let b = Bump::new(Point::new(0.2, 0.1, -0.3), 0.9).unwrap();
        let plain = VectorField::polynomial([
            Poly::monomial(2.0, [1, 2, 0]),
            Poly::monomial(1.0, [0, 0, 3]),
            Poly::constant(-1.0),
        ]);
        let f = plain.with_bump(b).unwrap();
        let y = Point::new(0.4, -0.1, 0.0);
        let expect = plain.eval(&y) * C64::new(b.eval(&y), 0.0);
        assert!((f.eval(&y) - expect).norm() < 1e-14);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let b = Bump::new(Point::zeros(), 0.5).unwrap();
        let f = VectorField::constant([1.0, 2.0, 3.0]).with_bump(b).unwrap();
        assert_eq!(f.eval(&Point::new(0.5, 0.0, 0.0)), CVec3::zeros());
        assert_eq!(f.eval(&Point::new(0.3, 0.3, 0.3)), CVec3::zeros());
        assert!(f.eval(&Point::new(0.1, 0.0, 0.0)).norm() > 0.0);
        assert_eq!(b.eval(&Point::zeros()), 1.0);
    }

    #[test]
    fn opaque_fields_reject_derivatives() {
        let f = VectorField::opaque("sin", |y: &Point| CVec3::new(y.x.sin().into(), 0.0.into(), 0.0.into()));
        assert!(matches!(f.curl(), Err(Error::UnsupportedClosure(_))));
        assert!(matches!(f.div(), Err(Error::UnsupportedClosure(_))));
        assert!(matches!(f.partial(0), Err(Error::UnsupportedClosure(_))));
        assert!(f.eval(&Point::new(1.0, 0.0, 0.0))[0].re > 0.8);
    }

    #[test]
    fn adding_different_bumps_is_rejected() {
        let a = VectorField::constant([1.0, 0.0, 0.0]).with_bump(Bump::new(Point::zeros(), 0.5).unwrap()).unwrap();
        let b = VectorField::constant([1.0, 0.0, 0.0]).with_bump(Bump::new(Point::zeros(), 0.6).unwrap()).unwrap();
        assert!(a.add(&b).is_err());
        assert!(a.add(&VectorField::zero()).is_ok());
    }

    #[test]
    fn grid_cache_matches_closure() {
        let f = VectorField::constant([0.0, 0.0, 1.0])
            .with_bump(Bump::new(Point::zeros(), 1.0).unwrap())
            .unwrap()
            .curl()
            .unwrap();
        let g = f.sample_grid(Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0), 5);
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    assert_eq!(g.get(i, j, k), f.eval(&g.node(i, j, k)));
                }
            }
        }
    }
}
