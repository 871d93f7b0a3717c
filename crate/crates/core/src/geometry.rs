//! Medium constants, the domain Ω and surface quadrature on ∂Ω.

use crate::quadrature::{gauss_legendre, gauss_legendre_on};
use crate::{Error, Point, Result, CVec3, C64};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Homogeneous permittivity and permeability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    eps0: f64,
    mu0: f64,
}

impl MediumParams {
    pub fn new(eps0: f64, mu0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && mu0 > 0.0 && eps0.is_finite() && mu0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps0 and mu0 must be positive and finite, got eps0={eps0}, mu0={mu0}"
            )));
        }
        Ok(MediumParams { eps0, mu0 })
    }

    /// Vacuum-like units, ε₀ = μ₀ = 1.
    pub fn unit() -> Self {
        MediumParams { eps0: 1.0, mu0: 1.0 }
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    /// √(ε₀μ₀), the slowness.
    pub fn slowness(&self) -> f64 {
        (self.eps0 * self.mu0).sqrt()
    }

    /// Wave speed c = 1/√(ε₀μ₀).
    pub fn wave_speed(&self) -> f64 {
        1.0 / self.slowness()
    }

    /// κ(ω) = ω√(ε₀μ₀), for real or complex ω.
    pub fn kappa(&self, omega: C64) -> C64 {
        omega * self.slowness()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Region {
    Ball { center: [f64; 3], radius: f64 },
    Box { lo: [f64; 3], hi: [f64; 3] },
}

/// The domain Ω with the margin kept between source supports and ∂Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainGeometry {
    region: Region,
    diameter: f64,
    support_margin: f64,
}

impl DomainGeometry {
    /// Default margin as a fraction of the inradius.
    pub const DEFAULT_MARGIN_FRACTION: f64 = 0.2;

    pub fn new(region: Region, support_margin: f64) -> Result<Self> {
        let diameter = match region {
            Region::Ball { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
                }
                2.0 * radius
            }
            Region::Box { lo, hi } => {
                if (0..3).any(|i| !(hi[i] > lo[i])) {
                    return Err(Error::InvalidArgument(format!("box needs lo < hi on every axis, got {lo:?}, {hi:?}")));
                }
                (Point::from(hi) - Point::from(lo)).norm()
            }
        };
        let g = DomainGeometry {
            region,
            diameter,
            support_margin,
        };
        if !(support_margin > 0.0 && support_margin < g.inradius()) {
            return Err(Error::InvalidArgument(format!(
                "support margin must lie in (0, inradius = {}), got {support_margin}",
                g.inradius()
            )));
        }
        Ok(g)
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        Self::new(
            Region::Ball {
                center: center.into(),
                radius,
            },
            Self::DEFAULT_MARGIN_FRACTION * radius,
        )
    }

    pub fn unit_ball() -> Self {
        Self::ball(Point::zeros(), 1.0).expect("unit ball is valid")
    }

    pub fn cuboid(lo: Point, hi: Point) -> Result<Self> {
        let inr = (0..3).map(|i| 0.5 * (hi[i] - lo[i])).fold(f64::INFINITY, f64::min);
        Self::new(
            Region::Box {
                lo: lo.into(),
                hi: hi.into(),
            },
            Self::DEFAULT_MARGIN_FRACTION * inr.max(0.0),
        )
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// d = sup |x - y| over Ω.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn support_margin(&self) -> f64 {
        self.support_margin
    }

    pub fn center(&self) -> Point {
        match self.region {
            Region::Ball { center, .. } => center.into(),
            Region::Box { lo, hi } => (Point::from(lo) + Point::from(hi)) * 0.5,
        }
    }

    /// Radius of the largest ball about [`center`](Self::center) inside Ω.
    pub fn inradius(&self) -> f64 {
        match self.region {
            Region::Ball { radius, .. } => radius,
            Region::Box { lo, hi } => (0..3).map(|i| 0.5 * (hi[i] - lo[i])).fold(f64::INFINITY, f64::min),
        }
    }

    /// Largest admissible bump radius about the centre.
    pub fn max_support_radius(&self) -> f64 {
        self.inradius() - self.support_margin
    }

    /// Distance from `p` to ∂Ω, positive inside.
    pub fn signed_distance_inside(&self, p: &Point) -> f64 {
        match self.region {
            Region::Ball { center, radius } => radius - (p - Point::from(center)).norm(),
            Region::Box { lo, hi } => (0..3)
                .map(|i| (p[i] - lo[i]).min(hi[i] - p[i]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.signed_distance_inside(p) >= 0.0
    }

    /// Axis-aligned bounding box of Ω.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self.region {
            Region::Ball { center, radius } => {
                let c = Point::from(center);
                (c.add_scalar(-radius), c.add_scalar(radius))
            }
            Region::Box { lo, hi } => (lo.into(), hi.into()),
        }
    }
}

/// Analytic surface a mesh samples; fixes the normal field off the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshShape {
    Sphere { center: [f64; 3], radius: f64 },
    Faces,
}

/// Quadrature nodes on ∂Ω with outward normals and tangent frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub nodes: Vec<Point>,
    pub normals: Vec<Point>,
    pub weights: Vec<f64>,
    pub tangents: Vec<(Point, Point)>,
    shape: MeshShape,
}

impl SurfaceMesh {
    /// Gauss-Legendre in cos θ times uniform azimuth on a sphere.
    pub fn sphere(center: Point, radius: f64, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_polar == 0 || n_azimuth == 0 || !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sphere mesh needs positive radius and resolution, got r={radius}, {n_polar}x{n_azimuth}"
            )));
        }
        let (u, wu) = gauss_legendre(n_polar);
        let dphi = 2.0 * PI / n_azimuth as f64;
        let mut mesh = SurfaceMesh {
            nodes: vec![],
            normals: vec![],
            weights: vec![],
            tangents: vec![],
            shape: MeshShape::Sphere {
                center: center.into(),
                radius,
            },
        };
        for (ct, w) in u.iter().zip(&wu) {
            let st = (1.0 - ct * ct).sqrt();
            for k in 0..n_azimuth {
                // Half-step offset keeps nodes off the coordinate planes.
                let phi = (k as f64 + 0.5) * dphi;
                let (sp, cp) = phi.sin_cos();
                let nu = Point::new(st * cp, st * sp, *ct);
                let t1 = Point::new(ct * cp, ct * sp, -st);
                let t2 = Point::new(-sp, cp, 0.0);
                mesh.nodes.push(center + nu * radius);
                mesh.normals.push(nu);
                mesh.weights.push(radius * radius * w * dphi);
                mesh.tangents.push((t1, t2));
            }
        }
        Ok(mesh)
    }

    /// Tensor Gauss-Legendre rule with `n` nodes per edge on each box face.
    pub fn cuboid(lo: Point, hi: Point, n: usize) -> Result<Self> {
        if n == 0 || (0..3).any(|i| !(hi[i] > lo[i])) {
            return Err(Error::InvalidArgument("box mesh needs lo < hi and n > 0".into()));
        }
        let mut mesh = SurfaceMesh {
            nodes: vec![],
            normals: vec![],
            weights: vec![],
            tangents: vec![],
            shape: MeshShape::Faces,
        };
        for axis in 0..3 {
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            let (xa, wa) = gauss_legendre_on(n, lo[a], hi[a]);
            let (xb, wb) = gauss_legendre_on(n, lo[b], hi[b]);
            for (side, pos) in [(-1.0, lo[axis]), (1.0, hi[axis])] {
                let mut nu = Point::zeros();
                nu[axis] = side;
                let mut t1 = Point::zeros();
                t1[a] = 1.0;
                let t2 = nu.cross(&t1);
                for (pa, qa) in xa.iter().zip(&wa) {
                    for (pb, qb) in xb.iter().zip(&wb) {
                        let mut x = Point::zeros();
                        x[axis] = pos;
                        x[a] = *pa;
                        x[b] = *pb;
                        mesh.nodes.push(x);
                        mesh.normals.push(nu);
                        mesh.weights.push(qa * qb);
                        mesh.tangents.push((t1, t2));
                    }
                }
            }
        }
        Ok(mesh)
    }

    /// Default mesh for a domain: `resolution` polar nodes (sphere) or nodes
    /// per face edge (box).
    pub fn for_domain(geometry: &DomainGeometry, resolution: usize) -> Result<Self> {
        match *geometry.region() {
            Region::Ball { center, radius } => Self::sphere(center.into(), radius, resolution, 2 * resolution),
            Region::Box { lo, hi } => Self::cuboid(lo.into(), hi.into(), resolution),
        }
    }

    /// Reassembles a mesh from stored arrays.
    pub fn from_parts(
        nodes: Vec<Point>,
        normals: Vec<Point>,
        weights: Vec<f64>,
        tangents: Vec<(Point, Point)>,
        shape: MeshShape,
    ) -> Result<Self> {
        let n = nodes.len();
        if normals.len() != n || weights.len() != n || tangents.len() != n {
            return Err(Error::InvalidArgument("mesh arrays have inconsistent lengths".into()));
        }
        Ok(SurfaceMesh {
            nodes,
            normals,
            weights,
            tangents,
            shape,
        })
    }

    pub fn shape(&self) -> MeshShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Jacobian `[j][k] = d nu_k / d x_j` of the analytic normal field extended
    /// off the surface (radially for the sphere, constant per box face).
    pub fn normal_jacobian(&self, i: usize) -> Matrix3<f64> {
        match self.shape {
            MeshShape::Sphere { radius, .. } => {
                let nu = self.normals[i];
                (Matrix3::identity() - nu * nu.transpose()) / radius
            }
            MeshShape::Faces => Matrix3::zeros(),
        }
    }

    /// Same mesh with nodes visited in the order `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= seen.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the mesh nodes".into()));
        }
        Ok(SurfaceMesh {
            nodes: perm.iter().map(|&p| self.nodes[p]).collect(),
            normals: perm.iter().map(|&p| self.normals[p]).collect(),
            weights: perm.iter().map(|&p| self.weights[p]).collect(),
            tangents: perm.iter().map(|&p| self.tangents[p]).collect(),
            shape: self.shape,
        })
    }

    pub const CSV_HEADER: &'static str = "x,y,z,nx,ny,nz,weight";

    /// One row per node: coordinates, normal, weight.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for i in 0..self.len() {
            let (x, n) = (self.nodes[i], self.normals[i]);
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                x.x, x.y, x.z, n.x, n.y, n.z, self.weights[i]
            )?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). Tangent frames
    /// are rebuilt from the normals; the normal Jacobian is taken as zero
    /// (flat-face convention) since the shape is not stored.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != Self::CSV_HEADER {
            return Err(Error::Format(format!("unexpected mesh CSV header {header:?}")));
        }
        let mut mesh = SurfaceMesh {
            nodes: vec![],
            normals: vec![],
            weights: vec![],
            tangents: vec![],
            shape: MeshShape::Faces,
        };
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("mesh CSV line {}: {e}", lineno + 2)))?;
            if v.len() != 7 {
                return Err(Error::Format(format!("mesh CSV line {}: expected 7 fields, got {}", lineno + 2, v.len())));
            }
            let nu = Point::new(v[3], v[4], v[5]);
            mesh.nodes.push(Point::new(v[0], v[1], v[2]));
            mesh.normals.push(nu);
            mesh.weights.push(v[6]);
            mesh.tangents.push(tangent_frame(&nu));
        }
        Ok(mesh)
    }
}

/// Two orthonormal tangents completing `nu` to a right-handed frame.
pub fn tangent_frame(nu: &Point) -> (Point, Point) {
    let a = if nu.x.abs() < 0.9 { Point::x() } else { Point::y() };
    let t1 = (a - nu * a.dot(nu)).normalize();
    (t1, nu.cross(&t1))
}

/// v - (v·ν)ν.
pub fn tangential_projection(v: &CVec3, nu: &Point) -> Result<CVec3> {
    if (nu.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("normal must be a unit vector, |nu| = {}", nu.norm())));
    }
    Ok(project(v, nu))
}

pub(crate) fn project(v: &CVec3, nu: &Point) -> CVec3 {
    let n = crate::cvec(nu);
    let vn = v[0] * n[0] + v[1] * n[1] + v[2] * n[2];
    v - n * vn
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_mesh_invariants() {
        let m = SurfaceMesh::sphere(Point::zeros(), 1.0, 16, 32).unwrap();
        assert!((m.area() - 4.0 * PI).abs() < 1e-12 * 4.0 * PI);
        for i in 0..m.len() {
            let (nu, (t1, t2)) = (m.normals[i], m.tangents[i]);
            assert!((nu.norm() - 1.0).abs() < 1e-12);
            assert!(nu.dot(&t1).abs() < 1e-12 && nu.dot(&t2).abs() < 1e-12 && t1.dot(&t2).abs() < 1e-12);
            assert!((m.nodes[i].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn box_mesh_area() {
        let m = SurfaceMesh::cuboid(Point::new(-1.0, -1.0, -0.5), Point::new(1.0, 1.0, 0.5), 4).unwrap();
        assert!((m.area() - 2.0 * (4.0 + 2.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn diameters() {
        assert_eq!(DomainGeometry::unit_ball().diameter(), 2.0);
        let b = DomainGeometry::cuboid(Point::zeros(), Point::new(1.0, 2.0, 2.0)).unwrap();
        assert!((b.diameter() - 3.0).abs() < 1e-12 * 3.0);
        assert!((b.support_margin() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let nu = Point::new(0.0, 0.0, 1.0);
        let v = crate::cvec(&Point::new(1.0, 1.0, 0.0));
        assert_eq!(tangential_projection(&v, &nu).unwrap(), v);
        assert_eq!(tangential_projection(&crate::cvec(&nu), &nu).unwrap(), CVec3::zeros());
        assert!(tangential_projection(&v, &Point::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = SurfaceMesh::sphere(Point::zeros(), 1.0, 3, 4).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let r = SurfaceMesh::read_csv(&buf[..]).unwrap();
        assert_eq!(r.len(), m.len());
        for i in 0..m.len() {
            assert_eq!(r.nodes[i], m.nodes[i]);
            assert_eq!(r.weights[i], m.weights[i]);
        }
    }

    #[test]
    fn kappa_map() {
        let m = MediumParams::new(4.0, 1.0).unwrap();
        assert_eq!(m.kappa(C64::new(1.0, -1.0)), C64::new(2.0, -2.0));
        assert!(MediumParams::new(0.0, 1.0).is_err());
    }
}
