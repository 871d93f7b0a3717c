//! PEC cavity eigenvalues of a ball by separation of variables.
//!
//! With `x = ωR√(ε₀μ₀)` the TE family solves `j_n(x) = 0` and the TM family
//! `(x j_n(x))' = x j_{n-1}(x) - n j_n(x) = 0`, each root carrying `2n + 1`
//! degenerate modes.

use crate::geometry::MediumParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Scan step for sign changes; consecutive roots are at least about π apart.
pub const SCAN_STEP: f64 = PI / 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    TE,
    TM,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::TE => "TE",
            Family::TM => "TM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    /// Root of the characteristic function.
    pub x: f64,
    pub omega: f64,
    pub radius: f64,
    pub multiplicity: usize,
}

/// Spherical Bessel functions `j_0 … j_n` at `x > 0`.
pub fn spherical_bessel_all(n: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical Bessel functions need x > 0");
    let mut out = vec![0.0; n + 1];
    let j0 = x.sin() / x;
    if x > n as f64 {
        // Upward recurrence is stable past the turning point.
        out[0] = j0;
        if n >= 1 {
            out[1] = x.sin() / (x * x) - x.cos() / x;
        }
        for k in 1..n {
            out[k + 1] = (2 * k + 1) as f64 / x * out[k] - out[k - 1];
        }
        return out;
    }
    // Miller's downward recurrence normalised by j_0.
    let start = n + 20 + (x.abs() as usize);
    let (mut above, mut cur) = (0.0, 1e-300);
    for k in (1..=start).rev() {
        let below = (2 * k + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        if k - 1 <= n {
            out[k - 1] = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let scale = if j0.abs() > 1e-3 {
        j0 / out[0]
    } else {
        // Near a zero of j_0 normalise through j_1 instead.
        (x.sin() / (x * x) - x.cos() / x) / out[1]
    };
    out.iter().map(|v| v * scale).collect()
}

pub fn spherical_bessel(n: usize, x: f64) -> f64 {
    spherical_bessel_all(n, x)[n]
}

/// Characteristic function of a family; its positive roots are the `x`.
pub fn characteristic(family: Family, n: usize, x: f64) -> f64 {
    assert!(n >= 1, "angular index starts at 1");
    let j = spherical_bessel_all(n, x);
    match family {
        Family::TE => j[n],
        Family::TM => x * j[n - 1] - n as f64 * j[n],
    }
}

/// Positive roots of the characteristic function in `(0, x_max]`, located by
/// sign changes on the `SCAN_STEP` grid and refined by bisection.
pub fn roots_below(family: Family, n: usize, x_max: f64) -> Result<Vec<f64>> {
    roots_scan(family, n, x_max, SCAN_STEP, usize::MAX)
}

fn roots_scan(family: Family, n: usize, x_max: f64, step: f64, limit: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("angular index must be at least 1".into()));
    }
    let f = |x: f64| characteristic(family, n, x);
    let mut roots = vec![];
    let mut a = step * 0.5;
    let mut fa = f(a);
    while a < x_max && roots.len() < limit {
        let b = (a + step).min(x_max);
        let fb = f(b);
        if fb == 0.0 {
            roots.push(b);
        } else if fa != 0.0 && fa.signum() != fb.signum() {
            roots.push(bisect(&f, a, b, fa)?);
        }
        a = b;
        fa = fb;
    }
    Ok(roots)
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    if (b - a) > 1e-12 * b.abs().max(1.0) {
        return Err(Error::Bracket(format!("bisection on [{a}, {b}] did not converge")));
    }
    Ok(0.5 * (a + b))
}

fn mode(family: Family, n: usize, m: usize, x: f64, radius: f64, medium: &MediumParams) -> CavityMode {
    CavityMode {
        family,
        n,
        m,
        x,
        omega: x / (radius * medium.slowness()),
        radius,
        multiplicity: 2 * n + 1,
    }
}

fn sort_modes(modes: &mut [CavityMode]) {
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.family.cmp(&b.family)).then(a.n.cmp(&b.n)));
}

/// The first `m_max` roots of each family for `n = 1..=n_max`, sorted by `ω`.
pub fn ball_eigenvalues(radius: f64, medium: &MediumParams, n_max: usize, m_max: usize) -> Result<Vec<CavityMode>> {
    if !(radius > 0.0) || n_max == 0 || m_max == 0 {
        return Err(Error::InvalidArgument(format!(
            "need R > 0 and indices ≥ 1, got R={radius}, n_max={n_max}, m_max={m_max}"
        )));
    }
    let mut modes = vec![];
    for n in 1..=n_max {
        for family in [Family::TE, Family::TM] {
            // The m-th root lies below n + (m + 1)π.
            let x_max = n as f64 + (m_max as f64 + 1.0) * PI + 2.0;
            let roots = roots_scan(family, n, x_max, SCAN_STEP, m_max)?;
            if roots.len() < m_max {
                return Err(Error::Bracket(format!(
                    "{family} n={n}: found {} of {m_max} roots scanning (0, {x_max}]",
                    roots.len()
                )));
            }
            for (i, x) in roots.into_iter().enumerate() {
                modes.push(mode(family, n, i + 1, x, radius, medium));
            }
        }
    }
    sort_modes(&mut modes);
    Ok(modes)
}

/// Every mode with root `x ≤ x_max`, sorted by `ω`. Roots of both families
/// exceed `n`, so `n` runs up to `x_max`.
pub fn modes_below(radius: f64, medium: &MediumParams, x_max: f64) -> Result<Vec<CavityMode>> {
    if !(radius > 0.0 && x_max > 0.0) {
        return Err(Error::InvalidArgument(format!("need R > 0 and x_max > 0, got {radius}, {x_max}")));
    }
    let mut modes = vec![];
    for n in 1..=(x_max.floor() as usize).max(1) {
        for family in [Family::TE, Family::TM] {
            for (i, x) in roots_below(family, n, x_max)?.into_iter().enumerate() {
                modes.push(mode(family, n, i + 1, x, radius, medium));
            }
        }
    }
    sort_modes(&mut modes);
    Ok(modes)
}

/// The first `count` eigenvalues `ω_k` counted with multiplicity.
pub fn expanded_eigenvalues(radius: f64, medium: &MediumParams, count: usize) -> Result<Vec<f64>> {
    let mut x_max = 8.0;
    loop {
        let modes = modes_below(radius, medium, x_max)?;
        let total: usize = modes.iter().map(|m| m.multiplicity).sum();
        if total >= count {
            return Ok(modes
                .iter()
                .flat_map(|m| std::iter::repeat_n(m.omega, m.multiplicity))
                .take(count)
                .collect());
        }
        x_max *= 1.5;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub pass: bool,
    /// Smallest `ω_k(R1) - ω_k(R2)`.
    pub min_margin: f64,
    /// Some pair agreed within 1e-12 relative.
    pub inconclusive: bool,
    pub pairs: Vec<(f64, f64)>,
}

/// Checks `ω_k(B(R2)) < ω_k(B(R1))` for the first `count` eigenvalues.
pub fn monotonicity_check(r1: f64, r2: f64, medium: &MediumParams, count: usize) -> Result<MonotonicityReport> {
    if !(r1 > 0.0 && r1 < r2) {
        return Err(Error::InvalidArgument(format!("need 0 < R1 < R2, got R1={r1}, R2={r2}")));
    }
    let small = expanded_eigenvalues(r1, medium, count)?;
    let large = expanded_eigenvalues(r2, medium, count)?;
    let pairs: Vec<(f64, f64)> = small.into_iter().zip(large).collect();
    let min_margin = pairs.iter().map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let inconclusive = pairs.iter().any(|(a, b)| (a - b).abs() <= 1e-12 * a.abs());
    Ok(MonotonicityReport {
        pass: !inconclusive && min_margin > 0.0,
        min_margin,
        inconclusive,
        pairs,
    })
}

pub const MODE_CSV_HEADER: &str = "family,n,m,x,omega,multiplicity";

pub fn write_modes_csv<W: Write>(modes: &[CavityMode], mut w: W) -> Result<()> {
    writeln!(w, "{MODE_CSV_HEADER}")?;
    for m in modes {
        writeln!(w, "{},{},{},{:e},{:e},{}", m.family, m.n, m.m, m.x, m.omega, m.multiplicity)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders_match_closed_forms() {
        for x in [0.01, 0.5, 1.0, 3.7, 10.0, 25.0] {
            let (s, c) = (f64::sin(x), f64::cos(x));
            let j = spherical_bessel_all(3, x);
            // The closed form cancels badly at small x; use the series there.
            let j2 = if x < 0.1 {
                x * x / 15.0 * (1.0 - x * x / 14.0)
            } else {
                (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x)
            };
            assert!((j[0] - s / x).abs() < 1e-14);
            assert!((j[1] - (s / (x * x) - c / x)).abs() < 1e-13);
            assert!((j[2] - j2).abs() < 1e-10 * j2.abs().max(1e-4), "x={x}");
        }
    }

    #[test]
    fn miller_agrees_with_upward_recurrence() {
        let x = 4.9;
        let up = spherical_bessel_all(4, x);
        let down = spherical_bessel_all(8, x);
        for n in 0..=4 {
            assert!((up[n] - down[n]).abs() < 1e-13, "n={n}");
        }
    }
}
