//! One-dimensional quadrature rules.

use crate::{Error, Result, C64};
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

// Kronrod 15 / Gauss 7 abscissae and weights (QUADPACK).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<C64>,
    error: f64,
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Panel
where
    F: Fn(f64) -> Vec<C64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let m = fc.len();
    let mut kron: Vec<C64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<C64> = fc.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..m {
            let s = f1[i] + f2[i];
            kron[i] += s * WGK[j];
            if j % 2 == 1 {
                gauss[i] += s * WG[j / 2];
            }
        }
    }
    let mut error = 0.0f64;
    for i in 0..m {
        kron[i] *= h;
        gauss[i] *= h;
        error = error.max((kron[i] - gauss[i]).norm());
    }
    Panel {
        a,
        b,
        value: kron,
        error,
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of a vector-valued
/// integrand. The error estimate is the max-norm over components; the loop
/// stops when it falls below `max(abs_tol, rel_tol * |result|_max)`.
pub fn adaptive_gk15<F>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<Vec<C64>>
where
    F: Fn(f64) -> Vec<C64>,
{
    if !(b > a) {
        return Err(Error::InvalidArgument(format!(
            "adaptive quadrature needs a < b, got [{a}, {b}]"
        )));
    }
    let mut panels = vec![gk15(&f, a, b)];
    loop {
        let m = panels[0].value.len();
        let mut total = vec![C64::new(0.0, 0.0); m];
        let mut err = 0.0;
        for p in &panels {
            for i in 0..m {
                total[i] += p.value[i];
            }
            err += p.error;
        }
        let scale = total.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !scale.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= abs_tol.max(rel_tol * scale) {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature(format!(
                "adaptive Gauss-Kronrod did not converge on [{a}, {b}]: error estimate {err:.3e} vs scale {scale:.3e} after {} panels",
                panels.len()
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

/// Trapezoid (uniform) nodes on the circle, with weights summing to 2π.
pub fn periodic_trapezoid(n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * PI / n as f64;
    ((0..n).map(|i| i as f64 * h).collect(), vec![h; n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 33, 64, 128] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n={n}: {s} vs {exact}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn adaptive_handles_oscillatory_integrand() {
        let r = adaptive_gk15(|t| vec![C64::new(0.0, 30.0 * t).exp()], 0.0, 2.0, 1e-12, 0.0, 500)
            .unwrap();
        let exact = (C64::new(0.0, 60.0).exp() - 1.0) / C64::new(0.0, 30.0);
        assert!((r[0] - exact).norm() < 1e-12);
    }

    #[test]
    fn adaptive_reports_failure() {
        let r = adaptive_gk15(|t| vec![C64::new(1.0 / (t - 0.1).abs().sqrt(), 0.0)], -1.0, 1.0, 1e-14, 0.0, 4);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
