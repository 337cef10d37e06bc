//! CR-singular locus of the perturbed sphere.
//!
//! `S^n` is cut out by `R(z) = (|z|² − 1, Im z₂, …, Im z_n)` and is CR singular
//! exactly where `det Jac_C R = z̄₁·(1/2i)^{n−1}` vanishes. For the perturbed
//! sphere the locus is traced in the parameters `Θ(a, b, s) = (a+ib, sqrt(1−a²−b²)·s)`
//! by solving `J(a, b, s) = det Jac_C(R∘Φ)(Ψ(Θ(a, b, s))) = 0` for each `s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::det_complex;
use crate::perturbation::PhiField;

pub const DEFAULT_JACOBIAN_STEP: f64 = 1e-5;
pub const DEFAULT_S_GRID: usize = 256;
const PARAM_STEP: f64 = 1e-4;
const MAX_NEWTON_ITER: usize = 30;
const MAX_FAILURE_FRACTION: f64 = 0.1;
const GAP_RATIO: f64 = 3.0;
const S_GRID_SEED: u64 = 0x51_6e;

/// `Θ(a, b, s) = (a + ib, sqrt(1 − a² − b²)·s)`.
pub fn sphere_param(a: f64, b: f64, s: &[f64]) -> Result<Vec<Complex64>> {
    let r2 = a * a + b * b;
    if r2 >= 1.0 {
        return Err(Error::Domain(format!("a² + b² = {r2} must be below 1")));
    }
    let rho = (1.0 - r2).sqrt();
    let mut z = vec![Complex64::new(a, b)];
    z.extend(s.iter().map(|&x| Complex64::new(rho * x, 0.0)));
    Ok(z)
}

/// `R(z) = (Σ|z_k|² − 1, Im z₂, …, Im z_n)`.
pub fn defining_map(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    out.push(z.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0);
    out.extend(z[1..].iter().map(|c| c.im));
    out
}

/// `det` of the complex Jacobian `(∂R_i/∂z_k)` of a real map `R: C^n → R^n`.
///
/// Wirtinger derivatives `½(∂/∂x − i∂/∂y)` are taken by central differences.
pub fn complex_jacobian_det<F>(map: F, z: &[Complex64], step: f64) -> Result<Complex64>
where
    F: Fn(&[Complex64]) -> Result<Vec<f64>>,
{
    let n = z.len();
    let mut jac = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        let mut columns = [vec![0.0; n], vec![0.0; n]];
        for (dir, col) in columns.iter_mut().enumerate() {
            let delta = if dir == 0 {
                Complex64::new(step, 0.0)
            } else {
                Complex64::new(0.0, step)
            };
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[k] += delta;
            zm[k] -= delta;
            let fp = map(&zp)?;
            let fm = map(&zm)?;
            for i in 0..n {
                col[i] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        for i in 0..n {
            jac[i * n + k] = 0.5 * Complex64::new(columns[0][i], -columns[1][i]);
        }
    }
    Ok(det_complex(&jac, n))
}

/// `J(ψ, a, b, s)` for the perturbation carried by `field`.
pub fn locus_function(field: &PhiField, a: f64, b: f64, s: &[f64], step: f64) -> Result<Complex64> {
    let z = field.forward(&sphere_param(a, b, s)?)?;
    composite_det(field, &z, step)
}

/// `det Jac_C(R∘Φ)(z)`.
pub fn composite_det(field: &PhiField, z: &[Complex64], step: f64) -> Result<Complex64> {
    complex_jacobian_det(|p| field.membership(p), z, step)
}

/// Real `2×2` Jacobian of `(Re J, Im J)` with respect to `(a, b)`.
pub fn locus_derivative(field: &PhiField, a: f64, b: f64, s: &[f64], step: f64) -> Result<[[f64; 2]; 2]> {
    let h = PARAM_STEP;
    let da = (locus_function(field, a + h, b, s, step)? - locus_function(field, a - h, b, s, step)?) / (2.0 * h);
    let db = (locus_function(field, a, b + h, s, step)? - locus_function(field, a, b - h, s, step)?) / (2.0 * h);
    Ok([[da.re, db.re], [da.im, db.im]])
}

/// Unperturbed `D_{a,b}J(0,0,s)`: the real matrix of `(a, b) ↦ c·(a − ib)`, `c = (1/2i)^{n−1}`.
///
/// For odd `n` the constant `c` is real and this is `c·diag(1, −1)`.
pub fn base_derivative(n: usize) -> [[f64; 2]; 2] {
    let c = Complex64::new(0.0, -0.5).powu(n as u32 - 1);
    [[c.re, c.im], [c.im, -c.re]]
}

/// Parameter directions `s ∈ U^{n−2} ⊂ R^{n−1}`.
///
/// `n = 2`: `{±1}`; `n = 3`: equispaced angles; `n = 4`: Fibonacci points;
/// higher `n`: seeded Gaussian directions.
pub fn s_grid(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => vec![vec![1.0], vec![-1.0]],
        3 => (0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        4 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - y * y).sqrt();
                    let th = golden * k as f64;
                    vec![r * th.cos(), y, r * th.sin()]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(S_GRID_SEED);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..n - 1).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / r).collect()
                })
                .collect()
        }
    }
}

/// One located point `z₁ = Γ(ψ, s)` of the singular locus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularSample {
    pub s: Vec<f64>,
    pub z1: Complex64,
    /// `Ψ(Θ(Γ(s), s))`, the singular point in `C^n`.
    pub point: Vec<Complex64>,
    pub residual: f64,
    pub jacobian_cond: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusFailure {
    pub s: Vec<f64>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusReport {
    pub samples: Vec<SingularSample>,
    pub failures: Vec<LocusFailure>,
    pub max_gamma: f64,
    pub tol: f64,
    /// Closed-loop verdict (`n = 3` only).
    pub connected: Option<bool>,
    pub max_gap: f64,
    pub median_gap: f64,
}

fn cond2(m: &[[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let frob = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = (frob * frob - 4.0 * det * det).max(0.0).sqrt();
    let smax = ((frob + disc) / 2.0).sqrt();
    let smin = ((frob - disc) / 2.0).max(0.0).sqrt();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

fn locate(field: &PhiField, s: &[f64], tol: f64, step: f64) -> Result<SingularSample> {
    let (mut a, mut b) = (0.0, 0.0);
    let mut residual = f64::INFINITY;
    for iteration in 0..=MAX_NEWTON_ITER {
        let j = locus_function(field, a, b, s, step)?;
        residual = j.norm();
        if residual <= tol {
            let d = locus_derivative(field, a, b, s, step)?;
            let point = field.forward(&sphere_param(a, b, s)?)?;
            return Ok(SingularSample {
                s: s.to_vec(),
                z1: Complex64::new(a, b),
                point,
                residual,
                jacobian_cond: cond2(&d),
                iterations: iteration,
            });
        }
        let d = locus_derivative(field, a, b, s, step)?;
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        a -= (d[1][1] * j.re - d[0][1] * j.im) / det;
        b -= (-d[1][0] * j.re + d[0][0] * j.im) / det;
    }
    Err(Error::Locus(format!(
        "Newton on (a, b) did not reach {tol:.1e} (residual {residual:.3e})"
    )))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Locates `Γ(ψ, s)` for each `s` of the grid by Newton from `(a, b) = (0, 0)`.
pub fn trace_locus(field: &PhiField, s_grid: &[Vec<f64>], tol: f64) -> Result<LocusReport> {
    trace_locus_with_step(field, s_grid, tol, DEFAULT_JACOBIAN_STEP)
}

pub fn trace_locus_with_step(field: &PhiField, s_grid: &[Vec<f64>], tol: f64, step: f64) -> Result<LocusReport> {
    let n = field.dimension();
    if let Some(bad) = s_grid.iter().find(|s| s.len() != n - 1) {
        return Err(Error::Domain(format!("s = {bad:?} must have {} entries", n - 1)));
    }
    let results: Vec<Result<SingularSample>> = s_grid.par_iter().map(|s| locate(field, s, tol, step)).collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (s, result) in s_grid.iter().zip(results) {
        match result {
            Ok(sample) => samples.push(sample),
            Err(e) => failures.push(LocusFailure {
                s: s.clone(),
                message: e.to_string(),
            }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * s_grid.len() as f64 {
        return Err(Error::Locus(format!(
            "{} of {} directions failed",
            failures.len(),
            s_grid.len()
        )));
    }
    let max_gamma = samples.iter().map(|p| p.z1.norm()).fold(0.0, f64::max);
    let (mut connected, mut max_gap, mut median_gap) = (None, 0.0, 0.0);
    if n == 3 && samples.len() >= 3 {
        let m = samples.len();
        let gaps: Vec<f64> = (0..m)
            .map(|i| {
                let p = &samples[i].point;
                let q = &samples[(i + 1) % m].point;
                p.iter().zip(q).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
            })
            .collect();
        max_gap = gaps.iter().copied().fold(0.0, f64::max);
        median_gap = median(gaps);
        connected = Some(failures.is_empty() && max_gap <= GAP_RATIO * median_gap);
    }
    Ok(LocusReport {
        samples,
        failures,
        max_gamma,
        tol,
        connected,
        max_gap,
        median_gap,
    })
}

/// Smallest `|det Jac_C(R∘Φ)|` at the four `(a, b)` offsets of size `offset`
/// around a located sample.
pub fn separation(field: &PhiField, sample: &SingularSample, offset: f64) -> Result<f64> {
    let (a, b) = (sample.z1.re, sample.z1.im);
    let mut min = f64::INFINITY;
    for (da, db) in [(offset, 0.0), (-offset, 0.0), (0.0, offset), (0.0, -offset)] {
        let j = locus_function(field, a + da, b + db, &sample.s, DEFAULT_JACOBIAN_STEP)?;
        min = min.min(j.norm());
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::{PerturbationSpec, Polynomial};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sphere_param_examples() {
        let z = sphere_param(0.0, 0.0, &[0.6, 0.8]).unwrap();
        assert_eq!(z, vec![c(0.0, 0.0), c(0.6, 0.0), c(0.8, 0.0)]);
        let z = sphere_param(0.6, 0.0, &[1.0, 0.0]).unwrap();
        assert!((z[1] - c(0.8, 0.0)).norm() < 1e-15);
        for (a, b, th) in [(0.3, -0.2, 0.4), (-0.7, 0.1, 2.2), (0.05, 0.6, -1.3)] {
            let z = sphere_param(a, b, &[f64::cos(th), f64::sin(th)]).unwrap();
            assert!(defining_map(&z).iter().all(|v| v.abs() <= 1e-15));
        }
        assert!(matches!(sphere_param(0.8, 0.7, &[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn defining_map_examples() {
        let zero = defining_map(&[c(0.0, 0.0); 3]);
        assert_eq!(zero, vec![-1.0, 0.0, 0.0]);
        let z = [c(0.3, -0.4), c(0.1, 0.2), c(-0.5, 0.7)];
        let expected = [0.09 + 0.16 + 0.01 + 0.04 + 0.25 + 0.49 - 1.0, 0.2, 0.7];
        for (v, e) in defining_map(&z).iter().zip(expected) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn defining_map_jacobian_determinant() {
        let map = |z: &[Complex64]| Ok(defining_map(z));
        let det = complex_jacobian_det(map, &[c(0.0, 0.0), c(0.6, 0.0), c(0.8, 0.0)], 1e-5).unwrap();
        assert!(det.norm() <= 1e-10);
        for n in [2usize, 3, 4] {
            let mut z = vec![c(0.6, 0.0), c(0.8, 0.0)];
            z.resize(n, c(0.0, 0.0));
            let det = complex_jacobian_det(map, &z, 1e-5).unwrap();
            let expected = c(0.6, 0.0) * c(0.0, -0.5).powu(n as u32 - 1);
            assert!((det - expected).norm() <= 1e-8);
            assert!((det.norm() - 0.6 * 0.5f64.powi(n as i32 - 1)).abs() <= 1e-8);
        }
    }

    #[test]
    fn jacobian_step_richardson() {
        let mut spec = PerturbationSpec::conj_z1_squared(3, 0.05);
        spec.components[1] = Polynomial::z1_power(4, 0, 3, c(0.0, 1.0));
        let field = PhiField::with_defaults(spec).unwrap();
        let z = field.forward(&sphere_param(0.3, 0.2, &[0.6, 0.8]).unwrap()).unwrap();
        let d = |h: f64| composite_det(&field, &z, h).unwrap();
        let (d1, d2, d4) = (d(4e-2), d(2e-2), d(1e-2));
        let e1 = (d1 - d2).norm();
        let e2 = (d2 - d4).norm();
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn unperturbed_locus_is_equator() {
        let field = PhiField::with_defaults(PerturbationSpec::zero(3)).unwrap();
        let report = trace_locus(&field, &s_grid(3, 32), 1e-10).unwrap();
        assert!(report.failures.is_empty());
        assert!(report.max_gamma <= 1e-10);
        assert_eq!(report.connected, Some(true));
        let d = locus_derivative(&field, 0.0, 0.0, &[1.0, 0.0], DEFAULT_JACOBIAN_STEP).unwrap();
        let e = base_derivative(3);
        assert!((e[0][0] + 0.25).abs() < 1e-16 && (e[1][1] - 0.25).abs() < 1e-16);
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[i][j] - e[i][j]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn s_grids_are_unit_vectors() {
        for n in 2..=6 {
            for s in s_grid(n, 40) {
                assert_eq!(s.len(), n - 1);
                let r: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((r - 1.0).abs() <= 1e-14);
            }
        }
    }
}
