//! Discrete spectral algebra on the unit circle.
//!
//! Functions on the circle are stored as truncated Fourier series
//! `f(θ) = Σ_{|k|≤N} c_k e^{ikθ}`. Nonlinear operations go through an
//! equispaced grid of `M ≥ 4N+1` nodes and are truncated back to order `N`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the conjugate-symmetry test of real series.
pub const REAL_TOL: f64 = 1e-13;
/// Relative tolerance for vanishing negative modes of holomorphic series.
pub const HOLO_TOL: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Smallest 5-smooth grid size that resolves products of two order-`order` series.
pub fn dealias_size(order: usize) -> usize {
    let mut m = 4 * order + 1;
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Node `m` of the `size`-point equispaced grid on the circle.
pub fn node(m: usize, size: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * m as f64 / size as f64)
}

/// Truncated complex Fourier series on the unit circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    order: usize,
    coeffs: Vec<Complex64>,
}

impl TrigSeries {
    /// Builds a series from the `2N+1` coefficients `c_{-N}, …, c_N`.
    pub fn new(order: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("series order must be at least 1".into()));
        }
        if coeffs.len() != 2 * order + 1 {
            return Err(Error::Domain(format!(
                "order {order} needs {} coefficients, got {}",
                2 * order + 1,
                coeffs.len()
            )));
        }
        Ok(Self { order, coeffs })
    }

    pub fn zeros(order: usize) -> Self {
        assert!(order >= 1, "series order must be at least 1");
        Self {
            order,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * order + 1],
        }
    }

    pub fn constant(order: usize, c: Complex64) -> Self {
        let mut s = Self::zeros(order);
        s.set(0, c);
        s
    }

    /// Single mode `c·e^{ikθ}`.
    pub fn mode(order: usize, k: i64, c: Complex64) -> Self {
        let mut s = Self::zeros(order);
        s.set(k, c);
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn index(&self, k: i64) -> Option<usize> {
        let n = self.order as i64;
        (k.abs() <= n).then(|| (k + n) as usize)
    }

    /// Coefficient `c_k`, zero outside the stored range.
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Sets `c_k`; panics if `|k| > N`.
    pub fn set(&mut self, k: i64, c: Complex64) {
        let i = self.index(k).expect("mode outside series order");
        self.coeffs[i] = c;
    }

    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }

    /// Sum of coefficient moduli; bounds the sup norm from above.
    pub fn wiener_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn is_real(&self) -> bool {
        let scale = self.coeffs.iter().fold(1.0_f64, |acc, c| acc.max(c.norm()));
        let n = self.order as i64;
        (0..=n).all(|k| (self.coeff(-k) - self.coeff(k).conj()).norm() <= REAL_TOL * scale)
    }

    pub fn is_holo(&self) -> bool {
        let bound = HOLO_TOL * self.wiener_norm();
        (1..=self.order as i64).all(|k| self.coeff(-k).norm() <= bound)
    }

    /// Symmetrizes `c_{-k} ← conj(c_k)`; returns the projection and the largest change.
    pub fn project_real(&self) -> (Self, f64) {
        let mut out = self.clone();
        let mut delta = 0.0_f64;
        let n = self.order as i64;
        for k in 0..=n {
            let sym = 0.5 * (self.coeff(k) + self.coeff(-k).conj());
            delta = delta.max((sym - self.coeff(k)).norm());
            out.set(k, sym);
            out.set(-k, sym.conj());
        }
        (out, delta)
    }

    /// Zeros all negative modes; returns the projection and the removed mass.
    pub fn project_holo(&self) -> (Self, f64) {
        let mut out = self.clone();
        let mut removed = 0.0;
        for k in 1..=self.order as i64 {
            removed += self.coeff(-k).norm();
            out.set(-k, Complex64::new(0.0, 0.0));
        }
        (out, removed)
    }

    /// Truncates or zero-pads to a new order.
    pub fn resized(&self, order: usize) -> Self {
        let mut out = Self::zeros(order);
        let n = order.min(self.order) as i64;
        for k in -n..=n {
            out.set(k, self.coeff(k));
        }
        out
    }

    /// Termwise θ-derivative `c_k ↦ i k c_k`.
    pub fn derivative(&self) -> Self {
        let mut out = self.clone();
        let n = self.order as i64;
        for k in -n..=n {
            out.set(k, Complex64::new(0.0, k as f64) * self.coeff(k));
        }
        out
    }

    /// Pointwise complex conjugate: `c_k ↦ conj(c_{-k})`.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        let n = self.order as i64;
        for k in -n..=n {
            out.set(k, self.coeff(-k).conj());
        }
        out
    }

    /// Real part as an exactly real series.
    pub fn re(&self) -> Self {
        self.add(&self.conj()).scale(Complex64::new(0.5, 0.0))
    }

    /// Imaginary part as an exactly real series.
    pub fn im(&self) -> Self {
        self.sub(&self.conj()).scale(Complex64::new(0.0, -0.5))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn zip(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let order = self.order.max(other.order);
        let n = order as i64;
        let coeffs = (-n..=n).map(|k| op(self.coeff(k), other.coeff(k))).collect();
        Self { order, coeffs }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// Max coefficient distance to another series (orders may differ).
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let n = self.order.max(other.order) as i64;
        (-n..=n)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Direct summation at a point of the circle.
    pub fn eval_at_angle(&self, theta: f64) -> Complex64 {
        let n = self.order as i64;
        (-n..=n)
            .map(|k| self.coeff(k) * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    /// Pointwise product through a dealiased grid, truncated to `order`.
    pub fn mul(&self, other: &Self, order: usize) -> Self {
        let m = dealias_size(self.order.max(other.order).max(order));
        let a = grid_transform(self, m).expect("dealias grid");
        let b = grid_transform(other, m).expect("dealias grid");
        let prod = Grid {
            values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        };
        series_transform(&prod, order).expect("dealias grid")
    }
}

/// Grid samples at the equispaced nodes `e^{2πim/M}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub values: Vec<Complex64>,
}

impl Grid {
    pub fn size(&self) -> usize {
        self.values.len()
    }
}

/// Samples a series on `size` equispaced nodes.
pub fn grid_transform(f: &TrigSeries, size: usize) -> Result<Grid> {
    let required = 2 * f.order + 1;
    if size < required {
        return Err(Error::Alias {
            grid: size,
            order: f.order,
            required,
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    let n = f.order as i64;
    for k in -n..=n {
        buf[k.rem_euclid(size as i64) as usize] = f.coeff(k);
    }
    plan(size, true).process(&mut buf);
    Ok(Grid { values: buf })
}

/// Recovers the order-`order` series interpolating grid values.
pub fn series_transform(g: &Grid, order: usize) -> Result<TrigSeries> {
    let size = g.size();
    let required = 2 * order + 1;
    if size < required {
        return Err(Error::Alias {
            grid: size,
            order,
            required,
        });
    }
    let mut buf = g.values.clone();
    plan(size, false).process(&mut buf);
    let scale = 1.0 / size as f64;
    let n = order as i64;
    let coeffs = (-n..=n)
        .map(|k| buf[k.rem_euclid(size as i64) as usize] * scale)
        .collect();
    TrigSeries::new(order, coeffs)
}

fn require_real(f: &TrigSeries, what: &str) -> Result<()> {
    if f.is_real() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} requires a real series")))
    }
}

/// Hilbert transform: `c_k ↦ -i·sgn(k)·c_k`, mean dropped.
pub fn hilbert(f: &TrigSeries) -> Result<TrigSeries> {
    require_real(f, "hilbert transform")?;
    Ok(hilbert_unchecked(f))
}

pub(crate) fn hilbert_unchecked(f: &TrigSeries) -> TrigSeries {
    let mut out = TrigSeries::zeros(f.order);
    let n = f.order as i64;
    let minus_i = Complex64::new(0.0, -1.0);
    for k in 1..=n {
        out.set(k, minus_i * f.coeff(k));
        out.set(-k, -minus_i * f.coeff(-k));
    }
    out
}

/// Analytic completion `f + iH(f)` of a real series.
pub fn plus_extend(f: &TrigSeries) -> Result<DiskFunction> {
    require_real(f, "holomorphic extension")?;
    Ok(plus_extend_unchecked(f))
}

pub(crate) fn plus_extend_unchecked(f: &TrigSeries) -> DiskFunction {
    let mut out = TrigSeries::zeros(f.order);
    out.set(0, f.coeff(0));
    for k in 1..=f.order as i64 {
        out.set(k, 2.0 * f.coeff(k));
    }
    DiskFunction { series: out }
}

/// Boundary values of a function holomorphic on the open disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiskFunction {
    series: TrigSeries,
}

impl DiskFunction {
    pub fn new(series: TrigSeries) -> Result<Self> {
        if series.is_holo() {
            Ok(Self::project(series).0)
        } else {
            Err(Error::Domain("series has non-negligible negative modes".into()))
        }
    }

    /// Projects onto the holomorphic modes; returns the removed mass.
    pub fn project(series: TrigSeries) -> (Self, f64) {
        let (series, removed) = series.project_holo();
        (Self { series }, removed)
    }

    /// `Σ_{k≤N} c_k ξ^k` from nonnegative coefficients `c_0, …, c_N`.
    pub fn from_taylor(order: usize, taylor: &[Complex64]) -> Self {
        let mut series = TrigSeries::zeros(order);
        for (k, c) in taylor.iter().enumerate().take(order + 1) {
            series.set(k as i64, *c);
        }
        Self { series }
    }

    /// The identity function `ξ`.
    pub fn identity(order: usize) -> Self {
        Self::from_taylor(order, &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    pub fn constant(order: usize, c: Complex64) -> Self {
        Self::from_taylor(order, &[c])
    }

    pub fn series(&self) -> &TrigSeries {
        &self.series
    }

    pub fn into_series(self) -> TrigSeries {
        self.series
    }

    pub fn order(&self) -> usize {
        self.series.order
    }

    /// Taylor coefficients `c_0, …, c_N`.
    pub fn taylor(&self) -> &[Complex64] {
        &self.series.coeffs[self.series.order..]
    }

    pub fn at_zero(&self) -> Complex64 {
        self.series.coeff(0)
    }

    pub fn derivative_at_zero(&self) -> Complex64 {
        self.series.coeff(1)
    }

    pub fn evaluate(&self, xi: Complex64) -> Result<Complex64> {
        evaluate(self, xi)
    }

    pub fn resized(&self, order: usize) -> Self {
        Self {
            series: self.series.resized(order),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            series: self.series.add(&other.series),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            series: self.series.sub(&other.series),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            series: self.series.scale(s),
        }
    }

    /// Multiplication by `ξ`, dropping the mode pushed past the order.
    pub fn shift_up(&self) -> Self {
        let n = self.order();
        let mut taylor = vec![Complex64::new(0.0, 0.0)];
        taylor.extend_from_slice(&self.taylor()[..n]);
        Self::from_taylor(n, &taylor)
    }
}

/// Closed-disk evaluation by Horner summation; `|ξ| ≤ 1`.
pub fn evaluate(f: &DiskFunction, xi: Complex64) -> Result<Complex64> {
    if xi.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "|ξ| = {} lies outside the closed disk",
            xi.norm()
        )));
    }
    Ok(f.taylor()
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * xi + c))
}

/// Applies `g` pointwise on a `size`-node grid and truncates to `order`.
///
/// `g` returns `None` where it is undefined.
pub fn pointwise_lift<G>(f: &TrigSeries, g: G, size: usize, order: usize) -> Result<TrigSeries>
where
    G: Fn(Complex64) -> Option<Complex64>,
{
    let required = (4 * order + 1).max(2 * f.order + 1);
    if size < required {
        return Err(Error::Alias {
            grid: size,
            order,
            required,
        });
    }
    let grid = grid_transform(f, size)?;
    let lifted = lift_grid(&grid, g)?;
    series_transform(&lifted, order)
}

pub(crate) fn lift_grid<G>(grid: &Grid, g: G) -> Result<Grid>
where
    G: Fn(Complex64) -> Option<Complex64>,
{
    let values = grid
        .values
        .iter()
        .enumerate()
        .map(|(node, &v)| match g(v) {
            Some(w) if w.re.is_finite() && w.im.is_finite() => Ok(w),
            _ => Err(Error::SingularValue {
                node,
                value: format!("{v}"),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid { values })
}

fn sup_grid_size(order: usize) -> usize {
    4 * order + 1
}

/// Sup of `|f|` over a `4N+1` grid.
pub fn sup_norm(f: &TrigSeries) -> f64 {
    grid_transform(f, sup_grid_size(f.order))
        .expect("sup grid")
        .values
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
}

/// Sup of `|df/dθ|` over a `4N+1` grid.
pub fn c1_seminorm(f: &TrigSeries) -> f64 {
    sup_norm(&f.derivative())
}

/// Winding number of a closed sampled curve around the origin.
///
/// Consecutive phase increments must stay below `π/2`.
pub fn winding_number(values: &[Complex64]) -> Result<i64> {
    let m = values.len();
    if m < 4 {
        return Err(Error::Domain("winding number needs at least 4 samples".into()));
    }
    if let Some(node) = values.iter().position(|v| v.norm() == 0.0 || !v.norm().is_finite()) {
        return Err(Error::Domain(format!("curve passes through 0 at node {node}")));
    }
    let mut total = 0.0;
    for node in 0..m {
        let step = (values[(node + 1) % m] / values[node]).arg();
        if step.abs() >= PI / 2.0 {
            return Err(Error::GridTooCoarse { node, step });
        }
        total += step;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_series(rng: &mut ChaCha8Rng, order: usize) -> TrigSeries {
        let coeffs = (0..2 * order + 1)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        TrigSeries::new(order, coeffs).unwrap()
    }

    fn cos_mode(order: usize, k: i64, a: f64) -> TrigSeries {
        let mut s = TrigSeries::zeros(order);
        s.set(k, c(a / 2.0, 0.0));
        s.set(-k, c(a / 2.0, 0.0));
        s
    }

    fn sin_mode(order: usize, k: i64, a: f64) -> TrigSeries {
        let mut s = TrigSeries::zeros(order);
        s.set(k, c(0.0, -a / 2.0));
        s.set(-k, c(0.0, a / 2.0));
        s
    }

    #[test]
    fn single_mode_grid_values() {
        let f = TrigSeries::mode(1, 1, c(1.0, 0.0));
        let g = grid_transform(&f, 8).unwrap();
        for (m, v) in g.values.iter().enumerate() {
            assert!((v - node(m, 8)).norm() < 1e-15);
        }
        let back = series_transform(&g, 1).unwrap();
        assert!(back.max_coeff_diff(&f) < 1e-15);
    }

    #[test]
    fn constant_grid_values() {
        let f = TrigSeries::constant(3, c(3.0, 0.0));
        let g = grid_transform(&f, 16).unwrap();
        assert!(g.values.iter().all(|v| (v - c(3.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn round_trip_against_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_series(&mut rng, 16);
        let g = grid_transform(&f, 64).unwrap();
        // direct DFT oracle
        for (m, v) in g.values.iter().enumerate() {
            let theta = 2.0 * PI * m as f64 / 64.0;
            assert!((v - f.eval_at_angle(theta)).norm() < 1e-13);
        }
        let back = series_transform(&g, 16).unwrap();
        assert!(back.max_coeff_diff(&f) <= 1e-13);
    }

    #[test]
    fn alias_errors() {
        let f = TrigSeries::zeros(8);
        assert!(matches!(grid_transform(&f, 16), Err(Error::Alias { .. })));
        let g = Grid {
            values: vec![c(0.0, 0.0); 10],
        };
        assert!(matches!(series_transform(&g, 5), Err(Error::Alias { .. })));
        assert!(matches!(pointwise_lift(&f, Some, 32, 8), Err(Error::Alias { .. })));
    }

    #[test]
    fn hilbert_examples() {
        let h = hilbert(&cos_mode(4, 1, 1.0)).unwrap();
        assert!(h.max_coeff_diff(&sin_mode(4, 1, 1.0)) < 1e-15);
        let h = hilbert(&TrigSeries::constant(4, c(5.0, 0.0))).unwrap();
        assert!(h.wiener_norm() == 0.0);
        let h = hilbert(&sin_mode(4, 3, 1.0)).unwrap();
        assert!(h.max_coeff_diff(&cos_mode(4, 3, -1.0)) < 1e-15);
        let bad = TrigSeries::mode(4, 1, c(1.0, 0.0));
        assert!(matches!(hilbert(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn plus_extend_examples() {
        let j = plus_extend(&cos_mode(4, 1, 1.0)).unwrap();
        assert!(j.series().max_coeff_diff(DiskFunction::identity(4).series()) < 1e-15);
        let j = plus_extend(&TrigSeries::constant(4, c(2.5, 0.0))).unwrap();
        assert_eq!(j.at_zero(), c(2.5, 0.0));
        assert!(matches!(
            plus_extend(&TrigSeries::mode(4, 2, c(1.0, 0.0))),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn plus_extend_of_log_matches_schwarz_integral() {
        // σ = 2 + cos θ, u = log σ; J(u)(ξ) = (1/2π)∫ (e^{iθ}+ξ)/(e^{iθ}-ξ) u(θ) dθ
        let order = 48;
        let m = dealias_size(order);
        let sigma = TrigSeries::constant(order, c(2.0, 0.0)).add(&cos_mode(order, 1, 1.0));
        let u = pointwise_lift(&sigma, |v| Some(v.ln()), m, order)
            .unwrap()
            .project_real()
            .0;
        let ju = plus_extend(&u).unwrap();
        let q = 4096;
        let schwarz = |xi: Complex64| -> Complex64 {
            (0..q)
                .map(|j| {
                    let th = 2.0 * PI * j as f64 / q as f64;
                    let e = Complex64::from_polar(1.0, th);
                    (e + xi) / (e - xi) * (2.0 + th.cos()).ln()
                })
                .sum::<Complex64>()
                / q as f64
        };
        // log-mean of σ: (1/2π)∫ log(2+cos θ) = log((2+√3)/2)
        let log_mean = ((2.0 + 3f64.sqrt()) / 2.0).ln();
        assert!((ju.at_zero().re - log_mean).abs() < 1e-13);
        assert!(ju.at_zero().im.abs() < 1e-15);
        for xi in [c(0.3, 0.1), c(-0.5, 0.4), c(0.0, -0.7)] {
            let diff = (ju.evaluate(xi).unwrap() - schwarz(xi)).norm();
            assert!(diff < 1e-12, "ξ={xi}: {diff}");
        }
    }

    #[test]
    fn evaluate_examples() {
        let id = DiskFunction::identity(4);
        assert!((id.evaluate(c(0.5, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let taylor: Vec<_> = (0..9)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = DiskFunction::from_taylor(8, &taylor);
        assert_eq!(f.evaluate(c(0.0, 0.0)).unwrap(), taylor[0]);
        let xi = c(0.3, 0.4);
        // power-sum oracle
        let direct: Complex64 = taylor.iter().enumerate().map(|(k, ck)| ck * xi.powu(k as u32)).sum();
        assert!((f.evaluate(xi).unwrap() - direct).norm() <= 1e-14);
        assert!(matches!(f.evaluate(c(1.1, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn evaluate_matches_grid_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (f, _) = DiskFunction::project(random_series(&mut rng, 12));
        let g = grid_transform(f.series(), 64).unwrap();
        for (m, v) in g.values.iter().enumerate() {
            assert!((f.evaluate(node(m, 64)).unwrap() - v).norm() <= 1e-12);
        }
    }

    #[test]
    fn pointwise_lift_examples() {
        let two = TrigSeries::constant(8, c(2.0, 0.0));
        let l = pointwise_lift(&two, |v| Some(v.ln()), 33, 8).unwrap();
        assert!((l.coeff(0) - c(2f64.ln(), 0.0)).norm() < 1e-15);
        assert!(l.sub(&TrigSeries::constant(8, l.coeff(0))).wiener_norm() < 1e-14);

        // (1 + ½cos θ)² against direct coefficient convolution
        let order = 16;
        let f = TrigSeries::constant(order, c(1.0, 0.0)).add(&cos_mode(order, 1, 0.5));
        let sq = pointwise_lift(&f, |v| Some(v * v), 4 * order + 1, order).unwrap();
        let n = order as i64;
        for k in -n..=n {
            let conv: Complex64 = (-n..=n).map(|j| f.coeff(j) * f.coeff(k - j)).sum();
            assert!((sq.coeff(k) - conv).norm() <= 1e-12);
        }

        // 1 + cos θ vanishes at θ = π, node 17 of the 34-grid
        let z = TrigSeries::constant(8, c(1.0, 0.0)).add(&cos_mode(8, 1, 1.0));
        let err = pointwise_lift(&z, |v| (v.norm() > 1e-12).then(|| v.ln()), 34, 8);
        assert!(matches!(err, Err(Error::SingularValue { .. })));
    }

    #[test]
    fn norm_examples() {
        let three = TrigSeries::constant(4, c(3.0, 0.0));
        assert!((sup_norm(&three) - 3.0).abs() < 1e-15);
        assert_eq!(c1_seminorm(&three), 0.0);
        let cosine = cos_mode(4, 1, 1.0);
        let s = sup_norm(&cosine);
        assert!((1.0 - 1e-12..=1.0 + 1e-15).contains(&s));
        let e = TrigSeries::mode(4, 1, c(2.0, 0.0));
        assert!((sup_norm(&e) - 2.0).abs() < 1e-14);
        assert!((c1_seminorm(&e) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn winding_examples() {
        let m = 64;
        let sq: Vec<_> = (0..m).map(|j| node(j, m).powu(2)).collect();
        assert_eq!(winding_number(&sq).unwrap(), 2);
        let inv: Vec<_> = (0..m).map(|j| node(j, m).inv()).collect();
        assert_eq!(winding_number(&inv).unwrap(), -1);
        let constant = vec![c(2.0, 1.0); m];
        assert_eq!(winding_number(&constant).unwrap(), 0);
        let coarse: Vec<_> = (0..8).map(|j| node(j, 8).powu(3)).collect();
        assert!(matches!(winding_number(&coarse), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_series(&mut rng, 6);
        let (r, _) = f.project_real();
        assert!(r.is_real());
        let (h, removed) = DiskFunction::project(f.clone());
        assert!(removed > 0.0);
        assert!((1..=6).all(|k| h.series().coeff(-k) == c(0.0, 0.0)));
        assert!(f.re().is_real() && f.im().is_real());
        let back = f.re().add(&f.im().scale(c(0.0, 1.0)));
        assert!(back.max_coeff_diff(&f) < 1e-15);
    }
}
