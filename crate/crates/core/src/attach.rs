//! Analytic disks attached to the perturbed sphere `S^n_φ`.
//!
//! A disk `f = (f₁, …, f_n)` is attached when `f − φ(f)` maps the circle into
//! `S^n`. Writing `v_j = Im φ_j(f)`, the components `j ≥ 2` are fixed by their
//! imaginary parts, `f_j = t_j + i·J(v_j)`, and `f₁` solves the scalar problem
//! `|f₁ − φ₁(f)| = sqrt(1 − Σ)` with `Σ = Σ_j (t_j − H(v_j) − Re φ_j(f))²`.
//! The fixed point of this map is found by damped Picard iteration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{
    dealias_size, grid_transform, hilbert_unchecked, node, plus_extend_unchecked, series_transform, DiskFunction, Grid,
    TrigSeries,
};
use crate::linalg::solve_real;
use crate::perturbation::PhiField;
use crate::rh::{solve_rh, RhProblem};

pub const DEFAULT_T_MAX: f64 = 0.95;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
const STALL_WINDOW: usize = 5;
const STALL_FACTOR: f64 = 0.9;
const MIN_DAMPING: f64 = 1.0 / 64.0;
const NEWTON_STEP: f64 = 1e-7;
const RH_MAX_ITER: usize = 200;
const RH_TOL_FLOOR: f64 = 1e-14;
const T_MAX_SLACK: f64 = 1e-12;

/// `n` disk functions sharing one truncation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskMap {
    components: Vec<DiskFunction>,
}

impl DiskMap {
    pub fn new(components: Vec<DiskFunction>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Domain("disk map needs at least one component".into()));
        };
        let order = first.order();
        if components.iter().any(|c| c.order() != order) {
            return Err(Error::Domain("disk components must share one order".into()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[DiskFunction] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &DiskFunction {
        &self.components[j]
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn evaluate(&self, xi: Complex64) -> Result<Vec<Complex64>> {
        self.components.iter().map(|c| c.evaluate(xi)).collect()
    }

    /// Boundary values on `size` equispaced nodes, indexed `[node][component]`.
    pub fn boundary(&self, size: usize) -> Result<Vec<Vec<Complex64>>> {
        let grids = self
            .components
            .iter()
            .map(|c| grid_transform(c.series(), size))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..size).map(|m| grids.iter().map(|g| g.values[m]).collect()).collect())
    }

    pub fn resized(&self, order: usize) -> Self {
        Self {
            components: self.components.iter().map(|c| c.resized(order)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| c.scale(Complex64::new(s, 0.0)))
                .collect(),
        }
    }

    /// Sum of all coefficient moduli.
    pub fn wiener_norm(&self) -> f64 {
        self.components.iter().map(|c| c.series().wiener_norm()).sum()
    }

    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.series().max_coeff_diff(b.series()))
            .fold(0.0, f64::max)
    }

    /// Sup over `size` boundary nodes of the componentwise distance to `other`.
    pub fn sup_distance(&self, other: &Self, size: usize) -> Result<f64> {
        let a = self.boundary(size)?;
        let b = other.boundary(size)?;
        Ok(a.iter()
            .zip(&b)
            .flat_map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max))
    }

    fn to_real_vec(&self) -> Vec<f64> {
        self.components
            .iter()
            .flat_map(|c| c.taylor().iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect()
    }

    fn from_real_vec(n: usize, order: usize, x: &[f64]) -> Self {
        let per = 2 * (order + 1);
        let components = (0..n)
            .map(|j| {
                let taylor: Vec<Complex64> = x[j * per..(j + 1) * per]
                    .chunks(2)
                    .map(|p| Complex64::new(p[0], p[1]))
                    .collect();
                DiskFunction::from_taylor(order, &taylor)
            })
            .collect();
        Self { components }
    }
}

/// The unperturbed disk `g_t(ξ) = (sqrt(1 − ‖t‖²)·ξ, t)`.
pub fn g_t(t: &[f64], order: usize) -> Result<DiskMap> {
    let r2: f64 = t.iter().map(|x| x * x).sum();
    if r2 >= 1.0 {
        return Err(Error::NearPole(format!("‖t‖² = {r2} is not below 1")));
    }
    let mut components = vec![DiskFunction::identity(order).scale(Complex64::new((1.0 - r2).sqrt(), 0.0))];
    components.extend(t.iter().map(|&x| DiskFunction::constant(order, Complex64::new(x, 0.0))));
    DiskMap::new(components)
}

/// Solver settings for [`solve_disk`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub order: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub t_max: f64,
}

impl SolveOptions {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            t_max: DEFAULT_T_MAX,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }
}

/// A normalized disk attached to `S^n_φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttachedDisk {
    pub t: Vec<f64>,
    pub f: DiskMap,
    pub sphere_residual: f64,
    pub imag_residual: f64,
    pub update_norm: f64,
    pub iterations: usize,
    pub newton_steps: usize,
}

impl AttachedDisk {
    /// `(|f₁(0)|, Re f₁'(0), |Im f₁'(0)|)`.
    pub fn normalization(&self) -> (f64, f64, f64) {
        let f1 = self.f.component(0);
        let d = f1.derivative_at_zero();
        (f1.at_zero().norm(), d.re, d.im.abs())
    }
}

/// `φ(f)` sampled on the dealiased grid for the order of `f`.
struct Composite {
    grids: Vec<Grid>,
    series: Vec<TrigSeries>,
}

fn compose(field: &PhiField, f: &DiskMap) -> Result<Composite> {
    let n = f.dimension();
    if n != field.dimension() {
        return Err(Error::Domain(format!(
            "disk has {n} components, perturbation acts on C^{}",
            field.dimension()
        )));
    }
    let size = dealias_size(f.order());
    let boundary = f.boundary(size)?;
    let mut values = vec![Vec::with_capacity(size); n];
    for z in &boundary {
        let phi = field.phi_eval(z)?;
        for (j, p) in phi.into_iter().enumerate() {
            values[j].push(p);
        }
    }
    let grids: Vec<Grid> = values.into_iter().map(|values| Grid { values }).collect();
    let series = grids
        .iter()
        .map(|g| series_transform(g, f.order()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Composite { grids, series })
}

fn check_t(field: &PhiField, t: &[f64]) -> Result<()> {
    if t.len() + 1 != field.dimension() {
        return Err(Error::Domain(format!(
            "t has {} entries, expected {}",
            t.len(),
            field.dimension() - 1
        )));
    }
    Ok(())
}

/// Grid values of `Σ` on the dealiased grid.
fn sigma_grid(t: &[f64], c: &Composite) -> Result<Vec<f64>> {
    let size = c.grids[0].size();
    let mut sigma = vec![0.0; size];
    for (j, &tj) in t.iter().enumerate() {
        let v = c.series[j + 1].im();
        let h = grid_transform(&hilbert_unchecked(&v), size)?;
        for ((s, hv), phi) in sigma.iter_mut().zip(&h.values).zip(&c.grids[j + 1].values) {
            let d = tj - hv.re - phi.re;
            *s += d * d;
        }
    }
    Ok(sigma)
}

/// `Σ(t, φ, f) = Σ_{j≥2} (t_j − H(Im φ_j(f)) − Re φ_j(f))²` as a real series.
pub fn sigma_term(t: &[f64], field: &PhiField, f: &DiskMap) -> Result<TrigSeries> {
    check_t(field, t)?;
    let c = compose(field, f)?;
    let values = sigma_grid(t, &c)?.into_iter().map(|s| Complex64::new(s, 0.0)).collect();
    Ok(series_transform(&Grid { values }, f.order())?.project_real().0)
}

fn p_map_from(t: &[f64], c: &Composite, order: usize) -> Result<RhProblem> {
    let sigma = sigma_grid(t, c)?;
    if let Some(m) = sigma.iter().position(|&s| !(s < 1.0)) {
        return Err(Error::NearPole(format!("Σ = {:.6} ≥ 1 at grid node {m}", sigma[m])));
    }
    let values = sigma.iter().map(|s| Complex64::new((1.0 - s).sqrt(), 0.0)).collect();
    let sigma = series_transform(&Grid { values }, order)?.project_real().0;
    RhProblem::new(c.series[0].clone(), sigma)
}

/// Scalar boundary data `(γ, σ) = (φ₁(f), sqrt(1 − Σ))`.
pub fn p_map(t: &[f64], field: &PhiField, f: &DiskMap) -> Result<RhProblem> {
    check_t(field, t)?;
    let c = compose(field, f)?;
    p_map_from(t, &c, f.order())
}

fn rh_tol(tol: f64) -> f64 {
    (0.1 * tol).max(RH_TOL_FLOOR)
}

/// The image `(E∘P(t, φ, f), t + i·J(Im φ(f)))` of one Picard step.
fn update(t: &[f64], field: &PhiField, f: &DiskMap, tol: f64) -> Result<DiskMap> {
    let c = compose(field, f)?;
    let problem = p_map_from(t, &c, f.order())?;
    let f1 = solve_rh(&problem, rh_tol(tol), RH_MAX_ITER)?.f;
    let mut components = vec![f1];
    for (j, &tj) in t.iter().enumerate() {
        let v = c.series[j + 1].im();
        let jv = plus_extend_unchecked(&v).scale(Complex64::new(0.0, 1.0));
        components.push(jv.add(&DiskFunction::constant(f.order(), Complex64::new(tj, 0.0))));
    }
    DiskMap::new(components)
}

/// `R(t, φ, f) = f − (E∘P(t, φ, f), t + i·J(Im φ(f)))`.
pub fn r_residual(t: &[f64], field: &PhiField, f: &DiskMap, tol: f64) -> Result<DiskMap> {
    check_t(field, t)?;
    Ok(f.sub(&update(t, field, f, tol)?))
}

/// Pointwise attachment defects `(sphere, imag)` of `f` on `nodes` boundary points.
///
/// Each node is evaluated by direct Taylor summation and `φ` by its own inversion.
pub fn verify_attachment(field: &PhiField, f: &DiskMap, nodes: usize) -> Result<(f64, f64)> {
    let (mut sphere, mut imag) = (0.0_f64, 0.0_f64);
    for m in 0..nodes {
        let z = f.evaluate(node(m, nodes))?;
        let phi = field.phi_eval(&z)?;
        let w: Vec<Complex64> = z.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let s = w[0].norm_sqr() + w[1..].iter().map(|c| c.re * c.re).sum::<f64>() - 1.0;
        sphere = sphere.max(s.abs());
        for c in &w[1..] {
            imag = imag.max(c.im.abs());
        }
    }
    Ok((sphere, imag))
}

fn residuals_on_grid(field: &PhiField, f: &DiskMap) -> Result<(f64, f64)> {
    let size = 4 * f.order() + 1;
    let (mut sphere, mut imag) = (0.0_f64, 0.0_f64);
    for z in f.boundary(size)? {
        let phi = field.phi_eval(&z)?;
        let w: Vec<Complex64> = z.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let s = w[0].norm_sqr() + w[1..].iter().map(|c| c.re * c.re).sum::<f64>() - 1.0;
        sphere = sphere.max(s.abs());
        for c in &w[1..] {
            imag = imag.max(c.im.abs());
        }
    }
    Ok((sphere, imag))
}

fn newton_step(t: &[f64], field: &PhiField, f: &DiskMap, r: &DiskMap, tol: f64) -> Result<DiskMap> {
    let (n, order) = (f.dimension(), f.order());
    let x = f.to_real_vec();
    let r0 = r.to_real_vec();
    let dim = x.len();
    let mut jac = vec![0.0; dim * dim];
    for col in 0..dim {
        let h = NEWTON_STEP * (1.0 + x[col].abs());
        let mut xp = x.clone();
        xp[col] += h;
        let fp = DiskMap::from_real_vec(n, order, &xp);
        let rp = r_residual(t, field, &fp, tol)?.to_real_vec();
        for row in 0..dim {
            jac[row * dim + col] = (rp[row] - r0[row]) / h;
        }
    }
    let rhs: Vec<f64> = r0.iter().map(|v| -v).collect();
    let dx = solve_real(&jac, &rhs)?;
    let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
    Ok(DiskMap::from_real_vec(n, order, &xn))
}

/// Solves `R(t, φ, f) = 0` starting from `init` (default `g_t`).
pub fn solve_disk(t: &[f64], field: &PhiField, init: Option<&DiskMap>, opts: &SolveOptions) -> Result<AttachedDisk> {
    check_t(field, t)?;
    let norm_t = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_t > opts.t_max + T_MAX_SLACK {
        return Err(Error::NearPole(format!(
            "‖t‖ = {norm_t:.6} exceeds t_max = {}",
            opts.t_max
        )));
    }
    let mut f = match init {
        Some(f0) => {
            if f0.dimension() != field.dimension() {
                return Err(Error::Domain("initial disk has the wrong dimension".into()));
            }
            f0.resized(opts.order)
        }
        None => g_t(t, opts.order)?,
    };
    let mut r = r_residual(t, field, &f, opts.tol)?;
    let mut r_norm = r.wiener_norm();
    let mut history = vec![r_norm];
    let mut newton = false;
    let mut newton_steps = 0;
    for iteration in 0..=opts.max_iter {
        if r_norm <= opts.tol {
            let (sphere, imag) = residuals_on_grid(field, &f)?;
            if sphere <= opts.tol && imag <= opts.tol {
                return Ok(AttachedDisk {
                    t: t.to_vec(),
                    f,
                    sphere_residual: sphere,
                    imag_residual: imag,
                    update_norm: r_norm,
                    iterations: iteration,
                    newton_steps,
                });
            }
        }
        if iteration == opts.max_iter {
            break;
        }
        let k = history.len();
        if !newton && k > STALL_WINDOW && history[k - 1] > STALL_FACTOR * history[k - 1 - STALL_WINDOW] {
            newton = true;
        }
        if newton {
            newton_steps += 1;
            f = newton_step(t, field, &f, &r, opts.tol)?;
            r = r_residual(t, field, &f, opts.tol)?;
            r_norm = r.wiener_norm();
        } else {
            let mut damping = 1.0;
            loop {
                let trial = f.sub(&r.scale(damping));
                let attempt = r_residual(t, field, &trial, opts.tol);
                let accept = match &attempt {
                    Ok(rt) => rt.wiener_norm() <= r_norm || damping <= MIN_DAMPING,
                    Err(_) => damping <= MIN_DAMPING,
                };
                if accept {
                    r = attempt?;
                    r_norm = r.wiener_norm();
                    f = trial;
                    break;
                }
                damping *= 0.5;
            }
        }
        history.push(r_norm);
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        last_residual: r_norm,
        history,
    })
}
