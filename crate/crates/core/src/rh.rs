//! Scalar nonlinear Riemann–Hilbert problem `|f − γ| = σ` on the circle.
//!
//! The solution is written as `f = ξ·e^{J(log σ)}·e^{−J(log|ξ−η|)}` where the
//! auxiliary boundary function `η` solves `Q(η) = γ·e^{−J(log σ)}` with
//! `Q(η) = η·e^{−J(log|ξ−η|)}`. Since `Q(0) = 0` and `Q'(0) = id`, the
//! equation is solved by the Picard step `η ← η − (Q(η) − γ̃)`, backed by a
//! finite-difference Newton iteration when the Picard loop stalls.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{
    dealias_size, grid_transform, node, plus_extend_unchecked, series_transform, winding_number, DiskFunction, Grid,
    TrigSeries,
};
use crate::linalg::solve_real;

const STALL_WINDOW: usize = 5;
const STALL_FACTOR: f64 = 0.9;
const NEWTON_STEP: f64 = 1e-7;

/// Boundary data `(γ, σ)` of a scalar problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhProblem {
    pub gamma: TrigSeries,
    pub sigma: TrigSeries,
}

impl RhProblem {
    /// Validates that `σ` is real and strictly positive on the dealiased grid.
    pub fn new(gamma: TrigSeries, sigma: TrigSeries) -> Result<Self> {
        if !sigma.is_real() {
            return Err(Error::Domain("σ must be a real series".into()));
        }
        let order = gamma.order().max(sigma.order());
        let grid = grid_transform(&sigma, dealias_size(order))?;
        let min = grid.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::Domain(format!("σ must be positive (min {min:.3e})")));
        }
        Ok(Self {
            gamma: gamma.resized(order),
            sigma: sigma.resized(order).project_real().0,
        })
    }

    pub fn order(&self) -> usize {
        self.gamma.order()
    }
}

/// Solution `f = E(γ, σ)` together with the auxiliary `η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhSolution {
    pub f: DiskFunction,
    pub eta: TrigSeries,
    pub iterations: usize,
    pub newton_steps: usize,
    pub residual: f64,
}

impl RhSolution {
    /// Winding number of `f − γ` around 0 along the circle.
    pub fn winding(&self, gamma: &TrigSeries, nodes: usize) -> Result<i64> {
        let f = grid_transform(self.f.series(), nodes)?;
        let g = grid_transform(&gamma.resized(self.f.order()), nodes)?;
        let diff: Vec<_> = f.values.iter().zip(&g.values).map(|(a, b)| a - b).collect();
        winding_number(&diff)
    }
}

/// Pointwise residual `max | |f − γ| − σ |` on a `4N+1` grid.
pub fn rh_residual(f: &DiskFunction, p: &RhProblem) -> f64 {
    let order = p.order().max(f.order());
    let m = 4 * order + 1;
    let fg = grid_transform(f.series(), m).expect("check grid");
    let gg = grid_transform(&p.gamma, m).expect("check grid");
    let sg = grid_transform(&p.sigma, m).expect("check grid");
    (0..m)
        .map(|i| ((fg.values[i] - gg.values[i]).norm() - sg.values[i].re).abs())
        .fold(0.0, f64::max)
}

fn map_grid(g: &Grid, f: impl Fn(Complex64) -> Complex64) -> Grid {
    Grid {
        values: g.values.iter().map(|&v| f(v)).collect(),
    }
}

fn mul_grid(a: &Grid, b: &Grid) -> Grid {
    Grid {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
    }
}

/// Grid values of `J(log|ξ − η|)` at the `size` nodes.
fn log_modulus_extension(eta: &Grid, order: usize) -> Result<Grid> {
    let size = eta.size();
    let mut sup = 0.0_f64;
    let logs = eta
        .values
        .iter()
        .enumerate()
        .map(|(m, e)| {
            sup = sup.max(e.norm());
            let d = (node(m, size) - e).norm();
            Complex64::new(d.ln(), 0.0)
        })
        .collect();
    if sup >= 1.0 {
        return Err(Error::Domain(format!("‖η‖∞ = {sup:.4} must stay below 1")));
    }
    let l = series_transform(&Grid { values: logs }, order)?.project_real().0;
    grid_transform(plus_extend_unchecked(&l).series(), size)
}

/// `Q(η) = η·e^{−J(log|ξ−η|)}`.
pub fn q_map(eta: &TrigSeries) -> Result<TrigSeries> {
    let order = eta.order();
    let m = dealias_size(order);
    let eg = grid_transform(eta, m)?;
    let jl = log_modulus_extension(&eg, order)?;
    let q = mul_grid(&eg, &map_grid(&jl, |v| (-v).exp()));
    series_transform(&q, order)
}

/// `γ·e^{−J(log σ)}`, the right-hand side of the reduced problem with `σ = 1`.
pub fn reduced_gamma(p: &RhProblem) -> Result<TrigSeries> {
    let ctx = Context::new(p)?;
    Ok(ctx.target)
}

struct Context {
    order: usize,
    size: usize,
    jlog_sigma: Grid,
    target: TrigSeries,
}

impl Context {
    fn new(p: &RhProblem) -> Result<Self> {
        let order = p.order();
        let size = dealias_size(order);
        let sg = grid_transform(&p.sigma, size)?;
        let logs = map_grid(&sg, |v| Complex64::new(v.re.ln(), 0.0));
        let ls = series_transform(&logs, order)?.project_real().0;
        let jlog_sigma = grid_transform(plus_extend_unchecked(&ls).series(), size)?;
        let gg = grid_transform(&p.gamma, size)?;
        let target = series_transform(&mul_grid(&gg, &map_grid(&jlog_sigma, |v| (-v).exp())), order)?;
        Ok(Self {
            order,
            size,
            jlog_sigma,
            target,
        })
    }

    /// Returns `Q(η) − γ̃` and the disk built from `η`.
    fn step(&self, eta: &TrigSeries) -> Result<(TrigSeries, DiskFunction)> {
        let eg = grid_transform(eta, self.size)?;
        let jl = log_modulus_extension(&eg, self.order)?;
        let q = series_transform(&mul_grid(&eg, &map_grid(&jl, |v| (-v).exp())), self.order)?;
        let h = Grid {
            values: self
                .jlog_sigma
                .values
                .iter()
                .zip(&jl.values)
                .map(|(a, b)| (a - b).exp())
                .collect(),
        };
        let (h, _) = DiskFunction::project(series_transform(&h, self.order)?);
        Ok((q.sub(&self.target), h.shift_up()))
    }
}

fn to_real_vec(s: &TrigSeries) -> Vec<f64> {
    s.coeffs().iter().flat_map(|c| [c.re, c.im]).collect()
}

fn from_real_vec(order: usize, v: &[f64]) -> TrigSeries {
    let coeffs = v.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
    TrigSeries::new(order, coeffs).expect("coefficient vector length")
}

fn newton_step(ctx: &Context, eta: &TrigSeries, defect: &TrigSeries) -> Result<TrigSeries> {
    let x = to_real_vec(eta);
    let f0 = to_real_vec(defect);
    let dim = x.len();
    let mut jac = vec![0.0; dim * dim];
    for col in 0..dim {
        let mut xp = x.clone();
        let h = NEWTON_STEP * (1.0 + x[col].abs());
        xp[col] += h;
        let (dp, _) = ctx.step(&from_real_vec(ctx.order, &xp))?;
        for (row, v) in to_real_vec(&dp).iter().enumerate() {
            jac[row * dim + col] = (v - f0[row]) / h;
        }
    }
    let rhs: Vec<f64> = f0.iter().map(|v| -v).collect();
    let dx = solve_real(&jac, &rhs)?;
    let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
    Ok(from_real_vec(ctx.order, &xn))
}

/// Solves `|f − γ| = σ` with `f(0) = 0`, `f'(0) > 0` to a pointwise residual `tol`.
pub fn solve_rh(p: &RhProblem, tol: f64, max_iter: usize) -> Result<RhSolution> {
    let ctx = Context::new(p)?;
    let mut eta = ctx.target.clone();
    let mut history = Vec::new();
    let mut newton = false;
    let mut newton_steps = 0;
    for iteration in 0..=max_iter {
        let (defect, f) = ctx.step(&eta)?;
        let residual = rh_residual(&f, p);
        history.push(residual);
        if residual <= tol {
            return Ok(RhSolution {
                f,
                eta,
                iterations: iteration,
                newton_steps,
                residual,
            });
        }
        if iteration == max_iter {
            break;
        }
        let k = history.len();
        if !newton && k > STALL_WINDOW && history[k - 1] > STALL_FACTOR * history[k - 1 - STALL_WINDOW] {
            newton = true;
        }
        eta = if newton {
            newton_steps += 1;
            newton_step(&ctx, &eta, &defect)?
        } else {
            eta.sub(&defect)
        };
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last_residual: *history.last().unwrap_or(&f64::INFINITY),
        history,
    })
}
