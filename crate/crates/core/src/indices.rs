//! Total and partial indices of `S^n_φ` along attached disks.
//!
//! The real frame `A(ξ)` has columns `∂F/∂θ` and `∂F/∂t_j` along the boundary
//! of `f_t`. The total index is the winding number of
//! `det(A·conj(A)⁻¹) = det A / conj(det A)`. The partial indices `(2, 0, …, 0)`
//! are certified by exhibiting `Θ(ξ) = A(ξ)·diag(1/ξ, I)` as the boundary value
//! of a holomorphic matrix function invertible on the closed disk, so that
//! `A·conj(A)⁻¹ = Θ·diag(ξ², I)·conj(Θ)⁻¹`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::attach::{solve_disk, AttachedDisk, DiskMap, SolveOptions};
use crate::error::{Error, Result};
use crate::foliation::FoliationAtlas;
use crate::fourier::{grid_transform, node, series_transform, winding_number, DiskFunction, Grid, TrigSeries};
use crate::linalg::CMatrix;
use crate::perturbation::PhiField;

pub const DEFAULT_FRAME_NODES: usize = 512;
pub const DEFAULT_T_STEP: f64 = 1e-3;
pub const DEFAULT_DET_THRESHOLD: f64 = 1e-3;
pub const NEG_MODE_TOL: f64 = 1e-6;
const INTERIOR_RADII: [f64; 3] = [0.0, 0.5, 0.9];
const INTERIOR_ANGLES: usize = 64;
const SINGULAR_FLOOR: f64 = 1e-12;

/// Per-node real frame of the totally real boundary bundle along one disk.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFrame {
    pub t: Vec<f64>,
    pub a: Vec<CMatrix>,
    pub tangency_defect: f64,
    pub richardson_defect: f64,
    pub min_singular_value: f64,
}

impl BoundaryFrame {
    /// Wraps synthetic per-node matrices; no tangency information.
    pub fn from_matrices(t: Vec<f64>, a: Vec<CMatrix>) -> Result<Self> {
        let min_singular_value = a.iter().map(|m| m.min_singular_value()).fold(f64::INFINITY, f64::min);
        if !(min_singular_value > SINGULAR_FLOOR) {
            return Err(Error::Frame(format!(
                "frame is singular (σ_min = {min_singular_value:.3e})"
            )));
        }
        Ok(Self {
            t,
            a,
            tangency_defect: 0.0,
            richardson_defect: 0.0,
            min_singular_value,
        })
    }

    pub fn nodes(&self) -> usize {
        self.a.len()
    }

    pub fn dimension(&self) -> usize {
        self.a[0].n
    }

    /// Multiplies column `col` by `ξ` at every node.
    pub fn with_column_times_xi(&self, col: usize) -> Self {
        let m = self.nodes();
        let mut out = self.clone();
        for (k, a) in out.a.iter_mut().enumerate() {
            let xi = node(k, m);
            for row in 0..a.n {
                let v = a.get(row, col);
                a.set(row, col, v * xi);
            }
        }
        out
    }

    /// Right-multiplies the frame by per-node real matrices.
    pub fn reparametrized(&self, g: &[Vec<f64>]) -> Result<Self> {
        let n = self.dimension();
        let a = self
            .a
            .iter()
            .zip(g)
            .map(|(a, gk)| {
                let mut gm = CMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        gm.set(i, j, Complex64::new(gk[i * n + j], 0.0));
                    }
                }
                a.mul(&gm)
            })
            .collect();
        let mut out = Self::from_matrices(self.t.clone(), a)?;
        out.tangency_defect = self.tangency_defect;
        out.richardson_defect = self.richardson_defect;
        Ok(out)
    }
}

fn shifted(t: &[f64], j: usize, h: f64) -> Vec<f64> {
    let mut s = t.to_vec();
    s[j] += h;
    s
}

fn central_difference(field: &PhiField, base: &AttachedDisk, j: usize, h: f64, opts: &SolveOptions) -> Result<DiskMap> {
    let plus = solve_disk(&shifted(&base.t, j, h), field, Some(&base.f), opts)?;
    let minus = solve_disk(&shifted(&base.t, j, -h), field, Some(&base.f), opts)?;
    Ok(plus.f.sub(&minus.f).scale(0.5 / h))
}

/// Builds the frame of a solved disk on `nodes` boundary points.
///
/// Parameter derivatives are central differences with step `h_t` and `h_t/2`,
/// combined by Richardson extrapolation.
pub fn frame_from_disk(
    field: &PhiField,
    disk: &AttachedDisk,
    opts: &SolveOptions,
    h_t: f64,
    nodes: usize,
) -> Result<BoundaryFrame> {
    let n = disk.f.dimension();
    let mut opts = opts.clone();
    opts.t_max = opts.t_max.max(disk.t.iter().map(|x| x * x).sum::<f64>().sqrt() + h_t);
    let mut columns = Vec::with_capacity(n);
    let theta = disk
        .f
        .components()
        .iter()
        .map(|c| DiskFunction::project(c.series().derivative()).0)
        .collect();
    columns.push(DiskMap::new(theta)?);
    let mut richardson_defect = 0.0_f64;
    for j in 0..n - 1 {
        let coarse = central_difference(field, disk, j, h_t, &opts)?;
        let fine = central_difference(field, disk, j, 0.5 * h_t, &opts)?;
        richardson_defect = richardson_defect.max(coarse.sup_distance(&fine, nodes)?);
        columns.push(fine.scale(4.0 / 3.0).sub(&coarse.scale(1.0 / 3.0)));
    }
    let values: Vec<Vec<Vec<Complex64>>> = columns.iter().map(|c| c.boundary(nodes)).collect::<Result<_>>()?;
    let boundary = disk.f.boundary(nodes)?;
    let mut a = Vec::with_capacity(nodes);
    let mut tangency_defect = 0.0_f64;
    for m in 0..nodes {
        let mut mat = CMatrix::zeros(n);
        for (col, v) in values.iter().enumerate() {
            for (row, &x) in v[m].iter().enumerate() {
                mat.set(row, col, x);
            }
            let d = field.defining_differential(&boundary[m], &v[m])?;
            tangency_defect = tangency_defect.max(d.iter().map(|x| x.abs()).fold(0.0, f64::max));
        }
        a.push(mat);
    }
    let min_singular_value = a.iter().map(|m| m.min_singular_value()).fold(f64::INFINITY, f64::min);
    if !(min_singular_value > SINGULAR_FLOOR) {
        return Err(Error::Frame(format!(
            "frame at t = {:?} is singular (σ_min = {min_singular_value:.3e})",
            disk.t
        )));
    }
    Ok(BoundaryFrame {
        t: disk.t.clone(),
        a,
        tangency_defect,
        richardson_defect,
        min_singular_value,
    })
}

/// Frame at `t`, solving the disk from the nearest atlas disk when `t` is not in the atlas.
pub fn boundary_frame(
    field: &PhiField,
    atlas: &FoliationAtlas,
    t: &[f64],
    h_t: f64,
    nodes: usize,
) -> Result<BoundaryFrame> {
    let opts = SolveOptions::new(atlas.order)
        .with_tol(atlas.tol)
        .with_t_max(atlas.t_max);
    let init = atlas.nearest(t).map(|d| &d.f);
    let disk = solve_disk(t, field, init, &opts)?;
    frame_from_disk(field, &disk, &opts, h_t, nodes)
}

/// Winding number of `det A / conj(det A)` around the circle.
pub fn total_index(frame: &BoundaryFrame) -> Result<i64> {
    let values: Vec<Complex64> = frame
        .a
        .iter()
        .map(|a| {
            let d = a.det();
            d / d.conj()
        })
        .collect();
    winding_number(&values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub t: Vec<f64>,
    pub nodes: usize,
    pub total_index: i64,
    pub neg_mode_mass: f64,
    pub min_det_theta: f64,
    pub min_det_boundary: f64,
    pub min_det_interior: f64,
    /// Zeros of `det Θ` in the disk, from the boundary winding of `det Θ`.
    /// `None` when `det Θ` is too small on the circle to be wound around.
    pub zero_count: Option<i64>,
    pub factorization_defect: f64,
    pub tangency_defect: f64,
    pub richardson_defect: f64,
    pub min_singular_value: f64,
    pub threshold: f64,
    pub certified: bool,
}

impl IndexReport {
    pub fn verdict(&self) -> &'static str {
        if self.certified {
            "certified"
        } else {
            "not certified"
        }
    }
}

fn theta_entries(frame: &BoundaryFrame) -> Result<Vec<TrigSeries>> {
    let (m, n) = (frame.nodes(), frame.dimension());
    let order = (m - 1) / 2;
    let mut entries = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let values = (0..m)
                .map(|k| {
                    let v = frame.a[k].get(row, col);
                    if col == 0 {
                        v / node(k, m)
                    } else {
                        v
                    }
                })
                .collect();
            entries.push(series_transform(&Grid { values }, order)?);
        }
    }
    Ok(entries)
}

fn matrix_at(entries: &[DiskFunction], n: usize, xi: Complex64) -> Result<CMatrix> {
    let mut mat = CMatrix::zeros(n);
    for row in 0..n {
        for col in 0..n {
            mat.set(row, col, entries[row * n + col].evaluate(xi)?);
        }
    }
    Ok(mat)
}

/// Certifies the partial indices `(2, 0, …, 0)` through the holomorphic factor `Θ`.
pub fn verify_partial_indices(frame: &BoundaryFrame, threshold: f64) -> Result<IndexReport> {
    let (m, n) = (frame.nodes(), frame.dimension());
    let total = total_index(frame)?;
    let series = theta_entries(frame)?;
    let mut neg_mode_mass = 0.0_f64;
    let mut holo = Vec::with_capacity(series.len());
    for s in series {
        let (f, removed) = DiskFunction::project(s);
        neg_mode_mass = neg_mode_mass.max(removed);
        holo.push(f);
    }

    let grids: Vec<Grid> = holo
        .iter()
        .map(|f| grid_transform(f.series(), m))
        .collect::<Result<_>>()?;
    let mut boundary_dets = Vec::with_capacity(m);
    let mut factorization_defect = 0.0_f64;
    for k in 0..m {
        let xi = node(k, m);
        let mut theta = CMatrix::zeros(n);
        for row in 0..n {
            for col in 0..n {
                theta.set(row, col, grids[row * n + col].values[k]);
            }
        }
        boundary_dets.push(theta.det());
        let a = &frame.a[k];
        let lhs = a.conj().inverse().map(|inv| a.mul(&inv));
        let mut diag = CMatrix::identity(n);
        diag.set(0, 0, xi * xi);
        let rhs = theta.conj().inverse().map(|inv| theta.mul(&diag).mul(&inv));
        factorization_defect = match (lhs, rhs) {
            (Some(l), Some(r)) => factorization_defect.max(l.max_abs_diff(&r)),
            _ => f64::INFINITY,
        };
    }
    let min_det_boundary = boundary_dets.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min);
    let mut min_det_interior = f64::INFINITY;
    for r in INTERIOR_RADII {
        let angles = if r == 0.0 { 1 } else { INTERIOR_ANGLES };
        for j in 0..angles {
            let xi = Complex64::from_polar(r, 2.0 * PI * j as f64 / angles as f64);
            min_det_interior = min_det_interior.min(matrix_at(&holo, n, xi)?.det().norm());
        }
    }
    let zero_count = if min_det_boundary > SINGULAR_FLOOR {
        winding_number(&boundary_dets).ok()
    } else {
        None
    };
    let min_det_theta = min_det_boundary.min(min_det_interior);
    let certified = neg_mode_mass <= NEG_MODE_TOL && min_det_theta >= threshold && total == 2 && zero_count == Some(0);
    Ok(IndexReport {
        t: frame.t.clone(),
        nodes: m,
        total_index: total,
        neg_mode_mass,
        min_det_theta,
        min_det_boundary,
        min_det_interior,
        zero_count,
        factorization_defect,
        tangency_defect: frame.tangency_defect,
        richardson_defect: frame.richardson_defect,
        min_singular_value: frame.min_singular_value,
        threshold,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::PerturbationSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unperturbed_frame(t: &[f64], nodes: usize) -> BoundaryFrame {
        let field = PhiField::with_defaults(PerturbationSpec::zero(t.len() + 1)).unwrap();
        let opts = SolveOptions::new(16);
        let disk = solve_disk(t, &field, None, &opts).unwrap();
        frame_from_disk(&field, &disk, &opts, DEFAULT_T_STEP, nodes).unwrap()
    }

    #[test]
    fn unperturbed_frame_matches_closed_form() {
        let t = [0.3, 0.2];
        let frame = unperturbed_frame(&t, 64);
        let rho = (1.0f64 - 0.13).sqrt();
        for (k, a) in frame.a.iter().enumerate() {
            let xi = node(k, 64);
            assert!((a.get(0, 0) - c(0.0, rho) * xi).norm() <= 1e-12);
            for (j, &tj) in t.iter().enumerate() {
                assert!((a.get(0, j + 1) + xi * (tj / rho)).norm() <= 1e-9);
                for row in 1..3 {
                    let e = if row == j + 1 { 1.0 } else { 0.0 };
                    assert!((a.get(row, j + 1) - c(e, 0.0)).norm() <= 1e-9);
                }
            }
        }
        assert!(frame.tangency_defect <= 1e-8);
    }

    #[test]
    fn unperturbed_indices_are_certified() {
        let t = [0.3, 0.2];
        let frame = unperturbed_frame(&t, 128);
        assert_eq!(total_index(&frame).unwrap(), 2);
        let report = verify_partial_indices(&frame, DEFAULT_DET_THRESHOLD).unwrap();
        assert!(report.certified);
        assert!(report.neg_mode_mass <= 1e-12);
        let expected = (1.0f64 - 0.13).sqrt();
        assert!((report.min_det_theta - expected).abs() <= 1e-8);
        assert_eq!(report.zero_count, Some(0));
        assert!(report.factorization_defect <= 1e-8);
    }

    #[test]
    fn extra_xi_factor_raises_the_index() {
        let frame = unperturbed_frame(&[0.3, 0.2], 128).with_column_times_xi(1);
        assert_eq!(total_index(&frame).unwrap(), 4);
        let report = verify_partial_indices(&frame, DEFAULT_DET_THRESHOLD).unwrap();
        assert!(!report.certified);
        assert_eq!(report.zero_count, Some(1));
    }

    #[test]
    fn constant_determinant_has_index_zero() {
        let a = vec![CMatrix::identity(2); 32];
        let frame = BoundaryFrame::from_matrices(vec![0.0], a).unwrap();
        assert_eq!(total_index(&frame).unwrap(), 0);
        assert!(!verify_partial_indices(&frame, DEFAULT_DET_THRESHOLD).unwrap().certified);
    }

    #[test]
    fn singular_frame_is_rejected() {
        let a = vec![CMatrix::zeros(2); 32];
        assert!(matches!(
            BoundaryFrame::from_matrices(vec![0.0], a),
            Err(Error::Frame(_))
        ));
    }

    #[test]
    fn coarse_grid_is_reported() {
        let mut a = Vec::new();
        for k in 0..8 {
            let mut m = CMatrix::identity(2);
            m.set(0, 0, node(k, 8).powu(2));
            a.push(m);
        }
        let frame = BoundaryFrame::from_matrices(vec![0.0], a).unwrap();
        assert!(matches!(total_index(&frame), Err(Error::GridTooCoarse { .. })));
    }
}
