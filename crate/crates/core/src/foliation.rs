//! Continuation of attached disks over the parameter ball and the geometry
//! of the resulting family: disjointness, boundary membership and the graph
//! representation `y' = H(z₁, x')`.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attach::{g_t, solve_disk, AttachedDisk, DiskMap, SolveOptions};
use crate::error::{Error, Result};
use crate::locus::LocusReport;
use crate::perturbation::PhiField;

pub const DIRECTION_SEED: u64 = 0xd15c;
const GRAPH_QUANTUM: f64 = 1e-9;
const DIAMETER_SAMPLES: usize = 64;
const DUPLICATE_TOL: f64 = 1e-12;

/// Order in which grid points are visited during continuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuation {
    /// Shell by shell; each disk starts from the nearest disk of an inner shell.
    /// Disks of one shell are solved concurrently.
    Shells,
    /// One disk at a time in reverse grid order within each shell; each disk
    /// starts from the nearest disk solved so far.
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationOptions {
    pub t_max: f64,
    pub h: f64,
    pub solve: SolveOptions,
    pub continuation: Continuation,
}

impl FoliationOptions {
    pub fn new(order: usize, t_max: f64, h: f64, tol: f64) -> Self {
        Self {
            t_max,
            h,
            solve: SolveOptions::new(order).with_tol(tol).with_t_max(t_max),
            continuation: Continuation::Shells,
        }
    }

    pub fn with_continuation(mut self, continuation: Continuation) -> Self {
        self.continuation = continuation;
        self
    }
}

/// One grid point of the atlas with its disk or its failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasNode {
    pub t: Vec<f64>,
    pub shell: usize,
    /// Index of the node whose disk seeded this solve; `None` for a cold start.
    pub parent: Option<usize>,
    pub disk: Option<AttachedDisk>,
    pub failure: Option<String>,
    pub diameter: Option<f64>,
    pub distance_to_locus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationAtlas {
    pub dimension: usize,
    pub order: usize,
    pub t_max: f64,
    pub h: f64,
    pub tol: f64,
    pub continuation: Continuation,
    pub nodes: Vec<AtlasNode>,
}

impl FoliationAtlas {
    pub fn disks(&self) -> impl Iterator<Item = &AttachedDisk> {
        self.nodes.iter().filter_map(|n| n.disk.as_ref())
    }

    pub fn failures(&self) -> impl Iterator<Item = &AtlasNode> {
        self.nodes.iter().filter(|n| n.disk.is_none())
    }

    pub fn solved_count(&self) -> usize {
        self.disks().count()
    }

    /// The solved disk whose parameter is closest to `t`.
    pub fn nearest(&self, t: &[f64]) -> Option<&AttachedDisk> {
        self.disks().min_by(|a, b| dist(&a.t, t).total_cmp(&dist(&b.t, t)))
    }

    pub fn max_residual(&self) -> f64 {
        self.disks()
            .map(|d| d.sphere_residual.max(d.imag_residual))
            .fold(0.0, f64::max)
    }

    /// Records for each disk the distance from its boundary to the traced locus.
    pub fn annotate_locus(&mut self, locus: &LocusReport) -> Result<()> {
        if locus.samples.is_empty() {
            return Ok(());
        }
        for node in &mut self.nodes {
            if let Some(disk) = &node.disk {
                let boundary = disk.f.boundary(boundary_samples(&disk.f))?;
                let d = boundary
                    .iter()
                    .flat_map(|z| locus.samples.iter().map(move |s| point_dist(z, &s.point)))
                    .fold(f64::INFINITY, f64::min);
                node.distance_to_locus = Some(d);
            }
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn point_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
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
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / r).collect()
                })
                .collect()
        }
    }
}

/// Quasi-uniform grid of the ball `‖t‖ ≤ t_max` in `R^{n−1}` as `(t, shell)` pairs.
///
/// Shell `k` has radius `k·h`; its point count grows like the shell's area.
pub fn ball_grid(n: usize, t_max: f64, h: f64) -> Result<Vec<(Vec<f64>, usize)>> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension {n} must be at least 2")));
    }
    if !(0.0..1.0).contains(&t_max) || !(h > 0.0) {
        return Err(Error::Domain(format!(
            "need 0 ≤ t_max < 1 and h > 0 (t_max {t_max}, h {h})"
        )));
    }
    let dim = n - 1;
    let shells = (t_max / h + 1e-9).floor() as usize;
    let mut out = vec![(vec![0.0; dim], 0)];
    for k in 1..=shells {
        let r = k as f64 * h;
        let count = match dim {
            1 => 2,
            2 => ((2.0 * PI * k as f64).round() as usize).max(3),
            3 => ((4.0 * PI * (k * k) as f64).round() as usize).max(4),
            _ => (2 * dim * k.pow(dim as u32 - 1)).min(4096),
        };
        for s in unit_directions(dim, count, DIRECTION_SEED + k as u64) {
            out.push((s.into_iter().map(|x| r * x).collect(), k));
        }
    }
    Ok(out)
}

/// Whether the point set is connected when points within `radius` are joined.
pub fn grid_is_connected(points: &[Vec<f64>], radius: f64) -> bool {
    if points.is_empty() {
        return true;
    }
    let mut seen = vec![false; points.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..points.len() {
            if !seen[j] && dist(&points[i], &points[j]) <= radius {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Boundary sampling fine enough to resolve the order of `f`.
fn boundary_samples(f: &DiskMap) -> usize {
    DIAMETER_SAMPLES.max(2 * f.order() + 1)
}

fn disk_diameter(f: &DiskMap) -> Result<f64> {
    let b = f.boundary(boundary_samples(f))?;
    let mut d = 0.0_f64;
    for i in 0..b.len() {
        for j in i + 1..b.len() {
            d = d.max(point_dist(&b[i], &b[j]));
        }
    }
    Ok(d)
}

fn nearest_solved(nodes: &[AtlasNode], t: &[f64], candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for i in candidates {
        if nodes[i].disk.is_none() {
            continue;
        }
        let d = dist(&nodes[i].t, t);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

fn solve_node(
    field: &PhiField,
    t: &[f64],
    init: Option<&DiskMap>,
    opts: &SolveOptions,
) -> (Option<AttachedDisk>, Option<String>, Option<f64>) {
    match solve_disk(t, field, init, opts) {
        Ok(disk) => {
            let diameter = disk_diameter(&disk.f).ok();
            (Some(disk), None, diameter)
        }
        Err(e) => (None, Some(format!("{}: {e}", e.kind())), None),
    }
}

/// Solves `t = 0` cold, then continues outward over the ball grid.
pub fn build_foliation(field: &PhiField, opts: &FoliationOptions) -> Result<FoliationAtlas> {
    let grid = ball_grid(field.dimension(), opts.t_max, opts.h)?;
    let mut nodes: Vec<AtlasNode> = grid
        .into_iter()
        .map(|(t, shell)| AtlasNode {
            t,
            shell,
            parent: None,
            disk: None,
            failure: None,
            diameter: None,
            distance_to_locus: None,
        })
        .collect();
    let root = solve_disk(&nodes[0].t, field, None, &opts.solve)
        .map_err(|e| Error::Foliation(format!("root disk at t = 0 failed: {e}")))?;
    nodes[0].diameter = disk_diameter(&root.f).ok();
    nodes[0].disk = Some(root);
    let shells = nodes.iter().map(|n| n.shell).max().unwrap_or(0);
    for k in 1..=shells {
        let members: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].shell == k).collect();
        match opts.continuation {
            Continuation::Shells => {
                let inner: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].shell < k).collect();
                let snapshot = &nodes;
                let results: Vec<_> = members
                    .par_iter()
                    .map(|&i| {
                        let t = &snapshot[i].t;
                        let parent = nearest_solved(snapshot, t, inner.iter().copied());
                        let init = parent.and_then(|p| snapshot[p].disk.as_ref()).map(|d| &d.f);
                        (parent, solve_node(field, t, init, &opts.solve))
                    })
                    .collect();
                for (&i, (parent, (disk, failure, diameter))) in members.iter().zip(results) {
                    nodes[i].parent = parent;
                    nodes[i].disk = disk;
                    nodes[i].failure = failure;
                    nodes[i].diameter = diameter;
                }
            }
            Continuation::Sweep => {
                for &i in members.iter().rev() {
                    let t = nodes[i].t.clone();
                    let parent = nearest_solved(&nodes, &t, (0..nodes.len()).filter(|&j| j != i));
                    let init = parent.and_then(|p| nodes[p].disk.as_ref()).map(|d| d.f.clone());
                    let (disk, failure, diameter) = solve_node(field, &t, init.as_ref(), &opts.solve);
                    nodes[i].parent = parent;
                    nodes[i].disk = disk;
                    nodes[i].failure = failure;
                    nodes[i].diameter = diameter;
                }
            }
        }
    }
    Ok(FoliationAtlas {
        dimension: field.dimension(),
        order: opts.solve.order,
        t_max: opts.t_max,
        h: opts.h,
        tol: opts.solve.tol,
        continuation: opts.continuation,
        nodes,
    })
}

/// Largest disk-wise sup distance between matching solved disks of two atlases.
pub fn atlas_distance(a: &FoliationAtlas, b: &FoliationAtlas, nodes: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for disk in a.disks() {
        let Some(other) = b.disks().find(|d| dist(&d.t, &disk.t) <= DUPLICATE_TOL) else {
            return Err(Error::Domain(format!("t = {:?} missing from the second atlas", disk.t)));
        };
        worst = worst.max(disk.f.sup_distance(&other.f, nodes)?);
    }
    Ok(worst)
}

/// A disk sample `ξ ↦ f_t(ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskSample {
    pub xi: Complex64,
    pub z: Vec<Complex64>,
}

/// Samples `f` at the center and on rings `|ξ| ∈ {1/3, 2/3, 1}` with `angles` points each.
pub fn sample_disk(f: &DiskMap, angles: usize) -> Result<Vec<DiskSample>> {
    let mut xis = vec![Complex64::new(0.0, 0.0)];
    for r in [1.0 / 3.0, 2.0 / 3.0, 1.0] {
        for m in 0..angles {
            xis.push(Complex64::from_polar(r, 2.0 * PI * m as f64 / angles as f64));
        }
    }
    xis.into_iter()
        .map(|xi| Ok(DiskSample { xi, z: f.evaluate(xi)? }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub disks: usize,
    pub samples_per_disk: usize,
    /// Smallest distance between the sample clouds of two distinct disks.
    pub min_distance: f64,
    /// Fitted constant `c = min d(t, t') / ‖t − t'‖` over distinct parameters.
    pub lipschitz_lower: f64,
    pub duplicate_parameters: usize,
    pub max_membership_defect: f64,
    pub boundary_samples: usize,
    pub boundary_failures: usize,
    pub disjoint: bool,
    pub passed: bool,
}

struct Cloud {
    t: Vec<f64>,
    points: Vec<Vec<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn cloud(t: &[f64], samples: &[DiskSample]) -> Cloud {
    let points: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.z.iter().flat_map(|c| [c.re, c.im]).collect())
        .collect();
    let dim = points[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in &points {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Cloud {
        t: t.to_vec(),
        points,
        lo,
        hi,
    }
}

fn box_distance(a: &Cloud, b: &Cloud) -> f64 {
    (0..a.lo.len())
        .map(|k| {
            let gap = (b.lo[k] - a.hi[k]).max(a.lo[k] - b.hi[k]).max(0.0);
            gap * gap
        })
        .sum::<f64>()
        .sqrt()
}

fn cloud_distance(a: &Cloud, b: &Cloud) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.points {
        for q in &b.points {
            let d2: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Sampled disjointness and boundary-membership checks over the solved disks.
pub fn check_embedding(atlas: &FoliationAtlas, field: &PhiField, angles: usize) -> Result<EmbeddingReport> {
    let disks: Vec<&AttachedDisk> = atlas.disks().collect();
    let samples: Vec<Vec<DiskSample>> = disks
        .par_iter()
        .map(|d| sample_disk(&d.f, angles))
        .collect::<Result<_>>()?;
    let clouds: Vec<Cloud> = disks.iter().zip(&samples).map(|(d, s)| cloud(&d.t, s)).collect();

    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    let mut duplicates = 0;
    for i in 0..clouds.len() {
        for j in i + 1..clouds.len() {
            let dt = dist(&clouds[i].t, &clouds[j].t);
            if dt <= DUPLICATE_TOL {
                duplicates += 1;
            } else {
                pairs.push((i, j, dt));
            }
        }
    }
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2));
    let nearest_dt = pairs.first().map(|p| p.2).unwrap_or(f64::INFINITY);
    let (near, far): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|p| p.2 <= 1.5 * nearest_dt);

    let exact = |list: &[(usize, usize, f64)]| -> (f64, f64) {
        list.par_iter()
            .map(|&(i, j, dt)| {
                let d = cloud_distance(&clouds[i], &clouds[j]);
                (d, d / dt)
            })
            .reduce(|| (f64::INFINITY, f64::INFINITY), |a, b| (a.0.min(b.0), a.1.min(b.1)))
    };
    let (d0, c0) = exact(&near);
    let remaining: Vec<_> = far
        .into_iter()
        .filter(|&(i, j, dt)| {
            let lb = box_distance(&clouds[i], &clouds[j]);
            lb < d0 || lb / dt < c0
        })
        .collect();
    let (d1, c1) = exact(&remaining);
    let (mut min_distance, mut c) = (d0.min(d1), c0.min(c1));

    let tol = 10.0 * atlas.tol;
    let defects: Vec<f64> = samples
        .par_iter()
        .flat_map_iter(|s| {
            s.iter()
                .filter(|p| (p.xi.norm() - 1.0).abs() < 1e-14)
                .map(|p| p.z.clone())
        })
        .map(|z| field.membership_defect(&z).unwrap_or(f64::INFINITY))
        .collect();
    let boundary_failures = defects.iter().filter(|&&d| !(d <= tol)).count();
    let max_membership_defect = defects.iter().copied().fold(0.0, f64::max);
    if duplicates > 0 {
        min_distance = 0.0;
        c = 0.0;
    }
    let disjoint = duplicates == 0 && min_distance > 0.0 && c > 0.0;
    let empty = clouds.len() < 2;
    Ok(EmbeddingReport {
        disks: clouds.len(),
        samples_per_disk: 1 + 3 * angles,
        min_distance: if empty { 0.0 } else { min_distance },
        lipschitz_lower: if empty { 0.0 } else { c },
        duplicate_parameters: duplicates,
        max_membership_defect,
        boundary_samples: defects.len(),
        boundary_failures,
        disjoint,
        passed: disjoint && boundary_failures == 0,
    })
}

/// One sample `(z₁, x') ↦ y'` of the graph representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSample {
    pub z1: Complex64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphModel {
    pub samples: Vec<GraphSample>,
    /// Radii of the sampling rings and the number of angles per ring.
    pub rings: Vec<f64>,
    pub angles: usize,
    pub sup_norm: f64,
    pub lipschitz: f64,
}

fn graph_key(s: &GraphSample) -> Vec<i64> {
    [s.z1.re, s.z1.im]
        .iter()
        .chain(&s.x)
        .map(|v| (v / GRAPH_QUANTUM).round() as i64)
        .collect()
}

fn base_dist(a: &GraphSample, b: &GraphSample) -> f64 {
    ((a.z1 - b.z1).norm_sqr() + a.x.iter().zip(&b.x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).sqrt()
}

fn fiber_dist(a: &GraphSample, b: &GraphSample) -> f64 {
    dist(&a.y, &b.y)
}

impl GraphModel {
    /// Checks single-valuedness: equal `(z₁, x')` keys must carry `y'` within `tol`.
    ///
    /// `neighbors` lists sample pairs used for the Lipschitz estimate.
    pub fn from_samples(samples: Vec<GraphSample>, neighbors: &[(usize, usize)], tol: f64) -> Result<Self> {
        let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            if let Some(&j) = seen.get(&graph_key(s)) {
                let gap = fiber_dist(s, &samples[j]);
                if gap > tol {
                    return Err(Error::Graph(format!(
                        "two sheets over (z₁, x') = ({}, {:?}): y' differs by {gap:.3e}",
                        s.z1, s.x
                    )));
                }
            } else {
                seen.insert(graph_key(s), i);
            }
        }
        let sup_norm = samples
            .iter()
            .map(|s| s.y.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let lipschitz = neighbors
            .iter()
            .filter_map(|&(i, j)| {
                let d = base_dist(&samples[i], &samples[j]);
                (d > GRAPH_QUANTUM).then(|| fiber_dist(&samples[i], &samples[j]) / d)
            })
            .fold(0.0, f64::max);
        Ok(Self {
            samples,
            rings: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
            angles: 0,
            sup_norm,
            lipschitz,
        })
    }
}

/// Collects disk samples into the graph `y' = H(z₁, x')` over the projection `(z₁, x')`.
pub fn graph_fit(atlas: &FoliationAtlas, angles: usize) -> Result<GraphModel> {
    let mut samples = Vec::new();
    let mut neighbors = Vec::new();
    let per = 1 + 3 * angles;
    let mut offsets = HashMap::new();
    for (idx, node) in atlas.nodes.iter().enumerate() {
        let Some(disk) = &node.disk else { continue };
        let base = samples.len();
        offsets.insert(idx, base);
        for s in sample_disk(&disk.f, angles)? {
            samples.push(GraphSample {
                z1: s.z[0],
                x: s.z[1..].iter().map(|c| c.re).collect(),
                y: s.z[1..].iter().map(|c| c.im).collect(),
            });
        }
        for ring in 0..3 {
            for m in 0..angles {
                let i = base + 1 + ring * angles + m;
                neighbors.push((i, base + 1 + ring * angles + (m + 1) % angles));
                neighbors.push((i, if ring == 0 { base } else { i - angles }));
            }
        }
    }
    for (idx, node) in atlas.nodes.iter().enumerate() {
        if let (Some(&a), Some(&b)) = (offsets.get(&idx), node.parent.and_then(|p| offsets.get(&p))) {
            neighbors.extend((0..per).map(|k| (a + k, b + k)));
        }
    }
    let mut model = GraphModel::from_samples(samples, &neighbors, 10.0 * atlas.tol)?;
    model.angles = angles;
    Ok(model)
}

/// Largest distance of any disk of an unperturbed atlas from `g_t`.
pub fn deviation_from_ball(atlas: &FoliationAtlas, nodes: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for disk in atlas.disks() {
        worst = worst.max(disk.f.sup_distance(&g_t(&disk.t, atlas.order)?, nodes)?);
    }
    Ok(worst)
}
