//! Atlas files: JSON documents, CSV sample tables and legacy VTK polydata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::attach::{AttachedDisk, DiskMap};
use crate::error::{Error, Result};
use crate::foliation::{sample_disk, AtlasNode, Continuation, DiskSample, FoliationAtlas};
use crate::fourier::DiskFunction;
use crate::indices::IndexReport;
use crate::perturbation::{fmt_f64, FORMAT_VERSION};

pub const DEFAULT_EXPORT_ANGLES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Csv,
    Vtk,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::Vtk => "vtk",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "vtk" => Ok(Self::Vtk),
            other => Err(Error::Parse(format!("unknown export format {other:?}"))),
        }
    }
}

type Pair = [f64; 2];

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

fn unpair(p: &Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasMeta {
    pub format: String,
    pub dimension: usize,
    pub order: usize,
    pub t_max: f64,
    pub h: f64,
    pub tol: f64,
    pub continuation: Continuation,
    pub angles: usize,
    pub rings: Vec<f64>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub sphere: f64,
    pub imag: f64,
    pub update: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorRecord {
    pub xi: Pair,
    pub z: Vec<Pair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskRecord {
    pub node: usize,
    pub t: Vec<f64>,
    pub shell: usize,
    pub parent: Option<usize>,
    /// Taylor coefficients `c_0, …, c_N` of each component.
    pub coeffs: Vec<Vec<Pair>>,
    pub residuals: ResidualRecord,
    pub iterations: usize,
    pub newton_steps: usize,
    pub diameter: Option<f64>,
    pub distance_to_locus: Option<f64>,
    /// `f(ξ)` at equispaced boundary nodes, one `[re, im]` pair per component.
    pub boundary: Vec<Vec<Pair>>,
    pub interior: Vec<InteriorRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub node: usize,
    pub t: Vec<f64>,
    pub shell: usize,
    pub parent: Option<usize>,
    pub failure: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasDocument {
    pub meta: AtlasMeta,
    pub disks: Vec<DiskRecord>,
    #[serde(default)]
    pub failures: Vec<FailureRecord>,
    #[serde(default)]
    pub indices: Vec<IndexReport>,
}

fn split_samples(samples: &[DiskSample]) -> (Vec<Vec<Pair>>, Vec<InteriorRecord>) {
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for s in samples {
        let z: Vec<Pair> = s.z.iter().copied().map(pair).collect();
        if (s.xi.norm() - 1.0).abs() < 1e-14 {
            boundary.push(z);
        } else {
            interior.push(InteriorRecord { xi: pair(s.xi), z });
        }
    }
    (boundary, interior)
}

impl AtlasDocument {
    pub fn from_atlas(
        atlas: &FoliationAtlas,
        indices: Vec<IndexReport>,
        angles: usize,
        extra: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self> {
        let mut disks = Vec::new();
        let mut failures = Vec::new();
        for (idx, node) in atlas.nodes.iter().enumerate() {
            match &node.disk {
                Some(disk) => {
                    let (boundary, interior) = split_samples(&sample_disk(&disk.f, angles)?);
                    disks.push(DiskRecord {
                        node: idx,
                        t: node.t.clone(),
                        shell: node.shell,
                        parent: node.parent,
                        coeffs: disk
                            .f
                            .components()
                            .iter()
                            .map(|c| c.taylor().iter().copied().map(pair).collect())
                            .collect(),
                        residuals: ResidualRecord {
                            sphere: disk.sphere_residual,
                            imag: disk.imag_residual,
                            update: disk.update_norm,
                        },
                        iterations: disk.iterations,
                        newton_steps: disk.newton_steps,
                        diameter: node.diameter,
                        distance_to_locus: node.distance_to_locus,
                        boundary,
                        interior,
                    });
                }
                None => failures.push(FailureRecord {
                    node: idx,
                    t: node.t.clone(),
                    shell: node.shell,
                    parent: node.parent,
                    failure: node.failure.clone().unwrap_or_default(),
                }),
            }
        }
        Ok(Self {
            meta: AtlasMeta {
                format: FORMAT_VERSION.into(),
                dimension: atlas.dimension,
                order: atlas.order,
                t_max: atlas.t_max,
                h: atlas.h,
                tol: atlas.tol,
                continuation: atlas.continuation,
                angles,
                rings: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
                extra,
            },
            disks,
            failures,
            indices,
        })
    }

    /// Rebuilds the atlas from stored coefficients.
    pub fn to_atlas(&self) -> Result<FoliationAtlas> {
        if self.meta.format != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported atlas format {:?} (expected {FORMAT_VERSION:?})",
                self.meta.format
            )));
        }
        let count = self.disks.len() + self.failures.len();
        let mut nodes: Vec<Option<AtlasNode>> = vec![None; count];
        for d in &self.disks {
            let components = d
                .coeffs
                .iter()
                .map(|c| {
                    let taylor: Vec<Complex64> = c.iter().map(unpair).collect();
                    DiskFunction::from_taylor(self.meta.order, &taylor)
                })
                .collect();
            let disk = AttachedDisk {
                t: d.t.clone(),
                f: DiskMap::new(components)?,
                sphere_residual: d.residuals.sphere,
                imag_residual: d.residuals.imag,
                update_norm: d.residuals.update,
                iterations: d.iterations,
                newton_steps: d.newton_steps,
            };
            let slot = nodes
                .get_mut(d.node)
                .ok_or_else(|| Error::Parse(format!("disk node index {} out of range", d.node)))?;
            *slot = Some(AtlasNode {
                t: d.t.clone(),
                shell: d.shell,
                parent: d.parent,
                disk: Some(disk),
                failure: None,
                diameter: d.diameter,
                distance_to_locus: d.distance_to_locus,
            });
        }
        for f in &self.failures {
            let slot = nodes
                .get_mut(f.node)
                .ok_or_else(|| Error::Parse(format!("failure node index {} out of range", f.node)))?;
            *slot = Some(AtlasNode {
                t: f.t.clone(),
                shell: f.shell,
                parent: f.parent,
                disk: None,
                failure: Some(f.failure.clone()),
                diameter: None,
                distance_to_locus: None,
            });
        }
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.ok_or_else(|| Error::Parse(format!("atlas node {i} missing"))))
            .collect::<Result<_>>()?;
        Ok(FoliationAtlas {
            dimension: self.meta.dimension,
            order: self.meta.order,
            t_max: self.meta.t_max,
            h: self.meta.h,
            tol: self.meta.tol,
            continuation: self.meta.continuation,
            nodes,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("atlas json: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// One row per disk sample: `t…, xi_re, xi_im, z1_re, z1_im, …`.
pub fn atlas_csv(atlas: &FoliationAtlas, angles: usize) -> Result<String> {
    let n = atlas.dimension;
    let mut out = String::new();
    let mut header: Vec<String> = (1..n).map(|j| format!("t{j}")).collect();
    header.push("xi_re".into());
    header.push("xi_im".into());
    for j in 1..=n {
        header.push(format!("z{j}_re"));
        header.push(format!("z{j}_im"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for disk in atlas.disks() {
        for s in sample_disk(&disk.f, angles)? {
            let mut row: Vec<String> = disk.t.iter().map(|&x| fmt_f64(x)).collect();
            row.push(fmt_f64(s.xi.re));
            row.push(fmt_f64(s.xi.im));
            for z in &s.z {
                row.push(fmt_f64(z.re));
                row.push(fmt_f64(z.im));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    Ok(out)
}

/// Legacy ASCII polydata: boundary loops as lines, the sampled disks as triangles.
///
/// Points are `(Re z₁, Im z₁, Re z₂)`.
pub fn atlas_vtk(atlas: &FoliationAtlas, angles: usize) -> Result<String> {
    let disks: Vec<&AttachedDisk> = atlas.disks().collect();
    let per = 1 + 3 * angles;
    let mut points = Vec::with_capacity(disks.len() * per);
    let mut owner = Vec::with_capacity(points.capacity());
    let mut fiber = Vec::with_capacity(points.capacity());
    for (d, disk) in disks.iter().enumerate() {
        for s in sample_disk(&disk.f, angles)? {
            let third = s.z.get(1).map(|c| c.re).unwrap_or(0.0);
            points.push([s.z[0].re, s.z[0].im, third]);
            owner.push(d);
            fiber.push(s.z[1..].iter().map(|c| c.im * c.im).sum::<f64>().sqrt());
        }
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "levi-hull atlas n={} order={}", atlas.dimension, atlas.order);
    out.push_str("ASCII\nDATASET POLYDATA\n");
    let _ = writeln!(out, "POINTS {} double", points.len());
    for p in &points {
        let _ = writeln!(out, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
    }
    let ring = |d: usize, r: usize, m: usize| d * per + 1 + r * angles + (m % angles);
    let _ = writeln!(out, "LINES {} {}", disks.len(), disks.len() * (angles + 2));
    for d in 0..disks.len() {
        let ids: Vec<String> = (0..=angles).map(|m| ring(d, 2, m).to_string()).collect();
        let _ = writeln!(out, "{} {}", angles + 1, ids.join(" "));
    }
    let triangles = 5 * angles;
    let _ = writeln!(
        out,
        "POLYGONS {} {}",
        disks.len() * triangles,
        disks.len() * triangles * 4
    );
    for d in 0..disks.len() {
        let center = d * per;
        for m in 0..angles {
            let _ = writeln!(out, "3 {} {} {}", center, ring(d, 0, m), ring(d, 0, m + 1));
        }
        for r in 0..2 {
            for m in 0..angles {
                let (a, b) = (ring(d, r, m), ring(d, r, m + 1));
                let (c, e) = (ring(d, r + 1, m), ring(d, r + 1, m + 1));
                let _ = writeln!(out, "3 {a} {c} {e}");
                let _ = writeln!(out, "3 {a} {e} {b}");
            }
        }
    }
    let _ = writeln!(out, "POINT_DATA {}", points.len());
    out.push_str("SCALARS disk int 1\nLOOKUP_TABLE default\n");
    for d in &owner {
        let _ = writeln!(out, "{d}");
    }
    out.push_str("SCALARS t_norm double 1\nLOOKUP_TABLE default\n");
    for &d in &owner {
        let t = disks[d].t.iter().map(|x| x * x).sum::<f64>().sqrt();
        let _ = writeln!(out, "{}", fmt_f64(t));
    }
    out.push_str("SCALARS fiber_norm double 1\nLOOKUP_TABLE default\n");
    for y in &fiber {
        let _ = writeln!(out, "{}", fmt_f64(*y));
    }
    Ok(out)
}

/// Writes the atlas in `format` to `path`.
pub fn export_mesh(
    atlas: &FoliationAtlas,
    format: ExportFormat,
    path: &Path,
    angles: usize,
    indices: Vec<IndexReport>,
    extra: BTreeMap<String, serde_json::Value>,
) -> Result<()> {
    let text = match format {
        ExportFormat::Json => AtlasDocument::from_atlas(atlas, indices, angles, extra)?.to_json()?,
        ExportFormat::Csv => atlas_csv(atlas, angles)?,
        ExportFormat::Vtk => atlas_vtk(atlas, angles)?,
    };
    fs::write(path, text)?;
    Ok(())
}
