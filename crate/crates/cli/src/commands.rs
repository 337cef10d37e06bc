//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use levi_hull::attach::{solve_disk, verify_attachment};
use levi_hull::export::{export_mesh, AtlasDocument, ExportFormat};
use levi_hull::foliation::{
    build_foliation, check_embedding, graph_fit, Continuation, FoliationAtlas, FoliationOptions, DIRECTION_SEED,
};
use levi_hull::indices::{boundary_frame, verify_partial_indices, IndexReport};
use levi_hull::locus::{s_grid, trace_locus, LocusReport};
use levi_hull::perturbation::{c3_norm_estimate, fmt_f64, PerturbationSpec, PhiField, C3_SAMPLE_SEED, FORMAT_VERSION};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{InputError, InvariantError};

pub const WORKERS_ENV: &str = "LEVI_HULL_WORKERS";
const AUDIT_FACTOR: f64 = 10.0;

/// Validated configuration, perturbation and output location of one run.
pub struct Inputs {
    pub config: RunConfig,
    pub spec: PerturbationSpec,
    pub fingerprint: String,
    pub out_dir: PathBuf,
}

impl Inputs {
    pub fn load(config: &Path, spec: &Path, out: Option<&Path>) -> Result<Self> {
        let config = RunConfig::load(config)?;
        let text =
            fs::read_to_string(spec).map_err(|e| InputError(format!("cannot read spec {}: {e}", spec.display())))?;
        let spec = PerturbationSpec::from_toml_str(&text).context("parsing perturbation spec")?;
        Self::new(config, spec, out)
    }

    pub fn new(config: RunConfig, spec: PerturbationSpec, out: Option<&Path>) -> Result<Self> {
        if config.dimension != spec.dimension {
            return Err(InputError(format!(
                "config dimension {} differs from spec dimension {}",
                config.dimension, spec.dimension
            ))
            .into());
        }
        let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output.dir.clone());
        if !out_dir.is_dir() {
            return Err(InputError(format!("output directory {} does not exist", out_dir.display())).into());
        }
        let fingerprint = fingerprint(&config, &spec);
        Ok(Self {
            config,
            spec,
            fingerprint,
            out_dir,
        })
    }

    pub fn field(&self) -> Result<PhiField> {
        Ok(PhiField::new(
            self.spec.clone(),
            self.config.tube_radius,
            self.config.newton_tol,
        )?)
    }

    fn meta(&self, command: &str) -> BTreeMap<String, Value> {
        let mut meta = BTreeMap::new();
        meta.insert("format".into(), json!(FORMAT_VERSION));
        meta.insert("command".into(), json!(command));
        meta.insert("fingerprint".into(), json!(self.fingerprint));
        meta.insert(
            "config".into(),
            serde_json::to_value(&self.config).expect("config serializes"),
        );
        meta.insert("spec".into(), json!(self.spec.to_toml_string()));
        meta.insert("c3_norm_estimate".into(), json!(c3_norm_estimate(&self.spec)));
        meta.insert(
            "seeds".into(),
            json!({ "c3_sampling": C3_SAMPLE_SEED, "directions": DIRECTION_SEED }),
        );
        meta
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        let text = levi_hull::json::to_string(value)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// SHA-256 over the canonical config and spec texts.
pub fn fingerprint(config: &RunConfig, spec: &PerturbationSpec) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config.canonical().as_bytes());
    hasher.update(b"\n--\n");
    hasher.update(spec.to_toml_string().as_bytes());
    hex::encode(hasher.finalize())
}

/// Worker count: the environment override, else the config value.
pub fn worker_count(config_workers: usize) -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| InputError(format!("{WORKERS_ENV}={v:?} is not a worker count")).into()),
        Err(_) => Ok(config_workers),
    }
}

/// Runs `f` on a pool of `workers` threads (`0` for every core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| InvariantError(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

pub fn parse_t(text: &str, dimension: usize) -> Result<Vec<f64>> {
    let t = text
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| InputError(format!("t entry {s:?} is not a number")))
        })
        .collect::<std::result::Result<Vec<f64>, InputError>>()?;
    if t.len() + 1 != dimension {
        return Err(InputError(format!("t has {} entries, expected {}", t.len(), dimension - 1)).into());
    }
    Ok(t)
}

/// One parameter per non-empty, non-comment line.
pub fn parse_t_list(path: &Path, dimension: usize) -> Result<Vec<Vec<f64>>> {
    let text =
        fs::read_to_string(path).map_err(|e| InputError(format!("cannot read t-list {}: {e}", path.display())))?;
    let list = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_t(l, dimension))
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        return Err(InputError(format!("t-list {} is empty", path.display())).into());
    }
    Ok(list)
}

#[derive(Serialize)]
struct DiskReport {
    meta: BTreeMap<String, Value>,
    t: Vec<f64>,
    order: usize,
    coeffs: Vec<Vec<[f64; 2]>>,
    residuals: Value,
    normalization: Value,
    iterations: usize,
    newton_steps: usize,
}

pub fn cmd_solve_disk(inputs: &Inputs, t: &[f64]) -> Result<PathBuf> {
    let field = inputs.field()?;
    let opts = inputs.config.solve_options();
    let disk = solve_disk(t, &field, None, &opts).with_context(|| format!("solving the disk at t = {t:?}"))?;
    let (sphere, imag) = verify_attachment(&field, &disk.f, 4 * opts.order)?;
    let bound = AUDIT_FACTOR * opts.tol;
    if !(sphere <= bound && imag <= bound) {
        return Err(InvariantError(format!(
            "pointwise re-check of the disk failed: sphere {sphere:.3e}, imag {imag:.3e}"
        ))
        .into());
    }
    let (at_zero, d_re, d_im) = disk.normalization();
    let report = DiskReport {
        meta: inputs.meta("solve-disk"),
        t: t.to_vec(),
        order: opts.order,
        coeffs: disk
            .f
            .components()
            .iter()
            .map(|c| c.taylor().iter().map(|z| [z.re, z.im]).collect())
            .collect(),
        residuals: json!({
            "sphere": disk.sphere_residual,
            "imag": disk.imag_residual,
            "update": disk.update_norm,
            "verified_sphere": sphere,
            "verified_imag": imag,
        }),
        normalization: json!({ "f1_at_zero": at_zero, "f1_prime_re": d_re, "f1_prime_im": d_im }),
        iterations: disk.iterations,
        newton_steps: disk.newton_steps,
    };
    let path = inputs.write_json("disk.json", &report)?;
    println!(
        "disk t={t:?}: sphere residual {}, imag residual {}, {} iterations",
        fmt_f64(sphere),
        fmt_f64(imag),
        disk.iterations
    );
    Ok(path)
}

/// Builds the atlas and writes it with its embedding and graph reports.
pub fn cmd_foliate(inputs: &Inputs) -> Result<FoliationAtlas> {
    let field = inputs.field()?;
    let cfg = &inputs.config;
    let mut opts = FoliationOptions::new(cfg.order, cfg.t_max, cfg.resolution, cfg.solver_tol)
        .with_continuation(Continuation::Shells);
    opts.solve.max_iter = cfg.max_iter;
    let mut atlas = build_foliation(&field, &opts)?;
    let locus = trace_locus(&field, &s_grid(cfg.dimension, cfg.s_grid), cfg.locus_tol)?;
    atlas.annotate_locus(&locus)?;
    let nearest_locus = atlas
        .nodes
        .iter()
        .filter_map(|n| n.distance_to_locus)
        .fold(f64::INFINITY, f64::min);

    let audit: Vec<(f64, f64)> = atlas
        .disks()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|d| verify_attachment(&field, &d.f, 4 * cfg.order))
        .collect::<levi_hull::Result<_>>()?;
    let worst = audit.iter().map(|(s, i)| s.max(*i)).fold(0.0, f64::max);
    if !(worst <= AUDIT_FACTOR * cfg.solver_tol) {
        return Err(InvariantError(format!("pointwise re-check of the atlas failed: {worst:.3e}")).into());
    }

    let meta = inputs.meta("foliate");
    for format in &cfg.output.formats {
        let path = inputs.out_dir.join(format!("atlas.{}", format.extension()));
        export_mesh(&atlas, *format, &path, cfg.export_angles, vec![], meta.clone())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let embedding = check_embedding(&atlas, &field, cfg.export_angles)?;
    inputs.write_json(
        "embedding.json",
        &json!({
            "meta": meta,
            "report": embedding,
            "audit_max_residual": worst,
            "coverage": {
                "t_max": cfg.t_max,
                "solved": atlas.solved_count(),
                "frontier_failures": atlas.failures().count(),
                "uncovered_caps": format!("{} < |t| < 1", cfg.t_max),
                "nearest_locus_distance": nearest_locus,
                "locus_max_gamma": locus.max_gamma,
            },
        }),
    )?;
    let graph = graph_fit(&atlas, cfg.export_angles)?;
    inputs.write_json(
        "graph.json",
        &json!({
            "meta": meta,
            "sup_norm": graph.sup_norm,
            "lipschitz": graph.lipschitz,
            "samples": graph.samples.len(),
            "rings": graph.rings,
            "angles": graph.angles,
        }),
    )?;
    println!(
        "atlas: {} disks, {} frontier failures, max residual {}",
        atlas.solved_count(),
        atlas.failures().count(),
        fmt_f64(worst)
    );
    println!(
        "embedding: c = {}, min distance {}, {}",
        fmt_f64(embedding.lipschitz_lower),
        fmt_f64(embedding.min_distance),
        if embedding.passed { "pass" } else { "FAIL" }
    );
    println!(
        "uncovered caps: {} < |t| < 1, nearest singular point at distance {}",
        cfg.t_max,
        fmt_f64(nearest_locus)
    );
    println!(
        "graph: sup|H| = {}, lipschitz {}",
        fmt_f64(graph.sup_norm),
        fmt_f64(graph.lipschitz)
    );
    Ok(atlas)
}

pub fn cmd_locus(inputs: &Inputs) -> Result<LocusReport> {
    let field = inputs.field()?;
    let cfg = &inputs.config;
    let grid = s_grid(cfg.dimension, cfg.s_grid);
    let report = trace_locus(&field, &grid, cfg.locus_tol)?;
    inputs.write_json("locus.json", &json!({ "meta": inputs.meta("locus"), "report": report }))?;
    let n = cfg.dimension;
    let mut csv: Vec<String> = (1..n).map(|j| format!("s{j}")).collect();
    csv.extend(["z1_re", "z1_im", "residual", "jacobian_cond"].map(String::from));
    let mut text = csv.join(",") + "\n";
    for s in &report.samples {
        let mut row: Vec<String> = s.s.iter().map(|&x| fmt_f64(x)).collect();
        row.extend([s.z1.re, s.z1.im, s.residual, s.jacobian_cond].map(fmt_f64));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = inputs.out_dir.join("locus.csv");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "locus: {} points, {} failures, max|Gamma| = {}, connected {:?}",
        report.samples.len(),
        report.failures.len(),
        fmt_f64(report.max_gamma),
        report.connected
    );
    Ok(report)
}

pub fn cmd_indices(inputs: &Inputs, t_list: &[Vec<f64>], atlas_path: Option<&Path>) -> Result<Vec<IndexReport>> {
    let field = inputs.field()?;
    let cfg = &inputs.config;
    let doc = atlas_path
        .map(AtlasDocument::load)
        .transpose()
        .context("loading atlas")?;
    let atlas = match &doc {
        Some(doc) => doc.to_atlas()?,
        None => FoliationAtlas {
            dimension: cfg.dimension,
            order: cfg.order,
            t_max: cfg.t_max,
            h: cfg.resolution,
            tol: cfg.solver_tol,
            continuation: Continuation::Shells,
            nodes: vec![],
        },
    };
    let reports = t_list
        .par_iter()
        .map(|t| {
            let frame = boundary_frame(&field, &atlas, t, cfg.t_step, cfg.frame_nodes)
                .with_context(|| format!("boundary frame at t = {t:?}"))?;
            Ok(verify_partial_indices(&frame, cfg.det_threshold)?)
        })
        .collect::<Result<Vec<_>>>()?;
    inputs.write_json(
        "indices.json",
        &json!({ "meta": inputs.meta("indices"), "indices": reports }),
    )?;
    if let Some(mut doc) = doc {
        doc.indices = reports.clone();
        inputs.write_json("atlas.json", &doc)?;
    }
    for r in &reports {
        println!(
            "indices t={:?}: total {}, neg mass {}, min|det Theta| {}, zeros {:?}: {}",
            r.t,
            r.total_index,
            fmt_f64(r.neg_mode_mass),
            fmt_f64(r.min_det_theta),
            r.zero_count,
            r.verdict()
        );
    }
    Ok(reports)
}

pub fn cmd_export(atlas_path: &Path, format: ExportFormat, output: Option<&Path>) -> Result<PathBuf> {
    let doc = AtlasDocument::load(atlas_path).with_context(|| format!("loading {}", atlas_path.display()))?;
    let atlas = doc.to_atlas()?;
    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| atlas_path.with_extension(format.extension()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            return Err(InputError(format!("output directory {} does not exist", parent.display())).into());
        }
    }
    export_mesh(
        &atlas,
        format,
        &path,
        doc.meta.angles,
        doc.indices.clone(),
        doc.meta.extra.clone(),
    )?;
    println!("wrote {}", path.display());
    Ok(path)
}
